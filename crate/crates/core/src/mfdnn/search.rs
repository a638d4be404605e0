//! Exhaustive hyperparameter search and K-fold validation.
//!
//! The search runs in two stages. Low-fidelity architectures are scored on a
//! seeded hold-out split of the cheap data; the winner is retrained on all of
//! it and frozen. Correction architectures are then scored by K-fold
//! cross-validation on the expensive data.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{train_corr, train_lf, LfStage, MfdnnModel, TrainConfig};
use crate::dataset::SamplePoint;
use crate::error::{Error, Result};

/// Fraction of the cheap data held out to score LF architectures.
pub const LF_VALIDATION_FRACTION: f64 = 0.2;
pub const DEFAULT_FOLDS: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub layers: Vec<usize>,
    /// Every hidden layer of a candidate has the same width.
    pub widths: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub epochs: usize,
    pub lambda: f64,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            layers: vec![1, 2, 3, 4],
            widths: vec![8, 16, 24, 32, 40, 48, 56, 64],
            learning_rates: vec![1e-2, 1e-3, 1e-4],
            epochs: 1800,
            lambda: super::DEFAULT_LAMBDA,
        }
    }
}

impl SearchSpace {
    pub fn configs(&self, seed: u64) -> Vec<TrainConfig> {
        let mut out = Vec::new();
        for &h in &self.layers {
            for &w in &self.widths {
                for &lr in &self.learning_rates {
                    let mut c = TrainConfig::new(vec![w; h], self.epochs, lr).with_seed(seed);
                    c.lambda = self.lambda;
                    out.push(c);
                }
            }
        }
        out
    }

    fn validate(&self) -> Result<()> {
        if self.layers.is_empty() || self.widths.is_empty() || self.learning_rates.is_empty() {
            return Err(Error::InvalidArgument("search ranges must be non-empty".into()));
        }
        if self.layers.iter().any(|&h| !(1..=4).contains(&h)) {
            return Err(Error::InvalidArgument(format!(
                "hidden layer counts must lie in 1..=4, got {:?}",
                self.layers
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub config: TrainConfig,
    /// Infinite when training diverged.
    pub validation_loss: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SearchResult {
    pub lf: Candidate,
    pub corr: Candidate,
    pub lf_evaluated: Vec<Candidate>,
    pub corr_evaluated: Vec<Candidate>,
    /// Both winners retrained on all data.
    pub model: MfdnnModel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KFoldReport {
    pub folds: Vec<Vec<usize>>,
    pub fold_mse: Vec<f64>,
    pub mean_mse: f64,
}

/// Seeded partition of `0..n` into `k` folds whose sizes differ by at most one.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(Error::InvalidArgument(format!("K-fold needs 2 ≤ K ≤ {n}, got K = {k}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); k];
    for (i, j) in idx.into_iter().enumerate() {
        folds[i % k].push(j);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Trains the correction stage `k` times on top of a fixed LF stage, each time
/// scoring the held-out fold.
pub fn kfold_validate(lf: &LfStage, hf_points: &[SamplePoint], config: &TrainConfig, k: usize, seed: u64) -> Result<KFoldReport> {
    let folds = kfold_split(hf_points.len(), k, seed)?;
    let mut fold_mse = Vec::with_capacity(k);
    for fold in &folds {
        let train: Vec<SamplePoint> = (0..hf_points.len())
            .filter(|i| fold.binary_search(i).is_err())
            .map(|i| hf_points[i].clone())
            .collect();
        let model = train_corr(lf.clone(), &train, config)?;
        let mut sse = 0.0;
        for &i in fold {
            sse += (model.predict_hf(&hf_points[i].x)? - hf_points[i].y).powi(2);
        }
        fold_mse.push(sse / fold.len() as f64);
    }
    let mean_mse = fold_mse.iter().sum::<f64>() / k as f64;
    Ok(KFoldReport {
        folds,
        fold_mse,
        mean_mse,
    })
}

fn lf_holdout(points: &[SamplePoint], seed: u64) -> (Vec<SamplePoint>, Vec<SamplePoint>) {
    let n = points.len();
    let held = ((n as f64 * LF_VALIDATION_FRACTION).round() as usize).min(n.saturating_sub(1));
    if held == 0 {
        // too few points to hold any out, so score on the training data
        return (points.to_vec(), points.to_vec());
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (val, train) = idx.split_at(held);
    let pick = |ix: &[usize]| ix.iter().map(|&i| points[i].clone()).collect();
    (pick(train), pick(val))
}

fn score(result: Result<f64>) -> Result<f64> {
    match result {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) | Err(Error::NonFiniteLoss { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

fn best(cands: &[Candidate], stage: &str) -> Result<Candidate> {
    let mut top = &cands[0];
    for c in &cands[1..] {
        if c.validation_loss < top.validation_loss {
            top = c;
        }
    }
    if !top.validation_loss.is_finite() {
        return Err(Error::NonFiniteLoss {
            epoch: top.config.epochs,
            loss: top.validation_loss,
        });
    }
    log::info!(
        "{stage} search: {:?} at lr {} (validation MSE {:.3e})",
        top.config.hidden,
        top.config.learning_rate,
        top.validation_loss
    );
    Ok(top.clone())
}

/// Two-stage exhaustive search; ties keep the first configuration in
/// `(layers, width, learning rate)` order.
pub fn grid_search(lf_points: &[SamplePoint], hf_points: &[SamplePoint], space: &SearchSpace, seed: u64) -> Result<SearchResult> {
    space.validate()?;
    let (lf_train, lf_val) = lf_holdout(lf_points, seed);
    let mut lf_evaluated = Vec::new();
    for config in space.configs(seed) {
        let loss = score(train_lf(&lf_train, &config).and_then(|stage| {
            let mut sse = 0.0;
            for p in &lf_val {
                sse += (stage.predict(&p.x)? - p.y).powi(2);
            }
            Ok(sse / lf_val.len() as f64)
        }))?;
        lf_evaluated.push(Candidate {
            config,
            validation_loss: loss,
        });
    }
    let lf = best(&lf_evaluated, "low-fidelity")?;
    let stage = train_lf(lf_points, &lf.config)?;

    let k = DEFAULT_FOLDS.min(hf_points.len());
    let corr_seed = seed.wrapping_add(1);
    let mut corr_evaluated = Vec::new();
    for config in space.configs(corr_seed) {
        let loss = score(kfold_validate(&stage, hf_points, &config, k, corr_seed).map(|r| r.mean_mse))?;
        corr_evaluated.push(Candidate {
            config,
            validation_loss: loss,
        });
    }
    let corr = best(&corr_evaluated, "correction")?;
    let model = train_corr(stage, hf_points, &corr.config)?;
    Ok(SearchResult {
        lf,
        corr,
        lf_evaluated,
        corr_evaluated,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, f: impl Fn(f64) -> f64) -> Vec<SamplePoint> {
        (0..n)
            .map(|i| {
                let x = i as f64 / (n - 1) as f64;
                SamplePoint::new(vec![x], f(x))
            })
            .collect()
    }

    #[test]
    fn leave_one_out_on_six_points() {
        let folds = kfold_split(6, 6, 3).unwrap();
        assert_eq!(folds.len(), 6);
        assert!(folds.iter().all(|f| f.len() == 1));
    }

    #[test]
    fn folds_partition_the_data() {
        let folds = kfold_split(23, 5, 11).unwrap();
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert_eq!(folds, kfold_split(23, 5, 11).unwrap());
        assert!(kfold_split(4, 5, 0).is_err());
        assert!(kfold_split(4, 1, 0).is_err());
    }

    #[test]
    fn kfold_mean_is_mean_of_folds() {
        let lf = line(11, |x| x.sin());
        let hf = line(6, |x| 2.0 * x.sin() + x);
        let stage = train_lf(&lf, &TrainConfig::new(vec![8], 100, 1e-2)).unwrap();
        let r = kfold_validate(&stage, &hf, &TrainConfig::new(vec![4], 50, 1e-2), 3, 5).unwrap();
        assert_eq!(r.fold_mse.len(), 3);
        let mean = r.fold_mse.iter().sum::<f64>() / 3.0;
        assert!((mean - r.mean_mse).abs() <= 1e-12);
    }

    #[test]
    fn full_space_has_96_configurations() {
        assert_eq!(SearchSpace::default().configs(0).len(), 96);
    }

    #[test]
    fn singleton_space_returns_it() {
        let space = SearchSpace {
            layers: vec![2],
            widths: vec![8],
            learning_rates: vec![1e-2],
            epochs: 40,
            lambda: 1e-4,
        };
        let lf = line(11, |x| x * x);
        let hf = line(4, |x| 2.0 * x * x);
        let r = grid_search(&lf, &hf, &space, 1).unwrap();
        assert_eq!(r.lf.config.hidden, vec![8, 8]);
        assert_eq!(r.corr.config.hidden, vec![8, 8]);
        assert_eq!(r.lf_evaluated.len(), 1);
    }

    #[test]
    fn winner_beats_every_candidate() {
        let space = SearchSpace {
            layers: vec![1, 2],
            widths: vec![4, 8],
            learning_rates: vec![1e-2, 1e-3],
            epochs: 60,
            lambda: 1e-4,
        };
        let lf = line(11, |x| (4.0 * x).sin());
        let hf = line(5, |x| 2.0 * (4.0 * x).sin() - x);
        let r = grid_search(&lf, &hf, &space, 2).unwrap();
        assert_eq!(r.corr_evaluated.len(), 8);
        assert!(r.lf_evaluated.iter().all(|c| r.lf.validation_loss <= c.validation_loss));
        assert!(r.corr_evaluated.iter().all(|c| r.corr.validation_loss <= c.validation_loss));
        let again = grid_search(&lf, &hf, &space, 2).unwrap();
        assert_eq!(again.corr, r.corr);
    }

    #[test]
    fn empty_ranges_are_rejected() {
        let space = SearchSpace {
            widths: vec![],
            ..SearchSpace::default()
        };
        assert!(grid_search(&line(5, |x| x), &line(3, |x| x), &space, 0).is_err());
    }
}
