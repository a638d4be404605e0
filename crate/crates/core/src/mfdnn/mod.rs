//! Two-stage multi-fidelity neural surrogate.
//!
//! A low-fidelity network learns `x ↦ y_L`. It is then frozen, and a
//! correction network learns `(x, ŷ_L(x)) ↦ y_H` from the few expensive
//! samples. Both networks work on standardized inputs and outputs; the
//! affine maps are part of the model.

mod network;
mod search;

pub use network::{relu, Activation, Adam, Dense, Gradients, Network};
pub use search::{grid_search, kfold_split, kfold_validate, Candidate, KFoldReport, SearchResult, SearchSpace};

use ndarray::{concatenate, Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::SamplePoint;
use crate::error::{check_dim, Error, Result};

/// Full-batch training up to this many samples, mini-batches of this size above.
pub const MAX_BATCH: usize = 1024;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// L2 weight penalty; only the correction network uses it.
    pub lambda: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(hidden: Vec<usize>, epochs: usize, learning_rate: f64) -> Self {
        Self {
            hidden,
            epochs,
            learning_rate,
            batch_size: MAX_BATCH,
            lambda: DEFAULT_LAMBDA,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::InvalidArgument(format!(
                "hidden layers must be non-empty with positive widths, got {:?}",
                self.hidden
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!("λ must be ≥ 0, got {}", self.lambda)));
        }
        Ok(())
    }
}

pub const DEFAULT_LAMBDA: f64 = 1e-4;

/// Published architectures for the benchmark cases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Lin1d,
    Nonlin1d,
    Dim32,
    Dim100,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Self::Lin1d, Self::Nonlin1d, Self::Dim32, Self::Dim100];

    /// `(low-fidelity, correction)` training configurations.
    pub fn configs(self) -> (TrainConfig, TrainConfig) {
        match self {
            // 1800 LF epochs at 1e-3 stop well short of interpolating the 21
            // cheap samples, and LF error is doubled in y_H
            Self::Lin1d => (
                TrainConfig::new(vec![64, 64, 40], 5000, 3e-3),
                TrainConfig::new(vec![8], 1800, 1e-3),
            ),
            Self::Nonlin1d => (
                TrainConfig::new(vec![64, 64, 40], 5000, 3e-3),
                TrainConfig::new(vec![64, 56], 1800, 1e-3),
            ),
            Self::Dim32 => (
                TrainConfig::new(vec![512, 256], 400, 1e-3),
                TrainConfig::new(vec![32], 200, 1e-3),
            ),
            Self::Dim100 => (
                // about 20 s per epoch on 100,000 samples
                TrainConfig::new(vec![512, 512, 256, 128], 10, 1e-3),
                TrainConfig::new(vec![64], 200, 1e-3),
            ),
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Lin1d => "lin1d",
            Self::Nonlin1d => "nonlin1d",
            Self::Dim32 => "dim32",
            Self::Dim100 => "dim100",
        })
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.to_string() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown preset `{s}` (expected lin1d, nonlin1d, dim32 or dim100)")))
    }
}

/// Per-column `(v - mean) / std`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &Array2<f64>) -> Self {
        let n = rows.nrows() as f64;
        let mean: Vec<f64> = rows.mean_axis(Axis(0)).expect("non-empty").to_vec();
        let std = (0..rows.ncols())
            .map(|j| {
                let var = rows.column(j).iter().map(|v| (v - mean[j]).powi(2)).sum::<f64>() / n;
                // constant columns pass through centred
                if var.sqrt() > 1e-12 * (1.0 + mean[j].abs()) {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn apply(&self, rows: &Array2<f64>) -> Array2<f64> {
        let mut out = rows.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|v| (v - self.mean[j]) / self.std[j]);
        }
        out
    }

    fn apply_row(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(j, v)| (v - self.mean[j]) / self.std[j]).collect()
    }

    fn scalar(&self, v: f64) -> f64 {
        (v - self.mean[0]) / self.std[0]
    }

    fn unscalar(&self, z: f64) -> f64 {
        self.mean[0] + self.std[0] * z
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Full-data loss before the first step, in raw output units.
    pub initial_loss: f64,
    /// Full-data loss after the last step.
    pub final_loss: f64,
    /// Mean batch loss per epoch.
    pub history: Vec<f64>,
}

/// Trained (and from then on frozen) low-fidelity network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LfStage {
    pub net: Network,
    pub x_scale: Standardizer,
    pub y_scale: Standardizer,
    /// Per-input `(min, max)` of the correction-network inputs over the cheap
    /// sites: standardized x, then the standardized LF prediction.
    pub corr_box: Vec<(f64, f64)>,
    pub log: TrainLog,
}

impl LfStage {
    pub fn dim(&self) -> usize {
        self.x_scale.mean.len()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.y_scale.unscalar(self.net.forward(&self.x_scale.apply_row(x))?))
    }

    /// Correction-network inputs: standardized x next to the standardized
    /// LF prediction.
    fn correction_inputs(&self, x_raw: &Array2<f64>) -> Result<Array2<f64>> {
        let xs = self.x_scale.apply(x_raw);
        let lf = self.net.forward_batch(xs.view())?;
        Ok(concatenate(Axis(1), &[xs.view(), lf.insert_axis(Axis(1)).view()]).expect("same row count"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MfdnnModel {
    pub lf: LfStage,
    pub corr_net: Network,
    pub hf_scale: Standardizer,
    pub lambda_reg: f64,
    pub corr_log: TrainLog,
}

impl MfdnnModel {
    pub fn dim(&self) -> usize {
        self.lf.dim()
    }

    pub fn predict_lf(&self, x: &[f64]) -> Result<f64> {
        self.lf.predict(x)
    }

    /// `corr_net(x, lf_net(x))`, in raw units.
    pub fn predict_hf(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        let mut u = self.lf.x_scale.apply_row(x);
        let lf = self.lf.net.forward(&u)?;
        u.push(lf);
        Ok(self.hf_scale.unscalar(self.corr_net.forward(&u)?))
    }

    pub fn predict_hf_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        if xs.is_empty() {
            return Ok(Vec::new());
        }
        let x = rows(xs, self.dim())?;
        let z = self.corr_net.forward_batch(self.lf.correction_inputs(&x)?.view())?;
        Ok(z.iter().map(|&v| self.hf_scale.unscalar(v)).collect())
    }

    /// `λ Σ w²` over the correction network only.
    pub fn regularization_loss(&self) -> f64 {
        self.lambda_reg * self.corr_net.weight_norm2()
    }

    /// Trains both stages with the given configurations.
    pub fn fit(lf_points: &[SamplePoint], hf_points: &[SamplePoint], lf: &TrainConfig, corr: &TrainConfig) -> Result<Self> {
        let stage = train_lf(lf_points, lf)?;
        train_corr(stage, hf_points, corr)
    }

    pub fn fit_preset(lf_points: &[SamplePoint], hf_points: &[SamplePoint], preset: Preset, seed: u64) -> Result<Self> {
        let (lf, corr) = preset.configs();
        Self::fit(lf_points, hf_points, &lf.with_seed(seed), &corr.with_seed(seed.wrapping_add(1)))
    }
}

fn rows(xs: &[Vec<f64>], dim: usize) -> Result<Array2<f64>> {
    for x in xs {
        check_dim(dim, x.len())?;
    }
    Ok(Array2::from_shape_fn((xs.len(), dim), |(i, j)| xs[i][j]))
}

fn split(points: &[SamplePoint]) -> Result<(Array2<f64>, Array1<f64>)> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("training needs at least one sample".into()));
    }
    let dim = points[0].x.len();
    let xs: Vec<Vec<f64>> = points.iter().map(|p| p.x.clone()).collect();
    Ok((rows(&xs, dim)?, points.iter().map(|p| p.y).collect()))
}

/// Trains a fresh low-fidelity network on `points`.
pub fn train_lf(points: &[SamplePoint], config: &TrainConfig) -> Result<LfStage> {
    config.validate()?;
    let (x, y) = split(points)?;
    let x_scale = Standardizer::fit(&x);
    let y_scale = Standardizer::fit(&y.clone().insert_axis(Axis(1)));
    let xs = x_scale.apply(&x);
    let ys = y.mapv(|v| y_scale.scalar(v));
    let mut net = Network::new(x.ncols(), &config.hidden, config.seed)?;
    let log = optimize(&mut net, &xs, &ys, y_scale.std[0], config, 0.0)?;
    let mut stage = LfStage {
        net,
        x_scale,
        y_scale,
        corr_box: Vec::new(),
        log,
    };
    let u = stage.correction_inputs(&x)?;
    stage.corr_box = u
        .columns()
        .into_iter()
        .map(|c| c.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v))))
        .collect();
    Ok(stage)
}

/// Trains the correction network on `points` with `lf` frozen, starting from
/// [`linear_start_correction`].
pub fn train_corr(lf: LfStage, points: &[SamplePoint], config: &TrainConfig) -> Result<MfdnnModel> {
    config.validate()?;
    let init = linear_start_correction(&lf, points, &config.hidden, config.seed)?;
    train_corr_from(lf, init, points, config)
}

/// Ridge factor for the starting linear fit, relative to the mean diagonal.
const LINEAR_START_RIDGE: f64 = 1e-8;

/// Correction network that starts out as the least-squares linear map from
/// `(x, ŷ_L)` to `y_H`.
///
/// Hidden unit 0 of every layer carries the linear fit, offset so that it
/// stays active on the cheap-data box widened by half its width on each
/// side; the output reads only that unit. The remaining units are random
/// with zero output weight, so training adds nonlinearity only as the data
/// demand it. With four or six expensive points a randomly initialized
/// ReLU correction generalizes far worse than the linear relation it
/// usually has to learn.
pub fn linear_start_correction(lf: &LfStage, points: &[SamplePoint], hidden: &[usize], seed: u64) -> Result<Network> {
    let (x, y) = split(points)?;
    check_dim(lf.dim(), x.ncols())?;
    let mut net = Network::new(x.ncols() + 1, hidden, seed)?;
    let u = lf.correction_inputs(&x)?;
    let hf_scale = Standardizer::fit(&y.clone().insert_axis(Axis(1)));
    let t = y.mapv(|v| hf_scale.scalar(v));
    let coef = ridge_fit(&u, &t);
    let (intercept, slope) = (coef[0], &coef[1..]);

    // lowest value of the linear part over the widened box
    let low: f64 = slope
        .iter()
        .zip(&lf.corr_box)
        .map(|(a, &(lo, hi))| {
            let pad = 0.5 * (hi - lo);
            (a * (lo - pad)).min(a * (hi + pad))
        })
        .sum();
    let shift = 1.0 - low.min(0.0);
    let n = net.layers().len();
    for (l, layer) in net.layers_mut().iter_mut().enumerate() {
        if l == 0 {
            layer.w.column_mut(0).assign(&ndarray::ArrayView1::from(slope));
            layer.b[0] = shift;
        } else if l < n - 1 {
            layer.w.column_mut(0).fill(0.0);
            layer.w[[0, 0]] = 1.0;
            layer.b[0] = 0.0;
        } else {
            layer.w.fill(0.0);
            layer.w[[0, 0]] = 1.0;
            layer.b[0] = intercept - shift;
        }
    }
    Ok(net)
}

/// `[1, u] β ≈ t` with a tiny ridge on the slopes only.
fn ridge_fit(u: &Array2<f64>, t: &Array1<f64>) -> Vec<f64> {
    let (n, k) = (u.nrows(), u.ncols() + 1);
    let a = nalgebra::DMatrix::from_fn(n, k, |i, j| if j == 0 { 1.0 } else { u[[i, j - 1]] });
    let mut g = a.transpose() * &a;
    let mean_diag = (0..k).map(|j| g[(j, j)]).sum::<f64>() / k as f64;
    for j in 1..k {
        g[(j, j)] += LINEAR_START_RIDGE * mean_diag.max(1.0);
    }
    let rhs = a.transpose() * nalgebra::DVector::from_iterator(n, t.iter().copied());
    match g.clone().cholesky() {
        Some(c) => c.solve(&rhs).iter().copied().collect(),
        // a single point leaves the intercept alone
        None => {
            let mut beta = vec![0.0; k];
            beta[0] = t.mean().unwrap_or(0.0);
            beta
        }
    }
}

/// Like [`train_corr`], starting from a given correction network.
pub fn train_corr_from(lf: LfStage, mut corr_net: Network, points: &[SamplePoint], config: &TrainConfig) -> Result<MfdnnModel> {
    config.validate()?;
    let (x, y) = split(points)?;
    check_dim(lf.dim(), x.ncols())?;
    check_dim(lf.dim() + 1, corr_net.input_dim())?;
    let frozen = lf.net.clone();
    let inputs = lf.correction_inputs(&x)?;
    let hf_scale = Standardizer::fit(&y.clone().insert_axis(Axis(1)));
    let ys = y.mapv(|v| hf_scale.scalar(v));
    let corr_log = optimize(&mut corr_net, &inputs, &ys, hf_scale.std[0], config, config.lambda)?;
    assert!(lf.net == frozen, "low-fidelity network changed during correction training");
    Ok(MfdnnModel {
        lf,
        corr_net,
        hf_scale,
        lambda_reg: config.lambda,
        corr_log,
    })
}

/// Correction network that reproduces the LF prediction, rescaled onto the HF
/// standardization: hidden units `relu(±z_L)` recombined in the output layer.
pub fn pass_through_correction(lf: &LfStage, hf_scale: &Standardizer, hidden: usize) -> Result<Network> {
    if hidden < 2 {
        return Err(Error::InvalidArgument("pass-through correction needs at least 2 hidden units".into()));
    }
    let m = lf.dim();
    let mut w1 = Array2::zeros((m + 1, hidden));
    w1[[m, 0]] = 1.0;
    w1[[m, 1]] = -1.0;
    // y_H-standardized = (μ_L + σ_L z - μ_H) / σ_H
    let gain = lf.y_scale.std[0] / hf_scale.std[0];
    let offset = (lf.y_scale.mean[0] - hf_scale.mean[0]) / hf_scale.std[0];
    let mut w2 = Array2::zeros((hidden, 1));
    w2[[0, 0]] = gain;
    w2[[1, 0]] = -gain;
    Network::from_layers(vec![
        Dense {
            w: w1,
            b: Array1::zeros(hidden),
            activation: Activation::Relu,
        },
        Dense {
            w: w2,
            b: Array1::from_elem(1, offset),
            activation: Activation::Identity,
        },
    ])
}

/// `L = s² · MSE + λ Σ w²` and its gradient, for a network fitted to
/// standardized targets. `s` is the target standard deviation, so the data
/// term is the MSE in raw output units.
pub fn penalized_loss(net: &Network, x: &Array2<f64>, y: &Array1<f64>, scale: f64, lambda: f64) -> Result<(f64, Gradients)> {
    let (mse, mut g) = net.mse_gradient(x.view(), y)?;
    let s2 = scale * scale;
    for (gw, layer) in g.w.iter_mut().zip(net.layers()) {
        *gw *= s2;
        if lambda > 0.0 {
            gw.scaled_add(2.0 * lambda, &layer.w);
        }
    }
    for gb in &mut g.b {
        *gb *= s2;
    }
    let penalty = if lambda > 0.0 { lambda * net.weight_norm2() } else { 0.0 };
    Ok((s2 * mse + penalty, g))
}

fn optimize(net: &mut Network, x: &Array2<f64>, y: &Array1<f64>, scale: f64, config: &TrainConfig, lambda: f64) -> Result<TrainLog> {
    let n = x.nrows();
    let full = |net: &Network| penalized_loss(net, x, y, scale, lambda).map(|(l, _)| l);
    let initial_loss = full(net)?;
    if !initial_loss.is_finite() {
        return Err(Error::NonFiniteLoss {
            epoch: 0,
            loss: initial_loss,
        });
    }
    let mut adam = Adam::new(net, config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut order: Vec<usize> = (0..n).collect();
    let batch = config.batch_size.min(n);
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let mut total = 0.0;
        if batch == n {
            let (loss, g) = penalized_loss(net, x, y, scale, lambda)?;
            adam.step(net, &g);
            total = loss;
        } else {
            order.shuffle(&mut rng);
            let chunks = order.chunks(batch);
            let count = chunks.len() as f64;
            for idx in chunks {
                let xb = x.select(Axis(0), idx);
                let yb = y.select(Axis(0), idx);
                let (loss, g) = penalized_loss(net, &xb, &yb, scale, lambda)?;
                adam.step(net, &g);
                total += loss / count;
            }
        }
        if !total.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, loss: total });
        }
        history.push(total);
    }
    let final_loss = full(net)?;
    if !final_loss.is_finite() {
        return Err(Error::NonFiniteLoss {
            epoch: config.epochs,
            loss: final_loss,
        });
    }
    log::debug!("trained {:?}: loss {initial_loss:.3e} -> {final_loss:.3e}", config.hidden);
    Ok(TrainLog {
        epochs: config.epochs,
        learning_rate: config.learning_rate,
        seed: config.seed,
        initial_loss,
        final_loss,
        history,
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
    fn self_generated_data_has_zero_loss() {
        let pts = line(9, |x| x);
        let mut stage = train_lf(&pts, &TrainConfig::new(vec![4], 0, 1e-3)).unwrap();
        let ys: Vec<SamplePoint> = pts
            .iter()
            .map(|p| SamplePoint::new(p.x.clone(), stage.predict(&p.x).unwrap()))
            .collect();
        let (x, y) = split(&ys).unwrap();
        let xs = stage.x_scale.apply(&x);
        let target = y.mapv(|v| stage.y_scale.scalar(v));
        let (loss, _) = penalized_loss(&stage.net, &xs, &target, 1.0, 0.0).unwrap();
        assert!(loss <= 1e-10, "{loss}");
        stage.log.history.clear();
        assert_eq!(stage.log.epochs, 0);
    }

    #[test]
    fn lf_training_reduces_loss() {
        let pts = line(21, |x| (6.0 * x - 2.0).powi(2) * (12.0 * x - 4.0).sin());
        let stage = train_lf(&pts, &TrainConfig::new(vec![32, 32], 600, 1e-2)).unwrap();
        assert!(stage.log.final_loss < stage.log.initial_loss);
        assert_eq!(stage.log.history.len(), 600);
    }

    #[test]
    fn zero_lambda_has_zero_penalty() {
        let lf = line(11, |x| x * x);
        let hf = line(4, |x| 2.0 * x * x);
        let mut corr = TrainConfig::new(vec![4], 50, 1e-3);
        corr.lambda = 0.0;
        let m = MfdnnModel::fit(&lf, &hf, &TrainConfig::new(vec![8], 50, 1e-3), &corr).unwrap();
        assert_eq!(m.regularization_loss(), 0.0);
    }

    #[test]
    fn penalty_ignores_lf_weights() {
        let lf = line(11, |x| x * x);
        let hf = line(4, |x| 2.0 * x * x);
        let mut m = MfdnnModel::fit(&lf, &hf, &TrainConfig::new(vec![8], 20, 1e-3), &TrainConfig::new(vec![4], 20, 1e-3))
            .unwrap();
        for l in m.corr_net.layers_mut() {
            l.w.fill(0.0);
        }
        assert_eq!(m.regularization_loss(), 0.0);
        assert!(m.lf.net.weight_norm2() > 0.0);
    }

    #[test]
    fn penalized_gradient_matches_finite_differences() {
        let net = Network::new(2, &[5], 8).unwrap();
        let x = Array2::from_shape_fn((6, 2), |(i, j)| ((i * 3 + j) as f64 * 0.37).sin());
        let y = Array1::from_shape_fn(6, |i| (i as f64).cos());
        let lambda = 0.3;
        let (_, g) = penalized_loss(&net, &x, &y, 1.7, lambda).unwrap();
        let h = 1e-6;
        for l in 0..2 {
            let (r, c) = net.layers()[l].w.dim();
            for i in 0..r {
                for j in 0..c {
                    let eval = |d: f64| {
                        let mut n = net.clone();
                        n.layers_mut()[l].w[[i, j]] += d;
                        penalized_loss(&n, &x, &y, 1.7, lambda).unwrap().0
                    };
                    let fd = (eval(h) - eval(-h)) / (2.0 * h);
                    let a = g.w[l][[i, j]];
                    assert!((fd - a).abs() <= 1e-5 * a.abs().max(1e-3), "{fd} vs {a}");
                }
            }
        }
    }

    #[test]
    fn lf_net_is_frozen_by_correction_training() {
        let lf = line(11, |x| x.sin());
        let hf = line(5, |x| 2.0 * x.sin() + x);
        let stage = train_lf(&lf, &TrainConfig::new(vec![8], 100, 1e-2)).unwrap();
        let before = serde_json::to_string(&stage.net).unwrap();
        let m = train_corr(stage, &hf, &TrainConfig::new(vec![4], 100, 1e-2)).unwrap();
        assert_eq!(serde_json::to_string(&m.lf.net).unwrap(), before);
    }

    #[test]
    fn identity_correction_is_reachable() {
        let lf = line(11, |x| (3.0 * x).sin());
        let stage = train_lf(&lf, &TrainConfig::new(vec![16], 300, 1e-2)).unwrap();
        let hf: Vec<SamplePoint> = [0.05, 0.3, 0.55, 0.9]
            .iter()
            .map(|&x| SamplePoint::new(vec![x], stage.predict(&[x]).unwrap()))
            .collect();
        let (_, y) = split(&hf).unwrap();
        let hf_scale = Standardizer::fit(&y.insert_axis(Axis(1)));
        let init = pass_through_correction(&stage, &hf_scale, 4).unwrap();
        let mut cfg = TrainConfig::new(vec![4], 200, 1e-4);
        cfg.lambda = 0.0;
        let m = train_corr_from(stage, init, &hf, &cfg).unwrap();
        let lh = hf
            .iter()
            .map(|p| (m.predict_hf(&p.x).unwrap() - p.y).powi(2))
            .sum::<f64>()
            / hf.len() as f64;
        assert!(lh <= 1e-6, "{lh}");
    }

    #[test]
    fn prediction_is_deterministic_and_batched_consistently() {
        let lf = line(11, |x| x.sin());
        let hf = line(4, |x| 2.0 * x.sin() + 1.0);
        let m = MfdnnModel::fit(&lf, &hf, &TrainConfig::new(vec![8], 30, 1e-2), &TrainConfig::new(vec![4], 30, 1e-2)).unwrap();
        let xs = vec![vec![0.1], vec![0.45], vec![0.8]];
        let batch = m.predict_hf_batch(&xs).unwrap();
        for (x, b) in xs.iter().zip(&batch) {
            assert_eq!(m.predict_hf(x).unwrap(), *b);
            assert_eq!(m.predict_hf(x).unwrap(), m.predict_hf(x).unwrap());
        }
        assert!(m.predict_hf(&[0.1, 0.2]).is_err());
    }

    #[test]
    fn seeds_reproduce_bitwise() {
        let lf = line(11, |x| x.sin());
        let hf = line(4, |x| 2.0 * x.sin() + 1.0);
        let fit = || MfdnnModel::fit_preset(&lf, &hf, Preset::Lin1d, 7).unwrap();
        let (a, b) = (fit(), fit());
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn json_round_trip() {
        let lf = line(11, |x| x.sin());
        let hf = line(4, |x| 2.0 * x.sin() + 1.0);
        let m = MfdnnModel::fit(&lf, &hf, &TrainConfig::new(vec![8], 30, 1e-2), &TrainConfig::new(vec![4], 30, 1e-2)).unwrap();
        let back: MfdnnModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back.predict_hf(&[0.37]).unwrap(), m.predict_hf(&[0.37]).unwrap());
    }

    #[test]
    fn bad_learning_rate_is_reported() {
        let lf = line(11, |x| 1e150 * x);
        let err = train_lf(&lf, &TrainConfig::new(vec![8], 10, -1.0)).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn presets_parse() {
        for p in Preset::ALL {
            assert_eq!(p.to_string().parse::<Preset>().unwrap(), p);
        }
        assert_eq!(Preset::Dim100.configs().0.hidden, vec![512, 512, 256, 128]);
    }
}
