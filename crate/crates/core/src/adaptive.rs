//! Uncertainty- and derivative-driven infill criteria and the sample-selection
//! loop.
//!
//! Every criterion is `PDF(ξ) · ŝ(ξ) · (...)`, so it vanishes wherever the
//! surrogate already interpolates an expensive sample.

use serde::{Deserialize, Serialize};

use crate::cokriging::CoKrigingOptions;
use crate::dataset::{euclidean, latin_hypercube, pdf, DistributionSpec, MultiFidelityDataset, SamplePoint};
use crate::error::{check_dim, Error, Result};
use crate::kernels::KernelFamily;
use crate::surrogate::{FittedModel, Surrogate, SurrogateKind};

/// Infill never accepts a point this close to an existing expensive sample.
pub const DUPLICATE_DISTANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CriterionId {
    C1,
    C2,
    C3,
    C4,
    C5a,
    C5b,
}

impl CriterionId {
    pub const ALL: [CriterionId; 6] = [Self::C1, Self::C2, Self::C3, Self::C4, Self::C5a, Self::C5b];

    /// C5a/C5b compare universal-cubic predictions against Gaussian / cubic ones.
    pub fn needs_kernel_trio(self) -> bool {
        matches!(self, Self::C5a | Self::C5b)
    }
}

impl std::fmt::Display for CriterionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::C1 => "1",
            Self::C2 => "2",
            Self::C3 => "3",
            Self::C4 => "4",
            Self::C5a => "5a",
            Self::C5b => "5b",
        })
    }
}

impl std::str::FromStr for CriterionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().trim_start_matches(['c', 'C']);
        Ok(match t {
            "1" => Self::C1,
            "2" => Self::C2,
            "3" => Self::C3,
            "4" => Self::C4,
            "5a" | "5A" => Self::C5a,
            "5b" | "5B" => Self::C5b,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unknown criterion `{s}` (expected 1, 2, 3, 4, 5a or 5b)"
                )))
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionSpec {
    pub id: CriterionId,
    /// Input distribution; its bounds are also the candidate domain.
    pub distribution: DistributionSpec,
    /// Points per axis of the tensor candidate grid (used when M ≤ 2).
    pub resolution: usize,
    /// Size of the Latin-hypercube candidate set (used when M > 2).
    pub lhs_candidates: usize,
    pub seed: u64,
}

impl CriterionSpec {
    pub fn new(id: CriterionId, distribution: DistributionSpec) -> Self {
        Self {
            id,
            distribution,
            resolution: 101,
            lhs_candidates: 4096,
            seed: 0,
        }
    }

    /// Candidate points in lexicographic order, so the first maximum found is
    /// the lexicographically lowest one.
    pub fn candidate_grid(&self) -> Result<Vec<Vec<f64>>> {
        self.distribution.validate()?;
        let (lower, upper) = self.distribution.bounds();
        let m = lower.len();
        let mut grid: Vec<Vec<f64>> = if m <= 2 {
            if self.resolution < 2 {
                return Err(Error::InvalidArgument("candidate grid needs at least 2 points per axis".into()));
            }
            let r = self.resolution;
            let axis = |j: usize| -> Vec<f64> {
                (0..r)
                    .map(|i| lower[j] + (upper[j] - lower[j]) * i as f64 / (r - 1) as f64)
                    .collect()
            };
            let mut grid = vec![Vec::new()];
            for j in 0..m {
                let a = axis(j);
                grid = grid
                    .into_iter()
                    .flat_map(|g| {
                        a.iter().map(move |&v| {
                            let mut g = g.clone();
                            g.push(v);
                            g
                        })
                    })
                    .collect();
            }
            grid
        } else {
            latin_hypercube(self.lhs_candidates, m, self.seed)?
                .into_iter()
                .map(|u| (0..m).map(|j| lower[j] + u[j] * (upper[j] - lower[j])).collect())
                .collect()
        };
        grid.sort_by(|a, b| lex_cmp(a, b));
        Ok(grid)
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// `min_i |x - ξ^(i)|` over the existing samples.
pub fn delta_xi(samples: &[Vec<f64>], x: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("Δξ needs at least one existing sample".into()));
    }
    for s in samples {
        check_dim(x.len(), s.len())?;
    }
    Ok(samples.iter().map(|s| euclidean(s, x)).fold(f64::INFINITY, f64::min))
}

/// The models one criterion needs: the primary surrogate (universal-cubic for
/// C5a/C5b) and, for C5a/C5b, the Gaussian and cubic refits of the same data.
#[derive(Clone, Copy)]
pub struct CriterionModels<'a> {
    pub primary: &'a dyn Surrogate,
    pub gaussian: Option<&'a dyn Surrogate>,
    pub cubic: Option<&'a dyn Surrogate>,
}

impl<'a> CriterionModels<'a> {
    pub fn single(primary: &'a dyn Surrogate) -> Self {
        Self {
            primary,
            gaussian: None,
            cubic: None,
        }
    }
}

/// Value of criterion `spec.id` at `x`. `samples` are the expensive sites.
pub fn criterion(spec: &CriterionSpec, models: CriterionModels<'_>, samples: &[Vec<f64>], x: &[f64]) -> Result<f64> {
    let density = pdf(&spec.distribution, x)?;
    if density == 0.0 {
        return Ok(0.0);
    }
    let s_hat = models.primary.variance(x)?.max(0.0).sqrt();
    if s_hat == 0.0 {
        return Ok(0.0);
    }
    let base = density * s_hat;
    if spec.id == CriterionId::C1 {
        return Ok(base);
    }
    let dxi = delta_xi(samples, x)?;
    let g = models.primary.predict_grad(x)?;
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if spec.id == CriterionId::C2 {
        return Ok(base * norm(&g) * dxi);
    }
    let h = models.primary.predict_hess_diag(x)?;
    if spec.id == CriterionId::C3 {
        return Ok(base * norm(&g) * norm(&h) * dxi);
    }
    // |f' + f''| in one dimension; the norm of the summed vectors above
    let sum: Vec<f64> = g.iter().zip(&h).map(|(a, b)| a + b).collect();
    let derivative_term = norm(&sum) * dxi;
    let other = match spec.id {
        CriterionId::C4 => return Ok(base * derivative_term),
        CriterionId::C5a => models.gaussian,
        CriterionId::C5b => models.cubic,
        _ => unreachable!(),
    };
    let other = other.ok_or_else(|| {
        Error::InvalidArgument(format!(
            "criterion {} needs universal-cubic, gaussian and cubic models",
            spec.id
        ))
    })?;
    let d = (models.primary.predict(x)? - other.predict(x)?).abs();
    Ok(base * (derivative_term + d))
}

/// Surrogates refitted at each infill step.
#[derive(Clone, Debug)]
pub struct InfillModels {
    pub primary: FittedModel,
    pub gaussian: Option<FittedModel>,
    pub cubic: Option<FittedModel>,
}

impl InfillModels {
    pub fn as_criterion_models(&self) -> CriterionModels<'_> {
        CriterionModels {
            primary: &self.primary,
            gaussian: self.gaussian.as_ref().map(|m| m as &dyn Surrogate),
            cubic: self.cubic.as_ref().map(|m| m as &dyn Surrogate),
        }
    }
}

/// How the loop builds its surrogates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfillConfig {
    pub surrogate: SurrogateKind,
    pub options: CoKrigingOptions,
    pub normalize_inputs: bool,
    pub max_iterations: usize,
    /// Stop when the largest criterion value on the grid drops below this.
    pub floor: f64,
}

impl Default for InfillConfig {
    fn default() -> Self {
        Self {
            surrogate: SurrogateKind::CoKriging,
            options: CoKrigingOptions::default(),
            normalize_inputs: false,
            max_iterations: 10,
            floor: 1e-12,
        }
    }
}

/// Fits the surrogates `id` needs. C5a/C5b force a universal-cubic primary.
pub fn fit_models(id: CriterionId, dataset: &MultiFidelityDataset, config: &InfillConfig) -> Result<InfillModels> {
    let fit = |family| {
        FittedModel::fit(
            config.surrogate,
            dataset,
            &config.options,
            family,
            config.normalize_inputs,
        )
    };
    if id.needs_kernel_trio() {
        Ok(InfillModels {
            primary: fit(KernelFamily::UniversalCubic)?,
            gaussian: Some(fit(KernelFamily::Gaussian)?),
            cubic: Some(fit(KernelFamily::Cubic)?),
        })
    } else {
        Ok(InfillModels {
            primary: fit(config.options.kernel.family)?,
            gaussian: None,
            cubic: None,
        })
    }
}

/// Criterion values on the candidate grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionGrid {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl CriterionGrid {
    /// Index of the first (lexicographically lowest) maximum.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, v) in self.values.iter().enumerate() {
            if best.map_or(true, |b| *v > self.values[b]) {
                best = Some(i);
            }
        }
        best
    }

    /// Candidates ranked by decreasing criterion, ties in grid order, zeros dropped.
    pub fn ranked(&self) -> Vec<(Vec<f64>, f64)> {
        let mut idx: Vec<usize> = (0..self.values.len()).filter(|&i| self.values[i] > 0.0).collect();
        idx.sort_by(|&a, &b| self.values[b].total_cmp(&self.values[a]).then(a.cmp(&b)));
        idx.into_iter().map(|i| (self.points[i].clone(), self.values[i])).collect()
    }
}

pub fn evaluate_grid(spec: &CriterionSpec, models: CriterionModels<'_>, samples: &[Vec<f64>]) -> Result<CriterionGrid> {
    let points = spec.candidate_grid()?;
    let values = points
        .iter()
        .map(|x| criterion(spec, models, samples, x))
        .collect::<Result<Vec<_>>>()?;
    Ok(CriterionGrid { points, values })
}

#[derive(Clone, Debug)]
pub struct InfillResult {
    pub iteration: usize,
    pub chosen_point: Vec<f64>,
    pub chosen_value: f64,
    pub criterion_max: f64,
    pub criterion_values: CriterionGrid,
    /// Surrogates refitted with the new sample included.
    pub models: InfillModels,
}

/// Mutable state of an infill run: the data (raw units) and current fits.
#[derive(Clone, Debug)]
pub struct InfillState {
    pub dataset: MultiFidelityDataset,
    pub models: InfillModels,
    pub iteration: usize,
}

impl InfillState {
    pub fn new(spec: &CriterionSpec, dataset: MultiFidelityDataset, config: &InfillConfig) -> Result<Self> {
        check_dim(spec.distribution.dim(), dataset.dim)?;
        if !dataset.normalization.is_identity() {
            return Err(Error::InvalidArgument(
                "infill expects raw-unit data; use InfillConfig::normalize_inputs instead".into(),
            ));
        }
        let models = fit_models(spec.id, &dataset, config)?;
        Ok(Self {
            dataset,
            models,
            iteration: 0,
        })
    }

    pub fn expensive_sites(&self) -> Vec<Vec<f64>> {
        self.dataset.expensive.iter().map(|p| p.x.clone()).collect()
    }

    /// Evaluates the criterion grid without querying anything.
    pub fn suggest(&self, spec: &CriterionSpec) -> Result<CriterionGrid> {
        evaluate_grid(spec, self.models.as_criterion_models(), &self.expensive_sites())
    }

    /// One infill step: argmax of the criterion, oracle query, refit.
    pub fn step<F>(&mut self, spec: &CriterionSpec, config: &InfillConfig, oracle: &mut F) -> Result<InfillResult>
    where
        F: FnMut(&[f64]) -> Result<f64>,
    {
        let grid = self.suggest(spec)?;
        let sites = self.expensive_sites();
        let i = grid.argmax().ok_or(Error::CriterionExhausted { max: 0.0 })?;
        let max = grid.values[i];
        let x = grid.points[i].clone();
        if !(max > config.floor) || sites.iter().any(|s| euclidean(s, &x) <= DUPLICATE_DISTANCE) {
            return Err(Error::CriterionExhausted { max });
        }
        let y = oracle(&x)?;
        let mut dataset = self.dataset.clone();
        dataset.push_expensive(SamplePoint::new(x.clone(), y))?;
        let models = fit_models(spec.id, &dataset, config)?;
        self.dataset = dataset;
        self.models = models.clone();
        self.iteration += 1;
        Ok(InfillResult {
            iteration: self.iteration,
            chosen_point: x,
            chosen_value: y,
            criterion_max: max,
            criterion_values: grid,
            models,
        })
    }

    /// Runs up to `config.max_iterations` steps; stops quietly when the
    /// criterion is exhausted.
    pub fn run<F>(&mut self, spec: &CriterionSpec, config: &InfillConfig, mut oracle: F) -> Result<Vec<InfillResult>>
    where
        F: FnMut(&[f64]) -> Result<f64>,
    {
        let mut steps = Vec::new();
        for _ in 0..config.max_iterations {
            match self.step(spec, config, &mut oracle) {
                Ok(r) => steps.push(r),
                Err(Error::CriterionExhausted { max }) => {
                    log::info!("infill stopped after {} steps: criterion max {max:e}", steps.len());
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        Ok(steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kriging::{FitOptions, KrigingModel};

    fn forrester(x: f64) -> f64 {
        (6.0 * x - 2.0).powi(2) * (12.0 * x - 4.0).sin()
    }

    fn linear_dataset() -> MultiFidelityDataset {
        linear_dataset_at(&[0.0, 0.35, 0.65, 1.0])
    }

    fn linear_dataset_at(sites: &[f64]) -> MultiFidelityDataset {
        let cheap = (0..21)
            .map(|i| {
                let x = i as f64 / 20.0;
                SamplePoint::new(vec![x], 0.5 * forrester(x) + 10.0 * (x - 0.5) - 5.0)
            })
            .collect();
        let expensive = sites
            .iter()
            .map(|&x| SamplePoint::new(vec![x], forrester(x)))
            .collect();
        MultiFidelityDataset::new(cheap, expensive).unwrap()
    }

    fn uniform_spec(id: CriterionId) -> CriterionSpec {
        CriterionSpec::new(id, DistributionSpec::uniform(1, 0.0, 1.0).unwrap())
    }

    #[test]
    fn delta_xi_examples() {
        assert_eq!(delta_xi(&[vec![0.0], vec![1.0]], &[0.4]).unwrap(), 0.4);
        assert_eq!(delta_xi(&[vec![0.3]], &[0.3]).unwrap(), 0.0);
        assert!(delta_xi(&[], &[0.3]).is_err());
        let a = delta_xi(&[vec![0.1, 0.2], vec![0.9, 0.4], vec![0.5, 0.5]], &[0.6, 0.1]).unwrap();
        let b = delta_xi(&[vec![0.5, 0.5], vec![0.1, 0.2], vec![0.9, 0.4]], &[0.6, 0.1]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn criterion_ids_parse() {
        for id in CriterionId::ALL {
            assert_eq!(id.to_string().parse::<CriterionId>().unwrap(), id);
        }
        assert!("6".parse::<CriterionId>().is_err());
    }

    #[test]
    fn zero_at_samples_and_nonnegative() {
        let ds = linear_dataset();
        let config = InfillConfig::default();
        for id in CriterionId::ALL {
            let spec = uniform_spec(id);
            let state = InfillState::new(&spec, ds.clone(), &config).unwrap();
            let sites = state.expensive_sites();
            for s in &sites {
                assert_eq!(criterion(&spec, state.models.as_criterion_models(), &sites, s).unwrap(), 0.0);
            }
            let grid = state.suggest(&spec).unwrap();
            assert!(grid.values.iter().all(|v| *v >= 0.0 && v.is_finite()), "{id}");
        }
    }

    #[test]
    fn c1_tracks_uncertainty() {
        let ds = linear_dataset();
        let config = InfillConfig::default();
        let spec = uniform_spec(CriterionId::C1);
        let state = InfillState::new(&spec, ds, &config).unwrap();
        let grid = state.suggest(&spec).unwrap();
        let s: Vec<f64> = grid
            .points
            .iter()
            .map(|x| state.models.primary.variance(x).unwrap().sqrt())
            .collect();
        let best_s = CriterionGrid {
            points: grid.points.clone(),
            values: s,
        }
        .argmax();
        assert_eq!(grid.argmax(), best_s);
    }

    #[test]
    fn c1_argmax_invariant_to_output_scale() {
        // asymmetric sites: the symmetric design has near-tied end maxima
        let ds = linear_dataset_at(&[0.0, 0.3, 0.72, 1.0]);
        let scaled = MultiFidelityDataset::new(
            ds.cheap.iter().map(|p| SamplePoint::new(p.x.clone(), 3.0 * p.y)).collect(),
            ds.expensive.iter().map(|p| SamplePoint::new(p.x.clone(), 3.0 * p.y)).collect(),
        )
        .unwrap();
        let config = InfillConfig::default();
        let spec = uniform_spec(CriterionId::C1);
        let a = InfillState::new(&spec, ds, &config).unwrap().suggest(&spec).unwrap();
        let b = InfillState::new(&spec, scaled, &config).unwrap().suggest(&spec).unwrap();
        assert_eq!(a.argmax(), b.argmax());
    }

    #[test]
    fn derivative_criteria_at_symmetric_center() {
        // y = (x - 0.5)^2 sampled symmetrically: zero slope, positive curvature at 0.5
        let pts: Vec<SamplePoint> = [0.0, 0.2, 0.8, 1.0]
            .iter()
            .map(|&x: &f64| SamplePoint::new(vec![x], (x - 0.5).powi(2)))
            .collect();
        let m = KrigingModel::fit(&pts, &FitOptions::default()).unwrap();
        let sites: Vec<Vec<f64>> = pts.iter().map(|p| p.x.clone()).collect();
        let models = CriterionModels::single(&m);
        let at = |id| criterion(&uniform_spec(id), models, &sites, &[0.5]).unwrap();
        assert!(m.predict_grad(&[0.5]).unwrap()[0].abs() < 1e-8);
        assert!(at(CriterionId::C2) < 1e-8 * at(CriterionId::C1));
        assert!(at(CriterionId::C3) < 1e-8 * at(CriterionId::C1));
        assert!(at(CriterionId::C4) > 1e-3 * at(CriterionId::C1));
    }

    #[test]
    fn c5_reduces_to_c4_when_predictors_agree() {
        let ds = linear_dataset();
        let config = InfillConfig::default();
        let models = fit_models(CriterionId::C4, &ds, &config).unwrap();
        let same = CriterionModels {
            primary: &models.primary,
            gaussian: Some(&models.primary),
            cubic: Some(&models.primary),
        };
        let sites: Vec<Vec<f64>> = ds.expensive.iter().map(|p| p.x.clone()).collect();
        for x in [0.1, 0.47, 0.8] {
            let c4 = criterion(&uniform_spec(CriterionId::C4), same, &sites, &[x]).unwrap();
            for id in [CriterionId::C5a, CriterionId::C5b] {
                let c5 = criterion(&uniform_spec(id), same, &sites, &[x]).unwrap();
                assert!((c5 - c4).abs() <= 1e-8 * (1.0 + c4), "{id} at {x}: {c5} vs {c4}");
            }
        }
        let single = CriterionModels::single(&models.primary);
        assert!(criterion(&uniform_spec(CriterionId::C5a), single, &sites, &[0.2]).is_err());
    }

    #[test]
    fn infill_adds_distinct_interior_points() {
        let ds = linear_dataset();
        let config = InfillConfig {
            max_iterations: 5,
            ..InfillConfig::default()
        };
        let spec = uniform_spec(CriterionId::C1);
        let mut state = InfillState::new(&spec, ds, &config).unwrap();
        let steps = state.run(&spec, &config, |x| Ok(forrester(x[0]))).unwrap();
        assert_eq!(steps.len(), 5);
        let chosen: Vec<f64> = steps.iter().map(|s| s.chosen_point[0]).collect();
        for (i, a) in chosen.iter().enumerate() {
            assert!(*a > 0.0 && *a < 1.0);
            for b in &chosen[..i] {
                assert!((a - b).abs() > DUPLICATE_DISTANCE);
            }
            let grid = &steps[i].criterion_values;
            assert_eq!(grid.values[grid.argmax().unwrap()], steps[i].criterion_max);
        }
        assert_eq!(state.dataset.expensive.len(), 9);
    }

    #[test]
    fn exhausted_when_grid_is_sampled() {
        let cheap = vec![SamplePoint::new(vec![0.0], 0.0), SamplePoint::new(vec![0.5], 0.2), SamplePoint::new(vec![1.0], 1.0)];
        let expensive = vec![SamplePoint::new(vec![0.0], 0.1), SamplePoint::new(vec![1.0], 1.2)];
        let ds = MultiFidelityDataset::new(cheap, expensive).unwrap();
        let mut spec = uniform_spec(CriterionId::C1);
        spec.resolution = 2;
        let config = InfillConfig::default();
        let mut state = InfillState::new(&spec, ds, &config).unwrap();
        let err = state.step(&spec, &config, &mut |_: &[f64]| Ok(0.0)).unwrap_err();
        assert!(matches!(err, Error::CriterionExhausted { .. }));
    }

    #[test]
    fn suggestion_ranking_needs_no_oracle() {
        let ds = linear_dataset();
        let config = InfillConfig::default();
        let spec = uniform_spec(CriterionId::C4);
        let state = InfillState::new(&spec, ds, &config).unwrap();
        let ranked = state.suggest(&spec).unwrap().ranked();
        assert!(!ranked.is_empty());
        assert!(ranked.windows(2).all(|w| w[0].1 >= w[1].1));
        let mut unavailable = |x: &[f64]| Err(Error::OracleUnavailable(x.to_vec()));
        let mut state = state;
        assert!(matches!(
            state.step(&spec, &config, &mut unavailable),
            Err(Error::OracleUnavailable(_))
        ));
    }
}
