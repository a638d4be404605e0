//! Analytic two-fidelity test functions and the accuracy harness.

use serde::{Deserialize, Serialize};

use crate::dataset::{latin_hypercube, DistributionSpec, MultiFidelityDataset, SamplePoint};
use crate::error::{check_dim, Error, Result};

/// Dense test grid size for 1-D cases.
pub const GRID_POINTS_1D: usize = 1000;
/// Held-out Latin hypercube size for high-dimensional cases.
pub const LHS_POINTS: usize = 10_000;

/// Family of the input uncertainty in the UQ studies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputLaw {
    Uniform,
    /// Truncated to the uniform law's bounds, except in 100-d.
    Gaussian,
}

impl std::fmt::Display for InputLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InputLaw::Uniform => "uniform",
            InputLaw::Gaussian => "gaussian",
        })
    }
}

impl std::str::FromStr for InputLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(InputLaw::Uniform),
            "gaussian" | "normal" => Ok(InputLaw::Gaussian),
            other => Err(Error::InvalidArgument(format!("unknown distribution `{other}` (expected uniform or gaussian)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    Lin1d,
    Nonlin1d,
    Dim32,
    Dim100,
}

impl Case {
    pub const ALL: [Case; 4] = [Case::Lin1d, Case::Nonlin1d, Case::Dim32, Case::Dim100];

    pub fn dim(self) -> usize {
        match self {
            Case::Lin1d | Case::Nonlin1d => 1,
            Case::Dim32 => 32,
            Case::Dim100 => 100,
        }
    }

    /// Common bounds of every coordinate.
    pub fn bounds(self) -> (f64, f64) {
        match self {
            Case::Lin1d | Case::Nonlin1d => (0.0, 1.0),
            Case::Dim32 | Case::Dim100 => (-3.0, 3.0),
        }
    }

    pub fn is_1d(self) -> bool {
        self.dim() == 1
    }

    /// `(cheap, expensive)` sample counts of the default training set.
    pub fn default_counts(self) -> (usize, usize) {
        match self {
            Case::Lin1d => (21, 4),
            Case::Nonlin1d => (21, 6),
            Case::Dim32 => (20_000, 500),
            Case::Dim100 => (100_000, 2_000),
        }
    }

    /// Fixed expensive sites of the neural-network benchmark (1-D only).
    pub fn expensive_sites(self) -> Option<&'static [f64]> {
        match self {
            Case::Lin1d => Some(&[0.0, 0.35, 0.75, 1.0]),
            Case::Nonlin1d => Some(&[0.0, 0.2, 0.4, 0.6, 0.8, 1.0]),
            _ => None,
        }
    }

    /// Expensive sites of the co-kriging test; lin1d differs from the
    /// network benchmark in its third point.
    pub fn cokriging_sites(self) -> Option<&'static [f64]> {
        match self {
            Case::Lin1d => Some(&[0.0, 0.35, 0.65, 1.0]),
            other => other.expensive_sites(),
        }
    }

    pub fn check_domain(self, x: &[f64]) -> Result<()> {
        check_dim(self.dim(), x.len())?;
        let (lower, upper) = self.bounds();
        match x.iter().position(|v| !(lower..=upper).contains(v)) {
            Some(dim) => Err(Error::OutOfDomain {
                x: x.to_vec(),
                dim,
                lower,
                upper,
            }),
            None => Ok(()),
        }
    }

    /// Input law of the UQ study for this case. In 100-d the Gaussian is
    /// truncated to the benchmark domain [-3, 3], not to the uniform's [-1, 1].
    pub fn uq_distribution(self, law: InputLaw) -> DistributionSpec {
        let d = self.dim();
        let spec = match (self, law) {
            (Case::Lin1d | Case::Nonlin1d, InputLaw::Uniform) => DistributionSpec::uniform(d, 0.6, 0.8),
            (Case::Lin1d | Case::Nonlin1d, InputLaw::Gaussian) => DistributionSpec::truncated_gaussian(d, 0.7, 0.03, 0.6, 0.8),
            (Case::Dim32, InputLaw::Uniform) => DistributionSpec::uniform(d, -3.0, 3.0),
            (Case::Dim100, InputLaw::Uniform) => DistributionSpec::uniform(d, -1.0, 1.0),
            (Case::Dim32 | Case::Dim100, InputLaw::Gaussian) => DistributionSpec::truncated_gaussian(d, 0.0, 1.0, -3.0, 3.0),
        };
        spec.expect("constant bounds are valid")
    }

    pub fn eval_hf(self, x: &[f64]) -> Result<f64> {
        self.check_domain(x)?;
        Ok(self.hf_unchecked(x))
    }

    pub fn eval_lf(self, x: &[f64]) -> Result<f64> {
        self.check_domain(x)?;
        Ok(self.lf_unchecked(x))
    }

    fn hf_unchecked(self, x: &[f64]) -> f64 {
        match self {
            Case::Lin1d => forrester(x[0]),
            Case::Nonlin1d => 0.1 * forrester_cheap(x[0]).powi(2) + 10.0,
            Case::Dim32 | Case::Dim100 => rosenbrock_like(x),
        }
    }

    fn lf_unchecked(self, x: &[f64]) -> f64 {
        match self {
            Case::Lin1d | Case::Nonlin1d => forrester_cheap(x[0]),
            Case::Dim32 | Case::Dim100 => {
                let cross: f64 = x.windows(2).map(|w| w[0] * w[1]).sum();
                0.8 * rosenbrock_like(x) - 0.4 * cross - 50.0
            }
        }
    }
}

impl std::fmt::Display for Case {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Case::Lin1d => "lin1d",
            Case::Nonlin1d => "nonlin1d",
            Case::Dim32 => "dim32",
            Case::Dim100 => "dim100",
        })
    }
}

impl std::str::FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Case::ALL
            .into_iter()
            .find(|c| c.to_string() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown case `{s}` (expected lin1d, nonlin1d, dim32 or dim100)")))
    }
}

impl From<Case> for crate::mfdnn::Preset {
    fn from(c: Case) -> Self {
        use crate::mfdnn::Preset;
        match c {
            Case::Lin1d => Preset::Lin1d,
            Case::Nonlin1d => Preset::Nonlin1d,
            Case::Dim32 => Preset::Dim32,
            Case::Dim100 => Preset::Dim100,
        }
    }
}

fn forrester(x: f64) -> f64 {
    (6.0 * x - 2.0).powi(2) * (12.0 * x - 4.0).sin()
}

fn forrester_cheap(x: f64) -> f64 {
    0.5 * forrester(x) + 10.0 * (x - 0.5) - 5.0
}

fn rosenbrock_like(x: &[f64]) -> f64 {
    (x[0] - 1.0).powi(2)
        + x.windows(2)
            .map(|w| (2.0 * w[1] * w[1] - w[0] * w[0]).powi(2))
            .sum::<f64>()
}

fn uniform_grid(n: usize, lower: f64, upper: f64) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lower + upper)];
    }
    (0..n).map(|i| lower + (upper - lower) * i as f64 / (n - 1) as f64).collect()
}

fn scaled_lhs(case: Case, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let (lower, upper) = case.bounds();
    let mut pts = latin_hypercube(n, case.dim(), seed)?;
    for p in &mut pts {
        for v in p.iter_mut() {
            *v = lower + (upper - lower) * *v;
        }
    }
    Ok(pts)
}

fn label(case: Case, xs: Vec<Vec<f64>>, f: fn(Case, &[f64]) -> f64) -> Vec<SamplePoint> {
    xs.into_iter()
        .map(|x| {
            let y = f(case, &x);
            SamplePoint::new(x, y)
        })
        .collect()
}

/// 1-D cases: uniform cheap grid and the fixed expensive sites (a uniform
/// grid when `hf_count` differs from their number). High-dimensional cases:
/// independent Latin hypercubes for both levels.
pub fn make_training_set(case: Case, lf_count: usize, hf_count: usize, seed: u64) -> Result<MultiFidelityDataset> {
    training_set(case, lf_count, hf_count, seed, case.expensive_sites())
}

/// Same as [`make_training_set`] with the co-kriging test's expensive sites.
pub fn make_cokriging_set(case: Case, lf_count: usize, hf_count: usize, seed: u64) -> Result<MultiFidelityDataset> {
    training_set(case, lf_count, hf_count, seed, case.cokriging_sites())
}

fn training_set(case: Case, lf_count: usize, hf_count: usize, seed: u64, sites: Option<&[f64]>) -> Result<MultiFidelityDataset> {
    if lf_count == 0 || hf_count == 0 {
        return Err(Error::InvalidArgument("training counts must be at least 1".into()));
    }
    let (lf_x, hf_x) = if case.is_1d() {
        let (lo, hi) = case.bounds();
        let hf = match sites {
            Some(s) if s.len() == hf_count => s.to_vec(),
            _ => uniform_grid(hf_count, lo, hi),
        };
        let col = |v: Vec<f64>| v.into_iter().map(|x| vec![x]).collect::<Vec<_>>();
        (col(uniform_grid(lf_count, lo, hi)), col(hf))
    } else {
        (scaled_lhs(case, lf_count, seed)?, scaled_lhs(case, hf_count, seed.wrapping_add(1))?)
    };
    MultiFidelityDataset::new(label(case, lf_x, Case::lf_unchecked), label(case, hf_x, Case::hf_unchecked))
}

/// Test inputs: the dense grid in 1-D, a seeded Latin hypercube otherwise.
pub fn test_points(case: Case, n_test: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n_test == 0 {
        return Err(Error::InvalidArgument("need at least one test point".into()));
    }
    if case.is_1d() {
        let (lo, hi) = case.bounds();
        Ok(uniform_grid(n_test, lo, hi).into_iter().map(|x| vec![x]).collect())
    } else {
        // offset so the test design never coincides with a training design
        scaled_lhs(case, n_test, seed ^ 0x7e57_7e57)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub mse: f64,
    pub r2: f64,
    pub predictions: Vec<f64>,
    pub truth: Vec<f64>,
}

impl Evaluation {
    pub fn from_pairs(predictions: Vec<f64>, truth: Vec<f64>) -> Result<Self> {
        check_dim(truth.len(), predictions.len())?;
        let bad = predictions.iter().filter(|v| !v.is_finite()).count();
        if bad > 0 {
            return Err(Error::NonFiniteOutput { count: bad });
        }
        let n = truth.len() as f64;
        let sse: f64 = predictions.iter().zip(&truth).map(|(p, t)| (p - t).powi(2)).sum();
        let mean = truth.iter().sum::<f64>() / n;
        let sst: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
        let r2 = if sst > 0.0 {
            1.0 - sse / sst
        } else if sse == 0.0 {
            1.0
        } else {
            f64::NEG_INFINITY
        };
        Ok(Self {
            mse: sse / n,
            r2,
            predictions,
            truth,
        })
    }
}

/// Scores a pointwise predictor against the analytic expensive function.
pub fn evaluate_surrogate(case: Case, mut predictor: impl FnMut(&[f64]) -> Result<f64>, n_test: usize, seed: u64) -> Result<Evaluation> {
    evaluate_batch(case, |xs| xs.iter().map(|x| predictor(x)).collect(), n_test, seed)
}

/// Like [`evaluate_surrogate`], handing all test inputs to the predictor at once.
pub fn evaluate_batch(
    case: Case,
    predictor: impl FnOnce(&[Vec<f64>]) -> Result<Vec<f64>>,
    n_test: usize,
    seed: u64,
) -> Result<Evaluation> {
    let xs = test_points(case, n_test, seed)?;
    let truth = xs.iter().map(|x| case.hf_unchecked(x)).collect();
    Evaluation::from_pairs(predictor(&xs)?, truth)
}

/// Default test size for the case.
pub fn default_test_size(case: Case) -> usize {
    if case.is_1d() {
        GRID_POINTS_1D
    } else {
        LHS_POINTS
    }
}
