//! Subcommands and the pieces they share: saved-model files, column
//! selection, prediction grids and input laws.

use std::path::Path;

use anyhow::{bail, Context as _, Result};
use serde::{Deserialize, Serialize};

use mfuq::dataset::{csv_headers, default_columns, ingest_csv, ColumnMap, DistributionSpec, Fidelity, MultiFidelityDataset, SamplePoint};
use mfuq::benchmarks::InputLaw;
use mfuq::mfdnn::MfdnnModel;
use mfuq::surrogate::{FittedModel, Surrogate};

use crate::config::LawSection;

pub mod benchmark;
pub mod fit;
pub mod predict;
pub mod sample;
pub mod train;
pub mod uq;

/// Tensor grids larger than this are refused.
pub const MAX_GRID_POINTS: usize = 1_000_000;

/// What `model.json` holds: the surrogate plus what is needed to reuse it.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub config_sha256: String,
    pub inputs: Vec<String>,
    pub output: String,
    /// Raw range of the training inputs.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub surrogate: Saved,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Saved {
    Gp(FittedModel),
    Mfdnn(MfdnnModel),
}

impl Saved {
    pub fn dim(&self) -> usize {
        match self {
            Saved::Gp(m) => m.dim(),
            Saved::Mfdnn(m) => m.dim(),
        }
    }

    pub fn predict_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(match self {
            Saved::Gp(m) => xs.iter().map(|x| m.predict(x)).collect::<mfuq::Result<_>>()?,
            Saved::Mfdnn(m) => m.predict_hf_batch(xs)?,
        })
    }
}

impl ModelFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading model {}", path.display()))?;
        let file: ModelFile = serde_json::from_str(&text).with_context(|| format!("parsing model {}", path.display()))?;
        if file.inputs.len() != file.surrogate.dim() {
            bail!("{}: {} input names for a {}-d model", path.display(), file.inputs.len(), file.surrogate.dim());
        }
        Ok(file)
    }
}

/// Column selection from flags. An empty `inputs` means every header except
/// the output; a missing output means the last header not used as an input.
pub fn resolve_columns(path: &Path, inputs: &[String], output: Option<&str>) -> Result<ColumnMap> {
    if inputs.is_empty() && output.is_none() {
        return Ok(default_columns(path)?);
    }
    let headers = csv_headers(path)?;
    let output = match output {
        Some(o) => o.to_string(),
        None => match headers.iter().rev().find(|h| !inputs.contains(h)) {
            Some(h) => h.clone(),
            None => bail!("{}: no column left for the output", path.display()),
        },
    };
    let inputs = if inputs.is_empty() {
        headers.into_iter().filter(|h| *h != output).collect()
    } else {
        inputs.to_vec()
    };
    if inputs.is_empty() {
        bail!("{}: no input columns", path.display());
    }
    Ok(ColumnMap::new(inputs, output))
}

pub fn load_dataset(cheap: &Path, expensive: &Path, columns: &ColumnMap) -> Result<MultiFidelityDataset> {
    let c = ingest_csv(cheap, Fidelity::Cheap, columns)?;
    let e = ingest_csv(expensive, Fidelity::Expensive, columns)?;
    Ok(MultiFidelityDataset::new(c, e)?)
}

/// Per-dimension `(min, max)` over the given samples.
pub fn bounds<'a>(points: impl IntoIterator<Item = &'a SamplePoint>, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in points {
        for j in 0..dim {
            lo[j] = lo[j].min(p.x[j]);
            hi[j] = hi[j].max(p.x[j]);
        }
    }
    (lo, hi)
}

pub fn dataset_bounds(ds: &MultiFidelityDataset) -> (Vec<f64>, Vec<f64>) {
    bounds(ds.cheap.iter().chain(&ds.expensive), ds.dim)
}

/// `n` points per axis, last coordinate varying fastest.
pub fn tensor_grid(lower: &[f64], upper: &[f64], n: usize) -> Result<Vec<Vec<f64>>> {
    if n < 2 {
        bail!("grid needs at least 2 points per axis, got {n}");
    }
    let total = (n as f64).powi(lower.len() as i32);
    if total > MAX_GRID_POINTS as f64 {
        bail!(
            "a {n}-point grid in {} dimensions has {total:e} points (limit {MAX_GRID_POINTS}); pass a smaller --grid",
            lower.len()
        );
    }
    let axis = |j: usize, i: usize| {
        if i == n - 1 {
            upper[j]
        } else {
            lower[j] + (upper[j] - lower[j]) * i as f64 / (n - 1) as f64
        }
    };
    let mut grid = vec![Vec::new()];
    for j in 0..lower.len() {
        grid = grid
            .into_iter()
            .flat_map(|p| {
                (0..n).map(move |i| {
                    let mut q = p.clone();
                    q.push(axis(j, i));
                    q
                })
            })
            .collect();
    }
    Ok(grid)
}

/// Default law on a box: uniform on it, or a Gaussian centred in it with
/// σ = width / 6, truncated to it.
pub fn box_law(law: InputLaw, lower: &[f64], upper: &[f64]) -> DistributionSpec {
    match law {
        InputLaw::Uniform => DistributionSpec::Uniform {
            lower: lower.to_vec(),
            upper: upper.to_vec(),
        },
        InputLaw::Gaussian => DistributionSpec::GaussianTruncated {
            mean: lower.iter().zip(upper).map(|(a, b)| 0.5 * (a + b)).collect(),
            stddev: lower.iter().zip(upper).map(|(a, b)| (b - a) / 6.0).collect(),
            lower: lower.to_vec(),
            upper: upper.to_vec(),
        },
    }
}

/// Applies scalar overrides from the config to every dimension of `base`.
pub fn override_law(mut base: DistributionSpec, sec: &LawSection) -> Result<DistributionSpec> {
    let set = |v: &mut Vec<f64>, x: Option<f64>| {
        if let Some(x) = x {
            v.iter_mut().for_each(|e| *e = x);
        }
    };
    match &mut base {
        DistributionSpec::Uniform { lower, upper } => {
            if sec.mean.is_some() || sec.stddev.is_some() {
                bail!("mean and stddev apply to the gaussian law only");
            }
            set(lower, sec.lower);
            set(upper, sec.upper);
        }
        DistributionSpec::GaussianTruncated {
            mean,
            stddev,
            lower,
            upper,
        } => {
            set(mean, sec.mean);
            set(stddev, sec.stddev);
            set(lower, sec.lower);
            set(upper, sec.upper);
        }
    }
    base.validate()?;
    Ok(base)
}

pub fn parse_opt<T>(flag: Option<T>, file: Option<&str>, what: &str) -> Result<Option<T>>
where
    T: std::str::FromStr<Err = mfuq::Error>,
{
    match (flag, file) {
        (Some(v), _) => Ok(Some(v)),
        (None, Some(s)) => Ok(Some(s.parse().with_context(|| format!("config key {what}"))?)),
        (None, None) => Ok(None),
    }
}

/// `x0, x1, ...` for benchmark inputs.
pub fn coordinate_names(dim: usize) -> Vec<String> {
    if dim == 1 {
        vec!["x".into()]
    } else {
        (0..dim).map(|j| format!("x{j}")).collect()
    }
}
