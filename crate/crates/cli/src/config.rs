//! TOML run configuration and the config hash stamped on every output.
//!
//! Flags override the file, the file overrides built-in defaults. The hash
//! covers the fully resolved parameters and the contents of input files, never
//! their paths or the output location.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mfuq::cokriging::CoKrigingOptions;
use mfuq::kernels::KernelFamily;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub kernel: KernelSection,
    pub cokriging: CoKrigingSection,
    pub train: TrainSection,
    pub sample: SampleSection,
    pub uq: UqSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub family: Option<String>,
    pub theta_bounds: Option<(f64, f64)>,
    pub shape_bounds: Option<(f64, f64)>,
    /// Universal-cubic shape; `rho_uc` and `gamma_uc` fix it together.
    pub rho_uc: Option<f64>,
    pub gamma_uc: Option<f64>,
    pub nugget: Option<f64>,
    pub starts: Option<usize>,
    pub max_evals: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoKrigingSection {
    pub surrogate: Option<String>,
    pub normalize: Option<bool>,
    pub grid: Option<usize>,
    pub rho_range: Option<(f64, f64)>,
    pub rho_step: Option<f64>,
    pub diff_theta_bounds: Option<(f64, f64)>,
    pub refine_top: Option<usize>,
    pub variance_denominator: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub preset: Option<String>,
    pub epochs: Option<usize>,
    pub lambda: Option<f64>,
    pub lf_count: Option<usize>,
    pub hf_count: Option<usize>,
    pub layers: Option<Vec<usize>>,
    pub widths: Option<Vec<usize>>,
    pub learning_rates: Option<Vec<f64>>,
    pub search_epochs: Option<usize>,
}

/// Input law overrides shared by `sample` and `uq`.
#[derive(Clone, Debug, Default)]
pub struct LawSection {
    pub dist: Option<String>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub mean: Option<f64>,
    pub stddev: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSection {
    pub criterion: Option<String>,
    pub iterations: Option<usize>,
    pub grid: Option<usize>,
    pub lhs_candidates: Option<usize>,
    pub top: Option<usize>,
    pub dist: Option<String>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub mean: Option<f64>,
    pub stddev: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UqSection {
    pub n: Option<usize>,
    pub bins: Option<usize>,
    pub dist: Option<String>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub mean: Option<f64>,
    pub stddev: Option<f64>,
}

macro_rules! law_of {
    ($t:ty) => {
        impl $t {
            pub fn law(&self) -> LawSection {
                LawSection {
                    dist: self.dist.clone(),
                    lower: self.lower,
                    upper: self.upper,
                    mean: self.mean,
                    stddev: self.stddev,
                }
            }
        }
    };
}
law_of!(SampleSection);
law_of!(UqSection);

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Co-kriging (and kriging) fit options; `family` comes from a flag or
    /// the `[kernel]` table.
    pub fn cokriging_options(&self, family: Option<&str>, seed: u64) -> Result<CoKrigingOptions> {
        let k = &self.kernel;
        let c = &self.cokriging;
        let mut opts = CoKrigingOptions::default();
        opts.kernel.family = family
            .or(k.family.as_deref())
            .map(str::parse::<KernelFamily>)
            .transpose()?
            .unwrap_or(KernelFamily::Gaussian);
        opts.kernel.seed = seed;
        if let Some(b) = k.theta_bounds {
            opts.kernel.theta_bounds = b;
        }
        if let Some(b) = k.shape_bounds {
            opts.kernel.shape_bounds = b;
        }
        opts.kernel.fixed_shape = match (k.rho_uc, k.gamma_uc) {
            (Some(r), Some(g)) => Some((r, g)),
            (None, None) => None,
            _ => bail!("kernel.rho_uc and kernel.gamma_uc must be given together"),
        };
        if let Some(v) = k.nugget {
            opts.kernel.nugget = v;
        }
        if let Some(v) = k.starts {
            opts.kernel.starts = v;
        }
        if let Some(v) = k.max_evals {
            opts.kernel.max_evals = v;
        }
        if let Some(v) = c.rho_range {
            opts.rho_range = v;
        }
        if let Some(v) = c.rho_step {
            opts.rho_step = v;
        }
        if let Some(v) = c.diff_theta_bounds {
            opts.diff_theta_bounds = v;
        }
        if let Some(v) = c.refine_top {
            opts.refine_top = v;
        }
        if let Some(v) = &c.variance_denominator {
            opts.variance_denominator = v.parse()?;
        }
        Ok(opts)
    }
}

/// SHA-256 of a file's bytes, hex encoded.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

#[derive(Serialize)]
struct HashInput<'a, T: Serialize> {
    command: &'a str,
    config: &'a T,
    inputs: Vec<(&'a str, String)>,
}

/// Hash of `(command, resolved config, input digests)`.
pub fn config_hash<T: Serialize>(command: &str, resolved: &T, inputs: &[(&str, &Path)]) -> Result<String> {
    let inputs = inputs
        .iter()
        .map(|&(role, p)| Ok((role, file_digest(p)?)))
        .collect::<Result<Vec<_>>>()?;
    let doc = serde_json::to_vec(&HashInput {
        command,
        config: resolved,
        inputs,
    })?;
    Ok(hex::encode(Sha256::digest(doc)))
}
