//! Common interface over the Gaussian-process surrogates, used by the infill
//! criteria and the CLI.

use serde::{Deserialize, Serialize};

use crate::cokriging::{CoKrigingModel, CoKrigingOptions};
use crate::dataset::{normalize, MultiFidelityDataset, Normalization};
use crate::error::{check_dim, Result};
use crate::kernels::KernelFamily;
use crate::kriging::KrigingModel;

/// Predictor, uncertainty and derivatives in raw input units.
pub trait Surrogate {
    fn dim(&self) -> usize;
    fn predict(&self, x: &[f64]) -> Result<f64>;
    /// Mean squared error of the predictor, `ŝ²`.
    fn variance(&self, x: &[f64]) -> Result<f64>;
    fn predict_grad(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn predict_hess_diag(&self, x: &[f64]) -> Result<Vec<f64>>;
}

impl Surrogate for KrigingModel {
    fn dim(&self) -> usize {
        KrigingModel::dim(self)
    }
    fn predict(&self, x: &[f64]) -> Result<f64> {
        KrigingModel::predict(self, x)
    }
    fn variance(&self, x: &[f64]) -> Result<f64> {
        KrigingModel::variance(self, x)
    }
    fn predict_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        KrigingModel::predict_grad(self, x)
    }
    fn predict_hess_diag(&self, x: &[f64]) -> Result<Vec<f64>> {
        KrigingModel::predict_hess_diag(self, x)
    }
}

impl Surrogate for CoKrigingModel {
    fn dim(&self) -> usize {
        CoKrigingModel::dim(self)
    }
    fn predict(&self, x: &[f64]) -> Result<f64> {
        CoKrigingModel::predict(self, x)
    }
    fn variance(&self, x: &[f64]) -> Result<f64> {
        CoKrigingModel::variance(self, x)
    }
    fn predict_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        CoKrigingModel::predict_grad(self, x)
    }
    fn predict_hess_diag(&self, x: &[f64]) -> Result<Vec<f64>> {
        CoKrigingModel::predict_hess_diag(self, x)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurrogateKind {
    /// Ordinary kriging of the expensive samples only.
    Kriging,
    #[default]
    CoKriging,
}

impl std::str::FromStr for SurrogateKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kriging" => Ok(Self::Kriging),
            "cokriging" | "co-kriging" => Ok(Self::CoKriging),
            other => Err(crate::Error::InvalidArgument(format!(
                "unknown surrogate `{other}` (expected kriging or cokriging)"
            ))),
        }
    }
}

/// A fitted surrogate that accepts raw coordinates.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FittedModel {
    Kriging {
        model: KrigingModel,
        normalization: Normalization,
    },
    CoKriging {
        model: CoKrigingModel,
    },
}

impl FittedModel {
    /// Fits `kind` with kernel `family` on raw-unit data, optionally mapping
    /// inputs onto the unit cube first.
    pub fn fit(
        kind: SurrogateKind,
        dataset: &MultiFidelityDataset,
        opts: &CoKrigingOptions,
        family: KernelFamily,
        normalize_inputs: bool,
    ) -> Result<Self> {
        let ds = if normalize_inputs {
            normalize(dataset)?
        } else {
            dataset.clone()
        };
        let mut opts = opts.clone();
        opts.kernel.family = family;
        Ok(match kind {
            SurrogateKind::Kriging => FittedModel::Kriging {
                model: KrigingModel::fit(&ds.expensive, &opts.kernel)?,
                normalization: ds.normalization,
            },
            SurrogateKind::CoKriging => FittedModel::CoKriging {
                model: CoKrigingModel::fit(&ds, &opts)?,
            },
        })
    }

    pub fn family(&self) -> KernelFamily {
        match self {
            FittedModel::Kriging { model, .. } => model.params().family,
            FittedModel::CoKriging { model } => model.cheap().params().family,
        }
    }

    fn unit(&self, x: &[f64]) -> Result<Vec<f64>> {
        let FittedModel::Kriging { normalization, .. } = self else {
            unreachable!("co-kriging normalizes internally")
        };
        check_dim(normalization.dim(), x.len())?;
        Ok(normalization.to_unit(x))
    }

    fn scaled(&self, mut v: Vec<f64>, power: i32) -> Vec<f64> {
        if let FittedModel::Kriging { normalization, .. } = self {
            for (j, g) in v.iter_mut().enumerate() {
                *g /= normalization.scale(j).powi(power);
            }
        }
        v
    }
}

impl Surrogate for FittedModel {
    fn dim(&self) -> usize {
        match self {
            FittedModel::Kriging { model, .. } => model.dim(),
            FittedModel::CoKriging { model } => model.dim(),
        }
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        match self {
            FittedModel::Kriging { model, .. } => model.predict(&self.unit(x)?),
            FittedModel::CoKriging { model } => model.predict(x),
        }
    }

    fn variance(&self, x: &[f64]) -> Result<f64> {
        match self {
            FittedModel::Kriging { model, .. } => model.variance(&self.unit(x)?),
            FittedModel::CoKriging { model } => model.variance(x),
        }
    }

    fn predict_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            FittedModel::Kriging { model, .. } => Ok(self.scaled(model.predict_grad(&self.unit(x)?)?, 1)),
            FittedModel::CoKriging { model } => model.predict_grad(x),
        }
    }

    fn predict_hess_diag(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            FittedModel::Kriging { model, .. } => Ok(self.scaled(model.predict_hess_diag(&self.unit(x)?)?, 2)),
            FittedModel::CoKriging { model } => model.predict_hess_diag(x),
        }
    }
}
