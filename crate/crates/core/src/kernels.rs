//! Product-form correlation functions and their analytic derivatives.
//!
//! Every family factorizes over dimensions, `k(a, b) = Π_j k_j(a_j - b_j)`.
//! Derivatives are taken with respect to the first argument `a`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Lower bound applied to every one-dimensional factor.
pub const FACTOR_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    /// `exp(-θ h²)` with `h = a - b`.
    Gaussian,
    /// Cubic spline `1 - 3s² + 2s³`, `s = min(1, θ|h|)`.
    Cubic,
    /// `1 - 3(1-ρ)/(2+γ) h² + (1-ρ)(1-γ)/(2+γ) |h|³` with `h = θ(a - b)`.
    UniversalCubic,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 3] = [
        KernelFamily::Gaussian,
        KernelFamily::Cubic,
        KernelFamily::UniversalCubic,
    ];
}

impl std::fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Cubic => "cubic",
            KernelFamily::UniversalCubic => "universal-cubic",
        })
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(KernelFamily::Gaussian),
            "cubic" => Ok(KernelFamily::Cubic),
            "universal-cubic" | "universal_cubic" | "uc" => Ok(KernelFamily::UniversalCubic),
            other => Err(Error::InvalidArgument(format!("unknown kernel family `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub family: KernelFamily,
    pub theta: Vec<f64>,
    /// Universal-cubic shape parameters; empty for the other families.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rho_uc: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gamma_uc: Vec<f64>,
}

impl KernelParams {
    pub fn new(family: KernelFamily, theta: Vec<f64>) -> Result<Self> {
        if family == KernelFamily::UniversalCubic {
            let m = theta.len();
            return Self::universal_cubic(theta, vec![0.5; m], vec![0.5; m]);
        }
        let p = Self {
            family,
            theta,
            rho_uc: Vec::new(),
            gamma_uc: Vec::new(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn gaussian(theta: Vec<f64>) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, theta)
    }

    pub fn cubic(theta: Vec<f64>) -> Result<Self> {
        Self::new(KernelFamily::Cubic, theta)
    }

    pub fn universal_cubic(theta: Vec<f64>, rho: Vec<f64>, gamma: Vec<f64>) -> Result<Self> {
        let p = Self {
            family: KernelFamily::UniversalCubic,
            theta,
            rho_uc: rho,
            gamma_uc: gamma,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta.is_empty() {
            return Err(Error::InvalidArgument("kernel needs at least one dimension".into()));
        }
        if let Some(j) = self.theta.iter().position(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::InvalidArgument(format!("theta[{j}] must be positive and finite")));
        }
        if self.family == KernelFamily::UniversalCubic {
            check_dim(self.dim(), self.rho_uc.len())?;
            check_dim(self.dim(), self.gamma_uc.len())?;
            let open_unit = |v: &f64| *v > 0.0 && *v < 1.0;
            if !self.rho_uc.iter().all(open_unit) || !self.gamma_uc.iter().all(open_unit) {
                return Err(Error::InvalidArgument(
                    "universal-cubic rho and gamma must lie in (0, 1)".into(),
                ));
            }
        }
        Ok(())
    }

    /// One-dimensional factor for dimension `j` at signed offset `diff = a_j - b_j`,
    /// returned as `(k, dk/da_j, d²k/da_j²)`.
    pub fn factor(&self, j: usize, diff: f64) -> (f64, f64, f64) {
        let theta = self.theta[j];
        let (k, d1, d2) = match self.family {
            KernelFamily::Gaussian => {
                let k = (-theta * diff * diff).exp();
                (k, -2.0 * theta * diff * k, (4.0 * theta * theta * diff * diff - 2.0 * theta) * k)
            }
            KernelFamily::Cubic => {
                let s = theta * diff.abs();
                if s >= 1.0 {
                    (0.0, 0.0, 0.0)
                } else {
                    let sign = diff.signum();
                    (
                        1.0 - 3.0 * s * s + 2.0 * s * s * s,
                        (-6.0 * s + 6.0 * s * s) * theta * sign,
                        (-6.0 + 12.0 * s) * theta * theta,
                    )
                }
            }
            KernelFamily::UniversalCubic => {
                let h = theta * diff;
                let (rho, gamma) = (self.rho_uc[j], self.gamma_uc[j]);
                let a = (1.0 - rho) / (2.0 + gamma);
                let b = a * (1.0 - gamma);
                // Past its minimum at |h| = 2/(1-γ) the cubic turns back up and
                // eventually exceeds 1; hold it flat there instead.
                let turn = 2.0 / (1.0 - gamma);
                if h.abs() >= turn {
                    (1.0 - 3.0 * a * turn * turn + b * turn.powi(3), 0.0, 0.0)
                } else {
                    (
                        1.0 - 3.0 * a * h * h + b * h.abs().powi(3),
                        theta * (-6.0 * a * h + 3.0 * b * h * h.abs()),
                        theta * theta * (-6.0 * a + 6.0 * b * h.abs()),
                    )
                }
            }
        };
        if k < FACTOR_FLOOR {
            (FACTOR_FLOOR, 0.0, 0.0)
        } else {
            (k, d1, d2)
        }
    }

    fn check_pair(&self, a: &[f64], b: &[f64]) -> Result<()> {
        check_dim(self.dim(), a.len())?;
        check_dim(self.dim(), b.len())
    }
}

/// True when some factor between `x` and one of `sites` changes smoothness
/// class within distance `h` of `x` along any axis (cubic support edge,
/// positivity floor, or the `|h|³` term at zero offset). Finite-difference
/// oracles skip such points.
pub fn near_kink(params: &KernelParams, sites: &[Vec<f64>], x: &[f64], h: f64) -> bool {
    let floored = |j: usize, d: f64| params.factor(j, d).0 <= FACTOR_FLOOR;
    sites.iter().any(|s| {
        (0..params.dim()).any(|j| {
            let d = x[j] - s[j];
            let theta = params.theta[j];
            match params.family {
                KernelFamily::Gaussian => false,
                KernelFamily::Cubic => ((theta * d.abs()) - 1.0).abs() <= theta * h || d.abs() <= h,
                KernelFamily::UniversalCubic => {
                    let turn = 2.0 / (1.0 - params.gamma_uc[j]);
                    d.abs() <= h
                        || floored(j, d - h) != floored(j, d + h)
                        || ((theta * d.abs()) - turn).abs() <= theta * h
                }
            }
        })
    })
}

/// Correlation between `a` and `b`.
pub fn k(params: &KernelParams, a: &[f64], b: &[f64]) -> Result<f64> {
    params.check_pair(a, b)?;
    Ok(eval(params, a, b))
}

/// First derivative of the dimension-`j` factor with respect to `a_j`.
pub fn k_prime(params: &KernelParams, a: &[f64], b: &[f64], j: usize) -> Result<f64> {
    params.check_pair(a, b)?;
    check_index(params, j)?;
    Ok(params.factor(j, a[j] - b[j]).1)
}

/// Second derivative of the dimension-`j` factor with respect to `a_j`.
pub fn k_double_prime(params: &KernelParams, a: &[f64], b: &[f64], j: usize) -> Result<f64> {
    params.check_pair(a, b)?;
    check_index(params, j)?;
    Ok(params.factor(j, a[j] - b[j]).2)
}

fn check_index(params: &KernelParams, j: usize) -> Result<()> {
    if j < params.dim() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "dimension index {j} out of range for a {}-dimensional kernel",
            params.dim()
        )))
    }
}

fn eval(params: &KernelParams, a: &[f64], b: &[f64]) -> f64 {
    (0..params.dim()).map(|j| params.factor(j, a[j] - b[j]).0).product()
}

/// Value, gradient and Hessian diagonal of the full product kernel in `a`.
pub(crate) struct KernelJet {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess_diag: Vec<f64>,
}

pub(crate) fn jet(params: &KernelParams, a: &[f64], b: &[f64]) -> KernelJet {
    let m = params.dim();
    let factors: Vec<(f64, f64, f64)> = (0..m).map(|j| params.factor(j, a[j] - b[j])).collect();
    // others[j] = Π_{k != j} k_k via prefix/suffix products
    let mut others = vec![1.0; m];
    let mut acc = 1.0;
    for j in 0..m {
        others[j] = acc;
        acc *= factors[j].0;
    }
    let value = acc;
    acc = 1.0;
    for j in (0..m).rev() {
        others[j] *= acc;
        acc *= factors[j].0;
    }
    KernelJet {
        value,
        grad: (0..m).map(|j| factors[j].1 * others[j]).collect(),
        hess_diag: (0..m).map(|j| factors[j].2 * others[j]).collect(),
    }
}

/// Symmetric correlation matrix `R_ij = k(x_i, x_j)` (unit diagonal, no nugget).
pub fn correlation_matrix(params: &KernelParams, xs: &[Vec<f64>]) -> DMatrix<f64> {
    cross_matrix(params, xs, xs, true)
}

/// `R_ij = k(a_i, b_j)`.
pub fn cross_matrix(params: &KernelParams, a: &[Vec<f64>], b: &[Vec<f64>], symmetric: bool) -> DMatrix<f64> {
    let mut r = DMatrix::zeros(a.len(), b.len());
    for i in 0..a.len() {
        if symmetric {
            r[(i, i)] = eval(params, &a[i], &b[i]);
            for j in 0..i {
                let v = eval(params, &a[i], &b[j]);
                r[(i, j)] = v;
                r[(j, i)] = v;
            }
        } else {
            for j in 0..b.len() {
                r[(i, j)] = eval(params, &a[i], &b[j]);
            }
        }
    }
    r
}

/// Correlation vector `r_i = k(x, x_i)`.
pub fn correlation_vector(params: &KernelParams, xs: &[Vec<f64>], x: &[f64]) -> DVector<f64> {
    DVector::from_iterator(xs.len(), xs.iter().map(|xi| eval(params, x, xi)))
}

/// Correlation vector with its derivatives in `x`: rows follow `xs`, columns
/// of the two matrices follow input dimensions.
pub(crate) fn correlation_vector_jet(
    params: &KernelParams,
    xs: &[Vec<f64>],
    x: &[f64],
) -> (DVector<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = xs.len();
    let m = params.dim();
    let mut r = DVector::zeros(n);
    let mut dr = DMatrix::zeros(n, m);
    let mut d2r = DMatrix::zeros(n, m);
    for (i, xi) in xs.iter().enumerate() {
        let jet = jet(params, x, xi);
        r[i] = jet.value;
        for j in 0..m {
            dr[(i, j)] = jet.grad[j];
            d2r[(i, j)] = jet.hess_diag[j];
        }
    }
    (r, dr, d2r)
}
