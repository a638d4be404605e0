//! Ordinary kriging: constant-mean Gaussian process interpolation with
//! hyperparameters chosen by concentrated maximum likelihood.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{latin_hypercube, SamplePoint, DUPLICATE_TOL};
use crate::error::{check_dim, Error, Result};
use crate::kernels::{self, KernelFamily, KernelParams};
use crate::linalg::{SpdFactor, DEFAULT_NUGGET};
use crate::optimize::{nelder_mead, Bounds};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Options for hyperparameter estimation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub family: KernelFamily,
    /// Search interval for every θ_j (searched on a log scale).
    pub theta_bounds: (f64, f64),
    /// Search interval for the universal-cubic ρ_j and γ_j.
    pub shape_bounds: (f64, f64),
    /// Fixes the universal-cubic (ρ, γ) instead of searching them.
    pub fixed_shape: Option<(f64, f64)>,
    pub nugget: f64,
    pub seed: u64,
    /// Number of best grid candidates refined by Nelder-Mead.
    pub starts: usize,
    pub max_evals: usize,
    /// Candidates whose regularized solve misses the data by more than this
    /// (relative to `max |f_i|`) are treated as infeasible.
    pub interpolation_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            family: KernelFamily::Gaussian,
            theta_bounds: (1e-2, 1e2),
            shape_bounds: (0.05, 0.95),
            fixed_shape: None,
            nugget: DEFAULT_NUGGET,
            seed: 0,
            starts: 3,
            max_evals: 400,
            interpolation_tol: 1e-9,
        }
    }
}

impl FitOptions {
    pub fn with_family(family: KernelFamily) -> Self {
        Self {
            family,
            ..Self::default()
        }
    }
}

/// Search-space encoding: `log10 θ_j`, then (for universal-cubic with free
/// shape) `ρ_j` and `γ_j`.
struct Encoding<'a> {
    opts: &'a FitOptions,
    dim: usize,
}

impl Encoding<'_> {
    fn free_shape(&self) -> bool {
        self.opts.family == KernelFamily::UniversalCubic && self.opts.fixed_shape.is_none()
    }

    fn len(&self) -> usize {
        if self.free_shape() {
            3 * self.dim
        } else {
            self.dim
        }
    }

    fn bounds(&self) -> Bounds {
        let (tl, tu) = self.opts.theta_bounds;
        let (sl, su) = self.opts.shape_bounds;
        let mut lower = vec![tl.log10(); self.dim];
        let mut upper = vec![tu.log10(); self.dim];
        if self.free_shape() {
            lower.extend(std::iter::repeat(sl).take(2 * self.dim));
            upper.extend(std::iter::repeat(su).take(2 * self.dim));
        }
        Bounds::new(lower, upper)
    }

    fn decode(&self, z: &[f64]) -> KernelParams {
        let m = self.dim;
        let theta = z[..m].iter().map(|v| 10f64.powf(*v)).collect();
        match self.opts.family {
            KernelFamily::UniversalCubic => {
                let (rho, gamma) = match self.opts.fixed_shape {
                    Some((r, g)) => (vec![r; m], vec![g; m]),
                    None => (z[m..2 * m].to_vec(), z[2 * m..3 * m].to_vec()),
                };
                KernelParams {
                    family: KernelFamily::UniversalCubic,
                    theta,
                    rho_uc: rho,
                    gamma_uc: gamma,
                }
            }
            family => KernelParams {
                family,
                theta,
                rho_uc: Vec::new(),
                gamma_uc: Vec::new(),
            },
        }
    }

    /// Tensor grid for up to three search coordinates, a Latin hypercube above.
    fn candidates(&self) -> Vec<Vec<f64>> {
        let bounds = self.bounds();
        let p = self.len();
        let unit: Vec<Vec<f64>> = match p {
            1..=3 => {
                let levels = [0, 41, 15, 7][p];
                let axis: Vec<f64> = (0..levels).map(|i| i as f64 / (levels - 1) as f64).collect();
                let mut grid = vec![Vec::new()];
                for _ in 0..p {
                    grid = grid
                        .into_iter()
                        .flat_map(|g| {
                            axis.iter().map(move |&a| {
                                let mut g = g.clone();
                                g.push(a);
                                g
                            })
                        })
                        .collect();
                }
                grid
            }
            _ => latin_hypercube((10 * p).max(50), p, self.opts.seed).expect("positive sizes"),
        };
        unit.into_iter()
            .map(|u| {
                u.iter()
                    .enumerate()
                    .map(|(j, v)| bounds.lower[j] + v * bounds.width(j))
                    .collect()
            })
            .collect()
    }
}

/// Result of maximizing a likelihood over kernel hyperparameters.
#[derive(Clone, Debug)]
pub(crate) struct SearchOutcome {
    pub params: KernelParams,
    pub log_likelihood: f64,
    /// Largest likelihood among the grid candidates.
    pub grid_max: f64,
}

/// Decoded grid candidates of the hyperparameter search.
pub(crate) fn candidate_params(dim: usize, opts: &FitOptions) -> Vec<KernelParams> {
    let enc = Encoding { opts, dim };
    enc.candidates().iter().map(|z| enc.decode(z)).collect()
}

/// Grid probe followed by multi-start Nelder-Mead refinement. `objective`
/// returns the log-likelihood (non-finite means infeasible).
pub(crate) fn maximize_likelihood<F>(dim: usize, opts: &FitOptions, mut objective: F) -> Result<SearchOutcome>
where
    F: FnMut(&KernelParams) -> f64,
{
    let enc = Encoding { opts, dim };
    let bounds = enc.bounds();
    let mut probes: Vec<(Vec<f64>, f64)> = enc
        .candidates()
        .into_iter()
        .map(|z| {
            let ll = objective(&enc.decode(&z));
            (z, if ll.is_finite() { ll } else { f64::NEG_INFINITY })
        })
        .collect();
    probes.sort_by(|a, b| b.1.total_cmp(&a.1));
    let grid_max = probes[0].1;
    if !grid_max.is_finite() {
        return Err(Error::SearchExhausted(format!(
            "all {} {} candidates give singular or ill-conditioned correlation matrices; check for near-duplicate inputs",
            probes.len(),
            opts.family
        )));
    }

    let mut best = probes[0].clone();
    for (start, ll) in probes.iter().take(opts.starts.max(1)) {
        if !ll.is_finite() {
            break;
        }
        let m = nelder_mead(
            |z| -objective(&enc.decode(z)),
            start,
            0.05,
            &bounds,
            opts.max_evals,
            1e-9,
        );
        if -m.value > best.1 {
            best = (m.x, -m.value);
        }
    }
    Ok(SearchOutcome {
        params: enc.decode(&best.0),
        log_likelihood: best.1,
        grid_max,
    })
}

/// Closed-form GLS mean, process variance and concentrated log-likelihood for
/// observations `y` under correlation factor `factor`.
pub(crate) struct Concentrated {
    pub mu: f64,
    pub sigma2: f64,
    pub log_likelihood: f64,
}

pub(crate) fn concentrated(factor: &SpdFactor, y: &DVector<f64>) -> Concentrated {
    let n = y.len();
    let ones = DVector::from_element(n, 1.0);
    let r_inv_ones = factor.solve(&ones);
    let mu = r_inv_ones.dot(y) / r_inv_ones.sum();
    let resid = y.add_scalar(-mu);
    let sigma2 = (factor.quad_form(&resid) / n as f64).max(0.0);
    let nf = n as f64;
    let log_likelihood =
        -0.5 * nf * LN_2PI - 0.5 * nf * sigma2.max(f64::MIN_POSITIVE).ln() - 0.5 * factor.log_det();
    Concentrated {
        mu,
        sigma2,
        log_likelihood,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct KrigingFile {
    family: KernelFamily,
    theta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    rho_uc: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    gamma_uc: Vec<f64>,
    mu: f64,
    sigma2: f64,
    points: Vec<SamplePoint>,
    nugget: f64,
    #[serde(default)]
    log_likelihood: Option<f64>,
}

/// Fitted ordinary-kriging interpolator. Immutable; safe to share.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(into = "KrigingFile", try_from = "KrigingFile")]
pub struct KrigingModel {
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
    params: KernelParams,
    mu: f64,
    sigma2: f64,
    nugget: f64,
    factor: SpdFactor,
    alpha: DVector<f64>,
    ones_r_inv_ones: f64,
    log_likelihood: f64,
    grid_max_log_likelihood: f64,
}

impl From<KrigingModel> for KrigingFile {
    fn from(m: KrigingModel) -> Self {
        KrigingFile {
            family: m.params.family,
            theta: m.params.theta.clone(),
            rho_uc: m.params.rho_uc.clone(),
            gamma_uc: m.params.gamma_uc.clone(),
            mu: m.mu,
            sigma2: m.sigma2,
            points: m.points(),
            nugget: m.nugget,
            log_likelihood: Some(m.log_likelihood),
        }
    }
}

impl TryFrom<KrigingFile> for KrigingModel {
    type Error = Error;

    fn try_from(f: KrigingFile) -> Result<Self> {
        let params = KernelParams {
            family: f.family,
            theta: f.theta,
            rho_uc: f.rho_uc,
            gamma_uc: f.gamma_uc,
        };
        params.validate()?;
        KrigingModel::with_params(&f.points, params, f.nugget)
    }
}

/// Non-Gaussian Grams checked by [`KrigingModel::fit_covering`] must have
/// `λ_min(R) > COVERING_MARGIN · max diag`.
pub const COVERING_MARGIN: f64 = 1e-10;

impl KrigingModel {
    /// Estimates Θ (and the universal-cubic shape) by maximizing the
    /// concentrated log-likelihood, then builds the interpolator.
    pub fn fit(points: &[SamplePoint], opts: &FitOptions) -> Result<Self> {
        Self::fit_covering(points, opts, &[])
    }

    /// Like [`KrigingModel::fit`], but Θ must also give a factorizable
    /// correlation over `extra` sites. Co-kriging needs this: universal-cubic
    /// and cubic Grams can be indefinite on sites a plain fit never saw.
    pub fn fit_covering(points: &[SamplePoint], opts: &FitOptions, extra: &[Vec<f64>]) -> Result<Self> {
        validate_points(points)?;
        let xs: Vec<Vec<f64>> = points.iter().map(|p| p.x.clone()).collect();
        let y = DVector::from_iterator(points.len(), points.iter().map(|p| p.y));
        let dim = xs[0].len();
        for e in extra {
            check_dim(dim, e.len())?;
        }
        // the augmented co-kriging covariance gets almost no jitter, so ask
        // for a spectral margin instead of a nugget
        let covering = !extra.is_empty() && opts.family != KernelFamily::Gaussian;
        let mut union = xs.clone();
        for e in extra {
            if union.iter().all(|u| crate::dataset::euclidean(u, e) > 1e-12) {
                union.push(e.clone());
            }
        }
        let probes = if opts.family == KernelFamily::Gaussian {
            Vec::new()
        } else {
            variance_probes(&xs)?
        };
        let outcome = maximize_likelihood(dim, opts, |params| {
            if covering && SpdFactor::new(kernels::correlation_matrix(params, &union), -COVERING_MARGIN, "covering correlation").is_err() {
                return f64::NEG_INFINITY;
            }
            let r = kernels::correlation_matrix(params, &xs);
            let Ok(f) = SpdFactor::new(r.clone(), opts.nugget, "kriging correlation") else {
                return f64::NEG_INFINITY;
            };
            let conc = concentrated(&f, &y);
            if solve_residual(&r, &f, &y, conc.mu) > opts.interpolation_tol {
                return f64::NEG_INFINITY;
            }
            if !probes.is_empty() && min_scaled_variance(params, &xs, &f, &probes) < -NEGATIVE_VARIANCE_TOL {
                return f64::NEG_INFINITY;
            }
            conc.log_likelihood
        })?;
        log::debug!(
            "kriging fit: {} ln L = {:.6} (grid max {:.6})",
            opts.family,
            outcome.log_likelihood,
            outcome.grid_max
        );
        let mut model = Self::with_params(points, outcome.params, opts.nugget)?;
        model.grid_max_log_likelihood = outcome.grid_max;
        Ok(model)
    }

    /// Builds the interpolator for fixed kernel hyperparameters.
    pub fn with_params(points: &[SamplePoint], params: KernelParams, nugget: f64) -> Result<Self> {
        validate_points(points)?;
        check_dim(params.dim(), points[0].x.len())?;
        let xs: Vec<Vec<f64>> = points.iter().map(|p| p.x.clone()).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.y).collect();
        let y = DVector::from_column_slice(&ys);
        let factor = SpdFactor::new(kernels::correlation_matrix(&params, &xs), nugget, "kriging correlation")?;
        let conc = concentrated(&factor, &y);
        let alpha = factor.solve(&y.add_scalar(-conc.mu));
        let ones_r_inv_ones = factor.solve(&DVector::from_element(ys.len(), 1.0)).sum();
        Ok(Self {
            xs,
            ys,
            params,
            mu: conc.mu,
            sigma2: conc.sigma2,
            nugget,
            factor,
            alpha,
            ones_r_inv_ones,
            log_likelihood: conc.log_likelihood,
            grid_max_log_likelihood: f64::NEG_INFINITY,
        })
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    /// Best likelihood seen on the search grid (`-∞` for fixed-parameter models).
    pub fn grid_max_log_likelihood(&self) -> f64 {
        self.grid_max_log_likelihood
    }

    pub fn xs(&self) -> &[Vec<f64>] {
        &self.xs
    }

    pub fn points(&self) -> Vec<SamplePoint> {
        self.xs
            .iter()
            .zip(&self.ys)
            .map(|(x, &y)| SamplePoint::new(x.clone(), y))
            .collect()
    }

    /// `μ + r(x)ᵀ R⁻¹ (f - 1μ)`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        let r = kernels::correlation_vector(&self.params, &self.xs, x);
        Ok(self.mu + r.dot(&self.alpha))
    }

    /// Mean squared error of the predictor, clamped at zero and exactly zero
    /// at training sites.
    pub fn variance(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        if self.at_training_site(x) {
            return Ok(0.0);
        }
        let r = kernels::correlation_vector(&self.params, &self.xs, x);
        let r_inv_r = self.factor.solve(&r);
        let gls = 1.0 - r_inv_r.sum();
        let s2 = self.sigma2 * (1.0 - r.dot(&r_inv_r) + gls * gls / self.ones_r_inv_ones);
        Ok(s2.max(0.0))
    }

    pub fn predict_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let (_, dr, _) = kernels::correlation_vector_jet(&self.params, &self.xs, x);
        Ok((dr.transpose() * &self.alpha).iter().copied().collect())
    }

    pub fn predict_hess_diag(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let (_, _, d2r) = kernels::correlation_vector_jet(&self.params, &self.xs, x);
        Ok((d2r.transpose() * &self.alpha).iter().copied().collect())
    }

    fn at_training_site(&self, x: &[f64]) -> bool {
        self.xs
            .iter()
            .any(|xi| crate::dataset::euclidean(xi, x) <= DUPLICATE_TOL)
    }
}

/// Largest `|R α - (y - μ)| / (1 + |y_i|)` where `α` solves the nugget-shifted
/// system. The nugget trades exact interpolation for a stable factorization;
/// this measures what it cost.
/// Floored cubic and universal-cubic kernels are not positive definite for
/// every Θ; a fit whose predictive variance goes below `-NEGATIVE_VARIANCE_TOL · σ²`
/// at a probe point is rejected.
pub(crate) const NEGATIVE_VARIANCE_TOL: f64 = 1e-8;

/// Probe points in the bounding box of `xs`: quarter points between
/// neighbours in one dimension, a Latin hypercube otherwise.
pub(crate) fn variance_probes(xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let dim = xs[0].len();
    if dim == 1 {
        let mut v: Vec<f64> = xs.iter().map(|x| x[0]).collect();
        v.sort_by(f64::total_cmp);
        return Ok(v
            .windows(2)
            .filter(|w| w[1] > w[0])
            .flat_map(|w| [0.25, 0.5, 0.75].map(|t| vec![w[0] + t * (w[1] - w[0])]))
            .collect());
    }
    let lo: Vec<f64> = (0..dim).map(|j| xs.iter().map(|x| x[j]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..dim).map(|j| xs.iter().map(|x| x[j]).fold(f64::NEG_INFINITY, f64::max)).collect();
    Ok(latin_hypercube((4 * xs.len()).max(32), dim, 0x5eed)?
        .into_iter()
        .map(|u| (0..dim).map(|j| lo[j] + u[j] * (hi[j] - lo[j])).collect())
        .collect())
}

/// Smallest `s²/σ²` of the ordinary-kriging predictor over `probes`.
pub(crate) fn min_scaled_variance(params: &KernelParams, xs: &[Vec<f64>], factor: &SpdFactor, probes: &[Vec<f64>]) -> f64 {
    let b = kernels::cross_matrix(params, xs, probes, false);
    let w = factor.solve_matrix(&b);
    let u = factor.solve(&DVector::from_element(xs.len(), 1.0));
    let s = u.sum();
    (0..probes.len())
        .map(|j| {
            let q = b.column(j).dot(&w.column(j));
            let t = u.dot(&b.column(j));
            1.0 - q + (1.0 - t).powi(2) / s
        })
        .fold(f64::INFINITY, f64::min)
}

pub(crate) fn solve_residual(r: &DMatrix<f64>, factor: &SpdFactor, y: &DVector<f64>, mu: f64) -> f64 {
    let centered = y.add_scalar(-mu);
    let alpha = factor.solve(&centered);
    let fitted = r * alpha;
    // relative to the data scale so the feasible set is invariant to y -> c y
    let scale = y.amax().max(f64::MIN_POSITIVE);
    (fitted - centered).amax() / scale
}

fn validate_points(points: &[SamplePoint]) -> Result<()> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "kriging needs at least 2 points, got {}",
            points.len()
        )));
    }
    let dim = points[0].x.len();
    for p in points {
        check_dim(dim, p.x.len())?;
    }
    Ok(())
}
