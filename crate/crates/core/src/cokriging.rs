//! Two-fidelity co-kriging.
//!
//! The expensive process is modeled as `Z_e = ρ Z_c + Z_d` with the
//! difference process `Z_d` independent of `Z_c`. Fitting proceeds in two
//! stages: an ordinary kriging model of the cheap data, then a joint search
//! over `ρ` and the difference-process hyperparameters `Θ_d` that maximizes
//! the concentrated likelihood of `d = f_e - ρ f_c(ξ_e)`. The fused predictor
//! uses the augmented covariance of both data sets with a single GLS mean.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{euclidean, Fidelity, MultiFidelityDataset, Normalization, SamplePoint, DUPLICATE_TOL};
use crate::error::{check_dim, Error, Result};
use crate::kernels::{self, KernelFamily, KernelParams};
use crate::kriging::{
    candidate_params, concentrated, min_scaled_variance, solve_residual, variance_probes, FitOptions, KrigingModel,
    COVERING_MARGIN, NEGATIVE_VARIANCE_TOL,
};
use crate::linalg::SpdFactor;
use crate::optimize::{golden_section_max, nelder_mead, Bounds};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Likelihood nugget for both processes. A near-linear difference is only
/// identified in the flat-kernel limit, which a larger nugget cuts off.
pub const COKRIGING_NUGGET: f64 = 1e-14;

/// Largest accepted `|f̂(ξ_e) - f_e| / (1 + |f_e|)` at the expensive samples.
pub const C_INTERPOLATION_TOL: f64 = 1e-7;

/// Jitter range for the augmented covariance.
const C_JITTER: (f64, f64) = (1e-16, 1e-8);

/// Denominator of the last term of the co-kriging mean squared error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceDenominator {
    /// `cᵀ C⁻¹ c`
    #[default]
    AsPrinted,
    /// `1ᵀ C⁻¹ 1`
    Ones,
}

impl std::str::FromStr for VarianceDenominator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "as_printed" => Ok(Self::AsPrinted),
            "ones" => Ok(Self::Ones),
            other => Err(Error::InvalidArgument(format!(
                "unknown variance denominator `{other}` (expected as_printed or ones)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoKrigingOptions {
    /// Kernel family, bounds and seed shared by the cheap and difference processes.
    pub kernel: FitOptions,
    /// θ search interval of the difference process. Its lower end sits well
    /// below the cheap one because a near-linear difference drives θ_d to 0.
    pub diff_theta_bounds: (f64, f64),
    pub rho_range: (f64, f64),
    pub rho_step: f64,
    /// Number of best ρ grid cells whose Θ_d is refined before golden-section search.
    pub refine_top: usize,
    pub variance_denominator: VarianceDenominator,
}

impl Default for CoKrigingOptions {
    fn default() -> Self {
        Self {
            kernel: FitOptions {
                nugget: COKRIGING_NUGGET,
                ..FitOptions::default()
            },
            diff_theta_bounds: (1e-6, 1e2),
            rho_range: (-5.0, 5.0),
            rho_step: 0.01,
            refine_top: 5,
            variance_denominator: VarianceDenominator::AsPrinted,
        }
    }
}

impl CoKrigingOptions {
    pub fn with_family(family: kernels::KernelFamily) -> Self {
        let mut opts = Self::default();
        opts.kernel.family = family;
        opts
    }

    fn rho_grid(&self) -> Vec<f64> {
        let (lo, hi) = self.rho_range;
        let steps = ((hi - lo) / self.rho_step).round() as i64;
        (0..=steps).map(|i| lo + i as f64 * self.rho_step).map(round_grid).collect()
    }
}

/// Snaps grid values like `-5 + 600 * 0.01` onto the nearest multiple of 1e-9.
fn round_grid(v: f64) -> f64 {
    (v * 1e9).round() / 1e9
}

/// Quadratic-in-ρ pieces of the difference-process likelihood for one Θ_d:
/// with `d(ρ) = f_e - ρ g`, the GLS residual is `a - ρ b`. The regularized
/// solve misses `a - ρ b` by `miss_a - ρ miss_b`, which is linear in ρ too.
struct ProfileTerms<'a> {
    aa: f64,
    ab: f64,
    bb: f64,
    log_det: f64,
    n: usize,
    miss_a: DVector<f64>,
    miss_b: DVector<f64>,
    fe: &'a DVector<f64>,
    g: &'a DVector<f64>,
}

impl<'a> ProfileTerms<'a> {
    fn new(r: &DMatrix<f64>, factor: &SpdFactor, fe: &'a DVector<f64>, g: &'a DVector<f64>) -> Self {
        let n = fe.len();
        let u = factor.solve(&DVector::from_element(n, 1.0));
        let s = u.sum();
        let a = fe.add_scalar(-u.dot(fe) / s);
        let b = g.add_scalar(-u.dot(g) / s);
        let ra = factor.solve(&a);
        let rb = factor.solve(&b);
        Self {
            aa: a.dot(&ra),
            ab: b.dot(&ra),
            bb: b.dot(&rb),
            log_det: factor.log_det(),
            n,
            miss_a: r * &ra - &a,
            miss_b: r * &rb - &b,
            fe,
            g,
        }
    }

    /// Same measure as the kriging feasibility check.
    fn solve_residual(&self, rho: f64) -> f64 {
        let scale = (self.fe - self.g * rho).amax().max(f64::MIN_POSITIVE);
        (&self.miss_a - &self.miss_b * rho).amax() / scale
    }

    fn log_likelihood(&self, rho: f64) -> f64 {
        let n = self.n as f64;
        let sigma2 = ((self.aa - 2.0 * rho * self.ab + rho * rho * self.bb) / n).max(f64::MIN_POSITIVE);
        -0.5 * n * LN_2PI - 0.5 * n * sigma2.ln() - 0.5 * self.log_det
    }
}

/// Diagnostics of the ρ / Θ_d search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoSearch {
    /// Concentrated difference likelihood at the returned (ρ, Θ_d).
    pub log_likelihood: f64,
    /// Largest likelihood over all (ρ grid, Θ_d grid) probes.
    pub grid_max: f64,
    pub grid_points: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CoKrigingFile {
    cheap: KrigingModel,
    diff_params: KernelParams,
    rho: f64,
    mu_hat: f64,
    sigma_d2: f64,
    mu_d: f64,
    nugget: f64,
    variance_denominator: VarianceDenominator,
    expensive: Vec<SamplePoint>,
    normalization: Normalization,
    #[serde(default)]
    search: Option<RhoSearch>,
}

/// Fitted two-fidelity co-kriging model. Inputs to `predict` and friends are
/// in raw units; they are mapped through the dataset normalization.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(into = "CoKrigingFile", try_from = "CoKrigingFile")]
pub struct CoKrigingModel {
    dataset: MultiFidelityDataset,
    cheap: KrigingModel,
    diff_params: KernelParams,
    sigma_d2: f64,
    mu_d: f64,
    rho: f64,
    mu_hat: f64,
    nugget: f64,
    variance_denominator: VarianceDenominator,
    solver: AugmentedSolver,
    alpha: DVector<f64>,
    ones_c_inv_ones: f64,
    search: Option<RhoSearch>,
}

impl From<CoKrigingModel> for CoKrigingFile {
    fn from(m: CoKrigingModel) -> Self {
        CoKrigingFile {
            cheap: m.cheap,
            diff_params: m.diff_params,
            rho: m.rho,
            mu_hat: m.mu_hat,
            sigma_d2: m.sigma_d2,
            mu_d: m.mu_d,
            nugget: m.nugget,
            variance_denominator: m.variance_denominator,
            expensive: m.dataset.expensive,
            normalization: m.dataset.normalization,
            search: m.search,
        }
    }
}

impl TryFrom<CoKrigingFile> for CoKrigingModel {
    type Error = Error;

    fn try_from(f: CoKrigingFile) -> Result<Self> {
        let mut dataset = MultiFidelityDataset::new(f.cheap.points(), f.expensive)?;
        dataset.normalization = f.normalization;
        let mut model = CoKrigingModel::assemble(
            dataset,
            f.cheap,
            f.diff_params,
            f.rho,
            f.nugget,
            f.variance_denominator,
        )?;
        model.search = f.search;
        Ok(model)
    }
}

/// Solves with the augmented covariance
///
/// ```text
/// C = | σc² Rc        ρ σc² B          |
///     | ρ σc² Bᵀ      ρ² σc² E + σd² Rd |
/// ```
///
/// by block elimination. Factorizing C whole loses the expensive data to
/// round-off once an expensive site sits near (not on) a cheap one. The
/// Schur complement `ρ² σc² (E - Bᵀ Rc⁻¹ B) + σd² Rd` stays well scaled.
#[derive(Clone, Debug)]
struct AugmentedSolver {
    cheap: SpdFactor,
    sigma_c2: f64,
    rho: f64,
    /// `Rc⁻¹ B`
    w: DMatrix<f64>,
    schur: SpdFactor,
}

impl AugmentedSolver {
    fn new(
        cheap: &KrigingModel,
        xc: &[Vec<f64>],
        xe: &[Vec<f64>],
        rd: &DMatrix<f64>,
        rho: f64,
        sigma_d2: f64,
    ) -> Result<Self> {
        let params = cheap.params();
        // constant cheap data has σc² = 0; keep the block solvable
        let sigma_c2 = cheap.sigma2().max(1e-150);
        let factor = SpdFactor::new(kernels::correlation_matrix(params, xc), cheap.nugget(), "cheap correlation")?;
        let b = kernels::cross_matrix(params, xc, xe, false);
        let w = factor.solve_matrix(&b);
        let posterior = kernels::correlation_matrix(params, xe) - b.transpose() * &w;
        let posterior = (&posterior + posterior.transpose()) * 0.5;
        let s = posterior * (rho * rho * sigma_c2) + rd * sigma_d2;
        let (schur, _) = SpdFactor::with_jitter(s, C_JITTER.0, C_JITTER.1, "co-kriging covariance")?;
        Ok(Self {
            cheap: factor,
            sigma_c2,
            rho,
            w,
            schur,
        })
    }

    fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let nc = self.w.nrows();
        let b1 = b.rows(0, nc).into_owned();
        let b2 = b.rows(nc, b.len() - nc).into_owned();
        let z2 = self.schur.solve(&(b2 - self.w.transpose() * &b1 * self.rho));
        let z1 = self.cheap.solve(&b1) / self.sigma_c2 - &self.w * &z2 * self.rho;
        let mut z = DVector::zeros(b.len());
        z.rows_mut(0, nc).copy_from(&z1);
        z.rows_mut(nc, z2.len()).copy_from(&z2);
        z
    }
}

/// Same spectral margin and variance probes the cheap fit uses; the Gaussian
/// kernel is exempt because its flat limit is what identifies near-linear
/// differences.
fn admissible(params: &KernelParams, xe: &[Vec<f64>], r: &DMatrix<f64>, probes: &[Vec<f64>]) -> bool {
    if params.family == KernelFamily::Gaussian {
        return true;
    }
    let Ok(f) = SpdFactor::new(r.clone(), -COVERING_MARGIN, "difference correlation") else {
        return false;
    };
    min_scaled_variance(params, xe, &f, probes) >= -NEGATIVE_VARIANCE_TOL
}

/// Cheap-model values at the expensive sites: an exact cheap sample when one
/// exists there, otherwise the cheap kriging prediction.
fn cheap_at_expensive(dataset: &MultiFidelityDataset, cheap: &KrigingModel) -> Result<DVector<f64>> {
    let values = dataset
        .expensive
        .iter()
        .map(|pe| {
            match dataset
                .cheap
                .iter()
                .find(|pc| euclidean(&pc.x, &pe.x) <= DUPLICATE_TOL)
            {
                Some(pc) => Ok(pc.y),
                None => cheap.predict(&pe.x),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DVector::from_vec(values))
}

impl CoKrigingModel {
    pub fn fit(dataset: &MultiFidelityDataset, opts: &CoKrigingOptions) -> Result<Self> {
        if dataset.cheap.len() < 2 || dataset.expensive.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "co-kriging needs at least 2 cheap and 2 expensive samples (got {} and {})",
                dataset.cheap.len(),
                dataset.expensive.len()
            )));
        }
        let expensive_sites: Vec<Vec<f64>> = dataset.expensive.iter().map(|p| p.x.clone()).collect();
        let cheap = KrigingModel::fit_covering(&dataset.cheap, &opts.kernel, &expensive_sites)?;
        let fe = DVector::from_vec(dataset.ys(Fidelity::Expensive));
        let g = cheap_at_expensive(dataset, &cheap)?;
        let xe = dataset.xs(Fidelity::Expensive);
        let nugget = opts.kernel.nugget;
        let diff_opts = FitOptions {
            theta_bounds: opts.diff_theta_bounds,
            ..opts.kernel.clone()
        };

        let tol = C_INTERPOLATION_TOL;
        let probes = variance_probes(&xe)?;
        let diff_ll = |rho: f64, params: &KernelParams| -> f64 {
            let r = kernels::correlation_matrix(params, &xe);
            if !admissible(params, &xe, &r, &probes) {
                return f64::NEG_INFINITY;
            }
            let Ok(f) = SpdFactor::new(r.clone(), nugget, "difference correlation") else {
                return f64::NEG_INFINITY;
            };
            let d = &fe - &g * rho;
            let conc = concentrated(&f, &d);
            if solve_residual(&r, &f, &d, conc.mu) > tol {
                return f64::NEG_INFINITY;
            }
            conc.log_likelihood
        };

        // Stage 1: every Θ_d grid candidate against every ρ grid value.
        let rho_grid = opts.rho_grid();
        let mut best_per_rho: Vec<(f64, Option<KernelParams>)> = vec![(f64::NEG_INFINITY, None); rho_grid.len()];
        let mut grid_points = 0;
        for params in candidate_params(dataset.dim, &diff_opts) {
            let r = kernels::correlation_matrix(&params, &xe);
            if !admissible(&params, &xe, &r, &probes) {
                continue;
            }
            let Ok(f) = SpdFactor::new(r.clone(), nugget, "difference correlation") else {
                continue;
            };
            let terms = ProfileTerms::new(&r, &f, &fe, &g);
            for (slot, &rho) in best_per_rho.iter_mut().zip(&rho_grid) {
                grid_points += 1;
                if terms.solve_residual(rho) > tol {
                    continue;
                }
                let ll = terms.log_likelihood(rho);
                if ll > slot.0 {
                    *slot = (ll, Some(params.clone()));
                }
            }
        }
        let grid_max = best_per_rho.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
        if !grid_max.is_finite() {
            return Err(Error::SearchExhausted(format!(
                "no finite difference-process likelihood on {} ρ values x Θ_d grid (N_e = {})",
                rho_grid.len(),
                xe.len()
            )));
        }

        // Stage 2: refine Θ_d at the most promising ρ cells.
        let refine = |rho: f64, start: &KernelParams| -> (f64, KernelParams) {
            refine_theta(start, &diff_opts, |p| diff_ll(rho, p))
        };
        let mut order: Vec<usize> = (0..rho_grid.len()).filter(|&i| best_per_rho[i].1.is_some()).collect();
        order.sort_by(|&a, &b| best_per_rho[b].0.total_cmp(&best_per_rho[a].0));
        let mut best: (f64, f64, KernelParams) = {
            let i = order[0];
            (best_per_rho[i].0, rho_grid[i], best_per_rho[i].1.clone().unwrap())
        };
        let mut fallbacks = Vec::new();
        for &i in order.iter().take(opts.refine_top.max(1)) {
            let start = best_per_rho[i].1.as_ref().unwrap();
            let (ll, params) = refine(rho_grid[i], start);
            fallbacks.push((ll, rho_grid[i], params.clone()));
            if ll > best.0 {
                best = (ll, rho_grid[i], params);
            }
        }

        // Stage 3: golden-section on ρ around the best cell, Θ_d re-optimized
        // from the incumbent at every probe.
        let (lo, hi) = (
            (best.1 - opts.rho_step).max(opts.rho_range.0),
            (best.1 + opts.rho_step).min(opts.rho_range.1),
        );
        let incumbent = best.2.clone();
        let mut golden_best = best.clone();
        golden_section_max(
            |rho| {
                let (ll, params) = refine(rho, &incumbent);
                if ll > golden_best.0 {
                    golden_best = (ll, rho, params);
                }
                ll
            },
            lo,
            hi,
            1e-6,
            60,
        );

        // The likelihood never sees C. Near-singular kernels (universal cubic
        // especially) can win it yet give a C that no longer interpolates, so
        // fall back through the refined cells until one does.
        fallbacks.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut last_residual = f64::NAN;
        for (ll, rho, diff_params) in std::iter::once(golden_best).chain(fallbacks) {
            let Ok(mut model) = Self::assemble(
                dataset.clone(),
                cheap.clone(),
                diff_params,
                rho,
                nugget,
                opts.variance_denominator,
            ) else {
                continue;
            };
            last_residual = model.interpolation_residual();
            if last_residual > C_INTERPOLATION_TOL {
                log::debug!("co-kriging candidate ρ = {rho} rejected: residual {last_residual:e}");
                continue;
            }
            model.search = Some(RhoSearch {
                log_likelihood: ll,
                grid_max,
                grid_points,
            });
            return Ok(model);
        }
        Err(Error::SearchExhausted(format!(
            "no (ρ, Θ_d) candidate gives an interpolating co-kriging system (last residual {last_residual:e}); \
             try the gaussian kernel"
        )))
    }

    /// Builds the augmented system for fixed (ρ, Θ_d) and a fitted cheap model.
    pub fn assemble(
        dataset: MultiFidelityDataset,
        cheap: KrigingModel,
        diff_params: KernelParams,
        rho: f64,
        nugget: f64,
        variance_denominator: VarianceDenominator,
    ) -> Result<Self> {
        check_dim(dataset.dim, diff_params.dim())?;
        let fe = DVector::from_vec(dataset.ys(Fidelity::Expensive));
        let g = cheap_at_expensive(&dataset, &cheap)?;
        let xe = dataset.xs(Fidelity::Expensive);
        let xc = dataset.xs(Fidelity::Cheap);
        let rd = kernels::correlation_matrix(&diff_params, &xe);
        let diff_factor = SpdFactor::new(rd.clone(), nugget, "difference correlation")?;
        let d = &fe - &g * rho;
        let conc = concentrated(&diff_factor, &d);

        let solver = AugmentedSolver::new(&cheap, &xc, &xe, &rd, rho, conc.sigma2)?;
        let n = xc.len() + xe.len();
        let f = DVector::from_iterator(n, dataset.cheap.iter().chain(&dataset.expensive).map(|p| p.y));
        let c_inv_ones = solver.solve(&DVector::from_element(n, 1.0));
        let ones_c_inv_ones = c_inv_ones.sum();
        let mu_hat = c_inv_ones.dot(&f) / ones_c_inv_ones;
        let alpha = solver.solve(&f.add_scalar(-mu_hat));
        Ok(Self {
            dataset,
            cheap,
            diff_params,
            sigma_d2: conc.sigma2,
            mu_d: conc.mu,
            rho,
            mu_hat,
            nugget,
            variance_denominator,
            solver,
            alpha,
            ones_c_inv_ones,
            search: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dataset.dim
    }

    pub fn dataset(&self) -> &MultiFidelityDataset {
        &self.dataset
    }

    pub fn cheap(&self) -> &KrigingModel {
        &self.cheap
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn mu_hat(&self) -> f64 {
        self.mu_hat
    }

    pub fn sigma_c2(&self) -> f64 {
        self.cheap.sigma2()
    }

    pub fn sigma_d2(&self) -> f64 {
        self.sigma_d2
    }

    pub fn mu_d(&self) -> f64 {
        self.mu_d
    }

    pub fn diff_params(&self) -> &KernelParams {
        &self.diff_params
    }

    pub fn search(&self) -> Option<&RhoSearch> {
        self.search.as_ref()
    }

    pub fn variance_denominator(&self) -> VarianceDenominator {
        self.variance_denominator
    }

    /// Concentrated likelihood of the difference data at arbitrary (ρ, Θ_d).
    pub fn difference_log_likelihood(&self, rho: f64, params: &KernelParams) -> Result<f64> {
        let fe = DVector::from_vec(self.dataset.ys(Fidelity::Expensive));
        let g = cheap_at_expensive(&self.dataset, &self.cheap)?;
        let r = kernels::correlation_matrix(params, &self.dataset.xs(Fidelity::Expensive));
        let f = SpdFactor::new(r, self.nugget, "difference correlation")?;
        Ok(concentrated(&f, &(&fe - &g * rho)).log_likelihood)
    }

    fn to_model_space(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        Ok(self.dataset.normalization.to_unit(x))
    }

    /// `c(u)` with its first and second derivatives in model space.
    fn c_jet(&self, u: &[f64]) -> (DVector<f64>, DMatrix<f64>, DMatrix<f64>) {
        let xc = self.dataset.xs(Fidelity::Cheap);
        let xe = self.dataset.xs(Fidelity::Expensive);
        let (nc, ne, m) = (xc.len(), xe.len(), self.dim());
        let sc2 = self.sigma_c2();
        let cheap_params = self.cheap.params();
        let (rc, drc, d2rc) = kernels::correlation_vector_jet(cheap_params, &xc, u);
        let (rce, drce, d2rce) = kernels::correlation_vector_jet(cheap_params, &xe, u);
        let (rd, drd, d2rd) = kernels::correlation_vector_jet(&self.diff_params, &xe, u);

        let a = self.rho * sc2;
        let b = self.rho * self.rho * sc2;
        let s = self.sigma_d2;
        let mut c = DVector::zeros(nc + ne);
        let mut dc = DMatrix::zeros(nc + ne, m);
        let mut d2c = DMatrix::zeros(nc + ne, m);
        for i in 0..nc {
            c[i] = a * rc[i];
            for j in 0..m {
                dc[(i, j)] = a * drc[(i, j)];
                d2c[(i, j)] = a * d2rc[(i, j)];
            }
        }
        for i in 0..ne {
            c[nc + i] = b * rce[i] + s * rd[i];
            for j in 0..m {
                dc[(nc + i, j)] = b * drce[(i, j)] + s * drd[(i, j)];
                d2c[(nc + i, j)] = b * d2rce[(i, j)] + s * d2rd[(i, j)];
            }
        }
        (c, dc, d2c)
    }

    fn c_vector(&self, u: &[f64]) -> DVector<f64> {
        let xc = self.dataset.xs(Fidelity::Cheap);
        let xe = self.dataset.xs(Fidelity::Expensive);
        let sc2 = self.sigma_c2();
        let rc = kernels::correlation_vector(self.cheap.params(), &xc, u) * (self.rho * sc2);
        let re = kernels::correlation_vector(self.cheap.params(), &xe, u) * (self.rho * self.rho * sc2)
            + kernels::correlation_vector(&self.diff_params, &xe, u) * self.sigma_d2;
        let mut c = DVector::zeros(xc.len() + xe.len());
        c.rows_mut(0, xc.len()).copy_from(&rc);
        c.rows_mut(xc.len(), xe.len()).copy_from(&re);
        c
    }

    /// Fused expensive-fidelity prediction `μ̂ + c(x)ᵀ C⁻¹ (f - 1μ̂)`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let u = self.to_model_space(x)?;
        Ok(self.mu_hat + self.c_vector(&u).dot(&self.alpha))
    }

    /// Mean squared error of the fused predictor, clamped at zero and exactly
    /// zero at expensive sample sites.
    pub fn variance(&self, x: &[f64]) -> Result<f64> {
        let u = self.to_model_space(x)?;
        if self
            .dataset
            .expensive
            .iter()
            .any(|p| euclidean(&p.x, &u) <= DUPLICATE_TOL)
        {
            return Ok(0.0);
        }
        let c = self.c_vector(&u);
        let c_inv_c = self.solver.solve(&c);
        let explained = c.dot(&c_inv_c);
        let gls = 1.0 - c_inv_c.sum();
        let denom = match self.variance_denominator {
            VarianceDenominator::AsPrinted => explained,
            VarianceDenominator::Ones => self.ones_c_inv_ones,
        }
        .max(f64::MIN_POSITIVE);
        let prior = self.rho * self.rho * self.sigma_c2() + self.sigma_d2;
        let s2 = prior - explained + gls * gls / denom;
        Ok(if s2.is_finite() { s2.max(0.0) } else { f64::MAX })
    }

    /// Gradient in raw units.
    pub fn predict_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        let u = self.to_model_space(x)?;
        let (_, dc, _) = self.c_jet(&u);
        let g = dc.transpose() * &self.alpha;
        Ok((0..self.dim())
            .map(|j| g[j] / self.dataset.normalization.scale(j))
            .collect())
    }

    /// Diagonal of the Hessian in raw units.
    pub fn predict_hess_diag(&self, x: &[f64]) -> Result<Vec<f64>> {
        let u = self.to_model_space(x)?;
        let (_, _, d2c) = self.c_jet(&u);
        let h = d2c.transpose() * &self.alpha;
        Ok((0..self.dim())
            .map(|j| h[j] / self.dataset.normalization.scale(j).powi(2))
            .collect())
    }

    /// Largest `|f̂(ξ_e) - f_e| / (1 + |f_e|)` over the expensive samples.
    pub fn interpolation_residual(&self) -> f64 {
        self.dataset
            .expensive
            .iter()
            .map(|p| {
                let raw = self.dataset.normalization.from_unit(&p.x);
                let pred = self.predict(&raw).expect("dimension checked at fit");
                (pred - p.y).abs() / (1.0 + p.y.abs())
            })
            .fold(0.0, f64::max)
    }

    /// Expensive sample sites in raw units.
    pub fn expensive_sites(&self) -> Vec<Vec<f64>> {
        self.dataset
            .expensive
            .iter()
            .map(|p| self.dataset.normalization.from_unit(&p.x))
            .collect()
    }
}

/// Nelder-Mead over the encoded Θ_d starting at `start`.
fn refine_theta<F>(start: &KernelParams, opts: &FitOptions, mut objective: F) -> (f64, KernelParams)
where
    F: FnMut(&KernelParams) -> f64,
{
    let m = start.dim();
    let free_shape = opts.fixed_shape.is_none() && start.family == kernels::KernelFamily::UniversalCubic;
    let (tl, tu) = opts.theta_bounds;
    let (sl, su) = opts.shape_bounds;
    let mut lower = vec![tl.log10(); m];
    let mut upper = vec![tu.log10(); m];
    let mut z0: Vec<f64> = start.theta.iter().map(|t| t.log10()).collect();
    if free_shape {
        lower.extend(std::iter::repeat(sl).take(2 * m));
        upper.extend(std::iter::repeat(su).take(2 * m));
        z0.extend(&start.rho_uc);
        z0.extend(&start.gamma_uc);
    }
    let bounds = Bounds::new(lower, upper);
    let decode = |z: &[f64]| {
        let mut p = start.clone();
        p.theta = z[..m].iter().map(|v| 10f64.powf(*v)).collect();
        if free_shape {
            p.rho_uc = z[m..2 * m].to_vec();
            p.gamma_uc = z[2 * m..].to_vec();
        }
        p
    };
    let start_ll = objective(start);
    let best = nelder_mead(|z| -objective(&decode(z)), &z0, 0.05, &bounds, opts.max_evals, 1e-9);
    if -best.value > start_ll {
        (-best.value, decode(&best.x))
    } else {
        (start_ll, start.clone())
    }
}
