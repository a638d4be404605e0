use anyhow::{bail, Result};
use serde::Serialize;

use mfuq::benchmarks::{default_test_size, evaluate_batch, make_cokriging_set, make_training_set, Case, Evaluation};
use mfuq::cokriging::CoKrigingOptions;
use mfuq::mfdnn::MfdnnModel;
use mfuq::surrogate::{FittedModel, Surrogate, SurrogateKind};

use super::train::{preset_plan, Plan};
use crate::config::config_hash;
use crate::output::{num, Output};
use crate::Context;

/// Gaussian-process fits above this many samples are refused: the
/// covariance factorizations grow cubically.
pub const MAX_GP_POINTS: usize = 3000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Cokriging,
    Kriging,
    Mfdnn,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Cokriging => "cokriging",
            ModelKind::Kriging => "kriging",
            ModelKind::Mfdnn => "mfdnn",
        })
    }
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// lin1d, nonlin1d, dim32 or dim100.
    #[arg(long)]
    case: Case,
    #[arg(long, value_enum, default_value_t = ModelKind::Cokriging)]
    model: ModelKind,
    /// Cheap samples [default: the case's design size].
    #[arg(long)]
    lf_count: Option<usize>,
    /// Expensive samples [default: the case's design size].
    #[arg(long)]
    hf_count: Option<usize>,
    /// Test points [default: 1000-point grid in 1-D, 10,000 LHS points otherwise].
    #[arg(long)]
    n_test: Option<usize>,
    /// Kernel family of the Gaussian-process models.
    #[arg(long)]
    kernel: Option<String>,
}

#[derive(Serialize)]
#[serde(untagged)]
enum Fit {
    Gp(CoKrigingOptions),
    Net(Plan),
}

#[derive(Serialize)]
struct Resolved {
    case: Case,
    model: ModelKind,
    n_lf: usize,
    n_hf: usize,
    n_test: usize,
    seed: u64,
    fit: Fit,
}

pub fn run(ctx: &Context, a: Args) -> Result<()> {
    let case = a.case;
    let (lf0, hf0) = case.default_counts();
    let n_lf = a.lf_count.or(ctx.file.train.lf_count).unwrap_or(lf0);
    let n_hf = a.hf_count.or(ctx.file.train.hf_count).unwrap_or(hf0);
    let n_test = a.n_test.unwrap_or_else(|| default_test_size(case));
    let fit = match a.model {
        ModelKind::Mfdnn => Fit::Net(preset_plan(case.into(), None, &ctx.file.train, ctx.seed)),
        _ => {
            let total = if a.model == ModelKind::Kriging { n_hf } else { n_lf + n_hf };
            if total > MAX_GP_POINTS {
                bail!(
                    "{} on {case} with {total} samples exceeds the {MAX_GP_POINTS}-sample limit; pass smaller --lf-count/--hf-count",
                    a.model
                );
            }
            Fit::Gp(ctx.file.cokriging_options(a.kernel.as_deref(), ctx.seed)?)
        }
    };
    let resolved = Resolved {
        case,
        model: a.model,
        n_lf,
        n_hf,
        n_test,
        seed: ctx.seed,
        fit,
    };
    let hash = config_hash("benchmark", &resolved, &[])?;
    let out = Output::create(&ctx.out, hash)?;

    let eval = match &resolved.fit {
        Fit::Gp(opts) => {
            let kind = if a.model == ModelKind::Kriging {
                SurrogateKind::Kriging
            } else {
                SurrogateKind::CoKriging
            };
            let ds = make_cokriging_set(case, n_lf, n_hf, ctx.seed)?;
            let normalize = kind == SurrogateKind::Kriging && ctx.file.cokriging.normalize.unwrap_or(false);
            let model = FittedModel::fit(kind, &ds, opts, opts.kernel.family, normalize)?;
            evaluate_batch(case, |xs| Ok(xs.iter().map(|x| model.predict(x)).collect::<mfuq::Result<_>>()?), n_test, ctx.seed)?
        }
        Fit::Net(Plan::Preset { lf, corr, .. }) => {
            let ds = make_training_set(case, n_lf, n_hf, ctx.seed)?;
            let model = MfdnnModel::fit(&ds.cheap, &ds.expensive, lf, corr)?;
            evaluate_batch(case, |xs| model.predict_hf_batch(xs), n_test, ctx.seed)?
        }
        Fit::Net(Plan::Search { .. }) => unreachable!("benchmarks use presets"),
    };
    write_results(&out, &resolved, &eval)?;
    Ok(())
}

fn write_results(out: &Output, r: &Resolved, e: &Evaluation) -> Result<()> {
    let header: Vec<String> = ["case", "model", "seed", "n_lf", "n_hf", "n_test", "mse", "r2"]
        .map(String::from)
        .to_vec();
    let row = vec![
        r.case.to_string(),
        r.model.to_string(),
        r.seed.to_string(),
        r.n_lf.to_string(),
        r.n_hf.to_string(),
        r.n_test.to_string(),
        num(e.mse),
        num(e.r2),
    ];
    out.csv("results.csv", &header, [row])?;
    if !r.case.is_1d() {
        let rows = e.predictions.iter().zip(&e.truth).map(|(&p, &t)| vec![num(p), num(t)]);
        out.csv("scatter.csv", &["prediction".into(), "truth".into()], rows)?;
    }
    println!("{:<10} {:<10} {:>7} {:>6} {:>14} {:>10}", "case", "model", "n_lf", "n_hf", "MSE", "R²");
    println!(
        "{:<10} {:<10} {:>7} {:>6} {:>14.6e} {:>10.6}",
        r.case.to_string(),
        r.model.to_string(),
        r.n_lf,
        r.n_hf,
        e.mse,
        e.r2
    );
    Ok(())
}
