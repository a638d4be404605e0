use std::path::PathBuf;

use anyhow::{bail, Result};
use serde::Serialize;

use mfuq::benchmarks::{Case, InputLaw};
use mfuq::dataset::DistributionSpec;
use mfuq::uq::{propagate, DEFAULT_BINS};

use super::{box_law, override_law, parse_opt, ModelFile};
use crate::config::config_hash;
use crate::output::{num, Output};
use crate::Context;

pub const DEFAULT_SAMPLES: usize = 1_000_000;

#[derive(Debug, clap::Args)]
#[command(group = clap::ArgGroup::new("source").required(true).multiple(true).args(["model", "benchmark"]))]
pub struct Args {
    /// Propagate through a saved model.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Propagate through the case's analytic expensive function, or, with
    /// --model, take the case's input law for the model.
    #[arg(long)]
    benchmark: Option<Case>,
    /// uniform or gaussian [default: uniform].
    #[arg(long)]
    dist: Option<InputLaw>,
    /// Monte Carlo samples [default: 1,000,000].
    #[arg(long)]
    n: Option<usize>,
    /// Histogram bins [default: 50].
    #[arg(long)]
    bins: Option<usize>,
}

#[derive(Serialize)]
struct Resolved<'a> {
    source: &'a str,
    case: Option<Case>,
    distribution: &'a DistributionSpec,
    n: usize,
    bins: usize,
    seed: u64,
}

#[derive(Serialize)]
struct Summary<'a> {
    config_sha256: &'a str,
    source: &'a str,
    distribution: &'a DistributionSpec,
    n_samples: usize,
    bins: usize,
    mean: f64,
    variance: f64,
    skewness: f64,
    mode: f64,
    seed: u64,
}

pub fn run(ctx: &Context, a: Args) -> Result<()> {
    let u = &ctx.file.uq;
    let law = parse_opt(a.dist, u.dist.as_deref(), "uq.dist")?.unwrap_or(InputLaw::Uniform);
    let model = a.model.as_deref().map(ModelFile::load).transpose()?;
    let base = match (a.benchmark, &model) {
        (Some(case), Some(m)) if m.surrogate.dim() != case.dim() => {
            bail!("model is {}-d but {case} is {}-d", m.surrogate.dim(), case.dim())
        }
        (Some(case), _) => case.uq_distribution(law),
        (None, Some(m)) => box_law(law, &m.lower, &m.upper),
        (None, None) => unreachable!("clap requires a source"),
    };
    let distribution = override_law(base, &u.law())?;
    let source = if model.is_some() { "model" } else { "analytic" };
    let resolved = Resolved {
        source,
        case: a.benchmark,
        distribution: &distribution,
        n: a.n.or(u.n).unwrap_or(DEFAULT_SAMPLES),
        bins: a.bins.or(u.bins).unwrap_or(DEFAULT_BINS),
        seed: ctx.seed,
    };
    let inputs: Vec<(&str, &std::path::Path)> = a.model.iter().map(|p| ("model", p.as_path())).collect();
    let hash = config_hash("uq", &resolved, &inputs)?;
    let out = Output::create(&ctx.out, hash)?;

    let summary = match (&model, a.benchmark) {
        (Some(m), _) => propagate(|xs| Ok(m.surrogate.predict_batch(xs).map_err(to_core)?), &distribution, resolved.n, resolved.bins, ctx.seed)?,
        (None, Some(case)) => propagate(|xs| xs.iter().map(|x| case.eval_hf(x)).collect(), &distribution, resolved.n, resolved.bins, ctx.seed)?,
        (None, None) => unreachable!(),
    };
    let h = &summary.histogram;
    let rows = (0..h.bins()).map(|i| vec![num(h.edges[i]), num(h.edges[i + 1]), h.counts[i].to_string(), num(h.density[i])]);
    out.csv("hist.csv", &["lower".into(), "upper".into(), "count".into(), "density".into()], rows)?;
    out.json(
        "summary.json",
        &Summary {
            config_sha256: out.hash(),
            source,
            distribution: &distribution,
            n_samples: summary.n_samples,
            bins: h.bins(),
            mean: summary.mean,
            variance: summary.variance,
            skewness: summary.skewness,
            mode: h.mode(),
            seed: ctx.seed,
        },
    )?;
    println!(
        "mean {:.6e}  variance {:.6e}  skewness {:.4}  mode {:.6e}  ({} samples)",
        summary.mean,
        summary.variance,
        summary.skewness,
        h.mode(),
        summary.n_samples
    );
    Ok(())
}

fn to_core(e: anyhow::Error) -> mfuq::Error {
    match e.downcast::<mfuq::Error>() {
        Ok(core) => core,
        Err(other) => mfuq::Error::InvalidArgument(format!("{other:#}")),
    }
}
