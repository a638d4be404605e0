use std::path::PathBuf;

use anyhow::Result;
use serde::Serialize;

use mfuq::cokriging::CoKrigingOptions;
use mfuq::dataset::ColumnMap;
use mfuq::surrogate::{FittedModel, Surrogate, SurrogateKind};

use super::{dataset_bounds, load_dataset, resolve_columns, tensor_grid, ModelFile, Saved};
use crate::config::config_hash;
use crate::output::{num, Output};
use crate::Context;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Low-fidelity samples.
    #[arg(long)]
    cheap: PathBuf,
    /// High-fidelity samples.
    #[arg(long)]
    expensive: PathBuf,
    /// Input columns, comma separated [default: all but the output].
    #[arg(long, value_delimiter = ',')]
    inputs: Vec<String>,
    /// Output column [default: the last column].
    #[arg(long)]
    output: Option<String>,
    /// kriging or cokriging [default: cokriging].
    #[arg(long)]
    surrogate: Option<SurrogateKind>,
    /// gaussian, cubic or universal-cubic [default: gaussian].
    #[arg(long)]
    kernel: Option<String>,
    /// Prediction grid points per dimension [default: 101].
    #[arg(long)]
    grid: Option<usize>,
    /// Map kriging inputs onto the unit cube before fitting.
    #[arg(long)]
    normalize: bool,
}

#[derive(Serialize)]
struct Resolved<'a> {
    surrogate: SurrogateKind,
    normalize: bool,
    grid: usize,
    columns: &'a ColumnMap,
    options: &'a CoKrigingOptions,
}

pub fn run(ctx: &Context, a: Args) -> Result<()> {
    let cfg = &ctx.file;
    let columns = resolve_columns(&a.cheap, &a.inputs, a.output.as_deref())?;
    let surrogate = super::parse_opt(a.surrogate, cfg.cokriging.surrogate.as_deref(), "cokriging.surrogate")?.unwrap_or_default();
    let options = cfg.cokriging_options(a.kernel.as_deref(), ctx.seed)?;
    let resolved = Resolved {
        surrogate,
        normalize: a.normalize || cfg.cokriging.normalize.unwrap_or(false),
        grid: a.grid.or(cfg.cokriging.grid).unwrap_or(101),
        columns: &columns,
        options: &options,
    };
    let hash = config_hash("fit", &resolved, &[("cheap", &a.cheap), ("expensive", &a.expensive)])?;

    let ds = load_dataset(&a.cheap, &a.expensive, &columns)?;
    let model = FittedModel::fit(surrogate, &ds, &options, options.kernel.family, resolved.normalize)?;
    let (lower, upper) = dataset_bounds(&ds);
    let grid = tensor_grid(&lower, &upper, resolved.grid)?;

    let out = Output::create(&ctx.out, hash)?;
    let mut rows = Vec::with_capacity(grid.len());
    for x in &grid {
        let mut row: Vec<String> = x.iter().map(|&v| num(v)).collect();
        row.push(num(model.predict(x)?));
        row.push(num(model.variance(x)?));
        rows.push(row);
    }
    let mut header = columns.inputs.clone();
    header.extend(["mean".to_string(), "s2".to_string()]);
    out.csv("grid.csv", &header, rows)?;
    let path = out.model(&ModelFile {
        config_sha256: out.hash().to_string(),
        inputs: columns.inputs.clone(),
        output: columns.output.clone(),
        lower,
        upper,
        surrogate: Saved::Gp(model),
    })?;
    println!("wrote {} and {}", path.display(), out.path("grid.csv").display());
    Ok(())
}
