use std::path::PathBuf;

use anyhow::{bail, Result};
use serde::Serialize;

use mfuq::dataset::read_inputs;
use mfuq::surrogate::Surrogate;

use super::{tensor_grid, ModelFile, Saved};
use crate::config::config_hash;
use crate::output::{num, Output};
use crate::Context;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// A model.json written by fit, sample or train.
    #[arg(long)]
    model: PathBuf,
    /// CSV of prediction sites, with the model's input columns.
    #[arg(long, conflicts_with = "grid")]
    points: Option<PathBuf>,
    /// Points per dimension of a grid over the training range.
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Serialize)]
struct Resolved {
    grid: Option<usize>,
}

pub fn run(ctx: &Context, a: Args) -> Result<()> {
    let file = ModelFile::load(&a.model)?;
    let mut inputs = vec![("model", a.model.as_path())];
    let xs = match (&a.points, a.grid) {
        (Some(p), _) => {
            inputs.push(("points", p.as_path()));
            read_inputs(p, &file.inputs)?
        }
        (None, Some(n)) => tensor_grid(&file.lower, &file.upper, n)?,
        (None, None) => bail!("pass --points FILE or --grid N"),
    };
    let hash = config_hash("predict", &Resolved { grid: a.grid }, &inputs)?;
    let out = Output::create(&ctx.out, hash)?;

    let mean = file.surrogate.predict_batch(&xs)?;
    let mut header = file.inputs.clone();
    header.push("mean".into());
    let extra: Vec<f64> = match &file.surrogate {
        Saved::Gp(m) => {
            header.push("s2".into());
            xs.iter().map(|x| m.variance(x)).collect::<mfuq::Result<_>>()?
        }
        Saved::Mfdnn(m) => {
            header.push("lf".into());
            xs.iter().map(|x| m.predict_lf(x)).collect::<mfuq::Result<_>>()?
        }
    };
    let rows = xs.iter().zip(mean.iter().zip(&extra)).map(|(x, (&m, &e))| {
        let mut row: Vec<String> = x.iter().map(|&v| num(v)).collect();
        row.push(num(m));
        row.push(num(e));
        row
    });
    let path = out.csv("predictions.csv", &header, rows)?;
    println!("wrote {} ({} points)", path.display(), xs.len());
    Ok(())
}
