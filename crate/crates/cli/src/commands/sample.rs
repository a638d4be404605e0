use std::path::PathBuf;

use anyhow::{bail, Result};
use serde::Serialize;

use mfuq::adaptive::{CriterionGrid, CriterionId, CriterionSpec, InfillConfig, InfillState};
use mfuq::benchmarks::{make_cokriging_set, Case, InputLaw};
use mfuq::dataset::ColumnMap;
use mfuq::surrogate::SurrogateKind;

use super::{box_law, coordinate_names, dataset_bounds, load_dataset, override_law, parse_opt, resolve_columns, ModelFile, Saved};
use crate::config::config_hash;
use crate::output::{num, Output};
use crate::Context;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// 1, 2, 3, 4, 5a or 5b [default: 1].
    #[arg(long)]
    criterion: Option<CriterionId>,
    /// Infill steps [default: 10].
    #[arg(long)]
    iterations: Option<usize>,
    /// Candidate points per axis (inputs of up to 2 dimensions) [default: 101].
    #[arg(long)]
    grid: Option<usize>,
    /// Rank candidates without evaluating anything; needed for CSV data.
    #[arg(long)]
    suggest_only: bool,
    /// Start from a benchmark case, whose expensive function is the oracle.
    #[arg(long, conflicts_with_all = ["cheap", "expensive"])]
    benchmark: Option<Case>,
    #[arg(long, requires = "expensive")]
    cheap: Option<PathBuf>,
    #[arg(long, requires = "cheap")]
    expensive: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    inputs: Vec<String>,
    #[arg(long)]
    output: Option<String>,
    /// kriging or cokriging [default: cokriging].
    #[arg(long)]
    surrogate: Option<SurrogateKind>,
    /// gaussian, cubic or universal-cubic (C5 always uses universal-cubic).
    #[arg(long)]
    kernel: Option<String>,
    /// Input law weighting the criterion [default: uniform].
    #[arg(long)]
    dist: Option<InputLaw>,
    /// Ranked suggestions written with --suggest-only [default: 10].
    #[arg(long)]
    top: Option<usize>,
    /// Also write every criterion grid to criterion.csv.
    #[arg(long)]
    dump_grid: bool,
}

#[derive(Serialize)]
struct Resolved<'a> {
    source: String,
    columns: &'a ColumnMap,
    spec: &'a CriterionSpec,
    infill: &'a InfillConfig,
    suggest_only: bool,
    top: usize,
    dump_grid: bool,
}

pub fn run(ctx: &Context, a: Args) -> Result<()> {
    let cfg = &ctx.file;
    let s = &cfg.sample;
    let criterion = parse_opt(a.criterion, s.criterion.as_deref(), "sample.criterion")?.unwrap_or(CriterionId::C1);
    let law = parse_opt(a.dist, s.dist.as_deref(), "sample.dist")?.unwrap_or(InputLaw::Uniform);

    let mut inputs = Vec::new();
    let (source, ds, columns) = match (a.benchmark, &a.cheap, &a.expensive) {
        (Some(case), _, _) => {
            let (lf, hf) = case.default_counts();
            let ds = make_cokriging_set(case, lf, hf, ctx.seed)?;
            (case.to_string(), ds, ColumnMap::new(coordinate_names(case.dim()), "y"))
        }
        (None, Some(c), Some(e)) => {
            inputs.push(("cheap", c.as_path()));
            inputs.push(("expensive", e.as_path()));
            let columns = resolve_columns(c, &a.inputs, a.output.as_deref())?;
            ("csv".to_string(), load_dataset(c, e, &columns)?, columns)
        }
        _ => bail!("pass --benchmark CASE or --cheap FILE --expensive FILE"),
    };
    let (lower, upper) = match a.benchmark {
        Some(case) => {
            let (lo, hi) = case.bounds();
            (vec![lo; case.dim()], vec![hi; case.dim()])
        }
        None => dataset_bounds(&ds),
    };
    let mut spec = CriterionSpec::new(criterion, override_law(box_law(law, &lower, &upper), &s.law())?);
    spec.seed = ctx.seed;
    if let Some(r) = a.grid.or(s.grid) {
        spec.resolution = r;
    }
    if let Some(n) = s.lhs_candidates {
        spec.lhs_candidates = n;
    }
    let infill = InfillConfig {
        surrogate: parse_opt(a.surrogate, cfg.cokriging.surrogate.as_deref(), "cokriging.surrogate")?.unwrap_or_default(),
        options: cfg.cokriging_options(a.kernel.as_deref(), ctx.seed)?,
        normalize_inputs: cfg.cokriging.normalize.unwrap_or(false),
        max_iterations: a.iterations.or(s.iterations).unwrap_or(10),
        ..InfillConfig::default()
    };
    let resolved = Resolved {
        source,
        columns: &columns,
        spec: &spec,
        infill: &infill,
        suggest_only: a.suggest_only,
        top: a.top.or(s.top).unwrap_or(10),
        dump_grid: a.dump_grid,
    };
    let hash = config_hash("sample", &resolved, &inputs)?;
    let out = Output::create(&ctx.out, hash)?;

    let mut state = InfillState::new(&spec, ds, &infill)?;
    let x_names = columns.inputs.clone();
    let mut grids: Vec<(usize, CriterionGrid)> = Vec::new();

    if a.suggest_only {
        let grid = state.suggest(&spec)?;
        let mut header = vec!["rank".to_string()];
        header.extend(x_names.iter().cloned());
        header.push("criterion".into());
        let rows = grid.ranked().into_iter().take(resolved.top).enumerate().map(|(i, (x, v))| {
            let mut row = vec![(i + 1).to_string()];
            row.extend(x.iter().map(|&c| num(c)));
            row.push(num(v));
            row
        });
        let path = out.csv("suggestions.csv", &header, rows)?;
        println!("wrote {}", path.display());
        grids.push((0, grid));
    } else {
        let Some(case) = a.benchmark else {
            bail!("CSV data has no oracle to evaluate new points; pass --suggest-only");
        };
        let steps = state.run(&spec, &infill, |x| case.eval_hf(x))?;
        let mut header = vec!["iteration".to_string()];
        header.extend(x_names.iter().cloned());
        header.extend(["y".to_string(), "criterion_max".to_string()]);
        let rows: Vec<Vec<String>> = steps
            .iter()
            .map(|r| {
                let mut row = vec![r.iteration.to_string()];
                row.extend(r.chosen_point.iter().map(|&c| num(c)));
                row.push(num(r.chosen_value));
                row.push(num(r.criterion_max));
                row
            })
            .collect();
        let path = out.csv("trace.csv", &header, rows)?;
        println!("wrote {} ({} infill points)", path.display(), steps.len());
        grids.extend(steps.into_iter().map(|r| (r.iteration, r.criterion_values)));
    }

    if a.dump_grid {
        let mut header = vec!["iteration".to_string()];
        header.extend(x_names.iter().cloned());
        header.push("criterion".into());
        let rows = grids.iter().flat_map(|(it, g)| {
            g.points.iter().zip(&g.values).map(move |(x, &v)| {
                let mut row = vec![it.to_string()];
                row.extend(x.iter().map(|&c| num(c)));
                row.push(num(v));
                row
            })
        });
        out.csv("criterion.csv", &header, rows)?;
    }

    let (lower, upper) = dataset_bounds(&state.dataset);
    out.model(&ModelFile {
        config_sha256: out.hash().to_string(),
        inputs: columns.inputs.clone(),
        output: columns.output.clone(),
        lower,
        upper,
        surrogate: Saved::Gp(state.models.primary),
    })?;
    Ok(())
}
