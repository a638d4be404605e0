use std::path::PathBuf;

use anyhow::{bail, Result};
use serde::Serialize;

use mfuq::benchmarks::{default_test_size, evaluate_batch, make_training_set, Case};
use mfuq::dataset::ColumnMap;
use mfuq::mfdnn::{grid_search, Candidate, MfdnnModel, Preset, SearchSpace, TrainConfig, TrainLog};

use super::{coordinate_names, dataset_bounds, load_dataset, parse_opt, resolve_columns, ModelFile, Saved};
use crate::config::{config_hash, TrainSection};
use crate::output::Output;
use crate::Context;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Train on a generated benchmark design.
    #[arg(long, conflicts_with_all = ["lf_csv", "hf_csv"])]
    benchmark: Option<Case>,
    #[arg(long, requires = "hf_csv")]
    lf_csv: Option<PathBuf>,
    #[arg(long, requires = "lf_csv")]
    hf_csv: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    inputs: Vec<String>,
    #[arg(long)]
    output: Option<String>,
    /// Published architecture [default: the benchmark's own].
    #[arg(long, conflicts_with = "grid_search")]
    preset: Option<Preset>,
    /// Exhaustive architecture search instead of a preset.
    #[arg(long)]
    grid_search: bool,
    /// Epochs for both stages, overriding the preset.
    #[arg(long)]
    epochs: Option<usize>,
    /// Cheap samples of the benchmark design.
    #[arg(long)]
    lf_count: Option<usize>,
    /// Expensive samples of the benchmark design.
    #[arg(long)]
    hf_count: Option<usize>,
}

#[derive(Clone, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Plan {
    Preset {
        preset: Preset,
        lf: TrainConfig,
        corr: TrainConfig,
    },
    Search {
        space: SearchSpace,
        seed: u64,
    },
}

/// Preset configurations with the epoch and λ overrides applied; the
/// correction stage is seeded one past the LF stage.
pub fn preset_plan(preset: Preset, epochs: Option<usize>, t: &TrainSection, seed: u64) -> Plan {
    let (mut lf, mut corr) = preset.configs();
    if let Some(e) = epochs.or(t.epochs) {
        lf.epochs = e;
        corr.epochs = e;
    }
    if let Some(l) = t.lambda {
        corr.lambda = l;
    }
    Plan::Preset {
        preset,
        lf: lf.with_seed(seed),
        corr: corr.with_seed(seed.wrapping_add(1)),
    }
}

#[derive(Serialize)]
struct Resolved<'a> {
    source: String,
    columns: &'a ColumnMap,
    counts: Option<(usize, usize)>,
    plan: &'a Plan,
}

#[derive(Serialize)]
struct StageSummary {
    hidden: Vec<usize>,
    epochs: usize,
    learning_rate: f64,
    seed: u64,
    initial_loss: f64,
    final_loss: f64,
}

impl StageSummary {
    fn new(hidden: Vec<usize>, log: &TrainLog) -> Self {
        Self {
            hidden,
            epochs: log.epochs,
            learning_rate: log.learning_rate,
            seed: log.seed,
            initial_loss: log.initial_loss,
            final_loss: log.final_loss,
        }
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    config_sha256: &'a str,
    source: &'a str,
    n_lf: usize,
    n_hf: usize,
    plan: &'a Plan,
    lf: StageSummary,
    correction: StageSummary,
    regularization_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    search: Option<SearchSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    test: Option<TestSummary>,
}

#[derive(Serialize)]
struct SearchSummary {
    lf_evaluated: Vec<Candidate>,
    corr_evaluated: Vec<Candidate>,
}

#[derive(Serialize)]
struct TestSummary {
    n_test: usize,
    mse: f64,
    r2: f64,
}

pub fn run(ctx: &Context, a: Args) -> Result<()> {
    let t = &ctx.file.train;
    let mut inputs = Vec::new();
    let (source, ds, columns, counts) = match (a.benchmark, &a.lf_csv, &a.hf_csv) {
        (Some(case), _, _) => {
            let (lf, hf) = case.default_counts();
            let counts = (a.lf_count.or(t.lf_count).unwrap_or(lf), a.hf_count.or(t.hf_count).unwrap_or(hf));
            let ds = make_training_set(case, counts.0, counts.1, ctx.seed)?;
            (case.to_string(), ds, ColumnMap::new(coordinate_names(case.dim()), "y"), Some(counts))
        }
        (None, Some(l), Some(h)) => {
            inputs.push(("lf", l.as_path()));
            inputs.push(("hf", h.as_path()));
            let columns = resolve_columns(l, &a.inputs, a.output.as_deref())?;
            ("csv".to_string(), load_dataset(l, h, &columns)?, columns, None)
        }
        _ => bail!("pass --benchmark CASE or --lf-csv FILE --hf-csv FILE"),
    };

    let preset = parse_opt(a.preset, t.preset.as_deref(), "train.preset")?.or(a.benchmark.map(Preset::from));
    let plan = if a.grid_search {
        let d = SearchSpace::default();
        Plan::Search {
            space: SearchSpace {
                layers: t.layers.clone().unwrap_or(d.layers),
                widths: t.widths.clone().unwrap_or(d.widths),
                learning_rates: t.learning_rates.clone().unwrap_or(d.learning_rates),
                epochs: a.epochs.or(t.search_epochs).unwrap_or(d.epochs),
                lambda: t.lambda.unwrap_or(d.lambda),
            },
            seed: ctx.seed,
        }
    } else {
        match preset {
            Some(p) => preset_plan(p, a.epochs, t, ctx.seed),
            None => bail!("CSV training needs --preset NAME or --grid-search"),
        }
    };
    let resolved = Resolved {
        source: source.clone(),
        columns: &columns,
        counts,
        plan: &plan,
    };
    let hash = config_hash("train", &resolved, &inputs)?;
    let out = Output::create(&ctx.out, hash)?;

    let (model, search) = match &plan {
        Plan::Preset { lf, corr, .. } => (MfdnnModel::fit(&ds.cheap, &ds.expensive, lf, corr)?, None),
        Plan::Search { space, seed } => {
            let r = grid_search(&ds.cheap, &ds.expensive, space, *seed)?;
            let s = SearchSummary {
                lf_evaluated: r.lf_evaluated,
                corr_evaluated: r.corr_evaluated,
            };
            (r.model, Some(s))
        }
    };
    let test = match a.benchmark {
        Some(case) => {
            let n = default_test_size(case);
            let e = evaluate_batch(case, |xs| model.predict_hf_batch(xs), n, ctx.seed)?;
            Some(TestSummary {
                n_test: n,
                mse: e.mse,
                r2: e.r2,
            })
        }
        None => None,
    };
    let summary = Summary {
        config_sha256: out.hash(),
        source: &source,
        n_lf: ds.cheap.len(),
        n_hf: ds.expensive.len(),
        plan: &plan,
        lf: StageSummary::new(model.lf.net.hidden_widths(), &model.lf.log),
        correction: StageSummary::new(model.corr_net.hidden_widths(), &model.corr_log),
        regularization_loss: model.regularization_loss(),
        search,
        test,
    };
    out.json("summary.json", &summary)?;
    if let Some(t) = &summary.test {
        println!("{source}: test MSE {:e}, R² {:.6} on {} points", t.mse, t.r2, t.n_test);
    }
    let (lower, upper) = dataset_bounds(&ds);
    let path = out.model(&ModelFile {
        config_sha256: out.hash().to_string(),
        inputs: columns.inputs.clone(),
        output: columns.output.clone(),
        lower,
        upper,
        surrogate: Saved::Mfdnn(model),
    })?;
    println!("wrote {} and {}", path.display(), out.path("summary.json").display());
    Ok(())
}
