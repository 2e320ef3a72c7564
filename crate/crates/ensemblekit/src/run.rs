//! The experiment runner: train every planned experiment on one split,
//! evaluate on the held-out side and write the report files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ensemblekit_core::data::stratified_split;
use ensemblekit_core::ensembles::{
    build_voting_stack, stratified_folds, train_ensemble, train_meta_stack, EnsembleSpec, TrainedEnsemble, TrainingLog,
};
use ensemblekit_core::metrics::{
    compute_metrics, confusion, render_report, Averaging, ConfusionMatrix, MetricsReport, ReportRow,
};
use ensemblekit_core::{Classify, FeatureMatrix};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{
    grid_cell_spec, DataPlan, DataSource, ExperimentConfig, Plan, PlannedExperiment, PlannedGrid, PlannedKind,
    StackCombiner, Validation,
};
use crate::corpus::{load_corpus, Corpus};
use crate::dataset::{prepare, Dataset};
use crate::error::{Error, Result};
use crate::files::{slug, to_json, write_file};
use crate::grid::{grid_search, GridOutcome};
use crate::persist::{model_to_json, ModelBundle, SavedModel};
use crate::synthetic::synthetic_corpus;

pub const RUN_FORMAT: &str = "ensemblekit-run";
pub const RUN_VERSION: u32 = 1;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the configured master seed.
    pub seed: Option<u64>,
    /// Overrides the configured output directory.
    pub out: Option<PathBuf>,
    /// Worker threads; all cores when `None`.
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub name: String,
    pub group: String,
    pub members: Vec<String>,
    pub predictions: Vec<usize>,
    pub confusion: ConfusionMatrix,
    pub report: MetricsReport,
    pub model: SavedModel,
    pub log: TrainingLog,
}

#[derive(Debug, Clone)]
pub struct RunResults {
    pub plan: Plan,
    pub dataset: Dataset,
    pub experiments: Vec<ExperimentResult>,
}

impl RunResults {
    pub fn get(&self, name: &str) -> Option<&ExperimentResult> {
        self.experiments.iter().find(|e| e.name == name)
    }

    pub fn report_rows(&self) -> Vec<ReportRow> {
        self.experiments
            .iter()
            .map(|e| ReportRow {
                group: e.group.clone(),
                name: e.name.clone(),
                report: e.report.clone(),
            })
            .collect()
    }
}

/// Runs `f` on a dedicated pool of `jobs` threads.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(vec![crate::error::ConfigIssue::new("--jobs", e)]))?;
    Ok(pool.install(f))
}

pub fn load_data(data: &DataPlan) -> Result<Corpus> {
    match &data.source {
        DataSource::Corpus(dir) => load_corpus(dir, &data.options),
        DataSource::Synthetic(spec) => {
            let specs = spec.family_specs(data.synthetic_seed)?;
            synthetic_corpus(&specs, data.synthetic_seed, &data.options)
        }
    }
}

pub fn prepare_data(data: &DataPlan) -> Result<Dataset> {
    let corpus = load_data(data)?;
    prepare(
        &corpus,
        data.test_fraction,
        data.split_seed,
        data.representation,
        data.vocab_cap,
    )
}

fn predict<C: Classify + Sync>(model: &C, v: &FeatureMatrix) -> ensemblekit_core::Result<Vec<usize>> {
    (0..v.len()).map(|i| model.classify(v.instance(i))).collect()
}

/// Distinct specs that are trained once on the full training split and
/// shared by every experiment and vote that uses them.
fn shared_specs(experiments: &[PlannedExperiment]) -> Vec<(EnsembleSpec, String)> {
    let mut out: Vec<(EnsembleSpec, String)> = Vec::new();
    let mut add = |spec: &EnsembleSpec, owner: &str| {
        if !out.iter().any(|(s, _)| s == spec) {
            out.push((spec.clone(), owner.to_string()));
        }
    };
    for e in experiments {
        match &e.kind {
            PlannedKind::Single(spec) => add(spec, &e.name),
            PlannedKind::Stack {
                members,
                combiner: StackCombiner::Vote,
                ..
            } => members.iter().for_each(|(_, s)| add(s, &e.name)),
            PlannedKind::Stack { .. } => {}
        }
    }
    out
}

fn prefixed(member: &str, log: &TrainingLog, into: &mut TrainingLog) {
    for c in &log.curves {
        let mut c = c.clone();
        c.name = format!("{member}.{}", c.name);
        into.curves.push(c);
    }
    into.warnings
        .extend(log.warnings.iter().map(|w| format!("{member}: {w}")));
}

/// Trains and evaluates every experiment of `plan` on `data`, using the
/// current rayon pool. Results are in config order whatever the pool size.
pub fn execute_on(plan: &Plan, data: &Dataset) -> Result<Vec<ExperimentResult>> {
    let k = data.n_classes();
    let (v, labels) = (&data.train, &data.train_labels);
    let shared = shared_specs(&plan.experiments);
    let trained: Vec<(TrainedEnsemble, TrainingLog)> = shared
        .par_iter()
        .map(|(spec, owner)| train_ensemble(spec, v, labels, k).map_err(Error::experiment(owner)))
        .collect::<Result<_>>()?;
    let lookup = |spec: &EnsembleSpec| {
        let i = shared
            .iter()
            .position(|(s, _)| s == spec)
            .expect("every vote member is pre-trained");
        &trained[i]
    };

    plan.experiments
        .par_iter()
        .map(|e| {
            let wrap = Error::experiment(&e.name);
            let (model, log, members) = match &e.kind {
                PlannedKind::Single(spec) => {
                    let (m, log) = lookup(spec);
                    (SavedModel::Ensemble(m.clone()), log.clone(), Vec::new())
                }
                PlannedKind::Stack {
                    members,
                    combiner,
                    tie_seed,
                } => {
                    let names: Vec<String> = members.iter().map(|(n, _)| n.clone()).collect();
                    let mut log = TrainingLog::default();
                    let model = match combiner {
                        StackCombiner::Vote => {
                            let mut models = Vec::new();
                            for (name, spec) in members {
                                let (m, l) = lookup(spec);
                                prefixed(name, l, &mut log);
                                models.push(m.clone());
                            }
                            SavedModel::Voting(
                                build_voting_stack(models, *tie_seed).map_err(Error::experiment(&e.name))?,
                            )
                        }
                        StackCombiner::Meta { params, folds } => {
                            let stack = train_meta_stack(v, labels, k, members.len(), *folds, params, |j, view, l| {
                                train_ensemble(&members[j].1, view, l, k).map(|(m, _)| m)
                            })
                            .map_err(Error::experiment(&e.name))?;
                            SavedModel::Meta(stack)
                        }
                    };
                    (model, log, names)
                }
            };
            let predictions = predict(&model, &data.test).map_err(Error::experiment(&e.name))?;
            let cm = confusion(&data.test_labels, &predictions, k)
                .and_then(|c| c.with_names(data.class_names.clone()))
                .map_err(Error::experiment(&e.name))?;
            let report = compute_metrics(&cm, e.averaging).map_err(wrap)?;
            Ok(ExperimentResult {
                name: e.name.clone(),
                group: e.group.clone(),
                members,
                predictions,
                confusion: cm,
                report,
                model,
                log,
            })
        })
        .collect()
}

/// Loads the data and runs every experiment on the current rayon pool.
pub fn execute(plan: &Plan) -> Result<RunResults> {
    let dataset = prepare_data(&plan.data)?;
    let experiments = execute_on(plan, &dataset)?;
    Ok(RunResults {
        plan: plan.clone(),
        dataset,
        experiments,
    })
}

#[derive(Serialize)]
struct FamilySummary<'a> {
    name: &'a str,
    train: usize,
    test: usize,
    discarded: usize,
}

#[derive(Serialize)]
struct DataSummary<'a> {
    source: &'a str,
    synthetic_seed: Option<u64>,
    split_seed: u64,
    test_fraction: f64,
    representation: ensemblekit_core::Representation,
    vocabulary_size: usize,
    feature_dim: usize,
    families: Vec<FamilySummary<'a>>,
}

#[derive(Serialize)]
struct ExperimentSummary<'a> {
    name: &'a str,
    group: &'a str,
    kind: &'static str,
    averaging: &'static str,
    members: &'a [String],
    confusion: String,
    model: Option<String>,
    curves: String,
    warnings: &'a [String],
}

#[derive(Serialize)]
struct RunManifest<'a> {
    format: &'static str,
    version: u32,
    seed: u64,
    data: DataSummary<'a>,
    experiments: Vec<ExperimentSummary<'a>>,
    files: Vec<String>,
}

fn data_summary<'a>(plan: &'a Plan, data: &'a Dataset) -> DataSummary<'a> {
    let count = |labels: &[usize], f: usize| labels.iter().filter(|&&l| l == f).count();
    DataSummary {
        source: &plan.data.description,
        synthetic_seed: matches!(plan.data.source, DataSource::Synthetic(_)).then_some(plan.data.synthetic_seed),
        split_seed: plan.data.split_seed,
        test_fraction: plan.data.test_fraction,
        representation: plan.data.representation,
        vocabulary_size: data.vocabulary.len(),
        feature_dim: data.space.dim(),
        families: data
            .class_names
            .iter()
            .enumerate()
            .map(|(f, name)| FamilySummary {
                name,
                train: count(&data.train_labels, f),
                test: count(&data.test_labels, f),
                discarded: data.discarded[f],
            })
            .collect(),
    }
}

fn curves_csv(log: &TrainingLog) -> String {
    let mut out = String::from("curve,step,value\n");
    for c in &log.curves {
        for (i, v) in c.values.iter().enumerate() {
            let _ = writeln!(out, "{},{i},{v}", c.name);
        }
    }
    out
}

/// Writes all run outputs under `out` and returns their relative paths.
pub fn write_run(results: &RunResults, out: &Path) -> Result<Vec<String>> {
    let plan = &results.plan;
    let data = &results.dataset;
    let mut files: Vec<(String, String)> = Vec::new();

    let rows = results.report_rows();
    let rendered = render_report(&rows);
    files.push(("report.txt".into(), rendered.text));
    files.push(("report.csv".into(), rendered.csv));
    files.push(("bar.csv".into(), rendered.bar_csv));
    if plan.both_averagings {
        for avg in [Averaging::Weighted, Averaging::Macro] {
            let rows: Vec<ReportRow> = results
                .experiments
                .iter()
                .map(|e| {
                    Ok(ReportRow {
                        group: e.group.clone(),
                        name: e.name.clone(),
                        report: compute_metrics(&e.confusion, avg)?,
                    })
                })
                .collect::<Result<_>>()?;
            let r = render_report(&rows);
            files.push((format!("report_{}.txt", avg.name()), r.text));
            files.push((format!("report_{}.csv", avg.name()), r.csv));
        }
    }
    files.push(("discards.csv".into(), {
        let mut s = String::from("family,discarded\n");
        for (n, d) in data.class_names.iter().zip(&data.discarded) {
            let _ = writeln!(s, "{n},{d}");
        }
        s
    }));
    files.push(("vocabulary.json".into(), to_json(&data.vocabulary)));

    let mut summaries = Vec::new();
    for e in &results.experiments {
        let s = slug(&e.name);
        let confusion_file = format!("confusion_{s}.csv");
        files.push((confusion_file.clone(), e.confusion.to_csv()));
        let curves_file = format!("curves/{s}.csv");
        files.push((curves_file.clone(), curves_csv(&e.log)));
        let model_file = plan.save_models.then(|| format!("models/{s}.json"));
        if let Some(f) = &model_file {
            let bundle = ModelBundle {
                class_names: data.class_names.clone(),
                vocabulary: data.vocabulary.clone(),
                space: data.space.clone(),
                model: e.model.clone(),
            };
            files.push((f.clone(), model_to_json(&bundle)));
        }
        summaries.push(ExperimentSummary {
            name: &e.name,
            group: &e.group,
            kind: e.model.kind(),
            averaging: e.report.averaging.name(),
            members: &e.members,
            confusion: confusion_file,
            model: model_file,
            curves: curves_file,
            warnings: &e.log.warnings,
        });
    }
    let mut names: Vec<String> = files.iter().map(|(n, _)| n.clone()).collect();
    names.push("manifest.json".into());
    let manifest = RunManifest {
        format: RUN_FORMAT,
        version: RUN_VERSION,
        seed: plan.seed,
        data: data_summary(plan, data),
        experiments: summaries,
        files: names.clone(),
    };
    files.push(("manifest.json".into(), to_json(&manifest)));
    for (name, contents) in &files {
        write_file(&out.join(name), contents)?;
    }
    Ok(names)
}

fn out_dir(config: &ExperimentConfig, base: &Path, opts: &RunOptions) -> PathBuf {
    match (&opts.out, &config.out) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => base.join(o),
        (None, None) => base.join("out"),
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub report: String,
}

/// `run <config>`: validate, train, evaluate, write.
pub fn run(config: &ExperimentConfig, base: &Path, opts: &RunOptions) -> Result<RunSummary> {
    let plan = config.plan(base, opts.seed)?;
    let out = out_dir(config, base, opts);
    let results = with_jobs(opts.jobs, || execute(&plan))??;
    let files = write_run(&results, &out)?;
    Ok(RunSummary {
        out_dir: out,
        report: render_report(&results.report_rows()).text,
        files,
    })
}

/// Scores one grid cell on the training split under the grid's protocol.
fn evaluate_cell(
    grid: &PlannedGrid,
    cell: &ensemblekit_core::ParamSet,
    data: &Dataset,
    averaging: Averaging,
    folds: &CellFolds,
) -> std::result::Result<MetricsReport, String> {
    let spec = grid_cell_spec(grid, cell).map_err(|e| e.to_string())?;
    let k = data.n_classes();
    let mut truth = Vec::new();
    let mut pred = Vec::new();
    for (fit, val) in &folds.0 {
        let fit_labels: Vec<usize> = fit.iter().map(|&i| data.train_labels[i]).collect();
        let (model, _) =
            train_ensemble(&spec, &data.train.select_columns(fit), &fit_labels, k).map_err(|e| e.to_string())?;
        let val_v = data.train.select_columns(val);
        pred.extend(predict(&model, &val_v).map_err(|e| e.to_string())?);
        truth.extend(val.iter().map(|&i| data.train_labels[i]));
    }
    let cm = confusion(&truth, &pred, k).map_err(|e| e.to_string())?;
    compute_metrics(&cm, averaging).map_err(|e| e.to_string())
}

/// `(fit, validate)` column index pairs of the training split.
struct CellFolds(Vec<(Vec<usize>, Vec<usize>)>);

fn cell_folds(grid: &PlannedGrid, data: &Dataset) -> Result<CellFolds> {
    let labels = &data.train_labels;
    Ok(CellFolds(match grid.validation {
        Validation::Holdout { fraction, seed } => vec![stratified_split(labels, fraction, seed)?],
        Validation::Folds { k, seed } => {
            let assignment = stratified_folds(labels, data.n_classes(), k, seed)?;
            (0..k)
                .map(|f| {
                    let (val, fit): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| assignment[i] == f);
                    (fit, val)
                })
                .collect()
        }
    }))
}

pub fn search_grid(grid: &PlannedGrid, data: &Dataset, averaging: Averaging) -> Result<GridOutcome> {
    let folds = cell_folds(grid, data)?;
    Ok(grid_search(&grid.grid, grid.selection, |cell| {
        evaluate_cell(grid, cell, data, averaging, &folds)
    }))
}

#[derive(Serialize)]
struct GridManifest<'a> {
    format: &'static str,
    version: u32,
    seed: u64,
    data: DataSummary<'a>,
    grids: Vec<crate::grid::GridSummary>,
    files: Vec<String>,
}

/// `grid <config>`: evaluates every configured grid on the training split.
pub fn run_grids(
    config: &ExperimentConfig,
    base: &Path,
    opts: &RunOptions,
) -> Result<(PathBuf, Vec<(String, GridOutcome)>)> {
    let mut plan = config.plan_grids(base, opts.seed)?;
    if plan.grids.is_empty() {
        return Err(Error::Config(vec![crate::error::ConfigIssue::new(
            "grids",
            "no grids configured",
        )]));
    }
    let out = out_dir(config, base, opts);
    let grids = std::mem::take(&mut plan.grids);
    let (data, outcomes) = with_jobs(opts.jobs, || -> Result<_> {
        let data = prepare_data(&plan.data)?;
        let outcomes = grids
            .iter()
            .map(|g| search_grid(g, &data, plan.report_averaging).map(|o| (g.name.clone(), o)))
            .collect::<Result<Vec<_>>>()?;
        Ok((data, outcomes))
    })??;
    let mut files = Vec::new();
    let mut summaries = Vec::new();
    for (name, o) in &outcomes {
        let s = slug(name);
        write_file(&out.join(format!("grid_{s}.csv")), o.to_csv())?;
        let summary = o.summary(name);
        write_file(&out.join(format!("grid_{s}.json")), to_json(&summary))?;
        files.push(format!("grid_{s}.csv"));
        files.push(format!("grid_{s}.json"));
        summaries.push(summary);
    }
    files.push("grid_manifest.json".into());
    let manifest = GridManifest {
        format: "ensemblekit-grid",
        version: RUN_VERSION,
        seed: plan.seed,
        data: data_summary(&plan, &data),
        grids: summaries,
        files,
    };
    write_file(&out.join("grid_manifest.json"), to_json(&manifest))?;
    Ok((out, outcomes))
}
