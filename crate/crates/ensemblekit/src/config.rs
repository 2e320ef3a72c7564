//! The experiment configuration file and its validation into a [`Plan`].
//!
//! ```toml
//! seed = 7
//! out = "results"
//!
//! [data]
//! synthetic = { scene = { counts = [60, 40], length = 200 } }
//! # or: corpus = "corpus/", min_len = 1000, truncate = 1000
//!
//! [split]
//! test_fraction = 0.3
//!
//! [[experiments]]
//! name = "HMM"
//! family = "hmm"
//! params = { n_components = 3, n_iter = 50 }
//!
//! [[experiments]]
//! name = "Bagged HMM"
//! family = "hmm"
//! params = { n_components = 3, n_iter = 50 }
//! components = 5
//! bagging = { samples = 0.8 }
//!
//! [[experiments]]
//! name = "Classic"
//! stack = "classic"
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ensemblekit_core::combiners::{CombinerKind, MetaParams};
use ensemblekit_core::ensembles::{AdaBoostParams, Bagging, Boosting, EnsembleSpec, SampleBagging};
use ensemblekit_core::metrics::Averaging;
use ensemblekit_core::model::NormalizerKind;
use ensemblekit_core::rng::derive_seed;
use ensemblekit_core::scorers::Family;
use ensemblekit_core::{ParamSet, ParamValue, Representation};
use serde::{Deserialize, Serialize};

use crate::corpus::CorpusOptions;
use crate::error::{ConfigIssue, Error, Result};
use crate::files::read_structured;
use crate::grid::{Axis, GridSpec, Selection};
use crate::presets;
use crate::synthetic::SyntheticSpec;

/// Stream indices mixed into the master seed for the data-side randomness.
const DATA_STREAM: u64 = 1;
const SPLIT_STREAM: u64 = 2;
const VALIDATION_STREAM: u64 = 3;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub features: FeaturesConfig,
    #[serde(default)]
    pub report: ReportConfig,
    #[serde(default)]
    pub experiments: Vec<ExperimentEntry>,
    #[serde(default)]
    pub grids: Vec<GridEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Directory in the standard corpus layout.
    pub corpus: Option<PathBuf>,
    /// Inline synthetic spec, generated in memory.
    pub synthetic: Option<SyntheticSpec>,
    /// Synthetic spec read from a TOML or JSON file.
    pub synthetic_file: Option<PathBuf>,
    /// Generation seed; defaults to a stream of the master seed.
    pub synthetic_seed: Option<u64>,
    /// Defaults to 1000 for corpora on disk and 1 for generated data.
    pub min_len: Option<usize>,
    /// Defaults to 1000 for corpora on disk and no truncation for generated data.
    pub truncate: Option<usize>,
    pub vocab_cap: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub test_fraction: f64,
    pub seed: Option<u64>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            test_fraction: 0.3,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesConfig {
    /// `"sequence"`, `"histogram"` or `{ ngram = n }`.
    pub representation: Representation,
}

impl Default for FeaturesConfig {
    fn default() -> Self {
        FeaturesConfig {
            representation: Representation::Sequence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub averaging: String,
    /// Also write `report_weighted.*` and `report_macro.*`.
    pub both_averagings: bool,
    pub save_models: bool,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            averaging: "weighted".into(),
            both_averagings: false,
            save_models: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaggingConfig {
    pub samples: Option<f64>,
    pub replacement: bool,
    pub features: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoostingConfig {
    Restarts {
        restarts: usize,
    },
    Adaboost {
        n_estimators: Option<usize>,
        learning_rate: Option<f64>,
        algorithm: Option<String>,
        pool: Option<String>,
    },
    AverageWeights,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentEntry {
    pub name: String,
    /// Report group; inferred from the construction when absent.
    pub group: Option<String>,
    pub family: Option<String>,
    pub params: toml::Table,
    pub components: Option<usize>,
    pub bagging: Option<BaggingConfig>,
    pub boosting: Option<BoostingConfig>,
    pub combiner: Option<String>,
    pub normalizer: Option<String>,
    pub averaging: Option<String>,
    pub seed: Option<u64>,
    /// Named stack preset.
    pub stack: Option<String>,
    /// Names of other experiments to stack.
    pub members: Vec<String>,
    /// Parameter overrides per preset member.
    pub member_params: BTreeMap<String, toml::Table>,
    pub meta: toml::Table,
    pub folds: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridEntry {
    /// Used in the output file name; defaults to the family.
    pub name: Option<String>,
    /// A base family, or `adaboost` for boosted stumps.
    pub family: String,
    /// Candidate lists, in the order the grid enumerates them.
    pub params: toml::Table,
    /// Parameters shared by every cell.
    pub fixed: toml::Table,
    pub selection: Option<String>,
    /// Held-out share of the training split; ignored when `folds` is set.
    pub validation_fraction: Option<f64>,
    pub folds: Option<usize>,
    pub seed: Option<u64>,
}

/// Where the samples come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Corpus(PathBuf),
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataPlan {
    pub source: DataSource,
    /// The source as written in the config, for the run manifest.
    pub description: String,
    pub options: CorpusOptions,
    pub synthetic_seed: u64,
    pub vocab_cap: Option<usize>,
    pub test_fraction: f64,
    pub split_seed: u64,
    pub representation: Representation,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StackCombiner {
    Vote,
    Meta { params: MetaParams, folds: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlannedKind {
    Single(EnsembleSpec),
    Stack {
        members: Vec<(String, EnsembleSpec)>,
        combiner: StackCombiner,
        tie_seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedExperiment {
    pub name: String,
    pub group: String,
    pub averaging: Averaging,
    pub kind: PlannedKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Validation {
    Holdout { fraction: f64, seed: u64 },
    Folds { k: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedGrid {
    pub name: String,
    pub family: String,
    pub grid: GridSpec,
    pub fixed: ParamSet,
    pub selection: Selection,
    pub validation: Validation,
    pub seed: u64,
}

/// A validated configuration, ready to run.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub seed: u64,
    pub data: DataPlan,
    pub experiments: Vec<PlannedExperiment>,
    pub grids: Vec<PlannedGrid>,
    pub report_averaging: Averaging,
    pub both_averagings: bool,
    pub save_models: bool,
}

/// Reads a config file; relative paths inside it resolve against its
/// directory.
pub fn load_config(path: &Path) -> Result<(ExperimentConfig, PathBuf)> {
    let config = read_structured(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((config, base))
}

fn param_value(v: &toml::Value) -> Option<ParamValue> {
    Some(match v {
        toml::Value::Integer(i) => ParamValue::Int(*i),
        toml::Value::Float(f) => ParamValue::Real(*f),
        toml::Value::String(s) => ParamValue::Text(s.clone()),
        toml::Value::Boolean(b) => ParamValue::Text(b.to_string()),
        _ => return None,
    })
}

/// Converts a table of scalars; bad entries become issues under `path`.
pub fn param_set(table: &toml::Table, path: &str, issues: &mut Vec<ConfigIssue>) -> ParamSet {
    let mut out = ParamSet::new();
    for (k, v) in table {
        match param_value(v) {
            Some(p) => out.set(k, p),
            None => issues.push(ConfigIssue::new(
                format!("{path}.{k}"),
                "must be a number, string or boolean",
            )),
        }
    }
    out
}

fn parse_averaging(s: &str, path: &str, issues: &mut Vec<ConfigIssue>) -> Averaging {
    Averaging::parse(s).unwrap_or_else(|| {
        issues.push(ConfigIssue::new(
            path,
            format!("unknown averaging `{s}` (weighted, macro)"),
        ));
        Averaging::Weighted
    })
}

/// Scorer parameters live under `params`; spec-level names such as
/// `components` or `bagging.samples` are already config fields.
fn field_path(path: &str, name: &str) -> String {
    const SPEC_FIELDS: [&str; 5] = ["components", "bagging", "boosting", "combiner", "normalizer"];
    let head = name.split('.').next().unwrap_or(name);
    if path.ends_with(".params")
        || path.ends_with(".meta")
        || path.contains(".member_params.")
        || path.ends_with(".boosting")
        || SPEC_FIELDS.contains(&head)
    {
        format!("{path}.{name}")
    } else {
        format!("{path}.params.{name}")
    }
}

/// Pulls a core parameter error's field name into the issue path.
fn core_issue(path: &str, e: ensemblekit_core::Error) -> ConfigIssue {
    match &e {
        ensemblekit_core::Error::InvalidParameter { name, reason } => ConfigIssue::new(field_path(path, name), reason),
        ensemblekit_core::Error::MissingParameter(name) => ConfigIssue::new(field_path(path, name), "is required"),
        _ => ConfigIssue::new(path, e),
    }
}

fn default_group(e: &ExperimentEntry) -> &'static str {
    if e.stack.is_some() || !e.members.is_empty() {
        "Voting"
    } else if e.bagging.is_some() {
        "Bagging"
    } else if e.boosting.is_some() {
        "Boosting"
    } else {
        "Standard"
    }
}

fn single_spec(
    e: &ExperimentEntry,
    family: &str,
    seed: u64,
    path: &str,
    issues: &mut Vec<ConfigIssue>,
) -> Option<EnsembleSpec> {
    let before = issues.len();
    let Some(base) = Family::parse(family) else {
        issues.push(ConfigIssue::new(
            format!("{path}.family"),
            format!("unknown family `{family}` (hmm, perceptron, tree, forest, stump)"),
        ));
        return None;
    };
    let params = param_set(&e.params, &format!("{path}.params"), issues);
    let mut spec = EnsembleSpec::standard(base, params, seed);
    if let Some(b) = &e.bagging {
        let samples = b.samples.map(|fraction| SampleBagging {
            fraction,
            replacement: b.replacement,
        });
        if samples.is_none() && b.features.is_none() {
            issues.push(ConfigIssue::new(
                format!("{path}.bagging"),
                "set `samples`, `features` or both",
            ));
        }
        spec = spec.with_bagging(
            Bagging {
                samples,
                features: b.features,
            },
            e.components.unwrap_or(10),
        );
    } else if let Some(c) = e.components {
        spec.components = c;
    }
    match &e.boosting {
        None => {}
        Some(BoostingConfig::Restarts { restarts }) => spec.boosting = Boosting::Restarts { restarts: *restarts },
        Some(BoostingConfig::AverageWeights) => {
            spec.boosting = Boosting::WeightAverage;
            if e.components.is_none() {
                spec.components = 10;
            }
        }
        Some(BoostingConfig::Adaboost {
            n_estimators,
            learning_rate,
            algorithm,
            pool,
        }) => {
            let mut p = ParamSet::new();
            if let Some(n) = n_estimators {
                p.set("n_estimators", *n);
            }
            if let Some(lr) = learning_rate {
                p.set("learning_rate", *lr);
            }
            if let Some(a) = algorithm {
                p.set("algorithm", a.as_str());
            }
            if let Some(pool) = pool {
                p.set("pool", pool.as_str());
            }
            match AdaBoostParams::from_params(&p) {
                Ok(ab) => spec.boosting = Boosting::AdaBoost(ab),
                Err(err) => issues.push(core_issue(&format!("{path}.boosting"), err)),
            }
        }
    }
    if let Some(c) = &e.combiner {
        match CombinerKind::parse(c) {
            Some(k) => spec.combiner = k,
            None => issues.push(ConfigIssue::new(
                format!("{path}.combiner"),
                format!("unknown combiner `{c}` (max, average, majority, meta)"),
            )),
        }
    }
    if let Some(n) = &e.normalizer {
        spec.normalizer = match n.as_str() {
            "none" => NormalizerKind::None,
            "zscore" => NormalizerKind::Zscore,
            _ => {
                issues.push(ConfigIssue::new(
                    format!("{path}.normalizer"),
                    format!("unknown normalizer `{n}` (none, zscore)"),
                ));
                NormalizerKind::None
            }
        };
    }
    if issues.len() > before {
        return None;
    }
    if let Err(err) = spec.validate() {
        issues.push(core_issue(path, err));
        return None;
    }
    Some(spec)
}

fn stack_combiner(e: &ExperimentEntry, seed: u64, path: &str, issues: &mut Vec<ConfigIssue>) -> StackCombiner {
    match e.combiner.as_deref().unwrap_or("majority") {
        "majority" | "vote" => {
            if !e.meta.is_empty() {
                issues.push(ConfigIssue::new(
                    format!("{path}.meta"),
                    "only used with combiner = \"meta\"",
                ));
            }
            StackCombiner::Vote
        }
        "meta" => {
            let mut p = param_set(&e.meta, &format!("{path}.meta"), issues);
            if p.get("seed").is_none() {
                p.set("seed", seed);
            }
            let folds = e.folds.unwrap_or(5);
            if folds < 2 {
                issues.push(ConfigIssue::new(format!("{path}.folds"), "must be at least 2"));
            }
            match MetaParams::from_params(&p) {
                Ok(params) => StackCombiner::Meta { params, folds },
                Err(err) => {
                    issues.push(core_issue(&format!("{path}.meta"), err));
                    StackCombiner::Vote
                }
            }
        }
        other => {
            issues.push(ConfigIssue::new(
                format!("{path}.combiner"),
                format!("stacks combine with `majority` or `meta`, not `{other}`"),
            ));
            StackCombiner::Vote
        }
    }
}

fn check_data(config: &ExperimentConfig, base: &Path, seed: u64, issues: &mut Vec<ConfigIssue>) -> Option<DataPlan> {
    let d = &config.data;
    let given = [d.corpus.is_some(), d.synthetic.is_some(), d.synthetic_file.is_some()];
    if given.iter().filter(|&&g| g).count() != 1 {
        issues.push(ConfigIssue::new(
            "data",
            "set exactly one of `corpus`, `synthetic`, `synthetic_file`",
        ));
        return None;
    }
    let (source, description, disk) = if let Some(c) = &d.corpus {
        let dir = base.join(c);
        if !dir.is_dir() {
            issues.push(ConfigIssue::new(
                "data.corpus",
                format!("`{}` is not a directory", dir.display()),
            ));
            return None;
        }
        (DataSource::Corpus(dir), format!("corpus:{}", c.display()), true)
    } else if let Some(f) = &d.synthetic_file {
        let file = base.join(f);
        match read_structured::<SyntheticSpec>(&file) {
            Ok(spec) => (DataSource::Synthetic(spec), format!("synthetic:{}", f.display()), false),
            Err(e) => {
                issues.push(ConfigIssue::new("data.synthetic_file", e));
                return None;
            }
        }
    } else {
        (
            DataSource::Synthetic(d.synthetic.clone().unwrap_or_default()),
            "synthetic:inline".into(),
            false,
        )
    };
    let options = CorpusOptions {
        min_len: d.min_len.unwrap_or(if disk { 1000 } else { 1 }),
        truncate: d.truncate.unwrap_or(if disk { 1000 } else { usize::MAX }),
    };
    if options.truncate == 0 {
        issues.push(ConfigIssue::new("data.truncate", "must be at least 1"));
    }
    if d.vocab_cap == Some(0) {
        issues.push(ConfigIssue::new("data.vocab_cap", "must be at least 1"));
    }
    let synthetic_seed = d.synthetic_seed.unwrap_or(derive_seed(seed, DATA_STREAM));
    if let DataSource::Synthetic(spec) = &source {
        if let Err(e) = spec.family_specs(synthetic_seed) {
            issues.push(ConfigIssue::new("data.synthetic", e));
        }
    }
    let test_fraction = config.split.test_fraction;
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        issues.push(ConfigIssue::new(
            "split.test_fraction",
            "must lie strictly between 0 and 1",
        ));
    }
    if let Representation::Ngram(0) = config.features.representation {
        issues.push(ConfigIssue::new("features.representation", "n-grams need n >= 1"));
    }
    Some(DataPlan {
        source,
        description,
        options,
        synthetic_seed,
        vocab_cap: d.vocab_cap,
        test_fraction,
        split_seed: config.split.seed.unwrap_or(derive_seed(seed, SPLIT_STREAM)),
        representation: config.features.representation,
    })
}

fn check_experiments(
    config: &ExperimentConfig,
    seed: u64,
    averaging: Averaging,
    required: bool,
    issues: &mut Vec<ConfigIssue>,
) -> Vec<PlannedExperiment> {
    if required && config.experiments.is_empty() {
        issues.push(ConfigIssue::new("experiments", "at least one experiment is required"));
    }
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut singles: BTreeMap<&str, EnsembleSpec> = BTreeMap::new();
    let mut planned = Vec::new();
    for (i, e) in config.experiments.iter().enumerate() {
        let path = format!("experiments[{i}]");
        if e.name.trim().is_empty() {
            issues.push(ConfigIssue::new(format!("{path}.name"), "must not be empty"));
        }
        if let Some(j) = seen.insert(crate::files::slug(&e.name), i) {
            issues.push(ConfigIssue::new(
                format!("{path}.name"),
                format!(
                    "`{}` clashes with experiments[{j}] (names must be unique as file names)",
                    e.name
                ),
            ));
        }
        let exp_seed = e.seed.unwrap_or(seed);
        let averaging = match &e.averaging {
            Some(a) => parse_averaging(a, &format!("{path}.averaging"), issues),
            None => averaging,
        };
        let is_stack = e.stack.is_some() || !e.members.is_empty();
        let kind = match (&e.family, is_stack) {
            (Some(_), true) => {
                issues.push(ConfigIssue::new(
                    &path,
                    "set either `family` or a stack (`stack` / `members`), not both",
                ));
                continue;
            }
            (None, false) => {
                issues.push(ConfigIssue::new(&path, "set `family`, `stack` or `members`"));
                continue;
            }
            (Some(family), false) => {
                if !e.member_params.is_empty() || e.folds.is_some() || !e.meta.is_empty() {
                    issues.push(ConfigIssue::new(
                        &path,
                        "`member_params`, `folds` and `meta` only apply to stacks",
                    ));
                }
                match single_spec(e, family, exp_seed, &path, issues) {
                    Some(spec) => {
                        singles.insert(e.name.as_str(), spec.clone());
                        PlannedKind::Single(spec)
                    }
                    None => continue,
                }
            }
            (None, true) => {
                let members = if let Some(stack) = &e.stack {
                    if !e.members.is_empty() {
                        issues.push(ConfigIssue::new(&path, "set either `stack` or `members`, not both"));
                        continue;
                    }
                    let mut overrides = BTreeMap::new();
                    for (m, table) in &e.member_params {
                        let mpath = format!("{path}.member_params.{m}");
                        if !presets::MEMBERS.contains(&m.as_str()) {
                            issues.push(ConfigIssue::new(
                                mpath.clone(),
                                format!("unknown member (one of {})", presets::MEMBERS.join(", ")),
                            ));
                        }
                        overrides.insert(m.clone(), param_set(table, &mpath, issues));
                    }
                    match presets::stack_specs(stack, exp_seed, &overrides) {
                        Some(specs) => {
                            for (m, spec) in &specs {
                                if let Err(err) = spec.validate() {
                                    issues.push(core_issue(&format!("{path}.member_params.{m}"), err));
                                }
                            }
                            specs
                        }
                        None => {
                            issues.push(ConfigIssue::new(
                                format!("{path}.stack"),
                                format!("unknown stack `{stack}` (one of {})", presets::STACKS.join(", ")),
                            ));
                            continue;
                        }
                    }
                } else {
                    if !e.member_params.is_empty() {
                        issues.push(ConfigIssue::new(
                            format!("{path}.member_params"),
                            "only applies to `stack` presets",
                        ));
                    }
                    let mut specs = Vec::new();
                    for (k, m) in e.members.iter().enumerate() {
                        match singles.get(m.as_str()) {
                            Some(spec) => specs.push((m.clone(), spec.clone())),
                            None => issues.push(ConfigIssue::new(
                                format!("{path}.members[{k}]"),
                                format!("`{m}` is not an earlier non-stack experiment"),
                            )),
                        }
                    }
                    specs
                };
                let stray = [
                    (e.params.is_empty(), "params"),
                    (e.bagging.is_none(), "bagging"),
                    (e.boosting.is_none(), "boosting"),
                    (e.components.is_none(), "components"),
                    (e.normalizer.is_none(), "normalizer"),
                ];
                for (ok, field) in stray {
                    if !ok {
                        issues.push(ConfigIssue::new(format!("{path}.{field}"), "does not apply to stacks"));
                    }
                }
                let combiner = stack_combiner(e, exp_seed, &path, issues);
                PlannedKind::Stack {
                    members,
                    combiner,
                    tie_seed: derive_seed(exp_seed, u64::MAX),
                }
            }
        };
        planned.push(PlannedExperiment {
            name: e.name.clone(),
            group: e.group.clone().unwrap_or_else(|| default_group(e).into()),
            averaging,
            kind,
        });
    }
    planned
}

fn check_grids(config: &ExperimentConfig, seed: u64, issues: &mut Vec<ConfigIssue>) -> Vec<PlannedGrid> {
    let mut out = Vec::new();
    let mut names = BTreeMap::new();
    for (i, g) in config.grids.iter().enumerate() {
        let path = format!("grids[{i}]");
        let before = issues.len();
        if g.family != "adaboost" && Family::parse(&g.family).is_none() {
            issues.push(ConfigIssue::new(
                format!("{path}.family"),
                format!(
                    "unknown family `{}` (hmm, perceptron, tree, forest, stump, adaboost)",
                    g.family
                ),
            ));
        }
        let name = g.name.clone().unwrap_or_else(|| g.family.clone());
        if let Some(j) = names.insert(crate::files::slug(&name), i) {
            issues.push(ConfigIssue::new(
                format!("{path}.name"),
                format!("clashes with grids[{j}]"),
            ));
        }
        let mut axes = Vec::new();
        if g.params.is_empty() {
            issues.push(ConfigIssue::new(
                format!("{path}.params"),
                "needs at least one candidate list",
            ));
        }
        for (k, v) in &g.params {
            let apath = format!("{path}.params.{k}");
            let values: Vec<&toml::Value> = match v {
                toml::Value::Array(a) => a.iter().collect(),
                scalar => vec![scalar],
            };
            if values.is_empty() {
                issues.push(ConfigIssue::new(apath, "candidate list is empty"));
                continue;
            }
            let mut parsed = Vec::new();
            for (j, v) in values.into_iter().enumerate() {
                match param_value(v) {
                    Some(p) => parsed.push(p),
                    None => issues.push(ConfigIssue::new(
                        format!("{apath}[{j}]"),
                        "must be a number, string or boolean",
                    )),
                }
            }
            axes.push(Axis {
                name: k.clone(),
                values: parsed,
            });
        }
        let fixed = param_set(&g.fixed, &format!("{path}.fixed"), issues);
        if let Some(clash) = g.fixed.keys().find(|k| g.params.contains_key(*k)) {
            issues.push(ConfigIssue::new(format!("{path}.fixed.{clash}"), "is also a grid axis"));
        }
        let selection = match &g.selection {
            None => Selection::BalancedAccuracy,
            Some(s) => Selection::parse(s).unwrap_or_else(|| {
                issues.push(ConfigIssue::new(
                    format!("{path}.selection"),
                    format!("unknown metric `{s}` (accuracy, balanced_accuracy, precision, recall, f1)"),
                ));
                Selection::BalancedAccuracy
            }),
        };
        let grid_seed = g.seed.unwrap_or(seed);
        let vseed = derive_seed(grid_seed, VALIDATION_STREAM);
        let validation = match (g.folds, g.validation_fraction) {
            (Some(k), _) if k < 2 => {
                issues.push(ConfigIssue::new(format!("{path}.folds"), "must be at least 2"));
                Validation::Folds { k, seed: vseed }
            }
            (Some(k), _) => Validation::Folds { k, seed: vseed },
            (None, f) => {
                let fraction = f.unwrap_or(0.25);
                if !(fraction > 0.0 && fraction < 1.0) {
                    issues.push(ConfigIssue::new(
                        format!("{path}.validation_fraction"),
                        "must lie strictly between 0 and 1",
                    ));
                }
                Validation::Holdout { fraction, seed: vseed }
            }
        };
        if issues.len() == before {
            out.push(PlannedGrid {
                name,
                family: g.family.clone(),
                grid: GridSpec { axes },
                fixed,
                selection,
                validation,
                seed: grid_seed,
            });
        }
    }
    out
}

impl ExperimentConfig {
    /// Validates everything that can be checked before training, reporting
    /// all problems at once. `seed` overrides the configured master seed.
    pub fn plan(&self, base: &Path, seed: Option<u64>) -> Result<Plan> {
        self.plan_with(base, seed, true)
    }

    /// As [`plan`](Self::plan), but an empty experiment list is allowed.
    pub fn plan_grids(&self, base: &Path, seed: Option<u64>) -> Result<Plan> {
        self.plan_with(base, seed, false)
    }

    fn plan_with(&self, base: &Path, seed: Option<u64>, experiments_required: bool) -> Result<Plan> {
        let seed = seed.unwrap_or(self.seed);
        let mut issues = Vec::new();
        let report_averaging = parse_averaging(&self.report.averaging, "report.averaging", &mut issues);
        let data = check_data(self, base, seed, &mut issues);
        let experiments = check_experiments(self, seed, report_averaging, experiments_required, &mut issues);
        let grids = check_grids(self, seed, &mut issues);
        match data {
            Some(data) if issues.is_empty() => Ok(Plan {
                seed,
                data,
                experiments,
                grids,
                report_averaging,
                both_averagings: self.report.both_averagings,
                save_models: self.report.save_models,
            }),
            _ => Err(Error::Config(issues)),
        }
    }
}

/// Builds the spec of one grid cell.
pub fn grid_cell_spec(grid: &PlannedGrid, cell: &ParamSet) -> ensemblekit_core::Result<EnsembleSpec> {
    let params = grid.fixed.merged(cell);
    let spec = if grid.family == "adaboost" {
        let ab = AdaBoostParams::from_params(&params)?;
        EnsembleSpec::standard(Family::Stump, ParamSet::new(), grid.seed).with_boosting(Boosting::AdaBoost(ab))
    } else {
        let family = Family::parse(&grid.family)
            .ok_or_else(|| ensemblekit_core::Error::Unsupported(format!("family `{}`", grid.family)))?;
        EnsembleSpec::standard(family, params, grid.seed)
    };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> ExperimentConfig {
        toml::from_str(text).unwrap()
    }

    fn issues(text: &str) -> Vec<ConfigIssue> {
        match parse(text).plan(Path::new("."), None) {
            Err(Error::Config(i)) => i,
            other => panic!("expected config issues, got {other:?}"),
        }
    }

    #[test]
    fn empty_experiment_list_is_rejected() {
        let i = issues("[data]\nsynthetic = { scene = {} }\n");
        assert_eq!(
            i,
            vec![ConfigIssue::new("experiments", "at least one experiment is required")]
        );
    }

    #[test]
    fn issues_carry_field_paths() {
        let i = issues(
            r#"
            [data]
            synthetic = { scene = {} }
            [[experiments]]
            name = "a"
            family = "hmm"
            params = { n_components = 0 }
            [[experiments]]
            name = "A"
            family = "tree"
            bagging = { samples = 1.5 }
            [[experiments]]
            name = "v"
            members = ["a", "nope"]
            "#,
        );
        let paths: Vec<&str> = i.iter().map(|x| x.path.as_str()).collect();
        assert!(paths.contains(&"experiments[0].params.n_components"), "{i:?}");
        assert!(paths.contains(&"experiments[1].name"), "{i:?}");
        assert!(
            paths
                .iter()
                .any(|p| p.starts_with("experiments[1]") && p.contains("sampl")),
            "{i:?}"
        );
        assert!(paths.contains(&"experiments[2].members[1]"), "{i:?}");
    }

    #[test]
    fn samme_r_is_a_config_error() {
        let i = issues(
            r#"
            [data]
            synthetic = { scene = {} }
            [[experiments]]
            name = "ab"
            family = "stump"
            boosting = { kind = "adaboost", algorithm = "SAMME.R" }
            "#,
        );
        assert_eq!(i.len(), 1);
        assert!(i[0].path.starts_with("experiments[0].boosting"), "{i:?}");
    }

    #[test]
    fn valid_config_plans_every_kind() {
        let c = parse(
            r#"
            seed = 3
            [data]
            synthetic = { scene = { counts = [10, 10] } }
            [[experiments]]
            name = "hmm"
            family = "hmm"
            [[experiments]]
            name = "bagged"
            family = "hmm"
            bagging = { samples = 0.8 }
            components = 4
            [[experiments]]
            name = "ada"
            family = "stump"
            boosting = { kind = "adaboost", n_estimators = 10 }
            [[experiments]]
            name = "vote"
            members = ["hmm", "bagged"]
            [[experiments]]
            name = "classic"
            stack = "classic"
            member_params = { forest = { n_estimators = 5 } }
            [[experiments]]
            name = "meta"
            members = ["hmm", "ada"]
            combiner = "meta"
            meta = { epochs = 20 }
            "#,
        );
        let plan = c.plan(Path::new("."), Some(11)).unwrap();
        assert_eq!(plan.seed, 11);
        let groups: Vec<&str> = plan.experiments.iter().map(|e| e.group.as_str()).collect();
        assert_eq!(
            groups,
            ["Standard", "Bagging", "Boosting", "Voting", "Voting", "Voting"]
        );
        match &plan.experiments[1].kind {
            PlannedKind::Single(s) => assert_eq!((s.components, s.master_seed), (4, 11)),
            k => panic!("{k:?}"),
        }
        match &plan.experiments[5].kind {
            PlannedKind::Stack {
                combiner: StackCombiner::Meta { params, folds },
                ..
            } => assert_eq!((params.epochs, params.seed, *folds), (20, 11, 5)),
            k => panic!("{k:?}"),
        }
    }
}
