//! Multi-split experiments: train, intervene, explain, measure, aggregate.
//!
//! Every split is a pure function of the configuration and the master seed.
//! Per-split reports, training logs and (optionally) models are written under
//! the output directory together with a config snapshot and the aggregate
//! mean/std table.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{encode, enumerate_groups, split_indices, Dataset, FeatureSchema, RawTable};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, FairnessReport, HEADLINE_COLUMNS};
use crate::misob::{misob_train, MisobConfig, MisobOutcome};
use crate::models::{Model, ModelSpec, TrainConfig};
use crate::postpro::{apply_postpro, fit_postpro};
use crate::recourse::{
    recourse_costs_population, write_trace, CostFunction, FailurePolicy, GsConfig, MethodTag,
    PopulationRecourse, RecourseGenerator, RecourseMethod, WtConfig, THRESHOLD,
};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Plain training.
    None,
    /// Plain training, then per-group randomized flipping to equalize TPR.
    Postpro,
    /// Burden-reweighted training.
    Misob,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::Postpro => "postpro",
            Strategy::Misob => "misob",
        }
    }
}

/// MISOB options of an experiment. Training hyperparameters come from the
/// experiment's `train` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MisobSettings {
    pub c: f64,
    pub warmup_epochs: usize,
    pub rounds: usize,
    pub per_batch: bool,
    pub reset_optimizer: bool,
    /// Recourse method used for burdens during training. When absent each
    /// evaluated method trains its own model with itself.
    pub recourse: Option<RecourseMethod>,
}

impl Default for MisobSettings {
    fn default() -> Self {
        let d = MisobConfig::default();
        Self {
            c: d.c,
            warmup_epochs: d.warmup_epochs,
            rounds: d.rounds,
            per_batch: d.per_batch,
            reset_optimizer: d.reset_optimizer,
            recourse: None,
        }
    }
}

fn default_strategies() -> Vec<Strategy> {
    vec![Strategy::None, Strategy::Postpro, Strategy::Misob]
}

fn default_methods() -> Vec<RecourseMethod> {
    vec![
        RecourseMethod::Gs(GsConfig::default()),
        RecourseMethod::Wt(WtConfig::default()),
    ]
}

fn default_splits() -> usize {
    10
}

fn default_test_fraction() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    pub schema: PathBuf,
    /// Each entry is one (possibly intersectional) grouping, e.g. `["race", "gender"]`.
    pub attribute_sets: Vec<Vec<String>>,
    #[serde(default)]
    pub model: ModelSpec,
    /// Plain training; its `seed` is replaced per split.
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<Strategy>,
    #[serde(default)]
    pub misob: MisobSettings,
    #[serde(default = "default_methods")]
    pub methods: Vec<RecourseMethod>,
    #[serde(default)]
    pub failure_policy: FailurePolicy,
    #[serde(default = "default_splits")]
    pub splits: usize,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub save_models: bool,
    /// Write per-row recourse traces for every split, model and method.
    #[serde(default)]
    pub trace: bool,
}

impl ExperimentConfig {
    /// Config with defaults for everything but the data and groupings.
    pub fn new(
        dataset: impl Into<PathBuf>,
        schema: impl Into<PathBuf>,
        attribute_sets: Vec<Vec<String>>,
    ) -> Self {
        Self {
            dataset: dataset.into(),
            schema: schema.into(),
            attribute_sets,
            model: ModelSpec::default(),
            train: TrainConfig::default(),
            strategies: default_strategies(),
            misob: MisobSettings::default(),
            methods: default_methods(),
            failure_policy: FailurePolicy::default(),
            splits: default_splits(),
            test_fraction: default_test_fraction(),
            seed: 0,
            output_dir: None,
            save_models: false,
            trace: false,
        }
    }

    /// Read a JSON config. Relative paths inside it are taken relative to the
    /// file's directory.
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.dataset);
        resolve(&mut cfg.schema);
        if let Some(out) = cfg.output_dir.as_mut() {
            resolve(out);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.splits == 0 {
            return fail("need at least one split".into());
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return fail(format!(
                "test fraction must be in (0, 1), got {}",
                self.test_fraction
            ));
        }
        if self.attribute_sets.is_empty() || self.attribute_sets.iter().any(Vec::is_empty) {
            return fail("attribute_sets must be non-empty lists of sensitive attributes".into());
        }
        if self.strategies.is_empty() {
            return fail("no strategies configured".into());
        }
        if self.strategies.iter().collect::<BTreeSet<_>>().len() != self.strategies.len() {
            return fail("duplicate strategy".into());
        }
        if self.methods.is_empty() {
            return fail("no recourse methods configured".into());
        }
        let tags: BTreeSet<&str> = self.methods.iter().map(|m| m.tag().as_str()).collect();
        if tags.len() != self.methods.len() {
            return fail("each recourse method may appear only once".into());
        }
        for m in &self.methods {
            m.validate()?;
        }
        if let Some(m) = &self.misob.recourse {
            m.validate()?;
        }
        if !(self.misob.c >= 0.0) || !self.misob.c.is_finite() {
            return fail(format!(
                "C must be a finite value >= 0, got {}",
                self.misob.c
            ));
        }
        self.model.validate()?;
        self.train.validate()
    }
}

/// One report of one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub method: MethodTag,
    pub strategy: Strategy,
    pub attributes: Vec<String>,
    pub report: FairnessReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub split: usize,
    pub seed: u64,
    pub train_rows: usize,
    pub test_rows: usize,
    pub entries: Vec<ReportEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricStat {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: MethodTag,
    pub strategy: Strategy,
    pub attributes: Vec<String>,
    pub splits: usize,
    /// In [`HEADLINE_COLUMNS`] order.
    pub stats: Vec<MetricStat>,
}

impl AggregateRow {
    pub fn stat(&self, column: &str) -> Option<&MetricStat> {
        HEADLINE_COLUMNS
            .iter()
            .position(|c| *c == column)
            .and_then(|i| self.stats.get(i))
    }
}

/// Mean and sample standard deviation over splits per (method, strategy,
/// attribute set), in configuration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateTable {
    pub rows: Vec<AggregateRow>,
}

impl AggregateTable {
    pub fn from_splits(splits: &[SplitReport]) -> Result<Self> {
        let mut keys: Vec<(MethodTag, Strategy, Vec<String>)> = Vec::new();
        for s in splits {
            for e in &s.entries {
                let key = (e.method, e.strategy, e.attributes.clone());
                if !keys.contains(&key) {
                    keys.push(key);
                }
            }
        }
        let rows = keys
            .into_iter()
            .map(|(method, strategy, attributes)| {
                let values: Vec<[f64; 10]> = splits
                    .iter()
                    .flat_map(|s| &s.entries)
                    .filter(|e| {
                        e.method == method && e.strategy == strategy && e.attributes == attributes
                    })
                    .map(|e| e.report.headline())
                    .collect();
                if values.len() != splits.len() {
                    return Err(Error::Invariant(format!(
                        "{} / {} / {} present in {} of {} splits",
                        method.as_str(),
                        strategy.as_str(),
                        attributes.join("+"),
                        values.len(),
                        splits.len()
                    )));
                }
                let stats = (0..HEADLINE_COLUMNS.len())
                    .map(|k| mean_std(values.iter().map(|v| v[k])))
                    .collect();
                Ok(AggregateRow {
                    method,
                    strategy,
                    attributes,
                    splits: values.len(),
                    stats,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { rows })
    }

    pub fn find(
        &self,
        method: MethodTag,
        strategy: Strategy,
        attributes: &[&str],
    ) -> Option<&AggregateRow> {
        self.rows.iter().find(|r| {
            r.method == method
                && r.strategy == strategy
                && r.attributes
                    .iter()
                    .map(String::as_str)
                    .eq(attributes.iter().copied())
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,strategy,attributes,splits");
        for c in HEADLINE_COLUMNS {
            let _ = write!(out, ",{c}_mean,{c}_std");
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(
                out,
                "{},{},{},{}",
                r.method.as_str(),
                r.strategy.as_str(),
                r.attributes.join("+"),
                r.splits
            );
            for s in &r.stats {
                let _ = write!(out, ",{},{}", s.mean, s.std);
            }
            out.push('\n');
        }
        out
    }
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> MetricStat {
    let n = values.clone().count();
    let mean = values.clone().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    MetricStat { mean, std }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub table: AggregateTable,
    pub splits: Vec<SplitReport>,
}

/// Raw data plus the rows usable under the schema.
struct Source {
    raw: RawTable,
    schema: FeatureSchema,
    complete: Vec<usize>,
}

impl Source {
    fn load(cfg: &ExperimentConfig) -> Result<Self> {
        let schema = FeatureSchema::from_json_file(&cfg.schema)?;
        let raw = RawTable::read(&cfg.dataset)?;
        let all: Vec<usize> = (0..raw.len()).collect();
        let complete = raw.complete_rows(&schema, &all)?;
        log::info!(
            "{}: {} rows, {} complete, fingerprint {:016x}",
            cfg.dataset.display(),
            raw.len(),
            complete.len(),
            raw.fingerprint()
        );
        Ok(Self {
            raw,
            schema,
            complete,
        })
    }

    /// Split, fit numeric ranges on the training rows and encode both parts.
    fn split(&self, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        let (tr, te) = split_indices(self.complete.len(), test_fraction, seed)?;
        let train_rows: Vec<usize> = tr.iter().map(|&i| self.complete[i]).collect();
        let test_rows: Vec<usize> = te.iter().map(|&i| self.complete[i]).collect();
        let mut schema = self.schema.clone();
        schema.refit_ranges(&self.raw, &train_rows)?;
        Ok((
            encode(&self.raw, &schema, Some(&train_rows), "train")?,
            encode(&self.raw, &schema, Some(&test_rows), "test")?,
        ))
    }
}

/// The method with its search seed tied to the split.
fn seeded(method: &RecourseMethod, split_seed: u64) -> RecourseMethod {
    match method {
        RecourseMethod::Gs(c) => RecourseMethod::Gs(GsConfig {
            seed: rng::derive(rng::derive(split_seed, 2), c.seed),
            ..c.clone()
        }),
        RecourseMethod::Wt(c) => RecourseMethod::Wt(c.clone()),
    }
}

struct SplitArtifacts {
    report: SplitReport,
    models: Vec<(String, Model)>,
    misob_logs: Vec<(String, MisobOutcome)>,
    policies: Vec<(String, String)>,
    traces: Vec<(String, Dataset, PopulationRecourse)>,
}

fn attr_label(attrs: &[String]) -> String {
    attrs.join("+")
}

fn run_split(cfg: &ExperimentConfig, source: &Source, split: usize) -> Result<SplitArtifacts> {
    let split_seed = rng::derive(cfg.seed, split as u64);
    let (train, test) = source.split(cfg.test_fraction, split_seed)?;
    log::info!(
        "split {split}: {} train rows, {} test rows",
        train.len(),
        test.len()
    );
    let mask = train.schema().mutability_mask();
    let cost = CostFunction::evaluation(mask.clone());
    let train_cfg = TrainConfig {
        seed: rng::derive(split_seed, 1),
        ..cfg.train.clone()
    };
    let wants = |s: Strategy| cfg.strategies.contains(&s);
    let mut art = SplitArtifacts {
        report: SplitReport {
            split,
            seed: split_seed,
            train_rows: train.len(),
            test_rows: test.len(),
            entries: Vec::new(),
        },
        models: Vec::new(),
        misob_logs: Vec::new(),
        policies: Vec::new(),
        traces: Vec::new(),
    };
    let test_groups = cfg
        .attribute_sets
        .iter()
        .map(|a| enumerate_groups(&test, a))
        .collect::<Result<Vec<_>>>()?;

    let base = if wants(Strategy::None) || wants(Strategy::Postpro) {
        let mut m = Model::new(cfg.model.clone(), train.dim(), train_cfg.seed)?;
        m.train_weighted(train.samples(), &vec![1.0; train.len()], &train_cfg)?;
        Some(m)
    } else {
        None
    };

    // post-processing policies only depend on the base model and the grouping
    let mut postpro_decisions = Vec::new();
    if let (Some(base), true) = (&base, wants(Strategy::Postpro)) {
        let train_preds = base.predict_batch(train.x(), THRESHOLD)?;
        let test_preds = base.predict_batch(test.x(), THRESHOLD)?;
        for (attrs, groups) in cfg.attribute_sets.iter().zip(&test_groups) {
            let policy = fit_postpro(&train_preds, train.y(), &enumerate_groups(&train, attrs)?)?;
            let decisions =
                apply_postpro(&policy, &test_preds, groups, rng::derive(split_seed, 3))?;
            art.policies.push((attr_label(attrs), policy.to_json()?));
            postpro_decisions.push(decisions);
        }
    }

    let mut misob_models: Vec<(Option<MethodTag>, Model)> = Vec::new();
    for method in &cfg.methods {
        let method = seeded(method, split_seed);
        let tag = method.tag();
        if let Some(base) = &base {
            let preds = base.predict_batch(test.x(), THRESHOLD)?;
            let pop =
                recourse_costs_population(base, test.x(), &method, &cost, cfg.failure_policy)?;
            log_failures(split, tag, "base", &pop);
            if wants(Strategy::None) {
                for (attrs, groups) in cfg.attribute_sets.iter().zip(&test_groups) {
                    let report =
                        evaluate(&pop.costs, &preds, test.y(), groups, pop.failure_rate())?;
                    art.report.entries.push(ReportEntry {
                        method: tag,
                        strategy: Strategy::None,
                        attributes: attrs.clone(),
                        report,
                    });
                }
            }
            for ((attrs, groups), decisions) in cfg
                .attribute_sets
                .iter()
                .zip(&test_groups)
                .zip(&postpro_decisions)
            {
                let pp = pop.redecide(test.x(), &preds, decisions, &cost, cfg.failure_policy)?;
                let report = evaluate(&pp.costs, decisions, test.y(), groups, pp.failure_rate())?;
                art.report.entries.push(ReportEntry {
                    method: tag,
                    strategy: Strategy::Postpro,
                    attributes: attrs.clone(),
                    report,
                });
            }
            if cfg.trace {
                art.traces
                    .push((format!("base-{}", tag.as_str()), test.clone(), pop));
            }
        }

        if wants(Strategy::Misob) {
            let trained_with = cfg.misob.recourse.as_ref().map(|m| seeded(m, split_seed));
            let key = if trained_with.is_some() {
                None
            } else {
                Some(tag)
            };
            let existing = misob_models.iter().position(|(k, _)| *k == key);
            let idx = match existing {
                Some(i) => i,
                None => {
                    let mcfg = MisobConfig {
                        c: cfg.misob.c,
                        warmup_epochs: cfg.misob.warmup_epochs,
                        rounds: cfg.misob.rounds,
                        train: train_cfg.clone(),
                        recourse: trained_with.unwrap_or_else(|| method.clone()),
                        failure_policy: cfg.failure_policy,
                        per_batch: cfg.misob.per_batch,
                        reset_optimizer: cfg.misob.reset_optimizer,
                    };
                    let outcome = misob_train(train.samples(), &mask, &cfg.model, &mcfg)?;
                    let name = key.map_or("shared", MethodTag::as_str).to_string();
                    misob_models.push((key, outcome.model.clone()));
                    art.misob_logs.push((name, outcome));
                    misob_models.len() - 1
                }
            };
            let model = &misob_models[idx].1;
            let preds = model.predict_batch(test.x(), THRESHOLD)?;
            let pop =
                recourse_costs_population(model, test.x(), &method, &cost, cfg.failure_policy)?;
            log_failures(split, tag, "misob", &pop);
            for (attrs, groups) in cfg.attribute_sets.iter().zip(&test_groups) {
                let report = evaluate(&pop.costs, &preds, test.y(), groups, pop.failure_rate())?;
                art.report.entries.push(ReportEntry {
                    method: tag,
                    strategy: Strategy::Misob,
                    attributes: attrs.clone(),
                    report,
                });
            }
            if cfg.trace {
                art.traces
                    .push((format!("misob-{}", tag.as_str()), test.clone(), pop));
            }
        }
    }

    if cfg.save_models {
        if let Some(b) = base {
            art.models.push(("base".into(), b));
        }
        for (key, m) in misob_models {
            art.models.push((
                format!("misob-{}", key.map_or("shared", MethodTag::as_str)),
                m,
            ));
        }
    }
    Ok(art)
}

fn log_failures(split: usize, tag: MethodTag, model: &str, pop: &PopulationRecourse) {
    if pop.failures > 0 {
        log::warn!(
            "split {split}, {model} model, {}: recourse failed for {} of {} denied test rows \
             (failure rate {:.4}); failures are charged per the failure policy",
            tag.as_str(),
            pop.failures,
            pop.attempted,
            pop.failure_rate()
        );
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn persist_split(out: &Path, art: &SplitArtifacts) -> Result<()> {
    let i = art.report.split;
    let dir = out.join("splits");
    create_dir(&dir)?;
    write_file(
        &dir.join(format!("split-{i}.json")),
        &(serde_json::to_string_pretty(&art.report)? + "\n"),
    )?;
    if !art.misob_logs.is_empty() {
        let logs = out.join("logs");
        create_dir(&logs)?;
        for (name, outcome) in &art.misob_logs {
            let path = logs.join(format!("split-{i}-misob-{name}.csv"));
            let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            outcome.write_log_csv(file)?;
        }
    }
    if !art.policies.is_empty() {
        let dir = out.join("policies");
        create_dir(&dir)?;
        for (attrs, json) in &art.policies {
            write_file(
                &dir.join(format!("split-{i}-{attrs}.json")),
                &(json.clone() + "\n"),
            )?;
        }
    }
    if !art.models.is_empty() {
        let dir = out.join("models");
        create_dir(&dir)?;
        for (name, m) in &art.models {
            m.save(dir.join(format!("split-{i}-{name}.json")))?;
        }
    }
    if !art.traces.is_empty() {
        let dir = out.join("traces");
        create_dir(&dir)?;
        for (name, test, pop) in &art.traces {
            write_trace(dir.join(format!("split-{i}-{name}.csv")), test.x(), pop)?;
        }
    }
    Ok(())
}

/// Run every split, persist artifacts when `output_dir` is set and return the
/// aggregate table. Any failing split fails the run.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let source = Source::load(cfg)?;
    if let Some(out) = &cfg.output_dir {
        create_dir(out)?;
        write_file(
            &out.join("config.json"),
            &(serde_json::to_string_pretty(cfg)? + "\n"),
        )?;
    }
    let results: Vec<Result<SplitArtifacts>> = (0..cfg.splits)
        .into_par_iter()
        .map(|i| {
            let art = run_split(cfg, &source, i)?;
            if let Some(out) = &cfg.output_dir {
                persist_split(out, &art)?;
            }
            Ok(art)
        })
        .collect();
    let mut splits = Vec::with_capacity(cfg.splits);
    let mut first_error = None;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(art) => splits.push(art.report),
            Err(e) => {
                log::error!("split {i} failed: {e}");
                first_error.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_error {
        return Err(e);
    }
    let table = AggregateTable::from_splits(&splits)?;
    if let Some(out) = &cfg.output_dir {
        write_file(&out.join("aggregate.csv"), &table.to_csv())?;
        write_file(
            &out.join("aggregate.json"),
            &(serde_json::to_string_pretty(&table)? + "\n"),
        )?;
    }
    Ok(ExperimentOutcome { table, splits })
}

/// Read persisted per-split reports back from an output directory.
pub fn load_split_reports(out: impl AsRef<Path>) -> Result<Vec<SplitReport>> {
    let dir = out.as_ref().join("splits");
    let mut reports = Vec::new();
    for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
        let path = entry.map_err(|e| Error::io(&dir, e))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            reports.push(serde_json::from_str::<SplitReport>(&text)?);
        }
    }
    reports.sort_by_key(|r| r.split);
    Ok(reports)
}

/// MISOB-only runs for each `C`. Each run gets its own `c-<C>` subdirectory;
/// a long-format `sweep.csv` (c, method, attributes, metric, mean, std) is
/// written to the parent output directory.
pub fn sweep_c(cfg: &ExperimentConfig, c_values: &[f64]) -> Result<Vec<(f64, AggregateTable)>> {
    if c_values.is_empty() {
        return Err(Error::Config("no C values given".into()));
    }
    for (i, c) in c_values.iter().enumerate() {
        if !(*c >= 0.0) || !c.is_finite() {
            return Err(Error::Config(format!(
                "C must be a finite value >= 0, got {c}"
            )));
        }
        if c_values[..i].contains(c) {
            return Err(Error::Config(format!("C value {c} listed twice")));
        }
    }
    let mut tables = Vec::with_capacity(c_values.len());
    for &c in c_values {
        let mut run = cfg.clone();
        run.strategies = vec![Strategy::Misob];
        run.misob.c = c;
        run.output_dir = cfg.output_dir.as_ref().map(|o| o.join(format!("c-{c}")));
        log::info!("sweep: C = {c}");
        tables.push((c, run_experiment(&run)?.table));
    }
    if let Some(out) = &cfg.output_dir {
        write_file(&out.join("sweep.csv"), &sweep_csv(&tables))?;
    }
    Ok(tables)
}

pub fn sweep_csv(tables: &[(f64, AggregateTable)]) -> String {
    let mut out = String::from("c,method,attributes,metric,mean,std\n");
    for (c, table) in tables {
        for r in &table.rows {
            for (name, s) in HEADLINE_COLUMNS.iter().zip(&r.stats) {
                let _ = writeln!(
                    out,
                    "{c},{},{},{name},{},{}",
                    r.method.as_str(),
                    r.attributes.join("+"),
                    s.mean,
                    s.std
                );
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_sample_convention() {
        let s = mean_std([1.0, 2.0, 3.0].into_iter());
        assert_eq!(s.mean, 2.0);
        assert!((s.std - 1.0).abs() < 1e-15);
        assert_eq!(mean_std([5.0].into_iter()).std, 0.0);
    }

    #[test]
    fn config_validation() {
        let mut cfg = ExperimentConfig::new("d.csv", "s.json", vec![vec!["race".into()]]);
        assert!(cfg.validate().is_ok());
        cfg.splits = 0;
        assert!(cfg.validate().is_err());
        cfg.splits = 1;
        cfg.strategies = vec![Strategy::None, Strategy::None];
        assert!(cfg.validate().is_err());
        cfg.strategies = vec![Strategy::None];
        cfg.attribute_sets = vec![vec![]];
        assert!(cfg.validate().is_err());
        cfg.attribute_sets = vec![vec!["race".into()]];
        cfg.methods.push(RecourseMethod::Gs(GsConfig::default()));
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_json_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"dataset": "a.csv", "schema": "s.json", "attribute_sets": [["race"], ["race", "gender"]],
                "methods": [{"method": "wt", "lambda": 0.05}]}"#,
        )
        .unwrap();
        assert_eq!(cfg.splits, 10);
        assert_eq!(cfg.test_fraction, 0.3);
        assert_eq!(cfg.strategies.len(), 3);
        match &cfg.methods[0] {
            RecourseMethod::Wt(w) => {
                assert_eq!(w.lambda, 0.05);
                assert_eq!(w.max_iterations, 1000);
            }
            other => panic!("{other:?}"),
        }
        assert!(serde_json::from_str::<ExperimentConfig>(
            r#"{"dataset": "a", "schema": "b", "attribute_sets": [["x"]], "spilts": 3}"#
        )
        .is_err());
    }

    #[test]
    fn sweep_rejects_duplicates() {
        let cfg = ExperimentConfig::new("d.csv", "s.json", vec![vec!["race".into()]]);
        assert!(matches!(sweep_c(&cfg, &[0.3, 0.3]), Err(Error::Config(_))));
        assert!(matches!(sweep_c(&cfg, &[]), Err(Error::Config(_))));
    }
}
