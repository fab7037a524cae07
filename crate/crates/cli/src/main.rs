//! `socialburden` command-line driver.
//!
//! Exit codes: 0 on success, 1 when configuration or input files are
//! rejected, 2 when a run fails after it has started.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use socialburden::data::{infer_schema_from_table, load_csv, ColumnRole, FeatureSchema, RawTable};
use socialburden::experiment::{run_experiment, sweep_c, sweep_csv, ExperimentConfig};
use socialburden::models::Model;
use socialburden::recourse::{eval_cost, growing_spheres, wachter, GsConfig, WtConfig, THRESHOLD};
use socialburden::synth::{generate_paradox, summarize, ParadoxSpec};

const OUT_ENV: &str = "SOCIALBURDEN_OUT";

#[derive(Parser)]
#[command(
    name = "socialburden",
    version,
    about = "Recourse-aware fairness experiments"
)]
struct Cli {
    /// Log more (-v info, -vv debug). RUST_LOG takes precedence.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Infer a feature schema from a CSV file.
    Ingest(IngestArgs),
    /// Run an experiment described by a JSON config.
    Run(RunArgs),
    /// Run MISOB for several values of C.
    SweepC(SweepArgs),
    /// Planted population where per-denied cost parity hides group disparity.
    DemoParadox(ParadoxArgs),
    /// Explain a single row with one recourse method.
    Recourse(RecourseArgs),
}

#[derive(clap::Args)]
struct IngestArgs {
    csv: PathBuf,
    #[arg(long)]
    label: String,
    /// Comma-separated sensitive columns.
    #[arg(long, value_delimiter = ',')]
    sensitive: Vec<String>,
    /// Comma-separated categorical columns; unlisted columns are numeric.
    #[arg(long, value_delimiter = ',')]
    categorical: Vec<String>,
    /// Comma-separated columns to drop.
    #[arg(long, value_delimiter = ',')]
    ignore: Vec<String>,
    /// Comma-separated features recourse may not change.
    #[arg(long, value_delimiter = ',')]
    immutable: Vec<String>,
    /// Schema destination; printed to stdout when absent.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

/// Flags shared by `run` and `sweep-c`; each overrides the config file.
#[derive(clap::Args)]
struct Overrides {
    config: PathBuf,
    #[arg(short, long, env = OUT_ENV)]
    out: Option<PathBuf>,
    #[arg(long)]
    splits: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Overrides {
    fn load(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::from_json_file(&self.config)
            .with_context(|| format!("reading config {}", self.config.display()))?;
        if let Some(out) = &self.out {
            cfg.output_dir = Some(out.clone());
        }
        if let Some(n) = self.splits {
            cfg.splits = n;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(clap::Args)]
struct RunArgs {
    #[command(flatten)]
    common: Overrides,
}

#[derive(clap::Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Overrides,
    /// Comma-separated values of C.
    #[arg(long = "c", value_delimiter = ',', required = true)]
    c_values: Vec<f64>,
}

#[derive(clap::Args)]
struct ParadoxArgs {
    /// JSON spec; the default two-group population when absent.
    spec: Option<PathBuf>,
    /// Per-group CSV destination.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Gs,
    Wt,
}

#[derive(clap::Args)]
struct RecourseArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    /// Row of the encoded dataset (rows with missing values are skipped).
    #[arg(long)]
    row: usize,
    #[arg(long, value_enum, default_value = "wt")]
    method: MethodArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Failure class, mapped to the exit code.
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

fn config<T>(r: anyhow::Result<T>) -> Result<T, Failure> {
    r.map_err(Failure::Config)
}

/// Runtime failure, unless the library rejected its configuration.
fn runtime<T>(r: anyhow::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| match e.downcast_ref::<socialburden::Error>() {
        Some(socialburden::Error::Config(_) | socialburden::Error::Schema(_)) => Failure::Config(e),
        _ => Failure::Runtime(e),
    })
}

fn write_or_print(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn ingest(args: &IngestArgs) -> Result<(), Failure> {
    let raw = config(
        RawTable::read(&args.csv).with_context(|| format!("reading {}", args.csv.display())),
    )?;
    let mut roles = BTreeMap::new();
    for col in &raw.header {
        let role = if *col == args.label {
            ColumnRole::Label
        } else if args.ignore.contains(col) {
            ColumnRole::Ignore
        } else if args.sensitive.contains(col) {
            ColumnRole::Sensitive
        } else if args.categorical.contains(col) {
            ColumnRole::Categorical
        } else {
            ColumnRole::Numeric
        };
        roles.insert(col.clone(), role);
    }
    for named in args
        .sensitive
        .iter()
        .chain(&args.categorical)
        .chain(&args.ignore)
        .chain(&args.immutable)
    {
        if !raw.header.contains(named) {
            return Err(Failure::Config(anyhow::anyhow!(
                "no column named {named:?}"
            )));
        }
    }
    let mutability = args.immutable.iter().map(|c| (c.clone(), false)).collect();
    let schema = config(infer_schema_from_table(&raw, &roles, &mutability).map_err(Into::into))?;
    let text = config(serde_json::to_string_pretty(&schema).map_err(Into::into))? + "\n";
    runtime(write_or_print(args.out.as_deref(), &text))?;
    log::info!(
        "{} features, {} rows scanned",
        schema.features.len(),
        raw.len()
    );
    Ok(())
}

fn run(args: &RunArgs) -> Result<(), Failure> {
    let cfg = config(args.common.load())?;
    let outcome = runtime(run_experiment(&cfg).map_err(Into::into))?;
    print!("{}", outcome.table.to_csv());
    if let Some(out) = &cfg.output_dir {
        log::info!("results written to {}", out.display());
    }
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<(), Failure> {
    let cfg = config(args.common.load())?;
    let tables = runtime(sweep_c(&cfg, &args.c_values).map_err(Into::into))?;
    print!("{}", sweep_csv(&tables));
    Ok(())
}

fn demo_paradox(args: &ParadoxArgs) -> Result<(), Failure> {
    let spec = match &args.spec {
        Some(p) => config(
            ParadoxSpec::from_json_file(p).with_context(|| format!("reading {}", p.display())),
        )?,
        None => ParadoxSpec::default(),
    };
    let summary = runtime(
        (|| {
            let s = summarize(&generate_paradox(&spec)?)?;
            Ok::<_, socialburden::Error>(s)
        })()
        .map_err(Into::into),
    )?;
    println!(
        "{:<8} {:>6} {:>8} {:>16} {:>12}",
        "group", "n", "AR", "cost | denied", "group cost"
    );
    for r in &summary.rows {
        println!(
            "{:<8} {:>6} {:>8.3} {:>16.4} {:>12.4}",
            r.group, r.n, r.acceptance_rate, r.mean_cost_denied, r.group_cost
        );
    }
    println!(
        "relative gap: {:.1}% among denied, {:.1}% over whole groups",
        100.0 * summary.conventional_relative_gap,
        100.0 * summary.holistic_relative_gap
    );
    if let Some(out) = &args.out {
        let file = runtime(
            std::fs::File::create(out).with_context(|| format!("creating {}", out.display())),
        )?;
        runtime(summary.write_csv(file).map_err(Into::into))?;
    }
    Ok(())
}

fn explain(args: &RecourseArgs) -> Result<(), Failure> {
    let (model, schema, ds) = config((|| {
        let model = Model::load(&args.model)
            .with_context(|| format!("loading {}", args.model.display()))?;
        let schema = FeatureSchema::from_json_file(&args.schema)?;
        let ds = load_csv(&args.data, &schema)?;
        if args.row >= ds.len() {
            bail!("row {} out of range ({} rows)", args.row, ds.len());
        }
        Ok((model, schema, ds))
    })())?;
    let x = ds.x().row(args.row).to_owned();
    let mask = schema.mutability_mask();
    let res = runtime(
        match args.method {
            MethodArg::Gs => growing_spheres(
                &model,
                x.view(),
                &GsConfig {
                    seed: args.seed,
                    ..GsConfig::default()
                },
                &mask,
            ),
            MethodArg::Wt => wachter(&model, x.view(), &WtConfig::default(), &mask),
        }
        .map_err(Into::into),
    )?;
    let names = schema.encoded_names();
    let changes: Vec<serde_json::Value> = (0..x.len())
        .filter(|&j| res.counterfactual[j] != x[j])
        .map(|j| {
            let feature = schema.features.iter().find(|f| f.name == names[j]);
            serde_json::json!({
                "feature": names[j],
                "from": x[j],
                "to": res.counterfactual[j],
                "from_raw": feature.and_then(|f| f.decode_numeric(x[j])),
                "to_raw": feature.and_then(|f| f.decode_numeric(res.counterfactual[j])),
            })
        })
        .collect();
    let report = runtime((|| {
        Ok::<_, anyhow::Error>(serde_json::json!({
            "row": args.row,
            "method": res.method.as_str(),
            "probability_before": model.predict_proba(x.view())?,
            "probability_after": model.predict_proba(res.counterfactual.view())?,
            "needed": model.predict(x.view(), THRESHOLD)? == 0,
            "success": res.success,
            "cost": eval_cost(x.view(), res.counterfactual.view())?,
            "iterations": res.iterations,
            "changes": changes,
        }))
    })())?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report).map_err(|e| Failure::Runtime(e.into()))?
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match &cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Run(a) => run(a),
        Command::SweepC(a) => sweep(a),
        Command::DemoParadox(a) => demo_paradox(a),
        Command::Recourse(a) => explain(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
