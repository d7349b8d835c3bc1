use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fairtab::data::{preprocess, split_indices, transform, Dataset, Splits};
use fairtab::experiment::{mode_name, run_sweep, ExperimentConfig, SweepReport};
use fairtab::metrics::{aoc, pareto_frontier, read_points_csv, write_points_csv, TradeoffPoint};
use fairtab::sampler::{SamplerMode, TrainingMode};
use fairtab::theory::{run_spec, TheoryReport, TheorySpec};
use fairtab::trainer::{run_experiment_with, write_representations, AggregateReport, DataSource};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "fairtab", version, about = "Fair contrastive learning on tabular data")]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load, split and preprocess a dataset; write splits, stats and subgroup counts.
    Prepare(Shared),
    /// Train over several seeds and write per-run and aggregate reports.
    Train(Shared),
    /// Run the alpha × mode grid and write trade-off points, frontiers and AOC.
    Sweep(SweepArgs),
    /// Check the information-theoretic claims on a declarative spec.
    VerifyTheory(TheoryArgs),
    /// Summarise a run, sweep or points file.
    Report(ReportArgs),
}

#[derive(Args)]
struct Shared {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Shipped configuration to start from: adult, german or health.
    #[arg(long)]
    dataset: Option<String>,
    /// Dataset CSV; overrides the configuration.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Schema JSON; overrides the configuration.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    /// Runs executed concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    sampler: Option<SamplerArg>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, value_enum)]
    baseline: Option<BaselineArg>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    shared: Shared,
    /// Comma-separated alpha grid; overrides the configuration.
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
}

#[derive(Args)]
struct TheoryArgs {
    /// Spec JSON, or `default` / `broken` for the shipped specs.
    #[arg(default_value = "default")]
    spec: String,
    /// Write the full report as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// A run or sweep directory, `sweep.json`, `aggregate.json` or a points CSV.
    input: PathBuf,
    /// Upper end of the AOC integral for points files.
    #[arg(long)]
    dp_max: Option<f64>,
    /// Write the frontier of a points file here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Supervised,
    SelfSupervised,
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplerArg {
    Fair,
    Counterfactual,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineArg {
    UnfairMlp,
}

/// Exit code 2 for bad input, 1 for failures while running.
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

trait Classify<T> {
    fn config(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn config(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Config(e.into()))
    }
    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Prepare(a) => prepare(&a),
        Command::Train(a) => train(&a),
        Command::Sweep(a) => sweep(&a),
        Command::VerifyTheory(a) => verify_theory(&a),
        Command::Report(a) => report(&a),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Configuration file or shipped config, then flags on top.
fn load_config(a: &Shared) -> anyhow::Result<ExperimentConfig> {
    let mut exp = match (&a.config, &a.dataset) {
        (Some(path), _) => ExperimentConfig::from_path(path)?,
        (None, Some(name)) => ExperimentConfig::builtin(name)?,
        (None, None) => bail!("pass --config PATH or --dataset NAME"),
    };
    if let (Some(_), Some(name)) = (&a.config, &a.dataset) {
        exp.dataset = name.clone();
    }
    if let Some(p) = &a.data {
        exp.data = Some(p.clone());
        exp.synthetic = None;
    }
    if let Some(p) = &a.schema {
        if !p.is_file() {
            bail!("schema file {} does not exist", p.display());
        }
        exp.schema = Some(p.clone());
    }
    if let Some(seed) = a.seed {
        exp.train.seed = seed;
    }
    if let Some(runs) = a.runs {
        exp.runs = runs;
        if let Some(s) = exp.sweep.as_mut() {
            s.runs = Some(runs);
        }
    }
    if let Some(out) = &a.out {
        exp.out = Some(out.clone());
    }
    if let Some(m) = a.mode {
        exp.train.mode = match m {
            ModeArg::Supervised => TrainingMode::Supervised,
            ModeArg::SelfSupervised => TrainingMode::SelfSupervised,
        };
    }
    if let Some(s) = a.sampler {
        exp.train.sampler = match s {
            SamplerArg::Fair => SamplerMode::Fair,
            SamplerArg::Counterfactual => SamplerMode::Counterfactual,
            SamplerArg::None => SamplerMode::None,
        };
    }
    if let Some(alpha) = a.alpha {
        exp.train.alpha = alpha;
    }
    if let Some(e) = a.epochs {
        exp.train.epochs = e;
    }
    if let Some(BaselineArg::UnfairMlp) = a.baseline {
        exp.train = exp.train.unfair_mlp();
    }
    exp.validate()?;
    exp.train.validate()?;
    Ok(exp)
}

fn out_dir(exp: &ExperimentConfig) -> PathBuf {
    exp.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(&exp.dataset))
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
}

fn subgroup_counts(d: &Dataset) -> BTreeMap<String, usize> {
    let idx = d.subgroup_index();
    idx.iter().map(|((y, s), v)| (format!("y={y},s={s}"), v.len())).collect()
}

fn prepare(a: &Shared) -> Result<ExitCode, Failure> {
    let exp = load_config(a).config()?;
    let source = exp.source().config()?;
    let dir = out_dir(&exp);
    create_dir(&dir).runtime()?;
    let seed = exp.train.seed;
    let splits: Splits = match &source {
        DataSource::Raw { table, schema } => {
            let ix = split_indices(&table.y, &table.s, exp.fractions(), seed).runtime()?;
            let (train, stats) = preprocess(&table.select(&ix.train), schema, None).runtime()?;
            stats.save(&dir.join("stats.json")).runtime()?;
            write_json(&dir.join("indices.json"), &BTreeMap::from([("train", &ix.train), ("val", &ix.val), ("test", &ix.test)]))
                .runtime()?;
            Splits {
                val: transform(&table.select(&ix.val), &stats).runtime()?,
                test: transform(&table.select(&ix.test), &stats).runtime()?,
                train,
            }
        }
        DataSource::Prepared(d) => d.split(exp.fractions(), seed).runtime()?,
    };
    let mut counts = BTreeMap::new();
    for (name, d) in [("train", &splits.train), ("val", &splits.val), ("test", &splits.test)] {
        d.write_csv(&dir.join(format!("{name}.csv"))).runtime()?;
        counts.insert(name, subgroup_counts(d));
    }
    write_json(&dir.join("subgroups.json"), &counts).runtime()?;
    println!(
        "{}: {} train / {} val / {} test rows, {} features -> {}",
        exp.dataset,
        splits.train.len(),
        splits.val.len(),
        splits.test.len(),
        splits.train.dim(),
        dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn train(a: &Shared) -> Result<ExitCode, Failure> {
    let exp = load_config(a).config()?;
    let source = exp.source().config()?;
    let dir = out_dir(&exp);
    create_dir(&dir).runtime()?;
    write_json(&dir.join("config.json"), &exp).runtime()?;
    let threshold = exp.train.threshold;
    let agg = run_experiment_with(&source, &exp.train, exp.runs, a.jobs, exp.fractions(), |out| {
        let run = dir.join(format!("seed={}", out.seed));
        std::fs::create_dir_all(&run).map_err(|e| fairtab::Error::io(&run, e))?;
        std::fs::write(run.join("report.json"), serde_json::to_string_pretty(&out.report)?)
            .map_err(|e| fairtab::Error::io(run.join("report.json"), e))?;
        out.model.save(&run.join("model.json"))?;
        write_representations(&out.model, &out.splits.test, threshold, &run.join("representations.csv"))
    })
    .runtime()?;
    agg.save(&dir.join("aggregate.json")).runtime()?;
    print_aggregate(&agg);
    Ok(ExitCode::SUCCESS)
}

fn print_aggregate(agg: &AggregateReport) {
    println!("{} on {} ({} runs)", agg.tag, agg.config.dataset, agg.runs.len());
    for r in &agg.runs {
        println!("  seed {:>3}  acc {:.4}  dp {:.4}", r.seed, r.test.accuracy, r.test.dp);
    }
    println!("mean accuracy {:.4}  max DP {:.4}  mean DP {:.4}", agg.mean_accuracy, agg.max_dp, agg.mean_dp);
}

fn sweep(a: &SweepArgs) -> Result<ExitCode, Failure> {
    let mut exp = load_config(&a.shared).config()?;
    if let Some(alphas) = &a.alphas {
        match exp.sweep.as_mut() {
            Some(s) => s.alphas = alphas.clone(),
            None => return Err(Failure::Config(anyhow!("configuration has no `sweep` block"))),
        }
        exp.validate().config()?;
    }
    if exp.sweep.is_none() {
        return Err(Failure::Config(anyhow!("configuration has no `sweep` block")));
    }
    let source = exp.source().config()?;
    let dir = out_dir(&exp);
    create_dir(&dir).runtime()?;
    let report = run_sweep(&exp, &source, a.shared.jobs, Some(&dir)).runtime()?;
    print_sweep(&report);
    if report.cells.is_empty() {
        return Err(Failure::Runtime(anyhow!("every sweep cell failed")));
    }
    Ok(ExitCode::SUCCESS)
}

fn print_sweep(r: &SweepReport) {
    println!("{} sweep, dp_max {:.4}", r.dataset, r.dp_max);
    if let Some(b) = &r.baseline {
        println!("  unfair MLP          acc {:.4}  max DP {:.4}", b.accuracy, b.dp);
    }
    for c in &r.cells {
        println!(
            "  {:<16} α={:<5} acc {:.4}  max DP {:.4}  AOC {:.4}",
            mode_name(c.mode),
            c.alpha,
            c.mean_accuracy,
            c.max_dp,
            c.aoc
        );
    }
    for m in &r.modes {
        println!("AOC {} {:.4}", mode_name(m.mode), m.aoc);
    }
    for f in &r.failures {
        eprintln!("failed: {f}");
    }
}

fn verify_theory(a: &TheoryArgs) -> Result<ExitCode, Failure> {
    let spec = match a.spec.as_str() {
        "default" | "broken" => TheorySpec::builtin(&a.spec),
        path => TheorySpec::from_path(Path::new(path)),
    }
    .config()?;
    let report = run_spec(&spec).runtime()?;
    print_theory(&report);
    if let Some(out) = &a.out {
        write_json(out, &report).runtime()?;
    }
    Ok(if report.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn print_theory(r: &TheoryReport) {
    for c in &r.checks {
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        match &c.diagnostic {
            Some(d) => println!("{verdict} {}/{}: {d}", c.section, c.name),
            None => println!("{verdict} {}/{}", c.section, c.name),
        }
    }
    let failed = r.failures().count();
    println!("{} checks, {failed} failed", r.checks.len());
}

fn report(a: &ReportArgs) -> Result<ExitCode, Failure> {
    let mut path = a.input.clone();
    if path.is_dir() {
        path = ["sweep.json", "aggregate.json", "points.csv"]
            .iter()
            .map(|f| a.input.join(f))
            .find(|p| p.is_file())
            .ok_or_else(|| Failure::Config(anyhow!("{} holds no sweep.json, aggregate.json or points.csv", a.input.display())))?;
    }
    if path.extension().is_some_and(|e| e == "csv") {
        return report_points(&path, a);
    }
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("cannot read {}", path.display()))
        .config()?;
    if let Ok(r) = serde_json::from_str::<SweepReport>(&text) {
        print_sweep(&r);
    } else if let Ok(r) = serde_json::from_str::<AggregateReport>(&text) {
        print_aggregate(&r);
    } else if let Ok(r) = serde_json::from_str::<TheoryReport>(&text) {
        print_theory(&r);
    } else {
        return Err(Failure::Config(anyhow!("{} is not a sweep, aggregate or theory report", path.display())));
    }
    Ok(ExitCode::SUCCESS)
}

/// Series name of a point tag: everything before `/seed=`.
fn series(tag: &str) -> &str {
    tag.split("/seed=").next().unwrap_or(tag)
}

fn report_points(path: &Path, a: &ReportArgs) -> Result<ExitCode, Failure> {
    let points = read_points_csv(path).config()?;
    if points.is_empty() {
        return Err(Failure::Config(anyhow!("{} holds no points", path.display())));
    }
    let baseline = points.iter().filter(|p| p.tag.starts_with("unfair_mlp")).map(|p| p.dp).fold(f64::NAN, f64::max);
    let dp_max = a
        .dp_max
        .or((!baseline.is_nan()).then_some(baseline))
        .unwrap_or_else(|| points.iter().map(|p| p.dp).fold(0.0, f64::max));
    let mut groups: BTreeMap<&str, Vec<TradeoffPoint>> = BTreeMap::new();
    for p in &points {
        groups.entry(series(&p.tag)).or_default().push(p.clone());
    }
    println!("{} points, dp_max {dp_max:.4}", points.len());
    for (name, pts) in &groups {
        let area = aoc(pts, dp_max).runtime()?;
        println!("  {name:<40} {:>5} points  AOC {area:.4}", pts.len());
    }
    let front = pareto_frontier(&points);
    println!("frontier ({} points):", front.len());
    for p in &front {
        println!("  dp {:.4}  acc {:.4}  {}", p.dp, p.accuracy, p.tag);
    }
    println!("overall AOC {:.4}", aoc(&points, dp_max).runtime()?);
    if let Some(out) = &a.out {
        write_points_csv(&front, out).runtime()?;
    }
    Ok(ExitCode::SUCCESS)
}
