//! File-based experiment configuration and the α sweep.

use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{load_csv, synth_biased, Schema};
use crate::error::{Error, Result};
use crate::metrics::{aoc, evaluate, pareto_frontier, write_points_csv, TradeoffPoint};
use crate::sampler::TrainingMode;
use crate::trainer::{run_experiment_with, AggregateReport, DataSource, RunOutput, TrainConfig};

pub const DATA_DIR_ENV: &str = "FAIRTAB_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n: usize,
    #[serde(default = "eight")]
    pub d: usize,
    pub bias_strength: f64,
    #[serde(default = "base_rate")]
    pub base_rate: f64,
    #[serde(default)]
    pub seed: u64,
}

fn eight() -> usize {
    8
}
fn base_rate() -> f64 {
    0.4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub alphas: Vec<f64>,
    #[serde(default = "both_modes")]
    pub modes: Vec<TrainingMode>,
    /// Decision thresholds applied to every trained model; each gives one
    /// trade-off point.
    #[serde(default = "default_thresholds")]
    pub thresholds: Vec<f64>,
    /// Upper end of the AOC integral; defaults to the unfair baseline's max DP.
    #[serde(default)]
    pub dp_max: Option<f64>,
    /// Seeds per grid cell; defaults to the experiment's `runs`.
    #[serde(default)]
    pub runs: Option<usize>,
}

fn both_modes() -> Vec<TrainingMode> {
    vec![TrainingMode::Supervised, TrainingMode::SelfSupervised]
}

pub fn default_thresholds() -> Vec<f64> {
    (1..20).map(|i| i as f64 * 0.05).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `adult`, `german`, `health` or `synthetic`.
    pub dataset: String,
    /// CSV file; relative paths resolve against the config file, then the
    /// data directory.
    #[serde(default)]
    pub data: Option<PathBuf>,
    /// Schema JSON; the built-in schema of `dataset` when absent.
    #[serde(default)]
    pub schema: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<SynthSpec>,
    pub train: TrainConfig,
    #[serde(default = "five")]
    pub runs: usize,
    #[serde(default = "default_split")]
    pub split: [f64; 3],
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Directory of the file this config was read from.
    #[serde(skip)]
    pub origin: Option<PathBuf>,
}

fn five() -> usize {
    5
}
fn default_split() -> [f64; 3] {
    [0.7, 0.15, 0.15]
}

const ADULT: &str = include_str!("../assets/configs/adult.json");
const GERMAN: &str = include_str!("../assets/configs/german.json");
const HEALTH: &str = include_str!("../assets/configs/health.json");

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
        cfg.origin = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    /// Shipped configuration for `adult`, `german` or `health`.
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "adult" => Self::from_json(ADULT),
            "german" => Self::from_json(GERMAN),
            "health" => Self::from_json(HEALTH),
            other => Err(Error::InvalidArgument(format!("no shipped configuration `{other}`"))),
        }
    }

    pub fn fractions(&self) -> (f64, f64, f64) {
        (self.split[0], self.split[1], self.split[2])
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.runs == 0 {
            return Err(Error::InvalidArgument("runs must be at least 1".into()));
        }
        if self.dataset == "synthetic" && self.synthetic.is_none() {
            return Err(Error::InvalidArgument("dataset `synthetic` needs a `synthetic` block".into()));
        }
        if let Some(s) = &self.sweep {
            if s.alphas.is_empty() || s.modes.is_empty() || s.thresholds.is_empty() {
                return Err(Error::InvalidArgument("sweep grids must be non-empty".into()));
            }
            if s.alphas.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
                return Err(Error::InvalidArgument("sweep alphas must be finite and non-negative".into()));
            }
            if s.thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
                return Err(Error::InvalidArgument("sweep thresholds must lie in [0, 1]".into()));
            }
            if s.runs == Some(0) {
                return Err(Error::InvalidArgument("sweep runs must be at least 1".into()));
            }
        }
        Ok(())
    }

    /// Candidate locations of the dataset CSV, most specific first.
    pub fn data_candidates(&self) -> Vec<PathBuf> {
        let rel = self.data.clone().unwrap_or_else(|| PathBuf::from(format!("{}.csv", self.dataset)));
        if rel.is_absolute() {
            return vec![rel];
        }
        let mut out = Vec::new();
        if let Some(o) = &self.origin {
            out.push(o.join(&rel));
        }
        out.push(rel.clone());
        if let Some(dir) = std::env::var_os(DATA_DIR_ENV) {
            out.push(PathBuf::from(&dir).join(&rel));
            if let Some(name) = rel.file_name() {
                out.push(PathBuf::from(dir).join(name));
            }
        }
        out.push(PathBuf::from("data").join(&rel));
        out
    }

    pub fn schema(&self) -> Result<Schema> {
        match &self.schema {
            Some(p) => {
                let path = match (&self.origin, p.is_absolute()) {
                    (Some(o), false) if o.join(p).exists() => o.join(p),
                    _ => p.clone(),
                };
                Schema::from_path(&path)
            }
            None => Schema::builtin(&self.dataset)
                .ok_or_else(|| Error::Schema(format!("no built-in schema for `{}`; set `schema`", self.dataset))),
        }
    }

    pub fn source(&self) -> Result<DataSource> {
        if let Some(s) = &self.synthetic {
            return Ok(DataSource::Prepared(synth_biased(s.n, s.d, s.bias_strength, s.base_rate, s.seed)?));
        }
        let schema = self.schema()?;
        let candidates = self.data_candidates();
        let path = candidates.iter().find(|p| p.is_file()).ok_or_else(|| {
            Error::io(
                &candidates[0],
                std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!(
                        "dataset file not found (tried {}); set {DATA_DIR_ENV} or `data`",
                        candidates.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", ")
                    ),
                ),
            )
        })?;
        Ok(DataSource::Raw {
            table: load_csv(path, &schema)?,
            schema,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub mode: TrainingMode,
    pub alpha: f64,
    pub mean_accuracy: f64,
    pub max_dp: f64,
    /// AOC over every seed × threshold point of this cell.
    pub aoc: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeAoc {
    pub mode: TrainingMode,
    /// AOC over the cells' summary points (max DP, mean accuracy).
    pub aoc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub dataset: String,
    pub dp_max: f64,
    pub baseline: Option<TradeoffPoint>,
    pub cells: Vec<SweepCell>,
    pub modes: Vec<ModeAoc>,
    pub failures: Vec<String>,
}

impl SweepReport {
    pub fn cell(&self, mode: TrainingMode, alpha: f64) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.mode == mode && c.alpha == alpha)
    }

    /// `max − min` of the cell AOCs of `mode` over `alphas`.
    pub fn aoc_range(&self, mode: TrainingMode, alphas: &[f64]) -> Option<f64> {
        let v: Vec<f64> = alphas.iter().map(|a| self.cell(mode, *a).map(|c| c.aoc)).collect::<Option<_>>()?;
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(*x), h.max(*x)));
        Some(hi - lo)
    }
}

pub fn mode_name(m: TrainingMode) -> &'static str {
    match m {
        TrainingMode::Supervised => "supervised",
        TrainingMode::SelfSupervised => "self_supervised",
    }
}

/// Runs `cfg` over `runs` seeds and returns the aggregate together with one
/// test-split trade-off point per seed and threshold.
pub fn run_with_thresholds(
    source: &DataSource,
    cfg: &TrainConfig,
    runs: usize,
    fractions: (f64, f64, f64),
    thresholds: &[f64],
) -> Result<(AggregateReport, Vec<TradeoffPoint>)> {
    let points = Mutex::new(Vec::new());
    let agg = run_with_thresholds_inner(source, cfg, runs, fractions, thresholds, &points)?;
    let mut pts = points.into_inner().expect("no panics while collecting");
    pts.sort_by(|a, b| a.tag.cmp(&b.tag));
    Ok((agg, pts))
}

fn run_with_thresholds_inner(
    source: &DataSource,
    cfg: &TrainConfig,
    runs: usize,
    fractions: (f64, f64, f64),
    thresholds: &[f64],
    points: &Mutex<Vec<TradeoffPoint>>,
) -> Result<AggregateReport> {
    let tag = cfg.tag();
    run_experiment_with(source, cfg, runs, 1, fractions, |out: &RunOutput| {
        let test = &out.splits.test;
        let probs = out.model.predict_proba(test.x.view())?;
        let mut local = Vec::with_capacity(thresholds.len());
        for &t in thresholds {
            let y_hat: Vec<u8> = probs.iter().map(|&p| u8::from(p >= t)).collect();
            let r = evaluate(&test.y, &y_hat, &test.s)?;
            local.push(TradeoffPoint::new(r.dp, r.accuracy, format!("{tag}/seed={}/t={t:.2}", out.seed)));
        }
        points.lock().expect("no panics while collecting").extend(local);
        Ok(())
    })
}

/// Runs the α × mode grid plus the unfair baseline. Failed cells are recorded
/// and skipped. Writes CSV, JSON and plot series under `out` when given.
pub fn run_sweep(exp: &ExperimentConfig, source: &DataSource, jobs: usize, out: Option<&Path>) -> Result<SweepReport> {
    let spec = exp
        .sweep
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("configuration has no `sweep` block".into()))?;
    exp.validate()?;
    let runs = spec.runs.unwrap_or(exp.runs);
    let fractions = exp.fractions();

    let base_cfg = exp.train.unfair_mlp();
    let (base_agg, base_points) = run_with_thresholds(source, &base_cfg, runs, fractions, &spec.thresholds)?;
    let baseline = TradeoffPoint::new(base_agg.max_dp, base_agg.mean_accuracy, "unfair_mlp");
    let dp_max = match spec.dp_max {
        Some(d) => d,
        None if base_agg.max_dp > 0.0 => base_agg.max_dp,
        None => return Err(Error::Infeasible("the unfair baseline has zero DP; set sweep.dp_max".into())),
    };

    let grid: Vec<(TrainingMode, f64)> =
        spec.modes.iter().flat_map(|m| spec.alphas.iter().map(move |a| (*m, *a))).collect();
    let run_cell = |&(mode, alpha): &(TrainingMode, f64)| {
        let cfg = TrainConfig {
            mode,
            alpha,
            ..exp.train.clone()
        };
        run_with_thresholds(source, &cfg, runs, fractions, &spec.thresholds).map(|r| (mode, alpha, r))
    };
    let results: Vec<_> = if jobs <= 1 {
        grid.iter().map(run_cell).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| grid.par_iter().map(run_cell).collect())
    };

    let mut cells = Vec::new();
    let mut all_points = base_points.clone();
    let mut summaries: Vec<(TrainingMode, f64, TradeoffPoint, Vec<TradeoffPoint>)> = Vec::new();
    let mut failures = Vec::new();
    for ((mode, alpha), r) in grid.iter().zip(results) {
        match r {
            Ok((_, _, (agg, pts))) => {
                cells.push(SweepCell {
                    mode: *mode,
                    alpha: *alpha,
                    mean_accuracy: agg.mean_accuracy,
                    max_dp: agg.max_dp,
                    aoc: aoc(&pts, dp_max)?,
                    points: pts.len(),
                });
                let summary = TradeoffPoint::new(agg.max_dp, agg.mean_accuracy, agg.tag.clone());
                all_points.extend(pts.iter().cloned());
                summaries.push((*mode, *alpha, summary, pts));
            }
            Err(e) => {
                log::error!("sweep cell {}/alpha={alpha} failed: {e}", mode_name(*mode));
                failures.push(format!("{}/alpha={alpha}: {e}", mode_name(*mode)));
            }
        }
    }
    let mut modes = Vec::new();
    for m in &spec.modes {
        let pts: Vec<TradeoffPoint> = summaries.iter().filter(|s| s.0 == *m).map(|s| s.2.clone()).collect();
        if !pts.is_empty() {
            modes.push(ModeAoc {
                mode: *m,
                aoc: aoc(&pts, dp_max)?,
            });
        }
    }
    let report = SweepReport {
        dataset: exp.dataset.clone(),
        dp_max,
        baseline: Some(baseline),
        cells,
        modes,
        failures,
    };
    if let Some(dir) = out {
        write_sweep(dir, &report, &all_points, &base_points, &summaries)?;
    }
    Ok(report)
}

fn write_series(path: &Path, rows: impl IntoIterator<Item = (f64, f64)>) -> Result<()> {
    let text: String = rows.into_iter().map(|(a, b)| format!("{a} {b}\n")).collect();
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

const PLOT_README: &str = "\
Plot series, one `x y` pair per line, whitespace separated.

tradeoff_<mode>.txt      x = max DP over seeds, y = mean accuracy; one line per alpha (trade-off plot)
frontier_<mode>.txt      Pareto frontier of those summary points, sorted by DP
points_<mode>_alpha=<a>.txt
                         x = DP, y = accuracy for every seed and decision threshold of one cell
baseline.txt             the unfair MLP: x = DP, y = accuracy per seed and threshold
aoc_<mode>.txt           x = alpha, y = AOC of the cell (ablation plot)

Lower DP (left) and higher accuracy (up) are better. AOC integrates the
best-accuracy-so-far step curve over [0, dp_max] and divides by dp_max;
dp_max is recorded in ../sweep.json.
";

fn write_sweep(
    dir: &Path,
    report: &SweepReport,
    all_points: &[TradeoffPoint],
    base_points: &[TradeoffPoint],
    summaries: &[(TrainingMode, f64, TradeoffPoint, Vec<TradeoffPoint>)],
) -> Result<()> {
    let plot = dir.join("plot");
    std::fs::create_dir_all(&plot).map_err(|e| Error::io(&plot, e))?;
    write_points_csv(all_points, &dir.join("points.csv"))?;
    let summary_pts: Vec<TradeoffPoint> = summaries.iter().map(|s| s.2.clone()).collect();
    write_points_csv(&summary_pts, &dir.join("summary.csv"))?;
    write_points_csv(&pareto_frontier(&summary_pts), &dir.join("frontier.csv"))?;
    let json = dir.join("sweep.json");
    std::fs::write(&json, serde_json::to_string_pretty(report)?).map_err(|e| Error::io(&json, e))?;

    for (mode, alpha, _, pts) in summaries {
        let cell_dir = dir.join("cells").join(format!("{}_alpha={alpha}", mode_name(*mode)));
        std::fs::create_dir_all(&cell_dir).map_err(|e| Error::io(&cell_dir, e))?;
        write_points_csv(pts, &cell_dir.join("points.csv"))?;
        if let Some(cell) = report.cell(*mode, *alpha) {
            let path = cell_dir.join("cell.json");
            std::fs::write(&path, serde_json::to_string_pretty(cell)?).map_err(|e| Error::io(&path, e))?;
        }
    }
    write_series(&plot.join("baseline.txt"), base_points.iter().map(|p| (p.dp, p.accuracy)))?;
    for m in report.modes.iter().map(|m| m.mode) {
        let name = mode_name(m);
        let mine: Vec<_> = summaries.iter().filter(|s| s.0 == m).collect();
        let pts: Vec<TradeoffPoint> = mine.iter().map(|s| s.2.clone()).collect();
        write_series(&plot.join(format!("tradeoff_{name}.txt")), pts.iter().map(|p| (p.dp, p.accuracy)))?;
        write_series(
            &plot.join(format!("frontier_{name}.txt")),
            pareto_frontier(&pts).iter().map(|p| (p.dp, p.accuracy)),
        )?;
        for s in &mine {
            write_series(
                &plot.join(format!("points_{name}_alpha={}.txt", s.1)),
                s.3.iter().map(|p| (p.dp, p.accuracy)),
            )?;
        }
        write_series(
            &plot.join(format!("aoc_{name}.txt")),
            report.cells.iter().filter(|c| c.mode == m).map(|c| (c.alpha, c.aoc)),
        )?;
    }
    let readme = plot.join("README.md");
    std::fs::write(&readme, PLOT_README).map_err(|e| Error::io(&readme, e))
}
