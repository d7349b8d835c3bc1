//! End-to-end training of encoder + classifier, evaluation and multi-seed runs.

use std::borrow::Cow;
use std::path::Path;
use std::time::Instant;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{preprocess, split_indices, transform, Dataset, RawTable, Schema, Splits};
use crate::error::{Error, Result};
use crate::losses::{bce, info_nce, sup_con_anchored, Similarity};
use crate::metrics::{evaluate, FairnessReport};
use crate::nn::{sigmoid, Activation, AdamState, Mlp, MlpSnapshot, Rng};
use crate::sampler::{
    assign_positives, counterfactual_augment, estimate_pi, make_batches, negatives_mask, Batch, PairPlan, SamplerMode,
    TrainingMode,
};

/// Contrastive objective in supervised mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupervisedLoss {
    /// InfoNCE on the sampler's positive, negatives drawn from the other class.
    PairedNegatives,
    /// Every same-label entry of the stacked batch is a positive.
    #[default]
    SupCon,
}

/// Rows of the stacked batch that the cross-entropy head is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadRows {
    /// The `N` anchors only.
    Anchors,
    /// Anchors and their sampled positives, `2N` rows.
    #[default]
    Stacked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub dataset: String,
    /// Encoder layer widths after the input; the last is the representation size.
    pub encoder: Vec<usize>,
    /// Classifier hidden widths; a single sigmoid output follows.
    pub classifier: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub tau: f64,
    pub alpha: f64,
    pub mode: TrainingMode,
    pub sampler: SamplerMode,
    #[serde(default)]
    pub supervised_loss: SupervisedLoss,
    #[serde(default = "default_similarity")]
    pub similarity: Similarity,
    #[serde(default = "one")]
    pub contrastive_weight: f64,
    #[serde(default)]
    pub head_rows: HeadRows,
    /// Pretrain the encoder contrastively, then fit the head on frozen features.
    #[serde(default)]
    pub two_stage: bool,
    #[serde(default = "half")]
    pub threshold: f64,
    pub seed: u64,
}

fn default_similarity() -> Similarity {
    Similarity::Cosine
}
fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}

impl TrainConfig {
    /// Published hyperparameters for `adult`, `german` and `health`.
    pub fn for_dataset(name: &str) -> Result<Self> {
        let (encoder, batch_size) = match name {
            "adult" => (vec![64, 64, 64], 256),
            "health" => (vec![128, 64, 64], 256),
            "german" => (vec![32, 32, 32], 64),
            other => return Err(Error::InvalidArgument(format!("no default configuration for `{other}`"))),
        };
        Ok(Self {
            dataset: name.to_string(),
            encoder,
            classifier: vec![16],
            epochs: 100,
            batch_size,
            lr: 1e-3,
            tau: 1.0,
            alpha: 1.0,
            mode: TrainingMode::Supervised,
            sampler: SamplerMode::Fair,
            supervised_loss: SupervisedLoss::SupCon,
            similarity: Similarity::Cosine,
            contrastive_weight: 1.0,
            head_rows: HeadRows::Stacked,
            two_stage: false,
            threshold: 0.5,
            seed: 0,
        })
    }

    /// Same architecture and optimiser, trained on cross-entropy alone.
    pub fn unfair_mlp(&self) -> Self {
        Self {
            alpha: 1.0,
            contrastive_weight: 0.0,
            sampler: SamplerMode::None,
            two_stage: false,
            ..self.clone()
        }
    }

    pub fn is_baseline(&self) -> bool {
        self.contrastive_weight == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size < 2 {
            return bad(format!("batch size must be at least 2, got {}", self.batch_size));
        }
        if self.encoder.is_empty() || self.encoder.contains(&0) || self.classifier.contains(&0) {
            return bad("layer widths must be positive and the encoder non-empty".into());
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return bad(format!("temperature must be positive, got {}", self.tau));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return bad(format!("alpha must be non-negative, got {}", self.alpha));
        }
        if !(self.contrastive_weight >= 0.0) || !self.contrastive_weight.is_finite() {
            return bad(format!("contrastive weight must be non-negative, got {}", self.contrastive_weight));
        }
        if self.alpha == 0.0 && self.contrastive_weight == 0.0 {
            return bad("alpha and contrastive weight are both zero; nothing to train".into());
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("threshold must lie in [0, 1], got {}", self.threshold));
        }
        if self.two_stage && self.contrastive_weight == 0.0 {
            return bad("two-stage training needs a contrastive objective".into());
        }
        Ok(())
    }

    pub fn tag(&self) -> String {
        if self.is_baseline() {
            return "unfair_mlp".into();
        }
        let mode = match self.mode {
            TrainingMode::Supervised => "supervised",
            TrainingMode::SelfSupervised => "self_supervised",
        };
        let sampler = match self.sampler {
            SamplerMode::Fair => "fair",
            SamplerMode::Counterfactual => "counterfactual",
            SamplerMode::None => "none",
        };
        format!("{mode}/{sampler}/alpha={}", self.alpha)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub encoder: Mlp,
    pub classifier: Mlp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub encoder: MlpSnapshot,
    pub classifier: MlpSnapshot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Vec<u8>,
    pub probs: Array1<f64>,
}

impl Model {
    pub fn new(input_dim: usize, cfg: &TrainConfig, rng: &mut Rng) -> Result<Self> {
        let mut enc = vec![input_dim];
        enc.extend(&cfg.encoder);
        let mut cls = vec![*enc.last().unwrap()];
        cls.extend(&cfg.classifier);
        cls.push(1);
        Ok(Self {
            encoder: Mlp::new(&enc, Activation::Relu, Activation::Identity, rng)?,
            classifier: Mlp::new(&cls, Activation::Relu, Activation::Identity, rng)?,
        })
    }

    pub fn encode(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.encoder.infer(x)
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        let z = self.encode(x)?;
        Ok(self.classifier.infer(z.view())?.column(0).mapv(sigmoid))
    }

    /// `ŷ = 1` iff `p ≥ threshold`.
    pub fn predict(&self, x: ArrayView2<'_, f64>, threshold: f64) -> Result<Prediction> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::InvalidArgument(format!("threshold must lie in [0, 1], got {threshold}")));
        }
        let probs = self.predict_proba(x)?;
        Ok(Prediction {
            labels: probs.iter().map(|&p| u8::from(p >= threshold)).collect(),
            probs,
        })
    }

    pub fn snapshot(&self) -> ModelSnapshot {
        ModelSnapshot {
            encoder: self.encoder.snapshot(),
            classifier: self.classifier.snapshot(),
        }
    }

    pub fn from_snapshot(s: &ModelSnapshot) -> Result<Self> {
        Ok(Self {
            encoder: Mlp::from_snapshot(&s.encoder)?,
            classifier: Mlp::from_snapshot(&s.classifier)?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(&self.snapshot())?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_snapshot(&serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    /// 1 for joint or encoder training, 2 for the head-only stage.
    pub stage: u8,
    pub total: f64,
    pub bce: f64,
    pub contrastive: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tag: String,
    pub dataset: String,
    pub seed: u64,
    pub n_train: usize,
    /// Share of favourable training samples that are privileged.
    pub train_pi: Option<f64>,
    pub losses: Vec<EpochLoss>,
    pub val: FairnessReport,
    pub test: FairnessReport,
    pub wall_time_s: f64,
}

impl RunReport {
    pub fn first_loss(&self) -> Option<f64> {
        self.losses.first().map(|l| l.total)
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.losses.iter().rev().find(|l| l.stage == self.losses[0].stage).map(|l| l.total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub tag: String,
    pub config: TrainConfig,
    pub mean_accuracy: f64,
    pub max_dp: f64,
    pub mean_dp: f64,
    pub runs: Vec<RunReport>,
}

impl AggregateReport {
    pub fn from_runs(config: &TrainConfig, runs: Vec<RunReport>) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::Empty("aggregate of no runs".into()));
        }
        let k = runs.len() as f64;
        Ok(Self {
            tag: config.tag(),
            config: config.clone(),
            mean_accuracy: runs.iter().map(|r| r.test.accuracy).sum::<f64>() / k,
            max_dp: runs.iter().map(|r| r.test.dp).fold(f64::NEG_INFINITY, f64::max),
            mean_dp: runs.iter().map(|r| r.test.dp).sum::<f64>() / k,
            runs,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Default)]
struct StepLoss {
    total: f64,
    bce: f64,
    contrastive: f64,
}

struct Trainer<'a> {
    cfg: &'a TrainConfig,
    model: Model,
    adam_enc: AdamState,
    adam_cls: AdamState,
}

impl Trainer<'_> {
    fn contrastive(&self, z: &Array2<f64>, batch: &Batch) -> Result<(f64, Array2<f64>)> {
        let n = batch.len();
        let (a, p) = (z.slice(s![..n, ..]), z.slice(s![n.., ..]));
        let lv = match (self.cfg.mode, self.cfg.supervised_loss) {
            (TrainingMode::Supervised, SupervisedLoss::SupCon) => {
                sup_con_anchored(z.view(), n, &batch.stacked_labels(), self.cfg.tau, self.cfg.similarity)?
            }
            (mode, _) => info_nce(a, p, negatives_mask(batch, mode).view(), self.cfg.tau, self.cfg.similarity)?,
        };
        Ok((lv.value, lv.grad))
    }

    /// One optimiser step on `batch`. `alpha` weights cross-entropy; a zero
    /// weight skips the head entirely. The encoder is frozen when
    /// `update_encoder` is false.
    fn step(&mut self, data: &Dataset, batch: &Batch, alpha: f64, weight: f64, update_encoder: bool) -> Result<StepLoss> {
        let n = batch.len();
        let use_pairs = weight > 0.0;
        let rows: Cow<'_, [usize]> = if use_pairs {
            Cow::Owned(batch.anchors.iter().chain(&batch.positives).copied().collect())
        } else {
            Cow::Borrowed(&batch.anchors)
        };
        let xb = data.x.select(Axis(0), &rows);
        let pass = self.model.encoder.forward(xb.view())?;
        let z = pass.output();
        let mut grad_z = Array2::<f64>::zeros(z.dim());
        let mut out = StepLoss::default();

        if use_pairs {
            let (value, grad) = self.contrastive(z, batch)?;
            out.contrastive = value;
            out.total += weight * value;
            grad_z.scaled_add(weight, &grad);
        }
        if alpha > 0.0 {
            let stacked = use_pairs && self.cfg.head_rows == HeadRows::Stacked;
            let (rows, labels) = if stacked {
                (z.nrows(), Cow::Owned(batch.stacked_labels()))
            } else {
                (n, Cow::Borrowed(&batch.y[..]))
            };
            let cls_pass = self.model.classifier.forward(z.slice(s![..rows, ..]))?;
            let probs = cls_pass.output().column(0).mapv(sigmoid);
            let lv = bce(probs.view(), &labels)?;
            out.bce = lv.value;
            out.total += alpha * lv.value;
            let upstream = (lv.grad * alpha).insert_axis(Axis(1));
            let g = self.model.classifier.backward(&cls_pass, &upstream)?;
            self.adam_cls.step(&mut self.model.classifier.layers, &g.layers, self.cfg.lr)?;
            grad_z.slice_mut(s![..rows, ..]).scaled_add(1.0, &g.input);
        }
        if !out.total.is_finite() {
            return Err(Error::NonFinite("training loss".into()));
        }
        if update_encoder {
            let g = self.model.encoder.backward(&pass, &grad_z)?;
            self.adam_enc.step(&mut self.model.encoder.layers, &g.layers, self.cfg.lr)?;
        }
        Ok(out)
    }

    fn epoch(
        &mut self,
        data: &Dataset,
        plan: &PairPlan,
        rng: &mut Rng,
        epoch: usize,
        stage: u8,
        alpha: f64,
        weight: f64,
        update_encoder: bool,
    ) -> Result<EpochLoss> {
        let batches = make_batches(plan, data, self.cfg.batch_size, rng)?;
        let (mut sum, mut count) = (StepLoss::default(), 0usize);
        for (b, batch) in batches.iter().enumerate() {
            let l = self.step(data, batch, alpha, weight, update_encoder).map_err(|e| Error::Diverged {
                epoch,
                batch: b,
                detail: e.to_string(),
            })?;
            let k = batch.len() as f64;
            sum.total += k * l.total;
            sum.bce += k * l.bce;
            sum.contrastive += k * l.contrastive;
            count += batch.len();
        }
        let k = count.max(1) as f64;
        Ok(EpochLoss {
            epoch,
            stage,
            total: sum.total / k,
            bce: sum.bce / k,
            contrastive: sum.contrastive / k,
        })
    }
}

const STREAM_INIT: u64 = 1;
const STREAM_PLAN: u64 = 1 << 32;
const STREAM_BATCH: u64 = 2 << 32;

/// Trains on `splits.train` and evaluates on validation and test.
pub fn train(splits: &Splits, cfg: &TrainConfig) -> Result<(Model, RunReport)> {
    cfg.validate()?;
    let start = Instant::now();
    let train_set: Cow<'_, Dataset> = if cfg.sampler == SamplerMode::Counterfactual && !cfg.is_baseline() {
        Cow::Owned(counterfactual_augment(&splits.train)?)
    } else {
        Cow::Borrowed(&splits.train)
    };
    let subgroups = train_set.subgroup_index();
    if cfg.sampler == SamplerMode::Fair && !cfg.is_baseline() {
        subgroups.require_all("the training split")?;
    }
    let root = Rng::new(cfg.seed);
    let model = Model::new(train_set.dim(), cfg, &mut root.derive(STREAM_INIT))?;
    let mut t = Trainer {
        cfg,
        adam_enc: AdamState::new(&model.encoder.layers),
        adam_cls: AdamState::new(&model.classifier.layers),
        model,
    };
    let n = train_set.len();
    let cycle = PairPlan {
        positive_of: (0..n).map(|i| (i + 1) % n).collect(),
        seed: cfg.seed,
        mode: SamplerMode::None,
    };
    let mut losses = Vec::with_capacity(cfg.epochs * (1 + usize::from(cfg.two_stage)));
    let stage1_alpha = if cfg.two_stage { 0.0 } else { cfg.alpha };
    for e in 0..cfg.epochs {
        let mut batch_rng = root.derive(STREAM_BATCH + e as u64);
        let loss = if cfg.is_baseline() {
            t.epoch(&train_set, &cycle, &mut batch_rng, e, 1, cfg.alpha, 0.0, true)?
        } else {
            let plan = assign_positives(&train_set, &subgroups, cfg.sampler, &mut root.derive(STREAM_PLAN + e as u64))?;
            t.epoch(&train_set, &plan, &mut batch_rng, e, 1, stage1_alpha, cfg.contrastive_weight, true)?
        };
        log::debug!("{} seed {} epoch {e}: loss {:.5}", cfg.tag(), cfg.seed, loss.total);
        losses.push(loss);
    }
    if cfg.two_stage {
        let head_alpha = if cfg.alpha > 0.0 { cfg.alpha } else { 1.0 };
        for e in 0..cfg.epochs {
            let mut batch_rng = root.derive(STREAM_BATCH + (cfg.epochs + e) as u64);
            losses.push(t.epoch(&train_set, &cycle, &mut batch_rng, e, 2, head_alpha, 0.0, false)?);
        }
    }
    let model = t.model;
    let eval = |d: &Dataset| -> Result<FairnessReport> {
        let p = model.predict(d.x.view(), cfg.threshold)?;
        evaluate(&d.y, &p.labels, &d.s)
    };
    let report = RunReport {
        tag: cfg.tag(),
        dataset: cfg.dataset.clone(),
        seed: cfg.seed,
        n_train: splits.train.len(),
        train_pi: estimate_pi(&splits.train.subgroup_index()).ok(),
        losses,
        val: eval(&splits.val)?,
        test: eval(&splits.test)?,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((model, report))
}

pub fn train_unfair_mlp(splits: &Splits, cfg: &TrainConfig) -> Result<(Model, RunReport)> {
    train(splits, &cfg.unfair_mlp())
}

/// Where the rows of an experiment come from. Raw tables are split first and
/// preprocessed with statistics fitted on each run's training split.
#[derive(Debug, Clone)]
pub enum DataSource {
    Raw { table: RawTable, schema: Schema },
    Prepared(Dataset),
}

impl DataSource {
    pub fn len(&self) -> usize {
        match self {
            DataSource::Raw { table, .. } => table.len(),
            DataSource::Prepared(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn splits(&self, fractions: (f64, f64, f64), seed: u64) -> Result<Splits> {
        match self {
            DataSource::Prepared(d) => d.split(fractions, seed),
            DataSource::Raw { table, schema } => {
                let ix = split_indices(&table.y, &table.s, fractions, seed)?;
                let (train, stats) = preprocess(&table.select(&ix.train), schema, None)?;
                train.subgroup_index().require_all("the training split")?;
                Ok(Splits {
                    train,
                    val: transform(&table.select(&ix.val), &stats)?,
                    test: transform(&table.select(&ix.test), &stats)?,
                })
            }
        }
    }
}

pub const DEFAULT_FRACTIONS: (f64, f64, f64) = (0.7, 0.15, 0.15);

/// Everything produced by one seed of an experiment.
pub struct RunOutput {
    pub seed: u64,
    pub splits: Splits,
    pub model: Model,
    pub report: RunReport,
}

/// Runs seeds `cfg.seed .. cfg.seed + n_runs`; each seed draws its own split
/// and initialisation. At most `jobs` runs execute at once. `inspect` sees
/// every finished run before its model is dropped.
pub fn run_experiment_with<F>(
    source: &DataSource,
    cfg: &TrainConfig,
    n_runs: usize,
    jobs: usize,
    fractions: (f64, f64, f64),
    inspect: F,
) -> Result<AggregateReport>
where
    F: Fn(&RunOutput) -> Result<()> + Sync,
{
    if n_runs == 0 {
        return Err(Error::InvalidArgument("n_runs must be at least 1".into()));
    }
    cfg.validate()?;
    let one = |r: usize| -> Result<RunReport> {
        let seed = cfg.seed + r as u64;
        let wrap = |e: Error| Error::Run {
            seed,
            source: Box::new(e),
        };
        let splits = source.splits(fractions, seed).map_err(wrap)?;
        let run_cfg = TrainConfig { seed, ..cfg.clone() };
        let (model, report) = train(&splits, &run_cfg).map_err(wrap)?;
        let out = RunOutput {
            seed,
            splits,
            model,
            report,
        };
        inspect(&out).map_err(wrap)?;
        Ok(out.report)
    };
    let runs: Vec<RunReport> = if jobs <= 1 {
        (0..n_runs).map(one).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| (0..n_runs).into_par_iter().map(one).collect::<Result<_>>())?
    };
    AggregateReport::from_runs(cfg, runs)
}

pub fn run_experiment(source: &DataSource, cfg: &TrainConfig, n_runs: usize, jobs: usize) -> Result<AggregateReport> {
    run_experiment_with(source, cfg, n_runs, jobs, DEFAULT_FRACTIONS, |_| Ok(()))
}

/// Logistic regression on frozen features, trained with Adam on
/// cross-entropy; returns probabilities for `eval_z`.
pub fn linear_probe(
    train_z: ArrayView2<'_, f64>,
    train_y: &[u8],
    eval_z: ArrayView2<'_, f64>,
    epochs: usize,
    lr: f64,
    seed: u64,
) -> Result<Array1<f64>> {
    let root = Rng::new(seed);
    let mut head = Mlp::new(&[train_z.ncols(), 1], Activation::Identity, Activation::Identity, &mut root.derive(0))?;
    let mut adam = AdamState::new(&head.layers);
    let n = train_y.len();
    let mut order: Vec<usize> = (0..n).collect();
    for e in 0..epochs {
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut root.derive(1 + e as u64));
        for chunk in order.chunks(256) {
            let xb = train_z.select(Axis(0), chunk);
            let yb: Vec<u8> = chunk.iter().map(|&i| train_y[i]).collect();
            let pass = head.forward(xb.view())?;
            let probs = pass.output().column(0).mapv(sigmoid);
            let lv = bce(probs.view(), &yb)?;
            let g = head.backward(&pass, &lv.grad.insert_axis(Axis(1)))?;
            adam.step(&mut head.layers, &g.layers, lr)?;
        }
    }
    Ok(head.infer(eval_z)?.column(0).mapv(sigmoid))
}

/// One row per sample: `id, z0.., y, s, y_hat`.
pub fn write_representations(model: &Model, data: &Dataset, threshold: f64, path: &Path) -> Result<()> {
    let z = model.encode(data.x.view())?;
    let pred = model.predict(data.x.view(), threshold)?;
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["id".to_string()];
    header.extend((0..z.ncols()).map(|j| format!("z{j}")));
    header.extend(["y".into(), "s".into(), "y_hat".into()]);
    w.write_record(&header)?;
    for (i, row) in z.rows().into_iter().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(row.iter().map(f64::to_string));
        rec.extend([data.y[i].to_string(), data.s[i].to_string(), pred.labels[i].to_string()]);
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
