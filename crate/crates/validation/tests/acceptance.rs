//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! non-zero when any criterion fails.
//!
//! `cargo test -p fairtab-validation --test acceptance -- 1 4 9` runs a
//! subset. Datasets are read from `FAIRTAB_DATA_DIR`, else `<workspace>/data`.

use std::cell::Cell;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use fairtab::data::{synth_biased, Dataset};
use fairtab::experiment::{run_sweep, ExperimentConfig, DATA_DIR_ENV};
use fairtab::losses::{bce, info_nce, sup_con, sup_con_anchored, Similarity};
use fairtab::metrics::{aoc, demographic_parity, equal_opportunity, equalized_odds, pareto_frontier, TradeoffPoint};
use fairtab::nn::{flatten_layers, gradient_check_with, sigmoid, Activation, GradCheck, Mlp, Rng, Stencil};
use fairtab::sampler::{assign_positives, cross_pair_fraction, estimate_pi, negatives_mask, Batch, SamplerMode, TrainingMode};
use fairtab::theory::{run_spec, TheorySpec};
use fairtab::trainer::{run_experiment, AggregateReport, DataSource, TrainConfig, DEFAULT_FRACTIONS};
use ndarray::{s, Array2, ArrayView2, Axis};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

type Check = fn() -> Outcome;

fn main() -> ExitCode {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let checks: [(usize, &str, Check); 9] = [
        (1, "gradient fidelity", gradients),
        (2, "loss oracles", loss_oracles),
        (3, "theory suite", theory),
        (4, "sampler properties", sampler_properties),
        (5, "adult results", adult_table),
        (6, "german results", german_table),
        (7, "ordering on synthetic data", ordering),
        (8, "alpha ablation shape", alpha_ablation),
        (9, "metric oracles", metric_oracles),
    ];
    let mut failed = 0;
    for (id, name, check) in checks {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let out = check();
        let verdict = if out.passed { "PASS" } else { "FAIL" };
        println!(
            "{verdict} criterion {id} ({name}, {:.1}s): {}",
            start.elapsed().as_secs_f64(),
            out.detail
        );
        std::io::stdout().flush().ok();
        failed += usize::from(!out.passed);
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

fn data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

fn shipped(name: &str) -> Result<(ExperimentConfig, DataSource), String> {
    let mut exp = ExperimentConfig::builtin(name).map_err(|e| e.to_string())?;
    exp.data = Some(data_dir().join(format!("{name}.csv")));
    let source = exp.source().map_err(|e| e.to_string())?;
    Ok((exp, source))
}

fn jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn normal(rng: &mut Rng, shape: (usize, usize)) -> Array2<f64> {
    Array2::from_shape_simple_fn(shape, || StandardNormal.sample(rng))
}

// ---------------------------------------------------------------- criterion 1

const FD_STEP: f64 = 1e-3;
const FD_TOL: f64 = 1e-4;
/// Smallest |pre-activation| a ReLU unit may have at the checked point, so
/// that no stencil evaluation (offsets up to `2 · FD_STEP`) crosses a kink.
const KINK_MARGIN: f64 = 0.02;

/// Worst relative error and the number of loss evaluations whose ReLU
/// pattern differed from the one at the checked point.
#[derive(Default)]
struct Probe {
    error: f64,
    flips: usize,
}

fn fd<F: FnMut(&[f64]) -> (f64, Vec<f64>)>(theta: &[f64], f: F, rng: &mut Rng) -> GradCheck {
    gradient_check_with(theta, f, FD_STEP, None, rng, Stencil::FivePoint)
}

/// Signs of every hidden pre-activation and the smallest magnitude among them.
fn relu_state(net: &Mlp, x: ArrayView2<'_, f64>) -> (Vec<bool>, f64) {
    let (mut signs, mut margin) = (Vec::new(), f64::INFINITY);
    let mut cur = x.to_owned();
    for (layer, act) in net.layers.iter().zip(&net.activations) {
        let mut pre = cur.dot(&layer.weights.t());
        pre += &layer.bias;
        if *act == Activation::Relu {
            for v in &pre {
                signs.push(*v > 0.0);
                margin = margin.min(v.abs());
            }
            pre.mapv_inplace(|v| v.max(0.0));
        }
        cur = pre;
    }
    (signs, margin)
}

/// Redraws network and inputs until every ReLU unit sits at least
/// `KINK_MARGIN` away from its kink.
fn smooth_encoder(sizes: &[usize], rows: usize, rng: &mut Rng) -> (Mlp, Array2<f64>) {
    loop {
        let net = Mlp::new(sizes, Activation::Relu, Activation::Identity, rng).unwrap();
        let x = normal(rng, (rows, sizes[0]));
        if relu_state(&net, x.view()).1 >= KINK_MARGIN {
            return (net, x);
        }
    }
}

/// Loss of the embedding matrix and its gradient.
type EmbLoss<'a> = Box<dyn Fn(&Array2<f64>) -> (f64, Array2<f64>) + 'a>;

fn through_encoder(enc: &Mlp, x: &Array2<f64>, loss: &EmbLoss<'_>, rng: &mut Rng) -> Probe {
    let base = relu_state(enc, x.view()).0;
    let flips = Cell::new(0);
    let mut net = enc.clone();
    let f = |theta: &[f64]| {
        net.set_flat(theta).unwrap();
        flips.set(flips.get() + usize::from(relu_state(&net, x.view()).0 != base));
        let pass = net.forward(x.view()).unwrap();
        let (v, g) = loss(pass.output());
        let grads = net.backward(&pass, &g).unwrap();
        (v, flatten_layers(&grads.layers))
    };
    let error = fd(&enc.flatten(), f, rng).max_rel_error;
    Probe {
        error,
        flips: flips.get(),
    }
}

fn on_embeddings(z: &Array2<f64>, loss: &EmbLoss<'_>, rng: &mut Rng) -> Probe {
    let shape = z.dim();
    let f = |theta: &[f64]| {
        let m = Array2::from_shape_vec(shape, theta.to_vec()).unwrap();
        let (v, g) = loss(&m);
        (v, g.iter().copied().collect())
    };
    Probe {
        error: fd(z.as_slice().unwrap(), f, rng).max_rel_error,
        flips: 0,
    }
}

fn batch_of(y: &[u8], pos_y: &[u8]) -> Batch {
    let n = y.len();
    Batch {
        anchors: (0..n).collect(),
        positives: (n..2 * n).collect(),
        y: y.to_vec(),
        s: vec![0; n],
        pos_y: pos_y.to_vec(),
        pos_s: vec![0; n],
    }
}

fn gradients() -> Outcome {
    let mut rng = Rng::new(11);
    let mut probes: Vec<(String, Probe)> = Vec::new();
    let (n, d) = (4, 6);
    let y = [1u8, 0, 1, 0];
    let batch = batch_of(&y, &y);
    let stacked = batch.stacked_labels();
    for (sim, sim_name) in [(Similarity::Cosine, "cosine"), (Similarity::Dot, "dot")] {
        for tau in [0.5, 1.0] {
            let (enc, x) = smooth_encoder(&[d, 16, 16], 2 * n, &mut rng);
            for (mode, mode_name) in [
                (TrainingMode::SelfSupervised, "info_nce/self_supervised"),
                (TrainingMode::Supervised, "info_nce/supervised"),
            ] {
                let mask = negatives_mask(&batch, mode);
                let loss: EmbLoss<'_> = Box::new(move |z: &Array2<f64>| {
                    let lv = info_nce(z.slice(s![..n, ..]), z.slice(s![n.., ..]), mask.view(), tau, sim).unwrap();
                    (lv.value, lv.grad)
                });
                let z = normal(&mut rng, (2 * n, 5));
                probes.push((format!("{mode_name}/{sim_name}/tau={tau}/embeddings"), on_embeddings(&z, &loss, &mut rng)));
                probes.push((format!("{mode_name}/{sim_name}/tau={tau}/net"), through_encoder(&enc, &x, &loss, &mut rng)));
            }
            let labels = stacked.clone();
            let loss: EmbLoss<'_> = Box::new(move |z: &Array2<f64>| {
                let lv = sup_con_anchored(z.view(), n, &labels, tau, sim).unwrap();
                (lv.value, lv.grad)
            });
            probes.push((format!("sup_con_anchored/{sim_name}/tau={tau}/net"), through_encoder(&enc, &x, &loss, &mut rng)));
        }
    }
    {
        let (enc, x) = smooth_encoder(&[d, 16, 16], 8, &mut rng);
        let labels = vec![0u8, 1, 1, 0, 1, 0, 0, 1];
        let loss: EmbLoss<'_> = Box::new(move |z: &Array2<f64>| {
            let lv = sup_con(z.view(), &labels, 0.7).unwrap();
            (lv.value, lv.grad)
        });
        probes.push(("sup_con/dot/net".into(), through_encoder(&enc, &x, &loss, &mut rng)));
    }
    {
        let (cls, x) = smooth_encoder(&[5, 16, 1], 8, &mut rng);
        let labels = [1u8, 0, 0, 1, 1, 1, 0, 0];
        let base = relu_state(&cls, x.view()).0;
        let flips = Cell::new(0);
        let mut net = cls.clone();
        let f = |theta: &[f64]| {
            net.set_flat(theta).unwrap();
            flips.set(flips.get() + usize::from(relu_state(&net, x.view()).0 != base));
            let pass = net.forward(x.view()).unwrap();
            let probs = pass.output().column(0).mapv(sigmoid);
            let lv = bce(probs.view(), &labels).unwrap();
            let g = net.backward(&pass, &lv.grad.insert_axis(Axis(1))).unwrap();
            (lv.value, flatten_layers(&g.layers))
        };
        let error = fd(&cls.flatten(), f, &mut rng).max_rel_error;
        probes.push((
            "bce/net".into(),
            Probe {
                error,
                flips: flips.get(),
            },
        ));
    }
    for alpha in [0.3, 1.0, 5.0] {
        probes.push((format!("combined/alpha={alpha}"), combined(alpha, &mut rng)));
    }
    let (name, err) = probes
        .iter()
        .fold(("", 0.0), |acc, (k, p)| if p.error > acc.1 { (k.as_str(), p.error) } else { acc });
    let flips: usize = probes.iter().map(|(_, p)| p.flips).sum();
    outcome(
        probes.iter().all(|(_, p)| p.error < FD_TOL) && flips == 0,
        format!(
            "{} checks, five-point central differences with h = {FD_STEP:e}; worst relative error {err:.2e} ({name}), \
             tolerance {FD_TOL:e}; evaluations crossing a ReLU kink {flips}",
            probes.len()
        ),
    )
}

/// `alpha · BCE(head(encoder(anchors))) + SupCon(encoder(stacked))` with
/// respect to every parameter of both networks.
fn combined(alpha: f64, rng: &mut Rng) -> Probe {
    let (n, d) = (4, 6);
    let (enc, cls, x) = loop {
        let (enc, x) = smooth_encoder(&[d, 16, 16], 2 * n, rng);
        let cls = Mlp::new(&[16, 16, 1], Activation::Relu, Activation::Identity, rng).unwrap();
        let z = enc.infer(x.view()).unwrap();
        if relu_state(&cls, z.slice(s![..n, ..])).1 >= KINK_MARGIN {
            break (enc, cls, x);
        }
    };
    let y = [1u8, 1, 0, 0];
    let stacked: Vec<u8> = y.iter().chain(&y).copied().collect();
    let split = enc.num_params();
    let state = |e: &Mlp, c: &Mlp| {
        let z = e.infer(x.view()).unwrap();
        let mut v = relu_state(e, x.view()).0;
        v.extend(relu_state(c, z.slice(s![..n, ..])).0);
        v
    };
    let base = state(&enc, &cls);
    let flips = Cell::new(0);
    let (mut e, mut c) = (enc.clone(), cls.clone());
    let f = |theta: &[f64]| {
        e.set_flat(&theta[..split]).unwrap();
        c.set_flat(&theta[split..]).unwrap();
        flips.set(flips.get() + usize::from(state(&e, &c) != base));
        let pass = e.forward(x.view()).unwrap();
        let z = pass.output();
        let scl = sup_con_anchored(z.view(), n, &stacked, 0.5, Similarity::Cosine).unwrap();
        let head = c.forward(z.slice(s![..n, ..])).unwrap();
        let probs = head.output().column(0).mapv(sigmoid);
        let b = bce(probs.view(), &y).unwrap();
        let gc = c.backward(&head, &(b.grad * alpha).insert_axis(Axis(1))).unwrap();
        let mut gz = scl.grad;
        gz.slice_mut(s![..n, ..]).scaled_add(1.0, &gc.input);
        let ge = e.backward(&pass, &gz).unwrap();
        let mut g = flatten_layers(&ge.layers);
        g.extend(flatten_layers(&gc.layers));
        (alpha * b.value + scl.value, g)
    };
    let mut theta = enc.flatten();
    theta.extend(cls.flatten());
    let error = fd(&theta, f, rng).max_rel_error;
    Probe {
        error,
        flips: flips.get(),
    }
}

// ---------------------------------------------------------------- criterion 2

fn cos(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `−1/N Σ_i log( e^{s(i, N+i)/τ} / Σ_{k ∈ neg(i) ∪ {N+i}} e^{s(i,k)/τ} )`.
fn info_nce_brute(pts: &[Vec<f64>], neg: &Array2<bool>, tau: f64) -> f64 {
    let n = pts.len() / 2;
    let mut total = 0.0;
    for i in 0..n {
        let num = (cos(&pts[i], &pts[n + i]) / tau).exp();
        let den: f64 = (0..2 * n)
            .filter(|&k| neg[[i, k]] || k == n + i)
            .map(|k| (cos(&pts[i], &pts[k]) / tau).exp())
            .sum();
        total += (num / den).ln();
    }
    -total / n as f64
}

/// `1/|I| Σ_i −1/|P(i)| Σ_{p∈P(i)} log( e^{z_i·z_p/τ} / Σ_{a≠i} e^{z_i·z_a/τ} )`.
fn sup_con_brute(pts: &[Vec<f64>], labels: &[u8], tau: f64) -> f64 {
    let m = pts.len();
    let (mut total, mut used) = (0.0, 0);
    for i in 0..m {
        let p: Vec<usize> = (0..m).filter(|&k| k != i && labels[k] == labels[i]).collect();
        if p.is_empty() {
            continue;
        }
        used += 1;
        let den: f64 = (0..m).filter(|&a| a != i).map(|a| (dot(&pts[i], &pts[a]) / tau).exp()).sum();
        total -= p.iter().map(|&k| ((dot(&pts[i], &pts[k]) / tau).exp() / den).ln()).sum::<f64>() / p.len() as f64;
    }
    total / used as f64
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn loss_oracles() -> Outcome {
    let fixed = ndarray::array![[0.9, -0.3, 0.2], [0.1, 0.8, -0.5], [1.2, 0.4, 0.0], [-0.6, 0.5, 0.7]];
    let pts = rows(&fixed);
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();

    for tau in [0.1, 0.5, 1.0, 2.0] {
        for (mode, y) in [
            (TrainingMode::SelfSupervised, [1u8, 0]),
            (TrainingMode::Supervised, [1u8, 0]),
            (TrainingMode::Supervised, [1u8, 1]),
        ] {
            let batch = batch_of(&y, &y);
            let mask = negatives_mask(&batch, mode);
            let got = info_nce(fixed.slice(s![..2, ..]), fixed.slice(s![2.., ..]), mask.view(), tau, Similarity::Cosine)
                .unwrap()
                .value;
            worst = worst.max((got - info_nce_brute(&pts, &mask, tau)).abs());
        }
        for labels in [[0u8, 0, 1, 1], [1, 0, 1, 1], [0, 1, 1, 0]] {
            let got = sup_con(fixed.view(), &labels, tau).unwrap().value;
            worst = worst.max((got - sup_con_brute(&pts, &labels, tau)).abs());
        }
    }
    notes.push(format!("brute force max |Δ| {worst:.1e}"));

    // Four identical anchors, each with three negatives and its positive.
    let same = Array2::from_elem((4, 3), 0.5);
    let mut mask = Array2::from_elem((4, 8), false);
    for i in 0..4 {
        for k in (0..4).filter(|&k| k != i) {
            mask[[i, k]] = true;
        }
    }
    let log4 = info_nce(same.view(), same.view(), mask.view(), 0.7, Similarity::Cosine).unwrap().value;
    let d4 = (log4 - 4f64.ln()).abs();
    // Four identical same-label points under the supervised loss.
    let log3 = sup_con(same.view(), &[1, 1, 1, 1], 0.7).unwrap().value;
    let d3 = (log3 - 3f64.ln()).abs();
    notes.push(format!("info_nce symmetric {log4:.15} (|Δ log 4| {d4:.1e})"));
    notes.push(format!("sup_con symmetric {log3:.15} (|Δ log 3| {d3:.1e})"));
    outcome(worst <= 1e-12 && d4 <= 1e-12 && d3 <= 1e-12, notes.join("; "))
}

// ---------------------------------------------------------------- criterion 3

fn theory() -> Outcome {
    let spec = match TheorySpec::builtin("default") {
        Ok(s) => s,
        Err(e) => return outcome(false, format!("default spec: {e}")),
    };
    let report = match run_spec(&spec) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("theory run: {e}")),
    };
    let mut passed = true;
    let mut parts = Vec::new();
    for (tag, section) in [("(a) randomized decomposition", "randomized"), ("(b) bound", "bound"), ("(c) bottleneck", "bottleneck")] {
        let checks: Vec<_> = report.section(section).collect();
        let bad: Vec<_> = checks.iter().filter(|c| !c.passed).collect();
        passed &= !checks.is_empty() && bad.is_empty();
        let mut line = format!("{tag} {}/{} pass", checks.len() - bad.len(), checks.len());
        if let Some(b) = bad.first() {
            line.push_str(&format!(" [first failure {}: {}]", b.name, b.diagnostic.as_deref().unwrap_or("-")));
        }
        parts.push(line);
    }
    outcome(passed, parts.join("; "))
}

// ---------------------------------------------------------------- criterion 4

fn sampler_properties() -> Outcome {
    let (_, source) = match shipped("adult") {
        Ok(v) => v,
        Err(e) => return outcome(false, e),
    };
    let train = match source.splits(DEFAULT_FRACTIONS, 0) {
        Ok(s) => s.train,
        Err(e) => return outcome(false, e.to_string()),
    };
    let groups = train.subgroup_index();
    let plan = match assign_positives(&train, &groups, SamplerMode::Fair, &mut Rng::new(0)) {
        Ok(p) => p,
        Err(e) => return outcome(false, e.to_string()),
    };
    let (mut cross_ok, mut cross_n, mut within_ok, mut within_n) = (0usize, 0usize, 0usize, 0usize);
    for (i, &p) in plan.positive_of.iter().enumerate() {
        let (y, s) = (train.y[i], train.s[i]);
        if (y, s) == (1, 1) {
            cross_n += 1;
            cross_ok += usize::from(train.y[p] == 1 && train.s[p] == 0);
        } else {
            within_n += 1;
            within_ok += usize::from(train.y[p] == y && train.s[p] == s && p != i);
        }
    }
    let pi = estimate_pi(&groups).unwrap_or(f64::NAN);
    let ratio = groups.len(1, 1) as f64 / (groups.len(1, 1) + groups.len(1, 0)) as f64;
    let cross = cross_pair_fraction(&plan, &train).unwrap_or(f64::NAN);
    outcome(
        cross_ok == cross_n && cross_n > 0 && within_ok == within_n && pi == ratio && cross == ratio,
        format!(
            "{} training rows; (1,1)→(1,0) {cross_ok}/{cross_n}; same-subgroup {within_ok}/{within_n}; \
             estimate_pi {pi} vs count ratio {ratio}; realised cross fraction {cross}",
            train.len()
        ),
    )
}

// ------------------------------------------------------------ criteria 5 to 7

fn summary(r: &AggregateReport) -> String {
    format!("acc {:.2} max DP {:.4}", 100.0 * r.mean_accuracy, r.max_dp)
}

fn three(source: &DataSource, base: &TrainConfig, runs: usize) -> Result<[AggregateReport; 3], String> {
    let ssl = TrainConfig {
        mode: TrainingMode::SelfSupervised,
        ..base.clone()
    };
    let run = |c: &TrainConfig| run_experiment(source, c, runs, jobs()).map_err(|e| format!("{}: {e}", c.tag()));
    Ok([run(&base.unfair_mlp())?, run(base)?, run(&ssl)?])
}

fn adult_table() -> Outcome {
    let (exp, source) = match shipped("adult") {
        Ok(v) => v,
        Err(e) => return outcome(false, e),
    };
    let train = TrainConfig {
        mode: TrainingMode::Supervised,
        ..exp.train.clone()
    };
    let [unfair, sup, ssl] = match three(&source, &train, 5) {
        Ok(r) => r,
        Err(e) => return outcome(false, e),
    };
    let checks = [
        (0.835..=0.855).contains(&unfair.mean_accuracy),
        unfair.max_dp >= 0.15,
        sup.mean_accuracy >= 0.825,
        sup.max_dp <= 0.06,
        ssl.max_dp <= 0.15,
        ssl.mean_accuracy >= 0.825,
    ];
    outcome(
        checks.iter().all(|c| *c),
        format!(
            "unfair MLP {} (need acc 83.5..85.5, DP ≥ 0.15); supervised {} (need acc ≥ 82.5, DP ≤ 0.06); \
             self-supervised {} (need acc ≥ 82.5, DP ≤ 0.15)",
            summary(&unfair),
            summary(&sup),
            summary(&ssl)
        ),
    )
}

fn german_table() -> Outcome {
    let (exp, source) = match shipped("german") {
        Ok(v) => v,
        Err(e) => return outcome(false, e),
    };
    let run = |c: &TrainConfig| run_experiment(&source, c, 5, jobs()).map_err(|e| format!("{}: {e}", c.tag()));
    let sup_cfg = TrainConfig {
        mode: TrainingMode::Supervised,
        ..exp.train.clone()
    };
    let (unfair, sup) = match (run(&exp.train.unfair_mlp()), run(&sup_cfg)) {
        (Ok(u), Ok(s)) => (u, s),
        (Err(e), _) | (_, Err(e)) => return outcome(false, e),
    };
    outcome(
        unfair.max_dp >= 0.20 && sup.mean_accuracy >= 0.74 && sup.max_dp <= 0.05,
        format!(
            "unfair MLP {} (need DP ≥ 0.20); supervised {} (need acc ≥ 74, DP ≤ 0.05)",
            summary(&unfair),
            summary(&sup)
        ),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Hyperparameters for the synthetic check: the Adult architecture and
/// optimiser with fewer epochs.
fn synthetic_config() -> TrainConfig {
    TrainConfig {
        dataset: "synthetic".into(),
        epochs: 50,
        ..TrainConfig::for_dataset("adult").expect("shipped defaults")
    }
}

fn ordering() -> Outcome {
    let data: Dataset = match synth_biased(5000, 8, 0.4, 0.4, 0) {
        Ok(d) => d,
        Err(e) => return outcome(false, e.to_string()),
    };
    let source = DataSource::Prepared(data);
    let [unfair, sup, ssl] = match three(&source, &synthetic_config(), 5) {
        Ok(r) => r,
        Err(e) => return outcome(false, e),
    };
    let med = |r: &AggregateReport| median(r.runs.iter().map(|x| x.test.dp).collect());
    let (du, ds, dn) = (med(&unfair), med(&sup), med(&ssl));
    let gap = 100.0 * (unfair.mean_accuracy - sup.mean_accuracy);
    outcome(
        ds < dn && dn < du && gap.abs() <= 3.0,
        format!(
            "median DP supervised {ds:.4} < self-supervised {dn:.4} < unfair {du:.4}; \
             accuracy supervised {:.2} vs unfair {:.2} (gap {gap:.2}, need ≤ 3)",
            100.0 * sup.mean_accuracy,
            100.0 * unfair.mean_accuracy
        ),
    )
}

// ---------------------------------------------------------------- criterion 8

fn alpha_ablation() -> Outcome {
    let (mut exp, source) = match shipped("adult") {
        Ok(v) => v,
        Err(e) => return outcome(false, e),
    };
    let Some(sweep) = exp.sweep.as_mut() else {
        return outcome(false, "the shipped adult configuration has no sweep block");
    };
    sweep.alphas = vec![0.1, 0.5, 1.0, 2.0, 5.0, 10.0];
    sweep.modes = vec![TrainingMode::Supervised, TrainingMode::SelfSupervised];
    sweep.runs = Some(1);
    let report = match run_sweep(&exp, &source, jobs(), None) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let mut passed = report.failures.is_empty();
    let mut parts = vec![format!("dp_max {:.4}", report.dp_max)];
    for mode in [TrainingMode::Supervised, TrainingMode::SelfSupervised] {
        let high = report.aoc_range(mode, &[2.0, 5.0, 10.0]);
        let low = report.aoc_range(mode, &[0.1, 0.5, 1.0]);
        let cells: Vec<String> = report
            .cells
            .iter()
            .filter(|c| c.mode == mode)
            .map(|c| format!("{}:{:.4}", c.alpha, c.aoc))
            .collect();
        match (high, low) {
            (Some(h), Some(l)) => {
                passed &= h < l;
                parts.push(format!(
                    "{mode:?} range α≥2 {h:.4} vs α≤1 {l:.4} (AOC {})",
                    cells.join(" ")
                ));
            }
            _ => {
                passed = false;
                parts.push(format!("{mode:?} missing cells"));
            }
        }
    }
    if !report.failures.is_empty() {
        parts.push(format!("failed cells: {}", report.failures.join(" | ")));
    }
    outcome(passed, parts.join("; "))
}

// ---------------------------------------------------------------- criterion 9

fn table(cells: &[(u8, u8, u8, usize)]) -> (Vec<u8>, Vec<u8>, Vec<u8>) {
    let (mut y, mut yh, mut s) = (Vec::new(), Vec::new(), Vec::new());
    for &(si, yi, yhi, count) in cells {
        for _ in 0..count {
            s.push(si);
            y.push(yi);
            yh.push(yhi);
        }
    }
    (y, yh, s)
}

fn dominated_oracle(points: &[TradeoffPoint]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| !points.iter().any(|q| q.dominates(p)))
        .map(|p| (p.dp, p.accuracy))
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    out
}

fn metric_oracles() -> Outcome {
    let mut notes = Vec::new();
    let mut passed = true;
    // (s, y, ŷ, count)
    let tables: [(&[(u8, u8, u8, usize)], [f64; 3]); 2] = [
        (
            &[(1, 1, 1, 5), (1, 1, 0, 1), (1, 0, 1, 1), (1, 0, 0, 3), (0, 1, 1, 2), (0, 1, 0, 2), (0, 0, 1, 1), (0, 0, 0, 5)],
            // rates 6/10 vs 3/10; TPR 5/6 vs 1/2; FPR 1/4 vs 1/6
            [0.3, 1.0 / 3.0, 1.0 / 3.0],
        ),
        (
            &[(1, 1, 1, 1), (1, 1, 0, 1), (1, 0, 1, 2), (0, 1, 1, 1), (0, 1, 0, 1), (0, 0, 0, 2)],
            // rates 3/4 vs 1/4; TPR 1/2 vs 1/2; FPR 1 vs 0
            [0.5, 0.0, 1.0],
        ),
    ];
    let mut worst: f64 = 0.0;
    for (cells, [dp, eopp, eo]) in tables {
        let (y, yh, s) = table(cells);
        let got = [
            demographic_parity(&yh, &s).unwrap_or(f64::NAN),
            equal_opportunity(&yh, &y, &s).unwrap_or(f64::NAN),
            equalized_odds(&yh, &y, &s).unwrap_or(f64::NAN),
        ];
        for (g, w) in got.iter().zip([dp, eopp, eo]) {
            let d = (g - w).abs();
            worst = if d.is_nan() { f64::INFINITY } else { worst.max(d) };
        }
    }
    passed &= worst <= 1e-12;
    notes.push(format!("DP/EOPP/EO max |Δ| {worst:.1e}"));

    let mut rng = Rng::new(5);
    let points: Vec<TradeoffPoint> = (0..1000)
        .map(|k| TradeoffPoint::new(rng.random_range(0.0..0.3), rng.random_range(0.6..0.9), format!("p{k}")))
        .collect();
    let fast: Vec<(f64, f64)> = pareto_frontier(&points).iter().map(|p| (p.dp, p.accuracy)).collect();
    let slow = dominated_oracle(&points);
    passed &= fast == slow;
    notes.push(format!("frontier {} points, oracle {} points, equal {}", fast.len(), slow.len(), fast == slow));

    let example = [TradeoffPoint::new(0.0, 0.5, "a"), TradeoffPoint::new(0.1, 0.9, "b")];
    let area = aoc(&example, 0.2).unwrap_or(f64::NAN);
    passed &= (area - 0.7).abs() <= 1e-12;
    notes.push(format!("AOC example {area}"));
    outcome(passed, notes.join("; "))
}
