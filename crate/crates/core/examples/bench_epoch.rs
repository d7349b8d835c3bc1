//! Quick experiment runs with `key=value` overrides, e.g.
//! `data=german runs=5 mode=ssl loss=supcon alpha=0.5`. `data` is adult (default),
//! german or synthetic; the summary line is mean accuracy, max DP and median DP.

use std::path::PathBuf;
use std::time::Instant;

use fairtab::data::{load_csv, synth_biased, Schema};
use fairtab::sampler::{SamplerMode, TrainingMode};
use fairtab::trainer::{run_experiment_with, DataSource, HeadRows, SupervisedLoss, TrainConfig, DEFAULT_FRACTIONS};

fn main() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data");
    let args: Vec<String> = std::env::args().skip(1).collect();
    let data = args.iter().find_map(|a| a.strip_prefix("data=")).unwrap_or("adult");
    let (src, mut cfg) = if data == "synthetic" {
        let d = synth_biased(5000, 8, 0.4, 0.4, 0).unwrap();
        let cfg = TrainConfig {
            dataset: "synthetic".into(),
            epochs: 50,
            ..TrainConfig::for_dataset("adult").unwrap()
        };
        (DataSource::Prepared(d), cfg)
    } else {
        let schema = Schema::builtin(data).unwrap();
        let table = load_csv(&dir.join(format!("{data}.csv")), &schema).unwrap();
        (DataSource::Raw { table, schema }, TrainConfig::for_dataset(data).unwrap())
    };
    let mut runs = 1;
    for a in &args {
        let (k, v) = a.split_once('=').expect("key=value");
        match k {
            "data" => {}
            "runs" => runs = v.parse().unwrap(),
            "epochs" => cfg.epochs = v.parse().unwrap(),
            "alpha" => cfg.alpha = v.parse().unwrap(),
            "tau" => cfg.tau = v.parse().unwrap(),
            "seed" => cfg.seed = v.parse().unwrap(),
            "weight" => cfg.contrastive_weight = v.parse().unwrap(),
            "two_stage" => cfg.two_stage = v == "1",
            "mode" if v == "ssl" => cfg.mode = TrainingMode::SelfSupervised,
            "loss" if v == "supcon" => cfg.supervised_loss = SupervisedLoss::SupCon,
            "sampler" => {
                cfg.sampler = match v {
                    "none" => SamplerMode::None,
                    "cf" => SamplerMode::Counterfactual,
                    _ => SamplerMode::Fair,
                }
            }
            "unfair" => cfg = cfg.unfair_mlp(),
            "head" if v == "stacked" => cfg.head_rows = HeadRows::Stacked,
            "head" if v == "anchors" => cfg.head_rows = HeadRows::Anchors,
            "loss" if v == "paired" => cfg.supervised_loss = SupervisedLoss::PairedNegatives,
            _ => panic!("unknown key {k}"),
        }
    }
    let t = Instant::now();
    let jobs = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let agg = run_experiment_with(&src, &cfg, runs, jobs, DEFAULT_FRACTIONS, |_| Ok(())).unwrap();
    let mut dps: Vec<f64> = agg.runs.iter().map(|r| r.test.dp).collect();
    dps.sort_by(f64::total_cmp);
    println!(
        "{}: {:.1}s acc {:.4} max dp {:.4} median dp {:.4}",
        args.join(" "),
        t.elapsed().as_secs_f64(),
        agg.mean_accuracy,
        agg.max_dp,
        dps[dps.len() / 2],
    );
}
