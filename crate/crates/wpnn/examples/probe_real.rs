use std::path::Path;
use wpnn::config::{ExperimentConfig, Scheme};
use wpnn::data::{Dataset, Split};
use wpnn::train::{train, TrainConfig};

fn main() {
    let dir = Path::new("/root/data/fashion");
    let mut train_set = Dataset::load(dir, Split::Train).unwrap();
    let test_set = Dataset::load(dir, Split::Test).unwrap();
    // Subsample for the probe: 12k train images.
    train_set.images.truncate(12000);
    let args: Vec<String> = std::env::args().collect();
    let scheme = match args.get(1).map(|s| s.as_str()) {
        Some("linear") => Scheme::RelayLinear,
        Some("nocp") => Scheme::RelayNoCp,
        Some("noota") => Scheme::NoOtaNonlinear,
        _ => Scheme::RelayNonlinear,
    };
    let snr: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.0);
    let epochs: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(3);
    let mut cfg = ExperimentConfig::default_for(scheme);
    cfg.snr_db = snr;
    let channel_policy = if args.get(4).map(|s| s.as_str()) == Some("fixed") { wpnn::train::ChannelPolicy::Fixed } else { wpnn::train::ChannelPolicy::PerBatch };
    let tc = TrainConfig {
        channel_policy,
        epochs,
        seed: 1,
        epoch_eval_size: 1000,
        epoch_eval_draws: 1,
        eval_draws: 3,
        ..TrainConfig::default()
    };
    let t0 = std::time::Instant::now();
    let r = train::<f64>(&cfg, &tc, &train_set, &test_set).unwrap();
    for m in &r.metrics {
        println!(
            "epoch {} loss {:.4} acc {:.4} wall {:.1}s",
            m.epoch, m.train_loss, m.test_accuracy, m.wall_seconds
        );
    }
    println!("final acc (3 draws, full test): {:.4}  total {:.1}s", r.final_accuracy, t0.elapsed().as_secs_f64());
}
