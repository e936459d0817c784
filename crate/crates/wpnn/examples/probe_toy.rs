use wpnn::config::{ExperimentConfig, Scheme};
use wpnn::data::{Dataset, LabeledImage, Split};
use wpnn::forward::{forward, pack_image, NoiseDraw};
use wpnn::params::{FixedPropagation, ModelParams};
use wpnn::rng::SeededRng;
use wpnn::train::{train, TrainConfig};

fn toy_dataset(count: usize, h: usize, w: usize, split: Split) -> Dataset {
    let mut rng = SeededRng::from_seed(99).stream("toy");
    let images = (0..count)
        .map(|i| {
            let label = (i % 2) as u8;
            let base = if label == 0 { 40.0 } else { 180.0 };
            let pixels = (0..h * w)
                .map(|_| {
                    let v: f64 = base + rng.uniform(-30.0, 30.0);
                    v.clamp(0.0, 255.0) as u8
                })
                .collect();
            LabeledImage { pixels, label }
        })
        .collect();
    Dataset { images, height: h, width: w, split }
}

fn main() {
    let mut cfg = ExperimentConfig::default_for(Scheme::NoOtaNonlinear);
    cfg.n_t = 2; cfg.n_s = 2; cfg.n_r = 2; cfg.m = 4;
    cfg.height = 4; cfg.width = 4; cfg.snr_db = 10.0;
    let train_set = toy_dataset(200, 4, 4, Split::Train);
    let test_set = toy_dataset(64, 4, 4, Split::Test);
    let mut tc = TrainConfig { batch_size: 32, epochs: 20, seed: 7, epoch_eval_size: 64, epoch_eval_draws: 1, eval_draws: 2, ..TrainConfig::default() };
    tc.adam.lr = 1e-2;
    let r = train::<f64>(&cfg, &tc, &train_set, &test_set).unwrap();
    let fixed = FixedPropagation::build(&cfg);
    // Inspect logits for one sample of each class.
    for img in test_set.images.iter().take(4) {
        let s_c = pack_image(&img.normalized::<f64>(), &cfg);
        let cache = forward(&s_c, &r.params, &fixed, &cfg, None, &NoiseDraw::none());
        let feat_norm: f64 = cache.features.iter().map(|f| f * f).sum::<f64>().sqrt();
        println!(
            "label {} |feat| {:.5} logits[0..3] {:?}",
            img.label,
            feat_norm,
            &cache.logits[..3]
        );
    }
    println!("metrics tail: {:?}", &r.metrics[r.metrics.len().min(17)..]);
}
