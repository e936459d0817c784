//! Training and evaluation loops.
//!
//! Mini-batch gradient descent with Adam over shuffled epochs; a fresh
//! channel draw per batch (configurable), per-sample noise, and named RNG
//! streams everywhere so the full loss trajectory is reproducible from the
//! seed alone. Per-epoch test accuracy is estimated on a test subset; the
//! final reported accuracy always runs the full test set over
//! `eval_draws` independent channel/noise realizations.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::adam::{AdamConfig, AdamState};
use crate::backward::{backward, softmax_cross_entropy, GradientSet};
use crate::channel::{draw_channels, ChannelDraw};
use crate::config::ExperimentConfig;
use crate::data::{Dataset, LabeledImage};
use crate::error::{Error, Result};
use crate::forward::{forward, pack_image, NoiseDraw};
use crate::matrix::ComplexMatrix;
use crate::params::{FixedPropagation, ModelParams};
use crate::rng::SeededRng;
use crate::scalar::Scalar;

/// When fading realizations are redrawn during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelPolicy {
    /// Fresh draw per mini-batch: parameters train against the fading
    /// distribution rather than one realization. Default.
    PerBatch,
    /// One realization drawn at the start and held for the whole run.
    Fixed,
}

/// Training hyperparameters. The defaults are what the headline experiments
/// are calibrated against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    pub channel_policy: ChannelPolicy,
    /// Channel/noise realizations averaged in the final full-test evaluation.
    pub eval_draws: usize,
    /// Test-subset size for the cheap per-epoch accuracy estimate.
    pub epoch_eval_size: usize,
    /// Draws for the per-epoch estimate.
    pub epoch_eval_draws: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            epochs: 30,
            seed: 0,
            adam: AdamConfig::default(),
            channel_policy: ChannelPolicy::PerBatch,
            eval_draws: 10,
            epoch_eval_size: 2000,
            epoch_eval_draws: 2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        if self.eval_draws == 0 || self.epoch_eval_draws == 0 {
            return Err(Error::InvalidConfig("evaluation draw counts must be positive".into()));
        }
        if !(self.adam.lr > 0.0) {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_accuracy: f64,
    pub wall_seconds: f64,
}

/// Final state of a training run.
#[derive(Debug, Clone)]
pub struct TrainResult<F> {
    pub params: ModelParams<F>,
    pub metrics: Vec<EpochMetrics>,
    /// Full-test accuracy over `eval_draws` realizations (the reported value).
    pub final_accuracy: f64,
}

fn pack_sample<F: Scalar>(img: &LabeledImage, cfg: &ExperimentConfig) -> ComplexMatrix<F> {
    pack_image(&img.normalized::<F>(), cfg)
}

/// Top-1 accuracy averaged over `n_draws` independent channel/noise
/// realizations; also returns the per-draw accuracies.
pub fn evaluate_detailed<F: Scalar>(
    params: &ModelParams<F>,
    cfg: &ExperimentConfig,
    fixed: &FixedPropagation<F>,
    items: &[LabeledImage],
    n_draws: usize,
    rng: &SeededRng,
) -> (f64, Vec<f64>) {
    assert!(n_draws > 0, "need at least one evaluation draw");
    let channel_stream = rng.stream("channel");
    let noise_stream = rng.stream("noise");
    let mut per_draw = Vec::with_capacity(n_draws);
    for d in 0..n_draws {
        let channel: Option<ChannelDraw<F>> = if cfg.scheme.uses_relay() {
            Some(
                draw_channels(cfg, &mut channel_stream.substream(&[d as u64]), d as u64)
                    .expect("evaluation channel draw"),
            )
        } else {
            None
        };
        let mut correct = 0usize;
        for (i, img) in items.iter().enumerate() {
            let mut noise_rng = noise_stream.substream(&[d as u64, i as u64]);
            let noise = NoiseDraw::sample(cfg, &mut noise_rng);
            let s_c = pack_sample::<F>(img, cfg);
            let cache = forward(&s_c, params, fixed, cfg, channel.as_ref(), &noise);
            let pred = cache
                .logits
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap();
            if pred == img.label as usize {
                correct += 1;
            }
        }
        per_draw.push(correct as f64 / items.len() as f64);
    }
    let mean = per_draw.iter().sum::<f64>() / n_draws as f64;
    (mean, per_draw)
}

/// Mean top-1 accuracy over independent realizations of the full item list.
pub fn evaluate<F: Scalar>(
    params: &ModelParams<F>,
    cfg: &ExperimentConfig,
    fixed: &FixedPropagation<F>,
    items: &[LabeledImage],
    n_draws: usize,
    rng: &SeededRng,
) -> f64 {
    evaluate_detailed(params, cfg, fixed, items, n_draws, rng).0
}

/// Train one model. Deterministic given the seed; aborts with coordinates on
/// a non-finite loss.
pub fn train<F: Scalar>(
    cfg: &ExperimentConfig,
    tc: &TrainConfig,
    train_set: &Dataset,
    test_set: &Dataset,
) -> Result<TrainResult<F>> {
    cfg.validate()?;
    tc.validate()?;
    let root = SeededRng::from_seed(tc.seed);
    let mut params = ModelParams::<F>::init(cfg, &mut root.stream("init"));
    let fixed = FixedPropagation::<F>::build(cfg);
    let mut adam = AdamState::new_for(&params);
    let shuffle_stream = root.stream("shuffle");
    let channel_stream = root.stream("channel");
    let noise_stream = root.stream("noise");
    let epoch_eval_stream = root.stream("epoch-eval");

    let fixed_channel: Option<ChannelDraw<F>> =
        if cfg.scheme.uses_relay() && tc.channel_policy == ChannelPolicy::Fixed {
            Some(draw_channels(cfg, &mut channel_stream.substream(&[u64::MAX]), 0)?)
        } else {
            None
        };

    let n = train_set.len();
    let mut metrics = Vec::with_capacity(tc.epochs);
    let eval_subset = &test_set.images[..tc.epoch_eval_size.min(test_set.len())];
    let start = Instant::now();

    for epoch in 0..tc.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        shuffle_stream.substream(&[epoch as u64]).shuffle(&mut order);

        let mut loss_sum = 0.0f64;
        for (batch_idx, chunk) in order.chunks(tc.batch_size).enumerate() {
            let channel: Option<ChannelDraw<F>> = if cfg.scheme.uses_relay() {
                match tc.channel_policy {
                    ChannelPolicy::PerBatch => {
                        let draw_id = (epoch * n.div_ceil(tc.batch_size) + batch_idx) as u64;
                        let mut stream =
                            channel_stream.substream(&[epoch as u64, batch_idx as u64]);
                        Some(draw_channels(cfg, &mut stream, draw_id)?)
                    }
                    ChannelPolicy::Fixed => fixed_channel.clone(),
                }
            } else {
                None
            };

            let mut batch_grads = GradientSet::zeros_like(&params);
            for (i, &sample_idx) in chunk.iter().enumerate() {
                let img = &train_set.images[sample_idx];
                let mut sample_noise =
                    noise_stream.substream(&[epoch as u64, batch_idx as u64, i as u64]);
                let noise = NoiseDraw::sample(cfg, &mut sample_noise);
                let s_c = pack_sample::<F>(img, cfg);
                let cache = forward(&s_c, &params, &fixed, cfg, channel.as_ref(), &noise);
                let (loss, _) = softmax_cross_entropy(&cache.logits, img.label as usize);
                let loss_f = loss.to_f64().unwrap_or(f64::NAN);
                if !loss_f.is_finite() {
                    return Err(Error::Diverged { epoch, batch: batch_idx });
                }
                loss_sum += loss_f;
                let grads = backward(&cache, img.label as usize, &params, &fixed, cfg);
                batch_grads.accumulate(&grads);
            }
            batch_grads.scale(F::one() / F::from_usize(chunk.len()).unwrap());
            adam.step(&mut params, &batch_grads, &tc.adam);
        }

        let test_accuracy = evaluate(
            &params,
            cfg,
            &fixed,
            eval_subset,
            tc.epoch_eval_draws,
            &epoch_eval_stream.substream(&[epoch as u64]),
        );
        metrics.push(EpochMetrics {
            epoch,
            train_loss: loss_sum / n as f64,
            test_accuracy,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
    }

    let final_accuracy =
        evaluate(&params, cfg, &fixed, &test_set.images, tc.eval_draws, &root.stream("eval"));
    Ok(TrainResult { params, metrics, final_accuracy })
}

/// Recompute the reported accuracy of a finished run (used by checkpoint
/// evaluation): same seed, same streams, same draw count.
pub fn final_evaluation<F: Scalar>(
    params: &ModelParams<F>,
    cfg: &ExperimentConfig,
    test_set: &Dataset,
    eval_draws: usize,
    seed: u64,
) -> f64 {
    let fixed = FixedPropagation::<F>::build(cfg);
    evaluate(
        params,
        cfg,
        &fixed,
        &test_set.images,
        eval_draws,
        &SeededRng::from_seed(seed).stream("eval"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Scheme;
    use crate::data::Split;

    /// Synthetic two-class set: class 0 dim images, class 1 bright, plus a
    /// deterministic texture so the task is learnable but not degenerate.
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

    fn toy_cfg(scheme: Scheme) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default_for(scheme);
        cfg.n_t = 2;
        cfg.n_s = 2;
        cfg.n_r = 2;
        cfg.m = 4;
        cfg.height = 4;
        cfg.width = 4;
        cfg.snr_db = 10.0;
        cfg
    }

    fn toy_tc(epochs: usize) -> TrainConfig {
        TrainConfig {
            batch_size: 32,
            epochs,
            seed: 7,
            epoch_eval_size: 64,
            epoch_eval_draws: 1,
            eval_draws: 2,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_epochs_returns_initial_params() {
        let cfg = toy_cfg(Scheme::NoOtaNonlinear);
        let train_set = toy_dataset(32, 4, 4, Split::Train);
        let test_set = toy_dataset(32, 4, 4, Split::Test);
        let result = train::<f64>(&cfg, &toy_tc(0), &train_set, &test_set).unwrap();
        assert!(result.metrics.is_empty());
        let want = ModelParams::<f64>::init(&cfg, &mut SeededRng::from_seed(7).stream("init"));
        assert_eq!(result.params, want);
    }

    #[test]
    fn toy_training_loss_decreases() {
        let cfg = toy_cfg(Scheme::NoOtaNonlinear);
        let train_set = toy_dataset(200, 4, 4, Split::Train);
        let test_set = toy_dataset(64, 4, 4, Split::Test);
        let result = train::<f64>(&cfg, &toy_tc(5), &train_set, &test_set).unwrap();
        let losses: Vec<f64> = result.metrics.iter().map(|m| m.train_loss).collect();
        assert_eq!(losses.len(), 5);
        for i in 1..losses.len() {
            assert!(
                losses[i] < losses[i - 1],
                "loss not strictly decreasing: {losses:?}"
            );
        }
    }

    #[test]
    fn toy_task_is_learned() {
        // Brightness-separable two-class set: a longer run at a higher
        // learning rate should essentially solve it.
        let cfg = toy_cfg(Scheme::NoOtaNonlinear);
        let train_set = toy_dataset(200, 4, 4, Split::Train);
        let test_set = toy_dataset(64, 4, 4, Split::Test);
        let mut tc = toy_tc(20);
        tc.adam.lr = 1e-2;
        let result = train::<f64>(&cfg, &tc, &train_set, &test_set).unwrap();
        assert!(result.final_accuracy > 0.9, "final accuracy {}", result.final_accuracy);
    }

    #[test]
    fn same_seed_reproduces_trajectory() {
        let cfg = toy_cfg(Scheme::RelayNonlinear);
        let train_set = toy_dataset(96, 4, 4, Split::Train);
        let test_set = toy_dataset(32, 4, 4, Split::Test);
        let a = train::<f64>(&cfg, &toy_tc(3), &train_set, &test_set).unwrap();
        let b = train::<f64>(&cfg, &toy_tc(3), &train_set, &test_set).unwrap();
        for (ma, mb) in a.metrics.iter().zip(&b.metrics) {
            assert!((ma.train_loss - mb.train_loss).abs() < 1e-12);
            assert_eq!(ma.test_accuracy, mb.test_accuracy);
        }
        assert_eq!(a.params, b.params);
        assert_eq!(a.final_accuracy, b.final_accuracy);
    }

    #[test]
    fn epoch_eval_settings_do_not_affect_training() {
        // Evaluation pulls from its own streams; changing its draw count must
        // leave the training trajectory and parameters untouched.
        let cfg = toy_cfg(Scheme::RelayNonlinear);
        let train_set = toy_dataset(64, 4, 4, Split::Train);
        let test_set = toy_dataset(32, 4, 4, Split::Test);
        let mut tc_a = toy_tc(2);
        tc_a.epoch_eval_draws = 1;
        let mut tc_b = toy_tc(2);
        tc_b.epoch_eval_draws = 3;
        let a = train::<f64>(&cfg, &tc_a, &train_set, &test_set).unwrap();
        let b = train::<f64>(&cfg, &tc_b, &train_set, &test_set).unwrap();
        for (ma, mb) in a.metrics.iter().zip(&b.metrics) {
            assert_eq!(ma.train_loss, mb.train_loss);
        }
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn untrained_accuracy_is_near_chance() {
        let cfg = toy_cfg(Scheme::RelayNonlinear);
        // 10-class labels spread uniformly.
        let mut rng = SeededRng::from_seed(1).stream("labels");
        let images: Vec<LabeledImage> = (0..400)
            .map(|_| LabeledImage {
                pixels: (0..16).map(|_| rng.below(256) as u8).collect(),
                label: rng.below(10) as u8,
            })
            .collect();
        let test_set = Dataset { images, height: 4, width: 4, split: Split::Test };
        let params = ModelParams::<f64>::init(&cfg, &mut SeededRng::from_seed(5).stream("init"));
        let fixed = FixedPropagation::build(&cfg);
        let acc = evaluate(
            &params,
            &cfg,
            &fixed,
            &test_set.images,
            4,
            &SeededRng::from_seed(2).stream("eval"),
        );
        assert!(acc < 0.3, "untrained accuracy suspiciously high: {acc}");
    }

    #[test]
    fn no_ota_accuracy_identical_across_draws() {
        let cfg = toy_cfg(Scheme::NoOtaNonlinear);
        let test_set = toy_dataset(64, 4, 4, Split::Test);
        let params = ModelParams::<f64>::init(&cfg, &mut SeededRng::from_seed(5).stream("init"));
        let fixed = FixedPropagation::build(&cfg);
        let (_, per_draw) = evaluate_detailed(
            &params,
            &cfg,
            &fixed,
            &test_set.images,
            5,
            &SeededRng::from_seed(3).stream("eval"),
        );
        assert!(per_draw.windows(2).all(|w| w[0] == w[1]), "{per_draw:?}");
    }

    #[test]
    fn divergence_reports_coordinates() {
        // An absurd learning rate blows the (unsaturated) linear head up to
        // ~1e160 after one step; the next batch overflows the logits and the
        // non-finite loss must abort with coordinates.
        let cfg = toy_cfg(Scheme::NoOtaLinear);
        let train_set = toy_dataset(64, 4, 4, Split::Train);
        let test_set = toy_dataset(16, 4, 4, Split::Test);
        let mut tc = toy_tc(1);
        tc.adam.lr = 1e160;
        match train::<f64>(&cfg, &tc, &train_set, &test_set) {
            Err(Error::Diverged { epoch: 0, batch }) => assert!(batch >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
