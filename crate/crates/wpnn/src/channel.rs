//! Far-field Rayleigh fading, additive white Gaussian noise, and SNR
//! bookkeeping.
//!
//! Relay-related hops are far-field and modeled as i.i.d. CN(0,1) entries;
//! SNR in dB maps to the linear noise variance via `σ² = 10^(-SNR/10)`.

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::linalg::pseudoinverse;
use crate::matrix::ComplexMatrix;
use crate::rng::SeededRng;
use crate::scalar::{fl, Scalar};

/// Maximum channel redraws before conceding the generator is broken.
const MAX_DRAW_ATTEMPTS: usize = 16;

/// Noise level in both dB and linear form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub snr_db: f64,
    pub sigma2: f64,
}

impl NoiseSpec {
    pub fn from_snr_db(snr_db: f64) -> Self {
        Self { snr_db, sigma2: snr_to_sigma2(snr_db) }
    }
}

/// Linear noise variance for a given SNR in dB.
pub fn snr_to_sigma2(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Inverse map of [`snr_to_sigma2`].
pub fn sigma2_to_snr(sigma2: f64) -> f64 {
    -10.0 * sigma2.log10()
}

/// One joint realization of the relay-related fading matrices. The
/// pseudoinverse of the transmit-side channel is precomputed here so a
/// singular draw can be rejected and resampled immediately.
#[derive(Debug, Clone)]
pub struct ChannelDraw<F> {
    /// Stack-to-relay channel, N_s x M.
    pub g_t: ComplexMatrix<F>,
    /// Relay-to-stack channel, shape per [`ExperimentConfig::g_r_shape`].
    pub g_r: ComplexMatrix<F>,
    /// `G_t†`, present when the scheme applies least-squares processing.
    pub g_t_pinv: Option<ComplexMatrix<F>>,
    /// Stream position this draw came from.
    pub draw_id: u64,
}

/// Draw fading matrices from the "channel" stream, resampling (bounded) if
/// the least-squares system comes out numerically singular.
pub fn draw_channels<F: Scalar>(
    cfg: &ExperimentConfig,
    rng: &mut SeededRng,
    draw_id: u64,
) -> Result<ChannelDraw<F>> {
    assert!(cfg.scheme.uses_relay(), "channel draws only exist for relay schemes");
    let (gr_rows, gr_cols) = cfg.g_r_shape();
    for _ in 0..MAX_DRAW_ATTEMPTS {
        let g_t = rng.complex_gaussian_matrix::<F>(cfg.n_s, cfg.m, F::one());
        let g_r = rng.complex_gaussian_matrix::<F>(gr_rows, gr_cols, F::one());
        if !cfg.scheme.uses_channel_processing() {
            return Ok(ChannelDraw { g_t, g_r, g_t_pinv: None, draw_id });
        }
        match pseudoinverse(&g_t, fl::<F>(cfg.pinv_ridge)) {
            Ok(pinv) => return Ok(ChannelDraw { g_t, g_r, g_t_pinv: Some(pinv), draw_id }),
            Err(Error::SingularSystem { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::ChannelDrawFailed { attempts: MAX_DRAW_ATTEMPTS })
}

/// `x + N` with `N` i.i.d. CN(0, sigma2). Zero variance returns the input
/// unchanged.
pub fn add_awgn<F: Scalar>(
    x: &ComplexMatrix<F>,
    sigma2: F,
    rng: &mut SeededRng,
) -> ComplexMatrix<F> {
    assert!(sigma2 >= F::zero(), "noise variance must be nonnegative");
    if sigma2 == F::zero() {
        return x.clone();
    }
    let noise = rng.complex_gaussian_matrix::<F>(x.rows(), x.cols(), sigma2);
    x.add(&noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Scheme;

    #[test]
    fn snr_reference_points() {
        assert!((snr_to_sigma2(0.0) - 1.0).abs() < 1e-15);
        assert!((snr_to_sigma2(-20.0) - 100.0).abs() < 1e-12);
        assert!((snr_to_sigma2(30.0) - 0.001).abs() < 1e-15);
    }

    #[test]
    fn snr_round_trip_and_monotone() {
        let mut prev = f64::INFINITY;
        for snr in [-30.0, -20.0, -5.0, 0.0, 3.0, 10.0, 25.0, 40.0] {
            let s2 = snr_to_sigma2(snr);
            assert!(s2 < prev, "sigma2 not strictly decreasing in SNR");
            prev = s2;
            assert!((sigma2_to_snr(s2) - snr).abs() < 1e-12);
        }
        let spec = NoiseSpec::from_snr_db(-20.0);
        assert!((spec.sigma2 - 100.0).abs() / 100.0 < 1e-12);
    }

    #[test]
    fn draw_shapes_match_defaults() {
        let cfg = ExperimentConfig::default_for(Scheme::RelayNonlinear);
        let mut rng = SeededRng::from_seed(1).stream("channel");
        let draw = draw_channels::<f64>(&cfg, &mut rng, 0).unwrap();
        assert_eq!(draw.g_t.shape(), (14, 16));
        assert_eq!(draw.g_r.shape(), (14, 14));
        assert_eq!(draw.g_t_pinv.as_ref().unwrap().shape(), (16, 14));
    }

    #[test]
    fn draws_are_deterministic() {
        let cfg = ExperimentConfig::default_for(Scheme::RelayNonlinear);
        let a = draw_channels::<f64>(&cfg, &mut SeededRng::from_seed(3).stream("channel"), 0).unwrap();
        let b = draw_channels::<f64>(&cfg, &mut SeededRng::from_seed(3).stream("channel"), 0).unwrap();
        assert_eq!(a.g_t, b.g_t);
        assert_eq!(a.g_r, b.g_r);
    }

    #[test]
    fn pooled_entry_variance_near_one() {
        let cfg = ExperimentConfig::default_for(Scheme::RelayNonlinear);
        let mut rng = SeededRng::from_seed(11).stream("channel");
        let mut pow = 0.0;
        let mut count = 0usize;
        for id in 0..250 {
            let draw = draw_channels::<f64>(&cfg, &mut rng, id).unwrap();
            pow += draw.g_t.entries().iter().map(|c| c.norm_sqr()).sum::<f64>();
            pow += draw.g_r.entries().iter().map(|c| c.norm_sqr()).sum::<f64>();
            count += draw.g_t.entries().len() + draw.g_r.entries().len();
        }
        assert!(count > 100_000);
        let var = pow / count as f64;
        assert!((0.99..=1.01).contains(&var), "pooled variance {var}");
    }

    #[test]
    fn zero_noise_is_bit_identical() {
        let mut rng = SeededRng::from_seed(13).stream("t");
        let x = rng.complex_gaussian_matrix::<f64>(5, 7, 1.0);
        let mut noise_rng = SeededRng::from_seed(13).stream("noise");
        let y = add_awgn(&x, 0.0, &mut noise_rng);
        assert_eq!(x, y);
    }

    #[test]
    fn awgn_variance_matches_sigma2() {
        let mut rng = SeededRng::from_seed(17).stream("t");
        let x = ComplexMatrix::<f64>::zeros(100, 100);
        let mut noise_rng = SeededRng::from_seed(17).stream("noise");
        let mut pow = 0.0;
        for _ in 0..10 {
            let y = add_awgn(&x, 4.0, &mut noise_rng);
            pow += y.entries().iter().map(|c| c.norm_sqr()).sum::<f64>();
        }
        let var = pow / 100_000.0;
        assert!((3.96..=4.04).contains(&var), "noise variance {var}");
        let _ = rng.next_u64();
    }

    #[test]
    fn low_snr_noise_is_hundredfold() {
        let x = ComplexMatrix::<f64>::zeros(100, 100);
        let measure = |sigma2: f64| {
            let mut rng = SeededRng::from_seed(19).stream("noise");
            let mut pow = 0.0;
            for _ in 0..10 {
                let y = add_awgn(&x, sigma2, &mut rng);
                pow += y.entries().iter().map(|c| c.norm_sqr()).sum::<f64>();
            }
            pow / 100_000.0
        };
        let v_low = measure(snr_to_sigma2(-20.0));
        let v_mid = measure(snr_to_sigma2(0.0));
        let ratio = v_low / v_mid;
        assert!((ratio - 100.0).abs() / 100.0 < 0.02, "ratio {ratio}");
    }

    #[test]
    fn channel_stream_independent_of_noise_stream() {
        let cfg = ExperimentConfig::default_for(Scheme::RelayNonlinear);
        let root = SeededRng::from_seed(23);
        let plain = draw_channels::<f64>(&cfg, &mut root.stream("channel"), 0).unwrap();

        // Interleave noise draws; the channel sequence must not move.
        let mut noise = root.stream("noise");
        let _ = add_awgn(&ComplexMatrix::<f64>::zeros(4, 4), 1.0, &mut noise);
        let again = draw_channels::<f64>(&cfg, &mut root.stream("channel"), 0).unwrap();
        assert_eq!(plain.g_t, again.g_t);
    }
}
