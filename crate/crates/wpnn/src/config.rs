//! Experiment configuration: scheme variant, dimensions, SNR, geometry and
//! nonlinearity parameters. A config plus a seed fully determines a run.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nonlinear::{ActivationMode, RappParams};

/// The five evaluated system variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    /// Relay-assisted stack with activation metasurfaces and a saturating
    /// relay amplifier.
    RelayNonlinear,
    /// Relay-assisted stack with all nonlinearities disabled.
    RelayLinear,
    /// Relay amplify-and-forward without least-squares channel processing.
    RelayNoCp,
    /// Directly connected stacks (no relay, no fading, no noise), nonlinear.
    NoOtaNonlinear,
    /// Directly connected stacks, passive layers only.
    NoOtaLinear,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::RelayNonlinear,
        Scheme::RelayLinear,
        Scheme::RelayNoCp,
        Scheme::NoOtaNonlinear,
        Scheme::NoOtaLinear,
    ];

    /// Whether the signal traverses the relay and fading channels.
    pub fn uses_relay(self) -> bool {
        matches!(self, Scheme::RelayNonlinear | Scheme::RelayLinear | Scheme::RelayNoCp)
    }

    /// Whether the relay applies least-squares channel processing.
    pub fn uses_channel_processing(self) -> bool {
        matches!(self, Scheme::RelayNonlinear | Scheme::RelayLinear)
    }

    /// Activation-metasurface mode (linear variants disable it).
    pub fn activation_mode(self) -> ActivationMode {
        match self {
            Scheme::RelayNonlinear | Scheme::RelayNoCp | Scheme::NoOtaNonlinear => {
                ActivationMode::RappAmplitude
            }
            Scheme::RelayLinear | Scheme::NoOtaLinear => ActivationMode::Identity,
        }
    }

    /// Relay power-amplifier mode (linear variant assumes an ideal PA).
    pub fn pa_mode(self) -> ActivationMode {
        match self {
            Scheme::RelayNonlinear | Scheme::RelayNoCp => ActivationMode::RappAmplitude,
            _ => ActivationMode::Identity,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::RelayNonlinear => "RelayNonlinear",
            Scheme::RelayLinear => "RelayLinear",
            Scheme::RelayNoCp => "RelayNoCp",
            Scheme::NoOtaNonlinear => "NoOtaNonlinear",
            Scheme::NoOtaLinear => "NoOtaLinear",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "RelayNonlinear" => Ok(Scheme::RelayNonlinear),
            "RelayLinear" => Ok(Scheme::RelayLinear),
            "RelayNoCp" => Ok(Scheme::RelayNoCp),
            "NoOtaNonlinear" => Ok(Scheme::NoOtaNonlinear),
            "NoOtaLinear" => Ok(Scheme::NoOtaLinear),
            other => Err(Error::InvalidConfig(format!(
                "unknown scheme {other:?}; expected one of RelayNonlinear, RelayLinear, RelayNoCp, NoOtaNonlinear, NoOtaLinear"
            ))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How the receive-side fading is shaped (the paper leaves the relay-to-stack
/// hop's dimensions open).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RxFading {
    /// Relay-antenna-space fading (N_s x N_s) followed by the near-field
    /// relay-to-layer coefficients W_1^r (M x N_s). Default.
    Split,
    /// Fading straight into layer space (M x N_s); W_1^r becomes identity.
    Direct,
}

/// Full model/system configuration for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Transmit antenna count.
    pub n_t: usize,
    /// Relay antenna count.
    pub n_s: usize,
    /// Receive antenna count.
    pub n_r: usize,
    /// Meta-atoms per metasurface layer.
    pub m: usize,
    /// Passive (and activation) layer pairs per side.
    pub l: usize,
    /// Image channels.
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    /// Classifier output classes.
    pub num_classes: usize,
    pub snr_db: f64,
    pub scheme: Scheme,
    /// Normalize mean signal power to 1 before each fading channel.
    pub normalize_power: bool,
    /// Relay power-amplifier saturation parameters.
    pub pa: RappParams,
    /// Activation-metasurface saturation parameters.
    pub activation: RappParams,
    /// Ridge added to the least-squares normal equations.
    pub pinv_ridge: f64,
    pub rx_fading: RxFading,
    pub carrier_hz: f64,
    pub antenna_gap_wavelengths: f64,
    pub layer_gap_wavelengths: f64,
    pub element_area_wavelengths_sq: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::default_for(Scheme::RelayNonlinear)
    }
}

impl ExperimentConfig {
    /// Default system parameters: L=1, N_t=N_s=N_r=14, M=16, f_c=2.2 GHz,
    /// 10λ antenna gap, 2λ layer gap, A=λ²/4, 28x28 grayscale inputs.
    pub fn default_for(scheme: Scheme) -> Self {
        Self {
            n_t: 14,
            n_s: 14,
            n_r: 14,
            m: 16,
            l: 1,
            channels: 1,
            height: 28,
            width: 28,
            num_classes: 10,
            snr_db: 0.0,
            scheme,
            normalize_power: true,
            pa: RappParams::default(),
            activation: RappParams::default(),
            pinv_ridge: 1e-12,
            rx_fading: RxFading::Split,
            carrier_hz: 2.2e9,
            antenna_gap_wavelengths: 10.0,
            layer_gap_wavelengths: 2.0,
            element_area_wavelengths_sq: 0.25,
        }
    }

    /// Flattened pixel count C·H·W.
    pub fn pixel_count(&self) -> usize {
        self.channels * self.height * self.width
    }

    /// Feature columns K = ceil(C·H·W / (2·N_t)). When the pixel count is not
    /// divisible the tail of the last column is zero-padded.
    pub fn k(&self) -> usize {
        self.pixel_count().div_ceil(2 * self.n_t)
    }

    /// Classifier input width 2·N_r·K.
    pub fn feature_len(&self) -> usize {
        2 * self.n_r * self.k()
    }

    /// Shape of the relay amplification matrix, if the scheme has a relay.
    pub fn z_shape(&self) -> Option<(usize, usize)> {
        match self.scheme {
            Scheme::RelayNonlinear | Scheme::RelayLinear => Some((self.n_s, self.m)),
            Scheme::RelayNoCp => Some((self.n_s, self.n_s)),
            Scheme::NoOtaNonlinear | Scheme::NoOtaLinear => None,
        }
    }

    /// Shape of the relay-to-receiver fading matrix.
    pub fn g_r_shape(&self) -> (usize, usize) {
        match self.rx_fading {
            RxFading::Split => (self.n_s, self.n_s),
            RxFading::Direct => (self.m, self.n_s),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_t", self.n_t),
            ("n_s", self.n_s),
            ("n_r", self.n_r),
            ("m", self.m),
            ("l", self.l),
            ("channels", self.channels),
            ("height", self.height),
            ("width", self.width),
            ("num_classes", self.num_classes),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if !self.pa.validate() || !self.activation.validate() {
            return Err(Error::InvalidConfig("rapp parameters must be positive".into()));
        }
        if !(self.pinv_ridge >= 0.0) {
            return Err(Error::InvalidConfig("pinv_ridge must be nonnegative".into()));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::InvalidConfig("snr_db must be finite".into()));
        }
        if self.carrier_hz <= 0.0
            || self.antenna_gap_wavelengths <= 0.0
            || self.layer_gap_wavelengths <= 0.0
            || self.element_area_wavelengths_sq <= 0.0
        {
            return Err(Error::InvalidConfig("geometry parameters must be positive".into()));
        }
        Ok(())
    }
}

/// Short deterministic hash of any serializable config bundle, used to key
/// sweep cells and checkpoints.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_string(value).expect("config serializable");
    let digest = Sha256::digest(json.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}
