//! Checkpoint files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic          8 bytes  "WPNNCKP1"
//! config_json    u32 length + UTF-8 JSON of the experiment config
//! train_json     u32 length + UTF-8 JSON of the training config
//! rng_id         u32 length + UTF-8 generator identifier
//! field_count    u32
//! per field:
//!   name         u32 length + UTF-8
//!   kind         u8   (0 = real, 1 = complex)
//!   rows, cols   u64, u64
//!   data         rows*cols f64 values (interleaved re, im when complex)
//! ```
//!
//! Parameter shapes are re-derived from the embedded config and verified on
//! load.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;
use crate::params::ModelParams;
use crate::rng::RNG_ALGORITHM_ID;
use crate::scalar::Scalar;
use crate::train::TrainConfig;

const MAGIC: &[u8; 8] = b"WPNNCKP1";

/// A loaded checkpoint: configs, generator id, and parameters (always f64 on
/// disk).
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub experiment: ExperimentConfig,
    pub train: TrainConfig,
    pub rng_id: String,
    pub params: ModelParams<f64>,
}

enum FieldKind {
    Real,
    Cplx,
}

fn write_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn write_field_real<F: Scalar>(out: &mut Vec<u8>, name: &str, rows: usize, cols: usize, data: &[F]) {
    assert_eq!(data.len(), rows * cols);
    write_str(out, name);
    out.push(0);
    out.extend_from_slice(&(rows as u64).to_le_bytes());
    out.extend_from_slice(&(cols as u64).to_le_bytes());
    for v in data {
        out.extend_from_slice(&v.to_f64().unwrap().to_le_bytes());
    }
}

fn write_field_cplx<F: Scalar>(
    out: &mut Vec<u8>,
    name: &str,
    rows: usize,
    cols: usize,
    data: &[Complex<F>],
) {
    assert_eq!(data.len(), rows * cols);
    write_str(out, name);
    out.push(1);
    out.extend_from_slice(&(rows as u64).to_le_bytes());
    out.extend_from_slice(&(cols as u64).to_le_bytes());
    for v in data {
        out.extend_from_slice(&v.re.to_f64().unwrap().to_le_bytes());
        out.extend_from_slice(&v.im.to_f64().unwrap().to_le_bytes());
    }
}

/// Serialize a checkpoint to bytes.
pub fn to_bytes<F: Scalar>(
    cfg: &ExperimentConfig,
    tc: &TrainConfig,
    params: &ModelParams<F>,
) -> Vec<u8> {
    params.assert_matches(cfg);
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    write_str(&mut out, &serde_json::to_string(cfg).expect("config serializable"));
    write_str(&mut out, &serde_json::to_string(tc).expect("train config serializable"));
    write_str(&mut out, RNG_ALGORITHM_ID);

    let mut fields: Vec<u8> = Vec::new();
    let mut count: u32 = 0;
    for (l, row) in params.theta_t.iter().enumerate() {
        write_field_real(&mut fields, &format!("theta_t.{l}"), 1, row.len(), row);
        count += 1;
    }
    for (l, row) in params.theta_r.iter().enumerate() {
        write_field_real(&mut fields, &format!("theta_r.{l}"), 1, row.len(), row);
        count += 1;
    }
    for (l, row) in params.b_t.iter().enumerate() {
        write_field_cplx(&mut fields, &format!("b_t.{l}"), 1, row.len(), row);
        count += 1;
    }
    for (l, row) in params.b_r.iter().enumerate() {
        write_field_cplx(&mut fields, &format!("b_r.{l}"), 1, row.len(), row);
        count += 1;
    }
    if let Some(z) = &params.z {
        write_field_cplx(&mut fields, "z", z.rows(), z.cols(), z.entries());
        count += 1;
        write_field_cplx(&mut fields, "b_s", 1, params.b_s.len(), &params.b_s);
        count += 1;
    }
    write_field_real(
        &mut fields,
        "fc_weight",
        cfg.num_classes,
        cfg.feature_len(),
        &params.fc_weight,
    );
    count += 1;
    write_field_real(&mut fields, "fc_bias", 1, params.fc_bias.len(), &params.fc_bias);
    count += 1;

    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&fields);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Checkpoint(format!(
                "truncated at byte {} (wanted {n} more)",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| Error::Checkpoint("invalid UTF-8 string".into()))
    }
}

/// Deserialize a checkpoint from bytes.
pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic; not a checkpoint file".into()));
    }
    let cfg: ExperimentConfig = serde_json::from_str(&r.string()?)
        .map_err(|e| Error::Checkpoint(format!("config echo unreadable: {e}")))?;
    let tc: TrainConfig = serde_json::from_str(&r.string()?)
        .map_err(|e| Error::Checkpoint(format!("train config echo unreadable: {e}")))?;
    let rng_id = r.string()?;
    let field_count = r.u32()?;

    let mut real_fields: std::collections::HashMap<String, (usize, usize, Vec<f64>)> =
        std::collections::HashMap::new();
    let mut cplx_fields: std::collections::HashMap<String, (usize, usize, Vec<Complex<f64>>)> =
        std::collections::HashMap::new();
    for _ in 0..field_count {
        let name = r.string()?;
        let kind = match r.u8()? {
            0 => FieldKind::Real,
            1 => FieldKind::Cplx,
            k => return Err(Error::Checkpoint(format!("unknown field kind {k}"))),
        };
        let rows = r.u64()? as usize;
        let cols = r.u64()? as usize;
        match kind {
            FieldKind::Real => {
                let mut data = Vec::with_capacity(rows * cols);
                for _ in 0..rows * cols {
                    data.push(r.f64()?);
                }
                real_fields.insert(name, (rows, cols, data));
            }
            FieldKind::Cplx => {
                let mut data = Vec::with_capacity(rows * cols);
                for _ in 0..rows * cols {
                    let re = r.f64()?;
                    let im = r.f64()?;
                    data.push(Complex::new(re, im));
                }
                cplx_fields.insert(name, (rows, cols, data));
            }
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after field table",
            bytes.len() - r.pos
        )));
    }

    let mut take_real = |name: &str, rows: usize, cols: usize| -> Result<Vec<f64>> {
        match real_fields.remove(name) {
            Some((r0, c0, data)) if (r0, c0) == (rows, cols) => Ok(data),
            Some((r0, c0, _)) => Err(Error::Checkpoint(format!(
                "field {name}: shape {r0}x{c0}, expected {rows}x{cols}"
            ))),
            None => Err(Error::Checkpoint(format!("missing field {name}"))),
        }
    };
    let mut take_cplx = |name: &str, rows: usize, cols: usize| -> Result<Vec<Complex<f64>>> {
        match cplx_fields.remove(name) {
            Some((r0, c0, data)) if (r0, c0) == (rows, cols) => Ok(data),
            Some((r0, c0, _)) => Err(Error::Checkpoint(format!(
                "field {name}: shape {r0}x{c0}, expected {rows}x{cols}"
            ))),
            None => Err(Error::Checkpoint(format!("missing field {name}"))),
        }
    };

    let theta_t: Vec<Vec<f64>> = (0..cfg.l)
        .map(|l| take_real(&format!("theta_t.{l}"), 1, cfg.m))
        .collect::<Result<_>>()?;
    let theta_r: Vec<Vec<f64>> = (0..cfg.l)
        .map(|l| take_real(&format!("theta_r.{l}"), 1, cfg.m))
        .collect::<Result<_>>()?;
    let b_t: Vec<Vec<Complex<f64>>> = (0..cfg.l)
        .map(|l| take_cplx(&format!("b_t.{l}"), 1, cfg.m))
        .collect::<Result<_>>()?;
    let b_r: Vec<Vec<Complex<f64>>> = (0..cfg.l)
        .map(|l| take_cplx(&format!("b_r.{l}"), 1, cfg.m))
        .collect::<Result<_>>()?;
    let (z, b_s) = match cfg.z_shape() {
        Some((rows, cols)) => {
            let z = ComplexMatrix::from_vec(rows, cols, take_cplx("z", rows, cols)?);
            let b_s = take_cplx("b_s", 1, cfg.n_s)?;
            (Some(z), b_s)
        }
        None => (None, Vec::new()),
    };
    let fc_weight = take_real("fc_weight", cfg.num_classes, cfg.feature_len())?;
    let fc_bias = take_real("fc_bias", 1, cfg.num_classes)?;

    let params = ModelParams { theta_t, theta_r, b_t, b_r, z, b_s, fc_weight, fc_bias };
    params.assert_matches(&cfg);
    Ok(Checkpoint { experiment: cfg, train: tc, rng_id, params })
}

/// Write a checkpoint file.
pub fn save<F: Scalar>(
    path: &Path,
    cfg: &ExperimentConfig,
    tc: &TrainConfig,
    params: &ModelParams<F>,
) -> Result<()> {
    let bytes = to_bytes(cfg, tc, params);
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

/// Read a checkpoint file.
pub fn load(path: &Path) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Scheme;
    use crate::rng::SeededRng;

    fn tiny_cfg(scheme: Scheme) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default_for(scheme);
        cfg.n_t = 2;
        cfg.n_s = 2;
        cfg.n_r = 2;
        cfg.m = 4;
        cfg.height = 3;
        cfg.width = 4;
        cfg
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for scheme in Scheme::ALL {
            let cfg = tiny_cfg(scheme);
            let tc = TrainConfig { seed: 42, ..TrainConfig::default() };
            let params = ModelParams::<f64>::init(&cfg, &mut SeededRng::from_seed(9).stream("init"));
            let bytes = to_bytes(&cfg, &tc, &params);
            let ckpt = from_bytes(&bytes).unwrap();
            assert_eq!(ckpt.experiment, cfg);
            assert_eq!(ckpt.train, tc);
            assert_eq!(ckpt.rng_id, RNG_ALGORITHM_ID);
            assert_eq!(ckpt.params, params);
            // Serialize again: byte-identical.
            assert_eq!(to_bytes(&ckpt.experiment, &ckpt.train, &ckpt.params), bytes);
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let cfg = tiny_cfg(Scheme::RelayNonlinear);
        let tc = TrainConfig::default();
        let params = ModelParams::<f64>::init(&cfg, &mut SeededRng::from_seed(1).stream("init"));
        save(&path, &cfg, &tc, &params).unwrap();
        let ckpt = load(&path).unwrap();
        assert_eq!(ckpt.params, params);
    }

    #[test]
    fn corrupt_magic_rejected() {
        let cfg = tiny_cfg(Scheme::RelayNonlinear);
        let params = ModelParams::<f64>::init(&cfg, &mut SeededRng::from_seed(1).stream("init"));
        let mut bytes = to_bytes(&cfg, &TrainConfig::default(), &params);
        bytes[0] = b'X';
        assert!(matches!(from_bytes(&bytes), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn truncated_file_rejected() {
        let cfg = tiny_cfg(Scheme::RelayNonlinear);
        let params = ModelParams::<f64>::init(&cfg, &mut SeededRng::from_seed(1).stream("init"));
        let bytes = to_bytes(&cfg, &TrainConfig::default(), &params);
        assert!(from_bytes(&bytes[..bytes.len() - 3]).is_err());
    }
}
