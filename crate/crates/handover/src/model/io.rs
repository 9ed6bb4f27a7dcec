//! Versioned binary model format.
//!
//! Layout: magic "HGRM", format version (u32 LE), architecture descriptor
//! (input, hidden, latent, steps, param count as u32 LE), normalization
//! stats (6 f64 LE), parameters (f64 LE in flat layout order), then a
//! SHA-256 checksum of everything before it.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{
    NormStats, VaeLstmModel, HIDDEN_DIM, INPUT_DIM, LATENT_DIM, PARAM_COUNT, WINDOW_STEPS,
};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"HGRM";
const FORMAT_VERSION: u32 = 1;

pub fn save_model(model: &VaeLstmModel, path: &Path) -> Result<()> {
    model.validate()?;
    let mut buf = Vec::with_capacity(4 + 4 + 5 * 4 + 6 * 8 + PARAM_COUNT * 8 + 32);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for dim in [
        INPUT_DIM as u32,
        HIDDEN_DIM as u32,
        LATENT_DIM as u32,
        WINDOW_STEPS as u32,
        PARAM_COUNT as u32,
    ] {
        buf.extend_from_slice(&dim.to_le_bytes());
    }
    for c in 0..3 {
        buf.extend_from_slice(&model.norm.mean[c].to_le_bytes());
    }
    for c in 0..3 {
        buf.extend_from_slice(&model.norm.std[c].to_le_bytes());
    }
    for &p in &model.params {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    fs::write(path, &buf).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<VaeLstmModel> {
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    let body_len = buf
        .len()
        .checked_sub(32)
        .ok_or_else(|| Error::ModelFormat("file shorter than its checksum".into()))?;
    let (body, checksum) = buf.split_at(body_len);
    if body.len() < 4 + 4 + 5 * 4 {
        return Err(Error::ModelFormat("truncated header".into()));
    }
    if &body[..4] != MAGIC {
        return Err(Error::ModelFormat("bad magic bytes".into()));
    }
    let digest = Sha256::digest(body);
    if digest.as_slice() != checksum {
        return Err(Error::ModelFormat("checksum mismatch".into()));
    }
    let mut off = 4;
    let read_u32 = |off: &mut usize| -> u32 {
        let v = u32::from_le_bytes(body[*off..*off + 4].try_into().unwrap());
        *off += 4;
        v
    };
    let version = read_u32(&mut off);
    if version != FORMAT_VERSION {
        return Err(Error::ModelVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let dims = [
        read_u32(&mut off),
        read_u32(&mut off),
        read_u32(&mut off),
        read_u32(&mut off),
        read_u32(&mut off),
    ];
    let expected = [
        INPUT_DIM as u32,
        HIDDEN_DIM as u32,
        LATENT_DIM as u32,
        WINDOW_STEPS as u32,
        PARAM_COUNT as u32,
    ];
    if dims != expected {
        return Err(Error::ModelFormat(format!(
            "architecture {dims:?} does not match {expected:?}"
        )));
    }
    let need = off + 6 * 8 + PARAM_COUNT * 8;
    if body.len() != need {
        return Err(Error::ModelFormat(format!(
            "body of {} bytes, expected {need}",
            body.len()
        )));
    }
    let read_f64 = |off: &mut usize| -> f64 {
        let v = f64::from_le_bytes(body[*off..*off + 8].try_into().unwrap());
        *off += 8;
        v
    };
    let mut norm = NormStats {
        mean: [0.0; 3],
        std: [0.0; 3],
    };
    for c in 0..3 {
        norm.mean[c] = read_f64(&mut off);
    }
    for c in 0..3 {
        norm.std[c] = read_f64(&mut off);
    }
    let params = (0..PARAM_COUNT).map(|_| read_f64(&mut off)).collect();
    let model = VaeLstmModel { params, norm };
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ForwardMode, GripWindow, WINDOW_STEPS};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let model = VaeLstmModel::random(21);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_model(&model, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn eval_outputs_survive_round_trip() {
        let model = VaeLstmModel::random(22);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_model(&model, &path).unwrap();
        let back = load_model(&path).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let w = GripWindow {
                series: (0..WINDOW_STEPS)
                    .map(|_| [rng.gen_range(-8.0..8.0), rng.gen_range(-2.0..8.0), 1.4])
                    .collect(),
                t_e: -(rng.gen_range(0..=215) as i64),
                label: 0,
            };
            let a = model.forward(&w, ForwardMode::Eval).unwrap().p;
            let b = back.forward(&w, ForwardMode::Eval).unwrap().p;
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn truncated_file_is_rejected() {
        let model = VaeLstmModel::random(23);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_model(&model, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        for cut in [0, 3, 10, bytes.len() / 2, bytes.len() - 1] {
            let short = dir.path().join("short.bin");
            std::fs::write(&short, &bytes[..cut]).unwrap();
            assert!(matches!(load_model(&short), Err(Error::ModelFormat(_))));
        }
    }

    #[test]
    fn corrupted_and_future_versions_are_rejected() {
        let model = VaeLstmModel::random(24);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_model(&model, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        // Flip one parameter byte: checksum must catch it.
        let k = bytes.len() / 2;
        bytes[k] ^= 0xff;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_model(&path), Err(Error::ModelFormat(_))));

        // Bump the version and rewrite a valid checksum: version gate fires.
        let mut bytes = {
            save_model(&model, &path).unwrap();
            std::fs::read(&path).unwrap()
        };
        bytes[4..8].copy_from_slice(&9u32.to_le_bytes());
        let body_len = bytes.len() - 32;
        let digest = sha2::Sha256::digest(&bytes[..body_len]);
        bytes[body_len..].copy_from_slice(&digest);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_model(&path),
            Err(Error::ModelVersion {
                found: 9,
                expected: 1
            })
        ));
    }
}
