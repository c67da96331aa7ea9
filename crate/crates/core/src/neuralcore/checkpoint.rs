//! Binary checkpoint format, all integers and floats little-endian:
//!
//! ```text
//! magic        5 bytes  "OBSW1"
//! config       u32 d, u32 gcn layers, u32 hidden count, u32 widths...,
//!              u32 k, f64 psi, f64 lr, u32 pretrain epochs,
//!              u32 finetune epochs, u32 batch size, u64 seed
//! tensors      u32 count, then per tensor:
//!              u32 name length, name (UTF-8), u32 rank, u32 dims...,
//!              f64 values in row-major order
//! ```

use std::fs;
use std::path::Path;

use super::weights::ModelWeights;
use super::ModelConfig;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 5] = b"OBSW1";

fn put_u32(out: &mut Vec<u8>, x: usize) {
    out.extend_from_slice(&(x as u32).to_le_bytes());
}

pub fn encode_checkpoint(weights: &ModelWeights, config: &ModelConfig) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    put_u32(&mut out, config.d);
    put_u32(&mut out, config.n_gcn_layers);
    put_u32(&mut out, config.mlp_hidden.len());
    for &w in &config.mlp_hidden {
        put_u32(&mut out, w);
    }
    put_u32(&mut out, config.k);
    out.extend_from_slice(&config.psi.to_le_bytes());
    out.extend_from_slice(&config.lr.to_le_bytes());
    put_u32(&mut out, config.epochs_pretrain);
    put_u32(&mut out, config.epochs_finetune);
    put_u32(&mut out, config.batch_size);
    out.extend_from_slice(&config.seed.to_le_bytes());

    let tensors = weights.tensors();
    put_u32(&mut out, tensors.len());
    for t in tensors {
        put_u32(&mut out, t.name.len());
        out.extend_from_slice(t.name.as_bytes());
        put_u32(&mut out, t.shape.len());
        for &d in &t.shape {
            put_u32(&mut out, d);
        }
        for x in t.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(ModelWeights, ModelConfig)> {
    if bytes.len() < CHECKPOINT_MAGIC.len() || &bytes[..5] != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic, expected OBSW1".into()));
    }
    let mut r = Reader { bytes, pos: 5 };
    let d = r.u32()?;
    let n_gcn_layers = r.u32()?;
    let hidden = r.u32()?;
    if hidden > 64 {
        return Err(Error::Checkpoint(format!(
            "implausible head depth {hidden}"
        )));
    }
    let mlp_hidden = (0..hidden).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let config = ModelConfig {
        d,
        n_gcn_layers,
        mlp_hidden,
        k: r.u32()?,
        psi: r.f64()?,
        lr: r.f64()?,
        epochs_pretrain: r.u32()?,
        epochs_finetune: r.u32()?,
        batch_size: r.u32()?,
        seed: r.u64()?,
    };
    config
        .validate()
        .map_err(|e| Error::Checkpoint(format!("config block: {e}")))?;

    let count = r.u32()?;
    let mut named = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.u32()?;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.u32()?;
        let shape = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let size: usize = shape.iter().product();
        let data = (0..size).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        named.push((name, shape, data));
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }

    let with_recon = named.iter().any(|(n, _, _)| n.starts_with("recon."));
    let mut weights = ModelWeights::zeros(&config, with_recon);
    let mut slots = weights.tensors_mut();
    if slots.len() != named.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} tensors for this config, found {}",
            slots.len(),
            named.len()
        )));
    }
    for (slot, (name, shape, data)) in slots.iter_mut().zip(named) {
        if slot.name != name || slot.shape != shape {
            return Err(Error::Checkpoint(format!(
                "tensor {name} {shape:?} does not match expected {} {:?}",
                slot.name, slot.shape
            )));
        }
        slot.data.copy_from_slice(&data);
    }
    drop(slots);
    Ok((weights, config))
}

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    weights: &ModelWeights,
    config: &ModelConfig,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(weights, config)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ModelWeights, ModelConfig)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> ModelConfig {
        ModelConfig {
            d: 6,
            mlp_hidden: vec![5],
            seed: 3,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let cfg = config();
        let w = ModelWeights::init(&cfg);
        let bytes = encode_checkpoint(&w, &cfg);
        let (w2, cfg2) = decode_checkpoint(&bytes).unwrap();
        assert_eq!(cfg2, cfg);
        assert_eq!(encode_checkpoint(&w2, &cfg2), bytes);
        for (a, b) in w.tensors().iter().zip(w2.tensors()) {
            assert!(a
                .data
                .iter()
                .zip(b.data)
                .all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn without_reconstruction_heads() {
        let cfg = config();
        let mut w = ModelWeights::init(&cfg);
        w.reconstruction.clear();
        let (w2, _) = decode_checkpoint(&encode_checkpoint(&w, &cfg)).unwrap();
        assert_eq!(w2, w);
    }

    #[test]
    fn corrupted_header() {
        let cfg = config();
        let mut bytes = encode_checkpoint(&ModelWeights::init(&cfg), &cfg);
        bytes[0] = b'X';
        assert!(matches!(
            decode_checkpoint(&bytes),
            Err(Error::Checkpoint(_))
        ));
    }

    #[test]
    fn shape_mismatch_and_truncation() {
        let cfg = config();
        let mut bytes = encode_checkpoint(&ModelWeights::init(&cfg), &cfg);
        // Claim d = 7 in the config block.
        bytes[5] = 7;
        assert!(decode_checkpoint(&bytes).is_err());
        let bytes = encode_checkpoint(&ModelWeights::init(&cfg), &cfg);
        assert!(decode_checkpoint(&bytes[..bytes.len() - 3]).is_err());
    }
}
