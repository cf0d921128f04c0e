use super::HarnessError;
use crate::agent::Agent;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

/// Checkpoint container format (versioned, little-endian):
///
/// ```text
/// magic   8 bytes  "D2RLCKP1"
/// repeat:
///   tag       u8   0 = f64 tensor, 1 = raw bytes
///   name_len  u32
///   name      UTF-8 bytes
///   payload_len u64   (f64 count for tag 0, byte count for tag 1)
///   payload   f64 × payload_len | bytes
/// ```
///
/// Tensors cover every network parameter, optimizer moment, and step
/// counter (via `Agent::visit_state`), plus `meta.epoch`. The `rng.seed`
/// and `rng.word_pos` byte sections capture the generator state exactly.
const MAGIC: &[u8; 8] = b"D2RLCKP1";

#[derive(Debug, Default)]
pub struct Checkpoint {
    pub tensors: BTreeMap<String, Vec<f64>>,
    pub bytes: BTreeMap<String, Vec<u8>>,
}

impl Checkpoint {
    pub fn capture(agent: &Agent, rng: &ChaCha20Rng, epoch: usize) -> Self {
        let mut ckpt = Checkpoint::default();
        agent.visit_state(|name, vals| {
            ckpt.tensors.insert(name, vals.to_vec());
        });
        ckpt.tensors.insert("meta.epoch".into(), vec![epoch as f64]);
        ckpt.bytes.insert("rng.seed".into(), rng.get_seed().to_vec());
        ckpt.bytes
            .insert("rng.word_pos".into(), rng.get_word_pos().to_le_bytes().to_vec());
        ckpt
    }

    pub fn restore_into(
        &self,
        agent: &mut Agent,
        rng: &mut ChaCha20Rng,
    ) -> Result<usize, HarnessError> {
        agent
            .restore_state(&mut |name: &str| self.tensors.get(name).cloned())
            .map_err(|e| HarnessError::Checkpoint(e.to_string()))?;
        let seed: [u8; 32] = self
            .bytes
            .get("rng.seed")
            .and_then(|b| b.as_slice().try_into().ok())
            .ok_or_else(|| HarnessError::Checkpoint("missing rng.seed".into()))?;
        let pos_bytes: [u8; 16] = self
            .bytes
            .get("rng.word_pos")
            .and_then(|b| b.as_slice().try_into().ok())
            .ok_or_else(|| HarnessError::Checkpoint("missing rng.word_pos".into()))?;
        *rng = ChaCha20Rng::from_seed(seed);
        rng.set_word_pos(u128::from_le_bytes(pos_bytes));
        let epoch = self
            .tensors
            .get("meta.epoch")
            .and_then(|v| v.first())
            .copied()
            .unwrap_or(0.0) as usize;
        Ok(epoch)
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        for (name, vals) in &self.tensors {
            out.push(0u8);
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(vals.len() as u64).to_le_bytes());
            for v in vals {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        for (name, bytes) in &self.bytes {
            out.push(1u8);
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(bytes.len() as u64).to_le_bytes());
            out.extend_from_slice(bytes);
        }
        let mut file = std::fs::File::create(path)?;
        file.write_all(&out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let mut data = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut data)?;
        let corrupt = |what: &str| HarnessError::Checkpoint(format!("corrupt checkpoint: {what}"));
        if data.len() < 8 || &data[..8] != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let mut ckpt = Checkpoint::default();
        let mut off = 8;
        while off < data.len() {
            let tag = data[off];
            off += 1;
            let name_len =
                u32::from_le_bytes(data.get(off..off + 4).ok_or_else(|| corrupt("name len"))?.try_into().unwrap())
                    as usize;
            off += 4;
            let name = String::from_utf8(
                data.get(off..off + name_len).ok_or_else(|| corrupt("name"))?.to_vec(),
            )
            .map_err(|_| corrupt("name utf8"))?;
            off += name_len;
            let payload_len =
                u64::from_le_bytes(data.get(off..off + 8).ok_or_else(|| corrupt("payload len"))?.try_into().unwrap())
                    as usize;
            off += 8;
            match tag {
                0 => {
                    let byte_len = payload_len * 8;
                    let slice = data.get(off..off + byte_len).ok_or_else(|| corrupt("tensor"))?;
                    let vals = slice
                        .chunks_exact(8)
                        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                        .collect();
                    ckpt.tensors.insert(name, vals);
                    off += byte_len;
                }
                1 => {
                    let slice = data.get(off..off + payload_len).ok_or_else(|| corrupt("bytes"))?;
                    ckpt.bytes.insert(name, slice.to_vec());
                    off += payload_len;
                }
                _ => return Err(corrupt("unknown tag")),
            }
        }
        Ok(ckpt)
    }
}
