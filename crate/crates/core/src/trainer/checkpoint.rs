//! Binary checkpoint format.
//!
//! ```text
//! "ORBS"                      magic
//! u32                         format version
//! u32 + bytes                 config block (UTF-8 `key = value` lines)
//! u32                         epoch
//! [u8; 32]                    vocabulary SHA-256
//! f64                         validation perplexity
//! u32                         tensor count
//! per tensor: u32 + name bytes, u32 rows, u32 cols, rows*cols f64
//! ```
//! All integers and floats are little-endian.

use std::io::{Read, Write};
use std::path::Path;

use crate::cells::{Model, ParamSet};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

use super::TrainConfig;

pub const MAGIC: &[u8; 4] = b"ORBS";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub epoch: usize,
    pub model: Model,
    pub vocab_hash: [u8; 32],
    pub validation_perplexity: f64,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        let block = self.config.to_kv_string();
        write_u32(w, block.len())?;
        w.write_all(block.as_bytes())?;
        write_u32(w, self.epoch)?;
        w.write_all(&self.vocab_hash)?;
        w.write_all(&self.validation_perplexity.to_le_bytes())?;
        let tensors = self.model.tensors();
        write_u32(w, tensors.len())?;
        for t in tensors {
            write_u32(w, t.name.len())?;
            w.write_all(t.name.as_bytes())?;
            write_u32(w, t.rows)?;
            write_u32(w, t.cols)?;
            for v in t.data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let ckpt = Self::read_from(&mut r)?;
        if !r.is_empty() {
            return Err(Error::format("checkpoint", format!("{} trailing bytes", r.len())));
        }
        Ok(ckpt)
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::format("checkpoint", "bad magic bytes"));
        }
        let version = read_u32(r)?;
        if version != FORMAT_VERSION {
            return Err(Error::format(
                "checkpoint",
                format!("unsupported format version {version}"),
            ));
        }
        let block_len = read_u32(r)? as usize;
        let block = read_string(r, block_len)?;
        let config = TrainConfig::from_kv_str(&block)?;
        let epoch = read_u32(r)? as usize;
        let mut vocab_hash = [0u8; 32];
        read_exact(r, &mut vocab_hash)?;
        let mut f = [0u8; 8];
        read_exact(r, &mut f)?;
        let validation_perplexity = f64::from_le_bytes(f);

        let count = read_u32(r)? as usize;
        if count > 64 {
            return Err(Error::format("checkpoint", format!("implausible tensor count {count}")));
        }
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = read_u32(r)? as usize;
            if name_len > 256 {
                return Err(Error::format("checkpoint", "tensor name too long"));
            }
            let name = read_string(r, name_len)?;
            let rows = read_u32(r)? as usize;
            let cols = read_u32(r)? as usize;
            let n = rows
                .checked_mul(cols)
                .filter(|&n| n <= 1 << 31)
                .ok_or_else(|| Error::format("checkpoint", format!("tensor {name} too large")))?;
            let mut raw = vec![0u8; n * 8];
            read_exact(r, &mut raw)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let m = Matrix::new(rows, cols, data)
                .map_err(|e| Error::format("checkpoint", format!("tensor {name}: {e}")))?;
            tensors.push((name, m));
        }
        let model = Model::from_tensors(config.architecture, tensors)?;
        if model.hidden_size() != config.hidden || model.dims().embed != config.embed {
            return Err(Error::format("checkpoint", "tensor shapes disagree with config"));
        }
        if !(validation_perplexity >= 1.0) {
            return Err(Error::format(
                "checkpoint",
                format!("invalid validation perplexity {validation_perplexity}"),
            ));
        }
        Ok(Self {
            config,
            epoch,
            model,
            vocab_hash,
            validation_perplexity,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn write_u32(w: &mut impl Write, v: usize) -> std::io::Result<()> {
    let v = u32::try_from(v).map_err(|_| {
        std::io::Error::new(std::io::ErrorKind::InvalidInput, "value exceeds u32")
    })?;
    w.write_all(&v.to_le_bytes())
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| Error::format("checkpoint", format!("truncated: {e}")))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_string(r: &mut impl Read, len: usize) -> Result<String> {
    if len > 1 << 20 {
        return Err(Error::format("checkpoint", "string field too long"));
    }
    let mut buf = vec![0u8; len];
    read_exact(r, &mut buf)?;
    String::from_utf8(buf).map_err(|_| Error::format("checkpoint", "non UTF-8 string field"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cells::{Architecture, Dims};

    fn sample(arch: Architecture) -> Checkpoint {
        let config = TrainConfig {
            architecture: arch,
            hidden: 3,
            embed: 2,
            ..TrainConfig::default()
        };
        let model = Model::init(
            arch,
            Dims {
                vocab: 5,
                embed: 2,
                hidden: 3,
            },
            4,
        )
        .unwrap();
        Checkpoint {
            config,
            epoch: 10,
            model,
            vocab_hash: [7; 32],
            validation_perplexity: 4.123456789,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for arch in [Architecture::Vanilla, Architecture::Lstm] {
            let c = sample(arch);
            let bytes = c.to_bytes();
            assert_eq!(&bytes[..4], MAGIC);
            let back = Checkpoint::from_bytes(&bytes).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.to_bytes(), bytes);
        }
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let bytes = sample(Architecture::Lstm).to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad).is_err());
        let mut bad = bytes.clone();
        bad[4] = 99;
        assert!(Checkpoint::from_bytes(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(Checkpoint::from_bytes(&extra).is_err());
    }
}
