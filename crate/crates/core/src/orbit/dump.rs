//! Per-trajectory binary dump.
//!
//! ```text
//! "ORBT"                 magic
//! u32                    format version
//! u32 + bytes            architecture
//! u32                    checkpoint epoch
//! u32 + bytes            mode
//! u32 + bytes            initial condition ("word:<id>" or "gaussian:<seed>")
//! u32                    burn-in
//! u8                     verdict tag (1 periodic, 0 non-periodic)
//!   periodic:     u32 period, u32 detect step, u32 repetitions, period × u32 cycle
//!   non-periodic: u32 steps examined
//! u32 + n × u32          output token ids
//! u32 hidden, u32 memory, u32 count
//! per state: u32 step, (hidden + memory) × f64
//! ```
//! Little-endian throughout.

use std::io::{Read, Write};
use std::path::Path;

use crate::cells::{Architecture, CellState};
use crate::error::{Error, Result};
use crate::numerics::Vector;

use super::{InitialCondition, MapMode, OrbitVerdict, RetainedState, Trajectory};

pub const MAGIC: &[u8; 4] = b"ORBT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDump {
    pub architecture: Architecture,
    pub epoch: usize,
    pub trajectory: Trajectory,
    pub verdict: OrbitVerdict,
}

fn bad(detail: impl Into<String>) -> Error {
    Error::format("trajectory dump", detail)
}

fn put_u32(w: &mut impl Write, v: usize) -> std::io::Result<()> {
    let v = u32::try_from(v)
        .map_err(|_| std::io::Error::new(std::io::ErrorKind::InvalidInput, "value exceeds u32"))?;
    w.write_all(&v.to_le_bytes())
}

fn put_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    put_u32(w, s.len())?;
    w.write_all(s.as_bytes())
}

fn get<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| bad(format!("truncated: {e}")))?;
    Ok(b)
}

fn get_u32(r: &mut impl Read) -> Result<usize> {
    Ok(u32::from_le_bytes(get(r)?) as usize)
}

fn get_str(r: &mut impl Read) -> Result<String> {
    let n = get_u32(r)?;
    if n > 4096 {
        return Err(bad("string field too long"));
    }
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf).map_err(|e| bad(format!("truncated: {e}")))?;
    String::from_utf8(buf).map_err(|_| bad("non UTF-8 string"))
}

fn parse_initial(s: &str) -> Result<InitialCondition> {
    let (kind, value) = s.split_once(':').ok_or_else(|| bad(format!("initial condition `{s}`")))?;
    let n: u64 = value.parse().map_err(|_| bad(format!("initial condition `{s}`")))?;
    match kind {
        "word" => Ok(InitialCondition::Word(n as usize)),
        "gaussian" => Ok(InitialCondition::Gaussian { seed: n }),
        _ => Err(bad(format!("initial condition `{s}`"))),
    }
}

impl TrajectoryDump {
    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        let t = &self.trajectory;
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        put_str(w, self.architecture.as_str())?;
        put_u32(w, self.epoch)?;
        put_str(w, t.mode.as_str())?;
        put_str(w, &t.initial.describe())?;
        put_u32(w, t.burn_in)?;
        match &self.verdict {
            OrbitVerdict::Periodic {
                period,
                cycle,
                detect_step,
                verified_repetitions,
            } => {
                w.write_all(&[1])?;
                put_u32(w, *period)?;
                put_u32(w, *detect_step)?;
                put_u32(w, *verified_repetitions)?;
                for &c in cycle {
                    put_u32(w, c)?;
                }
            }
            OrbitVerdict::NonPeriodic { steps_examined } => {
                w.write_all(&[0])?;
                put_u32(w, *steps_examined)?;
            }
        }
        put_u32(w, t.tokens.len())?;
        for &tok in &t.tokens {
            put_u32(w, tok)?;
        }
        let (hidden, memory) = t
            .states
            .first()
            .map(|s| (s.state.h.dim(), s.state.c.dim()))
            .unwrap_or((0, 0));
        put_u32(w, hidden)?;
        put_u32(w, memory)?;
        put_u32(w, t.states.len())?;
        for s in &t.states {
            put_u32(w, s.step)?;
            for v in s.state.h.iter().chain(s.state.c.iter()) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let r = &mut &bytes[..];
        if &get::<4>(r)? != MAGIC {
            return Err(bad("bad magic bytes"));
        }
        let version = get_u32(r)?;
        if version != FORMAT_VERSION as usize {
            return Err(bad(format!("unsupported format version {version}")));
        }
        let architecture: Architecture = get_str(r)?.parse()?;
        let epoch = get_u32(r)?;
        let mode: MapMode = get_str(r)?.parse()?;
        let initial = parse_initial(&get_str(r)?)?;
        let burn_in = get_u32(r)?;
        let verdict = match get::<1>(r)?[0] {
            1 => {
                let period = get_u32(r)?;
                let detect_step = get_u32(r)?;
                let verified_repetitions = get_u32(r)?;
                if period == 0 || period * 4 > r.len() {
                    return Err(bad(format!("implausible period {period}")));
                }
                let cycle = (0..period).map(|_| get_u32(r)).collect::<Result<_>>()?;
                OrbitVerdict::Periodic {
                    period,
                    cycle,
                    detect_step,
                    verified_repetitions,
                }
            }
            0 => OrbitVerdict::NonPeriodic {
                steps_examined: get_u32(r)?,
            },
            tag => return Err(bad(format!("unknown verdict tag {tag}"))),
        };
        let n_tokens = get_u32(r)?;
        if n_tokens * 4 > r.len() {
            return Err(bad("token count exceeds file size"));
        }
        let tokens = (0..n_tokens).map(|_| get_u32(r)).collect::<Result<Vec<_>>>()?;
        let hidden = get_u32(r)?;
        let memory = get_u32(r)?;
        let count = get_u32(r)?;
        let per_state = 4 + 8 * (hidden + memory);
        if count.checked_mul(per_state).map_or(true, |n| n != r.len()) {
            return Err(bad("state block size does not match header"));
        }
        let mut states = Vec::with_capacity(count);
        let read_vec = |r: &mut &[u8], n: usize| -> Result<Vector> {
            let v = (0..n)
                .map(|_| get::<8>(r).map(f64::from_le_bytes))
                .collect::<Result<Vec<_>>>()?;
            Vector::new(v).map_err(|e| bad(e.to_string()))
        };
        for _ in 0..count {
            let step = get_u32(r)?;
            let h = read_vec(r, hidden)?;
            let c = read_vec(r, memory)?;
            states.push(RetainedState {
                step,
                state: CellState { h, c },
            });
        }
        Ok(Self {
            architecture,
            epoch,
            trajectory: Trajectory {
                mode,
                initial,
                tokens,
                states,
                burn_in,
            },
            verdict,
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
