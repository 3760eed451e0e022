//! Vanilla RNN and LSTM transitions, embedding lookup and output projection.
//!
//! Shapes: `H` hidden size, `E` embedding size, `V` vocabulary size. Weight
//! matrices are stored output-major, so `W_xh` is `H×E` and the LSTM input
//! block is `4H×E` with gate rows ordered input, forget, output, candidate.

mod backward;
mod step;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng, Vector};

pub use backward::{Tape, TapeStep};
pub use step::{lstm_step, predict_logits, vanilla_step, Scratch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Architecture {
    Vanilla,
    Lstm,
}

impl Architecture {
    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Vanilla => "vanilla",
            Architecture::Lstm => "lstm",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "vanilla" | "rnn" => Ok(Architecture::Vanilla),
            "lstm" => Ok(Architecture::Lstm),
            other => Err(Error::param(format!("unknown architecture `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VanillaParams {
    pub w_xh: Matrix,
    pub w_hh: Matrix,
    pub b_h: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w_x: Matrix,
    pub w_h: Matrix,
    pub b: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub table: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputLayer {
    pub w_o: Matrix,
    pub b_o: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Vanilla(VanillaParams),
    Lstm(LstmParams),
}

/// Hidden activation plus LSTM memory (empty for the vanilla cell).
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub h: Vector,
    pub c: Vector,
}

impl CellState {
    pub fn zeros(arch: Architecture, hidden: usize) -> Self {
        let c = match arch {
            Architecture::Vanilla => Vector::zeros(0),
            Architecture::Lstm => Vector::zeros(hidden),
        };
        Self {
            h: Vector::zeros(hidden),
            c,
        }
    }
}

/// All trainable parameters of one language model. Also used as the
/// gradient container, which has the identical layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub cell: Cell,
    pub embedding: Embedding,
    pub output: OutputLayer,
}

/// Borrowed view of one named parameter tensor; vectors appear as `n×1`.
pub struct TensorRef<'a> {
    pub name: &'static str,
    pub rows: usize,
    pub cols: usize,
    pub data: &'a [f64],
}

pub struct TensorMut<'a> {
    pub name: &'static str,
    pub rows: usize,
    pub cols: usize,
    pub data: &'a mut [f64],
}

/// Anything that exposes a fixed, ordered list of parameter tensors.
pub trait ParamSet {
    fn tensors(&self) -> Vec<TensorRef<'_>>;
    fn tensors_mut(&mut self) -> Vec<TensorMut<'_>>;
}

fn mref<'a>(name: &'static str, m: &'a Matrix) -> TensorRef<'a> {
    TensorRef {
        name,
        rows: m.rows(),
        cols: m.cols(),
        data: m.as_slice(),
    }
}

fn vref<'a>(name: &'static str, v: &'a Vector) -> TensorRef<'a> {
    TensorRef {
        name,
        rows: v.dim(),
        cols: 1,
        data: v,
    }
}

fn mmut<'a>(name: &'static str, m: &'a mut Matrix) -> TensorMut<'a> {
    let (rows, cols) = m.shape();
    TensorMut {
        name,
        rows,
        cols,
        data: m.as_mut_slice(),
    }
}

fn vmut<'a>(name: &'static str, v: &'a mut Vector) -> TensorMut<'a> {
    TensorMut {
        name,
        rows: v.dim(),
        cols: 1,
        data: v,
    }
}

impl ParamSet for Model {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = match &self.cell {
            Cell::Vanilla(p) => vec![
                mref("vanilla.w_xh", &p.w_xh),
                mref("vanilla.w_hh", &p.w_hh),
                vref("vanilla.b_h", &p.b_h),
            ],
            Cell::Lstm(p) => vec![
                mref("lstm.w_x", &p.w_x),
                mref("lstm.w_h", &p.w_h),
                vref("lstm.b", &p.b),
            ],
        };
        out.push(mref("embedding.table", &self.embedding.table));
        out.push(mref("output.w_o", &self.output.w_o));
        out.push(vref("output.b_o", &self.output.b_o));
        out
    }

    fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        let mut out = match &mut self.cell {
            Cell::Vanilla(p) => vec![
                mmut("vanilla.w_xh", &mut p.w_xh),
                mmut("vanilla.w_hh", &mut p.w_hh),
                vmut("vanilla.b_h", &mut p.b_h),
            ],
            Cell::Lstm(p) => vec![
                mmut("lstm.w_x", &mut p.w_x),
                mmut("lstm.w_h", &mut p.w_h),
                vmut("lstm.b", &mut p.b),
            ],
        };
        out.push(mmut("embedding.table", &mut self.embedding.table));
        out.push(mmut("output.w_o", &mut self.output.w_o));
        out.push(vmut("output.b_o", &mut self.output.b_o));
        out
    }
}

impl ParamSet for Matrix {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        vec![mref("matrix", self)]
    }

    fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        vec![mmut("matrix", self)]
    }
}

/// Model dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
}

fn uniform_matrix(rng: &mut Rng, rows: usize, cols: usize, a: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.uniform(-a, a))
}

impl Model {
    /// Random initialization: weights uniform in `±1/√fan_in`, zero biases,
    /// forget-gate bias 1. Embedding rows are lookups of a one-hot input
    /// (fan-in 1), so they are uniform in `±1`.
    pub fn init(arch: Architecture, dims: Dims, seed: u64) -> Result<Self> {
        let Dims {
            vocab,
            embed,
            hidden,
        } = dims;
        if vocab == 0 || embed == 0 || hidden == 0 {
            return Err(Error::param(format!("all model sizes must be positive: {dims:?}")));
        }
        let rng = |stream| Rng::derive(seed, stream);
        let ax = 1.0 / (embed as f64).sqrt();
        let ah = 1.0 / (hidden as f64).sqrt();
        let cell = match arch {
            Architecture::Vanilla => Cell::Vanilla(VanillaParams {
                w_xh: uniform_matrix(&mut rng(0), hidden, embed, ax),
                w_hh: uniform_matrix(&mut rng(1), hidden, hidden, ah),
                b_h: Vector::zeros(hidden),
            }),
            Architecture::Lstm => {
                let mut b = Vector::zeros(4 * hidden);
                b[hidden..2 * hidden].iter_mut().for_each(|x| *x = 1.0);
                Cell::Lstm(LstmParams {
                    w_x: uniform_matrix(&mut rng(0), 4 * hidden, embed, ax),
                    w_h: uniform_matrix(&mut rng(1), 4 * hidden, hidden, ah),
                    b,
                })
            }
        };
        Ok(Self {
            cell,
            embedding: Embedding {
                table: uniform_matrix(&mut rng(2), vocab, embed, 1.0),
            },
            output: OutputLayer {
                w_o: uniform_matrix(&mut rng(3), vocab, hidden, ah),
                b_o: Vector::zeros(vocab),
            },
        })
    }

    /// Same layout, every entry zero.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.data.iter_mut().for_each(|x| *x = 0.0);
        }
        z
    }

    pub fn architecture(&self) -> Architecture {
        match self.cell {
            Cell::Vanilla(_) => Architecture::Vanilla,
            Cell::Lstm(_) => Architecture::Lstm,
        }
    }

    pub fn dims(&self) -> Dims {
        Dims {
            vocab: self.embedding.table.rows(),
            embed: self.embedding.table.cols(),
            hidden: self.output.w_o.cols(),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.output.w_o.cols()
    }

    pub fn vocab_size(&self) -> usize {
        self.output.w_o.rows()
    }

    pub fn zero_state(&self) -> CellState {
        CellState::zeros(self.architecture(), self.hidden_size())
    }

    /// Checks every tensor against the shapes implied by `dims()`.
    pub fn validate(&self) -> Result<()> {
        let Dims {
            vocab,
            embed,
            hidden,
        } = self.dims();
        let gates = match self.architecture() {
            Architecture::Vanilla => 1,
            Architecture::Lstm => 4,
        };
        for t in self.tensors() {
            let want = match t.name {
                "vanilla.w_xh" | "lstm.w_x" => (gates * hidden, embed),
                "vanilla.w_hh" | "lstm.w_h" => (gates * hidden, hidden),
                "vanilla.b_h" | "lstm.b" => (gates * hidden, 1),
                "embedding.table" => (vocab, embed),
                "output.w_o" => (vocab, hidden),
                "output.b_o" => (vocab, 1),
                other => return Err(Error::State(format!("unexpected tensor {other}"))),
            };
            if (t.rows, t.cols) != want {
                return Err(Error::shape(format!(
                    "{} is {}x{}, expected {}x{}",
                    t.name, t.rows, t.cols, want.0, want.1
                )));
            }
            if t.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("model parameters"));
            }
        }
        Ok(())
    }

    /// Rebuilds a model from named tensors as produced by [`ParamSet::tensors`].
    pub fn from_tensors(arch: Architecture, tensors: Vec<(String, Matrix)>) -> Result<Self> {
        let take = |name: &str| -> Result<Matrix> {
            tensors
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, m)| m.clone())
                .ok_or_else(|| Error::format("checkpoint", format!("missing tensor {name}")))
        };
        let as_vec = |m: Matrix| -> Result<Vector> {
            if m.cols() != 1 {
                return Err(Error::shape(format!("bias stored as {}x{}", m.rows(), m.cols())));
            }
            Vector::new(m.into_vec())
        };
        let cell = match arch {
            Architecture::Vanilla => Cell::Vanilla(VanillaParams {
                w_xh: take("vanilla.w_xh")?,
                w_hh: take("vanilla.w_hh")?,
                b_h: as_vec(take("vanilla.b_h")?)?,
            }),
            Architecture::Lstm => Cell::Lstm(LstmParams {
                w_x: take("lstm.w_x")?,
                w_h: take("lstm.w_h")?,
                b: as_vec(take("lstm.b")?)?,
            }),
        };
        let model = Self {
            cell,
            embedding: Embedding {
                table: take("embedding.table")?,
            },
            output: OutputLayer {
                w_o: take("output.w_o")?,
                b_o: as_vec(take("output.b_o")?)?,
            },
        };
        model.validate()?;
        Ok(model)
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }
}
