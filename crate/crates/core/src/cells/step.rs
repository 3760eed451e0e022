use crate::error::{Error, Result};
use crate::numerics::{sigmoid, Vector};

use super::{Cell, CellState, LstmParams, Model, OutputLayer, VanillaParams};

fn check(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::shape(format!("{what} has dim {got}, expected {want}")));
    }
    Ok(())
}

/// `h' = tanh(W_xh·x + W_hh·h + b_h)`; `c` stays empty.
pub fn vanilla_step(p: &VanillaParams, s: &CellState, x: &Vector) -> Result<CellState> {
    let hidden = p.w_hh.rows();
    check("input", x.dim(), p.w_xh.cols())?;
    check("hidden state", s.h.dim(), hidden)?;
    let mut h = s.h.clone().into_vec();
    let mut z = vec![0.0; hidden];
    vanilla_kernel(p, &mut h, Some(x), &mut z);
    Ok(CellState {
        h: Vector::new(h)?,
        c: Vector::zeros(0),
    })
}

/// Standard LSTM update with sigmoid gates and tanh candidate:
/// `c' = f⊙c + i⊙g`, `h' = o⊙tanh(c')`.
pub fn lstm_step(p: &LstmParams, s: &CellState, x: &Vector) -> Result<CellState> {
    let hidden = p.w_h.cols();
    check("input", x.dim(), p.w_x.cols())?;
    check("hidden state", s.h.dim(), hidden)?;
    check("memory cell", s.c.dim(), hidden)?;
    let mut h = s.h.clone().into_vec();
    let mut c = s.c.clone().into_vec();
    let mut z = vec![0.0; 4 * hidden];
    lstm_kernel(p, &mut h, &mut c, Some(x), &mut z);
    Ok(CellState {
        h: Vector::new(h)?,
        c: Vector::new(c)?,
    })
}

/// `W_o·h + b_o`.
pub fn predict_logits(o: &OutputLayer, h: &Vector) -> Result<Vector> {
    check("hidden state", h.dim(), o.w_o.cols())?;
    let mut out = o.b_o.clone().into_vec();
    o.w_o.matvec_acc(h, &mut out);
    Vector::new(out)
}

/// `z` is scratch of length `H`. `None` input means the zero vector.
pub(crate) fn vanilla_kernel(p: &VanillaParams, h: &mut [f64], x: Option<&[f64]>, z: &mut [f64]) {
    z.copy_from_slice(&p.b_h);
    if let Some(x) = x {
        p.w_xh.matvec_acc(x, z);
    }
    p.w_hh.matvec_acc(h, z);
    for (hi, zi) in h.iter_mut().zip(z.iter()) {
        *hi = zi.tanh();
    }
}

/// `z` is scratch of length `4H`; on return it holds the activated gates
/// `[i, f, o, g]`.
pub(crate) fn lstm_kernel(
    p: &LstmParams,
    h: &mut [f64],
    c: &mut [f64],
    x: Option<&[f64]>,
    z: &mut [f64],
) {
    let n = h.len();
    z.copy_from_slice(&p.b);
    if let Some(x) = x {
        p.w_x.matvec_acc(x, z);
    }
    p.w_h.matvec_acc(h, z);
    let (ifo, g) = z.split_at_mut(3 * n);
    ifo.iter_mut().for_each(|v| *v = sigmoid(*v));
    g.iter_mut().for_each(|v| *v = v.tanh());
    let (i, rest) = ifo.split_at(n);
    let (f, o) = rest.split_at(n);
    for k in 0..n {
        c[k] = f[k] * c[k] + i[k] * g[k];
        h[k] = o[k] * c[k].tanh();
    }
}

/// Reusable buffers for allocation-free stepping.
#[derive(Debug, Clone, Default)]
pub struct Scratch {
    z: Vec<f64>,
    logits: Vec<f64>,
}

impl Model {
    /// Advances `state` in place by one transition. `None` feeds the zero vector.
    pub fn advance(&self, state: &mut CellState, input: Option<&[f64]>, scratch: &mut Scratch) {
        match &self.cell {
            Cell::Vanilla(p) => {
                scratch.z.resize(p.b_h.dim(), 0.0);
                vanilla_kernel(p, &mut state.h, input, &mut scratch.z);
            }
            Cell::Lstm(p) => {
                scratch.z.resize(p.b.dim(), 0.0);
                lstm_kernel(p, &mut state.h, &mut state.c, input, &mut scratch.z);
            }
        }
    }

    /// Advances `state` with the embedding of `token` as input.
    pub fn advance_token(&self, state: &mut CellState, token: usize, scratch: &mut Scratch) {
        let x = self.embedding.table.row(token);
        self.advance(state, Some(x), scratch);
    }

    /// Writes `W_o·h + b_o` into the scratch logits buffer and returns it.
    pub fn logits<'s>(&self, h: &[f64], scratch: &'s mut Scratch) -> &'s [f64] {
        scratch.logits.clear();
        scratch.logits.extend_from_slice(&self.output.b_o);
        self.output.w_o.matvec_acc(h, &mut scratch.logits);
        &scratch.logits
    }

    /// Checked single step with an explicit input vector.
    pub fn step(&self, state: &CellState, x: &Vector) -> Result<CellState> {
        match &self.cell {
            Cell::Vanilla(p) => vanilla_step(p, state, x),
            Cell::Lstm(p) => lstm_step(p, state, x),
        }
    }

    pub fn check_state(&self, state: &CellState) -> Result<()> {
        let hidden = self.hidden_size();
        check("hidden state", state.h.dim(), hidden)?;
        let want_c = match self.cell {
            Cell::Vanilla(_) => 0,
            Cell::Lstm(_) => hidden,
        };
        check("memory cell", state.c.dim(), want_c)
    }
}
