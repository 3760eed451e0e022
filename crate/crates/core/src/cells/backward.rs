use crate::error::{Error, Result};
use crate::numerics::{axpy, softmax_in_place};

use super::step::{lstm_kernel, vanilla_kernel};
use super::{Architecture, Cell, CellState, Dims, Model};

/// Everything the backward pass needs from one forward step.
#[derive(Debug, Clone)]
pub struct TapeStep {
    pub token: usize,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Activated LSTM gates `[i, f, o, g]`; empty for the vanilla cell.
    pub gates: Vec<f64>,
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    pub probs: Vec<f64>,
}

/// Forward record of a teacher-forced window.
#[derive(Debug, Clone)]
pub struct Tape {
    pub arch: Architecture,
    pub dims: Dims,
    pub steps: Vec<TapeStep>,
}

impl Tape {
    fn check_targets(&self, targets: &[usize]) -> Result<()> {
        if targets.len() != self.steps.len() {
            return Err(Error::State(format!(
                "{} targets for a tape of {} steps",
                targets.len(),
                self.steps.len()
            )));
        }
        if let Some(&t) = targets.iter().find(|&&t| t >= self.dims.vocab) {
            return Err(Error::State(format!("target {t} outside vocabulary")));
        }
        Ok(())
    }

    /// Summed negative log-likelihood of `targets`.
    pub fn nll(&self, targets: &[usize]) -> Result<f64> {
        self.check_targets(targets)?;
        Ok(self
            .steps
            .iter()
            .zip(targets)
            .map(|(s, &t)| -s.probs[t].max(f64::MIN_POSITIVE).ln())
            .sum())
    }

    /// Gradient of `scale · Σ -log p(target)` with respect to each step's
    /// logits: `scale · (p - onehot)`.
    pub fn cross_entropy_grads(&self, targets: &[usize], scale: f64) -> Result<Vec<Vec<f64>>> {
        self.check_targets(targets)?;
        Ok(self
            .steps
            .iter()
            .zip(targets)
            .map(|(s, &t)| {
                let mut g: Vec<f64> = s.probs.iter().map(|p| p * scale).collect();
                g[t] -= scale;
                g
            })
            .collect())
    }
}

impl Model {
    /// Teacher-forced forward pass over `tokens` from `start`, recording a tape.
    pub fn forward(&self, start: &CellState, tokens: &[usize]) -> Result<(Tape, CellState)> {
        self.check_state(start)?;
        let dims = self.dims();
        if let Some(&t) = tokens.iter().find(|&&t| t >= dims.vocab) {
            return Err(Error::State(format!("token {t} outside vocabulary")));
        }
        let mut h = start.h.to_vec();
        let mut c = start.c.to_vec();
        let mut steps = Vec::with_capacity(tokens.len());
        for &token in tokens {
            let x = self.embedding.table.row(token);
            let h_prev = h.clone();
            let c_prev = c.clone();
            let gates = match &self.cell {
                Cell::Vanilla(p) => {
                    let mut z = vec![0.0; dims.hidden];
                    vanilla_kernel(p, &mut h, Some(x), &mut z);
                    Vec::new()
                }
                Cell::Lstm(p) => {
                    let mut z = vec![0.0; 4 * dims.hidden];
                    lstm_kernel(p, &mut h, &mut c, Some(x), &mut z);
                    z
                }
            };
            let mut probs = self.output.b_o.to_vec();
            self.output.w_o.matvec_acc(&h, &mut probs);
            softmax_in_place(&mut probs);
            steps.push(TapeStep {
                token,
                h_prev,
                c_prev,
                gates,
                h: h.clone(),
                c: c.clone(),
                probs,
            });
        }
        let end = CellState {
            h: crate::numerics::Vector::from_vec_unchecked(h),
            c: crate::numerics::Vector::from_vec_unchecked(c),
        };
        Ok((
            Tape {
                arch: self.architecture(),
                dims,
                steps,
            },
            end,
        ))
    }

    /// Backpropagation through time over a tape given upstream gradients on
    /// each step's logits. No gradient flows into the window's initial state.
    pub fn backward(&self, tape: &Tape, dlogits: &[Vec<f64>]) -> Result<Model> {
        let mut grads = self.zeros_like();
        self.backward_into(tape, dlogits, &mut grads)?;
        Ok(grads)
    }

    /// As [`Model::backward`], accumulating into `grads`.
    pub fn backward_into(&self, tape: &Tape, dlogits: &[Vec<f64>], grads: &mut Model) -> Result<()> {
        let dims = self.dims();
        if tape.arch != self.architecture() || tape.dims != dims {
            return Err(Error::State("tape was recorded with a different model".into()));
        }
        if grads.architecture() != self.architecture() || grads.dims() != dims {
            return Err(Error::State("gradient buffer does not match model".into()));
        }
        if dlogits.len() != tape.steps.len() || dlogits.iter().any(|g| g.len() != dims.vocab) {
            return Err(Error::State("upstream gradients do not match tape".into()));
        }

        let n = dims.hidden;
        let mut dh_next = vec![0.0; n];
        let mut dc_next = vec![0.0; n];
        let mut dh = vec![0.0; n];
        let Model {
            cell: gcell,
            embedding: gemb,
            output: gout,
        } = grads;

        for (step, dlogit) in tape.steps.iter().zip(dlogits).rev() {
            gout.w_o.add_outer(dlogit, &step.h);
            axpy(1.0, dlogit, &mut gout.b_o);
            dh.copy_from_slice(&dh_next);
            self.output.w_o.matvec_t_acc(dlogit, &mut dh);
            let x = self.embedding.table.row(step.token);

            match (&self.cell, &mut *gcell) {
                (Cell::Vanilla(p), Cell::Vanilla(g)) => {
                    let da: Vec<f64> = dh
                        .iter()
                        .zip(&step.h)
                        .map(|(d, h)| d * (1.0 - h * h))
                        .collect();
                    g.w_xh.add_outer(&da, x);
                    g.w_hh.add_outer(&da, &step.h_prev);
                    axpy(1.0, &da, &mut g.b_h);
                    p.w_xh.matvec_t_acc(&da, gemb.table.row_mut(step.token));
                    dh_next.fill(0.0);
                    p.w_hh.matvec_t_acc(&da, &mut dh_next);
                }
                (Cell::Lstm(p), Cell::Lstm(g)) => {
                    let (i, rest) = step.gates.split_at(n);
                    let (f, rest) = rest.split_at(n);
                    let (o, gc) = rest.split_at(n);
                    let mut dz = vec![0.0; 4 * n];
                    for k in 0..n {
                        let tc = step.c[k].tanh();
                        let d_o = dh[k] * tc;
                        let dc = dc_next[k] + dh[k] * o[k] * (1.0 - tc * tc);
                        let di = dc * gc[k];
                        let dg = dc * i[k];
                        let df = dc * step.c_prev[k];
                        dz[k] = di * i[k] * (1.0 - i[k]);
                        dz[n + k] = df * f[k] * (1.0 - f[k]);
                        dz[2 * n + k] = d_o * o[k] * (1.0 - o[k]);
                        dz[3 * n + k] = dg * (1.0 - gc[k] * gc[k]);
                        dc_next[k] = dc * f[k];
                    }
                    g.w_x.add_outer(&dz, x);
                    g.w_h.add_outer(&dz, &step.h_prev);
                    axpy(1.0, &dz, &mut g.b);
                    p.w_x.matvec_t_acc(&dz, gemb.table.row_mut(step.token));
                    dh_next.fill(0.0);
                    p.w_h.matvec_t_acc(&dz, &mut dh_next);
                }
                _ => unreachable!("architectures checked above"),
            }
        }
        Ok(())
    }
}
