//! Hidden-state checks on a retained trajectory: sinks and hidden periodicity.
//!
//! Distances use the full cell state, i.e. `h` concatenated with the LSTM
//! memory `c` when present.

use crate::cells::CellState;
use crate::error::{Error, Result};
use crate::numerics::Vector;

use super::{OrbitVerdict, Trajectory};

/// Allowed per-step increase when testing monotone approach.
pub const SINK_SLACK: f64 = 1e-9;

const MIN_SINK_STATES: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct SinkReport {
    pub final_state: CellState,
    /// `(step, distance to final state)` for every retained state.
    pub distances: Vec<(usize, f64)>,
    /// Distances never increase (beyond slack) after burn-in.
    pub monotone: bool,
    /// Same test over the whole trajectory, transient included.
    pub monotone_from_start: bool,
}

impl SinkReport {
    /// Distance of the last retained state before the final one.
    pub fn tail_distance(&self) -> f64 {
        let n = self.distances.len();
        if n < 2 {
            0.0
        } else {
            self.distances[n - 2].1
        }
    }
}

fn euclidean(a: &CellState, b: &CellState) -> f64 {
    let sq = |x: &Vector, y: &Vector| -> f64 { x.iter().zip(y.iter()).map(|(p, q)| (p - q) * (p - q)).sum() };
    (sq(&a.h, &b.h) + sq(&a.c, &b.c)).sqrt()
}

fn sup_distance(a: &CellState, b: &CellState) -> f64 {
    a.h.iter()
        .zip(b.h.iter())
        .chain(a.c.iter().zip(b.c.iter()))
        .fold(0.0f64, |m, (p, q)| m.max((p - q).abs()))
}

fn non_increasing<'a>(mut d: impl Iterator<Item = &'a (usize, f64)>) -> bool {
    let Some(mut prev) = d.next().map(|x| x.1) else {
        return true;
    };
    for &(_, cur) in d {
        if cur > prev + SINK_SLACK {
            return false;
        }
        prev = cur;
    }
    true
}

/// Distances from every retained state to the final one, for a trajectory
/// whose output settled on a single word.
pub fn classify_sink(trajectory: &Trajectory, verdict: &OrbitVerdict) -> Result<SinkReport> {
    if verdict.period() != Some(1) {
        return Err(Error::param(format!(
            "sink classification needs a period-1 verdict, got {:?}",
            verdict.period()
        )));
    }
    if trajectory.states.len() < MIN_SINK_STATES {
        return Err(Error::param(format!(
            "sink classification needs at least {MIN_SINK_STATES} retained states, have {}",
            trajectory.states.len()
        )));
    }
    let final_state = trajectory.states.last().expect("non-empty").state.clone();
    let distances: Vec<(usize, f64)> = trajectory
        .states
        .iter()
        .map(|s| (s.step, euclidean(&s.state, &final_state)))
        .collect();
    let monotone = non_increasing(distances.iter().filter(|d| d.0 >= trajectory.burn_in));
    let monotone_from_start = non_increasing(distances.iter());
    Ok(SinkReport {
        final_state,
        distances,
        monotone,
        monotone_from_start,
    })
}

/// True when `‖s_{t+k} − s_t‖∞ < tolerance` across the contiguous retained
/// tail after burn-in, i.e. the hidden states sit on `k` points.
pub fn hidden_period_check(trajectory: &Trajectory, k: usize, tolerance: f64) -> Result<bool> {
    if k == 0 {
        return Err(Error::param("period must be at least 1"));
    }
    if !(tolerance > 0.0) {
        return Err(Error::param(format!("tolerance must be positive, got {tolerance}")));
    }
    let tail = trajectory.contiguous_tail(trajectory.burn_in);
    if tail.len() < 3 * k {
        return Err(Error::param(format!(
            "hidden period check for k={k} needs {} contiguous post-burn-in states, have {}",
            3 * k,
            tail.len()
        )));
    }
    Ok(tail
        .windows(k + 1)
        .all(|w| sup_distance(&w[0].state, &w[k].state) < tolerance))
}

/// Greedy clustering: a point joins the first cluster whose representative is
/// within `tolerance` in the sup norm.
pub fn count_clusters(points: &[Vector], tolerance: f64) -> usize {
    let mut reps: Vec<&Vector> = Vec::new();
    for p in points {
        if !reps.iter().any(|r| r.max_abs_diff(p) < tolerance) {
            reps.push(p);
        }
    }
    reps.len()
}
