//! A trained language model as an iterative map on its hidden state.
//!
//! With input, the argmax word of the current state is embedded and fed
//! back; without input, the zero vector is fed. Either way the map is
//! iterated from many initial conditions and the induced word sequence is
//! tested for periodicity.

mod analysis;
mod detect;
mod dump;

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use crate::cells::{CellState, Model, Scratch};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::numerics::{argmax, sample_gaussian, Rng, Vector};

pub use analysis::{classify_sink, count_clusters, hidden_period_check, SinkReport, SINK_SLACK};
pub use detect::{
    detect_period, smallest_period, window_holds, window_len, Budgets, OrbitVerdict,
    PeriodDetector, MIN_WINDOW, REPETITIONS,
};
pub use dump::TrajectoryDump;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MapMode {
    WithInput,
    WithoutInput,
}

impl MapMode {
    pub fn as_str(self) -> &'static str {
        match self {
            MapMode::WithInput => "with-input",
            MapMode::WithoutInput => "without-input",
        }
    }
}

impl fmt::Display for MapMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MapMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "with-input" | "with_input" => Ok(MapMode::WithInput),
            "without-input" | "without_input" => Ok(MapMode::WithoutInput),
            other => Err(Error::param(format!(
                "unknown mode `{other}` (expected with-input or without-input)"
            ))),
        }
    }
}

/// One closed-loop transition. Returns the next state and the emitted word.
///
/// With input the word is the argmax of the current state's logits and is fed
/// as the next input. Without input the zero vector is fed and the word is
/// read from the new state.
pub fn closed_loop_step(model: &Model, state: &CellState, mode: MapMode) -> Result<(CellState, usize)> {
    model.check_state(state)?;
    let mut next = state.clone();
    let mut scratch = Scratch::default();
    let token = step_in_place(model, &mut next, mode, &mut scratch);
    Ok((next, token))
}

#[inline]
fn step_in_place(model: &Model, state: &mut CellState, mode: MapMode, scratch: &mut Scratch) -> usize {
    match mode {
        MapMode::WithInput => {
            let token = argmax(model.logits(&state.h, scratch));
            model.advance_token(state, token, scratch);
            token
        }
        MapMode::WithoutInput => {
            model.advance(state, None, scratch);
            argmax(model.logits(&state.h, scratch))
        }
    }
}

/// Distribution of sampled initial hidden states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianInit {
    pub mean: f64,
    pub std: f64,
}

impl Default for GaussianInit {
    fn default() -> Self {
        Self { mean: 0.0, std: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InitialCondition {
    /// First input word; the map starts from one step out of the zero state.
    Word(usize),
    /// Gaussian `h₀` (and `c₀` for the LSTM) drawn from this seed.
    Gaussian { seed: u64 },
}

impl InitialCondition {
    pub fn state(&self, model: &Model, gaussian: GaussianInit) -> Result<CellState> {
        match *self {
            InitialCondition::Word(w) => {
                if w >= model.vocab_size() {
                    return Err(Error::param(format!("initial word {w} outside vocabulary")));
                }
                let mut s = model.zero_state();
                model.advance_token(&mut s, w, &mut Scratch::default());
                Ok(s)
            }
            InitialCondition::Gaussian { seed } => {
                let mut rng = Rng::new(seed);
                let hidden = model.hidden_size();
                let h = sample_gaussian(&mut rng, hidden, gaussian.mean, gaussian.std)?;
                let mut s = model.zero_state();
                if s.c.dim() > 0 {
                    s.c = sample_gaussian(&mut rng, hidden, gaussian.mean, gaussian.std)?;
                }
                s.h = h;
                Ok(s)
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            InitialCondition::Word(w) => format!("word:{w}"),
            InitialCondition::Gaussian { seed } => format!("gaussian:{seed}"),
        }
    }
}

/// With input: one condition per vocabulary word (`count` is ignored).
/// Without input: `count` Gaussian draws with distinct seeds.
pub fn sample_initial_conditions(
    mode: MapMode,
    vocab_size: usize,
    rng: &mut Rng,
    count: usize,
) -> Result<Vec<InitialCondition>> {
    match mode {
        MapMode::WithInput => Ok((0..vocab_size).map(InitialCondition::Word).collect()),
        MapMode::WithoutInput => {
            if count == 0 {
                return Err(Error::param("need at least one initial condition"));
            }
            let mut seen = std::collections::HashSet::with_capacity(count);
            let mut out = Vec::with_capacity(count);
            while out.len() < count {
                let seed = rng.next_u64();
                if seen.insert(seed) {
                    out.push(InitialCondition::Gaussian { seed });
                }
            }
            Ok(out)
        }
    }
}

/// Which hidden states a trajectory keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Retention {
    /// Minimum number of most recent states kept contiguously.
    pub tail: usize,
    /// Older states are kept when `step % stride == 0`.
    pub stride: usize,
}

impl Default for Retention {
    fn default() -> Self {
        Self {
            tail: 2000,
            stride: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetainedState {
    pub step: usize,
    pub state: CellState,
}

#[derive(Debug)]
struct StateRecorder {
    policy: Retention,
    tail_cap: usize,
    strided: Vec<RetainedState>,
    tail: VecDeque<RetainedState>,
}

impl StateRecorder {
    fn new(policy: Retention) -> Self {
        Self {
            policy,
            tail_cap: policy.tail.max(1),
            strided: Vec::new(),
            tail: VecDeque::new(),
        }
    }

    fn grow_tail(&mut self, cap: usize) {
        self.tail_cap = self.tail_cap.max(cap);
    }

    fn push(&mut self, step: usize, state: &CellState) {
        let mut slot = None;
        if self.tail.len() >= self.tail_cap {
            let old = self.tail.pop_front().expect("non-empty");
            if old.step % self.policy.stride.max(1) == 0 {
                self.strided.push(old);
            } else {
                slot = Some(old);
            }
        }
        let entry = match slot {
            Some(mut old) => {
                old.step = step;
                old.state.h.copy_from_slice(&state.h);
                old.state.c.copy_from_slice(&state.c);
                old
            }
            None => RetainedState {
                step,
                state: state.clone(),
            },
        };
        self.tail.push_back(entry);
    }

    fn finish(mut self) -> Vec<RetainedState> {
        self.strided.extend(self.tail);
        self.strided
    }
}

/// The output orbit of one initial condition plus any retained hidden states.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub mode: MapMode,
    pub initial: InitialCondition,
    /// `tokens[i]` is the word emitted by transition `i + 1`.
    pub tokens: Vec<usize>,
    /// States after `step` transitions, in increasing step order. Step 0 is
    /// the initial state.
    pub states: Vec<RetainedState>,
    pub burn_in: usize,
}

impl Trajectory {
    /// The trailing run of consecutive retained states at or after `from`.
    pub fn contiguous_tail(&self, from: usize) -> &[RetainedState] {
        let mut start = self.states.len();
        while start > 0 {
            let cur = &self.states[start - 1];
            if cur.step < from {
                break;
            }
            if start < self.states.len() && self.states[start].step != cur.step + 1 {
                break;
            }
            start -= 1;
        }
        &self.states[start..]
    }

    pub fn post_burn_in_states(&self) -> Vec<Vector> {
        self.states
            .iter()
            .filter(|s| s.step >= self.burn_in)
            .map(|s| s.state.h.clone())
            .collect()
    }
}

/// Iterates the closed-loop map from `initial`, detecting and verifying the
/// output period. Hidden states are kept only when `retention` is given; the
/// contiguous tail grows to ten candidate periods once one is found.
pub fn run_trajectory(
    model: &Model,
    mode: MapMode,
    initial: InitialCondition,
    gaussian: GaussianInit,
    budgets: Budgets,
    retention: Option<Retention>,
) -> Result<(Trajectory, OrbitVerdict)> {
    let mut state = initial.state(model, gaussian)?;
    let mut scratch = Scratch::default();
    let mut recorder = retention.map(StateRecorder::new);
    if let Some(r) = recorder.as_mut() {
        r.push(0, &state);
    }
    let mut det = PeriodDetector::new(budgets)?;
    let mut step = 0usize;
    let mut advance = |state: &mut CellState, recorder: &mut Option<StateRecorder>| {
        let token = step_in_place(model, state, mode, &mut scratch);
        step += 1;
        if let Some(r) = recorder.as_mut() {
            r.push(step, state);
        }
        token
    };

    while !det.detect_done() {
        let t = advance(&mut state, &mut recorder);
        det.push_detect(t);
    }
    if let Some(k) = det.candidate() {
        if let Some(r) = recorder.as_mut() {
            r.grow_tail(REPETITIONS * k);
        }
        for _ in 0..budgets.verify {
            let t = advance(&mut state, &mut recorder);
            if !det.push_verify(t) {
                break;
            }
        }
    }
    if !state.h.is_finite() {
        return Err(Error::NonFinite("closed-loop iteration"));
    }
    let verdict = det.verdict();
    let trajectory = Trajectory {
        mode,
        initial,
        tokens: det.into_tokens(),
        states: recorder.map(StateRecorder::finish).unwrap_or_default(),
        burn_in: budgets.burn_in(),
    };
    Ok((trajectory, verdict))
}

/// Outcome for one initial condition of an analysis run.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionResult {
    pub index: usize,
    pub initial: InitialCondition,
    pub verdict: OrbitVerdict,
    pub trajectory: Option<Trajectory>,
}

#[derive(Debug, Clone, Copy)]
pub struct AnalysisOptions {
    pub mode: MapMode,
    pub budgets: Budgets,
    pub gaussian: GaussianInit,
    pub retention: Retention,
    pub exec: Execution,
}

/// Runs every initial condition against a frozen model. Trajectories whose
/// index satisfies `keep` retain hidden states and are returned whole.
/// Results are ordered by condition index regardless of scheduling.
pub fn analyze(
    model: &Model,
    conditions: &[InitialCondition],
    opts: &AnalysisOptions,
    keep: impl Fn(usize) -> bool + Sync + Send,
) -> Result<Vec<ConditionResult>> {
    exec::try_map_indexed(conditions.len(), opts.exec, |i| {
        let keep_states = keep(i);
        let (traj, verdict) = run_trajectory(
            model,
            opts.mode,
            conditions[i],
            opts.gaussian,
            opts.budgets,
            keep_states.then_some(opts.retention),
        )?;
        Ok(ConditionResult {
            index: i,
            initial: conditions[i],
            verdict,
            trajectory: keep_states.then_some(traj),
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cells::{Architecture, Cell, Dims, Embedding, OutputLayer, VanillaParams};
    use crate::numerics::Matrix;

    fn toy(arch: Architecture, vocab: usize, seed: u64) -> Model {
        Model::init(
            arch,
            Dims {
                vocab,
                embed: 4,
                hidden: 6,
            },
            seed,
        )
        .unwrap()
    }

    #[test]
    fn forced_output_word_repeats() {
        let mut m = toy(Architecture::Lstm, 10, 1);
        m.output.w_o.fill(0.0);
        m.output.b_o.iter_mut().for_each(|b| *b = 0.0);
        m.output.b_o[7] = 5.0;
        let mut s = m.zero_state();
        for _ in 0..20 {
            let (next, tok) = closed_loop_step(&m, &s, MapMode::WithInput).unwrap();
            assert_eq!(tok, 7);
            s = next;
        }
    }

    #[test]
    fn zero_recurrence_collapses_to_tanh_bias() {
        let mut m = toy(Architecture::Vanilla, 5, 2);
        let Cell::Vanilla(p) = &mut m.cell else { unreachable!() };
        p.w_hh.fill(0.0);
        p.b_h = Vector::new(vec![0.3, -0.2, 1.5, 0.0, -2.0, 0.7]).unwrap();
        let expect: Vec<f64> = p.b_h.iter().map(|b| b.tanh()).collect();
        let start = InitialCondition::Gaussian { seed: 9 }
            .state(&m, GaussianInit::default())
            .unwrap();
        let (next, _) = closed_loop_step(&m, &start, MapMode::WithoutInput).unwrap();
        assert_eq!(next.h.as_ref(), expect.as_slice());
    }

    /// 1-dim vanilla cell over two words: the word fed back flips the sign of
    /// the state, and the output layer reads the sign.
    fn alternator() -> Model {
        Model {
            cell: Cell::Vanilla(VanillaParams {
                w_xh: Matrix::new(1, 1, vec![1.0]).unwrap(),
                w_hh: Matrix::new(1, 1, vec![0.0]).unwrap(),
                b_h: Vector::zeros(1),
            }),
            embedding: Embedding {
                // word 0 ("positive") pushes negative, word 1 pushes positive
                table: Matrix::new(2, 1, vec![-2.0, 2.0]).unwrap(),
            },
            output: OutputLayer {
                w_o: Matrix::new(2, 1, vec![1.0, -1.0]).unwrap(),
                b_o: Vector::zeros(2),
            },
        }
    }

    #[test]
    fn hand_built_alternation_has_period_two() {
        let m = alternator();
        // hand iteration: h=tanh(2)>0 -> word 0 -> h=tanh(-2) -> word 1 -> ...
        let mut s = InitialCondition::Word(1).state(&m, GaussianInit::default()).unwrap();
        assert_eq!(s.h[0], 2f64.tanh());
        let mut toks = Vec::new();
        for _ in 0..6 {
            let (n, t) = closed_loop_step(&m, &s, MapMode::WithInput).unwrap();
            toks.push(t);
            s = n;
        }
        assert_eq!(toks, vec![0, 1, 0, 1, 0, 1]);
        let budgets = Budgets {
            detect: 200,
            verify: 200,
        };
        let (_, v) = run_trajectory(
            &m,
            MapMode::WithInput,
            InitialCondition::Word(1),
            GaussianInit::default(),
            budgets,
            None,
        )
        .unwrap();
        assert_eq!(v.period(), Some(2));
    }

    #[test]
    fn initial_conditions() {
        let mut rng = Rng::new(5);
        let with = sample_initial_conditions(MapMode::WithInput, 3, &mut rng, 100).unwrap();
        assert_eq!(with.len(), 3);
        let a = sample_initial_conditions(MapMode::WithoutInput, 3, &mut Rng::new(5), 15_000).unwrap();
        let b = sample_initial_conditions(MapMode::WithoutInput, 3, &mut Rng::new(5), 15_000).unwrap();
        assert_eq!(a.len(), 15_000);
        assert_eq!(a, b);
        let distinct: std::collections::HashSet<_> = a.iter().collect();
        assert_eq!(distinct.len(), 15_000);
        assert!(sample_initial_conditions(MapMode::WithoutInput, 3, &mut rng, 0).is_err());
    }

    #[test]
    fn lstm_gaussian_start_draws_memory_cell() {
        let m = toy(Architecture::Lstm, 5, 3);
        let s = InitialCondition::Gaussian { seed: 1 }
            .state(&m, GaussianInit::default())
            .unwrap();
        assert_eq!(s.c.dim(), 6);
        assert!(s.c.iter().any(|&c| c != 0.0));
        assert_ne!(s.h, s.c);
    }

    #[test]
    fn trajectories_are_deterministic() {
        let m = toy(Architecture::Lstm, 12, 8);
        let budgets = Budgets {
            detect: 400,
            verify: 400,
        };
        let run = || {
            run_trajectory(
                &m,
                MapMode::WithInput,
                InitialCondition::Word(4),
                GaussianInit::default(),
                budgets,
                Some(Retention::default()),
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn retention_keeps_tail_and_strided_history() {
        let m = toy(Architecture::Vanilla, 8, 4);
        let budgets = Budgets {
            detect: 1000,
            verify: 1000,
        };
        let (traj, _) = run_trajectory(
            &m,
            MapMode::WithoutInput,
            InitialCondition::Gaussian { seed: 2 },
            GaussianInit::default(),
            budgets,
            Some(Retention { tail: 100, stride: 16 }),
        )
        .unwrap();
        let last = traj.tokens.len();
        assert_eq!(traj.states.last().unwrap().step, last);
        assert_eq!(traj.states[0].step, 0);
        assert!(traj.states.windows(2).all(|w| w[0].step < w[1].step));
        let tail = traj.contiguous_tail(0);
        assert!(tail.len() >= 100);
        let strided = &traj.states[..traj.states.len() - tail.len()];
        assert!(strided.iter().all(|s| s.step % 16 == 0));
    }

    #[test]
    fn analysis_is_ordered_and_matches_single_runs() {
        let m = toy(Architecture::Lstm, 9, 6);
        let conds = sample_initial_conditions(MapMode::WithInput, 9, &mut Rng::new(0), 0).unwrap();
        let budgets = Budgets {
            detect: 300,
            verify: 300,
        };
        let opts = |exec| AnalysisOptions {
            mode: MapMode::WithInput,
            budgets,
            gaussian: GaussianInit::default(),
            retention: Retention::default(),
            exec,
        };
        let seq = analyze(&m, &conds, &opts(Execution::Sequential), |i| i == 2).unwrap();
        let par = analyze(&m, &conds, &opts(Execution::Parallel(4)), |i| i == 2).unwrap();
        assert_eq!(seq, par);
        assert!(seq.iter().enumerate().all(|(i, r)| r.index == i));
        assert!(seq[2].trajectory.is_some() && seq[3].trajectory.is_none());
        let (_, v) = run_trajectory(
            &m,
            MapMode::WithInput,
            conds[5],
            GaussianInit::default(),
            budgets,
            None,
        )
        .unwrap();
        assert_eq!(seq[5].verdict, v);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("with-input".parse::<MapMode>().unwrap(), MapMode::WithInput);
        assert_eq!("without-input".parse::<MapMode>().unwrap(), MapMode::WithoutInput);
        assert!("sideways".parse::<MapMode>().is_err());
    }
}
