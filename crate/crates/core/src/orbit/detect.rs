//! Output-space period detection with a separate verification run.

use crate::error::{Error, Result};

/// Minimum trailing window checked for a candidate period.
pub const MIN_WINDOW: usize = 200;
/// Window length per period unit, and the number of cycles verification must cover.
pub const REPETITIONS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budgets {
    pub detect: usize,
    pub verify: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            detect: 20_000,
            verify: 40_000,
        }
    }
}

impl Budgets {
    pub fn validate(&self) -> Result<()> {
        if self.detect < 100 {
            return Err(Error::param(format!(
                "detect budget must be at least 100, got {}",
                self.detect
            )));
        }
        if self.verify < REPETITIONS {
            return Err(Error::param(format!(
                "verify budget must be at least {REPETITIONS}, got {}",
                self.verify
            )));
        }
        Ok(())
    }

    /// Leading steps discarded as transient.
    pub fn burn_in(&self) -> usize {
        self.detect / 2
    }

    /// Largest period that can be reported.
    pub fn max_period(&self) -> usize {
        (self.detect / REPETITIONS).min(self.verify / REPETITIONS).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OrbitVerdict {
    Periodic {
        period: usize,
        /// One full cycle, ending at the last detect-phase token.
        cycle: Vec<usize>,
        /// First token index from which `y[t + period] == y[t]` holds through
        /// the end of the detect phase.
        detect_step: usize,
        /// Complete cycles confirmed during verification.
        verified_repetitions: usize,
    },
    NonPeriodic {
        steps_examined: usize,
    },
}

impl OrbitVerdict {
    pub fn period(&self) -> Option<usize> {
        match self {
            OrbitVerdict::Periodic { period, .. } => Some(*period),
            OrbitVerdict::NonPeriodic { .. } => None,
        }
    }

    pub fn is_periodic(&self) -> bool {
        self.period().is_some()
    }
}

/// Window length for candidate period `k`, clipped to the post-burn-in tail.
pub fn window_len(k: usize, available: usize) -> usize {
    (REPETITIONS * k).max(MIN_WINDOW).min(available)
}

/// True when `tokens[t] == tokens[t + k]` for every pair inside the trailing
/// window for period `k`.
pub fn window_holds(tokens: &[usize], k: usize, burn_in: usize) -> bool {
    let available = tokens.len().saturating_sub(burn_in);
    let w = window_len(k, available);
    if k == 0 || w <= k {
        return false;
    }
    let start = tokens.len() - w;
    (start..tokens.len() - k).all(|t| tokens[t] == tokens[t + k])
}

/// Smallest `k` in `1..=max_period` whose trailing window holds.
pub fn smallest_period(tokens: &[usize], burn_in: usize, max_period: usize) -> Option<usize> {
    (1..=max_period).find(|&k| window_holds(tokens, k, burn_in))
}

fn onset(tokens: &[usize], k: usize) -> usize {
    let mut t = tokens.len() - k;
    while t > 0 && tokens[t - 1] == tokens[t - 1 + k] {
        t -= 1;
    }
    t
}

/// Incremental detector: feed the detect phase, call [`PeriodDetector::candidate`],
/// then feed verification tokens.
#[derive(Debug, Clone)]
pub struct PeriodDetector {
    budgets: Budgets,
    tokens: Vec<usize>,
    candidate: Option<usize>,
    broken: bool,
}

impl PeriodDetector {
    pub fn new(budgets: Budgets) -> Result<Self> {
        budgets.validate()?;
        Ok(Self {
            budgets,
            tokens: Vec::with_capacity(budgets.detect + budgets.verify),
            candidate: None,
            broken: false,
        })
    }

    pub fn tokens(&self) -> &[usize] {
        &self.tokens
    }

    pub fn into_tokens(self) -> Vec<usize> {
        self.tokens
    }

    pub fn detect_done(&self) -> bool {
        self.tokens.len() >= self.budgets.detect
    }

    pub fn push_detect(&mut self, token: usize) {
        debug_assert!(!self.detect_done());
        self.tokens.push(token);
    }

    /// Runs the window test over the detect phase.
    pub fn candidate(&mut self) -> Option<usize> {
        debug_assert!(self.detect_done());
        self.candidate = smallest_period(
            &self.tokens,
            self.budgets.burn_in(),
            self.budgets.max_period(),
        );
        self.candidate
    }

    /// Feeds one verification token; returns false once periodicity breaks.
    pub fn push_verify(&mut self, token: usize) -> bool {
        let k = self.candidate.expect("verification needs a candidate");
        let ok = token == self.tokens[self.tokens.len() - k];
        self.tokens.push(token);
        if !ok {
            self.broken = true;
        }
        ok
    }

    pub fn verdict(&self) -> OrbitVerdict {
        let detect = self.budgets.detect;
        let non_periodic = OrbitVerdict::NonPeriodic {
            steps_examined: self.tokens.len(),
        };
        let Some(k) = self.candidate else {
            return non_periodic;
        };
        let verified = self.tokens.len() - detect;
        let reps = verified / k;
        if self.broken || reps < REPETITIONS {
            return non_periodic;
        }
        let head = &self.tokens[..detect];
        OrbitVerdict::Periodic {
            period: k,
            cycle: head[detect - k..].to_vec(),
            detect_step: onset(head, k),
            verified_repetitions: reps,
        }
    }
}

/// Pulls `detect` tokens from `next`, finds the smallest trailing period, then
/// pulls up to `verify` more tokens confirming it at every step.
pub fn detect_period<E>(
    mut next: impl FnMut() -> std::result::Result<usize, E>,
    budgets: Budgets,
) -> std::result::Result<(OrbitVerdict, Vec<usize>), E>
where
    E: From<Error>,
{
    let mut det = PeriodDetector::new(budgets)?;
    while !det.detect_done() {
        det.push_detect(next()?);
    }
    if det.candidate().is_some() {
        for _ in 0..budgets.verify {
            if !det.push_verify(next()?) {
                break;
            }
        }
    }
    let verdict = det.verdict();
    Ok((verdict, det.into_tokens()))
}
