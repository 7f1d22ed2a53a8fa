//! Scalar play operator on step inputs.
//!
//! On a step input the play reduces to the dead-zone recursion
//! `xi_n = max(q_n - r, min(xi_{n-1}, q_n + r))` started from `xi_{-1} = 0`,
//! which is exactly the initial condition `max(q_0 - r, min(0, q_0 + r))`.

use crate::error::{Error, Result};
use crate::signals::StepSignal;

fn check_threshold(r: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidThreshold(r));
    }
    Ok(())
}

/// One dead-zone update. Nondecreasing in both `prev` and `q`.
#[inline]
pub(crate) fn dead_zone(prev: f64, q: f64, r: f64) -> f64 {
    (q - r).max(prev.min(q + r))
}

pub fn play_init(q0: f64, r: f64) -> Result<f64> {
    check_threshold(r)?;
    Ok(dead_zone(0.0, q0, r))
}

pub fn play_update(xi_prev: f64, qn: f64, r: f64) -> Result<f64> {
    check_threshold(r)?;
    Ok(dead_zone(xi_prev, qn, r))
}

/// Output of the play with threshold `r` on the same division as `q`.
pub fn play_trajectory(q: &StepSignal, r: f64) -> Result<StepSignal> {
    check_threshold(r)?;
    let mut xi = 0.0;
    let values = q
        .values()
        .iter()
        .map(|&qn| {
            xi = dead_zone(xi, qn, r);
            xi
        })
        .collect();
    StepSignal::new(q.division().to_vec(), values)
}

/// Memory of a family of plays with thresholds `r_1 < ... < r_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayState {
    thresholds: Vec<f64>,
    memory: Vec<f64>,
}

impl PlayState {
    /// Fresh state (all memories zero). Thresholds are sorted; duplicates and
    /// non-positive values are rejected.
    pub fn new(thresholds: Vec<f64>) -> Result<Self> {
        let thresholds = sorted_thresholds(thresholds)?;
        let memory = vec![0.0; thresholds.len()];
        Ok(Self { thresholds, memory })
    }

    /// State with explicit memory. `memory[j]` belongs to the `j`-th threshold
    /// in the order given; both are sorted together.
    pub fn with_memory(thresholds: Vec<f64>, memory: Vec<f64>) -> Result<Self> {
        if thresholds.len() != memory.len() {
            return Err(Error::InvalidState(format!(
                "{} thresholds but {} memory entries",
                thresholds.len(),
                memory.len()
            )));
        }
        let mut pairs: Vec<(f64, f64)> = thresholds.into_iter().zip(memory).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (thresholds, memory): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let thresholds = sorted_thresholds(thresholds)?;
        for (j, m) in memory.iter().enumerate() {
            if !m.is_finite() {
                return Err(Error::NonFinite {
                    index: j,
                    value: *m,
                });
            }
        }
        // |xi_j - xi_i| <= r_j - r_i for i < j; consecutive pairs suffice.
        for j in 1..memory.len() {
            let gap = (memory[j] - memory[j - 1]).abs();
            let allowed = thresholds[j] - thresholds[j - 1];
            if gap > allowed * (1.0 + 1e-12) {
                return Err(Error::InvalidState(format!(
                    "memory gap {gap} exceeds threshold gap {allowed} at index {j}"
                )));
            }
        }
        Ok(Self { thresholds, memory })
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn memory(&self) -> &[f64] {
        &self.memory
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    /// Memory values the plays would take after input `qn`, without
    /// committing them.
    pub(crate) fn trial(&self, qn: f64) -> impl Iterator<Item = f64> + '_ {
        self.thresholds
            .iter()
            .zip(&self.memory)
            .map(move |(&r, &m)| dead_zone(m, qn, r))
    }

    pub fn advance(&mut self, qn: f64) {
        for (m, &r) in self.memory.iter_mut().zip(&self.thresholds) {
            *m = dead_zone(*m, qn, r);
        }
    }
}

fn sorted_thresholds(mut thresholds: Vec<f64>) -> Result<Vec<f64>> {
    for &r in &thresholds {
        check_threshold(r)?;
    }
    thresholds.sort_by(f64::total_cmp);
    if let Some(w) = thresholds.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::DuplicateThreshold(w[0]));
    }
    Ok(thresholds)
}

pub fn play_state_step(state: &PlayState, qn: f64) -> PlayState {
    let mut next = state.clone();
    next.advance(qn);
    next
}
