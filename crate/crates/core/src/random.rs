//! Seeded generators for random step signals.
//!
//! Signals have `N` uniform in `[10, 100]` steps (or a caller-given range),
//! interior division points uniform in `(0, T)` and values uniform in
//! `[-A, A]`. All generators draw from a [`ChaCha8Rng`], so a seed fixes
//! every output on every platform.

use std::ops::RangeInclusive;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::signals::{ParamSignal, StepSignal};

pub const DEFAULT_STEPS: RangeInclusive<usize> = 10..=100;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `0 = s_0 < ... < s_N = T` with sorted uniform interior points.
pub fn random_division<R: Rng + ?Sized>(
    rng: &mut R,
    final_time: f64,
    steps: usize,
) -> Result<Vec<f64>> {
    if steps == 0 || !(final_time > 0.0 && final_time.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need steps >= 1 and T > 0, got {steps} and {final_time}"
        )));
    }
    let mut interior: Vec<f64> = Vec::with_capacity(steps - 1);
    while interior.len() < steps - 1 {
        let s = rng.gen_range(0.0..final_time);
        if s > 0.0 {
            interior.push(s);
        }
        if interior.len() == steps - 1 {
            interior.sort_by(f64::total_cmp);
            interior.dedup();
        }
    }
    let mut division = Vec::with_capacity(steps + 1);
    division.push(0.0);
    division.extend(interior);
    division.push(final_time);
    Ok(division)
}

pub fn random_step_signal_with<R: Rng + ?Sized>(
    rng: &mut R,
    final_time: f64,
    steps: RangeInclusive<usize>,
    amplitude: f64,
) -> Result<StepSignal> {
    let n = rng.gen_range(steps);
    let division = random_division(rng, final_time, n)?;
    let values = (0..division.len())
        .map(|_| rng.gen_range(-amplitude..=amplitude))
        .collect();
    StepSignal::new(division, values)
}

pub fn random_step_signal<R: Rng + ?Sized>(
    rng: &mut R,
    final_time: f64,
    amplitude: f64,
) -> Result<StepSignal> {
    random_step_signal_with(rng, final_time, DEFAULT_STEPS, amplitude)
}

pub fn random_param_signal<R: Rng + ?Sized>(
    rng: &mut R,
    final_time: f64,
    dim: usize,
    amplitude: f64,
) -> Result<ParamSignal> {
    let n = rng.gen_range(DEFAULT_STEPS);
    let division = random_division(rng, final_time, n)?;
    let values = (0..division.len())
        .map(|_| {
            (0..dim)
                .map(|_| rng.gen_range(-amplitude..=amplitude))
                .collect()
        })
        .collect();
    ParamSignal::new(division, values)
}
