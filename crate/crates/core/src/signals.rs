//! Right-continuous step signals on `[0, T]`.
//!
//! A signal is stored as a division `0 = s_0 < s_1 < ... < s_N = T` together
//! with `N + 1` values. The value `x_{n-1}` holds on `[s_{n-1}, s_n)` and `x_N`
//! is the value at `T` itself, so a signal may jump at its final time.

use crate::error::{Error, Result};

fn validate_division(division: &[f64]) -> Result<()> {
    if division.len() < 2 {
        return Err(Error::EmptyDivision(division.len()));
    }
    if division[0] != 0.0 {
        return Err(Error::DivisionStart(division[0]));
    }
    for (i, &s) in division.iter().enumerate() {
        if !s.is_finite() {
            return Err(Error::NonFinite { index: i, value: s });
        }
    }
    for (i, w) in division.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(Error::NonMonotoneDivision {
                index: i + 1,
                prev: w[0],
                next: w[1],
            });
        }
    }
    Ok(())
}

/// Index of the value active at `t`: the largest `n` with `s_n <= t`.
/// Caller guarantees `0 <= t <= T`.
fn active_index(division: &[f64], t: f64) -> usize {
    division.partition_point(|&s| s <= t) - 1
}

fn check_time(division: &[f64], t: f64) -> Result<()> {
    let final_time = division[division.len() - 1];
    if !(0.0..=final_time).contains(&t) {
        return Err(Error::InvalidInterval {
            start: t,
            end: t,
            final_time,
        });
    }
    Ok(())
}

fn check_interval(division: &[f64], start: f64, end: f64) -> Result<()> {
    let final_time = division[division.len() - 1];
    if !(start >= 0.0 && start <= end && end <= final_time) {
        return Err(Error::InvalidInterval {
            start,
            end,
            final_time,
        });
    }
    Ok(())
}

/// Uniform grid `t_i = i * T / N`, computed so that grids whose nodes coincide
/// as rationals produce bit-identical times.
pub fn uniform_division(final_time: f64, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::EmptyDivision(1));
    }
    if !(final_time > 0.0 && final_time.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "final time must be positive, got {final_time}"
        )));
    }
    Ok((0..=steps)
        .map(|i| (i as f64 * final_time) / steps as f64)
        .collect())
}

/// Scalar right-continuous step function.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSignal {
    division: Vec<f64>,
    values: Vec<f64>,
}

impl StepSignal {
    pub fn new(division: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        validate_division(&division)?;
        if values.len() != division.len() {
            return Err(Error::LengthMismatch {
                division: division.len(),
                values: values.len(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Self { division, values })
    }

    pub fn constant(division: Vec<f64>, value: f64) -> Result<Self> {
        let values = vec![value; division.len()];
        Self::new(division, values)
    }

    /// Samples a (typically continuous) curve on a uniform grid of `steps` intervals.
    pub fn sample<F: Fn(f64) -> f64>(f: F, final_time: f64, steps: usize) -> Result<Self> {
        let division = uniform_division(final_time, steps)?;
        let values = division.iter().map(|&t| f(t)).collect();
        Self::new(division, values)
    }

    pub fn division(&self) -> &[f64] {
        &self.division
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn final_time(&self) -> f64 {
        self.division[self.division.len() - 1]
    }

    /// Number of intervals `N`.
    pub fn steps(&self) -> usize {
        self.division.len() - 1
    }

    pub fn at(&self, t: f64) -> Result<f64> {
        check_time(&self.division, t)?;
        Ok(self.values[active_index(&self.division, t)])
    }

    /// Re-expresses the signal on another division of the same `[0, T]`.
    pub fn resample(&self, division: &[f64]) -> Result<Self> {
        validate_division(division)?;
        let t = division[division.len() - 1];
        if t != self.final_time() {
            return Err(Error::FinalTimeMismatch(self.final_time(), t));
        }
        let values = division
            .iter()
            .map(|&s| self.values[active_index(&self.division, s)])
            .collect();
        Ok(Self {
            division: division.to_vec(),
            values,
        })
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Result<Self> {
        Self::new(
            self.division.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Pointwise combination on the merged division.
    pub fn zip_with<F: Fn(f64, f64) -> f64>(&self, other: &StepSignal, f: F) -> Result<Self> {
        let (division, a, b) = merge_divisions(self, other)?;
        let values = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(&x, &y)| f(x, y))
            .collect();
        Self::new(division, values)
    }

    /// `sup |x|` over the whole of `[0, T]`.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Cumulative seminorms `|x|_{[0, s_n]}` at every division point.
    pub fn running_sup(&self) -> Vec<f64> {
        running_max(self.values.iter().map(|v| v.abs()))
    }
}

/// Right-continuous step function with values in `R^L`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSignal {
    division: Vec<f64>,
    values: Vec<Vec<f64>>,
    dim: usize,
}

impl ParamSignal {
    pub fn new(division: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        validate_division(&division)?;
        if values.len() != division.len() {
            return Err(Error::LengthMismatch {
                division: division.len(),
                values: values.len(),
            });
        }
        let dim = values[0].len();
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "parameter dimension must be >= 1".into(),
            ));
        }
        for (index, v) in values.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            if let Some(&value) = v.iter().find(|x| !x.is_finite()) {
                return Err(Error::NonFinite { index, value });
            }
        }
        Ok(Self {
            division,
            values,
            dim,
        })
    }

    pub fn constant(division: Vec<f64>, value: Vec<f64>) -> Result<Self> {
        let values = vec![value; division.len()];
        Self::new(division, values)
    }

    /// Wraps a scalar signal as a one-dimensional parameter signal.
    pub fn from_scalar(x: &StepSignal) -> Self {
        Self {
            division: x.division.clone(),
            values: x.values.iter().map(|&v| vec![v]).collect(),
            dim: 1,
        }
    }

    /// Stacks scalar components sharing one final time into a vector signal.
    pub fn from_components(components: &[&StepSignal]) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidParameter("no components".into()))?;
        let mut division = first.division.clone();
        for c in &components[1..] {
            division = merge_points(&division, &c.division, first.final_time(), c.final_time())?;
        }
        let resampled = components
            .iter()
            .map(|c| c.resample(&division))
            .collect::<Result<Vec<_>>>()?;
        let values = (0..division.len())
            .map(|n| resampled.iter().map(|c| c.values[n]).collect())
            .collect();
        Self::new(division, values)
    }

    pub fn division(&self) -> &[f64] {
        &self.division
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn final_time(&self) -> f64 {
        self.division[self.division.len() - 1]
    }

    pub fn steps(&self) -> usize {
        self.division.len() - 1
    }

    pub fn at(&self, t: f64) -> Result<&[f64]> {
        check_time(&self.division, t)?;
        Ok(&self.values[active_index(&self.division, t)])
    }

    /// Scalar component `i` as a step signal.
    pub fn component(&self, i: usize) -> Result<StepSignal> {
        if i >= self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: i + 1,
            });
        }
        StepSignal::new(
            self.division.clone(),
            self.values.iter().map(|v| v[i]).collect(),
        )
    }

    pub fn resample(&self, division: &[f64]) -> Result<Self> {
        validate_division(division)?;
        let t = division[division.len() - 1];
        if t != self.final_time() {
            return Err(Error::FinalTimeMismatch(self.final_time(), t));
        }
        let values = division
            .iter()
            .map(|&s| self.values[active_index(&self.division, s)].clone())
            .collect();
        Ok(Self {
            division: division.to_vec(),
            values,
            dim: self.dim,
        })
    }

    /// Euclidean distance `||u(t) - v(t)||` as a scalar step signal on the
    /// merged division.
    pub fn distance(&self, other: &ParamSignal) -> Result<StepSignal> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let (division, a, b) = merge_divisions(self, other)?;
        let values = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| euclidean_distance(x, y))
            .collect();
        StepSignal::new(division, values)
    }
}

pub(crate) fn euclidean_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn running_max<I: IntoIterator<Item = f64>>(values: I) -> Vec<f64> {
    let mut acc = 0.0_f64;
    values
        .into_iter()
        .map(|v| {
            acc = acc.max(v);
            acc
        })
        .collect()
}

/// Common behaviour of scalar and vector step signals.
pub trait Piecewise: Sized {
    fn division(&self) -> &[f64];
    fn resample(&self, division: &[f64]) -> Result<Self>;

    fn final_time(&self) -> f64 {
        let d = self.division();
        d[d.len() - 1]
    }
}

impl Piecewise for StepSignal {
    fn division(&self) -> &[f64] {
        &self.division
    }
    fn resample(&self, division: &[f64]) -> Result<Self> {
        StepSignal::resample(self, division)
    }
}

impl Piecewise for ParamSignal {
    fn division(&self) -> &[f64] {
        &self.division
    }
    fn resample(&self, division: &[f64]) -> Result<Self> {
        ParamSignal::resample(self, division)
    }
}

fn merge_points(a: &[f64], b: &[f64], ta: f64, tb: f64) -> Result<Vec<f64>> {
    if ta != tb {
        return Err(Error::FinalTimeMismatch(ta, tb));
    }
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) if x == y => {
                i += 1;
                j += 1;
                x
            }
            (Some(&x), Some(&y)) if x < y => {
                i += 1;
                x
            }
            (Some(_), Some(&y)) => {
                j += 1;
                y
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => unreachable!(),
        };
        out.push(next);
    }
    Ok(out)
}

/// Union of both divisions (exact comparison, no epsilon merging) with both
/// signals re-expressed on it.
pub fn merge_divisions<A: Piecewise, B: Piecewise>(a: &A, b: &B) -> Result<(Vec<f64>, A, B)> {
    let division = merge_points(a.division(), b.division(), a.final_time(), b.final_time())?;
    let ra = a.resample(&division)?;
    let rb = b.resample(&division)?;
    Ok((division, ra, rb))
}

/// `|x|_{[s,t]} = sup_{s <= tau <= t} |x(tau)|`.
pub fn sup_seminorm(x: &StepSignal, s: f64, t: f64) -> Result<f64> {
    check_interval(&x.division, s, t)?;
    let lo = active_index(&x.division, s);
    let hi = active_index(&x.division, t);
    Ok(x.values[lo..=hi].iter().fold(0.0, |m, v| m.max(v.abs())))
}

/// `sup_{t0-h <= tau <= t0} |x(tau) - x(t0-h)|`.
pub fn oscillation(x: &StepSignal, t0: f64, h: f64) -> Result<f64> {
    if !(h >= 0.0) {
        return Err(Error::InvalidParameter(format!("negative window {h}")));
    }
    let start = t0 - h;
    check_interval(&x.division, start, t0)?;
    let lo = active_index(&x.division, start);
    let hi = active_index(&x.division, t0);
    let base = x.values[lo];
    Ok(x.values[lo..=hi]
        .iter()
        .fold(0.0, |m, v| m.max((v - base).abs())))
}
