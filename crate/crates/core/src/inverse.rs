//! Inversion of `q + P_k(u)[q] = w` on step signals.
//!
//! On each interval of the division the unknown value `q_n` solves the scalar
//! equation `Phi(q) = w_n` with
//! `Phi(q) = q + sum_j g_j(u_n, max(q - r_j, min(xi_{n-1}^j, q + r_j)))`.
//! `Phi` is the identity plus a nondecreasing continuous function, so it is
//! strictly increasing with slope at least one and the root is unique; a
//! residual `|Phi(q) - w_n| <= tol` bounds the per-step error by `tol`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::play::PlayState;
use crate::preisach::{forward_apply, DensityModel, DiscretePreisach};
use crate::signals::{euclidean_distance, merge_divisions, running_max, ParamSignal, StepSignal};

pub const DEFAULT_TOL: f64 = 1e-10;

const MAX_DOUBLINGS: u32 = 64;
/// Bracket width below which bisection hands over to false position.
const SECANT_SWITCH: f64 = 1e-3;
const MAX_ITERATIONS: usize = 500;

#[derive(Debug, Clone)]
pub struct StepSolution {
    pub q: f64,
    pub state: PlayState,
    pub iterations: usize,
}

fn residual(op: &DiscretePreisach, u: &[f64], state: &PlayState, w: f64, q: f64) -> Result<f64> {
    Ok(q + op.output(u, state.trial(q))? - w)
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    Ok(())
}

/// Solves one time step given the memory left by the previous steps.
pub fn invert_step(
    op: &DiscretePreisach,
    u_n: &[f64],
    w_n: f64,
    state: &PlayState,
    tol: f64,
) -> Result<StepSolution> {
    check_tol(tol)?;
    op.check_param_dim(u_n.len())?;
    let mut iterations = 0;
    let mut f = |q: f64| {
        iterations += 1;
        residual(op, u_n, state, w_n, q)
    };

    // Phi(w) - w = G. Monotonicity puts the root between w - G and w.
    let g = f(w_n)?;
    let root = if g.abs() <= tol {
        w_n
    } else {
        let (mut lo, mut flo, mut hi, mut fhi);
        let mut width = g.abs();
        let mut doublings = 0;
        if g > 0.0 {
            hi = w_n;
            fhi = g;
            loop {
                lo = w_n - width;
                flo = f(lo)?;
                if flo <= 0.0 {
                    break;
                }
                doublings += 1;
                if doublings > MAX_DOUBLINGS {
                    return Err(Error::BracketExpansion {
                        target: w_n,
                        doublings,
                    });
                }
                width *= 2.0;
            }
        } else {
            lo = w_n;
            flo = g;
            loop {
                hi = w_n + width;
                fhi = f(hi)?;
                if fhi >= 0.0 {
                    break;
                }
                doublings += 1;
                if doublings > MAX_DOUBLINGS {
                    return Err(Error::BracketExpansion {
                        target: w_n,
                        doublings,
                    });
                }
                width *= 2.0;
            }
        }
        solve_bracketed(&mut f, (lo, flo), (hi, fhi), w_n, tol)?
    };
    let mut next = state.clone();
    next.advance(root);
    Ok(StepSolution {
        q: root,
        state: next,
        iterations,
    })
}

/// Bisection down to `SECANT_SWITCH`, then Illinois false position. Requires
/// `flo <= 0 <= fhi`.
fn solve_bracketed<F: FnMut(f64) -> Result<f64>>(
    f: &mut F,
    (mut lo, mut flo): (f64, f64),
    (mut hi, mut fhi): (f64, f64),
    target: f64,
    tol: f64,
) -> Result<f64> {
    if flo.abs() <= tol {
        return Ok(lo);
    }
    if fhi.abs() <= tol {
        return Ok(hi);
    }
    let mut side = 0i8;
    for _ in 0..MAX_ITERATIONS {
        let x = if hi - lo > SECANT_SWITCH {
            0.5 * (lo + hi)
        } else {
            let x = (lo * fhi - hi * flo) / (fhi - flo);
            if x > lo && x < hi {
                x
            } else {
                0.5 * (lo + hi)
            }
        };
        if !(x > lo && x < hi) {
            // bracket exhausted at machine resolution
            break;
        }
        let fx = f(x)?;
        if fx.abs() <= tol {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
            flo = fx;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            fhi = fx;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    let (flo_true, fhi_true) = (f(lo)?, f(hi)?);
    let (best, fbest) = if flo_true.abs() <= fhi_true.abs() {
        (lo, flo_true)
    } else {
        (hi, fhi_true)
    };
    if fbest.abs() <= tol {
        Ok(best)
    } else {
        Err(Error::RootStalled {
            target,
            residual: fbest.abs(),
            tol,
        })
    }
}

#[derive(Debug, Clone)]
pub struct InversionReport {
    pub q: StepSignal,
    /// `sup |q + P_k(u)[q] - w|`, recomputed by forward application.
    pub residual_sup: f64,
    pub rho_k: f64,
    /// `e^M`.
    pub bound_em: f64,
    pub per_step_iters: Vec<usize>,
}

/// Solves `q + P_k(u)[q] = w` on the merged division of `u` and `w`.
pub fn invert(
    op: &DiscretePreisach,
    u: &ParamSignal,
    w: &StepSignal,
    tol: f64,
) -> Result<InversionReport> {
    check_tol(tol)?;
    op.check_param_dim(u.dim())?;
    let (division, w, u) = merge_divisions(w, u)?;
    let mut state = op.fresh_state();
    let mut values = Vec::with_capacity(division.len());
    let mut per_step_iters = Vec::with_capacity(division.len());
    for (&wn, un) in w.values().iter().zip(u.values()) {
        let step = invert_step(op, un, wn, &state, tol)?;
        values.push(step.q);
        per_step_iters.push(step.iterations);
        state = step.state;
    }
    let q = StepSignal::new(division, values)?;
    let check = forward_apply(op, &u, &q)?;
    let residual_sup = check.zip_with(&w, |a, b| a - b)?.sup_norm();
    if residual_sup > tol {
        return Err(Error::Residual {
            residual: residual_sup,
            tol,
        });
    }
    Ok(InversionReport {
        q,
        residual_sup,
        rho_k: op.rho(),
        bound_em: op.mass().exp(),
        per_step_iters,
    })
}

/// Truncation radius `e^M max ||w||` that keeps every active play inside the
/// discretized range; falls back to the model's support radius for zero input.
pub fn inversion_radius(model: &dyn DensityModel, inputs: &[&StepSignal]) -> f64 {
    let sup = inputs.iter().fold(0.0_f64, |m, w| m.max(w.sup_norm()));
    let r = model.mass().exp() * sup;
    if r > 0.0 {
        r
    } else {
        model.support_radius()
    }
}

/// Lipschitz constants of the discrete inverse and of its limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifiedConstants {
    /// `rho_k = prod (1 + mu_j)`.
    pub rho_k: f64,
    /// `e^M`.
    pub exp_mass: f64,
    /// `sum K_j`.
    pub sum_kappa: f64,
    /// `M1`.
    pub param_lipschitz: f64,
}

impl CertifiedConstants {
    /// `rho_k <= e^M` and `sum K_j <= M1`, up to relative rounding slack.
    pub fn is_consistent(&self) -> bool {
        let slack = 1.0 + 1e-12;
        self.rho_k <= self.exp_mass * slack && self.sum_kappa <= self.param_lipschitz * slack
    }
}

pub fn certified_lipschitz(
    op: &DiscretePreisach,
    mass: f64,
    param_lipschitz: f64,
) -> CertifiedConstants {
    CertifiedConstants {
        rho_k: op.layer_mass().iter().map(|m| 1.0 + m).product(),
        exp_mass: mass.exp(),
        sum_kappa: op.layer_param_lipschitz().iter().sum(),
        param_lipschitz,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    pub t: f64,
    /// `|q(t) - q_hat(t)|`.
    pub diff: f64,
    /// `|w - w_hat|_{[0,t]}`.
    pub w_gap: f64,
    /// `||u - u_hat||_{[0,t]}`.
    pub u_gap: f64,
    /// `rho_k (w_gap + sum K_j u_gap) + 2 tol`.
    pub rho_bound: f64,
    /// `e^M (w_gap + M1 u_gap) + 2 tol`.
    pub em_bound: f64,
}

#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub constants: CertifiedConstants,
    pub rows: Vec<StabilityRow>,
    pub q: StepSignal,
    pub q_hat: StepSignal,
}

impl StabilityReport {
    /// Smallest `rho_bound - diff` over all times.
    pub fn rho_slack(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.rho_bound - r.diff)
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest `em_bound - diff` over all times.
    pub fn em_slack(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.em_bound - r.diff)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn passed(&self) -> bool {
        self.rho_slack() >= 0.0 && self.em_slack() >= 0.0
    }

    pub fn max_diff(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.diff))
    }
}

/// Solves both problems and compares `|q - q_hat|` against the discrete
/// bound (with `rho_k`, `sum K_j`) and the limit bound (with `e^M`, `M1`)
/// at every point of the merged division.
pub fn stability_check(
    op: &DiscretePreisach,
    u: &ParamSignal,
    w: &StepSignal,
    u_hat: &ParamSignal,
    w_hat: &StepSignal,
    tol: f64,
) -> Result<StabilityReport> {
    let (a, b) = std::thread::scope(|s| {
        let h = s.spawn(|| invert(op, u_hat, w_hat, tol));
        let a = invert(op, u, w, tol);
        (a, h.join().expect("inversion thread panicked"))
    });
    let (q, q_hat) = (a?.q, b?.q);
    let constants = certified_lipschitz(op, op.mass(), op.param_lipschitz());

    let q_diff = q.zip_with(&q_hat, |x, y| (x - y).abs())?;
    let w_diff = w.zip_with(w_hat, |x, y| (x - y).abs())?;
    let u_dist = u.distance(u_hat)?;
    let (_, q_diff, w_diff) = merge_divisions(&q_diff, &w_diff)?;
    let (division, q_diff, u_dist) = merge_divisions(&q_diff, &u_dist)?;
    let w_diff = w_diff.resample(&division)?;

    let diffs = q_diff.values();
    let w_gaps = running_max(w_diff.values().iter().copied());
    let u_gaps = running_max(u_dist.values().iter().copied());
    let rows = division
        .iter()
        .enumerate()
        .map(|(n, &t)| {
            let (wg, ug) = (w_gaps[n], u_gaps[n]);
            StabilityRow {
                t,
                diff: diffs[n],
                w_gap: wg,
                u_gap: ug,
                rho_bound: constants.rho_k * (wg + constants.sum_kappa * ug) + 2.0 * tol,
                em_bound: constants.exp_mass * (wg + constants.param_lipschitz * ug) + 2.0 * tol,
            }
        })
        .collect();
    Ok(StabilityReport {
        constants,
        rows,
        q,
        q_hat,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityRow {
    /// Right end `t0` of the window `[t0 - h, t0]`.
    pub t: f64,
    pub h: f64,
    /// `|q(t0) - q(t0 - h)|`.
    pub change: f64,
    /// `e^M (|w(.) - w(t0-h)|_{[t0-h,t0]} + M1 ||u(.) - u(t0-h)||_{[t0-h,t0]}) + 2 tol`.
    pub bound: f64,
}

#[derive(Debug, Clone)]
pub struct RegularityReport {
    pub q: StepSignal,
    pub rows: Vec<RegularityRow>,
}

impl RegularityReport {
    pub fn min_slack(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.bound - r.change)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_change(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.change))
    }

    pub fn passed(&self) -> bool {
        self.min_slack() >= 0.0
    }
}

/// Inverts sampled inputs and checks the oscillation bound on every window
/// between consecutive grid points.
pub fn regularity_check(
    op: &DiscretePreisach,
    u: &ParamSignal,
    w: &StepSignal,
    tol: f64,
) -> Result<RegularityReport> {
    let report = invert(op, u, w, tol)?;
    let q = report.q;
    let division = q.division().to_vec();
    let w = w.resample(&division)?;
    let u = u.resample(&division)?;
    let exp_mass = op.mass().exp();
    let m1 = op.param_lipschitz();
    let rows = (1..division.len())
        .map(|n| {
            let dw = (w.values()[n] - w.values()[n - 1]).abs();
            let du = euclidean_distance(&u.values()[n], &u.values()[n - 1]);
            RegularityRow {
                t: division[n],
                h: division[n] - division[n - 1],
                change: (q.values()[n] - q.values()[n - 1]).abs(),
                bound: exp_mass * (dw + m1 * du) + 2.0 * tol,
            }
        })
        .collect();
    Ok(RegularityReport { q, rows })
}

/// `max |coarse(t) - fine(t)|` over the division points of `coarse`.
pub fn mesh_agreement(coarse: &StepSignal, fine: &StepSignal) -> Result<f64> {
    if coarse.final_time() != fine.final_time() {
        return Err(Error::FinalTimeMismatch(
            coarse.final_time(),
            fine.final_time(),
        ));
    }
    coarse
        .division()
        .iter()
        .zip(coarse.values())
        .try_fold(0.0_f64, |m, (&t, &v)| Ok(m.max((v - fine.at(t)?).abs())))
}

/// Convenience for callers holding the model: discretize with
/// [`inversion_radius`] and invert.
pub fn invert_model(
    model: Arc<dyn DensityModel>,
    k: usize,
    u: &ParamSignal,
    w: &StepSignal,
    tol: f64,
) -> Result<InversionReport> {
    let radius = inversion_radius(model.as_ref(), &[w]);
    let op = crate::preisach::discretize(model, k, Some(radius))?;
    invert(&op, u, w, tol)
}
