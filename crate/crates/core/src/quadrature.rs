//! Gauss–Legendre quadrature with adaptive interval bisection.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Number of Gauss–Legendre nodes per panel.
pub const ORDER: usize = 16;

/// Default absolute tolerance for all integrals computed by the crate.
pub const DEFAULT_TOL: f64 = 1e-10;

const MAX_DEPTH: u32 = 48;

struct Rule {
    nodes: [f64; ORDER],
    weights: [f64; ORDER],
}

/// Nodes and weights on [-1, 1] from Newton iteration on P_n.
fn rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = ORDER;
        let mut nodes = [0.0; ORDER];
        let mut weights = [0.0; ORDER];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Rule { nodes, weights }
    })
}

/// Single fixed-order panel on `[a, b]`.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let r = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    half * r
        .nodes
        .iter()
        .zip(&r.weights)
        .map(|(&x, &w)| w * f(mid + half * x))
        .sum::<f64>()
}

/// `∫_a^b f` (signed; `a > b` allowed) to absolute tolerance `tol`.
///
/// Each panel is accepted once its two halves agree with it to `tol`.
/// Fails with the accumulated error estimate if a panel is still unresolved at
/// the maximum bisection depth.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if b < a {
        return integrate(f, b, a, tol).map(|v| -v);
    }
    let whole = gauss_legendre(&f, a, b);
    let mut err = 0.0;
    let value = refine(&f, a, b, whole, tol, 0, &mut err);
    if err > tol || !value.is_finite() {
        return Err(Error::Quadrature {
            lo: a,
            hi: b,
            achieved: err,
            tol,
        });
    }
    Ok(value)
}

/// Like [`integrate`] for integrands that can themselves fail; the first
/// integrand error aborts the integral.
pub fn try_integrate<F: Fn(f64) -> Result<f64>>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let failure = std::cell::RefCell::new(None);
    let value = integrate(
        |x| match f(x) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        },
        a,
        b,
        tol,
    );
    match failure.into_inner() {
        Some(e) => Err(e),
        None => value,
    }
}

fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    err: &mut f64,
) -> f64 {
    let m = 0.5 * (a + b);
    let left = gauss_legendre(f, a, m);
    let right = gauss_legendre(f, m, b);
    let diff = (left + right - whole).abs();
    if diff <= tol || !(m > a && m < b) {
        return left + right;
    }
    if depth >= MAX_DEPTH {
        *err += diff;
        return left + right;
    }
    refine(f, a, m, left, tol, depth + 1, err) + refine(f, m, b, right, tol, depth + 1, err)
}
