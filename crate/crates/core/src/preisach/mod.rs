//! Discrete parameter-dependent Preisach operators
//! `P_k(u)[q](t) = sum_j g_j(u(t), xi_{r_j}(t))` and their forward evaluation.

mod density;

pub use density::{
    check_hypotheses, Coefficient, DensityModel, Envelope, FamilyConfig, FnDensity, ModelConfig,
    Preset, Profile, SeparableDensity,
};

use std::fmt;
use std::sync::Arc;

use log::warn;
use rand::Rng;

use crate::error::{Error, Result};
use crate::play::PlayState;
use crate::signals::{merge_divisions, ParamSignal, StepSignal};

/// `g(u, r, v) = ∫_0^v psi(u, r, s) ds` for `r >= 0`.
pub fn primitive_g(model: &dyn DensityModel, u: &[f64], r: f64, v: f64) -> Result<f64> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::InvalidThreshold(r));
    }
    model.primitive(u, r, v)
}

/// A layer function `g_j(u, v)` of a hand-built operator.
pub type LayerFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Layers {
    Model {
        model: Arc<dyn DensityModel>,
        edges: Vec<f64>,
    },
    Custom(Vec<LayerFn>),
}

/// Discrete operator with thresholds `r_1 < ... < r_k`, layer functions `g_j`,
/// and the constants `mu_j`, `K_j`, `rho_k = prod (1 + mu_j)`.
#[derive(Clone)]
pub struct DiscretePreisach {
    radius: f64,
    layer_mass: Vec<f64>,
    layer_param_lipschitz: Vec<f64>,
    rho: f64,
    mass: f64,
    param_lipschitz: f64,
    param_dim: Option<usize>,
    fresh: PlayState,
    layers: Layers,
}

impl fmt::Debug for DiscretePreisach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiscretePreisach")
            .field("k", &self.k())
            .field("radius", &self.radius)
            .field("rho", &self.rho)
            .field("mass", &self.mass)
            .field("param_lipschitz", &self.param_lipschitz)
            .finish()
    }
}

/// Memory discretization with `r_j = jR/k` and
/// `g_j(u, v) = ∫_{r_{j-1}}^{r_j} g(u, r, v) dr`.
///
/// `radius` defaults to the model's support radius. `K_j` and `M1` are taken
/// over the `v`-range `[-R, R]`.
pub fn discretize(
    model: Arc<dyn DensityModel>,
    k: usize,
    radius: Option<f64>,
) -> Result<DiscretePreisach> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    let radius = radius.unwrap_or_else(|| model.support_radius());
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "truncation radius must be positive, got {radius}"
        )));
    }
    let mut edges: Vec<f64> = (0..=k).map(|j| (j as f64 * radius) / k as f64).collect();
    edges[k] = radius;
    let layer_mass = edges
        .windows(2)
        .map(|w| model.layer_mass(w[0], w[1]))
        .collect::<Result<Vec<_>>>()?;
    let layer_param_lipschitz = edges
        .windows(2)
        .map(|w| model.layer_param_lipschitz(w[0], w[1], radius))
        .collect::<Result<Vec<_>>>()?;
    let rho = layer_mass.iter().map(|m| 1.0 + m).product();
    let fresh = PlayState::new(edges[1..].to_vec())?;
    Ok(DiscretePreisach {
        radius,
        layer_mass,
        layer_param_lipschitz,
        rho,
        mass: model.mass(),
        param_lipschitz: model.param_lipschitz(radius),
        param_dim: Some(model.param_dim()),
        fresh,
        layers: Layers::Model { model, edges },
    })
}

impl DiscretePreisach {
    /// Operator from explicit layer functions. The caller vouches that each
    /// `g_j` vanishes at `v = 0`, is nondecreasing in `v`, and is Lipschitz
    /// with constants `mu[j]` in `v` and `kappa[j]` in `u`
    /// ([`check_layers`] samples this).
    pub fn from_layers(
        thresholds: Vec<f64>,
        layers: Vec<LayerFn>,
        mu: Vec<f64>,
        kappa: Vec<f64>,
    ) -> Result<Self> {
        let k = thresholds.len();
        if k == 0 || layers.len() != k || mu.len() != k || kappa.len() != k {
            return Err(Error::InvalidParameter(format!(
                "need k >= 1 and equal lengths: {} thresholds, {} layers, {} mu, {} kappa",
                k,
                layers.len(),
                mu.len(),
                kappa.len()
            )));
        }
        if thresholds.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter(
                "thresholds must be strictly increasing".into(),
            ));
        }
        if mu
            .iter()
            .chain(&kappa)
            .any(|c| !(*c >= 0.0 && c.is_finite()))
        {
            return Err(Error::InvalidParameter(
                "mu_j and K_j must be finite and nonnegative".into(),
            ));
        }
        let fresh = PlayState::new(thresholds.clone())?;
        let rho = mu.iter().map(|m| 1.0 + m).product();
        Ok(Self {
            radius: thresholds[k - 1],
            mass: mu.iter().sum(),
            param_lipschitz: kappa.iter().sum(),
            layer_mass: mu,
            layer_param_lipschitz: kappa,
            rho,
            param_dim: None,
            fresh,
            layers: Layers::Custom(layers),
        })
    }

    pub fn k(&self) -> usize {
        self.layer_mass.len()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn thresholds(&self) -> &[f64] {
        self.fresh.thresholds()
    }

    /// `mu_j`.
    pub fn layer_mass(&self) -> &[f64] {
        &self.layer_mass
    }

    /// `K_j`.
    pub fn layer_param_lipschitz(&self) -> &[f64] {
        &self.layer_param_lipschitz
    }

    /// `rho_k = prod_j (1 + mu_j)`.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `M` of the underlying model (or `sum mu_j` for hand-built operators).
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// `M1` of the underlying model (or `sum K_j` for hand-built operators).
    pub fn param_lipschitz(&self) -> f64 {
        self.param_lipschitz
    }

    /// Parameter dimension, when the operator comes from a density model.
    pub fn param_dim(&self) -> Option<usize> {
        self.param_dim
    }

    /// All memories zero.
    pub fn fresh_state(&self) -> PlayState {
        self.fresh.clone()
    }

    /// `g_j(u, v)`, zero-based `j`.
    pub fn layer(&self, j: usize, u: &[f64], v: f64) -> Result<f64> {
        match &self.layers {
            Layers::Model { model, edges } => model.layer(u, edges[j], edges[j + 1], v),
            Layers::Custom(fs) => Ok(fs[j](u, v)),
        }
    }

    /// `sum_j g_j(u, memory_j)` accumulated in layer order.
    pub fn output<I: IntoIterator<Item = f64>>(&self, u: &[f64], memory: I) -> Result<f64> {
        let mut acc = 0.0;
        for (j, xi) in memory.into_iter().enumerate() {
            acc += self.layer(j, u, xi)?;
        }
        Ok(acc)
    }

    pub(crate) fn check_param_dim(&self, dim: usize) -> Result<()> {
        match self.param_dim {
            Some(expected) if expected != dim => Err(Error::DimensionMismatch {
                expected,
                found: dim,
            }),
            _ => Ok(()),
        }
    }
}

/// `P_k(u)[q]` on the merged division of `u` and `q`.
pub fn forward_eval(op: &DiscretePreisach, u: &ParamSignal, q: &StepSignal) -> Result<StepSignal> {
    op.check_param_dim(u.dim())?;
    let sup = q.sup_norm();
    if sup > op.radius() {
        warn!(
            "sup |q| = {sup} exceeds truncation radius {}; plays beyond it are dropped",
            op.radius()
        );
    }
    let (division, q, u) = merge_divisions(q, u)?;
    let mut state = op.fresh_state();
    let values = q
        .values()
        .iter()
        .zip(u.values())
        .map(|(&qn, un)| {
            state.advance(qn);
            op.output(un, state.memory().iter().copied())
        })
        .collect::<Result<Vec<_>>>()?;
    StepSignal::new(division, values)
}

/// `w = q + P_k(u)[q]`.
pub fn forward_apply(op: &DiscretePreisach, u: &ParamSignal, q: &StepSignal) -> Result<StepSignal> {
    let p = forward_eval(op, u, q)?;
    p.zip_with(q, |pn, qn| qn + pn)
}

/// `sup_t |P_k(u)[q](t) - P_{k_ref}(u)[q](t)|`, both operators truncated at
/// the model's support radius.
pub fn refine_error(
    model: Arc<dyn DensityModel>,
    u: &ParamSignal,
    q: &StepSignal,
    k: usize,
    k_ref: usize,
) -> Result<f64> {
    let coarse = discretize(model.clone(), k, None)?;
    if k == k_ref {
        forward_eval(&coarse, u, q)?;
        return Ok(0.0);
    }
    let fine = discretize(model, k_ref, None)?;
    let a = forward_eval(&coarse, u, q)?;
    let b = forward_eval(&fine, u, q)?;
    Ok(a.zip_with(&b, |x, y| x - y)?.sup_norm())
}

/// Samples the layer hypotheses of `op`: `g_j(u, 0) = 0`, monotonicity in
/// `v`, and the Lipschitz bounds `mu_j`, `K_j` for `|v| <= v_range`.
pub fn check_layers<R: Rng + ?Sized>(
    op: &DiscretePreisach,
    rng: &mut R,
    samples: usize,
    dim: usize,
    u_scale: f64,
    v_range: f64,
) -> Result<()> {
    let rel = 1e-9;
    for _ in 0..samples {
        let u1: Vec<f64> = (0..dim)
            .map(|_| rng.gen_range(-u_scale..=u_scale))
            .collect();
        let u2: Vec<f64> = (0..dim)
            .map(|_| rng.gen_range(-u_scale..=u_scale))
            .collect();
        let v1 = rng.gen_range(-v_range..=v_range);
        let v2 = rng.gen_range(-v_range..=v_range);
        let du = crate::signals::euclidean_distance(&u1, &u2);
        for j in 0..op.k() {
            let zero = op.layer(j, &u1, 0.0)?;
            if zero != 0.0 {
                return Err(Error::Hypothesis(format!("g_{}(u, 0) = {zero}", j + 1)));
            }
            let a = op.layer(j, &u1, v1)?;
            let b = op.layer(j, &u1, v2)?;
            if (v1 - v2) * (a - b) < -1e-15 {
                return Err(Error::Hypothesis(format!("g_{} decreasing in v", j + 1)));
            }
            let mu = op.layer_mass()[j];
            if (a - b).abs() > mu * (v1 - v2).abs() * (1.0 + rel) + 1e-14 {
                return Err(Error::Hypothesis(format!(
                    "g_{} violates mu_j = {mu}",
                    j + 1
                )));
            }
            let c = op.layer(j, &u2, v1)?;
            let kappa = op.layer_param_lipschitz()[j];
            if (a - c).abs() > kappa * du * (1.0 + rel) + 1e-14 {
                return Err(Error::Hypothesis(format!(
                    "g_{} violates K_j = {kappa}",
                    j + 1
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::play::play_trajectory;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn preset(p: Preset) -> Arc<dyn DensityModel> {
        Arc::new(p.density())
    }

    fn scalar_u(division: &[f64], value: f64) -> ParamSignal {
        ParamSignal::constant(division.to_vec(), vec![value]).unwrap()
    }

    #[test]
    fn discretize_layer_masses() {
        let op = discretize(preset(Preset::Exp), 2, Some(2.0)).unwrap();
        assert_eq!(op.thresholds(), &[1.0, 2.0]);
        assert_abs_diff_eq!(op.layer_mass()[0], 0.632_120_6, epsilon = 1e-7);
        assert_abs_diff_eq!(op.layer_mass()[1], 0.232_544_2, epsilon = 1e-7);
        assert_abs_diff_eq!(
            op.rho(),
            (1.0 + op.layer_mass()[0]) * (1.0 + op.layer_mass()[1])
        );
    }

    #[test]
    fn zero_density_operator() {
        let op = discretize(preset(Preset::Zero), 8, None).unwrap();
        assert!(op.layer_mass().iter().all(|&m| m == 0.0));
        assert_eq!(op.rho(), 1.0);
        let q = StepSignal::new(vec![0.0, 1.0, 2.0], vec![0.4, -3.0, 2.0]).unwrap();
        let u = scalar_u(q.division(), 0.0);
        assert!(forward_eval(&op, &u, &q)
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == 0.0));
        assert_eq!(forward_apply(&op, &u, &q).unwrap(), q);
    }

    #[test]
    fn rho_bounded_by_exp_mass() {
        let e = std::f64::consts::E;
        for k in [1, 2, 7, 64, 500] {
            let op = discretize(preset(Preset::Exp), k, None).unwrap();
            assert!(op.rho() <= e);
            assert!(op.layer_mass().iter().sum::<f64>() <= op.mass());
        }
    }

    #[test]
    fn discretize_rejects_bad_arguments() {
        assert!(discretize(preset(Preset::Exp), 0, None).is_err());
        assert!(discretize(preset(Preset::Exp), 4, Some(0.0)).is_err());
        assert!(discretize(preset(Preset::Exp), 4, Some(f64::INFINITY)).is_err());
    }

    #[test]
    fn single_uniform_layer_is_the_play() {
        let op = discretize(preset(Preset::Uniform), 1, None).unwrap();
        assert_eq!(op.thresholds(), &[1.0]);
        let q = StepSignal::constant(vec![0.0, 1.0, 2.0], 2.0).unwrap();
        let u = scalar_u(q.division(), 0.0);
        let p = forward_eval(&op, &u, &q).unwrap();
        assert!(p.values().iter().all(|&v| v == 1.0));
        let w = forward_apply(&op, &u, &q).unwrap();
        assert!(w.values().iter().all(|&v| v == 3.0));

        let q = StepSignal::new(vec![0.0, 0.5, 1.0, 1.5], vec![2.0, -1.0, 0.3, 4.0]).unwrap();
        let xi = play_trajectory(&q, 1.0).unwrap();
        let p = forward_eval(&op, &scalar_u(q.division(), 0.0), &q).unwrap();
        assert_eq!(p.values(), xi.values());
    }

    #[test]
    fn vanishing_coefficient_gives_identity() {
        let g: LayerFn = Arc::new(|u: &[f64], v: f64| u[0] * v);
        let op = DiscretePreisach::from_layers(vec![1.0], vec![g], vec![0.0], vec![2.0]).unwrap();
        let q = StepSignal::new(vec![0.0, 1.0, 2.0], vec![3.0, -2.0, 0.5]).unwrap();
        let w = forward_apply(&op, &scalar_u(q.division(), 0.0), &q).unwrap();
        assert_eq!(w, q);
    }

    #[test]
    fn output_lives_on_merged_division() {
        let op = discretize(preset(Preset::Cauchy), 16, None).unwrap();
        let q = StepSignal::new(vec![0.0, 0.3, 1.0], vec![1.0, -1.0, 0.5]).unwrap();
        let u =
            ParamSignal::new(vec![0.0, 0.6, 1.0], vec![vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let p = forward_eval(&op, &u, &q).unwrap();
        assert_eq!(p.division(), &[0.0, 0.3, 0.6, 1.0]);
    }

    #[test]
    fn parameter_dimension_is_checked() {
        let op = discretize(preset(Preset::Exp), 4, None).unwrap();
        let q = StepSignal::constant(vec![0.0, 1.0], 1.0).unwrap();
        let u = ParamSignal::constant(vec![0.0, 1.0], vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            forward_eval(&op, &u, &q),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn refine_error_trivial_cases() {
        let m = preset(Preset::Exp);
        let q = StepSignal::new(vec![0.0, 1.0, 2.0], vec![1.5, -1.0, 0.2]).unwrap();
        let u = scalar_u(q.division(), 0.3);
        assert_eq!(refine_error(m.clone(), &u, &q, 8, 8).unwrap(), 0.0);
        let zero = StepSignal::constant(vec![0.0, 1.0], 0.0).unwrap();
        assert_eq!(
            refine_error(m.clone(), &scalar_u(zero.division(), 0.0), &zero, 4, 256).unwrap(),
            0.0
        );
        let e = refine_error(m, &u, &q, 4, 4096).unwrap();
        assert!(e <= 2.0 / 4.0 + 2.0 / 4096.0, "{e}");
        assert!(e > 0.0);
    }

    #[test]
    fn model_layers_satisfy_discrete_hypotheses() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for p in [Preset::Exp, Preset::Cauchy, Preset::Uniform] {
            let op = discretize(preset(p), 12, None).unwrap();
            check_layers(&op, &mut rng, 300, 1, 4.0, op.radius()).unwrap();
        }
    }

    #[test]
    fn check_layers_rejects_decreasing_layer() {
        let g: LayerFn = Arc::new(|_u: &[f64], v: f64| -v);
        let op = DiscretePreisach::from_layers(vec![1.0], vec![g], vec![1.0], vec![0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(check_layers(&op, &mut rng, 50, 1, 1.0, 1.0).is_err());
    }

    #[test]
    fn primitive_g_validates_threshold() {
        let m = Preset::Exp.density();
        assert!(primitive_g(&m, &[0.0], -1.0, 1.0).is_err());
        assert_eq!(primitive_g(&m, &[0.0], 1.0, 0.0).unwrap(), 0.0);
    }
}
