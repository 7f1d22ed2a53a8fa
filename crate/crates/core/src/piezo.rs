//! Thermo-piezoelectric self-similarity equation
//! `q + alpha(eps)/f(eps) * P(theta)[q] = E/f(eps)`.
//!
//! The strain coefficient `alpha/f` is absorbed into a two-parameter density
//! `psi((theta, eps), r, v) = alpha(eps)/f(eps) * psi(theta, r, v)`, and the
//! equation is solved by the generic inversion.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inverse::{inversion_radius, invert, InversionReport};
use crate::preisach::{discretize, forward_eval, DensityModel, ModelConfig};
use crate::signals::{merge_divisions, ParamSignal, StepSignal};

/// Scalar material function of the strain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaterialFn {
    Constant(f64),
    /// Polynomial coefficients in ascending order.
    Polynomial(Vec<f64>),
    Preset(MaterialPreset),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialPreset {
    Zero,
    One,
    /// `1 + eps^2`.
    Quadratic,
}

impl MaterialFn {
    pub fn eval(&self, eps: f64) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &a| acc * eps + a),
            Self::Preset(MaterialPreset::Zero) => 0.0,
            Self::Preset(MaterialPreset::One) => 1.0,
            Self::Preset(MaterialPreset::Quadratic) => 1.0 + eps * eps,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Constant(c) => *c == 0.0,
            Self::Polynomial(c) => c.iter().all(|&a| a == 0.0),
            Self::Preset(p) => *p == MaterialPreset::Zero,
        }
    }
}

/// JSON form of a piezo model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiezoConfig {
    pub f: MaterialFn,
    pub alpha: MaterialFn,
    pub f_min: f64,
    pub coeff_max: Option<f64>,
    pub coeff_lip: Option<f64>,
    pub density: ModelConfig,
    /// Strains in `[-eps_range, eps_range]` are sampled during validation.
    #[serde(default = "default_eps_range")]
    pub eps_range: f64,
}

fn default_eps_range() -> f64 {
    1.0
}

impl PiezoConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn build(&self) -> Result<PiezoModel> {
        let coeff_max = self
            .coeff_max
            .ok_or_else(|| Error::Config("missing declaration `coeff_max`".into()))?;
        let coeff_lip = self
            .coeff_lip
            .ok_or_else(|| Error::Config("missing Lipschitz declaration `coeff_lip`".into()))?;
        PiezoModel::new(
            self.f.clone(),
            self.alpha.clone(),
            self.f_min,
            coeff_max,
            coeff_lip,
            Arc::new(self.density.build()?),
            self.eps_range,
        )
    }
}

const VALIDATION_SAMPLES: usize = 2001;

/// Validated piezo model.
#[derive(Debug, Clone)]
pub struct PiezoModel {
    f: MaterialFn,
    alpha: MaterialFn,
    f_min: f64,
    coeff_max: f64,
    coeff_lip: f64,
    base: Arc<dyn DensityModel>,
}

impl PiezoModel {
    /// Checks `f >= f_min > 0`, `alpha >= 0`, `alpha/f <= coeff_max` and the
    /// Lipschitz declaration on a uniform grid over `[-eps_range, eps_range]`.
    pub fn new(
        f: MaterialFn,
        alpha: MaterialFn,
        f_min: f64,
        coeff_max: f64,
        coeff_lip: f64,
        base: Arc<dyn DensityModel>,
        eps_range: f64,
    ) -> Result<Self> {
        if base.param_dim() != 1 {
            return Err(Error::Config(format!(
                "base density must depend on temperature only, got L = {}",
                base.param_dim()
            )));
        }
        if !(f_min > 0.0 && f_min.is_finite()) {
            return Err(Error::Config(format!(
                "f_min must be positive, got {f_min}"
            )));
        }
        if !(coeff_max.is_finite() && coeff_lip >= 0.0 && coeff_lip.is_finite()) {
            return Err(Error::Config(format!(
                "coeff_max = {coeff_max} and coeff_lip = {coeff_lip} must be finite, coeff_lip >= 0"
            )));
        }
        if coeff_max <= 0.0 && !alpha.is_zero() {
            return Err(Error::Config(format!(
                "coeff_max must be positive for nonzero alpha, got {coeff_max}"
            )));
        }
        if !(eps_range >= 0.0 && eps_range.is_finite()) {
            return Err(Error::Config(format!(
                "eps_range must be nonnegative, got {eps_range}"
            )));
        }
        let model = Self {
            f,
            alpha,
            f_min,
            coeff_max: coeff_max.max(0.0),
            coeff_lip,
            base,
        };
        let h = 2.0 * eps_range / (VALIDATION_SAMPLES - 1) as f64;
        let mut prev: Option<(f64, f64)> = None;
        for i in 0..VALIDATION_SAMPLES {
            let eps = -eps_range + i as f64 * h;
            let c = model.coefficient(eps)?;
            if c > model.coeff_max * (1.0 + 1e-12) {
                return Err(Error::Hypothesis(format!(
                    "alpha/f = {c} exceeds coeff_max = {} at eps = {eps}",
                    model.coeff_max
                )));
            }
            if let Some((e0, c0)) = prev {
                let slope = (c - c0).abs() / (eps - e0);
                if slope > model.coeff_lip * (1.0 + 1e-6) + 1e-9 {
                    return Err(Error::Hypothesis(format!(
                        "alpha/f has slope {slope} > coeff_lip = {} near eps = {eps}",
                        model.coeff_lip
                    )));
                }
            }
            prev = Some((eps, c));
        }
        Ok(model)
    }

    /// `alpha(eps)/f(eps)`, checking `f >= f_min` and `alpha >= 0`.
    pub fn coefficient(&self, eps: f64) -> Result<f64> {
        let f = self.f.eval(eps);
        if !(f >= self.f_min) {
            return Err(Error::Hypothesis(format!(
                "f({eps}) = {f} is below f_min = {}",
                self.f_min
            )));
        }
        let a = self.alpha.eval(eps);
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::Hypothesis(format!("alpha({eps}) = {a} is negative")));
        }
        Ok(a / f)
    }

    pub fn f_min(&self) -> f64 {
        self.f_min
    }

    pub fn coeff_max(&self) -> f64 {
        self.coeff_max
    }

    pub fn coeff_lip(&self) -> f64 {
        self.coeff_lip
    }

    pub fn base(&self) -> &Arc<dyn DensityModel> {
        &self.base
    }

    pub fn f(&self) -> &MaterialFn {
        &self.f
    }

    pub fn alpha(&self) -> &MaterialFn {
        &self.alpha
    }
}

/// Density over `u = (theta, eps)` obtained by scaling the temperature
/// density with `alpha(eps)/f(eps)`.
#[derive(Debug, Clone)]
pub struct ComposedDensity {
    model: PiezoModel,
}

pub fn compose_density(model: &PiezoModel) -> ComposedDensity {
    ComposedDensity {
        model: model.clone(),
    }
}

impl ComposedDensity {
    /// Coefficient at `u = (theta, eps)`; outside the validated domain it is
    /// clamped to `[0, coeff_max]`.
    fn coef(&self, u: &[f64]) -> f64 {
        let m = &self.model;
        let f = m.f.eval(u[1]).max(m.f_min);
        (m.alpha.eval(u[1]).max(0.0) / f).min(m.coeff_max)
    }
}

impl DensityModel for ComposedDensity {
    fn param_dim(&self) -> usize {
        2
    }

    fn psi(&self, u: &[f64], r: f64, v: f64) -> f64 {
        self.coef(u) * self.model.base.psi(&u[..1], r, v)
    }

    fn mu(&self, r: f64) -> f64 {
        self.model.coeff_max * self.model.base.mu(r)
    }

    /// Product rule: `coeff_max K + coeff_lip psi_envelope`.
    fn kbound(&self, r: f64, v: f64) -> f64 {
        let b = &self.model.base;
        self.model.coeff_max * b.kbound(r, v) + self.model.coeff_lip * b.psi_envelope(r, v)
    }

    fn mass(&self) -> f64 {
        self.model.coeff_max * self.model.base.mass()
    }

    fn param_lipschitz(&self, v_range: f64) -> f64 {
        let b = &self.model.base;
        self.model.coeff_max * b.param_lipschitz(v_range)
            + self.model.coeff_lip * b.envelope_mass(v_range)
    }

    fn support_radius(&self) -> f64 {
        self.model.base.support_radius()
    }

    fn psi_envelope(&self, r: f64, v: f64) -> f64 {
        self.model.coeff_max * self.model.base.psi_envelope(r, v)
    }

    fn envelope_mass(&self, v_range: f64) -> f64 {
        self.model.coeff_max * self.model.base.envelope_mass(v_range)
    }

    fn envelope_layer_mass(&self, lo: f64, hi: f64, v_range: f64) -> Result<f64> {
        Ok(self.model.coeff_max * self.model.base.envelope_layer_mass(lo, hi, v_range)?)
    }

    fn primitive(&self, u: &[f64], r: f64, v: f64) -> Result<f64> {
        Ok(self.coef(u) * self.model.base.primitive(&u[..1], r, v)?)
    }

    fn layer(&self, u: &[f64], lo: f64, hi: f64, v: f64) -> Result<f64> {
        Ok(self.coef(u) * self.model.base.layer(&u[..1], lo, hi, v)?)
    }

    fn layer_mass(&self, lo: f64, hi: f64) -> Result<f64> {
        Ok(self.model.coeff_max * self.model.base.layer_mass(lo, hi)?)
    }

    fn kstar(&self, r: f64, v_range: f64) -> Result<f64> {
        let b = &self.model.base;
        let envelope = crate::quadrature::integrate(
            |v| b.psi_envelope(r, v),
            -v_range,
            v_range,
            crate::quadrature::DEFAULT_TOL,
        )?;
        Ok(self.model.coeff_max * b.kstar(r, v_range)? + self.model.coeff_lip * envelope)
    }

    fn layer_param_lipschitz(&self, lo: f64, hi: f64, v_range: f64) -> Result<f64> {
        let b = &self.model.base;
        Ok(
            self.model.coeff_max * b.layer_param_lipschitz(lo, hi, v_range)?
                + self.model.coeff_lip * b.envelope_layer_mass(lo, hi, v_range)?,
        )
    }
}

#[derive(Debug, Clone)]
pub struct PiezoSolution {
    pub q: StepSignal,
    /// `P(theta)[q]`.
    pub polarization: StepSignal,
    /// `E/f(eps)` on the merged division.
    pub w: StepSignal,
    /// `(theta, eps)` on the merged division.
    pub u: ParamSignal,
    pub report: InversionReport,
    /// Radius used for the threshold grid.
    pub radius: f64,
}

/// Solves the self-similarity equation at discretization level `k`.
///
/// The inversion runs at tolerance `tol * min(1, 1/f_min)`, so the residual is
/// at most `tol` and at most `tol/f_min`.
pub fn solve_pe5(
    model: &PiezoModel,
    e: &StepSignal,
    eps: &StepSignal,
    theta: &StepSignal,
    k: usize,
    tol: f64,
) -> Result<PiezoSolution> {
    solve_pe5_with_radius(model, e, eps, theta, k, tol, None)
}

/// [`solve_pe5`] on a fixed threshold grid of radius `radius`; by default the
/// radius is `e^M max |E/f(eps)|`. Comparing two solutions with the same
/// radius compares solutions of the same discrete operator.
pub fn solve_pe5_with_radius(
    model: &PiezoModel,
    e: &StepSignal,
    eps: &StepSignal,
    theta: &StepSignal,
    k: usize,
    tol: f64,
    radius: Option<f64>,
) -> Result<PiezoSolution> {
    let (_, e, eps) = merge_divisions(e, eps)?;
    let (division, e, theta) = merge_divisions(&e, theta)?;
    let eps = eps.resample(&division)?;
    let w_values = e
        .values()
        .iter()
        .zip(eps.values())
        .map(|(&en, &epsn)| {
            model.coefficient(epsn)?;
            Ok(en / model.f.eval(epsn))
        })
        .collect::<Result<Vec<_>>>()?;
    let w = StepSignal::new(division, w_values)?;
    let u = ParamSignal::from_components(&[&theta, &eps])?;

    let composed: Arc<dyn DensityModel> = Arc::new(compose_density(model));
    let radius = radius.unwrap_or_else(|| inversion_radius(composed.as_ref(), &[&w]));
    let op = discretize(composed, k, Some(radius))?;
    let report = invert(&op, &u, &w, tol * (1.0 / model.f_min).min(1.0))?;

    let base_op = discretize(model.base.clone(), k, Some(radius))?;
    let polarization = forward_eval(&base_op, &ParamSignal::from_scalar(&theta), &report.q)?;
    Ok(PiezoSolution {
        q: report.q.clone(),
        polarization,
        w,
        u,
        report,
        radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preisach::Preset;

    fn model(alpha: MaterialFn, f: MaterialFn, coeff_max: f64, coeff_lip: f64) -> PiezoModel {
        PiezoModel::new(
            f,
            alpha,
            1.0,
            coeff_max,
            coeff_lip,
            Arc::new(Preset::Exp.density()),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn zero_alpha_gives_zero_density() {
        let m = model(
            MaterialFn::Preset(MaterialPreset::Zero),
            MaterialFn::Constant(1.0),
            0.0,
            0.0,
        );
        let d = compose_density(&m);
        assert_eq!(d.mass(), 0.0);
        assert_eq!(d.psi(&[0.3, 0.5], 0.2, 0.1), 0.0);
        assert_eq!(d.param_lipschitz(2.0), 0.0);
    }

    #[test]
    fn constant_alpha_coefficient() {
        let m = model(
            MaterialFn::Constant(0.3),
            MaterialFn::Preset(MaterialPreset::Quadratic),
            0.3,
            0.3,
        );
        assert_eq!(m.coefficient(0.0).unwrap(), 0.3);
        assert!((m.coefficient(1.0).unwrap() - 0.15).abs() < 1e-15);
    }

    #[test]
    fn composed_mass_and_certificate() {
        let m = model(
            MaterialFn::Constant(0.1),
            MaterialFn::Constant(1.0),
            0.1,
            0.0,
        );
        let d = compose_density(&m);
        assert!((d.mass() - 0.1).abs() < 1e-15);
        assert!((d.mass().exp() - 1.105_170_9).abs() < 1e-7);
    }

    #[test]
    fn invalid_declarations_rejected() {
        let base: Arc<dyn DensityModel> = Arc::new(Preset::Exp.density());
        let alpha = MaterialFn::Constant(0.2);
        let one = MaterialFn::Constant(1.0);
        assert!(
            PiezoModel::new(one.clone(), alpha.clone(), 1.0, 0.0, 0.0, base.clone(), 1.0).is_err()
        );
        assert!(
            PiezoModel::new(one.clone(), alpha.clone(), 0.0, 0.2, 0.0, base.clone(), 1.0).is_err()
        );
        assert!(
            PiezoModel::new(one.clone(), alpha.clone(), 1.0, 0.1, 0.0, base.clone(), 1.0).is_err()
        );
        // alpha/f = 0.2 eps has slope 0.2
        let ramp = MaterialFn::Polynomial(vec![0.2, 0.2]);
        assert!(
            PiezoModel::new(one.clone(), ramp.clone(), 1.0, 0.4, 0.1, base.clone(), 1.0).is_err()
        );
        assert!(PiezoModel::new(one, ramp, 1.0, 0.4, 0.2, base, 1.0).is_ok());
        let cfg = r#"{"f": "one", "alpha": 0.1, "f_min": 1, "coeff_max": 0.1, "density": {"preset": "exp"}}"#;
        assert!(matches!(
            PiezoConfig::from_json(cfg).unwrap().build(),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn config_parsing() {
        let cfg = r#"{"f": [1, 0, 1], "alpha": "zero", "f_min": 1, "coeff_max": 0, "coeff_lip": 0,
                      "density": {"preset": "cauchy"}}"#;
        let m = PiezoConfig::from_json(cfg).unwrap().build().unwrap();
        assert_eq!(m.f().eval(2.0), 5.0);
    }

    #[test]
    fn zero_alpha_returns_scaled_field() {
        let m = model(
            MaterialFn::Preset(MaterialPreset::Zero),
            MaterialFn::Preset(MaterialPreset::Quadratic),
            0.0,
            0.0,
        );
        let e = StepSignal::new(vec![0.0, 0.3, 1.0], vec![1.0, -2.0, 0.5]).unwrap();
        let eps = StepSignal::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.5, 0.5]).unwrap();
        let theta = StepSignal::constant(vec![0.0, 1.0], 0.0).unwrap();
        let s = solve_pe5(&m, &e, &eps, &theta, 8, 1e-10).unwrap();
        for (t, &q) in s.q.division().iter().zip(s.q.values()) {
            let ev = eps.at(*t).unwrap();
            assert_eq!(q, e.at(*t).unwrap() / (1.0 + ev * ev));
        }
    }

    #[test]
    fn zero_field_gives_zero_solution() {
        let m = model(
            MaterialFn::Constant(0.1),
            MaterialFn::Constant(1.0),
            0.1,
            0.0,
        );
        let e = StepSignal::constant(vec![0.0, 0.5, 1.0], 0.0).unwrap();
        let s = solve_pe5(&m, &e, &e, &e, 16, 1e-10).unwrap();
        assert!(s.q.values().iter().all(|&q| q == 0.0));
        assert!(s.polarization.values().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn solution_satisfies_the_equation() {
        let m = model(
            MaterialFn::Constant(0.8),
            MaterialFn::Constant(1.0),
            0.8,
            0.0,
        );
        let e = StepSignal::new(vec![0.0, 0.5, 1.0], vec![0.0, 1.5, 1.5]).unwrap();
        let c = StepSignal::constant(vec![0.0, 1.0], 0.2).unwrap();
        let s = solve_pe5(&m, &e, &c, &c, 32, 1e-10).unwrap();
        let residual =
            s.q.values()
                .iter()
                .zip(s.polarization.values())
                .zip(s.w.values())
                .map(|((&q, &p), &w)| (q + 0.8 * p - w).abs())
                .fold(0.0, f64::max);
        assert!(residual <= 1e-10 + 1e-14, "{residual}");
    }

    #[test]
    fn reduction_to_generic_inversion() {
        let m = model(
            MaterialFn::Constant(0.5),
            MaterialFn::Preset(MaterialPreset::Quadratic),
            0.5,
            1.0,
        );
        let e = StepSignal::new(vec![0.0, 0.4, 0.8, 1.0], vec![0.5, 1.0, -0.5, 0.2]).unwrap();
        let eps = StepSignal::new(vec![0.0, 0.6, 1.0], vec![0.1, -0.3, 0.0]).unwrap();
        let theta = StepSignal::new(vec![0.0, 0.2, 1.0], vec![0.0, 1.0, 1.0]).unwrap();
        let s = solve_pe5(&m, &e, &eps, &theta, 16, 1e-10).unwrap();
        let op = discretize(Arc::new(compose_density(&m)), 16, Some(s.radius)).unwrap();
        assert_eq!(invert(&op, &s.u, &s.w, 1e-10).unwrap().q, s.q);
    }

    #[test]
    fn monotone_loading_gives_monotone_polarization() {
        let m = model(
            MaterialFn::Preset(MaterialPreset::Zero),
            MaterialFn::Constant(1.0),
            0.0,
            0.0,
        );
        let e = StepSignal::sample(|t| 2.0 * t, 1.0, 40).unwrap();
        let c = StepSignal::constant(vec![0.0, 1.0], 0.0).unwrap();
        let s = solve_pe5(&m, &e, &c, &c, 32, 1e-10).unwrap();
        assert!(s.polarization.values().windows(2).all(|p| p[1] >= p[0]));
        assert!(*s.polarization.values().last().unwrap() > 0.0);
    }
}
