//! Preisach densities `psi(u, r, v)` with their envelopes.
//!
//! A model supplies the density, the envelope `mu(r)` bounding it, the
//! envelope `K(r, v)` bounding its parameter gradient, and the totals `M` and
//! `M1`. Every integral has a quadrature fallback; models with closed forms
//! override the corresponding method.
//!
//! `K` is only required to be integrable over the `v`-range a computation can
//! actually visit. Plays driven by inputs with `sup |q| <= R` stay in
//! `[-R, R]`, so the `v`-integrals of `K` are taken over `[-v_range, v_range]`.

use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, try_integrate, DEFAULT_TOL};

pub trait DensityModel: Send + Sync {
    /// Dimension `L` of the parameter vector.
    fn param_dim(&self) -> usize;

    fn psi(&self, u: &[f64], r: f64, v: f64) -> f64;

    /// Envelope `mu(r) >= psi(u, r, v)`.
    fn mu(&self, r: f64) -> f64;

    /// Envelope `K(r, v) >= ||grad_u psi(u, r, v)||`.
    fn kbound(&self, r: f64, v: f64) -> f64;

    /// `M = ∫_0^∞ mu`.
    fn mass(&self) -> f64;

    /// `M1 = ∫_0^∞ ∫_{-V}^{V} K` for `V = v_range`.
    fn param_lipschitz(&self, v_range: f64) -> f64;

    /// Radius beyond which `mu` vanishes or is negligible.
    fn support_radius(&self) -> f64;

    /// Pointwise bound on `sup_u psi(u, r, v)`; defaults to `mu(r)`.
    fn psi_envelope(&self, r: f64, _v: f64) -> f64 {
        self.mu(r)
    }

    /// `∫_0^∞ ∫_{-V}^{V} psi_envelope`.
    fn envelope_mass(&self, v_range: f64) -> f64 {
        2.0 * v_range * self.mass()
    }

    /// `∫_lo^hi ∫_{-V}^{V} psi_envelope(r, v) dv dr`.
    fn envelope_layer_mass(&self, lo: f64, hi: f64, v_range: f64) -> Result<f64> {
        try_integrate(
            |r| integrate(|v| self.psi_envelope(r, v), -v_range, v_range, DEFAULT_TOL),
            lo,
            hi,
            DEFAULT_TOL,
        )
    }

    /// `g(u, r, v) = ∫_0^v psi(u, r, s) ds`.
    fn primitive(&self, u: &[f64], r: f64, v: f64) -> Result<f64> {
        integrate(|s| self.psi(u, r, s), 0.0, v, DEFAULT_TOL)
    }

    /// `∫_lo^hi g(u, r, v) dr`, the layer function of a discretized operator.
    fn layer(&self, u: &[f64], lo: f64, hi: f64, v: f64) -> Result<f64> {
        if v == 0.0 {
            return Ok(0.0);
        }
        try_integrate(|r| self.primitive(u, r, v), lo, hi, DEFAULT_TOL)
    }

    /// `∫_lo^hi mu`.
    fn layer_mass(&self, lo: f64, hi: f64) -> Result<f64> {
        integrate(|r| self.mu(r), lo, hi, DEFAULT_TOL)
    }

    /// `K*(r) = ∫_{-V}^{V} K(r, v) dv`.
    fn kstar(&self, r: f64, v_range: f64) -> Result<f64> {
        integrate(|v| self.kbound(r, v), -v_range, v_range, DEFAULT_TOL)
    }

    /// `∫_lo^hi K*(r) dr`.
    fn layer_param_lipschitz(&self, lo: f64, hi: f64, v_range: f64) -> Result<f64> {
        try_integrate(|r| self.kstar(r, v_range), lo, hi, DEFAULT_TOL)
    }
}

impl fmt::Debug for dyn DensityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityModel")
            .field("param_dim", &self.param_dim())
            .field("mass", &self.mass())
            .field("support_radius", &self.support_radius())
            .finish()
    }
}

/// Parameter coefficient `c(u)` with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coefficient {
    Constant {
        value: f64,
        #[serde(default = "default_dim")]
        dim: usize,
    },
    /// `clamp(offset + slope . u, 0, 1)`.
    Affine { offset: f64, slope: Vec<f64> },
    /// `low + (high - low) / (1 + exp(-slope . u))`.
    Logistic {
        low: f64,
        high: f64,
        slope: Vec<f64>,
    },
}

fn default_dim() -> usize {
    1
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl Coefficient {
    pub fn dim(&self) -> usize {
        match self {
            Coefficient::Constant { dim, .. } => *dim,
            Coefficient::Affine { slope, .. } | Coefficient::Logistic { slope, .. } => slope.len(),
        }
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        match self {
            Coefficient::Constant { value, .. } => *value,
            Coefficient::Affine { offset, slope } => (offset + dot(slope, u)).clamp(0.0, 1.0),
            Coefficient::Logistic { low, high, slope } => {
                low + (high - low) / (1.0 + (-dot(slope, u)).exp())
            }
        }
    }

    /// Lipschitz constant of `u -> c(u)` in the Euclidean norm.
    pub fn lipschitz(&self) -> f64 {
        match self {
            Coefficient::Constant { .. } => 0.0,
            Coefficient::Affine { slope, .. } => norm(slope),
            Coefficient::Logistic { low, high, slope } => 0.25 * (high - low) * norm(slope),
        }
    }

    pub fn max(&self) -> f64 {
        match self {
            Coefficient::Constant { value, .. } => *value,
            Coefficient::Affine { .. } => 1.0,
            Coefficient::Logistic { high, .. } => *high,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Coefficient::Constant { value, dim } => (0.0..=1.0).contains(value) && *dim >= 1,
            Coefficient::Affine { offset, slope } => {
                offset.is_finite() && !slope.is_empty() && slope.iter().all(|s| s.is_finite())
            }
            Coefficient::Logistic { low, high, slope } => {
                0.0 <= *low
                    && low <= high
                    && *high <= 1.0
                    && !slope.is_empty()
                    && slope.iter().all(|s| s.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid coefficient {self:?}")))
        }
    }
}

/// Threshold envelope `mu(r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Envelope {
    /// `scale * exp(-rate * r)`.
    Exponential {
        scale: f64,
        rate: f64,
    },
    /// `height` on `(0, width)`, zero beyond.
    Uniform {
        height: f64,
        width: f64,
    },
    Zero,
}

impl Envelope {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Envelope::Exponential { scale, rate } => scale * (-rate * r).exp(),
            Envelope::Uniform { height, width } => {
                if r < *width {
                    *height
                } else {
                    0.0
                }
            }
            Envelope::Zero => 0.0,
        }
    }

    /// `∫_lo^hi mu`, `0 <= lo <= hi`.
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        match self {
            Envelope::Exponential { scale, rate } => {
                scale / rate * ((-rate * lo).exp() - (-rate * hi).exp())
            }
            Envelope::Uniform { height, width } => {
                height * (hi.min(*width) - lo.min(*width)).max(0.0)
            }
            Envelope::Zero => 0.0,
        }
    }

    pub fn total(&self) -> f64 {
        match self {
            Envelope::Exponential { scale, rate } => scale / rate,
            Envelope::Uniform { height, width } => height * width,
            Envelope::Zero => 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Envelope::Exponential { scale, rate } => {
                *scale >= 0.0 && scale.is_finite() && *rate > 0.0 && rate.is_finite()
            }
            Envelope::Uniform { height, width } => {
                *height >= 0.0 && height.is_finite() && *width > 0.0 && width.is_finite()
            }
            Envelope::Zero => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid envelope {self:?}")))
        }
    }
}

/// Profile `phi(v)` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// `phi = 1`: layers are linear in the play output.
    Flat,
    /// `1 / (1 + (v / width)^2)`.
    Cauchy { width: f64 },
}

impl Profile {
    pub fn eval(&self, v: f64) -> f64 {
        match self {
            Profile::Flat => 1.0,
            Profile::Cauchy { width } => {
                let x = v / width;
                1.0 / (1.0 + x * x)
            }
        }
    }

    /// `Phi(v) = ∫_0^v phi`.
    pub fn primitive(&self, v: f64) -> f64 {
        match self {
            Profile::Flat => v,
            Profile::Cauchy { width } => width * (v / width).atan(),
        }
    }

    /// `∫_{-V}^{V} phi`.
    fn symmetric_mass(&self, v_range: f64) -> f64 {
        self.primitive(v_range) - self.primitive(-v_range)
    }

    fn validate(&self) -> Result<()> {
        match self {
            Profile::Cauchy { width } if !(*width > 0.0 && width.is_finite()) => {
                Err(Error::Config(format!("invalid profile {self:?}")))
            }
            _ => Ok(()),
        }
    }
}

/// `psi(u, r, v) = c(u) * mu(r) * phi(v)`; every integral has a closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableDensity {
    pub coefficient: Coefficient,
    pub envelope: Envelope,
    pub profile: Profile,
    pub radius: f64,
}

impl SeparableDensity {
    pub fn new(
        coefficient: Coefficient,
        envelope: Envelope,
        profile: Profile,
        radius: f64,
    ) -> Result<Self> {
        coefficient.validate()?;
        envelope.validate()?;
        profile.validate()?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Config(format!(
                "support radius must be positive, got {radius}"
            )));
        }
        Ok(Self {
            coefficient,
            envelope,
            profile,
            radius,
        })
    }
}

impl DensityModel for SeparableDensity {
    fn param_dim(&self) -> usize {
        self.coefficient.dim()
    }

    fn psi(&self, u: &[f64], r: f64, v: f64) -> f64 {
        self.coefficient.eval(u) * self.envelope.eval(r) * self.profile.eval(v)
    }

    fn mu(&self, r: f64) -> f64 {
        self.envelope.eval(r)
    }

    fn kbound(&self, r: f64, v: f64) -> f64 {
        self.coefficient.lipschitz() * self.envelope.eval(r) * self.profile.eval(v)
    }

    fn mass(&self) -> f64 {
        self.envelope.total()
    }

    fn param_lipschitz(&self, v_range: f64) -> f64 {
        self.coefficient.lipschitz() * self.envelope.total() * self.profile.symmetric_mass(v_range)
    }

    fn support_radius(&self) -> f64 {
        self.radius
    }

    fn psi_envelope(&self, r: f64, v: f64) -> f64 {
        self.coefficient.max() * self.envelope.eval(r) * self.profile.eval(v)
    }

    fn envelope_mass(&self, v_range: f64) -> f64 {
        self.coefficient.max() * self.envelope.total() * self.profile.symmetric_mass(v_range)
    }

    fn envelope_layer_mass(&self, lo: f64, hi: f64, v_range: f64) -> Result<f64> {
        Ok(self.coefficient.max()
            * self.envelope.integral(lo, hi)
            * self.profile.symmetric_mass(v_range))
    }

    fn primitive(&self, u: &[f64], r: f64, v: f64) -> Result<f64> {
        Ok(self.coefficient.eval(u) * self.envelope.eval(r) * self.profile.primitive(v))
    }

    fn layer(&self, u: &[f64], lo: f64, hi: f64, v: f64) -> Result<f64> {
        Ok(self.coefficient.eval(u) * self.envelope.integral(lo, hi) * self.profile.primitive(v))
    }

    fn layer_mass(&self, lo: f64, hi: f64) -> Result<f64> {
        Ok(self.envelope.integral(lo, hi))
    }

    fn kstar(&self, r: f64, v_range: f64) -> Result<f64> {
        Ok(self.coefficient.lipschitz()
            * self.envelope.eval(r)
            * self.profile.symmetric_mass(v_range))
    }

    fn layer_param_lipschitz(&self, lo: f64, hi: f64, v_range: f64) -> Result<f64> {
        Ok(self.coefficient.lipschitz()
            * self.envelope.integral(lo, hi)
            * self.profile.symmetric_mass(v_range))
    }
}

type PsiFn = Box<dyn Fn(&[f64], f64, f64) -> f64 + Send + Sync>;
type ScalarFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;
type KFn = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Density given by arbitrary closures with declared constants. Integrals
/// fall back to quadrature unless an analytic primitive is attached.
pub struct FnDensity {
    dim: usize,
    psi: PsiFn,
    mu: ScalarFn,
    kbound: KFn,
    primitive: Option<PsiFn>,
    mass: f64,
    param_lipschitz: f64,
    radius: f64,
}

impl FnDensity {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dim: usize,
        psi: impl Fn(&[f64], f64, f64) -> f64 + Send + Sync + 'static,
        mu: impl Fn(f64) -> f64 + Send + Sync + 'static,
        kbound: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        mass: f64,
        param_lipschitz: f64,
        radius: f64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("parameter dimension must be >= 1".into()));
        }
        if !(mass >= 0.0
            && mass.is_finite()
            && param_lipschitz >= 0.0
            && param_lipschitz.is_finite())
        {
            return Err(Error::Config(format!(
                "M = {mass} and M1 = {param_lipschitz} must be finite and nonnegative"
            )));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Config(format!(
                "support radius must be positive, got {radius}"
            )));
        }
        Ok(Self {
            dim,
            psi: Box::new(psi),
            mu: Box::new(mu),
            kbound: Box::new(kbound),
            primitive: None,
            mass,
            param_lipschitz,
            radius,
        })
    }

    pub fn with_primitive(
        mut self,
        g: impl Fn(&[f64], f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.primitive = Some(Box::new(g));
        self
    }
}

impl DensityModel for FnDensity {
    fn param_dim(&self) -> usize {
        self.dim
    }
    fn psi(&self, u: &[f64], r: f64, v: f64) -> f64 {
        (self.psi)(u, r, v)
    }
    fn mu(&self, r: f64) -> f64 {
        (self.mu)(r)
    }
    fn kbound(&self, r: f64, v: f64) -> f64 {
        (self.kbound)(r, v)
    }
    fn mass(&self) -> f64 {
        self.mass
    }
    fn param_lipschitz(&self, _v_range: f64) -> f64 {
        self.param_lipschitz
    }
    fn support_radius(&self) -> f64 {
        self.radius
    }
    fn primitive(&self, u: &[f64], r: f64, v: f64) -> Result<f64> {
        match &self.primitive {
            Some(g) => Ok(g(u, r, v)),
            None => integrate(|s| self.psi(u, r, s), 0.0, v, DEFAULT_TOL),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// `mu(r) = e^{-r}`, flat profile, logistic coefficient in `[0.5, 1]`, `R = 2`.
    Exp,
    /// As `Exp` with the Cauchy profile `1 / (1 + v^2)`.
    Cauchy,
    /// `mu = 1` on `(0, 1)`, flat profile, unit coefficient, `R = 1`.
    Uniform,
    Zero,
}

impl Preset {
    pub fn density(self) -> SeparableDensity {
        let logistic = Coefficient::Logistic {
            low: 0.5,
            high: 1.0,
            slope: vec![1.0],
        };
        let unit_exp = Envelope::Exponential {
            scale: 1.0,
            rate: 1.0,
        };
        let (coefficient, envelope, profile, radius) = match self {
            Preset::Exp => (logistic, unit_exp, Profile::Flat, 2.0),
            Preset::Cauchy => (logistic, unit_exp, Profile::Cauchy { width: 1.0 }, 2.0),
            Preset::Uniform => (
                Coefficient::Constant { value: 1.0, dim: 1 },
                Envelope::Uniform {
                    height: 1.0,
                    width: 1.0,
                },
                Profile::Flat,
                1.0,
            ),
            Preset::Zero => (
                Coefficient::Constant { value: 1.0, dim: 1 },
                Envelope::Zero,
                Profile::Flat,
                1.0,
            ),
        };
        SeparableDensity {
            coefficient,
            envelope,
            profile,
            radius,
        }
    }
}

/// JSON model configuration: either `{"preset": "exp", "R": 2.0}` (radius
/// optional) or `{"family": "separable", "c": {..}, "mu": {..}, "phi": {..}, "R": ..}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelConfig {
    Preset {
        preset: Preset,
        #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
    },
    Family(FamilyConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilyConfig {
    Separable {
        c: Coefficient,
        mu: Envelope,
        phi: Profile,
        #[serde(rename = "R")]
        radius: f64,
    },
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn build(&self) -> Result<SeparableDensity> {
        match self {
            ModelConfig::Preset { preset, radius } => {
                let d = preset.density();
                SeparableDensity::new(
                    d.coefficient,
                    d.envelope,
                    d.profile,
                    radius.unwrap_or(d.radius),
                )
            }
            ModelConfig::Family(FamilyConfig::Separable { c, mu, phi, radius }) => {
                SeparableDensity::new(c.clone(), mu.clone(), phi.clone(), *radius)
            }
        }
    }
}

/// Spot-checks the density hypotheses at random points: `0 <= psi <= mu`,
/// `psi <= psi_envelope`, and `||grad_u psi|| <= K` by central differences,
/// with `u` in `[-u_scale, u_scale]^L`, `r` in `(0, R]`, `v` in `[-v_range, v_range]`.
pub fn check_hypotheses<R: Rng + ?Sized>(
    model: &dyn DensityModel,
    rng: &mut R,
    samples: usize,
    u_scale: f64,
    v_range: f64,
) -> Result<()> {
    let m = model.mass();
    let m1 = model.param_lipschitz(v_range);
    if !(m >= 0.0 && m.is_finite() && m1 >= 0.0 && m1.is_finite()) {
        return Err(Error::Hypothesis(format!(
            "M = {m}, M1 = {m1} must be finite and nonnegative"
        )));
    }
    let dim = model.param_dim();
    let radius = model.support_radius();
    let step = 1e-6;
    for _ in 0..samples {
        let u: Vec<f64> = (0..dim)
            .map(|_| rng.gen_range(-u_scale..=u_scale))
            .collect();
        let r = rng.gen_range(0.0..radius) + f64::EPSILON;
        let v = rng.gen_range(-v_range..=v_range);
        let psi = model.psi(&u, r, v);
        let mu = model.mu(r);
        if psi < 0.0 || psi > mu * (1.0 + 1e-12) + 1e-15 {
            return Err(Error::Hypothesis(format!(
                "psi({u:?}, {r}, {v}) = {psi} outside [0, mu(r) = {mu}]"
            )));
        }
        let env = model.psi_envelope(r, v);
        if psi > env * (1.0 + 1e-12) + 1e-15 {
            return Err(Error::Hypothesis(format!(
                "psi({u:?}, {r}, {v}) = {psi} exceeds its envelope {env}"
            )));
        }
        let mut grad2 = 0.0;
        let mut probe = u.clone();
        for i in 0..dim {
            probe[i] = u[i] + step;
            let up = model.psi(&probe, r, v);
            probe[i] = u[i] - step;
            let down = model.psi(&probe, r, v);
            probe[i] = u[i];
            let d = (up - down) / (2.0 * step);
            grad2 += d * d;
        }
        let grad = grad2.sqrt();
        let k = model.kbound(r, v);
        if grad > k * (1.0 + 1e-5) + 1e-8 {
            return Err(Error::Hypothesis(format!(
                "|grad_u psi({u:?}, {r}, {v})| = {grad} exceeds K = {k}"
            )));
        }
    }
    Ok(())
}
