//! Sensitivity Φ(u, v) and production h(u), their structural conditions,
//! and the model parameter set.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Φ and its partial derivatives up to second order at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhiEval {
    pub value: f64,
    pub du: f64,
    pub dv: f64,
    pub duu: f64,
    pub duv: f64,
    pub dvv: f64,
}

/// h and its derivatives up to third order at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HEval {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

/// Caller-supplied kinetic functions. Derivatives are not differentiated
/// automatically; they are checked once against central differences when a
/// [`KineticsSpec`] is built.
pub trait KineticFunctions: Send + Sync {
    fn phi(&self, u: f64, v: f64) -> PhiEval;
    fn h(&self, u: f64) -> HEval;
}

#[derive(Clone)]
pub enum Family {
    /// Φ(u,v) = u, h(u) = βu.
    Linear {
        beta: f64,
    },
    Custom(Arc<dyn KineticFunctions>),
}

impl fmt::Debug for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Linear { beta } => f.debug_struct("Linear").field("beta", beta).finish(),
            Family::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Kinetics together with the constants C1, C2 of the growth bounds
/// Φ ≤ C1·u and h ≤ C2·u.
#[derive(Debug, Clone)]
pub struct KineticsSpec {
    family: Family,
    bound_c1: f64,
    bound_c2: f64,
    /// Multiplier applied to h (nondimensionalization divides h by α).
    h_scale: f64,
}

const FD_STEP: f64 = 1e-6;
const FD_RTOL: f64 = 1e-4;
const FD_PROBES: [f64; 3] = [0.3, 1.0, 2.5];

impl KineticsSpec {
    pub fn linear(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "beta",
                value: beta,
                reason: "must be positive",
            });
        }
        Ok(Self {
            family: Family::Linear { beta },
            bound_c1: 1.0,
            bound_c2: beta,
            h_scale: 1.0,
        })
    }

    /// Wraps opaque evaluators. Fails if any supplied derivative disagrees
    /// with a central difference of the next-lower derivative.
    pub fn custom(funcs: Arc<dyn KineticFunctions>, bound_c1: f64, bound_c2: f64) -> Result<Self> {
        for (name, c) in [("bound_c1", bound_c1), ("bound_c2", bound_c2)] {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    value: c,
                    reason: "must be positive",
                });
            }
        }
        check_derivatives(funcs.as_ref())?;
        Ok(Self {
            family: Family::Custom(funcs),
            bound_c1,
            bound_c2,
            h_scale: 1.0,
        })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn bound_c1(&self) -> f64 {
        self.bound_c1
    }

    pub fn bound_c2(&self) -> f64 {
        self.bound_c2
    }

    /// β when the kinetics are the linear family (after any rescaling of h).
    pub fn linear_beta(&self) -> Option<f64> {
        match self.family {
            Family::Linear { beta } => Some(beta * self.h_scale),
            Family::Custom(_) => None,
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.family, Family::Linear { .. })
    }

    #[inline]
    pub fn phi(&self, u: f64, v: f64) -> PhiEval {
        match &self.family {
            Family::Linear { .. } => PhiEval {
                value: u,
                du: 1.0,
                ..PhiEval::default()
            },
            Family::Custom(f) => f.phi(u, v),
        }
    }

    #[inline]
    pub fn h(&self, u: f64) -> HEval {
        let raw = match &self.family {
            Family::Linear { beta } => HEval {
                value: beta * u,
                d1: *beta,
                d2: 0.0,
                d3: 0.0,
            },
            Family::Custom(f) => f.h(u),
        };
        if self.h_scale == 1.0 {
            raw
        } else {
            HEval {
                value: raw.value * self.h_scale,
                d1: raw.d1 * self.h_scale,
                d2: raw.d2 * self.h_scale,
                d3: raw.d3 * self.h_scale,
            }
        }
    }

    /// Same Φ with h multiplied by `factor`.
    pub fn with_scaled_production(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.h_scale *= factor;
        out.bound_c2 *= factor;
        if let Family::Linear { beta } = out.family {
            out.family = Family::Linear {
                beta: beta * out.h_scale,
            };
            out.h_scale = 1.0;
        }
        out
    }
}

fn mismatch(a: f64, fd: f64) -> bool {
    let scale = a.abs().max(fd.abs()).max(1.0);
    !((a - fd).abs() <= FD_RTOL * scale)
}

fn check_derivatives(f: &dyn KineticFunctions) -> Result<()> {
    let d = FD_STEP;
    for &u in &FD_PROBES {
        for &v in &FD_PROBES {
            let p = f.phi(u, v);
            let (pu_p, pu_m) = (f.phi(u + d, v), f.phi(u - d, v));
            let (pv_p, pv_m) = (f.phi(u, v + d), f.phi(u, v - d));
            let checks = [
                ("Phi_u", p.du, (pu_p.value - pu_m.value) / (2.0 * d)),
                ("Phi_v", p.dv, (pv_p.value - pv_m.value) / (2.0 * d)),
                ("Phi_uu", p.duu, (pu_p.du - pu_m.du) / (2.0 * d)),
                ("Phi_uv", p.duv, (pv_p.du - pv_m.du) / (2.0 * d)),
                ("Phi_vv", p.dvv, (pv_p.dv - pv_m.dv) / (2.0 * d)),
            ];
            for (which, a, fd) in checks {
                if mismatch(a, fd) {
                    return Err(Error::DerivativeMismatch { which, u, v });
                }
            }
        }
        let h = f.h(u);
        let (hp, hm) = (f.h(u + d), f.h(u - d));
        let checks = [
            ("h'", h.d1, (hp.value - hm.value) / (2.0 * d)),
            ("h''", h.d2, (hp.d1 - hm.d1) / (2.0 * d)),
            ("h'''", h.d3, (hp.d2 - hm.d2) / (2.0 * d)),
        ];
        for (which, a, fd) in checks {
            if mismatch(a, fd) {
                return Err(Error::DerivativeMismatch { which, u, v: 0.0 });
            }
        }
    }
    Ok(())
}

/// Φ(u,v) = u·e^{−γv}, h(u) = βu/(1 + κu). With γ = κ = 0 this reduces to
/// the linear family; the CLI exposes it as `kinetics = custom`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpSaturating {
    pub gamma: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl KineticFunctions for ExpSaturating {
    fn phi(&self, u: f64, v: f64) -> PhiEval {
        let g = self.gamma;
        let e = (-g * v).exp();
        PhiEval {
            value: u * e,
            du: e,
            dv: -g * u * e,
            duu: 0.0,
            duv: -g * e,
            dvv: g * g * u * e,
        }
    }

    fn h(&self, u: f64) -> HEval {
        let (b, k) = (self.beta, self.kappa);
        let q = 1.0 + k * u;
        HEval {
            value: b * u / q,
            d1: b / (q * q),
            d2: -2.0 * b * k / (q * q * q),
            d3: 6.0 * b * k * k / (q * q * q * q),
        }
    }
}

impl ExpSaturating {
    /// Growth-bound constants valid on u, v ≥ 0.
    pub fn bounds(&self) -> (f64, f64) {
        (1.0, self.beta)
    }

    pub fn into_spec(self) -> Result<KineticsSpec> {
        let (c1, c2) = self.bounds();
        KineticsSpec::custom(Arc::new(self), c1, c2)
    }
}

/// Which of the four structural hypotheses a check refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    /// Φ(0,0) = 0, Φ ≥ 0, Φ_v ≤ 0.
    SensitivitySign,
    /// Φ ≤ C1·u.
    SensitivityBound,
    /// h(0) = 0, h' ≥ 0.
    ProductionSign,
    /// h ≤ C2·u.
    ProductionBound,
}

impl Condition {
    pub fn label(self) -> &'static str {
        match self {
            Condition::SensitivitySign => "sensitivity sign: Phi(0,0)=0, Phi>=0, Phi_v<=0",
            Condition::SensitivityBound => "sensitivity bound: Phi<=C1*u",
            Condition::ProductionSign => "production sign: h(0)=0, h'>=0",
            Condition::ProductionBound => "production bound: h<=C2*u",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionCheck {
    pub condition: Condition,
    pub passed: bool,
    /// First lattice point where the condition failed.
    pub witness: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub checks: Vec<ConditionCheck>,
    pub bound_c1: f64,
    pub bound_c2: f64,
    pub samples: usize,
}

impl ConditionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, condition: Condition) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.condition == condition)
    }
}

pub const DEFAULT_CONDITION_SAMPLES: usize = 101;

/// Samples the structural conditions on a `samples × samples` lattice of
/// [0, u_max] × [0, v_max]. A failed condition is reported, not returned as
/// an error.
pub fn validate_conditions(
    spec: &KineticsSpec,
    u_max: f64,
    v_max: f64,
    samples: usize,
) -> Result<ConditionReport> {
    if !(u_max > 0.0) || !(v_max > 0.0) {
        return Err(Error::Domain(
            "sampling box must have positive extent".into(),
        ));
    }
    if samples < 2 {
        return Err(Error::Domain("need at least two samples per axis".into()));
    }
    // tolerance for the sign tests, relative to the function scale
    let slack = 1e-12;
    let mut witness: [Option<(f64, f64)>; 4] = [None; 4];
    let mut note = |slot: usize, u: f64, v: f64| {
        if witness[slot].is_none() {
            witness[slot] = Some((u, v));
        }
    };

    let origin = spec.phi(0.0, 0.0);
    if origin.value.abs() > slack {
        note(0, 0.0, 0.0);
    }
    if spec.h(0.0).value.abs() > slack {
        note(2, 0.0, 0.0);
    }

    let step_u = u_max / (samples - 1) as f64;
    let step_v = v_max / (samples - 1) as f64;
    for i in 0..samples {
        let u = i as f64 * step_u;
        let h = spec.h(u);
        let hs = slack * (1.0 + h.value.abs());
        if h.d1 < -hs {
            note(2, u, 0.0);
        }
        if h.value > spec.bound_c2 * u + hs {
            note(3, u, 0.0);
        }
        for j in 0..samples {
            let v = j as f64 * step_v;
            let p = spec.phi(u, v);
            let ps = slack * (1.0 + p.value.abs());
            if p.value < -ps || p.dv > ps {
                note(0, u, v);
            }
            if p.value > spec.bound_c1 * u + ps {
                note(1, u, v);
            }
        }
    }

    let conds = [
        Condition::SensitivitySign,
        Condition::SensitivityBound,
        Condition::ProductionSign,
        Condition::ProductionBound,
    ];
    let checks = conds
        .iter()
        .zip(witness.iter())
        .map(|(&condition, w)| ConditionCheck {
            condition,
            passed: w.is_none(),
            witness: *w,
        })
        .collect();
    Ok(ConditionReport {
        checks,
        bound_c1: spec.bound_c1,
        bound_c2: spec.bound_c2,
        samples,
    })
}

/// Parameters of the stationary problem in nondimensional form.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub d1: f64,
    pub d2: f64,
    pub chi: f64,
    pub ubar: f64,
    pub length: f64,
    pub kinetics: KineticsSpec,
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be positive",
        })
    }
}

impl ModelParams {
    pub fn new(
        d1: f64,
        d2: f64,
        chi: f64,
        ubar: f64,
        length: f64,
        kinetics: KineticsSpec,
    ) -> Result<Self> {
        positive("D1", d1)?;
        positive("D2", d2)?;
        positive("ubar", ubar)?;
        positive("L", length)?;
        if !(chi >= 0.0 && chi.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "chi",
                value: chi,
                reason: "must be nonnegative",
            });
        }
        Ok(Self {
            d1,
            d2,
            chi,
            ubar,
            length,
            kinetics,
        })
    }

    /// Convenience constructor for Φ = u, h = βu.
    pub fn linear(d1: f64, d2: f64, chi: f64, ubar: f64, beta: f64, length: f64) -> Result<Self> {
        Self::new(d1, d2, chi, ubar, length, KineticsSpec::linear(beta)?)
    }

    /// v̄ = h(ū); derived on every call, never stored.
    pub fn vbar(&self) -> f64 {
        self.kinetics.h(self.ubar).value
    }

    pub fn with_chi(&self, chi: f64) -> Self {
        let mut p = self.clone();
        p.chi = chi;
        p
    }

    pub fn with_d1(&self, d1: f64) -> Self {
        let mut p = self.clone();
        p.d1 = d1;
        p
    }

    pub fn with_d2(&self, d2: f64) -> Self {
        let mut p = self.clone();
        p.d2 = d2;
        p
    }
}

/// Raw (dimensional) coefficients of the time-dependent system
/// `u_t = (D1 u_x − χΦ v_x)_x + u(θ − μu)`, `v_t = D2 v_xx − αv + h(u)`.
#[derive(Debug, Clone)]
pub struct RawParams {
    pub d1: f64,
    pub chi: f64,
    pub d2: f64,
    pub theta: f64,
    pub mu: f64,
    pub alpha: f64,
    pub length: f64,
    pub kinetics: KineticsSpec,
}

/// D1/μ, χ/μ, D2/α, h/α and ū = θ/μ.
pub fn nondimensionalize(raw: &RawParams) -> Result<ModelParams> {
    for (name, value) in [("theta", raw.theta), ("mu", raw.mu), ("alpha", raw.alpha)] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::Domain(alloc::format!(
                "{name} must be positive, got {value}"
            )));
        }
    }
    let kinetics = if raw.alpha == 1.0 {
        raw.kinetics.clone()
    } else {
        raw.kinetics.with_scaled_production(1.0 / raw.alpha)
    };
    ModelParams::new(
        raw.d1 / raw.mu,
        raw.d2 / raw.alpha,
        raw.chi / raw.mu,
        raw.theta / raw.mu,
        raw.length,
        kinetics,
    )
}
