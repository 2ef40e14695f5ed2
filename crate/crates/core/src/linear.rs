//! Linearization of the system at the positive constant equilibrium:
//! per-mode stability matrices, growth rates, bifurcation values and the
//! simplicity (non-resonance) condition.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::grid::{Grid, StateField};
use crate::kinetics::ModelParams;

/// Relative tolerance for comparing bifurcation values and for the
/// simplicity condition.
pub const REL_TOL: f64 = 1e-9;

pub fn positive_equilibrium(params: &ModelParams) -> (f64, f64) {
    (params.ubar, params.vbar())
}

/// The trivial state (0, 0). It is always a solution but is linearly
/// unstable (growth rate ū in the constant mode) and no nonconstant branch
/// bifurcates from it, so it is exposed for reference only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrivialEquilibrium {
    pub u: f64,
    pub v: f64,
    pub unstable: bool,
    pub bifurcation_base: bool,
}

pub fn trivial_equilibrium() -> TrivialEquilibrium {
    TrivialEquilibrium {
        u: 0.0,
        v: 0.0,
        unstable: true,
        bifurcation_base: false,
    }
}

/// Continuum Neumann eigenvalue (kπ/L)².
pub fn wave_eigenvalue(k: u32, length: f64) -> f64 {
    let w = k as f64 * PI / length;
    w * w
}

struct Slopes {
    phi: f64,
    hp: f64,
}

fn slopes(params: &ModelParams) -> Slopes {
    let vbar = params.vbar();
    Slopes {
        phi: params.kinetics.phi(params.ubar, vbar).value,
        hp: params.kinetics.h(params.ubar).d1,
    }
}

fn nonzero_mode(k: u32) -> Result<()> {
    if k == 0 {
        Err(Error::ZeroMode)
    } else {
        Ok(())
    }
}

/// H_k = [[−D1Λ − ū, χΦΛ], [h', −D2Λ − 1]] with Λ = (kπ/L)².
pub fn stability_matrix(params: &ModelParams, k: u32) -> Result<[[f64; 2]; 2]> {
    nonzero_mode(k)?;
    let lam = wave_eigenvalue(k, params.length);
    let s = slopes(params);
    Ok([
        [-params.d1 * lam - params.ubar, params.chi * s.phi * lam],
        [s.hp, -params.d2 * lam - 1.0],
    ])
}

/// Roots of λ² + Tλ + D, ordered so that Re λ₊ ≥ Re λ₋.
pub fn quadratic_roots(trace: f64, det: f64) -> (Complex64, Complex64) {
    // λ² + Tλ + D with T = −tr(H), D = det(H)
    let disc = trace * trace - 4.0 * det;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        // avoid cancellation in the root of smaller magnitude
        let big = -0.5 * (trace + trace.signum() * sq);
        let small = if big != 0.0 { det / big } else { 0.0 };
        let (a, b) = if small >= big {
            (small, big)
        } else {
            (big, small)
        };
        (Complex64::new(a, 0.0), Complex64::new(b, 0.0))
    } else {
        let im = 0.5 * (-disc).sqrt();
        let re = -0.5 * trace;
        (Complex64::new(re, im), Complex64::new(re, -im))
    }
}

/// T = (D1 + D2)Λ + ū + 1 (always positive).
pub fn trace_coefficient(params: &ModelParams, k: u32) -> Result<f64> {
    nonzero_mode(k)?;
    let lam = wave_eigenvalue(k, params.length);
    Ok((params.d1 + params.d2) * lam + params.ubar + 1.0)
}

/// The two eigenvalues of H_k.
pub fn growth_rates(params: &ModelParams, k: u32) -> Result<(Complex64, Complex64)> {
    let t = trace_coefficient(params, k)?;
    let d = DetCoefficients::new(params, k)?.at(params.chi);
    Ok(quadratic_roots(t, d))
}

/// det H_k as an affine function of χ: D(χ) = `constant` − `slope`·χ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetCoefficients {
    pub constant: f64,
    pub slope: f64,
}

impl DetCoefficients {
    pub fn new(params: &ModelParams, k: u32) -> Result<Self> {
        nonzero_mode(k)?;
        let lam = wave_eigenvalue(k, params.length);
        let s = slopes(params);
        Ok(Self {
            constant: (params.d1 * lam + params.ubar) * (params.d2 * lam + 1.0),
            slope: s.phi * lam * s.hp,
        })
    }

    pub fn at(&self, chi: f64) -> f64 {
        self.constant - self.slope * chi
    }
}

/// χ_k = (D1Λ + ū)(D2Λ + 1) / (Φ(ū, v̄) Λ h'(ū)).
pub fn bifurcation_value(params: &ModelParams, k: u32) -> Result<f64> {
    nonzero_mode(k)?;
    let s = slopes(params);
    let prod = s.phi * s.hp;
    if prod == 0.0 || !prod.is_finite() {
        return Err(Error::DegenerateKinetics(prod));
    }
    let d = DetCoefficients::new(params, k)?;
    Ok(d.constant / d.slope)
}

/// Q_k = (D2Λ + 1)/h'(ū), the u/v amplitude ratio of the critical mode.
pub fn amplitude_ratio(params: &ModelParams, k: u32) -> Result<f64> {
    nonzero_mode(k)?;
    let hp = slopes(params).hp;
    if hp == 0.0 {
        return Err(Error::DegenerateKinetics(0.0));
    }
    Ok((params.d2 * wave_eigenvalue(k, params.length) + 1.0) / hp)
}

/// Smallest k_max that is guaranteed to contain the minimizer of χ_k.
pub fn k_max_floor(params: &ModelParams) -> u32 {
    let r = (params.ubar / (params.d1 * params.d2)).powf(0.25);
    (params.length / PI * r).ceil() as u32 + 2
}

/// χ₀ = min_k χ_k over 1..=max(k_max, floor) and the (smallest) minimizer.
pub fn instability_threshold(params: &ModelParams, k_max: u32) -> Result<(f64, u32)> {
    let k_max = k_max.max(k_max_floor(params)).max(1);
    let mut best = (f64::INFINITY, 0u32);
    for k in 1..=k_max {
        let chi = bifurcation_value(params, k)?;
        // strictly smaller beyond the tie band, so ties keep the smaller k
        if chi < best.0 && (best.0 - chi) > REL_TOL * chi.abs() {
            best = (chi, k);
        }
    }
    Ok(best)
}

/// Outcome of the non-resonance test ū ≠ j²k²D1D2(π/L)⁴, j ≠ k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Simplicity {
    pub simple: bool,
    /// First j for which the relation holds within tolerance.
    pub offending_j: Option<u32>,
    /// The weaker reading ū ≠ j²D1D2(π/L)⁴ for j ≥ 2 (no k² factor).
    pub global_branch_hypothesis: bool,
    /// True when the two readings give different answers.
    pub readings_disagree: bool,
}

fn resonant(ubar: f64, value: f64) -> bool {
    (ubar - value).abs() <= REL_TOL * ubar.abs().max(value.abs())
}

pub fn check_simplicity(params: &ModelParams, k: u32, j_max: u32) -> Result<Simplicity> {
    nonzero_mode(k)?;
    if j_max < 2 * k {
        return Err(Error::Domain(alloc::format!(
            "j_max = {j_max} must be at least 2k = {}",
            2 * k
        )));
    }
    let base = params.d1 * params.d2 * (PI / params.length).powi(4);
    let kk = (k as f64).powi(2);
    let offending_j = (1..=j_max)
        .filter(|&j| j != k)
        .find(|&j| resonant(params.ubar, (j as f64).powi(2) * kk * base));
    let global_branch_hypothesis =
        !(2..=j_max).any(|j| resonant(params.ubar, (j as f64).powi(2) * base));
    let simple = offending_j.is_none();
    Ok(Simplicity {
        simple,
        offending_j,
        global_branch_hypothesis,
        readings_disagree: simple != global_branch_hypothesis,
    })
}

/// Nodal (Q_k cos(kπx/L), cos(kπx/L)).
pub fn eigenmode(params: &ModelParams, k: u32, grid: &Grid) -> Result<StateField> {
    let q = amplitude_ratio(params, k)?;
    let c = crate::discrete::cosine_mode(k, grid);
    Ok(StateField {
        u: c.iter().map(|x| q * x).collect(),
        v: c,
    })
}

/// Everything the linear theory says about one wavenumber.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeAnalysis {
    pub k: u32,
    pub lambda_k: f64,
    pub chi_k: f64,
    pub q_k: f64,
    pub simple: bool,
    pub offending_j: Option<u32>,
    /// Trace of H_k, −T; negative for every parameter set.
    pub trace_k: f64,
    pub det: DetCoefficients,
}

impl ModeAnalysis {
    pub fn new(params: &ModelParams, k: u32) -> Result<Self> {
        let simp = check_simplicity(params, k, 2 * k.max(1) + 2)?;
        Ok(Self {
            k,
            lambda_k: wave_eigenvalue(k, params.length),
            chi_k: bifurcation_value(params, k)?,
            q_k: amplitude_ratio(params, k)?,
            simple: simp.simple,
            offending_j: simp.offending_j,
            trace_k: -trace_coefficient(params, k)?,
            det: DetCoefficients::new(params, k)?,
        })
    }

    /// Largest real part of the growth rates of this mode at `chi`.
    pub fn max_growth_at(&self, chi: f64) -> f64 {
        quadratic_roots(-self.trace_k, self.det.at(chi)).0.re
    }
}

/// [`ModeAnalysis`] for k = 1..=k_max.
pub fn analyze_modes(params: &ModelParams, k_max: u32) -> Result<Vec<ModeAnalysis>> {
    (1..=k_max).map(|k| ModeAnalysis::new(params, k)).collect()
}

/// Largest growth rate over k = 1..=k_max at the parameter's χ.
pub fn max_growth(params: &ModelParams, k_max: u32) -> Result<(f64, u32)> {
    let mut best = (f64::NEG_INFINITY, 0);
    for k in 1..=k_max {
        let g = growth_rates(params, k)?.0.re;
        if g > best.0 {
            best = (g, k);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(chi: f64) -> ModelParams {
        ModelParams::linear(1.0, 1.0, chi, 1.0, 1.0, PI).unwrap()
    }

    #[test]
    fn equilibria() {
        assert_eq!(positive_equilibrium(&unit(0.0)), (1.0, 1.0));
        let p = ModelParams::linear(1.0, 1.0, 0.0, 1.5, 2.0, PI).unwrap();
        assert_eq!(positive_equilibrium(&p), (1.5, 3.0));
        let kin = crate::kinetics::ExpSaturating {
            gamma: 1.0,
            beta: 1.0,
            kappa: 1.0,
        }
        .into_spec()
        .unwrap();
        let p = ModelParams::new(1.0, 1.0, 0.0, 1.0, PI, kin).unwrap();
        assert!((positive_equilibrium(&p).1 - 0.5).abs() < 1e-15);
        assert!(!trivial_equilibrium().bifurcation_base);
    }

    #[test]
    fn matrices() {
        let near = |a: [[f64; 2]; 2], b: [[f64; 2]; 2]| {
            a.iter()
                .flatten()
                .zip(b.iter().flatten())
                .all(|(x, y)| (x - y).abs() < 1e-12)
        };
        assert!(near(
            stability_matrix(&unit(0.0), 1).unwrap(),
            [[-2.0, 0.0], [1.0, -2.0]]
        ));
        assert!(near(
            stability_matrix(&unit(4.0), 1).unwrap(),
            [[-2.0, 4.0], [1.0, -2.0]]
        ));
        assert!(near(
            stability_matrix(&unit(4.0), 2).unwrap(),
            [[-5.0, 16.0], [1.0, -5.0]]
        ));
        assert_eq!(stability_matrix(&unit(4.0), 0), Err(Error::ZeroMode));
    }

    #[test]
    fn rates() {
        let (a, b) = growth_rates(&unit(0.0), 1).unwrap();
        assert!((a.re + 2.0).abs() < 1e-7 && (b.re + 2.0).abs() < 1e-7);
        let (a, b) = growth_rates(&unit(4.0), 1).unwrap();
        assert!(a.re.abs() < 1e-12 && (b.re + 4.0).abs() < 1e-12);
        assert!(growth_rates(&unit(8.0), 1).unwrap().0.re > 0.0);
    }

    #[test]
    fn bifurcation_values() {
        assert!((bifurcation_value(&unit(0.0), 1).unwrap() - 4.0).abs() < 1e-12);
        assert!((bifurcation_value(&unit(0.0), 2).unwrap() - 6.25).abs() < 1e-12);
        let big = unit(0.0).with_d1(1e6);
        assert!(bifurcation_value(&big, 1).unwrap() > 1e6);
    }

    #[test]
    fn thresholds() {
        assert_eq!(instability_threshold(&unit(0.0), 1).unwrap().1, 1);
        let p = ModelParams::linear(1.0, 1.0, 0.0, 1.0, 1.0, 4.0 * PI).unwrap();
        let (chi0, k) = instability_threshold(&p, 16).unwrap();
        assert_eq!(k, 4);
        assert!((chi0 - 4.0).abs() < 1e-12);
        // L = π√2: k = 1 and k = 2 give Λ = 1/2 and 2, both χ = 4.5
        let p = ModelParams::linear(1.0, 1.0, 0.0, 1.0, 1.0, PI * 2f64.sqrt()).unwrap();
        assert_eq!(instability_threshold(&p, 5).unwrap().1, 1);
    }

    #[test]
    fn simplicity() {
        assert!(check_simplicity(&unit(0.0), 1, 4).unwrap().simple);
        let p = ModelParams::linear(1.0, 1.0, 0.0, 4.0, 1.0, PI).unwrap();
        assert_eq!(check_simplicity(&p, 1, 4).unwrap().offending_j, Some(2));
        let p = ModelParams::linear(1.0, 1.0, 0.0, 3.9999999999, 1.0, PI).unwrap();
        assert_eq!(check_simplicity(&p, 1, 4).unwrap().offending_j, Some(2));
        assert!(check_simplicity(&p, 2, 3).is_err());
    }

    #[test]
    fn mode_shape() {
        let p = unit(0.0);
        let g = Grid::new(PI, 16).unwrap();
        let e = eigenmode(&p, 1, &g).unwrap();
        assert_eq!((e.u[0], e.v[0]), (2.0, 1.0));
        assert_eq!((e.u[16], e.v[16]), (-2.0, -1.0));
    }
}
