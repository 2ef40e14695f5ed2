//! Direction and stability of the pitchfork at χ_k for Φ = u, h = βu.
//!
//! Along the k-th branch χ(s) = χ_k + K2 s + K3 s² + O(s³) with K2 = 0. K3 is
//! computed two ways:
//!
//! * [`k3_fourier`] solves the second-order correction problem exactly. Its
//!   forcing only contains the modes {1, cos(2kπx/L)}, so the correction is
//!   ψ₁ = p0 + p2 cos(2kπx/L), φ₁ = q0 + q2 cos(2kπx/L), and K3 follows from
//!   projecting the third-order equation on cos(kπx/L). This is the
//!   authoritative value.
//! * [`k3_closed_form`] evaluates the reference rational expression
//!   `(ū k π²/(2L)) K3 = Q³L/(16 D2 (kπ/L)⁴) · F(D1)/(D1 − r3)` with
//!   F(D1) = aD1² + bD1 + c. It has the same sign as the Fourier value but
//!   is 3k times larger in magnitude.
//!
//! The sign of K3 decides stability: the bifurcating solution is stable for
//! K3 > 0 and unstable for K3 < 0.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::grid::{Grid, StateField};
use crate::kinetics::ModelParams;
use crate::linear::{amplitude_ratio, bifurcation_value, wave_eigenvalue, REL_TOL};

fn linear_beta(params: &ModelParams) -> Result<f64> {
    params
        .kinetics
        .linear_beta()
        .ok_or(Error::UnsupportedKinetics)
}

fn nonzero_mode(k: u32) -> Result<()> {
    if k == 0 {
        Err(Error::ZeroMode)
    } else {
        Ok(())
    }
}

/// Coefficients of F(D1) = a·D1² + b·D1 + c.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Quadratic {
    pub fn eval(&self, x: f64) -> f64 {
        (self.a * x + self.b) * x + self.c
    }

    pub fn discriminant(&self) -> f64 {
        self.b * self.b - 4.0 * self.a * self.c
    }

    /// Real roots in increasing order (one root when a = 0).
    pub fn real_roots(&self) -> Vec<f64> {
        if self.a == 0.0 {
            return if self.b != 0.0 {
                alloc::vec![-self.c / self.b]
            } else {
                Vec::new()
            };
        }
        let d = self.discriminant();
        if d < 0.0 {
            return Vec::new();
        }
        let q = -0.5 * (self.b + self.b.signum() * d.sqrt());
        let mut r = if q != 0.0 {
            alloc::vec![q / self.a, self.c / q]
        } else {
            alloc::vec![0.0, 0.0]
        };
        r.sort_by(|x, y| x.partial_cmp(y).unwrap_or(core::cmp::Ordering::Equal));
        r
    }
}

/// F's coefficients with κ = kπ/L:
/// a = (14 D2 κ⁶ − κ⁴)/ū², b = −(2 D2 κ⁴ + 5 κ²)/(2ū), c = 5 D2 κ² + 7/2.
pub fn f_coefficients(params: &ModelParams, k: u32) -> Quadratic {
    let kl = k as f64 * PI / params.length;
    let (d2, ub) = (params.d2, params.ubar);
    Quadratic {
        a: (14.0 * d2 * kl.powi(6) - kl.powi(4)) / (ub * ub),
        b: -(2.0 * d2 * kl.powi(4) + 5.0 * kl.powi(2)) / (2.0 * ub),
        c: 5.0 * d2 * kl.powi(2) + 3.5,
    }
}

/// r3 = ū/(4 D2)·(L/kπ)⁴, the D1 at which the 2k-mode is resonant.
pub fn r3(params: &ModelParams, k: u32) -> f64 {
    params.ubar / (4.0 * params.d2) * (params.length / (k as f64 * PI)).powi(4)
}

/// Roots of F and the pole r3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Roots {
    /// Smaller real root of F, if any.
    pub r1: Option<f64>,
    /// Larger real root of F (the only one when a = 0).
    pub r2: Option<f64>,
    pub r3: f64,
}

/// The two reference root expressions taken literally, which are 4× the true
/// roots of F (and whose radicand uses κ⁴ where κ² is consistent).
pub fn printed_roots(params: &ModelParams, k: u32) -> (Option<f64>, Option<f64>) {
    let kl = k as f64 * PI / params.length;
    let d2 = params.d2;
    let rad = -1116.0 * d2 * d2 * kl.powi(4) - 684.0 * d2 * kl.powi(4) + 81.0;
    let den = 14.0 * d2 * kl.powi(4) - kl.powi(2);
    if rad < 0.0 || den == 0.0 {
        return (None, None);
    }
    let base = 2.0 * d2 * kl.powi(2) + 5.0;
    let s = rad.sqrt();
    (
        Some(params.ubar * (base - s) / den),
        Some(params.ubar * (base + s) / den),
    )
}

/// Result of the closed-form evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormK3 {
    pub k3: f64,
    pub abc: Quadratic,
    pub roots: Roots,
}

pub fn k3_closed_form(params: &ModelParams, k: u32) -> Result<ClosedFormK3> {
    nonzero_mode(k)?;
    linear_beta(params)?;
    let abc = f_coefficients(params, k);
    let r3 = r3(params, k);
    if (params.d1 - r3).abs() <= 1e-8 * r3 {
        return Err(Error::PitchforkSingular(format!(
            "D1 = {} coincides with r3 = {r3} (resonance between modes k and 2k)",
            params.d1
        )));
    }
    let roots = abc.real_roots();
    let roots = match roots.len() {
        2 => Roots {
            r1: Some(roots[0]),
            r2: Some(roots[1]),
            r3,
        },
        1 => Roots {
            r1: None,
            r2: Some(roots[0]),
            r3,
        },
        _ => Roots {
            r1: None,
            r2: None,
            r3,
        },
    };
    let kl = k as f64 * PI / params.length;
    let q = amplitude_ratio(params, k)?;
    let l = params.length;
    let rhs =
        q.powi(3) * l / (16.0 * params.d2 * kl.powi(4)) * abc.eval(params.d1) / (params.d1 - r3);
    let lhs = params.ubar * k as f64 * PI * PI / (2.0 * l);
    Ok(ClosedFormK3 {
        k3: rhs / lhs,
        abc,
        roots,
    })
}

/// Fourier coefficients of the second-order corrections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionFields {
    pub k: u32,
    pub length: f64,
    pub p0: f64,
    pub p2: f64,
    pub q0: f64,
    pub q2: f64,
}

impl CorrectionFields {
    /// Nodal (ψ₁, φ₁).
    pub fn sample(&self, grid: &Grid) -> StateField {
        let w = 2.0 * self.k as f64 * PI / self.length;
        let c: Vec<f64> = grid.nodes().map(|x| (w * x).cos()).collect();
        StateField {
            u: c.iter().map(|c| self.p0 + self.p2 * c).collect(),
            v: c.iter().map(|c| self.q0 + self.q2 * c).collect(),
        }
    }

    /// ∫ψ₁ dx = p0·L.
    pub fn psi1_mean_integral(&self) -> f64 {
        self.p0 * self.length
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierK3 {
    pub k3: f64,
    pub fields: CorrectionFields,
}

pub fn k3_fourier(params: &ModelParams, k: u32) -> Result<FourierK3> {
    nonzero_mode(k)?;
    let beta = linear_beta(params)?;
    let (d1, d2, ub) = (params.d1, params.d2, params.ubar);
    let lam = wave_eigenvalue(k, params.length);
    let lam2 = 4.0 * lam;
    let q = amplitude_ratio(params, k)?;
    let chi_k = bifurcation_value(params, k)?;

    // constant mode: (ū − 2ū)… reduces to −ū p0 = Q²/2 and −q0 + βp0 = 0
    let p0 = -q * q / (2.0 * ub);
    let q0 = beta * p0;

    // 2k-mode: [[−(D1Λ₂+ū), χ_k ū Λ₂], [β, −(D2Λ₂+1)]]·(p2, q2) = (Q²/2 − χ_k Q Λ, 0)
    let m11 = -(d1 * lam2 + ub);
    let m12 = chi_k * ub * lam2;
    let m21 = beta;
    let m22 = -(d2 * lam2 + 1.0);
    let det = m11 * m22 - m12 * m21;
    let scale = (m11 * m22).abs().max((m12 * m21).abs());
    if det.abs() <= 1e-12 * scale {
        return Err(Error::PitchforkSingular(format!(
            "the 2k-mode system is singular (χ_{{2k}} = χ_k; ū = 4k⁴D1D2(π/L)⁴ with k = {k})"
        )));
    }
    let f1 = q * q / 2.0 - chi_k * q * lam;
    let p2 = (f1 * m22) / det;
    let q2 = (-f1 * m21) / det;

    let k3 =
        (q * (p0 + 0.5 * p2) - 0.5 * chi_k * q * lam * q2 - 0.5 * chi_k * lam * (p0 - 0.5 * p2))
            / (0.5 * ub * lam);
    Ok(FourierK3 {
        k3,
        fields: CorrectionFields {
            k,
            length: params.length,
            p0,
            p2,
            q0,
            q2,
        },
    })
}

/// μ̇(χ_k) = βūΛ/(D1Λ + βQ_k + ū), the speed at which the critical
/// eigenvalue of the constant state crosses zero.
pub fn eigenvalue_drift(params: &ModelParams, k: u32) -> Result<f64> {
    nonzero_mode(k)?;
    let beta = linear_beta(params)?;
    let lam = wave_eigenvalue(k, params.length);
    let q = amplitude_ratio(params, k)?;
    Ok(beta * params.ubar * lam / (params.d1 * lam + beta * q + params.ubar))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
    Degenerate,
}

impl Stability {
    pub fn label(self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Degenerate => "degenerate",
        }
    }
}

/// Stable iff K3 > 0; Degenerate when |K3| ≤ 1e-10·scale.
pub fn stability_from_k3(k3: f64, scale: f64) -> Stability {
    if !(k3.abs() > 1e-10 * scale.abs().max(1.0)) {
        Stability::Degenerate
    } else if k3 > 0.0 {
        Stability::Stable
    } else {
        Stability::Unstable
    }
}

pub fn predict_stability(params: &ModelParams, k: u32) -> Result<Stability> {
    let k3 = k3_fourier(params, k)?.k3;
    Ok(stability_from_k3(k3, bifurcation_value(params, k)?))
}

/// Magnitude of the branch's critical eigenvalue, K3·μ̇·s², used to judge
/// whether a time-domain probe can resolve it.
pub fn predicted_branch_rate(k3: f64, mu_dot: f64, s: f64) -> f64 {
    -k3 * mu_dot * s * s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RegionCase {
    I,
    II,
    III,
    IV,
    V,
    VI,
}

impl RegionCase {
    pub fn label(self) -> &'static str {
        match self {
            RegionCase::I => "i",
            RegionCase::II => "ii",
            RegionCase::III => "iii",
            RegionCase::IV => "iv",
            RegionCase::V => "v",
            RegionCase::VI => "vi",
        }
    }
}

/// The sign of K3 on the open D1-interval (lo, hi).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignInterval {
    pub lo: f64,
    pub hi: f64,
    pub positive: bool,
}

fn sign_in(chart: &[SignInterval], d1: f64) -> Option<bool> {
    chart
        .iter()
        .find(|iv| d1 > iv.lo && d1 < iv.hi)
        .map(|iv| iv.positive)
}

/// D2 thresholds separating the six cases, in units of D2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// a = 0.
    pub a_zero: f64,
    /// F(r3) = 0.
    pub f_at_r3_zero: f64,
    /// disc(F) = 0.
    pub double_root: f64,
}

/// Thresholds from the implementation's own root-finding. With
/// x = D2 (kπ/L)² they are x = 1/14 (a = 0), the positive root of
/// x ↦ F(r3) and the positive root of −1116x² − 684x + 81.
pub fn computed_thresholds(params: &ModelParams, k: u32) -> Thresholds {
    let inv = 1.0 / wave_eigenvalue(k, params.length);
    // F(r3)·(stuff) as a function of x: bisection on the exact expression
    let f_r3 = |x: f64| {
        let p = params.with_d2(x * inv);
        f_coefficients(&p, k).eval(r3(&p, k))
    };
    let (mut lo, mut hi) = (1e-6, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f_r3(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let disc = (-684.0 + (684.0f64 * 684.0 + 4.0 * 1116.0 * 81.0).sqrt()) / (2.0 * 1116.0);
    Thresholds {
        a_zero: inv / 14.0,
        f_at_r3_zero: 0.5 * (lo + hi) * inv,
        double_root: disc * inv,
    }
}

/// The thresholds as printed: 1/14, 1/10 and 113/1116 times (L/kπ)².
pub fn printed_thresholds(params: &ModelParams, k: u32) -> Thresholds {
    let inv = 1.0 / wave_eigenvalue(k, params.length);
    Thresholds {
        a_zero: inv / 14.0,
        f_at_r3_zero: inv / 10.0,
        double_root: 113.0 / 1116.0 * inv,
    }
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TOL * a.abs().max(b.abs())
}

fn case_for(d2: f64, t: &Thresholds) -> (RegionCase, bool) {
    if near(d2, t.a_zero) {
        (RegionCase::I, true)
    } else if d2 < t.a_zero {
        (RegionCase::I, false)
    } else if near(d2, t.f_at_r3_zero) {
        (RegionCase::III, true)
    } else if d2 < t.f_at_r3_zero {
        (RegionCase::II, false)
    } else if near(d2, t.double_root) {
        (RegionCase::V, true)
    } else if d2 < t.double_root {
        (RegionCase::IV, false)
    } else {
        (RegionCase::VI, false)
    }
}

fn chart_from_breaks(mut breaks: Vec<f64>, sign: impl Fn(f64) -> f64) -> Vec<SignInterval> {
    breaks.retain(|b| *b > 0.0 && b.is_finite());
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    breaks.dedup_by(|a, b| near(*a, *b));
    let mut edges = alloc::vec![0.0];
    edges.extend(breaks);
    edges.push(f64::INFINITY);
    let mut out: Vec<SignInterval> = Vec::new();
    for w in edges.windows(2) {
        let mid = if w[1].is_finite() {
            0.5 * (w[0] + w[1])
        } else {
            2.0 * w[0] + 1.0
        };
        let positive = sign(mid) > 0.0;
        match out.last_mut() {
            // merge neighbours of equal sign (a double root of F does not flip the sign)
            Some(last) if last.positive == positive => last.hi = w[1],
            _ => out.push(SignInterval {
                lo: w[0],
                hi: w[1],
                positive,
            }),
        }
    }
    out
}

fn printed_chart(case: RegionCase, r1: Option<f64>, r2: Option<f64>, r3: f64) -> Vec<SignInterval> {
    let iv = |lo: f64, hi: f64, positive: bool| SignInterval { lo, hi, positive };
    let inf = f64::INFINITY;
    let (r1, r2) = (r1.unwrap_or(f64::NAN), r2.unwrap_or(f64::NAN));
    match case {
        RegionCase::I => alloc::vec![iv(0.0, r2, false), iv(r2, r3, true), iv(r3, inf, false)],
        RegionCase::II => alloc::vec![
            iv(0.0, r1, false),
            iv(r1, r3, true),
            iv(r3, r2, false),
            iv(r2, inf, true)
        ],
        RegionCase::III => alloc::vec![iv(0.0, r1, false), iv(r1, r2, false), iv(r2, inf, true)],
        RegionCase::IV => alloc::vec![
            iv(0.0, r3, false),
            iv(r3, r1, true),
            iv(r1, r2, false),
            iv(r2, inf, true)
        ],
        RegionCase::V => alloc::vec![iv(0.0, r3, false), iv(r3, r1, true), iv(r1, inf, true)],
        RegionCase::VI => alloc::vec![iv(0.0, r3, false), iv(r3, inf, true)],
    }
}

/// Classification of D2 and the sign chart of K3 in D1, computed and as
/// printed.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionChart {
    pub case: RegionCase,
    /// D2 sits on a threshold (within relative 1e-9).
    pub boundary: bool,
    pub thresholds: Thresholds,
    pub computed: Vec<SignInterval>,
    pub printed_case: RegionCase,
    pub printed_thresholds: Thresholds,
    pub printed: Vec<SignInterval>,
    /// Human-readable differences between the two charts.
    pub discrepancies: Vec<String>,
}

impl RegionChart {
    /// Sign of K3 at `d1` by the computed chart (`None` on a breakpoint).
    pub fn sign_at(&self, d1: f64) -> Option<bool> {
        sign_in(&self.computed, d1)
    }

    pub fn printed_sign_at(&self, d1: f64) -> Option<bool> {
        sign_in(&self.printed, d1)
    }
}

pub fn classify_region(params: &ModelParams, k: u32) -> Result<RegionChart> {
    nonzero_mode(k)?;
    linear_beta(params)?;
    let t = computed_thresholds(params, k);
    let (case, boundary) = case_for(params.d2, &t);
    let pt = printed_thresholds(params, k);
    let (printed_case, _) = case_for(params.d2, &pt);

    let abc = f_coefficients(params, k);
    let r3v = r3(params, k);
    let mut breaks = abc.real_roots();
    breaks.push(r3v);
    let computed = chart_from_breaks(breaks, |d1| abc.eval(d1) / (d1 - r3v));

    let (p1, p2) = printed_roots(params, k);
    let printed = printed_chart(printed_case, p1, p2, r3v);

    let mut discrepancies = Vec::new();
    if case != printed_case {
        discrepancies.push(format!(
            "D2 = {} falls in case ({}) by the computed thresholds but ({}) by the printed ones",
            params.d2,
            case.label(),
            printed_case.label()
        ));
    }
    if !near(t.double_root, pt.double_root) {
        discrepancies.push(format!(
            "double-root threshold: computed D2 = {:.12} vs printed {:.12}",
            t.double_root, pt.double_root
        ));
    }
    if !near(t.f_at_r3_zero, pt.f_at_r3_zero) {
        discrepancies.push(format!(
            "F(r3) = 0 threshold: computed D2 = {:.12} vs printed {:.12}",
            t.f_at_r3_zero, pt.f_at_r3_zero
        ));
    }
    let true_roots = abc.real_roots();
    for (name, pr) in [("r1", p1), ("r2", p2)] {
        if let Some(pr) = pr {
            let matches = true_roots.iter().any(|r| near(*r, pr));
            if !matches {
                discrepancies.push(format!(
                    "printed {name} = {pr:.12} is not a root of F (roots: {true_roots:?})"
                ));
            }
        }
    }
    // sample the two charts
    let mut disagreements = 0;
    let mut total = 0;
    for i in 0..200 {
        let d1 = r3v * 10f64.powf(-3.0 + 6.0 * (i as f64 + 0.5) / 200.0);
        if let (Some(a), Some(b)) = (sign_in(&computed, d1), sign_in(&printed, d1)) {
            total += 1;
            if a != b {
                disagreements += 1;
            }
        }
    }
    if disagreements > 0 {
        discrepancies.push(format!(
            "sign charts disagree at {disagreements} of {total} sampled D1 values"
        ));
    }
    Ok(RegionChart {
        case,
        boundary,
        thresholds: t,
        computed,
        printed_case,
        printed_thresholds: pt,
        printed,
        discrepancies,
    })
}

/// Everything known about the pitchfork at one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct PitchforkRecord {
    pub k: u32,
    pub chi_k: f64,
    /// Always zero: the branch is symmetric in s.
    pub k2: f64,
    pub k3_closed: f64,
    pub k3_fourier: f64,
    pub abc: Quadratic,
    pub roots: Roots,
    pub printed_roots: (Option<f64>, Option<f64>),
    pub region: RegionChart,
    pub stability: Stability,
    pub mu_dot: f64,
    pub corrections: CorrectionFields,
}

impl PitchforkRecord {
    /// k3_closed / k3_fourier.
    pub fn closed_to_fourier_ratio(&self) -> f64 {
        self.k3_closed / self.k3_fourier
    }
}

pub fn analyze_pitchfork(params: &ModelParams, k: u32) -> Result<PitchforkRecord> {
    let closed = k3_closed_form(params, k)?;
    let fourier = k3_fourier(params, k)?;
    let chi_k = bifurcation_value(params, k)?;
    Ok(PitchforkRecord {
        k,
        chi_k,
        k2: 0.0,
        k3_closed: closed.k3,
        k3_fourier: fourier.k3,
        abc: closed.abc,
        roots: closed.roots,
        printed_roots: printed_roots(params, k),
        region: classify_region(params, k)?,
        stability: stability_from_k3(fourier.k3, chi_k),
        mu_dot: eigenvalue_drift(params, k)?,
        corrections: fourier.fields,
    })
}

/// One cell of a (D1, D2) cross-check between the two K3 evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossCheck {
    pub d1: f64,
    pub d2: f64,
    pub k3_closed: f64,
    pub k3_fourier: f64,
    pub sign_agrees: bool,
    /// |closed − fourier| / max(|closed|, 1).
    pub rel_diff: f64,
}

/// Evaluates both K3 forms on the grid d1s × d2s, skipping points within
/// relative `band` of r1, r2 or r3 (and points where either form is singular).
pub fn cross_check(
    base: &ModelParams,
    k: u32,
    d1s: &[f64],
    d2s: &[f64],
    band: f64,
) -> Result<Vec<CrossCheck>> {
    linear_beta(base)?;
    let mut out = Vec::new();
    for &d2 in d2s {
        for &d1 in d1s {
            let p = base.with_d1(d1).with_d2(d2);
            let abc = f_coefficients(&p, k);
            let mut breaks = abc.real_roots();
            breaks.push(r3(&p, k));
            if breaks.iter().any(|r| (d1 - r).abs() <= band * r.abs()) {
                continue;
            }
            let (Ok(c), Ok(f)) = (k3_closed_form(&p, k), k3_fourier(&p, k)) else {
                continue;
            };
            out.push(CrossCheck {
                d1,
                d2,
                k3_closed: c.k3,
                k3_fourier: f.k3,
                sign_agrees: c.k3.signum() == f.k3.signum(),
                rel_diff: (c.k3 - f.k3).abs() / c.k3.abs().max(1.0),
            });
        }
    }
    Ok(out)
}
