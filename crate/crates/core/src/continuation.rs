//! Bifurcation detection on the constant branch, branch switching, and
//! pseudo-arclength continuation of nonconstant branches in χ.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::banded::solve_bordered;
use crate::discrete::{
    chi_derivative, discrete_bifurcation_value, discrete_eigenmode, equilibrium_state, jacobian,
    max_norm, residual, residual_floor,
};
use crate::error::{Error, Result};
use crate::grid::{Grid, StateField};
use crate::kinetics::ModelParams;
use crate::linear::{bifurcation_value, check_simplicity, REL_TOL};

/// Relative agreement required between a located root and χ_k^h.
pub const CLOSED_FORM_TOL: f64 = 1e-10;

/// Sign and log-magnitude of det J(ū, v̄; χ).
pub fn linearization_log_det(params: &ModelParams, grid: &Grid) -> Result<(f64, f64)> {
    let jac = jacobian(&equilibrium_state(params, grid), params, grid)?;
    match jac.lu() {
        Ok(lu) => Ok(lu.log_det()),
        Err(Error::Singular(_)) => Ok((0.0, f64::NEG_INFINITY)),
        Err(e) => Err(e),
    }
}

/// A bracket around χ_k that excludes every other continuum χ_j: half the
/// gap to the nearest neighbour on each side.
pub fn default_bracket(params: &ModelParams, k: u32) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::ZeroMode);
    }
    let chi_k = bifurcation_value(params, k)?;
    let j_max = (2 * k).max(crate::linear::k_max_floor(params)) + 4 * k + 8;
    let (mut below, mut above) = (0.0f64, f64::INFINITY);
    for j in (1..=j_max).filter(|&j| j != k) {
        let c = bifurcation_value(params, j)?;
        if (c - chi_k).abs() <= REL_TOL * chi_k {
            return Err(Error::NotSimple { j });
        }
        if c < chi_k {
            below = below.max(c);
        } else {
            above = above.min(c);
        }
    }
    let lo = chi_k - 0.5 * (chi_k - below);
    let hi = if above.is_finite() {
        chi_k + 0.5 * (above - chi_k)
    } else {
        2.0 * chi_k
    };
    Ok((lo, hi))
}

/// Locates the χ in `bracket` where the discrete linearization at (ū, v̄)
/// becomes singular, by bisection on the determinant sign followed by
/// Illinois regula falsi on the (rescaled) determinant. The result is checked
/// against the closed form χ_k^h.
pub fn detect_bifurcation(
    params: &ModelParams,
    grid: &Grid,
    k: u32,
    bracket: (f64, f64),
) -> Result<f64> {
    if k == 0 {
        return Err(Error::ZeroMode);
    }
    let (mut lo, mut hi) = bracket;
    let (s_lo, l_ref) = linearization_log_det(&params.with_chi(lo), grid)?;
    let (s_hi, _) = linearization_log_det(&params.with_chi(hi), grid)?;
    if s_lo == 0.0 {
        return Ok(lo);
    }
    if s_hi == 0.0 {
        return Ok(hi);
    }
    if s_lo == s_hi {
        return Err(Error::NoSignChange { lo, hi });
    }
    // determinant relative to |det(lo)| so it stays representable
    let g = |chi: f64| -> Result<f64> {
        let (s, l) = linearization_log_det(&params.with_chi(chi), grid)?;
        Ok(s * (l - l_ref).exp())
    };
    while hi - lo > 1e-3 * hi.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        let (s, _) = linearization_log_det(&params.with_chi(mid), grid)?;
        if s == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if s == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (mut g_lo, mut g_hi) = (g(lo)?, g(hi)?);
    let mut side = 0i8;
    let mut root = 0.5 * (lo + hi);
    for _ in 0..200 {
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs() {
            break;
        }
        root = if g_hi != g_lo {
            (lo * g_hi - hi * g_lo) / (g_hi - g_lo)
        } else {
            0.5 * (lo + hi)
        };
        if !(root > lo && root < hi) {
            root = 0.5 * (lo + hi);
        }
        let gr = g(root)?;
        if gr == 0.0 {
            break;
        }
        if gr.signum() == g_lo.signum() {
            lo = root;
            g_lo = gr;
            if side == -1 {
                g_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = root;
            g_hi = gr;
            if side == 1 {
                g_lo *= 0.5;
            }
            side = 1;
        }
        if (hi - lo) <= 1e-15 * root.abs() {
            break;
        }
    }
    let expected = discrete_bifurcation_value(params, k, grid)?;
    let rel = (root - expected).abs() / expected.abs();
    if rel > CLOSED_FORM_TOL {
        return Err(Error::ClosedFormMismatch {
            found: root,
            expected,
            rel,
        });
    }
    Ok(root)
}

/// Per-point invariants of a stationary state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    /// ∫u (trapezoid rule).
    pub l1_mass: f64,
    /// ∫u².
    pub l2_norm_sq: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub min_v: f64,
    /// u nonincreasing node to node (slack 1e-12‖u‖∞).
    pub monotone_u: bool,
    pub monotone_v: bool,
    /// u nondecreasing node to node.
    pub increasing_u: bool,
    pub increasing_v: bool,
    pub newton_residual: f64,
    /// (max u − min u)/2.
    pub amplitude: f64,
    /// |ū∫u − ∫u²|; zero up to the residual for discrete solutions.
    pub lemma_defect: f64,
    /// ∫u ≤ ūL(1 + 1e-8).
    pub mass_bound_ok: bool,
}

impl Diagnostics {
    pub fn positive(&self) -> bool {
        self.min_u > 0.0 && self.min_v > 0.0
    }
}

fn monotone(x: &[f64], decreasing: bool) -> bool {
    let slack = 1e-12 * x.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    x.windows(2).all(|w| {
        if decreasing {
            w[1] - w[0] <= slack
        } else {
            w[0] - w[1] <= slack
        }
    })
}

pub fn diagnostics(state: &StateField, params: &ModelParams, grid: &Grid) -> Result<Diagnostics> {
    let r = residual(state, params, grid)?;
    let l1 = grid.integrate(&state.u);
    let l2 = grid.dot(&state.u, &state.u);
    let min_u = state.u.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_u = state.u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(Diagnostics {
        l1_mass: l1,
        l2_norm_sq: l2,
        min_u,
        max_u,
        min_v: state.v.iter().cloned().fold(f64::INFINITY, f64::min),
        monotone_u: monotone(&state.u, true),
        monotone_v: monotone(&state.v, true),
        increasing_u: monotone(&state.u, false),
        increasing_v: monotone(&state.v, false),
        newton_residual: max_norm(&r),
        amplitude: 0.5 * (max_u - min_u),
        lemma_defect: (params.ubar * l1 - l2).abs(),
        mass_bound_ok: l1 <= params.ubar * params.length * (1.0 + 1e-8),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchPoint {
    /// Accumulated pseudo-arclength from the switching point.
    pub arclength: f64,
    pub chi: f64,
    pub state: StateField,
    pub diagnostics: Diagnostics,
    /// Signed amplitude along the critical mode: ⟨z − z̄, e⟩/⟨e, e⟩, the
    /// parameter s of the local expansion χ(s) = χ_k + K3 s² + ….
    pub mode_coordinate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    ChiLimit,
    StepFailure,
    FoldDetected,
    UserStop,
    /// The branch came back to the constant state (amplitude below 1e-8·ū),
    /// i.e. it joined the trivial line at another bifurcation point.
    ReturnedToConstant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Positivity,
    MonotoneU,
    MonotoneV,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BranchEvent {
    /// The χ-component of the tangent changed sign between points
    /// `index − 1` and `index`.
    Fold { index: usize, chi: f64 },
    /// A k = 1 point lost positivity or monotonicity.
    Violation {
        index: usize,
        chi: f64,
        kind: ViolationKind,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub mode: u32,
    /// χ_k^h, where the branch leaves the constant state.
    pub chi_bifurcation: f64,
    /// +1 for the branch with u(0) > ū near onset, −1 for its mirror.
    pub orientation: f64,
    pub points: Vec<BranchPoint>,
    pub terminated_by: Termination,
    pub events: Vec<BranchEvent>,
}

impl Branch {
    /// Smallest χ reached along the branch.
    pub fn min_chi(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.chi)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_chi(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.chi)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn violations(&self) -> impl Iterator<Item = &BranchEvent> {
        self.events
            .iter()
            .filter(|e| matches!(e, BranchEvent::Violation { .. }))
    }

    pub fn folds(&self) -> impl Iterator<Item = &BranchEvent> {
        self.events
            .iter()
            .filter(|e| matches!(e, BranchEvent::Fold { .. }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationOptions {
    pub chi_max: f64,
    /// Continuation also stops below this χ.
    pub chi_min: f64,
    pub ds_init: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub max_points: usize,
    /// Switching amplitude; `None` means 1e-2·ū/Q_k. Its sign picks the branch.
    pub s0: Option<f64>,
    pub tol: f64,
    pub corrector_max_iter: usize,
    /// Steps accepted within this many corrector iterations double ds.
    pub fast_iters: usize,
    pub stop_at_fold: bool,
    /// Snap the last point onto χ = chi_max exactly.
    pub land_on_chi_max: bool,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            chi_max: f64::INFINITY,
            chi_min: 0.0,
            ds_init: 0.02,
            ds_min: 1e-8,
            ds_max: 0.5,
            max_points: 5000,
            s0: None,
            tol: 1e-10,
            corrector_max_iter: 8,
            fast_iters: 3,
            stop_at_fold: false,
            land_on_chi_max: true,
        }
    }
}

/// Weighted inner product on (z, χ): ∫(u² + v²)/L + χ².
struct Metric {
    w: Vec<f64>,
}

impl Metric {
    fn new(grid: &Grid) -> Self {
        let n = grid.n_nodes();
        let mut w = vec![0.0; 2 * n + 1];
        for i in 0..n {
            let wi = grid.weight(i) / grid.length();
            w[2 * i] = wi;
            w[2 * i + 1] = wi;
        }
        w[2 * n] = 1.0;
        Self { w }
    }

    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.w
            .iter()
            .zip(a)
            .zip(b)
            .map(|((w, x), y)| w * x * y)
            .sum()
    }

    fn norm(&self, a: &[f64]) -> f64 {
        self.dot(a, a).sqrt()
    }
}

struct Critical {
    eq: Vec<f64>,
    mode: Vec<f64>,
    /// Grid-weighted mode, so ⟨x, e⟩ = Σ x·weighted.
    weighted: Vec<f64>,
    norm_sq: f64,
}

impl Critical {
    fn new(params: &ModelParams, grid: &Grid, k: u32) -> Result<Self> {
        let eq = equilibrium_state(params, grid).to_interleaved();
        let mode = discrete_eigenmode(params, k, grid)?.to_interleaved();
        let weighted: Vec<f64> = mode
            .iter()
            .enumerate()
            .map(|(i, m)| m * grid.weight(i / 2))
            .collect();
        let norm_sq = weighted.iter().zip(&mode).map(|(a, b)| a * b).sum();
        Ok(Self {
            eq,
            mode,
            weighted,
            norm_sq,
        })
    }

    fn coordinate(&self, z: &[f64]) -> f64 {
        z.iter()
            .zip(&self.eq)
            .zip(&self.weighted)
            .map(|((a, b), w)| (a - b) * w)
            .sum::<f64>()
            / self.norm_sq
    }
}

/// Projection of (state − equilibrium) onto the discrete critical mode.
pub fn mode_coordinate(
    state: &StateField,
    params: &ModelParams,
    grid: &Grid,
    k: u32,
) -> Result<f64> {
    state.check_grid(grid)?;
    Ok(Critical::new(params, grid, k)?.coordinate(&state.to_interleaved()))
}

fn split(x: &[f64]) -> (StateField, f64) {
    let n = x.len() - 1;
    (StateField::from_interleaved(&x[..n]), x[n])
}

/// Solves [J F_χ; cᵀ d] (dz, dχ) = (f, g) at the point x = (z, χ).
fn bordered_step(
    x: &[f64],
    params: &ModelParams,
    grid: &Grid,
    c: &[f64],
    d: f64,
    f: &[f64],
    g: f64,
) -> Result<(Vec<f64>, f64)> {
    let (state, chi) = split(x);
    let p = params.with_chi(chi);
    let jac = jacobian(&state, &p, grid)?;
    let fchi = chi_derivative(&state, &p, grid)?;
    let lu = jac.clone().lu()?;
    solve_bordered(&jac, &lu, &fchi, c, d, f, g)
}

/// Newton on F(z, χ) = 0 together with one scalar linear constraint
/// ⟨c, x⟩ + d·χ = target. Returns the solution and iterations used.
fn bordered_newton(
    mut x: Vec<f64>,
    params: &ModelParams,
    grid: &Grid,
    c: &[f64],
    d: f64,
    target: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize, f64)> {
    let n = x.len() - 1;
    for it in 0..=max_iter {
        let (state, chi) = split(&x);
        let r = residual(&state, &params.with_chi(chi), grid)?;
        let phase = c.iter().zip(&x[..n]).map(|(a, b)| a * b).sum::<f64>() + d * chi - target;
        let norm = max_norm(&r);
        let floor = residual_floor(&state, &params.with_chi(chi), grid);
        if norm <= tol.max(floor) && phase.abs() <= tol {
            return Ok((x, it, norm));
        }
        if it == max_iter || !norm.is_finite() {
            return Err(Error::NonConvergence {
                iterations: it,
                residual: norm,
            });
        }
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let (dz, dchi) = bordered_step(&x, params, grid, c, d, &neg, -phase)?;
        for (xi, di) in x.iter_mut().zip(&dz) {
            *xi += di;
        }
        x[n] += dchi;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
    }
    unreachable!()
}

fn make_point(
    x: &[f64],
    arclength: f64,
    params: &ModelParams,
    grid: &Grid,
    crit: &Critical,
) -> Result<BranchPoint> {
    let (state, chi) = split(x);
    let diagnostics = diagnostics(&state, &params.with_chi(chi), grid)?;
    Ok(BranchPoint {
        arclength,
        chi,
        mode_coordinate: crit.coordinate(&x[..x.len() - 1]),
        state,
        diagnostics,
    })
}

/// Default switching amplitude 1e-2·ū/Q_k.
pub fn default_s0(params: &ModelParams, k: u32) -> Result<f64> {
    Ok(1e-2 * params.ubar / crate::linear::amplitude_ratio(params, k)?)
}

/// Leaves the constant state at χ_k^h along the discrete critical mode:
/// predictor (ū, v̄) + s0·e, corrector Newton in (z, χ) with the phase
/// condition ⟨z − z̄, e⟩ = s0⟨e, e⟩.
pub fn branch_switch(params: &ModelParams, grid: &Grid, k: u32, s0: f64) -> Result<BranchPoint> {
    let simp = check_simplicity(params, k, 2 * k + 2)?;
    if let Some(j) = simp.offending_j {
        return Err(Error::NotSimple { j });
    }
    let chi_h = discrete_bifurcation_value(params, k, grid)?;
    let crit = Critical::new(params, grid, k)?;
    let mut x: Vec<f64> = crit
        .eq
        .iter()
        .zip(&crit.mode)
        .map(|(a, m)| a + s0 * m)
        .collect();
    x.push(chi_h);
    if s0 == 0.0 {
        return make_point(&x, 0.0, params, grid, &crit);
    }
    let c: Vec<f64> = crit.weighted.iter().map(|w| w / crit.norm_sq).collect();
    let target = s0 + dot(&c, &crit.eq);
    let (x, _, _) = bordered_newton(x, params, grid, &c, 0.0, target, 1e-10, 25)
        .map_err(|e| Error::Continuation(format!("branch switch corrector failed: {e}")))?;
    make_point(&x, 0.0, params, grid, &crit)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Unit tangent (in the continuation metric) oriented so that
/// ⟨t, reference⟩ > 0.
fn tangent(
    x: &[f64],
    params: &ModelParams,
    grid: &Grid,
    metric: &Metric,
    reference: &[f64],
) -> Result<Vec<f64>> {
    let n = x.len() - 1;
    let c: Vec<f64> = (0..n).map(|i| metric.w[i] * reference[i]).collect();
    let d = metric.w[n] * reference[n];
    let zeros = vec![0.0; n];
    let (t, tchi) = bordered_step(x, params, grid, &c, d, &zeros, 1.0)?;
    let mut t = t;
    t.push(tchi);
    let norm = metric.norm(&t);
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::NonFinite);
    }
    t.iter_mut().for_each(|v| *v /= norm);
    Ok(t)
}

fn check_violations(
    k: u32,
    orientation: f64,
    index: usize,
    p: &BranchPoint,
    events: &mut Vec<BranchEvent>,
) {
    if k != 1 {
        return;
    }
    let d = &p.diagnostics;
    let (mu, mv) = if orientation >= 0.0 {
        (d.monotone_u, d.monotone_v)
    } else {
        (d.increasing_u, d.increasing_v)
    };
    let mut push = |kind| {
        events.push(BranchEvent::Violation {
            index,
            chi: p.chi,
            kind,
        })
    };
    if !d.positive() {
        push(ViolationKind::Positivity);
    }
    if !mu {
        push(ViolationKind::MonotoneU);
    }
    if !mv {
        push(ViolationKind::MonotoneV);
    }
}

/// Switches onto the k-th branch and follows it by pseudo-arclength
/// continuation until χ leaves [chi_min, chi_max], the step collapses, or
/// `max_points` are stored.
pub fn continue_branch(
    params: &ModelParams,
    grid: &Grid,
    k: u32,
    opts: &ContinuationOptions,
) -> Result<Branch> {
    let s0 = match opts.s0 {
        Some(s) => s,
        None => default_s0(params, k)?,
    };
    if s0 == 0.0 {
        return Err(Error::Continuation(
            "switching amplitude s0 must be nonzero".into(),
        ));
    }
    let start = branch_switch(params, grid, k, s0)?;
    continue_from(params, grid, k, start, s0.signum(), opts)
}

/// Continues from an already converged nonconstant point.
pub fn continue_from(
    params: &ModelParams,
    grid: &Grid,
    k: u32,
    start: BranchPoint,
    orientation: f64,
    opts: &ContinuationOptions,
) -> Result<Branch> {
    let metric = Metric::new(grid);
    let crit = Critical::new(params, grid, k)?;
    let chi_bifurcation = discrete_bifurcation_value(params, k, grid)?;
    let n = 2 * grid.n_nodes();

    let mut x = start.state.to_interleaved();
    x.push(start.chi);
    // initial direction: along the mode, away from the constant state
    let mut reference: Vec<f64> = x[..n].iter().zip(&crit.eq).map(|(a, b)| a - b).collect();
    if reference.iter().all(|v| *v == 0.0) {
        reference = crit.mode.iter().map(|m| orientation * m).collect();
    }
    reference.push(0.0);
    let mut tau = tangent(&x, params, grid, &metric, &reference)?;

    let mut events = Vec::new();
    let mut points = Vec::new();
    check_violations(k, orientation, 0, &start, &mut events);
    points.push(start);
    let mut ds = opts.ds_init;
    let mut arclength = 0.0;

    let terminated_by = loop {
        if points.len() >= opts.max_points {
            break Termination::UserStop;
        }
        let pred: Vec<f64> = x.iter().zip(&tau).map(|(a, t)| a + ds * t).collect();
        let c: Vec<f64> = (0..n).map(|i| metric.w[i] * tau[i]).collect();
        let d = metric.w[n] * tau[n];
        let target = metric.dot(&tau, &x) + ds;
        let attempt = bordered_newton(
            pred.clone(),
            params,
            grid,
            &c,
            d,
            target,
            opts.tol,
            opts.corrector_max_iter,
        )
        .and_then(|(xn, it, res)| {
            let drift: Vec<f64> = xn.iter().zip(&pred).map(|(a, b)| a - b).collect();
            if metric.norm(&drift) > ds {
                return Err(Error::Continuation(
                    "corrector drifted off the predictor".into(),
                ));
            }
            let tn = tangent(&xn, params, grid, &metric, &tau)?;
            Ok((xn, it, res, tn))
        });
        let (xn, iters, _res, tn) = match attempt {
            Ok(v) => v,
            Err(_) => {
                ds *= 0.5;
                if ds < opts.ds_min {
                    break Termination::StepFailure;
                }
                continue;
            }
        };
        arclength += ds;
        let index = points.len();
        let folded = tn[n] * tau[n] < 0.0;
        let point = make_point(&xn, arclength, params, grid, &crit)?;
        if folded {
            events.push(BranchEvent::Fold {
                index,
                chi: point.chi,
            });
        }
        check_violations(k, orientation, index, &point, &mut events);
        let chi = point.chi;
        let collapsed = point.diagnostics.amplitude <= 1e-8 * params.ubar;
        points.push(point);
        let prev_x = core::mem::replace(&mut x, xn);
        tau = tn;
        if collapsed {
            break Termination::ReturnedToConstant;
        }
        if folded && opts.stop_at_fold {
            break Termination::FoldDetected;
        }
        if chi >= opts.chi_max {
            if opts.land_on_chi_max && chi > opts.chi_max {
                let arcs = (points[index - 1].arclength, arclength);
                if let Some(p) = land(
                    &prev_x,
                    &x,
                    arcs,
                    opts.chi_max,
                    params,
                    grid,
                    &crit,
                    opts.tol,
                ) {
                    check_violations(k, orientation, index, &p, &mut events);
                    *points.last_mut().expect("just pushed") = p;
                }
            }
            break Termination::ChiLimit;
        }
        if chi < opts.chi_min {
            break Termination::ChiLimit;
        }
        if iters <= opts.fast_iters {
            ds = (2.0 * ds).min(opts.ds_max);
        }
    };
    Ok(Branch {
        mode: k,
        chi_bifurcation,
        orientation,
        points,
        terminated_by,
        events,
    })
}

/// Fixed-χ Newton at `chi` from the secant interpolation of two points that
/// straddle it; arclength is interpolated the same way.
#[allow(clippy::too_many_arguments)]
fn land(
    a: &[f64],
    b: &[f64],
    arcs: (f64, f64),
    chi: f64,
    params: &ModelParams,
    grid: &Grid,
    crit: &Critical,
    tol: f64,
) -> Option<BranchPoint> {
    let n = a.len() - 1;
    let t = (chi - a[n]) / (b[n] - a[n]);
    if !(0.0..=1.0).contains(&t) {
        return None;
    }
    let z: Vec<f64> = a[..n]
        .iter()
        .zip(&b[..n])
        .map(|(p, q)| p + t * (q - p))
        .collect();
    let opts = crate::newton::NewtonOptions {
        tol,
        ..Default::default()
    };
    let sol = crate::newton::newton_solve(
        &StateField::from_interleaved(&z),
        &params.with_chi(chi),
        grid,
        &opts,
    )
    .ok()?;
    let mut x = sol.state.to_interleaved();
    x.push(chi);
    make_point(&x, arcs.0 + t * (arcs.1 - arcs.0), params, grid, crit).ok()
}

/// Least-squares fit y ≈ c0 + c1·x + c2·x².
pub fn quadratic_fit(xs: &[f64], ys: &[f64]) -> Result<[f64; 3]> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            found: ys.len(),
        });
    }
    if xs.len() < 3 {
        return Err(Error::Domain(
            "quadratic fit needs at least three points".into(),
        ));
    }
    // scale x to O(1) for conditioning
    let scale = xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return Err(Error::Domain(
            "quadratic fit needs distinct abscissae".into(),
        ));
    }
    let mut m = [[0.0f64; 4]; 3];
    for (&x, &y) in xs.iter().zip(ys) {
        let t = x / scale;
        let row = [1.0, t, t * t];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += row[i] * row[j];
            }
            m[i][3] += row[i] * y;
        }
    }
    // Gaussian elimination with partial pivoting on the 3×3 normal equations
    for c in 0..3 {
        let p = (c..3)
            .max_by(|&a, &b| {
                m[a][c]
                    .abs()
                    .partial_cmp(&m[b][c].abs())
                    .unwrap_or(core::cmp::Ordering::Equal)
            })
            .unwrap_or(c);
        m.swap(c, p);
        if m[c][c].abs() < 1e-300 {
            return Err(Error::Singular(c));
        }
        for r in c + 1..3 {
            let f = m[r][c] / m[c][c];
            for j in c..4 {
                m[r][j] -= f * m[c][j];
            }
        }
    }
    let mut sol = [0.0; 3];
    for r in (0..3).rev() {
        let mut acc = m[r][3];
        for j in r + 1..3 {
            acc -= m[r][j] * sol[j];
        }
        sol[r] = acc / m[r][r];
    }
    Ok([sol[0], sol[1] / scale, sol[2] / (scale * scale)])
}
