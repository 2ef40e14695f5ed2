//! Large-χ behaviour of monotone steady states: boundary-spike metrics, χ
//! sweeps along the monotone first-mode family, the χ/D1 → a limit system
//! and a diagnostic for the excluded two-level step profile.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::banded::BandMatrix;
use crate::continuation::{continue_branch, diagnostics, ContinuationOptions, Termination};
use crate::discrete::{discrete_bifurcation_value, equilibrium_state, max_norm, residual_field};
use crate::error::{Error, Result};
use crate::grid::{Grid, StateField};
use crate::kinetics::ModelParams;
use crate::newton::{newton_solve, NewtonOptions};

/// Shape summary of a (canonically decreasing) steady state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikeMetrics {
    /// u(0)/ū.
    pub peak_ratio: f64,
    /// Smallest x with u(x) ≤ (u(0) + u(L))/2, linearly interpolated; L for
    /// a flat profile.
    pub half_width: f64,
    /// ∫u.
    pub mass: f64,
    /// max u over the nodes in [L/2, L].
    pub tail_sup: f64,
    pub min_u: f64,
    /// The input was not monotone decreasing (after any reflection).
    pub flagged: bool,
    /// The input was increasing and the metrics describe its reflection.
    pub reflected: bool,
}

fn is_monotone(x: &[f64], decreasing: bool) -> bool {
    let slack = 1e-12 * x.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    x.windows(2).all(|w| {
        if decreasing {
            w[1] - w[0] <= slack
        } else {
            w[0] - w[1] <= slack
        }
    })
}

/// Brings an increasing profile into the decreasing orientation.
fn canonical(state: &StateField) -> (StateField, bool) {
    if !is_monotone(&state.u, true) && is_monotone(&state.u, false) {
        (state.reflected(), true)
    } else {
        (state.clone(), false)
    }
}

pub fn spike_metrics(
    state: &StateField,
    params: &ModelParams,
    grid: &Grid,
) -> Result<SpikeMetrics> {
    state.check_grid(grid)?;
    let (s, reflected) = canonical(state);
    let u = &s.u;
    let n = grid.n_cells();
    let (first, last) = (u[0], u[n]);
    let scale = u
        .iter()
        .fold(0.0f64, |m, a| m.max(a.abs()))
        .max(f64::MIN_POSITIVE);
    let mid = 0.5 * (first + last);
    let mut half_width = grid.length();
    if first - last > 1e-12 * scale {
        if let Some(i) = (1..=n).find(|&i| u[i] <= mid) {
            let t = (u[i - 1] - mid) / (u[i - 1] - u[i]);
            half_width = grid.x(i - 1) + t * grid.spacing();
        }
    }
    let tail_sup = (0..=n)
        .filter(|&i| 2.0 * grid.x(i) >= grid.length())
        .map(|i| u[i])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(SpikeMetrics {
        peak_ratio: first / params.ubar,
        half_width,
        mass: grid.integrate(u),
        tail_sup,
        min_u: u.iter().cloned().fold(f64::INFINITY, f64::min),
        flagged: reflected || !is_monotone(u, true),
        reflected,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    /// Used for the arclength continuation that produces the seed.
    pub continuation: ContinuationOptions,
    /// Used for every fixed-parameter solve.
    pub newton: NewtonOptions,
    /// The seed may be taken from the branch at D1·2^m, m ≤ this, and carried
    /// back down to D1.
    pub max_doublings: u32,
    /// Smallest fraction of a (log-spaced) parameter interval a sub-step may
    /// cover before the sweep gives up.
    pub min_step: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            continuation: ContinuationOptions::default(),
            newton: NewtonOptions::default(),
            max_doublings: 8,
            min_step: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub chi: f64,
    pub metrics: SpikeMetrics,
    pub state: StateField,
    /// False when χ lies below χ_k^h and the constant state is reported.
    pub nonconstant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// In increasing χ; a prefix of the schedule's nonconstant part may be
    /// missing when the sweep aborted.
    pub points: Vec<SweepPoint>,
    /// D1 at which the seed branch was computed (equals params.d1 unless a
    /// diffusion homotopy was needed).
    pub seed_d1: f64,
    /// χ at which the sweep stopped and why.
    pub failure: Option<(f64, Error)>,
}

impl SweepResult {
    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }
}

/// Why a converged state does not belong to the positive monotone family
/// followed by the sweep, if it does not.
fn inadmissible(
    state: &StateField,
    params: &ModelParams,
    grid: &Grid,
    k: u32,
) -> Result<Option<&'static str>> {
    let d = diagnostics(state, params, grid)?;
    if d.amplitude <= 1e-6 * params.ubar {
        return Ok(Some("collapsed onto the constant state"));
    }
    // tails of a sharp spike underflow; allow round-off below zero
    if d.min_u < -1e-9 * d.max_u.abs() || d.min_v <= 0.0 {
        return Ok(Some("lost positivity"));
    }
    if k == 1 && !(d.monotone_u && d.monotone_v) {
        return Ok(Some("lost monotonicity"));
    }
    Ok(None)
}

fn amplitude(s: &StateField) -> f64 {
    let (lo, hi) =
        s.u.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
                (a.min(x), b.max(x))
            });
    hi - lo
}

/// Natural-parameter continuation of a converged state in one positive
/// parameter, log-spaced (at most 10% per sub-step), with secant prediction
/// and step halving. A sub-step whose amplitude changes by more than a
/// factor of two is treated as a jump to another solution and rejected.
fn track<F>(
    start: &StateField,
    from: f64,
    to: f64,
    at: F,
    grid: &Grid,
    opts: &SweepOptions,
) -> Result<StateField>
where
    F: Fn(f64) -> ModelParams,
{
    let value = |t: f64| from * (to / from).powf(t);
    let dt_max = (0.1 / (to / from).ln().abs()).min(1.0);
    let mut t = 0.0;
    let mut dt = dt_max;
    let mut cur = start.clone();
    let mut prev: Option<(f64, StateField)> = None;
    while t < 1.0 {
        let next = (t + dt).min(1.0);
        let guess = match &prev {
            Some((tp, sp)) => cur.axpy((next - t) / (t - tp), &cur.axpy(-1.0, sp)),
            None => cur.clone(),
        };
        let param = if next == 1.0 { to } else { value(next) };
        let attempt = newton_solve(&guess, &at(param), grid, &opts.newton)
            .map_err(|f| f.error)
            .and_then(|sol| {
                let (a0, a1) = (amplitude(&cur), amplitude(&sol.state));
                if a1 > 2.0 * a0 || 2.0 * a1 < a0 {
                    Err(Error::Continuation(format!(
                        "solution jumped at parameter {param}"
                    )))
                } else {
                    Ok(sol.state)
                }
            });
        match attempt {
            Ok(state) => {
                prev = Some((t, core::mem::replace(&mut cur, state)));
                t = next;
                dt = (2.0 * dt).min(dt_max);
            }
            Err(e) => {
                dt *= 0.5;
                if dt < opts.min_step {
                    return Err(e);
                }
            }
        }
    }
    Ok(cur)
}

/// A positive monotone state on the k-th family at χ = `chi`, found on the
/// branch at params.d1 or, failing that, at a doubled D1 and carried back.
/// When neither yields one, the plain branch endpoint is returned as is.
fn seed(
    params: &ModelParams,
    grid: &Grid,
    k: u32,
    chi: f64,
    opts: &SweepOptions,
) -> Result<(StateField, f64)> {
    let mut last_err = Error::Continuation(format!("no branch of mode {k} reaches χ = {chi}"));
    let mut fallback = None;
    for m in 0..=opts.max_doublings {
        let d1 = params.d1 * (1u64 << m) as f64;
        let pm = params.with_d1(d1);
        if discrete_bifurcation_value(&pm, k, grid)? >= chi {
            break;
        }
        let copts = ContinuationOptions {
            chi_max: chi,
            land_on_chi_max: true,
            ..opts.continuation
        };
        let branch = match continue_branch(&pm, grid, k, &copts) {
            Ok(b) => b,
            Err(e) => {
                last_err = e;
                continue;
            }
        };
        let end = branch.points.last().expect("branch has its starting point");
        if branch.terminated_by != Termination::ChiLimit || (end.chi - chi).abs() > 1e-9 * chi {
            last_err =
                Error::Continuation(format!("branch at D1 = {d1} stopped at χ = {}", end.chi));
            continue;
        }
        if m == 0 {
            fallback = Some(end.state.clone());
        }
        if let Some(why) = inadmissible(&end.state, &pm, grid, k)? {
            last_err = Error::Continuation(format!("branch at D1 = {d1} {why} before χ = {chi}"));
            continue;
        }
        if m == 0 {
            return Ok((end.state.clone(), d1));
        }
        let at = |x: f64| params.with_chi(chi).with_d1(x);
        match track(&end.state, d1, params.d1, at, grid, opts) {
            Ok(s) => match inadmissible(&s, &params.with_chi(chi), grid, k)? {
                None => return Ok((s, d1)),
                Some(why) => {
                    last_err =
                        Error::Continuation(format!("diffusion homotopy from D1 = {d1} {why}"))
                }
            },
            Err(e) => last_err = e,
        }
    }
    fallback.map(|s| (s, params.d1)).ok_or(last_err)
}

/// Steady states of the positive monotone k-th family at each χ of an
/// increasing schedule.
///
/// Entries below χ_k^h get the constant state. The nonconstant part is seeded
/// at the largest χ and then marched downwards through the schedule, each
/// point warm-started from its neighbour: near onset the branch can fold or
/// lose monotonicity, whereas at large χ the monotone family is a clean
/// boundary spike. Non-monotone points are kept and flagged in their
/// metrics; a failed solve stops the sweep and the points computed so far
/// are returned.
pub fn sweep_chi(
    params: &ModelParams,
    grid: &Grid,
    k: u32,
    schedule: &[f64],
    opts: &SweepOptions,
) -> Result<SweepResult> {
    if schedule.is_empty() {
        return Err(Error::Domain("empty χ schedule".into()));
    }
    if schedule.iter().any(|c| !(c.is_finite() && *c > 0.0))
        || schedule.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::Domain(
            "χ schedule must be positive and strictly increasing".into(),
        ));
    }
    let chi_h = discrete_bifurcation_value(params, k, grid)?;
    let split = schedule
        .iter()
        .position(|c| *c >= chi_h)
        .unwrap_or(schedule.len());
    let mut points: Vec<SweepPoint> = Vec::with_capacity(schedule.len());
    for &chi in &schedule[..split] {
        let p = params.with_chi(chi);
        let state = equilibrium_state(&p, grid);
        points.push(SweepPoint {
            chi,
            metrics: spike_metrics(&state, &p, grid)?,
            state,
            nonconstant: false,
        });
    }
    let upper = &schedule[split..];
    let Some(&top) = upper.last() else {
        return Ok(SweepResult {
            points,
            seed_d1: params.d1,
            failure: None,
        });
    };
    let (mut state, seed_d1) = match seed(params, grid, k, top, opts) {
        Ok(s) => s,
        Err(e) => {
            return Ok(SweepResult {
                points,
                seed_d1: params.d1,
                failure: Some((top, e)),
            })
        }
    };
    let mut failure = None;
    let mut found = Vec::with_capacity(upper.len());
    let mut prev_chi = top;
    for &chi in upper.iter().rev() {
        if chi != top {
            match track(&state, prev_chi, chi, |x| params.with_chi(x), grid, opts) {
                Ok(s) => state = s,
                Err(e) => {
                    failure = Some((chi, e));
                    break;
                }
            }
        }
        let p = params.with_chi(chi);
        found.push(SweepPoint {
            chi,
            metrics: spike_metrics(&state, &p, grid)?,
            state: state.clone(),
            nonconstant: true,
        });
        prev_chi = chi;
    }
    found.reverse();
    points.extend(found);
    Ok(SweepResult {
        points,
        seed_d1,
        failure,
    })
}

/// Max-norm residual of the limit system
/// `u' − aΦ(u,v)v' = 0`, `D2 v'' − v + h(u) = 0`: the first-order equation
/// at half-nodes (with the same Φ̄ as the flux), the second-order one at
/// nodes. For a branch point with χ/D1 = a the first part equals J/D1, with
/// J the discrete flux.
pub fn limit_residual(
    state: &StateField,
    ratio_a: f64,
    params: &ModelParams,
    grid: &Grid,
) -> Result<f64> {
    state.check_grid(grid)?;
    let h = grid.spacing();
    let kin = &params.kinetics;
    let (u, v) = (&state.u, &state.v);
    let first = (0..grid.n_cells()).fold(0.0f64, |m, j| {
        let phi = 0.5 * (kin.phi(u[j], v[j]).value + kin.phi(u[j + 1], v[j + 1]).value);
        m.max(((u[j + 1] - u[j]) - ratio_a * phi * (v[j + 1] - v[j])).abs() / h)
    });
    let second = max_norm(&residual_field(state, params, grid)?.v);
    Ok(first.max(second))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitSolution {
    pub ratio_a: f64,
    /// Prescribed ∫u.
    pub mass: f64,
    /// C in u = C·e^{a v}.
    pub constant_c: f64,
    pub state: StateField,
    pub residual_norm: f64,
    pub outer_iterations: usize,
}

/// Neumann problem D2 v'' − v + βC e^{av} = 0 by damped Newton.
fn solve_v(
    c: f64,
    a: f64,
    beta: f64,
    params: &ModelParams,
    grid: &Grid,
    v0: &[f64],
) -> Result<Vec<f64>> {
    let n = grid.n_nodes();
    let h = grid.spacing();
    let g = |v: &[f64]| -> Vec<f64> {
        let mut r = vec![0.0; n];
        for j in 0..n - 1 {
            let f = params.d2 * (v[j + 1] - v[j]) / h;
            r[j] += f;
            r[j + 1] -= f;
        }
        for (i, ri) in r.iter_mut().enumerate() {
            *ri = *ri / grid.weight(i) - v[i] + beta * c * (a * v[i]).exp();
        }
        r
    };
    let mut v = v0.to_vec();
    let mut r = g(&v);
    let mut norm = max_norm(&r);
    for it in 0..50 {
        let scale = 1.0 + v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if norm <= 1e-13 * scale {
            return Ok(v);
        }
        let mut jac = BandMatrix::zeros(n, 1, 1);
        for j in 0..n - 1 {
            let d = params.d2 / h;
            for (row, sign) in [(j, 1.0), (j + 1, -1.0)] {
                let w = grid.weight(row);
                jac.add(row, j + 1, sign * d / w);
                jac.add(row, j, -sign * d / w);
            }
        }
        for i in 0..n {
            jac.add(i, i, -1.0 + a * beta * c * (a * v[i]).exp());
        }
        let step = jac.lu()?.solve(&r);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = v.iter().zip(&step).map(|(x, d)| x - t * d).collect();
            let rt = g(&trial);
            let nt = max_norm(&rt);
            if (nt.is_finite() && nt <= norm) || t < 1e-3 {
                v = trial;
                r = rt;
                norm = nt;
                break;
            }
            t *= 0.5;
        }
        if !norm.is_finite() {
            return Err(Error::NonFinite);
        }
        if it == 49 {
            break;
        }
    }
    Err(Error::NonConvergence {
        iterations: 50,
        residual: norm,
    })
}

/// Solves the limit system for Φ = u, h = βu with ∫u = `mass_m`.
///
/// For Φ = u the first-order equation integrates to u = C·e^{a v}; the
/// remaining scalar problem for v is solved by Newton and C is adjusted by a
/// secant iteration on log C to meet the mass. Existence of nonconstant
/// solutions is not guaranteed, so large a may legitimately fail.
pub fn solve_limit_linear(
    ratio_a: f64,
    mass_m: f64,
    params: &ModelParams,
    grid: &Grid,
) -> Result<LimitSolution> {
    let beta = params
        .kinetics
        .linear_beta()
        .ok_or(Error::UnsupportedKinetics)?;
    if !(ratio_a >= 0.0 && ratio_a.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "a",
            value: ratio_a,
            reason: "must be nonnegative",
        });
    }
    if !(mass_m > 0.0 && mass_m.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "mass",
            value: mass_m,
            reason: "must be positive",
        });
    }
    let n = grid.n_nodes();
    let finish = |c: f64, v: Vec<f64>, iters: usize| -> Result<LimitSolution> {
        let u = v.iter().map(|x| c * (ratio_a * x).exp()).collect();
        let state = StateField::new(u, v)?;
        Ok(LimitSolution {
            ratio_a,
            mass: mass_m,
            constant_c: c,
            residual_norm: limit_residual(&state, ratio_a, params, grid)?,
            state,
            outer_iterations: iters,
        })
    };
    let level = mass_m / grid.length();
    if ratio_a == 0.0 {
        return finish(level, vec![beta * level; n], 0);
    }

    // g(t) = log ∫u − log m as a function of t = log C
    let mut v = vec![beta * level; n];
    let eval = |t: f64, v: &mut Vec<f64>| -> Result<f64> {
        *v = solve_v(t.exp(), ratio_a, beta, params, grid, v)?;
        let u: Vec<f64> = v.iter().map(|x| t.exp() * (ratio_a * x).exp()).collect();
        Ok(grid.integrate(&u).ln() - mass_m.ln())
    };
    let mut t0 = level.ln() - ratio_a * beta * level;
    let mut g0 = eval(t0, &mut v)?;
    let mut t1 = t0 - g0;
    for it in 1..=60 {
        let g1 = eval(t1, &mut v)?;
        if !g1.is_finite() {
            return Err(Error::NonFinite);
        }
        if g1.abs() <= 1e-14 {
            return finish(t1.exp(), v, it);
        }
        let slope = (g1 - g0) / (t1 - t0);
        if !(slope.is_finite() && slope != 0.0) {
            break;
        }
        t0 = t1;
        g0 = g1;
        t1 -= g1 / slope;
    }
    Err(Error::NonConvergence {
        iterations: 60,
        residual: g0.abs(),
    })
}

/// Proximity of a state to the two-level step profile ū·1[0, x*) with
/// x* = u*L/ū and u* = ∫u/L, which large-χ monotone solutions cannot
/// approach unless u* is 0 or ū.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepExclusion {
    /// ∫u / L.
    pub u_star: f64,
    /// x* = u*L/ū.
    pub edge: f64,
    /// ∫|u − step| / ∫step.
    pub l1_distance: f64,
    /// u* ∈ (0.1ū, 0.9ū) and l1_distance ≤ 10%.
    pub flagged: bool,
    pub reflected: bool,
}

/// ∫|f| over [0, dx] for f linear between f0 and f1.
fn abs_linear(f0: f64, f1: f64, dx: f64) -> f64 {
    if f0 * f1 >= 0.0 {
        0.5 * (f0.abs() + f1.abs()) * dx
    } else {
        0.5 * (f0 * f0 + f1 * f1) / (f0.abs() + f1.abs()) * dx
    }
}

pub fn step_exclusion_check(
    state: &StateField,
    params: &ModelParams,
    grid: &Grid,
) -> Result<StepExclusion> {
    state.check_grid(grid)?;
    let (s, reflected) = canonical(state);
    let u = &s.u;
    let ubar = params.ubar;
    let len = grid.length();
    let mass = grid.integrate(u);
    let u_star = mass / len;
    let edge = u_star * len / ubar;
    let step = |x: f64| if x < edge { ubar } else { 0.0 };
    // piecewise-linear u against the step, splitting the cell holding the edge
    let mut dist = 0.0;
    for j in 0..grid.n_cells() {
        let (x0, x1) = (grid.x(j), grid.x(j + 1));
        if x0 < edge && edge < x1 {
            let ue = u[j] + (u[j + 1] - u[j]) * (edge - x0) / (x1 - x0);
            dist += abs_linear(u[j] - ubar, ue - ubar, edge - x0);
            dist += abs_linear(ue, u[j + 1], x1 - edge);
        } else {
            let s0 = step(0.5 * (x0 + x1));
            dist += abs_linear(u[j] - s0, u[j + 1] - s0, x1 - x0);
        }
    }
    let l1_distance = if mass > 0.0 {
        dist / mass
    } else {
        f64::INFINITY
    };
    Ok(StepExclusion {
        u_star,
        edge,
        l1_distance,
        flagged: u_star > 0.1 * ubar && u_star < 0.9 * ubar && l1_distance <= 0.1,
        reflected,
    })
}
