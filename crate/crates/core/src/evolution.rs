//! Time integration of the parabolic system
//!
//! ```text
//! u_t = (D1 u_x − χΦ(u,v) v_x)_x + u(ū − u),   v_t = D2 v_xx − v + h(u)
//! ```
//!
//! on the same conservative grid as the stationary solver, so that discrete
//! steady states of the solver are exact fixed points of both time schemes.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::continuation::BranchPoint;
use crate::discrete::{jacobian, max_norm, residual};
use crate::error::{Error, Result};
use crate::grid::{Grid, StateField};
use crate::kinetics::ModelParams;
use crate::newton::{newton_solve, NewtonOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Diffusion and linear decay implicit, chemotaxis and logistic terms
    /// explicit.
    SemiImplicit,
    /// Backward Euler solved by Newton.
    FullyImplicit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub t_final: f64,
    pub scheme: Scheme,
    /// Perturbation amplitude used by the stability probes.
    pub perturb_eps: f64,
    /// |rate| below this is inconclusive.
    pub rate_tol: f64,
    pub seed: u64,
    /// Mode left out of random probe perturbations.
    pub probe_mode: u32,
    /// Probes stop once the perturbation has grown by this factor.
    pub growth_cap: f64,
    /// Record every n-th step (the first and last are always recorded).
    pub sample_every: usize,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_final: 10.0,
            scheme: Scheme::SemiImplicit,
            perturb_eps: 1e-3,
            rate_tol: 1e-4,
            seed: 0,
            probe_mode: 1,
            growth_cap: 20.0,
            sample_every: 1,
        }
    }
}

impl EvolutionConfig {
    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "dt",
                value: self.dt,
                reason: "must be positive",
            });
        }
        if !(self.t_final >= self.dt) {
            return Err(Error::InvalidParameter {
                name: "t_final",
                value: self.t_final,
                reason: "must be at least dt",
            });
        }
        Ok(())
    }

    fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round().max(1.0) as usize
    }
}

/// Largest dt allowed by the advection bound 0.4·h/max|χ (Φ̄/ū) v_x| for the
/// semi-implicit scheme; infinite when there is no transport.
pub fn advection_dt_limit(state: &StateField, params: &ModelParams, grid: &Grid) -> f64 {
    let h = grid.spacing();
    let kin = &params.kinetics;
    let mut speed = 0.0f64;
    for j in 0..grid.n_cells() {
        let phibar = 0.5
            * (kin.phi(state.u[j], state.v[j]).value
                + kin.phi(state.u[j + 1], state.v[j + 1]).value);
        let ubar = 0.5 * (state.u[j] + state.u[j + 1]);
        if phibar <= 0.0 || ubar <= 0.0 {
            continue;
        }
        let vx = (state.v[j + 1] - state.v[j]) / h;
        speed = speed.max(params.chi * phibar / ubar * vx.abs());
    }
    if speed == 0.0 {
        f64::INFINITY
    } else {
        0.4 * h / speed
    }
}

/// Solves (I − dt·c·Δ_h + dt·d·I) x = rhs for the Neumann Laplacian in
/// control-volume form.
fn implicit_diffusion(grid: &Grid, c: f64, d: f64, dt: f64, rhs: &[f64]) -> Vec<f64> {
    let n = grid.n_nodes();
    let h = grid.spacing();
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 0..n {
        let w = grid.weight(i);
        let g = dt * c / (h * w);
        diag[i] = 1.0 + dt * d;
        if i > 0 {
            lower[i] = -g;
            diag[i] += g;
        }
        if i + 1 < n {
            upper[i] = -g;
            diag[i] += g;
        }
    }
    // Thomas algorithm; the matrix is strictly diagonally dominant
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = upper[0] / diag[0];
    dp[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * cp[i - 1];
        cp[i] = upper[i] / m;
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

/// Explicit part of the u-equation: −(χΦ̄ v_x)_x + (ū − u)u.
fn explicit_u(state: &StateField, params: &ModelParams, grid: &Grid) -> Vec<f64> {
    let n = grid.n_nodes();
    let h = grid.spacing();
    let kin = &params.kinetics;
    let phi: Vec<f64> = state
        .u
        .iter()
        .zip(&state.v)
        .map(|(&a, &b)| kin.phi(a, b).value)
        .collect();
    let mut out = vec![0.0; n];
    for j in 0..n - 1 {
        let flux = -params.chi * 0.5 * (phi[j] + phi[j + 1]) * (state.v[j + 1] - state.v[j]) / h;
        out[j] += flux;
        out[j + 1] -= flux;
    }
    for i in 0..n {
        out[i] = out[i] / grid.weight(i) + (params.ubar - state.u[i]) * state.u[i];
    }
    out
}

/// One time step.
pub fn step(
    state: &StateField,
    params: &ModelParams,
    grid: &Grid,
    dt: f64,
    scheme: Scheme,
) -> Result<StateField> {
    state.check_grid(grid)?;
    match scheme {
        Scheme::SemiImplicit => {
            let limit = advection_dt_limit(state, params, grid);
            if dt > limit {
                return Err(Error::StepRejected {
                    dt,
                    suggested: limit,
                });
            }
            let eu = explicit_u(state, params, grid);
            let rhs_u: Vec<f64> = state.u.iter().zip(&eu).map(|(u, e)| u + dt * e).collect();
            let u = implicit_diffusion(grid, params.d1, 0.0, dt, &rhs_u);
            let rhs_v: Vec<f64> = state
                .v
                .iter()
                .zip(&state.u)
                .map(|(v, &u)| v + dt * params.kinetics.h(u).value)
                .collect();
            let v = implicit_diffusion(grid, params.d2, 1.0, dt, &rhs_v);
            let out = StateField { u, v };
            if out.is_finite() {
                Ok(out)
            } else {
                Err(Error::NonFinite)
            }
        }
        Scheme::FullyImplicit => backward_euler(state, params, grid, dt),
    }
}

fn backward_euler(
    state: &StateField,
    params: &ModelParams,
    grid: &Grid,
    dt: f64,
) -> Result<StateField> {
    let z0 = state.to_interleaved();
    let mut z = z0.clone();
    let scale = max_norm(&z0).max(1.0);
    for _ in 0..30 {
        let s = StateField::from_interleaved(&z);
        let r = residual(&s, params, grid)?;
        // G(z) = dt·R(z) − (z − z0)
        let g: Vec<f64> = r
            .iter()
            .zip(&z)
            .zip(&z0)
            .map(|((r, z), z0)| dt * r - (z - z0))
            .collect();
        if max_norm(&g) <= 1e-14 * scale {
            return Ok(s);
        }
        let mut jac = jacobian(&s, params, grid)?;
        jac.scale(dt);
        jac.shift_diagonal(-1.0);
        let mut d = g;
        jac.lu()?.solve_in_place(&mut d);
        let mut small = true;
        for (zi, di) in z.iter_mut().zip(&d) {
            *zi -= di;
            small &= di.abs() <= 1e-15 * scale;
        }
        if small {
            return Ok(StateField::from_interleaved(&z));
        }
    }
    let s = StateField::from_interleaved(&z);
    let r = residual(&s, params, grid)?;
    let g: f64 = r
        .iter()
        .zip(&z)
        .zip(&z0)
        .map(|((r, z), z0)| (dt * r - (z - z0)).abs())
        .fold(0.0, f64::max);
    if g <= 1e-10 * scale {
        Ok(s)
    } else {
        Err(Error::NonConvergence {
            iterations: 30,
            residual: g,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// ‖u − ū‖∞.
    pub norm_u: Vec<f64>,
    /// ‖v − v̄‖∞.
    pub norm_v: Vec<f64>,
    pub min_u: Vec<f64>,
    pub u0: Vec<f64>,
    pub final_state: StateField,
}

pub fn evolve(
    state: &StateField,
    params: &ModelParams,
    grid: &Grid,
    config: &EvolutionConfig,
) -> Result<Trajectory> {
    config.validate()?;
    state.check_grid(grid)?;
    let (ub, vb) = (params.ubar, params.vbar());
    let mut traj = Trajectory {
        times: Vec::new(),
        norm_u: Vec::new(),
        norm_v: Vec::new(),
        min_u: Vec::new(),
        u0: Vec::new(),
        final_state: state.clone(),
    };
    let record = |t: f64, s: &StateField, tr: &mut Trajectory| {
        tr.times.push(t);
        tr.norm_u
            .push(s.u.iter().fold(0.0f64, |m, u| m.max((u - ub).abs())));
        tr.norm_v
            .push(s.v.iter().fold(0.0f64, |m, v| m.max((v - vb).abs())));
        tr.min_u
            .push(s.u.iter().cloned().fold(f64::INFINITY, f64::min));
        tr.u0.push(s.u[0]);
    };
    let n = config.n_steps();
    let every = config.sample_every.max(1);
    let mut s = state.clone();
    record(0.0, &s, &mut traj);
    for i in 1..=n {
        s = step(&s, params, grid, config.dt, config.scheme)?;
        if i % every == 0 || i == n {
            record(i as f64 * config.dt, &s, &mut traj);
        }
    }
    traj.final_state = s;
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Decayed,
    Grew,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityProbe {
    pub base: StateField,
    pub growth_rate: f64,
    pub verdict: Verdict,
    pub times: Vec<f64>,
    /// ∫(δu² + δv²) dx, square-rooted, of the deviation from the base.
    pub norms: Vec<f64>,
    /// The run stopped early because the perturbation passed the growth cap.
    pub capped: bool,
}

fn verdict_for(rate: f64, tol: f64) -> Verdict {
    if rate < -tol {
        Verdict::Decayed
    } else if rate > tol {
        Verdict::Grew
    } else {
        Verdict::Inconclusive
    }
}

/// Least-squares slope of ln(norm) against t over the tail half.
pub fn tail_log_slope(times: &[f64], norms: &[f64]) -> f64 {
    let start = times.len() / 2;
    let pts: Vec<(f64, f64)> = times[start..]
        .iter()
        .zip(&norms[start..])
        .filter(|(_, n)| **n > 0.0)
        .map(|(t, n)| (*t, n.ln()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let m = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let num: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - tm) * (p.0 - tm)).sum();
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Zero-mean mixture of cos(jπx/L), j = 1..=8 with j ≠ `exclude`, scaled so
/// that max|δu| = 1; the v-part uses independent coefficients.
pub fn random_cosine_field(grid: &Grid, exclude: u32, seed: u64) -> StateField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.n_nodes();
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    for j in (1..=8u32).filter(|&j| j != exclude) {
        let (a, b): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let c = crate::discrete::cosine_mode(j, grid);
        for i in 0..n {
            u[i] += a * c[i];
            v[i] += b * c[i];
        }
    }
    let s = u
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    u.iter_mut().for_each(|x| *x /= s);
    v.iter_mut().for_each(|x| *x /= s);
    StateField { u, v }
}

fn run_probe(
    base: StateField,
    perturbation: &StateField,
    params: &ModelParams,
    grid: &Grid,
    config: &EvolutionConfig,
) -> Result<StabilityProbe> {
    config.validate()?;
    let deviation = |s: &StateField| -> f64 {
        let d = s.axpy(-1.0, &base);
        d.dot(&d, grid).sqrt()
    };
    let mut s = base.axpy(config.perturb_eps, perturbation);
    let n0 = deviation(&s);
    let mut times = vec![0.0];
    let mut norms = vec![n0];
    let mut capped = false;
    if n0 > 0.0 {
        // stop before round-off in the deviation contaminates the fit
        let floor = 1e-9 * base.dot(&base, grid).sqrt().max(1.0);
        let n = config.n_steps();
        let every = config.sample_every.max(1);
        for i in 1..=n {
            s = step(&s, params, grid, config.dt, config.scheme)?;
            if i % every == 0 || i == n {
                let d = deviation(&s);
                times.push(i as f64 * config.dt);
                norms.push(d);
                if d > config.growth_cap * n0 {
                    capped = true;
                    break;
                }
                if d < floor {
                    break;
                }
            }
        }
    }
    let growth_rate = if n0 > 0.0 {
        tail_log_slope(&times, &norms)
    } else {
        0.0
    };
    Ok(StabilityProbe {
        base,
        growth_rate,
        verdict: verdict_for(growth_rate, config.rate_tol),
        times,
        norms,
        capped,
    })
}

/// Nonlinear stability probe of a stationary branch point: polish the state,
/// add a random zero-mean perturbation of size `perturb_eps` without the
/// probe mode, evolve, and fit the decay/growth rate of the deviation.
pub fn probe_stability(
    steady: &BranchPoint,
    params: &ModelParams,
    grid: &Grid,
    config: &EvolutionConfig,
) -> Result<StabilityProbe> {
    let p = params.with_chi(steady.chi);
    let polish = NewtonOptions {
        tol: 1e-12,
        ..Default::default()
    };
    let base = match newton_solve(&steady.state, &p, grid, &polish) {
        Ok(sol) if sol.state.max_abs_diff(&steady.state) < 1e-6 => sol.state,
        _ => steady.state.clone(),
    };
    let pert = random_cosine_field(grid, config.probe_mode, config.seed);
    run_probe(base, &pert, &p, grid, config)
}

/// Linear-regime probe of the constant state along the continuum eigenmode
/// (Q_k cos, cos); the fitted rate approximates max Re λ(H_k).
pub fn linear_rate_probe(
    params: &ModelParams,
    grid: &Grid,
    k: u32,
    config: &EvolutionConfig,
) -> Result<StabilityProbe> {
    let base = crate::discrete::equilibrium_state(params, grid);
    let mode = crate::linear::eigenmode(params, k, grid)?;
    run_probe(base, &mode, params, grid, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn unit(chi: f64) -> ModelParams {
        ModelParams::linear(1.0, 1.0, chi, 1.0, 1.0, PI).unwrap()
    }

    #[test]
    fn equilibria_are_fixed_points() {
        let p = unit(3.0);
        let g = Grid::new(PI, 50).unwrap();
        for scheme in [Scheme::SemiImplicit, Scheme::FullyImplicit] {
            let eq = crate::discrete::equilibrium_state(&p, &g);
            let s = step(&eq, &p, &g, 0.01, scheme).unwrap();
            assert!(s.max_abs_diff(&eq) <= 1e-14);
            let zero = StateField::constant(51, 0.0, 0.0);
            assert_eq!(step(&zero, &p, &g, 0.01, scheme).unwrap(), zero);
        }
    }

    #[test]
    fn advection_bound_rejects_large_steps() {
        let p = unit(50.0);
        let g = Grid::new(PI, 50).unwrap();
        let e = crate::linear::eigenmode(&p, 1, &g).unwrap();
        let s = crate::discrete::equilibrium_state(&p, &g).axpy(0.2, &e);
        let limit = advection_dt_limit(&s, &p, &g);
        match step(&s, &p, &g, 2.0 * limit, Scheme::SemiImplicit) {
            Err(Error::StepRejected { suggested, .. }) => assert_eq!(suggested, limit),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_perturbation_is_inconclusive() {
        let p = unit(2.0);
        let g = Grid::new(PI, 20).unwrap();
        let cfg = EvolutionConfig {
            perturb_eps: 0.0,
            t_final: 0.1,
            ..Default::default()
        };
        let pr = linear_rate_probe(&p, &g, 1, &cfg).unwrap();
        assert_eq!(pr.verdict, Verdict::Inconclusive);
        assert_eq!(pr.growth_rate, 0.0);
    }

    #[test]
    fn tail_slope_of_exponential() {
        let t: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        let n: Vec<f64> = t.iter().map(|t| 3.0 * (-0.7 * t).exp()).collect();
        assert!((tail_log_slope(&t, &n) + 0.7).abs() < 1e-12);
    }

    #[test]
    fn random_field_has_zero_mean_and_no_probe_mode() {
        let g = Grid::new(PI, 64).unwrap();
        let f = random_cosine_field(&g, 1, 7);
        assert!(g.integrate(&f.u).abs() < 1e-12);
        let c1 = crate::discrete::cosine_mode(1, &g);
        assert!(g.dot(&f.u, &c1).abs() < 1e-12);
        assert_eq!(f, random_cosine_field(&g, 1, 7));
    }
}
