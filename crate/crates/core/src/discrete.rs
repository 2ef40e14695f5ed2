//! Conservative finite-volume discretization of the stationary system on a
//! uniform grid, its exact Jacobian, and the discrete spectral quantities of
//! the Neumann Laplacian.
//!
//! Unknowns are interleaved per node, `z = [u0, v0, u1, v1, …]`, which makes
//! the Jacobian banded with two sub- and three super-diagonals.
//!
//! The cell flux is `J_{j+½} = D1 (u_{j+1} − u_j)/h − χ Φ̄_{j+½} (v_{j+1} − v_j)/h`
//! with `Φ̄` the arithmetic mean of the nodal values. The node residual is
//! `(J_{i+½} − J_{i−½}) / w_i + (ū − u_i) u_i`, where `w_i` is the control
//! volume width and the boundary fluxes are zero. Summing against `w_i`
//! telescopes the flux terms away, so `Σ w_i R_i = Σ w_i (ū − u_i) u_i`
//! holds to round-off for every state.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::grid::{Grid, StateField};
use crate::kinetics::ModelParams;

/// Sub-diagonals of the interleaved Jacobian.
pub const KL: usize = 2;
/// Super-diagonals of the interleaved Jacobian.
pub const KU: usize = 3;

fn check(state: &StateField, grid: &Grid) -> Result<()> {
    state.check_grid(grid)
}

/// Interleaved residual, 2(N+1) entries.
pub fn residual(state: &StateField, params: &ModelParams, grid: &Grid) -> Result<Vec<f64>> {
    check(state, grid)?;
    let n = grid.n_nodes();
    let h = grid.spacing();
    let (u, v) = (&state.u, &state.v);
    let kin = &params.kinetics;
    let phi: Vec<f64> = u
        .iter()
        .zip(v)
        .map(|(&a, &b)| kin.phi(a, b).value)
        .collect();

    let mut r = vec![0.0; 2 * n];
    // left/right fluxes accumulated cell by cell
    for j in 0..n - 1 {
        let dv = v[j + 1] - v[j];
        let ju =
            params.d1 * (u[j + 1] - u[j]) / h - params.chi * 0.5 * (phi[j] + phi[j + 1]) * dv / h;
        let jv = params.d2 * dv / h;
        r[2 * j] += ju;
        r[2 * (j + 1)] -= ju;
        r[2 * j + 1] += jv;
        r[2 * (j + 1) + 1] -= jv;
    }
    for i in 0..n {
        let w = grid.weight(i);
        r[2 * i] = r[2 * i] / w + (params.ubar - u[i]) * u[i];
        r[2 * i + 1] = r[2 * i + 1] / w - v[i] + kin.h(u[i]).value;
    }
    Ok(r)
}

/// Residual as a field pair (u-equation, v-equation).
pub fn residual_field(state: &StateField, params: &ModelParams, grid: &Grid) -> Result<StateField> {
    Ok(StateField::from_interleaved(&residual(
        state, params, grid,
    )?))
}

pub fn max_norm(r: &[f64]) -> f64 {
    r.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Smallest residual max-norm that round-off lets a solver reach at this
/// state: the node residual is a difference of terms of size ~ D/h², so on
/// fine grids an absolute tolerance must not go below a few ulps of them.
pub fn residual_floor(state: &StateField, params: &ModelParams, grid: &Grid) -> f64 {
    let h2 = grid.spacing() * grid.spacing();
    let kin = &params.kinetics;
    let umax = state.u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let vmax = state.v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let phimax = state
        .u
        .iter()
        .zip(&state.v)
        .fold(0.0f64, |m, (&a, &b)| m.max(kin.phi(a, b).value.abs()));
    let flux = (params.d1 * umax + params.chi * phimax * vmax + params.d2 * vmax) / h2;
    let reaction = (params.ubar + umax) * umax + vmax + kin.h(umax).value.abs();
    16.0 * f64::EPSILON * (flux + reaction)
}

/// Exact derivative of [`residual`] with respect to the interleaved unknowns.
pub fn jacobian(state: &StateField, params: &ModelParams, grid: &Grid) -> Result<BandMatrix> {
    check(state, grid)?;
    let n = grid.n_nodes();
    let h = grid.spacing();
    let (u, v) = (&state.u, &state.v);
    let kin = &params.kinetics;
    let chi = params.chi;
    let phis: Vec<_> = u.iter().zip(v).map(|(&a, &b)| kin.phi(a, b)).collect();

    let mut a = BandMatrix::zeros(2 * n, KL, KU);
    for j in 0..n - 1 {
        let (l, r) = (j, j + 1);
        let dv = v[r] - v[l];
        let phibar = 0.5 * (phis[l].value + phis[r].value);
        // dJ/d(u_l, u_r, v_l, v_r)
        let d_ul = -params.d1 / h - chi * 0.5 * phis[l].du * dv / h;
        let d_ur = params.d1 / h - chi * 0.5 * phis[r].du * dv / h;
        let d_vl = -chi * 0.5 * phis[l].dv * dv / h + chi * phibar / h;
        let d_vr = -chi * 0.5 * phis[r].dv * dv / h - chi * phibar / h;
        let (wl, wr) = (grid.weight(l), grid.weight(r));
        for (col, d) in [
            (2 * l, d_ul),
            (2 * r, d_ur),
            (2 * l + 1, d_vl),
            (2 * r + 1, d_vr),
        ] {
            a.add(2 * l, col, d / wl);
            a.add(2 * r, col, -d / wr);
        }
        let g = params.d2 / h;
        a.add(2 * l + 1, 2 * l + 1, -g / wl);
        a.add(2 * l + 1, 2 * r + 1, g / wl);
        a.add(2 * r + 1, 2 * l + 1, g / wr);
        a.add(2 * r + 1, 2 * r + 1, -g / wr);
    }
    for i in 0..n {
        a.add(2 * i, 2 * i, params.ubar - 2.0 * u[i]);
        a.add(2 * i + 1, 2 * i + 1, -1.0);
        a.add(2 * i + 1, 2 * i, kin.h(u[i]).d1);
    }
    Ok(a)
}

/// ∂(residual)/∂χ; only the u-rows depend on χ.
pub fn chi_derivative(state: &StateField, params: &ModelParams, grid: &Grid) -> Result<Vec<f64>> {
    check(state, grid)?;
    let n = grid.n_nodes();
    let h = grid.spacing();
    let kin = &params.kinetics;
    let mut d = vec![0.0; 2 * n];
    for j in 0..n - 1 {
        let phibar = 0.5
            * (kin.phi(state.u[j], state.v[j]).value
                + kin.phi(state.u[j + 1], state.v[j + 1]).value);
        let k = -phibar * (state.v[j + 1] - state.v[j]) / h;
        d[2 * j] += k;
        d[2 * (j + 1)] -= k;
    }
    for i in 0..n {
        d[2 * i] /= grid.weight(i);
    }
    Ok(d)
}

/// Eigenvalue of −Δ_h for cos(kπx/L) under the mirrored-ghost Neumann
/// stencil: `(4/h²) sin²(kπh/(2L))`.
pub fn laplacian_eigenvalue(k: u32, grid: &Grid) -> f64 {
    let h = grid.spacing();
    let s = (k as f64 * core::f64::consts::PI * h / (2.0 * grid.length())).sin();
    4.0 * s * s / (h * h)
}

fn equilibrium_slopes(params: &ModelParams) -> Result<(f64, f64)> {
    let phi = params.kinetics.phi(params.ubar, params.vbar()).value;
    let hp = params.kinetics.h(params.ubar).d1;
    let prod = phi * hp;
    if prod == 0.0 || !prod.is_finite() {
        return Err(Error::DegenerateKinetics(prod));
    }
    Ok((phi, hp))
}

/// Discrete amplitude ratio Q_k^h = (D2 Λ_k^h + 1)/h'(ū).
pub fn discrete_q(params: &ModelParams, k: u32, grid: &Grid) -> Result<f64> {
    if k == 0 {
        return Err(Error::ZeroMode);
    }
    let (_, hp) = equilibrium_slopes(params)?;
    Ok((params.d2 * laplacian_eigenvalue(k, grid) + 1.0) / hp)
}

/// Discrete bifurcation value χ_k^h: the continuum formula with (kπ/L)²
/// replaced by Λ_k^h.
pub fn discrete_bifurcation_value(params: &ModelParams, k: u32, grid: &Grid) -> Result<f64> {
    if k == 0 {
        return Err(Error::ZeroMode);
    }
    let (phi, hp) = equilibrium_slopes(params)?;
    let lam = laplacian_eigenvalue(k, grid);
    Ok((params.d1 * lam + params.ubar) * (params.d2 * lam + 1.0) / (phi * lam * hp))
}

/// Nodal cos(kπx_i/L).
pub fn cosine_mode(k: u32, grid: &Grid) -> Vec<f64> {
    let w = k as f64 * core::f64::consts::PI / grid.length();
    (0..grid.n_nodes())
        .map(|i| {
            // exact values at the ends avoid cos(kπ) round-off
            if i == 0 {
                1.0
            } else if i == grid.n_cells() {
                if k % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            } else {
                (w * grid.x(i)).cos()
            }
        })
        .collect()
}

/// Discrete null vector (Q_k^h cos, cos) of the linearization at χ_k^h.
pub fn discrete_eigenmode(params: &ModelParams, k: u32, grid: &Grid) -> Result<StateField> {
    let q = discrete_q(params, k, grid)?;
    let c = cosine_mode(k, grid);
    Ok(StateField {
        u: c.iter().map(|x| q * x).collect(),
        v: c,
    })
}

/// The positive constant state (ū, v̄) on the grid.
pub fn equilibrium_state(params: &ModelParams, grid: &Grid) -> StateField {
    StateField::constant(grid.n_nodes(), params.ubar, params.vbar())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit() -> ModelParams {
        ModelParams::linear(1.0, 1.0, 4.0, 1.0, 1.0, core::f64::consts::PI).unwrap()
    }

    fn random_state(n: usize, seed: u64) -> StateField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        StateField {
            u: (0..n).map(|_| rng.random_range(0.2..2.0)).collect(),
            v: (0..n).map(|_| rng.random_range(0.2..2.0)).collect(),
        }
    }

    #[test]
    fn equilibria_have_zero_residual() {
        let p = unit();
        let g = Grid::new(p.length, 40).unwrap();
        let r = residual(&equilibrium_state(&p, &g), &p, &g).unwrap();
        assert!(r.iter().all(|&x| x == 0.0));
        let r0 = residual(&StateField::constant(41, 0.0, 0.0), &p, &g).unwrap();
        assert!(r0.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn flux_terms_telescope() {
        let p = unit().with_chi(7.3);
        let g = Grid::new(p.length, 37).unwrap();
        let s = random_state(38, 5);
        let r = residual_field(&s, &p, &g).unwrap();
        let lhs = g.integrate(&r.u);
        let reac: Vec<f64> = s.u.iter().map(|u| (p.ubar - u) * u).collect();
        assert!((lhs - g.integrate(&reac)).abs() < 1e-12);
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let kin = crate::kinetics::ExpSaturating {
            gamma: 0.7,
            beta: 1.3,
            kappa: 0.4,
        }
        .into_spec()
        .unwrap();
        let p = ModelParams::new(0.8, 1.2, 3.0, 1.1, 2.0, kin).unwrap();
        let g = Grid::new(p.length, 32).unwrap();
        let s = random_state(33, 17);
        let jac = jacobian(&s, &p, &g).unwrap();
        let z = s.to_interleaved();
        let eps = 1e-6;
        let mut worst: f64 = 0.0;
        let scale = jac.max_abs();
        for c in 0..z.len() {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[c] += eps;
            zm[c] -= eps;
            let rp = residual(&StateField::from_interleaved(&zp), &p, &g).unwrap();
            let rm = residual(&StateField::from_interleaved(&zm), &p, &g).unwrap();
            for r in 0..z.len() {
                let fd = (rp[r] - rm[r]) / (2.0 * eps);
                worst = worst.max((fd - jac.get(r, c)).abs() / scale);
            }
        }
        assert!(worst <= 1e-6, "worst relative entry error {worst:e}");
    }

    #[test]
    fn chi_derivative_matches_difference() {
        let p = unit();
        let g = Grid::new(p.length, 20).unwrap();
        let s = random_state(21, 3);
        let d = chi_derivative(&s, &p, &g).unwrap();
        let rp = residual(&s, &p.with_chi(p.chi + 1.0), &g).unwrap();
        let r0 = residual(&s, &p, &g).unwrap();
        for i in 0..d.len() {
            // residual is affine in χ
            assert!((rp[i] - r0[i] - d[i]).abs() < 1e-9 * (1.0 + d[i].abs()));
        }
    }

    #[test]
    fn zero_chi_decouples_u_from_v() {
        let p = unit().with_chi(0.0);
        let g = Grid::new(p.length, 10).unwrap();
        let jac = jacobian(&random_state(11, 1), &p, &g).unwrap();
        for i in 0..11 {
            for j in 0..11 {
                assert_eq!(jac.get(2 * i, 2 * j + 1), 0.0);
            }
        }
    }

    #[test]
    fn cosine_is_discrete_eigenvector() {
        let g = Grid::new(2.5, 50).unwrap();
        let p = ModelParams::linear(1.0, 1.0, 0.0, 0.0001, 1.0, 2.5).unwrap();
        for k in 1..5 {
            // with ū≈0 and χ=0 the v-rows reduce to D2Δ_h v − v + βu; use u = 0
            let c = cosine_mode(k, &g);
            let s = StateField {
                u: vec![0.0; 51],
                v: c.clone(),
            };
            let r = residual_field(&s, &p, &g).unwrap();
            let lam = laplacian_eigenvalue(k, &g);
            for i in 0..51 {
                assert!((r.v[i] + (lam + 1.0) * c[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn discrete_value_converges_to_continuum() {
        let p = unit();
        let g = Grid::new(p.length, 4096).unwrap();
        assert!((discrete_bifurcation_value(&p, 1, &g).unwrap() - 4.0).abs() < 1e-6);
        assert!(discrete_q(&p, 0, &g).is_err());
    }
}
