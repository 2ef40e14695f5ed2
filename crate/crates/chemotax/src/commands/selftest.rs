use chemotax_core::continuation::{default_bracket, detect_bifurcation};
use chemotax_core::discrete::{
    discrete_bifurcation_value, discrete_eigenmode, equilibrium_state, jacobian, max_norm,
    residual, residual_field,
};
use chemotax_core::evolution::random_cosine_field;
use chemotax_core::linear::amplitude_ratio;
use chemotax_core::pitchfork::{k3_closed_form, k3_fourier};
use chemotax_core::{Grid, ModelParams, StateField};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

/// Parameters filled in when the user gives none.
pub const SELFTEST_DEFAULTS: &[(&str, &str)] = &[
    ("D1", "1"),
    ("D2", "1"),
    ("chi", "0"),
    ("ubar", "1"),
    ("beta", "1"),
    ("L", "3.141592653589793"),
    ("N", "64"),
];

struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check {
        name,
        passed,
        detail,
    }
}

fn equilibria(p: &ModelParams, g: &Grid) -> Result<Check> {
    let eq = max_norm(&residual(&equilibrium_state(p, g), p, g)?);
    let zero = max_norm(&residual(&StateField::constant(g.n_nodes(), 0.0, 0.0), p, g)?);
    let tol = 1e-14 * (1.0 + p.ubar * p.ubar + p.vbar().abs());
    Ok(check(
        "equilibrium residuals",
        eq <= tol && zero == 0.0,
        format!("|F(ubar, vbar)| = {eq:.2e}, |F(0, 0)| = {zero:.2e}"),
    ))
}

fn test_state(p: &ModelParams, g: &Grid, seed: u64) -> StateField {
    let base = equilibrium_state(p, g);
    base.axpy(0.3 * p.ubar, &random_cosine_field(g, 0, seed))
}

fn jacobian_fd(p: &ModelParams) -> Result<Check> {
    let g = Grid::new(p.length, 32)?;
    let s = test_state(&p.with_chi(p.chi.max(1.0)), &g, 17);
    let q = p.with_chi(p.chi.max(1.0));
    let j = jacobian(&s, &q, &g)?;
    let z = s.to_interleaved();
    let scale = j.max_abs();
    let mut worst = 0.0f64;
    for col in 0..z.len() {
        let h = 1e-6 * z[col].abs().max(1.0);
        let (mut zp, mut zm) = (z.clone(), z.clone());
        zp[col] += h;
        zm[col] -= h;
        let rp = residual(&StateField::from_interleaved(&zp), &q, &g)?;
        let rm = residual(&StateField::from_interleaved(&zm), &q, &g)?;
        for row in 0..z.len() {
            let fd = (rp[row] - rm[row]) / (2.0 * h);
            worst = worst.max((fd - j.get(row, col)).abs() / scale);
        }
    }
    Ok(check(
        "jacobian vs central differences (N = 32)",
        worst <= 1e-6,
        format!("max relative entry error {worst:.2e}"),
    ))
}

fn conservation(p: &ModelParams, g: &Grid) -> Result<Check> {
    let q = p.with_chi(p.chi.max(1.0));
    let s = test_state(&q, g, 5);
    let r = residual_field(&s, &q, g)?;
    let reaction: Vec<f64> = s.u.iter().map(|u| (q.ubar - u) * u).collect();
    let d = (g.integrate(&r.u) - g.integrate(&reaction)).abs();
    let scale = q.length * max_norm(&r.u).max(max_norm(&reaction)).max(1.0);
    Ok(check(
        "flux telescoping",
        d <= 1e-12 * scale,
        format!("|sum w R_u - sum w (ubar - u) u| = {d:.2e}"),
    ))
}

fn bifurcation_values(p: &ModelParams, g: &Grid) -> Result<Check> {
    let mut worst = 0.0f64;
    let mut null = 0.0f64;
    for k in 1..=3 {
        let closed = discrete_bifurcation_value(p, k, g)?;
        let found = detect_bifurcation(p, g, k, default_bracket(p, k)?)?;
        worst = worst.max((found - closed).abs() / closed);
        let q = p.with_chi(closed);
        let j = jacobian(&equilibrium_state(&q, g), &q, g)?;
        let e = discrete_eigenmode(&q, k, g)?;
        null = null.max(max_norm(&j.matvec(&e.to_interleaved())) / j.max_abs());
    }
    Ok(check(
        "chi_k^h located vs closed form, null modes (k = 1..3)",
        worst <= 1e-10 && null <= 1e-12,
        format!("max relative gap {worst:.2e}, max |J e|/|J| {null:.2e}"),
    ))
}

fn k3(p: &ModelParams) -> Result<Option<Check>> {
    if !p.kinetics.is_linear() {
        return Ok(None);
    }
    let mut ok = true;
    let mut detail = Vec::new();
    for k in 1..=3 {
        let (c, f) = match (k3_closed_form(p, k), k3_fourier(p, k)) {
            (Ok(c), Ok(f)) => (c, f),
            _ => {
                detail.push(format!("k={k} singular"));
                continue;
            }
        };
        let q = amplitude_ratio(p, k)?;
        let p0_ok = (f.fields.p0 + q * q / (2.0 * p.ubar)).abs() <= 1e-12 * f.fields.p0.abs();
        ok &= c.k3.signum() == f.k3.signum() && p0_ok;
        detail.push(format!("k={k}: {:.4e} vs {:.4e}", c.k3, f.k3));
    }
    Ok(Some(check(
        "K3 closed form vs Fourier (sign), p0 identity",
        ok,
        detail.join("; "),
    )))
}

pub fn selftest(config: &ExperimentConfig) -> Result<()> {
    let p = &config.params;
    let g = Grid::new(p.length, config.n)?;
    let mut checks = vec![
        equilibria(p, &g)?,
        jacobian_fd(p)?,
        conservation(p, &g)?,
        bifurcation_values(p, &g)?,
    ];
    checks.extend(k3(p)?);
    println!("{:<6} {:<55} detail", "result", "check");
    for c in &checks {
        println!(
            "{:<6} {:<55} {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed == 0 {
        println!("all {} checks passed", checks.len());
        Ok(())
    } else {
        Err(CliError::Aborted(format!("{failed} self-test check(s) failed")))
    }
}
