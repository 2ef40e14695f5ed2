use chemotax_core::asymptotics::{step_exclusion_check, sweep_chi, SweepOptions};
use chemotax_core::discrete::discrete_bifurcation_value;
use chemotax_core::linear::bifurcation_value;
use serde_json::{json, Value};

use super::grid;
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::output::{jnum, num, out_path, write_json, Csv, Header};

/// `points` geometric values from 1.05·χ_k^h to `top`.
pub fn schedule(chi_h: f64, top: f64, points: usize) -> Vec<f64> {
    let lo = 1.05 * chi_h;
    (0..points)
        .map(|i| lo * (top / lo).powf(i as f64 / (points - 1) as f64))
        .collect()
}

pub fn sweep(config: &ExperimentConfig) -> Result<()> {
    let p = &config.params;
    let g = grid(config)?;
    let k = config.k;
    let chi_h = discrete_bifurcation_value(p, k, &g)?;
    let top = match config.chi_max {
        Some(c) => c,
        None => 50.0 * bifurcation_value(p, k)?,
    };
    if top <= 1.05 * chi_h {
        return Err(CliError::config(
            "chi_max",
            format!("must exceed 1.05 chi_k^h = {}", 1.05 * chi_h),
        ));
    }
    let sched = schedule(chi_h, top, config.points);
    let res = sweep_chi(p, &g, k, &sched, &SweepOptions::default())?;

    let header = Header::new("sweep", config)
        .note(format!("schedule: {} geometric values from 1.05 chi_k^h = {} to {top}", config.points, 1.05 * chi_h))
        .note("peak_ratio = u(0)/ubar; half_width = first x with u <= (u(0)+u(L))/2 (interpolated)")
        .note("tail_sup = max u on [L/2, L]; step_flag = close (10% in L1) to a step of intermediate mass")
        .note(format!("seed branch computed at D1 = {}", res.seed_d1));
    let mut csv = Csv::new(
        &header,
        &["chi", "D1", "peak_ratio", "half_width", "mass", "tail_sup", "step_flag"],
    );
    let mut rows = Vec::new();
    let mut step_flags = Vec::new();
    for pt in &res.points {
        let step = step_exclusion_check(&pt.state, &p.with_chi(pt.chi), &g)?;
        if step.flagged {
            step_flags.push(pt.chi);
        }
        let m = pt.metrics;
        csv.row([
            num(pt.chi),
            num(p.d1),
            num(m.peak_ratio),
            num(m.half_width),
            num(m.mass),
            num(m.tail_sup),
            step.flagged.to_string(),
        ]);
        rows.push(json!({
            "chi": jnum(pt.chi),
            "nonconstant": pt.nonconstant,
            "profile_flagged": m.flagged,
            "min_u": jnum(m.min_u),
            "step_u_star": jnum(step.u_star),
            "step_l1_distance": jnum(step.l1_distance),
            "step_flag": step.flagged,
        }));
    }
    let csv_path = out_path(config, "sweep.csv");
    csv.write(&csv_path)?;
    let summary = json!({
        "k": k,
        "chi_bifurcation": jnum(chi_h),
        "seed_d1": jnum(res.seed_d1),
        "completed": res.completed(),
        "failure": res.failure.as_ref().map(|(chi, e)| json!({"chi": jnum(*chi), "error": e.to_string()})),
        "config": config.resolved.iter().map(|(a, v)| (a.clone(), Value::String(v.clone()))).collect::<serde_json::Map<_, _>>(),
        "points": rows,
    });
    let json_path = out_path(config, "sweep.json");
    write_json(&json_path, &summary)?;

    let flagged = res.points.iter().filter(|pt| pt.metrics.flagged).count();
    println!(
        "{} of {} schedule points computed; {flagged} with non-monotone or sign-changing profiles",
        res.points.len(),
        sched.len()
    );
    for chi in &step_flags {
        println!("WARNING: step-exclusion flag raised at chi = {chi}");
    }
    println!("wrote {}, {}", csv_path.display(), json_path.display());
    match res.failure {
        Some((chi, e)) => Err(CliError::Aborted(format!(
            "sweep stopped at chi = {chi}: {e} (partial results written)"
        ))),
        None => Ok(()),
    }
}
