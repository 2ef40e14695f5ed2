use chemotax_core::continuation::{
    continue_branch, Branch, BranchEvent, ContinuationOptions, Termination, ViolationKind,
};
use chemotax_core::linear::bifurcation_value;
use chemotax_core::newton::{newton_solve, NewtonOptions};
use serde_json::{json, Value};

use super::{grid, state_csv};
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::output::{jnum, num, out_path, write_json, Csv, Header};

fn event_json(e: &BranchEvent) -> Value {
    match *e {
        BranchEvent::Fold { index, chi } => json!({"kind": "fold", "index": index, "chi": jnum(chi)}),
        BranchEvent::Violation { index, chi, kind } => json!({
            "kind": match kind {
                ViolationKind::Positivity => "positivity",
                ViolationKind::MonotoneU => "monotone_u",
                ViolationKind::MonotoneV => "monotone_v",
            },
            "index": index,
            "chi": jnum(chi),
        }),
    }
}

fn branch_json(config: &ExperimentConfig, b: &Branch) -> Value {
    let points: Vec<Value> = b
        .points
        .iter()
        .map(|pt| {
            let d = pt.diagnostics;
            json!({
                "s": jnum(pt.arclength),
                "chi": jnum(pt.chi),
                "mode_coordinate": jnum(pt.mode_coordinate),
                "l1_mass": jnum(d.l1_mass),
                "l2_norm_sq": jnum(d.l2_norm_sq),
                "min_u": jnum(d.min_u),
                "max_u": jnum(d.max_u),
                "min_v": jnum(d.min_v),
                "monotone_u": d.monotone_u,
                "monotone_v": d.monotone_v,
                "newton_residual": jnum(d.newton_residual),
                "amplitude": jnum(d.amplitude),
                "lemma_defect": jnum(d.lemma_defect),
                "mass_bound_ok": d.mass_bound_ok,
            })
        })
        .collect();
    json!({
        "mode": b.mode,
        "chi_bifurcation": jnum(b.chi_bifurcation),
        "orientation": jnum(b.orientation),
        "terminated_by": format!("{:?}", b.terminated_by),
        "min_chi": jnum(b.min_chi()),
        "max_chi": jnum(b.max_chi()),
        "events": b.events.iter().map(event_json).collect::<Vec<_>>(),
        "config": config.resolved.iter().map(|(a, v)| (a.clone(), Value::String(v.clone()))).collect::<serde_json::Map<_, _>>(),
        "points": points,
    })
}

pub fn continue_(config: &ExperimentConfig) -> Result<()> {
    let p = &config.params;
    let g = grid(config)?;
    let k = config.k;
    let chi_max = match config.chi_max {
        Some(c) => c,
        None => 5.0 * bifurcation_value(p, k)?,
    };
    let opts = ContinuationOptions {
        chi_max,
        ..Default::default()
    };
    let b = continue_branch(p, &g, k, &opts)?;

    let json_path = out_path(config, "branch.json");
    write_json(&json_path, &branch_json(config, &b))?;
    let header = Header::new("continue", config)
        .note(format!("chi_max = {chi_max}; chi_k^h = {}", b.chi_bifurcation))
        .note(format!("terminated by {:?}", b.terminated_by))
        .note("amplitude = (max u - min u)/2; mass = integral of u (trapezoid)");
    let mut csv = Csv::new(
        &header,
        &["s", "chi", "amplitude", "u0", "uL", "min_u", "max_u", "mass"],
    );
    for pt in &b.points {
        let d = pt.diagnostics;
        csv.row([
            num(pt.arclength),
            num(pt.chi),
            num(d.amplitude),
            num(pt.state.u[0]),
            num(*pt.state.u.last().expect("nonempty state")),
            num(d.min_u),
            num(d.max_u),
            num(d.l1_mass),
        ]);
    }
    let csv_path = out_path(config, "branch.csv");
    csv.write(&csv_path)?;

    for &target in &config.snapshots {
        let Some(near) = b
            .points
            .iter()
            .min_by(|a, c| (a.chi - target).abs().total_cmp(&(c.chi - target).abs()))
        else {
            break;
        };
        if target < b.min_chi() || target > b.max_chi() {
            println!("snapshot chi = {target} lies outside the computed branch; skipped");
            continue;
        }
        let sol = newton_solve(&near.state, &p.with_chi(target), &g, &NewtonOptions::default())
            .map_err(|f| CliError::Numerical(f.error))?;
        let h = Header::new("continue", config).note(format!("state at chi = {target}"));
        let path = out_path(config, &format!("state_chi_{target}.csv"));
        state_csv(&h, &g, &sol.state).write(&path)?;
        println!("wrote {}", path.display());
    }

    println!(
        "k = {k}: {} points, chi in [{}, {}], terminated by {:?}",
        b.points.len(),
        b.min_chi(),
        b.max_chi(),
        b.terminated_by
    );
    for e in b.folds() {
        if let BranchEvent::Fold { chi, .. } = e {
            println!("fold near chi = {chi}");
        }
    }
    let violations: Vec<_> = b.violations().collect();
    if let Some(BranchEvent::Violation { chi, kind, .. }) = violations.first() {
        println!(
            "{} point(s) violate positivity/monotonicity; first ({kind:?}) at chi = {chi}",
            violations.len()
        );
    }
    println!("wrote {}, {}", json_path.display(), csv_path.display());
    match b.terminated_by {
        Termination::StepFailure => Err(CliError::Aborted(format!(
            "continuation stalled at chi = {} before reaching chi_max = {chi_max}",
            b.points.last().map_or(f64::NAN, |pt| pt.chi)
        ))),
        _ => Ok(()),
    }
}
