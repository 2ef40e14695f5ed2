use chemotax_core::linear::bifurcation_value;
use chemotax_core::pitchfork::{
    analyze_pitchfork, classify_region, cross_check, k3_fourier, stability_from_k3,
    SignInterval, Thresholds,
};
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::output::{jnum, num, out_path, write_json, Csv, Header};

const CHART_POINTS: usize = 40;

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

fn intervals(ivs: &[SignInterval]) -> Value {
    Value::Array(
        ivs.iter()
            .map(|iv| json!({"lo": jnum(iv.lo), "hi": jnum(iv.hi), "k3_positive": iv.positive}))
            .collect(),
    )
}

fn thresholds(t: &Thresholds) -> Value {
    json!({"a_zero": jnum(t.a_zero), "f_at_r3_zero": jnum(t.f_at_r3_zero), "double_root": jnum(t.double_root)})
}

pub fn pitchfork(config: &ExperimentConfig) -> Result<()> {
    let p = &config.params;
    if !p.kinetics.is_linear() {
        return Err(CliError::config(
            "kinetics",
            "pitchfork coefficients are only available for linear kinetics",
        ));
    }
    let k = config.k;
    let rec = analyze_pitchfork(p, k)?;
    let c = rec.corrections;
    let record = json!({
        "k": k,
        "chi_k": jnum(rec.chi_k),
        "k2": jnum(rec.k2),
        "k3_closed": jnum(rec.k3_closed),
        "k3_fourier": jnum(rec.k3_fourier),
        "closed_to_fourier_ratio": jnum(rec.closed_to_fourier_ratio()),
        "abc": {"a": jnum(rec.abc.a), "b": jnum(rec.abc.b), "c": jnum(rec.abc.c)},
        "roots": {
            "r1": rec.roots.r1.map(jnum),
            "r2": rec.roots.r2.map(jnum),
            "r3": jnum(rec.roots.r3),
        },
        "printed_roots": {"r1": rec.printed_roots.0.map(jnum), "r2": rec.printed_roots.1.map(jnum)},
        "region": {
            "case": rec.region.case.label(),
            "boundary": rec.region.boundary,
            "thresholds": thresholds(&rec.region.thresholds),
            "sign_chart": intervals(&rec.region.computed),
            "printed_case": rec.region.printed_case.label(),
            "printed_thresholds": thresholds(&rec.region.printed_thresholds),
            "printed_sign_chart": intervals(&rec.region.printed),
            "discrepancies": rec.region.discrepancies,
        },
        "stability": rec.stability.label(),
        "mu_dot": jnum(rec.mu_dot),
        "corrections": {"p0": jnum(c.p0), "p2": jnum(c.p2), "q0": jnum(c.q0), "q2": jnum(c.q2)},
        "config": config.resolved.iter().map(|(a, b)| (a.clone(), Value::String(b.clone()))).collect::<serde_json::Map<_, _>>(),
    });
    let json_path = out_path(config, "pitchfork.json");
    write_json(&json_path, &record)?;

    let d1s = log_grid(1e-2, 1e1, CHART_POINTS);
    let d2s = log_grid(1e-2, 1e1, CHART_POINTS);
    let header = Header::new("pitchfork", config)
        .note("k3 is the Fourier-solved coefficient; stability = stable iff k3 > 0")
        .note("region_case labels the D2 interval of the six-case chart (i..vi)");
    let mut chart = Csv::new(&header, &["D1", "D2", "k3", "region_case", "stability"]);
    for &d2 in &d2s {
        let q = p.with_d2(d2);
        let case = classify_region(&q, k)?.case.label();
        for &d1 in &d1s {
            let q = q.with_d1(d1);
            let (k3, stab) = match (k3_fourier(&q, k), bifurcation_value(&q, k)) {
                (Ok(f), Ok(chi_k)) => (num(f.k3), stability_from_k3(f.k3, chi_k).label()),
                _ => ("nan".to_string(), "singular"),
            };
            chart.row([num(d1), num(d2), k3, case.to_string(), stab.to_string()]);
        }
    }
    let chart_path = out_path(config, "sign_chart.csv");
    chart.write(&chart_path)?;

    let checks = cross_check(p, k, &d1s, &d2s, 1e-6)?;
    let header = Header::new("pitchfork", config)
        .note("closed-form vs Fourier K3; the Fourier value is authoritative");
    let mut cc = Csv::new(
        &header,
        &["D1", "D2", "k3_closed", "k3_fourier", "sign_agrees", "rel_diff"],
    );
    for x in &checks {
        cc.row([
            num(x.d1),
            num(x.d2),
            num(x.k3_closed),
            num(x.k3_fourier),
            x.sign_agrees.to_string(),
            num(x.rel_diff),
        ]);
    }
    let cc_path = out_path(config, "k3_crosscheck.csv");
    cc.write(&cc_path)?;

    let disagree = checks.iter().filter(|x| !x.sign_agrees).count();
    let magnitude = checks.iter().filter(|x| x.rel_diff > 1e-6).count();
    println!(
        "K3 (Fourier) = {}  K3 (closed form) = {}  -> {}",
        rec.k3_fourier,
        rec.k3_closed,
        rec.stability.label()
    );
    println!(
        "region case ({}) computed, ({}) printed",
        rec.region.case.label(),
        rec.region.printed_case.label()
    );
    for d in &rec.region.discrepancies {
        println!("discrepancy: {d}");
    }
    println!(
        "cross-check: {} points, {disagree} sign disagreements, {magnitude} magnitude differences > 1e-6",
        checks.len()
    );
    println!("wrote {}, {}, {}", json_path.display(), chart_path.display(), cc_path.display());
    Ok(())
}
