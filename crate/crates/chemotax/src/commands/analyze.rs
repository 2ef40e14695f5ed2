use chemotax_core::kinetics::{validate_conditions, DEFAULT_CONDITION_SAMPLES};
use chemotax_core::linear::{
    analyze_modes, check_simplicity, instability_threshold, k_max_floor, positive_equilibrium,
};

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::output::{num, out_path, Csv, Header};

pub fn analyze(config: &ExperimentConfig) -> Result<()> {
    let p = &config.params;
    let kmax = config.kmax.unwrap_or_else(|| k_max_floor(p).max(10));
    let modes = analyze_modes(p, kmax)?;
    let (chi0, k_star) = instability_threshold(p, kmax)?;
    let (ub, vb) = positive_equilibrium(p);
    let report = validate_conditions(&p.kinetics, 10.0 * ub, 10.0 * vb.max(ub), DEFAULT_CONDITION_SAMPLES)?;
    let readings = check_simplicity(p, 1, 2 * kmax.max(2))?;

    let mut header = Header::new("analyze", config)
        .note(format!("equilibrium = ({ub}, {vb}); (0, 0) is unstable and never a bifurcation base"))
        .note(format!("chi_0 = {chi0} at k = {k_star}"))
        .note("max_growth_at_chi = max Re of the growth rates at the configured chi");
    for c in &report.checks {
        header = header.note(format!(
            "condition {}: {}",
            c.condition.label(),
            if c.passed { "pass" } else { "FAIL" }
        ));
    }
    if readings.readings_disagree {
        header = header.note(
            "note: the two readings of the k = 1 non-resonance condition (with and without k^2) disagree here",
        );
    }

    let mut csv = Csv::new(
        &header,
        &["k", "lambda_k", "chi_k", "Q_k", "simple", "trace", "max_growth_at_chi"],
    );
    for m in &modes {
        csv.row([
            m.k.to_string(),
            num(m.lambda_k),
            num(m.chi_k),
            num(m.q_k),
            m.simple.to_string(),
            num(m.trace_k),
            num(m.max_growth_at(p.chi)),
        ]);
    }
    let path = out_path(config, "analyze.csv");
    csv.write(&path)?;

    println!("chi_0 = {chi0} (k = {k_star})");
    for m in modes.iter().take(3) {
        println!("chi_{} = {}", m.k, m.chi_k);
    }
    if p.chi > chi0 {
        println!("chi = {} exceeds chi_0: the constant state is unstable", p.chi);
    }
    if !report.all_passed() {
        println!("warning: kinetics fail a structural condition (see header)");
    }
    println!("wrote {}", path.display());
    Ok(())
}
