use chemotax_core::continuation::{continue_branch, ContinuationOptions};
use chemotax_core::discrete::equilibrium_state;
use chemotax_core::evolution::{
    evolve, probe_stability, random_cosine_field, EvolutionConfig,
};
use chemotax_core::pitchfork::{eigenvalue_drift, k3_fourier, predicted_branch_rate};

use super::{grid, state_csv};
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::output::{num, out_path, Csv, Header};

fn evolution_config(config: &ExperimentConfig) -> EvolutionConfig {
    EvolutionConfig {
        dt: config.dt,
        t_final: config.t_final,
        scheme: config.scheme,
        perturb_eps: config.eps,
        seed: config.seed,
        probe_mode: config.k,
        ..Default::default()
    }
}

pub fn simulate(config: &ExperimentConfig) -> Result<()> {
    if config.probe {
        probe(config)
    } else {
        trajectory(config)
    }
}

fn trajectory(config: &ExperimentConfig) -> Result<()> {
    let p = &config.params;
    let g = grid(config)?;
    let start = equilibrium_state(p, &g).axpy(config.eps, &random_cosine_field(&g, 0, config.seed));
    let tr = evolve(&start, p, &g, &evolution_config(config))?;

    let header = Header::new("simulate", config)
        .note("initial state = equilibrium + eps * seeded zero-mean cosine mixture")
        .note("norm_u = max|u - ubar|, norm_v = max|v - vbar|");
    let mut csv = Csv::new(&header, &["t", "norm_u", "norm_v", "min_u", "u0"]);
    for i in 0..tr.times.len() {
        csv.row([
            num(tr.times[i]),
            num(tr.norm_u[i]),
            num(tr.norm_v[i]),
            num(tr.min_u[i]),
            num(tr.u0[i]),
        ]);
    }
    let path = out_path(config, "timeseries.csv");
    csv.write(&path)?;
    let final_path = out_path(config, "final_state.csv");
    state_csv(&Header::new("simulate", config).note("final state"), &g, &tr.final_state)
        .write(&final_path)?;

    let last = tr.times.len() - 1;
    println!(
        "t = {}: |u - ubar| = {}, min u = {}",
        tr.times[last], tr.norm_u[last], tr.min_u[last]
    );
    println!("wrote {}, {}", path.display(), final_path.display());
    Ok(())
}

fn probe(config: &ExperimentConfig) -> Result<()> {
    let p = &config.params;
    let g = grid(config)?;
    let k = config.k;
    let target = p.chi;
    let opts = ContinuationOptions {
        chi_max: target,
        land_on_chi_max: true,
        ..Default::default()
    };
    let branch = continue_branch(p, &g, k, &opts)?;
    let Some(point) = branch
        .points
        .iter()
        .rev()
        .find(|pt| (pt.chi - target).abs() <= 1e-9 * target)
    else {
        return Err(CliError::Aborted(format!(
            "the k = {k} branch does not reach chi = {target} (it spans [{}, {}])",
            branch.min_chi(),
            branch.max_chi()
        )));
    };
    let ec = evolution_config(config);
    if p.kinetics.is_linear() {
        let k3 = k3_fourier(p, k)?.k3;
        let rate = predicted_branch_rate(k3, eigenvalue_drift(p, k)?, point.mode_coordinate);
        if rate.abs() < ec.rate_tol {
            println!(
                "warning: predicted |lambda(s)| = {} is below rate_tol = {}; the probe may be inconclusive",
                rate.abs(),
                ec.rate_tol
            );
        }
    }
    let probe = probe_stability(point, p, &g, &ec)?;

    let header = Header::new("simulate", config)
        .note(format!("stability probe of the k = {k} branch point at chi = {target}"))
        .note(format!("growth_rate = {}; verdict = {:?}", probe.growth_rate, probe.verdict));
    let mut csv = Csv::new(&header, &["t", "deviation"]);
    for (t, d) in probe.times.iter().zip(&probe.norms) {
        csv.row([num(*t), num(*d)]);
    }
    let path = out_path(config, "probe.csv");
    csv.write(&path)?;
    println!(
        "probe at chi = {target} (s = {}): growth rate {} -> {:?}",
        point.mode_coordinate, probe.growth_rate, probe.verdict
    );
    println!("wrote {}", path.display());
    Ok(())
}
