//! Damped Newton iteration for the discrete stationary problem at fixed χ.

use alloc::vec::Vec;

use crate::discrete::{jacobian, max_norm, residual, residual_floor};
use crate::error::Error;
use crate::grid::{Grid, StateField};
use crate::kinetics::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Stop when the residual max-norm is at or below this (or below the
    /// round-off floor of the grid, whichever is larger).
    pub tol: f64,
    pub max_iter: usize,
    /// Backtracking halvings allowed per step when the residual grows.
    pub max_halvings: usize,
    pub damping: bool,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 25,
            max_halvings: 8,
            damping: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonSolution {
    pub state: StateField,
    pub iterations: usize,
    pub residual: f64,
    /// Residual max-norm before each iteration, then the final one.
    pub trace: Vec<f64>,
}

/// Why Newton gave up, with the residual history up to that point.
#[derive(Debug, Clone, PartialEq)]
pub struct FailureReport {
    pub error: Error,
    pub trace: Vec<f64>,
    pub last_state: StateField,
}

impl From<FailureReport> for Error {
    fn from(f: FailureReport) -> Self {
        f.error
    }
}

pub fn newton_solve(
    initial: &StateField,
    params: &ModelParams,
    grid: &Grid,
    opts: &NewtonOptions,
) -> core::result::Result<NewtonSolution, FailureReport> {
    let fail = |error: Error, trace: Vec<f64>, last: &[f64]| FailureReport {
        error,
        trace,
        last_state: StateField::from_interleaved(last),
    };
    if !initial.is_finite() {
        return Err(fail(
            Error::NonFinite,
            Vec::new(),
            &initial.to_interleaved(),
        ));
    }
    if let Err(e) = initial.check_grid(grid) {
        return Err(fail(e, Vec::new(), &initial.to_interleaved()));
    }
    let eval = |z: &[f64]| {
        residual(&StateField::from_interleaved(z), params, grid).expect("dimensions checked")
    };

    let mut z = initial.to_interleaved();
    let mut r = eval(&z);
    let mut norm = max_norm(&r);
    let mut trace = alloc::vec![norm];
    for it in 0..=opts.max_iter {
        let floor = residual_floor(&StateField::from_interleaved(&z), params, grid);
        if norm <= opts.tol.max(floor) {
            return Ok(NewtonSolution {
                state: StateField::from_interleaved(&z),
                iterations: it,
                residual: norm,
                trace,
            });
        }
        if it == opts.max_iter || !norm.is_finite() {
            break;
        }
        let jac =
            jacobian(&StateField::from_interleaved(&z), params, grid).expect("dimensions checked");
        let lu = match jac.lu() {
            Ok(lu) => lu,
            Err(e) => return Err(fail(e, trace, &z)),
        };
        let mut step = r.clone();
        lu.solve_in_place(&mut step);
        let mut t = 1.0;
        let mut trial: Vec<f64>;
        let mut r_trial;
        let mut halvings = 0;
        loop {
            trial = z.iter().zip(&step).map(|(a, d)| a - t * d).collect();
            r_trial = eval(&trial);
            let n_trial = max_norm(&r_trial);
            if !opts.damping
                || (n_trial.is_finite() && n_trial <= norm)
                || halvings >= opts.max_halvings
            {
                break;
            }
            t *= 0.5;
            halvings += 1;
        }
        z = trial;
        r = r_trial;
        norm = max_norm(&r);
        trace.push(norm);
    }
    let err = if norm.is_finite() {
        Error::NonConvergence {
            iterations: trace.len() - 1,
            residual: norm,
        }
    } else {
        Error::NonFinite
    };
    Err(fail(err, trace, &z))
}
