//! One function per subcommand. Each writes its files under the configured
//! output directory and prints a short summary to stdout.

mod analyze;
mod branch;
mod pitchfork;
mod selftest;
mod simulate;
mod sweep;

pub use analyze::analyze;
pub use branch::continue_;
pub use pitchfork::pitchfork;
pub use selftest::{selftest, SELFTEST_DEFAULTS};
pub use simulate::simulate;
pub use sweep::{schedule as sweep_schedule, sweep};

use chemotax_core::{Grid, StateField};

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::output::{num, Csv, Header};

fn grid(config: &ExperimentConfig) -> Result<Grid> {
    Ok(Grid::new(config.params.length, config.n)?)
}

/// (x, u, v) table of a full state.
fn state_csv(header: &Header, grid: &Grid, state: &StateField) -> Csv {
    let mut csv = Csv::new(header, &["x", "u", "v"]);
    for (i, x) in grid.nodes().enumerate() {
        csv.row([num(x), num(state.u[i]), num(state.v[i])]);
    }
    csv
}
