//! Steady states, bifurcations and pattern dynamics of the one-dimensional
//! Keller–Segel chemotaxis system with logistic growth,
//!
//! ```text
//! (D1 u' − χ Φ(u,v) v')' + (ū − u) u = 0,
//!  D2 v'' − v + h(u)                = 0,   u' = v' = 0 at x = 0, L.
//! ```
//!
//! The crate is `no_std` (it needs `alloc`). IO, configuration and file
//! formats live in the companion `chemotax` crate.

#![no_std]

extern crate alloc;

pub mod asymptotics;
pub mod banded;
pub mod continuation;
pub mod discrete;
pub mod error;
pub mod evolution;
pub mod grid;
pub mod kinetics;
pub mod linear;
pub mod newton;
pub mod pitchfork;

pub use error::{Error, Result};
pub use grid::{Grid, StateField};
pub use kinetics::{KineticsSpec, ModelParams};
