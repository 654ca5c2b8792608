//! Native quantum games on interacting discrete-time quantum walks.
//!
//! Two distinguishable coined walkers share a one-dimensional lattice. Each
//! player picks a coin angle; the only coupling between them is a diagonal
//! interaction phase applied after every step. Payoffs are expectation values
//! of position observables, and the [`equilibrium`] and [`perturbation`]
//! modules analyse the resulting two-player games.
//!
//! ```
//! use qwgame::dynamics::{evolve, StrategyProfile, WalkConfig};
//! use qwgame::games::{payoff, GameSpec};
//! use qwgame::hilbert::{measure_joint, Boundary, LatticeGeometry};
//! use qwgame::interactions::InteractionSpec;
//!
//! let geometry = LatticeGeometry::new(15, Boundary::Periodic).unwrap();
//! let config = WalkConfig::new(geometry, 20).with_interaction(InteractionSpec::collision(std::f64::consts::PI));
//! let profile = StrategyProfile::new(1.0, 2.0).unwrap();
//! let state = evolve(&config, profile, 7).unwrap();
//! let point = payoff(&measure_joint(&state), &GameSpec::race()).unwrap();
//! assert_eq!(point.u_a + point.u_b, 0.0);
//! ```

pub mod angle;
pub mod cli;
pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod games;
pub mod hilbert;
pub mod interactions;
pub mod perturbation;

pub use error::{Error, Result};
