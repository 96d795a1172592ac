//! Solver library for extensive-form correlated equilibria (EFCE) in
//! two-player games without chance, with online subgame refinement.
//!
//! The pipeline:
//!
//! 1. build or load a game ([`efg`], [`games`]) and its sequence index
//!    ([`seq`]);
//! 2. enumerate relevant sequence pairs and pick a correlation blueprint
//!    ([`corrplan`]);
//! 3. decompose the game into subgames ([`subgame`]) and derive the safe
//!    value bounds implied by the blueprint ([`bounds`]);
//! 4. refine the subgame actually reached during play with either the LP
//!    backend ([`lp`]) or the regret-minimization backend ([`cfr`]);
//! 5. audit any plan with the exploitability oracle ([`deviation`]).
//!
//! [`play`] runs the online recommendation loop and [`experiment`] drives
//! the welfare and convergence harnesses behind the CLI.

pub mod error;

pub mod efg;
pub mod seq;

pub mod games;

pub mod corrplan;
pub mod subgame;

pub mod deviation;

pub mod bounds;

pub mod lp;

pub mod cfr;

pub mod resolve;

pub mod play;

pub mod experiment;

pub mod par;

pub use error::{Error, Result};
