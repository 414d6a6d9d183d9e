//! Finite-strategy approximations of evolutionary games on the strategy
//! space `[0, 1]`.
//!
//! A population state is a probability measure over strategies. This crate
//! builds finitely supported approximations of such states, evolves them
//! under mean dynamics driven by a revision protocol (replicator, BNN, or
//! Smith pairwise comparison), and measures how families of approximations
//! behave as the resolution grows:
//!
//! - [`measures`] constructs and samples discrete probability measures;
//! - [`metric`] computes the bounded-Lipschitz distance between discrete
//!   measures exactly, via a chain-constraint linear program;
//! - [`games`] defines payoff kernels and discretizes them to payoff
//!   vectors, with a numerical probe for boundedness/Lipschitz regularity;
//! - [`protocols`] implements the switch-rate rules;
//! - [`dynamics`] evaluates the mean-dynamics right-hand side and
//!   integrates trajectories on the probability simplex;
//! - [`analysis`] runs resolution sweeps (inter-resolution convergence in
//!   the bounded-Lipschitz metric) and mobility/paralysis diagnostics;
//! - [`config`] and [`cli`] wrap everything as a reproducible batch runner.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod games;
pub mod measures;
pub mod metric;
pub mod protocols;

mod util;

pub use measures::{DensitySpec, DiscreteMeasure, GridPlacement};
pub use metric::{bl_distance, l1_state_distance, BlResult};
