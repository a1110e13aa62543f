//! Optimal consumption and investment under a bound on the probability of
//! lifetime ruin.
//!
//! The problem is solved through its Lagrangian relaxation: a bankruptcy
//! penalty `P` is attached to ruin, the penalized problem is solved in
//! closed form via its dual ([`dual`]), and `P` is calibrated by bisection
//! so the ruin probability at the initial wealth meets the target
//! ([`calibrate`]). [`montecarlo`] verifies the solution by simulation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod bracket;
pub mod calibrate;
pub mod check;
pub mod cli;
pub mod config;
pub mod dual;
pub mod error;
pub mod market;
pub mod montecarlo;
pub mod quad;
pub mod ruin;
pub mod utility;

pub use calibrate::{
    calibrate_penalty, solve_constrained, unconstrained_ruin, CalibrationRequest, CalibrationResult,
};
pub use dual::{
    DualCoefficients, DualPoint, Model, PolicyPoint, PolicySolution, Regime, Tolerances,
};
pub use error::{Error, Result};
pub use market::{Branch, MarketParams, RootSet};
pub use ruin::RuinCurve;
pub use utility::UtilitySpec;
