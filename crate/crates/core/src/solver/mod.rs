//! Lagrangian CMDP solver: relative value iteration for a fixed multiplier,
//! exact policy evaluation, and the outer bisection with policy mixing.

mod bisection;
mod evaluate;
mod rvi;

pub use bisection::{bisection_solve, mixed_value, mixing_factor, BisectionStep, CmdpSolution};
pub use evaluate::{
    evaluate_deployed, evaluate_policy_exact, evaluate_with_kernels, PolicyEvaluation,
};
pub use rvi::{rvi_solve, rvi_solve_with_kernels, BellmanOperator, RviSolution};

use crate::error::{Error, Result};
use crate::model::{State, TruncationLevel};

/// Tuning of the RVI and the multiplier search.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub n: TruncationLevel,
    /// RVI stops once the sup-norm change of `h` is at most this.
    pub epsilon: f64,
    /// Bisection stops once `lambda_plus - lambda_minus < zeta`.
    pub zeta: f64,
    pub lambda_minus_init: f64,
    pub lambda_plus_init: f64,
    pub max_rvi_iters: usize,
    pub ref_state: State,
    /// An infeasible initial `lambda_plus` is doubled at most this many times.
    pub max_lambda_doublings: u32,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n: TruncationLevel::new(7).expect("7 is a valid truncation level"),
            epsilon: 1e-3,
            zeta: 1e-2,
            lambda_minus_init: 0.0,
            lambda_plus_init: 1000.0,
            max_rvi_iters: 100_000,
            ref_state: State::default(),
            max_lambda_doublings: 20,
        }
    }
}

impl SolverConfig {
    pub fn with_n(n: TruncationLevel) -> Self {
        Self {
            n,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::param("epsilon", "must be positive"));
        }
        if self.zeta.is_nan() || self.zeta <= 0.0 {
            return Err(Error::param("zeta", "must be positive"));
        }
        if self.lambda_minus_init.is_nan() || self.lambda_minus_init < 0.0 {
            return Err(Error::param("lambda_minus", "must be nonnegative"));
        }
        if !self.lambda_plus_init.is_finite() || self.lambda_minus_init >= self.lambda_plus_init {
            return Err(Error::param(
                "lambda_plus",
                "must be finite and exceed lambda_minus",
            ));
        }
        if self.max_rvi_iters == 0 {
            return Err(Error::param("max_rvi_iters", "must be positive"));
        }
        if !self.ref_state.within(self.n) {
            return Err(Error::StateOutOfRange(self.ref_state.to_string()));
        }
        Ok(())
    }
}
