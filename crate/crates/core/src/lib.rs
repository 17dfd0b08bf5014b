//! Age-of-information scheduling for a two-source, two-hop relay system.
//!
//! The crate models the system as a constrained MDP over truncated ages,
//! solves its Lagrangian relaxation with relative value iteration and a
//! bisection over the multiplier, evaluates policies exactly on the induced
//! Markov chain, and cross-checks them with a slot-level simulator.

pub mod error;
pub mod model;
pub mod policy;
pub mod sim;
pub mod solver;

pub use error::{Error, Result};
pub use model::{
    aoi_cost, enumerate_states, index_state, joint_transitions, lagrangian_cost,
    source_transitions, state_index, transmission_cost, Action, LinkRole, SourceKernel,
    SourceState, State, SystemParams, TransitionDist, TruncationLevel,
};
pub use policy::{
    load_policy, load_policy_expecting, policy_slice, save_policy, verify_switching,
    ActionComponent, Coord, PolicyFile, PolicySlice, PolicyTable, SliceSpec, SwitchAxis,
    SwitchingReport,
};
pub use sim::{
    greedy_executor, mixing_executor, run_simulation, sim_step, table_executor, GreedyExecutor,
    MixingExecutor, PolicyExecutor, SimMetrics, SimState, StepOutcome, TableExecutor,
};
pub use solver::{
    bisection_solve, evaluate_deployed, evaluate_policy_exact, mixed_value, mixing_factor,
    rvi_solve, BellmanOperator, CmdpSolution, PolicyEvaluation, RviSolution, SolverConfig,
};
