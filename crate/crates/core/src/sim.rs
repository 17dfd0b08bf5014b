//! Slot-level Monte Carlo simulation of the relay system in absolute ages.
//!
//! Randomness comes from a ChaCha8 stream seeded with the run's 64-bit seed.
//! Every slot draws, in this order, the two arrivals, the Tx link outcome and
//! the relay link outcome, each as `uniform[0,1) < probability`. All four are
//! drawn even when a link is idle, so a trajectory depends only on the seed,
//! the parameters and the executor.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{transmission_cost, Action, SourceState, State, SystemParams, SOURCES};
use crate::policy::PolicyTable;

/// Absolute ages of one source at Tx, R and D.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SourceAges {
    pub theta: u64,
    pub delta: u64,
    pub dest: u64,
}

impl SourceAges {
    /// Relative coordinates `(theta, x, y)`, each clamped at `cap`.
    pub fn relative_clamped(&self, cap: u32) -> SourceState {
        let cap = cap as u64;
        SourceState::new(
            self.theta.min(cap) as u32,
            (self.delta - self.theta).min(cap) as u32,
            (self.dest - self.delta).min(cap) as u32,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SimState {
    pub ages: [SourceAges; SOURCES],
    pub cum_transmissions: u64,
    /// Running sum of destination ages over slots `1..=t`.
    pub cum_aoi_sum: u64,
    pub cum_source_aoi: [u64; SOURCES],
    /// Slots elapsed.
    pub t: u64,
}

/// Random events of one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepOutcome {
    pub arrivals: [bool; SOURCES],
    pub tx_success: bool,
    pub relay_success: bool,
}

impl StepOutcome {
    pub fn draw(rng: &mut impl Rng, params: &SystemParams) -> Self {
        let a1 = rng.random::<f64>() < params.mu1;
        let a2 = rng.random::<f64>() < params.mu2;
        let tx = rng.random::<f64>() < params.p;
        let relay = rng.random::<f64>() < params.q;
        Self {
            arrivals: [a1, a2],
            tx_success: tx,
            relay_success: relay,
        }
    }
}

/// Advances one slot. Right-hand sides use the slot-`t` ages throughout.
pub fn sim_step(state: &SimState, action: Action, outcome: StepOutcome) -> SimState {
    let mut next = state.clone();
    for (i, ages) in next.ages.iter_mut().enumerate() {
        let old = state.ages[i];
        let role = action.role(i);
        ages.dest = if role.relay && outcome.relay_success {
            old.delta + 1
        } else {
            old.dest + 1
        };
        ages.delta = if role.tx && outcome.tx_success {
            old.theta + 1
        } else {
            old.delta + 1
        };
        ages.theta = if outcome.arrivals[i] { 0 } else { old.theta + 1 };
    }
    next.cum_transmissions += transmission_cost(action) as u64;
    for i in 0..SOURCES {
        next.cum_source_aoi[i] += next.ages[i].dest;
    }
    next.cum_aoi_sum += next.ages.iter().map(|a| a.dest).sum::<u64>();
    next.t += 1;
    next
}

/// Chooses the action of each slot.
pub trait PolicyExecutor {
    fn decide(&mut self, state: &SimState) -> Action;
}

/// Looks up a truncated-model policy after clamping relative ages.
#[derive(Debug, Clone)]
pub struct TableExecutor<'p> {
    policy: &'p PolicyTable,
}

impl<'p> TableExecutor<'p> {
    pub fn new(policy: &'p PolicyTable) -> Self {
        Self { policy }
    }

    pub fn lookup_state(&self, state: &SimState) -> State {
        let cap = self.policy.truncation().get();
        State::new(
            state.ages[0].relative_clamped(cap),
            state.ages[1].relative_clamped(cap),
        )
    }
}

pub fn table_executor(policy: &PolicyTable) -> TableExecutor<'_> {
    TableExecutor::new(policy)
}

impl PolicyExecutor for TableExecutor<'_> {
    fn decide(&mut self, state: &SimState) -> Action {
        self.policy.action(&self.lookup_state(state))
    }
}

/// Budget-gated greedy benchmark: Tx serves the larger relative age at R,
/// the relay the larger relative age at D, each only if it would keep the
/// running transmission average within budget.
#[derive(Debug, Clone)]
pub struct GreedyExecutor {
    gamma_max: f64,
    transmissions: u64,
}

impl GreedyExecutor {
    pub fn new(gamma_max: f64) -> Result<Self> {
        if !(gamma_max > 0.0 && gamma_max <= 2.0) {
            return Err(Error::param("gamma_max", format!("{gamma_max} is not in (0, 2]")));
        }
        Ok(Self {
            gamma_max,
            transmissions: 0,
        })
    }

    fn pick(values: [u64; 2]) -> u8 {
        match values {
            [0, 0] => 0,
            [a, b] if a >= b => 1,
            _ => 2,
        }
    }

    fn admit(&mut self, slots: u64) -> bool {
        let ok = (self.transmissions + 1) as f64 / slots as f64 <= self.gamma_max;
        if ok {
            self.transmissions += 1;
        }
        ok
    }
}

pub fn greedy_executor(gamma_max: f64) -> Result<GreedyExecutor> {
    GreedyExecutor::new(gamma_max)
}

impl PolicyExecutor for GreedyExecutor {
    fn decide(&mut self, state: &SimState) -> Action {
        let slots = state.t + 1;
        let [a, b] = state.ages;
        let mut alpha = Self::pick([a.delta - a.theta, b.delta - b.theta]);
        if alpha != 0 && !self.admit(slots) {
            alpha = 0;
        }
        let mut beta = Self::pick([a.dest - a.delta, b.dest - b.delta]);
        if beta != 0 && !self.admit(slots) {
            beta = 0;
        }
        Action { alpha, beta }
    }
}

/// One-shot randomization between two table policies, drawn at construction.
#[derive(Debug, Clone)]
pub struct MixingExecutor<'p> {
    inner: TableExecutor<'p>,
    chose_plus: bool,
}

impl<'p> MixingExecutor<'p> {
    pub fn new(
        policy_plus: &'p PolicyTable,
        policy_minus: &'p PolicyTable,
        eta: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::param("eta", format!("{eta} is not in [0, 1]")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chose_plus = rng.random::<f64>() < eta;
        let chosen = if chose_plus { policy_plus } else { policy_minus };
        Ok(Self {
            inner: TableExecutor::new(chosen),
            chose_plus,
        })
    }

    pub fn chose_plus(&self) -> bool {
        self.chose_plus
    }
}

pub fn mixing_executor<'p>(
    policy_plus: &'p PolicyTable,
    policy_minus: &'p PolicyTable,
    eta: f64,
    seed: u64,
) -> Result<MixingExecutor<'p>> {
    MixingExecutor::new(policy_plus, policy_minus, eta, seed)
}

impl PolicyExecutor for MixingExecutor<'_> {
    fn decide(&mut self, state: &SimState) -> Action {
        self.inner.decide(state)
    }
}

/// Time averages of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimMetrics {
    pub avg_sum_aoi: f64,
    pub avg_transmissions: f64,
    pub per_source_aoi: [f64; SOURCES],
    pub horizon: u64,
    pub seed: u64,
    /// The second half of the run averaged well above the first half,
    /// which indicates ages growing without bound.
    pub unbounded_trend: bool,
}

pub fn run_simulation(
    executor: &mut dyn PolicyExecutor,
    params: &SystemParams,
    horizon: u64,
    seed: u64,
) -> Result<SimMetrics> {
    params.validate()?;
    if horizon == 0 {
        return Err(Error::param("horizon", "must be at least one slot"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = SimState::default();
    let half = horizon / 2;
    let mut first_half_sum = 0;
    for _ in 0..horizon {
        let action = executor.decide(&state);
        let outcome = StepOutcome::draw(&mut rng, params);
        state = sim_step(&state, action, outcome);
        if state.t == half {
            first_half_sum = state.cum_aoi_sum;
        }
    }
    let t = horizon as f64;
    let unbounded_trend = if half >= 50 {
        let first = first_half_sum as f64 / half as f64;
        let second = (state.cum_aoi_sum - first_half_sum) as f64 / (horizon - half) as f64;
        second > 1.5 * first.max(1.0)
    } else {
        false
    };
    Ok(SimMetrics {
        avg_sum_aoi: state.cum_aoi_sum as f64 / t,
        avg_transmissions: state.cum_transmissions as f64 / t,
        per_source_aoi: state.cum_source_aoi.map(|c| c as f64 / t),
        horizon,
        seed,
        unbounded_trend,
    })
}
