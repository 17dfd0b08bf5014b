//! State, action, cost and transition model of the two-source relay system.
//!
//! A state holds, for each source, the age at the transmitter `theta`, the
//! relative age at the relay `x = delta - theta` and the relative age at the
//! destination `y = Delta - delta`. The truncated model clamps the absolute
//! ages `(theta, delta, Delta)` at the cap `N` after each transition.

use std::fmt;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Number of sources in the system.
pub const SOURCES: usize = 2;

/// The AoI cap `N` of the truncated state space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TruncationLevel(u32);

impl TruncationLevel {
    /// Largest level whose `(N+1)^6` states stay addressable with `u32` indices.
    pub const MAX: u32 = 36;

    pub fn new(n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("n", "truncation level must be at least 1"));
        }
        if n > Self::MAX {
            return Err(Error::param("n", format!("truncation level {n} is too large")));
        }
        Ok(Self(n))
    }

    #[inline]
    pub fn get(self) -> u32 {
        self.0
    }

    /// Values per coordinate, `N + 1`.
    #[inline]
    pub fn base(self) -> usize {
        self.0 as usize + 1
    }

    /// Number of per-source states, `(N + 1)^3`.
    #[inline]
    pub fn source_states(self) -> usize {
        self.base().pow(3)
    }

    /// Number of joint states, `(N + 1)^6`.
    #[inline]
    pub fn num_states(self) -> usize {
        self.source_states().pow(2)
    }
}

impl fmt::Display for TruncationLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::param(name, format!("{value} is not a probability in [0, 1]")));
    }
    Ok(())
}

/// Arrival rates, link reliabilities and the average transmission budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub mu1: f64,
    pub mu2: f64,
    /// Tx to R success probability.
    pub p: f64,
    /// R to D success probability.
    pub q: f64,
    pub gamma_max: f64,
}

impl SystemParams {
    pub fn new(mu1: f64, mu2: f64, p: f64, q: f64, gamma_max: f64) -> Result<Self> {
        let params = Self {
            mu1,
            mu2,
            p,
            q,
            gamma_max,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("mu1", self.mu1)?;
        check_probability("mu2", self.mu2)?;
        check_probability("p", self.p)?;
        check_probability("q", self.q)?;
        if !(self.gamma_max > 0.0 && self.gamma_max <= 2.0) {
            return Err(Error::param(
                "gamma_max",
                format!("{} is not in (0, 2]", self.gamma_max),
            ));
        }
        Ok(())
    }

    /// Arrival rate of source `i` (0-based).
    #[inline]
    pub fn mu(&self, i: usize) -> f64 {
        if i == 0 {
            self.mu1
        } else {
            self.mu2
        }
    }

    pub fn with_gamma_max(self, gamma_max: f64) -> Result<Self> {
        Self::new(self.mu1, self.mu2, self.p, self.q, gamma_max)
    }

    /// Short stable digest of the parameter values.
    pub fn fingerprint(&self) -> String {
        let canonical = format!(
            "mu1={:?};mu2={:?};p={:?};q={:?};gamma_max={:?}",
            self.mu1, self.mu2, self.p, self.q, self.gamma_max
        );
        let digest = Sha256::digest(canonical.as_bytes());
        hex::encode(&digest[..8])
    }
}

/// Per-source part of the state: `(theta, x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct SourceState {
    pub theta: u32,
    pub x: u32,
    pub y: u32,
}

impl SourceState {
    pub const fn new(theta: u32, x: u32, y: u32) -> Self {
        Self { theta, x, y }
    }

    /// Absolute age at the relay, `delta = theta + x`.
    #[inline]
    pub fn relay_age(&self) -> u32 {
        self.theta + self.x
    }

    /// Absolute age at the destination, `Delta = theta + x + y`.
    #[inline]
    pub fn destination_age(&self) -> u32 {
        self.theta + self.x + self.y
    }

    #[inline]
    pub fn within(&self, n: TruncationLevel) -> bool {
        let n = n.get();
        self.theta <= n && self.x <= n && self.y <= n
    }

    /// Clamps each relative coordinate at `cap`.
    #[inline]
    pub fn clamped(&self, cap: u32) -> Self {
        Self::new(self.theta.min(cap), self.x.min(cap), self.y.min(cap))
    }

    /// Builds the relative state from absolute ages, clamping each age at `N`.
    /// Requires `theta <= delta <= dest`.
    #[inline]
    pub fn from_absolute_clamped(theta: u32, delta: u32, dest: u32, n: TruncationLevel) -> Self {
        debug_assert!(theta <= delta && delta <= dest);
        let n = n.get();
        let (theta, delta, dest) = (theta.min(n), delta.min(n), dest.min(n));
        Self {
            theta,
            x: delta - theta,
            y: dest - delta,
        }
    }

    /// Index within the per-source space, row-major over `(theta, x, y)`.
    #[inline]
    pub fn local_index(&self, n: TruncationLevel) -> usize {
        let b = n.base();
        (self.theta as usize * b + self.x as usize) * b + self.y as usize
    }

    #[inline]
    pub fn from_local_index(index: usize, n: TruncationLevel) -> Self {
        let b = n.base();
        Self {
            theta: (index / (b * b)) as u32,
            x: ((index / b) % b) as u32,
            y: (index % b) as u32,
        }
    }
}

impl fmt::Display for SourceState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.theta, self.x, self.y)
    }
}

/// Joint CMDP state, canonically ordered `(theta1, x1, y1, theta2, x2, y2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct State {
    pub sources: [SourceState; SOURCES],
}

impl State {
    pub const fn new(s1: SourceState, s2: SourceState) -> Self {
        Self { sources: [s1, s2] }
    }

    /// Builds a state from the canonical 6-tuple.
    pub const fn from_tuple(c: [u32; 6]) -> Self {
        Self::new(
            SourceState::new(c[0], c[1], c[2]),
            SourceState::new(c[3], c[4], c[5]),
        )
    }

    pub fn to_tuple(&self) -> [u32; 6] {
        let [a, b] = self.sources;
        [a.theta, a.x, a.y, b.theta, b.x, b.y]
    }

    pub fn within(&self, n: TruncationLevel) -> bool {
        self.sources.iter().all(|s| s.within(n))
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.to_tuple();
        write!(f, "({},{},{},{},{},{})", c[0], c[1], c[2], c[3], c[4], c[5])
    }
}

/// Joint decision `(alpha, beta)` of the transmitter and the relay.
/// `0` is idle, `i` serves source `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Action {
    pub alpha: u8,
    pub beta: u8,
}

impl Action {
    pub const IDLE: Action = Action { alpha: 0, beta: 0 };

    /// All joint actions in lexicographic `(alpha, beta)` order, idle first.
    pub const ALL: [Action; 9] = [
        Action { alpha: 0, beta: 0 },
        Action { alpha: 0, beta: 1 },
        Action { alpha: 0, beta: 2 },
        Action { alpha: 1, beta: 0 },
        Action { alpha: 1, beta: 1 },
        Action { alpha: 1, beta: 2 },
        Action { alpha: 2, beta: 0 },
        Action { alpha: 2, beta: 1 },
        Action { alpha: 2, beta: 2 },
    ];

    pub fn new(alpha: u8, beta: u8) -> Result<Self> {
        if alpha > 2 || beta > 2 {
            return Err(Error::param(
                "action",
                format!("({alpha},{beta}) has a component outside {{0,1,2}}"),
            ));
        }
        Ok(Self { alpha, beta })
    }

    /// Code in `0..9`, equal to the position in [`Action::ALL`].
    #[inline]
    pub fn code(self) -> u8 {
        self.alpha * 3 + self.beta
    }

    pub fn from_code(code: u8) -> Result<Self> {
        Action::ALL
            .get(code as usize)
            .copied()
            .ok_or_else(|| Error::param("action", format!("code {code} is not in 0..9")))
    }

    /// What this action asks of source `i` (0-based).
    #[inline]
    pub fn role(self, i: usize) -> LinkRole {
        let id = i as u8 + 1;
        LinkRole {
            tx: self.alpha == id,
            relay: self.beta == id,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.alpha, self.beta)
    }
}

/// Which links serve a given source in a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LinkRole {
    pub tx: bool,
    pub relay: bool,
}

impl LinkRole {
    pub const ALL: [LinkRole; 4] = [
        LinkRole { tx: false, relay: false },
        LinkRole { tx: false, relay: true },
        LinkRole { tx: true, relay: false },
        LinkRole { tx: true, relay: true },
    ];

    #[inline]
    pub fn index(self) -> usize {
        (self.tx as usize) * 2 + self.relay as usize
    }
}

/// Sum of destination ages, `C(s) = sum_i theta_i + x_i + y_i`.
#[inline]
pub fn aoi_cost(state: &State) -> u32 {
    state.sources.iter().map(SourceState::destination_age).sum()
}

/// Number of active links, `D(a)`.
#[inline]
pub fn transmission_cost(action: Action) -> u32 {
    (action.alpha != 0) as u32 + (action.beta != 0) as u32
}

/// `L(s, a; lambda) = C(s) + lambda * D(a)`.
pub fn lagrangian_cost(state: &State, action: Action, lambda: f64) -> Result<f64> {
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::param("lambda", format!("{lambda} is negative")));
    }
    Ok(aoi_cost(state) as f64 + lambda * transmission_cost(action) as f64)
}

/// Next-state distribution of one source.
///
/// Outcomes are enumerated arrival first, then relay outcome (if the relay
/// serves this source), then Tx outcome (if the Tx serves it), successes
/// before failures. Each outcome's absolute next ages
/// are clamped at `N`, coinciding next states are merged and zero-probability
/// outcomes are dropped.
pub fn source_transitions(
    src: SourceState,
    role: LinkRole,
    arrival_rate: f64,
    p: f64,
    q: f64,
    n: TruncationLevel,
) -> Result<Vec<(SourceState, f64)>> {
    check_probability("arrival_rate", arrival_rate)?;
    check_probability("p", p)?;
    check_probability("q", q)?;
    if !src.within(n) {
        return Err(Error::StateOutOfRange(src.to_string()));
    }
    Ok(source_transitions_unchecked(src, role, arrival_rate, p, q, n))
}

pub(crate) fn source_transitions_unchecked(
    src: SourceState,
    role: LinkRole,
    mu: f64,
    p: f64,
    q: f64,
    n: TruncationLevel,
) -> Vec<(SourceState, f64)> {
    let theta = src.theta;
    let delta = src.relay_age();
    let dest = src.destination_age();

    let arrivals: &[(bool, f64)] = &[(true, mu), (false, 1.0 - mu)];
    let tx_outcomes: &[(bool, f64)] = if role.tx {
        &[(true, p), (false, 1.0 - p)]
    } else {
        &[(false, 1.0)]
    };
    let relay_outcomes: &[(bool, f64)] = if role.relay {
        &[(true, q), (false, 1.0 - q)]
    } else {
        &[(false, 1.0)]
    };

    let mut out: Vec<(SourceState, f64)> = Vec::with_capacity(8);
    for &(arrived, pa) in arrivals {
        for &(relay_ok, pr) in relay_outcomes {
            for &(tx_ok, pt) in tx_outcomes {
                let prob = pa * pt * pr;
                let next_dest = if relay_ok { delta + 1 } else { dest + 1 };
                let next_delta = if tx_ok { theta + 1 } else { delta + 1 };
                let next_theta = if arrived { 0 } else { theta + 1 };
                let next =
                    SourceState::from_absolute_clamped(next_theta, next_delta, next_dest, n);
                match out.iter_mut().find(|(s, _)| *s == next) {
                    Some(entry) => entry.1 += prob,
                    None => out.push((next, prob)),
                }
            }
        }
    }
    out.retain(|&(_, prob)| prob > 0.0);
    out
}

/// Distribution over distinct next states with positive probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionDist {
    pub entries: Vec<(State, f64)>,
}

impl TransitionDist {
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    pub fn prob_of(&self, state: &State) -> f64 {
        self.entries
            .iter()
            .filter(|(s, _)| s == state)
            .map(|(_, p)| p)
            .sum()
    }

    /// `E[f(s')]`.
    pub fn expect(&self, mut f: impl FnMut(&State) -> f64) -> f64 {
        self.entries.iter().map(|(s, p)| p * f(s)).sum()
    }
}

/// Product of the two per-source distributions.
pub fn joint_transitions(
    state: &State,
    action: Action,
    params: &SystemParams,
    n: TruncationLevel,
) -> Result<TransitionDist> {
    params.validate()?;
    if !state.within(n) {
        return Err(Error::StateOutOfRange(state.to_string()));
    }
    let [s1, s2] = state.sources;
    let first = source_transitions_unchecked(s1, action.role(0), params.mu1, params.p, params.q, n);
    let second = source_transitions_unchecked(s2, action.role(1), params.mu2, params.p, params.q, n);
    // Per-source entries are distinct, so their products are distinct too.
    let mut entries = Vec::with_capacity(first.len() * second.len());
    for &(a, pa) in &first {
        for &(b, pb) in &second {
            entries.push((State::new(a, b), pa * pb));
        }
    }
    Ok(TransitionDist { entries })
}

/// All `(N+1)^6` states, row-major over `(theta1, x1, y1, theta2, x2, y2)`.
pub fn enumerate_states(n: TruncationLevel) -> Vec<State> {
    (0..n.num_states()).map(|i| index_state_unchecked(i, n)).collect()
}

pub fn state_index(state: &State, n: TruncationLevel) -> Result<usize> {
    if !state.within(n) {
        return Err(Error::StateOutOfRange(state.to_string()));
    }
    Ok(state_index_unchecked(state, n))
}

#[inline]
pub(crate) fn state_index_unchecked(state: &State, n: TruncationLevel) -> usize {
    let [a, b] = state.sources;
    a.local_index(n) * n.source_states() + b.local_index(n)
}

pub fn index_state(index: usize, n: TruncationLevel) -> Result<State> {
    let len = n.num_states();
    if index >= len {
        return Err(Error::IndexOutOfRange { index, len });
    }
    Ok(index_state_unchecked(index, n))
}

#[inline]
pub(crate) fn index_state_unchecked(index: usize, n: TruncationLevel) -> State {
    let m = n.source_states();
    State::new(
        SourceState::from_local_index(index / m, n),
        SourceState::from_local_index(index % m, n),
    )
}

/// Per-source kernels for every local state and link role, stored flat.
///
/// The joint kernel factorizes over sources, so solvers work with these
/// `(N+1)^3`-sized tables instead of materializing joint rows.
#[derive(Debug, Clone)]
pub struct SourceKernel {
    n: TruncationLevel,
    /// `offsets[role][local]..offsets[role][local + 1]` into `targets`/`probs`.
    offsets: [Vec<u32>; 4],
    targets: [Vec<u32>; 4],
    probs: [Vec<f64>; 4],
}

impl SourceKernel {
    pub fn new(mu: f64, p: f64, q: f64, n: TruncationLevel) -> Result<Self> {
        check_probability("mu", mu)?;
        check_probability("p", p)?;
        check_probability("q", q)?;
        let m = n.source_states();
        let mut offsets: [Vec<u32>; 4] = Default::default();
        let mut targets: [Vec<u32>; 4] = Default::default();
        let mut probs: [Vec<f64>; 4] = Default::default();
        for role in LinkRole::ALL {
            let r = role.index();
            offsets[r].reserve(m + 1);
            offsets[r].push(0);
            for local in 0..m {
                let src = SourceState::from_local_index(local, n);
                for (next, prob) in source_transitions_unchecked(src, role, mu, p, q, n) {
                    targets[r].push(next.local_index(n) as u32);
                    probs[r].push(prob);
                }
                offsets[r].push(targets[r].len() as u32);
            }
        }
        Ok(Self {
            n,
            offsets,
            targets,
            probs,
        })
    }

    /// Kernels for both sources of `params`.
    pub fn pair(params: &SystemParams, n: TruncationLevel) -> Result<[SourceKernel; 2]> {
        Ok([
            SourceKernel::new(params.mu1, params.p, params.q, n)?,
            SourceKernel::new(params.mu2, params.p, params.q, n)?,
        ])
    }

    pub fn truncation(&self) -> TruncationLevel {
        self.n
    }

    /// `(next local index, probability)` pairs for `local` under `role`.
    #[inline]
    pub fn row(&self, role: LinkRole, local: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = role.index();
        let lo = self.offsets[r][local] as usize;
        let hi = self.offsets[r][local + 1] as usize;
        self.targets[r][lo..hi]
            .iter()
            .zip(&self.probs[r][lo..hi])
            .map(|(&t, &p)| (t as usize, p))
    }

    /// Sorted local indices that appear as a next state of some row.
    pub fn reachable_targets(&self) -> Vec<usize> {
        let mut seen = vec![false; self.n.source_states()];
        for r in 0..4 {
            for &t in &self.targets[r] {
                seen[t as usize] = true;
            }
        }
        seen.iter()
            .enumerate()
            .filter_map(|(i, &s)| s.then_some(i))
            .collect()
    }
}
