use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::model::{
    index_state_unchecked, state_index_unchecked, transmission_cost, SourceKernel, State,
    SystemParams, TruncationLevel,
};
use crate::policy::PolicyTable;

/// Self-loop weight of the lazy chain `w I + (1 - w) P`. The lazy chain has
/// the same stationary distribution and is aperiodic for every policy.
const LAZINESS: f64 = 0.1;
/// Bound on the L1 change between successive iterates.
const STATIONARY_TOL: f64 = 1e-12;
const MAX_POWER_STEPS: usize = 2_000_000;

/// Long-run averages of a stationary policy on the truncated chain.
#[derive(Debug, Clone)]
pub struct PolicyEvaluation {
    /// `J(pi)`, average sum AoI at the destination.
    pub avg_aoi: f64,
    /// `D(pi)`, average transmissions per slot.
    pub avg_transmissions: f64,
    /// Average destination AoI of each source.
    pub per_source_aoi: [f64; 2],
    /// Stationary distribution indexed by state index.
    pub stationary: Vec<f64>,
    pub power_steps: usize,
}

pub fn evaluate_policy_exact(policy: &PolicyTable, params: &SystemParams) -> Result<PolicyEvaluation> {
    params.validate()?;
    let kernels = SourceKernel::pair(params, policy.truncation())?;
    evaluate_with_kernels(policy, &kernels)
}

/// Exact evaluation of `policy` deployed on a finer truncation `eval_n`.
///
/// States of the finer space are mapped to the policy's space by clamping
/// each relative coordinate, the same lookup the simulator's table executor
/// uses. As `eval_n` grows this approaches the policy's performance on the
/// untruncated system.
pub fn evaluate_deployed(
    policy: &PolicyTable,
    params: &SystemParams,
    eval_n: TruncationLevel,
) -> Result<PolicyEvaluation> {
    let cap = policy.truncation().get();
    if eval_n.get() < cap {
        return Err(Error::param(
            "eval_n",
            format!("evaluation truncation {eval_n} is below the policy's N={cap}"),
        ));
    }
    let extended = PolicyTable::from_fn(eval_n, |s| {
        policy.action(&State::new(s.sources[0].clamped(cap), s.sources[1].clamped(cap)))
    });
    evaluate_policy_exact(&extended, params)
}

/// Stationary distribution of the chain induced by `policy`, by power
/// iteration on the states reachable from the all-zero state.
pub fn evaluate_with_kernels(
    policy: &PolicyTable,
    kernels: &[SourceKernel; 2],
) -> Result<PolicyEvaluation> {
    let n = policy.truncation();
    if kernels[0].truncation() != n || kernels[1].truncation() != n {
        return Err(Error::ShapeMismatch(format!(
            "kernels built for N={}, policy has N={n}",
            kernels[0].truncation()
        )));
    }
    let m = n.source_states();

    // Breadth-first closure from the start state; compact indices in visit order.
    let start = state_index_unchecked(&State::default(), n);
    let mut compact = vec![u32::MAX; n.num_states()];
    let mut order = vec![start];
    compact[start] = 0;
    let mut offsets = vec![0u32];
    let mut targets: Vec<u32> = Vec::new();
    let mut probs: Vec<f64> = Vec::new();
    let mut queue = VecDeque::from([start]);
    while let Some(s) = queue.pop_front() {
        let action = policy.at_index(s);
        let (s1, s2) = (s / m, s % m);
        for (t1, p1) in kernels[0].row(action.role(0), s1) {
            for (t2, p2) in kernels[1].row(action.role(1), s2) {
                let t = t1 * m + t2;
                if compact[t] == u32::MAX {
                    compact[t] = order.len() as u32;
                    order.push(t);
                    queue.push_back(t);
                }
                targets.push(compact[t]);
                probs.push(p1 * p2);
            }
        }
        offsets.push(targets.len() as u32);
    }

    let k = order.len();
    let mut dist = vec![0.0; k];
    dist[0] = 1.0;
    let mut next = vec![0.0; k];
    let mut steps = 0;
    loop {
        for (nv, &dv) in next.iter_mut().zip(&dist) {
            *nv = LAZINESS * dv;
        }
        for (row, &mass) in dist.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let moving = (1.0 - LAZINESS) * mass;
            let (lo, hi) = (offsets[row] as usize, offsets[row + 1] as usize);
            for (&t, &p) in targets[lo..hi].iter().zip(&probs[lo..hi]) {
                next[t as usize] += moving * p;
            }
        }
        let change = dist
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>();
        std::mem::swap(&mut dist, &mut next);
        steps += 1;
        if change <= STATIONARY_TOL {
            break;
        }
        if steps >= MAX_POWER_STEPS {
            return Err(Error::EvaluationNotConverged {
                iterations: steps,
                change,
            });
        }
    }

    let total: f64 = dist.iter().sum();
    let mut stationary = vec![0.0; n.num_states()];
    // Mass per transmission count, so constant-cost policies evaluate exactly.
    let mut mass_by_cost = [0.0; 3];
    let mut per_source_aoi = [0.0; 2];
    for (c, &s) in order.iter().enumerate() {
        let pi = dist[c] / total;
        stationary[s] = pi;
        let state = index_state_unchecked(s, n);
        for (acc, src) in per_source_aoi.iter_mut().zip(&state.sources) {
            *acc += pi * src.destination_age() as f64;
        }
        mass_by_cost[transmission_cost(policy.at_index(s)) as usize] += dist[c];
    }
    let avg_aoi = per_source_aoi[0] + per_source_aoi[1];
    let avg_transmissions =
        (mass_by_cost[1] + 2.0 * mass_by_cost[2]) / mass_by_cost.iter().sum::<f64>();

    Ok(PolicyEvaluation {
        avg_aoi,
        avg_transmissions,
        per_source_aoi,
        stationary,
        power_steps: steps,
    })
}
