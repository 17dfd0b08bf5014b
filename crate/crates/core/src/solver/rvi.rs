use rayon::prelude::*;

use super::SolverConfig;
use crate::error::{Error, Result};
use crate::model::{
    state_index_unchecked, Action, LinkRole, SourceKernel, SourceState, SystemParams,
    TruncationLevel,
};
use crate::policy::PolicyTable;

/// Result of relative value iteration for one multiplier.
#[derive(Debug, Clone)]
pub struct RviSolution {
    pub lambda: f64,
    pub policy: PolicyTable,
    /// Average Lagrangian cost per slot, `V(s_ref)` at convergence.
    pub gain: f64,
    /// Relative value function, zero at the reference state.
    pub h: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// One application of the Bellman operator
/// `(Th)(s) = min_a { C(s) + lambda D(a) + sum_s' P(s'|s,a) h(s') }`.
///
/// The joint kernel is a product of per-source kernels, so the expectation is
/// taken in two passes: first over the second source's next state for every
/// reachable first-source next state, then over the first source.
pub struct BellmanOperator<'k> {
    kernels: &'k [SourceKernel; 2],
    n: TruncationLevel,
    lambda: f64,
    /// Destination age of every per-source local state.
    local_cost: Vec<f64>,
    first_targets: Vec<usize>,
    /// `partial[role][s1' * M + s2] = sum_s2' P2(s2'|s2, role) h(s1', s2')`.
    partial: [Vec<f64>; 4],
}

impl<'k> BellmanOperator<'k> {
    pub fn new(kernels: &'k [SourceKernel; 2], lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::param("lambda", format!("{lambda} is not a finite nonnegative value")));
        }
        let n = kernels[0].truncation();
        if kernels[1].truncation() != n {
            return Err(Error::ShapeMismatch("source kernels disagree on N".into()));
        }
        let m = n.source_states();
        let local_cost = (0..m)
            .map(|i| SourceState::from_local_index(i, n).destination_age() as f64)
            .collect();
        Ok(Self {
            kernels,
            n,
            lambda,
            local_cost,
            first_targets: kernels[0].reachable_targets(),
            partial: std::array::from_fn(|_| vec![0.0; m * m]),
        })
    }

    pub fn truncation(&self) -> TruncationLevel {
        self.n
    }

    /// Writes `Th` into `values` and, if requested, the lexicographically
    /// first minimizing action into `actions`.
    pub fn apply(&mut self, h: &[f64], values: &mut [f64], actions: Option<&mut [Action]>) {
        let m = self.n.source_states();
        debug_assert_eq!(h.len(), m * m);
        debug_assert_eq!(values.len(), m * m);

        let second = &self.kernels[1];
        for role in LinkRole::ALL {
            let partial = &mut self.partial[role.index()];
            for &t1 in &self.first_targets {
                let h_row = &h[t1 * m..(t1 + 1) * m];
                let out = &mut partial[t1 * m..(t1 + 1) * m];
                for (s2, slot) in out.iter_mut().enumerate() {
                    *slot = second.row(role, s2).map(|(t2, p)| p * h_row[t2]).sum();
                }
            }
        }

        let first = &self.kernels[0];
        let partial = &self.partial;
        let local_cost = &self.local_cost;
        let lambda = self.lambda;
        let sweep_row = |s1: usize, row_values: &mut [f64], mut row_actions: Option<&mut [Action]>| {
            let mut acc = vec![0.0; m];
            row_values.fill(f64::INFINITY);
            for action in Action::ALL {
                let base = local_cost[s1] + lambda * crate::model::transmission_cost(action) as f64;
                let table = &partial[action.role(1).index()];
                acc.fill(0.0);
                for (t1, p) in first.row(action.role(0), s1) {
                    let src = &table[t1 * m..(t1 + 1) * m];
                    for (a, &v) in acc.iter_mut().zip(src) {
                        *a += p * v;
                    }
                }
                for s2 in 0..m {
                    let q = base + local_cost[s2] + acc[s2];
                    if q < row_values[s2] {
                        row_values[s2] = q;
                        if let Some(ra) = row_actions.as_deref_mut() {
                            ra[s2] = action;
                        }
                    }
                }
            }
        };

        match actions {
            Some(actions) => values
                .par_chunks_mut(m)
                .zip(actions.par_chunks_mut(m))
                .enumerate()
                .for_each(|(s1, (vals, acts))| sweep_row(s1, vals, Some(acts))),
            None => values
                .par_chunks_mut(m)
                .enumerate()
                .for_each(|(s1, vals)| sweep_row(s1, vals, None)),
        }
    }
}

pub fn rvi_solve(params: &SystemParams, cfg: &SolverConfig, lambda: f64) -> Result<RviSolution> {
    params.validate()?;
    let kernels = SourceKernel::pair(params, cfg.n)?;
    rvi_solve_with_kernels(&kernels, cfg, lambda)
}

/// Relative value iteration with `h` replaced only after a full sweep.
/// Returns the greedy policy with respect to the final `h`.
pub fn rvi_solve_with_kernels(
    kernels: &[SourceKernel; 2],
    cfg: &SolverConfig,
    lambda: f64,
) -> Result<RviSolution> {
    cfg.validate()?;
    let n = cfg.n;
    if kernels[0].truncation() != n {
        return Err(Error::ShapeMismatch(format!(
            "kernels built for N={}, solver configured for N={n}",
            kernels[0].truncation()
        )));
    }
    let mut op = BellmanOperator::new(kernels, lambda)?;
    let len = n.num_states();
    let ref_index = state_index_unchecked(&cfg.ref_state, n);

    let mut h = vec![0.0; len];
    let mut values = vec![0.0; len];
    let mut residual = 1.0_f64;
    let mut iterations = 0;

    while residual > cfg.epsilon {
        if iterations >= cfg.max_rvi_iters {
            return Err(Error::RviNotConverged {
                iterations,
                residual,
            });
        }
        op.apply(&h, &mut values, None);
        let offset = values[ref_index];
        residual = 0.0;
        for (hv, &v) in h.iter_mut().zip(&values) {
            let next = v - offset;
            residual = residual.max((next - *hv).abs());
            *hv = next;
        }
        iterations += 1;
    }

    let mut actions = vec![Action::IDLE; len];
    op.apply(&h, &mut values, Some(&mut actions));
    Ok(RviSolution {
        lambda,
        policy: PolicyTable::new(n, actions)?,
        gain: values[ref_index],
        h,
        iterations,
        residual,
    })
}
