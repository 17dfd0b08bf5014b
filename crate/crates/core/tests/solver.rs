use nalgebra::{DMatrix, DVector};
use relay_aoi::{
    bisection_solve, enumerate_states, evaluate_policy_exact, joint_transitions, lagrangian_cost,
    rvi_solve, state_index, Action, PolicyTable, SolverConfig, State, SystemParams,
    TruncationLevel,
};

fn level(n: u32) -> TruncationLevel {
    TruncationLevel::new(n).unwrap()
}

fn fig2() -> SystemParams {
    SystemParams::new(0.6, 0.9, 0.8, 0.7, 1.6).unwrap()
}

/// Average-cost policy iteration with exact evaluation: for a policy solve
/// `g + h(s) - sum_s' P(s'|s) h(s') = L(s)` with `h(0) = 0` by dense LU, then
/// improve greedily, keeping the current action unless strictly beaten.
fn policy_iteration_gain(params: &SystemParams, n: TruncationLevel, lambda: f64) -> f64 {
    let states = enumerate_states(n);
    let len = states.len();
    let ref_index = state_index(&State::default(), n).unwrap();
    let rows: Vec<Vec<Vec<(usize, f64)>>> = states
        .iter()
        .map(|s| {
            Action::ALL
                .iter()
                .map(|&a| {
                    joint_transitions(s, a, params, n)
                        .unwrap()
                        .entries
                        .iter()
                        .map(|(t, p)| (state_index(t, n).unwrap(), *p))
                        .collect()
                })
                .collect()
        })
        .collect();
    let cost = |i: usize, a: usize| lagrangian_cost(&states[i], Action::ALL[a], lambda).unwrap();

    let mut policy = vec![0usize; len];
    for _round in 0..100 {
        // Unknown vector: h(s) for s != ref, with g stored in the ref slot.
        let mut m = DMatrix::<f64>::zeros(len, len);
        let mut b = DVector::<f64>::zeros(len);
        for i in 0..len {
            m[(i, ref_index)] += 1.0;
            if i != ref_index {
                m[(i, i)] += 1.0;
            }
            for &(j, p) in &rows[i][policy[i]] {
                if j != ref_index {
                    m[(i, j)] -= p;
                }
            }
            b[i] = cost(i, policy[i]);
        }
        let sol = m.lu().solve(&b).expect("unichain policy gives a nonsingular system");
        let gain = sol[ref_index];
        let h = |j: usize| if j == ref_index { 0.0 } else { sol[j] };

        let mut changed = false;
        for i in 0..len {
            let q = |a: usize| cost(i, a) + rows[i][a].iter().map(|&(j, p)| p * h(j)).sum::<f64>();
            let current = q(policy[i]);
            let (best_a, best_q) = (0..9)
                .map(|a| (a, q(a)))
                .fold((policy[i], current), |acc, (a, v)| if v < acc.1 - 1e-9 { (a, v) } else { acc });
            if best_q < current - 1e-9 {
                policy[i] = best_a;
                changed = true;
            }
        }
        if !changed {
            return gain;
        }
    }
    panic!("policy iteration did not stabilize");
}

#[test]
fn rvi_gain_matches_policy_iteration() {
    let params = fig2();
    let n = level(2);
    let cfg = SolverConfig {
        epsilon: 1e-11,
        ..SolverConfig::with_n(n)
    };
    for lambda in [0.0, 0.5, 1.0, 2.0, 5.0] {
        let rvi = rvi_solve(&params, &cfg, lambda).unwrap();
        let pi = policy_iteration_gain(&params, n, lambda);
        assert!(
            (rvi.gain - pi).abs() < 1e-6,
            "lambda={lambda}: rvi {} vs policy iteration {pi}",
            rvi.gain
        );
        // The gain is also the long-run Lagrangian cost of the greedy policy.
        let eval = evaluate_policy_exact(&rvi.policy, &params).unwrap();
        let lagrangian = eval.avg_aoi + lambda * eval.avg_transmissions;
        assert!((lagrangian - pi).abs() < 1e-6, "lambda={lambda}");
    }
}

#[test]
fn dead_links_give_twice_the_cap() {
    let params = SystemParams::new(1.0, 1.0, 0.0, 0.0, 1.0).unwrap();
    let cfg = SolverConfig::default();
    for lambda in [0.0, 1.0, 50.0] {
        let sol = rvi_solve(&params, &cfg, lambda).unwrap();
        assert_eq!(sol.gain, 14.0, "lambda={lambda}");
        let eval = evaluate_policy_exact(&sol.policy, &params).unwrap();
        assert!((eval.avg_aoi - 14.0).abs() < 1e-9);
        if lambda > 0.0 {
            assert!(sol.policy.actions().iter().all(|&a| a == Action::IDLE));
        }
    }
}

#[test]
fn prohibitive_multiplier_idles_everywhere() {
    let params = SystemParams::new(1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
    let n = level(7);
    let sol = rvi_solve(&params, &SolverConfig::default(), 1e6).unwrap();
    assert_eq!(sol.gain, 14.0);
    assert!(sol.policy.actions().iter().all(|&a| a == Action::IDLE));
    let idle = evaluate_policy_exact(&PolicyTable::constant(n, Action::IDLE), &params).unwrap();
    assert!((idle.avg_aoi - 14.0).abs() < 1e-9);
    assert_eq!(idle.avg_transmissions, 0.0);

    // No action improves on idling anywhere, checked on the joint kernel.
    let h = &sol.h;
    for (i, s) in enumerate_states(n).iter().enumerate().step_by(97) {
        let q = |a: Action| {
            lagrangian_cost(s, a, 1e6).unwrap()
                + joint_transitions(s, a, &params, n)
                    .unwrap()
                    .expect(|t| h[state_index(t, n).unwrap()])
        };
        let idle_q = q(Action::IDLE);
        for a in Action::ALL {
            assert!(q(a) >= idle_q - 1e-6, "state {i}");
        }
    }
}

#[test]
fn solver_is_deterministic() {
    let params = fig2();
    let cfg = SolverConfig::with_n(level(3));
    let a = rvi_solve(&params, &cfg, 0.7).unwrap();
    let b = rvi_solve(&params, &cfg, 0.7).unwrap();
    assert_eq!(a.policy, b.policy);
    assert_eq!(a.gain.to_bits(), b.gain.to_bits());
    assert_eq!(a.iterations, b.iterations);
}

#[test]
fn transmissions_fall_as_the_multiplier_rises() {
    let params = fig2();
    let cfg = SolverConfig::with_n(level(4));
    let mut prev: Option<(f64, f64)> = None;
    for lambda in [0.0, 0.5, 1.0, 2.0, 5.0, 10.0] {
        let sol = rvi_solve(&params, &cfg, lambda).unwrap();
        let eval = evaluate_policy_exact(&sol.policy, &params).unwrap();
        if let Some((d, j)) = prev {
            assert!(eval.avg_transmissions <= d + 1e-6, "lambda={lambda}");
            assert!(eval.avg_aoi >= j - 1e-6, "lambda={lambda}");
        }
        prev = Some((eval.avg_transmissions, eval.avg_aoi));
    }
}

#[test]
fn bisection_brackets_the_budget() {
    let params = fig2();
    let cfg = SolverConfig::with_n(level(4));
    let sol = bisection_solve(&params, &cfg).unwrap();
    assert!(!sol.constraint_slack);
    assert!(sol.lambda_plus - sol.lambda_minus < cfg.zeta);
    assert!(sol.eval_plus.avg_transmissions <= 1.6);
    assert!(sol.eval_minus.avg_transmissions >= 1.6);
    assert!((0.0..=1.0).contains(&sol.eta));
    assert!(sol.eval_minus.avg_aoi <= sol.j_mix + 1e-12);
    assert!(sol.j_mix <= sol.eval_plus.avg_aoi + 1e-12);
    // The mixture meets the budget with equality in expectation.
    assert!((sol.mixed_transmissions() - 1.6).abs() < 1e-9);
}
