use relay_aoi::{
    evaluate_deployed, greedy_executor, mixing_executor, run_simulation, rvi_solve,
    table_executor, Action, PolicyExecutor, PolicyTable, SimState, SolverConfig, SystemParams,
    TruncationLevel,
};

/// Serves source 1 on both links at even slots and source 2 at odd slots.
struct Alternating;

impl PolicyExecutor for Alternating {
    fn decide(&mut self, state: &SimState) -> Action {
        if state.t.is_multiple_of(2) {
            Action::new(1, 1).unwrap()
        } else {
            Action::new(2, 2).unwrap()
        }
    }
}

#[test]
fn alternating_schedule_matches_hand_count() {
    // Perfect arrivals and links. Each source is sampled every slot, reaches
    // the relay on its slot and the destination one of its slots later, so
    // after warm-up each destination age cycles 3, 4 and the sum is 7 per
    // slot; the first three slots contribute 0+2+5 instead of 3*7.
    let params = SystemParams::new(1.0, 1.0, 1.0, 1.0, 2.0).unwrap();
    for horizon in [3u64, 4, 10, 1001] {
        let m = run_simulation(&mut Alternating, &params, horizon, 0).unwrap();
        let sum = m.avg_sum_aoi * horizon as f64;
        assert!((sum - (7 * horizon - 9) as f64).abs() < 1e-6, "T={horizon}: {sum}");
        assert_eq!(m.avg_transmissions, 2.0);
    }
}

#[test]
fn same_seed_same_trajectory() {
    let params = SystemParams::new(0.6, 0.9, 0.8, 0.7, 1.6).unwrap();
    let policy = rvi_solve(&params, &SolverConfig::default(), 1.37).unwrap().policy;
    let a = run_simulation(&mut table_executor(&policy), &params, 20_000, 42).unwrap();
    let b = run_simulation(&mut table_executor(&policy), &params, 20_000, 42).unwrap();
    assert_eq!(a, b);
    let c = run_simulation(&mut table_executor(&policy), &params, 20_000, 43).unwrap();
    assert_ne!(a.avg_sum_aoi, c.avg_sum_aoi);
}

#[test]
fn greedy_respects_its_budget() {
    let params = SystemParams::new(0.6, 0.9, 0.8, 0.7, 1.6).unwrap();
    for gamma in [0.4, 1.0, 1.3, 1.6, 2.0] {
        for horizon in [1u64, 7, 1000, 30_000] {
            let mut greedy = greedy_executor(gamma).unwrap();
            let m = run_simulation(&mut greedy, &params, horizon, 5).unwrap();
            assert!(
                m.avg_transmissions <= gamma + 2.0 / horizon as f64,
                "gamma={gamma} T={horizon}: {}",
                m.avg_transmissions
            );
        }
    }
    assert!(greedy_executor(0.0).is_err());
    assert!(greedy_executor(2.5).is_err());
}

#[test]
fn idle_policy_grows_without_bound() {
    let params = SystemParams::new(1.0, 1.0, 0.8, 0.7, 1.0).unwrap();
    let n = TruncationLevel::new(7).unwrap();
    let idle = PolicyTable::constant(n, Action::IDLE);
    let m = run_simulation(&mut table_executor(&idle), &params, 10_000, 1).unwrap();
    assert_eq!(m.avg_transmissions, 0.0);
    assert!(m.unbounded_trend);
    // The untruncated ages grow linearly: mean destination age is about T/2 each.
    assert!(m.avg_sum_aoi > 9_000.0);
}

#[test]
fn zero_horizon_is_rejected() {
    let params = SystemParams::new(1.0, 1.0, 1.0, 1.0, 2.0).unwrap();
    assert!(run_simulation(&mut Alternating, &params, 0, 0).is_err());
}

#[test]
fn mixing_draw_frequency_tracks_eta() {
    let n = TruncationLevel::new(2).unwrap();
    let plus = PolicyTable::constant(n, Action::IDLE);
    let minus = PolicyTable::constant(n, Action::new(1, 1).unwrap());
    let eta = 0.3;
    let draws = 4000;
    let hits = (0..draws)
        .filter(|&seed| mixing_executor(&plus, &minus, eta, seed).unwrap().chose_plus())
        .count();
    let freq = hits as f64 / draws as f64;
    // Five binomial standard deviations.
    let sd = (eta * (1.0 - eta) / draws as f64).sqrt();
    assert!((freq - eta).abs() < 5.0 * sd, "{freq}");
    assert!(mixing_executor(&plus, &minus, 1.2, 0).is_err());
    assert!(mixing_executor(&plus, &minus, 1.0, 9).unwrap().chose_plus());
    assert!(!mixing_executor(&plus, &minus, 0.0, 9).unwrap().chose_plus());
}

#[test]
fn long_run_matches_deployed_evaluation() {
    // The simulator runs on untruncated ages, so compare against the exact
    // chain on a truncation wide enough that the cap is rarely hit.
    let params = SystemParams::new(0.6, 0.9, 0.8, 0.7, 1.6).unwrap();
    let policy = rvi_solve(&params, &SolverConfig::default(), 1.37).unwrap().policy;
    let exact = evaluate_deployed(&policy, &params, TruncationLevel::new(16).unwrap()).unwrap();
    let runs: Vec<_> = (0..4)
        .map(|seed| run_simulation(&mut table_executor(&policy), &params, 100_000, seed).unwrap())
        .collect();
    let aoi = runs.iter().map(|m| m.avg_sum_aoi).sum::<f64>() / runs.len() as f64;
    let tx = runs.iter().map(|m| m.avg_transmissions).sum::<f64>() / runs.len() as f64;
    assert!((aoi - exact.avg_aoi).abs() / exact.avg_aoi < 0.01, "{aoi} vs {}", exact.avg_aoi);
    assert!((tx - exact.avg_transmissions).abs() < 0.01, "{tx} vs {}", exact.avg_transmissions);
}
