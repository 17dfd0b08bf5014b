use proptest::prelude::*;
use relay_aoi::model::LinkRole;
use relay_aoi::sim::{sim_step, SimState, SourceAges, StepOutcome};
use relay_aoi::{
    enumerate_states, joint_transitions, source_transitions, Action, SourceState, SystemParams,
    TruncationLevel,
};

/// The case rows of the per-source kernel written out by hand in relative
/// coordinates, arrival outcome outermost.
fn case_rows(
    s: SourceState,
    role: LinkRole,
    mu: f64,
    p: f64,
    q: f64,
) -> Vec<(SourceState, f64)> {
    let (t, x, y) = (s.theta, s.x, s.y);
    let st = SourceState::new;
    match (role.tx, role.relay) {
        (true, true) => vec![
            (st(0, t + 1, x), mu * p * q),
            (st(0, x + t + 1, 0), mu * (1.0 - p) * q),
            (st(0, t + 1, y + x), mu * p * (1.0 - q)),
            (st(0, x + t + 1, y), mu * (1.0 - p) * (1.0 - q)),
            (st(t + 1, 0, x), (1.0 - mu) * p * q),
            (st(t + 1, x, 0), (1.0 - mu) * (1.0 - p) * q),
            (st(t + 1, 0, y + x), (1.0 - mu) * p * (1.0 - q)),
            (st(t + 1, x, y), (1.0 - mu) * (1.0 - p) * (1.0 - q)),
        ],
        (true, false) => vec![
            (st(0, t + 1, y + x), mu * p),
            (st(0, x + t + 1, y), mu * (1.0 - p)),
            (st(t + 1, 0, y + x), (1.0 - mu) * p),
            (st(t + 1, x, y), (1.0 - mu) * (1.0 - p)),
        ],
        (false, true) => vec![
            (st(0, x + t + 1, 0), mu * q),
            (st(0, x + t + 1, y), mu * (1.0 - q)),
            (st(t + 1, x, 0), (1.0 - mu) * q),
            (st(t + 1, x, y), (1.0 - mu) * (1.0 - q)),
        ],
        (false, false) => vec![(st(0, x + t + 1, y), mu), (st(t + 1, x, y), 1.0 - mu)],
    }
}

fn merged(rows: Vec<(SourceState, f64)>) -> Vec<(SourceState, f64)> {
    let mut out: Vec<(SourceState, f64)> = Vec::new();
    for (s, p) in rows {
        match out.iter_mut().find(|(t, _)| *t == s) {
            Some(e) => e.1 += p,
            None => out.push((s, p)),
        }
    }
    out.retain(|&(_, p)| p > 0.0);
    out
}

fn level(n: u32) -> TruncationLevel {
    TruncationLevel::new(n).unwrap()
}

fn role_strategy() -> impl Strategy<Value = LinkRole> {
    (any::<bool>(), any::<bool>()).prop_map(|(tx, relay)| LinkRole { tx, relay })
}

fn unclamped_source(n: u32) -> impl Strategy<Value = SourceState> {
    // Destination age at most N - 1, so every next age stays within N.
    (0..n, 0..n, 0..n)
        .prop_filter("room below the cap", move |&(t, x, y)| t + x + y < n)
        .prop_map(|(t, x, y)| SourceState::new(t, x, y))
}

proptest! {
    #[test]
    fn untruncated_rows_match_hand_cases(
        src in unclamped_source(7),
        role in role_strategy(),
        mu in 0.0..=1.0f64,
        p in 0.0..=1.0f64,
        q in 0.0..=1.0f64,
    ) {
        let got = source_transitions(src, role, mu, p, q, level(7)).unwrap();
        let want = merged(case_rows(src, role, mu, p, q));
        prop_assert_eq!(got, want);
    }

    #[test]
    fn next_states_stay_in_space_and_ordered(
        t in 0u32..=5, x in 0u32..=5, y in 0u32..=5,
        role in role_strategy(),
        mu in 0.0..=1.0f64,
        p in 0.0..=1.0f64,
        q in 0.0..=1.0f64,
    ) {
        let n = level(5);
        let src = SourceState::new(t, x, y);
        let out = source_transitions(src, role, mu, p, q, n).unwrap();
        let total: f64 = out.iter().map(|(_, p)| p).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for (next, prob) in &out {
            prop_assert!(*prob > 0.0);
            prop_assert!(next.within(n));
            // Clamping absolute ages keeps the destination age within N.
            prop_assert!(next.destination_age() <= 5);
        }
        for (i, (a, _)) in out.iter().enumerate() {
            prop_assert!(out[i + 1..].iter().all(|(b, _)| a != b));
        }
    }

    #[test]
    fn joint_kernel_factorizes(
        a in unclamped_source(4), b in unclamped_source(4),
        code in 0u8..9,
        mu1 in 0.0..=1.0f64, mu2 in 0.0..=1.0f64,
        p in 0.0..=1.0f64, q in 0.0..=1.0f64,
    ) {
        let n = level(4);
        let params = SystemParams::new(mu1, mu2, p, q, 1.0).unwrap();
        let action = Action::from_code(code).unwrap();
        let state = relay_aoi::State::new(a, b);
        let joint = joint_transitions(&state, action, &params, n).unwrap();
        let first = source_transitions(a, action.role(0), mu1, p, q, n).unwrap();
        let second = source_transitions(b, action.role(1), mu2, p, q, n).unwrap();
        prop_assert_eq!(joint.entries.len(), first.len() * second.len());
        for (s1, p1) in &first {
            for (s2, p2) in &second {
                let s = relay_aoi::State::new(*s1, *s2);
                prop_assert_eq!(joint.prob_of(&s), p1 * p2);
            }
        }
    }

    #[test]
    fn simulator_agrees_with_kernel_below_cap(
        src in unclamped_source(7),
        tx in any::<bool>(), relay in any::<bool>(),
        arrival in any::<bool>(), tx_ok in any::<bool>(), relay_ok in any::<bool>(),
    ) {
        let n = level(7);
        let action = Action::new(if tx { 1 } else { 2 }, if relay { 1 } else { 0 }).unwrap();
        let sim = SimState {
            ages: [
                SourceAges {
                    theta: src.theta as u64,
                    delta: src.relay_age() as u64,
                    dest: src.destination_age() as u64,
                },
                SourceAges::default(),
            ],
            ..SimState::default()
        };
        let outcome = StepOutcome { arrivals: [arrival, false], tx_success: tx_ok, relay_success: relay_ok };
        let next = sim_step(&sim, action, outcome);
        let rel = next.ages[0].relative_clamped(7);
        // Generic probabilities so every outcome has positive mass.
        let kernel = source_transitions(src, action.role(0), 0.3, 0.6, 0.45, n).unwrap();
        prop_assert!(kernel.iter().any(|(s, _)| *s == rel));
    }
}

#[test]
fn idle_kernel_depends_only_on_arrivals() {
    let n = level(4);
    for s in enumerate_states(n).iter().step_by(37) {
        let a = joint_transitions(s, Action::IDLE, &SystemParams::new(0.3, 0.7, 0.1, 0.2, 1.0).unwrap(), n)
            .unwrap();
        let b = joint_transitions(s, Action::IDLE, &SystemParams::new(0.3, 0.7, 0.9, 0.95, 1.0).unwrap(), n)
            .unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn normalization_exhaustive_small() {
    let n = level(2);
    let params = SystemParams::new(0.6, 0.9, 0.8, 0.7, 1.6).unwrap();
    for s in enumerate_states(n) {
        for a in Action::ALL {
            let d = joint_transitions(&s, a, &params, n).unwrap();
            assert!((d.total() - 1.0).abs() <= 1e-12, "{s} {a}");
            assert!(d.entries.iter().all(|(t, p)| t.within(n) && *p > 0.0));
        }
    }
}

#[test]
fn clamp_rows_collapse_and_merge() {
    // With every age at the cap all eight rows land on the same state.
    let n = level(3);
    let out = source_transitions(SourceState::new(3, 0, 0), LinkRole { tx: true, relay: true }, 0.0, 0.5, 0.5, n)
        .unwrap();
    assert_eq!(out, vec![(SourceState::new(3, 0, 0), 1.0)]);

    let out = source_transitions(SourceState::new(1, 1, 1), LinkRole { tx: false, relay: false }, 0.5, 0.5, 0.5, n)
        .unwrap();
    // Delta = 3 is already at the cap: y' = [Delta+1]_N - [delta+1]_N.
    assert_eq!(out, vec![(SourceState::new(0, 3, 0), 0.5), (SourceState::new(2, 1, 0), 0.5)]);
}
