use dice_core::bandit::{BanditEnsemble, EnsembleConfig};
use dice_core::mdp::{
    builtin_environment, exact_policy_values, iterative_policy_values, random_policy, sample_episode, TabularMdp,
};
use dice_core::policy::{
    boltzmann_policy, entropy, solve_temperature_for_entropy, tau_to_x, x_to_tau, Temperature, TAU_MAX, TAU_MIN,
};
use dice_core::table::{PolicyTable, StateActionTable};
use dice_core::traces::{retrace_targets, vtrace_targets, TraceConfig, Trajectory};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn discounted_tails(traj: &Trajectory, gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; traj.len()];
    let mut acc = 0.0;
    for t in (0..traj.len()).rev() {
        acc = traj.steps[t].reward + gamma * acc;
        out[t] = acc;
    }
    out
}

fn values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, 2..6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn boltzmann_entropy_grows_with_temperature(v in values(), t1 in 0.05f64..20.0, t2 in 0.05f64..20.0) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let p_lo = boltzmann_policy(&v, Temperature::new(lo).unwrap()).unwrap();
        let p_hi = boltzmann_policy(&v, Temperature::new(hi).unwrap()).unwrap();
        prop_assert!((p_lo.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let max_h = (v.len() as f64).ln();
        prop_assert!(entropy(&p_lo) >= 0.0 && entropy(&p_hi) <= max_h + 1e-12);
        prop_assert!(entropy(&p_lo) <= entropy(&p_hi) + 1e-12);
    }

    #[test]
    fn entropy_target_is_met(v in values(), frac in 0.05f64..0.95) {
        let spread = v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min);
        prop_assume!(spread > 0.1);
        let target = frac * (v.len() as f64).ln();
        if let Ok(tau) = solve_temperature_for_entropy(&v, target) {
            let h = entropy(&boltzmann_policy(&v, tau).unwrap());
            prop_assert!((h - target).abs() < 1e-6, "{h} vs {target}");
        }
    }

    #[test]
    fn coordinate_map_round_trips(tau in 0.02f64..1e4) {
        let t = Temperature::new(tau).unwrap();
        let back = x_to_tau(tau_to_x(t)).unwrap().get();
        prop_assert!((back - tau).abs() <= 1e-9 * tau.max(1.0));
    }

    #[test]
    fn ensemble_proposals_stay_in_domain(seed in any::<u64>(), updates in 0usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut e = BanditEnsemble::new(&EnsembleConfig::default(), &mut rng).unwrap();
        for i in 0..updates {
            let tau = e.propose(&mut rng).unwrap();
            prop_assert!(tau.in_domain());
            e.update(tau, (i % 5) as f64).unwrap();
        }
        let best = e.best_temperature().unwrap().get();
        prop_assert!((TAU_MIN..=TAU_MAX).contains(&best));
    }

    #[test]
    fn exact_and_iterative_evaluation_agree(seed in any::<u64>(), ns in 2usize..6, na in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mdp = TabularMdp::random(&mut rng, ns, na, 0.8, true).unwrap();
        let pi = random_policy(&mut rng, ns, na, 0.1);
        let (v, q) = exact_policy_values(&mdp, &pi).unwrap();
        let v_it = iterative_policy_values(&mdp, &pi, 1e-12, 100_000).unwrap();
        for s in 0..ns {
            prop_assert!((v[s] - v_it[s]).abs() < 1e-8);
        }
        let ev = q.expectation_under(&pi);
        for s in (0..ns).filter(|s| !mdp.is_terminal(*s)) {
            prop_assert!((ev[s] - v[s]).abs() < 1e-9);
        }
    }

    #[test]
    fn on_policy_targets_with_zero_estimates_are_discounted_returns(seed in any::<u64>(), gamma in 0.5f64..0.99) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mdp = builtin_environment("deceptive-chain-6").unwrap();
        let pi = random_policy(&mut rng, mdp.n_states(), mdp.n_actions(), 0.2);
        let traj = sample_episode(&mdp, |s| pi.distribution(s), None, &mut rng, 500).unwrap();
        prop_assume!(traj.is_terminated());
        let cfg = TraceConfig::new(1.0, 1.0, gamma).unwrap();
        let expected = discounted_tails(&traj, gamma);
        let vs = vtrace_targets(&traj, &vec![0.0; mdp.n_states()], &pi, &cfg).unwrap();
        let q = StateActionTable::zeros(mdp.n_states(), mdp.n_actions());
        let qs = retrace_targets(&traj, &q, &pi, &cfg).unwrap();
        for t in 0..traj.len() {
            prop_assert!((vs[t] - expected[t]).abs() < 1e-9);
            prop_assert!((qs[t] - expected[t]).abs() < 1e-9);
        }
    }
}

#[test]
fn uniform_policy_table_rows_are_uniform() {
    let pi = PolicyTable::uniform(3, 4);
    for s in 0..3 {
        assert!(pi.row(s).iter().all(|p| (*p - 0.25).abs() < 1e-15));
    }
}
