use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tddlab_core::envs::{
    eval_weighting, make_env, sample_episode, sample_episode_from, true_values, BairdPolicy, EnvSpec,
    Representation, Task, Weighting,
};

fn mean_and_se(sum: f64, sum_sq: f64, n: f64) -> (f64, f64) {
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn analytic_visits_match_monte_carlo() {
    let env = make_env::<f64>(Task::RandomWalk {
        states: 3,
        representation: Representation::Tabular,
    })
    .unwrap();
    // Green's function of the symmetric walk absorbed at 0 and 4, started at 2:
    // G(2, k) = 2·min(2,k)·(4 − max(2,k))/4 = (1, 2, 1).
    let expected_visits = [1.0, 2.0, 1.0];
    let d = eval_weighting(&env, Weighting::AnalyticVisit).unwrap();
    for (k, want) in expected_visits.iter().enumerate() {
        assert!((d[k + 1] - want / 4.0).abs() < 1e-12);
    }

    let episodes = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut sum = [0.0; 3];
    let mut sum_sq = [0.0; 3];
    for _ in 0..episodes {
        let ep = sample_episode(&env, &mut rng, 10_000);
        let mut counts = [0.0; 3];
        for t in ep.iter() {
            counts[t.state_index - 1] += 1.0;
        }
        for k in 0..3 {
            sum[k] += counts[k];
            sum_sq[k] += counts[k] * counts[k];
        }
    }
    for k in 0..3 {
        let (mean, se) = mean_and_se(sum[k], sum_sq[k], episodes as f64);
        assert!((mean - expected_visits[k]).abs() <= 3.0 * se, "state {}: {mean} (se {se})", k + 1);
    }
}

fn check_values_by_rollout(env: &EnvSpec<f64>, episodes: usize, seed: u64) {
    let truth = true_values(env);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in (0..env.n_states).filter(|&s| !env.terminal[s]) {
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..episodes {
            let ep = sample_episode_from(env, s, &mut rng, 100_000);
            let g: f64 = ep.iter().map(|t| t.reward).sum();
            sum += g;
            sum_sq += g * g;
        }
        let (mean, se) = mean_and_se(sum, sum_sq, episodes as f64);
        assert!(
            (mean - truth[s]).abs() <= 3.0 * se + 1e-12,
            "{} state {s}: {mean} vs {} (se {se})",
            env.task.label(),
            truth[s]
        );
    }
}

#[test]
fn monte_carlo_returns_match_true_values() {
    let rw = make_env::<f64>(Task::RandomWalk {
        states: 10,
        representation: Representation::Tabular,
    })
    .unwrap();
    check_values_by_rollout(&rw, 100_000, 200);
    let boyan = make_env::<f64>(Task::Boyan { features: 20 }).unwrap();
    check_values_by_rollout(&boyan, 100_000, 201);
}

#[test]
fn boyan_values_exact_at_spikes() {
    let env = make_env::<f64>(Task::Boyan { features: 20 }).unwrap();
    let v = true_values(&env);
    let last = env.n_states - 1;
    for s in (0..env.n_states).step_by(4) {
        let distance = (last - s) as f64;
        assert!((v[s] + 0.2 * distance).abs() < 1e-12, "state {s}: {}", v[s]);
    }
}

#[test]
fn baird_ratios_follow_policy_choice() {
    let derived = make_env::<f64>(Task::Baird {
        states: 7,
        policy: BairdPolicy::Derived,
    })
    .unwrap();
    let classic = make_env::<f64>(Task::Baird {
        states: 7,
        policy: BairdPolicy::Classic,
    })
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..1000 {
        let t = sample_episode(&derived, &mut rng, 1).transitions[0];
        assert!((t.rho - 6.0 / 7.0).abs() < 1e-14 || (t.rho - 7.0).abs() < 1e-14);
        let t = sample_episode(&classic, &mut rng, 1).transitions[0];
        assert!(t.rho == 0.0 || (t.rho - 7.0).abs() < 1e-14);
    }
}

fn any_task() -> impl Strategy<Value = Task> {
    prop_oneof![
        prop::sample::select(vec![10usize, 20, 40]).prop_map(|m| Task::RandomWalk {
            states: m,
            representation: Representation::Tabular
        }),
        Just(Task::RandomWalk {
            states: 20,
            representation: Representation::Interpolated { features: 5 }
        }),
        prop::sample::select(vec![20usize, 50]).prop_map(|p| Task::Boyan { features: p }),
        prop::sample::select(vec![BairdPolicy::Derived, BairdPolicy::Classic])
            .prop_map(|policy| Task::Baird { states: 7, policy }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn episodes_are_well_formed(task in any_task(), seed in any::<u64>()) {
        let env = make_env::<f64>(task).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ep = sample_episode(&env, &mut rng, 10_000);
        prop_assert!(!ep.is_empty());
        for pair in ep.transitions.windows(2) {
            prop_assert_eq!(pair[0].next_state_index, pair[1].state_index);
        }
        for t in ep.iter() {
            prop_assert!(t.rho >= 0.0);
            if env.is_on_policy() {
                prop_assert_eq!(t.rho, 1.0);
            }
            if t.is_terminal_next {
                prop_assert!(t.x_next.iter().all(|&v| v == 0.0));
            }
            prop_assert_eq!(t.x, env.features.row(t.state_index));
        }
        if !env.continuing {
            prop_assert!(ep.transitions.last().unwrap().is_terminal_next);
        }
    }

    #[test]
    fn probability_rows_sum_to_one(task in any_task()) {
        let env = make_env::<f64>(task).unwrap();
        for s in 0..env.n_states {
            if env.terminal[s] {
                continue;
            }
            for policy in [&env.behavior[s], &env.target[s]] {
                prop_assert!((policy.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
            for outcomes in &env.transitions[s] {
                prop_assert!((outcomes.iter().map(|o| o.probability).sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }
    }
}
