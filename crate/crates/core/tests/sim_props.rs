use proptest::prelude::*;
use trass::blocks::enumerate_pairs;
use trass::geometry::Pose2;
use trass::rng::seeded;
use trass::sim::{
    is_success, random_action, random_perturbation, sample_goal_state, sample_initial_state, step, SimConfig,
};
use trass::BlockPair;

fn catalog() -> Vec<BlockPair> {
    enumerate_pairs(3).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn step_is_deterministic_and_never_interpenetrates(pi in 0usize..32, seed in any::<u64>(), goal in any::<bool>()) {
        let pairs = catalog();
        let pair = &pairs[pi % pairs.len()];
        let cfg = SimConfig::default();
        let mut rng = seeded(seed);
        let mut s = if goal {
            sample_goal_state(pair, &mut rng, &cfg)
        } else {
            sample_initial_state(pair, &mut rng, 0.0, &cfg).unwrap()
        };
        for _ in 0..5 {
            let a = if goal { random_perturbation(pair, &s, &mut rng, &cfg) } else { random_action(&mut rng) };
            let next = step(pair, &s, &a, &cfg);
            prop_assert_eq!(&next, &step(pair, &s, &a, &cfg));
            prop_assert!(next.overlap_depth(pair) < 1e-6, "depth {}", next.overlap_depth(pair));
            for p in [next.female_pose, next.male_pose] {
                prop_assert!(p.x.abs() <= cfg.workspace_halfwidth && p.y.abs() <= cfg.workspace_halfwidth);
            }
            s = next;
        }
    }

    #[test]
    fn success_ignores_rigid_motion(pi in 0usize..32, seed in any::<u64>(), x in -0.1..0.1f64, y in -0.1..0.1f64, t in -3.2..3.2f64) {
        let pairs = catalog();
        let pair = &pairs[pi % pairs.len()];
        let cfg = SimConfig::default();
        let mut rng = seeded(seed);
        let m = Pose2::new(x, y, t);
        let g = sample_goal_state(pair, &mut rng, &cfg);
        prop_assert!(is_success(&g.moved_by(&m), pair, &cfg));
        let s = sample_initial_state(pair, &mut rng, 0.0, &cfg).unwrap();
        prop_assert_eq!(is_success(&s, pair, &cfg), is_success(&s.moved_by(&m), pair, &cfg));
    }
}

#[test]
fn goal_heading_is_uniform() {
    let pairs = catalog();
    let cfg = SimConfig::default();
    let mut rng = seeded(11);
    let mut th: Vec<f64> = (0..1000)
        .map(|i| sample_goal_state(&pairs[i % pairs.len()], &mut rng, &cfg).female_pose.theta)
        .collect();
    th.sort_by(f64::total_cmp);
    let n = th.len() as f64;
    let pi = std::f64::consts::PI;
    let ks = th
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let f = (t + pi) / (2.0 * pi);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks < 0.05, "KS statistic {ks}");
}

#[test]
fn perturbations_from_goals_move_blocks() {
    let pairs = catalog();
    let cfg = SimConfig::default();
    let mut rng = seeded(12);
    let moved = (0..1000)
        .filter(|i| {
            let pair = &pairs[i % pairs.len()];
            let g = sample_goal_state(pair, &mut rng, &cfg);
            let a = random_perturbation(pair, &g, &mut rng, &cfg);
            step(pair, &g, &a, &cfg) != g
        })
        .count();
    assert!(moved >= 950, "{moved} / 1000");
}

#[test]
fn twenty_perturbations_usually_separate_the_pair() {
    let pairs = catalog();
    let cfg = SimConfig::default();
    let apart = (0..200u64)
        .filter(|&i| {
            let mut rng = seeded(1000 + i);
            let pair = &pairs[i as usize % pairs.len()];
            let mut s = sample_goal_state(pair, &mut rng, &cfg);
            for _ in 0..20 {
                let a = random_perturbation(pair, &s, &mut rng, &cfg);
                s = step(pair, &s, &a, &cfg);
            }
            s.separation() > 0.10
        })
        .count();
    assert!(apart >= 100, "{apart} / 200");
}

#[test]
fn far_initialisation_is_feasible_and_never_solved() {
    let pairs = catalog();
    let cfg = SimConfig::default();
    let mut rng = seeded(13);
    for i in 0..200 {
        let pair = &pairs[i % pairs.len()];
        let s = sample_initial_state(pair, &mut rng, 0.30, &cfg).unwrap();
        assert!(s.separation() >= 0.30);
        assert!(s.overlap_depth(pair) == 0.0);
        assert!(!is_success(&s, pair, &cfg));
    }
}
