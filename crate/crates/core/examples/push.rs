//! Pushes a block with the quasi-static simulator, then breaks a mated pair
//! apart with random perturbations.
//!
//! ```text
//! cargo run --example push
//! ```

use trass::blocks::enumerate_pairs;
use trass::rng::seeded;
use trass::sim::{is_success, random_perturbation, sample_goal_state, step, SimConfig};
use trass::{PushAction, Pose2, WorldState};

fn main() -> trass::Result<()> {
    let cfg = SimConfig::default();
    let pair = &enumerate_pairs(3)?[0];

    // A straight push 2 cm above the male's centroid turns it as it goes.
    let s = WorldState {
        pair_id: pair.id.clone(),
        female_pose: Pose2::new(-0.15, -0.15, 0.0),
        male_pose: Pose2::new(0.05, 0.0, 0.0),
    };
    let push = PushAction::new(-0.15, 0.02, 0.12, 0.02);
    let t = step(pair, &s, &push, &cfg);
    println!("male before {:?}\nmale after  {:?}", s.male_pose, t.male_pose);

    // Random perturbations from a mated state.
    let mut rng = seeded(7);
    let mut state = sample_goal_state(pair, &mut rng, &cfg);
    println!("\nstart mated: {}", is_success(&state, pair, &cfg));
    for k in 1..=6 {
        let a = random_perturbation(pair, &state, &mut rng, &cfg);
        state = step(pair, &state, &a, &cfg);
        println!(
            "perturbation {k}: separation {:.3} m, mated {}, overlap {:.1e}",
            state.separation(),
            is_success(&state, pair, &cfg),
            state.overlap_depth(pair)
        );
    }
    Ok(())
}
