//! Runs closed-loop episodes with the simulator as the planner's model: one
//! with the ground-truth goal cost and one with the hull-area cost.
//!
//! ```text
//! cargo run --release --example plan_episode
//! ```

use trass::config::Config;
use trass::pipeline::build_catalogs;
use trass::plan::{run_episode, DynamicsMode, Models, PolicyKind};
use trass::rng::seeded;
use trass::sim::{nearest_offset, sample_initial_state};

fn main() -> trass::Result<()> {
    let cfg = Config::default();
    let cat = build_catalogs(&cfg, 0)?;
    let pair = &cat.seen[3];
    let start = sample_initial_state(pair, &mut seeded(11), cfg.bench.near_separation, &cfg.sim)?;
    let models = Models { trm: None, dynamics: None };
    for kind in [PolicyKind::GroundTruthGoal, PolicyKind::ShapedHull] {
        let ep = run_episode(pair, &start, kind, models, DynamicsMode::Oracle, &cfg.episode(), &mut seeded(5))?;
        let dists: Vec<String> = ep
            .trace
            .iter()
            .map(|s| format!("{:.3}", nearest_offset(pair, &s.relative(), 0.0).1))
            .collect();
        println!("{:>5}: success {} after {} pushes", kind.name(), ep.success, ep.steps_used);
        println!("       distance to goal per step: {}", dists.join(" "));
    }
    Ok(())
}
