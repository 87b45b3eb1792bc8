//! Renders a mated pair and a planned episode to PPM images.
//!
//! ```text
//! cargo run --release --example render -- /tmp/frames
//! ```

use std::path::PathBuf;

use trass::bench::{render_state, render_trajectory};
use trass::config::Config;
use trass::pipeline::build_catalogs;
use trass::plan::{run_episode, DynamicsMode, Models, PolicyKind};
use trass::rng::seeded;
use trass::sim::{sample_goal_state, sample_initial_state};

fn main() -> trass::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "frames".into()));
    let cfg = Config::default();
    let cat = build_catalogs(&cfg, 0)?;
    let pair = &cat.seen[1];

    std::fs::create_dir_all(&dir)?;
    let goal = sample_goal_state(pair, &mut seeded(2), &cfg.sim);
    render_state(&goal, pair, &cfg.sim, None, &dir.join("mated.ppm"))?;

    let start = sample_initial_state(pair, &mut seeded(3), cfg.bench.near_separation, &cfg.sim)?;
    let models = Models { trm: None, dynamics: None };
    let ep = run_episode(pair, &start, PolicyKind::GroundTruthGoal, models, DynamicsMode::Oracle, &cfg.episode(), &mut seeded(4))?;
    let frames = render_trajectory(&ep.trace, pair, &cfg.sim, &dir.join("episode"))?;
    println!("mated.ppm and {} episode frames in {} (success {})", frames.len(), dir.display(), ep.success);
    Ok(())
}
