//! Trains a small time-reversal model and forward-dynamics model from freshly
//! collected data and saves both checkpoints.
//!
//! ```text
//! cargo run --release --example train_models -- /tmp/models
//! ```

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use trass::config::Config;
use trass::data::dataset_digest;
use trass::learn::{train_dynamics, train_trm, trm_predict, write_dynamics, write_trm};
use trass::pipeline::{build_catalogs, reverse_dataset, transition_dataset};
use trass::rng::seeded;
use trass::sim::sample_initial_state;

fn main() -> trass::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "models".into()));
    std::fs::create_dir_all(&dir)?;
    let mut cfg = Config::default();
    cfg.data.n_traj = 400;
    cfg.data.transitions = 10_000;
    cfg.trm.epochs = 20;
    cfg.dynamics.epochs = 20;
    let cat = build_catalogs(&cfg, 0)?;

    let (h, trajs) = reverse_dataset(&cfg, 0, &cat.seen)?;
    let (trm, report) = train_trm(&trajs, &cat.all, cfg.data.horizon, &cfg.trm, &dataset_digest(&h, &trajs)?)?;
    println!("time-reversal model: final training mse {:.4}", report.final_loss);
    write_trm(BufWriter::new(File::create(dir.join("trm.ckpt"))?), &trm)?;

    let (h, ts) = transition_dataset(&cfg, 0, &cat.seen)?;
    let (dynamics, report) =
        train_dynamics(&ts, &cat.all, cfg.sim.pusher_radius, &cfg.dynamics, &dataset_digest(&h, &ts)?)?;
    println!(
        "dynamics model: final training mse {:.4}, held-out median position error {:?}",
        report.final_loss, report.heldout_median_pos_err
    );
    write_dynamics(BufWriter::new(File::create(dir.join("dyn.ckpt"))?), &dynamics)?;

    let pair = &cat.seen[0];
    let s = sample_initial_state(pair, &mut seeded(1), 0.15, &cfg.sim)?;
    for (k, p) in trm_predict(&trm, pair, &s)?.iter().enumerate() {
        println!("predicted step {}: male in female frame ({:+.3}, {:+.3}, {:+.2} rad)", k + 1, p.x, p.y, p.theta);
    }
    println!("checkpoints in {}", dir.display());
    Ok(())
}
