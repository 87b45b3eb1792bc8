//! A small benchmark table: hull and ground-truth costs on seen and unseen
//! pairs, planning with the simulator. Prints the results CSV.
//!
//! ```text
//! cargo run --release --example benchmark
//! ```

use trass::bench::{run_experiment, Artifacts, ExperimentSpec, Variant};
use trass::config::Config;
use trass::pipeline::build_catalogs;
use trass::plan::{DynamicsMode, Models, PolicyKind};

fn main() -> trass::Result<()> {
    let mut cfg = Config::default();
    cfg.bench.episodes = 8;
    let cat = build_catalogs(&cfg, 0)?;
    let art = Artifacts { seen: &cat.seen, unseen: &cat.unseen, models: Models { trm: None, dynamics: None } };
    let kinds = [PolicyKind::ShapedHull, PolicyKind::GroundTruthGoal];
    let mut table = None;
    for v in [Variant::Seen, Variant::Unseen] {
        let t = run_experiment(&ExperimentSpec::new(v, &kinds, DynamicsMode::Oracle, 0, cfg.clone()), &art)?;
        match &mut table {
            None => table = Some(t),
            Some(acc) => acc.merge(t),
        }
    }
    print!("{}", table.expect("two variants ran").to_csv());
    Ok(())
}
