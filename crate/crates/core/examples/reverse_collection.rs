//! Collects reverse-exploration trajectories and writes them as JSON lines.
//!
//! ```text
//! cargo run --release --example reverse_collection -- /tmp/reverse.jsonl
//! ```

use std::fs::File;
use std::io::BufWriter;

use trass::config::Config;
use trass::data::{dataset_digest, write_dataset};
use trass::pipeline::{build_catalogs, reverse_dataset};

fn main() -> trass::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "reverse.jsonl".into());
    let mut cfg = Config::default();
    cfg.data.n_traj = 200;
    let cat = build_catalogs(&cfg, 0)?;
    let (header, trajs) = reverse_dataset(&cfg, 0, &cat.seen)?;
    write_dataset(BufWriter::new(File::create(&path)?), &header, &trajs)?;

    let starts: Vec<f64> = trajs.iter().map(|t| t.start().separation()).collect();
    let mean = starts.iter().sum::<f64>() / starts.len() as f64;
    println!("{} trajectories of {} states -> {path}", trajs.len(), trajs[0].states.len());
    println!("mean start separation {mean:.3} m (goal separation {:.3} m)", trajs[0].goal().separation());
    println!("digest {}", dataset_digest(&header, &trajs)?);
    Ok(())
}
