//! Enumerates the block pairs that tile a 3×3 square, splits them into seen
//! and unseen sets, and draws each pair as text.
//!
//! ```text
//! cargo run --example catalog
//! ```

use trass::blocks::{enumerate_pairs, split_catalog, Piece};
use trass::rng::derive_seed;

fn main() -> trass::Result<()> {
    let pairs = enumerate_pairs(3)?;
    let (seen, unseen) = split_catalog(&pairs, derive_seed(0, &["split"]), 0.2)?;
    println!("{} pairs: {} seen, {} unseen\n", pairs.len(), seen.len(), unseen.len());
    for pair in pairs.iter().take(6) {
        println!("{}  ({} mating offsets)", pair.id, pair.mating_offsets.len());
        let (f, m) = (pair.shape(Piece::Female).bitmap(), pair.shape(Piece::Male).bitmap());
        let row = |b: &[f64; 9], y: usize, ch: char| (0..3).map(|x| if b[y * 3 + x] > 0.0 { ch } else { '.' }).collect::<String>();
        for y in (0..3).rev() {
            println!("  {}   {}", row(&f, y, 'F'), row(&m, y, 'M'));
        }
    }
    println!("\nunseen: {}", unseen.iter().map(|p| p.id.as_str()).collect::<Vec<_>>().join(" "));
    Ok(())
}
