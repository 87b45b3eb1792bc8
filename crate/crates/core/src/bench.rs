//! Experiment harness: success-rate tables over the Seen, Seen-Far and Unseen
//! variants, their on-disk form, and plain-PPM rendering of scenes.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::blocks::{BlockPair, Piece};
use crate::config::Config;
use crate::geometry::{ang_dist, Pose2, Vec2};
use crate::learn::{trm_predict, write_dynamics, write_trm, TrmModel};
use crate::plan::{run_episode, DynamicsMode, Models, PolicyKind};
use crate::rng::{derive, digest_hex};
use crate::sim::{sample_initial_state, SimConfig, WorldState};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    Seen,
    SeenFar,
    Unseen,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Seen, Variant::SeenFar, Variant::Unseen];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Seen => "seen",
            Variant::SeenFar => "seen-far",
            Variant::Unseen => "unseen",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "seen" | "Seen" => Ok(Variant::Seen),
            "seen-far" | "far" | "SeenFar" => Ok(Variant::SeenFar),
            "unseen" | "Unseen" => Ok(Variant::Unseen),
            _ => Err(Error::InvalidArgument(format!("unknown variant {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub variant: Variant,
    pub kinds: Vec<PolicyKind>,
    pub episodes: usize,
    pub seed: u64,
    pub dynamics: DynamicsMode,
    pub config: Config,
}

impl ExperimentSpec {
    pub fn new(variant: Variant, kinds: &[PolicyKind], dynamics: DynamicsMode, seed: u64, config: Config) -> Self {
        Self {
            variant,
            kinds: kinds.to_vec(),
            episodes: config.bench.episodes,
            seed,
            dynamics,
            config,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::InvalidArgument("episodes must be at least 1".into()));
        }
        if self.kinds.is_empty() {
            return Err(Error::InvalidArgument("no policy kinds to run".into()));
        }
        self.config.validate()
    }

    pub fn min_separation(&self) -> f64 {
        match self.variant {
            Variant::Seen | Variant::Unseen => self.config.bench.near_separation,
            Variant::SeenFar => self.config.bench.far_separation,
        }
    }

    pub fn digest(&self) -> Result<String> {
        Ok(digest_hex(serde_json::to_string(self)?.as_bytes()))
    }
}

/// The block pairs and trained models an experiment draws on.
#[derive(Debug, Clone, Copy)]
pub struct Artifacts<'a> {
    pub seen: &'a [BlockPair],
    pub unseen: &'a [BlockPair],
    pub models: Models<'a>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub variant: Variant,
    pub kind: PolicyKind,
    pub successes: usize,
    pub episodes: usize,
    pub rate: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub variant: Variant,
    pub kind: PolicyKind,
    pub index: usize,
    pub pair_id: String,
    pub seed: u64,
    /// Centroid distance at the start of the episode, meters.
    pub initial_separation: f64,
    pub success: bool,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub master_seed: u64,
    pub dynamics: DynamicsMode,
    pub spec_digest: String,
    pub trm_digest: Option<String>,
    pub dynamics_digest: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub cells: Vec<CellResult>,
    pub episodes: Vec<EpisodeRecord>,
    pub provenance: Vec<Provenance>,
}

impl ResultsTable {
    pub fn rate(&self, variant: Variant, kind: PolicyKind) -> Option<f64> {
        self.cell(variant, kind).map(|c| c.rate)
    }

    pub fn cell(&self, variant: Variant, kind: PolicyKind) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.variant == variant && c.kind == kind)
    }

    pub fn merge(&mut self, other: ResultsTable) {
        self.cells.extend(other.cells);
        self.episodes.extend(other.episodes);
        self.provenance.extend(other.provenance);
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("variant,kind,successes,episodes,rate,se\n");
        for c in &self.cells {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                c.variant.name(),
                c.kind.name(),
                c.successes,
                c.episodes,
                c.rate,
                c.se
            );
        }
        s
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }

    /// Provenance and per-episode outcomes as pretty JSON.
    pub fn write_sidecar<W: Write>(&self, mut w: W) -> Result<()> {
        #[derive(Serialize)]
        struct Sidecar<'a> {
            provenance: &'a [Provenance],
            episodes: &'a [EpisodeRecord],
        }
        serde_json::to_writer_pretty(
            &mut w,
            &Sidecar {
                provenance: &self.provenance,
                episodes: &self.episodes,
            },
        )?;
        writeln!(w)?;
        Ok(())
    }
}

/// Binomial rate and its standard error.
pub fn success_rate_with_se(successes: usize, episodes: usize) -> Result<(f64, f64)> {
    if episodes == 0 || successes > episodes {
        return Err(Error::InvalidArgument(format!("{successes} successes out of {episodes} episodes")));
    }
    let rate = successes as f64 / episodes as f64;
    Ok((rate, (rate * (1.0 - rate) / episodes as f64).sqrt()))
}

fn model_digests(models: &Models) -> Result<(Option<String>, Option<String>)> {
    let trm = match models.trm {
        Some(m) => {
            let mut buf = Vec::new();
            write_trm(&mut buf, m)?;
            Some(digest_hex(&buf))
        }
        None => None,
    };
    let dynamics = match models.dynamics {
        Some(m) => {
            let mut buf = Vec::new();
            write_dynamics(&mut buf, m)?;
            Some(digest_hex(&buf))
        }
        None => None,
    };
    Ok((trm, dynamics))
}

/// Runs every requested policy on the same `episodes` start states.
///
/// Start states depend on (seed, variant, index) only, so the policies face
/// identical scenes; the planner stream adds the policy kind.
pub fn run_experiment(spec: &ExperimentSpec, art: &Artifacts) -> Result<ResultsTable> {
    spec.validate()?;
    if spec.dynamics == DynamicsMode::Learned && art.models.dynamics.is_none() {
        return Err(Error::Missing("dynamics checkpoint".into()));
    }
    if spec.kinds.contains(&PolicyKind::TrmCost) && art.models.trm.is_none() {
        return Err(Error::Missing("time-reversal checkpoint".into()));
    }
    let pool = match spec.variant {
        Variant::Seen | Variant::SeenFar => art.seen,
        Variant::Unseen => art.unseen,
    };
    if pool.is_empty() {
        return Err(Error::InvalidArgument(format!("no pairs for variant {}", spec.variant.name())));
    }
    let ep_cfg = spec.config.episode();
    let vname = spec.variant.name();
    let starts: Vec<(&BlockPair, WorldState)> = (0..spec.episodes)
        .map(|i| {
            let mut rng = derive(spec.seed, &["start", vname, &i.to_string()]);
            let pair = &pool[rand::Rng::gen_range(&mut rng, 0..pool.len())];
            sample_initial_state(pair, &mut rng, spec.min_separation(), &spec.config.sim).map(|s| (pair, s))
        })
        .collect::<Result<_>>()?;
    let mut table = ResultsTable {
        cells: Vec::new(),
        episodes: Vec::new(),
        provenance: Vec::new(),
    };
    for &kind in &spec.kinds {
        let mut successes = 0;
        for (i, (pair, start)) in starts.iter().enumerate() {
            let seed = crate::rng::derive_seed(spec.seed, &["plan", vname, kind.name(), &i.to_string()]);
            let mut rng = crate::rng::seeded(seed);
            let ep = run_episode(pair, start, kind, art.models, spec.dynamics, &ep_cfg, &mut rng)?;
            successes += ep.success as usize;
            table.episodes.push(EpisodeRecord {
                variant: spec.variant,
                kind,
                index: i,
                pair_id: pair.id.clone(),
                seed,
                initial_separation: start.separation(),
                success: ep.success,
                steps: ep.steps_used,
            });
        }
        let (rate, se) = success_rate_with_se(successes, spec.episodes)?;
        table.cells.push(CellResult {
            variant: spec.variant,
            kind,
            successes,
            episodes: spec.episodes,
            rate,
            se,
        });
    }
    let (trm_digest, dynamics_digest) = model_digests(&art.models)?;
    table.provenance.push(Provenance {
        master_seed: spec.seed,
        dynamics: spec.dynamics,
        spec_digest: spec.digest()?,
        trm_digest,
        dynamics_digest,
    });
    Ok(table)
}

/// How often the time-reversal model's last predicted pose lands near a
/// mating offset, over `n` fresh scenes whose centroids are at most
/// `max_separation` apart. Returns (hits, n).
#[allow(clippy::too_many_arguments)]
pub fn trm_goal_reach(
    model: &TrmModel,
    pairs: &[BlockPair],
    n: usize,
    max_separation: f64,
    pos_tol: f64,
    ang_tol: f64,
    seed: u64,
    sim: &SimConfig,
) -> Result<(usize, usize)> {
    if pairs.is_empty() || n == 0 {
        return Err(Error::InvalidArgument("need pairs and at least one scene".into()));
    }
    let mut hits = 0;
    for i in 0..n {
        let mut rng = derive(seed, &["reach", &i.to_string()]);
        let pair = &pairs[rand::Rng::gen_range(&mut rng, 0..pairs.len())];
        let state = loop {
            let s = sample_initial_state(pair, &mut rng, 0.0, sim)?;
            if s.separation() <= max_separation {
                break s;
            }
        };
        let last = *trm_predict(model, pair, &state)?
            .last()
            .ok_or_else(|| Error::InvalidArgument("model has zero horizon".into()))?;
        let near = pair.mating_offsets.iter().any(|g| {
            (last.translation() - g.translation()).norm() <= pos_tol && ang_dist(last.theta, g.theta) <= ang_tol
        });
        hits += near as usize;
    }
    Ok((hits, n))
}

/// Side length of rendered images in pixels.
pub const RENDER_SIZE: usize = 400;
/// Border around the workspace in rendered images, meters. Wider than any
/// piece's circumradius, so a block clamped at the edge is drawn whole.
pub const RENDER_MARGIN: f64 = 0.12;

pub const FEMALE_RGB: [u8; 3] = [214, 96, 77];
pub const MALE_RGB: [u8; 3] = [67, 147, 195];
const OVERLAP_RGB: [u8; 3] = [118, 42, 131];
const BOUNDARY_RGB: [u8; 3] = [90, 90, 90];
const OVERLAY_RGB: [u8; 3] = [27, 120, 55];
const BACKGROUND_RGB: [u8; 3] = [255, 255, 255];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

impl Image {
    fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![BACKGROUND_RGB; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    fn set(&mut self, x: usize, y: usize, c: [u8; 3]) {
        self.pixels[y * self.width + x] = c;
    }

    /// Pixels painted with either block color (including overlap).
    pub fn block_pixels(&self) -> usize {
        self.pixels
            .iter()
            .filter(|p| **p == FEMALE_RGB || **p == MALE_RGB || **p == OVERLAP_RGB)
            .count()
    }

    /// Plain (P3) PPM text.
    pub fn to_ppm(&self) -> String {
        let mut s = format!("P3\n{} {}\n255\n", self.width, self.height);
        for row in self.pixels.chunks(self.width) {
            let line: Vec<String> = row.iter().map(|[r, g, b]| format!("{r} {g} {b}")).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }
}

/// World-to-pixel mapping over the workspace plus margin, +y up.
struct Raster {
    half: f64,
    scale: f64,
}

impl Raster {
    fn new(sim: &SimConfig) -> Self {
        let half = sim.workspace_halfwidth + RENDER_MARGIN;
        Self {
            half,
            scale: RENDER_SIZE as f64 / (2.0 * half),
        }
    }

    fn pixel_center(&self, px: usize, py: usize) -> Vec2 {
        Vec2::new(
            (px as f64 + 0.5) / self.scale - self.half,
            self.half - (py as f64 + 0.5) / self.scale,
        )
    }

    fn to_pixel(&self, p: Vec2) -> (f64, f64) {
        ((p.x + self.half) * self.scale, (self.half - p.y) * self.scale)
    }

    /// Pixel index range covering `[lo, hi]` in pixel coordinates, clipped.
    fn span(lo: f64, hi: f64) -> std::ops::Range<usize> {
        let a = lo.floor().max(0.0) as usize;
        let b = (hi.ceil().max(0.0) as usize).min(RENDER_SIZE);
        a.min(b)..b
    }
}

/// Top-down view: both blocks filled, the workspace boundary, and optionally
/// the male poses of a predicted relative trajectory as dots.
pub fn render_image(state: &WorldState, pair: &BlockPair, sim: &SimConfig, overlay: Option<&[Pose2]>) -> Image {
    let r = Raster::new(sim);
    let mut img = Image::new(RENDER_SIZE, RENDER_SIZE);
    let w = sim.workspace_halfwidth;
    let (b0, _) = r.to_pixel(Vec2::new(-w, w));
    let (b1, _) = r.to_pixel(Vec2::new(w, -w));
    let (lo, hi) = (b0.round() as usize, (b1.round() as usize).min(RENDER_SIZE - 1));
    for k in lo..=hi {
        for (x, y) in [(k, lo), (k, hi), (lo, k), (hi, k)] {
            img.set(x, y, BOUNDARY_RGB);
        }
    }
    let shapes = Piece::BOTH.map(|p| state.world_geometry(pair, p));
    let mut painted = vec![0u8; RENDER_SIZE * RENDER_SIZE];
    for (bit, shape) in [1u8, 2u8].into_iter().zip(&shapes) {
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for v in &shape.outline.vertices {
            let (px, py) = r.to_pixel(*v);
            x0 = x0.min(px);
            y0 = y0.min(py);
            x1 = x1.max(px);
            y1 = y1.max(py);
        }
        for py in Raster::span(y0, y1) {
            for px in Raster::span(x0, x1) {
                if shape.contains(r.pixel_center(px, py)) {
                    painted[py * RENDER_SIZE + px] |= bit;
                }
            }
        }
    }
    for (i, &m) in painted.iter().enumerate() {
        let c = match m {
            1 => FEMALE_RGB,
            2 => MALE_RGB,
            3 => OVERLAP_RGB,
            _ => continue,
        };
        img.pixels[i] = c;
    }
    if let Some(traj) = overlay {
        for rel in traj {
            let p = state.female_pose.compose(rel).translation();
            let (px, py) = r.to_pixel(p);
            for y in Raster::span(py - 2.0, py + 2.0) {
                for x in Raster::span(px - 2.0, px + 2.0) {
                    img.set(x, y, OVERLAY_RGB);
                }
            }
        }
    }
    img
}

pub fn render_state(
    state: &WorldState,
    pair: &BlockPair,
    sim: &SimConfig,
    overlay: Option<&[Pose2]>,
    path: &Path,
) -> Result<()> {
    std::fs::write(path, render_image(state, pair, sim, overlay).to_ppm())?;
    Ok(())
}

/// One numbered frame per state (`000.ppm`, `001.ppm`, ...).
pub fn render_trajectory(trace: &[WorldState], pair: &BlockPair, sim: &SimConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    if trace.is_empty() {
        return Err(Error::InvalidArgument("empty trace".into()));
    }
    std::fs::create_dir_all(dir)?;
    let width = (trace.len() - 1).to_string().len().max(3);
    trace
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let path = dir.join(format!("{i:0width$}.ppm"));
            render_state(s, pair, sim, None, &path)?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::enumerate_pairs;
    use crate::rng::seeded;
    use crate::sim::sample_goal_state;

    #[test]
    fn margin_covers_every_piece() {
        for pair in enumerate_pairs(3).unwrap() {
            for p in Piece::BOTH {
                assert!(pair.radius(p) < RENDER_MARGIN, "{}", pair.id);
            }
        }
    }

    #[test]
    fn se_examples() {
        let (r, se) = success_rate_with_se(15, 20).unwrap();
        assert_eq!(r, 0.75);
        assert!((se - 0.0968).abs() < 1e-4);
        assert_eq!(success_rate_with_se(0, 10).unwrap(), (0.0, 0.0));
        assert_eq!(success_rate_with_se(50, 100).unwrap(), (0.5, 0.05));
        assert!(success_rate_with_se(1, 0).is_err());
        assert!(success_rate_with_se(3, 2).is_err());
    }

    #[test]
    fn mated_render_covers_nine_cells() {
        let pairs = enumerate_pairs(3).unwrap();
        let sim = SimConfig::default();
        let px_area = (2.0 * (sim.workspace_halfwidth + RENDER_MARGIN) / RENDER_SIZE as f64).powi(2);
        let want = 9.0 * sim.cell_size * sim.cell_size / px_area;
        let mut rng = seeded(3);
        for pair in pairs.iter().take(6) {
            let s = sample_goal_state(pair, &mut rng, &sim);
            let got = render_image(&s, pair, &sim, None).block_pixels() as f64;
            assert!((got - want).abs() <= 0.02 * want, "{}: {got} vs {want}", pair.id);
        }
    }

    #[test]
    fn out_of_workspace_is_clipped() {
        let pairs = enumerate_pairs(3).unwrap();
        let sim = SimConfig::default();
        let s = WorldState {
            pair_id: pairs[0].id.clone(),
            female_pose: Pose2::new(0.5, 0.5, 0.3),
            male_pose: Pose2::new(-0.29, 0.0, 1.0),
        };
        let img = render_image(&s, &pairs[0], &sim, None);
        assert_eq!(img.pixels.len(), RENDER_SIZE * RENDER_SIZE);
        assert!(img.block_pixels() > 0);
    }
}
