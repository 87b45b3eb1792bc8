//! Data collection and state encodings.
//!
//! Reverse exploration resets a pair to a mated state, applies random pushes,
//! and stores the visited states goal-last. Forward transitions come from
//! uniformly random pushes on randomly placed pairs. Both collectors derive one
//! random stream per record index, so any record can be regenerated alone.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::Rng as _;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::blocks::BlockPair;
use crate::geometry::Pose2;
use crate::rng::{derive, digest_hex};
use crate::sim::{
    nearest_offset, random_action, random_perturbation, sample_goal_state, sample_initial_state, step,
    PushAction, SimConfig, WorldState,
};
use crate::{Error, Result};

/// Norm of an encoded (cos, sin) slot below which decoding fails.
pub const MIN_ANGLE_NORM: f64 = 1e-6;
/// Random pushes per forward-collection episode.
pub const TRANSITION_EPISODE_LEN: usize = 10;

pub const REVERSE_FORMAT: &str = "trass-reverse";
pub const TRANSITIONS_FORMAT: &str = "trass-transitions";
const FORMAT_VERSION: u32 = 1;

/// States visited while pushing a mated pair apart, stored goal-last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReverseTrajectory {
    pub pair_id: String,
    /// Seed of the stream that generated this record.
    pub seed: u64,
    /// Mating offset realized at the goal state.
    pub goal_offset: usize,
    pub states: Vec<WorldState>,
}

impl ReverseTrajectory {
    pub fn goal(&self) -> &WorldState {
        self.states.last().expect("trajectories are non-empty")
    }

    pub fn start(&self) -> &WorldState {
        &self.states[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: WorldState,
    pub action: PushAction,
    pub next_state: WorldState,
}

/// `(dx, dy, cos dθ, sin dθ)` of the male in the female frame.
pub fn encode_relative(state: &WorldState) -> [f64; 4] {
    encode_pose(&state.relative())
}

pub fn encode_pose(p: &Pose2) -> [f64; 4] {
    let (s, c) = p.theta.sin_cos();
    [p.x, p.y, c, s]
}

/// Inverse of [`encode_relative`]; the angle slot is renormalized first.
pub fn decode_relative(v: &[f64]) -> Result<Pose2> {
    if v.len() != 4 {
        return Err(Error::Shape { expected: 4, got: v.len() });
    }
    let theta = decode_angle(v[2], v[3])?;
    Ok(Pose2::new(v[0], v[1], theta))
}

fn decode_angle(c: f64, s: f64) -> Result<f64> {
    let n = c.hypot(s);
    if !(n >= MIN_ANGLE_NORM) {
        return Err(Error::DegenerateAngle(n));
    }
    Ok((s / n).atan2(c / n))
}

/// Both poses in the world frame: female then male, each `(x, y, cos θ, sin θ)`.
pub fn encode_absolute(state: &WorldState) -> [f64; 8] {
    let f = encode_pose(&state.female_pose);
    let m = encode_pose(&state.male_pose);
    [f[0], f[1], f[2], f[3], m[0], m[1], m[2], m[3]]
}

pub fn decode_absolute(v: &[f64], pair_id: &str) -> Result<WorldState> {
    if v.len() != 8 {
        return Err(Error::Shape { expected: 8, got: v.len() });
    }
    Ok(WorldState {
        pair_id: pair_id.to_string(),
        female_pose: Pose2::new(v[0], v[1], decode_angle(v[2], v[3])?),
        male_pose: Pose2::new(v[4], v[5], decode_angle(v[6], v[7])?),
    })
}

/// Looks pairs up by id.
#[derive(Debug, Clone)]
pub struct Catalog<'a> {
    by_id: HashMap<&'a str, &'a BlockPair>,
}

impl<'a> Catalog<'a> {
    pub fn new(pairs: &'a [BlockPair]) -> Self {
        Self {
            by_id: pairs.iter().map(|p| (p.id.as_str(), p)).collect(),
        }
    }

    pub fn get(&self, id: &str) -> Result<&'a BlockPair> {
        self.by_id.get(id).copied().ok_or_else(|| Error::UnknownPair(id.to_string()))
    }
}

/// Generates reverse trajectory `index` of a collection run.
pub fn reverse_trajectory(
    pairs: &[BlockPair],
    index: usize,
    m: usize,
    seed: u64,
    cfg: &SimConfig,
) -> ReverseTrajectory {
    let traj_seed = crate::rng::derive_seed(seed, &["reverse", &index.to_string()]);
    let mut rng = crate::rng::seeded(traj_seed);
    let pair = &pairs[rng.gen_range(0..pairs.len())];
    let goal = sample_goal_state(pair, &mut rng, cfg);
    let (goal_offset, _) = nearest_offset(pair, &goal.relative(), 1.0);
    let mut states = Vec::with_capacity(m + 1);
    states.push(goal);
    for _ in 0..m {
        let s = states.last().expect("non-empty");
        let a = random_perturbation(pair, s, &mut rng, cfg);
        let next = step(pair, s, &a, cfg);
        states.push(next);
    }
    states.reverse();
    ReverseTrajectory {
        pair_id: pair.id.clone(),
        seed: traj_seed,
        goal_offset,
        states,
    }
}

/// Reverse exploration: `n_traj` goal resets, each followed by `m` random
/// perturbations, stored reversed (`m + 1` states ending at the goal).
pub fn collect_reverse(
    pairs: &[BlockPair],
    n_traj: usize,
    m: usize,
    seed: u64,
    cfg: &SimConfig,
) -> Result<Vec<ReverseTrajectory>> {
    if n_traj == 0 || m == 0 {
        return Err(Error::InvalidArgument("n_traj and m must be at least 1".into()));
    }
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no block pairs to collect from".into()));
    }
    Ok((0..n_traj).map(|i| reverse_trajectory(pairs, i, m, seed, cfg)).collect())
}

/// Random-action transitions: episodes of [`TRANSITION_EPISODE_LEN`] uniform
/// pushes from random initial placements, truncated to `n` records.
pub fn collect_transitions(pairs: &[BlockPair], n: usize, seed: u64, cfg: &SimConfig) -> Result<Vec<Transition>> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no block pairs to collect from".into()));
    }
    let episodes = n.div_ceil(TRANSITION_EPISODE_LEN);
    let mut out = Vec::with_capacity(n);
    for e in 0..episodes {
        let mut rng = derive(seed, &["transitions", &e.to_string()]);
        let pair = &pairs[rng.gen_range(0..pairs.len())];
        let mut state = sample_initial_state(pair, &mut rng, 0.0, cfg)?;
        for _ in 0..TRANSITION_EPISODE_LEN {
            if out.len() == n {
                break;
            }
            let action = random_action(&mut rng);
            let next_state = step(pair, &state, &action, cfg);
            out.push(Transition {
                state: state.clone(),
                action,
                next_state: next_state.clone(),
            });
            state = next_state;
        }
    }
    Ok(out)
}

/// First line of every dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub count: usize,
    /// Perturbations per trajectory; zero for transition files.
    #[serde(default)]
    pub m: usize,
    pub sim: SimConfig,
}

impl DatasetHeader {
    pub fn reverse(seed: u64, count: usize, m: usize, sim: &SimConfig) -> Self {
        Self {
            format: REVERSE_FORMAT.into(),
            version: FORMAT_VERSION,
            seed,
            count,
            m,
            sim: sim.clone(),
        }
    }

    pub fn transitions(seed: u64, count: usize, sim: &SimConfig) -> Self {
        Self {
            format: TRANSITIONS_FORMAT.into(),
            version: FORMAT_VERSION,
            seed,
            count,
            m: 0,
            sim: sim.clone(),
        }
    }
}

/// Writes a header line followed by one JSON record per line.
pub fn write_dataset<W: Write, T: Serialize>(mut w: W, header: &DatasetHeader, records: &[T]) -> Result<()> {
    writeln!(w, "{}", serde_json::to_string(header)?)?;
    for r in records {
        writeln!(w, "{}", serde_json::to_string(r)?)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: BufRead, T: DeserializeOwned>(r: R, format: &str) -> Result<(DatasetHeader, Vec<T>)> {
    let mut lines = r.lines();
    let header: DatasetHeader = match lines.next() {
        Some(l) => serde_json::from_str(&l?)?,
        None => return Err(Error::Format("empty dataset file".into())),
    };
    if header.format != format {
        return Err(Error::Format(format!("expected {format}, found {}", header.format)));
    }
    if header.version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {}", header.version)));
    }
    let mut records = Vec::with_capacity(header.count);
    for l in lines {
        let l = l?;
        if !l.trim().is_empty() {
            records.push(serde_json::from_str(&l)?);
        }
    }
    if records.len() != header.count {
        return Err(Error::Format(format!(
            "header declares {} records, found {}",
            header.count,
            records.len()
        )));
    }
    Ok((header, records))
}

/// SHA-256 of a dataset's serialized form.
pub fn dataset_digest<T: Serialize>(header: &DatasetHeader, records: &[T]) -> Result<String> {
    let mut buf = Vec::new();
    write_dataset(&mut buf, header, records)?;
    Ok(digest_hex(&buf))
}
