//! The time-reversal model and the forward dynamics model, their training
//! loops, and inference.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{optimizer_step, AdamConfig, AdamState};
use super::mlp::{Mlp, Workspace};
use crate::blocks::{BlockPair, Piece};
use crate::data::{
    decode_relative, encode_absolute, encode_pose, encode_relative, Catalog,
    ReverseTrajectory, Transition,
};
use crate::geometry::{circle_overlap, swept_disc_contact, Pose2, Vec2};
use crate::rng::seeded;
use crate::sim::{PushAction, WorldState};
use crate::{Error, Result};

pub const SHAPE_FEATURES: usize = 18;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub batch_size: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Append the pair's shape descriptor to the model input.
    pub shape_features: bool,
}

impl TrainConfig {
    pub fn trm_default() -> Self {
        Self {
            hidden: vec![64, 64],
            batch_size: 64,
            epochs: 60,
            adam: AdamConfig::default(),
            seed: 0,
            shape_features: true,
        }
    }

    pub fn dynamics_default() -> Self {
        Self {
            epochs: 60,
            ..Self::trm_default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.adam.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::Config("hidden layers must be non-empty".into()));
        }
        Ok(())
    }

    pub fn sizes(&self, n_in: usize, n_out: usize) -> Vec<usize> {
        std::iter::once(n_in)
            .chain(self.hidden.iter().copied())
            .chain(std::iter::once(n_out))
            .collect()
    }
}

/// Per-dimension affine normalization, fit on training data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(d: usize) -> Self {
        Self {
            mean: vec![0.0; d],
            std: vec![1.0; d],
        }
    }

    /// Falls back to the identity map when `rows` is empty.
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let Some(first) = rows.first() else {
            return Self::default();
        };
        let d = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for k in 0..d {
                var[k] += (r[k] - mean[k]).powi(2);
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 1e-8 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect()
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| v * s + m).collect()
    }
}

/// Loss curve and final metrics of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss (standardized units) after each epoch.
    pub epoch_losses: Vec<f64>,
    /// Mean squared error on the training set in raw feature units.
    pub final_loss: f64,
    /// Raw-unit error on held-out data, when a split was made.
    pub heldout_mse: Option<f64>,
    /// Median per-block position error on held-out data, in meters.
    pub heldout_median_pos_err: Option<f64>,
}

/// Minibatch Adam on standardized inputs and targets. Returns the epoch losses.
fn fit(params: &mut Mlp, xs: &[Vec<f64>], ys: &[Vec<f64>], cfg: &TrainConfig) -> Result<Vec<f64>> {
    let mut rng = seeded(cfg.seed ^ 0x7472_6169_6e00);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut state = AdamState::new(params);
    let mut grad = params.zeros_like();
    let mut ws = Workspace::new(params);
    let mut losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let bx: Vec<&[f64]> = batch.iter().map(|&i| xs[i].as_slice()).collect();
            let by: Vec<&[f64]> = batch.iter().map(|&i| ys[i].as_slice()).collect();
            let loss = params.accumulate_grad(&bx, &by, &mut grad, &mut ws)?;
            total += loss * batch.len() as f64;
            optimizer_step(params, &grad, &mut state, &cfg.adam);
        }
        losses.push(total / xs.len() as f64);
    }
    if !params.is_finite() {
        return Err(Error::InvalidArgument("training diverged to non-finite weights".into()));
    }
    Ok(losses)
}

fn raw_mse(params: &Mlp, yn: &Standardizer, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> f64 {
    let mut ws = Workspace::new(params);
    let mut total = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let out = yn.invert(params.forward_with(x, &mut ws));
        let y = yn.invert(y);
        total += out.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    total / (xs.len() * ys[0].len()) as f64
}

fn with_shape(base: &[f64], pair: &BlockPair, shape: bool) -> Vec<f64> {
    let mut v = base.to_vec();
    if shape {
        v.extend_from_slice(&pair.shape_features());
    }
    v
}

/// Predicts the `horizon` states that lead from a scene back to a mated pair,
/// as relative poses of the male in the female frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrmModel {
    pub params: Mlp,
    pub horizon: usize,
    pub shape_features: bool,
    pub input_norm: Standardizer,
    pub target_norm: Standardizer,
    pub seed: u64,
    pub dataset_digest: String,
}

impl TrmModel {
    pub fn input(&self, pair: &BlockPair, state: &WorldState) -> Vec<f64> {
        with_shape(&encode_relative(state), pair, self.shape_features)
    }
}

/// Builds `(input, target)` rows: every state of every trajectory, paired with
/// the next `horizon` states, padded past the goal by repeating the goal. The
/// goal slot is the exact mating offset the trajectory started from.
pub fn trm_training_pairs(
    trajs: &[ReverseTrajectory],
    pairs: &[BlockPair],
    horizon: usize,
    shape: bool,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let catalog = Catalog::new(pairs);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for t in trajs {
        let pair = catalog.get(&t.pair_id)?;
        let goal = pair
            .mating_offsets
            .get(t.goal_offset)
            .ok_or_else(|| Error::Format(format!("goal offset {} out of range for {}", t.goal_offset, pair.id)))?;
        let last = t.states.len() - 1;
        let enc = |i: usize| -> [f64; 4] {
            if i >= last {
                encode_pose(goal)
            } else {
                encode_relative(&t.states[i])
            }
        };
        for i in 0..=last {
            xs.push(with_shape(&enc(i), pair, shape));
            let mut y = Vec::with_capacity(4 * horizon);
            for k in 1..=horizon {
                y.extend_from_slice(&enc((i + k).min(last)));
            }
            ys.push(y);
        }
    }
    Ok((xs, ys))
}

pub fn train_trm(
    trajs: &[ReverseTrajectory],
    pairs: &[BlockPair],
    horizon: usize,
    cfg: &TrainConfig,
    dataset_digest: &str,
) -> Result<(TrmModel, TrainReport)> {
    cfg.validate()?;
    if trajs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let (xs, ys) = trm_training_pairs(trajs, pairs, horizon, cfg.shape_features)?;
    let input_norm = Standardizer::fit(&xs);
    let target_norm = Standardizer::fit(&ys);
    let xs: Vec<Vec<f64>> = xs.iter().map(|x| input_norm.apply(x)).collect();
    let ys: Vec<Vec<f64>> = ys.iter().map(|y| target_norm.apply(y)).collect();
    let mut params = Mlp::random(&cfg.sizes(xs[0].len(), 4 * horizon), &mut seeded(cfg.seed))?;
    let epoch_losses = fit(&mut params, &xs, &ys, cfg)?;
    let final_loss = raw_mse(&params, &target_norm, &xs, &ys);
    let model = TrmModel {
        params,
        horizon,
        shape_features: cfg.shape_features,
        input_norm,
        target_norm,
        seed: cfg.seed,
        dataset_digest: dataset_digest.to_string(),
    };
    let report = TrainReport {
        epoch_losses,
        final_loss,
        heldout_mse: None,
        heldout_median_pos_err: None,
    };
    Ok((model, report))
}

/// The predicted sequence of relative poses leading towards the goal.
pub fn trm_predict(model: &TrmModel, pair: &BlockPair, state: &WorldState) -> Result<Vec<Pose2>> {
    let x = model.input_norm.apply(&model.input(pair, state));
    let out = model.target_norm.invert(&model.params.forward(&x)?);
    out.chunks(4).map(decode_relative).collect()
}

/// Single-step forward model. The scene is expressed in the frame of the
/// push (origin at its start, x along its direction) and the network predicts
/// each block's motion in that frame, so a straight push reads the same
/// wherever and in whatever direction it happens. Pushes that touch neither
/// block are answered exactly with the unchanged state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsModel {
    pub params: Mlp,
    pub shape_features: bool,
    pub pusher_radius: f64,
    pub input_norm: Standardizer,
    pub target_norm: Standardizer,
    pub seed: u64,
    pub dataset_digest: String,
}

/// Base input width before shape features: both poses and the push length in
/// the push frame, then a contact descriptor per block.
pub const DYNAMICS_INPUT: usize = 23;
/// Width of the per-cell geometry appended when shape features are on.
pub const DYNAMICS_SHAPE_FEATURES: usize = 54;

fn push_frame(action: &PushAction) -> Pose2 {
    let d = action.end - action.start;
    let phi = if d.norm() > 0.0 { d.y.atan2(d.x) } else { 0.0 };
    Pose2::new(action.start.x, action.start.y, phi)
}

/// First touch between the pusher and `piece`, in the push frame:
/// `[1, distance travelled, lever x, y, normal x, y, remaining length]`, where
/// the lever runs from the block centroid to the touch point and the normal is
/// the direction the block is first shoved. Zeros when the push misses.
fn contact_features(state: &WorldState, action: &PushAction, pair: &BlockPair, piece: Piece, radius: f64) -> [f64; 7] {
    let shape = state.world_geometry(pair, piece);
    let Some(t) = swept_disc_contact(action.start, action.end, radius, &shape) else {
        return [0.0; 7];
    };
    let d = action.end - action.start;
    let len = d.norm();
    let center = action.start + d * t;
    let frame = push_frame(action);
    let (lever, normal) = match circle_overlap(center, radius * 1.01, &shape) {
        Some(c) => (c.contact - state.pose(piece).translation(), c.mtv * (1.0 / c.depth().max(1e-12))),
        None => (center - state.pose(piece).translation(), Vec2::ZERO),
    };
    let (lever, normal) = (lever.rotate(-frame.theta), normal.rotate(-frame.theta));
    [1.0, len * t, lever.x, lever.y, normal.x, normal.y, len * (1.0 - t)]
}

/// Each slot of the piece's 3×3 bounding grid: occupancy, then the cell
/// center in the push frame (zero when empty).
fn cell_slots(state: &WorldState, pair: &BlockPair, piece: Piece, frame: &Pose2) -> [f64; 27] {
    let shape = pair.shape(piece);
    let to_frame = frame.inverse().compose(&state.pose(piece));
    let minx = shape.cells().iter().map(|c| c.0).min().unwrap_or(0);
    let miny = shape.cells().iter().map(|c| c.1).min().unwrap_or(0);
    let mut out = [0.0; 27];
    for (&(x, y), c) in shape.cells().iter().zip(shape.local_centers(pair.cell_size)) {
        let k = 3 * ((y - miny) * 3 + (x - minx)) as usize;
        let p = to_frame.apply(c);
        out[k..k + 3].copy_from_slice(&[1.0, p.x, p.y]);
    }
    out
}

fn dynamics_input(state: &WorldState, action: &PushAction, pair: &BlockPair, shape: bool, radius: f64) -> Option<Vec<f64>> {
    let cf = contact_features(state, action, pair, Piece::Female, radius);
    let cm = contact_features(state, action, pair, Piece::Male, radius);
    if cf[0] == 0.0 && cm[0] == 0.0 {
        return None;
    }
    let frame = push_frame(action);
    let inv = frame.inverse();
    let mut v = Vec::with_capacity(DYNAMICS_INPUT + DYNAMICS_SHAPE_FEATURES);
    v.extend_from_slice(&encode_pose(&inv.compose(&state.female_pose)));
    v.extend_from_slice(&encode_pose(&inv.compose(&state.male_pose)));
    v.push((action.end - action.start).norm());
    v.extend_from_slice(&cf);
    v.extend_from_slice(&cm);
    if shape {
        v.extend_from_slice(&cell_slots(state, pair, Piece::Female, &frame));
        v.extend_from_slice(&cell_slots(state, pair, Piece::Male, &frame));
    }
    Some(v)
}

/// Per block: displacement in the push frame, then `(cos dθ − 1, sin dθ)`.
fn dynamics_target(s: &WorldState, action: &PushAction, next: &WorldState) -> Vec<f64> {
    let phi = push_frame(action).theta;
    let mut v = Vec::with_capacity(8);
    for piece in [Piece::Female, Piece::Male] {
        let (a, b) = (s.pose(piece), next.pose(piece));
        let d = (b.translation() - a.translation()).rotate(-phi);
        let (sn, cs) = (b.theta - a.theta).sin_cos();
        v.extend_from_slice(&[d.x, d.y, cs - 1.0, sn]);
    }
    v
}

fn apply_target(s: &WorldState, action: &PushAction, t: &[f64]) -> Result<WorldState> {
    let phi = push_frame(action).theta;
    let moved = |p: Pose2, t: &[f64]| -> Result<Pose2> {
        let d = Vec2::new(t[0], t[1]).rotate(phi);
        let dth = decode_relative(&[0.0, 0.0, t[2] + 1.0, t[3]])?.theta;
        Ok(Pose2::new(p.x + d.x, p.y + d.y, p.theta + dth))
    };
    Ok(WorldState {
        pair_id: s.pair_id.clone(),
        female_pose: moved(s.female_pose, &t[..4])?,
        male_pose: moved(s.male_pose, &t[4..])?,
    })
}

impl DynamicsModel {
    /// Predicted next-state encoding.
    pub fn predict_encoding(&self, pair: &BlockPair, state: &WorldState, action: &PushAction) -> Result<[f64; 8]> {
        Ok(encode_absolute(&self.predict(pair, state, action)?))
    }

    pub fn predict(&self, pair: &BlockPair, state: &WorldState, action: &PushAction) -> Result<WorldState> {
        let Some(x) = dynamics_input(state, action, pair, self.shape_features, self.pusher_radius) else {
            return Ok(state.clone());
        };
        let x = self.input_norm.apply(&x);
        let t = self.target_norm.invert(&self.params.forward(&x)?);
        apply_target(state, action, &t)
    }
}

/// Records whose episode index is congruent to 9 mod 10 are held out.
fn is_heldout(index: usize) -> bool {
    (index / crate::data::TRANSITION_EPISODE_LEN) % 10 == 9
}

/// Layer sizes of the time-reversal network for a given horizon.
pub fn trm_architecture(cfg: &TrainConfig, horizon: usize) -> Vec<usize> {
    let n_in = 4 + if cfg.shape_features { SHAPE_FEATURES } else { 0 };
    cfg.sizes(n_in, 4 * horizon)
}

/// Layer sizes of the dynamics network.
pub fn dynamics_architecture(cfg: &TrainConfig) -> Vec<usize> {
    let n_in = DYNAMICS_INPUT + if cfg.shape_features { DYNAMICS_SHAPE_FEATURES } else { 0 };
    cfg.sizes(n_in, 8)
}

/// Only transitions whose push touches a block are used to fit the network.
pub fn train_dynamics(
    transitions: &[Transition],
    pairs: &[BlockPair],
    pusher_radius: f64,
    cfg: &TrainConfig,
    dataset_digest: &str,
) -> Result<(DynamicsModel, TrainReport)> {
    cfg.validate()?;
    if transitions.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let catalog = Catalog::new(pairs);
    let mut train = (Vec::new(), Vec::new());
    let mut held = Vec::new();
    for (i, t) in transitions.iter().enumerate() {
        let pair = catalog.get(&t.state.pair_id)?;
        if is_heldout(i) && transitions.len() >= 2 * crate::data::TRANSITION_EPISODE_LEN * 10 {
            held.push(t);
            continue;
        }
        if let Some(x) = dynamics_input(&t.state, &t.action, pair, cfg.shape_features, pusher_radius) {
            train.0.push(x);
            train.1.push(dynamics_target(&t.state, &t.action, &t.next_state));
        }
    }
    let sizes = dynamics_architecture(cfg);
    let n_in = sizes[0];
    let mut params = Mlp::random(&sizes, &mut seeded(cfg.seed))?;
    let (input_norm, target_norm, epoch_losses, final_loss) = if train.0.is_empty() {
        (Standardizer::identity(n_in), Standardizer::identity(8), Vec::new(), 0.0)
    } else {
        let input_norm = Standardizer::fit(&train.0);
        let target_norm = Standardizer::fit(&train.1);
        let xs: Vec<Vec<f64>> = train.0.iter().map(|x| input_norm.apply(x)).collect();
        let ys: Vec<Vec<f64>> = train.1.iter().map(|y| target_norm.apply(y)).collect();
        let losses = fit(&mut params, &xs, &ys, cfg)?;
        let final_loss = raw_mse(&params, &target_norm, &xs, &ys);
        (input_norm, target_norm, losses, final_loss)
    };
    let model = DynamicsModel {
        params,
        shape_features: cfg.shape_features,
        pusher_radius,
        input_norm,
        target_norm,
        seed: cfg.seed,
        dataset_digest: dataset_digest.to_string(),
    };
    let (heldout_mse, heldout_median_pos_err) = if held.is_empty() {
        (None, None)
    } else {
        let (mse, med) = dynamics_heldout_error(&model, &held, &catalog)?;
        (Some(mse), Some(med))
    };
    let report = TrainReport {
        epoch_losses,
        final_loss,
        heldout_mse,
        heldout_median_pos_err,
    };
    Ok((model, report))
}

/// Encoding-space MSE and median per-block position error on `held`.
pub fn dynamics_heldout_error(model: &DynamicsModel, held: &[&Transition], catalog: &Catalog) -> Result<(f64, f64)> {
    let mut sq = 0.0;
    let mut errs = Vec::with_capacity(2 * held.len());
    for t in held {
        let pair = catalog.get(&t.state.pair_id)?;
        let enc = model.predict_encoding(pair, &t.state, &t.action)?;
        let truth = encode_absolute(&t.next_state);
        sq += enc.iter().zip(truth.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        errs.push((enc[0] - truth[0]).hypot(enc[1] - truth[1]));
        errs.push((enc[4] - truth[4]).hypot(enc[5] - truth[5]));
    }
    errs.sort_by(f64::total_cmp);
    let n = errs.len();
    let median = if n % 2 == 1 {
        errs[n / 2]
    } else {
        0.5 * (errs[n / 2 - 1] + errs[n / 2])
    };
    Ok((sq / (8 * held.len()) as f64, median))
}

/// Recursive single-step rollout; one predicted state per action.
pub fn dynamics_rollout(
    model: &DynamicsModel,
    pair: &BlockPair,
    state: &WorldState,
    actions: &[PushAction],
) -> Result<Vec<WorldState>> {
    if actions.is_empty() {
        return Err(Error::InvalidArgument("rollout needs at least one action".into()));
    }
    let mut out = Vec::with_capacity(actions.len());
    let mut cur = state.clone();
    for a in actions {
        cur = model.predict(pair, &cur, a)?;
        out.push(cur.clone());
    }
    Ok(out)
}
