//! Quasi-static planar push simulator.
//!
//! A disc-shaped pusher sweeps along a straight segment in small increments.
//! After each increment every penetration is resolved by moving the penetrated
//! block out along the minimum translation vector, with a rotation proportional
//! to the torque that translation would exert about the block centroid. There
//! is no momentum: blocks stop as soon as the pusher stops.

use std::f64::consts::PI;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::blocks::{BlockPair, Piece};
use crate::geometry::{
    ang_dist, circle_overlap, polygon_overlap, relative_pose, CompoundPolygon, Pose2, Vec2,
};
use crate::rng::Rng;
use crate::{Error, Result};

/// Every action coordinate lies in `[-ACTION_BOUND, ACTION_BOUND]`.
pub const ACTION_BOUND: f64 = 0.2;

const MAX_REJECTIONS: usize = 10_000;
const TORQUE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub cell_size: f64,
    pub pusher_radius: f64,
    /// Pusher advance per resolution increment.
    pub step_length: f64,
    /// Rotation gain applied to the contact torque.
    pub rotation_gain: f64,
    /// Block centres are clamped to `[-w, w]` on each axis.
    pub workspace_halfwidth: f64,
    /// Goal and initial block positions are drawn from `[-s, s]²`.
    pub spawn_halfwidth: f64,
    pub success_pos_tol: f64,
    pub success_ang_tol: f64,
    pub max_resolve_iters: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            cell_size: crate::blocks::CELL_SIZE,
            pusher_radius: 0.01,
            step_length: 0.002,
            rotation_gain: 0.5,
            workspace_halfwidth: 0.28,
            spawn_halfwidth: 0.15,
            success_pos_tol: 0.005,
            success_ang_tol: 0.10,
            max_resolve_iters: 32,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cell_size", self.cell_size),
            ("pusher_radius", self.pusher_radius),
            ("step_length", self.step_length),
            ("rotation_gain", self.rotation_gain),
            ("workspace_halfwidth", self.workspace_halfwidth),
            ("spawn_halfwidth", self.spawn_halfwidth),
            ("success_pos_tol", self.success_pos_tol),
            ("success_ang_tol", self.success_ang_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_resolve_iters == 0 {
            return Err(Error::Config("max_resolve_iters must be positive".into()));
        }
        if self.step_length >= self.pusher_radius {
            return Err(Error::Config("step_length must be below pusher_radius".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub pair_id: String,
    pub female_pose: Pose2,
    pub male_pose: Pose2,
}

impl WorldState {
    pub fn pose(&self, piece: Piece) -> Pose2 {
        match piece {
            Piece::Female => self.female_pose,
            Piece::Male => self.male_pose,
        }
    }

    /// Male pose in the female frame.
    pub fn relative(&self) -> Pose2 {
        relative_pose(&self.female_pose, &self.male_pose)
    }

    pub fn separation(&self) -> f64 {
        (self.male_pose.translation() - self.female_pose.translation()).norm()
    }

    /// Applies the same rigid motion to both blocks.
    pub fn moved_by(&self, motion: &Pose2) -> WorldState {
        WorldState {
            pair_id: self.pair_id.clone(),
            female_pose: motion.compose(&self.female_pose),
            male_pose: motion.compose(&self.male_pose),
        }
    }

    pub fn world_geometry(&self, pair: &BlockPair, piece: Piece) -> CompoundPolygon {
        pair.geometry(piece).transformed(&self.pose(piece))
    }

    /// Penetration depth between the two blocks, zero when disjoint.
    pub fn overlap_depth(&self, pair: &BlockPair) -> f64 {
        polygon_overlap(
            &self.world_geometry(pair, Piece::Female),
            &self.world_geometry(pair, Piece::Male),
        )
        .map_or(0.0, |c| c.depth())
    }
}

/// One straight push from `start` to `end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PushAction {
    pub start: Vec2,
    pub end: Vec2,
}

impl PushAction {
    pub fn new(sx: f64, sy: f64, ex: f64, ey: f64) -> Self {
        Self {
            start: Vec2::new(sx, sy),
            end: Vec2::new(ex, ey),
        }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.start.x, self.start.y, self.end.x, self.end.y]
    }

    pub fn in_bounds(&self) -> bool {
        self.to_array().iter().all(|v| v.abs() <= ACTION_BOUND)
    }

    pub fn clamped(&self) -> Self {
        let a = self.to_array().map(|v| v.clamp(-ACTION_BOUND, ACTION_BOUND));
        Self::from_array(a)
    }
}

/// Samples a mated state: female uniform over the spawn square with uniform
/// heading, male at a uniformly chosen mating offset.
pub fn sample_goal_state(pair: &BlockPair, rng: &mut Rng, cfg: &SimConfig) -> WorldState {
    let s = cfg.spawn_halfwidth;
    let female = Pose2::new(rng.gen_range(-s..=s), rng.gen_range(-s..=s), sample_heading(rng));
    let g = pair.mating_offsets[rng.gen_range(0..pair.mating_offsets.len())];
    WorldState {
        pair_id: pair.id.clone(),
        female_pose: female,
        male_pose: female.compose(&g),
    }
}

/// Uniform on (−π, π].
fn sample_heading(rng: &mut Rng) -> f64 {
    PI - rng.gen_range(0.0..2.0 * PI)
}

/// Samples both blocks independently over the spawn square, rejecting
/// overlapping placements and those closer than `min_separation`.
pub fn sample_initial_state(
    pair: &BlockPair,
    rng: &mut Rng,
    min_separation: f64,
    cfg: &SimConfig,
) -> Result<WorldState> {
    if !(min_separation >= 0.0) {
        return Err(Error::InvalidArgument(format!("min_separation {min_separation}")));
    }
    let s = cfg.spawn_halfwidth;
    for _ in 0..MAX_REJECTIONS {
        let mut pose = || Pose2::new(rng.gen_range(-s..=s), rng.gen_range(-s..=s), sample_heading(rng));
        let state = WorldState {
            pair_id: pair.id.clone(),
            female_pose: pose(),
            male_pose: pose(),
        };
        if state.separation() < min_separation {
            continue;
        }
        if state.overlap_depth(pair) > 0.0 {
            continue;
        }
        return Ok(state);
    }
    Err(Error::Infeasible(format!(
        "no disjoint placement of {} with separation >= {min_separation} after {MAX_REJECTIONS} draws",
        pair.id
    )))
}

/// True when the male sits within tolerance of some mating offset in the
/// female frame. Depends only on the relative pose.
pub fn is_success(state: &WorldState, pair: &BlockPair, cfg: &SimConfig) -> bool {
    let rel = state.relative();
    pair.mating_offsets.iter().any(|g| {
        (rel.translation() - g.translation()).norm() <= cfg.success_pos_tol
            && ang_dist(rel.theta, g.theta) <= cfg.success_ang_tol
    })
}

/// Index of the mating offset closest to `rel`, and the position distance to it.
pub fn nearest_offset(pair: &BlockPair, rel: &Pose2, angle_weight: f64) -> (usize, f64) {
    pair.mating_offsets
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let d = (rel.translation() - g.translation()).norm() + angle_weight * ang_dist(rel.theta, g.theta);
            (i, d)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("pairs always have an offset")
}

const SEPARATION_DIRECTIONS: usize = 32;
/// Extra clearance added to each separating shift.
const SEPARATION_SLOP: f64 = 1e-9;
/// Blocks touching within this angle of square turn square.
const SQUARE_CAPTURE: f64 = 0.02;
/// Overlap shallower than this counts as touching.
const CLEAR_DEPTH: f64 = 1e-8;

struct Bodies<'a> {
    pair: &'a BlockPair,
    poses: [Pose2; 2],
    cfg: &'a SimConfig,
    last_pushed: usize,
}

const PIECES: [Piece; 2] = [Piece::Female, Piece::Male];

impl Bodies<'_> {
    fn geom(&self, i: usize) -> CompoundPolygon {
        self.pair.geometry(PIECES[i]).transformed(&self.poses[i])
    }

    fn center(&self, i: usize) -> Vec2 {
        self.poses[i].translation()
    }

    fn radius(&self, i: usize) -> f64 {
        self.pair.radius(PIECES[i])
    }

    /// Translate by `d`, then turn about the centroid by the contact torque.
    fn displace(&mut self, i: usize, d: Vec2, contact: Vec2) {
        let lever = contact - self.center(i);
        let dtheta = self.cfg.rotation_gain * lever.cross(d) / (lever.norm_sq() + TORQUE_EPS);
        let p = self.poses[i];
        self.poses[i] = Pose2::new(p.x + d.x, p.y + d.y, p.theta + dtheta);
    }

    fn clamp(&mut self, i: usize) {
        let w = self.cfg.workspace_halfwidth;
        let p = self.poses[i];
        let (x, y) = (p.x.clamp(-w, w), p.y.clamp(-w, w));
        if x != p.x || y != p.y {
            self.poses[i] = Pose2 { x, y, theta: p.theta };
        }
    }

    fn blocks_may_touch(&self) -> bool {
        (self.center(0) - self.center(1)).norm() < self.radius(0) + self.radius(1)
    }

    fn pusher_may_touch(&self, i: usize, pusher: Vec2) -> bool {
        (pusher - self.center(i)).norm() < self.radius(i) + self.cfg.pusher_radius
    }

    /// Resolves all penetrations for one pusher position.
    fn resolve(&mut self, pusher: Vec2) {
        if !(0..2).any(|i| self.pusher_may_touch(i, pusher)) {
            return;
        }
        for _ in 0..self.cfg.max_resolve_iters {
            let mut moved = false;
            let mut deepest: Option<(usize, f64)> = None;
            for i in 0..2 {
                if !self.pusher_may_touch(i, pusher) {
                    continue;
                }
                if let Some(c) = circle_overlap(pusher, self.cfg.pusher_radius, &self.geom(i)) {
                    if deepest.map_or(true, |(_, d)| c.depth() > d) {
                        deepest = Some((i, c.depth()));
                    }
                    self.displace(i, c.mtv, c.contact);
                    self.clamp(i);
                    moved = true;
                }
            }
            if let Some((i, _)) = deepest {
                self.last_pushed = i;
            }
            if !moved {
                break;
            }
            if self.blocks_may_touch() {
                let (a, b) = (self.last_pushed, 1 - self.last_pushed);
                let mut hit = polygon_overlap(&self.geom(a), &self.geom(b));
                if hit.is_some() && self.square_up(a, b) {
                    hit = polygon_overlap(&self.geom(a), &self.geom(b));
                }
                if let Some(c) = hit {
                    self.displace(b, c.mtv, c.contact);
                    self.clamp(b);
                }
            }
        }
    }

    /// Turns `b` square with `a` when the two touch nearly square, as a
    /// tight fit would. Call only while they overlap. Returns whether `b` turned.
    fn square_up(&mut self, a: usize, b: usize) -> bool {
        let quarter = std::f64::consts::FRAC_PI_2;
        let (ta, tb) = (self.poses[a].theta, self.poses[b].theta);
        let squared = ta + ((tb - ta) / quarter).round() * quarter;
        let off = ang_dist(squared, tb);
        if off < 1e-12 || off > SQUARE_CAPTURE {
            return false;
        }
        let p = self.poses[b];
        self.poses[b] = Pose2::new(p.x, p.y, squared);
        true
    }

    fn clear(&self, a: usize, b: usize) -> bool {
        !self.blocks_may_touch()
            || polygon_overlap(&self.geom(a), &self.geom(b)).map_or(true, |c| c.depth() < CLEAR_DEPTH)
    }

    /// Cleanup so no post-state interpenetrates.
    fn separate(&mut self) {
        let (a, b) = (self.last_pushed, 1 - self.last_pushed);
        // Previous step: poses before it, its unit normal and depth.
        let mut prev: Option<([Pose2; 2], Vec2, f64)> = None;
        for _ in 0..self.cfg.max_resolve_iters {
            if !self.blocks_may_touch() {
                return;
            }
            let Some(c) = polygon_overlap(&self.geom(a), &self.geom(b)) else {
                return;
            };
            let depth = c.depth();
            if depth < CLEAR_DEPTH {
                return;
            }
            if self.square_up(a, b) {
                prev = None;
                continue;
            }
            let n = c.mtv * (1.0 / depth);
            // Two parts pushing different ways: clear both at once from the
            // poses before the last step instead of alternating.
            if let Some((before, n1, d1)) = prev.take() {
                let moved = self.poses[b].translation() - before[b].translation()
                    - (self.poses[a].translation() - before[a].translation());
                let d2 = depth + n.dot(moved);
                let det = n1.cross(n);
                if n1.dot(n) < 0.999 && det.abs() > 1e-6 {
                    let (r1, r2) = (d1 + SEPARATION_SLOP, d2 + SEPARATION_SLOP);
                    let t = Vec2::new(r1 * n.y - r2 * n1.y, n1.x * r2 - n.x * r1) * (1.0 / det);
                    self.poses = before;
                    self.shift_apart(a, b, t);
                    continue;
                }
            }
            prev = Some((self.poses, n, depth));
            self.shift_apart(a, b, n * (depth + SEPARATION_SLOP));
        }
        // Rarely the steps still cycle. Search rings of directions for the
        // shortest clearing shift.
        let from = self.poses;
        let h = self.cfg.step_length / 8.0;
        let reach = self.radius(0) + self.radius(1);
        let mut m = h;
        while m <= reach + h {
            for k in 0..SEPARATION_DIRECTIONS {
                let phi = std::f64::consts::TAU * k as f64 / SEPARATION_DIRECTIONS as f64;
                self.poses = from;
                self.shift_apart(a, b, Vec2::new(phi.cos(), phi.sin()) * m);
                if self.clear(a, b) {
                    return;
                }
            }
            m += h;
        }
        self.poses = from;
    }

    /// Moves `b` by `d`; whatever the wall stops moves `a` the other way.
    fn shift_apart(&mut self, a: usize, b: usize, d: Vec2) {
        let p = self.poses[b];
        let free = Pose2 { x: p.x + d.x, y: p.y + d.y, theta: p.theta };
        self.poses[b] = free;
        self.clamp(b);
        if self.poses[b] != free {
            let (rx, ry) = (free.x - self.poses[b].x, free.y - self.poses[b].y);
            let q = self.poses[a];
            self.poses[a] = Pose2 { x: q.x - rx, y: q.y - ry, theta: q.theta };
            self.clamp(a);
        }
    }
}

/// Executes one push. Deterministic; a push that never touches a block
/// returns the state unchanged.
pub fn step(pair: &BlockPair, state: &WorldState, action: &PushAction, cfg: &SimConfig) -> WorldState {
    let mut bodies = Bodies {
        pair,
        poses: [state.female_pose, state.male_pose],
        cfg,
        last_pushed: 0,
    };
    let path = action.end - action.start;
    let n = ((path.norm() / cfg.step_length).ceil() as usize).max(1);
    let mut touched = false;
    for k in 0..=n {
        let pusher = action.start + path * (k as f64 / n as f64);
        let before = bodies.poses;
        bodies.resolve(pusher);
        touched |= bodies.poses != before;
    }
    if !touched {
        return state.clone();
    }
    bodies.separate();
    WorldState {
        pair_id: state.pair_id.clone(),
        female_pose: bodies.poses[0],
        male_pose: bodies.poses[1],
    }
}

/// A random push aimed through a uniformly chosen point of a uniformly chosen
/// block, starting just outside the block and overshooting the target.
pub fn random_perturbation(pair: &BlockPair, state: &WorldState, rng: &mut Rng, cfg: &SimConfig) -> PushAction {
    let piece = if rng.gen_bool(0.5) { Piece::Female } else { Piece::Male };
    let shape = pair.shape(piece);
    let centers = shape.local_centers(pair.cell_size);
    let cell = centers[rng.gen_range(0..centers.len())];
    let h = pair.cell_size / 2.0;
    let local = cell + Vec2::new(rng.gen_range(-h..h), rng.gen_range(-h..h));
    let target = state.pose(piece).apply(local);
    let phi = rng.gen_range(0.0..2.0 * PI);
    let outward = Vec2::new(phi.cos(), phi.sin());
    let standoff = pair.radius(piece) + cfg.pusher_radius + 0.01;
    let overshoot = rng.gen_range(0.02..=0.08);
    let start = target + outward * standoff;
    let end = target - outward * overshoot;
    PushAction { start, end }.clamped()
}

/// Uniform action over the bounds box.
pub fn random_action(rng: &mut Rng) -> PushAction {
    PushAction::from_array(std::array::from_fn(|_| rng.gen_range(-ACTION_BOUND..=ACTION_BOUND)))
}
