//! Cross-entropy-method planning and the closed-loop episode.
//!
//! Three costs score a candidate push sequence by the state a forward model
//! predicts at its end: distance to the fifth state of the time-reversal
//! prediction, convex hull area of the two blocks, or distance to the nearest
//! true mating offset. The forward model is either the learned dynamics model
//! or the simulator itself.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::blocks::{BlockPair, Piece};
use crate::geometry::{ang_dist, convex_hull_area, Pose2, Vec2};
use crate::learn::{dynamics_rollout, trm_predict, DynamicsModel, TrmModel};
use crate::rng::Rng;
use crate::sim::{is_success, nearest_offset, step, PushAction, SimConfig, WorldState, ACTION_BOUND};
use crate::{Error, Result};

/// Cost assigned to candidates whose prediction cannot be decoded.
pub const SENTINEL_COST: f64 = 1e6;
/// Index (1-based) of the time-reversal prediction used as the planning target.
pub const TRM_TARGET_STEP: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CemConfig {
    pub population: usize,
    pub elite_fraction: f64,
    pub iterations: usize,
    /// Pushes per candidate sequence.
    pub horizon: usize,
    /// Floor on the refitted per-dimension standard deviation.
    pub min_std: f64,
    pub bound: f64,
}

impl Default for CemConfig {
    fn default() -> Self {
        Self {
            population: 64,
            elite_fraction: 0.125,
            iterations: 5,
            horizon: 2,
            min_std: 1e-3,
            bound: ACTION_BOUND,
        }
    }
}

impl CemConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.elite_fraction > 0.0 && self.elite_fraction <= 1.0) {
            return Err(Error::Config(format!("elite_fraction {} outside (0, 1]", self.elite_fraction)));
        }
        if (self.population as f64) < 2.0 / self.elite_fraction {
            return Err(Error::Config("population must be at least 2 / elite_fraction".into()));
        }
        if !(1..=5).contains(&self.iterations) {
            return Err(Error::Config("iterations must be between 1 and 5".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("plan horizon must be at least 1".into()));
        }
        if !(self.bound > 0.0) || self.min_std < 0.0 {
            return Err(Error::Config("bad action bound or std floor".into()));
        }
        Ok(())
    }

    pub fn n_elites(&self) -> usize {
        (self.elite_fraction * self.population as f64).ceil() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CemResult {
    pub best: Vec<PushAction>,
    pub best_cost: f64,
    /// Best cost seen so far, after each iteration.
    pub best_by_iteration: Vec<f64>,
}

/// Minimizes `cost` over push sequences of `cfg.horizon` actions.
pub fn cem_optimize<F>(mut cost: F, cfg: &CemConfig, rng: &mut Rng) -> CemResult
where
    F: FnMut(&[PushAction]) -> f64,
{
    let dims = 4 * cfg.horizon;
    let b = cfg.bound;
    let mut mean = vec![0.0; dims];
    let mut std = vec![0.0; dims];
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut history = Vec::with_capacity(cfg.iterations);
    let n_elites = cfg.n_elites();
    for it in 0..cfg.iterations {
        let mut scored: Vec<(f64, Vec<f64>)> = (0..cfg.population)
            .map(|_| {
                let v: Vec<f64> = (0..dims)
                    .map(|k| {
                        if it == 0 {
                            rng.gen_range(-b..=b)
                        } else {
                            let n: Normal<f64> = Normal::new(mean[k], std[k]).expect("finite std");
                            n.sample(rng).clamp(-b, b)
                        }
                    })
                    .collect();
                let c = cost(&to_actions(&v));
                (if c.is_nan() { f64::INFINITY } else { c }, v)
            })
            .collect();
        // stable sort keeps population order among ties
        scored.sort_by(|a, b| a.0.total_cmp(&b.0));
        if best.as_ref().map_or(true, |(c, _)| scored[0].0 < *c) {
            best = Some(scored[0].clone());
        }
        history.push(best.as_ref().expect("population non-empty").0);
        let elites = &scored[..n_elites];
        for k in 0..dims {
            let m = elites.iter().map(|e| e.1[k]).sum::<f64>() / n_elites as f64;
            let var = elites.iter().map(|e| (e.1[k] - m).powi(2)).sum::<f64>() / n_elites as f64;
            mean[k] = m;
            std[k] = var.sqrt().max(cfg.min_std);
        }
    }
    let (best_cost, v) = best.expect("at least one iteration");
    CemResult {
        best: to_actions(&v),
        best_cost,
        best_by_iteration: history,
    }
}

fn to_actions(v: &[f64]) -> Vec<PushAction> {
    v.chunks(4).map(|c| PushAction::new(c[0], c[1], c[2], c[3])).collect()
}

/// Weight of heading error against position error in pose distances (m/rad).
pub const ANGLE_WEIGHT: f64 = 0.05;

/// `‖Δxy‖ + λ·angdist(Δθ)` between two relative poses.
pub fn pose_distance(p: &Pose2, q: &Pose2, lambda: f64) -> f64 {
    (p.translation() - q.translation()).norm() + lambda * ang_dist(p.theta, q.theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    TrmCost,
    ShapedHull,
    GroundTruthGoal,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::TrmCost, PolicyKind::ShapedHull, PolicyKind::GroundTruthGoal];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::TrmCost => "trm",
            PolicyKind::ShapedHull => "hull",
            PolicyKind::GroundTruthGoal => "gt",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "trm" | "TrmCost" => Ok(PolicyKind::TrmCost),
            "hull" | "shaped" | "ShapedHull" => Ok(PolicyKind::ShapedHull),
            "gt" | "GroundTruthGoal" => Ok(PolicyKind::GroundTruthGoal),
            _ => Err(Error::InvalidArgument(format!("unknown policy {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DynamicsMode {
    Learned,
    Oracle,
}

impl DynamicsMode {
    pub fn name(self) -> &'static str {
        match self {
            DynamicsMode::Learned => "learned",
            DynamicsMode::Oracle => "oracle",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "learned" => Ok(DynamicsMode::Learned),
            "oracle" => Ok(DynamicsMode::Oracle),
            _ => Err(Error::InvalidArgument(format!("unknown dynamics mode {s:?}"))),
        }
    }
}

/// The forward model a planner rolls candidates through.
#[derive(Debug, Clone, Copy)]
pub enum Forward<'a> {
    Learned(&'a DynamicsModel),
    Oracle(&'a SimConfig),
}

impl Forward<'_> {
    /// Predicted states after each action.
    pub fn rollout(&self, pair: &BlockPair, state: &WorldState, actions: &[PushAction]) -> Result<Vec<WorldState>> {
        match self {
            Forward::Learned(m) => dynamics_rollout(m, pair, state, actions),
            Forward::Oracle(cfg) => {
                let mut out = Vec::with_capacity(actions.len());
                let mut cur = state.clone();
                for a in actions {
                    cur = step(pair, &cur, a, cfg);
                    out.push(cur.clone());
                }
                Ok(out)
            }
        }
    }
}

/// Options shared by the three costs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostConfig {
    pub angle_weight: f64,
    /// Also match every predicted step against the same-index TRM step.
    pub trm_match_intermediate: bool,
}

impl Default for CostConfig {
    fn default() -> Self {
        Self {
            angle_weight: ANGLE_WEIGHT,
            trm_match_intermediate: false,
        }
    }
}

/// Distance between the predicted final relative pose and the fifth state of
/// the time-reversal prediction.
pub fn trm_cost(
    fwd: Forward,
    pair: &BlockPair,
    trm_traj: &[Pose2],
    state: &WorldState,
    actions: &[PushAction],
    cc: &CostConfig,
) -> f64 {
    if trm_traj.len() < TRM_TARGET_STEP {
        return SENTINEL_COST;
    }
    let Ok(pred) = fwd.rollout(pair, state, actions) else {
        return SENTINEL_COST;
    };
    let target = trm_traj[TRM_TARGET_STEP - 1];
    let last = pred.last().expect("non-empty rollout").relative();
    let mut c = pose_distance(&last, &target, cc.angle_weight);
    if cc.trm_match_intermediate {
        let steps = pred.len().min(trm_traj.len());
        c += pred[..steps]
            .iter()
            .zip(trm_traj)
            .map(|(s, t)| pose_distance(&s.relative(), t, cc.angle_weight))
            .sum::<f64>()
            / steps as f64;
    }
    c
}

/// Convex hull area of both blocks' outlines in the final predicted state.
pub fn hull_area(pair: &BlockPair, state: &WorldState) -> f64 {
    let pts: Vec<Vec2> = [Piece::Female, Piece::Male]
        .into_iter()
        .flat_map(|p| pair.geometry(p).outline.transformed(&state.pose(p)).vertices)
        .collect();
    convex_hull_area(&pts)
}

pub fn hull_cost(fwd: Forward, pair: &BlockPair, state: &WorldState, actions: &[PushAction]) -> f64 {
    match fwd.rollout(pair, state, actions) {
        Ok(pred) => hull_area(pair, pred.last().expect("non-empty rollout")),
        Err(_) => SENTINEL_COST,
    }
}

/// Distance from a relative pose to the nearest mating offset.
pub fn goal_distance(pair: &BlockPair, rel: &Pose2, angle_weight: f64) -> f64 {
    nearest_offset(pair, rel, angle_weight).1
}

pub fn gt_cost(fwd: Forward, pair: &BlockPair, state: &WorldState, actions: &[PushAction], cc: &CostConfig) -> f64 {
    match fwd.rollout(pair, state, actions) {
        Ok(pred) => goal_distance(pair, &pred.last().expect("non-empty rollout").relative(), cc.angle_weight),
        Err(_) => SENTINEL_COST,
    }
}

/// Everything an episode needs besides the pair and its start state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub sim: SimConfig,
    pub cem: CemConfig,
    pub cost: CostConfig,
    /// Maximum pushes per episode.
    pub max_steps: usize,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            cem: CemConfig::default(),
            cost: CostConfig::default(),
            max_steps: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Models<'a> {
    pub trm: Option<&'a TrmModel>,
    pub dynamics: Option<&'a DynamicsModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub success: bool,
    pub steps_used: usize,
    /// Visited states, starting with the initial one.
    pub trace: Vec<WorldState>,
    pub actions: Vec<PushAction>,
}

/// Model-predictive control: plan with CEM, execute the first push, observe,
/// replan, until the pair is mated or the step budget runs out.
pub fn run_episode(
    pair: &BlockPair,
    initial: &WorldState,
    kind: PolicyKind,
    models: Models,
    mode: DynamicsMode,
    cfg: &EpisodeConfig,
    rng: &mut Rng,
) -> Result<Episode> {
    cfg.cem.validate()?;
    let fwd = match mode {
        DynamicsMode::Oracle => Forward::Oracle(&cfg.sim),
        DynamicsMode::Learned => Forward::Learned(
            models
                .dynamics
                .ok_or_else(|| Error::Missing("dynamics model for learned-dynamics planning".into()))?,
        ),
    };
    let trm = match (kind, models.trm) {
        (PolicyKind::TrmCost, None) => return Err(Error::Missing("time-reversal model for the TRM cost".into())),
        (_, t) => t,
    };
    let mut state = initial.clone();
    let mut trace = vec![state.clone()];
    let mut actions = Vec::new();
    while !is_success(&state, pair, &cfg.sim) && actions.len() < cfg.max_steps {
        let plan = match kind {
            PolicyKind::TrmCost => {
                let traj = trm_predict(trm.expect("checked above"), pair, &state)?;
                cem_optimize(|a| trm_cost(fwd, pair, &traj, &state, a, &cfg.cost), &cfg.cem, rng)
            }
            PolicyKind::ShapedHull => cem_optimize(|a| hull_cost(fwd, pair, &state, a), &cfg.cem, rng),
            PolicyKind::GroundTruthGoal => {
                cem_optimize(|a| gt_cost(fwd, pair, &state, a, &cfg.cost), &cfg.cem, rng)
            }
        };
        let action = plan.best[0];
        state = step(pair, &state, &action, &cfg.sim);
        trace.push(state.clone());
        actions.push(action);
    }
    Ok(Episode {
        success: is_success(&state, pair, &cfg.sim),
        steps_used: actions.len(),
        trace,
        actions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::enumerate_pairs;
    use crate::rng::seeded;
    use crate::sim::sample_goal_state;

    fn pairs() -> Vec<BlockPair> {
        enumerate_pairs(3).unwrap()
    }

    /// A push far from both blocks; the oracle leaves the state unchanged.
    fn miss() -> Vec<PushAction> {
        vec![PushAction::new(-0.2, -0.2, -0.2, -0.19)]
    }

    fn scene(pair: &BlockPair, female: Pose2, rel: Pose2) -> WorldState {
        WorldState {
            pair_id: pair.id.clone(),
            female_pose: female,
            male_pose: female.compose(&rel),
        }
    }

    #[test]
    fn cem_finds_quadratic_minimum() {
        let target = [0.1, -0.1, 0.05, 0.0];
        let cfg = CemConfig {
            horizon: 1,
            elite_fraction: 0.1,
            ..CemConfig::default()
        };
        let cost = |a: &[PushAction]| {
            let v = a[0].to_array();
            v.iter().zip(&target).map(|(x, t)| (x - t) * (x - t)).sum::<f64>()
        };
        let r = cem_optimize(cost, &cfg, &mut seeded(1));
        for (x, t) in r.best[0].to_array().iter().zip(&target) {
            assert!((x - t).abs() < 0.02, "{:?}", r.best[0]);
        }
    }

    #[test]
    fn cem_samples_in_bounds_and_history_is_monotone() {
        let cfg = CemConfig::default();
        let mut worst: f64 = 0.0;
        let mut calls = 0;
        let r = cem_optimize(
            |a| {
                calls += 1;
                for x in a.iter().flat_map(|p| p.to_array()) {
                    worst = worst.max(x.abs());
                }
                (a[0].to_array()[0] - 0.13).abs() + (a[1].to_array()[3] + 0.07).abs()
            },
            &cfg,
            &mut seeded(2),
        );
        assert!(worst <= cfg.bound);
        assert_eq!(calls, cfg.population * cfg.iterations);
        assert_eq!(r.best.len(), cfg.horizon);
        assert_eq!(r.best_by_iteration.len(), cfg.iterations);
        assert!(r.best_by_iteration.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(r.best_cost, *r.best_by_iteration.last().unwrap());
    }

    #[test]
    fn cem_constant_cost_and_determinism() {
        let cfg = CemConfig::default();
        let a = cem_optimize(|_| 0.0, &cfg, &mut seeded(3));
        assert!(a.best.iter().all(PushAction::in_bounds));
        let b = cem_optimize(|_| 0.0, &cfg, &mut seeded(3));
        assert_eq!(a, b);
        let nan = cem_optimize(|_| f64::NAN, &cfg, &mut seeded(3));
        assert_eq!(nan.best_cost, f64::INFINITY);
    }

    #[test]
    fn elite_count_rounds_up() {
        assert_eq!(CemConfig::default().n_elites(), 8);
        let c = CemConfig { elite_fraction: 0.1, ..CemConfig::default() };
        assert_eq!(c.n_elites(), 7);
        assert!(CemConfig { iterations: 6, ..CemConfig::default() }.validate().is_err());
        assert!(CemConfig { population: 4, ..CemConfig::default() }.validate().is_err());
    }

    #[test]
    fn trm_cost_examples() {
        let ps = pairs();
        let pair = &ps[0];
        let sim = SimConfig::default();
        let fwd = Forward::Oracle(&sim);
        let cc = CostConfig::default();
        let female = Pose2::new(-0.1, 0.02, 0.3);
        let base = Pose2::new(0.2, 0.0, 0.0);
        let traj = vec![base; 10];
        let s = scene(pair, female, base);
        assert_eq!(step(pair, &s, &miss()[0], &sim), s);
        assert!(trm_cost(fwd, pair, &traj, &s, &miss(), &cc) < 1e-12);
        let s = scene(pair, female, Pose2::new(0.23, 0.04, 0.0));
        assert!((trm_cost(fwd, pair, &traj, &s, &miss(), &cc) - 0.05).abs() < 1e-12);
        let s = scene(pair, female, Pose2::new(0.2, 0.0, 1.0));
        assert!((trm_cost(fwd, pair, &traj, &s, &miss(), &cc) - 0.05).abs() < 1e-12);
        assert_eq!(trm_cost(fwd, pair, &traj[..4], &s, &miss(), &cc), SENTINEL_COST);
    }

    #[test]
    fn trm_cost_uses_fifth_step_only_by_default() {
        let ps = pairs();
        let pair = &ps[0];
        let sim = SimConfig::default();
        let fwd = Forward::Oracle(&sim);
        let target = Pose2::new(0.2, 0.0, 0.0);
        let mut traj = vec![Pose2::new(0.25, 0.0, 0.0); 10];
        traj[TRM_TARGET_STEP - 1] = target;
        let s = scene(pair, Pose2::new(-0.1, 0.0, 0.0), target);
        let cc = CostConfig::default();
        assert!(trm_cost(fwd, pair, &traj, &s, &miss(), &cc) < 1e-12);
        let cc = CostConfig { trm_match_intermediate: true, ..cc };
        assert!((trm_cost(fwd, pair, &traj, &s, &miss(), &cc) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn hull_cost_examples() {
        let ps = pairs();
        let sim = SimConfig::default();
        let mut rng = seeded(4);
        for pair in &ps {
            let g = sample_goal_state(pair, &mut rng, &sim);
            assert!((hull_area(pair, &g) - 0.0225).abs() < 1e-12, "{}", pair.id);
            let apart = WorldState {
                male_pose: Pose2::new(0.30, 0.0, 0.0).compose(&g.male_pose),
                ..g.clone()
            };
            assert!(hull_area(pair, &apart) > 0.0225);
        }
    }

    #[test]
    fn gt_cost_examples() {
        let ps = pairs();
        let sim = SimConfig::default();
        let fwd = Forward::Oracle(&sim);
        let cc = CostConfig::default();
        let female = Pose2::new(0.0, 0.05, -0.4);
        for pair in &ps {
            for g in &pair.mating_offsets {
                assert_eq!(goal_distance(pair, g, ANGLE_WEIGHT), 0.0);
            }
            let g = pair.mating_offsets[0];
            let shifted = Pose2::new(g.x + 0.05, g.y, g.theta);
            assert!((goal_distance(pair, &shifted, ANGLE_WEIGHT) - 0.05).abs() < 1e-12);
            let s = scene(pair, female, g);
            assert!(gt_cost(fwd, pair, &s, &miss(), &cc) < 1e-12);
            let s = scene(pair, female, shifted);
            assert!((gt_cost(fwd, pair, &s, &miss(), &cc) - 0.05).abs() < 1e-12);
        }
    }

    #[test]
    fn costs_ignore_rigid_motion_of_the_scene() {
        let ps = pairs();
        let pair = &ps[5];
        let sim = SimConfig::default();
        let fwd = Forward::Oracle(&sim);
        let cc = CostConfig::default();
        let mut rng = seeded(6);
        let traj: Vec<Pose2> = (0..10).map(|k| Pose2::new(0.2 - 0.01 * k as f64, 0.01, 0.1)).collect();
        let s = scene(pair, Pose2::new(0.02, 0.03, 0.7), Pose2::new(0.17, -0.05, 2.0));
        let base = [
            trm_cost(fwd, pair, &traj, &s, &miss(), &cc),
            hull_cost(fwd, pair, &s, &miss()),
            gt_cost(fwd, pair, &s, &miss(), &cc),
        ];
        for _ in 0..50 {
            let m = Pose2::new(rng.gen_range(-0.03..0.03), rng.gen_range(-0.03..0.03), rng.gen_range(-3.0..3.0));
            let moved = s.moved_by(&m);
            assert_eq!(step(pair, &moved, &miss()[0], &sim), moved);
            let got = [
                trm_cost(fwd, pair, &traj, &moved, &miss(), &cc),
                hull_cost(fwd, pair, &moved, &miss()),
                gt_cost(fwd, pair, &moved, &miss(), &cc),
            ];
            for (a, b) in base.iter().zip(&got) {
                assert!((a - b).abs() < 1e-6, "{base:?} vs {got:?}");
            }
        }
    }

    #[test]
    fn solved_start_ends_immediately() {
        let ps = pairs();
        let pair = &ps[2];
        let cfg = EpisodeConfig::default();
        let g = sample_goal_state(pair, &mut seeded(7), &cfg.sim);
        let ep = run_episode(
            pair,
            &g,
            PolicyKind::GroundTruthGoal,
            Models::default(),
            DynamicsMode::Oracle,
            &cfg,
            &mut seeded(8),
        )
        .unwrap();
        assert!(ep.success);
        assert_eq!(ep.steps_used, 0);
        assert_eq!(ep.trace, vec![g]);
    }

    #[test]
    fn missing_models_are_errors() {
        let ps = pairs();
        let pair = &ps[2];
        let cfg = EpisodeConfig::default();
        let g = sample_goal_state(pair, &mut seeded(7), &cfg.sim);
        let trm = run_episode(pair, &g, PolicyKind::TrmCost, Models::default(), DynamicsMode::Oracle, &cfg, &mut seeded(1));
        assert!(matches!(trm, Err(Error::Missing(_))));
        let dynamics =
            run_episode(pair, &g, PolicyKind::ShapedHull, Models::default(), DynamicsMode::Learned, &cfg, &mut seeded(1));
        assert!(matches!(dynamics, Err(Error::Missing(_))));
    }

    #[test]
    fn parse_names() {
        for k in PolicyKind::ALL {
            assert_eq!(PolicyKind::parse(k.name()).unwrap(), k);
        }
        assert_eq!(DynamicsMode::parse("oracle").unwrap(), DynamicsMode::Oracle);
        assert!(PolicyKind::parse("nope").is_err());
    }
}
