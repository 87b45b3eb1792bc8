//! Flat `key = value` configuration mirroring every module's settings.
//!
//! ```text
//! # comments and blank lines are ignored
//! sim.pusher_radius = 0.01
//! trm.hidden = 64,64
//! cem.population = 64
//! ```
//!
//! Unknown keys and unparsable values are errors. [`Config::to_text`] writes
//! every key, so a dumped file reloads to the same configuration.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::learn::TrainConfig;
use crate::plan::{CemConfig, CostConfig, EpisodeConfig};
use crate::sim::SimConfig;
use crate::{Error, Result};

/// Dataset sizes and the catalog split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    /// Reverse trajectories collected for the time-reversal model.
    pub n_traj: usize,
    /// Perturbations per reverse trajectory.
    pub m: usize,
    /// Random-action transitions collected for the dynamics model.
    pub transitions: usize,
    /// Time-reversal prediction horizon A.
    pub horizon: usize,
    pub min_cells: usize,
    pub unseen_fraction: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            n_traj: 2000,
            m: 12,
            transitions: 50_000,
            horizon: 10,
            min_cells: 3,
            unseen_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub episodes: usize,
    pub near_separation: f64,
    pub far_separation: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            episodes: 100,
            near_separation: 0.10,
            far_separation: 0.30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub sim: SimConfig,
    pub data: DataConfig,
    pub trm: TrainConfig,
    pub dynamics: TrainConfig,
    pub cem: CemConfig,
    pub cost: CostConfig,
    /// Pushes allowed per episode.
    pub max_steps: usize,
    pub bench: BenchConfig,
}

impl Default for Config {
    fn default() -> Self {
        let ep = EpisodeConfig::default();
        Self {
            sim: ep.sim,
            data: DataConfig::default(),
            trm: TrainConfig::trm_default(),
            dynamics: TrainConfig::dynamics_default(),
            cem: ep.cem,
            cost: ep.cost,
            max_steps: ep.max_steps,
            bench: BenchConfig::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn train_entries(prefix: &str, t: &TrainConfig) -> Vec<(String, String)> {
    [
        ("hidden", join(&t.hidden)),
        ("batch_size", t.batch_size.to_string()),
        ("epochs", t.epochs.to_string()),
        ("learning_rate", t.adam.learning_rate.to_string()),
        ("beta1", t.adam.beta1.to_string()),
        ("beta2", t.adam.beta2.to_string()),
        ("epsilon", t.adam.epsilon.to_string()),
        ("seed", t.seed.to_string()),
        ("shape_features", t.shape_features.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (format!("{prefix}.{k}"), v))
    .collect()
}

fn set_train(t: &mut TrainConfig, key: &str, field: &str, value: &str) -> Result<bool> {
    match field {
        "hidden" => t.hidden = parse_list(key, value)?,
        "batch_size" => t.batch_size = parse(key, value)?,
        "epochs" => t.epochs = parse(key, value)?,
        "learning_rate" => t.adam.learning_rate = parse(key, value)?,
        "beta1" => t.adam.beta1 = parse(key, value)?,
        "beta2" => t.adam.beta2 = parse(key, value)?,
        "epsilon" => t.adam.epsilon = parse(key, value)?,
        "seed" => t.seed = parse(key, value)?,
        "shape_features" => t.shape_features = parse(key, value)?,
        _ => return Ok(false),
    }
    Ok(true)
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let (section, field) = key.split_once('.').unwrap_or(("", key));
        let known = match section {
            "sim" => {
                let s = &mut self.sim;
                match field {
                    "cell_size" => s.cell_size = parse(key, value)?,
                    "pusher_radius" => s.pusher_radius = parse(key, value)?,
                    "step_length" => s.step_length = parse(key, value)?,
                    "rotation_gain" => s.rotation_gain = parse(key, value)?,
                    "workspace_halfwidth" => s.workspace_halfwidth = parse(key, value)?,
                    "spawn_halfwidth" => s.spawn_halfwidth = parse(key, value)?,
                    "success_pos_tol" => s.success_pos_tol = parse(key, value)?,
                    "success_ang_tol" => s.success_ang_tol = parse(key, value)?,
                    "max_resolve_iters" => s.max_resolve_iters = parse(key, value)?,
                    _ => return Err(unknown(key)),
                }
                true
            }
            "data" => {
                let d = &mut self.data;
                match field {
                    "n_traj" => d.n_traj = parse(key, value)?,
                    "m" => d.m = parse(key, value)?,
                    "transitions" => d.transitions = parse(key, value)?,
                    "horizon" => d.horizon = parse(key, value)?,
                    "min_cells" => d.min_cells = parse(key, value)?,
                    "unseen_fraction" => d.unseen_fraction = parse(key, value)?,
                    _ => return Err(unknown(key)),
                }
                true
            }
            "trm" => set_train(&mut self.trm, key, field, value)?,
            "dyn" => set_train(&mut self.dynamics, key, field, value)?,
            "cem" => {
                let c = &mut self.cem;
                match field {
                    "population" => c.population = parse(key, value)?,
                    "elite_fraction" => c.elite_fraction = parse(key, value)?,
                    "iterations" => c.iterations = parse(key, value)?,
                    "horizon" => c.horizon = parse(key, value)?,
                    "min_std" => c.min_std = parse(key, value)?,
                    "bound" => c.bound = parse(key, value)?,
                    _ => return Err(unknown(key)),
                }
                true
            }
            "plan" => {
                match field {
                    "max_steps" => self.max_steps = parse(key, value)?,
                    "angle_weight" => self.cost.angle_weight = parse(key, value)?,
                    "trm_match_intermediate" => self.cost.trm_match_intermediate = parse(key, value)?,
                    _ => return Err(unknown(key)),
                }
                true
            }
            "bench" => {
                let b = &mut self.bench;
                match field {
                    "episodes" => b.episodes = parse(key, value)?,
                    "near_separation" => b.near_separation = parse(key, value)?,
                    "far_separation" => b.far_separation = parse(key, value)?,
                    _ => return Err(unknown(key)),
                }
                true
            }
            _ => false,
        };
        if known {
            Ok(())
        } else {
            Err(unknown(key))
        }
    }

    /// Every key with its current value, in a stable order.
    pub fn entries(&self) -> Vec<(String, String)> {
        let s = &self.sim;
        let d = &self.data;
        let c = &self.cem;
        let b = &self.bench;
        let mut out: Vec<(String, String)> = [
            ("sim.cell_size", s.cell_size.to_string()),
            ("sim.pusher_radius", s.pusher_radius.to_string()),
            ("sim.step_length", s.step_length.to_string()),
            ("sim.rotation_gain", s.rotation_gain.to_string()),
            ("sim.workspace_halfwidth", s.workspace_halfwidth.to_string()),
            ("sim.spawn_halfwidth", s.spawn_halfwidth.to_string()),
            ("sim.success_pos_tol", s.success_pos_tol.to_string()),
            ("sim.success_ang_tol", s.success_ang_tol.to_string()),
            ("sim.max_resolve_iters", s.max_resolve_iters.to_string()),
            ("data.n_traj", d.n_traj.to_string()),
            ("data.m", d.m.to_string()),
            ("data.transitions", d.transitions.to_string()),
            ("data.horizon", d.horizon.to_string()),
            ("data.min_cells", d.min_cells.to_string()),
            ("data.unseen_fraction", d.unseen_fraction.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        out.extend(train_entries("trm", &self.trm));
        out.extend(train_entries("dyn", &self.dynamics));
        out.extend(
            [
                ("cem.population", c.population.to_string()),
                ("cem.elite_fraction", c.elite_fraction.to_string()),
                ("cem.iterations", c.iterations.to_string()),
                ("cem.horizon", c.horizon.to_string()),
                ("cem.min_std", c.min_std.to_string()),
                ("cem.bound", c.bound.to_string()),
                ("plan.max_steps", self.max_steps.to_string()),
                ("plan.angle_weight", self.cost.angle_weight.to_string()),
                ("plan.trm_match_intermediate", self.cost.trm_match_intermediate.to_string()),
                ("bench.episodes", b.episodes.to_string()),
                ("bench.near_separation", b.near_separation.to_string()),
                ("bench.far_separation", b.far_separation.to_string()),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v)),
        );
        out
    }

    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.trm.validate()?;
        self.dynamics.validate()?;
        self.cem.validate()?;
        let d = &self.data;
        if d.n_traj == 0 || d.m == 0 || d.transitions == 0 || d.horizon == 0 {
            return Err(Error::Config("dataset sizes and horizon must be positive".into()));
        }
        if self.bench.episodes == 0 {
            return Err(Error::Config("bench.episodes must be at least 1".into()));
        }
        Ok(())
    }

    pub fn episode(&self) -> EpisodeConfig {
        EpisodeConfig {
            sim: self.sim.clone(),
            cem: self.cem.clone(),
            cost: self.cost,
            max_steps: self.max_steps,
        }
    }
}

fn unknown(key: &str) -> Error {
    Error::Config(format!("unknown key {key:?}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_reloads_identically() {
        let mut cfg = Config::default();
        cfg.sim.pusher_radius = 0.012;
        cfg.trm.hidden = vec![32, 16, 8];
        cfg.cost.trm_match_intermediate = true;
        cfg.bench.episodes = 7;
        assert_eq!(Config::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn comments_and_blanks() {
        let cfg = Config::parse("# header\n\ncem.population = 128  # bigger\n").unwrap();
        assert_eq!(cfg.cem.population, 128);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Config::parse("sim.nope = 1").is_err());
        assert!(Config::parse("nonsense").is_err());
        assert!(Config::parse("cem.population = many").is_err());
        assert!(Config::parse("bench.episodes = 0").is_err());
        assert!(Config::parse("sim.step_length = 0.05").is_err());
    }
}
