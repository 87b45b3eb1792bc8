//! End-to-end stages over an artifact directory, shared by the command-line
//! tool and the examples.
//!
//! A directory holds, by fixed file name:
//!
//! | file | written by |
//! |---|---|
//! | `catalog.jsonl`, `seen.jsonl`, `unseen.jsonl` | [`gen_blocks`] |
//! | `reverse.jsonl` | [`collect_reverse_stage`] |
//! | `transitions.jsonl` | [`collect_transitions_stage`] |
//! | `trm.ckpt` | [`train_trm_stage`] |
//! | `dyn.ckpt` | [`train_dynamics_stage`] |
//! | `results.csv`, `results.json` | [`eval_stage`] |
//! | `scene.ppm`, `frames/` | [`render_stage`] |

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use crate::bench::{render_state, render_trajectory, run_experiment, Artifacts, ExperimentSpec, ResultsTable, Variant};
use crate::blocks::{enumerate_pairs, read_catalog, split_catalog, write_catalog, BlockPair};
use crate::config::Config;
use crate::data::{
    collect_reverse, collect_transitions, dataset_digest, read_dataset, write_dataset, DatasetHeader,
    ReverseTrajectory, Transition, REVERSE_FORMAT, TRANSITIONS_FORMAT,
};
use crate::learn::{
    read_dynamics, read_trm, train_dynamics, train_trm, trm_predict, write_dynamics, write_trm, DynamicsModel,
    TrainReport, TrmModel,
};
use crate::plan::{run_episode, DynamicsMode, Episode, Models, PolicyKind};
use crate::rng::{derive, derive_seed};
use crate::sim::sample_initial_state;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArtifactDir {
    pub root: PathBuf,
}

impl ArtifactDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn catalog(&self) -> PathBuf {
        self.root.join("catalog.jsonl")
    }
    pub fn seen(&self) -> PathBuf {
        self.root.join("seen.jsonl")
    }
    pub fn unseen(&self) -> PathBuf {
        self.root.join("unseen.jsonl")
    }
    pub fn reverse(&self) -> PathBuf {
        self.root.join("reverse.jsonl")
    }
    pub fn transitions(&self) -> PathBuf {
        self.root.join("transitions.jsonl")
    }
    pub fn trm(&self) -> PathBuf {
        self.root.join("trm.ckpt")
    }
    pub fn dynamics(&self) -> PathBuf {
        self.root.join("dyn.ckpt")
    }
    pub fn results_csv(&self) -> PathBuf {
        self.root.join("results.csv")
    }
    pub fn results_sidecar(&self) -> PathBuf {
        self.root.join("results.json")
    }
}

fn open(path: &Path, what: &str) -> Result<BufReader<File>> {
    match File::open(path) {
        Ok(f) => Ok(BufReader::new(f)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(Error::Missing(format!("{what} ({})", path.display())))
        }
        Err(e) => Err(e.into()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// The whole catalog plus its seen/unseen split.
#[derive(Debug, Clone)]
pub struct Catalogs {
    pub all: Vec<BlockPair>,
    pub seen: Vec<BlockPair>,
    pub unseen: Vec<BlockPair>,
}

pub fn build_catalogs(cfg: &Config, seed: u64) -> Result<Catalogs> {
    let all = enumerate_pairs(cfg.data.min_cells)?;
    let (seen, unseen) = split_catalog(&all, derive_seed(seed, &["split"]), cfg.data.unseen_fraction)?;
    Ok(Catalogs { all, seen, unseen })
}

pub fn gen_blocks(cfg: &Config, seed: u64, dir: &ArtifactDir) -> Result<Catalogs> {
    let c = build_catalogs(cfg, seed)?;
    write_catalog(create(&dir.catalog())?, &c.all)?;
    write_catalog(create(&dir.seen())?, &c.seen)?;
    write_catalog(create(&dir.unseen())?, &c.unseen)?;
    Ok(c)
}

pub fn load_catalogs(dir: &ArtifactDir) -> Result<Catalogs> {
    Ok(Catalogs {
        all: read_catalog(open(&dir.catalog(), "block catalog")?)?,
        seen: read_catalog(open(&dir.seen(), "seen split")?)?,
        unseen: read_catalog(open(&dir.unseen(), "unseen split")?)?,
    })
}

pub fn reverse_dataset(cfg: &Config, seed: u64, seen: &[BlockPair]) -> Result<(DatasetHeader, Vec<ReverseTrajectory>)> {
    let seed = derive_seed(seed, &["reverse"]);
    let trajs = collect_reverse(seen, cfg.data.n_traj, cfg.data.m, seed, &cfg.sim)?;
    Ok((DatasetHeader::reverse(seed, trajs.len(), cfg.data.m, &cfg.sim), trajs))
}

pub fn transition_dataset(cfg: &Config, seed: u64, seen: &[BlockPair]) -> Result<(DatasetHeader, Vec<Transition>)> {
    let seed = derive_seed(seed, &["transitions"]);
    let ts = collect_transitions(seen, cfg.data.transitions, seed, &cfg.sim)?;
    Ok((DatasetHeader::transitions(seed, ts.len(), &cfg.sim), ts))
}

pub fn collect_reverse_stage(cfg: &Config, seed: u64, pairs: &ArtifactDir, out: &ArtifactDir) -> Result<usize> {
    let c = load_catalogs(pairs)?;
    let (h, trajs) = reverse_dataset(cfg, seed, &c.seen)?;
    write_dataset(create(&out.reverse())?, &h, &trajs)?;
    Ok(trajs.len())
}

pub fn collect_transitions_stage(cfg: &Config, seed: u64, pairs: &ArtifactDir, out: &ArtifactDir) -> Result<usize> {
    let c = load_catalogs(pairs)?;
    let (h, ts) = transition_dataset(cfg, seed, &c.seen)?;
    write_dataset(create(&out.transitions())?, &h, &ts)?;
    Ok(ts.len())
}

pub fn train_trm_stage(cfg: &Config, pairs: &ArtifactDir, out: &ArtifactDir) -> Result<TrainReport> {
    let c = load_catalogs(pairs)?;
    let (h, trajs): (_, Vec<ReverseTrajectory>) =
        read_dataset(open(&out.reverse(), "reverse dataset")?, REVERSE_FORMAT)?;
    let digest = dataset_digest(&h, &trajs)?;
    let (model, report) = train_trm(&trajs, &c.all, cfg.data.horizon, &cfg.trm, &digest)?;
    write_trm(create(&out.trm())?, &model)?;
    Ok(report)
}

pub fn train_dynamics_stage(cfg: &Config, pairs: &ArtifactDir, out: &ArtifactDir) -> Result<TrainReport> {
    let c = load_catalogs(pairs)?;
    let (h, ts): (_, Vec<Transition>) =
        read_dataset(open(&out.transitions(), "transition dataset")?, TRANSITIONS_FORMAT)?;
    let digest = dataset_digest(&h, &ts)?;
    let (model, report) = train_dynamics(&ts, &c.all, cfg.sim.pusher_radius, &cfg.dynamics, &digest)?;
    write_dynamics(create(&out.dynamics())?, &model)?;
    Ok(report)
}

pub fn load_trm(dir: &ArtifactDir) -> Result<TrmModel> {
    read_trm(open(&dir.trm(), "time-reversal checkpoint")?)
}

pub fn load_dynamics(dir: &ArtifactDir) -> Result<DynamicsModel> {
    read_dynamics(open(&dir.dynamics(), "dynamics checkpoint")?)
}

/// What an evaluation run should cover.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRequest {
    pub variants: Vec<Variant>,
    pub kinds: Vec<PolicyKind>,
    pub dynamics: DynamicsMode,
    pub seed: u64,
}

/// Loads only the checkpoints the request needs, runs every variant, and
/// writes `results.csv` and `results.json`.
pub fn eval_stage(cfg: &Config, req: &EvalRequest, pairs: &ArtifactDir, out: &ArtifactDir) -> Result<ResultsTable> {
    let c = load_catalogs(pairs)?;
    let trm = if req.kinds.contains(&PolicyKind::TrmCost) {
        Some(load_trm(out)?)
    } else {
        None
    };
    let dynamics = if req.dynamics == DynamicsMode::Learned {
        Some(load_dynamics(out)?)
    } else {
        None
    };
    let art = Artifacts {
        seen: &c.seen,
        unseen: &c.unseen,
        models: Models {
            trm: trm.as_ref(),
            dynamics: dynamics.as_ref(),
        },
    };
    let mut table: Option<ResultsTable> = None;
    for &v in &req.variants {
        let spec = ExperimentSpec::new(v, &req.kinds, req.dynamics, req.seed, cfg.clone());
        let t = run_experiment(&spec, &art)?;
        match &mut table {
            Some(acc) => acc.merge(t),
            None => table = Some(t),
        }
    }
    let table = table.ok_or_else(|| Error::InvalidArgument("no variants requested".into()))?;
    table.write_csv(create(&out.results_csv())?)?;
    table.write_sidecar(create(&out.results_sidecar())?)?;
    Ok(table)
}

/// What [`render_stage`] produced.
#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub scene: PathBuf,
    pub frames: Vec<PathBuf>,
    pub episode: Option<Episode>,
}

/// Renders one sampled scene to `scene.ppm` (with the time-reversal
/// prediction overlaid when `trm.ckpt` exists). With a policy, also plays the
/// episode and writes its frames under `frames/`.
pub fn render_stage(
    cfg: &Config,
    variant: Variant,
    policy: Option<(PolicyKind, DynamicsMode)>,
    seed: u64,
    pairs: &ArtifactDir,
    out: &ArtifactDir,
) -> Result<RenderOutput> {
    let c = load_catalogs(pairs)?;
    let pool = if variant == Variant::Unseen { &c.unseen } else { &c.seen };
    let sep = if variant == Variant::SeenFar {
        cfg.bench.far_separation
    } else {
        cfg.bench.near_separation
    };
    let mut rng = derive(seed, &["render", variant.name()]);
    let pair = &pool[rand::Rng::gen_range(&mut rng, 0..pool.len())];
    let state = sample_initial_state(pair, &mut rng, sep, &cfg.sim)?;
    let trm = match load_trm(out) {
        Ok(m) => Some(m),
        Err(Error::Missing(_)) => None,
        Err(e) => return Err(e),
    };
    let overlay = trm.as_ref().map(|m| trm_predict(m, pair, &state)).transpose()?;
    std::fs::create_dir_all(&out.root)?;
    let scene = out.root.join("scene.ppm");
    render_state(&state, pair, &cfg.sim, overlay.as_deref(), &scene)?;
    let (frames, episode) = match policy {
        None => (Vec::new(), None),
        Some((kind, mode)) => {
            let dynamics = if mode == DynamicsMode::Learned {
                Some(load_dynamics(out)?)
            } else {
                None
            };
            let models = Models {
                trm: trm.as_ref(),
                dynamics: dynamics.as_ref(),
            };
            let ep = run_episode(pair, &state, kind, models, mode, &cfg.episode(), &mut rng)?;
            let frames = render_trajectory(&ep.trace, pair, &cfg.sim, &out.root.join("frames"))?;
            (frames, Some(ep))
        }
    };
    Ok(RenderOutput { scene, frames, episode })
}
