use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use trass::bench::Variant;
use trass::config::Config;
use trass::learn::{dynamics_architecture, gradient_check, trm_architecture, Mlp, TrainReport};
use trass::pipeline::{self, ArtifactDir, EvalRequest};
use trass::plan::{DynamicsMode, PolicyKind};
use trass::rng::derive;
use trass::{Error, Result};

#[derive(Parser)]
#[command(name = "trass", version, about = "Time-reversal self-supervision for planar block mating")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Master seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Flat key=value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Artifact directory to write (and read trained models from).
    #[arg(long, global = true, default_value = "artifacts")]
    out: PathBuf,
    /// Directory holding the block catalog; defaults to --out.
    #[arg(long, global = true)]
    pairs: Option<PathBuf>,
    /// Episodes per cell (overrides bench.episodes).
    #[arg(long, global = true)]
    episodes: Option<usize>,
    /// seen, seen-far, unseen or all.
    #[arg(long, global = true, default_value = "seen")]
    variant: String,
    /// trm, hull, gt or all.
    #[arg(long, global = true)]
    policy: Option<String>,
    /// learned or oracle.
    #[arg(long, global = true, default_value = "learned")]
    dynamics: String,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate block pairs and write the catalog and its split.
    GenBlocks,
    /// Collect reverse-exploration trajectories from goal states.
    CollectReverse,
    /// Collect random-push transitions for the dynamics model.
    CollectTransitions,
    /// Train the time-reversal model.
    TrainTrm,
    /// Train the forward dynamics model.
    TrainDyn,
    /// Run the planning benchmark and write results.csv and results.json.
    Eval,
    /// Render a sampled scene, and with --policy the episode from it.
    Render,
    /// Compare analytic and finite-difference gradients of both networks.
    GradCheck,
    /// Print the effective configuration.
    Config,
}

fn variants(s: &str) -> Result<Vec<Variant>> {
    if s == "all" {
        Ok(Variant::ALL.to_vec())
    } else {
        s.split(',').map(Variant::parse).collect()
    }
}

fn kinds(s: &str) -> Result<Vec<PolicyKind>> {
    if s == "all" {
        Ok(PolicyKind::ALL.to_vec())
    } else {
        s.split(',').map(PolicyKind::parse).collect()
    }
}

fn print_report(name: &str, r: &TrainReport) {
    println!("{name}: {} epochs, final loss {:.6}", r.epoch_losses.len(), r.final_loss);
    if let Some(m) = r.heldout_mse {
        println!("held-out mse {m:.6}");
    }
    if let Some(m) = r.heldout_median_pos_err {
        println!("held-out median position error {m:.5} m");
    }
}

fn run(cli: Cli) -> Result<()> {
    let c = &cli.common;
    let mut cfg = match &c.config {
        Some(p) => Config::from_file(p)?,
        None => Config::default(),
    };
    if let Some(n) = c.episodes {
        cfg.bench.episodes = n;
    }
    cfg.validate()?;
    let out = ArtifactDir::new(&c.out);
    let pairs = ArtifactDir::new(c.pairs.as_ref().unwrap_or(&c.out));
    let mode = DynamicsMode::parse(&c.dynamics)?;
    match cli.command {
        Command::GenBlocks => {
            let cat = pipeline::gen_blocks(&cfg, c.seed, &out)?;
            println!("{} pairs ({} seen, {} unseen)", cat.all.len(), cat.seen.len(), cat.unseen.len());
        }
        Command::CollectReverse => {
            let n = pipeline::collect_reverse_stage(&cfg, c.seed, &pairs, &out)?;
            println!("{n} trajectories -> {}", out.reverse().display());
        }
        Command::CollectTransitions => {
            let n = pipeline::collect_transitions_stage(&cfg, c.seed, &pairs, &out)?;
            println!("{n} transitions -> {}", out.transitions().display());
        }
        Command::TrainTrm => print_report("trm", &pipeline::train_trm_stage(&cfg, &pairs, &out)?),
        Command::TrainDyn => print_report("dynamics", &pipeline::train_dynamics_stage(&cfg, &pairs, &out)?),
        Command::Eval => {
            let req = EvalRequest {
                variants: variants(&c.variant)?,
                kinds: kinds(c.policy.as_deref().unwrap_or("all"))?,
                dynamics: mode,
                seed: c.seed,
            };
            let table = pipeline::eval_stage(&cfg, &req, &pairs, &out)?;
            print!("{}", table.to_csv());
        }
        Command::Render => {
            let variant = Variant::parse(&c.variant)?;
            let policy = c.policy.as_deref().map(PolicyKind::parse).transpose()?;
            let r = pipeline::render_stage(&cfg, variant, policy.map(|k| (k, mode)), c.seed, &pairs, &out)?;
            println!("{}", r.scene.display());
            if let Some(ep) = r.episode {
                println!("{} frames, success {}", r.frames.len(), ep.success);
            }
        }
        Command::GradCheck => {
            let mut rng = derive(c.seed, &["grad-check"]);
            let mut worst: f64 = 0.0;
            for (name, sizes) in [
                ("trm", trm_architecture(&cfg.trm, cfg.data.horizon)),
                ("dynamics", dynamics_architecture(&cfg.dynamics)),
            ] {
                let net = Mlp::random(&sizes, &mut rng)?;
                let err = gradient_check(&net, 100, &mut rng)?;
                println!("{name} {sizes:?}: max relative error {err:.3e}");
                worst = worst.max(err);
            }
            if worst >= 1e-4 {
                return Err(Error::InvalidArgument(format!("gradient check failed: {worst:.3e}")));
            }
        }
        Command::Config => print!("{}", cfg.to_text()),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("trass: {e}");
            ExitCode::FAILURE
        }
    }
}
