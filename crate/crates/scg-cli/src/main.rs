use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use scg_cli::{PathOverrides, Pipeline, PipelineConfig, PipelineError};

/// Self-supervised traffic scene clustering pipeline.
#[derive(Parser)]
#[command(name = "scg", version, about)]
struct Cli {
    /// Pipeline configuration file.
    #[arg(long, global = true, default_value = "pipeline.json")]
    config: PathBuf,

    /// Re-run stages even when their outputs are up to date.
    #[arg(long, global = true)]
    force: bool,

    /// Override the configured global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read the track file and write the normalized scene store.
    Ingest,
    /// Generate a synthetic track file (and default map) when none is
    /// configured.
    Synth,
    /// Write augmented positive-sample copies of every scene.
    Augment {
        #[arg(long)]
        sigma_pos: Option<f64>,
        #[arg(long)]
        sigma_vel: Option<f64>,
        #[arg(long)]
        p_entity: Option<f64>,
        /// Augmented copies per scene.
        #[arg(long)]
        copies: Option<usize>,
    },
    /// Build scene graphs from originals and augmented copies.
    BuildGraphs,
    /// Train the encoder on (anchor, positive) graph pairs.
    Train {
        /// Graph dump to train on (defaults to <workdir>/graphs.jsonl).
        #[arg(long)]
        graphs: Option<PathBuf>,
        /// Checkpoint output (defaults to <workdir>/checkpoint.json).
        #[arg(long)]
        out: Option<PathBuf>,
        /// History CSV output (defaults to <workdir>/history.csv).
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Embed every anchor graph with the trained checkpoint.
    Embed {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-scene statistics and the vehicle-count colored scatter.
    Stats,
    /// DBSCAN over the embeddings.
    Cluster {
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        min_samples: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Pick eps from the k-distance knee and write the curve CSV.
        #[arg(long)]
        suggest_eps: bool,
    },
    /// Velocity-increment sweep over a seeded scene sample.
    Sweep,
    /// Verify analytic gradients against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 50)]
        instances: usize,
    },
    /// Run the whole pipeline in order.
    Run,
}

fn execute(cli: Cli) -> Result<(), PipelineError> {
    let mut config = PipelineConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let mut overrides = PathOverrides::default();

    match &cli.command {
        Command::Augment {
            sigma_pos,
            sigma_vel,
            p_entity,
            copies,
        } => {
            if let Some(v) = sigma_pos {
                config.augment.sigma_pos = *v;
            }
            if let Some(v) = sigma_vel {
                config.augment.sigma_vel = *v;
            }
            if let Some(v) = p_entity {
                config.augment.p_entity = *v;
            }
            if let Some(v) = copies {
                config.augment.copies = *v;
            }
            config.validate()?;
        }
        Command::Train {
            graphs,
            out,
            history,
        } => {
            overrides.graphs = graphs.clone();
            overrides.checkpoint = out.clone();
            overrides.history = history.clone();
        }
        Command::Embed { out } => {
            overrides.embeddings = out.clone();
        }
        Command::Cluster {
            embeddings,
            eps,
            min_samples,
            out,
            suggest_eps,
        } => {
            overrides.embeddings = embeddings.clone();
            overrides.labels = out.clone();
            if let Some(v) = eps {
                config.cluster.eps = *v;
            }
            if let Some(v) = min_samples {
                config.cluster.min_samples = *v;
            }
            if *suggest_eps {
                config.cluster.suggest_eps = true;
            }
            config.validate()?;
        }
        _ => {}
    }

    let mut pipeline = Pipeline::new(config, cli.force);
    pipeline.overrides = overrides;

    match cli.command {
        Command::Ingest => pipeline.ingest(),
        Command::Synth => pipeline.synth(),
        Command::Augment { .. } => pipeline.augment(),
        Command::BuildGraphs => pipeline.build_graphs(),
        Command::Train { .. } => pipeline.train(),
        Command::Embed { .. } => pipeline.embed(),
        Command::Stats => pipeline.stats(),
        Command::Cluster { .. } => pipeline.cluster(),
        Command::Sweep => pipeline.sweep(),
        Command::Gradcheck { instances } => {
            let worst = pipeline.gradcheck(instances)?;
            println!("gradcheck: max relative error {worst:.3e} over {instances} instances");
            if worst >= 1e-4 {
                return Err(PipelineError::Stage {
                    stage: "gradcheck",
                    message: format!("max relative error {worst:.3e} >= 1e-4"),
                });
            }
            Ok(())
        }
        Command::Run => pipeline.run(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
