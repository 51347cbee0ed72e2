use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use m2ru::checkpoint::{encode, load_checkpoint, Checkpoint};
use m2ru::config::RunConfig;
use m2ru::experiments::{
    create_dir, drive, latency, load_stream, new_run, reliability, sweep_csv, wbs_sweep, write_latency_outputs,
    write_reliability_outputs, write_run_outputs, CheckpointPolicy,
};
use m2ru::metrics::{fmt9, write_file};
use m2ru::{Error, Result};
use m2ru_core::harness::mean_accuracy;
use m2ru_core::trainer::BackendKind;

#[derive(Parser)]
#[command(
    name = "m2ru",
    version,
    about = "Continual learning on a simulated memristive recurrent accelerator"
)]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    backend: Option<Backend>,
    /// Output directory (overrides `out_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Validate the configuration and inputs, then exit without writing anything.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Reference,
    Crossbar,
}

#[derive(Subcommand)]
enum Command {
    /// Continual-learning run over the configured task stream.
    Run {
        /// Save a checkpoint every N minibatches.
        #[arg(long)]
        checkpoint_every: Option<usize>,
        /// Continue from a checkpoint; its stored configuration is used.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Stop after N minibatches (the last checkpoint is always written).
        #[arg(long)]
        stop_after: Option<usize>,
    },
    /// Replay-quantization and streamed-matvec error sweeps.
    WbsSweep,
    /// Write-count CDFs and lifespan at two sparsity levels.
    Reliability,
    /// Inference latency model sweeps.
    Latency,
    /// Checkpoint tools.
    Checkpoint {
        #[command(subcommand)]
        action: CheckpointAction,
    },
}

#[derive(Subcommand)]
enum CheckpointAction {
    /// Print where a checkpointed run stands.
    Inspect { path: PathBuf },
    /// Check the checksum and that re-encoding reproduces the file.
    Verify { path: PathBuf },
}

fn resolve(cli: &Cli, base: Option<RunConfig>) -> Result<RunConfig> {
    let mut cfg = match (base, &cli.config) {
        (Some(c), _) => c,
        (None, Some(path)) => RunConfig::load(path)?,
        (None, None) => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seeds.master = s;
    }
    if let Some(b) = cli.backend {
        cfg.backend = match b {
            Backend::Reference => BackendKind::Reference,
            Backend::Crossbar => BackendKind::Crossbar,
        };
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dry_run(cfg: &RunConfig, needs_data: bool) -> Result<()> {
    if needs_data {
        cfg.check_paths()?;
    }
    print!("{}", cfg.to_toml());
    eprintln!("configuration is valid");
    Ok(())
}

fn run(cli: &Cli, checkpoint_every: Option<usize>, resume: Option<&Path>, stop_after: Option<usize>) -> Result<()> {
    if resume.is_some() && (cli.config.is_some() || cli.seed.is_some() || cli.backend.is_some()) {
        return Err(Error::Config(
            "--resume continues with the checkpoint's configuration; drop --config, --seed and --backend".into(),
        ));
    }
    let resumed = resume.map(load_checkpoint).transpose()?;
    let cfg = resolve(cli, resumed.as_ref().map(|c| c.config.clone()))?;
    if cli.dry_run {
        return dry_run(&cfg, true);
    }
    let ts = load_stream(&cfg)?;
    let mut run = match resumed {
        Some(c) => c.run,
        None => new_run(&cfg)?,
    };
    create_dir(&cfg.out_dir)?;
    let policy = CheckpointPolicy {
        every: checkpoint_every.unwrap_or(0),
        path: cfg.out_dir.join("checkpoint.bin"),
    };
    let wants_checkpoint = checkpoint_every.is_some() || stop_after.is_some();
    drive(&cfg, &ts, &mut run, wants_checkpoint.then_some(&policy), stop_after)?;
    if wants_checkpoint {
        m2ru::checkpoint::save_checkpoint(
            &Checkpoint {
                config: cfg.clone(),
                run: run.clone(),
            },
            &policy.path,
        )?;
    }
    if run.is_finished() {
        write_run_outputs(&cfg, &run, &cfg.out_dir)?;
        let ma = mean_accuracy(&run.accuracy)?;
        println!("mean accuracy {} over {} tasks", fmt9(ma), run.accuracy.rows().len());
    } else {
        println!(
            "stopped at task {}; resume from {}",
            run.current_task() + 1,
            policy.path.display()
        );
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run {
            checkpoint_every,
            resume,
            stop_after,
        } => run(cli, *checkpoint_every, resume.as_deref(), *stop_after),
        Command::WbsSweep => {
            let cfg = resolve(cli, None)?;
            if cli.dry_run {
                return dry_run(&cfg, false);
            }
            let rows = wbs_sweep(&cfg)?;
            create_dir(&cfg.out_dir)?;
            write_file(&cfg.out_dir, "config.toml", &cfg.to_toml())?;
            write_file(&cfg.out_dir, "wbs_sweep.csv", &sweep_csv(&rows))?;
            print!("{}", sweep_csv(&rows));
            Ok(())
        }
        Command::Reliability => {
            let cfg = resolve(cli, None)?;
            if cli.dry_run {
                return dry_run(&cfg, true);
            }
            let ts = load_stream(&cfg)?;
            let out = reliability(&cfg, &ts)?;
            write_reliability_outputs(&cfg, &out, &cfg.out_dir)?;
            let r = &out.report;
            println!(
                "mean writes/device {} vs {} ({}% fewer); lifespan {} vs {} years",
                fmt9(r.mean_b),
                fmt9(r.mean_a),
                fmt9(r.mean_reduction_pct),
                fmt9(out.lifespan_primary.years),
                fmt9(out.lifespan_compare.years)
            );
            Ok(())
        }
        Command::Latency => {
            let cfg = resolve(cli, None)?;
            if cli.dry_run {
                return dry_run(&cfg, false);
            }
            let out = latency(&cfg)?;
            write_latency_outputs(&cfg, &out, &cfg.out_dir)?;
            println!(
                "{} cycles = {} s (overhead {} cycles), n_b fit R^2 {}",
                out.calibration.total_cycles,
                fmt9(out.calibration.seconds),
                out.model.fixed_overhead_cycles,
                fmt9(out.bits_r2)
            );
            Ok(())
        }
        Command::Checkpoint { action } => match action {
            CheckpointAction::Inspect { path } => {
                let c = load_checkpoint(path)?;
                let r = &c.run;
                println!("backend      {:?}", c.config.backend);
                println!("finished     {}", r.is_finished());
                println!(
                    "task         {} of {}",
                    (r.current_task() + 1).min(r.accuracy.n_tasks()),
                    r.accuracy.n_tasks()
                );
                println!("steps        {}", r.metrics.steps.len());
                println!("tasks done   {}", r.accuracy.rows().len());
                println!("total writes {}", r.metrics.total_writes);
                Ok(())
            }
            CheckpointAction::Verify { path } => {
                let bytes = std::fs::read(path).map_err(m2ru::error::io_err(path))?;
                let c = m2ru::checkpoint::decode(&bytes, path)?;
                if encode(&c)? != bytes {
                    return Err(Error::Checkpoint {
                        path: path.clone(),
                        detail: "re-encoding does not reproduce the file".into(),
                    });
                }
                println!("ok");
                Ok(())
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
