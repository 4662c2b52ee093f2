use clap::{Parser, Subcommand};
use kslab::presets::{load_config, preset_text, PRESETS};
use kslab::{run_experiment, verify, Config, ExperimentKind, HarnessError, Report};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "kslab", version, about = "Attraction-repulsion chemotaxis numerical lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML config path or `preset:<name>`
    config: String,
    /// Output directory
    #[arg(long, short, default_value = "kslab-out")]
    output: PathBuf,
    /// Worker threads for eps families and sweeps
    #[arg(long)]
    workers: Option<usize>,
    /// Deterministic execution (always on; accepted for compatibility)
    #[arg(long)]
    seedless: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment a config describes
    Run(RunArgs),
    /// Run a mass/attraction sweep
    Sweep(RunArgs),
    /// Run an eps and mesh convergence study
    Convergence(RunArgs),
    /// Recompute verdicts from a stored run directory
    Verify {
        dir: PathBuf,
        /// Exit with code 3 if any verdict fails
        #[arg(long)]
        strict: bool,
    },
    /// List or print the shipped presets
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    Show { name: String },
}

fn print_report(report: &Report) {
    for r in &report.runs {
        let extra = match (&r.error, r.detection_time) {
            (Some(e), _) => format!(" error: {e}"),
            (None, Some(t)) => format!(" detected at t={t:e}"),
            _ => String::new(),
        };
        println!("run {} eps={:e}: {}{extra}", r.dir, r.eps, r.status);
    }
    for v in &report.verdicts {
        println!("{}", v.summary());
    }
    let failed = report.verdicts.iter().filter(|v| !v.pass).count();
    println!(
        "{} verdicts, {} failed; artifacts in {}",
        report.verdicts.len(),
        failed,
        report.dir.display()
    );
}

fn execute(args: &RunArgs, force: Option<ExperimentKind>) -> Result<Report, HarnessError> {
    let mut cfg: Config = load_config(&args.config)?;
    if let Some(kind) = force {
        cfg.experiment.kind = kind;
    }
    run_experiment(&cfg, Path::new(&args.output), args.workers)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (result, strict) = match &cli.command {
        Command::Run(a) => (execute(a, None), false),
        Command::Sweep(a) => (execute(a, Some(ExperimentKind::Sweep)), false),
        Command::Convergence(a) => (execute(a, Some(ExperimentKind::Convergence)), false),
        Command::Verify { dir, strict } => (verify(dir), *strict),
        Command::Presets { action } => {
            match action {
                PresetAction::List => {
                    for (name, _) in PRESETS {
                        println!("{name}");
                    }
                }
                PresetAction::Show { name } => match preset_text(name) {
                    Some(text) => print!("{text}"),
                    None => {
                        eprintln!("error: unknown preset `{name}`");
                        return ExitCode::from(1);
                    }
                },
            }
            return ExitCode::SUCCESS;
        }
    };
    match result {
        Ok(report) => {
            print_report(&report);
            let strict = strict || report.kind == ExperimentKind::Verify;
            if strict && !report.all_pass() {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
