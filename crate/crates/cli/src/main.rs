use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use subnav_cli::config::{parse_config, Overrides};
use subnav_cli::logs::RunStatus;
use subnav_cli::{plotdata, report, runner, CliError, Result};
use subnav_core::evaluation::{builtin_course, CourseId};

#[derive(Parser)]
#[command(name = "subnav", version, about = "RexROV localization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every course × backend × seed cell of a config
    Run {
        config: PathBuf,
        /// run only this seed
        #[arg(long)]
        seed: Option<u64>,
        /// worker threads (0 = one per core)
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// print the resolved config and run ids without simulating
        #[arg(long)]
        dry_run: bool,
        /// dynamic, kinematic or both; repeatable
        #[arg(long)]
        backend: Vec<String>,
        /// output directory (overrides `output_dir`)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Built-in courses
    Courses {
        #[command(subcommand)]
        action: CoursesAction,
    },
    /// Recompute report.csv and summary.csv from run directories
    Report { dir: PathBuf },
    /// Write plot tables for one run directory
    Plotdata {
        run_dir: PathBuf,
        /// where to write the tables (defaults to the run directory)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum CoursesAction {
    List,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            seed,
            jobs,
            dry_run,
            backend,
            out,
        } => {
            let overrides = Overrides {
                seed,
                backends: (!backend.is_empty()).then_some(backend),
                output_dir: out,
            };
            let spec = parse_config(&config, &overrides)?;
            let plans = spec.plans();
            if dry_run {
                print!("{}", spec.config.to_toml());
                println!("\n# {} runs into {}", plans.len(), spec.output_dir.display());
                for p in &plans {
                    println!("# {}", p.id);
                }
                return Ok(());
            }
            let (outcomes, _) = runner::run_experiment(&spec, jobs)?;
            let failed: Vec<_> = outcomes.iter().filter(|o| o.status == RunStatus::Failed).collect();
            for o in &failed {
                eprintln!("{}: {}", o.id, o.message);
            }
            println!(
                "{} runs, {} failed; report in {}",
                outcomes.len(),
                failed.len(),
                spec.output_dir.join(report::REPORT_FILE).display()
            );
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::RunsFailed {
                    failed: failed.len(),
                    total: outcomes.len(),
                })
            }
        }
        Command::Courses { action: CoursesAction::List } => {
            for id in CourseId::ALL {
                let c = builtin_course(id);
                let length: f64 = c
                    .waypoints
                    .windows(2)
                    .map(|w| w[0].xy_distance(w[1].x, w[1].y))
                    .sum();
                println!("{}\t{} waypoints\t{:.1} m\t{}", id.name(), c.waypoints.len(), length, id.description());
            }
            Ok(())
        }
        Command::Report { dir } => {
            let rows = report::write_reports(&dir)?;
            print!("{}", report::render_report(&rows));
            Ok(())
        }
        Command::Plotdata { run_dir, out } => {
            let out = out.unwrap_or_else(|| run_dir.clone());
            plotdata::write_plotdata(&run_dir, &out)?;
            println!("wrote {} and {}", plotdata::OVERLAY_FILE, plotdata::ACCEL_FILE);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
