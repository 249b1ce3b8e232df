use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sth_cli::{
    analyze, emit, run_experiment, AnalyzeOptions, AnalyzeTask, CliError, EmitFormat,
    ExperimentSpec, ResultArchive, Selection,
};

#[derive(Parser)]
#[command(
    name = "sth",
    version,
    about = "Simulate and analyze the virtual time horizon of conservative \
             parallel discrete-event simulations on a ring"
)]
struct Cli {
    /// Worker threads for trial-level parallelism (default: all cores).
    /// Results are bit-identical for any value.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a TOML spec file and write an archive.
    Run(RunArgs),
    /// Export archive tables as CSV files or a JSON document.
    Emit(EmitArgs),
    /// Analyze an archive: exponents, extrapolations, model comparisons.
    Analyze(AnalyzeArgs),
    /// Show the published model constants or refit them from data.
    Params(ParamsArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment spec (TOML).
    spec: PathBuf,
    /// Archive output path (default: <spec stem>.archive.json).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Override the PE-step resource guard.
    #[arg(long)]
    force: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct EmitArgs {
    /// Archive produced by `run`.
    archive: PathBuf,
    #[arg(long, value_enum)]
    format: FormatArg,
    /// Cell filters like l=100, n_v=1, delta=10, delta=unconstrained,
    /// index=0. Repeatable; a cell must match all of them.
    #[arg(long = "select")]
    select: Vec<String>,
    /// Output directory (default: <archive stem>.emit).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Exponents,
    Extrapolate,
    CompositeFit,
    Meanfield,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Archive produced by `run`.
    archive: PathBuf,
    #[arg(long, value_enum)]
    task: TaskArg,
    /// Pass/fail tolerance (relative). Defaults: 0.07 composite-fit,
    /// 0.15 meanfield.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Roughness exponent for the finite-size correction form.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Growth-fit window lower bound (steps).
    #[arg(long)]
    t_min: Option<u64>,
    /// Growth-fit window upper bound (steps).
    #[arg(long)]
    t_max: Option<u64>,
    /// Rational degrees as K_n,K_d (e.g. 2,1).
    #[arg(long)]
    degrees: Option<String>,
    /// Also write the machine-readable report here.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ParamsArgs {
    /// Print the published constants table.
    #[arg(long)]
    show: bool,
    /// Refit constants from a CSV of extrapolated utilizations
    /// (mode,n_v,delta,u_inf,stderr).
    #[arg(long)]
    refit: Option<PathBuf>,
    /// Where to write the refitted table (default: stdout).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("sth: failed to configure thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sth: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(command: Command) -> sth_cli::Result<()> {
    match command {
        Command::Run(args) => {
            let text = std::fs::read_to_string(&args.spec)
                .map_err(CliError::io(args.spec.display().to_string()))?;
            let mut spec = ExperimentSpec::parse(&text, &args.spec.display().to_string())?;
            if args.force {
                spec.allow_budget_excess = true;
            }
            let started = std::time::Instant::now();
            let archive = run_experiment(&spec)?;
            let output = args.output.unwrap_or_else(|| {
                let stem = args
                    .spec
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "experiment".into());
                args.spec.with_file_name(format!("{stem}.archive.json"))
            });
            archive.save(&output)?;
            eprintln!(
                "wrote {} ({} cells) in {:.1}s",
                output.display(),
                archive.cells.len(),
                started.elapsed().as_secs_f64()
            );
            Ok(())
        }
        Command::Emit(args) => {
            let archive = ResultArchive::load(&args.archive)?;
            let selection = Selection::parse(&args.select)?;
            let out_dir = args.out_dir.unwrap_or_else(|| {
                let stem = args
                    .archive
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "archive".into());
                args.archive.with_file_name(format!("{stem}.emit"))
            });
            let format = match args.format {
                FormatArg::Csv => EmitFormat::Csv,
                FormatArg::Json => EmitFormat::Json,
            };
            let written = emit(&archive, format, &selection, &out_dir)?;
            for path in written {
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::Analyze(args) => {
            let archive = ResultArchive::load(&args.archive)?;
            let task = match args.task {
                TaskArg::Exponents => AnalyzeTask::Exponents,
                TaskArg::Extrapolate => AnalyzeTask::Extrapolate,
                TaskArg::CompositeFit => AnalyzeTask::CompositeFit,
                TaskArg::Meanfield => AnalyzeTask::MeanField,
            };
            let window = match (args.t_min, args.t_max) {
                (Some(lo), Some(hi)) => Some((lo, hi)),
                (None, None) => None,
                _ => {
                    return Err(CliError::Precondition(
                        "--t-min and --t-max must be given together".into(),
                    ))
                }
            };
            let degrees = match args.degrees {
                None => None,
                Some(text) => {
                    let parts: Vec<&str> = text.split(',').collect();
                    let parsed = (parts.len() == 2)
                        .then(|| {
                            Some((
                                parts[0].trim().parse::<usize>().ok()?,
                                parts[1].trim().parse::<usize>().ok()?,
                            ))
                        })
                        .flatten();
                    Some(parsed.ok_or_else(|| {
                        CliError::Precondition(format!(
                            "--degrees expects K_n,K_d integers, got {text:?}"
                        ))
                    })?)
                }
            };
            let opts = AnalyzeOptions {
                tolerance: args.tolerance,
                alpha: args.alpha,
                window,
                degrees,
            };
            let report = analyze(&archive, task, &opts)?;
            print!("{}", report.human);
            if let Some(path) = args.json {
                let text = serde_json::to_string_pretty(&report.json)?;
                std::fs::write(&path, text + "\n")
                    .map_err(CliError::io(path.display().to_string()))?;
                eprintln!("wrote {}", path.display());
            }
            if report.passed == Some(false) {
                return Err(CliError::Core(sth_core::CoreError::FitFailed(format!(
                    "{} checks did not meet the configured tolerance",
                    report.task
                ))));
            }
            Ok(())
        }
        Command::Params(args) => {
            if args.show == args.refit.is_some() {
                return Err(CliError::Precondition(
                    "use exactly one of --show or --refit <data.csv>".into(),
                ));
            }
            if args.show {
                print!("{}", sth_cli::params::published_table_text());
                return Ok(());
            }
            let data = args.refit.expect("checked above");
            let (text, outcome) = sth_cli::params::refit_from_file(&data)?;
            match args.output {
                Some(path) => {
                    std::fs::write(&path, &text)
                        .map_err(CliError::io(path.display().to_string()))?;
                    eprintln!("wrote {}", path.display());
                }
                None => print!("{text}"),
            }
            if !outcome.converged {
                eprintln!("warning: refit hit the iteration cap; constants are best-so-far");
            }
            Ok(())
        }
    }
}
