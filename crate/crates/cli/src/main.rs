use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use kimura::equilibrium::{boundary_equilibrium_mass, equilibrium_coefficients};
use kimura::integrator::convergence_study;
use kimura::wright_fisher::{absorption_probabilities, sample_path, WFModel};
use kimura_cli::config::{RunConfig, Settings};
use kimura_cli::output::format_float;
use kimura_cli::run::execute_run;
use kimura_cli::suite::{run_suite, Profile};
use kimura_cli::{CliError, CliResult, OUTPUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "kimura", version, about = "Regularized Kimura equation solver with dynamic boundary masses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write CSV and SVG output.
    Run(Box<RunArgs>),
    /// Run the experiment suite and check every acceptance criterion.
    Suite(SuiteArgs),
    /// Print the closed-form equilibrium for given epsilon and delta.
    Equilibrium(EquilibriumArgs),
    /// Wright-Fisher chain queries.
    Wf {
        #[command(subcommand)]
        query: WfQuery,
    },
    /// Temporal and spatial order of accuracy.
    Converge(ConvergeArgs),
}

#[derive(Args)]
struct OutputArgs {
    /// Output directory.
    #[arg(long, env = OUTPUT_DIR_ENV, default_value = "out")]
    output_dir: PathBuf,
    /// Omit the `# generated-at` line so output is byte-reproducible.
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Args)]
struct RunArgs {
    /// key=value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    /// Number of cells N.
    #[arg(long)]
    cells: Option<String>,
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    t_final: Option<String>,
    #[arg(long)]
    output_every: Option<String>,
    /// Backward Euler substeps replacing the first step (0 = plain Crank-Nicolson).
    #[arg(long)]
    damped_start: Option<String>,
    /// uniform, step, gaussian or boundary-mass.
    #[arg(long)]
    ic: Option<String>,
    #[arg(long)]
    left: Option<String>,
    #[arg(long)]
    right: Option<String>,
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    x0: Option<String>,
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    bulk: Option<String>,
    #[arg(long)]
    a0: Option<String>,
    #[arg(long)]
    b0: Option<String>,
    /// Comma-separated snapshot times.
    #[arg(long)]
    snapshots: Option<String>,
    #[command(flatten)]
    output: OutputArgs,
}

impl RunArgs {
    fn overrides(&self) -> Vec<(String, String)> {
        let flags = [
            ("delta", &self.delta),
            ("epsilon", &self.epsilon),
            ("cells", &self.cells),
            ("tau", &self.tau),
            ("t_final", &self.t_final),
            ("output_every", &self.output_every),
            ("damped_start", &self.damped_start),
            ("ic", &self.ic),
            ("left", &self.left),
            ("right", &self.right),
            ("split", &self.split),
            ("x0", &self.x0),
            ("sigma", &self.sigma),
            ("bulk", &self.bulk),
            ("a0", &self.a0),
            ("b0", &self.b0),
            ("snapshots", &self.snapshots),
        ];
        flags.iter().filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))).collect()
    }
}

const SUITE_KEYS: &[&str] = &["profile", "cells", "tau", "damped_start", "output_every"];

#[derive(Args)]
struct SuiteArgs {
    /// Paper scale (N = 10^4, tau = 1e-4) instead of the desk profile.
    #[arg(long)]
    full: bool,
    /// key=value file overriding profile, cells, tau, damped_start or output_every.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct EquilibriumArgs {
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    delta: f64,
    /// Boundary masses; defaults to the symmetric equilibrium.
    #[arg(long, requires = "b")]
    a: Option<f64>,
    #[arg(long, requires = "a")]
    b: Option<f64>,
}

#[derive(Subcommand)]
enum WfQuery {
    /// One row of the transition matrix.
    Row {
        #[arg(long)]
        two_n: usize,
        #[arg(long)]
        i: usize,
        #[arg(long, default_value_t = 0.0)]
        u: f64,
        #[arg(long, default_value_t = 0.0)]
        v: f64,
    },
    /// Fixation probability from every start state (pure drift).
    Absorption {
        #[arg(long)]
        two_n: usize,
    },
    /// A seeded sample path.
    Sample {
        #[arg(long)]
        two_n: usize,
        #[arg(long)]
        i0: usize,
        #[arg(long)]
        generations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        u: f64,
        #[arg(long, default_value_t = 0.0)]
        v: f64,
    },
}

#[derive(Args)]
struct ConvergeArgs {
    #[arg(long, default_value_t = 1e-4)]
    delta: f64,
    #[arg(long, default_value_t = 1e-4)]
    epsilon: f64,
    #[arg(long, default_value_t = 2000)]
    cells: usize,
    #[arg(long, default_value_t = 0.4)]
    x0: f64,
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [4e-3, 2e-3, 1e-3])]
    taus: Vec<f64>,
    #[arg(long, default_value_t = 1.25e-4)]
    tau_ref: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [250, 500, 1000])]
    levels: Vec<usize>,
    #[arg(long, default_value_t = 4000)]
    n_ref: usize,
    #[arg(long, default_value_t = 1.0)]
    t_probe: f64,
}

fn timestamp(args: &OutputArgs) -> Option<String> {
    if args.no_timestamp {
        return None;
    }
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    Some(format!("unix:{secs}"))
}

fn suite_profile(args: &SuiteArgs) -> CliResult<(Profile, kimura_cli::suite::ProfileSettings)> {
    let mut settings = Settings::new(SUITE_KEYS);
    if let Some(path) = &args.config {
        settings.load_file(path)?;
    }
    let profile = match (args.full, settings.get("profile")) {
        (true, _) | (false, Some("full")) => Profile::Full,
        (false, None | Some("desk")) => Profile::Desk,
        (false, Some(other)) => return Err(CliError::Config(format!("unknown profile `{other}`"))),
    };
    let mut s = profile.settings();
    s.cells = settings.parse("cells")?.unwrap_or(s.cells);
    s.tau = settings.parse("tau")?.unwrap_or(s.tau);
    s.damped_start = settings.parse("damped_start")?.unwrap_or(s.damped_start);
    s.output_every = settings.parse("output_every")?.unwrap_or(s.output_every);
    if s.cells < 2 || s.tau.is_nan() || s.tau <= 0.0 || s.output_every == 0 {
        return Err(CliError::Config("suite needs cells >= 2, tau > 0 and output_every >= 1".into()));
    }
    Ok((profile, s))
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run(args) => {
            let config = RunConfig::load(args.config.as_deref(), &args.overrides())?;
            let traj = execute_run(&config, &args.output.output_dir, timestamp(&args.output).as_deref())?;
            let last = traj.last().expect("at least the initial record");
            println!(
                "t={} a={} b={} mass={} -> {}",
                format_float(last.time),
                format_float(last.a),
                format_float(last.b),
                format_float(last.mass),
                args.output.output_dir.display()
            );
        }
        Command::Suite(args) => {
            let (profile, settings) = suite_profile(&args)?;
            let suite = run_suite(profile, settings)?;
            suite.write(&args.output.output_dir, timestamp(&args.output).as_deref())?;
            for c in &suite.criteria {
                println!("{}", c.line());
            }
            let failures = suite.failures();
            if !failures.is_empty() {
                return Err(CliError::CriteriaFailed(failures));
            }
        }
        Command::Equilibrium(args) => {
            let mass = boundary_equilibrium_mass(args.epsilon, args.delta)?;
            let (a, b) = match (args.a, args.b) {
                (Some(a), Some(b)) => (a, b),
                _ => (mass / 2.0, mass / 2.0),
            };
            let (slope, intercept) = equilibrium_coefficients(a, b, args.epsilon, args.delta)?;
            println!("a_inf={}", format_float(a));
            println!("b_inf={}", format_float(b));
            println!("A={}", format_float(slope));
            println!("B={}", format_float(intercept));
            println!("boundary_mass={}", format_float(mass));
            println!("rho_inf(x)=(A*x+B)/(x*(1-x))");
        }
        Command::Wf { query } => match query {
            WfQuery::Row { two_n, i, u, v } => {
                let row = WFModel::new(two_n, u, v)?.transition_row(i)?;
                println!("{}", row.iter().map(|p| format_float(*p)).collect::<Vec<_>>().join(","));
            }
            WfQuery::Absorption { two_n } => {
                let h = absorption_probabilities(&WFModel::pure_drift(two_n)?)?;
                println!("{}", h.iter().map(|p| format_float(*p)).collect::<Vec<_>>().join(","));
            }
            WfQuery::Sample { two_n, i0, generations, seed, u, v } => {
                let path = sample_path(&WFModel::new(two_n, u, v)?, i0, generations, seed)?;
                println!("{}", path.iter().map(usize::to_string).collect::<Vec<_>>().join(","));
            }
        },
        Command::Converge(args) => {
            let problem = kimura::integrator::Problem::new(
                args.delta,
                args.cells,
                args.epsilon,
                kimura::InitialCondition::Gaussian { x0: args.x0, sigma: args.sigma },
            )?;
            let study = convergence_study(&problem, &args.taus, args.tau_ref, &args.levels, args.n_ref, args.t_probe)?;
            println!("axis,level,error,order");
            for (axis, est) in [("tau", &study.temporal), ("h", &study.spatial)] {
                for (k, (level, err)) in est.levels.iter().zip(&est.errors).enumerate() {
                    let order = if k == 0 { String::new() } else { format_float(est.pairwise_orders[k - 1]) };
                    println!("{axis},{},{},{order}", format_float(*level), format_float(*err));
                }
            }
            println!("# temporal fitted order {:.4}", study.temporal.fitted_order);
            println!("# spatial fitted order {:.4}", study.spatial.fitted_order);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // clap would exit with 2 on bad arguments, which is the divergence code here
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
