use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gevrey_core::energy::{s_star, s_yuzawa};
use gevrey_core::par::{configure_threads, Execution};
use gevrey_core::runner::{
    run_dir, run_pipeline, run_thresholds, Format, PipelineError, RunManifest, RunOptions, Scenario, Stage,
    BUILTIN_NAMES, EXIT_CONFIG,
};

/// Weakly hyperbolic systems: reduction, regularized eigenvalues, energy
/// scaling and Gevrey decay on a frequency grid.
#[derive(Parser, Debug)]
#[command(name = "gevrey", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Output root; each run writes to <out>/<scenario>/<command>/.
    #[arg(long, global = true, env = "GEVREY_OUT", default_value = "gevrey-out")]
    out: PathBuf,
    /// Seed for random data phases (zero phases when unset).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Integrator relative tolerance; the absolute tolerance is 1e-3 times this.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, default_value = "csv", value_parser = ["csv", "json"])]
    format: String,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Block Sylvester reduction checks.
    Reduce { scenario: String },
    /// Eigenvalue field dump, Hölder/uniformity checks and regularized-root constants.
    Eigen { scenario: String },
    /// Energy quantities over the eps sweep, their scaling fits and the weight plans.
    EnergyScan { scenario: String },
    /// Integrate every grid frequency and check the weighted energy.
    Solve {
        scenario: String,
        /// Gevrey index of the weight (defaults to the scenario's first value).
        #[arg(long)]
        s: Option<f64>,
        /// Also write the V trajectories.
        #[arg(long)]
        trajectory: bool,
    },
    /// Fit the decay of |V(T)| for synthesized Gevrey data.
    GevreyFit {
        scenario: String,
        #[arg(long)]
        s0: Option<f64>,
        #[arg(long)]
        delta0: Option<f64>,
    },
    /// Compare the new threshold with the Yuzawa index.
    Thresholds {
        #[arg(long, value_delimiter = ',', default_values_t = default_alphas())]
        alphas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1, 2, 3, 4, 5])]
        ms: Vec<usize>,
    },
    /// Builtin scenarios.
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
}

#[derive(Subcommand, Debug)]
enum ScenarioAction {
    /// List builtin scenario names.
    List,
    /// Print a scenario in canonical TOML form.
    Show { scenario: String },
}

fn default_alphas() -> Vec<f64> {
    (1..=20).map(|k| k as f64 / 20.0).collect()
}

fn load(name: &str, global: &Global) -> Result<Scenario, PipelineError> {
    let mut sc = Scenario::load(name)?;
    if let Some(seed) = global.seed {
        sc.data.seed = Some(seed);
    }
    if let Some(tol) = global.tol {
        sc.checks.rtol = tol;
        sc.checks.atol = tol * 1e-3;
    }
    Ok(sc)
}

fn report(manifest: &RunManifest, dir: &std::path::Path) {
    println!("{} {} -> {}", manifest.command, manifest.scenario, dir.display());
    for st in &manifest.stages {
        let status = if st.pass { "pass" } else { "FAIL" };
        match &st.error {
            Some(e) => println!("  {:<12} {status}  {:.2}s  {e}", st.name, st.seconds),
            None => println!("  {:<12} {status}  {:.2}s", st.name, st.seconds),
        }
    }
    println!("exit code {}", manifest.exit_code);
}

fn run(cli: Cli) -> Result<i32, PipelineError> {
    let g = &cli.global;
    let format: Format = g.format.parse().expect("clap restricts the values");
    let exec = match g.jobs {
        Some(1) => Execution::Sequential,
        Some(n) => {
            configure_threads(n);
            Execution::Parallel
        }
        None => Execution::Parallel,
    };
    let mut opts = RunOptions { out_root: g.out.clone(), format, exec, trajectory: false };

    let (sc, stage) = match &cli.command {
        Command::Scenario { action: ScenarioAction::List } => {
            for name in BUILTIN_NAMES {
                match Scenario::builtin(name) {
                    Some(sc) => {
                        let (a, m) = (sc.system.alpha, sc.system.m);
                        println!("{name:<20} m={m} n={} alpha={a} s*={} yuzawa={}", sc.system.n, s_star(a, m), s_yuzawa(a, m));
                    }
                    None => println!("{name:<20} A = [[0,1],[abs(t)^(2 alpha),0]] xi, alpha in (0, 1]"),
                }
            }
            return Ok(0);
        }
        Command::Scenario { action: ScenarioAction::Show { scenario } } => {
            print!("{}", load(scenario, g)?.to_toml());
            return Ok(0);
        }
        Command::Thresholds { alphas, ms } => {
            let manifest = run_thresholds(alphas, ms, &opts)?;
            report(&manifest, &opts.out_root.join("thresholds"));
            return Ok(manifest.exit_code);
        }
        Command::Reduce { scenario } => (load(scenario, g)?, Stage::Reduce),
        Command::Eigen { scenario } => (load(scenario, g)?, Stage::Eigen),
        Command::EnergyScan { scenario } => (load(scenario, g)?, Stage::EnergyScan),
        Command::Solve { scenario, s, trajectory } => {
            let mut sc = load(scenario, g)?;
            if let Some(s) = s {
                sc.s_values = vec![*s];
            }
            opts.trajectory = *trajectory;
            (sc, Stage::Solve)
        }
        Command::GevreyFit { scenario, s0, delta0 } => {
            let mut sc = load(scenario, g)?;
            if let Some(v) = s0 {
                sc.data.s0 = *v;
            }
            if let Some(v) = delta0 {
                sc.data.delta0 = *v;
            }
            (sc, Stage::GevreyFit)
        }
    };
    let manifest = run_pipeline(&sc, stage, &opts)?;
    report(&manifest, &run_dir(&opts.out_root, &sc, stage));
    Ok(manifest.exit_code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code().max(EXIT_CONFIG) as u8)
        }
    }
}
