//! Command-line front end: `parcorr test | simulate | calibrate`.
//!
//! Exit codes: 0 on success, 1 on usage or configuration errors, 2 on data
//! errors (unreadable/invalid input, degenerate numerics).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use parcorr::engine::{DegeneratePolicy, ProjectionMode, TestConfig};
use parcorr::io;
use parcorr::simulate::{
    gen_scenario, monte_carlo, scenario_engine_config, DataGen, NullGenConfig, NullGenerator,
    Scenario, ScenarioConfig,
};
use parcorr::{run_test, RhoMeasure, TestReport};

#[derive(Parser)]
#[command(
    name = "parcorr",
    version,
    about = "Partial-correlation tests for repeatedly observed timeseries"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the test on a dataset described by a manifest
    Test(TestArgs),
    /// Generate a synthetic scenario, run the test on it, and write a report
    Simulate(SimulateArgs),
    /// Monte Carlo calibration: rejection rates over many replicates
    Calibrate(CalibrateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum RhoArg {
    Pearson,
    Linreg,
    Ridge,
}

#[derive(Args)]
struct TestArgs {
    /// Manifest JSON describing the experiments
    #[arg(long)]
    manifest: PathBuf,
    /// Association measure
    #[arg(long, value_enum)]
    rho: RhoArg,
    /// Ridge penalty (used with --rho ridge)
    #[arg(long, default_value_t = 1.0)]
    ridge_lambda: f64,
    /// Do not add intercept columns in projection or regression
    #[arg(long)]
    no_intercept: bool,
    /// Project only the experiment's own confounder (the invalid variant,
    /// for demonstration)
    #[arg(long)]
    invalid_variant: bool,
    /// Substitute rho = 0 for degenerate pairs instead of aborting
    #[arg(long)]
    degenerate_rho_zero: bool,
    /// Significance level used for the printed verdict
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Output report path (JSON)
    #[arg(long)]
    out: PathBuf,
    /// Also emit plot data CSVs into this directory
    #[arg(long)]
    plot_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Fig1,
    Fig2,
    Fig3,
}

impl From<ScenarioArg> for Scenario {
    fn from(value: ScenarioArg) -> Self {
        match value {
            ScenarioArg::Fig1 => Scenario::Fig1,
            ScenarioArg::Fig2 => Scenario::Fig2,
            ScenarioArg::Fig3 => Scenario::Fig3,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario to generate (fig3 = fig2 data run with the invalid variant)
    #[arg(long, value_enum)]
    scenario: ScenarioArg,
    /// Number of experiments
    #[arg(long, default_value_t = 10)]
    n: usize,
    /// Timepoints per experiment
    #[arg(long, default_value_t = 100)]
    t: usize,
    /// Pulse width in timepoints
    #[arg(long, default_value_t = 5)]
    pulse_width: usize,
    /// Gaussian noise sd added independently to x and y
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// RNG seed
    #[arg(long)]
    seed: u64,
    /// Output report path (JSON)
    #[arg(long)]
    out: PathBuf,
    /// Also emit plot data CSVs into this directory
    #[arg(long)]
    plot_dir: Option<PathBuf>,
    /// Also dump the generated dataset (CSVs + manifest) into this directory
    #[arg(long)]
    dump_data: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GeneratorArg {
    Ar1,
    Randomwalk,
    Fig1,
    Fig2,
    /// fig2 data evaluated with the invalid single-projection variant
    Fig3,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Data generator for the replicates
    #[arg(long, value_enum)]
    generator: GeneratorArg,
    /// Number of Monte Carlo replicates
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    /// Significance level
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// AR(1) coefficient (ar1 generator)
    #[arg(long, default_value_t = 0.9)]
    ar_coeff: f64,
    /// Coupling between x and the confounder (null generators)
    #[arg(long, default_value_t = 0.7)]
    coupling: f64,
    /// Noise sd for the fig1/fig2/fig3 generators
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    /// RNG master seed; replicate r uses seed + r
    #[arg(long)]
    seed: u64,
    /// Output path for the calibration summary (JSON)
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are not errors.
            use clap::error::ErrorKind;
            let kind = e.kind();
            let _ = e.print();
            return if matches!(kind, ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };

    let result = match cli.command {
        Command::Test(args) => cmd_test(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Calibrate(args) => cmd_calibrate(args),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn measure_from_args(rho: RhoArg, ridge_lambda: f64, add_intercept: bool) -> RhoMeasure {
    let mut measure = match rho {
        RhoArg::Pearson => RhoMeasure::pearson(),
        RhoArg::Linreg => RhoMeasure::linreg(),
        RhoArg::Ridge => RhoMeasure::ridge(ridge_lambda),
    };
    measure.add_intercept = add_intercept;
    measure
}

fn print_summary(report: &TestReport, alpha: f64) {
    println!(
        "n = {}, t_len = {}, mode = {}",
        report.n,
        report.t_len,
        match report.mode {
            ProjectionMode::ValidJoint => "valid_joint",
            ProjectionMode::InvalidSingle => "invalid_single",
        }
    );
    println!(
        "mean G = {:.6}, t = {:.4} (df = {}), p = {:.6}",
        report.g.iter().sum::<f64>() / report.g.len() as f64,
        report.t_stat,
        report.df,
        report.p_value
    );
    println!(
        "reject H0 at alpha = {}: {}",
        alpha,
        if report.p_value < alpha { "yes" } else { "no" }
    );
    for w in &report.warnings {
        println!("warning: {w}");
    }
}

fn cmd_test(args: TestArgs) -> parcorr::Result<()> {
    if args.ridge_lambda < 0.0 || !args.ridge_lambda.is_finite() {
        return Err(parcorr::Error::Config(
            "--ridge-lambda must be a finite nonnegative real".to_string(),
        ));
    }
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(parcorr::Error::Config(
            "--alpha must lie in (0, 1)".to_string(),
        ));
    }
    let dataset = io::load_manifest(&args.manifest)?;
    let cfg = TestConfig {
        measure: measure_from_args(args.rho, args.ridge_lambda, !args.no_intercept),
        mode: if args.invalid_variant {
            ProjectionMode::InvalidSingle
        } else {
            ProjectionMode::ValidJoint
        },
        project_intercept: !args.no_intercept,
        degenerate_policy: if args.degenerate_rho_zero {
            DegeneratePolicy::SubstituteZero
        } else {
            DegeneratePolicy::Abort
        },
        ..TestConfig::default()
    };
    let report = run_test(&dataset, &cfg)?;
    io::write_report(&report, &args.out)?;
    if let Some(dir) = &args.plot_dir {
        io::emit_plot_data(&dataset, &report, &cfg, dir)?;
    }
    print_summary(&report, args.alpha);
    println!("report written to {}", args.out.display());
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> parcorr::Result<()> {
    let scenario: Scenario = args.scenario.into();
    let scen_cfg = ScenarioConfig {
        scenario,
        n: args.n,
        t_len: args.t,
        pulse_width: args.pulse_width,
        noise_sd: args.noise,
        seed: args.seed,
    };
    let dataset = gen_scenario(&scen_cfg)?;
    let cfg = scenario_engine_config(scenario);
    let report = run_test(&dataset, &cfg)?;
    io::write_report(&report, &args.out)?;
    if let Some(dir) = &args.dump_data {
        io::dump_dataset(&dataset, dir)?;
    }
    if let Some(dir) = &args.plot_dir {
        io::emit_plot_data(&dataset, &report, &cfg, dir)?;
    }
    print_summary(&report, 0.05);
    println!("report written to {}", args.out.display());
    Ok(())
}

fn cmd_calibrate(args: CalibrateArgs) -> parcorr::Result<()> {
    // Null generators validate the engine exactly as `test` runs it; the
    // figure generators reproduce the scenarios with their own projector.
    let (datagen, engine_cfg) = match args.generator {
        GeneratorArg::Ar1 => (
            DataGen::Null(NullGenConfig {
                x_z_coupling: args.coupling,
                ..NullGenConfig::new(NullGenerator::Ar1 { ar_coeff: args.ar_coeff }, args.seed)
            }),
            TestConfig::default(),
        ),
        GeneratorArg::Randomwalk => (
            DataGen::Null(NullGenConfig {
                x_z_coupling: args.coupling,
                ..NullGenConfig::new(NullGenerator::RandomWalk, args.seed)
            }),
            TestConfig::default(),
        ),
        GeneratorArg::Fig1 | GeneratorArg::Fig2 | GeneratorArg::Fig3 => {
            let scenario = match args.generator {
                GeneratorArg::Fig1 => Scenario::Fig1,
                GeneratorArg::Fig2 => Scenario::Fig2,
                _ => Scenario::Fig3,
            };
            (
                DataGen::Scenario(ScenarioConfig {
                    noise_sd: args.noise,
                    ..ScenarioConfig::new(scenario, args.seed)
                }),
                scenario_engine_config(scenario),
            )
        }
    };

    let result = monte_carlo(&datagen, &engine_cfg, args.reps, args.alpha)?;
    io::write_calibration(&result, &datagen, engine_cfg.mode, &args.out)?;

    println!(
        "reps = {}, alpha = {}: rejection rate = {:.4}, naive pearson baseline = {:.4}",
        result.reps, result.alpha, result.rejection_rate, result.naive_rejection_rate
    );
    println!(
        "mean G over reps: mean = {:.6}, sd = {:.6}, negative in {:.1}% of reps",
        result.mean_g.mean,
        result.mean_g.sd,
        100.0 * result.mean_g.frac_negative
    );
    println!("calibration written to {}", args.out.display());
    Ok(())
}
