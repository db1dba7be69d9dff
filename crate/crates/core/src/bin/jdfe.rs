//! Command-line simulator: validate configs, run single trials, sweep SNRs,
//! inspect delay patterns.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use jdfe_core::error::Error;
use jdfe_core::harness::{
    export_spectra, export_sweep_csv, export_trial_csv, monte_carlo_rmse, run_scenario,
    RunOptions, Tolerances,
};
use jdfe_core::scenario::{
    check_rate_condition, difference_coarray, validate_pattern, DelayPattern, EstimatorMode,
    Scenario,
};
use jdfe_core::synth::SynthesisMode;

#[derive(Parser)]
#[command(
    name = "jdfe",
    about = "Joint frequency/DOA estimation for multiband signals under multi-coset sub-Nyquist sampling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Plain,
    Etm,
}

impl From<ModeArg> for EstimatorMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Plain => EstimatorMode::Plain,
            ModeArg::Etm => EstimatorMode::Etm,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthArg {
    PhaseModel,
    ExactDelay,
}

impl From<SynthArg> for SynthesisMode {
    fn from(s: SynthArg) -> Self {
        match s {
            SynthArg::PhaseModel => SynthesisMode::PhaseModel,
            SynthArg::ExactDelay => SynthesisMode::ExactDelay,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario config and print derived quantities.
    Validate { config: PathBuf },
    /// Run a single trial and print the paired estimates.
    Run {
        config: PathBuf,
        #[arg(long, value_enum, default_value = "etm")]
        mode: ModeArg,
        #[arg(long, value_enum, default_value = "phase-model")]
        synthesis: SynthArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for pseudo-spectrum CSV dumps.
        #[arg(long)]
        spectra_dir: Option<PathBuf>,
        /// Use the exact covariance instead of simulated snapshots.
        #[arg(long)]
        analytic: bool,
        /// Binary snapshot dump path.
        #[arg(long)]
        dump_snapshots: Option<PathBuf>,
        /// Trial CSV output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo RMSE sweep over SNR points.
    Sweep {
        config: PathBuf,
        /// SNR points in dB, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        snr: Vec<f64>,
        #[arg(long)]
        trials: usize,
        #[arg(long, value_enum, default_value = "etm")]
        mode: ModeArg,
        #[arg(long, value_enum, default_value = "phase-model")]
        synthesis: SynthArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the difference coarray and virtual aperture of a delay pattern.
    Pattern {
        /// Comma-separated delay coefficients, e.g. 0,1,4,6
        #[arg(value_delimiter = ',')]
        coeffs: Vec<u32>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Validate { config } => validate_cmd(&config),
        Command::Run {
            config,
            mode,
            synthesis,
            seed,
            spectra_dir,
            analytic,
            dump_snapshots,
            out,
        } => run_cmd(
            &config,
            mode.into(),
            synthesis.into(),
            seed,
            spectra_dir,
            analytic,
            dump_snapshots,
            out,
        ),
        Command::Sweep {
            config,
            snr,
            trials,
            mode,
            synthesis,
            seed,
            out,
        } => sweep_cmd(
            &config,
            &snr,
            trials,
            mode.into(),
            synthesis.into(),
            seed,
            &out,
        ),
        Command::Pattern { coeffs } => pattern_cmd(coeffs),
    }
}

fn validate_cmd(config: &PathBuf) -> Result<(), Error> {
    let scenario = Scenario::from_json_file(config)?;
    let report = scenario.validate()?;
    println!(
        "scenario ok: K = {}, M = {}, L = {}",
        scenario.k(),
        scenario.m(),
        scenario.l
    );
    println!(
        "f_nyq = {} Hz, f_sub = {} Hz, sigma2 = {}, N = {}",
        scenario.constants.f_nyq_hz,
        scenario.f_sub_hz(),
        scenario.sigma2,
        scenario.n_snapshots
    );
    match report.q {
        Some(q) => println!("delay pattern {:?}: Q = {q}", scenario.pattern.coeffs()),
        None => println!(
            "delay pattern {:?}: non-contiguous coarray (ETM unavailable)",
            scenario.pattern.coeffs()
        ),
    }
    for mode in [EstimatorMode::Plain, EstimatorMode::Etm] {
        let rc = check_rate_condition(&scenario, mode);
        println!(
            "{mode}: rate {} (margin {} Hz), dof {} (need >= {})",
            if rc.rate_ok { "ok" } else { "FAIL" },
            rc.margin_hz,
            rc.dof.map(|d| d.to_string()).unwrap_or_else(|| "-".into()),
            rc.k + 1
        );
    }
    for w in &report.warnings {
        println!("warning: {w}");
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_cmd(
    config: &PathBuf,
    mode: EstimatorMode,
    synthesis: SynthesisMode,
    seed: u64,
    spectra_dir: Option<PathBuf>,
    analytic: bool,
    dump_snapshots: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<(), Error> {
    let scenario = Scenario::from_json_file(config)?;
    let report = scenario.validate()?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let opts = RunOptions {
        mode,
        synthesis,
        analytic,
        seed,
        grids: None,
        tolerances: Tolerances::default(),
        dump_snapshots,
    };
    let (result, spectra) = run_scenario(&scenario, &opts)?;
    println!("mode {mode}, synthesis {synthesis}, seed {seed}, analytic {analytic}");
    println!("  k |        f_true |         f_hat | theta_true | theta_hat");
    for (i, (pair, truth)) in result.estimates.pairs.iter().zip(&result.truth).enumerate() {
        println!(
            "{:>3} | {:>13.4e} | {:>13.4e} | {:>10.2} | {:>9.2}",
            i + 1,
            truth.0,
            pair.f_hz,
            truth.1,
            pair.theta_deg
        );
    }
    println!(
        "rmse: {:.4e} Hz, {:.4} deg; success (|df| <= {:.1e} Hz, |dtheta| <= {} deg): {}",
        result.rmse_freq_hz(),
        result.rmse_doa_deg(),
        opts.tolerances.freq_frac_of_fnyq * scenario.constants.f_nyq_hz,
        opts.tolerances.doa_deg,
        result.success
    );
    if let Some(dir) = spectra_dir {
        export_spectra(&spectra, &dir)?;
        println!("spectra written to {}", dir.display());
    }
    if let Some(path) = out {
        export_trial_csv(&result, &path)?;
        println!("trial CSV written to {}", path.display());
    }
    Ok(())
}

fn sweep_cmd(
    config: &PathBuf,
    snr: &[f64],
    trials: usize,
    mode: EstimatorMode,
    synthesis: SynthesisMode,
    seed: u64,
    out: &PathBuf,
) -> Result<(), Error> {
    let scenario = Scenario::from_json_file(config)?;
    let opts = RunOptions {
        mode,
        synthesis,
        analytic: false,
        seed,
        grids: None,
        tolerances: Tolerances::default(),
        dump_snapshots: None,
    };
    let sweep = monte_carlo_rmse(&scenario, snr, trials, &opts, seed)?;
    for p in &sweep.points {
        println!(
            "snr {:>6.1} dB: rmse {:.4e} Hz / {:.4} deg, success {:.0}%, errored {}/{}",
            p.snr_db,
            p.rmse_freq_hz,
            p.rmse_doa_deg,
            p.success_rate * 100.0,
            p.n_errored,
            p.n_trials
        );
    }
    export_sweep_csv(&sweep, out)?;
    println!("sweep CSV written to {}", out.display());
    Ok(())
}

fn pattern_cmd(coeffs: Vec<u32>) -> Result<(), Error> {
    let pattern = DelayPattern::new(coeffs)?;
    let lags = difference_coarray(&pattern);
    println!("pattern {:?}, M = {}", pattern.coeffs(), pattern.m());
    println!("lag | multiplicity");
    for (lag, mult) in &lags {
        println!("{lag:>3} | {mult}");
    }
    let q = validate_pattern(&pattern)?;
    println!(
        "coarray contiguous, Q = {q} (up to {} sources with ETM)",
        q - 1
    );
    Ok(())
}
