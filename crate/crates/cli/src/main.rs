//! `rasim`: experiments, single-user analysis and acceptance checks.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use rasim_core::channel::{linear_to_db, GainPattern};
use rasim_core::geometry::{user_position, ArrayConfig, UserPlacement};
use rasim_core::harness::{default_parameters, run_experiment, ExperimentId, ExperimentSpec, RunConfig};
use rasim_core::quadrature::QuadConfig;
use rasim_core::single_user::{
    aperture_integral, lemma1_snr, lemma2_snr, optimal_pointing_snr, theorem2_bounds, UlaAnalysisInput, UpaBoundsInput,
};
use rasim_core::validation::{run_criterion, CRITERIA};
use rasim_core::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const LONG_TRIALS: usize = 500;

#[derive(Parser)]
#[command(name = "rasim", version, about = "Rotatable-antenna uplink simulator")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep experiment and write its CSV.
    Run(RunArgs),
    /// Single-user SNR of one array: exact sum, aperture quadrature and closed forms.
    Single(SingleArgs),
    /// Run the acceptance checks and print one line per criterion.
    Validate(ValidateArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// ula_sweep, upa_directivity, azimuth_sweep, convergence, power_sweep,
    /// theta_max_sweep or multiuser_directivity.
    experiment: String,
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    /// Base seed of the per-trial seed sequence.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated scheme list.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
    /// 500 trials per sweep point unless --trials is given.
    #[arg(long)]
    long: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ArrayKind {
    Ula,
    Upa,
}

#[derive(clap::Args)]
struct SingleArgs {
    #[arg(value_enum)]
    array: ArrayKind,
    #[arg(long)]
    nx: usize,
    /// Rows of a planar array; defaults to --nx.
    #[arg(long)]
    ny: Option<usize>,
    /// Rotation range in degrees.
    #[arg(long, default_value_t = 30.0)]
    theta_max: f64,
    /// Directivity exponent of the gain pattern.
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    /// User azimuth in the x-z plane, degrees from broadside.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    phi: f64,
    /// User distance in metres.
    #[arg(long, default_value_t = 15.0)]
    range: f64,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ValidateArgs {
    /// Run only these criteria (repeatable).
    #[arg(long = "criterion")]
    criteria: Vec<usize>,
}

/// Outcome of a subcommand that ran to completion but did not succeed.
struct Failed;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Run(a) => run(a).map(|_| None),
        Command::Single(a) => single(a).map(|_| None),
        Command::Validate(a) => validate(a).map(|ok| (!ok).then_some(Failed)),
    };
    match result {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(Failed)) => ExitCode::from(EXIT_NUMERICAL),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(core) if core.is_config() => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

fn run(a: RunArgs) -> anyhow::Result<()> {
    let id: ExperimentId = a.experiment.parse()?;
    let mut cfg = match &a.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(t) = a.trials {
        cfg.experiment.trials = Some(t);
    } else if a.long {
        cfg.experiment.trials = Some(LONG_TRIALS);
    }
    if let Some(s) = a.seed {
        cfg.experiment.base_seed = Some(s);
    }
    if let Some(s) = a.schemes {
        cfg.experiment.schemes = Some(s);
    }
    cfg.validate()?;
    let mut spec = ExperimentSpec::from_config(id, &cfg)?;
    spec.output = a.out.clone();
    info!("running {id}: {} trials, base seed {}", spec.trials, spec.base_seed);
    let out = run_experiment(&spec)?;
    if a.out.is_none() {
        let mut w = csv::Writer::from_writer(std::io::stdout().lock());
        w.write_record(&out.header)?;
        for row in &out.rows {
            w.write_record(row)?;
        }
        w.flush()?;
    }
    info!("{} rows", out.rows.len());
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.12e}")).unwrap_or_default()
}

fn single(a: SingleArgs) -> anyhow::Result<()> {
    let ny = match (a.array, a.ny) {
        (ArrayKind::Ula, None | Some(1)) => 1,
        (ArrayKind::Ula, Some(_)) => return Err(Error::Config("a linear array has --ny 1".into()).into()),
        (ArrayKind::Upa, ny) => ny.unwrap_or(a.nx),
    };
    if !(0.0..=90.0).contains(&a.theta_max) {
        return Err(Error::Config("--theta-max must lie in [0, 90] degrees".into()).into());
    }
    if a.phi.is_nan() || a.phi.abs() >= 90.0 {
        return Err(Error::Config("--phi must lie strictly inside (-90, 90) degrees".into()).into());
    }
    let params = default_parameters();
    let cfg = ArrayConfig::new(a.nx, ny, params.spacing(), params.element_area(), params.wavelength_m)?;
    let pattern = GainPattern::new(a.p)?;
    let phi = a.phi.to_radians();
    let user = user_position(&UserPlacement::new(a.range, FRAC_PI_2, phi)?);
    let snr = params.snr_scale();
    let xi = params.occupation_ratio();
    let delta = params.spacing() / a.range;
    let quad = QuadConfig::with_rel_tol(1e-8);

    let mut w = csv::Writer::from_writer(match &a.out {
        Some(path) => Box::new(
            std::fs::File::create(path)
                .map_err(Error::from)
                .with_context(|| format!("cannot create {}", path.display()))?,
        ) as Box<dyn Write>,
        None => Box::new(std::io::stdout().lock()),
    });
    w.write_record([
        "orientation",
        "array",
        "n_x",
        "n_y",
        "range_m",
        "phi_deg",
        "theta_max_deg",
        "p",
        "exact_sum_snr",
        "exact_sum_db",
        "quadrature_snr",
        "closed_form_snr",
        "lower_bound_snr",
        "upper_bound_snr",
    ])?;
    for (label, theta_deg) in [("rotatable", a.theta_max), ("fixed", 0.0)] {
        let theta = theta_deg.to_radians();
        let exact = optimal_pointing_snr(&cfg, &user, &pattern, theta, snr)?;
        let quadrature = aperture_integral(&cfg, &user, &pattern, theta, snr, &quad)?;
        let (closed, bounds) = match a.array {
            ArrayKind::Ula if a.p == 0.5 => {
                let input = UlaAnalysisInput::new(a.nx, delta, theta, snr, xi);
                (Some(lemma1_snr(&input, phi)?), None)
            }
            ArrayKind::Ula => (None, None),
            // The planar closed forms assume an on-axis user.
            ArrayKind::Upa if phi == 0.0 => {
                let input = UpaBoundsInput {
                    n_x: a.nx,
                    n_y: ny,
                    spacing: params.spacing(),
                    range_r: a.range,
                    directivity_p: a.p,
                    theta_max: theta,
                    snr_scale: snr,
                    occupation_xi: xi,
                };
                let closed = if a.p == 0.5 {
                    match lemma2_snr(&input) {
                        Ok(v) => Some(v),
                        Err(Error::Precondition(_)) => None,
                        Err(e) => return Err(e.into()),
                    }
                } else {
                    None
                };
                (closed, Some(theorem2_bounds(&input, &quad)?))
            }
            ArrayKind::Upa => (None, None),
        };
        w.write_record([
            label.to_string(),
            match a.array {
                ArrayKind::Ula => "ula",
                ArrayKind::Upa => "upa",
            }
            .to_string(),
            a.nx.to_string(),
            ny.to_string(),
            a.range.to_string(),
            a.phi.to_string(),
            theta_deg.to_string(),
            a.p.to_string(),
            fmt_opt(Some(exact)),
            fmt_opt(Some(linear_to_db(exact))),
            fmt_opt(Some(quadrature)),
            fmt_opt(closed),
            fmt_opt(bounds.map(|b| b.0)),
            fmt_opt(bounds.map(|b| b.1)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Returns whether every selected criterion passed.
fn validate(a: ValidateArgs) -> anyhow::Result<bool> {
    let ids: Vec<usize> = if a.criteria.is_empty() {
        CRITERIA.iter().map(|(id, _)| *id).collect()
    } else {
        a.criteria
    };
    let mut out = std::io::stdout().lock();
    let mut failed = 0;
    for id in &ids {
        let r = run_criterion(*id).ok_or_else(|| Error::Config(format!("no criterion {id}")))?;
        writeln!(out, "{r}")?;
        out.flush()?;
        if !r.passed {
            failed += 1;
        }
    }
    writeln!(out, "{} passed, {failed} failed", ids.len() - failed)?;
    Ok(failed == 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_kind() {
        assert_eq!(exit_code(&Error::Config("x".into()).into()), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::InvalidParameter("x".into()).into()), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::Solver("x".into()).into()), EXIT_NUMERICAL);
        let wrapped = anyhow::Error::from(Error::Config("x".into())).context("loading");
        assert_eq!(exit_code(&wrapped), EXIT_CONFIG);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
