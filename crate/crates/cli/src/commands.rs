//! One function per subcommand.

use magflow::examples::{self, BumpIntensity, BurnsProfile};
use magflow::flow;
use magflow::geom::UnitTangent;
use magflow::hyperbolic::{self, closed_orbit_length_formula};
use magflow::stability;
use serde::Serialize;

use crate::config::{self, CertTarget, ConfigFile, SCHEMA};
use crate::{setup, CliError, Command, Out};

/// The configuration actually run: only the section of `cmd`, defaults
/// filled in and the seed resolved.
pub fn effective(cmd: Command, file: ConfigFile, seed: u64) -> ConfigFile {
    let mut e = ConfigFile {
        schema: SCHEMA,
        seed: Some(seed),
        ..ConfigFile::default()
    };
    match cmd {
        Command::Simulate => e.simulate = Some(file.simulate.unwrap_or_default()),
        Command::MlsScaling => e.mls_scaling = Some(file.mls_scaling.unwrap_or_default()),
        Command::PslConjugacy => e.psl_conjugacy = Some(file.psl_conjugacy.unwrap_or_default()),
        Command::BurnsBuild => e.burns_build = Some(file.burns_build.unwrap_or_default()),
        Command::AnosovCert => {
            let mut c = file.anosov_cert.unwrap_or_default();
            c.certificate.seed = seed;
            e.anosov_cert = Some(c);
        }
        Command::MagneticLength => e.magnetic_length = Some(file.magnetic_length.unwrap_or_default()),
    }
    e
}

pub fn run(cmd: Command, cfg: &ConfigFile, seed: u64, out: &mut Out) -> Result<(), CliError> {
    match cmd {
        Command::Simulate => simulate(cfg.simulate.as_ref().expect("filled"), out),
        Command::MlsScaling => mls_scaling(cfg.mls_scaling.as_ref().expect("filled"), out),
        Command::PslConjugacy => psl_conjugacy(cfg.psl_conjugacy.as_ref().expect("filled"), seed, out),
        Command::BurnsBuild => burns_build(cfg.burns_build.as_ref().expect("filled"), out).map(|_| ()),
        Command::AnosovCert => anosov_cert(cfg.anosov_cert.as_ref().expect("filled"), out),
        Command::MagneticLength => magnetic_length(cfg.magnetic_length.as_ref().expect("filled"), seed, out),
    }
}

#[derive(Serialize)]
struct SimulateSummary {
    start: UnitTangent,
    end: UnitTangent,
    duration: f64,
    exit_time: Option<f64>,
    accepted_steps: usize,
    rejected_steps: usize,
    curvature_residual: f64,
}

fn simulate(c: &config::Simulate, out: &mut Out) -> Result<(), CliError> {
    let system = c.system.build().map_err(setup)?;
    c.flow.validate().map_err(setup)?;
    if !(c.dt > 0.0) {
        return Err(CliError::Config(format!("dt must be positive, got {}", c.dt)));
    }
    let start = UnitTangent::new(c.start[0], c.start[1], c.start[2]);
    if !system.chart.contains(start.point) {
        return Err(CliError::Config(format!("start {:?} outside the chart", c.start)));
    }
    let traj = flow::integrate(&system, start, &c.flow)?;
    let mut csv = Vec::new();
    flow::write_csv(&system, &traj, c.dt, &mut csv)?;
    out.write("trajectory.csv", &csv)?;
    out.json(
        "simulate.json",
        &SimulateSummary {
            start,
            end: traj.end(),
            duration: traj.duration(),
            exit_time: traj.exit_time,
            accepted_steps: traj.stats.accepted,
            rejected_steps: traj.stats.rejected,
            curvature_residual: flow::geodesic_curvature_residual(&system, &traj),
        },
    )?;
    Ok(())
}

fn mls_scaling(c: &config::MlsScaling, out: &mut Out) -> Result<(), CliError> {
    for &ell in &c.ells {
        for &b in &c.bs {
            closed_orbit_length_formula(ell, b).map_err(setup)?;
        }
    }
    let rows = hyperbolic::mls_scaling_table(&c.ells, &c.bs);
    let mut csv = Vec::new();
    hyperbolic::write_mls_csv(&rows, &mut csv)?;
    out.write("mls_scaling.csv", &csv)?;
    let failed: Vec<String> = rows
        .iter()
        .filter(|r| !r.converged)
        .map(|r| format!("(ℓ = {}, b = {})", r.ell, r.b))
        .collect();
    if !failed.is_empty() {
        return Err(CliError::Numeric(format!("shooting did not converge for {}", failed.join(", "))));
    }
    let worst = rows.iter().fold(0.0f64, |m, r| m.max(r.abs_err));
    if worst >= c.tolerance {
        return Err(CliError::Failed(format!(
            "max |period - formula| = {worst:e} exceeds {:e}",
            c.tolerance
        )));
    }
    println!("{} rows, max abs_err = {worst:e}", rows.len());
    Ok(())
}

fn psl_conjugacy(c: &config::PslConjugacy, seed: u64, out: &mut Out) -> Result<(), CliError> {
    let sweep = hyperbolic::psl_sweep(seed, c.draws, c.b_max, c.t_max).map_err(setup)?;
    out.json("psl_conjugacy.json", &sweep)?;
    println!(
        "{} draws, max residual = {:e}, c0 identity: {}",
        sweep.draws.len(),
        sweep.max_residual,
        sweep.c0_is_identity
    );
    if !(sweep.max_residual < c.tolerance) || !sweep.c0_is_identity {
        return Err(CliError::Failed(format!(
            "intertwining residual {:e} (tolerance {:e}), c0 identity: {}",
            sweep.max_residual, c.tolerance, sweep.c0_is_identity
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct BuildReport {
    passed: bool,
    clauses: Vec<examples::Clause>,
    minimal_bump_width: f64,
    exactness: Option<examples::Exactness>,
}

/// Validates and, when valid, returns the system; the report is written either way.
fn burns_build(c: &config::BurnsBuild, out: &mut Out) -> Result<examples::BurnsSystem, CliError> {
    let profile = BurnsProfile::new(c.profile);
    let bump = BumpIntensity::new(c.bump);
    let s_max = c.s_range.0.abs().min(c.s_range.1.abs());
    let report = examples::validate_burns(&profile, &bump, s_max);
    let mut doc = BuildReport {
        passed: report.passed,
        clauses: report.clauses.clone(),
        minimal_bump_width: bump.minimal_width(),
        exactness: None,
    };
    if !report.passed {
        out.json("burns_build.json", &doc)?;
        let ids: Vec<String> = report
            .failed()
            .iter()
            .map(|c| format!("{} ({})", c.id, c.description))
            .collect();
        return Err(CliError::Failed(format!("construction invalid: {}", ids.join("; "))));
    }
    let sys = examples::build_burns_system(c.profile, c.bump, c.s_range)?;
    doc.exactness = Some(sys.exactness()?);
    out.json("burns_build.json", &doc)?;
    println!("all {} clauses pass", doc.clauses.len());
    Ok(sys)
}

#[derive(Serialize)]
struct BurnsSummary<'a> {
    passed: bool,
    summary: String,
    exactness: &'a examples::Exactness,
    reversal: &'a examples::ReversalCheck,
    max_band_time: f64,
    band_cap: f64,
    band_within_cap: bool,
}

const REVERSAL_TOLERANCE: f64 = 1e-6;

fn anosov_cert(c: &config::AnosovCert, out: &mut Out) -> Result<(), CliError> {
    match c.target {
        CertTarget::System => {
            let spec = c
                .system
                .as_ref()
                .ok_or_else(|| CliError::Config("target = \"system\" needs [anosov_cert.system]".into()))?;
            let system = spec.build().map_err(setup)?;
            c.certificate.validate(&system).map_err(setup)?;
            let report = stability::anosov_certificate(&system, &c.certificate)?;
            out.json("certificate.json", &report)?;
            println!("{}", report.summary());
            if !report.pass {
                return Err(CliError::Failed(report.summary()));
            }
            Ok(())
        }
        CertTarget::Burns => {
            // writes burns_build.json and stops on an invalid construction
            let sys = burns_build(&c.burns, out)?;
            c.certificate.validate(&sys.plus).map_err(setup)?;
            let exp = examples::burns_certificate_experiment(&c.burns_config())?;
            out.json("certificate.json", &exp.certificate)?;
            let mut csv = Vec::new();
            examples::write_band_csv(&exp, &mut csv)?;
            out.write("band_occupation.csv", &csv)?;
            let passed = exp.passed() && exp.reversal.max_error < REVERSAL_TOLERANCE;
            let summary = exp.certificate.summary();
            out.json(
                "burns_experiment.json",
                &BurnsSummary {
                    passed,
                    summary: summary.clone(),
                    exactness: &exp.exactness,
                    reversal: &exp.reversal,
                    max_band_time: exp.max_band_time,
                    band_cap: exp.band_cap,
                    band_within_cap: exp.band_within_cap,
                },
            )?;
            println!("{summary}");
            println!(
                "max band time {:.6} (cap {}), reversal error {:e}, exactness {:e}",
                exp.max_band_time, exp.band_cap, exp.reversal.max_error, exp.exactness.total
            );
            if !passed {
                return Err(CliError::Failed(format!(
                    "{summary}; band within cap: {}; reversal error {:e}",
                    exp.band_within_cap, exp.reversal.max_error
                )));
            }
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct LengthSummary {
    ell: f64,
    b: f64,
    seed: u64,
    count: usize,
    reference_period: f64,
    reference_length: f64,
    min_excess: f64,
    tolerance: f64,
    pass: bool,
}

fn magnetic_length(c: &config::MagneticLength, seed: u64, out: &mut Out) -> Result<(), CliError> {
    closed_orbit_length_formula(c.ell, c.b).map_err(setup)?;
    if !(c.max_amplitude > 0.0) || c.count == 0 {
        return Err(CliError::Config("need count ≥ 1 and max_amplitude > 0".into()));
    }
    let sweep = examples::minimality_sweep(c.ell, c.b, c.count, seed, c.max_amplitude)?;
    let mut csv = Vec::new();
    examples::write_minimality_csv(&sweep, &mut csv)?;
    out.write("magnetic_length.csv", &csv)?;
    let pass = sweep.min_excess >= -c.tolerance;
    out.json(
        "magnetic_length.json",
        &LengthSummary {
            ell: c.ell,
            b: c.b,
            seed,
            count: c.count,
            reference_period: sweep.reference_period,
            reference_length: sweep.reference_length,
            min_excess: sweep.min_excess,
            tolerance: c.tolerance,
            pass,
        },
    )?;
    println!(
        "{} perturbations, reference length {:.12}, min excess {:e}",
        c.count, sweep.reference_length, sweep.min_excess
    );
    if !pass {
        return Err(CliError::Failed(format!(
            "a perturbation is shorter than the reference by {:e}",
            -sweep.min_excess
        )));
    }
    Ok(())
}
