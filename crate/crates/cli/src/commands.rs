//! Command implementations and their exit codes.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use lerayflow::diagnostics::{
    decay_fit_grid, gradient_magnitude, magnitude, norms_report, verify_profile, write_shell_csv, FitSpec, NormReport,
    ProfileData, VerificationReport,
};
use lerayflow::grid::{read_components, write_components};
use lerayflow::heat_lift::LiftedProfile;
use lerayflow::leray_solver::{
    continuation_solve, residual_from_parts, scalar_gradient, FieldDerivatives, ProfileSolution, ResidualReport,
    SolveContext, StageRecord,
};
use lerayflow::spectral::{laplacian, spectrum_to_real, to_spectrum, vector_gradient};
use lerayflow::{build_homogeneous_field, GridVectorField, LerayError, ScalarField};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::oracles;

pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_STALLED: u8 = 2;
pub const EXIT_CHECK_FAILED: u8 = 3;
pub const EXIT_ORACLE_FAILED: u8 = 4;

/// A non-zero exit, with an optional message for standard error.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: Option<anyhow::Error>,
}

impl Failure {
    pub fn config(e: anyhow::Error) -> Self {
        Failure {
            code: EXIT_CONFIG,
            error: Some(e),
        }
    }

    fn quiet(code: u8) -> Self {
        Failure { code, error: None }
    }
}

impl From<LerayError> for Failure {
    fn from(e: LerayError) -> Self {
        let code = match e {
            LerayError::ContinuationStalled { .. } => EXIT_STALLED,
            _ => EXIT_CONFIG,
        };
        Failure {
            code,
            error: Some(e.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::config(e)
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SolveReport {
    pub config: RunConfig,
    pub sigma: f64,
    pub iterations_per_stage: Vec<usize>,
    pub k_residual: f64,
    /// Relative weighted momentum residual inside the reporting window.
    pub stationary_residual_interior: f64,
    pub pressure_gain: f64,
    pub residual: ResidualReport,
    pub v_re_max: f64,
    pub stages: Vec<StageRecord>,
    pub norms: NormReport,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub verification: VerificationReport,
    pub residual: ResidualReport,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

/// Parts of the solver's derivatives that spectral differentiation of the
/// stored fields does not reproduce: gradient (4), Laplacian (2) and
/// pressure gradient (2), in that order.
fn derivative_corrections(sol: &ProfileSolution) -> Vec<Vec<f64>> {
    let spectral = FieldDerivatives::spectral(&sol.v_re);
    let gq = scalar_gradient(&sol.q);
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<f64>>();
    let mut out = Vec::with_capacity(8);
    for a in 0..2 {
        for b in 0..2 {
            out.push(diff(&sol.derivatives.grad[a][b], &spectral.grad[a][b]));
        }
    }
    for a in 0..2 {
        out.push(diff(&sol.derivatives.lap[a], &spectral.lap[a]));
    }
    for (solver, plain) in sol.grad_q.iter().zip(&gq) {
        out.push(diff(solver, plain));
    }
    out
}

pub fn solve(config: &RunConfig, out_dir: &Path) -> Result<(), Failure> {
    let params = config.solve_params()?;
    let ctx = SolveContext::from_params(config.initial_data.clone(), &params)?;
    let sol = continuation_solve(&params, &ctx)?;
    let norms = norms_report(&sol, ctx.v0_jets())?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let o = &config.outputs;
    sol.v_re.write_binary(create(&out_dir.join(&o.v_re))?)?;
    sol.q.write_binary(create(&out_dir.join(&o.q))?)?;
    let corr = derivative_corrections(&sol);
    let refs: Vec<&[f64]> = corr.iter().map(|c| c.as_slice()).collect();
    write_components(create(&out_dir.join(&o.corrections))?, &sol.v_re.grid, &refs)?;
    let report = SolveReport {
        config: config.clone(),
        sigma: sol.sigma,
        iterations_per_stage: sol.iterations_per_stage(),
        k_residual: sol.k_residual,
        stationary_residual_interior: sol.residual.relative,
        pressure_gain: sol.residual.pressure_gain(),
        residual: sol.residual,
        v_re_max: sol.v_re.max_norm(),
        stages: sol.stages.clone(),
        norms,
    };
    write_json(&out_dir.join(&o.solve_report), &report)?;
    println!(
        "converged: sigma = {}, iterations per stage {:?}, max |v_re| = {:e}, residual {:e}",
        report.sigma, report.iterations_per_stage, report.v_re_max, report.stationary_residual_interior
    );
    Ok(())
}

/// Solve artifacts read back from disk.
struct Loaded {
    report: SolveReport,
    lift: LiftedProfile,
    v_re: GridVectorField,
    q: ScalarField,
    derivatives: FieldDerivatives,
    grad_q: [Vec<f64>; 2],
}

fn load_profile(dir: &Path) -> anyhow::Result<Loaded> {
    let report_path = dir.join(crate::config::OutputConfig::default().solve_report);
    let report: SolveReport =
        serde_json::from_reader(open(&report_path)?).with_context(|| format!("parsing {}", report_path.display()))?;
    let o = &report.config.outputs;
    let v_re = GridVectorField::read_binary(open(&dir.join(&o.v_re))?)?;
    let q = ScalarField::read_binary(open(&dir.join(&o.q))?)?;
    let (grid, corr) = read_components(open(&dir.join(&o.corrections))?)?;
    if corr.len() != 8 {
        return Err(anyhow!("expected 8 correction components, found {}", corr.len()));
    }
    v_re.grid.check_same(&q.grid)?;
    v_re.grid.check_same(&grid)?;
    let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<f64>>();
    let g = vector_gradient(&v_re);
    let lap = spectrum_to_real(&laplacian(&to_spectrum(&v_re)));
    let gq = scalar_gradient(&q);
    let derivatives = FieldDerivatives {
        grad: [
            [add(&g[0][0], &corr[0]), add(&g[0][1], &corr[1])],
            [add(&g[1][0], &corr[2]), add(&g[1][1], &corr[3])],
        ],
        lap: [add(&lap[0], &corr[4]), add(&lap[1], &corr[5])],
    };
    let grad_q = [add(&gq[0], &corr[6]), add(&gq[1], &corr[7])];
    let lift = LiftedProfile::new(build_homogeneous_field(report.config.initial_data.clone()));
    Ok(Loaded {
        report,
        lift,
        v_re,
        q,
        derivatives,
        grad_q,
    })
}

pub fn verify(profile_dir: &Path, report_path: Option<&Path>, out_dir: &Path) -> Result<(), Failure> {
    let p = load_profile(profile_dir)?;
    let v0 = p.lift.sample(&p.v_re.grid)?;
    let verification = verify_profile(&ProfileData {
        lift: &p.lift,
        v0: &v0,
        v_re: &p.v_re,
        grad_re: &p.derivatives.grad,
        q: &p.q,
        grad_q: &p.grad_q,
    })?;
    let residual = residual_from_parts(&v0, 1.0, &p.v_re, &p.derivatives, &p.grad_q)?;
    let report = VerifyReport {
        passed: verification.passed,
        verification,
        residual,
    };
    let path: PathBuf = match report_path {
        Some(r) => r.to_path_buf(),
        None => {
            fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
            out_dir.join(&p.report.config.outputs.verify_report)
        }
    };
    write_json(&path, &report)?;
    for c in &report.verification.checks {
        println!(
            "{:<22} {:>14.6e}  {:<18} {}",
            c.name,
            c.value,
            c.bound,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    for s in &report.verification.skipped {
        println!("skipped: {s}");
    }
    if report.passed {
        Ok(())
    } else {
        let names: Vec<&str> = report.verification.failed().iter().map(|c| c.name.as_str()).collect();
        eprintln!("failed checks: {}", names.join(", "));
        Err(Failure::quiet(EXIT_CHECK_FAILED))
    }
}

pub fn oracle(name: &str, seed: u64) -> Result<(), Failure> {
    let Some(result) = oracles::run(name, seed) else {
        return Err(Failure::config(anyhow!(
            "unknown oracle '{name}'\nusage: lerayflow oracle <{}>",
            oracles::NAMES.join("|")
        )));
    };
    let checks = match result {
        Ok(c) => c,
        Err(e) => {
            return Err(Failure {
                code: EXIT_ORACLE_FAILED,
                error: Some(e),
            })
        }
    };
    let mut failed = Vec::new();
    for c in &checks {
        println!(
            "{:<28} {:>14.6e}  {:<12} {}",
            c.name,
            c.value,
            c.bound,
            if c.pass { "PASS" } else { "FAIL" }
        );
        if !c.pass {
            failed.push(c.name.clone());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        eprintln!("failing cases: {}", failed.join(", "));
        Err(Failure::quiet(EXIT_ORACLE_FAILED))
    }
}

pub fn export_csv(profile_dir: &Path, out_dir: &Path) -> Result<(), Failure> {
    let p = load_profile(profile_dir)?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    p.v_re.write_csv(create(&out_dir.join("v_re.csv"))?)?;
    p.q.write_csv(create(&out_dir.join("q.csv"))?)?;
    let grid = p.v_re.grid;
    let (a, b) = (grid.half_width / 4.0, grid.half_width / 2.0);
    let v0 = p.lift.sample(&grid)?;
    let mut fits = Vec::new();
    for (name, values, hyp) in [
        ("v0", magnitude(&v0.value), -1.0),
        ("v_re", magnitude(&p.v_re), -2.0),
        ("grad_v_re", gradient_magnitude(&p.derivatives.grad), -3.0),
    ] {
        match decay_fit_grid(&grid, &values, &FitSpec::new(hyp, a, b)) {
            Ok(f) => fits.push((name, f)),
            Err(LerayError::EmptyAnnulus) => {}
            Err(e) => return Err(e.into()),
        }
    }
    let refs: Vec<(&str, _)> = fits.iter().map(|(n, f)| (*n, f)).collect();
    let mut w = create(&out_dir.join("shells.csv"))?;
    write_shell_csv(&mut w, &refs)?;
    w.flush().context("writing shells.csv")?;
    println!("wrote v_re.csv, q.csv, shells.csv to {}", out_dir.display());
    Ok(())
}
