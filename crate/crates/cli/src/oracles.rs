//! Self-contained oracle suites: closed forms and exact identities the
//! library must reproduce.

use std::f64::consts::PI;

use anyhow::Result;
use lerayflow::diagnostics::Check;
use lerayflow::heat_lift::{heat_lift_eval, oseen_profile};
use lerayflow::initial_data::{check_global_holder, holder_norm, HOLDER_CALIBRATION};
use lerayflow::spectral::{derivative, from_spectrum, heat_propagate, leray_project, spectrum_to_real, to_spectrum};
use lerayflow::{build_homogeneous_field, CircleTrace, Grid, GridVectorField, ScalarField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const NAMES: [&str; 4] = ["oseen", "projection", "semigroup", "holder"];

pub const OSEEN_TOLERANCE: f64 = 1e-6;
pub const MULTIPLIER_TOLERANCE: f64 = 1e-13;
pub const GAUSSIAN_TOLERANCE: f64 = 1e-10;
pub const PARSEVAL_TOLERANCE: f64 = 1e-12;
pub const HOLDER_PAIRS: usize = 10_000;

/// Runs the named suite; `None` for an unknown name.
pub fn run(name: &str, seed: u64) -> Option<Result<Vec<Check>>> {
    Some(match name {
        "oseen" => oseen(),
        "projection" => projection(seed),
        "semigroup" => semigroup(seed),
        "holder" => holder(seed),
        _ => return None,
    })
}

/// The data set shared by the Hoelder oracle and the test corpus.
pub fn corpus() -> Vec<(&'static str, CircleTrace)> {
    let alpha = 2.0 * PI;
    vec![
        ("swirl", CircleTrace::swirl(alpha)),
        (
            "cos",
            CircleTrace::new(alpha, vec![1.0], vec![], 1.0).expect("valid trace"),
        ),
        (
            "cos2_sin",
            CircleTrace::new(alpha, vec![0.0, 1.0], vec![0.5], 1.0).expect("valid trace"),
        ),
    ]
}

/// Quadrature heat lift of `alpha x_perp / (2 pi |x|^2)` against the Oseen
/// vortex on `0.5 <= |y| <= 10`.
fn oseen() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for alpha in [2.0 * PI, 1.0, -3.0] {
        let field = build_homogeneous_field(CircleTrace::swirl(alpha));
        let mut worst = 0.0_f64;
        for r in [0.5, 1.0, 2.0, 3.5, 6.0, 10.0] {
            for theta in [0.3, 2.1, 4.4] {
                let y = [r * f64::cos(theta), r * f64::sin(theta)];
                let quad = heat_lift_eval(&field, y)?.value;
                let exact = oseen_profile(alpha, y);
                let err = (quad[0] - exact[0]).hypot(quad[1] - exact[1]) / exact[0].hypot(exact[1]);
                worst = worst.max(err);
            }
        }
        checks.push(Check::at_most(
            &format!("oseen alpha={alpha:.4}"),
            worst,
            OSEEN_TOLERANCE,
        ));
    }
    Ok(checks)
}

fn random_field(grid: Grid, rng: &mut ChaCha8Rng) -> GridVectorField {
    let mut v = GridVectorField::zeros(grid);
    for c in v.u.iter_mut() {
        c.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
    }
    v
}

fn relative_gap(a: &GridVectorField, b: &GridVectorField) -> f64 {
    a.axpy(-1.0, b).expect("same grid").l2_norm() / b.l2_norm().max(f64::MIN_POSITIVE)
}

fn projection(seed: u64) -> Result<Vec<Check>> {
    let grid = Grid::new(8.0, 64)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = to_spectrum(&random_field(grid, &mut rng));
    let pf = leray_project(&f);
    let ppf = leray_project(&pf);
    let idem = relative_gap(&from_spectrum(&ppf)?, &from_spectrum(&pf)?);

    let phi: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let phi = lerayflow::spectral::scalar_to_spectrum(&ScalarField { grid, data: phi });
    let mut grad = spectrum_to_real(&derivative(&phi, 0));
    grad.extend(spectrum_to_real(&derivative(&phi, 1)));
    let grad = GridVectorField {
        grid,
        u: [grad[0].clone(), grad[1].clone()],
    };
    let annihilated = from_spectrum(&leray_project(&to_spectrum(&grad)))?.l2_norm() / grad.l2_norm();
    Ok(vec![
        Check::at_most("projection idempotence", idem, MULTIPLIER_TOLERANCE),
        Check::at_most("gradient annihilation", annihilated, MULTIPLIER_TOLERANCE),
    ])
}

fn semigroup(seed: u64) -> Result<Vec<Check>> {
    let grid = Grid::new(8.0, 64)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let field = random_field(grid, &mut rng);
    let f = to_spectrum(&field);
    let (s, t) = (0.3, 0.45);
    let composed = from_spectrum(&heat_propagate(&heat_propagate(&f, s)?, t)?)?;
    let direct = from_spectrum(&heat_propagate(&f, s + t)?)?;
    let law = relative_gap(&composed, &direct);

    // Gaussian exp(-|x|^2 / (4a)) evolves to a/(a+t) exp(-|x|^2 / (4(a+t))).
    let g = Grid::new(16.0, 128)?;
    let a = 0.5;
    let gauss = |c: f64, y: [f64; 2]| a / c * (-(y[0] * y[0] + y[1] * y[1]) / (4.0 * c)).exp();
    let initial = GridVectorField::from_fn(g, |y| [gauss(a, y), 0.0]);
    let exact = GridVectorField::from_fn(g, |y| [gauss(a + 1.0, y), 0.0]);
    let evolved = from_spectrum(&heat_propagate(&to_spectrum(&initial), 1.0)?)?;
    let gaussian = evolved.axpy(-1.0, &exact)?.max_norm() / exact.max_norm();

    let parseval = (f.l2_norm() - field.l2_norm()).abs() / field.l2_norm();
    Ok(vec![
        Check::at_most("semigroup law", law, MULTIPLIER_TOLERANCE),
        Check::at_most("gaussian closed form", gaussian, GAUSSIAN_TOLERANCE),
        Check::at_most("parseval", parseval, PARSEVAL_TOLERANCE),
    ])
}

fn holder(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for (name, trace) in corpus() {
        let a = holder_norm(&trace, trace.beta)?;
        let report = check_global_holder(&build_homogeneous_field(trace.clone()), trace.beta, HOLDER_PAIRS, seed)?;
        let mut c = Check::at_most(&format!("holder {name}"), report.max_ratio, HOLDER_CALIBRATION * a);
        c.pass &= report.pass;
        checks.push(c);
    }
    Ok(checks)
}
