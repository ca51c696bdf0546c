//! Checks of analytical properties on computed profiles: the energy
//! cancellation identity, energy and weighted norms, and decay-rate fits.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{LerayError, Result};
use crate::grid::{Grid, GridVectorField, ScalarField};
use crate::heat_lift::{GridJets, LiftedProfile};
use crate::leray_solver::ProfileSolution;
use crate::spectral::{from_spectrum, heat_propagate, to_spectrum, vector_gradient};

/// Guard for the denominator of the identity residual.
pub const IDENTITY_GUARD: f64 = 1e-30;
/// `dirichlet_vre <= DIRICHLET_FACTOR * dirichlet_v0` is the accepted bound.
pub const DIRICHLET_FACTOR: f64 = 4.4;
/// Exponents reported by [`norms_report`].
pub const LP_EXPONENTS: [f64; 4] = [1.5, 2.0, 4.0, f64::INFINITY];
pub const MIN_BINS: usize = 20;
pub const DEFAULT_BINS: usize = 24;
/// Heat time of the smoothing used by [`corrupted_non_solution`].
pub const CORRUPTION_TIME: f64 = 0.1;
const RINGS_PER_BIN: usize = 6;
const ANGLES: usize = 512;

type Gradient = [[Vec<f64>; 2]; 2];

/// Frobenius inner product of two gradient fields, integrated over the grid.
fn gradient_inner(grid: &Grid, a: &Gradient, b: &Gradient) -> f64 {
    let mut s = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            s += a[i][j].iter().zip(&b[i][j]).map(|(x, y)| x * y).sum::<f64>();
        }
    }
    s * grid.cell_area()
}

/// `|D_re + 2 C| / max(D_re, eps)` with `D_re = int |grad v_re|^2` and
/// `C = int grad v0 : grad v_re`.
pub fn crucial_identity_from_gradients(grid: &Grid, grad_v0: &Gradient, grad_re: &Gradient) -> f64 {
    let d = gradient_inner(grid, grad_re, grad_re);
    let c = gradient_inner(grid, grad_v0, grad_re);
    let num = (d + 2.0 * c).abs();
    if num == 0.0 {
        return 0.0;
    }
    num / d.max(IDENTITY_GUARD)
}

/// Identity residual with the pointwise gradient of `v0` and the spectral
/// gradient of `v_re`.
pub fn crucial_identity_residual(v0: &GridJets, v_re: &GridVectorField) -> Result<f64> {
    v0.value.grid.check_same(&v_re.grid)?;
    if v_re.is_zero() {
        return Ok(0.0);
    }
    Ok(crucial_identity_from_gradients(
        &v_re.grid,
        &v0.grad,
        &vector_gradient(v_re),
    ))
}

/// The reference non-solution `-2 exp(0.1 Lap) v0`.
pub fn corrupted_non_solution(v0: &GridVectorField) -> GridVectorField {
    let spec = heat_propagate(&to_spectrum(v0), CORRUPTION_TIME).expect("positive time");
    from_spectrum(&spec).expect("vector spectrum").scaled(-2.0)
}

/// Pointwise Euclidean magnitude.
pub fn magnitude(v: &GridVectorField) -> Vec<f64> {
    (0..v.grid.len()).map(|k| v.u[0][k].hypot(v.u[1][k])).collect()
}

/// Pointwise Frobenius norm of a gradient.
pub fn gradient_magnitude(g: &Gradient) -> Vec<f64> {
    (0..g[0][0].len())
        .map(|k| (g[0][0][k].powi(2) + g[0][1][k].powi(2) + g[1][0][k].powi(2) + g[1][1][k].powi(2)).sqrt())
        .collect()
}

fn lp_norm(grid: &Grid, values: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    }
    let s: f64 = values.iter().map(|v| v.abs().powf(p)).sum();
    (s * grid.cell_area()).powf(1.0 / p)
}

fn lp_key(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{p}")
    }
}

fn lp_map(grid: &Grid, values: &[f64]) -> BTreeMap<String, f64> {
    LP_EXPONENTS
        .iter()
        .map(|&p| (lp_key(p), lp_norm(grid, values, p)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub l2_vre: f64,
    pub h1_vre: f64,
    pub lp_vre: BTreeMap<String, f64>,
    /// `||(1 + |y|^2)^(1/2) v_re||_2`
    pub weighted_l2: f64,
    /// Weighted L2 norms of `v_re` and its gradient, combined.
    pub weighted_h1: f64,
    pub dirichlet_v0: f64,
    pub dirichlet_vre: f64,
    pub dirichlet_bound_ok: bool,
    pub q_lp: BTreeMap<String, f64>,
    pub grad_q_lp: BTreeMap<String, f64>,
    pub crucial_identity_residual: f64,
}

impl NormReport {
    pub fn is_finite(&self) -> bool {
        let maps = self
            .lp_vre
            .values()
            .chain(self.q_lp.values())
            .chain(self.grad_q_lp.values());
        [
            self.l2_vre,
            self.h1_vre,
            self.weighted_l2,
            self.weighted_h1,
            self.dirichlet_v0,
            self.dirichlet_vre,
            self.crucial_identity_residual,
        ]
        .iter()
        .chain(maps)
        .all(|v| v.is_finite())
    }
}

/// All norms by grid quadrature, from the remainder, its gradient, the
/// pressure and its gradient.
pub fn norms_from_parts(
    v0: &GridJets,
    v_re: &GridVectorField,
    grad_re: &Gradient,
    q: &ScalarField,
    grad_q: &[Vec<f64>; 2],
) -> Result<NormReport> {
    let grid = v_re.grid;
    grid.check_same(&v0.value.grid)?;
    grid.check_same(&q.grid)?;
    let mag = magnitude(v_re);
    let gmag = gradient_magnitude(grad_re);
    let area = grid.cell_area();
    let (mut wl2, mut wg2) = (0.0, 0.0);
    for k in 0..grid.len() {
        let p = grid.point(k);
        let w = 1.0 + p[0] * p[0] + p[1] * p[1];
        wl2 += w * mag[k] * mag[k];
        wg2 += w * gmag[k] * gmag[k];
    }
    let l2 = lp_norm(&grid, &mag, 2.0);
    let dirichlet_vre = gradient_inner(&grid, grad_re, grad_re);
    let dirichlet_v0 = gradient_inner(&grid, &v0.grad, &v0.grad);
    let grad_q_mag: Vec<f64> = (0..grid.len()).map(|k| grad_q[0][k].hypot(grad_q[1][k])).collect();
    Ok(NormReport {
        l2_vre: l2,
        h1_vre: (l2 * l2 + dirichlet_vre).sqrt(),
        lp_vre: lp_map(&grid, &mag),
        weighted_l2: (wl2 * area).sqrt(),
        weighted_h1: ((wl2 + wg2) * area).sqrt(),
        dirichlet_v0,
        dirichlet_vre,
        dirichlet_bound_ok: dirichlet_vre <= DIRICHLET_FACTOR * dirichlet_v0,
        q_lp: lp_map(&grid, &q.data),
        grad_q_lp: lp_map(&grid, &grad_q_mag),
        crucial_identity_residual: crucial_identity_from_gradients(&grid, &v0.grad, grad_re),
    })
}

/// [`norms_from_parts`] for a computed profile.
pub fn norms_report(solution: &ProfileSolution, v0: &GridJets) -> Result<NormReport> {
    norms_from_parts(
        v0,
        &solution.v_re,
        &solution.derivatives.grad,
        &solution.q,
        &solution.grad_q,
    )
}

/// Largest sample in one radial shell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shell {
    /// Radius of the sample attaining the maximum.
    pub r: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub annulus: (f64, f64),
    pub bins: usize,
    pub exponent_hypothesis: f64,
    pub log_corrected: bool,
    /// Largest shell value of `|f| (1 + r)^(-hypothesis)`, divided by
    /// `ln(1 + r)` when log-corrected.
    pub max_compensated: f64,
    pub min_compensated: f64,
    /// `max_compensated / min_compensated`.
    pub compensated_ratio: f64,
    pub shells: Vec<Shell>,
}

/// Options for a decay fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSpec {
    pub exponent_hypothesis: f64,
    pub annulus: (f64, f64),
    pub log_corrected: bool,
    pub bins: usize,
}

impl FitSpec {
    pub fn new(exponent_hypothesis: f64, r_min: f64, r_max: f64) -> Self {
        FitSpec {
            exponent_hypothesis,
            annulus: (r_min, r_max),
            log_corrected: false,
            bins: DEFAULT_BINS,
        }
    }

    pub fn log_corrected(mut self) -> Self {
        self.log_corrected = true;
        self
    }

    fn validate(&self, limit: Option<f64>) -> Result<()> {
        let (a, b) = self.annulus;
        if !(a > 0.0 && a < b && b.is_finite()) {
            return Err(LerayError::DomainError(format!(
                "annulus [{a}, {b}] is not a proper interval"
            )));
        }
        if let Some(l) = limit {
            if b > l {
                return Err(LerayError::DomainError(format!("annulus reaches {b}, beyond {l}")));
            }
        }
        if self.bins < MIN_BINS {
            return Err(LerayError::InvalidParams(format!(
                "at least {MIN_BINS} bins are required"
            )));
        }
        Ok(())
    }

    /// Shell index of radius `r` (log-spaced shells).
    fn bin(&self, r: f64) -> Option<usize> {
        let (a, b) = self.annulus;
        if r < a || r > b {
            return None;
        }
        let t = (r / a).ln() / (b / a).ln();
        Some(((t * self.bins as f64) as usize).min(self.bins - 1))
    }
}

/// Fits the slope of log(shell max) against log r from `(r, |f|)` samples.
pub fn decay_fit_samples(samples: impl IntoIterator<Item = (f64, f64)>, spec: &FitSpec) -> Result<FitResult> {
    spec.validate(None)?;
    let mut shells: Vec<Option<Shell>> = vec![None; spec.bins];
    for (r, v) in samples {
        let Some(b) = spec.bin(r) else { continue };
        let v = v.abs();
        if !(v > 0.0) {
            continue;
        }
        if shells[b].is_none_or(|s| v > s.max) {
            shells[b] = Some(Shell { r, max: v });
        }
    }
    let shells: Vec<Shell> = shells.into_iter().flatten().collect();
    if shells.len() < MIN_BINS {
        return Err(LerayError::EmptyAnnulus);
    }
    let logf = |s: &Shell| {
        let v = if spec.log_corrected {
            s.max / (1.0 + s.r).ln()
        } else {
            s.max
        };
        v.ln()
    };
    let n = shells.len() as f64;
    let mx = shells.iter().map(|s| s.r.ln()).sum::<f64>() / n;
    let my = shells.iter().map(logf).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for s in &shells {
        let dx = s.r.ln() - mx;
        sxy += dx * (logf(s) - my);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    let comp: Vec<f64> = shells
        .iter()
        .map(|s| {
            let c = s.max * (1.0 + s.r).powf(-spec.exponent_hypothesis);
            if spec.log_corrected {
                c / (1.0 + s.r).ln()
            } else {
                c
            }
        })
        .collect();
    let max_c = comp.iter().copied().fold(0.0, f64::max);
    let min_c = comp.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(FitResult {
        slope,
        intercept: my - slope * mx,
        annulus: spec.annulus,
        bins: shells.len(),
        exponent_hypothesis: spec.exponent_hypothesis,
        log_corrected: spec.log_corrected,
        max_compensated: max_c,
        min_compensated: min_c,
        compensated_ratio: max_c / min_c,
        shells,
    })
}

/// Decay fit of grid values; the annulus must lie within `0.9 L`.
pub fn decay_fit_grid(grid: &Grid, values: &[f64], spec: &FitSpec) -> Result<FitResult> {
    spec.validate(Some(0.9 * grid.half_width))?;
    if values.len() != grid.len() {
        return Err(LerayError::GridMismatch);
    }
    decay_fit_samples(
        (0..grid.len()).map(|k| {
            let p = grid.point(k);
            (p[0].hypot(p[1]), values[k])
        }),
        spec,
    )
}

/// Decay fit of a function sampled on a polar lattice covering the annulus.
pub fn decay_fit_fn(f: impl Fn([f64; 2]) -> f64, spec: &FitSpec) -> Result<FitResult> {
    spec.validate(None)?;
    let (a, b) = spec.annulus;
    let rings = spec.bins * RINGS_PER_BIN;
    let samples = (0..rings).flat_map(|i| {
        let r = a * (b / a).powf((i as f64 + 0.5) / rings as f64);
        (0..ANGLES).map(move |j| {
            let t = 2.0 * PI * j as f64 / ANGLES as f64;
            (r, [r * t.cos(), r * t.sin()])
        })
    });
    decay_fit_samples(samples.map(|(r, y)| (r, f(y))).collect::<Vec<_>>(), spec)
}

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: String,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            value,
            bound: format!("<= {limit:e}"),
            pass: value <= limit,
        }
    }

    pub fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            value,
            bound: format!(">= {limit:e}"),
            pass: value >= limit,
        }
    }

    pub fn within(name: &str, value: f64, target: f64, tol: f64) -> Self {
        Check {
            name: name.into(),
            value,
            bound: format!("{target} +/- {tol}"),
            pass: (value - target).abs() <= tol,
        }
    }
}

/// CSV of shell maxima: `name,r,max`.
pub fn write_shell_csv<W: Write>(mut w: W, fits: &[(&str, &FitResult)]) -> Result<()> {
    writeln!(w, "name,r,max")?;
    for (name, fit) in fits {
        for s in &fit.shells {
            writeln!(w, "{name},{},{}", s.r, s.max)?;
        }
    }
    Ok(())
}

/// Remainders below this fraction of `max |v0|` are numerically zero; checks
/// on their shape are skipped.
pub const TRIVIAL_REMAINDER: f64 = 1e-6;
pub const IDENTITY_TOLERANCE: f64 = 5e-2;
pub const SLOPE_TOLERANCE: f64 = 0.2;
pub const GRADIENT_SLOPE_TOLERANCE: f64 = 0.25;
pub const V0_SLOPE_TOLERANCE: f64 = 0.1;
pub const LOG_RATIO_LIMIT: f64 = 10.0;
/// Cutoff radius and annulus of the w decay check.
pub const W_CUTOFF: f64 = 4.0;
pub const W_ANNULUS: (f64, f64) = (12.0, 16.0);

/// A computed profile with everything the checks need.
pub struct ProfileData<'a> {
    pub lift: &'a LiftedProfile,
    pub v0: &'a GridJets,
    pub v_re: &'a GridVectorField,
    pub grad_re: &'a Gradient,
    pub q: &'a ScalarField,
    pub grad_q: &'a [Vec<f64>; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub norms: NormReport,
    pub fits: BTreeMap<String, FitResult>,
    pub checks: Vec<Check>,
    /// Checks not run, with the reason.
    pub skipped: Vec<String>,
    pub remainder_trivial: bool,
    pub passed: bool,
}

impl VerificationReport {
    pub fn failed(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

/// Runs the identity, norm and decay checks on a profile. Decay annuli are
/// `[L/4, L/2]`; the gradient slope is checked for `beta = 1` data.
pub fn verify_profile(data: &ProfileData) -> Result<VerificationReport> {
    let grid = data.v_re.grid;
    let trace = &data.lift.source().trace;
    let norms = norms_from_parts(data.v0, data.v_re, data.grad_re, data.q, data.grad_q)?;
    let v0_max = data.v0.value.max_norm();
    let trivial = data.v_re.max_norm() <= TRIVIAL_REMAINDER * v0_max;
    let (a, b) = (grid.half_width / 4.0, grid.half_width / 2.0);
    let mut fits = BTreeMap::new();
    let mut checks = vec![
        Check {
            name: "norms_finite".into(),
            value: f64::from(u8::from(norms.is_finite())),
            bound: "all finite".into(),
            pass: norms.is_finite(),
        },
        Check::at_most(
            "dirichlet_bound",
            norms.dirichlet_vre / norms.dirichlet_v0.max(IDENTITY_GUARD),
            DIRICHLET_FACTOR,
        ),
    ];
    let mut skipped = Vec::new();

    if v0_max > 0.0 {
        let fit = decay_fit_fn(
            |y| {
                let v = data.lift.eval(y).value;
                v[0].hypot(v[1])
            },
            &FitSpec::new(-1.0, a, b),
        )?;
        checks.push(Check::within("decay_v0", fit.slope, -1.0, V0_SLOPE_TOLERANCE));
        fits.insert("v0".to_string(), fit);
    } else {
        skipped.push("decay_v0: zero datum".into());
    }

    if trace.is_pure_swirl() {
        skipped.push("decay_w: datum has no radial part".into());
    } else if 2.0 * W_CUTOFF < grid.half_width && W_ANNULUS.1 <= 0.9 * grid.half_width {
        let cut = crate::heat_lift::build_cutoff_profile(data.lift, W_CUTOFF, &grid)?;
        let fit = decay_fit_fn(
            |y| {
                let w = cut.w_jet(y).value;
                w[0].hypot(w[1])
            },
            &FitSpec::new(-2.0, W_ANNULUS.0, W_ANNULUS.1),
        )?;
        checks.push(Check::within("decay_w", fit.slope, -2.0, SLOPE_TOLERANCE));
        fits.insert("w".to_string(), fit);
    } else {
        skipped.push("decay_w: grid too small for the cutoff annulus".into());
    }

    if trivial {
        skipped.push("crucial_identity: remainder is numerically zero".into());
        skipped.push("decay_v_re, decay_grad_v_re, log_corrected_decay: remainder is numerically zero".into());
    } else {
        checks.push(Check::at_most(
            "crucial_identity",
            norms.crucial_identity_residual,
            IDENTITY_TOLERANCE,
        ));
        let mag = magnitude(data.v_re);
        let fit = decay_fit_grid(&grid, &mag, &FitSpec::new(-2.0, a, b))?;
        checks.push(Check::within("decay_v_re", fit.slope, -2.0, SLOPE_TOLERANCE));
        fits.insert("v_re".to_string(), fit);
        let log_fit = decay_fit_grid(&grid, &mag, &FitSpec::new(-3.0, a, b).log_corrected())?;
        checks.push(Check::at_most(
            "log_corrected_decay",
            log_fit.compensated_ratio,
            LOG_RATIO_LIMIT,
        ));
        fits.insert("v_re_log_corrected".to_string(), log_fit);
        let hyp = -(2.0 + trace.beta);
        let fit = decay_fit_grid(&grid, &gradient_magnitude(data.grad_re), &FitSpec::new(hyp, a, b))?;
        if trace.beta == 1.0 {
            checks.push(Check::within(
                "decay_grad_v_re",
                fit.slope,
                hyp,
                GRADIENT_SLOPE_TOLERANCE,
            ));
        } else {
            skipped.push("decay_grad_v_re: checked for beta = 1 only".into());
        }
        fits.insert("grad_v_re".to_string(), fit);
    }
    let passed = checks.iter().all(|c| c.pass);
    Ok(VerificationReport {
        norms,
        fits,
        checks,
        skipped,
        remainder_trivial: trivial,
        passed,
    })
}
