//! Pressure recovery and the strong-form residual of the profile equations
//!
//! ```text
//! -Lap v - v/2 - (y . grad) v / 2 + (v . grad) v + grad q = 0,   v = v0 + v_re
//! ```
//!
//! The caloric lift solves the linear part on its own, which leaves the
//! remainder equation checked here.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LerayError, Result};
use crate::grid::{Grid, GridVectorField, ScalarField};
use crate::heat_lift::GridJets;
use crate::spectral::{
    axis_wavenumbers, dealiased_product, derivative, laplacian, real_to_spectrum, scalar_from_spectrum,
    scalar_to_spectrum, spectrum_to_real, to_spectrum, vector_gradient,
};

/// Residual norms are taken over `|y| <= RESIDUAL_WINDOW * L`.
pub const RESIDUAL_WINDOW: f64 = 0.9;

/// Ring carrying the source mass the periodic solve cannot represent.
const RING_INNER: f64 = 0.92;
const RING_OUTER: f64 = 1.0;

/// Zero-mean solution of `-Lap q = source` on the periodic grid.
///
/// A periodic Poisson problem only sees the mean-free part of the source. A
/// nonzero mean (truncated mass outside the box) is moved onto a smooth
/// radial ring just inside the box edge instead of being spread uniformly;
/// the ring's potential is flat inside it, so the interior gradient is left
/// untouched.
pub fn solve_pressure_poisson(grid: &Grid, source: &[f64]) -> ScalarField {
    let total: f64 = source.iter().sum();
    let mut source = source.to_vec();
    if total != 0.0 {
        let (a, b) = (RING_INNER * grid.half_width, RING_OUTER * grid.half_width);
        let ring: Vec<f64> = (0..grid.len())
            .map(|k| {
                let p = grid.point(k);
                let t = (p[0].hypot(p[1]) - a) / (b - a);
                if (0.0..=1.0).contains(&t) {
                    (std::f64::consts::PI * t).sin().powi(2)
                } else {
                    0.0
                }
            })
            .collect();
        let mass: f64 = ring.iter().sum();
        for (s, r) in source.iter_mut().zip(&ring) {
            *s -= total * r / mass;
        }
    }
    let mut spec = real_to_spectrum(grid, &[&source]);
    let n = grid.n;
    let k = axis_wavenumbers(grid);
    for j in 0..n {
        for i in 0..n {
            let idx = j * n + i;
            let k2 = k[i] * k[i] + k[j] * k[j];
            spec.comps[0][idx] = if k2 == 0.0 || grid.is_nyquist(i) || grid.is_nyquist(j) {
                Complex64::new(0.0, 0.0)
            } else {
                spec.comps[0][idx] / k2
            };
        }
    }
    scalar_from_spectrum(&spec).expect("scalar spectrum")
}

/// Gradient (`grad[a][b] = d_b u_a`) and Laplacian of a vector field.
#[derive(Debug, Clone)]
pub struct FieldDerivatives {
    pub grad: [[Vec<f64>; 2]; 2],
    pub lap: [Vec<f64>; 2],
}

impl FieldDerivatives {
    pub fn zeros(grid: &Grid) -> Self {
        let z = vec![0.0; grid.len()];
        FieldDerivatives {
            grad: [[z.clone(), z.clone()], [z.clone(), z.clone()]],
            lap: [z.clone(), z],
        }
    }

    /// Spectral derivatives, exact for periodic band-limited fields.
    pub fn spectral(v: &GridVectorField) -> Self {
        let mut lap = spectrum_to_real(&laplacian(&to_spectrum(v)));
        let l1 = lap.pop().expect("two components");
        let l0 = lap.pop().expect("two components");
        FieldDerivatives {
            grad: vector_gradient(v),
            lap: [l0, l1],
        }
    }

    /// `self + factor * other`, in place.
    pub fn add_scaled(&mut self, factor: f64, other: &FieldDerivatives) {
        let dst = self.grad.iter_mut().flatten().chain(self.lap.iter_mut());
        let src = other.grad.iter().flatten().chain(other.lap.iter());
        for (d, s) in dst.zip(src) {
            for (a, b) in d.iter_mut().zip(s) {
                *a += factor * b;
            }
        }
    }

    /// Grid L2 norm of the divergence.
    pub fn divergence_l2(&self, grid: &Grid) -> f64 {
        let s: f64 = (0..grid.len())
            .map(|k| (self.grad[0][0][k] + self.grad[1][1][k]).powi(2))
            .sum();
        (s * grid.cell_area()).sqrt()
    }
}

/// Spectral gradient of a scalar field.
pub fn scalar_gradient(q: &ScalarField) -> [Vec<f64>; 2] {
    let qs = scalar_to_spectrum(q);
    let qx = spectrum_to_real(&derivative(&qs, 0)).pop().expect("one component");
    let qy = spectrum_to_real(&derivative(&qs, 1)).pop().expect("one component");
    [qx, qy]
}

/// `div div (U (x) U) = tr(grad U grad U)` for divergence-free `U`, where
/// `grad U = sigma grad v0 + grad_re`. The term quadratic in `v0` is left out
/// when `with_datum_square` is false; products of `v_re` gradients are
/// dealiased.
pub fn pressure_source(
    v0: &GridJets,
    sigma: f64,
    grad_re: Option<&[[Vec<f64>; 2]; 2]>,
    with_datum_square: bool,
) -> Vec<f64> {
    let grid = v0.value.grid;
    let mut s = vec![0.0; grid.len()];
    let tr = |a: [[f64; 2]; 2], b: [[f64; 2]; 2]| {
        a[0][0] * b[0][0] + a[0][1] * b[1][0] + a[1][0] * b[0][1] + a[1][1] * b[1][1]
    };
    for (k, out) in s.iter_mut().enumerate() {
        let a = [
            [sigma * v0.grad[0][0][k], sigma * v0.grad[0][1][k]],
            [sigma * v0.grad[1][0][k], sigma * v0.grad[1][1][k]],
        ];
        if with_datum_square {
            *out += tr(a, a);
        }
        if let Some(g) = grad_re {
            let b = [[g[0][0][k], g[0][1][k]], [g[1][0][k], g[1][1][k]]];
            *out += 2.0 * tr(a, b);
        }
    }
    if let Some(g) = grad_re {
        let p00 = dealiased_product(&grid, &g[0][0], &g[0][0]);
        let p01 = dealiased_product(&grid, &g[0][1], &g[1][0]);
        let p11 = dealiased_product(&grid, &g[1][1], &g[1][1]);
        for k in 0..grid.len() {
            s[k] += p00[k] + 2.0 * p01[k] + p11[k];
        }
    }
    s
}

/// Pressure from `-Lap q = div div (U (x) U)`, `U = v0 + v_re`, zero mean.
/// The source is formed pointwise from the jets of `v0` and spectral
/// gradients of `v_re`.
pub fn recover_pressure(v0: &GridJets, v_re: &GridVectorField) -> Result<ScalarField> {
    v0.value.grid.check_same(&v_re.grid)?;
    let g = (!v_re.is_zero()).then(|| vector_gradient(v_re));
    let source = pressure_source(v0, 1.0, g.as_ref(), true);
    Ok(solve_pressure_poisson(&v_re.grid, &source))
}

/// Norms of the momentum residual of the remainder equation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ResidualReport {
    pub window_radius: f64,
    /// Grid L2 norm over the window.
    pub momentum_l2: f64,
    /// `max (1 + |y|^2)|R|` over the window.
    pub momentum_weighted: f64,
    /// Same with the pressure gradient left out.
    pub momentum_weighted_without_pressure: f64,
    /// `max (1 + |y|^2)|v0 . grad v0|` over the window; the scale of the forcing.
    pub reference: f64,
    /// `momentum_weighted / reference`.
    pub relative: f64,
    pub relative_without_pressure: f64,
    /// Grid L2 norm of the divergence of v_re.
    pub divergence_l2: f64,
}

impl ResidualReport {
    /// How much adding the pressure gradient reduces the weighted residual.
    pub fn pressure_gain(&self) -> f64 {
        if self.momentum_weighted == 0.0 {
            if self.momentum_weighted_without_pressure == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            self.momentum_weighted_without_pressure / self.momentum_weighted
        }
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den.max(f64::MIN_POSITIVE)
    }
}

/// Strong-form residual for the profile `sigma v0 + v_re` with pressure `q`,
/// with spectral derivatives of `v_re` and `q`.
pub fn stationary_residual(
    v0: &GridJets,
    sigma: f64,
    v_re: &GridVectorField,
    q: &ScalarField,
) -> Result<ResidualReport> {
    v_re.grid.check_same(&q.grid)?;
    residual_from_parts(v0, sigma, v_re, &FieldDerivatives::spectral(v_re), &scalar_gradient(q))
}

/// Same as [`stationary_residual`] with the derivatives of `v_re` and the
/// pressure gradient supplied by the caller.
pub fn residual_from_parts(
    v0: &GridJets,
    sigma: f64,
    v_re: &GridVectorField,
    d: &FieldDerivatives,
    grad_q: &[Vec<f64>; 2],
) -> Result<ResidualReport> {
    let grid = v_re.grid;
    grid.check_same(&v0.value.grid)?;
    if !sigma.is_finite() {
        return Err(LerayError::DomainError(format!("sigma = {sigma}")));
    }
    let (g, lap) = (&d.grad, &d.lap);
    let radius = RESIDUAL_WINDOW * grid.half_width;
    let mut report = ResidualReport {
        window_radius: radius,
        ..Default::default()
    };
    let mut l2 = 0.0;
    for k in 0..grid.len() {
        let y = grid.point(k);
        let r2 = y[0] * y[0] + y[1] * y[1];
        if r2 > radius * radius {
            continue;
        }
        let w = 1.0 + r2;
        let a = [sigma * v0.value.u[0][k], sigma * v0.value.u[1][k]];
        let v = v_re.at(k);
        let mut res = [0.0; 2];
        let mut forcing = [0.0; 2];
        for c in 0..2 {
            let dv = [g[c][0][k], g[c][1][k]];
            let da = [sigma * v0.grad[c][0][k], sigma * v0.grad[c][1][k]];
            forcing[c] = a[0] * da[0] + a[1] * da[1];
            res[c] = -lap[c][k] - 0.5 * v[c] - 0.5 * (y[0] * dv[0] + y[1] * dv[1])
                + (a[0] + v[0]) * dv[0]
                + (a[1] + v[1]) * dv[1]
                + v[0] * da[0]
                + v[1] * da[1]
                + forcing[c];
        }
        let without = res[0].hypot(res[1]);
        let with = (res[0] + grad_q[0][k]).hypot(res[1] + grad_q[1][k]);
        l2 += with * with;
        report.momentum_weighted = report.momentum_weighted.max(w * with);
        report.momentum_weighted_without_pressure = report.momentum_weighted_without_pressure.max(w * without);
        report.reference = report.reference.max(w * forcing[0].hypot(forcing[1]));
    }
    report.momentum_l2 = (l2 * grid.cell_area()).sqrt();
    report.relative = ratio(report.momentum_weighted, report.reference);
    report.relative_without_pressure = ratio(report.momentum_weighted_without_pressure, report.reference);
    report.divergence_l2 = d.divergence_l2(&grid);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heat_lift::oseen_jet;

    fn jets_from(grid: Grid, f: impl Fn([f64; 2]) -> crate::heat_lift::Jet) -> GridJets {
        let mut value = GridVectorField::zeros(grid);
        let mut grad: [[Vec<f64>; 2]; 2] = Default::default();
        grad.iter_mut().flatten().for_each(|g| *g = vec![0.0; grid.len()]);
        for k in 0..grid.len() {
            let j = f(grid.point(k));
            for a in 0..2 {
                value.u[a][k] = j.value[a];
                for b in 0..2 {
                    grad[a][b][k] = j.grad[a][b];
                }
            }
        }
        GridJets { value, grad }
    }

    #[test]
    fn poisson_recovers_gaussian() {
        let grid = Grid::new(10.0, 128).unwrap();
        let source: Vec<f64> = (0..grid.len())
            .map(|k| {
                let p = grid.point(k);
                let r2 = p[0] * p[0] + p[1] * p[1];
                (4.0 - 4.0 * r2) * (-r2).exp()
            })
            .collect();
        let q = solve_pressure_poisson(&grid, &source);
        let mean = std::f64::consts::PI / (grid.len() as f64 * grid.cell_area());
        let err = (0..grid.len())
            .map(|k| {
                let p = grid.point(k);
                (q.data[k] - ((-(p[0] * p[0] + p[1] * p[1])).exp() - mean)).abs()
            })
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn source_mass_does_not_tilt_the_interior() {
        // -Lap q = exp(-r^2) has q'(r) = -(1 - exp(-r^2)) / (2r) in the plane.
        let grid = Grid::new(16.0, 128).unwrap();
        let source: Vec<f64> = (0..grid.len())
            .map(|k| {
                let p = grid.point(k);
                (-(p[0] * p[0] + p[1] * p[1])).exp()
            })
            .collect();
        let q = solve_pressure_poisson(&grid, &source);
        let g = scalar_gradient(&q);
        let mut worst = 0.0_f64;
        for k in 0..grid.len() {
            let p = grid.point(k);
            let r = p[0].hypot(p[1]);
            if r > 0.5 && r < 0.5 * grid.half_width {
                let dq = -(1.0 - (-r * r).exp()) / (2.0 * r);
                let radial = (g[0][k] * p[0] + g[1][k] * p[1]) / r;
                worst = worst.max((radial - dq).abs() / dq.abs());
            }
        }
        assert!(worst < 1e-3, "{worst}");
    }

    #[test]
    fn zero_fields_have_zero_residual() {
        let grid = Grid::new(8.0, 32).unwrap();
        let v0 = jets_from(grid, |_| crate::heat_lift::Jet::zero());
        let zero = GridVectorField::zeros(grid);
        let q = recover_pressure(&v0, &zero).unwrap();
        assert_eq!(q.max_abs(), 0.0);
        let r = stationary_residual(&v0, 1.0, &zero, &q).unwrap();
        assert_eq!(r.momentum_weighted, 0.0);
        assert_eq!(r.relative, 0.0);
        assert_eq!(r.pressure_gain(), 1.0);
        assert_eq!(r.window_radius, RESIDUAL_WINDOW * 8.0);
        assert!(matches!(
            stationary_residual(&v0, f64::NAN, &zero, &q),
            Err(LerayError::DomainError(_))
        ));
    }

    #[test]
    fn oseen_vortex_solves_the_profile_equation() {
        // The leftover comes from periodic truncation and halves as L doubles.
        let mut last = f64::INFINITY;
        for (l, n) in [(16.0, 128), (32.0, 256)] {
            let grid = Grid::new(l, n).unwrap();
            let v0 = jets_from(grid, |y| oseen_jet(2.0 * std::f64::consts::PI, y));
            let zero = GridVectorField::zeros(grid);
            let q = recover_pressure(&v0, &zero).unwrap();
            let r = stationary_residual(&v0, 1.0, &zero, &q).unwrap();
            assert_eq!(r.relative_without_pressure, 1.0);
            assert!(r.relative < 2.5e-2, "{}", r.relative);
            assert!(r.relative < 0.6 * last, "{} vs {last}", r.relative);
            last = r.relative;
        }
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let v0 = jets_from(Grid::new(8.0, 32).unwrap(), |_| crate::heat_lift::Jet::zero());
        let other = GridVectorField::zeros(Grid::new(8.0, 64).unwrap());
        assert_eq!(recover_pressure(&v0, &other).unwrap_err(), LerayError::GridMismatch);
    }

    #[test]
    fn derivatives_combine_linearly() {
        let grid = Grid::new(8.0, 64).unwrap();
        let v = GridVectorField::from_fn(grid, |y| {
            let e = (-(y[0] * y[0] + y[1] * y[1])).exp();
            [-y[1] * e, y[0] * e]
        });
        let d = FieldDerivatives::spectral(&v);
        let mut sum = FieldDerivatives::zeros(&grid);
        sum.add_scaled(2.0, &d);
        let d2 = FieldDerivatives::spectral(&v.scaled(2.0));
        for (a, b) in sum.grad.iter().flatten().zip(d2.grad.iter().flatten()) {
            assert!(a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12));
        }
        assert!(d.divergence_l2(&grid) < 1e-12, "{}", d.divergence_l2(&grid));
    }
}
