//! Off-grid evaluation of profile fields and their self-similar rescaling.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{LerayError, Result};
use crate::grid::{Grid, GridVectorField};
use crate::heat_lift::LiftedProfile;

/// Handoff radius of the far-field law, as a fraction of the half-width.
pub const HANDOFF_FRACTION: f64 = 0.9;
/// Inner radius of the amplitude fit, as a fraction of the half-width.
pub const FIT_INNER_FRACTION: f64 = 0.7;
const ANGULAR_SAMPLES: usize = 4096;

const LAGRANGE_DENOM: [f64; 6] = [-120.0, 24.0, -12.0, 12.0, -24.0, 120.0];

/// Six-point Lagrange weights on nodes 0..5 at position `u`.
#[inline]
fn lagrange6(u: f64) -> [f64; 6] {
    let d = [u, u - 1.0, u - 2.0, u - 3.0, u - 4.0, u - 5.0];
    let mut w = [0.0; 6];
    for m in 0..6 {
        let mut p = 1.0;
        for (q, dq) in d.iter().enumerate() {
            if q != m {
                p *= dq;
            }
        }
        w[m] = p / LAGRANGE_DENOM[m];
    }
    w
}

/// Tensor six-point Lagrange interpolation of a grid field (periodic
/// indexing at the edges).
pub fn interpolate(field: &GridVectorField, y: [f64; 2]) -> [f64; 2] {
    let g = field.grid;
    let n = g.n as i64;
    let h = g.spacing();
    let tx = (y[0] + g.half_width) / h;
    let ty = (y[1] + g.half_width) / h;
    let ix = tx.floor() as i64 - 2;
    let iy = ty.floor() as i64 - 2;
    let wx = lagrange6(tx - ix as f64);
    let wy = lagrange6(ty - iy as f64);
    let mut out = [0.0; 2];
    for (b, wyb) in wy.iter().enumerate() {
        let row = (iy + b as i64).rem_euclid(n) as usize * g.n;
        let mut acc = [0.0; 2];
        for (a, wxa) in wx.iter().enumerate() {
            let k = row + (ix + a as i64).rem_euclid(n) as usize;
            acc[0] += wxa * field.u[0][k];
            acc[1] += wxa * field.u[1][k];
        }
        out[0] += wyb * acc[0];
        out[1] += wyb * acc[1];
    }
    out
}

/// A grid field extended to the whole plane: Lagrange interpolation inside
/// the handoff radius, `v(R_h e) (R_h/|y|)^2` outside it.
#[derive(Debug, Clone)]
pub struct GridProfile {
    field: GridVectorField,
    handoff: f64,
    trace: Vec<[f64; 2]>,
    amplitude: f64,
}

impl GridProfile {
    pub fn new(field: GridVectorField) -> Self {
        let l = field.grid.half_width;
        let handoff = HANDOFF_FRACTION * l;
        let trace = (0..ANGULAR_SAMPLES)
            .map(|k| {
                let (s, c) = (2.0 * PI * k as f64 / ANGULAR_SAMPLES as f64).sin_cos();
                interpolate(&field, [handoff * c, handoff * s])
            })
            .collect();
        let amplitude = fit_amplitude(&field, FIT_INNER_FRACTION * l, handoff);
        GridProfile {
            field,
            handoff,
            trace,
            amplitude,
        }
    }

    pub fn field(&self) -> &GridVectorField {
        &self.field
    }

    pub fn handoff_radius(&self) -> f64 {
        self.handoff
    }

    /// Amplitude `A` of the best `A |y|^-2` fit to the shell values over
    /// [0.7 L, 0.9 L] (geometric mean of `|v| r^2`).
    pub fn far_field_amplitude(&self) -> f64 {
        self.amplitude
    }

    /// The frozen angular structure at the handoff radius.
    fn far(&self, y: [f64; 2], r: f64) -> [f64; 2] {
        let m = ANGULAR_SAMPLES as f64;
        let t = y[1].atan2(y[0]).rem_euclid(2.0 * PI) / (2.0 * PI) * m;
        let i = t.floor() as i64;
        let u = t - i as f64;
        // cubic Lagrange on i-1..i+2
        let w = [
            -u * (u - 1.0) * (u - 2.0) / 6.0,
            (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0,
            -(u + 1.0) * u * (u - 2.0) / 2.0,
            (u + 1.0) * u * (u - 1.0) / 6.0,
        ];
        let mut v = [0.0; 2];
        for (q, wq) in w.iter().enumerate() {
            let k = (i - 1 + q as i64).rem_euclid(ANGULAR_SAMPLES as i64) as usize;
            v[0] += wq * self.trace[k][0];
            v[1] += wq * self.trace[k][1];
        }
        let scale = (self.handoff / r).powi(2);
        [v[0] * scale, v[1] * scale]
    }

    pub fn eval(&self, y: [f64; 2]) -> [f64; 2] {
        let r = y[0].hypot(y[1]);
        if r > self.handoff {
            self.far(y, r)
        } else {
            interpolate(&self.field, y)
        }
    }
}

fn fit_amplitude(field: &GridVectorField, r_in: f64, r_out: f64) -> f64 {
    let g = field.grid;
    let mut sum = 0.0;
    let mut count = 0usize;
    for k in 0..g.len() {
        let p = g.point(k);
        let r = p[0].hypot(p[1]);
        if r < r_in || r > r_out {
            continue;
        }
        let v = field.u[0][k].hypot(field.u[1][k]);
        if v > 0.0 {
            sum += (v * r * r).ln();
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        (sum / count as f64).exp()
    }
}

/// Something that can be evaluated anywhere in the plane.
#[derive(Clone)]
pub enum ProfileProvider {
    Zero,
    Grid(GridProfile),
    Lift(Box<LiftedProfile>),
    Function(Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>),
}

impl fmt::Debug for ProfileProvider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProfileProvider::Zero => write!(f, "Zero"),
            ProfileProvider::Grid(g) => write!(f, "Grid(n = {})", g.field.grid.n),
            ProfileProvider::Lift(l) => write!(f, "Lift({:?})", l.source().trace),
            ProfileProvider::Function(_) => write!(f, "Function"),
        }
    }
}

impl ProfileProvider {
    pub fn grid_field(field: GridVectorField) -> Self {
        ProfileProvider::Grid(GridProfile::new(field))
    }

    pub fn lift(profile: LiftedProfile) -> Self {
        ProfileProvider::Lift(Box::new(profile))
    }

    pub fn function(f: impl Fn([f64; 2]) -> [f64; 2] + Send + Sync + 'static) -> Self {
        ProfileProvider::Function(Arc::new(f))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            ProfileProvider::Zero => true,
            ProfileProvider::Grid(g) => g.field.is_zero(),
            ProfileProvider::Lift(l) => l.source().trace.is_zero(),
            ProfileProvider::Function(_) => false,
        }
    }

    #[inline]
    pub fn eval(&self, y: [f64; 2]) -> [f64; 2] {
        match self {
            ProfileProvider::Zero => [0.0, 0.0],
            ProfileProvider::Grid(g) => g.eval(y),
            ProfileProvider::Lift(l) => l.eval(y).value,
            ProfileProvider::Function(f) => f(y),
        }
    }
}

/// Samples `y -> provider(y / sqrt(s))` on `grid`.
pub fn self_similar_sample(provider: &ProfileProvider, s: f64, grid: &Grid) -> Result<GridVectorField> {
    if !(s > 0.0 && s < 1.0) {
        return Err(LerayError::DomainError(format!(
            "rescaling time s = {s} is outside (0, 1)"
        )));
    }
    grid.validate()?;
    if provider.is_zero() {
        return Ok(GridVectorField::zeros(*grid));
    }
    let inv = 1.0 / s.sqrt();
    Ok(GridVectorField::from_fn(*grid, |p| {
        provider.eval([p[0] * inv, p[1] * inv])
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump(p: [f64; 2]) -> [f64; 2] {
        [1.0 / (1.0 + p[0] * p[0] + p[1] * p[1]), 0.0]
    }

    #[test]
    fn interpolation_is_exact_at_nodes_and_accurate_between() {
        let g = Grid::new(16.0, 128).unwrap();
        let f = GridVectorField::from_fn(g, bump);
        for k in [0, 77, 4000, 8256, 16000] {
            let v = interpolate(&f, g.point(k));
            assert!((v[0] - f.u[0][k]).abs() < 1e-15);
        }
        for &y in &[[0.1, 0.2], [3.33, -2.71], [-7.9, 5.05]] {
            let v = interpolate(&f, y);
            assert!((v[0] - bump(y)[0]).abs() < 1e-3, "{y:?}");
        }
    }

    #[test]
    fn rescaled_closed_form() {
        let g = Grid::new(16.0, 128).unwrap();
        let provider = ProfileProvider::grid_field(GridVectorField::from_fn(g, bump));
        let out = self_similar_sample(&provider, 0.25, &g).unwrap();
        let mut worst = 0.0f64;
        for k in 0..g.len() {
            let p = g.point(k);
            if 2.0 * p[0].hypot(p[1]) > 0.85 * 16.0 {
                continue;
            }
            let exact = 1.0 / (1.0 + 4.0 * (p[0] * p[0] + p[1] * p[1]));
            worst = worst.max((out.u[0][k] - exact).abs());
            assert!(out.u[1][k].abs() < 1e-15);
        }
        assert!(worst <= 1e-4, "{worst}");
    }

    #[test]
    fn rescaling_near_one_is_the_identity() {
        let g = Grid::new(8.0, 32).unwrap();
        let f = GridVectorField::from_fn(g, bump);
        let provider = ProfileProvider::grid_field(f.clone());
        let out = self_similar_sample(&provider, 1.0 - 1e-15, &g).unwrap();
        for k in 0..g.len() {
            let p = g.point(k);
            if p[0].hypot(p[1]) < 0.85 * 8.0 {
                assert!((out.u[0][k] - f.u[0][k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_provider_and_domain() {
        let g = Grid::new(8.0, 16).unwrap();
        assert!(self_similar_sample(&ProfileProvider::Zero, 0.5, &g).unwrap().is_zero());
        assert!(matches!(
            self_similar_sample(&ProfileProvider::Zero, 1.0, &g),
            Err(LerayError::DomainError(_))
        ));
        assert!(self_similar_sample(&ProfileProvider::Zero, 0.0, &g).is_err());
    }

    #[test]
    fn far_field_is_continuous_at_handoff() {
        let g = Grid::new(16.0, 64).unwrap();
        let p = GridProfile::new(GridVectorField::from_fn(g, |y| {
            let r2 = 1.0 + y[0] * y[0] + y[1] * y[1];
            [(1.0 + 0.1 * y[1]) / r2, 0.5 / r2]
        }));
        let rh = p.handoff_radius();
        for k in 0..17 {
            let (s, c) = (0.37 * k as f64).sin_cos();
            let inside = p.eval([(rh - 1e-9) * c, (rh - 1e-9) * s]);
            let outside = p.eval([(rh + 1e-9) * c, (rh + 1e-9) * s]);
            assert!((inside[0] - outside[0]).abs() < 1e-9);
            assert!((inside[1] - outside[1]).abs() < 1e-9);
        }
        let amp = p.far_field_amplitude();
        assert!((amp - 1.25f64.sqrt()).abs() < 0.1, "{amp}");
    }

    #[test]
    fn lift_provider_evaluates_the_caloric_lift() {
        let source = crate::build_homogeneous_field(crate::CircleTrace::swirl(3.0));
        let p = ProfileProvider::lift(LiftedProfile::new(source));
        assert!(!p.is_zero());
        for y in [[0.4, -0.2], [2.0, 1.5], [-7.0, 3.0]] {
            let (a, b) = (p.eval(y), crate::heat_lift::oseen_profile(3.0, y));
            assert!((a[0] - b[0]).hypot(a[1] - b[1]) <= 1e-8 * b[0].hypot(b[1]));
        }
        let zero = ProfileProvider::lift(LiftedProfile::new(crate::build_homogeneous_field(
            crate::CircleTrace::zero(),
        )));
        assert!(zero.is_zero());
    }
}
