//! Cutoff-corrected profile `v1 = eta v0 + w`, where `w = -grad Phi` and
//! `Delta Phi = v0 . grad eta`, so that `div v1 = 0`.
//!
//! The source `g = eta'(r) v0_r` has angular modes `eta'(r) P_n(r)` with
//! `P_n = (R_{n+1} + R_{n-1}) / 2`. Each mode of the log potential is
//!
//! ```text
//! Phi_n(r) = -1/(2n) [ r^-n int_0^r g_n rho^{n+1} + r^n int_r^inf g_n rho^{1-n} ].
//! ```

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LerayError, Result};
use crate::grid::{Grid, GridVectorField};
use crate::quadrature::{gauss_legendre, pairwise_sum};
use crate::spectral::{radial_window, smooth_step, windowed_divergence};

use super::modes::ModeProfile;
use super::{Jet, LiftedProfile};

const CUMULATIVE_CELLS: usize = 512;
const CELL_ORDER: usize = 10;
/// Cells per direction of the polar midpoint rule used by [`CutoffProfile::w_kernel`].
pub const KERNEL_CELLS: usize = 256;

/// The radial cutoff: 0 for r <= r0, 1 for r >= 2 r0. Returns (eta, eta').
pub fn cutoff_eta(r0: f64, r: f64) -> (f64, f64) {
    let (s, ds) = smooth_step((r - r0) / r0);
    (s, ds / r0)
}

/// Radial mode `n` of the potential, with cumulative moment tables over the
/// annulus.
#[derive(Debug, Clone)]
struct ModePotential {
    n: usize,
    cos: f64,
    sin: f64,
    /// int_{r0}^{r_k} g rho^{n+1} at the cell edges
    inner: Vec<f64>,
    /// int_{r_k}^{2 r0} g rho^{1-n} at the cell edges
    outer: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Potential {
    r0: f64,
    profiles: Vec<ModeProfile>,
    modes: Vec<ModePotential>,
    gl: (Vec<f64>, Vec<f64>),
}

impl Potential {
    fn new(profile: &LiftedProfile, r0: f64) -> Self {
        let trace = &profile.source().trace;
        let degree = trace.degree();
        let profiles = (0..=degree + 1).map(ModeProfile::new).collect();
        let mut pot = Potential {
            r0,
            profiles,
            modes: Vec::new(),
            gl: gauss_legendre(CELL_ORDER),
        };
        for n in 1..=degree {
            let a = trace.f_cos.get(n - 1).copied().unwrap_or(0.0);
            let b = trace.f_sin.get(n - 1).copied().unwrap_or(0.0);
            if a == 0.0 && b == 0.0 {
                continue;
            }
            let dr = r0 / CUMULATIVE_CELLS as f64;
            let mut inner = vec![0.0; CUMULATIVE_CELLS + 1];
            for k in 0..CUMULATIVE_CELLS {
                let lo = r0 + k as f64 * dr;
                inner[k + 1] = inner[k] + pot.integrate(n, lo, lo + dr, n as f64 + 1.0);
            }
            let mut outer = vec![0.0; CUMULATIVE_CELLS + 1];
            for k in (0..CUMULATIVE_CELLS).rev() {
                let lo = r0 + k as f64 * dr;
                outer[k] = outer[k + 1] + pot.integrate(n, lo, lo + dr, 1.0 - n as f64);
            }
            pot.modes.push(ModePotential {
                n,
                cos: a,
                sin: b,
                inner,
                outer,
            });
        }
        pot
    }

    /// Radial source profile `eta'(r) P_n(r)` for a unit coefficient.
    fn source(&self, n: usize, r: f64) -> f64 {
        let (_, de) = cutoff_eta(self.r0, r);
        if de == 0.0 {
            return 0.0;
        }
        let p = 0.5 * (self.profiles[n + 1].eval(r).0 + self.profiles[n - 1].eval(r).0);
        de * p
    }

    fn integrate(&self, n: usize, a: f64, b: f64, power: f64) -> f64 {
        let (x, w) = &self.gl;
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        x.iter()
            .zip(w)
            .map(|(xi, wi)| {
                let r = mid + half * xi;
                wi * self.source(n, r) * r.powf(power)
            })
            .sum::<f64>()
            * half
    }

    /// (int_0^r g rho^{n+1}, int_r^inf g rho^{1-n}) for mode `m`.
    fn moments(&self, m: &ModePotential, r: f64) -> (f64, f64) {
        let r0 = self.r0;
        if r <= r0 {
            return (0.0, m.outer[0]);
        }
        if r >= 2.0 * r0 {
            return (m.inner[CUMULATIVE_CELLS], 0.0);
        }
        let dr = r0 / CUMULATIVE_CELLS as f64;
        let k = (((r - r0) / dr).floor() as usize).min(CUMULATIVE_CELLS - 1);
        let lo = r0 + k as f64 * dr;
        let nf = m.n as f64;
        let i1 = m.inner[k] + self.integrate(m.n, lo, r, nf + 1.0);
        let i2 = m.outer[k] - self.integrate(m.n, lo, r, 1.0 - nf);
        (i1, i2)
    }

    /// The correction `w = -grad Phi` and its gradient `-Hess Phi`.
    fn w_jet(&self, y: [f64; 2]) -> Jet {
        let r = y[0].hypot(y[1]);
        let mut grad_phi = [0.0; 2];
        let mut hess = [[0.0; 2]; 2];
        if r < 1e-6 {
            // Phi_n = -(1/2n) I2 r^n near the origin
            for m in &self.modes {
                let k = -m.outer[0] / (2.0 * m.n as f64);
                match m.n {
                    1 => {
                        grad_phi[0] += k * m.cos;
                        grad_phi[1] += k * m.sin;
                    }
                    2 => {
                        hess[0][0] += 2.0 * k * m.cos;
                        hess[1][1] -= 2.0 * k * m.cos;
                        hess[0][1] += 2.0 * k * m.sin;
                        hess[1][0] += 2.0 * k * m.sin;
                    }
                    _ => {}
                }
            }
        } else {
            let (c, s) = (y[0] / r, y[1] / r);
            // polar derivatives of Phi: r, rr, phi, r phi, phi phi
            let (mut pr, mut prr, mut pf, mut prf, mut pff) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for m in &self.modes {
                let nf = m.n as f64;
                let (i1, i2) = self.moments(m, r);
                let f = -(r.powf(-nf) * i1 + r.powf(nf) * i2) / (2.0 * nf);
                let df = 0.5 * (r.powf(-nf - 1.0) * i1 - r.powf(nf - 1.0) * i2);
                let ddf = self.source(m.n, r) + nf * nf * f / (r * r) - df / r;
                let (sn, cn) = (nf * y[1].atan2(y[0])).sin_cos();
                let ang = m.cos * cn + m.sin * sn;
                let dang = nf * (m.sin * cn - m.cos * sn);
                let ddang = -nf * nf * ang;
                pr += df * ang;
                prr += ddf * ang;
                pf += f * dang;
                prf += df * dang;
                pff += f * ddang;
            }
            grad_phi = [c * pr - s * pf / r, s * pr + c * pf / r];
            let a = pr / r + pff / (r * r);
            let b = prf / r - pf / (r * r);
            hess[0][0] = c * c * prr + s * s * a - 2.0 * c * s * b;
            hess[1][1] = s * s * prr + c * c * a + 2.0 * c * s * b;
            hess[0][1] = c * s * (prr - a) + (c * c - s * s) * b;
            hess[1][0] = hess[0][1];
        }
        Jet {
            value: [-grad_phi[0], -grad_phi[1]],
            grad: [[-hess[0][0], -hess[0][1]], [-hess[1][0], -hess[1][1]]],
        }
    }
}

/// Size of v1 and its gradient on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallnessReport {
    pub v1_max: f64,
    pub grad_v1_max: f64,
    pub w_max: f64,
}

/// `v1 = eta_{R0} v0 + w` sampled on a grid.
#[derive(Debug, Clone)]
pub struct CutoffProfile {
    pub r0: f64,
    pub v1: GridVectorField,
    pub w: GridVectorField,
    /// Human-readable description of the cutoff.
    pub eta: String,
    pub smallness: SmallnessReport,
    /// Integral of the source `v0 . grad eta` over the plane.
    pub source_integral: f64,
    /// Grid L2 norm of div v1 from the pointwise gradients.
    pub divergence_l2: f64,
    /// Grid L2 norm of the spectral div v1, windowed away from the
    /// truncation boundary. Limited by how well the grid resolves eta.
    pub spectral_divergence_l2: f64,
    lifted: LiftedProfile,
    potential: Potential,
}

impl CutoffProfile {
    /// v1 and its gradient at a point.
    pub fn v1_jet(&self, y: [f64; 2]) -> Jet {
        let r = y[0].hypot(y[1]);
        let (eta, de) = cutoff_eta(self.r0, r);
        let w = self.potential.w_jet(y);
        if eta == 0.0 && de == 0.0 {
            return w;
        }
        let v0 = self.lifted.eval(y);
        let e = if r > 0.0 { [y[0] / r, y[1] / r] } else { [0.0, 0.0] };
        let mut out = w;
        for i in 0..2 {
            out.value[i] += eta * v0.value[i];
            for j in 0..2 {
                out.grad[i][j] += eta * v0.grad[i][j] + v0.value[i] * de * e[j];
            }
        }
        out
    }

    /// The correction w at a point, from the mode potentials.
    pub fn w_jet(&self, y: [f64; 2]) -> Jet {
        self.potential.w_jet(y)
    }

    /// Source `v0 . grad eta` at a point.
    pub fn source(&self, y: [f64; 2]) -> f64 {
        let r = y[0].hypot(y[1]);
        let (_, de) = cutoff_eta(self.r0, r);
        if de == 0.0 {
            return 0.0;
        }
        let v = self.lifted.eval(y).value;
        de * (v[0] * y[0] + v[1] * y[1]) / r
    }

    /// w by direct quadrature of the log-potential gradient kernel,
    /// `w(y) = -1/(2 pi) int (y - z)/|y - z|^2 g(z) dz`, with a polar
    /// midpoint rule of `KERNEL_CELLS^2` cells over the source annulus.
    pub fn w_kernel(&self, y: [f64; 2]) -> [f64; 2] {
        let cells = KERNEL_CELLS;
        let dr = self.r0 / cells as f64;
        let dphi = 2.0 * PI / cells as f64;
        let rows: Vec<[f64; 2]> = (0..cells)
            .map(|i| {
                let rho = self.r0 + (i as f64 + 0.5) * dr;
                let mut acc = [0.0; 2];
                for k in 0..cells {
                    let (s, c) = ((k as f64 + 0.5) * dphi).sin_cos();
                    let z = [rho * c, rho * s];
                    let g = self.source(z) * rho;
                    let d = [y[0] - z[0], y[1] - z[1]];
                    let d2 = d[0] * d[0] + d[1] * d[1];
                    if d2 == 0.0 {
                        continue;
                    }
                    acc[0] += g * d[0] / d2;
                    acc[1] += g * d[1] / d2;
                }
                acc
            })
            .collect();
        let scale = -dr * dphi / (2.0 * PI);
        let xs: Vec<f64> = rows.iter().map(|a| a[0]).collect();
        let ys: Vec<f64> = rows.iter().map(|a| a[1]).collect();
        [scale * pairwise_sum(&xs), scale * pairwise_sum(&ys)]
    }
}

/// Builds `v1 = eta_{R0} v0 + w` on `grid`.
pub fn build_cutoff_profile(v0: &LiftedProfile, r0: f64, grid: &Grid) -> Result<CutoffProfile> {
    grid.validate()?;
    if !(r0 > 1.0) {
        return Err(LerayError::InvalidParams(format!(
            "cutoff radius must exceed 1, got {r0}"
        )));
    }
    if 2.0 * r0 >= grid.half_width {
        return Err(LerayError::GeometryError(format!(
            "cutoff support 2 R0 = {} does not fit in half-width {}",
            2.0 * r0,
            grid.half_width
        )));
    }
    let potential = Potential::new(v0, r0);
    let mut profile = CutoffProfile {
        r0,
        v1: GridVectorField::zeros(*grid),
        w: GridVectorField::zeros(*grid),
        eta: format!("smooth step exp(-1/t) on {r0} <= |x| <= {}", 2.0 * r0),
        smallness: SmallnessReport {
            v1_max: 0.0,
            grad_v1_max: 0.0,
            w_max: 0.0,
        },
        source_integral: 0.0,
        divergence_l2: 0.0,
        spectral_divergence_l2: 0.0,
        lifted: v0.clone(),
        potential,
    };
    let n = grid.n;
    let jets: Vec<(Jet, Jet)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|j| {
            let p = &profile;
            (0..n).map(move |i| {
                let y = grid.point(j * n + i);
                (p.v1_jet(y), p.w_jet(y))
            })
        })
        .collect();
    let mut grad_max = 0.0f64;
    let mut div_sq = Vec::with_capacity(jets.len());
    for (k, (v1, w)) in jets.iter().enumerate() {
        div_sq.push(v1.divergence().powi(2));
        for a in 0..2 {
            profile.v1.u[a][k] = v1.value[a];
            profile.w.u[a][k] = w.value[a];
        }
        let g = v1.grad.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
        grad_max = grad_max.max(g);
    }
    profile.smallness = SmallnessReport {
        v1_max: profile.v1.max_norm(),
        grad_v1_max: grad_max,
        w_max: profile.w.max_norm(),
    };

    // source integral by the same polar midpoint rule as the kernel quadrature
    let cells = KERNEL_CELLS;
    let dr = r0 / cells as f64;
    let dphi = 2.0 * PI / cells as f64;
    let ring: Vec<f64> = (0..cells)
        .map(|i| {
            let rho = r0 + (i as f64 + 0.5) * dr;
            let vals: Vec<f64> = (0..cells)
                .map(|k| {
                    let (s, c) = ((k as f64 + 0.5) * dphi).sin_cos();
                    profile.source([rho * c, rho * s]) * rho
                })
                .collect();
            pairwise_sum(&vals)
        })
        .collect();
    profile.source_integral = pairwise_sum(&ring) * dr * dphi;

    let l = grid.half_width;
    let div = windowed_divergence(&profile.v1, radial_window(0.6 * l, 0.9 * l));
    profile.spectral_divergence_l2 = div.l2_norm();
    profile.divergence_l2 = (pairwise_sum(&div_sq) * grid.cell_area()).sqrt();
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial_data::{build_homogeneous_field, CircleTrace};

    fn lifted(trace: CircleTrace) -> LiftedProfile {
        LiftedProfile::new(build_homogeneous_field(trace))
    }

    fn cos_datum() -> LiftedProfile {
        lifted(CircleTrace::new(2.0 * PI, vec![1.0], vec![], 1.0).unwrap())
    }

    #[test]
    fn eta_plateaus() {
        assert_eq!(cutoff_eta(4.0, 3.0), (0.0, 0.0));
        assert_eq!(cutoff_eta(4.0, 9.0), (1.0, 0.0));
        let (e, de) = cutoff_eta(4.0, 6.0);
        assert!((e - 0.5).abs() < 1e-15 && de > 0.0);
    }

    #[test]
    fn zero_datum_gives_zero_profile() {
        let g = Grid::new(16.0, 32).unwrap();
        let p = build_cutoff_profile(&lifted(CircleTrace::zero()), 4.0, &g).unwrap();
        assert!(p.v1.is_zero());
        assert!(p.w.is_zero());
    }

    #[test]
    fn geometry_is_checked() {
        let g = Grid::new(8.0, 32).unwrap();
        let err = build_cutoff_profile(&cos_datum(), 4.0, &g).unwrap_err();
        assert!(matches!(err, LerayError::GeometryError(_)));
    }

    #[test]
    fn mode_potential_matches_kernel_quadrature() {
        let g = Grid::new(16.0, 32).unwrap();
        let trace = CircleTrace::new(0.0, vec![1.0, 0.0, 0.4], vec![0.0, 0.7], 1.0).unwrap();
        let p = build_cutoff_profile(&lifted(trace), 2.0, &g).unwrap();
        for &y in &[[0.0, 0.0], [1.0, 0.5], [5.0, 1.0], [-7.0, 3.0], [10.0, -10.0]] {
            let a = p.w_jet(y).value;
            let b = p.w_kernel(y);
            let scale = a[0].hypot(a[1]).max(1e-12);
            assert!(
                (a[0] - b[0]).hypot(a[1] - b[1]) < 1e-4 * scale,
                "y {y:?}: {a:?} vs {b:?}"
            );
        }
    }

    #[test]
    fn w_gradient_matches_differences() {
        let g = Grid::new(16.0, 32).unwrap();
        let p = build_cutoff_profile(&cos_datum(), 2.0, &g).unwrap();
        for &y in &[[0.0, 0.0], [1.0, 0.5], [2.5, 1.0], [3.0, -1.5], [6.0, 2.0]] {
            let jet = p.w_jet(y);
            let h = 1e-5;
            for j in 0..2 {
                let mut yp = y;
                let mut ym = y;
                yp[j] += h;
                ym[j] -= h;
                let wp = p.w_jet(yp).value;
                let wm = p.w_jet(ym).value;
                for i in 0..2 {
                    let fd = (wp[i] - wm[i]) / (2.0 * h);
                    assert!(
                        (jet.grad[i][j] - fd).abs() < 1e-7,
                        "y {y:?} ({i},{j}): {} vs {fd}",
                        jet.grad[i][j]
                    );
                }
            }
            // div w = -source
            assert!((jet.divergence() + p.source(y)).abs() < 1e-10);
        }
    }

    #[test]
    fn v1_is_divergence_free_and_source_cancels() {
        let g = Grid::new(32.0, 128).unwrap();
        let p = build_cutoff_profile(&cos_datum(), 4.0, &g).unwrap();
        assert!(p.source_integral.abs() <= 1e-10, "{}", p.source_integral);
        assert!(p.divergence_l2 <= 1e-8, "{}", p.divergence_l2);
        assert!(p.spectral_divergence_l2 <= 1e-2, "{}", p.spectral_divergence_l2);
    }

    #[test]
    fn w_decays_like_inverse_square() {
        let g = Grid::new(32.0, 64).unwrap();
        let p = build_cutoff_profile(&cos_datum(), 4.0, &g).unwrap();
        let c: Vec<f64> = [12.0, 13.0, 14.0, 15.0, 16.0]
            .iter()
            .map(|&r| {
                let w = p.w_kernel([r * 0.6, r * 0.8]);
                w[0].hypot(w[1]) * r * r
            })
            .collect();
        let (lo, hi) = c.iter().fold((f64::MAX, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
        assert!(lo > 0.0 && hi / lo < 1.5, "{c:?}");
    }

    #[test]
    fn smallness_improves_with_radius() {
        let g = Grid::new(32.0, 64).unwrap();
        let datum = cos_datum();
        let a = build_cutoff_profile(&datum, 4.0, &g).unwrap();
        let b = build_cutoff_profile(&datum, 8.0, &g).unwrap();
        assert!(b.smallness.v1_max < a.smallness.v1_max);
    }
}
