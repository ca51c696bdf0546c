//! Caloric lift `v0 = exp(Delta) u0` of homogeneous data, the Oseen vortex,
//! and the cutoff-corrected profile `v1`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LerayError, Result};
use crate::grid::{Grid, GridVectorField};
use crate::initial_data::{CircleTrace, HomogeneousField};
use crate::quadrature::Rule1D;

mod cutoff;
mod modes;

pub use cutoff::{build_cutoff_profile, cutoff_eta, CutoffProfile, SmallnessReport};
pub use modes::{radial_jet, ModalHeatLift};

/// Value and gradient of a vector field at a point; `grad[i][j] = d_j v_i`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Jet {
    pub value: [f64; 2],
    pub grad: [[f64; 2]; 2],
}

impl Jet {
    pub fn zero() -> Self {
        Jet::default()
    }

    pub fn divergence(&self) -> f64 {
        self.grad[0][0] + self.grad[1][1]
    }

    fn add(mut self, other: Jet) -> Jet {
        for i in 0..2 {
            self.value[i] += other.value[i];
            for j in 0..2 {
                self.grad[i][j] += other.grad[i][j];
            }
        }
        self
    }
}

/// Polar quadrature parameters for [`heat_lift_eval`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureParams {
    /// Width of each Gauss-Legendre panel in rho.
    pub panel_width: f64,
    /// Gauss-Legendre order per panel.
    pub order: usize,
    /// Trapezoid nodes in theta.
    pub angular_nodes: usize,
    /// Tail cutoff: the radial integral stops at |y| + tail.
    pub tail: f64,
    /// Maximum number of radial panels.
    pub max_panels: usize,
}

impl Default for QuadratureParams {
    fn default() -> Self {
        QuadratureParams {
            panel_width: 0.5,
            order: 16,
            angular_nodes: 256,
            tail: 12.0,
            max_panels: 4096,
        }
    }
}

impl QuadratureParams {
    fn validate(&self) -> Result<()> {
        if !(self.panel_width > 0.0) || self.order == 0 || self.angular_nodes == 0 || !(self.tail > 0.0) {
            return Err(LerayError::InvalidParams(format!("bad quadrature parameters {self:?}")));
        }
        Ok(())
    }
}

/// Heat lift at `y` by polar quadrature with default parameters.
pub fn heat_lift_eval(field: &HomogeneousField, y: [f64; 2]) -> Result<Jet> {
    heat_lift_eval_with(field, y, &QuadratureParams::default())
}

/// Heat lift at `y`: `int_0^Rmax int_S1 G(y - rho e) g(e) dtheta drho`, where
/// `g` is the circle trace; the polar Jacobian cancels the 1/|z| of u0.
pub fn heat_lift_eval_with(field: &HomogeneousField, y: [f64; 2], params: &QuadratureParams) -> Result<Jet> {
    params.validate()?;
    if field.trace.is_zero() {
        return Ok(Jet::zero());
    }
    let r_max = y[0].hypot(y[1]) + params.tail;
    let panels = (r_max / params.panel_width).ceil() as usize;
    if panels > params.max_panels {
        return Err(LerayError::QuadratureBudgetExceeded {
            needed: panels,
            limit: params.max_panels,
        });
    }
    let edges: Vec<f64> = (0..=panels)
        .map(|i| (i as f64 * params.panel_width).min(r_max))
        .collect();
    let radial = Rule1D::composite(&edges, params.order);

    let m = params.angular_nodes;
    let dtheta = 2.0 * PI / m as f64;
    let dirs: Vec<([f64; 2], [f64; 2])> = (0..m)
        .map(|k| {
            let th = k as f64 * dtheta;
            let (s, c) = th.sin_cos();
            ([c, s], field.on_circle(th))
        })
        .collect();

    let norm = dtheta / (4.0 * PI);
    let mut acc = [0.0f64; 6];
    for (&rho, &w) in radial.nodes.iter().zip(&radial.weights) {
        let mut ring = [0.0f64; 6];
        for (e, g) in &dirs {
            let d0 = y[0] - rho * e[0];
            let d1 = y[1] - rho * e[1];
            let gk = (-(d0 * d0 + d1 * d1) * 0.25).exp();
            ring[0] += gk * g[0];
            ring[1] += gk * g[1];
            // grad G = -(d/2) G
            ring[2] -= 0.5 * d0 * gk * g[0];
            ring[3] -= 0.5 * d1 * gk * g[0];
            ring[4] -= 0.5 * d0 * gk * g[1];
            ring[5] -= 0.5 * d1 * gk * g[1];
        }
        for (a, r) in acc.iter_mut().zip(ring) {
            *a += w * r;
        }
    }
    let s = |i: usize| acc[i] * norm;
    Ok(Jet {
        value: [s(0), s(1)],
        grad: [[s(2), s(3)], [s(4), s(5)]],
    })
}

/// `(1 - exp(-r^2/4)) / r^2` and `phi'(r)/r`, with series near the origin.
fn oseen_radial_parts(r: f64) -> (f64, f64) {
    let r2 = r * r;
    if r < 2.0 {
        let x = 0.25 * r2;
        let (mut phi, mut psi) = (0.0, 0.0);
        let mut pow = 1.0; // (-x)^k / (k+1)!
        for k in 0..30 {
            phi += pow;
            if k >= 1 {
                // k (-1)^k x^{k-1} / (k+1)!
                psi += k as f64 * pow / x.max(f64::MIN_POSITIVE);
            }
            pow *= -x / (k as f64 + 2.0);
        }
        if x == 0.0 {
            psi = -0.5;
        }
        (0.25 * phi, 0.125 * psi)
    } else {
        let e = (-0.25 * r2).exp();
        let phi = -(-0.25 * r2).exp_m1() / r2;
        (phi, e / (2.0 * r2) - 2.0 * phi / r2)
    }
}

/// Closed-form Oseen vortex at t = 1: `alpha/(2 pi) y_perp/|y|^2 (1 - exp(-|y|^2/4))`.
pub fn oseen_profile(alpha: f64, y: [f64; 2]) -> [f64; 2] {
    let c = alpha / (2.0 * PI);
    let (phi, _) = oseen_radial_parts(y[0].hypot(y[1]));
    [-c * y[1] * phi, c * y[0] * phi]
}

/// Oseen vortex with its gradient.
pub fn oseen_jet(alpha: f64, y: [f64; 2]) -> Jet {
    let c = alpha / (2.0 * PI);
    let (phi, psi) = oseen_radial_parts(y[0].hypot(y[1]));
    Jet {
        value: [-c * y[1] * phi, c * y[0] * phi],
        grad: [
            [-c * y[1] * psi * y[0], -c * (phi + y[1] * psi * y[1])],
            [c * (phi + y[0] * psi * y[0]), c * y[0] * psi * y[1]],
        ],
    }
}

/// Grid samples of v0 and its gradient; `grad[i][j]` holds `d_j v_i`.
#[derive(Debug, Clone)]
pub struct GridJets {
    pub value: GridVectorField,
    pub grad: [[Vec<f64>; 2]; 2],
}

/// The caloric lift of a homogeneous datum.
///
/// Pointwise evaluation splits the datum into its swirl, which lifts to the
/// Oseen vortex, and its radial part, which is lifted mode by mode through
/// tabulated Bessel profiles. [`LiftedProfile::eval_quadrature`] gives the
/// same values by direct polar quadrature.
#[derive(Debug, Clone)]
pub struct LiftedProfile {
    source: HomogeneousField,
    modal: ModalHeatLift,
    params: QuadratureParams,
    cache: Option<GridJets>,
}

impl LiftedProfile {
    pub fn new(source: HomogeneousField) -> Self {
        Self::with_params(source, QuadratureParams::default())
    }

    pub fn with_params(source: HomogeneousField, params: QuadratureParams) -> Self {
        let radial_part = CircleTrace {
            alpha: 0.0,
            ..source.trace.clone()
        };
        LiftedProfile {
            modal: ModalHeatLift::new(&radial_part),
            source,
            params,
            cache: None,
        }
    }

    pub fn source(&self) -> &HomogeneousField {
        &self.source
    }

    pub fn params(&self) -> &QuadratureParams {
        &self.params
    }

    pub fn eval(&self, y: [f64; 2]) -> Jet {
        let swirl = oseen_jet(self.source.trace.alpha, y);
        if self.modal.is_zero() {
            swirl
        } else {
            swirl.add(self.modal.eval(y))
        }
    }

    pub fn eval_quadrature(&self, y: [f64; 2]) -> Result<Jet> {
        heat_lift_eval_with(&self.source, y, &self.params)
    }

    /// Samples v0 and its gradient at every node of `grid`.
    pub fn sample(&self, grid: &Grid) -> Result<GridJets> {
        grid.validate()?;
        if let Some(c) = &self.cache {
            if c.value.grid == *grid {
                return Ok(c.clone());
            }
        }
        let n = grid.n;
        let jets: Vec<Jet> = (0..n)
            .into_par_iter()
            .flat_map_iter(|j| (0..n).map(move |i| self.eval(grid.point(j * n + i))))
            .collect();
        let mut value = GridVectorField::zeros(*grid);
        let mut grad: [[Vec<f64>; 2]; 2] = Default::default();
        for row in grad.iter_mut() {
            for g in row.iter_mut() {
                *g = vec![0.0; grid.len()];
            }
        }
        for (k, jet) in jets.iter().enumerate() {
            for a in 0..2 {
                value.u[a][k] = jet.value[a];
                for b in 0..2 {
                    grad[a][b][k] = jet.grad[a][b];
                }
            }
        }
        Ok(GridJets { value, grad })
    }

    /// Samples `grid` once and keeps the result for later calls.
    pub fn cache_grid(&mut self, grid: &Grid) -> Result<&GridJets> {
        let jets = self.sample(grid)?;
        Ok(self.cache.insert(jets))
    }

    pub fn cached(&self) -> Option<&GridJets> {
        self.cache.as_ref()
    }
}

/// v0 sampled at every node of `grid`.
pub fn lift_to_grid(field: &HomogeneousField, grid: &Grid) -> Result<GridVectorField> {
    if field.trace.is_zero() {
        grid.validate()?;
        return Ok(GridVectorField::zeros(*grid));
    }
    Ok(LiftedProfile::new(field.clone()).sample(grid)?.value)
}
