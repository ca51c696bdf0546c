//! The Duhamel operator
//!
//! ```text
//! Theta = int_0^1 exp((1-s) Delta) P div [ s^-1 F(. / sqrt s) ] ds
//! ```
//!
//! evaluated at t = 1 for a self-similar quadratic force `F = U (x) U`.
//!
//! At small s the rescaled tensor `s^-1 F(x / sqrt s)` concentrates at the
//! origin on a scale the grid cannot resolve. For those nodes the tensor is
//! split with a radial weight `chi`: the smooth outer part `(1 - chi) T` is
//! sampled on the grid, and the Fourier transform of the core `chi T` is
//! computed by a graded tensor Gauss-Legendre rule on the low modes that
//! survive the heat factor.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{LerayError, Result};
use crate::grid::{Grid, GridVectorField};
use crate::quadrature::{gauss_legendre, Rule1D};
use crate::spectral::{accumulate_oseen_div, from_spectrum, real_to_spectrum, Spectrum};

mod provider;

pub use provider::{
    interpolate, self_similar_sample, GridProfile, ProfileProvider, FIT_INNER_FRACTION, HANDOFF_FRACTION,
};

/// Default number of nodes in s.
pub const DEFAULT_NODES: usize = 64;
/// Nodes with s below this use the core split.
pub const CORE_THRESHOLD: f64 = 0.15;
const CORE_CENTER: f64 = 3.2;
const CORE_WIDTH: f64 = 0.5;
const CORE_RADIUS: f64 = 6.5;
const CORE_PANEL: f64 = 1.0;
const CORE_ORDER_OUTER: usize = 10;
const CORE_GRADING: f64 = 3.0;
const CORE_ORDER_INNER: usize = 8;
/// Core modes are kept while `(1 - s)|k|^2` is below this.
const BAND_EXPONENT: f64 = 30.0;
const NODE_CHUNK: usize = 8;

/// Quadrature in s from the substitution `s = sin^2(pi tau / 2)` with
/// Gauss-Legendre nodes in tau.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSchedule {
    pub n_nodes: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Default for QuadratureSchedule {
    fn default() -> Self {
        QuadratureSchedule::new(DEFAULT_NODES).expect("default schedule")
    }
}

impl QuadratureSchedule {
    pub fn new(n_nodes: usize) -> Result<Self> {
        if n_nodes == 0 {
            return Err(LerayError::InvalidParams("quadrature needs at least one node".into()));
        }
        let (t, w) = gauss_legendre(n_nodes);
        let half_pi = 0.5 * std::f64::consts::PI;
        let mut nodes = Vec::with_capacity(n_nodes);
        let mut weights = Vec::with_capacity(n_nodes);
        for (ti, wi) in t.iter().zip(&w) {
            let tau = 0.5 * (ti + 1.0);
            nodes.push((half_pi * tau).sin().powi(2));
            weights.push(0.5 * wi * half_pi * (2.0 * half_pi * tau).sin());
        }
        Ok(QuadratureSchedule {
            n_nodes,
            nodes,
            weights,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.n_nodes > 0
            && self.nodes.len() == self.n_nodes
            && self.weights.len() == self.n_nodes
            && self.nodes.iter().all(|&s| s > 0.0 && s < 1.0)
            && self.weights.iter().all(|&w| w > 0.0);
        if ok {
            Ok(())
        } else {
            Err(LerayError::InvalidParams("malformed quadrature schedule".into()))
        }
    }
}

/// Where a tensor sample sits: a grid node or a core quadrature point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Grid(usize),
    Core(usize),
}

/// Radial weight of the core part.
fn core_weight(r: f64) -> f64 {
    0.5 * libm::erfc((r - CORE_CENTER) / CORE_WIDTH)
}

#[derive(Debug, Clone)]
struct CorePlan {
    pts: Vec<f64>,
    wts: Vec<f64>,
    mmax: i64,
    k_max2: f64,
    /// exp(-i k_m x_p) for m = -mmax..=mmax, row-major in (m, p)
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl CorePlan {
    fn new(grid: &Grid, s: f64) -> Self {
        // graded toward the origin down to the core scale sqrt(s)
        let mut inner = vec![0.0];
        let mut x = 0.5 * s.sqrt();
        while x < 1.0 {
            inner.push(x);
            x *= CORE_GRADING;
        }
        inner.push(1.0);
        let mut outer = vec![1.0];
        let mut x = 1.0;
        while x + CORE_PANEL < CORE_RADIUS {
            x += CORE_PANEL;
            outer.push(x);
        }
        outer.push(CORE_RADIUS);
        let mirror = |e: &[f64]| e.iter().rev().map(|v| -v).collect::<Vec<f64>>();
        let pieces = [
            Rule1D::composite(&mirror(&outer), CORE_ORDER_OUTER),
            Rule1D::composite(&mirror(&inner), CORE_ORDER_INNER),
            Rule1D::composite(&inner, CORE_ORDER_INNER),
            Rule1D::composite(&outer, CORE_ORDER_OUTER),
        ];
        let mut rule = Rule1D::default();
        for piece in pieces {
            rule.nodes.extend(piece.nodes);
            rule.weights.extend(piece.weights);
        }

        let dk = std::f64::consts::PI / grid.half_width;
        let k_max2 = BAND_EXPONENT / (1.0 - s);
        let mmax = ((k_max2.sqrt() / dk).floor() as i64).min(grid.n as i64 / 3);
        let np = rule.len();
        let rows = (2 * mmax + 1) as usize;
        let mut cos = vec![0.0; rows * np];
        let mut sin = vec![0.0; rows * np];
        for r in 0..rows {
            let k = (r as i64 - mmax) as f64 * dk;
            for (p, &xp) in rule.nodes.iter().enumerate() {
                let (sn, cs) = (k * xp).sin_cos();
                cos[r * np + p] = cs;
                sin[r * np + p] = sn;
            }
        }
        CorePlan {
            pts: rule.nodes,
            wts: rule.weights,
            mmax,
            k_max2,
            cos,
            sin,
        }
    }

    fn len(&self) -> usize {
        self.pts.len() * self.pts.len()
    }

    fn point(&self, idx: usize) -> ([f64; 2], f64) {
        let np = self.pts.len();
        let (p1, p2) = (idx / np, idx % np);
        let x = [self.pts[p1], self.pts[p2]];
        (x, self.wts[p1] * self.wts[p2])
    }

    /// Adds the Fourier transform of the weighted core samples `g` (three
    /// tensor components) to `spec` on the retained band.
    fn add_transform(&self, g: &[Vec<f64>; 3], spec: &mut Spectrum) {
        let np = self.pts.len();
        let mmax = self.mmax;
        let half = (mmax + 1) as usize;
        let row = |m: i64| ((m + mmax) as usize) * np;
        let grid = spec.grid;
        let n = grid.n as i64;
        let dk = std::f64::consts::PI / grid.half_width;
        for (c, gc) in g.iter().enumerate() {
            // stage 1: contract the second coordinate for k2 >= 0
            let mut a = vec![Complex64::new(0.0, 0.0); np * half];
            for p1 in 0..np {
                let line = &gc[p1 * np..(p1 + 1) * np];
                for m2 in 0..half {
                    let off = row(m2 as i64);
                    let cs = &self.cos[off..off + np];
                    let sn = &self.sin[off..off + np];
                    let (mut re, mut im) = (0.0, 0.0);
                    for p2 in 0..np {
                        re += line[p2] * cs[p2];
                        im -= line[p2] * sn[p2];
                    }
                    a[p1 * half + m2] = Complex64::new(re, im);
                }
            }
            // stage 2: contract the first coordinate
            for m1 in -mmax..=mmax {
                let off = row(m1);
                let cs = &self.cos[off..off + np];
                let sn = &self.sin[off..off + np];
                let k1 = m1 as f64 * dk;
                for m2 in 0..half {
                    let k2 = m2 as f64 * dk;
                    if k1 * k1 + k2 * k2 > self.k_max2 {
                        continue;
                    }
                    let mut acc = Complex64::new(0.0, 0.0);
                    for p1 in 0..np {
                        acc += a[p1 * half + m2] * Complex64::new(cs[p1], -sn[p1]);
                    }
                    let i = m1.rem_euclid(n) as usize;
                    let j = (m2 as i64).rem_euclid(n) as usize;
                    spec.comps[c][j * grid.n + i] += acc;
                    if m2 > 0 {
                        let i = (-m1).rem_euclid(n) as usize;
                        let j = (-(m2 as i64)).rem_euclid(n) as usize;
                        spec.comps[c][j * grid.n + i] += acc.conj();
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
struct NodePlan {
    s: f64,
    weight: f64,
    core: Option<CorePlan>,
}

/// Samples of a vector field at every point used by one node.
#[derive(Debug, Clone, Default)]
pub struct NodeSamples {
    pub grid: Vec<[f64; 2]>,
    pub core: Vec<[f64; 2]>,
}

impl NodeSamples {
    #[inline]
    pub fn get(&self, loc: Location) -> [f64; 2] {
        match loc {
            Location::Grid(k) => self.grid[k],
            Location::Core(k) => self.core[k],
        }
    }
}

/// The discretized Duhamel operator for one grid and schedule.
#[derive(Debug, Clone)]
pub struct DuhamelOperator {
    grid: Grid,
    schedule: QuadratureSchedule,
    nodes: Vec<NodePlan>,
    tail_weight: Vec<f64>,
}

impl DuhamelOperator {
    pub fn new(grid: Grid, schedule: QuadratureSchedule) -> Result<Self> {
        Self::with_core_threshold(grid, schedule, CORE_THRESHOLD)
    }

    /// As [`DuhamelOperator::new`], with nodes below `threshold` using the
    /// core split (0 disables it).
    pub fn with_core_threshold(grid: Grid, schedule: QuadratureSchedule, threshold: f64) -> Result<Self> {
        grid.validate()?;
        schedule.validate()?;
        let nodes = schedule
            .nodes
            .iter()
            .zip(&schedule.weights)
            .map(|(&s, &w)| NodePlan {
                s,
                weight: w,
                core: (s < threshold).then(|| CorePlan::new(&grid, s)),
            })
            .collect();
        let tail_weight = (0..grid.len())
            .map(|k| {
                let p = grid.point(k);
                1.0 - core_weight(p[0].hypot(p[1]))
            })
            .collect();
        Ok(DuhamelOperator {
            grid,
            schedule,
            nodes,
            tail_weight,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn schedule(&self) -> &QuadratureSchedule {
        &self.schedule
    }

    /// Number of core quadrature points per node (0 for unsplit nodes).
    pub fn core_sizes(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .map(|n| n.core.as_ref().map_or(0, |c| c.len()))
            .collect()
    }

    /// Evaluates `f` at the rescaled point `x / sqrt(s_j)` of every sample
    /// location of every node.
    pub fn sample_nodes(&self, f: impl Fn([f64; 2]) -> [f64; 2] + Sync) -> Vec<NodeSamples> {
        self.nodes
            .par_iter()
            .map(|node| {
                let inv = 1.0 / node.s.sqrt();
                let grid = (0..self.grid.len())
                    .map(|k| {
                        let p = self.grid.point(k);
                        f([p[0] * inv, p[1] * inv])
                    })
                    .collect();
                let core = node
                    .core
                    .as_ref()
                    .map(|c| {
                        (0..c.len())
                            .map(|k| {
                                let (x, _) = c.point(k);
                                f([x[0] * inv, x[1] * inv])
                            })
                            .collect()
                    })
                    .unwrap_or_default();
                NodeSamples { grid, core }
            })
            .collect()
    }

    /// Theta for the tensor field returned by `tensor(node, location, y)` as
    /// (11, 12, 22) components of `F(y)`, where `y = x / sqrt(s)`.
    pub fn apply<F>(&self, tensor: F) -> Result<GridVectorField>
    where
        F: Fn(usize, Location, [f64; 2]) -> [f64; 3] + Sync,
    {
        let mut total = Spectrum::zeros(self.grid, 2);
        let indices: Vec<usize> = (0..self.nodes.len()).collect();
        for chunk in indices.chunks(NODE_CHUNK) {
            let parts: Vec<Spectrum> = chunk
                .par_iter()
                .map(|&j| {
                    let mut part = Spectrum::zeros(self.grid, 2);
                    self.node_term(j, &tensor, &mut part);
                    part
                })
                .collect();
            for part in parts {
                for c in 0..2 {
                    for (t, p) in total.comps[c].iter_mut().zip(&part.comps[c]) {
                        *t += p;
                    }
                }
            }
        }
        from_spectrum(&total)
    }

    fn node_term<F>(&self, j: usize, tensor: &F, acc: &mut Spectrum)
    where
        F: Fn(usize, Location, [f64; 2]) -> [f64; 3] + Sync,
    {
        let node = &self.nodes[j];
        let grid = &self.grid;
        let inv = 1.0 / node.s.sqrt();
        let inv_s = 1.0 / node.s;
        let mut t = [vec![0.0; grid.len()], vec![0.0; grid.len()], vec![0.0; grid.len()]];
        for k in 0..grid.len() {
            let p = grid.point(k);
            let w = if node.core.is_some() {
                self.tail_weight[k] * inv_s
            } else {
                inv_s
            };
            let v = tensor(j, Location::Grid(k), [p[0] * inv, p[1] * inv]);
            for c in 0..3 {
                t[c][k] = w * v[c];
            }
        }
        let mut spec = real_to_spectrum(grid, &[&t[0], &t[1], &t[2]]);
        if let Some(core) = &node.core {
            let mut g = [vec![0.0; core.len()], vec![0.0; core.len()], vec![0.0; core.len()]];
            for k in 0..core.len() {
                let (x, w) = core.point(k);
                let w = w * core_weight(x[0].hypot(x[1])) * inv_s;
                let v = tensor(j, Location::Core(k), [x[0] * inv, x[1] * inv]);
                for c in 0..3 {
                    g[c][k] = w * v[c];
                }
            }
            core.add_transform(&g, &mut spec);
        }
        accumulate_oseen_div(&spec, 1.0 - node.s, node.weight, acc);
    }
}

/// Theta for `F = (sigma v0 + v_re) (x) (sigma v0 + v_re)`.
pub fn phi_at_one(
    v0: &ProfileProvider,
    v_re: &ProfileProvider,
    sigma: f64,
    schedule: &QuadratureSchedule,
    grid: &Grid,
) -> Result<GridVectorField> {
    if !(0.0..=1.0).contains(&sigma) {
        return Err(LerayError::DomainError(format!("sigma = {sigma} is outside [0, 1]")));
    }
    let op = DuhamelOperator::new(*grid, schedule.clone())?;
    if (sigma == 0.0 || v0.is_zero()) && v_re.is_zero() {
        return Ok(GridVectorField::zeros(*grid));
    }
    op.apply(|_, _, y| {
        let a = v0.eval(y);
        let b = v_re.eval(y);
        let u = [sigma * a[0] + b[0], sigma * a[1] + b[1]];
        [u[0] * u[0], u[0] * u[1], u[1] * u[1]]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{dealias, projected_divergence, to_spectrum};

    #[test]
    fn schedule_integrates_constants() {
        for n in [8, 32, 64] {
            let s = QuadratureSchedule::new(n).unwrap();
            s.validate().unwrap();
            let total: f64 = s.weights.iter().sum();
            assert!((total - 1.0).abs() < 1e-12, "{n}: {total}");
        }
        assert!(QuadratureSchedule::new(0).is_err());
    }

    /// Exact Theta for F(y) = exp(-|y|^2) M: the rescaled tensor has
    /// transform pi exp(-s |k|^2 / 4) M.
    fn gaussian_theta(grid: &Grid, schedule: &QuadratureSchedule, m: [f64; 3]) -> GridVectorField {
        let mut spec = Spectrum::zeros(*grid, 3);
        for idx in 0..grid.len() {
            let k2 = spec.k2(idx);
            let mut z = Complex64::new(0.0, 0.0);
            for (&s, &w) in schedule.nodes.iter().zip(&schedule.weights) {
                z += w * std::f64::consts::PI * (-(1.0 - s) * k2 - 0.25 * s * k2).exp();
            }
            for c in 0..3 {
                spec.comps[c][idx] = z * m[c];
            }
        }
        dealias(&mut spec);
        from_spectrum(&projected_divergence(&spec)).unwrap()
    }

    #[test]
    fn gaussian_force_matches_closed_form() {
        let grid = Grid::new(16.0, 128).unwrap();
        let schedule = QuadratureSchedule::new(24).unwrap();
        let m = [1.0, 0.3, -0.5];
        let op = DuhamelOperator::new(grid, schedule.clone()).unwrap();
        let theta = op
            .apply(|_, _, y| {
                let g = (-(y[0] * y[0] + y[1] * y[1])).exp();
                [g * m[0], g * m[1], g * m[2]]
            })
            .unwrap();
        let exact = gaussian_theta(&grid, &schedule, m);
        let err = theta.axpy(-1.0, &exact).unwrap().max_norm();
        assert!(err < 1e-9 * exact.max_norm(), "{err} vs {}", exact.max_norm());
        // output is solenoidal
        let div = crate::spectral::divergence(&to_spectrum(&theta));
        assert!(div.l2_norm() < 1e-12 * theta.l2_norm());
    }

    #[test]
    fn zero_input_gives_zero() {
        let grid = Grid::new(8.0, 32).unwrap();
        let schedule = QuadratureSchedule::new(8).unwrap();
        let out = phi_at_one(&ProfileProvider::Zero, &ProfileProvider::Zero, 0.0, &schedule, &grid).unwrap();
        assert!(out.is_zero());
        assert!(phi_at_one(&ProfileProvider::Zero, &ProfileProvider::Zero, 1.5, &schedule, &grid).is_err());
    }

    fn dipole(y: [f64; 2]) -> [f64; 2] {
        // smooth, divergence-free and decaying like |y|^-2
        let e = 1.0 / (1.0 + y[0] * y[0] + y[1] * y[1]);
        [e - 2.0 * y[1] * y[1] * e * e, 2.0 * y[0] * y[1] * e * e]
    }

    fn gap(a: &GridVectorField, b: &GridVectorField) -> f64 {
        a.axpy(-1.0, b).unwrap().max_norm() / b.max_norm()
    }

    #[test]
    fn swirl_theta_is_nearly_annihilated() {
        // Each slice's stress divergence is a radial gradient; the remainder is
        // truncation and falls below 1e-3 (alpha / 2 pi)^2 on the default box.
        let alpha = 2.0 * std::f64::consts::PI;
        let v0 = ProfileProvider::function(move |y| crate::heat_lift::oseen_profile(alpha, y));
        let theta = phi_at_one(
            &v0,
            &ProfileProvider::Zero,
            1.0,
            &QuadratureSchedule::default(),
            &Grid::new(32.0, 256).unwrap(),
        )
        .unwrap();
        assert!(theta.max_norm() <= 1e-3, "{}", theta.max_norm());
    }

    #[test]
    fn theta_is_quadratic_and_solenoidal() {
        let grid = Grid::new(16.0, 128).unwrap();
        let schedule = QuadratureSchedule::new(16).unwrap();
        let v0 = ProfileProvider::function(dipole);
        let one = phi_at_one(&v0, &ProfileProvider::Zero, 1.0, &schedule, &grid).unwrap();
        for sigma in [0.3, 0.75] {
            let t = phi_at_one(&v0, &ProfileProvider::Zero, sigma, &schedule, &grid).unwrap();
            assert!(gap(&t, &one.scaled(sigma * sigma)) <= 1e-12);
        }
        let div = crate::spectral::divergence(&to_spectrum(&one));
        assert!(div.l2_norm() <= 1e-10 * one.l2_norm());
    }

    #[test]
    fn node_doubling_converges() {
        let grid = Grid::new(16.0, 128).unwrap();
        let v0 = ProfileProvider::function(dipole);
        let thetas: Vec<GridVectorField> = [8, 16, 32, 64]
            .iter()
            .map(|&n| {
                phi_at_one(
                    &v0,
                    &ProfileProvider::Zero,
                    1.0,
                    &QuadratureSchedule::new(n).unwrap(),
                    &grid,
                )
                .unwrap()
            })
            .collect();
        let changes: Vec<f64> = thetas.windows(2).map(|w| gap(&w[0], &w[1])).collect();
        assert!(changes.windows(2).all(|c| c[1] < c[0]), "{changes:?}");
        assert!(changes[2] < 1e-3, "{changes:?}");
    }
}
