//! Fixed-point construction of self-similar profiles.
//!
//! The profile is `v = v0 + v_re` where `v0` is the caloric lift of the datum
//! and `v_re` solves `v_re = K(v_re, sigma)` with
//!
//! ```text
//! K(v, sigma) = -Theta[(sigma v0 + v) (x) (sigma v0 + v)]
//! ```
//!
//! The map is iterated by damped Picard steps and continued in `sigma` from a
//! small value up to 1.

use serde::{Deserialize, Serialize};

use crate::duhamel::{DuhamelOperator, GridProfile, NodeSamples, QuadratureSchedule};
use crate::error::{LerayError, Result};
use crate::grid::{Grid, GridVectorField, ScalarField};
use crate::heat_lift::{GridJets, LiftedProfile};
use crate::initial_data::{build_homogeneous_field, CircleTrace};
use crate::spectral::vector_gradient;

mod residual;

pub use residual::{
    pressure_source, recover_pressure, residual_from_parts, scalar_gradient, solve_pressure_poisson,
    stationary_residual, FieldDerivatives, ResidualReport, RESIDUAL_WINDOW,
};

/// Residuals above this abort the iteration as divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e6;
/// Maximum number of step bisections per continuation stage.
pub const MAX_BISECTIONS: usize = 4;
pub const DEFAULT_EXTENSION: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveParams {
    pub sigma_schedule: Vec<f64>,
    pub picard_tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub damping_floor: f64,
    pub quadrature: QuadratureSchedule,
    pub grid: Grid,
    /// The force and pressure quadratic in the datum are computed on a grid
    /// this many times wider (same spacing) and restricted; 1 disables this.
    pub datum_extension: usize,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            sigma_schedule: (1..=10).map(|i| i as f64 / 10.0).collect(),
            picard_tol: 1e-8,
            max_iter: 200,
            damping: 1.0,
            damping_floor: 0.0625,
            quadrature: QuadratureSchedule::default(),
            grid: Grid::new(32.0, 256).expect("default grid"),
            datum_extension: DEFAULT_EXTENSION,
        }
    }
}

impl SolveParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(LerayError::InvalidParams(m.into()));
        self.grid.validate()?;
        self.quadrature.validate()?;
        let s = &self.sigma_schedule;
        if s.is_empty() || s.iter().any(|&v| !(v > 0.0 && v <= 1.0)) {
            return bad("sigma schedule entries must lie in (0, 1]");
        }
        if s.windows(2).any(|w| w[1] <= w[0]) {
            return bad("sigma schedule must be strictly increasing");
        }
        if *s.last().unwrap() != 1.0 {
            return bad("sigma schedule must end at 1");
        }
        if !(self.picard_tol > 0.0) {
            return bad("picard_tol must be positive");
        }
        if !self.datum_extension.is_power_of_two() {
            return bad("datum_extension must be a power of two");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive");
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad("damping must lie in (0, 1]");
        }
        if !(self.damping_floor > 0.0 && self.damping_floor <= self.damping) {
            return bad("damping floor must lie in (0, damping]");
        }
        Ok(())
    }
}

/// Iteration record of one continuation stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub sigma: f64,
    /// Number of evaluations of K.
    pub iterations: usize,
    /// Accepted fixed-point residuals, one per accepted iterate.
    pub residuals: Vec<f64>,
    pub final_damping: f64,
}

#[derive(Debug, Clone)]
pub struct ProfileSolution {
    pub trace: CircleTrace,
    pub v_re: GridVectorField,
    /// Derivatives of `v_re`; see [`SolveContext::derivatives`].
    pub derivatives: FieldDerivatives,
    pub q: ScalarField,
    pub grad_q: [Vec<f64>; 2],
    pub sigma: f64,
    pub stages: Vec<StageRecord>,
    /// `||v_re - K(v_re, sigma)||_X`.
    pub k_residual: f64,
    pub residual: ResidualReport,
}

impl ProfileSolution {
    /// All accepted residuals, in order.
    pub fn residual_history(&self) -> Vec<f64> {
        self.stages.iter().flat_map(|s| s.residuals.iter().copied()).collect()
    }

    pub fn stationary_residual(&self) -> f64 {
        self.residual.relative
    }

    pub fn iterations_per_stage(&self) -> Vec<usize> {
        self.stages.iter().map(|s| s.iterations).collect()
    }
}

/// A remainder stored as `coef * Theta_aa + rest`. `Theta_aa` is computed on
/// a wider grid and is not periodic on the solve grid, so its derivatives
/// come from the wide grid; `rest` is periodic and differentiated spectrally.
#[derive(Debug, Clone)]
pub struct Remainder {
    pub coef: f64,
    pub rest: GridVectorField,
}

impl Remainder {
    pub fn zeros(grid: Grid) -> Self {
        Remainder {
            coef: 0.0,
            rest: GridVectorField::zeros(grid),
        }
    }

    /// Treats a plain grid field as periodic.
    pub fn from_field(field: GridVectorField) -> Self {
        Remainder { coef: 0.0, rest: field }
    }

    /// `self + factor * other`.
    pub fn axpy(&self, factor: f64, other: &Remainder) -> Result<Remainder> {
        Ok(Remainder {
            coef: self.coef + factor * other.coef,
            rest: self.rest.axpy(factor, &other.rest)?,
        })
    }

    pub fn is_zero(&self) -> bool {
        self.coef == 0.0 && self.rest.is_zero()
    }
}

/// Datum-only terms restricted from the wide grid.
struct DatumTerms {
    theta: GridVectorField,
    d_theta: FieldDerivatives,
    q: ScalarField,
    grad_q: [Vec<f64>; 2],
}

/// Everything a solve needs that does not change between iterations: the
/// lifted datum on the grid and at every rescaled Duhamel sample point, and
/// the force and pressure quadratic in the datum.
pub struct SolveContext {
    trace: CircleTrace,
    lift: LiftedProfile,
    op: DuhamelOperator,
    v0_nodes: Vec<NodeSamples>,
    v0_jets: GridJets,
    extension: usize,
    datum: DatumTerms,
}

impl SolveContext {
    pub fn new(trace: CircleTrace, grid: Grid, quadrature: QuadratureSchedule, extension: usize) -> Result<Self> {
        trace.validate()?;
        if extension == 0 || !extension.is_power_of_two() {
            return Err(LerayError::InvalidParams(format!(
                "extension {extension} is not a power of two"
            )));
        }
        let lift = LiftedProfile::new(build_homogeneous_field(trace.clone()));
        let op = DuhamelOperator::new(grid, quadrature)?;
        let v0_jets = lift.sample(&grid)?;
        let (v0_nodes, datum) = if trace.is_zero() {
            let datum = DatumTerms {
                theta: GridVectorField::zeros(grid),
                d_theta: FieldDerivatives::zeros(&grid),
                q: ScalarField::zeros(grid),
                grad_q: [vec![0.0; grid.len()], vec![0.0; grid.len()]],
            };
            (Vec::new(), datum)
        } else {
            let datum = datum_terms(&lift, &grid, op.schedule(), extension)?;
            (op.sample_nodes(|y| lift.eval(y).value), datum)
        };
        Ok(SolveContext {
            trace,
            lift,
            op,
            v0_nodes,
            v0_jets,
            extension,
            datum,
        })
    }

    pub fn from_params(trace: CircleTrace, params: &SolveParams) -> Result<Self> {
        Self::new(trace, params.grid, params.quadrature.clone(), params.datum_extension)
    }

    pub fn grid(&self) -> &Grid {
        self.op.grid()
    }

    pub fn trace(&self) -> &CircleTrace {
        &self.trace
    }

    pub fn lift(&self) -> &LiftedProfile {
        &self.lift
    }

    /// v0 and its gradient on the grid.
    pub fn v0_jets(&self) -> &GridJets {
        &self.v0_jets
    }

    pub fn v0_grid(&self) -> &GridVectorField {
        &self.v0_jets.value
    }

    /// `Theta[v0 (x) v0]` on the grid.
    pub fn datum_theta(&self) -> &GridVectorField {
        &self.datum.theta
    }

    /// The remainder as a plain grid field.
    pub fn field(&self, v: &Remainder) -> Result<GridVectorField> {
        if v.coef == 0.0 {
            return Ok(v.rest.clone());
        }
        v.rest.axpy(v.coef, &self.datum.theta)
    }

    pub fn derivatives(&self, v: &Remainder) -> FieldDerivatives {
        let mut d = FieldDerivatives::spectral(&v.rest);
        if v.coef != 0.0 {
            d.add_scaled(v.coef, &self.datum.d_theta);
        }
        d
    }

    /// Pressure and its gradient for the profile `sigma v0 + v`.
    pub fn pressure(&self, v: &Remainder, d: &FieldDerivatives, sigma: f64) -> Result<(ScalarField, [Vec<f64>; 2])> {
        self.grid().check_same(&v.rest.grid)?;
        let has_re = !v.is_zero();
        let source = pressure_source(&self.v0_jets, sigma, has_re.then_some(&d.grad), false);
        let mut q = solve_pressure_poisson(self.grid(), &source);
        let mut grad = scalar_gradient(&q);
        let s2 = sigma * sigma;
        for (a, b) in q.data.iter_mut().zip(&self.datum.q.data) {
            *a += s2 * b;
        }
        for c in 0..2 {
            for (a, b) in grad[c].iter_mut().zip(&self.datum.grad_q[c]) {
                *a += s2 * b;
            }
        }
        Ok((q, grad))
    }

    fn check(&self, params: &SolveParams) -> Result<()> {
        if params.grid != *self.grid()
            || params.quadrature != *self.op.schedule()
            || params.datum_extension != self.extension
        {
            return Err(LerayError::InvalidParams(
                "solve parameters do not match the context grid or quadrature".into(),
            ));
        }
        Ok(())
    }
}

/// `K(v_re, sigma)` for a plain grid field.
pub fn k_map(v_re: &GridVectorField, sigma: f64, ctx: &SolveContext) -> Result<GridVectorField> {
    let k = k_map_split(&Remainder::from_field(v_re.clone()), sigma, ctx)?;
    ctx.field(&k)
}

/// `K(v, sigma)`; the result has coefficient `-sigma^2` on `Theta_aa`.
pub fn k_map_split(v: &Remainder, sigma: f64, ctx: &SolveContext) -> Result<Remainder> {
    if !(0.0..=1.0).contains(&sigma) {
        return Err(LerayError::DomainError(format!("sigma = {sigma} is outside [0, 1]")));
    }
    let grid = *ctx.grid();
    grid.check_same(&v.rest.grid)?;
    let datum = sigma != 0.0 && !ctx.trace.is_zero();
    let coef = if datum { -sigma * sigma } else { 0.0 };
    if v.is_zero() {
        return Ok(Remainder {
            coef,
            rest: GridVectorField::zeros(grid),
        });
    }
    let profile = GridProfile::new(ctx.field(v)?);
    let re_nodes = ctx.op.sample_nodes(|y| profile.eval(y));
    // the part quadratic in v0 is precomputed
    let theta = ctx.op.apply(|j, loc, _| {
        let b = re_nodes[j].get(loc);
        let a = if datum {
            let a = ctx.v0_nodes[j].get(loc);
            [sigma * a[0], sigma * a[1]]
        } else {
            [0.0, 0.0]
        };
        [
            b[0] * (2.0 * a[0] + b[0]),
            a[0] * b[1] + a[1] * b[0] + b[0] * b[1],
            b[1] * (2.0 * a[1] + b[1]),
        ]
    })?;
    Ok(Remainder {
        coef,
        rest: theta.scaled(-1.0),
    })
}

/// `Theta[v0 (x) v0]` and the pressure of `v0` alone, with derivatives,
/// computed on a grid `extension` times wider and restricted to `grid`.
fn datum_terms(
    lift: &LiftedProfile,
    grid: &Grid,
    schedule: &QuadratureSchedule,
    extension: usize,
) -> Result<DatumTerms> {
    let wide = Grid::new(grid.half_width * extension as f64, grid.n * extension)?;
    let op = DuhamelOperator::new(wide, schedule.clone())?;
    let theta = op.apply(|_, _, y| {
        let u = lift.eval(y).value;
        [u[0] * u[0], u[0] * u[1], u[1] * u[1]]
    })?;
    let d_theta = FieldDerivatives::spectral(&theta);
    let q = {
        let jets = lift.sample(&wide)?;
        solve_pressure_poisson(&wide, &pressure_source(&jets, 1.0, None, true))
    };
    let grad_q = scalar_gradient(&q);

    let offset = (extension - 1) * grid.n / 2;
    let restrict = |f: &[f64]| -> Vec<f64> {
        (0..grid.len())
            .map(|k| f[(k / grid.n + offset) * wide.n + k % grid.n + offset])
            .collect()
    };
    let restrict2 = |f: &[Vec<f64>; 2]| [restrict(&f[0]), restrict(&f[1])];
    Ok(DatumTerms {
        theta: GridVectorField {
            grid: *grid,
            u: restrict2(&theta.u),
        },
        d_theta: FieldDerivatives {
            grad: [restrict2(&d_theta.grad[0]), restrict2(&d_theta.grad[1])],
            lap: restrict2(&d_theta.lap),
        },
        q: ScalarField {
            grid: *grid,
            data: restrict(&q.data),
        },
        grad_q: restrict2(&grad_q),
    })
}

/// Discrete X-norm `max (1 + |y|^2)(|v| + |grad v|)` over grid nodes, with
/// spectral gradients.
pub fn x_norm(v: &GridVectorField) -> f64 {
    x_norm_with(v, &vector_gradient(v))
}

/// [`x_norm`] with a supplied gradient.
pub fn x_norm_with(v: &GridVectorField, g: &[[Vec<f64>; 2]; 2]) -> f64 {
    let grid = v.grid;
    let mut m = 0.0_f64;
    for k in 0..grid.len() {
        let p = grid.point(k);
        let w = 1.0 + p[0] * p[0] + p[1] * p[1];
        let val = v.u[0][k].hypot(v.u[1][k]);
        let grad = (g[0][0][k].powi(2) + g[0][1][k].powi(2) + g[1][0][k].powi(2) + g[1][1][k].powi(2)).sqrt();
        m = m.max(w * (val + grad));
    }
    m
}

fn split_x_norm(v: &Remainder, ctx: &SolveContext) -> Result<f64> {
    Ok(x_norm_with(&ctx.field(v)?, &ctx.derivatives(v).grad))
}

/// Damped Picard iteration `v <- (1 - theta) v + theta K(v, sigma)`.
///
/// A step whose fixed-point residual exceeds the current one is retried with
/// half the damping; once the damping floor is reached such a step ends the
/// iteration with [`LerayError::NonConvergence`].
pub fn picard_solve(
    sigma: f64,
    init: &GridVectorField,
    params: &SolveParams,
    ctx: &SolveContext,
) -> Result<ProfileSolution> {
    params.validate()?;
    ctx.check(params)?;
    let (v, record) = picard_iterate(sigma, &Remainder::from_field(init.clone()), params, ctx)?;
    finish(v, sigma, vec![record], ctx)
}

fn picard_iterate(
    sigma: f64,
    init: &Remainder,
    params: &SolveParams,
    ctx: &SolveContext,
) -> Result<(Remainder, StageRecord)> {
    let fail = |iterations: usize, last_residual: f64, divergence_flag: bool| LerayError::NonConvergence {
        iterations,
        last_residual,
        divergence_flag,
    };
    let mut theta = params.damping;
    let mut v = init.clone();
    let mut kv = k_map_split(&v, sigma, ctx)?;
    let mut evals = 1;
    let mut r = split_x_norm(&kv.axpy(-1.0, &v)?, ctx)?;
    let mut residuals = vec![r];
    loop {
        if !r.is_finite() || r > DIVERGENCE_LIMIT {
            return Err(fail(evals, r, true));
        }
        if r <= params.picard_tol {
            break;
        }
        if evals >= params.max_iter {
            return Err(fail(evals, r, false));
        }
        let cand = v.axpy(theta, &kv.axpy(-1.0, &v)?)?;
        let kc = k_map_split(&cand, sigma, ctx)?;
        evals += 1;
        let rc = split_x_norm(&kc.axpy(-1.0, &cand)?, ctx)?;
        if !(rc <= r) {
            if theta <= params.damping_floor {
                return Err(fail(evals, rc, rc > DIVERGENCE_LIMIT || !rc.is_finite()));
            }
            theta = (0.5 * theta).max(params.damping_floor);
            continue;
        }
        v = cand;
        kv = kc;
        r = rc;
        residuals.push(r);
    }
    Ok((
        v,
        StageRecord {
            sigma,
            iterations: evals,
            residuals,
            final_damping: theta,
        },
    ))
}

fn finish(v: Remainder, sigma: f64, stages: Vec<StageRecord>, ctx: &SolveContext) -> Result<ProfileSolution> {
    let k_residual = stages.last().and_then(|s| s.residuals.last().copied()).unwrap_or(0.0);
    let d = ctx.derivatives(&v);
    let (q, grad_q) = ctx.pressure(&v, &d, sigma)?;
    let v_re = ctx.field(&v)?;
    let residual = residual_from_parts(ctx.v0_jets(), sigma, &v_re, &d, &grad_q)?;
    Ok(ProfileSolution {
        trace: ctx.trace.clone(),
        v_re,
        derivatives: d,
        q,
        grad_q,
        sigma,
        stages,
        k_residual,
        residual,
    })
}

/// Runs [`picard_solve`] along the sigma schedule with warm starts. A failed
/// stage is retried with the sigma step halved, at most [`MAX_BISECTIONS`]
/// times in a row.
pub fn continuation_solve(params: &SolveParams, ctx: &SolveContext) -> Result<ProfileSolution> {
    params.validate()?;
    ctx.check(params)?;
    let mut v = Remainder::zeros(params.grid);
    let mut reached = 0.0;
    let mut stages = Vec::new();
    for &target in &params.sigma_schedule {
        while reached < target {
            let full = target - reached;
            let mut step = full;
            let mut accepted = None;
            for _ in 0..=MAX_BISECTIONS {
                let sigma = if step == full { target } else { reached + step };
                match picard_iterate(sigma, &v, params, ctx) {
                    Ok(out) => {
                        accepted = Some(out);
                        break;
                    }
                    Err(LerayError::NonConvergence { .. }) => step *= 0.5,
                    Err(e) => return Err(e),
                }
            }
            let Some((next, record)) = accepted else {
                return Err(LerayError::ContinuationStalled { sigma_reached: reached });
            };
            reached = record.sigma;
            v = next;
            stages.push(record);
        }
    }
    finish(v, 1.0, stages, ctx)
}
