//! (-1)-homogeneous, divergence-free, zero-flux initial data.
//!
//! A field of this class is fully described by its trace on the unit circle:
//! a constant angular component (the circulation) and a zero-mean radial
//! profile `f(theta)`,
//!
//! ```text
//! u0(x) = alpha/(2 pi) * x_perp/|x|^2 + f(theta(x)) * x/|x|^2.
//! ```

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LerayError, Result};

/// Default number of circle samples used by [`holder_norm`].
pub const HOLDER_SAMPLES: usize = 2048;
/// Calibration constant of the global Hoelder check.
pub const HOLDER_CALIBRATION: f64 = 32.0;
/// Flux magnitude above which a trace is considered corrupted.
pub const FLUX_TOLERANCE: f64 = 1e-12;

/// Circle trace of the initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleTrace {
    pub alpha: f64,
    #[serde(default)]
    pub f_cos: Vec<f64>,
    #[serde(default)]
    pub f_sin: Vec<f64>,
    #[serde(default = "default_beta")]
    pub beta: f64,
}

fn default_beta() -> f64 {
    1.0
}

impl CircleTrace {
    pub fn new(alpha: f64, f_cos: Vec<f64>, f_sin: Vec<f64>, beta: f64) -> Result<Self> {
        let t = CircleTrace {
            alpha,
            f_cos,
            f_sin,
            beta,
        };
        t.validate()?;
        Ok(t)
    }

    /// Pure swirl with circulation `alpha`.
    pub fn swirl(alpha: f64) -> Self {
        CircleTrace {
            alpha,
            f_cos: Vec::new(),
            f_sin: Vec::new(),
            beta: 1.0,
        }
    }

    pub fn zero() -> Self {
        Self::swirl(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(LerayError::InvalidExponent(self.beta));
        }
        let finite = self.alpha.is_finite() && self.f_cos.iter().chain(&self.f_sin).all(|c| c.is_finite());
        if !finite {
            return Err(LerayError::InvalidTrace("non-finite coefficient".into()));
        }
        Ok(())
    }

    /// Highest Fourier index of the radial profile.
    pub fn degree(&self) -> usize {
        self.f_cos.len().max(self.f_sin.len())
    }

    pub fn is_zero(&self) -> bool {
        self.alpha == 0.0 && self.f_cos.iter().chain(&self.f_sin).all(|&c| c == 0.0)
    }

    pub fn is_pure_swirl(&self) -> bool {
        self.f_cos.iter().chain(&self.f_sin).all(|&c| c == 0.0)
    }

    /// Radial profile f(theta).
    pub fn radial(&self, theta: f64) -> f64 {
        let mut acc = 0.0;
        for (i, c) in self.f_cos.iter().enumerate() {
            acc += c * ((i + 1) as f64 * theta).cos();
        }
        for (i, s) in self.f_sin.iter().enumerate() {
            acc += s * ((i + 1) as f64 * theta).sin();
        }
        acc
    }

    /// Trace scaled by a constant factor (both circulation and profile).
    pub fn scaled(&self, factor: f64) -> Self {
        CircleTrace {
            alpha: self.alpha * factor,
            f_cos: self.f_cos.iter().map(|c| c * factor).collect(),
            f_sin: self.f_sin.iter().map(|c| c * factor).collect(),
            beta: self.beta,
        }
    }

    /// Trace of the field rotated by `angle`: f(theta) -> f(theta - angle).
    pub fn rotated(&self, angle: f64) -> Self {
        let n = self.degree();
        let mut f_cos = vec![0.0; n];
        let mut f_sin = vec![0.0; n];
        for k in 0..n {
            let a = self.f_cos.get(k).copied().unwrap_or(0.0);
            let b = self.f_sin.get(k).copied().unwrap_or(0.0);
            let (s, c) = ((k + 1) as f64 * angle).sin_cos();
            f_cos[k] = a * c - b * s;
            f_sin[k] = a * s + b * c;
        }
        CircleTrace {
            alpha: self.alpha,
            f_cos,
            f_sin,
            beta: self.beta,
        }
    }

    /// Cartesian components of u0 on the unit circle, each written as a
    /// trigonometric polynomial `sum_m a_m cos(m theta) + b_m sin(m theta)`.
    /// Returned as `[(cos coefficients, sin coefficients); 2]`, indexed by m >= 0.
    pub fn cartesian_modes(&self) -> [(Vec<f64>, Vec<f64>); 2] {
        let m_max = self.degree() + 1;
        let mut c1 = vec![0.0; m_max + 1];
        let mut s1 = vec![0.0; m_max + 1];
        let mut c2 = vec![0.0; m_max + 1];
        let mut s2 = vec![0.0; m_max + 1];
        let swirl = self.alpha / (2.0 * PI);
        // swirl: (-sin, cos)
        s1[1] -= swirl;
        c2[1] += swirl;
        for n in 1..=self.degree() {
            let a = self.f_cos.get(n - 1).copied().unwrap_or(0.0);
            let b = self.f_sin.get(n - 1).copied().unwrap_or(0.0);
            // f cos(theta)
            c1[n + 1] += 0.5 * a;
            c1[n - 1] += 0.5 * a;
            s1[n + 1] += 0.5 * b;
            if n > 1 {
                s1[n - 1] += 0.5 * b;
            }
            // f sin(theta)
            s2[n + 1] += 0.5 * a;
            if n > 1 {
                s2[n - 1] -= 0.5 * a;
            }
            c2[n - 1] += 0.5 * b;
            c2[n + 1] -= 0.5 * b;
        }
        [(c1, s1), (c2, s2)]
    }
}

/// The initial datum u0 on R^2 \ {0}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousField {
    pub trace: CircleTrace,
}

pub fn build_homogeneous_field(trace: CircleTrace) -> HomogeneousField {
    HomogeneousField { trace }
}

impl HomogeneousField {
    /// u0 on the unit circle at polar angle `theta`.
    pub fn on_circle(&self, theta: f64) -> [f64; 2] {
        let (s, c) = theta.sin_cos();
        let swirl = self.trace.alpha / (2.0 * PI);
        let f = self.trace.radial(theta);
        [-swirl * s + f * c, swirl * c + f * s]
    }

    /// Same as [`eval_u0`] without the origin check.
    pub(crate) fn eval_unchecked(&self, x: [f64; 2]) -> [f64; 2] {
        let r2 = x[0] * x[0] + x[1] * x[1];
        let theta = x[1].atan2(x[0]);
        let swirl = self.trace.alpha / (2.0 * PI);
        let f = self.trace.radial(theta);
        [(-swirl * x[1] + f * x[0]) / r2, (swirl * x[0] + f * x[1]) / r2]
    }
}

pub fn eval_u0(field: &HomogeneousField, x: [f64; 2]) -> Result<[f64; 2]> {
    if x[0] == 0.0 && x[1] == 0.0 {
        return Err(LerayError::OriginEvaluation);
    }
    Ok(field.eval_unchecked(x))
}

/// Circulation and flux of u0 through the unit circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CirculationFlux {
    pub circulation: f64,
    pub flux: f64,
    /// `false` when |flux| exceeds [`FLUX_TOLERANCE`].
    pub flux_ok: bool,
}

/// Periodic trapezoid quadrature of u0 . tau and u0 . n over the unit circle.
pub fn circulation_and_flux(field: &HomogeneousField) -> CirculationFlux {
    let nodes = 4 * (field.trace.degree() + 2).max(64);
    let dtheta = 2.0 * PI / nodes as f64;
    let mut circ = 0.0;
    let mut flux = 0.0;
    for i in 0..nodes {
        let theta = i as f64 * dtheta;
        let (s, c) = theta.sin_cos();
        let u = field.on_circle(theta);
        circ += -u[0] * s + u[1] * c;
        flux += u[0] * c + u[1] * s;
    }
    circ *= dtheta;
    flux *= dtheta;
    CirculationFlux {
        circulation: circ,
        flux,
        flux_ok: flux.abs() <= FLUX_TOLERANCE,
    }
}

/// Sampled C^{0,beta}(S^1) norm: sup|u0| plus the chordal Hoelder seminorm
/// over all pairs of [`HOLDER_SAMPLES`] equispaced points.
pub fn holder_norm(trace: &CircleTrace, beta: f64) -> Result<f64> {
    holder_norm_with_samples(trace, beta, HOLDER_SAMPLES)
}

pub fn holder_norm_with_samples(trace: &CircleTrace, beta: f64, samples: usize) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(LerayError::InvalidExponent(beta));
    }
    let m = samples.max(2);
    let field = HomogeneousField { trace: trace.clone() };
    let dtheta = 2.0 * PI / m as f64;
    let values: Vec<[f64; 2]> = (0..m).map(|i| field.on_circle(i as f64 * dtheta)).collect();
    let sup = values.iter().map(|v| v[0].hypot(v[1])).fold(0.0_f64, f64::max);
    let mut semi = 0.0_f64;
    // pairs at index separation d; chord = 2 sin(d dtheta / 2)
    for d in 1..=m / 2 {
        let chord = 2.0 * (0.5 * d as f64 * dtheta).sin();
        let denom = chord.powf(beta);
        for i in 0..m {
            let a = values[i];
            let b = values[(i + d) % m];
            let diff = (a[0] - b[0]).hypot(a[1] - b[1]);
            semi = semi.max(diff / denom);
        }
    }
    Ok(sup + semi)
}

/// Outcome of [`check_global_holder`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub max_ratio: f64,
    pub pair: Option<([f64; 2], [f64; 2])>,
    pub pairs_evaluated: usize,
    pub holder_norm: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Samples pairs (y, y~) in the annulus 0.1 <= |y| <= 10 and records the largest
/// `|u0(y) - u0(y~)| min(|y|,|y~|)^{1+beta} / |y - y~|^beta`.
///
/// Half of the pairs are independent draws; the other half are local
/// perturbations, which is where the ratio is largest.
pub fn check_global_holder(field: &HomogeneousField, beta: f64, n_samples: usize, seed: u64) -> Result<RatioReport> {
    if n_samples < 2 {
        return Err(LerayError::DomainError("n_samples must be at least 2".into()));
    }
    let a = holder_norm(&field.trace, beta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> [f64; 2] {
        let r = 10f64.powf(rng.gen_range(-1.0..=1.0));
        let t = rng.gen_range(0.0..2.0 * PI);
        [r * t.cos(), r * t.sin()]
    };
    let mut best = 0.0_f64;
    let mut best_pair = None;
    let mut evaluated = 0;
    for k in 0..n_samples {
        let y = draw(&mut rng);
        let yt = if k % 2 == 0 {
            draw(&mut rng)
        } else {
            let ry = y[0].hypot(y[1]);
            let eps = ry * 10f64.powf(rng.gen_range(-4.0..0.0));
            let t = rng.gen_range(0.0..2.0 * PI);
            [y[0] + eps * t.cos(), y[1] + eps * t.sin()]
        };
        let dist = (y[0] - yt[0]).hypot(y[1] - yt[1]);
        if dist == 0.0 {
            continue;
        }
        let r_min = y[0].hypot(y[1]).min(yt[0].hypot(yt[1]));
        if r_min == 0.0 {
            continue;
        }
        let u = field.eval_unchecked(y);
        let ut = field.eval_unchecked(yt);
        let ratio = (u[0] - ut[0]).hypot(u[1] - ut[1]) * r_min.powf(1.0 + beta) / dist.powf(beta);
        evaluated += 1;
        if ratio > best {
            best = ratio;
            best_pair = Some((y, yt));
        }
    }
    let threshold = HOLDER_CALIBRATION * a;
    Ok(RatioReport {
        max_ratio: best,
        pair: best_pair,
        pairs_evaluated: evaluated,
        holder_norm: a,
        threshold,
        pass: best <= threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos_trace() -> CircleTrace {
        CircleTrace::new(0.0, vec![1.0], vec![], 1.0).unwrap()
    }

    #[test]
    fn swirl_examples() {
        let f = build_homogeneous_field(CircleTrace::swirl(2.0 * PI));
        let v = eval_u0(&f, [1.0, 0.0]).unwrap();
        assert!((v[0]).abs() < 1e-15 && (v[1] - 1.0).abs() < 1e-15);
        let v = eval_u0(&f, [2.0, 0.0]).unwrap();
        assert!((v[1] - 0.5).abs() < 1e-15);
        let v = eval_u0(&f, [0.0, 1.0]).unwrap();
        assert!((v[0] + 1.0).abs() < 1e-15 && v[1].abs() < 1e-15);
    }

    #[test]
    fn radial_examples() {
        let f = build_homogeneous_field(cos_trace());
        let v = eval_u0(&f, [0.0, 2.0]).unwrap();
        assert!(v[0].abs() < 1e-15 && v[1].abs() < 1e-15);
        let f = build_homogeneous_field(CircleTrace::new(0.0, vec![], vec![1.0], 1.0).unwrap());
        let v = eval_u0(&f, [0.0, 1.0]).unwrap();
        assert!(v[0].abs() < 1e-15 && (v[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn origin_is_rejected() {
        let f = build_homogeneous_field(CircleTrace::swirl(1.0));
        assert_eq!(eval_u0(&f, [0.0, 0.0]), Err(LerayError::OriginEvaluation));
    }

    #[test]
    fn circulation_and_flux_examples() {
        let t = CircleTrace::new(3.0, vec![0.3, -1.2], vec![0.7], 1.0).unwrap();
        let cf = circulation_and_flux(&build_homogeneous_field(t));
        assert!((cf.circulation - 3.0).abs() < 1e-13);
        assert!(cf.flux.abs() <= FLUX_TOLERANCE && cf.flux_ok);

        let cf = circulation_and_flux(&build_homogeneous_field(CircleTrace::zero()));
        assert_eq!((cf.circulation, cf.flux), (0.0, 0.0));

        let t = CircleTrace::new(2.0 * PI, vec![0.0, 1.0], vec![], 1.0).unwrap();
        let cf = circulation_and_flux(&build_homogeneous_field(t));
        assert!((cf.circulation - 2.0 * PI).abs() < 1e-13 && cf.flux_ok);
    }

    #[test]
    fn holder_norm_examples() {
        let a = holder_norm(&CircleTrace::swirl(2.0 * PI), 1.0).unwrap();
        assert!((a - 2.0).abs() < 1e-12, "{a}");
        assert_eq!(holder_norm(&CircleTrace::zero(), 1.0).unwrap(), 0.0);
        // sup|u0| = 1; |d/dtheta (cos t e_r)| = 1 so the seminorm is 1 as well.
        let a = holder_norm(&cos_trace(), 1.0).unwrap();
        assert!(a >= 1.0 && (a - 2.0).abs() < 1e-5, "{a}");
        assert!(matches!(
            holder_norm(&cos_trace(), 0.0),
            Err(LerayError::InvalidExponent(_))
        ));
        assert!(holder_norm(&cos_trace(), 1.5).is_err());
    }

    #[test]
    fn holder_norm_is_monotone_under_refinement() {
        let t = CircleTrace::new(1.0, vec![0.5, 0.2], vec![0.1, 0.0, 0.4], 0.5).unwrap();
        let mut prev = 0.0;
        for m in [64, 128, 256, 512, 1024, 2048] {
            let a = holder_norm_with_samples(&t, 0.5, m).unwrap();
            assert!(a >= prev - 1e-15);
            prev = a;
        }
    }

    #[test]
    fn holder_norm_is_rotation_invariant() {
        let t = CircleTrace::new(1.0, vec![0.5, 0.2], vec![0.1], 1.0).unwrap();
        let a = holder_norm(&t, 1.0).unwrap();
        let step = 2.0 * PI / HOLDER_SAMPLES as f64;
        for k in [1, 17, 300] {
            let b = holder_norm(&t.rotated(k as f64 * step), 1.0).unwrap();
            assert!((a - b).abs() < 1e-10);
        }
        let b = holder_norm(&t.rotated(0.123), 1.0).unwrap();
        assert!((a - b).abs() < 1e-5);
    }

    #[test]
    fn global_holder_check() {
        let zero = build_homogeneous_field(CircleTrace::zero());
        let r = check_global_holder(&zero, 1.0, 100, 7).unwrap();
        assert_eq!(r.max_ratio, 0.0);
        assert!(r.pass);

        let swirl = build_homogeneous_field(CircleTrace::swirl(2.0 * PI));
        let r = check_global_holder(&swirl, 1.0, 10_000, 11).unwrap();
        assert!(r.pass && r.max_ratio <= 32.0 * 2.0, "{r:?}");
        assert!(r.max_ratio > 0.1);

        let r = check_global_holder(&swirl, 1.0, 2, 3).unwrap();
        assert!(r.pairs_evaluated <= 2 && r.max_ratio.is_finite());
        assert!(check_global_holder(&swirl, 1.0, 1, 3).is_err());
    }

    #[test]
    fn cartesian_modes_reproduce_trace() {
        let t = CircleTrace::new(1.3, vec![0.4, -0.2], vec![0.7, 0.1, 0.3], 1.0).unwrap();
        let field = build_homogeneous_field(t.clone());
        let modes = t.cartesian_modes();
        for i in 0..50 {
            let th = 0.13 * i as f64;
            let u = field.on_circle(th);
            for c in 0..2 {
                let (ref a, ref b) = modes[c];
                let v: f64 = (0..a.len())
                    .map(|m| a[m] * (m as f64 * th).cos() + b[m] * (m as f64 * th).sin())
                    .sum();
                assert!((v - u[c]).abs() < 1e-14);
            }
        }
    }
}
