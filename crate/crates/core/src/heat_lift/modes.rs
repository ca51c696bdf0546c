//! Angular-mode representation of the caloric lift.
//!
//! For a scalar datum `cos(n theta)/r` the heat flow at t = 1 is
//! `cos(n phi) R_n(rho)` with
//!
//! ```text
//! R_n(rho) = sqrt(pi)/2 * exp(-x) I_{n/2}(x),   x = rho^2 / 8,
//! ```
//!
//! which follows from the Gaussian integral of `I_n` in the radial variable.
//! `R_1(rho) = (1 - exp(-rho^2/4)) / rho` is the Oseen profile. Each
//! Cartesian component of u0 is a trigonometric polynomial over `r`, so v0
//! is a finite sum of these profiles.

use std::f64::consts::PI;

use crate::initial_data::CircleTrace;

use super::Jet;

const TABLE_STEP: f64 = 0.02;
/// Beyond this radius (x = 200) the asymptotic expansion is used directly.
const TABLE_RADIUS: f64 = 40.0;
const SMALL_X: f64 = 2.0;
const SERIES_TERMS: usize = 48;

fn half_sqrt_pi() -> f64 {
    0.5 * PI.sqrt()
}

/// exp(-x) I_nu(x) by its positive power series, accurate for moderate x.
fn scaled_bessel_i_series(nu: f64, x: f64) -> f64 {
    if x == 0.0 {
        return if nu == 0.0 { 1.0 } else { 0.0 };
    }
    let log_t0 = nu * (0.5 * x).ln() - libm::lgamma(nu + 1.0) - x;
    let mut term = log_t0.exp();
    let mut sum = term;
    let q = 0.25 * x * x;
    let mut k = 0.0;
    loop {
        term *= q / ((k + 1.0) * (k + 1.0 + nu));
        sum += term;
        k += 1.0;
        if k > x && term < 1e-18 * sum {
            break;
        }
        if k > 5000.0 {
            break;
        }
    }
    sum
}

/// exp(-x) I_nu(x) and its x-derivative from the large-argument expansion.
fn scaled_bessel_i_asymptotic(nu: f64, x: f64) -> (f64, f64) {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0_f64;
    let mut sum = 1.0;
    let mut dsum = -0.5 / x;
    for k in 1..80 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        let next = -term * (mu - odd * odd) / (8.0 * kf * x);
        if next.abs() > term.abs() && k > 2 {
            break;
        }
        term = next;
        sum += term;
        dsum += term * (-(kf + 0.5) / x);
        if term.abs() < 1e-18 {
            break;
        }
    }
    let pre = 1.0 / (2.0 * PI * x).sqrt();
    (pre * sum, pre * dsum)
}

/// Power-series coefficients of `P(x) = x^{-nu} exp(-x) I_nu(x)`.
fn small_series_coefficients(nu: f64) -> Vec<f64> {
    let mut coeffs = vec![0.0; SERIES_TERMS];
    for (j, c) in coeffs.iter_mut().enumerate() {
        let mut acc = 0.0;
        let mut k = 0;
        while 2 * k <= j {
            let i = j - 2 * k;
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let log_mag = -libm::lgamma(i as f64 + 1.0)
                - (2.0 * k as f64 + nu) * std::f64::consts::LN_2
                - libm::lgamma(k as f64 + 1.0)
                - libm::lgamma(k as f64 + nu + 1.0);
            acc += sign * log_mag.exp();
            k += 1;
        }
        *c = acc;
    }
    coeffs
}

/// Exact (R, R', R'') of mode `n` at radius `rho`, evaluated without tables.
pub fn radial_jet(n: usize, rho: f64) -> [f64; 3] {
    let nu = 0.5 * n as f64;
    let nf = n as f64;
    let x = rho * rho / 8.0;
    let c0 = half_sqrt_pi();
    if x <= SMALL_X {
        let coeffs = small_series_coefficients(nu);
        let (mut p, mut dp, mut ddp) = (0.0, 0.0, 0.0);
        for (j, c) in coeffs.iter().enumerate().rev() {
            let jf = j as f64;
            p = p * x + c;
            if j >= 1 {
                dp = dp * x + jf * c;
            }
            if j >= 2 {
                ddp = ddp * x + jf * (jf - 1.0) * c;
            }
        }
        let q = p;
        let dq = dp * rho / 4.0;
        let ddq = ddp * rho * rho / 16.0 + dp / 4.0;
        let c = c0 * 8f64.powf(-nu);
        let pw = |e: i32| if e < 0 { 0.0 } else { rho.powi(e) };
        let n_i = n as i32;
        let r = c * pw(n_i) * q;
        let mut dr = c * pw(n_i) * dq;
        let mut ddr = c * pw(n_i) * ddq;
        if n >= 1 {
            dr += c * nf * pw(n_i - 1) * q;
            ddr += c * 2.0 * nf * pw(n_i - 1) * dq;
        }
        if n >= 2 {
            ddr += c * nf * (nf - 1.0) * pw(n_i - 2) * q;
        }
        return [r, dr, ddr];
    }
    let (e, de) = if x <= 200.0 {
        let e = scaled_bessel_i_series(nu, x);
        let e1 = scaled_bessel_i_series(nu + 1.0, x);
        (e, e1 + (nu / x - 1.0) * e)
    } else {
        scaled_bessel_i_asymptotic(nu, x)
    };
    let r = c0 * e;
    let dr = c0 * de * rho / 4.0;
    let ddr = -(1.0 / rho + 0.5 * rho) * dr + (nf * nf / (rho * rho) - 0.5) * r;
    [r, dr, ddr]
}

/// Tabulated radial profile with quintic Hermite interpolation.
#[derive(Debug, Clone)]
pub(crate) struct ModeProfile {
    n: usize,
    table: Vec<[f64; 3]>,
}

impl ModeProfile {
    pub(crate) fn new(n: usize) -> Self {
        let count = (TABLE_RADIUS / TABLE_STEP).round() as usize + 1;
        let table = (0..count).map(|i| radial_jet(n, i as f64 * TABLE_STEP)).collect();
        ModeProfile { n, table }
    }

    /// (R, R') at `rho`.
    #[inline]
    pub(crate) fn eval(&self, rho: f64) -> (f64, f64) {
        let s = rho / TABLE_STEP;
        let i = s.floor() as usize;
        if i + 1 >= self.table.len() {
            let j = radial_jet(self.n, rho);
            return (j[0], j[1]);
        }
        let t = s - i as f64;
        let h = TABLE_STEP;
        let [f0, d0, s0] = self.table[i];
        let [f1, d1, s1] = self.table[i + 1];
        let t2 = t * t;
        let t3 = t2 * t;
        let t4 = t3 * t;
        let t5 = t4 * t;
        let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
        let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
        let h2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
        let h3 = 0.5 * (t3 - 2.0 * t4 + t5);
        let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
        let h5 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
        let value = f0 * h0 + h * d0 * h1 + h * h * s0 * h2 + f1 * h5 + h * d1 * h4 + h * h * s1 * h3;
        let g0 = -30.0 * t2 + 60.0 * t3 - 30.0 * t4;
        let g1 = 1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4;
        let g2 = 0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4);
        let g3 = 0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4);
        let g4 = -12.0 * t2 + 28.0 * t3 - 15.0 * t4;
        let g5 = 30.0 * t2 - 60.0 * t3 + 30.0 * t4;
        let deriv = (f0 * g0 + h * d0 * g1 + h * h * s0 * g2 + f1 * g5 + h * d1 * g4 + h * h * s1 * g3) / h;
        (value, deriv)
    }
}

/// v0 as a finite sum of angular modes times tabulated radial profiles.
#[derive(Debug, Clone)]
pub struct ModalHeatLift {
    /// Per Cartesian component: (cos coefficients, sin coefficients) by mode.
    coeffs: [(Vec<f64>, Vec<f64>); 2],
    profiles: Vec<Option<ModeProfile>>,
}

impl ModalHeatLift {
    pub fn new(trace: &CircleTrace) -> Self {
        let coeffs = trace.cartesian_modes();
        let m_len = coeffs[0].0.len();
        let profiles = (0..m_len)
            .map(|m| {
                let used = coeffs.iter().any(|(a, b)| a[m] != 0.0 || b[m] != 0.0);
                used.then(|| ModeProfile::new(m))
            })
            .collect();
        ModalHeatLift { coeffs, profiles }
    }

    pub fn is_zero(&self) -> bool {
        self.profiles.iter().all(|p| p.is_none())
    }

    pub fn eval(&self, y: [f64; 2]) -> Jet {
        let rho = y[0].hypot(y[1]);
        let (c1, s1) = if rho > 0.0 {
            (y[0] / rho, y[1] / rho)
        } else {
            (1.0, 0.0)
        };
        let mut value = [0.0; 2];
        let mut d_rho = [0.0; 2];
        let mut d_phi = [0.0; 2];
        // cos(m phi), sin(m phi) by recurrence
        let (mut cm, mut sm) = (1.0, 0.0);
        for (m, profile) in self.profiles.iter().enumerate() {
            if m > 0 {
                let next_c = cm * c1 - sm * s1;
                sm = sm * c1 + cm * s1;
                cm = next_c;
            }
            let Some(profile) = profile else { continue };
            let (r, dr) = profile.eval(rho);
            let r_over_rho = if rho > 1e-8 {
                r / rho
            } else if m == 1 {
                dr
            } else {
                0.0
            };
            for c in 0..2 {
                let a = self.coeffs[c].0[m];
                let b = self.coeffs[c].1[m];
                let ang = a * cm + b * sm;
                value[c] += r * ang;
                d_rho[c] += dr * ang;
                d_phi[c] += r_over_rho * m as f64 * (b * cm - a * sm);
            }
        }
        let mut grad = [[0.0; 2]; 2];
        for c in 0..2 {
            grad[c][0] = c1 * d_rho[c] - s1 * d_phi[c];
            grad[c][1] = s1 * d_rho[c] + c1 * d_phi[c];
        }
        Jet { value, grad }
    }
}
