//! Fourier toolbox on the periodic truncation of R^2.
//!
//! Spectra follow the continuous-transform convention
//! `c(k) = h^2 sum_j f(x_j) exp(-i k.x_j)`, so coefficients approximate the
//! Fourier transform of the truncated field and multipliers act exactly as
//! they do on R^2.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{LerayError, Result};
use crate::grid::{Grid, GridVectorField, ScalarField, TensorGridField};

type Plans = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

thread_local! {
    static PLANS: RefCell<HashMap<usize, Plans>> = RefCell::new(HashMap::new());
}

fn plans(n: usize) -> Plans {
    PLANS.with(|p| {
        p.borrow_mut()
            .entry(n)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
            })
            .clone()
    })
}

fn transpose(buf: &mut [Complex64], n: usize) {
    const TILE: usize = 32;
    for bj in (0..n).step_by(TILE) {
        for bi in (bj..n).step_by(TILE) {
            for j in bj..(bj + TILE).min(n) {
                let start = if bi == bj { j + 1 } else { bi };
                for i in start..(bi + TILE).min(n) {
                    buf.swap(j * n + i, i * n + j);
                }
            }
        }
    }
}

/// Unnormalized in-place 2D transform of an n x n row-major buffer.
fn fft2(buf: &mut [Complex64], n: usize, inverse: bool) {
    let (fwd, inv) = plans(n);
    let plan = if inverse { inv } else { fwd };
    let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
    plan.process_with_scratch(buf, &mut scratch);
    transpose(buf, n);
    plan.process_with_scratch(buf, &mut scratch);
    transpose(buf, n);
}

#[inline]
fn checker(i: usize, j: usize) -> f64 {
    if (i + j).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Fourier coefficients of one or more field components on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub grid: Grid,
    pub comps: Vec<Vec<Complex64>>,
}

impl Spectrum {
    pub fn zeros(grid: Grid, components: usize) -> Self {
        Spectrum {
            grid,
            comps: vec![vec![Complex64::new(0.0, 0.0); grid.len()]; components],
        }
    }

    /// l2 norm of the coefficients, scaled so that it equals the grid L2 norm
    /// of the inverse transform (Parseval).
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.comps.iter().flat_map(|c| c.iter()).map(|z| z.norm_sqr()).sum();
        let l2 = 2.0 * self.grid.half_width;
        (s / (l2 * l2)).sqrt()
    }

    pub fn check_same(&self, other: &Spectrum) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        if self.comps.len() != other.comps.len() {
            return Err(LerayError::GridMismatch);
        }
        Ok(())
    }

    /// Squared wavenumber |k|^2 of bin `idx`.
    #[inline]
    pub fn k2(&self, idx: usize) -> f64 {
        let (kx, ky) = self.k(idx);
        kx * kx + ky * ky
    }

    #[inline]
    pub fn k(&self, idx: usize) -> (f64, f64) {
        let n = self.grid.n;
        (self.grid.wavenumber(idx % n), self.grid.wavenumber(idx / n))
    }
}

/// Forward transform of real samples. Two components share one complex FFT.
pub fn real_to_spectrum(grid: &Grid, components: &[&[f64]]) -> Spectrum {
    let n = grid.n;
    let scale = grid.cell_area();
    let mut out = Vec::with_capacity(components.len());
    for chunk in components.chunks(2) {
        let mut buf: Vec<Complex64> = match chunk {
            [a, b] => a.iter().zip(b.iter()).map(|(&x, &y)| Complex64::new(x, y)).collect(),
            [a] => a.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            _ => unreachable!(),
        };
        fft2(&mut buf, n, false);
        let mirror: Vec<usize> = (0..n).map(|i| (n - i) % n).collect();
        if chunk.len() == 2 {
            let mut ca = vec![Complex64::new(0.0, 0.0); n * n];
            let mut cb = vec![Complex64::new(0.0, 0.0); n * n];
            for j in 0..n {
                let mj = mirror[j] * n;
                for i in 0..n {
                    let z = buf[j * n + i];
                    let zm = buf[mj + mirror[i]].conj();
                    let s = scale * checker(i, j);
                    ca[j * n + i] = (z + zm) * (0.5 * s);
                    cb[j * n + i] = (z - zm) * Complex64::new(0.0, -0.5 * s);
                }
            }
            out.push(ca);
            out.push(cb);
        } else {
            for j in 0..n {
                for i in 0..n {
                    buf[j * n + i] *= scale * checker(i, j);
                }
            }
            out.push(buf);
        }
    }
    Spectrum {
        grid: *grid,
        comps: out,
    }
}

/// Inverse transform, keeping the real part.
pub fn spectrum_to_real(spec: &Spectrum) -> Vec<Vec<f64>> {
    let grid = spec.grid;
    let n = grid.n;
    let l2 = 2.0 * grid.half_width;
    let scale = 1.0 / (l2 * l2);
    let mut out = Vec::with_capacity(spec.comps.len());
    for chunk in spec.comps.chunks(2) {
        let mut buf: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            for i in 0..n {
                let idx = j * n + i;
                let s = scale * checker(i, j);
                buf[idx] = match chunk {
                    [a, b] => (a[idx] + Complex64::i() * b[idx]) * s,
                    [a] => a[idx] * s,
                    _ => unreachable!(),
                };
            }
        }
        fft2(&mut buf, n, true);
        out.push(buf.iter().map(|z| z.re).collect());
        if chunk.len() == 2 {
            out.push(buf.iter().map(|z| z.im).collect());
        }
    }
    out
}

pub fn to_spectrum(field: &GridVectorField) -> Spectrum {
    real_to_spectrum(&field.grid, &[&field.u[0], &field.u[1]])
}

pub fn from_spectrum(spec: &Spectrum) -> Result<GridVectorField> {
    if spec.comps.len() != 2 {
        return Err(LerayError::GridMismatch);
    }
    let mut comps = spectrum_to_real(spec);
    let u1 = comps.pop().expect("two components");
    let u0 = comps.pop().expect("two components");
    Ok(GridVectorField {
        grid: spec.grid,
        u: [u0, u1],
    })
}

pub fn scalar_to_spectrum(field: &ScalarField) -> Spectrum {
    real_to_spectrum(&field.grid, &[&field.data])
}

pub fn scalar_from_spectrum(spec: &Spectrum) -> Result<ScalarField> {
    if spec.comps.len() != 1 {
        return Err(LerayError::GridMismatch);
    }
    Ok(ScalarField {
        grid: spec.grid,
        data: spectrum_to_real(spec).pop().expect("one component"),
    })
}

/// Symmetric tensor spectrum, components (11, 12, 22). The 21 component of
/// the input is ignored, so this is only for symmetric tensors.
pub fn symmetric_tensor_spectrum(t: &TensorGridField) -> Spectrum {
    real_to_spectrum(&t.grid, &[&t.c[0], &t.c[1], &t.c[3]])
}

/// Multiplier I - k k^T / |k|^2; the k = 0 mode passes through.
pub fn leray_project(spec: &Spectrum) -> Spectrum {
    let mut out = spec.clone();
    leray_project_in_place(&mut out);
    out
}

pub fn leray_project_in_place(spec: &mut Spectrum) {
    debug_assert_eq!(spec.comps.len(), 2);
    let (a, b) = spec.comps.split_at_mut(1);
    let (u, v) = (&mut a[0], &mut b[0]);
    for idx in 0..u.len() {
        let n = spec.grid.n;
        let kx = spec.grid.wavenumber(idx % n);
        let ky = spec.grid.wavenumber(idx / n);
        let k2 = kx * kx + ky * ky;
        if k2 == 0.0 {
            continue;
        }
        let dot = (u[idx] * kx + v[idx] * ky) / k2;
        u[idx] -= dot * kx;
        v[idx] -= dot * ky;
    }
}

/// Multiplier exp(-t |k|^2).
pub fn heat_propagate(spec: &Spectrum, t: f64) -> Result<Spectrum> {
    if t < 0.0 {
        return Err(LerayError::NegativeTime(t));
    }
    let mut out = spec.clone();
    if t == 0.0 {
        return Ok(out);
    }
    for c in out.comps.iter_mut() {
        for (idx, z) in c.iter_mut().enumerate() {
            let n = spec.grid.n;
            let kx = spec.grid.wavenumber(idx % n);
            let ky = spec.grid.wavenumber(idx / n);
            *z *= (-t * (kx * kx + ky * ky)).exp();
        }
    }
    Ok(out)
}

/// Solves Delta u = f in the zero-mean gauge: divide by -|k|^2, k = 0 set to 0.
pub fn inverse_laplacian(spec: &Spectrum) -> Spectrum {
    let mut out = spec.clone();
    for c in out.comps.iter_mut() {
        for (idx, z) in c.iter_mut().enumerate() {
            let k2 = spec.k2(idx);
            *z = if k2 == 0.0 { Complex64::new(0.0, 0.0) } else { -*z / k2 };
        }
    }
    out
}

/// Spectral derivative along `axis` (0 = x, 1 = y) of every component.
/// Nyquist modes are zeroed so the result stays real.
pub fn derivative(spec: &Spectrum, axis: usize) -> Spectrum {
    let mut out = spec.clone();
    let n = spec.grid.n;
    for c in out.comps.iter_mut() {
        for (idx, z) in c.iter_mut().enumerate() {
            let (i, j) = (idx % n, idx / n);
            if spec.grid.is_nyquist(i) || spec.grid.is_nyquist(j) {
                *z = Complex64::new(0.0, 0.0);
                continue;
            }
            let k = if axis == 0 {
                spec.grid.wavenumber(i)
            } else {
                spec.grid.wavenumber(j)
            };
            *z *= Complex64::new(0.0, k);
        }
    }
    out
}

/// Multiplier -|k|^2.
pub fn laplacian(spec: &Spectrum) -> Spectrum {
    let mut out = spec.clone();
    for c in out.comps.iter_mut() {
        for (idx, z) in c.iter_mut().enumerate() {
            *z *= -spec.k2(idx);
        }
    }
    out
}

/// Divergence of a two-component spectrum.
pub fn divergence(spec: &Spectrum) -> Spectrum {
    let dx = derivative(
        &Spectrum {
            grid: spec.grid,
            comps: vec![spec.comps[0].clone()],
        },
        0,
    );
    let dy = derivative(
        &Spectrum {
            grid: spec.grid,
            comps: vec![spec.comps[1].clone()],
        },
        1,
    );
    let comps = vec![dx.comps[0].iter().zip(&dy.comps[0]).map(|(a, b)| a + b).collect()];
    Spectrum { grid: spec.grid, comps }
}

/// Zeroes modes with |frequency index| > n/3 along either axis.
pub fn dealias(spec: &mut Spectrum) {
    let n = spec.grid.n;
    let keep = band_mask(&spec.grid);
    for c in spec.comps.iter_mut() {
        for (j, row) in c.chunks_mut(n).enumerate() {
            if !keep[j] {
                row.fill(Complex64::new(0.0, 0.0));
                continue;
            }
            for (z, &k) in row.iter_mut().zip(&keep) {
                if !k {
                    *z = Complex64::new(0.0, 0.0);
                }
            }
        }
    }
}

/// Per-bin flag: inside the 2/3-rule band.
fn band_mask(grid: &Grid) -> Vec<bool> {
    let cut = (grid.n / 3) as i64;
    (0..grid.n).map(|i| grid.frequency_index(i).abs() <= cut).collect()
}

/// Wavenumbers along one axis, indexed by FFT bin.
pub fn axis_wavenumbers(grid: &Grid) -> Vec<f64> {
    (0..grid.n).map(|i| grid.wavenumber(i)).collect()
}

#[inline]
fn project_div(t11: Complex64, t12: Complex64, t22: Complex64, kx: f64, ky: f64) -> (Complex64, Complex64) {
    let ik = Complex64::i();
    let mut d1 = ik * (t11 * kx + t12 * ky);
    let mut d2 = ik * (t12 * kx + t22 * ky);
    let k2 = kx * kx + ky * ky;
    if k2 > 0.0 {
        let dot = (d1 * kx + d2 * ky) / k2;
        d1 -= dot * kx;
        d2 -= dot * ky;
    }
    (d1, d2)
}

/// Spectrum of `P div T` for a symmetric tensor spectrum (11, 12, 22), where
/// `(div T)_i = d_j T_ji`. No heat factor or dealiasing is applied.
pub fn projected_divergence(tensor: &Spectrum) -> Spectrum {
    let grid = tensor.grid;
    let n = grid.n;
    let k = axis_wavenumbers(&grid);
    let mut out = Spectrum::zeros(grid, 2);
    for j in 0..n {
        if grid.is_nyquist(j) {
            continue;
        }
        for i in 0..n {
            if grid.is_nyquist(i) {
                continue;
            }
            let idx = j * n + i;
            let (d1, d2) = project_div(
                tensor.comps[0][idx],
                tensor.comps[1][idx],
                tensor.comps[2][idx],
                k[i],
                k[j],
            );
            out.comps[0][idx] = d1;
            out.comps[1][idx] = d2;
        }
    }
    out
}

/// Adds `weight exp(-t |k|^2) P(i k . T)` to `acc` on the modes kept by
/// [`dealias`]; modes outside the band are left untouched.
pub fn accumulate_oseen_div(tensor: &Spectrum, t: f64, weight: f64, acc: &mut Spectrum) {
    let grid = tensor.grid;
    let n = grid.n;
    let k = axis_wavenumbers(&grid);
    let keep = band_mask(&grid);
    let heat: Vec<f64> = k.iter().map(|kk| (-t * kk * kk).exp()).collect();
    let (a, b) = acc.comps.split_at_mut(1);
    let (out1, out2) = (&mut a[0], &mut b[0]);
    for j in 0..n {
        if !keep[j] {
            continue;
        }
        for i in 0..n {
            if !keep[i] {
                continue;
            }
            let idx = j * n + i;
            let f = weight * heat[i] * heat[j];
            let (d1, d2) = project_div(
                tensor.comps[0][idx],
                tensor.comps[1][idx],
                tensor.comps[2][idx],
                k[i],
                k[j],
            );
            out1[idx] += d1 * f;
            out2[idx] += d2 * f;
        }
    }
}

/// exp(t Delta) P div applied to a tensor field, with 2/3-rule dealiasing of
/// the tensor spectrum.
pub fn oseen_apply_div(tensor: &TensorGridField, t: f64) -> Result<GridVectorField> {
    if t < 0.0 {
        return Err(LerayError::NegativeTime(t));
    }
    let spec = symmetric_tensor_spectrum(tensor);
    let mut out = Spectrum::zeros(tensor.grid, 2);
    accumulate_oseen_div(&spec, t, 1.0, &mut out);
    from_spectrum(&out)
}

/// Product of two fields with the 3/2 zero-padding rule: the result carries
/// the exact convolution on the modes retained by [`dealias`] and nothing
/// outside them.
pub fn dealiased_product(grid: &Grid, a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = grid.n;
    let m = 3 * n / 2;
    let cut = (n / 3) as i64;
    let mut coarse: Vec<Complex64> = a.iter().zip(b).map(|(&x, &y)| Complex64::new(x, y)).collect();
    fft2(&mut coarse, n, false);
    let mirror = |i: usize| (n - i) % n;
    let mut fine = [
        vec![Complex64::new(0.0, 0.0); m * m],
        vec![Complex64::new(0.0, 0.0); m * m],
    ];
    for j in 0..n {
        for i in 0..n {
            let fi = grid.frequency_index(i);
            let fj = grid.frequency_index(j);
            if fi.abs() > cut || fj.abs() > cut {
                continue;
            }
            let z = coarse[j * n + i];
            let zm = coarse[mirror(j) * n + mirror(i)].conj();
            let pi = fi.rem_euclid(m as i64) as usize;
            let pj = fj.rem_euclid(m as i64) as usize;
            fine[0][pj * m + pi] = (z + zm) * 0.5;
            fine[1][pj * m + pi] = (z - zm) * Complex64::new(0.0, -0.5);
        }
    }
    let norm = 1.0 / (n * n) as f64;
    let mut vals = Vec::with_capacity(2);
    for c in fine.iter_mut() {
        fft2(c, m, true);
        vals.push(c.iter().map(|z| z.re * norm).collect::<Vec<f64>>());
    }
    let mut prod: Vec<Complex64> = vals[0]
        .iter()
        .zip(&vals[1])
        .map(|(x, y)| Complex64::new(x * y, 0.0))
        .collect();
    fft2(&mut prod, m, false);
    let back = (n * n) as f64 / (m * m) as f64;
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        for i in 0..n {
            let fi = grid.frequency_index(i);
            let fj = grid.frequency_index(j);
            if fi.abs() > cut || fj.abs() > cut {
                continue;
            }
            let pi = fi.rem_euclid(m as i64) as usize;
            let pj = fj.rem_euclid(m as i64) as usize;
            out[j * n + i] = prod[pj * m + pi] * back;
        }
    }
    fft2(&mut out, n, true);
    out.iter().map(|z| z.re * norm).collect()
}

/// Spectral divergence of a periodic vector field.
pub fn spectral_divergence(field: &GridVectorField) -> ScalarField {
    let div = divergence(&to_spectrum(field));
    scalar_from_spectrum(&div).expect("scalar spectrum")
}

/// Divergence of a non-periodic field restricted to a smooth window:
/// `div(chi u) - u . grad chi = chi div u`, with the first term taken
/// spectrally. `window` returns (chi, grad chi).
pub fn windowed_divergence(field: &GridVectorField, window: impl Fn([f64; 2]) -> (f64, [f64; 2])) -> ScalarField {
    let grid = field.grid;
    let mut tapered = field.clone();
    let mut correction = vec![0.0; grid.len()];
    for k in 0..grid.len() {
        let (chi, dchi) = window(grid.point(k));
        tapered.u[0][k] *= chi;
        tapered.u[1][k] *= chi;
        correction[k] = field.u[0][k] * dchi[0] + field.u[1][k] * dchi[1];
    }
    let mut div = spectral_divergence(&tapered);
    for (d, c) in div.data.iter_mut().zip(&correction) {
        *d -= c;
    }
    div
}

/// Spectral gradient of a periodic vector field: `out[a][b] = d_b u_a`.
pub fn vector_gradient(field: &GridVectorField) -> [[Vec<f64>; 2]; 2] {
    let spec = to_spectrum(field);
    let mut dx = spectrum_to_real(&derivative(&spec, 0));
    let mut dy = spectrum_to_real(&derivative(&spec, 1));
    let (dx1, dx0) = (dx.pop().unwrap(), dx.pop().unwrap());
    let (dy1, dy0) = (dy.pop().unwrap(), dy.pop().unwrap());
    [[dx0, dy0], [dx1, dy1]]
}

/// C-infinity step built from `exp(-1/t)`: 0 for t <= 0, 1 for t >= 1.
/// Returns the value and the derivative.
pub fn smooth_step(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0);
    }
    if t >= 1.0 {
        return (1.0, 0.0);
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    let da = a / (t * t);
    let db = -b / ((1.0 - t) * (1.0 - t));
    let s = a + b;
    (a / s, (da * b - a * db) / (s * s))
}

/// Radial window equal to 1 for |y| <= inner and 0 for |y| >= outer, in the
/// form expected by [`windowed_divergence`].
pub fn radial_window(inner: f64, outer: f64) -> impl Fn([f64; 2]) -> (f64, [f64; 2]) {
    move |y: [f64; 2]| {
        let r = y[0].hypot(y[1]);
        let (s, ds) = smooth_step((r - inner) / (outer - inner));
        if r == 0.0 || ds == 0.0 {
            return (1.0 - s, [0.0, 0.0]);
        }
        let g = -ds / ((outer - inner) * r);
        (1.0 - s, [g * y[0], g * y[1]])
    }
}
