//! Uniform periodic grids on [-L, L)^2 and the sampled fields that live on them.
//!
//! Node `(i, j)` sits at `x = -L + i h`, `y = -L + j h` and is stored at index
//! `j * n + i` (row-major, rows are constant `y`). The origin is node
//! `(n/2, n/2)`.

use std::f64::consts::PI;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{LerayError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    /// Half-width L of the square domain.
    pub half_width: f64,
    /// Nodes per dimension.
    pub n: usize,
}

impl Grid {
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        let g = Grid { half_width, n };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 16 || !self.n.is_power_of_two() {
            return Err(LerayError::InvalidGrid(format!(
                "n = {} must be a power of two >= 16",
                self.n
            )));
        }
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return Err(LerayError::InvalidGrid(format!(
                "half-width {} must be positive",
                self.half_width
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    #[inline]
    pub fn point(&self, idx: usize) -> [f64; 2] {
        [self.coord(idx % self.n), self.coord(idx / self.n)]
    }

    /// Signed integer frequency of FFT bin `i`; the Nyquist bin maps to `-n/2`.
    #[inline]
    pub fn frequency_index(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    #[inline]
    pub fn wavenumber(&self, i: usize) -> f64 {
        PI / self.half_width * self.frequency_index(i) as f64
    }

    #[inline]
    pub fn is_nyquist(&self, i: usize) -> bool {
        i == self.n / 2
    }

    /// Quadrature weight of a node (h^2).
    #[inline]
    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h * h
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(LerayError::GridMismatch)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        ScalarField {
            grid,
            data: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let data = (0..grid.len()).map(|k| f(grid.point(k))).collect();
        ScalarField { grid, data }
    }

    pub fn l2_norm(&self) -> f64 {
        (self.data.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_area()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridVectorField {
    pub grid: Grid,
    pub u: [Vec<f64>; 2],
}

impl GridVectorField {
    pub fn zeros(grid: Grid) -> Self {
        GridVectorField {
            grid,
            u: [vec![0.0; grid.len()], vec![0.0; grid.len()]],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let mut out = Self::zeros(grid);
        for k in 0..grid.len() {
            let v = f(grid.point(k));
            out.u[0][k] = v[0];
            out.u[1][k] = v[1];
        }
        out
    }

    #[inline]
    pub fn at(&self, k: usize) -> [f64; 2] {
        [self.u[0][k], self.u[1][k]]
    }

    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.u.iter().flat_map(|c| c.iter()).map(|v| v * v).sum();
        (s * self.grid.cell_area()).sqrt()
    }

    /// Largest pointwise Euclidean magnitude.
    pub fn max_norm(&self) -> f64 {
        (0..self.grid.len())
            .map(|k| self.u[0][k].hypot(self.u[1][k]))
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().all(|c| c.iter().all(|v| v.is_finite()))
    }

    pub fn is_zero(&self) -> bool {
        self.u.iter().all(|c| c.iter().all(|&v| v == 0.0))
    }

    /// `self + factor * other`.
    pub fn axpy(&self, factor: f64, other: &GridVectorField) -> Result<GridVectorField> {
        self.grid.check_same(&other.grid)?;
        let mut out = self.clone();
        for c in 0..2 {
            for (a, b) in out.u[c].iter_mut().zip(&other.u[c]) {
                *a += factor * b;
            }
        }
        Ok(out)
    }

    pub fn scaled(&self, factor: f64) -> GridVectorField {
        let mut out = self.clone();
        for c in out.u.iter_mut() {
            for v in c.iter_mut() {
                *v *= factor;
            }
        }
        out
    }

    /// Outer product u (x) w, dense four-component tensor.
    pub fn outer(&self, other: &GridVectorField) -> Result<TensorGridField> {
        self.grid.check_same(&other.grid)?;
        let n = self.grid.len();
        let mut t = TensorGridField::zeros(self.grid);
        for k in 0..n {
            for a in 0..2 {
                for b in 0..2 {
                    t.c[2 * a + b][k] = self.u[a][k] * other.u[b][k];
                }
            }
        }
        Ok(t)
    }
}

/// Rank-two tensor samples, components ordered (11, 12, 21, 22).
#[derive(Debug, Clone, PartialEq)]
pub struct TensorGridField {
    pub grid: Grid,
    pub c: [Vec<f64>; 4],
}

impl TensorGridField {
    pub fn zeros(grid: Grid) -> Self {
        let z = vec![0.0; grid.len()];
        TensorGridField {
            grid,
            c: [z.clone(), z.clone(), z.clone(), z],
        }
    }

    #[inline]
    pub fn component(&self, a: usize, b: usize) -> &[f64] {
        &self.c[2 * a + b]
    }
}

const MAGIC: &[u8; 4] = b"LFG1";

/// Writes the binary grid-field format: magic `LFG1`, `n: u32`, `L: f64`,
/// `components: u8`, then each component as row-major little-endian f64.
pub fn write_components<W: Write>(mut w: W, grid: &Grid, components: &[&[f64]]) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(grid.n as u32).to_le_bytes())?;
    w.write_all(&grid.half_width.to_le_bytes())?;
    w.write_all(&[components.len() as u8])?;
    for c in components {
        if c.len() != grid.len() {
            return Err(LerayError::Format("component length does not match grid".into()));
        }
        let mut buf = Vec::with_capacity(8 * c.len());
        for v in c.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_components<R: Read>(mut r: R) -> Result<(Grid, Vec<Vec<f64>>)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| LerayError::Format("truncated header".into()))?;
    if &magic != MAGIC {
        return Err(LerayError::Format("bad magic".into()));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    let mut b1 = [0u8; 1];
    r.read_exact(&mut b4)
        .and_then(|_| r.read_exact(&mut b8))
        .and_then(|_| r.read_exact(&mut b1))
        .map_err(|_| LerayError::Format("truncated header".into()))?;
    let grid = Grid::new(f64::from_le_bytes(b8), u32::from_le_bytes(b4) as usize)
        .map_err(|e| LerayError::Format(e.to_string()))?;
    let mut out = Vec::with_capacity(b1[0] as usize);
    let mut buf = vec![0u8; 8 * grid.len()];
    for _ in 0..b1[0] {
        r.read_exact(&mut buf)
            .map_err(|_| LerayError::Format("truncated data".into()))?;
        out.push(
            buf.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect(),
        );
    }
    Ok((grid, out))
}

impl GridVectorField {
    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        write_components(w, &self.grid, &[&self.u[0], &self.u[1]])
    }

    pub fn read_binary<R: Read>(r: R) -> Result<Self> {
        let (grid, mut comps) = read_components(r)?;
        if comps.len() != 2 {
            return Err(LerayError::Format(format!(
                "expected 2 components, found {}",
                comps.len()
            )));
        }
        let u1 = comps.pop().expect("two components");
        let u0 = comps.pop().expect("two components");
        Ok(GridVectorField { grid, u: [u0, u1] })
    }

    /// CSV with columns `x,y,u1,u2`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,y,u1,u2")?;
        for k in 0..self.grid.len() {
            let p = self.grid.point(k);
            writeln!(w, "{},{},{:e},{:e}", p[0], p[1], self.u[0][k], self.u[1][k])?;
        }
        Ok(())
    }
}

impl ScalarField {
    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        write_components(w, &self.grid, &[&self.data])
    }

    pub fn read_binary<R: Read>(r: R) -> Result<Self> {
        let (grid, mut comps) = read_components(r)?;
        if comps.len() != 1 {
            return Err(LerayError::Format(format!(
                "expected 1 component, found {}",
                comps.len()
            )));
        }
        Ok(ScalarField {
            grid,
            data: comps.pop().expect("one component"),
        })
    }

    /// CSV with columns `x,y,q`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,y,q")?;
        for k in 0..self.grid.len() {
            let p = self.grid.point(k);
            writeln!(w, "{},{},{:e}", p[0], p[1], self.data[k])?;
        }
        Ok(())
    }
}
