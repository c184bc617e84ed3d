//! Periodic grids, sampled complex fields and their n-dimensional transforms.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform periodic grid on [−L, L)ⁿ with N points per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub n: usize,
    pub half_width: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn new(n: usize, half_width: f64, points: usize) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(Error::Domain(format!("grid dimension must be 1, 2 or 3, got {n}")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::Domain(format!("half width must be positive, got {half_width}")));
        }
        if points < 8 || !points.is_power_of_two() {
            return Err(Error::Domain(format!(
                "points per axis must be a power of two >= 8, got {points}"
            )));
        }
        Ok(Self {
            n,
            half_width,
            points,
        })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    /// Total number of samples, N^n.
    pub fn len(&self) -> usize {
        self.points.pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume element hⁿ of the trapezoid rule.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.n as i32)
    }

    /// Coordinate of the i-th sample along one axis.
    pub fn axis_coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    /// Admissible frequency π k / L of the i-th FFT bin, k ∈ [−N/2, N/2).
    pub fn axis_frequency(&self, i: usize) -> f64 {
        let n = self.points as isize;
        let k = if (i as isize) < n / 2 { i as isize } else { i as isize - n };
        std::f64::consts::PI * k as f64 / self.half_width
    }

    /// Multi-index (row-major, last axis fastest) of a flat index.
    pub fn unravel(&self, mut flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        for axis in (0..self.n).rev() {
            idx[axis] = flat % self.points;
            flat /= self.points;
        }
        idx
    }

    pub fn coords(&self, flat: usize) -> [f64; 3] {
        let idx = self.unravel(flat);
        let mut x = [0.0; 3];
        for axis in 0..self.n {
            x[axis] = self.axis_coord(idx[axis]);
        }
        x
    }

    /// |ξ|² at a flat index of the transformed array.
    pub fn frequency_norm_sqr(&self, flat: usize) -> f64 {
        let idx = self.unravel(flat);
        (0..self.n).map(|a| self.axis_frequency(idx[a]).powi(2)).sum()
    }

    /// Largest |ξ| on the grid.
    pub fn max_frequency(&self) -> f64 {
        std::f64::consts::PI * (self.points / 2) as f64 / self.half_width * (self.n as f64).sqrt()
    }

    /// Samples a function of position.
    pub fn sample<F>(&self, f: F) -> ScalarField
    where
        F: Fn(&[f64]) -> Complex64,
    {
        let values = (0..self.len())
            .map(|i| {
                let x = self.coords(i);
                f(&x[..self.n])
            })
            .collect();
        ScalarField {
            grid: *self,
            values,
        }
    }

    pub fn sample_real<F>(&self, f: F) -> ScalarField
    where
        F: Fn(&[f64]) -> f64,
    {
        self.sample(|x| Complex64::new(f(x), 0.0))
    }
}

/// Complex samples on a [`GridSpec`], row-major over axes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub values: Vec<Complex64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_values(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Domain(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Discrete L² norm (trapezoid rule on the periodic grid).
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|z| z.norm_sqr()).sum();
        (s * self.grid.cell_volume()).sqrt()
    }

    /// ∫ f by the periodic trapezoid rule.
    pub fn integral(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() * self.grid.cell_volume()
    }

    pub fn max_abs_imag(&self) -> f64 {
        self.values.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    /// Value of the trigonometric interpolant at an arbitrary point.
    ///
    /// The Nyquist mode is split symmetrically so real data interpolate to real
    /// values.
    pub fn interpolate(&self, x: &[f64]) -> Complex64 {
        let grid = self.grid;
        let mut coeffs = self.values.clone();
        FftPlan::new(grid).forward(&mut coeffs);
        let npts = grid.points;
        let axis_weights: Vec<Vec<Complex64>> = (0..grid.n)
            .map(|a| {
                let shift = x[a] + grid.half_width;
                (0..npts)
                    .map(|i| {
                        if i == npts / 2 {
                            let xi = grid.axis_frequency(i);
                            Complex64::new((xi * shift).cos(), 0.0)
                        } else {
                            Complex64::from_polar(1.0, grid.axis_frequency(i) * shift)
                        }
                    })
                    .collect()
            })
            .collect();
        let mut acc = Complex64::new(0.0, 0.0);
        for (flat, c) in coeffs.iter().enumerate() {
            let idx = grid.unravel(flat);
            let mut w = Complex64::new(1.0, 0.0);
            for a in 0..grid.n {
                w *= axis_weights[a][idx[a]];
            }
            acc += c * w;
        }
        acc / grid.len() as f64
    }

    /// Writes the flat little-endian layout: n, N (u64), L (f64), then
    /// interleaved re/im f64 pairs in row-major order.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(&(self.grid.n as u64).to_le_bytes())?;
        w.write_all(&(self.grid.points as u64).to_le_bytes())?;
        w.write_all(&self.grid.half_width.to_le_bytes())?;
        for z in &self.values {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut word)
                .map_err(|e| Error::Domain(format!("truncated field file: {e}")))?;
            Ok(word)
        };
        let n = u64::from_le_bytes(next(&mut r)?) as usize;
        let points = u64::from_le_bytes(next(&mut r)?) as usize;
        let half_width = f64::from_le_bytes(next(&mut r)?);
        let grid = GridSpec::new(n, half_width, points)?;
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            let re = f64::from_le_bytes(next(&mut r)?);
            let im = f64::from_le_bytes(next(&mut r)?);
            values.push(Complex64::new(re, im));
        }
        Ok(Self { grid, values })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_binary(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_binary(std::io::BufReader::new(file))
    }
}

/// Planned n-dimensional FFT for one grid. Forward is unnormalized, inverse
/// divides by Nⁿ.
#[derive(Clone)]
pub struct FftPlan {
    grid: GridSpec,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftPlan").field("grid", &self.grid).finish()
    }
}

impl FftPlan {
    pub fn new(grid: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            forward: planner.plan_fft_forward(grid.points),
            inverse: planner.plan_fft_inverse(grid.points),
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let scale = 1.0 / self.grid.len() as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }

    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let npts = self.grid.points;
        let total = self.grid.len();
        assert_eq!(data.len(), total);
        // last axis is contiguous
        fft.process(data);
        if self.grid.n == 1 {
            return;
        }
        let mut line = vec![Complex64::new(0.0, 0.0); npts];
        for axis in 0..self.grid.n - 1 {
            let stride = npts.pow((self.grid.n - 1 - axis) as u32);
            let block = stride * npts;
            for outer in (0..total).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (k, slot) in line.iter_mut().enumerate() {
                        *slot = data[base + k * stride];
                    }
                    fft.process(&mut line);
                    for (k, v) in line.iter().enumerate() {
                        data[base + k * stride] = *v;
                    }
                }
            }
        }
    }
}
