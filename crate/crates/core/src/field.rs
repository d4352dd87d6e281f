//! Real scalar fields on a uniform periodic square grid and the 2-D FFT
//! plumbing shared by the spectral operator and the time stepper.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Error, Result};

/// Values on an `m × m` periodic grid of side `l`, row-major with the
/// first coordinate varying fastest: `values[j * m + i]` sits at
/// `(i h, j h)`, `h = l / m`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicField {
    l: f64,
    m: usize,
    values: Vec<f64>,
}

/// Grid description without values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridShape {
    pub l: f64,
    pub m: usize,
}

impl GridShape {
    pub fn new(l: f64, m: usize) -> Result<Self> {
        if !(l > 0.0 && l.is_finite()) {
            return invalid(format!("box side must be positive, got {l}"));
        }
        if m < 4 || !m.is_power_of_two() {
            return invalid(format!("grid size must be a power of two >= 4, got {m}"));
        }
        Ok(Self { l, m })
    }

    pub fn h(&self) -> f64 {
        self.l / self.m as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        i as f64 * self.h()
    }

    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        [self.coord(i), self.coord(j)]
    }

    pub fn len(&self) -> usize {
        self.m * self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn center(&self) -> [f64; 2] {
        [0.5 * self.l, 0.5 * self.l]
    }
}

impl PeriodicField {
    pub fn new(shape: GridShape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.len() {
            return invalid(format!(
                "field has {} values, grid needs {}",
                values.len(),
                shape.len()
            ));
        }
        Ok(Self {
            l: shape.l,
            m: shape.m,
            values,
        })
    }

    pub fn constant(shape: GridShape, c: f64) -> Self {
        Self {
            l: shape.l,
            m: shape.m,
            values: vec![c; shape.len()],
        }
    }

    pub fn from_fn(shape: GridShape, mut f: impl FnMut([f64; 2]) -> f64) -> Self {
        let mut values = Vec::with_capacity(shape.len());
        for j in 0..shape.m {
            for i in 0..shape.m {
                values.push(f(shape.point(i, j)));
            }
        }
        Self {
            l: shape.l,
            m: shape.m,
            values,
        }
    }

    pub fn shape(&self) -> GridShape {
        GridShape {
            l: self.l,
            m: self.m,
        }
    }

    pub fn side(&self) -> f64 {
        self.l
    }

    pub fn size(&self) -> usize {
        self.m
    }

    pub fn h(&self) -> f64 {
        self.l / self.m as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.m + i]
    }

    /// Periodic index access.
    #[inline]
    pub fn at_wrapped(&self, i: isize, j: isize) -> f64 {
        let m = self.m as isize;
        self.values[(j.rem_euclid(m) * m + i.rem_euclid(m)) as usize]
    }

    pub fn check_finite(&self, context: &str) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(context.to_string()))
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Grid inner product `h² Σ f g`.
    pub fn dot(&self, other: &PeriodicField) -> f64 {
        let h2 = self.h() * self.h();
        h2 * self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
    }

    /// Bicubic (Catmull-Rom) interpolation at an arbitrary point, periodic.
    pub fn interpolate(&self, p: [f64; 2]) -> f64 {
        let h = self.h();
        let fx = p[0] / h;
        let fy = p[1] / h;
        let ix = fx.floor();
        let iy = fy.floor();
        let tx = fx - ix;
        let ty = fy - iy;
        let wx = catmull_rom_weights(tx);
        let wy = catmull_rom_weights(ty);
        let (ix, iy) = (ix as isize, iy as isize);
        let mut acc = 0.0;
        for (b, wyb) in wy.iter().enumerate() {
            let mut row = 0.0;
            for (a, wxa) in wx.iter().enumerate() {
                row += wxa * self.at_wrapped(ix + a as isize - 1, iy + b as isize - 1);
            }
            acc += wyb * row;
        }
        acc
    }

    /// Binary snapshot: the tag `PNF1`, `m` as u64, `l` as f64, then the
    /// values, all little-endian.
    pub fn to_snapshot(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + 8 * self.values.len());
        out.extend_from_slice(SNAPSHOT_TAG);
        out.extend_from_slice(&(self.m as u64).to_le_bytes());
        out.extend_from_slice(&self.l.to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_snapshot(bytes: &[u8]) -> Result<Self> {
        let word = |k: usize| -> Result<[u8; 8]> {
            bytes
                .get(4 + 8 * k..12 + 8 * k)
                .map(|b| b.try_into().expect("slice of eight bytes"))
                .ok_or_else(|| Error::Parse("truncated field snapshot".into()))
        };
        if bytes.get(..4) != Some(SNAPSHOT_TAG.as_slice()) {
            return Err(Error::Parse("not a field snapshot".into()));
        }
        let m = u64::from_le_bytes(word(0)?) as usize;
        let l = f64::from_le_bytes(word(1)?);
        let shape = GridShape::new(l, m)?;
        if bytes.len() != 20 + 8 * shape.len() {
            return Err(Error::Parse("field snapshot has the wrong length".into()));
        }
        let values = (0..shape.len())
            .map(|k| word(k + 2).map(f64::from_le_bytes))
            .collect::<Result<Vec<_>>>()?;
        Self::new(shape, values)
    }
}

const SNAPSHOT_TAG: &[u8; 4] = b"PNF1";

fn catmull_rom_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

/// Square 2-D FFT with cached plans; unnormalized forward, inverse divides by `m²`.
pub struct Fft2 {
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("m", &self.m).finish()
    }
}

impl Clone for Fft2 {
    fn clone(&self) -> Self {
        Self {
            m: self.m,
            forward: Arc::clone(&self.forward),
            inverse: Arc::clone(&self.inverse),
            scratch: self.scratch.clone(),
        }
    }
}

impl Fft2 {
    pub fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        Self {
            m,
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn size(&self) -> usize {
        self.m
    }

    fn transform(&mut self, data: &mut [Complex64], inverse: bool) {
        let m = self.m;
        let plan = if inverse { &self.inverse } else { &self.forward };
        plan.process_with_scratch(data, &mut self.scratch);
        transpose_square(data, m);
        plan.process_with_scratch(data, &mut self.scratch);
        transpose_square(data, m);
    }

    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.transform(data, true);
        let scale = 1.0 / (self.m * self.m) as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

fn transpose_square(data: &mut [Complex64], m: usize) {
    const B: usize = 32;
    for bj in (0..m).step_by(B) {
        for bi in (bj..m).step_by(B) {
            for j in bj..(bj + B).min(m) {
                let start = if bi == bj { j + 1 } else { bi };
                for i in start..(bi + B).min(m) {
                    data.swap(j * m + i, i * m + j);
                }
            }
        }
    }
}

/// Signed integer wavenumber index in FFT order.
#[inline]
pub fn fft_index(q: usize, m: usize) -> f64 {
    if q <= m / 2 {
        q as f64
    } else {
        q as f64 - m as f64
    }
}

/// `|k|` for every mode in FFT order, with `k = 2π q / l`.
pub fn wavenumber_magnitudes(shape: GridShape) -> Vec<f64> {
    let m = shape.m;
    let base = 2.0 * std::f64::consts::PI / shape.l;
    let mut out = Vec::with_capacity(m * m);
    for j in 0..m {
        let ky = base * fft_index(j, m);
        for i in 0..m {
            let kx = base * fft_index(i, m);
            out.push((kx * kx + ky * ky).sqrt());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_round_trip() {
        let shape = GridShape::new(2.5, 8).unwrap();
        let f = PeriodicField::from_fn(shape, |p| p[0].sin() * p[1]);
        let bytes = f.to_snapshot();
        assert_eq!(PeriodicField::from_snapshot(&bytes).unwrap(), f);
        assert!(PeriodicField::from_snapshot(&bytes[..bytes.len() - 1]).is_err());
        assert!(PeriodicField::from_snapshot(b"nope").is_err());
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(GridShape::new(1.0, 100).is_err());
        assert!(GridShape::new(-1.0, 64).is_err());
        assert!(GridShape::new(1.0, 64).is_ok());
    }

    #[test]
    fn fft_round_trip() {
        let shape = GridShape::new(2.0, 16).unwrap();
        let f = PeriodicField::from_fn(shape, |p| (p[0] * 3.0).sin() + p[1] * p[1]);
        let mut data: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut fft = Fft2::new(16);
        fft.forward(&mut data);
        fft.inverse(&mut data);
        for (a, b) in data.iter().zip(f.values()) {
            assert!((a.re - b).abs() < 1e-12 && a.im.abs() < 1e-12);
        }
    }

    #[test]
    fn bicubic_reproduces_smooth_periodic_field() {
        let shape = GridShape::new(1.0, 64).unwrap();
        let tau = 2.0 * std::f64::consts::PI;
        let f = PeriodicField::from_fn(shape, |p| (tau * p[0]).sin() * (tau * p[1]).cos());
        let p = [0.3141, 0.777];
        let exact = (tau * p[0]).sin() * (tau * p[1]).cos();
        assert!((f.interpolate(p) - exact).abs() < 1e-4);
    }
}
