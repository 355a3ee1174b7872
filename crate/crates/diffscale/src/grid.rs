//! Grid containers and the resampling/pixelation operators that define what
//! "resolution at factor alpha on a fixed canvas" means.
//!
//! Fields are stored single precision; every reduction accumulates in f64 so
//! that mean-preservation holds to rounding.

use crate::error::{Error, Result};

/// A single-channel 2-D grid of physical values, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    height: usize,
    width: usize,
    values: Vec<f32>,
}

impl Field {
    pub fn new(height: usize, width: usize, values: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Dimension("field dimensions must be positive".into()));
        }
        if values.len() != height * width {
            return Err(Error::Dimension(format!(
                "value count {} does not match {}x{}",
                values.len(),
                height,
                width
            )));
        }
        Ok(Field { height, width, values })
    }

    pub fn constant(height: usize, width: usize, value: f32) -> Self {
        Field { height, width, values: vec![value; height * width] }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::constant(height, width, 0.0)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: f32) {
        self.values[row * self.width + col] = v;
    }

    /// Spatial mean, accumulated in f64.
    pub fn mean(&self) -> f64 {
        let sum: f64 = self.values.iter().map(|&v| v as f64).sum();
        sum / self.values.len() as f64
    }

    pub fn has_nan(&self) -> bool {
        self.values.iter().any(|v| !v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Field {
        Field {
            height: self.height,
            width: self.width,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip(&self, other: &Field, f: impl Fn(f32, f32) -> f32) -> Result<Field> {
        if self.height != other.height || self.width != other.width {
            return Err(Error::Dimension(format!(
                "shape mismatch {}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            )));
        }
        Ok(Field {
            height: self.height,
            width: self.width,
            values: self
                .values
                .iter()
                .zip(other.values.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }
}

/// One entry of the evaluation factor set: divisor i, output size S/i and the
/// scaling factor alpha = S/(L*i).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorEntry {
    pub divisor: usize,
    pub size: usize,
    pub alpha: f64,
}

/// The four evaluation scaling factors for a base size L and canvas size S.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSet {
    pub base_size: usize,
    pub canvas_size: usize,
    pub entries: Vec<FactorEntry>,
}

/// Mean over non-overlapping blocks; preserves the global mean exactly up to
/// rounding.
pub fn block_coarsen(f: &Field, out_h: usize, out_w: usize) -> Result<Field> {
    if out_h == 0 || out_w == 0 || f.height % out_h != 0 || f.width % out_w != 0 {
        return Err(Error::Dimension(format!(
            "cannot coarsen {}x{} to {}x{}: non-divisible dimensions",
            f.height, f.width, out_h, out_w
        )));
    }
    let bh = f.height / out_h;
    let bw = f.width / out_w;
    let inv = 1.0 / (bh * bw) as f64;
    let mut out = vec![0.0f32; out_h * out_w];
    for r in 0..out_h {
        for c in 0..out_w {
            let mut acc = 0.0f64;
            for br in 0..bh {
                for bc in 0..bw {
                    acc += f.get(r * bh + br, c * bw + bc) as f64;
                }
            }
            out[r * out_w + c] = (acc * inv) as f32;
        }
    }
    Field::new(out_h, out_w, out)
}

/// Corner-aligned bilinear interpolation; endpoints map to endpoints.
pub fn bilinear_resize(f: &Field, out_h: usize, out_w: usize) -> Result<Field> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::Dimension("output dimensions must be positive".into()));
    }
    let src_coord = |i: usize, out_n: usize, in_n: usize| -> f64 {
        if out_n == 1 || in_n == 1 {
            0.0
        } else {
            i as f64 * (in_n - 1) as f64 / (out_n - 1) as f64
        }
    };
    let mut out = vec![0.0f32; out_h * out_w];
    for r in 0..out_h {
        let y = src_coord(r, out_h, f.height);
        let y0 = y.floor() as usize;
        let y1 = (y0 + 1).min(f.height - 1);
        let fy = y - y0 as f64;
        for c in 0..out_w {
            let x = src_coord(c, out_w, f.width);
            let x0 = x.floor() as usize;
            let x1 = (x0 + 1).min(f.width - 1);
            let fx = x - x0 as f64;
            let v00 = f.get(y0, x0) as f64;
            let v01 = f.get(y0, x1) as f64;
            let v10 = f.get(y1, x0) as f64;
            let v11 = f.get(y1, x1) as f64;
            let v = v00 * (1.0 - fy) * (1.0 - fx)
                + v01 * (1.0 - fy) * fx
                + v10 * fy * (1.0 - fx)
                + v11 * fy * fx;
            out[r * out_w + c] = v as f32;
        }
    }
    Field::new(out_h, out_w, out)
}

/// Replicate each cell into a (canvas/height)^2 block. Square fields only.
pub fn nearest_expand(f: &Field, canvas: usize) -> Result<Field> {
    if f.height != f.width {
        return Err(Error::Dimension(format!(
            "nearest_expand requires a square field, got {}x{}",
            f.height, f.width
        )));
    }
    if canvas == 0 || canvas % f.height != 0 {
        return Err(Error::Dimension(format!(
            "canvas {} not divisible by field size {}",
            canvas, f.height
        )));
    }
    let k = canvas / f.height;
    let mut out = vec![0.0f32; canvas * canvas];
    for r in 0..canvas {
        for c in 0..canvas {
            out[r * canvas + c] = f.get(r / k, c / k);
        }
    }
    Field::new(canvas, canvas, out)
}

/// Block-coarsen to size x size, then replicate back onto the full canvas.
/// Defines the training target at factor alpha = size / L.
pub fn pixelate(truth: &Field, size: usize) -> Result<Field> {
    if truth.height != truth.width {
        return Err(Error::Dimension("pixelate requires a square field".into()));
    }
    let coarse = block_coarsen(truth, size, size)?;
    nearest_expand(&coarse, truth.height)
}

/// The scaling factors {S/(L*i) | i in 1..=4} with output sizes {S, S/2, S/3, S/4}.
pub fn enumerate_factors(base: usize, canvas: usize) -> Result<FactorSet> {
    if canvas % 12 != 0 {
        return Err(Error::Config(format!(
            "canvas size {} must be divisible by 12 so S/2, S/3, S/4 are integers",
            canvas
        )));
    }
    if canvas / 4 < base {
        return Err(Error::Config(format!(
            "constraint S/4 >= L violated: S={}, L={}",
            canvas, base
        )));
    }
    let entries = (1..=4)
        .map(|i| FactorEntry {
            divisor: i,
            size: canvas / i,
            alpha: canvas as f64 / (base * i) as f64,
        })
        .collect();
    Ok(FactorSet { base_size: base, canvas_size: canvas, entries })
}
