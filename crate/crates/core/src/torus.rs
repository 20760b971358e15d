//! Geometry of the discrete torus `Z_L^D` and dense real-valued fields on it.
//!
//! Fields are stored flat in row-major order with axis 0 varying slowest.
//! The only nontrivial kernel here is [`box_window_sum`], the uniform-box
//! average that every density-evolution update reduces to.

use std::fmt;

use crate::error::{Error, Result};

/// Dimension `D` and per-axis length `L` of a torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridShape {
    dim: usize,
    len: usize,
    sections: usize,
}

impl GridShape {
    pub fn new(dim: usize, len: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidShape("dimension D must be >= 1".into()));
        }
        if len == 0 {
            return Err(Error::InvalidShape("axis length L must be >= 1".into()));
        }
        let sections = u32::try_from(dim)
            .ok()
            .and_then(|d| len.checked_pow(d))
            .ok_or_else(|| Error::InvalidShape(format!("L^D overflows for L={len}, D={dim}")))?;
        Ok(Self { dim, len, sections })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.len
    }

    /// Total section count `L^D`.
    pub fn sections(&self) -> usize {
        self.sections
    }

    /// Flat-index distance between neighbours along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        debug_assert!(axis < self.dim);
        self.len.pow((self.dim - 1 - axis) as u32)
    }

    pub fn flatten(&self, index: &TorusIndex) -> usize {
        debug_assert_eq!(index.0.len(), self.dim);
        index.0.iter().fold(0, |acc, &c| acc * self.len + c)
    }

    pub fn unflatten(&self, mut flat: usize) -> TorusIndex {
        debug_assert!(flat < self.sections);
        let mut coords = vec![0; self.dim];
        for c in coords.iter_mut().rev() {
            *c = flat % self.len;
            flat /= self.len;
        }
        TorusIndex(coords)
    }

    /// Iterates every section in flat order.
    pub fn indices(&self) -> impl Iterator<Item = TorusIndex> + '_ {
        (0..self.sections).map(move |f| self.unflatten(f))
    }

    /// Shortest wrap-around distance between two coordinates on one axis.
    pub fn axis_distance(&self, a: usize, b: usize) -> usize {
        let d = a.abs_diff(b);
        d.min(self.len - d)
    }

    /// L-infinity torus distance.
    pub fn distance(&self, a: &TorusIndex, b: &TorusIndex) -> usize {
        a.0.iter()
            .zip(&b.0)
            .map(|(&x, &y)| self.axis_distance(x, y))
            .max()
            .unwrap_or(0)
    }
}

/// A section of the torus; every coordinate lies in `[0, L-1]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TorusIndex(Vec<usize>);

impl TorusIndex {
    /// Wraps already-reduced coordinates without checking them against a
    /// shape. Consumers such as [`crate::ensemble::ShorteningDomain::validate`]
    /// reject out-of-range entries.
    pub fn from_coords(coords: Vec<usize>) -> Self {
        Self(coords)
    }

    pub fn coords(&self) -> &[usize] {
        &self.0
    }

    /// Adds `offset` and wraps back onto the torus.
    pub fn shifted(&self, offset: &[i64], shape: GridShape) -> Result<TorusIndex> {
        if offset.len() != self.0.len() {
            return Err(Error::DimensionMismatch {
                expected: self.0.len(),
                got: offset.len(),
            });
        }
        let raw: Vec<i64> = self
            .0
            .iter()
            .zip(offset)
            .map(|(&c, &o)| c as i64 + o)
            .collect();
        wrap(&raw, shape)
    }
}

impl fmt::Display for TorusIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Reduces raw integer coordinates into `Z_L^D`.
pub fn wrap(raw: &[i64], shape: GridShape) -> Result<TorusIndex> {
    if raw.len() != shape.dim {
        return Err(Error::DimensionMismatch {
            expected: shape.dim,
            got: raw.len(),
        });
    }
    let l = shape.len as i64;
    Ok(TorusIndex(
        raw.iter().map(|&c| c.rem_euclid(l) as usize).collect(),
    ))
}

/// Which way the window extends from the output section.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Averages `f(i + j)` for `j` in `[0, w-1]^D`.
    Forward,
    /// Averages `f(i - j)` for `j` in `[0, w-1]^D`.
    Backward,
}

/// A dense real-valued function on the torus.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    shape: GridShape,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(shape: GridShape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.sections() {
            return Err(Error::InvalidArgument(format!(
                "field needs {} values, got {}",
                shape.sections(),
                values.len()
            )));
        }
        Ok(Self { shape, values })
    }

    pub fn constant(shape: GridShape, value: f64) -> Self {
        Self {
            shape,
            values: vec![value; shape.sections()],
        }
    }

    pub fn zeros(shape: GridShape) -> Self {
        Self::constant(shape, 0.0)
    }

    pub fn from_fn(shape: GridShape, mut f: impl FnMut(&TorusIndex) -> f64) -> Self {
        let values = shape.indices().map(|i| f(&i)).collect();
        Self { shape, values }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
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

    pub fn get(&self, index: &TorusIndex) -> f64 {
        self.values[self.shape.flatten(index)]
    }

    pub fn set(&mut self, index: &TorusIndex, value: f64) {
        let flat = self.shape.flatten(index);
        self.values[flat] = value;
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        assert_eq!(self.shape, other.shape, "field shapes differ");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Field `g` with `g(i + offset) = f(i)`.
    pub fn translated(&self, offset: &[i64]) -> Result<ScalarField> {
        let mut out = ScalarField::zeros(self.shape);
        for (flat, &v) in self.values.iter().enumerate() {
            let to = self.shape.unflatten(flat).shifted(offset, self.shape)?;
            out.set(&to, v);
        }
        Ok(out)
    }

    /// Field `g` with `g(-i) = f(i)`.
    pub fn reflected(&self) -> ScalarField {
        let mut out = ScalarField::zeros(self.shape);
        for (flat, &v) in self.values.iter().enumerate() {
            let i = self.shape.unflatten(flat);
            let neg: Vec<i64> = i.coords().iter().map(|&c| -(c as i64)).collect();
            let to = wrap(&neg, self.shape).expect("same dimension");
            out.set(&to, v);
        }
        out
    }
}

/// Uniform box average of `field` over the window `[0, w-1]^D`.
///
/// Evaluated as `D` successive one-axis window averages. Each output entry is
/// a direct sum over the window in ascending offset order, so the result is
/// deterministic.
pub fn box_window_sum(field: &ScalarField, w: usize, direction: Direction) -> Result<ScalarField> {
    let shape = field.shape;
    check_window(w, shape)?;
    let mut out = vec![0.0; shape.sections()];
    let mut scratch = vec![0.0; shape.sections()];
    box_sum_into(&field.values, shape, w, direction, &mut out, &mut scratch);
    Ok(ScalarField { shape, values: out })
}

pub(crate) fn check_window(w: usize, shape: GridShape) -> Result<()> {
    if w == 0 || w > shape.len {
        return Err(Error::InvalidWindow { w, len: shape.len });
    }
    Ok(())
}

/// Allocation-free kernel behind [`box_window_sum`]. `out` and `scratch`
/// must both hold `L^D` entries; `scratch` is clobbered.
pub(crate) fn box_sum_into(
    src: &[f64],
    shape: GridShape,
    w: usize,
    direction: Direction,
    out: &mut [f64],
    scratch: &mut [f64],
) {
    let dim = shape.dim;
    // Ping-pong between `out` and `scratch` so the last axis lands in `out`.
    for axis in 0..dim {
        let to_out = (dim - axis) % 2 == 1;
        let stride = shape.stride(axis);
        match (axis, to_out) {
            (0, true) => axis_pass(src, out, shape.len, stride, w, direction),
            (0, false) => axis_pass(src, scratch, shape.len, stride, w, direction),
            (_, true) => axis_pass(scratch, out, shape.len, stride, w, direction),
            (_, false) => axis_pass(out, scratch, shape.len, stride, w, direction),
        }
    }
}

#[inline]
fn window_row(c: usize, k: usize, len: usize, direction: Direction) -> usize {
    match direction {
        Direction::Forward => (c + k) % len,
        Direction::Backward => (c + len - k) % len,
    }
}

fn axis_pass(src: &[f64], dst: &mut [f64], len: usize, stride: usize, w: usize, dir: Direction) {
    let block = len * stride;
    let wf = w as f64;
    if stride == 1 {
        for (src_line, dst_line) in src.chunks_exact(block).zip(dst.chunks_exact_mut(block)) {
            for (c, d) in dst_line.iter_mut().enumerate() {
                let mut acc = src_line[window_row(c, 0, len, dir)];
                for k in 1..w {
                    acc += src_line[window_row(c, k, len, dir)];
                }
                *d = acc / wf;
            }
        }
        return;
    }
    for (src_block, dst_block) in src.chunks_exact(block).zip(dst.chunks_exact_mut(block)) {
        for (c, dst_row) in dst_block.chunks_exact_mut(stride).enumerate() {
            let r0 = window_row(c, 0, len, dir) * stride;
            dst_row.copy_from_slice(&src_block[r0..r0 + stride]);
            for k in 1..w {
                let r = window_row(c, k, len, dir) * stride;
                for (d, s) in dst_row.iter_mut().zip(&src_block[r..r + stride]) {
                    *d += s;
                }
            }
            for d in dst_row.iter_mut() {
                *d /= wf;
            }
        }
    }
}
