//! Discrete image grids, forward differences and their adjoint.
//!
//! Storage is row-major with `(row, col)` indexing and unit grid spacing.
//! A grid with `height == 1` holds a 1-D signal; its vertical components are
//! identically zero.

use crate::error::{Error, Result};

/// Shape of the pixel domain shared by every field on it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Grid {
    height: usize,
    width: usize,
}

impl Grid {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidParameter(format!(
                "grid must be non-empty, got {height}x{width}"
            )));
        }
        Ok(Self { height, width })
    }

    /// A 1×n grid for one-dimensional signals.
    pub fn line(n: usize) -> Result<Self> {
        Self::new(1, n)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_1d(&self) -> bool {
        self.height == 1
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }
}

/// One real value per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    /// Wraps row-major values; rejects wrong lengths and non-finite entries.
    pub fn from_vec(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid.height(),
                grid.width()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("value at index {pos}")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for r in 0..grid.height() {
            for c in 0..grid.width() {
                values.push(f(r, c));
            }
        }
        Self { grid, values }
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> Grid {
        self.grid
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

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[self.grid.index(row, col)]
    }

    pub fn dot(&self, other: &ScalarField) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        Self::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scale(&self, s: f64) -> ScalarField {
        self.map(|v| s * v)
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        self.zip_with(other, |a, b| a - b)
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &ScalarField) -> ScalarField {
        self.zip_with(other, |a, b| a + s * b)
    }

    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        debug_assert_eq!(self.grid, other.grid);
        Self::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn distance(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Two components per pixel: horizontal (`x`, along columns) and vertical
/// (`y`, along rows).
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: Grid,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            x: vec![0.0; grid.len()],
            y: vec![0.0; grid.len()],
        }
    }

    pub fn from_components(grid: Grid, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != grid.len() || y.len() != grid.len() {
            return Err(Error::ShapeMismatch(
                "vector field components do not match the grid".into(),
            ));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("vector field component".into()));
        }
        if grid.is_1d() && y.iter().any(|&v| v != 0.0) {
            return Err(Error::InvalidParameter(
                "1-D vector fields must have a zero vertical component".into(),
            ));
        }
        Ok(Self { grid, x, y })
    }

    pub(crate) fn from_raw(grid: Grid, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { grid, x, y }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.x, &mut self.y)
    }

    pub fn dot(&self, other: &VectorField) -> f64 {
        let dx: f64 = self.x.iter().zip(&other.x).map(|(a, b)| a * b).sum();
        let dy: f64 = self.y.iter().zip(&other.y).map(|(a, b)| a * b).sum();
        dx + dy
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, s: f64) -> VectorField {
        Self::from_raw(
            self.grid,
            self.x.iter().map(|v| s * v).collect(),
            self.y.iter().map(|v| s * v).collect(),
        )
    }

    pub fn scale_in_place(&mut self, s: f64) {
        self.x.iter_mut().chain(self.y.iter_mut()).for_each(|v| *v *= s);
    }

    pub fn add(&self, other: &VectorField) -> VectorField {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        self.axpy(-1.0, other)
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &VectorField) -> VectorField {
        Self::from_raw(
            self.grid,
            self.x.iter().zip(&other.x).map(|(a, b)| a + s * b).collect(),
            self.y.iter().zip(&other.y).map(|(a, b)| a + s * b).collect(),
        )
    }

    pub fn add_scaled_in_place(&mut self, s: f64, other: &VectorField) {
        for (a, b) in self.x.iter_mut().zip(&other.x) {
            *a += s * b;
        }
        for (a, b) in self.y.iter_mut().zip(&other.y) {
            *a += s * b;
        }
    }

    /// Largest pointwise magnitude: Euclidean for `isotropic`, max-abs otherwise.
    pub fn max_pointwise_norm(&self, isotropic: bool) -> f64 {
        self.x.iter().zip(&self.y).fold(0.0, |m, (a, b)| {
            let n = if isotropic {
                (a * a + b * b).sqrt()
            } else {
                a.abs().max(b.abs())
            };
            m.max(n)
        })
    }
}

/// `M` channels over one shared grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiChannelImage {
    grid: Grid,
    channels: Vec<ScalarField>,
}

impl MultiChannelImage {
    pub fn new(channels: Vec<ScalarField>) -> Result<Self> {
        let first = channels
            .first()
            .ok_or_else(|| Error::InvalidParameter("image needs at least one channel".into()))?;
        let grid = first.grid();
        if channels.iter().any(|c| c.grid() != grid) {
            return Err(Error::ShapeMismatch(
                "all channels must share the same grid".into(),
            ));
        }
        Ok(Self { grid, channels })
    }

    pub fn zeros(grid: Grid, channels: usize) -> Self {
        Self {
            grid,
            channels: vec![ScalarField::zeros(grid); channels],
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channels(&self) -> &[ScalarField] {
        &self.channels
    }

    pub fn channel(&self, i: usize) -> &ScalarField {
        &self.channels[i]
    }

    pub fn channel_mut(&mut self, i: usize) -> &mut ScalarField {
        &mut self.channels[i]
    }

    pub fn into_channels(self) -> Vec<ScalarField> {
        self.channels
    }

    pub fn same_shape(&self, other: &MultiChannelImage) -> bool {
        self.grid == other.grid && self.channels.len() == other.channels.len()
    }

    pub fn sub(&self, other: &MultiChannelImage) -> MultiChannelImage {
        Self {
            grid: self.grid,
            channels: self
                .channels
                .iter()
                .zip(&other.channels)
                .map(|(a, b)| a.sub(b))
                .collect(),
        }
    }

    /// Euclidean norm of all channels stacked.
    pub fn norm(&self) -> f64 {
        self.channels
            .iter()
            .map(|c| c.dot(c))
            .sum::<f64>()
            .sqrt()
    }

    pub fn distance(&self, other: &MultiChannelImage) -> f64 {
        self.channels
            .iter()
            .zip(&other.channels)
            .map(|(a, b)| {
                let d = a.distance(b);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Forward differences with replicate (Neumann) boundary.
pub fn gradient(u: &ScalarField) -> VectorField {
    let grid = u.grid();
    let (h, w) = (grid.height(), grid.width());
    let v = u.values();
    let mut x = vec![0.0; grid.len()];
    let mut y = vec![0.0; grid.len()];
    for r in 0..h {
        let row = r * w;
        for c in 0..w - 1 {
            x[row + c] = v[row + c + 1] - v[row + c];
        }
        if r + 1 < h {
            for c in 0..w {
                y[row + c] = v[row + w + c] - v[row + c];
            }
        }
    }
    VectorField::from_raw(grid, x, y)
}

/// Backward differences; the exact negative adjoint of [`gradient`].
pub fn divergence(g: &VectorField) -> ScalarField {
    let grid = g.grid();
    let (h, w) = (grid.height(), grid.width());
    let mut out = vec![0.0; grid.len()];
    let (gx, gy) = (g.x(), g.y());
    for r in 0..h {
        let row = r * w;
        let (o, x) = (&mut out[row..row + w], &gx[row..row + w]);
        if w > 1 {
            o[0] = x[0];
            for c in 1..w - 1 {
                o[c] = x[c] - x[c - 1];
            }
            o[w - 1] = -x[w - 2];
        }
        if r + 1 < h {
            o.iter_mut().zip(&gy[row..row + w]).for_each(|(o, y)| *o += y);
        }
        if r > 0 {
            o.iter_mut().zip(&gy[row - w..row]).for_each(|(o, y)| *o -= y);
        }
    }
    ScalarField::from_raw(grid, out)
}

/// Five-point Neumann Laplacian, `divergence(gradient(u))`.
pub fn laplacian(u: &ScalarField) -> ScalarField {
    divergence(&gradient(u))
}

/// Soft thresholding `sign(x)·max(|x|−t, 0)`.
#[inline]
pub fn shrink_scalar(x: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Euclidean shrinkage of a 2-vector; zero maps to zero.
#[inline]
pub fn shrink_vector(v: (f64, f64), t: f64) -> (f64, f64) {
    debug_assert!(t >= 0.0);
    let n = (v.0 * v.0 + v.1 * v.1).sqrt();
    if n <= t || n == 0.0 {
        (0.0, 0.0)
    } else {
        let s = (n - t) / n;
        (v.0 * s, v.1 * s)
    }
}

/// Pointwise shrinkage of a whole field, scalar per component when
/// `isotropic` is false.
pub fn shrink_field(v: &VectorField, t: f64, isotropic: bool) -> VectorField {
    let mut out = v.clone();
    shrink_field_in_place(&mut out, t, isotropic);
    out
}

pub(crate) fn shrink_field_in_place(v: &mut VectorField, t: f64, isotropic: bool) {
    let (x, y) = v.parts_mut();
    if isotropic {
        for (a, b) in x.iter_mut().zip(y.iter_mut()) {
            let (sa, sb) = shrink_vector((*a, *b), t);
            *a = sa;
            *b = sb;
        }
    } else {
        x.iter_mut()
            .chain(y.iter_mut())
            .for_each(|a| *a = shrink_scalar(*a, t));
    }
}
