//! Uniform interior grids on intervals and axis-aligned rectangles.
//!
//! Boundary nodes are never unknowns: homogeneous Dirichlet data is encoded
//! by eliminating them, so every grid function lives on interior nodes only.
//! In 2D nodes are ordered x-major: node `(ix, iy)` has index `ix * ny + iy`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum interior node count per axis.
pub const MIN_COUNT: usize = 3;

/// The closed domain whose interior is discretized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Bounds {
    Interval { a: f64, b: f64 },
    Rectangle { a: f64, b: f64, c: f64, d: f64 },
}

impl Bounds {
    pub fn dimension(&self) -> usize {
        match self {
            Bounds::Interval { .. } => 1,
            Bounds::Rectangle { .. } => 2,
        }
    }

    /// Parses `a,b` or `a,b,c,d`.
    pub fn from_slice(values: &[f64]) -> Result<Self> {
        match *values {
            [a, b] => Ok(Bounds::Interval { a, b }),
            [a, b, c, d] => Ok(Bounds::Rectangle { a, b, c, d }),
            _ => Err(Error::InvalidGrid(format!(
                "bounds need 2 or 4 values, got {}",
                values.len()
            ))),
        }
    }

    fn axes(&self) -> Vec<(f64, f64)> {
        match *self {
            Bounds::Interval { a, b } => vec![(a, b)],
            Bounds::Rectangle { a, b, c, d } => vec![(a, b), (c, d)],
        }
    }

    pub fn volume(&self) -> f64 {
        self.axes().iter().map(|(lo, hi)| hi - lo).product()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    bounds: Bounds,
    counts: Vec<usize>,
    spacing: Vec<f64>,
    /// Flattened coordinates, `dimension` values per node.
    nodes: Vec<f64>,
}

impl Grid {
    pub fn dimension(&self) -> usize {
        self.counts.len()
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    /// Total number of unknowns.
    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, k: usize) -> &[f64] {
        let d = self.dimension();
        &self.nodes[k * d..(k + 1) * d]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> {
        self.nodes.chunks(self.dimension())
    }

    /// Linear index of the node with per-axis indices `idx`.
    pub fn index(&self, idx: &[usize]) -> usize {
        match *idx {
            [i] => i,
            [ix, iy] => ix * self.counts[1] + iy,
            _ => unreachable!("grids are 1D or 2D"),
        }
    }

    /// Per-axis indices of node `k`.
    pub fn multi_index(&self, k: usize) -> Vec<usize> {
        match self.dimension() {
            1 => vec![k],
            _ => vec![k / self.counts[1], k % self.counts[1]],
        }
    }

    /// Euclidean distance between two nodes.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.node(i)
            .iter()
            .zip(self.node(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Largest spacing over the axes.
    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().copied().fold(0.0, f64::max)
    }
}

pub fn make_grid(dimension: usize, bounds: Bounds, counts: &[usize]) -> Result<Arc<Grid>> {
    if bounds.dimension() != dimension {
        return Err(Error::InvalidGrid(format!(
            "dimension {dimension} does not match bounds of dimension {}",
            bounds.dimension()
        )));
    }
    if counts.len() != dimension {
        return Err(Error::InvalidGrid(format!(
            "expected {dimension} counts, got {}",
            counts.len()
        )));
    }
    if let Some(&n) = counts.iter().find(|&&n| n < MIN_COUNT) {
        return Err(Error::InvalidGrid(format!(
            "count {n} below minimum {MIN_COUNT}"
        )));
    }
    let axes = bounds.axes();
    for &(lo, hi) in &axes {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidGrid(format!("degenerate bounds [{lo}, {hi}]")));
        }
    }
    let spacing: Vec<f64> = axes
        .iter()
        .zip(counts)
        .map(|(&(lo, hi), &n)| (hi - lo) / (n + 1) as f64)
        .collect();
    let coord = |axis: usize, i: usize| axes[axis].0 + (i + 1) as f64 * spacing[axis];

    let mut nodes = Vec::with_capacity(counts.iter().product::<usize>() * dimension);
    match dimension {
        1 => (0..counts[0]).for_each(|i| nodes.push(coord(0, i))),
        _ => {
            for ix in 0..counts[0] {
                for iy in 0..counts[1] {
                    nodes.push(coord(0, ix));
                    nodes.push(coord(1, iy));
                }
            }
        }
    }
    Ok(Arc::new(Grid {
        bounds,
        counts: counts.to_vec(),
        spacing,
        nodes,
    }))
}

/// Quadrature weights realizing the integral over the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Weights {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Builds weights from explicit values. Every weight must be positive.
    pub fn from_values(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some((node, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::NonFinite { node, value });
        }
        Ok(Weights { grid, values })
    }
}

/// Uniform product rule: `w_i = h_x` in 1D and `w_i = h_x h_y` in 2D.
pub fn quadrature_weights(grid: &Arc<Grid>) -> Weights {
    let w: f64 = grid.spacing().iter().product();
    Weights {
        grid: Arc::clone(grid),
        values: vec![w; grid.len()],
    }
}

/// A grid function.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some((node, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { node, value });
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        Field {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn constant(grid: Arc<Grid>, value: f64) -> Self {
        let n = grid.len();
        Field {
            grid,
            values: vec![value; n],
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Smallest value and the first node attaining it.
    pub fn argmin(&self) -> (f64, usize) {
        first_extreme(&self.values, |a, b| a < b)
    }

    /// Largest value and the first node attaining it.
    pub fn argmax(&self) -> (f64, usize) {
        first_extreme(&self.values, |a, b| a > b)
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &Field, beta: f64) -> Result<Field> {
        same_grid(&self.grid, &other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Field::new(Arc::clone(&self.grid), values)
    }
}

fn first_extreme(values: &[f64], better: impl Fn(f64, f64) -> bool) -> (f64, usize) {
    let mut best = (values[0], 0);
    for (i, &v) in values.iter().enumerate().skip(1) {
        if better(v, best.0) {
            best = (v, i);
        }
    }
    best
}

pub(crate) fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> Result<()> {
    if Arc::ptr_eq(a, b) || **a == **b {
        Ok(())
    } else {
        Err(Error::GridMismatch("fields live on different grids"))
    }
}

pub fn sample_field(grid: &Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Result<Field> {
    let values = grid.nodes().map(&f).collect();
    Field::new(Arc::clone(grid), values)
}

pub fn integrate(field: &Field, weights: &Weights) -> Result<f64> {
    same_grid(&field.grid, &weights.grid)?;
    Ok(field
        .values
        .iter()
        .zip(&weights.values)
        .map(|(v, w)| v * w)
        .sum())
}
