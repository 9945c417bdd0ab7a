//! Uniform periodic grids.
//!
//! Points are left-aligned: on an axis `[a, b)` with `n` points the nodes are
//! `x_i = a + i * dx`, `dx = (b - a) / n`. Multi-dimensional fields are stored
//! row-major, so the last axis varies fastest.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible point count per axis.
pub const MIN_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lower: f64,
    pub upper: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(lower: f64, upper: f64, n: usize) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite bounds [{lower}, {upper}]")));
        }
        if upper <= lower {
            return Err(Error::InvalidGrid(format!("empty interval [{lower}, {upper}]")));
        }
        if n < MIN_POINTS || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "point count {n} must be a power of two >= {MIN_POINTS}"
            )));
        }
        Ok(Axis { lower, upper, n })
    }

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn dx(&self) -> f64 {
        self.length() / self.n as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        self.lower + i as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }

    /// Angular wavenumbers in FFT order: `0, 1, .., n/2-1, -n/2, .., -1` times `2 pi / L`.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let dk = 2.0 * PI / self.length();
        let n = self.n as isize;
        (0..n)
            .map(|m| if m < n / 2 { m } else { m - n })
            .map(|m| m as f64 * dk)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    axes: Vec<Axis>,
}

impl Grid {
    pub fn new(bounds: &[(f64, f64)], counts: &[usize]) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::InvalidGrid("at least one dimension required".into()));
        }
        if bounds.len() != counts.len() {
            return Err(Error::InvalidGrid(format!(
                "{} intervals but {} point counts",
                bounds.len(),
                counts.len()
            )));
        }
        let axes = bounds
            .iter()
            .zip(counts)
            .map(|(&(a, b), &n)| Axis::new(a, b, n))
            .collect::<Result<Vec<_>>>()?;
        Ok(Grid { axes })
    }

    pub fn from_axes(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidGrid("at least one dimension required".into()));
        }
        for ax in &axes {
            Axis::new(ax.lower, ax.upper, ax.n)?;
        }
        Ok(Grid { axes })
    }

    pub fn line(lower: f64, upper: f64, n: usize) -> Result<Self> {
        Grid::new(&[(lower, upper)], &[n])
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, j: usize) -> &Axis {
        &self.axes[j]
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.n).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> Vec<f64> {
        self.axes.iter().map(Axis::dx).collect()
    }

    /// Quadrature weight of one cell, `prod_j dx_j`.
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(Axis::dx).product()
    }

    /// Multi-index of a flat (row-major) index.
    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dims()];
        for (j, ax) in self.axes.iter().enumerate().rev() {
            idx[j] = flat % ax.n;
            flat /= ax.n;
        }
        idx
    }

    /// Coordinates of the point with flat index `flat`, written into `out`.
    pub fn point_into(&self, mut flat: usize, out: &mut [f64]) {
        for (j, ax) in self.axes.iter().enumerate().rev() {
            out[j] = ax.point(flat % ax.n);
            flat /= ax.n;
        }
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dims()];
        self.point_into(flat, &mut x);
        x
    }

    pub fn frequencies(&self) -> FrequencyGrid {
        FrequencyGrid {
            k: self.axes.iter().map(Axis::wavenumbers).collect(),
        }
    }

    /// Whether every coordinate of `x` lies inside the half-open box of the grid.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.axes
            .iter()
            .zip(x)
            .all(|(ax, &xi)| xi >= ax.lower && xi < ax.upper)
    }
}

/// Per-axis angular wavenumbers matching a periodic [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    pub k: Vec<Vec<f64>>,
}

impl FrequencyGrid {
    /// `|k|^2` at every point of the spectral grid, row-major.
    pub fn k_squared(&self) -> Vec<f64> {
        let mut out = vec![0.0];
        for axis in &self.k {
            let mut next = Vec::with_capacity(out.len() * axis.len());
            for &base in &out {
                for &k in axis {
                    next.push(base + k * k);
                }
            }
            out = next;
        }
        out
    }

    pub fn max_abs(&self, j: usize) -> f64 {
        self.k[j].iter().fold(0.0_f64, |m, k| m.max(k.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_grid_spacing_and_points() {
        let g = Grid::line(-10.0, 10.0, 16).unwrap();
        assert_eq!(g.spacing(), vec![1.25]);
        assert_eq!(g.point(0), vec![-10.0]);
        assert_eq!(g.point(1), vec![-8.75]);
        assert_eq!(g.point(8), vec![0.0]);

        let g = Grid::line(0.0, 1.0, 8).unwrap();
        assert_eq!(g.spacing(), vec![0.125]);
    }

    #[test]
    fn two_dimensional_grid() {
        let g = Grid::new(&[(-10.0, 10.0), (-5.0, 5.0)], &[16, 8]).unwrap();
        assert_eq!(g.len(), 128);
        assert_eq!(g.spacing(), vec![1.25, 1.25]);
        // last axis fastest
        assert_eq!(g.point(1), vec![-10.0, -3.75]);
        assert_eq!(g.point(8), vec![-8.75, -5.0]);
        assert_eq!(g.unravel(9), vec![1, 1]);
    }

    #[test]
    fn rejects_bad_counts_and_intervals() {
        assert!(matches!(Grid::line(0.0, 1.0, 12), Err(Error::InvalidGrid(_))));
        assert!(matches!(Grid::line(0.0, 1.0, 4), Err(Error::InvalidGrid(_))));
        assert!(matches!(Grid::line(1.0, 1.0, 8), Err(Error::InvalidGrid(_))));
        assert!(matches!(Grid::line(2.0, 1.0, 8), Err(Error::InvalidGrid(_))));
        assert!(Grid::new(&[], &[]).is_err());
    }

    #[test]
    fn wavenumbers_follow_fft_order() {
        let ax = Axis::new(0.0, 2.0 * PI, 8).unwrap();
        assert_eq!(ax.wavenumbers(), vec![0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0]);
        let g = Grid::line(-3.0, 5.0, 64).unwrap();
        let f = g.frequencies();
        assert!((f.max_abs(0) - PI / g.spacing()[0]).abs() < 1e-12);
    }

    #[test]
    fn k_squared_is_separable_sum() {
        let g = Grid::new(&[(0.0, 2.0 * PI), (0.0, PI)], &[8, 8]).unwrap();
        let k2 = g.frequencies().k_squared();
        assert_eq!(k2.len(), 64);
        // (m1 = 1, m2 = 2) -> k1 = 1, k2 = 4
        assert!((k2[8 + 2] - (1.0 + 16.0)).abs() < 1e-12);
    }
}
