//! Uniform grids on [0,1] and curves sampled on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the points of a uniform grid cover [0,1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GridKind {
    /// `x_i = i / len`, `i = 0..len`; the point `x = 1` is identified with `x = 0`.
    Periodic,
    /// `x_i = i / (len - 1)`, both endpoints included.
    Closed,
}

/// A uniform grid over [0,1] together with its trapezoidal quadrature rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    len: usize,
    kind: GridKind,
}

impl Grid {
    pub fn periodic(len: usize) -> Result<Self> {
        if len < 2 {
            return Err(Error::Config(format!("grid needs at least 2 points, got {len}")));
        }
        Ok(Self {
            len,
            kind: GridKind::Periodic,
        })
    }

    pub fn closed(len: usize) -> Result<Self> {
        if len < 2 {
            return Err(Error::Config(format!("grid needs at least 2 points, got {len}")));
        }
        Ok(Self {
            len,
            kind: GridKind::Closed,
        })
    }

    /// Closed grid with step `delta_h`, i.e. `floor(1/delta_h) + 1` points.
    pub fn from_step(delta_h: f64) -> Result<Self> {
        if !(delta_h > 0.0 && delta_h < 1.0) {
            return Err(Error::Config(format!(
                "discretization step must lie in (0,1), got {delta_h}"
            )));
        }
        // 1/3^k is not exact in binary, so nudge before flooring.
        let intervals = (1.0 / delta_h + 1e-9).floor() as usize;
        Self::closed(intervals + 1)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    /// Distance between neighbouring points.
    pub fn step(&self) -> f64 {
        match self.kind {
            GridKind::Periodic => 1.0 / self.len as f64,
            GridKind::Closed => 1.0 / (self.len - 1) as f64,
        }
    }

    pub fn abscissa(&self, i: usize) -> f64 {
        i as f64 * self.step()
    }

    pub fn abscissae(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.abscissa(i)).collect()
    }

    /// Trapezoidal quadrature weights. On a periodic grid the wrap-around
    /// makes every weight equal to the step.
    pub fn weights(&self) -> Vec<f64> {
        let h = self.step();
        match self.kind {
            GridKind::Periodic => vec![h; self.len],
            GridKind::Closed => {
                let mut w = vec![h; self.len];
                w[0] = 0.5 * h;
                w[self.len - 1] = 0.5 * h;
                w
            }
        }
    }

    /// Discrete L² inner product of two sampled value vectors.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        let h = self.step();
        let mut s: f64 = f.iter().zip(g).map(|(a, b)| a * b).sum();
        if self.kind == GridKind::Closed {
            s -= 0.5 * (f[0] * g[0] + f[self.len - 1] * g[self.len - 1]);
        }
        s * h
    }
}

/// A real function sampled on a uniform grid over [0,1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledCurve {
    grid: Grid,
    values: Vec<f64>,
}

impl SampledCurve {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "curve has {} values but grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.abscissa(i))).collect();
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

    pub fn l2_norm(&self) -> f64 {
        self.grid.inner(&self.values, &self.values).sqrt()
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &SampledCurve) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::Dimension("curves live on different grids".into()));
        }
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| x + a * y)
                .collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_from_delta_h() {
        let g = Grid::from_step(1.0 / 27.0).unwrap();
        assert_eq!(g.len(), 28);
        let g = Grid::from_step(3f64.powi(-5)).unwrap();
        assert_eq!(g.len(), 244);
        assert!(Grid::from_step(0.0).is_err());
    }

    #[test]
    fn trapezoid_integrates_linear_exactly() {
        let g = Grid::closed(11).unwrap();
        let one = vec![1.0; 11];
        let x = g.abscissae();
        assert!((g.inner(&one, &x) - 0.5).abs() < 1e-15);
        assert!((g.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn periodic_weights_are_uniform() {
        let g = Grid::periodic(8).unwrap();
        assert!(g.weights().iter().all(|&w| w == 0.125));
        assert_eq!(g.abscissa(4), 0.5);
    }

    #[test]
    fn curve_length_must_match_grid() {
        let g = Grid::closed(5).unwrap();
        assert!(SampledCurve::new(g, vec![0.0; 4]).is_err());
    }
}
