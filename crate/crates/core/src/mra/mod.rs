//! Periodized Daubechies multiresolution bases on uniform grids over [0,1].
//!
//! A basis holds the father functions `phi_{J,k}`, `k < 2^J`, and the mother
//! functions `psi_{j,k}`, `J <= j <= K`, `k < 2^j`, tabulated on a grid. On
//! its native dyadic grid of `2^L` periodic points the functions are produced
//! by the cascade algorithm: a unit coefficient is pushed through the
//! periodized synthesis filter bank until it reaches resolution `2^L`. Each
//! refinement step is one cascade iteration, and the result is orthonormal
//! under the grid quadrature up to rounding.
//!
//! Coefficients are discrete inner products against the tabulated functions,
//! so curves on any grid can be analysed once the basis has been resampled
//! onto that grid with [`WaveletBasis::resample`].

pub mod daubechies;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridKind, SampledCurve};
use crate::spline::NaturalCubicSpline;

/// Parameters of a wavelet basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveletConfig {
    /// Number of vanishing moments of the Daubechies wavelet.
    pub order: usize,
    /// The native grid has `2^grid_levels` points.
    pub grid_levels: u32,
    /// Primary (coarsest) resolution level `J`.
    pub primary_level: u32,
    /// Last detail level `K`.
    pub last_level: u32,
}

impl Default for WaveletConfig {
    fn default() -> Self {
        Self {
            order: 10,
            grid_levels: 13,
            primary_level: 2,
            last_level: 6,
        }
    }
}

impl WaveletConfig {
    pub fn validate(&self) -> Result<()> {
        if !(2..=daubechies::MAX_ORDER).contains(&self.order) {
            return Err(Error::Config(format!(
                "wavelet order must lie in [2, {}], got {}",
                daubechies::MAX_ORDER,
                self.order
            )));
        }
        if self.primary_level < 1 {
            return Err(Error::Config(
                "primary level J must satisfy 2^J >= 2, i.e. J >= 1".into(),
            ));
        }
        if self.last_level < self.primary_level {
            return Err(Error::Config(format!(
                "last level K = {} is below primary level J = {}",
                self.last_level, self.primary_level
            )));
        }
        if 2 * self.last_level >= self.grid_levels {
            return Err(Error::Config(format!(
                "last level K = {} violates K < L/2 = {}",
                self.last_level,
                self.grid_levels as f64 / 2.0
            )));
        }
        if self.grid_levels > 24 {
            return Err(Error::Config(format!(
                "grid levels L = {} is too large",
                self.grid_levels
            )));
        }
        let taps = 2 * self.order;
        if (1usize << self.grid_levels) < 2 * taps {
            return Err(Error::Config(format!(
                "2^L = {} points cannot carry a {}-tap filter (need at least {})",
                1usize << self.grid_levels,
                taps,
                2 * taps
            )));
        }
        Ok(())
    }

    /// `2^J + sum_{j=J..K} 2^j`.
    pub fn coefficient_count(&self) -> usize {
        let mut n = 1usize << self.primary_level;
        for j in self.primary_level..=self.last_level {
            n += 1usize << j;
        }
        n
    }
}

/// Wavelet coefficients of one curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletDecomposition {
    primary_level: u32,
    /// `alpha_{J,k}`, `k < 2^J`.
    pub alpha: Vec<f64>,
    /// `beta[j - J][k] = beta_{j,k}`.
    pub beta: Vec<Vec<f64>>,
}

impl WaveletDecomposition {
    pub fn zeros(primary_level: u32, last_level: u32) -> Self {
        Self {
            primary_level,
            alpha: vec![0.0; 1 << primary_level],
            beta: (primary_level..=last_level).map(|j| vec![0.0; 1 << j]).collect(),
        }
    }

    /// Builds a decomposition from its flat layout `[alpha, beta_J, .., beta_K]`.
    pub fn from_flat(primary_level: u32, last_level: u32, flat: &[f64]) -> Result<Self> {
        let mut out = Self::zeros(primary_level, last_level);
        if flat.len() != out.len() {
            return Err(Error::Dimension(format!(
                "expected {} coefficients, got {}",
                out.len(),
                flat.len()
            )));
        }
        let (a, mut rest) = flat.split_at(out.alpha.len());
        out.alpha.copy_from_slice(a);
        for level in out.beta.iter_mut() {
            let (b, r) = rest.split_at(level.len());
            level.copy_from_slice(b);
            rest = r;
        }
        Ok(out)
    }

    pub fn primary_level(&self) -> u32 {
        self.primary_level
    }

    pub fn last_level(&self) -> u32 {
        self.primary_level + self.beta.len() as u32 - 1
    }

    pub fn len(&self) -> usize {
        self.alpha.len() + self.beta.iter().map(Vec::len).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(&self.alpha);
        for level in &self.beta {
            v.extend_from_slice(level);
        }
        v
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.alpha
            .iter()
            .chain(self.beta.iter().flatten())
            .copied()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.primary_level == other.primary_level
            && self.alpha.len() == other.alpha.len()
            && self.beta.len() == other.beta.len()
            && self.beta.iter().zip(&other.beta).all(|(a, b)| a.len() == b.len())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            primary_level: self.primary_level,
            alpha: self.alpha.iter().map(|v| v * s).collect(),
            beta: self
                .beta
                .iter()
                .map(|l| l.iter().map(|v| v * s).collect())
                .collect(),
        }
    }
}

/// A tabulated father/mother wavelet system.
#[derive(Debug, Clone)]
pub struct WaveletBasis {
    config: WaveletConfig,
    grid: Grid,
    /// Column `c` holds basis function `c` in flat coefficient order.
    functions: DMatrix<f64>,
    /// Quadrature weights of `grid`.
    weights: DVector<f64>,
}

// One periodized synthesis step: (approx, detail) of length n -> approx of length 2n.
fn synthesize_step(approx: &[f64], detail: &[f64], h: &[f64], g: &[f64]) -> Vec<f64> {
    let n = approx.len();
    let p = 2 * n;
    let mut out = vec![0.0; p];
    for k in 0..n {
        let (a, d) = (approx[k], detail[k]);
        if a == 0.0 && d == 0.0 {
            continue;
        }
        for t in 0..h.len() {
            out[(2 * k + t) % p] += a * h[t] + d * g[t];
        }
    }
    out
}

impl WaveletBasis {
    /// Builds the periodized Daubechies basis on `2^grid_levels` periodic points.
    pub fn build(config: WaveletConfig) -> Result<Self> {
        config.validate()?;
        let h = daubechies::lowpass(config.order)?;
        let g = daubechies::highpass(&h);
        let levels = config.grid_levels;
        let grid = Grid::periodic(1usize << levels)?;
        let count = config.coefficient_count();
        let mut functions = DMatrix::<f64>::zeros(grid.len(), count);
        let amplitude = ((1usize << levels) as f64).sqrt();

        let cascade = |start_level: u32, k: usize, detail: bool| -> Vec<f64> {
            let n = 1usize << start_level;
            let mut approx = vec![0.0; n];
            let mut det = vec![0.0; n];
            if detail {
                det[k] = 1.0;
            } else {
                approx[k] = 1.0;
            }
            let mut level = start_level;
            let mut cur = synthesize_step(&approx, &det, &h, &g);
            level += 1;
            while level < levels {
                let zeros = vec![0.0; cur.len()];
                cur = synthesize_step(&cur, &zeros, &h, &g);
                level += 1;
            }
            cur
        };

        let mut col = 0;
        let j0 = config.primary_level;
        for k in 0..(1usize << j0) {
            let v = cascade(j0, k, false);
            for (i, x) in v.iter().enumerate() {
                functions[(i, col)] = x * amplitude;
            }
            col += 1;
        }
        for j in j0..=config.last_level {
            for k in 0..(1usize << j) {
                let v = cascade(j, k, true);
                for (i, x) in v.iter().enumerate() {
                    functions[(i, col)] = x * amplitude;
                }
                col += 1;
            }
        }

        let mut basis = Self {
            config,
            grid,
            functions,
            weights: DVector::from_vec(grid.weights()),
        };
        basis.normalize()?;
        Ok(basis)
    }

    fn normalize(&mut self) -> Result<()> {
        for c in 0..self.functions.ncols() {
            let mut column = self.functions.column_mut(c);
            let norm = column
                .iter()
                .zip(self.weights.iter())
                .map(|(v, w)| v * v * w)
                .sum::<f64>()
                .sqrt();
            if !(norm > 1e-300) {
                return Err(Error::Numeric(format!(
                    "basis function {c} vanishes on a {}-point grid",
                    self.grid.len()
                )));
            }
            column /= norm;
        }
        Ok(())
    }

    pub fn config(&self) -> WaveletConfig {
        self.config
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn primary_level(&self) -> u32 {
        self.config.primary_level
    }

    pub fn last_level(&self) -> u32 {
        self.config.last_level
    }

    pub fn coefficient_count(&self) -> usize {
        self.functions.ncols()
    }

    /// Tabulated basis functions, one per column in flat coefficient order.
    pub fn functions(&self) -> &DMatrix<f64> {
        &self.functions
    }

    pub fn function(&self, index: usize) -> SampledCurve {
        let values = self.functions.column(index).iter().copied().collect();
        SampledCurve::new(self.grid, values).expect("column length equals grid length")
    }

    pub fn father(&self, k: usize) -> SampledCurve {
        assert!(k < 1 << self.config.primary_level, "father index out of range");
        self.function(k)
    }

    pub fn mother(&self, level: u32, k: usize) -> SampledCurve {
        assert!(
            (self.config.primary_level..=self.config.last_level).contains(&level) && k < 1 << level,
            "mother index out of range"
        );
        self.function(self.flat_index(level, k))
    }

    /// Flat position of `beta_{level,k}`.
    pub fn flat_index(&self, level: u32, k: usize) -> usize {
        let mut offset = 1usize << self.config.primary_level;
        for j in self.config.primary_level..level {
            offset += 1usize << j;
        }
        offset + k
    }

    pub fn zero_decomposition(&self) -> WaveletDecomposition {
        WaveletDecomposition::zeros(self.config.primary_level, self.config.last_level)
    }

    fn check_grid(&self, curve: &SampledCurve) -> Result<()> {
        if curve.grid() != self.grid {
            return Err(Error::Dimension(format!(
                "curve grid ({} points, {:?}) does not match basis grid ({} points, {:?}); resample the basis first",
                curve.grid().len(),
                curve.grid().kind(),
                self.grid.len(),
                self.grid.kind()
            )));
        }
        Ok(())
    }

    /// Flat coefficients of a raw value vector on the basis grid.
    pub fn analyze_values(&self, values: &[f64]) -> Result<DVector<f64>> {
        if values.len() != self.grid.len() {
            return Err(Error::Dimension(format!(
                "{} values for a {}-point basis grid",
                values.len(),
                self.grid.len()
            )));
        }
        let weighted = DVector::from_iterator(
            values.len(),
            values.iter().zip(self.weights.iter()).map(|(v, w)| v * w),
        );
        Ok(self.functions.tr_mul(&weighted))
    }

    /// Discrete inner products of `curve` with every basis function.
    pub fn decompose(&self, curve: &SampledCurve) -> Result<WaveletDecomposition> {
        self.check_grid(curve)?;
        let flat = self.analyze_values(curve.values())?;
        WaveletDecomposition::from_flat(
            self.config.primary_level,
            self.config.last_level,
            flat.as_slice(),
        )
    }

    /// `sum alpha phi + sum beta psi` evaluated on the basis grid.
    pub fn reconstruct(&self, coeffs: &WaveletDecomposition) -> Result<SampledCurve> {
        if coeffs.len() != self.coefficient_count()
            || coeffs.primary_level() != self.config.primary_level
            || coeffs.last_level() != self.config.last_level
        {
            return Err(Error::Dimension(format!(
                "decomposition with levels {}..{} does not match basis levels {}..{}",
                coeffs.primary_level(),
                coeffs.last_level(),
                self.config.primary_level,
                self.config.last_level
            )));
        }
        let flat = DVector::from_vec(coeffs.to_flat());
        let values = &self.functions * flat;
        SampledCurve::new(self.grid, values.as_slice().to_vec())
    }

    /// Interpolates every basis function onto `target` with a natural cubic
    /// spline and renormalizes it in the discrete L² norm of `target`.
    pub fn resample(&self, target: Grid) -> Result<Self> {
        let mut knots = self.grid.abscissae();
        let periodic = self.grid.kind() == GridKind::Periodic;
        if periodic {
            knots.push(1.0);
        }
        let xs = target.abscissae();
        let mut functions = DMatrix::<f64>::zeros(target.len(), self.functions.ncols());
        for c in 0..self.functions.ncols() {
            let col = self.functions.column(c);
            let mut vals: Vec<f64> = col.iter().copied().collect();
            if periodic {
                vals.push(vals[0]);
            }
            let spline = NaturalCubicSpline::new(&knots, &vals)?;
            for (i, &x) in xs.iter().enumerate() {
                functions[(i, c)] = spline.eval(x);
            }
        }
        let mut out = Self {
            config: self.config,
            grid: target,
            functions,
            weights: DVector::from_vec(target.weights()),
        };
        out.normalize()?;
        Ok(out)
    }
}

/// Builds the basis for `(order, L, J, K)`.
pub fn build_basis(
    order: usize,
    grid_levels: u32,
    primary_level: u32,
    last_level: u32,
) -> Result<WaveletBasis> {
    WaveletBasis::build(WaveletConfig {
        order,
        grid_levels,
        primary_level,
        last_level,
    })
}

/// Resamples `basis` onto a closed grid of `target_grid_size` points.
pub fn resample_basis(basis: &WaveletBasis, target_grid_size: usize) -> Result<WaveletBasis> {
    if target_grid_size < 2 {
        return Err(Error::Config(format!(
            "target grid needs at least 2 points, got {target_grid_size}"
        )));
    }
    basis.resample(Grid::closed(target_grid_size)?)
}
