//! Spectral operators on the sine basis and simulation of stationary ARBX(1)
//! trajectories.
//!
//! Everything is carried in sine coordinates: a component curve is a vector
//! `c` with `f = sum_j c_j phi_j`, `phi_j(x) = sqrt(2) sin(pi j x)`, and an
//! extended state concatenates the `b + 1` component vectors. An operator `O`
//! is stored through `o_{jh} = <O phi_j, phi_h>`, so it acts on coefficient
//! vectors by the transpose of that matrix.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, SampledCurve};
use crate::mra::WaveletBasis;
use crate::spaces::{ExtendedState, GammaFamily, SpaceParams};

/// Negative eigenvalues above this magnitude are a model error.
pub const PSD_TOLERANCE: f64 = 1e-8;

pub fn sine_basis(j: usize, x: f64) -> Result<f64> {
    if j < 1 {
        return Err(Error::Domain("sine basis index starts at 1".into()));
    }
    Ok(std::f64::consts::SQRT_2 * (std::f64::consts::PI * j as f64 * x).sin())
}

/// Operator given by its M x M matrix `o_{jh} = <O phi_j, phi_h>`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralOperator {
    matrix: DMatrix<f64>,
}

impl SpectralOperator {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.nrows() != matrix.ncols() {
            return Err(Error::Dimension(format!(
                "spectral operator matrix must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("spectral operator has non-finite entries".into()));
        }
        Ok(Self { matrix })
    }

    /// Diagonal `diag(j)` and off-diagonal `off(|j - h|)`, indices from 1.
    pub fn toeplitz_like(m: usize, diag: impl Fn(usize) -> f64, off: impl Fn(usize) -> f64) -> Self {
        let matrix = DMatrix::from_fn(m, m, |r, c| {
            if r == c {
                diag(r + 1)
            } else {
                off(r.abs_diff(c))
            }
        });
        Self { matrix }
    }

    pub fn zeros(m: usize) -> Self {
        Self {
            matrix: DMatrix::zeros(m, m),
        }
    }

    pub fn truncation(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Entry `<O phi_j, phi_h>`, indices from 1.
    pub fn entry(&self, j: usize, h: usize) -> f64 {
        self.matrix[(j - 1, h - 1)]
    }

    /// Coefficients of `O(f)` from those of `f`.
    pub fn apply(&self, coeffs: &DVector<f64>) -> DVector<f64> {
        self.matrix.tr_mul(coeffs)
    }
}

/// The block autocorrelation operator with first row `(rho, a_1, .., a_b)`,
/// `u_1, .., u_b` on the diagonal below it and zero blocks elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOperator {
    rho: SpectralOperator,
    a: Vec<SpectralOperator>,
    u: Vec<SpectralOperator>,
}

impl BlockOperator {
    pub fn new(rho: SpectralOperator, a: Vec<SpectralOperator>, u: Vec<SpectralOperator>) -> Result<Self> {
        let m = rho.truncation();
        if a.len() != u.len() {
            return Err(Error::Dimension(format!(
                "{} exogenous operators a_i but {} operators u_i",
                a.len(),
                u.len()
            )));
        }
        if a.iter().chain(&u).any(|o| o.truncation() != m) {
            return Err(Error::Dimension("all blocks must share one truncation M".into()));
        }
        Ok(Self { rho, a, u })
    }

    pub fn zeros(b: usize, m: usize) -> Self {
        Self {
            rho: SpectralOperator::zeros(m),
            a: vec![SpectralOperator::zeros(m); b],
            u: vec![SpectralOperator::zeros(m); b],
        }
    }

    pub fn b(&self) -> usize {
        self.a.len()
    }

    pub fn truncation(&self) -> usize {
        self.rho.truncation()
    }

    pub fn rho(&self) -> &SpectralOperator {
        &self.rho
    }

    pub fn a(&self, i: usize) -> &SpectralOperator {
        &self.a[i - 1]
    }

    pub fn u(&self, i: usize) -> &SpectralOperator {
        &self.u[i - 1]
    }

    /// The square matrix acting on concatenated coefficient vectors.
    pub fn action(&self) -> DMatrix<f64> {
        let m = self.truncation();
        let dim = (self.b() + 1) * m;
        let mut r = DMatrix::zeros(dim, dim);
        r.view_mut((0, 0), (m, m)).copy_from(&self.rho.matrix.transpose());
        for i in 0..self.b() {
            let off = (i + 1) * m;
            r.view_mut((0, off), (m, m)).copy_from(&self.a[i].matrix.transpose());
            r.view_mut((off, off), (m, m)).copy_from(&self.u[i].matrix.transpose());
        }
        r
    }
}

pub fn build_autocorrelation(b: usize, w: f64, m: usize) -> Result<BlockOperator> {
    if b < 1 {
        return Err(Error::Config("at least one exogenous variable is required".into()));
    }
    if !(w > 0.0) {
        return Err(Error::Config(format!("W must be positive, got {w}")));
    }
    if m < 1 {
        return Err(Error::Config("sine truncation M must be at least 1".into()));
    }
    let rho = SpectralOperator::toeplitz_like(
        m,
        |j| (1.0 + j as f64).powf(-1.5),
        |d| (-(d as f64) / w).exp(),
    );
    let u = (1..=b)
        .map(|i| {
            SpectralOperator::toeplitz_like(
                m,
                |j| (1.0 + j as f64).powf(-(3.0 + 0.5 * i as f64)),
                |d| (-((d * d) as f64) / w).exp(),
            )
        })
        .collect();
    let a = (1..=b)
        .map(|i| {
            SpectralOperator::toeplitz_like(
                m,
                |j| (1.0 + j as f64).powf(-(4.0 + 0.5 * i as f64)),
                |d| (-((d * d * d) as f64) / w).exp(),
            )
        })
        .collect();
    BlockOperator::new(rho, a, u)
}

/// Symmetric PSD covariance of an extended state in sine coordinates,
/// `components x components` blocks of size M.
#[derive(Debug, Clone)]
pub struct BlockCovariance {
    components: usize,
    m: usize,
    matrix: DMatrix<f64>,
    raw_min_eigenvalue: f64,
    clipped_mass: f64,
}

impl BlockCovariance {
    /// Symmetrizes `raw`, clips negative eigenvalues to zero and records how
    /// much was clipped.
    pub fn from_raw(components: usize, m: usize, raw: DMatrix<f64>) -> Result<Self> {
        let dim = components * m;
        if raw.nrows() != dim || raw.ncols() != dim {
            return Err(Error::Dimension(format!(
                "covariance must be {dim}x{dim}, got {}x{}",
                raw.nrows(),
                raw.ncols()
            )));
        }
        let sym = (&raw + raw.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym.clone());
        let raw_min = eig.eigenvalues.min();
        // eigenvalues this close to zero are rounding noise of a singular matrix
        let noise = 1e-12 * eig.eigenvalues.amax().max(1.0);
        let clipped_mass: f64 = eig
            .eigenvalues
            .iter()
            .filter(|v| **v < -noise)
            .map(|v| -v)
            .sum();
        let matrix = if raw_min < -noise {
            let clipped = eig.eigenvalues.map(|v| v.max(0.0));
            let u = &eig.eigenvectors;
            let p = u * DMatrix::from_diagonal(&clipped) * u.transpose();
            (&p + p.transpose()) * 0.5
        } else {
            sym
        };
        let after = SymmetricEigen::new(matrix.clone()).eigenvalues.min();
        if after < -PSD_TOLERANCE {
            return Err(Error::Model(format!(
                "covariance has eigenvalue {after:e} after PSD projection"
            )));
        }
        Ok(Self {
            components,
            m,
            matrix,
            raw_min_eigenvalue: raw_min,
            clipped_mass,
        })
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn truncation(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.components * self.m
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Block `(p, q)`, indices from 0.
    pub fn block(&self, p: usize, q: usize) -> DMatrix<f64> {
        self.matrix
            .view((p * self.m, q * self.m), (self.m, self.m))
            .into_owned()
    }

    /// Smallest eigenvalue of the symmetrized input before projection.
    pub fn raw_min_eigenvalue(&self) -> f64 {
        self.raw_min_eigenvalue
    }

    /// Sum of the magnitudes of the clipped negative eigenvalues.
    pub fn clipped_mass(&self) -> f64 {
        self.clipped_mass
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }
}

/// `C̄`, with block `(p, q)` diagonal in `j` with entries
/// `(1 + j)^{-(gamma_p + gamma_q)/2}`.
pub fn build_state_covariance(params: &SpaceParams, m: usize) -> Result<BlockCovariance> {
    if m < 1 {
        return Err(Error::Config("sine truncation M must be at least 1".into()));
    }
    let gamma = params.gamma();
    let k = gamma.len();
    let mut raw = DMatrix::zeros(k * m, k * m);
    for p in 0..k {
        for q in 0..k {
            let e = -(gamma[p] + gamma[q]) / 2.0;
            for j in 0..m {
                raw[(p * m + j, q * m + j)] = (2.0 + j as f64).powf(e);
            }
        }
    }
    BlockCovariance::from_raw(k, m, raw)
}

/// `C̄_eta`: block-diagonal, with the endogenous block built from `rho` and
/// the `i`-th exogenous block from `u_i`.
pub fn build_innovation_covariance(
    state: &BlockCovariance,
    op: &BlockOperator,
    w: f64,
) -> Result<BlockCovariance> {
    let m = state.truncation();
    let k = state.components();
    if op.truncation() != m || op.b() + 1 != k {
        return Err(Error::Dimension(
            "autocorrelation and state covariance disagree on b or M".into(),
        ));
    }
    if !(w > 0.0) {
        return Err(Error::Config(format!("W must be positive, got {w}")));
    }
    let w2 = w * w;
    let c = state.matrix();
    let mut raw = DMatrix::zeros(k * m, k * m);
    for p in 0..k {
        let (diag_op, power) = if p == 0 { (op.rho(), 2) } else { (op.u(p), 3) };
        for j in 0..m {
            for h in 0..m {
                let v = if j == h {
                    let r = diag_op.matrix()[(j, j)];
                    c[(p * m + j, p * m + j)] * (1.0 - r * r)
                } else {
                    let d = j.abs_diff(h) as f64;
                    (-d.powi(power) / w2).exp()
                };
                raw[(p * m + j, p * m + h)] = v;
            }
        }
    }
    BlockCovariance::from_raw(k, m, raw)
}

/// Symmetric square root factor `L` with `L L^T = C`.
#[derive(Debug, Clone)]
pub struct GaussianFactor {
    factor: DMatrix<f64>,
}

impl GaussianFactor {
    pub fn new(cov: &BlockCovariance) -> Result<Self> {
        let eig = SymmetricEigen::try_new(cov.matrix().clone(), f64::EPSILON, 0)
            .ok_or_else(|| Error::Model("eigendecomposition of covariance failed".into()))?;
        let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        let factor = &eig.eigenvectors * DMatrix::from_diagonal(&roots);
        Ok(Self { factor })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.factor * z
    }

    /// `count` independent draws as columns.
    pub fn draw_many<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> DMatrix<f64> {
        let mut z = DMatrix::zeros(self.dim(), count);
        for col in 0..count {
            for row in 0..self.dim() {
                z[(row, col)] = rng.sample::<f64, _>(StandardNormal);
            }
        }
        &self.factor * z
    }
}

/// Sine functions tabulated on a grid: `matrix[(i, j-1)] = phi_j(x_i)`.
#[derive(Debug, Clone)]
pub struct SineSynthesis {
    grid: Grid,
    matrix: DMatrix<f64>,
}

impl SineSynthesis {
    pub fn new(grid: Grid, m: usize) -> Self {
        let xs = grid.abscissae();
        let s2 = std::f64::consts::SQRT_2;
        let matrix = DMatrix::from_fn(grid.len(), m, |i, j| {
            s2 * (std::f64::consts::PI * (j + 1) as f64 * xs[i]).sin()
        });
        Self { grid, matrix }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn truncation(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn curve(&self, coeffs: &[f64]) -> SampledCurve {
        let c = DVector::from_column_slice(coeffs);
        let v = &self.matrix * c;
        SampledCurve::new(self.grid, v.as_slice().to_vec()).expect("grid length")
    }

    /// Extended state from concatenated coefficient blocks.
    pub fn state(&self, coeffs: &[f64]) -> Result<ExtendedState> {
        let m = self.truncation();
        if coeffs.is_empty() || coeffs.len() % m != 0 {
            return Err(Error::Dimension(format!(
                "{} coefficients do not split into blocks of {m}",
                coeffs.len()
            )));
        }
        ExtendedState::new(coeffs.chunks(m).map(|c| self.curve(c)).collect())
    }
}

/// Transfer matrix from sine to wavelet coordinates on the basis grid,
/// `T[c, j] = <psi_c, phi_j>` with grid quadrature.
#[derive(Debug, Clone)]
pub struct SineToWavelet {
    matrix: DMatrix<f64>,
}

impl SineToWavelet {
    pub fn new(basis: &WaveletBasis, m: usize) -> Self {
        let sines = SineSynthesis::new(basis.grid(), m);
        let mut weighted = sines.matrix.clone();
        for (i, w) in basis.grid().weights().iter().enumerate() {
            weighted.row_mut(i).scale_mut(*w);
        }
        Self {
            matrix: basis.functions().tr_mul(&weighted),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Block-diagonal version for `components` concatenated components.
    pub fn block(&self, components: usize) -> DMatrix<f64> {
        let (r, c) = self.matrix.shape();
        let mut out = DMatrix::zeros(r * components, c * components);
        for k in 0..components {
            out.view_mut((k * r, k * c), (r, c)).copy_from(&self.matrix);
        }
        out
    }
}

/// Model parameters as they appear in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub b: usize,
    pub beta: f64,
    pub gamma_family: GammaFamily,
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub grid_size: usize,
    pub burn_in: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            b: 3,
            beta: 0.6,
            gamma_family: GammaFamily::Gamma1,
            w: 0.4,
            m: 50,
            grid_size: 64,
            burn_in: 200,
        }
    }
}

impl ModelConfig {
    /// Every violated invariant, without building anything.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.b < 1 {
            out.push("b must be at least 1".into());
        }
        if !(self.w > 0.0) {
            out.push(format!("W must be positive (got {})", self.w));
        }
        if self.m < 1 {
            out.push("M must be at least 1".into());
        }
        if self.grid_size < 2 {
            out.push(format!("grid_size must be at least 2 (got {})", self.grid_size));
        }
        match self.gamma_family.values(self.beta, self.b) {
            Ok(g) => out.extend(SpaceParams::violations(self.beta, &g)),
            Err(e) => out.push(e.to_string()),
        }
        out
    }

    pub fn space_params(&self) -> Result<SpaceParams> {
        SpaceParams::from_family(self.beta, &self.gamma_family, self.b)
    }

    pub fn build(&self) -> Result<ModelSpec> {
        if let Some(v) = self.violations().into_iter().next() {
            return Err(Error::Config(v));
        }
        let params = self.space_params()?;
        let rho = build_autocorrelation(self.b, self.w, self.m)?;
        let c_bar = build_state_covariance(&params, self.m)?;
        let c_eta = build_innovation_covariance(&c_bar, &rho, self.w)?;
        ModelSpec::from_parts(params, rho, c_bar, c_eta, Grid::closed(self.grid_size)?)
    }
}

/// A fully assembled simulation model.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    params: SpaceParams,
    rho: BlockOperator,
    action: DMatrix<f64>,
    c_bar: BlockCovariance,
    c_eta: BlockCovariance,
    factor_bar: GaussianFactor,
    factor_eta: GaussianFactor,
    grid: Grid,
    stationarity: SpectralRadiusReport,
}

impl ModelSpec {
    pub fn from_parts(
        params: SpaceParams,
        rho: BlockOperator,
        c_bar: BlockCovariance,
        c_eta: BlockCovariance,
        grid: Grid,
    ) -> Result<Self> {
        let k = params.b() + 1;
        let m = rho.truncation();
        if rho.b() + 1 != k
            || c_bar.components() != k
            || c_eta.components() != k
            || c_bar.truncation() != m
            || c_eta.truncation() != m
        {
            return Err(Error::Dimension(
                "model blocks disagree on b or M".into(),
            ));
        }
        let stationarity = spectral_radius_check(&rho, 20);
        Ok(Self {
            action: rho.action(),
            factor_bar: GaussianFactor::new(&c_bar)?,
            factor_eta: GaussianFactor::new(&c_eta)?,
            params,
            rho,
            c_bar,
            c_eta,
            grid,
            stationarity,
        })
    }

    pub fn params(&self) -> &SpaceParams {
        &self.params
    }

    pub fn b(&self) -> usize {
        self.params.b()
    }

    pub fn truncation(&self) -> usize {
        self.rho.truncation()
    }

    pub fn dim(&self) -> usize {
        (self.b() + 1) * self.truncation()
    }

    pub fn rho(&self) -> &BlockOperator {
        &self.rho
    }

    /// Matrix of `rhō` acting on concatenated sine coefficients.
    pub fn action(&self) -> &DMatrix<f64> {
        &self.action
    }

    pub fn state_covariance(&self) -> &BlockCovariance {
        &self.c_bar
    }

    pub fn innovation_covariance(&self) -> &BlockCovariance {
        &self.c_eta
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn with_grid(mut self, grid: Grid) -> Self {
        self.grid = grid;
        self
    }

    pub fn stationarity(&self) -> &SpectralRadiusReport {
        &self.stationarity
    }

    pub fn initial_factor(&self) -> &GaussianFactor {
        &self.factor_bar
    }

    pub fn innovation_factor(&self) -> &GaussianFactor {
        &self.factor_eta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralRadiusReport {
    /// First power with operator norm below one.
    pub j0: Option<usize>,
    /// `||rhō^j||` for `j = 1..=j_max` in the coefficient l2 norm.
    pub norms: Vec<f64>,
}

pub fn spectral_radius_check(op: &BlockOperator, j_max: usize) -> SpectralRadiusReport {
    let a = op.action();
    let mut power = a.clone();
    let mut norms = Vec::with_capacity(j_max);
    for j in 1..=j_max {
        if j > 1 {
            power = &power * &a;
        }
        let s = power.clone().svd(false, false).singular_values;
        norms.push(s.iter().fold(0.0f64, |m, v| m.max(*v)));
    }
    let j0 = norms.iter().position(|n| *n < 1.0).map(|p| p + 1);
    SpectralRadiusReport { j0, norms }
}

pub fn sample_gaussian_state(cov: &BlockCovariance, grid: Grid, seed: u64) -> Result<ExtendedState> {
    let factor = GaussianFactor::new(cov)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = factor.draw(&mut rng);
    SineSynthesis::new(grid, cov.truncation()).state(c.as_slice())
}

/// Simulated states in sine coordinates, synthesized on demand.
#[derive(Debug, Clone)]
pub struct Trajectory {
    grid: Grid,
    m: usize,
    initial: DVector<f64>,
    coefficients: DMatrix<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.coefficients.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Grid step `Delta h`.
    pub fn discretization(&self) -> f64 {
        self.grid.step()
    }

    pub fn truncation(&self) -> usize {
        self.m
    }

    /// The state preceding the first sample, `X̄_0`.
    pub fn initial_coefficients(&self) -> &DVector<f64> {
        &self.initial
    }

    /// Row `i` holds the sine coefficients of the `i`-th state.
    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coefficients
    }

    pub fn state(&self, i: usize) -> Result<ExtendedState> {
        let row: Vec<f64> = self.coefficients.row(i).iter().copied().collect();
        SineSynthesis::new(self.grid, self.m).state(&row)
    }

    pub fn initial_state(&self) -> Result<ExtendedState> {
        SineSynthesis::new(self.grid, self.m).state(self.initial.as_slice())
    }

    pub fn states(&self) -> Result<Vec<ExtendedState>> {
        let syn = SineSynthesis::new(self.grid, self.m);
        (0..self.len())
            .map(|i| {
                let row: Vec<f64> = self.coefficients.row(i).iter().copied().collect();
                syn.state(&row)
            })
            .collect()
    }
}

pub fn simulate(spec: &ModelSpec, n: usize, burn_in: usize, seed: u64) -> Result<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_with_rng(spec, n, burn_in, &mut rng)
}

/// `X̄_0 ~ N(0, C̄)`, then `X̄_t = rhō(X̄_{t-1}) + eps_t` with
/// `eps_t ~ N(0, C̄_eta)`; the first `burn_in` steps are discarded and the
/// last discarded state is kept as `X̄_0`.
pub fn simulate_with_rng<R: Rng + ?Sized>(
    spec: &ModelSpec,
    n: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    if spec.stationarity().j0.is_none() {
        return Err(Error::Model(format!(
            "no power of the autocorrelation operator up to {} has norm below one",
            spec.stationarity().norms.len()
        )));
    }
    if n < 1 {
        return Err(Error::Config("trajectory length must be at least 1".into()));
    }
    let dim = spec.dim();
    let a = spec.action();
    let mut x = spec.initial_factor().draw(rng);
    let mut out = DMatrix::zeros(n, dim);
    let mut initial = x.clone();
    let total = burn_in + n;
    let chunk = 512;
    let mut t = 0;
    let mut next = DVector::zeros(dim);
    while t < total {
        let count = chunk.min(total - t);
        let eps = spec.innovation_factor().draw_many(rng, count);
        for c in 0..count {
            next.gemv(1.0, a, &x, 0.0);
            next += eps.column(c);
            std::mem::swap(&mut x, &mut next);
            let step = t + c;
            if step + 1 == burn_in {
                initial.copy_from(&x);
            }
            if step >= burn_in {
                out.row_mut(step - burn_in).copy_from(&x.transpose());
            }
        }
        t += count;
    }
    Ok(Trajectory {
        grid: spec.grid(),
        m: spec.truncation(),
        initial,
        coefficients: out,
    })
}
