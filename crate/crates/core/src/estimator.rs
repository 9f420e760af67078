//! Empirical covariance operators, their eigensystems and the componentwise
//! estimator of the block autocorrelation operator.
//!
//! States are handled through their concatenated wavelet coefficients `x`
//! with the `H~` inner product `<x, y> = sum_c w_c x_c y_c`. A sample may be
//! stored in factored form `x_i = A z_i` when all states are known to lie in
//! the range of a fixed map `A` (simulated states are sine expansions, for
//! instance), which lets the dense eigenproblem run in the latent dimension.
//!
//! Conventions:
//!
//! * `C_n(f) = (1/n) sum_{i<=n} <X_i, f> X_i`
//! * `D_n(f) = (1/(n-1)) sum_{i<n} <X_i, f> X_{i+1}`
//! * `rho~(x) = sum_{j,l<=k} <x, phi_j> <D_n phi_j, phi_l> / C_{n,j} phi_l`

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mra::WaveletBasis;
use crate::spaces::{ext_htilde_weights, ExtendedState};

/// Eigenvalues below this fraction of the largest one count as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Gap below which two eigenvalues are considered tied.
pub const GAP_TOLERANCE: f64 = 1e-12;

/// Which eigenproblem to solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Gram when `n` does not exceed the latent dimension, dense otherwise.
    Auto,
    /// The `n x n` Gram matrix of the sample.
    Gram,
    /// The covariance in (latent) coefficient space.
    Dense,
}

/// A functional sample in wavelet coordinates.
#[derive(Debug, Clone)]
pub struct Sample {
    latent: DMatrix<f64>,
    map: Option<DMatrix<f64>>,
    weights: DVector<f64>,
    curves: Option<Vec<ExtendedState>>,
}

impl Sample {
    /// Rows of `coefficients` are the states; `weights` is the `H~` weight of
    /// every coordinate.
    pub fn from_coefficients(coefficients: DMatrix<f64>, weights: DVector<f64>) -> Result<Self> {
        if coefficients.ncols() != weights.len() {
            return Err(Error::Dimension(format!(
                "{} coordinates but {} weights",
                coefficients.ncols(),
                weights.len()
            )));
        }
        check_weights(&weights)?;
        Ok(Self {
            latent: coefficients,
            map: None,
            weights,
            curves: None,
        })
    }

    /// States `x_i = map * z_i` with `z_i` the rows of `latent`.
    pub fn factored(latent: DMatrix<f64>, map: DMatrix<f64>, weights: DVector<f64>) -> Result<Self> {
        if map.ncols() != latent.ncols() || map.nrows() != weights.len() {
            return Err(Error::Dimension(format!(
                "map is {}x{}, latent rows have {} entries and there are {} weights",
                map.nrows(),
                map.ncols(),
                latent.ncols(),
                weights.len()
            )));
        }
        check_weights(&weights)?;
        Ok(Self {
            latent,
            map: Some(map),
            weights,
            curves: None,
        })
    }

    /// Decomposes every state against `basis` and keeps the curves so that
    /// predictions can be returned on the grid.
    pub fn from_states(states: &[ExtendedState], basis: &WaveletBasis, beta: f64) -> Result<Self> {
        let first = states
            .first()
            .ok_or_else(|| Error::Dimension("empty sample".into()))?;
        let k = first.len();
        let grid = first.grid();
        let d = k * basis.coefficient_count();
        let mut rows = DMatrix::zeros(states.len(), d);
        for (i, s) in states.iter().enumerate() {
            if s.len() != k || s.grid() != grid {
                return Err(Error::Dimension(format!(
                    "state {i} does not match the grid or component count of state 0"
                )));
            }
            let c = s.coefficients(basis)?;
            rows.row_mut(i).copy_from_slice(&c);
        }
        let weights = DVector::from_vec(ext_htilde_weights(basis, beta, k));
        let mut sample = Self::from_coefficients(rows, weights)?;
        sample.curves = Some(states.to_vec());
        Ok(sample)
    }

    pub fn len(&self) -> usize {
        self.latent.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of wavelet coordinates of a state.
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Dimension of the stored rows (equal to `dim` unless factored).
    pub fn latent_dim(&self) -> usize {
        self.latent.ncols()
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn curves(&self) -> Option<&[ExtendedState]> {
        self.curves.as_deref()
    }

    /// Wavelet coordinates of state `i`.
    pub fn state(&self, i: usize) -> DVector<f64> {
        let z = self.latent.row(i).transpose();
        match &self.map {
            Some(a) => a * z,
            None => z,
        }
    }

    /// All states as rows in wavelet coordinates.
    pub fn coefficient_rows(&self) -> DMatrix<f64> {
        match &self.map {
            Some(a) => &self.latent * a.transpose(),
            None => self.latent.clone(),
        }
    }

    /// The sample restricted to `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let latent = self.latent.select_rows(indices);
        let curves = self
            .curves
            .as_ref()
            .map(|c| indices.iter().map(|&i| c[i].clone()).collect());
        Self {
            latent,
            map: self.map.clone(),
            weights: self.weights.clone(),
            curves,
        }
    }

    /// `<x, y>` in the `H~` geometry.
    pub fn inner(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        x.iter()
            .zip(y.iter())
            .zip(self.weights.iter())
            .map(|((a, b), w)| a * b * w)
            .sum()
    }

    // K = A^T W A (or W), the latent-space inner product.
    fn latent_kernel(&self) -> DMatrix<f64> {
        match &self.map {
            Some(a) => {
                let mut wa = a.clone();
                for (i, w) in self.weights.iter().enumerate() {
                    wa.row_mut(i).scale_mut(*w);
                }
                a.tr_mul(&wa)
            }
            None => DMatrix::from_diagonal(&self.weights),
        }
    }

    fn check_min_len(&self, min: usize) -> Result<()> {
        if self.len() < min {
            return Err(Error::Dimension(format!(
                "sample of size {} is too small (need at least {min})",
                self.len()
            )));
        }
        Ok(())
    }
}

fn check_weights(w: &DVector<f64>) -> Result<()> {
    if w.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain("inner-product weights must be positive".into()));
    }
    Ok(())
}

/// `C_n` through its Gram matrix `G_il = <X_i, X_l> / n`.
#[derive(Debug, Clone)]
pub struct AutocovarianceGram {
    gram: DMatrix<f64>,
}

impl AutocovarianceGram {
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn n(&self) -> usize {
        self.gram.nrows()
    }

    /// `trace(C_n) = (1/n) sum_i <X_i, X_i>`.
    pub fn trace(&self) -> f64 {
        self.gram.trace()
    }

    /// Eigenvalues of `C_n` in descending order (the nonzero ones coincide
    /// with those of the Gram matrix).
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = SymmetricEigen::new(self.gram.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }
}

pub fn empirical_autocovariance(sample: &Sample) -> Result<AutocovarianceGram> {
    sample.check_min_len(2)?;
    let n = sample.len() as f64;
    let k = sample.latent_kernel();
    let zk = &sample.latent * k;
    let mut gram = zk * sample.latent.transpose() / n;
    gram = (&gram + gram.transpose()) * 0.5;
    Ok(AutocovarianceGram { gram })
}

/// `D_n` through the lagged Gram matrix `L_il = <X_i, X_{l+1}> / (n - 1)`,
/// `i, l < n - 1`.
#[derive(Debug, Clone)]
pub struct CrossCovarianceGram {
    lagged: DMatrix<f64>,
    sample: Sample,
}

impl CrossCovarianceGram {
    pub fn lagged(&self) -> &DMatrix<f64> {
        &self.lagged
    }

    /// `D_n(f)` in wavelet coordinates.
    pub fn apply(&self, f: &DVector<f64>) -> DVector<f64> {
        let n = self.sample.len();
        let mut out = DVector::zeros(self.sample.dim());
        for i in 0..n - 1 {
            let s = self.sample.inner(&self.sample.state(i), f);
            out.axpy(s, &self.sample.state(i + 1), 1.0);
        }
        out / (n - 1) as f64
    }

    /// `<D_n f, g>`.
    pub fn pair(&self, f: &DVector<f64>, g: &DVector<f64>) -> f64 {
        self.sample.inner(&self.apply(f), g)
    }
}

pub fn empirical_cross_covariance(sample: &Sample) -> Result<CrossCovarianceGram> {
    sample.check_min_len(2)?;
    let n = sample.len();
    let k = sample.latent_kernel();
    let head = sample.latent.rows(0, n - 1);
    let tail = sample.latent.rows(1, n - 1);
    let lagged = (head * k) * tail.transpose() / (n - 1) as f64;
    Ok(CrossCovarianceGram {
        lagged,
        sample: sample.clone(),
    })
}

/// Positive part of the spectrum of `C_n` with its eigenstates.
#[derive(Debug, Clone)]
pub struct EmpiricalEigenSystem {
    eigenvalues: Vec<f64>,
    eigenstates: DMatrix<f64>,
    scores: DMatrix<f64>,
    weights: DVector<f64>,
    n: usize,
}

impl EmpiricalEigenSystem {
    /// Strictly positive eigenvalues, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `C_{n,j}` for `j >= 1`; zero beyond the rank.
    pub fn eigenvalue(&self, j: usize) -> f64 {
        self.eigenvalues.get(j - 1).copied().unwrap_or(0.0)
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn sample_size(&self) -> usize {
        self.n
    }

    /// Eigenstates as columns, in wavelet coordinates. Only the first
    /// `stored()` are available.
    pub fn eigenstates(&self) -> &DMatrix<f64> {
        &self.eigenstates
    }

    pub fn stored(&self) -> usize {
        self.eigenstates.ncols()
    }

    /// `scores[(i, j)] = <X_i, phi_j>`.
    pub fn scores(&self) -> &DMatrix<f64> {
        &self.scores
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    /// `<x, phi_j>` for the stored eigenstates.
    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        let wx = x.component_mul(&self.weights);
        self.eigenstates.tr_mul(&wx)
    }

    /// Coefficients `a_ij = <X_i, phi_j> / (n C_{n,j})` with
    /// `phi_j = sum_i a_ij X_i`.
    pub fn lift_weights(&self) -> DMatrix<f64> {
        let mut a = self.scores.clone();
        for j in 0..a.ncols() {
            let s = 1.0 / (self.n as f64 * self.eigenvalues[j]);
            a.column_mut(j).scale_mut(s);
        }
        a
    }

    /// Eigenstate `j` (from 1) as curves, from the sample curves.
    pub fn eigenstate_curves(&self, j: usize, curves: &[ExtendedState]) -> Result<ExtendedState> {
        if curves.len() != self.n {
            return Err(Error::Dimension(format!(
                "{} curves for a sample of size {}",
                curves.len(),
                self.n
            )));
        }
        let a = self.lift_weights();
        combine(curves, a.column(j - 1).iter().copied())
    }
}

fn combine(curves: &[ExtendedState], coeffs: impl Iterator<Item = f64>) -> Result<ExtendedState> {
    let mut out = ExtendedState::zeros(curves[0].grid(), curves[0].b());
    for (c, a) in curves.iter().zip(coeffs) {
        if a != 0.0 {
            out = out.axpy(a, c)?;
        }
    }
    Ok(out)
}

pub fn eigendecompose(sample: &Sample, route: Route) -> Result<EmpiricalEigenSystem> {
    eigendecompose_limited(sample, route, None)
}

/// Like [`eigendecompose`] but builds at most `limit` eigenstates (all
/// positive eigenvalues are still reported).
pub fn eigendecompose_limited(
    sample: &Sample,
    route: Route,
    limit: Option<usize>,
) -> Result<EmpiricalEigenSystem> {
    sample.check_min_len(1)?;
    let route = match route {
        Route::Auto if sample.len() <= sample.latent_dim() => Route::Gram,
        Route::Auto => Route::Dense,
        r => r,
    };
    let n = sample.len();
    let (values, states, scores) = match route {
        Route::Gram => gram_route(sample, limit)?,
        _ => dense_route(sample, limit)?,
    };
    let mut states = states;
    let mut scores = scores;
    for j in 0..states.ncols() {
        let col = states.column(j);
        let (idx, _) = col
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) });
        if col[idx] < 0.0 {
            states.column_mut(j).neg_mut();
            scores.column_mut(j).neg_mut();
        }
    }
    Ok(EmpiricalEigenSystem {
        eigenvalues: values,
        eigenstates: states,
        scores,
        weights: sample.weights.clone(),
        n,
    })
}

type Spectrum = (Vec<f64>, DMatrix<f64>, DMatrix<f64>);

fn sorted_eigen(m: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("covariance contains non-finite values".into()));
    }
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numeric("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = eig.eigenvectors.select_columns(&order);
    Ok((values, vectors))
}

fn positive_count(values: &[f64]) -> usize {
    let top = values.first().copied().unwrap_or(0.0);
    if !(top > 0.0) {
        return 0;
    }
    values.iter().take_while(|v| **v > RANK_TOLERANCE * top).count()
}

fn gram_route(sample: &Sample, limit: Option<usize>) -> Result<Spectrum> {
    let n = sample.len();
    let g = if n == 1 {
        let k = sample.latent_kernel();
        let z = &sample.latent;
        (z * k) * z.transpose()
    } else {
        empirical_autocovariance(sample)?.gram
    };
    let (values, vectors) = sorted_eigen(g)?;
    let rank = positive_count(&values);
    let keep = limit.map_or(rank, |l| l.min(rank));
    let mut scores = DMatrix::zeros(n, keep);
    let mut latent_states = DMatrix::zeros(sample.latent_dim(), keep);
    for j in 0..keep {
        let s = (n as f64 * values[j]).sqrt();
        let v = vectors.column(j);
        scores.set_column(j, &(v * s));
        latent_states.set_column(j, &(sample.latent.tr_mul(&v) / s));
    }
    let states = match &sample.map {
        Some(a) => a * latent_states,
        None => latent_states,
    };
    Ok((values[..rank].to_vec(), states, scores))
}

fn dense_route(sample: &Sample, limit: Option<usize>) -> Result<Spectrum> {
    let n = sample.len() as f64;
    let z = &sample.latent;
    let sqrt_w = sample.weights.map(f64::sqrt);
    let sigma = z.tr_mul(z) / n;
    match &sample.map {
        None => {
            let h = DMatrix::from_fn(sigma.nrows(), sigma.ncols(), |r, c| {
                sqrt_w[r] * sigma[(r, c)] * sqrt_w[c]
            });
            let (values, u) = sorted_eigen((&h + h.transpose()) * 0.5)?;
            let rank = positive_count(&values);
            let keep = limit.map_or(rank, |l| l.min(rank));
            let u = u.columns(0, keep).into_owned();
            let mut states = u.clone();
            for (r, s) in sqrt_w.iter().enumerate() {
                states.row_mut(r).scale_mut(1.0 / s);
            }
            let mut zd = z.clone();
            for (c, s) in sqrt_w.iter().enumerate() {
                zd.column_mut(c).scale_mut(*s);
            }
            let scores = zd * u;
            Ok((values[..rank].to_vec(), states, scores))
        }
        Some(a) => {
            let mut b = a.clone();
            for (r, s) in sqrt_w.iter().enumerate() {
                b.row_mut(r).scale_mut(*s);
            }
            let qr = b.qr();
            let q = qr.q();
            let r = qr.r();
            let h = &r * sigma * r.transpose();
            let (values, v) = sorted_eigen((&h + h.transpose()) * 0.5)?;
            let rank = positive_count(&values);
            let keep = limit.map_or(rank, |l| l.min(rank));
            let v = v.columns(0, keep).into_owned();
            let mut states = &q * &v;
            for (row, s) in sqrt_w.iter().enumerate() {
                states.row_mut(row).scale_mut(1.0 / s);
            }
            let scores = z * (r.transpose() * v);
            Ok((values[..rank].to_vec(), states, scores))
        }
    }
}

/// Truncation rules `k_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TruncationRule {
    /// `[ln n]`
    #[serde(rename = "log_n")]
    LogN,
    /// `[log2 sqrt(n)]`
    #[serde(rename = "log2_sqrt")]
    Log2Sqrt,
    /// `[ln n^{5/2}]`
    #[serde(rename = "ln_n_5_2")]
    LnN52,
}

impl TruncationRule {
    pub fn name(&self) -> &'static str {
        match self {
            TruncationRule::LogN => "log_n",
            TruncationRule::Log2Sqrt => "log2_sqrt",
            TruncationRule::LnN52 => "ln_n_5_2",
        }
    }
}

impl std::str::FromStr for TruncationRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log_n" => Ok(TruncationRule::LogN),
            "log2_sqrt" => Ok(TruncationRule::Log2Sqrt),
            "ln_n_5_2" => Ok(TruncationRule::LnN52),
            other => Err(Error::Config(format!(
                "unknown truncation rule '{other}' (expected log_n, log2_sqrt or ln_n_5_2)"
            ))),
        }
    }
}

impl std::fmt::Display for TruncationRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Integer part of the rule's value, never below 1.
pub fn truncation_level(n: usize, rule: TruncationRule) -> usize {
    let n = n.max(1) as f64;
    let v = match rule {
        TruncationRule::LogN => n.ln(),
        TruncationRule::Log2Sqrt => 0.5 * n.log2(),
        TruncationRule::LnN52 => 2.5 * n.ln(),
    };
    (v.floor() as usize).max(1)
}

/// `rho~_{k_n}` stored against the first `k` empirical eigenstates.
#[derive(Debug, Clone)]
pub struct EstimatedOperator {
    k: usize,
    coefficients: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    eigenstates: DMatrix<f64>,
    weights: DVector<f64>,
    lift: DMatrix<f64>,
    curves: Option<Vec<ExtendedState>>,
}

impl EstimatedOperator {
    pub fn k(&self) -> usize {
        self.k
    }

    /// `coefficients[(j, l)] = <D_n phi_j, phi_l> / C_{n,j}`.
    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coefficients
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenstates(&self) -> &DMatrix<f64> {
        &self.eigenstates
    }

    // output coordinates t_l = sum_j <x, phi_j> B_jl
    fn output_scores(&self, x: &DVector<f64>) -> DVector<f64> {
        let s = self.eigenstates.tr_mul(&x.component_mul(&self.weights));
        self.coefficients.tr_mul(&s)
    }

    /// `rho~(x)` in wavelet coordinates.
    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.weights.len() {
            return Err(Error::Dimension(format!(
                "state has {} coordinates, operator expects {}",
                x.len(),
                self.weights.len()
            )));
        }
        Ok(&self.eigenstates * self.output_scores(x))
    }

    /// The operator as a `d x d` matrix on wavelet coordinates.
    pub fn matrix(&self) -> DMatrix<f64> {
        let mut wphi = self.eigenstates.clone();
        for (r, w) in self.weights.iter().enumerate() {
            wphi.row_mut(r).scale_mut(*w);
        }
        &self.eigenstates * self.coefficients.transpose() * wphi.transpose()
    }
}

pub fn estimate_rho(sample: &Sample, k_n: usize, route: Route) -> Result<EstimatedOperator> {
    sample.check_min_len(2)?;
    if k_n < 1 {
        return Err(Error::Truncation("k_n must be at least 1".into()));
    }
    let eig = eigendecompose_limited(sample, route, Some(k_n))?;
    estimate_from_eigensystem(sample, &eig, k_n)
}

/// The estimator on a precomputed eigensystem of the same sample.
pub fn estimate_from_eigensystem(
    sample: &Sample,
    eig: &EmpiricalEigenSystem,
    k_n: usize,
) -> Result<EstimatedOperator> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::Dimension("the estimator needs at least two states".into()));
    }
    if k_n > eig.stored() {
        return Err(Error::Truncation(format!(
            "C_(n,{k_n}) is not positive: only {} empirical eigenvalues are positive; use k_n <= {}",
            eig.rank(),
            eig.rank()
        )));
    }
    let s = eig.scores().columns(0, k_n);
    let head = s.rows(0, n - 1);
    let tail = s.rows(1, n - 1);
    let mut b = head.tr_mul(&tail) / (n - 1) as f64;
    for j in 0..k_n {
        b.row_mut(j).scale_mut(1.0 / eig.eigenvalues()[j]);
    }
    Ok(EstimatedOperator {
        k: k_n,
        coefficients: b,
        eigenvalues: eig.eigenvalues()[..k_n].to_vec(),
        eigenstates: eig.eigenstates().columns(0, k_n).into_owned(),
        weights: sample.weights().clone(),
        lift: eig.lift_weights().columns(0, k_n).into_owned(),
        curves: sample.curves.clone(),
    })
}

/// `rho~(x)` as an extended state on the sample grid.
pub fn predict_next(
    op: &EstimatedOperator,
    x: &ExtendedState,
    basis: &WaveletBasis,
) -> Result<ExtendedState> {
    let curves = op.curves.as_ref().ok_or_else(|| {
        Error::Domain("operator was estimated without sample curves; use apply on coefficients".into())
    })?;
    if x.grid() != curves[0].grid() || x.len() != curves[0].len() {
        return Err(Error::Dimension(
            "state does not live on the grid of the estimation sample".into(),
        ));
    }
    let coeffs = DVector::from_vec(x.coefficients(basis)?);
    if coeffs.len() != op.weights.len() {
        return Err(Error::Dimension("basis does not match the estimation sample".into()));
    }
    let t = op.output_scores(&coeffs);
    let alpha = &op.lift * t;
    combine(curves, alpha.iter().copied())
}

/// `a_1 = 2 sqrt 2 / (C_1 - C_2)`,
/// `a_j = 2 sqrt 2 max(1/(C_{j-1} - C_j), 1/(C_j - C_{j+1}))`.
pub fn spectral_gap_coefficients(eigenvalues: &[f64], k: usize) -> Result<Vec<f64>> {
    if k < 1 {
        return Err(Error::Truncation("k must be at least 1".into()));
    }
    if eigenvalues.len() < k + 1 {
        return Err(Error::Dimension(format!(
            "spectral gaps up to k = {k} need {} eigenvalues, got {}",
            k + 1,
            eigenvalues.len()
        )));
    }
    let c = eigenvalues;
    let mut gaps = Vec::with_capacity(k);
    for j in 0..k {
        let g = c[j] - c[j + 1];
        if !(g > GAP_TOLERANCE) {
            return Err(Error::DegenerateGap(format!(
                "eigenvalues {} and {} are not strictly decreasing (gap {g:e})",
                j + 1,
                j + 2
            )));
        }
        gaps.push(g);
    }
    let r = 2.0 * std::f64::consts::SQRT_2;
    Ok((0..k)
        .map(|j| {
            if j == 0 {
                r / gaps[0]
            } else {
                r * (1.0 / gaps[j - 1]).max(1.0 / gaps[j])
            }
        })
        .collect())
}

// C_k^{-1} k sum a_j
fn gap_scale(eigenvalues: &[f64], k: usize) -> Result<f64> {
    let a = spectral_gap_coefficients(eigenvalues, k)?;
    let ck = eigenvalues[k - 1];
    if !(ck > 0.0) {
        return Err(Error::Truncation(format!("C_{k} must be positive, got {ck}")));
    }
    Ok(k as f64 * a.iter().sum::<f64>() / ck)
}

/// `k C_k^{-1} sum_{j<=k} a_j / sqrt(n / ln n)`.
pub fn consistency_ratio(eigenvalues: &[f64], n: usize, k: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain("n must be at least 2".into()));
    }
    let nf = n as f64;
    Ok(gap_scale(eigenvalues, k)? / (nf / nf.ln()).sqrt())
}

/// `ln` of [`error_upper_bound`]; finite where the bound itself underflows.
pub fn log_error_upper_bound(x0_norm: f64, eigenvalues: &[f64], n: usize, k: usize) -> Result<f64> {
    if !(x0_norm >= 0.0) {
        return Err(Error::Domain(format!("norm must be nonnegative, got {x0_norm}")));
    }
    let s = gap_scale(eigenvalues, k)?;
    Ok(x0_norm.ln() - n as f64 / (s * s))
}

/// `M exp(-n / (C_k^{-2} k^2 (sum_{j<=k} a_j)^2))`.
pub fn error_upper_bound(x0_norm: f64, eigenvalues: &[f64], n: usize, k: usize) -> Result<f64> {
    if !(x0_norm >= 0.0) {
        return Err(Error::Domain(format!("norm must be nonnegative, got {x0_norm}")));
    }
    let s = gap_scale(eigenvalues, k)?;
    Ok(x0_norm * (-(n as f64) / (s * s)).exp())
}

/// Unit-sup-norm probes, uniform per coordinate then rescaled.
pub fn sup_normalized_probes(dim: usize, probes: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = DMatrix::zeros(dim, probes);
    for c in 0..probes {
        for r in 0..dim {
            p[(r, c)] = rng.random_range(-1.0..=1.0);
        }
        let m = p.column(c).amax();
        if m > 0.0 {
            p.column_mut(c).scale_mut(1.0 / m);
        }
    }
    p
}

/// `L_k = max_probes || A x - sum_{j<=k} <A x, phi_j> phi_j ||_B` for each
/// `k` in `ks`, with one common probe set.
pub fn assumption_a3_series(
    op: &DMatrix<f64>,
    eig: &EmpiricalEigenSystem,
    ks: &[usize],
    probes: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let d = eig.weights().len();
    if op.nrows() != d || op.ncols() != d {
        return Err(Error::Dimension(format!(
            "operator is {}x{}, eigenstates have {d} coordinates",
            op.nrows(),
            op.ncols()
        )));
    }
    if let Some(&k) = ks.iter().find(|&&k| k > eig.stored()) {
        return Err(Error::Truncation(format!(
            "L_{k} needs {k} eigenstates, only {} available",
            eig.stored()
        )));
    }
    let x = sup_normalized_probes(d, probes, seed);
    let y = op * x;
    let proj = eig.eigenstates().tr_mul(&DMatrix::from_fn(d, probes, |r, c| {
        y[(r, c)] * eig.weights()[r]
    }));
    let mut out = Vec::with_capacity(ks.len());
    for &k in ks {
        let fit = eig.eigenstates().columns(0, k) * proj.rows(0, k);
        out.push((&y - fit).amax());
    }
    Ok(out)
}

/// Same probes as [`assumption_a3_series`], residual measured in the
/// weighted norm the eigenstates are orthonormal in; non-increasing in `k`.
pub fn assumption_a3_weighted_series(
    op: &DMatrix<f64>,
    eig: &EmpiricalEigenSystem,
    ks: &[usize],
    probes: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let d = eig.weights().len();
    if op.nrows() != d || op.ncols() != d {
        return Err(Error::Dimension(format!(
            "operator is {}x{}, eigenstates have {d} coordinates",
            op.nrows(),
            op.ncols()
        )));
    }
    if let Some(&k) = ks.iter().find(|&&k| k > eig.stored()) {
        return Err(Error::Truncation(format!(
            "L_{k} needs {k} eigenstates, only {} available",
            eig.stored()
        )));
    }
    let y = op * sup_normalized_probes(d, probes, seed);
    let w = eig.weights();
    let wy = DMatrix::from_fn(d, probes, |r, c| y[(r, c)] * w[r]);
    let proj = eig.eigenstates().tr_mul(&wy);
    // ||y - P_k y||^2 = ||y||^2 - sum_{j<=k} <y, phi_j>^2
    let total: Vec<f64> = (0..probes).map(|c| y.column(c).dot(&wy.column(c))).collect();
    Ok(ks
        .iter()
        .map(|&k| {
            (0..probes)
                .map(|c| {
                    let captured: f64 = (0..k).map(|j| proj[(j, c)].powi(2)).sum();
                    (total[c] - captured).max(0.0).sqrt()
                })
                .fold(0.0f64, f64::max)
        })
        .collect())
}

pub fn assumption_a3_proxy(
    op: &DMatrix<f64>,
    eig: &EmpiricalEigenSystem,
    k: usize,
    probes: usize,
    seed: u64,
) -> Result<f64> {
    Ok(assumption_a3_series(op, eig, &[k], probes, seed)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn weights(d: usize) -> DVector<f64> {
        DVector::from_fn(d, |i, _| 0.5 + 0.25 * (i % 3) as f64)
    }

    /// rows confined to span{e_0.., e_{r-1}} mixed by a fixed matrix
    fn confined_sample(n: usize, d: usize, r: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = DMatrix::from_fn(r, d, |_, _| rng.random_range(-1.0..1.0));
        let z = DMatrix::from_fn(n, r, |_, _| rng.random_range(-1.0..1.0));
        z * basis
    }

    #[test]
    fn truncation_rule_values() {
        assert_eq!(truncation_level(1500, TruncationRule::LogN), 7);
        assert_eq!(truncation_level(48, TruncationRule::Log2Sqrt), 2);
        assert_eq!(truncation_level(48, TruncationRule::LnN52), 9);
        assert_eq!(truncation_level(2, TruncationRule::LogN), 1);
        assert_eq!("log2_sqrt".parse::<TruncationRule>().unwrap(), TruncationRule::Log2Sqrt);
        assert!("ln".parse::<TruncationRule>().is_err());
    }

    #[test]
    fn gap_coefficients_on_fabricated_spectrum() {
        let a = spectral_gap_coefficients(&[4.0, 2.0, 1.0], 2).unwrap();
        assert_abs_diff_eq!(a[0], 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(a[1], 2.0 * 2f64.sqrt(), epsilon = 1e-15);
        assert!(matches!(
            spectral_gap_coefficients(&[2.0, 2.0, 1.0], 1),
            Err(Error::DegenerateGap(_))
        ));
    }

    #[test]
    fn ratio_and_bound_on_fabricated_spectrum() {
        let ev = [4.0, 2.0, 1.0];
        // 2 * (1/2) * 3 sqrt 2 / sqrt(100 / ln 100)
        let expected = 3.0 * 2f64.sqrt() / (100.0 / 100f64.ln()).sqrt();
        assert_abs_diff_eq!(consistency_ratio(&ev, 100, 2).unwrap(), expected, epsilon = 1e-14);
        let r1 = consistency_ratio(&ev, 100, 1).unwrap();
        assert_abs_diff_eq!(r1, 2f64.sqrt() / 4.0 / (100.0 / 100f64.ln()).sqrt(), epsilon = 1e-15);
        // exp(-100 / ((1/16) * 2)) = exp(-800)
        assert_abs_diff_eq!(log_error_upper_bound(1.0, &ev, 100, 1).unwrap(), -800.0, epsilon = 1e-10);
        assert_eq!(error_upper_bound(1.0, &ev, 100, 1).unwrap(), (-800.0f64).exp());
        assert_eq!(error_upper_bound(0.0, &ev, 100, 1).unwrap(), 0.0);
        let b1 = error_upper_bound(1.0, &ev, 1, 1).unwrap();
        let b2 = error_upper_bound(1.0, &ev, 2, 1).unwrap();
        assert!(b2 < b1);
    }

    #[test]
    fn rank_one_sample() {
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let w = weights(4);
        let rows = DMatrix::from_fn(5, 4, |_, c| x[c]);
        let s = Sample::from_coefficients(rows, w.clone()).unwrap();
        let norm2: f64 = x.iter().zip(w.iter()).map(|(a, b)| a * a * b).sum();
        for route in [Route::Gram, Route::Dense] {
            let e = eigendecompose(&s, route).unwrap();
            assert_eq!(e.rank(), 1);
            assert_abs_diff_eq!(e.eigenvalue(1), norm2, epsilon = 1e-12);
            assert_eq!(e.eigenvalue(2), 0.0);
            let phi = e.eigenstates().column(0);
            let ratio = phi[3] / x[3];
            for c in 0..4 {
                assert_abs_diff_eq!(phi[c], ratio * x[c], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn orthogonal_two_state_sample() {
        // ext norms^2 of 4 and 1 with n = 2 -> eigenvalues 2 and 0.5
        let w = DVector::from_vec(vec![1.0, 1.0]);
        let rows = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let s = Sample::from_coefficients(rows, w).unwrap();
        let e = eigendecompose(&s, Route::Gram).unwrap();
        assert_abs_diff_eq!(e.eigenvalue(1), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.eigenvalue(2), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn zero_sample_has_no_spectrum() {
        let s = Sample::from_coefficients(DMatrix::zeros(4, 3), weights(3)).unwrap();
        let g = empirical_autocovariance(&s).unwrap();
        assert!(g.gram().iter().all(|v| *v == 0.0));
        assert_eq!(eigendecompose(&s, Route::Gram).unwrap().rank(), 0);
        assert!(matches!(estimate_rho(&s, 1, Route::Auto), Err(Error::Truncation(_))));
    }

    #[test]
    fn cross_covariance_of_two_equal_states() {
        let x = DVector::from_vec(vec![1.0, 2.0, -1.0]);
        let w = weights(3);
        let rows = DMatrix::from_fn(2, 3, |_, c| x[c]);
        let s = Sample::from_coefficients(rows, w.clone()).unwrap();
        let d = empirical_cross_covariance(&s).unwrap();
        let f = DVector::from_vec(vec![0.3, -0.1, 2.0]);
        // (x ⊗ x)(f) = <x, f> x
        let expect = &x * s.inner(&x, &f);
        let got = d.apply(&f);
        for c in 0..3 {
            assert_abs_diff_eq!(got[c], expect[c], epsilon = 1e-14);
        }
        assert_abs_diff_eq!(d.lagged()[(0, 0)], s.inner(&x, &x), epsilon = 1e-14);
    }

    #[test]
    fn trace_identity() {
        let rows = confined_sample(12, 6, 6, 3);
        let s = Sample::from_coefficients(rows.clone(), weights(6)).unwrap();
        let e = eigendecompose(&s, Route::Gram).unwrap();
        let tr: f64 = (0..12)
            .map(|i| {
                let x = rows.row(i).transpose();
                s.inner(&x, &x)
            })
            .sum::<f64>()
            / 12.0;
        assert_abs_diff_eq!(e.eigenvalues().iter().sum::<f64>(), tr, epsilon = 1e-10);
    }

    #[test]
    fn eigenstates_are_orthonormal() {
        let rows = confined_sample(30, 8, 5, 9);
        let s = Sample::from_coefficients(rows, weights(8)).unwrap();
        for route in [Route::Gram, Route::Dense] {
            let e = eigendecompose(&s, route).unwrap();
            assert_eq!(e.rank(), 5);
            for j in 0..5 {
                for l in 0..5 {
                    let v = s.inner(&e.eigenstates().column(j).into_owned(), &e.eigenstates().column(l).into_owned());
                    assert_abs_diff_eq!(v, if j == l { 1.0 } else { 0.0 }, epsilon = 1e-10);
                }
            }
        }
    }

    /// x_{i+1} = c x_i along one direction; the estimator gives
    /// c * (n/(n-1)) * S_{n-1}/S_n with S_m = sum_{i<m} c^{2i}.
    #[test]
    fn geometric_sequence_coefficient() {
        let c = 0.5f64;
        let n = 10;
        let x = DVector::from_vec(vec![1.0, 0.5, -2.0]);
        let rows = DMatrix::from_fn(n, 3, |i, col| c.powi(i as i32) * x[col]);
        let s = Sample::from_coefficients(rows, weights(3)).unwrap();
        let op = estimate_rho(&s, 1, Route::Gram).unwrap();
        let sum = |m: usize| (0..m).map(|i| c.powi(2 * i as i32)).sum::<f64>();
        let expected = c * (n as f64 / (n - 1) as f64) * sum(n - 1) / sum(n);
        assert_abs_diff_eq!(op.coefficients()[(0, 0)], expected, epsilon = 1e-12);
        // prediction is the same multiple of x
        let p = op.apply(&x).unwrap();
        for col in 0..3 {
            assert_abs_diff_eq!(p[col], expected * x[col], epsilon = 1e-12);
        }
        // large n: the ratio tends to c
        let n = 4000;
        let c = 0.999f64;
        let rows = DMatrix::from_fn(n, 3, |i, col| c.powi(i as i32) * x[col]);
        let s = Sample::from_coefficients(rows, weights(3)).unwrap();
        let op = estimate_rho(&s, 1, Route::Dense).unwrap();
        assert!((op.coefficients()[(0, 0)] - c).abs() < 1e-3);
    }

    /// Dense brute force: form C and D as d x d matrices acting on
    /// coordinates, take their eigenvectors in the weighted geometry and
    /// apply the componentwise formula literally.
    fn brute_force(rows: &DMatrix<f64>, w: &DVector<f64>, k: usize) -> DMatrix<f64> {
        let (n, d) = rows.shape();
        let wm = DMatrix::from_diagonal(w);
        // C f = (1/n) sum_i <X_i, f>_W X_i  =>  C = (1/n) X^T X W
        let c = rows.transpose() * rows * &wm / n as f64;
        let mut dm = DMatrix::zeros(d, d);
        for i in 0..n - 1 {
            let xi = rows.row(i).transpose();
            let xn = rows.row(i + 1).transpose();
            dm += &xn * (xi.transpose() * &wm);
        }
        dm /= (n - 1) as f64;
        let sq = w.map(f64::sqrt);
        let sym = DMatrix::from_diagonal(&sq) * &c * DMatrix::from_diagonal(&sq.map(|v| 1.0 / v));
        let sym = (&sym + sym.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let mut idx: Vec<usize> = (0..d).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut out = DMatrix::zeros(d, d);
        for &j in idx.iter().take(k) {
            let lj = eig.eigenvalues[j];
            let phi_j = eig.eigenvectors.column(j).component_div(&sq);
            for &l in idx.iter().take(k) {
                let phi_l = eig.eigenvectors.column(l).component_div(&sq);
                let dphi = &dm * &phi_j;
                let b = (dphi.transpose() * &wm * &phi_l)[(0, 0)] / lj;
                // x -> <x, phi_j> b phi_l
                out += &phi_l * (phi_j.transpose() * &wm) * b;
            }
        }
        out
    }

    #[test]
    fn estimator_matches_brute_force_on_confined_samples() {
        for seed in 0..10 {
            let rows = confined_sample(20, 7, 3, seed);
            let w = weights(7);
            let s = Sample::from_coefficients(rows.clone(), w.clone()).unwrap();
            let oracle = brute_force(&rows, &w, 3);
            for route in [Route::Gram, Route::Dense] {
                let op = estimate_rho(&s, 3, route).unwrap();
                let diff = (op.matrix() - &oracle).amax();
                assert!(diff < 1e-10, "seed {seed} {route:?}: {diff}");
            }
        }
    }

    #[test]
    fn factored_sample_agrees_with_explicit_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let map = DMatrix::from_fn(9, 4, |_, _| rng.random_range(-1.0..1.0));
        let z = DMatrix::from_fn(40, 4, |_, _| rng.random_range(-1.0..1.0));
        let w = weights(9);
        let explicit = Sample::from_coefficients(&z * map.transpose(), w.clone()).unwrap();
        let factored = Sample::factored(z, map, w).unwrap();
        let a = estimate_rho(&explicit, 3, Route::Dense).unwrap().matrix();
        for route in [Route::Gram, Route::Dense] {
            let b = estimate_rho(&factored, 3, route).unwrap().matrix();
            assert!((&a - b).amax() < 1e-10);
        }
        let e1 = eigendecompose(&explicit, Route::Gram).unwrap();
        let e2 = eigendecompose(&factored, Route::Dense).unwrap();
        assert_eq!(e1.rank(), 4);
        for (x, y) in e1.eigenvalues().iter().zip(e2.eigenvalues()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
        assert!((e1.eigenstates() - e2.eigenstates()).amax() < 1e-8);
    }

    #[test]
    fn white_noise_coefficients_shrink() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 20000;
        let rows = DMatrix::from_fn(n, 3, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let s = Sample::from_coefficients(rows, DVector::repeat(3, 1.0)).unwrap();
        let op = estimate_rho(&s, 3, Route::Dense).unwrap();
        assert!(op.coefficients().amax() < 0.05);
        let d = empirical_cross_covariance(&s).unwrap();
        let e = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        assert!(d.pair(&e, &e).abs() < 0.05);
    }

    #[test]
    fn too_large_truncation_is_reported() {
        let rows = confined_sample(20, 6, 2, 4);
        let s = Sample::from_coefficients(rows, weights(6)).unwrap();
        let err = estimate_rho(&s, 3, Route::Auto).unwrap_err();
        assert!(matches!(err, Error::Truncation(_)));
    }

    #[test]
    fn a3_proxy_limits() {
        let rows = confined_sample(30, 5, 5, 8);
        let s = Sample::from_coefficients(rows, weights(5)).unwrap();
        let e = eigendecompose(&s, Route::Dense).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DMatrix::from_fn(5, 5, |_, _| rng.random_range(-0.5..0.5));
        let full = assumption_a3_proxy(&a, &e, 5, 50, 1).unwrap();
        assert!(full < 1e-10);
        let none = assumption_a3_proxy(&a, &e, 0, 50, 1).unwrap();
        let probes = sup_normalized_probes(5, 50, 1);
        assert_abs_diff_eq!(none, (&a * probes).amax(), epsilon = 1e-15);
        assert!(assumption_a3_proxy(&a, &e, 6, 10, 1).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn gram_trick_matches_dense_spectrum(seed in 0u64..10_000, n in 3usize..40, r in 1usize..6) {
            let d = 8;
            let rows = confined_sample(n, d, r, seed);
            let w = weights(d);
            let s = Sample::from_coefficients(rows.clone(), w.clone()).unwrap();
            let g = eigendecompose(&s, Route::Gram).unwrap();
            let dense = eigendecompose(&s, Route::Dense).unwrap();
            // independent oracle: eigenvalues of W^{1/2} (X^T X / n) W^{1/2}
            let sq = DMatrix::from_diagonal(&w.map(f64::sqrt));
            let cov = &sq * rows.transpose() * &rows * &sq / n as f64;
            let mut oracle: Vec<f64> = SymmetricEigen::new((&cov + cov.transpose()) * 0.5).eigenvalues.iter().copied().collect();
            oracle.sort_by(|a, b| b.total_cmp(a));
            prop_assert_eq!(g.rank(), dense.rank());
            for j in 0..g.rank() {
                prop_assert!((g.eigenvalues()[j] - oracle[j]).abs() < 1e-8);
                prop_assert!((dense.eigenvalues()[j] - oracle[j]).abs() < 1e-8);
            }
        }

        #[test]
        fn weighted_residual_is_non_increasing(seed in 0u64..1000, r in 1usize..6) {
            let d = 6;
            let rows = confined_sample(40, d, r, seed);
            let s = Sample::from_coefficients(rows, weights(d)).unwrap();
            let e = eigendecompose(&s, Route::Auto).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a);
            let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-0.5..0.5));
            let ks: Vec<usize> = (0..=e.stored()).collect();
            let l = assumption_a3_weighted_series(&a, &e, &ks, 30, seed).unwrap();
            for pair in l.windows(2) {
                prop_assert!(pair[1] <= pair[0] * (1.0 + 1e-12) + 1e-14);
            }
        }

        #[test]
        fn prediction_is_linear(seed in 0u64..1000, a in -3.0f64..3.0) {
            let rows = confined_sample(25, 6, 4, seed);
            let s = Sample::from_coefficients(rows, weights(6)).unwrap();
            let op = estimate_rho(&s, 3, Route::Auto).unwrap();
            let x = DVector::from_fn(6, |i, _| (i as f64 * 0.7 + seed as f64).sin());
            let px = op.apply(&x).unwrap();
            let pax = op.apply(&(&x * a)).unwrap();
            prop_assert!((pax - px * a).amax() < 1e-10);
            prop_assert!(op.apply(&DVector::zeros(6)).unwrap().amax() == 0.0);
        }

        #[test]
        fn bounds_are_deterministic(c1 in 2.0f64..5.0, c2 in 1.0f64..1.9, c3 in 0.1f64..0.9, n in 10usize..100_000) {
            let ev = [c1, c2, c3];
            let a = error_upper_bound(1.5, &ev, n, 2).unwrap();
            let b = error_upper_bound(1.5, &ev, n, 2).unwrap();
            prop_assert_eq!(a.to_bits(), b.to_bits());
            let r1 = consistency_ratio(&ev, n, 2).unwrap();
            let r2 = consistency_ratio(&ev, n, 2).unwrap();
            prop_assert_eq!(r1.to_bits(), r2.to_bits());
        }
    }
}
