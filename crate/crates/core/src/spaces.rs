//! Besov and Sobolev norms on wavelet coefficients, and their product-space
//! versions on extended states `(X_n, Z_{n+1,1}, .., Z_{n+1,b})`.
//!
//! Norm conventions on a decomposition `f = (alpha_J, beta_J, .., beta_K)`:
//!
//! * `B = B^0_{inf,inf}`: `max |coefficient|`
//! * `B* = B^0_{1,1}`: `sum |coefficient|`
//! * `H~ = B^{-beta}_{2,2}`: level `j` weighted by `2^{-2 j beta}`, the alpha
//!   block by `2^{-2 J beta}`
//! * `H^gamma_2 = B^gamma_{2,2}`: level weight `2^{2 j gamma}`

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, SampledCurve};
use crate::mra::{WaveletBasis, WaveletDecomposition};

/// Smoothness indices of the function-space scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceParams {
    beta: f64,
    gamma: Vec<f64>,
}

/// How the RKHS indices `gamma_1..gamma_{b+1}` are generated from `beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaFamily {
    /// `gamma_i = 2 beta + i/10`
    Gamma1,
    /// `gamma_i = 2 beta + log10(i + 1)`
    Gamma2,
    /// `gamma_i = 2 beta + epsilon` for every component.
    Uniform { epsilon: f64 },
    Explicit(Vec<f64>),
}

impl GammaFamily {
    pub fn values(&self, beta: f64, b: usize) -> Result<Vec<f64>> {
        let n = b + 1;
        Ok(match self {
            GammaFamily::Gamma1 => (1..=n).map(|i| 2.0 * beta + i as f64 / 10.0).collect(),
            GammaFamily::Gamma2 => (1..=n)
                .map(|i| 2.0 * beta + ((i + 1) as f64).log10())
                .collect(),
            GammaFamily::Uniform { epsilon } => vec![2.0 * beta + epsilon; n],
            GammaFamily::Explicit(v) => {
                if v.len() != n {
                    return Err(Error::Config(format!(
                        "explicit gamma has {} entries, expected b + 1 = {n}",
                        v.len()
                    )));
                }
                v.clone()
            }
        })
    }

    pub fn label(&self) -> String {
        match self {
            GammaFamily::Gamma1 => "gamma1".into(),
            GammaFamily::Gamma2 => "gamma2".into(),
            GammaFamily::Uniform { epsilon } => format!("uniform({epsilon})"),
            GammaFamily::Explicit(_) => "explicit".into(),
        }
    }
}

impl SpaceParams {
    pub fn new(beta: f64, gamma: Vec<f64>) -> Result<Self> {
        Self::check(beta, &gamma)?;
        Ok(Self { beta, gamma })
    }

    pub fn from_family(beta: f64, family: &GammaFamily, b: usize) -> Result<Self> {
        Self::new(beta, family.values(beta, b)?)
    }

    /// Every violated invariant, as human-readable messages.
    pub fn violations(beta: f64, gamma: &[f64]) -> Vec<String> {
        let mut out = Vec::new();
        if !(beta > 0.5) {
            out.push(format!("beta must exceed 1/2 (got {beta})"));
        }
        if gamma.is_empty() {
            out.push("gamma must have b + 1 >= 1 entries".into());
        }
        for (i, g) in gamma.iter().enumerate() {
            if !(*g > 2.0 * beta) {
                out.push(format!(
                    "gamma[{}] = {g} must exceed 2 beta = {}",
                    i + 1,
                    2.0 * beta
                ));
            }
        }
        out
    }

    fn check(beta: f64, gamma: &[f64]) -> Result<()> {
        match Self::violations(beta, gamma).into_iter().next() {
            Some(msg) => Err(Error::Config(msg)),
            None => Ok(()),
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// Number of exogenous components.
    pub fn b(&self) -> usize {
        self.gamma.len() - 1
    }
}

/// `X̄_n = (X_n, Z_{n+1,1}, .., Z_{n+1,b})` on one common grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedState {
    components: Vec<SampledCurve>,
}

impl ExtendedState {
    pub fn new(components: Vec<SampledCurve>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::Dimension("extended state needs at least one component".into()))?;
        let grid = first.grid();
        if components.iter().any(|c| c.grid() != grid) {
            return Err(Error::Dimension(
                "extended state components must share one grid".into(),
            ));
        }
        Ok(Self { components })
    }

    pub fn zeros(grid: Grid, b: usize) -> Self {
        Self {
            components: vec![SampledCurve::zeros(grid); b + 1],
        }
    }

    pub fn grid(&self) -> Grid {
        self.components[0].grid()
    }

    /// Number of exogenous components.
    pub fn b(&self) -> usize {
        self.components.len() - 1
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> &[SampledCurve] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &SampledCurve {
        &self.components[i]
    }

    pub fn into_components(self) -> Vec<SampledCurve> {
        self.components
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            components: self.components.iter().map(|c| c.scaled(a)).collect(),
        }
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &Self) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::Dimension(format!(
                "{} vs {} components",
                self.len(),
                other.len()
            )));
        }
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(x, y)| x.axpy(a, y))
            .collect::<Result<_>>()?;
        Ok(Self { components })
    }

    pub fn decompose(&self, basis: &WaveletBasis) -> Result<Vec<WaveletDecomposition>> {
        self.components.iter().map(|c| basis.decompose(c)).collect()
    }

    /// Concatenated flat wavelet coefficients of all components.
    pub fn coefficients(&self, basis: &WaveletBasis) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.len() * basis.coefficient_count());
        for c in &self.components {
            if c.grid() != basis.grid() {
                return Err(Error::Dimension(format!(
                    "state grid has {} points, basis grid {}",
                    c.grid().len(),
                    basis.grid().len()
                )));
            }
            out.extend(basis.analyze_values(c.values())?.iter());
        }
        Ok(out)
    }
}

fn check_shapes(f: &WaveletDecomposition, g: &WaveletDecomposition) -> Result<()> {
    if !f.same_shape(g) {
        return Err(Error::Dimension(format!(
            "decompositions with levels {}..{} and {}..{} are not comparable",
            f.primary_level(),
            f.last_level(),
            g.primary_level(),
            g.last_level()
        )));
    }
    Ok(())
}

pub fn b_sup_norm(f: &WaveletDecomposition) -> f64 {
    f.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn b_star_norm(f: &WaveletDecomposition) -> f64 {
    f.iter().map(f64::abs).sum()
}

/// Per-coefficient `H~` weights in flat layout.
pub fn htilde_weights(primary_level: u32, last_level: u32, beta: f64) -> Vec<f64> {
    level_weights(primary_level, last_level, |j| (-2.0 * j as f64 * beta).exp2())
}

/// Per-coefficient Sobolev weights `2^{2 j gamma}` in flat layout.
pub fn sobolev_weights(primary_level: u32, last_level: u32, gamma: f64) -> Vec<f64> {
    level_weights(primary_level, last_level, |j| (2.0 * j as f64 * gamma).exp2())
}

fn level_weights(primary_level: u32, last_level: u32, w: impl Fn(u32) -> f64) -> Vec<f64> {
    let mut out = vec![w(primary_level); 1 << primary_level];
    for j in primary_level..=last_level {
        out.extend(std::iter::repeat_n(w(j), 1 << j));
    }
    out
}

fn weighted(f: &WaveletDecomposition, g: &WaveletDecomposition, w: &[f64]) -> f64 {
    f.iter().zip(g.iter()).zip(w).map(|((a, b), w)| a * b * w).sum()
}

pub fn htilde_inner(f: &WaveletDecomposition, g: &WaveletDecomposition, beta: f64) -> Result<f64> {
    check_shapes(f, g)?;
    let w = htilde_weights(f.primary_level(), f.last_level(), beta);
    Ok(weighted(f, g, &w))
}

pub fn sobolev_norm(f: &WaveletDecomposition, gamma: f64) -> f64 {
    let w = sobolev_weights(f.primary_level(), f.last_level(), gamma);
    weighted(f, f, &w).sqrt()
}

/// `max_i ||x_i||_B` over the components of `x`.
pub fn ext_sup_norm(x: &ExtendedState, basis: &WaveletBasis) -> Result<f64> {
    let mut m: f64 = 0.0;
    for c in x.components() {
        m = m.max(b_sup_norm(&basis.decompose(c)?));
    }
    Ok(m)
}

/// `sum_i <x_i, y_i>_{H~}`.
pub fn ext_inner(
    x: &ExtendedState,
    y: &ExtendedState,
    basis: &WaveletBasis,
    beta: f64,
) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "{} vs {} components",
            x.len(),
            y.len()
        )));
    }
    let mut s = 0.0;
    for (a, b) in x.components().iter().zip(y.components()) {
        s += htilde_inner(&basis.decompose(a)?, &basis.decompose(b)?, beta)?;
    }
    Ok(s)
}

/// `H~` weights for `components` concatenated flat decompositions.
pub fn ext_htilde_weights(basis: &WaveletBasis, beta: f64, components: usize) -> Vec<f64> {
    let w = htilde_weights(basis.primary_level(), basis.last_level(), beta);
    let mut out = Vec::with_capacity(w.len() * components);
    for _ in 0..components {
        out.extend_from_slice(&w);
    }
    out
}

/// Sup norm of a concatenated flat coefficient vector.
pub fn flat_sup_norm(coeffs: &[f64]) -> f64 {
    coeffs.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn decomp(flat: &[f64]) -> WaveletDecomposition {
        WaveletDecomposition::from_flat(2, 3, flat).unwrap()
    }

    fn unit(i: usize) -> WaveletDecomposition {
        let mut v = vec![0.0; 16];
        v[i] = 1.0;
        decomp(&v)
    }

    #[test]
    fn sup_and_star_examples() {
        let zero = decomp(&[0.0; 16]);
        assert_eq!(b_sup_norm(&zero), 0.0);
        assert_eq!(b_star_norm(&zero), 0.0);
        let mut v = vec![0.0; 16];
        v[0] = 0.5;
        v[1] = -2.0;
        assert_eq!(b_sup_norm(&decomp(&v)), 2.0);
        let mut v = vec![0.0; 16];
        v[0] = 1.0;
        v[1] = 1.0;
        v[9] = -3.0;
        assert_eq!(b_star_norm(&decomp(&v)), 5.0);
    }

    #[test]
    fn htilde_alpha_weight() {
        let f = unit(0);
        let v = htilde_inner(&f, &f, 0.6).unwrap();
        // 2^{-2 * 2 * 0.6}
        assert!((v - 0.189_464_570_813_8).abs() < 1e-12, "{v}");
        assert_eq!(htilde_inner(&unit(0), &unit(5), 0.6).unwrap(), 0.0);
    }

    #[test]
    fn sobolev_level_three() {
        // beta_{3,0} sits after alpha (4) and beta_2 (4)
        let f = unit(8);
        let v = sobolev_norm(&f, 1.3);
        assert!((v - 3.9f64.exp2()).abs() < 1e-12);
        assert!((v - 14.928_527_864_6).abs() < 1e-9, "{v}");
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let g = WaveletDecomposition::zeros(2, 4);
        assert!(htilde_inner(&unit(0), &g, 0.6).is_err());
    }

    #[test]
    fn gamma_families() {
        let g1 = GammaFamily::Gamma1.values(0.6, 3).unwrap();
        for (a, b) in g1.iter().zip([1.3, 1.4, 1.5, 1.6]) {
            assert!((a - b).abs() < 1e-12);
        }
        let g2 = GammaFamily::Gamma2.values(0.6, 3).unwrap();
        assert!((g2[0] - (1.2 + 2f64.log10())).abs() < 1e-15);
        assert!(GammaFamily::Explicit(vec![2.0]).values(0.6, 3).is_err());
    }

    #[test]
    fn params_invariants() {
        let err = SpaceParams::new(0.4, vec![1.3]).unwrap_err();
        assert!(err.to_string().contains("beta must exceed 1/2"));
        assert!(SpaceParams::new(0.6, vec![1.3, 1.1]).is_err());
        assert_eq!(SpaceParams::from_family(0.6, &GammaFamily::Gamma1, 3).unwrap().b(), 3);
    }

    fn small_basis() -> WaveletBasis {
        crate::mra::build_basis(2, 8, 2, 3).unwrap()
    }

    #[test]
    fn extended_state_norms() {
        let basis = small_basis();
        let grid = basis.grid();
        let zero = ExtendedState::zeros(grid, 2);
        assert_eq!(ext_sup_norm(&zero, &basis).unwrap(), 0.0);

        let a = basis.father(0).scaled(2.0);
        let b = basis.mother(3, 1);
        let x = ExtendedState::new(vec![a.clone(), b.clone(), b.clone()]).unwrap();
        let y = ExtendedState::new(vec![b.clone(), a.clone(), b.clone()]).unwrap();
        let nx = ext_sup_norm(&x, &basis).unwrap();
        assert!((nx - 2.0).abs() < 1e-10);
        assert!((ext_sup_norm(&y, &basis).unwrap() - nx).abs() < 1e-12);

        assert!(ext_inner(&x, &zero, &basis, 0.6).unwrap().abs() < 1e-15);

        let f = basis.mother(2, 3);
        let same = ExtendedState::new(vec![f.clone(), f.clone(), f.clone()]).unwrap();
        let d = basis.decompose(&f).unwrap();
        let lhs = ext_inner(&same, &same, &basis, 0.6).unwrap();
        let rhs = 3.0 * htilde_inner(&d, &d, 0.6).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn single_component_sup_norm() {
        let basis = small_basis();
        let grid = basis.grid();
        let f = basis.father(2).axpy(-0.7, &basis.mother(3, 5)).unwrap();
        let x = ExtendedState::new(vec![SampledCurve::zeros(grid), f.clone()]).unwrap();
        let expected = b_sup_norm(&basis.decompose(&f).unwrap());
        assert_eq!(ext_sup_norm(&x, &basis).unwrap(), expected);
    }

    #[test]
    fn components_must_share_grid() {
        let a = SampledCurve::zeros(Grid::closed(5).unwrap());
        let b = SampledCurve::zeros(Grid::closed(6).unwrap());
        assert!(ExtendedState::new(vec![a, b]).is_err());
        assert!(ExtendedState::new(vec![]).is_err());
    }

    fn coeffs() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, 16)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn norm_axioms(a in coeffs(), b in coeffs(), s in -5.0f64..5.0) {
            let (f, g) = (decomp(&a), decomp(&b));
            let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let fg = decomp(&sum);
            let sf = f.scaled(s);
            let tol = 1e-9;

            for norm in [b_sup_norm as fn(&WaveletDecomposition) -> f64, b_star_norm] {
                prop_assert!(norm(&f) >= 0.0);
                prop_assert!((norm(&sf) - s.abs() * norm(&f)).abs() <= tol * (1.0 + norm(&f)));
                prop_assert!(norm(&fg) <= norm(&f) + norm(&g) + tol);
            }
            for gamma in [1.3, 2.0] {
                let n = |x: &WaveletDecomposition| sobolev_norm(x, gamma);
                prop_assert!(n(&f) >= 0.0);
                prop_assert!((n(&sf) - s.abs() * n(&f)).abs() <= tol * (1.0 + n(&f)));
                prop_assert!(n(&fg) <= n(&f) + n(&g) + tol * (1.0 + n(&f) + n(&g)));
            }
            let h = |x: &WaveletDecomposition| htilde_inner(x, x, 0.6).unwrap().sqrt();
            prop_assert!((h(&sf) - s.abs() * h(&f)).abs() <= tol * (1.0 + h(&f)));
            prop_assert!(h(&fg) <= h(&f) + h(&g) + tol);
            prop_assert!(b_sup_norm(&f) <= b_star_norm(&f));
        }

        #[test]
        fn cauchy_schwarz_and_symmetry(a in coeffs(), b in coeffs()) {
            let (f, g) = (decomp(&a), decomp(&b));
            let fg = htilde_inner(&f, &g, 0.6).unwrap();
            let gf = htilde_inner(&g, &f, 0.6).unwrap();
            prop_assert_eq!(fg, gf);
            let ff = htilde_inner(&f, &f, 0.6).unwrap();
            let gg = htilde_inner(&g, &g, 0.6).unwrap();
            prop_assert!(fg * fg <= ff * gg * (1.0 + 1e-12) + 1e-300);
        }

        #[test]
        fn weighted_embedding(a in coeffs()) {
            let f = decomp(&a);
            let total: f64 = htilde_weights(2, 3, 0.6).iter().sum();
            let lhs = htilde_inner(&f, &f, 0.6).unwrap().sqrt();
            prop_assert!(lhs <= total.sqrt() * b_sup_norm(&f) * (1.0 + 1e-12));
        }

        #[test]
        fn sobolev_is_monotone_in_gamma(a in coeffs(), g1 in 0.7f64..2.0, dg in 0.0f64..1.0) {
            let f = decomp(&a);
            prop_assert!(sobolev_norm(&f, g1) <= sobolev_norm(&f, g1 + dg) * (1.0 + 1e-12));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn ext_inner_is_bilinear(
            a in prop::collection::vec(-3.0f64..3.0, 32),
            b in prop::collection::vec(-3.0f64..3.0, 32),
            c in prop::collection::vec(-3.0f64..3.0, 32),
        ) {
            let basis = small_basis();
            let state = |v: &[f64]| {
                let comps = v
                    .chunks(16)
                    .map(|ch| basis.reconstruct(&decomp(ch)).unwrap())
                    .collect();
                ExtendedState::new(comps).unwrap()
            };
            let (x, y, z) = (state(&a), state(&b), state(&c));
            let yz = y.axpy(1.0, &z).unwrap();
            let lhs = ext_inner(&x, &yz, &basis, 0.6).unwrap();
            let rhs = ext_inner(&x, &y, &basis, 0.6).unwrap() + ext_inner(&x, &z, &basis, 0.6).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()));
        }
    }
}
