use std::path::Path;

use chrono::{Datelike, Days, Months, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::preprocess::{build_months, detrend_deseasonalize, impute_missing, retrend};
use super::{MonthlyFunctionalSample, StationSeries, POINTS_PER_MONTH};
use crate::error::{Error, Result};
use crate::estimator::{estimate_rho, predict_next, truncation_level, Route, Sample, TruncationRule};
use crate::experiments::write_records;
use crate::mra::{WaveletBasis, WaveletConfig};
use crate::spaces::{ext_sup_norm, ExtendedState, SpaceParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForecastConfig {
    /// Station CSV; the command line may supply it instead.
    pub station: Option<String>,
    pub rules: Vec<TruncationRule>,
    pub beta: f64,
    /// `gamma_i = 2 beta + epsilon` for every component.
    pub epsilon: f64,
    pub wavelet: WaveletConfig,
    pub points_per_month: usize,
    pub exogenous_lead: usize,
    pub route: Route,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            station: None,
            rules: vec![TruncationRule::Log2Sqrt, TruncationRule::LnN52],
            beta: 0.6,
            epsilon: 0.01,
            wavelet: WaveletConfig::default(),
            points_per_month: POINTS_PER_MONTH,
            exogenous_lead: 0,
            route: Route::Auto,
        }
    }
}

impl ForecastConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut out = SpaceParams::violations(self.beta, &[2.0 * self.beta + self.epsilon; 4]);
        if self.rules.is_empty() {
            out.push("rules is empty".into());
        }
        if self.points_per_month < 2 {
            out.push("points_per_month must be at least 2".into());
        }
        if self.exogenous_lead > 1 {
            out.push(format!("exogenous_lead must be 0 or 1 (got {})", self.exogenous_lead));
        }
        if let Err(e) = self.wavelet.validate() {
            out.push(e.to_string());
        }
        out
    }
}

/// All months as an estimator sample on `basis`.
pub fn extended_sample(sample: &MonthlyFunctionalSample, basis: &WaveletBasis, beta: f64) -> Result<Sample> {
    Sample::from_states(&sample.states, basis, beta)
}

fn check_loocv(sample: &Sample) -> Result<&[ExtendedState]> {
    let curves = sample
        .curves()
        .ok_or_else(|| Error::Domain("LOOCV needs a sample built from curves".into()))?;
    if sample.len() < 4 {
        return Err(Error::Domain(format!(
            "LOOCV needs at least four months, got {}",
            sample.len()
        )));
    }
    Ok(curves)
}

/// With months `0..=T`, drops month `h` from `0..T-1`, estimates on the
/// remaining `T - 2` months (in order) and predicts month `T` from `T - 1`.
pub fn loocv_predict(
    sample: &Sample,
    basis: &WaveletBasis,
    k_n: usize,
    h: usize,
    route: Route,
) -> Result<ExtendedState> {
    let curves = check_loocv(sample)?;
    let t = sample.len() - 1;
    if h >= t - 1 {
        return Err(Error::Domain(format!("holdout {h} outside 0..{}", t - 1)));
    }
    let keep: Vec<usize> = (0..t - 1).filter(|&i| i != h).collect();
    let fold = sample.select(&keep);
    let op = estimate_rho(&fold, k_n, route)?;
    predict_next(&op, &curves[t - 1], basis)
}

/// Mean over the folds of `||X_T - prediction_h||`.
pub fn cv_error(sample: &Sample, basis: &WaveletBasis, k_n: usize, route: Route) -> Result<f64> {
    let curves = check_loocv(sample)?;
    let t = sample.len() - 1;
    let target = &curves[t];
    let errors = (0..t - 1)
        .into_par_iter()
        .map(|h| {
            let p = loocv_predict(sample, basis, k_n, h, route)?;
            ext_sup_norm(&target.axpy(-1.0, &p)?, basis)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(errors.iter().sum::<f64>() / errors.len() as f64)
}

/// The same mean for the predictor that always returns zero.
pub fn zero_cv_error(sample: &Sample, basis: &WaveletBasis) -> Result<f64> {
    let curves = check_loocv(sample)?;
    ext_sup_norm(&curves[sample.len() - 1], basis)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub station: String,
    pub truncation_rule: String,
    #[serde(rename = "E")]
    pub e: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub date: String,
    pub predicted: f64,
    pub observed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastReport {
    pub station: String,
    /// One row per configured rule, then the zero predictor.
    pub errors: Vec<ErrorRow>,
    pub fold_truncation: Vec<(TruncationRule, usize)>,
    /// Rule used for `predictions`, with its `k_n` on the full sample.
    pub prediction_rule: TruncationRule,
    pub prediction_k: usize,
    pub predictions: Vec<PredictionRow>,
    pub months: usize,
    pub imputed: usize,
}

impl ForecastReport {
    pub fn error(&self, rule: &str) -> Option<f64> {
        self.errors.iter().find(|r| r.truncation_rule == rule).map(|r| r.e)
    }
}

fn point_date(first: NaiveDate, i: usize, points: usize) -> NaiveDate {
    let days = ((first + Months::new(1)) - first).num_days() as usize;
    let offset = (i as f64 * (days - 1) as f64 / (points - 1) as f64).round() as u64;
    first + Days::new(offset)
}

/// Imputation, monthly curves, detrending, LOOCV errors for every rule and
/// the plug-in forecast of the last month from the full training sample.
pub fn forecast_station(series: &StationSeries, config: &ForecastConfig) -> Result<ForecastReport> {
    if let Some(v) = config.violations().into_iter().next() {
        return Err(Error::Config(v));
    }
    let imputed = series.missing_count();
    let filled = impute_missing(series)?;
    let months = build_months(&filled, config.points_per_month, config.exogenous_lead)?;
    let detrended = detrend_deseasonalize(&months)?;
    let grid = detrended.grid();
    let basis = WaveletBasis::build(config.wavelet)?.resample(grid)?;
    let sample = extended_sample(&detrended, &basis, config.beta)?;
    let t = sample.len() - 1;
    let fold_n = t - 1;

    let mut errors = Vec::new();
    let mut fold_truncation = Vec::new();
    for rule in &config.rules {
        let k = truncation_level(fold_n, *rule);
        fold_truncation.push((*rule, k));
        let e = cv_error(&sample, &basis, k, config.route)?;
        log::info!("{}: rule {rule} k = {k} E = {e}", series.station_id);
        errors.push(ErrorRow {
            station: series.station_id.clone(),
            truncation_rule: rule.name().into(),
            e,
        });
    }
    errors.push(ErrorRow {
        station: series.station_id.clone(),
        truncation_rule: "zero".into(),
        e: zero_cv_error(&sample, &basis)?,
    });

    let rule = config.rules[0];
    let k = truncation_level(t, rule);
    let training: Vec<usize> = (0..t).collect();
    let op = estimate_rho(&sample.select(&training), k, config.route)?;
    let curves = sample.curves().expect("built from curves");
    let prediction = retrend(&predict_next(&op, &curves[t - 1], &basis)?, &detrended, t)?;
    let first = detrended.months[t];
    let observed = detrended.observed[t].component(0).values();
    let predictions = prediction
        .component(0)
        .values()
        .iter()
        .zip(observed)
        .enumerate()
        .map(|(i, (p, o))| PredictionRow {
            date: point_date(first, i, grid.len()).format("%Y-%m-%d").to_string(),
            predicted: *p,
            observed: *o,
        })
        .collect();
    debug_assert_eq!(first.day(), 1);
    Ok(ForecastReport {
        station: series.station_id.clone(),
        errors,
        fold_truncation,
        prediction_rule: rule,
        prediction_k: k,
        predictions,
        months: detrended.len(),
        imputed,
    })
}

pub fn write_predictions_csv(report: &ForecastReport, path: &Path) -> Result<()> {
    write_records(path, &report.predictions)
}

pub fn write_errors_csv(report: &ForecastReport, path: &Path) -> Result<()> {
    write_records(path, &report.errors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, SampledCurve};
    use nalgebra::DMatrix;

    fn small_basis(grid: Grid) -> WaveletBasis {
        WaveletBasis::build(WaveletConfig {
            order: 4,
            grid_levels: 9,
            primary_level: 2,
            last_level: 4,
        })
        .unwrap()
        .resample(grid)
        .unwrap()
    }

    fn constant_state(grid: Grid, shape: &[f64]) -> ExtendedState {
        ExtendedState::new(
            shape
                .iter()
                .map(|a| SampledCurve::from_fn(grid, |t| a * (1.0 + t)))
                .collect(),
        )
        .unwrap()
    }

    fn sample_of(states: Vec<ExtendedState>, basis: &WaveletBasis) -> Sample {
        Sample::from_states(&states, basis, 0.6).unwrap()
    }

    #[test]
    fn repeated_state_is_reproduced() {
        let grid = Grid::closed(31).unwrap();
        let basis = small_basis(grid);
        let mut x = constant_state(grid, &[1.0, 0.5, -0.2, 0.3, 0.1]);
        let s0 = sample_of(vec![x.clone()], &basis);
        let norm2 = s0.inner(&s0.state(0), &s0.state(0));
        x = x.scaled(1.0 / norm2.sqrt());
        let s = sample_of(vec![x.clone(); 51], &basis);
        assert!((s.inner(&s.state(0), &s.state(0)) - 1.0).abs() < 1e-12);
        for h in [0, 17, 48] {
            let p = loocv_predict(&s, &basis, 1, h, Route::Auto).unwrap();
            let diff = p.axpy(-1.0, &x).unwrap();
            let m = diff
                .components()
                .iter()
                .flat_map(|c| c.values().iter().copied())
                .fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(m < 1e-8, "{m}");
        }
        assert!(cv_error(&s, &basis, 1, Route::Auto).unwrap() < 1e-8);
    }

    #[test]
    fn zero_sample_predicts_zero_and_errors() {
        let grid = Grid::closed(31).unwrap();
        let basis = small_basis(grid);
        let s = sample_of(vec![ExtendedState::zeros(grid, 4); 10], &basis);
        assert!(matches!(
            loocv_predict(&s, &basis, 1, 0, Route::Auto),
            Err(Error::Truncation(_))
        ));
        assert_eq!(zero_cv_error(&s, &basis).unwrap(), 0.0);
    }

    fn ar_states(n: usize, seed: u64, grid: Grid) -> Vec<ExtendedState> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut level = [0.0f64; 5];
        (0..n)
            .map(|_| {
                for l in level.iter_mut() {
                    *l = 0.8 * *l + rng.random_range(-1.0..1.0);
                }
                ExtendedState::new(
                    level
                        .iter()
                        .enumerate()
                        .map(|(c, l)| SampledCurve::from_fn(grid, |t| l * (1.0 + (c as f64 + t).sin())))
                        .collect(),
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn holdout_month_does_not_matter() {
        let grid = Grid::closed(31).unwrap();
        let basis = small_basis(grid);
        let states = ar_states(20, 3, grid);
        let s = sample_of(states.clone(), &basis);
        for h in [0usize, 5, 17] {
            let a = loocv_predict(&s, &basis, 2, h, Route::Auto).unwrap();
            let mut perturbed = states.clone();
            perturbed[h] = perturbed[h].scaled(-3.0);
            let b = loocv_predict(&sample_of(perturbed, &basis), &basis, 2, h, Route::Auto).unwrap();
            assert_eq!(a, b);
        }
        assert!(loocv_predict(&s, &basis, 2, 18, Route::Auto).is_err());
    }

    #[test]
    fn noiseless_linear_months_are_predicted() {
        // x_{i+1} = Q x_i, Q a rotation on a 2d span
        let grid = Grid::closed(31).unwrap();
        let basis = small_basis(grid);
        let e1 = constant_state(grid, &[1.0, 0.0, 0.5, 0.0, 0.0]);
        let e2 = ExtendedState::new(
            (0..5).map(|c| SampledCurve::from_fn(grid, |t| if c == 1 { (3.0 * t).cos() } else { 0.0 })).collect(),
        )
        .unwrap();
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let q = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let mut z = nalgebra::DVector::from_vec(vec![1.0, 0.0]);
        let mut states = Vec::new();
        for _ in 0..120 {
            states.push(e1.scaled(z[0]).axpy(z[1], &e2).unwrap());
            z = &q * z;
        }
        let sample = sample_of(states, &basis);
        // exact only for constant sequences: (n, n - 1) normalizations and
        // the relabelled pair around the holdout bias finite samples
        let e = cv_error(&sample, &basis, 2, Route::Auto).unwrap();
        let zero = zero_cv_error(&sample, &basis).unwrap();
        assert!(e < 0.1 * zero, "{e} vs {zero}");
    }

    #[test]
    fn point_dates() {
        let feb = NaiveDate::from_ymd_opt(2011, 2, 1).unwrap();
        assert_eq!(point_date(feb, 0, 31), feb);
        assert_eq!(point_date(feb, 30, 31), NaiveDate::from_ymd_opt(2011, 2, 28).unwrap());
        let mar = NaiveDate::from_ymd_opt(2011, 3, 1).unwrap();
        assert_eq!(point_date(mar, 9, 31), NaiveDate::from_ymd_opt(2011, 3, 10).unwrap());
    }

    #[test]
    fn config_checks() {
        assert!(ForecastConfig::default().violations().is_empty());
        let c = ForecastConfig {
            beta: 0.4,
            ..ForecastConfig::default()
        };
        assert!(c.violations()[0].contains("beta must exceed 1/2"));
    }
}
