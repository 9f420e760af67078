use chrono::{Datelike, Months, NaiveDate};
use nalgebra::{DMatrix, DVector};

use super::{StationSeries, VARIABLES};
use crate::error::{Error, Result};
use crate::grid::{Grid, SampledCurve};
use crate::spaces::ExtendedState;
use crate::spline::NaturalCubicSpline;

pub const POINTS_PER_MONTH: usize = 31;

/// Non-missing neighbours used on each side of a gap.
const IMPUTE_WINDOW: usize = 5;

const BACKFIT_TOLERANCE: f64 = 1e-12;
const BACKFIT_MAX_ITER: usize = 500;

/// Replaces every missing value by the mean of the (up to) five nearest
/// non-missing values before it and the five after it.
pub fn impute_missing(series: &StationSeries) -> Result<StationSeries> {
    let mut out = series.clone();
    for (v, col) in series.columns.iter().enumerate() {
        if !col.is_empty() && col.iter().all(Option::is_none) {
            return Err(Error::Imputation(format!(
                "column {} has no observed values",
                VARIABLES[v]
            )));
        }
        let observed: Vec<usize> = (0..col.len()).filter(|&d| col[d].is_some()).collect();
        for d in 0..col.len() {
            if col[d].is_some() {
                continue;
            }
            // observed[split..] are after d, observed[..split] before
            let split = observed.partition_point(|&i| i < d);
            let before = &observed[split.saturating_sub(IMPUTE_WINDOW)..split];
            let after = &observed[split..(split + IMPUTE_WINDOW).min(observed.len())];
            let (sum, count) = before
                .iter()
                .chain(after)
                .fold((0.0, 0usize), |(s, c), &i| (s + col[i].unwrap_or(0.0), c + 1));
            out.columns[v][d] = Some(sum / count as f64);
        }
    }
    Ok(out)
}

/// Stored trend and seasonal profiles, one entry per component.
#[derive(Debug, Clone, PartialEq)]
pub struct Detrending {
    /// Months used to fit both profiles.
    pub training_months: usize,
    /// `(a0, a1, a2)` in the rescaled time `t = (m P + i) / (T P)`.
    pub trend: Vec<[f64; 3]>,
    /// `seasonal[c][calendar_month]` is a curve of `P` values.
    pub seasonal: Vec<Vec<Vec<f64>>>,
    pub iterations: usize,
    points: usize,
    first_calendar_month: usize,
}

impl Detrending {
    fn time(&self, month: usize, i: usize) -> f64 {
        (month * self.points + i) as f64 / (self.training_months * self.points) as f64
    }

    fn calendar(&self, month: usize) -> usize {
        (self.first_calendar_month + month) % 12
    }

    /// Trend plus seasonal profile of component `c` in month `month`.
    pub fn baseline(&self, c: usize, month: usize) -> Vec<f64> {
        let [a0, a1, a2] = self.trend[c];
        let season = &self.seasonal[c][self.calendar(month)];
        (0..self.points)
            .map(|i| {
                let t = self.time(month, i);
                a0 + a1 * t + a2 * t * t + season[i]
            })
            .collect()
    }
}

/// Month curves on a closed grid of [`POINTS_PER_MONTH`] points.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthlyFunctionalSample {
    pub station_id: String,
    /// First day of the month whose endogenous curve is in each state.
    pub months: Vec<NaiveDate>,
    /// Standardized curves in original units.
    pub observed: Vec<ExtendedState>,
    /// Curves after any detrending (equal to `observed` before it).
    pub states: Vec<ExtendedState>,
    pub detrending: Option<Detrending>,
    /// Months by which the covariates lead the endogenous variable.
    pub exogenous_lead: usize,
}

impl MonthlyFunctionalSample {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn grid(&self) -> Grid {
        self.states[0].grid()
    }
}

fn days_in_month(first: NaiveDate) -> u32 {
    let next = first + Months::new(1);
    (next - first).num_days() as u32
}

pub fn standardize_months(series: &StationSeries) -> Result<MonthlyFunctionalSample> {
    build_months(series, POINTS_PER_MONTH, 0)
}

/// Splines each whole calendar month onto `points` equispaced abscissae in
/// `[0, 1]`; state `n` pairs the endogenous curve of month `n` with the
/// covariate curves of month `n + lead`.
pub fn build_months(series: &StationSeries, points: usize, lead: usize) -> Result<MonthlyFunctionalSample> {
    if series.missing_count() > 0 {
        return Err(Error::Domain(
            "series still has missing values; impute first".into(),
        ));
    }
    let grid = Grid::closed(points)?;
    let abscissae = grid.abscissae();
    // (first day, start index, length) of each whole month
    let mut runs: Vec<(NaiveDate, usize, usize)> = Vec::new();
    let mut d = 0;
    while d < series.len() {
        let date = series.dates[d];
        let first = date.with_day(1).expect("day 1 exists");
        let len = days_in_month(first) as usize;
        let mut end = d;
        while end < series.len() && series.dates[end].month() == date.month() && series.dates[end].year() == date.year() {
            end += 1;
        }
        if date.day() == 1 && end - d == len {
            runs.push((first, d, len));
        } else {
            log::warn!("trimming partial month {} ({} of {len} days)", first.format("%Y-%m"), end - d);
        }
        d = end;
    }
    if runs.len() <= lead {
        return Err(Error::Domain(format!(
            "{} whole months is not enough for a covariate lead of {lead}",
            runs.len()
        )));
    }
    let mut curves: Vec<Vec<SampledCurve>> = Vec::with_capacity(runs.len());
    for &(_, start, len) in &runs {
        let knots: Vec<f64> = (0..len).map(|k| k as f64 / (len - 1) as f64).collect();
        let mut month = Vec::with_capacity(5);
        for v in 0..5 {
            let values: Vec<f64> = series.columns[v][start..start + len]
                .iter()
                .map(|x| x.unwrap_or(f64::NAN))
                .collect();
            let spline = NaturalCubicSpline::new(&knots, &values)?;
            month.push(SampledCurve::new(grid, spline.eval_many(&abscissae))?);
        }
        curves.push(month);
    }
    let count = runs.len() - lead;
    let mut states = Vec::with_capacity(count);
    for n in 0..count {
        let mut comps = vec![curves[n][0].clone()];
        comps.extend(curves[n + lead][1..].iter().cloned());
        states.push(ExtendedState::new(comps)?);
    }
    Ok(MonthlyFunctionalSample {
        station_id: series.station_id.clone(),
        months: runs[..count].iter().map(|r| r.0).collect(),
        observed: states.clone(),
        states,
        detrending: None,
        exogenous_lead: lead,
    })
}

/// Quadratic trend plus per-calendar-month mean curve, fitted jointly by
/// backfitting on all months but the last and removed from every month.
pub fn detrend_deseasonalize(sample: &MonthlyFunctionalSample) -> Result<MonthlyFunctionalSample> {
    if sample.len() < 2 {
        return Err(Error::Domain("need at least two months".into()));
    }
    detrend_with_training(sample, sample.len() - 1)
}

pub fn detrend_with_training(
    sample: &MonthlyFunctionalSample,
    training: usize,
) -> Result<MonthlyFunctionalSample> {
    if training < 13 || training > sample.len() {
        return Err(Error::Domain(format!(
            "detrending needs at least 13 training months within the sample (got {training} of {})",
            sample.len()
        )));
    }
    let points = sample.grid().len();
    let components = sample.observed[0].len();
    let first_calendar_month = sample.months[0].month0() as usize;
    let mut det = Detrending {
        training_months: training,
        trend: vec![[0.0; 3]; components],
        seasonal: vec![vec![vec![0.0; points]; 12]; components],
        iterations: 0,
        points,
        first_calendar_month,
    };

    let design = DMatrix::from_fn(training * points, 3, |r, c| {
        det.time(r / points, r % points).powi(c as i32)
    });
    let qr = design.clone().qr();
    let (q, r) = (qr.q(), qr.r());
    let rdiag = r.diagonal();
    if rdiag.iter().any(|v| v.abs() < 1e-12 * rdiag[0].abs()) {
        return Err(Error::Numeric("rank-deficient trend design".into()));
    }
    let mut counts = [0usize; 12];
    for m in 0..training {
        counts[det.calendar(m)] += 1;
    }

    for c in 0..components {
        let y: Vec<&[f64]> = (0..training)
            .map(|m| sample.observed[m].component(c).values())
            .collect();
        let scale = y.iter().flat_map(|r| r.iter()).fold(1.0f64, |a, v| a.max(v.abs()));
        let mut season = vec![vec![0.0; points]; 12];
        let mut coef = DVector::zeros(3);
        for iter in 1..=BACKFIT_MAX_ITER {
            let rhs = DVector::from_fn(training * points, |r, _| {
                let (m, i) = (r / points, r % points);
                y[m][i] - season[det.calendar(m)][i]
            });
            let new_coef = r
                .solve_upper_triangular(&q.tr_mul(&rhs))
                .ok_or_else(|| Error::Numeric("trend least squares failed".into()))?;
            let fitted = &design * &new_coef;
            let mut new_season = vec![vec![0.0; points]; 12];
            for m in 0..training {
                let k = det.calendar(m);
                for i in 0..points {
                    new_season[k][i] += y[m][i] - fitted[m * points + i];
                }
            }
            for k in 0..12 {
                if counts[k] > 0 {
                    for v in new_season[k].iter_mut() {
                        *v /= counts[k] as f64;
                    }
                }
            }
            let change = new_season
                .iter()
                .flatten()
                .zip(season.iter().flatten())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
                .max((&new_coef - &coef).amax());
            season = new_season;
            coef = new_coef;
            det.iterations = det.iterations.max(iter);
            if change <= BACKFIT_TOLERANCE * scale {
                break;
            }
        }
        det.trend[c] = [coef[0], coef[1], coef[2]];
        det.seasonal[c] = season;
    }

    let mut states = Vec::with_capacity(sample.len());
    for (m, x) in sample.observed.iter().enumerate() {
        let comps = (0..components)
            .map(|c| {
                let base = det.baseline(c, m);
                let vals = x.component(c).values().iter().zip(&base).map(|(a, b)| a - b).collect();
                SampledCurve::new(x.grid(), vals)
            })
            .collect::<Result<Vec<_>>>()?;
        states.push(ExtendedState::new(comps)?);
    }
    Ok(MonthlyFunctionalSample {
        states,
        detrending: Some(det),
        ..sample.clone()
    })
}

/// Adds the stored trend and seasonal profile of month `month` back.
pub fn retrend(
    prediction: &ExtendedState,
    sample: &MonthlyFunctionalSample,
    month: usize,
) -> Result<ExtendedState> {
    let det = sample
        .detrending
        .as_ref()
        .ok_or_else(|| Error::Domain("sample carries no trend or seasonal profiles".into()))?;
    if prediction.len() != det.trend.len() || prediction.grid().len() != det.points {
        return Err(Error::Dimension(
            "prediction does not match the detrended sample".into(),
        ));
    }
    let comps = prediction
        .components()
        .iter()
        .enumerate()
        .map(|(c, curve)| {
            let base = det.baseline(c, month);
            let vals = curve.values().iter().zip(&base).map(|(a, b)| a + b).collect();
            SampledCurve::new(curve.grid(), vals)
        })
        .collect::<Result<Vec<_>>>()?;
    ExtendedState::new(comps)
}
