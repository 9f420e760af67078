//! Synthetic daily station records with persistent monthly anomalies.

use chrono::{Datelike, Days, NaiveDate};
use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::StationSeries;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticStationConfig {
    pub station_id: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub seed: u64,
    /// Fraction of PM10 days left empty.
    pub missing_fraction: f64,
    pub pm10_mean: f64,
    pub pm10_sd: f64,
    /// AR(1) coefficient of the monthly anomalies.
    pub persistence: f64,
}

impl Default for SyntheticStationConfig {
    fn default() -> Self {
        Self {
            station_id: "S1".into(),
            start: NaiveDate::from_ymd_opt(2007, 1, 1).expect("valid date"),
            end: NaiveDate::from_ymd_opt(2011, 3, 31).expect("valid date"),
            seed: 1,
            missing_fraction: 0.05,
            pm10_mean: 19.6,
            pm10_sd: 7.9,
            persistence: 0.8,
        }
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Monthly AR(1) anomalies plus an annual cycle and daily noise for the
/// four covariates; PM10 is a lognormal transform of its own anomaly, the
/// covariate anomalies and daily noise, rescaled to the requested mean and
/// standard deviation over the observed days.
pub fn synthetic_station(config: &SyntheticStationConfig) -> Result<StationSeries> {
    if config.end < config.start {
        return Err(Error::Config("end precedes start".into()));
    }
    if !(0.0..1.0).contains(&config.missing_fraction) {
        return Err(Error::Config("missing_fraction must lie in [0, 1)".into()));
    }
    if !(config.persistence.abs() < 1.0) || !(config.pm10_sd > 0.0) {
        return Err(Error::Config("need |persistence| < 1 and pm10_sd > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let days = (config.end - config.start).num_days() as usize + 1;
    let dates: Vec<NaiveDate> = (0..days).map(|d| config.start + Days::new(d as u64)).collect();

    let month_of = |d: &NaiveDate| {
        (d.year() - config.start.year()) as usize * 12 + d.month0() as usize
            - config.start.month0() as usize
    };
    let months = month_of(&dates[days - 1]) + 1;
    let phi = config.persistence;
    let innov = (1.0 - phi * phi).sqrt();
    // anomalies[m][v]: level and within-month slope per variable
    let mut level = [[0.0f64; 2]; 5];
    let mut anomalies = Vec::with_capacity(months);
    for _ in 0..months {
        for l in level.iter_mut() {
            l[0] = phi * l[0] + innov * normal(&mut rng);
            l[1] = phi * l[1] + innov * normal(&mut rng);
        }
        anomalies.push(level);
    }

    // (mean, annual amplitude, anomaly scale, daily noise scale)
    let covariates = [
        (10.11, 7.0, 1.6, 1.2),
        (1016.25, 3.0, 5.0, 4.0),
        (4.13, 0.6, 0.7, 0.8),
        (1.01, 0.8, 0.9, 1.0),
    ];
    let mut columns: [Vec<Option<f64>>; 5] = Default::default();
    let mut raw_pm = Vec::with_capacity(days);
    let mut daily = [0.0f64; 5];
    for (d, date) in dates.iter().enumerate() {
        let m = month_of(date);
        let a = &anomalies[m];
        let dim = ((date.with_day(1).expect("day 1") + chrono::Months::new(1)) - date.with_day(1).expect("day 1"))
            .num_days() as f64;
        let s = (date.day0() as f64) / (dim - 1.0) - 0.5;
        let season = (2.0 * std::f64::consts::PI * (date.ordinal0() as f64 - 15.0) / 365.25).cos();
        for (v, (mean, amp, scale, noise)) in covariates.iter().enumerate() {
            daily[v + 1] = 0.6 * daily[v + 1] + 0.8 * normal(&mut rng);
            let x = mean - amp * season
                + scale * (a[v + 1][0] + a[v + 1][1] * s)
                + noise * daily[v + 1];
            let x = if v == 2 { x.max(0.3) } else { x };
            columns[v + 1].push(Some(round2(x)));
        }
        daily[0] = 0.5 * daily[0] + 0.87 * normal(&mut rng);
        let latent = 0.9 * (a[0][0] + 0.6 * a[0][1] * s)
            - 0.25 * a[3][0]
            + 0.2 * a[1][0]
            + 0.25 * season
            + 0.3 * (d as f64 / days as f64)
            + 0.35 * daily[0];
        raw_pm.push((0.35 * latent).exp());
    }

    let missing = (config.missing_fraction * days as f64).round() as usize;
    let mut is_missing = vec![false; days];
    for i in sample_indices(&mut rng, days, missing) {
        is_missing[i] = true;
    }
    let observed: Vec<f64> = raw_pm
        .iter()
        .zip(&is_missing)
        .filter(|(_, m)| !**m)
        .map(|(v, _)| *v)
        .collect();
    let mean = observed.iter().sum::<f64>() / observed.len() as f64;
    let var = observed.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (observed.len() - 1) as f64;
    let scale = config.pm10_sd / var.sqrt();
    columns[0] = raw_pm
        .iter()
        .zip(&is_missing)
        .map(|(v, m)| {
            if *m {
                None
            } else {
                Some(round2(config.pm10_mean + scale * (v - mean)))
            }
        })
        .collect();
    Ok(StationSeries {
        station_id: config.station_id.clone(),
        dates,
        columns,
    })
}
