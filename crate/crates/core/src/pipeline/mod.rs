//! Monthly curve forecasting for a pollution station with meteorological
//! covariates.
//!
//! Flow: [`load_station_csv`] -> [`impute_missing`] -> [`standardize_months`]
//! -> [`detrend_deseasonalize`] -> [`cv_error`] / [`forecast_station`].

mod forecast;
mod ingest;
mod preprocess;
mod synthetic;

use chrono::NaiveDate;

pub use forecast::{
    cv_error, extended_sample, forecast_station, loocv_predict, write_errors_csv,
    write_predictions_csv, zero_cv_error, ErrorRow, ForecastConfig, ForecastReport,
    PredictionRow,
};
pub use ingest::{load_station_csv, parse_station_csv, write_station_csv, CSV_HEADER};
pub use preprocess::{
    build_months, detrend_deseasonalize, impute_missing, retrend, standardize_months, Detrending,
    MonthlyFunctionalSample, POINTS_PER_MONTH,
};
pub use synthetic::{synthetic_station, SyntheticStationConfig};

/// Column names of the variables, endogenous first.
pub const VARIABLES: [&str; 5] = [
    "pm10",
    "temp_mean",
    "pressure_mean",
    "wind_mean",
    "grad_temp_max",
];

/// Daily records of one station; `None` marks a missing value.
#[derive(Debug, Clone, PartialEq)]
pub struct StationSeries {
    pub station_id: String,
    pub dates: Vec<NaiveDate>,
    /// `columns[v][d]` is variable `v` (in [`VARIABLES`] order) on day `d`.
    pub columns: [Vec<Option<f64>>; 5],
}

impl StationSeries {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn pm10(&self) -> &[Option<f64>] {
        &self.columns[0]
    }

    pub fn missing_count(&self) -> usize {
        self.columns
            .iter()
            .map(|c| c.iter().filter(|v| v.is_none()).count())
            .sum()
    }

    /// Values of a column with no missing entries.
    pub fn complete_column(&self, v: usize) -> Option<Vec<f64>> {
        self.columns[v].iter().copied().collect()
    }
}
