use std::path::Path;

use chrono::NaiveDate;

use super::{StationSeries, VARIABLES};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "date,pm10,temp_mean,pressure_mean,wind_mean,grad_temp_max";

/// Reads a station file; the station id is the file stem.
pub fn load_station_csv(path: &Path) -> Result<StationSeries> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_station_csv(&text, &id)
}

pub fn parse_station_csv(text: &str, station_id: &str) -> Result<StationSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    let names: Vec<&str> = header.iter().collect();
    let expected: Vec<&str> = CSV_HEADER.split(',').collect();
    if names != expected {
        if let Some(unknown) = names.iter().find(|n| !expected.contains(n)) {
            return Err(Error::Ingestion {
                line: 1,
                message: format!("unknown column '{unknown}'"),
            });
        }
        return Err(Error::Ingestion {
            line: 1,
            message: format!("header must be '{CSV_HEADER}'"),
        });
    }
    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut columns: [Vec<Option<f64>>; 5] = Default::default();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let date_field = record.get(0).unwrap_or_default().trim();
        let date = NaiveDate::parse_from_str(date_field, "%Y-%m-%d").map_err(|e| {
            Error::Ingestion {
                line,
                message: format!("bad date '{date_field}': {e}"),
            }
        })?;
        if let Some(prev) = dates.last() {
            if date <= *prev {
                return Err(Error::Ingestion {
                    line,
                    message: format!("date {date} is not after {prev}"),
                });
            }
            if date != prev.succ_opt().unwrap_or(*prev) {
                return Err(Error::Ingestion {
                    line,
                    message: format!("missing days between {prev} and {date}"),
                });
            }
        }
        dates.push(date);
        for (v, col) in columns.iter_mut().enumerate() {
            let raw = record.get(v + 1).unwrap_or_default().trim();
            let value = if raw.is_empty() {
                None
            } else {
                let x: f64 = raw.parse().map_err(|_| Error::Ingestion {
                    line,
                    message: format!("bad {} value '{raw}'", VARIABLES[v]),
                })?;
                if !x.is_finite() {
                    return Err(Error::Ingestion {
                        line,
                        message: format!("non-finite {} value", VARIABLES[v]),
                    });
                }
                Some(x)
            };
            col.push(value);
        }
    }
    Ok(StationSeries {
        station_id: station_id.to_string(),
        dates,
        columns,
    })
}

pub fn write_station_csv(series: &StationSeries, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(64 * series.len());
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (d, date) in series.dates.iter().enumerate() {
        out.push_str(&date.format("%Y-%m-%d").to_string());
        for col in &series.columns {
            out.push(',');
            if let Some(v) = col[d] {
                out.push_str(&v.to_string());
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "date,pm10,temp_mean,pressure_mean,wind_mean,grad_temp_max
2010-01-01,20.5,3.1,1012.0,4.2,0.3
2010-01-02,,2.9,1011.5,3.9,0.1
2010-01-03,18.0,2.0,1010.0,5.0,-0.2
";

    #[test]
    fn reads_three_rows_with_a_gap() {
        let s = parse_station_csv(GOOD, "S1").unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.pm10(), &[Some(20.5), None, Some(18.0)]);
        assert_eq!(s.columns[2][1], Some(1011.5));
        assert_eq!(s.missing_count(), 1);
    }

    #[test]
    fn duplicated_date_is_rejected_with_line() {
        let bad = GOOD.replace("2010-01-03", "2010-01-02");
        match parse_station_csv(&bad, "S1") {
            Err(Error::Ingestion { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_rows_and_columns() {
        let unknown = GOOD.replace("grad_temp_max", "humidity");
        assert!(matches!(
            parse_station_csv(&unknown, "S1"),
            Err(Error::Ingestion { line: 1, .. })
        ));
        let short = GOOD.replace("18.0,2.0,1010.0,5.0,-0.2", "18.0,2.0");
        assert!(matches!(parse_station_csv(&short, "S1"), Err(Error::Ingestion { .. })));
        let text = GOOD.replace("3.1", "warm");
        match parse_station_csv(&text, "S1") {
            Err(Error::Ingestion { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("temp_mean"));
            }
            other => panic!("{other:?}"),
        }
        let gap = GOOD.replace("2010-01-03", "2010-01-05");
        assert!(matches!(parse_station_csv(&gap, "S1"), Err(Error::Ingestion { line: 4, .. })));
    }

    #[test]
    fn write_then_read() {
        let s = parse_station_csv(GOOD, "S1").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("S1.csv");
        write_station_csv(&s, &p).unwrap();
        assert_eq!(load_station_csv(&p).unwrap(), s);
    }
}
