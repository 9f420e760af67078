use arbx::pipeline::{
    build_months, detrend_deseasonalize, impute_missing, load_station_csv, parse_station_csv,
    CSV_HEADER,
};
use arbx::Error;

#[test]
fn shipped_station_preprocesses() {
    let s = load_station_csv(&std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/S1.csv")).unwrap();
    assert_eq!(s.station_id, "S1");
    assert_eq!(s.len(), 1551);
    let filled = impute_missing(&s).unwrap();
    assert_eq!(filled.missing_count(), 0);
    let months = build_months(&filled, 31, 0).unwrap();
    assert_eq!(months.len(), 51);
    let d = detrend_deseasonalize(&months).unwrap();
    assert_eq!(d.detrending.as_ref().unwrap().training_months, 50);
    // observed days keep their values
    for (a, b) in s.pm10().iter().zip(filled.pm10()) {
        if let Some(v) = a {
            assert_eq!(Some(*v), *b);
        }
    }
}

#[test]
fn ingestion_errors_carry_line_numbers() {
    let text = format!("{CSV_HEADER}\n2010-01-01,1,2,3,4,5\n2010-01-02,1,x,3,4,5\n");
    match parse_station_csv(&text, "S") {
        Err(Error::Ingestion { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    let text = format!("{CSV_HEADER}\n2010-01-01,1,2,3,4,5\n2010-01-03,1,2,3,4,5\n");
    assert!(matches!(parse_station_csv(&text, "S"), Err(Error::Ingestion { line: 3, .. })));
}
