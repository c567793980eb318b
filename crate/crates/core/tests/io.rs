use mmls::io::{parse_cloud, read_cloud, write_cloud};
use nalgebra::DMatrix;
use proptest::prelude::*;

#[test]
fn file_round_trip_keeps_header_and_values() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cloud.csv");
    let pts = DMatrix::from_row_slice(2, 3, &[0.1, 1.0 / 3.0, -2.5e-17, 1e300, -0.0, 7.0]);
    write_cloud(&path, &pts, Some(1)).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# n=2 d=1"));
    let file = read_cloud(&path).unwrap();
    assert_eq!(file.cloud.points(), &pts);
    assert_eq!(file.declared_n, Some(2));
    assert_eq!(file.declared_d, Some(1));
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = read_cloud(&dir.path().join("absent.csv")).unwrap_err();
    assert_eq!(err.code(), "E_IO");
}

#[test]
fn malformed_rows_name_their_line() {
    let err = parse_cloud("1,2\n3,x\n").unwrap_err();
    assert_eq!(err.code(), "E_PARSE");
    assert!(err.to_string().contains('2'), "{err}");
    assert_eq!(parse_cloud("1,2\n3\n").unwrap_err().code(), "E_PARSE");
    assert_eq!(
        parse_cloud("# n=3 d=1\n1,2\n").unwrap_err().code(),
        "E_PARSE"
    );
    assert_eq!(parse_cloud("1,NaN\n").unwrap_err().code(), "E_PARSE");
}

proptest! {
    #[test]
    fn any_finite_cloud_round_trips(
        values in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 1..60),
        n in 1usize..6,
    ) {
        let cols = values.len() / n;
        prop_assume!(cols > 0);
        let pts = DMatrix::from_column_slice(n, cols, &values[..n * cols]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        write_cloud(&path, &pts, None).unwrap();
        let back = read_cloud(&path).unwrap();
        prop_assert_eq!(back.cloud.points(), &pts);
    }
}
