use hiercast_py::{matrix_from_rows, rows_from_matrix};

#[test]
fn rows_round_trip() {
    let rows = vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]];
    let x = matrix_from_rows(&rows).unwrap();
    assert_eq!(x.shape(), (2, 3));
    assert_eq!(x[(1, 0)], 4.0);
    assert_eq!(rows_from_matrix(&x), rows);
}

#[test]
fn ragged_rows_are_rejected() {
    let err = matrix_from_rows(&[vec![1.0], vec![1.0, 2.0]]).unwrap_err();
    assert_eq!(err.kind(), "ArgumentError");
    assert_eq!(matrix_from_rows(&[]).unwrap().shape(), (0, 0));
}
