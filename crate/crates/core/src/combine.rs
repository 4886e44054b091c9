//! Equal-weight combination of reconciled forecasts from several hierarchies
//! over the series they share (top and bottom).

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative tolerance for the coherence check on inputs.
pub const COHERENCE_TOL: f64 = 1e-6;

/// Whether row 0 equals the column sums of rows `1..`.
pub fn is_coherent(x: &DMatrix<f64>, tol: f64) -> bool {
    (0..x.ncols()).all(|c| {
        let col = x.column(c);
        let bottom: f64 = col.rows(1, x.nrows() - 1).sum();
        (col[0] - bottom).abs() <= tol * (1.0 + col[0].abs())
    })
}

/// Elementwise mean of `(m+1) x h` matrices ordered (top, bottom...).
pub fn combine(forecasts: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let Some(first) = forecasts.first() else {
        return Err(Error::Argument("nothing to combine".into()));
    };
    let shape = first.shape();
    if shape.0 < 2 {
        return Err(Error::Argument("inputs need a top row and at least one bottom row".into()));
    }
    for (i, f) in forecasts.iter().enumerate() {
        if f.shape() != shape {
            return Err(Error::Argument(format!(
                "input {i} is {:?}, expected {shape:?}",
                f.shape()
            )));
        }
        if !is_coherent(f, COHERENCE_TOL) {
            return Err(Error::Coherence(format!("input {i}: top row is not the sum of bottom rows")));
        }
    }
    let mut out = DMatrix::zeros(shape.0, shape.1);
    for f in forecasts {
        out += f;
    }
    Ok(out / forecasts.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(top_bottom: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(top_bottom.len(), 1, top_bottom)
    }

    #[test]
    fn examples() {
        let a = col(&[4.0, 1.0, 3.0]);
        let b = col(&[8.0, 3.0, 5.0]);
        assert_eq!(combine(std::slice::from_ref(&a)).unwrap(), a);
        let c = combine(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(c, col(&[6.0, 2.0, 4.0]));
        assert_eq!(c[0], c[1] + c[2]);
        assert_eq!(combine(&[b, a]).unwrap(), c);
    }

    #[test]
    fn errors() {
        assert_eq!(combine(&[]).unwrap_err().kind(), "ArgumentError");
        let a = col(&[4.0, 1.0, 3.0]);
        assert_eq!(combine(&[a.clone(), col(&[3.0, 3.0])]).unwrap_err().kind(), "ArgumentError");
        assert_eq!(combine(&[a, col(&[5.0, 1.0, 3.0])]).unwrap_err().kind(), "CoherenceError");
    }

    #[test]
    fn repeated_input_is_fixed() {
        let x = DMatrix::from_row_slice(3, 2, &[0.3, 1.5, 0.1, 0.5, 0.2, 1.0]);
        let c = combine(&[x.clone(), x.clone(), x.clone()]).unwrap();
        assert!((c - x).abs().max() < 1e-15);
    }
}
