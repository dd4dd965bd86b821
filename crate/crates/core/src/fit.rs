//! Small least-squares helpers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Least-squares coefficients of `y ≈ Σ_j c_j x^j`, j = 0..=degree.
pub fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::Fit(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    if x.len() <= degree {
        return Err(Error::Fit(format!("need more than {degree} points for a degree-{degree} fit, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite input".into()));
    }
    // Scale the abscissa to keep the normal equations well conditioned.
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let a = DMatrix::from_fn(x.len(), degree + 1, |i, j| (x[i] / scale).powi(j as i32));
    let b = DVector::from_column_slice(y);
    let svd = a.svd(true, true);
    let sol = svd.solve(&b, 1e-13).map_err(|e| Error::Fit(format!("least squares failed: {e}")))?;
    Ok((0..=degree).map(|j| sol[j] / scale.powi(j as i32)).collect())
}

/// Slope of log|y| against log x.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.iter().chain(y).any(|v| *v == 0.0) || x.iter().any(|v| *v < 0.0) {
        return Err(Error::Fit("log-log fit needs positive abscissae and nonzero values".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    Ok(polyfit(&lx, &ly, 1)?[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_quadratic() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let y: Vec<f64> = x.iter().map(|t| 1.5 - 2.0 * t + 0.25 * t * t).collect();
        let c = polyfit(&x, &y, 2).unwrap();
        assert!((c[0] - 1.5).abs() < 1e-10 && (c[1] + 2.0).abs() < 1e-10 && (c[2] - 0.25).abs() < 1e-10);
    }

    #[test]
    fn power_law_slope() {
        let x: Vec<f64> = (1..10).map(|i| i as f64 * 10.0).collect();
        let y: Vec<f64> = x.iter().map(|t| 3.0 * t.powf(-1.5)).collect();
        assert!((loglog_slope(&x, &y).unwrap() + 1.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_short_input() {
        assert!(polyfit(&[1.0, 2.0], &[1.0, 2.0], 2).is_err());
        assert!(loglog_slope(&[0.0, 1.0, 2.0], &[1.0, 1.0, 1.0]).is_err());
    }
}
