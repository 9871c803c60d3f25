//! Least-squares lines and min/max constant fits used by the growth-law and
//! `≲`-type checks.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n: usize,
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return domain("a line fit needs at least two (x, y) pairs of equal length");
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return domain("line fit data must be finite");
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return domain("line fit needs at least two distinct x values");
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LineFit { slope, intercept: my - slope * mx, r2, n })
}

/// Lower and upper constants of a ratio cloud: `c = min`, `C = max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioBand {
    pub c: f64,
    pub big_c: f64,
    pub n: usize,
}

pub fn ratio_band(ratios: &[f64]) -> Result<RatioBand> {
    if ratios.is_empty() || ratios.iter().any(|r| r.is_nan()) {
        return domain("ratio band needs a nonempty cloud without NaN");
    }
    let c = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let big_c = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(RatioBand { c, big_c, n: ratios.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope - 2.5).abs() < 1e-14 && (f.intercept + 1.0).abs() < 1e-14);
        assert!((f.r2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn noisy_line_has_lower_r2() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [0.0, 2.0, 1.0, 3.0];
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope - 0.8).abs() < 1e-14);
        assert!(f.r2 < 0.9);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(fit_line(&[1.0], &[1.0]).is_err());
        assert!(fit_line(&[1.0, 1.0], &[0.0, 1.0]).is_err());
        let b = ratio_band(&[2.0, 0.5, 1.0]).unwrap();
        assert_eq!((b.c, b.big_c, b.n), (0.5, 2.0, 3));
    }
}
