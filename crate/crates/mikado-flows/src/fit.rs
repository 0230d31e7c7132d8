//! Least-squares slope fits used by the rate verifiers.
//!
//! Every scaling law in the construction is checked empirically by sweeping
//! a parameter, measuring a norm, and fitting the log-log slope; the fit
//! routines live here so that library code and reports share one
//! implementation.

/// Result of a straight-line least-squares fit y ≈ slope·x + intercept.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct SlopeFit {
    /// Fitted slope.
    pub slope: f64,
    /// Fitted intercept.
    pub intercept: f64,
    /// Standard error of the slope (0 when only two points are given).
    pub stderr: f64,
}

/// Least-squares line through (xs, ys); needs at least two distinct xs.
pub fn least_squares_fit(xs: &[f64], ys: &[f64]) -> SlopeFit {
    assert_eq!(xs.len(), ys.len(), "fit needs paired samples");
    assert!(xs.len() >= 2, "fit needs at least two samples");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    assert!(sxx > 0.0, "fit needs at least two distinct abscissae");
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if xs.len() > 2 {
        let ss_res: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| {
                let r = y - (slope * x + intercept);
                r * r
            })
            .sum();
        (ss_res / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    SlopeFit {
        slope,
        intercept,
        stderr,
    }
}

/// Slope of the least-squares line (shorthand).
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    least_squares_fit(xs, ys).slope
}

/// Log-log slope: exponent e in the power law y ∝ x^e.
///
/// All samples must be strictly positive.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    log_log_fit(xs, ys).slope
}

/// Full log-log fit.
pub fn log_log_fit(xs: &[f64], ys: &[f64]) -> SlopeFit {
    let lx: Vec<f64> = xs
        .iter()
        .map(|&x| {
            assert!(x > 0.0, "log-log fit needs positive abscissae");
            x.ln()
        })
        .collect();
    let ly: Vec<f64> = ys
        .iter()
        .map(|&y| {
            assert!(y > 0.0, "log-log fit needs positive ordinates, got {y}");
            y.ln()
        })
        .collect();
    least_squares_fit(&lx, &ly)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_is_recovered() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        let fit = least_squares_fit(&xs, &ys);
        assert!((fit.slope - 2.5).abs() < 1e-14);
        assert!((fit.intercept + 1.0).abs() < 1e-14);
        assert!(fit.stderr < 1e-13);
    }

    #[test]
    fn power_law_exponent_is_recovered() {
        let xs = [4.0, 8.0, 16.0, 32.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-1.5)).collect();
        let s = log_log_slope(&xs, &ys);
        assert!((s + 1.5).abs() < 1e-12, "slope {s}");
    }
}
