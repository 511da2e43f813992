use serde::Serialize;

use crate::error::{Error, Result};

/// Straight line `y = slope * x + intercept` fitted by least squares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square of the residuals, in units of `y`.
    pub rms_residual: f64,
}

/// Ordinary least squares over `(x, y)` pairs.
///
/// The normal equations `(AᵀA) b = Aᵀy` with `A = [x, 1]` are solved in
/// centred form: `slope = Sxy / Sxx`, `intercept = ȳ - slope x̄`.
pub fn fit_linear_ls(points: &[(f64, f64)]) -> Result<LineFit> {
    if points.len() < 2 {
        return Err(Error::Singular("need at least two points"));
    }
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x, sy + y));
    let (mx, my) = (sx / n, sy / n);
    let (sxx, sxy) = points.iter().fold((0.0, 0.0), |(sxx, sxy), &(x, y)| {
        let dx = x - mx;
        (sxx + dx * dx, sxy + dx * (y - my))
    });
    if !(sxx > 0.0) {
        return Err(Error::Singular("all abscissae are identical"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = points
        .iter()
        .map(|&(x, y)| {
            let r = y - slope * x - intercept;
            r * r
        })
        .sum();
    Ok(LineFit {
        slope,
        intercept,
        rms_residual: (sse / n).sqrt(),
    })
}
