use crate::error::{Error, Result};

/// Least-squares slope of `log2 e_h` against `log2 h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    /// Fitted convergence order.
    pub q: f64,
    /// Intercept in log2 space, `log2 e_h ~ intercept + q log2 h`.
    pub intercept: f64,
    /// Euclidean norm of the log2-space residuals.
    pub resid: f64,
}

/// Fits `e_h ~ C h^q` through `(h, e_h)` pairs.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if let Some(&(h, e)) = points.iter().find(|(h, e)| !(*e > 0.0 && *h > 0.0)) {
        return Err(Error::DegenerateFit(format!("non-positive point (h = {h}, e_h = {e})")));
    }
    let mut hs: Vec<f64> = points.iter().map(|p| p.0).collect();
    hs.sort_by(f64::total_cmp);
    hs.dedup();
    if hs.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "need at least 3 distinct step sizes, got {}",
            hs.len()
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.log2()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.log2()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let q = sxy / sxx;
    let intercept = my - q * mx;
    let resid = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - q * x).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(RateFit { q, intercept, resid })
}
