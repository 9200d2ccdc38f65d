//! Least-squares power-law fits.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingFit {
    /// Slope of `log D` against `log η`.
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub used: usize,
    /// Pairs dropped because `D ≤ 0` (or either value is not finite).
    pub excluded: Vec<(f64, f64)>,
}

pub fn fit_scaling_exponent(pairs: &[(f64, f64)]) -> Result<ScalingFit> {
    let mut pts = Vec::new();
    let mut excluded = Vec::new();
    for &(eta, d) in pairs {
        if eta > 0.0 && d > 0.0 && eta.is_finite() && d.is_finite() {
            pts.push((eta.ln(), d.ln()));
        } else {
            log::warn!("excluding (eta = {eta}, D = {d}) from the scaling fit");
            excluded.push((eta, d));
        }
    }
    let n = pts.len();
    if n < 3 {
        return Err(Error::Input(format!(
            "scaling fit needs at least 3 pairs with positive D, got {n}"
        )));
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Input("scaling fit needs at least two distinct eta values".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Ok(ScalingFit {
        slope,
        stderr: (ssr / (nf - 2.0) / sxx).sqrt(),
        intercept,
        used: n,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_laws() {
        let etas = [0.04, 0.02, 0.01, 0.005];
        let f = fit_scaling_exponent(&etas.map(|e: f64| (e, e.sqrt()))).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-12 && f.stderr < 1e-12);
        let f = fit_scaling_exponent(&etas.map(|e| (e, 3.0 * e))).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12);
        assert!((f.intercept - 3.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_distances_are_excluded() {
        let f = fit_scaling_exponent(&[(0.1, 0.1), (0.2, 0.2), (0.3, 0.0), (0.4, 0.4)]).unwrap();
        assert_eq!(f.used, 3);
        assert_eq!(f.excluded, vec![(0.3, 0.0)]);
        assert!(fit_scaling_exponent(&[(0.1, 0.1), (0.2, 0.0), (0.4, 0.4)]).is_err());
    }
}
