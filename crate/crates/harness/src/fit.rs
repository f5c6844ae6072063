//! Power-law rate fits `value ~ C L^{-rho}` by least squares on log-log points.

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Points at or below this value are dropped before fitting.
pub const FIT_FLOOR: f64 = cutlab_core::TOL.fit_floor;
pub const MIN_FIT_POINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub rho: f64,
    pub c: f64,
    pub r2: f64,
    pub points: usize,
}

/// Fits `log v = log C - rho log x` over the points with `v > FIT_FLOOR` and `x > 0`.
pub fn fit_rate(series: &[(f64, f64)]) -> Result<Fit> {
    let usable: Vec<(f64, f64)> = series
        .iter()
        .filter(|(x, v)| *x > 0.0 && v.is_finite() && *v > FIT_FLOOR)
        .map(|&(x, v)| (x.ln(), v.ln()))
        .collect();
    if usable.len() < MIN_FIT_POINTS {
        return Err(HarnessError::InsufficientPoints {
            have: usable.len(),
            need: MIN_FIT_POINTS,
        });
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = usable.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(HarnessError::InsufficientPoints {
            have: 1,
            need: MIN_FIT_POINTS,
        });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = usable.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(Fit {
        rho: -slope,
        c: intercept.exp(),
        r2,
        points: usable.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let s: Vec<(f64, f64)> = (1..=10).map(|x| (x as f64, (x as f64).powi(-2))).collect();
        let f = fit_rate(&s).unwrap();
        assert!((f.rho - 2.0).abs() < 1e-6);
        assert!(f.r2 > 0.999999);
        assert!((f.c - 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_series() {
        let s: Vec<(f64, f64)> = (1..=6).map(|x| (x as f64, 0.3)).collect();
        let f = fit_rate(&s).unwrap();
        assert!(f.rho.abs() < 1e-12);
    }

    #[test]
    fn floor_and_count() {
        let s = [(1.0, 1.0), (2.0, 0.5), (3.0, 1e-14), (4.0, 0.0), (5.0, f64::NAN)];
        assert!(matches!(
            fit_rate(&s),
            Err(HarnessError::InsufficientPoints { have: 2, need: 4 })
        ));
    }

    #[test]
    fn tail_norm_fit_on_midpoints() {
        let levels: Vec<f64> = (1..=64).map(|x| x as f64).collect();
        let s = cutlab_core::SpectralDecomposition::diagonal(&levels);
        let series: Vec<(f64, f64)> = [8.5, 9.5, 11.5, 14.5, 17.5, 21.5, 26.5, 31.5]
            .iter()
            .map(|&l| (l, cutlab_core::cutoff::tail_norm(&s, l, 3).unwrap()))
            .collect();
        // exact tail: (floor(L) + 1)^{-3}
        for &(l, v) in &series {
            assert!((v - (l.floor() + 1.0).powi(-3)).abs() < 1e-15);
        }
        // on midpoints the tail is (L + 1/2)^{-3}, whose log-log slope 3L/(L + 1/2) stays below 3
        let rho = fit_rate(&series).unwrap().rho;
        assert!(rho > 2.9 && rho < 3.0, "rho = {rho}");
    }
}
