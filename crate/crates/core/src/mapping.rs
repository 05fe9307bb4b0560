//! Rectified-linear maps from a per-anchor novelty score to the EKF's range
//! variance and range bias.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flat at `sigma2_min` up to `e_lo`, linear ramp to `sigma2_max` at `e_hi`,
/// flat afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CovarianceMap {
    pub sigma2_min: f64,
    pub sigma2_max: f64,
    pub e_lo: f64,
    pub e_hi: f64,
}

impl Default for CovarianceMap {
    fn default() -> Self {
        Self {
            sigma2_min: 0.001,
            sigma2_max: 0.1,
            e_lo: 0.025,
            e_hi: 0.1,
        }
    }
}

impl CovarianceMap {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.sigma2_min && self.sigma2_min < self.sigma2_max) {
            return Err(Error::InvalidSpec(
                "covariance map needs 0 < sigma2_min < sigma2_max".into(),
            ));
        }
        if !(0.0 <= self.e_lo && self.e_lo < self.e_hi) {
            return Err(Error::InvalidSpec(
                "covariance map needs 0 <= e_lo < e_hi".into(),
            ));
        }
        Ok(())
    }

    pub fn covariance_of(&self, e: f64) -> f64 {
        if e <= self.e_lo {
            self.sigma2_min
        } else if e >= self.e_hi {
            self.sigma2_max
        } else {
            let u = (e - self.e_lo) / (self.e_hi - self.e_lo);
            self.sigma2_min + u * (self.sigma2_max - self.sigma2_min)
        }
    }
}

/// `min(m * e + q, b_max)`, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BiasMap {
    pub m: f64,
    pub q: f64,
    pub b_max: f64,
}

impl Default for BiasMap {
    fn default() -> Self {
        Self {
            m: 0.885,
            q: 0.115,
            b_max: 0.5,
        }
    }
}

impl BiasMap {
    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0 && self.q >= 0.0 && self.b_max > self.q) {
            return Err(Error::InvalidSpec(
                "bias map needs m > 0, q >= 0 and b_max > q".into(),
            ));
        }
        Ok(())
    }

    pub fn bias_of(&self, e: f64) -> f64 {
        (self.m * e + self.q).min(self.b_max)
    }
}

pub fn covariance_of(e: f64, map: &CovarianceMap) -> f64 {
    map.covariance_of(e)
}

pub fn bias_of(e: f64, map: &BiasMap) -> f64 {
    map.bias_of(e)
}

/// One `(novelty score, range error in meters)` observation per anchor and sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasObservation {
    pub anchor: usize,
    pub novelty: f64,
    pub range_error: f64,
}

/// Per-anchor least-squares lines, averaged. Anchors whose novelty values are
/// all equal are left out; `b_max` is carried over unchanged.
pub fn fit_bias_map(observations: &[BiasObservation], b_max: f64) -> Result<BiasMap> {
    let n_anchors = observations.iter().map(|o| o.anchor + 1).max().unwrap_or(0);
    let mut fits = Vec::new();
    for anchor in 0..n_anchors {
        let pts: Vec<(f64, f64)> = observations
            .iter()
            .filter(|o| o.anchor == anchor)
            .map(|o| (o.novelty, o.range_error))
            .collect();
        match ols_line(&pts) {
            Some(fit) => fits.push(fit),
            None => log::debug!("anchor {anchor}: degenerate bias fit, skipped"),
        }
    }
    if fits.is_empty() {
        return Err(Error::DegenerateFit(
            "every anchor has fewer than two distinct novelty values".into(),
        ));
    }
    let k = fits.len() as f64;
    Ok(BiasMap {
        m: fits.iter().map(|f| f.0).sum::<f64>() / k,
        q: fits.iter().map(|f| f.1).sum::<f64>() / k,
        b_max,
    })
}

/// Slope and intercept, or `None` when x has no spread.
fn ols_line(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= f64::EPSILON * mx.abs().max(1.0) * n {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn covariance_endpoints() {
        let map = CovarianceMap::default();
        assert_eq!(map.covariance_of(0.0), 0.001);
        assert_eq!(map.covariance_of(0.25), 0.1);
        assert_eq!(map.covariance_of(0.1), 0.1);
        assert!((map.covariance_of(0.0625) - 0.0505).abs() < 1e-15);
    }

    #[test]
    fn bias_values() {
        let map = BiasMap::default();
        assert_eq!(map.bias_of(0.0), 0.115);
        assert!((map.bias_of(0.2) - 0.292).abs() < 1e-15);
        // saturation begins at (0.5 - 0.115) / 0.885
        let knee: f64 = (0.5 - 0.115) / 0.885;
        assert!((knee - 0.435).abs() < 1e-3);
        assert_eq!(map.bias_of(0.45), 0.5);
    }

    #[test]
    fn invalid_maps() {
        assert!(CovarianceMap {
            sigma2_min: 0.1,
            sigma2_max: 0.01,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(CovarianceMap {
            e_lo: 0.2,
            e_hi: 0.1,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(BiasMap {
            m: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(BiasMap {
            b_max: 0.1,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(CovarianceMap::default().validate().is_ok());
        assert!(BiasMap::default().validate().is_ok());
    }

    fn line(anchor: usize, m: f64, q: f64, xs: &[f64]) -> Vec<BiasObservation> {
        xs.iter()
            .map(|&x| BiasObservation {
                anchor,
                novelty: x,
                range_error: m * x + q,
            })
            .collect()
    }

    #[test]
    fn fit_recovers_exact_line() {
        let obs = line(0, 0.885, 0.115, &[0.0, 0.05, 0.1, 0.2, 0.4]);
        let fit = fit_bias_map(&obs, 0.5).unwrap();
        assert!((fit.m - 0.885).abs() < 1e-12);
        assert!((fit.q - 0.115).abs() < 1e-12);
        assert_eq!(fit.b_max, 0.5);
    }

    #[test]
    fn fit_averages_anchors() {
        let mut obs = line(0, 1.0, 0.1, &[0.0, 0.1, 0.3]);
        obs.extend(line(1, 0.5, 0.3, &[0.05, 0.2, 0.25]));
        let fit = fit_bias_map(&obs, 0.5).unwrap();
        assert!((fit.m - 0.75).abs() < 1e-12);
        assert!((fit.q - 0.2).abs() < 1e-12);
    }

    #[test]
    fn degenerate_anchor_is_excluded() {
        let mut obs = line(0, 1.0, 0.1, &[0.0, 0.1, 0.3]);
        obs.extend(line(1, 7.0, 3.0, &[0.2, 0.2, 0.2]));
        let fit = fit_bias_map(&obs, 0.5).unwrap();
        assert!((fit.m - 1.0).abs() < 1e-12);
        let all_flat = line(0, 1.0, 0.1, &[0.2, 0.2]);
        assert!(matches!(
            fit_bias_map(&all_flat, 0.5),
            Err(Error::DegenerateFit(_))
        ));
        assert!(fit_bias_map(&[], 0.5).is_err());
    }

    proptest! {
        #[test]
        fn maps_monotone_and_bounded(a in 0.0..1.0f64, b in 0.0..1.0f64) {
            let cov = CovarianceMap::default();
            let bias = BiasMap::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(cov.covariance_of(lo) <= cov.covariance_of(hi));
            prop_assert!(bias.bias_of(lo) <= bias.bias_of(hi));
            prop_assert!((cov.sigma2_min..=cov.sigma2_max).contains(&cov.covariance_of(a)));
            prop_assert!((bias.q..=bias.b_max).contains(&bias.bias_of(a)));
        }
    }

    #[test]
    fn maps_continuous_at_breakpoints() {
        let cov = CovarianceMap::default();
        let bias = BiasMap::default();
        let knee = (bias.b_max - bias.q) / bias.m;
        for e in [cov.e_lo, cov.e_hi, knee] {
            let h = 1e-12;
            assert!((cov.covariance_of(e + h) - cov.covariance_of(e - h)).abs() < 1e-9);
            assert!((bias.bias_of(e + h) - bias.bias_of(e - h)).abs() < 1e-9);
        }
    }
}
