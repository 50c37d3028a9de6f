use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Mean and sample standard deviation (n - 1 denominator; zero for one value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

pub fn mean_std(values: &[f64]) -> Result<MeanStd> {
    if values.is_empty() {
        return Err(Error::Statistics("mean of an empty sample".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Ok(MeanStd { mean, std })
}

/// Sample Pearson correlation and its two-sided p-value from the t statistic
/// with `n - 2` degrees of freedom.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::Statistics(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::Statistics(format!("need at least 3 pairs, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Statistics("non-finite sample value".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Statistics("zero variance".into()));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    if r.abs() == 1.0 {
        return Ok((r, 0.0));
    }
    let df = n - 2.0;
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Statistics(e.to_string()))?;
    Ok((r, (2.0 * dist.sf(t.abs())).min(1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identical_samples_correlate_perfectly() {
        let x = [1.0, 2.0, 4.0, 8.0];
        assert_eq!(pearson(&x, &x).unwrap(), (1.0, 0.0));
    }

    #[test]
    fn zero_variance_is_an_error() {
        assert!(matches!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::Statistics(_))));
        assert!(pearson(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn uncorrelated_has_p_one() {
        let (r, p) = pearson(&[-1.0, 0.0, 1.0], &[1.0, 0.0, 1.0]).unwrap();
        assert_eq!(r, 0.0);
        assert_relative_eq!(p, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn three_points_p_matches_cauchy() {
        // One degree of freedom: t is Cauchy, p = 1 - (2/pi) atan|t|.
        let (r, p) = pearson(&[0.0, 1.0, 2.0], &[0.0, 2.0, 1.0]).unwrap();
        assert_relative_eq!(r, 0.5, epsilon = 1e-12);
        let t = r * (1.0 / (1.0 - r * r)).sqrt();
        assert_relative_eq!(p, 1.0 - 2.0 / std::f64::consts::PI * t.atan(), epsilon = 1e-12);
    }

    #[test]
    fn mean_std_sample_convention() {
        let s = mean_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).unwrap();
        assert_eq!(s.mean, 5.0);
        assert_relative_eq!(s.std, (32.0f64 / 7.0).sqrt(), epsilon = 1e-12);
        assert_eq!(mean_std(&[3.0]).unwrap().std, 0.0);
        assert!(mean_std(&[]).is_err());
    }
}
