use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Least-squares line y ≈ intercept + slope·x with a 95% interval on the slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Root mean square of the (weighted) residuals.
    pub residual_rms: f64,
    pub n: usize,
}

/// Two-sided 95% Student-t quantile; infinite without degrees of freedom.
pub(crate) fn t_quantile(dof: f64) -> f64 {
    if dof < 1.0 {
        return f64::INFINITY;
    }
    StudentsT::new(0.0, 1.0, dof).map(|t| t.inverse_cdf(0.975)).unwrap_or(f64::INFINITY)
}

/// Weighted least squares; `w = None` weighs every point equally. Needs at
/// least two distinct x values.
pub fn fit_line(x: &[f64], y: &[f64], w: Option<&[f64]>) -> LineFit {
    let n = x.len();
    assert_eq!(n, y.len());
    let weight = |i: usize| w.map_or(1.0, |w| w[i]);
    let sw: f64 = (0..n).map(weight).sum();
    let xm = (0..n).map(|i| weight(i) * x[i]).sum::<f64>() / sw;
    let ym = (0..n).map(|i| weight(i) * y[i]).sum::<f64>() / sw;
    let sxx: f64 = (0..n).map(|i| weight(i) * (x[i] - xm).powi(2)).sum();
    let sxy: f64 = (0..n).map(|i| weight(i) * (x[i] - xm) * (y[i] - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ssr: f64 = (0..n).map(|i| weight(i) * (y[i] - intercept - slope * x[i]).powi(2)).sum();
    // Effective sample size keeps the variance honest under uneven weights.
    let sw2: f64 = (0..n).map(|i| weight(i).powi(2)).sum();
    let n_eff = sw * sw / sw2;
    let dof = n_eff - 2.0;
    let sigma2 = if dof > 0.0 { ssr / sw * n_eff / dof } else { f64::INFINITY };
    let slope_stderr = (sigma2 * sw / n_eff / sxx).sqrt();
    let half = t_quantile(dof) * slope_stderr;
    LineFit {
        slope,
        intercept,
        slope_stderr,
        ci_low: slope - half,
        ci_high: slope + half,
        residual_rms: (ssr / sw).sqrt(),
        n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_has_zero_residual() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|x| 2.0 - 0.5 * x).collect();
        let f = fit_line(&x, &y, None);
        assert!((f.slope + 0.5).abs() < 1e-14 && (f.intercept - 2.0).abs() < 1e-14);
        assert!(f.residual_rms < 1e-14 && f.ci_high - f.ci_low < 1e-12);
    }

    #[test]
    fn interval_matches_textbook_ols() {
        // Sxx = 10, Sxy = 9, three degrees of freedom, t(3; 0.975) = 3.182446305284263.
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [1.0, 2.0, 3.0, 3.0, 5.0];
        let f = fit_line(&x, &y, None);
        assert!((f.slope - 0.9).abs() < 1e-12, "{}", f.slope);
        let resid: Vec<f64> = x.iter().zip(&y).map(|(x, y)| y - (f.intercept + f.slope * x)).collect();
        let s2 = resid.iter().map(|r| r * r).sum::<f64>() / 3.0;
        let se = (s2 / 10.0).sqrt();
        assert!((f.slope_stderr - se).abs() < 1e-12);
        assert!((f.ci_high - f.slope - 3.182446305284263 * se).abs() < 1e-8);
    }

    #[test]
    fn uniform_weights_match_unweighted() {
        let x = [0.0, 1.0, 2.5, 4.0, 7.0];
        let y = [0.3, 1.1, 2.0, 4.4, 6.1];
        let a = fit_line(&x, &y, None);
        let b = fit_line(&x, &y, Some(&[3.0; 5]));
        assert!((a.slope - b.slope).abs() < 1e-14 && (a.slope_stderr - b.slope_stderr).abs() < 1e-14);
    }
}
