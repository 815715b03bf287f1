//! Least-squares slopes on log-log data.

use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% confidence interval of the slope.
    pub ci95: (f64, f64),
    pub used: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitOutcome {
    Fitted(SlopeFit),
    /// Fewer than three usable rows remained.
    Undefined { used: usize, excluded: usize },
}

impl FitOutcome {
    pub fn slope(&self) -> Option<f64> {
        match self {
            FitOutcome::Fitted(f) => Some(f.slope),
            FitOutcome::Undefined { .. } => None,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            FitOutcome::Fitted(f) => format!(
                "slope {:.4} (95% CI [{:.4}, {:.4}]), {} rows used, {} excluded",
                f.slope, f.ci95.0, f.ci95.1, f.used, f.excluded
            ),
            FitOutcome::Undefined { used, excluded } => {
                format!("slope undefined: {used} usable rows (need 3), {excluded} excluded")
            }
        }
    }
}

/// Fits `log y = a + s log x`, dropping rows with nonpositive or non-finite
/// values and rows with `y < 10·noise_floor`.
pub fn fit_loglog(xs: &[f64], ys: &[f64], noise_floor: f64) -> FitOutcome {
    assert_eq!(xs.len(), ys.len());
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && y.is_finite() && **y > 0.0 && **y >= 10.0 * noise_floor)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let used = pts.len();
    let excluded = xs.len() - used;
    if used < 3 {
        return FitOutcome::Undefined { used, excluded };
    }
    let n = used as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return FitOutcome::Undefined { used, excluded };
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let dof = n - 2.0;
    let se = (sse / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof).expect("dof >= 1").inverse_cdf(0.975);
    FitOutcome::Fitted(SlopeFit { slope, intercept, ci95: (slope - t * se, slope + t * se), used, excluded })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let xs = [0.4, 0.3, 0.2, 0.15, 0.1];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powi(6)).collect();
        let f = fit_loglog(&xs, &ys, 0.0);
        let FitOutcome::Fitted(f) = f else { panic!() };
        assert!((f.slope - 6.0).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!((f.ci95.1 - f.ci95.0).abs() < 1e-9);
    }

    #[test]
    fn noise_floor_and_minimum_rows() {
        let xs = [0.4, 0.2, 0.1, 0.05];
        let ys = [1e-6, 1e-8, 1e-13, 0.0];
        assert_eq!(fit_loglog(&xs, &ys, 1e-13), FitOutcome::Undefined { used: 2, excluded: 2 });
        let noisy = [1.0, 0.26, 0.06, 0.016];
        let FitOutcome::Fitted(f) = fit_loglog(&xs, &noisy, 1e-13) else { panic!() };
        assert!(f.ci95.0 < f.slope && f.slope < f.ci95.1);
        assert!((f.slope - 2.0).abs() < 0.1);
    }
}
