use super::MetricsError;

/// Published projected step counts for `eps = k/255`, `k = 0..=11`.
pub const REFERENCE_PROJECTION: [(u32, u32); 12] = [
    (0, 338),
    (1, 300),
    (2, 450),
    (3, 348),
    (4, 380),
    (5, 247),
    (6, 422),
    (7, 655),
    (8, 553),
    (9, 651),
    (10, 503),
    (11, 419),
];

/// `post_error / clean_baseline_error`; 1 means purification fully restores
/// clean performance.
pub fn relative_error(post_error: f64, clean_baseline_error: f64) -> Result<f64, MetricsError> {
    if clean_baseline_error == 0.0 {
        return Err(MetricsError::ZeroBaseline);
    }
    Ok(post_error / clean_baseline_error)
}

/// Least-squares line `ln(error) = intercept + slope * n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendFit {
    pub slope: f64,
    pub intercept: f64,
    /// Euclidean norm of the log-space residuals.
    pub residual: f64,
    pub points: usize,
}

impl TrendFit {
    pub fn predict(&self, n: f64) -> f64 {
        (self.intercept + self.slope * n).exp()
    }
}

pub fn fit_decay(ns: &[f64], errors: &[f64]) -> Result<TrendFit, MetricsError> {
    if ns.len() != errors.len() {
        return Err(MetricsError::LengthMismatch {
            left: ns.len(),
            right: errors.len(),
        });
    }
    if let Some(index) = errors.iter().position(|e| !(*e > 0.0)) {
        return Err(MetricsError::NonPositive { index });
    }
    if ns.iter().all(|n| *n == ns.first().copied().unwrap_or(0.0)) {
        return Err(MetricsError::Degenerate);
    }
    let k = ns.len() as f64;
    let logs: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let mean_n = ns.iter().sum::<f64>() / k;
    let mean_l = logs.iter().sum::<f64>() / k;
    let sxx: f64 = ns.iter().map(|n| (n - mean_n) * (n - mean_n)).sum();
    let sxy: f64 = ns.iter().zip(&logs).map(|(n, l)| (n - mean_n) * (l - mean_l)).sum();
    let slope = sxy / sxx;
    let intercept = mean_l - slope * mean_n;
    let residual = ns
        .iter()
        .zip(&logs)
        .map(|(n, l)| (l - intercept - slope * n).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(TrendFit {
        slope,
        intercept,
        residual,
        points: ns.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    /// Fitted relative error reaches 1 at this many Langevin steps.
    Steps(u64),
    /// The fit does not decrease, so it never reaches 1.
    NoPurification,
}

/// Solves `exp(intercept + slope n) = 1` for a fit of relative error.
pub fn project_full_purification(fit: &TrendFit) -> Projection {
    if !(fit.slope < 0.0) {
        return Projection::NoPurification;
    }
    let n = -fit.intercept / fit.slope;
    if n <= 0.0 {
        Projection::Steps(0)
    } else {
        Projection::Steps(n.round() as u64)
    }
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties. `None` when either
/// side is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let rx = ranks(xs);
    let ry = ranks(ys);
    let k = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / k;
    let my = ry.iter().sum::<f64>() / k;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_exponential_is_recovered() {
        let ns: [f64; 3] = [50.0, 100.0, 200.0];
        let errs: Vec<f64> = ns.iter().map(|n| (2.0 - 0.01 * n).exp()).collect();
        let f = fit_decay(&ns, &errs).unwrap();
        assert!((f.slope + 0.01).abs() < 1e-12);
        assert!((f.intercept - 2.0).abs() < 1e-12);
        assert!(f.residual < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(
            fit_decay(&[5.0, 5.0], &[0.1, 0.2]).unwrap_err(),
            MetricsError::Degenerate
        );
        assert_eq!(
            fit_decay(&[5.0, 6.0], &[0.1, 0.0]).unwrap_err(),
            MetricsError::NonPositive { index: 1 }
        );
        assert_eq!(fit_decay(&[1.0, 2.0, 3.0], &[0.3; 3]).unwrap().slope, 0.0);
        assert_eq!(relative_error(0.3, 0.0).unwrap_err(), MetricsError::ZeroBaseline);
        assert_eq!(relative_error(0.1, 0.1).unwrap(), 1.0);
        assert!((relative_error(0.3, 0.1).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn projection_cases() {
        let fit = |slope, intercept| TrendFit {
            slope,
            intercept,
            residual: 0.0,
            points: 3,
        };
        assert_eq!(project_full_purification(&fit(-0.005, 0.5)), Projection::Steps(100));
        assert_eq!(project_full_purification(&fit(-0.005, -0.1)), Projection::Steps(0));
        assert_eq!(project_full_purification(&fit(0.0, 0.5)), Projection::NoPurification);
    }

    #[test]
    fn spearman_basics() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]), None);
        let r = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.8).abs() < 1e-12);
    }
}
