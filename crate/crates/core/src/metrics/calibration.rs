use super::MetricsError;

pub const DEFAULT_ECE_BINS: usize = 20;

/// Predictions grouped into `M` equal-width confidence bins
/// `[(m-1)/M, m/M)`, the last one closed.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationBins {
    pub counts: Vec<usize>,
    /// Mean correctness per bin (0 for empty bins).
    pub accuracy: Vec<f64>,
    /// Mean confidence per bin (0 for empty bins).
    pub confidence: Vec<f64>,
}

impl CalibrationBins {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// `sum_m |B_m|/N |acc(B_m) - conf(B_m)|`; empty bins contribute nothing.
    pub fn ece(&self) -> f64 {
        let n = self.total() as f64;
        self.counts
            .iter()
            .zip(self.accuracy.iter().zip(&self.confidence))
            .filter(|(c, _)| **c > 0)
            .map(|(c, (a, f))| *c as f64 / n * (a - f).abs())
            .sum()
    }
}

pub fn calibration_bins(confidences: &[f64], correct: &[bool], bins: usize) -> Result<CalibrationBins, MetricsError> {
    if bins == 0 {
        return Err(MetricsError::Bins);
    }
    if confidences.len() != correct.len() {
        return Err(MetricsError::LengthMismatch {
            left: confidences.len(),
            right: correct.len(),
        });
    }
    if confidences.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut members: Vec<Vec<f64>> = vec![Vec::new(); bins];
    let mut hits = vec![0usize; bins];
    for (index, (&c, &ok)) in confidences.iter().zip(correct).enumerate() {
        if !(0.0..=1.0).contains(&c) {
            return Err(MetricsError::Confidence { index });
        }
        let m = ((c * bins as f64).floor() as usize).min(bins - 1);
        members[m].push(c);
        hits[m] += usize::from(ok);
    }
    let mut out = CalibrationBins {
        counts: Vec::with_capacity(bins),
        accuracy: Vec::with_capacity(bins),
        confidence: Vec::with_capacity(bins),
    };
    for (mut confs, hit) in members.into_iter().zip(hits) {
        let count = confs.len();
        out.counts.push(count);
        if count == 0 {
            out.accuracy.push(0.0);
            out.confidence.push(0.0);
            continue;
        }
        // Sorted summation keeps the result independent of input order.
        confs.sort_by(f64::total_cmp);
        out.accuracy.push(hit as f64 / count as f64);
        out.confidence.push(confs.iter().sum::<f64>() / count as f64);
    }
    Ok(out)
}

/// Expected calibration error over `bins` equal-width confidence bins.
pub fn ece(confidences: &[f64], correct: &[bool], bins: usize) -> Result<f64, MetricsError> {
    Ok(calibration_bins(confidences, correct, bins)?.ece())
}
