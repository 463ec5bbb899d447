use super::{GraphError, Network};
use crate::scalar::Real;

/// Outcome of comparing reverse-mode gradients with central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// `max |analytic - numeric| / (|analytic| + h)` over compared coordinates.
    pub max_rel_error: f64,
    pub compared: usize,
    /// Coordinates whose `±h` probes cross a leaky-ReLU kink.
    pub excluded: usize,
}

/// Central difference `(f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate.
pub fn central_difference<T: Real, F>(f: F, x: &[T], h: T) -> Vec<T>
where
    F: Fn(&[T]) -> T,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (h + h)
        })
        .collect()
}

/// Checks input and parameter gradients of `<cotangent, net(x)>` against
/// central differences with step `h`.
pub fn finite_diff_check<T: Real>(
    net: &Network<T>,
    x: &[T],
    h: T,
    cotangent: Option<&[T]>,
) -> Result<GradCheckReport, GraphError> {
    assert!(h > T::zero(), "finite difference step must be positive");
    let outputs = net.output_len();
    let cot: Vec<T> = match cotangent {
        Some(c) => c.to_vec(),
        None => vec![T::one(); outputs],
    };
    let eval = net.forward_backward(x, Some(&cot))?;
    let objective = |n: &Network<T>, x: &[T]| -> Result<T, GraphError> {
        Ok(n.forward(x)?.iter().zip(&cot).map(|(a, b)| *a * *b).sum())
    };
    let base_pattern = net.activation_pattern(x)?;

    let mut report = Accum::default();
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = objective(net, &probe)?;
        let up_pattern = net.activation_pattern(&probe)?;
        probe[i] = orig - h;
        let down = objective(net, &probe)?;
        let down_pattern = net.activation_pattern(&probe)?;
        probe[i] = orig;
        let smooth = up_pattern == base_pattern && down_pattern == base_pattern;
        report.record(eval.grad_input[i], (up - down) / (h + h), h, smooth);
    }

    let mut shifted = net.clone();
    for t in 0..net.params().len() {
        for j in 0..net.params().tensors()[t].len() {
            let orig = net.params().tensors()[t].values()[j];
            shifted.params_mut().tensors_mut()[t].values_mut()[j] = orig + h;
            let up = objective(&shifted, x)?;
            let up_pattern = shifted.activation_pattern(x)?;
            shifted.params_mut().tensors_mut()[t].values_mut()[j] = orig - h;
            let down = objective(&shifted, x)?;
            let down_pattern = shifted.activation_pattern(x)?;
            shifted.params_mut().tensors_mut()[t].values_mut()[j] = orig;
            let smooth = up_pattern == base_pattern && down_pattern == base_pattern;
            let analytic = eval.grad_params.tensors()[t].values()[j];
            report.record(analytic, (up - down) / (h + h), h, smooth);
        }
    }
    Ok(report.finish())
}

#[derive(Default)]
struct Accum {
    max: f64,
    compared: usize,
    excluded: usize,
}

impl Accum {
    fn record<T: Real>(&mut self, analytic: T, numeric: T, h: T, comparable: bool) {
        if !comparable {
            self.excluded += 1;
            return;
        }
        self.compared += 1;
        let err = ((analytic - numeric).abs() / (analytic.abs() + h)).to_f64_lossy();
        if err > self.max || err.is_nan() {
            self.max = err;
        }
    }

    fn finish(self) -> GradCheckReport {
        GradCheckReport {
            max_rel_error: self.max,
            compared: self.compared,
            excluded: self.excluded,
        }
    }
}
