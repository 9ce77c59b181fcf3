//! Central finite-difference verification of the analytic loss gradients.

use crate::autodiff::Mat;
use crate::graph::JobGraph;
use crate::model::{Mode, Policy, TraceStep};
use crate::PolicyError;

/// Agreement between analytic and numeric gradients of one tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    /// `|analytic - numeric| / max(|analytic|, |numeric|)` in the Euclidean
    /// norm; 0 when both vanish.
    pub relative_error: f64,
    pub analytic_norm: f64,
    pub numeric_norm: f64,
}

fn norm(m: &Mat) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Compares [`Policy::bc_loss`] gradients with central differences of step
/// `eps` for every parameter tensor.
pub fn gradient_check(
    policy: &Policy,
    graphs: &[&JobGraph],
    steps: &[TraceStep<'_>],
    mode: Mode,
    eps: f64,
) -> Result<Vec<TensorCheck>, PolicyError> {
    let analytic = policy.bc_loss(graphs, steps, mode)?.grads;
    let mut probe = policy.clone();
    let mut out = Vec::with_capacity(analytic.len());
    for (t, grad) in analytic.iter().enumerate() {
        let mut numeric = Mat::zeros(grad.raw_dim());
        for idx in 0..grad.len() {
            let original = *probe.params.tensors[t].iter().nth(idx).expect("index in range");
            let mut eval = |value: f64| -> Result<f64, PolicyError> {
                *probe.params.tensors[t].iter_mut().nth(idx).expect("index in range") = value;
                Ok(probe.bc_loss(graphs, steps, mode)?.loss)
            };
            let up = eval(original + eps)?;
            let down = eval(original - eps)?;
            eval(original)?;
            *numeric.iter_mut().nth(idx).expect("index in range") = (up - down) / (2.0 * eps);
        }
        let (an, nn) = (norm(grad), norm(&numeric));
        let scale = an.max(nn);
        let relative_error = if scale == 0.0 { 0.0 } else { norm(&(grad - &numeric)) / scale };
        out.push(TensorCheck { name: policy.params.names[t].clone(), relative_error, analytic_norm: an, numeric_norm: nn });
    }
    Ok(out)
}
