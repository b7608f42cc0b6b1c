//! Central finite-difference verification of analytic gradients.

use crate::engine::Tensor;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// `(f(θ + eps·e_i) - f(θ - eps·e_i)) / 2eps` for one coordinate.
pub fn central_difference<F>(loss: &mut F, params: &mut [Tensor], tensor: usize, index: usize, eps: f64) -> Result<f64>
where
    F: FnMut(&[Tensor]) -> Result<f64>,
{
    let orig = params[tensor].data()[index];
    params[tensor].data_mut()[index] = orig + eps;
    let plus = loss(params);
    params[tensor].data_mut()[index] = orig - eps;
    let minus = loss(params);
    params[tensor].data_mut()[index] = orig;
    let (plus, minus) = (plus?, minus?);
    if !plus.is_finite() || !minus.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite loss while perturbing tensor {tensor} index {index}"
        )));
    }
    Ok((plus - minus) / (2.0 * eps))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// Max relative error per parameter tensor.
    pub per_tensor: Vec<f64>,
    /// Coordinates checked per tensor.
    pub checked: Vec<usize>,
}

impl GradCheckReport {
    pub fn max_error(&self) -> f64 {
        self.per_tensor.iter().copied().fold(0.0, f64::max)
    }
}

/// Compares `analytic` gradients against central differences of `loss`.
///
/// Tensors with more than `max_coords` entries are checked on a random
/// subset of that many distinct coordinates drawn from `rng`.
pub fn grad_check<F>(
    mut loss: F,
    params: &mut [Tensor],
    analytic: &[Tensor],
    eps: f64,
    max_coords: usize,
    rng: &mut Rng,
) -> Result<GradCheckReport>
where
    F: FnMut(&[Tensor]) -> Result<f64>,
{
    if params.len() != analytic.len() || params.iter().zip(analytic).any(|(p, a)| !p.same_shape(a)) {
        return Err(Error::Shape("gradients are not congruent with parameters".into()));
    }
    let base = loss(params)?;
    if !base.is_finite() {
        return Err(Error::Numeric("non-finite loss at the check point".into()));
    }
    let mut per_tensor = Vec::with_capacity(params.len());
    let mut checked = Vec::with_capacity(params.len());
    for t in 0..params.len() {
        let n = params[t].len();
        let mut coords: Vec<usize> = (0..n).collect();
        if n > max_coords {
            rng.shuffle(&mut coords);
            coords.truncate(max_coords);
            coords.sort_unstable();
        }
        let mut worst: f64 = 0.0;
        for &i in &coords {
            let numeric = central_difference(&mut loss, params, t, i, eps)?;
            worst = worst.max(relative_error(analytic[t].data()[i], numeric));
        }
        per_tensor.push(worst);
        checked.push(coords.len());
    }
    Ok(GradCheckReport { per_tensor, checked })
}
