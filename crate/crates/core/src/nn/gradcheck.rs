//! Central finite-difference gradient checking.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{ParamStore, Params};

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    pub eps: f64,
    /// Upper bound on checked coordinates; at least 100 are checked (or all
    /// when fewer exist). Every tensor contributes at least one coordinate.
    pub max_coords: usize,
    pub seed: u64,
    /// Denominator floor: gradients smaller than this are compared in
    /// absolute terms.
    pub floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { eps: 1e-5, max_coords: 400, seed: 0, floor: 1e-3 }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// `(parameter, index, analytic, numeric)` of the worst coordinate.
    pub worst: Option<(String, usize, f64, f64)>,
}

/// Compares the analytic gradient written by `loss` into its gradient
/// argument against central differences of the loss value.
///
/// `loss(values, Some(grads))` must accumulate gradients into `grads`;
/// `loss(values, None)` only evaluates.
pub fn grad_check<F>(store: &mut ParamStore, mut loss: F, cfg: &GradCheckConfig) -> Result<GradCheckReport>
where
    F: FnMut(&Params, Option<&mut Params>) -> Result<f64>,
{
    store.zero_grad();
    let base = {
        let (values, grads) = store.split_mut();
        loss(values, Some(grads))?
    };
    if !base.is_finite() {
        return Err(Error::NonFinite(format!("loss = {base}")));
    }
    let analytic = store.grads.clone();

    let tensors: Vec<(String, usize)> = store.values.iter().map(|(n, t)| (n.clone(), t.len())).collect();
    let total: usize = tensors.iter().map(|(_, n)| n).sum();
    let budget = cfg.max_coords.max(100);
    let mut coords: Vec<(String, usize)> = Vec::new();
    if total <= budget {
        for (name, n) in &tensors {
            coords.extend((0..*n).map(|i| (name.clone(), i)));
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let per_tensor = (budget / tensors.len()).max(1);
        for (name, n) in &tensors {
            let k = per_tensor.min(*n);
            let mut picked: Vec<usize> = sample(&mut rng, *n, k).into_vec();
            picked.sort_unstable();
            coords.extend(picked.into_iter().map(|i| (name.clone(), i)));
        }
    }

    let mut report = GradCheckReport { max_rel_error: 0.0, checked: 0, worst: None };
    for (name, idx) in coords {
        let orig = store.values[name.as_str()].data()[idx];
        store.values.get_mut(&name).expect("known").data_mut()[idx] = orig + cfg.eps;
        let plus = loss(&store.values, None)?;
        store.values.get_mut(&name).expect("known").data_mut()[idx] = orig - cfg.eps;
        let minus = loss(&store.values, None)?;
        store.values.get_mut(&name).expect("known").data_mut()[idx] = orig;
        if !(plus.is_finite() && minus.is_finite()) {
            return Err(Error::NonFinite(format!("perturbed loss at {name}[{idx}]")));
        }
        let numeric = (plus - minus) / (2.0 * cfg.eps);
        let a = analytic[name.as_str()].data()[idx];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(cfg.floor);
        report.checked += 1;
        if rel > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = report.max_rel_error.max(rel);
            report.worst = Some((name, idx, a, numeric));
        }
    }
    store.grads = analytic;
    Ok(report)
}
