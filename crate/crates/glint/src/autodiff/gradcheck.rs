use thiserror::Error;

use super::store::ParameterStore;
use super::tape::fresh_tape;
use super::var::{backward_into, Var};

#[derive(Debug, Error)]
pub enum GradCheckError {
    #[error("objective returned non-finite value {value} at baseline")]
    NonFiniteLoss { value: f64 },
    #[error("objective returned non-finite value {value} perturbing {group}[{index}]")]
    NonFinite { group: String, index: usize, value: f64 },
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_group: String,
    pub worst_index: usize,
    /// Tape gradient and central difference at the worst parameter.
    pub worst_pair: (f64, f64),
    pub checked: usize,
}

/// Relative error with an absolute floor: parameters where both gradients
/// are below the floor count as exact.
fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    let denom = a.abs().max(b.abs());
    if denom < floor {
        0.0
    } else {
        (a - b).abs() / denom
    }
}

/// Compare the tape gradient of `f` against central finite differences
/// `(f(p+eps) - f(p-eps)) / (2 eps)` for every parameter of every
/// non-frozen group.
pub fn grad_check(
    store: &mut ParameterStore,
    f: impl Fn(&ParameterStore) -> Var,
    eps: f64,
) -> Result<GradCheckReport, GradCheckError> {
    fresh_tape();
    let loss = f(store);
    if !loss.value().is_finite() {
        return Err(GradCheckError::NonFiniteLoss { value: loss.value() });
    }
    let mut grads = store.grad_buffer();
    backward_into(loss, store, &mut grads);

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_group: String::new(),
        worst_index: 0,
        worst_pair: (0.0, 0.0),
        checked: 0,
    };
    for id in store.group_ids() {
        if store.is_frozen(id) {
            continue;
        }
        for i in 0..store.len(id) {
            let original = store.values(id)[i];
            store.values_mut(id)[i] = original + eps;
            fresh_tape();
            let plus = f(store).value();
            store.values_mut(id)[i] = original - eps;
            fresh_tape();
            let minus = f(store).value();
            store.values_mut(id)[i] = original;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(GradCheckError::NonFinite {
                    group: store.group_name(id).to_string(),
                    index: i,
                    value: if plus.is_finite() { minus } else { plus },
                });
            }
            let fd = (plus - minus) / (2.0 * eps);
            let tape_grad = grads.group(id)[i];
            let err = rel_err(tape_grad, fd, 1e-7);
            report.checked += 1;
            if err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst_group = store.group_name(id).to_string();
                report.worst_index = i;
                report.worst_pair = (tape_grad, fd);
            }
        }
    }
    Ok(report)
}
