//! Central finite-difference gradient checking.
//!
//! The checker never touches the tape: it re-evaluates the supplied loss
//! closure at perturbed parameter values, so it is an independent oracle
//! for whatever backward produced the analytic gradients.

use super::{Array, ParamSet, TensorError};

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err < tol
    }
}

/// Compare `analytic` gradients against central differences of `loss_fn`.
///
/// Relative error per element is |a - n| / max(|a|, |n|, 1).
pub fn check_gradients<F>(
    params: &ParamSet,
    analytic: &[(String, Array)],
    mut loss_fn: F,
    h: f64,
) -> Result<GradCheckReport, TensorError>
where
    F: FnMut(&ParamSet) -> Result<f64, TensorError>,
{
    let mut work = params.clone();
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        checked: 0,
    };
    for (name, grad) in analytic {
        let n_elems = grad.numel();
        for i in 0..n_elems {
            let orig = work
                .get(name)
                .ok_or_else(|| TensorError::Argument(format!("unknown parameter {name}")))?
                .data[i];
            work.get_mut(name).unwrap().data[i] = orig + h;
            let up = loss_fn(&work)?;
            work.get_mut(name).unwrap().data[i] = orig - h;
            let down = loss_fn(&work)?;
            work.get_mut(name).unwrap().data[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = grad.data[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1.0);
            report.checked += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst_param = name.clone();
                report.worst_index = i;
            }
        }
    }
    Ok(report)
}
