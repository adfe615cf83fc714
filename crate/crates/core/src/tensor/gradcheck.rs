//! Central finite-difference validation of tape gradients.

use crate::error::{Error, Result};
use crate::tensor::Param;

/// Outcome of a finite-difference sweep.
#[derive(Clone, Debug)]
pub struct FdReport {
    /// Worst relative error over all checked coordinates.
    pub max_rel_error: f64,
    /// (param name, flat index) of the worst coordinate.
    pub worst: Option<(String, usize)>,
    /// Coordinates skipped because the two one-sided slopes disagree
    /// (non-smooth point, e.g. a ReLU kink).
    pub excluded: Vec<(String, usize)>,
    /// Coordinates compared.
    pub checked: usize,
}

/// Compares `analytic` (one gradient vector per parameter, e.g. harvested
/// from a tape) against central differences of `forward` at step `h`.
///
/// `forward` must be a deterministic function of the parameter values.
/// Coordinates where the forward map is locally non-smooth are excluded and
/// reported rather than failed; non-finite forward values are an error.
pub fn finite_difference_check<F>(
    params: &[Param],
    analytic: &[Vec<f64>],
    mut forward: F,
    h: f64,
) -> Result<FdReport>
where
    F: FnMut(&[Param]) -> Result<f64>,
{
    assert_eq!(params.len(), analytic.len());
    let mut work: Vec<Param> = params.to_vec();
    let mut report = FdReport {
        max_rel_error: 0.0,
        worst: None,
        excluded: Vec::new(),
        checked: 0,
    };

    let base = forward(&work)?;
    if !base.is_finite() {
        return Err(Error::NonFinite("finite_difference_check".into()));
    }

    for pi in 0..work.len() {
        assert_eq!(analytic[pi].len(), params[pi].numel());
        for ci in 0..params[pi].numel() {
            let orig = work[pi].values[ci];
            work[pi].values[ci] = orig + h;
            let f_plus = forward(&work)?;
            work[pi].values[ci] = orig - h;
            let f_minus = forward(&work)?;
            work[pi].values[ci] = orig;
            if !f_plus.is_finite() || !f_minus.is_finite() {
                return Err(Error::NonFinite("finite_difference_check".into()));
            }

            let slope_fwd = (f_plus - base) / h;
            let slope_bwd = (base - f_minus) / h;
            let slope_scale = slope_fwd.abs().max(slope_bwd.abs()).max(1e-3);
            if (slope_fwd - slope_bwd).abs() > 0.05 * slope_scale {
                report.excluded.push((work[pi].name.clone(), ci));
                continue;
            }

            let fd = (f_plus - f_minus) / (2.0 * h);
            let an = analytic[pi][ci];
            let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-5);
            report.checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((work[pi].name.clone(), ci));
            }
        }
    }
    Ok(report)
}
