use crate::error::{Error, Result};

/// Outcome of comparing an analytic gradient with central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    /// Largest relative error over coordinates whose interval `x +- eps`
    /// stays on one smooth piece.
    pub max_rel_error: f64,
    /// Coordinate where that error occurred.
    pub worst: usize,
    pub analytic: Vec<f64>,
    /// Central differences at the checked coordinates, in `checked` order.
    pub numeric: Vec<f64>,
    pub checked: Vec<usize>,
    /// Coordinates whose perturbation changed the branch signature; central
    /// differences straddle a kink there and are not compared.
    pub kinked: Vec<usize>,
    /// Largest relative error over the kinked coordinates, for reporting.
    pub kinked_max_rel_error: f64,
}

/// One evaluation of the checked function.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub value: f64,
    /// Analytic gradient; may be left empty when not requested.
    pub grad: Vec<f64>,
    /// Identifies the smooth piece containing the point, see
    /// [`Graph::branch_signature`](super::Graph::branch_signature).
    pub branch: u64,
}

pub fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-8)
}

/// Checks every coordinate of `point`. `f` returns the scalar value and its
/// analytic gradient.
pub fn grad_check<F>(f: F, point: &[f64], eps: f64) -> Result<GradCheck>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let all: Vec<usize> = (0..point.len()).collect();
    grad_check_at(f, point, eps, &all)
}

/// Like [`grad_check`] but only perturbs the listed coordinates.
pub fn grad_check_at<F>(mut f: F, point: &[f64], eps: f64, coords: &[usize]) -> Result<GradCheck>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    grad_check_branched(
        |p, _| {
            let (value, grad) = f(p)?;
            Ok(Sample { value, grad, branch: 0 })
        },
        point,
        eps,
        coords,
    )
}

/// Central-difference check for piecewise smooth functions. `f(p, want_grad)`
/// reports the branch signature of `p`; coordinates whose `+-eps` points sit
/// on a different piece than `point` are listed in `kinked`.
pub fn grad_check_branched<F>(mut f: F, point: &[f64], eps: f64, coords: &[usize]) -> Result<GradCheck>
where
    F: FnMut(&[f64], bool) -> Result<Sample>,
{
    if !(eps > 0.0) {
        return Err(Error::usage("finite-difference step must be positive"));
    }
    let base = f(point, true)?;
    let again = f(point, true)?;
    if base.value.to_bits() != again.value.to_bits()
        || base.branch != again.branch
        || base.grad.iter().zip(&again.grad).any(|(a, b)| a.to_bits() != b.to_bits())
    {
        return Err(Error::usage(
            "function is not deterministic at a fixed point; disable dropout and fix the seed",
        ));
    }
    let analytic = base.grad;
    if analytic.len() != point.len() {
        return Err(Error::usage(format!(
            "gradient has {} entries for a point of {}",
            analytic.len(),
            point.len()
        )));
    }
    if let Some(&bad) = coords.iter().find(|&&i| i >= point.len()) {
        return Err(Error::usage(format!("coordinate {bad} outside a point of {}", point.len())));
    }
    let mut x = point.to_vec();
    let mut numeric = Vec::with_capacity(coords.len());
    let mut kinked = Vec::new();
    let (mut max_rel_error, mut kinked_max_rel_error) = (0.0f64, 0.0f64);
    let mut worst = coords.first().copied().unwrap_or(0);
    for &i in coords {
        let orig = x[i];
        x[i] = orig + eps;
        let fp = f(&x, false)?;
        x[i] = orig - eps;
        let fm = f(&x, false)?;
        x[i] = orig;
        let n = (fp.value - fm.value) / (2.0 * eps);
        let e = rel_error(analytic[i], n);
        if fp.branch != base.branch || fm.branch != base.branch {
            kinked.push(i);
            kinked_max_rel_error = kinked_max_rel_error.max(e);
        } else if e > max_rel_error || e.is_nan() {
            max_rel_error = e;
            worst = i;
        }
        numeric.push(n);
    }
    Ok(GradCheck {
        max_rel_error,
        worst,
        analytic,
        numeric,
        checked: coords.to_vec(),
        kinked,
        kinked_max_rel_error,
    })
}
