use super::{AutodiffError, Tape, Tensor, Var};
use crate::scalar::Real;

/// Outcome of a finite-difference comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    /// Largest elementwise `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates where one-sided differences disagree (a kink); not compared.
    pub skipped_kinks: usize,
}

/// Compares the reverse-mode gradient of `f` at `point` against central
/// differences with step `step`.
///
/// `f` builds a scalar from its input node on a fresh tape. Any evaluation
/// failure or non-finite intermediate reports an infinite error.
pub fn check_gradient<T, F>(f: F, point: &Tensor<T>, step: T) -> GradientCheck
where
    T: Real,
    F: Fn(&mut Tape<T>, Var) -> Result<Var, AutodiffError>,
{
    let failed = GradientCheck {
        max_rel_error: f64::INFINITY,
        checked: 0,
        skipped_kinks: 0,
    };
    assert!(step > T::zero(), "finite-difference step must be positive");

    let eval = |p: &Tensor<T>| -> Option<T> {
        let mut tape = Tape::new();
        let x = tape.leaf(p.clone());
        let y = f(&mut tape, x).ok()?;
        let v = tape.value(y);
        (v.is_scalar() && v.item().is_finite()).then(|| v.item())
    };

    let analytic = {
        let mut tape = Tape::new();
        let x = tape.leaf(point.clone());
        let Ok(y) = f(&mut tape, x) else { return failed };
        match tape.grad(y, &[x]) {
            Ok(mut g) => g.remove(0),
            Err(_) => return failed,
        }
    };
    let Some(f0) = eval(point) else { return failed };

    let mut report = GradientCheck {
        max_rel_error: 0.0,
        checked: 0,
        skipped_kinks: 0,
    };
    let two = T::lit(2.0);
    for i in 0..point.len() {
        let shifted = |delta: T| {
            let mut v = point.values().to_vec();
            v[i] = v[i] + delta;
            Tensor::new(point.shape().to_vec(), v).ok()
        };
        let (Some(plus), Some(minus)) = (shifted(step), shifted(-step)) else {
            return failed;
        };
        let (Some(fp), Some(fm)) = (eval(&plus), eval(&minus)) else {
            return failed;
        };
        let forward = ((fp - f0) / step).as_f64();
        let backward = ((f0 - fm) / step).as_f64();
        let scale = forward.abs().max(backward.abs()).max(1.0);
        if (forward - backward).abs() > 0.5 * scale {
            report.skipped_kinks += 1;
            continue;
        }
        let numeric = ((fp - fm) / (two * step)).as_f64();
        let a = analytic.values()[i].as_f64();
        let denom = a.abs().max(numeric.abs()).max(1e-8);
        let err = (a - numeric).abs() / denom;
        if !err.is_finite() {
            return failed;
        }
        report.max_rel_error = report.max_rel_error.max(err);
        report.checked += 1;
    }
    report
}
