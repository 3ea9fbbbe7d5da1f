//! Central finite-difference verification of analytic gradients.

use crate::scalar::Scalar;

/// Worst-case disagreement between an analytic gradient and central finite
/// differences.
#[derive(Debug, Clone)]
pub struct GradReport {
    pub max_abs_err: f64,
    pub max_rel_err: f64,
    /// Coordinate with the worst relative error, e.g. `conv1.weight[17]`.
    pub worst_path: String,
}

/// Denominator floor for the relative error: coordinates whose analytic and
/// numeric gradients are both below this magnitude are compared absolutely at
/// this scale, keeping finite-difference noise on near-zero entries from
/// dominating the report.
pub const REL_FLOOR: f64 = 1e-3;

/// Checks `analytic` against `(f(x+eps*e_i) - f(x-eps*e_i)) / (2*eps)` for
/// every coordinate. `segments` names contiguous coordinate ranges (layer
/// parameter tensors, inputs) for the report; pass one segment covering all
/// of `x` when no finer naming is useful.
pub fn finite_diff_check<S: Scalar>(
    mut f: impl FnMut(&[S]) -> S,
    x: &[S],
    analytic: &[S],
    eps: S,
    segments: &[(&str, usize)],
) -> GradReport {
    assert_eq!(
        x.len(),
        analytic.len(),
        "analytic gradient length must match input"
    );
    assert!(eps > S::zero(), "eps must be positive");
    let total: usize = segments.iter().map(|(_, n)| n).sum();
    assert_eq!(total, x.len(), "segments must cover the input exactly");

    let mut xbuf = x.to_vec();
    let mut report = GradReport {
        max_abs_err: 0.0,
        max_rel_err: 0.0,
        worst_path: String::new(),
    };
    for i in 0..x.len() {
        let orig = xbuf[i];
        xbuf[i] = orig + eps;
        let fp = f(&xbuf).to_f64_lossy();
        xbuf[i] = orig - eps;
        let fm = f(&xbuf).to_f64_lossy();
        xbuf[i] = orig;

        let numeric = (fp - fm) / (2.0 * eps.to_f64_lossy());
        let a = analytic[i].to_f64_lossy();
        let abs = (a - numeric).abs();
        let rel = abs / a.abs().max(numeric.abs()).max(REL_FLOOR);
        if abs > report.max_abs_err {
            report.max_abs_err = abs;
        }
        if rel >= report.max_rel_err {
            report.max_rel_err = rel;
            report.worst_path = coordinate_path(segments, i);
        }
    }
    report
}

fn coordinate_path(segments: &[(&str, usize)], mut i: usize) -> String {
    for (name, n) in segments {
        if i < *n {
            return format!("{name}[{i}]");
        }
        i -= n;
    }
    format!("<out of range {i}>")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_op_is_exact() {
        // f(x) = x0 + x1 + x2, gradient all ones. The map is linear, so a
        // coarse step has no truncation error and rounding stays far below
        // the bound.
        let x = [0.3, -1.2, 2.0];
        let analytic = [1.0, 1.0, 1.0];
        let r = finite_diff_check(
            |v: &[f64]| v.iter().sum(),
            &x,
            &analytic,
            1e-2,
            &[("x", 3)],
        );
        assert!(r.max_abs_err <= 1e-12, "abs {}", r.max_abs_err);
    }

    #[test]
    fn catches_a_wrong_gradient() {
        let x = [0.5];
        let analytic = [2.0]; // true gradient of x^2 at 0.5 is 1.0
        let r = finite_diff_check(|v: &[f64]| v[0] * v[0], &x, &analytic, 1e-4, &[("x", 1)]);
        assert!(r.max_rel_err > 0.1);
        assert_eq!(r.worst_path, "x[0]");
    }
}
