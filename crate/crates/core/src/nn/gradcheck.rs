//! Centred finite-difference gradient checking.

/// A scalar function of a parameter vector together with its claimed gradient.
pub struct CheckTarget<'a> {
    pub f: &'a mut dyn FnMut(&[f64]) -> f64,
    pub analytic: &'a [f64],
    pub theta: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub checked: usize,
}

/// Relative error with the denominator floored at `1e-8`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares `analytic` against `(f(θ+h e_i) − f(θ−h e_i)) / 2h` on the
/// coordinates in `coords` (all coordinates when `None`).
pub fn grad_check(target: CheckTarget<'_>, coords: Option<&[usize]>, h: f64) -> GradCheckReport {
    let CheckTarget { f, analytic, theta } = target;
    assert_eq!(analytic.len(), theta.len(), "gradient and parameter lengths differ");
    let all: Vec<usize>;
    let coords = match coords {
        Some(c) => c,
        None => {
            all = (0..theta.len()).collect();
            &all
        }
    };
    let mut work = theta.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        checked: 0,
    };
    for &i in coords {
        let orig = work[i];
        work[i] = orig + h;
        let plus = f(&work);
        work[i] = orig - h;
        let minus = f(&work);
        work[i] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        let err = relative_error(analytic[i], numeric);
        if err > report.max_rel_error || report.checked == 0 {
            report.max_rel_error = err;
            report.worst_index = i;
        }
        report.checked += 1;
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_accurate() {
        let r = grad_check(
            CheckTarget {
                f: &mut |t: &[f64]| t[0] * t[0],
                analytic: &[6.0],
                theta: &[3.0],
            },
            None,
            1e-5,
        );
        assert!(r.max_rel_error < 1e-9, "{r:?}");
    }

    #[test]
    fn linear_is_exact() {
        let r = grad_check(
            CheckTarget {
                f: &mut |t: &[f64]| 2.0 * t[0] - 0.5 * t[1],
                analytic: &[2.0, -0.5],
                theta: &[1.0, 4.0],
            },
            None,
            1e-3,
        );
        assert!(r.max_rel_error < 1e-12, "{r:?}");
    }

    #[test]
    fn wrong_gradient_is_flagged() {
        let r = grad_check(
            CheckTarget {
                f: &mut |t: &[f64]| t[0] * t[0] + t[1],
                analytic: &[2.0, 1.0],
                theta: &[3.0, 0.0],
            },
            Some(&[0, 1]),
            1e-5,
        );
        assert_eq!(r.worst_index, 0);
        assert!(r.max_rel_error > 0.5);
        assert_eq!(r.checked, 2);
    }
}
