//! The weighted geometric sums used to bound the decaying-momentum term.

use crate::params::HyperParams;

/// `sum_{t=0}^{T-1} t lambda^t` through the closed form
/// `((T-1) lambda^(T+1) - T lambda^T + lambda) / (lambda - 1)^2`.
///
/// Cancellation makes the closed form lose accuracy as `lambda -> 1`.
pub fn geometric_sum_closed_form(lambda: f64, horizon: usize) -> f64 {
    let t = horizon as f64;
    let n = horizon as i32;
    ((t - 1.0) * lambda.powi(n + 1) - t * lambda.powi(n) + lambda) / (lambda - 1.0).powi(2)
}

/// Returns `(lhs, rhs)` with
/// `lhs = sum_{t=1}^T beta1_t / (1 - beta1_t) * sqrt(t)` summed directly and
/// `rhs = 1 / ((1 - beta1) (1 - lambda)^2)`.
pub fn geometric_sum_bound_check(p: &HyperParams, horizon: usize) -> (f64, f64) {
    let lhs = (1..=horizon)
        .map(|t| {
            let b = p.beta1_at(t);
            b / (1.0 - b) * (t as f64).sqrt()
        })
        .sum();
    let rhs = 1.0 / ((1.0 - p.beta1) * (1.0 - p.lambda).powi(2));
    (lhs, rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn direct(lambda: f64, horizon: usize) -> f64 {
        (0..horizon).map(|t| t as f64 * lambda.powi(t as i32)).sum()
    }

    #[test]
    fn hand_example() {
        // 0 + 0.5 + 2 * 0.25
        assert_eq!(direct(0.5, 3), 1.0);
        assert!((geometric_sum_closed_form(0.5, 3) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_term_is_zero() {
        assert!(geometric_sum_closed_form(0.3, 1).abs() < 1e-15);
        assert!(geometric_sum_closed_form(0.97, 1).abs() < 1e-12);
    }

    #[test]
    fn bound_hand_example() {
        let p = HyperParams::new(1.0, 0.9, 0.999, 0.5, 1e-8).unwrap();
        let (lhs, rhs) = geometric_sum_bound_check(&p, 3);
        let expect = 0.9 / 0.1 + 0.45 / 0.55 * 2f64.sqrt() + 0.225 / 0.775 * 3f64.sqrt();
        assert!((lhs - expect).abs() < 1e-12);
        assert!((rhs - 40.0).abs() < 1e-12);
        assert!(lhs < rhs);
    }

    #[test]
    fn bound_single_term() {
        let p = HyperParams::new(1.0, 0.7, 0.999, 0.3, 1e-8).unwrap();
        let (lhs, rhs) = geometric_sum_bound_check(&p, 1);
        assert!((lhs - 0.7 / 0.3).abs() < 1e-14);
        assert!(lhs <= rhs);
    }

    proptest! {
        #[test]
        fn closed_form_matches_direct(lambda in 0.01f64..0.99, horizon in 1usize..1000) {
            let closed = geometric_sum_closed_form(lambda, horizon);
            let brute = direct(lambda, horizon);
            let err = if closed == brute { 0.0 } else { (closed - brute).abs() / brute.abs().max(1e-300) };
            if horizon == 1 {
                prop_assert!(closed.abs() < 1e-12);
            } else {
                prop_assert!(err < 1e-10, "lambda {} T {} err {}", lambda, horizon, err);
            }
        }
    }
}
