//! Stable scalar kernels shared by every loss, divergence, and solver in the
//! crate.
//!
//! Everything is plain `f64`. The aggregating kernels reject non-finite
//! inputs at the boundary instead of letting NaN leak through a pipeline,
//! and every exponentiation is max-shifted so scores in the hundreds or
//! thousands neither overflow nor collapse.

use thiserror::Error;

/// Default central-difference step used by the gradient checks.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Errors surfaced by the scalar kernels.
#[derive(Debug, Error, PartialEq)]
pub enum NumericsError {
    /// `log_sum_exp` over zero terms is minus infinity; callers that want an
    /// empty-sum convention should use [`log1p_sum_exp`], which includes the
    /// constant term and is defined (as 0) on an empty slice.
    #[error("log_sum_exp requires at least one term")]
    EmptyInput,
    /// A NaN or infinity reached a kernel boundary.
    #[error("non-finite input {value} at position {index}")]
    NonFinite { index: usize, value: f64 },
    /// The finite-difference step must be a positive finite real.
    #[error("finite-difference step must be positive and finite, got {0}")]
    InvalidStep(f64),
}

fn check_finite(xs: &[f64]) -> Result<(), NumericsError> {
    for (index, &value) in xs.iter().enumerate() {
        if !value.is_finite() {
            return Err(NumericsError::NonFinite { index, value });
        }
    }
    Ok(())
}

/// `log(sum_i exp(x_i))`, computed with a max shift so the largest exponent
/// is evaluated as `exp(0)`.
///
/// The result always lies in `[max(xs), max(xs) + ln(len)]`.
pub fn log_sum_exp(xs: &[f64]) -> Result<f64, NumericsError> {
    if xs.is_empty() {
        return Err(NumericsError::EmptyInput);
    }
    check_finite(xs)?;
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    Ok(m + sum.ln())
}

/// `log(1 + sum_i exp(x_i))`: the log-sum-exp of the inputs together with a
/// constant zero term.
///
/// Defined as exactly `0` on an empty slice, which is what every pairwise
/// loss in this crate wants when one side of a pair set is empty. Always
/// non-negative, and bit-identical to `log_sum_exp` over `{0} ∪ xs`.
pub fn log1p_sum_exp(xs: &[f64]) -> Result<f64, NumericsError> {
    check_finite(xs)?;
    if xs.is_empty() {
        return Ok(0.0);
    }
    let m = xs.iter().copied().fold(0.0_f64, f64::max);
    let sum: f64 = (-m).exp() + xs.iter().map(|&x| (x - m).exp()).sum::<f64>();
    Ok(m + sum.ln())
}

/// Logistic function with the usual two-branch form: never exponentiates a
/// positive argument, so it underflows gracefully instead of producing
/// `inf/inf`.
#[inline]
pub fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))` via `max(x, 0) + log1p(exp(-|x|))`; exact identity
/// `softplus(x) - softplus(-x) = x` holds to rounding for all finite `x`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Central-difference gradient of `f` at `x` with step `h`:
/// `(f(x + h e_i) - f(x - h e_i)) / 2h` per coordinate.
///
/// This is the independent numerical route the analytic gradients in this
/// crate are checked against. NaN produced by `f` propagates into the
/// corresponding output coordinate.
pub fn finite_difference_gradient<F>(
    mut f: F,
    x: &[f64],
    h: f64,
) -> Result<Vec<f64>, NumericsError>
where
    F: FnMut(&[f64]) -> f64,
{
    if !h.is_finite() || h <= 0.0 {
        return Err(NumericsError::InvalidStep(h));
    }
    check_finite(x)?;
    let mut probe = x.to_vec();
    let mut gradient = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let xi = x[i];
        probe[i] = xi + h;
        let upper = f(&probe);
        probe[i] = xi - h;
        let lower = f(&probe);
        probe[i] = xi;
        gradient.push((upper - lower) / (2.0 * h));
    }
    Ok(gradient)
}

/// `|a - b| / max(1, |a|, |b|)`: behaves like absolute error near zero and
/// like relative error for large magnitudes. This is the agreement metric
/// used by every gradient and identity check in the crate.
#[inline]
pub fn symmetric_relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1.0_f64.max(a.abs()).max(b.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_matches_direct_evaluation() {
        // log(e^1 + e^-1 + e^0.5), frozen from a 50-digit evaluation.
        let v = log_sum_exp(&[1.0, -1.0, 0.5]).unwrap();
        assert!(
            (v - 1.5549569196419906).abs() < 1e-12,
            "lse([1,-1,0.5]) = {v}"
        );
    }

    #[test]
    fn log_sum_exp_survives_huge_inputs() {
        let v = log_sum_exp(&[1000.0, 1000.0]).unwrap();
        let expected = 1000.0 + std::f64::consts::LN_2;
        assert!((v - expected).abs() < 1e-9, "lse([1000,1000]) = {v}");
    }

    #[test]
    fn log_sum_exp_rejects_empty_and_non_finite() {
        assert_eq!(log_sum_exp(&[]), Err(NumericsError::EmptyInput));
        assert!(matches!(
            log_sum_exp(&[0.0, f64::NAN]),
            Err(NumericsError::NonFinite { index: 1, .. })
        ));
        assert!(matches!(
            log_sum_exp(&[f64::INFINITY]),
            Err(NumericsError::NonFinite { index: 0, .. })
        ));
    }

    #[test]
    fn log1p_sum_exp_examples() {
        assert_eq!(log1p_sum_exp(&[]).unwrap(), 0.0);
        let v = log1p_sum_exp(&[-1.0, 2.0]).unwrap();
        assert!(
            (v - 2.1698460195562856).abs() < 1e-12,
            "l1se([-1,2]) = {v}"
        );
        // Large negative inputs leave only the constant term.
        let tiny = log1p_sum_exp(&[-800.0]).unwrap();
        assert!((0.0..1e-300).contains(&tiny), "l1se([-800]) = {tiny}");
    }

    #[test]
    fn log1p_sum_exp_is_log_sum_exp_with_zero_term() {
        let cases: [&[f64]; 4] = [
            &[0.3],
            &[-1.0, 2.0],
            &[5.0, -5.0, 0.0],
            &[-700.0, 700.0, 1.0],
        ];
        for xs in cases {
            let mut with_zero = vec![0.0];
            with_zero.extend_from_slice(xs);
            assert_eq!(
                log1p_sum_exp(xs).unwrap(),
                log_sum_exp(&with_zero).unwrap(),
                "xs = {xs:?}"
            );
        }
    }

    #[test]
    fn sigmoid_is_stable_and_symmetric() {
        assert!((stable_sigmoid(0.0) - 0.5).abs() < 1e-15);
        let v = stable_sigmoid(-40.0);
        assert!(
            (v - 4.248354255291589e-18).abs() < 1e-30,
            "sigmoid(-40) = {v}"
        );
        assert_eq!(stable_sigmoid(800.0), 1.0);
        assert_eq!(stable_sigmoid(-800.0), 0.0);
        for &x in &[0.0, 0.5, -3.0, 17.0, -123.0] {
            let s = stable_sigmoid(x) + stable_sigmoid(-x);
            assert!((s - 1.0).abs() < 1e-15, "sigmoid(±{x}) sum = {s}");
        }
        // sigmoid(ln 4) = 4/5 exactly in the reals.
        assert!((stable_sigmoid(4.0_f64.ln()) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn softplus_examples_and_identity() {
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        let v = softplus(-1.0);
        assert!((v - 0.313_261_687_518_222_8).abs() < 1e-15, "softplus(-1) = {v}");
        let big = softplus(800.0);
        assert!((big - 800.0).abs() < 1e-12, "softplus(800) = {big}");
        assert!(softplus(-800.0) >= 0.0);
        for &x in &[0.0, 1.0, -1.0, 30.0, -30.0, 700.0, -700.0] {
            let lhs = softplus(x) - softplus(-x);
            assert!((lhs - x).abs() < 1e-12 * x.abs().max(1.0), "x = {x}");
        }
    }

    #[test]
    fn central_difference_is_exact_on_quadratics() {
        let f = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let g = finite_difference_gradient(f, &[1.0, -2.0], DEFAULT_FD_STEP).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-8 && (g[1] + 4.0).abs() < 1e-8, "g = {g:?}");
    }

    #[test]
    fn central_difference_matches_softmax_for_log_sum_exp() {
        let x = [0.3, -1.2, 2.0, 0.0];
        let f = |v: &[f64]| log_sum_exp(v).unwrap();
        let g = finite_difference_gradient(f, &x, DEFAULT_FD_STEP).unwrap();
        let lse = log_sum_exp(&x).unwrap();
        for (i, &xi) in x.iter().enumerate() {
            let soft = (xi - lse).exp();
            assert!(
                (g[i] - soft).abs() < 1e-6,
                "coordinate {i}: fd {} vs softmax {soft}",
                g[i]
            );
        }
    }

    #[test]
    fn central_difference_is_zero_at_symmetric_kinks() {
        let f = |x: &[f64]| x[0].abs();
        let g = finite_difference_gradient(f, &[0.0], DEFAULT_FD_STEP).unwrap();
        assert_eq!(g[0], 0.0);
    }

    #[test]
    fn central_difference_validates_step() {
        let f = |x: &[f64]| x[0];
        assert_eq!(
            finite_difference_gradient(f, &[0.0], 0.0),
            Err(NumericsError::InvalidStep(0.0))
        );
        assert_eq!(
            finite_difference_gradient(f, &[0.0], -1e-5),
            Err(NumericsError::InvalidStep(-1e-5))
        );
    }

    #[test]
    fn symmetric_relative_error_scales() {
        assert_eq!(symmetric_relative_error(0.0, 0.0), 0.0);
        // Near zero it is absolute error...
        assert!((symmetric_relative_error(1e-9, 3e-9) - 2e-9).abs() < 1e-24);
        // ...and relative error for large magnitudes.
        assert!((symmetric_relative_error(200.0, 100.0) - 0.5).abs() < 1e-15);
    }
}
