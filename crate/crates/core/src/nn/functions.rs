//! Scalar activation, loss, and normalization kernels shared by the eager and
//! recorded evaluation paths.

use crate::error::{Error, Result};
use crate::nn::Tensor;

pub const SELU_LAMBDA: f64 = 1.0507009873554805;
pub const SELU_ALPHA: f64 = 1.6732632423543772;

pub fn selu(x: f64) -> f64 {
    if x > 0.0 {
        SELU_LAMBDA * x
    } else {
        SELU_LAMBDA * SELU_ALPHA * x.exp_m1()
    }
}

pub fn selu_derivative(x: f64) -> f64 {
    if x > 0.0 {
        SELU_LAMBDA
    } else {
        SELU_LAMBDA * SELU_ALPHA * x.exp()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Mean binary cross-entropy between `targets` in {0,1} and `sigmoid(logits)`,
/// evaluated as `softplus(x) - u*x`.
pub fn bce_with_logits(logits: &Tensor, targets: &Tensor) -> Result<f64> {
    logits.check_same_shape(targets)?;
    if targets.data().iter().any(|&u| u != 0.0 && u != 1.0) {
        return Err(Error::InvalidInput("loss targets must be 0 or 1".into()));
    }
    let total: f64 = logits
        .data()
        .iter()
        .zip(targets.data())
        .map(|(&x, &u)| softplus(x) - u * x)
        .sum();
    Ok(total / logits.len() as f64)
}

/// Scales every trailing-axis row `c` to `sqrt(n) * c / ||c||`.
pub fn power_normalize(c: &Tensor) -> Result<Tensor> {
    let n = c.last_dim();
    let target = (n as f64).sqrt();
    let mut out = c.clone();
    for (row, chunk) in out.data_mut().chunks_mut(n).enumerate() {
        let norm = chunk.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::DegenerateCodeword { row });
        }
        let s = target / norm;
        chunk.iter_mut().for_each(|x| *x *= s);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selu_reference_points() {
        assert_eq!(selu(0.0), 0.0);
        assert_eq!(selu(1.0), 1.0507009873554805);
        let limit = -SELU_LAMBDA * SELU_ALPHA;
        assert!((limit + 1.7580993408473766).abs() < 1e-15);
        assert!((selu(-60.0) - limit).abs() < 1e-15);
    }

    #[test]
    fn bce_reference_points() {
        let zeros = Tensor::zeros(&[2, 3]);
        let targets = Tensor::new(&[2, 3], vec![0.0, 1.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        let l = bce_with_logits(&zeros, &targets).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);

        let l = bce_with_logits(&Tensor::scalar(50.0), &Tensor::scalar(1.0)).unwrap();
        assert!((0.0..1e-20).contains(&l));

        // -ln(sigmoid(1)) = ln(1 + e^-1)
        let l = bce_with_logits(&Tensor::scalar(1.0), &Tensor::scalar(1.0)).unwrap();
        assert!((l - 0.313_261_687_518_222_8).abs() < 1e-12);

        assert!(bce_with_logits(&Tensor::scalar(1.0), &Tensor::scalar(0.5)).is_err());
        assert!(bce_with_logits(&Tensor::zeros(&[2]), &Tensor::zeros(&[3])).is_err());
    }

    #[test]
    fn bce_stable_form_matches_naive_formula() {
        let mut x = -20.0;
        while x <= 20.0 {
            for u in [0.0, 1.0] {
                // 1 - sigmoid(x) is evaluated as sigmoid(-x) to avoid cancellation.
                let naive = -(u * sigmoid(x).ln() + (1.0 - u) * sigmoid(-x).ln());
                let stable = bce_with_logits(&Tensor::scalar(x), &Tensor::scalar(u)).unwrap();
                assert!((naive - stable).abs() < 1e-12, "x={x} u={u}: {naive} vs {stable}");
            }
            x += 0.125;
        }
    }

    #[test]
    fn power_normalize_cases() {
        let ones = Tensor::full(&[1, 4], 1.0);
        assert_eq!(power_normalize(&ones).unwrap(), ones);

        let v = Tensor::new(&[1, 2], vec![3.0, 4.0]).unwrap();
        let p = power_normalize(&v).unwrap();
        let r2 = 2f64.sqrt();
        assert!((p.data()[0] - 3.0 * r2 / 5.0).abs() < 1e-15);
        assert!((p.data()[1] - 4.0 * r2 / 5.0).abs() < 1e-15);
        assert!((p.sum_squares() - 2.0).abs() < 1e-14);

        let scaled = power_normalize(&v.map(|x| x * 7.5)).unwrap();
        for (a, b) in scaled.data().iter().zip(p.data()) {
            assert!((a - b).abs() < 1e-15);
        }

        let z = Tensor::new(&[2, 2], vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(power_normalize(&z), Err(Error::DegenerateCodeword { row: 1 })));
    }
}
