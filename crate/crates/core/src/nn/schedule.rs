use crate::error::{Error, Result};

/// Polynomial decay `initial_lr * (1 - iter/total)^power`, reaching zero at `total`.
pub fn poly_lr(iter: usize, total: usize, initial_lr: f64, power: f64) -> Result<f64> {
    if iter > total {
        return Err(Error::Schedule { iter, total });
    }
    if !(initial_lr > 0.0 && initial_lr.is_finite()) {
        return Err(Error::Config(format!("initial_lr must be positive, got {initial_lr}")));
    }
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::Config(format!("schedule power must be positive, got {power}")));
    }
    if iter == total {
        return Ok(0.0);
    }
    Ok(initial_lr * (1.0 - iter as f64 / total as f64).powf(power))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn endpoints_and_midpoint() {
        assert_eq!(poly_lr(0, 100, 1e-3, 1.0).unwrap(), 1e-3);
        assert_eq!(poly_lr(100, 100, 1e-3, 1.0).unwrap(), 0.0);
        assert!((poly_lr(50, 100, 1e-3, 1.0).unwrap() - 5e-4).abs() < 1e-18);
    }

    #[test]
    fn past_the_end_is_an_error() {
        assert!(matches!(
            poly_lr(101, 100, 1e-3, 1.0),
            Err(Error::Schedule { iter: 101, total: 100 })
        ));
    }

    proptest! {
        #[test]
        fn non_increasing(total in 1usize..5000, power in 0.1f64..4.0, lr in 1e-6f64..1.0) {
            let mut prev = f64::INFINITY;
            for i in 0..=total.min(300) {
                let v = poly_lr(i, total, lr, power).unwrap();
                prop_assert!(v <= prev);
                prev = v;
            }
        }
    }
}
