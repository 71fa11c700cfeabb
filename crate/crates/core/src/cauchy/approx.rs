//! Best rational approximation by continued-fraction convergents.

use num_bigint::BigInt;

use crate::Rat;

/// Best rational approximation to `x` with denominator at most `max_den`,
/// taken from the continued-fraction convergents.
pub fn best_rational(x: f64, max_den: i64) -> Rat {
    assert!(max_den >= 1);
    let neg = x < 0.0;
    let mut v = x.abs();
    let (mut p0, mut q0) = (1i128, 0i128);
    let (mut p1, mut q1) = (v.floor() as i128, 1i128);
    let mut frac = v - v.floor();
    for _ in 0..64 {
        if frac.abs() < 1e-15 {
            break;
        }
        v = 1.0 / frac;
        let a = v.floor() as i128;
        frac = v - v.floor();
        let p2 = a * p1 + p0;
        let q2 = a * q1 + q0;
        if q2 > max_den as i128 || q2 <= 0 {
            break;
        }
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
    }
    let (p, q) = (if neg { -p1 } else { p1 }, q1);
    Rat::new(BigInt::from(p), BigInt::from(q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::exact::{rat, rat_to_f64};

    #[test]
    fn recovers_exact_fractions() {
        assert_eq!(best_rational(0.5, 10), rat(1, 2));
        assert_eq!(best_rational(-0.75, 10), rat(-3, 4));
        assert_eq!(best_rational(3.0, 10), rat(3, 1));
    }

    #[test]
    fn pi_convergents() {
        assert_eq!(best_rational(std::f64::consts::PI, 10), rat(22, 7));
        assert_eq!(best_rational(std::f64::consts::PI, 200), rat(355, 113));
    }

    #[test]
    fn error_shrinks_with_denominator() {
        let x = std::f64::consts::SQRT_2;
        let mut last = f64::INFINITY;
        for d in [10, 100, 10_000, 1_000_000] {
            let r = best_rational(x, d);
            let err = (rat_to_f64(&r) - x).abs();
            assert!(err <= last + 1e-18);
            last = err;
        }
        assert!(last < 1e-10);
    }
}
