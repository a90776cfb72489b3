//! Paired t-test with p-values from the regularized incomplete beta function.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TTest {
    pub t: f64,
    pub dof: usize,
    /// Two-sided p-value.
    pub p: f64,
}

/// Classic paired t-test on `x - y`.
pub fn paired_t_test(x: &[f64], y: &[f64]) -> Result<TTest> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::DegenerateTest(format!(
            "need at least 2 pairs, got {n}"
        )));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        return Err(Error::DegenerateTest(
            "differences have zero variance".into(),
        ));
    }
    let t = mean / (var / n as f64).sqrt();
    let dof = n - 1;
    Ok(TTest {
        t,
        dof,
        p: student_t_two_sided(t, dof as f64),
    })
}

/// `P(|T| >= |t|)` for Student's t with `dof` degrees of freedom.
pub fn student_t_two_sided(t: f64, dof: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let x = dof / (dof + t * t);
    regularized_incomplete_beta(x, dof / 2.0, 0.5)
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Lanczos approximation (g = 7, n = 9), accurate to ~1e-15 for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// `I_x(a, b)` via the continued fraction, evaluated by the modified Lentz
/// method on whichever of `x` / `1 - x` converges faster.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(x, a, b) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(1.0 - x, b, a) / b
    }
}

fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const MAX_ITER: usize = 500;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn hand_example() {
        let r = paired_t_test(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap();
        // d = [-1, -2, -3], mean -2, sd 1, se 1/sqrt(3)
        assert_abs_diff_eq!(r.t, -12f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.t, -3.4641, epsilon = 1e-4);
        assert_eq!(r.dof, 2);
        assert_abs_diff_eq!(r.p, 0.0742, epsilon = 1e-4);
    }

    #[test]
    fn errors() {
        assert_eq!(
            paired_t_test(&[1.0, 2.0], &[1.0]).unwrap_err(),
            Error::LengthMismatch { left: 2, right: 1 }
        );
        assert!(matches!(
            paired_t_test(&[1.0, 2.0, 3.0], &[0.0, 1.0, 2.0]),
            Err(Error::DegenerateTest(_))
        ));
        assert!(matches!(
            paired_t_test(&[1.0], &[0.0]),
            Err(Error::DegenerateTest(_))
        ));
    }

    #[test]
    fn ln_gamma_known_values() {
        assert_abs_diff_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ln_gamma(5.0), 24f64.ln(), epsilon = 1e-13);
        assert_abs_diff_eq!(
            ln_gamma(0.5),
            std::f64::consts::PI.sqrt().ln(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn incomplete_beta_matches_statrs() {
        for &(x, a, b) in &[
            (0.1, 0.5, 0.5),
            (0.5, 1.0, 0.5),
            (0.9, 9.0, 0.5),
            (0.3, 2.5, 3.5),
            (0.99, 50.0, 0.5),
            (0.01, 0.5, 10.0),
        ] {
            let want = statrs::function::beta::beta_reg(a, b, x);
            assert_abs_diff_eq!(regularized_incomplete_beta(x, a, b), want, epsilon = 1e-12);
        }
    }

    #[test]
    fn mean_and_se_basics() {
        assert_eq!(mean_and_se(&[0.5; 4]), (0.5, 0.0));
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0]);
        assert_abs_diff_eq!(m, 2.0);
        assert_abs_diff_eq!(se, 1.0 / 3f64.sqrt(), epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn swapping_arguments_flips_t(
            pairs in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 3..30)
        ) {
            let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            if let (Ok(a), Ok(b)) = (paired_t_test(&x, &y), paired_t_test(&y, &x)) {
                prop_assert!((a.t + b.t).abs() <= 1e-12 * a.t.abs().max(1.0));
                prop_assert!((a.p - b.p).abs() <= 1e-14);
                prop_assert!((0.0..=1.0).contains(&a.p));
            }
        }

        #[test]
        fn p_agrees_with_statrs(t in -20.0f64..20.0, dof in 1usize..60) {
            use statrs::distribution::{ContinuousCDF, StudentsT};
            let dist = StudentsT::new(0.0, 1.0, dof as f64).unwrap();
            let want = 2.0 * dist.sf(t.abs());
            prop_assert!((student_t_two_sided(t, dof as f64) - want).abs() < 1e-10);
        }
    }
}
