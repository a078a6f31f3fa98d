//! Normal and F distribution functions.

use std::f64::consts::{PI, SQRT_2};

use libm::{erfc, lgamma as ln_gamma};

use crate::error::{Error, Result};

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Inverse of [`normal_cdf`] on the open interval (0, 1).
pub fn normal_quantile(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!(
            "normal quantile needs 0 < q < 1, got {q}"
        )));
    }
    if q > 0.5 {
        return Ok(-lower_quantile(1.0 - q));
    }
    Ok(lower_quantile(q))
}

// q <= 0.5: rational start, then one Halley step against the erfc-based cdf
fn lower_quantile(q: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];

    let x = if q < 0.02425 {
        let t = (-2.0 * q.ln()).sqrt();
        (((((C[0] * t + C[1]) * t + C[2]) * t + C[3]) * t + C[4]) * t + C[5])
            / ((((D[0] * t + D[1]) * t + D[2]) * t + D[3]) * t + 1.0)
    } else {
        let t = q - 0.5;
        let r = t * t;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * t
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };

    let e = normal_cdf(x) - q;
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

const CF_MAX_ITER: usize = 1000;
const CF_EPS: f64 = 1e-15;
const CF_TINY: f64 = 1e-300;

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn regularized_beta(x: f64, a: f64, b: f64) -> f64 {
    debug_assert!(a > 0.0 && b > 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // the continued fraction converges fast below the mean
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(x, a, b) / a
    } else {
        1.0 - front * beta_cf(1.0 - x, b, a) / b
    }
}

// modified Lentz evaluation
fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;

        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// Upper tail `Pr{F(d1, d2) > f}`.
pub fn f_upper_tail(f: f64, d1: f64, d2: f64) -> f64 {
    if f.is_nan() {
        return f64::NAN;
    }
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    let x = d2 / (d2 + d1 * f);
    regularized_beta(x, 0.5 * d2, 0.5 * d1).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reference_points() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!(normal_cdf(5.33) >= 0.9999995);
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-15);
        assert!((normal_cdf(-1.0) - 0.15865525393145707).abs() < 1e-15);
    }

    #[test]
    fn quantile_domain_errors() {
        assert!(normal_quantile(0.0).is_err());
        assert!(normal_quantile(1.0).is_err());
        assert!(normal_quantile(f64::NAN).is_err());
        assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
    }

    #[test]
    fn quantile_inverts_cdf_over_range() {
        let mut q = 1e-10;
        while q < 1.0 - 1e-10 {
            let x = normal_quantile(q).unwrap();
            assert!((normal_cdf(x) - q).abs() <= 1e-7 * q.max(1e-3), "q={q}");
            q = if q < 0.5 { q * 1.7 } else { 1.0 - (1.0 - q) / 1.7 };
        }
        for i in -600..=600 {
            let x = i as f64 / 100.0;
            let back = normal_quantile(normal_cdf(x)).unwrap();
            assert!((back - x).abs() <= 1e-6, "x={x} back={back}");
        }
    }

    #[test]
    fn cdf_is_monotone() {
        let mut prev = 0.0;
        for i in -4000..=4000 {
            let v = normal_cdf(i as f64 / 400.0);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        // I_x(1, 1) = x; I_x(a, 1) = x^a; I_x(1, b) = 1 - (1-x)^b
        for &x in &[0.01, 0.3, 0.5, 0.77, 0.99] {
            assert!((regularized_beta(x, 1.0, 1.0) - x).abs() < 1e-13);
            assert!((regularized_beta(x, 3.5, 1.0) - x.powf(3.5)).abs() < 1e-13);
            assert!((regularized_beta(x, 1.0, 2.5) - (1.0 - (1.0 - x).powf(2.5))).abs() < 1e-13);
        }
        assert_eq!(regularized_beta(0.0, 2.0, 3.0), 0.0);
        assert_eq!(regularized_beta(1.0, 2.0, 3.0), 1.0);
    }

    #[test]
    fn f_tail_limits_and_monotonicity() {
        assert_eq!(f_upper_tail(0.0, 2.0, 10.0), 1.0);
        assert_eq!(f_upper_tail(f64::INFINITY, 2.0, 10.0), 0.0);
        // F(2, d2) tail has closed form (1 + 2f/d2)^(-d2/2)
        for &f in &[0.1, 1.0, 3.0, 10.0] {
            let exact = (1.0f64 + 2.0 * f / 12.0).powf(-6.0);
            assert!((f_upper_tail(f, 2.0, 12.0) - exact).abs() < 1e-13);
        }
        let mut prev = 1.0;
        for i in 1..200 {
            let p = f_upper_tail(i as f64 * 0.25, 3.0, 40.0);
            assert!(p <= prev);
            prev = p;
        }
    }
}
