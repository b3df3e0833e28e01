//! Student-t and F distribution functions on top of the regularized
//! incomplete beta function.

use statrs::function::beta::beta_reg;

/// `P(T ≤ t)` for Student's t with `df` degrees of freedom.
pub fn t_cdf(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let tail = 0.5 * beta_reg(df / 2.0, 0.5, df / (df + t * t));
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Two-sided p-value `P(|T| ≥ |t|)`.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t))
}

/// `P(F ≤ f)` for the F distribution with `(d1, d2)` degrees of freedom.
pub fn f_cdf(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 0.0;
    }
    if f.is_infinite() {
        return 1.0;
    }
    beta_reg(d1 / 2.0, d2 / 2.0, d1 * f / (d1 * f + d2))
}

/// `P(F > f)`, computed from the complementary beta argument to keep
/// precision in the far tail.
pub fn f_sf(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    beta_reg(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))
}

/// Critical value `f` with `P(F > f) = alpha`, by bisection on the CDF.
pub fn f_crit(alpha: f64, d1: f64, d2: f64) -> f64 {
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    let target = 1.0 - alpha;
    let mut hi = 1.0;
    while f_cdf(hi, d1, d2) < target {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f_cdf(mid, d1, d2) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::ln_gamma;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    fn t_pdf(t: f64, v: f64) -> f64 {
        let c = ln_gamma((v + 1.0) / 2.0) - ln_gamma(v / 2.0) - 0.5 * (v * std::f64::consts::PI).ln();
        (c - (v + 1.0) / 2.0 * (1.0 + t * t / v).ln()).exp()
    }

    #[test]
    fn t_cdf_matches_quadrature() {
        for &(t, v) in &[(0.5, 3.0), (1.7, 9.0), (-2.1, 20.0), (3.0, 5.0)] {
            let mass = simpson(|x| t_pdf(x, v), 0.0, t, 20_000);
            assert!((t_cdf(t, v) - (0.5 + mass)).abs() < 1e-9, "t={t} v={v}");
        }
    }

    #[test]
    fn t_table_value() {
        // two-sided 5% critical value for 9 df is 2.262
        assert!((t_two_sided_p(2.262, 9.0) - 0.05).abs() < 5e-4);
        assert_eq!(t_two_sided_p(0.0, 9.0), 1.0);
    }

    #[test]
    fn f_crit_inverts_cdf() {
        for &(d1, d2) in &[(1.0, 48.0), (5.0, 48.0), (2.0, 10.0)] {
            let c = f_crit(0.05, d1, d2);
            assert!((f_cdf(c, d1, d2) - 0.95).abs() < 1e-10);
            assert!((f_sf(c, d1, d2) - 0.05).abs() < 1e-10);
        }
        // F(1, 48) critical value at 5%
        assert!((f_crit(0.05, 1.0, 48.0) - 4.042652129).abs() < 1e-6);
    }
}
