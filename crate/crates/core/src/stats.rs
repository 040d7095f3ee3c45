//! Small statistical kernels, generic over the scalar type.

use num_traits::Float;

/// Arithmetic mean; zero for an empty slice is the caller's responsibility
/// to avoid (callers guard on emptiness).
pub fn mean<F: Float>(xs: &[F]) -> F {
    let n = F::from(xs.len()).expect("usize fits in scalar");
    xs.iter().fold(F::zero(), |acc, &x| acc + x) / n
}

/// Unbiased sample variance (denominator n-1). Requires n >= 2.
pub fn sample_variance<F: Float>(xs: &[F]) -> F {
    debug_assert!(xs.len() >= 2);
    let m = mean(xs);
    let n1 = F::from(xs.len() - 1).expect("usize fits in scalar");
    xs.iter().fold(F::zero(), |acc, &x| acc + (x - m) * (x - m)) / n1
}

/// Standard normal quantile by Acklam's rational approximation
/// (relative error below 1.2e-9 everywhere on (0, 1)).
pub fn normal_quantile<F: Float>(p: F) -> F {
    assert!(p > F::zero() && p < F::one(), "quantile needs p in (0,1)");
    let c = |v: f64| F::from(v).expect("constant fits in scalar");

    let a = [
        c(-3.969683028665376e+01),
        c(2.209460984245205e+02),
        c(-2.759285104469687e+02),
        c(1.383_577_518_672_69e2),
        c(-3.066479806614716e+01),
        c(2.506628277459239e+00),
    ];
    let b = [
        c(-5.447609879822406e+01),
        c(1.615858368580409e+02),
        c(-1.556989798598866e+02),
        c(6.680131188771972e+01),
        c(-1.328068155288572e+01),
    ];
    let cc = [
        c(-7.784894002430293e-03),
        c(-3.223964580411365e-01),
        c(-2.400758277161838e+00),
        c(-2.549732539343734e+00),
        c(4.374664141464968e+00),
        c(2.938163982698783e+00),
    ];
    let d = [
        c(7.784695709041462e-03),
        c(3.224671290700398e-01),
        c(2.445134137142996e+00),
        c(3.754408661907416e+00),
    ];

    let p_low = c(0.02425);
    let p_high = F::one() - p_low;

    if p < p_low {
        let q = (c(-2.0) * p.ln()).sqrt();
        (((((cc[0] * q + cc[1]) * q + cc[2]) * q + cc[3]) * q + cc[4]) * q + cc[5])
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + F::one())
    } else if p <= p_high {
        let q = p - c(0.5);
        let r = q * q;
        (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
            / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + F::one())
    } else {
        let q = (c(-2.0) * (F::one() - p).ln()).sqrt();
        -(((((cc[0] * q + cc[1]) * q + cc[2]) * q + cc[3]) * q + cc[4]) * q + cc[5])
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + F::one())
    }
}

/// Standard normal CDF via the complementary error function.
pub fn normal_cdf<F: Float>(x: F) -> F {
    let c = |v: f64| F::from(v).expect("constant fits in scalar");
    c(0.5) * erfc(-x / c(std::f64::consts::SQRT_2))
}

/// Complementary error function (Numerical Recipes rational approximation,
/// absolute error below 1.2e-7; ample for the KS and calibration checks).
fn erfc<F: Float>(x: F) -> F {
    let c = |v: f64| F::from(v).expect("constant fits in scalar");
    let z = x.abs();
    let t = F::one() / (F::one() + z / c(2.0));
    let poly = c(-1.26551223)
        + t * (c(1.00002368)
            + t * (c(0.37409196)
                + t * (c(0.09678418)
                    + t * (c(-0.18628806)
                        + t * (c(0.27886807)
                            + t * (c(-1.13520398)
                                + t * (c(1.48851587)
                                    + t * (c(-0.82215223) + t * c(0.17087277)))))))));
    let ans = t * (-z * z + poly).exp();
    if x >= F::zero() {
        ans
    } else {
        c(2.0) - ans
    }
}

/// Survival function of the chi-square distribution (1 - CDF).
pub fn chi_square_sf(stat: f64, dof: f64) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    if dof <= 0.0 {
        return 1.0;
    }
    let dist = ChiSquared::new(dof).expect("dof > 0");
    (1.0 - dist.cdf(stat)).clamp(0.0, 1.0)
}

/// Pearson chi-square statistic and degrees of freedom for an r x c
/// contingency table (rows/cols with zero totals are ignored).
pub fn contingency_chi_square(table: &[Vec<u64>]) -> (f64, f64) {
    let rows = table.len();
    let cols = table.first().map_or(0, Vec::len);
    let row_tot: Vec<f64> = table.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let col_tot: Vec<f64> = (0..cols)
        .map(|j| table.iter().map(|r| r[j] as f64).sum())
        .collect();
    let grand: f64 = row_tot.iter().sum();
    if grand == 0.0 {
        return (0.0, 0.0);
    }
    let live_rows = row_tot.iter().filter(|&&t| t > 0.0).count();
    let live_cols = col_tot.iter().filter(|&&t| t > 0.0).count();
    let mut stat = 0.0;
    for i in 0..rows {
        for j in 0..cols {
            let expected = row_tot[i] * col_tot[j] / grand;
            if expected > 0.0 {
                let diff = table[i][j] as f64 - expected;
                stat += diff * diff / expected;
            }
        }
    }
    let dof = (live_rows.saturating_sub(1) * live_cols.saturating_sub(1)) as f64;
    (stat, dof)
}

/// Two-sided Kolmogorov-Smirnov distance between a sample and the standard
/// normal CDF. The sample is sorted internally.
pub fn ks_distance_normal(sample: &[f64]) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in KS sample"));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let cdf = normal_cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((cdf - lo).abs()).max((hi - cdf).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_variance() {
        assert_eq!(mean(&[1.0f64, 3.0]), 2.0);
        assert_eq!(sample_variance(&[1.0f64, 3.0]), 2.0);
        assert!((sample_variance(&[0.0f64, 2.0]) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn quantile_matches_known_values() {
        // Classical two-sided 95% and 99% points.
        assert!((normal_quantile(0.975f64) - 1.959963984540054).abs() < 1e-8);
        assert!((normal_quantile(0.995f64) - 2.5758293035489004).abs() < 1e-8);
        assert!((normal_quantile(0.5f64)).abs() < 1e-10);
        assert!((normal_quantile(0.025f64) + normal_quantile(0.975f64)).abs() < 1e-8);
    }

    #[test]
    fn quantile_generic_over_f32_compiles() {
        let q: f32 = normal_quantile(0.975f32);
        assert!((q - 1.96).abs() < 1e-3);
    }

    #[test]
    fn normal_cdf_symmetry() {
        // Exact for x != 0 by the reflection formula; at x = 0 the pair sums
        // to erfc(0), which carries the approximation error (~1e-7).
        assert!((2.0 * normal_cdf(0.0f64) - 1.0).abs() < 1e-6);
        for &x in &[0.5f64, 1.0, 2.0, 3.5] {
            assert!((normal_cdf(x) + normal_cdf(-x) - 1.0).abs() < 1e-10, "x = {x}");
        }
        assert!((normal_cdf(1.959963984540054f64) - 0.975).abs() < 1e-6);
    }

    #[test]
    fn chi_square_tail() {
        // P(chi2_1 > 3.841) ~ 0.05.
        assert!((chi_square_sf(3.841458820694124, 1.0) - 0.05).abs() < 1e-9);
    }

    #[test]
    fn contingency_uniform_table_has_zero_stat() {
        let t = vec![vec![5u64, 5], vec![5, 5]];
        let (stat, dof) = contingency_chi_square(&t);
        assert_eq!(stat, 0.0);
        assert_eq!(dof, 1.0);
    }

    #[test]
    fn ks_of_exact_quantiles_is_small() {
        let n = 1000;
        let sample: Vec<f64> = (0..n)
            .map(|i| normal_quantile((i as f64 + 0.5) / n as f64))
            .collect();
        assert!(ks_distance_normal(&sample) < 0.002);
    }
}
