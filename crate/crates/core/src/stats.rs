//! Small descriptive-statistics and distribution helpers.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the `n - 1` denominator; zero for fewer than two values.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

pub fn std_dev(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

/// Linear-interpolation quantile (Hyndman-Fan type 7) of already sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Type-7 quantile of unsorted data.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, q)
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

pub fn normal_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

pub fn normal_quantile(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

/// Two-sided p-value of a standard normal statistic.
pub fn normal_two_sided_p(z: f64) -> f64 {
    2.0 * (1.0 - normal_cdf(z.abs()))
}

/// Upper tail probability of a chi-square statistic.
pub fn chi2_sf(stat: f64, df: f64) -> f64 {
    if df <= 0.0 {
        return f64::NAN;
    }
    1.0 - ChiSquared::new(df).expect("positive df").cdf(stat)
}

/// Two-sided p-value of a Student t statistic.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if !t.is_finite() || df <= 0.0 {
        return f64::NAN;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid t");
    2.0 * (1.0 - dist.cdf(t.abs()))
}

/// Significance stars at the 1%, 5% and 10% levels.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_of_small_sample() {
        let xs = [1.0, 2.0, 3.0];
        assert_eq!(mean(&xs), 2.0);
        assert_eq!(median(&xs), 2.0);
        assert_eq!(variance(&xs), 1.0);
        assert_eq!(std_dev(&[4.2]), 0.0);
    }

    #[test]
    fn quantile_interpolates() {
        let xs = [0.0, 10.0];
        assert_eq!(quantile(&xs, 0.25), 2.5);
        assert_eq!(quantile(&[3.0, 1.0, 2.0, 4.0], 0.5), 2.5);
    }

    #[test]
    fn star_thresholds() {
        assert_eq!(stars(0.004), "***");
        assert_eq!(stars(0.01), "**");
        assert_eq!(stars(0.07), "*");
        assert_eq!(stars(0.2), "");
    }

    #[test]
    fn reference_tails() {
        assert!((normal_quantile(0.975) - 1.959963984540054).abs() < 1e-9);
        assert!((chi2_sf(3.841458820694124, 1.0) - 0.05).abs() < 1e-9);
    }
}
