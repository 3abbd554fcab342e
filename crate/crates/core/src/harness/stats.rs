//! Summary statistics and one-sided paired tests.

use statrs::distribution::{ContinuousCDF, StudentsT};

/// Pairwise (cascade) summation; the result does not depend on how the
/// values were produced, only on their order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator).
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    (pairwise_sum(&sq) / (xs.len() - 1) as f64).sqrt()
}

pub fn std_error(xs: &[f64]) -> f64 {
    std_dev(xs) / (xs.len() as f64).sqrt()
}

/// Outcome of a one-sided paired t-test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTest {
    pub mean_difference: f64,
    pub t_statistic: f64,
    /// `P(T >= t)` under the null of zero mean difference.
    pub p_value: f64,
    pub n: usize,
}

impl PairedTest {
    pub fn significant(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Tests `mean(a - b) > 0` on paired samples.
pub fn paired_greater(a: &[f64], b: &[f64]) -> PairedTest {
    assert_eq!(a.len(), b.len(), "paired samples must have equal length");
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len();
    let m = mean(&d);
    let se = std_error(&d);
    let t = if se > 0.0 {
        m / se
    } else if m > 0.0 {
        f64::INFINITY
    } else if m < 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    };
    let p_value = if n < 2 || t.is_nan() {
        1.0
    } else if t.is_infinite() {
        if t > 0.0 {
            0.0
        } else {
            1.0
        }
    } else {
        let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("n >= 2");
        1.0 - dist.cdf(t)
    };
    PairedTest {
        mean_difference: m,
        t_statistic: t,
        p_value,
        n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((std_dev(&xs) - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((std_error(&xs) - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        let many: Vec<f64> = (0..1000).map(|i| i as f64 * 0.1).collect();
        assert!((pairwise_sum(&many) - 49950.0).abs() < 1e-9);
    }

    #[test]
    fn t_test_reference_value() {
        // Differences 1, 2, 3: mean 2, sd 1, t = 2 sqrt(3) with 2 dof.
        // One-sided p = 0.5 - t / (2 sqrt(2 + t^2)) for 2 dof.
        let r = paired_greater(&[2.0, 4.0, 6.0], &[1.0, 2.0, 3.0]);
        let t = 2.0 * 3f64.sqrt();
        assert!((r.t_statistic - t).abs() < 1e-12);
        let p = 0.5 - t / (2.0 * (2.0 + t * t).sqrt());
        assert!((r.p_value - p).abs() < 1e-10);
        assert!(r.significant(0.05));
        assert!(!paired_greater(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).significant(0.05));
    }

    #[test]
    fn degenerate_differences() {
        assert_eq!(paired_greater(&[2.0, 2.0], &[1.0, 1.0]).p_value, 0.0);
        assert_eq!(paired_greater(&[1.0, 1.0], &[1.0, 1.0]).p_value, 0.5);
    }
}
