//! Small sample statistics. All variances and covariances use the unbiased `n - 1` divisor.

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Two-pass sample covariance. Returns 0 for fewer than two points.
pub fn sample_covariance(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len(), "covariance of unequal-length samples");
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let mx = mean(xs);
    let my = mean(ys);
    let s: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    s / (n - 1) as f64
}

pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

/// Standard error of the mean.
pub fn standard_error(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    (sample_variance(xs) / xs.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        assert_eq!(mean(&[1.0, 3.0]), 2.0);
        assert_eq!(sample_covariance(&[1.0, 3.0], &[2.0, 4.0]), 2.0);
        assert_eq!(sample_variance(&[2.0, 4.0]), 2.0);
        assert_eq!(sample_variance(&[5.0; 4]), 0.0);
        assert_eq!(sample_covariance(&[1.0; 3], &[1.0, 2.0, 9.0]), 0.0);
        assert_eq!(standard_error(&[1.0]), 0.0);
    }
}
