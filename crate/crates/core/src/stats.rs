use statrs::distribution::{ContinuousCDF, StudentsT};

/// Two-sided 95% normal quantile.
pub(crate) const Z_95: f64 = 1.959_963_984_540_054;

/// Welford running mean/variance.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sample_variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    /// Normal-approximation 95% half-width of the mean.
    pub fn halfwidth_95(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        Z_95 * (self.sample_variance() / self.count as f64).sqrt()
    }

    /// Student-t 95% half-width of the mean.
    pub fn t_halfwidth_95(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        t_quantile_975(self.count - 1) * (self.sample_variance() / self.count as f64).sqrt()
    }
}

pub(crate) fn t_quantile_975(dof: u64) -> f64 {
    StudentsT::new(0.0, 1.0, dof as f64)
        .map(|t| t.inverse_cdf(0.975))
        .unwrap_or(Z_95)
}

/// Ratio-of-means estimator `Σy/Σx` over i.i.d. pairs, with a delta-method
/// 95% half-width.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct RatioStats {
    count: u64,
    sum_x: f64,
    sum_y: f64,
    sum_xx: f64,
    sum_yy: f64,
    sum_xy: f64,
}

impl RatioStats {
    pub fn push(&mut self, y: f64, x: f64) {
        self.count += 1;
        self.sum_x += x;
        self.sum_y += y;
        self.sum_xx += x * x;
        self.sum_yy += y * y;
        self.sum_xy += x * y;
    }

    pub fn ratio(&self) -> Option<f64> {
        (self.sum_x > 0.0).then(|| self.sum_y / self.sum_x)
    }

    pub fn halfwidth_95(&self) -> f64 {
        let Some(r) = self.ratio() else { return 0.0 };
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let mean_x = self.sum_x / n;
        // Σ (y - r x)^2
        let ss = self.sum_yy - 2.0 * r * self.sum_xy + r * r * self.sum_xx;
        let var = ss.max(0.0) / (n - 1.0);
        Z_95 * (var / n).sqrt() / mean_x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 4.0, 2.0, 8.0, 5.0, 7.0];
        let mut s = RunningStats::default();
        xs.iter().for_each(|&x| s.push(x));
        let mean = xs.iter().sum::<f64>() / 6.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 5.0;
        assert!((s.mean() - mean).abs() < 1e-14);
        assert!((s.sample_variance() - var).abs() < 1e-12);
    }

    #[test]
    fn constant_samples_have_zero_width() {
        let mut s = RunningStats::default();
        (0..5).for_each(|_| s.push(3.25));
        assert_eq!(s.t_halfwidth_95(), 0.0);
    }

    #[test]
    fn t_quantile_values() {
        assert!((t_quantile_975(1) - 12.706_204_736).abs() < 1e-6);
        assert!((t_quantile_975(49) - 2.009_575_237).abs() < 1e-6);
    }

    #[test]
    fn ratio_of_proportional_pairs_is_exact() {
        let mut r = RatioStats::default();
        for x in [1.0, 2.0, 3.0] {
            r.push(0.5 * x, x);
        }
        assert_eq!(r.ratio(), Some(0.5));
        assert!(r.halfwidth_95() < 1e-12);
    }
}
