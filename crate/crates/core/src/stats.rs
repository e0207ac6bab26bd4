use std::collections::VecDeque;

use statrs::distribution::{Binomial, DiscreteCDF};

/// Fixed-width rolling mean over a stream of values.
#[derive(Debug, Clone)]
pub struct RollingMean {
    window: usize,
    buf: VecDeque<f64>,
    sum: f64,
}

impl RollingMean {
    pub fn new(window: usize) -> Self {
        assert!(window > 0, "rolling window must be positive");
        Self {
            window,
            buf: VecDeque::with_capacity(window),
            sum: 0.0,
        }
    }

    /// Push a value; returns the mean once the window is full.
    pub fn push(&mut self, x: f64) -> Option<f64> {
        if self.buf.len() == self.window {
            self.sum -= self.buf.pop_front().unwrap_or(0.0);
        }
        self.buf.push_back(x);
        self.sum += x;
        (self.buf.len() == self.window).then(|| self.sum / self.window as f64)
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// One-sided sign test: P(X >= positives) for X ~ Binomial(positives + negatives, 1/2).
/// Ties are dropped before calling; with no informative pairs the p-value is 1.
pub fn sign_test_p(positives: u64, negatives: u64) -> f64 {
    let n = positives + negatives;
    if n == 0 || positives == 0 {
        return 1.0;
    }
    let dist = Binomial::new(0.5, n).expect("p = 0.5 is a valid binomial parameter");
    // P(X >= k) = 1 - P(X <= k - 1)
    dist.sf(positives - 1)
}
