use serde::Serialize;

use crate::eps::Eps;

/// Ascending bucket boundaries `σ_1 < … < σ_τ = Q`.
///
/// The first `⌈1/ε⌉` values are consecutive integers; each later value is
/// `⌈σ(1+ε)⌉` of the previous one, and the last is clamped to `Q`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ThresholdSchedule {
    pub sigma: Vec<u64>,
    pub eps: Eps,
    pub capacity: u64,
}

pub fn thresholds(capacity: u64, eps: Eps) -> ThresholdSchedule {
    assert!(capacity >= 1, "capacity must be positive");
    let mut sigma = Vec::new();
    let prefix = eps.ceil_recip();
    let mut s = 1;
    while s <= prefix && s < capacity {
        sigma.push(s);
        s += 1;
    }
    if let Some(&last) = sigma.last() {
        let mut s = eps.ceil_grow(last);
        while s < capacity {
            sigma.push(s);
            s = eps.ceil_grow(s);
        }
    }
    sigma.push(capacity);
    ThresholdSchedule {
        sigma,
        eps,
        capacity,
    }
}

impl ThresholdSchedule {
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    /// Index `i` with `σ_i ≤ size < σ_{i+1}`; the last bucket is `[Q, Q]`.
    /// `None` for `0` and for sizes above `Q`.
    pub fn bucket_of(&self, size: u64) -> Option<usize> {
        if size == 0 || size > self.capacity {
            return None;
        }
        Some(self.sigma.partition_point(|&s| s <= size) - 1)
    }

    /// Half-open range of bucket `i`.
    pub fn range(&self, i: usize) -> (u64, u64) {
        let lo = self.sigma[i];
        let hi = self.sigma.get(i + 1).copied().unwrap_or(self.capacity + 1);
        (lo, hi)
    }

    /// Largest threshold not above `size`, or `0`.
    pub fn round_down(&self, size: u64) -> u64 {
        match self.sigma.partition_point(|&s| s <= size) {
            0 => 0,
            i => self.sigma[i - 1],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cases() {
        let half = Eps::new(1, 2).unwrap();
        assert_eq!(thresholds(1, half).sigma, vec![1]);
        assert_eq!(thresholds(10, half).sigma, vec![1, 2, 3, 5, 8, 10]);
        assert_eq!(thresholds(2, half).sigma, vec![1, 2]);
        assert_eq!(thresholds(3, half).sigma, vec![1, 2, 3]);
    }

    #[test]
    fn buckets_and_rounding() {
        let s = thresholds(10, Eps::new(1, 2).unwrap());
        assert_eq!(s.bucket_of(5), Some(3));
        assert_eq!(s.bucket_of(7), Some(3));
        assert_eq!(s.bucket_of(10), Some(5));
        assert_eq!(s.bucket_of(0), None);
        assert_eq!(s.bucket_of(11), None);
        assert_eq!(s.range(3), (5, 8));
        assert_eq!(s.range(5), (10, 11));
        assert_eq!(s.round_down(7), 5);
        assert_eq!(s.round_down(14), 10);
        assert_eq!(s.round_down(0), 0);
    }
}
