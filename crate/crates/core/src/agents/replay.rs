use std::collections::VecDeque;

use rand::Rng;

/// Bounded FIFO experience memory with uniform sampling.
///
/// Records carry no behaviour history: transitions collected under
/// different policies are mixed freely.
#[derive(Clone, Debug)]
pub struct ReplayBuffer<T> {
    items: VecDeque<T>,
    capacity: usize,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer { items: VecDeque::with_capacity(capacity.min(1 << 16)), capacity }
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(item);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> Option<&T> {
        self.items.get(i)
    }

    /// `n` indices drawn uniformly with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<usize> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n).map(|_| rng.gen_range(0..self.items.len())).collect()
    }

    pub fn sample<'a, R: Rng + ?Sized>(&'a self, rng: &mut R, n: usize) -> impl Iterator<Item = &'a T> + 'a {
        self.sample_indices(rng, n).into_iter().map(move |i| &self.items[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::seeded_rng;

    #[test]
    fn evicts_oldest_first() {
        let mut buf = ReplayBuffer::new(3);
        for i in 0..5 {
            buf.push(i);
        }
        assert_eq!(buf.len(), 3);
        assert_eq!((0..3).map(|i| *buf.get(i).unwrap()).collect::<Vec<_>>(), vec![2, 3, 4]);
    }

    #[test]
    fn uniform_sampling_chi_squared() {
        let k = 50;
        let mut buf = ReplayBuffer::new(k);
        for i in 0..k {
            buf.push(i);
        }
        let draws = 50_000;
        let mut counts = vec![0usize; k];
        let mut rng = seeded_rng(42);
        for i in buf.sample_indices(&mut rng, draws) {
            counts[i] += 1;
        }
        let expected = draws as f64 / k as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // Upper 1% point of chi-squared with 49 degrees of freedom.
        assert!(chi2 < 74.919, "chi2 = {chi2}");
    }
}
