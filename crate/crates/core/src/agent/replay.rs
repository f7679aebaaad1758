use crate::rng::Rng;

/// Fixed-capacity ring buffer; the oldest entry is overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    items: Vec<T>,
    cursor: usize,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, items: Vec::with_capacity(capacity.min(4096)), cursor: 0 }
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[self.cursor] = item;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
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

    pub fn get(&self, i: usize) -> &T {
        &self.items[i]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut T {
        &mut self.items[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }

    /// `n` indices drawn uniformly with replacement.
    pub fn sample_indices(&self, n: usize, rng: &mut Rng) -> Vec<usize> {
        (0..n).map(|_| rng.next_int(self.items.len()).expect("sampling from an empty buffer")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifo_overwrite() {
        let mut b = ReplayBuffer::new(5);
        for i in 0..8 {
            b.push(i);
            assert!(b.len() <= 5);
        }
        let mut items: Vec<_> = b.iter().copied().collect();
        items.sort();
        assert_eq!(items, vec![3, 4, 5, 6, 7]);
    }

    #[test]
    fn samples_stay_in_range() {
        let mut b = ReplayBuffer::new(10);
        (0..4).for_each(|i| b.push(i));
        let mut rng = Rng::new(0);
        assert!(b.sample_indices(100, &mut rng).iter().all(|&i| i < 4));
    }
}
