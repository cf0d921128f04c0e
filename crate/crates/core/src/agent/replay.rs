use rand::Rng;

/// One recorded interaction. Besides the classic `(S, A, S′, R)` quadruple
/// the buffer keeps what the learned reward designs need at batch time: the
/// true sum rate, the upper bound of the pre-move state, and the episode
/// terminal flag (γ = 1 is only sound with bounded episodes).
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub sum_rate: f64,
    pub upper_bound: f64,
    pub done: bool,
}

/// Fixed-capacity ring buffer over transitions: overwrites the oldest entry
/// once full, samples uniformly without replacement within a batch.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    storage: Vec<Transition>,
    capacity: usize,
    next: usize,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { storage: Vec::with_capacity(capacity.min(1 << 20)), capacity, next: 0, inserted: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn total_inserted(&self) -> u64 {
        self.inserted
    }

    pub fn push(&mut self, t: Transition) {
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.next] = t;
            self.next = (self.next + 1) % self.capacity;
        }
        self.inserted += 1;
    }

    pub fn get(&self, idx: usize) -> &Transition {
        &self.storage[idx]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.storage.iter()
    }

    /// Uniform batch indices without replacement.
    pub fn sample_indices(&self, batch: usize, rng: &mut impl Rng) -> Vec<usize> {
        debug_assert!(batch <= self.len());
        rand::seq::index::sample(rng, self.len(), batch).into_vec()
    }
}
