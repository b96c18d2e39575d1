use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Independent ChaCha stream keyed by `(seed, label)`.
///
/// Streams for different labels do not interact, so the order in which tasks
/// are visited cannot change what any single task draws.
pub fn stream_rng(seed: u64, label: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Uniform draws without replacement from a fixed member list
/// (incremental Fisher-Yates).
#[derive(Debug, Clone)]
pub struct TaskSampler {
    rng: ChaCha8Rng,
    members: Vec<usize>,
    taken: usize,
}

impl TaskSampler {
    pub fn new(seed: u64, label: &str, members: &[usize]) -> Self {
        Self {
            rng: stream_rng(seed, label),
            members: members.to_vec(),
            taken: 0,
        }
    }

    pub fn remaining(&self) -> usize {
        self.members.len() - self.taken
    }

    pub fn draw(&mut self) -> Option<usize> {
        if self.taken == self.members.len() {
            return None;
        }
        let j = self.rng.gen_range(self.taken..self.members.len());
        self.members.swap(self.taken, j);
        self.taken += 1;
        Some(self.members[self.taken - 1])
    }
}
