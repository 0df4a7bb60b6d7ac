use rand::Rng;

/// One stored step. `combined_reward = extrinsic_reward + w * intrinsic_reward`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s_c: Vec<f64>,
    pub action: Vec<f64>,
    pub combined_reward: f64,
    pub extrinsic_reward: f64,
    pub intrinsic_reward: f64,
    pub next_s_c: Vec<f64>,
    pub done: bool,
}

/// Fixed-capacity FIFO buffer in flat storage; the oldest entry is
/// overwritten once full.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    state_dim: usize,
    action_dim: usize,
    capacity: usize,
    len: usize,
    next: usize,
    states: Vec<f64>,
    actions: Vec<f64>,
    next_states: Vec<f64>,
    combined: Vec<f64>,
    extrinsic: Vec<f64>,
    intrinsic: Vec<f64>,
    not_done: Vec<f64>,
}

/// Sampled minibatch, row-major.
#[derive(Debug, Clone)]
pub struct Batch {
    pub size: usize,
    pub states: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<f64>,
    pub not_done: Vec<f64>,
}

impl ReplayBuffer {
    pub fn new(state_dim: usize, action_dim: usize, capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            state_dim,
            action_dim,
            capacity,
            len: 0,
            next: 0,
            states: vec![0.0; capacity * state_dim],
            actions: vec![0.0; capacity * action_dim],
            next_states: vec![0.0; capacity * state_dim],
            combined: vec![0.0; capacity],
            extrinsic: vec![0.0; capacity],
            intrinsic: vec![0.0; capacity],
            not_done: vec![0.0; capacity],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: &Transition) {
        let (d, a, i) = (self.state_dim, self.action_dim, self.next);
        self.states[i * d..(i + 1) * d].copy_from_slice(&t.s_c);
        self.actions[i * a..(i + 1) * a].copy_from_slice(&t.action);
        self.next_states[i * d..(i + 1) * d].copy_from_slice(&t.next_s_c);
        self.combined[i] = t.combined_reward;
        self.extrinsic[i] = t.extrinsic_reward;
        self.intrinsic[i] = t.intrinsic_reward;
        self.not_done[i] = if t.done { 0.0 } else { 1.0 };
        self.next = (self.next + 1) % self.capacity;
        self.len = (self.len + 1).min(self.capacity);
    }

    /// Entry at storage slot `i` (`i < len`).
    pub fn get(&self, i: usize) -> Transition {
        assert!(i < self.len, "slot {i} out of range");
        let (d, a) = (self.state_dim, self.action_dim);
        Transition {
            s_c: self.states[i * d..(i + 1) * d].to_vec(),
            action: self.actions[i * a..(i + 1) * a].to_vec(),
            combined_reward: self.combined[i],
            extrinsic_reward: self.extrinsic[i],
            intrinsic_reward: self.intrinsic[i],
            next_s_c: self.next_states[i * d..(i + 1) * d].to_vec(),
            done: self.not_done[i] == 0.0,
        }
    }

    pub fn sample_indices(&self, size: usize, rng: &mut impl Rng) -> Vec<usize> {
        assert!(self.len > 0, "cannot sample an empty buffer");
        (0..size).map(|_| rng.random_range(0..self.len)).collect()
    }

    pub fn gather(&self, indices: &[usize]) -> Batch {
        let (d, a) = (self.state_dim, self.action_dim);
        let mut b = Batch {
            size: indices.len(),
            states: Vec::with_capacity(indices.len() * d),
            actions: Vec::with_capacity(indices.len() * a),
            rewards: Vec::with_capacity(indices.len()),
            next_states: Vec::with_capacity(indices.len() * d),
            not_done: Vec::with_capacity(indices.len()),
        };
        for &i in indices {
            b.states.extend_from_slice(&self.states[i * d..(i + 1) * d]);
            b.actions
                .extend_from_slice(&self.actions[i * a..(i + 1) * a]);
            b.next_states
                .extend_from_slice(&self.next_states[i * d..(i + 1) * d]);
            b.rewards.push(self.combined[i]);
            b.not_done.push(self.not_done[i]);
        }
        b
    }

    pub fn sample(&self, size: usize, rng: &mut impl Rng) -> Batch {
        let idx = self.sample_indices(size, rng);
        self.gather(&idx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn transition(v: f64) -> Transition {
        Transition {
            s_c: vec![v, v],
            action: vec![v],
            combined_reward: v,
            extrinsic_reward: v,
            intrinsic_reward: 0.0,
            next_s_c: vec![v + 1.0, v + 1.0],
            done: v as i64 % 2 == 0,
        }
    }

    #[test]
    fn fifo_overwrite() {
        let mut buf = ReplayBuffer::new(2, 1, 3);
        for i in 0..5 {
            buf.push(&transition(i as f64));
        }
        assert_eq!(buf.len(), 3);
        // slots hold 3, 4, 2 after wrap-around
        assert_eq!(buf.get(0), transition(3.0));
        assert_eq!(buf.get(1), transition(4.0));
        assert_eq!(buf.get(2), transition(2.0));
    }

    #[test]
    fn samples_stay_in_filled_region() {
        let mut buf = ReplayBuffer::new(2, 1, 100);
        for i in 0..7 {
            buf.push(&transition(i as f64));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let idx = buf.sample_indices(1000, &mut rng);
        assert!(idx.iter().all(|&i| i < 7));
        let b = buf.gather(&idx[..4]);
        assert_eq!(b.states.len(), 8);
        assert_eq!(b.next_states[0], b.states[0] + 1.0);
    }
}
