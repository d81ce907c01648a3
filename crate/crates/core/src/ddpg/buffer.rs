use std::collections::VecDeque;

use crate::numerics::SeededRng;

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub terminal: bool,
}

/// Episodic replay store. Transitions are grouped by episode so that
/// contiguous subsequences can be replayed through recurrent networks;
/// eviction removes whole episodes, oldest first.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    episodes: VecDeque<Vec<Transition>>,
    current: Vec<Transition>,
    len: usize,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            episodes: VecDeque::new(),
            current: Vec::new(),
            len: 0,
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn episode_count(&self) -> usize {
        self.episodes.len() + usize::from(!self.current.is_empty())
    }

    pub fn store(&mut self, t: Transition) {
        let terminal = t.terminal;
        self.current.push(t);
        self.len += 1;
        if terminal {
            self.end_episode();
        }
        self.evict();
    }

    /// Closes the in-progress episode (horizon truncation).
    pub fn end_episode(&mut self) {
        if !self.current.is_empty() {
            self.episodes.push_back(std::mem::take(&mut self.current));
        }
    }

    fn evict(&mut self) {
        while self.len > self.capacity {
            match self.episodes.pop_front() {
                Some(ep) => self.len -= ep.len(),
                // Only the current episode remains and it already exceeds
                // capacity; keep it intact rather than splitting it.
                None => break,
            }
        }
    }

    fn eligible<'a>(&'a self, l: usize) -> Vec<&'a [Transition]> {
        let mut eps: Vec<&[Transition]> = self
            .episodes
            .iter()
            .filter(|e| e.len() >= l)
            .map(|e| e.as_slice())
            .collect();
        if self.current.len() >= l {
            eps.push(self.current.as_slice());
        }
        eps
    }

    /// Draws `m` length-`l` windows, uniform over all valid (episode, offset)
    /// pairs. Windows never cross an episode boundary. Returns None when no
    /// stored episode is long enough.
    pub fn sample_sequences(&self, m: usize, l: usize, rng: &mut SeededRng) -> Option<Vec<&[Transition]>> {
        let eps = self.eligible(l);
        if eps.is_empty() {
            return None;
        }
        let counts: Vec<usize> = eps.iter().map(|e| e.len() - l + 1).collect();
        let total: usize = counts.iter().sum();
        let mut out = Vec::with_capacity(m);
        for _ in 0..m {
            let mut pick = rng.index(total);
            for (e, &c) in eps.iter().zip(counts.iter()) {
                if pick < c {
                    out.push(&e[pick..pick + l]);
                    break;
                }
                pick -= c;
            }
        }
        Some(out)
    }
}
