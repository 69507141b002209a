use alloc::vec;
use alloc::vec::Vec;

use crate::learning::Greedy;

/// True iff the last `window` greedy snapshots are identical and exploration
/// has reached its floor.
pub fn detect_convergence(history: &[Vec<Greedy>], window: usize, epsilon_at_floor: bool) -> bool {
    if window == 0 || !epsilon_at_floor || history.len() < window {
        return false;
    }
    let recent = &history[history.len() - window..];
    recent.iter().all(|snap| snap == &recent[0])
}

/// Streaming form of [`detect_convergence`]: counts how many consecutive
/// snapshots matched the latest one.
#[derive(Debug, Clone)]
pub struct ConvergenceTracker {
    window: u64,
    last: Vec<Greedy>,
    stable: u64,
}

impl ConvergenceTracker {
    pub fn new(window: u64) -> Self {
        Self {
            window,
            last: Vec::new(),
            stable: 0,
        }
    }

    pub fn observe(&mut self, snapshot: &[Greedy]) {
        if self.stable > 0 && self.last == snapshot {
            self.stable += 1;
        } else {
            self.last.clear();
            self.last.extend_from_slice(snapshot);
            self.stable = 1;
        }
    }

    pub fn stable_steps(&self) -> u64 {
        self.stable
    }

    pub fn converged(&self, epsilon_at_floor: bool) -> bool {
        self.window > 0 && epsilon_at_floor && self.stable >= self.window
    }
}

/// Rolling sum of greedy cooperation over the last `capacity` snapshots.
#[derive(Debug, Clone)]
pub struct MeasurementWindow {
    capacity: usize,
    cells: usize,
    ring: Vec<u8>,
    filled: usize,
    head: usize,
    sums: Vec<u32>,
}

impl MeasurementWindow {
    pub fn new(capacity: usize, cells: usize) -> Self {
        Self {
            capacity,
            cells,
            ring: vec![0; capacity * cells],
            filled: 0,
            head: 0,
            sums: vec![0; cells],
        }
    }

    pub fn push(&mut self, snapshot: &[Greedy]) {
        let slot = &mut self.ring[self.head * self.cells..(self.head + 1) * self.cells];
        let evict = self.filled == self.capacity;
        for ((old, sum), g) in slot.iter_mut().zip(self.sums.iter_mut()).zip(snapshot) {
            if evict {
                *sum -= u32::from(*old);
            }
            let units = g.half_units() as u8;
            *old = units;
            *sum += u32::from(units);
        }
        if !evict {
            self.filled += 1;
        }
        self.head = (self.head + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.filled
    }

    pub fn is_empty(&self) -> bool {
        self.filled == 0
    }

    /// Per-cell cooperation frequency over the filled part of the window.
    pub fn frequencies(&self) -> Vec<f64> {
        let denom = 2.0 * self.filled.max(1) as f64;
        self.sums.iter().map(|&s| s as f64 / denom).collect()
    }
}
