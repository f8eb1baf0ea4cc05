//! Activation schedulers.
//!
//! A scheduler only decides *which* robot acts next. The kind of action is
//! fixed by that robot's phase (Look, then Compute, then Move), so every
//! policy automatically respects the per-robot cycle order.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchedulerPolicy {
    /// Lockstep rounds: every alive robot looks, then every one computes,
    /// then every one moves.
    Synchronous,
    /// Staggered round robin: in round `r` every alive robot `i` with
    /// `r >= i mod 3` advances one phase, in id order. Neighbouring robots
    /// are therefore always in different phases.
    RoundRobinAsync,
    /// Seeded random interleaving, constrained so that every alive robot
    /// finishes a cycle at least once per fairness window.
    RandomAdversary,
}

/// Fairness window of the random adversary for `n` robots.
pub fn fairness_window(n: usize) -> u64 {
    8 * n as u64
}

/// What the scheduler may know about a robot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub alive: bool,
    /// Actions left to finish the current cycle (3 when idle, 1 before Move).
    pub remaining: u8,
}

#[derive(Debug, Clone)]
pub struct Scheduler {
    policy: SchedulerPolicy,
    queue: Vec<usize>,
    cursor: usize,
    round: u64,
    window: u64,
    /// Event index of each robot's last completed cycle (Move), -1 at start.
    last_cycle_end: Vec<i64>,
    /// Event indices already taken by planned crashes, sorted.
    crash_slots: Vec<u64>,
}

impl Scheduler {
    pub fn new(policy: SchedulerPolicy, n: usize, crash_slots: &[u64]) -> Self {
        let mut crash_slots = crash_slots.to_vec();
        crash_slots.sort_unstable();
        Scheduler {
            policy,
            queue: Vec::new(),
            cursor: 0,
            round: 0,
            window: fairness_window(n),
            last_cycle_end: vec![-1; n],
            crash_slots,
        }
    }

    pub fn policy(&self) -> SchedulerPolicy {
        self.policy
    }

    /// Picks the robot that acts at `event_index`.
    pub fn next<R: Rng>(&mut self, slots: &[Slot], event_index: u64, rng: &mut R) -> Result<usize, SimError> {
        if !slots.iter().any(|s| s.alive) {
            return Err(SimError::AllCrashed);
        }
        let id = match self.policy {
            SchedulerPolicy::Synchronous | SchedulerPolicy::RoundRobinAsync => self.next_queued(slots),
            SchedulerPolicy::RandomAdversary => self.next_random(slots, event_index, rng),
        };
        if slots[id].remaining == 1 {
            self.last_cycle_end[id] = event_index as i64;
        }
        Ok(id)
    }

    fn next_queued(&mut self, slots: &[Slot]) -> usize {
        loop {
            while self.cursor < self.queue.len() {
                let id = self.queue[self.cursor];
                self.cursor += 1;
                if slots[id].alive {
                    return id;
                }
            }
            self.refill(slots);
        }
    }

    fn refill(&mut self, slots: &[Slot]) {
        let alive = (0..slots.len()).filter(|&i| slots[i].alive);
        self.queue = match self.policy {
            SchedulerPolicy::Synchronous => {
                let ids: Vec<usize> = alive.collect();
                ids.iter().chain(&ids).chain(&ids).copied().collect()
            }
            _ => {
                let r = self.round;
                alive.filter(|&i| r >= (i % 3) as u64).collect()
            }
        };
        self.round += 1;
        self.cursor = 0;
    }

    fn next_random<R: Rng>(&mut self, slots: &[Slot], now: u64, rng: &mut R) -> usize {
        let alive: Vec<usize> = (0..slots.len()).filter(|&i| slots[i].alive).collect();
        let pick = alive[rng.random_range(0..alive.len())];
        if self.feasible_after(slots, pick, now) {
            pick
        } else {
            // earliest deadline first keeps a feasible schedule feasible
            *alive
                .iter()
                .min_by_key(|&&i| (self.last_cycle_end[i], i))
                .unwrap()
        }
    }

    /// Whether, after `pick` acts at `now`, every alive robot can still
    /// finish its cycle before its deadline.
    fn feasible_after(&self, slots: &[Slot], pick: usize, now: u64) -> bool {
        let mut demands: Vec<(i64, u64)> = slots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.alive)
            .map(|(i, s)| {
                let mut last = self.last_cycle_end[i];
                let mut rem = s.remaining as u64;
                if i == pick {
                    rem -= 1;
                    if rem == 0 {
                        last = now as i64;
                        rem = 3;
                    }
                }
                (last + self.window as i64, rem)
            })
            .collect();
        demands.sort_unstable();
        let start = now + 1;
        let mut needed = 0u64;
        for (deadline, rem) in demands {
            needed += rem;
            if deadline < start as i64 {
                return false;
            }
            let deadline = deadline as u64;
            let crashes = self
                .crash_slots
                .iter()
                .filter(|&&c| c >= start && c <= deadline)
                .count() as u64;
            let available = (deadline - start + 1).saturating_sub(crashes);
            if needed > available {
                return false;
            }
        }
        true
    }
}
