//! Fixed-point simulated time and the event queue.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use super::SimError;

/// Simulated time in integer nanoseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_ns(ns: u64) -> Self {
        SimTime(ns)
    }

    pub fn as_ns(self) -> u64 {
        self.0
    }

    pub fn as_ms(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn after(self, delay: SimTime) -> SimTime {
        SimTime(self.0 + delay.0)
    }

    pub fn since(self, earlier: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(earlier.0))
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:06}", self.0 / 1_000_000, self.0 % 1_000_000)
    }
}

/// Millisecond duration rounded to the nearest nanosecond.
pub fn ms(value: f64) -> Result<SimTime, SimError> {
    if !(value.is_finite() && value >= 0.0) {
        return Err(SimError::InvalidArgument(format!(
            "duration {value} ms is not a non-negative number"
        )));
    }
    Ok(SimTime((value * 1e6).round() as u64))
}

struct Entry<E> {
    at: SimTime,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.at, other.seq).cmp(&(self.at, self.seq))
    }
}

/// Events fire in `(time, insertion order)` order.
pub struct Scheduler<E> {
    now: SimTime,
    next_seq: u64,
    queue: BinaryHeap<Entry<E>>,
}

impl<E> Default for Scheduler<E> {
    fn default() -> Self {
        Scheduler {
            now: SimTime::ZERO,
            next_seq: 0,
            queue: BinaryHeap::new(),
        }
    }
}

impl<E> Scheduler<E> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Returns the sequence number given to the event.
    pub fn schedule_at(&mut self, at: SimTime, event: E) -> Result<u64, SimError> {
        if at < self.now {
            return Err(SimError::PastEvent { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Entry { at, seq, event });
        Ok(seq)
    }

    pub fn schedule_in(&mut self, delay: SimTime, event: E) -> Result<u64, SimError> {
        self.schedule_at(self.now.after(delay), event)
    }

    pub fn pop(&mut self) -> Option<(SimTime, E)> {
        let e = self.queue.pop()?;
        self.now = e.at;
        Some((e.at, e.event))
    }

    /// Dispatch until the queue is empty; returns the time of the last event.
    pub fn run_until_idle<F, Err>(&mut self, mut handler: F) -> Result<SimTime, Err>
    where
        F: FnMut(&mut Self, SimTime, E) -> Result<(), Err>,
    {
        while let Some((at, event)) = self.pop() {
            handler(self, at, event)?;
        }
        Ok(self.now)
    }
}
