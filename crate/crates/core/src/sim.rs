//! Discrete-event engine: fixed-point clock, `(time, seq)` ordered queue with
//! cancellation, and named deterministic random streams.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::ops::{Add, Sub};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::SimError;

/// Simulated time in integer nanoseconds.
///
/// Integer time keeps event ordering independent of floating point
/// behaviour on the host.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_nanos(ns: u64) -> Self {
        SimTime(ns)
    }

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us * 1_000)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * 1_000_000_000)
    }

    /// Rounds to the nearest nanosecond. Negative and NaN inputs clamp to zero.
    pub fn from_secs_f64(s: f64) -> Self {
        if !(s > 0.0) {
            return SimTime::ZERO;
        }
        SimTime((s * 1e9).round() as u64)
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e9
    }

    pub fn saturating_sub(self, other: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(other.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_add(rhs.0))
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:09}", self.0 / 1_000_000_000, self.0 % 1_000_000_000)
    }
}

/// Who an event is addressed to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EventTarget {
    Node(usize),
    Harness,
}

impl fmt::Display for EventTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventTarget::Node(id) => write!(f, "{id}"),
            EventTarget::Harness => f.write_str("harness"),
        }
    }
}

/// Handle returned by [`EventQueue::schedule`], usable for cancellation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventHandle(u64);

/// A scheduled event as it leaves the queue.
#[derive(Clone, Debug)]
pub struct SimEvent<T> {
    pub fire_at: SimTime,
    pub seq: u64,
    pub target: EventTarget,
    pub payload: T,
}

struct Entry<T> {
    fire_at: SimTime,
    seq: u64,
    target: EventTarget,
    payload: T,
}

impl<T> PartialEq for Entry<T> {
    fn eq(&self, other: &Self) -> bool {
        (self.fire_at, self.seq) == (other.fire_at, other.seq)
    }
}
impl<T> Eq for Entry<T> {}
impl<T> PartialOrd for Entry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Entry<T> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.fire_at, self.seq).cmp(&(other.fire_at, other.seq))
    }
}

/// Priority queue of future events ordered by `(fire_at, seq)`.
pub struct EventQueue<T> {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Reverse<Entry<T>>>,
    live: HashSet<u64>,
}

impl<T> Default for EventQueue<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T> EventQueue<T> {
    pub fn new() -> Self {
        EventQueue {
            now: SimTime::ZERO,
            next_seq: 0,
            heap: BinaryHeap::new(),
            live: HashSet::new(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Number of events still pending (cancelled events excluded).
    pub fn len(&self) -> usize {
        self.live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.live.is_empty()
    }

    pub fn schedule(
        &mut self,
        fire_at: SimTime,
        target: EventTarget,
        payload: T,
    ) -> Result<EventHandle, SimError> {
        if fire_at < self.now {
            return Err(SimError::ScheduleInPast {
                at: fire_at,
                now: self.now,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.live.insert(seq);
        self.heap.push(Reverse(Entry {
            fire_at,
            seq,
            target,
            payload,
        }));
        Ok(EventHandle(seq))
    }

    /// Schedules `delay` after the current clock. Never fails.
    pub fn schedule_in(&mut self, delay: SimTime, target: EventTarget, payload: T) -> EventHandle {
        let at = self.now + delay;
        self.schedule(at, target, payload)
            .expect("now + delay is never in the past")
    }

    /// Returns true iff the event was pending; it will never fire afterwards.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        self.live.remove(&handle.0)
    }

    /// Pops the next live event with `fire_at <= t_end`, advancing the clock.
    pub fn pop_until(&mut self, t_end: SimTime) -> Option<SimEvent<T>> {
        loop {
            let top = self.heap.peek()?;
            if top.0.fire_at > t_end {
                return None;
            }
            let Reverse(entry) = self.heap.pop().expect("peeked");
            if !self.live.remove(&entry.seq) {
                continue;
            }
            debug_assert!(entry.fire_at >= self.now);
            self.now = entry.fire_at;
            return Some(SimEvent {
                fire_at: entry.fire_at,
                seq: entry.seq,
                target: entry.target,
                payload: entry.payload,
            });
        }
    }

    /// Moves the clock forward to `t` without executing anything.
    pub fn advance_to(&mut self, t: SimTime) -> Result<(), SimError> {
        if t < self.now {
            return Err(SimError::ScheduleInPast { at: t, now: self.now });
        }
        self.now = t;
        Ok(())
    }

    /// Executes every event with `fire_at <= t_end` in order, then sets the
    /// clock to `t_end`. The handler may schedule and cancel further events.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> Result<u64, SimError>
    where
        F: FnMut(&mut Self, SimEvent<T>),
    {
        if t_end < self.now {
            return Err(SimError::ScheduleInPast {
                at: t_end,
                now: self.now,
            });
        }
        let mut executed = 0;
        while let Some(ev) = self.pop_until(t_end) {
            handler(self, ev);
            executed += 1;
        }
        self.now = t_end;
        Ok(executed)
    }
}

/// Purpose label of a random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StreamId {
    Placement,
    MacJitter,
    Loss,
}

impl StreamId {
    fn salt(self) -> u64 {
        match self {
            StreamId::Placement => 0x706c_6163_656d_656e,
            StreamId::MacJitter => 0x6d61_632d_6a69_7474,
            StreamId::Loss => 0x6c6f_7373_2d73_7472,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic generator for one `(seed, stream)` pair. ChaCha8 is
/// specified independently of the host, so draws match across platforms.
pub fn rng_stream(seed: u64, stream: StreamId) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ stream.salt()))
}

/// One line of the optional event-trace dump.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceLine {
    pub time: SimTime,
    pub seq: u64,
    pub target: EventTarget,
    pub kind: String,
}

impl fmt::Display for TraceLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{}\t{}", self.time, self.seq, self.target, self.kind)
    }
}
