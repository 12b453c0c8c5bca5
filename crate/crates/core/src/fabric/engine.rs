use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// A queued event. Ordered by `(time, seq)`; `seq` is unique per queue.
#[derive(Debug, Clone)]
pub struct Scheduled<E> {
    pub time: u64,
    pub seq: u64,
    pub event: E,
}

struct Entry<E>(Scheduled<E>);

impl<E> PartialEq for Entry<E> {
    fn eq(&self, o: &Self) -> bool {
        (self.0.time, self.0.seq) == (o.0.time, o.0.seq)
    }
}
impl<E> Eq for Entry<E> {}
impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl<E> Ord for Entry<E> {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        (self.0.time, self.0.seq).cmp(&(o.0.time, o.0.seq))
    }
}

/// Discrete-event queue with integer-nanosecond timestamps.
pub struct EventQueue<E> {
    heap: BinaryHeap<Reverse<Entry<E>>>,
    next_seq: u64,
    now: u64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            next_seq: 0,
            now: 0,
        }
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Time of the last popped event.
    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Schedules `event` at `time`, clamped to now. Returns its sequence number.
    pub fn push(&mut self, time: u64, event: E) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Entry(Scheduled {
            time: time.max(self.now),
            seq,
            event,
        })));
        seq
    }

    pub fn peek_time(&self) -> Option<u64> {
        self.heap.peek().map(|Reverse(e)| e.0.time)
    }

    pub fn pop(&mut self) -> Option<Scheduled<E>> {
        let Reverse(Entry(s)) = self.heap.pop()?;
        self.now = s.time;
        Some(s)
    }

    /// Pops the next event if it is due at or before `t_end`.
    pub fn pop_until(&mut self, t_end: u64) -> Option<Scheduled<E>> {
        if self.peek_time()? > t_end {
            return None;
        }
        self.pop()
    }

    /// Processes every event with timestamp `<= t_end` in order. The handler
    /// may schedule more events. Returns the number processed.
    pub fn run_until(
        &mut self,
        t_end: u64,
        mut handler: impl FnMut(&mut Self, Scheduled<E>),
    ) -> u64 {
        let mut n = 0;
        while let Some(ev) = self.pop_until(t_end) {
            handler(self, ev);
            n += 1;
        }
        n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_queue() {
        let mut q: EventQueue<()> = EventQueue::new();
        assert_eq!(q.run_until(1_000, |_, _| {}), 0);
    }

    #[test]
    fn ties_break_by_insertion() {
        let mut q = EventQueue::new();
        q.push(10, "b");
        q.push(5, "a");
        q.push(10, "c");
        let mut seen = Vec::new();
        q.run_until(100, |q, s| {
            seen.push(s.event);
            if s.event == "a" {
                q.push(10, "d");
            }
        });
        assert_eq!(seen, ["a", "b", "c", "d"]);
    }

    #[test]
    fn stops_at_horizon() {
        let mut q = EventQueue::new();
        q.push(10, 1);
        q.push(11, 2);
        assert_eq!(q.run_until(10, |_, _| {}), 1);
        assert_eq!(q.peek_time(), Some(11));
    }
}
