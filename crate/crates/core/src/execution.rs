//! Finite executions over `deliver`/`next`/`stop` events, the standard,
//! canonical and shifted constructions, and heard-of extraction.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::collection::{check_shape, Collection, HeardOfCollection};
use crate::error::{Error, Result};
use crate::process::ProcessSet;
use crate::state::LocalState;
use crate::strategy::Strategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "lowercase")]
pub enum Event {
    /// The round-`round` message of `sender` reaches `receiver`.
    Deliver {
        round: usize,
        sender: usize,
        receiver: usize,
    },
    /// `process` changes round.
    Next { process: usize },
    Stop,
}

impl Event {
    pub fn deliver(round: usize, sender: usize, receiver: usize) -> Self {
        Event::Deliver {
            round,
            sender,
            receiver,
        }
    }

    pub fn next(process: usize) -> Self {
        Event::Next { process }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Deliver {
                round,
                sender,
                receiver,
            } => write!(f, "D {round} {sender} {receiver}"),
            Event::Next { process } => write!(f, "N {process}"),
            Event::Stop => f.write_str("S"),
        }
    }
}

impl FromStr for Event {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let num = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Malformed(format!("'{s}' is not a nonnegative integer in '{line}'")))
        };
        match fields.as_slice() {
            ["D", r, k, j] => Ok(Event::deliver(num(r)?, num(k)?, num(j)?)),
            ["N", j] => Ok(Event::next(num(j)?)),
            ["S"] => Ok(Event::Stop),
            _ => Err(Error::Malformed(format!("unrecognized event '{line}'"))),
        }
    }
}

/// How events inside one block are sorted. Both orders must give the same
/// heard-of collections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventOrder {
    /// Ascending `(round, sender, receiver)`, and ascending process for nexts.
    #[default]
    Canonical,
    Reversed,
}

impl EventOrder {
    fn sort(self, block: &mut [Event]) {
        block.sort();
        if self == EventOrder::Reversed {
            block.reverse();
        }
    }
}

/// The first event breaking a rule, with a reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub index: usize,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "event {}: {}", self.index, self.reason)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Execution {
    pub n: usize,
    pub horizon: usize,
    pub events: Vec<Event>,
}

impl Execution {
    pub fn new(n: usize, horizon: usize, events: Vec<Event>) -> Self {
        Execution { n, horizon, events }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn next_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n];
        for e in &self.events {
            if let Event::Next { process } = e {
                if *process < self.n {
                    counts[*process] += 1;
                }
            }
        }
        counts
    }

    /// Delivery after sending, unique delivery, and once stopped forever stopped.
    pub fn validate(&self) -> std::result::Result<(), Violation> {
        let n = self.n;
        let mut nexts = vec![0usize; n];
        let mut delivered = std::collections::HashSet::new();
        let mut stopped = false;
        for (index, e) in self.events.iter().enumerate() {
            let fail = |reason: String| Err(Violation { index, reason });
            if stopped && *e != Event::Stop {
                return fail("only stop may follow stop".into());
            }
            match *e {
                Event::Deliver {
                    round,
                    sender,
                    receiver,
                } => {
                    if sender >= n || receiver >= n {
                        return fail(format!("process index out of range for n={n}"));
                    }
                    if round == 0 {
                        return fail("rounds start at 1".into());
                    }
                    if nexts[sender] + 1 < round {
                        return fail(format!(
                            "p{} has changed round {} times and cannot have sent its round-{round} message",
                            sender + 1,
                            nexts[sender]
                        ));
                    }
                    if !delivered.insert((round, sender, receiver)) {
                        return fail(format!(
                            "round-{round} message from p{} to p{} delivered twice",
                            sender + 1,
                            receiver + 1
                        ));
                    }
                }
                Event::Next { process } => {
                    if process >= n {
                        return fail(format!("process index out of range for n={n}"));
                    }
                    nexts[process] += 1;
                }
                Event::Stop => stopped = true,
            }
        }
        Ok(())
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_ok()
    }

    /// `q_p[i]`: the state of `p` just before event `i`.
    pub fn local_state(&self, p: usize, i: usize) -> Result<LocalState> {
        if p >= self.n {
            return Err(Error::InvalidParameter(format!("process {p} outside n={}", self.n)));
        }
        if i > self.events.len() {
            return Err(Error::InvalidParameter(format!(
                "index {i} beyond trace of length {}",
                self.events.len()
            )));
        }
        let mut q = LocalState::initial();
        for e in &self.events[..i] {
            match *e {
                Event::Deliver {
                    round,
                    sender,
                    receiver,
                } if receiver == p => q.receive(round, sender),
                Event::Next { process } if process == p => q.advance(),
                _ => {}
            }
        }
        Ok(q)
    }

    /// Every mandated message of rounds up to the horizon is delivered and
    /// every delivery is mandated. Round `horizon + 1` messages lie beyond the
    /// truncation and may be delivered or not.
    pub fn check_collection(&self, c: &Collection) -> std::result::Result<(), Violation> {
        let (n, horizon) = (c.n(), c.horizon());
        let shape_error = |reason: String| Violation {
            index: self.events.len(),
            reason,
        };
        if n != self.n {
            return Err(shape_error(format!("trace has n={} but collection has n={n}", self.n)));
        }
        let nexts = self.next_counts();
        let mut seen = vec![false; n * n * horizon];
        for (index, e) in self.events.iter().enumerate() {
            if let Event::Deliver {
                round,
                sender,
                receiver,
            } = *e
            {
                if round == horizon + 1 {
                    continue;
                }
                if round == 0 || round > horizon + 1 {
                    return Err(Violation {
                        index,
                        reason: format!("round {round} lies beyond the horizon {horizon}"),
                    });
                }
                if !c.get(round, receiver).contains(sender) {
                    return Err(Violation {
                        index,
                        reason: format!(
                            "p{} is not in c({round}, p{})",
                            sender + 1,
                            receiver + 1
                        ),
                    });
                }
                seen[((round - 1) * n + sender) * n + receiver] = true;
            }
        }
        for r in 1..=horizon {
            for j in 0..n {
                for k in c.get(r, j).iter() {
                    if nexts[k] + 1 >= r && !seen[((r - 1) * n + k) * n + j] {
                        return Err(shape_error(format!(
                            "mandated round-{r} message from p{} to p{} is never delivered",
                            k + 1,
                            j + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_execution_of_collection(&self, c: &Collection) -> bool {
        self.check_collection(c).is_ok()
    }

    /// Every next happens from a state of `f`, and no process ends short of the
    /// horizon in a state of `f` (bounded fairness).
    pub fn check_strategy(&self, f: &Strategy) -> std::result::Result<(), Violation> {
        let mut states = vec![LocalState::initial(); self.n];
        let mut nexts = vec![0usize; self.n];
        for (index, e) in self.events.iter().enumerate() {
            match *e {
                Event::Deliver {
                    round,
                    sender,
                    receiver,
                } if receiver < self.n => states[receiver].receive(round, sender),
                Event::Next { process } if process < self.n => {
                    if !f.contains(&states[process]) {
                        return Err(Violation {
                            index,
                            reason: format!(
                                "p{} changes round from {} which the strategy rejects",
                                process + 1,
                                states[process]
                            ),
                        });
                    }
                    states[process].advance();
                    nexts[process] += 1;
                }
                _ => {}
            }
        }
        for p in 0..self.n {
            if nexts[p] < self.horizon && f.contains(&states[p]) {
                return Err(Violation {
                    index: self.events.len(),
                    reason: format!(
                        "p{} stays at round {} although the strategy lets it move",
                        p + 1,
                        nexts[p] + 1
                    ),
                });
            }
        }
        Ok(())
    }

    pub fn is_execution_of_strategy(&self, f: &Strategy) -> bool {
        self.check_strategy(f).is_ok()
    }

    /// `ho(r, p)`: senders of round-`r` messages received by `p` before its
    /// `r`-th next.
    pub fn extract_heardof(&self) -> Result<HeardOfCollection> {
        let (n, horizon) = (self.n, self.horizon);
        check_shape(n, horizon)?;
        let mut current = vec![LocalState::initial(); n];
        let mut ho = Collection::filled(n, horizon, ProcessSet::EMPTY);
        let mut nexts = vec![0usize; n];
        for e in &self.events {
            match *e {
                Event::Deliver {
                    round,
                    sender,
                    receiver,
                } if receiver < n => current[receiver].receive(round, sender),
                Event::Next { process } if process < n => {
                    nexts[process] += 1;
                    let r = nexts[process];
                    if r <= horizon {
                        ho.set(r, process, current[process].heard(r));
                    }
                    current[process].advance();
                }
                _ => {}
            }
        }
        if let Some(p) = (0..n).find(|&p| nexts[p] < horizon) {
            return Err(Error::IncompleteTrace {
                process: p,
                nexts: nexts[p],
                horizon,
            });
        }
        Ok(ho)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }

    /// Parses one event per line. Blank lines and `#` comments are skipped.
    pub fn from_text(n: usize, horizon: usize, text: &str) -> Result<Execution> {
        let events = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(Event::from_str)
            .collect::<Result<Vec<_>>>()?;
        Ok(Execution::new(n, horizon, events))
    }
}

/// Runs `f` on `c` phase by phase: deliver everything sent by the processes
/// that just moved, then move every process whose state `f` accepts. A phase
/// where nobody can move ends the trace with `stop`.
pub fn standard_execution(f: &Strategy, c: &Collection, order: EventOrder) -> Execution {
    let (n, horizon) = (c.n(), c.horizon());
    let mut events = Vec::new();
    let mut states = vec![LocalState::initial(); n];
    let mut nexts = vec![0usize; n];
    let mut moved: Vec<usize> = (0..n).collect();
    loop {
        let mut dels = Vec::new();
        for &k in &moved {
            let r = nexts[k] + 1;
            if r > horizon {
                continue;
            }
            for j in 0..n {
                if c.get(r, j).contains(k) {
                    dels.push(Event::deliver(r, k, j));
                }
            }
        }
        order.sort(&mut dels);
        for e in &dels {
            if let Event::Deliver {
                round,
                sender,
                receiver,
            } = *e
            {
                states[receiver].receive(round, sender);
            }
        }
        events.extend(dels);
        if nexts.iter().all(|&a| a >= horizon) {
            break;
        }
        moved = (0..n)
            .filter(|&j| nexts[j] < horizon && f.contains(&states[j]))
            .collect();
        if moved.is_empty() {
            events.push(Event::Stop);
            break;
        }
        let mut changes: Vec<Event> = moved.iter().map(|&j| Event::next(j)).collect();
        order.sort(&mut changes);
        for &j in &moved {
            states[j].advance();
            nexts[j] += 1;
        }
        events.extend(changes);
    }
    Execution::new(n, horizon, events)
}

/// Realizes `ho` over the total collection: phase `r` delivers the on-time
/// round-`r` messages and the round-`r-1` leftovers, then every process moves.
/// Round-`horizon` leftovers close the trace.
pub fn canonical_execution(ho: &HeardOfCollection, order: EventOrder) -> Execution {
    let (n, horizon) = (ho.n(), ho.horizon());
    let mut events = Vec::new();
    for r in 1..=horizon + 1 {
        let mut dels = on_time(ho, r);
        if r > 1 {
            dels.extend(leftovers(ho, r - 1));
        }
        order.sort(&mut dels);
        events.extend(dels);
        if r <= horizon {
            let mut changes: Vec<Event> = (0..n).map(Event::next).collect();
            order.sort(&mut changes);
            events.extend(changes);
        }
    }
    Execution::new(n, horizon, events)
}

fn on_time(ho: &HeardOfCollection, r: usize) -> Vec<Event> {
    if r > ho.horizon() {
        return Vec::new();
    }
    (0..ho.n())
        .flat_map(|j| ho.get(r, j).iter().map(move |k| Event::deliver(r, k, j)))
        .collect()
}

fn leftovers(ho: &HeardOfCollection, r: usize) -> Vec<Event> {
    let full = ProcessSet::full(ho.n());
    (0..ho.n())
        .flat_map(|j| {
            full.difference(ho.get(r, j))
                .iter()
                .map(move |k| Event::deliver(r, k, j))
        })
        .collect()
}

/// Total number of missing heard-of entries at round `r`.
pub fn round_deficiency(ho: &HeardOfCollection, r: usize) -> usize {
    (0..ho.n()).map(|j| ho.n() - ho.get(r, j).len()).sum()
}

/// The canonical execution where each process missing one message at round
/// `r` postpones its `r`-th next until it has received the round-`r+1`
/// messages of the other processes that `ho` lists as heard at `r+1`. Those
/// come first in the next block, then the next, then everything else.
pub fn shifted_canonical_execution(ho: &HeardOfCollection, order: EventOrder) -> Result<Execution> {
    let (n, horizon) = (ho.n(), ho.horizon());
    let mut deficient: Vec<Option<usize>> = vec![None; horizon + 1];
    for r in 1..=horizon {
        match round_deficiency(ho, r) {
            0 => {}
            1 => deficient[r] = (0..n).find(|&j| ho.get(r, j).len() + 1 == n),
            d => {
                return Err(Error::Precondition(format!(
                    "round {r} misses {d} heard-of entries; at most one per round can be shifted"
                )))
            }
        }
    }
    let mut events = Vec::new();
    for r in 1..=horizon + 1 {
        let mut dels = on_time(ho, r);
        if r > 1 {
            dels.extend(leftovers(ho, r - 1));
        }
        let shifted = if r > 1 { deficient[r - 1] } else { None };
        match shifted {
            None => {
                order.sort(&mut dels);
                events.extend(dels);
            }
            Some(j) => {
                let lead_senders = if r <= horizon {
                    ho.get(r, j).without(j)
                } else {
                    ProcessSet::full(n).without(j)
                };
                let (mut lead, mut rest): (Vec<Event>, Vec<Event>) = dels.into_iter().partition(|e| {
                    matches!(*e, Event::Deliver { round, sender, receiver }
                        if round == r && receiver == j && lead_senders.contains(sender))
                });
                if r > horizon {
                    lead = lead_senders.iter().map(|k| Event::deliver(r, k, j)).collect();
                }
                order.sort(&mut lead);
                order.sort(&mut rest);
                events.extend(lead);
                events.push(Event::next(j));
                events.extend(rest);
            }
        }
        if r <= horizon {
            let mut changes: Vec<Event> = (0..n)
                .filter(|&j| deficient[r] != Some(j))
                .map(Event::next)
                .collect();
            order.sort(&mut changes);
            events.extend(changes);
        }
    }
    Ok(Execution::new(n, horizon, events))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategy::{f_loss, f_n_minus_F, minimal_oblivious};
    use crate::predicate::build_crashF;

    fn ps(idx: &[usize]) -> ProcessSet {
        ProcessSet::from_indices(idx.iter().copied())
    }

    #[test]
    fn validation_examples() {
        let ok = Execution::new(2, 1, vec![Event::deliver(1, 0, 1), Event::next(1)]);
        assert!(ok.is_valid());
        let early = Execution::new(2, 2, vec![Event::deliver(2, 0, 1)]);
        assert_eq!(early.validate().unwrap_err().index, 0);
        let after_stop = Execution::new(2, 1, vec![Event::Stop, Event::next(0)]);
        assert_eq!(after_stop.validate().unwrap_err().index, 1);
        let twice = Execution::new(2, 1, vec![Event::deliver(1, 0, 1), Event::deliver(1, 0, 1)]);
        assert_eq!(twice.validate().unwrap_err().index, 1);
    }

    #[test]
    fn local_state_examples() {
        let t = Execution::new(2, 1, vec![Event::deliver(1, 0, 1), Event::next(1)]);
        assert_eq!(t.local_state(1, 0).unwrap(), LocalState::initial());
        let q = t.local_state(1, 2).unwrap();
        assert_eq!(q.round(), 2);
        assert_eq!(q.heard(1), ps(&[0]));
        assert!(t.local_state(1, 3).is_err());
    }

    #[test]
    fn late_message_is_delivered_but_not_heard() {
        // j = p3 hears k1, k2 on time and k3 after moving on
        let t = Execution::new(
            3,
            1,
            vec![
                Event::deliver(1, 0, 2),
                Event::deliver(1, 1, 2),
                Event::next(0),
                Event::next(1),
                Event::next(2),
                Event::deliver(1, 2, 2),
            ],
        );
        let ho = t.extract_heardof().unwrap();
        assert_eq!(ho.get(1, 2), ps(&[0, 1]));
        assert_eq!(t.local_state(2, 6).unwrap().heard(1), ps(&[0, 1, 2]));
    }

    #[test]
    fn standard_execution_counts() {
        let f: Strategy = f_n_minus_F(3, 1).unwrap().into();
        let total = Collection::total(3, 2);
        let t = standard_execution(&f, &total, EventOrder::Canonical);
        assert_eq!(t.len(), 9 + 3 + 9 + 3);
        assert!(t.events[..9].iter().all(|e| matches!(e, Event::Deliver { round: 1, .. })));
        assert!(t.events[9..12].iter().all(|e| matches!(e, Event::Next { .. })));
        assert!(t.is_valid());
        assert!(t.is_execution_of_collection(&total));
        assert!(t.is_execution_of_strategy(&f));
        assert_eq!(t.extract_heardof().unwrap(), total);
    }

    #[test]
    fn empty_strategy_stops_after_first_deliveries() {
        let f: Strategy = crate::strategy::ObliviousStrategy::new(2, []).unwrap().into();
        let t = standard_execution(&f, &Collection::total(2, 2), EventOrder::Canonical);
        assert_eq!(t.events.len(), 5);
        assert_eq!(t.events.last(), Some(&Event::Stop));
        assert!(t.is_execution_of_strategy(&f));
        assert!(matches!(t.extract_heardof(), Err(Error::IncompleteTrace { process: 0, nexts: 0, .. })));
    }

    #[test]
    fn collection_check_rejects_missing_and_extra() {
        let ho = Collection::total(2, 1);
        let t = canonical_execution(&ho, EventOrder::Canonical);
        assert_eq!(t.len(), 6);
        let c = Collection::total(2, 1);
        assert!(t.is_execution_of_collection(&c));
        let mut dropped = t.clone();
        dropped.events.remove(0);
        assert!(!dropped.is_execution_of_collection(&c));
        let mut lossy = c.clone();
        lossy.set(1, 1, ps(&[1]));
        assert!(!t.is_execution_of_collection(&lossy));
    }

    #[test]
    fn strategy_check_catches_bad_next_and_unfairness() {
        let crash = build_crashF(3, 2, 1).unwrap();
        let f: Strategy = minimal_oblivious(&crash).into();
        let total = Collection::total(3, 2);
        let mut t = standard_execution(&f, &total, EventOrder::Canonical);
        let mut early = t.clone();
        early.events.insert(0, Event::next(0));
        assert_eq!(early.check_strategy(&f).unwrap_err().index, 0);
        t.events.retain(|e| *e != Event::next(0));
        assert!(!t.is_execution_of_strategy(&f));
    }

    #[test]
    fn canonical_round_trip_and_reversed_order() {
        let mut ho = Collection::total(3, 2);
        ho.set(1, 0, ps(&[0, 2]));
        ho.set(2, 2, ps(&[2]));
        for order in [EventOrder::Canonical, EventOrder::Reversed] {
            let t = canonical_execution(&ho, order);
            assert!(t.is_valid());
            assert_eq!(t.extract_heardof().unwrap(), ho);
            assert!(t.is_execution_of_collection(&Collection::total(3, 2)));
        }
    }

    #[test]
    fn shifted_execution_postpones_deficient_next() {
        let mut ho = Collection::total(3, 2);
        ho.set(1, 2, ps(&[0, 1]));
        let t = shifted_canonical_execution(&ho, EventOrder::Canonical).unwrap();
        assert!(t.is_valid());
        let pos = t.events.iter().position(|e| *e == Event::next(2)).unwrap();
        let before: Vec<&Event> = t.events[..pos]
            .iter()
            .filter(|e| matches!(e, Event::Deliver { round: 2, receiver: 2, .. }))
            .collect();
        assert_eq!(before.len(), 2);
        let f = f_loss(3).unwrap();
        assert!(f.contains(&t.local_state(2, pos).unwrap()));
        assert!(t.is_execution_of_strategy(&f));
        assert_eq!(t.extract_heardof().unwrap(), ho);
        assert_eq!(
            shifted_canonical_execution(&Collection::total(3, 2), EventOrder::Canonical).unwrap(),
            canonical_execution(&Collection::total(3, 2), EventOrder::Canonical)
        );
        ho.set(1, 1, ps(&[0, 1]));
        assert!(matches!(
            shifted_canonical_execution(&ho, EventOrder::Canonical),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn shift_at_last_round_uses_continuation_messages() {
        let mut ho = Collection::total(3, 2);
        ho.set(2, 0, ps(&[0, 2]));
        let t = shifted_canonical_execution(&ho, EventOrder::Canonical).unwrap();
        assert!(t.is_valid());
        assert!(t.is_execution_of_collection(&Collection::total(3, 2)));
        assert!(t.is_execution_of_strategy(&f_loss(3).unwrap()));
        assert_eq!(t.extract_heardof().unwrap(), ho);
    }

    #[test]
    fn text_and_json_round_trip() {
        let t = canonical_execution(&Collection::total(2, 1), EventOrder::Canonical);
        let text = t.to_text();
        assert!(text.starts_with("D 1 0 0\nD 1 0 1\n"));
        let back = Execution::from_text(2, 1, &format!("# header\n{text}\nS\n")).unwrap();
        assert_eq!(back.events[..t.len()], t.events[..]);
        assert_eq!(back.events.last(), Some(&Event::Stop));
        assert!(Execution::from_text(2, 1, "X 1").is_err());
        let json = serde_json::to_string(&t).unwrap();
        assert!(json.contains(r#"{"event":"deliver","round":1,"sender":0,"receiver":0}"#));
        assert!(json.contains(r#"{"event":"next","process":1}"#));
        assert_eq!(serde_json::from_str::<Execution>(&json).unwrap(), t);
    }
}
