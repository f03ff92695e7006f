//! Bounded exhaustive search over the executions of a strategy on the members
//! of a delivered predicate, collecting the heard-of collections they generate.
//!
//! Deliveries to a process only matter to that process, and the set of
//! messages a process may receive only grows as senders advance. Any execution
//! can therefore be rearranged so that each `next_j` is immediately preceded by
//! the deliveries to `j` it depends on, with every other delivery postponed to
//! the end. The search explores these macro-steps: pick `j`, pick which of the
//! available messages in `j`'s observation window arrive, then move `j`.
//! Messages outside the window cannot change the strategy's decision and are
//! handed over when they enter the window or after the last move.

use std::collections::BTreeSet;
use std::rc::Rc;

use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};

use crate::collection::{Collection, HeardOfCollection};
use crate::error::{Error, Result};
use crate::execution::{Event, Execution};
use crate::predicate::DeliveredPredicate;
use crate::process::ProcessSet;
use crate::strategy::{Strategy, Window};

/// Default number of abstract states explored per collection.
pub const DEFAULT_BUDGET: u64 = 2_000_000;

/// A reachable point where some processes can never move again.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Deadlock {
    pub collection: Collection,
    /// Processes short of the horizon.
    pub stuck: Vec<usize>,
    /// A fair execution of the strategy on `collection` ending in the deadlock.
    pub trace: Execution,
}

#[derive(Debug, Clone)]
pub struct Exploration {
    pub n: usize,
    pub horizon: usize,
    /// Generated heard-of collections as sorted codes (see [`encode`]).
    pub codes: Vec<u64>,
    /// False when some collection ran out of budget.
    pub complete: bool,
    /// Abstract states expanded, summed over collections.
    pub states: u64,
    /// At most one witness per collection, in collection order.
    pub deadlocks: Vec<Deadlock>,
}

impl Exploration {
    pub fn is_deadlock_free(&self) -> bool {
        self.deadlocks.is_empty()
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn contains(&self, ho: &HeardOfCollection) -> bool {
        ho.n() == self.n && ho.horizon() == self.horizon && self.codes.binary_search(&encode(ho)).is_ok()
    }

    pub fn collections(&self) -> BTreeSet<HeardOfCollection> {
        self.iter().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = HeardOfCollection> + '_ {
        self.codes.iter().map(|&code| decode(self.n, self.horizon, code))
    }

    /// Whether every generated collection is also generated by `other`.
    pub fn is_subset(&self, other: &Exploration) -> bool {
        self.codes.iter().all(|c| other.codes.binary_search(c).is_ok())
    }

    /// A collection generated here but not by `other`.
    pub fn first_not_in(&self, other: &Exploration) -> Option<HeardOfCollection> {
        self.codes
            .iter()
            .find(|c| other.codes.binary_search(c).is_err())
            .map(|&code| decode(self.n, self.horizon, code))
    }
}

struct CollectionResult {
    codes: Vec<u64>,
    complete: bool,
    states: u64,
    deadlock: Option<Deadlock>,
}

fn check_explorable(n: usize, horizon: usize) -> Result<()> {
    if n * n * horizon > 64 || horizon >= 8 {
        return Err(Error::InvalidParameter(format!(
            "exploration needs n*n*horizon <= 64 and horizon < 8, got n={n}, horizon={horizon}"
        )));
    }
    Ok(())
}

/// All heard-of collections of complete fair executions of `f` on members of
/// `p`, exploring at most `budget` abstract states per member.
pub fn enumerate_ho_bounded(f: &Strategy, p: &DeliveredPredicate, budget: u64) -> Result<Exploration> {
    let (n, horizon) = (p.n(), p.horizon());
    if f.n() != n {
        return Err(Error::InvalidParameter(format!(
            "strategy over {} processes, predicate over {n}",
            f.n()
        )));
    }
    check_explorable(n, horizon)?;
    let members: Vec<&Collection> = p.iter().collect();
    let results: Vec<CollectionResult> = members
        .par_iter()
        .map(|c| explore_collection(f, c, budget))
        .collect();
    let mut codes: FxHashSet<u64> = FxHashSet::default();
    let mut out = Exploration {
        n,
        horizon,
        codes: Vec::new(),
        complete: true,
        states: 0,
        deadlocks: Vec::new(),
    };
    for r in results {
        codes.extend(r.codes);
        out.complete &= r.complete;
        out.states += r.states;
        out.deadlocks.extend(r.deadlock);
    }
    out.codes = codes.into_iter().collect();
    out.codes.sort_unstable();
    Ok(out)
}

/// Bit `((r-1)*n + j)*n + k` of a code says `k ∈ ho(r, j)`.
pub fn decode(n: usize, horizon: usize, code: u64) -> HeardOfCollection {
    let mask = (1u64 << n) - 1;
    let sets = (0..n * horizon)
        .map(|slot| ProcessSet::from_bits(((code >> (slot * n)) & mask) as u32))
        .collect();
    Collection::from_flat(n, horizon, sets)
}

pub fn encode(ho: &HeardOfCollection) -> u64 {
    let n = ho.n();
    ho.entries()
        .iter()
        .enumerate()
        .fold(0u64, |acc, (slot, s)| acc | (s.bits() as u64) << (slot * n))
}

fn explore_collection(f: &Strategy, c: &Collection, budget: u64) -> CollectionResult {
    let n = c.n();
    let mut ex = Explorer {
        n,
        horizon: c.horizon(),
        row_mask: (1u64 << n) - 1,
        f,
        c,
        window: f.window(),
        memo: FxHashMap::default(),
        budget,
        expanded: 0,
        partial: false,
        path: Vec::new(),
        deadlock_path: None,
    };
    let root = vec![0u64; n];
    let codes = ex.solve(&root);
    let deadlock = ex.deadlock_path.take().map(|path| ex.witness(&path));
    CollectionResult {
        codes: codes.as_ref().clone(),
        complete: !ex.partial,
        states: ex.expanded,
        deadlock,
    }
}

/// Per-process word: rounds completed in the top byte, received messages of
/// the observation window below, bit `(r-1)*n + k` for `(r, k)`.
struct Explorer<'a> {
    n: usize,
    horizon: usize,
    row_mask: u64,
    f: &'a Strategy,
    c: &'a Collection,
    window: Window,
    memo: FxHashMap<Vec<u64>, Rc<Vec<u64>>>,
    budget: u64,
    expanded: u64,
    partial: bool,
    path: Vec<(usize, u64)>,
    deadlock_path: Option<Vec<(usize, u64)>>,
}

const BITS: u64 = (1 << 56) - 1;

fn done(word: u64) -> usize {
    (word >> 56) as usize
}

impl Explorer<'_> {
    fn available(&self, state: &[u64], j: usize) -> u64 {
        let a = done(state[j]);
        let lo = if self.window.past { 1 } else { a + 1 };
        let hi = (if self.window.next { a + 2 } else { a + 1 }).min(self.horizon + 1);
        let mut mask = 0u64;
        for r in lo..=hi {
            let senders = if r <= self.horizon {
                self.c.get(r, j)
            } else {
                ProcessSet::full(self.n)
            };
            for k in senders.iter() {
                if done(state[k]) + 1 >= r {
                    mask |= 1 << ((r - 1) * self.n + k);
                }
            }
        }
        mask
    }

    fn accepts(&self, a: usize, bits: u64) -> bool {
        let mut heard = [ProcessSet::EMPTY; 8];
        for (r, slot) in heard.iter_mut().enumerate().take(self.horizon + 1) {
            *slot = ProcessSet::from_bits(((bits >> (r * self.n)) & self.row_mask) as u32);
        }
        self.f.accepts(a + 1, &heard[..=self.horizon])
    }

    /// Forgets rounds the strategy can no longer look at.
    fn normalize(&self, a: usize, bits: u64) -> u64 {
        if self.window.past {
            bits
        } else {
            bits & !((1u64 << (a * self.n)) - 1)
        }
    }

    fn solve(&mut self, state: &[u64]) -> Rc<Vec<u64>> {
        if state.iter().all(|&w| done(w) == self.horizon) {
            return Rc::new(vec![0]);
        }
        if let Some(v) = self.memo.get(state) {
            return Rc::clone(v);
        }
        self.expanded += 1;
        if self.expanded > self.budget {
            self.partial = true;
            return Rc::new(Vec::new());
        }
        let pending: Vec<usize> = (0..self.n).filter(|&j| done(state[j]) < self.horizon).collect();
        if self.deadlock_path.is_none()
            && pending.iter().all(|&j| {
                let bits = state[j] & BITS;
                !self.accepts(done(state[j]), bits | self.available(state, j))
            })
        {
            self.deadlock_path = Some(self.path.clone());
        }
        let mut out: FxHashSet<u64> = FxHashSet::default();
        let mut tried: FxHashSet<(usize, u64, u64)> = FxHashSet::default();
        for &j in &pending {
            let a = done(state[j]);
            let bits = state[j] & BITS;
            let fresh = self.available(state, j) & !bits;
            let mut s = fresh;
            loop {
                let now = bits | s;
                if self.accepts(a, now) {
                    let row = (now >> (a * self.n)) & self.row_mask;
                    let move_code = row << ((a * self.n + j) * self.n);
                    let next_word = ((a as u64 + 1) << 56) | self.normalize(a + 1, now);
                    if tried.insert((j, next_word, move_code)) {
                        let mut child = state.to_vec();
                        child[j] = next_word;
                        self.path.push((j, s));
                        let sub = self.solve(&child);
                        self.path.pop();
                        out.extend(sub.iter().map(|code| code | move_code));
                    }
                }
                if s == 0 {
                    break;
                }
                s = (s - 1) & fresh;
            }
        }
        let mut v: Vec<u64> = out.into_iter().collect();
        v.sort_unstable();
        let v = Rc::new(v);
        self.memo.insert(state.to_vec(), Rc::clone(&v));
        v
    }

    /// Replays a macro-step path as events, then hands over every remaining
    /// message that may be delivered and stops.
    fn witness(&self, path: &[(usize, u64)]) -> Deadlock {
        let (n, horizon) = (self.n, self.horizon);
        let mut events = Vec::new();
        let mut nexts = vec![0usize; n];
        let mut got = vec![0u64; n];
        let deliveries = |j: usize, mask: u64| -> Vec<Event> {
            (0..64)
                .filter(|b| mask >> b & 1 == 1)
                .map(|b| Event::deliver(b / n + 1, b % n, j))
                .collect()
        };
        for &(j, s) in path {
            events.extend(deliveries(j, s));
            got[j] |= s;
            events.push(Event::next(j));
            nexts[j] += 1;
        }
        for j in 0..n {
            let mut rest = 0u64;
            for r in 1..=horizon + 1 {
                let senders = if r <= horizon {
                    self.c.get(r, j)
                } else {
                    ProcessSet::full(n)
                };
                for k in senders.iter() {
                    if nexts[k] + 1 >= r {
                        rest |= 1 << ((r - 1) * n + k);
                    }
                }
            }
            events.extend(deliveries(j, rest & !got[j]));
        }
        events.push(Event::Stop);
        Deadlock {
            collection: self.c.clone(),
            stuck: (0..n).filter(|&j| nexts[j] < horizon).collect(),
            trace: Execution::new(n, horizon, events),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predicate::{build_crash1_at, build_crashF, build_lossL, build_total};
    use crate::strategy::{f_loss, f_n_minus_F, minimal_conservative, minimal_oblivious, ObliviousStrategy};

    /// Event-level search without any reduction: every enabled delivery or
    /// next, in every order.
    fn naive(f: &Strategy, c: &Collection) -> BTreeSet<u64> {
        fn go(
            f: &Strategy,
            c: &Collection,
            a: &mut Vec<usize>,
            got: &mut Vec<u64>,
            code: u64,
            seen: &mut FxHashSet<(Vec<usize>, Vec<u64>, u64)>,
            out: &mut BTreeSet<u64>,
        ) {
            let (n, horizon) = (c.n(), c.horizon());
            if !seen.insert((a.clone(), got.clone(), code)) {
                return;
            }
            if a.iter().all(|&x| x == horizon) {
                out.insert(code);
                return;
            }
            for j in 0..n {
                for r in 1..=horizon + 1 {
                    for k in 0..n {
                        let bit = 1u64 << ((r - 1) * n + k);
                        let allowed = r > horizon || c.get(r, j).contains(k);
                        if allowed && a[k] + 1 >= r && got[j] & bit == 0 {
                            got[j] |= bit;
                            go(f, c, a, got, code, seen, out);
                            got[j] &= !bit;
                        }
                    }
                }
                if a[j] < horizon {
                    let heard: Vec<ProcessSet> = (0..=horizon)
                        .map(|r| ProcessSet::from_bits(((got[j] >> (r * n)) & ((1 << n) - 1)) as u32))
                        .collect();
                    if f.accepts(a[j] + 1, &heard) {
                        let row = heard[a[j]].bits() as u64;
                        let bits = row << ((a[j] * n + j) * n);
                        a[j] += 1;
                        go(f, c, a, got, code | bits, seen, out);
                        a[j] -= 1;
                    }
                }
            }
        }
        let n = c.n();
        let mut out = BTreeSet::new();
        go(f, c, &mut vec![0; n], &mut vec![0; n], 0, &mut FxHashSet::default(), &mut out);
        out
    }

    fn macro_codes(f: &Strategy, c: &Collection) -> BTreeSet<u64> {
        explore_collection(f, c, DEFAULT_BUDGET).codes.into_iter().collect()
    }

    #[test]
    fn matches_event_level_search_at_two_processes() {
        let preds = [
            build_crashF(2, 2, 1).unwrap(),
            build_lossL(2, 2, 1).unwrap(),
            build_crash1_at(2, 2, 2).unwrap(),
        ];
        for p in &preds {
            let strategies: Vec<Strategy> = vec![
                minimal_oblivious(p).into(),
                minimal_conservative(p).unwrap().into(),
                f_loss(2).unwrap(),
                f_n_minus_F(2, 2).unwrap().into(),
            ];
            for f in &strategies {
                for c in p.iter() {
                    assert_eq!(macro_codes(f, c), naive(f, c), "{f} on {c}");
                }
            }
        }
    }

    #[test]
    fn matches_event_level_search_for_f_loss_at_three_processes() {
        let f = f_loss(3).unwrap();
        for c in build_lossL(3, 1, 1).unwrap().iter() {
            assert_eq!(macro_codes(&f, c), naive(&f, c));
        }
    }

    #[test]
    fn total_gives_total() {
        let p = build_total(3, 2).unwrap();
        let f: Strategy = minimal_oblivious(&p).into();
        let e = enumerate_ho_bounded(&f, &p, DEFAULT_BUDGET).unwrap();
        assert!(e.complete && e.is_deadlock_free());
        assert_eq!(e.len(), 1);
        assert!(e.contains(&Collection::total(3, 2)));
        assert!(e.iter().next().unwrap().is_total());
    }

    #[test]
    fn waiting_for_everyone_deadlocks_under_crashes() {
        let p = build_crashF(2, 2, 1).unwrap();
        let f: Strategy = ObliviousStrategy::new(2, [ProcessSet::full(2)]).unwrap().into();
        let e = enumerate_ho_bounded(&f, &p, DEFAULT_BUDGET).unwrap();
        assert!(!e.is_deadlock_free());
        for d in &e.deadlocks {
            assert!(d.trace.is_valid());
            assert!(d.trace.is_execution_of_collection(&d.collection));
            assert!(d.trace.is_execution_of_strategy(&f));
            assert!(!d.stuck.is_empty());
        }
    }

    #[test]
    fn budget_exhaustion_is_flagged() {
        let p = build_crashF(3, 2, 1).unwrap();
        let f: Strategy = f_n_minus_F(3, 1).unwrap().into();
        let e = enumerate_ho_bounded(&f, &p, 3).unwrap();
        assert!(!e.complete);
    }

    #[test]
    fn code_round_trip() {
        let mut ho = Collection::total(3, 2);
        ho.set(2, 1, ProcessSet::from_indices([0, 2]));
        assert_eq!(decode(3, 2, encode(&ho)), ho);
    }

    #[test]
    fn rejects_oversized_instances() {
        let p = build_total(5, 3).unwrap();
        let f: Strategy = minimal_oblivious(&p).into();
        assert!(enumerate_ho_bounded(&f, &p, 10).is_err());
    }
}
