//! Strategies: predicates on local states that allow a process to change round.
//!
//! Oblivious strategies are stored as their `Nexts` family, conservative ones as
//! the set of accepted prefixes. `f_loss` is the one strategy that looks at the
//! next round's messages.

use std::collections::BTreeSet;
use std::fmt;

use rustc_hash::FxHashSet;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::collection::check_shape;
use crate::error::{Error, Result};
use crate::predicate::{DeliveredPredicate, DEFAULT_CAP};
use crate::process::ProcessSet;
use crate::state::LocalState;

/// A conservative state `(round, [q(1), .., q(round)])`: the round is the length.
pub type Prefix = Vec<ProcessSet>;

/// Longest prefix the packed index supports.
const MAX_PACKED_ROUNDS: usize = 7;

fn pack(prefix: &[ProcessSet]) -> u64 {
    let mut key = (prefix.len() as u64) << 56;
    for (i, s) in prefix.iter().enumerate() {
        key |= (s.bits() as u64) << (8 * i);
    }
    key
}

/// `contains(q) <=> obliv(q) ∈ nexts`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ObliviousStrategy {
    n: usize,
    nexts: BTreeSet<ProcessSet>,
}

impl ObliviousStrategy {
    pub fn new<I: IntoIterator<Item = ProcessSet>>(n: usize, nexts: I) -> Result<Self> {
        check_shape(n, 1)?;
        let nexts: BTreeSet<ProcessSet> = nexts.into_iter().collect();
        if let Some(bad) = nexts.iter().find(|s| !s.fits(n)) {
            return Err(Error::InvalidParameter(format!("{bad} is not a subset of the universe")));
        }
        Ok(ObliviousStrategy { n, nexts })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nexts(&self) -> &BTreeSet<ProcessSet> {
        &self.nexts
    }

    pub fn is_empty(&self) -> bool {
        self.nexts.is_empty()
    }

    pub fn accepts(&self, round: usize, heard: &[ProcessSet]) -> bool {
        self.nexts.contains(&heard_at(heard, round))
    }

    pub fn without_next(&self, s: ProcessSet) -> ObliviousStrategy {
        let mut nexts = self.nexts.clone();
        nexts.remove(&s);
        ObliviousStrategy { n: self.n, nexts }
    }

    /// Every prefix of length `1..=horizon` whose last set is accepted.
    pub fn to_conservative(&self, horizon: usize) -> Result<ConservativeStrategy> {
        check_shape(self.n, horizon)?;
        let subsets = 1u128 << self.n;
        let estimate: u128 = (1..=horizon)
            .map(|len| subsets.saturating_pow(len as u32 - 1) * self.nexts.len() as u128)
            .sum();
        if estimate > DEFAULT_CAP as u128 {
            return Err(Error::CapExceeded {
                what: "conservative lift".into(),
                estimate,
                cap: DEFAULT_CAP,
            });
        }
        let mut states = BTreeSet::new();
        let mut heads: Vec<Prefix> = vec![Vec::new()];
        for _ in 1..=horizon {
            for h in &heads {
                for s in &self.nexts {
                    let mut p = h.clone();
                    p.push(*s);
                    states.insert(p);
                }
            }
            heads = heads
                .iter()
                .flat_map(|h| {
                    ProcessSet::all_subsets(self.n).map(move |s| {
                        let mut p = h.clone();
                        p.push(s);
                        p
                    })
                })
                .collect();
        }
        ConservativeStrategy::new(self.n, horizon, states)
    }
}

/// `contains(q) <=> cons(q) ∈ states`, for states up to the horizon.
#[derive(Debug, Clone)]
pub struct ConservativeStrategy {
    n: usize,
    horizon: usize,
    states: BTreeSet<Prefix>,
    index: FxHashSet<u64>,
}

impl PartialEq for ConservativeStrategy {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.horizon == other.horizon && self.states == other.states
    }
}

impl Eq for ConservativeStrategy {}

impl ConservativeStrategy {
    pub fn new<I: IntoIterator<Item = Prefix>>(n: usize, horizon: usize, states: I) -> Result<Self> {
        check_shape(n, horizon)?;
        if horizon > MAX_PACKED_ROUNDS {
            return Err(Error::InvalidParameter(format!(
                "conservative strategies support horizons up to {MAX_PACKED_ROUNDS}"
            )));
        }
        let states: BTreeSet<Prefix> = states.into_iter().collect();
        for p in &states {
            if p.is_empty() || p.len() > horizon {
                return Err(Error::InvalidParameter(format!(
                    "conservative state of round {} is outside [1, {horizon}]",
                    p.len()
                )));
            }
            if let Some(bad) = p.iter().find(|s| !s.fits(n)) {
                return Err(Error::InvalidParameter(format!("{bad} is not a subset of the universe")));
            }
        }
        let index = states.iter().map(|p| pack(p)).collect();
        Ok(ConservativeStrategy {
            n,
            horizon,
            states,
            index,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn states(&self) -> &BTreeSet<Prefix> {
        &self.states
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn accepts(&self, round: usize, heard: &[ProcessSet]) -> bool {
        if round == 0 || round > self.horizon {
            return false;
        }
        let mut key = (round as u64) << 56;
        for (i, s) in heard.iter().take(round).enumerate() {
            key |= (s.bits() as u64) << (8 * i);
        }
        self.index.contains(&key)
    }

    pub fn contains_prefix(&self, prefix: &[ProcessSet]) -> bool {
        prefix.len() <= self.horizon && self.index.contains(&pack(prefix))
    }

    pub fn without_state(&self, prefix: &[ProcessSet]) -> Result<ConservativeStrategy> {
        let states = self.states.iter().filter(|p| p.as_slice() != prefix).cloned();
        ConservativeStrategy::new(self.n, self.horizon, states)
    }

    /// The oblivious strategy accepting the current-round sets seen here.
    pub fn oblivious_part(&self) -> ObliviousStrategy {
        ObliviousStrategy {
            n: self.n,
            nexts: self.states.iter().filter_map(|p| p.last().copied()).collect(),
        }
    }

    fn check_compatible(&self, other: &ConservativeStrategy) -> Result<()> {
        if self.n != other.n || self.horizon != other.horizon {
            return Err(Error::ShapeMismatch {
                expected_n: self.n,
                expected_horizon: self.horizon,
                found_n: other.n,
                found_horizon: other.horizon,
            });
        }
        Ok(())
    }

    fn union(&self, other: &ConservativeStrategy) -> Result<ConservativeStrategy> {
        self.check_compatible(other)?;
        ConservativeStrategy::new(self.n, self.horizon, self.states.union(&other.states).cloned())
    }

    /// Pointwise intersections of equal-round states.
    fn combine(&self, other: &ConservativeStrategy) -> Result<ConservativeStrategy> {
        self.check_compatible(other)?;
        let mut out = BTreeSet::new();
        for a in &self.states {
            for b in other.states.iter().filter(|b| b.len() == a.len()) {
                out.insert(a.iter().zip(b).map(|(x, y)| x.intersection(*y)).collect());
            }
        }
        ConservativeStrategy::new(self.n, self.horizon, out)
    }

    /// `f1 ∪ f2 ∪ {q1 ~> q2}`, keeping concatenations within the horizon.
    fn succeed(&self, other: &ConservativeStrategy) -> Result<ConservativeStrategy> {
        self.check_compatible(other)?;
        let mut out: BTreeSet<Prefix> = self.states.union(&other.states).cloned().collect();
        for a in &self.states {
            for b in other.states.iter().filter(|b| a.len() + b.len() <= self.horizon) {
                let mut p = a.clone();
                p.extend_from_slice(b);
                out.insert(p);
            }
        }
        ConservativeStrategy::new(self.n, self.horizon, out)
    }

    /// All finite concatenations of states that fit the horizon.
    fn repeat(&self) -> Result<ConservativeStrategy> {
        let mut by_len: Vec<BTreeSet<Prefix>> = vec![BTreeSet::new(); self.horizon + 1];
        for t in 1..=self.horizon {
            let mut here: BTreeSet<Prefix> = self.states.iter().filter(|p| p.len() == t).cloned().collect();
            for head_len in 1..t {
                for head in &by_len[head_len] {
                    for tail in self.states.iter().filter(|p| p.len() == t - head_len) {
                        let mut p = head.clone();
                        p.extend_from_slice(tail);
                        here.insert(p);
                    }
                }
            }
            by_len[t] = here;
        }
        ConservativeStrategy::new(self.n, self.horizon, by_len.into_iter().flatten())
    }
}

/// Which messages of its local state a strategy may look at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Window {
    /// Messages of rounds before the current one.
    pub past: bool,
    /// Messages of the round after the current one.
    pub next: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Strategy {
    Oblivious(ObliviousStrategy),
    Conservative(ConservativeStrategy),
    /// Change round on a full current round, or on `n-1` current-round
    /// messages together with `n-1` messages of the next round.
    FLoss { n: usize },
    /// Membership-level union, used when no closed form exists.
    Union(Box<Strategy>, Box<Strategy>),
}

impl From<ObliviousStrategy> for Strategy {
    fn from(s: ObliviousStrategy) -> Self {
        Strategy::Oblivious(s)
    }
}

impl From<ConservativeStrategy> for Strategy {
    fn from(s: ConservativeStrategy) -> Self {
        Strategy::Conservative(s)
    }
}

impl Strategy {
    pub fn n(&self) -> usize {
        match self {
            Strategy::Oblivious(s) => s.n,
            Strategy::Conservative(s) => s.n,
            Strategy::FLoss { n } => *n,
            Strategy::Union(a, _) => a.n(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Strategy::Oblivious(_) => "oblivious",
            Strategy::Conservative(_) => "conservative",
            Strategy::FLoss { .. } => "f_loss",
            Strategy::Union(..) => "union",
        }
    }

    pub fn window(&self) -> Window {
        match self {
            Strategy::Oblivious(_) => Window::default(),
            Strategy::Conservative(_) => Window {
                past: true,
                next: false,
            },
            Strategy::FLoss { .. } => Window {
                past: false,
                next: true,
            },
            Strategy::Union(a, b) => {
                let (a, b) = (a.window(), b.window());
                Window {
                    past: a.past || b.past,
                    next: a.next || b.next,
                }
            }
        }
    }

    /// Membership of the state at `round` whose round-`r` senders are
    /// `heard[r-1]` (missing entries are empty).
    pub fn accepts(&self, round: usize, heard: &[ProcessSet]) -> bool {
        match self {
            Strategy::Oblivious(s) => s.accepts(round, heard),
            Strategy::Conservative(s) => s.accepts(round, heard),
            Strategy::FLoss { n } => {
                let now = heard_at(heard, round).len();
                let after = heard_at(heard, round + 1).len();
                now == *n || (now + 1 == *n && after + 1 == *n)
            }
            Strategy::Union(a, b) => a.accepts(round, heard) || b.accepts(round, heard),
        }
    }

    pub fn contains(&self, q: &LocalState) -> bool {
        self.accepts(q.round(), q.rounds())
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Strategy::Oblivious(s) => s.is_empty(),
            Strategy::Conservative(s) => s.is_empty(),
            Strategy::FLoss { .. } => false,
            Strategy::Union(a, b) => a.is_empty() && b.is_empty(),
        }
    }

    fn check_n(&self, other: &Strategy) -> Result<()> {
        if self.n() != other.n() {
            return Err(Error::InvalidParameter(format!(
                "strategies over universes of size {} and {}",
                self.n(),
                other.n()
            )));
        }
        Ok(())
    }

    /// Brings two closed-form operands into the same family, lifting an
    /// oblivious operand next to a conservative one.
    fn align(&self, other: &Strategy, op: &str) -> Result<Aligned> {
        self.check_n(other)?;
        Ok(match (self, other) {
            (Strategy::Oblivious(a), Strategy::Oblivious(b)) => Aligned::Oblivious(a.clone(), b.clone()),
            (Strategy::Conservative(a), Strategy::Conservative(b)) => {
                Aligned::Conservative(a.clone(), b.clone())
            }
            (Strategy::Oblivious(a), Strategy::Conservative(b)) => {
                Aligned::Conservative(a.to_conservative(b.horizon)?, b.clone())
            }
            (Strategy::Conservative(a), Strategy::Oblivious(b)) => {
                Aligned::Conservative(a.clone(), b.to_conservative(a.horizon)?)
            }
            _ => {
                return Err(Error::Unsupported(format!(
                    "{op} of {} and {} strategies has no closed form",
                    self.kind(),
                    other.kind()
                )))
            }
        })
    }

    pub fn union(&self, other: &Strategy) -> Result<Strategy> {
        match self.align(other, "union") {
            Ok(Aligned::Oblivious(a, b)) => Ok(Strategy::Oblivious(ObliviousStrategy {
                n: a.n,
                nexts: a.nexts.union(&b.nexts).copied().collect(),
            })),
            Ok(Aligned::Conservative(a, b)) => Ok(Strategy::Conservative(a.union(&b)?)),
            Err(Error::Unsupported(_)) => {
                Ok(Strategy::Union(Box::new(self.clone()), Box::new(other.clone())))
            }
            Err(e) => Err(e),
        }
    }

    pub fn combine(&self, other: &Strategy) -> Result<Strategy> {
        match self.align(other, "combination")? {
            Aligned::Oblivious(a, b) => {
                let mut nexts = BTreeSet::new();
                for x in &a.nexts {
                    for y in &b.nexts {
                        nexts.insert(x.intersection(*y));
                    }
                }
                Ok(Strategy::Oblivious(ObliviousStrategy { n: a.n, nexts }))
            }
            Aligned::Conservative(a, b) => Ok(Strategy::Conservative(a.combine(&b)?)),
        }
    }

    pub fn succeed(&self, other: &Strategy) -> Result<Strategy> {
        match self.align(other, "succession")? {
            Aligned::Oblivious(..) => self.union(other),
            Aligned::Conservative(a, b) => Ok(Strategy::Conservative(a.succeed(&b)?)),
        }
    }

    pub fn repeat(&self) -> Result<Strategy> {
        match self {
            Strategy::Oblivious(_) => Ok(self.clone()),
            Strategy::Conservative(s) => Ok(Strategy::Conservative(s.repeat()?)),
            _ => Err(Error::Unsupported(format!(
                "repetition of a {} strategy has no closed form",
                self.kind()
            ))),
        }
    }

    pub fn as_oblivious(&self) -> Option<&ObliviousStrategy> {
        match self {
            Strategy::Oblivious(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_conservative(&self) -> Option<&ConservativeStrategy> {
        match self {
            Strategy::Conservative(s) => Some(s),
            _ => None,
        }
    }
}

enum Aligned {
    Oblivious(ObliviousStrategy, ObliviousStrategy),
    Conservative(ConservativeStrategy, ConservativeStrategy),
}

fn heard_at(heard: &[ProcessSet], round: usize) -> ProcessSet {
    if round == 0 {
        return ProcessSet::EMPTY;
    }
    heard.get(round - 1).copied().unwrap_or_default()
}

/// Waits for at least `n - f` messages of the current round.
#[allow(non_snake_case)]
pub fn f_n_minus_F(n: usize, f: usize) -> Result<ObliviousStrategy> {
    if f > n {
        return Err(Error::InvalidParameter(format!("crash bound {f} exceeds n={n}")));
    }
    ObliviousStrategy::new(n, ProcessSet::subsets_of_size_at_least(n, n - f))
}

pub fn f_loss(n: usize) -> Result<Strategy> {
    if n < 2 {
        return Err(Error::InvalidParameter("f_loss needs at least two processes".into()));
    }
    check_shape(n, 1)?;
    Ok(Strategy::FLoss { n })
}

/// Accepts exactly the delivered sets of the predicate.
pub fn minimal_oblivious(p: &DeliveredPredicate) -> ObliviousStrategy {
    ObliviousStrategy {
        n: p.n(),
        nexts: p.delivered_sets(),
    }
}

/// Accepts exactly the per-process prefixes of members.
pub fn minimal_conservative(p: &DeliveredPredicate) -> Result<ConservativeStrategy> {
    ConservativeStrategy::new(p.n(), p.horizon(), p.all_prefixes())
}

pub fn oblivious_valid_for(f: &ObliviousStrategy, p: &DeliveredPredicate) -> bool {
    f.n == p.n() && p.delivered_sets().is_subset(&f.nexts)
}

pub fn conservative_valid_for(f: &ConservativeStrategy, p: &DeliveredPredicate) -> bool {
    f.n == p.n()
        && f.horizon >= p.horizon()
        && p.all_prefixes().iter().all(|prefix| f.contains_prefix(prefix))
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Oblivious(s) => {
                write!(f, "oblivious nexts=")?;
                write_family(f, s.nexts.iter())
            }
            Strategy::Conservative(s) => {
                write!(f, "conservative horizon={} states={}", s.horizon, s.states.len())
            }
            Strategy::FLoss { n } => write!(f, "f_loss n={n}"),
            Strategy::Union(a, b) => write!(f, "({a}) or ({b})"),
        }
    }
}

fn write_family<'a>(f: &mut fmt::Formatter<'_>, sets: impl Iterator<Item = &'a ProcessSet>) -> fmt::Result {
    f.write_str("{")?;
    for (i, s) in sets.enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{s}")?;
    }
    f.write_str("}")
}

#[derive(Serialize, Deserialize)]
struct StateJson {
    round: usize,
    prefix: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind")]
enum StrategyJson {
    #[serde(rename = "oblivious")]
    Oblivious { n: usize, nexts: Vec<Vec<usize>> },
    #[serde(rename = "conservative")]
    Conservative {
        n: usize,
        horizon: usize,
        #[serde(rename = "nextsC")]
        nexts_c: Vec<StateJson>,
    },
    #[serde(rename = "f_loss")]
    FLoss { n: usize },
    #[serde(rename = "union")]
    Union {
        left: Box<StrategyJson>,
        right: Box<StrategyJson>,
    },
}

impl StrategyJson {
    fn from_strategy(s: &Strategy) -> StrategyJson {
        match s {
            Strategy::Oblivious(o) => StrategyJson::Oblivious {
                n: o.n,
                nexts: o.nexts.iter().map(|s| s.to_indices()).collect(),
            },
            Strategy::Conservative(c) => {
                // canonical order: by round, then by prefix
                let mut states: Vec<&Prefix> = c.states.iter().collect();
                states.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
                StrategyJson::Conservative {
                    n: c.n,
                    horizon: c.horizon,
                    nexts_c: states
                        .into_iter()
                        .map(|p| StateJson {
                            round: p.len(),
                            prefix: p.iter().map(|s| s.to_indices()).collect(),
                        })
                        .collect(),
                }
            }
            Strategy::FLoss { n } => StrategyJson::FLoss { n: *n },
            Strategy::Union(a, b) => StrategyJson::Union {
                left: Box::new(Self::from_strategy(a)),
                right: Box::new(Self::from_strategy(b)),
            },
        }
    }

    fn into_strategy(self) -> Result<Strategy> {
        let set = |n: usize, idx: Vec<usize>| -> Result<ProcessSet> {
            if let Some(bad) = idx.iter().find(|&&p| p >= n) {
                return Err(Error::Malformed(format!("process index {bad} >= n={n}")));
            }
            Ok(ProcessSet::from_indices(idx))
        };
        Ok(match self {
            StrategyJson::Oblivious { n, nexts } => Strategy::Oblivious(ObliviousStrategy::new(
                n,
                nexts.into_iter().map(|i| set(n, i)).collect::<Result<Vec<_>>>()?,
            )?),
            StrategyJson::Conservative { n, horizon, nexts_c } => {
                let mut states = Vec::new();
                for st in nexts_c {
                    if st.round != st.prefix.len() {
                        return Err(Error::Malformed(format!(
                            "state of round {} lists {} rounds",
                            st.round,
                            st.prefix.len()
                        )));
                    }
                    states.push(st.prefix.into_iter().map(|i| set(n, i)).collect::<Result<Prefix>>()?);
                }
                Strategy::Conservative(ConservativeStrategy::new(n, horizon, states)?)
            }
            StrategyJson::FLoss { n } => f_loss(n)?,
            StrategyJson::Union { left, right } => {
                let (a, b) = (left.into_strategy()?, right.into_strategy()?);
                a.check_n(&b)?;
                Strategy::Union(Box::new(a), Box::new(b))
            }
        })
    }
}

impl Serialize for Strategy {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        StrategyJson::from_strategy(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Strategy {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        StrategyJson::deserialize(deserializer)?
            .into_strategy()
            .map_err(serde::de::Error::custom)
    }
}
