//! Delivered predicates: elementary builders, the four composition operators,
//! and the structural properties used as domination certificates.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::collection::{check_shape, Collection};
use crate::error::{check_round, Error, Result};
use crate::expr::{parse_expr, PredicateExpr};
use crate::process::ProcessSet;

/// Default ceiling on the number of tables any enumeration may materialize.
pub const DEFAULT_CAP: u64 = 10_000_000;

/// A nonempty set of collections sharing `(n, horizon)`, with the expression
/// that produced it. Equality ignores the expression.
#[derive(Debug, Clone)]
pub struct DeliveredPredicate {
    n: usize,
    horizon: usize,
    collections: BTreeSet<Collection>,
    expr: PredicateExpr,
}

impl PartialEq for DeliveredPredicate {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.horizon == other.horizon && self.collections == other.collections
    }
}

impl Eq for DeliveredPredicate {}

impl DeliveredPredicate {
    pub fn new<I>(n: usize, horizon: usize, collections: I, expr: PredicateExpr) -> Result<Self>
    where
        I: IntoIterator<Item = Collection>,
    {
        check_shape(n, horizon)?;
        let collections: BTreeSet<Collection> = collections.into_iter().collect();
        if collections.is_empty() {
            return Err(Error::EmptyPredicate);
        }
        if let Some(bad) = collections.iter().find(|c| c.n() != n || c.horizon() != horizon) {
            return Err(Error::ShapeMismatch {
                expected_n: n,
                expected_horizon: horizon,
                found_n: bad.n(),
                found_horizon: bad.horizon(),
            });
        }
        Ok(DeliveredPredicate {
            n,
            horizon,
            collections,
            expr,
        })
    }

    /// A hand-built predicate, tagged with a free-form label.
    pub fn literal<I>(label: &str, n: usize, horizon: usize, collections: I) -> Result<Self>
    where
        I: IntoIterator<Item = Collection>,
    {
        Self::new(n, horizon, collections, PredicateExpr::Literal(label.to_string()))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn expr(&self) -> &PredicateExpr {
        &self.expr
    }

    pub fn with_expr(mut self, expr: PredicateExpr) -> Self {
        self.expr = expr;
        self
    }

    pub fn collections(&self) -> &BTreeSet<Collection> {
        &self.collections
    }

    pub fn iter(&self) -> impl Iterator<Item = &Collection> {
        self.collections.iter()
    }

    pub fn len(&self) -> usize {
        self.collections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.collections.is_empty()
    }

    pub fn contains(&self, c: &Collection) -> bool {
        self.collections.contains(c)
    }

    pub fn contains_total(&self) -> bool {
        self.contains(&Collection::total(self.n, self.horizon))
    }

    pub fn is_subset(&self, other: &DeliveredPredicate) -> bool {
        self.collections.is_subset(&other.collections)
    }

    /// Every set `c(r, p)` over members, rounds and processes.
    pub fn delivered_sets(&self) -> BTreeSet<ProcessSet> {
        self.collections
            .iter()
            .flat_map(|c| c.entries().iter().copied())
            .collect()
    }

    /// Prefixes of length `len` of process `p` across members.
    pub fn process_prefixes(&self, p: usize, len: usize) -> BTreeSet<Vec<ProcessSet>> {
        self.collections.iter().map(|c| c.prefix_of(p, len)).collect()
    }

    /// Per-process prefixes of every length `1..=horizon`, over all processes.
    pub fn all_prefixes(&self) -> BTreeSet<Vec<ProcessSet>> {
        let mut out = BTreeSet::new();
        for c in &self.collections {
            for p in 0..self.n {
                for len in 1..=self.horizon {
                    out.insert(c.prefix_of(p, len));
                }
            }
        }
        out
    }

    /// Removes one member, keeping the expression. Used for fault injection.
    pub fn without(&self, c: &Collection) -> Result<DeliveredPredicate> {
        let mut collections = self.collections.clone();
        collections.remove(c);
        Self::new(self.n, self.horizon, collections, self.expr.clone())
    }

    fn check_compatible(&self, other: &DeliveredPredicate) -> Result<()> {
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

    pub fn union(&self, other: &DeliveredPredicate) -> Result<DeliveredPredicate> {
        self.check_compatible(other)?;
        let collections = self.collections.union(&other.collections).cloned();
        Self::new(
            self.n,
            self.horizon,
            collections,
            PredicateExpr::union(self.expr.clone(), other.expr.clone()),
        )
    }

    pub fn combine(&self, other: &DeliveredPredicate) -> Result<DeliveredPredicate> {
        self.combine_capped(other, DEFAULT_CAP)
    }

    pub fn combine_capped(&self, other: &DeliveredPredicate, cap: u64) -> Result<DeliveredPredicate> {
        self.check_compatible(other)?;
        check_cap("combination", self.len() as u128 * other.len() as u128, cap)?;
        let mut out = BTreeSet::new();
        for a in &self.collections {
            for b in &other.collections {
                out.insert(a.combine(b)?);
            }
        }
        Self::new(
            self.n,
            self.horizon,
            out,
            PredicateExpr::combine(self.expr.clone(), other.expr.clone()),
        )
    }

    /// All `c1[1, cut] . c2` for `cut` in `0..=horizon`. Later cuts coincide
    /// with `cut = horizon` once truncated.
    pub fn succeed(&self, other: &DeliveredPredicate) -> Result<DeliveredPredicate> {
        self.succeed_capped(other, DEFAULT_CAP)
    }

    pub fn succeed_capped(&self, other: &DeliveredPredicate, cap: u64) -> Result<DeliveredPredicate> {
        self.check_compatible(other)?;
        check_cap(
            "succession",
            self.len() as u128 * other.len() as u128 * (self.horizon as u128 + 1),
            cap,
        )?;
        let mut out = BTreeSet::new();
        for a in &self.collections {
            for b in &other.collections {
                for cut in 0..=self.horizon {
                    out.insert(a.concat(cut, b)?);
                }
            }
        }
        Self::new(
            self.n,
            self.horizon,
            out,
            PredicateExpr::succeed(self.expr.clone(), other.expr.clone()),
        )
    }

    pub fn repeat(&self) -> Result<DeliveredPredicate> {
        self.repeat_capped(DEFAULT_CAP)
    }

    /// Concatenations of member prefixes whose lengths form a composition of
    /// the horizon.
    pub fn repeat_capped(&self, cap: u64) -> Result<DeliveredPredicate> {
        let n = self.n;
        let horizon = self.horizon;
        // prefixes[len] = distinct whole-table prefixes of `len` rounds
        let prefixes: Vec<BTreeSet<&[ProcessSet]>> = (0..=horizon)
            .map(|len| self.collections.iter().map(|c| &c.entries()[..len * n]).collect())
            .collect();
        let mut built: Vec<BTreeSet<Vec<ProcessSet>>> = vec![BTreeSet::new(); horizon + 1];
        built[0].insert(Vec::new());
        for t in 1..=horizon {
            let mut here = BTreeSet::new();
            for len in 1..=t {
                let heads = &built[t - len];
                check_cap(
                    "repetition",
                    here.len() as u128 + heads.len() as u128 * prefixes[len].len() as u128,
                    cap,
                )?;
                for head in heads {
                    for seg in &prefixes[len] {
                        let mut v = Vec::with_capacity(t * n);
                        v.extend_from_slice(head);
                        v.extend_from_slice(seg);
                        here.insert(v);
                    }
                }
            }
            built[t] = here;
        }
        let out = std::mem::take(&mut built[horizon])
            .into_iter()
            .map(|sets| Collection::from_flat(n, horizon, sets));
        Self::new(n, horizon, out, PredicateExpr::repeat(self.expr.clone()))
    }

    /// Every delivered set occurs at every `(round, process)` slot in some member.
    pub fn is_round_symmetric(&self) -> bool {
        self.round_symmetry_counterexample().is_none()
    }

    /// A `(round, process, set)` slot where the delivered `set` never occurs.
    pub fn round_symmetry_counterexample(&self) -> Option<(usize, usize, ProcessSet)> {
        let delivered = self.delivered_sets();
        for r in 1..=self.horizon {
            for j in 0..self.n {
                let here: BTreeSet<ProcessSet> = self.collections.iter().map(|c| c.get(r, j)).collect();
                if let Some(d) = delivered.difference(&here).next() {
                    return Some((r, j, *d));
                }
            }
        }
        None
    }

    /// Every process has the same set of prefixes, at every length.
    pub fn is_prefix_symmetric(&self) -> bool {
        self.prefix_symmetry_counterexample().is_none()
    }

    /// A process and a prefix some process has but it lacks.
    pub fn prefix_symmetry_counterexample(&self) -> Option<(usize, Vec<ProcessSet>)> {
        for len in 1..=self.horizon {
            let all: BTreeSet<Vec<ProcessSet>> = (0..self.n).flat_map(|k| self.process_prefixes(k, len)).collect();
            for k in 0..self.n {
                if let Some(q) = all.difference(&self.process_prefixes(k, len)).next() {
                    return Some((k, q.clone()));
                }
            }
        }
        None
    }

    /// The total collection is a member, and for every delivered set `D` and
    /// round `r`, some member is total before `r` and uniformly `D` at `r`.
    pub fn has_common_round(&self) -> bool {
        self.common_round_counterexample().is_none()
    }

    /// The first `(round, set)` pair lacking a witness, or `None` when the
    /// property holds. A missing total collection reports `(1, Π)`.
    pub fn common_round_counterexample(&self) -> Option<(usize, ProcessSet)> {
        let full = ProcessSet::full(self.n);
        if !self.contains_total() {
            return Some((1, full));
        }
        let mut realized: BTreeSet<(usize, ProcessSet)> = BTreeSet::new();
        for c in &self.collections {
            let first = (1..=self.horizon).find(|&r| c.row(r).iter().any(|s| *s != full));
            if let Some(r) = first {
                let row = c.row(r);
                if row.iter().all(|s| *s == row[0]) {
                    realized.insert((r, row[0]));
                }
            }
        }
        for d in self.delivered_sets() {
            if d == full {
                continue;
            }
            for r in 1..=self.horizon {
                if !realized.contains(&(r, d)) {
                    return Some((r, d));
                }
            }
        }
        None
    }

    /// Every per-process prefix is shared by all processes of some member.
    pub fn has_common_prefix(&self) -> bool {
        self.common_prefix_counterexample().is_none()
    }

    pub fn common_prefix_counterexample(&self) -> Option<Vec<ProcessSet>> {
        let mut uniform: BTreeSet<Vec<ProcessSet>> = BTreeSet::new();
        for c in &self.collections {
            for len in 1..=self.horizon {
                let first = c.prefix_of(0, len);
                if (1..self.n).all(|k| c.prefix_of(k, len) == first) {
                    uniform.insert(first);
                } else {
                    break;
                }
            }
        }
        self.all_prefixes().into_iter().find(|p| !uniform.contains(p))
    }
}

impl fmt::Display for DeliveredPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (n={}, horizon={}, {} collections)",
            self.expr,
            self.n,
            self.horizon,
            self.len()
        )
    }
}

#[derive(Serialize, Deserialize)]
struct PredicateJson {
    n: usize,
    horizon: usize,
    expr: String,
    collections: Vec<Collection>,
}

impl Serialize for DeliveredPredicate {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        PredicateJson {
            n: self.n,
            horizon: self.horizon,
            expr: self.expr.to_string(),
            collections: self.collections.iter().cloned().collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DeliveredPredicate {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = PredicateJson::deserialize(deserializer)?;
        let expr = parse_expr(&raw.expr).unwrap_or(PredicateExpr::Literal(raw.expr));
        DeliveredPredicate::new(raw.n, raw.horizon, raw.collections, expr)
            .map_err(serde::de::Error::custom)
    }
}

fn check_cap(what: &str, estimate: u128, cap: u64) -> Result<()> {
    if estimate > cap as u128 {
        return Err(Error::CapExceeded {
            what: what.to_string(),
            estimate,
            cap,
        });
    }
    Ok(())
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Builds elementary predicates and evaluates expressions for a fixed universe
/// and horizon, refusing enumerations larger than `cap` tables.
#[derive(Debug, Clone, Copy)]
pub struct PredicateBuilder {
    pub n: usize,
    pub horizon: usize,
    pub cap: u64,
}

impl PredicateBuilder {
    pub fn new(n: usize, horizon: usize) -> Result<Self> {
        check_shape(n, horizon)?;
        Ok(PredicateBuilder {
            n,
            horizon,
            cap: DEFAULT_CAP,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.cap = cap;
        self
    }

    pub fn total(&self) -> Result<DeliveredPredicate> {
        DeliveredPredicate::new(
            self.n,
            self.horizon,
            [Collection::total(self.n, self.horizon)],
            PredicateExpr::Total,
        )
    }

    /// At most one crash, at round `r`: for some `Σ` with `|Σ| >= n-1`, rounds
    /// before `r` are total, round `r` entries contain `Σ`, later rounds are `Σ`.
    pub fn crash1_at(&self, r: usize) -> Result<DeliveredPredicate> {
        let (n, horizon) = (self.n, self.horizon);
        check_round(r, horizon)?;
        check_cap("crash1@r", 1 + n as u128 * (1u128 << n), self.cap)?;
        let full = ProcessSet::full(n);
        let mut out = BTreeSet::new();
        let sigmas = std::iter::once(full).chain((0..n).map(|k| full.without(k)));
        for sigma in sigmas {
            let choices: Vec<ProcessSet> = sigma.supersets(n).collect();
            // one mixed-radix counter over the per-process round-r choices
            let total_choices = choices.len().pow(n as u32);
            for mut code in 0..total_choices {
                let mut c = Collection::total(n, horizon);
                for p in 0..n {
                    c.set(r, p, choices[code % choices.len()]);
                    code /= choices.len();
                    for later in r + 1..=horizon {
                        c.set(later, p, sigma);
                    }
                }
                out.insert(c);
            }
        }
        DeliveredPredicate::new(n, horizon, out, PredicateExpr::Crash1At(r))
    }

    /// At most `f` crashes: every entry has at least `n-f` senders and each
    /// round's entries lie inside the previous round's kernel. The last
    /// round's kernel must still hold `n-f` processes, so that every member
    /// extends to an infinite collection of the same kind.
    pub fn crash(&self, f: usize) -> Result<DeliveredPredicate> {
        let (n, horizon) = (self.n, self.horizon);
        if f > n {
            return Err(Error::InvalidParameter(format!("crash bound {f} exceeds n={n}")));
        }
        let min = n - f;
        let full = ProcessSet::full(n);
        let mut out = BTreeSet::new();
        let mut rows: Vec<ProcessSet> = Vec::with_capacity(n * horizon);
        let mut visited: u64 = 0;
        self.crash_rounds(1, full, min, &mut rows, &mut out, &mut visited)?;
        DeliveredPredicate::new(n, horizon, out, PredicateExpr::Crash(f))
    }

    fn crash_rounds(
        &self,
        r: usize,
        kernel: ProcessSet,
        min: usize,
        rows: &mut Vec<ProcessSet>,
        out: &mut BTreeSet<Collection>,
        visited: &mut u64,
    ) -> Result<()> {
        let n = self.n;
        if r > self.horizon {
            out.insert(Collection::from_flat(n, self.horizon, rows.clone()));
            return Ok(());
        }
        let choices: Vec<ProcessSet> = ProcessSet::all_subsets(n)
            .filter(|s| s.len() >= min && s.is_subset(kernel))
            .collect();
        if choices.is_empty() {
            return Ok(());
        }
        let count = choices.len().pow(n as u32);
        for mut code in 0..count {
            *visited += 1;
            if *visited > self.cap {
                let per_entry = ProcessSet::subsets_of_size_at_least(n, min).count() as u128;
                return Err(Error::CapExceeded {
                    what: "crash(F)".into(),
                    estimate: per_entry.saturating_pow((n * self.horizon) as u32),
                    cap: self.cap,
                });
            }
            let base = rows.len();
            let mut k = ProcessSet::full(n);
            for _ in 0..n {
                let s = choices[code % choices.len()];
                code /= choices.len();
                k = k.intersection(s);
                rows.push(s);
            }
            if k.len() >= min {
                self.crash_rounds(r + 1, k, min, rows, out, visited)?;
            }
            rows.truncate(base);
        }
        Ok(())
    }

    /// At most `l` messages lost over the horizon.
    pub fn loss(&self, l: usize) -> Result<DeliveredPredicate> {
        let (n, horizon) = (self.n, self.horizon);
        let slots = n * n * horizon;
        let estimate: u128 = (0..=l.min(slots)).map(|i| binomial(slots as u128, i as u128)).sum();
        check_cap("loss(L)", estimate, self.cap)?;
        let mut out = BTreeSet::new();
        let mut c = Collection::total(n, horizon);
        self.loss_rec(0, l, &mut c, &mut out);
        DeliveredPredicate::new(n, horizon, out, PredicateExpr::Loss(l))
    }

    /// Chooses lost messages in increasing slot order, `slot = ((r-1)*n + p)*n + k`.
    fn loss_rec(&self, from: usize, left: usize, c: &mut Collection, out: &mut BTreeSet<Collection>) {
        out.insert(c.clone());
        if left == 0 {
            return;
        }
        let n = self.n;
        for slot in from..n * n * self.horizon {
            let (r, p, k) = (slot / (n * n) + 1, slot / n % n, slot % n);
            let before = c.get(r, p);
            c.set(r, p, before.without(k));
            self.loss_rec(slot + 1, left - 1, c, out);
            c.set(r, p, before);
        }
    }

    pub fn eval(&self, expr: &PredicateExpr) -> Result<DeliveredPredicate> {
        Ok(match expr {
            PredicateExpr::Total => self.total()?,
            PredicateExpr::Crash1At(r) => self.crash1_at(*r)?,
            PredicateExpr::Crash(f) => self.crash(*f)?,
            PredicateExpr::Loss(l) => self.loss(*l)?,
            PredicateExpr::Literal(label) => {
                return Err(Error::Unsupported(format!(
                    "literal predicate '{label}' has no construction to evaluate"
                )))
            }
            PredicateExpr::Union(a, b) => self.eval(a)?.union(&self.eval(b)?)?,
            PredicateExpr::Combine(a, b) => self.eval(a)?.combine_capped(&self.eval(b)?, self.cap)?,
            PredicateExpr::Succeed(a, b) => self.eval(a)?.succeed_capped(&self.eval(b)?, self.cap)?,
            PredicateExpr::Repeat(a) => self.eval(a)?.repeat_capped(self.cap)?,
        })
    }

    pub fn parse_and_eval(&self, text: &str) -> Result<DeliveredPredicate> {
        self.eval(&parse_expr(text)?)
    }
}

pub fn build_total(n: usize, horizon: usize) -> Result<DeliveredPredicate> {
    PredicateBuilder::new(n, horizon)?.total()
}

pub fn build_crash1_at(n: usize, horizon: usize, r: usize) -> Result<DeliveredPredicate> {
    PredicateBuilder::new(n, horizon)?.crash1_at(r)
}

#[allow(non_snake_case)]
pub fn build_crashF(n: usize, horizon: usize, f: usize) -> Result<DeliveredPredicate> {
    PredicateBuilder::new(n, horizon)?.crash(f)
}

#[allow(non_snake_case)]
pub fn build_lossL(n: usize, horizon: usize, l: usize) -> Result<DeliveredPredicate> {
    PredicateBuilder::new(n, horizon)?.loss(l)
}

/// `∪_{r ≤ horizon} crash1@r`.
pub fn build_crash1(n: usize, horizon: usize) -> Result<DeliveredPredicate> {
    let b = PredicateBuilder::new(n, horizon)?;
    let mut acc = b.crash1_at(1)?;
    for r in 2..=horizon {
        acc = acc.union(&b.crash1_at(r)?)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ps(idx: &[usize]) -> ProcessSet {
        ProcessSet::from_indices(idx.iter().copied())
    }

    /// Brute-force filter over all tables with entries of size >= n-f, using
    /// only the two clauses on rounds before the last.
    fn crash_by_clauses(n: usize, horizon: usize, f: usize, extendable: bool) -> BTreeSet<Collection> {
        let entries: Vec<ProcessSet> = ProcessSet::subsets_of_size_at_least(n, n - f).collect();
        let slots = n * horizon;
        let mut out = BTreeSet::new();
        for mut code in 0..entries.len().pow(slots as u32) {
            let mut sets = Vec::with_capacity(slots);
            for _ in 0..slots {
                sets.push(entries[code % entries.len()]);
                code /= entries.len();
            }
            let c = Collection::from_flat(n, horizon, sets);
            let chained = (1..horizon).all(|r| {
                let k = c.kernel(r).unwrap();
                (0..n).all(|p| c.get(r + 1, p).is_subset(k))
            });
            let last_ok = !extendable || c.kernel(horizon).unwrap().len() >= n - f;
            if chained && last_ok {
                out.insert(c);
            }
        }
        out
    }

    #[test]
    fn total_has_one_member() {
        let p = build_total(3, 3).unwrap();
        assert_eq!(p.len(), 1);
        assert!(p.iter().next().unwrap().is_total());
    }

    #[test]
    fn crash1_at_counts() {
        assert_eq!(build_crash1_at(2, 2, 1).unwrap().len(), 9);
        assert!(build_crash1_at(2, 2, 3).is_err());
        assert!(build_crash1_at(2, 2, 0).is_err());
        assert!(build_crash1_at(3, 2, 1).unwrap().contains_total());
    }

    #[test]
    fn crash1_at_satisfies_kernel_chain() {
        let p = build_crash1_at(3, 3, 2).unwrap();
        for c in p.iter() {
            for r in 1..3 {
                let k = c.kernel(r).unwrap();
                assert!((0..3).all(|j| c.get(r + 1, j).is_subset(k)));
            }
        }
    }

    #[test]
    fn crash_zero_is_total() {
        assert_eq!(build_crashF(3, 2, 0).unwrap(), build_total(3, 2).unwrap());
    }

    #[test]
    fn crash_matches_clause_filter() {
        let built = build_crashF(3, 2, 1).unwrap();
        assert_eq!(built.collections(), &crash_by_clauses(3, 2, 1, true));
        assert_eq!(built.len(), 43);
        // the bare clauses admit tables whose last kernel is already too small
        assert_eq!(crash_by_clauses(3, 2, 1, false).len(), 85);
    }

    #[test]
    fn loss_counts() {
        assert_eq!(build_lossL(3, 2, 0).unwrap().len(), 1);
        assert_eq!(build_lossL(3, 2, 1).unwrap().len(), 19);
        let p = build_lossL(3, 2, 2).unwrap();
        assert!(p.iter().all(|c| c.entries().iter().all(|s| !s.is_empty())));
    }

    #[test]
    fn operators_respect_identities() {
        let p = build_crash1_at(3, 2, 1).unwrap();
        let t = build_total(3, 2).unwrap();
        assert_eq!(p.union(&p).unwrap(), p);
        assert_eq!(p.combine(&t).unwrap(), p);
        assert_eq!(t.repeat().unwrap(), t);
        assert!(p.is_subset(&p.repeat().unwrap()));
        assert!(p.union(&build_total(3, 1).unwrap()).is_err());
    }

    #[test]
    fn crash_one_is_union_of_rounds() {
        assert_eq!(build_crash1(3, 2).unwrap(), build_crashF(3, 2, 1).unwrap());
    }

    #[test]
    fn combined_crash1_rounds_share_kernel() {
        let a = build_crash1_at(3, 2, 1).unwrap();
        let c = a.combine(&a).unwrap();
        let sigma_a = ps(&[0, 1]);
        let sigma_b = ps(&[1, 2]);
        let find = |sigma: ProcessSet| {
            a.iter()
                .find(|c| c.row(1).iter().all(|s| *s == sigma))
                .unwrap()
                .clone()
        };
        let both = find(sigma_a).combine(&find(sigma_b)).unwrap();
        assert!(both.row(2).iter().all(|s| *s == ps(&[1])));
        assert!(c.contains(&both));
    }

    #[test]
    fn structural_properties() {
        let crash = build_crashF(3, 2, 1).unwrap();
        let late = build_crash1_at(3, 2, 2).unwrap();
        let loss = build_lossL(3, 2, 1).unwrap();
        let total = build_total(3, 2).unwrap();
        assert!(total.is_round_symmetric() && total.is_prefix_symmetric());
        assert!(total.has_common_round() && total.has_common_prefix());
        assert!(crash.is_round_symmetric() && crash.is_prefix_symmetric());
        assert!(crash.has_common_round() && crash.has_common_prefix());
        assert!(!late.is_round_symmetric());
        assert!(late.is_prefix_symmetric());
        assert!(!late.has_common_round());
        assert!(late.has_common_prefix());
        assert!(!loss.has_common_round());
        assert!(!loss.has_common_prefix());
    }

    #[test]
    fn asymmetric_literal_is_not_prefix_symmetric() {
        let mut c = Collection::total(2, 1);
        c.set(1, 0, ps(&[0]));
        let p = DeliveredPredicate::literal("p1 misses", 2, 1, [c]).unwrap();
        assert!(!p.is_prefix_symmetric());
    }

    #[test]
    fn empty_and_mismatched_literals_are_rejected() {
        assert_eq!(
            DeliveredPredicate::literal("none", 2, 1, []),
            Err(Error::EmptyPredicate)
        );
        assert!(DeliveredPredicate::literal("bad", 2, 1, [Collection::total(2, 2)]).is_err());
    }

    #[test]
    fn cap_is_enforced_with_estimate() {
        let b = PredicateBuilder::new(3, 2).unwrap().with_cap(10);
        match b.loss(1) {
            Err(Error::CapExceeded { estimate, cap, .. }) => {
                assert_eq!(estimate, 19);
                assert_eq!(cap, 10);
            }
            other => panic!("expected cap error, got {other:?}"),
        }
        assert!(b.crash(1).is_err());
    }

    #[test]
    fn json_round_trip() {
        let p = build_crash1_at(2, 2, 2).unwrap();
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.starts_with(r#"{"n":2,"horizon":2,"expr":"crash1@2","collections":["#));
        let back: DeliveredPredicate = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.expr(), &PredicateExpr::Crash1At(2));
    }
}
