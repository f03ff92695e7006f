//! Heard-of predicates, heard-of products, domination checks within the
//! oblivious and conservative families, and the certificates that witness
//! domination over all strategies.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Value};

use crate::collection::{Collection, HeardOfCollection};
use crate::error::{Error, Result};
use crate::explore::{enumerate_ho_bounded, Exploration, DEFAULT_BUDGET};
use crate::predicate::DeliveredPredicate;
use crate::process::ProcessSet;
use crate::strategy::{
    conservative_valid_for, f_loss, minimal_conservative, minimal_oblivious, oblivious_valid_for,
    ConservativeStrategy, ObliviousStrategy, Prefix, Strategy,
};

/// Default cap on materialized heard-of collections per set.
pub const HO_CAP: u64 = 1_000_000;

/// How a heard-of predicate was obtained.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    /// Every entry drawn from `basis`.
    HoProduct { basis: Vec<Vec<usize>> },
    /// Collected by the bounded explorer; `complete` is false when it ran out of budget.
    Enumerated { complete: bool },
    Literal,
}

/// A set of heard-of collections over a fixed universe and horizon.
/// Equality ignores the generator.
#[derive(Debug, Clone)]
pub struct HeardOfPredicate {
    n: usize,
    horizon: usize,
    collections: BTreeSet<HeardOfCollection>,
    generator: Generator,
}

impl PartialEq for HeardOfPredicate {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.horizon == other.horizon && self.collections == other.collections
    }
}

impl Eq for HeardOfPredicate {}

impl HeardOfPredicate {
    pub fn literal<I>(n: usize, horizon: usize, collections: I) -> Result<Self>
    where
        I: IntoIterator<Item = HeardOfCollection>,
    {
        crate::collection::check_shape(n, horizon)?;
        let collections: BTreeSet<_> = collections.into_iter().collect();
        if let Some(c) = collections.iter().find(|c| c.n() != n || c.horizon() != horizon) {
            return Err(Error::ShapeMismatch {
                expected_n: n,
                expected_horizon: horizon,
                found_n: c.n(),
                found_horizon: c.horizon(),
            });
        }
        Ok(HeardOfPredicate {
            n,
            horizon,
            collections,
            generator: Generator::Literal,
        })
    }

    pub fn from_exploration(e: &Exploration) -> Self {
        HeardOfPredicate {
            n: e.n,
            horizon: e.horizon,
            collections: e.collections(),
            generator: Generator::Enumerated { complete: e.complete },
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn collections(&self) -> &BTreeSet<HeardOfCollection> {
        &self.collections
    }

    pub fn iter(&self) -> impl Iterator<Item = &HeardOfCollection> {
        self.collections.iter()
    }

    pub fn len(&self) -> usize {
        self.collections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.collections.is_empty()
    }

    pub fn contains(&self, ho: &HeardOfCollection) -> bool {
        self.collections.contains(ho)
    }

    pub fn is_subset(&self, other: &HeardOfPredicate) -> bool {
        self.collections.is_subset(&other.collections)
    }

    /// A member of `self` missing from `other`.
    pub fn first_not_in(&self, other: &HeardOfPredicate) -> Option<&HeardOfCollection> {
        self.collections.iter().find(|c| !other.collections.contains(c))
    }
}

impl fmt::Display for HeardOfPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let how = match &self.generator {
            Generator::HoProduct { basis } => {
                let sets: Vec<String> = basis
                    .iter()
                    .map(|s| ProcessSet::from_indices(s.iter().copied()).to_string())
                    .collect();
                format!("HOProd({})", sets.join(", "))
            }
            Generator::Enumerated { complete: true } => "enumerated".to_string(),
            Generator::Enumerated { complete: false } => "enumerated, partial".to_string(),
            Generator::Literal => "literal".to_string(),
        };
        writeln!(
            f,
            "# {how}: {} collections, n={}, horizon={}",
            self.len(),
            self.n,
            self.horizon
        )?;
        for c in &self.collections {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct HeardOfJson {
    n: usize,
    horizon: usize,
    generator: Generator,
    size: usize,
    collections: Vec<Collection>,
}

impl Serialize for HeardOfPredicate {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        HeardOfJson {
            n: self.n,
            horizon: self.horizon,
            generator: self.generator.clone(),
            size: self.len(),
            collections: self.collections.iter().cloned().collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for HeardOfPredicate {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = HeardOfJson::deserialize(deserializer)?;
        if raw.size != raw.collections.len() {
            return Err(serde::de::Error::custom(format!(
                "size {} but {} collections",
                raw.size,
                raw.collections.len()
            )));
        }
        let mut p = HeardOfPredicate::literal(raw.n, raw.horizon, raw.collections)
            .map_err(serde::de::Error::custom)?;
        p.generator = raw.generator;
        Ok(p)
    }
}

/// Whether every entry of `ho` lies in `basis`.
pub fn in_ho_product(basis: &BTreeSet<ProcessSet>, ho: &HeardOfCollection) -> bool {
    ho.entries().iter().all(|s| basis.contains(s))
}

pub fn ho_product(basis: &BTreeSet<ProcessSet>, n: usize, horizon: usize) -> Result<HeardOfPredicate> {
    ho_product_capped(basis, n, horizon, HO_CAP)
}

/// `HOProd(basis)`: all collections whose entries are drawn from `basis`.
pub fn ho_product_capped(
    basis: &BTreeSet<ProcessSet>,
    n: usize,
    horizon: usize,
    cap: u64,
) -> Result<HeardOfPredicate> {
    crate::collection::check_shape(n, horizon)?;
    if basis.is_empty() {
        return Err(Error::InvalidParameter("heard-of product of an empty set".into()));
    }
    if let Some(s) = basis.iter().find(|s| !s.fits(n)) {
        return Err(Error::InvalidParameter(format!("{s} is not a subset of {n} processes")));
    }
    let slots = (n * horizon) as u32;
    let estimate = (basis.len() as u128).checked_pow(slots).unwrap_or(u128::MAX);
    if estimate > cap as u128 {
        return Err(Error::CapExceeded {
            what: "heard-of product".into(),
            estimate,
            cap,
        });
    }
    let sets: Vec<ProcessSet> = basis.iter().copied().collect();
    let mut digits = vec![0usize; n * horizon];
    let mut collections = BTreeSet::new();
    loop {
        let entries = digits.iter().map(|&d| sets[d]).collect();
        collections.insert(Collection::from_flat(n, horizon, entries));
        // odometer over slots, last slot fastest
        let mut i = digits.len();
        loop {
            if i == 0 {
                return Ok(HeardOfPredicate {
                    n,
                    horizon,
                    collections,
                    generator: Generator::HoProduct {
                        basis: sets.iter().map(|s| s.to_indices()).collect(),
                    },
                });
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < sets.len() {
                break;
            }
            digits[i] = 0;
        }
    }
}

/// Sorted codes (see [`crate::explore::encode`]) of `HOProd(basis)`.
pub fn product_codes(basis: &BTreeSet<ProcessSet>, n: usize, horizon: usize, cap: u64) -> Result<Vec<u64>> {
    if n * n * horizon > 64 {
        return Err(Error::InvalidParameter(format!(
            "codes need n*n*horizon <= 64, got n={n}, horizon={horizon}"
        )));
    }
    let estimate = (basis.len() as u128).checked_pow((n * horizon) as u32).unwrap_or(u128::MAX);
    if estimate > cap as u128 {
        return Err(Error::CapExceeded {
            what: "heard-of product".into(),
            estimate,
            cap,
        });
    }
    let mut codes = vec![0u64];
    for slot in 0..n * horizon {
        codes = codes
            .iter()
            .flat_map(|&c| basis.iter().map(move |s| c | (s.bits() as u64) << (slot * n)))
            .collect();
    }
    codes.sort_unstable();
    Ok(codes)
}

fn check_oblivious_preconditions(f: &ObliviousStrategy, p: &DeliveredPredicate) -> Result<()> {
    if f.n() != p.n() {
        return Err(Error::InvalidParameter(format!(
            "strategy over {} processes, predicate over {}",
            f.n(),
            p.n()
        )));
    }
    if !p.contains_total() {
        return Err(Error::Precondition(
            "the predicate does not contain the total collection".into(),
        ));
    }
    if !oblivious_valid_for(f, p) {
        return Err(Error::Precondition(
            "the strategy is not valid for the predicate".into(),
        ));
    }
    Ok(())
}

/// `HO_f(P) = HOProd(Nexts_f)` for a valid oblivious `f` when `P` contains
/// the total collection.
pub fn generate_ho_oblivious(f: &ObliviousStrategy, p: &DeliveredPredicate) -> Result<HeardOfPredicate> {
    generate_ho_oblivious_capped(f, p, HO_CAP)
}

pub fn generate_ho_oblivious_capped(
    f: &ObliviousStrategy,
    p: &DeliveredPredicate,
    cap: u64,
) -> Result<HeardOfPredicate> {
    check_oblivious_preconditions(f, p)?;
    ho_product_capped(f.nexts(), p.n(), p.horizon(), cap)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operation {
    Union,
    Combine,
    Succeed,
    Repeat,
}

impl Operation {
    pub fn is_binary(self) -> bool {
        !matches!(self, Operation::Repeat)
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Operation::Union => "union",
            Operation::Combine => "combine",
            Operation::Succeed => "succeed",
            Operation::Repeat => "repeat",
        })
    }
}

/// Basis of the product bounding the heard-of predicate of a composed minimal
/// conservative strategy, from the oblivious parts of the operands.
pub fn upper_bound_basis(
    op: Operation,
    f1: &ConservativeStrategy,
    f2: Option<&ConservativeStrategy>,
) -> Result<BTreeSet<ProcessSet>> {
    let n1 = f1.oblivious_part().nexts().clone();
    let n2 = || {
        f2.map(|f| f.oblivious_part().nexts().clone())
            .ok_or_else(|| Error::InvalidParameter(format!("{op} needs two operands")))
    };
    Ok(match op {
        Operation::Union | Operation::Succeed => n1.union(&n2()?).copied().collect(),
        Operation::Combine => {
            let n2 = n2()?;
            n1.iter()
                .flat_map(|a| n2.iter().map(move |b| a.intersection(*b)))
                .collect()
        }
        Operation::Repeat => n1,
    })
}

/// Upper bound on the heard-of predicate of `f1 op f2` on `P1 op P2`, for
/// minimal conservative `f1`, `f2` of predicates containing the total collection.
pub fn conservative_ho_upper_bound(
    op: Operation,
    f1: &ConservativeStrategy,
    f2: Option<&ConservativeStrategy>,
    p1: &DeliveredPredicate,
    p2: Option<&DeliveredPredicate>,
    cap: u64,
) -> Result<HeardOfPredicate> {
    for p in std::iter::once(p1).chain(p2) {
        if !p.contains_total() {
            return Err(Error::Precondition(
                "an operand predicate does not contain the total collection".into(),
            ));
        }
    }
    let basis = upper_bound_basis(op, f1, f2)?;
    ho_product_capped(&basis, p1.n(), p1.horizon(), cap)
}

/// Outcome of a check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "holds-at-horizon")]
    Holds,
    #[serde(rename = "fails")]
    Fails,
    /// Sampled or cut short; neither confirmed nor refuted.
    #[serde(rename = "partial-budget")]
    Partial,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Holds => "holds-at-horizon",
            Verdict::Fails => "fails",
            Verdict::Partial => "partial-budget",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub theorem: String,
    pub params: Value,
    pub verdict: Verdict,
    /// Which kind of evidence produced the verdict.
    pub tier: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Value>,
    /// Zero unless timing was requested, so that reports stay reproducible.
    #[serde(default)]
    pub elapsed_ms: u64,
}

impl TheoremReport {
    pub fn new(theorem: &str, params: Value, tier: &str) -> Self {
        TheoremReport {
            theorem: theorem.to_string(),
            params,
            verdict: Verdict::Holds,
            tier: tier.to_string(),
            witness: None,
            elapsed_ms: 0,
        }
    }

    /// Marks the report failed with a counterexample.
    pub fn fail(mut self, counterexample: Value) -> Self {
        self.verdict = Verdict::Fails;
        self.witness = Some(counterexample);
        self
    }

    pub fn with_witness(mut self, witness: Value) -> Self {
        self.witness = Some(witness);
        self
    }

    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} [{}] {}: {}", self.verdict, self.tier, self.theorem, self.params);
        if let Some(w) = &self.witness {
            s.push_str(&format!("\n  witness: {w}"));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Oblivious,
    Conservative,
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "obliv" | "oblivious" => Ok(Family::Oblivious),
            "cons" | "conservative" => Ok(Family::Conservative),
            _ => Err(Error::InvalidParameter(format!("unknown strategy family {s:?}"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Oblivious => "oblivious",
            Family::Conservative => "conservative",
        })
    }
}

/// Limits for domination checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DominationConfig {
    /// Largest family enumerated exhaustively; bigger families are sampled.
    pub family_cap: u64,
    pub samples: usize,
    pub seed: u64,
    /// Explorer budget per collection.
    pub budget: u64,
}

impl Default for DominationConfig {
    fn default() -> Self {
        DominationConfig {
            family_cap: 256,
            samples: 12,
            seed: 0,
            budget: DEFAULT_BUDGET,
        }
    }
}

fn predicate_params(p: &DeliveredPredicate) -> Value {
    json!({"n": p.n(), "horizon": p.horizon(), "expr": p.expr().to_string()})
}

fn strategy_json(f: impl Into<Strategy>) -> Value {
    serde_json::to_value(f.into()).expect("strategies serialize")
}

/// Supersets of `base` within `universe`: all of them when there are at most
/// `cfg.family_cap`, otherwise `cfg.samples` random ones. The flag says
/// whether the list is exhaustive.
fn family_members<T: Ord + Clone>(
    base: &BTreeSet<T>,
    universe: &[T],
    cfg: &DominationConfig,
) -> (Vec<BTreeSet<T>>, bool) {
    let extra: Vec<&T> = universe.iter().filter(|x| !base.contains(x)).collect();
    let exhaustive = extra.len() < 64 && (1u64 << extra.len()) <= cfg.family_cap;
    let build = |mask: &dyn Fn(usize) -> bool| -> BTreeSet<T> {
        let mut s = base.clone();
        s.extend(extra.iter().enumerate().filter(|(i, _)| mask(*i)).map(|(_, x)| (*x).clone()));
        s
    };
    if exhaustive {
        let members = (0..1u64 << extra.len())
            .map(|m| build(&|i| m >> i & 1 == 1))
            .collect();
        return (members, true);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let members = (0..cfg.samples)
        .map(|_| {
            let bits: Vec<bool> = (0..extra.len()).map(|_| rng.gen()).collect();
            build(&|i| bits[i])
        })
        .collect();
    (members, false)
}

/// Heard-of predicate of an oblivious strategy, through the product when the
/// predicate contains the total collection and by exploration otherwise.
fn oblivious_ho(
    f: &ObliviousStrategy,
    p: &DeliveredPredicate,
    budget: u64,
) -> Result<(Exploration, &'static str)> {
    if p.contains_total() {
        check_oblivious_preconditions(f, p)?;
        let e = Exploration {
            n: p.n(),
            horizon: p.horizon(),
            codes: product_codes(f.nexts(), p.n(), p.horizon(), HO_CAP)?,
            complete: true,
            states: 0,
            deadlocks: Vec::new(),
        };
        return Ok((e, "payload"));
    }
    Ok((enumerate_ho_bounded(&f.clone().into(), p, budget)?, "enumerated"))
}

/// Checks that the minimal strategy of `family` generates no more heard-of
/// collections than any valid strategy of the family. Families too large to
/// enumerate are sampled and reported as partial.
pub fn check_family_domination(
    p: &DeliveredPredicate,
    family: Family,
    cfg: &DominationConfig,
) -> Result<TheoremReport> {
    let n = p.n();
    let params = json!({"predicate": predicate_params(p), "family": family.to_string()});
    let id = format!("family-domination-{family}");
    match family {
        Family::Oblivious => {
            let fmin = minimal_oblivious(p);
            let universe: Vec<ProcessSet> = ProcessSet::all_subsets(n).collect();
            let (members, exhaustive) = family_members(fmin.nexts(), &universe, cfg);
            let (ho_min, how) = oblivious_ho(&fmin, p, cfg.budget)?;
            let tier = format!("{}-family/{how}", if exhaustive { "exhaustive" } else { "sampled" });
            let mut report = TheoremReport::new(&id, params, &tier);
            let mut complete = ho_min.complete;
            let mut strict = None;
            for nexts in &members {
                let f = ObliviousStrategy::new(n, nexts.iter().copied())?;
                if !oblivious_valid_for(&f, p) {
                    return Ok(report.fail(json!({"invalid_superset": strategy_json(f)})));
                }
                let (ho_f, _) = oblivious_ho(&f, p, cfg.budget)?;
                complete &= ho_f.complete;
                if let Some(c) = ho_min.first_not_in(&ho_f) {
                    return Ok(report.fail(json!({"strategy": strategy_json(f), "collection": c})));
                }
                if strict.is_none() {
                    strict = ho_f.first_not_in(&ho_min).map(|c| (f, c));
                }
            }
            if !exhaustive || !complete {
                report.verdict = Verdict::Partial;
            }
            Ok(report.with_witness(json!({
                "minimal": strategy_json(fmin),
                "strategies_checked": members.len(),
                "strictly_dominated": strict.map(|(f, c)| json!({"strategy": strategy_json(f), "collection": c})),
            })))
        }
        Family::Conservative => {
            let fmin = minimal_conservative(p)?;
            let horizon = p.horizon();
            let universe = conservative_universe(n, horizon)?;
            let (members, exhaustive) = family_members(fmin.states(), &universe, cfg);
            let ho_min = enumerate_ho_bounded(&fmin.clone().into(), p, cfg.budget)?;
            let tier = format!("{}-family/enumerated", if exhaustive { "exhaustive" } else { "sampled" });
            let mut report = TheoremReport::new(&id, params, &tier);
            let mut complete = ho_min.complete;
            for states in &members {
                let f = ConservativeStrategy::new(n, horizon, states.iter().cloned())?;
                if !conservative_valid_for(&f, p) {
                    return Ok(report.fail(json!({"invalid_superset": strategy_json(f)})));
                }
                let ho_f = enumerate_ho_bounded(&f.clone().into(), p, cfg.budget)?;
                complete &= ho_f.complete;
                if let Some(c) = ho_min.first_not_in(&ho_f) {
                    return Ok(report.fail(json!({"strategy": strategy_json(f), "collection": c})));
                }
            }
            let (ho_obliv, _) = oblivious_ho(&minimal_oblivious(p), p, cfg.budget)?;
            complete &= ho_obliv.complete;
            if !exhaustive || !complete {
                report.verdict = Verdict::Partial;
            }
            let comparison = json!({
                "conservative_size": ho_min.len(),
                "oblivious_size": ho_obliv.len(),
                "contained": ho_min.is_subset(&ho_obliv),
                "strict_witness": ho_obliv.first_not_in(&ho_min),
            });
            Ok(report.with_witness(json!({
                "minimal": strategy_json(fmin),
                "strategies_checked": members.len(),
                "versus_minimal_oblivious": comparison,
            })))
        }
    }
}

/// Every conservative state up to the horizon, as prefixes.
fn conservative_universe(n: usize, horizon: usize) -> Result<Vec<Prefix>> {
    let total: u128 = (1..=horizon).map(|l| 1u128 << (n * l).min(127)).sum();
    if total > HO_CAP as u128 {
        return Err(Error::CapExceeded {
            what: "conservative states".into(),
            estimate: total,
            cap: HO_CAP,
        });
    }
    let subsets: Vec<ProcessSet> = ProcessSet::all_subsets(n).collect();
    let mut out = Vec::new();
    let mut layer: Vec<Prefix> = vec![Vec::new()];
    for _ in 0..horizon {
        layer = layer
            .iter()
            .flat_map(|q| {
                subsets.iter().map(move |s| {
                    let mut q = q.clone();
                    q.push(*s);
                    q
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    Ok(out)
}

/// Looks for one of the two closure properties that guarantee a dominating
/// strategy. Without one, the verdict is partial; if `f_loss` is valid for
/// the predicate its heard-of predicate is compared with the minimal
/// oblivious one.
pub fn check_global_domination_evidence(p: &DeliveredPredicate, budget: u64) -> Result<TheoremReport> {
    let params = json!({"predicate": predicate_params(p)});
    let id = "global-domination";
    if p.has_common_round() {
        let fmin = minimal_oblivious(p);
        return Ok(TheoremReport::new(id, params, "certificate:common-round").with_witness(json!({
            "dominating_family": "oblivious",
            "strategy": strategy_json(fmin),
        })));
    }
    if p.has_common_prefix() {
        let fmin = minimal_conservative(p)?;
        return Ok(TheoremReport::new(id, params, "certificate:common-prefix").with_witness(json!({
            "dominating_family": "conservative",
            "strategy": strategy_json(fmin),
        })));
    }
    let mut report = TheoremReport::new(id, params, "none");
    report.verdict = Verdict::Partial;
    let mut witness = json!({
        "conclusion": "no sufficient condition applies",
        "common_round_counterexample": p.common_round_counterexample().map(|(r, s)| json!({"round": r, "set": s.to_indices()})),
        "common_prefix_counterexample": p.common_prefix_counterexample().map(|q| q.iter().map(|s| s.to_indices()).collect::<Vec<_>>()),
    });
    if p.n() >= 2 {
        let floss = enumerate_ho_bounded(&f_loss(p.n())?, p, budget)?;
        if floss.complete && floss.is_deadlock_free() {
            let (obliv, _) = oblivious_ho(&minimal_oblivious(p), p, budget)?;
            witness["f_loss_comparison"] = json!({
                "f_loss_size": floss.len(),
                "minimal_oblivious_size": obliv.len(),
                "contained": floss.is_subset(&obliv),
                "strict_witness": obliv.first_not_in(&floss),
            });
        }
    }
    Ok(report.with_witness(witness))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predicate::{build_crash1_at, build_crashF, build_lossL, build_total};
    use crate::strategy::f_n_minus_F;
    use proptest::prelude::*;

    fn sets_at_least(n: usize, k: usize) -> BTreeSet<ProcessSet> {
        ProcessSet::subsets_of_size_at_least(n, k).collect()
    }

    #[test]
    fn product_of_full_set_is_total() {
        let basis: BTreeSet<_> = [ProcessSet::full(3)].into();
        let ho = ho_product(&basis, 3, 2).unwrap();
        assert_eq!(ho.len(), 1);
        assert!(ho.iter().next().unwrap().is_total());
    }

    #[test]
    fn product_sizes() {
        assert_eq!(ho_product(&sets_at_least(3, 2), 3, 1).unwrap().len(), 64);
        assert_eq!(ho_product(&sets_at_least(3, 2), 3, 2).unwrap().len(), 4096);
        assert!(ho_product(&BTreeSet::new(), 3, 1).is_err());
        assert!(matches!(
            ho_product_capped(&sets_at_least(3, 2), 3, 2, 100),
            Err(Error::CapExceeded { estimate: 4096, .. })
        ));
    }

    #[test]
    fn json_round_trip_keeps_generator() {
        let ho = ho_product(&sets_at_least(2, 1), 2, 1).unwrap();
        let text = serde_json::to_string(&ho).unwrap();
        assert!(text.contains(r#""kind":"ho_product""#));
        assert!(text.contains(r#""size":9"#));
        let back: HeardOfPredicate = serde_json::from_str(&text).unwrap();
        assert_eq!(back, ho);
        assert_eq!(back.generator(), ho.generator());
    }

    #[test]
    fn oblivious_ho_of_f_n_minus_f() {
        let p = build_crashF(3, 2, 1).unwrap();
        let f = f_n_minus_F(3, 1).unwrap();
        let ho = generate_ho_oblivious(&f, &p).unwrap();
        assert_eq!(ho, ho_product(&sets_at_least(3, 2), 3, 2).unwrap());
        let t = build_total(3, 2).unwrap();
        assert_eq!(generate_ho_oblivious(&minimal_oblivious(&t), &t).unwrap().len(), 1);
    }

    #[test]
    fn oblivious_preconditions_are_named() {
        let p = build_crash1_at(3, 2, 2).unwrap();
        let p = p.without(&Collection::total(3, 2)).unwrap();
        let f = minimal_oblivious(&p);
        match generate_ho_oblivious(&f, &p) {
            Err(Error::Precondition(m)) => assert!(m.contains("total")),
            other => panic!("{other:?}"),
        }
        let q = build_crashF(3, 2, 1).unwrap();
        let weak = f_n_minus_F(3, 0).unwrap();
        match generate_ho_oblivious(&weak, &q) {
            Err(Error::Precondition(m)) => assert!(m.contains("not valid")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn upper_bound_cases() {
        let p = build_crashF(3, 2, 1).unwrap();
        let f = minimal_conservative(&p).unwrap();
        let union = upper_bound_basis(Operation::Union, &f, Some(&f)).unwrap();
        assert_eq!(union, sets_at_least(3, 2));
        let comb = upper_bound_basis(Operation::Combine, &f, Some(&f)).unwrap();
        assert_eq!(comb, sets_at_least(3, 1));
        assert_eq!(upper_bound_basis(Operation::Repeat, &f, None).unwrap(), sets_at_least(3, 2));
        assert!(upper_bound_basis(Operation::Union, &f, None).is_err());
        let bound = conservative_ho_upper_bound(Operation::Repeat, &f, None, &p, None, HO_CAP).unwrap();
        assert_eq!(bound.len(), 4096);
    }

    #[test]
    fn oblivious_family_domination_on_crash() {
        let p = build_crashF(3, 2, 1).unwrap();
        let r = check_family_domination(&p, Family::Oblivious, &DominationConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Holds, "{}", r.to_text());
        assert_eq!(r.witness.as_ref().unwrap()["strategies_checked"], 16);
    }

    #[test]
    fn conservative_family_domination_is_sampled() {
        let p = build_total(2, 1).unwrap();
        let cfg = DominationConfig::default();
        let r = check_family_domination(&p, Family::Conservative, &cfg).unwrap();
        // 4 states, minimal keeps one: 8 supersets, enumerated exhaustively
        assert_eq!(r.verdict, Verdict::Holds, "{}", r.to_text());
        let p = build_crash1_at(3, 2, 2).unwrap();
        let r = check_family_domination(&p, Family::Conservative, &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::Partial);
        let cmp = &r.witness.as_ref().unwrap()["versus_minimal_oblivious"];
        assert_eq!(cmp["contained"], true);
        assert!(!cmp["strict_witness"].is_null());
    }

    #[test]
    fn global_evidence() {
        let r = check_global_domination_evidence(&build_crashF(3, 2, 1).unwrap(), DEFAULT_BUDGET).unwrap();
        assert_eq!(r.tier, "certificate:common-round");
        let r = check_global_domination_evidence(&build_total(3, 2).unwrap(), DEFAULT_BUDGET).unwrap();
        assert_eq!(r.verdict, Verdict::Holds);
        let r = check_global_domination_evidence(&build_lossL(3, 2, 1).unwrap(), DEFAULT_BUDGET).unwrap();
        assert_eq!(r.verdict, Verdict::Partial);
        let cmp = &r.witness.as_ref().unwrap()["f_loss_comparison"];
        assert_eq!(cmp["contained"], true);
        assert!(!cmp["strict_witness"].is_null());
    }

    #[test]
    fn report_json_round_trip() {
        let r = TheoremReport::new("x", json!({"n": 3}), "payload").fail(json!({"collection": Collection::total(2, 1)}));
        let back: TheoremReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }

    proptest! {
        #[test]
        fn product_is_monotone(a in 1u32..16, b in 0u32..16) {
            let s1: BTreeSet<ProcessSet> = (0..4).filter(|i| a >> i & 1 == 1).map(ProcessSet::from_bits).collect();
            let s2: BTreeSet<ProcessSet> = s1.iter().copied().chain((0..4).filter(|i| b >> i & 1 == 1).map(ProcessSet::from_bits)).collect();
            let h1 = ho_product(&s1, 2, 2).unwrap();
            let h2 = ho_product(&s2, 2, 2).unwrap();
            prop_assert!(h1.is_subset(&h2));
            prop_assert!(h2.iter().all(|c| in_ho_product(&s2, c)));
        }
    }
}
