//! The theorem-check suite: every equality and inclusion about strategies and
//! predicates that the library can decide at a bounded horizon, each run as an
//! independent check that yields one report.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analysis::{
    check_family_domination, check_global_domination_evidence, in_ho_product, product_codes,
    upper_bound_basis, DominationConfig, Family, Operation, TheoremReport, Verdict, HO_CAP,
};
use crate::collection::Collection;
use crate::error::{Error, Result};
use crate::execution::{canonical_execution, round_deficiency, shifted_canonical_execution, standard_execution, EventOrder};
use crate::explore::{decode, enumerate_ho_bounded, Exploration, DEFAULT_BUDGET};
use crate::predicate::{build_crash1, build_crashF, build_lossL, DeliveredPredicate, PredicateBuilder, DEFAULT_CAP};
use crate::process::ProcessSet;
use crate::strategy::{
    conservative_valid_for, f_loss, f_n_minus_F, minimal_conservative, minimal_oblivious,
    oblivious_valid_for, ConservativeStrategy, ObliviousStrategy, Prefix, Strategy,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub n: usize,
    pub horizon: usize,
    /// Tie-breaking order for generated traces. Reports must not depend on it.
    pub order: EventOrder,
    /// Cap on predicate sizes.
    pub cap: u64,
    /// Explorer budget per collection.
    pub budget: u64,
    pub seed: u64,
    /// Number of random (strategy, collection) pairs for the standard-execution check.
    pub samples: usize,
    /// Strategies sampled when a family is too large to enumerate.
    pub family_samples: usize,
    pub timing: bool,
    /// Drops the collection with this index from the two-crash predicate, so
    /// that the crash-combination identity fails.
    pub corrupt: Option<usize>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            n: 3,
            horizon: 2,
            order: EventOrder::Canonical,
            cap: DEFAULT_CAP,
            budget: DEFAULT_BUDGET,
            seed: 0,
            samples: 200,
            family_samples: 6,
            timing: false,
            corrupt: None,
        }
    }
}

impl SuiteConfig {
    fn domination(&self) -> DominationConfig {
        DominationConfig {
            samples: self.family_samples,
            seed: self.seed,
            budget: self.budget,
            ..DominationConfig::default()
        }
    }

    fn params(&self) -> Value {
        json!({"n": self.n, "horizon": self.horizon})
    }
}

type Check = fn(&SuiteConfig) -> Result<TheoremReport>;

const CHECKS: &[(&str, Check)] = &[
    ("c01-f-n-minus-f-characterization", c01_characterization),
    ("c02-validity-criteria", c02_validity),
    ("c03-standard-execution", c03_standard_execution),
    ("c04-canonical-execution", c04_canonical_execution),
    ("c05-oblivious-composition", c05_oblivious_composition),
    ("c06-crash-combination", c06_crash_combination),
    ("c07-hoprod-lemma", c07_hoprod_lemma),
    ("c08-conservative-composition", c08_conservative_composition),
    ("c09-property-preservation", c09_property_preservation),
    ("c10a-f-loss-validity", c10a_floss_validity),
    ("c10b-f-loss-characterization", c10b_floss_characterization),
    ("c10c-f-loss-shifted-canonical", c10c_floss_shifted),
    ("c11a-conservative-beats-oblivious", c11a_conservative_separation),
    ("c11b-f-loss-beats-oblivious", c11b_floss_separation),
    ("d01-family-domination-oblivious", d01_family_oblivious),
    ("d02-family-domination-conservative", d02_family_conservative),
    ("d03-global-domination", d03_global),
];

/// Ids of the checks, in report order.
pub fn theorem_ids() -> Vec<&'static str> {
    CHECKS.iter().map(|(id, _)| *id).collect()
}

/// Runs every check and returns the reports sorted by id. A check that errors
/// out is reported as failed, or as partial when it hit a cap.
pub fn run_theorem_suite(cfg: &SuiteConfig) -> Vec<TheoremReport> {
    run_selected(cfg, |_| true)
}

/// Runs the checks whose id satisfies `select`.
pub fn run_selected(cfg: &SuiteConfig, select: impl Fn(&str) -> bool + Sync) -> Vec<TheoremReport> {
    let mut reports: Vec<TheoremReport> = CHECKS
        .par_iter()
        .filter(|(id, _)| select(id))
        .map(|(id, check)| {
            let start = Instant::now();
            let mut report = match check(cfg) {
                Ok(r) => r,
                Err(e) => error_report(id, cfg, e),
            };
            report.theorem = id.to_string();
            if cfg.timing {
                report.elapsed_ms = start.elapsed().as_millis() as u64;
            }
            report
        })
        .collect();
    reports.sort_by(|a, b| a.theorem.cmp(&b.theorem));
    reports
}

fn error_report(id: &str, cfg: &SuiteConfig, e: Error) -> TheoremReport {
    let mut r = TheoremReport::new(id, cfg.params(), "error");
    if matches!(e, Error::CapExceeded { .. }) {
        r.verdict = Verdict::Partial;
        r.witness = Some(json!({"error": e.to_string()}));
        r
    } else {
        r.fail(json!({"error": e.to_string()}))
    }
}

/// 0 when no report fails; partial verdicts do not count as failures.
pub fn suite_exit_code(reports: &[TheoremReport]) -> i32 {
    if reports.iter().any(|r| r.verdict == Verdict::Fails) {
        1
    } else {
        0
    }
}

fn strategy_json(f: impl Into<Strategy>) -> Value {
    serde_json::to_value(f.into()).expect("strategies serialize")
}

fn prefix_json(q: &[ProcessSet]) -> Value {
    json!(q.iter().map(|s| s.to_indices()).collect::<Vec<_>>())
}

fn sets_json(s: &BTreeSet<ProcessSet>) -> Value {
    json!(s.iter().map(|s| s.to_indices()).collect::<Vec<_>>())
}

/// First code in exactly one of two sorted lists, with the list it belongs to.
fn first_difference(a: &[u64], b: &[u64]) -> Option<(u64, bool)> {
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) if x == y => {
                i += 1;
                j += 1;
            }
            (Some(x), Some(y)) if x < y => return Some((*x, true)),
            (Some(_), Some(y)) => return Some((*y, false)),
            (Some(x), None) => return Some((*x, true)),
            (None, Some(y)) => return Some((*y, false)),
            (None, None) => unreachable!(),
        }
    }
    None
}

fn set_equality_report(
    report: TheoremReport,
    got: &Exploration,
    expected: &[u64],
    expected_name: &str,
) -> TheoremReport {
    if let Some((code, in_got)) = first_difference(&got.codes, expected) {
        let got_only = got.codes.iter().filter(|c| expected.binary_search(c).is_err()).count();
        let expected_only = expected.iter().filter(|c| got.codes.binary_search(c).is_err()).count();
        return report.fail(json!({
            "collection": decode(got.n, got.horizon, code),
            "side": if in_got { "enumerated only".to_string() } else { format!("{expected_name} only") },
            "enumerated_size": got.len(),
            "expected_size": expected.len(),
            "enumerated_only": got_only,
            "expected_only": expected_only,
        }));
    }
    let mut report = report.with_witness(json!({"size": got.len(), "states": got.states}));
    if !got.complete {
        report.verdict = Verdict::Partial;
    }
    report
}

fn deadlock_report(report: TheoremReport, e: &Exploration) -> Option<TheoremReport> {
    e.deadlocks.first().map(|d| {
        report.clone().fail(json!({
            "collection": d.collection,
            "stuck": d.stuck,
            "trace": d.trace.to_text(),
        }))
    })
}

fn c01_characterization(cfg: &SuiteConfig) -> Result<TheoremReport> {
    let (n, horizon) = (cfg.n, cfg.horizon);
    let p = build_crashF(n, horizon, 1)?;
    let f = f_n_minus_F(n, 1)?;
    let mut params = cfg.params();
    params["predicate"] = json!(p.expr().to_string());
    params["strategy"] = strategy_json(f.clone());
    let report = TheoremReport::new("", params, "enumerated");
    let e = enumerate_ho_bounded(&f.clone().into(), &p, cfg.budget)?;
    if let Some(r) = deadlock_report(report.clone(), &e) {
        return Ok(r);
    }
    let expected = product_codes(f.nexts(), n, horizon, HO_CAP)?;
    Ok(set_equality_report(report, &e, &expected, "product"))
}

fn c02_validity(cfg: &SuiteConfig) -> Result<TheoremReport> {
    let (n, horizon) = (cfg.n, cfg.horizon);
    let p = build_crashF(n, horizon, 1)?;
    let f = f_n_minus_F(n, 1)?;
    let mut params = cfg.params();
    params["predicate"] = json!(p.expr().to_string());
    let report = TheoremReport::new("", params, "criterion+enumerated");
    if !oblivious_valid_for(&f, &p) {
        return Ok(report.fail(json!({"strategy": strategy_json(f), "reason": "criterion rejects a valid strategy"})));
    }
    let e = enumerate_ho_bounded(&f.clone().into(), &p, cfg.budget)?;
    if let Some(r) = deadlock_report(report.clone(), &e) {
        return Ok(r);
    }
    let delivered = p.delivered_sets();
    let mut oblivious_flips = 0;
    for s in f.nexts().iter().filter(|s| delivered.contains(s)) {
        let g = f.without_next(*s);
        let e = enumerate_ho_bounded(&g.clone().into(), &p, cfg.budget)?;
        if oblivious_valid_for(&g, &p) || e.is_deadlock_free() {
            return Ok(report.fail(json!({
                "removed": s.to_indices(),
                "criterion_valid": oblivious_valid_for(&g, &p),
                "deadlock_found": !e.is_deadlock_free(),
            })));
        }
        oblivious_flips += 1;
    }
    let fc = minimal_conservative(&p)?;
    let lifted = f.to_conservative(horizon)?;
    if !conservative_valid_for(&fc, &p) || !conservative_valid_for(&lifted, &p) {
        return Ok(report.fail(json!({"strategy": strategy_json(fc), "reason": "criterion rejects a valid strategy"})));
    }
    let e = enumerate_ho_bounded(&fc.clone().into(), &p, cfg.budget)?;
    if let Some(r) = deadlock_report(report.clone(), &e) {
        return Ok(r);
    }
    let mut conservative_flips = 0;
    for q in fc.states() {
        let g = fc.without_state(q)?;
        let e = enumerate_ho_bounded(&g.clone().into(), &p, cfg.budget)?;
        if conservative_valid_for(&g, &p) || e.is_deadlock_free() {
            return Ok(report.fail(json!({
                "removed": prefix_json(q),
                "criterion_valid": conservative_valid_for(&g, &p),
                "deadlock_found": !e.is_deadlock_free(),
            })));
        }
        conservative_flips += 1;
    }
    Ok(report.with_witness(json!({
        "oblivious_removals": oblivious_flips,
        "conservative_removals": conservative_flips,
    })))
}

const SAMPLED_EXPRS: &[&str] = &["total", "crash(1)", "crash1@1", "loss(1)", "crash(1) ~> total", "(crash1@1)^w"];

fn random_oblivious(rng: &mut ChaCha8Rng, p: &DeliveredPredicate) -> Result<ObliviousStrategy> {
    let mut nexts: BTreeSet<ProcessSet> = if rng.gen() { minimal_oblivious(p).nexts().clone() } else { BTreeSet::new() };
    nexts.extend(ProcessSet::all_subsets(p.n()).filter(|_| rng.gen_bool(0.4)));
    ObliviousStrategy::new(p.n(), nexts)
}

fn random_conservative(rng: &mut ChaCha8Rng, p: &DeliveredPredicate) -> Result<ConservativeStrategy> {
    let mut states: BTreeSet<Prefix> = minimal_conservative(p)?.states().clone();
    states.retain(|_| rng.gen_bool(0.8));
    let subsets: Vec<ProcessSet> = ProcessSet::all_subsets(p.n()).collect();
    for _ in 0..rng.gen_range(0..6) {
        let len = rng.gen_range(1..=p.horizon());
        states.insert((0..len).map(|_| *subsets.choose(rng).unwrap()).collect());
    }
    ConservativeStrategy::new(p.n(), p.horizon(), states)
}

fn c03_standard_execution(cfg: &SuiteConfig) -> Result<TheoremReport> {
    let mut pool = Vec::new();
    for n in 1..=3 {
        for horizon in 1..=3 {
            let b = PredicateBuilder::new(n, horizon)?.with_cap(cfg.cap);
            for text in SAMPLED_EXPRS {
                pool.push(b.parse_and_eval(text)?);
            }
        }
    }
    let params = json!({"samples": cfg.samples, "seed": cfg.seed, "max_n": 3, "max_horizon": 3, "exprs": SAMPLED_EXPRS});
    let report = TheoremReport::new("", params, "sampled-pairs");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.samples {
        let p = pool.choose(&mut rng).unwrap();
        let members: Vec<&Collection> = p.iter().collect();
        let c = *members.choose(&mut rng).unwrap();
        let f: Strategy = if rng.gen() {
            random_oblivious(&mut rng, p)?.into()
        } else {
            random_conservative(&mut rng, p)?.into()
        };
        let st = standard_execution(&f, c, cfg.order);
        let verdict = st
            .validate()
            .map_err(|v| ("execution", v))
            .and_then(|_| st.check_collection(c).map_err(|v| ("collection", v)))
            .and_then(|_| st.check_strategy(&f).map_err(|v| ("strategy", v)));
        if let Err((which, _)) = verdict {
            let st = standard_execution(&f, c, EventOrder::Canonical);
            let v = st
                .validate()
                .and_then(|_| st.check_collection(c))
                .and_then(|_| st.check_strategy(&f))
                .err()
                .map(|v| v.to_string());
            return Ok(report.fail(json!({
                "check": which,
                "violation": v,
                "expr": p.expr().to_string(),
                "collection": c,
                "strategy": f,
                "trace": st.to_text(),
            })));
        }
    }
    Ok(report.with_witness(json!({"pairs": cfg.samples})))
}

fn c04_canonical_execution(cfg: &SuiteConfig) -> Result<TheoremReport> {
    let (n, horizon) = (cfg.n, cfg.horizon);
    let basis: BTreeSet<ProcessSet> = ProcessSet::subsets_of_size_at_least(n, n.saturating_sub(1)).collect();
    let codes = product_codes(&basis, n, horizon, HO_CAP)?;
    let total = Collection::total(n, horizon);
    let mut params = cfg.params();
    params["basis"] = sets_json(&basis);
    let report = TheoremReport::new("", params, "exhaustive");
    let bad = codes.par_iter().find_first(|&&code| {
        let ho = decode(n, horizon, code);
        let can = canonical_execution(&ho, cfg.order);
        !(can.is_valid() && can.is_execution_of_collection(&total) && can.extract_heardof().ok() == Some(ho))
    });
    if let Some(&code) = bad {
        let ho = decode(n, horizon, code);
        let can = canonical_execution(&ho, EventOrder::Canonical);
        return Ok(report.fail(json!({
            "collection": ho,
            "trace": can.to_text(),
            "extracted": can.extract_heardof().ok(),
            "violation": can.check_collection(&total).err().map(|v| v.to_string()),
        })));
    }
    Ok(report.with_witness(json!({"collections": codes.len()})))
}

/// Operands shared by the composition checks.
struct Instances {
    pool: Vec<DeliveredPredicate>,
    apps: Vec<Application>,
}

struct Application {
    op: Operation,
    left: usize,
    right: Option<usize>,
    result: DeliveredPredicate,
}

impl Application {
    fn describe(&self, pool: &[DeliveredPredicate]) -> Value {
        json!({
            "op": self.op,
            "left": pool[self.left].expr().to_string(),
            "right": self.right.map(|j| pool[j].expr().to_string()),
        })
    }

    fn operands<'a>(&self, pool: &'a [DeliveredPredicate]) -> impl Iterator<Item = &'a DeliveredPredicate> {
        std::iter::once(&pool[self.left]).chain(self.right.map(|j| &pool[j]))
    }
}

fn composition_instances(cfg: &SuiteConfig) -> Result<Instances> {
    let b = PredicateBuilder::new(cfg.n, cfg.horizon)?.with_cap(cfg.cap);
    let mut texts = vec!["crash(1)".to_string(), "crash1@1".to_string()];
    if cfg.horizon > 1 {
        texts.push(format!("crash1@{}", cfg.horizon));
    }
    texts.push("total".to_string());
    let pool: Vec<DeliveredPredicate> = texts.iter().map(|t| b.parse_and_eval(t)).collect::<Result<_>>()?;
    let mut jobs = Vec::new();
    for i in 0..pool.len() {
        jobs.push((Operation::Repeat, i, None));
        for j in 0..pool.len() {
            for op in [Operation::Union, Operation::Combine, Operation::Succeed] {
                jobs.push((op, i, Some(j)));
            }
        }
    }
    let apps = jobs
        .into_par_iter()
        .map(|(op, left, right)| {
            let l = &pool[left];
            let result = match (op, right.map(|j| &pool[j])) {
                (Operation::Union, Some(r)) => l.union(r),
                (Operation::Combine, Some(r)) => l.combine_capped(r, cfg.cap),
                (Operation::Succeed, Some(r)) => l.succeed_capped(r, cfg.cap),
                _ => l.repeat_capped(cfg.cap),
            }?;
            Ok(Application { op, left, right, result })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Instances { pool, apps })
}

fn pool_params(cfg: &SuiteConfig, inst: &Instances) -> Value {
    let mut params = cfg.params();
    params["operands"] = json!(inst.pool.iter().map(|p| p.expr().to_string()).collect::<Vec<_>>());
    params
}

fn c05_oblivious_composition(cfg: &SuiteConfig) -> Result<TheoremReport> {
    let inst = composition_instances(cfg)?;
    let report = TheoremReport::new("", pool_params(cfg, &inst), "exact-payload");
    let mut compared = 0;
    let mut skipped = 0;
    for app in &inst.apps {
        let f1: Strategy = minimal_oblivious(&inst.pool[app.left]).into();
        let composed = match (app.op, app.right) {
            (Operation::Repeat, _) => f1.repeat()?,
            (op, Some(j)) => {
                let f2: Strategy = minimal_oblivious(&inst.pool[j]).into();
                if op == Operation::Combine
                    && !(inst.pool[app.left].is_round_symmetric() && inst.pool[j].is_round_symmetric())
                {
                    skipped += 1;
                    continue;
                }
                match op {
                    Operation::Union => f1.union(&f2)?,
                    Operation::Combine => f1.combine(&f2)?,
                    _ => f1.succeed(&f2)?,
                }
            }
            _ => unreachable!(),
        };
        let direct = minimal_oblivious(&app.result);
        let composed = composed.as_oblivious().expect("oblivious operands stay oblivious").clone();
        if composed.nexts() != direct.nexts() {
            let mut w = app.describe(&inst.pool);
            w["minimal_of_result"] = sets_json(direct.nexts());
            w["composed_minimal"] = sets_json(composed.nexts());
            return Ok(report.fail(w));
        }
        compared += 1;
    }
    Ok(report.with_witness(json!({"applications": compared, "skipped_not_round_symmetric": skipped})))
}

fn c06_crash_combination(cfg: &SuiteConfig) -> Result<TheoremReport> {
    let (n, horizon) = (cfg.n, cfg.horizon);
    let b = PredicateBuilder::new(n, horizon)?.with_cap(cfg.cap);
    let one = b.crash(1)?;
    let combined = one.combine_capped(&one, cfg.cap)?;
    let mut two = build_crashF(n, horizon, 2)?;
    let mut params = cfg.params();
    params["left"] = json!(combined.expr().to_string());
    params["right"] = json!(two.expr().to_string());
    if let Some(k) = cfg.corrupt {
        let dropped = two.iter().nth(k).cloned();
        if let Some(c) = dropped {
            two = two.without(&c)?;
            params["corrupted"] = json!(k);
        }
    }
    let report = TheoremReport::new("", params, "exact-extensional");
    if let Some(c) = combined.iter().find(|c| !two.contains(c)) {
        return Ok(report.fail(json!({"collection": c, "side": "combination only"})));
    }
    if let Some(c) = two.iter().find(|c| !combined.contains(c)) {
        return Ok(report.fail(json!({"collection": c, "side": "two-crash predicate only"})));
    }
    let union = build_crash1(n, horizon)?;
    if union != one {
        let c = union.iter().find(|c| !one.contains(c)).or_else(|| one.iter().find(|c| !union.contains(c)));
        return Ok(report.fail(json!({"collection": c, "side": "union of single-round crashes differs from crash(1)"})));
    }
    Ok(report.with_witness(json!({"size": combined.len(), "crash1_size": one.len()})))
}

fn c07_hoprod_lemma(cfg: &SuiteConfig) -> Result<TheoremReport> {
    let (n, horizon) = (cfg.n, cfg.horizon);
    let preds = [build_crashF(n, horizon, 1)?, build_lossL(n, horizon, 1)?];
    let mut params = cfg.params();
    params["predicates"] = json!(preds.iter().map(|p| p.expr().to_string()).collect::<Vec<_>>());
    let report = TheoremReport::new("", params, "exhaustive-family/enumerated");
    let mut jobs = Vec::new();
    for (i, p) in preds.iter().enumerate() {
        let base = minimal_oblivious(p);
        let extra: Vec<ProcessSet> = ProcessSet::all_subsets(n).filter(|s| !base.nexts().contains(s)).collect();
        if extra.len() > 16 {
            return Err(Error::CapExceeded {
                what: "oblivious strategy family".into(),
                estimate: 1u128 << extra.len(),
                cap: 1 << 16,
            });
        }
        for mask in 0..1u32 << extra.len() {
            let nexts = base
                .nexts()
                .iter()
                .copied()
                .chain(extra.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, s)| *s));
            jobs.push((i, ObliviousStrategy::new(n, nexts)?));
        }
    }
    let outcomes: Vec<Result<Option<Value>>> = jobs
        .par_iter()
        .map(|(i, f)| {
            let p = &preds[*i];
            if !oblivious_valid_for(f, p) {
                return Ok(Some(json!({"strategy": strategy_json(f.clone()), "reason": "superset of the minimal strategy judged invalid"})));
            }
            let e = enumerate_ho_bounded(&f.clone().into(), p, cfg.budget)?;
            let expected = product_codes(f.nexts(), n, horizon, HO_CAP)?;
            let r = set_equality_report(TheoremReport::new("", Value::Null, ""), &e, &expected, "product");
            Ok(match r.verdict {
                Verdict::Fails => Some(json!({"predicate": p.expr().to_string(), "strategy": strategy_json(f.clone()), "difference": r.witness})),
                Verdict::Partial => Some(json!({"partial": true})),
                Verdict::Holds => None,
            })
        })
        .collect();
    let mut partial = false;
    for o in outcomes {
        match o? {
            Some(w) if w.get("partial").is_some() => partial = true,
            Some(w) => return Ok(report.fail(w)),
            None => {}
        }
    }
    let mut report = report.with_witness(json!({"strategies": jobs.len()}));
    if partial {
        report.verdict = Verdict::Partial;
    }
    Ok(report)
}

fn first_state_difference(a: &ConservativeStrategy, b: &ConservativeStrategy) -> Option<Value> {
    a.states()
        .symmetric_difference(b.states())
        .next()
        .map(|q| json!({"state": prefix_json(q), "in_composed": a.contains_prefix(q)}))
}

fn c08_conservative_composition(cfg: &SuiteConfig) -> Result<TheoremReport> {
    let inst = composition_instances(cfg)?;
    let report = TheoremReport::new("", pool_params(cfg, &inst), "exact-payload+enumerated");
    let minimal: Vec<ConservativeStrategy> = inst.pool.iter().map(minimal_conservative).collect::<Result<_>>()?;
    let eligible = |app: &Application| app.operands(&inst.pool).all(|p| p.is_prefix_symmetric() && p.contains_total());
    let outcomes: Vec<Result<Option<Value>>> = inst
        .apps
        .par_iter()
        .filter(|app| eligible(app))
        .map(|app| {
            let f1: Strategy = minimal[app.left].clone().into();
            let f2 = app.right.map(|j| Strategy::from(minimal[j].clone()));
            let composed = match (app.op, &f2) {
                (Operation::Union, Some(g)) => f1.union(g)?,
                (Operation::Combine, Some(g)) => f1.combine(g)?,
                (Operation::Succeed, Some(g)) => f1.succeed(g)?,
                _ => f1.repeat()?,
            };
            let composed_c = composed.as_conservative().expect("conservative operands stay conservative");
            let direct = minimal_conservative(&app.result)?;
            if let Some(diff) = first_state_difference(composed_c, &direct) {
                let mut w = app.describe(&inst.pool);
                w["payload_difference"] = diff;
                return Ok(Some(w));
            }
            let basis = upper_bound_basis(app.op, &minimal[app.left], app.right.map(|j| &minimal[j]))?;
            let e = enumerate_ho_bounded(&composed, &app.result, cfg.budget)?;
            if let Some(c) = e.iter().find(|c| !in_ho_product(&basis, c)) {
                let mut w = app.describe(&inst.pool);
                w["collection"] = json!(c);
                w["bound_basis"] = sets_json(&basis);
                return Ok(Some(w));
            }
            Ok((!e.complete).then(|| json!({"partial": true})))
        })
        .collect();
    let mut partial = false;
    for o in outcomes {
        match o? {
            Some(w) if w.get("partial").is_some() => partial = true,
            Some(w) => return Ok(report.fail(w)),
            None => {}
        }
    }
    let checked = inst.apps.iter().filter(|a| eligible(a)).count();
    let mut report = report.with_witness(json!({"applications": checked}));
    if partial {
        report.verdict = Verdict::Partial;
    }
    Ok(report)
}

fn c09_property_preservation(cfg: &SuiteConfig) -> Result<TheoremReport> {
    let inst = composition_instances(cfg)?;
    let report = TheoremReport::new("", pool_params(cfg, &inst), "exact");
    let mut round_cases = 0;
    let mut prefix_cases = 0;
    for app in &inst.apps {
        if app.operands(&inst.pool).all(|p| p.has_common_round()) {
            round_cases += 1;
            if let Some((r, s)) = app.result.common_round_counterexample() {
                let mut w = app.describe(&inst.pool);
                w["property"] = json!("common round");
                w["counterexample"] = json!({"round": r, "set": s.to_indices()});
                return Ok(report.fail(w));
            }
        }
        if app.operands(&inst.pool).all(|p| p.has_common_prefix()) {
            prefix_cases += 1;
            if let Some(q) = app.result.common_prefix_counterexample() {
                let mut w = app.describe(&inst.pool);
                w["property"] = json!("common prefix");
                w["counterexample"] = prefix_json(&q);
                return Ok(report.fail(w));
            }
        }
    }
    Ok(report.with_witness(json!({"common_round_cases": round_cases, "common_prefix_cases": prefix_cases})))
}

fn floss_instance(cfg: &SuiteConfig) -> Result<(DeliveredPredicate, Strategy, Value)> {
    let p = build_lossL(cfg.n, cfg.horizon, 1)?;
    let mut params = cfg.params();
    params["predicate"] = json!(p.expr().to_string());
    Ok((p, f_loss(cfg.n)?, params))
}

/// Codes of every collection losing at most one message per round.
fn one_loss_per_round(n: usize, horizon: usize) -> Result<Vec<u64>> {
    let all: BTreeSet<ProcessSet> = ProcessSet::all_subsets(n).collect();
    let codes = product_codes(&all, n, horizon, HO_CAP)?;
    Ok(codes
        .into_iter()
        .filter(|&code| {
            let ho = decode(n, horizon, code);
            (1..=horizon).all(|r| round_deficiency(&ho, r) <= 1)
        })
        .collect())
}

fn c10a_floss_validity(cfg: &SuiteConfig) -> Result<TheoremReport> {
    let (p, f, params) = floss_instance(cfg)?;
    let report = TheoremReport::new("", params, "enumerated");
    let e = enumerate_ho_bounded(&f, &p, cfg.budget)?;
    if let Some(r) = deadlock_report(report.clone(), &e) {
        return Ok(r);
    }
    let mut report = report.with_witness(json!({"collections": p.len(), "states": e.states}));
    if !e.complete {
        report.verdict = Verdict::Partial;
    }
    Ok(report)
}

fn c10b_floss_characterization(cfg: &SuiteConfig) -> Result<TheoremReport> {
    let (p, f, params) = floss_instance(cfg)?;
    let report = TheoremReport::new("", params, "enumerated");
    let e = enumerate_ho_bounded(&f, &p, cfg.budget)?;
    let expected = one_loss_per_round(cfg.n, cfg.horizon)?;
    Ok(set_equality_report(report, &e, &expected, "one-loss-per-round"))
}

fn c10c_floss_shifted(cfg: &SuiteConfig) -> Result<TheoremReport> {
    let (p, f, params) = floss_instance(cfg)?;
    let report = TheoremReport::new("", params, "exhaustive");
    let e = enumerate_ho_bounded(&f, &p, cfg.budget)?;
    let members = one_loss_per_round(cfg.n, cfg.horizon)?;
    let mut failures = Vec::new();
    for &code in &members {
        let ho = decode(cfg.n, cfg.horizon, code);
        let trace = shifted_canonical_execution(&ho, cfg.order)?;
        let outcome = trace
            .validate()
            .and_then(|_| trace.check_strategy(&f))
            .map_err(|v| v.to_string())
            .and_then(|_| match trace.extract_heardof() {
                Ok(h) if h == ho => Ok(()),
                _ => Err("extracted heard-of collection differs".to_string()),
            });
        if let Err(reason) = outcome {
            failures.push((ho, reason));
        }
    }
    if let Some((ho, _)) = failures.first() {
        let outside = failures.iter().filter(|(h, _)| !e.contains(h)).count();
        // witnesses are rendered in canonical order so that reports do not depend on it
        let trace = shifted_canonical_execution(ho, EventOrder::Canonical)?;
        let reason = trace.validate().and_then(|_| trace.check_strategy(&f)).err().map(|v| v.to_string());
        return Ok(report.fail(json!({
            "collection": ho,
            "trace": trace.to_text(),
            "violation": reason,
            "failing_members": failures.len(),
            "failing_members_not_generated": outside,
            "members": members.len(),
        })));
    }
    Ok(report.with_witness(json!({"members": members.len()})))
}

fn separation_report(
    report: TheoremReport,
    smaller: &Exploration,
    larger: &Exploration,
) -> TheoremReport {
    if let Some(c) = smaller.first_not_in(larger) {
        return report.fail(json!({"collection": c, "reason": "not contained"}));
    }
    let Some(witness) = larger.first_not_in(smaller) else {
        return report.fail(json!({"collection": larger.iter().next(), "reason": "sets are equal"}));
    };
    let mut report = report.with_witness(json!({
        "smaller_size": smaller.len(),
        "larger_size": larger.len(),
        "collection": witness,
    }));
    if !smaller.complete || !larger.complete {
        report.verdict = Verdict::Partial;
    }
    report
}

fn product_exploration(basis: &BTreeSet<ProcessSet>, n: usize, horizon: usize) -> Result<Exploration> {
    Ok(Exploration {
        n,
        horizon,
        codes: product_codes(basis, n, horizon, HO_CAP)?,
        complete: true,
        states: 0,
        deadlocks: Vec::new(),
    })
}

fn c11a_conservative_separation(cfg: &SuiteConfig) -> Result<TheoremReport> {
    let p = PredicateBuilder::new(cfg.n, cfg.horizon)?.crash1_at(cfg.horizon)?;
    let mut params = cfg.params();
    params["predicate"] = json!(p.expr().to_string());
    let report = TheoremReport::new("", params, "enumerated");
    let cons = enumerate_ho_bounded(&minimal_conservative(&p)?.into(), &p, cfg.budget)?;
    let obliv = product_exploration(minimal_oblivious(&p).nexts(), cfg.n, cfg.horizon)?;
    Ok(separation_report(report, &cons, &obliv))
}

fn c11b_floss_separation(cfg: &SuiteConfig) -> Result<TheoremReport> {
    let (p, f, params) = floss_instance(cfg)?;
    let report = TheoremReport::new("", params, "enumerated");
    let floss = enumerate_ho_bounded(&f, &p, cfg.budget)?;
    let obliv = product_exploration(minimal_oblivious(&p).nexts(), cfg.n, cfg.horizon)?;
    Ok(separation_report(report, &floss, &obliv))
}

fn d01_family_oblivious(cfg: &SuiteConfig) -> Result<TheoremReport> {
    check_family_domination(&build_crashF(cfg.n, cfg.horizon, 1)?, Family::Oblivious, &cfg.domination())
}

fn d02_family_conservative(cfg: &SuiteConfig) -> Result<TheoremReport> {
    let p = PredicateBuilder::new(cfg.n, cfg.horizon)?.crash1_at(cfg.horizon)?;
    check_family_domination(&p, Family::Conservative, &cfg.domination())
}

/// Domination certificates for the elementary predicates. Partial when some
/// predicate has no certificate.
fn d03_global(cfg: &SuiteConfig) -> Result<TheoremReport> {
    let b = PredicateBuilder::new(cfg.n, cfg.horizon)?.with_cap(cfg.cap);
    let texts = ["total", "crash(1)", "crash1@1", "loss(1)"];
    let mut entries = Vec::new();
    let mut verdict = Verdict::Holds;
    for t in texts {
        let r = check_global_domination_evidence(&b.parse_and_eval(t)?, cfg.budget)?;
        verdict = match (verdict, r.verdict) {
            (Verdict::Fails, _) | (_, Verdict::Fails) => Verdict::Fails,
            (Verdict::Partial, _) | (_, Verdict::Partial) => Verdict::Partial,
            _ => Verdict::Holds,
        };
        entries.push(json!({"expr": t, "verdict": r.verdict, "tier": r.tier, "witness": r.witness}));
    }
    let mut params = cfg.params();
    params["exprs"] = json!(texts);
    let mut report = TheoremReport::new("", params, "certificates").with_witness(json!(entries));
    report.verdict = verdict;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_sorted_and_unique() {
        let ids = theorem_ids();
        let mut sorted = ids.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(ids, sorted);
    }

    #[test]
    fn exit_code_ignores_partial() {
        let mut r = TheoremReport::new("a", json!({}), "t");
        assert_eq!(suite_exit_code(&[r.clone()]), 0);
        r.verdict = Verdict::Partial;
        assert_eq!(suite_exit_code(&[r.clone()]), 0);
        let r = r.fail(json!({"collection": Collection::total(1, 1)}));
        assert_eq!(suite_exit_code(&[r]), 1);
    }

    #[test]
    fn first_difference_finds_either_side() {
        assert_eq!(first_difference(&[1, 2, 3], &[1, 2, 3]), None);
        assert_eq!(first_difference(&[1, 3], &[1, 2, 3]), Some((2, false)));
        assert_eq!(first_difference(&[1, 2, 4], &[1, 2]), Some((4, true)));
    }

    #[test]
    fn corrupted_predicate_fails_with_counterexample() {
        let cfg = SuiteConfig {
            corrupt: Some(0),
            ..SuiteConfig::default()
        };
        let reports = run_selected(&cfg, |id| id.starts_with("c06"));
        assert_eq!(reports.len(), 1);
        assert_eq!(reports[0].verdict, Verdict::Fails);
        assert!(reports[0].witness.as_ref().unwrap()["collection"].is_object());
    }

    #[test]
    fn small_instance_runs() {
        let cfg = SuiteConfig {
            n: 2,
            horizon: 1,
            samples: 20,
            ..SuiteConfig::default()
        };
        let reports = run_selected(&cfg, |id| !id.starts_with("c03"));
        assert_eq!(reports.len(), CHECKS.len() - 1);
        for r in &reports {
            assert!(r.verdict != Verdict::Fails || r.witness.is_some(), "{}", r.to_text());
        }
    }
}
