//! Delivered predicates, round-changing strategies and the heard-of predicates
//! they generate, computed exhaustively at a bounded horizon.

pub mod error;
pub mod process;
pub mod collection;
pub mod state;
pub mod expr;
pub mod predicate;
pub mod strategy;
pub mod execution;
pub mod explore;
pub mod analysis;
pub mod suite;

pub use analysis::{
    check_family_domination, check_global_domination_evidence, conservative_ho_upper_bound,
    generate_ho_oblivious, ho_product, ho_product_capped, in_ho_product, product_codes, upper_bound_basis, DominationConfig, Family,
    Generator, HeardOfPredicate, Operation, TheoremReport, Verdict, HO_CAP,
};
pub use collection::{Collection, DeliveredCollection, HeardOfCollection};
pub use error::{Error, Result};
pub use execution::{
    canonical_execution, shifted_canonical_execution, standard_execution, Event, EventOrder,
    Execution, Violation,
};
pub use explore::{enumerate_ho_bounded, Deadlock, Exploration, DEFAULT_BUDGET};
pub use expr::{parse_expr, PredicateExpr, Preset};
pub use predicate::{
    build_crash1, build_crash1_at, build_crashF, build_lossL, build_total, DeliveredPredicate,
    PredicateBuilder, DEFAULT_CAP,
};
pub use process::{ProcessId, ProcessSet, MAX_PROCESSES};
pub use suite::{run_selected, run_theorem_suite, suite_exit_code, theorem_ids, SuiteConfig};
pub use state::{LocalState, Message};
pub use strategy::{
    conservative_valid_for, f_loss, f_n_minus_F, minimal_conservative, minimal_oblivious,
    oblivious_valid_for, ConservativeStrategy, ObliviousStrategy, Prefix, Strategy, Window,
};
