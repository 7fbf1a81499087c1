//! Competitive division of mixed manna: goods, bads and neutral items shared
//! among agents with additive utilities.

// Index loops mirror the matrix notation in the solvers.
#![allow(clippy::needless_range_loop)]

pub mod audit;
pub mod axioms;
pub mod cancel;
pub mod classify;
pub mod demos;
pub mod document;
pub mod enumerate;
pub mod error;
pub mod forest;
pub mod kkt;
pub mod lp;
pub mod model;
pub mod null;
pub mod positive;
mod program;
pub mod random;
pub mod report;
pub mod rules;
pub mod scalar;
pub mod topology;

pub use audit::{audit_allocation, EnvyWitness, FairnessReport, WeakCore};
pub use axioms::{
    canonical_rm_pair, check_rule_axioms, rm_demo, rm_goods_spot_check, AxiomOutcome, AxiomReport, RmReport,
};
pub use cancel::CancelToken;
pub use classify::{classify, Classification, Kind};
pub use demos::{demo_names, run_demo, Check, DemoReport, DEMOS};
pub use document::{parse_document, parse_problem, problem_to_json, DocumentOptions, Mode, ProblemDocument};
pub use enumerate::{
    enumerate, enumerate_general, enumerate_two_agents, enumerate_two_items, generate_lower_bound_instance,
    select_division, select_index, EnumerationResult, InstanceKind, Limits,
};
pub use error::{Error, Result};
pub use model::{
    check_feasible, partition_agents, partition_items, utility_profile, AgentPartition, Allocation, Budget, Division,
    ItemClass, ItemPartition, Problem, UtilityProfile,
};
pub use null::{solve_null, NullSolution};
pub use positive::{solve_positive, solve_positive_with, PositiveOptions, PositiveSolution, Start, Weights};
pub use report::{
    audit_report, classify_report, components_report, enumerate_report, solve_report, AuditReport, ClassifyReport,
    ComponentsReport, DivisionView, KktSummary, Settings, SolveReport,
};
pub use rules::{apply_rule, competitive_rule, egalitarian_rule, equal_split_rule, Rule, RuleOutput};
pub use scalar::{Rational, Scalar};
pub use topology::{brute_force_components, clone_bads, ef_components_two_bads, ComponentReport};
