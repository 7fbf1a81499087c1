//! Reports behind the command line's `--json` output and the HTTP service.
//! Both front ends serialize these structs unchanged.

use serde::Serialize;
use serde_json::Value;

use crate::audit::{audit_allocation, FairnessReport};
use crate::axioms::{check_rule_axioms, AxiomReport};
use crate::classify::{classify, Kind};
use crate::document::{Mode, ProblemDocument};
use crate::enumerate::{enumerate, select_index, Limits};
use crate::error::{Error, Result};
use crate::kkt::{kkt_verify, kkt_verify_null, kkt_verify_weighted, KktReport, KKT_TOL};
use crate::model::{partition_agents, partition_items, Allocation, Division, Problem, UtilityProfile};
use crate::null::solve_null;
use crate::positive::{solve_positive_with, PositiveOptions, Weights};
use crate::rules::{apply_rule, Rule};
use crate::scalar::{Rational, Scalar};
use crate::topology::{brute_force_components, ef_components_two_bads, ComponentReport};

/// Random perturbations per axiom in an audit.
pub const DEFAULT_AXIOM_TRIALS: usize = 4;

#[derive(Debug, Clone)]
pub struct Settings {
    pub rule: Rule,
    pub mode: Mode,
    pub tol: f64,
    pub limits: Limits,
    pub seed: u64,
    pub axiom_trials: usize,
    pub oracle_grid: Option<usize>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            rule: Rule::Competitive,
            mode: Mode::Float,
            tol: KKT_TOL,
            limits: Limits::default(),
            seed: 0,
            axiom_trials: DEFAULT_AXIOM_TRIALS,
            oracle_grid: None,
        }
    }
}

impl Settings {
    /// Defaults overridden by whatever the document carries.
    pub fn for_document(doc: &ProblemDocument) -> Self {
        let mut s = Self::default();
        s.rule = doc.rule.unwrap_or(s.rule);
        s.mode = doc.mode;
        doc.limits.apply(&mut s.limits);
        s.tol = doc.options.tol.unwrap_or(s.tol);
        s.seed = doc.options.seed.unwrap_or(s.seed);
        s.axiom_trials = doc.options.axiom_trials.unwrap_or(s.axiom_trials);
        s.oracle_grid = doc.options.oracle_grid.or(s.oracle_grid);
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifyReport {
    pub kind: Kind,
    /// Optimum of the normalized max-min utility program.
    pub margin: f64,
    pub attracted: Vec<usize>,
    pub repulsed: Vec<usize>,
    pub goods: Vec<usize>,
    pub bads: Vec<usize>,
    pub neutral: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct KktSummary {
    pub passed: bool,
    pub max_residual: f64,
    pub budget_residuals: Vec<f64>,
}

impl From<KktReport> for KktSummary {
    fn from(r: KktReport) -> Self {
        Self { passed: r.passed, max_residual: r.max_residual, budget_residuals: r.budget_residuals }
    }
}

/// Numbers are JSON numbers in float mode and `"p/q"` strings in exact mode.
#[derive(Debug, Clone, Serialize)]
pub struct DivisionView {
    pub profile: Value,
    pub allocation: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub price: Option<Value>,
    /// Common budget: -1, 0 or 1.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kkt: Option<KktSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub kind: Kind,
    pub rule: Rule,
    /// Arithmetic actually used.
    pub mode: Mode,
    /// False when a negative-problem search stopped at a limit.
    pub exhaustive: bool,
    pub selected: usize,
    pub profiles: Vec<Value>,
    pub divisions: Vec<DivisionView>,
    /// Audit of the selected allocation.
    pub fairness: FairnessReport,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl SolveReport {
    pub fn selected_division(&self) -> &DivisionView {
        &self.divisions[self.selected]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub kind: Kind,
    pub rule: Rule,
    /// `"supplied"` when the document carried the allocation, else `"selected"`.
    pub source: &'static str,
    pub profile: Vec<f64>,
    pub fairness: FairnessReport,
    pub axioms: AxiomReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComponentsReport {
    #[serde(flatten)]
    pub report: ComponentReport,
    /// Count from the grid oracle, when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_grid: Option<usize>,
}

fn values<S: Scalar>(v: &[S]) -> Value {
    Value::Array(v.iter().map(Scalar::to_json).collect())
}

fn rows<S: Scalar>(r: &[Vec<S>]) -> Value {
    Value::Array(r.iter().map(|row| values(row)).collect())
}

fn view<S: Scalar>(profile: &UtilityProfile<S>, division: &Division<S>, kkt: KktReport) -> DivisionView {
    DivisionView {
        profile: values(&profile.values),
        allocation: rows(&division.allocation.shares),
        price: Some(values(&division.price)),
        budget: Some(division.budget.value()),
        lambda: None,
        kkt: Some(kkt.into()),
    }
}

pub fn classify_report(doc: &ProblemDocument) -> Result<ClassifyReport> {
    let p = doc.float_problem();
    let c = classify(&p)?;
    let agents = partition_agents(&p);
    let items = partition_items(&p);
    Ok(ClassifyReport {
        kind: c.kind,
        margin: c.margin,
        attracted: agents.n_plus,
        repulsed: agents.n_minus,
        goods: items.a_plus,
        bads: items.a_minus,
        neutral: items.a_zero,
    })
}

pub fn solve_report(doc: &ProblemDocument, settings: &Settings) -> Result<SolveReport> {
    let p = doc.float_problem();
    let kind = classify(&p)?.kind;
    let mut notes = Vec::new();
    if doc.weights.is_some() && !(kind == Kind::Positive && settings.rule == Rule::Competitive) {
        return Err(Error::Unsupported("income weights apply to the competitive rule on positive problems".into()));
    }
    let exact = settings.mode == Mode::Exact;
    if exact && !(kind == Kind::Negative && settings.rule == Rule::Competitive) {
        notes.push("exact arithmetic covers competitive negative problems; solved in floating point".into());
    }
    let mut report = match (settings.rule, kind) {
        (Rule::Competitive, Kind::Negative) if exact => negative_report(&doc.problem, &p, settings)?,
        (Rule::Competitive, Kind::Negative) => negative_report(&p, &p, settings)?,
        (Rule::Competitive, Kind::Positive) => positive_report(doc, &p, settings)?,
        (Rule::Competitive, Kind::Null) => {
            let s = solve_null(&p)?;
            let profile = crate::model::utility_profile(&p, &s.division.allocation)?;
            let mut v = view(&profile, &s.division, kkt_verify_null(&p, &s.division, &s.lambda, settings.tol));
            v.lambda = Some(s.lambda);
            single(kind, Rule::Competitive, &p, &s.division.allocation, v)?
        }
        (rule, _) => {
            let out = apply_rule(rule, &p, &settings.limits)?;
            let allocation = out.selected_allocation();
            let v = DivisionView {
                profile: values(&out.selected_profile().values),
                allocation: rows(&allocation.shares),
                price: None,
                budget: None,
                lambda: None,
                kkt: None,
            };
            single(kind, rule, &p, allocation, v)?
        }
    };
    report.notes.extend(notes);
    Ok(report)
}

/// Like [`solve_report`] but only for negative problems, where the rule is set-valued.
pub fn enumerate_report(doc: &ProblemDocument, settings: &Settings) -> Result<SolveReport> {
    let kind = classify(&doc.problem)?.kind;
    if kind != Kind::Negative {
        return Err(Error::ClassificationMismatch { expected: "negative".into(), found: kind });
    }
    let settings = Settings { rule: Rule::Competitive, ..settings.clone() };
    solve_report(doc, &settings)
}

fn single(kind: Kind, rule: Rule, p: &Problem, allocation: &Allocation, v: DivisionView) -> Result<SolveReport> {
    Ok(SolveReport {
        kind,
        rule,
        mode: Mode::Float,
        exhaustive: true,
        selected: 0,
        profiles: vec![v.profile.clone()],
        divisions: vec![v],
        fairness: audit_allocation(p, allocation)?,
        notes: Vec::new(),
    })
}

fn positive_report(doc: &ProblemDocument, p: &Problem, settings: &Settings) -> Result<SolveReport> {
    let weights = doc.weights.clone().map(Weights::new).transpose()?;
    let options = PositiveOptions {
        weights: weights.clone(),
        cancel: settings.limits.cancel.clone(),
        ..PositiveOptions::default()
    };
    let solution = solve_positive_with(p, &options)?;
    let division = solution.division;
    let profile = crate::model::utility_profile(p, &division.allocation)?;
    let kkt = match &weights {
        Some(w) => kkt_verify_weighted(p, &division, w.as_slice(), settings.tol),
        None => kkt_verify(p, &division, settings.tol),
    };
    single(Kind::Positive, Rule::Competitive, p, &division.allocation, view(&profile, &division, kkt))
}

fn negative_report<S: Scalar>(problem: &Problem<S>, float: &Problem, settings: &Settings) -> Result<SolveReport> {
    let result = enumerate(problem, &settings.limits)?;
    let selected = select_index(&result.profiles).ok_or_else(|| result.nothing_found())?;
    // Exact divisions are certified exactly.
    let tol = if S::EXACT { 0.0 } else { settings.tol };
    let divisions: Vec<DivisionView> =
        result.divisions.iter().zip(&result.profiles).map(|(d, u)| view(u, d, kkt_verify(problem, d, tol))).collect();
    let fairness = audit_allocation(float, &result.divisions[selected].allocation.to_f64())?;
    Ok(SolveReport {
        kind: Kind::Negative,
        rule: Rule::Competitive,
        mode: if S::EXACT { Mode::Exact } else { Mode::Float },
        exhaustive: result.exhaustive,
        selected,
        profiles: divisions.iter().map(|d| d.profile.clone()).collect(),
        divisions,
        fairness,
        notes: Vec::new(),
    })
}

pub fn audit_report(doc: &ProblemDocument, settings: &Settings) -> Result<AuditReport> {
    let p = doc.float_problem();
    let kind = classify(&p)?.kind;
    let (source, allocation) = match &doc.allocation {
        Some(shares) => {
            let z: Vec<Vec<f64>> = shares.iter().map(|r| r.iter().map(Rational::to_f64).collect()).collect();
            ("supplied", Allocation::new(z))
        }
        None => ("selected", apply_rule(settings.rule, &p, &settings.limits)?.selected_allocation().clone()),
    };
    let fairness = audit_allocation(&p, &allocation)?;
    let profile = crate::model::utility_profile(&p, &allocation)?.values;
    let axioms = check_rule_axioms(settings.rule, std::slice::from_ref(&p), settings.axiom_trials, settings.seed)?;
    Ok(AuditReport { kind, rule: settings.rule, source, profile, fairness, axioms })
}

pub fn components_report(doc: &ProblemDocument, settings: &Settings) -> Result<ComponentsReport> {
    let p = doc.float_problem();
    let report = ef_components_two_bads(&p)?;
    let oracle = settings.oracle_grid.map(|g| brute_force_components(&p, g)).transpose()?;
    Ok(ComponentsReport { report, oracle, oracle_grid: settings.oracle_grid })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::parse_document;

    fn doc(utilities: &str, extra: &str) -> ProblemDocument {
        let text = format!(
            r#"{{"agents": ["1", "2"], "items": [{{"name": "a", "quantity": 1}}, {{"name": "b", "quantity": 1}}, {{"name": "c", "quantity": 1}}],
                "utilities": {utilities}{extra}}}"#
        );
        parse_document(text.as_bytes()).unwrap()
    }

    #[test]
    fn negative_solve_lists_every_profile() {
        let d = doc("[[-1, -3, -1], [-2, -1, -1]]", "");
        let r = solve_report(&d, &Settings::for_document(&d)).unwrap();
        assert_eq!((r.kind, r.profiles.len(), r.exhaustive), (Kind::Negative, 4, true));
        assert_eq!(r.profiles[r.selected], serde_json::json!([-1.5, -1.5]));
        assert!(r.divisions.iter().all(|v| v.kkt.as_ref().unwrap().passed));
    }

    #[test]
    fn exact_mode_prints_rationals() {
        let d = doc("[[-1, -3, -1], [-2, -1, -1]]", r#", "mode": "exact""#);
        let r = solve_report(&d, &Settings::for_document(&d)).unwrap();
        assert_eq!(r.mode, Mode::Exact);
        assert!(r.profiles.contains(&serde_json::json!(["-5/2", "-5/6"])));
    }

    #[test]
    fn null_and_positive_problems() {
        let d = doc("[[-1, -3, 2], [-2, -1, 2]]", "");
        let r = solve_report(&d, &Settings::default()).unwrap();
        assert_eq!(r.kind, Kind::Null);
        assert!(r.divisions[0].lambda.is_some() && r.divisions[0].kkt.as_ref().unwrap().passed);
        let d = doc("[[-1, -3, 4], [-2, -1, 4]]", r#", "weights": [1, 2]"#);
        let r = solve_report(&d, &Settings::default()).unwrap();
        assert_eq!(r.kind, Kind::Positive);
        assert!(r.divisions[0].kkt.as_ref().unwrap().passed);
    }

    #[test]
    fn enumerate_needs_a_negative_problem() {
        let d = doc("[[-1, -3, 4], [-2, -1, 4]]", "");
        assert!(matches!(enumerate_report(&d, &Settings::default()), Err(Error::ClassificationMismatch { .. })));
    }

    #[test]
    fn other_rules_have_no_prices() {
        let d = doc("[[-1, -3, -1], [-2, -1, -1]]", r#", "rule": "egalitarian""#);
        let r = solve_report(&d, &Settings::for_document(&d)).unwrap();
        assert_eq!(r.rule, Rule::Egalitarian);
        assert!(r.divisions[0].price.is_none());
    }

    #[test]
    fn audit_of_a_supplied_allocation() {
        let d = doc("[[-1, -3, -1], [-2, -1, -1]]", r#", "allocation": [[1, 0, 0], [0, 1, 1]]"#);
        let r = audit_report(&d, &Settings::default()).unwrap();
        assert_eq!(r.source, "supplied");
        assert_eq!(r.profile, vec![-1.0, -2.0]);
        assert!(r.fairness.envy_free);
    }
}
