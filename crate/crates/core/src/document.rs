//! The JSON problem document shared by the CLI and the HTTP service.
//!
//! ```json
//! {"agents": ["ann", "bob"],
//!  "items": [{"name": "dishes", "quantity": 1}, {"name": "cake", "quantity": "1/2"}],
//!  "utilities": [[-1, 3], [-2, 1]],
//!  "mode": "exact", "rule": "competitive", "weights": [1, 2],
//!  "limits": {"max_supports": 100000}}
//! ```
//!
//! Numbers are JSON numbers or strings (`"p/q"` or decimals) and are read
//! exactly; float mode converts afterwards. Errors carry a JSON pointer.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::enumerate::Limits;
use crate::error::{Error, Result};
use crate::model::Problem;
use crate::rules::Rule;
use crate::scalar::{parse_rational, Rational, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Float,
    Exact,
}

/// Optional overrides of the enumeration limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct DocumentLimits {
    pub max_supports: Option<u64>,
    pub max_size: Option<usize>,
}

impl DocumentLimits {
    pub fn apply(&self, limits: &mut Limits) {
        if let Some(s) = self.max_supports {
            limits.max_supports = s;
        }
        if let Some(s) = self.max_size {
            limits.max_size = s;
        }
    }
}

/// Optional run settings carried by a request.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct DocumentOptions {
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub axiom_trials: Option<usize>,
    pub oracle_grid: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemDocument {
    /// The problem as written, exactly.
    pub problem: Problem<Rational>,
    pub mode: Mode,
    pub rule: Option<Rule>,
    pub weights: Option<Vec<f64>>,
    pub limits: DocumentLimits,
    pub options: DocumentOptions,
    /// An allocation to audit instead of the rule's selection.
    pub allocation: Option<Vec<Vec<Rational>>>,
}

impl ProblemDocument {
    pub fn float_problem(&self) -> Problem {
        self.problem.to_f64()
    }
}

fn schema(pointer: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema { pointer: pointer.into(), message: message.into() }
}

fn number(value: &Value, pointer: &str) -> Result<Rational> {
    let text = match value {
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        _ => return Err(schema(pointer, "expected a number or a \"p/q\" string")),
    };
    parse_rational(&text).map_err(|e| schema(pointer, e.to_string()))
}

fn array<'a>(value: &'a Value, pointer: &str) -> Result<&'a Vec<Value>> {
    value.as_array().ok_or_else(|| schema(pointer, "expected an array"))
}

fn name(value: &Value, pointer: &str) -> Result<String> {
    value.as_str().map(str::to_owned).ok_or_else(|| schema(pointer, "expected a string"))
}

fn unique(names: &[String], pointer: &str) -> Result<()> {
    for (k, n) in names.iter().enumerate() {
        if names[..k].contains(n) {
            return Err(schema(format!("{pointer}/{k}"), format!("duplicate name {n:?}")));
        }
    }
    Ok(())
}

pub fn parse_document(bytes: &[u8]) -> Result<ProblemDocument> {
    let root: Value = serde_json::from_slice(bytes).map_err(|e| schema("", format!("invalid JSON: {e}")))?;
    document_from_value(&root)
}

pub fn document_from_value(root: &Value) -> Result<ProblemDocument> {
    let obj = root.as_object().ok_or_else(|| schema("", "expected an object"))?;
    let field = |key: &str| obj.get(key).ok_or_else(|| schema(format!("/{key}"), "missing field"));

    let agents: Vec<String> = array(field("agents")?, "/agents")?
        .iter()
        .enumerate()
        .map(|(i, v)| name(v, &format!("/agents/{i}")))
        .collect::<Result<_>>()?;
    if agents.is_empty() {
        return Err(schema("/agents", "at least one agent is required"));
    }
    unique(&agents, "/agents")?;

    let mut items = Vec::new();
    let mut endowment = Vec::new();
    for (a, item) in array(field("items")?, "/items")?.iter().enumerate() {
        let at = format!("/items/{a}");
        let item = item.as_object().ok_or_else(|| schema(&at, "expected {\"name\", \"quantity\"}"))?;
        let n = item.get("name").ok_or_else(|| schema(format!("{at}/name"), "missing field"))?;
        items.push(name(n, &format!("{at}/name"))?);
        let q = item.get("quantity").ok_or_else(|| schema(format!("{at}/quantity"), "missing field"))?;
        let q = number(q, &format!("{at}/quantity"))?;
        if !q.gt0() {
            return Err(schema(format!("{at}/quantity"), "quantity must be positive"));
        }
        endowment.push(q);
    }
    if items.is_empty() {
        return Err(schema("/items", "at least one item is required"));
    }
    let item_names: Vec<String> = items.clone();
    unique(&item_names, "/items")?;

    let rows = array(field("utilities")?, "/utilities")?;
    if rows.len() != agents.len() {
        return Err(schema("/utilities", format!("{} rows for {} agents", rows.len(), agents.len())));
    }
    let mut utilities = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let at = format!("/utilities/{i}");
        let row = array(row, &at)?;
        if row.len() != items.len() {
            return Err(schema(&at, format!("{} entries for {} items", row.len(), items.len())));
        }
        utilities
            .push(row.iter().enumerate().map(|(a, v)| number(v, &format!("{at}/{a}"))).collect::<Result<Vec<_>>>()?);
    }

    let mode = match obj.get("mode") {
        None | Some(Value::Null) => Mode::Float,
        Some(v) => serde_json::from_value(v.clone()).map_err(|_| schema("/mode", "expected \"float\" or \"exact\""))?,
    };
    let rule = match obj.get("rule") {
        None | Some(Value::Null) => None,
        Some(v) => Some(name(v, "/rule")?.parse().map_err(|e: Error| schema("/rule", e.to_string()))?),
    };
    let weights = match obj.get("weights") {
        None | Some(Value::Null) => None,
        Some(v) => {
            let w = array(v, "/weights")?;
            if w.len() != agents.len() {
                return Err(schema("/weights", format!("{} weights for {} agents", w.len(), agents.len())));
            }
            let w: Vec<f64> = w
                .iter()
                .enumerate()
                .map(|(i, v)| number(v, &format!("/weights/{i}")).map(|r| r.to_f64()))
                .collect::<Result<_>>()?;
            if let Some(i) = w.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(schema(format!("/weights/{i}"), "weights must be positive"));
            }
            Some(w)
        }
    };
    let limits = match obj.get("limits") {
        None | Some(Value::Null) => DocumentLimits::default(),
        Some(v) => {
            let l = v.as_object().ok_or_else(|| schema("/limits", "expected an object"))?;
            let count = |key: &str| -> Result<Option<u64>> {
                match l.get(key) {
                    None | Some(Value::Null) => Ok(None),
                    Some(v) => v
                        .as_u64()
                        .map(Some)
                        .ok_or_else(|| schema(format!("/limits/{key}"), "expected a nonnegative integer")),
                }
            };
            DocumentLimits { max_supports: count("max_supports")?, max_size: count("max_size")?.map(|s| s as usize) }
        }
    };

    let options = match obj.get("options") {
        None | Some(Value::Null) => DocumentOptions::default(),
        Some(v) => {
            let o = v.as_object().ok_or_else(|| schema("/options", "expected an object"))?;
            let count = |key: &str| -> Result<Option<u64>> {
                match o.get(key) {
                    None | Some(Value::Null) => Ok(None),
                    Some(v) => v
                        .as_u64()
                        .map(Some)
                        .ok_or_else(|| schema(format!("/options/{key}"), "expected a nonnegative integer")),
                }
            };
            let tol = match o.get("tol") {
                None | Some(Value::Null) => None,
                Some(v) => {
                    let t = number(v, "/options/tol")?.to_f64();
                    if !(t.is_finite() && t >= 0.0) {
                        return Err(schema("/options/tol", "tolerance must be nonnegative"));
                    }
                    Some(t)
                }
            };
            DocumentOptions {
                tol,
                seed: count("seed")?,
                axiom_trials: count("axiom_trials")?.map(|t| t as usize),
                oracle_grid: count("oracle_grid")?.map(|g| g as usize),
            }
        }
    };
    let allocation = match obj.get("allocation") {
        None | Some(Value::Null) => None,
        Some(v) => {
            let rows = array(v, "/allocation")?;
            if rows.len() != agents.len() {
                return Err(schema("/allocation", format!("{} rows for {} agents", rows.len(), agents.len())));
            }
            let mut shares = Vec::with_capacity(rows.len());
            for (i, row) in rows.iter().enumerate() {
                let at = format!("/allocation/{i}");
                let row = array(row, &at)?;
                if row.len() != items.len() {
                    return Err(schema(&at, format!("{} entries for {} items", row.len(), items.len())));
                }
                shares.push(
                    row.iter().enumerate().map(|(a, v)| number(v, &format!("{at}/{a}"))).collect::<Result<Vec<_>>>()?,
                );
            }
            Some(shares)
        }
    };

    let problem = Problem::new(agents, items, endowment, utilities).map_err(|e| schema("", e.to_string()))?;
    Ok(ProblemDocument { problem, mode, rule, weights, limits, options, allocation })
}

/// Float problem straight from document bytes.
pub fn parse_problem(bytes: &[u8]) -> Result<Problem> {
    Ok(parse_document(bytes)?.float_problem())
}

/// The document for a problem: numbers for floats, `"p/q"` strings for rationals.
pub fn problem_to_json<S: Scalar>(problem: &Problem<S>) -> Value {
    let items: Vec<Value> = problem
        .items()
        .iter()
        .zip(problem.endowment())
        .map(|(n, q)| json!({"name": n, "quantity": q.to_json()}))
        .collect();
    let utilities: Vec<Value> =
        problem.utilities().iter().map(|r| Value::Array(r.iter().map(Scalar::to_json).collect())).collect();
    let mut obj = Map::new();
    obj.insert("agents".into(), json!(problem.agents()));
    obj.insert("items".into(), Value::Array(items));
    obj.insert("utilities".into(), Value::Array(utilities));
    if S::EXACT {
        obj.insert("mode".into(), json!("exact"));
    }
    Value::Object(obj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    const TWO_BY_THREE: &str = r#"{"agents": ["1", "2"],
        "items": [{"name": "a", "quantity": 1}, {"name": "b", "quantity": 1}, {"name": "c", "quantity": "1/2"}],
        "utilities": [[-1, -3, "-1/3"], [-2, -1, 0.25]]}"#;

    fn pointer(err: Error) -> String {
        match err {
            Error::Schema { pointer, .. } => pointer,
            other => panic!("not a schema error: {other}"),
        }
    }

    #[test]
    fn well_formed() {
        let d = parse_document(TWO_BY_THREE.as_bytes()).unwrap();
        assert_eq!((d.problem.n(), d.problem.m()), (2, 3));
        assert_eq!(d.problem.w(2), &rat(1, 2));
        assert_eq!(d.problem.u(0, 2), &rat(-1, 3));
        assert_eq!(d.problem.u(1, 2), &rat(1, 4));
        assert_eq!(d.mode, Mode::Float);
    }

    #[test]
    fn zero_quantity_is_rejected() {
        let doc = r#"{"agents": ["x"], "items": [{"name": "a", "quantity": 0}], "utilities": [[1]]}"#;
        assert_eq!(pointer(parse_document(doc.as_bytes()).unwrap_err()), "/items/0/quantity");
    }

    #[test]
    fn ragged_matrix_is_rejected() {
        let doc = r#"{"agents": ["x", "y"], "items": [{"name": "a", "quantity": 1}, {"name": "b", "quantity": 1}],
            "utilities": [[1, 2], [3]]}"#;
        assert_eq!(pointer(parse_document(doc.as_bytes()).unwrap_err()), "/utilities/1");
    }

    #[test]
    fn bad_entries_point_at_themselves() {
        let doc = r#"{"agents": ["x"], "items": [{"name": "a", "quantity": 1}], "utilities": [["x/y"]]}"#;
        assert_eq!(pointer(parse_document(doc.as_bytes()).unwrap_err()), "/utilities/0/0");
        let doc = r#"{"agents": ["x", "x"], "items": [{"name": "a", "quantity": 1}], "utilities": [[1], [1]]}"#;
        assert_eq!(pointer(parse_document(doc.as_bytes()).unwrap_err()), "/agents/1");
        assert_eq!(pointer(parse_document(b"[1]").unwrap_err()), "");
        assert_eq!(pointer(parse_document(b"{").unwrap_err()), "");
        let doc = r#"{"agents": ["x"], "items": [{"name": "a", "quantity": 1}]}"#;
        assert_eq!(pointer(parse_document(doc.as_bytes()).unwrap_err()), "/utilities");
    }

    #[test]
    fn options_are_read() {
        let doc = r#"{"agents": ["x", "y"], "items": [{"name": "a", "quantity": 1}], "utilities": [[1], [2]],
            "mode": "exact", "rule": "equal-split", "weights": [1, "3/2"], "limits": {"max_supports": 10}}"#;
        let d = parse_document(doc.as_bytes()).unwrap();
        assert_eq!((d.mode, d.rule), (Mode::Exact, Some(Rule::EqualSplit)));
        assert_eq!(d.weights, Some(vec![1.0, 1.5]));
        assert_eq!(d.limits.max_supports, Some(10));
        let with_options = doc.replace(
            "\"mode\"",
            "\"options\": {\"tol\": 1e-6, \"seed\": 3}, \"allocation\": [[\"1/2\"], [0.5]], \"mode\"",
        );
        let d = parse_document(with_options.as_bytes()).unwrap();
        assert_eq!((d.options.tol, d.options.seed), (Some(1e-6), Some(3)));
        assert_eq!(d.allocation, Some(vec![vec![rat(1, 2)], vec![rat(1, 2)]]));
        let bad = doc.replace("\"3/2\"", "-1");
        assert_eq!(pointer(parse_document(bad.as_bytes()).unwrap_err()), "/weights/1");
    }

    #[test]
    fn exact_round_trip() {
        let d = parse_document(TWO_BY_THREE.as_bytes()).unwrap();
        let text = serde_json::to_vec(&problem_to_json(&d.problem)).unwrap();
        let again = parse_document(&text).unwrap();
        assert_eq!(again.problem, d.problem);
        assert_eq!(again.mode, Mode::Exact);
    }

    #[test]
    fn long_decimals_are_exact() {
        let doc =
            r#"{"agents": ["x"], "items": [{"name": "a", "quantity": 0.1}], "utilities": [[0.30000000000000000001]]}"#;
        let d = parse_document(doc.as_bytes()).unwrap();
        assert_eq!(d.problem.w(0), &rat(1, 10));
        assert_ne!(d.problem.u(0, 0), &rat(3, 10));
    }
}
