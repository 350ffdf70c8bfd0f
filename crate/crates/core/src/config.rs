//! JSON problem files.
//!
//! ```json
//! {
//!   "equations": [
//!     { "alpha": 1.5,  "beta": 0.2, "eta": 0.75,   "b": 0.775 },
//!     { "alpha": 1.25, "beta": 0.4, "eta": 0.6667, "b": 0.6833 }
//!   ],
//!   "nonlinearities": { "f1": "1000*max(u,0)^2", "f2": "1000*max(v,0)^2" },
//!   "options": {
//!     "conservative": true,
//!     "margin": 1e-9,
//!     "quadrature": { "panel_order": 16, "abs_tol": 1e-10, "max_panels": 4096, "t_grid": 513 },
//!     "extremum": { "grid": 21, "refine_rounds": 8 },
//!     "lipschitz": { "L1": 2000.0, "L2": 2000.0 },
//!     "nonexistence_boxes": [ { "u": [-10, 10], "v": [-10, 10] }, { "u": [-10, 10], "v": [-10, 10] } ]
//!   }
//! }
//! ```
//!
//! `b` and everything under `options` are optional. Every problem in the file
//! is collected before reporting, each tagged with its JSON pointer.

use std::fmt;
use std::path::Path;

use serde_json::{Map, Value};
use thiserror::Error;

use crate::certify::Box3;
use crate::exprlang::{parse_expr, Expr};
use crate::kernel::{default_b, ProblemParams};
use crate::problem::{Problem, Settings};
use crate::quad::QuadError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IssueKind {
    /// Missing field or wrong JSON type.
    Schema,
    /// Well-formed but mathematically invalid.
    Validation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub kind: IssueKind,
    pub pointer: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            IssueKind::Schema => "schema",
            IssueKind::Validation => "validation",
        };
        write!(f, "{kind} error at {}: {}", self.pointer, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{}", format_issues(.0))]
    Invalid(Vec<ConfigIssue>),
}

impl ConfigError {
    pub fn issues(&self) -> &[ConfigIssue] {
        match self {
            Self::Invalid(issues) => issues,
            _ => &[],
        }
    }
}

fn format_issues(issues: &[ConfigIssue]) -> String {
    let lines: Vec<String> = issues.iter().map(|i| format!("  {i}")).collect();
    format!("{} problem(s) in config:\n{}", issues.len(), lines.join("\n"))
}

#[derive(Debug, Clone)]
pub struct ProblemConfig {
    pub params: [ProblemParams; 2],
    pub sources: [String; 2],
    pub nonlinearities: [Expr; 2],
    pub settings: Settings,
    pub nonexistence_boxes: [Box3; 2],
}

impl ProblemConfig {
    /// Computes kernels and constants.
    pub fn build(&self) -> Result<Problem, QuadError> {
        Problem::new(self.params, self.nonlinearities.clone(), self.settings)
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ProblemConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ProblemConfig, ConfigError> {
    let root: Value = serde_json::from_str(text)?;
    let mut cx = Collector::default();
    let cfg = read_root(&mut cx, &root);
    match cfg {
        Some(cfg) if cx.issues.is_empty() => Ok(cfg),
        _ => Err(ConfigError::Invalid(cx.issues)),
    }
}

#[derive(Default)]
struct Collector {
    issues: Vec<ConfigIssue>,
}

impl Collector {
    fn schema(&mut self, pointer: impl Into<String>, message: impl Into<String>) {
        self.issues.push(ConfigIssue {
            kind: IssueKind::Schema,
            pointer: pointer.into(),
            message: message.into(),
        });
    }

    fn invalid(&mut self, pointer: impl Into<String>, message: impl Into<String>) {
        self.issues.push(ConfigIssue {
            kind: IssueKind::Validation,
            pointer: pointer.into(),
            message: message.into(),
        });
    }

    fn object<'a>(&mut self, v: &'a Value, ptr: &str) -> Option<&'a Map<String, Value>> {
        let o = v.as_object();
        if o.is_none() {
            self.schema(ptr, "expected an object");
        }
        o
    }

    fn number(&mut self, obj: &Map<String, Value>, key: &str, ptr: &str, required: bool) -> Option<f64> {
        let p = format!("{ptr}/{key}");
        match obj.get(key) {
            None if required => {
                self.schema(p, "missing required number");
                None
            }
            None => None,
            Some(v) => {
                let n = v.as_f64();
                if n.is_none() {
                    self.schema(p, "expected a number");
                }
                n
            }
        }
    }

    fn count(&mut self, obj: &Map<String, Value>, key: &str, ptr: &str) -> Option<usize> {
        let v = obj.get(key)?;
        let n = v.as_u64().map(|n| n as usize);
        if n.is_none() {
            self.schema(format!("{ptr}/{key}"), "expected a non-negative integer");
        }
        n
    }

    fn flag(&mut self, obj: &Map<String, Value>, key: &str, ptr: &str) -> Option<bool> {
        let v = obj.get(key)?;
        let b = v.as_bool();
        if b.is_none() {
            self.schema(format!("{ptr}/{key}"), "expected true or false");
        }
        b
    }

    fn range(&mut self, obj: &Map<String, Value>, key: &str, ptr: &str) -> Option<(f64, f64)> {
        let p = format!("{ptr}/{key}");
        let pair = obj.get(key)?.as_array().and_then(|a| match a.as_slice() {
            [lo, hi] => Some((lo.as_f64()?, hi.as_f64()?)),
            _ => None,
        });
        match pair {
            None => {
                self.schema(p, "expected [lo, hi]");
                None
            }
            Some((lo, hi)) if !(lo <= hi) => {
                self.invalid(p, format!("lower end {lo} exceeds upper end {hi}"));
                None
            }
            Some(r) => Some(r),
        }
    }
}

fn read_root(cx: &mut Collector, root: &Value) -> Option<ProblemConfig> {
    let obj = cx.object(root, "")?;
    let params = read_equations(cx, obj.get("equations"));
    let nonlinearities = read_nonlinearities(cx, obj.get("nonlinearities"));
    let (settings, boxes) = match obj.get("options") {
        None => (Some(Settings::default()), Some(default_boxes())),
        Some(v) => read_options(cx, v),
    };
    let (sources, nonlinearities) = nonlinearities?;
    Some(ProblemConfig {
        params: params?,
        sources,
        nonlinearities,
        settings: settings?,
        nonexistence_boxes: boxes?,
    })
}

fn read_equations(cx: &mut Collector, v: Option<&Value>) -> Option<[ProblemParams; 2]> {
    let Some(v) = v else {
        cx.schema("/equations", "missing required array of two equations");
        return None;
    };
    let Some(items) = v.as_array() else {
        cx.schema("/equations", "expected an array");
        return None;
    };
    if items.len() != 2 {
        cx.schema(
            "/equations",
            format!("expected exactly 2 equations, found {}", items.len()),
        );
        return None;
    }
    let mut out = Vec::new();
    for (i, item) in items.iter().enumerate() {
        let ptr = format!("/equations/{i}");
        let Some(o) = cx.object(item, &ptr) else { continue };
        let alpha = cx.number(o, "alpha", &ptr, true);
        let beta = cx.number(o, "beta", &ptr, true);
        let eta = cx.number(o, "eta", &ptr, true);
        let b = cx.number(o, "b", &ptr, false);
        let (Some(alpha), Some(beta), Some(eta)) = (alpha, beta, eta) else {
            continue;
        };
        let b = b.unwrap_or_else(|| default_b(alpha, beta, eta));
        match ProblemParams::new(alpha, beta, eta, b) {
            Ok(p) => out.push(p),
            Err(e) => cx.invalid(ptr, e.to_string()),
        }
    }
    out.try_into().ok()
}

fn read_nonlinearities(cx: &mut Collector, v: Option<&Value>) -> Option<([String; 2], [Expr; 2])> {
    let Some(v) = v else {
        cx.schema("/nonlinearities", "missing required object with f1 and f2");
        return None;
    };
    let o = cx.object(v, "/nonlinearities")?;
    let mut texts = Vec::new();
    let mut exprs = Vec::new();
    for key in ["f1", "f2"] {
        let ptr = format!("/nonlinearities/{key}");
        match o.get(key) {
            None => cx.schema(ptr, "missing required expression"),
            Some(Value::String(s)) => match parse_expr(s) {
                Ok(e) => {
                    texts.push(s.clone());
                    exprs.push(e);
                }
                Err(e) => cx.invalid(ptr, e.to_string()),
            },
            Some(_) => cx.schema(ptr, "expected a string"),
        }
    }
    Some((texts.try_into().ok()?, exprs.try_into().ok()?))
}

fn default_boxes() -> [Box3; 2] {
    let b = Box3 {
        t: (0.0, 1.0),
        u: (-10.0, 10.0),
        v: (-10.0, 10.0),
    };
    [b, b]
}

fn read_options(cx: &mut Collector, v: &Value) -> (Option<Settings>, Option<[Box3; 2]>) {
    let Some(o) = cx.object(v, "/options") else {
        return (None, None);
    };
    let before = cx.issues.len();
    let mut s = Settings::default();
    if let Some(b) = cx.flag(o, "conservative", "/options") {
        s.conservative = b;
    }
    if let Some(m) = cx.number(o, "margin", "/options", false) {
        if m >= 0.0 && m.is_finite() {
            s.margin = m;
        } else {
            cx.invalid("/options/margin", "must be a finite non-negative number");
        }
    }
    if let Some(q) = o.get("quadrature") {
        if let Some(q) = cx.object(q, "/options/quadrature") {
            let ptr = "/options/quadrature";
            if let Some(n) = cx.count(q, "panel_order", ptr) {
                s.quad.panel_order = n;
            }
            if let Some(x) = cx.number(q, "abs_tol", ptr, false) {
                s.quad.abs_tol = x;
            }
            if let Some(n) = cx.count(q, "max_panels", ptr) {
                s.quad.max_panels = n;
            }
            if let Some(n) = cx.count(q, "t_grid", ptr) {
                s.quad.t_grid = n;
            }
            if let Err(e) = s.quad.validate() {
                cx.invalid(ptr, e.to_string());
            }
        }
    }
    if let Some(x) = o.get("extremum") {
        if let Some(x) = cx.object(x, "/options/extremum") {
            let ptr = "/options/extremum";
            if let Some(n) = cx.count(x, "grid", ptr) {
                if n >= 3 {
                    s.grid = n;
                } else {
                    cx.invalid(format!("{ptr}/grid"), "need at least 3 samples per axis");
                }
            }
            if let Some(n) = cx.count(x, "refine_rounds", ptr) {
                s.refine_rounds = n;
            }
        }
    }
    if let Some(l) = o.get("lipschitz") {
        if let Some(l) = cx.object(l, "/options/lipschitz") {
            let a = cx.number(l, "L1", "/options/lipschitz", true);
            let b = cx.number(l, "L2", "/options/lipschitz", true);
            if let (Some(a), Some(b)) = (a, b) {
                if a >= 0.0 && b >= 0.0 {
                    s.lipschitz = Some([a, b]);
                } else {
                    cx.invalid("/options/lipschitz", "Lipschitz constants must be non-negative");
                }
            }
        }
    }
    let mut boxes = Some(default_boxes());
    if let Some(bx) = o.get("nonexistence_boxes") {
        boxes = None;
        match bx.as_array() {
            Some(items) if items.len() == 2 => {
                let mut out = Vec::new();
                for (i, item) in items.iter().enumerate() {
                    let ptr = format!("/options/nonexistence_boxes/{i}");
                    let Some(o) = cx.object(item, &ptr) else { continue };
                    let u = cx.range(o, "u", &ptr);
                    let v = cx.range(o, "v", &ptr);
                    if let (Some(u), Some(v)) = (u, v) {
                        out.push(Box3 { t: (0.0, 1.0), u, v });
                    } else if !o.contains_key("u") || !o.contains_key("v") {
                        cx.schema(ptr, "expected both \"u\" and \"v\" ranges");
                    }
                }
                boxes = out.try_into().ok();
            }
            _ => cx.schema("/options/nonexistence_boxes", "expected an array of two boxes"),
        }
    }
    if cx.issues.len() > before {
        return (None, None);
    }
    (Some(s), boxes)
}
