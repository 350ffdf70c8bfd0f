//! Files written and read by the command line front end.
//!
//! Every float goes out with 17 significant digits so that reading a report
//! back gives the same bits. Files are written to a temporary sibling first
//! and renamed into place.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use thiserror::Error;

use crate::certify::{Certificate, ConditionResult, Pattern};
use crate::kernel::{KernelModel, ProblemParams};
use crate::problem::Problem;
use crate::quad::ConstantsReport;
use crate::solver::{ConeReport, GridSolution, PicardOptions};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("initial state {path}: {message}")]
    Init { path: PathBuf, message: String },
}

/// `{:.16e}`: 17 significant digits, always valid JSON. Non-finite values
/// become `null`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

/// Pretty printer that writes floats with [`fmt_f64`].
struct Sig17<'a>(PrettyFormatter<'a>);

impl Formatter for Sig17<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Pretty JSON with 17-digit floats and a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String, ReportError> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ReportError> {
    let err = |source| ReportError::Write {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(err)?;
    tmp.write_all(bytes).map_err(err)?;
    tmp.as_file().sync_all().map_err(err)?;
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ReportError> {
    write_atomic(path, to_json(value)?.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ReportError> {
    let text = std::fs::read_to_string(path).map_err(|source| ReportError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

/// Plain copy of the validated parameters, for reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamsRecord {
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    pub b: f64,
}

impl From<&ProblemParams> for ParamsRecord {
    fn from(p: &ProblemParams) -> Self {
        Self {
            alpha: p.alpha(),
            beta: p.beta(),
            eta: p.eta(),
            b: p.b(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquationConstants {
    pub equation: usize,
    pub params: ParamsRecord,
    #[serde(flatten)]
    pub constants: ConstantsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsFile {
    pub conservative: bool,
    pub equations: Vec<EquationConstants>,
}

impl ConstantsFile {
    pub fn from_problem(problem: &Problem) -> Self {
        let equations = problem
            .equations()
            .iter()
            .enumerate()
            .map(|(i, eq)| EquationConstants {
                equation: i + 1,
                params: eq.model.params().into(),
                constants: eq.constants,
            })
            .collect();
        Self {
            conservative: problem.settings().conservative,
            equations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyReport {
    pub pattern: Pattern,
    pub found: bool,
    pub certificate: Option<Certificate>,
    /// The first failing condition when a fixed ladder or box was checked.
    pub failure: Option<ConditionResult>,
    pub message: String,
}

impl CertifyReport {
    pub fn found(certificate: Certificate) -> Self {
        Self {
            pattern: certificate.pattern(),
            found: true,
            message: certificate.conclusion().to_string(),
            certificate: Some(certificate),
            failure: None,
        }
    }

    pub fn not_found(pattern: Pattern, failure: Option<ConditionResult>) -> Self {
        Self {
            pattern,
            found: false,
            certificate: None,
            failure,
            message: "no certificate found".to_string(),
        }
    }

    /// Verdict under other thresholds. A report without a certificate stays
    /// negative.
    pub fn revalidate(&self, thresholds: [(f64, f64); 2]) -> bool {
        self.certificate.as_ref().is_some_and(|c| c.revalidate(thresholds))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSidecar {
    pub grid: usize,
    pub nodes: usize,
    pub options: PicardOptions,
    pub init: String,
    pub residual_sup: f64,
    pub iterations: usize,
    pub converged: bool,
    pub cone: ConeReport,
}

/// Header `t,u,v`.
pub fn solution_csv(sol: &GridSolution) -> Result<Vec<u8>, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "u", "v"])?;
    for ((t, u), v) in sol.nodes.iter().zip(&sol.u).zip(&sol.v) {
        w.write_record([fmt_f64(*t), fmt_f64(*u), fmt_f64(*v)])?;
    }
    w.into_inner().map_err(|e| ReportError::Csv(e.into_error().into()))
}

/// Header `t,s,k,phi`; `n²` rows on the uniform grid of `[0,1]²`, `s` fastest.
pub fn kernel_csv(model: &KernelModel, n: usize) -> Result<Vec<u8>, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "s", "k", "phi"])?;
    let at = |i: usize| if n < 2 { 0.0 } else { i as f64 / (n - 1) as f64 };
    for i in 0..n {
        let t = at(i);
        for j in 0..n {
            let s = at(j);
            w.write_record([fmt_f64(t), fmt_f64(s), fmt_f64(model.k(t, s)), fmt_f64(model.phi(s))])?;
        }
    }
    w.into_inner().map_err(|e| ReportError::Csv(e.into_error().into()))
}

#[derive(Debug, Deserialize)]
struct InitRow {
    t: f64,
    u: f64,
    v: f64,
}

/// Sampled initial state from a `t,u,v` CSV, strictly increasing in `t` and
/// covering `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialState {
    t: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl InitialState {
    pub fn read(path: &Path) -> Result<Self, ReportError> {
        let fail = |message: String| ReportError::Init {
            path: path.to_path_buf(),
            message,
        };
        let mut r = csv::Reader::from_path(path)?;
        let rows: Vec<InitRow> = r.deserialize().collect::<Result<_, _>>()?;
        if rows.len() < 2 {
            return Err(fail(format!("need at least 2 rows, found {}", rows.len())));
        }
        for (k, pair) in rows.windows(2).enumerate() {
            if !(pair[1].t > pair[0].t) {
                return Err(fail(format!("t must increase strictly (row {})", k + 2)));
            }
        }
        if rows
            .iter()
            .any(|r| !(r.t.is_finite() && r.u.is_finite() && r.v.is_finite()))
        {
            return Err(fail("non-finite value".into()));
        }
        let (first, last) = (rows[0].t, rows[rows.len() - 1].t);
        if first > 1e-12 || last < 1.0 - 1e-12 {
            return Err(fail(format!("t covers [{first}, {last}], need [0, 1]")));
        }
        Ok(Self {
            t: rows.iter().map(|r| r.t).collect(),
            u: rows.iter().map(|r| r.u).collect(),
            v: rows.iter().map(|r| r.v).collect(),
        })
    }

    /// Piecewise linear interpolation onto `nodes`.
    pub fn sample(&self, nodes: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let interp = |ys: &[f64], x: f64| {
            let k = self.t.partition_point(|&t| t <= x).clamp(1, self.t.len() - 1);
            let (t0, t1) = (self.t[k - 1], self.t[k]);
            let w = ((x - t0) / (t1 - t0)).clamp(0.0, 1.0);
            ys[k - 1] + w * (ys[k] - ys[k - 1])
        };
        (
            nodes.iter().map(|&x| interp(&self.u, x)).collect(),
            nodes.iter().map(|&x| interp(&self.v, x)).collect(),
        )
    }
}
