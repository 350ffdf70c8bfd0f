//! Index conditions and the existence, multiplicity and nonexistence
//! certificates assembled from them.
//!
//! For radii `(ρ₁, ρ₂)` and equation `i`:
//!
//! * `I1`:  `sup f_i/ρ_i` over `[0,1] × [-ρ₁,ρ₁] × [-ρ₂,ρ₂]` is below `m_i`;
//! * `I0`:  `inf f_i/ρ_i` over `[0,b_i] × U_i × V_i` is above `M_i`, where for
//!   `i = 1` the boxes are `U₁ = [ρ₁, ρ₁/c₁]`, `V₁ = [-ρ₂/c₂, ρ₂/c₂]`, and for
//!   `i = 2` they are `U₂ = [-ρ₁/c₁, ρ₁/c₁]`, `V₂ = [ρ₂, ρ₂/c₂]`;
//! * `I0*`: as `I0` for a single `i`, with the lower end `ρ_i` replaced by 0.
//!
//! All sup/inf values are sampled, so a sup is an underestimate and an inf an
//! overestimate unless a Lipschitz constant is supplied, in which case the
//! comparison uses the certified bound and the result is flagged `rigorous`.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exprlang::{EvalError, Expr, LocatedEvalError};
use crate::problem::Problem;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertifyError {
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("radii must be finite and positive, got ({0}, {1})")]
    InvalidRadius(f64, f64),
    #[error("pattern {pattern} needs {expected} ladder levels, got {found}")]
    LadderLength {
        pattern: Pattern,
        expected: usize,
        found: usize,
    },
    #[error("ladder order violated for equation {equation} between levels {level} and {}: {detail}", .level + 1)]
    LadderOrderViolation {
        level: usize,
        equation: usize,
        detail: String,
    },
    #[error("condition {} failed for equation {} at radii ({}, {}): lhs {} vs threshold {}",
        .0.kind, .0.equation, .0.rho.0, .0.rho.1, .0.effective_lhs(), .0.threshold)]
    ConditionFailed(Box<ConditionResult>),
    #[error("invalid search grid: {0}")]
    InvalidSearchGrid(&'static str),
    #[error(transparent)]
    Eval(#[from] LocatedEvalError),
}

/// Closed box `[t] × [u] × [v]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3 {
    pub t: (f64, f64),
    pub u: (f64, f64),
    pub v: (f64, f64),
}

impl Box3 {
    pub fn new(t: (f64, f64), u: (f64, f64), v: (f64, f64)) -> Result<Self, CertifyError> {
        let bx = Self { t, u, v };
        bx.validate()?;
        Ok(bx)
    }

    pub fn validate(&self) -> Result<(), CertifyError> {
        for (name, (lo, hi)) in [("t", self.t), ("u", self.u), ("v", self.v)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(CertifyError::InvalidBox(format!("{name}-range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    fn axes(&self) -> [(f64, f64); 3] {
        [self.t, self.u, self.v]
    }

    /// All points of the `n`-per-axis uniform grid; a degenerate axis
    /// contributes one point.
    pub fn grid(&self, n: usize) -> impl Iterator<Item = (f64, f64, f64)> {
        let [ts, us, vs] = self.axes().map(|(lo, hi)| axis(lo, hi, n));
        ts.into_iter().flat_map(move |t| {
            let vs = vs.clone();
            us.clone()
                .into_iter()
                .flat_map(move |u| vs.clone().into_iter().map(move |v| (t, u, v)))
        })
    }

    fn cell_diagonal(&self, n: usize) -> f64 {
        self.axes()
            .iter()
            .map(|(lo, hi)| (hi - lo) / (n - 1) as f64)
            .map(|h| h * h)
            .sum::<f64>()
            .sqrt()
    }
}

fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if lo == hi {
        return vec![lo];
    }
    (0..n)
        .map(|k| {
            if k == n - 1 {
                hi
            } else {
                lo + (hi - lo) * (k as f64 / (n - 1) as f64)
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Sup,
    Inf,
}

/// Sampled sup or inf over a box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremumEstimate {
    pub direction: Direction,
    /// Best sampled value.
    pub value: f64,
    pub location: (f64, f64, f64),
    pub samples: usize,
    pub refined: bool,
    /// With a Lipschitz constant `L`: `value ± L·d/2`, `d` the coarse cell
    /// diagonal, which encloses the true sup (inf) from above (below).
    pub lipschitz_bound: Option<f64>,
}

impl ExtremumEstimate {
    /// The bound the conditions compare against.
    pub fn effective(&self) -> f64 {
        self.lipschitz_bound.unwrap_or(self.value)
    }
}

/// Coarse grid scan followed by `refine_rounds` rounds of local grid search,
/// each around the incumbent with half the previous window.
pub fn box_extremum(
    mut g: impl FnMut(f64, f64, f64) -> Result<f64, EvalError>,
    bx: &Box3,
    grid: usize,
    refine_rounds: usize,
    direction: Direction,
    lipschitz: Option<f64>,
) -> Result<ExtremumEstimate, LocatedEvalError> {
    assert!(grid >= 3, "extremum grid needs at least 3 points per axis");
    let better = |a: f64, b: f64| match direction {
        Direction::Sup => a > b,
        Direction::Inf => a < b,
    };
    let mut eval = |t, u, v| g(t, u, v).map_err(|error| LocatedEvalError { error, at: (t, u, v) });

    let mut best: Option<(f64, (f64, f64, f64))> = None;
    let mut samples = 0;
    for p in bx.grid(grid) {
        let y = eval(p.0, p.1, p.2)?;
        samples += 1;
        if best.is_none_or(|(b, _)| better(y, b)) {
            best = Some((y, p));
        }
    }
    let (mut value, mut location) = best.expect("grid is never empty");

    let cells = bx.axes().map(|(lo, hi)| (hi - lo) / (grid - 1) as f64);
    let mut window = cells;
    for _ in 0..refine_rounds {
        let centre = [location.0, location.1, location.2];
        let axes = bx.axes();
        let mut local = [(0.0, 0.0); 3];
        for k in 0..3 {
            local[k] = (
                (centre[k] - window[k]).max(axes[k].0),
                (centre[k] + window[k]).min(axes[k].1),
            );
        }
        let local = Box3 {
            t: local[0],
            u: local[1],
            v: local[2],
        };
        for p in local.grid(grid) {
            let y = eval(p.0, p.1, p.2)?;
            samples += 1;
            if better(y, value) {
                value = y;
                location = p;
            }
        }
        window = window.map(|w| 0.5 * w);
    }

    let lipschitz_bound = lipschitz.map(|l| {
        let slack = 0.5 * l * bx.cell_diagonal(grid);
        match direction {
            Direction::Sup => value + slack,
            Direction::Inf => value - slack,
        }
    });
    Ok(ExtremumEstimate {
        direction,
        value,
        location,
        samples,
        refined: refine_rounds > 0,
        lipschitz_bound,
    })
}

pub fn box_sup(f: &Expr, bx: &Box3, grid: usize, refine_rounds: usize) -> Result<ExtremumEstimate, LocatedEvalError> {
    box_extremum(|t, u, v| f.eval(t, u, v), bx, grid, refine_rounds, Direction::Sup, None)
}

pub fn box_inf(f: &Expr, bx: &Box3, grid: usize, refine_rounds: usize) -> Result<ExtremumEstimate, LocatedEvalError> {
    box_extremum(|t, u, v| f.eval(t, u, v), bx, grid, refine_rounds, Direction::Inf, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConditionKind {
    I1,
    I0,
    #[serde(rename = "I0star")]
    I0Star,
    NE1,
    NE2,
}

impl ConditionKind {
    /// `true` for conditions of the form `lhs < threshold`.
    pub fn is_upper(self) -> bool {
        matches!(self, Self::I1 | Self::NE1)
    }
}

impl fmt::Display for ConditionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::I1 => "I1",
            Self::I0 => "I0",
            Self::I0Star => "I0*",
            Self::NE1 => "NE1",
            Self::NE2 => "NE2",
        })
    }
}

/// One evaluated inequality for one equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub kind: ConditionKind,
    /// 1 or 2.
    pub equation: usize,
    pub rho: (f64, f64),
    pub domain: Vec<Box3>,
    pub lhs: ExtremumEstimate,
    pub threshold: f64,
    pub margin: f64,
    pub holds: bool,
    /// Threshold came from the envelope estimates.
    pub conservative: bool,
    /// The comparison used a Lipschitz enclosure rather than a sampled value.
    pub rigorous: bool,
}

impl ConditionResult {
    #[allow(clippy::too_many_arguments)]
    fn new(
        kind: ConditionKind,
        equation: usize,
        rho: (f64, f64),
        domain: Vec<Box3>,
        lhs: ExtremumEstimate,
        threshold: f64,
        margin: f64,
        conservative: bool,
    ) -> Self {
        let mut out = Self {
            kind,
            equation,
            rho,
            domain,
            rigorous: lhs.lipschitz_bound.is_some(),
            lhs,
            threshold,
            margin,
            holds: false,
            conservative,
        };
        out.holds = out.holds_against(threshold);
        out
    }

    pub fn effective_lhs(&self) -> f64 {
        self.lhs.effective()
    }

    /// Re-evaluates the strict inequality with a different threshold.
    pub fn holds_against(&self, threshold: f64) -> bool {
        let lhs = self.effective_lhs();
        if self.kind.is_upper() {
            lhs < threshold - self.margin
        } else {
            lhs > threshold + self.margin
        }
    }
}

fn check_radii(rho: (f64, f64)) -> Result<(), CertifyError> {
    if rho.0 > 0.0 && rho.1 > 0.0 && rho.0.is_finite() && rho.1.is_finite() {
        Ok(())
    } else {
        Err(CertifyError::InvalidRadius(rho.0, rho.1))
    }
}

fn scaled_extremum(
    problem: &Problem,
    i: usize,
    bx: &Box3,
    scale: f64,
    direction: Direction,
) -> Result<ExtremumEstimate, CertifyError> {
    let s = problem.settings();
    let f = &problem.equation(i).f;
    let lipschitz = s.lipschitz.map(|l| l[i] / scale);
    Ok(box_extremum(
        |t, u, v| Ok(f.eval(t, u, v)? / scale),
        bx,
        s.grid,
        s.refine_rounds,
        direction,
        lipschitz,
    )?)
}

/// Box of the `I1` condition.
pub fn i1_box(rho: (f64, f64)) -> Box3 {
    Box3 {
        t: (0.0, 1.0),
        u: (-rho.0, rho.0),
        v: (-rho.1, rho.1),
    }
}

/// Box of the `I0` (or, with `star`, `I0*`) condition for equation `i` (0-based).
pub fn i0_box(problem: &Problem, rho: (f64, f64), i: usize, star: bool) -> Box3 {
    let (c1, c2) = problem.cone_constants();
    let b = problem.equation(i).model.b();
    let (u_wide, v_wide) = ((-rho.0 / c1, rho.0 / c1), (-rho.1 / c2, rho.1 / c2));
    let lower = |r: f64| if star { 0.0 } else { r };
    if i == 0 {
        Box3 {
            t: (0.0, b),
            u: (lower(rho.0), rho.0 / c1),
            v: v_wide,
        }
    } else {
        Box3 {
            t: (0.0, b),
            u: u_wide,
            v: (lower(rho.1), rho.1 / c2),
        }
    }
}

pub fn check_i1(problem: &Problem, rho: (f64, f64)) -> Result<[ConditionResult; 2], CertifyError> {
    check_radii(rho)?;
    let bx = i1_box(rho);
    let s = problem.settings();
    let mut out = Vec::with_capacity(2);
    for i in 0..2 {
        let scale = if i == 0 { rho.0 } else { rho.1 };
        let lhs = scaled_extremum(problem, i, &bx, scale, Direction::Sup)?;
        let (m, _) = problem.thresholds(i);
        out.push(ConditionResult::new(
            ConditionKind::I1,
            i + 1,
            rho,
            vec![bx],
            lhs,
            m,
            s.margin,
            s.conservative,
        ));
    }
    Ok(out.try_into().expect("two equations"))
}

pub fn check_i0(problem: &Problem, rho: (f64, f64)) -> Result<[ConditionResult; 2], CertifyError> {
    check_radii(rho)?;
    Ok([i0_single(problem, rho, 0, false)?, i0_single(problem, rho, 1, false)?])
}

/// `I0*` for equation `i` (1 or 2).
pub fn check_i0_star(problem: &Problem, rho: (f64, f64), i: usize) -> Result<ConditionResult, CertifyError> {
    check_radii(rho)?;
    assert!(i == 1 || i == 2, "equation index is 1 or 2");
    i0_single(problem, rho, i - 1, true)
}

fn i0_single(problem: &Problem, rho: (f64, f64), i: usize, star: bool) -> Result<ConditionResult, CertifyError> {
    let bx = i0_box(problem, rho, i, star);
    let scale = if i == 0 { rho.0 } else { rho.1 };
    let lhs = scaled_extremum(problem, i, &bx, scale, Direction::Inf)?;
    let (_, big_m) = problem.thresholds(i);
    let s = problem.settings();
    let kind = if star { ConditionKind::I0Star } else { ConditionKind::I0 };
    Ok(ConditionResult::new(
        kind,
        i + 1,
        rho,
        vec![bx],
        lhs,
        big_m,
        s.margin,
        s.conservative,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pattern {
    S1,
    S2,
    S3,
    S4,
    S5,
    S6,
    #[serde(rename = "NONEXIST-1")]
    Nonexist1,
    #[serde(rename = "NONEXIST-2")]
    Nonexist2,
    #[serde(rename = "NONEXIST-3")]
    Nonexist3,
}

/// What one rung of a ladder has to satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Rung {
    I1,
    I0,
    /// `I0`, or failing that `I0*` for some equation.
    I0OrStar,
}

impl Pattern {
    pub const EXISTENCE: [Pattern; 6] = [Self::S1, Self::S2, Self::S3, Self::S4, Self::S5, Self::S6];

    fn rungs(self) -> &'static [Rung] {
        use Rung::*;
        match self {
            Self::S1 => &[I0OrStar, I1],
            Self::S2 => &[I1, I0],
            Self::S3 => &[I0OrStar, I1, I0],
            Self::S4 => &[I1, I0, I1],
            Self::S5 => &[I0OrStar, I1, I0, I1],
            Self::S6 => &[I1, I0, I1, I0],
            _ => &[],
        }
    }

    /// Number of radius pairs in the ladder.
    pub fn levels(self) -> usize {
        self.rungs().len()
    }

    pub fn is_existence(self) -> bool {
        self.levels() > 0
    }

    /// Minimum number of nontrivial solutions the pattern guarantees.
    pub fn solutions(self) -> usize {
        match self {
            Self::S1 | Self::S2 => 1,
            Self::S3 | Self::S4 => 2,
            Self::S5 | Self::S6 => 3,
            _ => 0,
        }
    }

    /// Whether the gap above `level` must be `r/c < next` (after an index-0
    /// rung, since `V_r ⊂ K_{r/c}`) or just `r < next`.
    fn gap_over_c(self, level: usize) -> bool {
        matches!(self.rungs()[level], Rung::I0 | Rung::I0OrStar)
    }

    pub fn conclusion(self) -> String {
        match self.solutions() {
            0 => "no nontrivial solution on tested domain".to_string(),
            1 => "at least one nontrivial solution".to_string(),
            k => format!("at least {} nontrivial solutions", ["", "", "two", "three"][k]),
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::S1 => "S1",
            Self::S2 => "S2",
            Self::S3 => "S3",
            Self::S4 => "S4",
            Self::S5 => "S5",
            Self::S6 => "S6",
            Self::Nonexist1 => "NONEXIST-1",
            Self::Nonexist2 => "NONEXIST-2",
            Self::Nonexist3 => "NONEXIST-3",
        })
    }
}

impl std::str::FromStr for Pattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "S1" => Self::S1,
            "S2" => Self::S2,
            "S3" => Self::S3,
            "S4" => Self::S4,
            "S5" => Self::S5,
            "S6" => Self::S6,
            "NE1" | "NONEXIST-1" => Self::Nonexist1,
            "NE2" | "NONEXIST-2" => Self::Nonexist2,
            "NE3" | "NONEXIST-3" => Self::Nonexist3,
            _ => return Err(format!("unknown pattern `{s}` (expected S1..S6 or NE1..NE3)")),
        })
    }
}

/// Checks the strict ordering between consecutive ladder levels.
pub fn check_ladder_order(pattern: Pattern, ladder: &[(f64, f64)], c: (f64, f64)) -> Result<(), CertifyError> {
    if ladder.len() != pattern.levels() {
        return Err(CertifyError::LadderLength {
            pattern,
            expected: pattern.levels(),
            found: ladder.len(),
        });
    }
    for &r in ladder {
        check_radii(r)?;
    }
    for level in 0..ladder.len().saturating_sub(1) {
        gap_ok(pattern, level, ladder[level], ladder[level + 1], c)?;
    }
    Ok(())
}

fn gap_ok(pattern: Pattern, level: usize, lo: (f64, f64), hi: (f64, f64), c: (f64, f64)) -> Result<(), CertifyError> {
    let over_c = pattern.gap_over_c(level);
    for (equation, (a, b, ci)) in [(1, (lo.0, hi.0, c.0)), (2, (lo.1, hi.1, c.1))] {
        let bound = if over_c { a / ci } else { a };
        if !(bound < b) {
            let detail = if over_c {
                format!("{a}/{ci} = {bound} is not below {b}")
            } else {
                format!("{a} is not below {b}")
            };
            return Err(CertifyError::LadderOrderViolation {
                level: level + 1,
                equation,
                detail,
            });
        }
    }
    Ok(())
}

/// A verified pattern. Only constructible when every ordering constraint and
/// every embedded condition holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CertificateRepr")]
pub struct Certificate {
    pattern: Pattern,
    ladder: Vec<(f64, f64)>,
    cone_constants: (f64, f64),
    conditions: Vec<ConditionResult>,
    conclusion: String,
    scope: Option<String>,
}

#[derive(Deserialize)]
struct CertificateRepr {
    pattern: Pattern,
    ladder: Vec<(f64, f64)>,
    cone_constants: (f64, f64),
    conditions: Vec<ConditionResult>,
    #[allow(dead_code)]
    conclusion: String,
    scope: Option<String>,
}

impl TryFrom<CertificateRepr> for Certificate {
    type Error = CertifyError;

    fn try_from(r: CertificateRepr) -> Result<Self, Self::Error> {
        Certificate::new(r.pattern, r.ladder, r.cone_constants, r.conditions, r.scope)
    }
}

impl Certificate {
    pub fn new(
        pattern: Pattern,
        ladder: Vec<(f64, f64)>,
        cone_constants: (f64, f64),
        conditions: Vec<ConditionResult>,
        scope: Option<String>,
    ) -> Result<Self, CertifyError> {
        if pattern.is_existence() {
            check_ladder_order(pattern, &ladder, cone_constants)?;
        }
        if conditions.is_empty() {
            return Err(CertifyError::InvalidSearchGrid("certificate without conditions"));
        }
        for c in &conditions {
            if !c.holds || c.holds_against(c.threshold) != c.holds {
                return Err(CertifyError::ConditionFailed(Box::new(c.clone())));
            }
        }
        Ok(Self {
            pattern,
            conclusion: pattern.conclusion(),
            ladder,
            cone_constants,
            conditions,
            scope,
        })
    }

    pub fn pattern(&self) -> Pattern {
        self.pattern
    }

    pub fn ladder(&self) -> &[(f64, f64)] {
        &self.ladder
    }

    pub fn cone_constants(&self) -> (f64, f64) {
        self.cone_constants
    }

    pub fn conditions(&self) -> &[ConditionResult] {
        &self.conditions
    }

    pub fn conclusion(&self) -> &str {
        &self.conclusion
    }

    pub fn scope(&self) -> Option<&str> {
        self.scope.as_deref()
    }

    /// Re-checks every condition against other `(m, M)` pairs, indexed by
    /// equation.
    pub fn revalidate(&self, thresholds: [(f64, f64); 2]) -> bool {
        self.conditions.iter().all(|c| {
            let (m, big_m) = thresholds[c.equation - 1];
            c.holds_against(if c.kind.is_upper() { m } else { big_m })
        })
    }
}

fn rung_conditions(problem: &Problem, rung: Rung, rho: (f64, f64)) -> Result<Vec<ConditionResult>, CertifyError> {
    let first_failure = |rs: &[ConditionResult]| rs.iter().find(|c| !c.holds).cloned();
    match rung {
        Rung::I1 | Rung::I0 => {
            let rs = if rung == Rung::I1 {
                check_i1(problem, rho)?
            } else {
                check_i0(problem, rho)?
            };
            match first_failure(&rs) {
                None => Ok(rs.to_vec()),
                Some(c) => Err(CertifyError::ConditionFailed(Box::new(c))),
            }
        }
        Rung::I0OrStar => {
            let rs = check_i0(problem, rho)?;
            let Some(failed) = first_failure(&rs) else {
                return Ok(rs.to_vec());
            };
            for i in 1..=2 {
                let star = check_i0_star(problem, rho, i)?;
                if star.holds {
                    return Ok(vec![star]);
                }
            }
            Err(CertifyError::ConditionFailed(Box::new(failed)))
        }
    }
}

/// Verifies `pattern` on an explicit ladder of radius pairs.
pub fn check_pattern(problem: &Problem, pattern: Pattern, ladder: &[(f64, f64)]) -> Result<Certificate, CertifyError> {
    if !pattern.is_existence() {
        return Err(CertifyError::LadderLength {
            pattern,
            expected: 0,
            found: ladder.len(),
        });
    }
    let c = problem.cone_constants();
    check_ladder_order(pattern, ladder, c)?;
    let mut conditions = Vec::new();
    for (&rung, &rho) in pattern.rungs().iter().zip(ladder) {
        conditions.extend(rung_conditions(problem, rung, rho)?);
    }
    Certificate::new(pattern, ladder.to_vec(), c, conditions, None)
}

/// Geometric radius grid `lo, lo·q, …, hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl RadiusGrid {
    pub fn values(&self) -> Result<Vec<f64>, CertifyError> {
        if !(self.lo > 0.0 && self.hi > self.lo && self.hi.is_finite()) {
            return Err(CertifyError::InvalidSearchGrid("need 0 < lo < hi"));
        }
        if self.points < 2 {
            return Err(CertifyError::InvalidSearchGrid("need at least 2 points"));
        }
        let ratio = (self.hi / self.lo).ln();
        Ok((0..self.points)
            .map(|k| {
                if k == self.points - 1 {
                    self.hi
                } else {
                    self.lo * (ratio * k as f64 / (self.points - 1) as f64).exp()
                }
            })
            .collect())
    }
}

/// Depth-first search for the lexicographically smallest ladder on `grid`
/// (both components drawn from the grid independently) that certifies
/// `pattern`. Levels whose conditions fail, or fail to evaluate, are pruned.
pub fn search_certificate(
    problem: &Problem,
    pattern: Pattern,
    grid: &RadiusGrid,
) -> Result<Option<Certificate>, CertifyError> {
    let radii = grid.values()?;
    if !pattern.is_existence() {
        return Ok(None);
    }
    let mut search = Search {
        problem,
        pattern,
        radii: &radii,
        c: problem.cone_constants(),
        cache: HashMap::new(),
        dead: HashSet::new(),
    };
    let mut path = Vec::new();
    if search.descend(0, None, &mut path) {
        let ladder: Vec<(f64, f64)> = path.iter().map(|&(a, b)| (radii[a], radii[b])).collect();
        let mut conditions = Vec::new();
        for (level, &(a, b)) in path.iter().enumerate() {
            let rung = pattern.rungs()[level];
            conditions.extend(search.cache[&(rung, a, b)].clone().expect("on a successful path"));
        }
        return Ok(Some(Certificate::new(pattern, ladder, search.c, conditions, None)?));
    }
    Ok(None)
}

struct Search<'a> {
    problem: &'a Problem,
    pattern: Pattern,
    radii: &'a [f64],
    c: (f64, f64),
    cache: HashMap<(Rung, usize, usize), Option<Vec<ConditionResult>>>,
    dead: HashSet<(usize, usize, usize)>,
}

impl Search<'_> {
    fn holds(&mut self, rung: Rung, a: usize, b: usize) -> bool {
        let key = (rung, a, b);
        if !self.cache.contains_key(&key) {
            let r = rung_conditions(self.problem, rung, (self.radii[a], self.radii[b])).ok();
            self.cache.insert(key, r);
        }
        self.cache[&key].is_some()
    }

    fn descend(&mut self, level: usize, prev: Option<(usize, usize)>, path: &mut Vec<(usize, usize)>) -> bool {
        let levels = self.pattern.levels();
        if level == levels {
            return true;
        }
        let n = self.radii.len();
        for a in 0..n {
            for b in 0..n {
                if let Some(p) = prev {
                    let lo = (self.radii[p.0], self.radii[p.1]);
                    if gap_ok(self.pattern, level - 1, lo, (self.radii[a], self.radii[b]), self.c).is_err() {
                        continue;
                    }
                }
                if self.dead.contains(&(level, a, b)) {
                    continue;
                }
                let rung = self.pattern.rungs()[level];
                if self.holds(rung, a, b) {
                    path.push((a, b));
                    if self.descend(level + 1, Some((a, b)), path) {
                        return true;
                    }
                    path.pop();
                }
                self.dead.insert((level, a, b));
            }
        }
        false
    }
}

/// Nonexistence variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NonexistenceVariant {
    /// `f_i < m_i |u_i|` for `t ∈ [0,1]`, `u_i ≠ 0`, both equations.
    BelowM,
    /// `f_i > M_i u_i` for `t ∈ [0,b_i]`, `u_i > 0`, both equations.
    AboveBigM,
    /// One equation of each kind.
    Mixed,
}

impl NonexistenceVariant {
    pub fn from_index(k: u8) -> Option<Self> {
        match k {
            1 => Some(Self::BelowM),
            2 => Some(Self::AboveBigM),
            3 => Some(Self::Mixed),
            _ => None,
        }
    }

    pub fn pattern(self) -> Pattern {
        match self {
            Self::BelowM => Pattern::Nonexist1,
            Self::AboveBigM => Pattern::Nonexist2,
            Self::Mixed => Pattern::Nonexist3,
        }
    }
}

/// Relative size of the excluded neighbourhood `|u_i| < ε` of zero.
pub const ZERO_EXCLUSION: f64 = 1e-6;

fn own_range(bx: &Box3, i: usize) -> (f64, f64) {
    if i == 0 {
        bx.u
    } else {
        bx.v
    }
}

fn with_own_range(bx: &Box3, i: usize, range: (f64, f64)) -> Box3 {
    let mut out = *bx;
    if i == 0 {
        out.u = range;
    } else {
        out.v = range;
    }
    out
}

fn exclusion(range: (f64, f64)) -> f64 {
    ZERO_EXCLUSION * range.0.abs().max(range.1.abs()).max(f64::MIN_POSITIVE)
}

fn ratio_extremum(
    problem: &Problem,
    i: usize,
    parts: &[Box3],
    direction: Direction,
) -> Result<ExtremumEstimate, CertifyError> {
    let s = problem.settings();
    let f = &problem.equation(i).f;
    let mut best: Option<ExtremumEstimate> = None;
    for part in parts {
        let est = box_extremum(
            |t, u, v| {
                let own = if i == 0 { u } else { v };
                Ok(f.eval(t, u, v)? / own.abs())
            },
            part,
            s.grid,
            s.refine_rounds,
            direction,
            None,
        )?;
        best = Some(match best {
            None => est,
            Some(b) => {
                let samples = b.samples + est.samples;
                let pick = match direction {
                    Direction::Sup if est.value > b.value => est,
                    Direction::Inf if est.value < b.value => est,
                    _ => b,
                };
                ExtremumEstimate { samples, ..pick }
            }
        });
    }
    best.ok_or_else(|| CertifyError::InvalidBox("no admissible part after excluding u_i = 0".into()))
}

fn nonexistence_condition(
    problem: &Problem,
    i: usize,
    kind: ConditionKind,
    test_box: &Box3,
) -> Result<ConditionResult, CertifyError> {
    test_box.validate()?;
    let s = problem.settings();
    let range = own_range(test_box, i);
    let eps = exclusion(range);
    let (m, big_m) = problem.thresholds(i);
    let (parts, direction, threshold) = match kind {
        ConditionKind::NE1 => {
            let base = Box3 {
                t: (0.0, 1.0),
                ..*test_box
            };
            let mut parts = Vec::new();
            if range.0 <= -eps {
                parts.push(with_own_range(&base, i, (range.0, range.1.min(-eps))));
            }
            if range.1 >= eps {
                parts.push(with_own_range(&base, i, (range.0.max(eps), range.1)));
            }
            (parts, Direction::Sup, m)
        }
        ConditionKind::NE2 => {
            let base = Box3 {
                t: (0.0, problem.equation(i).model.b()),
                ..*test_box
            };
            let mut parts = Vec::new();
            if range.1 >= eps {
                parts.push(with_own_range(&base, i, (range.0.max(eps), range.1)));
            }
            (parts, Direction::Inf, big_m)
        }
        _ => unreachable!("not a nonexistence condition"),
    };
    let lhs = ratio_extremum(problem, i, &parts, direction)?;
    Ok(ConditionResult::new(
        kind,
        i + 1,
        (eps, eps),
        parts,
        lhs,
        threshold,
        s.margin,
        s.conservative,
    ))
}

/// Samples the nonexistence inequalities on user boxes (one per equation;
/// their `t`-ranges are replaced by the ranges the inequality quantifies over).
pub fn check_nonexistence(
    problem: &Problem,
    variant: NonexistenceVariant,
    boxes: &[Box3; 2],
) -> Result<Certificate, CertifyError> {
    use ConditionKind::{NE1, NE2};
    let plans: &[[ConditionKind; 2]] = match variant {
        NonexistenceVariant::BelowM => &[[NE1, NE1]],
        NonexistenceVariant::AboveBigM => &[[NE2, NE2]],
        NonexistenceVariant::Mixed => &[[NE1, NE2], [NE2, NE1]],
    };
    let mut last_failure = None;
    for plan in plans {
        let a = nonexistence_condition(problem, 0, plan[0], &boxes[0])?;
        let b = nonexistence_condition(problem, 1, plan[1], &boxes[1])?;
        let failed = [&a, &b].into_iter().find(|c| !c.holds).cloned();
        match failed {
            None => {
                let scope = format!(
                    "verified by sampling on the tested boxes only; |u_i| < {:e}·max|u_i| excluded",
                    ZERO_EXCLUSION
                );
                return Certificate::new(
                    variant.pattern(),
                    Vec::new(),
                    problem.cone_constants(),
                    vec![a, b],
                    Some(scope),
                );
            }
            Some(failed) => {
                if last_failure.is_none() {
                    last_failure = Some(failed);
                }
            }
        }
    }
    Err(CertifyError::ConditionFailed(Box::new(
        last_failure.expect("at least one plan"),
    )))
}
