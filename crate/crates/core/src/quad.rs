//! Composite Gauss–Legendre quadrature split at kernel breakpoints, and the
//! threshold constants `m`, `M`, `m̂`, `M̂` of the index conditions.
//!
//! ```text
//!   1/m = sup_{t∈[0,1]} ∫₀¹ |k(t,s)| ds        1/m̂ = ∫₀¹ Φ(s) ds
//!   1/M = inf_{t∈[0,b]} ∫₀ᵇ  k(t,s)  ds        1/M̂ = ∫₀ᵇ c Φ(s) ds
//! ```
//!
//! Kernel sections have derivative singularities of the form `|x - x₀|^(α-1)`
//! at every breakpoint. The integrator is globally adaptive: it keeps bisecting
//! the panel with the largest error estimate, which grades the mesh
//! dyadically toward those points.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::KernelModel;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("invalid quadrature spec: {0}")]
    InvalidSpec(&'static str),
    #[error("breakpoints must be sorted, distinct and inside the integration interval")]
    InvalidBreakpoints,
    #[error("tolerance {abs_tol:e} not reached with {panels} panels (estimated error {estimate:e})")]
    ToleranceNotReached { abs_tol: f64, panels: usize, estimate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureSpec {
    /// Gauss nodes per panel.
    pub panel_order: usize,
    pub abs_tol: f64,
    pub max_panels: usize,
    /// Number of uniform `t` samples scanned before golden-section refinement
    /// of the sup/inf over `t`.
    pub t_grid: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            panel_order: 16,
            abs_tol: 1e-10,
            max_panels: 4096,
            t_grid: 513,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<(), QuadError> {
        if self.panel_order < 2 {
            return Err(QuadError::InvalidSpec("panel_order must be at least 2"));
        }
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return Err(QuadError::InvalidSpec("abs_tol must be positive"));
        }
        if self.max_panels < 4 {
            return Err(QuadError::InvalidSpec("max_panels must be at least 4"));
        }
        if self.t_grid < 3 {
            return Err(QuadError::InvalidSpec("t_grid must be at least 3"));
        }
        Ok(())
    }
}

/// Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    /// Nodes from Newton iteration on the Legendre three-term recurrence.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1);
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    fn apply<const N: usize>(&self, f: &mut impl FnMut(f64) -> [f64; N], a: f64, b: f64) -> [f64; N] {
        let mut acc = [0.0; N];
        for (x, w) in self.mapped(a, b) {
            let y = f(x);
            for (acc, y) in acc.iter_mut().zip(y) {
                *acc += w * y;
            }
        }
        acc
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let (pn, pn1) = if n == 0 { (1.0, 0.0) } else { (p1, p0) };
    let d = n as f64 * (x * pn - pn1) / (x * x - 1.0);
    (pn, d)
}

struct Panel<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    err: f64,
}

impl<const N: usize> PartialEq for Panel<N> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<const N: usize> Eq for Panel<N> {}

impl<const N: usize> PartialOrd for Panel<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<const N: usize> Ord for Panel<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err).then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Adaptive composite integrator with a fixed Gauss rule per panel.
#[derive(Debug, Clone)]
pub struct Integrator {
    spec: QuadratureSpec,
    rule: GaussRule,
}

impl Integrator {
    pub fn new(spec: QuadratureSpec) -> Result<Self, QuadError> {
        spec.validate()?;
        Ok(Self {
            spec,
            rule: GaussRule::new(spec.panel_order),
        })
    }

    pub fn spec(&self) -> &QuadratureSpec {
        &self.spec
    }

    pub fn rule(&self) -> &GaussRule {
        &self.rule
    }

    /// `∫_lo^hi f`, with panels split at every interior breakpoint.
    pub fn integrate(
        &self,
        mut f: impl FnMut(f64) -> f64,
        lo: f64,
        hi: f64,
        breakpoints: &[f64],
    ) -> Result<f64, QuadError> {
        self.integrate_vec(&mut |x| [f(x)], lo, hi, breakpoints).map(|[v]| v)
    }

    /// Vector-valued variant; the error estimate is the largest component error.
    pub fn integrate_vec<const N: usize>(
        &self,
        f: &mut impl FnMut(f64) -> [f64; N],
        lo: f64,
        hi: f64,
        breakpoints: &[f64],
    ) -> Result<[f64; N], QuadError> {
        if !(lo <= hi) || breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(QuadError::InvalidBreakpoints);
        }
        if breakpoints.iter().any(|&x| x < lo || x > hi) {
            return Err(QuadError::InvalidBreakpoints);
        }
        if lo == hi {
            return Ok([0.0; N]);
        }
        let mut edges = Vec::with_capacity(breakpoints.len() + 2);
        edges.push(lo);
        edges.extend(breakpoints.iter().copied().filter(|&x| x > lo && x < hi));
        edges.push(hi);

        let mut heap = BinaryHeap::with_capacity(2 * edges.len());
        let mut total_err = 0.0;
        for w in edges.windows(2) {
            let p = self.panel(f, w[0], w[1]);
            total_err += p.err;
            heap.push(p);
        }
        while total_err > self.spec.abs_tol {
            // running sums drift; confirm before giving up or refining further
            let exact: f64 = heap.iter().map(|p| p.err).sum();
            if exact <= self.spec.abs_tol {
                break;
            }
            if heap.len() >= self.spec.max_panels {
                return Err(QuadError::ToleranceNotReached {
                    abs_tol: self.spec.abs_tol,
                    panels: heap.len(),
                    estimate: exact,
                });
            }
            let worst = heap.pop().expect("non-empty");
            let mid = 0.5 * (worst.a + worst.b);
            if !(mid > worst.a && mid < worst.b) {
                return Err(QuadError::ToleranceNotReached {
                    abs_tol: self.spec.abs_tol,
                    panels: heap.len() + 1,
                    estimate: exact,
                });
            }
            let left = self.panel(f, worst.a, mid);
            let right = self.panel(f, mid, worst.b);
            total_err = exact - worst.err + left.err + right.err;
            heap.push(left);
            heap.push(right);
        }
        let mut panels = heap.into_vec();
        panels.sort_by(|x, y| x.a.total_cmp(&y.a));
        let mut out = [0.0; N];
        for p in &panels {
            for (o, v) in out.iter_mut().zip(p.value) {
                *o += v;
            }
        }
        Ok(out)
    }

    fn panel<const N: usize>(&self, f: &mut impl FnMut(f64) -> [f64; N], a: f64, b: f64) -> Panel<N> {
        let mid = 0.5 * (a + b);
        let whole = self.rule.apply(f, a, b);
        let left = self.rule.apply(f, a, mid);
        let right = self.rule.apply(f, mid, b);
        let mut value = [0.0; N];
        let mut err: f64 = 0.0;
        for i in 0..N {
            value[i] = left[i] + right[i];
            err = err.max((whole[i] - value[i]).abs());
        }
        Panel { a, b, value, err }
    }
}

/// `∫₀¹ f(s) ds` split at `breakpoints`.
pub fn integrate_piecewise(
    f: impl FnMut(f64) -> f64,
    breakpoints: &[f64],
    spec: &QuadratureSpec,
) -> Result<f64, QuadError> {
    Integrator::new(*spec)?.integrate(f, 0.0, 1.0, breakpoints)
}

/// Sign changes of `g` on `[lo, hi]`, bracketed on `brackets` uniform cells and
/// polished by bisection to `1e-12`.
pub fn sign_changes(g: impl Fn(f64) -> f64, lo: f64, hi: f64, brackets: usize) -> Vec<f64> {
    let mut roots = Vec::new();
    if !(hi > lo) {
        return roots;
    }
    let h = (hi - lo) / brackets as f64;
    let mut a = lo;
    let mut ga = g(a);
    for i in 1..=brackets {
        let b = if i == brackets { hi } else { lo + h * i as f64 };
        let gb = g(b);
        if ga == 0.0 {
            if a > lo {
                roots.push(a);
            }
        } else if ga * gb < 0.0 {
            let (mut x0, mut x1, mut g0) = (a, b, ga);
            while x1 - x0 > 1e-12 {
                let m = 0.5 * (x0 + x1);
                let gm = g(m);
                if gm == 0.0 {
                    x0 = m;
                    x1 = m;
                    break;
                }
                if (gm < 0.0) == (g0 < 0.0) {
                    x0 = m;
                    g0 = gm;
                } else {
                    x1 = m;
                }
            }
            roots.push(0.5 * (x0 + x1));
        }
        a = b;
        ga = gb;
    }
    roots
}

fn sorted_breakpoints(mut pts: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    pts.retain(|&x| x > lo && x < hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    pts
}

/// `∫₀¹ |k(t,s)| ds`, split at `η`, `t` and the zeros of `k(t,·)`.
pub fn abs_section(model: &KernelModel, integ: &Integrator, t: f64) -> Result<f64, QuadError> {
    let eta = model.eta();
    let mut pts = vec![eta, t];
    let mut edges = sorted_breakpoints(vec![eta, t], 0.0, 1.0);
    edges.insert(0, 0.0);
    edges.push(1.0);
    for w in edges.windows(2) {
        pts.extend(sign_changes(|s| model.k(t, s), w[0], w[1], 64));
    }
    let pts = sorted_breakpoints(pts, 0.0, 1.0);
    integ.integrate(|s| model.k(t, s).abs(), 0.0, 1.0, &pts)
}

/// `∫₀ᵇ k(t,s) ds`, split at `η` and `t`.
pub fn positive_section(model: &KernelModel, integ: &Integrator, t: f64) -> Result<f64, QuadError> {
    let b = model.b();
    let pts = sorted_breakpoints(vec![model.eta(), t], 0.0, b);
    integ.integrate(|s| model.k(t, s), 0.0, b, &pts)
}

/// Maximizer of `g` on `[lo, hi]`: uniform scan with `n` points, then golden
/// section inside the bracket around the best sample. Returns `(value, arg)`.
pub fn grid_golden_max(
    mut g: impl FnMut(f64) -> Result<f64, QuadError>,
    lo: f64,
    hi: f64,
    n: usize,
) -> Result<(f64, f64), QuadError> {
    let step = (hi - lo) / (n - 1) as f64;
    let mut best = (f64::NEG_INFINITY, lo);
    let mut best_i = 0;
    for i in 0..n {
        let t = if i == n - 1 { hi } else { lo + step * i as f64 };
        let v = g(t)?;
        if v > best.0 {
            best = (v, t);
            best_i = i;
        }
    }
    let mut a = if best_i == 0 {
        lo
    } else {
        lo + step * (best_i - 1) as f64
    };
    let mut b = if best_i + 1 >= n {
        hi
    } else {
        lo + step * (best_i + 1) as f64
    };
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let mut f1 = g(x1)?;
    let mut f2 = g(x2)?;
    while b - a > 1e-10 {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = g(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = g(x2)?;
        }
        for (v, x) in [(f1, x1), (f2, x2)] {
            if v > best.0 {
                best = (v, x);
            }
        }
    }
    Ok(best)
}

/// `m` and the `t` where `∫|k(t,·)|` peaks.
pub fn sup_threshold(model: &KernelModel, spec: &QuadratureSpec) -> Result<(f64, f64), QuadError> {
    let integ = Integrator::new(*spec)?;
    let (sup, t) = grid_golden_max(|t| abs_section(model, &integ, t), 0.0, 1.0, spec.t_grid)?;
    Ok((1.0 / sup, t))
}

/// `M` and the `t ∈ [0,b]` where `∫₀ᵇ k(t,·)` is smallest.
pub fn inf_threshold(model: &KernelModel, spec: &QuadratureSpec) -> Result<(f64, f64), QuadError> {
    let integ = Integrator::new(*spec)?;
    let (neg_inf, t) = grid_golden_max(
        |t| positive_section(model, &integ, t).map(|v| -v),
        0.0,
        model.b(),
        spec.t_grid,
    )?;
    Ok((-1.0 / neg_inf, t))
}

/// `(m̂, M̂)` from the envelope.
pub fn hat_constants(model: &KernelModel, spec: &QuadratureSpec) -> Result<(f64, f64), QuadError> {
    let integ = Integrator::new(*spec)?;
    let eta = model.eta();
    let phi_total = integ.integrate(|s| model.phi(s), 0.0, 1.0, &sorted_breakpoints(vec![eta], 0.0, 1.0))?;
    let b = model.b();
    let phi_b = integ.integrate(|s| model.phi(s), 0.0, b, &sorted_breakpoints(vec![eta], 0.0, b))?;
    Ok((1.0 / phi_total, 1.0 / (model.c() * phi_b)))
}

/// Thresholds and their envelope estimates for one equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub c: f64,
    pub m: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
    pub m_hat: f64,
    #[serde(rename = "M_hat")]
    pub big_m_hat: f64,
    /// Location of the sup defining `m`.
    pub t_star_m: f64,
    /// Location of the inf defining `M`.
    #[serde(rename = "t_star_M")]
    pub t_star_big_m: f64,
    /// `m ≥ m̂` and `M ≤ M̂` within 1e-6 relative.
    pub estimates_ordered: bool,
    pub quad: QuadratureSpec,
}

impl ConstantsReport {
    pub fn compute(model: &KernelModel, spec: &QuadratureSpec) -> Result<Self, QuadError> {
        let (m, t_star_m) = sup_threshold(model, spec)?;
        let (big_m, t_star_big_m) = inf_threshold(model, spec)?;
        let (m_hat, big_m_hat) = hat_constants(model, spec)?;
        let tol = 1e-6;
        let estimates_ordered = m >= m_hat * (1.0 - tol) && big_m <= big_m_hat * (1.0 + tol);
        Ok(Self {
            c: model.c(),
            m,
            big_m,
            m_hat,
            big_m_hat,
            t_star_m,
            t_star_big_m,
            estimates_ordered,
            quad: *spec,
        })
    }

    /// Threshold pair `(m, M)` used by the index conditions. Conservative mode
    /// takes the envelope estimates, clamped so they never exceed `m` or fall
    /// below `M`.
    pub fn thresholds(&self, conservative: bool) -> (f64, f64) {
        if conservative {
            (self.m_hat.min(self.m), self.big_m_hat.max(self.big_m))
        } else {
            (self.m, self.big_m)
        }
    }
}
