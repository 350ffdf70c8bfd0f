//! Nyström discretization of the Hammerstein system
//!
//! ```text
//!   u(t) = ∫₀¹ k₁(t,s) f₁(s, u(s), v(s)) ds
//!   v(t) = ∫₀¹ k₂(t,s) f₂(s, u(s), v(s)) ds
//! ```
//!
//! and damped Picard iteration of the discrete operator.
//!
//! Both equations share one node set, so `f(s, u(s), v(s))` is available at
//! every node. Between nodes the integrand factor `g = f(·, u, v)` is replaced
//! by its local cubic interpolant; the kernel factor is integrated adaptively
//! on every interval. Since `η₁`, `η₂` and every node `t_j` are nodes, each
//! interval sees kernel singularities only at its endpoints.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exprlang::{Expr, LocatedEvalError};
use crate::kernel::KernelModel;
use crate::quad::{Integrator, QuadError, QuadratureSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error("equation {equation}: {source}")]
    Eval { equation: usize, source: LocatedEvalError },
    #[error("state has {found} values per component, grid has {expected} nodes")]
    Dimension { expected: usize, found: usize },
    #[error("invalid solver parameter: {0}")]
    Parameter(&'static str),
}

/// Tolerance on the cone margin.
pub const CONE_TOL: f64 = 1e-9;

/// Shared nodes plus one dense weight matrix per equation.
#[derive(Debug, Clone)]
pub struct Grid {
    nodes: Vec<f64>,
    models: [KernelModel; 2],
    /// Row-major `n × n`; row `j` realizes `∫ k(t_j, s) g(s) ds`.
    weights: [Vec<f64>; 2],
}

/// Indices of the 4-point interpolation stencil for interval `l`.
fn stencil(l: usize, n: usize) -> [usize; 4] {
    let start = l.saturating_sub(1).min(n - 4);
    [start, start + 1, start + 2, start + 3]
}

fn lagrange(xs: [f64; 4], s: f64) -> [f64; 4] {
    let mut out = [1.0; 4];
    for q in 0..4 {
        for r in 0..4 {
            if r != q {
                out[q] *= (s - xs[r]) / (xs[q] - xs[r]);
            }
        }
    }
    out
}

impl Grid {
    /// Nodes are `j/n` for `j = 0..=n` merged with `η₁, η₂, b₁, b₂`.
    pub fn build(models: [KernelModel; 2], n: usize, quad: &QuadratureSpec) -> Result<Self, SolveError> {
        if n < 8 {
            return Err(SolveError::Parameter("grid size must be at least 8"));
        }
        let mut nodes: Vec<f64> = (0..=n).map(|j| j as f64 / n as f64).collect();
        for m in &models {
            nodes.push(m.eta());
            nodes.push(m.b());
        }
        nodes.sort_by(f64::total_cmp);
        nodes.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

        let intervals = nodes.len() - 1;
        let spec = QuadratureSpec {
            abs_tol: quad.abs_tol / intervals as f64,
            ..*quad
        };
        let integ = Integrator::new(spec)?;
        let weights = [
            weight_matrix(&models[0], &nodes, &integ)?,
            weight_matrix(&models[1], &nodes, &integ)?,
        ];
        Ok(Self { nodes, models, weights })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn models(&self) -> &[KernelModel; 2] {
        &self.models
    }

    /// Weight row of node `j` for equation `e` (0-based).
    pub fn weights(&self, e: usize, j: usize) -> &[f64] {
        let n = self.len();
        &self.weights[e][j * n..(j + 1) * n]
    }

    /// `Σ_ℓ w_{jℓ} g_ℓ` for every node `j`.
    pub fn apply_weights(&self, e: usize, g: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|j| self.weights(e, j).iter().zip(g).map(|(w, g)| w * g).sum())
            .collect()
    }

    /// One application of the discrete operator `T`.
    pub fn apply_t(&self, f: [&Expr; 2], u: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>), SolveError> {
        let n = self.len();
        for len in [u.len(), v.len()] {
            if len != n {
                return Err(SolveError::Dimension {
                    expected: n,
                    found: len,
                });
            }
        }
        let mut out = Vec::with_capacity(2);
        for (e, f) in f.into_iter().enumerate() {
            let g = self
                .nodes
                .iter()
                .zip(u.iter().zip(v))
                .map(|(&s, (&u, &v))| {
                    f.eval(s, u, v).map_err(|error| SolveError::Eval {
                        equation: e + 1,
                        source: LocatedEvalError { error, at: (s, u, v) },
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            out.push(self.apply_weights(e, &g));
        }
        let v_out = out.pop().expect("two components");
        let u_out = out.pop().expect("two components");
        Ok((u_out, v_out))
    }
}

fn weight_matrix(model: &KernelModel, nodes: &[f64], integ: &Integrator) -> Result<Vec<f64>, QuadError> {
    let n = nodes.len();
    let mut w = vec![0.0; n * n];
    for (j, &t) in nodes.iter().enumerate() {
        let row = &mut w[j * n..(j + 1) * n];
        for l in 0..n - 1 {
            let st = stencil(l, n);
            let xs = st.map(|i| nodes[i]);
            let local = integ.integrate_vec(
                &mut |s| {
                    let k = model.k(t, s);
                    lagrange(xs, s).map(|b| k * b)
                },
                nodes[l],
                nodes[l + 1],
                &[],
            )?;
            for (q, &i) in st.iter().enumerate() {
                row[i] += local[q];
            }
        }
    }
    Ok(w)
}

/// Picard iterate with its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSolution {
    pub nodes: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// `‖x - T(x)‖∞` over the nodes, for the returned `x`.
    pub residual_sup: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
            damping: 0.5,
        }
    }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `x ← (1-d)·x + d·T(x)` until `‖x - T(x)‖∞ ≤ tol` or `max_iter` updates.
/// Running out of iterations is reported through `converged`, not an error.
pub fn solve_picard(
    grid: &Grid,
    f: [&Expr; 2],
    init: (Vec<f64>, Vec<f64>),
    opts: &PicardOptions,
) -> Result<GridSolution, SolveError> {
    if !(opts.tol > 0.0) {
        return Err(SolveError::Parameter("tolerance must be positive"));
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(SolveError::Parameter("damping must lie in (0, 1]"));
    }
    let (mut u, mut v) = init;
    let d = opts.damping;
    let mut iterations = 0;
    loop {
        let (tu, tv) = grid.apply_t(f, &u, &v)?;
        let residual = sup_diff(&u, &tu).max(sup_diff(&v, &tv));
        let converged = residual <= opts.tol;
        if converged || iterations >= opts.max_iter {
            return Ok(GridSolution {
                nodes: grid.nodes.clone(),
                u,
                v,
                residual_sup: residual,
                iterations,
                converged,
            });
        }
        for (x, t) in u.iter_mut().zip(&tu).chain(v.iter_mut().zip(&tv)) {
            *x = (1.0 - d) * *x + d * t;
        }
        iterations += 1;
    }
}

/// Cone membership of one component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeComponent {
    /// Smallest nodal value on `[0, b]`.
    pub min_on_interval: f64,
    /// `c · ‖w‖∞` over all nodes.
    pub scaled_norm: f64,
    pub margin: f64,
    pub in_cone: bool,
}

impl ConeComponent {
    pub fn evaluate(nodes: &[f64], values: &[f64], model: &KernelModel) -> Self {
        let b = model.b();
        let min_on_interval = nodes
            .iter()
            .zip(values)
            .filter(|(&t, _)| t <= b + 1e-14)
            .map(|(_, &w)| w)
            .fold(f64::INFINITY, f64::min);
        let norm = values.iter().fold(0.0f64, |acc, w| acc.max(w.abs()));
        let scaled_norm = model.c() * norm;
        let margin = min_on_interval - scaled_norm;
        Self {
            min_on_interval,
            scaled_norm,
            margin,
            in_cone: margin >= -CONE_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeReport {
    pub u: ConeComponent,
    pub v: ConeComponent,
}

impl ConeReport {
    pub fn in_cone(&self) -> bool {
        self.u.in_cone && self.v.in_cone
    }
}

pub fn cone_metrics(sol: &GridSolution, models: &[KernelModel; 2]) -> ConeReport {
    ConeReport {
        u: ConeComponent::evaluate(&sol.nodes, &sol.u, &models[0]),
        v: ConeComponent::evaluate(&sol.nodes, &sol.v, &models[1]),
    }
}
