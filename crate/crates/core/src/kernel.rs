//! Green's kernel of the nonlocal Caputo problem
//!
//! ```text
//!   D^α w + y = 0,   w'(0) = 0,   β D^(α-1) w(1) + w(η) = 0
//! ```
//!
//! has the solution `w(t) = ∫ k(t,s) y(s) ds` with
//!
//! ```text
//!   k(t,s) = β + 1{s ≤ η} (η-s)^(α-1)/Γ(α) - 1{s ≤ t} (t-s)^(α-1)/Γ(α).
//! ```
//!
//! The positivity interval is `[0, b]`; [`KernelModel`] carries the envelope
//! `Φ` and the cone constant `c` that go with it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::specialfn::gamma_checked;

/// Absolute tolerance used by the sampled bound check.
pub const BOUND_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("order alpha = {0} must lie in (1, 2]")]
    OrderOutOfRange(f64),
    #[error("beta = {0} must be positive")]
    NonpositiveBeta(f64),
    #[error("eta = {0} must lie in [0, 1]")]
    EtaOutOfRange(f64),
    #[error("beta*Gamma(alpha) = {lhs} must be below (1-eta)^(alpha-1) = {rhs}")]
    FocusCaseViolated { lhs: f64, rhs: f64 },
    #[error("interval end b = {b}: need eta <= b < 1 and beta*Gamma(alpha) = {lhs} > (b-eta)^(alpha-1) = {rhs}")]
    IntervalChoiceViolated { b: f64, lhs: f64, rhs: f64 },
    #[error("{name} = {value} is outside [0, 1]")]
    Domain { name: &'static str, value: f64 },
}

/// Validated fractional data `(α, β, η, b)` of one equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProblemParams {
    alpha: f64,
    beta: f64,
    eta: f64,
    b: f64,
    #[serde(skip)]
    gamma_alpha: f64,
}

impl ProblemParams {
    /// Checks every inequality the kernel theory relies on, in order.
    pub fn new(alpha: f64, beta: f64, eta: f64, b: f64) -> Result<Self, KernelError> {
        if !(alpha > 1.0 && alpha <= 2.0) {
            return Err(KernelError::OrderOutOfRange(alpha));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(KernelError::NonpositiveBeta(beta));
        }
        if !(0.0..=1.0).contains(&eta) {
            return Err(KernelError::EtaOutOfRange(eta));
        }
        let gamma_alpha = gamma_checked(alpha).expect("alpha > 1");
        let lhs = beta * gamma_alpha;
        let rhs = (1.0 - eta).powf(alpha - 1.0);
        if lhs >= rhs {
            return Err(KernelError::FocusCaseViolated { lhs, rhs });
        }
        if !(b >= eta && b < 1.0) {
            let rhs = if b >= eta {
                (b - eta).powf(alpha - 1.0)
            } else {
                f64::NAN
            };
            return Err(KernelError::IntervalChoiceViolated { b, lhs, rhs });
        }
        let rhs = (b - eta).powf(alpha - 1.0);
        if lhs <= rhs {
            return Err(KernelError::IntervalChoiceViolated { b, lhs, rhs });
        }
        Ok(Self {
            alpha,
            beta,
            eta,
            b,
            gamma_alpha,
        })
    }

    /// Like [`ProblemParams::new`] but picks `b` with [`default_b`].
    pub fn with_default_b(alpha: f64, beta: f64, eta: f64) -> Result<Self, KernelError> {
        Self::new(alpha, beta, eta, default_b(alpha, beta, eta))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Right end of the positivity interval `[0, b]`.
    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn gamma_alpha(&self) -> f64 {
        self.gamma_alpha
    }

    /// `k(t, s)`. Both indicator terms are closed on the left (`s ≤ η`,
    /// `s ≤ t`), where the power term vanishes anyway.
    pub fn kernel(&self, t: f64, s: f64) -> Result<f64, KernelError> {
        check_unit("t", t)?;
        check_unit("s", s)?;
        Ok(self.kernel_unchecked(t, s))
    }

    #[inline]
    pub(crate) fn kernel_unchecked(&self, t: f64, s: f64) -> f64 {
        let p = self.alpha - 1.0;
        let mut k = self.beta;
        if s <= self.eta {
            k += (self.eta - s).powf(p) / self.gamma_alpha;
        }
        if s <= t {
            k -= (t - s).powf(p) / self.gamma_alpha;
        }
        k
    }

    /// Envelope `Φ(s)`.
    pub fn phi(&self, s: f64) -> Result<f64, KernelError> {
        check_unit("s", s)?;
        Ok(self.phi_unchecked(s))
    }

    #[inline]
    pub(crate) fn phi_unchecked(&self, s: f64) -> f64 {
        let p = self.alpha - 1.0;
        if s > self.eta {
            (1.0 - self.eta).powf(p) / self.gamma_alpha - self.beta
        } else {
            self.beta + (self.eta - s).powf(p) / self.gamma_alpha
        }
    }

    /// Cone constant `c`, the smaller of the two ratios that control
    /// `k(t,s) ≥ c Φ(s)` on `[0, b]`.
    pub fn cone_constant(&self) -> f64 {
        let p = self.alpha - 1.0;
        let bg = self.beta * self.gamma_alpha;
        let num = bg - (self.b - self.eta).powf(p);
        let first = num / ((1.0 - self.eta).powf(p) - bg);
        let second = num / (bg + self.eta.powf(p));
        first.min(second)
    }
}

/// Default right end of the positivity interval: `(η+1)/2` when admissible,
/// otherwise halfway between `η` and the largest admissible `b`. Larger `b`
/// means a smaller cone constant.
pub fn default_b(alpha: f64, beta: f64, eta: f64) -> f64 {
    let mid = 0.5 * (eta + 1.0);
    let Ok(g) = gamma_checked(alpha) else { return mid };
    if alpha <= 1.0 || beta * g > (mid - eta).powf(alpha - 1.0) {
        return mid;
    }
    let reach = (beta * g).powf(1.0 / (alpha - 1.0));
    (eta + 0.5 * reach).min(mid)
}

fn check_unit(name: &'static str, value: f64) -> Result<(), KernelError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(KernelError::Domain { name, value })
    }
}

/// Kernel together with its cone constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelModel {
    params: ProblemParams,
    c: f64,
}

impl KernelModel {
    pub fn new(params: ProblemParams) -> Self {
        let c = params.cone_constant();
        Self { params, c }
    }

    /// Model with a caller-chosen cone constant. Used to probe the bound
    /// checks; nothing downstream assumes the constant is the computed one.
    pub fn with_cone_constant(params: ProblemParams, c: f64) -> Self {
        Self { params, c }
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn b(&self) -> f64 {
        self.params.b
    }

    pub fn eta(&self) -> f64 {
        self.params.eta
    }

    #[inline]
    pub fn k(&self, t: f64, s: f64) -> f64 {
        self.params.kernel_unchecked(t, s)
    }

    #[inline]
    pub fn phi(&self, s: f64) -> f64 {
        self.params.phi_unchecked(s)
    }

    /// Samples `|k| ≤ Φ` on a uniform `n_t × n_s` grid of `[0,1]²` and
    /// `k ≥ cΦ` on a uniform `n_t × n_s` grid of `[0,b] × [0,1]`.
    pub fn verify_bounds(&self, n_t: usize, n_s: usize) -> BoundReport {
        assert!(n_t >= 2 && n_s >= 2, "need at least two samples per axis");
        let b = self.b();
        let mut upper = Violation::default();
        let mut lower = Violation::default();
        for j in 0..n_s {
            let s = j as f64 / (n_s - 1) as f64;
            let phi = self.phi(s);
            for i in 0..n_t {
                let t = i as f64 / (n_t - 1) as f64;
                upper.record(self.k(t, s).abs() - phi, t, s);
                let t = b * i as f64 / (n_t - 1) as f64;
                lower.record(self.c * phi - self.k(t, s), t, s);
            }
        }
        BoundReport {
            n_t,
            n_s,
            upper_passed: upper.amount <= BOUND_TOL,
            lower_passed: lower.amount <= BOUND_TOL,
            upper,
            lower,
        }
    }
}

/// Worst sampled excess of one inequality; `amount` is 0 when it never fails.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Violation {
    pub amount: f64,
    pub t: f64,
    pub s: f64,
}

impl Violation {
    fn record(&mut self, excess: f64, t: f64, s: f64) {
        if excess > self.amount {
            *self = Self { amount: excess, t, s };
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n_t: usize,
    pub n_s: usize,
    /// Worst excess of `|k| - Φ` over `[0,1]²`.
    pub upper: Violation,
    /// Worst excess of `cΦ - k` over `[0,b] × [0,1]`.
    pub lower: Violation,
    pub upper_passed: bool,
    pub lower_passed: bool,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.upper_passed && self.lower_passed
    }
}
