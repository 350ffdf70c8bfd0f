//! A fully specified two-equation problem: kernels, thresholds, nonlinearities.

use serde::{Deserialize, Serialize};

use crate::exprlang::Expr;
use crate::kernel::{KernelModel, ProblemParams};
use crate::quad::{ConstantsReport, QuadError, QuadratureSpec};

/// Knobs for the condition checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Settings {
    /// Use the envelope estimates `m̂`, `M̂` instead of `m`, `M`.
    pub conservative: bool,
    /// Strict inequalities must hold by at least this much.
    pub margin: f64,
    /// Samples per axis of the coarse extremum scan.
    pub grid: usize,
    pub refine_rounds: usize,
    /// Lipschitz constants of `f₁`, `f₂` in `(t, u, v)` (Euclidean norm).
    pub lipschitz: Option<[f64; 2]>,
    pub quad: QuadratureSpec,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            conservative: true,
            margin: 1e-9,
            grid: 21,
            refine_rounds: 8,
            lipschitz: None,
            quad: QuadratureSpec::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Equation {
    pub model: KernelModel,
    pub constants: ConstantsReport,
    pub f: Expr,
}

#[derive(Debug, Clone)]
pub struct Problem {
    equations: [Equation; 2],
    settings: Settings,
}

impl Problem {
    /// Builds both kernels and computes their threshold constants.
    pub fn new(params: [ProblemParams; 2], f: [Expr; 2], settings: Settings) -> Result<Self, QuadError> {
        let [p1, p2] = params;
        let [f1, f2] = f;
        let build = |p: ProblemParams, f: Expr| -> Result<Equation, QuadError> {
            let model = KernelModel::new(p);
            let constants = ConstantsReport::compute(&model, &settings.quad)?;
            Ok(Equation { model, constants, f })
        };
        Ok(Self {
            equations: [build(p1, f1)?, build(p2, f2)?],
            settings,
        })
    }

    /// Reuses already computed constants, e.g. to swap nonlinearities.
    pub fn with_nonlinearities(&self, f: [Expr; 2]) -> Self {
        let mut out = self.clone();
        let [f1, f2] = f;
        out.equations[0].f = f1;
        out.equations[1].f = f2;
        out
    }

    pub fn with_settings(&self, settings: Settings) -> Self {
        let mut out = self.clone();
        out.settings = settings;
        out
    }

    pub fn equation(&self, i: usize) -> &Equation {
        &self.equations[i]
    }

    pub fn equations(&self) -> &[Equation; 2] {
        &self.equations
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    pub fn models(&self) -> [KernelModel; 2] {
        [self.equations[0].model, self.equations[1].model]
    }

    pub fn cone_constants(&self) -> (f64, f64) {
        (self.equations[0].model.c(), self.equations[1].model.c())
    }

    /// `(m, M)` for equation `i` (0-based) under the current mode.
    pub fn thresholds(&self, i: usize) -> (f64, f64) {
        self.equations[i].constants.thresholds(self.settings.conservative)
    }
}
