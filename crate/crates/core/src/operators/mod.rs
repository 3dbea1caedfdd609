//! Generators and one-step transition operators of the intensity process,
//! evaluated on test functions, plus the sup-norm distance between the
//! rescaled one-step operator and the generator.
//!
//! Exponential kernel, state `y`:
//! `A f(y) = beta (lambda_inf - y) f'(y) + y int (f(y + alpha z) - f(y)) dnu(z)`,
//! `T f(y) = f(c + y e) (1 - y h) 1{y h < 1}
//!         + int f(c + (y + alpha z) e) dnu(z) (y h 1{y h < 1} + 1{y h >= 1})`
//! with `e = exp(-beta h)` and `c = lambda_inf (1 - e)`.
//! The Erlang versions act on `(y, v) = (lambda, xi)`.

pub mod functions;
pub mod marks;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use functions::{PlanarFunction, ScalarFunction};
pub use marks::{MarkQuadrature, MarkRule};

use crate::dthp::{step, ChainState, StepCoefficients};
use crate::model::{HawkesParams, KernelKind};
use crate::rng::{PathRng, PathSeed};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperatorError {
    #[error("no {rule:?} quadrature for {marks} marks and no fallback configured")]
    QuadratureUnavailable {
        rule: MarkQuadrature,
        marks: &'static str,
    },
    #[error("operator for the {expected} kernel called with {found} parameters")]
    WrongKernel {
        expected: KernelKind,
        found: KernelKind,
    },
    #[error("test function has unbounded support; set an explicit grid maximum")]
    UnboundedSupport,
    #[error("invalid operator input: {0}")]
    InvalidInput(String),
}

/// Quadrature and sup-grid settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorConfig {
    pub mark_quadrature: MarkQuadrature,
    /// Used when `mark_quadrature` does not apply to the mark law.
    pub fallback: Option<MarkQuadrature>,
    /// Points of the one-dimensional sup grid.
    pub grid_points: usize,
    /// Points per axis of the two-dimensional sup grid.
    pub planar_points: usize,
    /// Overrides the computed grid maximum.
    pub grid_max: Option<f64>,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        Self {
            mark_quadrature: MarkQuadrature::Auto,
            fallback: Some(MarkQuadrature::MonteCarlo {
                samples: 4096,
                seed: 0x5eed,
            }),
            grid_points: 10_000,
            planar_points: 201,
            grid_max: None,
        }
    }
}

/// One row of a generator-convergence report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormRow {
    #[serde(rename = "N")]
    pub n: u64,
    pub h: f64,
    pub sup_norm_error: f64,
    pub argmax_y: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub argmax_v: Option<f64>,
}

/// Operators for one parameter set with a resolved mark rule.
#[derive(Debug, Clone)]
pub struct Operators<'a> {
    params: &'a HawkesParams,
    rule: MarkRule,
    cfg: OperatorConfig,
}

impl<'a> Operators<'a> {
    pub fn new(params: &'a HawkesParams, cfg: OperatorConfig) -> Result<Self, OperatorError> {
        let rule = MarkRule::resolve(&params.marks, cfg.mark_quadrature, cfg.fallback)?;
        Ok(Self { params, rule, cfg })
    }

    pub fn rule(&self) -> &MarkRule {
        &self.rule
    }

    pub fn params(&self) -> &HawkesParams {
        self.params
    }

    fn expect_kind(&self, expected: KernelKind) -> Result<(), OperatorError> {
        let found = self.params.kind();
        if found != expected {
            return Err(OperatorError::WrongKernel { expected, found });
        }
        Ok(())
    }

    /// `A_e f(y)`.
    pub fn generator_exp(&self, f: &dyn ScalarFunction, y: f64) -> f64 {
        let p = self.params;
        let drift = p.kernel.beta * (p.lambda_inf - y) * f.d1(y);
        if y == 0.0 || p.kernel.alpha == 0.0 {
            return drift;
        }
        let alpha = p.kernel.alpha;
        let fy = f.value(y);
        let jumped = self.rule.integrate(|z| f.value(y + alpha * z));
        drift + y * (jumped - fy * self.rule.total_weight())
    }

    /// `A_E f(y, v)`.
    pub fn generator_erlang(&self, f: &dyn PlanarFunction, y: f64, v: f64) -> f64 {
        let p = self.params;
        let beta = p.kernel.beta;
        let (fl, fx) = f.gradient(y, v);
        let drift = (v + beta * (p.lambda_inf - y)) * fl - beta * v * fx;
        if y == 0.0 || p.kernel.alpha == 0.0 {
            return drift;
        }
        let alpha = p.kernel.alpha;
        let f0 = f.value(y, v);
        let jumped = self.rule.integrate(|z| f.value(y, v + alpha * z));
        drift + y * (jumped - f0 * self.rule.total_weight())
    }

    /// `T_e f(y)` for step `h`.
    pub fn one_step_exp(&self, f: &dyn ScalarFunction, y: f64, h: f64) -> f64 {
        let c = StepCoefficients::new(self.params, h);
        self.one_step_exp_with(f, y, &c)
    }

    fn one_step_exp_with(&self, f: &dyn ScalarFunction, y: f64, c: &StepCoefficients) -> f64 {
        let p_jump = y * c.h;
        let jump_branch = |this: &Self| {
            let alpha = this.params.kernel.alpha;
            this.rule
                .integrate(|z| f.value(c.relax + (y + alpha * z) * c.decay))
        };
        if p_jump >= 1.0 {
            return jump_branch(self);
        }
        let quiet = f.value(c.relax + y * c.decay) * (1.0 - p_jump);
        if p_jump == 0.0 {
            return quiet;
        }
        quiet + jump_branch(self) * p_jump
    }

    /// `T_E f(y, v)` for step `h`.
    pub fn one_step_erlang(&self, f: &dyn PlanarFunction, y: f64, v: f64, h: f64) -> f64 {
        let c = StepCoefficients::new(self.params, h);
        self.one_step_erlang_with(f, y, v, &c)
    }

    fn one_step_erlang_with(
        &self,
        f: &dyn PlanarFunction,
        y: f64,
        v: f64,
        c: &StepCoefficients,
    ) -> f64 {
        let p_jump = y * c.h;
        let base = c.relax + y * c.decay;
        let jump_branch = |this: &Self| {
            let alpha = this.params.kernel.alpha;
            this.rule.integrate(|z| {
                let a = (v + alpha * z) * c.decay;
                f.value(base + c.h * a, a)
            })
        };
        if p_jump >= 1.0 {
            return jump_branch(self);
        }
        let a = v * c.decay;
        let quiet = f.value(base + c.h * a, a) * (1.0 - p_jump);
        if p_jump == 0.0 {
            return quiet;
        }
        quiet + jump_branch(self) * p_jump
    }

    /// Upper end of the sup grid: beyond it `f`, `A f` and `T f` all vanish.
    pub fn grid_max(&self, support: f64, h: f64) -> Result<f64, OperatorError> {
        if let Some(m) = self.cfg.grid_max {
            return Ok(m);
        }
        if !support.is_finite() {
            return Err(OperatorError::UnboundedSupport);
        }
        let p = self.params;
        let reach = support + p.kernel.alpha * self.rule.largest_node() + p.lambda_inf + 1.0;
        let pull_in = p.lambda_inf + (support - p.lambda_inf) * (p.kernel.beta * h).exp() + 1.0;
        Ok(reach.max(pull_in))
    }

    /// `sup_y |(T f(y) - f(y)) / h - A f(y)|` over the uniform grid on
    /// `[0, grid_max]`, with `h = horizon / n`.
    pub fn convergence_norm_exp(
        &self,
        f: &dyn ScalarFunction,
        n: u64,
        horizon: f64,
    ) -> Result<NormRow, OperatorError> {
        self.expect_kind(KernelKind::Exponential)?;
        let h = check_step(n, horizon)?;
        let top = self.grid_max(f.support_bound(), h)?;
        let m = self.cfg.grid_points.max(2);
        let c = StepCoefficients::new(self.params, h);
        let (err, at) = (0..m)
            .into_par_iter()
            .map(|j| {
                let y = top * j as f64 / (m - 1) as f64;
                let discrete = (self.one_step_exp_with(f, y, &c) - f.value(y)) / h;
                ((discrete - self.generator_exp(f, y)).abs(), y)
            })
            .reduce(|| (0.0, 0.0), max_by_error);
        Ok(NormRow {
            n,
            h,
            sup_norm_error: err,
            argmax_y: at,
            argmax_v: None,
        })
    }

    /// Two-dimensional analogue of [`Self::convergence_norm_exp`].
    pub fn convergence_norm_erlang(
        &self,
        f: &dyn PlanarFunction,
        n: u64,
        horizon: f64,
    ) -> Result<NormRow, OperatorError> {
        self.expect_kind(KernelKind::Erlang)?;
        let h = check_step(n, horizon)?;
        let support = f.support_bound();
        let top_y = self.grid_max(support, h)?;
        let top_v = match self.cfg.grid_max {
            Some(m) => m,
            None => top_y.max(support * (self.params.kernel.beta * h).exp() + 1.0),
        };
        let m = self.cfg.planar_points.max(2);
        let c = StepCoefficients::new(self.params, h);
        let ((err, at_y), at_v) = (0..m * m)
            .into_par_iter()
            .map(|idx| {
                let y = top_y * (idx / m) as f64 / (m - 1) as f64;
                let v = top_v * (idx % m) as f64 / (m - 1) as f64;
                let discrete = (self.one_step_erlang_with(f, y, v, &c) - f.value(y, v)) / h;
                (((discrete - self.generator_erlang(f, y, v)).abs(), y), v)
            })
            .reduce(
                || ((0.0, 0.0), 0.0),
                |a, b| if b.0 .0 > a.0 .0 { b } else { a },
            );
        Ok(NormRow {
            n,
            h,
            sup_norm_error: err,
            argmax_y: at_y,
            argmax_v: Some(at_v),
        })
    }
}

fn max_by_error(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
        b
    } else {
        a
    }
}

fn check_step(n: u64, horizon: f64) -> Result<f64, OperatorError> {
    if n == 0 || !(horizon.is_finite() && horizon > 0.0) {
        return Err(OperatorError::InvalidInput(format!(
            "need N >= 1 and a positive horizon, got N = {n}, T = {horizon}"
        )));
    }
    Ok(horizon / n as f64)
}

/// `A_e f(y)` for one call.
pub fn generator_exp(
    f: &dyn ScalarFunction,
    y: f64,
    params: &HawkesParams,
    cfg: &OperatorConfig,
) -> Result<f64, OperatorError> {
    let ops = Operators::new(params, *cfg)?;
    ops.expect_kind(KernelKind::Exponential)?;
    Ok(ops.generator_exp(f, y))
}

/// `A_E f(y, v)` for one call.
pub fn generator_erlang(
    f: &dyn PlanarFunction,
    y: f64,
    v: f64,
    params: &HawkesParams,
    cfg: &OperatorConfig,
) -> Result<f64, OperatorError> {
    let ops = Operators::new(params, *cfg)?;
    ops.expect_kind(KernelKind::Erlang)?;
    Ok(ops.generator_erlang(f, y, v))
}

/// `T_e f(y)` for one call.
pub fn one_step_exp(
    f: &dyn ScalarFunction,
    y: f64,
    h: f64,
    params: &HawkesParams,
    cfg: &OperatorConfig,
) -> Result<f64, OperatorError> {
    let ops = Operators::new(params, *cfg)?;
    ops.expect_kind(KernelKind::Exponential)?;
    Ok(ops.one_step_exp(f, y, h))
}

/// `T_E f(y, v)` for one call.
pub fn one_step_erlang(
    f: &dyn PlanarFunction,
    y: f64,
    v: f64,
    h: f64,
    params: &HawkesParams,
    cfg: &OperatorConfig,
) -> Result<f64, OperatorError> {
    let ops = Operators::new(params, *cfg)?;
    ops.expect_kind(KernelKind::Erlang)?;
    Ok(ops.one_step_erlang(f, y, v, h))
}

/// Kernel-appropriate test function for the norm check.
#[derive(Debug, Clone, Copy)]
pub enum TestFunctionRef<'f> {
    Scalar(&'f dyn ScalarFunction),
    Planar(&'f dyn PlanarFunction),
}

/// `sup |(T^N f - f) / h_N - A f|` with `h_N = horizon / n`.
pub fn generator_convergence_norm(
    f: TestFunctionRef<'_>,
    params: &HawkesParams,
    n: u64,
    horizon: f64,
    cfg: &OperatorConfig,
) -> Result<NormRow, OperatorError> {
    let ops = Operators::new(params, *cfg)?;
    match f {
        TestFunctionRef::Scalar(f) => ops.convergence_norm_exp(f, n, horizon),
        TestFunctionRef::Planar(f) => ops.convergence_norm_erlang(f, n, horizon),
    }
}

/// Monte Carlo estimate of `E[f(next state)]` by brute-force chain steps
/// from `(y, v)`; returns `(mean, standard error)`. `f` sees `(lambda, xi)`.
pub fn monte_carlo_one_step<F: Fn(f64, f64) -> f64 + Sync>(
    f: F,
    y: f64,
    v: f64,
    h: f64,
    params: &HawkesParams,
    draws: u64,
    seed: u64,
) -> (f64, f64) {
    const CHUNK: u64 = 1 << 14;
    let c = StepCoefficients::new(params, h);
    let start = ChainState { l: y, a: v, k: 0 };
    let chunks = draws.div_ceil(CHUNK);
    let (sum, sum_sq) = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = PathRng::new(PathSeed::new(seed, chunk));
            let count = CHUNK.min(draws - chunk * CHUNK);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                let u = rng.uniform();
                let zeta = params.marks.sample(&mut rng);
                let next = step(params.kind(), start, u, zeta, &c).next;
                let val = f(next.l, next.a);
                s += val;
                s2 += val * val;
            }
            (s, s2)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = draws as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}
