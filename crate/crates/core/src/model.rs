//! Parameter model: kernels, mark distributions, stability, grids and the
//! first-moment oracles shared by the simulators and the verification layer.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{word_to_index, word_to_open_unit, PathRng};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("parameter `{name}` must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("parameter `{name}` must be nonnegative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("parameter `{name}` is not finite")]
    NonFinite { name: &'static str },
    #[error("unstable {kernel} kernel: alpha * E[mark] = {load} must be below {bound}")]
    Unstable {
        kernel: KernelKind,
        load: f64,
        bound: f64,
    },
    #[error("invalid mark distribution: {0}")]
    InvalidMarks(String),
    #[error(
        "grid needs a positive horizon and at least one step (horizon {horizon}, steps {steps})"
    )]
    InvalidGrid { horizon: f64, steps: u64 },
    #[error("negative time {0}")]
    NegativeTime(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelKind {
    /// `phi(u) = alpha * exp(-beta u)`.
    Exponential,
    /// `phi(u) = alpha * u * exp(-beta u)`.
    Erlang,
}

impl std::fmt::Display for KernelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KernelKind::Exponential => write!(f, "exponential"),
            KernelKind::Erlang => write!(f, "erlang"),
        }
    }
}

/// Decay kernel with excitation scale `alpha` and decay rate `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub alpha: f64,
    pub beta: f64,
}

impl KernelSpec {
    pub fn exponential(alpha: f64, beta: f64) -> Self {
        Self {
            kind: KernelKind::Exponential,
            alpha,
            beta,
        }
    }

    pub fn erlang(alpha: f64, beta: f64) -> Self {
        Self {
            kind: KernelKind::Erlang,
            alpha,
            beta,
        }
    }

    /// Upper bound on `alpha * E[mark]` for a stable process.
    pub fn stability_bound(&self) -> f64 {
        match self.kind {
            KernelKind::Exponential => self.beta,
            KernelKind::Erlang => self.beta * self.beta,
        }
    }
}

/// Distribution of the i.i.d. marks (losses) attached to events.
#[derive(Debug, Clone, PartialEq)]
pub enum MarkDistribution {
    Constant(f64),
    /// Exponential with the given rate (mean `1 / rate`).
    ExponentialRate(f64),
    /// Raw samples, resampled uniformly with replacement.
    Empirical(Vec<f64>),
}

impl MarkDistribution {
    pub fn mean(&self) -> f64 {
        match self {
            MarkDistribution::Constant(c) => *c,
            MarkDistribution::ExponentialRate(r) => 1.0 / r,
            MarkDistribution::Empirical(s) => s.iter().sum::<f64>() / s.len() as f64,
        }
    }

    pub fn second_moment(&self) -> f64 {
        match self {
            MarkDistribution::Constant(c) => c * c,
            MarkDistribution::ExponentialRate(r) => 2.0 / (r * r),
            MarkDistribution::Empirical(s) => s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64,
        }
    }

    /// Draws one mark. Always consumes exactly one word of the stream,
    /// whatever the variant, so stream layouts do not depend on the mark law.
    #[inline]
    pub fn sample(&self, rng: &mut PathRng) -> f64 {
        let word = rng.next_word();
        match self {
            MarkDistribution::Constant(c) => *c,
            MarkDistribution::ExponentialRate(r) => -word_to_open_unit(word).ln() / r,
            MarkDistribution::Empirical(s) => s[word_to_index(word, s.len())],
        }
    }

    fn check(&self) -> Result<(), ParamError> {
        let positive = |name: &'static str, v: f64| {
            if !v.is_finite() {
                Err(ParamError::NonFinite { name })
            } else if v <= 0.0 {
                Err(ParamError::NonPositive { name, value: v })
            } else {
                Ok(())
            }
        };
        match self {
            MarkDistribution::Constant(c) => positive("marks.value", *c),
            MarkDistribution::ExponentialRate(r) => positive("marks.rate", *r),
            MarkDistribution::Empirical(s) => {
                if s.is_empty() {
                    return Err(ParamError::InvalidMarks(
                        "empirical distribution needs at least one sample".into(),
                    ));
                }
                s.iter().try_for_each(|v| positive("marks.samples", *v))
            }
        }
    }
}

/// Full parameter set of a marked Hawkes process with Markov kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct HawkesParams {
    pub kernel: KernelSpec,
    /// Long-run baseline `lambda_inf`.
    pub lambda_inf: f64,
    /// Initial intensity `x`.
    pub x0: f64,
    pub marks: MarkDistribution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamWarning {
    /// `x0 = 0`: well posed, but excluded by the usual `x > 0` assumption.
    ZeroInitialIntensity,
    /// `alpha = 0`: no self-excitation, the process is (in)homogeneous Poisson.
    NoExcitation,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Validation {
    pub warnings: Vec<ParamWarning>,
}

impl HawkesParams {
    pub fn new(kernel: KernelSpec, lambda_inf: f64, x0: f64, marks: MarkDistribution) -> Self {
        Self {
            kernel,
            lambda_inf,
            x0,
            marks,
        }
    }

    /// The parameter set of the published Fig. 4 trajectory:
    /// `alpha = 2, beta = 5, lambda_inf = 3, x = 4`, unit-rate exponential marks.
    pub fn fig4() -> Self {
        Self::new(
            KernelSpec::exponential(2.0, 5.0),
            3.0,
            4.0,
            MarkDistribution::ExponentialRate(1.0),
        )
    }

    pub fn kind(&self) -> KernelKind {
        self.kernel.kind
    }

    pub fn mean_mark(&self) -> f64 {
        self.marks.mean()
    }

    /// `alpha * E[mark]`, the quantity the stability condition bounds.
    pub fn load(&self) -> f64 {
        self.kernel.alpha * self.marks.mean()
    }

    pub fn validate(&self) -> Result<Validation, ParamError> {
        let finite = |name: &'static str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(ParamError::NonFinite { name })
            }
        };
        finite("alpha", self.kernel.alpha)?;
        finite("beta", self.kernel.beta)?;
        finite("lambda_inf", self.lambda_inf)?;
        finite("x0", self.x0)?;
        if self.kernel.beta <= 0.0 {
            return Err(ParamError::NonPositive {
                name: "beta",
                value: self.kernel.beta,
            });
        }
        if self.lambda_inf <= 0.0 {
            return Err(ParamError::NonPositive {
                name: "lambda_inf",
                value: self.lambda_inf,
            });
        }
        if self.kernel.alpha < 0.0 {
            return Err(ParamError::Negative {
                name: "alpha",
                value: self.kernel.alpha,
            });
        }
        if self.x0 < 0.0 {
            return Err(ParamError::Negative {
                name: "x0",
                value: self.x0,
            });
        }
        self.marks.check()?;

        let load = self.load();
        let bound = self.kernel.stability_bound();
        if load >= bound {
            return Err(ParamError::Unstable {
                kernel: self.kernel.kind,
                load,
                bound,
            });
        }

        let mut warnings = Vec::new();
        if self.x0 == 0.0 {
            log::warn!("x0 = 0: initial intensity is zero");
            warnings.push(ParamWarning::ZeroInitialIntensity);
        }
        if self.kernel.alpha == 0.0 {
            log::warn!("alpha = 0: no self-excitation, the process is Poisson");
            warnings.push(ParamWarning::NoExcitation);
        }
        Ok(Validation { warnings })
    }

    /// Same parameters with `beta` replaced.
    pub fn with_beta(&self, beta: f64) -> Self {
        let mut p = self.clone();
        p.kernel.beta = beta;
        p
    }
}

/// Uniform time grid on `[0, horizon]` with `steps` intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    horizon: f64,
    steps: u64,
}

impl GridSpec {
    pub fn new(horizon: f64, steps: u64) -> Result<Self, ParamError> {
        if !(horizon.is_finite() && horizon > 0.0) || steps == 0 {
            return Err(ParamError::InvalidGrid { horizon, steps });
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Step size `T / N`. Derived, never stored.
    pub fn step(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Grid time `t_i = i T / N`.
    pub fn time(&self, i: u64) -> f64 {
        if i == self.steps {
            self.horizon
        } else {
            self.horizon * i as f64 / self.steps as f64
        }
    }

    /// Index of the grid interval holding `t`, i.e. `floor(N t / T)`,
    /// corrected so that every grid time maps to its own index.
    pub fn index_of(&self, t: f64) -> u64 {
        let raw = (self.steps as f64 * t / self.horizon).floor();
        let mut i = if raw <= 0.0 {
            0
        } else {
            (raw as u64).min(self.steps)
        };
        if i < self.steps && self.time(i + 1) <= t {
            i += 1;
        }
        while i > 0 && self.time(i) > t {
            i -= 1;
        }
        i
    }
}

fn check_moment_args(params: &HawkesParams, t: f64) -> Result<(), ParamError> {
    params.validate()?;
    if !t.is_finite() {
        return Err(ParamError::NonFinite { name: "t" });
    }
    if t < 0.0 {
        return Err(ParamError::NegativeTime(t));
    }
    Ok(())
}

/// `E[lambda_t]`.
///
/// Exponential kernel: `mu* + (x - mu*) exp(-(beta - alpha m) t)` with
/// `mu* = beta lambda_inf / (beta - alpha m)`. Erlang kernel: the numerical
/// solution of the two-dimensional moment system, see [`erlang_moments`].
pub fn mean_intensity(params: &HawkesParams, t: f64) -> Result<f64, ParamError> {
    check_moment_args(params, t)?;
    Ok(match params.kind() {
        KernelKind::Exponential => {
            let (mu, kappa) = exp_moment_constants(params);
            mu + (params.x0 - mu) * (-kappa * t).exp()
        }
        KernelKind::Erlang => integrate_erlang_moments(params, t).intensity,
    })
}

/// `E[H_t] = int_0^t E[lambda_s] ds`.
pub fn mean_count(params: &HawkesParams, t: f64) -> Result<f64, ParamError> {
    check_moment_args(params, t)?;
    Ok(match params.kind() {
        KernelKind::Exponential => {
            let (mu, kappa) = exp_moment_constants(params);
            // (1 - e^{-kappa t}) / kappa, stable for small kappa * t
            let relax = -(-kappa * t).exp_m1() / kappa;
            mu * t + (params.x0 - mu) * relax
        }
        KernelKind::Erlang => integrate_erlang_moments(params, t).count,
    })
}

/// `E[L_t] = E[mark] E[H_t]` (marks independent of the counting process).
pub fn mean_loss(params: &HawkesParams, t: f64) -> Result<f64, ParamError> {
    Ok(params.mean_mark() * mean_count(params, t)?)
}

fn exp_moment_constants(params: &HawkesParams) -> (f64, f64) {
    let beta = params.kernel.beta;
    let kappa = beta - params.load();
    (beta * params.lambda_inf / kappa, kappa)
}

/// First moments of the Erlang state `(lambda, xi)` and of the event count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErlangMoments {
    pub intensity: f64,
    pub auxiliary: f64,
    pub count: f64,
}

/// Integrates
/// `dE[lambda]/dt = beta (lambda_inf - E[lambda]) + E[xi]`,
/// `dE[xi]/dt = -beta E[xi] + alpha m E[lambda]`,
/// `dE[H]/dt = E[lambda]`
/// with classical RK4 and step `1e-4 t`.
pub fn erlang_moments(params: &HawkesParams, t: f64) -> Result<ErlangMoments, ParamError> {
    check_moment_args(params, t)?;
    Ok(integrate_erlang_moments(params, t))
}

const ERLANG_ODE_STEPS: usize = 10_000;

fn integrate_erlang_moments(params: &HawkesParams, t: f64) -> ErlangMoments {
    let beta = params.kernel.beta;
    let load = params.load();
    let lam_inf = params.lambda_inf;
    let rhs = |s: [f64; 3]| -> [f64; 3] {
        [
            beta * (lam_inf - s[0]) + s[1],
            -beta * s[1] + load * s[0],
            s[0],
        ]
    };
    let mut s = [params.x0, 0.0, 0.0];
    if t > 0.0 {
        let dt = t / ERLANG_ODE_STEPS as f64;
        let axpy =
            |a: [f64; 3], k: [f64; 3], c: f64| [a[0] + c * k[0], a[1] + c * k[1], a[2] + c * k[2]];
        for _ in 0..ERLANG_ODE_STEPS {
            let k1 = rhs(s);
            let k2 = rhs(axpy(s, k1, 0.5 * dt));
            let k3 = rhs(axpy(s, k2, 0.5 * dt));
            let k4 = rhs(axpy(s, k3, dt));
            for i in 0..3 {
                s[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
    }
    ErlangMoments {
        intensity: s[0],
        auxiliary: s[1],
        count: s[2],
    }
}

/// Serialized parameter document:
/// `{kernel: "exp"|"erlang", alpha, beta, lambda_inf, x0, marks: {type, ...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsDoc {
    pub kernel: KernelTag,
    pub alpha: f64,
    pub beta: f64,
    pub lambda_inf: f64,
    pub x0: f64,
    pub marks: MarksDoc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelTag {
    #[serde(rename = "exp")]
    Exp,
    #[serde(rename = "erlang")]
    Erlang,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MarksDoc {
    Constant { value: f64 },
    Exponential { rate: f64 },
    Empirical { samples: Vec<f64> },
}

impl From<&ParamsDoc> for HawkesParams {
    fn from(doc: &ParamsDoc) -> Self {
        let kernel = match doc.kernel {
            KernelTag::Exp => KernelSpec::exponential(doc.alpha, doc.beta),
            KernelTag::Erlang => KernelSpec::erlang(doc.alpha, doc.beta),
        };
        let marks = match &doc.marks {
            MarksDoc::Constant { value } => MarkDistribution::Constant(*value),
            MarksDoc::Exponential { rate } => MarkDistribution::ExponentialRate(*rate),
            MarksDoc::Empirical { samples } => MarkDistribution::Empirical(samples.clone()),
        };
        HawkesParams::new(kernel, doc.lambda_inf, doc.x0, marks)
    }
}

impl From<&HawkesParams> for ParamsDoc {
    fn from(p: &HawkesParams) -> Self {
        ParamsDoc {
            kernel: match p.kind() {
                KernelKind::Exponential => KernelTag::Exp,
                KernelKind::Erlang => KernelTag::Erlang,
            },
            alpha: p.kernel.alpha,
            beta: p.kernel.beta,
            lambda_inf: p.lambda_inf,
            x0: p.x0,
            marks: match &p.marks {
                MarkDistribution::Constant(value) => MarksDoc::Constant { value: *value },
                MarkDistribution::ExponentialRate(rate) => MarksDoc::Exponential { rate: *rate },
                MarkDistribution::Empirical(samples) => MarksDoc::Empirical {
                    samples: samples.clone(),
                },
            },
        }
    }
}

#[derive(Debug, Error)]
pub enum ParseParamsError {
    #[error("malformed parameter document: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(#[from] ParamError),
}

/// Parses and validates a parameter document.
pub fn params_from_json(text: &str) -> Result<HawkesParams, ParseParamsError> {
    let doc: ParamsDoc = serde_json::from_str(text)?;
    let params = HawkesParams::from(&doc);
    params.validate()?;
    Ok(params)
}
