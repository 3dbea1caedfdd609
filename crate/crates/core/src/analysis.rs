//! Distributional comparison of chain marginals against the continuous-time
//! oracle: two-sample Kolmogorov–Smirnov, empirical 1-Wasserstein and the
//! marginal convergence experiment.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dthp::chain_value_at;
use crate::exact::{simulate_exact, state_at};
use crate::model::{
    erlang_moments, mean_intensity, GridSpec, HawkesParams, KernelKind, ParamError,
};
use crate::rng::{mix_seed, PathSeed};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("sample set contains a non-finite value")]
    NonFinite,
    #[error("rate fit needs at least 3 rows, got {0}")]
    TooFewRows(usize),
    #[error("rate fit is degenerate: a distance is zero")]
    DegenerateFit,
    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),
    #[error(transparent)]
    Params(#[from] ParamError),
}

/// Minimum sample size for the distribution tests.
pub const MIN_SAMPLES: usize = 100;

/// Relative tolerance under which sample values count as ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Where a sample set came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    /// Grid size, or `None` for the exact oracle.
    pub steps: Option<u64>,
    pub t: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub values: Vec<f64>,
    pub label: String,
    pub meta: Option<SampleMeta>,
}

impl SampleSet {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Result<Self, AnalysisError> {
        if values.is_empty() {
            return Err(AnalysisError::InsufficientSamples { needed: 1, got: 0 });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(AnalysisError::NonFinite);
        }
        Ok(Self {
            values,
            label: label.into(),
            meta: None,
        })
    }

    pub fn with_meta(mut self, meta: SampleMeta) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sample mean and its standard error.
    pub fn mean_se(&self) -> (f64, f64) {
        mean_se(&self.values)
    }

    fn sorted(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        v
    }
}

pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn require(a: &SampleSet, b: &SampleSet) -> Result<(), AnalysisError> {
    for s in [a, b] {
        if s.len() < MIN_SAMPLES {
            return Err(AnalysisError::InsufficientSamples {
                needed: MIN_SAMPLES,
                got: s.len(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub pvalue: f64,
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value at
/// effective size `n m / (n + m)`. Values within [`TIE_TOLERANCE`] (relative)
/// of their neighbour are treated as ties.
pub fn ks_two_sample(a: &SampleSet, b: &SampleSet) -> Result<KsResult, AnalysisError> {
    require(a, b)?;
    let xs = a.sorted();
    let ys = b.sorted();
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n || j < m {
        // Start a cluster at the smaller head and absorb every value that
        // chains to it within the tie tolerance.
        let mut top = match (xs.get(i), ys.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        loop {
            let next = match (xs.get(i), ys.get(j)) {
                (Some(&x), Some(&y)) => x.min(y),
                (Some(&x), None) => x,
                (None, Some(&y)) => y,
                (None, None) => break,
            };
            if next - top > TIE_TOLERANCE * top.abs().max(f64::MIN_POSITIVE) {
                break;
            }
            if xs.get(i) == Some(&next) {
                i += 1;
            } else {
                j += 1;
            }
            top = next;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    Ok(KsResult {
        statistic: d,
        pvalue: kolmogorov_survival(ne.sqrt() * d),
    })
}

/// `P(K > x)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // Jacobi-theta form, fast for small arguments.
        let t = -std::f64::consts::PI.powi(2) / (8.0 * x * x);
        let mut cdf = 0.0;
        for k in 1..=20 {
            let odd = (2 * k - 1) as f64;
            cdf += (odd * odd * t).exp();
        }
        cdf *= (2.0 * std::f64::consts::PI).sqrt() / x;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * x * x).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term < 1e-300 {
                break;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

/// Empirical 1-Wasserstein distance `int |F_a - F_b|`. For equal sizes this is
/// the mean absolute difference of the sorted samples.
pub fn wasserstein1(a: &SampleSet, b: &SampleSet) -> Result<f64, AnalysisError> {
    require(a, b)?;
    let xs = a.sorted();
    let ys = b.sorted();
    if xs.len() == ys.len() {
        let total: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - y).abs()).sum();
        return Ok(total / xs.len() as f64);
    }
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = xs[0].min(ys[0]);
    let mut area = 0.0;
    while i < xs.len() || j < ys.len() {
        let next = match (xs.get(i), ys.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        area += (i as f64 / n - j as f64 / m).abs() * (next - prev);
        while xs.get(i) == Some(&next) {
            i += 1;
        }
        while ys.get(j) == Some(&next) {
            j += 1;
        }
        prev = next;
    }
    Ok(area)
}

/// One grid size of a marginal convergence experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    #[serde(rename = "N")]
    pub n: u64,
    pub h: f64,
    pub ks_statistic: f64,
    pub ks_pvalue: f64,
    pub wasserstein1: f64,
    pub mean_dthp: f64,
    pub se_dthp: f64,
    pub mean_exact: f64,
    pub se_exact: f64,
    pub mean_analytic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// `"lambda"` or `"xi"`.
    pub coordinate: String,
    pub t: f64,
    pub paths: usize,
    pub seed: u64,
    /// Sorted by increasing `N`.
    pub rows: Vec<ConvergenceRow>,
}

/// KS level used by the verdicts.
pub const KS_LEVEL: f64 = 0.01;

impl ConvergenceReport {
    pub fn largest(&self) -> Option<&ConvergenceRow> {
        self.rows.last()
    }

    /// Largest-N row passes KS and has the smallest Wasserstein distance
    /// (up to rounding at the scale of the sample).
    pub fn passes(&self) -> bool {
        let Some(last) = self.largest() else {
            return false;
        };
        let slack = TIE_TOLERANCE * last.mean_exact.abs().max(1.0);
        last.ks_pvalue > KS_LEVEL
            && self
                .rows
                .iter()
                .all(|r| r.wasserstein1 + slack >= last.wasserstein1)
    }

    pub fn wasserstein_strictly_decreasing(&self) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].wasserstein1 < w[0].wasserstein1)
    }

    /// `|mean_exact - mean_analytic| <= 4 se` at every row.
    pub fn oracle_means_consistent(&self) -> bool {
        self.rows
            .iter()
            .all(|r| (r.mean_exact - r.mean_analytic).abs() <= 4.0 * r.se_exact)
    }
}

/// Setup for [`marginal_convergence_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec<'a> {
    pub params: &'a HawkesParams,
    /// Parameters of the exact oracle; `None` means `params`.
    pub oracle: Option<&'a HawkesParams>,
    pub t: f64,
    pub n_list: &'a [u64],
    pub paths: usize,
    pub seed: u64,
}

/// Tag for the exact-oracle sub-seed (no grid size uses it).
const EXACT_TAG: u64 = u64::MAX;

/// Compares `lambda~^N_t` (and `xi~^N_t` for Erlang) with the exact oracle for
/// each `N`. The DTHP arm at each `N` and the single exact arm use independent
/// streams derived from `seed`.
pub fn marginal_convergence_experiment(
    spec: &ExperimentSpec<'_>,
) -> Result<Vec<ConvergenceReport>, AnalysisError> {
    let params = spec.params;
    let oracle = spec.oracle.unwrap_or(params);
    params.validate()?;
    oracle.validate()?;
    if params.kind() != oracle.kind() {
        return Err(AnalysisError::InvalidExperiment(
            "model and oracle kernels differ".into(),
        ));
    }
    if !(spec.t.is_finite() && spec.t > 0.0) {
        return Err(AnalysisError::InvalidExperiment(format!(
            "t must be positive, got {}",
            spec.t
        )));
    }
    if spec.n_list.is_empty() || spec.n_list.iter().any(|&n| n < 10) {
        return Err(AnalysisError::InvalidExperiment(
            "every N must be at least 10".into(),
        ));
    }
    if spec.paths < MIN_SAMPLES {
        return Err(AnalysisError::InsufficientSamples {
            needed: MIN_SAMPLES,
            got: spec.paths,
        });
    }
    let erlang = params.kind() == KernelKind::Erlang;
    let mut n_list = spec.n_list.to_vec();
    n_list.sort_unstable();
    n_list.dedup();

    let exact_master = mix_seed(spec.seed, EXACT_TAG);
    let exact: Vec<(f64, f64)> = (0..spec.paths as u64)
        .into_par_iter()
        .map(|i| {
            let rec = simulate_exact(oracle, spec.t, PathSeed::new(exact_master, i));
            let s = state_at(&rec, oracle, spec.t).expect("t is the record horizon");
            (s.lambda, s.xi)
        })
        .collect();
    let (analytic_l, analytic_x) = if erlang {
        let m = erlang_moments(oracle, spec.t)?;
        (m.intensity, m.auxiliary)
    } else {
        (mean_intensity(oracle, spec.t)?, 0.0)
    };

    let exact_l = SampleSet::new("exact", exact.iter().map(|v| v.0).collect())?;
    let exact_x = SampleSet::new("exact", exact.iter().map(|v| v.1).collect())?;
    let mut rows_l = Vec::with_capacity(n_list.len());
    let mut rows_x = Vec::with_capacity(n_list.len());
    for &n in &n_list {
        let grid = GridSpec::new(spec.t, n)?;
        let master = mix_seed(spec.seed, n);
        let values: Vec<(f64, f64)> = (0..spec.paths as u64)
            .into_par_iter()
            .map(|i| {
                chain_value_at(params, grid, PathSeed::new(master, i), spec.t)
                    .expect("t is the grid horizon")
            })
            .collect();
        log::debug!("simulated {} chain paths with N = {n}", spec.paths);
        let chain_l = SampleSet::new(format!("dthp N={n}"), values.iter().map(|v| v.0).collect())?;
        rows_l.push(row(n, grid.step(), &chain_l, &exact_l, analytic_l)?);
        if erlang {
            let chain_x =
                SampleSet::new(format!("dthp N={n}"), values.iter().map(|v| v.1).collect())?;
            rows_x.push(row(n, grid.step(), &chain_x, &exact_x, analytic_x)?);
        }
    }
    let report = |coordinate: &str, rows| ConvergenceReport {
        coordinate: coordinate.into(),
        t: spec.t,
        paths: spec.paths,
        seed: spec.seed,
        rows,
    };
    let mut out = vec![report("lambda", rows_l)];
    if erlang {
        out.push(report("xi", rows_x));
    }
    Ok(out)
}

fn row(
    n: u64,
    h: f64,
    chain: &SampleSet,
    exact: &SampleSet,
    analytic: f64,
) -> Result<ConvergenceRow, AnalysisError> {
    let ks = ks_two_sample(chain, exact)?;
    let (mean_dthp, se_dthp) = chain.mean_se();
    let (mean_exact, se_exact) = exact.mean_se();
    Ok(ConvergenceRow {
        n,
        h,
        ks_statistic: ks.statistic,
        ks_pvalue: ks.pvalue,
        wasserstein1: wasserstein1(chain, exact)?,
        mean_dthp,
        se_dthp,
        mean_exact,
        se_exact,
        mean_analytic: analytic,
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Result<f64, AnalysisError> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(AnalysisError::TooFewRows(xs.len().min(ys.len())));
    }
    if ys.iter().chain(xs).any(|&v| v <= 0.0) {
        return Err(AnalysisError::DegenerateFit);
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(AnalysisError::DegenerateFit);
    }
    Ok(sxy / sxx)
}

/// Empirical convergence order: slope of `log W1` against `log h`.
pub fn empirical_rate(report: &ConvergenceReport) -> Result<f64, AnalysisError> {
    let hs: Vec<f64> = report.rows.iter().map(|r| r.h).collect();
    let ws: Vec<f64> = report.rows.iter().map(|r| r.wasserstein1).collect();
    log_log_slope(&hs, &ws)
}
