//! Continuous-time reference simulators.
//!
//! The exponential kernel is sampled exactly by splitting each inter-arrival
//! time into a baseline-driven and an excess-driven candidate. The Erlang
//! kernel is sampled by thinning against a global dominating rate, using the
//! analytic no-jump flow of `(lambda, xi)` between proposals.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{HawkesParams, KernelKind};
use crate::rng::{PathRng, PathSeed};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExactError {
    #[error("time {t} is outside the record horizon [0, {horizon}]")]
    OutOfHorizon { t: f64, horizon: f64 },
    #[error("{0} sampler called with a {1} kernel")]
    WrongKernel(&'static str, KernelKind),
}

/// Event times and marks on `(0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub times: Vec<f64>,
    pub marks: Vec<f64>,
    pub horizon: f64,
}

impl EventRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn total_loss(&self) -> f64 {
        self.marks.iter().sum()
    }
}

/// Exact sampler for the exponential kernel.
pub fn exact_exponential(
    params: &HawkesParams,
    horizon: f64,
    seed: PathSeed,
) -> Result<EventRecord, ExactError> {
    if params.kind() != KernelKind::Exponential {
        return Err(ExactError::WrongKernel("exact exponential", params.kind()));
    }
    let beta = params.kernel.beta;
    let alpha = params.kernel.alpha;
    let lam_inf = params.lambda_inf;
    let mut rng = PathRng::new(seed);
    let mut times = Vec::new();
    let mut marks = Vec::new();

    let mut s = 0.0;
    // Intensity just after time s.
    let mut lam = params.x0;
    loop {
        if lam < lam_inf {
            // Below the baseline the excess is negative and the two-part
            // decomposition does not apply; thin against lambda_inf instead.
            let tau = rng.exponential(lam_inf);
            let u = rng.uniform();
            let next = s + tau;
            if next > horizon {
                break;
            }
            let flowed = lam_inf + (lam - lam_inf) * (-beta * tau).exp();
            s = next;
            lam = flowed;
            if u * lam_inf < flowed {
                let zeta = params.marks.sample(&mut rng);
                lam += alpha * zeta;
                times.push(s);
                marks.push(zeta);
            }
            continue;
        }
        let excess = lam - lam_inf;
        let s1 = if excess > 0.0 {
            let d = 1.0 + beta * rng.open_uniform().ln() / excess;
            if d > 0.0 {
                -d.ln() / beta
            } else {
                f64::INFINITY
            }
        } else {
            f64::INFINITY
        };
        let s2 = rng.exponential(lam_inf);
        let tau = s1.min(s2);
        let next = s + tau;
        if next > horizon {
            break;
        }
        let zeta = params.marks.sample(&mut rng);
        lam = lam_inf + excess * (-beta * tau).exp() + alpha * zeta;
        s = next;
        times.push(s);
        marks.push(zeta);
    }
    Ok(EventRecord {
        times,
        marks,
        horizon,
    })
}

/// Diagnostics of one thinning run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ThinningStats {
    pub proposals: u64,
    pub accepted: u64,
    /// Largest acceptance ratio `lambda_u / B` seen.
    pub max_ratio: f64,
}

/// Thinning sampler for the Erlang kernel.
pub fn thinning_erlang(
    params: &HawkesParams,
    horizon: f64,
    seed: PathSeed,
) -> Result<EventRecord, ExactError> {
    thinning_erlang_with_stats(params, horizon, seed).map(|(r, _)| r)
}

/// Upper slack tolerated on the acceptance ratio (rounding only).
const RATIO_SLACK: f64 = 1e-12;

pub fn thinning_erlang_with_stats(
    params: &HawkesParams,
    horizon: f64,
    seed: PathSeed,
) -> Result<(EventRecord, ThinningStats), ExactError> {
    if params.kind() != KernelKind::Erlang {
        return Err(ExactError::WrongKernel("erlang thinning", params.kind()));
    }
    let beta = params.kernel.beta;
    let alpha = params.kernel.alpha;
    let lam_inf = params.lambda_inf;
    let peak = 1.0 / (std::f64::consts::E * beta);
    let mut rng = PathRng::new(seed);
    let mut stats = ThinningStats::default();
    let mut times = Vec::new();
    let mut marks = Vec::new();

    let mut s = 0.0;
    let mut lam = params.x0;
    let mut xi = 0.0;
    loop {
        let bound = lam_inf + (lam - lam_inf).max(0.0) + xi * peak;
        let tau = rng.exponential(bound);
        let u = rng.uniform();
        let next = s + tau;
        if next > horizon {
            break;
        }
        let decay = (-beta * tau).exp();
        lam = lam_inf + (lam - lam_inf) * decay + xi * tau * decay;
        xi *= decay;
        s = next;
        let ratio = lam / bound;
        assert!(
            (0.0..=1.0 + RATIO_SLACK).contains(&ratio),
            "thinning ratio {ratio} outside [0, 1]"
        );
        stats.proposals += 1;
        stats.max_ratio = stats.max_ratio.max(ratio);
        if u < ratio {
            let zeta = params.marks.sample(&mut rng);
            xi += alpha * zeta;
            stats.accepted += 1;
            times.push(s);
            marks.push(zeta);
        }
    }
    Ok((
        EventRecord {
            times,
            marks,
            horizon,
        },
        stats,
    ))
}

/// Routes to the exact sampler or to thinning by kernel.
pub fn simulate_exact(params: &HawkesParams, horizon: f64, seed: PathSeed) -> EventRecord {
    match params.kind() {
        KernelKind::Exponential => exact_exponential(params, horizon, seed),
        KernelKind::Erlang => thinning_erlang(params, horizon, seed),
    }
    .expect("dispatch matches the kernel")
}

/// Process state evaluated from an event record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactState {
    pub lambda: f64,
    /// `sum alpha e^{-beta (t - theta_i)} zeta_i` for Erlang, 0 for exponential.
    pub xi: f64,
    pub loss: f64,
    pub count: usize,
}

/// Evaluates the intensity (and auxiliary, loss, count) at `t`. Events at
/// `theta_i = t` are included (right-continuous version).
pub fn state_at(
    record: &EventRecord,
    params: &HawkesParams,
    t: f64,
) -> Result<ExactState, ExactError> {
    if !(0.0..=record.horizon).contains(&t) {
        return Err(ExactError::OutOfHorizon {
            t,
            horizon: record.horizon,
        });
    }
    let beta = params.kernel.beta;
    let alpha = params.kernel.alpha;
    let count = record.times.partition_point(|&th| th <= t);
    let mut lambda = params.lambda_inf + (params.x0 - params.lambda_inf) * (-beta * t).exp();
    let mut xi = 0.0;
    let mut loss = 0.0;
    for (&th, &z) in record.times[..count].iter().zip(&record.marks[..count]) {
        let age = t - th;
        let w = alpha * z * (-beta * age).exp();
        match params.kind() {
            KernelKind::Exponential => lambda += w,
            KernelKind::Erlang => {
                lambda += age * w;
                xi += w;
            }
        }
        loss += z;
    }
    Ok(ExactState {
        lambda,
        xi,
        loss,
        count,
    })
}
