//! The discrete-time Hawkes chain, its piecewise-constant path and the
//! compound loss reconstructed from the jump flags.
//!
//! Every step consumes exactly two words of the path stream: one uniform for
//! the jump indicator and one mark, whether or not a jump occurs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{GridSpec, HawkesParams, KernelKind};
use crate::rng::{PathRng, PathSeed};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error("time {t} is outside the simulated horizon [0, {horizon}]")]
    OutOfHorizon { t: f64, horizon: f64 },
    #[error("replay needs {expected} flags and marks, got {flags} flags and {marks} marks")]
    LengthMismatch {
        expected: usize,
        flags: usize,
        marks: usize,
    },
}

/// State of the chain after `k` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    /// Intensity value `l_k`.
    pub l: f64,
    /// Erlang auxiliary `a_k`; always 0 for the exponential kernel.
    pub a: f64,
    pub k: u64,
}

impl ChainState {
    pub fn initial(params: &HawkesParams) -> Self {
        Self {
            l: params.x0,
            a: 0.0,
            k: 0,
        }
    }
}

/// Per-grid constants of the recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCoefficients {
    /// `exp(-beta h)`.
    pub decay: f64,
    /// `lambda_inf (1 - exp(-beta h))`.
    pub relax: f64,
    pub h: f64,
    pub alpha: f64,
}

impl StepCoefficients {
    pub fn new(params: &HawkesParams, h: f64) -> Self {
        let bh = params.kernel.beta * h;
        Self {
            decay: (-bh).exp(),
            relax: params.lambda_inf * -(-bh).exp_m1(),
            h,
            alpha: params.kernel.alpha,
        }
    }
}

/// Outcome of one chain step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub next: ChainState,
    pub jumped: bool,
}

/// Exponential-kernel step:
/// `l' = relax + (l + alpha zeta 1{u < l h}) decay`.
#[inline]
pub fn step_exponential(state: ChainState, u: f64, zeta: f64, c: &StepCoefficients) -> Step {
    let jumped = u < state.l * c.h;
    let kick = if jumped { c.alpha * zeta } else { 0.0 };
    Step {
        next: ChainState {
            l: c.relax + (state.l + kick) * c.decay,
            a: 0.0,
            k: state.k + 1,
        },
        jumped,
    }
}

/// Erlang-kernel step: `a' = (a + alpha zeta 1{u < l h}) decay`, then
/// `l' = relax + l decay + a' h` with the updated `a'`.
#[inline]
pub fn step_erlang(state: ChainState, u: f64, zeta: f64, c: &StepCoefficients) -> Step {
    let jumped = u < state.l * c.h;
    let kick = if jumped { c.alpha * zeta } else { 0.0 };
    let a = (state.a + kick) * c.decay;
    Step {
        next: ChainState {
            l: c.relax + state.l * c.decay + a * c.h,
            a,
            k: state.k + 1,
        },
        jumped,
    }
}

/// Applies the kernel-appropriate step.
#[inline]
pub fn step(kind: KernelKind, state: ChainState, u: f64, zeta: f64, c: &StepCoefficients) -> Step {
    match kind {
        KernelKind::Exponential => step_exponential(state, u, zeta, c),
        KernelKind::Erlang => step_erlang(state, u, zeta, c),
    }
}

/// One realized transition, as produced by [`ChainStepper`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub jumped: bool,
    pub mark: f64,
    pub state: ChainState,
}

/// Drives the chain along a grid, drawing `(u_k, zeta_k)` from the path stream.
/// All simulation entry points share this engine, so they see identical streams.
#[derive(Debug, Clone)]
pub struct ChainStepper<'a> {
    params: &'a HawkesParams,
    coeffs: StepCoefficients,
    rng: PathRng,
    state: ChainState,
    steps: u64,
}

impl<'a> ChainStepper<'a> {
    pub fn new(params: &'a HawkesParams, grid: GridSpec, seed: PathSeed) -> Self {
        Self {
            params,
            coeffs: StepCoefficients::new(params, grid.step()),
            rng: PathRng::new(seed),
            state: ChainState::initial(params),
            steps: grid.steps(),
        }
    }

    pub fn state(&self) -> ChainState {
        self.state
    }

    pub fn coefficients(&self) -> &StepCoefficients {
        &self.coeffs
    }
}

impl Iterator for ChainStepper<'_> {
    type Item = StepRecord;

    #[inline]
    fn next(&mut self) -> Option<StepRecord> {
        if self.state.k >= self.steps {
            return None;
        }
        let u = self.rng.uniform();
        let mark = self.params.marks.sample(&mut self.rng);
        let s = step(self.params.kind(), self.state, u, mark, &self.coeffs);
        self.state = s.next;
        Some(StepRecord {
            jumped: s.jumped,
            mark,
            state: s.next,
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.steps - self.state.k) as usize;
        (left, Some(left))
    }
}

/// A full chain realization on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainPath {
    pub grid: GridSpec,
    /// `N + 1` intensity values.
    pub l_values: Vec<f64>,
    /// `N + 1` auxiliary values (all zero for the exponential kernel).
    pub a_values: Vec<f64>,
    /// `N` flags; entry `k` is the step `k -> k + 1`.
    pub jump_flags: Vec<bool>,
    /// `N` marks drawn at each step, meaningful where the flag is set.
    pub marks: Vec<f64>,
}

/// Full arrays below this many steps, streaming above.
pub const STREAMING_THRESHOLD: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StorageMode {
    Full,
    Streaming,
}

impl StorageMode {
    pub fn for_steps(steps: u64) -> Self {
        if steps < STREAMING_THRESHOLD {
            StorageMode::Full
        } else {
            StorageMode::Streaming
        }
    }
}

/// Simulates the chain with full storage.
pub fn simulate_chain(params: &HawkesParams, grid: GridSpec, seed: PathSeed) -> ChainPath {
    let n = grid.steps() as usize;
    let mut l_values = Vec::with_capacity(n + 1);
    let mut a_values = Vec::with_capacity(n + 1);
    let mut jump_flags = Vec::with_capacity(n);
    let mut marks = Vec::with_capacity(n);
    l_values.push(params.x0);
    a_values.push(0.0);
    for rec in ChainStepper::new(params, grid, seed) {
        l_values.push(rec.state.l);
        a_values.push(rec.state.a);
        jump_flags.push(rec.jumped);
        marks.push(rec.mark);
    }
    ChainPath {
        grid,
        l_values,
        a_values,
        jump_flags,
        marks,
    }
}

/// Compact record of a streamed simulation: jumps plus the path values at
/// requested sample times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledPath {
    pub grid: GridSpec,
    pub sample_times: Vec<f64>,
    /// `(lambda, xi)` at each sample time.
    pub samples: Vec<(f64, f64)>,
    pub jump_steps: Vec<u64>,
    pub jump_marks: Vec<f64>,
    pub final_state: ChainState,
}

/// Simulates the chain keeping only jumps and the values at `sample_times`
/// (any order; each must lie in `[0, T]`).
pub fn simulate_chain_sampled(
    params: &HawkesParams,
    grid: GridSpec,
    seed: PathSeed,
    sample_times: &[f64],
) -> Result<SampledPath, PathError> {
    let mut wanted: Vec<(u64, usize)> = Vec::with_capacity(sample_times.len());
    for (i, &t) in sample_times.iter().enumerate() {
        check_time(grid, t)?;
        wanted.push((grid.index_of(t), i));
    }
    wanted.sort_unstable();
    let mut samples = vec![(0.0, 0.0); sample_times.len()];
    let mut next = 0;
    let mut record = |k: u64, s: &ChainState| {
        while next < wanted.len() && wanted[next].0 == k {
            samples[wanted[next].1] = (s.l, s.a);
            next += 1;
        }
    };

    let mut stepper = ChainStepper::new(params, grid, seed);
    record(0, &stepper.state());
    let mut jump_steps = Vec::new();
    let mut jump_marks = Vec::new();
    let mut k = 0u64;
    for rec in stepper.by_ref() {
        if rec.jumped {
            jump_steps.push(k);
            jump_marks.push(rec.mark);
        }
        k += 1;
        record(k, &rec.state);
    }
    Ok(SampledPath {
        grid,
        sample_times: sample_times.to_vec(),
        samples,
        jump_steps,
        jump_marks,
        final_state: stepper.state(),
    })
}

/// `(lambda~_t, xi~_t)` of a single path, streamed without storage.
pub fn chain_value_at(
    params: &HawkesParams,
    grid: GridSpec,
    seed: PathSeed,
    t: f64,
) -> Result<(f64, f64), PathError> {
    check_time(grid, t)?;
    let target = grid.index_of(t);
    let mut stepper = ChainStepper::new(params, grid, seed);
    let mut s = stepper.state();
    for _ in 0..target {
        s = stepper.next().expect("target within grid").state;
    }
    Ok((s.l, s.a))
}

fn check_time(grid: GridSpec, t: f64) -> Result<(), PathError> {
    if !(0.0..=grid.horizon()).contains(&t) {
        return Err(PathError::OutOfHorizon {
            t,
            horizon: grid.horizon(),
        });
    }
    Ok(())
}

impl ChainPath {
    /// `(l_{floor(Nt/T)}, a_{floor(Nt/T)})`.
    pub fn path_value(&self, t: f64) -> Result<(f64, f64), PathError> {
        check_time(self.grid, t)?;
        let i = self.grid.index_of(t) as usize;
        Ok((self.l_values[i], self.a_values[i]))
    }

    pub fn jump_count(&self) -> usize {
        self.jump_flags.iter().filter(|&&j| j).count()
    }
}

/// Free-function form of [`ChainPath::path_value`].
pub fn path_value(path: &ChainPath, t: f64) -> Result<(f64, f64), PathError> {
    path.path_value(t)
}

/// Recomputes the intensity arrays from stored flags and marks. Bit-exact
/// with the original simulation.
pub fn replay(
    params: &HawkesParams,
    grid: GridSpec,
    jump_flags: &[bool],
    marks: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), PathError> {
    let n = grid.steps() as usize;
    if jump_flags.len() != n || marks.len() != n {
        return Err(PathError::LengthMismatch {
            expected: n,
            flags: jump_flags.len(),
            marks: marks.len(),
        });
    }
    let c = StepCoefficients::new(params, grid.step());
    let mut s = ChainState::initial(params);
    let mut l = Vec::with_capacity(n + 1);
    let mut a = Vec::with_capacity(n + 1);
    l.push(s.l);
    a.push(s.a);
    for (&jumped, &zeta) in jump_flags.iter().zip(marks) {
        // Out-of-range uniforms select the recorded branch whatever l h is.
        let u = if jumped { -1.0 } else { f64::INFINITY };
        s = step(params.kind(), s, u, zeta, &c).next;
        l.push(s.l);
        a.push(s.a);
    }
    Ok((l, a))
}

/// Cumulative loss on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossPath {
    pub grid: GridSpec,
    /// `L` at each grid point (`N + 1` values).
    pub cumulative: Vec<f64>,
    pub event_steps: Vec<u64>,
    pub event_marks: Vec<f64>,
}

impl LossPath {
    /// Event count `H` at grid index `i`.
    pub fn count_at(&self, i: usize) -> usize {
        self.event_steps.partition_point(|&k| (k as usize) < i)
    }
}

/// `cumulative[i] = sum of marks at flagged steps k < i`.
pub fn reconstruct_loss(path: &ChainPath) -> LossPath {
    let mut cumulative = Vec::with_capacity(path.l_values.len());
    let mut event_steps = Vec::new();
    let mut event_marks = Vec::new();
    let mut total = 0.0;
    cumulative.push(0.0);
    for (k, (&jumped, &zeta)) in path.jump_flags.iter().zip(&path.marks).enumerate() {
        if jumped {
            total += zeta;
            event_steps.push(k as u64);
            event_marks.push(zeta);
        }
        cumulative.push(total);
    }
    LossPath {
        grid: path.grid,
        cumulative,
        event_steps,
        event_marks,
    }
}
