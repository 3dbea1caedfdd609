//! CSV export of trajectories and event lists.
//!
//! Trajectory schema: `t,lambda,xi,L,jump`, one row per grid point. The jump
//! column flags a jump of the excitation state (`lambda` for the exponential
//! kernel, `xi` for Erlang) on the step that starts at that row, so the last
//! row is always 0. Events still arrive when `alpha = 0`; they show up in `L`
//! and in the event count but never as jumps. Floats carry 17 significant
//! digits.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::analysis::ConvergenceReport;
use crate::dthp::{reconstruct_loss, ChainPath, ChainStepper};
use crate::exact::{state_at, EventRecord, ExactError};
use crate::model::{GridSpec, HawkesParams};
use crate::rng::PathSeed;

pub const TRAJECTORY_HEADER: [&str; 5] = ["t", "lambda", "xi", "L", "jump"];
pub const EVENT_HEADER: [&str; 2] = ["theta", "mark"];
pub const CONVERGENCE_HEADER: [&str; 12] = [
    "coordinate",
    "t",
    "N",
    "h",
    "ks_statistic",
    "ks_pvalue",
    "wasserstein1",
    "mean_dthp",
    "se_dthp",
    "mean_exact",
    "se_exact",
    "mean_analytic",
];

#[inline]
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Totals reported after writing a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub events: u64,
    pub final_lambda: f64,
    pub final_xi: f64,
    pub final_loss: f64,
}

struct RowWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> RowWriter<W> {
    fn new(out: W) -> csv::Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(TRAJECTORY_HEADER)?;
        Ok(Self { inner })
    }

    fn row(&mut self, t: f64, lambda: f64, xi: f64, loss: f64, jump: bool) -> csv::Result<()> {
        self.inner.write_record([
            format_float(t),
            format_float(lambda),
            format_float(xi),
            format_float(loss),
            (jump as u8).to_string(),
        ])
    }

    fn finish(mut self) -> csv::Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

/// Whether an event moves the excitation state.
fn excites(params: &HawkesParams) -> bool {
    params.kernel.alpha > 0.0
}

/// Writes a fully stored chain path simulated with `params`.
pub fn write_chain_trajectory<W: Write>(
    path: &ChainPath,
    params: &HawkesParams,
    out: W,
) -> csv::Result<TrajectorySummary> {
    let excites = excites(params);
    let loss = reconstruct_loss(path);
    let mut w = RowWriter::new(out)?;
    let n = path.grid.steps() as usize;
    for i in 0..=n {
        let jump = excites && i < n && path.jump_flags[i];
        w.row(
            path.grid.time(i as u64),
            path.l_values[i],
            path.a_values[i],
            loss.cumulative[i],
            jump,
        )?;
    }
    w.finish()?;
    Ok(TrajectorySummary {
        events: loss.event_steps.len() as u64,
        final_lambda: path.l_values[n],
        final_xi: path.a_values[n],
        final_loss: loss.cumulative[n],
    })
}

/// Simulates and writes a chain path row by row without storing it. Produces
/// the same bytes as [`write_chain_trajectory`] on the stored path.
pub fn write_chain_streaming<W: Write>(
    params: &HawkesParams,
    grid: GridSpec,
    seed: PathSeed,
    out: W,
) -> csv::Result<TrajectorySummary> {
    let excites = excites(params);
    let mut w = RowWriter::new(out)?;
    let mut stepper = ChainStepper::new(params, grid, seed);
    let mut state = stepper.state();
    let mut loss = 0.0;
    let mut events = 0u64;
    let mut i = 0u64;
    for rec in stepper.by_ref() {
        w.row(grid.time(i), state.l, state.a, loss, excites && rec.jumped)?;
        if rec.jumped {
            loss += rec.mark;
            events += 1;
        }
        state = rec.state;
        i += 1;
    }
    w.row(grid.time(i), state.l, state.a, loss, false)?;
    w.finish()?;
    Ok(TrajectorySummary {
        events,
        final_lambda: state.l,
        final_xi: state.a,
        final_loss: loss,
    })
}

/// Writes `theta,mark` rows.
pub fn write_events<W: Write>(record: &EventRecord, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EVENT_HEADER)?;
    for (t, z) in record.times.iter().zip(&record.marks) {
        w.write_record([format_float(*t), format_float(*z)])?;
    }
    w.flush()?;
    Ok(())
}

/// Flattens convergence reports to one CSV row per `(coordinate, N)`.
pub fn write_convergence_csv<W: Write>(reports: &[ConvergenceReport], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CONVERGENCE_HEADER)?;
    for rep in reports {
        for r in &rep.rows {
            w.write_record([
                rep.coordinate.clone(),
                format_float(rep.t),
                r.n.to_string(),
                format_float(r.h),
                format_float(r.ks_statistic),
                format_float(r.ks_pvalue),
                format_float(r.wasserstein1),
                format_float(r.mean_dthp),
                format_float(r.se_dthp),
                format_float(r.mean_exact),
                format_float(r.se_exact),
                format_float(r.mean_analytic),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    State(#[from] ExactError),
}

/// Samples an exact record on `grid` using the trajectory schema. The jump
/// column flags an excitation jump in `(t_i, t_{i+1}]`.
pub fn write_exact_states<W: Write>(
    record: &EventRecord,
    params: &HawkesParams,
    grid: GridSpec,
    out: W,
) -> Result<TrajectorySummary, ExportError> {
    let excites = excites(params);
    let mut w = RowWriter::new(out)?;
    let n = grid.steps();
    let mut last = None;
    for i in 0..=n {
        let t = grid.time(i);
        let s = state_at(record, params, t)?;
        let jump = excites && i < n && {
            let next = record.times.partition_point(|&th| th <= grid.time(i + 1));
            next > s.count
        };
        w.row(t, s.lambda, s.xi, s.loss, jump)?;
        last = Some(s);
    }
    w.finish()?;
    let s = last.expect("grid has at least two points");
    Ok(TrajectorySummary {
        events: s.count as u64,
        final_lambda: s.lambda,
        final_xi: s.xi,
        final_loss: s.loss,
    })
}
