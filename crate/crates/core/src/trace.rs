//! Per-iteration solve records shared by all iterative solvers.

use std::fmt;
use std::io::Write;
use std::ops::Range;
use std::time::Instant;

use serde::Serialize;

use crate::error::Result;
use crate::linalg::{dist, Signal};
use crate::measure::{Observations, SensingEnsemble};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct StepFlags {
    /// The normal-equation solve fell back to the ridge system.
    pub regularized: bool,
    /// A least-squares substep lost rank.
    pub rank_deficient: bool,
}

impl fmt::Display for StepFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.regularized {
            parts.push("regularized");
        }
        if self.rank_deficient {
            parts.push("rank_deficient");
        }
        f.write_str(&parts.join("|"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum SolveStatus {
    /// The stopping tolerance was met.
    Converged,
    /// The iteration budget ran out first.
    MaxIterations,
    /// A fixed-length schedule ran to the end.
    Completed,
    StepFailed(String),
    Diverged,
}

#[derive(Clone, Debug)]
pub struct SolveTrace {
    /// `x_0, x_1, ...`
    pub iterates: Vec<Signal>,
    /// `dist(x_k, z)/||z||` when the truth was supplied, else `||F(x_k)||/||y||`.
    pub rel_errors: Vec<f64>,
    /// Objective `f(x_k)`.
    pub residuals: Vec<f64>,
    /// Seconds since the solve started at which `x_k` became available.
    pub wall_times: Vec<f64>,
    pub flags: Vec<StepFlags>,
    pub status: SolveStatus,
    /// Whether `rel_errors` were measured against the truth.
    pub truth_based: bool,
    /// Rows of the full ensemble that produced each iterate; only filled by
    /// the re-sampled driver.
    pub blocks: Vec<Range<usize>>,
}

impl SolveTrace {
    /// Number of steps taken.
    pub fn iterations(&self) -> usize {
        self.iterates.len().saturating_sub(1)
    }

    pub fn final_iterate(&self) -> &Signal {
        self.iterates.last().expect("a trace always holds the starting point")
    }

    pub fn final_rel_error(&self) -> f64 {
        *self.rel_errors.last().expect("a trace always holds the starting point")
    }

    /// First iteration whose relative error is below `tol`.
    pub fn first_below(&self, tol: f64) -> Option<usize> {
        self.rel_errors.iter().position(|&e| e < tol)
    }

    /// CSV with columns `iter,rel_err,residual,wall_ms,flags`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Row {
            iter: usize,
            rel_err: f64,
            residual: f64,
            wall_ms: f64,
            flags: String,
        }
        let mut w = csv::Writer::from_writer(out);
        for k in 0..self.iterates.len() {
            w.serialize(Row {
                iter: k,
                rel_err: self.rel_errors[k],
                residual: self.residuals[k],
                wall_ms: self.wall_times[k] * 1e3,
                flags: self.flags[k].to_string(),
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `dist(x, z)/||z||`, comparing in the complex field when the two signals
/// are declared over different fields.
pub fn relative_error(x: &Signal, truth: &Signal) -> Result<f64> {
    let d = if x.field() == truth.field() {
        dist(x, truth)?
    } else {
        dist(&x.clone().into_complex(), &truth.clone().into_complex())?
    };
    Ok(d / truth.norm())
}

/// Residuals `F_j(x) = |a_j^H x|^2 - y_j`.
pub fn intensity_residuals(ensemble: &SensingEnsemble, y: &Observations, x: &Signal) -> Result<Vec<f64>> {
    let fit = ensemble.intensities(x)?;
    if y.len() != fit.len() {
        return Err(crate::Error::DimensionMismatch { expected: fit.len(), found: y.len() });
    }
    Ok(fit.iter().zip(&y.y).map(|(a, b)| a - b).collect())
}

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Builds a [`SolveTrace`] while a solver runs.
pub(crate) struct TraceRecorder<'a> {
    ensemble: &'a SensingEnsemble,
    y: &'a Observations,
    truth: Option<&'a Signal>,
    y_norm: f64,
    start: Instant,
    trace: SolveTrace,
}

impl<'a> TraceRecorder<'a> {
    pub fn new(ensemble: &'a SensingEnsemble, y: &'a Observations, truth: Option<&'a Signal>) -> Self {
        TraceRecorder {
            ensemble,
            y,
            truth,
            y_norm: y.norm(),
            start: Instant::now(),
            trace: SolveTrace {
                iterates: Vec::new(),
                rel_errors: Vec::new(),
                residuals: Vec::new(),
                wall_times: Vec::new(),
                flags: Vec::new(),
                status: SolveStatus::MaxIterations,
                truth_based: truth.is_some(),
                blocks: Vec::new(),
            },
        }
    }

    /// Record `x` evaluated against the recorder's own data.
    pub fn push(&mut self, x: Signal, flags: StepFlags) -> Result<f64> {
        let elapsed = self.start.elapsed().as_secs_f64();
        let (ensemble, y) = (self.ensemble, self.y);
        self.push_with(x, flags, ensemble, y, elapsed)
    }

    /// Record `x` with its objective evaluated on the given data block.
    pub fn push_on(&mut self, x: Signal, flags: StepFlags, ensemble: &SensingEnsemble, y: &Observations) -> Result<f64> {
        let elapsed = self.start.elapsed().as_secs_f64();
        self.push_with(x, flags, ensemble, y, elapsed)
    }

    fn push_with(
        &mut self,
        x: Signal,
        flags: StepFlags,
        ensemble: &SensingEnsemble,
        y: &Observations,
        elapsed: f64,
    ) -> Result<f64> {
        let r = intensity_residuals(ensemble, y, &x)?;
        let residual = compensated_sum(r.iter().map(|v| v * v)) / (2.0 * r.len() as f64);
        let rel = match self.truth {
            Some(z) => relative_error(&x, z)?,
            None => {
                let own = intensity_residuals(self.ensemble, self.y, &x)?;
                own.iter().map(|v| v * v).sum::<f64>().sqrt() / self.y_norm
            }
        };
        self.trace.iterates.push(x);
        self.trace.rel_errors.push(rel);
        self.trace.residuals.push(residual);
        self.trace.wall_times.push(elapsed);
        self.trace.flags.push(flags);
        Ok(rel)
    }

    pub fn push_block(&mut self, rows: Range<usize>) {
        self.trace.blocks.push(rows);
    }

    pub fn last_residual(&self) -> f64 {
        *self.trace.residuals.last().unwrap_or(&f64::NAN)
    }

    pub fn finish(mut self, status: SolveStatus) -> SolveTrace {
        self.trace.status = status;
        self.trace
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Field;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut v = vec![1e16];
        v.extend(std::iter::repeat_n(1.0, 1000));
        v.push(-1e16);
        assert_eq!(compensated_sum(v.into_iter()), 1000.0);
    }

    #[test]
    fn flags_display() {
        assert_eq!(StepFlags::default().to_string(), "");
        let f = StepFlags { regularized: true, rank_deficient: true };
        assert_eq!(f.to_string(), "regularized|rank_deficient");
    }

    #[test]
    fn csv_has_expected_header() {
        let e = SensingEnsemble::sample(6, 2, Field::Complex, 1).unwrap();
        let z = Signal::random(2, Field::Complex, 1).unwrap();
        let y = crate::measure::observe(&e, &z, 0.0, 1).unwrap();
        let mut rec = TraceRecorder::new(&e, &y, Some(&z));
        rec.push(z.clone(), StepFlags { regularized: true, rank_deficient: false }).unwrap();
        let trace = rec.finish(SolveStatus::Converged);
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("iter,rel_err,residual,wall_ms,flags"));
        assert!(lines.next().unwrap().starts_with("0,0.0,0.0,"));
    }

    #[test]
    fn relative_error_promotes_mixed_fields() {
        let z = Signal::real(vec![1.0, 2.0]).unwrap();
        let x = z.rotated(0.7);
        assert!(relative_error(&x, &z).unwrap() < 1e-15);
    }
}
