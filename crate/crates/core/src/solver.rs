//! Gauss-Newton iterations for phase retrieval.
//!
//! Real signals minimize
//!
//! ```text
//! f(x) = 1/(2m) sum_j ((a_jR^T x)^2 + (a_jI^T x)^2 - y_j)^2,   x in R^n
//! ```
//!
//! by the step `x+ = x - (J^T J)^{-1} grad f(x)`, solved as a normal system.
//! Complex signals linearize in `(x - x_k, conj(x - x_k))` and take the
//! minimal-norm least-squares correction from the pseudoinverse of
//! `A_k = (J, conj(J))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::init::{init_exp_spectral, InitConfig, InitMethod};
use crate::linalg::{solve_spd, DenseMatrix, Field, MinNormSolver, Signal, C64};
use crate::measure::{partition, Observations, SensingEnsemble};
use crate::trace::{compensated_sum, intensity_residuals, SolveStatus, SolveTrace, StepFlags, TraceRecorder};

pub use crate::trace::relative_error;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnConfig {
    pub max_iters: usize,
    /// Stop once `dist(x_k, z)/||z||` falls below this (truth supplied).
    pub rel_err_tol: f64,
    /// Stop once `||F(x_k)||/||y||` falls below this (no truth).
    pub residual_tol: f64,
    /// Target accuracy of the re-sampled driver.
    pub epsilon_target: f64,
    /// Constant `c` in the re-sampled schedule `T = c log2 log2 (1/eps)`.
    pub resample_c: f64,
    /// Initializer settings for the re-sampled driver.
    pub init: InitConfig,
}

impl Default for GnConfig {
    fn default() -> Self {
        GnConfig {
            max_iters: 100,
            rel_err_tol: 1e-5,
            residual_tol: 1e-12,
            epsilon_target: 1e-3,
            resample_c: 3.0,
            init: InitConfig::new(InitMethod::ExpSpectral, Field::Real),
        }
    }
}

impl GnConfig {
    fn validate(&self) -> Result<()> {
        if !(self.rel_err_tol > 0.0 && self.residual_tol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if !(self.resample_c > 0.0) {
            return Err(Error::Config("resample_c must be positive".into()));
        }
        Ok(())
    }
}

fn check_dims(ensemble: &SensingEnsemble, y: &Observations, x: &Signal) -> Result<()> {
    if x.len() != ensemble.n() {
        return Err(Error::DimensionMismatch { expected: ensemble.n(), found: x.len() });
    }
    if y.len() != ensemble.m() {
        return Err(Error::DimensionMismatch { expected: ensemble.m(), found: y.len() });
    }
    Ok(())
}

fn real_iterate(x: &Signal) -> Result<Vec<f64>> {
    if x.field() != Field::Real {
        return Err(Error::FieldMismatch("the real Gauss-Newton step needs a real iterate".into()));
    }
    Ok(x.real_parts())
}

/// `f(x) = 1/(2m) sum_j (|a_j^H x|^2 - y_j)^2`, summed with compensation.
pub fn objective(ensemble: &SensingEnsemble, y: &Observations, x: &Signal) -> Result<f64> {
    check_dims(ensemble, y, x)?;
    let r = intensity_residuals(ensemble, y, x)?;
    Ok(compensated_sum(r.iter().map(|v| v * v)) / (2.0 * ensemble.m() as f64))
}

/// Rows `g_j = (a_jR^T x) a_jR + (a_jI^T x) a_jI` together with the
/// residuals `(a_jR^T x)^2 + (a_jI^T x)^2 - y_j`.
fn jacobian_rows(ensemble: &SensingEnsemble, y: Option<&Observations>, x: &[f64]) -> Result<(DenseMatrix<f64>, Vec<f64>)> {
    let proj = ensemble.project_real(x)?;
    let n = ensemble.n();
    let mut g = DenseMatrix::<f64>::zeros(ensemble.m(), n);
    let mut r = Vec::with_capacity(ensemble.m());
    for (j, &(pr, pi)) in proj.iter().enumerate() {
        let a = ensemble.vector(j);
        for (gk, ak) in g.row_mut(j).iter_mut().zip(a) {
            *gk = pr * ak.re + pi * ak.im;
        }
        r.push(pr * pr + pi * pi - y.map_or(0.0, |y| y.y[j]));
    }
    Ok((g, r))
}

/// `J(x)^T J(x) = (4/m) G^T G` for real `x`.
pub fn gn_normal_matrix(ensemble: &SensingEnsemble, x: &Signal) -> Result<DenseMatrix<f64>> {
    if x.len() != ensemble.n() {
        return Err(Error::DimensionMismatch { expected: ensemble.n(), found: x.len() });
    }
    let (g, _) = jacobian_rows(ensemble, None, &real_iterate(x)?)?;
    Ok(gram(&g, 4.0 / ensemble.m() as f64))
}

/// `scale * G^T G`, accumulated on the upper triangle and mirrored.
fn gram(g: &DenseMatrix<f64>, scale: f64) -> DenseMatrix<f64> {
    let n = g.cols();
    let mut m = DenseMatrix::<f64>::zeros(n, n);
    for j in 0..g.rows() {
        let row = g.row(j);
        for a in 0..n {
            let ga = row[a];
            if ga == 0.0 {
                continue;
            }
            for (mb, gb) in m.row_mut(a)[a..].iter_mut().zip(&row[a..]) {
                *mb += ga * gb;
            }
        }
    }
    for a in 0..n {
        for b in a..n {
            let v = m[(a, b)] * scale;
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
    m
}

/// `grad f(x) = (2/m) sum_j r_j g_j` for real `x`.
pub fn gn_gradient(ensemble: &SensingEnsemble, y: &Observations, x: &Signal) -> Result<Vec<f64>> {
    check_dims(ensemble, y, x)?;
    let (g, r) = jacobian_rows(ensemble, Some(y), &real_iterate(x)?)?;
    Ok(weighted_row_sum(&g, &r, 2.0 / ensemble.m() as f64))
}

fn weighted_row_sum(g: &DenseMatrix<f64>, w: &[f64], scale: f64) -> Vec<f64> {
    let mut out = vec![0.0; g.cols()];
    for (j, &wj) in w.iter().enumerate() {
        for (o, gk) in out.iter_mut().zip(g.row(j)) {
            *o += wj * gk;
        }
    }
    out.iter_mut().for_each(|o| *o *= scale);
    out
}

#[derive(Clone, Debug)]
pub struct RealStep {
    pub next: Signal,
    /// `d = x_{k+1} - x_k`
    pub direction: Vec<f64>,
    pub regularized: bool,
}

/// One real Gauss-Newton step.
pub fn gn_step_real(ensemble: &SensingEnsemble, y: &Observations, x: &Signal) -> Result<RealStep> {
    check_dims(ensemble, y, x)?;
    let xr = real_iterate(x)?;
    let (g, r) = jacobian_rows(ensemble, Some(y), &xr)?;
    let m = ensemble.m() as f64;
    let normal = gram(&g, 4.0 / m);
    let grad = weighted_row_sum(&g, &r, 2.0 / m);
    let sol = solve_spd(&normal, &grad).map_err(|e| Error::StepFailure(e.to_string()))?;
    let direction: Vec<f64> = sol.x.iter().map(|v| -v).collect();
    let next: Vec<f64> = xr.iter().zip(&direction).map(|(a, d)| a + d).collect();
    let next = Signal::real(next).map_err(|e| Error::StepFailure(e.to_string()))?;
    Ok(RealStep { next, direction, regularized: sol.regularized })
}

/// The complex linearization `A_k` (m x 2n) and residual vector `F_k` at `x`.
///
/// Row `j` of `A_k` is `(x^H a_j a_j^H, x^T conj(a_j) a_j^T)`.
pub fn complex_linearization(
    ensemble: &SensingEnsemble,
    y: &Observations,
    x: &Signal,
) -> Result<(DenseMatrix<C64>, Vec<C64>)> {
    check_dims(ensemble, y, x)?;
    let n = ensemble.n();
    let p = ensemble.project(x.entries())?;
    let mut a_k = DenseMatrix::<C64>::zeros(ensemble.m(), 2 * n);
    let mut f = Vec::with_capacity(ensemble.m());
    for (j, &pj) in p.iter().enumerate() {
        let a = ensemble.vector(j);
        let row = a_k.row_mut(j);
        for k in 0..n {
            let first = pj.conj() * a[k].conj();
            row[k] = first;
            row[n + k] = first.conj();
        }
        f.push(C64::new(pj.norm_sqr() - y.y[j], 0.0));
    }
    Ok((a_k, f))
}

#[derive(Clone, Debug)]
pub struct ComplexStep {
    pub next: Signal,
    /// Full minimal-norm correction `u = -A_k^+ F_k` of length 2n.
    pub correction: Vec<C64>,
    pub rank: usize,
}

/// One complex Gauss-Newton step `x_{k+1} = x_k - (A_k^+ F_k)(1:n)`.
pub fn gn_step_complex(ensemble: &SensingEnsemble, y: &Observations, x: &Signal) -> Result<ComplexStep> {
    if ensemble.field() != Field::Complex {
        return Err(Error::FieldMismatch("the complex Gauss-Newton step needs complex sensing vectors".into()));
    }
    if !(x.norm() > 0.0) {
        return Err(Error::StepFailure("complex step from the zero vector".into()));
    }
    let (a_k, f) = complex_linearization(ensemble, y, x)?;
    let solver = MinNormSolver::new(&a_k).map_err(|e| Error::StepFailure(e.to_string()))?;
    if solver.rank() == 0 {
        return Err(Error::StepFailure("every singular value of A_k was truncated".into()));
    }
    let correction: Vec<C64> = solver.solve(&f)?.into_iter().map(|v| -v).collect();
    let n = x.len();
    let next = x.entries().iter().zip(&correction[..n]).map(|(a, u)| a + u).collect();
    let next = Signal::complex(next).map_err(|e| Error::StepFailure(e.to_string()))?;
    Ok(ComplexStep { next, correction, rank: solver.rank() })
}

fn converged(rel: f64, truth: bool, cfg: &GnConfig) -> bool {
    if truth { rel < cfg.rel_err_tol } else { rel < cfg.residual_tol }
}

/// Plain Gauss-Newton driver; real iterates take the real step, complex
/// iterates the pseudoinverse step.
///
/// Step failures end the trace with [`SolveStatus::StepFailed`] rather than
/// an error.
pub fn solve_gn(
    ensemble: &SensingEnsemble,
    y: &Observations,
    x0: &Signal,
    truth: Option<&Signal>,
    cfg: &GnConfig,
) -> Result<SolveTrace> {
    cfg.validate()?;
    check_dims(ensemble, y, x0)?;
    if let Some(z) = truth {
        if z.len() != x0.len() {
            return Err(Error::DimensionMismatch { expected: x0.len(), found: z.len() });
        }
    }
    let mut rec = TraceRecorder::new(ensemble, y, truth);
    let rel = rec.push(x0.clone(), StepFlags::default())?;
    if converged(rel, truth.is_some(), cfg) {
        return Ok(rec.finish(SolveStatus::Converged));
    }
    let mut x = x0.clone();
    for _ in 0..cfg.max_iters {
        let step = match x.field() {
            Field::Real => gn_step_real(ensemble, y, &x).map(|s| {
                (s.next, StepFlags { regularized: s.regularized, ..Default::default() })
            }),
            Field::Complex => gn_step_complex(ensemble, y, &x).map(|s| {
                let full = 2 * x.len() - 1;
                (s.next, StepFlags { rank_deficient: s.rank < full, ..Default::default() })
            }),
        };
        let (next, flags) = match step {
            Ok(v) => v,
            Err(e) => return Ok(rec.finish(SolveStatus::StepFailed(e.to_string()))),
        };
        let rel = rec.push(next.clone(), flags)?;
        x = next;
        if converged(rel, truth.is_some(), cfg) {
            return Ok(rec.finish(SolveStatus::Converged));
        }
    }
    Ok(rec.finish(SolveStatus::MaxIterations))
}

/// Number of re-sampled steps `T = max(1, ceil(c log2 log2 (1/eps)))`.
pub fn resample_steps(epsilon: f64, c: f64) -> usize {
    let t = (c * (1.0 / epsilon).log2().log2()).ceil();
    if t.is_finite() && t >= 1.0 { t as usize } else { 1 }
}

/// Gauss-Newton with re-sampling for real signals.
///
/// The rows are cut into `T + 1` equal blocks. Block 0 feeds the
/// exponential-weighted initializer (real-signal variant); step `k` uses only
/// block `k + 1`. The trace holds `x_0, ..., x_T` and, in `blocks`, the rows
/// that produced each point. Objective values are evaluated on that block.
pub fn solve_gn_resampled(
    ensemble: &SensingEnsemble,
    y: &Observations,
    epsilon: f64,
    truth: Option<&Signal>,
    cfg: &GnConfig,
) -> Result<SolveTrace> {
    cfg.validate()?;
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::Config(format!("epsilon must lie in (0, 1/2), got {epsilon}")));
    }
    if y.len() != ensemble.m() {
        return Err(Error::DimensionMismatch { expected: ensemble.m(), found: y.len() });
    }
    let steps = resample_steps(epsilon, cfg.resample_c);
    let n = ensemble.n();
    let size = ensemble.m() / (steps + 1);
    if size < n {
        return Err(Error::Config(format!(
            "{} rows cannot supply {} blocks of at least {n} rows",
            ensemble.m(),
            steps + 1
        )));
    }
    let blocks = partition(ensemble, y, steps + 1)?;

    let init_cfg = InitConfig { signal_field: Field::Real, ..cfg.init };
    let mut rec = TraceRecorder::new(ensemble, y, truth);
    let first = &blocks[0];
    let x0 = init_exp_spectral(&first.ensemble, &first.observations, &init_cfg)?.x0;
    rec.push_on(x0.clone(), StepFlags::default(), &first.ensemble, &first.observations)?;
    rec.push_block(first.rows.clone());

    let mut x = x0;
    for block in &blocks[1..] {
        let step = match gn_step_real(&block.ensemble, &block.observations, &x) {
            Ok(s) => s,
            Err(e) => return Ok(rec.finish(SolveStatus::StepFailed(e.to_string()))),
        };
        let flags = StepFlags { regularized: step.regularized, ..Default::default() };
        rec.push_on(step.next.clone(), flags, &block.ensemble, &block.observations)?;
        rec.push_block(block.rows.clone());
        x = step.next;
    }
    Ok(rec.finish(SolveStatus::Completed))
}
