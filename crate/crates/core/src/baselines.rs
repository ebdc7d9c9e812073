//! Comparison solvers: Wirtinger flow and alternating minimization (error
//! reduction).
//!
//! Both run over the field of the starting point. A real `x0` keeps every
//! iterate real: Wirtinger flow then steps along the real part of its
//! gradient, and the least-squares substep of alternating minimization is
//! solved over real vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, Field, MinNormSolver, Signal, C64};
use crate::measure::{Observations, SensingEnsemble};
use crate::trace::{SolveStatus, SolveTrace, StepFlags, TraceRecorder};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub max_iters: usize,
    pub rel_err_tol: f64,
    /// Stopping level for the residual proxy when no truth is given.
    pub residual_tol: f64,
    pub wf_mu_max: f64,
    pub wf_tau0: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig { max_iters: 2500, rel_err_tol: 1e-5, residual_tol: 1e-12, wf_mu_max: 0.2, wf_tau0: 330.0 }
    }
}

impl BaselineConfig {
    fn validate(&self) -> Result<()> {
        let ok = self.rel_err_tol > 0.0 && self.residual_tol > 0.0 && self.wf_mu_max > 0.0 && self.wf_tau0 > 0.0;
        if !ok {
            return Err(Error::Config("baseline parameters must be positive".into()));
        }
        Ok(())
    }

    fn converged(&self, rel: f64, truth: bool) -> bool {
        if truth { rel < self.rel_err_tol } else { rel < self.residual_tol }
    }
}

fn check_dims(ensemble: &SensingEnsemble, y: &Observations, x: &Signal, truth: Option<&Signal>) -> Result<()> {
    if x.len() != ensemble.n() {
        return Err(Error::DimensionMismatch { expected: ensemble.n(), found: x.len() });
    }
    if y.len() != ensemble.m() {
        return Err(Error::DimensionMismatch { expected: ensemble.m(), found: y.len() });
    }
    if let Some(z) = truth {
        if z.len() != x.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), found: z.len() });
        }
    }
    Ok(())
}

/// Wirtinger gradient `(1/m) sum_j (|a_j^H x|^2 - y_j) a_j a_j^H x`.
pub fn wf_gradient(ensemble: &SensingEnsemble, y: &Observations, x: &Signal) -> Result<Vec<C64>> {
    check_dims(ensemble, y, x, None)?;
    let p = ensemble.project(x.entries())?;
    let mut g = vec![C64::new(0.0, 0.0); ensemble.n()];
    for (j, pj) in p.iter().enumerate() {
        let w = pj * (pj.norm_sqr() - y.y[j]);
        for (gk, ak) in g.iter_mut().zip(ensemble.vector(j)) {
            *gk += ak * w;
        }
    }
    let scale = 1.0 / ensemble.m() as f64;
    g.iter_mut().for_each(|v| *v *= scale);
    Ok(g)
}

/// Real part of the Wirtinger gradient at a real point, without complex
/// arithmetic.
fn wf_gradient_real(ensemble: &SensingEnsemble, y: &Observations, x: &[f64]) -> Result<Vec<f64>> {
    let proj = ensemble.project_real(x)?;
    let mut g = vec![0.0; ensemble.n()];
    for (j, &(pr, pi)) in proj.iter().enumerate() {
        let r = pr * pr + pi * pi - y.y[j];
        let (wr, wi) = (r * pr, r * pi);
        for (gk, ak) in g.iter_mut().zip(ensemble.vector(j)) {
            *gk += ak.re * wr + ak.im * wi;
        }
    }
    let scale = 1.0 / ensemble.m() as f64;
    g.iter_mut().for_each(|v| *v *= scale);
    Ok(g)
}

/// Wirtinger flow: `x_{k+1} = x_k - (mu_k / ||x_0||^2) grad`,
/// `mu_k = min(1 - exp(-k / tau0), mu_max)`.
///
/// Aborts with [`SolveStatus::Diverged`] once the objective exceeds `1e6`
/// times its starting value.
pub fn wf_solve(
    ensemble: &SensingEnsemble,
    y: &Observations,
    x0: &Signal,
    truth: Option<&Signal>,
    cfg: &BaselineConfig,
) -> Result<SolveTrace> {
    cfg.validate()?;
    check_dims(ensemble, y, x0, truth)?;
    let x0_norm2 = x0.norm().powi(2);
    if !(x0_norm2 > 0.0) {
        return Err(Error::InvalidArgument("Wirtinger flow needs a nonzero start".into()));
    }
    let mut rec = TraceRecorder::new(ensemble, y, truth);
    let rel = rec.push(x0.clone(), StepFlags::default())?;
    if cfg.converged(rel, truth.is_some()) {
        return Ok(rec.finish(SolveStatus::Converged));
    }
    let initial_residual = rec.last_residual();

    let mut x = x0.clone();
    for k in 1..=cfg.max_iters {
        let mu = (1.0 - (-(k as f64) / cfg.wf_tau0).exp()).min(cfg.wf_mu_max);
        let step = mu / x0_norm2;
        let next = match x.field() {
            Field::Real => {
                let xr = x.real_parts();
                let g = wf_gradient_real(ensemble, y, &xr)?;
                Signal::real(xr.iter().zip(&g).map(|(a, b)| a - step * b).collect())
            }
            Field::Complex => {
                let g = wf_gradient(ensemble, y, &x)?;
                Signal::complex(x.entries().iter().zip(&g).map(|(a, b)| a - b * step).collect())
            }
        };
        // Overflow to a non-finite iterate counts as divergence.
        x = match next {
            Ok(v) => v,
            Err(_) => return Ok(rec.finish(SolveStatus::Diverged)),
        };
        let rel = rec.push(x.clone(), StepFlags::default())?;
        if !(rec.last_residual() <= 1e6 * initial_residual) {
            return Ok(rec.finish(SolveStatus::Diverged));
        }
        if cfg.converged(rel, truth.is_some()) {
            return Ok(rec.finish(SolveStatus::Converged));
        }
    }
    Ok(rec.finish(SolveStatus::MaxIterations))
}

/// `|| |A x| - sqrt(max(y, 0)) ||`
pub fn amplitude_residual(ensemble: &SensingEnsemble, y: &Observations, x: &Signal) -> Result<f64> {
    check_dims(ensemble, y, x, None)?;
    let p = ensemble.project(x.entries())?;
    Ok(p.iter()
        .zip(&y.y)
        .map(|(pj, yj)| (pj.norm() - yj.max(0.0).sqrt()).powi(2))
        .sum::<f64>()
        .sqrt())
}

/// Least-squares substep of alternating minimization for either field.
enum AmplitudeFit {
    Complex(MinNormSolver<C64>),
    /// Real `x` against the stacked system `[Re A; Im A]`.
    Real(MinNormSolver<f64>),
}

impl AmplitudeFit {
    fn new(ensemble: &SensingEnsemble, field: Field) -> Result<Self> {
        let (m, n) = (ensemble.m(), ensemble.n());
        // Measurement matrix rows are a_j^H.
        Ok(match field {
            Field::Complex => {
                let a = DenseMatrix::from_fn(m, n, |j, k| ensemble.vector(j)[k].conj());
                AmplitudeFit::Complex(MinNormSolver::new(&a)?)
            }
            Field::Real => {
                let a = DenseMatrix::from_fn(2 * m, n, |r, k| {
                    if r < m { ensemble.vector(r)[k].re } else { -ensemble.vector(r - m)[k].im }
                });
                AmplitudeFit::Real(MinNormSolver::new(&a)?)
            }
        })
    }

    fn rank(&self) -> usize {
        match self {
            AmplitudeFit::Complex(s) => s.rank(),
            AmplitudeFit::Real(s) => s.rank(),
        }
    }

    fn solve(&self, b: &[C64]) -> Result<Signal> {
        match self {
            AmplitudeFit::Complex(s) => Signal::complex(s.solve(b)?),
            AmplitudeFit::Real(s) => {
                let stacked: Vec<f64> = b.iter().map(|v| v.re).chain(b.iter().map(|v| v.im)).collect();
                Signal::real(s.solve(&stacked)?)
            }
        }
    }
}

/// Alternating minimization of `|| A x - sqrt(y) o p ||` over the phases
/// `p_j = a_j^H x / |a_j^H x|` (1 where the projection vanishes) and over `x`.
///
/// Negative noisy intensities are clamped to zero before the square root.
pub fn altmin_solve(
    ensemble: &SensingEnsemble,
    y: &Observations,
    x0: &Signal,
    truth: Option<&Signal>,
    cfg: &BaselineConfig,
) -> Result<SolveTrace> {
    cfg.validate()?;
    check_dims(ensemble, y, x0, truth)?;
    let fit = AmplitudeFit::new(ensemble, x0.field())?;
    let flags = StepFlags { rank_deficient: fit.rank() < ensemble.n(), ..Default::default() };
    let amplitudes: Vec<f64> = y.y.iter().map(|v| v.max(0.0).sqrt()).collect();

    let mut rec = TraceRecorder::new(ensemble, y, truth);
    let rel = rec.push(x0.clone(), flags)?;
    if cfg.converged(rel, truth.is_some()) {
        return Ok(rec.finish(SolveStatus::Converged));
    }
    let mut x = x0.clone();
    for _ in 0..cfg.max_iters {
        let p = ensemble.project(x.entries())?;
        let b: Vec<C64> = p
            .iter()
            .zip(&amplitudes)
            .map(|(pj, aj)| {
                let r = pj.norm();
                let phase = if r > 0.0 { pj / r } else { C64::new(1.0, 0.0) };
                phase * *aj
            })
            .collect();
        x = match fit.solve(&b) {
            Ok(v) => v,
            Err(e) => return Ok(rec.finish(SolveStatus::StepFailed(e.to_string()))),
        };
        let rel = rec.push(x.clone(), flags)?;
        if cfg.converged(rel, truth.is_some()) {
            return Ok(rec.finish(SolveStatus::Converged));
        }
    }
    Ok(rec.finish(SolveStatus::MaxIterations))
}
