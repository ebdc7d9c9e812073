//! Spectral initializers.
//!
//! Every method estimates the signal direction as the top eigenvector of a
//! weighted covariance `(1/|S|) sum_{j in S} w_j a_j a_j^H` and scales it to
//! `lambda = sqrt(sum_j y_j / m)`:
//!
//! | method               | weight `w_j`                                  | rows `S`          |
//! |----------------------|-----------------------------------------------|-------------------|
//! | `ExpSpectral`        | `1/2 - exp(-y_j / lambda^2)`                  | all               |
//! | `Spectral`           | `y_j`                                         | all               |
//! | `TruncatedSpectral`  | `y_j 1{|y_j| <= beta_y lambda^2}`             | all               |
//! | `Null`               | `1`                                           | top `y_j/‖a_j‖²`  |
//!
//! For a real signal measured by complex vectors the real part of the
//! matrix is used. For a real signal with real vectors the exponential weight
//! uses the constant `1/sqrt(3)` in place of `1/2`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{power_iteration, DenseMatrix, Eigenpair, Field, PowerConfig, Scalar, Signal, C64};
use crate::measure::{Observations, SensingEnsemble};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMethod {
    ExpSpectral,
    Spectral,
    TruncatedSpectral,
    Null,
}

impl InitMethod {
    pub const ALL: [InitMethod; 4] =
        [InitMethod::ExpSpectral, InitMethod::Spectral, InitMethod::TruncatedSpectral, InitMethod::Null];

    pub fn name(self) -> &'static str {
        match self {
            InitMethod::ExpSpectral => "exp-spectral",
            InitMethod::Spectral => "spectral",
            InitMethod::TruncatedSpectral => "truncated-spectral",
            InitMethod::Null => "null",
        }
    }
}

impl fmt::Display for InitMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InitMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exp-spectral" | "exp" | "alg1" => Ok(InitMethod::ExpSpectral),
            "spectral" | "si" => Ok(InitMethod::Spectral),
            "truncated-spectral" | "tsi" => Ok(InitMethod::TruncatedSpectral),
            "null" | "ni" => Ok(InitMethod::Null),
            other => Err(Error::InvalidArgument(format!("unknown initializer `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitConfig {
    pub method: InitMethod,
    pub power: PowerConfig,
    /// Truncation level `beta_y` of the truncated spectral method.
    pub tsi_beta_y: f64,
    /// Fraction of rows kept by the null initializer.
    pub ni_fraction: f64,
    pub signal_field: Field,
    /// Seed of the power-iteration start vector.
    pub seed: u64,
    /// Above this dimension the weighted matrix is applied as an operator
    /// instead of being formed.
    pub operator_threshold: usize,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            method: InitMethod::ExpSpectral,
            power: PowerConfig::default(),
            tsi_beta_y: 9.0,
            ni_fraction: 0.5,
            signal_field: Field::Complex,
            seed: 0,
            operator_threshold: 512,
        }
    }
}

impl InitConfig {
    pub fn new(method: InitMethod, signal_field: Field) -> Self {
        InitConfig { method, signal_field, ..Default::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tsi_beta_y > 0.0) {
            return Err(Error::Config(format!("tsi_beta_y must be positive, got {}", self.tsi_beta_y)));
        }
        if !(self.ni_fraction > 0.0 && self.ni_fraction <= 1.0) {
            return Err(Error::Config(format!("ni_fraction must lie in (0, 1], got {}", self.ni_fraction)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct InitResult {
    pub x0: Signal,
    pub lambda: f64,
    /// Number of n x n matrices formed explicitly (0 on the operator path).
    pub matrix_builds: usize,
    /// Top eigenvalue of the weighted matrix.
    pub eigenvalue: f64,
}

/// `scale * sum_{(j, w) in terms} w a_j a_j^H`, kept in factored form.
#[derive(Clone, Debug)]
pub struct WeightedCovariance<'a> {
    ensemble: &'a SensingEnsemble,
    terms: Vec<(usize, f64)>,
    scale: f64,
}

impl<'a> WeightedCovariance<'a> {
    pub fn new(ensemble: &'a SensingEnsemble, terms: Vec<(usize, f64)>, scale: f64) -> Self {
        WeightedCovariance { ensemble, terms, scale }
    }

    pub fn n(&self) -> usize {
        self.ensemble.n()
    }

    pub fn apply_complex(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.n()];
        for &(j, w) in &self.terms {
            let a = self.ensemble.vector(j);
            let p = a.iter().zip(v).fold(C64::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y) * w;
            for (o, x) in out.iter_mut().zip(a) {
                *o += x * p;
            }
        }
        out.iter_mut().for_each(|o| *o *= self.scale);
        out
    }

    /// Real part of the matrix applied to a real vector.
    pub fn apply_real(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        for &(j, w) in &self.terms {
            let a = self.ensemble.vector(j);
            let (pr, pi) = a.iter().zip(v).fold((0.0, 0.0), |(r, i), (x, y)| (r + x.re * y, i + x.im * y));
            let (pr, pi) = (w * pr, w * pi);
            for (o, x) in out.iter_mut().zip(a) {
                *o += x.re * pr + x.im * pi;
            }
        }
        out.iter_mut().for_each(|o| *o *= self.scale);
        out
    }

    pub fn materialize_complex(&self) -> DenseMatrix<C64> {
        let n = self.n();
        let mut m = DenseMatrix::<C64>::zeros(n, n);
        for &(j, w) in &self.terms {
            let a = self.ensemble.vector(j);
            for r in 0..n {
                let ar = a[r] * w;
                for (mc, ac) in m.row_mut(r).iter_mut().zip(a) {
                    *mc += ar * ac.conj();
                }
            }
        }
        DenseMatrix::from_fn(n, n, |r, c| m[(r, c)] * self.scale)
    }

    pub fn materialize_real(&self) -> DenseMatrix<f64> {
        let n = self.n();
        let mut m = DenseMatrix::<f64>::zeros(n, n);
        for &(j, w) in &self.terms {
            let a = self.ensemble.vector(j);
            for r in 0..n {
                let (ar, ai) = (a[r].re * w, a[r].im * w);
                for (mc, ac) in m.row_mut(r).iter_mut().zip(a) {
                    *mc += ar * ac.re + ai * ac.im;
                }
            }
        }
        DenseMatrix::from_fn(n, n, |r, c| m[(r, c)] * self.scale)
    }
}

/// Eigenpair for the largest algebraic eigenvalue.
///
/// The power method converges to the largest-magnitude eigenvalue. If that
/// one is negative the map is shifted by its magnitude, which makes it
/// positive semidefinite with the wanted eigenvector on top.
fn top_eigenpair<T: Scalar>(apply: impl Fn(&[T]) -> Vec<T>, n: usize, cfg: &InitConfig) -> Result<Eigenpair<T>> {
    let first = power_iteration(&apply, n, cfg.power, cfg.seed)?;
    if first.value >= 0.0 {
        return Ok(first);
    }
    let shift = T::from_real(-first.value);
    let shifted = |v: &[T]| {
        let mut w = apply(v);
        w.iter_mut().zip(v).for_each(|(o, &x)| *o += shift * x);
        w
    };
    let mut second = power_iteration(shifted, n, cfg.power, cfg.seed)?;
    second.value += first.value;
    Ok(second)
}

fn check_inputs(ensemble: &SensingEnsemble, y: &Observations, cfg: &InitConfig) -> Result<f64> {
    cfg.validate()?;
    if y.len() != ensemble.m() {
        return Err(Error::DimensionMismatch { expected: ensemble.m(), found: y.len() });
    }
    if cfg.signal_field == Field::Complex && ensemble.field() == Field::Real {
        return Err(Error::FieldMismatch("a complex signal cannot be initialized from real sensing vectors".into()));
    }
    let lambda2 = y.y.iter().sum::<f64>() / y.len() as f64;
    if !(lambda2 > 0.0) || !lambda2.is_finite() {
        return Err(Error::Degenerate(format!("mean intensity is {lambda2}; the signal scale is undefined")));
    }
    Ok(lambda2)
}

fn finish(cov: WeightedCovariance<'_>, lambda2: f64, cfg: &InitConfig) -> Result<InitResult> {
    let n = cov.n();
    let lambda = lambda2.sqrt();
    let materialize = n <= cfg.operator_threshold;
    let (x0, eigenvalue) = match cfg.signal_field {
        Field::Real => {
            let ep = if materialize {
                let m = cov.materialize_real();
                top_eigenpair(|v: &[f64]| m.matvec(v).expect("square matrix"), n, cfg)?
            } else {
                top_eigenpair(|v: &[f64]| cov.apply_real(v), n, cfg)?
            };
            (Signal::real(ep.vector.iter().map(|v| v * lambda).collect())?, ep.value)
        }
        Field::Complex => {
            let ep = if materialize {
                let m = cov.materialize_complex();
                top_eigenpair(|v: &[C64]| m.matvec(v).expect("square matrix"), n, cfg)?
            } else {
                top_eigenpair(|v: &[C64]| cov.apply_complex(v), n, cfg)?
            };
            (Signal::complex(ep.vector.iter().map(|v| v * lambda).collect())?, ep.value)
        }
    };
    Ok(InitResult { x0, lambda, matrix_builds: usize::from(materialize), eigenvalue })
}

/// Exponential weights `c - exp(-y_j / lambda^2)` clamped to `[-10, 10]`.
pub fn exp_weights(y: &[f64], lambda2: f64, constant: f64) -> Vec<f64> {
    y.iter().map(|&v| (constant - (-v / lambda2).exp()).clamp(-10.0, 10.0)).collect()
}

pub fn init_exp_spectral(ensemble: &SensingEnsemble, y: &Observations, cfg: &InitConfig) -> Result<InitResult> {
    let lambda2 = check_inputs(ensemble, y, cfg)?;
    let constant = if cfg.signal_field == Field::Real && ensemble.field() == Field::Real {
        1.0 / 3f64.sqrt()
    } else {
        0.5
    };
    let terms = exp_weights(&y.y, lambda2, constant).into_iter().enumerate().collect();
    finish(WeightedCovariance::new(ensemble, terms, 1.0 / y.len() as f64), lambda2, cfg)
}

pub fn init_spectral(ensemble: &SensingEnsemble, y: &Observations, cfg: &InitConfig) -> Result<InitResult> {
    let lambda2 = check_inputs(ensemble, y, cfg)?;
    let terms = y.y.iter().copied().enumerate().collect();
    finish(WeightedCovariance::new(ensemble, terms, 1.0 / y.len() as f64), lambda2, cfg)
}

/// Indices dropped by the truncated spectral method: `{j : |y_j| > beta lambda^2}`.
pub fn truncated_indices(y: &[f64], beta: f64, lambda2: f64) -> Vec<usize> {
    y.iter().enumerate().filter(|(_, v)| v.abs() > beta * lambda2).map(|(j, _)| j).collect()
}

pub fn init_truncated_spectral(ensemble: &SensingEnsemble, y: &Observations, cfg: &InitConfig) -> Result<InitResult> {
    let lambda2 = check_inputs(ensemble, y, cfg)?;
    let bound = cfg.tsi_beta_y * lambda2;
    let terms: Vec<(usize, f64)> = y.y.iter().copied().enumerate().filter(|(_, v)| v.abs() <= bound).collect();
    if terms.is_empty() {
        return Err(Error::Degenerate("truncation removed every observation".into()));
    }
    finish(WeightedCovariance::new(ensemble, terms, 1.0 / y.len() as f64), lambda2, cfg)
}

/// Rows kept by the null initializer: the `round(fraction m)` largest
/// `y_j / ||a_j||^2`, ties going to the lower index. Returned in ascending
/// order.
pub fn null_selection(ensemble: &SensingEnsemble, y: &Observations, fraction: f64) -> Result<Vec<usize>> {
    let m = ensemble.m();
    let keep = (fraction * m as f64).round() as usize;
    if keep < 1 {
        return Err(Error::Config(format!("ni_fraction {fraction} keeps no rows out of {m}")));
    }
    let scores: Vec<f64> = (0..m)
        .map(|j| {
            let a2: f64 = ensemble.vector(j).iter().map(|v| v.norm_sqr()).sum();
            if a2 > 0.0 { y.y[j] / a2 } else { f64::NEG_INFINITY }
        })
        .collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    order.truncate(keep.min(m));
    order.sort_unstable();
    Ok(order)
}

pub fn init_null(ensemble: &SensingEnsemble, y: &Observations, cfg: &InitConfig) -> Result<InitResult> {
    let lambda2 = check_inputs(ensemble, y, cfg)?;
    let selected = null_selection(ensemble, y, cfg.ni_fraction)?;
    let scale = 1.0 / selected.len() as f64;
    let terms = selected.into_iter().map(|j| (j, 1.0)).collect();
    finish(WeightedCovariance::new(ensemble, terms, scale), lambda2, cfg)
}

/// Dispatch on `cfg.method`.
pub fn initialize(ensemble: &SensingEnsemble, y: &Observations, cfg: &InitConfig) -> Result<InitResult> {
    match cfg.method {
        InitMethod::ExpSpectral => init_exp_spectral(ensemble, y, cfg),
        InitMethod::Spectral => init_spectral(ensemble, y, cfg),
        InitMethod::TruncatedSpectral => init_truncated_spectral(ensemble, y, cfg),
        InitMethod::Null => init_null(ensemble, y, cfg),
    }
}
