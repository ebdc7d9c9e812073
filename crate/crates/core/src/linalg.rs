//! Dense, field-generic linear algebra used by the solvers.
//!
//! Vectors and matrices are stored over either `f64` or `Complex<f64>`; the
//! [`Scalar`] trait ties the two together so one implementation of power
//! iteration, minimal-norm least squares and the phase-invariant distance
//! serves both fields.

use std::fmt;
use std::ops::{Index, IndexMut};

use nalgebra::{ComplexField, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub type C64 = nalgebra::Complex<f64>;

/// Scalar field of a signal or an ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Real,
    Complex,
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Real => f.write_str("real"),
            Field::Complex => f.write_str("complex"),
        }
    }
}

impl std::str::FromStr for Field {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "real" | "r" => Ok(Field::Real),
            "complex" | "c" => Ok(Field::Complex),
            other => Err(Error::InvalidArgument(format!("unknown field `{other}`"))),
        }
    }
}

pub trait Scalar: ComplexField<RealField = f64> + Copy + Default + Send + Sync {
    const FIELD: Field;

    /// Draw a standard Gaussian with unit second moment: N(0,1) for reals,
    /// N(0,1/2) + iN(0,1/2) for complex numbers.
    fn sample_standard<R: Rng + ?Sized>(rng: &mut R) -> Self;

    fn to_c64(self) -> C64;

    /// Drops the imaginary part when `Self` is real.
    fn from_c64(z: C64) -> Self;
}

impl Scalar for f64 {
    const FIELD: Field = Field::Real;

    fn sample_standard<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }

    fn to_c64(self) -> C64 {
        C64::new(self, 0.0)
    }

    fn from_c64(z: C64) -> Self {
        z.re
    }
}

impl Scalar for C64 {
    const FIELD: Field = Field::Complex;

    fn sample_standard<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    }

    fn to_c64(self) -> C64 {
        self
    }

    fn from_c64(z: C64) -> Self {
        z
    }
}

/// `sum_i conj(x_i) y_i`
pub fn dot_h<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.iter()
        .zip(y)
        .fold(T::zero(), |acc, (&a, &b)| acc + a.conjugate() * b)
}

pub fn norm<T: Scalar>(x: &[T]) -> f64 {
    x.iter().map(|v| v.modulus_squared()).sum::<f64>().sqrt()
}

/// Length-n vector over a declared field; the unknown signal or an iterate.
///
/// Entries are held as complex numbers. A real signal always has zero
/// imaginary parts.
#[derive(Clone, Debug, PartialEq)]
pub struct Signal {
    entries: Vec<C64>,
    field: Field,
}

impl Signal {
    pub fn real(entries: Vec<f64>) -> Result<Self> {
        Self::checked(entries.into_iter().map(|v| C64::new(v, 0.0)).collect(), Field::Real)
    }

    pub fn complex(entries: Vec<C64>) -> Result<Self> {
        Self::checked(entries, Field::Complex)
    }

    pub fn from_scalars<T: Scalar>(entries: Vec<T>) -> Result<Self> {
        Self::checked(entries.into_iter().map(T::to_c64).collect(), T::FIELD)
    }

    fn checked(entries: Vec<C64>, field: Field) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument("signal must have at least one entry".into()));
        }
        if entries.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidArgument("signal entries must be finite".into()));
        }
        Ok(Signal { entries, field })
    }

    /// Standard Gaussian signal: N(0,1) entries for real, unit-variance
    /// circular complex Gaussian entries for complex.
    pub fn random(n: usize, field: Field, seed: u64) -> Result<Self> {
        let mut rng = rng::stream(seed, rng::STREAM_SIGNAL);
        match field {
            Field::Real => Self::from_scalars((0..n).map(|_| f64::sample_standard(&mut rng)).collect()),
            Field::Complex => Self::from_scalars((0..n).map(|_| C64::sample_standard(&mut rng)).collect()),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.entries.iter().map(|v| v.re).collect()
    }

    pub fn to_scalars<T: Scalar>(&self) -> Vec<T> {
        self.entries.iter().map(|&v| T::from_c64(v)).collect()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.entries)
    }

    pub fn scaled(&self, s: f64) -> Signal {
        Signal { entries: self.entries.iter().map(|v| v * s).collect(), field: self.field }
    }

    /// Multiply by `e^{i phi}`. Only meaningful for complex signals; a real
    /// signal becomes complex unless `phi` is a multiple of pi.
    pub fn rotated(&self, phi: f64) -> Signal {
        let c = C64::from_polar(1.0, phi);
        Signal { entries: self.entries.iter().map(|v| v * c).collect(), field: Field::Complex }
    }

    pub fn into_complex(self) -> Signal {
        Signal { entries: self.entries, field: Field::Complex }
    }
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("matrix dimensions must be positive".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, found: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("matrix entries must be finite".into()));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Copy of rows `start..end`.
    pub fn row_slice(&self, start: usize, end: usize) -> Self {
        DenseMatrix {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, found: x.len() });
        }
        Ok((0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect())
    }

    /// `A^H x`
    pub fn adjoint_matvec(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.rows {
            return Err(Error::DimensionMismatch { expected: self.rows, found: x.len() });
        }
        let mut out = vec![T::zero(); self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a.conjugate() * xi;
            }
        }
        Ok(out)
    }

    pub fn to_nalgebra(&self) -> DMatrix<T> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    /// Largest absolute entry; zero for an all-zero matrix.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.modulus()).fold(0.0, f64::max)
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Distance from `x` to the phase orbit of `z` for raw vectors over one field.
///
/// The minimizing unimodular factor is `c = <x,z>/|<x,z>|`, which reduces to
/// the sign of `x^T z` for real vectors. The distance is evaluated directly as
/// `||z - c x||` so it stays accurate when `x` is very close to the orbit.
pub fn orbit_distance<T: Scalar>(x: &[T], z: &[T]) -> f64 {
    let ip = dot_h(x, z);
    let m = ip.modulus();
    let c = if m > 0.0 { ip.unscale(m) } else { T::one() };
    x.iter()
        .zip(z)
        .map(|(&a, &b)| (b - c * a).modulus_squared())
        .sum::<f64>()
        .sqrt()
}

/// Phase-invariant distance between `x` and the solution set `{c z : |c| = 1}`.
pub fn dist(x: &Signal, z: &Signal) -> Result<f64> {
    if x.len() != z.len() {
        return Err(Error::DimensionMismatch { expected: z.len(), found: x.len() });
    }
    if x.field() != z.field() {
        return Err(Error::FieldMismatch(format!(
            "dist between {} and {} signals",
            x.field(),
            z.field()
        )));
    }
    Ok(match z.field() {
        Field::Real => orbit_distance(&x.real_parts(), &z.real_parts()),
        Field::Complex => orbit_distance(x.entries(), z.entries()),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    pub iters: usize,
    pub tol: f64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        PowerConfig { iters: 50, tol: 1e-10 }
    }
}

#[derive(Clone, Debug)]
pub struct Eigenpair<T> {
    pub vector: Vec<T>,
    pub value: f64,
    pub iterations: usize,
}

const MAX_RESTARTS: usize = 3;

/// Rotate `v` so its largest-magnitude entry is real and positive.
fn canonical_phase<T: Scalar>(v: &mut [T]) {
    let mut best = 0;
    let mut best_mod = -1.0;
    for (i, x) in v.iter().enumerate() {
        let m = x.modulus();
        if m > best_mod {
            best = i;
            best_mod = m;
        }
    }
    if best_mod > 0.0 {
        let c = v[best].conjugate().unscale(best_mod);
        for x in v.iter_mut() {
            *x *= c;
        }
    }
}

/// Power method for the dominant eigenpair of a symmetric or Hermitian map.
///
/// The start vector is a seeded Gaussian. Iteration stops after `cfg.iters`
/// applications or once successive unit iterates are within `cfg.tol` of each
/// other up to sign or phase. If the map sends the iterate to zero the method
/// restarts from a fresh seeded vector, at most three times.
pub fn power_iteration<T, F>(mut apply: F, n: usize, cfg: PowerConfig, seed: u64) -> Result<Eigenpair<T>>
where
    T: Scalar,
    F: FnMut(&[T]) -> Vec<T>,
{
    if n == 0 {
        return Err(Error::InvalidArgument("power iteration needs n >= 1".into()));
    }
    if cfg.iters == 0 {
        return Err(Error::InvalidArgument("power iteration needs iters >= 1".into()));
    }
    let mut restarts = 0;
    'restart: loop {
        let mut rng = rng::stream(seed, rng::STREAM_POWER + restarts as u64);
        let mut v: Vec<T> = (0..n).map(|_| T::sample_standard(&mut rng)).collect();
        let nv = norm(&v);
        v.iter_mut().for_each(|x| *x = x.unscale(nv));
        canonical_phase(&mut v);

        let mut iterations = 0;
        for _ in 0..cfg.iters {
            let mut w = apply(&v);
            if w.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: w.len() });
            }
            iterations += 1;
            let nw = norm(&w);
            if !(nw > 0.0) || !nw.is_finite() {
                restarts += 1;
                if restarts > MAX_RESTARTS {
                    return Err(Error::ZeroVector { restarts: MAX_RESTARTS });
                }
                continue 'restart;
            }
            w.iter_mut().for_each(|x| *x = x.unscale(nw));
            canonical_phase(&mut w);
            let delta = orbit_distance(&w, &v);
            v = w;
            if delta < cfg.tol {
                break;
            }
        }

        let av = apply(&v);
        if av.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: av.len() });
        }
        let value = dot_h(&v, &av).real();
        return Ok(Eigenpair { vector: v, value, iterations });
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpdSolution {
    pub x: Vec<f64>,
    /// True when the plain Cholesky factorization failed and the ridge
    /// `M + eps I` was solved instead.
    pub regularized: bool,
}

/// Lower Cholesky factor, or the index and value of the first bad pivot.
fn cholesky(m: &DenseMatrix<f64>, ridge: f64) -> std::result::Result<DenseMatrix<f64>, (usize, f64)> {
    let n = m.rows();
    let mut l = DenseMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)] + ridge;
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err((j, d));
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

fn cholesky_solve(l: &DenseMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[(k, i)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    y
}

/// Solve `M x = b` for symmetric positive-definite `M` via Cholesky.
///
/// When the factorization breaks down, retries once with the ridge
/// `M + eps I`, `eps = 1e-10 trace(M)/n`, and flags the result.
pub fn solve_spd(m: &DenseMatrix<f64>, b: &[f64]) -> Result<SpdSolution> {
    let n = m.rows();
    if m.cols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: m.cols() });
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: b.len() });
    }
    let scale = m.max_abs();
    let mut asym: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if asym > 1e-10 * scale {
        return Err(Error::NotSymmetric(asym / scale));
    }

    match cholesky(m, 0.0) {
        Ok(l) => Ok(SpdSolution { x: cholesky_solve(&l, b), regularized: false }),
        Err(_) => {
            let trace: f64 = (0..n).map(|i| m[(i, i)]).sum();
            let eps = 1e-10 * trace / n as f64;
            match cholesky(m, eps) {
                Ok(l) => Ok(SpdSolution { x: cholesky_solve(&l, b), regularized: true }),
                Err((index, pivot)) => Err(Error::Singular { index, pivot }),
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstsqSolution<T> {
    pub x: Vec<T>,
    pub rank: usize,
}

/// Truncated singular value decomposition of a fixed matrix, reusable for
/// many right-hand sides.
#[derive(Clone, Debug)]
pub struct MinNormSolver<T: Scalar> {
    rows: usize,
    cols: usize,
    /// Retained left singular vectors, one per column.
    u: DMatrix<T>,
    /// Retained right singular vectors, conjugate-transposed (one per row).
    v_t: DMatrix<T>,
    sigma: DVector<f64>,
    tolerance: f64,
}

impl<T: Scalar> MinNormSolver<T> {
    /// Singular values at or below `sigma_max * max(m, p) * 2.2e-16` are
    /// treated as zero.
    pub fn new(a: &DenseMatrix<T>) -> Result<Self> {
        let (rows, cols) = (a.rows(), a.cols());
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("least squares needs m, p >= 1".into()));
        }
        // nalgebra's own default; a tighter convergence threshold can return
        // factors that no longer reproduce `A`.
        let svd = a
            .to_nalgebra()
            .try_svd(true, true, 5.0 * f64::EPSILON, 0)
            .ok_or(Error::SvdFailure)?;
        let u = svd.u.ok_or(Error::SvdFailure)?;
        let v_t = svd.v_t.ok_or(Error::SvdFailure)?;
        let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
        let tolerance = sigma_max * rows.max(cols) as f64 * f64::EPSILON;

        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] > tolerance)
            .collect();
        let u = u.select_columns(keep.iter());
        let v_t = v_t.select_rows(keep.iter());
        let sigma = DVector::from_iterator(keep.len(), keep.iter().map(|&i| svd.singular_values[i]));
        Ok(MinNormSolver { rows, cols, u, v_t, sigma, tolerance })
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn singular_values(&self) -> &[f64] {
        self.sigma.as_slice()
    }

    /// `A^+ b`
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        if b.len() != self.rows {
            return Err(Error::DimensionMismatch { expected: self.rows, found: b.len() });
        }
        let b = DVector::from_column_slice(b);
        let mut c = self.u.ad_mul(&b);
        for (ci, &s) in c.iter_mut().zip(self.sigma.iter()) {
            *ci = ci.unscale(s);
        }
        let x = self.v_t.ad_mul(&c);
        debug_assert_eq!(x.len(), self.cols);
        Ok(x.iter().copied().collect())
    }

    /// Remove the component of `w` in the retained row space of `A`; the
    /// result lies in the numerical null space.
    pub fn project_to_null_space(&self, w: &[T]) -> Result<Vec<T>> {
        if w.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, found: w.len() });
        }
        let w = DVector::from_column_slice(w);
        let coeff = &self.v_t * &w;
        let proj = self.v_t.ad_mul(&coeff);
        Ok((w - proj).iter().copied().collect())
    }
}

/// Minimal-norm least-squares solution `A^+ b` via a truncated SVD.
///
/// An all-zero `A` yields the zero vector with rank 0.
pub fn min_norm_lsq<T: Scalar>(a: &DenseMatrix<T>, b: &[T]) -> Result<LstsqSolution<T>> {
    if b.len() != a.rows() {
        return Err(Error::DimensionMismatch { expected: a.rows(), found: b.len() });
    }
    let solver = MinNormSolver::new(a)?;
    Ok(LstsqSolution { x: solver.solve(b)?, rank: solver.rank() })
}
