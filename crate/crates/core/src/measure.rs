//! Gaussian sensing ensembles and the intensity observation model.

use std::fs;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, Field, Scalar, Signal, C64};
use crate::rng;

/// `m` sensing vectors `a_j` stored as the rows of a matrix.
///
/// Observations are `y_j = |a_j^H z|^2`, so the measurement matrix in the
/// usual `y = |A z|^2` notation is the conjugate of the stored matrix. A real
/// ensemble has zero imaginary parts.
#[derive(Clone, Debug, PartialEq)]
pub struct SensingEnsemble {
    vectors: DenseMatrix<C64>,
    field: Field,
    seed: u64,
}

impl SensingEnsemble {
    /// Draw `m` i.i.d. Gaussian sensing vectors of length `n`: `N(0, I)` for
    /// real, `N(0, I/2) + i N(0, I/2)` for complex.
    ///
    /// Entries are filled row by row from a single stream keyed by `seed`;
    /// a complex entry takes its real part draw and then its imaginary part.
    pub fn sample(m: usize, n: usize, field: Field, seed: u64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidArgument("ensemble dimensions must be positive".into()));
        }
        if m < n {
            log::warn!("sampling {m} measurements for a signal of length {n}; recovery is not identifiable");
        }
        let mut rng = rng::stream(seed, rng::STREAM_ENSEMBLE);
        let vectors = match field {
            Field::Real => DenseMatrix::from_fn(m, n, |_, _| C64::new(f64::sample_standard(&mut rng), 0.0)),
            Field::Complex => DenseMatrix::from_fn(m, n, |_, _| C64::sample_standard(&mut rng)),
        };
        Ok(SensingEnsemble { vectors, field, seed })
    }

    /// Wrap explicit sensing vectors (one per row).
    pub fn from_vectors(vectors: DenseMatrix<C64>, field: Field) -> Result<Self> {
        if field == Field::Real && vectors.as_slice().iter().any(|v| v.im != 0.0) {
            return Err(Error::FieldMismatch("real ensemble with non-zero imaginary parts".into()));
        }
        Ok(SensingEnsemble { vectors, field, seed: 0 })
    }

    pub fn m(&self) -> usize {
        self.vectors.rows()
    }

    pub fn n(&self) -> usize {
        self.vectors.cols()
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn vectors(&self) -> &DenseMatrix<C64> {
        &self.vectors
    }

    /// Sensing vector `a_j`.
    pub fn vector(&self, j: usize) -> &[C64] {
        self.vectors.row(j)
    }

    /// `a_j^H x` for every row.
    pub fn project(&self, x: &[C64]) -> Result<Vec<C64>> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), found: x.len() });
        }
        Ok((0..self.m())
            .map(|j| {
                self.vector(j)
                    .iter()
                    .zip(x)
                    .fold(C64::new(0.0, 0.0), |acc, (a, v)| acc + a.conj() * v)
            })
            .collect())
    }

    /// `(a_jR^T x, a_jI^T x)` for every row, for real `x`.
    pub fn project_real(&self, x: &[f64]) -> Result<Vec<(f64, f64)>> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), found: x.len() });
        }
        Ok((0..self.m())
            .map(|j| {
                self.vector(j).iter().zip(x).fold((0.0, 0.0), |(r, i), (a, v)| (r + a.re * v, i + a.im * v))
            })
            .collect())
    }

    /// Noiseless intensities `|a_j^H x|^2`.
    pub fn intensities(&self, x: &Signal) -> Result<Vec<f64>> {
        Ok(self.project(x.entries())?.iter().map(|p| p.norm_sqr()).collect())
    }

    /// Rows `range` as a new ensemble.
    pub fn rows(&self, range: Range<usize>) -> SensingEnsemble {
        SensingEnsemble {
            vectors: self.vectors.row_slice(range.start, range.end),
            field: self.field,
            seed: self.seed,
        }
    }
}

/// Measured intensities `y_j`, possibly with additive Gaussian noise.
#[derive(Clone, Debug, PartialEq)]
pub struct Observations {
    pub y: Vec<f64>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Observations {
    pub fn noiseless(y: Vec<f64>) -> Self {
        Observations { y, noise_sigma: 0.0, seed: 0 }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.y.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `y_j = |a_j^H z|^2 + eta_j` with `eta_j ~ N(0, noise_sigma^2)` i.i.d.
pub fn observe(ensemble: &SensingEnsemble, z: &Signal, noise_sigma: f64, seed: u64) -> Result<Observations> {
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("noise sigma must be finite and >= 0, got {noise_sigma}")));
    }
    let mut y = ensemble.intensities(z)?;
    if noise_sigma > 0.0 {
        let mut rng = rng::stream(seed, rng::STREAM_NOISE);
        for v in &mut y {
            *v += noise_sigma * f64::sample_standard(&mut rng);
        }
    }
    Ok(Observations { y, noise_sigma, seed })
}

/// One block of a row partition.
#[derive(Clone, Debug)]
pub struct Block {
    /// Rows of the parent ensemble this block was cut from.
    pub rows: Range<usize>,
    pub ensemble: SensingEnsemble,
    pub observations: Observations,
}

/// Split into `blocks` consecutive disjoint blocks of `floor(m / blocks)` rows;
/// the remaining `m mod blocks` trailing rows are dropped.
pub fn partition(ensemble: &SensingEnsemble, obs: &Observations, blocks: usize) -> Result<Vec<Block>> {
    let m = ensemble.m();
    if obs.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: obs.len() });
    }
    if blocks == 0 {
        return Err(Error::InvalidArgument("partition needs at least one block".into()));
    }
    if blocks > m {
        return Err(Error::InvalidArgument(format!("cannot cut {m} rows into {blocks} blocks")));
    }
    let size = m / blocks;
    Ok((0..blocks)
        .map(|b| {
            let rows = b * size..(b + 1) * size;
            Block {
                ensemble: ensemble.rows(rows.clone()),
                observations: Observations {
                    y: obs.y[rows.clone()].to_vec(),
                    noise_sigma: obs.noise_sigma,
                    seed: obs.seed,
                },
                rows,
            }
        })
        .collect())
}

/// Metadata stored as `meta.json` next to the binary arrays of a problem
/// instance directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub m: usize,
    pub n: usize,
    pub field: Field,
    pub signal_field: Field,
    pub ensemble_seed: u64,
    pub noise_seed: u64,
    pub sigma: f64,
    pub layout: String,
}

const LAYOUT: &str = "little-endian f64; A.bin holds sensing vectors a_j row-major (m x n), \
complex entries interleaved re,im; y_j = |a_j^H z|^2 + eta_j; z.bin interleaved when complex";

/// A complete synthetic problem: sensing vectors, intensities and the truth.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemInstance {
    pub ensemble: SensingEnsemble,
    pub observations: Observations,
    pub signal: Signal,
}

fn write_f64s(path: &Path, values: impl Iterator<Item = f64>) -> Result<()> {
    let bytes: Vec<u8> = values.flat_map(f64::to_le_bytes).collect();
    fs::write(path, bytes)?;
    Ok(())
}

fn read_f64s(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Serialization(format!("{} is not a whole number of f64 values", path.display())));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

fn flatten(values: &[C64], field: Field) -> Vec<f64> {
    match field {
        Field::Real => values.iter().map(|v| v.re).collect(),
        Field::Complex => values.iter().flat_map(|v| [v.re, v.im]).collect(),
    }
}

fn unflatten(values: &[f64], field: Field, expected: usize) -> Result<Vec<C64>> {
    let out: Vec<C64> = match field {
        Field::Real => values.iter().map(|&v| C64::new(v, 0.0)).collect(),
        Field::Complex => values.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect(),
    };
    let stride = if field == Field::Complex { 2 } else { 1 };
    if out.len() != expected || values.len() != expected * stride {
        return Err(Error::DimensionMismatch { expected: expected * stride, found: values.len() });
    }
    Ok(out)
}

impl ProblemInstance {
    /// Sample an ensemble and a Gaussian signal, then observe.
    pub fn synthesize(m: usize, n: usize, field: Field, signal_field: Field, sigma: f64, seed: u64) -> Result<Self> {
        let ensemble = SensingEnsemble::sample(m, n, field, seed)?;
        let signal = Signal::random(n, signal_field, seed)?;
        let observations = observe(&ensemble, &signal, sigma, seed)?;
        Ok(ProblemInstance { ensemble, observations, signal })
    }

    pub fn meta(&self) -> InstanceMeta {
        InstanceMeta {
            m: self.ensemble.m(),
            n: self.ensemble.n(),
            field: self.ensemble.field(),
            signal_field: self.signal.field(),
            ensemble_seed: self.ensemble.seed(),
            noise_seed: self.observations.seed,
            sigma: self.observations.noise_sigma,
            layout: LAYOUT.to_string(),
        }
    }

    /// Write `meta.json`, `A.bin`, `y.bin` and `z.bin` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&self.meta())?)?;
        let field = self.ensemble.field();
        write_f64s(&dir.join("A.bin"), flatten(self.ensemble.vectors().as_slice(), field).into_iter())?;
        write_f64s(&dir.join("y.bin"), self.observations.y.iter().copied())?;
        write_f64s(&dir.join("z.bin"), flatten(self.signal.entries(), self.signal.field()).into_iter())?;
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let meta: InstanceMeta = serde_json::from_str(&fs::read_to_string(dir.join("meta.json"))?)?;
        let a = unflatten(&read_f64s(&dir.join("A.bin"))?, meta.field, meta.m * meta.n)?;
        let y = read_f64s(&dir.join("y.bin"))?;
        if y.len() != meta.m {
            return Err(Error::DimensionMismatch { expected: meta.m, found: y.len() });
        }
        let z = unflatten(&read_f64s(&dir.join("z.bin"))?, meta.signal_field, meta.n)?;
        let mut ensemble = SensingEnsemble::from_vectors(DenseMatrix::from_row_major(meta.m, meta.n, a)?, meta.field)?;
        ensemble.seed = meta.ensemble_seed;
        let signal = match meta.signal_field {
            Field::Real => Signal::real(z.iter().map(|v| v.re).collect())?,
            Field::Complex => Signal::complex(z)?,
        };
        Ok(ProblemInstance {
            ensemble,
            observations: Observations { y, noise_sigma: meta.sigma, seed: meta.noise_seed },
            signal,
        })
    }
}
