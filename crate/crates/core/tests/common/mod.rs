//! Independent oracles shared by the integration and acceptance tests.
//! Nothing here calls the library's numerical kernels.

#![allow(dead_code, clippy::needless_range_loop)]

use phasegn::measure::{observe, Observations, SensingEnsemble};
use phasegn::{Field, Signal, C64};

pub struct Problem {
    pub ensemble: SensingEnsemble,
    pub y: Observations,
    pub z: Signal,
}

/// Unit-norm signal so absolute and relative distances coincide.
pub fn unit_signal(n: usize, field: Field, seed: u64) -> Signal {
    let z = Signal::random(n, field, seed).unwrap();
    z.scaled(1.0 / z.norm())
}

pub fn problem(m: usize, n: usize, ens: Field, sig: Field, seed: u64) -> Problem {
    let ensemble = SensingEnsemble::sample(m, n, ens, seed).unwrap();
    let z = unit_signal(n, sig, seed);
    let y = observe(&ensemble, &z, 0.0, seed).unwrap();
    Problem { ensemble, y, z }
}

/// Small deterministic generator for test data (SplitMix64).
pub struct Mix(pub u64);

impl Mix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [-1, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    pub fn vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.uniform()).collect()
    }

    pub fn cvec(&mut self, n: usize) -> Vec<C64> {
        (0..n).map(|_| C64::new(self.uniform(), self.uniform())).collect()
    }
}

fn parts(e: &SensingEnsemble, j: usize) -> (Vec<f64>, Vec<f64>) {
    let a = e.vector(j);
    (a.iter().map(|v| v.re).collect(), a.iter().map(|v| v.im).collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `(4/m) sum [ (aR.x)^2 aR aR^T + (aI.x)^2 aI aI^T + (aR.x)(aI.x)(aI aR^T + aR aI^T) ]`
/// accumulated entry by entry.
pub fn brute_normal_matrix(e: &SensingEnsemble, x: &[f64]) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut out = vec![vec![0.0; n]; n];
    for j in 0..e.m() {
        let (ar, ai) = parts(e, j);
        let (r, i) = (dot(&ar, x), dot(&ai, x));
        for p in 0..n {
            for q in 0..n {
                out[p][q] += r * r * ar[p] * ar[q] + i * i * ai[p] * ai[q] + r * i * (ai[p] * ar[q] + ar[p] * ai[q]);
            }
        }
    }
    let s = 4.0 / e.m() as f64;
    out.iter_mut().flatten().for_each(|v| *v *= s);
    out
}

/// `(2/m) sum ((aR.x)^2 + (aI.x)^2 - y_j)(aR aR^T x + aI aI^T x)`.
pub fn brute_gradient(e: &SensingEnsemble, y: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut g = vec![0.0; n];
    for j in 0..e.m() {
        let (ar, ai) = parts(e, j);
        let (r, i) = (dot(&ar, x), dot(&ai, x));
        let res = r * r + i * i - y[j];
        for p in 0..n {
            g[p] += res * (ar[p] * r + ai[p] * i);
        }
    }
    g.iter_mut().for_each(|v| *v *= 2.0 / e.m() as f64);
    g
}

/// `(1/2m) sum (|a_j^H x|^2 - y_j)^2` with `a_j^H x` summed directly.
pub fn brute_objective(e: &SensingEnsemble, y: &[f64], x: &[C64]) -> f64 {
    let mut s = 0.0;
    for (j, yj) in y.iter().enumerate() {
        let p: C64 = e.vector(j).iter().zip(x).map(|(a, v)| a.conj() * v).sum();
        let r = p.norm_sqr() - yj;
        s += r * r;
    }
    s / (2.0 * e.m() as f64)
}

/// Central differences of `f` at `x` with step `h`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|k| {
            let mut p = x.to_vec();
            let mut q = x.to_vec();
            p[k] += h;
            q[k] -= h;
            (f(&p) - f(&q)) / (2.0 * h)
        })
        .collect()
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

/// Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q))).map(|(p, q)| a[p][q].powi(2)).sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Spectral norm of a real symmetric matrix.
pub fn sym_op_norm(a: Vec<Vec<f64>>) -> f64 {
    jacobi_eigenvalues(a).iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Spectral norm of a Hermitian matrix via its real embedding
/// `[[Re, -Im], [Im, Re]]`, which carries each eigenvalue twice.
pub fn herm_op_norm(h: &[Vec<C64>]) -> f64 {
    let n = h.len();
    let mut r = vec![vec![0.0; 2 * n]; 2 * n];
    for p in 0..n {
        for q in 0..n {
            r[p][q] = h[p][q].re;
            r[p + n][q + n] = h[p][q].re;
            r[p][q + n] = -h[p][q].im;
            r[p + n][q] = h[p][q].im;
        }
    }
    sym_op_norm(r)
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 { v[k] } else { 0.5 * (v[k - 1] + v[k]) }
}

/// Operator-norm errors of three Monte-Carlo matrices against their
/// closed-form expectations at n = 4, m = 800n, unit truth.
pub struct MomentErrors {
    /// `||Y1 - zz*/4||` and `||zz*/4||`.
    pub y1: (f64, f64),
    /// `||(1/m) sum y_j a_j a_j* - (I + zz*)||` and the norm of the expectation.
    pub spectral: (f64, f64),
    /// `||J^T J - (2I + 6xx^T)||` and the norm of the expectation.
    pub normal: (f64, f64),
}

pub fn moment_errors(seed: u64) -> MomentErrors {
    use phasegn::init::{exp_weights, WeightedCovariance};
    let (n, m) = (4, 3200);
    let p = problem(m, n, Field::Complex, Field::Complex, seed);
    let z = p.z.entries();
    let outer = |s: f64, i: usize, k: usize| z[i] * z[k].conj() * s;

    let w = exp_weights(&p.y.y, 1.0, 0.5);
    let y1 = WeightedCovariance::new(&p.ensemble, w.into_iter().enumerate().collect(), 1.0 / m as f64).materialize_complex();
    let diff: Vec<Vec<C64>> = (0..n).map(|i| (0..n).map(|k| y1[(i, k)] - outer(0.25, i, k)).collect()).collect();
    let y1_err = herm_op_norm(&diff);

    let si = WeightedCovariance::new(&p.ensemble, p.y.y.iter().copied().enumerate().collect(), 1.0 / m as f64).materialize_complex();
    let diff: Vec<Vec<C64>> = (0..n)
        .map(|i| (0..n).map(|k| si[(i, k)] - outer(1.0, i, k) - if i == k { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }).collect())
        .collect();
    let si_err = herm_op_norm(&diff);

    let x = unit_signal(n, Field::Real, seed + 1000);
    let xr = x.real_parts();
    let jtj = phasegn::solver::gn_normal_matrix(&p.ensemble, &x).unwrap();
    let diff: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|k| jtj[(i, k)] - 6.0 * xr[i] * xr[k] - if i == k { 2.0 } else { 0.0 }).collect())
        .collect();
    let normal_err = sym_op_norm(diff);

    MomentErrors { y1: (y1_err, 0.25), spectral: (si_err, 2.0), normal: (normal_err, 8.0) }
}

/// `z + r h / ||h||` for a pseudo-random real direction `h`.
pub fn real_start_at(z: &Signal, r: f64, seed: u64) -> Signal {
    let h = Mix(seed ^ 0x5EED).vec(z.len());
    let hn = h.iter().map(|v| v * v).sum::<f64>().sqrt();
    Signal::real(z.real_parts().iter().zip(&h).map(|(a, b)| a + r * b / hn).collect()).unwrap()
}

/// `ceil(8 n ln n)`.
pub fn contraction_rows(n: usize) -> usize {
    (8.0 * n as f64 * (n as f64).ln()).ceil() as usize
}
