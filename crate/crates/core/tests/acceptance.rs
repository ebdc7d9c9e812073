//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Every tolerance and budget is pinned below.

mod common;

use std::io::Write;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::*;
use phasegn::baselines::{altmin_solve, wf_solve, BaselineConfig};
use phasegn::bench::{self, Experiment, ExperimentConfig, GridSpec, SolverKind};
use phasegn::init::{init_exp_spectral, InitConfig, InitMethod};
use phasegn::linalg::{min_norm_lsq, MinNormSolver};
use phasegn::measure::partition;
use phasegn::solver::{
    complex_linearization, gn_gradient, gn_normal_matrix, gn_step_complex, gn_step_real, objective, resample_steps,
    solve_gn_resampled, GnConfig,
};
use phasegn::{dist, DenseMatrix, Field, SensingEnsemble, Signal, C64};

type Outcome = Result<String, String>;

/// Collects failed checks instead of stopping at the first one.
#[derive(Default)]
struct Checks(Vec<String>);

impl Checks {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.0.push(what());
        }
    }

    fn finish(self, detail: String) -> Outcome {
        if self.0.is_empty() {
            Ok(detail)
        } else {
            let shown: Vec<_> = self.0.iter().take(3).cloned().collect();
            Err(format!("{} failed check(s): {}; {detail}", self.0.len(), shown.join("; ")))
        }
    }
}

fn cnorm(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn perturbed_complex(z: &Signal, r: f64, seed: u64) -> Signal {
    let h = Mix(seed).cvec(z.len());
    let hn = cnorm(&h);
    Signal::complex(z.entries().iter().zip(&h).map(|(a, b)| a + b * (r / hn)).collect()).unwrap()
}

fn criterion_1() -> Outcome {
    let mut c = Checks::default();
    let bc = BaselineConfig::default();
    for seed in 0..5 {
        let p = problem(96, 8, Field::Complex, Field::Real, seed);
        for x in [p.z.clone(), p.z.scaled(-1.0)] {
            let d = dist(&gn_step_real(&p.ensemble, &p.y, &x).unwrap().next, &p.z).unwrap();
            c.check(d < 1e-13, || format!("real step fixed point {d:e}"));
        }
        let p = problem(96, 8, Field::Complex, Field::Complex, seed);
        for phi in [0.0, 0.7, 2.9] {
            let d = dist(&gn_step_complex(&p.ensemble, &p.y, &p.z.rotated(phi)).unwrap().next, &p.z).unwrap();
            c.check(d < 1e-12, || format!("complex step fixed point {d:e}"));
        }
        for field in [Field::Real, Field::Complex] {
            let p = problem(96, 8, Field::Complex, field, seed);
            for t in [
                wf_solve(&p.ensemble, &p.y, &p.z, Some(&p.z), &bc).unwrap(),
                altmin_solve(&p.ensemble, &p.y, &p.z, Some(&p.z), &bc).unwrap(),
            ] {
                c.check(t.iterations() == 0 && t.final_rel_error() < 1e-14, || "baseline fixed point".into());
            }
        }
    }

    // Global-phase equivariance of observations, steps and baselines.
    let p = problem(120, 8, Field::Complex, Field::Complex, 9);
    let x = perturbed_complex(&p.z, 0.1, 9);
    for phi in [0.4, 1.1, 3.0] {
        let yr = p.ensemble.intensities(&p.z.rotated(phi)).unwrap();
        let worst = yr.iter().zip(&p.y.y).fold(0.0f64, |m, (a, b)| m.max((a - b).abs() / b.max(1.0)));
        c.check(worst < 1e-12, || format!("observations not phase invariant {worst:e}"));
        let a = gn_step_complex(&p.ensemble, &p.y, &x).unwrap().next;
        let b = gn_step_complex(&p.ensemble, &p.y, &x.rotated(phi)).unwrap().next;
        let gap = (dist(&a, &p.z).unwrap() - dist(&b, &p.z).unwrap()).abs();
        c.check(gap < 1e-8, || format!("complex step equivariance {gap:e}"));
        let cfg = BaselineConfig { max_iters: 40, ..bc };
        let wa = wf_solve(&p.ensemble, &p.y, &x, Some(&p.z), &cfg).unwrap();
        let wb = wf_solve(&p.ensemble, &p.y, &x.rotated(phi), Some(&p.z), &cfg).unwrap();
        let aa = altmin_solve(&p.ensemble, &p.y, &x, Some(&p.z), &cfg).unwrap();
        let ab = altmin_solve(&p.ensemble, &p.y, &x.rotated(phi), Some(&p.z), &cfg).unwrap();
        for (u, v) in [(wa, wb), (aa, ab)] {
            let gap = u.rel_errors.iter().zip(&v.rel_errors).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            c.check(u.rel_errors.len() == v.rel_errors.len() && gap < 1e-8, || format!("baseline equivariance {gap:e}"));
        }
    }

    // Metric axioms on random triples.
    let mut rng = Mix(77);
    let mut triples = 0;
    for _ in 0..200 {
        let n = 1 + (rng.next_u64() % 8) as usize;
        let [x, z, w] = [0; 3].map(|_| Signal::complex(rng.cvec(n).iter().map(|v| v * 5.0).collect()).unwrap());
        let tol = 1e-12 * (1.0 + x.norm() + z.norm() + w.norm());
        let dxz = dist(&x, &z).unwrap();
        let phi = 3.0 * rng.uniform();
        c.check(dxz >= 0.0, || "dist negative".into());
        c.check(dist(&x, &x.rotated(phi)).unwrap() <= tol, || "dist(x, e^{i phi} x) > 0".into());
        c.check((dxz - dist(&z, &x).unwrap()).abs() <= tol, || "dist not symmetric".into());
        c.check(dxz <= dist(&x, &w).unwrap() + dist(&w, &z).unwrap() + tol, || "triangle inequality".into());
        triples += 1;
    }
    c.finish(format!("5 instances per fixed point, 3 phases, {triples} metric triples"))
}

fn criterion_2() -> Outcome {
    let mut c = Checks::default();
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for (n, seed) in [(1usize, 1u64), (2, 2), (8, 3)] {
        let m = 6 * n + 3;
        let e = SensingEnsemble::sample(m, n, Field::Complex, seed).unwrap();
        let z = Signal::random(n, Field::Real, seed).unwrap();
        let y = phasegn::measure::observe(&e, &z, 0.05, seed).unwrap();
        let x = Signal::random(n, Field::Real, seed + 10).unwrap();
        let fast = gn_normal_matrix(&e, &x).unwrap();
        let slow = brute_normal_matrix(&e, &x.real_parts());
        let scale = slow.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        for p in 0..n {
            for q in 0..n {
                worst.0 = worst.0.max((fast[(p, q)] - slow[p][q]).abs() / scale);
            }
        }
        let g = gn_gradient(&e, &y, &x).unwrap();
        worst.1 = worst.1.max(rel_diff(&g, &brute_gradient(&e, &y.y, &x.real_parts())));
    }
    c.check(worst.0 <= 1e-14, || format!("normal matrix {:e}", worst.0));
    c.check(worst.1 <= 1e-14, || format!("gradient {:e}", worst.1));

    let (m, n) = (40, 8);
    let e = SensingEnsemble::sample(m, n, Field::Complex, 9).unwrap();
    let z = Signal::random(n, Field::Real, 9).unwrap();
    let y = phasegn::measure::observe(&e, &z, 0.0, 9).unwrap();
    for k in 0..20 {
        let x = Signal::random(n, Field::Real, 100 + k).unwrap();
        let f = |v: &[f64]| objective(&e, &y, &Signal::real(v.to_vec()).unwrap()).unwrap();
        let fd = fd_gradient(f, &x.real_parts(), 1e-5 * x.norm());
        worst.2 = worst.2.max(rel_diff(&gn_gradient(&e, &y, &x).unwrap(), &fd));
    }
    c.check(worst.2 <= 1e-6, || format!("finite differences {:e}", worst.2));

    // Minimality against explicit null-space samples of A = B [I_k, K].
    let mut rng = Mix(21);
    let (rows, p, k) = (10, 7, 4);
    let b: Vec<Vec<C64>> = (0..rows).map(|_| rng.cvec(k)).collect();
    let kk: Vec<Vec<C64>> = (0..k).map(|_| rng.cvec(p - k)).collect();
    let a = DenseMatrix::from_fn(rows, p, |i, j| if j < k { b[i][j] } else { (0..k).map(|l| b[i][l] * kk[l][j - k]).sum() });
    let rhs = rng.cvec(rows);
    let sol = min_norm_lsq(&a, &rhs).unwrap();
    c.check(sol.rank == k, || format!("rank {} != {k}", sol.rank));
    let xn = cnorm(&sol.x);
    for _ in 0..100 {
        let coef = rng.cvec(p - k);
        let mut w = vec![C64::new(0.0, 0.0); p];
        for (col, cf) in coef.iter().enumerate() {
            for l in 0..k {
                w[l] -= kk[l][col] * cf;
            }
            w[k + col] += cf;
        }
        let moved: Vec<C64> = sol.x.iter().zip(&w).map(|(x, w)| x + w).collect();
        c.check(xn <= cnorm(&moved) + 1e-12, || "null-space sample shorter than the minimal-norm solution".into());
    }
    c.finish(format!(
        "normal matrix {:.1e}, gradient {:.1e}, finite differences {:.1e}, 100 null-space samples",
        worst.0, worst.1, worst.2
    ))
}

fn criterion_3() -> Outcome {
    let mut c = Checks::default();
    let mut detail = Vec::new();
    for seed in 1..=3 {
        let e = moment_errors(seed);
        let (y1, normal) = (e.y1.0 / e.y1.1, e.normal.0 / e.normal.1);
        c.check(y1 < 0.1, || format!("seed {seed} Y1 {y1:.3}"));
        c.check(normal < 0.1, || format!("seed {seed} JtJ {normal:.3}"));
        detail.push(format!("seed {seed}: Y1 {y1:.3} JtJ {normal:.3}"));
    }
    c.finish(format!("relative operator-norm errors, {}", detail.join(", ")))
}

fn criterion_4() -> Outcome {
    let mut c = Checks::default();
    let n = 8;
    let mut perturbations = 0;
    for seed in 0..5 {
        let p = problem(8 * n, n, Field::Complex, Field::Complex, 40 + seed);
        let x = perturbed_complex(&p.z, 0.2, seed);
        let step = gn_step_complex(&p.ensemble, &p.y, &x).unwrap();
        let u = &step.correction;
        let (head, tail) = u.split_at(n);
        let pair = head.iter().zip(tail).fold(0.0f64, |m, (h, t)| m.max((t - h.conj()).norm()));
        c.check(pair < 1e-8, || format!("conjugate pair {pair:e}"));

        let (a_k, f) = complex_linearization(&p.ensemble, &p.y, &x).unwrap();
        let sharp = |v: &[C64]| -> Vec<C64> { v.iter().copied().chain(v.iter().map(|c| c.conj())).collect() };
        let res = |v: &[C64]| -> f64 {
            let av = a_k.matvec(&sharp(v)).unwrap();
            av.iter().zip(&f).map(|(a, b)| (a + b).norm_sqr()).sum::<f64>().sqrt()
        };
        let base = res(head);
        let hn = cnorm(head);
        for c0 in [0.5, -1.3] {
            let moved: Vec<C64> = head.iter().zip(x.entries()).map(|(h, xk)| h + C64::new(0.0, c0) * xk).collect();
            let gap = (res(&moved) - base).abs();
            c.check(gap < 1e-9, || format!("residual family {gap:e}"));
            c.check(hn <= cnorm(&moved), || "family member shorter than the correction".into());
        }

        // Random null-space directions of A_k and random family members.
        let solver = MinNormSolver::new(&a_k).unwrap();
        let mut rng = Mix(500 + seed);
        for _ in 0..20 {
            let w = solver.project_to_null_space(&rng.cvec(2 * n)).unwrap();
            let moved: Vec<C64> = u.iter().zip(&w).map(|(a, b)| a + b).collect();
            c.check(cnorm(u) <= cnorm(&moved) + 1e-12, || "null-space perturbation shorter".into());
            let c0 = 3.0 * rng.uniform();
            let member: Vec<C64> = head.iter().zip(x.entries()).map(|(h, xk)| h + C64::new(0.0, c0) * xk).collect();
            c.check(hn <= cnorm(&member) + 1e-12, || format!("family member c0={c0} shorter"));
            perturbations += 1;
        }
    }
    c.finish(format!("5 instances, {perturbations} perturbations"))
}

fn criterion_5() -> Outcome {
    let n = 32;
    let m = contraction_rows(n);
    let seeds = 50;
    let mut ratios = Vec::new();
    let mut good = 0;
    for seed in 0..seeds {
        let p = problem(m, n, Field::Complex, Field::Real, seed);
        let mut x = real_start_at(&p.z, 0.05, seed);
        let mut d = vec![dist(&x, &p.z).unwrap()];
        for _ in 0..6 {
            x = gn_step_real(&p.ensemble, &p.y, &x).unwrap().next;
            d.push(dist(&x, &p.z).unwrap());
            if *d.last().unwrap() < 1e-10 {
                break;
            }
        }
        for w in d.windows(2) {
            if w[0] <= 0.1 && w[0] >= 1e-7 {
                ratios.push(w[1] / (w[0] * w[0]));
            }
        }
        let decreasing = d.windows(2).all(|w| w[1] < w[0]);
        good += usize::from(decreasing && *d.last().unwrap() < 1e-10);
    }
    let med = median(&mut ratios);
    let mut c = Checks::default();
    c.check(med <= 20.0, || format!("median ratio {med:.2}"));
    c.check(good * 100 >= 80 * seeds as usize, || format!("{good}/{seeds} reached 1e-10 monotonically"));
    c.finish(format!("m={m}, median ratio {med:.2} over {} steps, {good}/{seeds} monotone to 1e-10", ratios.len()))
}

fn criterion_6() -> Outcome {
    let mut cfg = ExperimentConfig::defaults(Experiment::Timing);
    cfg.trials = 50;
    let m = 5 * cfg.n;
    let (mut gn, mut wf, mut am) = (Vec::new(), Vec::new(), Vec::new());
    let mut gn_faster = 0;
    let mut c = Checks::default();
    for t in 0..cfg.trials as u64 {
        let run = bench::solver_trial(&cfg, m, cfg.seed + t).unwrap();
        let x0 = run.x0.as_ref().unwrap();
        let mut wall = [f64::INFINITY; 3];
        for (kind, trace) in &run.traces {
            let trace = trace.as_ref().unwrap();
            c.check(&trace.iterates[0] == x0, || format!("{kind} did not start from the shared x0"));
            let k = trace.first_below(1e-5);
            let iters = k.map_or(f64::INFINITY, |k| k as f64);
            let slot = match kind {
                SolverKind::Gn => {
                    gn.push(iters);
                    0
                }
                SolverKind::Wf => {
                    wf.push(iters);
                    1
                }
                SolverKind::Altmin => {
                    am.push(iters);
                    2
                }
            };
            if let Some(k) = k {
                wall[slot] = trace.wall_times[k];
            }
        }
        gn_faster += usize::from(wall[0] < wall[1]);
    }
    let (g, w, a) = (median(&mut gn), median(&mut wf), median(&mut am));
    c.check(g <= 10.0, || format!("GN median {g}"));
    c.check(a <= 500.0, || format!("AltMin median {a}"));
    c.check(w <= 2500.0, || format!("WF median {w}"));
    c.check(gn_faster * 100 >= 90 * cfg.trials, || format!("GN faster in {gn_faster}/{}", cfg.trials));
    c.finish(format!("median iterations GN {g} AltMin {a} WF {w}; GN faster than WF in {gn_faster}/{}", cfg.trials))
}

fn criterion_7() -> Outcome {
    let mut c = Checks::default();
    let mut cfg = ExperimentConfig::defaults(Experiment::Success);
    cfg.methods = vec!["gn".into()];
    let report = bench::run(&cfg).unwrap();
    let mut low = Vec::new();
    for &m in &cfg.m_over_n.measurements(cfg.n) {
        let rate = report.summary("gn", m, "success_rate").unwrap();
        let ratio = m as f64 / cfg.n as f64;
        if ratio >= 3.0 {
            c.check(rate >= 0.98, || format!("GN m/n={ratio} rate {rate}"));
            low.push(rate);
        }
    }
    let worst_high = low.iter().fold(1.0f64, |a, b| a.min(*b));

    let mut one = ExperimentConfig::defaults(Experiment::Success);
    one.m_over_n = GridSpec(vec![1.0]);
    let report = bench::run(&one).unwrap();
    let mut at_one = Vec::new();
    for kind in SolverKind::ALL {
        let rate = report.summary(kind.name(), one.n, "success_rate").unwrap();
        c.check(rate <= 0.05, || format!("{kind} at m/n=1 rate {rate}"));
        at_one.push(format!("{kind} {rate:.2}"));
    }
    c.finish(format!("GN min rate for m/n>=3: {worst_high:.2}; at m/n=1: {}", at_one.join(", ")))
}

fn criterion_8() -> Outcome {
    let mut cfg = ExperimentConfig::defaults(Experiment::InitBench);
    cfg.m_over_n = GridSpec(vec![4.0, 8.0, 12.0, 16.0, 20.0]);
    cfg.trials = 50;
    let report = bench::run(&cfg).unwrap();
    let grid = cfg.m_over_n.measurements(cfg.n);
    let mut c = Checks::default();
    let mean = |method: &str, m: usize| report.summary(method, m, "mean_rel_err").unwrap();
    for &m in &grid {
        let (e, s) = (mean(InitMethod::ExpSpectral.name(), m), mean(InitMethod::Spectral.name(), m));
        c.check(e <= s, || format!("m={m}: ExpSpectral {e:.3} > SI {s:.3}"));
    }
    let (first, last) = (grid[0], grid[grid.len() - 1]);
    let mut detail = Vec::new();
    for method in InitMethod::ALL {
        let (a, b) = (mean(method.name(), first), mean(method.name(), last));
        c.check(b < a, || format!("{} does not improve: {a:.3} -> {b:.3}", method.name()));
        detail.push(format!("{} {a:.3}->{b:.3}", method.name()));
    }
    c.finish(format!("mean error m/n 4->20: {}", detail.join(", ")))
}

fn criterion_9() -> Outcome {
    let (n, eps) = (64, 1e-3);
    let gc = GnConfig::default();
    let steps = resample_steps(eps, gc.resample_c);
    let m = 10 * n * (steps + 1);
    let seeds = 50;
    let mut hits = 0;
    let mut c = Checks::default();
    for seed in 0..seeds {
        let p = problem(m, n, Field::Complex, Field::Real, seed);
        let t = solve_gn_resampled(&p.ensemble, &p.y, eps, Some(&p.z), &gc).unwrap();
        hits += usize::from(dist(t.final_iterate(), &p.z).unwrap() < eps);

        // Audit: the recorded rows are exactly the partition, pairwise
        // disjoint, and every point is reproduced from its own block alone.
        let blocks = partition(&p.ensemble, &p.y, steps + 1).unwrap();
        c.check(t.blocks.len() == steps + 1 && t.iterates.len() == steps + 1, || format!("seed {seed}: trace length"));
        for (k, (r, b)) in t.blocks.iter().zip(&blocks).enumerate() {
            c.check(*r == b.rows && r.len() == 10 * n, || format!("seed {seed}: block {k} rows {r:?}"));
            for later in &t.blocks[k + 1..] {
                c.check(r.end <= later.start, || format!("seed {seed}: blocks overlap"));
            }
        }
        let init = InitConfig { signal_field: Field::Real, ..gc.init };
        let x0 = init_exp_spectral(&blocks[0].ensemble, &blocks[0].observations, &init).unwrap().x0;
        c.check(t.iterates[0] == x0, || format!("seed {seed}: x0 not from block 0"));
        for k in 0..t.iterates.len().saturating_sub(1) {
            let b = &blocks[k + 1];
            let next = gn_step_real(&b.ensemble, &b.observations, &t.iterates[k]).unwrap().next;
            c.check(t.iterates[k + 1] == next, || format!("seed {seed}: step {k} not from block {}", k + 1));
        }
    }
    c.check(hits * 100 >= 80 * seeds as usize, || format!("{hits}/{seeds} below eps"));
    c.finish(format!("T={steps}, m={m}, {hits}/{seeds} below eps, audit over {seeds} seeds"))
}

fn criterion_10() -> Outcome {
    let run = |threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_phasegn"))
            .args(["success", "--n", "16", "--m-over-n", "2:6:1", "--trials", "8", "--sigma", "0.01", "--threads", threads])
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(String::from_utf8_lossy(&out.stderr).into_owned());
        }
        Ok(out.stdout)
    };
    let outputs = ["1", "3", "1", "0"].map(run);
    let first = outputs[0].clone()?;
    for (i, o) in outputs.iter().enumerate().skip(1) {
        if o.as_ref()? != &first {
            return Err(format!("invocation {i} differs from the first"));
        }
    }
    let lines = first.iter().filter(|b| **b == b'\n').count();
    Ok(format!("4 invocations with --threads 1, 3, 1, auto; {lines} identical lines"))
}

type Criterion = (u32, &'static str, Option<Duration>, fn() -> Outcome);

const CRITERIA: [Criterion; 10] = [
    (1, "fixed points, equivariance, dist axioms", Some(Duration::from_secs(5)), criterion_1),
    (2, "oracle equivalence", Some(Duration::from_secs(10)), criterion_2),
    (3, "expectation oracles", Some(Duration::from_secs(30)), criterion_3),
    (4, "complex-step structure", Some(Duration::from_secs(10)), criterion_4),
    (5, "quadratic contraction", Some(Duration::from_secs(120)), criterion_5),
    (6, "iteration counts and wall time", Some(Duration::from_secs(600)), criterion_6),
    (7, "success-rate transition", Some(Duration::from_secs(1800)), criterion_7),
    (8, "initializer ordering", Some(Duration::from_secs(600)), criterion_8),
    (9, "re-sampled driver", Some(Duration::from_secs(300)), criterion_9),
    (10, "reproducible CLI output", None, criterion_10),
];

fn main() -> ExitCode {
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut out = std::io::stdout();
    let mut failed = 0;
    for (id, name, budget, f) in CRITERIA {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or(e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let elapsed = start.elapsed();
        let over = budget.is_some_and(|b| elapsed > b);
        let pass = result.is_ok() && !over;
        failed += usize::from(!pass);
        let budget = budget.map_or("no budget".to_string(), |b| format!("budget {} s", b.as_secs()));
        let detail = match result {
            Ok(d) if over => format!("over budget; {d}"),
            Ok(d) | Err(d) => d,
        };
        let line = format!(
            "criterion {id:>2} {}: {name} ({:.1} s, {budget}): {detail}\n",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
        out.write_all(line.as_bytes()).unwrap();
        out.flush().unwrap();
    }
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
