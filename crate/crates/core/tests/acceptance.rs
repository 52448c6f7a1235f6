//! Acceptance criteria 1-9. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::f64::consts::PI;
use std::time::Instant;

use cheeger_lab::{
    brute_force_cheeger, check_lipschitz_chain, default_schedule, dinkelbach_cheeger, run_p_sweep,
    solve_first_eigenpair, CheegerOptions, DomainSpec, ScalarField, SolverOptions, SweepOptions,
    SweepReport, VectorField, WeightSource, WeightedDomain,
};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Classical first Dirichlet eigenvalue of the 1D p-Laplacian on (0, 1).
fn lambda_1d(p: f64) -> f64 {
    (p - 1.0) * (2.0 * PI / (p * (PI / p).sin())).powf(p)
}

fn rel(x: f64, y: f64) -> f64 {
    (x - y).abs() / y.abs()
}

fn interval(n: usize) -> WeightedDomain {
    DomainSpec::interval(n, 1.0 / n as f64).build().unwrap()
}

fn square(n: usize) -> WeightedDomain {
    DomainSpec::grid(n, n, 1.0 / n as f64).build().unwrap()
}

fn random_weights(rng: &mut ChaCha8Rng, nx: usize, ny: usize) -> WeightedDomain {
    let a: Vec<f64> = (0..nx * ny).map(|_| rng.random_range(0.2..5.0)).collect();
    let b: Vec<f64> = (0..nx * ny).map(|_| rng.random_range(0.2..5.0)).collect();
    DomainSpec::grid(nx, ny, 1.0 / nx as f64)
        .with_a(WeightSource::Grid(a))
        .with_b(WeightSource::Grid(b))
        .build()
        .unwrap()
}

/// Extrapolated limit recomputed from the records: exponent from the three
/// smallest p, assuming geometric spacing of p - 1.
fn limit_from_records(report: &SweepReport) -> f64 {
    let r: Vec<(f64, f64)> = report
        .records
        .iter()
        .map(|r| (r.p - 1.0, r.lambda))
        .collect();
    let [(x1, l1), (x2, l2), (x3, l3)] = [r[r.len() - 3], r[r.len() - 2], r[r.len() - 1]];
    let ratio = (l1 - l2) / (l2 - l3);
    let q = ratio.ln() / (x1 / x2).ln();
    assert!(rel(x1 / x2, x2 / x3) < 1e-12);
    l3 - (l2 - l3) / (x2.powf(q) - x3.powf(q)) * x3.powf(q)
}

struct Outcome {
    ok: bool,
    detail: String,
}

fn check(ok: bool, detail: String) -> Outcome {
    Outcome { ok, detail }
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let d = interval(2000);
    let mut worst: f64 = 0.0;
    for p in [2.0, 1.5, 1.2] {
        let e = solve_first_eigenpair(&d, p, &SolverOptions::default()).unwrap();
        assert!(e.converged);
        worst = worst.max(rel(e.lambda, lambda_1d(p)));
    }
    let secs = t.elapsed().as_secs_f64();
    check(
        worst < 0.01 && secs < 30.0,
        format!("max rel err {worst:.2e} (< 1e-2), {secs:.2}s"),
    )
}

fn criterion_2(report: &SweepReport) -> Outcome {
    let limit = limit_from_records(report);
    let mut h_err: f64 = 0.0;
    for n in [1, 2, 7, 50, 500, 2000, 5000] {
        let h = dinkelbach_cheeger(&interval(n), &CheegerOptions::default())
            .unwrap()
            .h;
        h_err = h_err.max((h - 2.0).abs());
    }
    let brute_full = (1..=12).all(|n| {
        let s = brute_force_cheeger(&interval(n)).unwrap();
        s.set.count() == n && (s.h - 2.0).abs() < 1e-10
    });
    check(
        rel(limit, 2.0) < 0.02 && h_err < 1e-10 && brute_full,
        format!(
            "limit {limit:.6} (rel {:.2e}), max |h - 2| {h_err:.1e}, brute n<=12 full interval: {brute_full}",
            rel(limit, 2.0)
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut h_err: f64 = 0.0;
    let mut full = true;
    for n in [8, 32, 128] {
        let s = dinkelbach_cheeger(&square(n), &CheegerOptions::default()).unwrap();
        h_err = h_err.max((s.h - 4.0).abs());
        full &= s.set.count() == n * n;
    }
    let worst = [3usize, 4]
        .iter()
        .flat_map(|&n| (0..100u64).map(move |t| (n, t)))
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&(n, t)| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 * n as u64 + t);
            let d = random_weights(&mut rng, n, n);
            let fast = dinkelbach_cheeger(&d, &CheegerOptions::default())
                .unwrap()
                .h;
            let slow = brute_force_cheeger(&d).unwrap().h;
            rel(fast, slow)
        })
        .reduce(|| 0.0, f64::max);
    check(
        h_err < 1e-10 && full && worst < 1e-10,
        format!("max |h - 4| {h_err:.1e}, full square: {full}, 200 random trials max rel diff {worst:.1e}"),
    )
}

fn criterion_4(benchmarks: &[(&str, &SweepReport)]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, r) in benchmarks {
        let floor = r.h_value * (1.0 - 0.02 - r.spacing);
        let min_lambda = r
            .records
            .iter()
            .map(|x| x.lambda)
            .fold(f64::INFINITY, f64::min);
        let limit = limit_from_records(r);
        let sigma = r.sigma_bound.unwrap();
        ok &= min_lambda >= floor && limit <= sigma * 1.02;
        parts.push(format!(
            "{name}: min lambda {min_lambda:.4} >= {floor:.4}, limit {limit:.4} <= 1.02 sigma {:.4}",
            1.02 * sigma
        ));
    }
    check(ok, parts.join("; "))
}

fn criterion_5(report: &SweepReport) -> Outcome {
    let scaled: Vec<f64> = report
        .records
        .iter()
        .map(|r| r.p * r.lambda.powf(1.0 / r.p))
        .collect();
    // schedule decreases in p, so the scaled values must not increase
    let worst = scaled
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    check(
        worst <= 1e-3,
        format!("max relative increase along decreasing p {worst:.3e} (<= 1e-3)"),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let opts = CheegerOptions::default();
    let mut exact = true;
    for _ in 0..10 {
        let d = random_weights(&mut rng, 6, 5);
        let h = dinkelbach_cheeger(&d, &opts).unwrap().h;
        let a2: Vec<f64> = d.a().iter().map(|x| 2.0 * x).collect();
        let b2: Vec<f64> = d.b().iter().map(|x| 2.0 * x).collect();
        let ha = dinkelbach_cheeger(&d.with_weights(a2, d.b().to_vec(), None).unwrap(), &opts)
            .unwrap()
            .h;
        let hb = dinkelbach_cheeger(&d.with_weights(d.a().to_vec(), b2, None).unwrap(), &opts)
            .unwrap()
            .h;
        exact &= ha == 2.0 * h && hb == h / 2.0;
    }
    let solver = SolverOptions::default();
    let pairs: Vec<(f64, f64, f64, f64)> = (0..20u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(600 + t);
            let d1 = random_weights(&mut rng, 8, 8);
            let a2: Vec<f64> = d1
                .a()
                .iter()
                .map(|&x| {
                    if rng.random_bool(0.5) {
                        x
                    } else {
                        x + rng.random_range(0.0..2.0)
                    }
                })
                .collect();
            let d2 = d1.with_weights(a2, d1.b().to_vec(), None).unwrap();
            let l1 = solve_first_eigenpair(&d1, 1.5, &solver).unwrap().lambda;
            let l2 = solve_first_eigenpair(&d2, 1.5, &solver).unwrap().lambda;
            let h1 = dinkelbach_cheeger(&d1, &opts).unwrap().h;
            let h2 = dinkelbach_cheeger(&d2, &opts).unwrap().h;
            (l1, l2, h1, h2)
        })
        .collect();
    let lambda_ok = pairs
        .iter()
        .all(|&(l1, l2, _, _)| l1 <= l2 * (1.0 + 2.0 * solver.tol));
    let h_ok = pairs.iter().all(|&(_, _, h1, h2)| h1 <= h2);
    check(
        exact && lambda_ok && h_ok,
        format!("scaling exact: {exact}, 20 pairs lambda ordered: {lambda_ok}, h ordered: {h_ok}"),
    )
}

/// Weighted total variation summed face by face.
fn tv_direct(d: &WeightedDomain, u: &[f64]) -> f64 {
    let area = d.face_area();
    d.faces()
        .iter()
        .map(|f| {
            let h = f.head.map_or(0.0, |c| u[c]);
            let t = f.tail.map_or(0.0, |c| u[c]);
            f.weight * f.a * (h - t).abs() * area
        })
        .sum()
}

fn criterion_7() -> Outcome {
    let coarea_worst = (0..200u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(7000 + t);
            let (nx, ny) = (rng.random_range(1..=16), rng.random_range(1..=16));
            let d = random_weights(&mut rng, nx, ny);
            let u: Vec<f64> = (0..nx * ny)
                .map(|_| {
                    if rng.random_bool(0.3) {
                        0.0
                    } else {
                        rng.random_range(0.0..4.0)
                    }
                })
                .collect();
            let mut levels: Vec<f64> = u.iter().copied().filter(|&v| v > 0.0).collect();
            levels.sort_by(f64::total_cmp);
            levels.dedup();
            let mut prev = 0.0;
            let mut integral = 0.0;
            for &v in &levels {
                let set: Vec<f64> = u.iter().map(|&x| if x >= v { 1.0 } else { 0.0 }).collect();
                integral += (v - prev) * tv_direct(&d, &set);
                prev = v;
            }
            let tv = d.weighted_tv(&ScalarField { values: u }).unwrap();
            if tv == 0.0 {
                integral.abs()
            } else {
                rel(integral, tv)
            }
        })
        .reduce(|| 0.0, f64::max);
    let adjoint_worst = (0..200u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(7500 + t);
            let (nx, ny) = (rng.random_range(1..=16), rng.random_range(1..=16));
            let d = random_weights(&mut rng, nx, ny);
            let u = ScalarField {
                values: (0..nx * ny).map(|_| rng.random_range(-1.0..1.0)).collect(),
            };
            let z = VectorField {
                values: (0..d.faces().len())
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect(),
            };
            let g = d.gradient(&u).unwrap();
            let div = d.divergence(&z).unwrap();
            let lhs: f64 = g.values.iter().zip(&z.values).map(|(a, b)| a * b).sum();
            let rhs: f64 = -u
                .values
                .iter()
                .zip(&div.values)
                .map(|(a, b)| a * b)
                .sum::<f64>();
            let scale: f64 = g
                .values
                .iter()
                .zip(&z.values)
                .map(|(a, b)| (a * b).abs())
                .sum();
            (lhs - rhs).abs() / scale.max(1.0)
        })
        .reduce(|| 0.0, f64::max);
    check(
        coarea_worst < 1e-10 && adjoint_worst < 1e-12,
        format!("coarea max rel err {coarea_worst:.1e} (< 1e-10), adjointness {adjoint_worst:.1e} (< 1e-12)"),
    )
}

fn criterion_8() -> Outcome {
    let n = 16;
    // a = 1 on the left half, 3 on the right half
    let step: Vec<f64> = (0..n * n)
        .map(|c| if c % n < n / 2 { 1.0 } else { 3.0 })
        .collect();
    let d = DomainSpec::grid(n, n, 1.0 / n as f64)
        .with_a(WeightSource::Grid(step))
        .build()
        .unwrap();
    let ks = [1, 2, 4, 8, 16, 32, 64];
    let chain = check_lipschitz_chain(&d, &ks, 0.01, &CheegerOptions::default()).unwrap();
    let monotone = chain
        .h_values
        .windows(2)
        .all(|w| w[1] >= w[0] * (1.0 - 1e-12));
    let bounded = chain
        .h_values
        .iter()
        .all(|&h| h <= chain.h_full * (1.0 + 1e-12));
    let close: Vec<bool> = chain
        .h_values
        .iter()
        .zip(&chain.deviations)
        .filter(|(_, &dev)| dev < d.spacing())
        .map(|(&h, _)| rel(h, chain.h_full) <= 0.01)
        .collect();
    let reached = !close.is_empty();
    check(
        monotone && bounded && reached && close.iter().all(|&c| c) && chain.verdict.passed(),
        format!(
            "h(a) {:.6}, h(a_k) {:?}, close once |a_k - a| < spacing: {}",
            chain.h_full,
            chain
                .h_values
                .iter()
                .map(|h| format!("{h:.4}"))
                .collect::<Vec<_>>(),
            reached && close.iter().all(|&c| c)
        ),
    )
}

fn criterion_9(report: &SweepReport) -> Outcome {
    let worst = report
        .records
        .iter()
        .map(|r| r.residual)
        .fold(0.0, f64::max);
    let last = report.records.last().unwrap();
    check(
        worst <= 1e-4 && last.z_sup <= 1.1 && (last.p - (1.0 + 2f64.powi(-8))).abs() < 1e-15,
        format!(
            "max pde residual {worst:.2e} (<= 1e-4), sup|z| at p = 1 + 2^-8: {:.4} (<= 1.1)",
            last.z_sup
        ),
    )
}

fn main() {
    let t = Instant::now();
    let schedule = default_schedule(8);
    let opts = SweepOptions::default();
    let (one_d, sq) = rayon::join(
        || run_p_sweep(&interval(2000), &schedule, &opts).unwrap(),
        || run_p_sweep(&square(32), &schedule, &opts).unwrap(),
    );
    assert!(one_d.records.iter().chain(&sq.records).all(|r| r.converged));
    let sweep_secs = t.elapsed().as_secs_f64();

    let results = [
        ("1D analytic eigenvalues", criterion_1()),
        ("1D limit identity", criterion_2(&one_d)),
        ("unit-square L1 Cheeger", criterion_3()),
        (
            "sandwich",
            criterion_4(&[("interval", &one_d), ("square", &sq)]),
        ),
        ("scaled monotonicity", criterion_5(&one_d)),
        ("homogeneity and comparison", criterion_6()),
        ("coarea and adjointness", criterion_7()),
        ("Lipschitz chain", criterion_8()),
        ("dual certificate trend", criterion_9(&one_d)),
    ];
    let mut failed = 0;
    for (i, (name, o)) in results.iter().enumerate() {
        println!(
            "criterion {} {} {name}: {}",
            i + 1,
            if o.ok { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.ok);
    }
    println!(
        "acceptance: {} passed, {failed} failed ({sweep_secs:.2}s sweeps, {:.2}s total)",
        results.len() - failed,
        t.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
