//! Self-check suites run by `cheeger-lab verify`.
//!
//! Every suite builds its domains with the stencil under test (L1 unless
//! overridden) and compares against L1 reference values, so a mis-weighted
//! stencil shows up as a failed suite.

use std::path::Path;

use anyhow::Result;
use cheeger_lab::{
    brute_force_cheeger, default_schedule, dinkelbach_cheeger, run_p_sweep, solve_first_eigenpair,
    CheegerOptions, DomainSpec, Outcome, ScalarField, SetMask, SolverOptions, Stencil,
    SweepOptions, VectorField, Verdict, WeightSource, WeightedDomain,
};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::commands::Status;
use crate::output;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Scale {
    Quick,
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    pub stencil: Stencil,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 0,
            stencil: Stencil::L1,
        }
    }
}

fn verdict(name: &str, margin: f64) -> Verdict {
    Verdict {
        name: name.to_string(),
        outcome: if margin >= 0.0 {
            Outcome::Pass
        } else {
            Outcome::Fail
        },
        margin,
    }
}

fn rel_err(x: f64, y: f64) -> f64 {
    (x - y).abs() / x.abs().max(y.abs()).max(f64::MIN_POSITIVE)
}

fn random_domain(rng: &mut ChaCha8Rng, nx: usize, ny: usize, stencil: Stencil) -> WeightedDomain {
    let n = nx * ny;
    let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    let b: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    let spec = if ny == 1 {
        DomainSpec::interval(nx, 1.0 / nx as f64)
    } else {
        DomainSpec::grid(nx, ny, 1.0 / nx as f64)
    };
    spec.with_stencil(stencil)
        .with_a(WeightSource::Grid(a))
        .with_b(WeightSource::Grid(b))
        .build()
        .expect("random weights are valid")
}

fn oracle_equivalence(opts: &VerifyOptions, trials: usize) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let (nx, ny) = if t % 4 == 3 { (8, 1) } else { (3, 3) };
        let d = random_domain(&mut rng, nx, ny, opts.stencil);
        let fast = dinkelbach_cheeger(&d, &CheegerOptions::default()).map(|s| s.h);
        let slow = brute_force_cheeger(&d).map(|s| s.h);
        worst = worst.max(match (fast, slow) {
            (Ok(x), Ok(y)) => rel_err(x, y),
            _ => f64::INFINITY,
        });
    }
    verdict("oracle_equivalence", 1e-10 - worst)
}

fn coarea(opts: &VerifyOptions, trials: usize) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x636f);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let nx = rng.random_range(1..=16);
        let ny = rng.random_range(1..=16);
        let d = random_domain(&mut rng, nx, ny, opts.stencil);
        let u = ScalarField {
            values: (0..nx * ny)
                .map(|_| {
                    if rng.random_bool(0.2) {
                        0.0
                    } else {
                        rng.random_range(0.0..3.0)
                    }
                })
                .collect(),
        };
        let tv = d.weighted_tv(&u).expect("shape");
        let sum: f64 = d
            .coarea_decompose(&u)
            .expect("nonnegative")
            .iter()
            .map(|l| l.dt * d.weighted_perimeter(&l.set).expect("shape"))
            .sum();
        worst = worst.max(rel_err(tv, sum));
    }
    verdict("coarea", 1e-10 - worst)
}

fn adjointness(opts: &VerifyOptions, trials: usize) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x6164);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let nx = rng.random_range(1..=16);
        let ny = rng.random_range(1..=16);
        let d = random_domain(&mut rng, nx, ny, opts.stencil);
        let u = ScalarField {
            values: (0..nx * ny).map(|_| rng.random_range(-1.0..1.0)).collect(),
        };
        let z = VectorField {
            values: (0..d.faces().len())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        };
        let g = d.gradient(&u).expect("shape");
        let div = d.divergence(&z).expect("shape");
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
            .sum::<f64>()
            .max(1.0);
        worst = worst.max((lhs - rhs).abs() / scale);
    }
    verdict("adjointness", 1e-12 - worst)
}

fn homogeneity(opts: &VerifyOptions, trials: usize) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x686f);
    let copts = CheegerOptions::default();
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let d = random_domain(&mut rng, 4, 4, opts.stencil);
        let h = |d: &WeightedDomain| dinkelbach_cheeger(d, &copts).map_or(f64::NAN, |s| s.h);
        let base = h(&d);
        let twice_a: Vec<f64> = d.a().iter().map(|x| 2.0 * x).collect();
        let twice_b: Vec<f64> = d.b().iter().map(|x| 2.0 * x).collect();
        let da = d
            .with_weights(twice_a, d.b().to_vec(), None)
            .expect("valid");
        let db = d
            .with_weights(d.a().to_vec(), twice_b, None)
            .expect("valid");
        worst = worst
            .max(rel_err(h(&da), 2.0 * base))
            .max(rel_err(h(&db), 0.5 * base));
        if base.is_nan() {
            worst = f64::INFINITY;
        }
    }
    verdict("homogeneity", 1e-12 - worst)
}

/// L1 perimeters of intervals and axis-aligned rectangles.
fn closed_form_perimeters(opts: &VerifyOptions) -> Verdict {
    let mut worst: f64 = 0.0;
    let line = DomainSpec::interval(10, 0.1)
        .with_stencil(opts.stencil)
        .build()
        .expect("valid");
    let mut seg = SetMask::empty(&line);
    seg.cells[2..6].iter_mut().for_each(|c| *c = true);
    worst = worst
        .max(rel_err(
            line.weighted_perimeter(&SetMask::full(&line))
                .expect("shape"),
            2.0,
        ))
        .max(rel_err(line.weighted_perimeter(&seg).expect("shape"), 2.0));

    let n = 8;
    let sq = DomainSpec::grid(n, n, 1.0 / n as f64)
        .with_stencil(opts.stencil)
        .build()
        .expect("valid");
    let mut rect = SetMask::empty(&sq);
    for j in 2..4 {
        for i in 1..4 {
            rect.cells[j * n + i] = true;
        }
    }
    worst = worst
        .max(rel_err(
            sq.weighted_perimeter(&SetMask::full(&sq)).expect("shape"),
            4.0,
        ))
        .max(rel_err(
            sq.weighted_perimeter(&rect).expect("shape"),
            2.0 * (3.0 + 2.0) / n as f64,
        ));
    let h = dinkelbach_cheeger(&sq, &CheegerOptions::default()).map_or(f64::NAN, |s| s.h);
    worst = worst.max(rel_err(h, 4.0));
    if h.is_nan() {
        worst = f64::INFINITY;
    }
    verdict("closed_form_perimeters", 1e-12 - worst)
}

fn analytic_1d(p: f64) -> f64 {
    let pi_p = 2.0 * std::f64::consts::PI / (p * (std::f64::consts::PI / p).sin());
    (p - 1.0) * pi_p.powf(p)
}

fn benchmark_1d(opts: &VerifyOptions) -> Vec<Verdict> {
    let n = 2000;
    let d = DomainSpec::interval(n, 1.0 / n as f64)
        .with_stencil(opts.stencil)
        .build()
        .expect("valid");
    let solver = SolverOptions {
        seed: opts.seed,
        ..SolverOptions::default()
    };
    let mut worst: f64 = 0.0;
    for p in [2.0, 1.5, 1.2] {
        worst = worst.max(match solve_first_eigenpair(&d, p, &solver) {
            Ok(e) if e.converged => rel_err(e.lambda, analytic_1d(p)),
            _ => f64::INFINITY,
        });
    }
    let mut out = vec![verdict("analytic_1d", 0.01 - worst)];
    out.extend(sweep_verdicts("interval", &d, 2.0, &solver));
    out
}

fn benchmark_square(opts: &VerifyOptions) -> Vec<Verdict> {
    let mut worst: f64 = 0.0;
    for n in [8, 32, 128] {
        let d = DomainSpec::grid(n, n, 1.0 / n as f64)
            .with_stencil(opts.stencil)
            .build()
            .expect("valid");
        worst = worst.max(match dinkelbach_cheeger(&d, &CheegerOptions::default()) {
            Ok(s) if s.set.count() == d.num_inside() => rel_err(s.h, 4.0),
            _ => f64::INFINITY,
        });
    }
    let mut out = vec![verdict("square_cheeger", 1e-10 - worst)];
    let n = 32;
    let d = DomainSpec::grid(n, n, 1.0 / n as f64)
        .with_stencil(opts.stencil)
        .build()
        .expect("valid");
    let solver = SolverOptions {
        seed: opts.seed,
        ..SolverOptions::default()
    };
    out.extend(sweep_verdicts("square", &d, 4.0, &solver));
    out
}

/// Sweep verdicts plus agreement of the extrapolated limit with `h_ref`.
fn sweep_verdicts(
    prefix: &str,
    d: &WeightedDomain,
    h_ref: f64,
    solver: &SolverOptions,
) -> Vec<Verdict> {
    let opts = SweepOptions {
        solver: solver.clone(),
        ..SweepOptions::default()
    };
    match run_p_sweep(d, &default_schedule(8), &opts) {
        Ok(report) => {
            let mut out: Vec<Verdict> = report
                .verdicts
                .iter()
                .map(|v| Verdict {
                    name: format!("{prefix}_{}", v.name),
                    ..v.clone()
                })
                .collect();
            let limit = report.limit_estimate.unwrap_or(f64::NAN);
            let m = 0.02 - rel_err(limit, h_ref);
            out.push(verdict(
                &format!("{prefix}_limit"),
                if m.is_nan() { -1.0 } else { m },
            ));
            out
        }
        Err(_) => vec![verdict(&format!("{prefix}_sweep"), -1.0)],
    }
}

pub fn run_suites(scale: Scale, opts: &VerifyOptions) -> Vec<Verdict> {
    let mut out = vec![
        oracle_equivalence(opts, 40),
        coarea(opts, 50),
        adjointness(opts, 50),
        homogeneity(opts, 10),
        closed_form_perimeters(opts),
    ];
    if scale == Scale::Full {
        let (one, two) = rayon::join(|| benchmark_1d(opts), || benchmark_square(opts));
        out.extend(one);
        out.extend(two);
    }
    out
}

pub fn cmd_verify(scale: Scale, opts: &VerifyOptions, out: Option<&Path>) -> Result<Status> {
    let verdicts = run_suites(scale, opts);
    for v in &verdicts {
        let tag = match v.outcome {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::NotApplicable => "N/A ",
        };
        println!("{tag} {} margin={}", v.name, v.margin);
    }
    if let Some(dir) = out {
        output::write(dir, "verify.csv", &output::verdicts_csv(&verdicts))?;
    }
    if verdicts.iter().any(|v| v.outcome == Outcome::Fail) {
        eprintln!("error: verdict: verification failed");
        return Ok(Status::VerdictFailure);
    }
    Ok(Status::Success)
}
