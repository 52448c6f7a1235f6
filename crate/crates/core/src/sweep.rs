//! p → 1 continuation.
//!
//! Solves the eigenproblem along a decreasing schedule of exponents, warm
//! starting each solve from the previous eigenfunction, and compares the
//! eigenvalues with the exact discrete Cheeger constant and with ε-layer
//! upper bounds for the smooth Cheeger constant.

use crate::cheeger::{
    dinkelbach_cheeger, eroded_set, lipschitz_monotone_approx, sigma_upper_bound, CheegerOptions,
    CheegerSolution,
};
use crate::domain::{ScalarField, SetMask, WeightedDomain};
use crate::error::{Error, Result};
use crate::p_eigen::{
    b_moment, dual_certificate, p_energy, solve_first_eigenpair, solve_first_eigenpair_from,
    SolverOptions,
};

/// `p = 1 + 2^-k` for `k = 1..=kmax`.
pub fn default_schedule(kmax: u32) -> Vec<f64> {
    (1..=kmax).map(|k| 1.0 + 0.5f64.powi(k as i32)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub solver: SolverOptions,
    pub cheeger: CheegerOptions,
    /// Relative slack of the inequality checks.
    pub tol_rel: f64,
    /// Coefficient of the grid-spacing allowance added to `tol_rel` for the
    /// lower bound `λ_p ≥ h`.
    pub spacing_coeff: f64,
    /// Erosion depths of the interior sets used for the ε-layer bounds.
    pub sigma_depths: Vec<usize>,
    /// Layer widths in multiples of the grid spacing.
    pub sigma_layers: Vec<f64>,
    /// Allowed deviation of `∫ b|u_p|` from 1 at the smallest `p`.
    pub mass_tol: f64,
    /// Allowed excess of the best superlevel-set ratio over `h`.
    pub level_set_tol: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            solver: SolverOptions::default(),
            cheeger: CheegerOptions::default(),
            tol_rel: 0.02,
            spacing_coeff: 1.0,
            sigma_depths: vec![1, 2, 3],
            sigma_layers: vec![1.0, 2.0, 4.0],
            mass_tol: 0.02,
            level_set_tol: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub p: f64,
    pub lambda: f64,
    pub u_inf: f64,
    pub u_l1: f64,
    /// `∫ b|u_p|`.
    pub b_mass: f64,
    /// `∫ a|∇u_p|^p`, equal to `lambda` under the normalization.
    pub energy: f64,
    pub z_sup: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub error: Option<String>,
}

impl SweepRecord {
    fn failed(p: f64, err: &Error) -> Self {
        SweepRecord {
            p,
            lambda: f64::NAN,
            u_inf: f64::NAN,
            u_l1: f64::NAN,
            b_mass: f64::NAN,
            energy: f64::NAN,
            z_sup: f64::NAN,
            residual: f64::NAN,
            iterations: 0,
            converged: false,
            error: Some(err.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    NotApplicable,
}

/// Named check with its margin (positive when satisfied).
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub outcome: Outcome,
    pub margin: f64,
}

impl Verdict {
    fn from_margin(name: &str, margin: f64) -> Self {
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

    fn not_applicable(name: &str) -> Self {
        Verdict {
            name: name.to_string(),
            outcome: Outcome::NotApplicable,
            margin: f64::NAN,
        }
    }

    pub fn passed(&self) -> bool {
        self.outcome == Outcome::Pass
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extrapolation {
    pub limit: f64,
    /// Fitted exponent `q` of `λ_p ≈ Λ + c (p − 1)^q`; `None` when the data
    /// are flat or not monotone.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub schedule: Vec<f64>,
    pub records: Vec<SweepRecord>,
    pub h_value: f64,
    pub cheeger: CheegerSolution,
    pub sigma_bound: Option<f64>,
    pub limit_estimate: Option<f64>,
    pub limit_order: Option<f64>,
    pub spacing: f64,
    /// `b` spans more than six orders of magnitude.
    pub b_range_flag: bool,
    /// Eigenfunction at the smallest converged `p`.
    pub final_u: Option<ScalarField>,
    pub verdicts: Vec<Verdict>,
}

impl SweepReport {
    pub fn converged_records(&self) -> impl Iterator<Item = &SweepRecord> {
        self.records.iter().filter(|r| r.converged)
    }

    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.outcome != Outcome::Fail)
    }
}

fn check_schedule(schedule: &[f64]) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::BadSchedule("empty schedule".into()));
    }
    if let Some(p) = schedule.iter().find(|&&p| !(p > 1.0 && p <= 2.0)) {
        return Err(Error::BadSchedule(format!("p = {p} is outside (1, 2]")));
    }
    if schedule.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::BadSchedule(
            "schedule must be strictly decreasing".into(),
        ));
    }
    Ok(())
}

/// Runs the continuation along `schedule` and evaluates the standard checks.
pub fn run_p_sweep(
    domain: &WeightedDomain,
    schedule: &[f64],
    opts: &SweepOptions,
) -> Result<SweepReport> {
    check_schedule(schedule)?;
    let (eigen, cheeger) = rayon::join(
        || eigen_sweep(domain, schedule, &opts.solver),
        || dinkelbach_cheeger(domain, &opts.cheeger),
    );
    let (records, final_u) = eigen;
    let cheeger = cheeger?;
    let sigma_bound = best_sigma_bound(domain, opts);
    let mut report = SweepReport {
        schedule: schedule.to_vec(),
        records,
        h_value: cheeger.h,
        cheeger,
        sigma_bound,
        limit_estimate: None,
        limit_order: None,
        spacing: domain.spacing(),
        b_range_flag: domain.b_dynamic_range() > 1e6,
        final_u,
        verdicts: Vec::new(),
    };
    if let Ok(ex) = extrapolate_limit(&report) {
        report.limit_estimate = Some(ex.limit);
        report.limit_order = ex.order;
    }
    report.verdicts = standard_verdicts(domain, &report, opts);
    Ok(report)
}

fn eigen_sweep(
    domain: &WeightedDomain,
    schedule: &[f64],
    opts: &SolverOptions,
) -> (Vec<SweepRecord>, Option<ScalarField>) {
    let mut records = Vec::with_capacity(schedule.len());
    let mut warm: Option<ScalarField> = None;
    for &p in schedule {
        let solved = match &warm {
            Some(u) => solve_first_eigenpair_from(domain, p, opts, Some(u)),
            None => solve_first_eigenpair(domain, p, opts),
        };
        let e = match solved {
            Ok(e) => e,
            Err(err) => {
                records.push(SweepRecord::failed(p, &err));
                continue;
            }
        };
        let vol = domain.cell_volume();
        let cert = dual_certificate(domain, &e).ok();
        records.push(SweepRecord {
            p,
            lambda: e.lambda,
            u_inf: e.u.max_abs(),
            u_l1: domain.cells().map(|c| e.u.values[c].abs()).sum::<f64>() * vol,
            b_mass: b_moment(domain, &e.u, 1.0).unwrap_or(f64::NAN),
            energy: p_energy(domain, &e.u, p).unwrap_or(f64::NAN),
            z_sup: cert.as_ref().map_or(f64::NAN, |c| c.sup_norm_z),
            residual: cert.as_ref().map_or(f64::NAN, |c| c.pde_residual),
            iterations: e.iterations,
            converged: e.converged,
            error: None,
        });
        if e.converged {
            warm = Some(e.u);
        }
    }
    (records, warm)
}

/// Smallest ε-layer bound over eroded interior sets and layer widths.
pub fn best_sigma_bound(domain: &WeightedDomain, opts: &SweepOptions) -> Option<f64> {
    let mut best: Option<f64> = None;
    for &depth in &opts.sigma_depths {
        let set = eroded_set(domain, depth);
        for &m in &opts.sigma_layers {
            if let Ok(s) = sigma_upper_bound(domain, &set, m * domain.spacing()) {
                best = Some(best.map_or(s, |b| b.min(s)));
            }
        }
    }
    best
}

/// Fits `λ_p ≈ Λ + c (p − 1)^q` through the last three converged records.
pub fn extrapolate_limit(report: &SweepReport) -> Result<Extrapolation> {
    let pts: Vec<(f64, f64)> = report
        .converged_records()
        .map(|r| (r.p - 1.0, r.lambda))
        .collect();
    extrapolate_points(&pts)
}

/// As [`extrapolate_limit`] on raw `(p − 1, λ)` pairs, ordered by decreasing `p`.
pub fn extrapolate_points(pts: &[(f64, f64)]) -> Result<Extrapolation> {
    if pts.len() < 3 {
        return Err(Error::InsufficientData {
            need: 3,
            have: pts.len(),
        });
    }
    let [(x1, l1), (x2, l2), (x3, l3)] =
        [pts[pts.len() - 3], pts[pts.len() - 2], pts[pts.len() - 1]];
    let (d1, d2) = (l1 - l2, l2 - l3);
    let scale = l1.abs().max(l2.abs()).max(l3.abs()).max(f64::MIN_POSITIVE);
    if d1.abs() <= 1e-14 * scale && d2.abs() <= 1e-14 * scale {
        return Ok(Extrapolation {
            limit: l3,
            order: None,
        });
    }
    let ratio = d1 / d2;
    if !(ratio > 0.0) || !ratio.is_finite() {
        return Ok(Extrapolation {
            limit: l3,
            order: None,
        });
    }
    let shape = |q: f64| (x1.powf(q) - x2.powf(q)) / (x2.powf(q) - x3.powf(q));
    let (mut lo, mut hi) = (1e-3, 20.0);
    if ratio <= shape(lo) {
        hi = lo;
    } else if ratio >= shape(hi) {
        lo = hi;
    } else {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if shape(mid) < ratio {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let q = 0.5 * (lo + hi);
    let c = d2 / (x2.powf(q) - x3.powf(q));
    Ok(Extrapolation {
        limit: l3 - c * x3.powf(q),
        order: Some(q),
    })
}

/// Lower bound `λ_p ≥ h` at every recorded `p` (slack `tol_rel + c·Δ`) and
/// upper bound `Λ ≤ σ` (slack `tol_rel`) when both numbers are available.
pub fn check_sandwich(report: &SweepReport, opts: &SweepOptions) -> Verdict {
    let lower_tol = opts.tol_rel + opts.spacing_coeff * report.spacing;
    let lambdas: Vec<f64> = report.converged_records().map(|r| r.lambda).collect();
    if lambdas.is_empty() || !(report.h_value > 0.0) {
        return Verdict::not_applicable("sandwich");
    }
    let mut margin = lambdas
        .iter()
        .map(|l| l / report.h_value - (1.0 - lower_tol))
        .fold(f64::INFINITY, f64::min);
    if let (Some(limit), Some(sigma)) = (report.limit_estimate, report.sigma_bound) {
        margin = margin.min((sigma * (1.0 + opts.tol_rel) - limit) / sigma);
    }
    Verdict::from_margin("sandwich", margin)
}

/// Scaled monotonicity `p C^(−1/p) λ_p^(1/p) ≤ s C^(−1/s) λ_s^(1/s)` for
/// every recorded pair `p < s`, applicable when `a ≤ C b` on the domain.
pub fn check_truco(domain: &WeightedDomain, report: &SweepReport, c: f64, tol: f64) -> Verdict {
    let name = "scaled_monotonicity";
    if !(c > 0.0) || domain.cells().any(|i| domain.a()[i] > c * domain.b()[i]) {
        return Verdict::not_applicable(name);
    }
    let scaled: Vec<(f64, f64)> = report
        .converged_records()
        .map(|r| (r.p, r.p * c.powf(-1.0 / r.p) * r.lambda.powf(1.0 / r.p)))
        .collect();
    let mut margin = f64::INFINITY;
    for (i, &(p, vp)) in scaled.iter().enumerate() {
        for &(s, vs) in &scaled[i + 1..] {
            let (small, large) = if p < s { (vp, vs) } else { (vs, vp) };
            margin = margin.min((large * (1.0 + tol) - small) / large);
        }
    }
    Verdict::from_margin(name, margin)
}

/// Solves both weightings and checks `λ_p(a1) ≤ λ_p(a2)` (within twice the
/// solver tolerance) and `h(a1) ≤ h(a2)`.
pub fn check_weight_comparison(
    lower: &WeightedDomain,
    upper: &WeightedDomain,
    p: f64,
    opts: &SweepOptions,
) -> Result<Verdict> {
    if lower.shape() != upper.shape()
        || lower.mask() != upper.mask()
        || lower.spacing() != upper.spacing()
        || lower.stencil() != upper.stencil()
        || lower.b() != upper.b()
    {
        return Err(Error::NotComparable(
            "domains differ in grid, stencil or b".into(),
        ));
    }
    if let Some(c) = lower.cells().find(|&c| lower.a()[c] > upper.a()[c]) {
        return Err(Error::NotComparable(format!("a1 > a2 at cell {c}")));
    }
    let ((e1, h1), (e2, h2)) = rayon::join(
        || {
            (
                solve_first_eigenpair(lower, p, &opts.solver),
                dinkelbach_cheeger(lower, &opts.cheeger),
            )
        },
        || {
            (
                solve_first_eigenpair(upper, p, &opts.solver),
                dinkelbach_cheeger(upper, &opts.cheeger),
            )
        },
    );
    let (l1, l2) = (e1?.lambda, e2?.lambda);
    let (h1, h2) = (h1?.h, h2?.h);
    let lambda_margin = (l2 * (1.0 + 2.0 * opts.solver.tol) - l1) / l2;
    let h_margin = (h2 * (1.0 + 1e-12) - h1) / h2;
    Ok(Verdict::from_margin(
        "weight_comparison",
        lambda_margin.min(h_margin),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzChain {
    pub ks: Vec<u32>,
    pub h_values: Vec<f64>,
    /// `max |a_k − a|` for each `k`.
    pub deviations: Vec<f64>,
    pub h_full: f64,
    pub verdict: Verdict,
}

/// Cheeger constants of the inf-convolution weights `a_k`: nondecreasing in
/// `k`, bounded by `h(a)`, and within `tol_rel` of it once
/// `max |a_k − a| < Δ`.
pub fn check_lipschitz_chain(
    domain: &WeightedDomain,
    ks: &[u32],
    tol_rel: f64,
    opts: &CheegerOptions,
) -> Result<LipschitzChain> {
    if ks.is_empty() || ks[0] < 1 || ks.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::UnsortedKs);
    }
    let h_full = dinkelbach_cheeger(domain, opts)?.h;
    let mut h_values = Vec::with_capacity(ks.len());
    let mut deviations = Vec::with_capacity(ks.len());
    for &k in ks {
        let dk = lipschitz_monotone_approx(domain, k)?;
        deviations.push(
            domain
                .cells()
                .map(|c| (dk.a()[c] - domain.a()[c]).abs())
                .fold(0.0, f64::max),
        );
        h_values.push(dinkelbach_cheeger(&dk, opts)?.h);
    }
    let rel = 1e-12;
    let mut margin = h_values
        .windows(2)
        .map(|w| (w[1] - w[0] * (1.0 - rel)) / h_full)
        .fold(f64::INFINITY, f64::min);
    margin = h_values
        .iter()
        .map(|h| (h_full * (1.0 + rel) - h) / h_full)
        .fold(margin, f64::min);
    for (h, dev) in h_values.iter().zip(&deviations) {
        if *dev < domain.spacing() {
            margin = margin.min(tol_rel - (h_full - h).abs() / h_full);
        }
    }
    Ok(LipschitzChain {
        ks: ks.to_vec(),
        h_values,
        deviations,
        h_full,
        verdict: Verdict::from_margin("lipschitz_chain", margin),
    })
}

/// Smallest `P_a / vol_b` over the superlevel sets `{u > t}`.
pub fn best_level_set(domain: &WeightedDomain, u: &ScalarField) -> Result<Option<(f64, SetMask)>> {
    let mut best: Option<(f64, SetMask)> = None;
    for level in domain.coarea_decompose(u)? {
        let v = domain.weighted_volume(&level.set)?;
        if v <= 0.0 {
            continue;
        }
        let r = domain.weighted_perimeter(&level.set)? / v;
        if best.as_ref().is_none_or(|(b, _)| r < *b) {
            best = Some((r, level.set));
        }
    }
    Ok(best)
}

fn standard_verdicts(
    domain: &WeightedDomain,
    report: &SweepReport,
    opts: &SweepOptions,
) -> Vec<Verdict> {
    let mut out = vec![check_sandwich(report, opts)];
    let converged: Vec<&SweepRecord> = report.converged_records().collect();

    out.push(if converged.len() == report.records.len() {
        Verdict::from_margin("all_converged", 0.0)
    } else {
        Verdict::from_margin(
            "all_converged",
            -((report.records.len() - converged.len()) as f64),
        )
    });

    if converged.is_empty() {
        return out;
    }
    let energy_margin = converged
        .iter()
        .map(|r| 1e-8 - (r.energy - r.lambda).abs() / r.lambda)
        .fold(f64::INFINITY, f64::min);
    out.push(Verdict::from_margin("energy_identity", energy_margin));

    let max_lambda = converged.iter().map(|r| r.lambda).fold(0.0, f64::max);
    let max_ratio = converged
        .iter()
        .map(|r| r.u_inf / r.u_l1)
        .fold(0.0, f64::max);
    out.push(Verdict::from_margin(
        "bounded",
        if max_lambda.is_finite() && max_ratio.is_finite() {
            0.0
        } else {
            -1.0
        },
    ));

    let last = converged.last().expect("nonempty");
    out.push(Verdict::from_margin(
        "mass_convergence",
        opts.mass_tol - (last.b_mass - 1.0).abs(),
    ));

    out.push(match report.limit_estimate {
        Some(l) => Verdict::from_margin("positive_limit", l),
        None => Verdict::not_applicable("positive_limit"),
    });

    out.push(
        match report.final_u.as_ref().map(|u| best_level_set(domain, u)) {
            Some(Ok(Some((ratio, _)))) => {
                let h = report.h_value;
                let lower = ratio - h * (1.0 - 1e-10);
                let upper = h * (1.0 + opts.level_set_tol) - ratio;
                Verdict::from_margin("level_set_optimality", lower.min(upper) / h)
            }
            _ => Verdict::not_applicable("level_set_optimality"),
        },
    );
    out
}
