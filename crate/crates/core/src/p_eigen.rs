//! First Dirichlet eigenpair of the weighted p-Laplacian.
//!
//! The eigenvalue is the minimum of the Rayleigh quotient
//! `Σ_f w_f a_f |∇u|_f^p Δ^dim / Σ_i b_i |u_i|^p Δ^dim` over grid functions
//! extended by zero, where the sum over faces includes the exterior faces.
//! The minimizer is found by projected descent on the ε-regularized
//! quotient, preconditioned by the Hessian of the regularized energy.

use crate::domain::{ScalarField, VectorField, WeightedDomain};
use crate::error::{Error, Result};
use crate::linalg::BandedSpd;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Initial regularization; halved every iteration down to `eps_final`.
    pub eps0: f64,
    pub eps_final: f64,
    pub max_iters: usize,
    /// Relative quotient change over `window` iterations that counts as converged.
    pub tol: f64,
    pub window: usize,
    /// Reserved for randomized tie-breaks; the solver itself is deterministic.
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            eps0: 1e-2,
            eps_final: 1e-7,
            max_iters: 50_000,
            tol: 1e-9,
            window: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub p: f64,
    pub lambda: f64,
    /// Nonnegative, normalized so that `Σ b u^p Δ^dim = 1`.
    pub u: ScalarField,
    pub iterations: usize,
    /// Max-norm of the stationarity defect `|−div(a z) − λ b u^(p−1)| Δ^dim`.
    pub residual_norm: f64,
    pub converged: bool,
    /// Regularization in effect at the last iteration.
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualCertificate {
    /// Flux `(|∇u|² + ε²)^((p−2)/2) ∇u` on every face.
    pub z: VectorField,
    /// Sign selection of `u`: 1 on `{u > 0}`.
    pub gamma: ScalarField,
    pub sup_norm_z: f64,
    pub pde_residual: f64,
    pub boundary_sign_defect: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcotBound {
    pub sobolev_constant: f64,
    pub r: f64,
    pub b_norm_r: f64,
    pub u_l1: f64,
    pub u_inf: f64,
    pub bound_value: f64,
    pub satisfied: bool,
}

/// Regularized face integrand `φ(g) = (g² + ε²)^(p/2) − ε^p` and its first
/// two derivatives.
#[inline]
fn face_terms(g: f64, p: f64, eps: f64) -> (f64, f64, f64) {
    if eps == 0.0 {
        let ag = g.abs();
        let phi = ag.powf(p);
        let d1 = if ag == 0.0 {
            0.0
        } else {
            p * ag.powf(p - 1.0) * g.signum()
        };
        let d2 = if ag == 0.0 && p < 2.0 {
            f64::INFINITY
        } else {
            p * (p - 1.0) * ag.powf(p - 2.0)
        };
        return (phi, d1, d2);
    }
    let s = g * g + eps * eps;
    let sp = s.powf(0.5 * p - 1.0);
    let phi = sp * s - eps.powf(p);
    let d1 = p * sp * g;
    let d2 = p * sp / s * ((p - 1.0) * g * g + eps * eps);
    (phi, d1, d2)
}

/// Numerator of the Rayleigh quotient: `Σ_f w_f a_f |g_f|^p Δ^dim`.
pub fn p_energy(domain: &WeightedDomain, u: &ScalarField, p: f64) -> Result<f64> {
    domain.check_field(u)?;
    let g = domain.face_differences(&u.values);
    Ok(energy_raw(domain, &g, p, 0.0))
}

fn energy_raw(domain: &WeightedDomain, g: &[f64], p: f64, eps: f64) -> f64 {
    domain
        .faces()
        .iter()
        .zip(g)
        .map(|(f, &gf)| f.weight * f.a * face_terms(gf, p, eps).0)
        .sum::<f64>()
        * domain.cell_volume()
}

/// `Σ_i b_i |u_i|^p Δ^dim`.
pub fn b_moment(domain: &WeightedDomain, u: &ScalarField, p: f64) -> Result<f64> {
    domain.check_field(u)?;
    Ok(moment_raw(domain, &u.values, p))
}

fn moment_raw(domain: &WeightedDomain, u: &[f64], p: f64) -> f64 {
    domain
        .cells()
        .map(|c| domain.b()[c] * u[c].abs().powf(p))
        .sum::<f64>()
        * domain.cell_volume()
}

/// `Σ a|∇u|^p / Σ b|u|^p`. At `p = 1` this is `weighted_tv(u) / Σ b|u|`.
pub fn rayleigh_quotient(domain: &WeightedDomain, u: &ScalarField, p: f64) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidExponent(p));
    }
    let num = p_energy(domain, u, p)?;
    let den = moment_raw(domain, &u.values, p);
    if den <= 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(num / den)
}

/// Compact numbering of the cells inside the mask and the band width of
/// the face graph in that numbering.
struct Layout {
    cells: Vec<usize>,
    index: Vec<usize>,
    bandwidth: usize,
}

impl Layout {
    fn new(domain: &WeightedDomain) -> Self {
        let cells: Vec<usize> = domain.cells().collect();
        let mut index = vec![usize::MAX; domain.num_cells()];
        for (k, &c) in cells.iter().enumerate() {
            index[c] = k;
        }
        let bandwidth = domain
            .faces()
            .iter()
            .filter_map(|f| match (f.tail, f.head) {
                (Some(t), Some(h)) => Some(index[t].abs_diff(index[h])),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        Layout {
            cells,
            index,
            bandwidth,
        }
    }

    fn gather(&self, full: &[f64]) -> Vec<f64> {
        self.cells.iter().map(|&c| full[c]).collect()
    }

    fn scatter(&self, compact: &[f64], n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (k, &c) in self.cells.iter().enumerate() {
            out[c] = compact[k];
        }
        out
    }
}

/// Regularized quotient machinery for one `(domain, p)` pair.
struct Functional<'a> {
    domain: &'a WeightedDomain,
    layout: Layout,
    p: f64,
}

struct Evaluation {
    energy: f64,
    moment: f64,
    grad_energy: Vec<f64>,
    grad_moment: Vec<f64>,
    faces: Vec<f64>,
}

impl Evaluation {
    fn quotient(&self) -> f64 {
        self.energy / self.moment
    }
}

impl<'a> Functional<'a> {
    fn new(domain: &'a WeightedDomain, p: f64) -> Self {
        Functional {
            domain,
            layout: Layout::new(domain),
            p,
        }
    }

    fn quotient(&self, u: &[f64], eps: f64) -> f64 {
        let g = self.domain.face_differences(u);
        energy_raw(self.domain, &g, self.p, eps) / moment_raw(self.domain, u, self.p)
    }

    fn evaluate(&self, u: &[f64], eps: f64) -> Evaluation {
        let d = self.domain;
        let p = self.p;
        let vol = d.cell_volume();
        let inv = 1.0 / d.spacing();
        let g = d.face_differences(u);
        let n = self.layout.cells.len();
        let mut grad_energy = vec![0.0; n];
        let mut energy = 0.0;
        for (f, &gf) in d.faces().iter().zip(&g) {
            let (phi, d1, _) = face_terms(gf, p, eps);
            let wa = f.weight * f.a;
            energy += wa * phi;
            let flux = wa * d1 * inv * vol;
            if let Some(h) = f.head {
                grad_energy[self.layout.index[h]] += flux;
            }
            if let Some(t) = f.tail {
                grad_energy[self.layout.index[t]] -= flux;
            }
        }
        energy *= vol;
        let mut moment = 0.0;
        let grad_moment = self
            .layout
            .cells
            .iter()
            .map(|&c| {
                let au = u[c].abs();
                moment += d.b()[c] * au.powf(p);
                p * d.b()[c] * au.powf(p - 1.0) * u[c].signum() * vol
            })
            .collect();
        Evaluation {
            energy,
            moment: moment * vol,
            grad_energy,
            grad_moment,
            faces: g,
        }
    }

    /// Hessian of the regularized energy, plus a diagonal shift.
    fn hessian(&self, faces: &[f64], eps: f64, shift: f64) -> BandedSpd {
        let d = self.domain;
        let scale = d.cell_volume() / (d.spacing() * d.spacing());
        let mut m = BandedSpd::zeros(self.layout.cells.len(), self.layout.bandwidth);
        for (f, &gf) in d.faces().iter().zip(faces) {
            let k = f.weight * f.a * face_terms(gf, self.p, eps).2 * scale;
            match (
                f.tail.map(|c| self.layout.index[c]),
                f.head.map(|c| self.layout.index[c]),
            ) {
                (Some(t), Some(h)) => {
                    m.add(t, t, k);
                    m.add(h, h, k);
                    m.add(t, h, -k);
                }
                (Some(c), None) | (None, Some(c)) => m.add(c, c, k),
                (None, None) => {}
            }
        }
        if shift > 0.0 {
            for (k, &c) in self.layout.cells.iter().enumerate() {
                m.add(k, k, shift * d.b()[c].max(d.mu()) * d.cell_volume());
            }
        }
        m
    }

    /// Descent direction `−M⁻¹ ∇R` preconditioned by the energy Hessian,
    /// and its slope. `None` when the direction is not a descent direction.
    fn direction(&self, ev: &Evaluation, eps: f64) -> Option<(Vec<f64>, f64)> {
        let q = ev.quotient();
        let grad: Vec<f64> = ev
            .grad_energy
            .iter()
            .zip(&ev.grad_moment)
            .map(|(gf, gg)| (gf - q * gg) / ev.moment)
            .collect();
        let mut shift = 0.0;
        let chol = loop {
            match self.hessian(&ev.faces, eps, shift).factor() {
                Some(c) => break c,
                None if shift > 1e6 => return None,
                None => shift = if shift == 0.0 { 1e-12 } else { shift * 100.0 },
            }
        };
        let dir: Vec<f64> = chol.solve(&grad).into_iter().map(|v| -v).collect();
        let slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        (slope < 0.0).then_some((dir, slope))
    }

    /// Rectified, normalized `base + alpha * dir` on the full grid.
    fn trial(&self, base: &[f64], dir: &[f64], alpha: f64) -> Option<Vec<f64>> {
        let compact: Vec<f64> = base.iter().zip(dir).map(|(b, d)| b + alpha * d).collect();
        let mut full = self.layout.scatter(&compact, self.domain.num_cells());
        if moment_raw(self.domain, &full, self.p) > 0.0 {
            self.normalize(&mut full);
            Some(full)
        } else {
            None
        }
    }

    fn normalize(&self, u: &mut [f64]) {
        let m = moment_raw(self.domain, u, self.p);
        let s = m.powf(-1.0 / self.p);
        u.iter_mut().for_each(|v| *v = v.abs() * s);
    }

    /// `max_i |∂F/∂u_i − R ∂G/∂u_i| / p`, which equals the defect of
    /// `−div(a z) = R b u^(p−1)` scaled by `Δ^dim`.
    fn stationarity(&self, ev: &Evaluation, lambda: f64) -> f64 {
        ev.grad_energy
            .iter()
            .zip(&ev.grad_moment)
            .map(|(gf, gg)| (gf - lambda * gg).abs())
            .fold(0.0, f64::max)
            / self.p
    }
}

/// First eigenvector of the linear (`p = 2`) problem by inverse iteration,
/// normalized to `Σ b u² Δ^dim = 1`.
pub fn linear_first_eigenvector(domain: &WeightedDomain) -> Result<ScalarField> {
    check_mass(domain)?;
    let func = Functional::new(domain, 2.0);
    let n = domain.num_cells();
    let zeros = vec![0.0; domain.faces().len()];
    let chol = func
        .hessian(&zeros, 0.0, 0.0)
        .factor()
        .ok_or(Error::DegenerateDomain)?;
    let mut u = domain
        .mask()
        .iter()
        .map(|&m| if m { 1.0 } else { 0.0 })
        .collect::<Vec<_>>();
    func.normalize(&mut u);
    let mut last = f64::INFINITY;
    for _ in 0..1000 {
        let rhs: Vec<f64> = func
            .layout
            .cells
            .iter()
            .map(|&c| 2.0 * domain.b()[c] * u[c] * domain.cell_volume())
            .collect();
        u = func.layout.scatter(&chol.solve(&rhs), n);
        func.normalize(&mut u);
        let q = func.quotient(&u, 0.0);
        if (last - q).abs() <= 1e-14 * q {
            break;
        }
        last = q;
    }
    Ok(ScalarField { values: u })
}

fn check_mass(domain: &WeightedDomain) -> Result<()> {
    if domain.cells().map(|c| domain.b()[c]).sum::<f64>() <= 0.0 {
        return Err(Error::DegenerateDomain);
    }
    Ok(())
}

/// Solves for the first eigenpair at exponent `p ∈ (1, 2]`.
///
/// For `p = 2` the iteration starts from the b-normalized constant, otherwise
/// from the linear first eigenvector.
pub fn solve_first_eigenpair(
    domain: &WeightedDomain,
    p: f64,
    opts: &SolverOptions,
) -> Result<EigenPair> {
    solve_first_eigenpair_from(domain, p, opts, None)
}

/// As [`solve_first_eigenpair`], warm-started from `init` when given.
pub fn solve_first_eigenpair_from(
    domain: &WeightedDomain,
    p: f64,
    opts: &SolverOptions,
    init: Option<&ScalarField>,
) -> Result<EigenPair> {
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::InvalidExponent(p));
    }
    check_mass(domain)?;
    let func = Functional::new(domain, p);
    let mut u = match init {
        Some(u0) => {
            domain.check_field(u0)?;
            if moment_raw(domain, &u0.values, p) <= 0.0 {
                return Err(Error::ZeroDenominator);
            }
            u0.values.clone()
        }
        None if p == 2.0 => domain
            .mask()
            .iter()
            .map(|&m| if m { 1.0 } else { 0.0 })
            .collect(),
        None => linear_first_eigenvector(domain)?.values,
    };
    func.normalize(&mut u);

    let mut history: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut step = 1.0f64;
    let mut eps = opts.eps0.max(opts.eps_final);
    for iter in 0..opts.max_iters {
        iterations = iter + 1;
        eps = (opts.eps0 * 0.5f64.powi(iter.min(1000) as i32)).max(opts.eps_final);
        let at_final = eps <= opts.eps_final;
        let ev = func.evaluate(&u, eps);
        let q = ev.quotient();
        if at_final {
            history.push(q);
            let h = history.len();
            if h > opts.window && (history[h - 1 - opts.window] - q).abs() <= opts.tol * q {
                converged = true;
                break;
            }
        }
        let Some((dir, slope)) = func.direction(&ev, eps) else {
            if at_final {
                converged = true;
                break;
            }
            continue;
        };
        let base = func.layout.gather(&u);
        let mut alpha = (2.0 * step).min(1.0);
        let mut accepted = None;
        while alpha > 1e-16 {
            if let Some(trial) = func.trial(&base, &dir, alpha) {
                let qt = func.quotient(&trial, eps);
                // Decreases at the level of rounding noise are not progress.
                if qt <= q + 1e-4 * alpha * slope && q - qt > 4.0 * f64::EPSILON * q {
                    accepted = Some(trial);
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some(next) => {
                u = next;
                step = alpha;
            }
            None if at_final => {
                converged = true;
                break;
            }
            None => step = 1.0,
        }
    }

    // Once the quotient is flat to rounding, keep stepping along the same
    // direction as long as the stationarity defect drops and the quotient
    // does not rise above rounding.
    if converged {
        for _ in 0..5 * opts.window.max(1) {
            let ev = func.evaluate(&u, eps);
            let q = ev.quotient();
            let res = func.stationarity(&ev, q);
            let Some((dir, _)) = func.direction(&ev, eps) else {
                break;
            };
            let base = func.layout.gather(&u);
            let mut alpha = 1.0;
            let mut accepted = None;
            while alpha > 1e-6 {
                if let Some(trial) = func.trial(&base, &dir, alpha) {
                    let et = func.evaluate(&trial, eps);
                    let qt = et.quotient();
                    if qt <= q * (1.0 + 8.0 * f64::EPSILON) && func.stationarity(&et, qt) < res {
                        accepted = Some(trial);
                        break;
                    }
                }
                alpha *= 0.5;
            }
            match accepted {
                Some(next) => {
                    u = next;
                    iterations += 1;
                }
                None => break,
            }
        }
    }

    let field = ScalarField { values: u };
    let lambda = rayleigh_quotient(domain, &field, p)?;
    let ev = func.evaluate(&field.values, eps);
    let residual_norm = func.stationarity(&ev, lambda);
    Ok(EigenPair {
        p,
        lambda,
        u: field,
        iterations,
        residual_norm,
        converged,
        eps,
    })
}

/// Flux, sign selection, and the defects of the limit eigenvalue relations
/// evaluated at a converged eigenpair.
pub fn dual_certificate(domain: &WeightedDomain, e: &EigenPair) -> Result<DualCertificate> {
    if !e.converged {
        return Err(Error::NotConverged);
    }
    domain.check_field(&e.u)?;
    let p = e.p;
    let g = domain.face_differences(&e.u.values);
    let z: Vec<f64> = g
        .iter()
        .map(|&gf| (gf * gf + e.eps * e.eps).powf(0.5 * (p - 2.0)) * gf)
        .collect();
    let weighted: Vec<f64> = domain
        .faces()
        .iter()
        .zip(&z)
        .map(|(f, zf)| f.weight * f.a * zf)
        .collect();
    let div = domain.divergence_raw(&weighted);
    let vol = domain.cell_volume();
    let pde_residual = domain
        .cells()
        .map(|c| {
            let u = e.u.values[c];
            (-div[c] - e.lambda * domain.b()[c] * u.powf(p - 1.0)).abs() * vol
        })
        .fold(0.0, f64::max);

    let umax = e.u.max_abs();
    let delta = 1e-8 * umax;
    let gamma =
        e.u.values
            .iter()
            .map(|&u| {
                if u > 0.0 {
                    1.0
                } else {
                    (u / delta).clamp(0.0, 1.0)
                }
            })
            .collect();

    let boundary_sign_defect = domain
        .faces()
        .iter()
        .zip(&z)
        .filter_map(|(f, &zf)| {
            f.exterior_cell().map(|(c, normal)| {
                let u = e.u.values[c];
                (f.a * u.abs() + f.a * u * zf * normal).abs()
            })
        })
        .fold(0.0, f64::max);

    let z = VectorField { values: z };
    Ok(DualCertificate {
        sup_norm_z: z.sup_norm(),
        z,
        gamma: ScalarField { values: gamma },
        pde_residual,
        boundary_sign_defect,
    })
}

/// Evaluates `‖u‖_∞ ≤ (S Λ ‖b‖_r / μ)^(N r / (r − N)) ‖u‖_1` with discrete norms.
pub fn check_acot_bound(
    domain: &WeightedDomain,
    e: &EigenPair,
    r: f64,
    sobolev_constant: f64,
) -> Result<AcotBound> {
    let dim = domain.dim();
    if !(r > dim as f64) || !r.is_finite() {
        return Err(Error::BadExponent { r, dim });
    }
    domain.check_field(&e.u)?;
    let vol = domain.cell_volume();
    let b_norm_r = (domain.cells().map(|c| domain.b()[c].powf(r)).sum::<f64>() * vol).powf(1.0 / r);
    let u_l1 = domain.cells().map(|c| e.u.values[c].abs()).sum::<f64>() * vol;
    let u_inf = e.u.max_abs();
    let n = dim as f64;
    let base = sobolev_constant * e.lambda.abs() * b_norm_r / domain.mu();
    let bound_value = base.powf(n * r / (r - n)) * u_l1;
    Ok(AcotBound {
        sobolev_constant,
        r,
        b_norm_r,
        u_l1,
        u_inf,
        bound_value,
        satisfied: u_inf <= bound_value,
    })
}
