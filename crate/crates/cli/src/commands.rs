//! Command implementations. Each returns the process exit status; hard I/O
//! failures surface as errors.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use cheeger_lab::{
    brute_force_cheeger, check_truco, dinkelbach_cheeger, dual_certificate, run_p_sweep,
    solve_first_eigenpair, CheegerMethod, Error as CoreError, Outcome,
};

use crate::config::RunConfig;
use crate::output::{self, fmt_float};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success = 0,
    NonConvergence = 1,
    Validation = 2,
    VerdictFailure = 3,
}

impl Status {
    pub fn code(self) -> i32 {
        self as i32
    }
}

pub(crate) fn report_core_error(err: &CoreError) -> Status {
    match err {
        CoreError::NotConverged => {
            eprintln!("error: non-convergence: {err}");
            Status::NonConvergence
        }
        _ => {
            eprintln!("error: validation: {err}");
            Status::Validation
        }
    }
}

fn out_dir(cfg: &RunConfig, out: Option<&Path>) -> PathBuf {
    out.map_or_else(|| cfg.output.dir.clone(), Path::to_path_buf)
}

fn emit(dir: &Path, name: &str, contents: &str) -> Result<()> {
    output::write(dir, name, contents)
        .with_context(|| format!("writing {}", dir.join(name).display()))
}

pub fn cmd_eigen(cfg: &RunConfig, p: f64, out: Option<&Path>) -> Result<Status> {
    let domain = &cfg.domain;
    let e = match solve_first_eigenpair(domain, p, &cfg.sweep.solver) {
        Ok(e) => e,
        Err(err) => return Ok(report_core_error(&err)),
    };
    let cert = dual_certificate(domain, &e).ok();
    let dir = out_dir(cfg, out);
    if cfg.output.csv {
        let mut row = vec![
            fmt_float(e.p),
            fmt_float(e.lambda),
            e.iterations.to_string(),
            e.converged.to_string(),
            fmt_float(e.residual_norm),
        ];
        row.extend(
            cert.as_ref()
                .map_or([f64::NAN; 3], |c| {
                    [c.sup_norm_z, c.pde_residual, c.boundary_sign_defect]
                })
                .iter()
                .map(|&x| fmt_float(x)),
        );
        let text = format!(
            "p,lambda,iterations,converged,residual_norm,z_sup,pde_residual,boundary_sign_defect\n{}\n",
            row.join(",")
        );
        emit(&dir, "eigen.csv", &text)?;
        emit(&dir, "eigenfunction.csv", &output::field_csv(domain, &e.u))?;
    }
    if cfg.output.svg {
        emit(&dir, "eigenfunction.svg", &output::field_svg(domain, &e.u))?;
    }
    println!(
        "p={} lambda={} iterations={} converged={}",
        e.p, e.lambda, e.iterations, e.converged
    );
    if let Some(c) = &cert {
        println!(
            "z_sup={} pde_residual={} boundary_sign_defect={}",
            c.sup_norm_z, c.pde_residual, c.boundary_sign_defect
        );
    }
    if !e.converged {
        eprintln!(
            "error: non-convergence: solver stopped after {} iterations",
            e.iterations
        );
        return Ok(Status::NonConvergence);
    }
    Ok(Status::Success)
}

pub fn cmd_cheeger(cfg: &RunConfig, method: CheegerMethod, out: Option<&Path>) -> Result<Status> {
    let domain = &cfg.domain;
    let solved = match method {
        CheegerMethod::Dinkelbach => dinkelbach_cheeger(domain, &cfg.sweep.cheeger),
        CheegerMethod::Brute => brute_force_cheeger(domain),
    };
    let sol = match solved {
        Ok(s) => s,
        Err(err) => return Ok(report_core_error(&err)),
    };
    let dir = out_dir(cfg, out);
    if cfg.output.csv {
        let text = format!(
            "method,h,perimeter,volume,cells\n{},{},{},{},{}\n",
            sol.method,
            fmt_float(sol.h),
            fmt_float(sol.perimeter),
            fmt_float(sol.volume),
            sol.set.count()
        );
        emit(&dir, "cheeger.csv", &text)?;
        emit(&dir, "cheeger_set.csv", &output::mask_csv(domain, &sol.set))?;
        if !sol.trace.is_empty() {
            let mut trace = String::from("t,cut_value\n");
            for s in &sol.trace {
                trace.push_str(&format!("{},{}\n", fmt_float(s.t), fmt_float(s.cut_value)));
            }
            emit(&dir, "dinkelbach_trace.csv", &trace)?;
        }
    }
    if cfg.output.svg {
        emit(&dir, "cheeger_set.svg", &output::set_svg(domain, &sol.set))?;
    }
    println!(
        "method={} h={} perimeter={} volume={} cells={}",
        sol.method,
        sol.h,
        sol.perimeter,
        sol.volume,
        sol.set.count()
    );
    Ok(Status::Success)
}

pub fn cmd_sweep(cfg: &RunConfig, out: Option<&Path>) -> Result<Status> {
    let domain = &cfg.domain;
    let mut report = match run_p_sweep(domain, &cfg.schedule, &cfg.sweep) {
        Ok(r) => r,
        Err(err) => return Ok(report_core_error(&err)),
    };
    let c = cfg.truco_c.unwrap_or_else(|| {
        domain
            .cells()
            .filter(|&i| domain.b()[i] > 0.0)
            .map(|i| domain.a()[i] / domain.b()[i])
            .fold(0.0, f64::max)
    });
    report
        .verdicts
        .push(check_truco(domain, &report, c, cfg.truco_tol));

    let dir = out_dir(cfg, out);
    if cfg.output.csv {
        emit(&dir, "sweep.csv", &output::sweep_csv(&report))?;
        emit(
            &dir,
            "verdicts.csv",
            &output::verdicts_csv(&report.verdicts),
        )?;
        emit(
            &dir,
            "cheeger_set.csv",
            &output::mask_csv(domain, &report.cheeger.set),
        )?;
        if let Some(u) = &report.final_u {
            emit(&dir, "eigenfunction.csv", &output::field_csv(domain, u))?;
        }
    }
    if cfg.output.svg {
        emit(&dir, "report.svg", &output::report_svg(&report))?;
        emit(
            &dir,
            "cheeger_set.svg",
            &output::set_svg(domain, &report.cheeger.set),
        )?;
    }

    for r in &report.records {
        match &r.error {
            Some(e) => println!("p={} error={e}", r.p),
            None => println!(
                "p={} lambda={} z_sup={} residual={} converged={}",
                r.p, r.lambda, r.z_sup, r.residual, r.converged
            ),
        }
    }
    println!("h={}", report.h_value);
    if let Some(s) = report.sigma_bound {
        println!("sigma={s}");
    }
    if let Some(l) = report.limit_estimate {
        match report.limit_order {
            Some(q) => println!("limit={l} order={q}"),
            None => println!("limit={l}"),
        }
    }
    if report.b_range_flag {
        eprintln!("warning: b spans more than six orders of magnitude");
    }
    for v in &report.verdicts {
        let tag = match v.outcome {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::NotApplicable => "N/A ",
        };
        println!("{tag} {} margin={}", v.name, v.margin);
    }

    if report.records.iter().any(|r| !r.converged) {
        eprintln!("error: non-convergence: at least one exponent did not converge");
        return Ok(Status::NonConvergence);
    }
    if report.verdicts.iter().any(|v| v.outcome == Outcome::Fail) {
        eprintln!("error: verdict: at least one check failed");
        return Ok(Status::VerdictFailure);
    }
    Ok(Status::Success)
}
