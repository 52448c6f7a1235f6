//! CSV and SVG emission. Floats are written with 17 significant digits and
//! every file uses LF line endings, so outputs are byte-stable.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use cheeger_lab::{Outcome, ScalarField, SetMask, SweepReport, Verdict, WeightedDomain};

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn sweep_csv(report: &SweepReport) -> String {
    csv(
        &["p", "lambda", "u_inf", "u_l1", "z_sup", "residual"],
        report.records.iter().map(|r| {
            [r.p, r.lambda, r.u_inf, r.u_l1, r.z_sup, r.residual]
                .iter()
                .map(|&x| fmt_float(x))
                .collect()
        }),
    )
}

pub fn verdicts_csv(verdicts: &[Verdict]) -> String {
    csv(
        &["name", "pass", "margin"],
        verdicts.iter().map(|v| {
            let pass = match v.outcome {
                Outcome::Pass => "true",
                Outcome::Fail => "false",
                Outcome::NotApplicable => "na",
            };
            vec![v.name.clone(), pass.to_string(), fmt_float(v.margin)]
        }),
    )
}

/// Row-major grid, one grid row per line. Cells outside the mask hold 0.
pub fn field_csv(domain: &WeightedDomain, u: &ScalarField) -> String {
    let (nx, ny) = domain.shape();
    let mut out = String::new();
    for j in 0..ny {
        let row: Vec<String> = (0..nx)
            .map(|i| {
                let c = j * nx + i;
                fmt_float(if domain.mask()[c] { u.values[c] } else { 0.0 })
            })
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn mask_csv(domain: &WeightedDomain, set: &SetMask) -> String {
    let (nx, ny) = domain.shape();
    let mut out = String::new();
    for j in 0..ny {
        let row: Vec<&str> = (0..nx)
            .map(|i| if set.cells[j * nx + i] { "1" } else { "0" })
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn cell_px(domain: &WeightedDomain) -> usize {
    let (nx, ny) = domain.shape();
    (480 / nx.max(ny)).clamp(2, 40)
}

/// Grid picture with `color(cell)`; rows are drawn with `y` pointing up.
fn grid_svg(domain: &WeightedDomain, color: impl Fn(usize) -> String) -> String {
    let (nx, ny) = domain.shape();
    let px = cell_px(domain);
    let (w, h) = (nx * px, ny * px);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r##"<rect width="{w}" height="{h}" fill="#ffffff"/>"##);
    for j in 0..ny {
        for i in 0..nx {
            let c = j * nx + i;
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="{px}" height="{px}" fill="{}"/>"#,
                i * px,
                (ny - 1 - j) * px,
                color(c)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Domain in light grey with the set overlaid in dark blue.
pub fn set_svg(domain: &WeightedDomain, set: &SetMask) -> String {
    grid_svg(domain, |c| {
        if set.cells[c] {
            "#1f3a93".into()
        } else if domain.mask()[c] {
            "#d0d0d0".into()
        } else {
            "#ffffff".into()
        }
    })
}

/// Heat map of a nonnegative field, white (0) to dark red (max).
pub fn field_svg(domain: &WeightedDomain, u: &ScalarField) -> String {
    let max = u.max_abs().max(f64::MIN_POSITIVE);
    grid_svg(domain, |c| {
        if !domain.mask()[c] {
            return "#ffffff".into();
        }
        let t = (u.values[c].abs() / max).clamp(0.0, 1.0);
        let g = (255.0 * (1.0 - t)).round() as u8;
        let r = (255.0 - 100.0 * t).round() as u8;
        format!("#{r:02x}{g:02x}{g:02x}")
    })
}

/// `λ_p` against `p` with horizontal reference lines at `h` and `σ`.
pub fn report_svg(report: &SweepReport) -> String {
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (70.0, 20.0, 20.0, 50.0);
    let pts: Vec<(f64, f64)> = report
        .converged_records()
        .map(|r| (r.p, r.lambda))
        .collect();
    let mut ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    ys.push(report.h_value);
    ys.extend(report.sigma_bound);
    ys.extend(report.limit_estimate);
    let ymin = ys.iter().copied().fold(f64::INFINITY, f64::min).min(0.0);
    let ymax = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max) * 1.05;
    let (xmin, xmax) = (1.0, 2.0);
    let sx = |x: f64| left + (x - xmin) / (xmax - xmin) * (w - left - right);
    let sy = |y: f64| {
        h - bottom - (y - ymin) / (ymax - ymin).max(f64::MIN_POSITIVE) * (h - top - bottom)
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r##"<rect width="{w}" height="{h}" fill="#ffffff"/>"##);
    let _ = writeln!(
        s,
        r##"<path d="M{l:.2} {t:.2} V{b:.2} H{r:.2}" fill="none" stroke="#000000"/>"##,
        l = left,
        t = top,
        b = h - bottom,
        r = w - right
    );
    for k in 0..=4 {
        let x = xmin + k as f64 * 0.25;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{x:.2}</text>"#,
            sx(x),
            h - bottom + 16.0
        );
        let y = ymin + k as f64 * (ymax - ymin) / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{y:.3}</text>"#,
            left - 6.0,
            sy(y) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">p</text>"#,
        (left + w - right) / 2.0,
        h - 12.0
    );
    let mut hline = |y: f64, color: &str, label: &str| {
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-dasharray="6 4"/>"#,
            sx(xmin),
            sy(y),
            sx(xmax),
            sy(y)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" fill="{color}" text-anchor="end">{label} = {y:.6}</text>"#,
            sx(xmax),
            sy(y) - 4.0
        );
    };
    hline(report.h_value, "#c0392b", "h");
    if let Some(sigma) = report.sigma_bound {
        hline(sigma, "#27ae60", "sigma");
    }
    if !pts.is_empty() {
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#1f3a93" stroke-width="2"/>"##,
            path.join(" ")
        );
        for &(x, y) in &pts {
            let _ = writeln!(
                s,
                r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#1f3a93"/>"##,
                sx(x),
                sy(y)
            );
        }
    }
    if let Some(limit) = report.limit_estimate {
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="none" stroke="#8e44ad" stroke-width="2"/>"##,
            sx(1.0),
            sy(limit)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn write(dir: &Path, name: &str, contents: &str) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)
}

#[cfg(test)]
mod tests {
    use super::*;
    use cheeger_lab::{DomainSpec, Verdict};

    #[test]
    fn floats_have_seventeen_significant_digits() {
        assert_eq!(fmt_float(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_float(2.0), "2.0000000000000000e0");
        let x = std::f64::consts::PI;
        assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn verdict_rows() {
        let v = vec![Verdict {
            name: "sandwich".into(),
            outcome: Outcome::Pass,
            margin: 0.5,
        }];
        assert_eq!(
            verdicts_csv(&v),
            "name,pass,margin\nsandwich,true,5.0000000000000000e-1\n"
        );
    }

    #[test]
    fn grids_are_row_major_with_lf() {
        let d = DomainSpec::grid(3, 2, 1.0).build().unwrap();
        let set = SetMask {
            cells: vec![true, false, false, false, false, true],
        };
        assert_eq!(mask_csv(&d, &set), "1,0,0\n0,0,1\n");
        let svg = set_svg(&d, &set);
        assert!(!svg.contains('\r'));
        assert_eq!(svg, set_svg(&d, &set));
        assert_eq!(svg.matches("#1f3a93").count(), 2);
    }
}
