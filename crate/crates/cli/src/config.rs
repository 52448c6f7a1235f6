//! Run configuration: a line-oriented `key = value` file with `[section]`
//! headers and `#` comments.
//!
//! ```text
//! [domain]
//! dim = 2
//! n = 32
//! extent = 1.0
//! stencil = l1
//!
//! [weights]
//! a = 1 + 0.5 * x
//! b = weights_b.csv
//!
//! [sweep]
//! schedule = default(8)
//! ```

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use cheeger_lab::domain::compile_expr;
use cheeger_lab::{
    default_schedule, DomainSpec, Error as CoreError, MaskSource, Stencil, SweepOptions,
    WeightSource, WeightedDomain,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid value for `{key}`: {message}")]
    Validation { key: String, message: String },
}

impl ConfigError {
    fn invalid(key: &str, message: impl Into<String>) -> Self {
        ConfigError::Validation {
            key: key.to_string(),
            message: message.into(),
        }
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub csv: bool,
    pub svg: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub spec: DomainSpec,
    pub domain: WeightedDomain,
    pub sweep: SweepOptions,
    pub schedule: Vec<f64>,
    /// Constant `C` of the scaled-monotonicity check; defaults to `max a/b`.
    pub truco_c: Option<f64>,
    pub truco_tol: f64,
    pub output: OutputConfig,
}

const KEYS: &[(&str, &[&str])] = &[
    (
        "domain",
        &["dim", "n", "m", "spacing", "extent", "mask", "stencil"],
    ),
    ("weights", &["a", "b", "mu"]),
    (
        "solver",
        &["eps0", "eps_final", "max_iters", "tol", "window", "seed"],
    ),
    ("cheeger", &["delta", "max_iters"]),
    (
        "sweep",
        &[
            "schedule",
            "tol_rel",
            "spacing_coeff",
            "mass_tol",
            "level_set_tol",
            "truco_c",
            "truco_tol",
        ],
    ),
    ("output", &["dir", "formats"]),
];

struct Entry {
    key: String,
    value: String,
}

fn tokenize(text: &str) -> Result<Vec<Entry>> {
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    let mut section: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len();
        if let Some(rest) = trimmed.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return Err(ConfigError::Parse {
                    line,
                    column: indent + 1,
                    message: "unterminated section header".into(),
                });
            };
            let name = name.trim();
            if !KEYS.iter().any(|(s, _)| *s == name) {
                return Err(ConfigError::Parse {
                    line,
                    column: indent + 2,
                    message: format!("unknown section `{name}`"),
                });
            }
            section = Some(name.to_string());
            continue;
        }
        let Some(eq) = content.find('=') else {
            return Err(ConfigError::Parse {
                line,
                column: indent + 1,
                message: "expected `key = value`".into(),
            });
        };
        let key = content[..eq].trim();
        let value = content[eq + 1..].trim();
        if key.is_empty() {
            return Err(ConfigError::Parse {
                line,
                column: eq + 1,
                message: "missing key before `=`".into(),
            });
        }
        let Some(sec) = section.as_deref() else {
            return Err(ConfigError::Parse {
                line,
                column: indent + 1,
                message: format!("key `{key}` outside any section"),
            });
        };
        let known = KEYS
            .iter()
            .find(|(s, _)| *s == sec)
            .map_or(&[][..], |(_, k)| *k);
        if !known.contains(&key) {
            return Err(ConfigError::Parse {
                line,
                column: indent + 1,
                message: format!("unknown key `{sec}.{key}`"),
            });
        }
        if value.is_empty() {
            return Err(ConfigError::Parse {
                line,
                column: eq + 2,
                message: format!("missing value for `{sec}.{key}`"),
            });
        }
        let full = format!("{sec}.{key}");
        if !seen.insert(full.clone()) {
            return Err(ConfigError::Parse {
                line,
                column: indent + 1,
                message: format!("duplicate key `{full}`"),
            });
        }
        entries.push(Entry {
            key: full,
            value: value.to_string(),
        });
    }
    Ok(entries)
}

struct Table {
    entries: Vec<Entry>,
}

impl Table {
    fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.key == key)
            .map(|e| e.value.as_str())
    }

    fn float(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| {
                        ConfigError::invalid(key, format!("`{v}` is not a finite number"))
                    })
            })
            .transpose()
    }

    fn positive(&self, key: &str) -> Result<Option<f64>> {
        match self.float(key)? {
            Some(x) if x <= 0.0 => Err(ConfigError::invalid(key, format!("{x} must be positive"))),
            other => Ok(other),
        }
    }

    fn nonnegative(&self, key: &str) -> Result<Option<f64>> {
        match self.float(key)? {
            Some(x) if x < 0.0 => Err(ConfigError::invalid(
                key,
                format!("{x} must be nonnegative"),
            )),
            other => Ok(other),
        }
    }

    fn count(&self, key: &str) -> Result<Option<usize>> {
        self.get(key)
            .map(|v| match v.parse::<usize>() {
                Ok(n) if n >= 1 => Ok(n),
                _ => Err(ConfigError::invalid(
                    key,
                    format!("`{v}` is not a positive integer"),
                )),
            })
            .transpose()
    }
}

/// Parses `stencil` values: `l1`, `crofton`, `custom(axis)` or
/// `custom(axis, diagonal)`.
pub fn parse_stencil(s: &str) -> std::result::Result<Stencil, String> {
    let t = s.trim().to_ascii_lowercase();
    match t.as_str() {
        "l1" => return Ok(Stencil::L1),
        "crofton" | "crofton_c8" | "c8" => return Ok(Stencil::CroftonC8),
        _ => {}
    }
    let inner = t
        .strip_prefix("custom(")
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| {
            format!("unknown stencil `{s}` (expected l1, crofton or custom(axis[, diagonal]))")
        })?;
    let nums = inner
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| format!("bad stencil weights in `{s}`"))?;
    if nums.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(format!("stencil weights must be positive in `{s}`"));
    }
    match nums[..] {
        [axis] => Ok(Stencil::Custom {
            axis,
            diagonal: None,
        }),
        [axis, d] => Ok(Stencil::Custom {
            axis,
            diagonal: Some(d),
        }),
        _ => Err(format!(
            "custom stencil takes one or two weights, got `{s}`"
        )),
    }
}

/// Parses `schedule` values: `default`, `default(k)` or a comma list.
pub fn parse_schedule(s: &str) -> std::result::Result<Vec<f64>, String> {
    let t = s.trim();
    let schedule = if t == "default" {
        default_schedule(8)
    } else if let Some(k) = t.strip_prefix("default(").and_then(|r| r.strip_suffix(')')) {
        let k: u32 = k
            .trim()
            .parse()
            .map_err(|_| format!("bad schedule length in `{s}`"))?;
        if !(1..=30).contains(&k) {
            return Err(format!("schedule length {k} outside 1..=30"));
        }
        default_schedule(k)
    } else {
        t.split(',')
            .map(|x| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("`{}` is not a number", x.trim()))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?
    };
    if let Some(p) = schedule.iter().find(|&&p| !(p > 1.0 && p <= 2.0)) {
        return Err(format!("p = {p} is outside (1, 2]"));
    }
    if schedule.windows(2).any(|w| !(w[1] < w[0])) {
        return Err("schedule must be strictly decreasing".into());
    }
    Ok(schedule)
}

fn read_grid(path: &Path, key: &str, rows: usize, cols: usize, dim: usize) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut grid: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| {
                ConfigError::invalid(
                    key,
                    format!("{}: line {}: not a number", path.display(), i + 1),
                )
            })?;
        grid.push(row);
    }
    let found_cols = grid.first().map_or(0, Vec::len);
    if grid.iter().any(|r| r.len() != found_cols) {
        return Err(ConfigError::invalid(
            key,
            format!("{}: ragged rows", path.display()),
        ));
    }
    let found = (grid.len(), found_cols);
    let ok = found == (rows, cols) || (dim == 1 && found == (cols, 1));
    if !ok {
        return Err(ConfigError::invalid(
            key,
            format!(
                "{}: expected {rows}x{cols} (rows x columns), found {}x{}",
                path.display(),
                found.0,
                found.1
            ),
        ));
    }
    Ok(grid.into_iter().flatten().collect())
}

fn weight_source(
    value: &str,
    key: &str,
    base: &Path,
    rows: usize,
    cols: usize,
    dim: usize,
) -> Result<WeightSource> {
    if value.ends_with(".csv") {
        return read_grid(&base.join(value), key, rows, cols, dim).map(WeightSource::Grid);
    }
    if let Ok(c) = value.parse::<f64>() {
        return Ok(WeightSource::Constant(c));
    }
    if let Err(e) = compile_expr(value) {
        return Err(ConfigError::invalid(key, e.to_string()));
    }
    Ok(WeightSource::Expr(value.to_string()))
}

fn core_key(err: &CoreError) -> &'static str {
    match err {
        CoreError::NonPositiveWeightA { .. }
        | CoreError::WeightBelowMu { .. }
        | CoreError::NonPositiveMu(_)
        | CoreError::NegativeWeightB { .. }
        | CoreError::NonFiniteWeight { .. }
        | CoreError::ZeroMassB
        | CoreError::BadExpression { .. } => "weights",
        _ => "domain",
    }
}

/// Reads and validates a configuration file. Relative paths inside it are
/// resolved against the file's directory.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, base)
}

pub fn parse_config_str(text: &str, base: &Path) -> Result<RunConfig> {
    let t = Table {
        entries: tokenize(text)?,
    };

    let dim = t.count("domain.dim")?.unwrap_or(1);
    if dim > 2 {
        return Err(ConfigError::invalid(
            "domain.dim",
            format!("{dim} is not 1 or 2"),
        ));
    }
    let n = t
        .count("domain.n")?
        .ok_or_else(|| ConfigError::invalid("domain.n", "required"))?;
    let m = match (dim, t.count("domain.m")?) {
        (1, Some(m)) if m != 1 => {
            return Err(ConfigError::invalid("domain.m", "must be 1 for dim = 1"))
        }
        (1, _) => 1,
        (_, m) => m.unwrap_or(n),
    };
    let spacing = match (t.positive("domain.spacing")?, t.positive("domain.extent")?) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::invalid(
                "domain.spacing",
                "give either spacing or extent, not both",
            ))
        }
        (Some(h), None) => h,
        (None, extent) => extent.unwrap_or(1.0) / n as f64,
    };
    let mask = match t.get("domain.mask") {
        None | Some("full") => MaskSource::Full,
        Some(v) => {
            let raw = read_grid(&base.join(v), "domain.mask", m, n, dim)?;
            if raw.iter().any(|&x| x != 0.0 && x != 1.0) {
                return Err(ConfigError::invalid(
                    "domain.mask",
                    "mask entries must be 0 or 1",
                ));
            }
            MaskSource::Grid(raw.into_iter().map(|x| x == 1.0).collect())
        }
    };
    let stencil = match t.get("domain.stencil") {
        None => Stencil::L1,
        Some(v) => parse_stencil(v).map_err(|e| ConfigError::invalid("domain.stencil", e))?,
    };
    let a = match t.get("weights.a") {
        None => WeightSource::Constant(1.0),
        Some(v) => weight_source(v, "weights.a", base, m, n, dim)?,
    };
    let b = match t.get("weights.b") {
        None => WeightSource::Constant(1.0),
        Some(v) => weight_source(v, "weights.b", base, m, n, dim)?,
    };
    let spec = DomainSpec {
        dim,
        nx: n,
        ny: m,
        spacing,
        mask,
        a,
        b,
        mu: t.positive("weights.mu")?,
        stencil,
    };
    let domain = spec
        .build()
        .map_err(|e| ConfigError::invalid(core_key(&e), e.to_string()))?;

    let mut sweep = SweepOptions::default();
    let s = &mut sweep.solver;
    s.eps0 = t.positive("solver.eps0")?.unwrap_or(s.eps0);
    s.eps_final = t.positive("solver.eps_final")?.unwrap_or(s.eps_final);
    if s.eps_final > s.eps0 {
        return Err(ConfigError::invalid(
            "solver.eps_final",
            "must not exceed solver.eps0",
        ));
    }
    s.max_iters = t.count("solver.max_iters")?.unwrap_or(s.max_iters);
    s.tol = t.positive("solver.tol")?.unwrap_or(s.tol);
    s.window = t.count("solver.window")?.unwrap_or(s.window);
    if let Some(v) = t.get("solver.seed") {
        s.seed = v.parse().map_err(|_| {
            ConfigError::invalid("solver.seed", format!("`{v}` is not an unsigned integer"))
        })?;
    }
    sweep.cheeger.delta = t.positive("cheeger.delta")?.unwrap_or(sweep.cheeger.delta);
    sweep.cheeger.max_iters = t
        .count("cheeger.max_iters")?
        .unwrap_or(sweep.cheeger.max_iters);
    sweep.tol_rel = t.nonnegative("sweep.tol_rel")?.unwrap_or(sweep.tol_rel);
    sweep.spacing_coeff = t
        .nonnegative("sweep.spacing_coeff")?
        .unwrap_or(sweep.spacing_coeff);
    sweep.mass_tol = t.nonnegative("sweep.mass_tol")?.unwrap_or(sweep.mass_tol);
    sweep.level_set_tol = t
        .nonnegative("sweep.level_set_tol")?
        .unwrap_or(sweep.level_set_tol);
    let schedule = match t.get("sweep.schedule") {
        None => default_schedule(8),
        Some(v) => parse_schedule(v).map_err(|e| ConfigError::invalid("sweep.schedule", e))?,
    };

    let output = {
        let dir = base.join(t.get("output.dir").unwrap_or("out"));
        let (mut csv, mut svg) = (true, true);
        if let Some(v) = t.get("output.formats") {
            csv = false;
            svg = false;
            for f in v.split(',').map(str::trim) {
                match f {
                    "csv" => csv = true,
                    "svg" => svg = true,
                    _ => {
                        return Err(ConfigError::invalid(
                            "output.formats",
                            format!("unknown format `{f}`"),
                        ))
                    }
                }
            }
        }
        OutputConfig { dir, csv, svg }
    };

    Ok(RunConfig {
        spec,
        domain,
        sweep,
        schedule,
        truco_c: t.positive("sweep.truco_c")?,
        truco_tol: t.nonnegative("sweep.truco_tol")?.unwrap_or(1e-3),
        output,
    })
}
