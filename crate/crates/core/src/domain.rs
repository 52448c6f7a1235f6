//! Discrete geometry on cell-centered grids.
//!
//! A [`WeightedDomain`] is a 1D interval or a masked 2D grid of square cells
//! carrying two weight fields: `a` (the density in the total variation and
//! p-energies) and `b` (the density in the volume integrals). Fields are
//! extended by zero outside the mask, so every difference operator sees a
//! ghost value of 0 across the domain boundary. The boundary term
//! `∫_{∂Ω} a|u|` of the Dirichlet-relaxed energies is exactly the
//! contribution of the exterior faces.

use std::collections::VecDeque;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Neighbor system used for differences and perimeters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stencil {
    /// Axis neighbors only, unit weights. Perimeters are measured in the L1 metric.
    L1,
    /// Axis and diagonal neighbors with Cauchy-Crofton weights.
    CroftonC8,
    /// Axis (and optionally diagonal) neighbors with explicit weights.
    Custom { axis: f64, diagonal: Option<f64> },
}

impl Stencil {
    /// Half-stencil offsets with their weights. The other half is the negation.
    fn half(&self, dim: usize) -> Vec<((isize, isize), f64)> {
        if dim == 1 {
            let w = match *self {
                Stencil::L1 | Stencil::CroftonC8 => 1.0,
                Stencil::Custom { axis, .. } => axis,
            };
            return vec![((1, 0), w)];
        }
        let (axis, diag) = match *self {
            Stencil::L1 => (1.0, None),
            Stencil::CroftonC8 => (PI / 8.0, Some(PI / (8.0 * 2f64.sqrt()))),
            Stencil::Custom { axis, diagonal } => (axis, diagonal),
        };
        let mut offsets = vec![((1, 0), axis), ((0, 1), axis)];
        if let Some(d) = diag {
            offsets.push(((1, 1), d));
            offsets.push(((-1, 1), d));
        }
        offsets
    }
}

/// Source of a weight field: a constant, an expression in `x`, `y`
/// evaluated at cell centers, or an explicit row-major grid.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSource {
    Constant(f64),
    Expr(String),
    Grid(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum MaskSource {
    Full,
    Grid(Vec<bool>),
}

/// Input to [`WeightedDomain::build`].
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub dim: usize,
    pub nx: usize,
    /// Number of rows; must be 1 when `dim == 1`.
    pub ny: usize,
    pub spacing: f64,
    pub mask: MaskSource,
    pub a: WeightSource,
    pub b: WeightSource,
    /// Declared lower bound on `a`. Defaults to the minimum of `a` over the mask.
    pub mu: Option<f64>,
    pub stencil: Stencil,
}

impl DomainSpec {
    /// Interval of `n` cells with unit weights.
    pub fn interval(n: usize, spacing: f64) -> Self {
        DomainSpec {
            dim: 1,
            nx: n,
            ny: 1,
            spacing,
            mask: MaskSource::Full,
            a: WeightSource::Constant(1.0),
            b: WeightSource::Constant(1.0),
            mu: None,
            stencil: Stencil::L1,
        }
    }

    /// Full `nx × ny` grid with unit weights.
    pub fn grid(nx: usize, ny: usize, spacing: f64) -> Self {
        DomainSpec {
            dim: 2,
            nx,
            ny,
            ..DomainSpec::interval(nx, spacing)
        }
    }

    pub fn with_a(mut self, a: WeightSource) -> Self {
        self.a = a;
        self
    }

    pub fn with_b(mut self, b: WeightSource) -> Self {
        self.b = b;
        self
    }

    pub fn with_stencil(mut self, stencil: Stencil) -> Self {
        self.stencil = stencil;
        self
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Self {
        self.mask = MaskSource::Grid(mask);
        self
    }

    pub fn build(&self) -> Result<WeightedDomain> {
        WeightedDomain::build(self)
    }
}

/// An oriented face between two cells, or between a cell and the exterior.
///
/// The face difference is `(u[head] - u[tail]) / Δ` with `None` read as the
/// ghost value 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub tail: Option<usize>,
    pub head: Option<usize>,
    /// Stencil weight (dimensionless).
    pub weight: f64,
    /// Face value of `a`: mean of the two adjacent cells, inside value on exterior faces.
    pub a: f64,
}

impl Face {
    pub fn is_exterior(&self) -> bool {
        self.tail.is_none() || self.head.is_none()
    }

    /// The inside cell of an exterior face and the sign of the outward normal
    /// relative to the face orientation.
    pub fn exterior_cell(&self) -> Option<(usize, f64)> {
        match (self.tail, self.head) {
            (Some(c), None) => Some((c, 1.0)),
            (None, Some(c)) => Some((c, -1.0)),
            _ => None,
        }
    }
}

/// Real value per cell, zero outside the mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(domain: &WeightedDomain) -> Self {
        ScalarField {
            values: vec![0.0; domain.num_cells()],
        }
    }

    /// Field from a function of the cell center, zeroed outside the mask.
    pub fn from_fn(domain: &WeightedDomain, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let values = (0..domain.num_cells())
            .map(|c| {
                if domain.mask[c] {
                    let (x, y) = domain.center(c);
                    f(x, y)
                } else {
                    0.0
                }
            })
            .collect();
        ScalarField { values }
    }

    /// Indicator of a set.
    pub fn indicator(set: &SetMask) -> Self {
        ScalarField {
            values: set
                .cells
                .iter()
                .map(|&s| if s { 1.0 } else { 0.0 })
                .collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        ScalarField {
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Real value per face, in the order of [`WeightedDomain::faces`].
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub values: Vec<f64>,
}

impl VectorField {
    pub fn zeros(domain: &WeightedDomain) -> Self {
        VectorField {
            values: vec![0.0; domain.faces.len()],
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Subset of the domain cells.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SetMask {
    pub cells: Vec<bool>,
}

impl SetMask {
    pub fn empty(domain: &WeightedDomain) -> Self {
        SetMask {
            cells: vec![false; domain.num_cells()],
        }
    }

    pub fn full(domain: &WeightedDomain) -> Self {
        SetMask {
            cells: domain.mask.clone(),
        }
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.cells.iter().any(|&c| c)
    }
}

/// One level of the coarea decomposition: the superlevel set `{u > t}`
/// stays constant for thresholds in `[t, t + dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoareaLevel {
    pub threshold: f64,
    pub set: SetMask,
    pub dt: f64,
}

/// Validated discrete weighted domain. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDomain {
    dim: usize,
    nx: usize,
    ny: usize,
    spacing: f64,
    mask: Vec<bool>,
    a: Vec<f64>,
    b: Vec<f64>,
    mu: f64,
    stencil: Stencil,
    faces: Vec<Face>,
}

impl WeightedDomain {
    pub fn build(spec: &DomainSpec) -> Result<Self> {
        if spec.dim != 1 && spec.dim != 2 {
            return Err(Error::BadShape(format!(
                "dimension must be 1 or 2, got {}",
                spec.dim
            )));
        }
        if spec.nx == 0 || spec.ny == 0 {
            return Err(Error::BadShape(format!("{}x{} grid", spec.nx, spec.ny)));
        }
        if spec.dim == 1 && spec.ny != 1 {
            return Err(Error::BadShape("1D domains have exactly one row".into()));
        }
        if !(spec.spacing.is_finite() && spec.spacing > 0.0) {
            return Err(Error::NonPositiveSpacing(spec.spacing));
        }
        if let Stencil::Custom { axis, diagonal } = spec.stencil {
            let ok = |w: f64| w.is_finite() && w >= 0.0;
            if !ok(axis) || !diagonal.is_none_or(ok) {
                return Err(Error::BadShape(
                    "stencil weights must be finite and nonnegative".into(),
                ));
            }
        }
        let n = spec.nx * spec.ny;
        let mask = match &spec.mask {
            MaskSource::Full => vec![true; n],
            MaskSource::Grid(m) => {
                if m.len() != n {
                    return Err(Error::BadShape(format!(
                        "mask has {} cells, grid has {}x{}",
                        m.len(),
                        spec.nx,
                        spec.ny
                    )));
                }
                m.clone()
            }
        };
        let mut domain = WeightedDomain {
            dim: spec.dim,
            nx: spec.nx,
            ny: spec.ny,
            spacing: spec.spacing,
            mask,
            a: Vec::new(),
            b: Vec::new(),
            mu: 0.0,
            stencil: spec.stencil,
            faces: Vec::new(),
        };
        let a = domain.sample(&spec.a, "a")?;
        let b = domain.sample(&spec.b, "b")?;
        domain.install(a, b, spec.mu)?;
        Ok(domain)
    }

    /// Same grid and stencil with new weight fields (validated again).
    pub fn with_weights(&self, a: Vec<f64>, b: Vec<f64>, mu: Option<f64>) -> Result<Self> {
        let n = self.num_cells();
        if a.len() != n || b.len() != n {
            return Err(Error::DomainMismatch(format!(
                "weight grids must have {n} cells, got {} and {}",
                a.len(),
                b.len()
            )));
        }
        let mut d = self.clone();
        d.install(a, b, mu)?;
        Ok(d)
    }

    fn sample(&self, source: &WeightSource, field: &'static str) -> Result<Vec<f64>> {
        let n = self.num_cells();
        let values = match source {
            WeightSource::Constant(c) => vec![*c; n],
            WeightSource::Grid(g) => {
                if g.len() != n {
                    return Err(Error::BadShape(format!(
                        "weight {field} grid has {} values, expected {}x{}",
                        g.len(),
                        self.nx,
                        self.ny
                    )));
                }
                g.clone()
            }
            WeightSource::Expr(src) => {
                let f = compile_expr(src)?;
                (0..n)
                    .map(|c| {
                        let (x, y) = self.center(c);
                        f(x, y)
                    })
                    .collect()
            }
        };
        for (c, v) in values.iter().enumerate() {
            if self.mask[c] && !v.is_finite() {
                return Err(Error::NonFiniteWeight { field, cell: c });
            }
        }
        Ok(values)
    }

    fn install(&mut self, mut a: Vec<f64>, mut b: Vec<f64>, mu: Option<f64>) -> Result<()> {
        let cells: Vec<usize> = (0..self.num_cells()).filter(|&c| self.mask[c]).collect();
        if cells.is_empty() {
            return Err(Error::EmptyDomain);
        }
        for &c in &cells {
            if !a[c].is_finite() {
                return Err(Error::NonFiniteWeight {
                    field: "a",
                    cell: c,
                });
            }
            if !b[c].is_finite() {
                return Err(Error::NonFiniteWeight {
                    field: "b",
                    cell: c,
                });
            }
            if a[c] <= 0.0 {
                return Err(Error::NonPositiveWeightA {
                    cell: c,
                    value: a[c],
                });
            }
            if b[c] < 0.0 {
                return Err(Error::NegativeWeightB {
                    cell: c,
                    value: b[c],
                });
            }
        }
        let min_a = cells.iter().map(|&c| a[c]).fold(f64::INFINITY, f64::min);
        let mu = match mu {
            Some(mu) => {
                if !(mu.is_finite() && mu > 0.0) {
                    return Err(Error::NonPositiveMu(mu));
                }
                if let Some(&c) = cells.iter().find(|&&c| a[c] < mu) {
                    return Err(Error::WeightBelowMu {
                        cell: c,
                        value: a[c],
                        mu,
                    });
                }
                mu
            }
            None => min_a,
        };
        if cells.iter().map(|&c| b[c]).sum::<f64>() <= 0.0 {
            return Err(Error::ZeroMassB);
        }
        for c in 0..self.num_cells() {
            if !self.mask[c] {
                a[c] = 0.0;
                b[c] = 0.0;
            }
        }
        self.a = a;
        self.b = b;
        self.mu = mu;
        self.faces = self.build_faces();
        if !self.is_connected() {
            return Err(Error::DisconnectedMask);
        }
        Ok(())
    }

    fn neighbor(&self, c: usize, off: (isize, isize)) -> Option<usize> {
        let i = (c % self.nx) as isize + off.0;
        let j = (c / self.nx) as isize + off.1;
        if i < 0 || j < 0 || i >= self.nx as isize || j >= self.ny as isize {
            return None;
        }
        let n = j as usize * self.nx + i as usize;
        self.mask[n].then_some(n)
    }

    fn build_faces(&self) -> Vec<Face> {
        let half = self.stencil.half(self.dim);
        let mut faces = Vec::new();
        for c in (0..self.num_cells()).filter(|&c| self.mask[c]) {
            for &((dx, dy), w) in &half {
                if self.neighbor(c, (-dx, -dy)).is_none() {
                    faces.push(Face {
                        tail: None,
                        head: Some(c),
                        weight: w,
                        a: self.a[c],
                    });
                }
            }
            for &(off, w) in &half {
                match self.neighbor(c, off) {
                    Some(n) => faces.push(Face {
                        tail: Some(c),
                        head: Some(n),
                        weight: w,
                        a: 0.5 * (self.a[c] + self.a[n]),
                    }),
                    None => faces.push(Face {
                        tail: Some(c),
                        head: None,
                        weight: w,
                        a: self.a[c],
                    }),
                }
            }
        }
        faces
    }

    fn is_connected(&self) -> bool {
        let cells: Vec<usize> = self.cells().collect();
        let mut adj = vec![Vec::new(); self.num_cells()];
        for f in &self.faces {
            if let (Some(t), Some(h)) = (f.tail, f.head) {
                adj[t].push(h);
                adj[h].push(t);
            }
        }
        let mut seen = vec![false; self.num_cells()];
        let mut queue = VecDeque::from([cells[0]]);
        seen[cells[0]] = true;
        let mut count = 1;
        while let Some(c) = queue.pop_front() {
            for &n in &adj[c] {
                if !seen[n] {
                    seen[n] = true;
                    count += 1;
                    queue.push_back(n);
                }
            }
        }
        count == cells.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Grid shape `(nx, ny)`; `ny == 1` in 1D.
    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn num_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Indices of the cells inside the mask, in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_cells()).filter(move |&c| self.mask[c])
    }

    pub fn num_inside(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn stencil(&self) -> Stencil {
        self.stencil
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    /// Cell measure `Δ^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Face measure `Δ^(dim-1)`.
    pub fn face_area(&self) -> f64 {
        self.spacing.powi(self.dim as i32 - 1)
    }

    /// Cell center. In 1D `y` is 0.
    pub fn center(&self, c: usize) -> (f64, f64) {
        let i = c % self.nx;
        let j = c / self.nx;
        let x = (i as f64 + 0.5) * self.spacing;
        let y = if self.dim == 1 {
            0.0
        } else {
            (j as f64 + 0.5) * self.spacing
        };
        (x, y)
    }

    pub fn max_b(&self) -> f64 {
        self.cells().map(|c| self.b[c]).fold(0.0, f64::max)
    }

    /// Ratio of the largest to the smallest positive value of `b`.
    pub fn b_dynamic_range(&self) -> f64 {
        let min_pos = self
            .cells()
            .map(|c| self.b[c])
            .filter(|&v| v > 0.0)
            .fold(f64::INFINITY, f64::min);
        self.max_b() / min_pos
    }

    /// Cells of the set that own an exterior face.
    pub fn touches_boundary(&self, set: &SetMask) -> bool {
        self.faces
            .iter()
            .filter_map(Face::exterior_cell)
            .any(|(c, _)| set.cells[c])
    }

    pub fn check_field(&self, u: &ScalarField) -> Result<()> {
        if u.values.len() != self.num_cells() {
            return Err(Error::DomainMismatch(format!(
                "field has {} values, domain has {} cells",
                u.values.len(),
                self.num_cells()
            )));
        }
        for (c, v) in u.values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::DomainMismatch(format!(
                    "non-finite value at cell {c}"
                )));
            }
            if !self.mask[c] && *v != 0.0 {
                return Err(Error::DomainMismatch(format!(
                    "nonzero value outside the mask at cell {c}"
                )));
            }
        }
        Ok(())
    }

    pub fn check_set(&self, set: &SetMask) -> Result<()> {
        if set.cells.len() != self.num_cells() {
            return Err(Error::DomainMismatch(format!(
                "set has {} cells, domain has {}",
                set.cells.len(),
                self.num_cells()
            )));
        }
        if let Some(c) = (0..self.num_cells()).find(|&c| set.cells[c] && !self.mask[c]) {
            return Err(Error::DomainMismatch(format!(
                "set contains cell {c} outside the mask"
            )));
        }
        Ok(())
    }

    fn check_vector(&self, z: &VectorField) -> Result<()> {
        if z.values.len() != self.faces.len() {
            return Err(Error::DomainMismatch(format!(
                "vector field has {} values, domain has {} faces",
                z.values.len(),
                self.faces.len()
            )));
        }
        Ok(())
    }

    /// Forward difference across every face with ghost value 0 outside.
    pub fn gradient(&self, u: &ScalarField) -> Result<VectorField> {
        self.check_field(u)?;
        Ok(VectorField {
            values: self.face_differences(&u.values),
        })
    }

    pub(crate) fn face_differences(&self, u: &[f64]) -> Vec<f64> {
        let inv = 1.0 / self.spacing;
        self.faces
            .iter()
            .map(|f| {
                let head = f.head.map_or(0.0, |c| u[c]);
                let tail = f.tail.map_or(0.0, |c| u[c]);
                (head - tail) * inv
            })
            .collect()
    }

    /// Negative adjoint of [`gradient`](Self::gradient) under plain sums over
    /// faces and cells: net outflow of each cell divided by `Δ`.
    pub fn divergence(&self, z: &VectorField) -> Result<ScalarField> {
        self.check_vector(z)?;
        Ok(ScalarField {
            values: self.divergence_raw(&z.values),
        })
    }

    pub(crate) fn divergence_raw(&self, z: &[f64]) -> Vec<f64> {
        let inv = 1.0 / self.spacing;
        let mut div = vec![0.0; self.num_cells()];
        for (f, &zf) in self.faces.iter().zip(z) {
            if let Some(t) = f.tail {
                div[t] += zf * inv;
            }
            if let Some(h) = f.head {
                div[h] -= zf * inv;
            }
        }
        div
    }

    /// `Σ_f w_f a_f |u_head − u_tail| Δ^(dim−1)`, exterior faces included.
    pub fn weighted_tv(&self, u: &ScalarField) -> Result<f64> {
        self.check_field(u)?;
        Ok(self.tv_with(&u.values, |f| f.weight * f.a))
    }

    /// Total variation with unit density (stencil weights kept).
    pub fn unweighted_tv(&self, u: &ScalarField) -> Result<f64> {
        self.check_field(u)?;
        Ok(self.tv_with(&u.values, |f| f.weight))
    }

    fn tv_with(&self, u: &[f64], density: impl Fn(&Face) -> f64) -> f64 {
        let area = self.face_area();
        self.faces
            .iter()
            .map(|f| {
                let head = f.head.map_or(0.0, |c| u[c]);
                let tail = f.tail.map_or(0.0, |c| u[c]);
                density(f) * (head - tail).abs()
            })
            .sum::<f64>()
            * area
    }

    /// Perimeter of `E` relative to ℝ^N: the weighted TV of its indicator.
    pub fn weighted_perimeter(&self, set: &SetMask) -> Result<f64> {
        self.check_set(set)?;
        let area = self.face_area();
        let inside = |c: Option<usize>| c.is_some_and(|c| set.cells[c]);
        Ok(self
            .faces
            .iter()
            .filter(|f| inside(f.head) != inside(f.tail))
            .map(|f| f.weight * f.a)
            .sum::<f64>()
            * area)
    }

    /// `Σ_{i∈E} b_i Δ^dim`.
    pub fn weighted_volume(&self, set: &SetMask) -> Result<f64> {
        self.check_set(set)?;
        Ok((0..self.num_cells())
            .filter(|&c| set.cells[c])
            .map(|c| self.b[c])
            .sum::<f64>()
            * self.cell_volume())
    }

    /// Superlevel sets of a nonnegative field at its distinct values.
    ///
    /// `weighted_tv(u) == Σ weighted_perimeter(level.set) * level.dt`.
    pub fn coarea_decompose(&self, u: &ScalarField) -> Result<Vec<CoareaLevel>> {
        self.check_field(u)?;
        if let Some(c) = u.values.iter().position(|&v| v < 0.0) {
            return Err(Error::NegativeField(c));
        }
        let mut values: Vec<f64> = self
            .cells()
            .map(|c| u.values[c])
            .filter(|&v| v > 0.0)
            .collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        let mut levels = Vec::with_capacity(values.len());
        let mut lower = 0.0;
        for v in values {
            levels.push(CoareaLevel {
                threshold: lower,
                set: SetMask {
                    cells: u.values.iter().map(|&x| x > lower).collect(),
                },
                dt: v - lower,
            });
            lower = v;
        }
        Ok(levels)
    }
}

/// Compiles a weight expression in `x` and `y`.
pub fn compile_expr(src: &str) -> Result<impl Fn(f64, f64) -> f64> {
    let bad = |reason: String| Error::BadExpression {
        expr: src.to_string(),
        reason,
    };
    let expr: meval::Expr = src.parse().map_err(|e: meval::Error| bad(e.to_string()))?;
    expr.bind2("x", "y").map_err(|e| bad(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval(n: usize, spacing: f64) -> WeightedDomain {
        DomainSpec::interval(n, spacing).build().unwrap()
    }

    #[test]
    fn builds_constant_interval() {
        let d = interval(4, 0.25);
        assert_eq!(d.num_cells(), 4);
        assert_eq!(d.mu(), 1.0);
        assert_eq!(d.dim(), 1);
    }

    #[test]
    fn samples_affine_weight_at_centers() {
        let d = DomainSpec::grid(8, 8, 1.0 / 8.0)
            .with_a(WeightSource::Expr("1 + x".into()))
            .build()
            .unwrap();
        assert!((d.mu() - (1.0 + 1.0 / 16.0)).abs() < 1e-15);
        assert!((d.a()[7] - (1.0 + 15.0 / 16.0)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_weights() {
        let zero_b = DomainSpec::interval(4, 0.25).with_b(WeightSource::Constant(0.0));
        assert_eq!(zero_b.build().unwrap_err(), Error::ZeroMassB);
        let neg_a = DomainSpec::interval(4, 0.25).with_a(WeightSource::Expr("x - 0.5".into()));
        assert!(matches!(
            neg_a.build(),
            Err(Error::NonPositiveWeightA { .. })
        ));
        let neg_b =
            DomainSpec::interval(4, 0.25).with_b(WeightSource::Grid(vec![1.0, -1.0, 1.0, 1.0]));
        assert!(matches!(
            neg_b.build(),
            Err(Error::NegativeWeightB { cell: 1, .. })
        ));
        let empty = DomainSpec::grid(2, 2, 1.0).with_mask(vec![false; 4]);
        assert_eq!(empty.build().unwrap_err(), Error::EmptyDomain);
        let singular =
            DomainSpec::interval(4, 0.25).with_b(WeightSource::Expr("1 / (x - 0.125)".into()));
        assert!(matches!(
            singular.build(),
            Err(Error::NonFiniteWeight {
                field: "b",
                cell: 0
            })
        ));
        let mut spec = DomainSpec::interval(4, 0.25);
        spec.mu = Some(2.0);
        assert!(matches!(spec.build(), Err(Error::WeightBelowMu { .. })));
        let split = DomainSpec::grid(3, 1, 1.0).with_mask(vec![true, false, true]);
        assert_eq!(split.build().unwrap_err(), Error::DisconnectedMask);
        let bad = DomainSpec::interval(4, 0.25).with_a(WeightSource::Expr("1 +* x".into()));
        assert!(matches!(bad.build(), Err(Error::BadExpression { .. })));
    }

    #[test]
    fn singular_weight_is_fine_away_from_centers() {
        // 1/|x - 0.5| is singular on a cell edge, never at a center.
        let d = DomainSpec::interval(4, 0.25)
            .with_b(WeightSource::Expr("1 / abs(x - 0.5)".into()))
            .build()
            .unwrap();
        assert_eq!(d.max_b(), 8.0);
        assert_eq!(d.b_dynamic_range(), 3.0);
    }

    #[test]
    fn gradient_of_constant_has_boundary_jumps() {
        let d = interval(3, 1.0);
        let g = d
            .gradient(&ScalarField {
                values: vec![2.5; 3],
            })
            .unwrap();
        assert_eq!(g.values, vec![2.5, 0.0, 0.0, -2.5]);
    }

    #[test]
    fn gradient_of_bump() {
        let d = interval(3, 1.0);
        let g = d
            .gradient(&ScalarField {
                values: vec![0.0, 1.0, 0.0],
            })
            .unwrap();
        assert_eq!(g.values, vec![0.0, 1.0, -1.0, 0.0]);
    }

    #[test]
    fn checkerboard_gradient() {
        let d = DomainSpec::grid(2, 2, 1.0).build().unwrap();
        let u = ScalarField {
            values: vec![1.0, 0.0, 0.0, 1.0],
        };
        let g = d.gradient(&u).unwrap();
        for (f, v) in d.faces().iter().zip(&g.values) {
            if !f.is_exterior() {
                assert_eq!(v.abs(), 1.0);
            }
        }
        assert_eq!(d.faces().iter().filter(|f| !f.is_exterior()).count(), 4);
    }

    #[test]
    fn divergence_of_constant_flux_vanishes() {
        let d = interval(3, 1.0);
        let div = d
            .divergence(&VectorField {
                values: vec![1.0; 4],
            })
            .unwrap();
        assert_eq!(div.values, vec![0.0; 3]);
        let zero = d.divergence(&VectorField::zeros(&d)).unwrap();
        assert_eq!(zero.values, vec![0.0; 3]);
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let d = interval(3, 1.0);
        assert!(matches!(
            d.gradient(&ScalarField {
                values: vec![0.0; 4]
            }),
            Err(Error::DomainMismatch(_))
        ));
        assert!(matches!(
            d.divergence(&VectorField {
                values: vec![0.0; 3]
            }),
            Err(Error::DomainMismatch(_))
        ));
        let masked = DomainSpec::grid(2, 2, 1.0)
            .with_mask(vec![true, true, true, false])
            .build()
            .unwrap();
        assert!(masked
            .check_field(&ScalarField {
                values: vec![0.0, 0.0, 0.0, 1.0]
            })
            .is_err());
        assert!(masked
            .check_set(&SetMask {
                cells: vec![false, false, false, true]
            })
            .is_err());
    }

    #[test]
    fn tv_of_interval_indicator_is_two() {
        for n in [1, 5, 64] {
            let d = interval(n, 1.0 / n as f64);
            let u = ScalarField {
                values: vec![1.0; n],
            };
            assert!((d.weighted_tv(&u).unwrap() - 2.0).abs() < 1e-14);
        }
        let d = interval(5, 0.2);
        assert_eq!(d.weighted_tv(&ScalarField::zeros(&d)).unwrap(), 0.0);
    }

    #[test]
    fn perimeter_of_unit_square() {
        for n in [1, 3, 10] {
            let d = DomainSpec::grid(n, n, 1.0 / n as f64).build().unwrap();
            let p = d.weighted_perimeter(&SetMask::full(&d)).unwrap();
            assert!((p - 4.0).abs() < 1e-13, "n={n} p={p}");
            assert!((d.weighted_volume(&SetMask::full(&d)).unwrap() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn perimeter_of_single_cell_and_empty_set() {
        let d = DomainSpec::grid(5, 5, 0.1).build().unwrap();
        let mut e = SetMask::empty(&d);
        assert_eq!(d.weighted_perimeter(&e).unwrap(), 0.0);
        assert_eq!(d.weighted_volume(&e).unwrap(), 0.0);
        e.cells[12] = true;
        assert!((d.weighted_perimeter(&e).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn perimeter_matches_tv_of_indicator() {
        let d = DomainSpec::grid(7, 7, 1.0 / 7.0)
            .with_a(WeightSource::Expr("1 + x*y + sin(3*x)".into()))
            .build()
            .unwrap();
        let mut e = SetMask::empty(&d);
        for j in 2..5 {
            for i in 1..4 {
                e.cells[j * 7 + i] = true;
            }
        }
        let p = d.weighted_perimeter(&e).unwrap();
        let tv = d.weighted_tv(&ScalarField::indicator(&e)).unwrap();
        assert_eq!(p, tv);
    }

    #[test]
    fn volume_hand_sum() {
        // b = 2 on the left column, 1 on the right; Δ = 1/2.
        let d = DomainSpec::grid(2, 2, 0.5)
            .with_b(WeightSource::Grid(vec![2.0, 1.0, 2.0, 1.0]))
            .build()
            .unwrap();
        let v = d.weighted_volume(&SetMask::full(&d)).unwrap();
        assert_eq!(v, (2.0 + 1.0 + 2.0 + 1.0) * 0.25);
    }

    #[test]
    fn coarea_of_nested_indicators() {
        let d = DomainSpec::grid(4, 4, 0.25).build().unwrap();
        let mut u = ScalarField::zeros(&d);
        for j in 0..3 {
            for i in 0..3 {
                u.values[j * 4 + i] = 1.0;
            }
        }
        u.values[5] = 2.0;
        let levels = d.coarea_decompose(&u).unwrap();
        assert_eq!(levels.len(), 2);
        assert_eq!((levels[0].threshold, levels[0].dt), (0.0, 1.0));
        assert_eq!((levels[1].threshold, levels[1].dt), (1.0, 1.0));
        assert_eq!(levels[1].set.count(), 1);
        let sum: f64 = levels
            .iter()
            .map(|l| d.weighted_perimeter(&l.set).unwrap() * l.dt)
            .sum();
        // 3x3 block: perimeter 12 * 0.25 = 3, inner cell: 4 * 0.25 = 1.
        assert_eq!(sum, 4.0);
        assert_eq!(d.weighted_tv(&u).unwrap(), 4.0);
    }

    #[test]
    fn coarea_rejects_negative_fields() {
        let d = interval(3, 1.0);
        let u = ScalarField {
            values: vec![0.0, -1.0, 0.0],
        };
        assert_eq!(d.coarea_decompose(&u).unwrap_err(), Error::NegativeField(1));
    }

    #[test]
    fn crofton_stencil_is_near_euclidean_on_a_disc() {
        let n = 64;
        let d = DomainSpec::grid(n, n, 1.0 / n as f64)
            .with_stencil(Stencil::CroftonC8)
            .build()
            .unwrap();
        let disc = SetMask {
            cells: (0..n * n)
                .map(|c| {
                    let (x, y) = d.center(c);
                    (x - 0.5).powi(2) + (y - 0.5).powi(2) < 0.3 * 0.3
                })
                .collect(),
        };
        let p = d.weighted_perimeter(&disc).unwrap();
        let exact = 2.0 * PI * 0.3;
        assert!((p / exact - 1.0).abs() < 0.06, "p={p}");
        // The L1 perimeter of a disc overshoots by 4/π.
        let l1 = DomainSpec::grid(n, n, 1.0 / n as f64).build().unwrap();
        assert!(l1.weighted_perimeter(&disc).unwrap() > 1.2 * exact);
    }

    #[test]
    fn masked_domain_has_exterior_faces_on_the_hole() {
        let mut mask = vec![true; 9];
        mask[4] = false;
        let d = DomainSpec::grid(3, 3, 1.0).with_mask(mask).build().unwrap();
        let full = SetMask::full(&d);
        // outer ring 12 faces plus 4 around the hole
        assert_eq!(d.weighted_perimeter(&full).unwrap(), 16.0);
    }
}
