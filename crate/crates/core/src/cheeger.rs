//! Exact discrete weighted Cheeger constant.
//!
//! `h = min_E P_a(E) / vol_b(E)` over nonempty sets with positive b-volume.
//! Dinkelbach's iteration reduces the ratio problem to a sequence of
//! parametric problems `min_E P_a(E) − t·vol_b(E)`, each a graph cut.

use std::collections::VecDeque;

use crate::domain::{ScalarField, SetMask, WeightedDomain};
use crate::error::{Error, Result};
use crate::p_eigen::rayleigh_quotient;

/// Residual capacities below this (after scaling to unit maximum) are saturated.
const FLOW_EPS: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Arc {
    to: usize,
    cap: f64,
}

/// Directed network with one node per cell plus a source and a sink.
///
/// Nodes `0..num_cells` are cells; `source()` and `sink()` follow.
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    num_cells: usize,
    arcs: Vec<Arc>,
    adjacency: Vec<Vec<usize>>,
    constant: f64,
}

impl FlowNetwork {
    pub fn new(num_cells: usize) -> Self {
        FlowNetwork {
            num_cells,
            arcs: Vec::new(),
            adjacency: vec![Vec::new(); num_cells + 2],
            constant: 0.0,
        }
    }

    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    pub fn source(&self) -> usize {
        self.num_cells
    }

    pub fn sink(&self) -> usize {
        self.num_cells + 1
    }

    /// Offset such that the modeled set function equals `cut + constant`.
    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// Adds an arc `from → to` with capacity `cap` and its reverse with `rev_cap`.
    pub fn add_edge(&mut self, from: usize, to: usize, cap: f64, rev_cap: f64) {
        assert!(
            cap >= 0.0 && rev_cap >= 0.0 && cap.is_finite() && rev_cap.is_finite(),
            "capacities must be finite and nonnegative"
        );
        let k = self.arcs.len();
        self.arcs.push(Arc { to, cap });
        self.arcs.push(Arc {
            to: from,
            cap: rev_cap,
        });
        self.adjacency[from].push(k);
        self.adjacency[to].push(k + 1);
    }

    /// Capacity of the cut separating `source_side` (cells) plus the source
    /// from the rest.
    pub fn cut_value(&self, source_side: &[bool]) -> f64 {
        let side = |v: usize| {
            if v == self.source() {
                true
            } else if v == self.sink() {
                false
            } else {
                source_side[v]
            }
        };
        let mut total = 0.0;
        for (from, arcs) in self.adjacency.iter().enumerate() {
            for &k in arcs {
                let arc = self.arcs[k];
                if side(from) && !side(arc.to) {
                    total += arc.cap;
                }
            }
        }
        total
    }

    fn max_capacity(&self) -> f64 {
        self.arcs.iter().fold(0.0, |m, a| m.max(a.cap))
    }
}

/// Result of [`min_cut`].
#[derive(Debug, Clone, PartialEq)]
pub struct MinCut {
    pub value: f64,
    /// Cells reachable from the source in the final residual graph: the
    /// minimal source set among all minimum cuts.
    pub source_set: SetMask,
}

/// Exact max-flow / min-cut by Dinic's blocking-flow algorithm.
pub fn min_cut(net: &FlowNetwork) -> MinCut {
    let scale = net.max_capacity();
    if scale <= 0.0 {
        return MinCut {
            value: 0.0,
            source_set: SetMask {
                cells: vec![false; net.num_cells],
            },
        };
    }
    let mut cap: Vec<f64> = net.arcs.iter().map(|a| a.cap / scale).collect();
    let (s, t) = (net.source(), net.sink());
    let n = net.adjacency.len();
    let mut flow = 0.0;
    let mut level = vec![usize::MAX; n];
    let mut next = vec![0usize; n];
    loop {
        bfs_levels(net, &cap, s, &mut level);
        if level[t] == usize::MAX {
            break;
        }
        next.iter_mut().for_each(|x| *x = 0);
        flow += blocking_flow(net, &mut cap, &level, &mut next, s, t);
    }
    bfs_levels(net, &cap, s, &mut level);
    let cells = (0..net.num_cells).map(|v| level[v] != usize::MAX).collect();
    MinCut {
        value: flow * scale,
        source_set: SetMask { cells },
    }
}

fn bfs_levels(net: &FlowNetwork, cap: &[f64], s: usize, level: &mut [usize]) {
    level.iter_mut().for_each(|l| *l = usize::MAX);
    level[s] = 0;
    let mut queue = VecDeque::from([s]);
    while let Some(v) = queue.pop_front() {
        for &k in &net.adjacency[v] {
            let to = net.arcs[k].to;
            if cap[k] > FLOW_EPS && level[to] == usize::MAX {
                level[to] = level[v] + 1;
                queue.push_back(to);
            }
        }
    }
}

/// Saturates every shortest augmenting path of the level graph.
fn blocking_flow(
    net: &FlowNetwork,
    cap: &mut [f64],
    level: &[usize],
    next: &mut [usize],
    s: usize,
    t: usize,
) -> f64 {
    let mut pushed = 0.0;
    let mut path: Vec<usize> = Vec::new();
    let mut dead = vec![false; level.len()];
    let mut v = s;
    loop {
        if v == t {
            let bottleneck = path.iter().map(|&k| cap[k]).fold(f64::INFINITY, f64::min);
            for &k in &path {
                cap[k] -= bottleneck;
                cap[k ^ 1] += bottleneck;
            }
            pushed += bottleneck;
            // Retreat to the tail of the first saturated arc.
            let cut = path.iter().position(|&k| cap[k] <= FLOW_EPS).unwrap_or(0);
            path.truncate(cut);
            v = path.last().map_or(s, |&k| net.arcs[k].to);
            continue;
        }
        let mut advanced = false;
        while next[v] < net.adjacency[v].len() {
            let k = net.adjacency[v][next[v]];
            let to = net.arcs[k].to;
            if cap[k] > FLOW_EPS && !dead[to] && level[to] == level[v] + 1 {
                path.push(k);
                v = to;
                advanced = true;
                break;
            }
            next[v] += 1;
        }
        if advanced {
            continue;
        }
        dead[v] = true;
        match path.pop() {
            Some(k) => {
                v = net.arcs[k ^ 1].to;
                next[v] += 1;
            }
            None => return pushed,
        }
    }
}

/// Network whose cuts model `E ↦ P_a(E) − t·vol_b(E)` up to
/// [`FlowNetwork::constant`], with `E` the source side.
pub fn build_cut_graph(domain: &WeightedDomain, t: f64) -> Result<FlowNetwork> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::NegativeT(t));
    }
    let area = domain.face_area();
    let vol = domain.cell_volume();
    let mut net = FlowNetwork::new(domain.num_cells());
    let mut unary: Vec<f64> = domain.b().iter().map(|b| -t * b * vol).collect();
    for f in domain.faces() {
        let c = f.weight * f.a * area;
        match (f.tail, f.head) {
            (Some(u), Some(v)) => net.add_edge(u, v, c, c),
            (Some(u), None) | (None, Some(u)) => unary[u] += c,
            (None, None) => {}
        }
    }
    let (s, snk) = (net.source(), net.sink());
    for cell in domain.cells() {
        let w = unary[cell];
        if w > 0.0 {
            net.add_edge(cell, snk, w, 0.0);
        } else if w < 0.0 {
            net.add_edge(s, cell, -w, 0.0);
            net.constant += w;
        }
    }
    Ok(net)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheegerMethod {
    Dinkelbach,
    Brute,
}

impl std::fmt::Display for CheegerMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CheegerMethod::Dinkelbach => "dinkelbach",
            CheegerMethod::Brute => "brute",
        })
    }
}

/// One Dinkelbach iterate: the parameter and the minimum of `P − t·vol`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DinkelbachStep {
    pub t: f64,
    pub cut_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheegerSolution {
    pub h: f64,
    pub set: SetMask,
    pub perimeter: f64,
    pub volume: f64,
    pub method: CheegerMethod,
    pub trace: Vec<DinkelbachStep>,
}

impl CheegerSolution {
    /// `P_a(E) − h·vol_b(E)`, zero up to rounding.
    pub fn certificate(&self) -> f64 {
        self.perimeter - self.h * self.volume
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheegerOptions {
    /// Stop once the parametric minimum (in unit-capacity scale) is ≥ −delta.
    pub delta: f64,
    pub max_iters: usize,
}

impl Default for CheegerOptions {
    fn default() -> Self {
        CheegerOptions {
            delta: 1e-12,
            max_iters: 1000,
        }
    }
}

/// Exact discrete Cheeger constant by Dinkelbach iteration over min cuts,
/// starting from the whole domain.
pub fn dinkelbach_cheeger(
    domain: &WeightedDomain,
    opts: &CheegerOptions,
) -> Result<CheegerSolution> {
    let mut set = SetMask::full(domain);
    let mut perimeter = domain.weighted_perimeter(&set)?;
    let mut volume = domain.weighted_volume(&set)?;
    if volume <= 0.0 {
        return Err(Error::ZeroMassB);
    }
    let mut t = perimeter / volume;
    let mut trace = Vec::new();
    for _ in 0..opts.max_iters {
        let net = build_cut_graph(domain, t)?;
        let scale = net.max_capacity().max(f64::MIN_POSITIVE);
        let cut = min_cut(&net);
        let candidate = cut.source_set;
        let (p, v) = if candidate.is_empty() {
            (0.0, 0.0)
        } else {
            (
                domain.weighted_perimeter(&candidate)?,
                domain.weighted_volume(&candidate)?,
            )
        };
        let value = p - t * v;
        trace.push(DinkelbachStep {
            t,
            cut_value: value,
        });
        if value / scale >= -opts.delta || v <= 0.0 {
            break;
        }
        let next = p / v;
        if !(next < t) {
            break;
        }
        t = next;
        set = candidate;
        perimeter = p;
        volume = v;
    }
    Ok(CheegerSolution {
        h: perimeter / volume,
        set,
        perimeter,
        volume,
        method: CheegerMethod::Dinkelbach,
        trace,
    })
}

pub const BRUTE_FORCE_MAX_CELLS: usize = 20;

/// Exhaustive minimum of `P_a(E)/vol_b(E)` over all subsets with positive
/// volume. Ties go to the smaller set, then to the lexicographically
/// smaller mask.
pub fn brute_force_cheeger(domain: &WeightedDomain) -> Result<CheegerSolution> {
    let cells: Vec<usize> = domain.cells().collect();
    let m = cells.len();
    if m > BRUTE_FORCE_MAX_CELLS {
        return Err(Error::TooLarge {
            cells: m,
            max: BRUTE_FORCE_MAX_CELLS,
        });
    }
    let area = domain.face_area();
    let vol = domain.cell_volume();
    let mut local = vec![usize::MAX; domain.num_cells()];
    for (k, &c) in cells.iter().enumerate() {
        local[c] = k;
    }
    // Incident faces of each cell as (other endpoint, face capacity).
    let mut incident: Vec<Vec<(Option<usize>, f64)>> = vec![Vec::new(); m];
    for f in domain.faces() {
        let c = f.weight * f.a * area;
        let t = f.tail.map(|x| local[x]);
        let h = f.head.map(|x| local[x]);
        if let Some(t) = t {
            incident[t].push((h, c));
        }
        if let Some(h) = h {
            incident[h].push((t, c));
        }
    }
    let mass: Vec<f64> = cells.iter().map(|&c| domain.b()[c] * vol).collect();

    // Walk all subsets in Gray-code order, updating P and vol incrementally.
    let mut inside = vec![false; m];
    let (mut p, mut v) = (0.0f64, 0.0f64);
    let mut best: Option<(f64, u32)> = None;
    for step in 1u64..(1u64 << m) {
        let k = step.trailing_zeros() as usize;
        for &(other, c) in &incident[k] {
            let other_in = other.is_some_and(|o| inside[o]);
            if inside[k] == other_in {
                p += c;
            } else {
                p -= c;
            }
        }
        if inside[k] {
            v -= mass[k];
        } else {
            v += mass[k];
        }
        inside[k] = !inside[k];
        if v <= 0.0 || !inside.iter().any(|&x| x) {
            continue;
        }
        let ratio = p / v;
        let gray = (step ^ (step >> 1)) as u32;
        best = Some(match best {
            None => (ratio, gray),
            Some((r, g)) => {
                let tie = (ratio - r).abs() <= 1e-12 * r.abs().max(ratio.abs());
                if (tie && prefer(gray, g, m)) || (!tie && ratio < r) {
                    (ratio, gray)
                } else {
                    (r, g)
                }
            }
        });
    }
    let (_, bits) = best.ok_or(Error::ZeroMassB)?;
    let mut set = SetMask::empty(domain);
    for (k, &c) in cells.iter().enumerate() {
        set.cells[c] = bits >> k & 1 == 1;
    }
    let perimeter = domain.weighted_perimeter(&set)?;
    let volume = domain.weighted_volume(&set)?;
    Ok(CheegerSolution {
        h: perimeter / volume,
        set,
        perimeter,
        volume,
        method: CheegerMethod::Brute,
        trace: Vec::new(),
    })
}

/// Tie-break: fewer cells first, then lexicographic order of the mask read
/// in cell order (`false < true`).
fn prefer(a: u32, b: u32, m: usize) -> bool {
    if a.count_ones() != b.count_ones() {
        return a.count_ones() < b.count_ones();
    }
    for k in 0..m {
        let (x, y) = (a >> k & 1, b >> k & 1);
        if x != y {
            return x < y;
        }
    }
    false
}

/// Ramp equal to 1 on `set`, decaying linearly to 0 over distance `eps`
/// from the set (distances between cell centers).
pub fn layer_ramp(domain: &WeightedDomain, set: &SetMask, eps: f64) -> ScalarField {
    let members: Vec<(f64, f64)> = domain
        .cells()
        .filter(|&c| set.cells[c])
        .map(|c| domain.center(c))
        .collect();
    ScalarField::from_fn(domain, |x, y| {
        let d2 = members
            .iter()
            .map(|&(mx, my)| (x - mx).powi(2) + (y - my).powi(2))
            .fold(f64::INFINITY, f64::min);
        (1.0 - d2.sqrt() / eps).max(0.0)
    })
}

/// Rayleigh quotient at `p = 1` of the ε-layer ramp around an interior set:
/// an upper bound for the smooth Cheeger constant up to `O(eps)`.
pub fn sigma_upper_bound(domain: &WeightedDomain, set: &SetMask, eps: f64) -> Result<f64> {
    domain.check_set(set)?;
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    if domain.touches_boundary(set) {
        return Err(Error::TouchesBoundary);
    }
    if !(eps >= domain.spacing() * (1.0 - 1e-12)) {
        return Err(Error::LayerTooThin {
            eps,
            spacing: domain.spacing(),
        });
    }
    rayleigh_quotient(domain, &layer_ramp(domain, set, eps), 1.0)
}

/// Cells at stencil distance at least `depth` from the exterior.
pub fn eroded_set(domain: &WeightedDomain, depth: usize) -> SetMask {
    let mut set = SetMask::full(domain);
    for _ in 0..depth {
        let mut next = set.clone();
        for f in domain.faces() {
            let tail_in = f.tail.is_some_and(|c| set.cells[c]);
            let head_in = f.head.is_some_and(|c| set.cells[c]);
            if tail_in != head_in {
                if let Some(c) = f.tail.filter(|_| tail_in) {
                    next.cells[c] = false;
                }
                if let Some(c) = f.head.filter(|_| head_in) {
                    next.cells[c] = false;
                }
            }
        }
        set = next;
    }
    set
}

/// Replaces `a` by its `k`-Lipschitz lower envelope
/// `a_k(x) = min_y a(y) + k·|x − y|` over the cells of the domain.
pub fn lipschitz_monotone_approx(domain: &WeightedDomain, k: u32) -> Result<WeightedDomain> {
    let cells: Vec<(usize, (f64, f64))> = domain.cells().map(|c| (c, domain.center(c))).collect();
    let k = k as f64;
    let a = domain.a();
    let mut ak = a.to_vec();
    for &(c, (x, y)) in &cells {
        ak[c] = cells
            .iter()
            .map(|&(o, (ox, oy))| a[o] + k * ((x - ox).powi(2) + (y - oy).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min);
    }
    domain.with_weights(ak, domain.b().to_vec(), Some(domain.mu()))
}
