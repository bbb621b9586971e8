//! Masked Cartesian grids on rectangles and discs.
//!
//! Unknown nodes are lattice points inside the domain, numbered row by row.
//! Boundary nodes sit on ∂Ω: lattice points of a rectangle's edges, or the
//! points where a lattice arm (axis or diagonal) from an interior node crosses a
//! circle. Lattice points closer than `MIN_GAP·h` to the circle are left out,
//! and arms through them run on to the circle, so no arm is shorter than about
//! 0.14h and stencil weights stay O(1/h²). Every interior node gets a
//! precomputed stencil for (D_x, D_y, D_xx, D_xy, D_yy) from the quadratic
//! through the node and its two arm ends on each lattice line, with
//! D_xy = (D_ξξ − D_ηη)/2 along the diagonals.

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec::Vec;

use libm::{atan2, ceil, floor, round, sqrt};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::symcore::SymMat;

pub type Point = [f64; 2];

pub const DX: usize = 0;
pub const DY: usize = 1;
pub const DXX: usize = 2;
pub const DXY: usize = 3;
pub const DYY: usize = 4;

/// Lattice points within this many h of a circle are not grid nodes.
pub const MIN_GAP: f64 = 0.2;
/// Radius (in units of h) of the neighbourhood used for boundary fits.
const FIT_RADIUS: f64 = 2.5;

/// Scalar field on the plane with optional analytic derivatives.
pub trait Field: Send + Sync {
    fn value(&self, x: &Point) -> f64;

    fn gradient(&self, x: &Point) -> Point {
        let h = 1e-6 * (1.0 + x[0].abs().max(x[1].abs()));
        let gx = (self.value(&[x[0] + h, x[1]]) - self.value(&[x[0] - h, x[1]])) / (2.0 * h);
        let gy = (self.value(&[x[0], x[1] + h]) - self.value(&[x[0], x[1] - h])) / (2.0 * h);
        [gx, gy]
    }

    fn hessian(&self, x: &Point) -> SymMat {
        let h = 1e-4 * (1.0 + x[0].abs().max(x[1].abs()));
        let f = |dx: f64, dy: f64| self.value(&[x[0] + dx, x[1] + dy]);
        let f0 = f(0.0, 0.0);
        let fxx = (f(h, 0.0) - 2.0 * f0 + f(-h, 0.0)) / (h * h);
        let fyy = (f(0.0, h) - 2.0 * f0 + f(0.0, -h)) / (h * h);
        let fxy = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
        SymMat::from_upper(2, &[fxx, fxy, fyy]).unwrap_or_else(|_| SymMat::zeros(2))
    }
}

/// Wraps a closure as a [`Field`] with finite-difference derivatives.
pub struct FnField<F>(pub F);

impl<F: Fn(&Point) -> f64 + Send + Sync> Field for FnField<F> {
    fn value(&self, x: &Point) -> f64 {
        (self.0)(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainKind {
    Rectangle { x0: f64, x1: f64, y0: f64, y1: f64 },
    Disc { center: Point, radius: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub h: f64,
}

impl DomainSpec {
    pub fn rectangle(x0: f64, x1: f64, y0: f64, y1: f64, h: f64) -> Result<Self> {
        let d = DomainSpec { kind: DomainKind::Rectangle { x0, x1, y0, y1 }, h };
        d.validate()?;
        Ok(d)
    }

    pub fn disc(center: Point, radius: f64, h: f64) -> Result<Self> {
        let d = DomainSpec { kind: DomainKind::Disc { center, radius }, h };
        d.validate()?;
        Ok(d)
    }

    pub fn with_h(&self, h: f64) -> Result<Self> {
        let d = DomainSpec { kind: self.kind, h };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.h;
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidDomain(alloc::format!("grid spacing h = {h} must be positive")));
        }
        match self.kind {
            DomainKind::Rectangle { x0, x1, y0, y1 } => {
                if !(x1 > x0 && y1 > y0) {
                    return Err(Error::InvalidDomain("rectangle must have x1 > x0 and y1 > y0".into()));
                }
                for len in [x1 - x0, y1 - y0] {
                    let cells = len / h;
                    if (cells - round(cells)).abs() > 1e-9 * cells.max(1.0) || round(cells) < 2.0 {
                        return Err(Error::InvalidDomain(alloc::format!("rectangle side {len} is not a multiple (≥ 2) of h = {h}")));
                    }
                }
            }
            DomainKind::Disc { radius, center } => {
                if !center[0].is_finite() || !center[1].is_finite() {
                    return Err(Error::InvalidDomain("disc center must be finite".into()));
                }
                if !(radius >= 8.0 * h) {
                    return Err(Error::InvalidDomain(alloc::format!("disc radius {radius} must be ≥ 8h = {}", 8.0 * h)));
                }
            }
        }
        Ok(())
    }

    pub fn has_corners(&self) -> bool {
        matches!(self.kind, DomainKind::Rectangle { .. })
    }

    /// Negative inside, zero on ∂Ω.
    pub fn signed_distance(&self, p: &Point) -> f64 {
        match self.kind {
            DomainKind::Disc { center, radius } => dist(p, &center) - radius,
            DomainKind::Rectangle { x0, x1, y0, y1 } => {
                let dx = (x0 - p[0]).max(p[0] - x1);
                let dy = (y0 - p[1]).max(p[1] - y1);
                if dx <= 0.0 && dy <= 0.0 {
                    dx.max(dy)
                } else {
                    sqrt(dx.max(0.0) * dx.max(0.0) + dy.max(0.0) * dy.max(0.0))
                }
            }
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.signed_distance(p) <= 0.0
    }

    /// Unit gradient of the signed distance: the outward normal on ∂Ω, extended
    /// inward. The disc center uses e₁; points equidistant from two rectangle
    /// edges take the first edge in the order left, right, bottom, top.
    pub fn gamma_extension(&self, p: &Point) -> Point {
        match self.kind {
            DomainKind::Disc { center, .. } => {
                let r = dist(p, &center);
                if r == 0.0 {
                    [1.0, 0.0]
                } else {
                    [(p[0] - center[0]) / r, (p[1] - center[1]) / r]
                }
            }
            DomainKind::Rectangle { x0, x1, y0, y1 } => {
                let cands = [(p[0] - x0, [-1.0, 0.0]), (x1 - p[0], [1.0, 0.0]), (p[1] - y0, [0.0, -1.0]), (y1 - p[1], [0.0, 1.0])];
                let mut best = cands[0];
                for c in &cands[1..] {
                    if c.0 < best.0 {
                        best = *c;
                    }
                }
                best.1
            }
        }
    }

    /// [(x_min, x_max), (y_min, y_max)]
    pub fn bounding_box(&self) -> [(f64, f64); 2] {
        match self.kind {
            DomainKind::Disc { center, radius } => [(center[0] - radius, center[0] + radius), (center[1] - radius, center[1] + radius)],
            DomainKind::Rectangle { x0, x1, y0, y1 } => [(x0, x1), (y0, y1)],
        }
    }
}

fn dist(a: &Point, b: &Point) -> f64 {
    let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
    sqrt(dx * dx + dy * dy)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeClass {
    Interior,
    BoundaryAdjacent,
    Boundary,
    Exterior,
}

impl NodeClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            NodeClass::Interior => "interior",
            NodeClass::BoundaryAdjacent => "boundary_adjacent",
            NodeClass::Boundary => "boundary",
            NodeClass::Exterior => "exterior",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node {
    pub pos: Point,
    pub class: NodeClass,
}

/// Geometry attached to a boundary node. Rectangle corners have no normal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundaryGeometry {
    pub normal: Option<Point>,
    pub tangent: Option<Point>,
    pub curvature: f64,
    pub corner: bool,
    /// Position along ∂Ω (angle on a disc, perimeter coordinate on a rectangle).
    pub param: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stencil {
    /// (node, [w_x, w_y, w_xx, w_xy, w_yy]), sorted by node.
    pub terms: Vec<(usize, [f64; 5])>,
}

impl Stencil {
    pub fn apply(&self, values: &[f64]) -> [f64; 5] {
        let mut out = [0.0; 5];
        for (j, w) in &self.terms {
            let v = values[*j];
            for k in 0..5 {
                out[k] += w[k] * v;
            }
        }
        out
    }
}

/// Derivatives at a point from a local least-squares quadratic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalFit {
    pub value: f64,
    pub gradient: Point,
    pub hessian: SymMat,
}

pub struct Grid {
    domain: DomainSpec,
    nodes: Vec<Node>,
    n_unknowns: usize,
    stencils: Vec<Stencil>,
    boundary: Vec<BoundaryGeometry>,
    ring: Vec<usize>,
    ring_pos: Vec<usize>,
    cells: BTreeMap<(i64, i64), Vec<usize>>,
    lattice: BTreeMap<(i64, i64), usize>,
    origin: Point,
}

impl core::fmt::Debug for Grid {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Grid").field("domain", &self.domain).field("nodes", &self.nodes.len()).field("unknowns", &self.n_unknowns).finish()
    }
}

#[derive(Clone, Copy)]
struct Arm {
    node: usize,
    dist: f64,
    full: bool,
}

impl Grid {
    pub fn new(domain: DomainSpec) -> Result<Grid> {
        domain.validate()?;
        match domain.kind {
            DomainKind::Rectangle { .. } => Self::build_rectangle(domain),
            DomainKind::Disc { .. } => Self::build_disc(domain),
        }
    }

    fn empty(domain: DomainSpec, origin: Point) -> Grid {
        Grid {
            domain,
            nodes: Vec::new(),
            n_unknowns: 0,
            stencils: Vec::new(),
            boundary: Vec::new(),
            ring: Vec::new(),
            ring_pos: Vec::new(),
            cells: BTreeMap::new(),
            lattice: BTreeMap::new(),
            origin,
        }
    }

    fn build_rectangle(domain: DomainSpec) -> Result<Grid> {
        let DomainKind::Rectangle { x0, x1, y0, y1 } = domain.kind else { unreachable!() };
        let h = domain.h;
        let nx = round((x1 - x0) / h) as i64;
        let ny = round((y1 - y0) / h) as i64;
        let mut g = Grid::empty(domain, [x0, y0]);
        let at = |i: i64, j: i64| [x0 + i as f64 * h, y0 + j as f64 * h];
        for j in 1..ny {
            for i in 1..nx {
                g.lattice.insert((i, j), g.nodes.len());
                g.nodes.push(Node { pos: at(i, j), class: NodeClass::Interior });
            }
        }
        g.n_unknowns = g.nodes.len();
        // Boundary walked counterclockwise from (x0, y0).
        let mut walk = Vec::new();
        walk.extend((0..nx).map(|i| (i, 0)));
        walk.extend((0..ny).map(|j| (nx, j)));
        walk.extend((0..nx).map(|i| (nx - i, ny)));
        walk.extend((0..ny).map(|j| (0, ny - j)));
        let perim = 2.0 * ((x1 - x0) + (y1 - y0));
        for (k, &(i, j)) in walk.iter().enumerate() {
            let corner = (i == 0 || i == nx) && (j == 0 || j == ny);
            let normal = if corner {
                None
            } else if i == 0 {
                Some([-1.0, 0.0])
            } else if i == nx {
                Some([1.0, 0.0])
            } else if j == 0 {
                Some([0.0, -1.0])
            } else {
                Some([0.0, 1.0])
            };
            let tangent = normal.map(|n: Point| [-n[1], n[0]]);
            g.lattice.insert((i, j), g.nodes.len());
            g.nodes.push(Node { pos: at(i, j), class: NodeClass::Boundary });
            g.boundary.push(BoundaryGeometry { normal, tangent, curvature: 0.0, corner, param: perim * k as f64 / walk.len() as f64 });
        }
        g.ring = (g.n_unknowns..g.nodes.len()).collect();
        g.finish(|g, p, d| {
            let key = (p.0 + d.0, p.1 + d.1);
            let node = g.lattice[&key];
            Arm { node, dist: h * sqrt((d.0 * d.0 + d.1 * d.1) as f64), full: node < g.n_unknowns }
        })
    }

    fn build_disc(domain: DomainSpec) -> Result<Grid> {
        let DomainKind::Disc { center, radius } = domain.kind else { unreachable!() };
        let h = domain.h;
        let m = ceil(radius / h) as i64 + 1;
        let mut g = Grid::empty(domain, center);
        let at = |i: i64, j: i64| [center[0] + i as f64 * h, center[1] + j as f64 * h];
        for j in -m..=m {
            for i in -m..=m {
                let p = at(i, j);
                if radius - dist(&p, &center) >= MIN_GAP * h {
                    g.lattice.insert((i, j), g.nodes.len());
                    g.nodes.push(Node { pos: p, class: NodeClass::Interior });
                }
            }
        }
        g.n_unknowns = g.nodes.len();
        let mut dedup: BTreeMap<(i64, i64), usize> = BTreeMap::new();
        let mut arms: Vec<[Option<Arm>; 8]> = alloc::vec![[None; 8]; g.n_unknowns];
        let keys: Vec<((i64, i64), usize)> = g.lattice.iter().map(|(k, v)| (*k, *v)).collect();
        for (key, idx) in keys {
            for (a, d) in DIRS.iter().enumerate() {
                let q = (key.0 + d.0, key.1 + d.1);
                let len = h * sqrt((d.0 * d.0 + d.1 * d.1) as f64);
                if let Some(&node) = g.lattice.get(&q) {
                    arms[idx][a] = Some(Arm { node, dist: len, full: true });
                    continue;
                }
                let p = g.nodes[idx].pos;
                let v = [d.0 as f64 * h, d.1 as f64 * h];
                let w = [p[0] - center[0], p[1] - center[1]];
                let qa = v[0] * v[0] + v[1] * v[1];
                let qb = 2.0 * (w[0] * v[0] + w[1] * v[1]);
                let qc = w[0] * w[0] + w[1] * w[1] - radius * radius;
                let disc = sqrt((qb * qb - 4.0 * qa * qc).max(0.0));
                let s = if qb >= 0.0 { qc / (-0.5 * (qb + disc)) } else { -0.5 * (qb - disc) / qa };
                let s = s.max(0.0);
                let raw = [w[0] + s * v[0], w[1] + s * v[1]];
                let r = sqrt(raw[0] * raw[0] + raw[1] * raw[1]);
                let gamma = [raw[0] / r, raw[1] / r];
                let b = [center[0] + radius * gamma[0], center[1] + radius * gamma[1]];
                let bkey = (round(gamma[0] * radius / h * 1e8) as i64, round(gamma[1] * radius / h * 1e8) as i64);
                let node = *dedup.entry(bkey).or_insert_with(|| {
                    g.nodes.push(Node { pos: b, class: NodeClass::Boundary });
                    g.boundary.push(BoundaryGeometry {
                        normal: Some(gamma),
                        tangent: Some([-gamma[1], gamma[0]]),
                        curvature: 1.0 / radius,
                        corner: false,
                        param: atan2(gamma[1], gamma[0]),
                    });
                    g.nodes.len() - 1
                });
                arms[idx][a] = Some(Arm { node, dist: s * len, full: false });
            }
        }
        let mut ring: Vec<usize> = (g.n_unknowns..g.nodes.len()).collect();
        ring.sort_by(|&a, &b| {
            let (pa, pb) = (g.boundary[a - g.n_unknowns].param, g.boundary[b - g.n_unknowns].param);
            pa.total_cmp(&pb).then(a.cmp(&b))
        });
        g.ring = ring;
        let arms = arms;
        g.finish(move |g, p, d| {
            let a = DIRS.iter().position(|x| *x == d).unwrap();
            arms[g.lattice[&p]][a].unwrap()
        })
    }

    /// Builds stencils, classes, the ring index and the spatial hash.
    fn finish(mut self, arm: impl Fn(&Grid, (i64, i64), (i64, i64)) -> Arm) -> Result<Grid> {
        let mut stencils = Vec::with_capacity(self.n_unknowns);
        let mut adjacent = alloc::vec![false; self.n_unknowns];
        let keys: Vec<((i64, i64), usize)> = self.lattice.iter().filter(|(_, v)| **v < self.n_unknowns).map(|(k, v)| (*k, *v)).collect();
        let mut by_node: Vec<(i64, i64)> = alloc::vec![(0, 0); self.n_unknowns];
        for (k, v) in &keys {
            by_node[*v] = *k;
        }
        for (idx, key) in by_node.iter().enumerate() {
            let mut terms: BTreeMap<usize, [f64; 5]> = BTreeMap::new();
            let mut add = |node: usize, slot: usize, w: f64| {
                terms.entry(node).or_insert([0.0; 5])[slot] += w;
            };
            for (line, d) in LINES.iter().enumerate() {
                let plus = arm(&self, *key, *d);
                let minus = arm(&self, *key, (-d.0, -d.1));
                if !plus.full || !minus.full {
                    adjacent[idx] = true;
                }
                let pts = [(plus.dist, plus.node), (0.0, idx), (-minus.dist, minus.node)];
                let (w1, w2) = line_weights(&pts);
                for k in 0..3 {
                    let node = pts[k].1;
                    match line {
                        0 => {
                            add(node, DX, w1[k]);
                            add(node, DXX, w2[k]);
                        }
                        1 => {
                            add(node, DY, w1[k]);
                            add(node, DYY, w2[k]);
                        }
                        2 => add(node, DXY, 0.5 * w2[k]),
                        _ => add(node, DXY, -0.5 * w2[k]),
                    }
                }
            }
            stencils.push(Stencil { terms: terms.into_iter().collect() });
        }
        for (i, adj) in adjacent.iter().enumerate() {
            if *adj {
                self.nodes[i].class = NodeClass::BoundaryAdjacent;
            }
        }
        self.stencils = stencils;
        self.ring_pos = alloc::vec![0; self.boundary.len()];
        for (k, &b) in self.ring.iter().enumerate() {
            self.ring_pos[b - self.n_unknowns] = k;
        }
        for (i, node) in self.nodes.iter().enumerate() {
            let c = self.cell_of(&node.pos);
            self.cells.entry(c).or_default().push(i);
        }
        Ok(self)
    }

    fn cell_of(&self, p: &Point) -> (i64, i64) {
        let h = self.domain.h;
        (floor((p[0] - self.origin[0]) / h) as i64, floor((p[1] - self.origin[1]) / h) as i64)
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn h(&self) -> f64 {
        self.domain.h
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes `0..n_unknowns()` are interior (including boundary-adjacent).
    pub fn n_unknowns(&self) -> usize {
        self.n_unknowns
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        i >= self.n_unknowns
    }

    pub fn stencil(&self, i: usize) -> Option<&Stencil> {
        self.stencils.get(i)
    }

    pub fn boundary_geometry(&self, i: usize) -> Option<&BoundaryGeometry> {
        i.checked_sub(self.n_unknowns).and_then(|k| self.boundary.get(k))
    }

    /// Boundary node indices in order along ∂Ω.
    pub fn boundary_ring(&self) -> &[usize] {
        &self.ring
    }

    /// Class of an arbitrary lattice point relative to this grid.
    pub fn lattice_class(&self, i: i64, j: i64) -> NodeClass {
        match self.lattice.get(&(i, j)) {
            Some(&n) => self.nodes[n].class,
            None => NodeClass::Exterior,
        }
    }

    /// Extended outward normal at any node (γ on ∂Ω, ∇ signed distance inside).
    pub fn gamma(&self, i: usize) -> Point {
        match self.boundary_geometry(i).and_then(|b| b.normal) {
            Some(n) => n,
            None => self.domain.gamma_extension(&self.nodes[i].pos),
        }
    }

    fn derivs(&self, values: &[f64], i: usize) -> Result<[f64; 5]> {
        let st = self.stencils.get(i).ok_or(Error::DiscretizationError { node: i, reason: "no interior stencil at a boundary node" })?;
        let d = st.apply(values);
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::DiscretizationError { node: i, reason: "non-finite derivative" });
        }
        Ok(d)
    }

    pub fn gradient(&self, values: &[f64], i: usize) -> Result<Point> {
        let d = self.derivs(values, i)?;
        Ok([d[DX], d[DY]])
    }

    pub fn hessian(&self, values: &[f64], i: usize) -> Result<SymMat> {
        let d = self.derivs(values, i)?;
        Ok(SymMat::from_upper(2, &[d[DXX], d[DXY], d[DYY]]).expect("finite"))
    }

    pub fn gradient_hessian(&self, values: &[f64], i: usize) -> Result<(Point, SymMat)> {
        let d = self.derivs(values, i)?;
        Ok(([d[DX], d[DY]], SymMat::from_upper(2, &[d[DXX], d[DXY], d[DYY]]).expect("finite")))
    }

    /// Least-squares quadratic through the nodes within `FIT_RADIUS·h` of
    /// boundary node `i`, differentiated at the node.
    pub fn boundary_fit(&self, values: &[f64], i: usize) -> Result<LocalFit> {
        let geo = self.boundary_geometry(i).ok_or(Error::DiscretizationError { node: i, reason: "not a boundary node" })?;
        if geo.corner {
            return Err(Error::DiscretizationError { node: i, reason: "corner node has no normal" });
        }
        let h = self.domain.h;
        let c = self.nodes[i].pos;
        let (ci, cj) = self.cell_of(&c);
        let reach = ceil(FIT_RADIUS) as i64 + 1;
        let mut ata = [[0.0; 6]; 6];
        let mut atb = [0.0; 6];
        let mut count = 0;
        for dj in -reach..=reach {
            for di in -reach..=reach {
                let Some(list) = self.cells.get(&(ci + di, cj + dj)) else { continue };
                for &k in list {
                    let p = self.nodes[k].pos;
                    let (x, y) = ((p[0] - c[0]) / h, (p[1] - c[1]) / h);
                    if x * x + y * y > FIT_RADIUS * FIT_RADIUS {
                        continue;
                    }
                    let row = [1.0, x, y, 0.5 * x * x, x * y, 0.5 * y * y];
                    for a in 0..6 {
                        atb[a] += row[a] * values[k];
                        for b in 0..6 {
                            ata[a][b] += row[a] * row[b];
                        }
                    }
                    count += 1;
                }
            }
        }
        if count < 8 {
            return Err(Error::DiscretizationError { node: i, reason: "too few nodes for a boundary fit" });
        }
        let coef = solve_dense::<6>(ata, atb).ok_or(Error::DiscretizationError { node: i, reason: "singular boundary fit" })?;
        Ok(LocalFit {
            value: coef[0],
            gradient: [coef[1] / h, coef[2] / h],
            hessian: SymMat::from_upper(2, &[coef[3] / (h * h), coef[4] / (h * h), coef[5] / (h * h)])
                .map_err(|_| Error::DiscretizationError { node: i, reason: "non-finite derivative" })?,
        })
    }

    pub fn boundary_normal_derivative(&self, values: &[f64], i: usize) -> Result<f64> {
        let fit = self.boundary_fit(values, i)?;
        let n = self.boundary_geometry(i).and_then(|b| b.normal).expect("checked by boundary_fit");
        Ok(fit.gradient[0] * n[0] + fit.gradient[1] * n[1])
    }

    /// Du − (γ·Du)γ. On boundary nodes Du·τ is the derivative of the trace
    /// along ∂Ω (three ring points at least h/4 apart).
    pub fn tangential_gradient(&self, values: &[f64], i: usize) -> Result<Point> {
        if let Some(geo) = self.boundary_geometry(i) {
            let tau = geo.tangent.ok_or(Error::DiscretizationError { node: i, reason: "corner node has no tangent" })?;
            let ds = self.trace_derivative(values, i)?;
            return Ok([ds * tau[0], ds * tau[1]]);
        }
        let g = self.gamma(i);
        let du = self.gradient(values, i)?;
        let c = g[0] * du[0] + g[1] * du[1];
        Ok([du[0] - c * g[0], du[1] - c * g[1]])
    }

    /// d/ds of the boundary trace at boundary node `i`, s = arclength in the
    /// counterclockwise direction.
    pub fn trace_derivative(&self, values: &[f64], i: usize) -> Result<f64> {
        let k = self.ring_pos[i - self.n_unknowns];
        let m = self.ring.len();
        let min_gap = 0.25 * self.domain.h;
        let mut fwd = None;
        for step in 1..m / 2 {
            let j = self.ring[(k + step) % m];
            let s = self.arclength_between(i, j);
            if s >= min_gap {
                fwd = Some((s, j));
                break;
            }
        }
        let mut back = None;
        for step in 1..m / 2 {
            let j = self.ring[(k + m - step) % m];
            let s = self.arclength_between(i, j);
            if s >= min_gap {
                back = Some((-s, j));
                break;
            }
        }
        let (Some(f), Some(b)) = (fwd, back) else {
            return Err(Error::DiscretizationError { node: i, reason: "boundary ring too short" });
        };
        let (w1, _) = line_weights(&[(f.0, f.1), (0.0, i), (b.0, b.1)]);
        Ok(w1[0] * values[f.1] + w1[1] * values[i] + w1[2] * values[b.1])
    }

    /// Unsigned arclength between two boundary nodes along the shorter way.
    fn arclength_between(&self, a: usize, b: usize) -> f64 {
        let (pa, pb) = (&self.nodes[a].pos, &self.nodes[b].pos);
        match self.domain.kind {
            DomainKind::Disc { radius, .. } => {
                let ga = self.boundary[a - self.n_unknowns].param;
                let gb = self.boundary[b - self.n_unknowns].param;
                let mut d = (ga - gb).abs();
                if d > core::f64::consts::PI {
                    d = 2.0 * core::f64::consts::PI - d;
                }
                radius * d
            }
            DomainKind::Rectangle { .. } => (pa[0] - pb[0]).abs() + (pa[1] - pb[1]).abs(),
        }
    }
}

/// Lattice steps of the eight arms, in the order +x, −x, +y, −y, and diagonals.
const DIRS: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1)];
/// One direction per lattice line: x, y, (1,1), (1,−1).
const LINES: [(i64, i64); 4] = [(1, 0), (0, 1), (1, 1), (1, -1)];

/// First- and second-derivative weights at offset 0 of the quadratic through
/// three points with distinct offsets along a line.
fn line_weights(pts: &[(f64, usize); 3]) -> ([f64; 3], [f64; 3]) {
    let mut w1 = [0.0; 3];
    let mut w2 = [0.0; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        let (si, sj, sk) = (pts[i].0, pts[j].0, pts[k].0);
        let den = (si - sj) * (si - sk);
        w1[i] = -(sj + sk) / den;
        w2[i] = 2.0 / den;
    }
    (w1, w2)
}

/// Gaussian elimination with partial pivoting; None if singular.
pub(crate) fn solve_dense<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> Option<[f64; N]> {
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for col in 0..N {
        let mut piv = col;
        for r in col + 1..N {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        if a[piv][col].abs() <= 1e-13 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..N {
            let f = a[r][col] / a[col][col];
            for c in col..N {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; N];
    for r in (0..N).rev() {
        let s: f64 = (r + 1..N).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Scalar values on the nodes of a grid.
#[derive(Clone, Debug)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(alloc::format!("{} values for a grid of {} nodes", values.len(), grid.len())));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&Point) -> f64) -> Self {
        let values = grid.nodes().iter().map(|n| f(&n.pos)).collect();
        GridFunction { grid, values }
    }

    pub fn sample(grid: Arc<Grid>, field: &dyn Field) -> Self {
        Self::from_fn(grid, |p| field.value(p))
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

pub fn fd_gradient(f: &GridFunction, node: usize) -> Result<Point> {
    f.grid.gradient(&f.values, node)
}

pub fn fd_hessian(f: &GridFunction, node: usize) -> Result<SymMat> {
    f.grid.hessian(&f.values, node)
}

pub fn boundary_normal_derivative(f: &GridFunction, node: usize) -> Result<f64> {
    f.grid.boundary_normal_derivative(&f.values, node)
}

pub fn tangential_gradient(f: &GridFunction, node: usize) -> Result<Point> {
    f.grid.tangential_gradient(&f.values, node)
}
