//! Explicit finite hulls of tree-embeddable metrics.
//!
//! A [`ForestHull`] is a weighted forest whose first `n` vertices are the
//! generators (in input order) and whose remaining vertices are branch points.
//! Points of the hull are addressed by [`PointRef`]: a vertex, or an offset
//! strictly inside an edge measured from the edge's lower-numbered endpoint.

mod amalgam;
mod build;
mod random;
mod region;

pub use amalgam::{free_amalgam, Amalgam};
pub use build::build_hull;
pub use random::random_forest;
pub use region::{hull_intersection, SubHull};

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::{ExtDist, FiniteMetric, MetricError};
use crate::rational::Rat;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HullError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("metric is not tree-embeddable; 4-point condition fails on {0:?}")]
    NotTreeEmbeddable([usize; 4]),
    #[error("dangling point reference {0}")]
    DanglingRef(PointRef),
    #[error("points are at infinite distance")]
    InfiniteDistance,
    #[error("interpolation parameter {0} outside [0, 1]")]
    ParameterOutOfRange(Rat),
    #[error("no point of the sub-hull is at finite distance")]
    Unreachable,
    #[error("invalid forest: {0}")]
    NotAForest(String),
    #[error("base embeddings are not isometric at tuple entries ({0}, {1})")]
    NonIsometricBase(usize, usize),
    #[error("truncation bound must be positive, got {0}")]
    NonPositiveBound(Rat),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexKind {
    Generator,
    Steiner,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub len: Rat,
}

/// Address of a point on a hull.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointRef {
    Vertex { vertex: usize },
    Edge { edge: usize, offset: Rat },
}

impl PointRef {
    pub fn v(vertex: usize) -> Self {
        PointRef::Vertex { vertex }
    }

    pub fn on_edge(edge: usize, offset: Rat) -> Self {
        PointRef::Edge { edge, offset }
    }
}

impl fmt::Display for PointRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PointRef::Vertex { vertex } => write!(f, "v{vertex}"),
            PointRef::Edge { edge, offset } => write!(f, "e{edge}@{offset}"),
        }
    }
}

impl fmt::Debug for PointRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Canonical weighted forest. Immutable once built.
#[derive(Clone, PartialEq, Eq)]
pub struct ForestHull {
    labels: Vec<String>,
    n_vertices: usize,
    edges: Vec<Edge>,
    adj: Vec<Vec<(usize, usize)>>,
    component: Vec<usize>,
    vdist: Vec<Vec<ExtDist>>,
}

impl fmt::Debug for ForestHull {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ForestHull")
            .field("labels", &self.labels)
            .field("n_vertices", &self.n_vertices)
            .field("edges", &self.edges)
            .finish()
    }
}

impl ForestHull {
    /// Assembles a hull from already-canonical parts. Callers go through
    /// [`ForestHull::from_tree`] or [`build_hull`].
    fn assemble(labels: Vec<String>, n_vertices: usize, edges: Vec<Edge>) -> Self {
        let mut adj = vec![Vec::new(); n_vertices];
        for (i, e) in edges.iter().enumerate() {
            adj[e.a].push((e.b, i));
            adj[e.b].push((e.a, i));
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        let mut component = vec![usize::MAX; n_vertices];
        let mut next = 0;
        // Generators come first, so components are numbered by smallest generator.
        for start in 0..n_vertices {
            if component[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            component[start] = next;
            while let Some(u) = stack.pop() {
                for &(v, _) in &adj[u] {
                    if component[v] == usize::MAX {
                        component[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        let mut vdist = vec![vec![ExtDist::Inf; n_vertices]; n_vertices];
        for (s, row) in vdist.iter_mut().enumerate() {
            row[s] = ExtDist::ZERO;
            let mut stack = vec![s];
            while let Some(u) = stack.pop() {
                let du = row[u].finite().expect("reached vertex has finite distance");
                for &(v, ei) in &adj[u] {
                    if row[v] == ExtDist::Inf {
                        row[v] = ExtDist::Finite(du + edges[ei].len);
                        stack.push(v);
                    }
                }
            }
        }
        ForestHull {
            labels,
            n_vertices,
            edges,
            adj,
            component,
            vdist,
        }
    }

    pub fn empty() -> Self {
        Self::assemble(vec![], 0, vec![])
    }

    pub fn n_generators(&self) -> usize {
        self.labels.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn kind(&self, v: usize) -> VertexKind {
        if v < self.labels.len() {
            VertexKind::Generator
        } else {
            VertexKind::Steiner
        }
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adj[v]
    }

    pub fn n_components(&self) -> usize {
        self.component.iter().copied().max().map_or(0, |m| m + 1)
    }

    pub fn vertex_distance(&self, u: usize, v: usize) -> ExtDist {
        self.vdist[u][v]
    }

    pub fn generator_point(&self, g: usize) -> PointRef {
        PointRef::v(g)
    }

    pub fn generator_points(&self) -> Vec<PointRef> {
        (0..self.n_generators()).map(PointRef::v).collect()
    }

    /// Distance matrix between generators.
    pub fn generator_metric(&self) -> FiniteMetric {
        let n = self.n_generators();
        let dist = (0..n).map(|i| (0..n).map(|j| self.vdist[i][j]).collect()).collect();
        FiniteMetric::new(self.labels.clone(), dist).expect("hull distances form a well-shaped matrix")
    }

    pub fn total_length(&self) -> Rat {
        self.edges.iter().map(|e| e.len).sum()
    }

    /// Validates and canonicalises a point reference: endpoint offsets become vertices.
    pub fn normalize(&self, p: PointRef) -> Result<PointRef, HullError> {
        match p {
            PointRef::Vertex { vertex } if vertex < self.n_vertices => Ok(p),
            PointRef::Edge { edge, offset } if edge < self.edges.len() => {
                let e = &self.edges[edge];
                if offset.is_negative() || offset > e.len {
                    Err(HullError::DanglingRef(p))
                } else if offset.is_zero() {
                    Ok(PointRef::v(e.a))
                } else if offset == e.len {
                    Ok(PointRef::v(e.b))
                } else {
                    Ok(p)
                }
            }
            _ => Err(HullError::DanglingRef(p)),
        }
    }

    pub fn component_of(&self, p: &PointRef) -> usize {
        match *p {
            PointRef::Vertex { vertex } => self.component[vertex],
            PointRef::Edge { edge, .. } => self.component[self.edges[edge].a],
        }
    }

    fn dist_to_vertex(&self, p: &PointRef, v: usize) -> ExtDist {
        match *p {
            PointRef::Vertex { vertex } => self.vdist[vertex][v],
            PointRef::Edge { edge, offset } => {
                let e = &self.edges[edge];
                std::cmp::min(self.vdist[e.a][v] + offset, self.vdist[e.b][v] + (e.len - offset))
            }
        }
    }

    /// Path-length distance; `p` and `q` must already be valid.
    pub fn distance(&self, p: &PointRef, q: &PointRef) -> ExtDist {
        match (*p, *q) {
            (_, PointRef::Vertex { vertex }) => self.dist_to_vertex(p, vertex),
            (PointRef::Vertex { vertex }, _) => self.dist_to_vertex(q, vertex),
            (PointRef::Edge { edge: e1, offset: o1 }, PointRef::Edge { edge: e2, offset: o2 }) => {
                if e1 == e2 {
                    ExtDist::Finite((o1 - o2).abs())
                } else {
                    let e = &self.edges[e1];
                    std::cmp::min(
                        self.dist_to_vertex(q, e.a) + o1,
                        self.dist_to_vertex(q, e.b) + (e.len - o1),
                    )
                }
            }
        }
    }

    /// Checked distance between arbitrary references.
    pub fn hull_distance(&self, p: PointRef, q: PointRef) -> Result<ExtDist, HullError> {
        let p = self.normalize(p)?;
        let q = self.normalize(q)?;
        Ok(self.distance(&p, &q))
    }

    pub fn edge_between(&self, u: usize, v: usize) -> Option<usize> {
        self.adj[u].iter().find(|&&(w, _)| w == v).map(|&(_, e)| e)
    }

    /// Vertex sequence of the geodesic from `u` to `v` (same component).
    fn vertex_path(&self, u: usize, v: usize) -> Vec<usize> {
        let mut path = vec![u];
        let mut cur = u;
        while cur != v {
            let target = self.vdist[cur][v].finite().expect("vertices in one component");
            let &(next, _) = self.adj[cur]
                .iter()
                .find(|&&(w, ei)| self.vdist[w][v].finite() == Some(target - self.edges[ei].len))
                .expect("a neighbour closer to the target exists in a tree");
            path.push(next);
            cur = next;
        }
        path
    }

    /// Geodesic from `p` to `q` as a list of legs, each `(edge, from_offset, to_offset)`,
    /// together with the vertices crossed. Requires finite distance.
    fn geodesic(&self, p: &PointRef, q: &PointRef) -> (Vec<(usize, Rat, Rat)>, Vec<usize>) {
        if let (PointRef::Edge { edge: e1, offset: o1 }, PointRef::Edge { edge: e2, offset: o2 }) = (*p, *q) {
            if e1 == e2 {
                return (vec![(e1, o1, o2)], vec![]);
            }
        }
        // Exit vertex of an interior point toward the other end.
        let exit = |x: &PointRef, other: &PointRef| -> (usize, Option<(usize, Rat, Rat)>) {
            match *x {
                PointRef::Vertex { vertex } => (vertex, None),
                PointRef::Edge { edge, offset } => {
                    let e = &self.edges[edge];
                    let via_a = self.dist_to_vertex(other, e.a) + offset;
                    let via_b = self.dist_to_vertex(other, e.b) + (e.len - offset);
                    if via_a <= via_b {
                        (e.a, Some((edge, offset, Rat::ZERO)))
                    } else {
                        (e.b, Some((edge, offset, e.len)))
                    }
                }
            }
        };
        let (u, first) = exit(p, q);
        let (v, last) = exit(q, p);
        let vertices = self.vertex_path(u, v);
        let mut legs = Vec::new();
        legs.extend(first);
        for w in vertices.windows(2) {
            let ei = self
                .edge_between(w[0], w[1])
                .expect("consecutive path vertices are adjacent");
            let e = &self.edges[ei];
            if e.a == w[0] {
                legs.push((ei, Rat::ZERO, e.len));
            } else {
                legs.push((ei, e.len, Rat::ZERO));
            }
        }
        if let Some((edge, o, end)) = last {
            legs.push((edge, end, o));
        }
        (legs, vertices)
    }

    /// The point of `[a, b]` at distance `t` from `a`.
    pub fn point_along(&self, a: &PointRef, b: &PointRef, t: Rat) -> Result<PointRef, HullError> {
        let total = self.distance(a, b).finite().ok_or(HullError::InfiniteDistance)?;
        if t.is_zero() {
            return Ok(*a);
        }
        if t == total {
            return Ok(*b);
        }
        let (legs, _) = self.geodesic(a, b);
        let mut remaining = t;
        for (edge, from, to) in legs {
            let len = (to - from).abs();
            if remaining <= len {
                let off = if to >= from { from + remaining } else { from - remaining };
                return self.normalize(PointRef::on_edge(edge, off));
            }
            remaining = remaining - len;
        }
        Ok(*b)
    }

    /// `a⌢r⌢b`: the point of `[a, b]` at distance `r·d(a,b)` from `a`.
    pub fn interp(&self, a: PointRef, r: Rat, b: PointRef) -> Result<PointRef, HullError> {
        if r.is_negative() || r > Rat::ONE {
            return Err(HullError::ParameterOutOfRange(r));
        }
        let a = self.normalize(a)?;
        let b = self.normalize(b)?;
        let d = self.distance(&a, &b).finite().ok_or(HullError::InfiniteDistance)?;
        self.point_along(&a, &b, r * d)
    }

    /// Writes `p` as `t[j]⌢r⌢t[k]` for the lexicographically first pair whose
    /// segment contains it.
    pub fn express_over(&self, tuple: &[PointRef], p: &PointRef) -> Option<(usize, usize, Rat)> {
        for (j, tj) in tuple.iter().enumerate() {
            if self.distance(tj, p) == ExtDist::ZERO {
                return Some((j, j, Rat::ZERO));
            }
        }
        for j in 0..tuple.len() {
            let dj = match self.distance(&tuple[j], p) {
                ExtDist::Finite(x) => x,
                ExtDist::Inf => continue,
            };
            for k in (j + 1)..tuple.len() {
                if let (ExtDist::Finite(dk), ExtDist::Finite(djk)) =
                    (self.distance(p, &tuple[k]), self.distance(&tuple[j], &tuple[k]))
                {
                    if dj + dk == djk {
                        return Some((j, k, dj / djk));
                    }
                }
            }
        }
        None
    }

    /// `express_over` with the generator tuple; every hull point has such a form.
    pub fn as_generator_interp(&self, p: &PointRef) -> (usize, usize, Rat) {
        self.express_over(&self.generator_points(), p)
            .expect("every point of a canonical hull lies on a generator segment")
    }

    /// Segment `[p, q]` as a region.
    pub fn segment(&self, p: &PointRef, q: &PointRef) -> Result<SubHull, HullError> {
        if !self.distance(p, q).is_finite() {
            return Err(HullError::InfiniteDistance);
        }
        let mut region = SubHull::empty();
        if p == q {
            region.insert_point(self, p);
            return Ok(region);
        }
        let (legs, vertices) = self.geodesic(p, q);
        for v in vertices {
            region.insert_vertex(v);
        }
        for (edge, from, to) in legs {
            let (lo, hi) = if from <= to { (from, to) } else { (to, from) };
            region.insert_piece(edge, lo, hi);
        }
        region.normalize(self);
        Ok(region)
    }

    /// `⟨tuple⟩_K`: union of segments between entries at distance `< K`
    /// (singletons always included).
    pub fn truncated_hull(&self, tuple: &[PointRef], k: Rat) -> Result<SubHull, HullError> {
        if !(k > Rat::ZERO) {
            return Err(HullError::NonPositiveBound(k));
        }
        self.hull_region_where(tuple, |d| matches!(d, ExtDist::Finite(x) if x < k))
    }

    /// `⟨tuple⟩`: union of segments between finite-distance entries.
    pub fn hull_of(&self, tuple: &[PointRef]) -> Result<SubHull, HullError> {
        self.hull_region_where(tuple, |d| d.is_finite())
    }

    fn hull_region_where(&self, tuple: &[PointRef], keep: impl Fn(ExtDist) -> bool) -> Result<SubHull, HullError> {
        let pts = tuple
            .iter()
            .map(|p| self.normalize(*p))
            .collect::<Result<Vec<_>, _>>()?;
        let mut region = SubHull::empty();
        for (j, pj) in pts.iter().enumerate() {
            region.insert_point(self, pj);
            for pk in &pts[j + 1..] {
                if keep(self.distance(pj, pk)) {
                    region = region.union(self, &self.segment(pj, pk)?);
                }
            }
        }
        region.normalize(self);
        Ok(region)
    }

    /// The whole hull as a region.
    pub fn full_region(&self) -> SubHull {
        let mut region = SubHull::empty();
        for v in 0..self.n_vertices {
            region.insert_vertex(v);
        }
        for (i, e) in self.edges.iter().enumerate() {
            region.insert_piece(i, Rat::ZERO, e.len);
        }
        region.normalize(self);
        region
    }

    /// Nearest point of `sub` to `p`.
    pub fn project(&self, p: &PointRef, sub: &SubHull) -> Result<PointRef, HullError> {
        let p = self.normalize(*p)?;
        let mut best: Option<(ExtDist, PointRef)> = None;
        let consider = |q: PointRef, best: &mut Option<(ExtDist, PointRef)>| {
            let d = self.distance(&p, &q);
            if d.is_finite() && best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                *best = Some((d, q));
            }
        };
        for &v in sub.vertices() {
            consider(PointRef::v(v), &mut best);
        }
        for (&edge, pieces) in sub.pieces() {
            let e = &self.edges[edge];
            for &(lo, hi) in pieces {
                let off = match p {
                    PointRef::Edge { edge: pe, offset } if pe == edge => offset.clamp_to(lo, hi),
                    _ => {
                        if self.dist_to_vertex(&p, e.a) < self.dist_to_vertex(&p, e.b) {
                            lo
                        } else {
                            hi
                        }
                    }
                };
                consider(self.normalize(PointRef::on_edge(edge, off))?, &mut best);
            }
        }
        best.map(|(_, q)| q).ok_or(HullError::Unreachable)
    }

    /// Distance from `p` to a region (`Inf` when unreachable or empty).
    pub fn distance_to_region(&self, p: &PointRef, sub: &SubHull) -> ExtDist {
        match self.project(p, sub) {
            Ok(q) => self.distance(p, &q),
            Err(_) => ExtDist::Inf,
        }
    }

    /// Mesh of a region: its vertices, piece endpoints, and equal subdivisions
    /// of every piece with spacing at most `eps`.
    pub fn mesh(&self, sub: &SubHull, eps: Rat) -> Vec<PointRef> {
        assert!(eps > Rat::ZERO, "mesh spacing must be positive");
        let mut out = Vec::new();
        let mut seen = std::collections::HashSet::new();
        let mut push = |p: PointRef, out: &mut Vec<PointRef>| {
            if seen.insert(p) {
                out.push(p);
            }
        };
        for &v in sub.vertices() {
            push(PointRef::v(v), &mut out);
        }
        for (&edge, pieces) in sub.pieces() {
            for &(lo, hi) in pieces {
                let m = ((hi - lo) / eps).ceil_usize().max(1);
                for i in 0..=m {
                    let off = lo + (hi - lo) * Rat::new(i as i128, m as i128);
                    let p = self
                        .normalize(PointRef::on_edge(edge, off))
                        .expect("offset within edge");
                    push(p, &mut out);
                }
            }
        }
        out
    }

    /// Mesh of the whole hull.
    pub fn full_mesh(&self, eps: Rat) -> Vec<PointRef> {
        self.mesh(&self.full_region(), eps)
    }

    /// `K ≥ 1` and every finite distance within `tuple` is `< K`.
    pub fn is_large_for(&self, k: Rat, tuple: &[PointRef]) -> bool {
        k >= Rat::ONE
            && tuple.iter().all(|p| {
                tuple.iter().all(|q| match self.distance(p, q) {
                    ExtDist::Finite(d) => d < k,
                    ExtDist::Inf => true,
                })
            })
    }

    /// Image of `p` under the generator-preserving embedding of `self` into
    /// `target`, whose first generators must realise the same distances.
    pub fn map_into(&self, target: &ForestHull, p: &PointRef) -> PointRef {
        let (j, k, r) = self.as_generator_interp(p);
        target
            .interp(PointRef::v(j), r, PointRef::v(k))
            .expect("generator distances agree")
    }

    /// Hull JSON: `{vertices:[{id,kind,label?}], edges:[{a,b,len}]}`.
    pub fn to_json(&self) -> serde_json::Value {
        let vertices: Vec<_> = (0..self.n_vertices)
            .map(|v| match self.kind(v) {
                VertexKind::Generator => {
                    serde_json::json!({"id": v, "kind": "generator", "label": self.labels[v]})
                }
                VertexKind::Steiner => serde_json::json!({"id": v, "kind": "steiner"}),
            })
            .collect();
        serde_json::json!({ "vertices": vertices, "edges": self.edges })
    }

    /// Reads hull JSON, re-canonicalising the tree.
    pub fn from_json(value: &serde_json::Value) -> Result<Self, HullError> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct V {
            id: usize,
            kind: VertexKind,
            label: Option<String>,
        }
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct H {
            vertices: Vec<V>,
            edges: Vec<Edge>,
        }
        let h: H = serde_json::from_value(value.clone()).map_err(|e| HullError::NotAForest(e.to_string()))?;
        let mut ids: HashMap<usize, usize> = HashMap::new();
        let mut labels = Vec::new();
        let gens = h.vertices.iter().filter(|v| v.kind == VertexKind::Generator);
        for v in gens {
            ids.insert(v.id, labels.len());
            labels.push(v.label.clone().unwrap_or_else(|| format!("g{}", v.id)));
        }
        let mut next = labels.len();
        for v in h.vertices.iter().filter(|v| v.kind == VertexKind::Steiner) {
            ids.insert(v.id, next);
            next += 1;
        }
        let edges = h
            .edges
            .iter()
            .map(|e| {
                let a = *ids
                    .get(&e.a)
                    .ok_or_else(|| HullError::NotAForest(format!("unknown vertex {}", e.a)))?;
                let b = *ids
                    .get(&e.b)
                    .ok_or_else(|| HullError::NotAForest(format!("unknown vertex {}", e.b)))?;
                Ok((a, b, e.len))
            })
            .collect::<Result<Vec<_>, HullError>>()?;
        ForestHull::from_tree(labels, next, edges)
    }
}
