use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{ForestHull, PointRef};
use crate::rational::Rat;

/// A closed region of a parent hull: a set of vertices plus, per edge, sorted
/// disjoint closed intervals of offsets.
///
/// After [`SubHull::normalize`] two regions are equal as point sets iff they
/// are structurally equal: intervals are merged, an interval touching an edge
/// endpoint puts that vertex in the vertex set, and degenerate intervals at an
/// endpoint are dropped.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubHull {
    vertices: BTreeSet<usize>,
    pieces: BTreeMap<usize, Vec<(Rat, Rat)>>,
}

impl SubHull {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn vertices(&self) -> &BTreeSet<usize> {
        &self.vertices
    }

    pub fn pieces(&self) -> &BTreeMap<usize, Vec<(Rat, Rat)>> {
        &self.pieces
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty() && self.pieces.is_empty()
    }

    pub(crate) fn insert_vertex(&mut self, v: usize) {
        self.vertices.insert(v);
    }

    pub(crate) fn insert_piece(&mut self, edge: usize, lo: Rat, hi: Rat) {
        debug_assert!(lo <= hi);
        self.pieces.entry(edge).or_default().push((lo, hi));
    }

    pub(crate) fn insert_point(&mut self, hull: &ForestHull, p: &PointRef) {
        match *p {
            PointRef::Vertex { vertex } => self.insert_vertex(vertex),
            PointRef::Edge { edge, offset } => self.insert_piece(edge, offset, offset),
        }
        self.normalize(hull);
    }

    pub fn from_points(hull: &ForestHull, points: &[PointRef]) -> Self {
        let mut r = Self::empty();
        for p in points {
            r.insert_point(hull, p);
        }
        r
    }

    pub(crate) fn normalize(&mut self, hull: &ForestHull) {
        let mut pieces = BTreeMap::new();
        for (&edge, list) in &self.pieces {
            let e = &hull.edges()[edge];
            let mut sorted = list.clone();
            sorted.sort();
            let mut merged: Vec<(Rat, Rat)> = Vec::new();
            for (lo, hi) in sorted {
                match merged.last_mut() {
                    Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                    _ => merged.push((lo, hi)),
                }
            }
            if merged.first().is_some_and(|p| p.0.is_zero()) {
                self.vertices.insert(e.a);
            }
            if merged.last().is_some_and(|p| p.1 == e.len) {
                self.vertices.insert(e.b);
            }
            merged.retain(|&(lo, hi)| !(lo == hi && (lo.is_zero() || lo == e.len)));
            if !merged.is_empty() {
                pieces.insert(edge, merged);
            }
        }
        self.pieces = pieces;
    }

    pub fn contains(&self, p: &PointRef) -> bool {
        match *p {
            PointRef::Vertex { vertex } => self.vertices.contains(&vertex),
            PointRef::Edge { edge, offset } => self
                .pieces
                .get(&edge)
                .is_some_and(|list| list.iter().any(|&(lo, hi)| lo <= offset && offset <= hi)),
        }
    }

    pub fn union(&self, hull: &ForestHull, other: &SubHull) -> SubHull {
        let mut out = self.clone();
        out.vertices.extend(other.vertices.iter().copied());
        for (&edge, list) in &other.pieces {
            out.pieces.entry(edge).or_default().extend(list.iter().copied());
        }
        out.normalize(hull);
        out
    }

    pub fn intersection(&self, hull: &ForestHull, other: &SubHull) -> SubHull {
        let mut out = SubHull::empty();
        out.vertices = self.vertices.intersection(&other.vertices).copied().collect();
        for (&edge, list) in &self.pieces {
            let Some(other_list) = other.pieces.get(&edge) else {
                continue;
            };
            for &(lo0, hi0) in list {
                for &(lo1, hi1) in other_list {
                    let lo = lo0.max(lo1);
                    let hi = hi0.min(hi1);
                    if lo <= hi {
                        out.insert_piece(edge, lo, hi);
                    }
                }
            }
        }
        out.normalize(hull);
        out
    }

    /// Total length of the region.
    pub fn length(&self) -> Rat {
        self.pieces.values().flatten().map(|&(lo, hi)| hi - lo).sum()
    }
}

/// Segment-wise intersection of two regions of `parent`.
pub fn hull_intersection(parent: &ForestHull, s0: &SubHull, s1: &SubHull) -> SubHull {
    s0.intersection(parent, s1)
}
