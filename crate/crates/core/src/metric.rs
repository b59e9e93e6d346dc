//! Finite extended metric spaces and the 4-point condition.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::Rat;

/// A length in `[0, ∞]`. Addition saturates at `Inf`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExtDist {
    Finite(Rat),
    Inf,
}

impl ExtDist {
    pub const ZERO: ExtDist = ExtDist::Finite(Rat::ZERO);

    pub fn is_finite(&self) -> bool {
        matches!(self, ExtDist::Finite(_))
    }

    pub fn finite(&self) -> Option<Rat> {
        match self {
            ExtDist::Finite(r) => Some(*r),
            ExtDist::Inf => None,
        }
    }

    /// `min(d, k)` with `Inf` mapped to `k`.
    pub fn clamped(&self, k: Rat) -> Rat {
        match self {
            ExtDist::Finite(r) if *r < k => *r,
            _ => k,
        }
    }
}

impl From<Rat> for ExtDist {
    fn from(r: Rat) -> Self {
        ExtDist::Finite(r)
    }
}

impl Add for ExtDist {
    type Output = ExtDist;
    fn add(self, rhs: ExtDist) -> ExtDist {
        match (self, rhs) {
            (ExtDist::Finite(a), ExtDist::Finite(b)) => ExtDist::Finite(a + b),
            _ => ExtDist::Inf,
        }
    }
}

impl Add<Rat> for ExtDist {
    type Output = ExtDist;
    fn add(self, rhs: Rat) -> ExtDist {
        self + ExtDist::Finite(rhs)
    }
}

impl PartialOrd for ExtDist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtDist {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtDist::Finite(a), ExtDist::Finite(b)) => a.cmp(b),
            (ExtDist::Finite(_), ExtDist::Inf) => Ordering::Less,
            (ExtDist::Inf, ExtDist::Finite(_)) => Ordering::Greater,
            (ExtDist::Inf, ExtDist::Inf) => Ordering::Equal,
        }
    }
}

impl fmt::Display for ExtDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtDist::Finite(r) => write!(f, "{r}"),
            ExtDist::Inf => f.write_str("inf"),
        }
    }
}

impl fmt::Debug for ExtDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

// JSON: finite values as rationals, `Inf` as null.
impl Serialize for ExtDist {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ExtDist::Finite(r) => r.serialize(s),
            ExtDist::Inf => s.serialize_none(),
        }
    }
}

impl<'de> Deserialize<'de> for ExtDist {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(match Option::<Rat>::deserialize(d)? {
            Some(r) => ExtDist::Finite(r),
            None => ExtDist::Inf,
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricError {
    #[error("distance matrix is not square: row {row} has {len} entries, expected {expected}")]
    NotSquare { row: usize, len: usize, expected: usize },
    #[error("{labels} labels for a {size}x{size} matrix")]
    LabelCount { labels: usize, size: usize },
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("negative distance at ({0}, {1})")]
    Negative(usize, usize),
    #[error("unknown point {0}")]
    UnknownPoint(String),
    #[error("metric axioms violated ({} violation(s))", .0.violations.len())]
    Invalid(ValidationReport),
}

/// One failed metric axiom.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NonzeroDiagonal {
        point: usize,
    },
    Asymmetric {
        x: usize,
        y: usize,
    },
    /// Distinct points at distance zero.
    Coincident {
        x: usize,
        y: usize,
    },
    /// `d(x,z) > d(x,y) + d(y,z)`; also covers non-transitive finiteness.
    Triangle {
        x: usize,
        z: usize,
        y: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

/// Labelled points with an extended distance matrix.
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct FiniteMetric {
    labels: Vec<String>,
    dist: Vec<Vec<ExtDist>>,
}

impl FiniteMetric {
    /// Structural checks only; metric axioms are left to [`check_metric`].
    pub fn new(labels: Vec<String>, dist: Vec<Vec<ExtDist>>) -> Result<Self, MetricError> {
        let n = dist.len();
        for (row, r) in dist.iter().enumerate() {
            if r.len() != n {
                return Err(MetricError::NotSquare {
                    row,
                    len: r.len(),
                    expected: n,
                });
            }
        }
        if labels.len() != n {
            return Err(MetricError::LabelCount {
                labels: labels.len(),
                size: n,
            });
        }
        let mut seen = std::collections::HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(MetricError::DuplicateLabel(l.clone()));
            }
        }
        for (i, r) in dist.iter().enumerate() {
            for (j, d) in r.iter().enumerate() {
                if let ExtDist::Finite(x) = d {
                    if x.is_negative() {
                        return Err(MetricError::Negative(i, j));
                    }
                }
            }
        }
        Ok(FiniteMetric { labels, dist })
    }

    /// Labels default to `p0, p1, ...`.
    pub fn from_matrix(dist: Vec<Vec<ExtDist>>) -> Result<Self, MetricError> {
        let labels = (0..dist.len()).map(|i| format!("p{i}")).collect();
        Self::new(labels, dist)
    }

    pub fn empty() -> Self {
        FiniteMetric {
            labels: vec![],
            dist: vec![],
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn matrix(&self) -> &[Vec<ExtDist>] {
        &self.dist
    }

    pub fn d(&self, i: usize, j: usize) -> ExtDist {
        self.dist[i][j]
    }

    pub fn index_of(&self, label: &str) -> Result<usize, MetricError> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| MetricError::UnknownPoint(label.to_string()))
    }

    fn check_index(&self, i: usize) -> Result<(), MetricError> {
        if i < self.len() {
            Ok(())
        } else {
            Err(MetricError::UnknownPoint(i.to_string()))
        }
    }

    /// Sub-space on the given indices, in that order.
    pub fn restrict(&self, idx: &[usize]) -> FiniteMetric {
        FiniteMetric {
            labels: idx.iter().map(|&i| self.labels[i].clone()).collect(),
            dist: idx
                .iter()
                .map(|&i| idx.iter().map(|&j| self.dist[i][j]).collect())
                .collect(),
        }
    }

    /// `(d(z,x) + d(z,y) - d(x,y)) / 2`; `None` if any of the three distances is infinite.
    pub fn gromov_product(&self, x: usize, y: usize, base: usize) -> Option<Rat> {
        let zx = self.dist[base][x].finite()?;
        let zy = self.dist[base][y].finite()?;
        let xy = self.dist[x][y].finite()?;
        Some((zx + zy - xy).half())
    }
}

pub fn check_metric(space: &FiniteMetric) -> ValidationReport {
    let n = space.len();
    let d = &space.dist;
    let mut violations = Vec::new();
    for i in 0..n {
        if d[i][i] != ExtDist::ZERO {
            violations.push(Violation::NonzeroDiagonal { point: i });
        }
        for j in (i + 1)..n {
            if d[i][j] != d[j][i] {
                violations.push(Violation::Asymmetric { x: i, y: j });
            }
            if d[i][j] == ExtDist::ZERO || d[j][i] == ExtDist::ZERO {
                violations.push(Violation::Coincident { x: i, y: j });
            }
        }
    }
    for x in 0..n {
        for z in 0..n {
            if x == z {
                continue;
            }
            for y in 0..n {
                if y == x || y == z {
                    continue;
                }
                if d[x][z] > d[x][y] + d[y][z] {
                    violations.push(Violation::Triangle { x, z, y });
                }
            }
        }
    }
    ValidationReport {
        valid: violations.is_empty(),
        violations,
    }
}

/// `d(x,y) + d(z,w) <= max(d(x,z) + d(y,w), d(y,z) + d(x,w))`, vacuously true
/// unless all four points share a finite-distance class.
pub fn four_point(space: &FiniteMetric, x: usize, y: usize, z: usize, w: usize) -> Result<bool, MetricError> {
    for p in [x, y, z, w] {
        space.check_index(p)?;
    }
    let pts = [x, y, z, w];
    if pts.iter().any(|&a| pts.iter().any(|&b| !space.d(a, b).is_finite())) {
        return Ok(true);
    }
    let lhs = space.d(x, y) + space.d(z, w);
    let rhs = std::cmp::max(space.d(x, z) + space.d(y, w), space.d(y, z) + space.d(x, w));
    Ok(lhs <= rhs)
}

/// Outcome of the tree-embeddability test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TreeCheck {
    pub embeddable: bool,
    /// Ordered so that `four_point(w[0], w[1], w[2], w[3])` is false.
    pub witness: Option<[usize; 4]>,
}

pub fn is_tree_embeddable(space: &FiniteMetric) -> Result<TreeCheck, MetricError> {
    let report = check_metric(space);
    if !report.valid {
        return Err(MetricError::Invalid(report));
    }
    for block in finite_components(space) {
        let m = block.len();
        for a in 0..m {
            for b in (a + 1)..m {
                for c in (b + 1)..m {
                    for e in (c + 1)..m {
                        let (i, j, k, l) = (block[a], block[b], block[c], block[e]);
                        let s1 = space.d(i, j) + space.d(k, l);
                        let s2 = space.d(i, k) + space.d(j, l);
                        let s3 = space.d(i, l) + space.d(j, k);
                        // The condition over all orderings: the maximum pair sum is attained twice.
                        let witness = if s1 > s2 && s1 > s3 {
                            Some([i, j, k, l])
                        } else if s2 > s1 && s2 > s3 {
                            Some([i, k, j, l])
                        } else if s3 > s1 && s3 > s2 {
                            Some([i, l, j, k])
                        } else {
                            None
                        };
                        if witness.is_some() {
                            return Ok(TreeCheck {
                                embeddable: false,
                                witness,
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(TreeCheck {
        embeddable: true,
        witness: None,
    })
}

/// Finiteness classes, each sorted, ordered by smallest member.
pub fn finite_components(space: &FiniteMetric) -> Vec<Vec<usize>> {
    let n = space.len();
    let mut comp = vec![usize::MAX; n];
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if comp[i] != usize::MAX {
            continue;
        }
        let id = blocks.len();
        let mut block = Vec::new();
        let mut stack = vec![i];
        comp[i] = id;
        while let Some(p) = stack.pop() {
            block.push(p);
            for q in 0..n {
                if comp[q] == usize::MAX && space.d(p, q).is_finite() {
                    comp[q] = id;
                    stack.push(q);
                }
            }
        }
        block.sort_unstable();
        blocks.push(block);
    }
    blocks
}

/// `K >= 1` and every finite distance within the tuple is strictly below `K`.
pub fn is_large(k: Rat, space: &FiniteMetric, tuple: &[usize]) -> bool {
    k >= Rat::ONE
        && tuple.iter().all(|&i| {
            tuple.iter().all(|&j| match space.d(i, j) {
                ExtDist::Finite(d) => d < k,
                ExtDist::Inf => true,
            })
        })
}
