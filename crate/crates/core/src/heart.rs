//! Finite pieces of the max-metric structure: every point sits at a radius
//! `ρ(x) = d(x, ∗)` in `[0, 1]` and distinct points are at distance
//! `max(ρ(x), ρ(y))`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::Rat;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HeartError {
    #[error("scale factor {0} is outside (0, 1]")]
    Scale(Rat),
    #[error("point {0} does not exist")]
    Point(usize),
}

/// The star is implicit; `radii[i]` is the radius of element `i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeartStructure {
    pub radii: Vec<Rat>,
    pub delta: Rat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HeartPoint {
    Star,
    Elem(usize),
}

impl Serialize for HeartPoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            HeartPoint::Star => s.serialize_str("*"),
            HeartPoint::Elem(i) => s.serialize_u64(*i as u64),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HeartReport {
    pub valid: bool,
    /// Elements whose radius is outside `[0, 1]`.
    pub out_of_range: Vec<usize>,
    /// Elements at radius 0, which would coincide with the star.
    pub at_star: Vec<usize>,
    /// A triple `(x, y, z)` with `d(x, z) > max(d(x, y), d(y, z))`.
    pub ultrametric_violation: Option<(HeartPoint, HeartPoint, HeartPoint)>,
    /// Largest distance from a point of `[0, 1]` to the nearest radius
    /// (the star counts, at 0).
    pub density_gap: Rat,
    pub dense: bool,
    pub delta_positive: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HeartFingerprint {
    /// `d(x_i, ∗)`.
    pub radii: Vec<Rat>,
    /// `d(x_i, x_j)` for `i < j`, row-major.
    pub pairs: Vec<Rat>,
    /// `d(x_i, a_k)`, one row per tuple entry.
    pub params: Vec<Vec<Rat>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OrbitReport {
    pub pass: bool,
    /// Radii shared by at least two non-parameter elements.
    pub orbits: Vec<(Rat, usize)>,
    pub transpositions: usize,
    pub failure: Option<(usize, usize)>,
}

impl HeartStructure {
    pub fn new(radii: Vec<Rat>, delta: Rat) -> Self {
        HeartStructure { radii, delta }
    }

    /// Radii `k/n` for `k = 1..=n` with `δ = 1/n`.
    pub fn uniform(n: usize) -> Self {
        let n = n.max(1) as i128;
        HeartStructure {
            radii: (1..=n).map(|k| Rat::new(k, n)).collect(),
            delta: Rat::new(1, n),
        }
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn radius(&self, x: HeartPoint) -> Rat {
        match x {
            HeartPoint::Star => Rat::ZERO,
            HeartPoint::Elem(i) => self.radii[i],
        }
    }

    pub fn distance(&self, x: HeartPoint, y: HeartPoint) -> Rat {
        if x == y {
            Rat::ZERO
        } else {
            self.radius(x).max(self.radius(y))
        }
    }

    /// The star followed by every element.
    pub fn points(&self) -> Vec<HeartPoint> {
        std::iter::once(HeartPoint::Star)
            .chain((0..self.len()).map(HeartPoint::Elem))
            .collect()
    }

    fn check_point(&self, x: HeartPoint) -> Result<(), HeartError> {
        match x {
            HeartPoint::Elem(i) if i >= self.len() => Err(HeartError::Point(i)),
            _ => Ok(()),
        }
    }

    pub fn density_gap(&self) -> Rat {
        let mut rs: Vec<Rat> = self.radii.iter().map(|r| r.clamp_to(Rat::ZERO, Rat::ONE)).collect();
        rs.push(Rat::ZERO);
        rs.sort();
        let inner = rs.windows(2).map(|w| (w[1] - w[0]).half()).max().unwrap_or(Rat::ZERO);
        inner.max(Rat::ONE - rs[rs.len() - 1])
    }
}

pub fn validate_heart(m: &HeartStructure) -> HeartReport {
    let out_of_range: Vec<usize> = (0..m.len())
        .filter(|&i| m.radii[i].is_negative() || m.radii[i] > Rat::ONE)
        .collect();
    let at_star: Vec<usize> = (0..m.len()).filter(|&i| m.radii[i].is_zero()).collect();
    let pts = m.points();
    let mut ultrametric_violation = None;
    'outer: for &x in &pts {
        for &y in &pts {
            for &z in &pts {
                if m.distance(x, z) > m.distance(x, y).max(m.distance(y, z)) {
                    ultrametric_violation = Some((x, y, z));
                    break 'outer;
                }
            }
        }
    }
    let density_gap = m.density_gap();
    let delta_positive = m.delta > Rat::ZERO;
    let dense = delta_positive && density_gap <= m.delta;
    HeartReport {
        valid: out_of_range.is_empty() && at_star.is_empty() && ultrametric_violation.is_none() && dense,
        out_of_range,
        at_star,
        ultrametric_violation,
        density_gap,
        dense,
        delta_positive,
    }
}

pub fn qf_fingerprint(
    m: &HeartStructure,
    tuple: &[HeartPoint],
    params: &[HeartPoint],
) -> Result<HeartFingerprint, HeartError> {
    for &x in tuple.iter().chain(params) {
        m.check_point(x)?;
    }
    let n = tuple.len();
    Ok(HeartFingerprint {
        radii: tuple.iter().map(|&x| m.radius(x)).collect(),
        pairs: (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| m.distance(tuple[i], tuple[j]))
            .collect(),
        params: tuple
            .iter()
            .map(|&x| params.iter().map(|&a| m.distance(x, a)).collect())
            .collect(),
    })
}

/// Whether `perm` (a permutation of the elements; the star is fixed)
/// preserves every distance.
pub fn is_automorphism(m: &HeartStructure, perm: &[usize]) -> bool {
    if perm.len() != m.len() {
        return false;
    }
    let mut seen = vec![false; m.len()];
    for &p in perm {
        if p >= m.len() || std::mem::replace(&mut seen[p], true) {
            return false;
        }
    }
    let map = |x: HeartPoint| match x {
        HeartPoint::Star => HeartPoint::Star,
        HeartPoint::Elem(i) => HeartPoint::Elem(perm[i]),
    };
    let pts = m.points();
    pts.iter()
        .all(|&x| pts.iter().all(|&y| m.distance(map(x), map(y)) == m.distance(x, y)))
}

/// Swaps every two equal-radius elements outside `params` and checks that
/// the swap preserves all distances and the fingerprint over `params` of
/// each element and of the swapped pair.
pub fn orbit_check(m: &HeartStructure, params: &[HeartPoint]) -> Result<OrbitReport, HeartError> {
    for &a in params {
        m.check_point(a)?;
    }
    let free: Vec<usize> = (0..m.len())
        .filter(|&i| !params.contains(&HeartPoint::Elem(i)))
        .collect();
    let mut orbits: Vec<(Rat, usize)> = Vec::new();
    let mut by_radius: Vec<(Rat, usize)> = free.iter().map(|&i| (m.radii[i], i)).collect();
    by_radius.sort();
    for group in by_radius.chunk_by(|a, b| a.0 == b.0) {
        if group.len() > 1 {
            orbits.push((group[0].0, group.len()));
        }
    }
    let pts = m.points();
    let mut transpositions = 0;
    for group in by_radius.chunk_by(|a, b| a.0 == b.0) {
        for (k, &(_, i)) in group.iter().enumerate() {
            for &(_, j) in &group[k + 1..] {
                transpositions += 1;
                let swap = |x: HeartPoint| match x {
                    HeartPoint::Elem(e) if e == i => HeartPoint::Elem(j),
                    HeartPoint::Elem(e) if e == j => HeartPoint::Elem(i),
                    other => other,
                };
                // Only distances touching i or j can move.
                let moved = [HeartPoint::Elem(i), HeartPoint::Elem(j)];
                let distances_kept = moved
                    .iter()
                    .all(|&x| pts.iter().all(|&y| m.distance(swap(x), swap(y)) == m.distance(x, y)));
                let pair = [HeartPoint::Elem(i), HeartPoint::Elem(j)];
                let fingerprints_kept = qf_fingerprint(m, &pair, params)?
                    == qf_fingerprint(m, &pair.map(swap), params)?
                    && qf_fingerprint(m, &pair[..1], params)? == qf_fingerprint(m, &pair[1..], params)?;
                if !(distances_kept && fingerprints_kept) {
                    return Ok(OrbitReport {
                        pass: false,
                        orbits,
                        transpositions,
                        failure: Some((i, j)),
                    });
                }
            }
        }
    }
    Ok(OrbitReport {
        pass: true,
        orbits,
        transpositions,
        failure: None,
    })
}

/// Multiplies every radius by `s`; zero distances stay exactly the diagonal.
/// The density mesh becomes `δ/s`, so scaling composes multiplicatively.
pub fn scale_structure(m: &HeartStructure, s: Rat) -> Result<HeartStructure, HeartError> {
    if s <= Rat::ZERO || s > Rat::ONE {
        return Err(HeartError::Scale(s));
    }
    Ok(HeartStructure {
        radii: m.radii.iter().map(|&r| r * s).collect(),
        delta: m.delta / s,
    })
}
