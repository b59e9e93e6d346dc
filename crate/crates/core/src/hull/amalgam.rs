use std::collections::HashSet;

use super::{build_hull, ForestHull, HullError, PointRef, SubHull};
use crate::metric::{ExtDist, FiniteMetric};

/// Free amalgam of two hulls over a common base, together with the maps
/// sending points of each side into the result.
#[derive(Clone, Debug)]
pub struct Amalgam {
    pub hull: ForestHull,
    /// Generator `g` of the left side is generator `left_gens[g]` of `hull`.
    pub left_gens: Vec<usize>,
    pub right_gens: Vec<usize>,
    left: ForestHull,
    right: ForestHull,
}

impl Amalgam {
    pub fn left(&self) -> &ForestHull {
        &self.left
    }

    pub fn right(&self) -> &ForestHull {
        &self.right
    }

    pub fn map_left(&self, p: &PointRef) -> PointRef {
        map_via(&self.left, &self.left_gens, &self.hull, p)
    }

    pub fn map_right(&self, p: &PointRef) -> PointRef {
        map_via(&self.right, &self.right_gens, &self.hull, p)
    }
}

fn map_via(side: &ForestHull, gens: &[usize], target: &ForestHull, p: &PointRef) -> PointRef {
    let (j, k, r) = side.as_generator_interp(p);
    target
        .interp(PointRef::v(gens[j]), r, PointRef::v(gens[k]))
        .expect("generator segments embed isometrically")
}

/// Sends a point of `⟨base0⟩` to the corresponding point of `⟨base1⟩`.
fn transport(y0: &ForestHull, base0: &[PointRef], y1: &ForestHull, base1: &[PointRef], p: &PointRef) -> PointRef {
    let (j, k, r) = y0.express_over(base0, p).expect("point lies in the base hull");
    y1.interp(base1[j], r, base1[k]).expect("isometric base")
}

fn check_base(y0: &ForestHull, base0: &[PointRef], y1: &ForestHull, base1: &[PointRef]) -> Result<(), HullError> {
    if base0.len() != base1.len() {
        return Err(HullError::NonIsometricBase(
            base0.len().min(base1.len()),
            base0.len().max(base1.len()),
        ));
    }
    for j in 0..base0.len() {
        for k in j..base0.len() {
            if y0.distance(&base0[j], &base0[k]) != y1.distance(&base1[j], &base1[k]) {
                return Err(HullError::NonIsometricBase(j, k));
            }
        }
    }
    Ok(())
}

/// Distance in the amalgam between `p0` on the left and `p1` on the right,
/// through the projections onto the base:
/// `d(p0, π(p0)) + d(π(p0), π(p1)) + d(π(p1), p1)`.
pub(crate) fn projection_identity(
    y0: &ForestHull,
    x0: &SubHull,
    base0: &[PointRef],
    y1: &ForestHull,
    x1: &SubHull,
    base1: &[PointRef],
    p0: &PointRef,
    p1: &PointRef,
) -> ExtDist {
    let (Ok(q0), Ok(q1)) = (y0.project(p0, x0), y1.project(p1, x1)) else {
        return ExtDist::Inf;
    };
    let t = transport(y0, base0, y1, base1, &q0);
    y0.distance(p0, &q0) + y1.distance(&t, &q1) + y1.distance(&q1, p1)
}

/// Glues `y0` and `y1` along the hulls of the base tuples, identified
/// entrywise. Right-side labels that clash with left-side ones get a `#1` suffix.
pub fn free_amalgam(
    y0: &ForestHull,
    base0: &[PointRef],
    y1: &ForestHull,
    base1: &[PointRef],
) -> Result<Amalgam, HullError> {
    let base0 = base0.iter().map(|p| y0.normalize(*p)).collect::<Result<Vec<_>, _>>()?;
    let base1 = base1.iter().map(|p| y1.normalize(*p)).collect::<Result<Vec<_>, _>>()?;
    check_base(y0, &base0, y1, &base1)?;
    let x0 = y0.hull_of(&base0)?;
    let x1 = y1.hull_of(&base1)?;
    let (n0, n1) = (y0.n_generators(), y1.n_generators());

    let cross: Vec<Vec<ExtDist>> = (0..n0)
        .map(|g0| {
            (0..n1)
                .map(|g1| projection_identity(y0, &x0, &base0, y1, &x1, &base1, &PointRef::v(g0), &PointRef::v(g1)))
                .collect()
        })
        .collect();

    let mut labels: Vec<String> = y0.labels().to_vec();
    let mut used: HashSet<String> = labels.iter().cloned().collect();
    let mut right_gens = Vec::with_capacity(n1);
    let mut fresh = Vec::new();
    for g1 in 0..n1 {
        if let Some(g0) = (0..n0).find(|&g0| cross[g0][g1] == ExtDist::ZERO) {
            right_gens.push(g0);
            continue;
        }
        let mut label = y1.labels()[g1].clone();
        while used.contains(&label) {
            label.push_str("#1");
        }
        used.insert(label.clone());
        right_gens.push(labels.len());
        labels.push(label);
        fresh.push(g1);
    }

    let n = labels.len();
    let mut dist = vec![vec![ExtDist::Inf; n]; n];
    let point = |i: usize| -> (bool, usize) {
        if i < n0 {
            (true, i)
        } else {
            (false, fresh[i - n0])
        }
    };
    for (i, row) in dist.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = match (point(i), point(j)) {
                ((true, a), (true, b)) => y0.vertex_distance(a, b),
                ((false, a), (false, b)) => y1.vertex_distance(a, b),
                ((true, a), (false, b)) => cross[a][b],
                ((false, a), (true, b)) => cross[b][a],
            };
        }
    }
    let metric = FiniteMetric::new(labels, dist)?;
    let hull = build_hull(&metric)?;
    Ok(Amalgam {
        hull,
        left_gens: (0..n0).collect(),
        right_gens,
        left: y0.clone(),
        right: y1.clone(),
    })
}
