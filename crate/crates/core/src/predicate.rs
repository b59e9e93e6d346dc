//! Binary 1-1-Lipschitz predicates represented by finite anchor sets.
//!
//! A predicate is the McShane inf-extension of its anchors:
//! `R(x, y) = min(1, inf_i v_i + d(x, p_i) + d(y, q_i))`, which is 1-Lipschitz
//! for the ℓ¹ metric on pairs and agrees with every anchor when the anchors are
//! consistent.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hull::{free_amalgam, Amalgam, ForestHull, HullError, PointRef, SubHull};
use crate::metric::ExtDist;
use crate::rational::Rat;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PredicateError {
    #[error(transparent)]
    Hull(#[from] HullError),
    #[error("anchor value {0} outside [0, 1]")]
    ValueOutOfRange(Rat),
    #[error("anchors {0} and {1} violate the 1-1-Lipschitz bound")]
    Inconsistent(usize, usize),
    #[error("predicates disagree on the base by {} at ({}, {})", .0.gap, .0.x, .0.y)]
    RestrictionMismatch(Box<Mismatch>),
    #[error("regions do not cover the parent hull")]
    NotACover,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub x: PointRef,
    pub y: PointRef,
    pub gap: Rat,
}

/// A function given by `min(1, inf_i v_i + d(x, p_i))` over any metric.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LipFn<P> {
    anchors: Vec<(P, Rat)>,
}

impl<P: Clone> LipFn<P> {
    pub fn new(anchors: Vec<(P, Rat)>) -> Self {
        LipFn { anchors }
    }

    /// The constant function 1.
    pub fn one() -> Self {
        LipFn { anchors: vec![] }
    }

    pub fn anchors(&self) -> &[(P, Rat)] {
        &self.anchors
    }

    pub fn eval(&self, d: impl Fn(&P, &P) -> ExtDist, x: &P) -> Rat {
        let mut best = Rat::ONE;
        for (p, v) in &self.anchors {
            if *v >= best {
                continue;
            }
            if let ExtDist::Finite(dist) = d(x, p) {
                best = best.min(*v + dist);
            }
        }
        best
    }

    /// `x ↦ min(1, f(x) + r)` for `r ≥ 0`.
    pub fn shifted(&self, r: Rat) -> Self {
        LipFn {
            anchors: self.anchors.iter().map(|(p, v)| (p.clone(), *v + r)).collect(),
        }
    }

    /// Pointwise minimum.
    pub fn min_with(&self, other: &Self) -> Self {
        let mut anchors = self.anchors.clone();
        anchors.extend(other.anchors.iter().cloned());
        LipFn { anchors }
    }

    /// Drops anchors that can never be the binding term.
    pub fn pruned(mut self) -> Self {
        self.anchors.retain(|(_, v)| *v < Rat::ONE);
        self
    }
}

/// Unary McShane extension through a correlation: `g(x) = min(1, inf_{(a,b) ∈ O} d(x, a) + f(b))`.
/// `pairs` lists `(a, b)` with `a` a target point and `b` an index into `f`.
pub fn mcshane_unary<P: Clone>(f: &[Rat], pairs: &[(P, usize)]) -> LipFn<P> {
    LipFn::new(pairs.iter().map(|(a, b)| (a.clone(), f[*b])).collect())
}

/// `h(x) = min(g(x) + r, inf_{a ∈ A0} min(1, d(x, a) + f(a)))` with
/// `r = sup_{a ∈ A0} |f(a) − g(a)|`. Returns `(h, r)`; `A0` empty gives `h = g`.
pub fn bounded_extension<P: Clone>(f: &[(P, Rat)], g: &LipFn<P>, d: impl Fn(&P, &P) -> ExtDist) -> (LipFn<P>, Rat) {
    if f.is_empty() {
        return (g.clone(), Rat::ZERO);
    }
    let r = f
        .iter()
        .map(|(a, fa)| (*fa - g.eval(&d, a)).abs())
        .max()
        .expect("nonempty");
    let h = g.shifted(r).min_with(&LipFn::new(f.to_vec())).pruned();
    (h, r)
}

/// ℓ¹ distance on pairs of hull points.
pub fn pair_distance(hull: &ForestHull, a: &(PointRef, PointRef), b: &(PointRef, PointRef)) -> ExtDist {
    hull.distance(&a.0, &b.0) + hull.distance(&a.1, &b.1)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Anchor {
    pub p: PointRef,
    pub q: PointRef,
    pub v: Rat,
}

/// Consistent anchor set on a host hull.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorPredicate {
    anchors: Vec<Anchor>,
}

impl AnchorPredicate {
    /// Validates points, value range and pairwise consistency.
    pub fn new(host: &ForestHull, anchors: Vec<Anchor>) -> Result<Self, PredicateError> {
        let mut normalized = Vec::with_capacity(anchors.len());
        for a in anchors {
            if a.v.is_negative() || a.v > Rat::ONE {
                return Err(PredicateError::ValueOutOfRange(a.v));
            }
            normalized.push(Anchor {
                p: host.normalize(a.p)?,
                q: host.normalize(a.q)?,
                v: a.v,
            });
        }
        for i in 0..normalized.len() {
            for j in (i + 1)..normalized.len() {
                let (a, b) = (&normalized[i], &normalized[j]);
                if let ExtDist::Finite(bound) = host.distance(&a.p, &b.p) + host.distance(&a.q, &b.q) {
                    if (a.v - b.v).abs() > bound {
                        return Err(PredicateError::Inconsistent(i, j));
                    }
                }
            }
        }
        Ok(AnchorPredicate { anchors: normalized })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Takes arbitrary `(p, q, v)` triples and replaces each value by the
    /// inf-extension at its point, which always yields a consistent set.
    /// Anchors that end up at 1 are dropped.
    pub fn from_inf_extension(host: &ForestHull, raw: Vec<Anchor>) -> Result<Self, PredicateError> {
        let mut raw_norm = Vec::with_capacity(raw.len());
        for a in raw {
            raw_norm.push(Anchor {
                p: host.normalize(a.p)?,
                q: host.normalize(a.q)?,
                v: a.v.clamp_to(Rat::ZERO, Rat::ONE),
            });
        }
        // Dropping dominated anchors keeps the extension; doing it before the
        // value pass keeps that pass small.
        let loose = AnchorPredicate {
            anchors: prune_dominated(host, raw_norm),
        };
        let evaluated: Vec<Anchor> = loose
            .anchors
            .iter()
            .map(|a| Anchor {
                p: a.p,
                q: a.q,
                v: loose.eval(host, &a.p, &a.q),
            })
            .collect();
        let mut out = AnchorPredicate {
            anchors: prune_dominated(host, evaluated),
        };
        out.anchors.sort_by_key(|x| (x.p, x.q, x.v));
        Ok(out)
    }

    pub fn anchors(&self) -> &[Anchor] {
        &self.anchors
    }

    pub fn as_lipfn(&self) -> LipFn<(PointRef, PointRef)> {
        LipFn::new(self.anchors.iter().map(|a| ((a.p, a.q), a.v)).collect())
    }

    pub fn eval(&self, host: &ForestHull, x: &PointRef, y: &PointRef) -> Rat {
        let mut best = Rat::ONE;
        for a in &self.anchors {
            if a.v >= best {
                continue;
            }
            if let ExtDist::Finite(d) = host.distance(x, &a.p) + host.distance(y, &a.q) {
                best = best.min(a.v + d);
            }
        }
        best
    }
}

/// A hull with a predicate and a distinguished tuple.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RfrStructure {
    pub hull: ForestHull,
    pub pred: AnchorPredicate,
    pub tuple: Vec<PointRef>,
}

impl RfrStructure {
    pub fn new(hull: ForestHull, pred: AnchorPredicate, tuple: Vec<PointRef>) -> Result<Self, PredicateError> {
        let tuple = tuple
            .into_iter()
            .map(|p| hull.normalize(p))
            .collect::<Result<Vec<_>, _>>()?;
        // Re-run the constructor checks so a predicate built for another host is caught.
        let pred = AnchorPredicate::new(&hull, pred.anchors)?;
        Ok(RfrStructure { hull, pred, tuple })
    }

    /// Structure whose tuple is its generator list.
    pub fn generated(hull: ForestHull, pred: AnchorPredicate) -> Result<Self, PredicateError> {
        let tuple = hull.generator_points();
        Self::new(hull, pred, tuple)
    }

    pub fn eval(&self, x: &PointRef, y: &PointRef) -> Rat {
        self.pred.eval(&self.hull, x, y)
    }

    pub fn distance(&self, x: &PointRef, y: &PointRef) -> ExtDist {
        self.hull.distance(x, y)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LipReport {
    pub pass: bool,
    /// Least value of `d − |ΔR|` over checked pairs; negative on failure.
    pub worst_slack: Option<Rat>,
    pub points: usize,
    /// `(x, x', y)` or `(y, y', x)`: the argument that moved, then the fixed one.
    pub witness: Option<(PointRef, PointRef, PointRef)>,
}

/// Checks separate 1-Lipschitzness in each argument over all mesh points,
/// which for a path metric is equivalent to the ℓ¹ condition on the mesh.
pub fn check_one_one_lipschitz(s: &RfrStructure, eps: Rat) -> LipReport {
    let pts = s.hull.full_mesh(eps);
    check_lipschitz_on(&s.hull, &pts, |x, y| s.eval(x, y))
}

pub(crate) fn check_lipschitz_on(
    hull: &ForestHull,
    pts: &[PointRef],
    r: impl Fn(&PointRef, &PointRef) -> Rat,
) -> LipReport {
    let n = pts.len();
    let vals: Vec<Vec<Rat>> = pts.iter().map(|x| pts.iter().map(|y| r(x, y)).collect()).collect();
    let dist: Vec<Vec<ExtDist>> = pts
        .iter()
        .map(|x| pts.iter().map(|y| hull.distance(x, y)).collect())
        .collect();
    let mut worst: Option<Rat> = None;
    let mut witness = None;
    for i in 0..n {
        for j in (i + 1)..n {
            let ExtDist::Finite(dij) = dist[i][j] else { continue };
            for k in 0..n {
                for (delta, w) in [
                    ((vals[i][k] - vals[j][k]).abs(), (pts[i], pts[j], pts[k])),
                    ((vals[k][i] - vals[k][j]).abs(), (pts[i], pts[j], pts[k])),
                ] {
                    let slack = dij - delta;
                    if worst.is_none_or(|w0| slack < w0) {
                        worst = Some(slack);
                        if slack.is_negative() {
                            witness = Some(w);
                        }
                    }
                }
            }
        }
    }
    LipReport {
        pass: worst.is_none_or(|w| !w.is_negative()),
        worst_slack: worst,
        points: n,
        witness,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GlueReport {
    pub pass: bool,
    pub lipschitz_on_b: bool,
    pub lipschitz_on_c: bool,
    /// Worst `d(b, c) − |f(b) − f(c)|` over cross pairs.
    pub worst_cross_slack: Option<Rat>,
    /// Worst slack of the chain bound through the projections onto `B ∩ C`.
    pub worst_chain_slack: Option<Rat>,
    pub cross_pairs: usize,
}

/// Certifies that `f`, 1-Lipschitz on `B` and on `C`, is 1-Lipschitz on `B ∪ C`.
/// Cross pairs are checked directly and through the chain
/// `|f(b) − f(π b)| + |f(π b) − f(π c)| + |f(π c) − f(c)|` with `π` the
/// projection onto `B ∩ C`.
pub fn glue_check(
    parent: &ForestHull,
    b: &SubHull,
    c: &SubHull,
    f: impl Fn(&PointRef) -> Rat,
    eps: Rat,
) -> Result<GlueReport, PredicateError> {
    if b.union(parent, c) != parent.full_region() {
        return Err(PredicateError::NotACover);
    }
    let side_ok = |region: &SubHull| {
        let pts = parent.mesh(region, eps);
        let vals: Vec<Rat> = pts.iter().map(&f).collect();
        (0..pts.len()).all(|i| {
            (0..pts.len()).all(|j| match parent.distance(&pts[i], &pts[j]) {
                ExtDist::Finite(d) => (vals[i] - vals[j]).abs() <= d,
                ExtDist::Inf => true,
            })
        })
    };
    let lipschitz_on_b = side_ok(b);
    let lipschitz_on_c = side_ok(c);
    let d_region = b.intersection(parent, c);
    let bp = parent.mesh(b, eps);
    let cp = parent.mesh(c, eps);
    let mut worst_cross: Option<Rat> = None;
    let mut worst_chain: Option<Rat> = None;
    let mut cross_pairs = 0;
    for x in &bp {
        for y in &cp {
            let ExtDist::Finite(dxy) = parent.distance(x, y) else {
                continue;
            };
            cross_pairs += 1;
            let (fx, fy) = (f(x), f(y));
            let slack = dxy - (fx - fy).abs();
            worst_cross = Some(worst_cross.map_or(slack, |w| w.min(slack)));
            if let (Ok(px), Ok(py)) = (parent.project(x, &d_region), parent.project(y, &d_region)) {
                let chain = (fx - f(&px)).abs() + (f(&px) - f(&py)).abs() + (f(&py) - fy).abs();
                let path = parent.distance(x, &px) + parent.distance(&px, &py) + parent.distance(&py, y);
                if let ExtDist::Finite(path) = path {
                    let s = path - chain;
                    worst_chain = Some(worst_chain.map_or(s, |w| w.min(s)));
                }
            }
        }
    }
    let pass = lipschitz_on_b && lipschitz_on_c && worst_cross.is_none_or(|w| !w.is_negative());
    Ok(GlueReport {
        pass,
        lipschitz_on_b,
        lipschitz_on_c,
        worst_cross_slack: worst_cross,
        worst_chain_slack: worst_chain,
        cross_pairs,
    })
}

/// Amalgam of two structures over base tuples identified entrywise. The
/// predicate is the inf-extension of both anchor sets transported into the
/// amalgam; the two predicates must agree on the base mesh within `tol`.
/// The result's tuple is the left tuple followed by the right tuple.
pub fn predicate_amalgam(
    s0: &RfrStructure,
    base0: &[PointRef],
    s1: &RfrStructure,
    base1: &[PointRef],
    eps: Rat,
    tol: Rat,
) -> Result<(RfrStructure, Amalgam), PredicateError> {
    let amalgam = free_amalgam(&s0.hull, base0, &s1.hull, base1)?;
    let x0 = s0.hull.hull_of(base0)?;
    let mesh0 = s0.hull.mesh(&x0, eps);
    let to_right = |p: &PointRef| -> PointRef {
        let (j, k, r) = s0
            .hull
            .express_over(base0, p)
            .expect("mesh point lies in the base hull");
        s1.hull.interp(base1[j], r, base1[k]).expect("isometric base")
    };
    let mesh1: Vec<PointRef> = mesh0.iter().map(to_right).collect();
    for (i, x) in mesh0.iter().enumerate() {
        for (j, y) in mesh0.iter().enumerate() {
            let gap = (s0.eval(x, y) - s1.eval(&mesh1[i], &mesh1[j])).abs();
            if gap > tol {
                return Err(PredicateError::RestrictionMismatch(Box::new(Mismatch {
                    x: *x,
                    y: *y,
                    gap,
                })));
            }
        }
    }
    let mut raw: Vec<Anchor> = s0
        .pred
        .anchors()
        .iter()
        .map(|a| Anchor {
            p: amalgam.map_left(&a.p),
            q: amalgam.map_left(&a.q),
            v: a.v,
        })
        .collect();
    raw.extend(s1.pred.anchors().iter().map(|a| Anchor {
        p: amalgam.map_right(&a.p),
        q: amalgam.map_right(&a.q),
        v: a.v,
    }));
    let pred = AnchorPredicate::from_inf_extension(&amalgam.hull, raw)?;
    let mut tuple: Vec<PointRef> = s0.tuple.iter().map(|p| amalgam.map_left(p)).collect();
    tuple.extend(s1.tuple.iter().map(|p| amalgam.map_right(p)));
    let s = RfrStructure::new(amalgam.hull.clone(), pred, tuple)?;
    Ok((s, amalgam))
}

/// Random consistent predicate: `count` raw anchors at mesh points with values
/// on a grid of `1/8`, made consistent by inf-extension.
pub fn random_predicate(hull: &ForestHull, rng: &mut impl Rng, count: usize, eps: Rat) -> AnchorPredicate {
    let pts = hull.full_mesh(eps);
    if pts.is_empty() {
        return AnchorPredicate::empty();
    }
    let raw = (0..count)
        .map(|_| Anchor {
            p: pts[rng.gen_range(0..pts.len())],
            q: pts[rng.gen_range(0..pts.len())],
            v: Rat::new(rng.gen_range(0..=8), 8),
        })
        .collect();
    AnchorPredicate::from_inf_extension(hull, raw).expect("mesh points are valid")
}

/// Anchors below 1 not reached by a smaller one. Greedy in increasing value,
/// which is sound because domination is transitive.
fn prune_dominated(host: &ForestHull, mut candidates: Vec<Anchor>) -> Vec<Anchor> {
    candidates.retain(|a| a.v < Rat::ONE);
    candidates.sort_by_key(|x| (x.v, x.p, x.q));
    let mut kept: Vec<Anchor> = Vec::new();
    for a in candidates {
        let reached = kept.iter().any(|b| {
            (host.distance(&a.p, &b.p) + host.distance(&a.q, &b.q))
                .finite()
                .is_some_and(|d| b.v + d <= a.v)
        });
        if !reached {
            kept.push(a);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hull::build_hull;
    use crate::metric::FiniteMetric;

    fn r(n: i128, d: i128) -> Rat {
        Rat::new(n, d)
    }

    fn segment(len: Rat) -> ForestHull {
        build_hull(
            &FiniteMetric::from_matrix(vec![vec![ExtDist::ZERO, len.into()], vec![len.into(), ExtDist::ZERO]]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn eval_examples() {
        let h = segment(Rat::ONE);
        let (p, q) = (PointRef::v(0), PointRef::v(1));
        let pred = AnchorPredicate::new(&h, vec![Anchor { p, q, v: r(1, 5) }]).unwrap();
        assert_eq!(pred.eval(&h, &p, &q), r(1, 5));
        assert_eq!(AnchorPredicate::empty().eval(&h, &p, &q), Rat::ONE);
        let x = PointRef::on_edge(0, r(1, 10));
        let y = PointRef::on_edge(0, r(17, 20));
        assert_eq!(pred.eval(&h, &x, &y), r(45, 100));
    }

    #[test]
    fn inconsistent_anchors_rejected() {
        let h = segment(Rat::ONE);
        let p = PointRef::v(0);
        let err = AnchorPredicate::new(
            &h,
            vec![Anchor { p, q: p, v: Rat::ZERO }, Anchor { p, q: p, v: Rat::ONE }],
        );
        assert_eq!(err, Err(PredicateError::Inconsistent(0, 1)));
        assert!(AnchorPredicate::new(&h, vec![Anchor { p, q: p, v: r(3, 2) }]).is_err());
    }

    #[test]
    fn lipschitz_check_passes_for_anchor_predicates() {
        let h = segment(Rat::int(2));
        let pred = AnchorPredicate::new(
            &h,
            vec![Anchor {
                p: PointRef::v(0),
                q: PointRef::v(1),
                v: r(1, 4),
            }],
        )
        .unwrap();
        let s = RfrStructure::generated(h, pred).unwrap();
        let rep = check_one_one_lipschitz(&s, r(1, 4));
        assert!(rep.pass);
        assert_eq!(rep.points, 9);
    }

    #[test]
    fn mcshane_single_pair() {
        let h = segment(Rat::ONE);
        let g = mcshane_unary(&[r(3, 10)], &[(PointRef::v(0), 0)]);
        let d = |a: &PointRef, b: &PointRef| h.distance(a, b);
        assert_eq!(g.eval(d, &PointRef::on_edge(0, r(1, 2))), r(4, 5));
        assert_eq!(g.eval(d, &PointRef::v(1)), Rat::ONE);
        let empty: LipFn<PointRef> = mcshane_unary(&[], &[]);
        assert_eq!(empty.eval(d, &PointRef::v(0)), Rat::ONE);
    }

    #[test]
    fn bounded_extension_examples() {
        let h = segment(Rat::ONE);
        let d = |a: &PointRef, b: &PointRef| h.distance(a, b);
        let g = LipFn::new(vec![(PointRef::v(0), r(1, 10))]);
        let a0: Vec<(PointRef, Rat)> = vec![(PointRef::v(0), r(1, 10))];
        let (h0, r0) = bounded_extension(&a0, &g, d);
        assert_eq!(r0, Rat::ZERO);
        for p in h.full_mesh(r(1, 8)) {
            assert_eq!(h0.eval(d, &p), g.eval(d, &p));
        }
        let shifted: Vec<(PointRef, Rat)> = vec![(PointRef::v(0), r(3, 10))];
        let (h1, r1) = bounded_extension(&shifted, &g, d);
        assert_eq!(r1, r(1, 5));
        let dev = h
            .full_mesh(r(1, 8))
            .iter()
            .map(|p| (h1.eval(d, p) - g.eval(d, p)).abs())
            .max()
            .unwrap();
        assert_eq!(dev, r(1, 5));
    }
}
