#![allow(dead_code)]

use rforest::hull::build_hull;
use rforest::{Anchor, AnchorPredicate, ExtDist, FiniteMetric, ForestHull, PointRef, Rat, RfrStructure};

pub fn r(n: i128, d: i128) -> Rat {
    Rat::new(n, d)
}

/// Rational matrix; `None` is INF.
pub fn metric(rows: &[&[Option<Rat>]]) -> FiniteMetric {
    FiniteMetric::from_matrix(
        rows.iter()
            .map(|row| row.iter().map(|x| x.map_or(ExtDist::Inf, ExtDist::Finite)).collect())
            .collect(),
    )
    .unwrap()
}

pub fn hull(rows: &[&[Option<Rat>]]) -> ForestHull {
    build_hull(&metric(rows)).unwrap()
}

pub fn segment(len: Rat) -> ForestHull {
    hull(&[&[Some(Rat::ZERO), Some(len)], &[Some(len), Some(Rat::ZERO)]])
}

pub fn anchor(p: PointRef, q: PointRef, v: Rat) -> Anchor {
    Anchor { p, q, v }
}

pub fn structure(h: ForestHull, anchors: Vec<Anchor>, tuple: Vec<PointRef>) -> RfrStructure {
    let pred = AnchorPredicate::new(&h, anchors).unwrap();
    RfrStructure::new(h, pred, tuple).unwrap()
}
