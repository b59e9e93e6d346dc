mod common;

use common::*;
use rforest::distortion::{min_distortion, SearchLimits};
use rforest::extension::{extend_one_point, extend_tuple, ExtensionCase};
use rforest::{ExtDist, PointRef, Rat};

fn v(i: usize) -> PointRef {
    PointRef::v(i)
}

#[test]
fn isolated_target_point_gives_infinite_case() {
    let one = Some(Rat::ONE);
    let z = Some(Rat::ZERO);
    let src = structure(segment(Rat::ONE), vec![anchor(v(0), v(1), r(1, 2))], vec![v(0), v(1)]);
    let th = hull(&[&[z, one, None], &[one, z, None], &[None, None, z]]);
    let tgt = structure(
        th,
        vec![
            anchor(v(0), v(1), r(1, 2)),
            anchor(v(0), v(2), r(7, 10)),
            anchor(v(2), v(0), r(2, 5)),
            anchor(v(2), v(2), r(1, 10)),
        ],
        vec![v(0), v(1), v(2)],
    );
    let res = extend_one_point(&src, &tgt, Rat::int(2), r(1, 4), SearchLimits::default()).unwrap();
    assert_eq!(res.case, ExtensionCase::InfiniteDistance);
    assert_eq!(res.rho_in, Rat::ZERO);
    assert_eq!(res.achieved_dis, Rat::ZERO);
    let s = &res.extended;
    let e = s.tuple[2];
    assert_eq!(s.distance(&s.tuple[0], &e), ExtDist::Inf);
    assert_eq!(s.eval(&s.tuple[0], &e), r(7, 10));
    assert_eq!(s.eval(&e, &s.tuple[0]), r(2, 5));
    assert_eq!(s.eval(&e, &e), r(1, 10));
    let (m, _, _) = min_distortion(s, &tgt, Rat::int(2), r(1, 4), SearchLimits::default()).unwrap();
    assert_eq!(m.rho, Rat::ZERO);
}

#[test]
fn graft_with_zero_rho() {
    let z = Some(Rat::ZERO);
    let src = structure(segment(Rat::ONE), vec![anchor(v(0), v(1), r(1, 4))], vec![v(0), v(1)]);
    // c hangs at distance 1/2 from the midpoint of [b0, b1].
    let th = hull(&[
        &[z, Some(Rat::ONE), Some(Rat::ONE)],
        &[Some(Rat::ONE), z, Some(Rat::ONE)],
        &[Some(Rat::ONE), Some(Rat::ONE), z],
    ]);
    let tgt = structure(th, vec![anchor(v(0), v(1), r(1, 4))], vec![v(0), v(1), v(2)]);
    let eps = r(1, 100);
    let res = extend_one_point(&src, &tgt, Rat::int(3), r(1, 4), SearchLimits::default()).unwrap();
    assert_eq!(res.case, ExtensionCase::Graft);
    assert_eq!(res.graft_length, Some(r(1, 2)));
    assert_eq!(res.rho_in, Rat::ZERO);
    assert!(res.achieved_dis <= eps, "achieved {}", res.achieved_dis);
    let s = &res.extended;
    assert_eq!(s.distance(&s.tuple[0], &s.tuple[2]), Rat::ONE.into());
    assert_eq!(s.distance(&s.tuple[1], &s.tuple[2]), Rat::ONE.into());
}

#[test]
fn source_equal_to_target_prefix() {
    let z = Some(Rat::ZERO);
    let th = hull(&[
        &[z, Some(Rat::ONE), Some(r(3, 2))],
        &[Some(Rat::ONE), z, Some(r(3, 2))],
        &[Some(r(3, 2)), Some(r(3, 2)), z],
    ]);
    let anchors = vec![anchor(v(0), v(2), r(1, 3)), anchor(v(2), v(1), r(1, 2))];
    let tgt = structure(th.clone(), anchors.clone(), vec![v(0), v(1), v(2)]);
    let src = structure(th, anchors, vec![v(0), v(1)]);
    let res = extend_one_point(&src, &tgt, Rat::int(4), r(1, 4), SearchLimits::default()).unwrap();
    assert!(res.achieved_dis <= r(1, 100), "{res:?} {:?}", res.sample_a);
}

#[test]
fn extend_tuple_two_steps_from_zero() {
    let z = Some(Rat::ZERO);
    let o = Some(Rat::ONE);
    let th = hull(&[
        &[z, Some(Rat::int(2)), o, None],
        &[Some(Rat::int(2)), z, o, None],
        &[o, o, z, None],
        &[None, None, None, z],
    ]);
    let tgt = structure(th, vec![anchor(v(2), v(3), r(1, 5))], vec![v(0), v(1), v(2), v(3)]);
    let src = structure(segment(Rat::int(2)), vec![], vec![v(0), v(1)]);
    let t = extend_tuple(&src, &tgt, Rat::int(3), r(1, 100), r(1, 2), SearchLimits::default()).unwrap();
    assert_eq!(t.steps.len(), 2);
    assert_eq!(t.rho_in, Rat::ZERO);
    assert!(t.within_bound(), "final {}", t.final_dis);
    let zero = extend_tuple(
        &src,
        &view2(&tgt),
        Rat::int(3),
        r(1, 100),
        r(1, 2),
        SearchLimits::default(),
    )
    .unwrap();
    assert!(zero.steps.is_empty());
    assert_eq!(zero.extended, src);
}

fn view2(t: &rforest::RfrStructure) -> rforest::RfrStructure {
    rforest::RfrStructure {
        hull: t.hull.clone(),
        pred: t.pred.clone(),
        tuple: t.tuple[..2].to_vec(),
    }
}
