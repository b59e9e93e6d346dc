mod common;

use common::{anchor, r, structure};
use rforest::gen::{self, amalgam_instance};
use rforest::hull::build_hull;
use rforest::model::{
    fingerprint_on_grid, independence_amalgam, independent, interpolate_path, order_witness, pointed_iso_check,
    restrict, type_distance, unzip_path, ModelError,
};
use rforest::predicate::check_one_one_lipschitz;
use rforest::{ExtDist, FiniteMetric, ForestHull, PointRef, Rat, RfrStructure};

/// Matrix in units of `1/den`; negative entries are INF.
fn scaled(rows: &[&[i128]], den: i128, labels: &[&str]) -> ForestHull {
    let dist = rows
        .iter()
        .map(|row| {
            row.iter()
                .map(|&x| if x < 0 { ExtDist::Inf } else { r(x, den).into() })
                .collect()
        })
        .collect();
    build_hull(&FiniteMetric::new(labels.iter().map(|s| s.to_string()).collect(), dist).unwrap()).unwrap()
}

fn v(i: usize) -> PointRef {
    PointRef::v(i)
}

fn k() -> Rat {
    Rat::int(10)
}

/// `a` with `b` and `c` at distance 1 sharing a stem of length 1/2.
fn stem_structure() -> RfrStructure {
    let h = scaled(&[&[0, 2, 2], &[2, 0, 2], &[2, 2, 0]], 2, &["a", "b", "c"]);
    let mid = h.interp(v(0), r(1, 4), v(1)).unwrap();
    structure(
        h,
        vec![anchor(v(1), v(2), r(1, 5)), anchor(mid, v(0), r(1, 2))],
        vec![v(0), v(1), v(2)],
    )
}

#[test]
fn relabelled_copy_is_isomorphic() {
    let s = stem_structure();
    let h = scaled(&[&[0, 2, 2], &[2, 0, 2], &[2, 2, 0]], 2, &["x", "y", "z"]);
    let mid = h.interp(v(0), r(1, 4), v(1)).unwrap();
    let t = structure(
        h,
        vec![anchor(v(1), v(2), r(1, 5)), anchor(mid, v(0), r(1, 2))],
        vec![v(0), v(1), v(2)],
    );
    let rep = pointed_iso_check(&s, &t, r(1, 8));
    assert!(rep.iso);
    assert_eq!(rep.max_gap, Some(Rat::ZERO));
}

#[test]
fn changed_anchor_is_detected() {
    let s = stem_structure();
    let t = structure(s.hull.clone(), vec![anchor(v(1), v(2), r(7, 10))], s.tuple.clone());
    let rep = pointed_iso_check(&s, &t, r(1, 8));
    assert!(!rep.iso);
    assert!(rep.max_gap.unwrap() >= r(1, 2));
    assert!(rep.witness.is_some());
}

#[test]
fn different_distances_short_circuit() {
    let s = stem_structure();
    let h = scaled(&[&[0, 2, 2], &[2, 0, 3], &[2, 3, 0]], 2, &["a", "b", "c"]);
    let t = structure(h, vec![], vec![v(0), v(1), v(2)]);
    let rep = pointed_iso_check(&s, &t, r(1, 8));
    assert!(!rep.iso);
    assert_eq!(rep.distance_mismatch, Some((1, 2)));
    assert_eq!(rep.max_gap, None);
}

#[test]
fn restriction_preserves_type() {
    for seed in 0..10 {
        let inst = amalgam_instance(seed);
        let s = &inst.c0;
        let back = restrict(s, &(0..s.tuple.len()).collect::<Vec<_>>()).unwrap();
        assert_eq!(
            pointed_iso_check(&back, s, r(1, 4)).max_gap,
            Some(Rat::ZERO),
            "seed {seed}"
        );
    }
}

#[test]
fn finer_grid_refines_fingerprint() {
    let s = stem_structure();
    let (f, g) = (fingerprint_on_grid(&s, 3), fingerprint_on_grid(&s, 6));
    for (x, cx) in f.coords.iter().enumerate() {
        for (y, cy) in f.coords.iter().enumerate() {
            let gx = g.coords.iter().position(|c| c == cx).unwrap();
            let gy = g.coords.iter().position(|c| c == cy).unwrap();
            assert_eq!(f.values[x][y], g.values[gx][gy]);
        }
    }
}

#[test]
fn independence_examples() {
    // a–b in one component, c alone.
    let h = scaled(&[&[0, 1, -1], &[1, 0, -1], &[-1, -1, 0]], 1, &["a", "b", "c"]);
    assert!(independent(&h, &[v(0)], &[v(1)], &[v(2)]).unwrap());
    assert!(!independent(&h, &[v(0)], &[v(1)], &[v(1)]).unwrap());

    // a0, a1, b, c all at distance 1 from one centre.
    let h = scaled(
        &[&[0, 2, 2, 2], &[2, 0, 2, 2], &[2, 2, 0, 2], &[2, 2, 2, 0]],
        1,
        &["a0", "a1", "b", "c"],
    );
    let (a, b, c) = ([v(0), v(1)], [v(0), v(1), v(2)], [v(0), v(1), v(3)]);
    let both = h.hull_of(&b).unwrap().intersection(&h, &h.hull_of(&c).unwrap());
    assert_eq!(both, h.segment(&v(0), &v(1)).unwrap());
    assert!(independent(&h, &a, &[v(2)], &[v(3)]).unwrap());

    assert!(!independent(&stem_structure().hull, &[v(0)], &[v(1)], &[v(2)]).unwrap());
}

/// Least `d(b0′, b1′)` over trees where `b_i′` hangs at distance `leg_i`
/// from the point of `A = {a0, a1}` at distance `at_i` from `a0`, and the two
/// legs may share a stem of any length on a grid of `1/100`.
fn placement_oracle(seg: Rat, at: [Rat; 2], leg: [Rat; 2]) -> Rat {
    let share_max = if at[0] == at[1] { leg[0].min(leg[1]) } else { Rat::ZERO };
    let mut best: Option<Rat> = None;
    let mut s = Rat::ZERO;
    while s <= share_max {
        let to = |i: usize, x: Rat| (x - at[i]).abs() + leg[i];
        let gap = if at[0] == at[1] {
            leg[0] + leg[1] - s - s
        } else {
            leg[0] + (at[0] - at[1]).abs() + leg[1]
        };
        let dist = vec![
            vec![Rat::ZERO, seg, to(0, Rat::ZERO), to(1, Rat::ZERO)],
            vec![seg, Rat::ZERO, to(0, seg), to(1, seg)],
            vec![to(0, Rat::ZERO), to(0, seg), Rat::ZERO, gap],
            vec![to(1, Rat::ZERO), to(1, seg), gap, Rat::ZERO],
        ];
        let h = build_hull(
            &FiniteMetric::from_matrix(
                dist.into_iter()
                    .map(|row| row.into_iter().map(ExtDist::Finite).collect())
                    .collect(),
            )
            .unwrap(),
        )
        .unwrap();
        // The placement must realise the requested distance to A.
        let region = h.hull_of(&[v(0), v(1)]).unwrap();
        assert_eq!(h.distance_to_region(&v(2), &region), leg[0].into());
        assert_eq!(h.distance_to_region(&v(3), &region), leg[1].into());
        let d = h.distance(&v(2), &v(3)).finite().unwrap();
        best = Some(best.map_or(d, |b| b.min(d)));
        s += r(1, 100);
    }
    best.unwrap()
}

#[test]
fn type_distance_same_projection() {
    let expected = placement_oracle(Rat::int(2), [Rat::ONE; 2], [r(3, 10), r(1, 2)]);
    assert_eq!(expected, r(1, 5));
    // a0 —1— m —1— a1 with b0, b1 hanging from m.
    let h = scaled(
        &[&[0, 20, 13, 15], &[20, 0, 13, 15], &[13, 13, 0, 8], &[15, 15, 8, 0]],
        10,
        &["a0", "a1", "b0", "b1"],
    );
    assert_eq!(type_distance(&h, &[v(0), v(1)], &v(2), &v(3)).unwrap(), expected.into());
    assert_eq!(type_distance(&h, &[v(0), v(1)], &v(2), &v(2)).unwrap(), ExtDist::ZERO);
}

#[test]
fn type_distance_different_projections() {
    let expected = placement_oracle(Rat::int(2), [r(1, 2), r(3, 2)], [r(3, 10), r(1, 2)]);
    assert_eq!(expected, r(9, 5));
    let h = scaled(
        &[&[0, 20, 8, 20], &[20, 0, 18, 10], &[8, 18, 0, 18], &[20, 10, 18, 0]],
        10,
        &["a0", "a1", "b0", "b1"],
    );
    assert_eq!(type_distance(&h, &[v(0), v(1)], &v(2), &v(3)).unwrap(), expected.into());
}

#[test]
fn type_distance_infinite_cases() {
    let h = scaled(&[&[0, -1, -1], &[-1, 0, -1], &[-1, -1, 0]], 1, &["a", "b", "c"]);
    assert_eq!(type_distance(&h, &[v(0)], &v(1), &v(2)).unwrap(), ExtDist::ZERO);
    let h = scaled(&[&[0, 1, -1], &[1, 0, -1], &[-1, -1, 0]], 1, &["a", "b", "c"]);
    assert_eq!(type_distance(&h, &[v(0)], &v(1), &v(2)).unwrap(), ExtDist::Inf);
}

#[test]
fn order_witness_examples() {
    let w = order_witness(1);
    assert_eq!(w.eval(&v(0), &v(1)), Rat::ONE);
    assert_eq!(w.eval(&v(1), &v(0)), Rat::ZERO);
    let w = order_witness(2);
    assert_eq!(w.eval(&v(0), &v(3)), Rat::ZERO);
    assert_eq!(w.eval(&v(1), &v(2)), Rat::ONE);
    let w = order_witness(3);
    assert_eq!(w.tuple.len(), 6);
    for i in 0..3 {
        for j in 0..3 {
            assert_eq!(w.eval(&v(i), &v(3 + j)), if i >= j { Rat::ONE } else { Rat::ZERO });
        }
    }
    assert!(check_one_one_lipschitz(&w, Rat::ONE).pass);
}

#[test]
fn unzip_constant_cases() {
    let h = scaled(&[&[0, 1, 1], &[1, 0, 2], &[1, 2, 0]], 1, &["a", "b", "c"]);
    let s = structure(h, vec![anchor(v(1), v(2), r(1, 3))], vec![v(0), v(1), v(2)]);
    let p = unzip_path(&s, 1, 4, k(), r(1, 4)).unwrap();
    assert!(p.constant && p.end_match && p.start_independent);
    assert_eq!(p.max_rho, Rat::ZERO);

    let h = scaled(&[&[0, -1, -1], &[-1, 0, 1], &[-1, 1, 0]], 1, &["a", "b", "c"]);
    let s = structure(h, vec![], vec![v(0), v(1), v(2)]);
    let p = unzip_path(&s, 1, 4, k(), r(1, 4)).unwrap();
    assert!(p.constant && p.end_match);
}

#[test]
fn unzip_descends_the_stem() {
    let s = stem_structure();
    let p = unzip_path(&s, 1, 4, k(), r(1, 8)).unwrap();
    assert!(!p.constant);
    assert_eq!(p.params, vec![Rat::ZERO, r(1, 8), r(1, 4), r(3, 8), r(1, 2)]);
    assert_eq!(p.max_deviation, Rat::ZERO);
    assert!(p.start_independent && p.end_match);
    for (i, step) in p.steps.iter().enumerate() {
        assert!(check_one_one_lipschitz(step, r(1, 8)).pass);
        // b_r and c_r branch at distance r from a.
        let dbc = step.distance(&step.tuple[1], &step.tuple[2]).finite().unwrap();
        assert_eq!(dbc, Rat::int(2) - p.params[i] - p.params[i]);
    }
    assert_eq!(p.consecutive_rho.len(), 4);
}

#[test]
fn unzip_rejects_unequal_types() {
    let h = scaled(&[&[0, 1, 2], &[1, 0, 3], &[2, 3, 0]], 1, &["a", "b", "c"]);
    let s = structure(h, vec![], vec![v(0), v(1), v(2)]);
    assert!(matches!(
        unzip_path(&s, 1, 2, k(), r(1, 4)),
        Err(ModelError::Precondition(_))
    ));
    // b and c hang from the midpoint of [a0, a1] sharing a stem of 1/4.
    let h = scaled(
        &[&[0, 8, 6, 6], &[8, 0, 6, 6], &[6, 6, 0, 2], &[6, 6, 2, 0]],
        4,
        &["a0", "a1", "b", "c"],
    );
    let s = structure(h, vec![], vec![v(0), v(1), v(2), v(3)]);
    assert!(unzip_path(&s, 2, 2, k(), r(1, 4)).is_ok());
    let h = scaled(
        &[&[0, 2, 1, 2], &[2, 0, 2, 1], &[1, 2, 0, 2], &[2, 1, 2, 0]],
        1,
        &["a0", "a1", "b", "c"],
    );
    let s = structure(h, vec![], vec![v(0), v(1), v(2), v(3)]);
    assert!(matches!(
        unzip_path(&s, 2, 2, k(), r(1, 4)),
        Err(ModelError::Precondition(_))
    ));
}

fn split_pair(value: Rat) -> RfrStructure {
    let h = scaled(&[&[0, 1, 1], &[1, 0, 2], &[1, 2, 0]], 1, &["a", "b", "c"]);
    structure(h, vec![anchor(v(1), v(2), value)], vec![v(0), v(1), v(2)])
}

#[test]
fn interpolate_examples() {
    let (q0, q1) = (split_pair(r(1, 5)), split_pair(r(4, 5)));
    let p = interpolate_path(&q0, &q1, 1, 2, k(), r(1, 4)).unwrap();
    assert!(p.start_match && p.end_match);
    assert_eq!(p.max_deviation, Rat::ZERO);
    let mid = &p.steps[1];
    assert_eq!(mid.eval(&mid.tuple[1], &mid.tuple[2]), r(1, 2));
    assert!(check_one_one_lipschitz(mid, r(1, 4)).pass);
    assert_eq!(p.consecutive_rho, vec![r(3, 10), r(3, 10)]);

    let p = interpolate_path(&q0, &q0, 1, 3, k(), r(1, 4)).unwrap();
    assert!(p
        .steps
        .iter()
        .all(|s| pointed_iso_check(s, &q0, r(1, 4)).max_gap == Some(Rat::ZERO)));
    assert!(interpolate_path(&stem_structure(), &q0, 1, 2, k(), r(1, 4)).is_err());
}

#[test]
fn amalgam_of_fresh_points() {
    let iso = |n: usize| {
        let rows: Vec<Vec<i128>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0 } else { -1 }).collect())
            .collect();
        let refs: Vec<&[i128]> = rows.iter().map(|r| r.as_slice()).collect();
        scaled(&refs, 1, &["x", "y"][..n])
    };
    let m = structure(ForestHull::empty(), vec![], vec![]);
    let b0 = structure(iso(1), vec![anchor(v(0), v(0), r(3, 5))], vec![v(0)]);
    let b1 = structure(iso(1), vec![anchor(v(0), v(0), r(1, 5))], vec![v(0)]);
    let c0 = structure(
        iso(2),
        vec![
            anchor(v(0), v(0), r(3, 5)),
            anchor(v(0), v(1), r(3, 10)),
            anchor(v(1), v(1), r(2, 5)),
        ],
        vec![v(0), v(1)],
    );
    let c1 = structure(
        iso(2),
        vec![
            anchor(v(0), v(0), r(1, 5)),
            anchor(v(1), v(0), r(7, 10)),
            anchor(v(1), v(1), r(2, 5)),
        ],
        vec![v(0), v(1)],
    );
    let out = independence_amalgam(&m, &b0, &b1, &c0, &c1, r(1, 4)).unwrap();
    let s = &out.structure;
    let t = &s.tuple;
    assert_eq!(s.hull.n_components(), 3);
    assert_eq!(s.eval(&t[0], &t[2]), r(3, 10));
    assert_eq!(s.eval(&t[2], &t[1]), r(7, 10));
    assert_eq!(s.eval(&t[2], &t[2]), r(2, 5));
    assert_eq!(s.eval(&t[0], &t[1]), Rat::ONE);
    assert!(out.restriction_match == [true, true] && out.lipschitz.pass && out.glue_pass && out.base_independent);
}

#[test]
fn amalgam_with_c_inside_m() {
    let h = scaled(&[&[0, 1, 2], &[1, 0, 1], &[2, 1, 0]], 1, &["m0", "m1", "b"]);
    let pred = vec![anchor(v(0), v(1), r(1, 4))];
    let m = structure(h.clone(), pred.clone(), vec![v(0), v(1)]);
    let b = structure(h.clone(), pred.clone(), vec![v(0), v(1), v(2)]);
    let c = structure(h, pred, vec![v(0), v(1), v(2), v(0)]);
    let out = independence_amalgam(&m, &b, &b, &c, &c, r(1, 4)).unwrap();
    let t = &out.structure.tuple;
    assert_eq!(t[4], t[0]);
    assert!(out.restriction_match == [true, true] && out.lipschitz.pass && out.glue_pass);
}

#[test]
fn amalgam_random_instances() {
    for seed in 0..8 {
        let inst = amalgam_instance(seed);
        let out = independence_amalgam(&inst.m, &inst.b0, &inst.b1, &inst.c0, &inst.c1, inst.eps).unwrap();
        assert!(out.base_independent, "seed {seed}");
        assert_eq!(
            out.restriction_match,
            [true, true],
            "seed {seed}: gaps {:?}",
            out.restriction_gap
        );
        assert!(out.lipschitz.pass && out.glue_pass, "seed {seed}");
    }
}

#[test]
fn amalgam_rejects_dependent_c() {
    let s = stem_structure();
    let m = restrict(&s, &[0]).unwrap();
    let b = restrict(&s, &[0, 1]).unwrap();
    let err = independence_amalgam(&m, &b, &b, &s, &s, r(1, 4)).unwrap_err();
    assert!(matches!(err, ModelError::Precondition(ref m) if m.contains("independent")));
}

/// Frozen from a 100-seed sweep at `m ∈ {4, 8, 16}`: `max ρ_K · m` peaked at
/// 7/2 for unzip and 1 for interpolation.
#[test]
fn consecutive_rho_decays_like_one_over_m() {
    let (eps, k) = (r(1, 4), Rat::int(16));
    for seed in 0..20 {
        let (s, a) = gen::unzip_instance(seed);
        let (q0, q1, b) = gen::interpolate_instance(seed, eps);
        for m in [4, 8] {
            let steps = Rat::int(m as i128);
            let u = unzip_path(&s, a, m, k, eps).unwrap();
            assert!(
                u.max_rho * steps <= r(7, 2),
                "unzip seed {seed}, m {m}: ρ {}",
                u.max_rho
            );
            let i = interpolate_path(&q0, &q1, b, m, k, eps).unwrap();
            assert!(
                i.max_rho * steps <= Rat::ONE,
                "interpolate seed {seed}, m {m}: ρ {}",
                i.max_rho
            );
            assert!(u.start_match && u.end_match && i.start_match && i.end_match);
        }
    }
}
