mod common;

use num_rational::Ratio;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rforest::distortion::{dis_k, dis_metric_k, min_distortion, Correlation, SearchLimits, Tables};
use rforest::gen;
use rforest::heart::{is_automorphism, qf_fingerprint, scale_structure, HeartPoint};
use rforest::hull::random_forest;
use rforest::metric::{four_point, is_tree_embeddable};
use rforest::model::{order_witness, restrict, type_distance};
use rforest::predicate::{bounded_extension, check_one_one_lipschitz, mcshane_unary, predicate_amalgam, LipFn};
use rforest::{build_hull, Anchor, AnchorPredicate, ExtDist, FiniteMetric, PointRef, Rat, RfrStructure};

use common::r;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

fn ratio(x: Rat) -> Ratio<i128> {
    Ratio::new(x.numer(), x.denom())
}

/// Rationals on both sides of the small-operand fast path.
fn rat() -> impl Strategy<Value = Rat> {
    prop_oneof![
        (-1000i128..1000, 1i128..1000).prop_map(|(n, d)| Rat::new(n, d)),
        (-(1i128 << 40)..(1i128 << 40), 1i128..(1i128 << 40)).prop_map(|(n, d)| Rat::new(n, d)),
        (-(1i128 << 31)..(1i128 << 31), (1i128 << 30)..(1i128 << 31)).prop_map(|(n, d)| Rat::new(n, d)),
    ]
}

proptest! {
    #![proptest_config(config(2000))]

    #[test]
    fn rational_ops_match_reference(a in rat(), b in rat()) {
        prop_assert_eq!(ratio(a + b), ratio(a) + ratio(b));
        prop_assert_eq!(ratio(a - b), ratio(a) - ratio(b));
        prop_assert_eq!(ratio(a * b), ratio(a) * ratio(b));
        prop_assert_eq!(a.cmp(&b), ratio(a).cmp(&ratio(b)));
        if !b.is_zero() {
            prop_assert_eq!(ratio(a / b), ratio(a) / ratio(b));
        }
        prop_assert_eq!(a.to_string().parse::<Rat>().unwrap(), a);
    }
}

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn four_point_pairing_symmetry(entries in proptest::collection::vec(0i128..12, 6)) {
        let e = |i: usize| ExtDist::Finite(Rat::int(entries[i]));
        let z = ExtDist::Finite(Rat::ZERO);
        let m = FiniteMetric::from_matrix(vec![
            vec![z, e(0), e(1), e(2)],
            vec![e(0), z, e(3), e(4)],
            vec![e(1), e(3), z, e(5)],
            vec![e(2), e(4), e(5), z],
        ])
        .unwrap();
        let base = four_point(&m, 0, 1, 2, 3).unwrap();
        for (x, y, zz, w) in [(1, 0, 2, 3), (0, 1, 3, 2), (2, 3, 0, 1)] {
            prop_assert_eq!(four_point(&m, x, y, zz, w).unwrap(), base);
        }
    }

    #[test]
    fn generated_metrics_classify_correctly(seed in any::<u64>(), n in 4usize..=12) {
        let (m, _) = random_forest(seed, n, 1 + (seed % 3) as usize, Rat::int(4));
        prop_assert!(is_tree_embeddable(&m).unwrap().embeddable);
        let (m, _) = gen::planted_violation(seed, n);
        let t = is_tree_embeddable(&m).unwrap();
        let w = t.witness.unwrap();
        prop_assert!(!t.embeddable && !four_point(&m, w[0], w[1], w[2], w[3]).unwrap());
    }

    #[test]
    fn interp_and_projection(seed in any::<u64>(), n in 2usize..=6, t in 0i128..=12) {
        let mut rng = gen::rng(seed);
        let (_, hull) = random_forest(seed, n, 1 + (seed % 2) as usize, Rat::int(3));
        let mesh = hull.full_mesh(r(1, 4));
        let p = *mesh.choose(&mut rng).unwrap();
        let q = *mesh.iter().filter(|q| hull.distance(&p, q).is_finite()).collect::<Vec<_>>().choose(&mut rng).unwrap();
        let rr = r(t, 12);
        let m = hull.interp(p, rr, *q).unwrap();
        let (dpm, dpq) = (hull.distance(&p, &m), hull.distance(&p, q));
        prop_assert_eq!(dpm + hull.distance(&m, q), dpq);
        prop_assert_eq!(dpm, ExtDist::Finite(rr * dpq.finite().unwrap()));

        let gens: Vec<PointRef> = hull.generator_points().into_iter().filter(|_| rng.gen_bool(0.5)).collect();
        let sub = hull.hull_of(&gens).unwrap();
        if let Ok(proj) = hull.project(&p, &sub) {
            prop_assert!(sub.contains(&proj));
            for s in hull.mesh(&sub, r(1, 8)) {
                prop_assert!(hull.distance(&p, &proj) <= hull.distance(&p, &s));
            }
        } else {
            prop_assert_eq!(hull.distance_to_region(&p, &sub), ExtDist::Inf);
        }
    }

    #[test]
    fn adding_an_anchor_never_raises_the_predicate(seed in any::<u64>()) {
        let mut rng = gen::rng(seed);
        let n = rng.gen_range(1..=4);
        let s = gen::random_structure(&mut rng, n, 1, Rat::int(2), 3, r(1, 4));
        let mesh = s.hull.full_mesh(r(1, 4));
        let (p, q) = (*mesh.choose(&mut rng).unwrap(), *mesh.choose(&mut rng).unwrap());
        let v = s.eval(&p, &q) * r(rng.gen_range(0..=4), 4);
        let mut anchors = s.pred.anchors().to_vec();
        anchors.push(Anchor { p, q, v });
        let more = AnchorPredicate::from_inf_extension(&s.hull, anchors).unwrap();
        prop_assert_eq!(more.eval(&s.hull, &p, &q), v);
        for x in &mesh {
            for y in &mesh {
                prop_assert!(more.eval(&s.hull, x, y) <= s.eval(x, y));
            }
        }
    }

    #[test]
    fn mcshane_identity_correlation_reproduces_f(seed in any::<u64>()) {
        let mut rng = gen::rng(seed);
        let (_, hull) = random_forest(seed, rng.gen_range(1..=4), rng.gen_range(1..=2), Rat::int(2));
        let pts = hull.full_mesh(r(1, 2));
        let (b0, v) = (*pts.choose(&mut rng).unwrap(), r(rng.gen_range(0..=8), 8));
        let f: Vec<Rat> = pts.iter().map(|x| (hull.distance(x, &b0) + v).clamped(Rat::ONE)).collect();
        let pairs: Vec<(PointRef, usize)> = pts.iter().copied().zip(0..).collect();
        let g = mcshane_unary(&f, &pairs);
        for (i, x) in pts.iter().enumerate() {
            prop_assert_eq!(g.eval(|a, b| hull.distance(a, b), x), f[i]);
        }
    }

    #[test]
    fn bounded_extension_attains_r_exactly(seed in any::<u64>()) {
        let mut rng = gen::rng(seed);
        let (_, hull) = random_forest(seed, rng.gen_range(1..=4), 1, Rat::int(2));
        let mesh = hull.full_mesh(r(1, 4));
        let d = |x: &PointRef, y: &PointRef| hull.distance(x, y);
        let mut lip = || LipFn::new((0..2).map(|_| (*mesh.choose(&mut rng).unwrap(), r(rng.gen_range(0..=8), 8))).collect());
        let (g, f) = (lip(), lip());
        let a0: Vec<(PointRef, Rat)> = mesh.iter().step_by(2).map(|x| (*x, f.eval(d, x))).collect();
        let (h, rr) = bounded_extension(&a0, &g, d);
        let sup = mesh.iter().map(|x| (h.eval(d, x) - g.eval(d, x)).abs()).max().unwrap();
        prop_assert_eq!(sup, rr);
        for (x, fx) in &a0 {
            prop_assert_eq!(h.eval(d, x), *fx);
        }
    }

    #[test]
    fn self_amalgam_is_one_one_lipschitz(seed in any::<u64>()) {
        let mut rng = gen::rng(seed);
        let n = rng.gen_range(2..=4);
        let s = gen::random_structure(&mut rng, n, 1, Rat::int(2), 3, r(1, 4));
        let base: Vec<PointRef> = s.tuple[..rng.gen_range(1..s.tuple.len())].to_vec();
        let (q, _) = predicate_amalgam(&s, &base, &s, &base, r(1, 4), Rat::ZERO).unwrap();
        prop_assert!(check_one_one_lipschitz(&q, r(1, 4)).pass);
    }
}

fn small_structure(rng: &mut rand_chacha::ChaCha8Rng) -> RfrStructure {
    let n = rng.gen_range(1..=3);
    gen::random_structure(rng, n, 1, Rat::int(1), 2, r(1, 2))
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn min_distortion_bounds_and_symmetry(seed in any::<u64>()) {
        let mut rng = gen::rng(seed);
        let a = small_structure(&mut rng);
        let mut b = small_structure(&mut rng);
        b.tuple.truncate(a.tuple.len());
        let mut a = a;
        a.tuple.truncate(b.tuple.len());
        let (k, eps) = (Rat::int(3), r(1, 2));
        let (ab, sa, sb) = min_distortion(&a, &b, k, eps, SearchLimits::default()).unwrap();
        let (ba, _, _) = min_distortion(&b, &a, k, eps, SearchLimits::default()).unwrap();
        prop_assert_eq!(ab.rho, ba.rho);

        let (ta, tb) = (Tables::new(&a, &sa), Tables::new(&b, &sb));
        let t = ta.n_pinned;
        let mut pairs: Vec<(usize, usize)> = (0..t).map(|i| (i, i)).collect();
        pairs.extend((t..ta.len()).map(|i| (i, rng.gen_range(0..tb.len()))));
        pairs.extend((t..tb.len()).map(|j| (rng.gen_range(0..ta.len()), j)));
        let o = Correlation::new(pairs, t);
        prop_assert!(ab.rho <= dis_k(&o, &ta, &tb, k).dis);
        prop_assert!(dis_metric_k(&o, &ta, &tb, Rat::int(2)) <= dis_metric_k(&o, &ta, &tb, k));
    }

    #[test]
    fn relabelled_copy_has_zero_distortion(seed in any::<u64>()) {
        let mut rng = gen::rng(seed);
        let s = small_structure(&mut rng);
        let mut perm: Vec<usize> = (0..s.tuple.len()).collect();
        perm.shuffle(&mut rng);
        let shuffled = restrict(&s, &perm).unwrap();
        let mut tuple = vec![shuffled.tuple[0]; perm.len()];
        for (i, &p) in perm.iter().enumerate() {
            tuple[p] = shuffled.tuple[i];
        }
        let copy = RfrStructure { tuple, ..shuffled };
        let (res, _, _) = min_distortion(&s, &copy, Rat::int(3), r(1, 2), SearchLimits::default()).unwrap();
        prop_assert_eq!(res.rho, Rat::ZERO);
    }

    #[test]
    fn type_distance_is_a_pseudometric(seed in any::<u64>()) {
        let mut rng = gen::rng(seed);
        let (_, hull) = random_forest(seed, rng.gen_range(2..=5), rng.gen_range(1..=2), Rat::int(2));
        let a: Vec<PointRef> = hull.generator_points().into_iter().take(rng.gen_range(1..=2)).collect();
        let mesh = hull.full_mesh(r(1, 4));
        let b: Vec<PointRef> = (0..3).map(|_| *mesh.choose(&mut rng).unwrap()).collect();
        let td = |x: usize, y: usize| type_distance(&hull, &a, &b[x], &b[y]).unwrap();
        prop_assert_eq!(td(0, 0), ExtDist::Finite(Rat::ZERO));
        prop_assert_eq!(td(0, 1), td(1, 0));
        prop_assert!(td(0, 2) <= td(0, 1) + td(1, 2));
        prop_assert!(td(0, 1) <= hull.distance(&b[0], &b[1]));
    }

    #[test]
    fn order_witness_pattern(n in 1usize..=6) {
        let s = order_witness(n);
        prop_assert!(check_one_one_lipschitz(&s, r(1, 4)).pass);
        for i in 0..n {
            for j in 0..n {
                let v = s.eval(&s.tuple[i], &s.tuple[n + j]);
                prop_assert_eq!(v, if i >= j { Rat::ONE } else { Rat::ZERO });
            }
        }
    }

    #[test]
    fn heart_invariants(seed in any::<u64>(), s in 1i128..=8, t in 1i128..=8) {
        let mut rng = gen::rng(seed);
        let m = gen::heart_instance(seed);
        let n = m.len();
        let params: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.2)).collect();

        // A random permutation inside each radius class, fixing the params.
        let mut perm: Vec<usize> = (0..n).collect();
        let mut free: Vec<usize> = (0..n).filter(|i| !params.contains(i)).collect();
        free.sort_by_key(|&i| m.radii[i]);
        for class in free.chunk_by(|&x, &y| m.radii[x] == m.radii[y]) {
            let mut image = class.to_vec();
            image.shuffle(&mut rng);
            for (&x, &y) in class.iter().zip(&image) {
                perm[x] = y;
            }
        }
        prop_assert!(is_automorphism(&m, &perm));
        let ps: Vec<HeartPoint> = params.iter().map(|&i| HeartPoint::Elem(i)).collect();
        let tuple: Vec<usize> = (0..3).map(|_| rng.gen_range(0..n)).collect();
        let fp = |tup: Vec<usize>| qf_fingerprint(&m, &tup.into_iter().map(HeartPoint::Elem).collect::<Vec<_>>(), &ps).unwrap();
        prop_assert_eq!(fp(tuple.clone()), fp(tuple.iter().map(|&i| perm[i]).collect()));

        let (s, t) = (r(s, 8), r(t, 8));
        prop_assert_eq!(
            scale_structure(&scale_structure(&m, s).unwrap(), t).unwrap(),
            scale_structure(&m, s * t).unwrap()
        );
        let pts = m.points();
        for _ in 0..50 {
            let [x, y, z] = [0; 3].map(|_| *pts.choose(&mut rng).unwrap());
            prop_assert!(m.distance(x, z) <= m.distance(x, y).max(m.distance(y, z)));
        }
    }

    #[test]
    fn rebuilt_hull_matches(seed in any::<u64>(), n in 0usize..=8) {
        let (metric, hull) = random_forest(seed, n, 1 + (seed % 3) as usize, Rat::int(4));
        prop_assert_eq!(build_hull(&metric).unwrap(), hull.clone());
        prop_assert_eq!(build_hull(&hull.generator_metric()).unwrap(), hull);
    }
}
