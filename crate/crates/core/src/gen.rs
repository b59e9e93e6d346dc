//! Seeded fixture generators. All randomness in the crate flows through here
//! (and [`crate::hull::random_forest`]) from an explicit `u64` seed.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::distortion::Sample;
use crate::heart::HeartStructure;
use crate::hull::{build_hull, random_forest, ForestHull, PointRef};
use crate::metric::{ExtDist, FiniteMetric};
use crate::model::restrict;
use crate::predicate::{predicate_amalgam, random_predicate, Anchor, AnchorPredicate, RfrStructure};
use crate::rational::Rat;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random structure whose tuple is its generator list.
pub fn random_structure(
    rng: &mut ChaCha8Rng,
    n_generators: usize,
    n_components: usize,
    scale: Rat,
    n_anchors: usize,
    mesh: Rat,
) -> RfrStructure {
    let (_, hull) = random_forest(rng.gen(), n_generators, n_components, scale);
    let pred = random_predicate(&hull, rng, n_anchors, mesh);
    RfrStructure::generated(hull, pred).expect("generated predicate is consistent")
}

/// Each edge length moved by `−noise`, `0` or `+noise` (kept positive).
pub fn perturb_lengths(rng: &mut ChaCha8Rng, hull: &ForestHull, noise: Rat) -> ForestHull {
    let edges = hull
        .edges()
        .iter()
        .map(|e| {
            let step = Rat::int(rng.gen_range(-1..=1)) * noise;
            let len = if e.len + step > Rat::ZERO { e.len + step } else { e.len };
            (e.a, e.b, len)
        })
        .collect();
    ForestHull::from_tree(hull.labels().to_vec(), hull.n_vertices(), edges).expect("same tree shape")
}

/// Structure on `hull` whose predicate follows `model` (evaluated through the
/// generator correspondence) at vertex pairs, with values moved by up to `noise`
/// on a grid of `noise / 2`.
pub fn predicate_like(rng: &mut ChaCha8Rng, hull: &ForestHull, model: &RfrStructure, noise: Rat) -> AnchorPredicate {
    let verts: Vec<PointRef> = (0..hull.n_vertices()).map(PointRef::v).collect();
    let mut raw = Vec::new();
    for x in &verts {
        for y in &verts {
            let (mx, my) = (corresponding(hull, &model.hull, x), corresponding(hull, &model.hull, y));
            let (Some(mx), Some(my)) = (mx, my) else { continue };
            let base = model.eval(&mx, &my);
            if base == Rat::ONE && rng.gen_bool(0.7) {
                continue;
            }
            let jitter = noise * Rat::new(rng.gen_range(-2..=2), 2);
            raw.push(Anchor {
                p: *x,
                q: *y,
                v: (base + jitter).clamp_to(Rat::ZERO, Rat::ONE),
            });
        }
    }
    AnchorPredicate::from_inf_extension(hull, raw).expect("vertices are valid")
}

/// The point of `other` with the same generator coordinates as `p`, when the
/// generator pair is at finite distance there and the parameter makes sense.
fn corresponding(hull: &ForestHull, other: &ForestHull, p: &PointRef) -> Option<PointRef> {
    let (j, k, r) = hull.express_over(&hull.generator_points(), p)?;
    if j >= other.n_generators() || k >= other.n_generators() {
        return None;
    }
    other.interp(PointRef::v(j), r, PointRef::v(k)).ok()
}

/// Smallest integer `K ≥ 1` large for the tuple.
pub fn large_k(hull: &ForestHull, tuple: &[PointRef]) -> Rat {
    let mut k = Rat::ONE;
    for p in tuple {
        for q in tuple {
            if let ExtDist::Finite(d) = hull.distance(p, q) {
                k = k.max(d.floor() + Rat::ONE);
            }
        }
    }
    k
}

/// A one-point extension problem: `target` has tuple `b̄c` on its generators,
/// `source` is a perturbed copy of `⟨b̄⟩`.
#[derive(Clone, Debug)]
pub struct ExtensionInstance {
    pub source: RfrStructure,
    pub target: RfrStructure,
    pub k: Rat,
    pub mesh: Rat,
}

/// Instance with at most `max_generators` target generators and edge lengths
/// on a grid of `1/2`, meshed at `1/2`. Draws are repeated until both input
/// samples have at most `max_points` points.
pub fn extension_instance(seed: u64, max_generators: usize, max_points: usize) -> ExtensionInstance {
    let mut rng = rng(seed);
    loop {
        let inst = draw_extension_instance(&mut rng, max_generators);
        let n = inst.source.tuple.len();
        let sa = Sample::truncated(&inst.source, inst.k, inst.mesh).expect("finite tuple");
        let bbar = &inst.target.tuple[..n];
        let region = inst.target.hull.truncated_hull(bbar, inst.k).expect("finite tuple");
        let sb = Sample::build(&inst.target.hull, bbar, &region, inst.mesh, &[]);
        // One slot is kept for the projection of the new point.
        if sa.len() <= max_points && sb.len() < max_points {
            return inst;
        }
    }
}

fn draw_extension_instance(rng: &mut ChaCha8Rng, max_generators: usize) -> ExtensionInstance {
    let n_gen = rng.gen_range(2..=max_generators.max(2));
    let n_comp = rng.gen_range(1..=2);
    let mesh = Rat::new(1, 2);
    let (_, th) = random_forest(rng.gen(), n_gen, n_comp, Rat::int(2));
    let tpred = random_predicate(&th, rng, 3, mesh);
    let target = RfrStructure::generated(th, tpred).expect("consistent");
    let n = n_gen - 1;
    let base = build_hull(&target.hull.generator_metric().restrict(&(0..n).collect::<Vec<_>>()))
        .expect("restriction of a tree metric");
    let noise = if rng.gen_bool(0.3) { Rat::ZERO } else { Rat::new(1, 4) };
    let sh = if noise.is_zero() {
        base
    } else {
        perturb_lengths(rng, &base, noise)
    };
    let pred_noise = Rat::new(rng.gen_range(0..=2), 8);
    let spred = predicate_like(rng, &sh, &target, pred_noise);
    let source = RfrStructure::generated(sh, spred).expect("consistent");
    let k = large_k(&target.hull, &target.tuple);
    ExtensionInstance {
        source,
        target,
        k,
        mesh,
    }
}

/// Inputs to the independence theorem over `M`, cut out of one random
/// structure `W` on `m̄ b0 b1 c`. Each `C_i` is the free amalgam of `⟨MB_i⟩`
/// and `⟨MC⟩` over `⟨M⟩`, so `C_i ⫝_M B_i` and `C0 ≡_M C1`.
#[derive(Clone, Debug)]
pub struct AmalgamInstance {
    pub m: RfrStructure,
    pub b0: RfrStructure,
    pub b1: RfrStructure,
    pub c0: RfrStructure,
    pub c1: RfrStructure,
    pub eps: Rat,
}

pub fn amalgam_instance(seed: u64) -> AmalgamInstance {
    let mut rng = rng(seed);
    let p = rng.gen_range(0..=2);
    let eps = Rat::new(1, 2);
    let n_comp = rng.gen_range(1..=2);
    let w = random_structure(&mut rng, p + 3, n_comp, Rat::int(2), 4, eps);
    let m_idx: Vec<usize> = (0..p).collect();
    let with = |extra: usize| -> Vec<usize> { m_idx.iter().copied().chain([extra]).collect() };
    let sub = |idx: &[usize]| restrict(&w, idx).expect("sub-tuple of a valid structure");
    let (m, b0, b1, mc) = (sub(&m_idx), sub(&with(p)), sub(&with(p + 1)), sub(&with(p + 2)));
    let over = |b: &RfrStructure| -> RfrStructure {
        let (s, _) = predicate_amalgam(b, &b.tuple[..p], &mc, &mc.tuple[..p], eps, Rat::ZERO)
            .expect("restrictions of one structure agree on M");
        let tuple = s.tuple[..p + 1].iter().chain(s.tuple.last()).copied().collect();
        RfrStructure { tuple, ..s }
    };
    let (c0, c1) = (over(&b0), over(&b1));
    AmalgamInstance { m, b0, b1, c0, c1, eps }
}

/// Tuple `ā b c` where `b` and `c` hang from one point of `⟨A⟩` at equal
/// distance `D` and share a stem of length `stem` (`stem = 0` gives an
/// independent pair). With `far` both hang in a fresh component instead.
fn pair_over_a(rng: &mut ChaCha8Rng, stem_allowed: bool) -> (ForestHull, Vec<PointRef>, usize) {
    let a_len = rng.gen_range(1..=2);
    let (_, ah) = random_forest(rng.gen(), a_len, 1, Rat::int(2));
    let quarter = Rat::new(1, 4);
    let mesh = ah.full_mesh(Rat::new(1, 2));
    let pa = mesh[rng.gen_range(0..mesh.len())];
    let far = rng.gen_bool(0.1);
    let d = quarter * Rat::int(rng.gen_range(2..=8));
    let stem = if stem_allowed {
        quarter * Rat::int(rng.gen_range(1..(d / quarter).numer()))
    } else {
        Rat::ZERO
    };
    let n = a_len + 2;
    let mut dist = vec![vec![ExtDist::ZERO; n]; n];
    for i in 0..a_len {
        for j in 0..a_len {
            dist[i][j] = ah.distance(&PointRef::v(i), &PointRef::v(j));
        }
        let to_pair = if far {
            ExtDist::Inf
        } else {
            ah.distance(&PointRef::v(i), &pa) + ExtDist::Finite(d)
        };
        for x in [a_len, a_len + 1] {
            dist[i][x] = to_pair;
            dist[x][i] = to_pair;
        }
    }
    let split = ExtDist::Finite((d - stem) + (d - stem));
    dist[a_len][a_len + 1] = split;
    dist[a_len + 1][a_len] = split;
    let labels: Vec<String> = (0..a_len)
        .map(|i| format!("a{i}"))
        .chain(["b".into(), "c".into()])
        .collect();
    let (hull, pts) = crate::model::tuple_hull(&labels, &dist).expect("tree metric by construction");
    (hull, pts, a_len)
}

/// Structure with tuple `ā b c`, `b ≡_A c` at the metric level, and the pair
/// usually sharing a stem; returns it with `|ā|`.
pub fn unzip_instance(seed: u64) -> (RfrStructure, usize) {
    let mut rng = rng(seed);
    let (hull, tuple, a_len) = pair_over_a(&mut rng, true);
    let pred = random_predicate(&hull, &mut rng, 4, Rat::new(1, 4));
    (RfrStructure::new(hull, pred, tuple).expect("consistent"), a_len)
}

/// Two structures on one hull with an independent pair `b c` over `ā`: they
/// agree on the interpolation mesh of `⟨Ab⟩` and of `⟨Ac⟩` and differ on
/// cross pairs. `eps` is the mesh used for the agreement.
pub fn interpolate_instance(seed: u64, eps: Rat) -> (RfrStructure, RfrStructure, usize) {
    let mut rng = rng(seed);
    let (hull, tuple, a_len) = pair_over_a(&mut rng, false);
    let pred = random_predicate(&hull, &mut rng, 4, Rat::new(1, 4));
    let q0 = RfrStructure::new(hull.clone(), pred, tuple.clone()).expect("consistent");
    let side = |x: usize| -> Vec<PointRef> { tuple[..a_len].iter().copied().chain([tuple[x]]).collect() };
    let mut same_side: Vec<PointRef> = Vec::new();
    for x in [a_len, a_len + 1] {
        let t = side(x);
        let grid = crate::model::grid_for(&hull, &t, eps);
        same_side.extend(
            crate::model::mesh_coords(&hull, &t, grid)
                .iter()
                .map(|c| crate::model::locate(&hull, &t, c)),
        );
    }
    same_side.sort();
    same_side.dedup();
    let regions = [side(a_len), side(a_len + 1)].map(|t| hull.hull_of(&t).expect("valid tuple"));
    let member: Vec<[bool; 2]> = same_side
        .iter()
        .map(|p| [regions[0].contains(p), regions[1].contains(p)])
        .collect();
    let mut raw: Vec<Anchor> = Vec::new();
    for (x, mx) in same_side.iter().zip(&member) {
        for (y, my) in same_side.iter().zip(&member) {
            if (mx[0] && my[0]) || (mx[1] && my[1]) {
                raw.push(Anchor {
                    p: *x,
                    q: *y,
                    v: q0.eval(x, y),
                });
            }
        }
    }
    let pts = hull.full_mesh(Rat::new(1, 4));
    for _ in 0..4 {
        let (p, q) = (pts[rng.gen_range(0..pts.len())], pts[rng.gen_range(0..pts.len())]);
        // Never undercut a same-side value.
        let floor = raw
            .iter()
            .filter_map(|a| match hull.distance(&a.p, &p) + hull.distance(&a.q, &q) {
                ExtDist::Finite(d) => Some(a.v - d),
                ExtDist::Inf => None,
            })
            .max()
            .unwrap_or(Rat::ZERO);
        let v = Rat::new(rng.gen_range(0..=8), 8).max(floor);
        if v < Rat::ONE {
            raw.push(Anchor { p, q, v });
        }
    }
    let pred = AnchorPredicate::from_inf_extension(&hull, raw).expect("mesh points are valid");
    let q1 = RfrStructure::new(hull, pred, tuple).expect("consistent");
    (q0, q1, a_len)
}

/// Radii `k/n` for every `k ≤ n`, plus repeats so that orbits are
/// nontrivial and radius 1 occurs several times; `δ = 1/n`, shuffled.
pub fn heart_instance(seed: u64) -> HeartStructure {
    let mut rng = rng(seed);
    let n: i128 = rng.gen_range(3..=16);
    let mut radii: Vec<Rat> = (1..=n).map(|k| Rat::new(k, n)).collect();
    for _ in 0..rng.gen_range(1..=8) {
        radii.push(Rat::new(rng.gen_range(1..=n), n));
    }
    for _ in 0..rng.gen_range(1..=3) {
        radii.push(Rat::ONE);
    }
    radii.shuffle(&mut rng);
    HeartStructure::new(radii, Rat::new(1, n))
}

/// Connected tree metric on `n` points, one distance raised by `t` and then
/// every off-diagonal entry by `c ≥ t`. The constant shift keeps triangles
/// and pairing differences, so the returned quadruple is the only planted
/// 4-point failure source. Returns the metric and `[x, y, z, w]` with the
/// raised pair `x z`.
pub fn planted_violation(seed: u64, n: usize) -> (FiniteMetric, [usize; 4]) {
    let mut rng = rng(seed);
    let n = n.max(4);
    let (metric, _) = random_forest(rng.gen(), n, 1, Rat::int(4));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let [x, y, z, w] = [idx[0], idx[1], idx[2], idx[3]];
    let d = |i: usize, j: usize| metric.d(i, j).finite().expect("connected");
    // Pairings {xz,yw}, {xy,zw}, {xw,yz}; raise a pair of a largest one.
    let sums = [d(x, z) + d(y, w), d(x, y) + d(z, w), d(x, w) + d(y, z)];
    let top = (0..3)
        .max_by_key(|&i| (sums[i], std::cmp::Reverse(i)))
        .expect("three pairings");
    let quad = match top {
        0 => [x, y, z, w],
        1 => [x, w, y, z],
        _ => [x, y, w, z],
    };
    let t = Rat::new(rng.gen_range(1..=8), 8);
    let c = t + Rat::new(rng.gen_range(0..=4), 4);
    let mut dist = metric.matrix().to_vec();
    for (i, row) in dist.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            if i != j {
                *v = *v + ExtDist::Finite(c);
            }
        }
    }
    let (p, q) = (quad[0], quad[2]);
    dist[p][q] = dist[p][q] + ExtDist::Finite(t);
    dist[q][p] = dist[p][q];
    (
        FiniteMetric::new(metric.labels().to_vec(), dist).expect("square matrix"),
        quad,
    )
}
