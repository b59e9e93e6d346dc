//! Type-level operations on finite structures: fingerprints, independence,
//! the independence-theorem amalgam, type paths and the `∂`-metric.
//!
//! A type over a tuple is represented by its fingerprint: the tuple's distance
//! matrix plus the predicate on every pair of interpolation points
//! `a_j⌢s⌢a_k` with `s` on a grid `i/N`. Structures built here from mesh
//! values use exactly those points as anchors, so a structure reproduces its
//! intended fingerprint whenever the intended values are 1-1-Lipschitz.

use serde::Serialize;
use thiserror::Error;

use crate::distortion::{dis_k, Correlation, DistortionError, Sample, Tables};
use crate::hull::{build_hull, free_amalgam, ForestHull, HullError, PointRef, SubHull};
use crate::metric::{ExtDist, FiniteMetric};
use crate::predicate::{
    check_one_one_lipschitz, glue_check, predicate_amalgam, Anchor, AnchorPredicate, LipReport, PredicateError,
    RfrStructure,
};
use crate::rational::{common_denominator, Rat};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error(transparent)]
    Hull(#[from] HullError),
    #[error(transparent)]
    Predicate(#[from] PredicateError),
    #[error(transparent)]
    Distortion(#[from] DistortionError),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("expected a tuple of length {expected}, got {got}")]
    TupleLength { expected: usize, got: usize },
    #[error("step count must be at least 1")]
    NoSteps,
}

fn precondition(msg: impl Into<String>) -> ModelError {
    ModelError::Precondition(msg.into())
}

/// The point `a_j⌢s⌢a_k` of a tuple.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct MeshCoord {
    pub j: usize,
    pub k: usize,
    pub s: Rat,
}

/// Tuple entries first, then for each finite-distance pair `j < k` the
/// interior grid points `i/grid`. The list depends only on the tuple length
/// and which pairs are at finite distance.
pub fn mesh_coords(hull: &ForestHull, tuple: &[PointRef], grid: usize) -> Vec<MeshCoord> {
    let grid = grid.max(1);
    let mut out: Vec<MeshCoord> = (0..tuple.len()).map(|j| MeshCoord { j, k: j, s: Rat::ZERO }).collect();
    for j in 0..tuple.len() {
        for k in (j + 1)..tuple.len() {
            if hull.distance(&tuple[j], &tuple[k]).is_finite() {
                out.extend((1..grid).map(|i| MeshCoord {
                    j,
                    k,
                    s: Rat::new(i as i128, grid as i128),
                }));
            }
        }
    }
    out
}

pub fn locate(hull: &ForestHull, tuple: &[PointRef], c: &MeshCoord) -> PointRef {
    hull.interp(tuple[c.j], c.s, tuple[c.k])
        .expect("mesh coordinates lie on finite segments")
}

/// Grid size giving spacing at most `eps` on every finite tuple segment.
pub fn grid_for(hull: &ForestHull, tuple: &[PointRef], eps: Rat) -> usize {
    assert!(eps > Rat::ZERO, "mesh spacing must be positive");
    let longest = tuple_metric(hull, tuple)
        .into_iter()
        .flatten()
        .filter_map(|d| d.finite())
        .max()
        .unwrap_or(Rat::ZERO);
    (longest / eps).ceil_usize().max(1)
}

fn tuple_metric(hull: &ForestHull, tuple: &[PointRef]) -> Vec<Vec<ExtDist>> {
    tuple
        .iter()
        .map(|p| tuple.iter().map(|q| hull.distance(p, q)).collect())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TypeFingerprint {
    pub distances: Vec<Vec<ExtDist>>,
    pub grid: usize,
    pub coords: Vec<MeshCoord>,
    /// `values[x][y] = R(coords[x], coords[y])`.
    pub values: Vec<Vec<Rat>>,
}

pub fn fingerprint_on_grid(s: &RfrStructure, grid: usize) -> TypeFingerprint {
    let coords = mesh_coords(&s.hull, &s.tuple, grid);
    let pts: Vec<PointRef> = coords.iter().map(|c| locate(&s.hull, &s.tuple, c)).collect();
    TypeFingerprint {
        distances: tuple_metric(&s.hull, &s.tuple),
        grid: grid.max(1),
        coords,
        values: pts.iter().map(|x| pts.iter().map(|y| s.eval(x, y)).collect()).collect(),
    }
}

pub fn fingerprint(s: &RfrStructure, eps: Rat) -> TypeFingerprint {
    fingerprint_on_grid(s, grid_for(&s.hull, &s.tuple, eps))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IsoReport {
    pub iso: bool,
    pub lengths_match: bool,
    /// First tuple pair whose distances differ.
    pub distance_mismatch: Option<(usize, usize)>,
    pub grid: usize,
    pub max_gap: Option<Rat>,
    pub witness: Option<(MeshCoord, MeshCoord)>,
}

/// Compares the pointed types of the two tuples: exact distance matrices,
/// then predicate values on the shared interpolation mesh within `2·eps`.
pub fn pointed_iso_check(s0: &RfrStructure, s1: &RfrStructure, eps: Rat) -> IsoReport {
    let mut report = IsoReport {
        iso: false,
        lengths_match: false,
        distance_mismatch: None,
        grid: 0,
        max_gap: None,
        witness: None,
    };
    if s0.tuple.len() != s1.tuple.len() {
        return report;
    }
    report.lengths_match = true;
    let (d0, d1) = (tuple_metric(&s0.hull, &s0.tuple), tuple_metric(&s1.hull, &s1.tuple));
    for (i, (r0, r1)) in d0.iter().zip(&d1).enumerate() {
        if let Some(j) = r0.iter().zip(r1).position(|(x, y)| x != y) {
            report.distance_mismatch = Some((i, j));
            return report;
        }
    }
    let grid = grid_for(&s0.hull, &s0.tuple, eps);
    let (f0, f1) = (fingerprint_on_grid(s0, grid), fingerprint_on_grid(s1, grid));
    let mut gap = Rat::ZERO;
    for (x, (r0, r1)) in f0.values.iter().zip(&f1.values).enumerate() {
        for (y, (v0, v1)) in r0.iter().zip(r1).enumerate() {
            let g = (*v0 - *v1).abs();
            if g > gap {
                gap = g;
                report.witness = Some((f0.coords[x], f0.coords[y]));
            }
        }
    }
    report.grid = grid;
    report.max_gap = Some(gap);
    report.iso = gap <= eps + eps;
    report
}

/// `B ⫝_A C` as `⟨AB⟩ ∩ ⟨AC⟩ = ⟨A⟩`.
pub fn independent(parent: &ForestHull, a: &[PointRef], b: &[PointRef], c: &[PointRef]) -> Result<bool, HullError> {
    let ab: Vec<PointRef> = a.iter().chain(b).copied().collect();
    let ac: Vec<PointRef> = a.iter().chain(c).copied().collect();
    let both = parent.hull_of(&ab)?.intersection(parent, &parent.hull_of(&ac)?);
    Ok(both == parent.hull_of(a)?)
}

/// Canonical hull of a tuple's distance matrix. Entries at distance zero
/// share a generator; the returned points give each entry's position.
pub fn tuple_hull(labels: &[String], dist: &[Vec<ExtDist>]) -> Result<(ForestHull, Vec<PointRef>), ModelError> {
    let n = dist.len();
    let mut reps: Vec<usize> = Vec::new();
    let mut slot = vec![0usize; n];
    for i in 0..n {
        match reps.iter().position(|&r| dist[r][i] == ExtDist::ZERO) {
            Some(p) => slot[i] = p,
            None => {
                slot[i] = reps.len();
                reps.push(i);
            }
        }
    }
    let rep_labels = reps.iter().map(|&r| labels[r].clone()).collect();
    let rep_dist = reps
        .iter()
        .map(|&r| reps.iter().map(|&c| dist[r][c]).collect())
        .collect();
    let metric = FiniteMetric::new(rep_labels, rep_dist).map_err(HullError::from)?;
    let hull = build_hull(&metric)?;
    Ok((hull, slot.into_iter().map(PointRef::v).collect()))
}

/// Carries `p ∈ ⟨from_tuple⟩` to the point with the same interpolation
/// coordinates over `to_tuple`. Only meaningful between pointed-isometric hulls.
pub fn transport(
    from: &ForestHull,
    from_tuple: &[PointRef],
    to: &ForestHull,
    to_tuple: &[PointRef],
    p: &PointRef,
) -> Option<PointRef> {
    let (j, k, r) = from.express_over(from_tuple, p)?;
    to.interp(to_tuple[j], r, to_tuple[k]).ok()
}

fn tuple_labels(hull: &ForestHull, tuple: &[PointRef]) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    tuple
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let base = match p {
                PointRef::Vertex { vertex } if *vertex < hull.n_generators() => hull.labels()[*vertex].clone(),
                _ => format!("t{i}"),
            };
            let mut label = base.clone();
            while !seen.insert(label.clone()) {
                label.push('\'');
            }
            label
        })
        .collect()
}

/// The substructure generated by the entries `idx` of the tuple, as a
/// structure on its own canonical hull. Anchors outside the generated hull
/// are moved to their projections, which leaves the predicate unchanged there.
pub fn restrict(s: &RfrStructure, idx: &[usize]) -> Result<RfrStructure, ModelError> {
    let tuple: Vec<PointRef> = idx.iter().map(|&i| s.tuple[i]).collect();
    let (hull, pts) = tuple_hull(&tuple_labels(&s.hull, &tuple), &tuple_metric(&s.hull, &tuple))?;
    let region = s.hull.hull_of(&tuple)?;
    let mut anchors = Vec::new();
    for a in s.pred.anchors() {
        let (Ok(pp), Ok(pq)) = (s.hull.project(&a.p, &region), s.hull.project(&a.q, &region)) else {
            continue;
        };
        let lift = s.hull.distance(&a.p, &pp) + s.hull.distance(&a.q, &pq);
        let ExtDist::Finite(lift) = lift else { continue };
        if a.v + lift >= Rat::ONE {
            continue;
        }
        let p = transport(&s.hull, &tuple, &hull, &pts, &pp).expect("projection lies in the generated hull");
        let q = transport(&s.hull, &tuple, &hull, &pts, &pq).expect("projection lies in the generated hull");
        anchors.push(Anchor { p, q, v: a.v + lift });
    }
    let pred = AnchorPredicate::from_inf_extension(&hull, anchors)?;
    Ok(RfrStructure::new(hull, pred, pts)?)
}

fn view(s: &RfrStructure, idx: &[usize]) -> RfrStructure {
    RfrStructure {
        hull: s.hull.clone(),
        pred: s.pred.clone(),
        tuple: idx.iter().map(|&i| s.tuple[i]).collect(),
    }
}

/// Structure on `hull` whose predicate is the inf-extension of the given
/// values on all pairs of mesh points. Returns it with the largest gap between
/// intended and realised values on the mesh, which is zero iff the values are
/// 1-1-Lipschitz there.
///
/// The inf-extension at mesh pairs is a min-plus product computed in two
/// passes over integer-scaled tables, and anchors dominated by another anchor
/// are dropped.
fn mesh_structure<I>(
    hull: ForestHull,
    tuple: Vec<PointRef>,
    grid: usize,
    image: impl Fn(&PointRef) -> I,
    value: impl Fn(&I, &I) -> Rat,
) -> Result<(RfrStructure, Rat, Tables), ModelError> {
    let coords = mesh_coords(&hull, &tuple, grid);
    let located: Vec<PointRef> = coords.iter().map(|c| locate(&hull, &tuple, c)).collect();
    let mut pts = located.clone();
    pts.sort();
    pts.dedup();
    let n = pts.len();
    let images: Vec<I> = pts.iter().map(&image).collect();
    let intended: Vec<Vec<Rat>> = images
        .iter()
        .map(|x| images.iter().map(|y| value(x, y)).collect())
        .collect();
    let dist: Vec<Vec<ExtDist>> = pts
        .iter()
        .map(|x| pts.iter().map(|y| hull.distance(x, y)).collect())
        .collect();

    let finite: Vec<Rat> = dist.iter().flatten().filter_map(|x| x.finite()).collect();
    let den = common_denominator(intended.iter().flatten().chain(&finite));
    let scale = |r: Rat| (r * Rat::int(den)).numer();
    const FAR: i128 = i128::MAX / 4;
    let one = den;
    let d: Vec<Vec<i128>> = dist
        .iter()
        .map(|row| row.iter().map(|x| x.finite().map_or(FAR, scale)).collect())
        .collect();
    let v: Vec<Vec<i128>> = intended
        .iter()
        .map(|row| row.iter().map(|&x| scale(x).min(one)).collect())
        .collect();

    // w[x][q] = min_p v[p][q] + d[x][p], then r[x][y] = min_q w[x][q] + d[y][q].
    let minplus = |vals: &[Vec<i128>], skip_self: bool| -> Vec<Vec<i128>> {
        let mut w = vec![vec![FAR; n]; n];
        for x in 0..n {
            for p in (0..n).filter(|&p| !(skip_self && p == x) && d[x][p] < FAR) {
                for q in 0..n {
                    w[x][q] = w[x][q].min(vals[p][q] + d[x][p]);
                }
            }
        }
        w
    };
    let w = minplus(&v, false);
    let realised: Vec<Vec<i128>> = (0..n)
        .map(|x| {
            (0..n)
                .map(|y| (0..n).map(|q| w[x][q] + d[y][q]).min().unwrap_or(FAR).min(one))
                .collect()
        })
        .collect();
    // An anchor is redundant when another anchor already reaches its value.
    let w_other = minplus(&realised, true);
    let mut anchors = Vec::new();
    for x in 0..n {
        for y in 0..n {
            let val = realised[x][y];
            if val >= one {
                continue;
            }
            let via_p = (0..n).map(|q| w_other[x][q] + d[y][q]).min().unwrap_or(FAR);
            let via_q = (0..n)
                .filter(|&q| q != y)
                .map(|q| realised[x][q] + d[y][q])
                .min()
                .unwrap_or(FAR);
            if via_p.min(via_q) > val {
                anchors.push(Anchor {
                    p: pts[x],
                    q: pts[y],
                    v: Rat::new(val, den),
                });
            }
        }
    }
    let gap = (0..n)
        .flat_map(|x| (0..n).map(move |y| (x, y)))
        .map(|(x, y)| Rat::new((realised[x][y] - v[x][y]).abs(), den))
        .max()
        .unwrap_or(Rat::ZERO);
    // The inf-extension of the anchors reproduces `realised` on the mesh, so
    // the step's tables come for free.
    let at: Vec<usize> = located
        .iter()
        .map(|x| pts.binary_search(x).expect("deduped mesh"))
        .collect();
    let tables = Tables {
        d: at.iter().map(|&x| at.iter().map(|&y| dist[x][y]).collect()).collect(),
        r: at
            .iter()
            .map(|&x| at.iter().map(|&y| Rat::new(realised[x][y], den)).collect())
            .collect(),
        n_pinned: tuple.len(),
    };
    let pred = AnchorPredicate::new(&hull, anchors)?;
    Ok((RfrStructure::new(hull, pred, tuple)?, gap, tables))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IndependenceAmalgam {
    #[serde(skip)]
    pub structure: RfrStructure,
    /// Whether `B0 ⫝_M B1` holds in the constructed base.
    pub base_independent: bool,
    pub restriction_match: [bool; 2],
    pub restriction_gap: [Rat; 2],
    pub lipschitz: LipReport,
    /// Gluing certificate over `⟨MB0C⟩ ∪ ⟨MB1C⟩` for every section through a
    /// tuple entry, in both argument positions.
    pub glue_pass: bool,
}

/// Independence theorem over `M`. Tuples: `m` is `m̄`, `b_i` is `m̄ b̄_i`, `c_i`
/// is `m̄ b̄_i c̄`. Builds `⟨MB0B1⟩` as the free amalgam with `B0 ⫝_M B1`, puts
/// `⟨MC⟩` freely over it and takes the predicate agreeing with `c_i` on
/// `⟨MB_iC⟩`. The result's tuple is `m̄ b̄0 b̄1 c̄`.
pub fn independence_amalgam(
    m: &RfrStructure,
    b0: &RfrStructure,
    b1: &RfrStructure,
    c0: &RfrStructure,
    c1: &RfrStructure,
    eps: Rat,
) -> Result<IndependenceAmalgam, ModelError> {
    let p = m.tuple.len();
    let (n0, n1) = (b0.tuple.len().saturating_sub(p), b1.tuple.len().saturating_sub(p));
    let nc = c0.tuple.len().saturating_sub(p + n0);
    for (b, n) in [(b0, n0), (b1, n1)] {
        if b.tuple.len() < p {
            return Err(ModelError::TupleLength {
                expected: p + n,
                got: b.tuple.len(),
            });
        }
    }
    if c0.tuple.len() < p + n0 {
        return Err(ModelError::TupleLength {
            expected: p + n0,
            got: c0.tuple.len(),
        });
    }
    if c1.tuple.len() != p + n1 + nc {
        return Err(ModelError::TupleLength {
            expected: p + n1 + nc,
            got: c1.tuple.len(),
        });
    }
    let m_idx: Vec<usize> = (0..p).collect();
    let side = |b: &RfrStructure, c: &RfrStructure, n: usize, i: usize| -> Result<(), ModelError> {
        if !pointed_iso_check(&view(b, &m_idx), m, eps).iso {
            return Err(precondition(format!("B{i} does not extend M")));
        }
        if !pointed_iso_check(&view(c, &(0..p + n).collect::<Vec<_>>()), b, eps).iso {
            return Err(precondition(format!("C{i} is not over MB{i}")));
        }
        let (mt, bt, ct) = (&c.tuple[..p], &c.tuple[p..p + n], &c.tuple[p + n..]);
        if !independent(&c.hull, mt, bt, ct)? {
            return Err(precondition(format!("C{i} is not independent from B{i} over M")));
        }
        Ok(())
    };
    side(b0, c0, n0, 0)?;
    side(b1, c1, n1, 1)?;
    let mc_idx = |n: usize| -> Vec<usize> { (0..p).chain(p + n..p + n + nc).collect() };
    if !pointed_iso_check(&view(c0, &mc_idx(n0)), &view(c1, &mc_idx(n1)), eps).iso {
        return Err(precondition("C0 and C1 have different types over M"));
    }

    // ⟨MB0B1⟩ with B0 ⫝_M B1, then ⟨MC⟩ freely over ⟨M⟩.
    let (g0, g1) = (
        restrict(b0, &(0..p + n0).collect::<Vec<_>>())?,
        restrict(b1, &(0..p + n1).collect::<Vec<_>>())?,
    );
    let (base, _) = predicate_amalgam(&g0, &g0.tuple[..p], &g1, &g1.tuple[..p], eps, eps + eps)?;
    let base_tuple: Vec<PointRef> = base.tuple[..p + n0]
        .iter()
        .chain(&base.tuple[p + n0 + p..])
        .copied()
        .collect();
    let base_independent = independent(
        &base.hull,
        &base_tuple[..p],
        &base_tuple[p..p + n0],
        &base_tuple[p + n0..],
    )?;
    let mc = restrict(c0, &mc_idx(n0))?;
    let glued = free_amalgam(&base.hull, &base_tuple[..p], &mc.hull, &mc.tuple[..p])?;
    let hull = glued.hull.clone();
    let mut tuple: Vec<PointRef> = base_tuple.iter().map(|q| glued.map_left(q)).collect();
    tuple.extend(mc.tuple[p..].iter().map(|q| glued.map_right(q)));

    let side_tuple = |i: usize| -> Vec<PointRef> {
        let (lo, hi) = if i == 0 { (p, p + n0) } else { (p + n0, p + n0 + n1) };
        tuple[..p]
            .iter()
            .chain(&tuple[lo..hi])
            .chain(&tuple[p + n0 + n1..])
            .copied()
            .collect()
    };
    let mut raw: Vec<Anchor> = base
        .pred
        .anchors()
        .iter()
        .map(|a| Anchor {
            p: glued.map_left(&a.p),
            q: glued.map_left(&a.q),
            v: a.v,
        })
        .collect();
    for (i, c) in [c0, c1].into_iter().enumerate() {
        let gen = restrict(c, &(0..c.tuple.len()).collect::<Vec<_>>())?;
        let target = side_tuple(i);
        for a in gen.pred.anchors() {
            let moved = (
                transport(&gen.hull, &gen.tuple, &hull, &target, &a.p),
                transport(&gen.hull, &gen.tuple, &hull, &target, &a.q),
            );
            let (Some(p), Some(q)) = moved else {
                return Err(precondition(format!("C{i} does not embed in the amalgam")));
            };
            raw.push(Anchor { p, q, v: a.v });
        }
    }
    let pred = AnchorPredicate::from_inf_extension(&hull, raw)?;
    let structure = RfrStructure::new(hull, pred, tuple.clone())?;

    let mut restriction_match = [false; 2];
    let mut restriction_gap = [Rat::ZERO; 2];
    for (i, c) in [c0, c1].into_iter().enumerate() {
        let sub = RfrStructure {
            tuple: side_tuple(i),
            ..structure.clone()
        };
        let rep = pointed_iso_check(&sub, c, eps);
        restriction_match[i] = rep.iso;
        restriction_gap[i] = rep.max_gap.unwrap_or(Rat::ONE);
    }
    let lipschitz = check_one_one_lipschitz(&structure, eps);
    let (r0, r1) = (
        structure.hull.hull_of(&side_tuple(0))?,
        structure.hull.hull_of(&side_tuple(1))?,
    );
    let glue_pass = glue_sections(&structure, &r0, &r1, eps)?;
    Ok(IndependenceAmalgam {
        structure,
        base_independent,
        restriction_match,
        restriction_gap,
        lipschitz,
        glue_pass,
    })
}

fn glue_sections(s: &RfrStructure, r0: &SubHull, r1: &SubHull, eps: Rat) -> Result<bool, ModelError> {
    for y in &s.tuple {
        for rep in [
            glue_check(&s.hull, r0, r1, |x| s.eval(x, y), eps),
            glue_check(&s.hull, r0, r1, |x| s.eval(y, x), eps),
        ] {
            match rep {
                Ok(rep) if rep.pass => {}
                Ok(_) | Err(PredicateError::NotACover) => return Ok(false),
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok(true)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PathResult {
    #[serde(skip)]
    pub steps: Vec<RfrStructure>,
    /// Path parameter of each step.
    pub params: Vec<Rat>,
    pub grid: usize,
    /// `dis^K` of the coordinate-matching correlation between consecutive
    /// step meshes; an upper bound on their `ρ_K`.
    pub consecutive_rho: Vec<Rat>,
    pub max_rho: Rat,
    /// Largest gap between intended and realised mesh values over all steps.
    pub max_deviation: Rat,
    pub constant: bool,
    pub start_match: bool,
    pub end_match: bool,
    /// Whether the first step's pair is independent over `A`.
    pub start_independent: bool,
}

fn consecutive_rhos(tables: &[Tables], k: Rat) -> Vec<Rat> {
    tables
        .windows(2)
        .map(|w| {
            let o = Correlation::new((0..w[0].len()).map(|i| (i, i)).collect(), w[0].n_pinned);
            dis_k(&o, &w[0], &w[1], k).dis
        })
        .collect()
}

fn step_tables(s: &RfrStructure, grid: usize) -> Tables {
    let coords = mesh_coords(&s.hull, &s.tuple, grid);
    let points = coords.iter().map(|c| locate(&s.hull, &s.tuple, c)).collect();
    Tables::new(
        s,
        &Sample {
            points,
            n_pinned: s.tuple.len(),
        },
    )
}

fn finish_path(
    steps: Vec<RfrStructure>,
    tables: &[Tables],
    params: Vec<Rat>,
    grid: usize,
    k: Rat,
    max_deviation: Rat,
    ends: (&RfrStructure, &RfrStructure),
    eps: Rat,
    a_len: usize,
    constant: bool,
) -> Result<PathResult, ModelError> {
    let consecutive_rho = consecutive_rhos(tables, k);
    let max_rho = consecutive_rho.iter().copied().max().unwrap_or(Rat::ZERO);
    let (first, last) = (&steps[0], &steps[steps.len() - 1]);
    let start_match = pointed_iso_check(first, ends.0, eps).iso;
    let end_match = pointed_iso_check(last, ends.1, eps).iso;
    let t = &first.tuple;
    let start_independent = independent(&first.hull, &t[..a_len], &t[a_len..a_len + 1], &t[a_len + 1..])?;
    Ok(PathResult {
        steps,
        params,
        grid,
        consecutive_rho,
        max_rho,
        max_deviation,
        constant,
        start_match,
        end_match,
        start_independent,
    })
}

/// Path of 2-types from an independent pair to the pair `b c` of `s`, whose
/// tuple is `ā b c` with `|ā| = a_len`. Step `r` keeps `⟨Ab_r⟩ ≅ ⟨Ab⟩` and
/// `⟨Ac_r⟩ ≅ ⟨Ac⟩`, branches `b_r` and `c_r` at distance `r` from `π_A(b)`
/// and transports the cross values along the branches. Steps are ordered
/// by increasing `r`, so the last one reproduces `s`.
pub fn unzip_path(s: &RfrStructure, a_len: usize, steps: usize, k: Rat, eps: Rat) -> Result<PathResult, ModelError> {
    if s.tuple.len() != a_len + 2 {
        return Err(ModelError::TupleLength {
            expected: a_len + 2,
            got: s.tuple.len(),
        });
    }
    if steps == 0 {
        return Err(ModelError::NoSteps);
    }
    let hull = &s.hull;
    let (a, b, c) = (&s.tuple[..a_len], s.tuple[a_len], s.tuple[a_len + 1]);
    let region = hull.hull_of(a)?;
    let (db, dc) = (
        hull.distance_to_region(&b, &region),
        hull.distance_to_region(&c, &region),
    );
    if db != dc {
        return Err(precondition(format!("d(b, A) = {db} but d(c, A) = {dc}")));
    }
    let base = restrict(s, &(0..s.tuple.len()).collect::<Vec<_>>())?;
    let grid = grid_for(&base.hull, &base.tuple, eps);
    let constant = || -> Result<PathResult, ModelError> {
        let steps_v = vec![base.clone(); steps + 1];
        let tables = vec![step_tables(&base, grid); steps + 1];
        let params = (0..=steps).map(|i| Rat::new(i as i128, steps as i128)).collect();
        finish_path(steps_v, &tables, params, grid, k, Rat::ZERO, (s, s), eps, a_len, true)
    };
    let ExtDist::Finite(d) = db else { return constant() };
    let pa = hull.project(&b, &region)?;
    if hull.project(&c, &region)? != pa {
        return Err(precondition("b and c project to different points of ⟨A⟩"));
    }
    if independent(hull, a, &[b], &[c])? {
        return constant();
    }
    let dbc = hull.distance(&b, &c).finite().expect("same component as A");
    let stem = (d + d - dbc).half();

    let labels = tuple_labels(hull, &s.tuple);
    let (b_idx, c_idx): (Vec<usize>, Vec<usize>) = ((0..=a_len).collect(), (0..a_len).chain([a_len + 1]).collect());
    let pick = |t: &[PointRef], idx: &[usize]| -> Vec<PointRef> { idx.iter().map(|&i| t[i]).collect() };
    let (s_b, s_c) = (pick(&base.tuple, &b_idx), pick(&base.tuple, &c_idx));
    let mut out = Vec::with_capacity(steps + 1);
    let mut tables = Vec::with_capacity(steps + 1);
    let mut params = Vec::with_capacity(steps + 1);
    let mut deviation = Rat::ZERO;
    for i in 0..=steps {
        let r = stem * Rat::new(i as i128, steps as i128);
        let mut dist = tuple_metric(&base.hull, &base.tuple);
        let split = ExtDist::Finite((d - r) + (d - r));
        dist[a_len][a_len + 1] = split;
        dist[a_len + 1][a_len] = split;
        let (y, pts) = tuple_hull(&labels, &dist)?;
        let (y_b, y_c) = (pick(&pts, &b_idx), pick(&pts, &c_idx));
        let region_b = y.hull_of(&y_b)?;
        // Folds the two branches back onto ⟨Abc⟩; 1-Lipschitz, so the pullback
        // of the predicate is 1-1-Lipschitz.
        let fold = |x: &PointRef| -> PointRef {
            let found = if region_b.contains(x) {
                transport(&y, &y_b, &base.hull, &s_b, x)
            } else {
                transport(&y, &y_c, &base.hull, &s_c, x)
            };
            found.expect("every step point lies on ⟨Ab_r⟩ ∪ ⟨Ac_r⟩")
        };
        let (st, gap, t) = mesh_structure(y.clone(), pts.clone(), grid, fold, |x, z| base.eval(x, z))?;
        deviation = deviation.max(gap);
        out.push(st);
        tables.push(t);
        params.push(r);
    }
    let first = out[0].clone();
    finish_path(out, &tables, params, grid, k, deviation, (&first, s), eps, a_len, false)
}

/// Linear path between two structures with tuple `ā b c`, each with
/// `b ⫝_A c`: step `r` has the predicate `(1−r)·R_0 + r·R_1` on the shared
/// mesh of the common hull.
pub fn interpolate_path(
    q0: &RfrStructure,
    q1: &RfrStructure,
    a_len: usize,
    steps: usize,
    k: Rat,
    eps: Rat,
) -> Result<PathResult, ModelError> {
    for q in [q0, q1] {
        if q.tuple.len() != a_len + 2 {
            return Err(ModelError::TupleLength {
                expected: a_len + 2,
                got: q.tuple.len(),
            });
        }
    }
    if steps == 0 {
        return Err(ModelError::NoSteps);
    }
    for (i, q) in [q0, q1].into_iter().enumerate() {
        let t = &q.tuple;
        if !independent(&q.hull, &t[..a_len], &t[a_len..a_len + 1], &t[a_len + 1..])? {
            return Err(precondition(format!("the pair of q{i} is not independent over A")));
        }
    }
    let dist = tuple_metric(&q0.hull, &q0.tuple);
    if dist != tuple_metric(&q1.hull, &q1.tuple) {
        return Err(precondition("q0 and q1 have different distance profiles"));
    }
    let a_idx: Vec<usize> = (0..a_len).collect();
    for x in [a_len, a_len + 1] {
        let idx: Vec<usize> = a_idx.iter().copied().chain([x]).collect();
        if !pointed_iso_check(&view(q0, &idx), &view(q1, &idx), eps).iso {
            return Err(precondition(format!(
                "entry {x} has different types over A in q0 and q1"
            )));
        }
    }
    let (y, pts) = tuple_hull(&tuple_labels(&q0.hull, &q0.tuple), &dist)?;
    let grid = grid_for(&y, &pts, eps);
    let to = |q: &RfrStructure, x: &PointRef| -> PointRef {
        transport(&y, &pts, &q.hull, &q.tuple, x).expect("pointed-isometric hulls")
    };
    // Both endpoint predicates on the mesh, shared by every step.
    let mut mesh: Vec<PointRef> = mesh_coords(&y, &pts, grid)
        .iter()
        .map(|c| locate(&y, &pts, c))
        .collect();
    mesh.sort();
    mesh.dedup();
    let table = |q: &RfrStructure| -> Vec<Vec<Rat>> {
        let img: Vec<PointRef> = mesh.iter().map(|x| to(q, x)).collect();
        img.iter().map(|x| img.iter().map(|z| q.eval(x, z)).collect()).collect()
    };
    let (r0, r1) = (table(q0), table(q1));
    let index = |x: &PointRef| mesh.binary_search(x).expect("mesh point");
    let mut out = Vec::with_capacity(steps + 1);
    let mut tables = Vec::with_capacity(steps + 1);
    let mut params = Vec::with_capacity(steps + 1);
    let mut deviation = Rat::ZERO;
    for i in 0..=steps {
        let r = Rat::new(i as i128, steps as i128);
        let (st, gap, t) = mesh_structure(y.clone(), pts.clone(), grid, index, |&x, &z| {
            (Rat::ONE - r) * r0[x][z] + r * r1[x][z]
        })?;
        deviation = deviation.max(gap);
        out.push(st);
        tables.push(t);
        params.push(r);
    }
    finish_path(out, &tables, params, grid, k, deviation, (q0, q1), eps, a_len, false)
}

/// `∂(tp(b0/A), tp(b1/A))` for points of one hull.
pub fn type_distance(hull: &ForestHull, a: &[PointRef], b0: &PointRef, b1: &PointRef) -> Result<ExtDist, HullError> {
    let region = hull.hull_of(a)?;
    let (d0, d1) = (
        hull.distance_to_region(b0, &region),
        hull.distance_to_region(b1, &region),
    );
    match (d0, d1) {
        (ExtDist::Inf, ExtDist::Inf) => Ok(ExtDist::ZERO),
        (ExtDist::Finite(x0), ExtDist::Finite(x1)) => {
            let (p0, p1) = (hull.project(b0, &region)?, hull.project(b1, &region)?);
            if p0 == p1 {
                Ok(ExtDist::Finite((x0 - x1).abs()))
            } else {
                Ok(ExtDist::Finite(x0) + hull.distance(&p0, &p1) + ExtDist::Finite(x1))
            }
        }
        _ => Ok(ExtDist::Inf),
    }
}

/// `2n` points at mutually infinite distance, `a_0 … a_{n−1}` then
/// `b_0 … b_{n−1}`, with `R(a_i, b_j) = [i ≥ j]` and every other value 0.
pub fn order_witness(n: usize) -> RfrStructure {
    let labels: Vec<String> = (0..n)
        .map(|i| format!("a{i}"))
        .chain((0..n).map(|i| format!("b{i}")))
        .collect();
    let dist = (0..2 * n)
        .map(|i| {
            (0..2 * n)
                .map(|j| if i == j { ExtDist::ZERO } else { ExtDist::Inf })
                .collect()
        })
        .collect();
    let metric = FiniteMetric::new(labels, dist).expect("square and uniquely labelled");
    let hull = build_hull(&metric).expect("discrete metrics embed");
    let mut anchors = Vec::new();
    for x in 0..2 * n {
        for y in 0..2 * n {
            let one = x < n && y >= n && x >= y - n;
            if !one {
                anchors.push(Anchor {
                    p: PointRef::v(x),
                    q: PointRef::v(y),
                    v: Rat::ZERO,
                });
            }
        }
    }
    let pred = AnchorPredicate::new(&hull, anchors).expect("all distances are infinite");
    RfrStructure::generated(hull, pred).expect("valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_witness_pattern() {
        let w = order_witness(2);
        let (a, b) = (|i: usize| PointRef::v(i), |j: usize| PointRef::v(2 + j));
        assert_eq!(w.eval(&a(0), &b(0)), Rat::ONE);
        assert_eq!(w.eval(&a(0), &b(1)), Rat::ZERO);
        assert_eq!(w.eval(&a(1), &b(0)), Rat::ONE);
        assert_eq!(w.eval(&a(1), &b(1)), Rat::ONE);
        assert_eq!(w.eval(&a(0), &a(1)), Rat::ZERO);
        assert_eq!(w.eval(&b(1), &a(1)), Rat::ZERO);
        assert!(check_one_one_lipschitz(&w, Rat::ONE).pass);
    }
}
