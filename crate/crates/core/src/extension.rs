//! One-point extensions of pointed structures with controlled distortion.
//!
//! Given `(⟨ā⟩, ā)` close to `(⟨b̄⟩, b̄)` and a new point `c` on the target
//! side, [`extend_one_point`] builds `e` on the source side so that `āe` is
//! close to `b̄c`. Points at infinite distance from `⟨b̄⟩` give an isolated
//! `e`; otherwise a segment of length `d(c, ⟨b̄⟩)` is grafted at a source point
//! correlated with the projection of `c`.

use serde::Serialize;
use thiserror::Error;

use crate::distortion::{
    dis_k, dis_metric_k, min_distortion_tables, product_metric_distortion, Correlation, DistortionError, Sample,
    SearchLimits, Tables,
};
use crate::hull::{build_hull, ForestHull, HullError, PointRef};
use crate::metric::{ExtDist, FiniteMetric};
use crate::predicate::{pair_distance, Anchor, AnchorPredicate, LipFn, PredicateError, RfrStructure};
use crate::rational::Rat;

/// Above this many correlated pairs the `|O′|⁴` pair-pair check is skipped.
const PRODUCT_CHECK_MAX_PAIRS: usize = 40;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExtensionError {
    #[error(transparent)]
    Hull(#[from] HullError),
    #[error(transparent)]
    Predicate(#[from] PredicateError),
    #[error(transparent)]
    Distortion(#[from] DistortionError),
    #[error("K = {0} is not large for the target tuple")]
    NotLarge(Rat),
    #[error("target tuple has {target} entries; expected source length {source_len} plus new points")]
    TupleLength { source_len: usize, target: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtensionCase {
    InfiniteDistance,
    Graft,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExtensionResult {
    #[serde(skip)]
    pub extended: RfrStructure,
    pub case: ExtensionCase,
    /// `dis^K` of the input correlation `O`.
    pub rho_in: Rat,
    /// `dis^K` of the constructed correlation `O′` on the output samples.
    pub achieved_dis: Rat,
    /// `dis^K_d(O′)`.
    pub metric_dis: Rat,
    /// `dis^K_{d+2}(O′^(2))`, when `O′` is small enough to enumerate.
    pub product_dis: Option<Rat>,
    /// Shift `r` used to reconcile the new predicate with the old one.
    pub shift: Rat,
    pub graft_length: Option<Rat>,
    pub correlation: Correlation,
    #[serde(skip)]
    pub sample_a: Sample,
    #[serde(skip)]
    pub sample_b: Sample,
}

impl ExtensionResult {
    pub fn within_bound(&self, eps: Rat) -> bool {
        self.achieved_dis <= Rat::int(4) * self.rho_in + eps
    }
}

fn view(target: &RfrStructure, len: usize) -> RfrStructure {
    RfrStructure {
        hull: target.hull.clone(),
        pred: target.pred.clone(),
        tuple: target.tuple[..len].to_vec(),
    }
}

/// Projection of the new target point onto the hull of the preceding tuple.
fn target_projection(target: &RfrStructure, n: usize) -> Result<Option<PointRef>, ExtensionError> {
    let base = target.hull.hull_of(&target.tuple[..n])?;
    match target.hull.project(&target.tuple[n], &base) {
        Ok(p) => Ok(Some(p)),
        Err(HullError::Unreachable) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Source hull extended by one generator `e` with the given distances to the
/// existing generators.
fn hull_with_point(
    source: &ForestHull,
    to_e: impl Fn(usize) -> ExtDist,
) -> Result<(ForestHull, PointRef), ExtensionError> {
    let n = source.n_generators();
    let mut labels = source.labels().to_vec();
    let mut label = "e".to_string();
    while labels.contains(&label) {
        label.push_str("#1");
    }
    labels.push(label);
    let mut dist: Vec<Vec<ExtDist>> = (0..n)
        .map(|i| (0..n).map(|j| source.vertex_distance(i, j)).collect())
        .collect();
    for (i, row) in dist.iter_mut().enumerate() {
        row.push(to_e(i));
    }
    let mut last: Vec<ExtDist> = (0..n).map(&to_e).collect();
    last.push(ExtDist::ZERO);
    dist.push(last);
    let hull = build_hull(&FiniteMetric::new(labels, dist).map_err(HullError::from)?)?;
    Ok((hull, PointRef::v(n)))
}

/// Samples with the tuple extended by one pinned entry: index `i ≥ n` moves to `i + 1`.
fn shift_index(i: usize, n: usize) -> usize {
    if i < n {
        i
    } else {
        i + 1
    }
}

fn reindexed(sample: &Sample, new_point: PointRef, map: impl Fn(&PointRef) -> PointRef) -> Sample {
    let n = sample.n_pinned;
    let mut points: Vec<PointRef> = sample.points[..n].iter().map(&map).collect();
    points.push(new_point);
    points.extend(sample.points[n..].iter().map(&map));
    Sample {
        points,
        n_pinned: n + 1,
    }
}

/// One extension step from an explicit correlation `o` between `sample_a`
/// (pinned on `source.tuple`) and `sample_b` (pinned on the first `n` target
/// entries). In the graft case `sample_b` must contain the projection of the
/// new target point.
pub fn extend_with_correlation(
    source: &RfrStructure,
    sample_a: &Sample,
    target: &RfrStructure,
    sample_b: &Sample,
    o: &Correlation,
    k: Rat,
    mesh: Rat,
) -> Result<ExtensionResult, ExtensionError> {
    let n = source.tuple.len();
    if target.tuple.len() != n + 1 {
        return Err(ExtensionError::TupleLength {
            source_len: n,
            target: target.tuple.len(),
        });
    }
    let c = target.tuple[n];
    let ta = Tables::new(source, sample_a);
    let tb = Tables::new(target, sample_b);
    let rho_in = dis_k(o, &ta, &tb, k).dis;
    let src = &source.hull;

    let (hull, e, case, graft_length, mut pairs, mut sa, mut sb) = match target_projection(target, n)? {
        None => {
            let (hull, e) = hull_with_point(src, |_| ExtDist::Inf)?;
            let map = |p: &PointRef| src.map_into(&hull, p);
            let sa = reindexed(sample_a, e, map);
            let sb = reindexed(sample_b, c, |p| *p);
            let mut pairs: Vec<(usize, usize)> = o
                .pairs
                .iter()
                .map(|&(a, b)| (shift_index(a, n), shift_index(b, n)))
                .collect();
            pairs.push((n, n));
            (hull, e, ExtensionCase::InfiniteDistance, None, pairs, sa, sb)
        }
        Some(b_dag) => {
            let ib = sample_b.index_of(&b_dag).ok_or_else(|| {
                DistortionError::InvalidCorrelation(format!("target sample lacks projection point {b_dag}"))
            })?;
            let ia = o
                .pairs
                .iter()
                .filter(|&&(_, b)| b == ib)
                .map(|&(a, _)| a)
                .min()
                .expect("correlation is surjective");
            let a_dag = sample_a.points[ia];
            let len = target
                .distance(&b_dag, &c)
                .finite()
                .expect("finite projection distance");
            let (hull, e) = if len.is_zero() {
                (src.clone(), a_dag)
            } else {
                hull_with_point(src, |g| src.distance(&PointRef::v(g), &a_dag) + len)?
            };
            let map = |p: &PointRef| src.map_into(&hull, p);
            let a_dag_new = map(&a_dag);
            let sa = reindexed(sample_a, if len.is_zero() { a_dag_new } else { e }, map);
            let sb = reindexed(sample_b, c, |p| *p);
            let mut pairs: Vec<(usize, usize)> = o
                .pairs
                .iter()
                .map(|&(a, b)| (shift_index(a, n), shift_index(b, n)))
                .collect();
            pairs.push((n, n));
            let (mut sa, mut sb) = (sa, sb);
            if !len.is_zero() {
                let m = (len / mesh).ceil_usize().max(1);
                for i in 1..m {
                    let r = Rat::new(i as i128, m as i128);
                    let pa = hull.interp(a_dag_new, r, e)?;
                    let pb = target.hull.interp(b_dag, r, c)?;
                    sa.extend(&[pa]);
                    sb.extend(&[pb]);
                    pairs.push((sa.index_of(&pa).expect("added"), sb.index_of(&pb).expect("added")));
                }
            }
            let e = if len.is_zero() { a_dag_new } else { e };
            (hull, e, ExtensionCase::Graft, Some(len), pairs, sa, sb)
        }
    };
    let map = |p: &PointRef| src.map_into(&hull, p);
    let old_anchors: Vec<Anchor> = source
        .pred
        .anchors()
        .iter()
        .map(|a| Anchor {
            p: map(&a.p),
            q: map(&a.q),
            v: a.v,
        })
        .collect();
    let tb_new = Tables::new(target, &sb);

    let (anchors, shift) = match case {
        ExtensionCase::InfiniteDistance => {
            let mut anchors = old_anchors;
            for &(a, b) in &o.pairs {
                let (pa, ib) = (sa.points[shift_index(a, n)], shift_index(b, n));
                anchors.push(Anchor {
                    p: pa,
                    q: e,
                    v: tb_new.r[ib][n],
                });
                anchors.push(Anchor {
                    p: e,
                    q: pa,
                    v: tb_new.r[n][ib],
                });
            }
            anchors.push(Anchor {
                p: e,
                q: e,
                v: tb_new.r[n][n],
            });
            (anchors, Rat::ZERO)
        }
        ExtensionCase::Graft => {
            let d2 = |x: &(PointRef, PointRef), y: &(PointRef, PointRef)| pair_distance(&hull, x, y);
            let f: LipFn<(PointRef, PointRef)> = LipFn::new(
                pairs
                    .iter()
                    .flat_map(|&(a, b)| pairs.iter().map(move |&(a2, b2)| (a, b, a2, b2)))
                    .map(|(a, b, a2, b2)| ((sa.points[a], sa.points[a2]), tb_new.r[b][b2]))
                    .collect(),
            )
            .pruned();
            // Reconcile on the sampled pairs of ⟨ā⟩_K and the anchors inside it.
            let mut shift = Rat::ZERO;
            let old_pts: Vec<PointRef> = sample_a.points.iter().map(map).collect();
            for (i, x) in old_pts.iter().enumerate() {
                for (j, y) in old_pts.iter().enumerate() {
                    shift = shift.max((ta.r[i][j] - f.eval(d2, &(*x, *y))).abs());
                }
            }
            let region = src.truncated_hull(&source.tuple, k)?;
            for a in source
                .pred
                .anchors()
                .iter()
                .filter(|a| region.contains(&a.p) && region.contains(&a.q))
            {
                shift = shift.max((a.v - f.eval(d2, &(map(&a.p), map(&a.q)))).abs());
            }
            let mut anchors: Vec<Anchor> = f
                .shifted(shift)
                .pruned()
                .anchors()
                .iter()
                .map(|((p, q), v)| Anchor { p: *p, q: *q, v: *v })
                .collect();
            anchors.extend(old_anchors);
            (anchors, shift)
        }
    };
    let pred = AnchorPredicate::from_inf_extension(&hull, anchors)?;
    let mut tuple: Vec<PointRef> = source.tuple.iter().map(map).collect();
    tuple.push(e);
    let extended = RfrStructure::new(hull, pred, tuple)?;
    pairs.sort_unstable();
    pairs.dedup();
    let correlation = Correlation::new(pairs, n + 1);
    sa.n_pinned = n + 1;
    sb.n_pinned = n + 1;
    let ta_new = Tables::new(&extended, &sa);
    let report = dis_k(&correlation, &ta_new, &tb_new, k);
    let metric_dis = dis_metric_k(&correlation, &ta_new, &tb_new, k);
    let product_dis = (correlation.pairs.len() <= PRODUCT_CHECK_MAX_PAIRS)
        .then(|| product_metric_distortion(&correlation, &ta_new, &tb_new, k));
    Ok(ExtensionResult {
        extended,
        case,
        rho_in,
        achieved_dis: report.dis,
        metric_dis,
        product_dis,
        shift,
        graft_length,
        correlation,
        sample_a: sa,
        sample_b: sb,
    })
}

/// Samples for the first step: `⟨ā⟩_K` on the source and `⟨b̄⟩_K` plus the
/// projection of `c` on the target.
fn initial_samples(
    source: &RfrStructure,
    target: &RfrStructure,
    n: usize,
    k: Rat,
    mesh: Rat,
) -> Result<(Sample, Sample), ExtensionError> {
    let sa = Sample::truncated(source, k, mesh)?;
    let bbar = &target.tuple[..n];
    let region = target.hull.truncated_hull(bbar, k)?;
    let extra: Vec<PointRef> = if target.tuple.len() > n {
        target_projection(&view(target, n + 1), n)?.into_iter().collect()
    } else {
        vec![]
    };
    let sb = Sample::build(&target.hull, bbar, &region, mesh, &extra);
    Ok((sa, sb))
}

/// Extends `source` (tuple `ā`) by one point matching the last entry of
/// `target` (tuple `b̄c`). The input correlation is an exact minimiser on the
/// `mesh`-samples.
pub fn extend_one_point(
    source: &RfrStructure,
    target: &RfrStructure,
    k: Rat,
    mesh: Rat,
    limits: SearchLimits,
) -> Result<ExtensionResult, ExtensionError> {
    let n = source.tuple.len();
    if target.tuple.len() != n + 1 {
        return Err(ExtensionError::TupleLength {
            source_len: n,
            target: target.tuple.len(),
        });
    }
    if !target.hull.is_large_for(k, &target.tuple) {
        return Err(ExtensionError::NotLarge(k));
    }
    let (sa, sb) = initial_samples(source, target, n, k, mesh)?;
    let ta = Tables::new(source, &sa);
    let tb = Tables::new(&view(target, n), &sb);
    let o = min_distortion_tables(&ta, &tb, k, limits, None)?.correlation;
    extend_with_correlation(source, &sa, target, &sb, &o, k, mesh)
}

#[derive(Clone, Debug, Serialize)]
pub struct TupleExtension {
    #[serde(skip)]
    pub extended: RfrStructure,
    pub steps: Vec<ExtensionResult>,
    pub rho_in: Rat,
    pub final_dis: Rat,
    /// `5^m · ρ_in + ε`.
    pub bound: Rat,
    /// Per-step budgets `ε_k = ε · 2^-(k+1) · 5^(k-m)`.
    pub step_budgets: Vec<Rat>,
}

impl TupleExtension {
    pub fn within_bound(&self) -> bool {
        self.final_dis <= self.bound
    }
}

/// Iterates [`extend_one_point`] over the `m` trailing target entries. Only
/// the first correlation is optimised; each later step reuses the previous
/// step's constructed correlation.
pub fn extend_tuple(
    source: &RfrStructure,
    target: &RfrStructure,
    k: Rat,
    eps: Rat,
    mesh: Rat,
    limits: SearchLimits,
) -> Result<TupleExtension, ExtensionError> {
    let n = source.tuple.len();
    if target.tuple.len() < n {
        return Err(ExtensionError::TupleLength {
            source_len: n,
            target: target.tuple.len(),
        });
    }
    if !target.hull.is_large_for(k, &target.tuple) {
        return Err(ExtensionError::NotLarge(k));
    }
    let m = target.tuple.len() - n;
    let budgets: Vec<Rat> = (0..m)
        .map(|j| eps * Rat::new(1, 1i128 << (j + 1)) * Rat::new(1, Rat::pow_i(5, (m - j) as u32).numer()))
        .collect();
    let (sa, mut sb) = initial_samples(source, target, n, k, mesh)?;
    if m == 0 {
        let ta = Tables::new(source, &sa);
        let tb = Tables::new(&view(target, n), &sb);
        let rho = min_distortion_tables(&ta, &tb, k, limits, None)?.rho;
        return Ok(TupleExtension {
            extended: source.clone(),
            steps: vec![],
            rho_in: rho,
            final_dis: rho,
            bound: rho + eps,
            step_budgets: budgets,
        });
    }
    let ta = Tables::new(source, &sa);
    let tb = Tables::new(&view(target, n), &sb);
    let first = min_distortion_tables(&ta, &tb, k, limits, None)?;
    let rho_in = first.rho;
    let mut o = first.correlation;
    let mut current = source.clone();
    let mut sa = sa;
    let mut steps: Vec<ExtensionResult> = Vec::with_capacity(m);
    for j in 0..m {
        let len = n + j;
        let step_target = view(target, len + 1);
        if j > 0 {
            if let Some(b_dag) = target_projection(&step_target, len)? {
                if sb.index_of(&b_dag).is_none() {
                    sb.extend(&[b_dag]);
                    let ib = sb.len() - 1;
                    let ta = Tables::new(&current, &sa);
                    let tb = Tables::new(&view(target, len), &sb);
                    let best_a = (0..sa.len())
                        .min_by_key(|&a| {
                            let mut trial = o.pairs.clone();
                            trial.push((a, ib));
                            dis_k(&Correlation::new(trial, len), &ta, &tb, k).dis
                        })
                        .expect("nonempty source sample");
                    let mut pairs = o.pairs.clone();
                    pairs.push((best_a, ib));
                    o = Correlation::new(pairs, len);
                }
            }
        }
        let res = extend_with_correlation(&current, &sa, &step_target, &sb, &o, k, mesh)?;
        current = res.extended.clone();
        sa = res.sample_a.clone();
        sb = res.sample_b.clone();
        o = res.correlation.clone();
        steps.push(res);
    }
    let final_dis = steps.last().map_or(rho_in, |s| s.achieved_dis);
    Ok(TupleExtension {
        extended: current,
        steps,
        rho_in,
        final_dis,
        bound: Rat::pow_i(5, m as u32) * rho_in + eps,
        step_budgets: budgets,
    })
}
