//! Correlations between sampled pointed structures and their K-truncated
//! distortion.
//!
//! Samples are finite point lists whose first `n_pinned` entries are the
//! distinguished tuple; a correlation must relate tuple entry `i` on one side
//! to tuple entry `i` on the other.

use serde::Serialize;
use thiserror::Error;

use crate::hull::{ForestHull, HullError, PointRef, SubHull};
use crate::metric::ExtDist;
use crate::predicate::RfrStructure;
use crate::rational::{common_denominator, Rat};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DistortionError {
    #[error(transparent)]
    Hull(#[from] HullError),
    #[error("tuples have different lengths ({0} vs {1})")]
    TupleLengthMismatch(usize, usize),
    #[error("search needs {required} sample pairs but the limit is {limit}")]
    ResourceLimit { required: usize, limit: usize },
    #[error("search exceeded {0} nodes")]
    NodeLimit(u64),
    #[error("invalid correlation: {0}")]
    InvalidCorrelation(String),
    #[error("exhaustive enumeration needs nA*nB <= 20, got {0}")]
    TooLarge(usize),
}

/// Finite sample of a structure: pinned tuple entries first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Sample {
    pub points: Vec<PointRef>,
    pub n_pinned: usize,
}

impl Sample {
    /// Tuple, then vertices and mesh points of `region`, then `extra`; duplicates
    /// after the tuple are dropped.
    pub fn of(s: &RfrStructure, region: &SubHull, eps: Rat, extra: &[PointRef]) -> Sample {
        Sample::build(&s.hull, &s.tuple, region, eps, extra)
    }

    pub fn build(hull: &ForestHull, tuple: &[PointRef], region: &SubHull, eps: Rat, extra: &[PointRef]) -> Sample {
        let mut points = tuple.to_vec();
        let mut seen: std::collections::HashSet<PointRef> = points.iter().copied().collect();
        for p in hull.mesh(region, eps).into_iter().chain(extra.iter().copied()) {
            if seen.insert(p) {
                points.push(p);
            }
        }
        Sample {
            points,
            n_pinned: tuple.len(),
        }
    }

    /// Appends points not already present.
    pub fn extend(&mut self, extra: &[PointRef]) {
        for p in extra {
            if !self.points.contains(p) {
                self.points.push(*p);
            }
        }
    }

    pub fn index_of(&self, p: &PointRef) -> Option<usize> {
        self.points.iter().position(|q| q == p)
    }

    /// Sample of `⟨tuple⟩_K`.
    pub fn truncated(s: &RfrStructure, k: Rat, eps: Rat) -> Result<Sample, DistortionError> {
        let region = s.hull.truncated_hull(&s.tuple, k)?;
        Ok(Sample::of(s, &region, eps, &[]))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Distance and predicate tables of a sample.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tables {
    pub d: Vec<Vec<ExtDist>>,
    pub r: Vec<Vec<Rat>>,
    pub n_pinned: usize,
}

impl Tables {
    pub fn new(s: &RfrStructure, sample: &Sample) -> Tables {
        let pts = &sample.points;
        Tables {
            d: pts
                .iter()
                .map(|x| pts.iter().map(|y| s.distance(x, y)).collect())
                .collect(),
            r: pts.iter().map(|x| pts.iter().map(|y| s.eval(x, y)).collect()).collect(),
            n_pinned: sample.n_pinned,
        }
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }
}

/// Relation between two samples, stored as sorted `(a, b)` index pairs.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Correlation {
    pub pairs: Vec<(usize, usize)>,
    pub n_pinned: usize,
}

impl Correlation {
    pub fn new(mut pairs: Vec<(usize, usize)>, n_pinned: usize) -> Self {
        pairs.sort_unstable();
        pairs.dedup();
        Correlation { pairs, n_pinned }
    }

    /// Checks totality, surjectivity and pinning against sample sizes.
    pub fn validate(&self, n_a: usize, n_b: usize) -> Result<(), DistortionError> {
        let mut left = vec![false; n_a];
        let mut right = vec![false; n_b];
        for &(a, b) in &self.pairs {
            if a >= n_a || b >= n_b {
                return Err(DistortionError::InvalidCorrelation(format!(
                    "pair ({a}, {b}) out of range"
                )));
            }
            left[a] = true;
            right[b] = true;
        }
        if let Some(a) = left.iter().position(|x| !x) {
            return Err(DistortionError::InvalidCorrelation(format!("not total: {a} unrelated")));
        }
        if let Some(b) = right.iter().position(|x| !x) {
            return Err(DistortionError::InvalidCorrelation(format!(
                "not surjective: {b} unrelated"
            )));
        }
        for i in 0..self.n_pinned {
            if self.pairs.binary_search(&(i, i)).is_err() {
                return Err(DistortionError::InvalidCorrelation(format!("pin ({i}, {i}) missing")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DistortionReport {
    pub dis_metric: Rat,
    pub dis_predicate: Rat,
    pub dis: Rat,
    /// Two correlated pairs attaining `dis` (a pair may be used twice).
    pub witness: Option<((usize, usize), (usize, usize))>,
}

pub fn dis_metric_k(o: &Correlation, a: &Tables, b: &Tables, k: Rat) -> Rat {
    let mut worst = Rat::ZERO;
    for &(x, y) in &o.pairs {
        for &(x2, y2) in &o.pairs {
            worst = worst.max((a.d[x][x2].clamped(k) - b.d[y][y2].clamped(k)).abs());
        }
    }
    worst
}

pub fn dis_k(o: &Correlation, a: &Tables, b: &Tables, k: Rat) -> DistortionReport {
    let mut dm = (Rat::ZERO, None);
    let mut dp = (Rat::ZERO, None);
    for &p in &o.pairs {
        for &p2 in &o.pairs {
            let m = (a.d[p.0][p2.0].clamped(k) - b.d[p.1][p2.1].clamped(k)).abs();
            if m > dm.0 || dm.1.is_none() {
                dm = (m, Some((p, p2)));
            }
            let r = (a.r[p.0][p2.0] - b.r[p.1][p2.1]).abs();
            if r > dp.0 || dp.1.is_none() {
                dp = (r, Some((p, p2)));
            }
        }
    }
    let (dis, witness) = if dp.0 > dm.0 { dp } else { dm };
    DistortionReport {
        dis_metric: dm.0,
        dis_predicate: dp.0,
        dis,
        witness,
    }
}

/// `dis^K` of `O^(2)` for the ℓ¹ metric on pairs, by full pair-pair enumeration.
pub fn product_metric_distortion(o: &Correlation, a: &Tables, b: &Tables, k: Rat) -> Rat {
    let pairs = &o.pairs;
    let mut worst = Rat::ZERO;
    for &(x1, y1) in pairs {
        for &(x2, y2) in pairs {
            for &(u1, v1) in pairs {
                for &(u2, v2) in pairs {
                    let da = (a.d[x1][u1] + a.d[x2][u2]).clamped(k);
                    let db = (b.d[y1][v1] + b.d[y2][v2]).clamped(k);
                    worst = worst.max((da - db).abs());
                }
            }
        }
    }
    worst
}

/// Integer-scaled cost tables: every clamped distance and predicate value
/// times a common denominator.
struct Scaled {
    da: Vec<Vec<i128>>,
    db: Vec<Vec<i128>>,
    ra: Vec<Vec<i128>>,
    rb: Vec<Vec<i128>>,
    den: i128,
}

impl Scaled {
    fn new(a: &Tables, b: &Tables, k: Rat) -> Scaled {
        let clamp = |t: &Tables| -> Vec<Vec<Rat>> {
            t.d.iter()
                .map(|row| row.iter().map(|x| x.clamped(k)).collect())
                .collect()
        };
        let (ca, cb) = (clamp(a), clamp(b));
        let all = ca.iter().chain(cb.iter()).chain(a.r.iter()).chain(b.r.iter()).flatten();
        let den = common_denominator(all);
        let scale = |m: &Vec<Vec<Rat>>| -> Vec<Vec<i128>> {
            m.iter()
                .map(|row| row.iter().map(|x| (*x * Rat::int(den)).numer()).collect())
                .collect()
        };
        Scaled {
            da: scale(&ca),
            db: scale(&cb),
            ra: scale(&a.r),
            rb: scale(&b.r),
            den,
        }
    }

    /// Cost contributed by the ordered and reversed pair-pairs of `p`, `q`.
    #[inline]
    fn cost(&self, p: (usize, usize), q: (usize, usize)) -> i128 {
        let m = (self.da[p.0][q.0] - self.db[p.1][q.1]).abs();
        let r1 = (self.ra[p.0][q.0] - self.rb[p.1][q.1]).abs();
        let r2 = (self.ra[q.0][p.0] - self.rb[q.1][p.1]).abs();
        m.max(r1).max(r2)
    }

    fn to_rat(&self, x: i128) -> Rat {
        Rat::new(x, self.den)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchLimits {
    /// Maximum `|A|·|B|`.
    pub max_sample: usize,
    pub max_nodes: u64,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits {
            max_sample: 4096,
            max_nodes: 20_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MinDistortion {
    pub rho: Rat,
    pub correlation: Correlation,
    pub report: DistortionReport,
    pub nodes: u64,
}

struct Search<'a> {
    s: &'a Scaled,
    n_a: usize,
    n_b: usize,
    a_order: Vec<usize>,
    chosen: Vec<(usize, usize)>,
    cover_b: Vec<u32>,
    best: i128,
    best_pairs: Option<Vec<(usize, usize)>>,
    nodes: u64,
    max_nodes: u64,
}

impl Search<'_> {
    fn inc(&self, p: (usize, usize)) -> i128 {
        let mut c = self.s.cost(p, p);
        for &q in &self.chosen {
            c = c.max(self.s.cost(p, q));
        }
        c
    }

    /// Admissible bound: each remaining A point must pay at least its cheapest increment.
    fn remaining_bound(&self, level: usize, cost: i128) -> i128 {
        let mut lb = cost;
        for &a in &self.a_order[level..] {
            let cheapest = (0..self.n_b).map(|b| self.inc((a, b))).min().unwrap_or(0);
            lb = lb.max(cheapest);
            if lb >= self.best {
                break;
            }
        }
        lb
    }

    fn run_a(&mut self, level: usize, cost: i128) -> Result<(), DistortionError> {
        self.nodes += 1;
        if self.nodes > self.max_nodes {
            return Err(DistortionError::NodeLimit(self.max_nodes));
        }
        if level == self.a_order.len() {
            return self.run_b(0, cost);
        }
        if self.remaining_bound(level, cost) >= self.best {
            return Ok(());
        }
        let a = self.a_order[level];
        let mut cands: Vec<(i128, usize)> = (0..self.n_b).map(|b| (cost.max(self.inc((a, b))), b)).collect();
        cands.sort_unstable();
        for (c, b) in cands {
            if c >= self.best {
                break;
            }
            self.chosen.push((a, b));
            self.cover_b[b] += 1;
            self.run_a(level + 1, c)?;
            self.cover_b[b] -= 1;
            self.chosen.pop();
        }
        Ok(())
    }

    fn run_b(&mut self, from: usize, cost: i128) -> Result<(), DistortionError> {
        self.nodes += 1;
        if self.nodes > self.max_nodes {
            return Err(DistortionError::NodeLimit(self.max_nodes));
        }
        let Some(b) = (from..self.n_b).find(|&b| self.cover_b[b] == 0) else {
            if cost < self.best {
                self.best = cost;
                self.best_pairs = Some(self.chosen.clone());
            }
            return Ok(());
        };
        let mut cands: Vec<(i128, usize)> = (0..self.n_a).map(|a| (cost.max(self.inc((a, b))), a)).collect();
        cands.sort_unstable();
        for (c, a) in cands {
            if c >= self.best {
                break;
            }
            self.chosen.push((a, b));
            self.cover_b[b] += 1;
            self.run_b(b + 1, c)?;
            self.cover_b[b] -= 1;
            self.chosen.pop();
        }
        Ok(())
    }
}

/// Exact minimum of `dis^K` over correlations of the two samples.
///
/// Every correlation contains one of the form pins ∪ graph(f) ∪ graph(g)ᵀ with
/// `f` defined on unpinned A points and `g` on B points left uncovered, and
/// distortion is monotone under inclusion, so the search ranges over those.
/// A points are assigned in decreasing eccentricity. `hint` seeds the upper
/// bound; the search then only accepts strictly better correlations.
pub fn min_distortion_tables(
    a: &Tables,
    b: &Tables,
    k: Rat,
    limits: SearchLimits,
    hint: Option<&Correlation>,
) -> Result<MinDistortion, DistortionError> {
    if a.n_pinned != b.n_pinned {
        return Err(DistortionError::TupleLengthMismatch(a.n_pinned, b.n_pinned));
    }
    let (n_a, n_b) = (a.len(), b.len());
    let required = n_a * n_b;
    if required > limits.max_sample {
        return Err(DistortionError::ResourceLimit {
            required,
            limit: limits.max_sample,
        });
    }
    let n_pinned = a.n_pinned;
    if n_a == 0 || n_b == 0 {
        if n_a != n_b {
            return Err(DistortionError::InvalidCorrelation("one sample is empty".into()));
        }
        let o = Correlation::new(vec![], 0);
        let report = dis_k(&o, a, b, k);
        return Ok(MinDistortion {
            rho: Rat::ZERO,
            correlation: o,
            report,
            nodes: 0,
        });
    }
    let scaled = Scaled::new(a, b, k);
    let pins: Vec<(usize, usize)> = (0..n_pinned).map(|i| (i, i)).collect();
    let mut pin_cost = 0;
    for &p in &pins {
        for &q in &pins {
            pin_cost = pin_cost.max(scaled.cost(p, q));
        }
    }
    let ecc = |x: usize| scaled.da[x].iter().copied().max().unwrap_or(0);
    let mut a_order: Vec<usize> = (n_pinned..n_a).collect();
    a_order.sort_by_key(|&x| (std::cmp::Reverse(ecc(x)), x));
    let mut cover_b = vec![0u32; n_b];
    for i in 0..n_pinned {
        cover_b[i] += 1;
    }

    let (best, best_pairs) = match hint {
        Some(h) => {
            h.validate(n_a, n_b)?;
            if h.n_pinned != n_pinned {
                return Err(DistortionError::InvalidCorrelation("hint pins differ".into()));
            }
            let mut c = 0;
            for &p in &h.pairs {
                for &q in &h.pairs {
                    c = c.max(scaled.cost(p, q));
                }
            }
            (c, Some(h.pairs.clone()))
        }
        None => (i128::MAX, None),
    };
    let mut search = Search {
        s: &scaled,
        n_a,
        n_b,
        a_order,
        chosen: pins,
        cover_b,
        best,
        best_pairs,
        nodes: 0,
        max_nodes: limits.max_nodes,
    };
    if pin_cost < search.best {
        search.run_a(0, pin_cost)?;
    }
    let pairs = search.best_pairs.clone().expect("some correlation exists");
    let correlation = Correlation::new(pairs, n_pinned);
    let report = dis_k(&correlation, a, b, k);
    debug_assert_eq!(report.dis, scaled.to_rat(search.best));
    Ok(MinDistortion {
        rho: report.dis,
        correlation,
        report,
        nodes: search.nodes,
    })
}

/// `ρ_K` between the truncated hulls of two structures' tuples, on ε-meshes.
/// The sampled value is within `4ε` of the continuum one.
pub fn min_distortion(
    a: &RfrStructure,
    b: &RfrStructure,
    k: Rat,
    eps: Rat,
    limits: SearchLimits,
) -> Result<(MinDistortion, Sample, Sample), DistortionError> {
    if a.tuple.len() != b.tuple.len() {
        return Err(DistortionError::TupleLengthMismatch(a.tuple.len(), b.tuple.len()));
    }
    let sa = Sample::truncated(a, k, eps)?;
    let sb = Sample::truncated(b, k, eps)?;
    let required = sa.len() * sb.len();
    if required > limits.max_sample {
        return Err(DistortionError::ResourceLimit {
            required,
            limit: limits.max_sample,
        });
    }
    let m = min_distortion_tables(&Tables::new(a, &sa), &Tables::new(b, &sb), k, limits, None)?;
    Ok((m, sa, sb))
}

/// Every total, surjective, pinned relation between `0..n_a` and `0..n_b`,
/// in increasing order of the bitmask over pairs `(a, b) ↦ a·n_b + b`.
pub fn all_correlations(n_a: usize, n_b: usize, n_pinned: usize) -> Result<Vec<Correlation>, DistortionError> {
    let cells = n_a * n_b;
    if cells > 20 {
        return Err(DistortionError::TooLarge(cells));
    }
    let pin_mask: u32 = (0..n_pinned.min(n_a).min(n_b)).map(|i| 1u32 << (i * n_b + i)).sum();
    let mut out = Vec::new();
    for mask in 0u32..(1u32 << cells) {
        if mask & pin_mask != pin_mask {
            continue;
        }
        let total = (0..n_a).all(|a| (0..n_b).any(|b| mask & (1 << (a * n_b + b)) != 0));
        let onto = (0..n_b).all(|b| (0..n_a).any(|a| mask & (1 << (a * n_b + b)) != 0));
        if total && onto {
            let pairs = (0..cells)
                .filter(|c| mask & (1 << c) != 0)
                .map(|c| (c / n_b, c % n_b))
                .collect();
            out.push(Correlation::new(pairs, n_pinned));
        }
    }
    Ok(out)
}

/// Exhaustive minimum over [`all_correlations`]; the oracle for small samples.
pub fn exhaustive_min_distortion(a: &Tables, b: &Tables, k: Rat) -> Result<(Rat, Correlation), DistortionError> {
    if a.n_pinned != b.n_pinned {
        return Err(DistortionError::TupleLengthMismatch(a.n_pinned, b.n_pinned));
    }
    let mut best: Option<(Rat, Correlation)> = None;
    for o in all_correlations(a.len(), b.len(), a.n_pinned)? {
        let d = dis_k(&o, a, b, k).dis;
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, o));
        }
    }
    best.ok_or_else(|| DistortionError::InvalidCorrelation("no correlation exists".into()))
}
