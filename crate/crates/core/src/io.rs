//! Instance files: `{metric: {labels, matrix}, anchors?, tuple?}` or
//! `{heart: {radii, delta}}`. Matrix entries are rationals (`"p/q"` strings
//! or JSON numbers) with `null` for an infinite distance. Points are either a
//! generator label or a hull address `{"vertex": id}` /
//! `{"edge": id, "offset": "p/q"}` on the canonical hull of the metric.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::heart::HeartStructure;
use crate::hull::{build_hull, ForestHull, HullError, PointRef};
use crate::metric::{ExtDist, FiniteMetric, MetricError};
use crate::predicate::{Anchor, AnchorPredicate, PredicateError, RfrStructure};
use crate::rational::Rat;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Shape(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Hull(#[from] HullError),
    #[error(transparent)]
    Predicate(#[from] PredicateError),
    #[error("unknown point `{0}`")]
    Point(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricJson {
    pub labels: Vec<String>,
    pub matrix: Vec<Vec<ExtDist>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointSpec {
    Label(String),
    Ref(PointRef),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorSpec {
    pub p: PointSpec,
    pub q: PointSpec,
    pub v: Rat,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchors: Option<Vec<AnchorSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tuple: Option<Vec<PointSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heart: Option<HeartStructure>,
}

/// What a file denotes. A metric file with anchors or a tuple is a
/// structure; the points are resolved only once the hull exists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Instance {
    Metric(FiniteMetric),
    Structure {
        metric: FiniteMetric,
        anchors: Vec<AnchorSpec>,
        tuple: Option<Vec<PointSpec>>,
    },
    Heart(HeartStructure),
}

pub fn parse_instance(text: &str) -> Result<Instance, IoError> {
    let file: InstanceFile = serde_json::from_str(text)?;
    match (file.metric, file.heart) {
        (Some(_), Some(_)) => Err(IoError::Shape(
            "a file holds either a metric or a heart, not both".into(),
        )),
        (None, None) => Err(IoError::Shape("expected a `metric` or a `heart` key".into())),
        (None, Some(h)) => {
            if file.anchors.is_some() || file.tuple.is_some() {
                return Err(IoError::Shape("`anchors` and `tuple` need a `metric`".into()));
            }
            Ok(Instance::Heart(h))
        }
        (Some(m), None) => {
            let metric = FiniteMetric::new(m.labels, m.matrix)?;
            if file.anchors.is_none() && file.tuple.is_none() {
                return Ok(Instance::Metric(metric));
            }
            Ok(Instance::Structure {
                metric,
                anchors: file.anchors.unwrap_or_default(),
                tuple: file.tuple,
            })
        }
    }
}

pub fn resolve_point(hull: &ForestHull, spec: &PointSpec) -> Result<PointRef, IoError> {
    match spec {
        PointSpec::Label(l) => hull
            .labels()
            .iter()
            .position(|x| x == l)
            .map(|g| hull.generator_point(g))
            .ok_or_else(|| IoError::Point(l.clone())),
        PointSpec::Ref(p) => hull.normalize(*p).map_err(|_| IoError::Point(format!("{p}"))),
    }
}

pub fn resolve_anchors(hull: &ForestHull, specs: &[AnchorSpec]) -> Result<Vec<Anchor>, IoError> {
    specs
        .iter()
        .map(|a| {
            Ok(Anchor {
                p: resolve_point(hull, &a.p)?,
                q: resolve_point(hull, &a.q)?,
                v: a.v,
            })
        })
        .collect()
}

/// The tuple defaults to the generators.
pub fn resolve_tuple(hull: &ForestHull, tuple: Option<&[PointSpec]>) -> Result<Vec<PointRef>, IoError> {
    match tuple {
        None => Ok(hull.generator_points()),
        Some(t) => t.iter().map(|p| resolve_point(hull, p)).collect(),
    }
}

/// Builds the structure a file denotes; a bare metric carries `R ≡ 1`.
pub fn load_structure(inst: &Instance) -> Result<RfrStructure, IoError> {
    let (metric, anchors, tuple) = match inst {
        Instance::Metric(m) => (m, &[][..], None),
        Instance::Structure { metric, anchors, tuple } => (metric, &anchors[..], tuple.as_deref()),
        Instance::Heart(_) => return Err(IoError::Shape("expected a metric instance, found a heart".into())),
    };
    let hull = build_hull(metric)?;
    let pred = AnchorPredicate::new(&hull, resolve_anchors(&hull, anchors)?)?;
    let tuple = resolve_tuple(&hull, tuple)?;
    Ok(RfrStructure::new(hull, pred, tuple)?)
}

pub fn metric_json(m: &FiniteMetric) -> MetricJson {
    MetricJson {
        labels: m.labels().to_vec(),
        matrix: m.matrix().to_vec(),
    }
}

/// Writes `s` over its generator metric. Points are re-addressed on the
/// canonical hull of that metric, so reading the file back gives a
/// pointed-isometric structure with the same predicate.
pub fn structure_file(s: &RfrStructure) -> Result<InstanceFile, IoError> {
    let metric = s.hull.generator_metric();
    let canonical = build_hull(&metric)?;
    let to = |p: &PointRef| PointSpec::Ref(s.hull.map_into(&canonical, p));
    let anchors = s
        .pred
        .anchors()
        .iter()
        .map(|a| AnchorSpec {
            p: to(&a.p),
            q: to(&a.q),
            v: a.v,
        })
        .collect();
    Ok(InstanceFile {
        metric: Some(metric_json(&metric)),
        anchors: Some(anchors),
        tuple: Some(s.tuple.iter().map(to).collect()),
        heart: None,
    })
}

pub fn metric_file(m: &FiniteMetric) -> InstanceFile {
    InstanceFile {
        metric: Some(metric_json(m)),
        ..Default::default()
    }
}

pub fn heart_file(h: &HeartStructure) -> InstanceFile {
    InstanceFile {
        heart: Some(h.clone()),
        ..Default::default()
    }
}
