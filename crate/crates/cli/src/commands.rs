use std::path::{Path, PathBuf};

use rforest::distortion::{min_distortion, DistortionError, SearchLimits};
use rforest::extension::{extend_tuple, ExtensionError};
use rforest::gen;
use rforest::heart::{orbit_check, qf_fingerprint, scale_structure, validate_heart, HeartPoint, HeartStructure};
use rforest::io::{self, Instance, InstanceFile};
use rforest::metric::{check_metric, is_tree_embeddable, FiniteMetric};
use rforest::model::{
    independence_amalgam, interpolate_path, order_witness, pointed_iso_check, type_distance, unzip_path, ModelError,
};
use rforest::predicate::{check_one_one_lipschitz, AnchorPredicate, PredicateError, RfrStructure};
use rforest::{build_hull, Rat};
use serde::Serialize;
use serde_json::{json, Value};

use crate::{read_input, Command, Failure, GenKind, Outcome, Params};

fn default_eps() -> Rat {
    Rat::new(1, 4)
}

fn to_value(x: &impl Serialize) -> Value {
    serde_json::to_value(x).expect("reports serialize")
}

fn verdict(pass: bool, v: Value) -> Outcome {
    if pass {
        Outcome::Pass(v)
    } else {
        Outcome::Violation(v)
    }
}

fn parse(path: &Path) -> Result<Instance, Failure> {
    io::parse_instance(&read_input(&path.to_path_buf())?)
        .map_err(|e| Failure::malformed(format!("{}: {e}", path.display())))
}

fn structure(path: &Path) -> Result<RfrStructure, Failure> {
    io::load_structure(&parse(path)?).map_err(|e| Failure::malformed(format!("{}: {e}", path.display())))
}

fn heart(path: &Path) -> Result<HeartStructure, Failure> {
    match parse(path)? {
        Instance::Heart(h) => Ok(h),
        _ => Err(Failure::malformed(format!(
            "{}: expected a heart instance",
            path.display()
        ))),
    }
}

fn write_file(out: Option<&PathBuf>, file: &InstanceFile) -> Result<(), Failure> {
    if let Some(path) = out {
        let text = serde_json::to_string_pretty(file).expect("instances serialize");
        std::fs::write(path, text + "\n").map_err(|e| Failure::malformed(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn structure_value(s: &RfrStructure) -> Result<Value, Failure> {
    io::structure_file(s)
        .map(|f| to_value(&f))
        .map_err(|e| Failure::precondition(e.to_string()))
}

fn distortion_failure(e: DistortionError) -> Failure {
    match e {
        DistortionError::ResourceLimit { required, limit } => {
            Failure::limit(e.to_string(), json!({"required": required, "limit": limit}))
        }
        DistortionError::NodeLimit(n) => Failure::limit(e.to_string(), json!({"nodes": n})),
        other => Failure::precondition(other),
    }
}

fn model_failure(e: ModelError) -> Failure {
    match e {
        ModelError::Distortion(d) => distortion_failure(d),
        other => Failure::precondition(other),
    }
}

/// The caller's K, or one that is large for every given structure.
fn resolve_k(params: &mut Params, structures: &[&RfrStructure]) -> Rat {
    let k = params.k.unwrap_or_else(|| {
        structures
            .iter()
            .map(|s| gen::large_k(&s.hull, &s.tuple))
            .max()
            .unwrap_or(Rat::ONE)
    });
    params.k = Some(k);
    k
}

fn resolve(slot: &mut Option<Rat>) -> Result<Rat, Failure> {
    let v = *slot.get_or_insert_with(default_eps);
    if v <= Rat::ZERO {
        return Err(Failure::malformed(format!("tolerances must be positive, got {v}")));
    }
    Ok(v)
}

pub fn run(command: Command, params: &mut Params) -> (&'static str, Result<Outcome, Failure>) {
    match command {
        Command::Check { file } => ("check", check(&file, params)),
        Command::Distortion { a, b } => ("distortion", distortion(&a, &b, params)),
        Command::Extend { source, target } => ("extend", extend(&source, &target, params)),
        Command::Unzip { file, a_len, steps } => ("unzip", unzip(&file, a_len, steps, params)),
        Command::Interp { q0, q1, a_len, steps } => ("interp", interp(&q0, &q1, a_len, steps, params)),
        Command::Typedist { file, a_len } => ("typedist", typedist(&file, a_len)),
        Command::Witness { n, out } => ("witness", witness(n, out.as_ref())),
        Command::Heart {
            file,
            scale,
            params: elems,
        } => ("heart", heart_cmd(&file, scale, &elems, params)),
        Command::Gen { kind, seed, n, out } => ("gen", generate(kind, seed, n, out.as_ref(), params)),
        Command::Iso { a, b } => ("iso", iso(&a, &b, params)),
        Command::Indep { m, b0, b1, c0, c1 } => ("indep", indep([&m, &b0, &b1, &c0, &c1], params)),
    }
}

fn check_tree(metric: &FiniteMetric) -> Result<Option<Value>, Failure> {
    let report = check_metric(metric);
    if !report.valid {
        return Ok(Some(json!({"metric": report})));
    }
    let tree = is_tree_embeddable(metric).map_err(|e| Failure::malformed(e.to_string()))?;
    if !tree.embeddable {
        let labels = tree.witness.map(|w| w.map(|i| metric.labels()[i].clone()));
        return Ok(Some(json!({"metric": report, "tree": tree, "witness_labels": labels})));
    }
    Ok(None)
}

fn check(file: &Path, params: &mut Params) -> Result<Outcome, Failure> {
    let (metric, anchors, tuple) = match parse(file)? {
        Instance::Heart(mut h) => {
            if let Some(d) = params.delta {
                h.delta = d;
            }
            let report = validate_heart(&h);
            return Ok(verdict(report.valid, json!({"heart": report})));
        }
        Instance::Metric(m) => (m, Vec::new(), None),
        Instance::Structure { metric, anchors, tuple } => (metric, anchors, tuple),
    };
    if let Some(v) = check_tree(&metric)? {
        return Ok(Outcome::Violation(v));
    }
    let hull = build_hull(&metric).map_err(|e| Failure::malformed(e.to_string()))?;
    let tree = json!({"embeddable": true, "witness": null});
    let resolved = io::resolve_anchors(&hull, &anchors).map_err(|e| Failure::malformed(e.to_string()))?;
    let pred = match AnchorPredicate::new(&hull, resolved) {
        Ok(p) => p,
        Err(e @ (PredicateError::Inconsistent(..) | PredicateError::ValueOutOfRange(_))) => {
            let pair = match e {
                PredicateError::Inconsistent(i, j) => json!([i, j]),
                _ => Value::Null,
            };
            return Ok(Outcome::Violation(
                json!({"tree": tree, "anchors": {"message": e.to_string(), "pair": pair}}),
            ));
        }
        Err(e) => return Err(Failure::malformed(e.to_string())),
    };
    if anchors.is_empty() && tuple.is_none() {
        return Ok(Outcome::Pass(json!({"metric": check_metric(&metric), "tree": tree})));
    }
    let tuple = io::resolve_tuple(&hull, tuple.as_deref()).map_err(|e| Failure::malformed(e.to_string()))?;
    let s = RfrStructure::new(hull, pred, tuple).map_err(|e| Failure::malformed(e.to_string()))?;
    let lip = check_one_one_lipschitz(&s, resolve(&mut params.eps)?);
    Ok(verdict(
        lip.pass,
        json!({"metric": check_metric(&metric), "tree": tree, "lipschitz": lip}),
    ))
}

fn distortion(a: &Path, b: &Path, params: &mut Params) -> Result<Outcome, Failure> {
    let (sa, sb) = (structure(a)?, structure(b)?);
    let k = resolve_k(params, &[&sa, &sb]);
    let mesh = resolve(&mut params.mesh)?;
    let limits = SearchLimits {
        max_sample: params.max_sample,
        ..SearchLimits::default()
    };
    let (m, xa, xb) = min_distortion(&sa, &sb, k, mesh, limits).map_err(distortion_failure)?;
    let slack = Rat::int(4) * mesh;
    Ok(Outcome::Pass(json!({
        "rho": m.rho,
        "certificate": {"lower": (m.rho - slack).max(Rat::ZERO), "upper": m.rho + slack},
        "correlation": m.correlation,
        "report": m.report,
        "nodes": m.nodes,
        "samples": [xa.points, xb.points],
    })))
}

fn extend(source: &Path, target: &Path, params: &mut Params) -> Result<Outcome, Failure> {
    let (s, t) = (structure(source)?, structure(target)?);
    let k = resolve_k(params, &[&t]);
    let (eps, mesh) = (resolve(&mut params.eps)?, resolve(&mut params.mesh)?);
    let limits = SearchLimits {
        max_sample: params.max_sample,
        ..SearchLimits::default()
    };
    let ext = extend_tuple(&s, &t, k, eps, mesh, limits).map_err(|e| match e {
        ExtensionError::Distortion(d) => distortion_failure(d),
        other => Failure::precondition(other),
    })?;
    let mut v = to_value(&ext);
    v["within_bound"] = json!(ext.within_bound());
    v["extended"] = structure_value(&ext.extended)?;
    Ok(verdict(ext.within_bound(), v))
}

fn unzip(file: &Path, a_len: usize, steps: usize, params: &mut Params) -> Result<Outcome, Failure> {
    let s = structure(file)?;
    let k = resolve_k(params, &[&s]);
    let eps = resolve(&mut params.eps)?;
    let path = unzip_path(&s, a_len, steps, k, eps).map_err(model_failure)?;
    Ok(verdict(path.start_match && path.end_match, to_value(&path)))
}

fn interp(q0: &Path, q1: &Path, a_len: usize, steps: usize, params: &mut Params) -> Result<Outcome, Failure> {
    let (s0, s1) = (structure(q0)?, structure(q1)?);
    let k = resolve_k(params, &[&s0, &s1]);
    let eps = resolve(&mut params.eps)?;
    let path = interpolate_path(&s0, &s1, a_len, steps, k, eps).map_err(model_failure)?;
    Ok(verdict(path.start_match && path.end_match, to_value(&path)))
}

fn typedist(file: &Path, a_len: usize) -> Result<Outcome, Failure> {
    let s = structure(file)?;
    if s.tuple.len() != a_len + 2 {
        return Err(Failure::precondition(format!(
            "tuple has {} entries; expected {}",
            s.tuple.len(),
            a_len + 2
        )));
    }
    let t = &s.tuple;
    let d = type_distance(&s.hull, &t[..a_len], &t[a_len], &t[a_len + 1]).map_err(Failure::precondition)?;
    Ok(Outcome::Pass(json!({"type_distance": d})))
}

fn witness(n: usize, out: Option<&PathBuf>) -> Result<Outcome, Failure> {
    if n == 0 {
        return Err(Failure::malformed("n must be positive"));
    }
    let s = order_witness(n);
    let file = io::structure_file(&s).map_err(|e| Failure::precondition(e.to_string()))?;
    write_file(out, &file)?;
    Ok(Outcome::Pass(json!({"points": s.tuple.len(), "instance": file})))
}

fn heart_cmd(file: &Path, scale: Option<Rat>, elems: &[usize], params: &mut Params) -> Result<Outcome, Failure> {
    let mut h = heart(file)?;
    if let Some(d) = params.delta {
        h.delta = d;
    }
    params.delta = Some(h.delta);
    let points: Vec<HeartPoint> = elems.iter().map(|&i| HeartPoint::Elem(i)).collect();
    let report = validate_heart(&h);
    let orbits = orbit_check(&h, &points).map_err(|e| Failure::malformed(e.to_string()))?;
    let fingerprints: Vec<_> = (0..h.len())
        .map(|i| qf_fingerprint(&h, &[HeartPoint::Elem(i)], &points).expect("checked points"))
        .collect();
    let mut v = json!({"validation": report, "orbits": orbits, "fingerprints": fingerprints});
    if let Some(s) = scale {
        let scaled = scale_structure(&h, s).map_err(Failure::malformed)?;
        v["scaled"] = json!({"structure": scaled, "validation": validate_heart(&scaled)});
    }
    Ok(verdict(report.valid && orbits.pass, v))
}

fn generate(
    kind: GenKind,
    seed: u64,
    n: usize,
    out: Option<&PathBuf>,
    params: &mut Params,
) -> Result<Outcome, Failure> {
    let sfile = |s: &RfrStructure| io::structure_file(s).map_err(|e| Failure::precondition(e.to_string()));
    let mut extra = json!({});
    let files: Vec<(&str, InstanceFile)> = match kind {
        GenKind::Tree => vec![(
            "",
            io::metric_file(&rforest::hull::random_forest(seed, n.max(1), 1, Rat::int(4)).0),
        )],
        GenKind::Violation => {
            let (m, quad) = gen::planted_violation(seed, n);
            extra = json!({"planted": quad});
            vec![("", io::metric_file(&m))]
        }
        GenKind::Structure => {
            let mesh = resolve(&mut params.mesh)?;
            let mut rng = gen::rng(seed);
            vec![(
                "",
                sfile(&gen::random_structure(&mut rng, n.max(1), 1, Rat::int(2), 4, mesh))?,
            )]
        }
        GenKind::Heart => vec![("", io::heart_file(&gen::heart_instance(seed)))],
        GenKind::Unzip => {
            let (s, a_len) = gen::unzip_instance(seed);
            extra = json!({"a_len": a_len});
            vec![("", sfile(&s)?)]
        }
        GenKind::Extension => {
            let inst = gen::extension_instance(seed, n.clamp(2, 5), 16);
            params.k = Some(inst.k);
            params.mesh = Some(inst.mesh);
            vec![("source", sfile(&inst.source)?), ("target", sfile(&inst.target)?)]
        }
        GenKind::Interp => {
            let eps = resolve(&mut params.eps)?;
            let (q0, q1, a_len) = gen::interpolate_instance(seed, eps);
            extra = json!({"a_len": a_len});
            vec![("q0", sfile(&q0)?), ("q1", sfile(&q1)?)]
        }
        GenKind::Amalgam => {
            let inst = gen::amalgam_instance(seed);
            params.eps = Some(inst.eps);
            let roles = [
                ("m", &inst.m),
                ("b0", &inst.b0),
                ("b1", &inst.b1),
                ("c0", &inst.c0),
                ("c1", &inst.c1),
            ];
            roles
                .into_iter()
                .map(|(r, s)| Ok((r, sfile(s)?)))
                .collect::<Result<_, Failure>>()?
        }
    };
    for (role, file) in &files {
        let path = out.map(|o| {
            if role.is_empty() {
                o.clone()
            } else {
                PathBuf::from(format!("{}.{role}.json", o.display()))
            }
        });
        write_file(path.as_ref(), file)?;
    }
    if let [("", file)] = &files[..] {
        extra["instance"] = to_value(file);
    } else {
        extra["instances"] = files
            .iter()
            .map(|(r, f)| (r.to_string(), to_value(f)))
            .collect::<serde_json::Map<_, _>>()
            .into();
    }
    Ok(Outcome::Pass(extra))
}

fn iso(a: &Path, b: &Path, params: &mut Params) -> Result<Outcome, Failure> {
    let (sa, sb) = (structure(a)?, structure(b)?);
    let report = pointed_iso_check(&sa, &sb, resolve(&mut params.eps)?);
    Ok(verdict(report.iso, to_value(&report)))
}

fn indep(files: [&PathBuf; 5], params: &mut Params) -> Result<Outcome, Failure> {
    let s: Vec<RfrStructure> = files.iter().map(|f| structure(f)).collect::<Result<_, _>>()?;
    let eps = resolve(&mut params.eps)?;
    let am = independence_amalgam(&s[0], &s[1], &s[2], &s[3], &s[4], eps).map_err(model_failure)?;
    let pass = am.base_independent && am.restriction_match.iter().all(|&x| x) && am.lipschitz.pass && am.glue_pass;
    let mut v = to_value(&am);
    v["instance"] = structure_value(&am.structure)?;
    Ok(verdict(pass, v))
}
