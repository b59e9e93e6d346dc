use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ForestHull;
use crate::metric::FiniteMetric;
use crate::rational::Rat;

/// Random forest with `n_generators` labelled points spread over
/// `n_components` components (capped at `n_generators`). Edge lengths are
/// multiples of `scale / 8`. Deterministic per seed.
///
/// The raw tree deliberately contains dangling unlabelled leaves and degree-2
/// unlabelled vertices so that canonicalisation is exercised.
pub fn random_forest(seed: u64, n_generators: usize, n_components: usize, scale: Rat) -> (FiniteMetric, ForestHull) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_comp = n_components.clamp(1, n_generators.max(1)).min(n_generators);
    let unit = scale / Rat::int(8);
    let step = |rng: &mut ChaCha8Rng, lo: i128| unit * Rat::int(rng.gen_range(lo..=8));

    let comp_of: Vec<usize> = (0..n_generators)
        .map(|g| if g < n_comp { g } else { rng.gen_range(0..n_comp) })
        .collect();

    // Generators are raw vertices 0..n; extra vertices are appended.
    let mut n_vertices = n_generators;
    let mut edges: Vec<(usize, usize, Rat)> = Vec::new();
    let mut comp_vertices: Vec<Vec<usize>> = vec![Vec::new(); n_comp];
    let mut comp_edges: Vec<Vec<usize>> = vec![Vec::new(); n_comp];

    for g in 0..n_generators {
        let c = comp_of[g];
        if comp_vertices[c].is_empty() {
            comp_vertices[c].push(g);
            continue;
        }
        let split = !comp_edges[c].is_empty() && rng.gen_bool(0.5);
        let (site, site_is_generator) = if split {
            let ei = comp_edges[c][rng.gen_range(0..comp_edges[c].len())];
            let (a, b, len) = edges[ei];
            let o = len * Rat::new(rng.gen_range(1..=3), 4);
            let s = n_vertices;
            n_vertices += 1;
            edges[ei] = (a, s, o);
            edges.push((s, b, len - o));
            comp_edges[c].push(edges.len() - 1);
            comp_vertices[c].push(s);
            (s, false)
        } else {
            let v = comp_vertices[c][rng.gen_range(0..comp_vertices[c].len())];
            (v, v < n_generators)
        };
        let leg = step(&mut rng, if site_is_generator { 1 } else { 0 });
        if leg.is_zero() {
            // Identify g with the unlabelled site: reroute its edges to g.
            for e in edges.iter_mut() {
                if e.0 == site {
                    e.0 = g;
                }
                if e.1 == site {
                    e.1 = g;
                }
            }
            let pos = comp_vertices[c]
                .iter()
                .position(|&v| v == site)
                .expect("site in component");
            comp_vertices[c][pos] = g;
        } else {
            edges.push((site, g, leg));
            comp_edges[c].push(edges.len() - 1);
            comp_vertices[c].push(g);
        }
        if rng.gen_bool(0.2) {
            // Dangling unlabelled leaf, removed by canonicalisation.
            let v = comp_vertices[c][rng.gen_range(0..comp_vertices[c].len())];
            let s = n_vertices;
            n_vertices += 1;
            edges.push((v, s, step(&mut rng, 1)));
            comp_edges[c].push(edges.len() - 1);
            comp_vertices[c].push(s);
        }
    }

    let labels: Vec<String> = (0..n_generators).map(|g| format!("g{g}")).collect();
    let hull = ForestHull::from_tree(labels, n_vertices, edges).expect("generated edges form a forest");
    (hull.generator_metric(), hull)
}
