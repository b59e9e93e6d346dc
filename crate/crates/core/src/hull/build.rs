use std::collections::BTreeMap;

use super::{Edge, ForestHull, HullError};
use crate::metric::{finite_components, is_tree_embeddable, FiniteMetric};
use crate::rational::Rat;

type Adj = Vec<BTreeMap<usize, Rat>>;

/// Distances from `s` to every vertex reachable in `adj`.
fn distances_from(adj: &Adj, s: usize) -> Vec<Option<Rat>> {
    let mut dist = vec![None; adj.len()];
    dist[s] = Some(Rat::ZERO);
    let mut stack = vec![s];
    while let Some(u) = stack.pop() {
        let du = dist[u].expect("visited");
        for (&v, &len) in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(du + len);
                stack.push(v);
            }
        }
    }
    dist
}

impl ForestHull {
    /// Canonicalises an arbitrary weighted forest whose vertices `0..labels.len()`
    /// are the generators: branch-free non-generator leaves are pruned, degree-2
    /// non-generators are suppressed, and the remaining branch points are numbered
    /// by the lexicographically least generator triple whose median they are.
    pub fn from_tree(
        labels: Vec<String>,
        n_vertices: usize,
        edges: Vec<(usize, usize, Rat)>,
    ) -> Result<Self, HullError> {
        let n_gen = labels.len();
        if n_vertices < n_gen {
            return Err(HullError::NotAForest(format!(
                "{n_vertices} vertices for {n_gen} generators"
            )));
        }
        let mut adj: Adj = vec![BTreeMap::new(); n_vertices];
        let mut parent: Vec<usize> = (0..n_vertices).collect();
        fn find(parent: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while parent[r] != r {
                r = parent[r];
            }
            let mut c = x;
            while parent[c] != r {
                let next = parent[c];
                parent[c] = r;
                c = next;
            }
            r
        }
        for &(a, b, len) in &edges {
            if a >= n_vertices || b >= n_vertices {
                return Err(HullError::NotAForest(format!("edge ({a}, {b}) names a missing vertex")));
            }
            if !(len > Rat::ZERO) {
                return Err(HullError::NotAForest(format!(
                    "edge ({a}, {b}) has non-positive length {len}"
                )));
            }
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra == rb {
                return Err(HullError::NotAForest(format!("edge ({a}, {b}) closes a cycle")));
            }
            parent[ra] = rb;
            adj[a].insert(b, len);
            adj[b].insert(a, len);
        }

        let mut alive = vec![true; n_vertices];
        let mut changed = true;
        while changed {
            changed = false;
            for v in n_gen..n_vertices {
                if !alive[v] || adj[v].len() > 2 {
                    continue;
                }
                let nbrs: Vec<(usize, Rat)> = adj[v].iter().map(|(&u, &l)| (u, l)).collect();
                for &(u, _) in &nbrs {
                    adj[u].remove(&v);
                }
                adj[v].clear();
                if let [(u, l1), (w, l2)] = nbrs[..] {
                    adj[u].insert(w, l1 + l2);
                    adj[w].insert(u, l1 + l2);
                }
                alive[v] = false;
                changed = true;
            }
        }

        let gen_dist: Vec<Vec<Option<Rat>>> = (0..n_gen).map(|g| distances_from(&adj, g)).collect();
        let on_segment = |i: usize, j: usize, s: usize| -> bool {
            match (gen_dist[i][s], gen_dist[j][s], gen_dist[i][j]) {
                (Some(a), Some(b), Some(c)) => a + b == c,
                _ => false,
            }
        };
        let mut steiner: Vec<((usize, usize, usize), usize)> = Vec::new();
        for s in (n_gen..n_vertices).filter(|&s| alive[s]) {
            let key = (0..n_gen)
                .flat_map(|i| ((i + 1)..n_gen).flat_map(move |j| ((j + 1)..n_gen).map(move |k| (i, j, k))))
                .find(|&(i, j, k)| on_segment(i, j, s) && on_segment(j, k, s) && on_segment(i, k, s))
                .expect("a branch point of a pruned tree is a median of three generators");
            steiner.push((key, s));
        }
        steiner.sort();
        let mut new_id = vec![usize::MAX; n_vertices];
        for (g, id) in new_id.iter_mut().enumerate().take(n_gen) {
            *id = g;
        }
        for (rank, &(_, s)) in steiner.iter().enumerate() {
            new_id[s] = n_gen + rank;
        }
        let mut canon: Vec<Edge> = Vec::new();
        for (u, nbrs) in adj.iter().enumerate() {
            for (&v, &len) in nbrs {
                let (a, b) = (new_id[u], new_id[v]);
                if a < b {
                    canon.push(Edge { a, b, len });
                }
            }
        }
        canon.sort_by_key(|x| (x.a, x.b));
        Ok(ForestHull::assemble(labels, n_gen + steiner.len(), canon))
    }
}

/// Builds the canonical hull of a tree-embeddable metric by attaching each
/// generator, in input order, at its Gromov-product point on the hull of the
/// previous generators of its component.
pub fn build_hull(space: &FiniteMetric) -> Result<ForestHull, HullError> {
    let check = is_tree_embeddable(space)?;
    if let Some(w) = check.witness {
        return Err(HullError::NotTreeEmbeddable(w));
    }
    let n = space.len();
    let d = |i: usize, j: usize| space.d(i, j).finite().expect("same component");
    // Builder vertex ids: generators keep their index until they are merged
    // into a branch point; `at[g]` is the builder vertex realising generator g.
    let mut adj: Adj = vec![BTreeMap::new(); n];
    let mut at: Vec<usize> = (0..n).collect();

    for block in finite_components(space) {
        for (idx, &x) in block.iter().enumerate() {
            if idx == 0 {
                continue;
            }
            let placed = &block[..idx];
            let mut best: Option<(Rat, usize, usize)> = None;
            for (ai, &a) in placed.iter().enumerate() {
                for &b in &placed[ai..] {
                    let gp = space.gromov_product(a, b, x).expect("same component");
                    if best.is_none_or(|(bg, _, _)| gp < bg) {
                        best = Some((gp, a, b));
                    }
                }
            }
            let (leg, a, b) = best.expect("component has a placed generator");
            let t = d(a, x) - leg;
            let site = locate(&mut adj, at[a], at[b], t);
            if leg.is_zero() {
                // x sits on the existing tree; the site is a fresh or branch vertex.
                at[x] = site;
            } else {
                adj[x].insert(site, leg);
                adj[site].insert(x, leg);
            }
        }
    }

    // Relabel so that generator g is vertex g; other builder vertices follow.
    let total = adj.len();
    let mut id = vec![usize::MAX; total];
    for (g, &v) in at.iter().enumerate() {
        id[v] = g;
    }
    let mut next = n;
    for slot in id.iter_mut() {
        if *slot == usize::MAX {
            *slot = next;
            next += 1;
        }
    }
    let mut edges = Vec::new();
    for (u, nbrs) in adj.iter().enumerate() {
        for (&v, &len) in nbrs {
            if u < v {
                edges.push((id[u], id[v], len));
            }
        }
    }
    ForestHull::from_tree(space.labels().to_vec(), total, edges)
}

/// Returns the builder vertex at distance `t` from `u` along the path to `v`,
/// splitting an edge when needed.
fn locate(adj: &mut Adj, u: usize, v: usize, t: Rat) -> usize {
    let dist_v = distances_from(adj, v);
    let mut cur = u;
    let mut walked = Rat::ZERO;
    loop {
        if walked == t {
            return cur;
        }
        let remaining = dist_v[cur].expect("path exists");
        let (next, len) = adj[cur]
            .iter()
            .map(|(&w, &l)| (w, l))
            .find(|&(w, l)| dist_v[w] == Some(remaining - l))
            .expect("geodesic step exists");
        if walked + len > t {
            let s = adj.len();
            let o = t - walked;
            adj.push(BTreeMap::new());
            adj[cur].remove(&next);
            adj[next].remove(&cur);
            adj[cur].insert(s, o);
            adj[s].insert(cur, o);
            adj[next].insert(s, len - o);
            adj[s].insert(next, len - o);
            return s;
        }
        walked += len;
        cur = next;
    }
}
