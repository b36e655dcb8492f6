use crate::error::{Error, Result};
use crate::perm::{Permutation, MAX_COLORS};
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::path::Path;

/// One oriented edge u -> v carrying the permutation pi. The constraint it
/// imposes on a coloring s is s(v) != pi(s(u)); the reverse orientation is
/// never stored, it is always pi.invert().
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoratedEdge {
    pub u: usize,
    pub v: usize,
    pub pi: Permutation,
}

/// A multigraph on n vertices with k colors and a permutation per edge.
/// Edges keep their sampling order; self-loops (u = v) and parallel edges are
/// legitimate and never deduplicated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecoratedGraph {
    n: usize,
    k: usize,
    edges: Vec<DecoratedEdge>,
}

impl DecoratedGraph {
    pub fn new(n: usize, k: usize, edges: Vec<DecoratedEdge>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("graph needs at least one vertex"));
        }
        if !(2..=MAX_COLORS).contains(&k) {
            return Err(Error::invalid(format!("k={k} outside supported 2..={MAX_COLORS}")));
        }
        for (i, e) in edges.iter().enumerate() {
            if e.u >= n || e.v >= n {
                return Err(Error::invalid(format!(
                    "edge {i} endpoints ({}, {}) out of range for n={n}",
                    e.u, e.v
                )));
            }
            if e.pi.k() != k {
                return Err(Error::invalid(format!(
                    "edge {i} permutation is on {} colors, graph has {k}",
                    e.pi.k()
                )));
            }
        }
        Ok(DecoratedGraph { n, k, edges })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[DecoratedEdge] {
        &self.edges
    }

    /// Degree sequence of the underlying multigraph; a self-loop adds 2 to
    /// its endpoint, so the total is always 2m.
    pub fn degree_sequence(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n];
        for e in &self.edges {
            deg[e.u] += 1;
            deg[e.v] += 1;
        }
        deg
    }

    /// True when the underlying multigraph has no self-loop and no repeated
    /// unordered vertex pair.
    pub fn is_simple(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        for e in &self.edges {
            if e.u == e.v {
                return false;
            }
            if !seen.insert((e.u.min(e.v), e.u.max(e.v))) {
                return false;
            }
        }
        true
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawGraph = serde_json::from_str(text)
            .map_err(|e| Error::invalid(format!("malformed instance JSON: {e}")))?;
        DecoratedGraph::new(raw.n, raw.k, raw.edges)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())
            .map_err(|e| Error::invalid(format!("writing {}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("reading {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[derive(Deserialize)]
struct RawGraph {
    n: usize,
    k: usize,
    edges: Vec<DecoratedEdge>,
}

/// Parameters of the random model: m edges, each with both endpoints chosen
/// uniformly with replacement among n vertices and an independent uniform
/// permutation on k colors. `seed` is the base seed used when the caller does
/// not supply its own stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub seed: u64,
}

impl ModelParams {
    pub fn new(n: usize, m: usize, k: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n must be positive"));
        }
        if !(2..=MAX_COLORS).contains(&k) {
            return Err(Error::invalid(format!("k={k} outside supported 2..={MAX_COLORS}")));
        }
        Ok(ModelParams { n, m, k, seed })
    }

    /// Average degree 2m/n.
    pub fn d(&self) -> f64 {
        2.0 * self.m as f64 / self.n as f64
    }

    /// Edge count giving average degree closest to d: m = round(d n / 2),
    /// ties away from zero.
    pub fn m_for_degree(n: usize, d: f64) -> usize {
        (d * n as f64 / 2.0).round() as usize
    }
}

/// Samples one instance. Per edge the draw order is fixed: u, then v, then
/// the permutation shuffle; this makes instances reproducible byte-for-byte
/// given the same stream.
pub fn sample_graph<R: Rng>(params: &ModelParams, rng: &mut R) -> DecoratedGraph {
    let mut edges = Vec::with_capacity(params.m);
    for _ in 0..params.m {
        let u = rng.random_range(0..params.n);
        let v = rng.random_range(0..params.n);
        let pi = Permutation::sample(params.k, rng).expect("validated k");
        edges.push(DecoratedEdge { u, v, pi });
    }
    DecoratedGraph::new(params.n, params.k, edges).expect("validated params")
}

/// Per-vertex relabelings rho that turn every edge permutation of a forest
/// into the identity. Each component is rooted at its lowest-index vertex
/// (rho = identity there) and rho propagates outward in breadth-first order:
/// across an edge (u, v, pi) the relabelings must satisfy
/// rho_v = rho_u . pi^{-1}, so a coloring s is proper for the decorated
/// forest exactly when v -> rho_v(s(v)) properly colors the plain forest.
pub fn unwind_tree(g: &DecoratedGraph) -> Result<Vec<Permutation>> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); g.n()]; // (edge idx, other end)
    for (i, e) in g.edges().iter().enumerate() {
        if e.u == e.v {
            return Err(Error::NotAForest(format!("self-loop at vertex {}", e.u)));
        }
        adj[e.u].push((i, e.v));
        adj[e.v].push((i, e.u));
    }

    let id = Permutation::identity(g.k())?;
    let mut rho: Vec<Option<Permutation>> = vec![None; g.n()];
    let mut visited_edge = vec![false; g.m()];
    for root in 0..g.n() {
        if rho[root].is_some() {
            continue;
        }
        rho[root] = Some(id.clone());
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            let rho_u = rho[u].clone().expect("enqueued vertices are labeled");
            for &(ei, w) in &adj[u] {
                if visited_edge[ei] {
                    continue;
                }
                visited_edge[ei] = true;
                if rho[w].is_some() {
                    // Second path to an already-labeled vertex.
                    return Err(Error::NotAForest(format!("cycle through vertex {w}")));
                }
                let e = &g.edges()[ei];
                let rho_w = if e.u == u {
                    rho_u.compose(&e.pi.invert())?
                } else {
                    rho_u.compose(&e.pi)?
                };
                rho[w] = Some(rho_w);
                queue.push_back(w);
            }
        }
    }
    Ok(rho.into_iter().map(|r| r.expect("all vertices visited")).collect())
}

/// Gauge transformation: relabels the colors at every vertex by rho and
/// conjugates each edge permutation accordingly, pi' = rho_v . pi . rho_u^{-1}.
/// The map s -> (v -> rho_v(s(v))) is a bijection between the proper
/// colorings of g and of the result, so counts are preserved.
pub fn apply_relabeling(g: &DecoratedGraph, rho: &[Permutation]) -> Result<DecoratedGraph> {
    if rho.len() != g.n() {
        return Err(Error::invalid(format!(
            "expected {} relabelings, got {}",
            g.n(),
            rho.len()
        )));
    }
    let edges = g
        .edges()
        .iter()
        .map(|e| {
            let pi = rho[e.v].compose(&e.pi)?.compose(&rho[e.u].invert())?;
            Ok(DecoratedEdge { u: e.u, v: e.v, pi })
        })
        .collect::<Result<Vec<_>>>()?;
    DecoratedGraph::new(g.n(), g.k(), edges)
}

/// Decorates a plain skeleton with a coboundary: one uniform permutation
/// pi_w per vertex, edge (u, v) getting pi_v . pi_u^{-1}. Then
/// s -> (w -> pi_w^{-1}(s(w))) is a bijection between permuted colorings and
/// plain proper colorings of the skeleton, so for every sample the permuted
/// count equals the skeleton's chromatic count.
pub fn coboundary_graph<R: Rng>(
    n: usize,
    k: usize,
    skeleton: &[(usize, usize)],
    rng: &mut R,
) -> Result<DecoratedGraph> {
    if n == 0 {
        return Err(Error::invalid("graph needs at least one vertex"));
    }
    if !(2..=MAX_COLORS).contains(&k) {
        return Err(Error::invalid(format!("k={k} outside supported 2..={MAX_COLORS}")));
    }
    let vertex_perms: Vec<Permutation> = (0..n)
        .map(|_| Permutation::sample(k, rng))
        .collect::<Result<_>>()?;
    let edges = skeleton
        .iter()
        .map(|&(u, v)| {
            if u >= n || v >= n {
                return Err(Error::invalid(format!(
                    "skeleton edge ({u}, {v}) out of range for n={n}"
                )));
            }
            let pi = vertex_perms[v].compose(&vertex_perms[u].invert())?;
            Ok(DecoratedEdge { u, v, pi })
        })
        .collect::<Result<Vec<_>>>()?;
    DecoratedGraph::new(n, k, edges)
}

/// Random decorated forest on n vertices used by tests across modules: each
/// vertex past the first attaches to a random earlier vertex with probability
/// 3/4, stored in a random orientation.
#[cfg(test)]
pub(crate) fn random_forest<R: Rng>(n: usize, k: usize, rng: &mut R) -> DecoratedGraph {
    let mut edges = Vec::new();
    for v in 1..n {
        if rng.random_range(0..4) > 0 {
            let u = rng.random_range(0..v);
            let pi = Permutation::sample(k, rng).unwrap();
            if rng.random_range(0..2) == 0 {
                edges.push(DecoratedEdge { u, v, pi });
            } else {
                edges.push(DecoratedEdge { u: v, v: u, pi });
            }
        }
    }
    DecoratedGraph::new(n, k, edges).unwrap()
}
