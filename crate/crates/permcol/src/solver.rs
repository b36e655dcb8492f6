use crate::error::{Error, Result};
use crate::graph::DecoratedGraph;
use crate::perm::Permutation;
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

/// Colors are supported up to k = 64 here so that color sets fit in one u64
/// mask; the graph model itself allows larger k.
pub const MAX_SOLVER_COLORS: usize = 64;

/// Default enumeration guard: counting and Z refuse when k^n > 2^24 unless
/// the caller raises the cap explicitly.
pub const DEFAULT_LOG2_CAP: f64 = 24.0;

/// One color per vertex.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Coloring(pub Vec<u8>);

impl Coloring {
    pub fn colors(&self) -> &[u8] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Colorable,
    Uncolorable,
}

/// Outcome of a decision or counting run. `count` is exact when present, and
/// present only from counting mode; `nodes_expanded` is the number of partial
/// assignments the search tried.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "SolveResultWire", try_from = "SolveResultWire")]
pub struct SolveResult {
    pub status: Status,
    pub witness: Option<Coloring>,
    pub count: Option<BigUint>,
    pub nodes_expanded: u64,
}

/// JSON shape: {"status":…, "witness":[…]?, "count":"<decimal string>"?, "nodes":…}.
#[derive(Serialize, Deserialize, Clone)]
struct SolveResultWire {
    status: Status,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    witness: Option<Vec<u8>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    count: Option<String>,
    nodes: u64,
}

impl From<SolveResult> for SolveResultWire {
    fn from(r: SolveResult) -> Self {
        SolveResultWire {
            status: r.status,
            witness: r.witness.map(|w| w.0),
            count: r.count.map(|c| c.to_string()),
            nodes: r.nodes_expanded,
        }
    }
}

impl TryFrom<SolveResultWire> for SolveResult {
    type Error = String;

    fn try_from(w: SolveResultWire) -> std::result::Result<Self, String> {
        let count = w
            .count
            .map(|s| s.parse::<BigUint>().map_err(|e| format!("bad count: {e}")))
            .transpose()?;
        Ok(SolveResult {
            status: w.status,
            witness: w.witness.map(Coloring),
            count,
            nodes_expanded: w.nodes,
        })
    }
}

fn full_mask(k: usize) -> u64 {
    if k == 64 { u64::MAX } else { (1u64 << k) - 1 }
}

fn check_coloring_shape(g: &DecoratedGraph, s: &Coloring) -> Result<()> {
    if s.0.len() != g.n() {
        return Err(Error::invalid(format!(
            "coloring has {} entries, graph has {} vertices",
            s.0.len(),
            g.n()
        )));
    }
    if let Some(&c) = s.0.iter().find(|&&c| c as usize >= g.k()) {
        return Err(Error::invalid(format!("color {c} out of range for k={}", g.k())));
    }
    Ok(())
}

fn check_solver_k(g: &DecoratedGraph) -> Result<()> {
    if g.k() > MAX_SOLVER_COLORS {
        return Err(Error::invalid(format!(
            "solver supports k <= {MAX_SOLVER_COLORS}, got {}",
            g.k()
        )));
    }
    Ok(())
}

fn check_cap(g: &DecoratedGraph, log2_cap: f64) -> Result<()> {
    let log2_states = g.n() as f64 * (g.k() as f64).log2();
    if log2_states > log2_cap {
        return Err(Error::CapExceeded { log2_states, log2_cap });
    }
    Ok(())
}

/// True iff s(v) != pi(s(u)) on every edge; a self-loop (v, v, pi) therefore
/// demands that s(v) is not a fixed point of pi.
pub fn is_proper(g: &DecoratedGraph, s: &Coloring) -> Result<bool> {
    check_coloring_shape(g, s)?;
    Ok(g.edges().iter().all(|e| s.0[e.v] != e.pi.map(s.0[e.u])))
}

/// Colors available to v: k minus the size of the forbidden set. Each
/// neighbor u contributes pi_{u,v}(s(u)); a self-loop contributes both
/// pi(s(v)) and pi^{-1}(s(v)), denying a color to itself in each direction.
/// For proper s the result is at least 1 because s(v) itself is never in the
/// set.
///
/// This is the degree-driven quantity behind the occupancy law (one ball per
/// edge side, k-1 bins). On a self-loop it is not the same as the number of
/// colors v can be recolored to; that count, which drives `weight`, forbids
/// the fixed points of the loop permutation instead.
pub fn available_colors(g: &DecoratedGraph, s: &Coloring, v: usize) -> Result<usize> {
    if v >= g.n() {
        return Err(Error::invalid(format!("vertex {v} out of range")));
    }
    if !is_proper(g, s)? {
        return Err(Error::invalid("coloring is not proper"));
    }
    check_solver_k(g)?;
    Ok(available_unchecked(g, s.colors(), v))
}

fn available_unchecked(g: &DecoratedGraph, s: &[u8], v: usize) -> usize {
    let mut forbidden = 0u64;
    for e in g.edges() {
        if e.u == v && e.v == v {
            forbidden |= 1 << e.pi.map(s[v]);
            forbidden |= 1 << e.pi.invert().map(s[v]);
        } else if e.v == v {
            forbidden |= 1 << e.pi.map(s[e.u]);
        } else if e.u == v {
            forbidden |= 1 << e.pi.invert().map(s[e.v]);
        }
    }
    g.k() - forbidden.count_ones() as usize
}

/// Exact decision by backtracking with forward checking. Variable order is
/// fewest-remaining-colors, ties to the lowest index; color order ascending,
/// so runs are deterministic. `budget` caps the number of assignments tried;
/// hitting it is an error, never a wrong status.
pub fn decide(g: &DecoratedGraph, budget: Option<u64>) -> Result<SolveResult> {
    check_solver_k(g)?;
    let mut ctx = SearchCtx::new(g, budget.unwrap_or(u64::MAX));
    if ctx.domains.contains(&0) {
        // A self-loop already excludes every color somewhere.
        return Ok(SolveResult {
            status: Status::Uncolorable,
            witness: None,
            count: None,
            nodes_expanded: 0,
        });
    }
    let found = ctx.search()?;
    Ok(SolveResult {
        status: if found { Status::Colorable } else { Status::Uncolorable },
        witness: if found {
            Some(Coloring(ctx.assigned.iter().map(|a| a.unwrap()).collect()))
        } else {
            None
        },
        count: None,
        nodes_expanded: ctx.nodes,
    })
}

struct SearchCtx {
    domains: Vec<u64>,
    assigned: Vec<Option<u8>>,
    // (w, pi): assigning color c here removes pi(c) at w.
    neighbors: Vec<Vec<(usize, Permutation)>>,
    unassigned: usize,
    nodes: u64,
    budget: u64,
}

impl SearchCtx {
    fn new(g: &DecoratedGraph, budget: u64) -> Self {
        let full = full_mask(g.k());
        let mut domains = vec![full; g.n()];
        let mut neighbors: Vec<Vec<(usize, Permutation)>> = vec![Vec::new(); g.n()];
        for e in g.edges() {
            if e.u == e.v {
                domains[e.u] &= !e.pi.fixed_point_mask();
            } else {
                neighbors[e.u].push((e.v, e.pi.clone()));
                neighbors[e.v].push((e.u, e.pi.invert()));
            }
        }
        SearchCtx {
            domains,
            assigned: vec![None; g.n()],
            neighbors,
            unassigned: g.n(),
            nodes: 0,
            budget,
        }
    }

    fn search(&mut self) -> Result<bool> {
        if self.unassigned == 0 {
            return Ok(true);
        }
        let v = (0..self.domains.len())
            .filter(|&v| self.assigned[v].is_none())
            .min_by_key(|&v| self.domains[v].count_ones())
            .expect("unassigned vertex exists");
        let mut rest = self.domains[v];
        while rest != 0 {
            let c = rest.trailing_zeros() as u8;
            rest &= rest - 1;
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(Error::BudgetExhausted { budget: self.budget, expanded: self.nodes });
            }
            self.assigned[v] = Some(c);
            self.unassigned -= 1;
            let mut trail: Vec<(usize, u64)> = Vec::new();
            let mut dead = false;
            for (w, pi) in &self.neighbors[v] {
                if self.assigned[*w].is_some() {
                    continue;
                }
                let bit = 1u64 << pi.map(c);
                if self.domains[*w] & bit != 0 {
                    trail.push((*w, self.domains[*w]));
                    self.domains[*w] &= !bit;
                    if self.domains[*w] == 0 {
                        dead = true;
                        break;
                    }
                }
            }
            if !dead && self.search()? {
                return Ok(true);
            }
            for (w, old) in trail.into_iter().rev() {
                self.domains[w] = old;
            }
            self.assigned[v] = None;
            self.unassigned += 1;
        }
        Ok(false)
    }
}

/// Visits every proper coloring exactly once, in lexicographic order of the
/// color vector. Returns the number of partial assignments explored.
pub fn enumerate_proper(
    g: &DecoratedGraph,
    log2_cap: f64,
    visitor: &mut dyn FnMut(&[u8]),
) -> Result<u64> {
    check_solver_k(g)?;
    check_cap(g, log2_cap)?;
    let full = full_mask(g.k());
    // loop_allowed[v]: colors not excluded by self-loops at v.
    let mut loop_allowed = vec![full; g.n()];
    // earlier[v]: (w, pi) with w < v; the assignment at w forbids pi(s(w)) at v.
    let mut earlier: Vec<Vec<(usize, Permutation)>> = vec![Vec::new(); g.n()];
    for e in g.edges() {
        if e.u == e.v {
            loop_allowed[e.u] &= !e.pi.fixed_point_mask();
        } else if e.u < e.v {
            earlier[e.v].push((e.u, e.pi.clone()));
        } else {
            earlier[e.u].push((e.v, e.pi.invert()));
        }
    }
    let mut cols = vec![0u8; g.n()];
    let mut nodes = 0u64;
    dfs(0, &loop_allowed, &earlier, &mut cols, &mut nodes, visitor);
    return Ok(nodes);

    fn dfs(
        v: usize,
        loop_allowed: &[u64],
        earlier: &[Vec<(usize, Permutation)>],
        cols: &mut Vec<u8>,
        nodes: &mut u64,
        visitor: &mut dyn FnMut(&[u8]),
    ) {
        if v == cols.len() {
            visitor(cols);
            return;
        }
        let mut allowed = loop_allowed[v];
        for (w, pi) in &earlier[v] {
            allowed &= !(1u64 << pi.map(cols[*w]));
        }
        while allowed != 0 {
            let c = allowed.trailing_zeros() as u8;
            allowed &= allowed - 1;
            *nodes += 1;
            cols[v] = c;
            dfs(v + 1, loop_allowed, earlier, cols, nodes, visitor);
        }
    }
}

/// Exact number of proper colorings under the default k^n cap.
pub fn count_colorings(g: &DecoratedGraph) -> Result<BigUint> {
    count_colorings_with_cap(g, DEFAULT_LOG2_CAP)
}

pub fn count_colorings_with_cap(g: &DecoratedGraph, log2_cap: f64) -> Result<BigUint> {
    Ok(count_result_with_cap(g, log2_cap)?.count.expect("counting mode sets count"))
}

/// Counting run packaged with status, a witness (the lexicographically first
/// proper coloring, if any), and nodes explored.
pub fn count_result_with_cap(g: &DecoratedGraph, log2_cap: f64) -> Result<SolveResult> {
    let mut count: u128 = 0;
    let mut witness: Option<Coloring> = None;
    let nodes = enumerate_proper(g, log2_cap, &mut |cols| {
        if count == 0 {
            witness = Some(Coloring(cols.to_vec()));
        }
        count += 1;
    })?;
    Ok(SolveResult {
        status: if count > 0 { Status::Colorable } else { Status::Uncolorable },
        witness,
        count: Some(BigUint::from(count)),
        nodes_expanded: nodes,
    })
}

/// w(s) = prod_v 1/c(s,v) for proper s, else 0, in exact rationals. Here
/// c(s,v) is the recolor count: the number of colors v can take with every
/// other vertex fixed while staying proper. Cross edges forbid the oriented
/// image of the neighbor's color; a self-loop forbids the fixed points of
/// its permutation (recoloring v to c violates the loop iff pi(c) = c).
///
/// With this convention the proper colorings form a cube subset whose
/// line counts are exactly c(s,v), so the subset inequality Z >= 1 applies
/// verbatim: colorable graphs always have z_weight >= 1, loops included.
pub fn weight(g: &DecoratedGraph, s: &Coloring) -> Result<BigRational> {
    check_solver_k(g)?;
    if !is_proper(g, s)? {
        return Ok(BigRational::from_integer(0.into()));
    }
    let denom = WeightPlan::new(g).weight_denom(s.colors());
    Ok(BigRational::new(BigInt::from(1), BigInt::from(denom)))
}

/// Z = sum over proper colorings of w(s), exact. Zero iff uncolorable; at
/// least 1 otherwise.
pub fn z_weight(g: &DecoratedGraph) -> Result<BigRational> {
    z_weight_with_cap(g, DEFAULT_LOG2_CAP)
}

pub fn z_weight_with_cap(g: &DecoratedGraph, log2_cap: f64) -> Result<BigRational> {
    let plan = WeightPlan::new(g);
    let mut z = BigRational::from_integer(0.into());
    enumerate_proper(g, log2_cap, &mut |cols| {
        z += BigRational::new(BigInt::from(1), BigInt::from(plan.weight_denom(cols)));
    })?;
    Ok(z)
}

/// Floating companion of z_weight for instances past comfortable exact
/// range; same enumeration order, so still deterministic.
pub fn z_weight_float(g: &DecoratedGraph, log2_cap: f64) -> Result<f64> {
    let plan = WeightPlan::new(g);
    let mut z = 0.0f64;
    enumerate_proper(g, log2_cap, &mut |cols| {
        z += 1.0 / plan.weight_denom(cols) as f64;
    })?;
    Ok(z)
}

/// Precomputed edge tables for computing the recolor-count product
/// prod_v c(s,v) in O(n + m) per coloring. The product fits u128 because it
/// is at most k^n, capped. Loop constraints do not depend on the current
/// coloring, so their forbidden masks are folded in up front.
struct WeightPlan {
    k: usize,
    loop_forbidden: Vec<u64>,
    // Cross edges only, as (u, v, pi, pi_inv).
    edges: Vec<(usize, usize, Permutation, Permutation)>,
}

impl WeightPlan {
    fn new(g: &DecoratedGraph) -> Self {
        let mut loop_forbidden = vec![0u64; g.n()];
        let mut edges = Vec::new();
        for e in g.edges() {
            if e.u == e.v {
                loop_forbidden[e.u] |= e.pi.fixed_point_mask();
            } else {
                edges.push((e.u, e.v, e.pi.clone(), e.pi.invert()));
            }
        }
        WeightPlan { k: g.k(), loop_forbidden, edges }
    }

    fn weight_denom(&self, s: &[u8]) -> u128 {
        let mut forbidden = self.loop_forbidden.clone();
        for (u, v, pi, pi_inv) in &self.edges {
            forbidden[*v] |= 1 << pi.map(s[*u]);
            forbidden[*u] |= 1 << pi_inv.map(s[*v]);
        }
        forbidden
            .iter()
            .map(|f| (self.k - f.count_ones() as usize) as u128)
            .product()
    }
}
