use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::graph::{EdgeLabel, GraphNode, MappingGraph, NodeKind};
use super::{EvalError, Hierarchy};

/// Largest graph (nodes, subject included) searched exactly.
pub const EXACT_NODE_LIMIT: usize = 16;
const BEAM_WIDTH: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostModel {
    pub sigma_class: f64,
    pub sigma_property: f64,
    pub node_insert: f64,
    pub node_delete: f64,
    pub edge_insert_delete: f64,
    /// Total number of classes over all target ontologies.
    pub total_target_classes: usize,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            sigma_class: 0.7,
            sigma_property: 1.0,
            node_insert: 1.0,
            node_delete: 0.5,
            edge_insert_delete: 0.5,
            total_target_classes: 1,
        }
    }
}

impl CostModel {
    pub fn with_total(total_target_classes: usize) -> Self {
        CostModel {
            total_target_classes,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.total_target_classes == 0 {
            return Err(EvalError::Config("total number of target classes must be positive".into()));
        }
        let costs = [
            self.sigma_class,
            self.sigma_property,
            self.node_insert,
            self.node_delete,
            self.edge_insert_delete,
        ];
        if costs.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(EvalError::Config("edit costs must be finite and nonnegative".into()));
        }
        if self.node_insert < self.node_delete {
            return Err(EvalError::Config("node insertion must cost at least as much as deletion".into()));
        }
        Ok(())
    }

    pub fn sigma(&self, kind: NodeKind) -> f64 {
        match kind {
            NodeKind::Property => self.sigma_property,
            NodeKind::Class | NodeKind::Source => self.sigma_class,
        }
    }
}

/// Cost of turning candidate node `n_c` into reference node `n_r`: free for
/// the same IRI, scaled by the neighbourhood size of `n_c` for a direct
/// sub- or superclass, the kind's full weight otherwise.
pub fn node_substitution_cost(
    n_c: &GraphNode,
    n_r: &GraphNode,
    hierarchy: &Hierarchy,
    cost: &CostModel,
) -> Result<f64, EvalError> {
    if cost.total_target_classes == 0 {
        return Err(EvalError::Config("total number of target classes must be positive".into()));
    }
    Ok(substitution(n_c, n_r, hierarchy, cost))
}

fn substitution(n_c: &GraphNode, n_r: &GraphNode, hierarchy: &Hierarchy, cost: &CostModel) -> f64 {
    if n_c.iri == n_r.iri {
        return 0.0;
    }
    let sigma = cost.sigma(n_c.kind);
    if n_c.kind == n_r.kind && hierarchy.directly_related(&n_c.iri, &n_r.iri) {
        sigma * hierarchy.neighbor_count(&n_c.iri) as f64 / cost.total_target_classes as f64
    } else {
        sigma
    }
}

/// Upper reference value of the edit distance: edge term over the larger
/// edge set, each reference node at its kind's weight, and insertion for any
/// candidate surplus. Subject nodes are not counted.
pub fn max_ged(g_c: &MappingGraph, g_r: &MappingGraph, cost: &CostModel) -> f64 {
    let edges = cost.edge_insert_delete * g_c.edge_count().max(g_r.edge_count()) as f64;
    let nodes: f64 = g_r.nodes()[1..].iter().map(|n| cost.sigma(n.kind)).sum();
    let surplus = g_c.inner_node_count().saturating_sub(g_r.inner_node_count());
    edges + nodes + cost.node_insert * surplus as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct GedResult {
    pub cost: f64,
    /// False when the beam approximation was used.
    pub exact: bool,
    /// Image of each candidate node (index 0 is the subject) in the
    /// reference graph, `None` for deletion.
    pub assignment: Vec<Option<usize>>,
}

/// Edit distance with subjects pinned to each other. Exact up to
/// [`EXACT_NODE_LIMIT`] nodes; beyond that an error, unless `approximate`
/// allows a beam search.
pub fn ged(
    g_c: &MappingGraph,
    g_r: &MappingGraph,
    hierarchy: &Hierarchy,
    cost: &CostModel,
    approximate: bool,
) -> Result<GedResult, EvalError> {
    cost.validate()?;
    let problem = Problem::new(g_c, g_r, hierarchy, cost);
    let size = g_c.node_count().max(g_r.node_count());
    if size <= EXACT_NODE_LIMIT {
        let (cost, assignment) = problem.branch_and_bound();
        Ok(GedResult {
            cost,
            exact: true,
            assignment,
        })
    } else if approximate {
        let (cost, assignment) = problem.beam(BEAM_WIDTH);
        Ok(GedResult {
            cost,
            exact: false,
            assignment,
        })
    } else {
        Err(EvalError::GraphTooLarge {
            nodes: size,
            limit: EXACT_NODE_LIMIT,
        })
    }
}

/// Cost of a complete assignment, for checks and oracles.
pub fn assignment_cost(
    g_c: &MappingGraph,
    g_r: &MappingGraph,
    hierarchy: &Hierarchy,
    cost: &CostModel,
    assignment: &[Option<usize>],
) -> f64 {
    Problem::new(g_c, g_r, hierarchy, cost).evaluate(assignment)
}

struct Problem {
    nc: usize,
    nr: usize,
    /// `sub[i][j]` for candidate node i+1 and reference node j+1.
    sub: Vec<Vec<f64>>,
    del: f64,
    ins: f64,
    edge: f64,
    cand_edges: Vec<(usize, usize, EdgeLabel)>,
    ref_edges: HashSet<(usize, usize, EdgeLabel)>,
    ref_edge_list: Vec<(usize, usize)>,
    order: Vec<usize>,
}

#[derive(Clone)]
struct State {
    /// Per candidate node: None undecided, Some(None) deleted, Some(Some(j)).
    decided: Vec<Option<Option<usize>>>,
    used: Vec<bool>,
    depth: usize,
    node_cost: f64,
}

impl Problem {
    fn new(g_c: &MappingGraph, g_r: &MappingGraph, hierarchy: &Hierarchy, cost: &CostModel) -> Self {
        let nc = g_c.inner_node_count();
        let nr = g_r.inner_node_count();
        let sub = (1..=nc)
            .map(|i| {
                (1..=nr)
                    .map(|j| substitution(&g_c.nodes()[i], &g_r.nodes()[j], hierarchy, cost))
                    .collect()
            })
            .collect();
        let cand_edges: Vec<_> = g_c.edges().iter().copied().collect();
        let mut degree = vec![0usize; nc + 1];
        for &(a, b, _) in &cand_edges {
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut order: Vec<usize> = (1..=nc).collect();
        order.sort_by_key(|&i| (std::cmp::Reverse(degree[i]), i));
        Problem {
            nc,
            nr,
            sub,
            del: cost.node_delete,
            ins: cost.node_insert,
            edge: cost.edge_insert_delete,
            cand_edges,
            ref_edges: g_r.edges().iter().copied().collect(),
            ref_edge_list: g_r.edges().iter().map(|&(a, b, _)| (a, b)).collect(),
            order,
        }
    }

    fn evaluate(&self, assignment: &[Option<usize>]) -> f64 {
        let mut total = 0.0;
        let mut matched = 0;
        for i in 1..=self.nc {
            match assignment[i] {
                Some(j) => {
                    total += self.sub[i - 1][j - 1];
                    matched += 1;
                }
                None => total += self.del,
            }
        }
        total += self.ins * (self.nr - matched) as f64;
        let preserved = self
            .cand_edges
            .iter()
            .filter(|&&(a, b, l)| match (assignment[a], assignment[b]) {
                (Some(x), Some(y)) => self.ref_edges.contains(&(x, y, l)),
                _ => false,
            })
            .count();
        total + self.edge * (self.cand_edges.len() + self.ref_edges.len() - 2 * preserved) as f64
    }

    fn root(&self) -> State {
        let mut decided = vec![None; self.nc + 1];
        decided[0] = Some(Some(0));
        let mut used = vec![false; self.nr + 1];
        used[0] = true;
        State {
            decided,
            used,
            depth: 0,
            node_cost: 0.0,
        }
    }

    fn image(state: &State, i: usize) -> Option<Option<usize>> {
        state.decided[i]
    }

    /// Admissible bound on the cost of any completion of `state`.
    fn lower_bound(&self, state: &State) -> f64 {
        let rows: Vec<usize> = (1..=self.nc).filter(|&i| state.decided[i].is_none()).collect();
        let cols: Vec<usize> = (1..=self.nr).filter(|&j| !state.used[j]).collect();
        let nodes = lsap_bound(&rows, &cols, |i, j| self.sub[i - 1][j - 1], self.del, self.ins);

        let mut preserved = 0usize;
        let mut open_cand = 0usize;
        for &(a, b, l) in &self.cand_edges {
            match (Self::image(state, a), Self::image(state, b)) {
                (Some(x), Some(y)) => {
                    if let (Some(x), Some(y)) = (x, y) {
                        if self.ref_edges.contains(&(x, y, l)) {
                            preserved += 1;
                        }
                    }
                }
                (Some(None), _) | (_, Some(None)) => {}
                _ => open_cand += 1,
            }
        }
        let open_ref = self
            .ref_edge_list
            .iter()
            .filter(|&&(a, b)| !state.used[a] || !state.used[b])
            .count();
        let best_preserved = preserved + open_cand.min(open_ref);
        let edges = self.edge * (self.cand_edges.len() + self.ref_edges.len()) as f64
            - 2.0 * self.edge * best_preserved as f64;
        state.node_cost + nodes + edges.max(0.0)
    }

    fn children(&self, state: &State) -> Vec<State> {
        let i = self.order[state.depth];
        let mut options: Vec<(f64, Option<usize>)> = (1..=self.nr)
            .filter(|&j| !state.used[j])
            .map(|j| (self.sub[i - 1][j - 1], Some(j)))
            .collect();
        options.push((self.del, None));
        options.sort_by(|a, b| a.0.total_cmp(&b.0));
        options
            .into_iter()
            .map(|(c, j)| {
                let mut next = state.clone();
                next.decided[i] = Some(j);
                if let Some(j) = j {
                    next.used[j] = true;
                }
                next.depth += 1;
                next.node_cost += c;
                next
            })
            .collect()
    }

    fn complete(&self, state: &State) -> Vec<Option<usize>> {
        state.decided.iter().map(|d| d.unwrap_or(None)).collect()
    }

    /// Seed solution: the node-only optimal assignment.
    fn initial(&self) -> (f64, Vec<Option<usize>>) {
        let rows: Vec<usize> = (1..=self.nc).collect();
        let cols: Vec<usize> = (1..=self.nr).collect();
        let mut assignment = vec![None; self.nc + 1];
        assignment[0] = Some(0);
        for (i, j) in lsap_assignment(&rows, &cols, |i, j| self.sub[i - 1][j - 1], self.del, self.ins) {
            assignment[i] = Some(j);
        }
        (self.evaluate(&assignment), assignment)
    }

    fn branch_and_bound(&self) -> (f64, Vec<Option<usize>>) {
        let (mut best, mut best_assignment) = self.initial();
        let mut stack = vec![self.root()];
        while let Some(state) = stack.pop() {
            if state.depth == self.nc {
                let assignment = self.complete(&state);
                let c = self.evaluate(&assignment);
                if c < best - 1e-12 {
                    best = c;
                    best_assignment = assignment;
                }
                continue;
            }
            if self.lower_bound(&state) >= best - 1e-12 {
                continue;
            }
            let mut kids = self.children(&state);
            // Cheapest option is explored first.
            kids.reverse();
            stack.extend(kids);
        }
        (best, best_assignment)
    }

    fn beam(&self, width: usize) -> (f64, Vec<Option<usize>>) {
        let (mut best, mut best_assignment) = self.initial();
        let mut frontier = vec![self.root()];
        for _ in 0..self.nc {
            let mut next: Vec<(f64, State)> = frontier
                .iter()
                .flat_map(|s| self.children(s))
                .map(|s| (self.lower_bound(&s), s))
                .collect();
            next.sort_by(|a, b| a.0.total_cmp(&b.0));
            next.truncate(width);
            frontier = next.into_iter().map(|(_, s)| s).collect();
        }
        for state in &frontier {
            let assignment = self.complete(state);
            let c = self.evaluate(&assignment);
            if c < best {
                best = c;
                best_assignment = assignment;
            }
        }
        (best, best_assignment)
    }
}

/// Square cost matrix of the node-only assignment between `rows` and
/// `cols`, with dummy columns for deletion and dummy rows for insertion.
fn node_matrix(rows: &[usize], cols: &[usize], sub: impl Fn(usize, usize) -> f64, del: f64, ins: f64) -> Vec<Vec<f64>> {
    let (a, b) = (rows.len(), cols.len());
    let n = a + b;
    let forbidden = 1e9;
    let mut m = vec![vec![0.0; n]; n];
    for (r, &i) in rows.iter().enumerate() {
        for (c, &j) in cols.iter().enumerate() {
            m[r][c] = sub(i, j);
        }
        for k in 0..a {
            m[r][b + k] = if k == r { del } else { forbidden };
        }
    }
    for c in 0..b {
        for k in 0..b {
            m[a + k][c] = if k == c { ins } else { forbidden };
        }
    }
    m
}

fn lsap_bound(rows: &[usize], cols: &[usize], sub: impl Fn(usize, usize) -> f64, del: f64, ins: f64) -> f64 {
    if rows.is_empty() && cols.is_empty() {
        return 0.0;
    }
    let m = node_matrix(rows, cols, sub, del, ins);
    let assign = hungarian(&m);
    assign.iter().enumerate().map(|(r, &c)| m[r][c]).sum()
}

fn lsap_assignment(
    rows: &[usize],
    cols: &[usize],
    sub: impl Fn(usize, usize) -> f64,
    del: f64,
    ins: f64,
) -> Vec<(usize, usize)> {
    if rows.is_empty() || cols.is_empty() {
        return Vec::new();
    }
    let m = node_matrix(rows, cols, sub, del, ins);
    hungarian(&m)
        .into_iter()
        .enumerate()
        .filter(|&(r, c)| r < rows.len() && c < cols.len())
        .map(|(r, c)| (rows[r], cols[c]))
        .collect()
}

/// Minimum-cost perfect matching on a square matrix (Kuhn-Munkres with
/// potentials). Returns the column chosen for each row.
pub(crate) fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::graph::{star_graph, to_graph};
    use crate::owl::{ClassExpression, ComplexMapping, Iri};

    fn iri(s: &str) -> Iri {
        Iri::new(format!("http://x.org/{s}")).unwrap()
    }

    fn named(src: &str, target: &str) -> MappingGraph {
        to_graph(&ComplexMapping::new(iri(src), ClassExpression::Named(iri(target))).unwrap())
    }

    #[test]
    fn hungarian_small() {
        let m = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = hungarian(&m);
        let total: f64 = a.iter().enumerate().map(|(r, &c)| m[r][c]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn unrelated_substitution() {
        let h = Hierarchy::default();
        let cost = CostModel::with_total(100);
        let r = ged(&named("A", "C"), &named("A", "B"), &h, &cost, false).unwrap();
        assert!((r.cost - 0.7).abs() < 1e-12);
    }

    #[test]
    fn identical_is_zero() {
        let h = Hierarchy::default();
        let g = named("A", "B");
        assert_eq!(ged(&g, &g, &h, &CostModel::with_total(10), false).unwrap().cost, 0.0);
    }

    #[test]
    fn substitution_scaled_by_neighbourhood() {
        let h = Hierarchy::from_edges([(iri("C"), iri("B")), (iri("D"), iri("C")), (iri("E"), iri("C"))]);
        let cost = CostModel::with_total(1000);
        let c = GraphNode {
            iri: iri("C"),
            kind: NodeKind::Class,
        };
        let b = GraphNode {
            iri: iri("B"),
            kind: NodeKind::Class,
        };
        assert!((node_substitution_cost(&c, &b, &h, &cost).unwrap() - 0.0021).abs() < 1e-15);
        let p = GraphNode {
            iri: iri("p"),
            kind: NodeKind::Property,
        };
        assert_eq!(node_substitution_cost(&p, &b, &h, &cost).unwrap(), 1.0);
        let zero = CostModel::with_total(0);
        assert!(node_substitution_cost(&c, &b, &h, &zero).is_err());
    }

    #[test]
    fn max_ged_examples() {
        let cost = CostModel::with_total(10);
        let g = star_graph(&iri("A"), &[iri("B"), iri("C")]);
        assert!((max_ged(&g, &g, &cost) - 2.4).abs() < 1e-12);
        let bigger = star_graph(&iri("A"), &[iri("B"), iri("C"), iri("D"), iri("E")]);
        assert!((max_ged(&bigger, &g, &cost) - (0.5 * 4.0 + 1.4 + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn too_large_needs_flag() {
        let classes: Vec<Iri> = (0..20).map(|i| iri(&format!("C{i}"))).collect();
        let g = star_graph(&iri("A"), &classes);
        let h = Hierarchy::default();
        let cost = CostModel::with_total(100);
        assert!(matches!(ged(&g, &g, &h, &cost, false), Err(EvalError::GraphTooLarge { .. })));
        let r = ged(&g, &g, &h, &cost, true).unwrap();
        assert!(!r.exact);
        assert_eq!(r.cost, 0.0);
    }
}
