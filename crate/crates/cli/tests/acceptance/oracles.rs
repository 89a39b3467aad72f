//! Exhaustive reference implementations, written without reusing the
//! library's search code.

use std::collections::{BTreeSet, HashMap, HashSet};

use cmom_core::eval::{EdgeLabel, MappingGraph, NodeKind};
use cmom_core::owl::Iri;
use cmom_core::vocabulary::WeightedName;

/// Every subset (at most `max` members) of `names` whose members are
/// pairwise token-disjoint and whose token union is the source token set.
pub fn covers(names: &[WeightedName], source: &[String], max: usize) -> BTreeSet<Vec<usize>> {
    let target: BTreeSet<&str> = source.iter().map(String::as_str).collect();
    let fitting: Vec<usize> = (0..names.len())
        .filter(|&i| names[i].tokens.iter().all(|t| target.contains(t.as_str())))
        .collect();
    let mut out = BTreeSet::new();
    grow(0, &fitting, names, &target, max, &mut Vec::new(), &mut BTreeSet::new(), &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn grow<'a>(
    start: usize,
    fitting: &[usize],
    names: &'a [WeightedName],
    target: &BTreeSet<&str>,
    max: usize,
    chosen: &mut Vec<usize>,
    union: &mut BTreeSet<&'a str>,
    out: &mut BTreeSet<Vec<usize>>,
) {
    if !chosen.is_empty() && union.len() == target.len() {
        out.insert(chosen.clone());
    }
    if chosen.len() == max {
        return;
    }
    for k in start..fitting.len() {
        let i = fitting[k];
        let own: BTreeSet<&str> = names[i].tokens.iter().map(String::as_str).collect();
        if own.iter().any(|t| union.contains(t)) {
            continue;
        }
        chosen.push(i);
        union.extend(own.iter().copied());
        grow(k + 1, fitting, names, target, max, chosen, union, out);
        for t in &own {
            union.remove(t);
        }
        chosen.pop();
    }
}

/// Direct sub/superclass world for the edit-distance oracle.
pub struct World {
    pub links: Vec<(Iri, Iri)>,
    pub total: usize,
}

impl World {
    fn related(&self, a: &Iri, b: &Iri) -> bool {
        self.links.iter().any(|(c, p)| (c == a && p == b) || (c == b && p == a))
    }

    fn neighbours(&self, a: &Iri) -> usize {
        let mut set = BTreeSet::new();
        for (c, p) in &self.links {
            if c == a {
                set.insert(p);
            }
            if p == a {
                set.insert(c);
            }
        }
        set.len()
    }

    fn substitution(&self, c: (&Iri, NodeKind), r: (&Iri, NodeKind)) -> f64 {
        let sigma = if c.1 == NodeKind::Property { 1.0 } else { 0.7 };
        if c.0 == r.0 {
            0.0
        } else if c.1 == r.1 && self.related(c.0, r.0) {
            sigma * self.neighbours(c.0) as f64 / self.total as f64
        } else {
            sigma
        }
    }
}

/// Minimum edit cost over every injective partial map of candidate inner
/// nodes to reference inner nodes, the subjects mapped to each other.
pub fn edit_distance(g_c: &MappingGraph, g_r: &MappingGraph, world: &World) -> f64 {
    let nc = g_c.node_count() - 1;
    let nr = g_r.node_count() - 1;
    let ref_edges: HashSet<(usize, usize, EdgeLabel)> = g_r.edges().iter().copied().collect();
    let mut best = f64::INFINITY;
    let mut map: Vec<Option<usize>> = vec![Some(0)];
    let mut used = vec![false; nr + 1];

    struct Ctx<'a> {
        nc: usize,
        nr: usize,
        g_c: &'a MappingGraph,
        g_r: &'a MappingGraph,
        world: &'a World,
        ref_edges: &'a HashSet<(usize, usize, EdgeLabel)>,
    }

    fn total(ctx: &Ctx, map: &[Option<usize>]) -> f64 {
        let mut cost = 0.0;
        let mut matched = 0;
        for (k, slot) in map.iter().enumerate().take(ctx.nc + 1).skip(1) {
            match slot {
                Some(j) => {
                    let a = &ctx.g_c.nodes()[k];
                    let b = &ctx.g_r.nodes()[*j];
                    cost += ctx.world.substitution((&a.iri, a.kind), (&b.iri, b.kind));
                    matched += 1;
                }
                None => cost += 0.5,
            }
        }
        cost += (ctx.nr - matched) as f64;
        let kept = ctx
            .g_c
            .edges()
            .iter()
            .filter(|&&(a, b, l)| match (map[a], map[b]) {
                (Some(x), Some(y)) => ctx.ref_edges.contains(&(x, y, l)),
                _ => false,
            })
            .count();
        cost + 0.5 * ((ctx.g_c.edge_count() - kept) + (ctx.g_r.edge_count() - kept)) as f64
    }

    fn walk(i: usize, ctx: &Ctx, map: &mut Vec<Option<usize>>, used: &mut Vec<bool>, best: &mut f64) {
        if i > ctx.nc {
            *best = best.min(total(ctx, map));
            return;
        }
        map.push(None);
        walk(i + 1, ctx, map, used, best);
        map.pop();
        for j in 1..=ctx.nr {
            if !used[j] {
                used[j] = true;
                map.push(Some(j));
                walk(i + 1, ctx, map, used, best);
                map.pop();
                used[j] = false;
            }
        }
    }

    let ctx = Ctx {
        nc,
        nr,
        g_c,
        g_r,
        world,
        ref_edges: &ref_edges,
    };
    walk(1, &ctx, &mut map, &mut used, &mut best);
    best
}

/// Multiset containment by expanding both count vectors into occurrence
/// lists and crossing them off one by one.
pub fn contained(candidate: &[(&str, usize)], example: &[(&str, usize)]) -> bool {
    let mut pool: HashMap<&str, i64> = HashMap::new();
    for (t, n) in example {
        for _ in 0..*n {
            *pool.entry(t).or_default() += 1;
        }
    }
    for (t, n) in candidate {
        for _ in 0..*n {
            let slot = pool.entry(t).or_default();
            *slot -= 1;
            if *slot < 0 {
                return false;
            }
        }
    }
    true
}
