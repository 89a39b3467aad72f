use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::owl::{ClassExpression, ComplexMapping, Iri};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Source,
    Class,
    Property,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeLabel {
    EquivalentClass,
    SomeValuesFrom,
    IntersectionOf,
    UnionOf,
}

impl fmt::Display for EdgeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeLabel::EquivalentClass => "equivalentClass",
            EdgeLabel::SomeValuesFrom => "someValuesFrom",
            EdgeLabel::IntersectionOf => "intersectionOf",
            EdgeLabel::UnionOf => "unionOf",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphNode {
    pub iri: Iri,
    pub kind: NodeKind,
}

/// Mapping as a labelled digraph. Node 0 is the mapping subject; nodes are
/// identified by IRI, so repeated IRIs share one node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingGraph {
    nodes: Vec<GraphNode>,
    index: HashMap<Iri, usize>,
    edges: BTreeSet<(usize, usize, EdgeLabel)>,
}

impl MappingGraph {
    pub fn new(source: Iri) -> Self {
        let mut index = HashMap::new();
        index.insert(source.clone(), 0);
        MappingGraph {
            nodes: vec![GraphNode {
                iri: source,
                kind: NodeKind::Source,
            }],
            index,
            edges: BTreeSet::new(),
        }
    }

    /// Index of the node for `iri`, created with `kind` if absent. An
    /// existing node keeps its first kind.
    pub fn node(&mut self, iri: &Iri, kind: NodeKind) -> usize {
        if let Some(&i) = self.index.get(iri) {
            return i;
        }
        self.nodes.push(GraphNode { iri: iri.clone(), kind });
        self.index.insert(iri.clone(), self.nodes.len() - 1);
        self.nodes.len() - 1
    }

    pub fn add_edge(&mut self, from: usize, to: usize, label: EdgeLabel) {
        self.edges.insert((from, to, label));
    }

    pub fn source(&self) -> &Iri {
        &self.nodes[0].iri
    }

    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize, EdgeLabel)> {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes other than the subject.
    pub fn inner_node_count(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn index_of(&self, iri: &Iri) -> Option<usize> {
        self.index.get(iri).copied()
    }

    /// Edges as IRI triples, for readable comparisons.
    pub fn edge_triples(&self) -> BTreeSet<(Iri, Iri, EdgeLabel)> {
        self.edges
            .iter()
            .map(|&(a, b, l)| (self.nodes[a].iri.clone(), self.nodes[b].iri.clone(), l))
            .collect()
    }
}

/// Graph form of a mapping. The top-level element hangs off the subject by
/// `equivalentClass`; a restriction's filler hangs off its property node by
/// `someValuesFrom`, distributed over the members of a filler conjunction
/// or disjunction. Other intersections and unions distribute their own
/// construct label over their members.
pub fn to_graph(mapping: &ComplexMapping) -> MappingGraph {
    let mut g = MappingGraph::new(mapping.source.clone());
    attach(&mut g, 0, &mapping.expression, EdgeLabel::EquivalentClass, false);
    g
}

fn attach(g: &mut MappingGraph, anchor: usize, expr: &ClassExpression, label: EdgeLabel, distribute: bool) {
    match expr {
        ClassExpression::Named(iri) => {
            let n = g.node(iri, NodeKind::Class);
            g.add_edge(anchor, n, label);
        }
        ClassExpression::SomeValuesFrom { property, filler } => {
            let p = g.node(property, NodeKind::Property);
            g.add_edge(anchor, p, label);
            attach(g, p, filler, EdgeLabel::SomeValuesFrom, true);
        }
        ClassExpression::Intersection(members) | ClassExpression::Union(members) => {
            let own = if matches!(expr, ClassExpression::Intersection(_)) {
                EdgeLabel::IntersectionOf
            } else {
                EdgeLabel::UnionOf
            };
            let member_label = if distribute { label } else { own };
            for m in members {
                attach(g, anchor, m, member_label, false);
            }
        }
    }
}

/// A bare class set: every class an independent node tied to the subject.
pub fn star_graph<'a>(source: &Iri, classes: impl IntoIterator<Item = &'a Iri>) -> MappingGraph {
    let mut g = MappingGraph::new(source.clone());
    for c in classes {
        let n = g.node(c, NodeKind::Class);
        if n != 0 {
            g.add_edge(0, n, EdgeLabel::EquivalentClass);
        }
    }
    g
}
