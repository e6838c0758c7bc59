//! Expression constructors for graph classes with known clique-width bounds,
//! the reduction from maximum independent set to degree-one MRSO instances,
//! and seeded random instances and graphs for testing.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cwexpr::{CwExpression, GraphShape, VertexId};
use crate::instance::{Alphabet, MrsoInstance, ScoreTable, StructureGraph};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BuildError {
    #[error("graph has no vertices")]
    EmptyGraph,
    #[error("graph contains an induced four-vertex path, so it is not a cograph")]
    NotCograph,
    #[error("graph is not a tree (cyclic or disconnected)")]
    NotTree,
    #[error("vertex {vertex} has degree {degree}, the reduction supports degree <= 3")]
    DegreeTooHigh { vertex: VertexId, degree: usize },
    #[error("edge endpoint {0} is not a vertex of the graph")]
    UnknownVertex(VertexId),
    #[error("edge ({0}, {0}) is a self-loop")]
    SelfLoop(VertexId),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("cannot parse edge list: {0}")]
    BadEdgeList(String),
}

/// An unlabeled undirected graph over positive vertex ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlainGraph {
    vertices: BTreeSet<VertexId>,
    edges: BTreeSet<(VertexId, VertexId)>,
}

impl PlainGraph {
    pub fn new(
        vertices: BTreeSet<VertexId>,
        edges: impl IntoIterator<Item = (VertexId, VertexId)>,
    ) -> Result<Self, BuildError> {
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u == v {
                return Err(BuildError::SelfLoop(u));
            }
            for w in [u, v] {
                if !vertices.contains(&w) {
                    return Err(BuildError::UnknownVertex(w));
                }
            }
            set.insert((u.min(v), u.max(v)));
        }
        Ok(PlainGraph {
            vertices,
            edges: set,
        })
    }

    /// Path on vertices 1..=n in id order.
    pub fn path(n: u32) -> Self {
        PlainGraph::new(
            (1..=n).collect(),
            (1..n).map(|i| (i, i + 1)),
        )
        .unwrap()
    }

    /// Cycle on vertices 1..=n (a path for n < 3 closes trivially).
    pub fn cycle(n: u32) -> Self {
        let mut edges: Vec<(u32, u32)> = (1..n).map(|i| (i, i + 1)).collect();
        if n >= 3 {
            edges.push((1, n));
        }
        PlainGraph::new((1..=n).collect(), edges).unwrap()
    }

    pub fn complete(n: u32) -> Self {
        let mut edges = Vec::new();
        for u in 1..=n {
            for v in u + 1..=n {
                edges.push((u, v));
            }
        }
        PlainGraph::new((1..=n).collect(), edges).unwrap()
    }

    /// Parses the edge-list text format: first line `n m`, then `m` lines
    /// `u v` with 1-based vertex ids.
    pub fn from_edge_list(text: &str) -> Result<Self, BuildError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| BuildError::BadEdgeList("empty input".into()))?;
        let mut parts = header.split_whitespace();
        let n: u32 = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| BuildError::BadEdgeList("expected header 'n m'".into()))?;
        let m: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| BuildError::BadEdgeList("expected header 'n m'".into()))?;
        if parts.next().is_some() {
            return Err(BuildError::BadEdgeList("trailing tokens in header".into()));
        }
        let mut edges = Vec::with_capacity(m);
        for _ in 0..m {
            let line = lines
                .next()
                .ok_or_else(|| BuildError::BadEdgeList(format!("expected {m} edge lines")))?;
            let mut parts = line.split_whitespace();
            let u: u32 = parts
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| BuildError::BadEdgeList(format!("bad edge line {line:?}")))?;
            let v: u32 = parts
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| BuildError::BadEdgeList(format!("bad edge line {line:?}")))?;
            if parts.next().is_some() {
                return Err(BuildError::BadEdgeList(format!("bad edge line {line:?}")));
            }
            edges.push((u, v));
        }
        if lines.next().is_some() {
            return Err(BuildError::BadEdgeList("trailing lines after edges".into()));
        }
        PlainGraph::new((1..=n).collect(), edges)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{} {}\n", self.vertices.len(), self.edges.len());
        for &(u, v) in &self.edges {
            out.push_str(&format!("{u} {v}\n"));
        }
        out
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.vertices.iter().copied()
    }

    pub fn edges(&self) -> &BTreeSet<(VertexId, VertexId)> {
        &self.edges
    }

    pub fn has_edge(&self, u: VertexId, v: VertexId) -> bool {
        self.edges.contains(&(u.min(v), u.max(v)))
    }

    pub fn neighbors(&self, v: VertexId) -> Vec<VertexId> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == v {
                    Some(b)
                } else if b == v {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.neighbors(v).len()
    }

    pub fn induced(&self, keep: &BTreeSet<VertexId>) -> PlainGraph {
        PlainGraph {
            vertices: keep.clone(),
            edges: self
                .edges
                .iter()
                .filter(|(u, v)| keep.contains(u) && keep.contains(v))
                .copied()
                .collect(),
        }
    }

    pub fn complement(&self) -> PlainGraph {
        let mut edges = BTreeSet::new();
        for &u in &self.vertices {
            for &v in self.vertices.range(u + 1..) {
                if !self.edges.contains(&(u, v)) {
                    edges.insert((u, v));
                }
            }
        }
        PlainGraph {
            vertices: self.vertices.clone(),
            edges,
        }
    }

    /// Connected components, each ordered by smallest contained vertex.
    pub fn components(&self) -> Vec<BTreeSet<VertexId>> {
        let mut unvisited: BTreeSet<VertexId> = self.vertices.clone();
        let mut components = Vec::new();
        while let Some(&start) = unvisited.iter().next() {
            let mut component = BTreeSet::new();
            let mut queue = VecDeque::from([start]);
            unvisited.remove(&start);
            component.insert(start);
            while let Some(v) = queue.pop_front() {
                for w in self.neighbors(v) {
                    if unvisited.remove(&w) {
                        component.insert(w);
                        queue.push_back(w);
                    }
                }
            }
            components.push(component);
        }
        components
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }

    pub fn is_tree(&self) -> bool {
        !self.vertices.is_empty()
            && self.is_connected()
            && self.edges.len() == self.vertices.len() - 1
    }
}

impl GraphShape for PlainGraph {
    fn vertex_set(&self) -> BTreeSet<VertexId> {
        self.vertices.clone()
    }

    fn edge_set(&self) -> BTreeSet<(VertexId, VertexId)> {
        self.edges.clone()
    }
}

/// The one-label-per-vertex expression: width equals the vertex count.
///
/// Vertices are folded into a union spine in ascending id order; each edge's
/// eta is placed at the earliest point where both endpoints are present, so
/// every eta introduces exactly that one edge.
pub fn naive_expression(graph: &PlainGraph) -> Result<CwExpression, BuildError> {
    let order: Vec<VertexId> = graph.vertices().collect();
    if order.is_empty() {
        return Err(BuildError::EmptyGraph);
    }
    let label_of: BTreeMap<VertexId, u32> = order
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, i as u32 + 1))
        .collect();
    let mut expr = CwExpression::leaf(order[0], 1);
    for (i, &v) in order.iter().enumerate().skip(1) {
        expr = CwExpression::union(expr, CwExpression::leaf(v, i as u32 + 1));
        for &u in &order[..i] {
            if graph.has_edge(u, v) {
                expr = CwExpression::add_edges(label_of[&u], label_of[&v], expr);
            }
        }
    }
    Ok(expr)
}

/// Width-2 expression of a cograph, or `NotCograph`.
///
/// Recursive over the cotree characterization: a single vertex is a leaf; a
/// disconnected graph is the union of its components; a graph with a
/// disconnected complement is the join of its co-components, built pairwise
/// by relabeling one side to the opposite label, adding all edges between
/// the two labels, and relabeling back. Any multi-vertex subgraph that is
/// both connected and co-connected contains an induced four-vertex path.
pub fn cograph_expression(graph: &PlainGraph) -> Result<CwExpression, BuildError> {
    if graph.vertex_count() == 0 {
        return Err(BuildError::EmptyGraph);
    }
    cograph_build(graph, 1)
}

fn cograph_build(graph: &PlainGraph, label: u32) -> Result<CwExpression, BuildError> {
    if graph.vertex_count() == 1 {
        let v = graph.vertices().next().unwrap();
        return Ok(CwExpression::leaf(v, label));
    }
    let components = graph.components();
    if components.len() > 1 {
        let mut exprs = components
            .into_iter()
            .map(|c| cograph_build(&graph.induced(&c), label));
        let mut acc = exprs.next().unwrap()?;
        for expr in exprs {
            acc = CwExpression::union(acc, expr?);
        }
        return Ok(acc);
    }
    let co_components = graph.complement().components();
    if co_components.len() > 1 {
        let other = 3 - label;
        let mut parts = co_components.into_iter();
        let mut acc = cograph_build(&graph.induced(&parts.next().unwrap()), label)?;
        for part in parts {
            let side = cograph_build(&graph.induced(&part), other)?;
            acc = CwExpression::relabel(
                other,
                label,
                CwExpression::add_edges(label, other, CwExpression::union(acc, side)),
            );
        }
        return Ok(acc);
    }
    Err(BuildError::NotCograph)
}

/// Width-3 expression of a tree, or `NotTree`.
///
/// The tree is rooted at its lowest vertex id. Each subtree expression keeps
/// exactly its root labeled 2 and everything below labeled 1; a child is
/// attached by relabeling its root 2 -> 3, taking the union, adding the one
/// parent-child edge with eta(2,3), and retiring the child root with
/// rho(3 -> 1). Every eta therefore introduces exactly one edge.
pub fn tree_expression(graph: &PlainGraph) -> Result<CwExpression, BuildError> {
    if graph.vertex_count() == 0 {
        return Err(BuildError::EmptyGraph);
    }
    if !graph.is_tree() {
        return Err(BuildError::NotTree);
    }
    let root = graph.vertices().next().unwrap();
    Ok(tree_build(graph, root, None))
}

fn tree_build(graph: &PlainGraph, vertex: VertexId, parent: Option<VertexId>) -> CwExpression {
    let mut expr = CwExpression::leaf(vertex, 2);
    for child in graph.neighbors(vertex) {
        if Some(child) == parent {
            continue;
        }
        let subtree = tree_build(graph, child, Some(vertex));
        expr = CwExpression::relabel(
            3,
            1,
            CwExpression::add_edges(
                2,
                3,
                CwExpression::union(expr, CwExpression::relabel(2, 3, subtree)),
            ),
        );
    }
    expr
}

/// Reduces maximum independent set on a degree-<=3 graph to a degree-one
/// MRSO instance over the complement-pair alphabet.
///
/// Codon i corresponds to the i-th smallest vertex. Each graph edge becomes
/// one nucleotide bond; the up-to-three edges at a vertex map to its three
/// codon positions injectively, in ascending neighbor order. Scoring one per
/// all-`a` codon and zero otherwise makes the optimum equal the maximum
/// independent set size: two bonded all-`a` codons would need (a, a) to be
/// complementary, and any independent set extends to a feasible labeling by
/// giving non-selected codons the complement symbol toward selected
/// neighbors and a b/B pair across non-selected edges.
pub fn mis_reduction(graph: &PlainGraph) -> Result<MrsoInstance, BuildError> {
    if graph.vertex_count() == 0 {
        return Err(BuildError::EmptyGraph);
    }
    for v in graph.vertices() {
        let degree = graph.degree(v);
        if degree > 3 {
            return Err(BuildError::DegreeTooHigh { vertex: v, degree });
        }
    }
    let alphabet = Alphabet::complement_pairs();
    let rank: BTreeMap<VertexId, usize> = graph
        .vertices()
        .enumerate()
        .map(|(i, v)| (v, i))
        .collect();
    let position = |of: VertexId, toward: VertexId| -> u32 {
        let neighbors = graph.neighbors(of);
        neighbors.iter().position(|&w| w == toward).unwrap() as u32
    };
    let bonds: Vec<(u32, u32)> = graph
        .edges()
        .iter()
        .map(|&(u, v)| {
            let r = rank[&u] as u32 * 3 + position(u, v) + 1;
            let s = rank[&v] as u32 * 3 + position(v, u) + 1;
            (r, s)
        })
        .collect();
    let n = graph.vertex_count();
    let structure = StructureGraph::new(n, 3, bonds).expect("reduction bonds are in range");
    debug_assert!(structure.is_d1());
    let selected = alphabet.parse_codon("aaa").expect("alphabet contains aaa");
    let mut scores = ScoreTable::zero(n);
    let one = BigRational::from_integer(BigInt::from(1));
    for i in 0..n {
        scores.set_entry(i, selected, one.clone());
    }
    Ok(MrsoInstance::new(alphabet, structure, scores).expect("reduction instance is valid"))
}

/// The implied structure graph of an instance as a plain graph, with the
/// 1-based vertex ids expressions use.
pub fn implied_graph(instance: &MrsoInstance) -> PlainGraph {
    let vertices = (1..=instance.codon_count() as u32).collect();
    let edges: Vec<(u32, u32)> = instance
        .implied()
        .edges()
        .map(|(i, j)| (i + 1, j + 1))
        .collect();
    PlainGraph::new(vertices, edges).expect("implied graph is well formed")
}

/// Deterministic random instance: `bond_count` bonds drawn without
/// nucleotide reuse (so the structure graph has degree <= 1 by
/// construction), and small integer scores in [-3, 3].
pub fn random_instance(
    n: usize,
    bond_count: usize,
    alphabet: &Alphabet,
    seed: u64,
) -> Result<MrsoInstance, BuildError> {
    if n == 0 {
        return Err(BuildError::InvalidParameters("n must be >= 1".into()));
    }
    let nucleotides = alphabet.codon_length() * n;
    if bond_count > nucleotides / 2 {
        return Err(BuildError::InvalidParameters(format!(
            "{bond_count} bonds need {} nucleotides, instance has {nucleotides}",
            2 * bond_count
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<u32> = (1..=nucleotides as u32).collect();
    let (drawn, _) = pool.partial_shuffle(&mut rng, 2 * bond_count);
    let bonds: Vec<(u32, u32)> = drawn.chunks_exact(2).map(|c| (c[0], c[1])).collect();
    let structure =
        StructureGraph::new(n, alphabet.codon_length(), bonds).expect("drawn bonds are in range");
    debug_assert!(structure.is_d1());
    let mut scores = ScoreTable::zero(n);
    let small = |rng: &mut ChaCha8Rng| BigRational::from_integer(BigInt::from(rng.gen_range(-3i64..=3)));
    let space = alphabet.codon_count();
    for i in 0..n {
        scores.set_default(i, small(&mut rng));
        let entries = rng.gen_range(0..=space.min(6));
        for _ in 0..entries {
            let codon = alphabet
                .codons()
                .nth(rng.gen_range(0..space) as usize)
                .unwrap();
            scores.set_entry(i, codon, small(&mut rng));
        }
    }
    Ok(MrsoInstance::new(alphabet.clone(), structure, scores).expect("generated instance is valid"))
}

/// Random cograph on vertices 1..=n, generated from a random cotree.
pub fn random_cograph(n: u32, seed: u64) -> PlainGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vertices: Vec<VertexId> = (1..=n).collect();
    let mut edges = BTreeSet::new();
    cotree(&mut rng, &vertices, &mut edges, true);
    PlainGraph::new((1..=n).collect(), edges).unwrap()
}

fn cotree(
    rng: &mut ChaCha8Rng,
    vertices: &[VertexId],
    edges: &mut BTreeSet<(VertexId, VertexId)>,
    may_join: bool,
) {
    if vertices.len() <= 1 {
        return;
    }
    let cut = rng.gen_range(1..vertices.len());
    let (left, right) = vertices.split_at(cut);
    let join = may_join && rng.gen_bool(0.5);
    if join {
        for &u in left {
            for &v in right {
                edges.insert((u.min(v), u.max(v)));
            }
        }
    }
    cotree(rng, left, edges, true);
    cotree(rng, right, edges, true);
}

/// Random tree on vertices 1..=n: each vertex attaches to a uniformly chosen
/// earlier vertex.
pub fn random_tree(n: u32, seed: u64) -> PlainGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for v in 2..=n {
        edges.push((rng.gen_range(1..v), v));
    }
    PlainGraph::new((1..=n).collect(), edges).unwrap()
}

/// Random connected graph with maximum degree 3: a random degree-capped
/// spanning tree plus up to `extra_edges` additional edges between vertices
/// that still have spare degree.
pub fn random_connected_max_degree3(n: u32, extra_edges: usize, seed: u64) -> PlainGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut degree: BTreeMap<VertexId, usize> = (1..=n).map(|v| (v, 0)).collect();
    let mut edges = BTreeSet::new();
    for v in 2..=n {
        let candidates: Vec<VertexId> = (1..v).filter(|u| degree[u] < 3).collect();
        let u = candidates[rng.gen_range(0..candidates.len())];
        edges.insert((u, v));
        *degree.get_mut(&u).unwrap() += 1;
        *degree.get_mut(&v).unwrap() += 1;
    }
    for _ in 0..extra_edges {
        let open: Vec<VertexId> = (1..=n).filter(|v| degree[v] < 3).collect();
        if open.len() < 2 {
            break;
        }
        let u = open[rng.gen_range(0..open.len())];
        let v = open[rng.gen_range(0..open.len())];
        if u == v || edges.contains(&(u.min(v), u.max(v))) {
            continue;
        }
        edges.insert((u.min(v), u.max(v)));
        *degree.get_mut(&u).unwrap() += 1;
        *degree.get_mut(&v).unwrap() += 1;
    }
    PlainGraph::new((1..=n).collect(), edges).unwrap()
}
