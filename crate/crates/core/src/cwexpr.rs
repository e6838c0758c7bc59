//! Clique-width expressions and their graph semantics.
//!
//! An expression is a term over four operations: a single labeled vertex,
//! disjoint union of two expressions, relabeling of all vertices carrying one
//! label, and addition of every edge between two label classes. Evaluating an
//! expression yields a [`LabeledGraph`]; the expression's *width* is the
//! largest label it mentions anywhere.
//!
//! The text format is keyword-based and whitespace-insensitive:
//!
//! ```text
//! expr := 'v' '(' INT ',' INT ')'             // vertex_id, label
//!       | 'u' '(' expr ',' expr ')'           // disjoint union
//!       | 'rho' '(' INT '->' INT ',' expr ')' // relabel from -> to
//!       | 'eta' '(' INT ',' INT ',' expr ')'  // add edges between two labels
//! ```

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

pub type VertexId = u32;
pub type Label = u32;

/// A clique-width expression term.
///
/// Leaves carry an explicit vertex id so a vertex of the defined graph can be
/// tied back to external data (score functions, witness positions). Labels
/// are 1-based; `Relabel` and `AddEdges` require two distinct labels, and all
/// leaf vertex ids must be pairwise distinct across the whole term.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CwExpression {
    Leaf {
        vertex: VertexId,
        label: Label,
    },
    Union(Box<CwExpression>, Box<CwExpression>),
    Relabel {
        from: Label,
        to: Label,
        child: Box<CwExpression>,
    },
    AddEdges {
        a: Label,
        b: Label,
        child: Box<CwExpression>,
    },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExprError {
    #[error("syntax error at offset {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("duplicate vertex id {0}")]
    DuplicateVertex(VertexId),
    #[error("vertex ids must be >= 1")]
    ZeroVertex,
    #[error("labels must be >= 1")]
    ZeroLabel,
    #[error("relabel requires two distinct labels, got {0} twice")]
    EqualRelabelLabels(Label),
    #[error("edge addition requires two distinct labels, got {0} twice")]
    EqualAddEdgesLabels(Label),
}

impl CwExpression {
    pub fn leaf(vertex: VertexId, label: Label) -> Self {
        CwExpression::Leaf { vertex, label }
    }

    pub fn union(left: CwExpression, right: CwExpression) -> Self {
        CwExpression::Union(Box::new(left), Box::new(right))
    }

    pub fn relabel(from: Label, to: Label, child: CwExpression) -> Self {
        CwExpression::Relabel {
            from,
            to,
            child: Box::new(child),
        }
    }

    pub fn add_edges(a: Label, b: Label, child: CwExpression) -> Self {
        CwExpression::AddEdges {
            a,
            b,
            child: Box::new(child),
        }
    }

    /// Checks the structural invariants: positive labels and vertex ids,
    /// distinct label operands, pairwise distinct leaf vertex ids.
    pub fn validate(&self) -> Result<(), ExprError> {
        let mut seen = BTreeSet::new();
        self.validate_inner(&mut seen)
    }

    fn validate_inner(&self, seen: &mut BTreeSet<VertexId>) -> Result<(), ExprError> {
        match self {
            CwExpression::Leaf { vertex, label } => {
                if *vertex == 0 {
                    return Err(ExprError::ZeroVertex);
                }
                if *label == 0 {
                    return Err(ExprError::ZeroLabel);
                }
                if !seen.insert(*vertex) {
                    return Err(ExprError::DuplicateVertex(*vertex));
                }
                Ok(())
            }
            CwExpression::Union(left, right) => {
                left.validate_inner(seen)?;
                right.validate_inner(seen)
            }
            CwExpression::Relabel { from, to, child } => {
                if *from == 0 || *to == 0 {
                    return Err(ExprError::ZeroLabel);
                }
                if from == to {
                    return Err(ExprError::EqualRelabelLabels(*from));
                }
                child.validate_inner(seen)
            }
            CwExpression::AddEdges { a, b, child } => {
                if *a == 0 || *b == 0 {
                    return Err(ExprError::ZeroLabel);
                }
                if a == b {
                    return Err(ExprError::EqualAddEdgesLabels(*a));
                }
                child.validate_inner(seen)
            }
        }
    }

    /// The largest label mentioned anywhere: leaf labels and both operands of
    /// `Relabel` and `AddEdges`.
    pub fn width(&self) -> Label {
        match self {
            CwExpression::Leaf { label, .. } => *label,
            CwExpression::Union(left, right) => left.width().max(right.width()),
            CwExpression::Relabel { from, to, child } => (*from).max(*to).max(child.width()),
            CwExpression::AddEdges { a, b, child } => (*a).max(*b).max(child.width()),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            CwExpression::Leaf { .. } => 1,
            CwExpression::Union(left, right) => 1 + left.node_count() + right.node_count(),
            CwExpression::Relabel { child, .. } | CwExpression::AddEdges { child, .. } => {
                1 + child.node_count()
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            CwExpression::Leaf { .. } => 1,
            CwExpression::Union(left, right) => left.leaf_count() + right.leaf_count(),
            CwExpression::Relabel { child, .. } | CwExpression::AddEdges { child, .. } => {
                child.leaf_count()
            }
        }
    }

    /// The graph defined by this expression.
    ///
    /// Leaf yields a single labeled vertex; union is disjoint union; relabel
    /// rewrites every occurrence of one label; edge addition inserts every
    /// edge between the two label classes (re-adding an existing edge is a
    /// set-union no-op).
    pub fn evaluate(&self) -> LabeledGraph {
        match self {
            CwExpression::Leaf { vertex, label } => LabeledGraph::single(*vertex, *label),
            CwExpression::Union(left, right) => {
                let mut graph = left.evaluate();
                graph.disjoint_union(right.evaluate());
                graph
            }
            CwExpression::Relabel { from, to, child } => {
                let mut graph = child.evaluate();
                graph.relabel(*from, *to);
                graph
            }
            CwExpression::AddEdges { a, b, child } => {
                let mut graph = child.evaluate();
                graph.add_edges_between(*a, *b);
                graph
            }
        }
    }
}

/// A finite undirected graph with a total labeling of its vertices.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct LabeledGraph {
    labels: BTreeMap<VertexId, Label>,
    edges: BTreeSet<(VertexId, VertexId)>,
}

impl LabeledGraph {
    pub fn single(vertex: VertexId, label: Label) -> Self {
        let mut labels = BTreeMap::new();
        labels.insert(vertex, label);
        LabeledGraph {
            labels,
            edges: BTreeSet::new(),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn label(&self, vertex: VertexId) -> Option<Label> {
        self.labels.get(&vertex).copied()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.labels.keys().copied()
    }

    pub fn labels(&self) -> &BTreeMap<VertexId, Label> {
        &self.labels
    }

    /// Edges normalized as (lo, hi) pairs.
    pub fn edges(&self) -> &BTreeSet<(VertexId, VertexId)> {
        &self.edges
    }

    pub fn has_edge(&self, u: VertexId, v: VertexId) -> bool {
        self.edges.contains(&(u.min(v), u.max(v)))
    }

    pub(crate) fn disjoint_union(&mut self, other: LabeledGraph) {
        for (vertex, label) in other.labels {
            let previous = self.labels.insert(vertex, label);
            debug_assert!(previous.is_none(), "union operands share vertex {vertex}");
        }
        self.edges.extend(other.edges);
    }

    pub(crate) fn relabel(&mut self, from: Label, to: Label) {
        for label in self.labels.values_mut() {
            if *label == from {
                *label = to;
            }
        }
    }

    pub(crate) fn add_edges_between(&mut self, a: Label, b: Label) {
        let side_a: Vec<VertexId> = self
            .labels
            .iter()
            .filter(|(_, &l)| l == a)
            .map(|(&v, _)| v)
            .collect();
        let side_b: Vec<VertexId> = self
            .labels
            .iter()
            .filter(|(_, &l)| l == b)
            .map(|(&v, _)| v)
            .collect();
        for &u in &side_a {
            for &v in &side_b {
                if u != v {
                    self.edges.insert((u.min(v), u.max(v)));
                }
            }
        }
    }
}

/// Anything that exposes a vertex set and an undirected edge set, for
/// checking an expression against a target graph while ignoring labels.
pub trait GraphShape {
    fn vertex_set(&self) -> BTreeSet<VertexId>;
    fn edge_set(&self) -> BTreeSet<(VertexId, VertexId)>;
}

impl GraphShape for LabeledGraph {
    fn vertex_set(&self) -> BTreeSet<VertexId> {
        self.labels.keys().copied().collect()
    }

    fn edge_set(&self) -> BTreeSet<(VertexId, VertexId)> {
        self.edges.clone()
    }
}

/// True iff the expression defines exactly the target's vertex and edge sets
/// (labels are ignored).
pub fn validate_against(expr: &CwExpression, target: &impl GraphShape) -> bool {
    let graph = expr.evaluate();
    graph.vertex_set() == target.vertex_set() && *graph.edges() == target.edge_set()
}

/// Canonical text for an expression; `parse_expression` inverts it.
pub fn format_expression(expr: &CwExpression) -> String {
    let mut out = String::new();
    write_expr(expr, &mut out);
    out
}

fn write_expr(expr: &CwExpression, out: &mut String) {
    use std::fmt::Write;
    match expr {
        CwExpression::Leaf { vertex, label } => {
            write!(out, "v({vertex},{label})").unwrap();
        }
        CwExpression::Union(left, right) => {
            out.push_str("u(");
            write_expr(left, out);
            out.push(',');
            write_expr(right, out);
            out.push(')');
        }
        CwExpression::Relabel { from, to, child } => {
            write!(out, "rho({from}->{to},").unwrap();
            write_expr(child, out);
            out.push(')');
        }
        CwExpression::AddEdges { a, b, child } => {
            write!(out, "eta({a},{b},").unwrap();
            write_expr(child, out);
            out.push(')');
        }
    }
}

/// Parses the keyword grammar. Whitespace is insignificant everywhere.
pub fn parse_expression(text: &str) -> Result<CwExpression, ExprError> {
    let mut parser = Parser {
        src: text.as_bytes(),
        pos: 0,
    };
    let expr = parser.expr()?;
    parser.skip_ws();
    if parser.pos != parser.src.len() {
        return Err(parser.err("trailing input after expression"));
    }
    expr.validate()?;
    Ok(expr)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, message: impl Into<String>) -> ExprError {
        ExprError::Syntax {
            position: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn expect(&mut self, ch: u8) -> Result<(), ExprError> {
        self.skip_ws();
        if self.src.get(self.pos) == Some(&ch) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected '{}'", ch as char)))
        }
    }

    fn keyword(&mut self) -> Result<&'a str, ExprError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("expected one of 'v', 'u', 'rho', 'eta'"));
        }
        Ok(std::str::from_utf8(&self.src[start..self.pos]).unwrap())
    }

    fn int(&mut self) -> Result<u32, ExprError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("expected an integer"));
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| ExprError::Syntax {
                position: start,
                message: "integer out of range".into(),
            })
    }

    fn arrow(&mut self) -> Result<(), ExprError> {
        self.skip_ws();
        if self.src[self.pos..].starts_with(b"->") {
            self.pos += 2;
            Ok(())
        } else {
            Err(self.err("expected '->'"))
        }
    }

    fn expr(&mut self) -> Result<CwExpression, ExprError> {
        let at = self.pos;
        let word = self.keyword()?;
        match word {
            "v" => {
                self.expect(b'(')?;
                let vertex = self.int()?;
                self.expect(b',')?;
                let label = self.int()?;
                self.expect(b')')?;
                if vertex == 0 {
                    return Err(ExprError::ZeroVertex);
                }
                if label == 0 {
                    return Err(ExprError::ZeroLabel);
                }
                Ok(CwExpression::leaf(vertex, label))
            }
            "u" => {
                self.expect(b'(')?;
                let left = self.expr()?;
                self.expect(b',')?;
                let right = self.expr()?;
                self.expect(b')')?;
                Ok(CwExpression::union(left, right))
            }
            "rho" => {
                self.expect(b'(')?;
                let from = self.int()?;
                self.arrow()?;
                let to = self.int()?;
                self.expect(b',')?;
                let child = self.expr()?;
                self.expect(b')')?;
                if from == 0 || to == 0 {
                    return Err(ExprError::ZeroLabel);
                }
                if from == to {
                    return Err(ExprError::EqualRelabelLabels(from));
                }
                Ok(CwExpression::relabel(from, to, child))
            }
            "eta" => {
                self.expect(b'(')?;
                let a = self.int()?;
                self.expect(b',')?;
                let b = self.int()?;
                self.expect(b',')?;
                let child = self.expr()?;
                self.expect(b')')?;
                if a == 0 || b == 0 {
                    return Err(ExprError::ZeroLabel);
                }
                if a == b {
                    return Err(ExprError::EqualAddEdgesLabels(a));
                }
                Ok(CwExpression::add_edges(a, b, child))
            }
            other => Err(ExprError::Syntax {
                position: at,
                message: format!("unknown operation '{other}'"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const X1_TEXT: &str = "eta(1,2, u( rho(2->1, eta(1,2, u(v(1,1), v(2,2)))), v(3,2)))";
    pub(crate) const X2_TEXT: &str =
        "rho(1->2,eta(2,3,u(u(eta(1,2,u(v(1,1),v(2,2))),eta(1,2,u(v(3,1),v(4,2)))),v(5,3))))";

    fn x1_ast() -> CwExpression {
        CwExpression::add_edges(
            1,
            2,
            CwExpression::union(
                CwExpression::relabel(
                    2,
                    1,
                    CwExpression::add_edges(
                        1,
                        2,
                        CwExpression::union(CwExpression::leaf(1, 1), CwExpression::leaf(2, 2)),
                    ),
                ),
                CwExpression::leaf(3, 2),
            ),
        )
    }

    #[test]
    fn parse_single_leaf() {
        assert_eq!(parse_expression("v(1,1)").unwrap(), CwExpression::leaf(1, 1));
    }

    #[test]
    fn parse_x1() {
        assert_eq!(parse_expression(X1_TEXT).unwrap(), x1_ast());
    }

    #[test]
    fn parse_rejects_equal_eta_labels() {
        assert_eq!(
            parse_expression("eta(1,1, v(1,1))"),
            Err(ExprError::EqualAddEdgesLabels(1))
        );
    }

    #[test]
    fn parse_rejects_equal_rho_labels() {
        assert_eq!(
            parse_expression("rho(2->2, v(1,1))"),
            Err(ExprError::EqualRelabelLabels(2))
        );
    }

    #[test]
    fn parse_rejects_duplicate_vertex() {
        assert_eq!(
            parse_expression("u(v(1,1),v(1,2))"),
            Err(ExprError::DuplicateVertex(1))
        );
    }

    #[test]
    fn parse_rejects_zero_label() {
        assert_eq!(parse_expression("v(1,0)"), Err(ExprError::ZeroLabel));
        assert_eq!(parse_expression("v(0,1)"), Err(ExprError::ZeroVertex));
    }

    #[test]
    fn parse_reports_position() {
        match parse_expression("u(v(1,1) v(2,1))") {
            Err(ExprError::Syntax { position, .. }) => assert_eq!(position, 9),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_trailing_input() {
        assert!(matches!(
            parse_expression("v(1,1) v(2,2)"),
            Err(ExprError::Syntax { .. })
        ));
    }

    #[test]
    fn format_leaf() {
        assert_eq!(format_expression(&CwExpression::leaf(3, 2)), "v(3,2)");
    }

    #[test]
    fn format_union() {
        let expr = CwExpression::union(CwExpression::leaf(1, 1), CwExpression::leaf(2, 1));
        assert_eq!(format_expression(&expr), "u(v(1,1),v(2,1))");
    }

    #[test]
    fn format_x1_round_trip() {
        let ast = x1_ast();
        let text = format_expression(&ast);
        assert_eq!(parse_expression(&text).unwrap(), ast);
        let stripped: String = X1_TEXT.chars().filter(|c| !c.is_whitespace()).collect();
        assert_eq!(text, stripped);
    }

    #[test]
    fn evaluate_x1_is_triangle() {
        let graph = parse_expression(X1_TEXT).unwrap().evaluate();
        assert_eq!(graph.vertex_set(), [1, 2, 3].into_iter().collect());
        assert_eq!(
            *graph.edges(),
            [(1, 2), (1, 3), (2, 3)].into_iter().collect()
        );
        assert_eq!(graph.label(1), Some(1));
        assert_eq!(graph.label(2), Some(1));
        assert_eq!(graph.label(3), Some(2));
    }

    #[test]
    fn evaluate_x2_is_path() {
        let graph = parse_expression(X2_TEXT).unwrap().evaluate();
        assert_eq!(graph.vertex_set(), (1..=5).collect());
        // path 1-2-5-4-3
        assert_eq!(
            *graph.edges(),
            [(1, 2), (2, 5), (4, 5), (3, 4)].into_iter().collect()
        );
        assert_eq!(graph.label(5), Some(3));
        for v in [1, 2, 3, 4] {
            assert_eq!(graph.label(v), Some(2));
        }
    }

    #[test]
    fn evaluate_single_leaf() {
        let graph = CwExpression::leaf(7, 4).evaluate();
        assert_eq!(graph.vertex_count(), 1);
        assert_eq!(graph.edge_count(), 0);
        assert_eq!(graph.label(7), Some(4));
    }

    #[test]
    fn width_examples() {
        assert_eq!(CwExpression::leaf(1, 1).width(), 1);
        assert_eq!(parse_expression(X2_TEXT).unwrap().width(), 3);
        let expr = CwExpression::relabel(5, 1, CwExpression::leaf(1, 1));
        assert_eq!(expr.width(), 5);
    }

    #[test]
    fn validate_against_examples() {
        let x1 = parse_expression(X1_TEXT).unwrap();
        let triangle = crate::builders::PlainGraph::cycle(3);
        assert!(validate_against(&x1, &triangle));
        let path = crate::builders::PlainGraph::path(3);
        assert!(!validate_against(&x1, &path));
        let single = crate::builders::PlainGraph::path(1);
        assert!(validate_against(&CwExpression::leaf(1, 1), &single));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::{Rng as _, SeedableRng as _};
        use rand_chacha::ChaCha8Rng;

        // Random valid expression: distinct leaf ids, labels in [1, k].
        pub(crate) fn random_expression(rng: &mut ChaCha8Rng, leaves: u32, k: u32) -> CwExpression {
            let mut parts: Vec<CwExpression> = (1..=leaves)
                .map(|v| CwExpression::leaf(v, rng.gen_range(1..=k)))
                .collect();
            while parts.len() > 1 {
                let right = parts.remove(rng.gen_range(0..parts.len()));
                let left = parts.remove(rng.gen_range(0..parts.len()));
                parts.push(CwExpression::union(left, right));
            }
            let mut expr = parts.pop().unwrap();
            for _ in 0..rng.gen_range(0..=2 * leaves) {
                let a = rng.gen_range(1..=k);
                let mut b = rng.gen_range(1..=k);
                if k == 1 {
                    break;
                }
                while b == a {
                    b = rng.gen_range(1..=k);
                }
                expr = if rng.gen_bool(0.5) {
                    CwExpression::add_edges(a, b, expr)
                } else {
                    CwExpression::relabel(a, b, expr)
                };
            }
            expr
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(128))]

            #[test]
            fn round_trip(seed in any::<u64>(), leaves in 1u32..8, k in 2u32..5) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let expr = random_expression(&mut rng, leaves, k);
                prop_assert!(expr.validate().is_ok());
                let text = format_expression(&expr);
                prop_assert_eq!(parse_expression(&text).unwrap(), expr);
            }

            #[test]
            fn evaluate_covers_all_leaves(seed in any::<u64>(), leaves in 1u32..8, k in 2u32..5) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let expr = random_expression(&mut rng, leaves, k);
                let graph = expr.evaluate();
                prop_assert_eq!(graph.vertex_count(), expr.leaf_count());
                for (u, v) in graph.edges() {
                    prop_assert!(u < v);
                    prop_assert!(graph.label(*u).is_some() && graph.label(*v).is_some());
                }
            }

            #[test]
            fn relabel_preserves_shape(seed in any::<u64>(), leaves in 1u32..8, k in 2u32..5) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let expr = random_expression(&mut rng, leaves, k);
                let base = expr.evaluate();
                let relabeled = CwExpression::relabel(1, 2, expr).evaluate();
                prop_assert_eq!(base.vertex_set(), relabeled.vertex_set());
                prop_assert_eq!(base.edges(), relabeled.edges());
            }

            #[test]
            fn add_edges_is_monotone(seed in any::<u64>(), leaves in 1u32..8, k in 2u32..5) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let expr = random_expression(&mut rng, leaves, k);
                let base = expr.evaluate();
                let extended = CwExpression::add_edges(1, 2, expr).evaluate();
                prop_assert_eq!(base.vertex_set(), extended.vertex_set());
                prop_assert_eq!(base.labels(), extended.labels());
                prop_assert!(base.edges().is_subset(extended.edges()));
            }

            #[test]
            fn union_commutes(seed in any::<u64>(), la in 1u32..5, lb in 1u32..5, k in 2u32..4) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let left = random_expression(&mut rng, la, k);
                let right_raw = random_expression(&mut rng, lb, k);
                // shift ids to keep leaves disjoint
                fn shift(e: &CwExpression, by: u32) -> CwExpression {
                    match e {
                        CwExpression::Leaf { vertex, label } => CwExpression::leaf(vertex + by, *label),
                        CwExpression::Union(l, r) => CwExpression::union(shift(l, by), shift(r, by)),
                        CwExpression::Relabel { from, to, child } => CwExpression::relabel(*from, *to, shift(child, by)),
                        CwExpression::AddEdges { a, b, child } => CwExpression::add_edges(*a, *b, shift(child, by)),
                    }
                }
                let right = shift(&right_raw, la);
                let ab = CwExpression::union(left.clone(), right.clone()).evaluate();
                let ba = CwExpression::union(right, left).evaluate();
                prop_assert_eq!(ab, ba);
            }
        }
    }
}
