//! The bottom-up state-set dynamic program over clique-width expressions,
//! and a brute-force enumeration oracle.
//!
//! A state is a pair (L, f): L is the set of (graph label, codon value)
//! pairs realized by some admissible partial labeling of the subexpression's
//! vertices, and f is the best score such a labeling achieves. The four
//! expression operations map to four state transformations:
//!
//! * leaf: one state per admissible codon value of that vertex;
//! * union: all pairwise combinations (L ∪ L', f + f');
//! * edge addition between labels a and b: keep the states in which every
//!   a-value is compatible with every b-value under the node's bond patterns;
//! * relabel: rewrite the label component and re-normalize L as a set.
//!
//! Dominance pruning keeps, per distinct L, only the maximum f; feasibility
//! of everything downstream depends on L alone, so this never changes the
//! optimum. Each state carries a back-pointer, so an optimal vertex-to-codon
//! assignment is rebuilt by walking provenance from an optimal root state.
//!
//! The edge-addition filter decides admissibility from codon values alone,
//! which is only exact when every edge a given eta node introduces carries
//! the same bond pattern set. `solve` verifies this per node by replaying the
//! expression. In [`Mode::Exact`] a violation is an error; in
//! [`Mode::Conservative`] the node filters against the union of the
//! introduced pattern sets, which never admits an infeasible labeling but
//! may underestimate the optimum, and the result is flagged inexact.

use std::collections::{BTreeMap, HashMap, HashSet};

use num_rational::BigRational;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cwexpr::{CwExpression, ExprError, Label, LabeledGraph, VertexId};
use crate::instance::{
    pair_satisfies_gamma, Alphabet, Codon, Cost, MrsoInstance, PatternSet,
};

/// Above this candidate count, union products are evaluated in parallel.
/// Results are canonicalized, so the schedule never shows in the output.
const PAR_PRODUCT_THRESHOLD: usize = 1 << 13;

/// Default ceiling on the number of assignments `brute_force` will enumerate.
pub const DEFAULT_BRUTE_BUDGET: u64 = 1 << 22;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    InvalidExpression(#[from] ExprError),
    #[error("expression does not define the instance's implied structure graph")]
    ExpressionMismatch,
    #[error("eta({a},{b}) introduces edges with differing bond patterns; exact mode requires a uniform pattern per eta node")]
    HeterogeneousEta { a: Label, b: Label },
    #[error("{total} assignments exceed the brute-force budget {budget}")]
    BudgetExceeded { total: u128, budget: u64 },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Refuse expressions with non-uniform eta nodes; the result is a
    /// certified optimum.
    Exact,
    /// Accept any expression; the result is a certified lower bound.
    Conservative,
}

#[derive(Copy, Clone, Debug)]
pub struct SolveOptions {
    pub mode: Mode,
    /// Dominance pruning. Disabling it keeps all mutually different (L, f)
    /// pairs; the optimum is unchanged.
    pub pruning: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            mode: Mode::Exact,
            pruning: true,
        }
    }
}

/// One DP state: the label/value set L, its best score, and provenance.
#[derive(Clone, Debug)]
pub struct DpState {
    /// Sorted, duplicate-free (label, codon) pairs.
    pub pairs: Vec<(Label, Codon)>,
    pub score: BigRational,
    back: Back,
}

#[derive(Clone, Debug)]
enum Back {
    Leaf { vertex: VertexId, codon: Codon },
    Pair { left: u32, right: u32 },
    Child { child: u32 },
}

/// The states attached to one expression node, canonically ordered by L.
#[derive(Clone, Debug, Default)]
pub struct StateSet {
    pub states: Vec<DpState>,
}

impl StateSet {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// The outcome of a solve or brute-force run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solution {
    pub value: Cost,
    /// One codon value per codon index; absent when the value is infeasible.
    pub witness: Option<Vec<Codon>>,
    /// True when the value is a certified optimum, false when it is only a
    /// certified lower bound.
    pub exact: bool,
    /// Largest per-node retained state count (0 for brute force).
    pub states_peak: usize,
    /// Expression node count (0 for brute force).
    pub nodes: usize,
}

#[derive(Serialize)]
struct SolutionDoc {
    value: String,
    witness: Option<Vec<String>>,
    exact: bool,
    states_peak: usize,
    nodes: usize,
}

impl Solution {
    pub fn to_json_string(&self, alphabet: &Alphabet) -> String {
        let doc = SolutionDoc {
            value: self.value.to_string(),
            witness: self
                .witness
                .as_ref()
                .map(|w| w.iter().map(|&c| alphabet.codon_string(c)).collect()),
            exact: self.exact,
            states_peak: self.states_peak,
            nodes: self.nodes,
        };
        serde_json::to_string(&doc).expect("solution serialization")
    }
}

/// States of a single leaf: one per codon value that is not forbidden at
/// this codon index and satisfies the codon's internal bond patterns. An
/// empty result is legal and propagates infeasibility.
pub fn dp_leaf(instance: &MrsoInstance, vertex: VertexId, label: Label) -> StateSet {
    let alphabet = instance.alphabet();
    let index = (vertex - 1) as usize;
    let scores = instance.scores().scores(index);
    let intra = instance.implied().intra_patterns(vertex - 1);
    let states = alphabet
        .codons()
        .filter(|&codon| !scores.is_forbidden(codon))
        .filter(|&codon| match intra {
            Some(patterns) => pair_satisfies_gamma(alphabet, codon, codon, patterns),
            None => true,
        })
        .map(|codon| DpState {
            pairs: vec![(label, codon)],
            score: scores.score(codon).clone(),
            back: Back::Leaf { vertex, codon },
        })
        .collect();
    StateSet { states }
}

/// All pairwise combinations (L ∪ L', f + f'), pruned.
pub fn dp_union(left: &StateSet, right: &StateSet) -> StateSet {
    let states = product(&left.states, &right.states, &[], None, true);
    StateSet { states }
}

/// Keeps exactly the states in which every (a, l1), (b, l2) ∈ L satisfies
/// the bond patterns. An empty pattern set keeps everything.
pub fn dp_eta(
    input: &StateSet,
    a: Label,
    b: Label,
    patterns: &PatternSet,
    alphabet: &Alphabet,
) -> StateSet {
    let states = input
        .states
        .iter()
        .enumerate()
        .filter(|(_, state)| within_ok(alphabet, &state.pairs, a, b, patterns))
        .map(|(i, state)| DpState {
            pairs: state.pairs.clone(),
            score: state.score.clone(),
            back: Back::Child { child: i as u32 },
        })
        .collect();
    StateSet { states }
}

/// Rewrites every (from, l) to (to, l), re-normalizes L as a set, prunes.
pub fn dp_rho(input: &StateSet, from: Label, to: Label) -> StateSet {
    let states = input
        .states
        .iter()
        .enumerate()
        .map(|(i, state)| DpState {
            pairs: rewrite_pairs(&state.pairs, from, to),
            score: state.score.clone(),
            back: Back::Child { child: i as u32 },
        })
        .collect();
    StateSet {
        states: finalize(states, true),
    }
}

/// Keeps one state per distinct L: the one with maximum f, earliest
/// construction winning ties.
pub fn prune(input: StateSet) -> StateSet {
    StateSet {
        states: finalize(input.states, true),
    }
}

fn rewrite_pairs(pairs: &[(Label, Codon)], from: Label, to: Label) -> Vec<(Label, Codon)> {
    let mut rewritten: Vec<(Label, Codon)> = pairs
        .iter()
        .map(|&(l, c)| if l == from { (to, c) } else { (l, c) })
        .collect();
    rewritten.sort_unstable();
    rewritten.dedup();
    rewritten
}

fn merge_pairs(a: &[(Label, Codon)], b: &[(Label, Codon)]) -> Vec<(Label, Codon)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

fn within_ok(
    alphabet: &Alphabet,
    pairs: &[(Label, Codon)],
    a: Label,
    b: Label,
    patterns: &PatternSet,
) -> bool {
    for &(la, c1) in pairs {
        if la != a {
            continue;
        }
        for &(lb, c2) in pairs {
            if lb == b && !pair_satisfies_gamma(alphabet, c1, c2, patterns) {
                return false;
            }
        }
    }
    true
}

fn cross_ok(
    alphabet: &Alphabet,
    left: &[(Label, Codon)],
    right: &[(Label, Codon)],
    a: Label,
    b: Label,
    patterns: &PatternSet,
) -> bool {
    for &(la, c1) in left {
        if la != a {
            continue;
        }
        for &(lb, c2) in right {
            if lb == b && !pair_satisfies_gamma(alphabet, c1, c2, patterns) {
                return false;
            }
        }
    }
    for &(la, c1) in right {
        if la != a {
            continue;
        }
        for &(lb, c2) in left {
            if lb == b && !pair_satisfies_gamma(alphabet, c1, c2, patterns) {
                return false;
            }
        }
    }
    true
}

/// One eta filter to apply on top of a union product.
struct ProductFilter<'a> {
    a: Label,
    b: Label,
    patterns: &'a PatternSet,
}

/// Combination product with the given eta filters applied before states are
/// materialized. Filtering commutes with dominance pruning (both depend on L
/// only), so this equals running the union and each eta separately.
fn product(
    left: &[DpState],
    right: &[DpState],
    filters: &[ProductFilter<'_>],
    alphabet: Option<&Alphabet>,
    pruning: bool,
) -> Vec<DpState> {
    // Parts of a filter touching one side alone can run before the product.
    let keep_side = |states: &[DpState]| -> Vec<u32> {
        states
            .iter()
            .enumerate()
            .filter(|(_, s)| {
                filters.iter().all(|f| {
                    within_ok(alphabet.unwrap(), &s.pairs, f.a, f.b, f.patterns)
                })
            })
            .map(|(i, _)| i as u32)
            .collect()
    };
    let (left_alive, right_alive): (Vec<u32>, Vec<u32>) = if filters.is_empty() {
        (
            (0..left.len() as u32).collect(),
            (0..right.len() as u32).collect(),
        )
    } else {
        (keep_side(left), keep_side(right))
    };

    let combine_row = |&li: &u32| -> Vec<DpState> {
        let ls = &left[li as usize];
        let mut row = Vec::new();
        for &ri in &right_alive {
            let rs = &right[ri as usize];
            let alive = filters.iter().all(|f| {
                cross_ok(
                    alphabet.unwrap(),
                    &ls.pairs,
                    &rs.pairs,
                    f.a,
                    f.b,
                    f.patterns,
                )
            });
            if alive {
                row.push(DpState {
                    pairs: merge_pairs(&ls.pairs, &rs.pairs),
                    score: &ls.score + &rs.score,
                    back: Back::Pair { left: li, right: ri },
                });
            }
        }
        row
    };

    let candidates: Vec<DpState> = if left_alive.len() * right_alive.len() > PAR_PRODUCT_THRESHOLD
    {
        left_alive
            .par_iter()
            .map(combine_row)
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    } else {
        left_alive.iter().flat_map(combine_row).collect()
    };
    finalize(candidates, pruning)
}

/// Canonicalizes a freshly built state list. With pruning, one state per
/// distinct L survives (maximum f, first constructed on ties); without it,
/// exact (L, f) duplicates collapse. Either way the result is sorted by L.
fn finalize(states: Vec<DpState>, pruning: bool) -> Vec<DpState> {
    let mut out: Vec<DpState> = Vec::new();
    if pruning {
        let mut index: HashMap<Vec<(Label, Codon)>, usize> = HashMap::new();
        for state in states {
            match index.get(&state.pairs) {
                Some(&at) => {
                    if state.score > out[at].score {
                        out[at] = state;
                    }
                }
                None => {
                    index.insert(state.pairs.clone(), out.len());
                    out.push(state);
                }
            }
        }
        out.sort_by(|x, y| x.pairs.cmp(&y.pairs));
    } else {
        let mut seen: HashSet<(Vec<(Label, Codon)>, BigRational)> = HashSet::new();
        for state in states {
            if seen.insert((state.pairs.clone(), state.score.clone())) {
                out.push(state);
            }
        }
        out.sort_by(|x, y| x.pairs.cmp(&y.pairs).then_with(|| x.score.cmp(&y.score)));
    }
    out
}

/// The filter a single eta node must apply, determined by replaying the
/// expression against the instance's implied structure graph.
enum EtaFilter {
    /// The node introduces no edges.
    NoOp,
    /// Filter against these patterns (the node's uniform pattern set, or the
    /// union of its pattern sets in conservative mode).
    Apply(PatternSet),
}

struct EtaAnalysis {
    /// Filters in preorder over the expression's eta nodes.
    filters: Vec<EtaFilter>,
}

fn analyze_etas(
    expr: &CwExpression,
    instance: &MrsoInstance,
    mode: Mode,
) -> Result<EtaAnalysis, SolveError> {
    let mut analysis = EtaAnalysis {
        filters: Vec::new(),
    };
    replay(expr, instance, mode, &mut analysis)?;
    Ok(analysis)
}

fn replay(
    expr: &CwExpression,
    instance: &MrsoInstance,
    mode: Mode,
    analysis: &mut EtaAnalysis,
) -> Result<LabeledGraph, SolveError> {
    match expr {
        CwExpression::Leaf { vertex, label } => Ok(LabeledGraph::single(*vertex, *label)),
        CwExpression::Union(left, right) => {
            let mut graph = replay(left, instance, mode, analysis)?;
            graph.disjoint_union(replay(right, instance, mode, analysis)?);
            Ok(graph)
        }
        CwExpression::Relabel { from, to, child } => {
            let mut graph = replay(child, instance, mode, analysis)?;
            graph.relabel(*from, *to);
            Ok(graph)
        }
        CwExpression::AddEdges { a, b, child } => {
            let slot = analysis.filters.len();
            analysis.filters.push(EtaFilter::NoOp);
            let mut graph = replay(child, instance, mode, analysis)?;
            let implied = instance.implied();
            let side_a: Vec<VertexId> = graph
                .labels()
                .iter()
                .filter(|(_, &l)| l == *a)
                .map(|(&v, _)| v)
                .collect();
            let side_b: Vec<VertexId> = graph
                .labels()
                .iter()
                .filter(|(_, &l)| l == *b)
                .map(|(&v, _)| v)
                .collect();
            let mut uniform: Option<PatternSet> = None;
            let mut merged = PatternSet::new();
            let mut heterogeneous = false;
            for &u in &side_a {
                for &v in &side_b {
                    if u == v || graph.has_edge(u, v) {
                        continue;
                    }
                    // vertex ids are 1-based codon indices; orient the stored
                    // pattern so the first position is on the a side
                    let (ci, cj) = (u - 1, v - 1);
                    let stored = implied
                        .patterns(ci, cj)
                        .ok_or(SolveError::ExpressionMismatch)?;
                    let oriented: PatternSet = if ci < cj {
                        stored.clone()
                    } else {
                        stored.iter().map(|&(p, q)| (q, p)).collect()
                    };
                    match &uniform {
                        None => uniform = Some(oriented.clone()),
                        Some(first) if *first != oriented => heterogeneous = true,
                        Some(_) => {}
                    }
                    merged.extend(oriented);
                }
            }
            analysis.filters[slot] = match uniform {
                None => EtaFilter::NoOp,
                Some(patterns) => {
                    if heterogeneous {
                        if mode == Mode::Exact {
                            return Err(SolveError::HeterogeneousEta { a: *a, b: *b });
                        }
                        EtaFilter::Apply(merged)
                    } else {
                        EtaFilter::Apply(patterns)
                    }
                }
            };
            graph.add_edges_between(*a, *b);
            Ok(graph)
        }
    }
}

struct EvalNode {
    states: Vec<DpState>,
    children: Vec<EvalNode>,
}

struct EvalCtx<'a> {
    instance: &'a MrsoInstance,
    filters: &'a [EtaFilter],
    next_filter: usize,
    pruning: bool,
    states_peak: usize,
}

fn eval(expr: &CwExpression, ctx: &mut EvalCtx<'_>) -> EvalNode {
    let node = match expr {
        CwExpression::Leaf { vertex, label } => EvalNode {
            states: dp_leaf(ctx.instance, *vertex, *label).states,
            children: Vec::new(),
        },
        CwExpression::Union(left, right) => {
            let left = eval(left, ctx);
            let right = eval(right, ctx);
            let states = product(&left.states, &right.states, &[], None, ctx.pruning);
            EvalNode {
                states,
                children: vec![left, right],
            }
        }
        CwExpression::Relabel { from, to, child } => {
            let child = eval(child, ctx);
            let states: Vec<DpState> = child
                .states
                .iter()
                .enumerate()
                .map(|(i, state)| DpState {
                    pairs: rewrite_pairs(&state.pairs, *from, *to),
                    score: state.score.clone(),
                    back: Back::Child { child: i as u32 },
                })
                .collect();
            EvalNode {
                states: finalize(states, ctx.pruning),
                children: vec![child],
            }
        }
        CwExpression::AddEdges { .. } => {
            // Collect the chain of eta nodes down to the first non-eta child;
            // if that child is a union, the product is built with the filters
            // applied inline so unfiltered combinations never materialize.
            let mut chain: Vec<(Label, Label, usize)> = Vec::new();
            let mut cur = expr;
            while let CwExpression::AddEdges { a, b, child } = cur {
                chain.push((*a, *b, ctx.next_filter));
                ctx.next_filter += 1;
                cur = child;
            }
            let alphabet = ctx.instance.alphabet();
            let analyzed = ctx.filters;
            let active: Vec<(Label, Label, &PatternSet)> = chain
                .iter()
                .filter_map(|&(a, b, slot)| match &analyzed[slot] {
                    EtaFilter::NoOp => None,
                    EtaFilter::Apply(patterns) => Some((a, b, patterns)),
                })
                .collect();
            if let CwExpression::Union(left, right) = cur {
                let left = eval(left, ctx);
                let right = eval(right, ctx);
                let filters: Vec<ProductFilter<'_>> = active
                    .into_iter()
                    .map(|(a, b, patterns)| ProductFilter { a, b, patterns })
                    .collect();
                let states = product(
                    &left.states,
                    &right.states,
                    &filters,
                    Some(alphabet),
                    ctx.pruning,
                );
                EvalNode {
                    states,
                    children: vec![left, right],
                }
            } else {
                let child = eval(cur, ctx);
                let filters = active;
                let states: Vec<DpState> = child
                    .states
                    .iter()
                    .enumerate()
                    .filter(|(_, state)| {
                        filters
                            .iter()
                            .all(|&(a, b, patterns)| within_ok(alphabet, &state.pairs, a, b, patterns))
                    })
                    .map(|(i, state)| DpState {
                        pairs: state.pairs.clone(),
                        score: state.score.clone(),
                        back: Back::Child { child: i as u32 },
                    })
                    .collect();
                EvalNode {
                    states,
                    children: vec![child],
                }
            }
        }
    };
    ctx.states_peak = ctx.states_peak.max(node.states.len());
    node
}

fn assignment(node: &EvalNode, index: usize, out: &mut BTreeMap<VertexId, Codon>) {
    match node.states[index].back {
        Back::Leaf { vertex, codon } => {
            out.insert(vertex, codon);
        }
        Back::Pair { left, right } => {
            assignment(&node.children[0], left as usize, out);
            assignment(&node.children[1], right as usize, out);
        }
        Back::Child { child } => assignment(&node.children[0], child as usize, out),
    }
}

/// Solves the instance over the given expression.
///
/// The expression must define exactly the instance's implied structure graph
/// (vertex ids are 1-based codon indices). The witness, when present, is the
/// lexicographically least optimal assignment reachable through the retained
/// states, and always re-scores to the reported value.
pub fn solve(
    instance: &MrsoInstance,
    expr: &CwExpression,
    options: &SolveOptions,
) -> Result<Solution, SolveError> {
    expr.validate()?;
    if !crate::cwexpr::validate_against(expr, instance.implied()) {
        return Err(SolveError::ExpressionMismatch);
    }
    let analysis = analyze_etas(expr, instance, options.mode)?;
    let mut ctx = EvalCtx {
        instance,
        filters: &analysis.filters,
        next_filter: 0,
        pruning: options.pruning,
        states_peak: 0,
    };
    let root = eval(expr, &mut ctx);
    debug_assert_eq!(ctx.next_filter, analysis.filters.len());
    let exact = options.mode == Mode::Exact;
    let nodes = expr.node_count();
    let Some(best) = root.states.iter().map(|s| &s.score).max().cloned() else {
        return Ok(Solution {
            value: Cost::Infeasible,
            witness: None,
            exact,
            states_peak: ctx.states_peak,
            nodes,
        });
    };
    let mut witness: Option<Vec<Codon>> = None;
    for (i, state) in root.states.iter().enumerate() {
        if state.score != best {
            continue;
        }
        let mut map = BTreeMap::new();
        assignment(&root, i, &mut map);
        let candidate: Vec<Codon> = map.into_values().collect();
        debug_assert_eq!(candidate.len(), instance.codon_count());
        if witness.as_ref().is_none_or(|w| candidate < *w) {
            witness = Some(candidate);
        }
    }
    let value = Cost::Value(best);
    let witness = witness.expect("nonempty root state set yields a witness");
    let rescored = instance
        .score_labeling(&witness)
        .expect("witness is well formed");
    assert_eq!(
        rescored, value,
        "internal assertion: witness must re-score to the reported value"
    );
    Ok(Solution {
        value,
        witness: Some(witness),
        exact,
        states_peak: ctx.states_peak,
        nodes,
    })
}

fn decode_rank(space: u64, rank: u64, out: &mut [Codon]) {
    let mut rest = rank;
    for slot in out.iter_mut().rev() {
        *slot = Codon::from_index((rest % space) as u32);
        rest /= space;
    }
}

fn better(
    a: Option<(BigRational, u64)>,
    b: Option<(BigRational, u64)>,
) -> Option<(BigRational, u64)> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some((sa, ra)), Some((sb, rb))) => match sa.cmp(&sb) {
            std::cmp::Ordering::Greater => Some((sa, ra)),
            std::cmp::Ordering::Less => Some((sb, rb)),
            std::cmp::Ordering::Equal => Some((sa, ra.min(rb))),
        },
    }
}

/// Certified optimum by exhaustive enumeration of all
/// `|Sigma|^(codon_length * n)` nucleotide-level labelings. Ties break to
/// the lexicographically least witness. Fails when the assignment count
/// exceeds `budget`.
pub fn brute_force(instance: &MrsoInstance, budget: u64) -> Result<Solution, SolveError> {
    let n = instance.codon_count();
    let space = instance.alphabet().codon_count() as u64;
    let total = (space as u128).pow(n as u32);
    if total > budget as u128 {
        return Err(SolveError::BudgetExceeded { total, budget });
    }
    let total = total as u64;
    let score_rank = |buf: &mut Vec<Codon>, rank: u64| -> Option<(BigRational, u64)> {
        decode_rank(space, rank, buf);
        match instance
            .score_labeling(buf)
            .expect("enumerated labeling is well formed")
        {
            Cost::Infeasible => None,
            Cost::Value(v) => Some((v, rank)),
        }
    };
    let best = if total > 1 << 12 {
        (0..total)
            .into_par_iter()
            .map_init(
                || vec![Codon::from_index(0); n],
                |buf, rank| score_rank(buf, rank),
            )
            .reduce(|| None, better)
    } else {
        let mut buf = vec![Codon::from_index(0); n];
        let mut best = None;
        for rank in 0..total {
            best = better(best, score_rank(&mut buf, rank));
        }
        best
    };
    match best {
        None => Ok(Solution {
            value: Cost::Infeasible,
            witness: None,
            exact: true,
            states_peak: 0,
            nodes: 0,
        }),
        Some((score, rank)) => {
            let mut witness = vec![Codon::from_index(0); n];
            decode_rank(space, rank, &mut witness);
            Ok(Solution {
                value: Cost::Value(score),
                witness: Some(witness),
                exact: true,
                states_peak: 0,
                nodes: 0,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cwexpr::parse_expression;
    use crate::instance::{ScoreTable, StructureGraph};
    use num_bigint::BigInt;

    fn rat(v: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(v))
    }

    fn state(pairs: Vec<(Label, Codon)>, score: i64) -> DpState {
        DpState {
            pairs,
            score: rat(score),
            back: Back::Leaf {
                vertex: 1,
                codon: Codon::from_index(0),
            },
        }
    }

    fn pairs_of(set: &StateSet) -> Vec<(Vec<(Label, Codon)>, BigRational)> {
        set.states
            .iter()
            .map(|s| (s.pairs.clone(), s.score.clone()))
            .collect()
    }

    /// Single-codon instance over {x, y} with f(x) = 1, f(y) = 0.
    fn binary_indicator_instance(n: usize) -> MrsoInstance {
        binary_instance_with_bonds(n, [])
    }

    fn binary_instance_with_bonds(
        n: usize,
        bonds: impl IntoIterator<Item = (u32, u32)>,
    ) -> MrsoInstance {
        let alphabet = Alphabet::binary(1);
        let x = alphabet.parse_codon("x").unwrap();
        let structure = StructureGraph::new(n, 1, bonds).unwrap();
        let mut scores = ScoreTable::zero(n);
        for i in 0..n {
            scores.set_entry(i, x, rat(1));
        }
        MrsoInstance::new(alphabet, structure, scores).unwrap()
    }

    #[test]
    fn dp_leaf_binary() {
        let instance = binary_indicator_instance(1);
        let set = dp_leaf(&instance, 1, 1);
        let x = instance.alphabet().parse_codon("x").unwrap();
        let y = instance.alphabet().parse_codon("y").unwrap();
        assert_eq!(
            pairs_of(&set),
            vec![(vec![(1, x)], rat(1)), (vec![(1, y)], rat(0))]
        );
    }

    #[test]
    fn dp_leaf_full_codon_space() {
        let alphabet = Alphabet::rna(3);
        let structure = StructureGraph::new(1, 3, []).unwrap();
        let instance =
            MrsoInstance::new(alphabet, structure, ScoreTable::zero(1)).unwrap();
        assert_eq!(dp_leaf(&instance, 1, 1).len(), 64);
    }

    #[test]
    fn dp_leaf_intra_constraint() {
        // positions 1 and 2 (1-based) bonded inside the codon
        let alphabet = Alphabet::rna(3);
        let structure = StructureGraph::new(1, 3, [(1, 2)]).unwrap();
        let instance =
            MrsoInstance::new(alphabet, structure, ScoreTable::zero(1)).unwrap();
        let set = dp_leaf(&instance, 1, 1);
        // oracle: count codons whose first two symbols are complementary
        let alphabet = instance.alphabet();
        let expected = alphabet
            .codons()
            .filter(|&c| {
                alphabet.complementary(alphabet.codon_symbol(c, 0), alphabet.codon_symbol(c, 1))
            })
            .count();
        assert_eq!(expected, 16);
        assert_eq!(set.len(), expected);
    }

    #[test]
    fn dp_union_combines_and_adds() {
        let instance = binary_indicator_instance(2);
        let x = instance.alphabet().parse_codon("x").unwrap();
        let y = instance.alphabet().parse_codon("y").unwrap();
        let left = StateSet {
            states: vec![state(vec![(1, x)], 2)],
        };
        let right = StateSet {
            states: vec![state(vec![(2, y)], 3)],
        };
        assert_eq!(
            pairs_of(&dp_union(&left, &right)),
            vec![(vec![(1, x), (2, y)], rat(5))]
        );
    }

    #[test]
    fn dp_union_product_size_bound() {
        let instance = binary_indicator_instance(2);
        let x = instance.alphabet().parse_codon("x").unwrap();
        let y = instance.alphabet().parse_codon("y").unwrap();
        let left = StateSet {
            states: vec![state(vec![(1, x)], 1), state(vec![(1, y)], 0)],
        };
        let right = StateSet {
            states: vec![
                state(vec![(2, x)], 0),
                state(vec![(2, y)], 1),
                state(vec![(3, x)], 2),
            ],
        };
        assert!(dp_union(&left, &right).len() <= 6);
    }

    #[test]
    fn dp_union_merges_equal_pairs() {
        let instance = binary_indicator_instance(2);
        let x = instance.alphabet().parse_codon("x").unwrap();
        let y = instance.alphabet().parse_codon("y").unwrap();
        let left = StateSet {
            states: vec![state(vec![(1, x)], 1), state(vec![(1, y)], 0)],
        };
        let right = StateSet {
            states: vec![state(vec![(1, x)], 1)],
        };
        // {(1,x)} ∪ {(1,x)} collapses as a set
        assert_eq!(
            pairs_of(&dp_union(&left, &right)),
            vec![
                (vec![(1, x)], rat(2)),
                (vec![(1, x), (1, y)], rat(1)),
            ]
        );
    }

    #[test]
    fn dp_eta_filters_by_gamma() {
        let alphabet = Alphabet::binary(1);
        let x = alphabet.parse_codon("x").unwrap();
        let y = alphabet.parse_codon("y").unwrap();
        let patterns: PatternSet = [(0, 0)].into_iter().collect();
        let set = StateSet {
            states: vec![
                state(vec![(1, x), (2, y)], 0),
                state(vec![(1, x), (2, x)], 0),
                state(vec![(1, x), (1, y), (2, y)], 0),
            ],
        };
        let kept = dp_eta(&set, 1, 2, &patterns, &alphabet);
        assert_eq!(pairs_of(&kept), vec![(vec![(1, x), (2, y)], rat(0))]);
    }

    #[test]
    fn dp_eta_empty_patterns_keeps_all() {
        let alphabet = Alphabet::binary(1);
        let x = alphabet.parse_codon("x").unwrap();
        let set = StateSet {
            states: vec![state(vec![(1, x), (2, x)], 0)],
        };
        assert_eq!(dp_eta(&set, 1, 2, &PatternSet::new(), &alphabet).len(), 1);
    }

    #[test]
    fn dp_rho_rewrites_and_collapses() {
        let alphabet = Alphabet::binary(1);
        let x = alphabet.parse_codon("x").unwrap();
        let y = alphabet.parse_codon("y").unwrap();
        let set = StateSet {
            states: vec![state(vec![(1, x), (2, x)], 0)],
        };
        assert_eq!(pairs_of(&dp_rho(&set, 2, 1)), vec![(vec![(1, x)], rat(0))]);

        let set = StateSet {
            states: vec![state(vec![(2, x), (3, y)], 0)],
        };
        assert_eq!(
            pairs_of(&dp_rho(&set, 2, 1)),
            vec![(vec![(1, x), (3, y)], rat(0))]
        );

        let set = StateSet {
            states: vec![state(vec![(2, x)], 1), state(vec![(1, x)], 0)],
        };
        assert_eq!(pairs_of(&dp_rho(&set, 2, 1)), vec![(vec![(1, x)], rat(1))]);
    }

    #[test]
    fn prune_examples() {
        let alphabet = Alphabet::binary(1);
        let x = alphabet.parse_codon("x").unwrap();
        let y = alphabet.parse_codon("y").unwrap();
        let set = StateSet {
            states: vec![state(vec![(1, x)], 1), state(vec![(1, x)], 0)],
        };
        assert_eq!(pairs_of(&prune(set)), vec![(vec![(1, x)], rat(1))]);

        let set = StateSet {
            states: vec![state(vec![(1, x)], 1), state(vec![(1, y)], 0)],
        };
        assert_eq!(prune(set).len(), 2);

        assert_eq!(prune(StateSet::default()).len(), 0);
    }

    fn triangle_instance() -> MrsoInstance {
        binary_instance_with_bonds(3, [(1, 2), (1, 3), (2, 3)])
    }

    fn x2_path_instance() -> MrsoInstance {
        binary_instance_with_bonds(5, [(1, 2), (2, 5), (4, 5), (3, 4)])
    }

    #[test]
    fn solve_triangle_is_infeasible() {
        let instance = triangle_instance();
        let expr = parse_expression("eta(1,2, u( rho(2->1, eta(1,2, u(v(1,1), v(2,2)))), v(3,2)))")
            .unwrap();
        let solution = solve(&instance, &expr, &SolveOptions::default()).unwrap();
        assert_eq!(solution.value, Cost::Infeasible);
        assert!(solution.witness.is_none());
        assert!(solution.exact);
        // matches exhaustive enumeration over 2^3 assignments
        let brute = brute_force(&instance, 1 << 20).unwrap();
        assert_eq!(brute.value, Cost::Infeasible);
    }

    #[test]
    fn solve_x2_path() {
        let instance = x2_path_instance();
        let expr = parse_expression(
            "rho(1->2,eta(2,3,u(u(eta(1,2,u(v(1,1),v(2,2))),eta(1,2,u(v(3,1),v(4,2)))),v(5,3))))",
        )
        .unwrap();
        let solution = solve(&instance, &expr, &SolveOptions::default()).unwrap();
        assert_eq!(solution.value, Cost::Value(rat(3)));
        let witness = solution.witness.unwrap();
        let text: Vec<String> = witness
            .iter()
            .map(|&c| instance.alphabet().codon_string(c))
            .collect();
        assert_eq!(text, ["x", "y", "x", "y", "x"]);
        let brute = brute_force(&instance, 1 << 20).unwrap();
        assert_eq!(brute.value, Cost::Value(rat(3)));
        assert_eq!(brute.witness.unwrap(), witness);
    }

    #[test]
    fn solve_single_codon() {
        let alphabet = Alphabet::rna(3);
        let acg = alphabet.parse_codon("ACG").unwrap();
        let structure = StructureGraph::new(1, 3, []).unwrap();
        let mut scores = ScoreTable::zero(1);
        scores.set_entry(0, acg, rat(1));
        let instance = MrsoInstance::new(alphabet, structure, scores).unwrap();
        let expr = parse_expression("v(1,1)").unwrap();
        let solution = solve(&instance, &expr, &SolveOptions::default()).unwrap();
        assert_eq!(solution.value, Cost::Value(rat(1)));
        assert_eq!(solution.witness, Some(vec![acg]));
    }

    #[test]
    fn solve_rejects_mismatched_expression() {
        let instance = triangle_instance();
        let expr = parse_expression("u(v(1,1),u(v(2,1),v(3,1)))").unwrap();
        assert!(matches!(
            solve(&instance, &expr, &SolveOptions::default()),
            Err(SolveError::ExpressionMismatch)
        ));
    }

    #[test]
    fn redundant_eta_is_a_no_op() {
        let instance = binary_instance_with_bonds(2, [(1, 2)]);
        let expr = parse_expression("eta(1,2,eta(1,2,u(v(1,1),v(2,2))))").unwrap();
        let solution = solve(&instance, &expr, &SolveOptions::default()).unwrap();
        assert_eq!(solution.value, Cost::Value(rat(1)));
    }

    #[test]
    fn eta_between_empty_labels_is_legal() {
        let instance = binary_indicator_instance(1);
        let expr = parse_expression("eta(1,5,v(1,1))").unwrap();
        let solution = solve(&instance, &expr, &SolveOptions::default()).unwrap();
        assert_eq!(solution.value, Cost::Value(rat(1)));
    }

    /// Star with heterogeneous bond patterns: codon 1 bonds to codon 2 from
    /// position 1 and to codon 3 from position 2 (1-based), so a single eta
    /// introducing both edges cannot be filtered exactly.
    fn heterogeneous_star() -> (MrsoInstance, CwExpression) {
        let alphabet = Alphabet::rna(3);
        let aaa = alphabet.parse_codon("AAA").unwrap();
        let structure = StructureGraph::new(3, 3, [(1, 5), (2, 9)]).unwrap();
        let mut scores = ScoreTable::zero(3);
        for i in 0..3 {
            scores.set_entry(i, aaa, rat(1));
        }
        let instance = MrsoInstance::new(alphabet, structure, scores).unwrap();
        let expr = parse_expression("eta(2,1,u(u(v(2,1),v(3,1)),v(1,2)))").unwrap();
        (instance, expr)
    }

    #[test]
    fn uniform_multi_edge_eta_is_exact() {
        // center codon 1 bonds leaves 2 and 3 with the same (1,2) pattern
        // (1-based), so one eta may introduce both edges in exact mode;
        // the shared center nucleotide makes the structure non-d1, which
        // solve does not require
        let alphabet = Alphabet::rna(3);
        let aaa = alphabet.parse_codon("AAA").unwrap();
        let structure = StructureGraph::new(3, 3, [(1, 5), (1, 8)]).unwrap();
        assert!(!structure.is_d1());
        let mut scores = ScoreTable::zero(3);
        for i in 0..3 {
            scores.set_entry(i, aaa, rat(1));
        }
        let instance = MrsoInstance::new(alphabet, structure, scores).unwrap();
        let expr = parse_expression("eta(2,1,u(u(v(2,1),v(3,1)),v(1,2)))").unwrap();
        let solution = solve(&instance, &expr, &SolveOptions::default()).unwrap();
        assert!(solution.exact);
        let brute = brute_force(&instance, 1 << 20).unwrap();
        assert_eq!(solution.value, brute.value);
        // AAA at both leaves forces U at two center positions, so at most
        // the two leaves score
        assert_eq!(solution.value, Cost::Value(rat(2)));
    }

    #[test]
    fn conservative_mode_can_be_strictly_below_the_optimum() {
        // center bonds leaf 2 from position 1 and leaf 3 from position 2
        // (1-based); rewarding AAA at leaf 2 and CCC at leaf 3 needs center
        // positions U and G, which the merged one-filter-per-eta constraint
        // cannot express
        let alphabet = Alphabet::rna(3);
        let aaa = alphabet.parse_codon("AAA").unwrap();
        let ccc = alphabet.parse_codon("CCC").unwrap();
        let structure = StructureGraph::new(3, 3, [(1, 4), (2, 7)]).unwrap();
        let mut scores = ScoreTable::zero(3);
        scores.set_entry(1, aaa, rat(1));
        scores.set_entry(2, ccc, rat(1));
        let instance = MrsoInstance::new(alphabet, structure, scores).unwrap();
        let expr = parse_expression("eta(2,1,u(u(v(2,1),v(3,1)),v(1,2)))").unwrap();
        let brute = brute_force(&instance, 1 << 20).unwrap();
        assert_eq!(brute.value, Cost::Value(rat(2)));
        let conservative = solve(
            &instance,
            &expr,
            &SolveOptions {
                mode: Mode::Conservative,
                pruning: true,
            },
        )
        .unwrap();
        assert!(!conservative.exact);
        assert_eq!(conservative.value, Cost::Value(rat(1)));
        let witness = conservative.witness.unwrap();
        assert_eq!(
            instance.score_labeling(&witness).unwrap(),
            conservative.value
        );
    }

    #[test]
    fn exact_mode_rejects_heterogeneous_eta() {
        let (instance, expr) = heterogeneous_star();
        assert!(matches!(
            solve(&instance, &expr, &SolveOptions::default()),
            Err(SolveError::HeterogeneousEta { a: 2, b: 1 })
        ));
    }

    #[test]
    fn conservative_mode_is_a_sound_lower_bound() {
        let (instance, expr) = heterogeneous_star();
        let options = SolveOptions {
            mode: Mode::Conservative,
            pruning: true,
        };
        let solution = solve(&instance, &expr, &options).unwrap();
        assert!(!solution.exact);
        let brute = brute_force(&instance, 1 << 20).unwrap();
        assert!(solution.value <= brute.value);
        if let Some(witness) = &solution.witness {
            assert_eq!(
                instance.score_labeling(witness).unwrap(),
                solution.value
            );
        }
    }

    #[test]
    fn brute_force_examples() {
        // two codons bonded 3-4, indicator scores on AAA
        let alphabet = Alphabet::rna(3);
        let aaa = alphabet.parse_codon("AAA").unwrap();
        let structure = StructureGraph::new(2, 3, [(3, 4)]).unwrap();
        let mut scores = ScoreTable::zero(2);
        scores.set_entry(0, aaa, rat(1));
        scores.set_entry(1, aaa, rat(1));
        let instance = MrsoInstance::new(alphabet, structure, scores).unwrap();
        let solution = brute_force(&instance, 1 << 20).unwrap();
        assert_eq!(solution.value, Cost::Value(rat(1)));
        assert!(solution.exact);

        // empty-bond instance scores zero
        let alphabet = Alphabet::rna(3);
        let structure = StructureGraph::new(2, 3, []).unwrap();
        let instance =
            MrsoInstance::new(alphabet, structure, ScoreTable::zero(2)).unwrap();
        assert_eq!(
            brute_force(&instance, 1 << 20).unwrap().value,
            Cost::Value(rat(0))
        );
    }

    #[test]
    fn brute_force_budget() {
        let instance = x2_path_instance();
        assert!(matches!(
            brute_force(&instance, 16),
            Err(SolveError::BudgetExceeded { total: 32, .. })
        ));
    }

    #[test]
    fn solution_json_shape() {
        let instance = binary_indicator_instance(1);
        let expr = parse_expression("v(1,1)").unwrap();
        let solution = solve(&instance, &expr, &SolveOptions::default()).unwrap();
        let json = solution.to_json_string(instance.alphabet());
        assert_eq!(
            json,
            r#"{"value":"1","witness":["x"],"exact":true,"states_peak":2,"nodes":1}"#
        );
    }

    mod props {
        use super::*;
        use crate::builders::{implied_graph, naive_expression, random_instance};
        use proptest::prelude::*;

        fn solved_and_brute(instance: &MrsoInstance) -> (Solution, Solution) {
            let expr = naive_expression(&implied_graph(instance)).unwrap();
            let solution = solve(instance, &expr, &SolveOptions::default()).unwrap();
            let brute = brute_force(instance, 1 << 22).unwrap();
            (solution, brute)
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn dp_matches_brute_force(seed in any::<u64>(), n in 1usize..4, binary in any::<bool>()) {
                let alphabet = if binary { Alphabet::binary(1) } else { Alphabet::rna(3) };
                let max_bonds = alphabet.codon_length() * n / 2;
                let instance = random_instance(n, (seed as usize) % (max_bonds + 1), &alphabet, seed).unwrap();
                let (solution, brute) = solved_and_brute(&instance);
                prop_assert_eq!(&solution.value, &brute.value);
                if let Some(w) = &solution.witness {
                    prop_assert_eq!(instance.score_labeling(w).unwrap(), solution.value.clone());
                }
            }

            #[test]
            fn pruning_never_changes_the_value(seed in any::<u64>(), n in 1usize..4) {
                let alphabet = Alphabet::binary(3);
                let max_bonds = alphabet.codon_length() * n / 2;
                let instance = random_instance(n, (seed as usize) % (max_bonds + 1), &alphabet, seed).unwrap();
                let expr = naive_expression(&implied_graph(&instance)).unwrap();
                let pruned = solve(&instance, &expr, &SolveOptions { mode: Mode::Exact, pruning: true }).unwrap();
                let unpruned = solve(&instance, &expr, &SolveOptions { mode: Mode::Exact, pruning: false }).unwrap();
                prop_assert_eq!(pruned.value, unpruned.value);
            }

            #[test]
            fn pruned_state_sets_have_distinct_label_sets(seed in any::<u64>(), n in 1usize..4) {
                let alphabet = Alphabet::rna(1);
                let max_bonds = n / 2;
                let instance = random_instance(n, (seed as usize) % (max_bonds + 1), &alphabet, seed).unwrap();
                let left = dp_leaf(&instance, 1, 1);
                let mut acc = left;
                for v in 2..=n as u32 {
                    acc = dp_union(&acc, &dp_leaf(&instance, v, v));
                }
                let rewritten = dp_rho(&acc, 2, 1);
                for set in [&acc, &rewritten] {
                    let mut seen = std::collections::BTreeSet::new();
                    for state in &set.states {
                        prop_assert!(seen.insert(state.pairs.clone()));
                    }
                }
            }

            #[test]
            fn removing_a_bond_never_hurts(seed in any::<u64>(), n in 2usize..4) {
                let alphabet = Alphabet::rna(1);
                let max_bonds = n / 2;
                let bonds = 1 + (seed as usize) % max_bonds.max(1);
                let instance = random_instance(n, bonds.min(max_bonds), &alphabet, seed).unwrap();
                prop_assume!(!instance.structure().bonds().is_empty());
                let full = brute_force(&instance, 1 << 22).unwrap();
                let mut reduced_bonds: Vec<(u32, u32)> =
                    instance.structure().bonds().iter().copied().collect();
                reduced_bonds.remove((seed as usize) % reduced_bonds.len());
                let reduced = MrsoInstance::new(
                    instance.alphabet().clone(),
                    StructureGraph::new(n, 1, reduced_bonds).unwrap(),
                    instance.scores().clone(),
                ).unwrap();
                let relaxed = brute_force(&reduced, 1 << 22).unwrap();
                prop_assert!(relaxed.value >= full.value);
            }

            #[test]
            fn gamma_preserving_symbol_permutation_keeps_the_optimum(seed in any::<u64>(), n in 1usize..4) {
                // A <-> C and U <-> G maps {(C,G),(A,U)} onto itself.
                let alphabet = Alphabet::rna(2);
                let instance = random_instance(n, (seed as usize) % (n + 1).min(alphabet.codon_length() * n / 2 + 1), &alphabet, seed).unwrap();
                let sigma = |id: u8| -> u8 { match id { 0 => 1, 1 => 0, 2 => 3, 3 => 2, _ => unreachable!() } };
                let permute_codon = |c: Codon| -> Codon {
                    let syms: Vec<u8> = (0..alphabet.codon_length())
                        .map(|p| sigma(alphabet.codon_symbol(c, p)))
                        .collect();
                    alphabet.codon_from_symbols(&syms)
                };
                let mut scores = ScoreTable::zero(n);
                for i in 0..n {
                    let record = instance.scores().scores(i);
                    scores.set_default(i, record.default_score().clone());
                    for (&c, v) in record.entries() {
                        scores.set_entry(i, permute_codon(c), v.clone());
                    }
                    for &c in record.forbidden() {
                        scores.forbid(i, permute_codon(c));
                    }
                }
                let permuted = MrsoInstance::new(
                    instance.alphabet().clone(),
                    instance.structure().clone(),
                    scores,
                ).unwrap();
                let a = brute_force(&instance, 1 << 22).unwrap();
                let b = brute_force(&permuted, 1 << 22).unwrap();
                prop_assert_eq!(a.value, b.value);
            }
        }
    }
}
