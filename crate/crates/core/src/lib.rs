//! Solver toolkit for the mRNA structure optimization (MRSO) problem on
//! structure graphs whose implied (codon-level) graph is given as a
//! clique-width expression.
//!
//! The pieces:
//!
//! * [`cwexpr`] — clique-width expressions: AST, text format, graph semantics.
//! * [`instance`] — MRSO instances at the nucleotide level: alphabet,
//!   complementary pairs, structure graph, score tables, and the derived
//!   implied structure graph.
//! * [`solver`] — the bottom-up state-set dynamic program over expressions,
//!   with dominance pruning, witness reconstruction, and a brute-force
//!   enumeration oracle.
//! * [`builders`] — expression constructors for specific graph classes
//!   (cographs, trees, the one-label-per-vertex fallback), the maximum
//!   independent set reduction, and seeded random instances.
//! * [`compare`] — the two-instance comparison problems (is the left optimum
//!   `<=` / `=` the right optimum).
//!
//! All scores are exact rationals; `Infeasible` is a first-class outcome,
//! ordered below every rational value.

pub mod builders;
pub mod compare;
pub mod cwexpr;
pub mod instance;
pub mod solver;

pub use builders::PlainGraph;
pub use cwexpr::{format_expression, parse_expression, validate_against, CwExpression, LabeledGraph};
pub use instance::{Alphabet, Codon, Cost, MrsoInstance, ScoreTable, StructureGraph};
pub use solver::{brute_force, solve, Mode, Solution, SolveOptions};
