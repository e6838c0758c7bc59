//! Comparing the optima of two instances.
//!
//! Both instances are solved independently (concurrently, since the two
//! solves share nothing) and their exact rational optima are compared, with
//! `Infeasible` ordered below every value. The answers to "left <= right"
//! and "left = right" fall out of the relation.

use serde::Serialize;
use thiserror::Error;

use crate::cwexpr::CwExpression;
use crate::instance::{Cost, MrsoInstance};
use crate::solver::{solve, Mode, SolveError, SolveOptions};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Left => write!(f, "left"),
            Side::Right => write!(f, "right"),
        }
    }
}

#[derive(Debug, Error)]
pub enum CompareError {
    #[error("{side} instance failed: {source}")]
    Solve {
        side: Side,
        #[source]
        source: SolveError,
    },
    #[error("{side} structure graph has a nucleotide in two bonds, d1 enforcement rejects it")]
    NotD1 { side: Side },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Relation {
    Less,
    Equal,
    Greater,
}

impl Relation {
    pub fn reversed(self) -> Relation {
        match self {
            Relation::Less => Relation::Greater,
            Relation::Equal => Relation::Equal,
            Relation::Greater => Relation::Less,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Less => "less",
            Relation::Equal => "equal",
            Relation::Greater => "greater",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComparisonResult {
    pub left: Cost,
    pub right: Cost,
    pub relation: Relation,
    /// left <= right
    pub le: bool,
    /// left = right
    pub eq: bool,
    /// Conjunction of both solutions' exactness.
    pub exact: bool,
}

#[derive(Serialize)]
struct ComparisonDoc {
    left: String,
    right: String,
    relation: &'static str,
    le: bool,
    eq: bool,
    exact: bool,
}

impl ComparisonResult {
    pub fn to_json_string(&self) -> String {
        let doc = ComparisonDoc {
            left: self.left.to_string(),
            right: self.right.to_string(),
            relation: self.relation.as_str(),
            le: self.le,
            eq: self.eq,
            exact: self.exact,
        };
        serde_json::to_string(&doc).expect("comparison serialization")
    }
}

#[derive(Copy, Clone, Debug)]
pub struct CompareOptions {
    pub mode: Mode,
    pub pruning: bool,
    /// Reject instances whose structure graph is not degree-at-most-one.
    pub enforce_d1: bool,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            mode: Mode::Exact,
            pruning: true,
            enforce_d1: false,
        }
    }
}

/// Solves both sides and compares the optima.
pub fn compare_instances(
    left: (&MrsoInstance, &CwExpression),
    right: (&MrsoInstance, &CwExpression),
    options: &CompareOptions,
) -> Result<ComparisonResult, CompareError> {
    if options.enforce_d1 {
        for (side, instance) in [(Side::Left, left.0), (Side::Right, right.0)] {
            if !instance.structure().is_d1() {
                return Err(CompareError::NotD1 { side });
            }
        }
    }
    let solve_options = SolveOptions {
        mode: options.mode,
        pruning: options.pruning,
    };
    let (left_result, right_result) = rayon::join(
        || solve(left.0, left.1, &solve_options),
        || solve(right.0, right.1, &solve_options),
    );
    let left_solution = left_result.map_err(|source| CompareError::Solve {
        side: Side::Left,
        source,
    })?;
    let right_solution = right_result.map_err(|source| CompareError::Solve {
        side: Side::Right,
        source,
    })?;
    let relation = match left_solution.value.cmp(&right_solution.value) {
        std::cmp::Ordering::Less => Relation::Less,
        std::cmp::Ordering::Equal => Relation::Equal,
        std::cmp::Ordering::Greater => Relation::Greater,
    };
    Ok(ComparisonResult {
        le: relation != Relation::Greater,
        eq: relation == Relation::Equal,
        exact: left_solution.exact && right_solution.exact,
        left: left_solution.value,
        right: right_solution.value,
        relation,
    })
}
