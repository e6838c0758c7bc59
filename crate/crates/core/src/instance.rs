//! MRSO problem instances at the nucleotide level.
//!
//! An instance is an alphabet with a set of complementary symbol pairs, a
//! structure graph whose vertices are nucleotide positions and whose edges
//! (bonds) demand complementary endpoint symbols, and one score table per
//! codon. From the structure graph we derive the *implied structure graph*:
//! one vertex per codon, an edge wherever any inter-codon bond exists, and,
//! per edge, the set of position-pair bond patterns connecting the two
//! codons. Bonds inside a single codon are kept separately and enforced when
//! codon values are chosen.
//!
//! Codon indices and positions are 0-based throughout this crate; the JSON
//! interchange format and the expression vertex ids are 1-based.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cwexpr::{GraphShape, VertexId};

pub type SymbolId = u8;
pub type Position = u8;

/// A set of (position, position) bond patterns between two codons, or within
/// one codon. For an implied edge {i, j} with i < j the first component is
/// the position on codon i's side.
pub type PatternSet = BTreeSet<(Position, Position)>;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("alphabet must contain at least one symbol")]
    EmptyAlphabet,
    #[error("alphabet symbol {0:?} is empty")]
    EmptySymbol(String),
    #[error("duplicate alphabet symbol {0:?}")]
    DuplicateSymbol(String),
    #[error("alphabet symbol {0:?} is a prefix of {1:?}; codon strings would not decode uniquely")]
    PrefixSymbol(String, String),
    #[error("alphabet has {0} symbols, at most 255 are supported")]
    TooManySymbols(usize),
    #[error("codon length must be >= 1")]
    ZeroCodonLength,
    #[error("codon space |Sigma|^len = {0} exceeds the supported maximum {1}")]
    CodonSpaceTooLarge(u64, u64),
    #[error("unknown symbol {0:?}")]
    UnknownSymbol(String),
    #[error("codon {0:?} does not decode to exactly {1} alphabet symbols")]
    BadCodon(String, usize),
    #[error("instance must have at least one codon")]
    ZeroCodons,
    #[error("bond ({0}, {1}) endpoint out of range 1..={2}")]
    BondOutOfRange(u32, u32, u32),
    #[error("bond ({0}, {0}) joins a nucleotide to itself")]
    BondSelfLoop(u32),
    #[error("score record index {0} out of range 1..={1}")]
    ScoreIndexOutOfRange(usize, usize),
    #[error("duplicate score record for codon index {0}")]
    DuplicateScoreRecord(usize),
    #[error("duplicate score entry for codon {0:?}")]
    DuplicateScoreEntry(String),
    #[error("cannot parse rational {0:?}")]
    BadRational(String),
    #[error("score table covers {0} codons but the structure graph has {1}")]
    ScoreTableSize(usize, usize),
    #[error("labeling has {got} codons, instance has {expected}")]
    LabelingLength { expected: usize, got: usize },
    #[error("labeling contains a codon outside this instance's alphabet")]
    ForeignCodon,
    #[error("invalid instance document: {0}")]
    Json(#[from] serde_json::Error),
}

/// A codon value: one of the `|Sigma|^codon_length` strings over the
/// alphabet, identified by its lexicographic rank (in alphabet symbol order).
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Codon(u32);

impl Codon {
    pub fn index(self) -> u32 {
        self.0
    }

    pub(crate) fn from_index(index: u32) -> Codon {
        Codon(index)
    }
}

/// The symbol alphabet, its complementary pairs, and the codon length.
///
/// The pair set is stored as given; every query goes through the symmetric
/// closure, since an undirected bond constrains both endpoint orders.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<String>,
    gamma: BTreeSet<(SymbolId, SymbolId)>,
    codon_length: usize,
    codon_count: u32,
    // symmetric closure as a dense matrix, indexed x * |Sigma| + y
    complement: Vec<bool>,
    // stride[p] = |Sigma|^(codon_length - 1 - p), so rank order is lexicographic
    strides: Vec<u32>,
}

const MAX_CODON_SPACE: u64 = 1 << 16;

impl Alphabet {
    pub fn new(
        symbols: Vec<String>,
        gamma: &[(String, String)],
        codon_length: usize,
    ) -> Result<Self, InstanceError> {
        if symbols.is_empty() {
            return Err(InstanceError::EmptyAlphabet);
        }
        if symbols.len() > 255 {
            return Err(InstanceError::TooManySymbols(symbols.len()));
        }
        if codon_length == 0 {
            return Err(InstanceError::ZeroCodonLength);
        }
        for (i, s) in symbols.iter().enumerate() {
            if s.is_empty() {
                return Err(InstanceError::EmptySymbol(s.clone()));
            }
            for t in &symbols[i + 1..] {
                if s == t {
                    return Err(InstanceError::DuplicateSymbol(s.clone()));
                }
                if t.starts_with(s.as_str()) {
                    return Err(InstanceError::PrefixSymbol(s.clone(), t.clone()));
                }
                if s.starts_with(t.as_str()) {
                    return Err(InstanceError::PrefixSymbol(t.clone(), s.clone()));
                }
            }
        }
        let count = (symbols.len() as u64)
            .checked_pow(codon_length as u32)
            .unwrap_or(u64::MAX);
        if count > MAX_CODON_SPACE {
            return Err(InstanceError::CodonSpaceTooLarge(count, MAX_CODON_SPACE));
        }
        let mut alphabet = Alphabet {
            symbols,
            gamma: BTreeSet::new(),
            codon_length,
            codon_count: count as u32,
            complement: Vec::new(),
            strides: Vec::new(),
        };
        let n = alphabet.symbols.len();
        let mut pairs = BTreeSet::new();
        for (x, y) in gamma {
            let xi = alphabet
                .symbol_id(x)
                .ok_or_else(|| InstanceError::UnknownSymbol(x.clone()))?;
            let yi = alphabet
                .symbol_id(y)
                .ok_or_else(|| InstanceError::UnknownSymbol(y.clone()))?;
            pairs.insert((xi, yi));
        }
        let mut complement = vec![false; n * n];
        for &(x, y) in &pairs {
            complement[x as usize * n + y as usize] = true;
            complement[y as usize * n + x as usize] = true;
        }
        let mut strides = vec![1u32; codon_length];
        for p in (0..codon_length.saturating_sub(1)).rev() {
            strides[p] = strides[p + 1] * n as u32;
        }
        alphabet.gamma = pairs;
        alphabet.complement = complement;
        alphabet.strides = strides;
        Ok(alphabet)
    }

    /// The four-nucleotide alphabet with Watson-Crick pairs (C,G) and (A,U).
    pub fn rna(codon_length: usize) -> Self {
        Alphabet::new(
            ["A", "C", "G", "U"].map(String::from).to_vec(),
            &[
                ("C".into(), "G".into()),
                ("A".into(), "U".into()),
            ],
            codon_length,
        )
        .expect("builtin alphabet")
    }

    /// A two-symbol alphabet {x, y} with the single pair (x, y).
    pub fn binary(codon_length: usize) -> Self {
        Alphabet::new(
            ["x", "y"].map(String::from).to_vec(),
            &[("x".into(), "y".into())],
            codon_length,
        )
        .expect("builtin alphabet")
    }

    /// The four-symbol alphabet used by the independent-set reduction: two
    /// base symbols a, b and their complements A, B, pairs (a,A) and (b,B).
    pub fn complement_pairs() -> Self {
        Alphabet::new(
            ["a", "b", "A", "B"].map(String::from).to_vec(),
            &[("a".into(), "A".into()), ("b".into(), "B".into())],
            3,
        )
        .expect("builtin alphabet")
    }

    pub fn symbol_count(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn gamma(&self) -> &BTreeSet<(SymbolId, SymbolId)> {
        &self.gamma
    }

    pub fn codon_length(&self) -> usize {
        self.codon_length
    }

    /// |Sigma|^codon_length.
    pub fn codon_count(&self) -> u32 {
        self.codon_count
    }

    pub fn symbol_str(&self, id: SymbolId) -> &str {
        &self.symbols[id as usize]
    }

    pub fn symbol_id(&self, token: &str) -> Option<SymbolId> {
        self.symbols
            .iter()
            .position(|s| s == token)
            .map(|i| i as SymbolId)
    }

    /// True iff (x, y) or (y, x) is a complementary pair.
    pub fn complementary(&self, x: SymbolId, y: SymbolId) -> bool {
        self.complement[x as usize * self.symbols.len() + y as usize]
    }

    pub fn codons(&self) -> impl Iterator<Item = Codon> {
        (0..self.codon_count).map(Codon)
    }

    pub fn contains_codon(&self, codon: Codon) -> bool {
        codon.0 < self.codon_count
    }

    /// The symbol at `position` of the codon (0-based).
    pub fn codon_symbol(&self, codon: Codon, position: usize) -> SymbolId {
        ((codon.0 / self.strides[position]) % self.symbols.len() as u32) as SymbolId
    }

    pub fn codon_from_symbols(&self, syms: &[SymbolId]) -> Codon {
        debug_assert_eq!(syms.len(), self.codon_length);
        let mut rank = 0;
        for (p, &s) in syms.iter().enumerate() {
            rank += s as u32 * self.strides[p];
        }
        Codon(rank)
    }

    pub fn codon_string(&self, codon: Codon) -> String {
        (0..self.codon_length)
            .map(|p| self.symbol_str(self.codon_symbol(codon, p)))
            .collect()
    }

    /// Decodes a codon string. Symbols are matched greedily; the alphabet is
    /// prefix-free, so decoding is unambiguous.
    pub fn parse_codon(&self, text: &str) -> Result<Codon, InstanceError> {
        let mut rest = text;
        let mut syms = Vec::with_capacity(self.codon_length);
        'outer: while !rest.is_empty() {
            for (id, s) in self.symbols.iter().enumerate() {
                if let Some(tail) = rest.strip_prefix(s.as_str()) {
                    syms.push(id as SymbolId);
                    rest = tail;
                    continue 'outer;
                }
            }
            return Err(InstanceError::BadCodon(text.into(), self.codon_length));
        }
        if syms.len() != self.codon_length {
            return Err(InstanceError::BadCodon(text.into(), self.codon_length));
        }
        Ok(self.codon_from_symbols(&syms))
    }
}

/// The nucleotide-level structure graph: `n` codons of `codon_length`
/// nucleotides each, and a set of bonds between distinct nucleotides
/// (1-based indices).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructureGraph {
    n: usize,
    codon_length: usize,
    bonds: BTreeSet<(u32, u32)>,
}

impl StructureGraph {
    pub fn new(
        n: usize,
        codon_length: usize,
        bonds: impl IntoIterator<Item = (u32, u32)>,
    ) -> Result<Self, InstanceError> {
        if n == 0 {
            return Err(InstanceError::ZeroCodons);
        }
        let max = (codon_length * n) as u32;
        let mut set = BTreeSet::new();
        for (u, v) in bonds {
            if u == v {
                return Err(InstanceError::BondSelfLoop(u));
            }
            if u == 0 || v == 0 || u > max || v > max {
                return Err(InstanceError::BondOutOfRange(u, v, max));
            }
            set.insert((u.min(v), u.max(v)));
        }
        Ok(StructureGraph {
            n,
            codon_length,
            bonds: set,
        })
    }

    pub fn codon_count(&self) -> usize {
        self.n
    }

    pub fn codon_length(&self) -> usize {
        self.codon_length
    }

    pub fn nucleotide_count(&self) -> usize {
        self.n * self.codon_length
    }

    pub fn bonds(&self) -> &BTreeSet<(u32, u32)> {
        &self.bonds
    }

    /// True iff no nucleotide participates in two bonds.
    pub fn is_d1(&self) -> bool {
        let mut seen = BTreeSet::new();
        for &(u, v) in &self.bonds {
            if !seen.insert(u) || !seen.insert(v) {
                return false;
            }
        }
        true
    }
}

/// The codon-level quotient of a structure graph.
///
/// Codon indices are 0-based. `edge_bonds` maps each inter-codon edge
/// {i, j} (i < j) to its nonempty bond pattern set; `intra` maps a codon to
/// the position pairs bonded inside it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImpliedStructure {
    n: usize,
    edge_bonds: BTreeMap<(u32, u32), PatternSet>,
    intra: BTreeMap<u32, PatternSet>,
}

impl ImpliedStructure {
    pub fn codon_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.edge_bonds.keys().copied()
    }

    pub fn edge_bonds(&self) -> &BTreeMap<(u32, u32), PatternSet> {
        &self.edge_bonds
    }

    pub fn patterns(&self, i: u32, j: u32) -> Option<&PatternSet> {
        self.edge_bonds.get(&(i.min(j), i.max(j)))
    }

    pub fn intra(&self) -> &BTreeMap<u32, PatternSet> {
        &self.intra
    }

    pub fn intra_patterns(&self, codon: u32) -> Option<&PatternSet> {
        self.intra.get(&codon)
    }

    pub fn degree(&self, codon: u32) -> usize {
        self.edge_bonds
            .keys()
            .filter(|&&(i, j)| i == codon || j == codon)
            .count()
    }
}

// Implied vertices are published 1-based so they line up with expression
// leaf ids: codon index i corresponds to vertex id i + 1.
impl GraphShape for ImpliedStructure {
    fn vertex_set(&self) -> BTreeSet<VertexId> {
        (1..=self.n as u32).collect()
    }

    fn edge_set(&self) -> BTreeSet<(VertexId, VertexId)> {
        self.edge_bonds.keys().map(|&(i, j)| (i + 1, j + 1)).collect()
    }
}

/// Quotients the structure graph by codon membership: a bond between codons
/// i != j contributes one (position, position) pattern to the edge {i, j};
/// a bond inside codon i contributes to intra(i).
pub fn derive_implied(structure: &StructureGraph, codon_length: usize) -> ImpliedStructure {
    let mut edge_bonds: BTreeMap<(u32, u32), PatternSet> = BTreeMap::new();
    let mut intra: BTreeMap<u32, PatternSet> = BTreeMap::new();
    let len = codon_length as u32;
    for &(r, s) in structure.bonds() {
        let (ci, pi) = ((r - 1) / len, ((r - 1) % len) as Position);
        let (cj, pj) = ((s - 1) / len, ((s - 1) % len) as Position);
        if ci == cj {
            intra
                .entry(ci)
                .or_default()
                .insert((pi.min(pj), pi.max(pj)));
        } else if ci < cj {
            edge_bonds.entry((ci, cj)).or_default().insert((pi, pj));
        } else {
            edge_bonds.entry((cj, ci)).or_default().insert((pj, pi));
        }
    }
    ImpliedStructure {
        n: structure.codon_count(),
        edge_bonds,
        intra,
    }
}

/// True iff for every pattern (p, q), position p of `l1` and position q of
/// `l2` carry complementary symbols. Vacuously true on an empty pattern set.
pub fn pair_satisfies_gamma(
    alphabet: &Alphabet,
    l1: Codon,
    l2: Codon,
    patterns: &PatternSet,
) -> bool {
    patterns.iter().all(|&(p, q)| {
        alphabet.complementary(
            alphabet.codon_symbol(l1, p as usize),
            alphabet.codon_symbol(l2, q as usize),
        )
    })
}

/// Per-codon scores: explicit entries over a default, plus codon values that
/// may never appear in a witness.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct CodonScores {
    entries: BTreeMap<Codon, BigRational>,
    default: BigRational,
    forbidden: BTreeSet<Codon>,
}

impl CodonScores {
    pub fn score(&self, codon: Codon) -> &BigRational {
        self.entries.get(&codon).unwrap_or(&self.default)
    }

    pub fn is_forbidden(&self, codon: Codon) -> bool {
        self.forbidden.contains(&codon)
    }

    pub fn entries(&self) -> &BTreeMap<Codon, BigRational> {
        &self.entries
    }

    pub fn default_score(&self) -> &BigRational {
        &self.default
    }

    pub fn forbidden(&self) -> &BTreeSet<Codon> {
        &self.forbidden
    }
}

/// One [`CodonScores`] record per codon index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScoreTable {
    per_codon: Vec<CodonScores>,
}

impl ScoreTable {
    /// All-default-zero table with nothing forbidden.
    pub fn zero(n: usize) -> Self {
        ScoreTable {
            per_codon: vec![CodonScores::default(); n],
        }
    }

    pub fn codon_count(&self) -> usize {
        self.per_codon.len()
    }

    pub fn scores(&self, codon_index: usize) -> &CodonScores {
        &self.per_codon[codon_index]
    }

    pub fn set_entry(&mut self, codon_index: usize, codon: Codon, value: BigRational) {
        self.per_codon[codon_index].entries.insert(codon, value);
    }

    pub fn set_default(&mut self, codon_index: usize, value: BigRational) {
        self.per_codon[codon_index].default = value;
    }

    pub fn forbid(&mut self, codon_index: usize, codon: Codon) {
        self.per_codon[codon_index].forbidden.insert(codon);
    }
}

/// The optimum of an instance, or the result of scoring one labeling:
/// either an exact rational or `Infeasible`.
///
/// `Infeasible` orders below every rational, which is the unique monotone
/// completion for a maximization objective.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Cost {
    Infeasible,
    Value(BigRational),
}

impl Cost {
    pub fn from_integer(v: i64) -> Self {
        Cost::Value(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn value(&self) -> Option<&BigRational> {
        match self {
            Cost::Infeasible => None,
            Cost::Value(v) => Some(v),
        }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, Cost::Infeasible)
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cost::Infeasible => write!(f, "infeasible"),
            Cost::Value(v) => write!(f, "{v}"),
        }
    }
}

/// A complete MRSO instance with its derived implied structure graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MrsoInstance {
    alphabet: Alphabet,
    structure: StructureGraph,
    scores: ScoreTable,
    implied: ImpliedStructure,
}

impl MrsoInstance {
    pub fn new(
        alphabet: Alphabet,
        structure: StructureGraph,
        scores: ScoreTable,
    ) -> Result<Self, InstanceError> {
        if scores.codon_count() != structure.codon_count() {
            return Err(InstanceError::ScoreTableSize(
                scores.codon_count(),
                structure.codon_count(),
            ));
        }
        let implied = derive_implied(&structure, alphabet.codon_length());
        Ok(MrsoInstance {
            alphabet,
            structure,
            scores,
            implied,
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn structure(&self) -> &StructureGraph {
        &self.structure
    }

    pub fn scores(&self) -> &ScoreTable {
        &self.scores
    }

    pub fn implied(&self) -> &ImpliedStructure {
        &self.implied
    }

    pub fn codon_count(&self) -> usize {
        self.structure.codon_count()
    }

    /// Scores a complete labeling: `Infeasible` if any inter-codon bond
    /// pattern, intra-codon bond, or forbidden-codon constraint is violated,
    /// otherwise the sum of the per-codon scores. A labeling of the wrong
    /// length (or over a different alphabet) is an input error, not
    /// `Infeasible`.
    pub fn score_labeling(&self, labeling: &[Codon]) -> Result<Cost, InstanceError> {
        if labeling.len() != self.codon_count() {
            return Err(InstanceError::LabelingLength {
                expected: self.codon_count(),
                got: labeling.len(),
            });
        }
        if labeling.iter().any(|&c| !self.alphabet.contains_codon(c)) {
            return Err(InstanceError::ForeignCodon);
        }
        for (i, &codon) in labeling.iter().enumerate() {
            if self.scores.scores(i).is_forbidden(codon) {
                return Ok(Cost::Infeasible);
            }
        }
        for (&i, patterns) in self.implied.intra() {
            let codon = labeling[i as usize];
            if !pair_satisfies_gamma(&self.alphabet, codon, codon, patterns) {
                return Ok(Cost::Infeasible);
            }
        }
        for (&(i, j), patterns) in self.implied.edge_bonds() {
            if !pair_satisfies_gamma(
                &self.alphabet,
                labeling[i as usize],
                labeling[j as usize],
                patterns,
            ) {
                return Ok(Cost::Infeasible);
            }
        }
        let mut total = BigRational::zero();
        for (i, &codon) in labeling.iter().enumerate() {
            total += self.scores.scores(i).score(codon).clone();
        }
        Ok(Cost::Value(total))
    }

    pub fn parse_labeling(&self, texts: &[String]) -> Result<Vec<Codon>, InstanceError> {
        texts.iter().map(|t| self.alphabet.parse_codon(t)).collect()
    }

    pub fn from_json_str(text: &str) -> Result<Self, InstanceError> {
        let doc: InstanceDoc = serde_json::from_str(text)?;
        doc.into_instance()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&InstanceDoc::from_instance(self)).expect("instance serialization")
    }
}

fn parse_rational(text: &str) -> Result<BigRational, InstanceError> {
    let bad = || InstanceError::BadRational(text.into());
    match text.trim().split_once('/') {
        Some((numer, denom)) => {
            let numer = BigInt::from_str(numer.trim()).map_err(|_| bad())?;
            let denom = BigInt::from_str(denom.trim()).map_err(|_| bad())?;
            if denom.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(numer, denom))
        }
        None => {
            let numer = BigInt::from_str(text.trim()).map_err(|_| bad())?;
            Ok(BigRational::from_integer(numer))
        }
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceDoc {
    alphabet: AlphabetDoc,
    n: usize,
    #[serde(default)]
    bonds: Vec<(u32, u32)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    scores: Vec<ScoreRecordDoc>,
}

#[derive(Serialize, Deserialize)]
struct AlphabetDoc {
    symbols: Vec<String>,
    #[serde(default)]
    gamma: Vec<(String, String)>,
    codon_length: usize,
}

#[derive(Serialize, Deserialize)]
struct ScoreRecordDoc {
    codon_index: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    entries: Vec<ScoreEntryDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    default: Option<RationalDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    forbidden: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct ScoreEntryDoc {
    codon: String,
    value: RationalDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RationalDoc {
    Int(i64),
    Text(String),
}

impl RationalDoc {
    fn to_rational(&self) -> Result<BigRational, InstanceError> {
        match self {
            RationalDoc::Int(v) => Ok(BigRational::from_integer(BigInt::from(*v))),
            RationalDoc::Text(t) => parse_rational(t),
        }
    }
}

impl InstanceDoc {
    fn into_instance(self) -> Result<MrsoInstance, InstanceError> {
        let alphabet = Alphabet::new(
            self.alphabet.symbols,
            &self.alphabet.gamma,
            self.alphabet.codon_length,
        )?;
        let structure = StructureGraph::new(self.n, alphabet.codon_length(), self.bonds)?;
        let mut scores = ScoreTable::zero(self.n);
        let mut seen = BTreeSet::new();
        for record in self.scores {
            if record.codon_index == 0 || record.codon_index > self.n {
                return Err(InstanceError::ScoreIndexOutOfRange(record.codon_index, self.n));
            }
            if !seen.insert(record.codon_index) {
                return Err(InstanceError::DuplicateScoreRecord(record.codon_index));
            }
            let index = record.codon_index - 1;
            let mut listed = BTreeSet::new();
            for entry in record.entries {
                let codon = alphabet.parse_codon(&entry.codon)?;
                if !listed.insert(codon) {
                    return Err(InstanceError::DuplicateScoreEntry(entry.codon));
                }
                scores.set_entry(index, codon, entry.value.to_rational()?);
            }
            if let Some(default) = record.default {
                scores.set_default(index, default.to_rational()?);
            }
            for text in record.forbidden {
                scores.forbid(index, alphabet.parse_codon(&text)?);
            }
        }
        MrsoInstance::new(alphabet, structure, scores)
    }

    fn from_instance(instance: &MrsoInstance) -> Self {
        let alphabet = instance.alphabet();
        let mut scores = Vec::new();
        for i in 0..instance.codon_count() {
            let record = instance.scores().scores(i);
            let trivial = record.entries().is_empty()
                && record.forbidden().is_empty()
                && record.default_score().is_zero();
            if trivial {
                continue;
            }
            scores.push(ScoreRecordDoc {
                codon_index: i + 1,
                entries: record
                    .entries()
                    .iter()
                    .map(|(&codon, value)| ScoreEntryDoc {
                        codon: alphabet.codon_string(codon),
                        value: RationalDoc::Text(value.to_string()),
                    })
                    .collect(),
                default: if record.default_score().is_zero() {
                    None
                } else {
                    Some(RationalDoc::Text(record.default_score().to_string()))
                },
                forbidden: record
                    .forbidden()
                    .iter()
                    .map(|&codon| alphabet.codon_string(codon))
                    .collect(),
            });
        }
        InstanceDoc {
            alphabet: AlphabetDoc {
                symbols: alphabet.symbols().to_vec(),
                gamma: alphabet
                    .gamma()
                    .iter()
                    .map(|&(x, y)| {
                        (
                            alphabet.symbol_str(x).to_string(),
                            alphabet.symbol_str(y).to_string(),
                        )
                    })
                    .collect(),
                codon_length: alphabet.codon_length(),
            },
            n: instance.codon_count(),
            bonds: instance.structure().bonds().iter().copied().collect(),
            scores,
        }
    }
}
