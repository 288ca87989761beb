//! Minor embeddings, their validation, hardware-level problems and decoding.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::chimera::HardwareGraph;
use crate::error::{invalid, Result};
use crate::problem::{Assignment, ProblemGraph};
use crate::{rng, Qubit, Var};

/// Map from logical variable to its chain of qubits.
///
/// Chains are stored sorted and de-duplicated. Whether they are disjoint and
/// connected is checked by [`verify_embedding`], not on construction.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Embedding {
    chains: BTreeMap<Var, Vec<Qubit>>,
}

impl Embedding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_chains(chains: impl IntoIterator<Item = (Var, Vec<Qubit>)>) -> Self {
        let mut emb = Self::new();
        for (v, chain) in chains {
            emb.insert(v, chain);
        }
        emb
    }

    /// Set the chain of `v`, replacing any previous one.
    pub fn insert(&mut self, v: Var, mut chain: Vec<Qubit>) {
        chain.sort_unstable();
        chain.dedup();
        self.chains.insert(v, chain);
    }

    pub fn chain(&self, v: Var) -> Option<&[Qubit]> {
        self.chains.get(&v).map(Vec::as_slice)
    }

    pub fn chains(&self) -> &BTreeMap<Var, Vec<Qubit>> {
        &self.chains
    }

    pub fn variables(&self) -> impl Iterator<Item = Var> + '_ {
        self.chains.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.chains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chains.is_empty()
    }

    pub fn num_qubits(&self) -> usize {
        self.chains.values().map(Vec::len).sum()
    }

    /// Same chains with variables renamed through `map`.
    pub fn relabel(&self, mut map: impl FnMut(Var) -> Var) -> Self {
        Self::from_chains(self.chains.iter().map(|(&v, c)| (map(v), c.clone())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ViolationKind {
    DisconnectedChain,
    OverlappingChains,
    MissingLogicalEdge,
    DefectQubitUsed,
    /// A variable of the checked subset has no chain, or a chain belongs to a
    /// variable outside the subset.
    UncoveredVariable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    fn push(&mut self, kind: ViolationKind, detail: String) {
        self.violations.push(Violation { kind, detail });
    }
}

/// Check that `emb` is a minor embedding of the problem restricted to `subset`.
///
/// Violations are collected rather than returned as errors.
pub fn verify_embedding(
    problem: &ProblemGraph,
    subset: &[Var],
    hw: &HardwareGraph,
    emb: &Embedding,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    let members: BTreeSet<Var> = subset.iter().copied().collect();

    for &v in &members {
        if emb.chain(v).is_none() {
            report.push(ViolationKind::UncoveredVariable, format!("variable {v} has no chain"));
        }
    }
    let mut owner: BTreeMap<Qubit, Var> = BTreeMap::new();
    for (&v, chain) in emb.chains() {
        if !members.contains(&v) {
            report.push(ViolationKind::UncoveredVariable, format!("chain for variable {v} outside the subset"));
        }
        if chain.is_empty() {
            report.push(ViolationKind::DisconnectedChain, format!("variable {v} has an empty chain"));
            continue;
        }
        for &q in chain {
            if !hw.is_present(q) {
                report.push(ViolationKind::DefectQubitUsed, format!("variable {v} uses absent qubit {q}"));
            }
            if let Some(other) = owner.insert(q, v) {
                report.push(
                    ViolationKind::OverlappingChains,
                    format!("qubit {q} shared by variables {other} and {v}"),
                );
            }
        }
        if !chain_connected(hw, chain) {
            report.push(ViolationKind::DisconnectedChain, format!("chain of variable {v} is not connected"));
        }
    }

    for &(u, v) in problem.couplings().keys() {
        if !(members.contains(&u) && members.contains(&v)) {
            continue;
        }
        let (Some(cu), Some(cv)) = (emb.chain(u), emb.chain(v)) else {
            continue;
        };
        if !chains_adjacent(hw, cu, cv) {
            report.push(
                ViolationKind::MissingLogicalEdge,
                format!("no coupler between the chains of {u} and {v}"),
            );
        }
    }
    report
}

fn chain_connected(hw: &HardwareGraph, chain: &[Qubit]) -> bool {
    let mut seen = BTreeSet::from([chain[0]]);
    let mut queue = VecDeque::from([chain[0]]);
    while let Some(q) = queue.pop_front() {
        for &w in hw.neighbors(q) {
            if chain.binary_search(&w).is_ok() && seen.insert(w) {
                queue.push_back(w);
            }
        }
    }
    seen.len() == chain.len()
}

fn chains_adjacent(hw: &HardwareGraph, a: &[Qubit], b: &[Qubit]) -> bool {
    a.iter().any(|&q| hw.neighbors(q).iter().any(|w| b.binary_search(w).is_ok()))
}

/// Lowest `(min, max)` coupler between two disjoint chains.
fn lowest_coupler(hw: &HardwareGraph, a: &[Qubit], b: &[Qubit]) -> Option<(Qubit, Qubit)> {
    a.iter()
        .flat_map(|&q| {
            hw.neighbors(q)
                .iter()
                .filter(|w| b.binary_search(w).is_ok())
                .map(move |&w| (q.min(w), q.max(w)))
        })
        .min()
}

/// Spanning tree of the subgraph induced by `chain`, grown breadth-first from the
/// lowest qubit with neighbours visited in id order.
pub fn chain_spanning_tree(hw: &HardwareGraph, chain: &[Qubit]) -> Vec<(Qubit, Qubit)> {
    let mut tree = Vec::with_capacity(chain.len().saturating_sub(1));
    let Some(&root) = chain.first() else {
        return tree;
    };
    let mut seen = BTreeSet::from([root]);
    let mut queue = VecDeque::from([root]);
    while let Some(q) = queue.pop_front() {
        for &w in hw.neighbors(q) {
            if chain.binary_search(&w).is_ok() && seen.insert(w) {
                tree.push((q.min(w), q.max(w)));
                queue.push_back(w);
            }
        }
    }
    tree
}

/// How a logical field is spread over the qubits of its chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FieldPolicy {
    /// `h_v / |T_v|` on every qubit of the chain.
    #[default]
    Uniform,
    /// All of `h_v` on the lowest-id qubit of the chain.
    Root,
}

/// Magnitude of the ferromagnetic intra-chain coupling.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ChainStrength {
    Fixed(f64),
    /// `1 + max_v sum_j |J_vj|` over the embedded variables.
    #[default]
    LocalBound,
    /// `1 + sum |J_ij| + sum |h_i|`; every ground state is then chain-aligned.
    GlobalBound,
    /// `factor * max |J_ij|` (1 when there are no couplings). Weaker than the
    /// bounds, so single-flip dynamics can still move whole chains.
    Relative(f64),
}

impl ChainStrength {
    pub fn resolve(&self, sub: &ProblemGraph) -> f64 {
        match *self {
            ChainStrength::Fixed(value) => value,
            ChainStrength::LocalBound => {
                let local = (0..sub.num_vars())
                    .map(|v| sub.neighbors(v).iter().map(|(_, j)| j.abs()).sum::<f64>())
                    .fold(0.0, f64::max);
                1.0 + local
            }
            ChainStrength::GlobalBound => 1.0 + sub.abs_weight(),
            ChainStrength::Relative(factor) => {
                let max = sub.couplings().values().map(|j| j.abs()).fold(0.0, f64::max);
                factor * if max > 0.0 { max } else { 1.0 }
            }
        }
    }
}

/// Hardware-level Ising problem obtained by embedding a logical problem.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedProblem {
    couplings: BTreeMap<(Qubit, Qubit), f64>,
    fields: BTreeMap<Qubit, f64>,
    embedding: Embedding,
    chain_strength: f64,
    tree_edges: usize,
}

impl EmbeddedProblem {
    /// Hardware couplings keyed by `(a, b)` with `a < b`. Induced intra-chain edges
    /// that are not part of the spanning tree carry no coupling and are absent.
    pub fn couplings(&self) -> &BTreeMap<(Qubit, Qubit), f64> {
        &self.couplings
    }

    /// Fields on every chain qubit (zero entries included).
    pub fn fields(&self) -> &BTreeMap<Qubit, f64> {
        &self.fields
    }

    pub fn embedding(&self) -> &Embedding {
        &self.embedding
    }

    pub fn chain_strength(&self) -> f64 {
        self.chain_strength
    }

    /// Chain qubits in id order.
    pub fn qubits(&self) -> impl Iterator<Item = Qubit> + '_ {
        self.fields.keys().copied()
    }

    pub fn num_qubits(&self) -> usize {
        self.fields.len()
    }

    /// Energy contributed by intact chains: `-chain_strength` per spanning-tree edge.
    pub fn chain_offset(&self) -> f64 {
        -self.chain_strength * self.tree_edges as f64
    }

    pub fn energy(&self, sample: &BTreeMap<Qubit, i8>) -> Result<f64> {
        let spin = |q: Qubit| -> Result<f64> {
            sample.get(&q).map(|&s| f64::from(s)).ok_or_else(|| invalid!("sample is missing qubit {q}"))
        };
        let mut total = 0.0;
        for (&(a, b), &j) in &self.couplings {
            total += j * spin(a)? * spin(b)?;
        }
        for (&q, &h) in &self.fields {
            total += h * spin(q)?;
        }
        Ok(total)
    }

    /// Hardware state with every chain set to its variable's logical spin.
    /// `x` is indexed by the embedding's variable labels.
    pub fn aligned_sample(&self, x: &Assignment) -> BTreeMap<Qubit, i8> {
        self.embedding
            .chains()
            .iter()
            .flat_map(|(&v, chain)| chain.iter().map(move |&q| (q, x.get(v))))
            .collect()
    }
}

/// Embed `sub` on the hardware. The embedding must cover exactly the variables
/// `0..sub.num_vars()`.
///
/// Spanning-tree edges of each chain get `-chain_strength`; each logical coupling
/// goes in full onto the lowest-id coupler between the two chains.
pub fn build_embedded_problem(
    sub: &ProblemGraph,
    emb: &Embedding,
    hw: &HardwareGraph,
    chain_strength: f64,
    policy: FieldPolicy,
) -> Result<EmbeddedProblem> {
    if !(chain_strength.is_finite() && chain_strength > 0.0) {
        return Err(invalid!("chain strength must be positive, got {chain_strength}"));
    }
    let all: Vec<Var> = (0..sub.num_vars()).collect();
    let report = verify_embedding(sub, &all, hw, emb);
    if let Some(first) = report.violations.first() {
        return Err(invalid!("embedding is not valid: {}", first.detail));
    }

    let mut couplings = BTreeMap::new();
    let mut fields = BTreeMap::new();
    let mut tree_edges = 0;
    for (&v, chain) in emb.chains() {
        for edge in chain_spanning_tree(hw, chain) {
            couplings.insert(edge, -chain_strength);
            tree_edges += 1;
        }
        let h = sub.field(v);
        match policy {
            FieldPolicy::Uniform => {
                let share = h / chain.len() as f64;
                let (last, rest) = chain.split_last().expect("chains are non-empty");
                for &q in rest {
                    fields.insert(q, share);
                }
                fields.insert(*last, h - share * rest.len() as f64);
            }
            FieldPolicy::Root => {
                for (i, &q) in chain.iter().enumerate() {
                    fields.insert(q, if i == 0 { h } else { 0.0 });
                }
            }
        }
    }
    for (&(u, v), &j) in sub.couplings() {
        let edge = lowest_coupler(hw, emb.chain(u).unwrap(), emb.chain(v).unwrap())
            .expect("validated embeddings realise every logical edge");
        couplings.insert(edge, j);
    }
    Ok(EmbeddedProblem { couplings, fields, embedding: emb.clone(), chain_strength, tree_edges })
}

/// Resolution of exact ties in majority-vote decoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TieBreak {
    Fixed(i8),
    Seeded(u64),
}

impl Default for TieBreak {
    fn default() -> Self {
        TieBreak::Fixed(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub spins: BTreeMap<Var, i8>,
    /// Chains whose qubits do not all agree.
    pub chain_breaks: usize,
}

/// Majority vote over each chain.
pub fn decode(sample: &BTreeMap<Qubit, i8>, emb: &Embedding, tie_break: TieBreak) -> Result<Decoded> {
    let mut tie_rng = match tie_break {
        TieBreak::Seeded(seed) => Some(rng::from_seed(seed)),
        TieBreak::Fixed(_) => None,
    };
    let mut spins = BTreeMap::new();
    let mut chain_breaks = 0;
    for (&v, chain) in emb.chains() {
        let mut sum = 0i64;
        let mut plus = 0usize;
        for &q in chain {
            let s = *sample.get(&q).ok_or_else(|| invalid!("sample is missing qubit {q} of variable {v}"))?;
            sum += i64::from(s);
            plus += (s > 0) as usize;
        }
        if plus != 0 && plus != chain.len() {
            chain_breaks += 1;
        }
        let spin = match sum.signum() {
            1 => 1,
            -1 => -1,
            _ => match (tie_break, tie_rng.as_mut()) {
                (_, Some(r)) => {
                    if r.gen::<bool>() {
                        1
                    } else {
                        -1
                    }
                }
                (TieBreak::Fixed(s), None) => {
                    if s < 0 {
                        -1
                    } else {
                        1
                    }
                }
                (TieBreak::Seeded(_), None) => unreachable!(),
            },
        };
        spins.insert(v, spin);
    }
    Ok(Decoded { spins, chain_breaks })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainStats {
    pub max_len: usize,
    pub mean_len: f64,
    pub total_qubits: usize,
}

pub fn chain_stats(emb: &Embedding) -> ChainStats {
    let total_qubits = emb.num_qubits();
    let max_len = emb.chains().values().map(Vec::len).max().unwrap_or(0);
    let mean_len = if emb.is_empty() { 0.0 } else { total_qubits as f64 / emb.len() as f64 };
    ChainStats { max_len, mean_len, total_qubits }
}
