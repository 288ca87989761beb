//! Two-stage full-graph heuristic embedder, used as the baseline.
//!
//! Stage one places every variable in a seeded random order. A variable's root is
//! the qubit minimising the summed vertex-weighted distance to the chains of its
//! embedded neighbours, where entering a qubit costs `base^occupancy`. The shortest
//! paths from the root to each neighbour chain join the new chain even if their
//! qubits already hold other variables.
//!
//! Stage two re-routes every variable with the same weighted search, pass after
//! pass, until no qubit holds more than one variable or the pass budget is spent.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

use rand::seq::SliceRandom;

use crate::chimera::HardwareGraph;
use crate::embedding::Embedding;
use crate::error::{invalid, Result};
use crate::problem::ProblemGraph;
use crate::{rng, Qubit, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct CaiOptions {
    /// Re-routing passes after the initial placement.
    pub max_refine_rounds: usize,
    /// Cost base of an occupied qubit; must exceed 1.
    pub weight_base: f64,
}

impl Default for CaiOptions {
    fn default() -> Self {
        Self { max_refine_rounds: 10, weight_base: 8.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CaiCounters {
    /// Weighted searches during initial placement.
    pub n_dijkstra_initial: u64,
    /// Weighted searches during refinement.
    pub n_dijkstra_refine: u64,
    /// Edges relaxed over all searches.
    pub relaxed_edges: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaiResult {
    /// The embedding of every variable, or `None` when overlaps remained.
    pub embedding: Option<Embedding>,
    /// Refinement passes executed.
    pub rounds: usize,
    /// Largest qubit occupancy at the end.
    pub max_occupancy: usize,
    pub counters: CaiCounters,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Initial,
    Refine,
}

/// Chains that may share qubits.
///
/// `occupancy[q]` lists the variables whose chain contains `q`; every chain holds
/// each qubit at most once.
#[derive(Debug, Clone)]
pub struct MultiAssignState<'a> {
    hw: &'a HardwareGraph,
    base: f64,
    occupancy: Vec<Vec<Var>>,
    /// `base^occupancy[q].len()`, kept in step with `occupancy`.
    weights: Vec<f64>,
    chains: Vec<Vec<Qubit>>,
    counters: CaiCounters,
    stage: Stage,
}

/// Weighted distances and predecessors from one chain.
#[derive(Debug, Clone)]
pub struct Distances {
    /// Cost to reach each qubit, including its own weight; infinite when unreachable.
    pub dist: Vec<f64>,
    parent: Vec<u32>,
}

const NO_PARENT: u32 = u32::MAX;

impl<'a> MultiAssignState<'a> {
    pub fn new(hw: &'a HardwareGraph, num_vars: usize, base: f64) -> Self {
        Self {
            hw,
            base,
            occupancy: vec![Vec::new(); hw.num_qubit_ids()],
            weights: vec![1.0; hw.num_qubit_ids()],
            chains: vec![Vec::new(); num_vars],
            counters: CaiCounters::default(),
            stage: Stage::Initial,
        }
    }

    pub fn occupancy(&self, q: Qubit) -> &[Var] {
        &self.occupancy[q]
    }

    pub fn chain(&self, v: Var) -> &[Qubit] {
        &self.chains[v]
    }

    pub fn counters(&self) -> &CaiCounters {
        &self.counters
    }

    pub fn max_occupancy(&self) -> usize {
        self.occupancy.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Cost of entering `q`.
    pub fn weight(&self, q: Qubit) -> f64 {
        self.weights[q]
    }

    pub fn add(&mut self, v: Var, q: Qubit) {
        if !self.occupancy[q].contains(&v) {
            self.occupancy[q].push(v);
            self.chains[v].push(q);
            self.reweigh(q);
        }
    }

    pub fn remove_chain(&mut self, v: Var) {
        for q in core::mem::take(&mut self.chains[v]) {
            self.occupancy[q].retain(|&u| u != v);
            self.reweigh(q);
        }
    }

    fn reweigh(&mut self, q: Qubit) {
        self.weights[q] = libm::pow(self.base, self.occupancy[q].len() as f64);
    }

    /// Vertex-weighted shortest paths from `sources` (distance 0) over the whole
    /// hardware graph.
    pub fn dijkstra_weighted(&mut self, sources: &[Qubit]) -> Distances {
        let n = self.hw.num_qubit_ids();
        let mut dist = vec![f64::INFINITY; n];
        let mut parent = vec![NO_PARENT; n];
        // non-negative floats order like their bit patterns
        let mut heap: BinaryHeap<Reverse<(u64, Qubit)>> = BinaryHeap::new();
        for &s in sources {
            dist[s] = 0.0;
            heap.push(Reverse((0f64.to_bits(), s)));
        }
        let mut relaxed = 0u64;
        while let Some(Reverse((d, x))) = heap.pop() {
            let d = f64::from_bits(d);
            if d > dist[x] {
                continue;
            }
            for &w in self.hw.neighbors(x) {
                relaxed += 1;
                let nd = d + self.weights[w];
                if nd < dist[w] {
                    dist[w] = nd;
                    parent[w] = x as u32;
                    heap.push(Reverse((nd.to_bits(), w)));
                }
            }
        }
        match self.stage {
            Stage::Initial => self.counters.n_dijkstra_initial += 1,
            Stage::Refine => self.counters.n_dijkstra_refine += 1,
        }
        self.counters.relaxed_edges += relaxed;
        Distances { dist, parent }
    }

    /// Give `v` a chain reaching every chain in `targets`. Returns `false` (and
    /// leaves `v` without a chain) when some target is unreachable.
    fn route(&mut self, v: Var, targets: &[Var], rng: &mut rng::Rng) -> bool {
        if targets.is_empty() {
            let least = self.hw.qubits().map(|q| self.occupancy[q].len()).min();
            let Some(least) = least else {
                return false;
            };
            let pool: Vec<Qubit> = self.hw.qubits().filter(|&q| self.occupancy[q].len() == least).collect();
            let q = *pool.choose(rng).expect("pool holds the minimum");
            self.add(v, q);
            return true;
        }
        let runs: Vec<Distances> = targets
            .iter()
            .map(|&u| {
                let sources = self.chains[u].clone();
                self.dijkstra_weighted(&sources)
            })
            .collect();
        // every path pays for the root, which is occupied once; a root on a target
        // chain pays its own weight for that target
        let k = targets.len() as f64;
        let mut best: Option<(f64, Qubit)> = None;
        for q in self.hw.qubits() {
            let w = self.weight(q);
            let total: f64 = runs.iter().map(|r| if r.dist[q] == 0.0 { w } else { r.dist[q] }).sum();
            if !total.is_finite() {
                continue;
            }
            let cost = total - (k - 1.0) * w;
            if best.is_none_or(|(c, _)| cost < c) {
                best = Some((cost, q));
            }
        }
        let Some((_, root)) = best else {
            return false;
        };
        self.add(v, root);
        for run in &runs {
            let mut q = root;
            while run.dist[q] > 0.0 {
                self.add(v, q);
                q = run.parent[q] as Qubit;
            }
        }
        true
    }

    fn into_embedding(self) -> Embedding {
        Embedding::from_chains(self.chains.into_iter().enumerate())
    }
}

/// Embed every variable of `problem` into `hw`.
///
/// Variables without embedded neighbours start on a random least-occupied qubit.
/// Returns a result without an embedding when overlaps survive all refinement
/// passes or when a neighbour chain is unreachable.
pub fn embed_full(problem: &ProblemGraph, hw: &HardwareGraph, seed: u64, options: &CaiOptions) -> Result<CaiResult> {
    if !(options.weight_base > 1.0) {
        return Err(invalid!("weight base must exceed 1, got {}", options.weight_base));
    }
    let n = problem.num_vars();
    let mut rng = rng::from_seed(seed);
    let mut order: Vec<Var> = (0..n).collect();
    order.shuffle(&mut rng);

    let mut state = MultiAssignState::new(hw, n, options.weight_base);
    let mut placed = vec![false; n];
    let fail = |state: MultiAssignState, rounds| {
        let max_occupancy = state.max_occupancy();
        Ok(CaiResult { embedding: None, rounds, max_occupancy, counters: state.counters })
    };
    for &v in &order {
        let targets: Vec<Var> = problem.neighbors(v).iter().map(|&(u, _)| u).filter(|&u| placed[u]).collect();
        if !state.route(v, &targets, &mut rng) {
            return fail(state, 0);
        }
        placed[v] = true;
    }

    state.stage = Stage::Refine;
    let mut rounds = 0;
    while state.max_occupancy() > 1 && rounds < options.max_refine_rounds {
        rounds += 1;
        for &v in &order {
            state.remove_chain(v);
            let targets: Vec<Var> = problem.neighbors(v).iter().map(|&(u, _)| u).collect();
            if !state.route(v, &targets, &mut rng) {
                return fail(state, rounds);
            }
        }
    }
    if state.max_occupancy() > 1 {
        return fail(state, rounds);
    }
    let counters = state.counters;
    Ok(CaiResult { embedding: Some(state.into_embedding()), rounds, max_occupancy: 1, counters })
}
