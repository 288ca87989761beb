//! Iterative subproblem optimisation.
//!
//! Each iteration picks a start variable, extracts and embeds a subproblem around
//! it, freezes every other variable, optimises the subproblem with a classical
//! backend, keeps the result only if the energy did not rise, and finishes with a
//! greedy single-flip descent on the full problem.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::chimera::HardwareGraph;
use crate::clique;
use crate::embedding::{build_embedded_problem, decode, ChainStrength, EmbeddedProblem, Embedding, FieldPolicy, TieBreak};
use crate::error::{invalid, Error, Result};
use crate::problem::{energy_unchecked, Assignment, ProblemGraph};
use crate::subproblem::{embed_subproblem, EmbedOptions};
use crate::{rng, Qubit, Var};

/// Largest problem the exhaustive backend accepts.
pub const EXACT_LIMIT: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmbedderKind {
    /// The greedy subproblem embedder.
    #[default]
    Proposed,
    /// A breadth-first block of variables on the clique layout.
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BackendKind {
    /// Exhaustive enumeration, up to [`EXACT_LIMIT`] variables.
    Exact,
    /// Simulated annealing on the hardware-level problem, decoded by majority vote.
    #[default]
    SaEmbedded,
    /// Simulated annealing on the logical subproblem.
    SaLogical,
}

/// Inverse-temperature ramp for simulated annealing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaSchedule {
    pub sweeps: usize,
    pub beta_initial: f64,
    pub beta_final: f64,
    /// Geometric interpolation between the end points; linear otherwise.
    pub geometric: bool,
}

impl Default for SaSchedule {
    fn default() -> Self {
        Self { sweeps: 1000, beta_initial: 0.1, beta_final: 10.0, geometric: true }
    }
}

impl SaSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = |b: f64| b.is_finite() && b > 0.0;
        if !ok(self.beta_initial) || !ok(self.beta_final) || self.beta_final < self.beta_initial {
            return Err(invalid!(
                "schedule needs 0 < beta_initial <= beta_final, got {} and {}",
                self.beta_initial,
                self.beta_final
            ));
        }
        Ok(())
    }

    /// Inverse temperature of sweep `k`.
    pub fn beta(&self, k: usize) -> f64 {
        if self.sweeps <= 1 {
            return self.beta_final;
        }
        let t = k as f64 / (self.sweeps - 1) as f64;
        if self.geometric {
            self.beta_initial * libm::pow(self.beta_final / self.beta_initial, t)
        } else {
            self.beta_initial + (self.beta_final - self.beta_initial) * t
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub embedder: EmbedderKind,
    pub backend: BackendKind,
    pub iterations: usize,
    /// Defaults to `Relative(2.0)`: the bound policies freeze chains under
    /// single-flip annealing.
    pub chain_strength: ChainStrength,
    pub field_policy: FieldPolicy,
    pub sa_schedule: SaSchedule,
    pub seed: u64,
    /// Limits for the proposed embedder. `max_vars` is further capped at
    /// [`EXACT_LIMIT`] with the exact backend.
    pub embed_options: EmbedOptions,
    /// Block size for the complete embedder; `None` uses the clique capacity.
    pub complete_capacity: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            embedder: EmbedderKind::default(),
            backend: BackendKind::default(),
            iterations: 100,
            chain_strength: ChainStrength::Relative(2.0),
            field_policy: FieldPolicy::default(),
            sa_schedule: SaSchedule::default(),
            seed: 0,
            embed_options: EmbedOptions::default(),
            complete_capacity: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(invalid!("iterations must be at least 1"));
        }
        self.sa_schedule.validate()?;
        if let ChainStrength::Fixed(c) | ChainStrength::Relative(c) = self.chain_strength {
            if !(c.is_finite() && c > 0.0) {
                return Err(invalid!("chain strength must be positive, got {c}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Zero-based.
    pub iteration: usize,
    pub start_var: Var,
    /// Zero when extraction or embedding failed.
    pub n_sub: usize,
    /// Subproblem energy of the incumbent; `None` when no subproblem was solved.
    pub e_sub_before: Option<f64>,
    /// Subproblem energy of the backend result, accepted or not.
    pub e_sub_after: Option<f64>,
    /// Whether the backend result replaced the incumbent.
    pub accepted: bool,
    /// Full energy after greedy refinement.
    pub e_full: f64,
    pub e_best: f64,
    /// Broken chains in the hardware sample (embedded annealing only).
    pub chain_breaks: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    pub records: Vec<IterationRecord>,
    pub best: Assignment,
    pub best_energy: f64,
}

/// A subproblem handed to a backend.
#[derive(Debug)]
pub struct SubproblemView<'a> {
    /// Clamped subproblem; variable `i` is `variables[i]` of the full problem.
    pub sub: &'a ProblemGraph,
    pub variables: &'a [Var],
    /// Embedding of the subproblem's variables `0..n_sub`.
    pub embedding: &'a Embedding,
    pub hw: &'a HardwareGraph,
    /// Incumbent restricted to the subproblem.
    pub current: &'a Assignment,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendOutput {
    pub assignment: Assignment,
    pub chain_breaks: Option<usize>,
}

/// A subproblem with the exterior frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct ClampedProblem {
    /// Induced problem; variable `i` is `variables[i]`.
    pub problem: ProblemGraph,
    pub variables: Vec<Var>,
    /// Energy of the couplings and fields not touching the subset.
    ///
    /// For any sub-assignment `y`, the full energy with the subset set to `y` is
    /// `energy(problem, y) + exterior_energy`.
    pub exterior_energy: f64,
}

/// Fold the frozen exterior of `subset` into local fields:
/// `h_i <- h_i + sum_{j outside} J_ij x_j`.
pub fn clamp_fields(problem: &ProblemGraph, subset: &[Var], x: &Assignment) -> Result<ClampedProblem> {
    if x.len() != problem.num_vars() {
        return Err(invalid!("assignment has {} spins, problem has {}", x.len(), problem.num_vars()));
    }
    let induced = problem.induced(subset)?;
    let mut inside = vec![false; problem.num_vars()];
    for &v in subset {
        inside[v] = true;
    }
    let fields: Vec<f64> = subset
        .iter()
        .map(|&v| {
            let outside: f64 = problem
                .neighbors(v)
                .iter()
                .filter(|&&(w, _)| !inside[w])
                .map(|&(w, j)| j * f64::from(x.get(w)))
                .sum();
            problem.field(v) + outside
        })
        .collect();
    let mut exterior_energy = 0.0;
    for (&(a, b), &j) in problem.couplings() {
        if !inside[a] && !inside[b] {
            exterior_energy += j * f64::from(x.get(a) * x.get(b));
        }
    }
    for v in (0..problem.num_vars()).filter(|&v| !inside[v]) {
        exterior_energy += problem.field(v) * f64::from(x.get(v));
    }
    let couplings = induced.couplings().iter().map(|(&k, &j)| (k, j));
    let clamped = ProblemGraph::new(subset.len(), couplings, fields)?;
    Ok(ClampedProblem { problem: clamped, variables: subset.to_vec(), exterior_energy })
}

/// Single-flip descent: sweep the variables in fresh random orders, flipping any
/// variable whose flip strictly lowers the energy, until a whole sweep flips
/// nothing.
pub fn greedy_refine(problem: &ProblemGraph, x: &Assignment, seed: u64) -> Result<Assignment> {
    if x.len() != problem.num_vars() {
        return Err(invalid!("assignment has {} spins, problem has {}", x.len(), problem.num_vars()));
    }
    let mut rng = rng::from_seed(seed);
    let mut x = x.clone();
    let mut order: Vec<Var> = (0..problem.num_vars()).collect();
    loop {
        order.shuffle(&mut rng);
        let mut flipped = false;
        for &v in &order {
            if problem.flip_delta(v, &x) < 0.0 {
                x.flip(v);
                flipped = true;
            }
        }
        if !flipped {
            return Ok(x);
        }
    }
}

/// Dense Ising model used by the enumerating and annealing backends.
struct Dense {
    fields: Vec<f64>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl Dense {
    fn from_problem(p: &ProblemGraph) -> Self {
        Self { fields: p.fields().to_vec(), adjacency: (0..p.num_vars()).map(|v| p.neighbors(v).to_vec()).collect() }
    }

    fn from_embedded(ep: &EmbeddedProblem) -> (Self, Vec<Qubit>) {
        let qubits: Vec<Qubit> = ep.qubits().collect();
        let index: BTreeMap<Qubit, usize> = qubits.iter().enumerate().map(|(i, &q)| (q, i)).collect();
        let fields = qubits.iter().map(|q| ep.fields()[q]).collect();
        let mut adjacency = vec![Vec::new(); qubits.len()];
        for (&(a, b), &j) in ep.couplings() {
            let (a, b) = (index[&a], index[&b]);
            adjacency[a].push((b, j));
            adjacency[b].push((a, j));
        }
        (Self { fields, adjacency }, qubits)
    }

    fn len(&self) -> usize {
        self.fields.len()
    }

    fn energy(&self, s: &[i8]) -> f64 {
        let mut e = 0.0;
        for (i, nbrs) in self.adjacency.iter().enumerate() {
            e += self.fields[i] * f64::from(s[i]);
            for &(k, j) in nbrs {
                if i < k {
                    e += j * f64::from(s[i] * s[k]);
                }
            }
        }
        e
    }

    fn local_fields(&self, s: &[i8]) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.fields[i] + self.adjacency[i].iter().map(|&(k, j)| j * f64::from(s[k])).sum::<f64>())
            .collect()
    }

    fn flip(&self, s: &mut [i8], local: &mut [f64], i: usize) {
        s[i] = -s[i];
        let change = 2.0 * f64::from(s[i]);
        for &(k, j) in &self.adjacency[i] {
            local[k] += j * change;
        }
    }

    /// Metropolis sweeps in index order from a random state; returns the lowest
    /// state seen at sweep boundaries and its energy.
    fn anneal(&self, schedule: &SaSchedule, seed: u64) -> (Vec<i8>, f64) {
        let mut rng = rng::from_seed(seed);
        let mut s: Vec<i8> = (0..self.len()).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
        let mut local = self.local_fields(&s);
        let mut e = self.energy(&s);
        let mut best = (s.clone(), e);
        for k in 0..schedule.sweeps {
            let beta = schedule.beta(k);
            for i in 0..self.len() {
                let delta = -2.0 * f64::from(s[i]) * local[i];
                if delta <= 0.0 || rng.gen::<f64>() < libm::exp(-beta * delta) {
                    self.flip(&mut s, &mut local, i);
                    e += delta;
                }
            }
            if e < best.1 {
                best = (s.clone(), e);
            }
        }
        // incremental sums drift; report the exact energy of the kept state
        let exact = self.energy(&best.0);
        (best.0, exact)
    }
}

/// Global minimiser of `sub` by Gray-code enumeration. Among minimisers the one
/// with the smallest index `sum_i [x_i = +1] 2^i` is returned.
pub fn exact_backend(sub: &ProblemGraph) -> Result<Assignment> {
    let n = sub.num_vars();
    if n > EXACT_LIMIT {
        return Err(Error::CapacityExceeded { requested: n, capacity: EXACT_LIMIT });
    }
    let dense = Dense::from_problem(sub);
    let mut s = vec![-1i8; n];
    let mut local = dense.local_fields(&s);
    let mut e = dense.energy(&s);
    let mut code = 0u32;
    let mut best = (e, code);
    for step in 1..1u32 << n {
        let i = step.trailing_zeros() as usize;
        e += -2.0 * f64::from(s[i]) * local[i];
        dense.flip(&mut s, &mut local, i);
        code ^= 1 << i;
        if e < best.0 || (e == best.0 && code < best.1) {
            best = (e, code);
        }
    }
    Assignment::new((0..n).map(|i| if best.1 >> i & 1 == 1 { 1 } else { -1 }).collect())
}

/// Simulated annealing on a hardware-level problem. Returns a spin for every
/// chain qubit.
pub fn sa_backend(embedded: &EmbeddedProblem, schedule: &SaSchedule, seed: u64) -> Result<BTreeMap<Qubit, i8>> {
    schedule.validate()?;
    let (dense, qubits) = Dense::from_embedded(embedded);
    let (s, _) = dense.anneal(schedule, seed);
    Ok(qubits.into_iter().zip(s).collect())
}

/// Simulated annealing directly on a logical problem.
pub fn sa_logical(sub: &ProblemGraph, schedule: &SaSchedule, seed: u64) -> Result<Assignment> {
    schedule.validate()?;
    let (s, _) = Dense::from_problem(sub).anneal(schedule, seed);
    Assignment::new(s)
}

/// The built-in backend selected by `cfg`.
pub fn run_backend(cfg: &SolverConfig, view: &SubproblemView) -> Result<BackendOutput> {
    match cfg.backend {
        BackendKind::Exact => Ok(BackendOutput { assignment: exact_backend(view.sub)?, chain_breaks: None }),
        BackendKind::SaLogical => {
            Ok(BackendOutput { assignment: sa_logical(view.sub, &cfg.sa_schedule, view.seed)?, chain_breaks: None })
        }
        BackendKind::SaEmbedded => {
            let strength = cfg.chain_strength.resolve(view.sub);
            let ep = build_embedded_problem(view.sub, view.embedding, view.hw, strength, cfg.field_policy)?;
            let sample = sa_backend(&ep, &cfg.sa_schedule, rng::derive(view.seed, 0))?;
            let decoded = decode(&sample, view.embedding, TieBreak::Seeded(rng::derive(view.seed, 1)))?;
            let assignment = Assignment::new(decoded.spins.values().copied().collect())?;
            Ok(BackendOutput { assignment, chain_breaks: Some(decoded.chain_breaks) })
        }
    }
}

/// Breadth-first order of the variables from `start`, neighbours visited in a
/// seeded random order; unreached variables follow in `fallback` order.
pub fn bfs_order(problem: &ProblemGraph, start: Var, seed: u64, fallback: &[Var]) -> Vec<Var> {
    let n = problem.num_vars();
    let mut rng = rng::from_seed(seed);
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    for root in core::iter::once(start).chain(fallback.iter().copied()) {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<Var> = problem.neighbors(v).iter().map(|&(w, _)| w).filter(|&w| !seen[w]).collect();
            nbrs.shuffle(&mut rng);
            for w in nbrs {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    order
}

/// Variables and embedding (relabelled to `0..k`) of one iteration's subproblem.
fn extract(
    problem: &ProblemGraph,
    hw: &HardwareGraph,
    cfg: &SolverConfig,
    start: Var,
    seed: u64,
    fallback: &[Var],
) -> Result<(Vec<Var>, Embedding)> {
    let exact_cap = if cfg.backend == BackendKind::Exact { EXACT_LIMIT } else { usize::MAX };
    match cfg.embedder {
        EmbedderKind::Proposed => {
            let mut opts = cfg.embed_options.clone();
            opts.max_vars = Some(opts.max_vars.unwrap_or(usize::MAX).min(exact_cap));
            let res = embed_subproblem(problem, hw, start, seed, &opts)?;
            let index: BTreeMap<Var, usize> = res.variables.iter().enumerate().map(|(i, &v)| (v, i)).collect();
            let emb = res.embedding.relabel(|v| index[&v]);
            Ok((res.variables, emb))
        }
        EmbedderKind::Complete => {
            let cap = cfg.complete_capacity.unwrap_or_else(|| clique::capacity(hw)).min(exact_cap);
            let mut vars = bfs_order(problem, start, seed, fallback);
            vars.truncate(cap);
            let emb = clique::embed_complete(vars.len(), hw)?;
            Ok((vars, emb))
        }
    }
}

/// Run the loop with the built-in backend selected by `cfg.backend`.
pub fn solve_iterative(problem: &ProblemGraph, hw: &HardwareGraph, cfg: &SolverConfig, x0: &Assignment) -> Result<SolveTrace> {
    solve_iterative_with(problem, hw, cfg, x0, |view| run_backend(cfg, view))
}

/// Run the loop with a caller-supplied backend.
///
/// Iteration `t` starts from the `t`-th variable (cyclically) of a seeded random
/// permutation. A failed extraction or backend call leaves the incumbent as it is;
/// the greedy step still runs.
pub fn solve_iterative_with(
    problem: &ProblemGraph,
    hw: &HardwareGraph,
    cfg: &SolverConfig,
    x0: &Assignment,
    mut backend: impl FnMut(&SubproblemView) -> Result<BackendOutput>,
) -> Result<SolveTrace> {
    cfg.validate()?;
    let n = problem.num_vars();
    if x0.len() != n {
        return Err(invalid!("initial assignment has {} spins, problem has {n}", x0.len()));
    }
    if n == 0 {
        return Err(invalid!("problem has no variables"));
    }
    let mut starts: Vec<Var> = (0..n).collect();
    starts.shuffle(&mut rng::stream(cfg.seed, 1));

    let mut x = x0.clone();
    let mut best = x.clone();
    let mut best_energy = energy_unchecked(problem, x.values());
    let mut records = Vec::with_capacity(cfg.iterations);
    for t in 0..cfg.iterations {
        let seed_t = rng::derive(cfg.seed, t as u64);
        let start = starts[t % n];
        let mut record = IterationRecord {
            iteration: t,
            start_var: start,
            n_sub: 0,
            e_sub_before: None,
            e_sub_after: None,
            accepted: false,
            e_full: 0.0,
            e_best: 0.0,
            chain_breaks: None,
        };
        if let Ok((vars, emb)) = extract(problem, hw, cfg, start, rng::derive(seed_t, 0), &starts) {
            let clamped = clamp_fields(problem, &vars, &x)?;
            let current = Assignment::new(vars.iter().map(|&v| x.get(v)).collect())?;
            let view = SubproblemView {
                sub: &clamped.problem,
                variables: &vars,
                embedding: &emb,
                hw,
                current: &current,
                seed: rng::derive(seed_t, 1),
            };
            record.n_sub = vars.len();
            let before = energy_unchecked(&clamped.problem, current.values());
            record.e_sub_before = Some(before);
            if let Ok(out) = backend(&view) {
                if out.assignment.len() == vars.len() {
                    let after = energy_unchecked(&clamped.problem, out.assignment.values());
                    record.e_sub_after = Some(after);
                    record.chain_breaks = out.chain_breaks;
                    if after <= before {
                        for (&v, &s) in vars.iter().zip(out.assignment.values()) {
                            x.set(v, s);
                        }
                        record.accepted = true;
                    }
                }
            }
        }
        x = greedy_refine(problem, &x, rng::derive(seed_t, 2))?;
        let e = energy_unchecked(problem, x.values());
        if e < best_energy {
            best_energy = e;
            best = x.clone();
        }
        record.e_full = e;
        record.e_best = best_energy;
        records.push(record);
    }
    Ok(SolveTrace { records, best, best_energy })
}
