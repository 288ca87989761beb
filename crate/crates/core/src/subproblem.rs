//! Greedy subproblem embedder.
//!
//! Instead of embedding every variable of the problem, the embedder grows a
//! subproblem from a start variable and only keeps variables that can be embedded
//! without ever placing two variables on one qubit:
//!
//! 1. The frontier holds unresolved variables adjacent to the embedded ones; the
//!    variable with the most embedded neighbours is tried next (lowest index on ties).
//! 2. A root qubit is chosen among free qubits of the active cells (cells holding used
//!    qubits) and the eight cells around each, minimising the summed breadth-first
//!    distance to the chains of the embedded neighbours. The very first root is the
//!    lowest free qubit.
//! 3. The root reserves lane qubits in the adjacent cells: vertically for a left-shore
//!    root, horizontally for a right-shore root. Other variables may not use them.
//!    Whenever a chain grows along a lane into the next cell, the qubit after it on
//!    the same line is reserved too.
//! 4. For every embedded neighbour, in embedding order, a shortest path over free
//!    qubits is grown from the chain of the new variable. A path may end in the
//!    neighbour's own lane, which then joins the neighbour's chain. If any neighbour
//!    is unreachable the attempt is rolled back and the variable is dropped for the
//!    rest of the run.
//! 5. Reservations of a variable are released once all its neighbours are resolved.
//!
//! Searches never leave the active cells and their surrounding cells.

use alloc::collections::{BTreeMap, BinaryHeap, VecDeque};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

use rand::seq::SliceRandom;

use crate::chimera::{HardwareGraph, Shore};
use crate::embedding::Embedding;
use crate::error::{invalid, Result};
use crate::problem::ProblemGraph;
use crate::{rng, Qubit, Var};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbedOptions {
    /// Stop once this many variables are embedded.
    pub max_vars: Option<usize>,
    /// Stop before the next attempt once this many searches were run.
    pub max_searches: Option<u64>,
    /// Cells reserved on each side of a root along its lane.
    pub lane_depth: usize,
    /// Break frontier ties with a seeded random rank instead of the lowest index.
    pub randomize_ties: bool,
    /// Compare every search against the edge count of the searchable region
    /// (slow; for tests).
    pub audit: bool,
}

impl Default for EmbedOptions {
    fn default() -> Self {
        Self { max_vars: None, max_searches: None, lane_depth: 1, randomize_ties: false, audit: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EmbedCounters {
    /// Breadth-first searches run (root selection and chain connection).
    pub n_breadth: u64,
    /// Edges relaxed over all searches.
    pub searched_edges_total: u64,
    /// Largest number of edges relaxed by a single search.
    pub e_q_max: u64,
    /// Searches that relaxed more edges than the active-plus-adjacent region holds.
    /// Only counted with [`EmbedOptions::audit`].
    pub region_bound_violations: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemResult {
    pub embedding: Embedding,
    /// Embedded variables, ascending.
    pub variables: Vec<Var>,
    pub n_sub: usize,
    /// Variables whose attempt failed, ascending.
    pub failed: Vec<Var>,
    pub counters: EmbedCounters,
}

impl SubproblemResult {
    /// Embedded and failed variables, ascending.
    pub fn attempted(&self) -> Vec<Var> {
        let mut all: Vec<Var> = self.variables.iter().chain(&self.failed).copied().collect();
        all.sort_unstable();
        all
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Pending,
    Embedded,
    Failed,
}

const UNSET: u32 = u32::MAX;

/// Changes made by one connection attempt, for rollback.
#[derive(Default)]
struct Journal {
    /// Qubits assigned during the attempt, in order.
    assigned: Vec<Qubit>,
    /// Reserved qubits that were assigned, with their previous owner.
    taken: Vec<(Qubit, Var)>,
    /// Reservations created by lane continuation.
    added: Vec<Qubit>,
}

/// Mutable state of one embedding run.
///
/// `used` and `reserved` map qubits to variables; a qubit is never both. Exposed so
/// the individual steps can be driven and inspected directly.
#[derive(Debug, Clone)]
pub struct EmbedState<'a> {
    problem: &'a ProblemGraph,
    hw: &'a HardwareGraph,
    lane_depth: usize,
    audit: bool,
    used: Vec<Option<Var>>,
    reserved: Vec<Option<Var>>,
    reservations: BTreeMap<Var, Vec<Qubit>>,
    chains: BTreeMap<Var, Vec<Qubit>>,
    status: Vec<Status>,
    unresolved_neighbors: Vec<usize>,
    cell_used: Vec<u32>,
    near_active: Vec<u32>,
    embed_rank: Vec<usize>,
    num_embedded: usize,
    counters: EmbedCounters,
    // search scratch, invalidated by bumping `epoch`
    epoch: u32,
    seen: Vec<u32>,
    closed: Vec<u32>,
    dist: Vec<u32>,
    parent: Vec<u32>,
    queue: VecDeque<Qubit>,
}

impl<'a> EmbedState<'a> {
    pub fn new(problem: &'a ProblemGraph, hw: &'a HardwareGraph, options: &EmbedOptions) -> Self {
        let nq = hw.num_qubit_ids();
        Self {
            problem,
            hw,
            lane_depth: options.lane_depth,
            audit: options.audit,
            used: vec![None; nq],
            reserved: vec![None; nq],
            reservations: BTreeMap::new(),
            chains: BTreeMap::new(),
            status: vec![Status::Pending; problem.num_vars()],
            unresolved_neighbors: (0..problem.num_vars()).map(|v| problem.degree(v)).collect(),
            cell_used: vec![0; hw.spec().num_cells()],
            near_active: vec![0; hw.spec().num_cells()],
            embed_rank: vec![usize::MAX; problem.num_vars()],
            num_embedded: 0,
            counters: EmbedCounters::default(),
            epoch: 0,
            seen: vec![0; nq],
            closed: vec![0; nq],
            dist: vec![0; nq],
            parent: vec![UNSET; nq],
            queue: VecDeque::new(),
        }
    }

    pub fn used_by(&self, q: Qubit) -> Option<Var> {
        self.used[q]
    }

    pub fn reserved_by(&self, q: Qubit) -> Option<Var> {
        self.reserved[q]
    }

    pub fn reservations(&self, v: Var) -> &[Qubit] {
        self.reservations.get(&v).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Number of qubits currently reserved.
    pub fn num_reserved(&self) -> usize {
        self.reservations.values().map(Vec::len).sum()
    }

    pub fn chain(&self, v: Var) -> Option<&[Qubit]> {
        self.chains.get(&v).map(Vec::as_slice)
    }

    pub fn is_embedded(&self, v: Var) -> bool {
        self.status[v] == Status::Embedded
    }

    pub fn counters(&self) -> &EmbedCounters {
        &self.counters
    }

    /// Snapshot of the qubit-to-variable map.
    pub fn used_map(&self) -> &[Option<Var>] {
        &self.used
    }

    fn any_active(&self) -> bool {
        self.cell_used.iter().any(|&c| c > 0)
    }

    /// Whether `q` lies in an active cell or a cell touching one (diagonally
    /// included).
    pub fn in_region(&self, q: Qubit) -> bool {
        self.near_active[self.hw.spec().cell_of(q)] > 0
    }

    fn bump_cell(&mut self, cell: usize, up: bool) {
        let before = self.cell_used[cell];
        if up {
            self.cell_used[cell] += 1;
        } else {
            self.cell_used[cell] -= 1;
        }
        if (before == 0) != (self.cell_used[cell] == 0) {
            let hw = self.hw;
            for c in hw.surrounding_cells(cell) {
                if up {
                    self.near_active[c] += 1;
                } else {
                    self.near_active[c] -= 1;
                }
            }
        }
    }

    fn free(&self, q: Qubit) -> bool {
        self.hw.is_present(q) && self.used[q].is_none() && self.reserved[q].is_none()
    }

    /// Free for `var`: unused and either unreserved or reserved by `var` itself.
    fn free_for(&self, q: Qubit, var: Var) -> bool {
        self.hw.is_present(q) && self.used[q].is_none() && self.reserved[q].is_none_or(|r| r == var)
    }

    fn assign(&mut self, q: Qubit, var: Var) {
        debug_assert!(self.used[q].is_none());
        if let Some(owner) = self.reserved[q].take() {
            if let Some(list) = self.reservations.get_mut(&owner) {
                list.retain(|&r| r != q);
            }
        }
        self.used[q] = Some(var);
        self.chains.entry(var).or_default().push(q);
        self.bump_cell(self.hw.spec().cell_of(q), true);
    }

    fn unassign(&mut self, q: Qubit) {
        if let Some(var) = self.used[q].take() {
            if let Some(chain) = self.chains.get_mut(&var) {
                chain.retain(|&c| c != q);
                if chain.is_empty() {
                    self.chains.remove(&var);
                }
            }
            self.bump_cell(self.hw.spec().cell_of(q), false);
        }
    }

    fn next_epoch(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.seen.iter_mut().for_each(|s| *s = 0);
            self.closed.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
    }

    fn region_edge_count(&self) -> u64 {
        let hw = self.hw;
        hw.edges().filter(|&(a, b)| self.in_region(a) && self.in_region(b)).count() as u64
    }

    fn record_search(&mut self, edges: u64, region_edges: Option<u64>) {
        self.counters.n_breadth += 1;
        self.counters.searched_edges_total += edges;
        self.counters.e_q_max = self.counters.e_q_max.max(edges);
        if region_edges.is_some_and(|bound| edges > bound) {
            self.counters.region_bound_violations += 1;
        }
    }

    /// Breadth-first search from `sources` over region qubits accepted by `passable`.
    /// Stops at the first discovered qubit satisfying `goal` (goals are not expanded)
    /// and returns it. Distances and parents stay valid for qubits marked in `seen`.
    fn search(
        &mut self,
        sources: &[Qubit],
        passable: impl Fn(&Self, Qubit) -> bool,
        goal: impl Fn(&Self, Qubit) -> bool,
    ) -> Option<Qubit> {
        let region_edges = self.audit.then(|| self.region_edge_count());
        self.next_epoch();
        let epoch = self.epoch;
        self.queue.clear();
        for &s in sources {
            self.seen[s] = epoch;
            self.dist[s] = 0;
            self.parent[s] = UNSET;
            self.queue.push_back(s);
        }
        let hw = self.hw;
        let mut edges = 0u64;
        let mut found = None;
        'outer: while let Some(x) = self.queue.pop_front() {
            self.closed[x] = epoch;
            for &w in hw.neighbors(x) {
                if self.closed[w] == epoch {
                    continue;
                }
                if self.seen[w] == epoch {
                    edges += 1;
                    continue;
                }
                if !(passable(self, w) && self.in_region(w)) {
                    continue;
                }
                edges += 1;
                self.seen[w] = epoch;
                self.dist[w] = self.dist[x] + 1;
                self.parent[w] = x as u32;
                if goal(self, w) {
                    found = Some(w);
                    break 'outer;
                }
                self.queue.push_back(w);
            }
        }
        self.record_search(edges, region_edges);
        found
    }

    /// Qubits reserved by `owner` that connect to its chain through other such
    /// qubits, with the neighbour they hang from.
    fn lane_extension(&self, owner: Var) -> BTreeMap<Qubit, Qubit> {
        let mut ext = BTreeMap::new();
        let Some(chain) = self.chains.get(&owner) else {
            return ext;
        };
        let mut stack: Vec<Qubit> = chain.clone();
        while let Some(q) = stack.pop() {
            for &w in self.hw.neighbors(q) {
                if self.reserved[w] == Some(owner) && !ext.contains_key(&w) {
                    ext.insert(w, q);
                    stack.push(w);
                }
            }
        }
        ext
    }

    /// Pick a root for `var` given the embedded neighbours whose chains it must reach.
    ///
    /// Candidates are free, unreserved qubits in the active cells and their
    /// neighbours; the one with the smallest summed distance to the neighbour chains
    /// wins, ties going to the lowest id. A neighbour's own reserved lane counts as
    /// reachable through that neighbour. Without neighbours every candidate ties,
    /// and with nothing embedded yet the whole graph is a candidate, so the first
    /// root is the lowest free qubit.
    pub fn select_root(&mut self, _var: Var, neighbors: &[Var]) -> Option<Qubit> {
        if neighbors.is_empty() {
            let anywhere = !self.any_active();
            return self.hw.qubits().find(|&q| self.free(q) && (anywhere || self.in_region(q)));
        }
        let mut candidates: Vec<(Qubit, u64)> = Vec::new();
        for (i, &u) in neighbors.iter().enumerate() {
            let chain = self.chains.get(&u).cloned().unwrap_or_default();
            self.search(&chain, |s, q| s.free(q) || s.lane_of(q, u), |_, _| false);
            let epoch = self.epoch;
            if i == 0 {
                candidates = (0..self.seen.len())
                    .filter(|&q| self.seen[q] == epoch && self.free(q))
                    .map(|q| (q, u64::from(self.dist[q])))
                    .collect();
            } else {
                candidates.retain_mut(|(q, sum)| {
                    if self.seen[*q] == epoch {
                        *sum += u64::from(self.dist[*q]);
                        true
                    } else {
                        false
                    }
                });
            }
            if candidates.is_empty() {
                return None;
            }
        }
        candidates.into_iter().min_by_key(|&(q, sum)| (sum, q)).map(|(q, _)| q)
    }

    fn lane_of(&self, q: Qubit, owner: Var) -> bool {
        self.used[q].is_none() && self.reserved[q] == Some(owner)
    }

    /// Reserve the lane qubits of `root` for `var`: the same shore position in the
    /// cells above and below for a left-shore root, left and right for a right-shore
    /// root. Absent, used and already reserved qubits are skipped.
    pub fn reserve(&mut self, root: Qubit, var: Var) -> Result<()> {
        if !self.free(root) {
            return Err(invalid!("root {root} is not free"));
        }
        let spec = *self.hw.spec();
        let (r, c, shore, k) = spec.coords(root);
        let mut lane = Vec::new();
        for d in 1..=self.lane_depth {
            let cells: [Option<(usize, usize)>; 2] = match shore {
                Shore::Left => [r.checked_sub(d).map(|r| (r, c)), (r + d < spec.rows).then(|| (r + d, c))],
                Shore::Right => [c.checked_sub(d).map(|c| (r, c)), (c + d < spec.cols).then(|| (r, c + d))],
            };
            lane.extend(cells.into_iter().flatten().map(|(rr, cc)| spec.qubit(rr, cc, shore, k)));
        }
        for q in lane {
            if self.free(q) {
                self.reserved[q] = Some(var);
                self.reservations.entry(var).or_default().push(q);
            }
        }
        Ok(())
    }

    fn drop_reservations(&mut self, var: Var) {
        for q in self.reservations.remove(&var).unwrap_or_default() {
            self.reserved[q] = None;
        }
    }

    /// Release the reservations of `var` if every neighbour of `var` is embedded or
    /// failed. Returns whether the reservations were released.
    pub fn release(&mut self, var: Var) -> bool {
        if self.unresolved_neighbors[var] > 0 {
            return false;
        }
        self.drop_reservations(var);
        true
    }

    /// Drop every reservation (end of run).
    pub fn release_all(&mut self) {
        let vars: Vec<Var> = self.reservations.keys().copied().collect();
        for v in vars {
            self.drop_reservations(v);
        }
    }

    /// Place `var` on `root` and connect it to every target chain along a shortest
    /// path of qubits free for `var` (unused, and unreserved or reserved by `var`).
    /// A path may end in the target's own reserved lane, which then extends the
    /// target chain. On failure every tentative assignment is undone, including
    /// lane qubits given to targets, and `false` is returned.
    pub fn bfs_connect(&mut self, var: Var, root: Qubit, targets: &[Var]) -> bool {
        if self.chains.contains_key(&var) || !self.free_for(root, var) {
            return false;
        }
        self.assign(root, var);
        let mut journal = Journal::default();
        for &target in targets {
            let touches =
                |state: &Self, q: Qubit| state.hw.neighbors(q).iter().any(|&w| state.used[w] == Some(target));
            let chain = self.chains[&var].clone();
            if chain.iter().any(|&q| touches(self, q)) {
                continue;
            }
            let lane = self.lane_extension(target);
            let direct = chain.iter().find_map(|&q| self.hw.neighbors(q).iter().copied().find(|w| lane.contains_key(w)));
            let (end, searched) = match direct {
                Some(w) => (Some(w), false),
                None => (
                    self.search(
                        &chain,
                        |s, q| s.free_for(q, var) || lane.contains_key(&q),
                        |s, q| lane.contains_key(&q) || touches(s, q),
                    ),
                    true,
                ),
            };
            let Some(end) = end else {
                self.rollback(var, journal);
                return false;
            };
            // the lane part of the path extends the target, the rest goes to `var`
            let mut q = end;
            if lane.contains_key(&end) {
                let mut l = end;
                while self.used[l].is_none() {
                    self.claim(l, lane[&l], target, &mut journal);
                    l = lane[&l];
                }
                if !searched {
                    continue;
                }
                q = self.parent[end] as Qubit;
            }
            while self.used[q] != Some(var) {
                let prev = self.parent[q] as Qubit;
                self.claim(q, prev, var, &mut journal);
                q = prev;
            }
        }
        true
    }

    /// Assign `q`, reached from `from`, to `owner`. A step between cells along a
    /// lane reserves the next qubit on that line for `owner`, so straight chain ends
    /// stay extendable.
    fn claim(&mut self, q: Qubit, from: Qubit, owner: Var, journal: &mut Journal) {
        if let Some(prev) = self.reserved[q] {
            journal.taken.push((q, prev));
        }
        self.assign(q, owner);
        journal.assigned.push(q);
        if let Some(next) = self.step_beyond(from, q) {
            if self.free(next) {
                self.reserved[next] = Some(owner);
                self.reservations.entry(owner).or_default().push(next);
                journal.added.push(next);
            }
        }
    }

    /// The qubit continuing the straight inter-cell line `from -> q`, if any.
    fn step_beyond(&self, from: Qubit, q: Qubit) -> Option<Qubit> {
        let spec = self.hw.spec();
        let (fr, fc, fs, fk) = spec.coords(from);
        let (r, c, s, k) = spec.coords(q);
        if fs != s || fk != k {
            return None;
        }
        let (nr, nc) = (r as isize + (r as isize - fr as isize), c as isize + (c as isize - fc as isize));
        if nr < 0 || nc < 0 || nr as usize >= spec.rows || nc as usize >= spec.cols {
            return None;
        }
        let next = spec.qubit(nr as usize, nc as usize, s, k);
        self.hw.has_edge(q, next).then_some(next)
    }

    fn rollback(&mut self, var: Var, journal: Journal) {
        for q in journal.added {
            if let Some(owner) = self.reserved[q].take() {
                if let Some(list) = self.reservations.get_mut(&owner) {
                    list.retain(|&r| r != q);
                }
            }
        }
        for &q in journal.assigned.iter().rev() {
            self.unassign(q);
        }
        for (q, owner) in journal.taken {
            self.reserved[q] = Some(owner);
            self.reservations.entry(owner).or_default().push(q);
        }
        for q in self.chains.remove(&var).unwrap_or_default() {
            self.used[q] = None;
            self.bump_cell(self.hw.spec().cell_of(q), false);
        }
    }

    fn resolve(&mut self, var: Var, status: Status) {
        self.status[var] = status;
        if status == Status::Embedded {
            self.embed_rank[var] = self.num_embedded;
            self.num_embedded += 1;
        }
        let problem = self.problem;
        for &(u, _) in problem.neighbors(var) {
            self.unresolved_neighbors[u] -= 1;
            if self.status[u] == Status::Embedded {
                self.release(u);
            }
        }
        if status == Status::Embedded {
            self.release(var);
        }
    }

    /// One full attempt for `var`: root selection, reservation and connection.
    /// Leaves the state untouched (except counters) when it fails.
    fn attempt(&mut self, var: Var) -> bool {
        let problem = self.problem;
        let mut targets: Vec<Var> = problem
            .neighbors(var)
            .iter()
            .map(|&(u, _)| u)
            .filter(|&u| self.status[u] == Status::Embedded)
            .collect();
        targets.sort_unstable_by_key(|&u| self.embed_rank[u]);
        let Some(root) = self.select_root(var, &targets) else {
            return false;
        };
        self.reserve(root, var).expect("selected roots are free");
        if self.bfs_connect(var, root, &targets) {
            true
        } else {
            self.drop_reservations(var);
            false
        }
    }

    fn into_embedding(self) -> Embedding {
        Embedding::from_chains(self.chains)
    }
}

/// Grow an embedded subproblem around `start_var`.
///
/// `seed` only matters with [`EmbedOptions::randomize_ties`]; the default rule is
/// fully deterministic.
pub fn embed_subproblem(
    problem: &ProblemGraph,
    hw: &HardwareGraph,
    start_var: Var,
    seed: u64,
    options: &EmbedOptions,
) -> Result<SubproblemResult> {
    if start_var >= problem.num_vars() {
        return Err(invalid!("start variable {start_var} out of range for {} variables", problem.num_vars()));
    }
    if hw.num_qubits() == 0 {
        return Err(invalid!("hardware graph has no qubits"));
    }
    let n = problem.num_vars();
    let rank: Vec<u32> = if options.randomize_ties {
        let mut r: Vec<u32> = (0..n as u32).collect();
        r.shuffle(&mut rng::from_seed(seed));
        r
    } else {
        (0..n as u32).collect()
    };

    let mut state = EmbedState::new(problem, hw, options);
    let mut embedded_nbrs = vec![0usize; n];
    let mut frontier: BinaryHeap<(usize, Reverse<u32>, Var)> = BinaryHeap::new();
    let mut n_sub = 0usize;
    let mut failed = Vec::new();

    let mut next = Some(start_var);
    while let Some(var) = next.take() {
        let ok = state.attempt(var);
        state.resolve(var, if ok { Status::Embedded } else { Status::Failed });
        if ok {
            n_sub += 1;
            for &(u, _) in problem.neighbors(var) {
                if state.status[u] == Status::Pending {
                    embedded_nbrs[u] += 1;
                    frontier.push((embedded_nbrs[u], Reverse(rank[u]), u));
                }
            }
        } else {
            failed.push(var);
        }
        if options.max_vars.is_some_and(|m| n_sub >= m)
            || options.max_searches.is_some_and(|m| state.counters.n_breadth >= m)
        {
            break;
        }
        while let Some((count, _, u)) = frontier.pop() {
            if state.status[u] == Status::Pending && count == embedded_nbrs[u] {
                next = Some(u);
                break;
            }
        }
    }
    state.release_all();
    failed.sort_unstable();
    let counters = state.counters;
    let embedding = state.into_embedding();
    let variables: Vec<Var> = embedding.variables().collect();
    Ok(SubproblemResult { n_sub: variables.len(), embedding, variables, failed, counters })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chimera::ChimeraSpec;
    use crate::embedding::verify_embedding;
    use crate::problem::{complete, cubic_pm_j, erdos_renyi, grid2d, Boundary};
    use alloc::collections::BTreeSet;

    fn chimera(m: usize, n: usize, l: usize) -> HardwareGraph {
        HardwareGraph::chimera(ChimeraSpec::new(m, n, l).unwrap())
    }

    fn internal_edges(problem: &ProblemGraph, vars: &[Var]) -> u64 {
        let set: BTreeSet<Var> = vars.iter().copied().collect();
        problem.couplings().keys().filter(|(a, b)| set.contains(a) && set.contains(b)).count() as u64
    }

    fn check(problem: &ProblemGraph, hw: &HardwareGraph, res: &SubproblemResult) {
        assert_eq!(res.n_sub, res.embedding.len());
        let report = verify_embedding(problem, &res.variables, hw, &res.embedding);
        assert!(report.is_valid(), "{:?}", report.violations.first());
        assert!(res.counters.n_breadth <= 2 * internal_edges(problem, &res.attempted()));
    }

    #[test]
    fn isolated_variable() {
        let p = ProblemGraph::new(1, [], vec![0.0]).unwrap();
        let hw = chimera(3, 3, 4);
        let res = embed_subproblem(&p, &hw, 0, 0, &EmbedOptions::default()).unwrap();
        assert_eq!(res.n_sub, 1);
        assert_eq!(res.embedding.chain(0).unwrap().len(), 1);
        assert_eq!(res.counters.n_breadth, 0);
        assert!(embed_subproblem(&p, &hw, 1, 0, &EmbedOptions::default()).is_err());
    }

    #[test]
    fn first_root_is_lowest_free_qubit() {
        let p = grid2d(3, 3).unwrap();
        let hw = chimera(3, 3, 4);
        let mut state = EmbedState::new(&p, &hw, &EmbedOptions::default());
        assert_eq!(state.select_root(0, &[]), Some(0));
        let dq: BTreeSet<Qubit> = (0..10).collect();
        let holed = HardwareGraph::build(*hw.spec(), &dq, &BTreeSet::new()).unwrap();
        let mut state = EmbedState::new(&p, &holed, &EmbedOptions::default());
        assert_eq!(state.select_root(0, &[]), Some(10));
    }

    #[test]
    fn root_next_to_single_neighbor() {
        let p = grid2d(2, 1).unwrap();
        let hw = chimera(3, 3, 4);
        let mut state = EmbedState::new(&p, &hw, &EmbedOptions::default());
        let q = state.select_root(0, &[]).unwrap();
        assert!(state.bfs_connect(0, q, &[]));
        state.status[0] = Status::Embedded;
        let root = state.select_root(1, &[0]).unwrap();
        assert!(hw.has_edge(root, q));
        // targets adjacent to the root need no path
        assert!(state.bfs_connect(1, root, &[0]));
        assert_eq!(state.chain(1), Some(&[root][..]));
    }

    #[test]
    fn no_root_when_hardware_full() {
        let p = grid2d(3, 1).unwrap();
        let hw = chimera(1, 1, 1);
        let mut state = EmbedState::new(&p, &hw, &EmbedOptions::default());
        assert!(state.bfs_connect(0, 0, &[]));
        assert!(state.bfs_connect(1, 1, &[0]));
        state.status[0] = Status::Embedded;
        state.status[1] = Status::Embedded;
        assert_eq!(state.select_root(2, &[1]), None);
    }

    #[test]
    fn reservation_lanes() {
        let p = grid2d(2, 1).unwrap();
        let hw = chimera(3, 3, 4);
        let spec = *hw.spec();
        let mut state = EmbedState::new(&p, &hw, &EmbedOptions::default());
        let left = spec.qubit(1, 1, Shore::Left, 2);
        state.reserve(left, 0).unwrap();
        let mut got = state.reservations(0).to_vec();
        got.sort_unstable();
        assert_eq!(got, [spec.qubit(0, 1, Shore::Left, 2), spec.qubit(2, 1, Shore::Left, 2)]);

        let right = spec.qubit(1, 1, Shore::Right, 3);
        state.reserve(right, 1).unwrap();
        let mut got = state.reservations(1).to_vec();
        got.sort_unstable();
        assert_eq!(got, [spec.qubit(1, 0, Shore::Right, 3), spec.qubit(1, 2, Shore::Right, 3)]);
        assert!(state.reserve(spec.qubit(0, 1, Shore::Left, 2), 1).is_err());

        let row = chimera(1, 3, 4);
        let mut state = EmbedState::new(&p, &row, &EmbedOptions::default());
        state.reserve(0, 0).unwrap();
        assert!(state.reservations(0).is_empty());
        let two = chimera(2, 1, 4);
        let mut state = EmbedState::new(&p, &two, &EmbedOptions::default());
        state.reserve(0, 0).unwrap();
        assert_eq!(state.reservations(0), &[two.spec().qubit(1, 0, Shore::Left, 0)]);
    }

    #[test]
    fn release_waits_for_neighbors() {
        let p = grid2d(3, 1).unwrap();
        let hw = chimera(3, 3, 4);
        let mut state = EmbedState::new(&p, &hw, &EmbedOptions::default());
        assert!(state.attempt(1));
        state.resolve(1, Status::Embedded);
        assert!(!state.reservations(1).is_empty());
        assert!(state.attempt(0));
        state.resolve(0, Status::Embedded);
        assert!(!state.release(1));
        assert!(!state.reservations(1).is_empty());
        state.resolve(2, Status::Failed);
        assert!(state.reservations(1).is_empty());
    }

    #[test]
    fn path_through_reserved_lane() {
        // three cells stacked vertically; target two cells above a left-shore root
        let p = ProblemGraph::new(2, [((0, 1), -1.0)], vec![0.0; 2]).unwrap();
        let hw = chimera(3, 1, 4);
        let spec = *hw.spec();
        let mut state = EmbedState::new(&p, &hw, &EmbedOptions::default());
        let target = spec.qubit(0, 0, Shore::Left, 1);
        assert!(state.bfs_connect(0, target, &[]));
        state.status[0] = Status::Embedded;
        let root = spec.qubit(2, 0, Shore::Left, 1);
        state.reserve(root, 1).unwrap();
        let lane = spec.qubit(1, 0, Shore::Left, 1);
        assert_eq!(state.reserved_by(lane), Some(1));
        assert!(state.bfs_connect(1, root, &[0]));
        assert_eq!(state.chain(1).unwrap(), &[root, lane]);
        assert_eq!(state.counters().n_breadth, 1);
    }

    #[test]
    fn blocked_target_rolls_back() {
        // variable 0 sits on a corner left qubit of a (3,3,2) graph; variable 1 takes
        // every neighbour of it; variable 2 must reach 0 and cannot.
        let p = ProblemGraph::new(3, [((0, 1), -1.0), ((0, 2), -1.0)], vec![0.0; 3]).unwrap();
        let hw = chimera(3, 3, 2);
        let spec = *hw.spec();
        let mut state = EmbedState::new(&p, &hw, &EmbedOptions::default());
        let q0 = spec.qubit(0, 0, Shore::Left, 0);
        assert!(state.bfs_connect(0, q0, &[]));
        let wall: Vec<Qubit> = hw.neighbors(q0).to_vec();
        state.assign(wall[0], 1);
        for &w in &wall[1..] {
            state.assign(w, 1);
        }
        state.status[0] = Status::Embedded;
        state.status[1] = Status::Embedded;
        let before = state.used_map().to_vec();
        let far = spec.qubit(2, 2, Shore::Right, 1);
        assert!(!state.bfs_connect(2, far, &[0]));
        assert_eq!(state.used_map(), &before[..]);
        assert!(state.chain(2).is_none());
        assert_eq!(state.select_root(2, &[0]), None);
    }

    #[test]
    fn reservations_empty_after_run() {
        let p = cubic_pm_j([4, 4, 4], 0.5, 1.0, Boundary::Periodic, 3).unwrap();
        let hw = chimera(4, 4, 4);
        let res = embed_subproblem(&p, &hw, 0, 0, &EmbedOptions::default()).unwrap();
        check(&p, &hw, &res);
        let mut state = EmbedState::new(&p, &hw, &EmbedOptions::default());
        state.attempt(0);
        state.release_all();
        assert_eq!(state.num_reserved(), 0);
    }

    #[test]
    fn limits_are_honoured() {
        let p = grid2d(30, 30).unwrap();
        let hw = chimera(8, 8, 4);
        let opts = EmbedOptions { max_vars: Some(25), ..EmbedOptions::default() };
        let res = embed_subproblem(&p, &hw, 0, 0, &opts).unwrap();
        assert_eq!(res.n_sub, 25);
        check(&p, &hw, &res);
        let opts = EmbedOptions { max_searches: Some(10), ..EmbedOptions::default() };
        let res = embed_subproblem(&p, &hw, 0, 0, &opts).unwrap();
        assert!(res.counters.n_breadth < 10 + 2 * 4);
    }

    #[test]
    fn searches_stay_in_region() {
        let p = grid2d(40, 40).unwrap();
        let hw = chimera(6, 6, 4);
        let opts = EmbedOptions { audit: true, ..EmbedOptions::default() };
        let res = embed_subproblem(&p, &hw, 820, 0, &opts).unwrap();
        check(&p, &hw, &res);
        assert_eq!(res.counters.region_bound_violations, 0);
        assert!(res.counters.e_q_max > 0);
    }

    #[test]
    fn deterministic() {
        let p = erdos_renyi(200, 0.05, 9).unwrap();
        let hw = chimera(8, 8, 4);
        let a = embed_subproblem(&p, &hw, 5, 1, &EmbedOptions::default()).unwrap();
        let b = embed_subproblem(&p, &hw, 5, 1, &EmbedOptions::default()).unwrap();
        assert_eq!(a, b);
        check(&p, &hw, &a);
        let opts = EmbedOptions { randomize_ties: true, ..EmbedOptions::default() };
        let c = embed_subproblem(&p, &hw, 5, 2, &opts).unwrap();
        assert_eq!(c, embed_subproblem(&p, &hw, 5, 2, &opts).unwrap());
        check(&p, &hw, &c);
    }

    #[test]
    fn complete_graph_reaches_clique_scale() {
        let p = complete(1000).unwrap();
        let hw = chimera(16, 16, 4);
        let res = embed_subproblem(&p, &hw, 0, 0, &EmbedOptions::default()).unwrap();
        check(&p, &hw, &res);
        assert!(res.n_sub >= 60, "n_sub = {}", res.n_sub);
    }

    #[test]
    fn cubic_lattice_subproblem_size() {
        let p = cubic_pm_j([10, 10, 10], 0.5, 1.0, Boundary::Periodic, 1).unwrap();
        let hw = chimera(16, 16, 4);
        let res = embed_subproblem(&p, &hw, 0, 0, &EmbedOptions::default()).unwrap();
        check(&p, &hw, &res);
        assert!(res.n_sub >= 340, "n_sub = {}", res.n_sub);
    }

    #[test]
    fn straight_steps_extend_the_lane() {
        let p = ProblemGraph::new(2, [((0, 1), -1.0)], vec![0.0; 2]).unwrap();
        let hw = chimera(5, 1, 4);
        let spec = *hw.spec();
        let mut state = EmbedState::new(&p, &hw, &EmbedOptions::default());
        assert!(state.bfs_connect(0, spec.qubit(1, 0, Shore::Right, 0), &[]));
        state.status[0] = Status::Embedded;
        let root = spec.qubit(3, 0, Shore::Left, 1);
        state.reserve(root, 1).unwrap();
        assert!(state.bfs_connect(1, root, &[0]));
        let line: Vec<Qubit> = (1..4).rev().map(|r| spec.qubit(r, 0, Shore::Left, 1)).collect();
        let mut chain = state.chain(1).unwrap().to_vec();
        chain.sort_unstable();
        let mut expected = line.clone();
        expected.sort_unstable();
        assert_eq!(chain, expected);
        let mut lanes = state.reservations(1).to_vec();
        lanes.sort_unstable();
        assert_eq!(lanes, [spec.qubit(0, 0, Shore::Left, 1), spec.qubit(4, 0, Shore::Left, 1)]);
    }

    fn snapshot(state: &EmbedState) -> (Vec<Option<Var>>, Vec<Option<Var>>, BTreeMap<Var, BTreeSet<Qubit>>) {
        let lanes = state
            .reservations
            .iter()
            .filter(|(_, l)| !l.is_empty())
            .map(|(&v, l)| (v, l.iter().copied().collect()))
            .collect();
        (state.used.clone(), state.reserved.clone(), lanes)
    }

    proptest::proptest! {
        #[test]
        fn attempts_keep_state_consistent(n in 4usize..30, p in 0.1f64..0.9, seed in 0u64..1000, dims in 1usize..4) {
            let problem = erdos_renyi(n, p, seed).unwrap();
            let hw = chimera(dims, dims + 1, 2);
            let mut state = EmbedState::new(&problem, &hw, &EmbedOptions::default());
            for var in 0..n {
                let before = snapshot(&state);
                let ok = state.attempt(var);
                if !ok {
                    proptest::prop_assert_eq!(&snapshot(&state), &before);
                }
                state.resolve(var, if ok { Status::Embedded } else { Status::Failed });
                for q in 0..hw.num_qubit_ids() {
                    proptest::prop_assert!(state.used[q].is_none() || state.reserved[q].is_none());
                    if let Some(owner) = state.reserved[q] {
                        proptest::prop_assert!(state.reservations(owner).contains(&q));
                    }
                    if let Some(v) = state.used[q] {
                        proptest::prop_assert!(state.chain(v).unwrap().contains(&q));
                    }
                }
                let mut in_cells = vec![0u32; hw.spec().num_cells()];
                for q in (0..hw.num_qubit_ids()).filter(|&q| state.used[q].is_some()) {
                    in_cells[hw.spec().cell_of(q)] += 1;
                }
                proptest::prop_assert_eq!(&in_cells, &state.cell_used);
            }
            state.release_all();
            proptest::prop_assert_eq!(state.num_reserved(), 0);
            let emb = state.into_embedding();
            let vars: Vec<Var> = emb.variables().collect();
            proptest::prop_assert!(verify_embedding(&problem, &vars, &hw, &emb).is_valid());
        }

        #[test]
        fn runs_are_valid_and_within_search_bound(n in 2usize..80, p in 0.02f64..1.0, seed in 0u64..1000, start in 0usize..80) {
            let problem = erdos_renyi(n, p, seed).unwrap();
            let hw = chimera(4, 4, 4);
            let res = embed_subproblem(&problem, &hw, start % n, seed, &EmbedOptions::default()).unwrap();
            check(&problem, &hw, &res);
        }
    }
}
