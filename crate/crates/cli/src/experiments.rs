//! Experiment drivers behind the `embed`, `scaling`, `sweep-pbond` and `solve`
//! commands.
//!
//! Runs fan out over the current rayon pool; results are collected in input
//! order, so output never depends on the number of threads.

use chimera_embed::cai::{embed_full, CaiOptions};
use chimera_embed::clique::embed_complete;
use chimera_embed::embedding::{chain_stats, verify_embedding};
use chimera_embed::problem::erdos_renyi;
use chimera_embed::solver::{solve_iterative, SolveTrace, SolverConfig};
use chimera_embed::subproblem::{embed_subproblem, EmbedOptions};
use chimera_embed::{rng, Assignment, ChimeraSpec, Embedding, HardwareGraph, ProblemGraph, Var};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::stats::{log_log, mean, spearman, std_err, Fit};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    /// Greedy subproblem embedder.
    Proposed,
    /// Full-graph two-stage baseline.
    Cai,
    /// Clique layout covering every variable.
    Complete,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedRun {
    pub variables: Vec<Var>,
    pub embedding: Embedding,
    pub n_sub: usize,
    /// Breadth-first searches (proposed) or shortest-path searches (baseline);
    /// zero for the clique layout.
    pub n_breadth: u64,
    /// Edges relaxed by all searches.
    pub searched_edges: u64,
    pub max_chain: usize,
}

/// Start variable used by experiments for `seed`.
pub fn start_for(seed: u64, n: usize) -> Var {
    rng::from_seed(rng::derive(seed, 0x57a7)).gen_range(0..n)
}

/// Embed with `algo`; the result is checked with `verify_embedding`.
pub fn run_embed(
    problem: &ProblemGraph,
    hw: &HardwareGraph,
    algo: Algo,
    start: Var,
    seed: u64,
    options: &EmbedOptions,
    cai: &CaiOptions,
) -> Result<EmbedRun, CliError> {
    let (variables, embedding, n_breadth, searched_edges) = match algo {
        Algo::Proposed => {
            let res = embed_subproblem(problem, hw, start, seed, options)?;
            (res.variables, res.embedding, res.counters.n_breadth, res.counters.searched_edges_total)
        }
        Algo::Cai => {
            let res = embed_full(problem, hw, seed, cai)?;
            let c = res.counters;
            let emb = res.embedding.ok_or_else(|| {
                CliError::Failed(format!("no embedding found; {} variables share a qubit at most", res.max_occupancy))
            })?;
            ((0..problem.num_vars()).collect(), emb, c.n_dijkstra_initial + c.n_dijkstra_refine, c.relaxed_edges)
        }
        Algo::Complete => {
            let emb = embed_complete(problem.num_vars(), hw)?;
            ((0..problem.num_vars()).collect(), emb, 0, 0)
        }
    };
    let report = verify_embedding(problem, &variables, hw, &embedding);
    if let Some(v) = report.violations.first() {
        return Err(CliError::Failed(format!("invalid embedding: {:?}: {}", v.kind, v.detail)));
    }
    Ok(EmbedRun {
        n_sub: variables.len(),
        max_chain: chain_stats(&embedding).max_len,
        variables,
        embedding,
        n_breadth,
        searched_edges,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub m: usize,
    pub qubits: usize,
    pub seed: u64,
    pub start: Var,
    pub n_sub: usize,
    pub n_breadth: u64,
    pub searched_edges: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// `ln n_sub` against `ln |V_q|`, all seeds pooled.
    pub fit_n_sub: Fit,
    pub fit_n_breadth: Fit,
}

/// Proposed embedder on square Chimera graphs `M x M x shore` for each `M` in
/// `sizes` and each seed.
pub fn scaling(problem: &ProblemGraph, sizes: &[usize], shore: usize, seeds: &[u64]) -> Result<ScalingReport, CliError> {
    let mut distinct = sizes.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(CliError::Usage("slope fitting needs at least two distinct sizes".into()));
    }
    if seeds.is_empty() {
        return Err(CliError::Usage("at least one seed is required".into()));
    }
    let jobs: Vec<(usize, u64)> = sizes.iter().flat_map(|&m| seeds.iter().map(move |&s| (m, s))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(m, seed)| {
            let hw = HardwareGraph::chimera(ChimeraSpec::new(m, m, shore)?);
            let start = start_for(seed, problem.num_vars());
            let run = run_embed(problem, &hw, Algo::Proposed, start, seed, &EmbedOptions::default(), &CaiOptions::default())?;
            Ok(ScalingRow {
                m,
                qubits: hw.num_qubits(),
                seed,
                start,
                n_sub: run.n_sub,
                n_breadth: run.n_breadth,
                searched_edges: run.searched_edges,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let qubits: Vec<f64> = rows.iter().map(|r| r.qubits as f64).collect();
    let n_sub: Vec<f64> = rows.iter().map(|r| r.n_sub as f64).collect();
    let n_breadth: Vec<f64> = rows.iter().map(|r| (r.n_breadth.max(1)) as f64).collect();
    let fit = |ys: &[f64]| log_log(&qubits, ys).ok_or_else(|| CliError::Usage("degenerate fit".into()));
    Ok(ScalingReport { fit_n_sub: fit(&n_sub)?, fit_n_breadth: fit(&n_breadth)?, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub p_bond: f64,
    pub instances: usize,
    pub mean_n_sub: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Rank correlation between `p_bond` and the mean subproblem size.
    pub spearman: Option<f64>,
}

/// Proposed embedder on `instances` random graphs `G(n, p)` for each `p`.
pub fn sweep_pbond(n: usize, ps: &[f64], instances: usize, hw: &HardwareGraph, seed: u64) -> Result<SweepReport, CliError> {
    if ps.is_empty() {
        return Err(CliError::Usage("the p_bond list is empty".into()));
    }
    if let Some(p) = ps.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
        return Err(CliError::Usage(format!("p_bond must lie in (0, 1], got {p}")));
    }
    if instances == 0 || n == 0 {
        return Err(CliError::Usage("need at least one instance of at least one variable".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..ps.len()).flat_map(|i| (0..instances).map(move |k| (i, k))).collect();
    let sizes = jobs
        .par_iter()
        .map(|&(i, k)| {
            let s = rng::derive(rng::derive(seed, i as u64), k as u64);
            let problem = erdos_renyi(n, ps[i], s)?;
            let run = run_embed(&problem, hw, Algo::Proposed, start_for(s, n), s, &EmbedOptions::default(), &CaiOptions::default())?;
            Ok(run.n_sub as f64)
        })
        .collect::<Result<Vec<f64>, CliError>>()?;
    let rows: Vec<SweepRow> = ps
        .iter()
        .zip(sizes.chunks(instances))
        .map(|(&p_bond, chunk)| SweepRow {
            p_bond,
            instances,
            mean_n_sub: mean(chunk).unwrap_or(0.0),
            std_err: std_err(chunk).unwrap_or(0.0),
        })
        .collect();
    let means: Vec<f64> = rows.iter().map(|r| r.mean_n_sub).collect();
    Ok(SweepReport { spearman: spearman(ps, &means), rows })
}

/// Seeds of trial `t`: the initial state and the solver.
///
/// Neither depends on the embedder or backend, so configurations that differ only
/// in those start from identical states.
pub fn trial_seeds(seed: u64, t: usize) -> (u64, u64) {
    (rng::derive(seed, 2 * t as u64), rng::derive(seed, 2 * t as u64 + 1))
}

/// Run `trials` independent solves of `problem`.
pub fn solve_trials(problem: &ProblemGraph, hw: &HardwareGraph, cfg: &SolverConfig, trials: usize) -> Result<Vec<SolveTrace>, CliError> {
    if trials == 0 {
        return Err(CliError::Usage("at least one trial is required".into()));
    }
    cfg.validate()?;
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let (x_seed, solver_seed) = trial_seeds(cfg.seed, t);
            let x0 = Assignment::random(problem.num_vars(), x_seed);
            let cfg = SolverConfig { seed: solver_seed, ..cfg.clone() };
            Ok(solve_iterative(problem, hw, &cfg, &x0)?)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub iter: usize,
    pub mean_e_full: f64,
    pub mean_e_best: f64,
    pub std_err_best: f64,
    pub min_e_best: f64,
}

/// Per-iteration averages over trials.
pub fn summarize(traces: &[SolveTrace]) -> Vec<SummaryRow> {
    let iterations = traces.iter().map(|t| t.records.len()).min().unwrap_or(0);
    (0..iterations)
        .map(|i| {
            let full: Vec<f64> = traces.iter().map(|t| t.records[i].e_full).collect();
            let best: Vec<f64> = traces.iter().map(|t| t.records[i].e_best).collect();
            SummaryRow {
                iter: i,
                mean_e_full: mean(&full).unwrap_or(0.0),
                mean_e_best: mean(&best).unwrap_or(0.0),
                std_err_best: std_err(&best).unwrap_or(0.0),
                min_e_best: best.iter().copied().fold(f64::INFINITY, f64::min),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chimera_embed::problem::{complete, grid2d};
    use chimera_embed::solver::{BackendKind, SaSchedule};

    fn chimera(m: usize) -> HardwareGraph {
        HardwareGraph::chimera(ChimeraSpec::new(m, m, 4).unwrap())
    }

    #[test]
    fn embed_each_algorithm() {
        let hw = chimera(4);
        let p = grid2d(6, 6).unwrap();
        let ours = run_embed(&p, &hw, Algo::Proposed, 0, 0, &EmbedOptions::default(), &CaiOptions::default()).unwrap();
        assert!(ours.n_sub > 1 && ours.n_breadth > 0);
        let k = complete(16).unwrap();
        let clique = run_embed(&k, &hw, Algo::Complete, 0, 0, &EmbedOptions::default(), &CaiOptions::default()).unwrap();
        assert_eq!((clique.n_sub, clique.n_breadth, clique.max_chain), (16, 0, 5));
        let big = complete(17).unwrap();
        let err = run_embed(&big, &hw, Algo::Complete, 0, 0, &EmbedOptions::default(), &CaiOptions::default());
        assert!(matches!(err, Err(CliError::Failed(_))));
        let small = grid2d(3, 3).unwrap();
        let cai = run_embed(&small, &hw, Algo::Cai, 0, 1, &EmbedOptions::default(), &CaiOptions::default()).unwrap();
        assert_eq!(cai.n_sub, 9);
    }

    #[test]
    fn scaling_needs_two_sizes_and_is_thread_independent() {
        let p = grid2d(20, 20).unwrap();
        assert!(matches!(scaling(&p, &[4, 4], 4, &[1]), Err(CliError::Usage(_))));
        assert!(matches!(scaling(&p, &[2, 4], 4, &[]), Err(CliError::Usage(_))));
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let a = one.install(|| scaling(&p, &[2, 4, 8], 4, &[1, 2]).unwrap());
        let b = scaling(&p, &[2, 4, 8], 4, &[1, 2]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 6);
        assert!(a.fit_n_sub.slope > 0.0);
    }

    #[test]
    fn sweep_validates_and_reports() {
        let hw = chimera(4);
        assert!(matches!(sweep_pbond(50, &[], 2, &hw, 0), Err(CliError::Usage(_))));
        assert!(matches!(sweep_pbond(50, &[0.0], 2, &hw, 0), Err(CliError::Usage(_))));
        let r = sweep_pbond(60, &[0.05, 0.5], 3, &hw, 0).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert!(r.rows[0].mean_n_sub > r.rows[1].mean_n_sub);
        assert_eq!(r.spearman, Some(-1.0));
    }

    #[test]
    fn trials_share_initial_states_across_backends() {
        let p = grid2d(8, 8).unwrap();
        let hw = chimera(4);
        let cfg = SolverConfig {
            iterations: 2,
            sa_schedule: SaSchedule { sweeps: 20, ..SaSchedule::default() },
            ..SolverConfig::default()
        };
        let a = solve_trials(&p, &hw, &cfg, 3).unwrap();
        let b = solve_trials(&p, &hw, &SolverConfig { backend: BackendKind::SaLogical, ..cfg.clone() }, 3).unwrap();
        assert_eq!(a.len(), 3);
        assert_ne!(trial_seeds(5, 0), trial_seeds(5, 1));
        let summary = summarize(&a);
        assert_eq!(summary.len(), 2);
        let first: Vec<f64> = a.iter().map(|t| t.records[0].e_best).collect();
        assert_eq!(summary[0].mean_e_best, mean(&first).unwrap());
        assert!(b.iter().all(|t| t.records.len() == 2));
    }
}
