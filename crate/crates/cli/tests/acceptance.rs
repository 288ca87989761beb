//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the report is never captured.
//! Exits non-zero when any criterion fails.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use chimera_embed::cai::{embed_full, CaiOptions};
use chimera_embed::clique::embed_complete;
use chimera_embed::embedding::{build_embedded_problem, chain_stats, verify_embedding, FieldPolicy};
use chimera_embed::problem::{complete, cubic_pm_j, energy, erdos_renyi, grid2d, Boundary};
use chimera_embed::solver::{solve_iterative, BackendKind, EmbedderKind, SolveTrace, SolverConfig};
use chimera_embed::subproblem::{embed_subproblem, EmbedOptions};
use chimera_embed::{rng, Assignment, ChimeraSpec, Error, HardwareGraph, ProblemGraph, Var};
use chimera_embed_cli::experiments::{scaling, solve_trials, start_for, sweep_pbond};
use chimera_embed_cli::stats::mean;
use rand::seq::index::sample;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn chimera(m: usize, n: usize, l: usize) -> HardwareGraph {
    HardwareGraph::chimera(ChimeraSpec::new(m, n, l).unwrap())
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

fn internal_edges(problem: &ProblemGraph, vars: &[Var]) -> u64 {
    let set: BTreeSet<Var> = vars.iter().copied().collect();
    problem.couplings().keys().filter(|(a, b)| set.contains(a) && set.contains(b)).count() as u64
}

/// Instance of family `family % 4`, sized by `scale` in `[0, 1]`.
fn instance(family: usize, scale: f64, r: &mut rng::Rng) -> ProblemGraph {
    let pick = |lo: usize, hi: usize| lo + ((hi - lo) as f64 * scale).round() as usize;
    let seed = r.gen();
    match family % 4 {
        0 => {
            let side = pick(2, 6);
            cubic_pm_j([side, side, pick(2, 5)], 0.5, 1.0, Boundary::Periodic, seed).unwrap()
        }
        1 => grid2d(pick(2, 30), pick(2, 30)).unwrap(),
        2 => complete(pick(3, 60)).unwrap(),
        _ => erdos_renyi(pick(8, 200), r.gen_range(0.02..0.3), seed).unwrap(),
    }
}

fn criteria_1_and_2() -> (Outcome, Outcome) {
    let mut r = rng::from_seed(2024);
    let (mut produced, mut valid) = ([0usize; 3], [0usize; 3]);
    let (mut bound_checked, mut bound_ok) = (0usize, 0usize);
    for run in 0..200 {
        let family = run % 4;
        let algo = (run / 4) % 3;
        let m = r.gen_range(2..=8);
        let spec = ChimeraSpec::new(m, m, 4).unwrap();
        let clean = HardwareGraph::chimera(spec);
        let removed = r.gen_range(0..spec.num_qubits() / 20 + 1);
        let defects: BTreeSet<usize> = sample(&mut r, spec.num_qubits(), removed).into_iter().collect();
        let faulty = HardwareGraph::build(spec, &defects, &BTreeSet::new()).unwrap();
        let run_seed: u64 = r.gen();
        let (vars, emb, problem, hw) = match algo {
            0 => {
                let problem = instance(family, r.gen(), &mut r);
                let start = r.gen_range(0..problem.num_vars());
                let Ok(res) = embed_subproblem(&problem, &faulty, start, run_seed, &EmbedOptions::default()) else {
                    continue;
                };
                bound_checked += 1;
                if res.counters.n_breadth <= 2 * internal_edges(&problem, &res.attempted()) {
                    bound_ok += 1;
                }
                (res.variables, res.embedding, problem, faulty)
            }
            1 => {
                let problem = instance(family, r.gen_range(0.0..0.15), &mut r);
                let res = embed_full(&problem, &faulty, run_seed, &CaiOptions::default()).unwrap();
                let Some(emb) = res.embedding else { continue };
                ((0..problem.num_vars()).collect(), emb, problem, faulty)
            }
            _ => {
                let problem = instance(family, r.gen_range(0.0..0.4), &mut r);
                let Ok(emb) = embed_complete(problem.num_vars(), &clean) else { continue };
                ((0..problem.num_vars()).collect(), emb, problem, clean)
            }
        };
        produced[algo] += 1;
        if verify_embedding(&problem, &vars, &hw, &emb).is_valid() {
            valid[algo] += 1;
        }
    }
    let total: usize = produced.iter().sum();
    let ok: usize = valid.iter().sum();
    let c1 = outcome(
        ok == total && produced.iter().all(|&p| p > 0),
        format!(
            "{ok}/{total} produced embeddings valid (proposed {}/{}, baseline {}/{}, clique {}/{}) over 200 runs",
            valid[0], produced[0], valid[1], produced[1], valid[2], produced[2]
        ),
    );
    let c2 = outcome(
        bound_ok == bound_checked && bound_checked > 0,
        format!("n_breadth <= 2 x internal edges of the attempted set in {bound_ok}/{bound_checked} runs"),
    );
    (c1, c2)
}

fn criterion_3() -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let sizes = [4, 8, 16, 32, 64];
    let seeds = [1, 2, 3, 4, 5];
    let start = Instant::now();
    let (grid, clique) = pool.install(|| {
        (
            scaling(&grid2d(300, 300).unwrap(), &sizes, 4, &seeds).unwrap(),
            scaling(&complete(1000).unwrap(), &sizes, 4, &seeds).unwrap(),
        )
    });
    let elapsed = start.elapsed();
    let checks = [
        ("grid n_breadth", grid.fit_n_breadth.slope, 1.27, 0.20),
        ("grid n_sub", grid.fit_n_sub.slope, 0.91, 0.12),
        ("complete n_breadth", clique.fit_n_breadth.slope, 0.84, 0.15),
        ("complete n_sub", clique.fit_n_sub.slope, 0.50, 0.08),
    ];
    let pass = checks.iter().all(|&(_, v, t, tol)| within(v, t, tol)) && elapsed < Duration::from_secs(30 * 60);
    let detail = checks
        .iter()
        .map(|&(name, v, t, tol)| format!("{name} {v:.3} (want {t}+-{tol}{})", if within(v, t, tol) { "" } else { " MISS" }))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(pass, format!("{detail}; {:.0}s single-threaded", elapsed.as_secs_f64()))
}

fn criterion_4() -> Outcome {
    let p = cubic_pm_j([10, 10, 10], 0.5, 1.0, Boundary::Periodic, 1).unwrap();
    let hw = chimera(16, 16, 4);
    let sizes: Vec<usize> = (1..=5)
        .map(|seed| embed_subproblem(&p, &hw, start_for(seed, 1000), seed, &EmbedOptions::default()).unwrap().n_sub)
        .collect();
    let hits = sizes.iter().filter(|&&n| n >= 340).count();
    outcome(hits >= 4, format!("n_sub {sizes:?}; {hits}/5 seeds >= 340"))
}

fn criterion_5() -> Outcome {
    let hw = chimera(16, 16, 4);
    let k64 = complete(64).unwrap();
    let emb = embed_complete(64, &hw).unwrap();
    let all: Vec<Var> = (0..64).collect();
    let valid = verify_embedding(&k64, &all, &hw, &emb).is_valid();
    let max_chain = chain_stats(&emb).max_len;
    let over = embed_complete(65, &hw);
    let capacity_error = matches!(over, Err(Error::CapacityExceeded { requested: 65, capacity: 64 }));
    outcome(
        valid && max_chain <= 17 && capacity_error,
        format!("K_64 valid={valid} max_chain={max_chain}; n=65 -> {over:?}", over = over.map(|_| "ok")),
    )
}

fn criterion_6() -> Outcome {
    let p = cubic_pm_j([10, 10, 10], 0.0, 1.0, Boundary::Periodic, 0).unwrap();
    let hw = chimera(16, 16, 4);
    let cfg = SolverConfig { iterations: 100, seed: 6, ..SolverConfig::default() };
    let start = Instant::now();
    let traces = solve_trials(&p, &hw, &cfg, 8).unwrap();
    let elapsed = start.elapsed();
    let reached: Vec<Option<usize>> =
        traces.iter().map(|t| t.records.iter().position(|r| r.e_best == -3000.0).map(|i| i + 1)).collect();
    let hits = reached.iter().flatten().count();
    let pass = hits * 10 >= 9 * traces.len() && elapsed < Duration::from_secs(20 * 60);
    outcome(
        pass,
        format!("{hits}/8 trials reached -3.000/spin; first iteration per trial {reached:?}; {:.0}s", elapsed.as_secs_f64()),
    )
}

fn mean_best_at(traces: &[SolveTrace], iteration: usize) -> f64 {
    mean(&traces.iter().map(|t| t.records[iteration - 1].e_best).collect::<Vec<_>>()).unwrap()
}

fn criterion_7() -> Outcome {
    let hw = chimera(16, 16, 4);
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for p_f in [0.0, 0.5] {
        let p = cubic_pm_j([10, 10, 10], p_f, 1.0, Boundary::Periodic, 7).unwrap();
        let base = SolverConfig { iterations: 20, seed: 70, ..SolverConfig::default() };
        let ours = solve_trials(&p, &hw, &base, 8).unwrap();
        let clique_cfg = SolverConfig { embedder: EmbedderKind::Complete, complete_capacity: Some(63), ..base };
        let clique = solve_trials(&p, &hw, &clique_cfg, 8).unwrap();
        let (a, b) = (mean_best_at(&ours, 20), mean_best_at(&clique, 20));
        pass &= a <= b;
        parts.push(format!("p_F={p_f}: proposed {:.4}/spin vs 63-clique {:.4}/spin", a / 1000.0, b / 1000.0));
    }
    pass &= start.elapsed() < Duration::from_secs(40 * 60);
    outcome(pass, format!("{}; {:.0}s", parts.join("; "), start.elapsed().as_secs_f64()))
}

fn criterion_8() -> Outcome {
    let hw = chimera(16, 16, 4);
    let ps = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5];
    let report = sweep_pbond(1000, &ps, 10, &hw, 8).unwrap();
    let rho = report.spearman.unwrap_or(f64::NAN);
    let means: Vec<String> = report.rows.iter().map(|r| format!("{}:{:.1}", r.p_bond, r.mean_n_sub)).collect();
    outcome(rho <= -0.9, format!("spearman {rho:.3}; mean n_sub {}", means.join(" ")))
}

fn random_problem(n: usize, r: &mut rng::Rng) -> ProblemGraph {
    let mut couplings = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if r.gen_bool(0.5) {
                couplings.push(((a, b), f64::from(r.gen_range(-3..=3))));
            }
        }
    }
    let fields = (0..n).map(|_| f64::from(r.gen_range(-2..=2))).collect();
    ProblemGraph::new(n, couplings, fields).unwrap()
}

fn spins(bits: u32, n: usize) -> Assignment {
    Assignment::new((0..n).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).collect()).unwrap()
}

fn criterion_9() -> Outcome {
    let hw = chimera(16, 16, 4);
    let mut r = rng::from_seed(9);
    let mut agree = 0;
    for k in 0..50u64 {
        let n = r.gen_range(1..=12);
        let p = random_problem(n, &mut r);
        let ground = (0..1u32 << n).map(|b| energy(&p, &spins(b, n)).unwrap()).fold(f64::INFINITY, f64::min);
        let cfg = SolverConfig {
            embedder: EmbedderKind::Complete,
            backend: BackendKind::Exact,
            iterations: 1,
            seed: k,
            ..SolverConfig::default()
        };
        let trace = solve_iterative(&p, &hw, &cfg, &Assignment::random(n, k)).unwrap();
        if trace.records[0].n_sub == n && trace.best_energy == ground {
            agree += 1;
        }
    }
    outcome(agree == 50, format!("{agree}/50 whole-graph exact solves equal the enumerated ground energy"))
}

fn criterion_10() -> Outcome {
    let hw = chimera(2, 2, 2);
    let mut r = rng::from_seed(10);
    let (mut exact, mut with_chains, mut max_qubits) = (0, 0, 0);
    for _ in 0..30 {
        let n = r.gen_range(2..=8);
        let p = random_problem(n, &mut r);
        let res = embed_subproblem(&p, &hw, r.gen_range(0..n), 0, &EmbedOptions::default()).unwrap();
        let index: std::collections::BTreeMap<Var, usize> = res.variables.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let sub = p.induced(&res.variables).unwrap();
        let emb = res.embedding.relabel(|v| index[&v]);
        let strength = f64::from(r.gen_range(1..=5));
        let ep = build_embedded_problem(&sub, &emb, &hw, strength, FieldPolicy::Root).unwrap();
        max_qubits = max_qubits.max(ep.num_qubits());
        let tree_edges: usize = emb.chains().values().map(|c| c.len() - 1).sum();
        if tree_edges > 0 {
            with_chains += 1;
        }
        let offset = -strength * tree_edges as f64;
        let k = sub.num_vars();
        let holds = ep.chain_offset() == offset
            && (0..1u32 << k).all(|b| {
                let x = spins(b, k);
                ep.energy(&ep.aligned_sample(&x)).unwrap() == energy(&sub, &x).unwrap() + offset
            });
        if holds {
            exact += 1;
        }
    }
    outcome(
        exact == 30 && max_qubits <= 20,
        format!("{exact}/30 instances exact ({with_chains} with multi-qubit chains, at most {max_qubits} qubits)"),
    )
}

fn report(id: usize, name: &str, o: &Outcome, elapsed: Duration) {
    let tag = if o.pass { "PASS" } else { "FAIL" };
    println!("criterion {id:>2} [{tag}] {name}: {} ({:.1}s)", o.detail, elapsed.as_secs_f64());
}

fn main() -> ExitCode {
    // honour `cargo test -- <filter>` by skipping everything when a filter names
    // something other than this suite
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return ExitCode::SUCCESS;
    }
    let mut failures = 0;
    let t = Instant::now();
    let (c1, c2) = criteria_1_and_2();
    let e = t.elapsed();
    report(1, "embedding validity", &c1, e);
    report(2, "search bound", &c2, e);
    failures += usize::from(!c1.pass) + usize::from(!c2.pass);
    let rest: [(usize, &str, fn() -> Outcome); 8] = [
        (3, "scaling slopes", criterion_3),
        (4, "subproblem size", criterion_4),
        (5, "clique capacity", criterion_5),
        (6, "ferromagnet convergence", criterion_6),
        (7, "large vs small subproblems", criterion_7),
        (8, "p_bond monotonicity", criterion_8),
        (9, "oracle equivalence", criterion_9),
        (10, "embedded-energy identity", criterion_10),
    ];
    for (id, name, f) in rest {
        let t = Instant::now();
        let o = f();
        report(id, name, &o, t.elapsed());
        failures += usize::from(!o.pass);
    }
    println!("acceptance: {}/10 criteria passed", 10 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
