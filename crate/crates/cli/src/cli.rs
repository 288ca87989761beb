//! Argument parsing and command dispatch.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chimera_embed::cai::CaiOptions;
use chimera_embed::embedding::{chain_stats, verify_embedding, ChainStrength, FieldPolicy};
use chimera_embed::solver::{BackendKind, EmbedderKind, SaSchedule, SolverConfig};
use chimera_embed::subproblem::EmbedOptions;
use chimera_embed::{Boundary, HardwareGraph, ProblemGraph};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::experiments::{self, start_for, Algo};
use crate::instance::{load_hardware, with_random_defects, ChimeraDims, GenParams, ProblemSpec};
use crate::io::{read_embedding, write_embedding, write_hardware, write_problem, write_trace_csv};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "chimera-embed", version, about = "Embed Ising subproblems into Chimera graphs and run decomposition experiments")]
pub struct Cli {
    /// Worker threads for independent runs; 0 uses every core.
    #[arg(long, global = true, env = "CHIMERA_EMBED_JOBS", default_value_t = 0)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a problem instance or a hardware graph in the text format.
    Generate(GenerateArgs),
    /// Embed one instance and print `n_sub=.. n_breadth=.. max_chain=..`.
    Embed(EmbedArgs),
    /// Subproblem size and search count against hardware size, with log-log slopes.
    Scaling(ScalingArgs),
    /// Mean subproblem size of random graphs against bond probability.
    SweepPbond(SweepArgs),
    /// Iterative decomposition solver over several trials.
    Solve(SolveArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundaryArg {
    Open,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EmbedderArg {
    Proposed,
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Exact,
    #[value(alias = "sa_embedded")]
    SaEmbedded,
    #[value(alias = "sa_logical")]
    SaLogical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FieldPolicyArg {
    Uniform,
    Root,
}

#[derive(Debug, Args)]
pub struct InstanceArgs {
    /// grid:WxH, complete:N, cubic:XxYxZ, er:N:P or file:PATH.
    #[arg(long)]
    pub problem: ProblemSpec,
    #[command(flatten)]
    pub gen: GenArgs,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Probability of an antiferromagnetic (+J) bond in cubic instances.
    #[arg(long, default_value_t = 0.5)]
    pub pf: f64,
    /// Coupling magnitude J of cubic instances.
    #[arg(long, default_value_t = 1.0)]
    pub coupling: f64,
    #[arg(long, value_enum, default_value_t = BoundaryArg::Periodic)]
    pub boundary: BoundaryArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl GenArgs {
    fn params(&self) -> GenParams {
        let boundary = match self.boundary {
            BoundaryArg::Open => Boundary::Open,
            BoundaryArg::Periodic => Boundary::Periodic,
        };
        GenParams { p_f: self.pf, j: self.coupling, boundary, seed: self.seed }
    }
}

#[derive(Debug, Args)]
pub struct HardwareArgs {
    /// Chimera dimensions MxNxL.
    #[arg(long, default_value = "16x16x4")]
    pub chimera: ChimeraDims,
    /// Fraction of qubits removed at random.
    #[arg(long, default_value_t = 0.0)]
    pub defect_rate: f64,
    #[arg(long, default_value_t = 0)]
    pub defect_seed: u64,
    /// Read the hardware graph from a file instead.
    #[arg(long)]
    pub hardware_file: Option<PathBuf>,
}

impl HardwareArgs {
    fn build(&self) -> Result<HardwareGraph, CliError> {
        match &self.hardware_file {
            Some(path) => load_hardware(path),
            None => with_random_defects(self.chimera.0, self.defect_rate, self.defect_seed),
        }
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Problem to write (see `embed --help`).
    #[arg(long, required_unless_present = "chimera", conflicts_with = "chimera")]
    pub problem: Option<ProblemSpec>,
    #[command(flatten)]
    pub gen: GenArgs,
    /// Hardware graph MxNxL to write.
    #[arg(long)]
    pub chimera: Option<ChimeraDims>,
    /// Fraction of qubits removed at random (uses --seed).
    #[arg(long, default_value_t = 0.0)]
    pub defect_rate: f64,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub hardware: HardwareArgs,
    #[arg(long, value_enum, default_value_t = Algo::Proposed)]
    pub algo: Algo,
    /// Start variable of the proposed embedder; drawn from --seed when absent.
    #[arg(long)]
    pub start: Option<usize>,
    /// Stop the proposed embedder after this many variables.
    #[arg(long)]
    pub max_vars: Option<usize>,
    /// Refinement passes of the baseline embedder.
    #[arg(long, default_value_t = 10)]
    pub refine_rounds: usize,
    /// Write the embedding to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Check this embedding against the instance instead of computing one.
    #[arg(long, conflicts_with_all = ["start", "max_vars", "out"])]
    pub embedding_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScalingArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Chimera sizes M (square M x M grids).
    #[arg(long, value_delimiter = ',', default_value = "4,8,16,32,64")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 4)]
    pub shore: usize,
    /// One run per size and seed; the seed picks the start variable.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    pub seeds: Vec<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Variables per random graph.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Bond probabilities.
    #[arg(long = "p", value_delimiter = ',', required = true)]
    pub ps: Vec<f64>,
    /// Random graphs per probability.
    #[arg(long, default_value_t = 10)]
    pub instances: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub hardware: HardwareArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub hardware: HardwareArgs,
    #[arg(long, value_enum, default_value_t = EmbedderArg::Proposed)]
    pub embedder: EmbedderArg,
    /// Block size of the complete embedder; the clique capacity when absent.
    #[arg(long)]
    pub capacity: Option<usize>,
    #[arg(long, value_enum, default_value_t = BackendArg::SaEmbedded)]
    pub backend: BackendArg,
    #[arg(long, default_value_t = 100)]
    pub iters: usize,
    #[arg(long, default_value_t = 8)]
    pub trials: usize,
    #[arg(long, default_value_t = 1000)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 0.1)]
    pub beta_initial: f64,
    #[arg(long, default_value_t = 10.0)]
    pub beta_final: f64,
    /// Linear instead of geometric inverse-temperature ramp.
    #[arg(long)]
    pub linear: bool,
    /// `relative:F` (F x max |J|), `fixed:C`, `local` or `global`.
    #[arg(long, default_value = "relative:2", value_parser = parse_chain_strength)]
    pub chain_strength: ChainStrength,
    #[arg(long, value_enum, default_value_t = FieldPolicyArg::Uniform)]
    pub field_policy: FieldPolicyArg,
    /// Write one trace CSV per trial into this directory.
    #[arg(long)]
    pub trace_dir: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn parse_chain_strength(s: &str) -> Result<ChainStrength, String> {
    let number = |v: &str| v.parse::<f64>().map_err(|_| format!("bad number {v:?}"));
    match s.split_once(':') {
        Some(("relative", v)) => Ok(ChainStrength::Relative(number(v)?)),
        Some(("fixed", v)) => Ok(ChainStrength::Fixed(number(v)?)),
        None if s == "local" => Ok(ChainStrength::LocalBound),
        None if s == "global" => Ok(ChainStrength::GlobalBound),
        _ => Err(format!("expected relative:F, fixed:C, local or global, got {s:?}")),
    }
}

/// Parse `args` (program name first) and run; returns the process exit code.
pub fn run<I, S>(args: I, stdout: &mut (dyn Write + Send), stderr: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args: Vec<String> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                1
            } else {
                let _ = write!(stdout, "{text}");
                0
            };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build() {
        Ok(pool) => pool,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return 1;
        }
    };
    let argv = args.get(1..).unwrap_or_default().join(" ");
    match pool.install(|| dispatch(&cli.command, &argv, stdout, stderr)) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: &Command, argv: &str, stdout: &mut (dyn Write + Send), stderr: &mut (dyn Write + Send)) -> Result<(), CliError> {
    match command {
        Command::Generate(a) => generate(a, argv, stdout),
        Command::Embed(a) => embed(a, stdout),
        Command::Scaling(a) => scaling(a, argv, stdout, stderr),
        Command::SweepPbond(a) => sweep(a, argv, stdout, stderr),
        Command::Solve(a) => solve(a, argv, stdout, stderr),
    }
}

/// Run `body` against `path` or, when absent, stdout.
fn with_output(
    path: Option<&Path>,
    stdout: &mut dyn Write,
    body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| CliError::io(p.display(), e))?;
            let mut w = BufWriter::new(file);
            body(&mut w).and_then(|()| w.flush()).map_err(|e| CliError::io(p.display(), e))
        }
        None => body(stdout).map_err(|e| CliError::io("stdout", e)),
    }
}

fn header(w: &mut dyn Write, argv: &str, seeds: &str) -> std::io::Result<()> {
    writeln!(w, "# chimera-embed {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(w, "# args: {argv}")?;
    writeln!(w, "# seeds: {seeds}")
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

#[derive(Serialize)]
struct JsonReport<'a, T: Serialize> {
    version: &'static str,
    args: &'a str,
    #[serde(flatten)]
    body: T,
}

fn write_json<T: Serialize>(w: &mut dyn Write, argv: &str, body: T) -> std::io::Result<()> {
    let report = JsonReport { version: env!("CARGO_PKG_VERSION"), args: argv, body };
    serde_json::to_writer_pretty(&mut *w, &report)?;
    writeln!(w)
}

fn generate(a: &GenerateArgs, argv: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    if let Some(spec) = &a.problem {
        let p = spec.build(&a.gen.params())?;
        with_output(a.out.as_deref(), stdout, |w| {
            writeln!(w, "# chimera-embed {argv}")?;
            write_problem(&p, w)
        })
    } else {
        let dims = a.chimera.expect("clap requires --problem or --chimera");
        let hw = with_random_defects(dims.0, a.defect_rate, a.gen.seed)?;
        with_output(a.out.as_deref(), stdout, |w| {
            writeln!(w, "# chimera-embed {argv}")?;
            write_hardware(&hw, w)
        })
    }
}

fn embed(a: &EmbedArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let problem = a.instance.problem.build(&a.instance.gen.params())?;
    let hw = a.hardware.build()?;
    let (n_sub, n_breadth, max_chain) = if let Some(path) = &a.embedding_file {
        let file = File::open(path).map_err(|e| CliError::io(path.display(), e))?;
        let emb = read_embedding(BufReader::new(file))?;
        let vars: Vec<usize> = emb.variables().collect();
        if let Some(&v) = vars.iter().find(|&&v| v >= problem.num_vars()) {
            return Err(CliError::Failed(format!("embedding names variable {v}, problem has {}", problem.num_vars())));
        }
        let report = verify_embedding(&problem, &vars, &hw, &emb);
        if let Some(v) = report.violations.first() {
            return Err(CliError::Failed(format!("invalid embedding: {:?}: {}", v.kind, v.detail)));
        }
        (vars.len(), 0, chain_stats(&emb).max_len)
    } else {
        let start = a.start.unwrap_or_else(|| start_for(a.instance.gen.seed, problem.num_vars()));
        let options = EmbedOptions { max_vars: a.max_vars, ..EmbedOptions::default() };
        let cai = CaiOptions { max_refine_rounds: a.refine_rounds, ..CaiOptions::default() };
        let run = experiments::run_embed(&problem, &hw, a.algo, start, a.instance.gen.seed, &options, &cai)?;
        if let Some(path) = &a.out {
            with_output(Some(path), stdout, |w| write_embedding(&run.embedding, w))?;
        }
        (run.n_sub, run.n_breadth, run.max_chain)
    };
    writeln!(stdout, "n_sub={n_sub} n_breadth={n_breadth} max_chain={max_chain}").map_err(|e| CliError::io("stdout", e))
}

fn scaling(a: &ScalingArgs, argv: &str, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    if a.sizes.contains(&0) {
        return Err(CliError::Usage("sizes must be positive".into()));
    }
    let problem = a.instance.problem.build(&a.instance.gen.params())?;
    let report = experiments::scaling(&problem, &a.sizes, a.shore, &a.seeds)?;
    with_output(a.output.out.as_deref(), stdout, |w| match a.output.format {
        Format::Json => write_json(w, argv, &report),
        Format::Csv => {
            header(w, argv, &join(&a.seeds))?;
            writeln!(w, "# slope_n_sub: {}", report.fit_n_sub.slope)?;
            writeln!(w, "# slope_n_breadth: {}", report.fit_n_breadth.slope)?;
            writeln!(w, "m,qubits,seed,start,n_sub,n_breadth,searched_edges")?;
            for r in &report.rows {
                writeln!(w, "{},{},{},{},{},{},{}", r.m, r.qubits, r.seed, r.start, r.n_sub, r.n_breadth, r.searched_edges)?;
            }
            Ok(())
        }
    })?;
    let _ = writeln!(
        stderr,
        "slope_n_sub={:.3} slope_n_breadth={:.3}",
        report.fit_n_sub.slope, report.fit_n_breadth.slope
    );
    Ok(())
}

fn sweep(a: &SweepArgs, argv: &str, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let hw = a.hardware.build()?;
    let report = experiments::sweep_pbond(a.n, &a.ps, a.instances, &hw, a.seed)?;
    with_output(a.output.out.as_deref(), stdout, |w| match a.output.format {
        Format::Json => write_json(w, argv, &report),
        Format::Csv => {
            header(w, argv, &a.seed.to_string())?;
            if let Some(rho) = report.spearman {
                writeln!(w, "# spearman: {rho}")?;
            }
            writeln!(w, "p_bond,instances,mean_n_sub,std_err")?;
            for r in &report.rows {
                writeln!(w, "{},{},{},{}", r.p_bond, r.instances, r.mean_n_sub, r.std_err)?;
            }
            Ok(())
        }
    })?;
    if let Some(rho) = report.spearman {
        let _ = writeln!(stderr, "spearman={rho:.3}");
    }
    Ok(())
}

fn solve(a: &SolveArgs, argv: &str, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let problem: ProblemGraph = a.instance.problem.build(&a.instance.gen.params())?;
    let hw = a.hardware.build()?;
    let cfg = SolverConfig {
        embedder: match a.embedder {
            EmbedderArg::Proposed => EmbedderKind::Proposed,
            EmbedderArg::Complete => EmbedderKind::Complete,
        },
        backend: match a.backend {
            BackendArg::Exact => BackendKind::Exact,
            BackendArg::SaEmbedded => BackendKind::SaEmbedded,
            BackendArg::SaLogical => BackendKind::SaLogical,
        },
        iterations: a.iters,
        chain_strength: a.chain_strength,
        field_policy: match a.field_policy {
            FieldPolicyArg::Uniform => FieldPolicy::Uniform,
            FieldPolicyArg::Root => FieldPolicy::Root,
        },
        sa_schedule: SaSchedule {
            sweeps: a.sweeps,
            beta_initial: a.beta_initial,
            beta_final: a.beta_final,
            geometric: !a.linear,
        },
        seed: a.instance.gen.seed,
        complete_capacity: a.capacity,
        ..SolverConfig::default()
    };
    let traces = experiments::solve_trials(&problem, &hw, &cfg, a.trials)?;
    if let Some(dir) = &a.trace_dir {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display(), e))?;
        for (t, trace) in traces.iter().enumerate() {
            let path = dir.join(format!("trace_{t}.csv"));
            with_output(Some(&path), stdout, |w| write_trace_csv(trace, w))?;
        }
    }
    let summary = experiments::summarize(&traces);
    let trial_seeds: Vec<String> = (0..a.trials)
        .map(|t| {
            let (x, s) = experiments::trial_seeds(cfg.seed, t);
            format!("{x}/{s}")
        })
        .collect();
    with_output(a.output.out.as_deref(), stdout, |w| match a.output.format {
        Format::Json => write_json(w, argv, serde_json::json!({ "trial_seeds": trial_seeds, "summary": summary })),
        Format::Csv => {
            header(w, argv, &trial_seeds.join(","))?;
            writeln!(w, "iter,mean_e_full,mean_e_best,std_err_best,min_e_best")?;
            for r in &summary {
                writeln!(w, "{},{},{},{},{}", r.iter, r.mean_e_full, r.mean_e_best, r.std_err_best, r.min_e_best)?;
            }
            Ok(())
        }
    })?;
    if let Some(last) = summary.last() {
        let n = problem.num_vars() as f64;
        let _ = writeln!(stderr, "mean_best={} per_spin={:.4}", last.mean_e_best, last.mean_e_best / n);
    }
    Ok(())
}
