//! Instance and hardware descriptors accepted on the command line.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::str::FromStr;

use chimera_embed::problem::{complete, cubic_pm_j, erdos_renyi, grid2d};
use chimera_embed::{rng, Boundary, ChimeraSpec, HardwareGraph, ProblemGraph};
use rand::seq::index::sample;

use crate::io::{read_hardware, read_problem};
use crate::CliError;

/// `grid:WxH`, `complete:N`, `cubic:XxYxZ`, `er:N:P` or `file:PATH`.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Grid { width: usize, height: usize },
    Complete { n: usize },
    Cubic { dims: [usize; 3] },
    ErdosRenyi { n: usize, p_bond: f64 },
    File(PathBuf),
}

/// Parameters shared by the random generators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenParams {
    /// Probability of an antiferromagnetic (+J) bond in cubic instances.
    pub p_f: f64,
    pub j: f64,
    pub boundary: Boundary,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self { p_f: 0.5, j: 1.0, boundary: Boundary::Periodic, seed: 0 }
    }
}

fn dims<const K: usize>(s: &str) -> Option<[usize; K]> {
    let parts: Vec<usize> = s.split('x').map(str::parse).collect::<Result<_, _>>().ok()?;
    parts.try_into().ok()
}

impl FromStr for ProblemSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("unrecognised problem {s:?}; expected grid:WxH, complete:N, cubic:XxYxZ, er:N:P or file:PATH");
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        Ok(match kind {
            "grid" => {
                let [width, height] = dims(rest).ok_or_else(bad)?;
                Self::Grid { width, height }
            }
            "complete" => Self::Complete { n: rest.parse().map_err(|_| bad())? },
            "cubic" => Self::Cubic { dims: dims(rest).ok_or_else(bad)? },
            "er" => {
                let (n, p) = rest.split_once(':').ok_or_else(bad)?;
                Self::ErdosRenyi { n: n.parse().map_err(|_| bad())?, p_bond: p.parse().map_err(|_| bad())? }
            }
            "file" => Self::File(PathBuf::from(rest)),
            _ => return Err(bad()),
        })
    }
}

impl fmt::Display for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Grid { width, height } => write!(f, "grid:{width}x{height}"),
            Self::Complete { n } => write!(f, "complete:{n}"),
            Self::Cubic { dims: [x, y, z] } => write!(f, "cubic:{x}x{y}x{z}"),
            Self::ErdosRenyi { n, p_bond } => write!(f, "er:{n}:{p_bond}"),
            Self::File(path) => write!(f, "file:{}", path.display()),
        }
    }
}

impl ProblemSpec {
    pub fn build(&self, params: &GenParams) -> Result<ProblemGraph, CliError> {
        let p = match *self {
            Self::Grid { width, height } => grid2d(width, height)?,
            Self::Complete { n } => complete(n)?,
            Self::Cubic { dims } => cubic_pm_j(dims, params.p_f, params.j, params.boundary, params.seed)?,
            Self::ErdosRenyi { n, p_bond } => erdos_renyi(n, p_bond, params.seed)?,
            Self::File(ref path) => {
                let file = File::open(path).map_err(|e| CliError::io(path.display(), e))?;
                read_problem(BufReader::new(file))?
            }
        };
        if p.num_vars() == 0 {
            return Err(CliError::Usage("problem has no variables".into()));
        }
        Ok(p)
    }
}

/// `MxNxL` Chimera dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChimeraDims(pub ChimeraSpec);

impl FromStr for ChimeraDims {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let [m, n, l] = dims(s).ok_or_else(|| format!("expected MxNxL, got {s:?}"))?;
        ChimeraSpec::new(m, n, l).map(Self).map_err(|e| e.to_string())
    }
}

impl fmt::Display for ChimeraDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.0.rows, self.0.cols, self.0.shore)
    }
}

/// Chimera graph with `round(rate * qubits)` qubits removed uniformly at random.
pub fn with_random_defects(spec: ChimeraSpec, rate: f64, seed: u64) -> Result<HardwareGraph, CliError> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(CliError::Usage(format!("defect rate must lie in [0, 1], got {rate}")));
    }
    let nq = spec.num_qubits();
    let count = (rate * nq as f64).round() as usize;
    let qubits: BTreeSet<usize> = sample(&mut rng::from_seed(seed), nq, count).into_iter().collect();
    Ok(HardwareGraph::build(spec, &qubits, &BTreeSet::new())?)
}

pub fn load_hardware(path: &PathBuf) -> Result<HardwareGraph, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path.display(), e))?;
    Ok(read_hardware(BufReader::new(file))?)
}
