//! Ising problem graphs, instance generators and energy evaluation.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::{invalid, Result};
use crate::{rng, Var};

/// Boundary condition of lattice generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    Open,
    #[default]
    Periodic,
}

/// Instance family and the parameters it was generated with.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Family {
    Cubic { dims: [usize; 3], p_f: f64, j: f64, boundary: Boundary, seed: u64 },
    Grid2d { width: usize, height: usize },
    Complete { n: usize },
    ErdosRenyi { n: usize, p_bond: f64, seed: u64 },
    #[default]
    Custom,
}

/// An Ising problem `H(x) = sum_{i<j} J_ij x_i x_j + sum_i h_i x_i`.
///
/// Immutable after construction. Couplings are keyed by `(i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemGraph {
    n: usize,
    couplings: BTreeMap<(Var, Var), f64>,
    fields: Vec<f64>,
    adjacency: Vec<Vec<(Var, f64)>>,
    family: Family,
}

impl ProblemGraph {
    /// Build a problem from couplings and (dense) fields.
    ///
    /// Coupling endpoints may be given in either order; self-couplings, duplicate
    /// pairs, out-of-range indices and non-finite values are rejected.
    pub fn new(
        n: usize,
        couplings: impl IntoIterator<Item = ((Var, Var), f64)>,
        fields: Vec<f64>,
    ) -> Result<Self> {
        if fields.len() != n {
            return Err(invalid!("expected {n} fields, got {}", fields.len()));
        }
        if let Some(i) = fields.iter().position(|h| !h.is_finite()) {
            return Err(invalid!("field {i} is not finite"));
        }
        let mut map = BTreeMap::new();
        for ((a, b), value) in couplings {
            if a == b {
                return Err(invalid!("self-coupling on variable {a}"));
            }
            if a >= n || b >= n {
                return Err(invalid!("coupling ({a}, {b}) out of range for {n} variables"));
            }
            if !value.is_finite() {
                return Err(invalid!("coupling ({a}, {b}) is not finite"));
            }
            let key = (a.min(b), a.max(b));
            if map.insert(key, value).is_some() {
                return Err(invalid!("duplicate coupling ({}, {})", key.0, key.1));
            }
        }
        Ok(Self::from_parts(n, map, fields, Family::Custom))
    }

    fn from_parts(n: usize, couplings: BTreeMap<(Var, Var), f64>, fields: Vec<f64>, family: Family) -> Self {
        let mut adjacency = vec![Vec::new(); n];
        for (&(a, b), &value) in &couplings {
            adjacency[a].push((b, value));
            adjacency[b].push((a, value));
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable_by_key(|&(v, _)| v);
        }
        Self { n, couplings, fields, adjacency, family }
    }

    /// Same problem tagged with a different family.
    pub fn with_family(mut self, family: Family) -> Self {
        self.family = family;
        self
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.couplings.len()
    }

    pub fn couplings(&self) -> &BTreeMap<(Var, Var), f64> {
        &self.couplings
    }

    pub fn coupling(&self, a: Var, b: Var) -> Option<f64> {
        self.couplings.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    pub fn field(&self, v: Var) -> f64 {
        self.fields[v]
    }

    /// Neighbours of `v` with their couplings, sorted by neighbour index.
    pub fn neighbors(&self, v: Var) -> &[(Var, f64)] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: Var) -> usize {
        self.adjacency[v].len()
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// `h_v + sum_j J_vj x_j`; flipping `v` changes the energy by `-2 x_v` times this.
    pub fn local_field(&self, v: Var, x: &Assignment) -> f64 {
        self.fields[v] + self.adjacency[v].iter().map(|&(w, j)| j * f64::from(x.0[w])).sum::<f64>()
    }

    /// Energy change caused by flipping `v`.
    pub fn flip_delta(&self, v: Var, x: &Assignment) -> f64 {
        -2.0 * f64::from(x.0[v]) * self.local_field(v, x)
    }

    /// Problem induced on `vars`, relabelled `0..vars.len()` in the given order.
    /// Fields are copied unchanged; couplings leaving the set are dropped.
    pub fn induced(&self, vars: &[Var]) -> Result<Self> {
        let mut local = BTreeMap::new();
        for (i, &v) in vars.iter().enumerate() {
            if v >= self.n {
                return Err(invalid!("variable {v} out of range"));
            }
            if local.insert(v, i).is_some() {
                return Err(invalid!("variable {v} listed twice"));
            }
        }
        let mut couplings = BTreeMap::new();
        for (i, &v) in vars.iter().enumerate() {
            for &(w, j) in &self.adjacency[v] {
                if let Some(&k) = local.get(&w) {
                    if i < k {
                        couplings.insert((i, k), j);
                    }
                }
            }
        }
        let fields = vars.iter().map(|&v| self.fields[v]).collect();
        Ok(Self::from_parts(vars.len(), couplings, fields, Family::Custom))
    }

    /// Sum of `|J_ij|` and `|h_i|` over the whole problem.
    pub fn abs_weight(&self) -> f64 {
        self.couplings.values().map(|j| j.abs()).sum::<f64>() + self.fields.iter().map(|h| h.abs()).sum::<f64>()
    }
}

/// A spin configuration, one `+1`/`-1` entry per variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment(Vec<i8>);

impl Assignment {
    pub fn new(values: Vec<i8>) -> Result<Self> {
        if let Some(i) = values.iter().position(|&s| s != 1 && s != -1) {
            return Err(invalid!("spin {i} is {}, expected +1 or -1", values[i]));
        }
        Ok(Self(values))
    }

    /// Every spin set to `spin` (normalised to its sign).
    pub fn uniform(n: usize, spin: i8) -> Self {
        Self(vec![if spin < 0 { -1 } else { 1 }; n])
    }

    pub fn random(n: usize, seed: u64) -> Self {
        let mut rng = rng::from_seed(seed);
        Self((0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, v: Var) -> i8 {
        self.0[v]
    }

    pub fn set(&mut self, v: Var, spin: i8) {
        self.0[v] = if spin < 0 { -1 } else { 1 };
    }

    pub fn flip(&mut self, v: Var) {
        self.0[v] = -self.0[v];
    }

    pub fn values(&self) -> &[i8] {
        &self.0
    }

    pub fn into_values(self) -> Vec<i8> {
        self.0
    }

    /// Global spin reversal.
    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|&s| -s).collect())
    }
}

/// `sum J_ij x_i x_j + sum h_i x_i`.
pub fn energy(problem: &ProblemGraph, x: &Assignment) -> Result<f64> {
    if x.len() != problem.n {
        return Err(invalid!("assignment has {} spins, problem has {} variables", x.len(), problem.n));
    }
    Ok(energy_unchecked(problem, x.values()))
}

pub(crate) fn energy_unchecked(problem: &ProblemGraph, x: &[i8]) -> f64 {
    let pair: f64 = problem
        .couplings
        .iter()
        .map(|(&(a, b), &j)| j * f64::from(x[a] * x[b]))
        .sum();
    let field: f64 = problem.fields.iter().zip(x).map(|(h, &s)| h * f64::from(s)).sum();
    pair + field
}

/// Nearest-neighbour `+-J` model on an `lx x ly x lz` cubic lattice.
///
/// Each coupling is `+j` with probability `p_f` and `-j` otherwise. Site `(x, y, z)`
/// has index `x + lx * (y + ly * z)`. With periodic boundaries a wrap-around bond
/// is added along every axis longer than two sites (for length two it would repeat
/// the open bond).
pub fn cubic_pm_j(dims: [usize; 3], p_f: f64, j: f64, boundary: Boundary, seed: u64) -> Result<ProblemGraph> {
    if !(0.0..=1.0).contains(&p_f) {
        return Err(invalid!("p_F must be in [0, 1], got {p_f}"));
    }
    if !(j.is_finite() && j > 0.0) {
        return Err(invalid!("J must be positive, got {j}"));
    }
    let min = if boundary == Boundary::Periodic { 2 } else { 1 };
    if dims.iter().any(|&d| d < min) {
        return Err(invalid!("lattice dimensions {dims:?} too small for {boundary:?} boundaries"));
    }
    let [lx, ly, lz] = dims;
    let index = |x: usize, y: usize, z: usize| x + lx * (y + ly * z);
    let mut rng = rng::from_seed(seed);
    let mut couplings = BTreeMap::new();
    for z in 0..lz {
        for y in 0..ly {
            for x in 0..lx {
                let site = index(x, y, z);
                let step = |c: usize, len: usize| -> Option<usize> {
                    if c + 1 < len {
                        Some(c + 1)
                    } else if boundary == Boundary::Periodic && len > 2 {
                        Some(0)
                    } else {
                        None
                    }
                };
                let nbrs = [
                    step(x, lx).map(|nx| index(nx, y, z)),
                    step(y, ly).map(|ny| index(x, ny, z)),
                    step(z, lz).map(|nz| index(x, y, nz)),
                ];
                for other in nbrs.into_iter().flatten() {
                    let value = if rng.gen_bool(p_f) { j } else { -j };
                    couplings.insert((site.min(other), site.max(other)), value);
                }
            }
        }
    }
    let n = lx * ly * lz;
    Ok(ProblemGraph::from_parts(n, couplings, vec![0.0; n], Family::Cubic { dims, p_f, j, boundary, seed }))
}

/// Open-boundary `width x height` grid with all couplings `-1`. Site `(x, y)` has
/// index `x + width * y`.
pub fn grid2d(width: usize, height: usize) -> Result<ProblemGraph> {
    if width == 0 || height == 0 {
        return Err(invalid!("grid dimensions must be >= 1"));
    }
    let mut couplings = BTreeMap::new();
    for y in 0..height {
        for x in 0..width {
            let site = x + width * y;
            if x + 1 < width {
                couplings.insert((site, site + 1), -1.0);
            }
            if y + 1 < height {
                couplings.insert((site, site + width), -1.0);
            }
        }
    }
    let n = width * height;
    Ok(ProblemGraph::from_parts(n, couplings, vec![0.0; n], Family::Grid2d { width, height }))
}

/// Complete graph `K_n` with unit couplings.
pub fn complete(n: usize) -> Result<ProblemGraph> {
    if n == 0 {
        return Err(invalid!("complete graph needs n >= 1"));
    }
    let couplings = (0..n).flat_map(|a| ((a + 1)..n).map(move |b| ((a, b), 1.0))).collect();
    Ok(ProblemGraph::from_parts(n, couplings, vec![0.0; n], Family::Complete { n }))
}

/// Erdős–Rényi `G(n, p)` with couplings `+1`/`-1` drawn with equal probability.
pub fn erdos_renyi(n: usize, p_bond: f64, seed: u64) -> Result<ProblemGraph> {
    if !(0.0..=1.0).contains(&p_bond) {
        return Err(invalid!("p_bond must be in [0, 1], got {p_bond}"));
    }
    let mut rng = rng::from_seed(seed);
    let mut couplings = BTreeMap::new();
    for a in 0..n {
        for b in (a + 1)..n {
            if rng.gen_bool(p_bond) {
                couplings.insert((a, b), if rng.gen::<bool>() { 1.0 } else { -1.0 });
            }
        }
    }
    Ok(ProblemGraph::from_parts(n, couplings, vec![0.0; n], Family::ErdosRenyi { n, p_bond, seed }))
}
