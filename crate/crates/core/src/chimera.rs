//! Chimera hardware graphs.
//!
//! A Chimera graph is an `M x N` grid of complete bipartite `K_{L,L}` unit cells.
//! Qubit ids are assigned in row-major cell order; inside a cell the `L` left-shore
//! qubits come first, then the `L` right-shore qubits:
//!
//! ```text
//! id = (row * N + col) * 2L + shore_offset + k,   shore_offset = 0 (left) or L (right)
//! ```
//!
//! Left-shore qubit `k` couples to left-shore qubit `k` of the cells above and below.
//! Right-shore qubit `k` couples to right-shore qubit `k` of the cells to the left and
//! right.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::Qubit;

/// Grid dimensions of a Chimera graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChimeraSpec {
    /// Cell rows (`M`).
    pub rows: usize,
    /// Cell columns (`N`).
    pub cols: usize,
    /// Shore size (`L`).
    pub shore: usize,
}

impl ChimeraSpec {
    pub fn new(rows: usize, cols: usize, shore: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || shore == 0 {
            return Err(invalid!("chimera dimensions must be >= 1, got {rows}x{cols}x{shore}"));
        }
        Ok(Self { rows, cols, shore })
    }

    /// Qubit count of the defect-free graph, `2MNL`.
    pub fn num_qubits(&self) -> usize {
        2 * self.rows * self.cols * self.shore
    }

    /// Edge count of the defect-free graph.
    pub fn num_edges(&self) -> usize {
        let (m, n, l) = (self.rows, self.cols, self.shore);
        m * n * l * l + l * (m - 1) * n + l * m * (n - 1)
    }

    pub fn num_cells(&self) -> usize {
        self.rows * self.cols
    }

    pub fn cell_index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn qubit(&self, row: usize, col: usize, shore: Shore, k: usize) -> Qubit {
        debug_assert!(row < self.rows && col < self.cols && k < self.shore);
        let offset = match shore {
            Shore::Left => 0,
            Shore::Right => self.shore,
        };
        self.cell_index(row, col) * 2 * self.shore + offset + k
    }

    /// `(row, col, shore, k)` coordinates of a qubit id.
    pub fn coords(&self, q: Qubit) -> (usize, usize, Shore, usize) {
        let l = self.shore;
        let cell = q / (2 * l);
        let within = q % (2 * l);
        let (shore, k) = if within < l { (Shore::Left, within) } else { (Shore::Right, within - l) };
        (cell / self.cols, cell % self.cols, shore, k)
    }

    pub fn cell_of(&self, q: Qubit) -> usize {
        q / (2 * self.shore)
    }
}

/// Side of the bipartite unit cell a qubit sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shore {
    /// Couples vertically to neighbouring cells.
    Left,
    /// Couples horizontally to neighbouring cells.
    Right,
}

/// A Chimera graph with optional qubit and coupler defects.
///
/// Immutable after construction. Absent (defect) qubits keep their id but have no
/// incident edges and report `false` from [`HardwareGraph::is_present`].
#[derive(Debug, Clone, PartialEq)]
pub struct HardwareGraph {
    spec: ChimeraSpec,
    present: Vec<bool>,
    adjacency: Vec<Vec<Qubit>>,
    defect_qubits: BTreeSet<Qubit>,
    defect_edges: BTreeSet<(Qubit, Qubit)>,
    num_edges: usize,
}

impl HardwareGraph {
    /// Defect-free Chimera graph.
    pub fn chimera(spec: ChimeraSpec) -> Self {
        Self::build(spec, &BTreeSet::new(), &BTreeSet::new()).expect("no defects to validate")
    }

    /// Build a Chimera graph and remove the given defects.
    ///
    /// Removing a qubit removes its incident edges. Defect edges are given as
    /// unordered pairs and must be couplers of the defect-free graph.
    pub fn build(
        spec: ChimeraSpec,
        defect_qubits: &BTreeSet<Qubit>,
        defect_edges: &BTreeSet<(Qubit, Qubit)>,
    ) -> Result<Self> {
        ChimeraSpec::new(spec.rows, spec.cols, spec.shore)?;
        let nq = spec.num_qubits();
        if let Some(&q) = defect_qubits.iter().find(|&&q| q >= nq) {
            return Err(invalid!("defect qubit {q} out of range for {nq} qubits"));
        }
        let mut adjacency = vec![Vec::new(); nq];
        for (a, b) in full_edges(&spec) {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        let mut edges_norm = BTreeSet::new();
        for &(a, b) in defect_edges {
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            if b >= nq || !adjacency[a].contains(&b) {
                return Err(invalid!("defect edge ({a}, {b}) is not a coupler of the graph"));
            }
            edges_norm.insert((a, b));
        }
        let mut present = vec![true; nq];
        for &q in defect_qubits {
            present[q] = false;
        }
        for (q, nbrs) in adjacency.iter_mut().enumerate() {
            if !present[q] {
                nbrs.clear();
                continue;
            }
            nbrs.retain(|&w| {
                let key = if q < w { (q, w) } else { (w, q) };
                present[w] && !edges_norm.contains(&key)
            });
            nbrs.sort_unstable();
        }
        let num_edges = adjacency.iter().map(Vec::len).sum::<usize>() / 2;
        Ok(Self {
            spec,
            present,
            adjacency,
            defect_qubits: defect_qubits.clone(),
            defect_edges: edges_norm,
            num_edges,
        })
    }

    pub fn spec(&self) -> &ChimeraSpec {
        &self.spec
    }

    /// Size of the qubit id space (`2MNL`), including defect qubits.
    pub fn num_qubit_ids(&self) -> usize {
        self.present.len()
    }

    /// Number of operable qubits.
    pub fn num_qubits(&self) -> usize {
        self.present.len() - self.defect_qubits.len()
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn is_present(&self, q: Qubit) -> bool {
        self.present.get(q).copied().unwrap_or(false)
    }

    /// Sorted neighbours of `q`; empty for defect or out-of-range ids.
    pub fn neighbors(&self, q: Qubit) -> &[Qubit] {
        self.adjacency.get(q).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn has_edge(&self, a: Qubit, b: Qubit) -> bool {
        self.neighbors(a).binary_search(&b).is_ok()
    }

    pub fn degree(&self, q: Qubit) -> usize {
        self.neighbors(q).len()
    }

    pub fn defect_qubits(&self) -> &BTreeSet<Qubit> {
        &self.defect_qubits
    }

    pub fn defect_edges(&self) -> &BTreeSet<(Qubit, Qubit)> {
        &self.defect_edges
    }

    pub fn is_defect_free(&self) -> bool {
        self.defect_qubits.is_empty() && self.defect_edges.is_empty()
    }

    /// Present qubits in id order.
    pub fn qubits(&self) -> impl Iterator<Item = Qubit> + '_ {
        (0..self.present.len()).filter(move |&q| self.present[q])
    }

    /// Edges as `(a, b)` with `a < b`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (Qubit, Qubit)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, nbrs)| nbrs.iter().filter(move |&&b| a < b).map(move |&b| (a, b)))
    }

    /// Cells sharing a coupler with `cell` (up to four).
    pub fn adjacent_cells(&self, cell: usize) -> impl Iterator<Item = usize> {
        let (m, n) = (self.spec.rows, self.spec.cols);
        let (r, c) = (cell / n, cell % n);
        let up = (r > 0).then(|| cell - n);
        let down = (r + 1 < m).then(|| cell + n);
        let left = (c > 0).then(|| cell - 1);
        let right = (c + 1 < n).then(|| cell + 1);
        [up, down, left, right].into_iter().flatten()
    }
    /// Cells within one row and one column of `cell`, diagonals included, and
    /// `cell` itself.
    pub fn surrounding_cells(&self, cell: usize) -> impl Iterator<Item = usize> {
        let (m, n) = (self.spec.rows, self.spec.cols);
        let (r, c) = (cell / n, cell % n);
        let rows = r.saturating_sub(1)..(r + 2).min(m);
        rows.flat_map(move |rr| (c.saturating_sub(1)..(c + 2).min(n)).map(move |cc| rr * n + cc))
    }
}

fn full_edges(spec: &ChimeraSpec) -> Vec<(Qubit, Qubit)> {
    let (m, n, l) = (spec.rows, spec.cols, spec.shore);
    let mut edges = Vec::with_capacity(spec.num_edges());
    for r in 0..m {
        for c in 0..n {
            for i in 0..l {
                let left = spec.qubit(r, c, Shore::Left, i);
                for j in 0..l {
                    edges.push((left, spec.qubit(r, c, Shore::Right, j)));
                }
                if r + 1 < m {
                    edges.push((left, spec.qubit(r + 1, c, Shore::Left, i)));
                }
                if c + 1 < n {
                    edges.push((spec.qubit(r, c, Shore::Right, i), spec.qubit(r, c + 1, Shore::Right, i)));
                }
            }
        }
    }
    edges
}
