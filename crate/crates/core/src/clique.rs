//! Triangular clique embedding for defect-free Chimera graphs.
//!
//! With `m = min(M, N)`, variable `i = L * a + k` (`a < m`, `k < L`) gets the
//! left-shore qubits at position `k` of column `a`, rows `0..=a`, and the right-shore
//! qubits at position `k` of row `a`, columns `a..m`. The two runs meet in the
//! diagonal cell `(a, a)`. For `a < b` the chains of `(a, k)` and `(b, l)` meet in
//! cell `(a, b)`; chains with the same `a` meet in the diagonal cell.

use alloc::vec::Vec;

use crate::chimera::{HardwareGraph, Shore};
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::Qubit;

/// Largest clique the layout holds: `L * min(M, N)`.
pub fn capacity(hw: &HardwareGraph) -> usize {
    let spec = hw.spec();
    spec.shore * spec.rows.min(spec.cols)
}

/// Qubits used by the layout for `n` variables: every chain has `min(M, N) + 1` qubits.
pub fn qubits_used(hw: &HardwareGraph, n: usize) -> usize {
    n * (hw.spec().rows.min(hw.spec().cols) + 1)
}

/// Embedding of `K_n` with variables `0..n`.
pub fn embed_complete(n: usize, hw: &HardwareGraph) -> Result<Embedding> {
    if !hw.is_defect_free() {
        return Err(Error::UnsupportedHardware("clique layout needs a defect-free graph".into()));
    }
    let cap = capacity(hw);
    if n > cap {
        return Err(Error::CapacityExceeded { requested: n, capacity: cap });
    }
    let spec = *hw.spec();
    let m = spec.rows.min(spec.cols);
    let chains = (0..n).map(|i| {
        let (a, k) = (i / spec.shore, i % spec.shore);
        let chain: Vec<Qubit> = (0..=a)
            .map(|r| spec.qubit(r, a, Shore::Left, k))
            .chain((a..m).map(|c| spec.qubit(a, c, Shore::Right, k)))
            .collect();
        (i, chain)
    });
    Ok(Embedding::from_chains(chains))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chimera::ChimeraSpec;
    use crate::embedding::{chain_stats, verify_embedding};
    use crate::problem::complete;
    use alloc::collections::BTreeSet;
    use alloc::vec::Vec;

    fn hw(m: usize, n: usize, l: usize) -> HardwareGraph {
        HardwareGraph::chimera(ChimeraSpec::new(m, n, l).unwrap())
    }

    #[test]
    fn single_cell_k4() {
        let g = hw(1, 1, 4);
        let emb = embed_complete(4, &g).unwrap();
        assert!(emb.chains().values().all(|c| c.len() == 2));
        let all: Vec<usize> = (0..4).collect();
        assert!(verify_embedding(&complete(4).unwrap(), &all, &g, &emb).is_valid());
    }

    #[test]
    fn device_capacity() {
        let g = hw(16, 16, 4);
        assert_eq!(capacity(&g), 64);
        let emb = embed_complete(64, &g).unwrap();
        let all: Vec<usize> = (0..64).collect();
        assert!(verify_embedding(&complete(64).unwrap(), &all, &g, &emb).is_valid());
        assert!(chain_stats(&emb).max_len <= 17);
        assert_eq!(emb.num_qubits(), qubits_used(&g, 64));
        assert_eq!(embed_complete(65, &g), Err(Error::CapacityExceeded { requested: 65, capacity: 64 }));
    }

    #[test]
    fn rejects_defects() {
        let spec = ChimeraSpec::new(2, 2, 2).unwrap();
        let g = HardwareGraph::build(spec, &BTreeSet::from([0]), &BTreeSet::new()).unwrap();
        assert!(matches!(embed_complete(2, &g), Err(Error::UnsupportedHardware(_))));
    }

    #[test]
    fn every_size_is_valid_and_deterministic() {
        for (m, n, l) in [(1, 1, 1), (2, 3, 2), (3, 2, 3), (4, 4, 4), (5, 3, 1)] {
            let g = hw(m, n, l);
            for size in 1..=capacity(&g) {
                let emb = embed_complete(size, &g).unwrap();
                let all: Vec<usize> = (0..size).collect();
                let report = verify_embedding(&complete(size).unwrap(), &all, &g, &emb);
                assert!(report.is_valid(), "{m}x{n}x{l} n={size}: {:?}", report.violations);
                assert_eq!(emb.num_qubits(), qubits_used(&g, size));
                assert!(chain_stats(&emb).max_len <= m.min(n) + 1);
                assert_eq!(emb, embed_complete(size, &g).unwrap());
            }
        }
    }
}
