//! Minor embedding of Ising subproblems into Chimera hardware graphs.
//!
//! The crate contains:
//!
//! * [`chimera`]: Chimera topologies with optional defects.
//! * [`problem`]: Ising problem graphs, instance generators and energy evaluation.
//! * [`embedding`]: embeddings, validation, embedded (hardware-level) problems and decoding.
//! * [`subproblem`]: the greedy subproblem embedder with qubit reservation and
//!   breadth-first chain growth restricted to unused qubits.
//! * [`cai`]: a full-graph two-stage heuristic embedder used as a baseline.
//! * [`clique`]: the deterministic triangular clique embedding.
//! * [`solver`]: the iterative extract / embed / optimize / refine loop and its
//!   classical subproblem backends.
//!
//! Everything here is `no_std` and only needs `alloc`. File formats, the command
//! line front end and the experiment harness live in the companion `chimera-embed-cli`
//! crate.
//!
//! ```
//! use chimera_embed::embedding::verify_embedding;
//! use chimera_embed::problem::grid2d;
//! use chimera_embed::subproblem::{embed_subproblem, EmbedOptions};
//! use chimera_embed::{ChimeraSpec, HardwareGraph};
//!
//! let problem = grid2d(20, 20).unwrap();
//! let hw = HardwareGraph::chimera(ChimeraSpec::new(4, 4, 4).unwrap());
//! let res = embed_subproblem(&problem, &hw, 0, 0, &EmbedOptions::default()).unwrap();
//! assert!(res.n_sub > 1);
//! assert!(verify_embedding(&problem, &res.variables, &hw, &res.embedding).is_valid());
//! ```
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod cai;
pub mod chimera;
pub mod clique;
pub mod embedding;
mod error;
pub mod problem;
pub mod rng;
pub mod solver;
pub mod subproblem;

pub use chimera::{ChimeraSpec, HardwareGraph, Shore};
pub use embedding::{Embedding, EmbeddedProblem, ValidationReport, Violation, ViolationKind};
pub use error::{Error, Result};
pub use problem::{Assignment, Boundary, Family, ProblemGraph};

/// Index of a logical variable.
pub type Var = usize;
/// Index of a hardware qubit.
pub type Qubit = usize;
