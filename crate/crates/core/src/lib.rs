//! Algorithms for the 3XOR problem: given a set `X` of `n` distinct `w`-bit
//! words, find `a, b, c ∈ X` with `a ⊕ b = c`.
//!
//! - [`xortrie`]: deterministic `O(n²)` solver over an XOR-ordered Patricia trie.
//! - [`randomized`]: bucket and fingerprint solver with word-packed arrays.
//! - [`reductions`]: 3XOR via offline set disjointness / set intersection.
//! - [`instance::brute_force_solve`]: the reference every solver is checked against.
//!
//! [`solve::solve`] dispatches to any of them; [`verify`] and [`bench`] hold
//! the agreement sweep and the timing harness used by the `xor3` binary.

pub mod bench;
pub mod dict;
pub mod error;
pub mod hashing;
pub mod instance;
pub mod packed;
pub mod randomized;
pub mod reductions;
pub mod solve;
pub mod verify;
pub mod word;
pub mod xortrie;

pub use error::{Error, Result};
pub use instance::{
    brute_force_solve, count_all_solutions, generate_instance, AnyInstance, GenerateMode, RngSeed,
    SolutionTriple, TripleConvention, XorInstance,
};
pub use solve::{solve, Algo, SolveOptions};
pub use word::{BitWord, WideWord};
