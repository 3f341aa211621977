//! λ-policy iteration with randomization (λ-PIR) for contractive
//! dynamic-programming models.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every algorithmic
//! piece: the abstract operator family `T_μ`, `T`, `T_μ^(w)`, `T_μ^(λ)`
//! over weighted sup-norm spaces, the tabular MDP instantiation with its
//! closed-form λ-operator, exact solvers (VI, PI, OPI, λ-PIR), the
//! data-driven trainer for quadratic value functions, and the constrained
//! control benchmarks used to exercise it.
//!
//! File formats, configuration and the command line live in the `lpir`
//! companion crate.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod approx;
pub mod control;
pub mod counterexample;
pub mod error;
mod linalg;
pub mod model;
pub mod operators;
pub mod quadratic;
pub mod rng;
pub mod solvers;
pub mod space;
pub mod tabular;

pub use error::{Error, Result};
pub use model::{AbstractModel, Policy};
pub use space::{CostTable, WeightedSpace};
