//! Pool-based sequential active learning for random-feature multiple kernel
//! regression.
//!
//! A dictionary of Gaussian kernels is approximated with random Fourier
//! features ([`rff`]). Each kernel carries a linear model trained by SGD
//! ([`kernel_model`]), and an exponential-weights rule turns the kernels'
//! running losses into a reliability PMF ([`ensemble`]). At every step the
//! loop ([`active_loop`]) queries the unlabeled sample that maximizes a
//! selection criterion ([`criteria`]): expected kernel discrepancy (EKD),
//! expected kernel loss (EKL), or the QBC, EMC and random baselines. After
//! the budget is spent the final predictor is either the online ensemble or a
//! least-squares refit on the labeled set ([`batch_solver`]).
//!
//! ```
//! use std::sync::Arc;
//! use mkl_active::active_loop::{run, LoopSettings};
//! use mkl_active::criteria::CriterionKind;
//! use mkl_active::data::{synthetic, SyntheticKind};
//! use mkl_active::rff::build_dictionary;
//! use mkl_active::seeding::rng_from_seed;
//!
//! let data = synthetic(&SyntheticKind::Sinc, 200, 1, 0.05, 1)?;
//! let maps: Vec<_> = build_dictionary(10, 1, 50, 7)?.into_iter().map(Arc::new).collect();
//! let settings = LoopSettings {
//!     criterion: CriterionKind::Ekd,
//!     budget: 40,
//!     eta_l: 0.05,
//!     eta_g: 1.0,
//!     cache_features: true,
//! };
//! let outcome = run(&data, &maps, &settings, &mut rng_from_seed(3))?;
//! assert_eq!(outcome.pool.labeled().len(), 40);
//! # Ok::<(), mkl_active::Error>(())
//! ```

pub mod active_loop;
pub mod batch_solver;
pub mod bench;
pub mod criteria;
pub mod data;
pub mod ensemble;
mod error;
pub mod kernel_model;
pub mod rff;
pub mod seeding;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/random-features.md")]
    mod random_features {}
    #[doc = include_str!("../../../book/src/kernel-models.md")]
    mod kernel_models {}
    #[doc = include_str!("../../../book/src/selection-criteria.md")]
    mod selection_criteria {}
    #[doc = include_str!("../../../book/src/active-loop.md")]
    mod active_loop {}
    #[doc = include_str!("../../../book/src/inference.md")]
    mod inference {}
    #[doc = include_str!("../../../book/src/benchmark-cli.md")]
    mod benchmark_cli {}
}
