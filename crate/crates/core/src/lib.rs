//! Polynomial NARX system identification.
//!
//! The pipeline runs from excitation design ([`input_design`]) through
//! candidate generation ([`candidates`]), ERR ranking and AIC truncation
//! ([`selection`]) to least-squares estimation ([`estimation`]). Hysteretic
//! systems get input-difference regressors and exclusion rules
//! ([`hysteresis`]). [`benchmarks`] holds the reference systems and published
//! models the pipeline is checked against, and [`evaluation`] the error
//! metrics and the noise-robustness sweep.

pub mod benchmarks;
pub mod candidates;
pub mod data;
pub mod error;
pub mod estimation;
pub mod evaluation;
pub mod experiment;
pub mod filter;
pub mod hysteresis;
pub mod input_design;
pub mod model;
pub mod regression;
pub mod selection;
pub mod term;

pub use candidates::{generate_candidates, CandidateSet, ModelMeta};
pub use data::TimeSeriesData;
pub use error::{Error, Result};
pub use model::{free_run_simulate, one_step_predict, Direction, NarxModel, SimulationOptions};
pub use term::{Factor, RegressorTerm, Variable};
