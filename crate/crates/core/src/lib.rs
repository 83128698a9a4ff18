//! Identification of mixtures of product distributions over binary
//! observables from their multilinear moments.
//!
//! A model has `k` latent components with weights `pi` and an `n x k` matrix
//! `m` of conditional means. [`identify::identify`] recovers `(pi, m)` from
//! exact or estimated moments by diagonalizing a pencil of moment matrices;
//! [`identify::identify_search`] additionally searches over observable
//! partitions. [`hadamard`] certifies the conditioning that makes this work,
//! and [`adversarial`] builds instances where it provably cannot.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix the precision.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversarial;
pub mod error;
pub mod hadamard;
pub mod identify;
pub mod io;
pub mod linalg;
pub mod model;
pub mod moments;
pub mod sampler;
pub mod scalar;

pub use error::{Error, Result};
pub use identify::{extend_to_all_observables, identify, identify_search, IdentifyOptions};
pub use model::{model_distance, random_model, stat_distance, validate_membership};
pub use moments::{
    assemble_pair_matrices, empirical_moments, exact_moments, BinarySamples, Provenance, SubsetPartition,
};
pub use sampler::{draw_samples, SampleBatch};
pub use scalar::Scalar;

pub type MixtureModel = model::MixtureModel<f64>;
pub type MixtureModel32 = model::MixtureModel<f32>;
pub type ModelClassParams = model::ModelClassParams<f64>;
pub type ModelClassParams32 = model::ModelClassParams<f32>;
pub type MomentVector = moments::MomentVector<f64>;
pub type MomentVector32 = moments::MomentVector<f32>;
pub type PairMatrices = moments::PairMatrices<f64>;
pub type PairMatrices32 = moments::PairMatrices<f32>;
pub type HadamardExtension = hadamard::HadamardExtension<f64>;
pub type HadamardExtension32 = hadamard::HadamardExtension<f32>;
pub type SvdResult = linalg::SvdResult<f64>;
pub type SvdResult32 = linalg::SvdResult<f32>;
pub type EigResult = linalg::EigResult<f64>;
pub type EigResult32 = linalg::EigResult<f32>;
pub type IdentificationResult = identify::IdentificationResult<f64>;
pub type IdentificationResult32 = identify::IdentificationResult<f32>;
pub type AdversarialPair = adversarial::AdversarialPair<f64>;
pub type AdversarialPair32 = adversarial::AdversarialPair<f32>;
