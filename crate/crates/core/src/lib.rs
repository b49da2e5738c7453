//! Federated-learning simulator with layer-wise backdoor detection.
//!
//! Modules, bottom up: [`model`] (layered parameters, a small perceptron and
//! its SGD trainer), [`data`] (loading, partitioning, poisoning), [`attack`]
//! (compromised-client behaviour), [`outlier`] (COF, MAD, geometric median),
//! [`defense`] (FLD and baseline aggregators), [`private`] (Paillier-masked
//! scoring), [`sim`] (round loop, probe, metrics) and [`oracle`] (slow
//! reference implementations).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attack;
pub mod data;
pub mod defense;
pub mod error;
pub mod model;
pub mod oracle;
pub mod outlier;
pub mod private;
pub mod seed;
pub mod sim;

pub use error::{Error, Result};
