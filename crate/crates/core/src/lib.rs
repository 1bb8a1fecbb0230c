//! Cooperative data exchange with monetary incentives.
//!
//! `n` users each hold a subset of `k` packets and want all of them. They take turns
//! broadcasting linear combinations of the packets they hold, and pay one another for the
//! transmissions they benefit from. This crate provides:
//!
//! - [`field`]: prime-field arithmetic and subspaces in canonical form;
//! - [`instance`]: problem instances, coalitions, the instance file format and a seeded
//!   generator;
//! - [`rate_region`]: cut-set feasibility and the exhaustive minimum sum-rate oracle;
//! - [`mechanism`]: the round-based peer-payment and broker mechanisms, their transcripts
//!   and a replay verifier;
//! - [`economics`]: exact-rational payments, utilities, and rationality, stability and
//!   optimality certificates.
//!
//! ```
//! use cde_core::economics::check_optimality;
//! use cde_core::instance::Instance;
//! use cde_core::mechanism::{run, MechanismConfig, Variant};
//!
//! let triangle = Instance::parse(r#"{"n":3,"k":3,"q":11,"holdings":[[1,2],[2,3],[1,3]]}"#).unwrap();
//! let out = run(&triangle, &MechanismConfig::new(Variant::Broker)).unwrap();
//! assert_eq!(out.rates.rates(), [1, 1, 0]);
//! assert!(check_optimality(&triangle, &out.rates, &out.payments).unwrap().optimal);
//! ```

pub mod economics;
pub mod field;
pub mod instance;
pub mod mechanism;
pub mod rate_region;
