//! Cache-aided wireless multi-hop device-to-device networks.
//!
//! The crate is organised bottom-up:
//!
//! - [`popularity`]: Mandelbrot-Zipf request model, generalized harmonic sums and their
//!   integral bounds.
//! - [`policy`]: outage-minimizing decentralized caching distributions (box-constrained KKT
//!   solver, the water-filling closed form and the search-limited outer policy).
//! - [`analytics`]: closed-form outage probabilities and throughput-outage curves.
//! - [`sim`]: Monte Carlo realization of the clustered multi-hop delivery scheme.
//! - [`harness`]: parameter sweeps, confidence intervals, scaling fits and CSV output.

// Negated float comparisons are used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod error;
pub mod harness;
pub mod numeric;
pub mod policy;
pub mod popularity;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
pub use policy::CachingPolicy;
pub use popularity::PopularityModel;
