//! Spectral learning and inference for hidden Markov models whose emission
//! densities are smooth nonparametric functions on `[0, 1]`.
//!
//! The crate is layered bottom-up:
//!
//! * [`cheb`]: adaptive Chebyshev approximation of univariate functions.
//! * [`qcmat`]: quasimatrices (tuples of functions) and low-rank continuous
//!   matrices (bivariate functions), with QR, SVD, pseudoinverses and norms.
//! * [`kde`]: product-kernel density estimation in one to three dimensions
//!   with cross-validated bandwidths, converted into the continuous types.
//! * [`spectral`]: learning the observable representation `(b1, binf, B(.))`
//!   from observation triples, and joint/conditional density inference.
//! * [`hmm`]: ground-truth models: sampling, exact forward densities, exact
//!   population moments and the exact observable representation.
//! * [`perturbation`]: numerical verification of singular-value and
//!   pseudoinverse perturbation bounds, with a dense-grid SVD oracle.
//!
//! ```
//! use nphmm::hmm::random_model;
//! use nphmm::spectral::{self, BandwidthConfig, Bandwidths, LearnConfig, TripleSet};
//!
//! // Two hidden states, 400 observation triples, fixed bandwidths.
//! let model = random_model(2, 5)?;
//! let data = TripleSet::from_sequences(&model.sample(3, 400, 1)?)?;
//! let cfg = LearnConfig {
//!     bandwidths: BandwidthConfig::Fixed(Bandwidths { h1: 0.09, h21: 0.11, h321: 0.13 }),
//!     ..LearnConfig::default()
//! };
//! let learned = spectral::learn(&data, 2, &cfg)?;
//!
//! let joint = spectral::joint_density(&learned.rep, &[0.3, 0.62, 0.5])?;
//! assert!(joint.is_finite() && joint >= 0.0);
//! # Ok::<(), nphmm::Error>(())
//! ```

pub mod cheb;
pub mod error;
pub mod hmm;
pub mod kde;
pub mod perturbation;
pub mod qcmat;
pub mod spectral;

pub use error::{Error, Result};
