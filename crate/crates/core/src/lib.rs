//! Optimal matching and verification strategies over noisily classified
//! covariates.
//!
//! The model: probe and gallery items share a discrete covariate (gender
//! being the canonical example), but the covariate is only available through
//! noisy classifiers — a probe-side channel and a gallery-side channel over
//! the same label set. This crate computes exact error rates and optimal
//! decision rules for two tasks built on nothing but those noisy labels:
//!
//! - **1-of-N retrieval** ([`retrieval`]): a gallery holds N items, exactly
//!   one matching the probe. A policy reads the noisy probe label, commits
//!   to a target value, and picks uniformly among gallery items observed
//!   with that value. The optimal policy is the per-observation argmax and
//!   both its error and the error of arbitrary stochastic policies have
//!   closed forms, cross-checked by an exhaustive enumeration oracle.
//! - **Verification** ([`verification`]): accept or reject a single
//!   (probe, gallery) pair as the same subject. The equal-error-rate
//!   minimizing stochastic acceptance rule is a continuous knapsack, solved
//!   exactly by greedy ratio ordering and cross-checked by a constrained
//!   grid search.
//!
//! The [`gender`] module carries the closed forms for the 50/50 binary case,
//! and [`sim`] provides reproducible chunked Monte Carlo for all of it.
//!
//! ```
//! use covmatch_core::gender::{self, GenderErrorRates};
//! use covmatch_core::{retrieval, verification};
//!
//! let model = gender::gender_model(GenderErrorRates::new(0.0, 0.0).unwrap());
//! let answer = retrieval::optimal_policy(&model, 2).unwrap();
//! assert_eq!(answer.overall_error, 0.25);
//!
//! let eer = verification::optimal_eer(&model);
//! assert!((eer.eer - 1.0 / 3.0).abs() < 1e-12);
//! ```

pub mod error;
pub mod gender;
pub mod prob;
pub mod retrieval;
pub mod sim;
pub mod verification;

pub use error::{Error, Result};
pub use prob::{Channel, CovariateSpace, Distribution, WorldModel};
