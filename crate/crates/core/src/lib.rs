//! Principal causal effect estimation under principal ignorability.
//!
//! A binary treatment `Z` affects a binary intermediate `S` and an outcome `Y`.
//! Units fall into principal strata by their joint potential values of `S`:
//! `10` (compliers), `00` (never-takers) and `11` (always-takers). This crate
//! estimates the average effect of `Z` on `Y` within each stratum from three
//! working models (treatment probability, principal score, outcome mean),
//! with weighting, regression and triply robust estimators, balance
//! diagnostics, a sensitivity analysis, bootstrap intervals and a
//! simulation harness.

pub mod balancing;
pub mod data;
pub mod error;
pub mod estimators;
pub mod exec;
pub mod glm;
pub mod inference;
pub mod sensitivity;
pub mod simulation;

#[cfg(test)]
mod testutil;

pub use data::{Dataset, Stratum, StratumMap, Unit};
pub use error::{Error, Result};
pub use estimators::{EstimatorKind, EstimatorOptions, PceEstimate};
pub use glm::{fit_nuisance, FitOptions, NuisanceFit, NuisanceSpec};
