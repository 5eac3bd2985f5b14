//! Genotype and short-haplotype calling from per-locus read counts.
//!
//! Parameters (founder haplotype frequencies and per-locus read error rates)
//! are estimated by EM over the unobserved genotypes of each family, and calls
//! are posterior modes. Relatedness enters through IBD configuration classes;
//! linkage disequilibrium enters through joint haplotype models of nearby SNPs.

pub mod caller;
pub mod cli;
pub mod em;
pub mod error;
pub mod evaluation;
pub mod genotype;
pub mod io;
pub mod math;
pub mod pedigree;
pub mod read_model;
pub mod rng;
pub mod simulator;

pub use error::{Error, Result};
pub use genotype::{Diplotype, FounderFrequencies, GenotypeCode, GenotypeVector};
pub use pedigree::Relationship;
pub use read_model::{ErrorRates, ReadObservation};
