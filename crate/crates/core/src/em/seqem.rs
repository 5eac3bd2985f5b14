//! Single-SNP EM for unrelated individuals under Hardy–Weinberg genotype frequencies.
//!
//! Coded directly on the three genotypes, independent of the configuration
//! tables used by the general engine.

use crate::error::{ensure, Result};
use crate::math::normalize_log_weights;
use crate::read_model::{genotype_log_likelihoods, ReadObservation};

use super::{relative_change, DEFAULT_INIT_ALPHA, DEFAULT_INIT_MAF, DEGENERATE_READS};

#[derive(Clone, Debug)]
pub struct SingleSnpFit {
    pub maf: f64,
    pub alpha: f64,
    pub log_likelihood_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn genotype_posteriors(obs: ReadObservation, maf: f64, alpha: f64) -> ([f64; 3], f64) {
    let q = 1.0 - maf;
    let ll = genotype_log_likelihoods(obs, alpha);
    let mut w = [
        2.0 * q.ln() + ll[0],
        2f64.ln() + maf.ln() + q.ln() + ll[1],
        2.0 * maf.ln() + ll[2],
    ];
    let lse = normalize_log_weights(&mut w);
    (w, lse)
}

pub fn single_snp_log_likelihood(reads: &[ReadObservation], maf: f64, alpha: f64) -> f64 {
    reads.iter().map(|&o| genotype_posteriors(o, maf, alpha).1).sum()
}

/// Estimates `(p, α)` from one SNP's reads in unrelated individuals.
pub fn fit_unrelated_single_snp(reads: &[ReadObservation], tol: f64, max_iter: usize) -> Result<SingleSnpFit> {
    ensure!(!reads.is_empty(), "cannot fit an empty sample");
    let mut maf = DEFAULT_INIT_MAF;
    let mut alpha = DEFAULT_INIT_ALPHA;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let (mut major, mut minor, mut hom_reads, mut miscalls, mut ll) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &obs in reads {
            let (post, lse) = genotype_posteriors(obs, maf, alpha);
            ll += lse;
            major += 2.0 * post[0] + post[1];
            minor += post[1] + 2.0 * post[2];
            let (n, y) = (obs.depth as f64, obs.variants as f64);
            hom_reads += (post[0] + post[2]) * n;
            miscalls += post[0] * y + post[2] * (n - y);
        }
        trace.push(ll);
        let next_maf = minor / (major + minor);
        let next_alpha = if hom_reads < DEGENERATE_READS {
            alpha
        } else {
            miscalls / hom_reads
        };
        let change = relative_change(&[1.0 - maf, maf, alpha], &[1.0 - next_maf, next_maf, next_alpha]);
        maf = next_maf;
        alpha = next_alpha;
        iterations += 1;
        if change <= tol {
            converged = true;
            break;
        }
    }
    trace.push(single_snp_log_likelihood(reads, maf, alpha));
    Ok(SingleSnpFit {
        maf,
        alpha,
        log_likelihood_trace: trace,
        iterations,
        converged,
    })
}
