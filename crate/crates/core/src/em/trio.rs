//! Trio EM with free parental genotype frequencies and one shared error rate.
//!
//! θ = (π₀, π₁, π₂, α): parents carry genotype g with probability π_g (no
//! Hardy–Weinberg constraint), the child follows Mendelian transmission. The
//! M step sets π_g = E[x_g] / 2I and α = E[u] / E[n₊].

use crate::error::{ensure, Result};
use crate::math::normalize_log_weights;
use crate::read_model::{genotype_log_likelihoods, ReadObservation};

use super::{m_step, relative_change, SufficientStats, DEFAULT_INIT_ALPHA, DEFAULT_INIT_MAF};

/// Reads of (parent, parent, child) at one SNP.
pub type TrioReads = [ReadObservation; 3];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrioParams {
    pub genotype_freqs: [f64; 3],
    pub alpha: f64,
}

impl Default for TrioParams {
    /// Hardy–Weinberg at MAF 0.2 with α = 0.01.
    fn default() -> Self {
        let p = DEFAULT_INIT_MAF;
        let q = 1.0 - p;
        Self {
            genotype_freqs: [q * q, 2.0 * p * q, p * p],
            alpha: DEFAULT_INIT_ALPHA,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrioFit {
    pub params: TrioParams,
    pub log_likelihood_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// `Pr(child = c | parents = (a, b))`.
pub fn transmission(a: u8, b: u8, c: u8) -> f64 {
    let ta = a as f64 / 2.0;
    let tb = b as f64 / 2.0;
    match c {
        0 => (1.0 - ta) * (1.0 - tb),
        1 => ta * (1.0 - tb) + (1.0 - ta) * tb,
        2 => ta * tb,
        _ => 0.0,
    }
}

fn trio_posterior(trio: &TrioReads, params: &TrioParams) -> ([f64; 27], f64) {
    let ll: Vec<[f64; 3]> = trio
        .iter()
        .map(|&o| genotype_log_likelihoods(o, params.alpha))
        .collect();
    let mut w = [f64::NEG_INFINITY; 27];
    for a in 0..3u8 {
        for b in 0..3u8 {
            for c in 0..3u8 {
                let prior =
                    params.genotype_freqs[a as usize] * params.genotype_freqs[b as usize] * transmission(a, b, c);
                if prior > 0.0 {
                    w[(a * 9 + b * 3 + c) as usize] =
                        prior.ln() + ll[0][a as usize] + ll[1][b as usize] + ll[2][c as usize];
                }
            }
        }
    }
    let lse = normalize_log_weights(&mut w);
    (w, lse)
}

pub fn trio_log_likelihood(trios: &[TrioReads], params: &TrioParams) -> f64 {
    trios.iter().map(|t| trio_posterior(t, params).1).sum()
}

pub fn fit_trio_genotype_model(trios: &[TrioReads], tol: f64, max_iter: usize) -> Result<TrioFit> {
    ensure!(!trios.is_empty(), "cannot fit an empty set of trios");
    let mut params = TrioParams::default();
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut stats = SufficientStats::zeros(3, 1);
        let mut ll = 0.0;
        for trio in trios {
            let (post, lse) = trio_posterior(trio, &params);
            ll += lse;
            for (k, &p) in post.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let genotypes = [k / 9, (k / 3) % 3, k % 3];
                stats.founder_counts[genotypes[0]] += p;
                stats.founder_counts[genotypes[1]] += p;
                for (g, obs) in genotypes.iter().zip(trio) {
                    let (n, y) = (obs.depth as f64, obs.variants as f64);
                    match g {
                        0 => {
                            stats.homozygote_reads[0] += p * n;
                            stats.miscalls[0] += p * y;
                        }
                        2 => {
                            stats.homozygote_reads[0] += p * n;
                            stats.miscalls[0] += p * (n - y);
                        }
                        _ => {}
                    }
                }
            }
        }
        trace.push(ll);
        let step = m_step(&stats, &[params.alpha], true);
        let next = TrioParams {
            genotype_freqs: [step.founder_freqs[0], step.founder_freqs[1], step.founder_freqs[2]],
            alpha: step.errors[0],
        };
        let mut before = params.genotype_freqs.to_vec();
        before.push(params.alpha);
        let mut after = next.genotype_freqs.to_vec();
        after.push(next.alpha);
        let change = relative_change(&before, &after);
        params = next;
        iterations += 1;
        if change <= tol {
            converged = true;
            break;
        }
    }
    trace.push(trio_log_likelihood(trios, &params));
    Ok(TrioFit {
        params,
        log_likelihood_trace: trace,
        iterations,
        converged,
    })
}
