//! Maximum-likelihood estimation of founder frequencies and read error rates by EM.
//!
//! The unobserved family configurations (IBD class plus founder haplotypes) are
//! the missing data. The E step accumulates expected founder haplotype counts and,
//! per locus, the expected reads and miscalled reads among homozygous genotypes;
//! the M step normalizes the counts and takes miscalls over reads.

mod data;
pub mod seqem;
pub mod trio;

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

pub use data::{Dataset, Family};

use crate::error::{ensure, Result};
use crate::genotype::{genotype_vector, FounderFrequencies, HaplotypeSpace};
use crate::math::normalize_log_weights;
use crate::pedigree::{configuration_table, log_frequencies, ConfigurationTable, DEFAULT_CONFIGURATION_CAP};
use crate::read_model::{genotype_log_likelihoods, ErrorRates, ReadObservation};

/// MAF used for the default starting haplotype frequencies.
pub const DEFAULT_INIT_MAF: f64 = 0.2;
/// Default starting read error rate.
pub const DEFAULT_INIT_ALPHA: f64 = 0.01;
/// Expected homozygote reads below this leave a locus' error rate unchanged.
pub const DEGENERATE_READS: f64 = 1e-8;
/// Parameters closer than this to 0 are treated as lying on the boundary.
pub const BOUNDARY_EPS: f64 = 1e-10;
/// Allowed decrease of the log-likelihood between EM iterations.
pub const MONOTONICITY_TOLERANCE: f64 = 1e-9;
const RELATIVE_CHANGE_FLOOR: f64 = 1e-12;
const MAX_ALPHA: f64 = 0.5 - 1e-9;

/// θ = (π, α).
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub founders: FounderFrequencies,
    pub errors: ErrorRates,
}

impl ModelParams {
    pub fn new(founders: FounderFrequencies, errors: ErrorRates) -> Result<Self> {
        ensure!(
            founders.num_loci() == errors.len(),
            "founder frequencies cover {} loci but {} error rates were given",
            founders.num_loci(),
            errors.len()
        );
        Ok(Self { founders, errors })
    }

    /// Linkage equilibrium at MAF 0.2 per locus with α = 0.01.
    pub fn default_init(num_loci: usize) -> Result<Self> {
        Self::new(
            FounderFrequencies::independent(&vec![DEFAULT_INIT_MAF; num_loci])?,
            ErrorRates::uniform(num_loci, DEFAULT_INIT_ALPHA)?,
        )
    }

    pub fn num_loci(&self) -> usize {
        self.founders.num_loci()
    }
}

/// Expected complete-data counts.
#[derive(Clone, Debug, PartialEq)]
pub struct SufficientStats {
    /// Expected number of founder draws of each haplotype (or genotype, for the
    /// trio genotype-frequency model).
    pub founder_counts: Vec<f64>,
    /// Per locus, expected reads among homozygous genotypes.
    pub homozygote_reads: Vec<f64>,
    /// Per locus, expected miscalled reads among homozygous genotypes.
    pub miscalls: Vec<f64>,
}

impl SufficientStats {
    pub fn zeros(num_founder_classes: usize, num_loci: usize) -> Self {
        Self {
            founder_counts: vec![0.0; num_founder_classes],
            homozygote_reads: vec![0.0; num_loci],
            miscalls: vec![0.0; num_loci],
        }
    }

    pub fn merge(&mut self, other: &SufficientStats) {
        for (a, b) in self.founder_counts.iter_mut().zip(&other.founder_counts) {
            *a += b;
        }
        for (a, b) in self.homozygote_reads.iter_mut().zip(&other.homozygote_reads) {
            *a += b;
        }
        for (a, b) in self.miscalls.iter_mut().zip(&other.miscalls) {
            *a += b;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MStep {
    pub founder_freqs: Vec<f64>,
    pub errors: Vec<f64>,
    /// Loci whose error rate was carried over for lack of homozygote reads.
    pub degenerate_loci: Vec<usize>,
}

/// Closed-form maximization of the complete-data likelihood.
///
/// With `pooled` set, a single error rate is estimated from the reads of all loci.
pub fn m_step(stats: &SufficientStats, previous_errors: &[f64], pooled: bool) -> MStep {
    let total: f64 = stats.founder_counts.iter().sum();
    let founder_freqs = if total > 0.0 {
        stats.founder_counts.iter().map(|c| c / total).collect()
    } else {
        let k = stats.founder_counts.len() as f64;
        vec![1.0 / k; stats.founder_counts.len()]
    };

    let mut degenerate_loci = Vec::new();
    let errors = if pooled {
        let reads: f64 = stats.homozygote_reads.iter().sum();
        let miscalls: f64 = stats.miscalls.iter().sum();
        if reads < DEGENERATE_READS {
            degenerate_loci.extend(0..previous_errors.len());
            previous_errors.to_vec()
        } else {
            vec![(miscalls / reads).min(MAX_ALPHA); previous_errors.len()]
        }
    } else {
        stats
            .homozygote_reads
            .iter()
            .zip(&stats.miscalls)
            .zip(previous_errors)
            .enumerate()
            .map(|(m, ((&reads, &miscalls), &previous))| {
                if reads < DEGENERATE_READS {
                    degenerate_loci.push(m);
                    previous
                } else {
                    (miscalls / reads).min(MAX_ALPHA)
                }
            })
            .collect()
    };
    MStep {
        founder_freqs,
        errors,
        degenerate_loci,
    }
}

/// Per-member log-likelihood of every genotype vector, base-3 indexed.
pub(crate) fn member_log_likelihoods(reads: &[ReadObservation], errors: &[f64]) -> Vec<f64> {
    let per_locus: Vec<[f64; 3]> = reads
        .iter()
        .zip(errors)
        .map(|(&obs, &alpha)| genotype_log_likelihoods(obs, alpha))
        .collect();
    let mut out = vec![0.0];
    for ll in &per_locus {
        // locus 0 is the least significant digit
        let stride = out.len();
        let mut next = vec![0.0; stride * 3];
        for (g, &l) in ll.iter().enumerate() {
            for (i, &v) in out.iter().enumerate() {
                next[g * stride + i] = v + l;
            }
        }
        out = next;
    }
    out
}

/// Configuration log-weights `ln Pr(config | R; π) + Σ_s ln Pr(y_s | n_s, g_s; α)`.
pub(crate) fn configuration_log_weights(
    family: &Family,
    table: &ConfigurationTable,
    log_freqs: &[f64],
    errors: &[f64],
) -> Vec<f64> {
    let space = table.space();
    let member_ll: Vec<Vec<f64>> = family.reads.iter().map(|r| member_log_likelihoods(r, errors)).collect();
    table
        .configurations()
        .iter()
        .map(|c| {
            let prior = c.log_prior(log_freqs);
            if prior == f64::NEG_INFINITY {
                return prior;
            }
            c.diplotypes
                .iter()
                .zip(&member_ll)
                .fold(prior, |acc, (&d, ll)| acc + ll[space.genotype_of(d as usize)])
        })
        .collect()
}

/// Normalized configuration posterior and the family log-likelihood.
/// A family without any reads gets its prior back untouched.
pub(crate) fn family_posterior(
    family: &Family,
    table: &ConfigurationTable,
    log_freqs: &[f64],
    errors: &[f64],
) -> (Vec<f64>, f64) {
    let unobserved = family.reads.iter().flatten().all(|o| o.depth == 0);
    if unobserved {
        let prior = table
            .configurations()
            .iter()
            .map(|c| c.log_prior(log_freqs).exp())
            .collect();
        return (prior, 0.0);
    }
    let mut w = configuration_log_weights(family, table, log_freqs, errors);
    let ll = normalize_log_weights(&mut w);
    (w, ll)
}

/// Log-likelihood of one family's reads, summed over its configurations.
pub fn family_log_likelihood(family: &Family, theta: &ModelParams) -> Result<f64> {
    family.validate(theta.num_loci())?;
    let table = configuration_table(&family.relationship, theta.num_loci(), DEFAULT_CONFIGURATION_CAP)?;
    let (_, ll) = family_posterior(
        family,
        &table,
        &log_frequencies(&theta.founders),
        theta.errors.as_slice(),
    );
    Ok(ll)
}

/// Result of one E step over a dataset.
#[derive(Clone, Debug)]
pub struct EStepResult {
    pub stats: SufficientStats,
    pub log_likelihood: f64,
    /// Per family, normalized posterior over its configuration table.
    pub posteriors: Vec<Vec<f64>>,
}

struct FamilyExpectation {
    log_likelihood: f64,
    stats: SufficientStats,
    posterior: Vec<f64>,
}

/// Binds a dataset to the configuration tables of its families.
pub(crate) struct Evaluator<'a> {
    data: &'a Dataset,
    tables: Vec<Arc<ConfigurationTable>>,
    digits: Vec<Vec<u8>>,
}

impl<'a> Evaluator<'a> {
    pub(crate) fn new(data: &'a Dataset, cap: u64) -> Result<Self> {
        let m = data.num_loci();
        let tables = data
            .families
            .iter()
            .map(|f| configuration_table(&f.relationship, m, cap))
            .collect::<Result<Vec<_>>>()?;
        let space = HaplotypeSpace::new(m)?;
        let digits = (0..space.num_genotype_vectors())
            .map(|i| genotype_vector(i, m))
            .collect();
        Ok(Self { data, tables, digits })
    }

    fn family_expectation(&self, index: usize, theta: &ModelParams, log_freqs: &[f64]) -> FamilyExpectation {
        let family = &self.data.families[index];
        let table = &self.tables[index];
        let m = theta.num_loci();
        let (posterior, log_likelihood) = family_posterior(family, table, log_freqs, theta.errors.as_slice());

        let mut stats = SufficientStats::zeros(theta.founders.num_haplotypes(), m);
        let space = table.space();
        let mut member_post = vec![vec![0.0; space.num_genotype_vectors()]; family.reads.len()];
        for (c, &p) in table.configurations().iter().zip(&posterior) {
            if p == 0.0 {
                continue;
            }
            for &(h, count) in &c.haplotype_counts {
                stats.founder_counts[h as usize] += p * count as f64;
            }
            for (s, &d) in c.diplotypes.iter().enumerate() {
                member_post[s][space.genotype_of(d as usize)] += p;
            }
        }
        for (reads, post) in family.reads.iter().zip(&member_post) {
            for (g_index, &p) in post.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                for (locus, obs) in reads.iter().enumerate() {
                    let (n, y) = (obs.depth as f64, obs.variants as f64);
                    match self.digits[g_index][locus] {
                        0 => {
                            stats.homozygote_reads[locus] += p * n;
                            stats.miscalls[locus] += p * y;
                        }
                        2 => {
                            stats.homozygote_reads[locus] += p * n;
                            stats.miscalls[locus] += p * (n - y);
                        }
                        _ => {}
                    }
                }
            }
        }
        FamilyExpectation {
            log_likelihood,
            stats,
            posterior,
        }
    }

    pub(crate) fn expectation(&self, theta: &ModelParams, keep_posteriors: bool) -> EStepResult {
        let log_freqs = log_frequencies(&theta.founders);
        let per_family: Vec<FamilyExpectation> = (0..self.data.families.len())
            .into_par_iter()
            .with_min_len(16)
            .map(|i| self.family_expectation(i, theta, &log_freqs))
            .collect();
        // fixed-order reduction keeps results independent of the thread count
        let mut stats = SufficientStats::zeros(theta.founders.num_haplotypes(), theta.num_loci());
        let mut log_likelihood = 0.0;
        let mut posteriors = Vec::new();
        for fe in per_family {
            stats.merge(&fe.stats);
            log_likelihood += fe.log_likelihood;
            if keep_posteriors {
                posteriors.push(fe.posterior);
            }
        }
        EStepResult {
            stats,
            log_likelihood,
            posteriors,
        }
    }
}

/// E step: expected sufficient statistics, total log-likelihood and per-family posteriors.
pub fn e_step(data: &Dataset, theta: &ModelParams) -> Result<EStepResult> {
    ensure!(
        data.num_loci() == theta.num_loci(),
        "dataset has {} loci but parameters cover {}",
        data.num_loci(),
        theta.num_loci()
    );
    Ok(Evaluator::new(data, DEFAULT_CONFIGURATION_CAP)?.expectation(theta, true))
}

#[derive(Clone, Debug)]
pub struct FitConfig {
    /// Starting point; `None` uses [`ModelParams::default_init`].
    pub init: Option<ModelParams>,
    pub tol: f64,
    pub max_iter: usize,
    pub max_restarts: usize,
    pub rng_seed: u64,
    /// Estimate one error rate shared by all loci.
    pub pooled_error: bool,
    pub estimate_founders: bool,
    pub estimate_errors: bool,
    pub configuration_cap: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            init: None,
            tol: 1e-8,
            max_iter: 5000,
            max_restarts: 5,
            rng_seed: 0,
            pooled_error: false,
            estimate_founders: true,
            estimate_errors: true,
            configuration_cap: DEFAULT_CONFIGURATION_CAP,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitReport {
    pub theta_hat: ModelParams,
    /// Log-likelihood at every iterate of the selected run, ending with θ̂.
    pub log_likelihood_trace: Vec<f64>,
    pub iterations: usize,
    pub restarts: usize,
    pub converged: bool,
    pub degenerate_loci: Vec<usize>,
    /// Every run (initial and restarts) satisfied the monotonicity check.
    pub monotone: bool,
}

impl FitReport {
    pub fn log_likelihood(&self) -> f64 {
        *self.log_likelihood_trace.last().expect("trace is never empty")
    }
}

struct EmRun {
    theta: ModelParams,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
    degenerate: BTreeSet<usize>,
    monotone: bool,
}

impl EmRun {
    fn log_likelihood(&self) -> f64 {
        *self.trace.last().expect("trace is never empty")
    }
}

pub(crate) fn relative_change(previous: &[f64], next: &[f64]) -> f64 {
    previous
        .iter()
        .zip(next)
        .map(|(a, b)| (a - b).abs() / a.abs().max(RELATIVE_CHANGE_FLOOR))
        .fold(0.0, f64::max)
}

fn run_em(eval: &Evaluator, init: ModelParams, config: &FitConfig) -> Result<EmRun> {
    let m = init.num_loci();
    let mut theta = init;
    let mut trace = Vec::new();
    let mut degenerate = BTreeSet::new();
    let mut converged = false;
    let mut monotone = true;
    let mut iterations = 0;
    while iterations < config.max_iter {
        let est = eval.expectation(&theta, false);
        push_checked(&mut trace, est.log_likelihood, &mut monotone);
        let step = m_step(&est.stats, theta.errors.as_slice(), config.pooled_error);
        degenerate.extend(step.degenerate_loci.iter().copied());

        let mut change = 0.0f64;
        let founders = if config.estimate_founders {
            change = change.max(relative_change(theta.founders.freqs(), &step.founder_freqs));
            FounderFrequencies::from_weights(m, &step.founder_freqs)
        } else {
            theta.founders.clone()
        };
        let errors = if config.estimate_errors {
            change = change.max(relative_change(theta.errors.as_slice(), &step.errors));
            ErrorRates::new(step.errors)?
        } else {
            theta.errors.clone()
        };
        theta = ModelParams { founders, errors };
        iterations += 1;
        if change <= config.tol {
            converged = true;
            break;
        }
    }
    let final_ll = eval.expectation(&theta, false).log_likelihood;
    push_checked(&mut trace, final_ll, &mut monotone);
    Ok(EmRun {
        theta,
        trace,
        iterations,
        converged,
        degenerate,
        monotone,
    })
}

fn push_checked(trace: &mut Vec<f64>, ll: f64, monotone: &mut bool) {
    if let Some(&previous) = trace.last() {
        if ll < previous - MONOTONICITY_TOLERANCE {
            *monotone = false;
            debug_assert!(false, "EM log-likelihood decreased from {previous} to {ll}");
        }
    }
    trace.push(ll);
}

fn on_boundary(run: &EmRun, config: &FitConfig) -> bool {
    let founders = config.estimate_founders && run.theta.founders.freqs().iter().any(|&f| f < BOUNDARY_EPS);
    let errors = config.estimate_errors
        && run
            .theta
            .errors
            .as_slice()
            .iter()
            .enumerate()
            .any(|(m, &a)| a < BOUNDARY_EPS && !run.degenerate.contains(&m));
    founders || errors
}

fn random_init(base: &ModelParams, config: &FitConfig, rng: &mut ChaCha8Rng) -> Result<ModelParams> {
    let m = base.num_loci();
    let founders = if config.estimate_founders {
        let weights: Vec<f64> = (0..base.founders.num_haplotypes())
            .map(|_| rng.sample::<f64, _>(Exp1))
            .collect();
        FounderFrequencies::from_weights(m, &weights)
    } else {
        base.founders.clone()
    };
    let errors = if !config.estimate_errors {
        base.errors.clone()
    } else if config.pooled_error {
        ErrorRates::uniform(m, rng.random_range(0.001..0.2))?
    } else {
        ErrorRates::new((0..m).map(|_| rng.random_range(0.001..0.2)).collect())?
    };
    ModelParams::new(founders, errors)
}

/// Maximizes the likelihood of all families by EM.
///
/// A run ending on the boundary of the parameter space triggers a restart from a
/// random point (uniform on the simplex, α uniform in [0.001, 0.2]). Restarts stop
/// once one fails to improve on the best likelihood seen, or after `max_restarts`.
/// The best run is returned; ties go to the earliest.
pub fn fit(data: &Dataset, config: &FitConfig) -> Result<FitReport> {
    ensure!(!data.families.is_empty(), "cannot fit an empty dataset");
    let m = data.num_loci();
    let init = match &config.init {
        Some(theta) => {
            ensure!(
                theta.num_loci() == m,
                "initial parameters cover {} loci, data {m}",
                theta.num_loci()
            );
            theta.clone()
        }
        None => ModelParams::default_init(m)?,
    };
    let init = if config.pooled_error {
        let a = init.errors.as_slice()[0];
        ModelParams {
            errors: ErrorRates::uniform(m, a)?,
            ..init
        }
    } else {
        init
    };
    let eval = Evaluator::new(data, config.configuration_cap)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);

    let mut best = run_em(&eval, init.clone(), config)?;
    let mut monotone = best.monotone;
    let mut last_on_boundary = on_boundary(&best, config);
    let mut restarts = 0;
    while last_on_boundary && restarts < config.max_restarts {
        restarts += 1;
        let run = run_em(&eval, random_init(&init, config, &mut rng)?, config)?;
        monotone &= run.monotone;
        let improved = run.log_likelihood() > best.log_likelihood() + MONOTONICITY_TOLERANCE;
        last_on_boundary = on_boundary(&run, config);
        if run.log_likelihood() > best.log_likelihood() {
            best = run;
        }
        if !improved {
            break;
        }
    }
    Ok(FitReport {
        theta_hat: best.theta,
        log_likelihood_trace: best.trace,
        iterations: best.iterations,
        restarts,
        converged: best.converged,
        degenerate_loci: best.degenerate.into_iter().collect(),
        monotone,
    })
}
