//! Genotype and diploid haplotype calls at the posterior mode, and the
//! three-step LD calling pipeline.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::em::{family_posterior, fit, Dataset, Family, FitConfig, ModelParams};
use crate::error::{ensure, Error, Result};
use crate::genotype::{Diplotype, FounderFrequencies, GenotypeCode, GenotypeVector};
use crate::pedigree::{configuration_table, log_frequencies, ConfigurationTable, DEFAULT_CONFIGURATION_CAP};
use crate::read_model::ErrorRates;

/// Posterior probabilities closer than this count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Largest number of loci for which diploid haplotypes are called.
pub const DEFAULT_MAX_HAPLOTYPE_LOCI: usize = 3;

/// Posterior-mode call for one family.
#[derive(Clone, Debug, PartialEq)]
pub struct CallResult {
    /// Called genotypes, `genotypes[member][locus]`.
    pub genotypes: Vec<GenotypeVector>,
    /// Called diploid haplotypes, present for haplotype calls.
    pub diplotypes: Option<Vec<Diplotype>>,
    pub mode_posterior: f64,
    /// Posterior genotype probabilities, `marginals[member][locus][g]`.
    pub marginals: Vec<Vec<[f64; 3]>>,
    /// Another assignment had (numerically) the same posterior probability.
    pub tie_flag: bool,
}

struct Posterior {
    table: Arc<ConfigurationTable>,
    probs: Vec<f64>,
}

fn posterior(family: &Family, theta: &ModelParams) -> Result<Posterior> {
    let m = theta.num_loci();
    family.validate(m)?;
    let table = configuration_table(&family.relationship, m, DEFAULT_CONFIGURATION_CAP)?;
    let (probs, _) = family_posterior(
        family,
        &table,
        &log_frequencies(&theta.founders),
        theta.errors.as_slice(),
    );
    Ok(Posterior { table, probs })
}

impl Posterior {
    fn marginals(&self) -> Vec<Vec<[f64; 3]>> {
        let space = self.table.space();
        let m = space.num_loci();
        let digits: Vec<GenotypeVector> = (0..space.num_genotype_vectors())
            .map(|i| space.genotype_vector(i))
            .collect();
        let mut out = vec![vec![[0.0; 3]; m]; self.table.num_members()];
        for (c, &p) in self.table.configurations().iter().zip(&self.probs) {
            if p == 0.0 {
                continue;
            }
            for (s, &d) in c.diplotypes.iter().enumerate() {
                for (locus, &g) in digits[space.genotype_of(d as usize)].iter().enumerate() {
                    out[s][locus][g as usize] += p;
                }
            }
        }
        out
    }

    /// Posterior mass of every distinct key, in order of first appearance.
    fn aggregate(&self, key: impl Fn(&[u16]) -> Vec<u16>) -> Vec<(Vec<u16>, f64)> {
        let mut index: HashMap<Vec<u16>, usize> = HashMap::new();
        let mut out: Vec<(Vec<u16>, f64)> = Vec::new();
        for (c, &p) in self.table.configurations().iter().zip(&self.probs) {
            let k = key(&c.diplotypes);
            match index.get(&k) {
                Some(&i) => out[i].1 += p,
                None => {
                    index.insert(k.clone(), out.len());
                    out.push((k, p));
                }
            }
        }
        out
    }
}

/// Picks the most probable entry; near-ties go to the smallest `order` key.
fn select_mode<K: Ord>(entries: &[(Vec<u16>, f64)], order: impl Fn(&[u16]) -> K) -> (usize, bool) {
    let best = entries.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> = (0..entries.len())
        .filter(|&i| entries[i].1 >= best - TIE_TOLERANCE)
        .collect();
    let chosen = *tied
        .iter()
        .min_by_key(|&&i| order(&entries[i].0))
        .expect("nonempty posterior");
    (chosen, tied.len() > 1)
}

fn genotype_order(matrix: &[GenotypeVector]) -> (u32, Vec<GenotypeCode>) {
    let minor = matrix.iter().flatten().map(|&g| g as u32).sum();
    (minor, matrix.iter().flatten().copied().collect())
}

/// Joint genotype call for a family: the genotype matrix with the highest
/// posterior probability, summing over configurations that share it.
pub fn call_family(family: &Family, theta: &ModelParams) -> Result<CallResult> {
    let post = posterior(family, theta)?;
    let space = post.table.space();
    let entries = post.aggregate(|d| d.iter().map(|&x| space.genotype_of(x as usize) as u16).collect());
    let to_matrix =
        |key: &[u16]| -> Vec<GenotypeVector> { key.iter().map(|&g| space.genotype_vector(g as usize)).collect() };
    let (chosen, tie_flag) = select_mode(&entries, |k| genotype_order(&to_matrix(k)));
    Ok(CallResult {
        genotypes: to_matrix(&entries[chosen].0),
        diplotypes: None,
        mode_posterior: entries[chosen].1,
        marginals: post.marginals(),
        tie_flag,
    })
}

/// Joint diploid haplotype call for a family at up to `max_loci` loci.
pub fn call_diploid_haplotypes(family: &Family, theta: &ModelParams, max_loci: usize) -> Result<CallResult> {
    let m = theta.num_loci();
    ensure!(m >= 2, "diploid haplotype calls need at least two loci, got {m}");
    if m > max_loci {
        return Err(Error::LocusCap {
            num_loci: m,
            cap: max_loci,
        });
    }
    let post = posterior(family, theta)?;
    let entries = post.aggregate(|d| d.to_vec());
    let to_matrix = |key: &[u16]| -> Vec<GenotypeVector> {
        key.iter()
            .map(|&d| Diplotype::from_index(d as usize).genotypes(m))
            .collect()
    };
    let (chosen, tie_flag) = select_mode(&entries, |k| (genotype_order(&to_matrix(k)), k.to_vec()));
    let key = &entries[chosen].0;
    Ok(CallResult {
        genotypes: to_matrix(key),
        diplotypes: Some(key.iter().map(|&d| Diplotype::from_index(d as usize)).collect()),
        mode_posterior: entries[chosen].1,
        marginals: post.marginals(),
        tie_flag,
    })
}

/// Calls every family of a dataset in parallel, in dataset order.
pub fn call_dataset(data: &Dataset, theta: &ModelParams) -> Result<Vec<CallResult>> {
    ensure!(
        data.num_loci() == theta.num_loci(),
        "dataset has {} loci but parameters cover {}",
        data.num_loci(),
        theta.num_loci()
    );
    data.families.par_iter().map(|f| call_family(f, theta)).collect()
}

/// Pearson correlation of called genotype codes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correlation {
    pub r: f64,
    /// One of the inputs had no variance; `r` is reported as 0.
    pub degenerate: bool,
}

pub fn genotype_correlation(a: &[GenotypeCode], b: &[GenotypeCode]) -> Result<Correlation> {
    ensure!(
        a.len() == b.len(),
        "genotype vectors differ in length: {} vs {}",
        a.len(),
        b.len()
    );
    ensure!(a.len() >= 2, "correlation needs at least two individuals");
    let n = a.len() as f64;
    let mean = |v: &[GenotypeCode]| v.iter().map(|&x| x as f64).sum::<f64>() / n;
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x as f64 - ma, y as f64 - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(Correlation {
            r: 0.0,
            degenerate: true,
        });
    }
    Ok(Correlation {
        r: (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0),
        degenerate: false,
    })
}

/// Partner chosen to help call a target SNP.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairSelection {
    pub target: usize,
    pub partner: usize,
    pub r: f64,
    pub partner_alpha: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartnerConfig {
    /// Candidates need at least this squared correlation with the target.
    pub min_r2: f64,
    /// Weight of the partner's error rate against its squared correlation.
    pub lambda: f64,
}

impl Default for PartnerConfig {
    fn default() -> Self {
        Self {
            min_r2: 0.5,
            lambda: 1.0,
        }
    }
}

/// Best partner for `target` by `r² − λ α`, among SNPs with `r² ≥ min_r2`.
pub fn select_partner(
    target: usize,
    correlations: &[Vec<f64>],
    alphas: &[f64],
    config: &PartnerConfig,
) -> Option<PairSelection> {
    let mut best: Option<(f64, PairSelection)> = None;
    for (k, &alpha) in alphas.iter().enumerate() {
        if k == target {
            continue;
        }
        let r = correlations[target][k];
        if r * r < config.min_r2 {
            continue;
        }
        let score = r * r - config.lambda * alpha;
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((
                score,
                PairSelection {
                    target,
                    partner: k,
                    r,
                    partner_alpha: alpha,
                },
            ));
        }
    }
    best.map(|(_, p)| p)
}

/// Genotype call of one member at one SNP.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnpCall {
    pub genotype: GenotypeCode,
    pub marginal: [f64; 3],
    pub tie: bool,
}

impl SnpCall {
    /// Most probable genotype of a marginal; near-ties go to the smaller code.
    pub fn from_marginal(marginal: [f64; 3]) -> Self {
        let best = marginal.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tied: Vec<usize> = (0..3).filter(|&g| marginal[g] >= best - TIE_TOLERANCE).collect();
        SnpCall {
            genotype: tied[0] as GenotypeCode,
            marginal,
            tie: tied.len() > 1,
        }
    }
}

/// Per-SNP calls `[locus][family][member]` taken from joint family calls.
pub fn split_calls(calls: &[CallResult], num_loci: usize) -> Vec<Vec<Vec<SnpCall>>> {
    (0..num_loci)
        .map(|m| {
            calls
                .iter()
                .map(|c| {
                    c.genotypes
                        .iter()
                        .zip(&c.marginals)
                        .map(|(g, marg)| SnpCall {
                            genotype: g[m],
                            marginal: marg[m],
                            tie: c.tie_flag,
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Groups per-person results of an unrelated view back into the original families.
pub fn regroup<T>(data: &Dataset, flat: Vec<T>) -> Vec<Vec<T>> {
    let mut it = flat.into_iter();
    data.families
        .iter()
        .map(|f| it.by_ref().take(f.num_members()).collect())
        .collect()
}

#[derive(Clone, Debug)]
pub struct LdConfig {
    pub partner: PartnerConfig,
    pub fit: FitConfig,
    /// Model relatives jointly; otherwise every member is treated as unrelated.
    pub use_relationship: bool,
}

impl Default for LdConfig {
    fn default() -> Self {
        Self {
            partner: PartnerConfig::default(),
            fit: FitConfig::default(),
            use_relationship: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LdPipelineResult {
    /// Final calls, `calls[snp][family][member]`.
    pub calls: Vec<Vec<Vec<SnpCall>>>,
    /// Single-SNP estimates from the first step.
    pub single_snp: Vec<ModelParams>,
    pub correlations: Vec<Vec<f64>>,
    pub partners: Vec<Option<PairSelection>>,
    /// Every model fit converged.
    pub converged: bool,
}

fn model_view(data: &Dataset, loci: &[usize], use_relationship: bool) -> Result<Dataset> {
    let sub = data.select_loci(loci)?;
    Ok(if use_relationship { sub } else { sub.as_unrelated() })
}

fn snp_calls(
    data: &Dataset,
    view: &Dataset,
    theta: &ModelParams,
    locus: usize,
    use_relationship: bool,
) -> Result<Vec<Vec<SnpCall>>> {
    let calls = call_dataset(view, theta)?;
    let marginal = |c: &CallResult, s: usize| SnpCall::from_marginal(c.marginals[s][locus]);
    if use_relationship {
        Ok(calls
            .iter()
            .map(|c| (0..c.marginals.len()).map(|s| marginal(c, s)).collect())
            .collect())
    } else {
        Ok(regroup(data, calls.iter().map(|c| marginal(c, 0)).collect()))
    }
}

/// Single-SNP calls for every family: the joint mode restricted to one SNP.
fn single_snp_calls(
    data: &Dataset,
    view: &Dataset,
    theta: &ModelParams,
    use_relationship: bool,
) -> Result<Vec<Vec<SnpCall>>> {
    let calls = call_dataset(view, theta)?;
    let mut per_locus = split_calls(&calls, 1).pop().expect("one locus");
    if !use_relationship {
        per_locus = regroup(data, per_locus.into_iter().flatten().collect());
    }
    Ok(per_locus)
}

fn start_from(single: &[&ModelParams]) -> Result<ModelParams> {
    let mafs: Vec<f64> = single.iter().map(|t| t.founders.maf(0).clamp(0.01, 0.99)).collect();
    let alphas: Vec<f64> = single
        .iter()
        .map(|t| t.errors.as_slice()[0].clamp(1e-4, 0.45))
        .collect();
    ModelParams::new(FounderFrequencies::independent(&mafs)?, ErrorRates::new(alphas)?)
}

/// Three-step LD calling of every SNP in a region.
///
/// 1. Fit and call each SNP on its own.
/// 2. Correlate the called genotype codes of every SNP pair.
/// 3. Re-call each SNP that has a suitable partner from a joint two-locus fit,
///    using the target's posterior marginal. Other SNPs keep their step-1 calls.
pub fn ld_pipeline(data: &Dataset, config: &LdConfig) -> Result<LdPipelineResult> {
    let m = data.num_loci();
    ensure!(m >= 2, "the LD pipeline needs at least two SNPs, got {m}");
    let use_rel = config.use_relationship;

    let step1: Vec<(ModelParams, bool, Vec<Vec<SnpCall>>)> = (0..m)
        .into_par_iter()
        .map(|j| {
            let view = model_view(data, &[j], use_rel)?;
            let report = fit(&view, &config.fit)?;
            let calls = single_snp_calls(data, &view, &report.theta_hat, use_rel)?;
            Ok((report.theta_hat, report.converged, calls))
        })
        .collect::<Result<_>>()?;

    let codes: Vec<Vec<GenotypeCode>> = step1
        .iter()
        .map(|(_, _, calls)| calls.iter().flatten().map(|c| c.genotype).collect())
        .collect();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|j| (j + 1..m).map(move |k| (j, k))).collect();
    let rs: Vec<f64> = pairs
        .par_iter()
        .map(|&(j, k)| genotype_correlation(&codes[j], &codes[k]).map(|c| c.r))
        .collect::<Result<_>>()?;
    let mut correlations = vec![vec![0.0; m]; m];
    for (&(j, k), r) in pairs.iter().zip(rs) {
        correlations[j][k] = r;
        correlations[k][j] = r;
    }
    for (j, row) in correlations.iter_mut().enumerate() {
        row[j] = 1.0;
    }

    let alphas: Vec<f64> = step1.iter().map(|(t, _, _)| t.errors.as_slice()[0]).collect();
    let partners: Vec<Option<PairSelection>> = (0..m)
        .map(|j| select_partner(j, &correlations, &alphas, &config.partner))
        .collect();

    let step3: Vec<(Vec<Vec<SnpCall>>, bool)> = (0..m)
        .into_par_iter()
        .map(|j| match partners[j] {
            None => Ok((step1[j].2.clone(), true)),
            Some(sel) => {
                let view = model_view(data, &[j, sel.partner], use_rel)?;
                let init = start_from(&[&step1[j].0, &step1[sel.partner].0])?;
                let report = fit(
                    &view,
                    &FitConfig {
                        init: Some(init),
                        ..config.fit.clone()
                    },
                )?;
                Ok((snp_calls(data, &view, &report.theta_hat, 0, use_rel)?, report.converged))
            }
        })
        .collect::<Result<_>>()?;

    let converged = step1.iter().all(|s| s.1) && step3.iter().all(|s| s.1);
    Ok(LdPipelineResult {
        calls: step3.into_iter().map(|s| s.0).collect(),
        single_snp: step1.into_iter().map(|s| s.0).collect(),
        correlations,
        partners,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pedigree::Relationship;
    use crate::read_model::{read_log_likelihood, ReadObservation};

    fn obs(n: u32, y: u32) -> ReadObservation {
        ReadObservation::new(n, y).unwrap()
    }

    fn theta1(p: f64, alpha: f64) -> ModelParams {
        ModelParams::new(
            FounderFrequencies::from_maf(p).unwrap(),
            ErrorRates::uniform(1, alpha).unwrap(),
        )
        .unwrap()
    }

    fn single(reads: Vec<ReadObservation>) -> Family {
        Family::anonymous("f", Relationship::UnrelatedSingleton, vec![reads]).unwrap()
    }

    #[test]
    fn strong_evidence_beats_rare_prior() {
        let c = call_family(&single(vec![obs(10, 10)]), &theta1(0.01, 0.005)).unwrap();
        assert_eq!(c.genotypes, vec![vec![2]]);
        // three-term oracle
        let prior = [0.99f64 * 0.99, 2.0 * 0.01 * 0.99, 0.01 * 0.01];
        let w: Vec<f64> = (0..3)
            .map(|g| prior[g] * read_log_likelihood(obs(10, 10), g as u8, 0.005).unwrap().exp())
            .collect();
        let total: f64 = w.iter().sum();
        assert!((c.mode_posterior - w[2] / total).abs() < 1e-12);
        assert!(!c.tie_flag);
    }

    #[test]
    fn no_reads_gives_prior_mode() {
        for p in [0.01, 0.2, 0.33] {
            let c = call_family(&single(vec![ReadObservation::MISSING]), &theta1(p, 0.01)).unwrap();
            assert_eq!(c.genotypes, vec![vec![0]]);
            assert!((c.mode_posterior - (1.0 - p) * (1.0 - p)).abs() < 1e-15);
        }
        // above p = 1/3 the heterozygote is the prior mode
        let c = call_family(&single(vec![ReadObservation::MISSING]), &theta1(0.45, 0.01)).unwrap();
        assert_eq!(c.genotypes, vec![vec![1]]);
    }

    #[test]
    fn mendelian_prior_overrides_weak_child_evidence() {
        let f = Family::anonymous(
            "t",
            Relationship::ParentOffspringTrio,
            vec![vec![obs(30, 0)], vec![obs(30, 1)], vec![obs(10, 3)]],
        )
        .unwrap();
        let theta = theta1(0.01, 0.05);
        let c = call_family(&f, &theta).unwrap();
        assert_eq!(c.genotypes, vec![vec![0], vec![0], vec![0]]);
        // alone, the child's reads favour a heterozygote
        let alone = call_family(&single(vec![obs(10, 3)]), &theta1(0.5, 0.05)).unwrap();
        assert_eq!(alone.genotypes, vec![vec![1]]);
    }

    #[test]
    fn exact_tie_sets_flag_and_prefers_reference() {
        // at p = 1/3 the prior gives q² = 2pq
        let c = call_family(&single(vec![ReadObservation::MISSING]), &theta1(1.0 / 3.0, 0.01)).unwrap();
        assert_eq!(c.genotypes, vec![vec![0]]);
        assert!(c.tie_flag);
    }

    #[test]
    fn marginals_normalized() {
        let f = Family::anonymous(
            "n",
            Relationship::nuclear_family(),
            vec![
                vec![obs(5, 2), obs(3, 0)],
                vec![obs(5, 0), obs(2, 2)],
                vec![obs(4, 4), obs(0, 0)],
                vec![obs(1, 1), obs(6, 3)],
            ],
        )
        .unwrap();
        let theta = ModelParams::new(
            FounderFrequencies::new(2, vec![0.5, 0.2, 0.2, 0.1]).unwrap(),
            ErrorRates::new(vec![0.02, 0.05]).unwrap(),
        )
        .unwrap();
        let c = call_family(&f, &theta).unwrap();
        for member in &c.marginals {
            for locus in member {
                assert!((locus.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
        assert!(c.mode_posterior > 0.0 && c.mode_posterior <= 1.0);
        let h = call_diploid_haplotypes(&f, &theta, 3).unwrap();
        assert_eq!(h.marginals, c.marginals);
        assert!(h.mode_posterior <= c.mode_posterior + 1e-12);
    }

    #[test]
    fn ld_carries_evidence_to_unobserved_snp() {
        let theta = ModelParams::new(
            FounderFrequencies::new(2, vec![0.9 - 1e-6, 1e-6 / 2.0, 1e-6 / 2.0, 0.1]).unwrap(),
            ErrorRates::new(vec![0.01, 0.01]).unwrap(),
        )
        .unwrap();
        let f = single(vec![obs(30, 30), ReadObservation::MISSING]);
        let c = call_diploid_haplotypes(&f, &theta, 3).unwrap();
        assert_eq!(c.genotypes, vec![vec![2, 2]]);
        assert_eq!(c.diplotypes, Some(vec![Diplotype::new(3, 3)]));

        let none = single(vec![ReadObservation::MISSING; 2]);
        let c = call_diploid_haplotypes(&none, &theta, 3).unwrap();
        assert_eq!(c.diplotypes, Some(vec![Diplotype::new(0, 0)]));
    }

    #[test]
    fn haplotype_calls_capped() {
        let theta = ModelParams::default_init(4).unwrap();
        let f = single(vec![ReadObservation::MISSING; 4]);
        assert!(matches!(
            call_diploid_haplotypes(&f, &theta, 3),
            Err(Error::LocusCap { num_loci: 4, cap: 3 })
        ));
    }

    #[test]
    fn independence_prior_matches_single_snp_calls() {
        let mafs = [0.2, 0.35];
        let alphas = [0.03, 0.08];
        let theta = ModelParams::new(
            FounderFrequencies::independent(&mafs).unwrap(),
            ErrorRates::new(alphas.to_vec()).unwrap(),
        )
        .unwrap();
        for (a, b) in [((8, 3), (5, 5)), ((0, 0), (7, 1)), ((12, 12), (3, 2))] {
            let f = single(vec![obs(a.0, a.1), obs(b.0, b.1)]);
            let joint = call_diploid_haplotypes(&f, &theta, 3).unwrap();
            for locus in 0..2 {
                let s = call_family(&single(vec![f.reads[0][locus]]), &theta1(mafs[locus], alphas[locus])).unwrap();
                for g in 0..3 {
                    assert!((joint.marginals[0][locus][g] - s.marginals[0][0][g]).abs() < 1e-12);
                }
                assert_eq!(joint.genotypes[0][locus], s.genotypes[0][0]);
            }
        }
    }

    #[test]
    fn correlation_examples() {
        let a = [0u8, 1, 2, 1, 0];
        let b: Vec<u8> = a.iter().map(|x| 2 - x).collect();
        assert!((genotype_correlation(&a, &a).unwrap().r - 1.0).abs() < 1e-15);
        assert!((genotype_correlation(&a, &b).unwrap().r + 1.0).abs() < 1e-15);
        let flat = genotype_correlation(&a, &[1, 1, 1, 1, 1]).unwrap();
        assert!(flat.degenerate && flat.r == 0.0);
        assert!(genotype_correlation(&a, &[1, 2]).is_err());
    }

    #[test]
    fn partner_selection_rules() {
        let r2 = |x: f64| x.sqrt();
        let corr = vec![
            vec![1.0, r2(0.9), r2(0.9)],
            vec![r2(0.9), 1.0, 0.0],
            vec![r2(0.9), 0.0, 1.0],
        ];
        let cfg = PartnerConfig::default();
        let s = select_partner(0, &corr, &[0.0, 0.10, 0.01], &cfg).unwrap();
        assert_eq!(s.partner, 2);
        let corr = vec![
            vec![1.0, r2(0.9), r2(0.6)],
            vec![r2(0.9), 1.0, 0.0],
            vec![r2(0.6), 0.0, 1.0],
        ];
        assert_eq!(select_partner(0, &corr, &[0.0, 0.05, 0.05], &cfg).unwrap().partner, 1);
        let weak = vec![vec![1.0, 0.5], vec![0.5, 1.0]];
        assert_eq!(select_partner(0, &weak, &[0.01, 0.01], &cfg), None);
    }

    #[test]
    fn marginal_call_ties() {
        let c = SnpCall::from_marginal([0.4, 0.2, 0.4]);
        assert_eq!((c.genotype, c.tie), (0, true));
        let c = SnpCall::from_marginal([0.1, 0.2, 0.7]);
        assert_eq!((c.genotype, c.tie), (2, false));
    }
}
