//! Synthetic family genotypes and read counts.
//!
//! Founder haplotypes come from explicit frequencies, independent loci, a
//! two-SNP LD parameterization, resampling of a phased reference panel, or a
//! single-SNP fixation-index model. Relatives are assembled from IBD
//! configurations (or by gene dropping where founders are not Hardy–Weinberg),
//! and reads follow the binomial error model at zero-truncated Poisson or
//! fixed depths.

use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use rayon::prelude::*;
use serde::Deserialize;

use crate::em::{Dataset, Family, ModelParams};
use crate::error::{ensure, Error, Result};
use crate::genotype::{FounderFrequencies, GenotypeVector, MAX_JOINT_LOCI};
use crate::pedigree::{icc_distribution, Relationship};
use crate::read_model::{validate_alpha, ErrorRates, ReadObservation};
use crate::rng::substream;

/// Simulated haplotypes are bit sets, so a region holds at most this many loci.
pub const MAX_SIMULATED_LOCI: usize = 128;

/// Bit `m` set means the minor allele at locus `m`.
pub type Haplotype = u128;

fn bit(h: Haplotype, locus: usize) -> u8 {
    ((h >> locus) & 1) as u8
}

/// Genotype codes of a pair of haplotypes over `num_loci` loci.
pub fn haplotype_genotypes(pair: (Haplotype, Haplotype), num_loci: usize) -> GenotypeVector {
    (0..num_loci).map(|m| bit(pair.0, m) + bit(pair.1, m)).collect()
}

/// Two-SNP haplotype frequencies from minor allele frequencies and their correlation.
///
/// Index 0b11 carries both minor alleles, 0b01 only the first, 0b10 only the second.
pub fn two_snp_pi(p1: f64, p2: f64, r: f64) -> Result<FounderFrequencies> {
    ensure!(
        p1 > 0.0 && p1 < 1.0 && p2 > 0.0 && p2 < 1.0,
        "allele frequencies ({p1}, {p2}) must lie in (0, 1)"
    );
    ensure!((-1.0..=1.0).contains(&r), "correlation {r} must lie in [-1, 1]");
    let (q1, q2) = (1.0 - p1, 1.0 - p2);
    let both = p1 * p2 + r * (p1 * q1 * p2 * q2).sqrt();
    let first_only = p1 - both;
    let second_only = p2 - both;
    let neither = 1.0 - both - first_only - second_only;
    let named = [
        ("both minor", both),
        ("first minor only", first_only),
        ("second minor only", second_only),
        ("neither minor", neither),
    ];
    const SLACK: f64 = 1e-12;
    for (name, f) in named {
        ensure!(
            (-SLACK..=1.0 + SLACK).contains(&f),
            "(p1, p2, r) = ({p1}, {p2}, {r}) gives {name} haplotype frequency {f} outside [0, 1]"
        );
    }
    let clamp = |f: f64| f.clamp(0.0, 1.0);
    FounderFrequencies::new(
        2,
        vec![clamp(neither), clamp(first_only), clamp(second_only), clamp(both)],
    )
}

/// Correlation between the minor alleles of two loci under two-SNP haplotype frequencies.
pub fn two_snp_correlation(freqs: &FounderFrequencies) -> f64 {
    let f = freqs.freqs();
    let (p1, p2) = (f[1] + f[3], f[2] + f[3]);
    (f[3] - p1 * p2) / (p1 * (1.0 - p1) * p2 * (1.0 - p2)).sqrt()
}

/// Genotype probabilities `(q² + Fpq, 2pq(1 − F), p² + Fpq)`.
pub fn fixation_genotype_probs(p: f64, f: f64) -> [f64; 3] {
    let q = 1.0 - p;
    [q * q + f * p * q, 2.0 * p * q * (1.0 - f), p * p + f * p * q]
}

/// Phased reference haplotypes over a region.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferencePanel {
    num_loci: usize,
    haplotypes: Vec<Haplotype>,
}

impl ReferencePanel {
    pub fn new(num_loci: usize, haplotypes: Vec<Haplotype>) -> Result<Self> {
        ensure!(
            (1..=MAX_SIMULATED_LOCI).contains(&num_loci),
            "panel must cover 1..={MAX_SIMULATED_LOCI} loci, got {num_loci}"
        );
        ensure!(!haplotypes.is_empty(), "reference panel has no haplotypes");
        let mask = if num_loci == 128 {
            u128::MAX
        } else {
            (1u128 << num_loci) - 1
        };
        ensure!(
            haplotypes.iter().all(|&h| h & !mask == 0),
            "panel haplotype has alleles beyond locus {num_loci}"
        );
        Ok(Self { num_loci, haplotypes })
    }

    /// Parses `#loci <M>` followed by one 0/1 string per haplotype.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: source.to_string(),
            line,
            message,
        };
        let mut num_loci = None;
        let mut haplotypes = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let mut words = rest.split_whitespace();
                if words.next() == Some("loci") && num_loci.is_none() {
                    let m = words
                        .next()
                        .and_then(|w| w.parse::<usize>().ok())
                        .ok_or_else(|| err(i + 1, "expected `#loci <count>`".into()))?;
                    if !(1..=MAX_SIMULATED_LOCI).contains(&m) {
                        return Err(err(i + 1, format!("locus count {m} not in 1..={MAX_SIMULATED_LOCI}")));
                    }
                    num_loci = Some(m);
                }
                continue;
            }
            let m = num_loci.ok_or_else(|| err(i + 1, "haplotype before `#loci` header".into()))?;
            if line.len() != m {
                return Err(err(
                    i + 1,
                    format!("haplotype has {} alleles, expected {m}", line.len()),
                ));
            }
            let mut h: Haplotype = 0;
            for (locus, c) in line.chars().enumerate() {
                match c {
                    '0' => {}
                    '1' => h |= 1 << locus,
                    _ => return Err(err(i + 1, format!("unexpected character `{c}` in haplotype"))),
                }
            }
            haplotypes.push(h);
        }
        let m = num_loci.ok_or_else(|| err(1, "missing `#loci` header".into()))?;
        if haplotypes.is_empty() {
            return Err(err(text.lines().count().max(1), "panel has no haplotypes".into()));
        }
        Self::new(m, haplotypes)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("#loci {}\n", self.num_loci);
        for &h in &self.haplotypes {
            out.extend((0..self.num_loci).map(|m| if bit(h, m) == 1 { '1' } else { '0' }));
            out.push('\n');
        }
        out
    }

    pub fn num_loci(&self) -> usize {
        self.num_loci
    }

    pub fn haplotypes(&self) -> &[Haplotype] {
        &self.haplotypes
    }

    pub fn len(&self) -> usize {
        self.haplotypes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.haplotypes.is_empty()
    }

    /// Per-locus frequency of allele `1`.
    pub fn mafs(&self) -> Vec<f64> {
        let n = self.haplotypes.len() as f64;
        (0..self.num_loci)
            .map(|m| self.haplotypes.iter().filter(|&&h| bit(h, m) == 1).count() as f64 / n)
            .collect()
    }

    /// Panel restricted to `loci`, in the given order.
    pub fn select_loci(&self, loci: &[usize]) -> Result<Self> {
        ensure!(
            loci.iter().all(|&m| m < self.num_loci),
            "loci {loci:?} out of range for a {}-locus panel",
            self.num_loci
        );
        let haplotypes = self
            .haplotypes
            .iter()
            .map(|&h| {
                loci.iter()
                    .enumerate()
                    .fold(0, |acc, (i, &m)| acc | ((bit(h, m) as Haplotype) << i))
            })
            .collect();
        Self::new(loci.len(), haplotypes)
    }

    /// Empirical haplotype frequencies.
    pub fn frequencies(&self) -> Result<FounderFrequencies> {
        ensure!(
            self.num_loci <= MAX_JOINT_LOCI,
            "haplotype frequencies need at most {MAX_JOINT_LOCI} loci, panel has {}",
            self.num_loci
        );
        let mut counts = vec![0.0; 1 << self.num_loci];
        for &h in &self.haplotypes {
            counts[h as usize] += 1.0;
        }
        Ok(FounderFrequencies::from_weights(self.num_loci, &counts))
    }
}

/// How founder haplotypes are drawn.
#[derive(Clone, Debug, PartialEq)]
pub enum FounderModel {
    /// Explicit haplotype frequencies, Hardy–Weinberg pairing.
    Haplotypes(FounderFrequencies),
    /// Independent loci with these minor allele frequencies.
    Mafs(Vec<f64>),
    /// Uniform draws with replacement from a phased panel.
    Panel(ReferencePanel),
    /// One SNP whose founder genotypes depart from Hardy–Weinberg by fixation index `f`.
    Fixation { maf: f64, f: f64 },
}

impl FounderModel {
    pub fn two_snp(p1: f64, p2: f64, r: f64) -> Result<Self> {
        Ok(FounderModel::Haplotypes(two_snp_pi(p1, p2, r)?))
    }

    pub fn num_loci(&self) -> usize {
        match self {
            FounderModel::Haplotypes(f) => f.num_loci(),
            FounderModel::Mafs(p) => p.len(),
            FounderModel::Panel(panel) => panel.num_loci(),
            FounderModel::Fixation { .. } => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FounderModel::Haplotypes(_) | FounderModel::Panel(_) => {}
            FounderModel::Mafs(p) => {
                ensure!(
                    (1..=MAX_SIMULATED_LOCI).contains(&p.len()),
                    "need 1..={MAX_SIMULATED_LOCI} allele frequencies, got {}",
                    p.len()
                );
                ensure!(
                    p.iter().all(|x| (0.0..=1.0).contains(x)),
                    "allele frequencies {p:?} outside [0, 1]"
                );
            }
            &FounderModel::Fixation { maf, f } => {
                ensure!(maf > 0.0 && maf < 1.0, "allele frequency {maf} must lie in (0, 1)");
                let q = 1.0 - maf;
                let lower = -(maf / q).min(q / maf);
                ensure!(
                    f > lower && f <= 1.0,
                    "fixation index {f} outside ({lower}, 1] for allele frequency {maf}"
                );
            }
        }
        Ok(())
    }

    /// Population minor allele frequency of every locus.
    pub fn mafs(&self) -> Vec<f64> {
        match self {
            FounderModel::Haplotypes(f) => f.mafs(),
            FounderModel::Mafs(p) => p.clone(),
            FounderModel::Panel(panel) => panel.mafs(),
            FounderModel::Fixation { maf, .. } => vec![*maf],
        }
    }

    /// Haplotype frequencies implied by the model (allele frequencies for the fixation model).
    pub fn frequencies(&self) -> Result<FounderFrequencies> {
        match self {
            FounderModel::Haplotypes(f) => Ok(f.clone()),
            FounderModel::Mafs(p) => FounderFrequencies::independent(p),
            FounderModel::Panel(panel) => panel.frequencies(),
            FounderModel::Fixation { maf, .. } => FounderFrequencies::from_maf(*maf),
        }
    }

    /// Haplotype frequencies over a subset of loci, in the given order.
    pub fn marginal_frequencies(&self, loci: &[usize]) -> Result<FounderFrequencies> {
        let m = self.num_loci();
        ensure!(loci.iter().all(|&l| l < m), "loci {loci:?} out of range for {m} loci");
        match self {
            FounderModel::Haplotypes(f) => f.marginal(loci),
            FounderModel::Mafs(p) => FounderFrequencies::independent(&loci.iter().map(|&l| p[l]).collect::<Vec<_>>()),
            FounderModel::Panel(panel) => panel.select_loci(loci)?.frequencies(),
            FounderModel::Fixation { maf, .. } => FounderFrequencies::from_maf(*maf),
        }
    }

    fn is_hardy_weinberg(&self) -> bool {
        !matches!(self, FounderModel::Fixation { f, .. } if *f != 0.0)
    }
}

/// Prepared sampler for a founder model.
#[derive(Clone, Debug)]
pub struct FounderSampler<'a> {
    model: &'a FounderModel,
    table: Option<WeightedIndex<f64>>,
}

impl<'a> FounderSampler<'a> {
    pub fn new(model: &'a FounderModel) -> Result<Self> {
        model.validate()?;
        let table = match model {
            FounderModel::Haplotypes(f) => Some(
                WeightedIndex::new(f.freqs())
                    .map_err(|e| Error::Validation(format!("unusable haplotype frequencies: {e}")))?,
            ),
            _ => None,
        };
        Ok(Self { model, table })
    }

    pub fn model(&self) -> &FounderModel {
        self.model
    }

    /// One founder haplotype; `None` when founders are drawn as whole genotypes.
    pub fn haplotype(&self, rng: &mut ChaCha8Rng) -> Option<Haplotype> {
        match self.model {
            FounderModel::Haplotypes(_) => Some(self.table.as_ref().expect("prepared table").sample(rng) as Haplotype),
            FounderModel::Mafs(p) => Some(p.iter().enumerate().fold(0, |acc, (m, &pm)| {
                acc | (((rng.random::<f64>() < pm) as Haplotype) << m)
            })),
            FounderModel::Panel(panel) => Some(panel.haplotypes[rng.random_range(0..panel.len())]),
            FounderModel::Fixation { .. } => None,
        }
    }

    /// A founder's unordered pair of haplotypes.
    pub fn diplotype(&self, rng: &mut ChaCha8Rng) -> (Haplotype, Haplotype) {
        match *self.model {
            FounderModel::Fixation { maf, f } => {
                let probs = fixation_genotype_probs(maf, f);
                let u = rng.random::<f64>();
                if u < probs[0] {
                    (0, 0)
                } else if u < probs[0] + probs[1] {
                    (0, 1)
                } else {
                    (1, 1)
                }
            }
            _ => {
                let a = self.haplotype(rng).expect("haplotype model");
                let b = self.haplotype(rng).expect("haplotype model");
                (a.min(b), a.max(b))
            }
        }
    }
}

/// Draws a founder diploid haplotype.
pub fn sample_founder_diplotype(model: &FounderModel, rng: &mut ChaCha8Rng) -> Result<(Haplotype, Haplotype)> {
    Ok(FounderSampler::new(model)?.diplotype(rng))
}

fn transmit(parent: (Haplotype, Haplotype), rng: &mut ChaCha8Rng) -> Haplotype {
    if rng.random::<bool>() {
        parent.0
    } else {
        parent.1
    }
}

fn child(a: (Haplotype, Haplotype), b: (Haplotype, Haplotype), rng: &mut ChaCha8Rng) -> (Haplotype, Haplotype) {
    (transmit(a, rng), transmit(b, rng))
}

/// Members' haplotype pairs by dropping founder haplotypes through the pedigree.
fn gene_drop(
    rel: &Relationship,
    sampler: &FounderSampler<'_>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(Haplotype, Haplotype)>> {
    let mut founder = || sampler.diplotype(rng);
    Ok(match rel {
        Relationship::UnrelatedSingleton => vec![founder()],
        Relationship::ParentOffspringTrio => {
            let (a, b) = (founder(), founder());
            vec![a, b, child(a, b, rng)]
        }
        Relationship::SibPair => {
            let (a, b) = (founder(), founder());
            vec![child(a, b, rng), child(a, b, rng)]
        }
        Relationship::FirstCousinPair => {
            let (g1, g2, s1, s2) = (founder(), founder(), founder(), founder());
            let c1 = child(g1, g2, rng);
            let c2 = child(g1, g2, rng);
            vec![child(c1, s1, rng), child(c2, s2, rng)]
        }
        r if *r == Relationship::nuclear_family() => {
            let (a, b) = (founder(), founder());
            vec![a, b, child(a, b, rng), child(a, b, rng)]
        }
        other => {
            return Err(Error::Validation(format!(
                "{other} has no pedigree to drop genes through; non-Hardy–Weinberg founders need a built-in family"
            )))
        }
    })
}

fn icc_draw(
    rel: &Relationship,
    sampler: &FounderSampler<'_>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(Haplotype, Haplotype)>> {
    let dist = icc_distribution(rel)?;
    let entries = dist.entries();
    let u = rng.random::<f64>();
    let mut acc = 0.0;
    let mut chosen = &entries[entries.len() - 1].0;
    for (icc, w) in entries {
        acc += w;
        if u < acc {
            chosen = icc;
            break;
        }
    }
    let slots: Vec<Haplotype> = (0..chosen.num_distinct())
        .map(|_| sampler.haplotype(rng).expect("haplotype model"))
        .collect();
    let classes = chosen.classes();
    Ok((0..chosen.num_members())
        .map(|s| {
            let (a, b) = (slots[classes[2 * s] as usize], slots[classes[2 * s + 1] as usize]);
            (a.min(b), a.max(b))
        })
        .collect())
}

/// Haplotype pairs of every member of one simulated family.
///
/// Trios and non-Hardy–Weinberg founders go through explicit transmission;
/// every other case draws an IBD configuration and one haplotype per distinct slot.
pub fn simulate_family(
    rel: &Relationship,
    sampler: &FounderSampler<'_>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(Haplotype, Haplotype)>> {
    if !sampler.model().is_hardy_weinberg() || *rel == Relationship::ParentOffspringTrio {
        gene_drop(rel, sampler, rng)
    } else {
        icc_draw(rel, sampler, rng)
    }
}

/// Read depth per locus.
#[derive(Clone, Debug, PartialEq)]
pub enum DepthModel {
    /// Poisson with this mean, conditioned on at least one read.
    Poisson(Vec<f64>),
    Fixed(Vec<u32>),
}

impl DepthModel {
    pub fn poisson(mean: f64, num_loci: usize) -> Self {
        DepthModel::Poisson(vec![mean; num_loci])
    }

    pub fn fixed(depth: u32, num_loci: usize) -> Self {
        DepthModel::Fixed(vec![depth; num_loci])
    }

    pub fn num_loci(&self) -> usize {
        match self {
            DepthModel::Poisson(v) => v.len(),
            DepthModel::Fixed(v) => v.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let DepthModel::Poisson(means) = self {
            ensure!(
                means.iter().all(|&mu| mu > 0.0 && mu.is_finite()),
                "Poisson depth means must be positive, got {means:?}"
            );
        }
        Ok(())
    }

    /// Expected depth per locus.
    pub fn expected(&self) -> Vec<f64> {
        match self {
            DepthModel::Poisson(means) => means.iter().map(|&mu| mu / (1.0 - (-mu).exp())).collect(),
            DepthModel::Fixed(d) => d.iter().map(|&x| x as f64).collect(),
        }
    }
}

/// Draws from a Poisson(`mean`) conditioned on being at least one.
pub fn zero_truncated_poisson(poisson: &Poisson<f64>, rng: &mut ChaCha8Rng) -> u32 {
    loop {
        let d = poisson.sample(rng);
        if d >= 1.0 {
            return d as u32;
        }
    }
}

/// Per-SNP read error rates.
#[derive(Clone, Debug, PartialEq)]
pub enum ErrorModel {
    Fixed(Vec<f64>),
    /// Drawn once per SNP and replication, uniformly on `[lo, hi]`.
    Uniform {
        lo: f64,
        hi: f64,
    },
}

impl ErrorModel {
    pub fn validate(&self, num_loci: usize) -> Result<()> {
        match self {
            ErrorModel::Fixed(a) => {
                ensure!(a.len() == num_loci, "{} error rates for {num_loci} loci", a.len());
                a.iter().try_for_each(|&x| validate_alpha(x))
            }
            &ErrorModel::Uniform { lo, hi } => {
                ensure!(
                    0.0 <= lo && lo <= hi && hi < 0.5,
                    "error range [{lo}, {hi}] must satisfy 0 <= lo <= hi < 0.5"
                );
                Ok(())
            }
        }
    }

    pub fn draw(&self, num_loci: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            ErrorModel::Fixed(a) => a.clone(),
            &ErrorModel::Uniform { lo, hi } => (0..num_loci)
                .map(|_| if lo == hi { lo } else { rng.random_range(lo..=hi) })
                .collect(),
        }
    }
}

/// Prepared depth sampler.
struct DepthSampler {
    poisson: Option<Vec<Poisson<f64>>>,
    fixed: Vec<u32>,
}

impl DepthSampler {
    fn new(model: &DepthModel) -> Result<Self> {
        model.validate()?;
        Ok(match model {
            DepthModel::Poisson(means) => Self {
                poisson: Some(
                    means
                        .iter()
                        .map(|&mu| Poisson::new(mu).map_err(|e| Error::Validation(format!("Poisson mean {mu}: {e}"))))
                        .collect::<Result<_>>()?,
                ),
                fixed: Vec::new(),
            },
            DepthModel::Fixed(d) => Self {
                poisson: None,
                fixed: d.clone(),
            },
        })
    }

    fn depth(&self, locus: usize, rng: &mut ChaCha8Rng) -> u32 {
        match &self.poisson {
            Some(p) => zero_truncated_poisson(&p[locus], rng),
            None => self.fixed[locus],
        }
    }
}

fn draw_variants(g: u8, depth: u32, alpha: f64, rng: &mut ChaCha8Rng) -> u32 {
    let p = match g {
        0 => alpha,
        1 => 0.5,
        _ => 1.0 - alpha,
    };
    Binomial::new(depth as u64, p).expect("valid binomial").sample(rng) as u32
}

/// Reads of one member: a depth per locus, then a binomial variant count for its genotype.
pub fn simulate_reads(
    genotypes: &[u8],
    depth: &DepthModel,
    alphas: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ReadObservation>> {
    ensure!(
        genotypes.len() == depth.num_loci() && genotypes.len() == alphas.len(),
        "genotypes, depths and error rates cover different numbers of loci"
    );
    let sampler = DepthSampler::new(depth)?;
    Ok(member_reads(genotypes, &sampler, alphas, rng))
}

fn member_reads(genotypes: &[u8], depth: &DepthSampler, alphas: &[f64], rng: &mut ChaCha8Rng) -> Vec<ReadObservation> {
    genotypes
        .iter()
        .enumerate()
        .map(|(m, &g)| {
            let n = depth.depth(m, rng);
            let y = draw_variants(g, n, alphas[m], rng);
            ReadObservation { depth: n, variants: y }
        })
        .collect()
}

/// Everything needed to generate replicated datasets.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub relationship: Relationship,
    pub families: usize,
    pub founders: FounderModel,
    pub depth: DepthModel,
    pub errors: ErrorModel,
    pub replications: usize,
    pub seed: u64,
    /// Member positions scored by the evaluation harness; all members when `None`.
    pub scored_members: Option<Vec<usize>>,
}

impl ScenarioConfig {
    pub fn num_loci(&self) -> usize {
        self.founders.num_loci()
    }

    pub fn validate(&self) -> Result<()> {
        self.relationship.validate()?;
        self.founders.validate()?;
        let m = self.num_loci();
        ensure!(
            m <= MAX_SIMULATED_LOCI,
            "at most {MAX_SIMULATED_LOCI} loci can be simulated, got {m}"
        );
        ensure!(self.families >= 1, "scenario needs at least one family");
        ensure!(self.replications >= 1, "scenario needs at least one replication");
        ensure!(
            self.depth.num_loci() == m,
            "depth model covers {} loci, founders {m}",
            self.depth.num_loci()
        );
        self.depth.validate()?;
        self.errors.validate(m)?;
        if let Some(members) = &self.scored_members {
            let k = self.relationship.num_members();
            ensure!(
                !members.is_empty() && members.iter().all(|&s| s < k),
                "scored members {members:?} must be nonempty positions below {k}"
            );
        }
        if !self.founders.is_hardy_weinberg() {
            ensure!(
                matches!(
                    self.relationship,
                    Relationship::UnrelatedSingleton
                        | Relationship::ParentOffspringTrio
                        | Relationship::SibPair
                        | Relationship::FirstCousinPair
                ) || self.relationship == Relationship::nuclear_family(),
                "non-Hardy–Weinberg founders need a built-in family, not {}",
                self.relationship
            );
        }
        Ok(())
    }

    /// Expected total number of reads per SNP over one replication.
    pub fn expected_reads_per_snp(&self) -> Vec<f64> {
        let people = (self.families * self.relationship.num_members()) as f64;
        self.depth.expected().iter().map(|d| d * people).collect()
    }

    /// Parses a TOML scenario; panel paths resolve against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Validation(format!("scenario file: {e}")))?;
        file.resolve(base_dir)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// True parameters of one replication over `loci`, for calling with known parameters.
    pub fn true_params(&self, truth: &TruthSet, loci: &[usize]) -> Result<ModelParams> {
        let alphas = loci.iter().map(|&l| truth.alphas[l]).collect();
        ModelParams::new(self.founders.marginal_frequencies(loci)?, ErrorRates::new(alphas)?)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PerLocus<T> {
    One(T),
    Each(Vec<T>),
}

impl<T: Clone> PerLocus<T> {
    fn resolve(self, num_loci: usize, what: &str) -> Result<Vec<T>> {
        match self {
            PerLocus::One(x) => Ok(vec![x; num_loci]),
            PerLocus::Each(v) => {
                ensure!(v.len() == num_loci, "{what}: {} values for {num_loci} loci", v.len());
                Ok(v)
            }
        }
    }
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum FounderSpec {
    Mafs { mafs: Vec<f64> },
    Haplotypes { freqs: Vec<f64> },
    TwoSnp { p1: f64, p2: f64, r: f64 },
    Panel { path: PathBuf, loci: Option<Vec<usize>> },
    Fixation { maf: f64, f: f64 },
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum DepthSpec {
    Poisson(PerLocus<f64>),
    Fixed(PerLocus<u32>),
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum ErrorSpec {
    Fixed(PerLocus<f64>),
    Uniform { lo: f64, hi: f64 },
}

fn one() -> usize {
    1
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    relationship: String,
    kinship: Option<[f64; 3]>,
    families: usize,
    #[serde(default = "one")]
    replications: usize,
    #[serde(default)]
    seed: u64,
    scored_members: Option<Vec<usize>>,
    founders: FounderSpec,
    depth: DepthSpec,
    errors: ErrorSpec,
}

impl ScenarioFile {
    fn resolve(self, base_dir: &Path) -> Result<ScenarioConfig> {
        let founders = match self.founders {
            FounderSpec::Mafs { mafs } => FounderModel::Mafs(mafs),
            FounderSpec::Haplotypes { freqs } => {
                let h = freqs.len();
                ensure!(
                    h >= 2 && h.is_power_of_two(),
                    "{h} haplotype frequencies is not a power of two"
                );
                FounderModel::Haplotypes(FounderFrequencies::new(h.trailing_zeros() as usize, freqs)?)
            }
            FounderSpec::TwoSnp { p1, p2, r } => FounderModel::two_snp(p1, p2, r)?,
            FounderSpec::Panel { path, loci } => {
                let panel = ReferencePanel::load(&base_dir.join(path))?;
                FounderModel::Panel(match loci {
                    Some(l) => panel.select_loci(&l)?,
                    None => panel,
                })
            }
            FounderSpec::Fixation { maf, f } => FounderModel::Fixation { maf, f },
        };
        let m = founders.num_loci();
        let depth = match self.depth {
            DepthSpec::Poisson(v) => DepthModel::Poisson(v.resolve(m, "depth")?),
            DepthSpec::Fixed(v) => DepthModel::Fixed(v.resolve(m, "depth")?),
        };
        let errors = match self.errors {
            ErrorSpec::Fixed(v) => ErrorModel::Fixed(v.resolve(m, "errors")?),
            ErrorSpec::Uniform { lo, hi } => ErrorModel::Uniform { lo, hi },
        };
        let config = ScenarioConfig {
            relationship: Relationship::from_tag(&self.relationship, self.kinship)?,
            families: self.families,
            founders,
            depth,
            errors,
            replications: self.replications,
            seed: self.seed,
            scored_members: self.scored_members,
        };
        config.validate()?;
        Ok(config)
    }
}

/// True state behind one simulated replication.
#[derive(Clone, Debug, PartialEq)]
pub struct TruthSet {
    /// `genotypes[family][member][locus]`.
    pub genotypes: Vec<Vec<GenotypeVector>>,
    /// Unordered haplotype pair of every member.
    pub haplotypes: Vec<Vec<(Haplotype, Haplotype)>>,
    /// Read error rate used at each SNP.
    pub alphas: Vec<f64>,
}

fn width(count: usize) -> usize {
    count.to_string().len()
}

/// Replication `rep` of a scenario; independent of every other replication.
pub fn simulate_replication(config: &ScenarioConfig, rep: usize) -> Result<(Dataset, TruthSet)> {
    config.validate()?;
    let m = config.num_loci();
    let alphas = config.errors.draw(m, &mut substream(config.seed, &[rep as u64, 0]));
    let sampler = FounderSampler::new(&config.founders)?;
    let depth = DepthSampler::new(&config.depth)?;
    let w = width(config.families);
    let per_family: Vec<(Family, Vec<(Haplotype, Haplotype)>)> = (0..config.families)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(config.seed, &[rep as u64, 1, i as u64]);
            let haps = simulate_family(&config.relationship, &sampler, &mut rng)?;
            let reads = haps
                .iter()
                .map(|&pair| member_reads(&haplotype_genotypes(pair, m), &depth, &alphas, &mut rng))
                .collect();
            let family = Family::anonymous(format!("F{:0w$}", i + 1), config.relationship.clone(), reads)?;
            Ok((family, haps))
        })
        .collect::<Result<_>>()?;
    let (families, haplotypes): (Vec<_>, Vec<_>) = per_family.into_iter().unzip();
    let genotypes = haplotypes
        .iter()
        .map(|f: &Vec<(Haplotype, Haplotype)>| f.iter().map(|&pair| haplotype_genotypes(pair, m)).collect())
        .collect();
    let ws = width(m);
    let snp_ids = (1..=m).map(|j| format!("snp{j:0ws$}")).collect();
    Ok((
        Dataset::new(snp_ids, families)?,
        TruthSet {
            genotypes,
            haplotypes,
            alphas,
        },
    ))
}

/// All replications of a scenario, simulated in parallel.
pub fn run_scenario(config: &ScenarioConfig) -> Result<Vec<(Dataset, TruthSet)>> {
    config.validate()?;
    (0..config.replications)
        .into_par_iter()
        .map(|rep| simulate_replication(config, rep))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn trio_config() -> ScenarioConfig {
        ScenarioConfig {
            relationship: Relationship::ParentOffspringTrio,
            families: 20,
            founders: FounderModel::Mafs(vec![0.1, 0.3]),
            depth: DepthModel::poisson(10.0, 2),
            errors: ErrorModel::Uniform { lo: 0.001, hi: 0.1 },
            replications: 3,
            seed: 42,
            scored_members: None,
        }
    }

    #[test]
    fn two_snp_independence_and_perfect_ld() {
        let f = two_snp_pi(0.1, 0.3, 0.0).unwrap();
        let expected = [0.9 * 0.7, 0.1 * 0.7, 0.9 * 0.3, 0.1 * 0.3];
        for (a, b) in f.freqs().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        let f = two_snp_pi(0.2, 0.2, 1.0).unwrap();
        for (a, b) in f.freqs().iter().zip([0.8, 0.0, 0.0, 0.2]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn two_snp_roundtrip_of_strong_ld() {
        let r = 0.9f64.sqrt();
        let f = two_snp_pi(0.01, 0.01, r).unwrap();
        assert!((two_snp_correlation(&f) - r).abs() < 1e-12);
    }

    #[test]
    fn two_snp_infeasible_triples_rejected() {
        let err = two_snp_pi(0.01, 0.4, 0.9).unwrap_err();
        assert!(err.to_string().contains("outside [0, 1]"), "{err}");
        assert!(two_snp_pi(0.0, 0.4, 0.0).is_err());
    }

    #[test]
    fn fixation_extremes() {
        let hw = fixation_genotype_probs(0.3, 0.0);
        assert_eq!(
            hw,
            FounderFrequencies::from_maf(0.3).unwrap().hw_genotype_frequencies(0)
        );
        let full = fixation_genotype_probs(0.3, 1.0);
        assert!((full[0] - 0.7).abs() < 1e-15 && full[1] == 0.0 && (full[2] - 0.3).abs() < 1e-15);
        assert!(FounderModel::Fixation { maf: 0.3, f: -0.5 }.validate().is_err());
        assert!(FounderModel::Fixation { maf: 0.3, f: -0.4 }.validate().is_ok());
    }

    #[test]
    fn fixation_sampling_without_heterozygotes() {
        let model = FounderModel::Fixation { maf: 0.3, f: 1.0 };
        let s = FounderSampler::new(&model).unwrap();
        let mut r = rng(1);
        let mut counts = [0usize; 3];
        for _ in 0..20_000 {
            let d = s.diplotype(&mut r);
            counts[(bit(d.0, 0) + bit(d.1, 0)) as usize] += 1;
        }
        assert_eq!(counts[1], 0);
        let frac = counts[2] as f64 / 20_000.0;
        assert!((frac - 0.3).abs() < 3.0 * (0.3f64 * 0.7 / 20_000.0).sqrt() + 1e-9);
    }

    #[test]
    fn panel_parse_and_errors() {
        let panel = ReferencePanel::parse("#loci 3\n010\n\n110\n", "p").unwrap();
        assert_eq!(panel.haplotypes(), &[0b010, 0b011]);
        assert_eq!(panel.mafs(), vec![0.5, 1.0, 0.0]);
        assert_eq!(ReferencePanel::parse(&panel.to_text(), "p").unwrap(), panel);
        let sub = panel.select_loci(&[1, 0]).unwrap();
        assert_eq!(sub.haplotypes(), &[0b01, 0b11]);
        assert!(matches!(
            ReferencePanel::parse("#loci 3\n01\n", "p"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            ReferencePanel::parse("010\n", "p"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(ReferencePanel::parse("#loci 2\n0x\n", "p").is_err());
        assert!(ReferencePanel::parse("#loci 2\n", "p").is_err());
    }

    #[test]
    fn panel_draws_are_uniform() {
        let panel = ReferencePanel::new(2, vec![0, 1, 2, 3]).unwrap();
        let model = FounderModel::Panel(panel);
        let s = FounderSampler::new(&model).unwrap();
        let mut r = rng(2);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[s.haplotype(&mut r).unwrap() as usize] += 1;
        }
        let se = (0.25f64 * 0.75 / n as f64).sqrt();
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() < 3.0 * se, "{counts:?}");
        }
    }

    #[test]
    fn singleton_genotypes_follow_hardy_weinberg() {
        let model = FounderModel::Mafs(vec![0.5]);
        let s = FounderSampler::new(&model).unwrap();
        let mut r = rng(3);
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            let f = simulate_family(&Relationship::UnrelatedSingleton, &s, &mut r).unwrap();
            counts[haplotype_genotypes(f[0], 1)[0] as usize] += 1;
        }
        for (c, p) in counts.iter().zip([0.25, 0.5, 0.25]) {
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((*c as f64 / n as f64 - p).abs() < 3.5 * se, "{counts:?}");
        }
    }

    #[test]
    fn sibs_from_panel_keep_panel_haplotype_distribution() {
        let panel = ReferencePanel::new(2, vec![0, 0, 3, 1]).unwrap();
        let model = FounderModel::Panel(panel);
        let s = FounderSampler::new(&model).unwrap();
        let mut r = rng(4);
        let n = 50_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            let f = simulate_family(&Relationship::SibPair, &s, &mut r).unwrap();
            counts[f[1].0 as usize] += 1;
            counts[f[1].1 as usize] += 1;
        }
        for (c, p) in counts.iter().zip([0.5, 0.25, 0.0, 0.25]) {
            let frac = *c as f64 / (2 * n) as f64;
            // the two haplotypes of a sib are independent draws
            let se = (p * (1.0 - p) / (2 * n) as f64).sqrt();
            assert!((frac - p).abs() <= 3.5 * se + 1e-12, "{counts:?}");
        }
    }

    #[test]
    fn gene_drop_rejects_generic_pairs() {
        let model = FounderModel::Fixation { maf: 0.3, f: 0.2 };
        let s = FounderSampler::new(&model).unwrap();
        let rel = Relationship::RelativePair {
            k0: 0.5,
            k1: 0.5,
            k2: 0.0,
        };
        assert!(simulate_family(&rel, &s, &mut rng(0)).is_err());
        let fam = simulate_family(&Relationship::nuclear_family(), &s, &mut rng(0)).unwrap();
        assert_eq!(fam.len(), 4);
    }

    #[test]
    fn read_moments() {
        let mut r = rng(5);
        let n = 100_000;
        let fixed = DepthModel::fixed(10, 1);
        let mut total = 0u64;
        for _ in 0..n {
            total += simulate_reads(&[0], &fixed, &[0.05], &mut r).unwrap()[0].variants as u64;
        }
        let se = (10.0f64 * 0.05 * 0.95 / n as f64).sqrt();
        assert!((total as f64 / n as f64 - 0.5).abs() < 3.0 * se);

        let pois = DepthModel::poisson(2.0, 1);
        let mut het_y = 0u64;
        let mut het_n = 0u64;
        for _ in 0..n {
            let o = simulate_reads(&[1], &pois, &[0.3], &mut r).unwrap()[0];
            assert!(o.depth >= 1);
            het_y += o.variants as u64;
            het_n += o.depth as u64;
        }
        let frac = het_y as f64 / het_n as f64;
        assert!((frac - 0.5).abs() < 3.0 * (0.25 / het_n as f64).sqrt());
    }

    #[test]
    fn replications_are_deterministic_and_distinct() {
        let config = trio_config();
        let a = run_scenario(&config).unwrap();
        let b = run_scenario(&config).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].0, a[1].0);
        assert_eq!(simulate_replication(&config, 2).unwrap(), a[2]);
        let (data, truth) = &a[0];
        assert_eq!(data.families.len(), 20);
        assert_eq!(truth.alphas.len(), 2);
        assert!(truth.alphas.iter().all(|a| (0.001..=0.1).contains(a)));
        // children inherit one haplotype from each parent
        for h in &truth.haplotypes {
            let [a, b, c] = [h[0], h[1], h[2]];
            let from = |p: (Haplotype, Haplotype), x: Haplotype| p.0 == x || p.1 == x;
            assert!((from(a, c.0) && from(b, c.1)) || (from(a, c.1) && from(b, c.0)));
        }
    }

    #[test]
    fn read_budget_arms_have_equal_totals() {
        let arm = |rel: Relationship, depth| ScenarioConfig {
            relationship: rel,
            families: 50,
            founders: FounderModel::Mafs(vec![0.1]),
            depth: DepthModel::fixed(depth, 1),
            errors: ErrorModel::Fixed(vec![0.01]),
            replications: 1,
            seed: 1,
            scored_members: None,
        };
        for (rel, d) in [(Relationship::SibPair, 10), (Relationship::nuclear_family(), 5)] {
            let config = arm(rel, d);
            assert_eq!(config.expected_reads_per_snp(), vec![1000.0]);
            let (data, _) = simulate_replication(&config, 0).unwrap();
            let total: u32 = data
                .families
                .iter()
                .flat_map(|f| f.reads.iter())
                .map(|r| r[0].depth)
                .sum();
            assert_eq!(total, 1000);
        }
    }

    #[test]
    fn toml_scenario() {
        let text = r#"
            relationship = "trio"
            families = 100
            replications = 200
            seed = 9

            [founders]
            kind = "mafs"
            mafs = [0.1]

            [depth]
            poisson = 10

            [errors]
            fixed = 0.05
        "#;
        let c = ScenarioConfig::from_toml(text, Path::new(".")).unwrap();
        assert_eq!(c.relationship, Relationship::ParentOffspringTrio);
        assert_eq!(c.depth, DepthModel::Poisson(vec![10.0]));
        assert_eq!(c.errors, ErrorModel::Fixed(vec![0.05]));
        assert_eq!((c.families, c.replications, c.seed), (100, 200, 9));

        let text = r#"
            relationship = "relative"
            kinship = [0.5, 0.5, 0.0]
            families = 10
            [founders]
            kind = "two_snp"
            p1 = 0.01
            p2 = 0.01
            r = 0.9486832980505138
            [depth]
            fixed = [10, 20]
            [errors]
            uniform = { lo = 0.001, hi = 0.1 }
        "#;
        let c = ScenarioConfig::from_toml(text, Path::new(".")).unwrap();
        assert_eq!(c.num_loci(), 2);
        assert_eq!(c.depth, DepthModel::Fixed(vec![10, 20]));
        assert!(ScenarioConfig::from_toml("relationship = \"trio\"\nbogus = 1\n", Path::new(".")).is_err());
    }
}
