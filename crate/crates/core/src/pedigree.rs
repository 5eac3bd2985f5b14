//! Joint prior probabilities of genotypes and diplotypes for sets of relatives.
//!
//! A relationship is reduced to a distribution over IBD configuration classes
//! (ICCs). Each ICC partitions the `2S` allele slots of the `S` sequenced
//! members into classes of alleles identical by descent; haplotypes are drawn
//! independently from the founder frequencies for each class.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{ensure, Error, Result};
use crate::genotype::{Diplotype, FounderFrequencies, GenotypeCode, GenotypeVector, HaplotypeSpace};

/// Default upper bound on the number of raw (unmerged) family configurations.
pub const DEFAULT_CONFIGURATION_CAP: u64 = 10_000_000;

const DISTRIBUTION_TOLERANCE: f64 = 1e-12;

/// Partition of the allele slots of a set of relatives into IBD classes.
///
/// Slot `2s` and `2s + 1` hold the two alleles of member `s`. Class labels are
/// canonical: numbered by first appearance.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IccConfiguration {
    classes: Vec<u8>,
    num_distinct: usize,
}

impl IccConfiguration {
    pub fn new(classes: &[u8]) -> Result<Self> {
        ensure!(
            !classes.is_empty() && classes.len().is_multiple_of(2),
            "an IBD configuration needs an even, nonzero number of allele slots, got {}",
            classes.len()
        );
        let mut relabel: HashMap<u8, u8> = HashMap::new();
        let canonical: Vec<u8> = classes
            .iter()
            .map(|c| {
                let next = relabel.len() as u8;
                *relabel.entry(*c).or_insert(next)
            })
            .collect();
        Ok(Self {
            num_distinct: relabel.len(),
            classes: canonical,
        })
    }

    pub fn classes(&self) -> &[u8] {
        &self.classes
    }

    pub fn num_distinct(&self) -> usize {
        self.num_distinct
    }

    pub fn num_members(&self) -> usize {
        self.classes.len() / 2
    }
}

/// Probability distribution over IBD configurations for a fixed set of relatives.
#[derive(Clone, Debug, PartialEq)]
pub struct IccDistribution {
    entries: Vec<(IccConfiguration, f64)>,
}

impl IccDistribution {
    pub fn new(entries: Vec<(IccConfiguration, f64)>) -> Result<Self> {
        ensure!(!entries.is_empty(), "an IBD configuration distribution cannot be empty");
        let members = entries[0].0.num_members();
        ensure!(
            entries.iter().all(|(c, _)| c.num_members() == members),
            "all IBD configurations must cover the same members"
        );
        ensure!(
            entries.iter().all(|(_, p)| (0.0..=1.0).contains(p)),
            "IBD configuration probabilities must lie in [0, 1]"
        );
        let total: f64 = entries.iter().map(|(_, p)| p).sum();
        ensure!(
            (total - 1.0).abs() <= DISTRIBUTION_TOLERANCE,
            "IBD configuration probabilities sum to {total}, not 1"
        );
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(IccConfiguration, f64)] {
        &self.entries
    }

    pub fn num_members(&self) -> usize {
        self.entries[0].0.num_members()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Relationship {
    UnrelatedSingleton,
    /// Members ordered (parent, parent, child).
    ParentOffspringTrio,
    SibPair,
    FirstCousinPair,
    /// Pair sharing 0, 1 or 2 alleles IBD with probabilities `k0`, `k1`, `k2`.
    RelativePair {
        k0: f64,
        k1: f64,
        k2: f64,
    },
    CustomIcc(IccDistribution),
}

impl Relationship {
    /// Two parents followed by two of their children.
    pub fn nuclear_family() -> Self {
        let parents = [0u8, 1, 2, 3, 0, 2];
        let entries = [[0u8, 2], [0, 3], [1, 2], [1, 3]]
            .iter()
            .map(|second_child| {
                let mut classes = parents.to_vec();
                classes.extend_from_slice(second_child);
                (IccConfiguration::new(&classes).expect("static configuration"), 0.25)
            })
            .collect();
        Relationship::CustomIcc(IccDistribution::new(entries).expect("static distribution"))
    }

    pub fn num_members(&self) -> usize {
        match self {
            Relationship::UnrelatedSingleton => 1,
            Relationship::ParentOffspringTrio => 3,
            Relationship::SibPair | Relationship::FirstCousinPair => 2,
            Relationship::RelativePair { .. } => 2,
            Relationship::CustomIcc(d) => d.num_members(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Relationship::RelativePair { k0, k1, k2 } = *self {
            ensure!(
                [k0, k1, k2].iter().all(|k| (0.0..=1.0).contains(k)),
                "IBD sharing probabilities ({k0}, {k1}, {k2}) must lie in [0, 1]"
            );
            let total = k0 + k1 + k2;
            ensure!(
                (total - 1.0).abs() <= DISTRIBUTION_TOLERANCE,
                "IBD sharing probabilities ({k0}, {k1}, {k2}) sum to {total}, not 1"
            );
        }
        Ok(())
    }

    /// Parses a short relationship tag: `singleton`, `trio`, `sib`, `cousin`,
    /// `nuclear`, or `relative` (which needs the three IBD sharing probabilities).
    pub fn from_tag(tag: &str, kinship: Option<[f64; 3]>) -> Result<Self> {
        let rel = match (tag, kinship) {
            ("relative", Some([k0, k1, k2])) => Relationship::RelativePair { k0, k1, k2 },
            ("relative", None) => return Err(Error::Validation("relationship `relative` needs k0, k1 and k2".into())),
            (_, Some(_)) => {
                return Err(Error::Validation(format!(
                    "relationship `{tag}` takes no IBD probabilities"
                )))
            }
            ("singleton", None) => Relationship::UnrelatedSingleton,
            ("trio", None) => Relationship::ParentOffspringTrio,
            ("sib", None) => Relationship::SibPair,
            ("cousin", None) => Relationship::FirstCousinPair,
            ("nuclear", None) => Relationship::nuclear_family(),
            _ => return Err(Error::Validation(format!("unknown relationship `{tag}`"))),
        };
        rel.validate()?;
        Ok(rel)
    }

    /// Short tag understood by [`Relationship::from_tag`]; `None` for custom
    /// IBD distributions other than the nuclear family.
    pub fn tag(&self) -> Option<&'static str> {
        match self {
            Relationship::UnrelatedSingleton => Some("singleton"),
            Relationship::ParentOffspringTrio => Some("trio"),
            Relationship::SibPair => Some("sib"),
            Relationship::FirstCousinPair => Some("cousin"),
            Relationship::RelativePair { .. } => Some("relative"),
            Relationship::CustomIcc(_) if *self == Relationship::nuclear_family() => Some("nuclear"),
            Relationship::CustomIcc(_) => None,
        }
    }

    fn cache_key(&self) -> String {
        format!("{self:?}")
    }
}

impl fmt::Display for Relationship {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Relationship::UnrelatedSingleton => f.write_str("singleton"),
            Relationship::ParentOffspringTrio => f.write_str("trio"),
            Relationship::SibPair => f.write_str("sib pair"),
            Relationship::FirstCousinPair => f.write_str("first-cousin pair"),
            Relationship::RelativePair { k0, k1, k2 } => {
                write!(f, "relative pair ({k0}, {k1}, {k2})")
            }
            Relationship::CustomIcc(d) => {
                write!(f, "custom IBD distribution over {} members", d.num_members())
            }
        }
    }
}

fn pair_distribution(k: [f64; 3]) -> IccDistribution {
    let configs: [&[u8]; 3] = [&[0, 1, 2, 3], &[0, 1, 0, 2], &[0, 1, 0, 1]];
    let entries = configs
        .iter()
        .zip(k)
        .map(|(c, p)| (IccConfiguration::new(c).expect("static configuration"), p))
        .collect();
    IccDistribution { entries }
}

/// IBD configuration distribution of a relationship.
pub fn icc_distribution(rel: &Relationship) -> Result<IccDistribution> {
    rel.validate()?;
    let single = |classes: &[u8]| IccDistribution {
        entries: vec![(IccConfiguration::new(classes).expect("static configuration"), 1.0)],
    };
    Ok(match rel {
        Relationship::UnrelatedSingleton => single(&[0, 1]),
        // the child carries one allele of each parent
        Relationship::ParentOffspringTrio => single(&[0, 1, 2, 3, 0, 2]),
        Relationship::SibPair => pair_distribution([0.25, 0.5, 0.25]),
        Relationship::FirstCousinPair => pair_distribution([0.75, 0.25, 0.0]),
        Relationship::RelativePair { k0, k1, k2 } => pair_distribution([*k0, *k1, *k2]),
        Relationship::CustomIcc(d) => d.clone(),
    })
}

/// Probability that two relatives sharing `phi` alleles IBD carry the unordered
/// genotype pair `{g1, g2}` at a SNP with minor allele frequency `p`.
/// Off-diagonal entries cover both orders; see [`ordered_pair_genotype_prior`].
pub fn pair_genotype_prior(g1: GenotypeCode, g2: GenotypeCode, phi: u8, p: f64) -> f64 {
    let q = 1.0 - p;
    let (lo, hi) = (g1.min(g2), g1.max(g2));
    match (phi, lo, hi) {
        (0, 0, 0) => q.powi(4),
        (0, 0, 1) => 4.0 * p * q.powi(3),
        (0, 0, 2) => 2.0 * p * p * q * q,
        (0, 1, 1) => 4.0 * p * p * q * q,
        (0, 1, 2) => 4.0 * p.powi(3) * q,
        (0, 2, 2) => p.powi(4),
        (1, 0, 0) => q.powi(3),
        (1, 0, 1) => 2.0 * p * q * q,
        (1, 0, 2) => 0.0,
        (1, 1, 1) => p * p * q + p * q * q,
        (1, 1, 2) => 2.0 * p * p * q,
        (1, 2, 2) => p.powi(3),
        (2, 0, 0) => q * q,
        (2, 1, 1) => 2.0 * p * q,
        (2, 2, 2) => p * p,
        (2, _, _) => 0.0,
        _ => 0.0,
    }
}

/// Probability that the first relative has `g1` and the second `g2`.
pub fn ordered_pair_genotype_prior(g1: GenotypeCode, g2: GenotypeCode, phi: u8, p: f64) -> f64 {
    let v = pair_genotype_prior(g1, g2, phi, p);
    if g1 == g2 {
        v
    } else {
        0.5 * v
    }
}

/// One merged family configuration: an ICC together with a haplotype for each
/// of its IBD-distinct classes, up to permutations that leave every member's
/// diplotype and the multiset of drawn haplotypes unchanged.
#[derive(Clone, Debug)]
pub struct FamilyConfiguration {
    pub icc: usize,
    /// `ln Pr(φ) + ln(number of merged assignments)`.
    pub log_weight: f64,
    /// Founder haplotype and how many IBD-distinct classes carry it.
    pub haplotype_counts: Vec<(u16, u8)>,
    /// Triangular diplotype index of every member.
    pub diplotypes: Vec<u16>,
}

impl FamilyConfiguration {
    pub fn log_prior(&self, log_freqs: &[f64]) -> f64 {
        self.haplotype_counts
            .iter()
            .fold(self.log_weight, |acc, &(h, c)| acc + c as f64 * log_freqs[h as usize])
    }
}

/// All configurations of a relationship over `M` loci, independent of the frequencies.
#[derive(Debug)]
pub struct ConfigurationTable {
    space: HaplotypeSpace,
    num_members: usize,
    raw_count: u128,
    configs: Vec<FamilyConfiguration>,
}

fn raw_configuration_count(dist: &IccDistribution, num_haplotypes: usize) -> u128 {
    dist.entries()
        .iter()
        .filter(|(_, p)| *p > 0.0)
        .map(|(c, _)| (num_haplotypes as u128).saturating_pow(c.num_distinct() as u32))
        .sum()
}

impl ConfigurationTable {
    pub fn build(rel: &Relationship, num_loci: usize, cap: u64) -> Result<Self> {
        let dist = icc_distribution(rel)?;
        let space = HaplotypeSpace::new(num_loci)?;
        let h = space.num_haplotypes();
        let raw_count = raw_configuration_count(&dist, h);
        if raw_count > cap as u128 {
            return Err(Error::Capacity {
                relationship: rel.to_string(),
                num_loci,
                count: raw_count,
                cap,
            });
        }

        let num_members = dist.num_members();
        let mut configs: Vec<FamilyConfiguration> = Vec::new();
        for (icc_index, (icc, prob)) in dist.entries().iter().enumerate() {
            if *prob <= 0.0 {
                continue;
            }
            let k = icc.num_distinct();
            let mut merged: HashMap<(Vec<u16>, Vec<u16>), (usize, u64)> = HashMap::new();
            let mut order: Vec<(Vec<u16>, Vec<u16>)> = Vec::new();
            let mut assignment = vec![0u16; k];
            loop {
                let diplotypes: Vec<u16> = (0..num_members)
                    .map(|s| {
                        let a = assignment[icc.classes[2 * s] as usize];
                        let b = assignment[icc.classes[2 * s + 1] as usize];
                        Diplotype::new(a, b).index() as u16
                    })
                    .collect();
                let mut drawn = assignment.clone();
                drawn.sort_unstable();
                let key = (diplotypes, drawn);
                match merged.get_mut(&key) {
                    Some(entry) => entry.1 += 1,
                    None => {
                        merged.insert(key.clone(), (order.len(), 1));
                        order.push(key);
                    }
                }
                // odometer over H^k assignments
                let mut pos = 0;
                loop {
                    if pos == k {
                        break;
                    }
                    assignment[pos] += 1;
                    if (assignment[pos] as usize) < h {
                        break;
                    }
                    assignment[pos] = 0;
                    pos += 1;
                }
                if pos == k {
                    break;
                }
            }
            for key in order {
                let (_, multiplicity) = merged[&key];
                let (diplotypes, drawn) = key;
                let mut haplotype_counts: Vec<(u16, u8)> = Vec::new();
                for hap in drawn {
                    match haplotype_counts.last_mut() {
                        Some((last, c)) if *last == hap => *c += 1,
                        _ => haplotype_counts.push((hap, 1)),
                    }
                }
                configs.push(FamilyConfiguration {
                    icc: icc_index,
                    log_weight: prob.ln() + (multiplicity as f64).ln(),
                    haplotype_counts,
                    diplotypes,
                });
            }
        }
        Ok(Self {
            space,
            num_members,
            raw_count,
            configs,
        })
    }

    pub fn space(&self) -> &HaplotypeSpace {
        &self.space
    }

    pub fn num_members(&self) -> usize {
        self.num_members
    }

    pub fn raw_count(&self) -> u128 {
        self.raw_count
    }

    pub fn configurations(&self) -> &[FamilyConfiguration] {
        &self.configs
    }

    pub fn log_priors(&self, founders: &FounderFrequencies) -> Vec<f64> {
        let log_freqs = log_frequencies(founders);
        self.configs.iter().map(|c| c.log_prior(&log_freqs)).collect()
    }
}

pub(crate) fn log_frequencies(founders: &FounderFrequencies) -> Vec<f64> {
    founders.freqs().iter().map(|f| f.ln()).collect()
}

/// Shared, lazily built configuration table for a relationship and locus count.
pub fn configuration_table(rel: &Relationship, num_loci: usize, cap: u64) -> Result<Arc<ConfigurationTable>> {
    type Cache = Mutex<HashMap<(String, usize), Arc<ConfigurationTable>>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let key = (rel.cache_key(), num_loci);
    let cache = CACHE.get_or_init(Default::default);
    if let Some(table) = cache.lock().expect("table cache poisoned").get(&key) {
        if table.raw_count > cap as u128 {
            return Err(Error::Capacity {
                relationship: rel.to_string(),
                num_loci,
                count: table.raw_count,
                cap,
            });
        }
        return Ok(Arc::clone(table));
    }
    let table = Arc::new(ConfigurationTable::build(rel, num_loci, cap)?);
    cache
        .lock()
        .expect("table cache poisoned")
        .insert(key, Arc::clone(&table));
    Ok(table)
}

/// A family configuration with its prior probability.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedConfiguration {
    pub diplotypes: Vec<Diplotype>,
    pub weight: f64,
}

/// Streams every family configuration with its prior weight; weights sum to 1.
pub fn enumerate_family_configurations(
    rel: &Relationship,
    founders: &FounderFrequencies,
    cap: u64,
) -> Result<impl Iterator<Item = WeightedConfiguration>> {
    let table = configuration_table(rel, founders.num_loci(), cap)?;
    let log_freqs = log_frequencies(founders);
    Ok((0..table.configs.len()).map(move |i| {
        let config = &table.configs[i];
        WeightedConfiguration {
            diplotypes: config
                .diplotypes
                .iter()
                .map(|&d| Diplotype::from_index(d as usize))
                .collect(),
            weight: config.log_prior(&log_freqs).exp(),
        }
    }))
}

/// `Pr(G | R; π)` for a genotype matrix given as one genotype vector per member.
pub fn family_genotype_prior(
    genotypes: &[GenotypeVector],
    rel: &Relationship,
    founders: &FounderFrequencies,
) -> Result<f64> {
    let m = founders.num_loci();
    ensure!(
        genotypes.len() == rel.num_members(),
        "{} genotype vectors given for a {rel} with {} members",
        genotypes.len(),
        rel.num_members()
    );
    ensure!(
        genotypes.iter().all(|g| g.len() == m && g.iter().all(|&c| c <= 2)),
        "every genotype vector needs {m} codes in 0..=2"
    );
    let table = configuration_table(rel, m, DEFAULT_CONFIGURATION_CAP)?;
    let space = table.space();
    let targets: Vec<usize> = genotypes.iter().map(|g| crate::genotype::genotype_index(g)).collect();
    let log_freqs = log_frequencies(founders);
    Ok(table
        .configs
        .iter()
        .filter(|c| {
            c.diplotypes
                .iter()
                .zip(&targets)
                .all(|(&d, &t)| space.genotype_of(d as usize) == t)
        })
        .map(|c| c.log_prior(&log_freqs).exp())
        .sum())
}
