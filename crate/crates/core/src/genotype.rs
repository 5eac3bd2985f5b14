//! Genotype codes, haplotype indexing and founder haplotype frequencies.
//!
//! A haplotype over `M` loci is stored as an integer whose bit `m` is 1 when the
//! haplotype carries the minor allele at locus `m`. A genotype vector is indexed
//! in base 3 with locus 0 as the least significant digit.

use crate::error::{ensure, Result};

/// Minor-allele count (0, 1 or 2) at one SNP.
pub type GenotypeCode = u8;

/// Per-locus genotype codes of one individual.
pub type GenotypeVector = Vec<GenotypeCode>;

/// Largest number of jointly modelled loci; `2^M` haplotypes must fit in `u16`.
pub const MAX_JOINT_LOCI: usize = 12;

const SIMPLEX_TOLERANCE: f64 = 1e-12;

#[inline]
pub fn allele(haplotype: usize, locus: usize) -> GenotypeCode {
    ((haplotype >> locus) & 1) as GenotypeCode
}

/// Unordered haplotype pair `(first <= second)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Diplotype {
    pub first: u16,
    pub second: u16,
}

impl Diplotype {
    pub fn new(a: u16, b: u16) -> Self {
        if a <= b {
            Self { first: a, second: b }
        } else {
            Self { first: b, second: a }
        }
    }

    /// Position in the triangular enumeration `(0,0), (0,1), (1,1), (0,2), ...`.
    pub fn index(self) -> usize {
        let hi = self.second as usize;
        hi * (hi + 1) / 2 + self.first as usize
    }

    pub fn from_index(index: usize) -> Self {
        let mut hi = ((((8 * index + 1) as f64).sqrt() - 1.0) / 2.0) as usize;
        while hi * (hi + 1) / 2 > index {
            hi -= 1;
        }
        while (hi + 1) * (hi + 2) / 2 <= index {
            hi += 1;
        }
        Self {
            first: (index - hi * (hi + 1) / 2) as u16,
            second: hi as u16,
        }
    }

    pub fn genotypes(self, num_loci: usize) -> GenotypeVector {
        (0..num_loci)
            .map(|m| allele(self.first as usize, m) + allele(self.second as usize, m))
            .collect()
    }
}

/// Precomputed indexing for all haplotypes, diplotypes and genotype vectors over `M` loci.
#[derive(Clone, Debug)]
pub struct HaplotypeSpace {
    num_loci: usize,
    diplotypes: Vec<Diplotype>,
    diplotype_genotype: Vec<usize>,
}

impl HaplotypeSpace {
    pub fn new(num_loci: usize) -> Result<Self> {
        ensure!(
            (1..=MAX_JOINT_LOCI).contains(&num_loci),
            "number of jointly modelled loci must be in 1..={MAX_JOINT_LOCI}, got {num_loci}"
        );
        let h = 1usize << num_loci;
        let diplotypes: Vec<Diplotype> = (0..h * (h + 1) / 2).map(Diplotype::from_index).collect();
        let diplotype_genotype = diplotypes
            .iter()
            .map(|d| genotype_index(&d.genotypes(num_loci)))
            .collect();
        Ok(Self {
            num_loci,
            diplotypes,
            diplotype_genotype,
        })
    }

    pub fn num_loci(&self) -> usize {
        self.num_loci
    }

    pub fn num_haplotypes(&self) -> usize {
        1 << self.num_loci
    }

    pub fn num_genotype_vectors(&self) -> usize {
        3usize.pow(self.num_loci as u32)
    }

    pub fn diplotypes(&self) -> &[Diplotype] {
        &self.diplotypes
    }

    /// Base-3 genotype index of the diplotype with the given triangular index.
    #[inline]
    pub fn genotype_of(&self, diplotype_index: usize) -> usize {
        self.diplotype_genotype[diplotype_index]
    }

    pub fn genotype_vector(&self, index: usize) -> GenotypeVector {
        genotype_vector(index, self.num_loci)
    }
}

pub fn genotype_index(genotypes: &[GenotypeCode]) -> usize {
    genotypes.iter().rev().fold(0, |acc, &g| acc * 3 + g as usize)
}

pub fn genotype_vector(mut index: usize, num_loci: usize) -> GenotypeVector {
    (0..num_loci)
        .map(|_| {
            let g = (index % 3) as GenotypeCode;
            index /= 3;
            g
        })
        .collect()
}

/// Renders a haplotype as a string of 0/1 characters, locus 0 first.
pub fn haplotype_pattern(haplotype: usize, num_loci: usize) -> String {
    (0..num_loci)
        .map(|m| if allele(haplotype, m) == 1 { '1' } else { '0' })
        .collect()
}

pub fn parse_haplotype_pattern(pattern: &str) -> Result<usize> {
    ensure!(
        !pattern.is_empty() && pattern.len() <= MAX_JOINT_LOCI,
        "haplotype pattern {pattern:?} must have 1..={MAX_JOINT_LOCI} characters"
    );
    pattern.chars().enumerate().try_fold(0usize, |acc, (m, c)| match c {
        '0' => Ok(acc),
        '1' => Ok(acc | (1 << m)),
        _ => Err(crate::Error::Validation(format!(
            "haplotype pattern {pattern:?} may only contain 0 and 1"
        ))),
    })
}

/// Population frequencies of the `2^M` founder haplotypes.
#[derive(Clone, Debug, PartialEq)]
pub struct FounderFrequencies {
    num_loci: usize,
    freqs: Vec<f64>,
}

impl FounderFrequencies {
    pub fn new(num_loci: usize, freqs: Vec<f64>) -> Result<Self> {
        ensure!(
            (1..=MAX_JOINT_LOCI).contains(&num_loci),
            "number of loci must be in 1..={MAX_JOINT_LOCI}, got {num_loci}"
        );
        ensure!(
            freqs.len() == 1 << num_loci,
            "expected {} haplotype frequencies for {num_loci} loci, got {}",
            1 << num_loci,
            freqs.len()
        );
        ensure!(
            freqs.iter().all(|&f| (0.0..=1.0).contains(&f)),
            "haplotype frequencies must lie in [0, 1]: {freqs:?}"
        );
        let total: f64 = freqs.iter().sum();
        ensure!(
            (total - 1.0).abs() <= SIMPLEX_TOLERANCE,
            "haplotype frequencies sum to {total}, not 1"
        );
        Ok(Self { num_loci, freqs })
    }

    /// Builds frequencies from nonnegative weights by normalizing them.
    pub(crate) fn from_weights(num_loci: usize, weights: &[f64]) -> Self {
        let total: f64 = weights.iter().sum();
        Self {
            num_loci,
            freqs: weights.iter().map(|w| w / total).collect(),
        }
    }

    /// Single SNP with minor allele frequency `p`.
    pub fn from_maf(p: f64) -> Result<Self> {
        Self::independent(&[p])
    }

    /// Linkage equilibrium: haplotype frequencies are products of per-locus allele frequencies.
    pub fn independent(mafs: &[f64]) -> Result<Self> {
        ensure!(
            mafs.iter().all(|p| (0.0..=1.0).contains(p)),
            "allele frequencies must lie in [0, 1]: {mafs:?}"
        );
        let m = mafs.len();
        ensure!(
            (1..=MAX_JOINT_LOCI).contains(&m),
            "need 1..={MAX_JOINT_LOCI} loci, got {m}"
        );
        let freqs = (0..1usize << m)
            .map(|h| {
                mafs.iter()
                    .enumerate()
                    .map(|(locus, &p)| if allele(h, locus) == 1 { p } else { 1.0 - p })
                    .product()
            })
            .collect();
        Ok(Self { num_loci: m, freqs })
    }

    pub fn uniform(num_loci: usize) -> Result<Self> {
        let h = 1usize << num_loci.min(MAX_JOINT_LOCI);
        Self::new(num_loci, vec![1.0 / h as f64; h])
    }

    pub fn num_loci(&self) -> usize {
        self.num_loci
    }

    pub fn num_haplotypes(&self) -> usize {
        self.freqs.len()
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn maf(&self, locus: usize) -> f64 {
        self.freqs
            .iter()
            .enumerate()
            .filter(|(h, _)| allele(*h, locus) == 1)
            .map(|(_, f)| f)
            .sum()
    }

    pub fn mafs(&self) -> Vec<f64> {
        (0..self.num_loci).map(|m| self.maf(m)).collect()
    }

    /// Marginal haplotype frequencies over a subset of loci, in the given order.
    pub fn marginal(&self, loci: &[usize]) -> Result<Self> {
        ensure!(
            loci.iter().all(|&m| m < self.num_loci),
            "loci {loci:?} out of range for {} loci",
            self.num_loci
        );
        let mut freqs = vec![0.0; 1 << loci.len()];
        for (h, f) in self.freqs.iter().enumerate() {
            let sub = loci
                .iter()
                .enumerate()
                .fold(0, |acc, (i, &m)| acc | ((allele(h, m) as usize) << i));
            freqs[sub] += f;
        }
        Self::new(loci.len(), freqs)
    }

    /// Hardy–Weinberg genotype frequencies `(q², 2pq, p²)` at a single locus.
    pub fn hw_genotype_frequencies(&self, locus: usize) -> [f64; 3] {
        let p = self.maf(locus);
        let q = 1.0 - p;
        [q * q, 2.0 * p * q, p * p]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diplotype_index_roundtrip() {
        for i in 0..2080 {
            let d = Diplotype::from_index(i);
            assert!(d.first <= d.second);
            assert_eq!(d.index(), i);
        }
        assert_eq!(Diplotype::new(3, 1), Diplotype { first: 1, second: 3 });
    }

    #[test]
    fn genotype_index_roundtrip() {
        for i in 0..81 {
            assert_eq!(genotype_index(&genotype_vector(i, 4)), i);
        }
        assert_eq!(genotype_index(&[2, 1]), 2 + 3);
    }

    #[test]
    fn diplotype_genotypes_count_minor_alleles() {
        // haplotype 0b01 carries the minor allele at locus 0 only
        let d = Diplotype::new(0b01, 0b11);
        assert_eq!(d.genotypes(2), vec![2, 1]);
        let space = HaplotypeSpace::new(2).unwrap();
        assert_eq!(space.diplotypes().len(), 10);
        assert_eq!(space.genotype_of(d.index()), genotype_index(&[2, 1]));
    }

    #[test]
    fn independent_frequencies_have_requested_margins() {
        let f = FounderFrequencies::independent(&[0.1, 0.3, 0.25]).unwrap();
        assert_eq!(f.num_haplotypes(), 8);
        assert!((f.freqs().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for (m, p) in [0.1, 0.3, 0.25].iter().enumerate() {
            assert!((f.maf(m) - p).abs() < 1e-15);
        }
        let sub = f.marginal(&[2, 0]).unwrap();
        assert!((sub.maf(0) - 0.25).abs() < 1e-15);
        assert!((sub.maf(1) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn hw_frequencies() {
        let f = FounderFrequencies::from_maf(0.3).unwrap();
        let g = f.hw_genotype_frequencies(0);
        assert!((g[0] - 0.49).abs() < 1e-15);
        assert!((g[1] - 0.42).abs() < 1e-15);
        assert!((g[2] - 0.09).abs() < 1e-15);
    }

    #[test]
    fn rejects_off_simplex() {
        assert!(FounderFrequencies::new(1, vec![0.5, 0.6]).is_err());
        assert!(FounderFrequencies::new(2, vec![0.5, 0.5]).is_err());
        assert!(FounderFrequencies::new(1, vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn pattern_roundtrip() {
        assert_eq!(haplotype_pattern(0b011, 3), "110");
        assert_eq!(parse_haplotype_pattern("110").unwrap(), 0b011);
        assert!(parse_haplotype_pattern("1x").is_err());
    }
}
