use crate::error::{ensure, Result};
use crate::pedigree::Relationship;
use crate::read_model::ReadObservation;

/// Read data of the sequenced members of one family.
#[derive(Clone, Debug, PartialEq)]
pub struct Family {
    pub id: String,
    pub member_ids: Vec<String>,
    pub relationship: Relationship,
    /// `reads[member][locus]`.
    pub reads: Vec<Vec<ReadObservation>>,
}

impl Family {
    pub fn new(
        id: impl Into<String>,
        member_ids: Vec<String>,
        relationship: Relationship,
        reads: Vec<Vec<ReadObservation>>,
    ) -> Result<Self> {
        let family = Self {
            id: id.into(),
            member_ids,
            relationship,
            reads,
        };
        let m = family.reads.first().map_or(0, Vec::len);
        family.validate(m)?;
        Ok(family)
    }

    /// Family with generated member ids `m1, m2, ...`.
    pub fn anonymous(
        id: impl Into<String>,
        relationship: Relationship,
        reads: Vec<Vec<ReadObservation>>,
    ) -> Result<Self> {
        let ids = (1..=reads.len()).map(|i| format!("m{i}")).collect();
        Self::new(id, ids, relationship, reads)
    }

    pub fn num_members(&self) -> usize {
        self.reads.len()
    }

    pub(crate) fn validate(&self, num_loci: usize) -> Result<()> {
        self.relationship.validate()?;
        ensure!(
            self.reads.len() == self.relationship.num_members(),
            "family {} has {} members but a {} has {}",
            self.id,
            self.reads.len(),
            self.relationship,
            self.relationship.num_members()
        );
        ensure!(
            self.member_ids.len() == self.reads.len(),
            "family {} lists {} member ids for {} members",
            self.id,
            self.member_ids.len(),
            self.reads.len()
        );
        for (member, reads) in self.member_ids.iter().zip(&self.reads) {
            ensure!(
                reads.len() == num_loci,
                "member {member} of family {} has {} loci, expected {num_loci}",
                self.id,
                reads.len()
            );
            for obs in reads {
                ensure!(
                    obs.variants <= obs.depth,
                    "member {member} of family {}: {} variants exceed depth {}",
                    self.id,
                    obs.variants,
                    obs.depth
                );
            }
        }
        Ok(())
    }

    pub(crate) fn select_loci(&self, loci: &[usize]) -> Family {
        Family {
            reads: self
                .reads
                .iter()
                .map(|r| loci.iter().map(|&m| r[m]).collect())
                .collect(),
            ..self.clone()
        }
    }
}

/// Read data of all families over a common set of SNPs.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub snp_ids: Vec<String>,
    pub families: Vec<Family>,
}

impl Dataset {
    pub fn new(snp_ids: Vec<String>, families: Vec<Family>) -> Result<Self> {
        ensure!(!snp_ids.is_empty(), "a dataset needs at least one SNP");
        for f in &families {
            f.validate(snp_ids.len())?;
        }
        Ok(Self { snp_ids, families })
    }

    /// Dataset with SNP ids `snp1, snp2, ...`.
    pub fn anonymous(num_loci: usize, families: Vec<Family>) -> Result<Self> {
        Self::new((1..=num_loci).map(|i| format!("snp{i}")).collect(), families)
    }

    pub fn num_loci(&self) -> usize {
        self.snp_ids.len()
    }

    pub fn num_individuals(&self) -> usize {
        self.families.iter().map(Family::num_members).sum()
    }

    /// Restriction to the given loci, in the given order.
    pub fn select_loci(&self, loci: &[usize]) -> Result<Dataset> {
        ensure!(!loci.is_empty(), "no loci selected");
        ensure!(
            loci.iter().all(|&m| m < self.num_loci()),
            "selected loci {loci:?} out of range for {} SNPs",
            self.num_loci()
        );
        Ok(Dataset {
            snp_ids: loci.iter().map(|&m| self.snp_ids[m].clone()).collect(),
            families: self.families.iter().map(|f| f.select_loci(loci)).collect(),
        })
    }

    /// Every sequenced member as its own singleton family, in family-then-member order.
    pub fn as_unrelated(&self) -> Dataset {
        let families = self
            .families
            .iter()
            .flat_map(|f| {
                f.member_ids.iter().zip(&f.reads).map(move |(member, reads)| Family {
                    id: f.id.clone(),
                    member_ids: vec![member.clone()],
                    relationship: Relationship::UnrelatedSingleton,
                    reads: vec![reads.clone()],
                })
            })
            .collect();
        Dataset {
            snp_ids: self.snp_ids.clone(),
            families,
        }
    }
}
