//! Tab-separated file formats: read counts, pedigrees, parameters, calls and truth.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use crate::em::{Dataset, Family, ModelParams};
use crate::error::{ensure, Error, Result};
use crate::genotype::{haplotype_pattern, parse_haplotype_pattern, FounderFrequencies};
use crate::pedigree::{IccConfiguration, IccDistribution, Relationship};
use crate::read_model::{ErrorRates, ReadObservation};
use crate::simulator::TruthSet;

pub const COUNTS_HEADER: [&str; 5] = ["family_id", "member_id", "snp_id", "depth", "variants"];
pub const CALLS_HEADER: [&str; 8] = [
    "family_id",
    "member_id",
    "snp_id",
    "call",
    "p_g0",
    "p_g1",
    "p_g2",
    "tie_flag",
];

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Non-blank, non-comment lines with their 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

fn parse_err(source: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: source.to_string(),
        line,
        message: message.into(),
    }
}

/// One row of a read-count table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountsRow {
    pub family_id: String,
    pub member_id: String,
    pub snp_id: String,
    pub depth: u32,
    pub variants: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CountsTable {
    pub rows: Vec<CountsRow>,
}

impl CountsTable {
    /// SNP ids in order of first appearance.
    pub fn snp_ids(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        self.rows
            .iter()
            .filter(|r| seen.insert(r.snp_id.as_str()))
            .map(|r| r.snp_id.clone())
            .collect()
    }
}

pub fn parse_counts_str(text: &str, source: &str) -> Result<CountsTable> {
    let mut lines = data_lines(text);
    let (hline, header) = lines.next().ok_or_else(|| parse_err(source, 1, "missing header row"))?;
    let cols: Vec<&str> = header.split('\t').map(str::trim).collect();
    if cols != COUNTS_HEADER {
        return Err(parse_err(
            source,
            hline,
            format!("header must be `{}`", COUNTS_HEADER.join("\\t")),
        ));
    }
    let mut rows = Vec::new();
    let mut keys: HashMap<(String, String, String), usize> = HashMap::new();
    for (line, raw) in lines {
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() != 5 {
            return Err(parse_err(
                source,
                line,
                format!("expected 5 tab-separated columns, found {}", fields.len()),
            ));
        }
        let number = |col: usize| -> Result<u32> {
            fields[col].trim().parse::<u32>().map_err(|_| {
                parse_err(
                    source,
                    line,
                    format!(
                        "column {} ({}): `{}` is not a nonnegative integer",
                        col + 1,
                        COUNTS_HEADER[col],
                        fields[col]
                    ),
                )
            })
        };
        for (col, f) in fields.iter().take(3).enumerate() {
            if f.trim().is_empty() {
                return Err(parse_err(
                    source,
                    line,
                    format!("column {} ({}) is empty", col + 1, COUNTS_HEADER[col]),
                ));
            }
        }
        let (depth, variants) = (number(3)?, number(4)?);
        if variants > depth {
            return Err(parse_err(
                source,
                line,
                format!("variant count {variants} exceeds depth {depth}"),
            ));
        }
        let row = CountsRow {
            family_id: fields[0].trim().to_string(),
            member_id: fields[1].trim().to_string(),
            snp_id: fields[2].trim().to_string(),
            depth,
            variants,
        };
        let key = (row.family_id.clone(), row.member_id.clone(), row.snp_id.clone());
        if let Some(first) = keys.insert(key, line) {
            return Err(parse_err(
                source,
                line,
                format!(
                    "duplicate row for ({}, {}, {}), first seen on line {first}",
                    row.family_id, row.member_id, row.snp_id
                ),
            ));
        }
        rows.push(row);
    }
    Ok(CountsTable { rows })
}

pub fn parse_counts(path: &Path) -> Result<CountsTable> {
    parse_counts_str(&read_file(path)?, &path.display().to_string())
}

pub fn emit_counts(table: &CountsTable) -> String {
    let mut out = COUNTS_HEADER.join("\t");
    out.push('\n');
    for r in &table.rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            r.family_id, r.member_id, r.snp_id, r.depth, r.variants
        );
    }
    out
}

/// Counts table of a dataset, family by family, member by member, SNP by SNP.
pub fn dataset_counts(data: &Dataset) -> CountsTable {
    let mut rows = Vec::new();
    for f in &data.families {
        for (member, reads) in f.member_ids.iter().zip(&f.reads) {
            for (snp, o) in data.snp_ids.iter().zip(reads) {
                rows.push(CountsRow {
                    family_id: f.id.clone(),
                    member_id: member.clone(),
                    snp_id: snp.clone(),
                    depth: o.depth,
                    variants: o.variants,
                });
            }
        }
    }
    CountsTable { rows }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PedigreeRow {
    pub family_id: String,
    pub relationship: Relationship,
    pub members: Vec<String>,
}

fn format_icc(d: &IccDistribution) -> String {
    d.entries()
        .iter()
        .map(|(c, w)| {
            let classes: Vec<String> = c.classes().iter().map(|x| x.to_string()).collect();
            format!("{w}:{}", classes.join(","))
        })
        .collect::<Vec<_>>()
        .join(";")
}

fn parse_icc(text: &str) -> Result<IccDistribution> {
    let entries = text
        .split(';')
        .map(|part| {
            let (w, classes) = part
                .split_once(':')
                .ok_or_else(|| Error::Validation(format!("IBD configuration `{part}` is not `weight:classes`")))?;
            let w: f64 = w
                .trim()
                .parse()
                .map_err(|_| Error::Validation(format!("bad weight `{w}`")))?;
            let classes: Vec<u8> = classes
                .split(',')
                .map(|c| {
                    c.trim()
                        .parse::<u8>()
                        .map_err(|_| Error::Validation(format!("bad allele class `{c}`")))
                })
                .collect::<Result<_>>()?;
            Ok((IccConfiguration::new(&classes)?, w))
        })
        .collect::<Result<Vec<_>>>()?;
    IccDistribution::new(entries)
}

/// Pedigree table: `family_id  relationship  members` with optional `k0 k1 k2`
/// (for `relative`) and `icc` (for `icc`, as `weight:classes;...`) columns.
pub fn parse_pedigree_str(text: &str, source: &str) -> Result<Vec<PedigreeRow>> {
    let mut lines = data_lines(text);
    let (hline, header) = lines.next().ok_or_else(|| parse_err(source, 1, "missing header row"))?;
    let cols: Vec<&str> = header.split('\t').map(str::trim).collect();
    let find = |name: &str| cols.iter().position(|c| *c == name);
    let (fam, rel, mem) = match (find("family_id"), find("relationship"), find("members")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => {
            return Err(parse_err(
                source,
                hline,
                "header needs family_id, relationship and members columns",
            ))
        }
    };
    let known = ["family_id", "relationship", "members", "k0", "k1", "k2", "icc"];
    if let Some(c) = cols.iter().find(|c| !known.contains(c)) {
        return Err(parse_err(source, hline, format!("unknown column `{c}`")));
    }
    let kcols = (find("k0"), find("k1"), find("k2"));
    let icc_col = find("icc");
    let mut rows: Vec<PedigreeRow> = Vec::new();
    let mut seen = HashMap::new();
    for (line, raw) in lines {
        let fields: Vec<&str> = raw.split('\t').map(str::trim).collect();
        if fields.len() != cols.len() {
            return Err(parse_err(
                source,
                line,
                format!("expected {} columns, found {}", cols.len(), fields.len()),
            ));
        }
        let opt = |c: Option<usize>| c.map(|i| fields[i]).filter(|f| !f.is_empty() && *f != "NA");
        let tag = fields[rel];
        let kinship = match (opt(kcols.0), opt(kcols.1), opt(kcols.2)) {
            (Some(a), Some(b), Some(c)) => {
                let p = |s: &str| {
                    s.parse::<f64>()
                        .map_err(|_| parse_err(source, line, format!("bad IBD probability `{s}`")))
                };
                Some([p(a)?, p(b)?, p(c)?])
            }
            (None, None, None) => None,
            _ => return Err(parse_err(source, line, "k0, k1 and k2 must be given together")),
        };
        let relationship = if tag == "icc" {
            let spec = opt(icc_col).ok_or_else(|| parse_err(source, line, "relationship `icc` needs an icc column"))?;
            Relationship::CustomIcc(parse_icc(spec).map_err(|e| parse_err(source, line, e.to_string()))?)
        } else {
            Relationship::from_tag(tag, kinship).map_err(|e| parse_err(source, line, e.to_string()))?
        };
        let members: Vec<String> = fields[mem].split(',').map(|m| m.trim().to_string()).collect();
        if members.iter().any(String::is_empty) {
            return Err(parse_err(source, line, "empty member id"));
        }
        if members.len() != relationship.num_members() {
            return Err(parse_err(
                source,
                line,
                format!(
                    "{relationship} has {} members, row lists {}",
                    relationship.num_members(),
                    members.len()
                ),
            ));
        }
        if members.iter().collect::<BTreeSet<_>>().len() != members.len() {
            return Err(parse_err(source, line, "member ids repeat within the family"));
        }
        if let Some(first) = seen.insert(fields[fam].to_string(), line) {
            return Err(parse_err(
                source,
                line,
                format!("family `{}` already defined on line {first}", fields[fam]),
            ));
        }
        rows.push(PedigreeRow {
            family_id: fields[fam].to_string(),
            relationship,
            members,
        });
    }
    Ok(rows)
}

pub fn parse_pedigree(path: &Path) -> Result<Vec<PedigreeRow>> {
    parse_pedigree_str(&read_file(path)?, &path.display().to_string())
}

pub fn emit_pedigree(rows: &[PedigreeRow]) -> String {
    let mut out = String::from("family_id\trelationship\tmembers\tk0\tk1\tk2\ticc\n");
    for r in rows {
        let members = r.members.join(",");
        let (tag, k, icc) = match &r.relationship {
            Relationship::RelativePair { k0, k1, k2 } => ("relative", format!("{k0}\t{k1}\t{k2}"), "NA".to_string()),
            Relationship::CustomIcc(d) if r.relationship.tag().is_none() => {
                ("icc", "NA\tNA\tNA".to_string(), format_icc(d))
            }
            other => (
                other.tag().expect("built-in relationship"),
                "NA\tNA\tNA".to_string(),
                "NA".to_string(),
            ),
        };
        let _ = writeln!(out, "{}\t{tag}\t{members}\t{k}\t{icc}", r.family_id);
    }
    out
}

pub fn dataset_pedigree(data: &Dataset) -> Vec<PedigreeRow> {
    data.families
        .iter()
        .map(|f| PedigreeRow {
            family_id: f.id.clone(),
            relationship: f.relationship.clone(),
            members: f.member_ids.clone(),
        })
        .collect()
}

/// Joins counts to pedigrees. SNPs follow `snps` when given, otherwise their
/// first appearance in the counts; members without a row at a SNP get depth 0.
pub fn build_dataset(counts: &CountsTable, pedigree: &[PedigreeRow], snps: Option<&[String]>) -> Result<Dataset> {
    let snp_ids: Vec<String> = match snps {
        Some(list) => list.to_vec(),
        None => counts.snp_ids(),
    };
    ensure!(!snp_ids.is_empty(), "no SNPs to analyse");
    let snp_index: HashMap<&str, usize> = snp_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    ensure!(snp_index.len() == snp_ids.len(), "SNP list repeats an id");
    let known: BTreeSet<&str> = counts.rows.iter().map(|r| r.snp_id.as_str()).collect();
    if let Some(missing) = snp_ids.iter().find(|s| !known.contains(s.as_str())) {
        return Err(Error::Validation(format!(
            "SNP `{missing}` does not appear in the counts"
        )));
    }

    let mut slot: HashMap<(&str, &str), (usize, usize)> = HashMap::new();
    for (i, row) in pedigree.iter().enumerate() {
        for (s, m) in row.members.iter().enumerate() {
            slot.insert((row.family_id.as_str(), m.as_str()), (i, s));
        }
    }
    let m = snp_ids.len();
    let mut reads: Vec<Vec<Vec<ReadObservation>>> = pedigree
        .iter()
        .map(|r| vec![vec![ReadObservation::MISSING; m]; r.members.len()])
        .collect();
    let mut present: Vec<Vec<bool>> = pedigree.iter().map(|r| vec![false; r.members.len()]).collect();
    for row in &counts.rows {
        let &(i, s) = slot
            .get(&(row.family_id.as_str(), row.member_id.as_str()))
            .ok_or_else(|| {
                Error::Validation(format!(
                    "counts mention member `{}` of family `{}`, absent from the pedigree",
                    row.member_id, row.family_id
                ))
            })?;
        present[i][s] = true;
        if let Some(&l) = snp_index.get(row.snp_id.as_str()) {
            reads[i][s][l] = ReadObservation {
                depth: row.depth,
                variants: row.variants,
            };
        }
    }
    for (row, p) in pedigree.iter().zip(&present) {
        if let Some(s) = p.iter().position(|x| !x) {
            return Err(Error::Validation(format!(
                "member `{}` of family `{}` has no rows in the counts",
                row.members[s], row.family_id
            )));
        }
    }
    let families = pedigree
        .iter()
        .zip(reads)
        .map(|(row, r)| Family::new(row.family_id.clone(), row.members.clone(), row.relationship.clone(), r))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(snp_ids, families)
}

/// Parameters file contents.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamsFile {
    pub snp_ids: Vec<String>,
    pub mafs: Vec<f64>,
    pub alphas: Vec<f64>,
    /// Joint haplotype frequencies over all listed SNPs, when present.
    pub haplotypes: Option<FounderFrequencies>,
}

impl ParamsFile {
    pub fn from_params(snp_ids: &[String], theta: &ModelParams, joint: bool) -> Self {
        Self {
            snp_ids: snp_ids.to_vec(),
            mafs: theta.founders.mafs(),
            alphas: theta.errors.as_slice().to_vec(),
            haplotypes: joint.then(|| theta.founders.clone()),
        }
    }

    /// Per-SNP parameters concatenated from single-SNP fits.
    pub fn from_single_snp(snp_ids: &[String], fits: &[ModelParams]) -> Self {
        Self {
            snp_ids: snp_ids.to_vec(),
            mafs: fits.iter().map(|t| t.founders.maf(0)).collect(),
            alphas: fits.iter().map(|t| t.errors.as_slice()[0]).collect(),
            haplotypes: None,
        }
    }

    /// Model over the SNPs at `loci`; joint frequencies when available, otherwise linkage equilibrium.
    pub fn model(&self, loci: &[usize]) -> Result<ModelParams> {
        let founders = match &self.haplotypes {
            Some(f) => f.marginal(loci)?,
            None => FounderFrequencies::independent(&loci.iter().map(|&l| self.mafs[l]).collect::<Vec<_>>())?,
        };
        ModelParams::new(
            founders,
            ErrorRates::new(loci.iter().map(|&l| self.alphas[l]).collect())?,
        )
    }
}

pub fn emit_params(params: &ParamsFile, header: &[String]) -> String {
    let mut out = String::new();
    for h in header {
        let _ = writeln!(out, "# {h}");
    }
    out.push_str("snp_id\tmaf_hat\talpha_hat\n");
    for ((snp, maf), alpha) in params.snp_ids.iter().zip(&params.mafs).zip(&params.alphas) {
        let _ = writeln!(out, "{snp}\t{maf:.10}\t{alpha:.10}");
    }
    if let Some(f) = &params.haplotypes {
        out.push_str("#haplotypes\n");
        for (h, p) in f.freqs().iter().enumerate() {
            let _ = writeln!(out, "{}\t{p:.12}", haplotype_pattern(h, f.num_loci()));
        }
    }
    out
}

pub fn parse_params_str(text: &str, source: &str) -> Result<ParamsFile> {
    let mut in_haplotypes = false;
    let mut header_seen = false;
    let (mut snp_ids, mut mafs, mut alphas) = (Vec::new(), Vec::new(), Vec::new());
    let mut hap: Vec<(usize, f64)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        if line.trim() == "#haplotypes" {
            in_haplotypes = true;
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| parse_err(source, n, format!("`{s}` is not a number")))
        };
        if in_haplotypes {
            if fields.len() != 2 {
                return Err(parse_err(source, n, "haplotype lines need a pattern and a frequency"));
            }
            let h = parse_haplotype_pattern(fields[0]).map_err(|e| parse_err(source, n, e.to_string()))?;
            if fields[0].len() != snp_ids.len() {
                return Err(parse_err(
                    source,
                    n,
                    format!("pattern `{}` does not cover {} SNPs", fields[0], snp_ids.len()),
                ));
            }
            hap.push((h, num(fields[1])?));
            continue;
        }
        if !header_seen {
            if fields != ["snp_id", "maf_hat", "alpha_hat"] {
                return Err(parse_err(source, n, "header must be `snp_id\\tmaf_hat\\talpha_hat`"));
            }
            header_seen = true;
            continue;
        }
        if fields.len() != 3 {
            return Err(parse_err(
                source,
                n,
                format!("expected 3 columns, found {}", fields.len()),
            ));
        }
        snp_ids.push(fields[0].to_string());
        mafs.push(num(fields[1])?);
        alphas.push(num(fields[2])?);
    }
    if !header_seen {
        return Err(parse_err(source, 1, "missing header row"));
    }
    if snp_ids.is_empty() {
        return Err(parse_err(source, 1, "no SNP rows"));
    }
    let haplotypes = if hap.is_empty() {
        None
    } else {
        let mut freqs = vec![0.0; 1 << snp_ids.len().min(crate::genotype::MAX_JOINT_LOCI)];
        for (h, p) in hap {
            freqs[h] = p;
        }
        Some(FounderFrequencies::new(snp_ids.len(), freqs).map_err(|e| parse_err(source, 1, e.to_string()))?)
    };
    ErrorRates::new(alphas.clone()).map_err(|e| parse_err(source, 1, e.to_string()))?;
    Ok(ParamsFile {
        snp_ids,
        mafs,
        alphas,
        haplotypes,
    })
}

pub fn parse_params(path: &Path) -> Result<ParamsFile> {
    parse_params_str(&read_file(path)?, &path.display().to_string())
}

/// One row of a calls table.
#[derive(Clone, Debug, PartialEq)]
pub struct CallRow {
    pub family_id: String,
    pub member_id: String,
    pub snp_id: String,
    pub call: u8,
    pub probs: [f64; 3],
    pub tie: bool,
}

/// Calls table sorted by family, member and SNP id.
pub fn emit_calls(rows: &[CallRow], header: &[String]) -> String {
    let mut sorted: Vec<&CallRow> = rows.iter().collect();
    sorted.sort_by(|a, b| (&a.family_id, &a.member_id, &a.snp_id).cmp(&(&b.family_id, &b.member_id, &b.snp_id)));
    let mut out = String::new();
    for h in header {
        let _ = writeln!(out, "# {h}");
    }
    out.push_str(&CALLS_HEADER.join("\t"));
    out.push('\n');
    for r in sorted {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{}",
            r.family_id, r.member_id, r.snp_id, r.call, r.probs[0], r.probs[1], r.probs[2], r.tie as u8
        );
    }
    out
}

/// True genotypes, one row per member and SNP.
pub fn emit_truth(data: &Dataset, truth: &TruthSet, header: &[String]) -> String {
    let mut out = String::new();
    for h in header {
        let _ = writeln!(out, "# {h}");
    }
    out.push_str("family_id\tmember_id\tsnp_id\tgenotype\n");
    for (f, g) in data.families.iter().zip(&truth.genotypes) {
        for (member, gm) in f.member_ids.iter().zip(g) {
            for (snp, code) in data.snp_ids.iter().zip(gm) {
                let _ = writeln!(out, "{}\t{member}\t{snp}\t{code}", f.id);
            }
        }
    }
    out
}

/// Read error rate used at every SNP.
pub fn emit_alphas(snp_ids: &[String], alphas: &[f64], header: &[String]) -> String {
    let mut out = String::new();
    for h in header {
        let _ = writeln!(out, "# {h}");
    }
    out.push_str("snp_id\talpha\n");
    for (s, a) in snp_ids.iter().zip(alphas) {
        let _ = writeln!(out, "{s}\t{a:.10}");
    }
    out
}
