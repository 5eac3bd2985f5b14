//! Scoring calls against simulated truth and running method comparisons.

use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::caller::{call_dataset, ld_pipeline, regroup, split_calls, LdConfig, PartnerConfig, SnpCall};
use crate::em::{fit, Dataset, FitConfig, ModelParams};
use crate::error::{ensure, Error, Result};
use crate::genotype::GenotypeVector;
use crate::pedigree::Relationship;
use crate::simulator::{simulate_replication, DepthModel, ErrorModel, FounderModel, ScenarioConfig, TruthSet};

/// Calling method under comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// One SNP at a time, relatives modelled jointly.
    PedGc,
    /// One SNP at a time, everyone treated as unrelated.
    SeqEm,
    /// LD between SNPs, everyone treated as unrelated.
    HapGc,
    /// LD between SNPs and relatives modelled jointly.
    PedHapGc,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::PedGc, Method::SeqEm, Method::HapGc, Method::PedHapGc];

    pub fn name(self) -> &'static str {
        match self {
            Method::PedGc => "pedgc",
            Method::SeqEm => "seqem",
            Method::HapGc => "hapgc",
            Method::PedHapGc => "pedhapgc",
        }
    }

    fn uses_relationship(self) -> bool {
        matches!(self, Method::PedGc | Method::PedHapGc)
    }

    fn uses_ld(self) -> bool {
        matches!(self, Method::HapGc | Method::PedHapGc)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            Error::Validation(format!(
                "unknown method `{s}`; expected pedgc, seqem, hapgc or pedhapgc"
            ))
        })
    }
}

/// Comma-separated method list.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let methods: Vec<Method> = list.split(',').map(|s| s.trim().parse()).collect::<Result<_>>()?;
    ensure!(!methods.is_empty(), "no methods given");
    Ok(methods)
}

/// Error count out of a number of calls.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Tally {
    pub errors: u64,
    pub total: u64,
}

impl Tally {
    /// Percentage of errors; `None` for an empty stratum.
    pub fn pct(self) -> Option<f64> {
        (self.total > 0).then(|| 100.0 * self.errors as f64 / self.total as f64)
    }

    fn add(&mut self, other: Tally) {
        self.errors += other.errors;
        self.total += other.total;
    }
}

/// Error tallies overall and among true heterozygotes and homozygotes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ErrorReport {
    pub overall: Tally,
    pub het: Tally,
    pub hom: Tally,
}

impl ErrorReport {
    pub fn overall_pct(&self) -> Option<f64> {
        self.overall.pct()
    }

    pub fn het_pct(&self) -> Option<f64> {
        self.het.pct()
    }

    pub fn hom_pct(&self) -> Option<f64> {
        self.hom.pct()
    }

    fn record(&mut self, call: u8, truth: u8) {
        let wrong = (call != truth) as u64;
        let stratum = if truth == 1 { &mut self.het } else { &mut self.hom };
        stratum.errors += wrong;
        stratum.total += 1;
        self.overall.errors += wrong;
        self.overall.total += 1;
    }

    pub fn merge(&mut self, other: &ErrorReport) {
        self.overall.add(other.overall);
        self.het.add(other.het);
        self.hom.add(other.hom);
    }
}

impl fmt::Display for ErrorReport {
    /// `overall (het/hom)` in percent, `NA` for empty strata.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({}/{})",
            fmt_pct(self.overall_pct()),
            fmt_pct(self.het_pct()),
            fmt_pct(self.hom_pct())
        )
    }
}

fn fmt_pct(p: Option<f64>) -> String {
    p.map_or_else(|| "NA".to_string(), |v| format!("{v:.2}"))
}

fn check_shape(calls: &[Vec<GenotypeVector>], truth: &[Vec<GenotypeVector>]) -> Result<usize> {
    ensure!(
        calls.len() == truth.len(),
        "{} called families vs {} true families",
        calls.len(),
        truth.len()
    );
    let mut m = None;
    for (i, (c, t)) in calls.iter().zip(truth).enumerate() {
        ensure!(
            c.len() == t.len(),
            "family {i}: {} called members vs {} true members",
            c.len(),
            t.len()
        );
        for (a, b) in c.iter().zip(t) {
            ensure!(
                a.len() == b.len(),
                "family {i}: {} called loci vs {} true loci",
                a.len(),
                b.len()
            );
            ensure!(
                *m.get_or_insert(a.len()) == a.len(),
                "families disagree on the number of loci"
            );
        }
    }
    Ok(m.unwrap_or(0))
}

/// Scores genotype calls `[family][member][locus]` against truth over every call.
pub fn score(calls: &[Vec<GenotypeVector>], truth: &[Vec<GenotypeVector>]) -> Result<ErrorReport> {
    let per_locus = score_by_locus(calls, truth, None)?;
    let mut total = ErrorReport::default();
    per_locus.iter().for_each(|r| total.merge(r));
    Ok(total)
}

/// Per-locus reports, optionally restricted to some member positions.
pub fn score_by_locus(
    calls: &[Vec<GenotypeVector>],
    truth: &[Vec<GenotypeVector>],
    members: Option<&[usize]>,
) -> Result<Vec<ErrorReport>> {
    let m = check_shape(calls, truth)?;
    let mut reports = vec![ErrorReport::default(); m];
    for (c, t) in calls.iter().zip(truth) {
        for s in 0..c.len() {
            if members.is_some_and(|keep| !keep.contains(&s)) {
                continue;
            }
            for (locus, report) in reports.iter_mut().enumerate() {
                report.record(c[s][locus], t[s][locus]);
            }
        }
    }
    Ok(reports)
}

/// Mean and standard error of the defined values.
pub fn mean_se(values: &[Option<f64>]) -> Option<(f64, f64)> {
    let v: Vec<f64> = values.iter().flatten().copied().collect();
    if v.is_empty() {
        return None;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return Some((mean, 0.0));
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Some((mean, (var / n).sqrt()))
}

/// One-sided paired t-test that `a` is smaller than `b` on average.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairedTest {
    pub mean_difference: f64,
    pub t: f64,
    pub df: f64,
    /// One-sided p-value for `mean(a − b) < 0`.
    pub p_value: f64,
}

pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTest> {
    ensure!(a.len() == b.len(), "paired samples differ in length");
    ensure!(a.len() >= 2, "a paired t-test needs at least two pairs");
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let df = n - 1.0;
    if var == 0.0 {
        let p_value = if mean < 0.0 { 0.0 } else { 1.0 };
        return Ok(PairedTest {
            mean_difference: mean,
            t: f64::NAN,
            df,
            p_value,
        });
    }
    let t = mean / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Validation(e.to_string()))?;
    Ok(PairedTest {
        mean_difference: mean,
        t,
        df,
        p_value: dist.cdf(t),
    })
}

/// Results of one method over all replications of a scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    /// Tallies pooled over replications and loci.
    pub pooled: ErrorReport,
    /// Tallies pooled over replications, per locus.
    pub per_locus: Vec<ErrorReport>,
    /// Each replication's report over all loci.
    pub replications: Vec<ErrorReport>,
    /// Each replication's per-locus reports.
    pub replication_loci: Vec<Vec<ErrorReport>>,
    /// Replications in which some model fit did not converge.
    pub nonconverged: usize,
}

impl MethodSummary {
    /// Overall error percentage of every replication.
    pub fn overall_pcts(&self) -> Vec<Option<f64>> {
        self.replications.iter().map(|r| r.overall_pct()).collect()
    }

    /// Overall error percentage at one locus in every replication.
    pub fn locus_pcts(&self, locus: usize) -> Vec<Option<f64>> {
        self.replication_loci.iter().map(|r| r[locus].overall_pct()).collect()
    }

    /// Mean and standard error over replications of the overall percentage.
    pub fn overall_mean_se(&self) -> Option<(f64, f64)> {
        mean_se(&self.overall_pcts())
    }

    pub fn locus_mean_se(&self, locus: usize) -> Option<(f64, f64)> {
        mean_se(&self.locus_pcts(locus))
    }
}

/// All methods scored on the same replicated datasets.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub scenario: String,
    pub snp_ids: Vec<String>,
    pub methods: Vec<MethodSummary>,
}

impl ComparisonRow {
    pub fn method(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == method)
    }
}

#[derive(Clone, Debug, Default)]
pub struct EvalOptions {
    pub fit: FitConfig,
    pub partner: PartnerConfig,
    /// Call with the simulation's true parameters instead of fitting them.
    pub known_parameters: bool,
}

type Calls = Vec<Vec<GenotypeVector>>;

fn view(data: &Dataset, loci: &[usize], related: bool) -> Result<Dataset> {
    let sub = data.select_loci(loci)?;
    Ok(if related { sub } else { sub.as_unrelated() })
}

fn params_for(
    view: &Dataset,
    loci: &[usize],
    scenario: &ScenarioConfig,
    truth: &TruthSet,
    options: &EvalOptions,
) -> Result<(ModelParams, bool)> {
    if options.known_parameters {
        return Ok((scenario.true_params(truth, loci)?, true));
    }
    let report = fit(view, &options.fit)?;
    Ok((report.theta_hat, report.converged))
}

/// Per-SNP calls `[locus][family][member]` from joint calls on a (possibly unrelated) view.
fn joint_snp_calls(
    data: &Dataset,
    view: &Dataset,
    theta: &ModelParams,
    related: bool,
) -> Result<Vec<Vec<Vec<SnpCall>>>> {
    let calls = call_dataset(view, theta)?;
    let per_locus = split_calls(&calls, theta.num_loci());
    Ok(if related {
        per_locus
    } else {
        per_locus
            .into_iter()
            .map(|l| regroup(data, l.into_iter().flatten().collect()))
            .collect()
    })
}

fn assemble(per_locus: Vec<Vec<Vec<SnpCall>>>) -> Calls {
    let m = per_locus.len();
    let families = per_locus[0].len();
    (0..families)
        .map(|i| {
            (0..per_locus[0][i].len())
                .map(|s| (0..m).map(|l| per_locus[l][i][s].genotype).collect())
                .collect()
        })
        .collect()
}

/// Genotype calls of one method on one replication, and whether every fit converged.
fn method_calls(
    method: Method,
    data: &Dataset,
    scenario: &ScenarioConfig,
    truth: &TruthSet,
    options: &EvalOptions,
) -> Result<(Calls, bool)> {
    let m = data.num_loci();
    let related = method.uses_relationship();
    if !method.uses_ld() {
        let mut converged = true;
        let mut per_locus = Vec::with_capacity(m);
        for locus in 0..m {
            let v = view(data, &[locus], related)?;
            let (theta, ok) = params_for(&v, &[locus], scenario, truth, options)?;
            converged &= ok;
            per_locus.push(joint_snp_calls(data, &v, &theta, related)?.pop().expect("one locus"));
        }
        return Ok((assemble(per_locus), converged));
    }
    ensure!(m >= 2, "{method} needs at least two SNPs");
    if m == 2 {
        let v = view(data, &[0, 1], related)?;
        let (theta, ok) = params_for(&v, &[0, 1], scenario, truth, options)?;
        return Ok((assemble(joint_snp_calls(data, &v, &theta, related)?), ok));
    }
    ensure!(
        !options.known_parameters,
        "known parameters are not supported by the LD pipeline beyond two SNPs"
    );
    let config = LdConfig {
        partner: options.partner,
        fit: options.fit.clone(),
        use_relationship: related,
    };
    let result = ld_pipeline(data, &config)?;
    Ok((assemble(result.calls), result.converged))
}

/// Hash of the ids and read counts of a dataset.
pub fn fingerprint(data: &Dataset) -> u64 {
    let mut h = DefaultHasher::new();
    data.snp_ids.hash(&mut h);
    for f in &data.families {
        f.id.hash(&mut h);
        f.member_ids.hash(&mut h);
        for o in f.reads.iter().flatten() {
            (o.depth, o.variants).hash(&mut h);
        }
    }
    h.finish()
}

struct ReplicationScores {
    per_method: Vec<(Vec<ErrorReport>, bool)>,
}

fn run_replication(
    scenario: &ScenarioConfig,
    methods: &[Method],
    options: &EvalOptions,
    rep: usize,
) -> Result<ReplicationScores> {
    let (data, truth) = simulate_replication(scenario, rep)?;
    let members = scenario.scored_members.as_deref();
    let digest = fingerprint(&data);
    let per_method = methods
        .iter()
        .map(|&method| {
            let (calls, converged) = method_calls(method, &data, scenario, &truth, options)?;
            assert_eq!(fingerprint(&data), digest, "{method} saw a different dataset");
            Ok((score_by_locus(&calls, &truth.genotypes, members)?, converged))
        })
        .collect::<Result<_>>()?;
    Ok(ReplicationScores { per_method })
}

/// Simulates every replication of `scenario` and scores each method on it.
pub fn run_comparison(scenario: &ScenarioConfig, methods: &[Method], options: &EvalOptions) -> Result<ComparisonRow> {
    scenario.validate()?;
    ensure!(!methods.is_empty(), "no methods to compare");
    let reps: Vec<ReplicationScores> = (0..scenario.replications)
        .into_par_iter()
        .map(|rep| run_replication(scenario, methods, options, rep))
        .collect::<Result<_>>()?;
    let m = scenario.num_loci();
    let summaries = methods
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let mut pooled = ErrorReport::default();
            let mut per_locus = vec![ErrorReport::default(); m];
            let mut replications = Vec::with_capacity(reps.len());
            let mut replication_loci = Vec::with_capacity(reps.len());
            let mut nonconverged = 0;
            for rep in &reps {
                let (loci, converged) = &rep.per_method[k];
                let mut total = ErrorReport::default();
                for (acc, r) in per_locus.iter_mut().zip(loci) {
                    acc.merge(r);
                    total.merge(r);
                }
                pooled.merge(&total);
                replications.push(total);
                replication_loci.push(loci.clone());
                nonconverged += (!converged) as usize;
            }
            MethodSummary {
                method,
                pooled,
                per_locus,
                replications,
                replication_loci,
                nonconverged,
            }
        })
        .collect();
    Ok(ComparisonRow {
        scenario: describe(scenario),
        snp_ids: (1..=m).map(|j| format!("snp{j}")).collect(),
        methods: summaries,
    })
}

/// Short human-readable description of a scenario.
pub fn describe(scenario: &ScenarioConfig) -> String {
    let rel = scenario.relationship.tag().unwrap_or("custom");
    let maf = scenario
        .founders
        .mafs()
        .iter()
        .map(|p| format!("{:.3}", p))
        .collect::<Vec<_>>()
        .join("/");
    let depth = match &scenario.depth {
        DepthModel::Poisson(v) => format!("poisson{}", v[0]),
        DepthModel::Fixed(v) => format!("fixed{}", v[0]),
    };
    let errors = match &scenario.errors {
        ErrorModel::Fixed(a) => a.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join("/"),
        ErrorModel::Uniform { lo, hi } => format!("U[{lo},{hi}]"),
    };
    format!("{rel} x{} maf={maf} err={errors} depth={depth}", scenario.families)
}

/// Two designs that spend the same read budget on a set of sib pairs.
#[derive(Clone, Debug)]
pub struct ReadBudgetConfig {
    pub maf: f64,
    pub alpha: f64,
    pub sib_pairs: usize,
    /// Depth per person when only the sibs are sequenced.
    pub sibs_only_depth: f64,
    /// Depth per person when parents are sequenced as well.
    pub with_parents_depth: f64,
    /// Zero-truncated Poisson depths; fixed depths otherwise.
    pub poisson: bool,
    pub replications: usize,
    pub seed: u64,
}

impl ReadBudgetConfig {
    /// The sibs-only arm and the sibs-plus-parents arm (scored on the sibs).
    pub fn arms(&self) -> Result<(ScenarioConfig, ScenarioConfig)> {
        let depth = |d: f64| -> Result<DepthModel> {
            if self.poisson {
                Ok(DepthModel::poisson(d, 1))
            } else {
                ensure!(d.fract() == 0.0 && d >= 0.0, "fixed depth {d} is not a whole number");
                Ok(DepthModel::fixed(d as u32, 1))
            }
        };
        let arm = |rel: Relationship, d: f64, scored: Option<Vec<usize>>| -> Result<ScenarioConfig> {
            Ok(ScenarioConfig {
                relationship: rel,
                families: self.sib_pairs,
                founders: FounderModel::Mafs(vec![self.maf]),
                depth: depth(d)?,
                errors: ErrorModel::Fixed(vec![self.alpha]),
                replications: self.replications,
                seed: self.seed,
                scored_members: scored,
            })
        };
        Ok((
            arm(Relationship::SibPair, self.sibs_only_depth, None)?,
            arm(
                Relationship::nuclear_family(),
                self.with_parents_depth,
                Some(vec![2, 3]),
            )?,
        ))
    }
}

/// Runs both arms of a read-budget comparison with the given methods.
pub fn read_budget_experiment(
    config: &ReadBudgetConfig,
    methods: &[Method],
    options: &EvalOptions,
) -> Result<(ComparisonRow, ComparisonRow)> {
    let (a, b) = config.arms()?;
    let budget = |c: &ScenarioConfig| {
        let people = (c.families * c.relationship.num_members()) as f64;
        match &c.depth {
            DepthModel::Poisson(v) => v[0] * people,
            DepthModel::Fixed(v) => v[0] as f64 * people,
        }
    };
    let (ba, bb) = (budget(&a), budget(&b));
    ensure!(
        (ba - bb).abs() <= 1e-9 * ba.max(bb),
        "arms spend different read budgets: {ba} vs {bb}"
    );
    Ok((
        run_comparison(&a, methods, options)?,
        run_comparison(&b, methods, options)?,
    ))
}

const TSV_HEADER: &str = "scenario\tmethod\tsnp\toverall_pct\thet_pct\thom_pct\tmean_pct\tse_pct\terrors\tcalls\thet_errors\thet_calls\thom_errors\thom_calls\tnonconverged";

fn tsv_line(
    scenario: &str,
    method: Method,
    snp: &str,
    r: &ErrorReport,
    mean_se: Option<(f64, f64)>,
    nonconverged: usize,
) -> String {
    let (mean, se) = mean_se.map_or(("NA".to_string(), "NA".to_string()), |(m, s)| {
        (format!("{m:.4}"), format!("{s:.4}"))
    });
    let p = |x: Option<f64>| x.map_or_else(|| "NA".to_string(), |v| format!("{v:.4}"));
    format!(
        "{scenario}\t{method}\t{snp}\t{}\t{}\t{}\t{mean}\t{se}\t{}\t{}\t{}\t{}\t{}\t{}\t{nonconverged}",
        p(r.overall_pct()),
        p(r.het_pct()),
        p(r.hom_pct()),
        r.overall.errors,
        r.overall.total,
        r.het.errors,
        r.het.total,
        r.hom.errors,
        r.hom.total,
    )
}

/// Tab-separated results: one line per method and SNP plus one per method over all SNPs.
pub fn to_tsv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from(TSV_HEADER);
    out.push('\n');
    for row in rows {
        for s in &row.methods {
            out.push_str(&tsv_line(
                &row.scenario,
                s.method,
                "all",
                &s.pooled,
                s.overall_mean_se(),
                s.nonconverged,
            ));
            out.push('\n');
            if row.snp_ids.len() > 1 {
                for (l, (snp, r)) in row.snp_ids.iter().zip(&s.per_locus).enumerate() {
                    out.push_str(&tsv_line(
                        &row.scenario,
                        s.method,
                        snp,
                        r,
                        s.locus_mean_se(l),
                        s.nonconverged,
                    ));
                    out.push('\n');
                }
            }
        }
    }
    out
}

/// Aligned plain-text table of overall (het/hom) percentages.
pub fn to_table(rows: &[ComparisonRow]) -> String {
    let mut lines: Vec<[String; 4]> = vec![[
        "scenario".into(),
        "method".into(),
        "snp".into(),
        "error % (het/hom)".into(),
    ]];
    for row in rows {
        for s in &row.methods {
            lines.push([
                row.scenario.clone(),
                s.method.to_string(),
                "all".into(),
                s.pooled.to_string(),
            ]);
            if row.snp_ids.len() > 1 {
                for (snp, r) in row.snp_ids.iter().zip(&s.per_locus) {
                    lines.push([row.scenario.clone(), s.method.to_string(), snp.clone(), r.to_string()]);
                }
            }
        }
    }
    let widths: Vec<usize> = (0..4)
        .map(|c| lines.iter().map(|l| l[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for l in &lines {
        let cells: Vec<String> = l.iter().zip(&widths).map(|(c, &w)| format!("{c:<w$}")).collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}
