//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::caller::{call_family, ld_pipeline, LdConfig, PartnerConfig};
use crate::em::{fit, Dataset, FitConfig, FitReport, ModelParams};
use crate::error::{ensure, Error, Result};
use crate::evaluation::{parse_methods, run_comparison, to_table, to_tsv, EvalOptions};
use crate::io::{self, CallRow, ParamsFile};
use crate::read_model::ErrorRates;
use crate::simulator::{simulate_replication, ReferencePanel, ScenarioConfig};

#[derive(Parser, Debug)]
#[command(
    name = "pedcall",
    version,
    about = "Genotype calling from read counts in related individuals"
)]
struct Cli {
    /// Worker threads for the engine (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate read counts for a scenario.
    Simulate(SimulateArgs),
    /// Estimate allele frequencies and read error rates.
    Fit(FitArgs),
    /// Call genotypes under given parameters.
    Call(CallArgs),
    /// Call genotypes borrowing information from a correlated SNP.
    LdPipeline(LdArgs),
    /// Compare calling methods on simulated data.
    Evaluate(EvaluateArgs),
}

#[derive(Args, Debug)]
struct Inputs {
    /// Read-count table.
    #[arg(long)]
    counts: PathBuf,
    /// Pedigree table.
    #[arg(long)]
    ped: PathBuf,
}

#[derive(Args, Debug)]
struct EmArgs {
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 5000)]
    max_iter: usize,
    /// Seed for random restarts.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl EmArgs {
    fn config(&self) -> Result<FitConfig> {
        ensure!(self.tol > 0.0, "--tol must be positive");
        ensure!(self.max_iter >= 1, "--max-iter must be at least 1");
        Ok(FitConfig {
            tol: self.tol,
            max_iter: self.max_iter,
            rng_seed: self.seed,
            ..FitConfig::default()
        })
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the scenario's replication count.
    #[arg(long)]
    reps: Option<usize>,
    /// Prefix of the output files.
    #[arg(long)]
    out_prefix: String,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Comma-separated SNP ids to fit (default: all).
    #[arg(long, value_delimiter = ',')]
    loci: Option<Vec<String>>,
    /// Fit the selected SNPs jointly and write their haplotype frequencies.
    #[arg(long)]
    joint: bool,
    /// One read error rate shared by all SNPs of a joint fit.
    #[arg(long)]
    pooled_error: bool,
    #[command(flatten)]
    em: EmArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CallArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Parameters file.
    #[arg(long)]
    params: PathBuf,
    /// Reference panel giving haplotype frequencies over the parameter SNPs.
    #[arg(long)]
    panel: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct LdArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, default_value_t = 0.5)]
    min_r2: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Ignore relationships and treat every member as unrelated.
    #[arg(long)]
    unrelated: bool,
    #[command(flatten)]
    em: EmArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value = "pedgc,seqem,hapgc,pedhapgc")]
    methods: String,
    /// Overrides the scenario's replication count.
    #[arg(long)]
    reps: Option<usize>,
    /// Overrides the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Call with the simulating parameters instead of estimates.
    #[arg(long)]
    known_params: bool,
    #[arg(long)]
    out: PathBuf,
}

/// Outcome of a command that produced its output.
#[derive(Debug, PartialEq, Eq)]
enum Outcome {
    Done,
    NotConverged(String),
}

/// Runs the command line `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(Outcome::Done) => 0,
        Ok(Outcome::NotConverged(what)) => {
            eprintln!("warning: {what} did not converge; output written anyway");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn execute(cli: Cli) -> Result<Outcome> {
    let Cli { threads, command } = cli;
    match threads {
        Some(n) => {
            ensure!(n >= 1, "--threads must be at least 1");
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Validation(format!("thread pool: {e}")))?;
            pool.install(|| dispatch(command))
        }
        None => dispatch(command),
    }
}

fn dispatch(command: Command) -> Result<Outcome> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit_cmd(a),
        Command::Call(a) => call_cmd(a),
        Command::LdPipeline(a) => ld_cmd(a),
        Command::Evaluate(a) => evaluate(a),
    }
}

fn load_scenario(path: &Path, seed: Option<u64>, reps: Option<usize>) -> Result<ScenarioConfig> {
    let mut s = ScenarioConfig::load(path)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    if let Some(reps) = reps {
        s.replications = reps;
    }
    s.validate()?;
    Ok(s)
}

fn load_dataset(inputs: &Inputs, snps: Option<&[String]>) -> Result<Dataset> {
    let counts = io::parse_counts(&inputs.counts)?;
    let pedigree = io::parse_pedigree(&inputs.ped)?;
    io::build_dataset(&counts, &pedigree, snps)
}

fn simulate(a: SimulateArgs) -> Result<Outcome> {
    let scenario = load_scenario(&a.config, a.seed, a.reps)?;
    let header = [format!("seed={}", scenario.seed)];
    for rep in 0..scenario.replications {
        let (data, truth) = simulate_replication(&scenario, rep)?;
        let stem = if scenario.replications == 1 {
            a.out_prefix.clone()
        } else {
            format!("{}rep{:03}.", a.out_prefix, rep + 1)
        };
        let counts = format!("# {}\n{}", header[0], io::emit_counts(&io::dataset_counts(&data)));
        io::write_file(Path::new(&format!("{stem}counts.tsv")), &counts)?;
        let ped = format!("# {}\n{}", header[0], io::emit_pedigree(&io::dataset_pedigree(&data)));
        io::write_file(Path::new(&format!("{stem}pedigree.tsv")), &ped)?;
        io::write_file(
            Path::new(&format!("{stem}truth.tsv")),
            &io::emit_truth(&data, &truth, &header),
        )?;
        io::write_file(
            Path::new(&format!("{stem}alpha.tsv")),
            &io::emit_alphas(&data.snp_ids, &truth.alphas, &header),
        )?;
    }
    Ok(Outcome::Done)
}

fn fit_cmd(a: FitArgs) -> Result<Outcome> {
    let data = load_dataset(&a.inputs, a.loci.as_deref())?;
    let config = FitConfig {
        pooled_error: a.pooled_error,
        ..a.em.config()?
    };
    let header = [format!("seed={}", a.em.seed)];
    let (params, converged) = if a.joint {
        let report = fit(&data, &config)?;
        (
            ParamsFile::from_params(&data.snp_ids, &report.theta_hat, true),
            report.converged,
        )
    } else {
        let reports: Vec<FitReport> = (0..data.num_loci())
            .into_par_iter()
            .map(|l| fit(&data.select_loci(&[l])?, &config))
            .collect::<Result<_>>()?;
        let thetas: Vec<ModelParams> = reports.iter().map(|r| r.theta_hat.clone()).collect();
        (
            ParamsFile::from_single_snp(&data.snp_ids, &thetas),
            reports.iter().all(|r| r.converged),
        )
    };
    io::write_file(&a.out, &io::emit_params(&params, &header))?;
    Ok(if converged {
        Outcome::Done
    } else {
        Outcome::NotConverged("EM".into())
    })
}

fn call_rows(data: &Dataset, theta: &ModelParams) -> Result<Vec<CallRow>> {
    let results = data
        .families
        .par_iter()
        .map(|f| call_family(f, theta))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (f, r) in data.families.iter().zip(results) {
        for (s, member) in f.member_ids.iter().enumerate() {
            for (j, snp) in data.snp_ids.iter().enumerate() {
                rows.push(CallRow {
                    family_id: f.id.clone(),
                    member_id: member.clone(),
                    snp_id: snp.clone(),
                    call: r.genotypes[s][j],
                    probs: r.marginals[s][j],
                    tie: r.tie_flag,
                });
            }
        }
    }
    Ok(rows)
}

fn call_cmd(a: CallArgs) -> Result<Outcome> {
    let params = io::parse_params(&a.params)?;
    let data = load_dataset(&a.inputs, Some(&params.snp_ids))?;
    let all: Vec<usize> = (0..params.snp_ids.len()).collect();
    let rows = if let Some(panel) = &a.panel {
        let panel = ReferencePanel::load(panel)?;
        ensure!(
            panel.num_loci() == params.snp_ids.len(),
            "panel covers {} loci but the parameters list {} SNPs",
            panel.num_loci(),
            params.snp_ids.len()
        );
        let theta = ModelParams::new(panel.frequencies()?, ErrorRates::new(params.alphas.clone())?)?;
        call_rows(&data, &theta)?
    } else if params.haplotypes.is_some() {
        call_rows(&data, &params.model(&all)?)?
    } else {
        let per_snp = all
            .par_iter()
            .map(|&l| call_rows(&data.select_loci(&[l])?, &params.model(&[l])?))
            .collect::<Result<Vec<_>>>()?;
        per_snp.into_iter().flatten().collect()
    };
    io::write_file(&a.out, &io::emit_calls(&rows, &[]))?;
    Ok(Outcome::Done)
}

fn ld_cmd(a: LdArgs) -> Result<Outcome> {
    ensure!((0.0..=1.0).contains(&a.min_r2), "--min-r2 must lie in [0, 1]");
    ensure!(a.lambda >= 0.0, "--lambda must be nonnegative");
    let data = load_dataset(&a.inputs, None)?;
    let config = LdConfig {
        partner: PartnerConfig {
            min_r2: a.min_r2,
            lambda: a.lambda,
        },
        fit: a.em.config()?,
        use_relationship: !a.unrelated,
    };
    let result = ld_pipeline(&data, &config)?;
    let mut rows = Vec::new();
    for (snp, per_family) in data.snp_ids.iter().zip(&result.calls) {
        for (f, calls) in data.families.iter().zip(per_family) {
            for (member, c) in f.member_ids.iter().zip(calls) {
                rows.push(CallRow {
                    family_id: f.id.clone(),
                    member_id: member.clone(),
                    snp_id: snp.clone(),
                    call: c.genotype,
                    probs: c.marginal,
                    tie: c.tie,
                });
            }
        }
    }
    io::write_file(&a.out, &io::emit_calls(&rows, &[format!("seed={}", a.em.seed)]))?;
    Ok(if result.converged {
        Outcome::Done
    } else {
        Outcome::NotConverged("EM".into())
    })
}

fn evaluate(a: EvaluateArgs) -> Result<Outcome> {
    let scenario = load_scenario(&a.scenario, a.seed, a.reps)?;
    let methods = parse_methods(&a.methods)?;
    let options = EvalOptions {
        known_parameters: a.known_params,
        ..EvalOptions::default()
    };
    let row = run_comparison(&scenario, &methods, &options)?;
    let rows = [row];
    io::write_file(&a.out, &format!("# seed={}\n{}", scenario.seed, to_tsv(&rows)))?;
    print!("{}", to_table(&rows));
    let failed: usize = rows[0].methods.iter().map(|m| m.nonconverged).sum();
    Ok(if failed == 0 {
        Outcome::Done
    } else {
        Outcome::NotConverged(format!("{failed} model fits"))
    })
}
