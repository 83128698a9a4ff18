use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand};
use mixprod::hadamard::{hadamard_extension, kruskal_rank, sigma_k_cst_lower_bound, sigma_k_lower_bound};
use mixprod::io::{
    model_from_json, model_to_json, moments_from_json, moments_to_json, parameters_from_json, samples_from_text,
    samples_to_text, AdversarialFile, ResultFile,
};
use mixprod::linalg::sigma_k;
use mixprod::model::parameter_distance;
use mixprod::{
    adversarial, assemble_pair_matrices, draw_samples, empirical_moments, exact_moments, extend_to_all_observables,
    identify, identify_search, random_model, stat_distance, IdentifyOptions, MixtureModel, MomentVector,
    SubsetPartition,
};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

const MAX_DIAG_SUBSETS: usize = 100_000;

#[derive(Parser, Debug)]
#[command(
    name = "mixprod",
    version,
    about = "Identify mixtures of product distributions from moments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Report timing; repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
enum Command {
    /// Write a random separated model.
    Generate(GenerateArgs),
    /// Draw samples from a model.
    Sample(SampleArgs),
    /// Compute exact or empirical moments.
    Moments(MomentsArgs),
    /// Recover parameters from moments.
    Identify(IdentifyArgs),
    /// Print the parameter distance between two model or result files.
    Compare(PairArgs),
    /// Print the moment distance between two moments files.
    Statdist(PairArgs),
    /// Write a statistically confusable pair of models.
    Adversarial(AdversarialArgs),
    /// Print conditioning diagnostics for a model.
    Diag(DiagArgs),
    /// Error-versus-sample-size sweep, written as CSV.
    Eval(EvalArgs),
}

#[derive(Args, Debug, Serialize)]
struct GenerateArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    zeta: f64,
    #[arg(long)]
    pi_min: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct SampleArgs {
    #[arg(long)]
    model: PathBuf,
    /// Number of samples.
    #[arg(short = 'N', long = "count")]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
#[command(group(ArgGroup::new("source").required(true).args(["exact", "samples"])))]
struct MomentsArgs {
    /// Model file.
    #[arg(long)]
    exact: Option<PathBuf>,
    /// Samples file.
    #[arg(long)]
    samples: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
#[command(group(ArgGroup::new("mode").required(true).args(["subset", "search"])))]
struct IdentifyArgs {
    #[arg(long)]
    moments: PathBuf,
    #[arg(long)]
    k: usize,
    /// Partition "S;T;anchor", e.g. "1;2;0" or "0,1;2,3;4".
    #[arg(long, value_parser = parse_partition)]
    #[serde(serialize_with = "serialize_partition")]
    subset: Option<SubsetPartition>,
    /// Try every partition and keep the best fit.
    #[arg(long)]
    search: bool,
    #[arg(long, default_value_t = 1e-10)]
    rank_tol: f64,
    #[arg(long, default_value_t = 1e-7)]
    sep_tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    imag_tol: f64,
    #[arg(long, default_value_t = 1e-10)]
    pi_tol: f64,
    #[arg(long, default_value_t = 1e-10)]
    row0_tol: f64,
    #[arg(long)]
    project_simplex: bool,
    #[arg(long)]
    min_subset_size: Option<usize>,
    #[arg(long, default_value_t = 1_000_000)]
    max_candidates: usize,
    #[arg(long)]
    out: PathBuf,
}

impl IdentifyArgs {
    fn options(&self) -> IdentifyOptions {
        IdentifyOptions {
            rank_tol: self.rank_tol,
            sep_tol: self.sep_tol,
            imag_tol: self.imag_tol,
            pi_tol: self.pi_tol,
            row0_tol: self.row0_tol,
            project_simplex: self.project_simplex,
            min_subset_size: self.min_subset_size,
            max_candidates: self.max_candidates,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct PairArgs {
    a: PathBuf,
    b: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct AdversarialArgs {
    #[arg(long)]
    k: usize,
    /// Defaults to half of the largest admissible value.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct DiagArgs {
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct EvalArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    zeta: f64,
    #[arg(long)]
    pi_min: f64,
    /// Comma-separated sample sizes.
    #[arg(long = "n-list", value_parser = parse_n_list)]
    n_list: NList,
    /// Replicates per sample size.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
#[serde(transparent)]
struct NList(Vec<usize>);

fn parse_partition(s: &str) -> std::result::Result<SubsetPartition, String> {
    SubsetPartition::parse(s).map_err(|e| e.to_string())
}

fn serialize_partition<S: serde::Serializer>(
    p: &Option<SubsetPartition>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match p {
        Some(p) => s.serialize_str(&p.to_string()),
        None => s.serialize_none(),
    }
}

fn parse_n_list(s: &str) -> std::result::Result<NList, String> {
    let sizes = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<usize>().map_err(|_| format!("'{t}' is not a sample size")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if sizes.is_empty() {
        return Err("the N-list is empty".into());
    }
    Ok(NList(sizes))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn load_model(path: &Path) -> Result<MixtureModel> {
    model_from_json(&read(path)?).with_context(|| format!("loading model {}", path.display()))
}

fn load_moments(path: &Path) -> Result<MomentVector> {
    moments_from_json(&read(path)?).with_context(|| format!("loading moments {}", path.display()))
}

fn configure_threads() -> Result<usize> {
    let threads = match std::env::var("MIXPROD_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .with_context(|| format!("MIXPROD_THREADS='{v}' is not a thread count"))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("configuring the thread pool")?;
    Ok(threads)
}

fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let model: MixtureModel = random_model(a.k, a.n, a.zeta, a.pi_min, a.seed)?;
    write(&a.out, &model_to_json(&model))
}

fn cmd_sample(a: &SampleArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let batch = draw_samples(&model, a.count, a.seed)?;
    write(&a.out, &samples_to_text(&batch.samples, a.seed))
}

fn cmd_moments(a: &MomentsArgs) -> Result<()> {
    let mu: MomentVector = match (&a.exact, &a.samples) {
        (Some(model), None) => exact_moments(&load_model(model)?)?,
        (None, Some(path)) => {
            let samples =
                samples_from_text(&read(path)?).with_context(|| format!("loading samples {}", path.display()))?;
            empirical_moments(&samples)?
        }
        _ => bail!("exactly one of --exact and --samples is required"),
    };
    write(&a.out, &moments_to_json(&mu))
}

fn cmd_identify(a: &IdentifyArgs, config: serde_json::Value) -> Result<()> {
    let mu = load_moments(&a.moments)?;
    let opts = a.options();
    let result = match &a.subset {
        Some(p) => identify(&mu, a.k, p, &opts)?,
        None => identify_search(&mu, a.k, &opts)?,
    };
    let full = extend_to_all_observables(&result, &mu, &opts)?;
    let mut file = ResultFile::new(&result, Some(&full));
    file.config = Some(config);
    eprintln!(
        "partition {}; fit residual {:.3e}",
        result.partition, result.diagnostics.fit_residual
    );
    write(&a.out, &file.to_json())
}

fn cmd_compare(a: &PairArgs) -> Result<()> {
    let (pi_a, m_a) =
        parameters_from_json::<f64>(&read(&a.a)?).with_context(|| format!("loading {}", a.a.display()))?;
    let (pi_b, m_b) =
        parameters_from_json::<f64>(&read(&a.b)?).with_context(|| format!("loading {}", a.b.display()))?;
    if pi_a.len() != pi_b.len() {
        bail!(
            "k mismatch: {} has k = {}, {} has k = {}",
            a.a.display(),
            pi_a.len(),
            a.b.display(),
            pi_b.len()
        );
    }
    if m_a.nrows() != m_b.nrows() {
        bail!(
            "n mismatch: {} has n = {}, {} has n = {}",
            a.a.display(),
            m_a.nrows(),
            a.b.display(),
            m_b.nrows()
        );
    }
    println!("{}", parameter_distance(&pi_a, &m_a, &pi_b, &m_b)?);
    Ok(())
}

fn cmd_statdist(a: &PairArgs) -> Result<()> {
    let mu_a = load_moments(&a.a)?;
    let mu_b = load_moments(&a.b)?;
    println!("{}", stat_distance(&mu_a, &mu_b)?);
    Ok(())
}

fn cmd_adversarial(a: &AdversarialArgs, config: serde_json::Value) -> Result<()> {
    let eps = match a.eps {
        Some(e) => e,
        None => adversarial::default_lower_bound_eps(a.k)?,
    };
    let pair: mixprod::AdversarialPair = adversarial::lower_bound_instance(a.k, eps)?;
    let mut file = AdversarialFile::new(&pair);
    println!("sigma_k(H(m)) = {:e}", file.sigma);
    println!(
        "certified d_model = {:e} > eps = {:e}",
        file.certified_model_gap, file.eps
    );
    println!(
        "certified d_stat = {:e} <= 4 k sigma eps = {:e}",
        file.certified_stat_gap, file.stat_gap_bound
    );
    file.config = Some(config);
    write(&a.out, &file.to_json())
}

fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < r - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, r, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, r, &mut Vec::new(), &mut out);
    out
}

fn binomial(n: usize, r: usize) -> usize {
    if r > n {
        return 0;
    }
    (0..r).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

fn extension_of(model: &MixtureModel, rows: &[usize]) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        return Ok(DMatrix::from_element(1, model.k(), 1.0));
    }
    Ok(hadamard_extension(model.restrict_rows(rows)?.m())?.into_matrix())
}

fn cmd_diag(a: &DiagArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let (k, n) = (model.k(), model.n());
    let zeta = model.min_separation().unwrap_or(1.0);
    let pi_min = model.min_pi();
    let sigma_bar = sigma_k_lower_bound(k, zeta);
    let c_bar = sigma_k_cst_lower_bound(k, zeta, pi_min);
    println!("k = {k}, n = {n}, measured zeta = {zeta:e}, pi_min = {pi_min:e}");
    println!("sigma_bar = {sigma_bar:e}");
    println!("pi_min * sigma_bar^2 = {c_bar:e}");

    let mut ok = true;
    if n + 1 >= k {
        let count = binomial(n, k - 1);
        if count > MAX_DIAG_SUBSETS {
            bail!("{count} subsets of size {} exceed the limit {MAX_DIAG_SUBSETS}", k - 1);
        }
        let subsets = combinations(n, k - 1);
        let sigmas = subsets
            .par_iter()
            .map(|s| Ok(sigma_k(&extension_of(&model, s)?, k)?))
            .collect::<Result<Vec<f64>>>()?;
        for (s, sig) in subsets.iter().zip(&sigmas) {
            let flag = if *sig >= sigma_bar { "" } else { "  below bound" };
            ok &= *sig >= sigma_bar;
            println!("sigma_k(H(m[{s:?}])) = {sig:e}{flag}");
        }
    }
    println!("kruskal_rank(m) = {}", kruskal_rank(model.m())?);
    if n + 1 >= 2 * k && k >= 2 {
        let s: Vec<usize> = (0..k - 1).collect();
        let t: Vec<usize> = (k - 1..2 * k - 2).collect();
        let anchor = 2 * k - 2;
        let partition = SubsetPartition::new(s.clone(), t.clone(), anchor)?;
        let pm = assemble_pair_matrices(&exact_moments(&model)?, &partition)?;
        let sc = sigma_k(&pm.c, k)?;
        ok &= sc >= c_bar;
        println!(
            "sigma_k(C_ST) = {sc:e} for partition {partition}{}",
            if sc >= c_bar { "" } else { "  below bound" }
        );
        let weighted = extension_of(&model, &[anchor])? * DMatrix::from_diagonal(model.pi());
        println!("kruskal_rank(H(m[S])) = {}", kruskal_rank(&extension_of(&model, &s)?)?);
        println!("kruskal_rank(H(m[T])) = {}", kruskal_rank(&extension_of(&model, &t)?)?);
        println!("kruskal_rank(H(m[anchor]) diag(pi)) = {}", kruskal_rank(&weighted)?);
    }
    if !ok {
        bail!("a measured singular value fell below its certified lower bound");
    }
    Ok(())
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d8_49bb_133b_11eb);
    z ^ (z >> 31)
}

struct EvalRow {
    n: usize,
    replicate: u64,
    d_stat: f64,
    d_model: f64,
    fit_residual: f64,
    runtime_ms: f64,
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let k = a.k;
    if k == 0 {
        bail!("k must be positive");
    }
    let model: MixtureModel = random_model(k, 2 * k - 1, a.zeta, a.pi_min, a.seed)?;
    let mu = exact_moments(&model)?;
    let partition = SubsetPartition::new((0..k - 1).collect(), (k - 1..2 * k - 2).collect(), 2 * k - 2)?;
    let opts = IdentifyOptions::default();
    let jobs: Vec<(usize, u64)> = a
        .n_list
        .0
        .iter()
        .flat_map(|&n| (0..a.seeds).map(move |r| (n, r)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(n, r)| -> Result<EvalRow> {
            let seed = splitmix64(a.seed ^ splitmix64(n as u64) ^ splitmix64(r.wrapping_add(0x100)));
            let start = Instant::now();
            let batch = draw_samples(&model, n, seed)?;
            let emp: MomentVector = empirical_moments(&batch.samples)?;
            let (d_model, fit_residual) = match identify(&emp, k, &partition, &opts) {
                Ok(res) => (res.distance_to(&model)?, res.diagnostics.fit_residual),
                Err(_) => (f64::NAN, f64::NAN),
            };
            let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
            Ok(EvalRow {
                n,
                replicate: r,
                d_stat: stat_distance(&emp, &mu)?,
                d_model,
                fit_residual,
                runtime_ms,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut csv = String::from("N,seed,d_stat,d_model,fit_residual,runtime_ms\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{:e},{:e},{:e},{:.3}\n",
            r.n, r.replicate, r.d_stat, r.d_model, r.fit_residual, r.runtime_ms
        ));
    }
    write(&a.out, &csv)
}

fn run(cli: Cli) -> Result<()> {
    let threads = configure_threads()?;
    let mut config = serde_json::to_value(&cli.command).context("serializing the run configuration")?;
    config["threads"] = threads.into();
    config["verbose"] = cli.verbose.into();
    eprintln!("config: {config}");
    let start = Instant::now();
    let outcome = match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Moments(a) => cmd_moments(a),
        Command::Identify(a) => cmd_identify(a, config),
        Command::Compare(a) => cmd_compare(a),
        Command::Statdist(a) => cmd_statdist(a),
        Command::Adversarial(a) => cmd_adversarial(a, config),
        Command::Diag(a) => cmd_diag(a),
        Command::Eval(a) => cmd_eval(a),
    };
    if cli.verbose > 0 {
        eprintln!("elapsed: {:.3} s", start.elapsed().as_secs_f64());
    }
    outcome
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
