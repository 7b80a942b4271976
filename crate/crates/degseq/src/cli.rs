//! Command-line surface: sampling, counting, validation, and the desk-scale
//! self test, all driven by the same degree-sequence inputs.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use crate::degrees::{DegreeError, DegreeSequence};
use crate::estimators::{
    count_graphs, trial_seed, EstimatorError, UniformGenerator,
};
use crate::oracle;
use crate::sampler::{sample_with_seed, GraphSample};

#[derive(Parser, Debug)]
#[command(
    name = "degseq",
    about = "Near-uniform sampling and approximate counting of simple graphs with a given degree sequence"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample graphs with the given degree sequence
    Generate(GenerateArgs),
    /// Estimate the number of graphs with the given degree sequence
    Count(CountArgs),
    /// Exact graph count by brute-force enumeration (small instances only)
    ExactCount(SourceArgs),
    /// Closed-form count estimate
    Mckay(SourceArgs),
    /// Check whether a degree sequence is graphical
    Validate(SourceArgs),
    /// Run the oracle-equivalence self test
    Selftest,
    /// Per-sample wall-time scaling table
    Bench(BenchArgs),
}

#[derive(Args, Debug, Clone)]
struct SourceArgs {
    /// Degree file: one integer per line, '#' comments
    #[arg(long, conflicts_with = "regular")]
    degrees: Option<PathBuf>,
    /// d-regular sequence: <N> <D>
    #[arg(long, num_args = 2, value_names = ["N", "D"])]
    regular: Option<Vec<u64>>,
}

impl SourceArgs {
    fn resolve(&self) -> Result<DegreeSequence, DegreeError> {
        match (&self.degrees, &self.regular) {
            (Some(path), None) => DegreeSequence::from_file(path),
            (None, Some(nd)) => DegreeSequence::regular(nd[0] as usize, nd[1] as u32),
            _ => Err(DegreeError::Parse {
                line: 0,
                reason: "exactly one of --degrees or --regular is required".into(),
            }),
        }
    }
}

#[derive(Args, Debug)]
struct CountArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write JSON here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum OutputFormat {
    Edgelist,
    Json,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    samples: u64,
    /// Raw sequential sampling (asymptotically uniform) instead of the
    /// accept/reject (eps,delta)-uniform generator
    #[arg(long)]
    fast: bool,
    /// Retry cap per sample under --fast
    #[arg(long, default_value_t = 100)]
    max_retries: u64,
    #[arg(long, value_enum, default_value_t = OutputFormat::Edgelist)]
    format: OutputFormat,
    /// Output path; samples > 1 appends `.NNNNN`
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Vertex counts to time (4-regular unless --degree is given)
    #[arg(long, num_args = 1.., default_values_t = [10_000u64, 20_000, 40_000])]
    sizes: Vec<u64>,
    #[arg(long, default_value_t = 4)]
    degree: u32,
    /// Samples per size; the median time is reported
    #[arg(long, default_value_t = 5)]
    reps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Parses argv and runs. Returns the process exit code:
/// 0 success, 1 input rejection, 2 estimator failure.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version through this path as well
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    init_thread_pool();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(CliError::Input(msg)) => {
            eprintln!("{msg}");
            1
        }
        Err(CliError::Estimator(e)) => {
            eprintln!("{e}");
            2
        }
        Err(CliError::SelftestFailed) => {
            eprintln!("selftest failed");
            1
        }
    }
}

fn init_thread_pool() {
    if let Ok(raw) = std::env::var("DEGSEQ_THREADS") {
        if let Ok(threads) = raw.parse::<usize>() {
            if threads >= 1 {
                // ignore the error if a pool already exists (tests, repeat calls)
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}

enum CliError {
    Input(String),
    Estimator(EstimatorError),
    SelftestFailed,
}

impl From<DegreeError> for CliError {
    fn from(e: DegreeError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<EstimatorError> for CliError {
    fn from(e: EstimatorError) -> Self {
        CliError::Estimator(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(format!("io error: {e}"))
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Generate(args) => cmd_generate(args),
        Command::Count(args) => cmd_count(args),
        Command::ExactCount(args) => cmd_exact_count(args),
        Command::Mckay(args) => cmd_mckay(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Selftest => cmd_selftest(),
        Command::Bench(args) => cmd_bench(args),
    }
}

fn edge_list_text(g: &GraphSample) -> String {
    let mut out = String::new();
    for &(u, v) in &g.edges {
        out.push_str(&format!("{u} {v}\n"));
    }
    out
}

fn sample_metadata(seq: &DegreeSequence, g: &GraphSample, seed: u64) -> serde_json::Value {
    json!({
        "n": seq.n(),
        "m": seq.m(),
        "success": g.success,
        "log_P": g.log_p,
        "log_N": g.log_n,
        "seed": seed,
        "regime_flag": seq.regime_check().in_regime,
    })
}

fn verify_sample(seq: &DegreeSequence, g: &GraphSample) -> Result<(), CliError> {
    let mut deg = vec![0u32; seq.n()];
    let mut prev: Option<(u32, u32)> = None;
    for &(u, v) in &g.edges {
        if u >= v || Some((u, v)) <= prev {
            return Err(CliError::Input("sample verification failed: edge order".into()));
        }
        prev = Some((u, v));
        deg[u as usize] += 1;
        deg[v as usize] += 1;
    }
    if deg != seq.degrees() {
        return Err(CliError::Input("sample verification failed: degrees".into()));
    }
    Ok(())
}

fn cmd_generate(args: GenerateArgs) -> Result<(), CliError> {
    let seq = args.source.resolve()?;
    if args.samples < 1 {
        return Err(CliError::Input("--samples must be >= 1".into()));
    }
    if args.samples > 1 && args.output.is_none() {
        return Err(CliError::Input("--output is required when --samples > 1".into()));
    }

    let samples: Vec<(GraphSample, serde_json::Value)> = if args.fast {
        (0..args.samples)
            .into_par_iter()
            .map(|i| fast_sample(&seq, args.seed, i, args.max_retries))
            .collect::<Result<_, _>>()
            .map_err(CliError::Estimator)?
    } else {
        let gen = UniformGenerator::new(seq.clone(), args.epsilon, args.delta, args.seed)?;
        (0..args.samples)
            .into_par_iter()
            .map(|i| {
                gen.generate(i).map(|(g, meta)| {
                    let mut v = sample_metadata(&seq, &g, args.seed);
                    v["attempts"] = json!(meta.attempts);
                    v["failures"] = json!(meta.failures);
                    v["acceptance_overflows"] = json!(meta.acceptance_overflows);
                    (g, v)
                })
            })
            .collect::<Result<_, _>>()
            .map_err(CliError::Estimator)?
    };

    for (i, (g, meta)) in samples.iter().enumerate() {
        verify_sample(&seq, g)?;
        match &args.output {
            Some(path) => {
                let base = if args.samples == 1 {
                    path.clone()
                } else {
                    path.with_file_name(format!(
                        "{}.{:05}",
                        path.file_name().unwrap_or_default().to_string_lossy(),
                        i
                    ))
                };
                match args.format {
                    OutputFormat::Edgelist => {
                        std::fs::write(&base, edge_list_text(g))?;
                        let mut sidecar = base.as_os_str().to_owned();
                        sidecar.push(".json");
                        std::fs::write(sidecar, format!("{meta}\n"))?;
                    }
                    OutputFormat::Json => {
                        let mut v = meta.clone();
                        v["edges"] = json!(g.edges);
                        std::fs::write(&base, format!("{v}\n"))?;
                    }
                }
            }
            None => match args.format {
                OutputFormat::Edgelist => {
                    print!("{}", edge_list_text(g));
                    eprintln!("{meta}");
                }
                OutputFormat::Json => {
                    let mut v = meta.clone();
                    v["edges"] = json!(g.edges);
                    println!("{v}");
                }
            },
        }
    }
    Ok(())
}

fn fast_sample(
    seq: &DegreeSequence,
    seed: u64,
    index: u64,
    max_retries: u64,
) -> Result<(GraphSample, serde_json::Value), EstimatorError> {
    // stream tag 2 matches the uniform generator's sample stream
    let base = trial_seed(seed, 2, index);
    for attempt in 0..max_retries {
        let g = sample_with_seed(seq, trial_seed(base, 2, attempt));
        if g.success {
            let mut meta = sample_metadata(seq, &g, seed);
            meta["attempts"] = json!(attempt + 1);
            return Ok((g, meta));
        }
    }
    Err(EstimatorError::GenerationStalled {
        attempts: max_retries,
    })
}

fn count_json(seq: &DegreeSequence, est: &crate::estimators::CountEstimate, seed: u64) -> serde_json::Value {
    let log10 = est.log10_count();
    let count_if_small = if log10 < 18.0 {
        json!(format!("{:.0}", est.log_mean.exp()))
    } else {
        json!(null)
    };
    json!({
        "n": seq.n(),
        "m": seq.m(),
        "k": est.k,
        "failures": est.failures,
        "log10_count": log10,
        "count_if_small": count_if_small,
        "rel_std_err": est.rel_std_err,
        "epsilon": est.epsilon,
        "delta": est.delta,
        "seed": seed,
    })
}

fn emit(output: &Option<PathBuf>, text: String) -> Result<(), CliError> {
    match output {
        Some(path) => std::fs::write(path, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn cmd_count(args: CountArgs) -> Result<(), CliError> {
    let seq = args.source.resolve()?;
    if !(0.0..1.0).contains(&args.epsilon) || args.epsilon == 0.0 {
        return Err(CliError::Input("--epsilon must be in (0,1)".into()));
    }
    if !(0.0..1.0).contains(&args.delta) || args.delta == 0.0 {
        return Err(CliError::Input("--delta must be in (0,1)".into()));
    }
    let est = count_graphs(&seq, args.epsilon, args.delta, args.seed)?;
    emit(&args.output, format!("{}\n", count_json(&seq, &est, args.seed)))
}

fn cmd_exact_count(args: SourceArgs) -> Result<(), CliError> {
    let seq = args.resolve()?;
    let graphs = oracle::enumerate_graphs(&seq).map_err(|e| CliError::Input(e.to_string()))?;
    let mut out = json!({
        "n": seq.n(),
        "m": seq.m(),
        "count": graphs.len(),
    });
    if let Ok(dist) = oracle::exact_distribution(&seq) {
        out["distribution"] = dist.to_json();
    }
    println!("{out}");
    Ok(())
}

fn cmd_mckay(args: SourceArgs) -> Result<(), CliError> {
    let seq = args.resolve()?;
    let log = seq.mckay_log_count();
    let log10 = log / std::f64::consts::LN_10;
    if log10 < 18.0 {
        println!("{:?}", log.exp());
    } else {
        println!("10^{log10:.6}");
    }
    Ok(())
}

fn cmd_validate(args: SourceArgs) -> Result<(), CliError> {
    let seq = args.resolve()?;
    println!("graphical: {seq}");
    Ok(())
}

fn cmd_selftest() -> Result<(), CliError> {
    let mut ok = true;
    let mut check = |name: &str, pass: bool| {
        println!("{}: {name}", if pass { "PASS" } else { "FAIL" });
        ok &= pass;
    };

    let cases: &[&[u32]] = &[
        &[1, 1],
        &[2, 2, 2],
        &[2, 2, 2, 2],
        &[2, 2, 1, 1],
        &[3, 1, 1, 1],
        &[3, 2, 2, 2, 1],
    ];
    for degrees in cases {
        let seq = DegreeSequence::new(degrees.to_vec()).expect("selftest sequences are graphical");
        let enumerated = oracle::enumerate_graphs(&seq).expect("within guard");
        let dist = oracle::exact_distribution(&seq).expect("within guard");
        check(
            &format!("{degrees:?}: distribution support = enumeration"),
            dist.per_graph.keys().cloned().collect::<Vec<_>>() == enumerated,
        );
        let total = dist
            .per_graph
            .values()
            .fold(dist.failure_prob.clone(), |acc, p| acc + p);
        check(
            &format!("{degrees:?}: probabilities sum to 1"),
            total == num_rational::BigRational::from(num_bigint::BigInt::from(1)),
        );
        let expected = oracle::expected_estimator(&seq).expect("within guard");
        check(
            &format!("{degrees:?}: E[N] = graph count"),
            expected == num_rational::BigRational::from(num_bigint::BigInt::from(enumerated.len())),
        );
        let est = count_graphs(&seq, 0.1, 0.1, 12345).expect("count runs");
        let x = est.log_mean.exp();
        let exact = enumerated.len() as f64;
        check(
            &format!("{degrees:?}: count estimate near exact ({x:.3} vs {exact})"),
            (x - exact).abs() <= 0.15 * exact,
        );
    }
    if ok {
        Ok(())
    } else {
        Err(CliError::SelftestFailed)
    }
}

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    println!("{:>10} {:>10} {:>6} {:>14}", "n", "m", "d", "sec_per_sample");
    for &n in &args.sizes {
        let seq = DegreeSequence::regular(n as usize, args.degree)?;
        let mut times: Vec<f64> = (0..args.reps)
            .map(|i| {
                let start = Instant::now();
                let g = sample_with_seed(&seq, trial_seed(args.seed, 2, i));
                assert!(g.success || g.edges.len() < seq.m() as usize);
                start.elapsed().as_secs_f64()
            })
            .collect();
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = times[times.len() / 2];
        println!(
            "{:>10} {:>10} {:>6} {:>14.6}",
            n,
            seq.m(),
            args.degree,
            median
        );
    }
    Ok(())
}
