use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use evodyn::analysis::{
    composed_step_kernel, decompose, estimate_drift, exact_drift, exact_mean_fht, MAX_EXACT_N,
};
use evodyn::formula::{Quantity, Vars};
use evodyn::harness::io::{write_atomic, AGGREGATES_CSV, AGGREGATES_JSON, RESULTS_FILE};
use evodyn::harness::report::{load_aggregates, long_rows, long_rows_csv, summary_table};
use evodyn::harness::{aggregate, execute, preset, resolve, rows_of, ExperimentSpec, PRESETS};
use evodyn::{Mode, RunConfig, SchemeSpec, ShiftSchedule, Simulator};

#[derive(Debug, Parser)]
#[command(name = "evodyn", version, about = "Evolutionary algorithms on a moving BitMatching optimum")]
struct Cli {
    /// Progress messages on stderr (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Execute one run and print its record as JSON.
    Run(RunArgs),
    /// Execute an experiment grid and write results and aggregates.
    Sweep(SweepArgs),
    /// Exact expected first hitting time from the absorbing chain.
    Exact(ExactArgs),
    /// Estimate the one-generation drift of the matching count.
    Drift(DriftArgs),
    /// Print the two-level interval decomposition for n and sigma.
    Decompose(DecomposeArgs),
    /// Turn a results directory into a long-format CSV and a summary table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    n: usize,
    /// Shift rate, a number or formula in n, e.g. `log(n)/(5n^2)`.
    #[arg(long)]
    sigma: String,
    #[arg(long, default_value = "1")]
    lambda: String,
    /// Inline scheme, e.g. `fixed:1/n` or `banded:1/n,log(n)/n,cycle`.
    #[arg(long, default_value = "fixed:1/n")]
    scheme: String,
    #[arg(long, env = "EVODYN_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "0")]
    epsilon: String,
    #[arg(long, default_value = "n^3")]
    max_generations: String,
    #[arg(long, default_value = "count")]
    mode: Mode,
    /// Record matching, best-ratio and interval traces.
    #[arg(long)]
    trace: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Experiment config (JSON).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in experiment name.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (default: available cores).
    #[arg(long)]
    parallelism: Option<usize>,
    /// Overwrite existing results.
    #[arg(long)]
    force: bool,
    /// Overrides the config's base seed.
    #[arg(long, env = "EVODYN_SEED")]
    seed: Option<u64>,
    /// Overrides the config's replication count.
    #[arg(long)]
    replications: Option<u64>,
}

#[derive(Debug, Args)]
struct ExactArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    sigma: String,
    /// Comma-separated mutation rates, one per offspring.
    #[arg(long)]
    rates: String,
    /// Count a parent that coincides with the shifted optimum as a hit, as
    /// the simulator does. `false` counts offspring hits only.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    include_parent_hit: bool,
    /// Write the composed one-generation kernel as CSV.
    #[arg(long)]
    dump_kernel: Option<PathBuf>,
    /// Write per-state expected hitting times as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DriftArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    sigma: String,
    /// Comma-separated mutation rates, one per offspring.
    #[arg(long)]
    rates: String,
    /// Comma-separated matching counts (default: all of 0..n-1).
    #[arg(long)]
    states: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, env = "EVODYN_SEED", default_value_t = 0)]
    seed: u64,
    /// Level of the one-sided lower confidence limit.
    #[arg(long, default_value_t = 0.99)]
    level: f64,
    /// Also print the exact drift.
    #[arg(long)]
    exact: bool,
}

#[derive(Debug, Args)]
struct DecomposeArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    sigma: String,
    /// Comma-separated matching counts to label.
    #[arg(long)]
    classify: Option<String>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Directory written by `sweep`.
    dir: PathBuf,
    /// Long-format CSV destination (default: DIR/report.csv).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Error message; every failure exits with status 2.
type CliResult<T = ()> = Result<T, String>;

fn field<T, E: std::fmt::Display>(name: &str, r: Result<T, E>) -> CliResult<T> {
    r.map_err(|e| format!("--{name}: {e}"))
}

fn n_vars(n: usize) -> Vars {
    Vars::new().with("c", 1.0).with("n", n as f64)
}

fn quantity(name: &str, text: &str, vars: &Vars) -> CliResult<f64> {
    field(name, Quantity::from(text).eval(vars))
}

/// Splits on commas outside parentheses, so `min(1/2, x)` stays whole.
fn split_list(text: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, c) in text.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(text[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(text[start..].trim());
    parts.into_iter().filter(|p| !p.is_empty()).collect()
}

fn quantity_list(name: &str, text: &str, vars: &Vars) -> CliResult<Vec<f64>> {
    let values: Vec<f64> = split_list(text)
        .into_iter()
        .map(|p| quantity(name, p, vars))
        .collect::<CliResult<_>>()?;
    if values.is_empty() {
        return Err(format!("--{name}: empty list"));
    }
    Ok(values)
}

fn count_list(name: &str, text: &str) -> CliResult<Vec<usize>> {
    split_list(text)
        .into_iter()
        .map(|p| field(name, p.parse::<usize>()))
        .collect()
}

fn sigma_of(text: &str, vars: &Vars) -> CliResult<f64> {
    let sigma = quantity("sigma", text, vars)?;
    field("sigma", ShiftSchedule::fixed(sigma))?;
    Ok(sigma)
}

/// Six significant digits.
fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..6).contains(&mag) {
        format!("{:.*}", (5 - mag).max(0) as usize, x)
    } else {
        format!("{x:.5e}")
    }
}

fn cmd_run(a: &RunArgs) -> CliResult {
    if a.n == 0 {
        return Err("--n: problem size must be positive".into());
    }
    let mut vars = n_vars(a.n);
    let sigma = sigma_of(&a.sigma, &vars)?;
    vars.set("sigma", sigma);
    let lambda = field("lambda", Quantity::from(a.lambda.as_str()).eval_count(&vars))? as usize;
    vars.set("lambda", lambda as f64);
    let spec: SchemeSpec = field("scheme", a.scheme.parse())?;
    let scheme = field("scheme", spec.resolve(&vars))?;
    let epsilon = quantity("epsilon", &a.epsilon, &vars)?;
    let cap = field(
        "max-generations",
        Quantity::from(a.max_generations.as_str()).eval_count(&vars),
    )?;
    let schedule = field("sigma", ShiftSchedule::fixed(sigma))?;
    let config = RunConfig::new(a.n, lambda, scheme, schedule, cap, a.seed)
        .with_epsilon(epsilon)
        .with_mode(a.mode)
        .with_traces(a.trace);
    let sim = Simulator::new(config).map_err(|e| e.to_string())?;
    let record = sim.run_replication(0);
    println!("{}", serde_json::to_string_pretty(&record).map_err(|e| e.to_string())?);
    Ok(())
}

fn load_spec(a: &SweepArgs) -> CliResult<ExperimentSpec> {
    let mut spec = match (&a.config, &a.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .map_err(|e| format!("--config: cannot read {}: {e}", path.display()))?;
            field("config", ExperimentSpec::from_json(&text))?
        }
        (None, Some(name)) => preset(name).map_err(|e| format!("--preset: {e} (known: {})", PRESETS.join(", ")))?,
        (None, None) => return Err("one of --config or --preset is required".into()),
    };
    if let Some(seed) = a.seed {
        spec.base_seed = seed;
    }
    if let Some(r) = a.replications {
        spec.replications = r;
    }
    Ok(spec)
}

fn existing_outputs(dir: &Path) -> Vec<&'static str> {
    [RESULTS_FILE, AGGREGATES_CSV, AGGREGATES_JSON]
        .into_iter()
        .filter(|f| dir.join(f).exists())
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), sig6)
}

fn cmd_sweep(a: &SweepArgs, verbose: u8) -> CliResult {
    let spec = load_spec(a)?;
    let cells = resolve(&spec).map_err(|e| e.to_string())?;
    let existing = existing_outputs(&a.out);
    if !existing.is_empty() && !a.force {
        return Err(format!(
            "--out: {} already holds {}; pass --force to overwrite",
            a.out.display(),
            existing.join(", ")
        ));
    }
    fs::create_dir_all(&a.out).map_err(|e| format!("--out: {}: {e}", a.out.display()))?;
    let parallelism = a
        .parallelism
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |p| p.get()));
    if verbose > 0 {
        eprintln!("{}: {} cells on {parallelism} threads", spec.name, cells.len());
    }
    let checkpoint = a.out.join(RESULTS_FILE);
    let results = execute(&cells, parallelism, Some(&checkpoint), |r| {
        let agg = &aggregate(&r.rows())[0];
        println!(
            "cell {} {}: runs {} censor_fraction {:.4} mean_generations {} mean_evaluations {}",
            r.cell.index,
            r.cell.describe(),
            agg.runs,
            agg.censor_fraction,
            fmt_opt(agg.mean_generations),
            fmt_opt(agg.mean_evaluations)
        );
    })
    .map_err(|e| e.to_string())?;
    let rows = rows_of(&results);
    let aggs = aggregate(&rows);
    evodyn::harness::io::write_outputs(&a.out, &rows, &aggs).map_err(|e| e.to_string())?;
    if verbose > 0 {
        eprintln!("wrote {} rows to {}", rows.len(), a.out.display());
    }
    Ok(())
}

fn cmd_exact(a: &ExactArgs) -> CliResult {
    if a.n > MAX_EXACT_N {
        return Err(format!(
            "--n: exact analysis is limited to n <= {MAX_EXACT_N}, got {}",
            a.n
        ));
    }
    let vars = n_vars(a.n);
    let sigma = sigma_of(&a.sigma, &vars)?;
    let rates = quantity_list("rates", &a.rates, &vars)?;
    let sol = exact_mean_fht(a.n, sigma, &rates, a.include_parent_hit).map_err(|e| e.to_string())?;
    for (i, e) in sol.per_state.iter().enumerate() {
        println!("state {i}: expected generations {}", sig6(*e));
    }
    println!("hit at generation 0: {}", sig6(sol.hit_at_zero));
    println!("overall expected generations: {}", sig6(sol.overall));
    if let Some(path) = &a.csv {
        let mut buf = Vec::new();
        sol.write_csv(&mut buf).map_err(|e| e.to_string())?;
        write_atomic(path, &buf).map_err(|e| format!("--csv: {e}"))?;
    }
    if let Some(path) = &a.dump_kernel {
        let kernel = composed_step_kernel(a.n, sigma, &rates).map_err(|e| e.to_string())?;
        let mut buf = Vec::new();
        kernel.write_csv(&mut buf).map_err(|e| e.to_string())?;
        write_atomic(path, &buf).map_err(|e| format!("--dump-kernel: {e}"))?;
    }
    Ok(())
}

fn cmd_drift(a: &DriftArgs) -> CliResult {
    if a.n == 0 {
        return Err("--n: problem size must be positive".into());
    }
    let vars = n_vars(a.n);
    let sigma = sigma_of(&a.sigma, &vars)?;
    let rates = quantity_list("rates", &a.rates, &vars)?;
    let states = match &a.states {
        Some(s) => count_list("states", s)?,
        None => (0..a.n).collect(),
    };
    if !(a.level > 0.0 && a.level < 1.0) {
        return Err(format!("--level: must lie in (0, 1), got {}", a.level));
    }
    let est = estimate_drift(a.n, sigma, &rates, &states, a.samples, a.seed).map_err(|e| e.to_string())?;
    let exact = if a.exact {
        Some(exact_drift(a.n, sigma, &rates, &states).map_err(|e| e.to_string())?)
    } else {
        None
    };
    println!("state,samples,mean,std_error,lower_{}{}", a.level, if a.exact { ",exact" } else { "" });
    for (k, d) in est.iter().enumerate() {
        let tail = exact.as_ref().map_or(String::new(), |x| format!(",{}", sig6(x[k])));
        println!(
            "{},{},{},{},{}{tail}",
            d.state,
            d.samples,
            sig6(d.mean),
            sig6(d.std_error),
            sig6(d.lower_confidence(a.level))
        );
    }
    Ok(())
}

fn cmd_decompose(a: &DecomposeArgs) -> CliResult {
    let vars = n_vars(a.n);
    let sigma = sigma_of(&a.sigma, &vars)?;
    let d = decompose(a.n, sigma).map_err(|e| e.to_string())?;
    let n = a.n as f64;
    println!("n = {}, sigma = {}", a.n, sig6(sigma));
    println!("gamma = {}, G = {}", sig6(d.gamma), sig6(d.g));
    println!("F1 = [{}, {}]", sig6(d.f1_lo), a.n);
    println!("L1 = [0, {}]", sig6(d.l1_hi));
    println!("F2 = [{}, {}]", sig6(n - d.g), a.n);
    println!("A1 = [{}, {})", sig6(n - 2.0 * d.g), sig6(n - d.g));
    println!("A2 = [{}, {})", sig6(n - 3.0 * d.g), sig6(n - 2.0 * d.g));
    println!("L2 = [0, {}]", sig6(4.0 * d.g));
    println!("B1 = ({}, {}]", sig6(4.0 * d.g), sig6(5.0 * d.g));
    println!("B2 = ({}, {}]", sig6(5.0 * d.g), sig6(6.0 * d.g));
    if let Some(list) = &a.classify {
        for m in count_list("classify", list)? {
            if m > a.n {
                return Err(format!("--classify: {m} exceeds n = {}", a.n));
            }
            println!("{m}: {}", d.classify(m));
        }
    }
    Ok(())
}

fn cmd_report(a: &ReportArgs) -> CliResult {
    let aggs = load_aggregates(&a.dir).map_err(|e| e.to_string())?;
    let csv = long_rows_csv(&long_rows(&aggs)).map_err(|e| e.to_string())?;
    let out = a.out.clone().unwrap_or_else(|| a.dir.join("report.csv"));
    write_atomic(&out, &csv).map_err(|e| format!("--out: {e}"))?;
    print!("{}", summary_table(&aggs));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a, cli.verbose),
        Command::Exact(a) => cmd_exact(a),
        Command::Drift(a) => cmd_drift(a),
        Command::Decompose(a) => cmd_decompose(a),
        Command::Report(a) => cmd_report(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
