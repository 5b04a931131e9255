use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use trimmed_l1::driver::{check_integrality, estimate_ltad, heuristic_ltad, EstimationResult};
use trimmed_l1::io::{ingest_csv, parse_coverage, Settings};
use trimmed_l1::model::{ltad_objective, DataMatrix};
use trimmed_l1::oracle::{binomial, oracle_minlp};
use trimmed_l1::sim::{run_scenario, EstimatorSpec, RunOptions, ScenarioSpec};
use trimmed_l1::tables::{format_sig6, run_table_suite, SuiteOptions, DEFAULT_REPLICATIONS};
use trimmed_l1::Error;

const THREADS_ENV: &str = "TRIMMED_L1_THREADS";

#[derive(Parser)]
#[command(name = "trimmed-l1", version, about = "Trimmed L1 (LTAD) location estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the location of a CSV dataset.
    Estimate(EstimateArgs),
    /// Run one seeded contamination scenario and report MSE per estimator.
    Simulate(SimulateArgs),
    /// Compare the LP pipeline against exhaustive enumeration.
    OracleCheck(OracleArgs),
    /// Run the full simulation grid and write CSV tables.
    Tables(TablesArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Lp,
    Heuristic,
    Oracle,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct Common {
    /// Config override `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    input: PathBuf,
    /// Coverage: a count (`25`) or a fraction of n (`0.5`).
    #[arg(long, default_value = "0.5")]
    h: String,
    #[arg(long, value_enum, default_value = "lp")]
    method: Method,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Scale columns by their MAD before solving.
    #[arg(long)]
    standardize: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// none, strong or intermediate.
    #[arg(long, default_value = "strong")]
    kind: String,
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    /// Default coverage fraction for estimators without `@fraction`.
    #[arg(long, default_value_t = 0.5)]
    h: f64,
    #[arg(long, default_value_t = DEFAULT_REPLICATIONS)]
    replications: usize,
    /// Comma-separated, e.g. `lp-ltad@0.2,heuristic@0.5,mean`.
    #[arg(long, default_value = "lp-ltad,lp-ltad-shift,heuristic,mean")]
    estimators: String,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "0.5")]
    h: String,
    #[arg(long)]
    standardize: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct TablesArgs {
    #[arg(long, default_value = "tables")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = DEFAULT_REPLICATIONS)]
    replications: usize,
    /// Run only these groups (repeatable), e.g. `efficiency_clean_n100`.
    #[arg(long)]
    only: Vec<String>,
    #[command(flatten)]
    common: Common,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::OracleSizeGuard { .. } => 3,
        _ => 2,
    }
}

fn settings(common: &Common, standardize: bool) -> Result<Settings, Error> {
    let mut s = Settings::default();
    s.heuristic.seed = common.seed;
    s.apply_all(common.overrides.iter().map(String::as_str))?;
    if standardize {
        s.driver.standardize = true;
    }
    Ok(s)
}

#[derive(Serialize)]
struct Location {
    refit: Vec<f64>,
    shift: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct EstimateOutput {
    method: &'static str,
    h: usize,
    m: Location,
    selection: Vec<usize>,
    objective: f64,
    converged: bool,
    integrality_gap: f64,
    iterations: u64,
}

fn from_driver(method: &'static str, h: usize, r: EstimationResult, shift: bool) -> EstimateOutput {
    EstimateOutput {
        method,
        h,
        m: Location {
            refit: r.estimate.m,
            shift: shift.then_some(r.shift_estimate),
        },
        selection: r.selection.one_based(),
        objective: r.estimate.objective,
        converged: r.converged,
        integrality_gap: r.integrality_gap,
        iterations: r.outer_iterations as u64,
    }
}

fn run_estimate(args: &EstimateArgs) -> Result<String, Error> {
    let s = settings(&args.common, args.standardize)?;
    let x = ingest_csv(&args.input)?;
    let h = parse_coverage(&args.h)?.resolve(x.n())?;
    let out = match args.method {
        Method::Lp => from_driver("lp", h, estimate_ltad(&x, h, &s.driver)?, true),
        Method::Heuristic => from_driver("heuristic", h, heuristic_ltad(&x, h, &s.heuristic)?, false),
        Method::Oracle => {
            let r = oracle_minlp(&x, h)?;
            EstimateOutput {
                method: "oracle",
                h,
                m: Location {
                    refit: r.m,
                    shift: None,
                },
                selection: r.selection.one_based(),
                objective: r.objective,
                converged: true,
                integrality_gap: 0.0,
                iterations: binomial(x.n(), h),
            }
        }
    };
    Ok(match args.format {
        Format::Json => serde_json::to_string_pretty(&out)? + "\n",
        Format::Csv => estimate_csv(&out),
    })
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

fn estimate_csv(o: &EstimateOutput) -> String {
    let sel = o.selection.iter().map(usize::to_string).collect::<Vec<_>>().join(";");
    format!(
        "method,h,m_refit,m_shift,selection,objective,converged,integrality_gap,iterations\n{},{},{},{},{},{},{},{},{}\n",
        o.method,
        o.h,
        join(&o.m.refit),
        o.m.shift.as_deref().map(join).unwrap_or_default(),
        sel,
        o.objective,
        o.converged,
        o.integrality_gap,
        o.iterations
    )
}

fn run_simulate(args: &SimulateArgs) -> Result<String, Error> {
    let s = settings(&args.common, false)?;
    let spec = ScenarioSpec {
        n: args.n,
        p: args.p,
        contamination_fraction: args.epsilon,
        contamination_kind: args.kind.parse()?,
        correlation_rho: args.rho,
        coverage_fraction: args.h,
        replications: args.replications,
        seed: args.common.seed,
    };
    let estimators = args
        .estimators
        .split(',')
        .map(str::parse)
        .collect::<Result<Vec<EstimatorSpec>, _>>()?;
    let opts = RunOptions {
        driver: s.driver,
        heuristic_restarts: s.heuristic.restarts,
        heuristic_max_steps: s.heuristic.max_steps,
    };
    let report = run_scenario(&spec, &estimators, &opts)?;
    Ok(match args.format {
        Format::Json => {
            let mse: serde_json::Map<String, serde_json::Value> = report
                .estimator_order
                .iter()
                .map(|l| (l.clone(), json!(report.mse(l))))
                .collect();
            serde_json::to_string_pretty(&json!({
                "scenario": report.scenario,
                "replications": report.replications,
                "mse": mse,
            }))? + "\n"
        }
        Format::Csv => {
            let mut out = String::from("estimator,MSE\n");
            for l in &report.estimator_order {
                let v = report.mse(l).map(format_sig6).unwrap_or_default();
                out.push_str(&format!("{l},{v}\n"));
            }
            out
        }
    })
}

fn run_oracle_check(args: &OracleArgs) -> Result<String, Error> {
    let s = settings(&args.common, args.standardize)?;
    let x: DataMatrix = ingest_csv(&args.input)?;
    let h = parse_coverage(&args.h)?.resolve(x.n())?;
    let oracle = oracle_minlp(&x, h)?;
    let lp = estimate_ltad(&x, h, &s.driver)?;
    let lp_objective = ltad_objective(&x, &lp.selection, &lp.estimate.m)?;
    let ratio = if oracle.objective > 0.0 {
        lp_objective / oracle.objective
    } else if lp_objective == 0.0 {
        1.0
    } else {
        f64::INFINITY
    };
    Ok(serde_json::to_string_pretty(&json!({
        "h": h,
        "oracle": { "objective": oracle.objective, "m": oracle.m, "selection": oracle.selection.one_based() },
        "lp": {
            "objective": lp_objective,
            "m": lp.estimate.m,
            "selection": lp.selection.one_based(),
            "converged": lp.converged,
            "integrality_gap": lp.integrality_gap,
            "integral_at_convergence": check_integrality(&lp, 1e-2),
        },
        "ratio": ratio,
    }))? + "\n")
}

fn run_tables(args: &TablesArgs) -> Result<String, Error> {
    let s = settings(&args.common, false)?;
    let opts = SuiteOptions {
        seed: args.common.seed,
        replications: args.replications,
        run: RunOptions {
            driver: s.driver,
            heuristic_restarts: s.heuristic.restarts,
            heuristic_max_steps: s.heuristic.max_steps,
        },
        only: (!args.only.is_empty()).then(|| args.only.clone()),
    };
    let out = run_table_suite(&args.out_dir, &opts)?;
    let mut listing = String::new();
    for f in out.files().iter().chain([&out.manifest]) {
        listing.push_str(&f.display().to_string());
        listing.push('\n');
    }
    Ok(listing)
}

fn configure_threads() -> Result<(), Error> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Error::InvalidConfig(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::InvalidConfig(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Estimate(a) => run_estimate(a),
        Command::Simulate(a) => run_simulate(a),
        Command::OracleCheck(a) => run_oracle_check(a),
        Command::Tables(a) => run_tables(a),
    });
    match result {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(out.as_bytes()).and_then(|()| stdout.flush()).is_err() {
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
