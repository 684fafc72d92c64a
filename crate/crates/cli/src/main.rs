//! Command-line front end: analytic evaluation, single-scenario simulation,
//! parameter sweeps, and figure-dataset reproduction.

use std::env;
use std::fs;
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::process;

use clap::{ArgAction, Args, Parser, Subcommand};

use lrfhss_rep::experiment::{run_sweep, SweepSpec};
use lrfhss_rep::frame::ScenarioConfig;
use lrfhss_rep::report;
use lrfhss_rep::sim::run_monte_carlo;
use lrfhss_rep::{analytic, Error, Figure, Scenario};

/// Environment variable that caps the worker-thread count for sweeps and
/// Monte Carlo runs. Unset means one thread per core.
const THREADS_VAR: &str = "LRFHSS_REP_THREADS";

#[derive(Parser)]
#[command(
    name = "lrfhss-rep",
    version,
    about = "LR-FHSS uplink message-replication analysis and simulation",
    after_help = "Scenario flags override values from --config. Durations are \
                  given in milliseconds on the command line and stored as \
                  seconds in JSON configs. Set LRFHSS_REP_THREADS to cap \
                  parallelism."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Print progress details to stderr.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the closed-form delivery model for one scenario.
    Analytic {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Estimate delivery by Monte Carlo and print it next to the analysis.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Simulation runs.
        #[arg(long, default_value_t = 10_000)]
        runs: u64,
        /// Base seed; runs use substreams derived from it.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the sweep described by a JSON spec and write CSV.
    Sweep {
        /// Sweep spec (JSON). `{}` selects the standard comparison sweep.
        #[arg(long)]
        config: PathBuf,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override simulation runs per point; 0 disables simulation.
        #[arg(long)]
        runs: Option<u64>,
    },
    /// Rebuild a figure dataset from the built-in parameter profile.
    Reproduce {
        /// One of: fig2a, fig2b, fig3, fig4, fig5a, fig5b.
        #[arg(long)]
        figure: String,
        /// Output directory for the series files and records CSV.
        #[arg(long)]
        out: PathBuf,
        /// Monte Carlo runs per point; 0 keeps the dataset analytic-only.
        #[arg(long, default_value_t = 0)]
        runs: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Scenario parameters; every flag has a JSON-config equivalent.
#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file (JSON) supplying defaults for the other flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Data rate: 8 or 9.
    #[arg(long)]
    dr: Option<u8>,
    /// Replication scheme: none, frame, or fragment.
    #[arg(long)]
    scheme: Option<String>,
    /// Replica count r.
    #[arg(long)]
    r: Option<u32>,
    /// Number of nodes in the network.
    #[arg(long)]
    nodes: Option<u64>,
    /// Messages per node per hour.
    #[arg(long)]
    lambda_per_hour: Option<f64>,
    /// Observation interval in seconds.
    #[arg(long)]
    interval_s: Option<f64>,
    /// Application payload size in bytes.
    #[arg(long)]
    payload_bytes: Option<u32>,
    /// Transmit power in dBm.
    #[arg(long)]
    power_dbm: Option<f64>,
    /// Header replica duration in milliseconds.
    #[arg(long)]
    delta_h_ms: Option<f64>,
    /// Payload fragment duration in milliseconds.
    #[arg(long)]
    delta_p_ms: Option<f64>,
    /// Header processing wait in milliseconds.
    #[arg(long)]
    delta_w_ms: Option<f64>,
}

struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }
}

/// Invalid parameter values are usage errors (exit 2); failures while doing
/// the work are runtime errors (exit 1).
fn classify(error: Error) -> CliError {
    match error {
        Error::UnsupportedDataRate(_)
        | Error::UnknownScheme(_)
        | Error::InvalidArgument(_)
        | Error::Config(_) => CliError::usage(error.to_string()),
        other => CliError::runtime(other.to_string()),
    }
}

impl ScenarioArgs {
    fn build(&self) -> Result<(ScenarioConfig, Scenario), CliError> {
        let mut config = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    CliError::usage(format!("cannot read config {}: {e}", path.display()))
                })?;
                ScenarioConfig::from_json(&text).map_err(classify)?
            }
            None => ScenarioConfig::default(),
        };
        if let Some(dr) = self.dr {
            config.dr = dr;
        }
        if let Some(scheme) = &self.scheme {
            config.scheme = scheme.clone();
        }
        if let Some(r) = self.r {
            config.r = r;
        }
        if let Some(nodes) = self.nodes {
            config.nodes = nodes;
        }
        if let Some(lambda) = self.lambda_per_hour {
            config.lambda_per_hour = lambda;
        }
        if let Some(interval) = self.interval_s {
            config.interval_s = interval;
        }
        if let Some(payload) = self.payload_bytes {
            config.payload_bytes = payload;
        }
        if let Some(power) = self.power_dbm {
            config.power_dbm = power;
        }
        if let Some(ms) = self.delta_h_ms {
            config.delta_h_s = ms / 1000.0;
        }
        if let Some(ms) = self.delta_p_ms {
            config.delta_p_s = ms / 1000.0;
        }
        if let Some(ms) = self.delta_w_ms {
            config.delta_w_s = ms / 1000.0;
        }
        let scenario = config.to_scenario().map_err(classify)?;
        Ok((config, scenario))
    }
}

fn describe(config: &ScenarioConfig) -> String {
    format!(
        "DR{} {} r={}  N={}  lambda={}/h  B={} bytes  {} dBm",
        config.dr,
        config.scheme,
        config.r,
        config.nodes,
        config.lambda_per_hour,
        config.payload_bytes,
        config.power_dbm
    )
}

fn cmd_analytic(args: &ScenarioArgs) -> Result<(), CliError> {
    let (config, scenario) = args.build()?;
    let report = analytic::delivery_report(&scenario);
    println!("scenario : {}", describe(&config));
    println!("S_H      = {:.9}", report.s_h);
    println!("xi_P     = {:.9}", report.xi_p);
    println!("S_P      = {:.9}", report.s_p);
    println!("S        = {:.9}", report.s);
    println!("MDP      = {:.9}", report.mdp);
    println!("EE       = {:.6} messages/J", report.ee);
    println!("ToA_M    = {:.6} s", report.toa_m);
    Ok(())
}

fn cmd_simulate(args: &ScenarioArgs, runs: u64, seed: u64) -> Result<(), CliError> {
    let (config, scenario) = args.build()?;
    let report = analytic::delivery_report(&scenario);
    let estimate = run_monte_carlo(&scenario, runs, seed).map_err(classify)?;
    println!("scenario     : {}", describe(&config));
    println!("analytic MDP = {:.9}", report.mdp);
    println!(
        "simulated    = {:.9}  (95% CI {:.6}..{:.6})",
        estimate.mdp_hat, estimate.ci_low, estimate.ci_high
    );
    println!(
        "runs         = {}  successes = {}  seed = {}",
        estimate.runs, estimate.successes, estimate.seed
    );
    Ok(())
}

fn cmd_sweep(
    config: &Path,
    out: Option<&PathBuf>,
    seed: Option<u64>,
    runs: Option<u64>,
    verbose: u8,
) -> Result<(), CliError> {
    let text = fs::read_to_string(config)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", config.display())))?;
    let mut spec = SweepSpec::from_json(&text).map_err(classify)?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    if let Some(runs) = runs {
        spec.simulate = runs > 0;
        if runs > 0 {
            spec.runs_per_point = runs;
        }
    }
    if verbose > 0 {
        let points = spec.dr_list.len() * spec.scheme_r_list.len() * spec.node_counts.len();
        eprintln!(
            "sweep: {points} points, simulate={}, runs/point={}",
            spec.simulate, spec.runs_per_point
        );
    }
    let records = run_sweep(&spec).map_err(classify)?;
    let rows = match out {
        Some(path) => {
            let file = fs::File::create(path)
                .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", path.display())))?;
            report::write_csv(&records, BufWriter::new(file)).map_err(classify)?
        }
        None => report::write_csv(&records, io::stdout().lock()).map_err(classify)?,
    };
    if verbose > 0 {
        eprintln!("sweep: wrote {rows} rows");
    }
    Ok(())
}

fn cmd_reproduce(
    figure: &str,
    out: &Path,
    runs: u64,
    seed: u64,
    verbose: u8,
) -> Result<(), CliError> {
    let figure: Figure = figure.parse().map_err(classify)?;
    if verbose > 0 {
        eprintln!(
            "reproduce: {figure} at lambda={}/h, runs/point={runs}",
            figure.lambda_per_hour()
        );
    }
    let output = report::reproduce(figure, out, runs, seed).map_err(classify)?;
    println!("{}", output.csv.display());
    for path in &output.series {
        println!("{}", path.display());
    }
    Ok(())
}

fn configure_threads() {
    if let Ok(value) = env::var(THREADS_VAR) {
        match value.parse::<usize>() {
            Ok(threads) if threads > 0 => {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
            _ => eprintln!("warning: ignoring {THREADS_VAR}={value}: not a positive integer"),
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Analytic { scenario } => cmd_analytic(scenario),
        Command::Simulate {
            scenario,
            runs,
            seed,
        } => cmd_simulate(scenario, *runs, *seed),
        Command::Sweep {
            config,
            out,
            seed,
            runs,
        } => cmd_sweep(config, out.as_ref(), *seed, *runs, cli.verbose),
        Command::Reproduce {
            figure,
            out,
            runs,
            seed,
        } => cmd_reproduce(figure, out, *runs, *seed, cli.verbose),
    }
}

fn main() {
    // Die quietly when a downstream pipe closes (`lrfhss-rep sweep | head`)
    // instead of panicking on EPIPE.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    configure_threads();
    if let Err(error) = run(&cli) {
        eprintln!("error: {}", error.message);
        process::exit(error.code);
    }
}
