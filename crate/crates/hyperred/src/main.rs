use clap::{Parser, Subcommand};
use hyperred::cli_io::commands::{self, RankSelection, DEFAULT_MEM_BUDGET};
use hyperred::cli_io::config::{case_kind_from_str, BenchmarkConfig, TrainMode};
use hyperred::cli_io::report::print_json;
use hyperred::cli_io::store;
use hyperred::manifold::CaseKind;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "hyperred",
    about = "Empirical quadrature/cubature rule training with structured data compression",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn parse_case(s: &str) -> Result<CaseKind, String> {
    case_kind_from_str(s).map_err(|e| e.to_string())
}

fn parse_mode(s: &str) -> Result<TrainMode, String> {
    match s {
        "standard" => Ok(TrainMode::Standard),
        "compressed" => Ok(TrainMode::Compressed),
        other => Err(format!("unknown mode `{other}` (standard|compressed)")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the training scenarios, build the POD basis, write snapshots and manifest.
    GenSnapshots {
        /// JSON configuration file; defaults to the built-in benchmark configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for snapshots, basis, and manifest.
        #[arg(long)]
        out: PathBuf,
        /// Recorded in the manifest; the benchmark itself is deterministic.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Build a training dataset from stored snapshots.
    Assemble {
        /// Data directory produced by gen-snapshots.
        #[arg(long)]
        data: PathBuf,
        /// quadrature | cell-general | cell-simplified.
        #[arg(long, default_value = "quadrature", value_parser = parse_case)]
        case: CaseKind,
    },
    /// Compress a stored dataset along the snapshot dimension.
    Compress {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "quadrature", value_parser = parse_case)]
        case: CaseKind,
        /// Retained rank; mutually exclusive with --rel-tol.
        #[arg(long)]
        kthin: Option<usize>,
        /// Relative tail-energy tolerance (default 1e-6 when neither flag is given).
        #[arg(long)]
        rel_tol: Option<f64>,
    },
    /// Train a sparse rule (standard or compressed mode) and write rule + report.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "quadrature", value_parser = parse_case)]
        case: CaseKind,
        /// standard | compressed.
        #[arg(long, default_value = "compressed", value_parser = parse_mode)]
        mode: TrainMode,
        /// Rule cardinality budget.
        #[arg(long)]
        mc: usize,
        #[arg(long)]
        kthin: Option<usize>,
        #[arg(long)]
        rel_tol: Option<f64>,
        /// Early-stop tolerance relative to the right-hand side norm (0 runs the full budget).
        #[arg(long, default_value_t = 0.0)]
        stop_tol: f64,
        /// Memory budget in bytes guarding dense-manifold assembly.
        #[arg(long, default_value_t = DEFAULT_MEM_BUDGET)]
        mem_budget: u64,
    },
    /// Compute the error-bound report for a stored rule.
    Bound {
        #[arg(long)]
        data: PathBuf,
        /// Rule JSON written by `train`.
        #[arg(long)]
        rule: PathBuf,
        #[arg(long)]
        kthin: Option<usize>,
        #[arg(long)]
        rel_tol: Option<f64>,
    },
    /// Evaluate trained rules in the complexity-reduced model against the full model.
    CromEval {
        #[arg(long)]
        data: PathBuf,
        /// Scenario parameter; defaults to the configured test scenario.
        #[arg(long)]
        scenario: Option<f64>,
        /// Rule JSON files (repeatable).
        #[arg(long = "rule", required = true)]
        rules: Vec<PathBuf>,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate training reports into one CSV/JSON table.
    Report {
        /// Output base path; writes <out>.csv and <out>.json.
        #[arg(long)]
        out: PathBuf,
        /// Report files or data directories to scan.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

fn run() -> Result<(), Box<dyn std::error::Error>> {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    match cli.command {
        Command::GenSnapshots { config, out, seed } => {
            let cfg = match config {
                Some(path) => store::read_json::<BenchmarkConfig>(&path)?,
                None => BenchmarkConfig::default(),
            };
            let summary = commands::cmd_gen_snapshots(&cfg, seed, &out)?;
            print_json(&summary, stdout.lock());
        }
        Command::Assemble { data, case } => {
            let summary = commands::cmd_assemble(&data, case)?;
            print_json(&summary, stdout.lock());
        }
        Command::Compress { data, case, kthin, rel_tol } => {
            let selection = RankSelection::from_flags(kthin, rel_tol)?;
            let summary = commands::cmd_compress(&data, case, selection)?;
            print_json(&summary, stdout.lock());
        }
        Command::Train { data, case, mode, mc, kthin, rel_tol, stop_tol, mem_budget } => {
            let selection = RankSelection::from_flags(kthin, rel_tol)?;
            let report =
                commands::cmd_train(&data, case, mode, mc, selection, stop_tol, mem_budget)?;
            print_json(&report, stdout.lock());
        }
        Command::Bound { data, rule, kthin, rel_tol } => {
            let selection = RankSelection::from_flags(kthin, rel_tol)?;
            let report = commands::cmd_bound(&data, &rule, selection)?;
            print_json(&report, stdout.lock());
        }
        Command::CromEval { data, scenario, rules, out } => {
            let summary = commands::cmd_crom_eval(&data, scenario, &rules, &out)?;
            print_json(&summary, stdout.lock());
        }
        Command::Report { out, inputs } => {
            let summary = commands::cmd_report(&inputs, &out)?;
            print_json(&summary, stdout.lock());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
