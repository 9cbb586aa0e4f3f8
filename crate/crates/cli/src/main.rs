//! `keyfold`: run key-agreement scenarios over a lossy broadcast channel,
//! exercise the block codec by hand, and benchmark key-computation cost
//! across group sizes.
//!
//! Exit codes: 0 success / full convergence; 1 usage or configuration
//! error; 2 scenario ran but some delivery failed; 3 decode declared the
//! word unrecoverable.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use keyfold_cli::bench::{default_sizes, run_bench};
use keyfold_cli::config::load_scenario;
use keyfold_cli::{bits_to_string, load_matrix, parse_bits, report_dir, write_report};
use keyfold_core::channel::{transmit_bits, ChannelModel};
use keyfold_core::ldpc::{build_stopping_set, Codeword, ParityCheckMatrix, TannerGraph};
use keyfold_core::sim::run_scenario;

#[derive(Parser)]
#[command(name = "keyfold", version, about = "Group key agreement with coded rekey broadcasts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write text + CSV reports.
    Sim {
        /// Scenario TOML file.
        config: PathBuf,
        /// Report directory (defaults to $KEYFOLD_REPORT_DIR, then `.`).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Encode, decode or round-trip words of the block code.
    Ldpc {
        #[command(subcommand)]
        command: LdpcCommand,
    },
    /// Benchmark per-member key computation across group sizes.
    Bench {
        /// Comma-separated group sizes.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// CSV output path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct MatrixArgs {
    /// Matrix file (dense or .alist), or `builtin-8x16`.
    #[arg(long)]
    matrix: String,
    /// Bit node degree bound for the encoding schedule.
    #[arg(long, default_value_t = 3)]
    max_degree: usize,
}

#[derive(Subcommand)]
enum LdpcCommand {
    /// Encode info bits; prints the wire-order codeword.
    Encode {
        #[command(flatten)]
        matrix: MatrixArgs,
        /// Info bits as a 0/1 string.
        #[arg(long)]
        bits: String,
    },
    /// Decode a wire-order word; prints recovered info bits and trials.
    Decode {
        #[command(flatten)]
        matrix: MatrixArgs,
        /// Received word in wire order, as a 0/1 string.
        #[arg(long)]
        bits: String,
    },
    /// Encode, corrupt, decode; reports whether the info survived.
    Roundtrip {
        #[command(flatten)]
        matrix: MatrixArgs,
        /// Info bits as a 0/1 string.
        #[arg(long)]
        bits: String,
        /// Wire positions to flip, comma-separated.
        #[arg(long, value_delimiter = ',')]
        flip: Vec<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Sim { config, out_dir } => cmd_sim(&config, out_dir.as_deref()),
        Command::Ldpc { command } => match command {
            LdpcCommand::Encode { matrix, bits } => cmd_encode(&matrix, &bits),
            LdpcCommand::Decode { matrix, bits } => cmd_decode(&matrix, &bits),
            LdpcCommand::Roundtrip { matrix, bits, flip } => cmd_roundtrip(&matrix, &bits, &flip),
        },
        Command::Bench { sizes, seed, out } => cmd_bench(&sizes, seed, out.as_deref()),
    }
}

fn cmd_sim(config_path: &std::path::Path, out_dir: Option<&std::path::Path>) -> Result<ExitCode> {
    let config = load_scenario(config_path)?;
    let report = run_scenario(&config).map_err(|e| anyhow::anyhow!("scenario failed: {e}"))?;
    let dir = report_dir(out_dir);
    let (text_path, csv_path) = write_report(&report, config_path, &dir)?;
    print!("{}", report.render_text());
    println!("reports: {} {}", text_path.display(), csv_path.display());
    if report.any_failures() || !report.all_converged() {
        Ok(ExitCode::from(2))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

fn schedule_for(
    args: &MatrixArgs,
) -> Result<(ParityCheckMatrix, keyfold_core::ldpc::EncodingStoppingSet)> {
    let matrix = load_matrix(&args.matrix)?;
    let graph = TannerGraph::from_matrix(&matrix);
    let schedule = build_stopping_set(&graph, args.max_degree)
        .map_err(|e| anyhow::anyhow!("{e} (try raising --max-degree)"))?;
    Ok((matrix, schedule))
}

fn cmd_encode(args: &MatrixArgs, bits: &str) -> Result<ExitCode> {
    let (_, schedule) = schedule_for(args)?;
    let info = parse_bits(bits)?;
    let word = schedule
        .encode(&info)
        .map_err(|e| anyhow::anyhow!("encode: {e}"))?;
    println!("{}", bits_to_string(&word.wire_bits));
    Ok(ExitCode::SUCCESS)
}

fn cmd_decode(args: &MatrixArgs, bits: &str) -> Result<ExitCode> {
    let (matrix, schedule) = schedule_for(args)?;
    let wire = parse_bits(bits)?;
    let received = Codeword::from_wire_bits(&schedule, wire)
        .map_err(|e| anyhow::anyhow!("received word: {e}"))?;
    match schedule.decode(&received) {
        Ok(outcome) => {
            println!(
                "info={} trials={}",
                bits_to_string(&outcome.info),
                outcome.trials
            );
            Ok(ExitCode::SUCCESS)
        }
        Err(failure) => {
            let syndrome = matrix
                .syndrome(&received.bits)
                .context("syndrome of received word")?;
            println!(
                "UNRECOVERABLE trials={} syndrome={}",
                failure.trials,
                bits_to_string(&syndrome)
            );
            Ok(ExitCode::from(3))
        }
    }
}

fn cmd_roundtrip(args: &MatrixArgs, bits: &str, flips: &[usize]) -> Result<ExitCode> {
    let (matrix, schedule) = schedule_for(args)?;
    let info = parse_bits(bits)?;
    let word = schedule
        .encode(&info)
        .map_err(|e| anyhow::anyhow!("encode: {e}"))?;
    let model = ChannelModel::Explicit {
        positions: flips.to_vec(),
    };
    let (wire, flipped) = transmit_bits(&word.wire_bits, &model)
        .map_err(|e| anyhow::anyhow!("channel: {e}"))?;
    let received = Codeword::from_wire_bits(&schedule, wire).expect("length preserved");
    println!(
        "sent={} flipped={flipped:?} received={}",
        bits_to_string(&word.wire_bits),
        bits_to_string(&received.wire_bits)
    );
    match schedule.decode(&received) {
        Ok(outcome) if outcome.info == info => {
            println!(
                "recovered={} trials={} ok",
                bits_to_string(&outcome.info),
                outcome.trials
            );
            Ok(ExitCode::SUCCESS)
        }
        Ok(outcome) => {
            println!(
                "MISCORRECTED recovered={} trials={}",
                bits_to_string(&outcome.info),
                outcome.trials
            );
            Ok(ExitCode::from(3))
        }
        Err(failure) => {
            let syndrome = matrix.syndrome(&received.bits)?;
            println!(
                "UNRECOVERABLE trials={} syndrome={}",
                failure.trials,
                bits_to_string(&syndrome)
            );
            Ok(ExitCode::from(3))
        }
    }
}

fn cmd_bench(sizes: &[usize], seed: u64, out: Option<&std::path::Path>) -> Result<ExitCode> {
    let sizes = if sizes.is_empty() {
        default_sizes()
    } else {
        sizes.to_vec()
    };
    let report = run_bench(&sizes, seed)?;
    let csv = report.render_csv();
    match out {
        Some(path) => {
            std::fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    println!("note: fold times are hardware-dependent; the portable cost measure is the exponentiation count");
    Ok(ExitCode::SUCCESS)
}
