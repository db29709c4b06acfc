use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use dqczne::circuit::{decompose_toffoli, generate_benchmark};
use dqczne::distribute::{lower, CommScope, LoweringMode};
use dqczne::harness::{
    parse_grid, parse_single, read_csv, run_experiment, summarize, sweep, write_csv_file, write_summary, DEFAULT_TRIM,
};
use dqczne::partition::{build_interaction_graph, cut_edges, modularity, partition_circuit, Assignment};
use dqczne::qasm::{emit_qasm, parse_qasm_bytes};
use dqczne::{Benchmark, Circuit, DjOracle};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "dqczne",
    version,
    about = "Global vs Local zero-noise extrapolation on distributed circuits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and print its metrics record as JSON.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run every point of a config grid and write a CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate a sweep CSV with trimmed means.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
        /// Comma-separated config columns.
        #[arg(long, value_delimiter = ',')]
        group_by: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_TRIM)]
        trim: f64,
    },
    /// Partition a QASM circuit into k parts.
    Partition {
        #[arg(long)]
        qasm: PathBuf,
        #[arg(short)]
        k: usize,
    },
    /// Partition and lower a QASM circuit, printing the lowered QASM.
    Lower {
        #[arg(long)]
        qasm: PathBuf,
        #[arg(short)]
        k: usize,
        #[arg(long, default_value = "roundtrip")]
        mode: String,
        #[arg(long, default_value = "bell_only")]
        comm_scope: String,
    },
    /// Generate a benchmark circuit.
    Gen {
        #[arg(long)]
        alg: Benchmark,
        #[arg(long)]
        n: usize,
        /// DJ oracle: balanced or constant.
        #[arg(long, default_value = "balanced")]
        oracle: String,
        /// Print OpenQASM instead of JSON.
        #[arg(long)]
        qasm: bool,
    },
}

fn load_qasm(path: &PathBuf) -> Result<Circuit> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    match parse_qasm_bytes(&bytes) {
        Ok(c) => Ok(if c.contains_ccx() { decompose_toffoli(&c) } else { c }),
        Err(diags) => {
            for d in &diags {
                eprintln!("{}:{d}", path.display());
            }
            bail!("{} diagnostics in {}", diags.len(), path.display())
        }
    }
}

fn parse_mode(s: &str) -> Result<LoweringMode> {
    Ok(match s {
        "roundtrip" => LoweringMode::Roundtrip,
        "migrate" => LoweringMode::Migrate,
        _ => bail!("unknown mode `{s}` (roundtrip | migrate)"),
    })
}

fn parse_scope(s: &str) -> Result<CommScope> {
    Ok(match s {
        "bell_only" => CommScope::BellOnly,
        "whole_template" => CommScope::WholeTemplate,
        _ => bail!("unknown comm scope `{s}` (bell_only | whole_template)"),
    })
}

fn communities(a: &Assignment) -> Vec<Vec<usize>> {
    let mut parts = vec![Vec::new(); a.k()];
    for (q, &p) in a.as_slice().iter().enumerate() {
        parts[p].push(q);
    }
    parts
}

fn run(cli: Cli) -> Result<()> {
    let mut stdout = io::stdout().lock();
    match cli.command {
        Command::Run { config } => {
            let cfg = parse_single(&fs::read_to_string(&config)?)?;
            let record = run_experiment(&cfg)?;
            writeln!(stdout, "{}", serde_json::to_string(&record)?)?;
        }
        Command::Sweep { config, out } => {
            let grid = parse_grid(&fs::read_to_string(&config)?)?;
            let records = sweep(&grid)?;
            write_csv_file(&records, &out).with_context(|| format!("writing {}", out.display()))?;
            let skipped = records.iter().filter(|r| r.is_skipped()).count();
            eprintln!("{} points, {} skipped for capacity", records.len(), skipped);
        }
        Command::Summarize { input, group_by, trim } => {
            let records = read_csv(fs::File::open(&input).with_context(|| format!("opening {}", input.display()))?)?;
            let rows = summarize(&records, &group_by, trim)?;
            write_summary(&rows, &group_by, &mut stdout)?;
        }
        Command::Partition { qasm, k } => {
            let c = load_qasm(&qasm)?;
            let a = partition_circuit(&c, k)?;
            let g = build_interaction_graph(&c)?;
            let q = modularity(&g, &communities(&a)).ok();
            let line = json!({
                "k": a.k(),
                "part_of": a.as_slice(),
                "sizes": a.sizes(),
                "cut_count": cut_edges(&c, &a),
                "modularity": q,
            });
            writeln!(stdout, "{line}")?;
        }
        Command::Lower {
            qasm,
            k,
            mode,
            comm_scope,
        } => {
            let c = load_qasm(&qasm)?;
            let a = partition_circuit(&c, k)?;
            let d = lower(&c, &a, parse_mode(&mode)?, parse_scope(&comm_scope)?)?;
            write!(stdout, "{}", emit_qasm(&d.circuit))?;
        }
        Command::Gen { alg, n, oracle, qasm } => {
            let oracle = match oracle.as_str() {
                "balanced" => DjOracle::Balanced,
                "constant" => DjOracle::Constant,
                _ => bail!("unknown oracle `{oracle}` (balanced | constant)"),
            };
            let c = generate_benchmark(alg, n, oracle)?;
            if qasm {
                write!(stdout, "{}", emit_qasm(&c))?;
            } else {
                let gates: Vec<String> = c.gates().iter().map(ToString::to_string).collect();
                let line = json!({
                    "algorithm": alg.name(),
                    "n": n,
                    "num_qubits": c.num_qubits(),
                    "num_clbits": c.num_clbits(),
                    "data_qubits": c.data_qubits(),
                    "depth": c.depth(),
                    "gates": gates,
                });
                writeln!(stdout, "{line}")?;
            }
        }
    }
    Ok(())
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
