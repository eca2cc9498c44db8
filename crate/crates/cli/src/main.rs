use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use cellsim_core::catalog::{scale, CacheLevel, Catalog, Node, TechClass, Variant};
use cellsim_core::config::RunConfig;
use cellsim_core::report::{compare_table, ParsedReport, SimReport};
use cellsim_core::sim::{run_sweep, simulate_run, SimOptions};
use cellsim_core::trace::{generate_cores, write_binary, write_text, GenKind, GenParams};
use cellsim_core::units::parse_size;
use clap::{Parser, Subcommand, ValueEnum};

/// Trace-driven simulator for SRAM, gain-cell, eDRAM and STT-RAM cache
/// hierarchies.
#[derive(Parser)]
#[command(name = "cellsim", version, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write its report.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Directory for `<label>.report` and `<label>.csv`.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run several configurations in parallel.
    Sweep {
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write a synthetic trace.
    #[command(arg_required_else_help = true)]
    GenTrace(GenArgs),
    /// Print a level's technology constants scaled between nodes.
    Scale {
        #[arg(long)]
        level: String,
        #[arg(long)]
        tech: String,
        /// Use the hybrid LLC table.
        #[arg(long)]
        hybrid: bool,
        #[arg(long, default_value_t = 28)]
        from: u32,
        #[arg(long)]
        to: u32,
    },
    /// Print the technology catalog in use.
    Catalog,
    /// Ratios of every numeric field of report A over report B.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Include fields that are zero in both reports.
        #[arg(long)]
        all: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Loop,
    Random,
    Stream,
}

#[derive(clap::Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long)]
    out: PathBuf,
    /// Working set, e.g. `12MiB` (loop, random).
    #[arg(long)]
    working_set: Option<String>,
    #[arg(long, default_value_t = 64)]
    stride: u64,
    #[arg(long, default_value_t = 1)]
    iterations: u64,
    /// Records per core (random, stream).
    #[arg(long)]
    count: Option<u64>,
    /// Hot region size (random).
    #[arg(long)]
    hot: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    hot_prob: f64,
    #[arg(long, default_value_t = 0.0)]
    write_ratio: f64,
    #[arg(long, default_value_t = 0)]
    gap: u64,
    /// Attach 64-byte payloads.
    #[arg(long)]
    data: bool,
    #[arg(long, default_value_t = 1)]
    cores: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the binary format.
    #[arg(long)]
    binary: bool,
}

fn size(s: &Option<String>, flag: &str) -> Result<u64> {
    let s = s.as_deref().with_context(|| format!("--{flag} is required for this kind"))?;
    parse_size(s).map_err(|e| anyhow::anyhow!("--{flag}: {e}"))
}

fn gen_trace(a: &GenArgs) -> Result<()> {
    let kind = match a.kind {
        Kind::Loop => GenKind::Loop {
            working_set_bytes: size(&a.working_set, "working-set")?,
            stride: a.stride,
            iterations: a.iterations,
        },
        Kind::Random => GenKind::Random {
            working_set_bytes: size(&a.working_set, "working-set")?,
            count: a.count.context("--count is required for random traces")?,
            hot_bytes: if a.hot.is_some() { size(&a.hot, "hot")? } else { 0 },
            hot_prob: a.hot_prob,
        },
        Kind::Stream => GenKind::Stream {
            count: a.count.context("--count is required for stream traces")?,
            stride: a.stride,
        },
    };
    let params = GenParams { kind, write_ratio: a.write_ratio, gap_cycles: a.gap, data: a.data, seed: a.seed };
    let (header, records) = generate_cores(&params, a.cores)?;
    let out = BufWriter::new(File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?);
    let records = records.map(|r| r.expect("generated records are valid"));
    let n = if a.binary { write_binary(out, &header, records)? } else { write_text(out, &header, records)? };
    eprintln!("wrote {n} records to {}", a.out.display());
    Ok(())
}

fn write_report(report: &SimReport, out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let base = out.join(&report.label);
    fs::write(base.with_extension("report"), report.to_text())?;
    fs::write(base.with_extension("csv"), report.to_csv())?;
    Ok(())
}

fn load(path: &Path, seed: Option<u64>) -> Result<RunConfig> {
    let cfg = RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    Ok(match seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn run(cli: Cli) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Simulate { config, out, seed } => {
            let cfg = load(&config, seed)?;
            let catalog = Catalog::from_env()?;
            let report = simulate_run(&cfg, &catalog, &SimOptions::default())?;
            write_report(&report, &out)?;
            write!(stdout, "{}", report.summary_table())?;
        }
        Command::Sweep { configs, out, seed } => {
            let runs = configs.iter().map(|c| load(c, seed)).collect::<Result<Vec<_>>>()?;
            let catalog = Catalog::from_env()?;
            let mut failed = false;
            for (run, result) in runs.iter().zip(run_sweep(&runs, &catalog, &SimOptions::default())) {
                match result {
                    Ok(r) => {
                        write_report(&r, &out)?;
                        writeln!(stdout, "{}", r.summary_table())?;
                    }
                    Err(e) => {
                        eprintln!("{}: {e}", run.label);
                        failed = true;
                    }
                }
            }
            if failed {
                bail!("some runs failed");
            }
        }
        Command::GenTrace(a) => gen_trace(&a)?,
        Command::Scale { level, tech, hybrid, from, to } => {
            let catalog = Catalog::from_env()?;
            let level: CacheLevel = level.parse()?;
            let tech: TechClass = tech.parse()?;
            let p = if hybrid {
                if level != CacheLevel::Llc {
                    bail!("--hybrid only applies to the LLC");
                }
                catalog.hybrid_params(tech)?
            } else {
                catalog.params(level, tech)?
            };
            let scaled = scale(&p, Node::from_nm(from)?, Node::from_nm(to)?).at_clock(catalog.clock_mhz());
            writeln!(stdout, "# {level} {tech}{} at {to} nm (from {from} nm)", if hybrid { " (hybrid)" } else { "" })?;
            for (k, v) in scaled.fields() {
                writeln!(stdout, "{k} = {v}")?;
            }
        }
        Command::Catalog => {
            let catalog = Catalog::from_env()?;
            writeln!(stdout, "clock_mhz = {}", catalog.clock_mhz())?;
            let d = catalog.dram();
            writeln!(stdout, "dram.latency_cycles = {}", d.latency_cycles(catalog.clock_mhz()))?;
            for (key, p) in catalog.entries() {
                let v = match key.variant {
                    Variant::Plain => "",
                    Variant::Hybrid => " hybrid",
                };
                writeln!(stdout, "[{} {}{}]", key.level, key.tech, v)?;
                for (k, val) in p.fields() {
                    writeln!(stdout, "{k} = {val}")?;
                }
            }
        }
        Command::Compare { a, b, all } => {
            let ra = ParsedReport::parse(&fs::read_to_string(&a).with_context(|| format!("reading {}", a.display()))?)?;
            let rb = ParsedReport::parse(&fs::read_to_string(&b).with_context(|| format!("reading {}", b.display()))?)?;
            stdout.write_all(compare_table(&ra, &rb, !all).as_bytes())?;
        }
    }
    stdout.flush()?;
    Ok(())
}

fn broken_pipe(e: &anyhow::Error) -> bool {
    e.chain()
        .any(|c| c.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
