//! `bhs`: run, sweep, fuzz, enumerate, verify and render black hole search
//! simulations. Exits with 0 when no violation was found, 1 when one was,
//! and 2 on bad input.

use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bhs_core::config::{format_schedule, parse_range, RunConfig, SweepConfig};
use bhs_core::diagram::{render_svg, render_text_pages, DEFAULT_PAGE_ROWS};
use bhs_core::harness::{self, SweepSummary};
use bhs_core::kernel::Trace;
use bhs_core::model_check::check_all;
use bhs_core::protocols::{Protocol, Reading};
use bhs_core::verifier::{verify, Verdict, DEFAULT_BOUND_FACTOR};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bhs", version, about = "Black hole search on a dynamic ring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one configuration and verify its trace.
    Run {
        /// Run config (flat TOML); defaults apply to missing keys.
        config: Option<PathBuf>,
        /// Override a config key, e.g. `--set n=12`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        verdict: Option<PathBuf>,
        /// Write a config that replays this run's edge schedule.
        #[arg(long)]
        export_schedule: Option<PathBuf>,
    },
    /// Run a parameter grid in parallel.
    Sweep {
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        /// Write every failing cell as one JSON line.
        #[arg(long)]
        failures: Option<PathBuf>,
    },
    /// Random instances against random and periodic adversaries.
    Fuzz {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        count: u64,
        #[arg(long, default_value_t = 4)]
        n_min: usize,
        #[arg(long, default_value_t = 16)]
        n_max: usize,
        #[arg(long, default_value = "gather_and_locate")]
        protocol: Protocol,
        #[arg(long)]
        failures: Option<PathBuf>,
    },
    /// Every adversary schedule up to a depth, with state deduplication.
    Enumerate {
        /// Ring sizes, e.g. `4,5` or `4..6`.
        #[arg(long, default_value = "4,5")]
        ns: String,
        #[arg(long, default_value_t = 10)]
        depth: usize,
        #[arg(long, default_value = "gather_and_locate")]
        protocol: Protocol,
        #[arg(long, default_value = "role_assignment")]
        reference: Reading,
    },
    /// Check a recorded trace.
    Verify {
        trace: PathBuf,
        /// Defaults to the horizon in the trace header.
        #[arg(long)]
        horizon: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_BOUND_FACTOR)]
        bound_factor: u64,
        #[arg(long)]
        verdict: Option<PathBuf>,
    },
    /// Draw a space-time diagram of a trace.
    Render {
        trace: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long, default_value_t = DEFAULT_PAGE_ROWS)]
        page_rows: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Svg,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_run_config(path: Option<&Path>, sets: &[String]) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::from_toml(
            &fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        )?,
        None => RunConfig::default(),
    };
    for s in sets {
        cfg.set(s)?;
    }
    Ok(cfg)
}

fn write_verdict(path: &Path, v: &Verdict) -> Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    writeln!(f, "{}", serde_json::to_string(v)?)?;
    Ok(())
}

fn print_verdict(v: &Verdict) {
    let s = &v.stats;
    println!(
        "solved={} rounds={} moves={} first_correct_termination={} deaths={} terminations={}",
        v.solved,
        s.rounds,
        s.total_moves,
        s.first_correct_termination
            .map_or("none".to_string(), |r| r.to_string()),
        s.deaths,
        s.terminations
    );
    for x in &v.violations {
        println!(
            "violation {} at round {}: {}",
            x.invariant, x.round, x.details
        );
    }
}

fn read_trace(path: &Path) -> Result<Trace> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(Trace::read_jsonl(BufReader::new(f))?)
}

fn report_summary(s: &SweepSummary, failures: Option<&Path>) -> Result<bool> {
    println!(
        "runs={} solved={} failures={} max_rounds={} max_moves={}",
        s.runs,
        s.solved,
        s.failures.len(),
        s.max_rounds,
        s.max_moves
    );
    for f in s.failures.iter().take(10) {
        println!(
            "  n={} bh={} starts={:?} adversary={}: {}",
            f.spec.ring.n(),
            f.spec.ring.bh_index(),
            f.spec.starts,
            f.spec.adversary,
            f.error.clone().unwrap_or_else(|| f.violations.join("; "))
        );
    }
    if let Some(p) = failures {
        let mut out = fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
        for f in &s.failures {
            writeln!(out, "{}", serde_json::to_string(f)?)?;
        }
    }
    Ok(s.clean())
}

fn execute(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Run {
            config,
            sets,
            trace,
            verdict,
            export_schedule,
        } => {
            let cfg = load_run_config(config.as_deref(), &sets)?;
            let spec = cfg.resolve()?;
            let out = harness::run(&spec)?;
            let trace_out = trace.or_else(|| non_empty(&cfg.trace_out));
            let verdict_out = verdict.or_else(|| non_empty(&cfg.verdict_out));
            if let Some(p) = trace_out {
                let f =
                    fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?;
                out.trace.write_jsonl(io::BufWriter::new(f))?;
            }
            if let Some(p) = verdict_out {
                write_verdict(&p, &out.verdict)?;
            }
            if let Some(p) = export_schedule {
                let mut replay = cfg.clone();
                replay.adversary = "schedule".into();
                replay.schedule = format_schedule(&out.trace.missing_edges());
                replay.horizon = spec.horizon;
                replay.trace_out.clear();
                replay.verdict_out.clear();
                fs::write(&p, replay.to_toml())?;
            }
            print_verdict(&out.verdict);
            Ok(out.verdict.is_clean())
        }
        Command::Sweep {
            config,
            sets,
            failures,
        } => {
            let mut cfg = match &config {
                Some(p) => SweepConfig::from_toml(&fs::read_to_string(p)?)?,
                None => SweepConfig::default(),
            };
            for s in &sets {
                let (k, v) = s.split_once('=').context("expected KEY=VALUE")?;
                let mut table: bhs_core::config::SweepConfig = cfg.clone();
                apply_sweep_key(&mut table, k.trim(), v.trim())?;
                cfg = table;
            }
            let summary = harness::sweep(&cfg)?;
            report_summary(&summary, failures.as_deref())
        }
        Command::Fuzz {
            seed,
            count,
            n_min,
            n_max,
            protocol,
            failures,
        } => {
            if n_min < 4 || n_max < n_min {
                bail!("need 4 <= n_min <= n_max");
            }
            let summary = harness::fuzz(seed, count, (n_min, n_max), protocol);
            report_summary(&summary, failures.as_deref())
        }
        Command::Enumerate {
            ns,
            depth,
            protocol,
            reference,
        } => {
            let ns: Vec<usize> = parse_range("ns", &ns)?
                .into_iter()
                .map(|n| n as usize)
                .collect();
            if ns.iter().any(|&n| n < 4) {
                bail!("ring sizes start at 4");
            }
            let r = check_all(&ns, protocol, reference, depth);
            println!(
                "instances={} distinct_states={} raw_schedules={} counterexamples={}",
                r.instances,
                r.states,
                r.raw_paths,
                r.counterexamples.len()
            );
            for l in &r.levels {
                println!(
                    "  depth {:>2}: raw {:>14} distinct {:>10}",
                    l.depth, l.raw, l.distinct
                );
            }
            for c in r.counterexamples.iter().take(10) {
                println!(
                    "  n={} bh={} starts={:?} schedule={}: {}",
                    c.n, c.bh_index, c.starts, c.schedule, c.problem
                );
            }
            Ok(r.counterexamples.is_empty())
        }
        Command::Verify {
            trace,
            horizon,
            bound_factor,
            verdict,
        } => {
            let t = read_trace(&trace)?;
            let v = verify(&t, horizon.unwrap_or(t.header.horizon), bound_factor);
            if let Some(p) = verdict {
                write_verdict(&p, &v)?;
            }
            print_verdict(&v);
            Ok(v.is_clean())
        }
        Command::Render {
            trace,
            format,
            page_rows,
            out,
        } => {
            let t = read_trace(&trace)?;
            let doc = match format {
                Format::Text => render_text_pages(&t, page_rows).join("\n"),
                Format::Svg => render_svg(&t),
            };
            match out {
                Some(p) => {
                    fs::write(&p, doc).with_context(|| format!("writing {}", p.display()))?
                }
                None => print!("{doc}"),
            }
            Ok(true)
        }
    }
}

fn non_empty(s: &str) -> Option<PathBuf> {
    (!s.is_empty()).then(|| PathBuf::from(s))
}

fn apply_sweep_key(cfg: &mut SweepConfig, k: &str, v: &str) -> Result<()> {
    let parse_u64 = |v: &str| {
        v.parse::<u64>()
            .with_context(|| format!("bad value for {k}"))
    };
    match k {
        "ns" => cfg.ns = v.into(),
        "bh" => cfg.bh = v.into(),
        "placements" => cfg.placements = parse_u64(v)? as usize,
        "placement_seed" => cfg.placement_seed = parse_u64(v)?,
        "colocated" => cfg.colocated = v.parse().context("bad value for colocated")?,
        "protocol" => cfg.protocol = v.parse().map_err(anyhow::Error::msg)?,
        "reference" => cfg.reference = v.parse().map_err(anyhow::Error::msg)?,
        "adversaries" => cfg.adversaries = v.into(),
        "seeds" => cfg.seeds = v.into(),
        "bound_factor" => cfg.bound_factor = parse_u64(v)?,
        "budget" => cfg.budget = parse_u64(v)?,
        other => bail!("unknown sweep key `{other}`"),
    }
    Ok(())
}
