use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use hha_core::verify::{emit_report, run_suite, write_report, ReportFormat, SuiteConfig};
use hha_core::Error;

#[derive(Parser)]
#[command(name = "hha", version, about = "Verification suites for harmonic analysis on the Heisenberg group")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one verification suite and write its report.
    Verify {
        /// algebra, measure, luxemburg, ballnorms, maximal, atoms, riesz or hardy
        #[arg(long)]
        suite: Option<String>,
        /// JSON suite configuration; omitted fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Report path; `-` or absent writes to stdout unless the config names one.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        format: Option<ReportFormat>,
        /// Comma-separated seeds replacing the configured list.
        #[arg(long, value_delimiter = ',')]
        seed_override: Option<Vec<u64>>,
    },
}

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn load_config(
    suite: Option<String>,
    config: Option<PathBuf>,
    seeds: Option<Vec<u64>>,
) -> Result<SuiteConfig, String> {
    let mut cfg = match &config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            SuiteConfig::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => SuiteConfig::new(""),
    };
    if let Some(s) = suite {
        cfg.suite = s;
    }
    if cfg.suite.is_empty() {
        return Err("no suite given (use --suite or set `suite` in the config)".into());
    }
    if let Some(s) = seeds {
        cfg.seeds = s;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Verify {
        suite,
        config,
        out,
        format,
        seed_override,
    } = cli.command;
    let cfg = match load_config(suite, config, seed_override) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("config error: {msg}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let out = out.or_else(|| cfg.output.as_ref().map(|o| PathBuf::from(&o.path)));
    let format = format.or(cfg.output.as_ref().map(|o| o.format)).unwrap_or_default();

    let start = Instant::now();
    let report = match run_suite(&cfg) {
        Ok(r) => r,
        Err(e @ (Error::InvalidParameter(_) | Error::UnknownSuite(_))) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(e) => {
            eprintln!("suite `{}` aborted: {e}", cfg.suite);
            return ExitCode::from(EXIT_FAIL);
        }
    };
    let elapsed = start.elapsed().as_secs_f64();

    let written = match out.as_deref() {
        Some(p) if p.as_os_str() != "-" => emit_report(&report, p, format),
        _ => write_report(&report, std::io::stdout().lock(), format),
    };
    if let Err(e) = written {
        eprintln!("cannot write report: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    let failed: Vec<_> = report.failed().map(|c| c.name.as_str()).collect();
    eprintln!(
        "suite {}: {} checks, {} failed, {elapsed:.2} s",
        report.suite,
        report.checks.len(),
        failed.len()
    );
    for name in &failed {
        eprintln!("  FAIL {name}");
    }
    if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    }
}
