//! The `treerep` command line: runs the verification suites and writes
//! reports as JSON, CSV or text.
//!
//! Exit codes: 0 when everything selected passes, 1 on a suite failure,
//! 2 on a configuration or usage error, 3 on a numeric breakdown.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

use treerep_core::calculus::{build_pair, guard_spectrum};
use treerep_core::representation::QVector;
use treerep_core::rng::{random_alpha, trial_rng};
use treerep_core::suites::{admissibility_csv, admissibility_rows, replay_prop21, run_suites, AdmissibilityRow};
use treerep_core::{Error, SuiteConfig, SuiteName, SuiteReport, TreeAutomorphism, VerifyReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Stream tag of the `alpha` drawn by `spectrum`, apart from every suite's.
const SPECTRUM_STREAM: u32 = 0x5350;

#[derive(Debug, Parser)]
#[command(name = "treerep", version, about = "Verify boundary representations of regular tree groups")]
pub struct Cli {
    #[command(flatten)]
    pub options: Options,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Options {
    /// Branching: the tree is (q+1)-regular.
    #[arg(long, global = true, default_value_t = 2)]
    pub q: u32,
    /// Depth cap N for addresses and step functions.
    #[arg(long, global = true, default_value_t = 8)]
    pub depth: usize,
    /// Dimension d of the coefficient space.
    #[arg(long, global = true, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, global = true, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol: f64,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Omit the timestamp, making reports byte-identical across runs.
    #[arg(long, global = true)]
    pub no_timestamp: bool,
    /// Pretty-print JSON.
    #[arg(long, global = true)]
    pub pretty: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Run every suite.
    Verify,
    /// Run one suite.
    Suite {
        #[arg(value_parser = parse_suite)]
        name: SuiteName,
    },
    /// Fixed-space dimensions of the balls S_r for r = 1..N-1.
    AdmissibilityTable,
    /// Spectral guards for a seeded alpha.
    Spectrum,
    /// Replay the pruning step on the neighbourhood of an edge.
    ReplayProp21,
}

fn parse_suite(s: &str) -> Result<SuiteName, String> {
    s.parse().map_err(|_| {
        let names: Vec<&str> = SuiteName::ALL.iter().map(|n| n.as_str()).collect();
        format!("unknown suite {s:?}; expected one of {}", names.join(", "))
    })
}

impl Options {
    pub fn config(&self) -> SuiteConfig {
        SuiteConfig {
            q: self.q,
            depth_cap: self.depth,
            dim: self.dim,
            trials: self.trials,
            seed: self.seed,
            tol: self.tol,
        }
    }
}

/// A failed command: the exit code and a message for standard error.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_numeric() {
            EXIT_NUMERIC
        } else if matches!(e, Error::SpectralGuard(_)) {
            EXIT_FAILURE
        } else {
            EXIT_CONFIG
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

/// Rendered output and whether the checks behind it passed.
pub struct Output {
    pub body: String,
    pub passed: bool,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    timestamp: Option<String>,
    #[serde(flatten)]
    body: T,
}

fn render_json<T: Serialize>(opts: &Options, command: &str, body: T) -> Result<String, Failure> {
    let timestamp = if opts.no_timestamp {
        None
    } else {
        Some(
            OffsetDateTime::now_utc()
                .format(&Rfc3339)
                .map_err(|e| Failure::config(e.to_string()))?,
        )
    };
    let envelope = Envelope {
        tool: "treerep",
        version: env!("CARGO_PKG_VERSION"),
        command,
        timestamp,
        body,
    };
    let mut s = if opts.pretty {
        serde_json::to_string_pretty(&envelope)
    } else {
        serde_json::to_string(&envelope)
    }
    .map_err(|e| Failure::config(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn no_csv(command: &str) -> Failure {
    Failure::config(format!("{command} has no tabular output; use --format json or text"))
}

fn suites_text(report: &VerifyReport) -> String {
    let mut out = String::new();
    let c = &report.config;
    let _ = writeln!(
        out,
        "q={} depth={} dim={} trials={} seed={} tol={:e}",
        c.q, c.depth_cap, c.dim, c.trials, c.seed, c.tol
    );
    for s in &report.suites {
        let _ = writeln!(out, "{}", suite_line(s));
        for f in &s.failures {
            let _ = writeln!(out, "    trial {}: {}", f.trial, f.reason);
        }
    }
    let _ = writeln!(out, "{}", if report.passed { "PASS" } else { "FAIL" });
    out
}

fn suite_line(s: &SuiteReport) -> String {
    format!(
        "{} {:<26} trials={:<4} max_residual={:.3e} failures={}",
        if s.passed { "PASS" } else { "FAIL" },
        s.suite_name.as_str(),
        s.trial_count,
        s.max_residual,
        s.failures.len()
    )
}

fn run_selected(opts: &Options, command: &str, names: &[SuiteName]) -> Result<Output, Failure> {
    let report = run_suites(&opts.config(), names)?;
    let body = match opts.format {
        Format::Json => render_json(opts, command, &report)?,
        Format::Text => suites_text(&report),
        Format::Csv => return Err(no_csv(command)),
    };
    Ok(Output {
        body,
        passed: report.passed,
    })
}

fn admissibility(opts: &Options) -> Result<Output, Failure> {
    let cfg = opts.config();
    cfg.validate()?;
    let mut dims = vec![1, 2, 4, cfg.dim];
    dims.sort_unstable();
    dims.dedup();
    let rows = admissibility_rows(cfg.params()?, &dims)?;
    let passed = rows.iter().all(|r| r.fixed_dim == r.expected);
    let body = match opts.format {
        Format::Csv => admissibility_csv(&rows),
        Format::Json => render_json(opts, "admissibility-table", json!({ "q": cfg.q, "passed": passed, "rows": rows }))?,
        Format::Text => {
            let mut out = format!("{:>3} {:>3} {:>3} {:>12} {:>10}\n", "q", "r", "d", "orbit_count", "fixed_dim");
            for AdmissibilityRow { q, r, d, orbit_count, fixed_dim, .. } in &rows {
                let _ = writeln!(out, "{q:>3} {r:>3} {d:>3} {orbit_count:>12} {fixed_dim:>10}");
            }
            out
        }
    };
    Ok(Output { body, passed })
}

fn spectrum(opts: &Options) -> Result<Output, Failure> {
    let cfg = opts.config();
    cfg.validate()?;
    let mut rng = trial_rng(cfg.seed, SPECTRUM_STREAM, 0);
    let alpha = random_alpha(&mut rng, cfg.q, cfg.dim)?;
    let pair = build_pair(&alpha, cfg.q, cfg.tol)?;
    let guard = guard_spectrum(&pair);
    let passed = guard.is_ok();
    let guard_value = match &guard {
        Ok(g) => serde_json::to_value(g).map_err(|e| Failure::config(e.to_string()))?,
        Err(e) => json!({ "error": e.to_string() }),
    };
    let body = match opts.format {
        Format::Json => render_json(
            opts,
            "spectrum",
            json!({
                "config": cfg,
                "passed": passed,
                "alpha": pair.alpha,
                "tau": pair.tau,
                "tau_inv": pair.tau_inv,
                "alpha_norm": pair.alpha_norm,
                "tau_norm": pair.tau_norm,
                "residuals": pair.residuals,
                "guard": guard_value,
            }),
        )?,
        Format::Text => {
            let mut out = String::new();
            let _ = writeln!(out, "||alpha|| = {:.6} (radius {:.6})", pair.alpha_norm, 2.0 * f64::from(cfg.q).sqrt());
            let _ = writeln!(out, "||tau|| = {:.6}  ||tau^-1|| = {:.6}", pair.tau_norm, pair.tau_inv_norm);
            let r = pair.residuals;
            let _ = writeln!(out, "residuals: quad {:.3e}  sum {:.3e}  inv {:.3e}", r.quad, r.sum, r.inv);
            match &guard {
                Ok(g) => {
                    for z in &g.tau_spectrum {
                        let _ = writeln!(out, "eigenvalue {:+.6} {:+.6}i", z[0], z[1]);
                    }
                    let _ = writeln!(out, "dist(spec tau, +-q) = {:.6}", g.margin_to_pm_q);
                    let _ = writeln!(out, "sigma_min(tau - tau^-1) = {:.6}", g.sigma_min);
                }
                Err(e) => {
                    let _ = writeln!(out, "guard failed: {e}");
                }
            }
            let _ = writeln!(out, "{}", if passed { "PASS" } else { "FAIL" });
            out
        }
        Format::Csv => return Err(no_csv("spectrum")),
    };
    Ok(Output { body, passed })
}

fn replay(opts: &Options) -> Result<Output, Failure> {
    let cfg = opts.config();
    cfg.validate()?;
    let params = cfg.params()?;
    let r = replay_prop21(params)?;
    let mut errors = r.structural_errors(&TreeAutomorphism::identity(params));
    // Orbit i carries (i+1)(1, ..., 1), so the merged mean differs from both parts.
    let weights: Vec<QVector> = (0..r.orbits_before)
        .map(|i| treerep_core::representation::qvector(&vec![i as i64 + 1; cfg.dim]))
        .collect();
    errors.extend(r.averaging_errors(params, &weights)?);
    let passed = errors.is_empty();
    let body = match opts.format {
        Format::Json => render_json(
            opts,
            "replay-prop21",
            json!({ "config": cfg, "passed": passed, "errors": errors, "replay": r }),
        )?,
        Format::Text => {
            let mut out = String::new();
            let _ = writeln!(out, "S: {} vertices, {} orbits", r.subtree.len(), r.orbits_before);
            let segment: Vec<String> = r.segment.iter().map(ToString::to_string).collect();
            let _ = writeln!(out, "diametral segment: {}", segment.join(" "));
            let removed: Vec<String> = r.removed.iter().map(ToString::to_string).collect();
            let _ = writeln!(out, "pivot {}, removed {}", r.pivot, removed.join(" "));
            let _ = writeln!(out, "S': {} orbits; {} merge into {} of measure {}", r.orbits_after, r.merged_count, r.merged_cell, r.merged_measure);
            let _ = writeln!(out, "Busemann exponent on the merged cell: {}", r.busemann_exponent);
            for e in &errors {
                let _ = writeln!(out, "error: {e}");
            }
            let _ = writeln!(out, "{}", if passed { "PASS" } else { "FAIL" });
            out
        }
        Format::Csv => return Err(no_csv("replay-prop21")),
    };
    Ok(Output { body, passed })
}

/// Executes a parsed command.
pub fn execute(cli: &Cli) -> Result<Output, Failure> {
    let opts = &cli.options;
    match &cli.command {
        Command::Verify => run_selected(opts, "verify", &SuiteName::ALL),
        Command::Suite { name } => run_selected(opts, "suite", &[*name]),
        Command::AdmissibilityTable => admissibility(opts),
        Command::Spectrum => spectrum(opts),
        Command::ReplayProp21 => replay(opts),
    }
}

fn thread_pool() -> Result<Option<rayon::ThreadPool>, Failure> {
    let Ok(raw) = std::env::var("TREEREP_THREADS") else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::config(format!("TREEREP_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map(Some)
        .map_err(|e| Failure::config(e.to_string()))
}

fn run_inner(cli: &Cli) -> Result<Output, Failure> {
    match thread_pool()? {
        Some(pool) => pool.install(|| execute(cli)),
        None => execute(cli),
    }
}

/// Parses `args` (program name first), runs the command and writes the
/// report. Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run_inner(&cli) {
        Ok(out) => {
            let written = match &cli.options.out {
                Some(path) => std::fs::write(path, &out.body).map_err(|e| format!("cannot write {}: {e}", path.display())),
                None => {
                    print!("{}", out.body);
                    Ok(())
                }
            };
            if let Err(msg) = written {
                eprintln!("treerep: {msg}");
                return EXIT_CONFIG;
            }
            if out.passed {
                EXIT_OK
            } else {
                EXIT_FAILURE
            }
        }
        Err(f) => {
            eprintln!("treerep: {}", f.message);
            f.code
        }
    }
}
