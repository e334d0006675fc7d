//! Command-line front end.
//!
//! Every run is resolved into a [`ConfigDoc`]: config file first, then the
//! flags on top, then defaults for anything still missing. The resolved
//! document is what gets executed and what is echoed at the top of every
//! output (`# `-prefixed in CSV, a `config` string in JSON), so any output
//! can be replayed with `--config`.
//!
//! Exit codes: 0 success, 1 usage error, 2 validation failure, 3 numerical
//! failure. `RINGFLOW_THREADS` sets the default worker count.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::{linear_grid, scan_example, theorem_current, truncated_series, SumMethod};
use crate::config::{fmt_f64, ConfigDoc, Section};
use crate::error::{Error, Result};
use crate::linalg::loglog_slope;
use crate::model::{validate_coupling, CouplingSpec, SystemParams};
use crate::operator::assemble_drift;
use crate::simulate::{estimate_current, trajectory, write_trajectory_csv, SimConfig};
use crate::spectral::{eigendecompose, EigenOptions};
use crate::stationary::{decompose_current, expected_current, stationary_covariance, LyapunovMethod};

pub const THREADS_ENV: &str = "RINGFLOW_THREADS";

#[derive(Debug, Parser)]
#[command(name = "ringflow", version, about = "Heat currents through a Klein-Gordon ring between two heat baths")]
pub struct Cli {
    /// Config file (`[section]` headers, `key = value` lines); flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (default: stdout).
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads (default: $RINGFLOW_THREADS, else all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub system: SystemArgs,
    #[command(flatten)]
    pub coupling: CouplingArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args, Default)]
pub struct SystemArgs {
    /// Ultraviolet cutoff.
    #[arg(long = "M", global = true)]
    pub m: Option<usize>,
    #[arg(long, global = true)]
    pub eta: Option<f64>,
    #[arg(long = "T1", global = true)]
    pub t1: Option<f64>,
    #[arg(long = "T2", global = true)]
    pub t2: Option<f64>,
    /// Nonlinearity: zero, tanh, clipped_cubic.
    #[arg(long, global = true)]
    pub g: Option<String>,
    #[arg(long, global = true)]
    pub g_amplitude: Option<f64>,
    #[arg(long, global = true)]
    pub g_scale: Option<f64>,
    #[arg(long, global = true)]
    pub g_clip: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct CouplingArgs {
    /// Coupling kind: delta_pair, power_law, table.
    #[arg(long, global = true)]
    pub coupling: Option<String>,
    /// Strength of the second δ coupling.
    #[arg(long, global = true)]
    pub c: Option<f64>,
    /// Position of the second δ coupling.
    #[arg(long, global = true)]
    pub x1: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    #[arg(long, global = true)]
    pub amp1: Option<f64>,
    #[arg(long, global = true)]
    pub amp2: Option<f64>,
    #[arg(long, global = true)]
    pub shift: Option<f64>,
    /// CSV table `n,re1,im1,re2,im2` for kind = table.
    #[arg(long, global = true)]
    pub table: Option<PathBuf>,
    #[arg(long, global = true)]
    pub c1: Option<f64>,
    #[arg(long, global = true)]
    pub c2: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the growth and non-degeneracy conditions on the couplings.
    Validate {
        #[arg(long)]
        n_max: Option<i64>,
    },
    /// Exact stationary current of the truncated system.
    ExactCurrent {
        #[arg(long)]
        method: Option<String>,
    },
    /// Exact current over an η grid, compared with the truncated series.
    EtaScan {
        /// Comma-separated η values.
        #[arg(long)]
        etas: Option<String>,
        #[arg(long)]
        method: Option<String>,
    },
    /// Exact current over cutoffs at fixed η.
    MScan {
        /// Comma-separated cutoffs.
        #[arg(long)]
        ms: Option<String>,
        #[arg(long)]
        method: Option<String>,
    },
    /// Limiting current as η → 0 from the mode series.
    SeriesCurrent {
        #[arg(long)]
        n_max: Option<usize>,
        /// consensus, cesaro or abel.
        #[arg(long)]
        sum_method: Option<String>,
    },
    /// Table of the δ-pair limiting current C(x₁) with jump detection.
    ExampleScan {
        #[arg(long)]
        x1_min: Option<f64>,
        #[arg(long)]
        x1_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        delta_t: Option<f64>,
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// Eigenbasis decomposition of the exact current by pair class.
    Decompose,
    /// Monte Carlo estimate of the stationary current.
    Simulate {
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        burn_in: Option<f64>,
        #[arg(long)]
        sample_time: Option<f64>,
        #[arg(long)]
        batches: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        chains: Option<usize>,
        /// exactOU or strangSplit.
        #[arg(long)]
        scheme: Option<String>,
        /// Also write chain 0 as `t,current,energy` CSV to this path.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long)]
        trajectory_steps: Option<usize>,
        #[arg(long)]
        thin: Option<usize>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate { .. } => "validate",
            Command::ExactCurrent { .. } => "exact-current",
            Command::EtaScan { .. } => "eta-scan",
            Command::MScan { .. } => "m-scan",
            Command::SeriesCurrent { .. } => "series-current",
            Command::ExampleScan { .. } => "example-scan",
            Command::Decompose => "decompose",
            Command::Simulate { .. } => "simulate",
        }
    }
}

/// What to compute, fully resolved.
#[derive(Debug, Clone, PartialEq)]
pub enum Task {
    Validate { n_max: i64 },
    ExactCurrent { method: LyapunovMethod },
    EtaScan { etas: Vec<f64>, method: LyapunovMethod },
    MScan { ms: Vec<usize>, method: LyapunovMethod },
    SeriesCurrent { n_max: usize, sum_method: SumMethod },
    ExampleScan { c: f64, x1_min: f64, x1_max: f64, points: usize, delta_t: f64, n_max: usize },
    Decompose,
    Simulate { trajectory: Option<String>, trajectory_steps: usize, thin: usize },
}

/// Resolved run: the command, the system, the coupling and simulation settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub task: Task,
    pub system: SystemParams,
    /// Absent for `example-scan`, which fixes its own couplings.
    pub coupling: Option<CouplingSpec>,
    pub sim: Option<SimConfig>,
    pub format: Format,
}

fn format_name(f: Format) -> &'static str {
    match f {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

fn parse_list<T: std::str::FromStr>(raw: &str, what: &str) -> Result<Vec<T>> {
    raw.split(',')
        .map(|x| x.trim())
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<T>().map_err(|_| Error::Parse(format!("bad {what} entry {x:?}"))))
        .collect()
}

impl RunConfig {
    /// Builds the run from a resolved document.
    pub fn from_doc(doc: &ConfigDoc) -> Result<Self> {
        let empty = Section::new("");
        let run = doc.section("run").ok_or_else(|| Error::Parse("missing [run] section".into()))?;
        let command: String = run.require("command")?;
        let system = SystemParams::from_section(doc.section("system").unwrap_or(&empty))?;
        let format = match run.get("format").unwrap_or("csv") {
            "csv" => Format::Csv,
            "json" => Format::Json,
            other => return Err(Error::Parse(format!("unknown format {other:?}"))),
        };
        let method = || -> Result<LyapunovMethod> { run.get_parsed("method").map(|m| m.unwrap_or(LyapunovMethod::Eigenbasis)) };
        let task = match command.as_str() {
            "validate" => Task::Validate { n_max: run.require("n_max")? },
            "exact-current" => Task::ExactCurrent { method: method()? },
            "eta-scan" => Task::EtaScan {
                etas: parse_list(&run.require::<String>("etas")?, "eta")?,
                method: method()?,
            },
            "m-scan" => Task::MScan {
                ms: parse_list(&run.require::<String>("ms")?, "M")?,
                method: method()?,
            },
            "series-current" => Task::SeriesCurrent {
                n_max: run.require("n_max")?,
                sum_method: run.require("sum_method")?,
            },
            "example-scan" => Task::ExampleScan {
                c: run.require("c")?,
                x1_min: run.require("x1_min")?,
                x1_max: run.require("x1_max")?,
                points: run.require("points")?,
                delta_t: run.require("delta_t")?,
                n_max: run.require("n_max")?,
            },
            "decompose" => Task::Decompose,
            "simulate" => Task::Simulate {
                trajectory: run.get("trajectory").map(str::to_string),
                trajectory_steps: run.get_parsed("trajectory_steps")?.unwrap_or(10_000),
                thin: run.get_parsed("thin")?.unwrap_or(1),
            },
            other => return Err(Error::Parse(format!("unknown command {other:?}"))),
        };
        let coupling = match task {
            Task::ExampleScan { .. } => None,
            _ => Some(CouplingSpec::from_section(
                doc.section("coupling").ok_or_else(|| Error::Parse("missing [coupling] section".into()))?,
            )?),
        };
        let sim = match task {
            Task::Simulate { .. } => Some(SimConfig::from_section(doc.section("sim").unwrap_or(&empty))?),
            _ => None,
        };
        Ok(Self {
            task,
            system,
            coupling,
            sim,
            format,
        })
    }

    /// Canonical document; `from_doc(to_doc())` reproduces the run.
    pub fn to_doc(&self) -> ConfigDoc {
        let mut doc = ConfigDoc::new();
        let mut run = Section::new("run");
        let list = |v: &[f64]| v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",");
        match &self.task {
            Task::Validate { n_max } => {
                run.set("command", "validate");
                run.set("n_max", n_max.to_string());
            }
            Task::ExactCurrent { method } => {
                run.set("command", "exact-current");
                run.set("method", method.name());
            }
            Task::EtaScan { etas, method } => {
                run.set("command", "eta-scan");
                run.set("etas", list(etas));
                run.set("method", method.name());
            }
            Task::MScan { ms, method } => {
                run.set("command", "m-scan");
                run.set("ms", ms.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(","));
                run.set("method", method.name());
            }
            Task::SeriesCurrent { n_max, sum_method } => {
                run.set("command", "series-current");
                run.set("n_max", n_max.to_string());
                run.set("sum_method", sum_method.name());
            }
            Task::ExampleScan { c, x1_min, x1_max, points, delta_t, n_max } => {
                run.set("command", "example-scan");
                run.set_f64("c", *c);
                run.set_f64("x1_min", *x1_min);
                run.set_f64("x1_max", *x1_max);
                run.set("points", points.to_string());
                run.set_f64("delta_t", *delta_t);
                run.set("n_max", n_max.to_string());
            }
            Task::Decompose => run.set("command", "decompose"),
            Task::Simulate { trajectory, trajectory_steps, thin } => {
                run.set("command", "simulate");
                if let Some(t) = trajectory {
                    run.set("trajectory", t.clone());
                }
                run.set("trajectory_steps", trajectory_steps.to_string());
                run.set("thin", thin.to_string());
            }
        }
        run.set("format", format_name(self.format));
        doc.push(run);
        doc.push(self.system.to_section("system"));
        if let Some(c) = &self.coupling {
            doc.push(c.to_section("coupling"));
        }
        if let Some(s) = &self.sim {
            doc.push(s.to_section("sim"));
        }
        doc
    }
}

fn set_opt<T: ToString>(s: &mut Section, key: &str, v: &Option<T>) {
    if let Some(v) = v {
        s.set(key, v.to_string());
    }
}

fn set_opt_f64(s: &mut Section, key: &str, v: Option<f64>) {
    if let Some(v) = v {
        s.set_f64(key, v);
    }
}

fn set_default(s: &mut Section, key: &str, v: &str) {
    if s.get(key).is_none() {
        s.set(key, v);
    }
}

/// Merges config file, flags and defaults into one document.
pub fn resolve(cli: &Cli) -> Result<ConfigDoc> {
    let mut doc = match &cli.config {
        Some(p) => ConfigDoc::parse(&fs::read_to_string(p)?)?,
        None => ConfigDoc::new(),
    };
    let cmd = cli.command.name();
    {
        let s = doc.section_mut("system");
        set_opt(s, "M", &cli.system.m);
        set_opt_f64(s, "eta", cli.system.eta);
        set_opt_f64(s, "T1", cli.system.t1);
        set_opt_f64(s, "T2", cli.system.t2);
        set_opt(s, "g", &cli.system.g);
        set_opt_f64(s, "g_amplitude", cli.system.g_amplitude);
        set_opt_f64(s, "g_scale", cli.system.g_scale);
        set_opt_f64(s, "g_clip", cli.system.g_clip);
        set_default(s, "M", "8");
        set_default(s, "eta", "0.5");
        set_default(s, "T1", "2");
        set_default(s, "T2", "1");
    }

    let example = matches!(cli.command, Command::ExampleScan { .. });
    if !example {
        let fresh = doc.section("coupling").is_none();
        let k = &cli.coupling;
        let s = doc.section_mut("coupling");
        if let Some(kind) = &k.coupling {
            if s.get("kind") != Some(kind.as_str()) {
                *s = Section::new("coupling");
            }
            s.set("kind", kind.clone());
        }
        set_opt_f64(s, "c", k.c);
        set_opt_f64(s, "x1", k.x1);
        set_opt_f64(s, "theta", k.theta);
        set_opt_f64(s, "amp1", k.amp1);
        set_opt_f64(s, "amp2", k.amp2);
        set_opt_f64(s, "shift", k.shift);
        set_opt_f64(s, "c1", k.c1);
        set_opt_f64(s, "c2", k.c2);
        if let Some(t) = &k.table {
            s.set("table_file", t.display().to_string());
        }
        if fresh || s.get("kind").is_none() {
            set_default(s, "kind", "delta_pair");
        }
        if s.get("kind") == Some("delta_pair") {
            set_default(s, "c", "0.5");
            set_default(s, "x1", "1");
        }
    }

    let run = doc.section_mut("run");
    if run.get("command").is_some_and(|c| c != cmd) {
        // a replayed config for another command keeps only the shared sections
        *run = Section::new("run");
    }
    run.set("command", cmd);
    if let Some(f) = cli.format {
        run.set("format", format_name(f));
    }
    set_default(run, "format", "csv");
    match &cli.command {
        Command::Validate { n_max } => {
            set_opt(run, "n_max", n_max);
            set_default(run, "n_max", "1000");
        }
        Command::ExactCurrent { method } | Command::EtaScan { method, .. } | Command::MScan { method, .. } => {
            set_opt(run, "method", method);
            set_default(run, "method", "eigenbasis");
        }
        _ => {}
    }
    match &cli.command {
        Command::EtaScan { etas, .. } => {
            set_opt(run, "etas", etas);
            set_default(run, "etas", "0.4,0.2,0.1,0.05");
        }
        Command::MScan { ms, .. } => {
            set_opt(run, "ms", ms);
            set_default(run, "ms", "4,8,16,32");
        }
        Command::SeriesCurrent { n_max, sum_method } => {
            set_opt(run, "n_max", n_max);
            set_opt(run, "sum_method", sum_method);
            set_default(run, "n_max", "100000");
            set_default(run, "sum_method", "consensus");
        }
        Command::ExampleScan { x1_min, x1_max, points, delta_t, n_max } => {
            set_opt_f64(run, "c", cli.coupling.c);
            set_opt_f64(run, "x1_min", *x1_min);
            set_opt_f64(run, "x1_max", *x1_max);
            set_opt(run, "points", points);
            set_opt_f64(run, "delta_t", *delta_t);
            set_opt(run, "n_max", n_max);
            set_default(run, "c", "0.5");
            set_default(run, "x1_min", "0.1");
            set_default(run, "x1_max", "3.14159");
            set_default(run, "points", "200");
            set_default(run, "delta_t", "1");
            set_default(run, "n_max", "10000");
        }
        Command::Simulate { trajectory, trajectory_steps, thin, .. } => {
            if let Some(t) = trajectory {
                run.set("trajectory", t.display().to_string());
            }
            set_opt(run, "trajectory_steps", trajectory_steps);
            set_opt(run, "thin", thin);
        }
        _ => {}
    }
    if let Command::Simulate { dt, burn_in, sample_time, batches, seed, chains, scheme, .. } = &cli.command {
        let s = doc.section_mut("sim");
        set_opt_f64(s, "dt", *dt);
        set_opt_f64(s, "burn_in", *burn_in);
        set_opt_f64(s, "sample_time", *sample_time);
        set_opt(s, "batches", batches);
        set_opt(s, "seed", seed);
        set_opt(s, "chains", chains);
        set_opt(s, "scheme", scheme);
    }
    Ok(doc)
}

#[derive(Serialize)]
struct JsonOut<'a, T: Serialize> {
    schema: u32,
    command: &'a str,
    config: String,
    result: T,
}

struct Output {
    header: ConfigDoc,
    format: Format,
    command: &'static str,
    buf: Vec<u8>,
}

impl Output {
    fn csv(&mut self, body: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        self.buf.extend_from_slice(self.header.render_prefixed("# ").as_bytes());
        body(&mut self.buf)
    }

    fn json<T: Serialize>(&mut self, result: &T) -> Result<()> {
        let out = JsonOut {
            schema: 1,
            command: self.command,
            config: self.header.render(),
            result,
        };
        serde_json::to_writer_pretty(&mut self.buf, &out).map_err(|e| Error::Parse(e.to_string()))?;
        self.buf.push(b'\n');
        Ok(())
    }

    fn emit<T: Serialize>(&mut self, result: &T, body: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        match self.format {
            Format::Csv => self.csv(body),
            Format::Json => self.json(result),
        }
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ExactRow {
    m: usize,
    eta: f64,
    t1: f64,
    t2: f64,
    current: f64,
    series_truncated: Option<f64>,
    abs_difference: Option<f64>,
    relative_residual: f64,
}

fn exact_row(params: &SystemParams, spec: &CouplingSpec, method: LyapunovMethod, with_series: bool) -> Result<ExactRow> {
    let ds = assemble_drift(params, spec)?;
    let cov = stationary_covariance(&ds, method, 1e-9)?;
    let current = expected_current(&cov, ds.current_matrix());
    let series = if with_series {
        Some(truncated_series(spec, params.t1, params.t2, params.m)?)
    } else {
        None
    };
    Ok(ExactRow {
        m: params.m,
        eta: params.eta,
        t1: params.t1,
        t2: params.t2,
        current,
        series_truncated: series,
        abs_difference: series.map(|s| (current - s).abs()),
        relative_residual: cov.relative_residual,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ScanOut {
    rows: Vec<ExactRow>,
    /// log-log slope of `|J - S_M|` against η (eta-scan only).
    slope: Option<f64>,
}

/// Runs a resolved configuration and returns the output bytes.
pub fn execute(rc: &RunConfig) -> Result<(Vec<u8>, i32)> {
    let mut out = Output {
        header: rc.to_doc(),
        format: rc.format,
        command: match rc.task {
            Task::Validate { .. } => "validate",
            Task::ExactCurrent { .. } => "exact-current",
            Task::EtaScan { .. } => "eta-scan",
            Task::MScan { .. } => "m-scan",
            Task::SeriesCurrent { .. } => "series-current",
            Task::ExampleScan { .. } => "example-scan",
            Task::Decompose => "decompose",
            Task::Simulate { .. } => "simulate",
        },
        buf: Vec::new(),
    };
    let params = &rc.system;
    let spec = rc.coupling.as_ref();
    let need_spec = || spec.ok_or_else(|| Error::Parse("missing coupling".into()));
    let mut code = 0;
    match &rc.task {
        Task::Validate { n_max } => {
            let rep = validate_coupling(need_spec()?, *n_max)?;
            if !rep.passed {
                code = 2;
            }
            out.emit(&rep, |w| {
                writeln!(w, "n_max,theta,c1,c2,bounds_inferred,theta_in_range,growth_violations,nondegeneracy_violations,missing,passed")?;
                let join = |v: &[i64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{},{}",
                    rep.n_max,
                    fmt_f64(rep.theta),
                    fmt_f64(rep.c1),
                    fmt_f64(rep.c2),
                    rep.bounds_inferred,
                    rep.theta_in_range,
                    join(&rep.growth_violations),
                    join(&rep.nondegeneracy_violations),
                    join(&rep.missing),
                    rep.passed
                )?;
                Ok(())
            })?;
        }
        Task::ExactCurrent { method } => {
            let row = exact_row(params, need_spec()?, *method, false)?;
            out.emit(&row, |w| {
                writeln!(w, "M,eta,T1,T2,current,method,relative_residual")?;
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    row.m,
                    fmt_f64(row.eta),
                    fmt_f64(row.t1),
                    fmt_f64(row.t2),
                    fmt_f64(row.current),
                    method.name(),
                    fmt_f64(row.relative_residual)
                )?;
                Ok(())
            })?;
        }
        Task::EtaScan { method, .. } | Task::MScan { method, .. } => {
            let s = need_spec()?;
            let grid: Vec<SystemParams> = match &rc.task {
                Task::EtaScan { etas, .. } => etas
                    .iter()
                    .map(|&e| SystemParams { eta: e, ..params.clone() })
                    .collect(),
                Task::MScan { ms, .. } => ms.iter().map(|&m| SystemParams { m, ..params.clone() }).collect(),
                _ => unreachable!(),
            };
            let rows = grid
                .par_iter()
                .map(|p| exact_row(p, s, *method, true))
                .collect::<Result<Vec<_>>>()?;
            let slope = if matches!(rc.task, Task::EtaScan { .. }) && rows.len() >= 2 {
                let xs: Vec<f64> = rows.iter().map(|r| r.eta).collect();
                let ys: Vec<f64> = rows.iter().map(|r| r.abs_difference.unwrap_or(0.0)).collect();
                Some(loglog_slope(&xs, &ys)?.0)
            } else {
                None
            };
            let scan = ScanOut { rows, slope };
            out.emit(&scan, |w| {
                writeln!(w, "M,eta,T1,T2,current,series_truncated,abs_difference,slope")?;
                for r in &scan.rows {
                    writeln!(
                        w,
                        "{},{},{},{},{},{},{},{}",
                        r.m,
                        fmt_f64(r.eta),
                        fmt_f64(r.t1),
                        fmt_f64(r.t2),
                        fmt_f64(r.current),
                        opt(r.series_truncated),
                        opt(r.abs_difference),
                        opt(scan.slope)
                    )?;
                }
                Ok(())
            })?;
        }
        Task::SeriesCurrent { n_max, sum_method } => {
            let r = theorem_current(need_spec()?, params.t1, params.t2, *n_max, *sum_method)?;
            if !r.converged {
                code = 3;
            }
            out.emit(&r, |w| {
                writeln!(w, "value,cesaro,abel,error_estimate,n_used,converged,method")?;
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    fmt_f64(r.value),
                    fmt_f64(r.cesaro),
                    fmt_f64(r.abel),
                    fmt_f64(r.error_estimate),
                    r.n_used,
                    r.converged,
                    r.method.name()
                )?;
                Ok(())
            })?;
        }
        Task::ExampleScan { c, x1_min, x1_max, points, delta_t, n_max } => {
            let grid = linear_grid(*x1_min, *x1_max, *points);
            let scan = scan_example(*c, &grid, *delta_t, *n_max)?;
            out.emit(&scan, |w| scan.write_csv(w))?;
        }
        Task::Decompose => {
            let ds = assemble_drift(params, need_spec()?)?;
            let eig = eigendecompose(&ds, &EigenOptions::default())?;
            let rep = decompose_current(&eig, &ds)?;
            out.emit(&rep, |w| rep.write_csv(w))?;
        }
        Task::Simulate { trajectory: traj, trajectory_steps, thin } => {
            let cfg = rc.sim.clone().unwrap_or_default();
            let ds = assemble_drift(params, need_spec()?)?;
            let est = estimate_current(&ds, &cfg, &params.g)?;
            if let Some(path) = traj {
                let rows = trajectory(&ds, &cfg, &params.g, *trajectory_steps, *thin)?;
                let mut buf = out.header.render_prefixed("# ").into_bytes();
                write_trajectory_csv(&rows, &mut buf)?;
                fs::write(path, buf)?;
            }
            out.emit(&est, |w| {
                writeln!(w, "mean,stderr,effective_samples,samples,sample_time,relaxation_time,burn_in_ok")?;
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    fmt_f64(est.mean),
                    fmt_f64(est.stderr),
                    fmt_f64(est.effective_samples),
                    est.samples,
                    fmt_f64(est.sample_time),
                    fmt_f64(est.relaxation_time),
                    est.burn_in_ok
                )?;
                Ok(())
            })?;
        }
    }
    Ok((out.buf, code))
}

fn thread_count(cli: &Cli) -> Result<Option<usize>> {
    if let Some(n) = cli.threads {
        return Ok(Some(n));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Error::Parse(format!("{THREADS_ENV} = {v:?} is not a thread count"))),
        Err(_) => Ok(None),
    }
}

fn run_parsed(cli: &Cli) -> Result<i32> {
    let doc = resolve(cli)?;
    let rc = RunConfig::from_doc(&doc)?;
    let threads = thread_count(cli)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let (bytes, code) = pool.install(|| execute(&rc))?;
    match &cli.output {
        Some(p) => fs::write(p, bytes)?,
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(code)
}

/// Parses `argv` (including the program name), runs, and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_parsed(&cli) {
        Ok(code) => code,
        Err(e) => {
            let mut msg = String::new();
            let _ = write!(msg, "error: {e}");
            eprintln!("{msg}");
            e.exit_code()
        }
    }
}
