//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or domain error, 2 undecided, 3 refuted.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use extfix_core::cef::{estimate_min_lambda, s_value, verify_contraction, VerifyConfig};
use extfix_core::checkers::{check_l1_bound, check_l2_bound, cd_falsify, describe, uc_falsify, BoundCertificate};
use extfix_core::instances::cyclic3_solve;
use extfix_core::iterate::{make_infimum_sequence, run_paired, uniqueness_scan, RunConfig};
use extfix_core::{Error, Point, StopReason, Verdict};

use crate::instance_file::InstanceFile;
use crate::output::{envelope, write_trace_csv};
use crate::registry::{builtin, Instance, PairInstance, SystemInstance, NAMES};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_UNDECIDED: i32 = 2;
pub const EXIT_REFUTED: i32 = 3;

/// Samples used to estimate `null` quantities in instance files.
const FILE_RESOLVE_SAMPLES: usize = 4096;
/// Length of the constant infimum sequences built for uniqueness scans.
const SCAN_SEQUENCE_LEN: usize = 12;

#[derive(Parser, Debug)]
#[command(name = "extfix", version, about = "Fixed points of external-factor contractions on pairs of sets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Iterate a system from a start and report the limit.
    Run(RunArgs),
    /// Check the contraction conditions on seeded samples and a probe trace.
    Verify(VerifyArgs),
    /// Search for uniqueness violations or UC/CD counterexamples.
    Scan(ScanArgs),
    /// List the built-in instances.
    List(ListArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Serialize)]
pub struct Common {
    /// Built-in instance name or path to an instance JSON file.
    #[arg(long)]
    pub instance: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the report (json) or a table (csv) to this path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Args, Debug, Serialize)]
pub struct RunArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Initial A-side point; coordinates separated by `;` or `,`.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub x0: Option<Point>,
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub y0: Option<Point>,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub steps: u64,
    #[arg(long, default_value_t = 1e-9, value_parser = parse_tol)]
    pub tol: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct VerifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub samples: u64,
    /// Override the declared contraction constant.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Depth of the P-invariance check.
    #[arg(long, default_value_t = 4)]
    pub depth: usize,
    /// Length of the probe trace used for the bound checks.
    #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u64).range(2..))]
    pub steps: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanKind {
    Uniqueness,
    Cd,
    Uc,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.lo + i as f64 * self.step).collect()
    }
}

#[derive(Args, Debug, Serialize)]
pub struct ScanArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub kind: ScanKind,
    /// Candidate grid `lo:hi:step` for uniqueness scans.
    #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
    pub grid: Option<Grid>,
    /// Candidates tried by the CD and UC falsifiers.
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub budget: u64,
    #[arg(long, default_value_t = 1e-9, value_parser = parse_tol)]
    pub tol: f64,
    /// Index of the last term of each falsifier candidate.
    #[arg(long, default_value_t = 4096, value_parser = clap::value_parser!(u64).range(11..))]
    pub length: u64,
    /// Step limit of the run that locates the limit for uniqueness scans.
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub steps: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct ListArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

fn parse_point(s: &str) -> Result<Point, String> {
    s.parse::<Point>().map_err(|e| e.to_string())
}

fn parse_tol(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("bad number {s:?}"))?;
    if !(v > 0.0 && v.is_finite()) {
        return Err("tol must be positive".to_string());
    }
    Ok(v)
}

fn parse_grid(s: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, step] = parts.as_slice() else {
        return Err("grid must be lo:hi:step".to_string());
    };
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("bad number {t:?}"));
    let g = Grid { lo: num(lo)?, hi: num(hi)?, step: num(step)? };
    if !(g.step > 0.0 && g.lo.is_finite() && g.hi >= g.lo && g.hi.is_finite()) {
        return Err("grid needs finite lo <= hi and step > 0".to_string());
    }
    Ok(g)
}

/// Outcome of a command: the report and the exit code it implies.
pub struct Outcome {
    pub code: i32,
    pub report: Value,
}

pub fn load_instance(arg: &str, seed: u64) -> Result<Instance> {
    if let Some(inst) = builtin(arg)? {
        return Ok(inst);
    }
    let path = Path::new(arg);
    if path.extension().is_some_and(|e| e == "json") || path.is_file() {
        let file = InstanceFile::from_path(path)?;
        return Ok(Instance::System(Box::new(file.build(FILE_RESOLVE_SAMPLES, seed)?)));
    }
    bail!("unknown instance {arg:?}; built-ins are {}", NAMES.join(", "))
}

fn system_instance(arg: &str, seed: u64) -> Result<SystemInstance> {
    match load_instance(arg, seed)? {
        Instance::System(s) => Ok(*s),
        Instance::Pair(p) => bail!("{} is a pair of sets, not a system; use scan --kind cd|uc", p.name),
    }
}

fn pair_instance(arg: &str, seed: u64) -> Result<PairInstance> {
    match load_instance(arg, seed)? {
        Instance::Pair(p) => Ok(p),
        Instance::System(s) => bail!("{} is a system; CD and UC scans take a pair instance", s.name),
    }
}

fn to_json(v: &impl Serialize) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

pub fn cmd_run(args: &RunArgs) -> Result<(Outcome, Option<extfix_core::PairedTrace>)> {
    let inst = system_instance(&args.common.instance, args.common.seed)?;
    let q0 = inst.start(args.x0.clone(), args.y0.clone());
    let cfg = RunConfig::new(args.steps as usize, args.tol);
    let (trace, report) = run_paired(&inst.system, &q0, cfg)?;
    let mut code = match report.stop_reason {
        StopReason::ToleranceMet => EXIT_OK,
        StopReason::MaxSteps | StopReason::DivergenceGuard => EXIT_UNDECIDED,
    };
    let mut result = json!({
        "instance": inst.name,
        "lambda": inst.system.lambda,
        "start": q0,
        "convergence": report,
    });
    if let Some(ct) = &inst.triple {
        let d = ct.space.dim();
        let a = q0.x.split(d).0;
        let (b, c) = q0.y.split(d);
        match cyclic3_solve(ct, &[a, b, c], cfg) {
            Ok(bp) => result["best_proximity"] = to_json(&bp)?,
            Err(Error::Undecided(m)) => {
                result["best_proximity"] = json!({ "undecided": m });
                code = code.max(EXIT_UNDECIDED);
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok((Outcome { code, report: result }, Some(trace)))
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<Outcome> {
    let inst = system_instance(&args.common.instance, args.common.seed)?;
    let mut system = inst.system.clone();
    if let Some(l) = args.lambda {
        if !(0.0..1.0).contains(&l) {
            bail!("lambda must lie in [0, 1)");
        }
        system = system.with_lambda(l);
    }
    let samples = args.samples as usize;
    let cert = verify_contraction(&system, VerifyConfig { samples, seed: args.common.seed, depth: args.depth })?;
    let s = s_value(&system)?;
    let q0 = inst.start(None, None);
    let (trace, probe) = run_paired(&system, &q0, RunConfig::new(args.steps as usize, 1e-12))?;
    let l1 = check_l1_bound(&system.pair.space, &trace.a, &trace.b, system.lambda, s)?;
    let l2 = check_l2_bound(&system.pair.space, &trace, BoundCertificate::new(system.lambda, s))?;
    let min_lambda = estimate_min_lambda(&system, samples, args.common.seed)?;
    let ok = cert.verdict == Verdict::CertifiedOnSamples && l1.holds && l2.holds();
    Ok(Outcome {
        code: if ok { EXIT_OK } else { EXIT_REFUTED },
        report: json!({
            "instance": inst.name,
            "passed": ok,
            "certification": cert,
            "min_lambda_estimate": min_lambda,
            "probe": {
                "start": q0,
                "steps": probe.steps,
                "stop_reason": probe.stop_reason,
                "boundedness": l1,
                "distance_bound": l2,
            },
        }),
    })
}

pub fn cmd_scan(args: &ScanArgs) -> Result<Outcome> {
    let seed = args.common.seed;
    match args.kind {
        ScanKind::Uniqueness => scan_uniqueness(args),
        ScanKind::Cd => {
            let p = pair_instance(&args.common.instance, seed)?;
            let gen = p.cd_generator(args.length as usize);
            let r = cd_falsify(&p.pair, gen, args.budget as usize, args.tol, seed)?;
            let code = if r.counterexample.is_some() { EXIT_REFUTED } else { EXIT_OK };
            Ok(Outcome { code, report: json!({ "instance": p.name, "summary": describe(&r), "falsifier": r }) })
        }
        ScanKind::Uc => {
            let p = pair_instance(&args.common.instance, seed)?;
            let gen = p.uc_generator(args.length as usize);
            let r = uc_falsify(&p.pair, gen, args.budget as usize, args.tol, seed)?;
            let code = if r.counterexample.is_some() { EXIT_REFUTED } else { EXIT_OK };
            Ok(Outcome { code, report: json!({ "instance": p.name, "summary": describe(&r), "falsifier": r }) })
        }
    }
}

/// Runs to the limit `α` from the default start, then offers every grid value
/// `β` with a constant sequence `c_n = c(β)`. Values for which that is not an
/// infimum sequence are skipped.
fn scan_uniqueness(args: &ScanArgs) -> Result<Outcome> {
    let inst = system_instance(&args.common.instance, args.common.seed)?;
    let grid = args.grid.ok_or_else(|| anyhow!("uniqueness scans need --grid lo:hi:step"))?;
    let q0 = inst.start(None, None);
    let (_, report) = run_paired(&inst.system, &q0, RunConfig::new(args.steps as usize, args.tol))?;
    let Some(alpha) = report.limit.clone() else {
        return Ok(Outcome {
            code: EXIT_UNDECIDED,
            report: json!({ "instance": inst.name, "convergence": report, "violations": null }),
        });
    };
    let witness = (q0.y.clone(), q0.v.clone());
    let mut candidates = Vec::new();
    let mut skipped = 0usize;
    let values = grid.values();
    for &b in &values {
        let beta = inst.rule.a_point(Point::scalar(b));
        let c = inst.rule.factor_a(&beta);
        match make_infimum_sequence(&inst.system, beta, witness.clone(), |_| c.clone(), SCAN_SEQUENCE_LEN, args.tol) {
            Ok(s) => candidates.push(s),
            Err(Error::InvalidInput(_) | Error::NotAnInfimumSequence(_)) => skipped += 1,
            Err(e) => return Err(e.into()),
        }
    }
    let violations = uniqueness_scan(&inst.system, &alpha, &candidates, args.tol)?;
    Ok(Outcome {
        code: if violations.is_empty() { EXIT_OK } else { EXIT_REFUTED },
        report: json!({
            "instance": inst.name,
            "alpha": alpha,
            "convergence": report,
            "grid": grid,
            "grid_points": values.len(),
            "candidates": candidates.len(),
            "skipped": skipped,
            "violations": violations,
        }),
    })
}

fn list_rows() -> Result<Vec<(String, &'static str, String)>> {
    NAMES
        .iter()
        .map(|n| {
            let inst = builtin(n)?.ok_or_else(|| anyhow!("missing built-in {n}"))?;
            Ok((inst.name().to_string(), inst.kind(), inst.description().to_string()))
        })
        .collect()
}

fn cmd_list(args: &ListArgs) -> Result<i32> {
    let rows = list_rows()?;
    let stdout = io::stdout();
    match args.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(stdout.lock());
            w.write_record(["name", "kind", "description"])?;
            for (n, k, d) in &rows {
                w.write_record([n.as_str(), k, d.as_str()])?;
            }
            w.flush()?;
        }
        Format::Json => {
            let items: Vec<Value> = rows.iter().map(|(n, k, d)| json!({ "name": n, "kind": k, "description": d })).collect();
            let env = envelope("list", None, args, Value::Array(items))?;
            print_stdout(&serde_json::to_string_pretty(&env)?)?;
        }
    }
    Ok(EXIT_OK)
}

/// A closed pipe on stdout is not an error.
fn print_stdout(text: &str) -> Result<()> {
    match writeln!(io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

/// Flattens nested JSON into dotted `key,value` rows.
fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => m.iter().for_each(|(k, v)| flatten(&key(k), v, out)),
        Value::Array(a) => a.iter().enumerate().for_each(|(i, v)| flatten(&key(&i.to_string()), v, out)),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Number(n) => {
            let s = n.as_f64().filter(|_| n.is_f64()).map_or_else(|| n.to_string(), crate::output::num);
            out.push((prefix.to_string(), s));
        }
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn write_key_value_csv(path: &Path, v: &Value) -> Result<()> {
    let mut rows = Vec::new();
    flatten("", v, &mut rows);
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["key", "value"])?;
    for (k, v) in rows {
        w.write_record([k, v])?;
    }
    w.flush()?;
    Ok(())
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut f = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut f, v)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

fn emit(command: &str, common: &Common, config: &impl Serialize, outcome: &Outcome, trace: Option<&extfix_core::PairedTrace>) -> Result<()> {
    let env = envelope(command, Some(common.seed), config, outcome.report.clone())?;
    print_stdout(&serde_json::to_string_pretty(&env)?)?;
    if let Some(path) = &common.out {
        match (common.format, trace) {
            (Format::Csv, Some(t)) => {
                let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
                write_trace_csv(BufWriter::new(f), t)?;
            }
            (Format::Csv, None) => write_key_value_csv(path, &env)?,
            (Format::Json, Some(t)) => {
                let mut env = env;
                env["trace"] = to_json(t)?;
                write_json(path, &env)?;
            }
            (Format::Json, None) => write_json(path, &env)?,
        }
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Run(a) => {
            let (o, trace) = cmd_run(a)?;
            emit("run", &a.common, a, &o, trace.as_ref())?;
            Ok(o.code)
        }
        Command::Verify(a) => {
            let o = cmd_verify(a)?;
            emit("verify", &a.common, a, &o, None)?;
            Ok(o.code)
        }
        Command::Scan(a) => {
            let o = cmd_scan(a)?;
            emit("scan", &a.common, a, &o, None)?;
            Ok(o.code)
        }
        Command::List(a) => cmd_list(a),
    }
}

/// Exit code for an error escaping a command.
pub fn error_code(e: &anyhow::Error) -> i32 {
    match e.downcast_ref::<Error>() {
        Some(Error::Refuted(_)) => EXIT_REFUTED,
        Some(Error::Undecided(_)) => EXIT_UNDECIDED,
        _ => EXIT_ERROR,
    }
}

pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            error_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_values_are_exact_multiples() {
        let g = parse_grid("0:100:0.5").unwrap();
        let v = g.values();
        assert_eq!(v.len(), 201);
        assert_eq!(v[200], 100.0);
        assert_eq!(v[7], 3.5);
        assert!(parse_grid("1:0:1").is_err());
        assert!(parse_grid("0:1").is_err());
        assert_eq!(parse_grid("-2:2:1").unwrap().values(), vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn tol_must_be_positive() {
        assert!(parse_tol("0").is_err());
        assert!(parse_tol("-1e-9").is_err());
        assert_eq!(parse_tol("1e-9").unwrap(), 1e-9);
    }

    #[test]
    fn flatten_nests_keys() {
        let mut rows = Vec::new();
        flatten("", &json!({ "a": { "b": [1, 2.5] }, "c": "x" }), &mut rows);
        assert_eq!(rows[0], ("a.b.0".to_string(), "1".to_string()));
        assert_eq!(rows[1].0, "a.b.1");
        assert_eq!(rows[2], ("c".to_string(), "x".to_string()));
    }

    #[test]
    fn error_codes() {
        assert_eq!(error_code(&anyhow::Error::new(Error::Refuted("x".into()))), EXIT_REFUTED);
        assert_eq!(error_code(&anyhow::Error::new(Error::Undecided("x".into()))), EXIT_UNDECIDED);
        assert_eq!(error_code(&anyhow!("plain")), EXIT_ERROR);
    }
}
