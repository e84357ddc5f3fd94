//! Command-line front end: `run`, `fci`, `sweep`, `report`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::determinants::Sector;
use crate::driver::{hartree_fock_energy, run_hivqe, run_pes_sweep, PesPoint, RunConfig, RunResult, RunStatus};
use crate::error::{Error, Result};
use crate::integrals::{DipoleIntegrals, IntegralSet};
use crate::oracle::{fci_ground, DEFAULT_FCI_LIMIT};

#[derive(Debug, Parser)]
#[command(name = "hivqe", version, about = "Sampling-driven selected CI")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full iteration on one FCIDUMP.
    Run(RunArgs),
    /// Exact diagonalization over the full sector.
    Fci(FciArgs),
    /// One run per geometry listed in a manifest.
    Sweep(SweepArgs),
    /// Tabulate result.json files.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// Flat JSON file of RunConfig keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a config key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub fcidump: PathBuf,
    /// Dipole integral file: `axis p q value` lines (1-based) and `nuc dx dy dz`.
    #[arg(long)]
    pub dipole: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct FciArgs {
    #[arg(long, required_unless_present = "sector")]
    pub fcidump: Option<PathBuf>,
    /// `NORB,NALPHA,NBETA` instead of an FCIDUMP (count only).
    #[arg(long, value_name = "NORB,NA,NB", conflicts_with = "fcidump")]
    pub sector: Option<String>,
    #[arg(long)]
    pub count_only: bool,
    #[arg(long, default_value_t = DEFAULT_FCI_LIMIT)]
    pub limit: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Lines of `label path [reference-energy]`; paths relative to the manifest.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(required = true)]
    pub results: Vec<PathBuf>,
    /// Reference energy; defaults to each run's `reference_energy`.
    #[arg(long, allow_negative_numbers = true)]
    pub reference: Option<f64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Sizes the global worker pool from `HIVQE_THREADS`.
pub fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("HIVQE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("HIVQE_THREADS={v} is not a thread count")))?;
    // a second initialization in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Fci(a) => cmd_fci(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn override_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Defaults, then the config file, then `--set`, then `--seed`.
pub fn load_config(args: &ConfigArgs) -> Result<RunConfig> {
    let Value::Object(mut map) = serde_json::to_value(RunConfig::default())? else {
        unreachable!("RunConfig serializes to an object")
    };
    if let Some(path) = &args.config {
        match serde_json::from_str::<Value>(&read(path)?)? {
            Value::Object(file) => map.extend(file),
            _ => return Err(Error::Config(format!("{}: expected a JSON object", path.display()))),
        }
    }
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set `{kv}`: expected KEY=VALUE")))?;
        map.insert(k.trim().to_string(), override_value(v.trim()));
    }
    if let Some(seed) = args.seed {
        map.insert("seed".into(), json!(seed));
    }
    serde_json::from_value(Value::Object(map)).map_err(|e| Error::Config(e.to_string()))
}

fn status_code(status: RunStatus) -> u8 {
    match status {
        RunStatus::Converged => 0,
        RunStatus::Stalled | RunStatus::MaxIterations => 2,
    }
}

/// The `result.json` document. Contains no timing data.
pub fn result_json(r: &RunResult) -> Value {
    let abs_error = r.config.reference_energy.map(|e| (r.energy - e).abs());
    json!({
        "energy": r.energy,
        "e_corr": r.e_corr,
        "e_hf": r.e_hf,
        "n_dets": r.n_dets(),
        "converged": r.converged(),
        "status": r.status,
        "iterations": r.iterations,
        "dipole": r.dipole,
        "n_orb": r.sector.n_orb,
        "n_alpha": r.sector.n_alpha,
        "n_beta": r.sector.n_beta,
        "n_qubits": r.sector.n_qubits(),
        "abs_error": abs_error,
        "config": r.config,
        "seed": r.config.seed,
    })
}

pub fn trace_csv(r: &RunResult) -> String {
    let probe = |e: Option<f64>| e.map(|x| format!("{x:.8}")).unwrap_or_default();
    let mut out =
        String::from("iter,E_cum,E_iter,n_dets_sampled,n_dets_valid,n_dets_cum,n_dets_post_screen,wall_ms_sample,wall_ms_diag,theta_norm,e_plus,e_minus\n");
    for t in &r.trace {
        let _ = writeln!(
            out,
            "{},{:.8},{:.8},{},{},{},{},{:.3},{:.3},{:.8},{},{}",
            t.iter,
            t.e_cum,
            t.e_iter,
            t.n_dets_sampled,
            t.n_dets_valid,
            t.n_dets_cum,
            t.n_dets_post_screen,
            t.wall_ms_sample,
            t.wall_ms_diag,
            t.theta_norm,
            probe(t.e_plus),
            probe(t.e_minus)
        );
    }
    out
}

/// `alpha|beta amplitude` per line, in subspace order.
pub fn subspace_txt(r: &RunResult) -> String {
    let mut out = String::new();
    for (d, c) in r.dets.iter().zip(&r.amplitudes) {
        let _ = writeln!(out, "{} {:+.16e}", d.render(r.sector.n_orb), c);
    }
    out
}

fn cmd_run(a: &RunArgs) -> Result<u8> {
    let cfg = load_config(&a.cfg)?;
    let ints = IntegralSet::from_path(&a.fcidump)?;
    let dipole = match &a.dipole {
        Some(p) => Some(DipoleIntegrals::from_path(p, ints.n_orb())?),
        None => None,
    };
    let r = run_hivqe(&cfg, &ints, dipole.as_ref())?;
    ensure_dir(&a.out)?;
    let mut doc = serde_json::to_string_pretty(&result_json(&r))?;
    doc.push('\n');
    write(&a.out.join("result.json"), &doc)?;
    write(&a.out.join("trace.csv"), &trace_csv(&r))?;
    write(&a.out.join("subspace.txt"), &subspace_txt(&r))?;
    println!(
        "E = {:.8}  E_HF = {:.8}  E_corr = {:.8}  dets = {}  iterations = {}  status = {:?}",
        r.energy,
        r.e_hf,
        r.e_corr,
        r.n_dets(),
        r.iterations,
        r.status
    );
    if let Some(mu) = r.dipole {
        println!("dipole (D) = ({:.8}, {:.8}, {:.8})", mu[0], mu[1], mu[2]);
    }
    Ok(status_code(r.status))
}

fn count_json(n: &BigUint) -> Value {
    match u64::try_from(n) {
        Ok(v) => json!(v),
        Err(_) => json!(n.to_string()),
    }
}

fn parse_sector(text: &str) -> Result<Sector> {
    let parts: Vec<usize> = text
        .split(',')
        .map(|t| t.trim().parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("--sector `{text}`: expected NORB,NALPHA,NBETA")))?;
    match parts[..] {
        [n, a, b] => Sector::new(n, a, b),
        _ => Err(Error::Config(format!("--sector `{text}`: expected three integers"))),
    }
}

fn cmd_fci(a: &FciArgs) -> Result<u8> {
    let ints = match &a.fcidump {
        Some(p) => Some(IntegralSet::from_path(p)?),
        None => None,
    };
    let sector = match (&ints, &a.sector) {
        (Some(s), _) => Sector::of(s),
        (None, Some(text)) => parse_sector(text)?,
        (None, None) => return Err(Error::Config("--fcidump or --sector is required".into())),
    };
    let mut doc = Map::new();
    doc.insert("n_orb".into(), json!(sector.n_orb));
    doc.insert("n_alpha".into(), json!(sector.n_alpha));
    doc.insert("n_beta".into(), json!(sector.n_beta));
    doc.insert("sector_size".into(), count_json(&sector.size()));
    match (&ints, a.count_only) {
        (Some(s), false) => {
            let fci = fci_ground(s, a.limit)?;
            let e_hf = hartree_fock_energy(s);
            doc.insert("energy".into(), json!(fci.energy));
            doc.insert("e_hf".into(), json!(e_hf));
            doc.insert("e_corr".into(), json!(fci.energy - e_hf));
        }
        (None, false) => return Err(Error::Config("--sector requires --count-only".into())),
        _ => {}
    }
    println!("{}", serde_json::to_string_pretty(&Value::Object(doc))?);
    Ok(0)
}

/// Parses a sweep manifest into (label, path, reference) entries.
pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<(String, PathBuf, Option<f64>)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let parse_err = |msg: &str| Error::Parse {
            line: i + 1,
            msg: msg.to_string(),
        };
        let (label, path, reference) = match toks[..] {
            [l, p] => (l, p, None),
            [l, p, e] => (
                l,
                p,
                Some(e.parse::<f64>().map_err(|_| parse_err("bad reference energy"))?),
            ),
            _ => return Err(parse_err("expected `label path [reference]`")),
        };
        out.push((label.to_string(), base.join(path), reference));
    }
    Ok(out)
}

pub fn pes_csv(points: &[PesPoint]) -> String {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.8e}")).unwrap_or_default();
    let mut out = String::from("label,E_hf,E_hivqe,E_ref,abs_error\n");
    for p in points {
        let e_ref = p.e_ref.map(|x| format!("{x:.8}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{:.8},{:.8},{},{}",
            p.label,
            p.e_hf,
            p.e_hivqe,
            e_ref,
            opt(p.abs_error)
        );
    }
    out
}

fn cmd_sweep(a: &SweepArgs) -> Result<u8> {
    let cfg = load_config(&a.cfg)?;
    let base = a.manifest.parent().unwrap_or(Path::new("."));
    let entries = parse_manifest(&read(&a.manifest)?, base)?;
    let points = entries
        .into_iter()
        .map(|(label, path, e)| Ok((label, IntegralSet::from_path(&path)?, e)))
        .collect::<Result<Vec<_>>>()?;
    let table = run_pes_sweep(&points, &cfg)?;
    ensure_dir(&a.out)?;
    let csv = pes_csv(&table);
    write(&a.out.join("pes.csv"), &csv)?;
    print!("{csv}");
    let all_converged = table.iter().all(|p| p.status == RunStatus::Converged);
    Ok(if all_converged { 0 } else { 2 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub source: String,
    pub m: usize,
    pub k: usize,
    pub n_qubits: usize,
    pub n_dets: usize,
    pub energy: f64,
    pub e_ref: Option<f64>,
    pub abs_error: Option<f64>,
}

/// One row per result document, ordered by `m` (stable).
pub fn report_rows(docs: &[(String, Value)], reference: Option<f64>) -> Result<Vec<ReportRow>> {
    let mut rows = docs
        .iter()
        .map(|(source, v)| {
            let missing = |key: &str| Error::Config(format!("{source}: missing or invalid `{key}`"));
            let num = |key: &str| v.get(key).and_then(Value::as_f64).ok_or_else(|| missing(key));
            let int = |key: &str| v.get(key).and_then(Value::as_u64).ok_or_else(|| missing(key));
            let cfg_int = |key: &str| {
                v.get("config")
                    .and_then(|c| c.get(key))
                    .and_then(Value::as_u64)
                    .ok_or_else(|| missing(key))
            };
            let energy = num("energy")?;
            let e_ref = reference.or_else(|| v.get("config")?.get("reference_energy")?.as_f64());
            let n_qubits = match v.get("n_qubits").and_then(Value::as_u64) {
                Some(q) => q as usize,
                None => 2 * int("n_orb")? as usize,
            };
            Ok(ReportRow {
                source: source.clone(),
                m: cfg_int("m")? as usize,
                k: cfg_int("k")? as usize,
                n_qubits,
                n_dets: int("n_dets")? as usize,
                energy,
                e_ref,
                abs_error: e_ref.map(|e| (energy - e).abs()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| r.m);
    Ok(rows)
}

pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("source,m,k,n_qubits,n_dets,energy,E_ref,abs_error\n");
    for r in rows {
        let e_ref = r.e_ref.map(|x| format!("{x:.8}")).unwrap_or_default();
        let err = r.abs_error.map(|x| format!("{x:.8e}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.8},{},{}",
            r.source, r.m, r.k, r.n_qubits, r.n_dets, r.energy, e_ref, err
        );
    }
    out
}

/// Whitespace-separated columns; `?` marks a missing value.
pub fn report_dat(rows: &[ReportRow]) -> String {
    let mut out = String::from("# m k n_qubits n_dets energy abs_error\n");
    for r in rows {
        let err = r.abs_error.map(|x| format!("{x:.8e}")).unwrap_or_else(|| "?".into());
        let _ = writeln!(
            out,
            "{} {} {} {} {:.8} {}",
            r.m, r.k, r.n_qubits, r.n_dets, r.energy, err
        );
    }
    out
}

fn cmd_report(a: &ReportArgs) -> Result<u8> {
    let docs = a
        .results
        .iter()
        .map(|p| Ok((p.display().to_string(), serde_json::from_str(&read(p)?)?)))
        .collect::<Result<Vec<(String, Value)>>>()?;
    let rows = report_rows(&docs, a.reference)?;
    ensure_dir(&a.out)?;
    let csv = report_csv(&rows);
    write(&a.out.join("report.csv"), &csv)?;
    write(&a.out.join("report.dat"), &report_dat(&rows))?;
    print!("{csv}");
    Ok(0)
}
