//! The `socbist` command line.
//!
//! Exit codes: 0 on success, 1 on an internal failure, 2 on bad input.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::core_model::{CoreId, CoreSpec, SocSpec};
use crate::fault_lab::{
    fault_list, fault_simulate, lfsr_sequence, parse_bench, parse_pattern_file, Lfsr, Netlist, Pattern,
};
use crate::hybrid_testgen::{
    find_optimal_nprtp, sweep, CircuitConfig, CircuitOracle, CoverageOracle, Phase1, TatCurvePoint, TestgenError,
};
use crate::power_groups::{enumerate_groups, GroupCatalog};
use crate::scheduler::{
    augment_incomplete, build_schedule, gantt_svg, to_json, to_text, weight, CoreTestState, ScheduleError, ScheduleGraph,
    WeightMode,
};
use crate::soc_io::{curve_from_points, parse_curve, parse_soc_with, serialize_curve};
use crate::units::{Mhz, Power};

#[derive(Debug, Parser)]
#[command(name = "socbist", version, about = "Hybrid BIST test generation and power-constrained SoC test scheduling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the maximal power groups of an SoC.
    Groups {
        #[command(flatten)]
        soc: SocArgs,
        #[arg(long)]
        json: bool,
    },
    /// Find the PRTP count that minimises a core's test time.
    PrtpSearch(PrtpArgs),
    /// Fault-simulate a pattern set on a circuit.
    Faultsim(FaultsimArgs),
    /// Build the concurrent test schedule of an SoC.
    Schedule(ScheduleArgs),
    /// Human-readable summary of an SoC: cores, groups, weights, schedule.
    Report {
        #[command(flatten)]
        soc: SocArgs,
    },
}

#[derive(Debug, Args)]
pub struct SocArgs {
    #[arg(long, value_name = "FILE")]
    pub soc: PathBuf,
    /// Override the file's peak-power budget.
    #[arg(long, value_name = "X")]
    pub pmax: Option<String>,
}

#[derive(Debug, Args)]
pub struct PrtpArgs {
    #[arg(long, value_name = "FILE", conflicts_with = "curve")]
    pub bench: Option<PathBuf>,
    #[arg(long, value_name = "CSV", requires = "core")]
    pub curve: Option<PathBuf>,
    /// SoC file holding the core's clocks and cycle counts.
    #[arg(long, value_name = "SPECFILE")]
    pub core: Option<PathBuf>,
    /// Which core of `--core` to use.
    #[arg(long, default_value_t = 1)]
    pub core_id: CoreId,
    #[arg(long)]
    pub min: Option<u64>,
    #[arg(long)]
    pub max: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub granularity: u64,
    /// Faults missed by this many LFSR patterns get phase-1 patterns.
    #[arg(long, value_name = "L", conflicts_with = "no_phase1")]
    pub threshold: Option<u64>,
    /// Two-phase flow: no phase-1 patterns.
    #[arg(long)]
    pub no_phase1: bool,
    /// Evaluate every grid point instead of searching.
    #[arg(long)]
    pub exhaustive: bool,
    #[arg(long, value_name = "OUT")]
    pub emit_curve: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct FaultsimArgs {
    #[arg(long, value_name = "FILE")]
    pub bench: PathBuf,
    /// Hex pattern file, one vector per line.
    #[arg(long, value_name = "HEXFILE", required_unless_present = "lfsr", conflicts_with = "lfsr")]
    pub patterns: Option<PathBuf>,
    /// LFSR source as `taps,seed,n`; taps is the feedback polynomial.
    #[arg(long, value_name = "TAPS,SEED,N")]
    pub lfsr: Option<String>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    #[command(flatten)]
    pub soc: SocArgs,
    /// Fill incomplete nodes with extra BIST work.
    #[arg(long, requires = "curves")]
    pub augment: bool,
    /// Directory of coverage curves named `core<ID>.csv`.
    #[arg(long, value_name = "DIR")]
    pub curves: Option<PathBuf>,
    /// Output file; the format follows the extension (.svg, .json, .txt).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Internal(String),
}

type CliResult<T> = Result<T, CliError>;

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn schedule_err(e: ScheduleError) -> CliError {
    match e {
        ScheduleError::Stuck => CliError::Internal(e.to_string()),
        other => input(other),
    }
}

/// Runs the CLI with the process's standard streams.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = out.write_all(text.as_bytes());
            } else {
                let _ = err.write_all(text.as_bytes());
            }
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        let _ = writeln!(err, "error: {e}");
        return 2;
    }
    let result = match cli.command {
        Command::Groups { soc, json } => groups(&soc, json),
        Command::PrtpSearch(a) => prtp_search(&a),
        Command::Faultsim(a) => faultsim(&a),
        Command::Schedule(a) => schedule(&a),
        Command::Report { soc } => report(&soc),
    };
    match result {
        Ok(text) => match out.write_all(text.as_bytes()) {
            Ok(()) => 0,
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                1
            }
        },
        Err(CliError::Input(m)) => {
            let _ = writeln!(err, "error: {m}");
            2
        }
        Err(CliError::Internal(m)) => {
            let _ = writeln!(err, "internal error: {m}");
            1
        }
    }
}

/// `SOCBIST_THREADS` sets the worker count; 0 or unset leaves rayon's default.
fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("SOCBIST_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("SOCBIST_THREADS must be a number, got `{v}`"))?;
    if n > 0 {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn load_soc(a: &SocArgs) -> CliResult<SocSpec> {
    let text = read(&a.soc)?;
    let pmax = a.pmax.as_deref().map(Power::parse).transpose().map_err(|e| input(format!("--pmax: {e}")))?;
    parse_soc_with(&text, pmax).map_err(|e| CliError::Input(format!("{}: {e}", a.soc.display())))
}

fn load_catalog(soc: &SocSpec) -> CliResult<GroupCatalog> {
    enumerate_groups(soc).map_err(input)
}

fn groups(a: &SocArgs, json: bool) -> CliResult<String> {
    let soc = load_soc(a)?;
    let cat = load_catalog(&soc)?;
    if json {
        return Ok(serde_json::to_string(&cat).expect("plain data serialises") + "\n");
    }
    Ok(cat.iter().map(|g| format!("{g}\n")).collect())
}

fn load_bench(path: &Path) -> CliResult<Netlist> {
    let name = path.file_stem().map_or("circuit".into(), |s| s.to_string_lossy().into_owned());
    parse_bench(&name, &read(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn spec_core(path: &Path, id: CoreId) -> CliResult<CoreSpec> {
    let soc = parse_soc_with(&read(path)?, None).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    soc.core(id).cloned().ok_or_else(|| input(format!("{}: no core {id}", path.display())))
}

fn testgen_err(e: TestgenError) -> CliError {
    input(e)
}

fn prtp_search(a: &PrtpArgs) -> CliResult<String> {
    let mut out = String::new();
    let mut report = serde_json::Map::new();
    let (core, points, best, calls, fast) = match (&a.bench, &a.curve) {
        (Some(bench), _) => {
            let nl = load_bench(bench)?;
            let core = match &a.core {
                Some(p) => spec_core(p, a.core_id)?,
                None => CoreSpec::scan_core(
                    1,
                    Power::from_units(1),
                    nl.num_pis() as u32,
                    nl.num_ppis() as u32,
                    Mhz::from_units(100),
                    Mhz::from_units(100),
                ),
            };
            let (min, max) = (a.min.unwrap_or(0), a.max.unwrap_or(1024));
            let phase1 = match (a.no_phase1, a.threshold) {
                (true, _) => Phase1::Disabled,
                (false, Some(l)) => Phase1::Threshold(l),
                (false, None) => Phase1::Default,
            };
            let cfg = CircuitConfig { seed: a.seed, phase1, horizon: max, ..Default::default() };
            let oracle = CircuitOracle::new(nl, &cfg).map_err(testgen_err)?;
            let (points, best, calls, fast) = search(&core, &oracle, min, max, a)?;
            let n = best.n_prtp;
            let faults = oracle.faults().len();
            let mut all: Vec<Pattern> = oracle.phase1_patterns().to_vec();
            all.extend(oracle.prtp_patterns(n));
            all.extend(oracle.phase2_patterns(n).map_err(testgen_err)?);
            let detected = fault_simulate(oracle.netlist(), &all, oracle.faults()).map_err(input)?.len();
            let untestable = oracle.undetected(n).map_err(testgen_err)?;
            out += &format!(
                "circuit {} inputs {} faults {}\n",
                oracle.netlist().name,
                oracle.netlist().input_width(),
                faults
            );
            out += &format!("coverage {detected}/{faults} ({})\n", percent(detected, faults));
            if !untestable.is_empty() {
                let names: Vec<String> = untestable.iter().map(|f| f.describe(oracle.netlist())).collect();
                out += &format!("undetected {}\n", names.join(" "));
            }
            report.insert("faults".into(), json!(faults));
            report.insert("detected".into(), json!(detected));
            (core, points, best, calls, fast)
        }
        (None, Some(curve)) => {
            let path = a.core.as_ref().expect("clap requires --core with --curve");
            let core = spec_core(path, a.core_id)?;
            let oracle = parse_curve(&read(curve)?).map_err(|e| CliError::Input(format!("{}: {e}", curve.display())))?;
            let rows = oracle.rows();
            let min = a.min.unwrap_or(rows[0].n_prtp);
            let max = a.max.unwrap_or(rows[rows.len() - 1].n_prtp);
            let (points, best, calls, fast) = search(&core, &oracle, min, max, a)?;
            (core, points, best, calls, fast)
        }
        (None, None) => return Err(input("one of --bench or --curve is required")),
    };
    if let Some(path) = &a.emit_curve {
        let curve = curve_from_points(&points).map_err(testgen_err)?;
        write_file(path, &serialize_curve(&curve))?;
    }
    let ts = best.test_set;
    if a.json {
        report.insert("core".into(), json!(core.id));
        report.insert("n_prtp".into(), json!(ts.n_prtp));
        report.insert("n_dtp_phase1".into(), json!(ts.n_dtp_phase1));
        report.insert("n_dtp_phase2".into(), json!(ts.n_dtp_phase2));
        report.insert("tat_us".into(), json!(best.tat.as_f64()));
        report.insert("oracle_calls".into(), json!(calls));
        report.insert("fast_path".into(), json!(fast));
        return Ok(serde_json::to_string_pretty(&report).expect("plain data serialises") + "\n");
    }
    out += &format!(
        "phase1 {} prtp {} phase2 {}\ntat {} us\noracle calls {}{}\n",
        ts.n_dtp_phase1,
        ts.n_prtp,
        ts.n_dtp_phase2,
        best.tat,
        calls,
        if fast { " (max beats min)" } else { "" }
    );
    Ok(out)
}

/// Search or sweep. Returns the points to emit as a curve (the full sweep
/// when one was run), the optimum, the oracle call count and whether the
/// max-beats-min shortcut fired.
fn search(
    core: &CoreSpec,
    oracle: &dyn CoverageOracle,
    min: u64,
    max: u64,
    a: &PrtpArgs,
) -> CliResult<(Vec<TatCurvePoint>, TatCurvePoint, usize, bool)> {
    let swept = if a.exhaustive || a.emit_curve.is_some() {
        Some(sweep(core, oracle, min, max, a.granularity).map_err(testgen_err)?)
    } else {
        None
    };
    if let (true, Some(points)) = (a.exhaustive, &swept) {
        let best = *points.iter().min_by_key(|p| (p.tat, p.n_prtp)).expect("non-empty sweep");
        return Ok((points.clone(), best, points.len(), false));
    }
    let s = find_optimal_nprtp(core, oracle, min, max, a.granularity).map_err(testgen_err)?;
    Ok((swept.unwrap_or(s.probes), s.best, s.oracle_calls, s.fast_path))
}

fn percent(n: usize, d: usize) -> String {
    if d == 0 {
        return "100.00%".into();
    }
    let bp = (n as u128 * 10_000 + d as u128 / 2) / d as u128;
    format!("{}.{:02}%", bp / 100, bp % 100)
}

fn parse_number(text: &str) -> Result<u128, String> {
    let t = text.trim();
    let r = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(hex) => u128::from_str_radix(hex, 16),
        None => t.parse(),
    };
    r.map_err(|_| format!("`{t}` is not a number"))
}

fn lfsr_patterns(spec: &str, width: usize) -> CliResult<Vec<Pattern>> {
    let fields: Vec<&str> = spec.split(',').collect();
    let [taps, seed, n] = fields[..] else {
        return Err(input("--lfsr expects taps,seed,n"));
    };
    let taps = parse_number(taps).map_err(|e| input(format!("--lfsr taps: {e}")))?;
    let seed = parse_number(seed).map_err(|e| input(format!("--lfsr seed: {e}")))?;
    let n = parse_number(n).map_err(|e| input(format!("--lfsr n: {e}")))?;
    let seed = u64::try_from(seed).map_err(|_| input("--lfsr seed does not fit in 64 bits"))?;
    let n = usize::try_from(n).map_err(|_| input("--lfsr n is too large"))?;
    let lfsr = Lfsr::new(taps, seed).map_err(|e| input(format!("--lfsr: {e}")))?;
    Ok(lfsr_sequence(&lfsr, n, width))
}

fn faultsim(a: &FaultsimArgs) -> CliResult<String> {
    let nl = load_bench(&a.bench)?;
    let patterns = match (&a.patterns, &a.lfsr) {
        (Some(p), _) => parse_pattern_file(&read(p)?, nl.input_width())
            .map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?,
        (None, Some(spec)) => lfsr_patterns(spec, nl.input_width())?,
        (None, None) => return Err(input("one of --patterns or --lfsr is required")),
    };
    let faults = fault_list(&nl);
    let detected = fault_simulate(&nl, &patterns, &faults).map_err(input)?;
    if a.json {
        let v = json!({
            "circuit": nl.name,
            "patterns": patterns.len(),
            "faults": faults.len(),
            "detected": detected.len(),
            "coverage_percent": percent(detected.len(), faults.len()).trim_end_matches('%'),
        });
        return Ok(serde_json::to_string_pretty(&v).expect("plain data serialises") + "\n");
    }
    Ok(format!(
        "circuit {} patterns {}\ndetected {}/{}\ncoverage {}\n",
        nl.name,
        patterns.len(),
        detected.len(),
        faults.len(),
        percent(detected.len(), faults.len())
    ))
}

fn load_curves(dir: &Path, soc: &SocSpec) -> CliResult<BTreeMap<CoreId, crate::hybrid_testgen::CurveOracle>> {
    let mut map = BTreeMap::new();
    for id in soc.core_ids() {
        let path = dir.join(format!("core{id}.csv"));
        if path.exists() {
            let c = parse_curve(&read(&path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            map.insert(id, c);
        }
    }
    if map.is_empty() && !dir.is_dir() {
        return Err(input(format!("{}: not a directory", dir.display())));
    }
    Ok(map)
}

fn build(a: &ScheduleArgs, soc: &SocSpec, cat: &GroupCatalog) -> CliResult<ScheduleGraph> {
    let g = build_schedule(soc, cat).map_err(schedule_err)?;
    if !a.augment {
        return Ok(g);
    }
    let dir = a.curves.as_ref().expect("clap requires --curves with --augment");
    let curves = load_curves(dir, soc)?;
    let oracles: BTreeMap<CoreId, &dyn CoverageOracle> =
        curves.iter().map(|(&id, c)| (id, c as &dyn CoverageOracle)).collect();
    Ok(augment_incomplete(soc, cat, &g, &oracles).map_err(schedule_err)?.graph)
}

fn schedule(a: &ScheduleArgs) -> CliResult<String> {
    let soc = load_soc(&a.soc)?;
    let cat = load_catalog(&soc)?;
    let g = build(a, &soc, &cat)?;
    if let Some(path) = &a.out {
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
        let body = match ext.as_str() {
            "svg" => gantt_svg(&g),
            "json" => to_json(&g),
            "txt" => to_text(&g),
            _ => return Err(input(format!("{}: output must end in .svg, .json or .txt", path.display()))),
        };
        write_file(path, &body)?;
        return Ok(format!("wrote {} ({} nodes, total {} us)\n", path.display(), g.nodes.len(), g.total_time));
    }
    Ok(if a.json { to_json(&g) } else { to_text(&g) })
}

fn report(a: &SocArgs) -> CliResult<String> {
    let soc = load_soc(a)?;
    let cat = load_catalog(&soc)?;
    let g = build_schedule(&soc, &cat).map_err(schedule_err)?;
    let states = CoreTestState::initial(&soc);
    let mut out = format!("soc {}  pmax {}  cores {}\n\n", soc.name, soc.p_max, soc.cores.len());
    out += "core      pm     T(vd)     T(vp)\n";
    for c in &soc.cores {
        out += &format!("{:>4} {:>7} {:>9} {:>9}\n", c.id, c.p_m.to_string(), c.t_vd.to_string(), c.t_vp.to_string());
    }
    out += "\ngroup            power    weight (ext)   weight (bist)\n";
    for grp in &cat {
        out += &format!(
            "{:<16} {:>5} {:>14} {:>15}\n",
            grp.to_string(),
            grp.power(&soc).to_string(),
            weight(grp, &states, WeightMode::WithExternal).to_string(),
            weight(grp, &states, WeightMode::BistOnly).to_string()
        );
    }
    out += "\nschedule\n";
    out += &to_text(&g);
    out += &format!("\nlongest core {} us, serial {} us\n", soc.max_core_time(), soc.serial_time());
    Ok(out)
}
