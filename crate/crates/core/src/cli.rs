//! Command-line driver: `simulate`, `ground-state` and `extract`.
//!
//! Exit codes: 0 success, 1 I/O, 2 configuration or plan, 3 solver,
//! 4 unreadable map, 5 extraction failed, 64 usage.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{
    detect_peaks, fit_diamond, fit_family_slopes, label_families, vertex_splitting, DiamondFit, ExtractionReport,
    PeakOptions, ScanAxis,
};
use crate::config::{parse_device, PlanConfig};
use crate::device::{DeviceSpec, DotIndex, Terminal};
use crate::error::Error;
use crate::manifest::{sidecar_path, RunManifest};
use crate::sweep::{ground_state_map_with_jobs, read_map_csv, run_sweep_with_jobs, MapFile, SweepPlan};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_MAP: i32 = 4;
pub const EXIT_EXTRACTION: i32 = 5;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(
    name = "donor-dot",
    version,
    about = "Donor + quantum dot single-electron transport simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sweep two voltages and write current or conductance as CSV.
    Simulate(SweepArgs),
    /// Write the (N, M) ground state over two gate voltages as CSV.
    GroundState(SweepArgs),
    /// Fit parameters from a map written by this tool.
    Extract(ExtractArgs),
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Device file (TOML). Defaults to the built-in reference device.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Plan file (TOML); flags below override its entries.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Output CSV; the manifest goes to `<out>.manifest.json`.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Temperature override (K).
    #[arg(long)]
    temperature: Option<f64>,
    /// Mutual capacitance override (aF).
    #[arg(long)]
    cmutual: Option<f64>,
    /// First axis as name:start:stop:steps.
    #[arg(long)]
    axis1: Option<String>,
    /// Second axis as name:start:stop:steps.
    #[arg(long)]
    axis2: Option<String>,
    /// current | conductance | log10_conductance
    #[arg(long)]
    observable: Option<String>,
    /// Fixed terminal voltage as name=mV; repeatable.
    #[arg(long, value_name = "NAME=MV")]
    fixed: Vec<String>,
    /// Drain step (mV) for numerical conductance.
    #[arg(long)]
    delta_vd: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Diamond,
    Backgate,
    Honeycomb,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Island {
    Donor,
    Dot,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    /// Map CSV.
    map: PathBuf,
    #[arg(long, value_enum)]
    mode: Mode,
    /// Device for closed-form predictions when the map has no manifest.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Diamond between zero-bias transitions INDEX and INDEX + 1.
    #[arg(long, default_value_t = 0)]
    index: usize,
    /// Island the diamond belongs to (default: the one not frozen).
    #[arg(long, value_enum)]
    island: Option<Island>,
}

/// A failure with its exit code and a short machine-readable kind.
#[derive(Debug)]
struct Failure {
    code: i32,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn new(code: i32, kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            kind,
            message: message.into(),
        }
    }
}

fn classify(e: Error) -> Failure {
    let code = match &e {
        Error::Io(_) => EXIT_IO,
        Error::Config(_) | Error::Plan(_) | Error::InvalidParameter { .. } => EXIT_CONFIG,
        Error::Map(_) => EXIT_MAP,
        Error::Extraction(_) => EXIT_EXTRACTION,
        _ => EXIT_SOLVER,
    };
    let kind = kind_of(code);
    let text = e.to_string();
    let message = text
        .strip_prefix(kind)
        .and_then(|m| m.strip_prefix(": "))
        .unwrap_or(&text);
    Failure::new(code, kind, message)
}

fn kind_of(code: i32) -> &'static str {
    match code {
        EXIT_IO => "io",
        EXIT_CONFIG => "config",
        EXIT_MAP => "map",
        EXIT_EXTRACTION => "extraction",
        EXIT_USAGE => "usage",
        _ => "solver",
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new(EXIT_IO, "io", format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::new(EXIT_IO, "io", format!("{}: {e}", path.display())))
}

fn parse_fixed(item: &str) -> Result<(Terminal, f64), Failure> {
    let bad = || Failure::new(EXIT_USAGE, "usage", format!("--fixed `{item}` is not name=mV"));
    let (name, value) = item.split_once('=').ok_or_else(bad)?;
    let t = Terminal::from_name(name.trim()).ok_or_else(bad)?;
    let v = value.trim().parse::<f64>().map_err(|_| bad())?;
    Ok((t, v))
}

/// Device and plan after config file, plan file and flags, in that order.
fn resolve(args: &SweepArgs) -> Result<(DeviceSpec, SweepPlan), Failure> {
    let device = match &args.config {
        Some(p) => parse_device(&read(p)?).map_err(classify)?,
        None => DeviceSpec::table1(),
    };
    let mut pc = match &args.plan {
        Some(p) => PlanConfig::parse(&read(p)?).map_err(classify)?,
        None => PlanConfig::empty(),
    };
    if args.axis1.is_some() {
        pc.axis1 = args.axis1.clone();
    }
    if args.axis2.is_some() {
        pc.axis2 = args.axis2.clone();
    }
    if args.observable.is_some() {
        pc.observable = args.observable.clone();
    }
    if args.delta_vd.is_some() {
        pc.delta_vd = args.delta_vd;
    }
    if args.temperature.is_some() {
        pc.temperature_k = args.temperature;
    }
    if args.cmutual.is_some() {
        pc.c_mutual = args.cmutual;
    }
    for item in &args.fixed {
        let (t, v) = parse_fixed(item)?;
        let f = &mut pc.fixed;
        match t {
            Terminal::Source => f.v_source = Some(v),
            Terminal::Drain => f.v_drain = Some(v),
            Terminal::Gate => f.v_gate = Some(v),
            Terminal::Back => f.v_back = Some(v),
        }
    }
    let device = pc.apply_overrides(&device).map_err(classify)?;
    let plan = pc.to_plan().map_err(classify)?;
    Ok((device, plan))
}

fn jobs(args: &SweepArgs) -> Result<Option<usize>, Failure> {
    match args.jobs {
        Some(0) => Err(Failure::new(EXIT_USAGE, "usage", "--jobs must be at least 1")),
        j => Ok(j),
    }
}

fn simulate(args: &SweepArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let (device, plan) = resolve(args)?;
    let map = run_sweep_with_jobs(&device, &plan, jobs(args)?).map_err(classify)?;
    write(&args.out, &map.to_csv())?;
    write(
        &sidecar_path(&args.out),
        &RunManifest::new("simulate", &device, &plan).to_json(),
    )?;
    let _ = writeln!(out, "wrote {} ({} cells)", args.out.display(), plan.cells());
    Ok(())
}

fn ground_state(args: &SweepArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let (device, plan) = resolve(args)?;
    let map = ground_state_map_with_jobs(&device, &plan, jobs(args)?).map_err(classify)?;
    write(&args.out, &map.to_csv())?;
    write(
        &sidecar_path(&args.out),
        &RunManifest::new("ground_state", &device, &plan).to_json(),
    )?;
    let _ = writeln!(out, "wrote {} ({} cells)", args.out.display(), plan.cells());
    Ok(())
}

fn extract(args: &ExtractArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let text = read(&args.map)?;
    let map = read_map_csv(&text).map_err(classify)?;
    let sidecar = sidecar_path(&args.map);
    let manifest = if sidecar.exists() {
        Some(RunManifest::from_json(&read(&sidecar)?).map_err(classify)?)
    } else {
        None
    };
    let device = match (&args.config, &manifest) {
        (Some(p), _) => Some(parse_device(&read(p)?).map_err(classify)?),
        (None, Some(m)) => Some(m.device_spec().map_err(classify)?),
        (None, None) => None,
    };
    let fixed = manifest.as_ref().map(|m| m.plan.fixed).unwrap_or_default();
    let wrong = |want: &str| Failure::new(EXIT_EXTRACTION, "extraction", format!("mode needs {want}"));
    let report = match (args.mode, &map) {
        (Mode::Diamond, MapFile::Observable(m)) => {
            let fit = fit_diamond(m, args.index).map_err(classify)?;
            let island = match args.island {
                Some(Island::Donor) => Some(DotIndex::Donor),
                Some(Island::Dot) => Some(DotIndex::Dot),
                None => device
                    .as_ref()
                    .and_then(|d| conducting_island(d).or_else(|| nearest_island(d, &fit))),
            };
            let spec = match (&device, island) {
                (Some(d), Some(i)) => Some(d.island(i)),
                _ => None,
            };
            ExtractionReport::diamond(&fit, args.index, spec)
        }
        (Mode::Backgate, MapFile::Observable(m)) => {
            let scan = match (m.plan.axis1.terminal, m.plan.axis2.terminal) {
                (Terminal::Gate, _) => ScanAxis::Axis1,
                (_, Terminal::Gate) => ScanAxis::Axis2,
                _ => return Err(wrong("a map with a v_gate axis")),
            };
            let loci = detect_peaks(m, scan, &PeakOptions::default()).map_err(classify)?;
            let mut fit = fit_family_slopes(&loci).map_err(classify)?;
            if let Some(d) = &device {
                label_families(&mut fit, d).map_err(classify)?;
            }
            ExtractionReport::backgate(&fit, device.as_ref())
        }
        (Mode::Honeycomb, MapFile::GroundState(g)) => {
            let v = vertex_splitting(g).map_err(classify)?;
            ExtractionReport::honeycomb(&v, device.as_ref(), &fixed)
        }
        (Mode::Honeycomb, _) => return Err(wrong("a ground-state map")),
        (_, MapFile::GroundState(_)) => return Err(wrong("a current or conductance map")),
    };
    let _ = write!(out, "{report}");
    Ok(())
}

/// The only island whose occupancy can change, if exactly one can.
fn conducting_island(d: &DeviceSpec) -> Option<DotIndex> {
    let free: Vec<DotIndex> = DotIndex::ALL
        .into_iter()
        .filter(|&i| d.island(i).window().len() > 1)
        .collect();
    match free.as_slice() {
        [one] => Some(*one),
        _ => None,
    }
}

/// Island whose closed-form diamond slopes are closest to the fitted ones.
fn nearest_island(d: &DeviceSpec, fit: &DiamondFit) -> Option<DotIndex> {
    let (p, n) = (fit.positive_slope?.value, fit.negative_slope?.value);
    let distance = |i: DotIndex| {
        let (sp, sn) = d.island(i).caps().diamond_slopes().ok()?;
        Some((p - sp).abs() + (n - sn).abs())
    };
    DotIndex::ALL
        .into_iter()
        .filter_map(|i| Some((i, distance(i)?)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
}

/// Runs the command line `args` (including the program name), writing
/// results to `out` and the error line to `err`; returns the exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let msg = e.to_string();
                    let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
                    let _ = writeln!(err, "error: usage: {first}");
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a, out),
        Command::GroundState(a) => ground_state(a, out),
        Command::Extract(a) => extract(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let message = f.message.split_whitespace().collect::<Vec<_>>().join(" ");
            let _ = writeln!(err, "error: {}: {message}", f.kind);
            f.code
        }
    }
}

/// Runs with the process arguments and standard streams.
pub fn run() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_with(
            std::iter::once("donor-dot").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_64() {
        let (code, _, err) = call(&["simulate"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.starts_with("error: usage:"));
        assert_eq!(err.lines().count(), 1);
        assert_eq!(call(&["frobnicate"]).0, EXIT_USAGE);
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = call(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("simulate"));
    }

    #[test]
    fn fixed_parsing() {
        assert_eq!(parse_fixed("v_back=5").unwrap(), (Terminal::Back, 5.0));
        assert!(parse_fixed("v_back").is_err());
        assert!(parse_fixed("v_front=1").is_err());
    }

    #[test]
    fn missing_config_is_io() {
        let (code, _, err) = call(&["simulate", "--config", "/nonexistent/x.device", "--out", "/tmp/x.csv"]);
        assert_eq!(code, EXIT_IO);
        assert!(err.starts_with("error: io:"));
    }

    #[test]
    fn conducting_island_detection() {
        let d = DeviceSpec::table1();
        assert_eq!(conducting_island(&d), None);
        assert_eq!(
            conducting_island(&d.isolate(DotIndex::Dot).unwrap()),
            Some(DotIndex::Dot)
        );
    }
}
