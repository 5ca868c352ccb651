//! Command-line driver.
//!
//! Exit codes: 0 success, 1 unreadable input or unwritable output, 2 schema,
//! argument or timing errors, 3 impossible post-selection.

use std::f64::consts::FRAC_PI_4;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::dynamics::CouplingParams;
use crate::error::{Error, Result};
use crate::format_sig15;
use crate::hilbert::{make_space, SpaceDescriptor, StateVector};
use crate::metrics::{metric_report, MetricReport};
use crate::noise::{run_schedule_damped, DampedRunResult, DampingParams};
use crate::protocols::{self, FieldQubit, Gate, ProtocolSpec, Sign};
use crate::schedule::{
    detection_probability_pc, measured_detection_probability, run_schedule, Level, Schedule, ScheduleFile, Units,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_POST_SELECTION: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "cavity-bell", version, about = "Two-mode cavity QED Bell-state and gate simulator")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Composite space as `atom_levels,dim_a,dim_b`
    #[arg(long, global = true, value_name = "A,DA,DB")]
    space: Option<String>,
    /// Couplings as `g1,g2,mu1,mu2`
    #[arg(long, global = true, value_name = "G1,G2,MU1,MU2")]
    params: Option<String>,
    /// Cavity decay rates as `kappa_a,kappa_b`
    #[arg(long, global = true, value_name = "KA,KB")]
    damping: Option<String>,
    /// Integrator step for damped runs
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Couplings in rad/s and durations in seconds (required for nonzero damping)
    #[arg(long, global = true)]
    physical: bool,
    /// Read angle arguments in degrees
    #[arg(long, global = true)]
    degrees: bool,
    /// Write the constructed schedule file here
    #[arg(long, global = true, value_name = "PATH")]
    emit_schedule: Option<PathBuf>,
    /// Write fidelity-vs-time samples of a damped run here (CSV)
    #[arg(long, global = true, value_name = "PATH")]
    samples: Option<PathBuf>,
    /// Write results here instead of standard output
    #[arg(long, short, global = true, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a schedule file and print a JSON report
    Simulate { file: PathBuf },
    /// Build and run a named protocol: bell-psi, bell-phi, cnot, hadamard, swap
    Protocol {
        name: String,
        #[command(flatten)]
        opts: ProtocolArgs,
    },
    /// Sweep `pc` (detection probability vs time) or `fidelity` (vs damping scale) to CSV
    Sweep {
        quantity: String,
        #[arg(long, allow_hyphen_values = true)]
        start: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        stop: Option<f64>,
        #[arg(long, default_value_t = 11)]
        steps: usize,
        /// Preparation angle of the `pc` sweep
        #[arg(long, allow_hyphen_values = true)]
        theta: Option<f64>,
        /// Protocol whose fidelity is swept
        #[arg(long, default_value = "bell-psi")]
        protocol: String,
    },
    /// Print the truth table of a gate as CSV
    TruthTable { gate: String },
}

#[derive(Debug, Args)]
struct ProtocolArgs {
    /// Preparation angle, cos θ|a⟩ + e^{iφ} sin θ|c⟩ (default π/4)
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    /// Preparation phase (default 0)
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<f64>,
    /// Odd multiple of π/2 for the mode-A window
    #[arg(long, default_value_t = 1)]
    m: u32,
    /// Odd multiple of π/2 for the mode-B window
    #[arg(long, default_value_t = 1)]
    n: u32,
    /// Bell-Φ sign to post-select
    #[arg(long, value_enum, default_value_t = SignArg::Plus)]
    sign: SignArg,
    /// Control level, `g` or `e`
    #[arg(long, default_value = "g")]
    control: String,
    /// Target (or swap direction), `10` or `01`
    #[arg(long, default_value = "10")]
    target: String,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SignArg {
    Plus,
    Minus,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub id: String,
    pub success_probability: f64,
    pub state: StateVector,
    pub metrics: MetricReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub damped: Option<DampedReport>,
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct DampedReport {
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub dt: f64,
    pub success_probability: f64,
    pub fidelity: f64,
    pub trace: f64,
    pub purity: f64,
    pub min_eigenvalue: f64,
}

impl DampedReport {
    fn new(d: &DampingParams, run: &DampedRunResult) -> Self {
        DampedReport {
            kappa_a: d.kappa_a,
            kappa_b: d.kappa_b,
            dt: d.dt,
            success_probability: run.success_probability,
            fidelity: run.fidelity,
            trace: run.final_rho.trace(),
            purity: run.final_rho.purity(),
            min_eigenvalue: run.final_rho.min_eigenvalue(),
        }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => EXIT_IO,
        Error::ImpossiblePostSelection { .. } => EXIT_POST_SELECTION,
        _ => EXIT_INVALID,
    }
}

pub fn run() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(rendered.as_bytes()) } else { out.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(text) => match &cli.global.output {
            Some(path) => match std::fs::write(path, text) {
                Ok(()) => EXIT_OK,
                Err(e) => {
                    let _ = writeln!(err, "error: cannot write {}: {e}", path.display());
                    EXIT_IO
                }
            },
            None => match out.write_all(text.as_bytes()) {
                Ok(()) => EXIT_OK,
                Err(_) => EXIT_IO,
            },
        },
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<String> {
    let g = &cli.global;
    match &cli.command {
        Command::Simulate { file } => cmd_simulate(g, file),
        Command::Protocol { name, opts } => cmd_protocol(g, name, opts),
        Command::Sweep { quantity, start, stop, steps, theta, protocol } => {
            cmd_sweep(g, quantity, *start, *stop, *steps, *theta, protocol)
        }
        Command::TruthTable { gate } => cmd_truth_table(g, gate),
    }
}

fn parse_list(flag: &str, text: &str, len: usize) -> Result<Vec<f64>> {
    let values = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::InvalidParameter(format!("--{flag} {text:?}: {e}")))?;
    if values.len() != len {
        return Err(Error::InvalidParameter(format!("--{flag} needs {len} comma-separated values, got {text:?}")));
    }
    Ok(values)
}

fn parse_space(text: &str) -> Result<SpaceDescriptor> {
    let dims = text
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::InvalidParameter(format!("--space {text:?}: {e}")))?;
    match dims[..] {
        [a, da, db] => make_space(a, da, db),
        _ => Err(Error::InvalidParameter(format!("--space needs atom_levels,dim_a,dim_b, got {text:?}"))),
    }
}

impl GlobalArgs {
    fn params_or(&self, fallback: CouplingParams) -> Result<CouplingParams> {
        match &self.params {
            Some(text) => {
                let v = parse_list("params", text, 4)?;
                CouplingParams::new(v[0], v[1], v[2], v[3])
            }
            None => Ok(fallback),
        }
    }

    fn space_or(&self, fallback: SpaceDescriptor) -> Result<SpaceDescriptor> {
        self.space.as_deref().map(parse_space).unwrap_or(Ok(fallback))
    }

    fn units(&self) -> Units {
        if self.physical {
            Units::Physical
        } else {
            Units::Dimensionless
        }
    }

    fn angle(&self, value: f64) -> f64 {
        if self.degrees {
            value.to_radians()
        } else {
            value
        }
    }

    /// Damping from `--damping` and `--dt`. Without `--dt` the largest step
    /// allowed for `space` and `params` is used.
    fn damping(&self, space: &SpaceDescriptor, params: &CouplingParams) -> Result<Option<DampingParams>> {
        let Some(text) = &self.damping else {
            if self.dt.is_some() {
                return Err(Error::InvalidParameter("--dt needs --damping".into()));
            }
            return Ok(None);
        };
        let k = parse_list("damping", text, 2)?;
        let dt = match self.dt {
            Some(dt) => dt,
            None => default_step(space, params, k[0], k[1]),
        };
        DampingParams::new(k[0], k[1], dt).map(Some)
    }
}

/// Largest stable step for any window of `space`: Hamiltonian entries are at
/// most `coupling · √(n_max)`.
pub fn default_step(space: &SpaceDescriptor, params: &CouplingParams, kappa_a: f64, kappa_b: f64) -> f64 {
    let n_max = (space.dim_a().max(space.dim_b()) - 1) as f64;
    let probe = DampingParams { kappa_a, kappa_b, dt: 1.0 };
    probe.max_step(params.largest() * n_max.sqrt())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

fn report(
    g: &GlobalArgs,
    id: String,
    sched: &Schedule,
    params: &CouplingParams,
    target: Option<&StateVector>,
    started: Instant,
) -> Result<String> {
    let run = run_schedule(sched, params)?;
    let metrics = metric_report(&run.final_state, target)?;
    let damped = match g.damping(&sched.space, params)? {
        Some(d) => {
            let damped_run = run_schedule_damped(sched, params, &d)?;
            if let Some(path) = &g.samples {
                write_file(path, &damped_run.samples_csv())?;
            }
            Some(DampedReport::new(&d, &damped_run))
        }
        None => None,
    };
    let report = RunReport {
        id,
        success_probability: run.success_probability,
        state: run.final_state,
        metrics,
        damped,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| Error::Schema(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

fn cmd_simulate(g: &GlobalArgs, file: &Path) -> Result<String> {
    let started = Instant::now();
    let text = std::fs::read_to_string(file)?;
    let parsed = ScheduleFile::parse(&text)?;
    let params = g.params_or(parsed.params)?;
    let mut sched = parsed.schedule();
    if g.physical {
        sched.units = Units::Physical;
    }
    if let Some(path) = &g.emit_schedule {
        write_file(path, &ScheduleFile::new(&sched, params).to_json())?;
    }
    let id = file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    report(g, id, &sched, &params, None, started)
}

fn parse_control(text: &str) -> Result<Level> {
    match text {
        "g" => Ok(Level::G),
        "e" => Ok(Level::E),
        other => Err(Error::InvalidParameter(format!("--control must be g or e, got {other:?}"))),
    }
}

fn protocol_spec(g: &GlobalArgs, name: &str, opts: &ProtocolArgs) -> Result<ProtocolSpec> {
    Ok(match name {
        "bell-psi" => ProtocolSpec::BellPsi {
            theta: opts.theta.map(|t| g.angle(t)).unwrap_or(FRAC_PI_4),
            phi: opts.phi.map(|p| g.angle(p)).unwrap_or(0.0),
            m: opts.m,
            n: opts.n,
        },
        "bell-phi" => ProtocolSpec::BellPhi {
            sign: match opts.sign {
                SignArg::Plus => Sign::Plus,
                SignArg::Minus => Sign::Minus,
            },
            m: opts.m,
            n: opts.n,
        },
        "cnot" => ProtocolSpec::Cnot { control: parse_control(&opts.control)?, target: FieldQubit::parse(&opts.target)? },
        "hadamard" => ProtocolSpec::Hadamard { target: FieldQubit::parse(&opts.target)? },
        "swap" => ProtocolSpec::Swap { direction: FieldQubit::parse(&opts.target)? },
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown protocol {other:?} (expected bell-psi, bell-phi, cnot, hadamard or swap)"
            )))
        }
    })
}

fn build_protocol(g: &GlobalArgs, spec: ProtocolSpec, params: &CouplingParams) -> Result<protocols::BuiltProtocol> {
    let mut built = match (spec, &g.space) {
        (ProtocolSpec::BellPsi { theta, phi, m, n }, Some(text)) => {
            let space = parse_space(text)?;
            let schedule = protocols::build_bell_psi_in(space, params, theta, phi, m, n)?;
            let target = protocols::bell_psi_target(space, phi, m, n)?;
            protocols::BuiltProtocol { spec, schedule, target }
        }
        (_, Some(_)) => {
            return Err(Error::InvalidParameter("--space only applies to bell-psi and sweep pc".into()));
        }
        (spec, None) => protocols::build(spec, params)?,
    };
    built.schedule.units = g.units();
    Ok(built)
}

fn cmd_protocol(g: &GlobalArgs, name: &str, opts: &ProtocolArgs) -> Result<String> {
    let started = Instant::now();
    let spec = protocol_spec(g, name, opts)?;
    let params = g.params_or(CouplingParams::default())?;
    let built = build_protocol(g, spec, &params)?;
    if let Some(path) = &g.emit_schedule {
        write_file(path, &ScheduleFile::new(&built.schedule, params).to_json())?;
    }
    report(g, name.to_string(), &built.schedule, &params, Some(&built.target), started)
}

/// `steps` evenly spaced points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, steps: usize) -> Result<Vec<f64>> {
    if steps < 2 || !start.is_finite() || !stop.is_finite() || start == stop {
        return Err(Error::InvalidParameter(format!(
            "degenerate range: start {start}, stop {stop}, steps {steps} (need distinct finite ends and steps >= 2)"
        )));
    }
    let last = (steps - 1) as f64;
    Ok((0..steps)
        .map(|i| if i + 1 == steps { stop } else { start + (stop - start) * i as f64 / last })
        .collect())
}

fn cmd_sweep(
    g: &GlobalArgs,
    quantity: &str,
    start: Option<f64>,
    stop: Option<f64>,
    steps: usize,
    theta: Option<f64>,
    protocol: &str,
) -> Result<String> {
    let params = g.params_or(CouplingParams::default())?;
    match quantity {
        "pc" => {
            let space = g.space_or(make_space(3, 2, 2)?)?;
            if !space.is_three_level() {
                return Err(Error::ModelMismatch("the pc sweep needs the three-level atom".into()));
            }
            let theta = theta.map(|t| g.angle(t)).unwrap_or(FRAC_PI_4);
            let ts = linspace(start.unwrap_or(0.0), stop.unwrap_or(std::f64::consts::PI / params.g1), steps)?;
            let mut out = String::from("t,pc_formula,pc_executor\n");
            for t in ts {
                let formula = detection_probability_pc(theta, params.g1, params.g2, t);
                let measured = measured_detection_probability(space, theta, 0.0, &params, t)?;
                out.push_str(&format!("{},{},{}\n", format_sig15(t), format_sig15(formula), format_sig15(measured)));
            }
            Ok(out)
        }
        "fidelity" => {
            let spec = protocol_spec(g, protocol, &ProtocolArgs::defaults())?;
            let built = build_protocol(g, spec, &params)?;
            let base = g
                .damping(&built.schedule.space, &params)?
                .ok_or_else(|| Error::InvalidParameter("sweep fidelity needs --damping".into()))?;
            let scales = linspace(start.unwrap_or(0.0), stop.unwrap_or(1.0), steps)?;
            if scales.iter().any(|&s| s < 0.0) {
                return Err(Error::InvalidParameter("damping scale must be >= 0".into()));
            }
            let mut out = String::from("scale,kappa_a,kappa_b,fidelity,success_probability\n");
            for s in scales {
                let d = base.with_scale(s);
                let run = run_schedule_damped(&built.schedule, &params, &d)?;
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    format_sig15(s),
                    format_sig15(d.kappa_a),
                    format_sig15(d.kappa_b),
                    format_sig15(run.final_rho.overlap(&built.target)?),
                    format_sig15(run.success_probability)
                ));
            }
            Ok(out)
        }
        other => Err(Error::InvalidParameter(format!("unknown sweep quantity {other:?} (expected pc or fidelity)"))),
    }
}

impl ProtocolArgs {
    fn defaults() -> Self {
        ProtocolArgs {
            theta: None,
            phi: None,
            m: 1,
            n: 1,
            sign: SignArg::Plus,
            control: "g".into(),
            target: "10".into(),
        }
    }
}

fn cmd_truth_table(g: &GlobalArgs, gate: &str) -> Result<String> {
    let gate = Gate::parse(gate)?;
    let params = g.params_or(CouplingParams::default())?;
    let space = make_space(2, protocols::GATE_FOCK_DIM, protocols::GATE_FOCK_DIM)?;
    let damping = g.damping(&space, &params)?;
    let table = protocols::extract_truth_table(gate, &params, g.units(), damping.as_ref())?;
    Ok(table.to_csv())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_with(std::iter::once("cavity-bell").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn list_parsing() {
        assert_eq!(parse_list("params", "1,2,3,4", 4).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        assert!(parse_list("params", "1,2,3", 4).is_err());
        assert!(parse_list("damping", "1,x", 2).is_err());
        assert_eq!(parse_space("3,2,2").unwrap(), make_space(3, 2, 2).unwrap());
        assert!(parse_space("3,2").is_err());
        assert!(parse_space("4,2,2").is_err());
    }

    #[test]
    fn linspace_endpoints() {
        let v = linspace(0.0, 1.0, 5).unwrap();
        assert_eq!(v, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(linspace(0.0, 1.0, 1).is_err());
        assert!(linspace(1.0, 1.0, 3).is_err());
        assert!(linspace(0.0, f64::NAN, 3).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run_args(&["protocol", "bell-psi", "--m", "2"]).0, EXIT_INVALID);
        assert_eq!(run_args(&["protocol", "teleport"]).0, EXIT_INVALID);
        assert_eq!(run_args(&["truth-table", "toffoli"]).0, EXIT_INVALID);
        assert_eq!(run_args(&["sweep", "pc", "--steps", "1"]).0, EXIT_INVALID);
        assert_eq!(run_args(&["simulate", "/nonexistent/schedule.json"]).0, EXIT_IO);
        assert_eq!(run_args(&["frobnicate"]).0, EXIT_INVALID);
        assert_eq!(run_args(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn degrees_flag_converts_angles() {
        let (c1, rad, _) = run_args(&["protocol", "bell-psi", "--theta", "0.5"]);
        let (c2, deg, _) = run_args(&["protocol", "bell-psi", "--degrees", "--theta", &format!("{}", 0.5f64.to_degrees())]);
        assert_eq!((c1, c2), (0, 0));
        let strip = |s: &str| s.lines().filter(|l| !l.contains("wall_clock")).collect::<Vec<_>>().join("\n");
        let (a, b): (serde_json::Value, serde_json::Value) =
            (serde_json::from_str(&rad).unwrap(), serde_json::from_str(&deg).unwrap());
        let pa = a["success_probability"].as_f64().unwrap();
        let pb = b["success_probability"].as_f64().unwrap();
        assert!((pa - pb).abs() < 1e-12);
        assert!(!strip(&rad).is_empty());
    }

    #[test]
    fn default_step_is_accepted() {
        let space = make_space(2, 3, 3).unwrap();
        let p = CouplingParams::new(1.0, 1.0, 2.0, 1.5).unwrap();
        let dt = default_step(&space, &p, 0.1, 0.2);
        assert!((dt - 1.0 / (50.0 * 2.0 * 2f64.sqrt())).abs() < 1e-15);
    }
}
