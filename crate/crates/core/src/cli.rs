//! Command-line front end. Exit codes:
//!
//! | code | meaning                                   |
//! |------|-------------------------------------------|
//! | 0    | stable / completed / consistent           |
//! | 1    | unstable                                  |
//! | 2    | marginal or no real root                  |
//! | 3    | simulation aborted on blow-up             |
//! | 4    | simulated rate inconsistent with `lambda0` |
//! | 10   | configuration or numerical error          |
//! | 64   | usage error                               |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::model::CoefficientSet;
use crate::quad::Mesh;
use crate::simulator::{self, SimulationConfig, StopReason};
use crate::spectral::{Classification, SpectralContext, SpectralReport};

pub const EXIT_STABLE: i32 = 0;
pub const EXIT_UNSTABLE: i32 = 1;
pub const EXIT_MARGINAL: i32 = 2;
pub const EXIT_BLOW_UP: i32 = 3;
pub const EXIT_INCONSISTENT: i32 = 4;
pub const EXIT_ERROR: i32 = 10;
pub const EXIT_USAGE: i32 = 64;

/// Amplitude cap, as a multiple of epsilon, applied to unstable runs in
/// `validate` when the file does not set one.
const DEFAULT_VALIDATE_CAP: f64 = 1e3;

/// Sample points per axis for the coefficient assumption check.
const VALIDATION_POINTS: usize = 201;

/// Random `lambda` pairs probed by `validate`.
const MONOTONICITY_PROBES: usize = 100;

#[derive(Debug, Parser)]
#[command(
    name = "phytoagg",
    version,
    about = "Stability of the zero state in a size-structured aggregation model"
)]
pub struct Cli {
    /// Run file
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Override the mesh size of the command's primary mesh
    #[arg(long, global = true, value_name = "INT")]
    pub mesh_n: Option<usize>,
    /// Override the marginal-classification tolerance
    #[arg(long, global = true, value_name = "FLOAT")]
    pub tol: Option<f64>,
    /// Seed for randomized checks
    #[arg(long, global = true, value_name = "INT", default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify the zero state from the characteristic function
    Classify,
    /// Tabulate xi(lambda) on a grid
    Spectrum(SpectrumArgs),
    /// Simulate the full nonlinear model
    Simulate,
    /// Compare the simulated rate with lambda0
    Validate(ValidateArgs),
    /// Classify over a range of coefficient multipliers
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    /// Defaults to lambda0 - 5/Gamma(x1)
    #[arg(long, allow_hyphen_values = true)]
    pub lambda_min: Option<f64>,
    /// Defaults to lambda0 + 5/Gamma(x1)
    #[arg(long, allow_hyphen_values = true)]
    pub lambda_max: Option<f64>,
    #[arg(long, default_value_t = 201)]
    pub count: usize,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Relative tolerance on the fitted rate; overrides the run file
    #[arg(long)]
    pub rate_tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// One of g_scale, q_scale, w_scale
    #[arg(long)]
    pub parameter: String,
    /// Comma-separated multipliers
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    pub values: Vec<f64>,
}

/// A float printed with 17 significant digits inside JSON.
fn sig17(x: f64) -> Box<RawValue> {
    let text = if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("\"{x}\"")
    };
    RawValue::from_string(text).expect("formatted float is valid JSON")
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Serialize)]
struct ConfigRecord {
    path: String,
    sha256: String,
    bytes: usize,
}

#[derive(Debug, Serialize)]
struct OutputRecord {
    file: String,
    bytes: usize,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct RunManifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: ConfigRecord,
    parameters: BTreeMap<&'static str, Box<RawValue>>,
    status: BTreeMap<&'static str, Box<RawValue>>,
    outputs: Vec<OutputRecord>,
}

fn hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

fn raw_str(s: &str) -> Box<RawValue> {
    RawValue::from_string(serde_json::to_string(s).expect("string serializes")).expect("valid JSON")
}

fn raw_int(n: u64) -> Box<RawValue> {
    RawValue::from_string(n.to_string()).expect("valid JSON")
}

/// Collects output files and writes them with the manifest last.
struct OutputSet {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl OutputSet {
    fn new(dir: PathBuf) -> Self {
        OutputSet {
            dir,
            files: Vec::new(),
        }
    }

    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn write(self, mut manifest: RunManifest) -> Result<()> {
        fs::create_dir_all(&self.dir)?;
        for (name, bytes) in &self.files {
            fs::write(self.dir.join(name), bytes)?;
            manifest.outputs.push(OutputRecord {
                file: name.clone(),
                bytes: bytes.len(),
                sha256: hex(bytes),
            });
        }
        let mut json =
            serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Argument(e.to_string()))?;
        json.push(b'\n');
        fs::write(self.dir.join("manifest.json"), json)?;
        Ok(())
    }
}

struct Session {
    cli: Cli,
    config_path: PathBuf,
    config: RunConfig,
    config_bytes: Vec<u8>,
}

impl Session {
    fn manifest(&self, command: &'static str) -> RunManifest {
        RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config: ConfigRecord {
                path: self.config_path.display().to_string(),
                sha256: hex(&self.config_bytes),
                bytes: self.config_bytes.len(),
            },
            parameters: BTreeMap::new(),
            status: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    fn out_dir(&self) -> PathBuf {
        self.cli.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    fn tol(&self) -> f64 {
        self.cli.tol.unwrap_or(self.config.numerics.tol)
    }

    fn spectral_mesh_n(&self) -> usize {
        self.cli.mesh_n.unwrap_or(self.config.numerics.n)
    }

    fn context(&self, cs: &CoefficientSet) -> Result<SpectralContext> {
        let mesh =
            Mesh::for_coefficients(cs, self.spectral_mesh_n(), self.config.numerics.grading)?;
        SpectralContext::new(cs, &mesh, self.config.numerics.quad_order)
    }

    fn spectral_parameters(&self, m: &mut RunManifest) {
        m.parameters
            .insert("mesh_n", raw_int(self.spectral_mesh_n() as u64));
        m.parameters.insert(
            "grading",
            raw_str(&self.config.numerics.grading.to_string()),
        );
        m.parameters.insert(
            "quad_order",
            raw_int(self.config.numerics.quad_order as u64),
        );
        m.parameters.insert("tol", sig17(self.tol()));
    }

    fn simulation_config(&self) -> crate::config::SimulationSection {
        let mut sim = self.config.simulation.clone().unwrap_or_default();
        if let Some(n) = self.cli.mesh_n {
            sim.config.n = n;
        }
        sim
    }
}

fn exit_for(class: Classification) -> i32 {
    match class {
        Classification::Stable => EXIT_STABLE,
        Classification::Unstable => EXIT_UNSTABLE,
        Classification::Marginal | Classification::NoRoot => EXIT_MARGINAL,
    }
}

fn report_text(r: &SpectralReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "xi(0)          = {}", fmt17(r.xi_at_zero));
    let _ = match r.lambda0 {
        Some(l) => writeln!(s, "lambda0        = {}", fmt17(l)),
        None => writeln!(s, "lambda0        = none"),
    };
    let _ = writeln!(s, "classification = {}", r.classification);
    let _ = writeln!(s, "Gamma(x1)      = {}", fmt17(r.gamma_x1));
    let _ = writeln!(s, "2 Gamma(x1)    = {}", fmt17(r.compactness_time));
    if let Some(note) = &r.note {
        let _ = writeln!(s, "note           = {note}");
    }
    s
}

fn report_status(m: &mut RunManifest, r: &SpectralReport) {
    m.status.insert("xi_at_zero", sig17(r.xi_at_zero));
    m.status
        .insert("lambda0", r.lambda0.map_or_else(|| raw_str("none"), sig17));
    m.status
        .insert("classification", raw_str(&r.classification.to_string()));
    m.status.insert("gamma_x1", sig17(r.gamma_x1));
}

fn cmd_classify(s: &Session, out: &mut impl std::io::Write) -> Result<i32> {
    let ctx = s.context(&s.config.coefficients)?;
    let report = ctx.classify(s.tol())?;
    let text = report_text(&report);
    out.write_all(text.as_bytes())?;
    let code = exit_for(report.classification);
    if s.cli.out.is_some() {
        let mut m = s.manifest("classify");
        s.spectral_parameters(&mut m);
        report_status(&mut m, &report);
        m.status.insert("exit_code", raw_int(code as u64));
        let mut files = OutputSet::new(s.out_dir());
        files.add("classify.txt", text.into_bytes());
        files.write(m)?;
    }
    Ok(code)
}

fn cmd_spectrum(s: &Session, args: &SpectrumArgs, out: &mut impl std::io::Write) -> Result<i32> {
    let ctx = s.context(&s.config.coefficients)?;
    let report = ctx.classify(s.tol())?;
    let center = report.lambda0.unwrap_or(0.0);
    let half = 5.0 / ctx.gamma_x1();
    let lo = args.lambda_min.unwrap_or(center - half);
    let hi = args.lambda_max.unwrap_or(center + half);
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return Err(Error::Argument(format!(
            "need lambda_min < lambda_max, got [{lo}, {hi}]"
        )));
    }
    if args.count < 2 {
        return Err(Error::Argument(format!(
            "count must be >= 2, got {}",
            args.count
        )));
    }
    let mut csv = String::from("lambda,xi\n");
    for k in 0..args.count {
        let l = lo + (hi - lo) * k as f64 / (args.count - 1) as f64;
        let _ = writeln!(csv, "{},{}", fmt17(l), fmt17(ctx.xi(l)));
    }
    let mut root = String::from("lambda0,in_range\n");
    match report.lambda0 {
        Some(l) => {
            let _ = writeln!(root, "{},{}", fmt17(l), l >= lo && l <= hi);
        }
        None => root.push_str("none,false\n"),
    }
    let mut m = s.manifest("spectrum");
    s.spectral_parameters(&mut m);
    m.parameters.insert("lambda_min", sig17(lo));
    m.parameters.insert("lambda_max", sig17(hi));
    m.parameters.insert("count", raw_int(args.count as u64));
    report_status(&mut m, &report);
    let mut files = OutputSet::new(s.out_dir());
    files.add("spectrum.csv", csv.into_bytes());
    files.add("spectrum_root.csv", root.into_bytes());
    files.write(m)?;
    writeln!(
        out,
        "wrote spectrum.csv ({} rows) to {}",
        args.count,
        s.out_dir().display()
    )?;
    Ok(EXIT_STABLE)
}

fn simulation_parameters(
    m: &mut RunManifest,
    cfg: &SimulationConfig,
    trace: &simulator::SimulationTrace,
) {
    m.parameters.insert("sim_mesh_n", raw_int(cfg.n as u64));
    m.parameters
        .insert("sim_grading", raw_str(&cfg.grading.to_string()));
    m.parameters.insert("dt", sig17(trace.dt));
    m.parameters
        .insert("integrator", raw_str(&cfg.integrator.to_string()));
    m.parameters.insert("epsilon", sig17(cfg.initial.epsilon));
    m.parameters
        .insert("t_end", sig17(cfg.t_end.unwrap_or(4.0 * trace.gamma_x1)));
    if let Some(c) = cfg.amplitude_cap {
        m.parameters.insert("amplitude_cap", sig17(c));
    }
}

fn stop_status(m: &mut RunManifest, trace: &simulator::SimulationTrace) -> i32 {
    m.status.insert("final_time", sig17(trace.final_time));
    m.status.insert("steps", raw_int(trace.steps as u64));
    m.status
        .insert("max_negativity", sig17(trace.max_negativity));
    m.status.insert("clipped_mass", sig17(trace.clipped_mass));
    match trace.stop {
        StopReason::Completed => {
            m.status.insert("stop", raw_str("completed"));
            EXIT_STABLE
        }
        StopReason::AmplitudeCap { t } => {
            m.status.insert("stop", raw_str("amplitude_cap"));
            m.status.insert("cap_time", sig17(t));
            EXIT_STABLE
        }
        StopReason::BlowUp { last_good_time } => {
            m.status.insert("stop", raw_str("blow_up"));
            m.status.insert("last_good_time", sig17(last_good_time));
            EXIT_BLOW_UP
        }
    }
}

fn cmd_simulate(s: &Session, out: &mut impl std::io::Write) -> Result<i32> {
    if s.config.simulation.is_none() {
        return Err(Error::Argument(
            "simulate needs a [simulation] section".into(),
        ));
    }
    let sim = s.simulation_config();
    let (disc, trace) = simulator::simulate(&s.config.coefficients, &sim.config)?;
    let mut m = s.manifest("simulate");
    simulation_parameters(&mut m, &sim.config, &trace);
    let code = stop_status(&mut m, &trace);
    m.status.insert("exit_code", raw_int(code as u64));
    let mut files = OutputSet::new(s.out_dir());
    let mut csv = Vec::new();
    trace.write_trace_csv(&mut csv)?;
    files.add("trace.csv", csv);
    if sim.config.snapshot_stride > 0 {
        let mut snap = Vec::new();
        trace.write_snapshots_csv(disc.mesh(), &mut snap)?;
        files.add("snapshots.csv", snap);
    }
    files.write(m)?;
    writeln!(
        out,
        "simulated to t = {} in {} steps ({:?}); outputs in {}",
        fmt17(trace.final_time),
        trace.steps,
        trace.stop,
        s.out_dir().display()
    )?;
    Ok(code)
}

/// Counts random `lambda` pairs on which `xi` fails to decrease.
fn monotonicity_probe(ctx: &SpectralContext, center: f64, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = 20.0 / ctx.gamma_x1();
    (0..MONOTONICITY_PROBES)
        .filter(|_| {
            let a = center + rng.gen_range(-half..half);
            let b = center + rng.gen_range(-half..half);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            lo < hi && ctx.xi(lo) <= ctx.xi(hi)
        })
        .count()
}

fn cmd_validate(s: &Session, args: &ValidateArgs, out: &mut impl std::io::Write) -> Result<i32> {
    let cs = &s.config.coefficients;
    let ctx = s.context(cs)?;
    let report = ctx.classify(s.tol())?;
    let mut sim = s.simulation_config();
    let rate_tol = args.rate_tol.unwrap_or(sim.rate_tolerance);
    if !(rate_tol > 0.0) {
        return Err(Error::Argument(format!(
            "rate tolerance must be positive, got {rate_tol}"
        )));
    }
    let gamma = ctx.gamma_x1();
    let (wa, wb) = sim.config.rate_window;
    if sim.config.t_end.is_none() {
        sim.config.t_end = Some(wb * gamma);
    }
    if report.classification == Classification::Unstable && !sim.explicit_cap {
        sim.config.amplitude_cap = Some(DEFAULT_VALIDATE_CAP);
    }
    let (_, trace) = simulator::simulate(cs, &sim.config)?;
    let rate = trace.estimate_rate((wa * gamma, wb * gamma))?;
    let violations = monotonicity_probe(&ctx, report.lambda0.unwrap_or(0.0), s.cli.seed);
    let (rel_err, consistent) = match report.lambda0 {
        Some(l) => {
            let rel = (rate - l).abs() / l.abs().max(f64::MIN_POSITIVE);
            (rel, rel <= rate_tol && violations == 0)
        }
        // no finite spectral bound: only decay can be confirmed
        None => (f64::NAN, rate < 0.0 && violations == 0),
    };
    let code = if consistent {
        EXIT_STABLE
    } else {
        EXIT_INCONSISTENT
    };

    let mut text = report_text(&report);
    let _ = writeln!(text, "fitted rate    = {}", fmt17(rate));
    let _ = writeln!(text, "relative error = {}", fmt17(rel_err));
    let _ = writeln!(text, "tolerance      = {}", fmt17(rate_tol));
    let _ = writeln!(
        text,
        "xi decreasing  = {}/{} probes",
        MONOTONICITY_PROBES - violations,
        MONOTONICITY_PROBES
    );
    let _ = writeln!(
        text,
        "result         = {}",
        if consistent {
            "consistent"
        } else {
            "inconsistent"
        }
    );
    out.write_all(text.as_bytes())?;

    if s.cli.out.is_some() {
        let mut m = s.manifest("validate");
        s.spectral_parameters(&mut m);
        simulation_parameters(&mut m, &sim.config, &trace);
        m.parameters.insert("rate_tolerance", sig17(rate_tol));
        m.parameters.insert("seed", raw_int(s.cli.seed));
        report_status(&mut m, &report);
        stop_status(&mut m, &trace);
        m.status.insert("fitted_rate", sig17(rate));
        m.status.insert("exit_code", raw_int(code as u64));
        let mut files = OutputSet::new(s.out_dir());
        let mut csv = Vec::new();
        trace.write_trace_csv(&mut csv)?;
        files.add("validate.txt", text.into_bytes());
        files.add("trace.csv", csv);
        files.write(m)?;
    }
    Ok(code)
}

fn cmd_sweep(s: &Session, args: &SweepArgs, out: &mut impl std::io::Write) -> Result<i32> {
    let which = args.parameter.as_str();
    if !matches!(which, "g_scale" | "q_scale" | "w_scale") {
        return Err(Error::Argument(format!(
            "parameter must be g_scale, q_scale or w_scale, got '{which}'"
        )));
    }
    if let Some(v) = args.values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::Argument(format!(
            "sweep values must be finite and positive, got {v}"
        )));
    }
    let base = &s.config.coefficients;
    let (g0, q0, w0) = base.scales();
    let rows = args
        .values
        .par_iter()
        .map(|&v| {
            let (g, q, w) = match which {
                "g_scale" => (v, q0, w0),
                "q_scale" => (g0, v, w0),
                _ => (g0, q0, v),
            };
            let cs = base.clone().with_scales(g, q, w)?;
            s.context(&cs)?.classify(s.tol())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut csv = String::from("value,xi0,lambda0,classification\n");
    for (v, r) in args.values.iter().zip(&rows) {
        let l = r.lambda0.map_or_else(|| "none".to_string(), fmt17);
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            fmt17(*v),
            fmt17(r.xi_at_zero),
            l,
            r.classification
        );
    }
    let mut m = s.manifest("sweep");
    s.spectral_parameters(&mut m);
    m.parameters.insert("parameter", raw_str(which));
    let mut files = OutputSet::new(s.out_dir());
    files.add("sweep.csv", csv.clone().into_bytes());
    files.write(m)?;
    out.write_all(csv.as_bytes())?;
    Ok(EXIT_STABLE)
}

/// Runs a parsed command line, writing human-readable output to `out`.
pub fn execute(cli: Cli, out: &mut impl std::io::Write) -> Result<i32> {
    let config_path = cli
        .config
        .clone()
        .ok_or_else(|| Error::Argument("--config PATH is required".into()))?;
    let (mut config, config_bytes) = RunConfig::load(&config_path)?;
    if let Some(t) = cli.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Argument(format!("--tol must be positive, got {t}")));
        }
        config.numerics.tol = t;
    }
    let check = config.coefficients.validate(VALIDATION_POINTS)?;
    if !check.is_valid() {
        let list: Vec<String> = check
            .violations
            .iter()
            .take(5)
            .map(|v| v.to_string())
            .collect();
        return Err(Error::InvalidCoefficients(list.join("; ")));
    }
    let session = Session {
        cli,
        config_path,
        config,
        config_bytes,
    };
    match &session.cli.command {
        Command::Classify => cmd_classify(&session, out),
        Command::Spectrum(a) => cmd_spectrum(&session, a, out),
        Command::Simulate => cmd_simulate(&session, out),
        Command::Validate(a) => cmd_validate(&session, a, out),
        Command::Sweep(a) => cmd_sweep(&session, a, out),
    }
}

/// Parses `args` (including the program name), runs, and returns the
/// process exit code. Errors go to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_STABLE
            };
        }
    };
    if cli.config.is_none() {
        eprintln!("error: --config PATH is required");
        return EXIT_USAGE;
    }
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(cli, &mut lock) {
        Ok(code) => code,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
