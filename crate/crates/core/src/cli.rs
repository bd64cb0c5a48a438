//! `assist-tomo` command line: determinant time series, spin-scheme demo,
//! end-to-end reconstruction and the analytic-versus-exact validation suite.
//!
//! Exit codes: 0 success, 1 failed check, 2 usage or input error,
//! 3 ill-conditioned reconstruction.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::coherent::{
    analytic_system, determinant_peak, determinant_series, expectations_analytic,
    singular_triplet_check, time_grid, JcParams, ReconstructionSystem, Triplet, POISSON_TAIL_TOL,
};
use crate::error::Error;
use crate::measurement::{
    matrix_rows, reconstruct_from_distribution, reconstruct_from_shots, sample, Distribution,
    Outcome, ReconstructionReport, ShotRecord, Target, RNG_ALGORITHM,
};
use crate::oracle::{spin_joint_probabilities, JcOracle};
use crate::quantum::BlochVector;
use crate::spin::{OptimalSchemeReport, SpinScheme, OPTIMAL_DETERMINANT};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ILL_CONDITIONED: i32 = 3;

pub const FIG1_SCHEMA: &str = "assist-tomo.fig1.v1";
pub const RECONSTRUCT_SCHEMA: &str = "assist-tomo.reconstruct.v1";
pub const VALIDATE_SCHEMA: &str = "assist-tomo.validate.v1";
pub const SPIN_DEMO_SCHEMA: &str = "assist-tomo.spin-demo.v1";

/// Tolerances used by `validate`.
pub const AGREEMENT_TOL: f64 = 1e-6;
pub const CONVERGENCE_TOL: f64 = 1e-7;
pub const CONVERGENCE_STEP: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Spin,
    Coherent,
}

/// Full run configuration. Every field can come from `--config` (JSON, same
/// names) and be overridden by the matching kebab-case flag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scheme: Scheme,
    pub gamma: f64,
    pub omega: f64,
    pub alpha_re: f64,
    pub alpha_im: f64,
    pub n_max: usize,
    pub t_start: f64,
    pub t_end: f64,
    /// Grid size; commands pick their own default when unset.
    pub t_steps: Option<usize>,
    /// 0 selects the noiseless infinite-shot limit.
    pub shots: u64,
    pub seed: u64,
    pub det_floor: f64,
    pub output_path: Option<PathBuf>,
    /// |α|² values for the determinant time series.
    pub alpha_sq: Vec<f64>,
    /// True initial Bloch vector for simulated reconstructions.
    pub rho: [f64; 3],
    /// Measurement time; the |Δ| peak on the grid when unset.
    pub t_measure: Option<f64>,
    /// Counts file (JSON lines) to reconstruct from.
    pub input: Option<PathBuf>,
    pub triplet: Triplet,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Coherent,
            gamma: 0.1,
            omega: 0.1,
            alpha_re: 1.0,
            alpha_im: 0.0,
            n_max: 30,
            t_start: 0.0,
            t_end: 200.0,
            t_steps: None,
            shots: 0,
            seed: 0,
            det_floor: 1e-6,
            output_path: None,
            alpha_sq: vec![1.0, 4.0, 9.0],
            rho: [0.3, -0.5, 0.2],
            t_measure: None,
            input: None,
            triplet: Triplet::SigmaX,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.t_end > self.t_start) {
            return Err(format!(
                "t_end ({}) must exceed t_start ({})",
                self.t_end, self.t_start
            ));
        }
        if let Some(steps) = self.t_steps {
            if steps < 2 {
                return Err(format!("t_steps must be at least 2, got {steps}"));
            }
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.omega.is_finite() && self.omega >= 0.0) {
            return Err(format!("omega must be non-negative, got {}", self.omega));
        }
        if self.n_max == 0 {
            return Err("n_max must be positive".into());
        }
        if !(self.det_floor >= 0.0) {
            return Err(format!(
                "det_floor must be non-negative, got {}",
                self.det_floor
            ));
        }
        if self.alpha_sq.is_empty() || self.alpha_sq.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err("alpha_sq values must be positive".into());
        }
        if !BlochVector::from(self.rho).is_physical() {
            return Err(format!("rho {:?} lies outside the Bloch ball", self.rho));
        }
        if let Some(t) = self.t_measure {
            if !(t.is_finite() && t >= 0.0) {
                return Err(format!("t_measure must be non-negative, got {t}"));
            }
        }
        Ok(())
    }

    pub fn alpha(&self) -> C64 {
        C64::new(self.alpha_re, self.alpha_im)
    }

    pub fn steps_or(&self, default: usize) -> usize {
        self.t_steps.unwrap_or(default)
    }

    pub fn grid(&self, default_steps: usize) -> Vec<f64> {
        time_grid(self.t_start, self.t_end, self.steps_or(default_steps))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "assist-tomo",
    version,
    about = "Spin-1/2 state reconstruction with an assistant system"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Determinant Δ(t) of the coherent-assistant scheme for several |α|², as CSV.
    Fig1(RunArgs),
    /// Optimal two-spin scheme: determinant, tetrahedron geometry and a roundtrip.
    SpinDemo(RunArgs),
    /// Reconstruct an initial spin state from counts or from simulated data.
    Reconstruct(RunArgs),
    /// Compare the closed-form expectations with exact evolution.
    Validate(RunArgs),
}

#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// JSON file with RunConfig fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub scheme: Option<Scheme>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha_re: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha_im: Option<f64>,
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub t_start: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub t_steps: Option<usize>,
    #[arg(long)]
    pub shots: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub det_floor: Option<f64>,
    #[arg(long)]
    pub output_path: Option<PathBuf>,
    /// Comma-separated |α|² values.
    #[arg(long, value_delimiter = ',')]
    pub alpha_sq: Option<Vec<f64>>,
    /// Comma-separated true Bloch vector x,y,z.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub rho: Option<Vec<f64>>,
    #[arg(long)]
    pub t_measure: Option<f64>,
    /// Counts file, one JSON object per line.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub triplet: Option<TripletArg>,
    /// Print the JSON report instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TripletArg {
    SigmaX,
    SigmaZ,
}

impl From<TripletArg> for Triplet {
    fn from(t: TripletArg) -> Self {
        match t {
            TripletArg::SigmaX => Triplet::SigmaX,
            TripletArg::SigmaZ => Triplet::SigmaZ,
        }
    }
}

impl RunArgs {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<RunConfig, String> {
        let mut c = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
                serde_json::from_str(&text)
                    .map_err(|e| format!("invalid config {}: {e}", path.display()))?
            }
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(if let Some(v) = &self.$field { c.$field = v.clone(); })*};
        }
        set!(
            scheme, gamma, omega, alpha_re, alpha_im, n_max, t_start, t_end, shots, seed,
            det_floor, alpha_sq
        );
        if self.t_steps.is_some() {
            c.t_steps = self.t_steps;
        }
        if self.output_path.is_some() {
            c.output_path = self.output_path.clone();
        }
        if self.t_measure.is_some() {
            c.t_measure = self.t_measure;
        }
        if self.input.is_some() {
            c.input = self.input.clone();
        }
        if let Some(t) = self.triplet {
            c.triplet = t.into();
        }
        if let Some(rho) = &self.rho {
            c.rho = rho
                .as_slice()
                .try_into()
                .map_err(|_| format!("rho needs three components, got {}", rho.len()))?;
        }
        c.validate()?;
        Ok(c)
    }
}

/// Result of one command: exit code plus what goes to stdout and stderr.
#[derive(Debug, Default)]
pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Output {
    fn usage(msg: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            stdout: String::new(),
            stderr: format!("error: {}\n", msg.into()),
        }
    }
}

/// Parses arguments (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Output
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            return if code == EXIT_OK {
                Output {
                    code,
                    stdout: text,
                    stderr: String::new(),
                }
            } else {
                Output {
                    code,
                    stdout: String::new(),
                    stderr: text,
                }
            };
        }
    };
    let (args, handler): (&RunArgs, fn(&RunConfig, bool) -> Output) = match &cli.command {
        Command::Fig1(a) => (a, cmd_fig1),
        Command::SpinDemo(a) => (a, cmd_spin_demo),
        Command::Reconstruct(a) => (a, cmd_reconstruct),
        Command::Validate(a) => (a, cmd_validate),
    };
    match args.resolve() {
        Ok(config) => handler(&config, args.json),
        Err(msg) => Output::usage(msg),
    }
}

/// Entry point for the binary: runs, prints, returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let out = run(args);
    let _ = std::io::stdout().write_all(out.stdout.as_bytes());
    let _ = std::io::stderr().write_all(out.stderr.as_bytes());
    out.code
}

fn format_alpha_sq(a: f64) -> String {
    if a.fract() == 0.0 {
        format!("{}", a as i64)
    } else {
        format!("{a}").replace('.', "p")
    }
}

fn write_or_print(path: &Option<PathBuf>, content: &str, out: &mut Output) -> bool {
    match path {
        Some(p) => match fs::write(p, content) {
            Ok(()) => true,
            Err(e) => {
                out.code = EXIT_USAGE;
                out.stderr
                    .push_str(&format!("error: cannot write {}: {e}\n", p.display()));
                false
            }
        },
        None => {
            out.stdout.push_str(content);
            true
        }
    }
}

fn error_output(err: Error, config: &RunConfig, schema: &str) -> Output {
    let code = match err {
        Error::IllConditioned { .. } => EXIT_ILL_CONDITIONED,
        _ => EXIT_USAGE,
    };
    let mut payload = json!({ "schema": schema, "error": err.to_string(), "config": config });
    if let Error::IllConditioned { determinant, floor } = err {
        payload["determinant"] = json!(determinant);
        payload["det_floor"] = json!(floor);
    }
    Output {
        code,
        stdout: format!("{}\n", payload),
        stderr: format!("error: {err}\n"),
    }
}

/// Δ(t) on (t_start, t_end] for every configured |α|².
pub fn cmd_fig1(config: &RunConfig, _json: bool) -> Output {
    if config.scheme != Scheme::Coherent {
        return Output::usage("fig1 requires scheme = coherent");
    }
    let grid = config.grid(2000);
    let mut columns = Vec::new();
    for &a2 in &config.alpha_sq {
        let series = JcParams::new(
            config.gamma,
            config.omega,
            C64::new(a2.sqrt(), 0.0),
            config.n_max,
        )
        .and_then(|p| determinant_series(&p, &grid));
        match series {
            Ok(s) => columns.push(s),
            Err(e) => return error_output(e, config, FIG1_SCHEMA),
        }
    }
    let mut csv = format!("# schema={FIG1_SCHEMA}\nt");
    for &a2 in &config.alpha_sq {
        csv.push_str(&format!(",delta_a{}", format_alpha_sq(a2)));
    }
    csv.push('\n');
    for (k, t) in grid.iter().enumerate() {
        csv.push_str(&format!("{t}"));
        for col in &columns {
            csv.push_str(&format!(",{:.12e}", col[k]));
        }
        csv.push('\n');
    }
    let mut out = Output::default();
    if write_or_print(&config.output_path, &csv, &mut out) && config.output_path.is_some() {
        for (a2, col) in config.alpha_sq.iter().zip(&columns) {
            let peak = col.iter().fold(0.0f64, |m, d| m.max(d.abs()));
            out.stdout
                .push_str(&format!("|alpha|^2 = {a2}: max |delta| = {peak:.6e}\n"));
        }
    }
    out
}

#[derive(Debug, Serialize)]
struct Check {
    name: String,
    value: f64,
    limit: f64,
    passed: bool,
}

impl Check {
    fn below(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            passed: value < limit,
        }
    }
}

fn report_checks(
    schema: &str,
    config: &RunConfig,
    checks: &[Check],
    extra: Value,
    json_mode: bool,
) -> Output {
    let passed = checks.iter().all(|c| c.passed);
    let payload = json!({
        "schema": schema,
        "config": config,
        "passed": passed,
        "checks": checks,
        "details": extra,
    });
    let mut out = Output {
        code: if passed { EXIT_OK } else { EXIT_CHECK_FAILED },
        ..Default::default()
    };
    let text = if json_mode {
        format!(
            "{}\n",
            serde_json::to_string_pretty(&payload).expect("report serializes")
        )
    } else {
        let mut s = String::new();
        for c in checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            s.push_str(&format!(
                "[{tag}] {}: {:.3e} (limit {:.1e})\n",
                c.name, c.value, c.limit
            ));
        }
        s.push_str(if passed {
            "all checks passed\n"
        } else {
            "some checks FAILED\n"
        });
        s
    };
    out.stdout = text;
    if let Some(path) = &config.output_path {
        let body = serde_json::to_string_pretty(&payload).expect("report serializes");
        if let Err(e) = fs::write(path, body) {
            out.code = EXIT_USAGE;
            out.stderr = format!("error: cannot write {}: {e}\n", path.display());
        }
    }
    out
}

fn random_bloch(rng: &mut ChaCha8Rng) -> BlochVector {
    loop {
        let v = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let b = BlochVector::from(v);
        if b.norm() <= 1.0 {
            return b;
        }
    }
}

/// Optimal spin scheme summary and a noiseless roundtrip.
pub fn cmd_spin_demo(config: &RunConfig, json_mode: bool) -> Output {
    let report = match OptimalSchemeReport::compute() {
        Ok(r) => r,
        Err(e) => {
            return Output {
                code: EXIT_CHECK_FAILED,
                stderr: format!("error: {e}\n"),
                ..Default::default()
            };
        }
    };
    let scheme = SpinScheme::optimal();
    let diag = scheme.diagnostics();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let truth = random_bloch(&mut rng);
    let roundtrip = scheme
        .forward_probabilities(&truth)
        .and_then(|p| scheme.reconstruct(&p, config.det_floor))
        .map(|e| e.bloch.distance(&truth))
        .unwrap_or(f64::INFINITY);
    let worst_cos = diag
        .cosines
        .iter()
        .enumerate()
        .flat_map(|(i, row)| {
            row.iter()
                .enumerate()
                .filter(move |(j, _)| *j != i)
                .map(|(_, c)| (c + 1.0 / 3.0).abs())
        })
        .fold(0.0, f64::max);
    let checks = vec![
        Check::below(
            "determinant_vs_optimum",
            (diag.determinant.abs() - OPTIMAL_DETERMINANT).abs(),
            1e-7,
        ),
        Check::below("pairwise_cosine_vs_minus_third", worst_cos, 1e-10),
        Check::below("roundtrip_error", roundtrip, 1e-10),
    ];
    let extra = json!({
        "determinant": diag.determinant,
        "u": diag.u,
        "norms": diag.norms,
        "cosines": diag.cosines,
        "mixing_angle": report.phi,
        "chi": report.chi,
        "tau": report.tau,
        "roundtrip_state": truth,
        "seed": config.seed,
    });
    let mut out = report_checks(SPIN_DEMO_SCHEMA, config, &checks, extra, json_mode);
    if !json_mode {
        let mut head = format!(
            "|delta| = {:.10} (optimum {:.10})\n",
            diag.determinant.abs(),
            OPTIMAL_DETERMINANT
        );
        head.push_str(&format!("u = {:?}\n|v| = {:?}\n", diag.u, diag.norms));
        for row in &diag.cosines {
            head.push_str(&format!(
                "cos = [{}]\n",
                row.iter()
                    .map(|c| format!("{c:+.12}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            ));
        }
        out.stdout = head + &out.stdout;
    }
    out
}

#[derive(Debug, Deserialize)]
struct CountLine {
    i: i64,
    #[serde(default)]
    n: Option<i64>,
    #[serde(default)]
    a: Option<i64>,
    count: u64,
}

/// Reads a JSON-lines counts file: `{"i": ±1, "n": k, "count": c}` for the
/// field assistant, `{"i": ±1, "a": ±1, "count": c}` for the spin assistant.
pub fn read_counts(path: &PathBuf, scheme: Scheme) -> Result<ShotRecord, String> {
    let text =
        fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut counts = BTreeMap::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: CountLine =
            serde_json::from_str(line).map_err(|e| format!("line {}: {e}", k + 1))?;
        if row.i != 1 && row.i != -1 {
            return Err(format!("line {}: i must be +1 or -1", k + 1));
        }
        let assistant = match (scheme, row.n, row.a) {
            (Scheme::Coherent, Some(n), None) if n >= 0 => n,
            (Scheme::Spin, None, Some(a)) if a == 1 || a == -1 => a,
            _ => {
                return Err(format!(
                    "line {}: expected {} field",
                    k + 1,
                    if scheme == Scheme::Spin {
                        "\"a\": ±1"
                    } else {
                        "\"n\": k ≥ 0"
                    }
                ))
            }
        };
        *counts
            .entry(Outcome::new(row.i as i8, assistant))
            .or_insert(0) += row.count;
    }
    ShotRecord::from_counts(counts, None).map_err(|e| e.to_string())
}

/// Writes counts in the format accepted by [`read_counts`].
pub fn write_counts(record: &ShotRecord, scheme: Scheme) -> String {
    let key = if scheme == Scheme::Spin { "a" } else { "n" };
    record
        .counts
        .iter()
        .map(|(o, c)| {
            format!(
                "{{\"i\":{},\"{key}\":{},\"count\":{c}}}\n",
                o.spin, o.assistant
            )
        })
        .collect()
}

enum Plan {
    Coherent {
        params: JcParams,
        system: ReconstructionSystem,
        t: f64,
    },
    Spin {
        scheme: SpinScheme,
    },
}

/// Reconstruction from counts or a simulated experiment.
pub fn cmd_reconstruct(config: &RunConfig, _json: bool) -> Output {
    match reconstruct_inner(config) {
        Ok(v) => {
            let body = format!(
                "{}\n",
                serde_json::to_string_pretty(&v).expect("report serializes")
            );
            let mut out = Output::default();
            write_or_print(&config.output_path, &body, &mut out);
            out
        }
        Err(ReconstructError::Core(e)) => error_output(e, config, RECONSTRUCT_SCHEMA),
        Err(ReconstructError::Input(msg)) => Output::usage(msg),
    }
}

enum ReconstructError {
    Core(Error),
    Input(String),
}

impl From<Error> for ReconstructError {
    fn from(e: Error) -> Self {
        Self::Core(e)
    }
}

fn reconstruct_inner(config: &RunConfig) -> Result<Value, ReconstructError> {
    let truth = BlochVector::from(config.rho);
    let plan = match config.scheme {
        Scheme::Coherent => {
            let params = JcParams::new(config.gamma, config.omega, config.alpha(), config.n_max)?;
            let t = match config.t_measure {
                Some(t) => t,
                None => determinant_peak(&params, &config.grid(400))?.0,
            };
            let system = analytic_system(t, &params)?;
            Plan::Coherent { params, system, t }
        }
        Scheme::Spin => Plan::Spin {
            scheme: SpinScheme::optimal(),
        },
    };
    let target = match &plan {
        Plan::Coherent { system, .. } => Target::Coherent(system),
        Plan::Spin { scheme } => Target::Spin(scheme),
    };
    // Reject singular systems before touching data.
    let determinant = match &plan {
        Plan::Coherent { system, .. } => system.determinant,
        Plan::Spin { scheme } => scheme.determinant,
    };
    if determinant.abs() <= config.det_floor {
        return Err(Error::IllConditioned {
            determinant,
            floor: config.det_floor,
        }
        .into());
    }

    let (report, source): (ReconstructionReport, &str) = if let Some(path) = &config.input {
        let record = read_counts(path, config.scheme).map_err(ReconstructError::Input)?;
        (
            reconstruct_from_shots(&record, target, config.det_floor)?,
            "counts-file",
        )
    } else {
        let distribution = match &plan {
            Plan::Coherent { params, t, .. } => Distribution::from_coherent(
                &JcOracle::new(params)?.joint_distribution(*t, &truth)?,
            )?,
            Plan::Spin { scheme } => {
                Distribution::from_spin(&spin_joint_probabilities(scheme, &truth)?)?
            }
        };
        if config.shots == 0 {
            (
                reconstruct_from_distribution(&distribution, target, config.det_floor)?,
                "exact",
            )
        } else {
            let record = sample(&distribution, config.shots, config.seed)?;
            (
                reconstruct_from_shots(&record, target, config.det_floor)?,
                "simulated-shots",
            )
        }
    };

    let mut payload = json!({
        "schema": RECONSTRUCT_SCHEMA,
        "config": config,
        "source": source,
        "estimate": report.estimate,
        "covariance": matrix_rows(&report.covariance),
        "condition_number": report.condition_number,
        "determinant": report.determinant,
        "physical": report.physical,
        "residual": report.residual,
        "shots": report.shots,
        "seed": config.seed,
        "rng": RNG_ALGORITHM,
    });
    if let Plan::Coherent { params, t, .. } = &plan {
        payload["t_measure"] = json!(t);
        payload["n_max"] = json!(params.n_max);
    }
    if config.input.is_none() {
        payload["truth"] = json!(truth);
        payload["error"] = json!(report.estimate.distance(&truth));
    }
    Ok(payload)
}

/// Sup-norm relative distance between two series.
pub fn sup_relative(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let diff = a
        .iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Closed-form versus exact evolution for the configured amplitude.
pub fn cmd_validate(config: &RunConfig, json_mode: bool) -> Output {
    if config.scheme != Scheme::Coherent {
        return Output::usage("validate requires scheme = coherent");
    }
    let params = match JcParams::with_fixed_truncation(
        config.gamma,
        config.omega,
        config.alpha(),
        config.n_max,
    ) {
        Ok(p) => p,
        Err(e @ Error::Truncation { .. }) => {
            let deficit = if let Error::Truncation { deficit, .. } = e {
                deficit
            } else {
                f64::NAN
            };
            let check = Check {
                name: "truncation".into(),
                value: deficit,
                limit: POISSON_TAIL_TOL,
                passed: false,
            };
            let mut out = report_checks(
                VALIDATE_SCHEMA,
                config,
                &[check],
                json!({ "error": e.to_string() }),
                json_mode,
            );
            out.stderr.push_str(&format!("error: {e}\n"));
            return out;
        }
        Err(e) => return Output::usage(e.to_string()),
    };
    match validate_inner(config, &params) {
        Ok((checks, extra)) => report_checks(VALIDATE_SCHEMA, config, &checks, extra, json_mode),
        Err(e) => error_output(e, config, VALIDATE_SCHEMA),
    }
}

fn validate_inner(config: &RunConfig, params: &JcParams) -> Result<(Vec<Check>, Value), Error> {
    let grid = config.grid(200);
    let rho = BlochVector::from(config.rho);
    let oracle = JcOracle::new(params)?;
    let mut worst_expectation: f64 = 0.0;
    let mut analytic_det = Vec::with_capacity(grid.len());
    let mut oracle_det = Vec::with_capacity(grid.len());
    for &t in &grid {
        let a = expectations_analytic(t, params, &rho)?;
        let o = oracle.expectations(t, &rho)?;
        worst_expectation = worst_expectation.max(a.relative_deviation(&o));
        analytic_det.push(analytic_system(t, params)?.determinant);
        oracle_det.push(oracle.determinant(t)?);
    }
    let det_dev = sup_relative(&analytic_det, &oracle_det);

    let rank_t = config.t_measure.unwrap_or(10.0).max(f64::MIN_POSITIVE);
    let rank = singular_triplet_check(rank_t, params, config.triplet)?;
    let rank_ok = match config.triplet {
        Triplet::SigmaX => rank.rank == 3,
        Triplet::SigmaZ => rank.rank < 3,
    };

    let wider = JcParams::with_fixed_truncation(
        params.gamma,
        params.omega,
        params.alpha,
        params.n_max + CONVERGENCE_STEP,
    )?;
    let wider_det = determinant_series(&wider, &grid)?;
    let convergence = sup_relative(&analytic_det, &wider_det);

    let checks = vec![
        Check::below("expectations_vs_exact", worst_expectation, AGREEMENT_TOL),
        Check::below("determinant_vs_exact", det_dev, AGREEMENT_TOL),
        Check {
            name: format!(
                "rank_{}",
                if config.triplet == Triplet::SigmaX {
                    "sigma_x_triplet_is_3"
                } else {
                    "sigma_z_triplet_below_3"
                }
            ),
            value: rank.rank as f64,
            limit: 3.0,
            passed: rank_ok,
        },
        Check::below("truncation_convergence", convergence, CONVERGENCE_TOL),
    ];
    let extra = json!({
        "n_max": params.n_max,
        "grid_points": grid.len(),
        "rank_report": rank,
        "max_abs_delta": analytic_det.iter().fold(0.0f64, |m, d| m.max(d.abs())),
    });
    Ok((checks, extra))
}
