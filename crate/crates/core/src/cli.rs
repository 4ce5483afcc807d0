//! Problem files, the staged pipeline and its artifacts.
//!
//! A problem is one TOML document. Every run writes the resolved problem
//! (file plus command-line overrides plus defaults) next to its artifacts,
//! so an output directory always records the numbers that produced it.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use num_complex::Complex64;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cone::{cone_of, ConicRegion, Sector};
use crate::connection::{
    solution_basis, solve_linear, weak_diagonalize, HbarConnection, LinearSolution, SolveOptions, WeakOptions,
};
use crate::jet::Jet;
use crate::numeric::{log_grid, loglog_slope};
use crate::ring::Matrix;
use crate::scalar::{c_from_f64, c_one, c_to_f64, Real};
use crate::sheaf_quantization::{build_sq, check_cocycle, sq_json, CocycleOptions, CocycleReport, GluingRules};
use crate::stokes::{
    detect_regions, graph_json, graph_svg, higher_order_scattering, trace_stokes_curves, turning_points,
    wkb_recursion, Potential, StokesError, StokesGraph, TraceOptions,
};
use crate::transseries::{ParamRing, Transseries, TransseriesRecord, Truncation};

pub const SPEC_SCHEMA_VERSION: u32 = 1;
pub const ARTIFACT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{stage} stage failed: {message}")]
    Stage { stage: Stage, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Stage { .. } => 1,
            CliError::Io(_) => 3,
        }
    }

    fn stage(stage: Stage, e: impl fmt::Display) -> Self {
        CliError::Stage { stage, message: e.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Wkb,
    Trace,
    Scatter,
    Regions,
    Sq,
    Verify,
    Solve,
}

impl Stage {
    pub const ALL: [Stage; 7] =
        [Stage::Wkb, Stage::Trace, Stage::Scatter, Stage::Regions, Stage::Sq, Stage::Verify, Stage::Solve];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Wkb => "wkb",
            Stage::Trace => "trace",
            Stage::Scatter => "scatter",
            Stage::Regions => "regions",
            Stage::Sq => "sq",
            Stage::Verify => "verify",
            Stage::Solve => "solve",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Svg,
    #[default]
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Float,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    /// `a_0, …, a_{m−1}` of `ℏ^mψ^{(m)} = Σ a_k ℏ^kψ^{(k)}`; `["Q", "0"]` is
    /// the Schrödinger equation with potential `Q`.
    pub coefficients: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConeSpec {
    /// Sectoroid in the `ℏ`-plane as `[θ₁, θ₂]` pairs in radians; the
    /// exponent cone of the solve stage is its polar dual. Without sectors
    /// the solve stage uses `ℝ≥0`.
    pub sectors: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WkbSpec {
    /// Sample points; when absent, `samples` points are drawn from the seed.
    pub points: Option<Vec<[f64; 2]>>,
    pub samples: usize,
    /// Log-spaced `ℏ` grid `[low, high, count]`.
    pub hbar_grid: (f64, f64, usize),
}

impl Default for WkbSpec {
    fn default() -> Self {
        Self { points: None, samples: 5, hbar_grid: (1e-3, 1e-1, 5) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionSpec {
    /// Matrix of `Ω` in `x`, `h` and `T^c`.
    pub rows: Vec<Vec<String>>,
    #[serde(default)]
    pub base: [f64; 2],
    #[serde(default = "default_jet_order")]
    pub jet_order: usize,
}

fn default_jet_order() -> usize {
    SolveOptions::default().jet_order
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub format: Format,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), format: Format::Both }
    }
}

fn default_schema() -> u32 {
    SPEC_SCHEMA_VERSION
}
fn default_hbar_order() -> i32 {
    4
}
fn default_depth() -> usize {
    6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub potential: PotentialSpec,
    /// Phase `θ` in radians.
    #[serde(default)]
    pub theta: f64,
    /// Novikov cutoff `E`.
    pub cutoff: f64,
    /// Weight at which curves stop; defaults to the cutoff.
    #[serde(default)]
    pub c_max: Option<f64>,
    /// `ℏ`-truncation order `N`; also the WKB order.
    #[serde(default = "default_hbar_order")]
    pub hbar_order: i32,
    #[serde(default = "default_depth")]
    pub max_depth: usize,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub cone: ConeSpec,
    #[serde(default)]
    pub tracer: TraceOptions,
    #[serde(default)]
    pub rules: GluingRules,
    #[serde(default)]
    pub wkb: WkbSpec,
    #[serde(default)]
    pub connection: Option<ConnectionSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ProblemSpec {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let spec: Self = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("problem serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Parse(m));
        if self.schema_version != SPEC_SCHEMA_VERSION {
            return bad(format!("unsupported schema_version {}", self.schema_version));
        }
        if !(self.cutoff.is_finite() && self.cutoff > 0.0) {
            return bad("cutoff must be positive".into());
        }
        if self.c_max.is_some_and(|c| !(c.is_finite() && c > 0.0)) {
            return bad("c_max must be positive".into());
        }
        if !self.theta.is_finite() {
            return bad("theta must be finite".into());
        }
        if self.hbar_order < 1 {
            return bad("hbar_order must be at least 1".into());
        }
        let (lo, hi, n) = self.wkb.hbar_grid;
        if !(lo > 0.0 && hi > lo && n >= 2) {
            return bad("wkb.hbar_grid needs 0 < low < high and at least two points".into());
        }
        self.tracer.validate().map_err(|e| CliError::Parse(e.to_string()))?;
        Potential::<f64>::parse(&self.potential.coefficients).map_err(potential_error)?;
        Ok(())
    }

    pub fn weight_cutoff(&self) -> f64 {
        self.c_max.unwrap_or(self.cutoff)
    }
}

fn potential_error(e: StokesError) -> CliError {
    match e {
        StokesError::Parse(m) => CliError::Parse(format!("potential: {m}")),
        other => CliError::Parse(format!("potential: {other}")),
    }
}

/// Command-line values that override the problem file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub theta: Option<f64>,
    pub cutoff: Option<f64>,
    pub order: Option<i32>,
    pub c_max: Option<f64>,
    pub depth: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, spec: &mut ProblemSpec) -> Result<(), CliError> {
        macro_rules! set {
            ($field:ident => $($target:tt)+) => {
                if let Some(v) = self.$field.clone() {
                    spec.$($target)+ = v;
                }
            };
        }
        set!(theta => theta);
        set!(cutoff => cutoff);
        set!(order => hbar_order);
        set!(depth => max_depth);
        set!(out => output.dir);
        set!(format => output.format);
        set!(mode => mode);
        set!(seed => seed);
        if self.c_max.is_some() {
            spec.c_max = self.c_max;
        }
        spec.validate()
    }
}

/// What a pipeline run produced.
#[derive(Debug, Clone, Default)]
pub struct PipelineOutput {
    pub artifacts: Vec<PathBuf>,
    pub graph: Option<StokesGraph>,
    pub report: Option<CocycleReport>,
}

struct Writer<'a> {
    dir: &'a Path,
    format: Format,
    written: Vec<PathBuf>,
}

impl Writer<'_> {
    fn write(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut body = text.to_string();
        if !body.ends_with('\n') {
            body.push('\n');
        }
        fs::write(&path, body)?;
        info!("wrote {}", path.display());
        self.written.push(path);
        Ok(())
    }

    fn graph(&mut self, stage: Stage, g: &StokesGraph) -> Result<(), CliError> {
        if self.format != Format::Svg {
            self.write(&format!("{stage}.json"), &graph_json(g))?;
        }
        if self.format != Format::Json {
            self.write(&format!("{stage}.svg"), &graph_svg(g))?;
        }
        Ok(())
    }
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("artifact serializes")
}

/// Runs the requested stages in pipeline order. Stages a requested one
/// depends on are computed without writing their artifacts.
pub fn run_pipeline(spec: &ProblemSpec, stages: &[Stage]) -> Result<PipelineOutput, CliError> {
    spec.validate()?;
    match spec.mode {
        Mode::Float => run_in::<f64>(spec, stages),
        Mode::Exact => run_in::<BigRational>(spec, stages),
    }
}

fn run_in<R: Real>(spec: &ProblemSpec, stages: &[Stage]) -> Result<PipelineOutput, CliError> {
    let wants = |s: Stage| stages.contains(&s);
    fs::create_dir_all(&spec.output.dir)?;
    let mut w = Writer { dir: &spec.output.dir, format: spec.output.format, written: Vec::new() };
    w.write("problem.toml", &spec.to_toml())?;
    let mut out = PipelineOutput::default();

    let potential = Potential::<R>::parse(&spec.potential.coefficients).map_err(potential_error)?;

    if wants(Stage::Wkb) {
        w.write("wkb.json", &wkb_artifact(spec, &potential)?)?;
    }

    let needs_graph = [Stage::Trace, Stage::Scatter, Stage::Regions, Stage::Sq, Stage::Verify].iter().any(|s| wants(*s));
    if needs_graph {
        let mut g = trace_stokes_curves(&potential, spec.theta, spec.weight_cutoff(), &spec.tracer)
            .map_err(|e| CliError::stage(Stage::Trace, e))?;
        if wants(Stage::Trace) {
            w.graph(Stage::Trace, &g)?;
        }
        let downstream = [Stage::Regions, Stage::Sq, Stage::Verify].iter().any(|s| wants(*s));
        if wants(Stage::Scatter) || (downstream && potential.order() > 2) {
            g = higher_order_scattering(&g, spec.max_depth).map_err(|e| CliError::stage(Stage::Scatter, e))?;
            if wants(Stage::Scatter) {
                w.graph(Stage::Scatter, &g)?;
            }
        }
        if downstream {
            g.arrangement = Some(detect_regions(&g).map_err(|e| CliError::stage(Stage::Regions, e))?);
            if wants(Stage::Regions) {
                w.graph(Stage::Regions, &g)?;
            }
        }
        if wants(Stage::Sq) || wants(Stage::Verify) {
            let sq = build_sq::<R>(&g, &spec.rules).map_err(|e| CliError::stage(Stage::Sq, e))?;
            if wants(Stage::Sq) {
                w.write("sq.json", &sq_json(&sq, None))?;
            }
            if wants(Stage::Verify) {
                let report = check_cocycle(&sq, &CocycleOptions::default());
                if !report.pass {
                    warn!("cocycle check failed at vertices {:?}", report.failed);
                }
                w.write("verify.json", &verify_artifact(&report))?;
                out.report = Some(report);
            }
        }
        out.graph = Some(g);
    }

    if wants(Stage::Solve) {
        let Some(cs) = &spec.connection else {
            return Err(CliError::stage(Stage::Solve, "the problem has no [connection] section"));
        };
        w.write("solve.json", &solve_artifact::<R>(spec, cs)?)?;
    }
    out.artifacts = w.written;
    Ok(out)
}

#[derive(Serialize)]
struct WkbTermDoc {
    n: usize,
    /// `S_n = a + b·√Q`.
    a: String,
    b: String,
}

#[derive(Serialize)]
struct WkbSampleDoc {
    x: [f64; 2],
    hbar: Vec<f64>,
    residual: Vec<f64>,
    slope: f64,
}

#[derive(Serialize)]
struct WkbDoc {
    schema_version: u32,
    kind: &'static str,
    mode: &'static str,
    q: String,
    order: usize,
    terms: Vec<WkbTermDoc>,
    samples: Vec<WkbSampleDoc>,
}

fn wkb_artifact<R: Real>(spec: &ProblemSpec, p: &Potential<R>) -> Result<String, CliError> {
    let q = p.q().ok_or_else(|| CliError::stage(Stage::Wkb, "the wkb stage needs a Schrödinger equation [\"Q\", \"0\"]"))?;
    let series = wkb_recursion(q, spec.hbar_order as usize).map_err(|e| CliError::stage(Stage::Wkb, e))?;
    let tps: Vec<Complex64> = turning_points(p)
        .map_err(|e| CliError::stage(Stage::Wkb, e))?
        .iter()
        .map(|t| t.position)
        .chain(p.poles())
        .collect();
    let points: Vec<Complex64> = match &spec.wkb.points {
        Some(pts) => pts.iter().map(|z| Complex64::new(z[0], z[1])).collect(),
        None => {
            let scale = tps.iter().map(|z| z.norm()).fold(1.0, f64::max);
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let mut pts = Vec::new();
            while pts.len() < spec.wkb.samples {
                let z = Complex64::from_polar(rng.gen_range(0.5..2.0) * scale, rng.gen_range(0.0..std::f64::consts::TAU));
                if tps.iter().all(|t| (z - t).norm() > 0.25 * scale) {
                    pts.push(z);
                }
            }
            pts
        }
    };
    let (lo, hi, n) = spec.wkb.hbar_grid;
    let hbar = log_grid(lo, hi, n);
    let mut samples = Vec::with_capacity(points.len());
    for x in points {
        let residual: Vec<f64> = series
            .residual_profile(x, &hbar, 1.0)
            .map_err(|e| CliError::stage(Stage::Wkb, format!("at {x}: {e}")))?
            .iter()
            .map(|r| r.norm())
            .collect();
        let slope = loglog_slope(&hbar, &residual);
        samples.push(WkbSampleDoc { x: [x.re, x.im], hbar: hbar.clone(), residual, slope });
    }
    Ok(pretty(&WkbDoc {
        schema_version: ARTIFACT_SCHEMA_VERSION,
        kind: "wkb",
        mode: R::MODE,
        q: q.to_string(),
        order: series.order(),
        terms: series
            .terms
            .iter()
            .enumerate()
            .map(|(n, t)| WkbTermDoc { n, a: t.a.to_string(), b: t.b.to_string() })
            .collect(),
        samples,
    }))
}

#[derive(Serialize)]
struct VerifyDoc<'a> {
    schema_version: u32,
    kind: &'static str,
    #[serde(flatten)]
    report: &'a CocycleReport,
}

fn verify_artifact(report: &CocycleReport) -> String {
    pretty(&VerifyDoc { schema_version: ARTIFACT_SCHEMA_VERSION, kind: "cocycle_report", report })
}

#[derive(Serialize)]
struct SolutionDoc {
    /// `−α` of the prefactor `e^{−α/ℏ}` as a jet at the base point.
    prefactor: serde_json::Value,
    phi: Vec<TransseriesRecord>,
    residual_terms: usize,
    residual_max: f64,
}

#[derive(Serialize)]
struct SolveDoc {
    schema_version: u32,
    kind: &'static str,
    mode: &'static str,
    method: &'static str,
    c_star: Option<f64>,
    solutions: Vec<SolutionDoc>,
}

fn solve_cone<R: Real>(spec: &ProblemSpec) -> Result<ConicRegion<R>, CliError> {
    match &spec.cone.sectors {
        None => Ok(ConicRegion::nonnegative_reals()),
        Some(sectors) => {
            let s = sectors
                .iter()
                .map(|[a, b]| Sector::<R>::from_radians(*a, *b, 1.0))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Parse(e.to_string()))?;
            Ok(cone_of(&s).map_err(|e| CliError::Parse(e.to_string()))?.polar_dual())
        }
    }
}

fn residual_size<R: Real>(r: &[Transseries<R, Jet<R>>]) -> (usize, f64) {
    let mut count = 0;
    let mut max = 0.0f64;
    for t in r {
        for (_, p) in t.terms() {
            for (_, v) in p.iter() {
                count += 1;
                max = v.coeffs().iter().map(|c| c_to_f64(c).norm()).fold(max, f64::max);
            }
        }
    }
    (count, max)
}

fn solve_artifact<R: Real>(spec: &ProblemSpec, cs: &ConnectionSpec) -> Result<String, CliError> {
    let err = |e: &dyn fmt::Display| CliError::stage(Stage::Solve, e);
    let trunc = Arc::new(
        Truncation::new(solve_cone::<R>(spec)?, R::from_f64_lossy(spec.cutoff), spec.hbar_order).map_err(|e| err(&e))?,
    );
    let base = c_from_f64::<R>(Complex64::new(cs.base[0], cs.base[1]));
    let conn = HbarConnection::from_strings(&cs.rows, trunc.clone(), base).map_err(|e| CliError::Parse(e.to_string()))?;
    let opts = SolveOptions { jet_order: cs.jet_order };
    let (method, c_star, solutions, omega): (_, _, Vec<LinearSolution<R>>, Matrix<Transseries<R, Jet<R>>>) =
        if conn.is_diagonal() {
            let init: Vec<_> = (0..conn.rank()).map(|_| Transseries::constant(trunc.clone(), c_one())).collect();
            let sols = solve_linear(&conn, &init, &opts).map_err(|e| err(&e))?;
            let omega = conn.to_jets(opts.jet_order).map_err(|e| err(&e))?.omega().clone();
            ("linear", None, sols, omega)
        } else {
            let wd = weak_diagonalize(&conn, &WeakOptions::default()).map_err(|e| err(&e))?;
            let sols = solution_basis(&wd).map_err(|e| err(&e))?;
            ("weak_diagonalization", Some(wd.c_star), sols, wd.conn.omega().clone())
        };
    let mut docs = Vec::with_capacity(solutions.len());
    for s in &solutions {
        let (residual_terms, residual_max) = residual_size(&s.residual(&omega).map_err(|e| err(&e))?);
        docs.push(SolutionDoc {
            prefactor: s.prefactor().record(),
            phi: s.phi.iter().map(|p| p.record()).collect(),
            residual_terms,
            residual_max,
        });
    }
    Ok(pretty(&SolveDoc {
        schema_version: ARTIFACT_SCHEMA_VERSION,
        kind: "solve",
        mode: R::MODE,
        method,
        c_star,
        solutions: docs,
    }))
}

#[derive(Debug, Parser)]
#[command(name = "exact-wkb", version, about = "Exact-WKB Stokes geometry and sheaf-quantization data")]
pub struct Cli {
    #[command(subcommand)]
    pub verb: Verb,
}

#[derive(Debug, Subcommand)]
pub enum Verb {
    /// Formal WKB series and Riccati residual slopes.
    Wkb(RunArgs),
    /// Trace generation-0 Stokes curves.
    Trace(RunArgs),
    /// Add higher-generation curves at intersections.
    Scatter(RunArgs),
    /// Planar arrangement and regions.
    Regions(RunArgs),
    /// Build sheaf-quantization data.
    Sq(RunArgs),
    /// Check the gluing cocycle around every vertex.
    Verify(RunArgs),
    /// Solve the connection in the problem file.
    Solve(RunArgs),
    /// Every stage; solve only when the problem has a connection.
    All(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Problem file (TOML).
    pub problem: PathBuf,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub cutoff: Option<f64>,
    #[arg(long)]
    pub order: Option<i32>,
    #[arg(long = "c-max")]
    pub c_max: Option<f64>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long, conflicts_with = "float")]
    pub exact: bool,
    #[arg(long)]
    pub float: bool,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl RunArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            theta: self.theta,
            cutoff: self.cutoff,
            order: self.order,
            c_max: self.c_max,
            depth: self.depth,
            out: self.out.clone(),
            format: self.format,
            mode: if self.exact {
                Some(Mode::Exact)
            } else if self.float {
                Some(Mode::Float)
            } else {
                None
            },
            seed: self.seed,
        }
    }
}

impl Verb {
    pub fn args(&self) -> &RunArgs {
        match self {
            Verb::Wkb(a)
            | Verb::Trace(a)
            | Verb::Scatter(a)
            | Verb::Regions(a)
            | Verb::Sq(a)
            | Verb::Verify(a)
            | Verb::Solve(a)
            | Verb::All(a) => a,
        }
    }

    pub fn stages(&self, spec: &ProblemSpec) -> Vec<Stage> {
        match self {
            Verb::Wkb(_) => vec![Stage::Wkb],
            Verb::Trace(_) => vec![Stage::Trace],
            Verb::Scatter(_) => vec![Stage::Scatter],
            Verb::Regions(_) => vec![Stage::Regions],
            Verb::Sq(_) => vec![Stage::Sq],
            Verb::Verify(_) => vec![Stage::Verify],
            Verb::Solve(_) => vec![Stage::Solve],
            Verb::All(_) => {
                let order2 = Potential::<f64>::parse(&spec.potential.coefficients).is_ok_and(|p| p.q().is_some());
                Stage::ALL
                    .into_iter()
                    .filter(|s| match s {
                        Stage::Wkb => order2,
                        Stage::Solve => spec.connection.is_some(),
                        _ => true,
                    })
                    .collect()
            }
        }
    }
}

/// Entry point behind the binary: returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let go = || -> Result<PipelineOutput, CliError> {
        let args = cli.verb.args();
        let mut spec = ProblemSpec::load(&args.problem)?;
        args.overrides().apply(&mut spec)?;
        run_pipeline(&spec, &cli.verb.stages(&spec))
    };
    match go() {
        Ok(out) => {
            for a in &out.artifacts {
                println!("{}", a.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn airy(dir: &Path) -> ProblemSpec {
        let mut s = ProblemSpec::from_toml("cutoff = 1000.0\n[potential]\ncoefficients = [\"x\", \"0\"]\n").unwrap();
        s.output.dir = dir.to_path_buf();
        s
    }

    #[test]
    fn minimal_problem_round_trips() {
        let s = airy(Path::new("o"));
        let back = ProblemSpec::from_toml(&s.to_toml()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_toml(), s.to_toml());
    }

    #[test]
    fn bad_problems_are_parse_errors() {
        for text in [
            "cutoff = 1.0\n[potential]\ncoefficients = [\"x +\", \"0\"]\n",
            "cutoff = -1.0\n[potential]\ncoefficients = [\"x\", \"0\"]\n",
            "cutoff = 1.0\nbogus = 3\n[potential]\ncoefficients = [\"x\", \"0\"]\n",
            "[potential]\ncoefficients = [\"x\", \"0\"]\n",
        ] {
            let e = ProblemSpec::from_toml(text).unwrap_err();
            assert!(matches!(e, CliError::Parse(_)), "{text}: {e}");
            assert_eq!(e.exit_code(), 2);
        }
    }

    #[test]
    fn overrides_take_precedence() {
        let mut s = airy(Path::new("o"));
        let o = Overrides { theta: Some(0.5), order: Some(6), mode: Some(Mode::Exact), ..Default::default() };
        o.apply(&mut s).unwrap();
        assert_eq!((s.theta, s.hbar_order, s.mode), (0.5, 6, Mode::Exact));
        assert!(Overrides { cutoff: Some(0.0), ..Default::default() }.apply(&mut s).is_err());
    }

    #[test]
    fn all_skips_inapplicable_stages() {
        let s = airy(Path::new("o"));
        let v = Verb::All(RunArgs {
            problem: PathBuf::new(),
            theta: None,
            cutoff: None,
            order: None,
            c_max: None,
            depth: None,
            out: None,
            format: None,
            exact: false,
            float: false,
            seed: None,
        });
        assert_eq!(v.stages(&s), vec![Stage::Wkb, Stage::Trace, Stage::Scatter, Stage::Regions, Stage::Sq, Stage::Verify]);
    }
}
