//! Command-line front end. One JSON config per run; every output file is
//! stamped with the toolkit version and the SHA-256 of the normalized config.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cellsolver::CellResolution;
use crate::direct3d::{validate, MeshSettings, SolveSettings, ThinDomainSpec};
use crate::homsolver::{solve_homogenized, Field2, HomSettings, HomogenizedProblem};
use crate::io;
use crate::profile::{ProfileFunction, Quadrature2D, CATALOG};
use crate::regime::{classify, effective_coefficients, EffectiveCoefficients};
use crate::unfolding::{run_suite, UnfoldResolution, UnfoldTolerances};
use crate::{Error, Rect, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 1;
    pub const UNSUPPORTED_REGIME: i32 = 2;
    pub const SOLVER: i32 = 3;
    pub const BUDGET: i32 = 4;
}

#[derive(Debug, Parser)]
#[command(name = "thinhom", version, about = "Homogenization toolkit for thin domains with doubly oscillating tops")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` of the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Run everything on one thread.
    #[arg(long, global = true)]
    pub serial: bool,
    /// Progress messages on stderr.
    #[arg(long, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Effective coefficients of the configured regime.
    Coeffs,
    /// Coefficients and the homogenized solution.
    Solve,
    /// Direct thin-domain solves over the epsilon list against the homogenized solution.
    Validate,
    /// Unfolding operator identity suite.
    UnfoldCheck,
    /// Lists the profile catalog.
    Profiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    Catalog { name: String, params: Vec<f64> },
    Table { periods: [f64; 2], rows: Vec<[f64; 5]> },
    /// Smooth random Fourier profile drawn with the config seed.
    RandomFourier { modes: usize, mean: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    Constant {
        value: f64,
    },
    /// `amplitude cos(k1 pi x1) cos(k2 pi x2)`.
    CosCos {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        k1: f64,
        #[serde(default = "one")]
        k2: f64,
    },
    /// `sum c x1^p x2^q` over terms `[c, p, q]`.
    Polynomial { terms: Vec<[f64; 3]> },
}

fn one() -> f64 {
    1.0
}

impl Default for SourceSpec {
    fn default() -> Self {
        SourceSpec::Constant { value: 1.0 }
    }
}

impl SourceSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let ok = match self {
            SourceSpec::Constant { value } => value.is_finite(),
            SourceSpec::CosCos { amplitude, k1, k2 } => finite(&[*amplitude, *k1, *k2]),
            SourceSpec::Polynomial { terms } => terms
                .iter()
                .all(|t| finite(t) && t[1] >= 0.0 && t[2] >= 0.0 && t[1].fract() == 0.0 && t[2].fract() == 0.0),
        };
        if !ok {
            return Err(Error::InvalidInput(format!(
                "source {self:?} needs finite values and non-negative integer exponents"
            )));
        }
        Ok(())
    }

    pub fn field(&self) -> Field2 {
        let pi = std::f64::consts::PI;
        match self.clone() {
            SourceSpec::Constant { value } => Arc::new(move |_, _| value),
            SourceSpec::CosCos { amplitude, k1, k2 } => {
                Arc::new(move |a, b| amplitude * (k1 * pi * a).cos() * (k2 * pi * b).cos())
            }
            SourceSpec::Polynomial { terms } => Arc::new(move |a, b| {
                terms.iter().map(|t| t[0] * a.powi(t[1] as i32) * b.powi(t[2] as i32)).sum()
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    pub cell: CellResolution,
    /// Homogenized solve grid.
    pub hom_n1: usize,
    pub hom_n2: usize,
    pub cells_per_period: usize,
    pub nz: usize,
    pub budget: u64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        let d = MeshSettings::default();
        MeshConfig {
            cell: CellResolution::default(),
            hom_n1: 128,
            hom_n2: 128,
            cells_per_period: d.cells_per_period,
            nz: d.nz,
            budget: d.budget,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceConfig {
    /// Relative residual of the homogenized and direct solves.
    pub solver: f64,
    pub unfold: UnfoldTolerances,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig {
            solver: 1e-10,
            unfold: UnfoldTolerances::default(),
        }
    }
}

fn unit_rect() -> Rect {
    Rect::unit()
}

fn default_epsilons() -> Vec<f64> {
    vec![0.2, 0.1, 0.05]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub profile: ProfileSpec,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default = "unit_rect")]
    pub omega: Rect,
    #[serde(default)]
    pub source: SourceSpec,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    #[serde(default)]
    pub unfold: UnfoldResolution,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !(self.alpha.is_finite() && self.beta.is_finite() && self.alpha >= 0.0 && self.beta >= 0.0) {
            return bad(format!("alpha and beta must be finite and non-negative, got ({}, {})", self.alpha, self.beta));
        }
        self.omega.validate()?;
        self.source.validate()?;
        if self.epsilons.is_empty() || self.epsilons.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return bad(format!("epsilons must be a non-empty list in (0, 1), got {:?}", self.epsilons));
        }
        let m = &self.mesh;
        if m.hom_n1 < 2 || m.hom_n2 < 2 {
            return bad(format!("hom_n1 and hom_n2 must be at least 2, got {} x {}", m.hom_n1, m.hom_n2));
        }
        if m.cells_per_period < 4 || m.nz < 1 || m.budget == 0 {
            return bad(format!(
                "need cells_per_period >= 4, nz >= 1 and a positive budget, got {}, {}, {}",
                m.cells_per_period, m.nz, m.budget
            ));
        }
        if m.cell.n_h < 2 || m.cell.n_v < 2 || m.cell.n_y1 < 1 || m.cell.n_y1_cap < m.cell.n_y1 || !(m.cell.tol > 0.0) {
            return bad(format!("invalid cell resolution {:?}", m.cell));
        }
        self.unfold.validate()?;
        let t = &self.tolerances;
        let u = &t.unfold;
        let all = [t.solver, u.exact, u.smooth, u.norm, u.pi_norm, u.oscillating, u.derivative_ratio, u.h_fd];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || !(t.solver > 0.0 && u.h_fd > 0.0) {
            return bad(format!("tolerances must be finite and non-negative: {t:?}"));
        }
        if let ProfileSpec::RandomFourier { modes, mean } = self.profile {
            if modes == 0 || !(mean > 0.0) {
                return bad(format!("random_fourier needs modes >= 1 and mean > 0, got {modes}, {mean}"));
            }
        }
        Ok(())
    }

    pub fn profile(&self) -> Result<ProfileFunction> {
        match &self.profile {
            ProfileSpec::Catalog { name, params } => ProfileFunction::from_catalog(name, params),
            ProfileSpec::Table { periods, rows } => ProfileFunction::from_table(*periods, rows),
            ProfileSpec::RandomFourier { modes, mean } => ProfileFunction::random_fourier(self.seed, *modes, *mean),
        }
    }

    /// SHA-256 of the normalized JSON form (defaults filled in).
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Maps a library error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidInput(_) | Error::InvalidProfile(_) => exit::CONFIG,
        Error::UnsupportedRegime { .. } => exit::UNSUPPORTED_REGIME,
        Error::BudgetExceeded { .. } => exit::BUDGET,
        _ => exit::SOLVER,
    }
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    toolkit: &'static str,
    version: &'static str,
    config_hash: &'a str,
    command: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

struct Context {
    cfg: RunConfig,
    hash: String,
    out: PathBuf,
    verbose: bool,
    serial: bool,
}

impl Context {
    fn stamp(&self) -> String {
        format!("thinhom {VERSION} config {}", self.hash)
    }

    fn json<T: Serialize>(&self, name: &str, command: &str, body: &T) -> Result<()> {
        let text = io::to_json(&Stamped {
            toolkit: "thinhom",
            version: VERSION,
            config_hash: &self.hash,
            command,
            body,
        })?;
        io::write_file(&self.out, name, &text)
    }

    fn csv(&self, name: &str, body: &str) -> Result<()> {
        io::write_file(&self.out, name, &io::csv_with_stamp(&self.stamp(), body))
    }

    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("thinhom: {}", msg.as_ref());
        }
    }

    fn coefficients(&self, g: &ProfileFunction) -> Result<EffectiveCoefficients> {
        let class = classify(self.cfg.alpha, self.cfg.beta)?;
        self.log(format!("regime {class}, profile {}", g.name()));
        effective_coefficients(class, g, &Quadrature2D::default(), &self.cfg.mesh.cell)
    }
}

#[derive(Serialize)]
struct ResonantDigest {
    value: f64,
    n_y1: usize,
    last_change: Option<f64>,
}

#[derive(Serialize)]
struct CoeffsReport {
    profile: String,
    alpha: f64,
    beta: f64,
    #[serde(flatten)]
    summary: crate::regime::CoefficientSummary,
    resonant: Option<ResonantDigest>,
}

fn coeffs_report(ctx: &Context, g: &ProfileFunction, c: &EffectiveCoefficients) -> CoeffsReport {
    CoeffsReport {
        profile: g.name().to_string(),
        alpha: ctx.cfg.alpha,
        beta: ctx.cfg.beta,
        summary: c.summary(),
        resonant: c.resonant.as_ref().map(|r| ResonantDigest {
            value: r.value,
            n_y1: r.n_y1,
            last_change: r.last_change,
        }),
    }
}

fn write_coefficient_tables(ctx: &Context, c: &EffectiveCoefficients) -> Result<()> {
    if let Some(r) = &c.resonant {
        ctx.csv("slices.csv", &r.to_csv())?;
    }
    if let Some(t) = &c.q2_table {
        let mut body = String::from("x1,q2\n");
        for (x, v) in t.abscissae.iter().zip(&t.values) {
            body.push_str(&format!("{x},{v}\n"));
        }
        ctx.csv("q2_table.csv", &body)?;
    }
    Ok(())
}

fn cmd_coeffs(ctx: &Context) -> Result<()> {
    let g = ctx.cfg.profile()?;
    let c = ctx.coefficients(&g)?;
    ctx.json("coeffs.json", "coeffs", &coeffs_report(ctx, &g, &c))?;
    write_coefficient_tables(ctx, &c)
}

#[derive(Serialize)]
struct SolveReport {
    coefficients: CoeffsReport,
    n1: usize,
    n2: usize,
    energy: f64,
    load_work: f64,
    iterations: usize,
    residual: f64,
}

fn homogenized(ctx: &Context, c: EffectiveCoefficients) -> Result<crate::homsolver::HomSolution> {
    let problem = HomogenizedProblem::new(ctx.cfg.omega, c, ctx.cfg.source.field())?;
    let mut settings = HomSettings::new(ctx.cfg.mesh.hom_n1, ctx.cfg.mesh.hom_n2);
    settings.tol = ctx.cfg.tolerances.solver;
    ctx.log(format!("homogenized solve on {} x {}", settings.n1, settings.n2));
    solve_homogenized(&problem, &settings)
}

fn cmd_solve(ctx: &Context) -> Result<()> {
    let g = ctx.cfg.profile()?;
    let c = ctx.coefficients(&g)?;
    let coefficients = coeffs_report(ctx, &g, &c);
    write_coefficient_tables(ctx, &c)?;
    let hom = homogenized(ctx, c)?;
    let mesh = &hom.field.mesh;
    io::write_file(&ctx.out, "u_hom.vtk", &io::vtk_triangles(mesh, &[("u_hom", &hom.field.values)], &ctx.stamp())?)?;
    ctx.csv("u_hom.csv", &io::nodal_csv(mesh, "u_hom", &hom.field.values)?)?;
    ctx.json(
        "summary.json",
        "solve",
        &SolveReport {
            coefficients,
            n1: hom.n1,
            n2: hom.n2,
            energy: hom.energy,
            load_work: hom.load_work,
            iterations: hom.iterations,
            residual: hom.residual,
        },
    )
}

fn cmd_validate(ctx: &Context) -> Result<()> {
    let cfg = &ctx.cfg;
    let g = cfg.profile()?;
    let specs = cfg
        .epsilons
        .iter()
        .map(|&e| ThinDomainSpec::new(e, cfg.alpha, cfg.beta, g.clone(), cfg.omega, cfg.source.field()))
        .collect::<Result<Vec<_>>>()?;
    let mesh = MeshSettings {
        cells_per_period: cfg.mesh.cells_per_period,
        nz: cfg.mesh.nz,
        budget: cfg.mesh.budget,
    };
    // fail on the budget before spending time on coefficients
    for s in &specs {
        crate::direct3d::build_thin_mesh(s, &mesh)?;
    }
    let c = ctx.coefficients(&g)?;
    let hom = homogenized(ctx, c)?;
    let solve = SolveSettings {
        tol: cfg.tolerances.solver,
        ..SolveSettings::default()
    };
    ctx.log(format!("direct solves for eps in {:?}", cfg.epsilons));
    let report = validate(&specs, &hom, &mesh, &solve, !ctx.serial)?;
    ctx.csv("validation.csv", &report.to_csv())?;
    ctx.json("validation.json", "validate", &report)
}

/// Returns whether every check passed.
fn cmd_unfold_check(ctx: &Context) -> Result<bool> {
    let cfg = &ctx.cfg;
    let g = cfg.profile()?;
    ctx.log(format!("unfolding suite for eps in {:?}", cfg.epsilons));
    let report = run_suite(&g, cfg.alpha, cfg.beta, cfg.omega, &cfg.epsilons, cfg.unfold, &cfg.tolerances.unfold)?;
    ctx.json("unfold_report.json", "unfold-check", &report)?;
    for c in report.checks.iter().filter(|c| !c.passed) {
        eprintln!(
            "thinhom: {} check for '{}' at eps = {}: discrepancy {:e} exceeds {:e}",
            c.report.identity, c.field, c.report.epsilon, c.report.discrepancy, c.tolerance
        );
    }
    if !report.defect_monotone {
        eprintln!("thinhom: unfolding defect does not decrease along the eps sweep");
    }
    Ok(report.all_passed)
}

fn list_profiles() -> String {
    let mut s = String::new();
    for (name, doc, params) in CATALOG {
        s.push_str(&format!("{name}\t{params:?}\t{doc}\n"));
    }
    s
}

fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read config {}: {e}", path.display())))?;
    RunConfig::from_json(&text)
}

fn dispatch(cli: &Cli) -> Result<i32> {
    if cli.command == Command::Profiles {
        print!("{}", list_profiles());
        return Ok(exit::OK);
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("--config is required for this command".into()))?;
    let cfg = load_config(path)?;
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let ctx = Context {
        hash: cfg.hash(),
        cfg,
        out,
        verbose: cli.verbose,
        serial: cli.serial,
    };
    match cli.command {
        Command::Coeffs => cmd_coeffs(&ctx)?,
        Command::Solve => cmd_solve(&ctx)?,
        Command::Validate => cmd_validate(&ctx)?,
        Command::UnfoldCheck => {
            if !cmd_unfold_check(&ctx)? {
                return Ok(exit::SOLVER);
            }
        }
        Command::Profiles => unreachable!(),
    }
    ctx.log(format!("outputs in {}", ctx.out.display()));
    Ok(exit::OK)
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::CONFIG } else { exit::OK };
        }
    };
    let go = || match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("thinhom: {e}");
            exit_code(&e)
        }
    };
    if cli.serial {
        match rayon::ThreadPoolBuilder::new().num_threads(1).build() {
            Ok(pool) => pool.install(go),
            Err(e) => {
                eprintln!("thinhom: cannot build the serial thread pool: {e}");
                exit::SOLVER
            }
        }
    } else {
        go()
    }
}
