//! Command-line front end.
//!
//! Every command reads one TOML run configuration, applies flag overrides,
//! and writes its artifacts to the output directory. JSON artifacts embed
//! the resolved configuration and the crate version; nothing depends on the
//! wall clock, so reruns with the same configuration and seed reproduce
//! every file byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::anneal::{
    AnnealConfig, DriftMethod, EnsembleStats, Engine, JumpHandling, Mode, Neighborhood, Schedules,
    DEFAULT_S_MIN, DEFAULT_T_OFFSET,
};
use crate::cost::{h_functional, u_smoothed, DEFAULT_QUADRATURE_NODES};
use crate::empirics::{
    basin_jumps, mean_process, records_to_csv, uniqueness_probe, MeanFinder, ProbeLaw, ProbeReport,
    DEFAULT_REFINE_TOL,
};
use crate::error::{Error, Result};
use crate::landscape::{elevation_constant, recommended_k, ElevationReport, Grid, ScalarField};
use crate::manifold::{Manifold, Point};
use crate::measure::DiscreteMeasure;
use crate::rng::stream;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "pmeans", version, about = "Locate p-means on compact symmetric spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate an annealing ensemble; writes runs_NNN.csv, ensemble.json, hitrate.svg.
    Anneal(CommonArgs),
    /// Brute-force p-mean of the configured measure; writes landscape.csv, oracle.json.
    Oracle(CommonArgs),
    /// Critical elevation of the cost landscape; writes elevation.json.
    Landscape(CommonArgs),
    /// Check the smoothing-split identity U(s1, s2) = U(0, s1 + s2); writes lemma2.json.
    Lemma2(CommonArgs),
    /// Empirical p-mean process and uniqueness probe; writes mean_process_NNN.csv, empirical.json.
    Empirical(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Run configuration (TOML).
    pub config: PathBuf,
    /// Master seed (overrides `seed`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: logical cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    pub dry_run: bool,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Annealing constant (overrides `anneal.k`).
    #[arg(long)]
    pub k: Option<f64>,
    /// Override any config key, e.g. `--set anneal.t_end=500`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

/// A number or the word `auto`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AutoOr<T> {
    Value(T),
    Word(String),
}

impl<T: Clone> AutoOr<T> {
    fn resolve(&self, field: &str) -> Result<Option<T>> {
        match self {
            AutoOr::Value(v) => Ok(Some(v.clone())),
            AutoOr::Word(w) if w == "auto" => Ok(None),
            AutoOr::Word(w) => Err(Error::Config(format!("{field}: expected a value or \"auto\", got {w:?}"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// `circle`, `torus:d` or `sphere`.
    pub manifold: String,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub seed: u64,
    /// Not echoed into artifacts: where files go is not part of the experiment.
    #[serde(default = "default_output_dir", skip_serializing)]
    pub output_dir: PathBuf,
    pub measure: MeasureSpec,
    #[serde(default)]
    pub anneal: AnnealSection,
    #[serde(default)]
    pub neighborhood: NeighborhoodSpec,
    #[serde(default)]
    pub landscape: LandscapeSection,
    #[serde(default)]
    pub lemma2: Lemma2Section,
    #[serde(default)]
    pub empirical: EmpiricalSection,
}

/// Inline atoms (chart coordinates) or a CSV file, relative to the config.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnealSection {
    pub mode: Mode,
    pub k: AutoOr<f64>,
    pub t_end: f64,
    pub h_max: f64,
    pub n_runs: usize,
    pub t_offset: f64,
    pub s_min: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta0: Option<Vec<f64>>,
    /// Trajectory recording times; defaults to the checkpoints.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_times: Option<Vec<f64>>,
    /// Hit-fraction times; defaults to the decades `10^j ≤ t_end` and `t_end`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<f64>>,
    pub drift: DriftMethod,
    pub jumps: JumpHandling,
    pub homogenized: bool,
}

impl Default for AnnealSection {
    fn default() -> Self {
        AnnealSection {
            mode: Mode::Smoothed,
            k: AutoOr::Word("auto".into()),
            t_end: 2000.0,
            h_max: 0.01,
            n_runs: 100,
            t_offset: DEFAULT_T_OFFSET,
            s_min: DEFAULT_S_MIN,
            c_step: None,
            theta0: None,
            output_times: None,
            checkpoints: None,
            drift: DriftMethod::Spectral,
            jumps: JumpHandling::Accumulate,
            homogenized: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NeighborhoodSpec {
    /// Chart coordinates, or `auto` for the oracle p-mean.
    pub center: AutoOr<Vec<f64>>,
    pub radius: f64,
}

impl Default for NeighborhoodSpec {
    fn default() -> Self {
        NeighborhoodSpec { center: AutoOr::Word("auto".into()), radius: 0.05 }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LandscapeSection {
    /// Grid resolution; defaults depend on the manifold.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Lemma2Section {
    pub s1: f64,
    pub s2: f64,
    pub points: usize,
    pub nodes: usize,
    pub tolerance: f64,
}

impl Default for Lemma2Section {
    fn default() -> Self {
        Lemma2Section { s1: 0.05, s2: 0.05, points: 50, nodes: DEFAULT_QUADRATURE_NODES, tolerance: 1e-6 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LawKind {
    Uniform,
    Smoothed,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmpiricalSection {
    /// Sampling law of the mean process and the probe.
    pub law: LawKind,
    /// Heat time of the smoothed law.
    pub s: f64,
    pub n_max: usize,
    pub streams: usize,
    /// Moves longer than this start a new basin label; default `0.2·diam`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jump_radius: Option<f64>,
    pub probe_points: usize,
    pub trials: usize,
    pub refine_tol: f64,
}

impl Default for EmpiricalSection {
    fn default() -> Self {
        EmpiricalSection {
            law: LawKind::Smoothed,
            s: 0.01,
            n_max: 100,
            streams: 1,
            jump_radius: None,
            probe_points: 3,
            trials: 200,
            refine_tol: DEFAULT_REFINE_TOL,
        }
    }
}

fn default_p() -> f64 {
    2.0
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Default landscape resolution on `m`.
pub fn default_resolution(m: Manifold) -> usize {
    match m {
        Manifold::Circle => 4096,
        Manifold::Torus(2) => 256,
        Manifold::Torus(_) => 40,
        Manifold::Sphere => 160,
    }
}

/// A configuration with its measure loaded.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub config: RunConfig,
    pub manifold: Manifold,
    pub measure: DiscreteMeasure,
}

impl Loaded {
    pub fn resolution(&self) -> usize {
        self.config.landscape.resolution.unwrap_or_else(|| default_resolution(self.manifold))
    }

    /// Grid of `H`.
    pub fn field(&self) -> Result<ScalarField> {
        let grid = std::sync::Arc::new(Grid::new(self.manifold, self.resolution())?);
        let (nu, p) = (&self.measure, self.config.p);
        ScalarField::evaluate(grid, |y| h_functional(nu, p, y).expect("p validated"))
    }

    fn point(&self, coords: &[f64], field: &str) -> Result<Point> {
        self.manifold.point(coords).map_err(|e| Error::Config(format!("{field}: {e}")))
    }
}

/// Parse, override and validate a configuration file.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<Loaded> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::Config(format!("file not found ({})", path.display())))
        }
        Err(e) => return Err(Error::Io(e)),
    };
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let config: RunConfig = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    resolve(config, base)
}

/// Validate a parsed configuration and load its measure; CSV paths are
/// taken relative to `base`.
pub fn resolve(config: RunConfig, base: &Path) -> Result<Loaded> {
    let manifold: Manifold =
        config.manifold.parse().map_err(|e| Error::Config(format!("manifold: {e}")))?;
    if !(config.p >= 1.0 && config.p.is_finite()) {
        return Err(Error::Config(format!("p must be ≥ 1, got {}", config.p)));
    }
    let m = &config.measure;
    let measure = match (&m.atoms, &m.csv) {
        (Some(atoms), None) => DiscreteMeasure::from_coords(manifold, atoms, m.weights.clone())
            .map_err(|e| Error::Config(format!("measure: {e}")))?,
        (None, Some(csv)) => {
            if m.weights.is_some() {
                return Err(Error::Config("measure.weights: give weights inside the CSV".into()));
            }
            DiscreteMeasure::load_csv(manifold, &base.join(csv)).map_err(|e| match e {
                Error::Io(e) => Error::Io(e),
                e => Error::Config(format!("measure.csv: {e}")),
            })?
        }
        _ => return Err(Error::Config("measure: give exactly one of `atoms` and `csv`".into())),
    };
    if let Some(r) = config.landscape.resolution {
        if r < 3 {
            return Err(Error::Config(format!("landscape.resolution must be ≥ 3, got {r}")));
        }
    }
    config.anneal.k.resolve("anneal.k")?;
    config.neighborhood.center.resolve("neighborhood.center")?;
    if !(config.neighborhood.radius > 0.0) {
        return Err(Error::Config(format!("neighborhood.radius must be positive, got {}", config.neighborhood.radius)));
    }
    Ok(Loaded { config, manifold, measure })
}

/// Apply `a.b.c=value`; the value is read as TOML and falls back to a bare
/// string.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {spec:?}")))?;
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, path) = parts.split_last().expect("split yields one part");
    let mut cur = table;
    for part in path {
        let entry = cur.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("--set {key}: `{part}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// JSON envelope shared by every artifact.
#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    version: &'a str,
    command: &'a str,
    config: &'a RunConfig,
    #[serde(flatten)]
    result: T,
}

fn write_json<T: Serialize>(dir: &Path, name: &str, command: &str, config: &RunConfig, result: T) -> Result<()> {
    let report = Report { version: VERSION, command, config, result };
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| Error::Numerical(format!("json: {e}")))?;
    text.push('\n');
    fs::write(dir.join(name), text)?;
    Ok(())
}

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Argument(_) | Error::Domain(_) => 2,
        Error::Io(_) => 3,
        Error::Numerical(_) | Error::NotDifferentiable(_) => 4,
    }
}

/// Parse `std::env::args`, run, and return the exit status.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            exit_code(&e)
        }
    }
}

pub fn execute(command: &Command) -> Result<()> {
    let (name, args) = match command {
        Command::Anneal(a) => ("anneal", a),
        Command::Oracle(a) => ("oracle", a),
        Command::Landscape(a) => ("landscape", a),
        Command::Lemma2(a) => ("lemma2", a),
        Command::Empirical(a) => ("empirical", a),
    };
    let mut loaded = load_config(&args.config, &args.overrides)?;
    if let Some(seed) = args.seed {
        loaded.config.seed = seed;
    }
    if let Some(k) = args.k {
        loaded.config.anneal.k = AutoOr::Value(k);
    }
    if let Some(out) = &args.out {
        loaded.config.output_dir = out.clone();
    }
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return Err(Error::Config("--jobs must be positive".into()));
        }
        // a second build in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let prepared = match name {
        "anneal" => Some(prepare_anneal(&mut loaded)?),
        _ => None,
    };
    if args.dry_run {
        let text = toml::to_string(&loaded.config).map_err(|e| Error::Config(e.to_string()))?;
        print!("{text}");
        return Ok(());
    }
    let dir = loaded.config.output_dir.clone();
    fs::create_dir_all(&dir)?;
    match name {
        "anneal" => cmd_anneal(&loaded, prepared.expect("prepared above"), &dir),
        "oracle" => cmd_oracle(&loaded, &dir),
        "landscape" => cmd_landscape(&loaded, &dir),
        "lemma2" => cmd_lemma2(&loaded, &dir),
        _ => cmd_empirical(&loaded, &dir),
    }
}

/// Annealing inputs after `auto` resolution.
#[derive(Clone, Debug)]
pub struct PreparedAnneal {
    pub config: AnnealConfig,
    pub neighborhood: Neighborhood,
    pub checkpoints: Vec<f64>,
    /// Grid elevation when `k` was chosen automatically.
    pub c_u: Option<f64>,
}

/// Resolve `auto` fields (writing the values back into the configuration)
/// and build the annealing configuration.
pub fn prepare_anneal(loaded: &mut Loaded) -> Result<PreparedAnneal> {
    let a = loaded.config.anneal.clone();
    let mut c_u = None;
    let needs_field = a.k.resolve("anneal.k")?.is_none() || loaded.config.neighborhood.center.resolve("neighborhood.center")?.is_none();
    let field = if needs_field { Some(loaded.field()?) } else { None };
    let k = match a.k.resolve("anneal.k")? {
        Some(k) => k,
        None => {
            let c = elevation_constant(field.as_ref().expect("field built")).c_u;
            c_u = Some(c);
            recommended_k(c)
        }
    };
    loaded.config.anneal.k = AutoOr::Value(k);
    let center = match loaded.config.neighborhood.center.resolve("neighborhood.center")? {
        Some(c) => loaded.point(&c, "neighborhood.center")?,
        None => {
            let finder = MeanFinder::new(loaded.manifold, loaded.config.p, loaded.resolution(), DEFAULT_REFINE_TOL)?;
            let mean = finder.find_measure(&loaded.measure)?;
            loaded.config.neighborhood.center = AutoOr::Value(mean.point.coords().to_vec());
            mean.point
        }
    };
    let neighborhood = Neighborhood { center, radius: loaded.config.neighborhood.radius };
    let checkpoints = match &a.checkpoints {
        Some(c) => c.clone(),
        None => {
            let mut c: Vec<f64> = (0..)
                .map(|j| 10f64.powi(j))
                .take_while(|&t| t < a.t_end)
                .collect();
            c.push(a.t_end);
            c
        }
    };
    loaded.config.anneal.checkpoints = Some(checkpoints.clone());
    let mut schedules = Schedules::new(k, a.mode).map_err(|e| Error::Config(format!("anneal.{e}")))?;
    schedules.t_offset = a.t_offset;
    schedules.s_min = a.s_min;
    schedules.validate()?;
    let mut config = AnnealConfig::new(loaded.measure.clone(), loaded.config.p, schedules, a.t_end);
    config.h_max = a.h_max;
    config.c_step = a.c_step;
    config.theta0 = a.theta0.as_ref().map(|c| loaded.point(c, "anneal.theta0")).transpose()?;
    config.output_times = a.output_times.clone().unwrap_or_else(|| checkpoints.clone());
    config.drift = a.drift;
    config.jumps = a.jumps;
    config.validate()?;
    if a.n_runs < 30 {
        return Err(Error::Config(format!("anneal.n_runs must be ≥ 30, got {}", a.n_runs)));
    }
    Ok(PreparedAnneal { config, neighborhood, checkpoints, c_u })
}

#[derive(Serialize)]
struct AnnealResult<'a> {
    #[serde(flatten)]
    stats: &'a EnsembleStats,
    k: f64,
    c_u: Option<f64>,
    neighborhood_center: Point,
    neighborhood_radius: f64,
}

fn cmd_anneal(loaded: &Loaded, prepared: PreparedAnneal, dir: &Path) -> Result<()> {
    let seed = loaded.config.seed;
    let n_runs = loaded.config.anneal.n_runs;
    let m = loaded.manifold;
    let k = prepared.config.schedules.k;
    let engine = Engine::new(prepared.config)?;
    let (stats, trajectories) = engine.ensemble(
        seed,
        n_runs,
        &prepared.neighborhood,
        &prepared.checkpoints,
        loaded.config.anneal.homogenized,
    )?;
    for (i, t) in trajectories.iter().enumerate() {
        fs::write(dir.join(format!("runs_{i:03}.csv")), t.to_csv(m))?;
    }
    write_json(
        dir,
        "ensemble.json",
        "anneal",
        &loaded.config,
        AnnealResult {
            stats: &stats,
            k,
            c_u: prepared.c_u,
            neighborhood_center: prepared.neighborhood.center,
            neighborhood_radius: prepared.neighborhood.radius,
        },
    )?;
    fs::write(dir.join("hitrate.svg"), hitrate_svg(&stats))?;
    println!("hit fractions at t = {:?}: {:?}", stats.checkpoints, stats.fractions);
    Ok(())
}

#[derive(Serialize)]
struct OracleResult {
    argmin: Point,
    h_value: f64,
    gap: f64,
    ambiguous: bool,
    runner_up: Option<Point>,
    resolution: usize,
    grid_argmin: Point,
    grid_min: f64,
    basins: usize,
    tie_threshold: f64,
}

fn cmd_oracle(loaded: &Loaded, dir: &Path) -> Result<()> {
    let finder = MeanFinder::new(loaded.manifold, loaded.config.p, loaded.resolution(), DEFAULT_REFINE_TOL)?;
    let field = finder.field(&loaded.measure)?;
    let mean = finder.find_measure(&loaded.measure)?;
    fs::write(dir.join("landscape.csv"), field.to_csv())?;
    let result = OracleResult {
        argmin: mean.point,
        h_value: mean.h_value,
        gap: mean.gap,
        ambiguous: mean.ambiguous,
        runner_up: mean.runner_up,
        resolution: mean.resolution,
        grid_argmin: *field.grid().node(field.argmin()),
        grid_min: field.min(),
        basins: crate::landscape::minimizers(&field, 0.0).basins.len(),
        tie_threshold: finder.tie_threshold(),
    };
    println!(
        "p-mean {} with H = {}, gap {}{}",
        mean.point.to_csv(),
        mean.h_value,
        mean.gap,
        if mean.ambiguous { " (ambiguous)" } else { "" }
    );
    write_json(dir, "oracle.json", "oracle", &loaded.config, result)
}

#[derive(Serialize)]
struct LandscapeResult<'a> {
    #[serde(flatten)]
    report: &'a ElevationReport,
    recommended_k: f64,
    resolution: usize,
    pair: (Point, Point),
}

fn cmd_landscape(loaded: &Loaded, dir: &Path) -> Result<()> {
    let field = loaded.field()?;
    let report = elevation_constant(&field);
    let g = field.grid();
    println!("c(U) = {}, recommended k = {}", report.c_u, recommended_k(report.c_u));
    write_json(
        dir,
        "elevation.json",
        "landscape",
        &loaded.config,
        LandscapeResult {
            report: &report,
            recommended_k: recommended_k(report.c_u),
            resolution: loaded.resolution(),
            pair: (*g.node(report.argpair.0), *g.node(report.argpair.1)),
        },
    )
}

#[derive(Serialize)]
struct Lemma2Result {
    thetas: Vec<Point>,
    split: Vec<f64>,
    merged: Vec<f64>,
    max_discrepancy: f64,
    passed: bool,
}

fn cmd_lemma2(loaded: &Loaded, dir: &Path) -> Result<()> {
    let l = &loaded.config.lemma2;
    if !(l.s1 >= 0.0 && l.s2 >= 0.0 && l.s1 + l.s2 > 0.0) {
        return Err(Error::Config("lemma2.s1, lemma2.s2 must be ≥ 0 and not both zero".into()));
    }
    if l.points == 0 || l.nodes < 16 {
        return Err(Error::Config("lemma2.points must be ≥ 1 and lemma2.nodes ≥ 16".into()));
    }
    let m = loaded.manifold;
    let mut rng = stream(loaded.config.seed, 0);
    let thetas: Vec<Point> = (0..l.points).map(|_| m.sample_uniform(&mut rng)).collect();
    let (nu, p) = (&loaded.measure, loaded.config.p);
    let split = thetas.iter().map(|t| u_smoothed(nu, p, l.s1, l.s2, t, l.nodes)).collect::<Result<Vec<_>>>()?;
    let merged = thetas.iter().map(|t| u_smoothed(nu, p, 0.0, l.s1 + l.s2, t, l.nodes)).collect::<Result<Vec<_>>>()?;
    let max_discrepancy = split.iter().zip(&merged).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let passed = max_discrepancy <= l.tolerance;
    println!("max |U(s1,s2) - U(0,s1+s2)| = {max_discrepancy:e} ({})", if passed { "ok" } else { "FAILED" });
    write_json(dir, "lemma2.json", "lemma2", &loaded.config, Lemma2Result { thetas, split, merged, max_discrepancy, passed })?;
    if passed {
        Ok(())
    } else {
        Err(Error::Numerical(format!("discrepancy {max_discrepancy:e} exceeds {}", l.tolerance)))
    }
}

#[derive(Serialize)]
struct EmpiricalResult {
    basin_jumps: Vec<usize>,
    /// Mean number of consecutive `n` spent in one basin, per stream.
    mean_dwell: Vec<f64>,
    probe: ProbeReport,
}

fn cmd_empirical(loaded: &Loaded, dir: &Path) -> Result<()> {
    let e = &loaded.config.empirical;
    let m = loaded.manifold;
    let seed = loaded.config.seed;
    if e.n_max == 0 || e.streams == 0 || e.trials == 0 || e.probe_points == 0 {
        return Err(Error::Config("empirical: n_max, streams, trials and probe_points must be positive".into()));
    }
    let law = match e.law {
        LawKind::Uniform => ProbeLaw::Uniform,
        LawKind::Smoothed => ProbeLaw::Smoothed(
            loaded.measure.smoothed(e.s).map_err(|err| Error::Config(format!("empirical.s: {err}")))?,
        ),
    };
    let finder = MeanFinder::new(m, loaded.config.p, loaded.resolution(), e.refine_tol)
        .map_err(|err| Error::Config(format!("empirical: {err}")))?;
    let jump_radius = e.jump_radius.unwrap_or(0.2 * m.diameter());
    let mut jumps = Vec::with_capacity(e.streams);
    let mut dwell = Vec::with_capacity(e.streams);
    for i in 0..e.streams {
        // probe trials use streams from 0; mean processes count down from the top
        let mut rng = stream(seed, u64::MAX - i as u64);
        let samples = std::iter::from_fn(|| {
            Some(match &law {
                ProbeLaw::Uniform => m.sample_uniform(&mut rng),
                ProbeLaw::Smoothed(nu) => nu.sample(&mut rng),
            })
        });
        let records = mean_process(&finder, samples, e.n_max, jump_radius)?;
        fs::write(dir.join(format!("mean_process_{i:03}.csv")), records_to_csv(m, &records))?;
        let j = basin_jumps(&records);
        jumps.push(j);
        dwell.push(records.len() as f64 / (j + 1) as f64);
    }
    let probe = uniqueness_probe(m, e.probe_points, loaded.config.p, &law, e.trials, loaded.resolution(), seed)?;
    if let Some(w) = &probe.warning {
        eprintln!("warning: {w}");
    }
    println!(
        "basin jumps per stream {jumps:?}; probe: {} exact ties, {} near ties ({} resolved) in {} trials",
        probe.exact_ties, probe.near_ties, probe.near_ties_resolved, probe.trials
    );
    write_json(dir, "empirical.json", "empirical", &loaded.config, EmpiricalResult { basin_jumps: jumps, mean_dwell: dwell, probe })
}

/// Hit fraction against `log10 t` with the Wilson band, as a standalone SVG.
pub fn hitrate_svg(stats: &EnsembleStats) -> String {
    let (w, h, pad) = (480.0, 320.0, 48.0);
    let pts: Vec<(f64, usize)> =
        stats.checkpoints.iter().enumerate().filter(|(_, &t)| t > 0.0).map(|(i, &t)| (t.log10(), i)).collect();
    let (lo, hi) = match (pts.first(), pts.last()) {
        (Some(a), Some(b)) if b.0 > a.0 => (a.0.floor(), b.0.ceil()),
        (Some(a), _) => (a.0.floor() - 1.0, a.0.ceil() + 1.0),
        _ => (0.0, 1.0),
    };
    let x = |lt: f64| pad + (lt - lo) / (hi - lo) * (w - 2.0 * pad);
    let y = |f: f64| h - pad - f * (h - 2.0 * pad);
    let poly = |vals: &[f64]| {
        pts.iter().map(|&(lt, i)| format!("{:.2},{:.2}", x(lt), y(vals[i]))).collect::<Vec<_>>().join(" ")
    };
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{pad},{top} V{bot} H{right}" fill="none" stroke="black"/>"#,
        top = pad,
        bot = h - pad,
        right = w - pad
    );
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(
            s,
            r#"<line x1="{a}" x2="{pad}" y1="{yy:.2}" y2="{yy:.2}" stroke="black"/><text x="{tx}" y="{ty:.2}" text-anchor="end">{tick}</text>"#,
            a = pad - 4.0,
            yy = y(tick),
            tx = pad - 6.0,
            ty = y(tick) + 4.0
        );
    }
    let mut e = lo;
    while e <= hi + 1e-9 {
        let _ = writeln!(
            s,
            r#"<line x1="{xx:.2}" x2="{xx:.2}" y1="{b}" y2="{b2}" stroke="black"/><text x="{xx:.2}" y="{ty}" text-anchor="middle">1e{e}</text>"#,
            xx = x(e),
            b = h - pad,
            b2 = h - pad + 4.0,
            ty = h - pad + 16.0
        );
        e += 1.0;
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">t</text>"#, w / 2.0, h - 8.0);
    let _ = writeln!(s, r#"<text x="12" y="{}" transform="rotate(-90 12 {})" text-anchor="middle">hit fraction</text>"#, h / 2.0, h / 2.0);
    let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="gray" stroke-dasharray="4 3"/>"#, poly(&stats.wilson_lo));
    let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="gray" stroke-dasharray="4 3"/>"#, poly(&stats.wilson_hi));
    let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#, poly(&stats.fractions));
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_atoms() -> &'static str {
        "manifold = \"circle\"\n[measure]\natoms = [[0.0], [0.4]]\n"
    }

    fn parse(text: &str, overrides: &[&str]) -> Result<Loaded> {
        let mut table: toml::Table = text.parse().unwrap();
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let config: RunConfig = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        resolve(config, Path::new("."))
    }

    #[test]
    fn overrides_are_typed() {
        let l = parse(two_atoms(), &["anneal.t_end=50", "anneal.mode=plain", "p=1.5"]).unwrap();
        assert_eq!(l.config.anneal.t_end, 50.0);
        assert_eq!(l.config.anneal.mode, Mode::Plain);
        assert_eq!(l.config.p, 1.5);
    }

    #[test]
    fn bad_fields_are_named() {
        let e = parse(two_atoms(), &["p=0.5"]).unwrap_err();
        assert!(e.to_string().contains("p must be"));
        let e = parse(two_atoms(), &["anneal.k=fast"]).unwrap_err();
        assert!(e.to_string().contains("anneal.k"), "{e}");
        let e = parse(two_atoms(), &["anneal.h_max=-1", "anneal.n_runs=30"]).map(|mut l| prepare_anneal(&mut l));
        assert!(e.unwrap().unwrap_err().to_string().contains("h_max"));
    }

    #[test]
    fn missing_file_is_a_config_error() {
        let e = load_config(Path::new("/nonexistent/run.toml"), &[]).unwrap_err();
        assert!(e.to_string().starts_with("config: file not found"));
        assert_eq!(exit_code(&e), 2);
    }

    #[test]
    fn auto_k_and_center_resolve() {
        let mut l = parse(two_atoms(), &["anneal.t_end=10", "anneal.n_runs=30"]).unwrap();
        let prep = prepare_anneal(&mut l).unwrap();
        assert!((prep.c_u.unwrap() - 0.08).abs() < 1e-3);
        assert!((prep.config.schedules.k - recommended_k(prep.c_u.unwrap())).abs() < 1e-12);
        assert!((prep.neighborhood.center.coords()[0] - 0.2).abs() < 1e-6);
        assert_eq!(prep.checkpoints, vec![1.0, 10.0]);
    }

    #[test]
    fn svg_is_well_formed() {
        let stats = EnsembleStats {
            checkpoints: vec![10.0, 100.0],
            hits: vec![10, 20],
            fractions: vec![0.25, 0.5],
            wilson_lo: vec![0.1, 0.3],
            wilson_hi: vec![0.4, 0.7],
            n_runs: 40,
            seed: 0,
            homogenized: false,
            cap_hits: 0,
        };
        let svg = hitrate_svg(&stats);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 3);
    }
}
