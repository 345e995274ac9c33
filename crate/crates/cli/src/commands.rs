//! The subcommands. Each one resolves its configuration, runs the core
//! library and writes artifacts that embed the resolved configuration.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use dcp_core::coupling::{evolve_coupled_pair, evolve_sandwich, evolve_vs_noninteracting};
use dcp_core::experiments::{
    bounds, doubling_probability, empty_block_probability, estimate_lambda_c, estimate_survival, hardcore_stats,
    phase_scan, Estimate, Init, LambdaCSpec, SurvivalSpec,
};
use dcp_core::fmt::fmt17;
use dcp_core::meanfield::{a_critical, fixed_points, integrate, Regime};
use dcp_core::{Boundary, Configuration, Dump, EventModel, GridRecorder, Params, SimState, StopRule, Torus};

use crate::config::{comment_block, config_err, embedded, real, resolve, FileConfig, Grid};

/// Where and with what seed a command runs.
pub struct Ctx {
    pub seed: u64,
    pub out: PathBuf,
    pub file: FileConfig,
}

impl Ctx {
    fn write(&self, name: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        let path = self.out.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    fn write_csv(&self, name: &str, block: &str, header: &str, rows: &[String]) -> Result<PathBuf> {
        let mut s = comment_block(block);
        s.push_str(header);
        s.push('\n');
        for r in rows {
            s.push_str(r);
            s.push('\n');
        }
        self.write(name, s)
    }

    fn write_json(&self, name: &str, block: &str, body: serde_json::Value) -> Result<PathBuf> {
        let mut doc = json!({ "config": block, "seed": self.seed });
        if let (Some(d), serde_json::Value::Object(b)) = (doc.as_object_mut(), body) {
            d.extend(b);
        }
        let mut s = serde_json::to_string_pretty(&doc)?;
        s.push('\n');
        self.write(name, s)
    }
}

fn default_side(d: usize) -> usize {
    match d {
        1 => 400,
        2 => 128,
        _ => 32,
    }
}

fn one() -> usize {
    1
}

fn zero_grid() -> Grid {
    Grid(vec![0.0])
}

fn build_params(lambda: f64, a: f64, d: usize) -> Result<Params> {
    Params::new(lambda, a, d).map_err(|e| config_err(format!("lambda/a: {e}")))
}

fn build_torus(side: usize, d: usize, boundary: Boundary) -> Result<Arc<Torus>> {
    Ok(Arc::new(
        Torus::cube(side, d, boundary).map_err(|e| config_err(format!("side/d: {e}")))?,
    ))
}

/// Initial configurations selectable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    Single,
    Full,
    Box,
}

impl From<InitKind> for Init {
    fn from(k: InitKind) -> Self {
        match k {
            InitKind::Single => Init::SingleSeed,
            InitKind::Full => Init::FullTorus,
            InitKind::Box => Init::BoxMinus,
        }
    }
}

fn single() -> InitKind {
    InitKind::Single
}

fn est_cells(e: &Estimate) -> String {
    format!(
        "{},{},{},{}",
        fmt17(e.value),
        fmt17(e.ci_low),
        fmt17(e.ci_high),
        e.replicates
    )
}

// ---------------------------------------------------------------- simulate

#[derive(Args, Serialize, Default, Debug, Clone)]
pub struct SimulateArgs {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    /// Payoff; `-inf` selects the hard-core limit.
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    /// standard, floor-rate or hard-core.
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub side: Option<usize>,
    /// periodic or empty-frozen.
    #[arg(long)]
    pub boundary: Option<String>,
    /// single, full or box.
    #[arg(long)]
    pub init: Option<String>,
    /// Start from an occupancy dump instead.
    #[arg(long)]
    pub init_dump: Option<String>,
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Snapshot times, as a grid.
    #[arg(long)]
    pub snapshot: Option<String>,
    /// Spacing of the trajectory log.
    #[arg(long)]
    pub record_step: Option<f64>,
    /// auto, player or site.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub replicate: Option<u64>,
    #[arg(long)]
    pub stop_on_extinction: Option<bool>,
    #[arg(long)]
    pub population_cap: Option<usize>,
    #[arg(long)]
    pub escape_radius: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum VariantKind {
    Standard,
    FloorRate,
    HardCore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ModelKind {
    Auto,
    Player,
    Site,
}

#[derive(Serialize, Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    #[serde(default = "one")]
    d: usize,
    lambda: f64,
    #[serde(default, deserialize_with = "real::de")]
    a: f64,
    #[serde(default = "standard")]
    variant: VariantKind,
    side: Option<usize>,
    #[serde(default)]
    boundary: Boundary,
    #[serde(default = "single")]
    init: InitKind,
    init_dump: Option<String>,
    #[serde(default = "horizon_2000")]
    horizon: f64,
    #[serde(default = "empty_grid")]
    snapshot: Grid,
    #[serde(default = "unit")]
    record_step: f64,
    #[serde(default = "auto")]
    model: ModelKind,
    #[serde(default)]
    replicate: u64,
    #[serde(default = "yes")]
    stop_on_extinction: bool,
    population_cap: Option<usize>,
    escape_radius: Option<usize>,
}

fn standard() -> VariantKind {
    VariantKind::Standard
}
fn horizon_2000() -> f64 {
    2000.0
}
fn empty_grid() -> Grid {
    Grid(vec![])
}
fn unit() -> f64 {
    1.0
}
fn auto() -> ModelKind {
    ModelKind::Auto
}
fn yes() -> bool {
    true
}

pub fn simulate(ctx: &Ctx, args: &SimulateArgs) -> Result<Vec<PathBuf>> {
    let mut cfg: SimulateConfig = resolve("simulate", &ctx.file, args, &["lambda"])?;
    let d = cfg.d;
    let params = match cfg.variant {
        VariantKind::Standard => build_params(cfg.lambda, cfg.a, d)?,
        VariantKind::FloorRate => {
            Params::floor_rate(cfg.lambda, cfg.a, d).map_err(|e| config_err(format!("lambda/a: {e}")))?
        }
        VariantKind::HardCore => build_params(cfg.lambda, f64::NEG_INFINITY, d)?,
    };
    let model = match cfg.model {
        ModelKind::Auto => EventModel::auto(&params),
        ModelKind::Player => EventModel::Player,
        ModelKind::Site => EventModel::Site,
    };
    if !(cfg.record_step > 0.0) {
        return Err(config_err("record_step: must be positive"));
    }
    let config = match &cfg.init_dump {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| config_err(format!("init_dump: {path}: {e}")))?;
            let dump = Dump::parse(&text)?;
            if dump.sides.len() != d {
                return Err(config_err(format!(
                    "init_dump: dump has dimension {}, d = {d}",
                    dump.sides.len()
                )));
            }
            cfg.side = None;
            dump.into_configuration(params, cfg.boundary, model)?
        }
        None => {
            let side = cfg.side.unwrap_or(default_side(d));
            cfg.side = Some(side);
            let torus = build_torus(side, d, cfg.boundary)?;
            let mut c = Configuration::new(torus.clone(), params, model)?;
            c.fill_sites(Init::from(cfg.init).sites(&torus))?;
            c
        }
    };
    let block = embedded("simulate", ctx.seed, &cfg)?;

    let rule = StopRule {
        horizon: Some(cfg.horizon),
        stop_on_extinction: cfg.stop_on_extinction,
        population_cap: cfg.population_cap,
        escape_radius: cfg.escape_radius,
    };
    rule.validate()?;
    let steps = (cfg.horizon / cfg.record_step).floor() as usize;
    let grid: Vec<f64> = (0..=steps).map(|i| i as f64 * cfg.record_step).collect();
    let mut rec = GridRecorder::new(grid, cfg.snapshot.0.clone());
    let mut state = SimState::new(config, ctx.seed, cfg.replicate);
    let outcome = state.run(&rule, Some(&mut rec))?;

    let mut written = Vec::new();
    let rows: Vec<String> = rec
        .rows
        .iter()
        .map(|r| format!("{},{},{},{}", fmt17(r.time), r.population, r.births, r.deaths))
        .collect();
    written.push(ctx.write_csv("trajectory.csv", &block, "time,population,births,deaths", &rows)?);
    for (i, (t, snap)) in rec.snapshots.iter().enumerate() {
        let mut text = comment_block(&block);
        text.push_str(&snap.to_dump(*t));
        written.push(ctx.write(&format!("snapshot_{i}.dump"), text)?);
        if d == 2 {
            let comments: Vec<String> = block.lines().map(|l| format!("| {l}")).collect();
            written.push(ctx.write(&format!("snapshot_{i}.pgm"), snap.to_pgm(&comments)?)?);
        }
    }
    written.push(ctx.write_json("outcome.json", &block, json!({ "outcome": outcome }))?);
    println!("outcome: {:?} at t = {}", outcome.reason, fmt17(outcome.final_time));
    Ok(written)
}

// ---------------------------------------------------------------- survival / phase

#[derive(Args, Serialize, Default, Debug, Clone)]
pub struct SurvivalArgs {
    #[arg(long)]
    pub d: Option<usize>,
    /// Grid of birth rates: `start:stop:step`, a comma list or a number.
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<String>,
    /// Grid of payoffs.
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<String>,
    #[arg(long)]
    pub side: Option<usize>,
    #[arg(long)]
    pub boundary: Option<String>,
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub replicates: Option<u64>,
    /// Drive all grid cells of a replicate with one coupling.
    #[arg(long)]
    pub crn: Option<bool>,
}

#[derive(Serialize, Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct SurvivalConfig {
    #[serde(default = "one")]
    d: usize,
    lambda: Grid,
    #[serde(default = "zero_grid")]
    a: Grid,
    side: Option<usize>,
    #[serde(default)]
    boundary: Boundary,
    #[serde(default = "single")]
    init: InitKind,
    #[serde(default = "horizon_2000")]
    horizon: f64,
    replicates: u64,
    #[serde(default = "yes")]
    crn: bool,
}

impl SurvivalConfig {
    fn spec(&mut self, seed: u64) -> Result<SurvivalSpec> {
        let side = self.side.unwrap_or(default_side(self.d));
        self.side = Some(side);
        if self.lambda.0.is_empty() || self.a.0.is_empty() {
            return Err(config_err("lambda/a: grids must be nonempty"));
        }
        for l in &self.lambda.0 {
            build_params(*l, 0.0, self.d)?;
        }
        let spec = SurvivalSpec {
            torus: build_torus(side, self.d, self.boundary)?,
            init: self.init.into(),
            horizon: self.horizon,
            replicates: self.replicates,
            seed,
        };
        spec.validate()
            .map_err(|e| config_err(format!("horizon/replicates: {e}")))?;
        Ok(spec)
    }
}

/// `(i_lambda, i_a, lambda, a, estimate)`.
type Cell = (usize, usize, f64, f64, Estimate);

/// Cells in `λ`-major order, each with its grid indices.
fn survival_cells(cfg: &SurvivalConfig, spec: &SurvivalSpec) -> Result<Vec<Cell>> {
    if cfg.crn {
        Ok(phase_scan(&cfg.lambda.0, &cfg.a.0, spec)?
            .into_iter()
            .map(|c| (c.i_lambda, c.i_a, c.lambda, c.a, c.estimate))
            .collect())
    } else {
        let mut out = Vec::new();
        for (i, l) in cfg.lambda.0.iter().enumerate() {
            for (j, a) in cfg.a.0.iter().enumerate() {
                let p = build_params(*l, *a, cfg.d)?;
                out.push((i, j, *l, *a, estimate_survival(&p, spec)?));
            }
        }
        Ok(out)
    }
}

pub fn survival(ctx: &Ctx, args: &SurvivalArgs) -> Result<Vec<PathBuf>> {
    let mut cfg: SurvivalConfig = resolve("survival", &ctx.file, args, &["lambda", "replicates"])?;
    let spec = cfg.spec(ctx.seed)?;
    let block = embedded("survival", ctx.seed, &cfg)?;
    let rows: Vec<String> = survival_cells(&cfg, &spec)?
        .iter()
        .map(|(_, _, l, a, e)| format!("{},{},{}", fmt17(*l), fmt17(*a), est_cells(e)))
        .collect();
    Ok(vec![ctx.write_csv(
        "survival.csv",
        &block,
        "lambda,a,estimate,ci_low,ci_high,replicates",
        &rows,
    )?])
}

pub fn phase(ctx: &Ctx, args: &SurvivalArgs) -> Result<Vec<PathBuf>> {
    let mut cfg: SurvivalConfig = resolve("phase", &ctx.file, args, &["lambda", "a", "replicates"])?;
    if !cfg.crn {
        return Err(config_err("crn: the phase scan always uses common random numbers"));
    }
    let spec = cfg.spec(ctx.seed)?;
    let block = embedded("phase", ctx.seed, &cfg)?;
    let rows: Vec<String> = survival_cells(&cfg, &spec)?
        .iter()
        .map(|(i, j, l, a, e)| format!("{},{},{},{i},{j}", fmt17(*l), fmt17(*a), est_cells(e)))
        .collect();
    Ok(vec![ctx.write_csv(
        "phase.csv",
        &block,
        "lambda,a,estimate,ci_low,ci_high,replicates,i_lambda,i_a",
        &rows,
    )?])
}

// ---------------------------------------------------------------- lambda-c

#[derive(Args, Serialize, Default, Debug, Clone)]
pub struct LambdaCArgs {
    /// Payoffs to bracket `λ_c` at, as a grid.
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<String>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub side: Option<usize>,
    #[arg(long)]
    pub boundary: Option<String>,
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub replicates: Option<u64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub lo: Option<f64>,
    #[arg(long)]
    pub hi: Option<f64>,
    #[arg(long)]
    pub width: Option<f64>,
}

#[derive(Serialize, Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct LambdaCConfig {
    a: Grid,
    #[serde(default = "one")]
    d: usize,
    side: Option<usize>,
    #[serde(default)]
    boundary: Boundary,
    #[serde(default = "single")]
    init: InitKind,
    #[serde(default = "horizon_2000")]
    horizon: f64,
    replicates: u64,
    #[serde(default = "threshold")]
    threshold: f64,
    #[serde(default = "lo")]
    lo: f64,
    #[serde(default = "hi")]
    hi: f64,
    #[serde(default = "width")]
    width: f64,
}

fn threshold() -> f64 {
    0.02
}
fn lo() -> f64 {
    0.5
}
fn hi() -> f64 {
    8.0
}
fn width() -> f64 {
    0.05
}

pub fn lambda_c(ctx: &Ctx, args: &LambdaCArgs) -> Result<Vec<PathBuf>> {
    let mut cfg: LambdaCConfig = resolve("lambda-c", &ctx.file, args, &["a", "replicates"])?;
    let side = cfg.side.unwrap_or(default_side(cfg.d));
    cfg.side = Some(side);
    let survival = SurvivalSpec {
        torus: build_torus(side, cfg.d, cfg.boundary)?,
        init: cfg.init.into(),
        horizon: cfg.horizon,
        replicates: cfg.replicates,
        seed: ctx.seed,
    };
    let block = embedded("lambda-c", ctx.seed, &cfg)?;
    let mut brackets = Vec::new();
    for a in &cfg.a.0 {
        let spec = LambdaCSpec {
            a: *a,
            survival: survival.clone(),
            threshold: cfg.threshold,
            lo: cfg.lo,
            hi: cfg.hi,
            width: cfg.width,
        };
        brackets.push(estimate_lambda_c(&spec)?);
    }
    let opt = |x: Option<f64>| x.map(fmt17).unwrap_or_default();
    let rows: Vec<String> = brackets
        .iter()
        .map(|b| {
            format!(
                "{},{},{},{},{},{},{}",
                fmt17(b.a),
                fmt17(b.lo),
                fmt17(b.hi),
                fmt17(b.estimate_lo.value),
                fmt17(b.estimate_hi.value),
                opt(b.sandwich.map(|s| s.0)),
                opt(b.sandwich.map(|s| s.1)),
            )
        })
        .collect();
    Ok(vec![
        ctx.write_csv(
            "lambda_c.csv",
            &block,
            "a,lo,hi,estimate_lo,estimate_hi,sandwich_lo,sandwich_hi",
            &rows,
        )?,
        ctx.write_json("lambda_c.json", &block, json!({ "brackets": brackets }))?,
    ])
}

// ---------------------------------------------------------------- meanfield

#[derive(Args, Serialize, Default, Debug, Clone)]
pub struct MeanfieldArgs {
    /// fixed (fixed points), ac (critical payoff curve) or trajectory.
    #[arg(long)]
    pub curve: Option<String>,
    #[arg(long, alias = "lambda-grid", allow_hyphen_values = true)]
    pub lambda: Option<String>,
    #[arg(long, alias = "a-grid", allow_hyphen_values = true)]
    pub a: Option<String>,
    #[arg(long)]
    pub u0: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Curve {
    Fixed,
    Ac,
    Trajectory,
}

#[derive(Serialize, Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct MeanfieldConfig {
    #[serde(default = "fixed")]
    curve: Curve,
    lambda: Grid,
    a: Option<Grid>,
    #[serde(default = "u0")]
    u0: f64,
    #[serde(default = "t_end")]
    t_end: f64,
    #[serde(default = "step")]
    step: f64,
}

fn fixed() -> Curve {
    Curve::Fixed
}
fn u0() -> f64 {
    0.5
}
fn t_end() -> f64 {
    50.0
}
fn step() -> f64 {
    0.01
}

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::GlobalExtinction => "global-extinction",
        Regime::Bistable => "bistable",
        Regime::InteriorStable => "interior-stable",
    }
}

pub fn meanfield(ctx: &Ctx, args: &MeanfieldArgs) -> Result<Vec<PathBuf>> {
    let cfg: MeanfieldConfig = resolve("meanfield", &ctx.file, args, &["lambda"])?;
    let block = embedded("meanfield", ctx.seed, &cfg)?;
    let payoffs = || {
        cfg.a
            .as_ref()
            .map(|g| g.0.clone())
            .ok_or_else(|| config_err("missing: a"))
    };
    match cfg.curve {
        Curve::Ac => {
            let rows = cfg
                .lambda
                .0
                .iter()
                .map(|l| Ok(format!("{},{}", fmt17(*l), fmt17(a_critical(*l)?))))
                .collect::<Result<Vec<String>>>()?;
            Ok(vec![ctx.write_csv("a_c.csv", &block, "lambda,a_c", &rows)?])
        }
        Curve::Fixed => {
            let mut rows = Vec::new();
            for l in &cfg.lambda.0 {
                for a in payoffs()? {
                    let r = fixed_points(*l, a)?;
                    let opt = |x: Option<f64>| x.map(fmt17).unwrap_or_default();
                    rows.push(format!(
                        "{},{},{},{},{}",
                        fmt17(*l),
                        fmt17(a),
                        regime_name(r.regime),
                        opt(r.u_minus()),
                        opt(r.u_plus())
                    ));
                }
            }
            Ok(vec![ctx.write_csv(
                "meanfield.csv",
                &block,
                "lambda,a,regime,u_minus,u_plus",
                &rows,
            )?])
        }
        Curve::Trajectory => {
            let mut rows = Vec::new();
            for l in &cfg.lambda.0 {
                for a in payoffs()? {
                    let t = integrate(*l, a, cfg.u0, cfg.t_end, cfg.step)?;
                    for (time, u) in t.times.iter().zip(&t.values) {
                        rows.push(format!("{},{},{},{}", fmt17(*l), fmt17(a), fmt17(*time), fmt17(*u)));
                    }
                }
            }
            Ok(vec![ctx.write_csv(
                "meanfield_trajectory.csv",
                &block,
                "lambda,a,time,u",
                &rows,
            )?])
        }
    }
}

// ---------------------------------------------------------------- couple

#[derive(Args, Serialize, Default, Debug, Clone)]
pub struct CoupleArgs {
    /// Shorthand for `--mode sandwich`.
    #[arg(long)]
    #[serde(skip)]
    pub sandwich: bool,
    /// sandwich, pair or noninteracting.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    /// Upper process of a pair.
    #[arg(long, allow_hyphen_values = true)]
    pub lambda2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub a2: Option<f64>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub side: Option<usize>,
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub runs: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum CoupleMode {
    Sandwich,
    Pair,
    Noninteracting,
}

#[derive(Serialize, Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct CoupleConfig {
    mode: CoupleMode,
    lambda: f64,
    #[serde(default, deserialize_with = "real::de_opt")]
    a: Option<f64>,
    lambda2: Option<f64>,
    #[serde(default, deserialize_with = "real::de_opt")]
    a2: Option<f64>,
    #[serde(default = "one")]
    d: usize,
    side: Option<usize>,
    #[serde(default = "single")]
    init: InitKind,
    #[serde(default = "horizon_200")]
    horizon: f64,
    #[serde(default = "one_u64")]
    runs: u64,
}

fn horizon_200() -> f64 {
    200.0
}
fn one_u64() -> u64 {
    1
}

pub fn couple(ctx: &Ctx, args: &CoupleArgs) -> Result<Vec<PathBuf>> {
    let mut args = args.clone();
    if args.sandwich {
        args.mode = Some("sandwich".into());
    }
    let mut cfg: CoupleConfig = resolve("couple", &ctx.file, &args, &["mode", "lambda"])?;
    let side = cfg.side.unwrap_or(default_side(cfg.d));
    cfg.side = Some(side);
    let torus = build_torus(side, cfg.d, Boundary::Periodic)?;
    let init = Init::from(cfg.init).sites(&torus);
    let block = embedded("couple", ctx.seed, &cfg)?;
    let need = |x: Option<f64>, k: &str| x.ok_or_else(|| config_err(format!("missing: {k}")));
    let runs = 0..cfg.runs;
    let (total, reports) = match cfg.mode {
        CoupleMode::Sandwich => {
            let a = need(cfg.a, "a")?;
            let reps = runs
                .map(|r| evolve_sandwich(cfg.lambda, a, torus.clone(), &init, cfg.horizon, ctx.seed, r))
                .collect::<dcp_core::Result<Vec<_>>>()?;
            (
                reps.iter().map(|r| r.violations).sum::<u64>(),
                serde_json::to_value(reps)?,
            )
        }
        CoupleMode::Pair => {
            let p1 = build_params(cfg.lambda, need(cfg.a, "a")?, cfg.d)?;
            let p2 = build_params(need(cfg.lambda2, "lambda2")?, need(cfg.a2, "a2")?, cfg.d)?;
            let reps = runs
                .map(|r| evolve_coupled_pair(&p1, &p2, &init, &init, torus.clone(), cfg.horizon, ctx.seed, r))
                .collect::<dcp_core::Result<Vec<_>>>()?;
            (
                reps.iter().map(|r| r.violations).sum::<u64>(),
                serde_json::to_value(reps)?,
            )
        }
        CoupleMode::Noninteracting => {
            let p = build_params(cfg.lambda, f64::NEG_INFINITY, cfg.d)?;
            let reps = runs
                .map(|r| evolve_vs_noninteracting(&init, &p, torus.clone(), cfg.horizon, ctx.seed, r))
                .collect::<dcp_core::Result<Vec<_>>>()?;
            (
                reps.iter().map(|r| r.violations).sum::<u64>(),
                serde_json::to_value(reps)?,
            )
        }
    };
    println!("violations: {total}");
    Ok(vec![ctx.write_json(
        "couple.json",
        &block,
        json!({ "total_violations": total, "reports": reports }),
    )?])
}

// ---------------------------------------------------------------- hardcore

#[derive(Args, Serialize, Default, Debug, Clone)]
pub struct HardcoreArgs {
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub side: Option<usize>,
    #[arg(long)]
    pub replicates: Option<u64>,
}

#[derive(Serialize, Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct HardcoreConfig {
    lambda: f64,
    #[serde(default = "one")]
    d: usize,
    #[serde(default = "side_256")]
    side: usize,
    replicates: u64,
}

fn side_256() -> usize {
    256
}

pub fn hardcore(ctx: &Ctx, args: &HardcoreArgs) -> Result<Vec<PathBuf>> {
    let cfg: HardcoreConfig = resolve("hardcore", &ctx.file, args, &["lambda", "replicates"])?;
    build_params(cfg.lambda, f64::NEG_INFINITY, cfg.d)?;
    let block = embedded("hardcore", ctx.seed, &cfg)?;
    let stats = hardcore_stats(cfg.lambda, cfg.d, cfg.side, cfg.replicates, ctx.seed)?;
    let rows: Vec<String> = stats
        .generation_tail()
        .iter()
        .map(|r| format!("{},{},{}", r.n, fmt17(r.empirical_tail), fmt17(r.geometric_tail)))
        .collect();
    let gof = stats.generation_gof();
    let n = stats.samples.len() as f64;
    let summary = json!({
        "lambda": cfg.lambda,
        "replicates": cfg.replicates,
        "mean_generations": stats.samples.iter().map(|s| s.generations as f64).sum::<f64>() / n,
        "mean_extinction_time": stats.times().iter().sum::<f64>() / n,
        "generation_chi_square": gof,
        "max_excess": stats.max_excess(),
        "time_decay": stats.time_decay(),
        "space_decay": stats.space_decay(),
    });
    Ok(vec![
        ctx.write_csv("hardcore.csv", &block, "n,empirical_tail,geometric_tail", &rows)?,
        ctx.write_json("hardcore_summary.json", &block, summary)?,
    ])
}

// ---------------------------------------------------------------- blocks

#[derive(Args, Serialize, Default, Debug, Clone)]
pub struct BlocksArgs {
    /// bounds, doubling or empty.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Grid of payoffs; `-inf` is allowed for empty blocks.
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<String>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub d: Option<usize>,
    /// Block scale `L`.
    #[arg(long = "block-scale", short = 'L')]
    pub l: Option<usize>,
    #[arg(long)]
    pub side: Option<usize>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub replicates: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum BlocksMode {
    Bounds,
    Doubling,
    Empty,
}

#[derive(Serialize, Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct BlocksConfig {
    #[serde(default = "bounds_mode")]
    mode: BlocksMode,
    lambda: f64,
    a: Grid,
    #[serde(default = "epsilon")]
    epsilon: f64,
    #[serde(default = "one")]
    d: usize,
    #[serde(default = "ten")]
    l: usize,
    side: Option<usize>,
    tau: Option<f64>,
    #[serde(default = "thousand")]
    replicates: u64,
}

fn bounds_mode() -> BlocksMode {
    BlocksMode::Bounds
}
fn epsilon() -> f64 {
    0.1
}
fn ten() -> usize {
    10
}
fn thousand() -> u64 {
    1000
}

pub fn blocks(ctx: &Ctx, args: &BlocksArgs) -> Result<Vec<PathBuf>> {
    let cfg: BlocksConfig = resolve("blocks", &ctx.file, args, &["lambda", "a"])?;
    let block = embedded("blocks", ctx.seed, &cfg)?;
    match cfg.mode {
        BlocksMode::Bounds => {
            let rows = cfg
                .a
                .0
                .iter()
                .map(|a| {
                    let b = bounds(cfg.epsilon, cfg.d, cfg.lambda, *a, cfg.l, cfg.tau)?;
                    Ok(format!(
                        "{},{},{},{},{},{},{},{}",
                        fmt17(b.a),
                        fmt17(b.tau),
                        fmt17(b.no_death),
                        fmt17(b.stage_bound),
                        fmt17(b.lemma_bound),
                        fmt17(b.a_plus),
                        fmt17(b.poisson_parameter),
                        fmt17(b.poisson_agreement)
                    ))
                })
                .collect::<Result<Vec<String>>>()?;
            Ok(vec![ctx.write_csv(
                "bounds.csv",
                &block,
                "a,tau,no_death,stage_bound,lemma_bound,a_plus,poisson_parameter,poisson_agreement",
                &rows,
            )?])
        }
        BlocksMode::Doubling => {
            let res = doubling_probability(cfg.lambda, &cfg.a.0, cfg.epsilon, cfg.d, cfg.replicates, ctx.seed)?;
            let rows: Vec<String> = res
                .iter()
                .map(|r| {
                    format!(
                        "{},{},{},{}",
                        fmt17(r.a),
                        est_cells(&r.estimate),
                        fmt17(r.bounds.stage_bound),
                        fmt17(r.bounds.lemma_bound)
                    )
                })
                .collect();
            Ok(vec![ctx.write_csv(
                "blocks_doubling.csv",
                &block,
                "a,estimate,ci_low,ci_high,replicates,stage_bound,lemma_bound",
                &rows,
            )?])
        }
        BlocksMode::Empty => {
            let res = empty_block_probability(cfg.lambda, &cfg.a.0, cfg.l, cfg.d, cfg.side, cfg.replicates, ctx.seed)?;
            let rows: Vec<String> = res
                .iter()
                .map(|r| {
                    format!(
                        "{},{},{}",
                        fmt17(r.a),
                        est_cells(&r.estimate),
                        fmt17(r.poisson_agreement)
                    )
                })
                .collect();
            Ok(vec![ctx.write_csv(
                "blocks_empty.csv",
                &block,
                "a,estimate,ci_low,ci_high,replicates,poisson_agreement",
                &rows,
            )?])
        }
    }
}

// ---------------------------------------------------------------- replay

/// Reruns the command embedded in `artifact` into `out` and reports
/// whether the regenerated file with the same name is byte-identical.
pub fn replay(artifact: &Path, out: PathBuf) -> Result<bool> {
    let original = fs::read(artifact).with_context(|| format!("reading {}", artifact.display()))?;
    let (command, file) = crate::config::extract(&original)?;
    let seed = file.seed.ok_or_else(|| config_err("artifact has no embedded seed"))?;
    let ctx = Ctx { seed, out, file };
    let written = dispatch(&ctx, &command)?;
    let name = artifact.file_name().context("artifact path has no file name")?;
    let regenerated = written
        .iter()
        .find(|p| p.file_name() == Some(name))
        .with_context(|| format!("{command} does not produce {}", name.to_string_lossy()))?;
    Ok(fs::read(regenerated)? == original)
}

/// Runs `command` with no command-line overrides.
fn dispatch(ctx: &Ctx, command: &str) -> Result<Vec<PathBuf>> {
    match command {
        "simulate" => simulate(ctx, &SimulateArgs::default()),
        "survival" => survival(ctx, &SurvivalArgs::default()),
        "phase" => phase(ctx, &SurvivalArgs::default()),
        "lambda-c" => lambda_c(ctx, &LambdaCArgs::default()),
        "meanfield" => meanfield(ctx, &MeanfieldArgs::default()),
        "couple" => couple(ctx, &CoupleArgs::default()),
        "hardcore" => hardcore(ctx, &HardcoreArgs::default()),
        "blocks" => blocks(ctx, &BlocksArgs::default()),
        other => Err(config_err(format!("unknown command '{other}'"))),
    }
}
