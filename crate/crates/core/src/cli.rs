//! Experiment driver: configuration, named recipes and output directories.
//!
//! A run resolves a config file (TOML or JSON) against the defaults of its
//! recipe, validates it, computes everything in memory-ordered fashion and
//! writes into a staging directory that is renamed into place on success.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::angle;
use crate::dynamics::{check_angle, StrategyProfile, WalkConfig};
use crate::equilibrium::{
    analyze, circle_starts, learn, vector_field, EquilibriumOptions, EquilibriumReport, PayoffModel, PayoffSurface,
    Refinement, StationaryPoint, StrategyGrid, WalkGame,
};
use crate::error::{Error, Result};
use crate::games::{self, GameKind, GameSpec, PayoffTable};
use crate::hilbert::{marginals, Boundary, CoinState, JointDistribution, LatticeGeometry};
use crate::interactions::{InteractionKind, InteractionSpec};
use crate::perturbation::{
    collision_weight, drift_sweep, first_order_slope, g_grid, nonseparability_certificate, separability_residual,
    CollisionSample, PerturbationReport, DEFAULT_SCHEDULE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipe {
    Race,
    TugOfWar,
    Rendezvous,
    Perturbation,
    Learning,
    Calibrate,
}

impl Recipe {
    pub const ALL: [Recipe; 6] =
        [Recipe::Race, Recipe::TugOfWar, Recipe::Rendezvous, Recipe::Perturbation, Recipe::Learning, Recipe::Calibrate];

    pub fn name(self) -> &'static str {
        match self {
            Recipe::Race => "race",
            Recipe::TugOfWar => "tug_of_war",
            Recipe::Rendezvous => "rendezvous",
            Recipe::Perturbation => "perturbation",
            Recipe::Learning => "learning",
            Recipe::Calibrate => "calibrate",
        }
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Recipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Recipe::ALL.into_iter().find(|r| r.name() == norm).ok_or_else(|| {
            let names: Vec<_> = Recipe::ALL.iter().map(|r| r.name()).collect();
            Error::validation("recipe", format!("unknown recipe {s:?}, expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameConfig {
    pub kind: GameKind,
    /// `x_A,x_B,value` tables, only for `custom_table`.
    pub table_a: Option<PathBuf>,
    pub table_b: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RendezvousParams {
    /// Interaction strengths for the meeting-probability sweep.
    #[serde(deserialize_with = "angle::deserialize_vec")]
    pub phi_sweep: Vec<f64>,
    /// Fixed θ_B of the payoff cross-section; the optimum's θ_B when absent.
    #[serde(deserialize_with = "angle::deserialize_opt")]
    pub cross_section_theta_b: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationParams {
    pub lambda_schedule: Vec<f64>,
    /// Profiles at which the slope convergence table is computed.
    #[serde(deserialize_with = "angle::deserialize_pairs")]
    pub slope_points: Vec<[f64; 2]>,
    #[serde(deserialize_with = "angle::deserialize_pair")]
    pub certificate_base: [f64; 2],
    pub certificate_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningParams {
    /// Points per axis of the exported vector field.
    pub field_grid: usize,
    /// Explicit starts; when empty, a circle around the first interior
    /// stationary point (or a 3×3 lattice of interior starts).
    #[serde(deserialize_with = "angle::deserialize_pairs")]
    pub starts: Vec<[f64; 2]>,
    pub circle_count: usize,
    pub circle_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateParams {
    pub boundaries: Vec<Boundary>,
    /// Coin presets; every ordered pair is tried.
    pub coins: Vec<String>,
    pub games: Vec<GameKind>,
    /// Grid points per axis for each search cell.
    pub grid: usize,
}

/// A fully resolved experiment. Every field is materialized so the JSON dump
/// reproduces the run exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub recipe: Recipe,
    pub seed: u64,
    /// Worker threads; `None` uses the available parallelism.
    pub workers: Option<usize>,
    pub lattice: LatticeGeometry,
    pub steps: usize,
    pub coin_a: CoinState,
    pub coin_b: CoinState,
    pub interaction: InteractionSpec,
    pub game: GameConfig,
    pub grid: usize,
    /// Seeds averaged per evaluation for noisy interactions.
    pub ensemble: usize,
    pub equilibrium: EquilibriumOptions,
    pub rendezvous: RendezvousParams,
    pub perturbation: PerturbationParams,
    pub learning: LearningParams,
    pub calibrate: CalibrateParams,
}

pub const DEFAULT_SEED: u64 = 7;
pub const CALIBRATION_COINS: [&str; 6] = ["R", "L", "plus", "minus", "plus_i", "minus_i"];

/// Command-line and environment overrides, applied after the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub recipe: Option<Recipe>,
    pub seed: Option<u64>,
    pub grid: Option<usize>,
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    /// Recipe defaults: the race and tug-of-war at T = 20, L = 15, φ = π,
    /// the rendezvous at φ = 0, and the perturbation study at T = 10, L = 31.
    pub fn defaults(recipe: Recipe) -> Self {
        let (size, steps, strength, kind) = match recipe {
            Recipe::Race | Recipe::Learning | Recipe::Calibrate => (15, 20, PI, GameKind::Race),
            Recipe::TugOfWar => (15, 20, PI, GameKind::TugOfWar),
            Recipe::Rendezvous => (15, 20, 0.0, GameKind::Rendezvous),
            Recipe::Perturbation => (31, 10, PI, GameKind::Race),
        };
        ExperimentConfig {
            recipe,
            seed: DEFAULT_SEED,
            workers: None,
            lattice: LatticeGeometry::new(size, Boundary::Periodic).expect("default lattice is valid"),
            steps,
            coin_a: CoinState::right(),
            coin_b: CoinState::right(),
            interaction: InteractionSpec::collision(strength),
            game: GameConfig { kind, table_a: None, table_b: None },
            grid: 61,
            ensemble: 32,
            equilibrium: EquilibriumOptions::default(),
            rendezvous: RendezvousParams {
                phi_sweep: (0..=4).map(|k| k as f64 * PI / 4.0).collect(),
                cross_section_theta_b: None,
            },
            perturbation: PerturbationParams {
                lambda_schedule: DEFAULT_SCHEDULE.to_vec(),
                slope_points: vec![[1.0, 2.0], [PI / 3.0, 2.0 * PI / 3.0]],
                certificate_base: [PI / 3.0, 2.0 * PI / 3.0],
                certificate_step: 0.05,
            },
            learning: LearningParams { field_grid: 21, starts: Vec::new(), circle_count: 8, circle_radius: 0.3 },
            calibrate: CalibrateParams {
                boundaries: vec![Boundary::Periodic, Boundary::Reflecting],
                coins: CALIBRATION_COINS.iter().map(|s| s.to_string()).collect(),
                games: vec![GameKind::Race, GameKind::Rendezvous, GameKind::TugOfWar],
                grid: 31,
            },
        }
    }

    /// Parses a TOML or JSON document, chosen by extension (`.json` is JSON,
    /// anything else is tried as TOML first).
    pub fn parse_document(text: &str, path: &Path) -> Result<Value> {
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            return serde_json::from_str(text).map_err(|e| Error::Config(format!("{}: {e}", path.display())));
        }
        match toml::from_str::<Value>(text) {
            Ok(v) => Ok(v),
            Err(toml_err) => serde_json::from_str(text)
                .map_err(|_| Error::Config(format!("{}: {}", path.display(), toml_err.message()))),
        }
    }

    /// Resolves a parsed document against the recipe defaults.
    pub fn resolve(document: Value, overrides: &Overrides) -> Result<Self> {
        if !document.is_object() {
            return Err(Error::Config("config must be a table of settings".into()));
        }
        let recipe = match (overrides.recipe, document.get("recipe")) {
            (Some(r), _) => r,
            (None, Some(Value::String(s))) => s.parse()?,
            (None, Some(other)) => return Err(Error::validation("recipe", format!("expected a name, got {other}"))),
            (None, None) => return Err(Error::validation("recipe", "missing; set it in the config or pass --recipe")),
        };
        let mut merged = serde_json::to_value(ExperimentConfig::defaults(recipe))?;
        merge(&mut merged, document);
        merged["recipe"] = Value::String(recipe.name().into());
        let mut config: ExperimentConfig = serde_json::from_value(merged).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(seed) = overrides.seed {
            config.seed = seed;
        }
        if let Some(grid) = overrides.grid {
            config.grid = grid;
        }
        if let Some(workers) = overrides.workers {
            config.workers = Some(workers);
        }
        Ok(config)
    }

    /// Reads `path` (if any) and resolves it. Without a file the recipe must
    /// come from the overrides.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let document = match path {
            Some(p) => {
                let text =
                    fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
                Self::parse_document(&text, p)?
            }
            None => Value::Object(Default::default()),
        };
        Self::resolve(document, overrides)
    }

    pub fn walk_config(&self) -> WalkConfig {
        WalkConfig {
            geometry: self.lattice,
            steps: self.steps,
            coin_a: self.coin_a,
            coin_b: self.coin_b,
            interaction: self.interaction,
        }
    }

    pub fn game_spec(&self) -> Result<GameSpec> {
        match self.game.kind {
            GameKind::CustomTable => {
                let load = |field: &str, p: &Option<PathBuf>| -> Result<PayoffTable> {
                    let p = p.as_ref().ok_or_else(|| Error::validation(field, "required for custom_table"))?;
                    PayoffTable::read_csv(p, &self.lattice).map_err(|e| match e {
                        Error::Io { path, source } => Error::Config(format!("cannot read {field} {path}: {source}")),
                        other => other,
                    })
                };
                GameSpec::custom(load("game.table_a", &self.game.table_a)?, load("game.table_b", &self.game.table_b)?)
            }
            kind => {
                if self.game.table_a.is_some() || self.game.table_b.is_some() {
                    return Err(Error::validation("game", "payoff tables are only allowed for custom_table"));
                }
                GameSpec::built_in(kind)
            }
        }
    }

    pub fn model(&self) -> Result<WalkGame> {
        Ok(WalkGame::new(self.walk_config(), self.game_spec()?, self.seed).with_ensemble(self.ensemble))
    }

    pub fn strategy_grid(&self) -> Result<StrategyGrid> {
        StrategyGrid::new(self.grid)
            .map_err(|_| Error::validation("grid", format!("needs at least 2 points, got {}", self.grid)))
    }

    /// Errors for invariant violations; warnings for settings that make the
    /// results harder to interpret.
    pub fn validate(&self) -> Result<Vec<String>> {
        let walk = self.walk_config();
        walk.validate()?;
        self.strategy_grid()?;
        self.equilibrium.validate()?;
        self.game_spec()?;
        if self.ensemble == 0 {
            return Err(Error::validation("ensemble", "must be at least 1"));
        }
        if self.workers == Some(0) {
            return Err(Error::validation("workers", "must be at least 1"));
        }
        let mut warnings = walk.warnings();
        if self.interaction.is_noisy() && self.interaction.sigma() > 0.0 && self.ensemble == 1 {
            warnings.push("noisy interaction with ensemble = 1: every payoff is a single noise realization".into());
        }
        if !self.equilibrium.refine {
            warnings.push("refinement disabled: off-grid equilibria are reported at grid resolution only".into());
        }
        match self.recipe {
            Recipe::Rendezvous => {
                for &phi in &self.rendezvous.phi_sweep {
                    if !phi.is_finite() {
                        return Err(Error::validation("rendezvous.phi_sweep", "values must be finite"));
                    }
                }
                if let Some(t) = self.rendezvous.cross_section_theta_b {
                    check_angle("rendezvous.cross_section_theta_b", t)?;
                }
            }
            Recipe::Perturbation => {
                let p = &self.perturbation;
                if p.lambda_schedule.len() < 2
                    || p.lambda_schedule.iter().any(|l| !(*l > 0.0 && l.is_finite()))
                    || p.lambda_schedule.windows(2).any(|w| w[1] >= w[0])
                {
                    return Err(Error::validation(
                        "perturbation.lambda_schedule",
                        "needs at least two positive, strictly decreasing strengths",
                    ));
                }
                for pt in &p.slope_points {
                    StrategyProfile::new(pt[0], pt[1])?;
                }
                if !(p.certificate_step > 0.0 && p.certificate_step < 0.5) {
                    return Err(Error::validation("perturbation.certificate_step", "must lie in (0, 0.5)"));
                }
                for t in p.certificate_base {
                    check_angle("perturbation.certificate_base", t - p.certificate_step)?;
                    check_angle("perturbation.certificate_base", t + p.certificate_step)?;
                }
                if self.interaction.is_trivial() {
                    warnings.push("interaction is trivial: G and the certificate are identically zero".into());
                }
            }
            Recipe::Learning => {
                let l = &self.learning;
                if l.field_grid < 2 {
                    return Err(Error::validation("learning.field_grid", "needs at least 2 points"));
                }
                for s in &l.starts {
                    StrategyProfile::new(s[0], s[1])?;
                }
                if l.starts.is_empty() && l.circle_count == 0 {
                    return Err(Error::validation("learning.circle_count", "needs at least one start"));
                }
                if !(l.circle_radius > 0.0 && l.circle_radius.is_finite()) {
                    return Err(Error::validation("learning.circle_radius", "must be positive"));
                }
            }
            Recipe::Calibrate => {
                let c = &self.calibrate;
                if c.boundaries.is_empty() || c.coins.is_empty() || c.games.is_empty() {
                    return Err(Error::validation("calibrate", "boundaries, coins and games must be non-empty"));
                }
                for name in &c.coins {
                    if CoinState::preset(name).is_none() {
                        return Err(Error::validation("calibrate.coins", format!("unknown coin preset {name:?}")));
                    }
                }
                if c.games.contains(&GameKind::CustomTable) {
                    return Err(Error::validation("calibrate.games", "custom_table has no calibration target"));
                }
                if c.grid < 2 {
                    return Err(Error::validation("calibrate.grid", "needs at least 2 points"));
                }
            }
            Recipe::Race | Recipe::TugOfWar => {}
        }
        Ok(warnings)
    }
}

/// Recursive merge: objects merge key by key, everything else replaces.
fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Outcome of a successful run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub warnings: Vec<String>,
    /// Files written, relative to `out_dir`, in write order.
    pub files: Vec<String>,
    /// For race and tug-of-war: whether any stationary point was found.
    pub found_stationary: Option<bool>,
}

/// Buffered output directory. Files are written to a staging directory that
/// is renamed to the target on [`OutputDir::commit`] and removed on drop
/// otherwise.
struct OutputDir {
    staging: PathBuf,
    target: PathBuf,
    files: Vec<String>,
    committed: bool,
}

impl OutputDir {
    fn create(target: &Path) -> Result<Self> {
        if target.exists() {
            let empty = target.is_dir() && fs::read_dir(target).map_err(|e| Error::io(target, e))?.next().is_none();
            if !empty {
                return Err(Error::Config(format!("output directory {} exists and is not empty", target.display())));
            }
        }
        let name = target
            .file_name()
            .ok_or_else(|| Error::Config(format!("output path {} has no directory name", target.display())))?;
        let parent = target.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        fs::create_dir_all(parent).map_err(|e| Error::Config(format!("cannot create {}: {e}", parent.display())))?;
        let staging = parent.join(format!(".{}.partial-{}", name.to_string_lossy(), std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        }
        fs::create_dir(&staging).map_err(|e| Error::io(&staging, e))?;
        Ok(OutputDir { staging, target: target.to_path_buf(), files: Vec::new(), committed: false })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.staging.join(name);
        let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv buffer: {e}")))?;
        self.write(name, &bytes)
    }

    fn commit(mut self) -> Result<Vec<String>> {
        if self.target.exists() {
            fs::remove_dir(&self.target).map_err(|e| Error::io(&self.target, e))?;
        }
        fs::rename(&self.staging, &self.target).map_err(|e| Error::io(&self.target, e))?;
        self.committed = true;
        Ok(std::mem::take(&mut self.files))
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}

fn fmt(v: f64) -> String {
    v.to_string()
}

fn surface_csv(out: &mut OutputDir, name: &str, surface: &PayoffSurface, values: &[f64]) -> Result<()> {
    let rows = surface.rows(values).map(|(a, b, v)| vec![fmt(a), fmt(b), fmt(v)]).collect::<Vec<_>>();
    out.csv(name, &["theta_A", "theta_B", "value"], rows)
}

fn write_surfaces(out: &mut OutputDir, surface: &PayoffSurface) -> Result<()> {
    surface_csv(out, "surface_uA.csv", surface, &surface.u_a)?;
    surface_csv(out, "surface_uB.csv", surface, &surface.u_b)?;
    for (name, values) in &surface.aux {
        surface_csv(out, &format!("surface_{name}.csv"), surface, values)?;
    }
    Ok(())
}

fn write_best_responses(out: &mut OutputDir, report: &EquilibriumReport, grid: StrategyGrid) -> Result<()> {
    let mut rows = Vec::new();
    for (k, set) in report.best_responses.player_a.iter().enumerate() {
        for &j in set {
            rows.push(vec!["A".to_string(), fmt(grid.value(k)), fmt(grid.value(j))]);
        }
    }
    for (j, set) in report.best_responses.player_b.iter().enumerate() {
        for &k in set {
            rows.push(vec!["B".to_string(), fmt(grid.value(j)), fmt(grid.value(k))]);
        }
    }
    out.csv("best_response.csv", &["player", "theta_opponent", "theta_best"], rows)
}

fn stationary_json(report: &EquilibriumReport) -> Value {
    let points: Vec<Value> = report
        .stationary_points
        .iter()
        .zip(&report.jacobians)
        .map(|(p, j)| {
            let mut v = serde_json::to_value(p).expect("stationary points serialize");
            v["jacobian"] = serde_json::to_value(j).expect("jacobians serialize");
            v
        })
        .collect();
    json!({ "grid_points": report.grid_points, "stationary_points": points })
}

fn write_distribution(out: &mut OutputDir, prefix: &str, dist: &JointDistribution) -> Result<()> {
    let mut buf = Vec::new();
    dist.write_csv(&mut buf)?;
    out.write(&format!("{prefix}_distribution.csv"), &buf)?;
    let (pa, pb) = marginals(dist);
    let g = dist.geometry();
    let rows =
        g.sites().zip(pa.iter().zip(&pb)).map(|(x, (a, b))| vec![x.to_string(), fmt(*a), fmt(*b)]).collect::<Vec<_>>();
    out.csv(&format!("{prefix}_marginals.csv"), &["x", "p_A", "p_B"], rows)
}

/// First refined interior point, else any interior point, else the first.
pub fn headline(points: &[StationaryPoint]) -> Option<&StationaryPoint> {
    points
        .iter()
        .find(|p| p.is_interior() && p.status == Refinement::Refined)
        .or_else(|| points.iter().find(|p| p.is_interior()))
        .or_else(|| points.first())
}

fn profile_of(p: &StationaryPoint) -> StrategyProfile {
    StrategyProfile { theta_a: p.theta_a, theta_b: p.theta_b }
}

fn zero_sum_exact(surface: &PayoffSurface) -> bool {
    surface.u_a.iter().zip(&surface.u_b).all(|(a, b)| a + b == 0.0)
}

/// Runs the configured recipe and writes its outputs into `out`.
pub fn run_recipe(config: &ExperimentConfig, out: &Path) -> Result<RunSummary> {
    let warnings = config.validate()?;
    for w in &warnings {
        log::warn!("{w}");
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.workers {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let mut dir = OutputDir::create(out)?;
    dir.json("resolved_config.json", config)?;
    let found_stationary = pool.install(|| -> Result<Option<bool>> {
        match config.recipe {
            Recipe::Race | Recipe::TugOfWar => run_game(config, &warnings, &mut dir).map(Some),
            Recipe::Rendezvous => run_rendezvous(config, &warnings, &mut dir).map(|_| None),
            Recipe::Perturbation => run_perturbation(config, &warnings, &mut dir).map(|_| None),
            Recipe::Learning => run_learning(config, &warnings, &mut dir).map(|_| None),
            Recipe::Calibrate => run_calibrate(config, &warnings, &mut dir).map(|_| None),
        }
    })?;
    let files = dir.commit()?;
    Ok(RunSummary { out_dir: out.to_path_buf(), warnings, files, found_stationary })
}

fn analyze_config(config: &ExperimentConfig) -> Result<(WalkGame, PayoffSurface, EquilibriumReport)> {
    let model = config.model()?;
    log::info!("sweeping {0}x{0} {1} surface", config.grid, config.recipe);
    let (surface, report) = analyze(&model, config.strategy_grid()?, &config.equilibrium)?;
    log::info!("{} stationary point(s)", report.stationary_points.len());
    Ok((model, surface, report))
}

fn run_game(config: &ExperimentConfig, warnings: &[String], out: &mut OutputDir) -> Result<bool> {
    let (model, surface, report) = analyze_config(config)?;
    write_surfaces(out, &surface)?;
    write_best_responses(out, &report, surface.grid)?;
    out.json("stationary.json", &stationary_json(&report))?;
    let head = headline(&report.stationary_points);
    let mut ne = Value::Null;
    if let Some(p) = head {
        let dist = model.distribution(profile_of(p))?;
        let point = games::payoff(&dist, &model.game)?;
        write_distribution(out, "ne", &dist)?;
        ne = json!({ "theta_A": p.theta_a, "theta_B": p.theta_b, "payoff": point });
    }
    out.json(
        "report.json",
        &json!({
            "recipe": config.recipe,
            "warnings": warnings,
            "stationary_points": report.stationary_points.len(),
            "interior_points": report.stationary_points.iter().filter(|p| p.is_interior()).count(),
            "headline": ne,
            "zero_sum_exact": zero_sum_exact(&surface),
        }),
    )?;
    Ok(!report.stationary_points.is_empty())
}

/// Interaction used for the φ sweep: the configured kind, or the collision
/// phase when none is configured.
fn sweep_interaction(config: &ExperimentConfig, phi: f64) -> InteractionSpec {
    if config.interaction.kind == InteractionKind::None {
        InteractionSpec::collision(phi)
    } else {
        config.interaction.scaled(phi)
    }
}

fn run_rendezvous(config: &ExperimentConfig, warnings: &[String], out: &mut OutputDir) -> Result<()> {
    let (model, surface, report) = analyze_config(config)?;
    write_surfaces(out, &surface)?;
    write_best_responses(out, &report, surface.grid)?;
    out.json("stationary.json", &stationary_json(&report))?;

    let grid = surface.grid;
    let n = grid.points();
    let best = (0..n * n).fold(0, |b, i| if surface.u_a[i] > surface.u_a[b] { i } else { b });
    let optimum = StrategyProfile { theta_a: grid.value(best / n), theta_b: grid.value(best % n) };
    let dist = model.distribution(optimum)?;
    let at_opt = games::payoff(&dist, &model.game)?;
    write_distribution(out, "ne", &dist)?;

    let sweep: Vec<(f64, games::PayoffPoint)> = config
        .rendezvous
        .phi_sweep
        .iter()
        .map(|&phi| {
            let walk = config.walk_config().with_interaction(sweep_interaction(config, phi));
            let m = WalkGame { config: walk, ..model.clone() };
            Ok((phi, m.evaluate(optimum)?))
        })
        .collect::<Result<_>>()?;
    out.csv(
        "phi_sweep.csv",
        &["phi", "meeting_probability", "mean_separation", "u"],
        sweep.iter().map(|(phi, p)| {
            vec![fmt(*phi), fmt(p.aux[games::MEETING_PROBABILITY]), fmt(p.aux[games::MEAN_SEPARATION]), fmt(p.u_a)]
        }),
    )?;
    let meets: Vec<f64> = sweep.iter().map(|(_, p)| p.aux[games::MEETING_PROBABILITY]).collect();
    let trend = if meets.windows(2).all(|w| w[1] >= w[0]) {
        "non_decreasing"
    } else if meets.windows(2).all(|w| w[1] <= w[0]) {
        "non_increasing"
    } else {
        "non_monotone"
    };

    let theta_b = config.rendezvous.cross_section_theta_b.unwrap_or(optimum.theta_b);
    let section: Vec<(f64, games::PayoffPoint)> = grid
        .values()
        .into_iter()
        .map(|a| Ok((a, model.evaluate(StrategyProfile::new(a, theta_b)?)?)))
        .collect::<Result<_>>()?;
    out.csv(
        "cross_section.csv",
        &["theta_A", "theta_B", "u", "meeting_probability", "mean_separation"],
        section.iter().map(|(a, p)| {
            vec![
                fmt(*a),
                fmt(theta_b),
                fmt(p.u_a),
                fmt(p.aux[games::MEETING_PROBABILITY]),
                fmt(p.aux[games::MEAN_SEPARATION]),
            ]
        }),
    )?;
    out.json(
        "report.json",
        &json!({
            "recipe": config.recipe,
            "warnings": warnings,
            "optimum": { "theta_A": optimum.theta_a, "theta_B": optimum.theta_b, "payoff": at_opt },
            "stationary_points": report.stationary_points.len(),
            "phi_sweep_trend": trend,
            "cross_section_theta_B": theta_b,
        }),
    )
}

fn run_perturbation(config: &ExperimentConfig, warnings: &[String], out: &mut OutputDir) -> Result<()> {
    let walk = config.walk_config();
    let game = config.game_spec()?;
    let grid = config.strategy_grid()?;
    let p = &config.perturbation;

    let drift = drift_sweep(walk.geometry, walk.steps, walk.coin_a, &grid.values())?;
    out.csv(
        "drift.csv",
        &["theta", "drift", "ballistic"],
        drift.iter().map(|d| vec![fmt(d.theta), fmt(d.drift), fmt(d.ballistic)]),
    )?;

    let free = walk.with_interaction(InteractionSpec::none());
    let residual_free = separability_residual(&free, &game, grid, config.seed)?;
    let residual_interacting = separability_residual(&walk, &game, grid, config.seed)?;

    let g = g_grid(&walk, &game, grid, config.seed)?;
    let n = grid.points();
    let cells: Vec<StrategyProfile> =
        (0..n * n).map(|i| StrategyProfile { theta_a: grid.value(i / n), theta_b: grid.value(i % n) }).collect();
    let weights: Vec<CollisionSample> = {
        use rayon::prelude::*;
        cells
            .par_iter()
            .map(|c| {
                Ok(CollisionSample {
                    theta_a: c.theta_a,
                    theta_b: c.theta_b,
                    weight: collision_weight(&walk, *c, config.seed)?,
                })
            })
            .collect::<Result<_>>()?
    };
    out.csv(
        "g_grid.csv",
        &["theta_A", "theta_B", "value", "collision_weight"],
        cells
            .iter()
            .zip(&g)
            .zip(&weights)
            .map(|((c, v), w)| vec![fmt(c.theta_a), fmt(c.theta_b), fmt(*v), fmt(w.weight)]),
    )?;

    let slopes = p
        .slope_points
        .iter()
        .map(|pt| first_order_slope(&walk, &game, StrategyProfile::new(pt[0], pt[1])?, &p.lambda_schedule, config.seed))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for s in &slopes {
        if let Some(note) = &s.note {
            log::warn!("({:.4}, {:.4}): {note}", s.theta_a, s.theta_b);
        }
        for r in &s.table {
            let opt = |v: Option<f64>| v.map(fmt).unwrap_or_default();
            rows.push(vec![
                fmt(s.theta_a),
                fmt(s.theta_b),
                fmt(r.lambda),
                fmt(r.slope),
                opt(r.difference),
                opt(r.ratio),
            ]);
        }
    }
    out.csv("convergence.csv", &["theta_A", "theta_B", "lambda", "slope", "difference", "ratio"], rows)?;

    let base = StrategyProfile::new(p.certificate_base[0], p.certificate_base[1])?;
    let certificate = nonseparability_certificate(&walk, &game, base, p.certificate_step, config.seed)?;
    out.json("certificate.json", &json!({ "certificate": certificate, "ratio": certificate.ratio() }))?;

    let report = PerturbationReport {
        drift,
        separability_residual_free: residual_free,
        separability_residual_interacting: residual_interacting,
        lambda_schedule: p.lambda_schedule.clone(),
        slopes,
        g_grid_points: n,
        g_estimate: g,
        certificate,
        collision_weights: weights,
    };
    out.json("report.json", &json!({ "recipe": config.recipe, "warnings": warnings, "perturbation": report }))
}

fn learning_starts(config: &ExperimentConfig, report: &EquilibriumReport) -> Vec<StrategyProfile> {
    let l = &config.learning;
    if !l.starts.is_empty() {
        return l.starts.iter().map(|s| StrategyProfile { theta_a: s[0], theta_b: s[1] }).collect();
    }
    match report.stationary_points.iter().find(|p| p.is_interior()) {
        Some(p) => circle_starts([p.theta_a, p.theta_b], l.circle_radius, l.circle_count),
        None => {
            let ticks = [PI / 4.0, PI / 2.0, 3.0 * PI / 4.0];
            ticks.iter().flat_map(|&a| ticks.iter().map(move |&b| StrategyProfile { theta_a: a, theta_b: b })).collect()
        }
    }
}

fn run_learning(config: &ExperimentConfig, warnings: &[String], out: &mut OutputDir) -> Result<()> {
    let (model, _surface, mut report) = analyze_config(config)?;
    out.json("stationary.json", &stationary_json(&report))?;
    let field_grid = StrategyGrid::new(config.learning.field_grid)?;
    let field = vector_field(&model, field_grid, config.equilibrium.grad_step)?;
    out.csv(
        "vector_field.csv",
        &["theta_A", "theta_B", "grad_A", "grad_B"],
        field.iter().map(|f| vec![fmt(f.theta_a), fmt(f.theta_b), fmt(f.grad_a), fmt(f.grad_b)]),
    )?;
    let starts = learning_starts(config, &report);
    let runs = {
        use rayon::prelude::*;
        starts.par_iter().map(|s| learn(&model, *s, &config.equilibrium)).collect::<Result<Vec<_>>>()?
    };
    for (k, run) in runs.iter().enumerate() {
        out.csv(
            &format!("trajectory_{k}.csv"),
            &["iter", "theta_A", "theta_B", "u_A", "u_B"],
            run.points.iter().map(|p| vec![p.iter.to_string(), fmt(p.theta_a), fmt(p.theta_b), fmt(p.u_a), fmt(p.u_b)]),
        )?;
    }
    let summary: Vec<Value> = runs
        .iter()
        .map(|r| {
            let last = r.last();
            json!({
                "start": r.start,
                "end": [last.theta_a, last.theta_b],
                "iterations": last.iter,
                "converged": r.converged,
                "clamp_events": r.clamp_events,
                "diagnostic": r.diagnostic,
            })
        })
        .collect();
    report.learning_trajectories = runs;
    out.json(
        "report.json",
        &json!({
            "recipe": config.recipe,
            "warnings": warnings,
            "stationary_points": report.stationary_points.len(),
            "trajectories": summary,
        }),
    )
}

/// Paper target for one game: a profile plus observable windows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationTarget {
    pub game: GameKind,
    pub profile: [f64; 2],
    /// Collision strength φ for this target.
    pub strength: f64,
    /// Maximum distance in strategy space.
    pub radius: f64,
    /// `(aux name or "u_B", target, half-width)`.
    pub observables: &'static [(&'static str, f64, f64)],
    pub interior_required: bool,
}

pub fn calibration_target(game: GameKind) -> Option<CalibrationTarget> {
    match game {
        GameKind::Race => Some(CalibrationTarget {
            game,
            profile: [PI / 2.0, 5.0 * PI / 6.0],
            strength: PI,
            radius: 0.15,
            observables: &[("u_B", 2.654, 0.5), (games::MEAN_X_B, 5.0, 0.5)],
            interior_required: false,
        }),
        GameKind::Rendezvous => Some(CalibrationTarget {
            game,
            profile: [0.0, PI],
            strength: 0.0,
            radius: 0.15,
            observables: &[(games::MEETING_PROBABILITY, 0.5, 0.1), (games::MEAN_SEPARATION, 0.5, 0.3)],
            interior_required: false,
        }),
        GameKind::TugOfWar => Some(CalibrationTarget {
            game,
            profile: [2.81, 1.32],
            strength: PI,
            radius: 0.3,
            observables: &[(games::CENTER_OF_MASS, -0.485, 0.3)],
            interior_required: true,
        }),
        GameKind::CustomTable => None,
    }
}

/// One row of the calibration table: the closest stationary point found
/// for a (game, boundary, coin pair) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationRow {
    pub game: GameKind,
    pub boundary: Boundary,
    pub coin_a: String,
    pub coin_b: String,
    pub stationary_points: usize,
    /// Both payoff surfaces are constant, so every cell is stationary.
    pub flat: bool,
    pub theta_a: Option<f64>,
    pub theta_b: Option<f64>,
    pub distance: Option<f64>,
    pub interior: Option<bool>,
    pub payoff: Option<games::PayoffPoint>,
    /// Within the target radius with every observable in its window.
    pub matches: bool,
}

fn observable(p: &games::PayoffPoint, name: &str) -> f64 {
    match name {
        "u_A" => p.u_a,
        "u_B" => p.u_b,
        aux => p.aux.get(aux).copied().unwrap_or(f64::NAN),
    }
}

pub fn calibration_cell(
    config: &ExperimentConfig,
    target: &CalibrationTarget,
    boundary: Boundary,
    coins: (&str, &str),
) -> Result<(CalibrationRow, Option<JointDistribution>)> {
    let coin =
        |name: &str| CoinState::preset(name).ok_or_else(|| Error::validation("calibrate.coins", name.to_string()));
    let walk = WalkConfig {
        geometry: LatticeGeometry::new(config.lattice.size(), boundary)?,
        steps: config.steps,
        coin_a: coin(coins.0)?,
        coin_b: coin(coins.1)?,
        interaction: InteractionSpec::collision(target.strength),
    };
    let model = WalkGame::new(walk, GameSpec::built_in(target.game)?, config.seed);
    let (surface, report) = analyze(&model, StrategyGrid::new(config.calibrate.grid)?, &config.equilibrium)?;
    let constant = |v: &[f64]| v.iter().all(|x| (x - v[0]).abs() <= 1e-9 * v[0].abs().max(1.0));
    let flat = constant(&surface.u_a) && constant(&surface.u_b);
    let dist_to = |p: &StationaryPoint| {
        ((p.theta_a - target.profile[0]).powi(2) + (p.theta_b - target.profile[1]).powi(2)).sqrt()
    };
    let best = report
        .stationary_points
        .iter()
        .filter(|p| !target.interior_required || p.is_interior())
        .min_by(|a, b| dist_to(a).total_cmp(&dist_to(b)));
    let mut row = CalibrationRow {
        game: target.game,
        boundary,
        coin_a: coins.0.to_string(),
        coin_b: coins.1.to_string(),
        stationary_points: report.stationary_points.len(),
        flat,
        theta_a: None,
        theta_b: None,
        distance: None,
        interior: None,
        payoff: None,
        matches: false,
    };
    let Some(p) = best else { return Ok((row, None)) };
    let dist = model.distribution(profile_of(p))?;
    let point = games::payoff(&dist, &model.game)?;
    let d = dist_to(p);
    row.matches = d <= target.radius
        && target.observables.iter().all(|(name, want, tol)| (observable(&point, name) - want).abs() <= *tol);
    row.theta_a = Some(p.theta_a);
    row.theta_b = Some(p.theta_b);
    row.distance = Some(d);
    row.interior = Some(p.is_interior());
    row.payoff = Some(point);
    Ok((row, Some(dist)))
}

/// The `count` most probable cells, highest first (ties by grid order).
pub fn distribution_peaks(dist: &JointDistribution, count: usize) -> Vec<(i64, i64, f64)> {
    let mut cells: Vec<_> = dist.iter().collect();
    cells.sort_by(|a, b| b.2.total_cmp(&a.2));
    cells.truncate(count);
    cells
}

fn run_calibrate(config: &ExperimentConfig, warnings: &[String], out: &mut OutputDir) -> Result<()> {
    let c = &config.calibrate;
    let mut rows: Vec<CalibrationRow> = Vec::new();
    let mut best: BTreeMap<&'static str, (CalibrationRow, Option<JointDistribution>)> = BTreeMap::new();
    for &game in &c.games {
        let target = calibration_target(game).expect("validated");
        let mut cells = Vec::new();
        for &boundary in &c.boundaries {
            for a in &c.coins {
                for b in &c.coins {
                    log::info!("calibrating {game:?} {boundary} {a}/{b}");
                    cells.push(calibration_cell(config, &target, boundary, (a, b))?);
                }
            }
        }
        // matches first, flat surfaces after informative ones, then by distance
        cells.sort_by(|(x, _), (y, _)| {
            y.matches
                .cmp(&x.matches)
                .then(x.flat.cmp(&y.flat))
                .then(x.distance.unwrap_or(f64::INFINITY).total_cmp(&y.distance.unwrap_or(f64::INFINITY)))
        });
        if let Some(top) = cells.first().cloned() {
            best.insert(game_name(game), top);
        }
        rows.extend(cells.into_iter().map(|(r, _)| r));
    }

    let header = [
        "game",
        "rank",
        "boundary",
        "coin_A",
        "coin_B",
        "stationary_points",
        "flat",
        "theta_A",
        "theta_B",
        "distance",
        "interior",
        "u_A",
        "u_B",
        "mean_x_A",
        "mean_x_B",
        "meeting_probability",
        "mean_separation",
        "center_of_mass",
        "matches",
    ];
    let mut table = Vec::new();
    let mut rank = 0;
    let mut last_game = None;
    for r in &rows {
        rank = if last_game == Some(r.game) { rank + 1 } else { 1 };
        last_game = Some(r.game);
        let opt = |v: Option<f64>| v.map(fmt).unwrap_or_default();
        let obs = |name: &str| r.payoff.as_ref().map(|p| fmt(observable(p, name))).unwrap_or_default();
        table.push(vec![
            game_name(r.game).to_string(),
            rank.to_string(),
            r.boundary.to_string(),
            r.coin_a.clone(),
            r.coin_b.clone(),
            r.stationary_points.to_string(),
            r.flat.to_string(),
            opt(r.theta_a),
            opt(r.theta_b),
            opt(r.distance),
            r.interior.map(|b| b.to_string()).unwrap_or_default(),
            obs("u_A"),
            obs("u_B"),
            obs(games::MEAN_X_A),
            obs(games::MEAN_X_B),
            obs(games::MEETING_PROBABILITY),
            obs(games::MEAN_SEPARATION),
            obs(games::CENTER_OF_MASS),
            r.matches.to_string(),
        ]);
    }
    out.csv("calibration.csv", &header, table)?;

    let summary: BTreeMap<&str, Value> = best
        .iter()
        .map(|(name, (row, dist))| {
            let peaks = dist.as_ref().map(|d| distribution_peaks(d, 4));
            (*name, json!({ "best": row, "peaks": peaks }))
        })
        .collect();
    out.json("calibration.json", &json!({ "recipe": config.recipe, "warnings": warnings, "games": summary }))
}

fn game_name(kind: GameKind) -> &'static str {
    match kind {
        GameKind::Race => "race",
        GameKind::Rendezvous => "rendezvous",
        GameKind::TugOfWar => "tug_of_war",
        GameKind::CustomTable => "custom_table",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recipe_names_round_trip() {
        for r in Recipe::ALL {
            assert_eq!(r.name().parse::<Recipe>().unwrap(), r);
        }
        assert_eq!("tug-of-war".parse::<Recipe>().unwrap(), Recipe::TugOfWar);
        assert!("dance".parse::<Recipe>().is_err());
    }

    #[test]
    fn defaults_follow_recipe() {
        let race = ExperimentConfig::defaults(Recipe::Race);
        assert_eq!((race.lattice.size(), race.steps, race.interaction.strength), (15, 20, PI));
        let rdv = ExperimentConfig::defaults(Recipe::Rendezvous);
        assert_eq!(rdv.interaction.strength, 0.0);
        assert_eq!(rdv.game.kind, GameKind::Rendezvous);
        let pert = ExperimentConfig::defaults(Recipe::Perturbation);
        assert_eq!((pert.lattice.size(), pert.steps), (31, 10));
    }

    #[test]
    fn toml_overrides_merge_into_defaults() {
        let text = r#"
            recipe = "race"
            steps = 5
            lattice = { size = 9, boundary = "reflecting" }
            interaction = { kind = "collision_phase", strength = "pi/2" }
            [equilibrium]
            eta = 0.1
        "#;
        let doc = ExperimentConfig::parse_document(text, Path::new("x.toml")).unwrap();
        let c = ExperimentConfig::resolve(doc, &Overrides { seed: Some(3), ..Default::default() }).unwrap();
        assert_eq!(c.steps, 5);
        assert_eq!(c.lattice.boundary(), Boundary::Reflecting);
        assert_eq!(c.interaction.strength, PI / 2.0);
        assert_eq!(c.equilibrium.eta, 0.1);
        assert_eq!(c.equilibrium.tolerance, 1e-3);
        assert_eq!(c.seed, 3);
        assert_eq!(c.grid, 61);
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = ExperimentConfig::defaults(Recipe::Perturbation);
        let text = serde_json::to_string(&c).unwrap();
        let doc = ExperimentConfig::parse_document(&text, Path::new("resolved_config.json")).unwrap();
        assert_eq!(ExperimentConfig::resolve(doc, &Overrides::default()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_and_even_lattice_rejected() {
        let doc = json!({ "recipe": "race", "stepz": 3 });
        assert!(ExperimentConfig::resolve(doc, &Overrides::default()).is_err());
        let doc = json!({ "recipe": "race", "lattice": { "size": 14 } });
        let err = ExperimentConfig::resolve(doc, &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("lattice size must be odd"), "{err}");
        assert!(err.is_config_error());
        let doc = json!({ "steps": 3 });
        assert!(ExperimentConfig::resolve(doc, &Overrides::default()).is_err());
    }

    #[test]
    fn validation_warnings() {
        let race = ExperimentConfig::defaults(Recipe::Race);
        let w = race.validate().unwrap();
        assert!(w.iter().any(|w| w.starts_with("boundary reachable: results boundary-rule dependent")));

        let mut noisy = ExperimentConfig::defaults(Recipe::Race);
        noisy.interaction = InteractionSpec::noisy(PI, 0.3);
        noisy.ensemble = 1;
        noisy.equilibrium.refine = false;
        let w = noisy.validate().unwrap();
        assert!(w.iter().any(|w| w.contains("ensemble = 1")));
        assert!(w.iter().any(|w| w.contains("refinement disabled")));

        let mut bad = ExperimentConfig::defaults(Recipe::Calibrate);
        bad.calibrate.coins.push("sideways".into());
        assert!(bad.validate().is_err());
    }

    #[test]
    fn merge_replaces_leaves() {
        let mut base = json!({ "a": { "b": 1, "c": 2 }, "d": [1, 2] });
        merge(&mut base, json!({ "a": { "c": 5 }, "d": [3] }));
        assert_eq!(base, json!({ "a": { "b": 1, "c": 5 }, "d": [3] }));
    }
}
