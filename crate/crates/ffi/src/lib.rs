//! C ABI for the `qwgame` simulator.
//!
//! Configurations are opaque handles created with [`qwg_config_new`] and
//! released with [`qwg_config_free`]. Every fallible call returns a
//! [`QwgStatus`]; on failure [`qwg_last_error`] describes what went wrong on
//! the calling thread. Output buffers are always caller-owned.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use num_complex::Complex64;
use qwgame::cli::{run_recipe, ExperimentConfig, Overrides, Recipe};
use qwgame::dynamics::{StrategyProfile, WalkConfig};
use qwgame::equilibrium::{sweep_surface, PayoffModel, StrategyGrid, WalkGame};
use qwgame::games::{self, GameKind, GameSpec};
use qwgame::hilbert::{Boundary, CoinState, LatticeGeometry};
use qwgame::interactions::{InteractionKind, InteractionSpec};
use qwgame::perturbation::drift;
use qwgame::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QwgStatus {
    Ok = 0,
    /// A required pointer was null.
    NullPointer = 1,
    /// A parameter violated a documented invariant.
    InvalidArgument = 2,
    /// A strategy angle lies outside `[0, π]`.
    Domain = 3,
    /// A caller buffer has the wrong length.
    BufferSize = 4,
    /// File system or serialization failure.
    Io = 5,
    /// A recipe run failed after starting.
    Runtime = 6,
    /// The library panicked; this is a bug.
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QwgBoundary {
    Periodic = 0,
    Reflecting = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QwgInteraction {
    None = 0,
    CollisionPhase = 1,
    AttractiveCollision = 2,
    LongRange = 3,
    CoinDependent = 4,
    NoisyCollision = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QwgGame {
    Race = 0,
    Rendezvous = 1,
    TugOfWar = 2,
}

/// Expected utilities and diagnostics at one profile.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QwgPayoff {
    pub u_a: f64,
    pub u_b: f64,
    pub mean_x_a: f64,
    pub mean_x_b: f64,
    pub mean_separation: f64,
    pub meeting_probability: f64,
    pub center_of_mass: f64,
}

/// Opaque experiment handle: walk, game, seed and noise ensemble.
pub struct QwgConfig {
    walk: WalkConfig,
    game: GameKind,
    seed: u64,
    ensemble: usize,
}

impl QwgConfig {
    fn model(&self) -> WalkGame {
        WalkGame::new(self.walk, GameSpec::built_in(self.game).expect("built-in game"), self.seed)
            .with_ensemble(self.ensemble)
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> QwgStatus {
    match err {
        Error::Domain { .. } => QwgStatus::Domain,
        Error::Validation { .. } | Error::Shape { .. } | Error::Config(_) => QwgStatus::InvalidArgument,
        Error::Io { .. } | Error::Csv(_) | Error::Json(_) => QwgStatus::Io,
    }
}

struct Failure(QwgStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(QwgStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status plus last-error text.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> QwgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            QwgStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            QwgStatus::Panic
        }
    }
}

fn boundary_from(raw: u32) -> Result<Boundary, Failure> {
    match raw {
        r if r == QwgBoundary::Periodic as u32 => Ok(Boundary::Periodic),
        r if r == QwgBoundary::Reflecting as u32 => Ok(Boundary::Reflecting),
        _ => Err(Failure(QwgStatus::InvalidArgument, format!("unknown boundary {raw}"))),
    }
}

/// # Safety
/// `coin` must be null or point to four readable doubles.
unsafe fn coin_from(coin: *const f64, what: &str) -> Result<CoinState, Failure> {
    if coin.is_null() {
        return Err(null(what));
    }
    let c = std::slice::from_raw_parts(coin, 4);
    Ok(CoinState::new(Complex64::new(c[0], c[1]), Complex64::new(c[2], c[3]))?)
}

/// # Safety
/// `ptr` must be null or a valid NUL-terminated string.
unsafe fn str_from<'a>(ptr: *const c_char, what: &str) -> Result<Option<&'a str>, Failure> {
    if ptr.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map(Some)
        .map_err(|_| Failure(QwgStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

/// Message for the most recent failed call on this thread, or an empty
/// string. Valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn qwg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qwg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a configuration with walkers starting in `|R⟩`, no interaction,
/// the race game, seed 0 and an ensemble of 32. `boundary` takes a
/// [`QwgBoundary`] value.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn qwg_config_new(size: u32, boundary: u32, steps: u32, out: *mut *mut QwgConfig) -> QwgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let geometry = LatticeGeometry::new(size as usize, boundary_from(boundary)?)?;
        let walk = WalkConfig::new(geometry, steps as usize);
        walk.validate()?;
        let cfg = QwgConfig { walk, game: GameKind::Race, seed: 0, ensemble: 32 };
        *out = Box::into_raw(Box::new(cfg));
        Ok(())
    })
}

/// Releases a handle from [`qwg_config_new`]. Null is ignored.
///
/// # Safety
/// `config` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qwg_config_free(config: *mut QwgConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Sets both initial coins as `{re_R, im_R, re_L, im_L}`; each must be
/// normalized.
///
/// # Safety
/// `config` must be a live handle; `coin_a` and `coin_b` must each point to
/// four doubles.
#[no_mangle]
pub unsafe extern "C" fn qwg_config_set_coins(
    config: *mut QwgConfig,
    coin_a: *const f64,
    coin_b: *const f64,
) -> QwgStatus {
    guard(|| {
        let cfg = config.as_mut().ok_or_else(|| null("config"))?;
        cfg.walk.coin_a = coin_from(coin_a, "coin_a")?;
        cfg.walk.coin_b = coin_from(coin_b, "coin_b")?;
        Ok(())
    })
}

/// Sets the interaction. `kind` takes a [`QwgInteraction`] value;
/// `range_exponent` is read only by long-range and `noise_sigma` only by the
/// noisy collision.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qwg_config_set_interaction(
    config: *mut QwgConfig,
    kind: u32,
    strength: f64,
    range_exponent: f64,
    noise_sigma: f64,
) -> QwgStatus {
    guard(|| {
        let cfg = config.as_mut().ok_or_else(|| null("config"))?;
        let kind = match kind {
            0 => InteractionKind::None,
            1 => InteractionKind::CollisionPhase,
            2 => InteractionKind::AttractiveCollision,
            3 => InteractionKind::LongRange,
            4 => InteractionKind::CoinDependent,
            5 => InteractionKind::NoisyCollision,
            k => return Err(Failure(QwgStatus::InvalidArgument, format!("unknown interaction kind {k}"))),
        };
        let mut spec = InteractionSpec::with_kind(kind, strength);
        if kind == InteractionKind::LongRange {
            spec.range_exponent = Some(range_exponent);
        }
        if kind == InteractionKind::NoisyCollision {
            spec.noise_sigma = Some(noise_sigma);
        }
        spec.validate()?;
        cfg.walk.interaction = spec;
        Ok(())
    })
}

/// Selects the payoff game; `game` takes a [`QwgGame`] value.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qwg_config_set_game(config: *mut QwgConfig, game: u32) -> QwgStatus {
    guard(|| {
        let cfg = config.as_mut().ok_or_else(|| null("config"))?;
        cfg.game = match game {
            0 => GameKind::Race,
            1 => GameKind::Rendezvous,
            2 => GameKind::TugOfWar,
            g => return Err(Failure(QwgStatus::InvalidArgument, format!("unknown game {g}"))),
        };
        Ok(())
    })
}

/// Seed for noisy interactions and the number of seeds averaged per
/// evaluation (at least 1).
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qwg_config_set_seed(config: *mut QwgConfig, seed: u64, ensemble: u32) -> QwgStatus {
    guard(|| {
        let cfg = config.as_mut().ok_or_else(|| null("config"))?;
        if ensemble == 0 {
            return Err(Failure(QwgStatus::InvalidArgument, "ensemble must be at least 1".into()));
        }
        cfg.seed = seed;
        cfg.ensemble = ensemble as usize;
        Ok(())
    })
}

/// Writes the measured joint distribution `P(x_A, x_B)` at `(theta_a,
/// theta_b)` into `out`, row-major in `x_A` from `-(L-1)/2`. `len` must be
/// `L * L`.
///
/// # Safety
/// `config` must be a live handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn qwg_evolve_distribution(
    config: *const QwgConfig,
    theta_a: f64,
    theta_b: f64,
    out: *mut f64,
    len: usize,
) -> QwgStatus {
    guard(|| {
        let cfg = config.as_ref().ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let want = cfg.walk.geometry.size().pow(2);
        if len != want {
            return Err(Failure(QwgStatus::BufferSize, format!("buffer holds {len} values, need {want}")));
        }
        let dist = cfg.model().distribution(StrategyProfile::new(theta_a, theta_b)?)?;
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(dist.as_slice());
        Ok(())
    })
}

/// Payoffs and diagnostics at `(theta_a, theta_b)`.
///
/// # Safety
/// `config` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qwg_payoff(
    config: *const QwgConfig,
    theta_a: f64,
    theta_b: f64,
    out: *mut QwgPayoff,
) -> QwgStatus {
    guard(|| {
        let cfg = config.as_ref().ok_or_else(|| null("config"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let p = cfg.model().evaluate(StrategyProfile::new(theta_a, theta_b)?)?;
        *out = QwgPayoff {
            u_a: p.u_a,
            u_b: p.u_b,
            mean_x_a: p.aux[games::MEAN_X_A],
            mean_x_b: p.aux[games::MEAN_X_B],
            mean_separation: p.aux[games::MEAN_SEPARATION],
            meeting_probability: p.aux[games::MEETING_PROBABILITY],
            center_of_mass: p.aux[games::CENTER_OF_MASS],
        };
        Ok(())
    })
}

/// Payoff surfaces on the `n × n` grid `θ_k = kπ/(n−1)`; entry `j * n + k`
/// is the value at `(θ_j, θ_k)`. Both buffers hold `len = n * n` doubles.
///
/// # Safety
/// `config` must be a live handle; `u_a` and `u_b` must each point to `len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn qwg_sweep_surface(
    config: *const QwgConfig,
    n: u32,
    u_a: *mut f64,
    u_b: *mut f64,
    len: usize,
) -> QwgStatus {
    guard(|| {
        let cfg = config.as_ref().ok_or_else(|| null("config"))?;
        if u_a.is_null() || u_b.is_null() {
            return Err(null("surface buffer"));
        }
        let grid = StrategyGrid::new(n as usize)?;
        let want = (n as usize).pow(2);
        if len != want {
            return Err(Failure(QwgStatus::BufferSize, format!("buffers hold {len} values, need {want}")));
        }
        let surface = sweep_surface(&cfg.model(), grid)?;
        std::slice::from_raw_parts_mut(u_a, len).copy_from_slice(&surface.u_a);
        std::slice::from_raw_parts_mut(u_b, len).copy_from_slice(&surface.u_b);
        Ok(())
    })
}

/// Single-walker drift `⟨x⟩` after `steps` steps from `coin`
/// (`{re_R, im_R, re_L, im_L}`).
///
/// # Safety
/// `coin` must point to four doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qwg_drift(
    size: u32,
    boundary: u32,
    steps: u32,
    theta: f64,
    coin: *const f64,
    out: *mut f64,
) -> QwgStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let geometry = LatticeGeometry::new(size as usize, boundary_from(boundary)?)?;
        *out = drift(geometry, steps as usize, theta, coin_from(coin, "coin")?)?;
        Ok(())
    })
}

/// Runs a named recipe like the command-line driver. `config_path` and
/// `recipe` may be null (but not both). `exit_code` receives the driver's
/// exit code (0, 1, 2 or 3) and may be null.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `exit_code` must be null
/// or writable.
#[no_mangle]
pub unsafe extern "C" fn qwg_run_recipe(
    config_path: *const c_char,
    recipe: *const c_char,
    out_dir: *const c_char,
    exit_code: *mut i32,
) -> QwgStatus {
    let mut code = 2;
    let status = guard(|| {
        let path = str_from(config_path, "config_path")?;
        let out = str_from(out_dir, "out_dir")?.ok_or_else(|| null("out_dir"))?;
        let recipe = str_from(recipe, "recipe")?.map(|r| r.parse::<Recipe>()).transpose();
        let overrides = Overrides { recipe: recipe.inspect_err(|_| code = 1)?, ..Overrides::default() };
        let config = ExperimentConfig::load(path.map(Path::new), &overrides).inspect_err(|_| code = 1)?;
        match run_recipe(&config, Path::new(out)) {
            Ok(summary) => {
                code = if summary.found_stationary == Some(false) { 3 } else { 0 };
                Ok(())
            }
            Err(e) => {
                code = if e.is_config_error() { 1 } else { 2 };
                let status = if e.is_config_error() { status_of(&e) } else { QwgStatus::Runtime };
                Err(Failure(status, e.to_string()))
            }
        }
    });
    if let Some(c) = exit_code.as_mut() {
        *c = code;
    }
    status
}
