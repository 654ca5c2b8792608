//! Weak-interaction structure of the payoff.
//!
//! Without interaction the race payoff is `F(θ_A) − F(θ_B)` with `F` the
//! single-walker drift. Switching on a strength λ adds `λ G(θ_A, θ_B) + O(λ²)`.
//! `G` is extracted here by finite-λ differencing and Richardson
//! extrapolation; the shrinking of successive slope differences is the
//! certificate that the expansion is first order.

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{check_angle, evolve_single, Evolver, StrategyProfile, WalkConfig};
use crate::equilibrium::{PayoffModel, StrategyGrid, WalkGame};
use crate::error::{Error, Result};
use crate::games::{payoff, GameKind, GameSpec};
use crate::hilbert::{CoinState, JointDistribution, LatticeGeometry};
use crate::interactions::InteractionSpec;

/// Expected position of a single walker after `steps` steps.
pub fn drift(geometry: LatticeGeometry, steps: usize, theta: f64, coin: CoinState) -> Result<f64> {
    Ok(evolve_single(geometry, steps, theta, coin)?.mean_position())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftSample {
    pub theta: f64,
    pub drift: f64,
    /// Ballistic reference `T cos θ`, reported for comparison only.
    pub ballistic: f64,
}

pub fn drift_sweep(
    geometry: LatticeGeometry,
    steps: usize,
    coin: CoinState,
    thetas: &[f64],
) -> Result<Vec<DriftSample>> {
    thetas
        .iter()
        .map(|&theta| {
            Ok(DriftSample {
                theta,
                drift: drift(geometry, steps, theta, coin)?,
                ballistic: steps as f64 * theta.cos(),
            })
        })
        .collect()
}

/// Payoff predicted from independent single walkers.
fn separable_u_a(config: &WalkConfig, game: &GameSpec, profile: StrategyProfile) -> Result<f64> {
    let g = config.geometry;
    match game.kind {
        GameKind::Race => Ok(drift(g, config.steps, profile.theta_a, config.coin_a)?
            - drift(g, config.steps, profile.theta_b, config.coin_b)?),
        _ => {
            let pa = evolve_single(g, config.steps, profile.theta_a, config.coin_a)?.probabilities();
            let pb = evolve_single(g, config.steps, profile.theta_b, config.coin_b)?.probabilities();
            let outer = pa.iter().flat_map(|a| pb.iter().map(move |b| a * b)).collect();
            let d = JointDistribution::new(g, outer)?;
            Ok(payoff(&d, game)?.u_a)
        }
    }
}

/// `max |u_A(θ_A, θ_B) − separable prediction|` over the grid, where
/// `u_A` uses the configured interaction. Zero (to rounding) when the
/// interaction is `none`.
pub fn separability_residual(config: &WalkConfig, game: &GameSpec, grid: StrategyGrid, seed: u64) -> Result<f64> {
    let model = WalkGame::new(*config, game.clone(), seed);
    let values = grid.values();
    let n = grid.points();
    let residuals: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|i| {
            let p = StrategyProfile::new(values[i / n], values[i % n])?;
            let full = model.evaluate(p)?.u_a;
            Ok((full - separable_u_a(config, game, p)?).abs())
        })
        .collect::<Result<_>>()?;
    Ok(residuals.into_iter().fold(0.0, f64::max))
}

fn u_a_at_strength(
    config: &WalkConfig,
    game: &GameSpec,
    profile: StrategyProfile,
    strength: f64,
    seed: u64,
) -> Result<f64> {
    let cfg = config.with_interaction(config.interaction.scaled(strength));
    Ok(WalkGame::new(cfg, game.clone(), seed).evaluate(profile)?.u_a)
}

/// Default strength schedule, halving from 0.1.
pub const DEFAULT_SCHEDULE: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeRow {
    pub lambda: f64,
    /// `[u_A(λ) − u_A(0)] / λ`
    pub slope: f64,
    /// `|slope(λ_i) − slope(λ_{i+1})|`, absent on the last row.
    pub difference: Option<f64>,
    /// Ratio of this difference to the previous one.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeEstimate {
    pub theta_a: f64,
    pub theta_b: f64,
    /// Richardson-extrapolated `G` from the two smallest strengths.
    pub g: f64,
    pub table: Vec<SlopeRow>,
    /// Successive differences shrink in proportion to λ.
    pub perturbative: bool,
    pub note: Option<String>,
}

/// Differences below this are treated as exact linearity.
const EXACT_FLOOR: f64 = 1e-11;

pub fn first_order_slope(
    config: &WalkConfig,
    game: &GameSpec,
    profile: StrategyProfile,
    schedule: &[f64],
    seed: u64,
) -> Result<SlopeEstimate> {
    if schedule.len() < 2 {
        return Err(Error::validation("lambda_schedule", "needs at least two strengths"));
    }
    if schedule.iter().any(|l| !(*l > 0.0 && l.is_finite())) || schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::validation("lambda_schedule", "must be positive and strictly decreasing"));
    }
    let base = u_a_at_strength(config, game, profile, 0.0, seed)?;
    let slopes: Vec<f64> = schedule
        .par_iter()
        .map(|&l| Ok((u_a_at_strength(config, game, profile, l, seed)? - base) / l))
        .collect::<Result<_>>()?;

    let diffs: Vec<f64> = slopes.windows(2).map(|w| (w[0] - w[1]).abs()).collect();
    let mut table = Vec::with_capacity(schedule.len());
    let mut perturbative = true;
    let mut note = None;
    for (i, (&lambda, &slope)) in schedule.iter().zip(&slopes).enumerate() {
        let difference = diffs.get(i).copied();
        let ratio = match (i.checked_sub(1).and_then(|j| diffs.get(j)), difference) {
            (Some(&prev), Some(d)) if prev > EXACT_FLOOR => Some(d / prev),
            _ => None,
        };
        if let (Some(r), Some(&prev), Some(d)) = (ratio, i.checked_sub(1).and_then(|j| diffs.get(j)), difference) {
            // expected ratio of successive differences under s(λ) = G + cλ
            let q = (schedule[i] - schedule[i + 1]) / (schedule[i - 1] - schedule[i]);
            if !(0.7 * q..=1.3 * q).contains(&r) && !(prev < EXACT_FLOOR && d < EXACT_FLOOR) {
                perturbative = false;
                note = Some(format!(
                    "not in perturbative regime: difference ratio {r:.4} at lambda = {lambda}, expected about {q:.4}"
                ));
            }
        }
        table.push(SlopeRow { lambda, slope, difference, ratio });
    }
    let k = schedule.len();
    let (l1, l2, s1, s2) = (schedule[k - 2], schedule[k - 1], slopes[k - 2], slopes[k - 1]);
    let g = (l1 * s2 - l2 * s1) / (l1 - l2);
    Ok(SlopeEstimate { theta_a: profile.theta_a, theta_b: profile.theta_b, g, table, perturbative, note })
}

/// Finite-strength estimate `[u_A(φ) − u_A(0)] / φ` at the configured
/// strength; identically zero for a trivial interaction.
pub fn g_estimate(config: &WalkConfig, game: &GameSpec, profile: StrategyProfile, seed: u64) -> Result<f64> {
    let s = config.interaction.strength;
    if config.interaction.is_trivial() || s == 0.0 {
        return Ok(0.0);
    }
    Ok((u_a_at_strength(config, game, profile, s, seed)? - u_a_at_strength(config, game, profile, 0.0, seed)?) / s)
}

/// `G` on a grid, in grid order.
pub fn g_grid(config: &WalkConfig, game: &GameSpec, grid: StrategyGrid, seed: u64) -> Result<Vec<f64>> {
    let n = grid.points();
    (0..n * n)
        .into_par_iter()
        .map(|i| g_estimate(config, game, StrategyProfile::new(grid.value(i / n), grid.value(i % n))?, seed))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonseparabilityCertificate {
    pub theta_a: f64,
    pub theta_b: f64,
    pub step: f64,
    /// `|∂²G/∂θ_A∂θ_B|` of the finite-strength `G` estimate.
    pub mixed_partial: f64,
    /// `|∂²u_A/∂θ_A∂θ_B|` without interaction, the estimator noise floor.
    pub baseline: f64,
}

impl NonseparabilityCertificate {
    pub fn ratio(&self) -> f64 {
        self.mixed_partial / self.baseline.max(f64::MIN_POSITIVE)
    }
}

fn mixed_partial(f: impl Fn(f64, f64) -> Result<f64>, a: f64, b: f64, h: f64) -> Result<f64> {
    Ok((f(a + h, b + h)? - f(a + h, b - h)? - f(a - h, b + h)? + f(a - h, b - h)?) / (4.0 * h * h))
}

pub fn nonseparability_certificate(
    config: &WalkConfig,
    game: &GameSpec,
    base: StrategyProfile,
    step: f64,
    seed: u64,
) -> Result<NonseparabilityCertificate> {
    base.validate()?;
    for t in [base.theta_a, base.theta_b] {
        check_angle("theta", t - step)?;
        check_angle("theta", t + step)?;
    }
    let g = |a: f64, b: f64| g_estimate(config, game, StrategyProfile::new(a, b)?, seed);
    let free = config.with_interaction(InteractionSpec::none());
    let u0 = |a: f64, b: f64| u_a_at_strength(&free, game, StrategyProfile::new(a, b)?, 0.0, seed);
    Ok(NonseparabilityCertificate {
        theta_a: base.theta_a,
        theta_b: base.theta_b,
        step,
        mixed_partial: mixed_partial(g, base.theta_a, base.theta_b, step)?.abs(),
        baseline: mixed_partial(u0, base.theta_a, base.theta_b, step)?.abs(),
    })
}

/// Time-accumulated coincidence `Σ_{t=1}^{T} Σ_x P_t(x, x)` of the
/// non-interacting walk. Lies in `[0, T]`.
pub fn collision_weight(config: &WalkConfig, profile: StrategyProfile, seed: u64) -> Result<f64> {
    let free = config.with_interaction(InteractionSpec::none());
    let mut ev = Evolver::new(&free, profile, seed)?;
    let mut total = 0.0;
    for _ in 0..config.steps {
        ev.advance();
        total += ev.coincidence();
    }
    Ok(total)
}

/// Everything the perturbation study exports.
#[derive(Debug, Clone, Serialize)]
pub struct PerturbationReport {
    pub drift: Vec<DriftSample>,
    pub separability_residual_free: f64,
    pub separability_residual_interacting: f64,
    pub lambda_schedule: Vec<f64>,
    pub slopes: Vec<SlopeEstimate>,
    pub g_grid_points: usize,
    pub g_estimate: Vec<f64>,
    pub certificate: NonseparabilityCertificate,
    pub collision_weights: Vec<CollisionSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollisionSample {
    pub theta_a: f64,
    pub theta_b: f64,
    pub weight: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::Boundary;
    use std::f64::consts::PI;

    fn wide() -> LatticeGeometry {
        LatticeGeometry::new(31, Boundary::Periodic).unwrap()
    }

    #[test]
    fn ballistic_drift() {
        assert_eq!(drift(wide(), 10, 0.0, CoinState::right()).unwrap(), 10.0);
        assert_eq!(drift(wide(), 10, 0.0, CoinState::left()).unwrap(), -10.0);
    }

    #[test]
    fn pi_drift_left_coin_zigzag() {
        // R_y(π)|L⟩ = −|R⟩, R_y(π)|R⟩ = |L⟩: the walker alternates +1, −1.
        let f = drift(wide(), 10, PI, CoinState::left()).unwrap();
        assert!(f.abs() < 1e-12, "{f}");
        let f = drift(wide(), 11, PI, CoinState::left()).unwrap();
        assert!((f - 1.0).abs() < 1e-12, "{f}");
    }

    #[test]
    fn trivial_interaction_has_zero_slope() {
        let cfg = WalkConfig::new(wide(), 10);
        let est =
            first_order_slope(&cfg, &GameSpec::race(), StrategyProfile::new(1.0, 2.0).unwrap(), &DEFAULT_SCHEDULE, 0)
                .unwrap();
        assert_eq!(est.g, 0.0);
        assert!(est.perturbative);
        assert!(est.table.iter().all(|r| r.slope == 0.0));
    }

    #[test]
    fn schedule_validation() {
        let cfg = WalkConfig::new(wide(), 10).with_interaction(InteractionSpec::collision(PI));
        let p = StrategyProfile::new(1.0, 2.0).unwrap();
        assert!(first_order_slope(&cfg, &GameSpec::race(), p, &[0.1], 0).is_err());
        assert!(first_order_slope(&cfg, &GameSpec::race(), p, &[0.1, 0.2], 0).is_err());
        assert!(first_order_slope(&cfg, &GameSpec::race(), p, &[0.1, 0.0], 0).is_err());
    }

    #[test]
    fn collision_weight_extremes() {
        let cfg = WalkConfig::new(wide(), 10);
        let same = collision_weight(&cfg, StrategyProfile::new(0.0, 0.0).unwrap(), 0).unwrap();
        assert!((same - 10.0).abs() < 1e-12);
        let opposite = cfg.with_coins(CoinState::right(), CoinState::left());
        let w = collision_weight(
            &opposite.with_interaction(InteractionSpec::collision(1.0)),
            StrategyProfile::new(0.0, 0.0).unwrap(),
            0,
        )
        .unwrap();
        assert_eq!(w, 0.0);
        let one = WalkConfig::new(wide(), 1).with_coins(CoinState::right(), CoinState::left());
        assert_eq!(collision_weight(&one, StrategyProfile::new(0.0, 0.0).unwrap(), 0).unwrap(), 0.0);
    }

    #[test]
    fn trivial_certificate_is_zero() {
        let cfg = WalkConfig::new(wide(), 10);
        let c = nonseparability_certificate(
            &cfg,
            &GameSpec::race(),
            StrategyProfile::new(PI / 3.0, 2.0 * PI / 3.0).unwrap(),
            1e-2,
            0,
        )
        .unwrap();
        assert_eq!(c.mixed_partial, 0.0);
        assert!(c.baseline < 1e-6);
    }

    #[test]
    fn certificate_stencil_must_fit() {
        let cfg = WalkConfig::new(wide(), 10);
        assert!(nonseparability_certificate(&cfg, &GameSpec::race(), StrategyProfile::new(0.0, 1.0).unwrap(), 1e-2, 0)
            .is_err());
    }
}
