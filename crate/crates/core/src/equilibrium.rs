//! Strategy-space analysis: payoff surfaces, best responses, stationary
//! profiles, local stability and gradient learning.
//!
//! Everything here works against the [`PayoffModel`] trait, so the same code
//! drives the quantum-walk games ([`WalkGame`]) and closed-form test games
//! ([`FnGame`]).

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{check_angle, evolve, StrategyProfile, WalkConfig};
use crate::error::{Error, Result};
use crate::games::{payoff, GameSpec, PayoffPoint};
use crate::hilbert::{measure_joint, JointDistribution};

/// A two-player game over `[0, π]²`.
pub trait PayoffModel: Sync {
    fn evaluate(&self, profile: StrategyProfile) -> Result<PayoffPoint>;

    fn payoffs(&self, theta_a: f64, theta_b: f64) -> Result<(f64, f64)> {
        let p = self.evaluate(StrategyProfile::new(theta_a, theta_b)?)?;
        Ok((p.u_a, p.u_b))
    }
}

/// The quantum-walk game: evolve, measure, score.
///
/// Noisy interactions are averaged over `ensemble` seeds `seed, seed+1, …`;
/// the same seeds are used at every profile (common random numbers).
#[derive(Debug, Clone)]
pub struct WalkGame {
    pub config: WalkConfig,
    pub game: GameSpec,
    pub seed: u64,
    pub ensemble: usize,
}

impl WalkGame {
    pub fn new(config: WalkConfig, game: GameSpec, seed: u64) -> Self {
        WalkGame { config, game, seed, ensemble: 1 }
    }

    pub fn with_ensemble(mut self, ensemble: usize) -> Self {
        self.ensemble = ensemble.max(1);
        self
    }

    /// Measured distribution, ensemble-averaged for noisy interactions.
    pub fn distribution(&self, profile: StrategyProfile) -> Result<JointDistribution> {
        let runs = if self.config.interaction.is_noisy() { self.ensemble.max(1) } else { 1 };
        if runs == 1 {
            return Ok(measure_joint(&evolve(&self.config, profile, self.seed)?));
        }
        let mut acc = vec![0.0; self.config.geometry.size().pow(2)];
        for r in 0..runs as u64 {
            let d = measure_joint(&evolve(&self.config, profile, self.seed.wrapping_add(r))?);
            acc.iter_mut().zip(d.as_slice()).for_each(|(a, p)| *a += p);
        }
        acc.iter_mut().for_each(|a| *a /= runs as f64);
        JointDistribution::new(self.config.geometry, acc)
    }
}

impl PayoffModel for WalkGame {
    fn evaluate(&self, profile: StrategyProfile) -> Result<PayoffPoint> {
        payoff(&self.distribution(profile)?, &self.game)
    }
}

/// Closed-form game `(θ_A, θ_B) ↦ (u_A, u_B)`.
pub struct FnGame<F>(pub F);

impl<F> PayoffModel for FnGame<F>
where
    F: Fn(f64, f64) -> (f64, f64) + Sync,
{
    fn evaluate(&self, profile: StrategyProfile) -> Result<PayoffPoint> {
        let (u_a, u_b) = (self.0)(profile.theta_a, profile.theta_b);
        Ok(PayoffPoint { u_a, u_b, aux: BTreeMap::new() })
    }
}

/// Tunables shared by refinement, stability and learning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquilibriumOptions {
    /// Central-difference step for gradients (rad).
    pub grad_step: f64,
    /// Step for second derivatives (rad).
    pub hess_step: f64,
    /// First-order residual bound (payoff units per rad).
    pub tolerance: f64,
    pub max_refine_iters: usize,
    pub refine: bool,
    /// Learning rate η.
    pub eta: f64,
    pub max_learn_iters: usize,
    /// Refine at most this many grid candidates (evenly strided) when a flat
    /// surface makes most cells tie.
    pub max_candidates: usize,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        EquilibriumOptions {
            grad_step: 1e-3,
            hess_step: 1e-2,
            tolerance: 1e-3,
            max_refine_iters: 200,
            refine: true,
            eta: 0.05,
            max_learn_iters: 500,
            max_candidates: 64,
        }
    }
}

impl EquilibriumOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("equilibrium.grad_step", self.grad_step),
            ("equilibrium.hess_step", self.hess_step),
            ("equilibrium.tolerance", self.tolerance),
            ("equilibrium.eta", self.eta),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(name, format!("must be > 0, got {v}")));
            }
        }
        if self.grad_step > 0.1 || self.hess_step > 0.5 {
            return Err(Error::validation("equilibrium", "finite-difference steps are too large for [0, pi]"));
        }
        Ok(())
    }
}

/// Uniform grid `θ_k = kπ/(n−1)` on each axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyGrid {
    n: usize,
}

impl StrategyGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::validation("grid", format!("needs at least 2 points per axis, got {n}")));
        }
        Ok(StrategyGrid { n })
    }

    pub fn points(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        PI / (self.n - 1) as f64
    }

    pub fn value(&self, k: usize) -> f64 {
        if k + 1 == self.n {
            PI
        } else {
            k as f64 * PI / (self.n - 1) as f64
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.value(k)).collect()
    }
}

/// Payoffs on a grid; `u_a[j * n + k]` is the value at `(θ_j, θ_k)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PayoffSurface {
    pub grid: StrategyGrid,
    pub u_a: Vec<f64>,
    pub u_b: Vec<f64>,
    pub aux: BTreeMap<String, Vec<f64>>,
}

impl PayoffSurface {
    pub fn from_fn(grid: StrategyGrid, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let v = grid.values();
        let (u_a, u_b) = v.iter().flat_map(|&a| v.iter().map(move |&b| (a, b))).map(|(a, b)| f(a, b)).unzip();
        PayoffSurface { grid, u_a, u_b, aux: BTreeMap::new() }
    }

    pub fn at(&self, j: usize, k: usize) -> (f64, f64) {
        let i = j * self.grid.n + k;
        (self.u_a[i], self.u_b[i])
    }

    /// `(θ_A, θ_B, value)` rows in grid order.
    pub fn rows<'a>(&'a self, values: &'a [f64]) -> impl Iterator<Item = (f64, f64, f64)> + 'a {
        let n = self.grid.n;
        values.iter().enumerate().map(move |(i, &v)| (self.grid.value(i / n), self.grid.value(i % n), v))
    }
}

/// Evaluates the model at every grid point, in parallel, ordered by index.
pub fn sweep_surface<M: PayoffModel + ?Sized>(model: &M, grid: StrategyGrid) -> Result<PayoffSurface> {
    let n = grid.n;
    let points: Vec<PayoffPoint> = (0..n * n)
        .into_par_iter()
        .map(|i| model.evaluate(StrategyProfile::new(grid.value(i / n), grid.value(i % n))?))
        .collect::<Result<_>>()?;
    let mut aux: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for p in &points {
        for (name, v) in &p.aux {
            aux.entry(name.clone()).or_default().push(*v);
        }
    }
    aux.retain(|_, v| v.len() == n * n);
    Ok(PayoffSurface {
        grid,
        u_a: points.iter().map(|p| p.u_a).collect(),
        u_b: points.iter().map(|p| p.u_b).collect(),
        aux,
    })
}

/// Grid best-response correspondences.
///
/// `player_a[k]` lists the θ_A indices maximizing `u_A(·, θ_k)`;
/// `player_b[j]` lists the θ_B indices maximizing `u_B(θ_j, ·)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BestResponses {
    pub player_a: Vec<Vec<usize>>,
    pub player_b: Vec<Vec<usize>>,
}

pub const TIE_TOL: f64 = 1e-9;

fn argmax_set(values: impl Iterator<Item = f64> + Clone) -> Vec<usize> {
    let best = values.clone().fold(f64::NEG_INFINITY, f64::max);
    let tol = TIE_TOL * best.abs().max(1.0);
    values.enumerate().filter(|(_, v)| *v >= best - tol).map(|(i, _)| i).collect()
}

pub fn best_responses(surface: &PayoffSurface) -> BestResponses {
    let n = surface.grid.n;
    let player_a = (0..n).map(|k| argmax_set((0..n).map(|j| surface.u_a[j * n + k]))).collect();
    let player_b = (0..n).map(|j| argmax_set((0..n).map(|k| surface.u_b[j * n + k]))).collect();
    BestResponses { player_a, player_b }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Refinement {
    /// Grid intersection, refinement not requested.
    Grid,
    /// Polished until the first-order residual bound held.
    Refined,
    /// Refinement did not reach the residual bound.
    Unrefined,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryPoint {
    pub theta_a: f64,
    pub theta_b: f64,
    pub u_a: f64,
    pub u_b: f64,
    pub status: Refinement,
    /// Lies on the edge of `[0, π]²`.
    pub boundary: bool,
    /// Projected first-order residuals `(∂u_A/∂θ_A, ∂u_B/∂θ_B)` at step h.
    pub residual: [f64; 2],
    /// Same residuals re-estimated at step h/2.
    pub residual_half_step: [f64; 2],
    /// Grid cell the point was seeded from.
    pub grid_index: [usize; 2],
    pub iterations: usize,
}

impl StationaryPoint {
    pub fn is_interior(&self) -> bool {
        !self.boundary
    }

    /// Both residual estimates within the bound (the h/2 one within twice it).
    pub fn passes_residual(&self, tolerance: f64) -> bool {
        self.residual.iter().all(|r| r.abs() < tolerance)
            && self.residual_half_step.iter().all(|r| r.abs() < 2.0 * tolerance)
    }
}

const EDGE_TOL: f64 = 1e-9;

pub fn on_boundary(theta: f64) -> bool {
    theta <= EDGE_TOL || theta >= PI - EDGE_TOL
}

/// Derivative of `f` at `x` within `[0, π]`: central where possible,
/// second-order one-sided at the edges.
fn derivative(f: impl Fn(f64) -> Result<f64>, x: f64, h: f64) -> Result<f64> {
    if x - h >= 0.0 && x + h <= PI {
        Ok((f(x + h)? - f(x - h)?) / (2.0 * h))
    } else if x - h < 0.0 {
        Ok((-3.0 * f(x)? + 4.0 * f(x + h)? - f(x + 2.0 * h)?) / (2.0 * h))
    } else {
        Ok((3.0 * f(x)? - 4.0 * f(x - h)? + f(x - 2.0 * h)?) / (2.0 * h))
    }
}

/// Own-strategy gradient `(∂u_A/∂θ_A, ∂u_B/∂θ_B)`.
pub fn gradient<M: PayoffModel + ?Sized>(model: &M, theta_a: f64, theta_b: f64, h: f64) -> Result<[f64; 2]> {
    check_angle("theta_A", theta_a)?;
    check_angle("theta_B", theta_b)?;
    let ga = derivative(|t| Ok(model.payoffs(t, theta_b)?.0), theta_a, h)?;
    let gb = derivative(|t| Ok(model.payoffs(theta_a, t)?.1), theta_b, h)?;
    Ok([ga, gb])
}

/// Gradient with components that push out of the domain at an edge zeroed.
fn projected(theta: [f64; 2], g: [f64; 2]) -> [f64; 2] {
    let mut out = g;
    for i in 0..2 {
        if (theta[i] <= EDGE_TOL && g[i] < 0.0) || (theta[i] >= PI - EDGE_TOL && g[i] > 0.0) {
            out[i] = 0.0;
        }
    }
    out
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximizer of `f` on `[lo, hi]` by golden-section search (unimodal assumption),
/// compared against both endpoints.
fn golden_max(f: impl Fn(f64) -> Result<f64>, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64)> {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    let mid = 0.5 * (a + b);
    let mut best = (mid, f(mid)?);
    for x in [lo, hi] {
        let fx = f(x)?;
        if fx > best.1 {
            best = (x, fx);
        }
    }
    Ok(best)
}

/// Candidates where the two grid best-response sets intersect.
pub fn grid_candidates(surface: &PayoffSurface) -> Vec<[usize; 2]> {
    let br = best_responses(surface);
    let mut out = Vec::new();
    for (k, rows) in br.player_a.iter().enumerate() {
        for &j in rows {
            if br.player_b[j].contains(&k) {
                out.push([j, k]);
            }
        }
    }
    out.sort_unstable();
    out
}

/// Stationary profiles seeded from best-response intersections.
///
/// With `opts.refine`, each candidate is polished by alternating golden-section
/// best responses in a window of one grid spacing until the projected
/// residual drops below `opts.tolerance`. Nearby results are merged.
pub fn find_stationary<M: PayoffModel + ?Sized>(
    model: &M,
    surface: &PayoffSurface,
    opts: &EquilibriumOptions,
) -> Result<Vec<StationaryPoint>> {
    let mut candidates = grid_candidates(surface);
    if candidates.len() > opts.max_candidates.max(1) {
        log::warn!(
            "{} best-response intersections (flat payoff?); refining an evenly strided subset of {}",
            candidates.len(),
            opts.max_candidates.max(1)
        );
        let stride = candidates.len().div_ceil(opts.max_candidates.max(1));
        candidates = candidates.into_iter().step_by(stride).collect();
    }
    let refined: Vec<StationaryPoint> =
        candidates.par_iter().map(|&cell| refine_candidate(model, surface, cell, opts)).collect::<Result<_>>()?;
    let mut out: Vec<StationaryPoint> = Vec::new();
    for p in refined {
        let dup = out.iter().any(|q| (q.theta_a - p.theta_a).abs() < 1e-3 && (q.theta_b - p.theta_b).abs() < 1e-3);
        if !dup {
            out.push(p);
        }
    }
    Ok(out)
}

fn refine_candidate<M: PayoffModel + ?Sized>(
    model: &M,
    surface: &PayoffSurface,
    cell: [usize; 2],
    opts: &EquilibriumOptions,
) -> Result<StationaryPoint> {
    let grid = surface.grid;
    let mut theta = [grid.value(cell[0]), grid.value(cell[1])];
    let h = opts.grad_step;
    let mut residual = projected(theta, gradient(model, theta[0], theta[1], h)?);
    let mut status = Refinement::Grid;
    let mut iterations = 0;
    if opts.refine {
        let window = grid.spacing();
        let converged = |r: &[f64; 2]| r.iter().all(|g| g.abs() < opts.tolerance);
        while !converged(&residual) && iterations < opts.max_refine_iters {
            let (lo, hi) = ((theta[0] - window).max(0.0), (theta[0] + window).min(PI));
            theta[0] = golden_max(|t| Ok(model.payoffs(t, theta[1])?.0), lo, hi, 1e-8)?.0;
            let (lo, hi) = ((theta[1] - window).max(0.0), (theta[1] + window).min(PI));
            theta[1] = golden_max(|t| Ok(model.payoffs(theta[0], t)?.1), lo, hi, 1e-8)?.0;
            residual = projected(theta, gradient(model, theta[0], theta[1], h)?);
            iterations += 1;
        }
        status = if converged(&residual) { Refinement::Refined } else { Refinement::Unrefined };
    }
    let residual_half_step = projected(theta, gradient(model, theta[0], theta[1], h / 2.0)?);
    let (u_a, u_b) = model.payoffs(theta[0], theta[1])?;
    Ok(StationaryPoint {
        theta_a: theta[0],
        theta_b: theta[1],
        u_a,
        u_b,
        status,
        boundary: on_boundary(theta[0]) || on_boundary(theta[1]),
        residual,
        residual_half_step,
        grid_index: cell,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    /// Leading eigenvalue real part indistinguishable from zero.
    Marginal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JacobianReport {
    pub theta_a: f64,
    pub theta_b: f64,
    /// `[[∂²u_A/∂θ_A², ∂²u_A/∂θ_A∂θ_B], [∂²u_B/∂θ_B∂θ_A, ∂²u_B/∂θ_B²]]`
    pub matrix: [[f64; 2]; 2],
    /// Mixed partials of both payoffs, `∂²u_i/∂θ_A∂θ_B`.
    pub mixed_partials: [f64; 2],
    pub eigenvalues: [Complex64; 2],
    pub stability: Stability,
    pub eta: f64,
    /// `ρ(I + ηJ)`.
    pub spectral_radius: f64,
    /// The stencil had to be moved off the point to stay in the domain.
    pub boundary_caveat: bool,
}

impl JacobianReport {
    pub fn is_stable(&self) -> bool {
        self.stability == Stability::Stable
    }
}

pub fn eigenvalues_2x2(m: [[f64; 2]; 2]) -> [Complex64; 2] {
    let half_tr = 0.5 * (m[0][0] + m[1][1]);
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = Complex64::new(half_tr * half_tr - det, 0.0).sqrt();
    [half_tr + disc, half_tr - disc]
}

const MARGINAL_TOL: f64 = 1e-6;

/// Second-derivative matrix of the learning vector field on a 3×3 stencil.
pub fn jacobian_at<M: PayoffModel + ?Sized>(
    model: &M,
    theta_a: f64,
    theta_b: f64,
    opts: &EquilibriumOptions,
) -> Result<JacobianReport> {
    check_angle("theta_A", theta_a)?;
    check_angle("theta_B", theta_b)?;
    let h = opts.hess_step;
    let inside = |t: f64| t.clamp(h, PI - h);
    let (ca, cb) = (inside(theta_a), inside(theta_b));
    let boundary_caveat = ca != theta_a || cb != theta_b;

    let mut ua = [[0.0; 3]; 3];
    let mut ub = [[0.0; 3]; 3];
    for (i, da) in [-h, 0.0, h].into_iter().enumerate() {
        for (k, db) in [-h, 0.0, h].into_iter().enumerate() {
            let (a, b) = model.payoffs(ca + da, cb + db)?;
            ua[i][k] = a;
            ub[i][k] = b;
        }
    }
    let second = |f: &[[f64; 3]; 3], along_a: bool| {
        if along_a {
            (f[2][1] - 2.0 * f[1][1] + f[0][1]) / (h * h)
        } else {
            (f[1][2] - 2.0 * f[1][1] + f[1][0]) / (h * h)
        }
    };
    let mixed = |f: &[[f64; 3]; 3]| (f[2][2] - f[2][0] - f[0][2] + f[0][0]) / (4.0 * h * h);

    let matrix = [[second(&ua, true), mixed(&ua)], [mixed(&ub), second(&ub, false)]];
    let eigenvalues = eigenvalues_2x2(matrix);
    let scale = matrix.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
    let lead = eigenvalues.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
    let stability = if lead.abs() <= MARGINAL_TOL * scale {
        Stability::Marginal
    } else if lead < 0.0 {
        Stability::Stable
    } else {
        Stability::Unstable
    };
    let spectral_radius =
        eigenvalues.iter().map(|l| (Complex64::new(1.0, 0.0) + opts.eta * l).norm()).fold(0.0, f64::max);
    Ok(JacobianReport {
        theta_a,
        theta_b,
        matrix,
        mixed_partials: [mixed(&ua), mixed(&ub)],
        eigenvalues,
        stability,
        eta: opts.eta,
        spectral_radius,
        boundary_caveat,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub iter: usize,
    pub theta_a: f64,
    pub theta_b: f64,
    pub u_a: f64,
    pub u_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearningRun {
    pub start: [f64; 2],
    pub points: Vec<TrajectoryPoint>,
    pub converged: bool,
    /// Iterations at which an update had to be clamped into `[0, π]`.
    pub clamp_events: Vec<usize>,
    pub diagnostic: Option<String>,
}

impl LearningRun {
    pub fn last(&self) -> &TrajectoryPoint {
        self.points.last().expect("trajectory has at least the start point")
    }
}

const DIVERGENCE_WINDOW: usize = 20;

/// Oscillation whose amplitude grows across the last window of steps.
fn diverging(points: &[TrajectoryPoint]) -> bool {
    if points.len() < DIVERGENCE_WINDOW + 1 {
        return false;
    }
    let w = &points[points.len() - DIVERGENCE_WINDOW - 1..];
    [0usize, 1].iter().any(|&c| {
        let coord = |p: &TrajectoryPoint| if c == 0 { p.theta_a } else { p.theta_b };
        let steps: Vec<f64> = w.windows(2).map(|s| coord(&s[1]) - coord(&s[0])).collect();
        let flips = steps.windows(2).filter(|s| s[0] * s[1] < 0.0).count();
        let first = steps[..4].iter().map(|s| s.abs()).sum::<f64>();
        let last = steps[steps.len() - 4..].iter().map(|s| s.abs()).sum::<f64>();
        flips >= steps.len() - 3 && last > 1.5 * first && last > 0.0
    })
}

/// Simultaneous gradient ascent `θ_i ← θ_i + η ∂u_i/∂θ_i`, clamped to `[0, π]`.
pub fn learn<M: PayoffModel + ?Sized>(
    model: &M,
    start: StrategyProfile,
    opts: &EquilibriumOptions,
) -> Result<LearningRun> {
    start.validate()?;
    let mut theta = start.as_array();
    let mut points = Vec::with_capacity(opts.max_learn_iters + 1);
    let mut clamp_events = Vec::new();
    let mut converged = false;
    let mut diagnostic = None;
    for iter in 0..=opts.max_learn_iters {
        let (u_a, u_b) = model.payoffs(theta[0], theta[1])?;
        points.push(TrajectoryPoint { iter, theta_a: theta[0], theta_b: theta[1], u_a, u_b });
        let g = gradient(model, theta[0], theta[1], opts.grad_step)?;
        let pg = projected(theta, g);
        if pg.iter().all(|v| v.abs() < opts.tolerance) {
            converged = true;
            break;
        }
        if diverging(&points) {
            diagnostic =
                Some(format!("oscillation with growing amplitude over the last {DIVERGENCE_WINDOW} iterations"));
            break;
        }
        if iter == opts.max_learn_iters {
            diagnostic = Some(format!("no convergence within {} iterations", opts.max_learn_iters));
            break;
        }
        let mut clamped = false;
        for i in 0..2 {
            let next = theta[i] + opts.eta * g[i];
            let c = next.clamp(0.0, PI);
            clamped |= c != next;
            theta[i] = c;
        }
        if clamped {
            clamp_events.push(iter);
        }
    }
    Ok(LearningRun { start: start.as_array(), points, converged, clamp_events, diagnostic })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldPoint {
    pub theta_a: f64,
    pub theta_b: f64,
    pub grad_a: f64,
    pub grad_b: f64,
}

/// Learning vector field on the grid, in grid order.
pub fn vector_field<M: PayoffModel + ?Sized>(model: &M, grid: StrategyGrid, h: f64) -> Result<Vec<FieldPoint>> {
    let n = grid.points();
    (0..n * n)
        .into_par_iter()
        .map(|i| {
            let (a, b) = (grid.value(i / n), grid.value(i % n));
            let [ga, gb] = gradient(model, a, b, h)?;
            Ok(FieldPoint { theta_a: a, theta_b: b, grad_a: ga, grad_b: gb })
        })
        .collect()
}

/// `count` starts evenly spaced on a circle around `center`, clamped to the domain.
pub fn circle_starts(center: [f64; 2], radius: f64, count: usize) -> Vec<StrategyProfile> {
    (0..count)
        .map(|i| {
            let phi = 2.0 * PI * i as f64 / count as f64;
            StrategyProfile {
                theta_a: (center[0] + radius * phi.cos()).clamp(0.0, PI),
                theta_b: (center[1] + radius * phi.sin()).clamp(0.0, PI),
            }
        })
        .collect()
}

/// Full analysis bundle for one game.
#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumReport {
    pub grid_points: usize,
    pub stationary_points: Vec<StationaryPoint>,
    pub best_responses: BestResponses,
    /// One per stationary point, same order; `None` for boundary points.
    pub jacobians: Vec<Option<JacobianReport>>,
    pub learning_trajectories: Vec<LearningRun>,
}

/// Surface, best responses, stationary points and their Jacobians.
pub fn analyze<M: PayoffModel + ?Sized>(
    model: &M,
    grid: StrategyGrid,
    opts: &EquilibriumOptions,
) -> Result<(PayoffSurface, EquilibriumReport)> {
    let surface = sweep_surface(model, grid)?;
    let best = best_responses(&surface);
    let stationary = find_stationary(model, &surface, opts)?;
    let jacobians = stationary
        .iter()
        .map(|p| if p.boundary { Ok(None) } else { jacobian_at(model, p.theta_a, p.theta_b, opts).map(Some) })
        .collect::<Result<_>>()?;
    Ok((
        surface,
        EquilibriumReport {
            grid_points: grid.points(),
            stationary_points: stationary,
            best_responses: best,
            jacobians,
            learning_trajectories: Vec::new(),
        },
    ))
}
