//! One-step and T-step evolution `U = P_I · [S^A(C^A⊗I) ⊗ S^B(C^B⊗I)]`.
//!
//! Operators are applied structurally: the coins act on 2×2 blocks, the shift
//! is a precomputed permutation of single-walker indices, and the
//! interaction is a sparse diagonal phase table. A step costs O(L²).

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::angle;
use crate::error::{Error, Result};
use crate::hilbert::{self, Boundary, CoinState, JointState, LatticeGeometry, SingleState};
use crate::interactions::{InteractionSpec, NoiseDistribution, PhaseTable};

/// Coin angles chosen by the two players, each in `[0, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyProfile {
    #[serde(deserialize_with = "angle::deserialize")]
    pub theta_a: f64,
    #[serde(deserialize_with = "angle::deserialize")]
    pub theta_b: f64,
}

impl StrategyProfile {
    pub fn new(theta_a: f64, theta_b: f64) -> Result<Self> {
        let p = StrategyProfile { theta_a, theta_b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_angle("theta_A", self.theta_a)?;
        check_angle("theta_B", self.theta_b)
    }

    /// Profile with the players' angles exchanged.
    pub fn swapped(&self) -> Self {
        StrategyProfile { theta_a: self.theta_b, theta_b: self.theta_a }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.theta_a, self.theta_b]
    }
}

pub fn check_angle(name: &'static str, theta: f64) -> Result<()> {
    if theta.is_finite() && (0.0..=PI).contains(&theta) {
        Ok(())
    } else {
        Err(Error::Domain { name, value: theta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub geometry: LatticeGeometry,
    pub steps: usize,
    pub coin_a: CoinState,
    pub coin_b: CoinState,
    #[serde(default)]
    pub interaction: InteractionSpec,
}

impl WalkConfig {
    /// Both coins `|R⟩`, no interaction.
    pub fn new(geometry: LatticeGeometry, steps: usize) -> Self {
        WalkConfig {
            geometry,
            steps,
            coin_a: CoinState::right(),
            coin_b: CoinState::right(),
            interaction: InteractionSpec::none(),
        }
    }

    pub fn with_interaction(mut self, interaction: InteractionSpec) -> Self {
        self.interaction = interaction;
        self
    }

    pub fn with_coins(mut self, coin_a: CoinState, coin_b: CoinState) -> Self {
        self.coin_a = coin_a;
        self.coin_b = coin_b;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::validation("steps", "must be at least 1"));
        }
        self.interaction.validate()
    }

    /// Non-fatal problems: currently only boundary reachability.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.steps as i64 >= self.geometry.half_width() {
            out.push(format!(
                "boundary reachable: results boundary-rule dependent (T = {} >= (L-1)/2 = {}, boundary = {})",
                self.steps,
                self.geometry.half_width(),
                self.geometry.boundary()
            ));
        }
        out
    }
}

/// Entries of `R_y(θ) = [[cos θ/2, −sin θ/2], [sin θ/2, cos θ/2]]`.
#[derive(Debug, Clone, Copy)]
struct Rotation {
    c: f64,
    s: f64,
}

impl Rotation {
    fn new(theta: f64) -> Self {
        let (s, c) = (theta / 2.0).sin_cos();
        Rotation { c, s }
    }

    #[inline]
    fn apply(&self, r: Complex64, l: Complex64) -> (Complex64, Complex64) {
        (r * self.c - l * self.s, r * self.s + l * self.c)
    }
}

/// Destination of each single-walker index `offset * 2 + s` under one shift.
fn shift_map(geometry: &LatticeGeometry) -> Vec<usize> {
    let size = geometry.size();
    let mut map = vec![0; 2 * size];
    for o in 0..size {
        let (right, left) = match geometry.boundary() {
            Boundary::Periodic => (((o + 1) % size) * 2, ((o + size - 1) % size) * 2 + 1),
            Boundary::Reflecting => {
                let right = if o + 1 == size { o * 2 + 1 } else { (o + 1) * 2 };
                let left = if o == 0 { 0 } else { (o - 1) * 2 + 1 };
                (right, left)
            }
        };
        map[o * 2] = right;
        map[o * 2 + 1] = left;
    }
    map
}

fn apply_coins_in_place(amps: &mut [Complex64], size: usize, ra: Rotation, rb: Rotation) {
    let row = 2 * size;
    for ia in 0..size {
        for ib in 0..size {
            let k = (ia * 2 * size + ib) * 2;
            let (mut a00, mut a01) = (amps[k], amps[k + 1]);
            let (mut a10, mut a11) = (amps[k + row], amps[k + row + 1]);
            (a00, a10) = ra.apply(a00, a10);
            (a01, a11) = ra.apply(a01, a11);
            (a00, a01) = rb.apply(a00, a01);
            (a10, a11) = rb.apply(a10, a11);
            amps[k] = a00;
            amps[k + 1] = a01;
            amps[k + row] = a10;
            amps[k + row + 1] = a11;
        }
    }
}

fn apply_shift_into(src: &[Complex64], dst: &mut [Complex64], map: &[usize]) {
    let row = map.len();
    for (a, &ta) in map.iter().enumerate() {
        let src_row = &src[a * row..(a + 1) * row];
        let dst_row = &mut dst[ta * row..(ta + 1) * row];
        for (b, &tb) in map.iter().enumerate() {
            dst_row[tb] = src_row[b];
        }
    }
}

/// Draws `η_t` for one step; zero unless the spec is noisy.
pub fn draw_eta<R: Rng + ?Sized>(spec: &InteractionSpec, rng: &mut R) -> f64 {
    if !spec.is_noisy() {
        return 0.0;
    }
    let sigma = spec.sigma();
    match spec.noise_distribution {
        NoiseDistribution::Uniform => rng.random_range(-sigma..=sigma),
        NoiseDistribution::Gaussian => Normal::new(0.0, sigma).expect("sigma validated").sample(rng),
    }
}

/// Applies both coin rotations.
pub fn apply_coin(state: &JointState, profile: StrategyProfile) -> Result<JointState> {
    profile.validate()?;
    let mut amps = state.amplitudes().to_vec();
    apply_coins_in_place(
        &mut amps,
        state.geometry().size(),
        Rotation::new(profile.theta_a),
        Rotation::new(profile.theta_b),
    );
    JointState::from_amplitudes(state.geometry(), amps)
}

/// Conditional shift of both walkers.
pub fn apply_shift(state: &JointState) -> JointState {
    let geometry = state.geometry();
    let map = shift_map(&geometry);
    let mut out = vec![Complex64::new(0.0, 0.0); geometry.joint_dim()];
    apply_shift_into(state.amplitudes(), &mut out, &map);
    JointState::from_amplitudes(geometry, out).expect("dimension preserved")
}

/// Diagonal interaction phase. Draws `η_t` from `rng` only for noisy specs.
pub fn apply_interaction<R: Rng + ?Sized>(
    state: &JointState,
    profile: StrategyProfile,
    spec: &InteractionSpec,
    rng: &mut R,
) -> Result<JointState> {
    profile.validate()?;
    spec.validate()?;
    let mut amps = state.amplitudes().to_vec();
    let table = PhaseTable::build(spec, &state.geometry(), profile);
    table.apply(&mut amps);
    let eta = draw_eta(spec, rng);
    if eta != 0.0 {
        let f = Complex64::from_polar(1.0, eta);
        amps.iter_mut().for_each(|a| *a *= f);
    }
    JointState::from_amplitudes(state.geometry(), amps)
}

/// Coin, then shift, then interaction.
pub fn step<R: Rng + ?Sized>(
    state: &JointState,
    profile: StrategyProfile,
    config: &WalkConfig,
    rng: &mut R,
) -> Result<JointState> {
    if state.geometry() != config.geometry {
        return Err(Error::Shape {
            expected: format!("{:?}", config.geometry),
            actual: format!("{:?}", state.geometry()),
        });
    }
    let coined = apply_coin(state, profile)?;
    let shifted = apply_shift(&coined);
    apply_interaction(&shifted, profile, &config.interaction, rng)
}

/// Reusable evolution engine for one `(config, profile, seed)`.
///
/// Owns its buffers; [`Evolver::advance`] performs one step in place.
pub struct Evolver {
    config: WalkConfig,
    rot_a: Rotation,
    rot_b: Rotation,
    map: Vec<usize>,
    phases: PhaseTable,
    rng: ChaCha8Rng,
    cur: Vec<Complex64>,
    scratch: Vec<Complex64>,
    time: usize,
}

impl Evolver {
    pub fn new(config: &WalkConfig, profile: StrategyProfile, seed: u64) -> Result<Self> {
        config.validate()?;
        profile.validate()?;
        let initial = hilbert::initial_state(config.geometry, config.coin_a, config.coin_b);
        Ok(Evolver {
            config: *config,
            rot_a: Rotation::new(profile.theta_a),
            rot_b: Rotation::new(profile.theta_b),
            map: shift_map(&config.geometry),
            phases: PhaseTable::build(&config.interaction, &config.geometry, profile),
            rng: ChaCha8Rng::seed_from_u64(seed),
            cur: initial.into_amplitudes(),
            scratch: vec![Complex64::new(0.0, 0.0); config.geometry.joint_dim()],
            time: 0,
        })
    }

    pub fn advance(&mut self) {
        apply_coins_in_place(&mut self.cur, self.config.geometry.size(), self.rot_a, self.rot_b);
        apply_shift_into(&self.cur, &mut self.scratch, &self.map);
        std::mem::swap(&mut self.cur, &mut self.scratch);
        self.phases.apply(&mut self.cur);
        let eta = draw_eta(&self.config.interaction, &mut self.rng);
        if eta != 0.0 {
            let f = Complex64::from_polar(1.0, eta);
            self.cur.iter_mut().for_each(|a| *a *= f);
        }
        self.time += 1;
    }

    pub fn time(&self) -> usize {
        self.time
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.cur
    }

    /// Coincidence probability `Σ_x P(x, x)` of the current state.
    pub fn coincidence(&self) -> f64 {
        let size = self.config.geometry.size();
        (0..size)
            .map(|o| {
                (0..2)
                    .flat_map(|sa| (0..2).map(move |sb| (sa, sb)))
                    .map(|(sa, sb)| self.cur[hilbert::joint_index(size, o, sa, o, sb)].norm_sqr())
                    .sum::<f64>()
            })
            .sum()
    }

    pub fn into_state(self) -> JointState {
        JointState::from_amplitudes(self.config.geometry, self.cur).expect("dimension preserved")
    }
}

/// `U^T |Ψ(0)⟩`, deterministic in `seed`.
pub fn evolve(config: &WalkConfig, profile: StrategyProfile, seed: u64) -> Result<JointState> {
    let mut ev = Evolver::new(config, profile, seed)?;
    for _ in 0..config.steps {
        ev.advance();
    }
    Ok(ev.into_state())
}

/// Single walker from site 0 under the same coin and shift conventions.
pub fn evolve_single(geometry: LatticeGeometry, steps: usize, theta: f64, coin: CoinState) -> Result<SingleState> {
    check_angle("theta", theta)?;
    let rot = Rotation::new(theta);
    let map = shift_map(&geometry);
    let mut cur = SingleState::localized(geometry, coin).amplitudes().to_vec();
    let mut next = vec![Complex64::new(0.0, 0.0); cur.len()];
    for _ in 0..steps {
        for pair in cur.chunks_exact_mut(2) {
            (pair[0], pair[1]) = rot.apply(pair[0], pair[1]);
        }
        for (k, &t) in map.iter().enumerate() {
            next[t] = cur[k];
        }
        std::mem::swap(&mut cur, &mut next);
    }
    SingleState::from_amplitudes(geometry, cur)
}
