//! Interaction phase functionals `I(x_A, x_B, s_A, s_B; θ_A, θ_B)`.
//!
//! The interaction enters the evolution only as the diagonal unitary
//! `exp(i I)`, so phases are not reduced modulo 2π.

use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::angle;
use crate::dynamics::StrategyProfile;
use crate::error::{Error, Result};
use crate::hilbert::{Chirality, LatticeGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionKind {
    /// Identically zero phase.
    #[default]
    None,
    /// `φ cos(θ_A − θ_B) [x_A = x_B]`
    CollisionPhase,
    /// `−φ [x_A = x_B]`
    AttractiveCollision,
    /// `φ cos(θ_A − θ_B) / (1 + d(x_A, x_B)^α)`
    LongRange,
    /// `φ [x_A = x_B] [s_A = s_B]`
    CoinDependent,
    /// `φ cos(θ_A − θ_B) [x_A = x_B] + η_t`
    NoisyCollision,
}

impl InteractionKind {
    pub const ALL: [InteractionKind; 6] = [
        InteractionKind::None,
        InteractionKind::CollisionPhase,
        InteractionKind::AttractiveCollision,
        InteractionKind::LongRange,
        InteractionKind::CoinDependent,
        InteractionKind::NoisyCollision,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InteractionKind::None => "none",
            InteractionKind::CollisionPhase => "collision_phase",
            InteractionKind::AttractiveCollision => "attractive_collision",
            InteractionKind::LongRange => "long_range",
            InteractionKind::CoinDependent => "coin_dependent",
            InteractionKind::NoisyCollision => "noisy_collision",
        }
    }
}

impl FromStr for InteractionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InteractionKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unsupported interaction kind {s:?}")))
    }
}

/// Distribution of the per-step phase noise `η_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseDistribution {
    /// Uniform on `[−σ, σ]`.
    #[default]
    Uniform,
    /// Normal with standard deviation `σ`.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionSpec {
    pub kind: InteractionKind,
    /// Interaction strength φ in radians; doubles as the expansion parameter λ.
    #[serde(deserialize_with = "angle::deserialize", default)]
    pub strength: f64,
    /// Range exponent α, only read by `long_range`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range_exponent: Option<f64>,
    /// Noise scale σ in radians, only read by `noisy_collision`.
    #[serde(default, deserialize_with = "angle::deserialize_opt", skip_serializing_if = "Option::is_none")]
    pub noise_sigma: Option<f64>,
    #[serde(default)]
    pub noise_distribution: NoiseDistribution,
}

impl Default for InteractionSpec {
    fn default() -> Self {
        InteractionSpec::none()
    }
}

impl InteractionSpec {
    pub fn none() -> Self {
        InteractionSpec {
            kind: InteractionKind::None,
            strength: 0.0,
            range_exponent: None,
            noise_sigma: None,
            noise_distribution: NoiseDistribution::Uniform,
        }
    }

    pub fn with_kind(kind: InteractionKind, strength: f64) -> Self {
        InteractionSpec { kind, strength, ..InteractionSpec::none() }
    }

    /// Strategy-dependent collision phase, the race interaction at `strength = π`.
    pub fn collision(strength: f64) -> Self {
        InteractionSpec::with_kind(InteractionKind::CollisionPhase, strength)
    }

    pub fn long_range(strength: f64, alpha: f64) -> Self {
        InteractionSpec {
            range_exponent: Some(alpha),
            ..InteractionSpec::with_kind(InteractionKind::LongRange, strength)
        }
    }

    pub fn noisy(strength: f64, sigma: f64) -> Self {
        InteractionSpec {
            noise_sigma: Some(sigma),
            ..InteractionSpec::with_kind(InteractionKind::NoisyCollision, strength)
        }
    }

    /// Copy with a different strength.
    pub fn scaled(&self, strength: f64) -> Self {
        InteractionSpec { strength, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.strength.is_finite() {
            return Err(Error::validation("interaction.strength", "must be finite"));
        }
        match self.kind {
            InteractionKind::LongRange => match self.range_exponent {
                Some(a) if a > 0.0 && a.is_finite() => {}
                Some(a) => {
                    return Err(Error::validation("interaction.range_exponent", format!("must be > 0, got {a}")))
                }
                None => return Err(Error::validation("interaction.range_exponent", "required for long_range")),
            },
            InteractionKind::NoisyCollision => {
                if let Some(s) = self.noise_sigma {
                    if !(s >= 0.0 && s.is_finite()) {
                        return Err(Error::validation("interaction.noise_sigma", format!("must be >= 0, got {s}")));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// True when the phase is zero on every basis state for every profile.
    pub fn is_trivial(&self) -> bool {
        self.kind == InteractionKind::None || (self.strength == 0.0 && !self.is_noisy())
    }

    /// Noisy kind with σ > 0.
    pub fn is_noisy(&self) -> bool {
        self.kind == InteractionKind::NoisyCollision && self.noise_sigma.unwrap_or(0.0) > 0.0
    }

    pub fn sigma(&self) -> f64 {
        self.noise_sigma.unwrap_or(0.0)
    }

    /// Phase of the basis state `|x_A, s_A⟩|x_B, s_B⟩`. `eta` is the step's
    /// noise draw and is ignored by every kind except `noisy_collision`.
    #[allow(clippy::too_many_arguments)]
    pub fn phase(
        &self,
        geometry: &LatticeGeometry,
        xa: i64,
        xb: i64,
        sa: Chirality,
        sb: Chirality,
        profile: StrategyProfile,
        eta: f64,
    ) -> f64 {
        let phi = self.strength;
        let collide = xa == xb;
        let align = (profile.theta_a - profile.theta_b).cos();
        match self.kind {
            InteractionKind::None => 0.0,
            InteractionKind::CollisionPhase => {
                if collide {
                    phi * align
                } else {
                    0.0
                }
            }
            InteractionKind::AttractiveCollision => {
                if collide {
                    -phi
                } else {
                    0.0
                }
            }
            InteractionKind::LongRange => {
                let alpha = self.range_exponent.unwrap_or(1.0);
                let d = geometry.distance(xa, xb) as f64;
                phi * align / (1.0 + d.powf(alpha))
            }
            InteractionKind::CoinDependent => {
                if collide && sa == sb {
                    phi
                } else {
                    0.0
                }
            }
            InteractionKind::NoisyCollision => {
                let base = if collide { phi * align } else { 0.0 };
                base + eta
            }
        }
    }
}

/// `exp(i I)` for the noise-free part of a spec at fixed strategies,
/// stored sparsely: only basis states with a non-zero phase are listed.
#[derive(Debug, Clone)]
pub struct PhaseTable {
    entries: Vec<(usize, Complex64)>,
}

impl PhaseTable {
    pub fn build(spec: &InteractionSpec, geometry: &LatticeGeometry, profile: StrategyProfile) -> PhaseTable {
        let mut entries = Vec::new();
        if spec.kind != InteractionKind::None {
            let size = geometry.size();
            for ia in 0..size {
                for sa in 0..2 {
                    for ib in 0..size {
                        for sb in 0..2 {
                            let p = spec.phase(
                                geometry,
                                geometry.site(ia),
                                geometry.site(ib),
                                Chirality::from_index(sa),
                                Chirality::from_index(sb),
                                profile,
                                0.0,
                            );
                            if p != 0.0 {
                                let k = crate::hilbert::joint_index(size, ia, sa, ib, sb);
                                entries.push((k, Complex64::from_polar(1.0, p)));
                            }
                        }
                    }
                }
            }
        }
        PhaseTable { entries }
    }

    pub fn is_identity(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn apply(&self, amplitudes: &mut [Complex64]) {
        for &(k, f) in &self.entries {
            amplitudes[k] *= f;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::Boundary;
    use std::f64::consts::PI;

    fn g() -> LatticeGeometry {
        LatticeGeometry::new(15, Boundary::Periodic).unwrap()
    }

    fn prof(a: f64, b: f64) -> StrategyProfile {
        StrategyProfile::new(a, b).unwrap()
    }

    const R: Chirality = Chirality::Right;
    const L: Chirality = Chirality::Left;

    #[test]
    fn collision_off_diagonal_is_zero() {
        let s = InteractionSpec::collision(PI);
        assert_eq!(s.phase(&g(), 1, 2, R, R, prof(0.3, 0.4), 0.0), 0.0);
    }

    #[test]
    fn race_equilibrium_phase() {
        let s = InteractionSpec::collision(PI);
        let p = s.phase(&g(), 0, 0, R, L, prof(PI / 2.0, 5.0 * PI / 6.0), 0.0);
        assert!((p - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn long_range_arithmetic() {
        let s = InteractionSpec::long_range(1.0, 2.0);
        let p = s.phase(&g(), 0, 3, R, R, prof(1.0, 1.0), 0.0);
        assert!((p - 0.1).abs() < 1e-15);
    }

    #[test]
    fn long_range_uses_minimal_image_on_ring() {
        let s = InteractionSpec::long_range(1.0, 1.0);
        let ring = s.phase(&g(), -7, 7, R, R, prof(0.0, 0.0), 0.0);
        assert!((ring - 0.5).abs() < 1e-15);
        let wall = LatticeGeometry::new(15, Boundary::Reflecting).unwrap();
        let flat = s.phase(&wall, -7, 7, R, R, prof(0.0, 0.0), 0.0);
        assert!((flat - 1.0 / 15.0).abs() < 1e-15);
    }

    #[test]
    fn attractive_and_coin_dependent() {
        let a = InteractionSpec::with_kind(InteractionKind::AttractiveCollision, 0.7);
        assert_eq!(a.phase(&g(), 2, 2, R, L, prof(0.0, 3.0), 0.0), -0.7);
        assert_eq!(a.phase(&g(), 2, 1, R, L, prof(0.0, 3.0), 0.0), 0.0);
        let c = InteractionSpec::with_kind(InteractionKind::CoinDependent, 0.7);
        assert_eq!(c.phase(&g(), 2, 2, L, L, prof(0.0, 3.0), 0.0), 0.7);
        assert_eq!(c.phase(&g(), 2, 2, R, L, prof(0.0, 3.0), 0.0), 0.0);
        assert_eq!(c.phase(&g(), 1, 2, L, L, prof(0.0, 3.0), 0.0), 0.0);
    }

    #[test]
    fn none_ignores_everything() {
        let s = InteractionSpec {
            kind: InteractionKind::None,
            strength: 5.0,
            range_exponent: Some(2.0),
            noise_sigma: Some(1.0),
            ..InteractionSpec::none()
        };
        assert_eq!(s.phase(&g(), 0, 0, R, R, prof(0.0, 0.0), 0.4), 0.0);
        assert!(s.is_trivial());
    }

    #[test]
    fn noiseless_noisy_equals_collision() {
        let noisy = InteractionSpec::noisy(2.3, 0.0);
        let coll = InteractionSpec::collision(2.3);
        for xa in -7..=7 {
            for xb in -7..=7 {
                let p = prof(0.4, 2.9);
                assert_eq!(
                    noisy.phase(&g(), xa, xb, R, L, p, 0.0).to_bits(),
                    coll.phase(&g(), xa, xb, R, L, p, 0.0).to_bits()
                );
            }
        }
    }

    #[test]
    fn steep_long_range_localizes() {
        let s = InteractionSpec::long_range(1.0, 64.0);
        let wall = LatticeGeometry::new(31, Boundary::Reflecting).unwrap();
        for d in 2..=30 {
            assert!(s.phase(&wall, -15, -15 + d, R, R, prof(1.0, 1.0), 0.0).abs() < 1e-15);
        }
    }

    #[test]
    fn validation() {
        assert!(InteractionSpec { range_exponent: None, ..InteractionSpec::long_range(1.0, 1.0) }.validate().is_err());
        assert!(InteractionSpec::long_range(1.0, 0.0).validate().is_err());
        assert!(InteractionSpec::noisy(1.0, -0.1).validate().is_err());
        assert!(InteractionSpec::collision(f64::NAN).validate().is_err());
        assert!(InteractionSpec::collision(PI).validate().is_ok());
    }

    #[test]
    fn kind_names_round_trip() {
        for k in InteractionKind::ALL {
            assert_eq!(k.name().parse::<InteractionKind>().unwrap(), k);
        }
        assert!("gravity".parse::<InteractionKind>().is_err());
    }

    #[test]
    fn config_field_names() {
        let s: InteractionSpec =
            toml::from_str("kind = \"long_range\"\nstrength = \"pi/2\"\nrange_exponent = 2.0\n").unwrap();
        assert_eq!(s.kind, InteractionKind::LongRange);
        assert_eq!(s.strength, PI / 2.0);
        let json = serde_json::to_value(s).unwrap();
        assert_eq!(json["range_exponent"], 2.0);
        let back: InteractionSpec = serde_json::from_value(json).unwrap();
        assert_eq!(back, s);
        let noisy = InteractionSpec::noisy(1.0, 0.2);
        let json = serde_json::to_string(&noisy).unwrap();
        assert!(json.contains("\"noise_sigma\":0.2"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn functionals_are_swap_symmetric(
                ta in 0.0..PI, tb in 0.0..PI,
                xa in -7i64..=7, xb in -7i64..=7,
                sa in 0usize..2, sb in 0usize..2,
                phi in -4.0..4.0f64, alpha in 0.1..8.0f64,
            ) {
                let sa = Chirality::from_index(sa);
                let sb = Chirality::from_index(sb);
                for spec in [
                    InteractionSpec::collision(phi),
                    InteractionSpec::with_kind(InteractionKind::AttractiveCollision, phi),
                    InteractionSpec::long_range(phi, alpha),
                    InteractionSpec::with_kind(InteractionKind::CoinDependent, phi),
                    InteractionSpec::noisy(phi, 0.3),
                ] {
                    let ab = spec.phase(&g(), xa, xb, sa, sb, prof(ta, tb), 0.1);
                    let ba = spec.phase(&g(), xa, xb, sa, sb, prof(tb, ta), 0.1);
                    prop_assert!(ab.is_finite());
                    prop_assert_eq!(ab, ba);
                }
            }
        }
    }
}
