//! Reference implementations shared by the integration tests. They are
//! written from the operator definitions, independently of the structured
//! evolution in the library.
#![allow(dead_code)]

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use qwgame::hilbert::{Boundary, CoinState, LatticeGeometry};
use qwgame::interactions::{InteractionKind, InteractionSpec};

pub type C = Complex64;

fn rotation(theta: f64) -> DMatrix<C> {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    DMatrix::from_row_slice(2, 2, &[C::from(c), C::from(-s), C::from(s), C::from(c)])
}

/// Single-walker step `S (I ⊗ C)` as a dense matrix over `offset * 2 + s`.
pub fn single_step(geometry: &LatticeGeometry, theta: f64) -> DMatrix<C> {
    let l = geometry.size();
    let coin = DMatrix::<C>::identity(l, l).kronecker(&rotation(theta));
    let mut shift = DMatrix::<C>::zeros(2 * l, 2 * l);
    for x in 0..l {
        let (r_to, l_to) = match geometry.boundary() {
            Boundary::Periodic => (((x + 1) % l) * 2, ((x + l - 1) % l) * 2 + 1),
            Boundary::Reflecting => {
                (if x + 1 == l { x * 2 + 1 } else { (x + 1) * 2 }, if x == 0 { 0 } else { (x - 1) * 2 + 1 })
            }
        };
        shift[(r_to, x * 2)] = C::from(1.0);
        shift[(l_to, x * 2 + 1)] = C::from(1.0);
    }
    shift * coin
}

/// Interaction phase written out from its definition.
#[allow(clippy::too_many_arguments)]
pub fn phase(
    spec: &InteractionSpec,
    geometry: &LatticeGeometry,
    xa: i64,
    xb: i64,
    sa: usize,
    sb: usize,
    ta: f64,
    tb: f64,
) -> f64 {
    let phi = spec.strength;
    let align = (ta - tb).cos();
    let meet = if xa == xb { 1.0 } else { 0.0 };
    match spec.kind {
        InteractionKind::None => 0.0,
        InteractionKind::CollisionPhase => phi * align * meet,
        InteractionKind::AttractiveCollision => -phi * meet,
        InteractionKind::LongRange => {
            let raw = (xa - xb).abs();
            let d = match geometry.boundary() {
                Boundary::Periodic => raw.min(geometry.size() as i64 - raw),
                Boundary::Reflecting => raw,
            } as f64;
            phi * align / (1.0 + d.powf(spec.range_exponent.unwrap()))
        }
        InteractionKind::CoinDependent => phi * meet * if sa == sb { 1.0 } else { 0.0 },
        // the noise term is a global phase and leaves probabilities unchanged
        InteractionKind::NoisyCollision => phi * align * meet,
    }
}

/// Full two-walker step `P · (U_A ⊗ U_B)`.
pub fn joint_step(geometry: &LatticeGeometry, spec: &InteractionSpec, ta: f64, tb: f64) -> DMatrix<C> {
    let u = single_step(geometry, ta).kronecker(&single_step(geometry, tb));
    let l = geometry.size();
    let dim = 4 * l * l;
    let mut p = DMatrix::<C>::zeros(dim, dim);
    for k in 0..dim {
        let (a, b) = (k / (2 * l), k % (2 * l));
        let (xa, sa, xb, sb) = (geometry.site(a / 2), a % 2, geometry.site(b / 2), b % 2);
        p[(k, k)] = C::from_polar(1.0, phase(spec, geometry, xa, xb, sa, sb, ta, tb));
    }
    p * u
}

pub fn initial_single(geometry: &LatticeGeometry, coin: CoinState) -> Vec<C> {
    let mut v = vec![C::from(0.0); 2 * geometry.size()];
    let o = geometry.offset(0).unwrap();
    v[o * 2] = coin.amplitudes()[0];
    v[o * 2 + 1] = coin.amplitudes()[1];
    v
}

/// Dense evolution of the joint state for `steps` steps.
pub fn dense_evolve(
    geometry: &LatticeGeometry,
    spec: &InteractionSpec,
    coins: (CoinState, CoinState),
    ta: f64,
    tb: f64,
    steps: usize,
) -> Vec<C> {
    let a = initial_single(geometry, coins.0);
    let b = initial_single(geometry, coins.1);
    let mut psi: Vec<C> = a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect();
    let u = joint_step(geometry, spec, ta, tb);
    for _ in 0..steps {
        psi = (&u * nalgebra::DVector::from_vec(psi)).data.into();
    }
    psi
}

/// Unbounded-lattice recurrence
/// `ψ_R(x,t+1) = cos(θ/2)ψ_R(x−1,t) − sin(θ/2)ψ_L(x−1,t)`,
/// `ψ_L(x,t+1) = sin(θ/2)ψ_R(x+1,t) + cos(θ/2)ψ_L(x+1,t)`.
pub fn recurrence(theta: f64, coin: CoinState, steps: usize) -> HashMap<i64, [C; 2]> {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let mut psi: HashMap<i64, [C; 2]> = HashMap::from([(0, coin.amplitudes())]);
    for _ in 0..steps {
        let get = |x: i64| psi.get(&x).copied().unwrap_or([C::from(0.0); 2]);
        let lo = psi.keys().min().unwrap() - 1;
        let hi = psi.keys().max().unwrap() + 1;
        psi = (lo..=hi)
            .map(|x| {
                let (l, r) = (get(x - 1), get(x + 1));
                (x, [c * l[0] - s * l[1], s * r[0] + c * r[1]])
            })
            .collect();
    }
    psi
}

pub fn max_abs_diff(a: &[C], b: &[C]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
