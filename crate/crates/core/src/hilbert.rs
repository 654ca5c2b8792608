//! Joint position-coin Hilbert space of two distinguishable walkers.
//!
//! Sites are labelled symmetrically, `x ∈ {-(L-1)/2, …, (L-1)/2}`, and stored
//! at offset `x + (L-1)/2`. The joint amplitude vector is a dense row-major
//! array over `(x_A, s_A, x_B, s_B)`:
//!
//! ```text
//! k = ((i_A * 2 + s_A) * L + i_B) * 2 + s_B
//! ```
//!
//! where `i_*` are site offsets and `s = 0` is right chirality, `s = 1` left.
//! [`joint_index`] and [`decode_joint`] are the only encoders; every other
//! module goes through them or through loops that follow the same order.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for "normalized" in validation.
pub const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Sites form a ring; stepping past an edge wraps to the other edge.
    #[default]
    Periodic,
    /// A walker about to leave the lattice stays on the edge site and its
    /// chirality is flipped.
    Reflecting,
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Boundary::Periodic => f.write_str("periodic"),
            Boundary::Reflecting => f.write_str("reflecting"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawGeometry")]
pub struct LatticeGeometry {
    size: usize,
    boundary: Boundary,
}

#[derive(Deserialize)]
struct RawGeometry {
    size: usize,
    #[serde(default)]
    boundary: Boundary,
}

impl TryFrom<RawGeometry> for LatticeGeometry {
    type Error = Error;

    fn try_from(raw: RawGeometry) -> Result<Self> {
        LatticeGeometry::new(raw.size, raw.boundary)
    }
}

impl LatticeGeometry {
    pub fn new(size: usize, boundary: Boundary) -> Result<Self> {
        if size < 3 {
            return Err(Error::validation("lattice size", format!("must be at least 3, got {size}")));
        }
        if size.is_multiple_of(2) {
            return Err(Error::validation("lattice size", format!("lattice size must be odd, got {size}")));
        }
        Ok(LatticeGeometry { size, boundary })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Largest site label, `(L-1)/2`.
    pub fn half_width(&self) -> i64 {
        (self.size as i64 - 1) / 2
    }

    pub fn site(&self, offset: usize) -> i64 {
        debug_assert!(offset < self.size);
        offset as i64 - self.half_width()
    }

    pub fn offset(&self, site: i64) -> Option<usize> {
        let o = site + self.half_width();
        (0..self.size as i64).contains(&o).then_some(o as usize)
    }

    /// Site labels in storage order.
    pub fn sites(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.size).map(|o| self.site(o))
    }

    pub fn single_dim(&self) -> usize {
        2 * self.size
    }

    pub fn joint_dim(&self) -> usize {
        4 * self.size * self.size
    }

    /// Distance between two sites: minimal image on a ring, plain otherwise.
    pub fn distance(&self, a: i64, b: i64) -> i64 {
        let d = (a - b).abs();
        match self.boundary {
            Boundary::Periodic => d.min(self.size as i64 - d),
            Boundary::Reflecting => d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Chirality {
    Right = 0,
    Left = 1,
}

impl Chirality {
    pub const BOTH: [Chirality; 2] = [Chirality::Right, Chirality::Left];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Chirality {
        match i {
            0 => Chirality::Right,
            1 => Chirality::Left,
            _ => panic!("chirality index {i} out of range"),
        }
    }
}

/// Flat index of `(i_A, s_A, i_B, s_B)` where `i_*` are site offsets.
#[inline]
pub fn joint_index(size: usize, ia: usize, sa: usize, ib: usize, sb: usize) -> usize {
    ((ia * 2 + sa) * size + ib) * 2 + sb
}

/// Inverse of [`joint_index`].
#[inline]
pub fn decode_joint(size: usize, k: usize) -> (usize, usize, usize, usize) {
    let sb = k % 2;
    let rest = k / 2;
    let ib = rest % size;
    let rest = rest / size;
    (rest / 2, rest % 2, ib, sb)
}

#[inline]
pub fn single_index(io: usize, s: usize) -> usize {
    io * 2 + s
}

/// Normalized coin (chirality) state `a|R⟩ + b|L⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CoinRepr", into = "CoinRepr")]
pub struct CoinState {
    amps: [Complex64; 2],
}

impl CoinState {
    pub fn new(right: Complex64, left: Complex64) -> Result<Self> {
        let coin = CoinState { amps: [right, left] };
        let n = coin.norm_sqr();
        if (n - 1.0).abs() > NORM_TOL || !n.is_finite() {
            return Err(Error::validation("coin", format!("squared norm is {n}, expected 1")));
        }
        Ok(coin)
    }

    pub fn right() -> Self {
        CoinState { amps: [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)] }
    }

    pub fn left() -> Self {
        CoinState { amps: [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)] }
    }

    /// `(|R⟩ + |L⟩)/√2`
    pub fn plus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        CoinState { amps: [Complex64::new(h, 0.0), Complex64::new(h, 0.0)] }
    }

    /// `(|R⟩ - |L⟩)/√2`
    pub fn minus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        CoinState { amps: [Complex64::new(h, 0.0), Complex64::new(-h, 0.0)] }
    }

    /// `(|R⟩ + i|L⟩)/√2`, the symmetric coin for real coin operators.
    pub fn plus_i() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        CoinState { amps: [Complex64::new(h, 0.0), Complex64::new(0.0, h)] }
    }

    /// `(|R⟩ - i|L⟩)/√2`
    pub fn minus_i() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        CoinState { amps: [Complex64::new(h, 0.0), Complex64::new(0.0, -h)] }
    }

    pub fn preset(name: &str) -> Option<Self> {
        Some(match name {
            "R" | "right" => Self::right(),
            "L" | "left" => Self::left(),
            "plus" | "+" => Self::plus(),
            "minus" | "-" => Self::minus(),
            "plus_i" | "+i" => Self::plus_i(),
            "minus_i" | "-i" => Self::minus_i(),
            _ => return None,
        })
    }

    pub fn amplitude(&self, s: Chirality) -> Complex64 {
        self.amps[s.index()]
    }

    pub fn amplitudes(&self) -> [Complex64; 2] {
        self.amps
    }

    fn norm_sqr(&self) -> f64 {
        self.amps[0].norm_sqr() + self.amps[1].norm_sqr()
    }
}

/// Config representation of a coin: a preset name or `[[re, im], [re, im]]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum CoinRepr {
    Named(String),
    Explicit([[f64; 2]; 2]),
}

impl TryFrom<CoinRepr> for CoinState {
    type Error = Error;

    fn try_from(repr: CoinRepr) -> Result<Self> {
        match repr {
            CoinRepr::Named(name) => CoinState::preset(&name)
                .ok_or_else(|| Error::validation("coin", format!("unknown coin preset {name:?}"))),
            CoinRepr::Explicit([[r0, r1], [l0, l1]]) => CoinState::new(Complex64::new(r0, r1), Complex64::new(l0, l1)),
        }
    }
}

impl From<CoinState> for CoinRepr {
    fn from(c: CoinState) -> Self {
        CoinRepr::Explicit([[c.amps[0].re, c.amps[0].im], [c.amps[1].re, c.amps[1].im]])
    }
}

/// One walker's amplitudes over `(x, s)`, index `offset * 2 + s`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleState {
    pub(crate) amplitudes: Vec<Complex64>,
    geometry: LatticeGeometry,
}

impl SingleState {
    /// `coin` placed at site 0.
    pub fn localized(geometry: LatticeGeometry, coin: CoinState) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); geometry.single_dim()];
        let o = geometry.offset(0).expect("site 0 exists for odd L");
        amplitudes[single_index(o, 0)] = coin.amps[0];
        amplitudes[single_index(o, 1)] = coin.amps[1];
        SingleState { amplitudes, geometry }
    }

    pub fn from_amplitudes(geometry: LatticeGeometry, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != geometry.single_dim() {
            return Err(Error::Shape {
                expected: format!("{} amplitudes", geometry.single_dim()),
                actual: amplitudes.len().to_string(),
            });
        }
        Ok(SingleState { amplitudes, geometry })
    }

    pub fn geometry(&self) -> LatticeGeometry {
        self.geometry
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, site: i64, s: Chirality) -> Complex64 {
        match self.geometry.offset(site) {
            Some(o) => self.amplitudes[single_index(o, s.index())],
            None => Complex64::new(0.0, 0.0),
        }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Position distribution `p(x)` in storage order.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.chunks_exact(2).map(|c| c[0].norm_sqr() + c[1].norm_sqr()).collect()
    }

    /// Expected position `Σ x p(x)`.
    pub fn mean_position(&self) -> f64 {
        self.probabilities().iter().enumerate().map(|(o, p)| self.geometry.site(o) as f64 * p).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub(crate) amplitudes: Vec<Complex64>,
    geometry: LatticeGeometry,
}

impl JointState {
    pub fn from_amplitudes(geometry: LatticeGeometry, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != geometry.joint_dim() {
            return Err(Error::Shape {
                expected: format!("{} amplitudes", geometry.joint_dim()),
                actual: amplitudes.len().to_string(),
            });
        }
        Ok(JointState { amplitudes, geometry })
    }

    /// Tensor product `a ⊗ b` in the documented layout.
    pub fn product(a: &SingleState, b: &SingleState) -> Result<Self> {
        if a.geometry != b.geometry {
            return Err(Error::Shape { expected: format!("{:?}", a.geometry), actual: format!("{:?}", b.geometry) });
        }
        let amplitudes = a.amplitudes.iter().flat_map(|&x| b.amplitudes.iter().map(move |&y| x * y)).collect();
        Ok(JointState { amplitudes, geometry: a.geometry })
    }

    pub fn geometry(&self) -> LatticeGeometry {
        self.geometry
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn amplitude(&self, xa: i64, sa: Chirality, xb: i64, sb: Chirality) -> Complex64 {
        match (self.geometry.offset(xa), self.geometry.offset(xb)) {
            (Some(ia), Some(ib)) => self.amplitudes[joint_index(self.geometry.size, ia, sa.index(), ib, sb.index())],
            _ => Complex64::new(0.0, 0.0),
        }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Both walkers at site 0 with coin state `coin_a ⊗ coin_b`.
pub fn make_initial_state(
    geometry: LatticeGeometry,
    coin_a: [Complex64; 2],
    coin_b: [Complex64; 2],
) -> Result<JointState> {
    let coin_a = CoinState::new(coin_a[0], coin_a[1]).map_err(|e| Error::validation("coin_A", e.to_string()))?;
    let coin_b = CoinState::new(coin_b[0], coin_b[1]).map_err(|e| Error::validation("coin_B", e.to_string()))?;
    Ok(initial_state(geometry, coin_a, coin_b))
}

/// Same as [`make_initial_state`] for already-validated coins.
pub fn initial_state(geometry: LatticeGeometry, coin_a: CoinState, coin_b: CoinState) -> JointState {
    let size = geometry.size;
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); geometry.joint_dim()];
    let o = geometry.offset(0).expect("site 0 exists for odd L");
    for sa in 0..2 {
        for sb in 0..2 {
            amplitudes[joint_index(size, o, sa, o, sb)] = coin_a.amps[sa] * coin_b.amps[sb];
        }
    }
    JointState { amplitudes, geometry }
}

/// Joint position distribution `P(x_A, x_B)`, row-major with `x_A` as row.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    probabilities: Vec<f64>,
    geometry: LatticeGeometry,
}

impl JointDistribution {
    /// Validates non-negativity and unit mass.
    pub fn new(geometry: LatticeGeometry, probabilities: Vec<f64>) -> Result<Self> {
        let n = geometry.size * geometry.size;
        if probabilities.len() != n {
            return Err(Error::Shape { expected: format!("{n} entries"), actual: probabilities.len().to_string() });
        }
        if let Some(p) = probabilities.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::validation("distribution", format!("entry {p} is not a probability")));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::validation("distribution", format!("total mass {total}, expected 1")));
        }
        Ok(JointDistribution { probabilities, geometry })
    }

    /// Point mass at `(xa, xb)`.
    pub fn point(geometry: LatticeGeometry, xa: i64, xb: i64) -> Result<Self> {
        let (ia, ib) = match (geometry.offset(xa), geometry.offset(xb)) {
            (Some(ia), Some(ib)) => (ia, ib),
            _ => return Err(Error::validation("site", format!("({xa}, {xb}) is off the lattice"))),
        };
        let mut probabilities = vec![0.0; geometry.size * geometry.size];
        probabilities[ia * geometry.size + ib] = 1.0;
        Ok(JointDistribution { probabilities, geometry })
    }

    pub fn geometry(&self) -> LatticeGeometry {
        self.geometry
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probabilities
    }

    /// Probability at site labels; zero off the lattice.
    pub fn get(&self, xa: i64, xb: i64) -> f64 {
        match (self.geometry.offset(xa), self.geometry.offset(xb)) {
            (Some(ia), Some(ib)) => self.probabilities[ia * self.geometry.size + ib],
            _ => 0.0,
        }
    }

    /// `(x_A, x_B, p)` in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (i64, i64, f64)> + '_ {
        let size = self.geometry.size;
        self.probabilities
            .iter()
            .enumerate()
            .map(move |(k, &p)| (self.geometry.site(k / size), self.geometry.site(k % size), p))
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x_A", "x_B", "p"])?;
        for (xa, xb, p) in self.iter() {
            w.write_record([xa.to_string(), xb.to_string(), p.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let size = self.geometry.size;
        let rows: Vec<&[f64]> = self.probabilities.chunks(size).collect();
        serde_json::json!({
            "geometry": self.geometry,
            "sites": self.geometry.sites().collect::<Vec<_>>(),
            "layout": "probabilities[i][j] = P(x_A = sites[i], x_B = sites[j])",
            "probabilities": rows,
        })
    }
}

/// Born-rule position distribution, summed over both coins.
pub fn measure_joint(state: &JointState) -> JointDistribution {
    let probabilities = state
        .amplitudes
        .chunks_exact(2)
        .collect::<Vec<_>>()
        // chunk index is (i_A, s_A, i_B); fold s_A by pairing rows L apart
        .chunks_exact(2 * state.geometry.size)
        .flat_map(|block| {
            let (right, left) = block.split_at(state.geometry.size);
            right.iter().zip(left).map(|(r, l)| r[0].norm_sqr() + r[1].norm_sqr() + l[0].norm_sqr() + l[1].norm_sqr())
        })
        .collect();
    JointDistribution { probabilities, geometry: state.geometry }
}

/// Single-walker marginals `(p_A, p_B)` in storage order.
pub fn marginals(dist: &JointDistribution) -> (Vec<f64>, Vec<f64>) {
    let size = dist.geometry.size;
    let mut pa = vec![0.0; size];
    let mut pb = vec![0.0; size];
    for (k, &p) in dist.probabilities.iter().enumerate() {
        pa[k / size] += p;
        pb[k % size] += p;
    }
    (pa, pb)
}
