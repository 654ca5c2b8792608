//! Payoff observables over the measured joint distribution.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{JointDistribution, LatticeGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameKind {
    /// Zero-sum, `U_A = x_A − x_B`.
    Race,
    /// Common payoff, `U = −|x_A − x_B|`.
    Rendezvous,
    /// Zero-sum, `U_A = (x_A + x_B)/2`.
    TugOfWar,
    /// Arbitrary classical tables `U_A(x_A, x_B)`, `U_B(x_A, x_B)`.
    CustomTable,
}

impl GameKind {
    pub fn is_zero_sum(self) -> bool {
        matches!(self, GameKind::Race | GameKind::TugOfWar)
    }
}

/// A classical payoff table over site labels, row-major in `x_A`.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffTable {
    pub size: usize,
    pub values: Vec<f64>,
}

impl PayoffTable {
    pub fn from_fn(geometry: &LatticeGeometry, f: impl Fn(i64, i64) -> f64) -> Self {
        let size = geometry.size();
        let values = (0..size * size).map(|k| f(geometry.site(k / size), geometry.site(k % size))).collect();
        PayoffTable { size, values }
    }

    /// Reads `x_A,x_B,value` rows. Every site pair must appear exactly once.
    pub fn read_csv(path: &Path, geometry: &LatticeGeometry) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file, geometry)
    }

    pub fn from_reader<R: std::io::Read>(reader: R, geometry: &LatticeGeometry) -> Result<Self> {
        let size = geometry.size();
        let mut values = vec![f64::NAN; size * size];
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["x_A", "x_B", "value"] {
            return Err(Error::Shape {
                expected: "header x_A,x_B,value".into(),
                actual: headers.iter().collect::<Vec<_>>().join(","),
            });
        }
        for record in rdr.records() {
            let record = record?;
            let parse = |i: usize| -> Result<f64> {
                record[i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad number {:?} in payoff table", &record[i])))
            };
            let (xa, xb, v) = (parse(0)?, parse(1)?, parse(2)?);
            let (ia, ib) = match (geometry.offset(xa as i64), geometry.offset(xb as i64)) {
                (Some(ia), Some(ib)) if xa.fract() == 0.0 && xb.fract() == 0.0 => (ia, ib),
                _ => {
                    return Err(Error::Shape {
                        expected: format!("sites within ±{}", geometry.half_width()),
                        actual: format!("({xa}, {xb})"),
                    })
                }
            };
            if !values[ia * size + ib].is_nan() {
                return Err(Error::Config(format!("duplicate payoff entry at ({xa}, {xb})")));
            }
            values[ia * size + ib] = v;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Shape {
                expected: format!("{} entries", size * size),
                actual: "missing entries".into(),
            });
        }
        Ok(PayoffTable { size, values })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    pub kind: GameKind,
    pub table_a: Option<PayoffTable>,
    pub table_b: Option<PayoffTable>,
}

impl GameSpec {
    pub fn race() -> Self {
        GameSpec { kind: GameKind::Race, table_a: None, table_b: None }
    }

    pub fn rendezvous() -> Self {
        GameSpec { kind: GameKind::Rendezvous, table_a: None, table_b: None }
    }

    pub fn tug_of_war() -> Self {
        GameSpec { kind: GameKind::TugOfWar, table_a: None, table_b: None }
    }

    pub fn custom(table_a: PayoffTable, table_b: PayoffTable) -> Result<Self> {
        let game = GameSpec { kind: GameKind::CustomTable, table_a: Some(table_a), table_b: Some(table_b) };
        game.validate()?;
        Ok(game)
    }

    pub fn built_in(kind: GameKind) -> Result<Self> {
        match kind {
            GameKind::CustomTable => Err(Error::validation("game", "custom_table needs payoff tables")),
            kind => Ok(GameSpec { kind, table_a: None, table_b: None }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.kind, &self.table_a, &self.table_b) {
            (GameKind::CustomTable, Some(a), Some(b)) => {
                if a.size != b.size || a.values.len() != a.size * a.size || b.values.len() != b.size * b.size {
                    return Err(Error::Shape {
                        expected: format!("two {0}x{0} tables", a.size),
                        actual: format!("{} and {} entries", a.values.len(), b.values.len()),
                    });
                }
                Ok(())
            }
            (GameKind::CustomTable, _, _) => Err(Error::validation("game", "custom_table needs both payoff tables")),
            (_, None, None) => Ok(()),
            _ => Err(Error::validation("game", "payoff tables are only allowed for custom_table")),
        }
    }
}

/// Expected utilities plus named diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffPoint {
    pub u_a: f64,
    pub u_b: f64,
    pub aux: BTreeMap<String, f64>,
}

pub const MEAN_X_A: &str = "mean_x_A";
pub const MEAN_X_B: &str = "mean_x_B";
pub const MEAN_SEPARATION: &str = "mean_separation";
pub const MEETING_PROBABILITY: &str = "meeting_probability";
pub const CENTER_OF_MASS: &str = "center_of_mass";

/// Diagnostics common to every game.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    mean_a: f64,
    mean_b: f64,
    mean_diff: f64,
    mean_sep: f64,
    meeting: f64,
    com: f64,
}

fn moments(dist: &JointDistribution) -> Moments {
    let mut m = Moments::default();
    for (xa, xb, p) in dist.iter() {
        let (xa, xb) = (xa as f64, xb as f64);
        m.mean_a += p * xa;
        m.mean_b += p * xb;
        m.mean_diff += p * (xa - xb);
        m.mean_sep += p * (xa - xb).abs();
        m.com += p * 0.5 * (xa + xb);
        if xa == xb {
            m.meeting += p;
        }
    }
    m
}

pub fn payoff(dist: &JointDistribution, game: &GameSpec) -> Result<PayoffPoint> {
    let m = moments(dist);
    let (u_a, u_b) = match game.kind {
        GameKind::Race => (m.mean_diff, -m.mean_diff),
        GameKind::Rendezvous => (-m.mean_sep, -m.mean_sep),
        GameKind::TugOfWar => (m.com, -m.com),
        GameKind::CustomTable => {
            game.validate()?;
            let (ta, tb) = (game.table_a.as_ref().unwrap(), game.table_b.as_ref().unwrap());
            let size = dist.geometry().size();
            if ta.size != size {
                return Err(Error::Shape {
                    expected: format!("{size}x{size} payoff table"),
                    actual: format!("{0}x{0}", ta.size),
                });
            }
            let p = dist.as_slice();
            let ua = p.iter().zip(&ta.values).map(|(p, u)| p * u).sum();
            let ub = p.iter().zip(&tb.values).map(|(p, u)| p * u).sum();
            (ua, ub)
        }
    };
    let aux = BTreeMap::from([
        (MEAN_X_A.to_string(), m.mean_a),
        (MEAN_X_B.to_string(), m.mean_b),
        (MEAN_SEPARATION.to_string(), m.mean_sep),
        (MEETING_PROBABILITY.to_string(), m.meeting),
        (CENTER_OF_MASS.to_string(), m.com),
    ]);
    Ok(PayoffPoint { u_a, u_b, aux })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::Boundary;

    fn g() -> LatticeGeometry {
        LatticeGeometry::new(15, Boundary::Periodic).unwrap()
    }

    #[test]
    fn race_point_mass() {
        let d = JointDistribution::point(g(), 3, 1).unwrap();
        let p = payoff(&d, &GameSpec::race()).unwrap();
        assert_eq!((p.u_a, p.u_b), (2.0, -2.0));
        assert_eq!(p.aux[MEAN_X_A], 3.0);
        assert_eq!(p.aux[MEAN_SEPARATION], 2.0);
    }

    #[test]
    fn rendezvous_coincident() {
        for x in -7..=7 {
            let d = JointDistribution::point(g(), x, x).unwrap();
            let p = payoff(&d, &GameSpec::rendezvous()).unwrap();
            assert_eq!(p.u_a, 0.0);
            assert_eq!(p.u_a, p.u_b);
            assert_eq!(p.aux[MEETING_PROBABILITY], 1.0);
        }
    }

    #[test]
    fn tug_of_war_arithmetic() {
        let d = JointDistribution::point(g(), -2, -4).unwrap();
        let p = payoff(&d, &GameSpec::tug_of_war()).unwrap();
        assert_eq!(p.u_a, -3.0);
        assert_eq!(p.u_b, 3.0);
        assert_eq!(p.aux[CENTER_OF_MASS], p.u_a);
    }

    #[test]
    fn custom_table_matches_builtin_race() {
        let geom = g();
        let ta = PayoffTable::from_fn(&geom, |a, b| (a - b) as f64);
        let tb = PayoffTable::from_fn(&geom, |a, b| (b - a) as f64);
        let custom = GameSpec::custom(ta, tb).unwrap();
        let d = JointDistribution::point(geom, -5, 2).unwrap();
        let p = payoff(&d, &custom).unwrap();
        assert_eq!((p.u_a, p.u_b), (-7.0, 7.0));
    }

    #[test]
    fn custom_table_shape_errors() {
        let small = LatticeGeometry::new(5, Boundary::Periodic).unwrap();
        let t = PayoffTable::from_fn(&small, |_, _| 1.0);
        let game = GameSpec::custom(t.clone(), t.clone()).unwrap();
        let d = JointDistribution::point(g(), 0, 0).unwrap();
        assert!(matches!(payoff(&d, &game), Err(Error::Shape { .. })));

        let big = PayoffTable::from_fn(&g(), |_, _| 1.0);
        assert!(GameSpec::custom(t, big).is_err());
        assert!(GameSpec::built_in(GameKind::CustomTable).is_err());
    }

    #[test]
    fn table_csv_parsing() {
        let geom = LatticeGeometry::new(3, Boundary::Periodic).unwrap();
        let mut text = String::from("x_A,x_B,value\n");
        for a in -1..=1 {
            for b in -1..=1 {
                text.push_str(&format!("{a},{b},{}\n", a * 10 + b));
            }
        }
        let t = PayoffTable::from_reader(text.as_bytes(), &geom).unwrap();
        assert_eq!(t.values[0], -11.0);
        assert_eq!(t.values[8], 11.0);

        let missing = "x_A,x_B,value\n0,0,1\n";
        assert!(PayoffTable::from_reader(missing.as_bytes(), &geom).is_err());
        let off = format!("{text}5,0,1\n");
        assert!(PayoffTable::from_reader(off.as_bytes(), &geom).is_err());
        let dup = format!("{text}0,0,1\n");
        assert!(PayoffTable::from_reader(dup.as_bytes(), &geom).is_err());
        assert!(PayoffTable::from_reader("a,b,c\n".as_bytes(), &geom).is_err());
    }
}
