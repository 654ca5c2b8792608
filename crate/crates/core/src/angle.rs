//! Angles written as decimal radians or as multiples/fractions of pi.
//!
//! Accepted forms: `1.25`, `pi`, `-pi`, `pi/2`, `5pi/6`, `5*pi/6`, `0.5pi`.

use std::f64::consts::PI;

use serde::{Deserialize, Deserializer};

use crate::error::{Error, Result};

pub fn parse_angle(text: &str) -> Result<f64> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Error::Config(format!("cannot parse angle {text:?}"));
    if s.is_empty() {
        return Err(bad());
    }
    let Some(pos) = s.find("pi") else {
        return s.parse::<f64>().map_err(|_| bad()).and_then(finite(text));
    };
    let (coef, rest) = s.split_at(pos);
    let rest = &rest[2..];
    let coef = coef.strip_suffix('*').unwrap_or(coef);
    let coef = match coef {
        "" | "+" => 1.0,
        "-" => -1.0,
        c => c.parse::<f64>().map_err(|_| bad())?,
    };
    let denom = match rest {
        "" => 1.0,
        r => r.strip_prefix('/').ok_or_else(bad)?.parse::<f64>().map_err(|_| bad())?,
    };
    if denom == 0.0 {
        return Err(bad());
    }
    finite(text)(coef * PI / denom)
}

fn finite(text: &str) -> impl Fn(f64) -> Result<f64> + '_ {
    move |v| {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Config(format!("angle {text:?} is not finite")))
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AngleRepr {
    Num(f64),
    Text(String),
}

impl AngleRepr {
    fn resolve<E: serde::de::Error>(self) -> std::result::Result<f64, E> {
        match self {
            AngleRepr::Num(v) => Ok(v),
            AngleRepr::Text(t) => parse_angle(&t).map_err(E::custom),
        }
    }
}

/// `#[serde(deserialize_with = "angle::deserialize")]` for `f64` fields.
pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    AngleRepr::deserialize(d)?.resolve()
}

/// Same as [`deserialize`] for `Option<f64>`.
pub fn deserialize_opt<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
    Option::<AngleRepr>::deserialize(d)?.map(AngleRepr::resolve).transpose()
}

/// Same as [`deserialize`] for `Vec<f64>`.
pub fn deserialize_vec<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    Vec::<AngleRepr>::deserialize(d)?.into_iter().map(AngleRepr::resolve).collect()
}

/// Same as [`deserialize`] for `[f64; 2]`.
pub fn deserialize_pair<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<[f64; 2], D::Error> {
    let [a, b] = <[AngleRepr; 2]>::deserialize(d)?;
    Ok([a.resolve()?, b.resolve()?])
}

/// Same as [`deserialize`] for a list of pairs.
pub fn deserialize_pairs<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<[f64; 2]>, D::Error> {
    Vec::<[AngleRepr; 2]>::deserialize(d)?.into_iter().map(|[a, b]| Ok([a.resolve()?, b.resolve()?])).collect()
}
