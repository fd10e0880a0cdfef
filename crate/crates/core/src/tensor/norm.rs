use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::matrix::{scaled_l2, Matrix};

/// Norm order `p` of the perturbation ball. Configs spell it `1`, `2` or `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NormOrder {
    One,
    Two,
    Inf,
}

impl NormOrder {
    pub const ALL: [NormOrder; 3] = [NormOrder::One, NormOrder::Two, NormOrder::Inf];

    /// Hölder conjugate `q` with `1/p + 1/q = 1`.
    pub fn dual(self) -> NormOrder {
        match self {
            NormOrder::One => NormOrder::Inf,
            NormOrder::Two => NormOrder::Two,
            NormOrder::Inf => NormOrder::One,
        }
    }
}

impl fmt::Display for NormOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormOrder::One => "1",
            NormOrder::Two => "2",
            NormOrder::Inf => "inf",
        })
    }
}

impl FromStr for NormOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" => Ok(NormOrder::One),
            "2" => Ok(NormOrder::Two),
            "inf" | "infinity" | "∞" => Ok(NormOrder::Inf),
            other => Err(format!("unsupported norm order `{other}` (expected 1, 2 or inf)")),
        }
    }
}

impl Serialize for NormOrder {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            NormOrder::One => s.serialize_u8(1),
            NormOrder::Two => s.serialize_u8(2),
            NormOrder::Inf => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for NormOrder {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(i) => i.to_string().parse().map_err(serde::de::Error::custom),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// `l_p` norm of a slice.
pub fn vec_norm(v: &[f64], p: NormOrder) -> f64 {
    match p {
        NormOrder::One => v.iter().map(|x| x.abs()).sum(),
        NormOrder::Two => scaled_l2(v),
        NormOrder::Inf => v.iter().fold(0.0_f64, |m, x| m.max(x.abs())),
    }
}

/// `l_p` norm of the flattened entries of `m`.
pub fn flatten_norm(m: &Matrix, p: NormOrder) -> f64 {
    vec_norm(m.data(), p)
}
