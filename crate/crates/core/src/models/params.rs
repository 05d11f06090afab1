use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Body, motor and sensor parameters.
///
/// The `*PerMass` / `*PerInertia` variants are the absorbed parameterization
/// in which `m` and `I` no longer appear on their own.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Param {
    CPar,
    CPerp,
    CPhi,
    Mass,
    Inertia,
    Km1,
    Km2,
    Km3,
    Km4,
    Ks0,
    Ks1,
    Ks2,
    Ks3,
    Ks4,
    Ks5,
    Ks6,
    Ks7,
    CParPerMass,
    CPerpPerMass,
    CPhiPerInertia,
    Km1PerMass,
    Km2PerInertia,
    Km3PerMass,
    Km4PerInertia,
}

const NAMES: [(Param, &str); 24] = [
    (Param::CPar, "C_par"),
    (Param::CPerp, "C_perp"),
    (Param::CPhi, "C_phi"),
    (Param::Mass, "m"),
    (Param::Inertia, "I"),
    (Param::Km1, "k_m1"),
    (Param::Km2, "k_m2"),
    (Param::Km3, "k_m3"),
    (Param::Km4, "k_m4"),
    (Param::Ks0, "k_s0"),
    (Param::Ks1, "k_s1"),
    (Param::Ks2, "k_s2"),
    (Param::Ks3, "k_s3"),
    (Param::Ks4, "k_s4"),
    (Param::Ks5, "k_s5"),
    (Param::Ks6, "k_s6"),
    (Param::Ks7, "k_s7"),
    (Param::CParPerMass, "C_par_per_m"),
    (Param::CPerpPerMass, "C_perp_per_m"),
    (Param::CPhiPerInertia, "C_phi_per_I"),
    (Param::Km1PerMass, "k_m1_per_m"),
    (Param::Km2PerInertia, "k_m2_per_I"),
    (Param::Km3PerMass, "k_m3_per_m"),
    (Param::Km4PerInertia, "k_m4_per_I"),
];

impl Param {
    pub fn all() -> impl Iterator<Item = Param> {
        NAMES.iter().map(|(p, _)| *p)
    }

    pub fn name(self) -> &'static str {
        NAMES.iter().find(|(p, _)| *p == self).map(|(_, n)| *n).unwrap()
    }

    /// Value used when a known parameter is not given explicitly: one for
    /// everything except the wing-damage coupling `k_m2`, which is zero.
    pub fn default_value(self) -> f64 {
        match self {
            Param::Km2 | Param::Km2PerInertia => 0.0,
            _ => 1.0,
        }
    }

    /// Sensor gains and offsets.
    pub fn is_sensor(self) -> bool {
        matches!(
            self,
            Param::Ks0
                | Param::Ks1
                | Param::Ks2
                | Param::Ks3
                | Param::Ks4
                | Param::Ks5
                | Param::Ks6
                | Param::Ks7
        )
    }

    /// Body and motor parameters (everything that is not a sensor parameter).
    pub fn is_body(self) -> bool {
        !self.is_sensor()
    }

    pub fn is_absorbed(self) -> bool {
        matches!(
            self,
            Param::CParPerMass
                | Param::CPerpPerMass
                | Param::CPhiPerInertia
                | Param::Km1PerMass
                | Param::Km2PerInertia
                | Param::Km3PerMass
                | Param::Km4PerInertia
        )
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Param {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NAMES
            .iter()
            .find(|(_, n)| *n == s)
            .map(|(p, _)| *p)
            .ok_or_else(|| format!("unknown parameter `{s}`"))
    }
}

impl TryFrom<String> for Param {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Param> for String {
    fn from(p: Param) -> String {
        p.name().to_string()
    }
}
