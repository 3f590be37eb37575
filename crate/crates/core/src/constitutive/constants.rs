//! Tabulated cartilage constants for the superficial and deep zones.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Zone {
    #[serde(rename = "SZ")]
    Superficial,
    #[serde(rename = "DZ")]
    Deep,
}

impl FromStr for Zone {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "SZ" | "SUPERFICIAL" => Ok(Zone::Superficial),
            "DZ" | "DEEP" => Ok(Zone::Deep),
            _ => Err(Error::UnknownZone(s.to_string())),
        }
    }
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Zone::Superficial => "SZ",
            Zone::Deep => "DZ",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Constituent {
    /// Extracellular matrix.
    Matrix,
    /// Collagen fibril network.
    Fibril,
}

impl FromStr for Constituent {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "matrix" | "ecm" => Ok(Constituent::Matrix),
            "fibril" | "collagen" => Ok(Constituent::Fibril),
            _ => Err(Error::UnknownConstituent(s.to_string())),
        }
    }
}

/// One column of the material table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialConstants {
    /// MPa.
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta: f64,
    /// Anisotropic fibril modulus (MPa); fibrils only.
    pub c1b: Option<f64>,
    /// Young's modulus (MPa), informational.
    pub e_mpa: f64,
    /// Poisson's ratio, informational.
    pub nu: f64,
    /// Permeability constant; stored, unused.
    pub k: Option<f64>,
    /// Void ratio (fluid / solid volume); stored.
    pub void_ratio: Option<f64>,
    /// Fibril concentration parameter.
    pub b: f64,
    pub zone: Zone,
    pub constituent: Constituent,
}

impl MaterialConstants {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParams(format!("material constant {what}")));
        if !(self.alpha0 > 0.0) {
            return bad("alpha0 must be > 0");
        }
        if !(self.beta > 0.0) {
            return bad("beta must be > 0");
        }
        if self.c1b.is_some_and(|c| !(c >= 0.0)) {
            return bad("c1b must be >= 0");
        }
        if self.void_ratio.is_some_and(|e| !(e >= 0.0)) {
            return bad("void_ratio must be >= 0");
        }
        if ![self.alpha1, self.alpha2, self.b]
            .iter()
            .all(|x| x.is_finite())
        {
            return bad("alpha1, alpha2 and b must be finite");
        }
        Ok(())
    }
}

pub fn zone_constants(zone: Zone, constituent: Constituent) -> MaterialConstants {
    use Constituent::*;
    use Zone::*;
    let (alpha0, e_mpa) = match (zone, constituent) {
        (Superficial, Fibril) => (3.4, 10.0),
        (Deep, Fibril) => (5.1, 15.0),
        (Superficial, Matrix) => (0.6, 2.5),
        (Deep, Matrix) => (1.0, 3.8),
    };
    match constituent {
        Fibril => MaterialConstants {
            alpha0,
            alpha1: 0.1,
            alpha2: 0.4,
            beta: 1.0,
            c1b: Some(if zone == Superficial { 7.6 } else { 11.4 }),
            e_mpa,
            nu: 0.3,
            k: None,
            void_ratio: None,
            b: 0.0,
            zone,
            constituent,
        },
        Matrix => MaterialConstants {
            alpha0,
            alpha1: 0.8,
            alpha2: 0.1,
            beta: 1.0,
            c1b: None,
            e_mpa,
            nu: 0.1,
            k: Some(2.8),
            void_ratio: Some(4.0),
            b: 0.0,
            zone,
            constituent,
        },
    }
}

/// String front end for [`zone_constants`].
pub fn zone_constants_named(zone: &str, constituent: &str) -> Result<MaterialConstants> {
    Ok(zone_constants(zone.parse()?, constituent.parse()?))
}

/// Share of the cartilage thickness assigned to each tabulated zone.
pub fn zone_thickness_fraction(zone: Zone) -> f64 {
    match zone {
        Zone::Superficial => 0.12,
        Zone::Deep => 0.62,
    }
}

/// Thickness share covered by neither tabulated zone.
pub fn unassigned_thickness_fraction() -> f64 {
    1.0 - zone_thickness_fraction(Zone::Superficial) - zone_thickness_fraction(Zone::Deep)
}

/// Zone for a normalised depth `d ∈ [0, 1]` measured from the articular
/// surface; `None` inside the unassigned band, which is logged as a warning.
pub fn zone_at_depth(d: f64) -> Result<Option<Zone>> {
    if !(0.0..=1.0).contains(&d) {
        return Err(Error::Domain(format!(
            "normalised depth must lie in [0, 1], got {d}"
        )));
    }
    let sz = zone_thickness_fraction(Zone::Superficial);
    let dz = zone_thickness_fraction(Zone::Deep);
    if d <= sz {
        Ok(Some(Zone::Superficial))
    } else if d >= 1.0 - dz {
        Ok(Some(Zone::Deep))
    } else {
        log::warn!(
            "depth {d} falls in the {:.2}h band with no tabulated constants",
            unassigned_thickness_fraction()
        );
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_names() {
        assert_eq!("sz".parse::<Zone>().unwrap(), Zone::Superficial);
        assert!(matches!("MZ".parse::<Zone>(), Err(Error::UnknownZone(_))));
        assert!(matches!(
            "bone".parse::<Constituent>(),
            Err(Error::UnknownConstituent(_))
        ));
        assert_eq!(serde_json::to_string(&Zone::Deep).unwrap(), "\"DZ\"");
    }

    #[test]
    fn all_sets_valid() {
        for z in [Zone::Superficial, Zone::Deep] {
            for c in [Constituent::Matrix, Constituent::Fibril] {
                zone_constants(z, c).validate().unwrap();
            }
        }
    }

    #[test]
    fn depth_lookup() {
        assert_eq!(zone_at_depth(0.05).unwrap(), Some(Zone::Superficial));
        assert_eq!(zone_at_depth(0.9).unwrap(), Some(Zone::Deep));
        assert_eq!(zone_at_depth(0.3).unwrap(), None);
        assert!((unassigned_thickness_fraction() - 0.26).abs() < 1e-12);
        assert!(zone_at_depth(1.5).is_err());
    }
}
