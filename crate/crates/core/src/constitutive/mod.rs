//! Biphasic fibril-reinforced cartilage stress at a material point.
//!
//! The total Cauchy stress is
//! `σ = −pI + φ₀σ₀ + φ₁(σ₁ᵢ + σ₁ₐ)`: fluid pressure, an isotropic
//! Holmes–Mow matrix, an isotropic Holmes–Mow fibril part and a distributed
//! anisotropic fibril part integrated over reference directions.

mod constants;
mod fibril;
mod holmes_mow;
pub mod quadrature;
pub mod special;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use constants::{
    unassigned_thickness_fraction, zone_at_depth, zone_constants, zone_constants_named,
    zone_thickness_fraction, Constituent, MaterialConstants, Zone,
};
pub use fibril::{
    fibril_aniso_energy, fibril_aniso_stress, fibril_density, fibril_density_raw,
    FibrilDistribution,
};
pub use holmes_mow::{holmes_mow_energy, holmes_mow_second_piola, holmes_mow_stress, invariants};
pub use quadrature::SphereQuadrature;

/// Deformation gradient and interstitial fluid pressure (MPa).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeformationState {
    pub f: Matrix3<f64>,
    pub p: f64,
}

impl DeformationState {
    pub fn new(f: Matrix3<f64>, p: f64) -> Result<Self> {
        let s = DeformationState { f, p };
        s.validate()?;
        Ok(s)
    }

    pub fn identity() -> Self {
        DeformationState {
            f: Matrix3::identity(),
            p: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.f.iter().all(|x| x.is_finite()) || !self.p.is_finite() {
            return Err(Error::InvalidDeformation("non-finite entries".into()));
        }
        let j = self.j();
        if !(j > 0.0) {
            return Err(Error::InvalidDeformation(format!(
                "det F = {j} must be positive"
            )));
        }
        Ok(())
    }

    pub fn j(&self) -> f64 {
        self.f.determinant()
    }

    /// Right Cauchy–Green tensor `FᵀF`.
    pub fn c(&self) -> Matrix3<f64> {
        self.f.transpose() * self.f
    }

    /// Distortional part `J^{-2/3} C`.
    pub fn c_bar(&self) -> Matrix3<f64> {
        self.c() * self.j().powf(-2.0 / 3.0)
    }
}

pub(crate) fn check_spd(c: &Matrix3<f64>) -> Result<()> {
    let asym = (c - c.transpose()).abs().max();
    if !c.iter().all(|x| x.is_finite()) || asym > 1e-12 * c.abs().max().max(1.0) {
        return Err(Error::InvalidDeformation(
            "C must be finite and symmetric".into(),
        ));
    }
    if c.cholesky().is_none() {
        return Err(Error::InvalidDeformation(
            "C must be positive definite".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeFractions {
    pub phi0: f64,
    pub phi1: f64,
}

impl VolumeFractions {
    pub fn new(phi0: f64, phi1: f64) -> Result<Self> {
        let v = VolumeFractions { phi0, phi1 };
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.phi0) || !unit(self.phi1) || self.phi0 + self.phi1 > 1.0 {
            return Err(Error::InvalidParams(format!(
                "volume fractions need 0 ≤ φ₀, φ₁ and φ₀ + φ₁ ≤ 1 (got {}, {})",
                self.phi0, self.phi1
            )));
        }
        Ok(())
    }
}

/// Total stress and its parts (MPa).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressTensor {
    pub total: Matrix3<f64>,
    /// `−pI`.
    pub pressure: Matrix3<f64>,
    /// Unweighted matrix stress σ₀.
    pub matrix: Matrix3<f64>,
    /// Unweighted isotropic fibril stress σ₁ᵢ.
    pub fibril_isotropic: Matrix3<f64>,
    /// Unweighted anisotropic fibril stress σ₁ₐ.
    pub fibril_anisotropic: Matrix3<f64>,
}

pub fn total_stress(
    state: &DeformationState,
    fractions: &VolumeFractions,
    matrix: &MaterialConstants,
    fibril: &MaterialConstants,
    quad: &SphereQuadrature,
) -> Result<StressTensor> {
    state.validate()?;
    fractions.validate()?;
    matrix.validate()?;
    fibril.validate()?;
    let s0 = holmes_mow_stress(state, matrix)?;
    let s1i = holmes_mow_stress(state, fibril)?;
    let c1b = fibril.c1b.unwrap_or(0.0);
    let s1a = fibril_aniso_stress(state, c1b, fibril.b, quad)?;
    let pressure = -state.p * Matrix3::identity();
    let total = pressure + fractions.phi0 * s0 + fractions.phi1 * (s1i + s1a);
    Ok(StressTensor {
        total,
        pressure,
        matrix: s0,
        fibril_isotropic: s1i,
        fibril_anisotropic: s1a,
    })
}

fn row_major(m: &Matrix3<f64>) -> [f64; 9] {
    [
        m[(0, 0)],
        m[(0, 1)],
        m[(0, 2)],
        m[(1, 0)],
        m[(1, 1)],
        m[(1, 2)],
        m[(2, 0)],
        m[(2, 1)],
        m[(2, 2)],
    ]
}

/// Material-point request: `{"F": [9, row-major], "p": MPa, "zone": "SZ",
/// "phi0": …, "phi1": …, "quad_level": …}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialPointInput {
    #[serde(rename = "F")]
    pub f: [f64; 9],
    pub p: f64,
    pub zone: String,
    pub phi0: f64,
    pub phi1: f64,
    #[serde(default = "default_level")]
    pub quad_level: u32,
}

fn default_level() -> u32 {
    quadrature::DEFAULT_LEVEL
}

/// Stress breakdown: every tensor as 9 row-major numbers (MPa).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialPointOutput {
    pub zone: Zone,
    #[serde(rename = "J")]
    pub j: f64,
    pub quad_level: u32,
    pub quad_directions: usize,
    pub total: [f64; 9],
    pub pressure: [f64; 9],
    pub matrix: [f64; 9],
    pub fibril_isotropic: [f64; 9],
    pub fibril_anisotropic: [f64; 9],
    pub matrix_energy: f64,
    pub fibril_isotropic_energy: f64,
    pub fibril_anisotropic_energy: f64,
}

impl MaterialPointInput {
    /// Parses a request; errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." {
                Error::Format(format!("material input: {inner}"))
            } else {
                Error::Format(format!("material input field `{path}`: {inner}"))
            }
        })
    }
}

pub fn evaluate_material_point(input: &MaterialPointInput) -> Result<MaterialPointOutput> {
    let zone: Zone = input.zone.parse()?;
    let state = DeformationState::new(Matrix3::from_row_slice(&input.f), input.p)?;
    let fractions = VolumeFractions::new(input.phi0, input.phi1)?;
    let matrix = zone_constants(zone, Constituent::Matrix);
    let fibril = zone_constants(zone, Constituent::Fibril);
    let quad = SphereQuadrature::new(input.quad_level)?;
    let s = total_stress(&state, &fractions, &matrix, &fibril, &quad)?;
    let c = state.c();
    Ok(MaterialPointOutput {
        zone,
        j: state.j(),
        quad_level: quad.level,
        quad_directions: quad.len(),
        total: row_major(&s.total),
        pressure: row_major(&s.pressure),
        matrix: row_major(&s.matrix),
        fibril_isotropic: row_major(&s.fibril_isotropic),
        fibril_anisotropic: row_major(&s.fibril_anisotropic),
        matrix_energy: holmes_mow_energy(&c, &matrix)?,
        fibril_isotropic_energy: holmes_mow_energy(&c, &fibril)?,
        fibril_anisotropic_energy: fibril_aniso_energy(
            &state,
            fibril.c1b.unwrap_or(0.0),
            fibril.b,
            &quad,
        )?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_f_names_the_field() {
        let text = r#"{"F": [1,0,0, 0,1,0, 0,0], "p": 0, "zone": "SZ", "phi0": 0.1, "phi1": 0.1}"#;
        match MaterialPointInput::from_json(text) {
            Err(Error::Format(msg)) => assert!(msg.contains("`F`"), "{msg}"),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn identity_state_stresses() {
        let quad = SphereQuadrature::new(2).unwrap();
        let state = DeformationState::new(Matrix3::identity(), 2.0).unwrap();
        let m = zone_constants(Zone::Superficial, Constituent::Matrix);
        let f = zone_constants(Zone::Superficial, Constituent::Fibril);
        let s = total_stress(
            &state,
            &VolumeFractions::new(0.15, 0.05).unwrap(),
            &m,
            &f,
            &quad,
        )
        .unwrap();
        assert!(s.matrix.abs().max() < 1e-10);
        assert_eq!(s.fibril_anisotropic, Matrix3::zeros());
        assert!(
            (s.fibril_isotropic - Matrix3::identity() * -0.68)
                .abs()
                .max()
                < 1e-12
        );
        assert!((s.total - Matrix3::identity() * -2.034).abs().max() < 1e-12);
    }

    #[test]
    fn rejects_inverted_states() {
        let f = Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, 1.0, -1.0));
        assert!(matches!(
            DeformationState::new(f, 0.0),
            Err(Error::InvalidDeformation(_))
        ));
        assert!(VolumeFractions::new(0.7, 0.4).is_err());
    }

    #[test]
    fn json_round_trip() {
        let input: MaterialPointInput = serde_json::from_str(
            r#"{"F":[1,0,0,0,1,0,0,0,1],"p":0,"zone":"DZ","phi0":0.2,"phi1":0.0,"quad_level":1}"#,
        )
        .unwrap();
        let out = evaluate_material_point(&input).unwrap();
        assert_eq!(out.zone, Zone::Deep);
        assert!(out.total.iter().all(|x| x.abs() < 1e-10));
        let bad = MaterialPointInput {
            zone: "MZ".into(),
            ..input
        };
        assert!(matches!(
            evaluate_material_point(&bad),
            Err(Error::UnknownZone(_))
        ));
    }
}
