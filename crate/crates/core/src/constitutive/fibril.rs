//! Distributed anisotropic fibril energy and its orientation density.
//!
//! Directions `M` are reference-frame unit vectors; the co-latitude `Θ` is
//! measured from the z axis.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

use super::quadrature::SphereQuadrature;
use super::special::{erf, erfi, integrate};
use super::DeformationState;
use crate::error::{Error, Result};

fn check_theta(theta: f64) -> Result<()> {
    if !(0.0..=PI).contains(&theta) {
        return Err(Error::Domain(format!(
            "co-latitude must lie in [0, π], got {theta}"
        )));
    }
    Ok(())
}

/// The density formula as printed:
/// `(1/π)·√( b·exp[b(cos 2Θ + 1)] / (2π·erfi(√(2b))) )`.
///
/// For `b < 0` the ratio `b / erfi(√(2b))` is replaced by the modulus of its
/// analytic continuation, `|b| / erf(√(2|b|))`. At `b = 0` this is the limit 0.
pub fn fibril_density_raw(b: f64, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    if b == 0.0 {
        return Ok(0.0);
    }
    let ratio = if b > 0.0 {
        b / erfi((2.0 * b).sqrt())
    } else {
        -b / erf((-2.0 * b).sqrt())
    };
    let e = (b * ((2.0 * theta).cos() + 1.0)).exp();
    Ok((ratio * e / (2.0 * PI)).sqrt() / PI)
}

/// Orientation density normalised to unit integral over the sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FibrilDistribution {
    pub b: f64,
    /// `∫_{S²} exp[(b(cos 2Θ + 1) − shift)/2] dS`.
    norm: f64,
    shift: f64,
}

impl FibrilDistribution {
    pub fn new(b: f64) -> Result<Self> {
        if !b.is_finite() {
            return Err(Error::Domain(format!(
                "fibril parameter b must be finite, got {b}"
            )));
        }
        if b == 0.0 {
            return Ok(FibrilDistribution {
                b,
                norm: 4.0 * PI,
                shift: 0.0,
            });
        }
        let shift = 2.0 * b.max(0.0);
        let shape = |t: f64| ((b * ((2.0 * t).cos() + 1.0) - shift) / 2.0).exp();
        let norm = 2.0 * PI * integrate(&|t: f64| shape(t) * t.sin(), 0.0, PI, 1e-13);
        Ok(FibrilDistribution { b, norm, shift })
    }

    /// Normalised density at co-latitude `theta`; `1/(4π)` when `b = 0`.
    pub fn density(&self, theta: f64) -> Result<f64> {
        check_theta(theta)?;
        Ok(self.density_unchecked(theta))
    }

    fn density_unchecked(&self, theta: f64) -> f64 {
        if self.b == 0.0 {
            return 1.0 / (4.0 * PI);
        }
        ((self.b * ((2.0 * theta).cos() + 1.0) - self.shift) / 2.0).exp() / self.norm
    }

    /// Density for a (unit) reference direction.
    pub fn density_along(&self, m: &Vector3<f64>) -> f64 {
        let theta = (m.z / m.norm()).clamp(-1.0, 1.0).acos();
        self.density_unchecked(theta)
    }

    /// Integral of the raw printed formula, the factor removed by normalisation.
    pub fn raw_integral(&self) -> Result<f64> {
        let b = self.b;
        Ok(2.0
            * PI
            * integrate(
                &|t: f64| fibril_density_raw(b, t).unwrap_or(0.0) * t.sin(),
                0.0,
                PI,
                1e-12,
            ))
    }
}

/// Normalised orientation density `ψ(Θ)`.
pub fn fibril_density(b: f64, theta: f64) -> Result<f64> {
    FibrilDistribution::new(b)?.density(theta)
}

/// `Ī₄ − 1` for a direction, computed as `M̂·(C̄ − I)M̂` so that it is exactly
/// zero whenever `C̄ = I`.
fn stretch_excess(c_bar_minus_i: &Matrix3<f64>, m: &Vector3<f64>) -> f64 {
    m.dot(&(c_bar_minus_i * m))
}

fn unit_directions(quad: &SphereQuadrature) -> impl Iterator<Item = (Vector3<f64>, f64)> + '_ {
    quad.directions
        .iter()
        .zip(&quad.weights)
        .map(|(m, &w)| (m / m.norm(), w))
}

/// `W̄₁ₐ = Σ wᵢ ψ(Mᵢ) ½ c₁ᵦ (Ī₄(Mᵢ) − 1)²`.
pub fn fibril_aniso_energy(
    state: &DeformationState,
    c1b: f64,
    b: f64,
    quad: &SphereQuadrature,
) -> Result<f64> {
    state.validate()?;
    let dist = FibrilDistribution::new(b)?;
    let e = state.c_bar() - Matrix3::identity();
    Ok(unit_directions(quad)
        .map(|(m, w)| {
            let x = stretch_excess(&e, &m);
            w * dist.density_along(&m) * 0.5 * c1b * x * x
        })
        .sum())
}

/// Cauchy stress of the anisotropic fibrils,
/// `J^{-5/3} Σ wᵢ ψᵢ 2c₁ᵦ (Ī₄ − 1) [m⊗m − ⅓|m|² I]` with `m = F M`.
pub fn fibril_aniso_stress(
    state: &DeformationState,
    c1b: f64,
    b: f64,
    quad: &SphereQuadrature,
) -> Result<Matrix3<f64>> {
    state.validate()?;
    let dist = FibrilDistribution::new(b)?;
    let e = state.c_bar() - Matrix3::identity();
    let mut sigma = Matrix3::zeros();
    for (m, w) in unit_directions(quad) {
        let x = stretch_excess(&e, &m);
        if x == 0.0 {
            continue;
        }
        let fm = state.f * m;
        let dev = fm * fm.transpose() - Matrix3::identity() * (fm.norm_squared() / 3.0);
        sigma += dev * (w * dist.density_along(&m) * 2.0 * c1b * x);
    }
    Ok(sigma * state.j().powf(-5.0 / 3.0))
}
