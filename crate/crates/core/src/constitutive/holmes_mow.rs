//! Exponential isotropic energy `W = α₀·exp[α₁(I₁−3) + α₂(I₂−3)] / I₃^β`.

use nalgebra::Matrix3;

use super::constants::MaterialConstants;
use super::{check_spd, DeformationState};
use crate::error::Result;

/// Principal invariants `(I₁, I₂, I₃)` of a symmetric tensor.
pub fn invariants(c: &Matrix3<f64>) -> (f64, f64, f64) {
    let i1 = c.trace();
    let i2 = 0.5 * (i1 * i1 - (c * c).trace());
    (i1, i2, c.determinant())
}

pub fn holmes_mow_energy(c: &Matrix3<f64>, k: &MaterialConstants) -> Result<f64> {
    check_spd(c)?;
    let (i1, i2, i3) = invariants(c);
    Ok(k.alpha0 * (k.alpha1 * (i1 - 3.0) + k.alpha2 * (i2 - 3.0)).exp() / i3.powf(k.beta))
}

/// `2 ∂W/∂C = 2W [α₁ I + α₂ (I₁ I − C) − β C⁻¹]`.
pub fn holmes_mow_second_piola(c: &Matrix3<f64>, k: &MaterialConstants) -> Result<Matrix3<f64>> {
    let w = holmes_mow_energy(c, k)?;
    let (i1, _, _) = invariants(c);
    let c_inv = c.try_inverse().expect("SPD tensor is invertible");
    let id = Matrix3::identity();
    Ok(2.0 * w * (k.alpha1 * id + k.alpha2 * (i1 * id - c) - k.beta * c_inv))
}

/// Cauchy stress `J⁻¹ F (2 ∂W/∂C) Fᵀ`, written with `B = F Fᵀ` as
/// `(2W/J) [α₁ B + α₂ (I₁ B − B²) − β I]`.
pub fn holmes_mow_stress(state: &DeformationState, k: &MaterialConstants) -> Result<Matrix3<f64>> {
    state.validate()?;
    let c = state.c();
    let w = holmes_mow_energy(&c, k)?;
    let f = state.f;
    let b = f * f.transpose();
    let i1 = b.trace();
    let j = state.j();
    let id = Matrix3::identity();
    Ok(2.0 * w / j * (k.alpha1 * b + k.alpha2 * (i1 * b - b * b) - k.beta * id))
}
