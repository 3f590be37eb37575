//! Rigid coherent point drift with optional isotropic scale.
//!
//! The source cloud `Y` (M points) is moved onto the target cloud `X`
//! (N points). Each EM iteration evaluates Gaussian responsibilities with a
//! uniform outlier term, then solves the weighted Procrustes problem in
//! closed form. Responsibilities are computed target-column by column and
//! accumulated source-row by source-row with a fixed summation order, so the
//! result does not depend on the thread count.

use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transform::RigidTransform;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CpdParams {
    /// Weight of the uniform outlier component, in `[0, 1)`.
    pub outlier_weight: f64,
    pub max_iterations: usize,
    /// Stop once `|σ²_new − σ²_old| / σ²_old` drops below this.
    pub tolerance: f64,
    pub scale_enabled: bool,
}

impl Default for CpdParams {
    fn default() -> Self {
        CpdParams {
            outlier_weight: 0.1,
            max_iterations: 100,
            tolerance: 1e-8,
            scale_enabled: true,
        }
    }
}

impl CpdParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.outlier_weight) {
            return Err(Error::InvalidParams(format!(
                "outlier_weight must lie in [0, 1), got {}",
                self.outlier_weight
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParams(
                "max_iterations must be at least 1".into(),
            ));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParams(format!(
                "tolerance must be > 0, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpdResult {
    /// Maps source points toward the target.
    pub transform: RigidTransform,
    /// Final variance σ² (mm²).
    pub sigma2: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Negative log-likelihood of the target under the final mixture.
    pub objective: f64,
    /// σ² after initialisation and after every iteration.
    pub sigma2_history: Vec<f64>,
}

/// σ² below this fraction of its initial value counts as an exact fit.
const SIGMA2_FLOOR: f64 = 1e-14;

fn check_cloud(points: &[Point3<f64>], name: &str) -> Result<()> {
    if points.len() < 4 {
        return Err(Error::DegenerateInput(format!(
            "{name} cloud has {} points; at least 4 are required",
            points.len()
        )));
    }
    if points
        .iter()
        .any(|p| !p.coords.iter().all(|x| x.is_finite()))
    {
        return Err(Error::DegenerateInput(format!(
            "{name} cloud has non-finite coordinates"
        )));
    }
    let n = points.len() as f64;
    let mean: Vector3<f64> = points.iter().map(|p| p.coords).sum::<Vector3<f64>>() / n;
    let cov: Matrix3<f64> = points
        .iter()
        .map(|p| {
            let d = p.coords - mean;
            d * d.transpose()
        })
        .sum::<Matrix3<f64>>()
        / n;
    let eig = SymmetricEigen::new(cov).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if !(hi > 0.0) || lo <= 1e-12 * hi {
        return Err(Error::DegenerateInput(format!(
            "{name} cloud is coplanar or collinear"
        )));
    }
    Ok(())
}

struct EStep {
    /// Σ_n P_mn for every source point m.
    p1: Vec<f64>,
    /// Σ_m P_mn for every target point n.
    pt1: Vec<f64>,
    /// Σ_n P_mn x_n for every source point m.
    px: Vec<Vector3<f64>>,
    objective: f64,
}

fn e_step(x: &[Vector3<f64>], ty: &[Vector3<f64>], sigma2: f64, w: f64) -> EStep {
    let (n, m) = (x.len() as f64, ty.len() as f64);
    let inv = 1.0 / (2.0 * sigma2);
    let ln_c = if w > 0.0 {
        1.5 * (2.0 * std::f64::consts::PI * sigma2).ln() + (w / (1.0 - w)).ln() + (m / n).ln()
    } else {
        f64::NEG_INFINITY
    };
    // Per target column: log of the exponential sum plus outlier constant.
    let log_norm: Vec<(f64, f64)> = x
        .par_iter()
        .map(|xn| {
            let amax = ty
                .iter()
                .map(|y| -(xn - y).norm_squared() * inv)
                .fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = ty
                .iter()
                .map(|y| (-(xn - y).norm_squared() * inv - amax).exp())
                .sum();
            // ln(e^amax·s + c), evaluated stably.
            let ln_s = amax + s.ln();
            let ln_denom = if ln_c == f64::NEG_INFINITY {
                ln_s
            } else {
                let hi = ln_s.max(ln_c);
                hi + ((ln_s - hi).exp() + (ln_c - hi).exp()).ln()
            };
            (ln_denom, (ln_s - ln_denom).exp())
        })
        .collect();
    let rows: Vec<(f64, Vector3<f64>)> = ty
        .par_iter()
        .map(|y| {
            let mut p1 = 0.0;
            let mut px = Vector3::zeros();
            for (xn, &(ln_denom, _)) in x.iter().zip(&log_norm) {
                let p = (-(xn - y).norm_squared() * inv - ln_denom).exp();
                p1 += p;
                px += p * xn;
            }
            (p1, px)
        })
        .collect();
    // ln p(x_n) = ln((1−w)/M) − 1.5·ln(2πσ²) + ln_denom_n.
    let shift = ((1.0 - w) / m).ln() - 1.5 * (2.0 * std::f64::consts::PI * sigma2).ln();
    let objective = -log_norm.iter().map(|&(l, _)| l + shift).sum::<f64>();
    EStep {
        p1: rows.iter().map(|r| r.0).collect(),
        px: rows.iter().map(|r| r.1).collect(),
        pt1: log_norm.iter().map(|r| r.1).collect(),
        objective,
    }
}

fn initial_sigma2(x: &[Vector3<f64>], y: &[Vector3<f64>]) -> f64 {
    let total: f64 = x
        .par_iter()
        .map(|xn| y.iter().map(|ym| (xn - ym).norm_squared()).sum::<f64>())
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    total / (3.0 * x.len() as f64 * y.len() as f64)
}

/// Registers `source` onto `target`.
pub fn cpd_rigid(
    source: &[Point3<f64>],
    target: &[Point3<f64>],
    params: &CpdParams,
) -> Result<CpdResult> {
    params.validate()?;
    check_cloud(source, "source")?;
    check_cloud(target, "target")?;
    let x: Vec<Vector3<f64>> = target.iter().map(|p| p.coords).collect();
    let y: Vec<Vector3<f64>> = source.iter().map(|p| p.coords).collect();
    let w = params.outlier_weight;

    let mut transform = RigidTransform::identity();
    let mut sigma2 = initial_sigma2(&x, &y);
    let sigma2_init = sigma2;
    let mut history = vec![sigma2];
    let mut converged = false;
    let mut iterations = 0;
    let mut objective = f64::NAN;

    while iterations < params.max_iterations {
        iterations += 1;
        let ty: Vec<Vector3<f64>> = y
            .iter()
            .map(|v| transform.scale * (transform.rotation * v) + transform.translation)
            .collect();
        let e = e_step(&x, &ty, sigma2, w);
        let np: f64 = e.pt1.iter().sum();
        if !(np > 0.0) {
            return Err(Error::DegenerateInput(
                "all target points were classified as outliers".into(),
            ));
        }
        let mu_x: Vector3<f64> = x
            .iter()
            .zip(&e.pt1)
            .map(|(v, &p)| p * v)
            .sum::<Vector3<f64>>()
            / np;
        let mu_y: Vector3<f64> = y
            .iter()
            .zip(&e.p1)
            .map(|(v, &p)| p * v)
            .sum::<Vector3<f64>>()
            / np;
        let mut a = Matrix3::zeros();
        let mut yy = 0.0;
        for ((ym, &p1), px) in y.iter().zip(&e.p1).zip(&e.px) {
            let dy = ym - mu_y;
            a += (px - p1 * mu_x) * dy.transpose();
            yy += p1 * dy.norm_squared();
        }
        let xx: f64 = x
            .iter()
            .zip(&e.pt1)
            .map(|(v, &p)| p * (v - mu_x).norm_squared())
            .sum();
        let svd = a.svd(true, true);
        let (u, vt) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
        let mut c = Matrix3::identity();
        c[(2, 2)] = (u * vt).determinant().signum();
        let rotation = u * c * vt;
        let tr = (a.transpose() * rotation).trace();
        let scale = if params.scale_enabled { tr / yy } else { 1.0 };
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::DegenerateInput(format!(
                "scale update is not positive ({scale})"
            )));
        }
        let translation = mu_x - scale * (rotation * mu_y);
        debug_assert!(
            (rotation.transpose() * rotation - Matrix3::identity())
                .abs()
                .max()
                < 1e-9
        );
        debug_assert!((rotation.determinant() - 1.0).abs() < 1e-9);
        transform = RigidTransform {
            rotation,
            scale,
            translation,
        };
        let new_sigma2 = ((xx - 2.0 * scale * tr + scale * scale * yy) / (3.0 * np)).max(0.0);
        objective = e.objective;
        let change = (sigma2 - new_sigma2).abs() / sigma2;
        history.push(new_sigma2);
        if new_sigma2 <= SIGMA2_FLOOR * sigma2_init {
            sigma2 = new_sigma2;
            converged = true;
            break;
        }
        sigma2 = new_sigma2;
        if change < params.tolerance {
            converged = true;
            break;
        }
    }
    Ok(CpdResult {
        transform,
        sigma2,
        iterations,
        converged,
        objective,
        sigma2_history: history,
    })
}
