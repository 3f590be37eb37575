//! Label volumes, isosurface extraction and voxelisation.
//!
//! On disk a volume is a JSON header plus a raw payload of `nx·ny·nz`
//! unsigned bytes, x varying fastest:
//!
//! ```json
//! {"dims": [nx, ny, nz], "spacing_mm": [sx, sy, sz], "origin_mm": [ox, oy, oz],
//!  "dtype": "u8", "order": "x-fastest"}
//! ```
//!
//! Voxel `(i, j, k)` has its centre at `origin + (i·sx, j·sy, k·sz)`.

mod marching_cubes;
mod tables;
mod voxelize;

use std::fs;
use std::path::Path;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use marching_cubes::{marching_cubes, marching_cubes_iso};
pub use voxelize::voxelize_mesh;

/// In-plane × slice resolution of the knee MR images (mm).
pub const DEFAULT_SPACING: [f64; 3] = [0.36, 0.36, 0.7];

#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
    pub data: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeHeader {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub origin_mm: [f64; 3],
    pub dtype: String,
    pub order: String,
}

impl LabelVolume {
    /// All-zero volume.
    pub fn zeros(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        let v = LabelVolume {
            dims,
            spacing,
            origin,
            data: vec![0; dims.iter().product()],
        };
        v.validate()?;
        Ok(v)
    }

    /// Volume whose voxel `(i, j, k)` holds `f(i, j, k)`.
    pub fn from_fn(
        dims: [usize; 3],
        spacing: [f64; 3],
        origin: [f64; 3],
        f: impl Fn(usize, usize, usize) -> u8,
    ) -> Result<Self> {
        let mut v = Self::zeros(dims, spacing, origin)?;
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let idx = v.index(i, j, k);
                    v.data[idx] = f(i, j, k);
                }
            }
        }
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.contains(&0) {
            return Err(Error::format(format!(
                "volume dims must be positive, got {:?}",
                self.dims
            )));
        }
        if !self.spacing.iter().all(|&s| s > 0.0 && s.is_finite()) {
            return Err(Error::format(format!(
                "volume spacing must be positive, got {:?}",
                self.spacing
            )));
        }
        if !self.origin.iter().all(|o| o.is_finite()) {
            return Err(Error::format("volume origin must be finite"));
        }
        let n: usize = self.dims.iter().product();
        if self.data.len() != n {
            return Err(Error::format(format!(
                "volume payload has {} bytes, dims {:?} need {n}",
                self.data.len(),
                self.dims
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> u8 {
        self.data[self.index(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: u8) {
        let idx = self.index(i, j, k);
        self.data[idx] = value;
    }

    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> Point3<f64> {
        Point3::new(
            self.origin[0] + i as f64 * self.spacing[0],
            self.origin[1] + j as f64 * self.spacing[1],
            self.origin[2] + k as f64 * self.spacing[2],
        )
    }

    pub fn count(&self, label: u8) -> usize {
        self.data.iter().filter(|&&v| v == label).count()
    }

    pub fn same_grid(&self, other: &LabelVolume) -> bool {
        self.dims == other.dims && self.spacing == other.spacing && self.origin == other.origin
    }

    pub fn header(&self) -> VolumeHeader {
        VolumeHeader {
            dims: self.dims,
            spacing_mm: self.spacing,
            origin_mm: self.origin,
            dtype: "u8".into(),
            order: "x-fastest".into(),
        }
    }

    pub fn from_parts(header: &VolumeHeader, data: Vec<u8>) -> Result<Self> {
        if header.dtype != "u8" {
            return Err(Error::format(format!(
                "unsupported dtype {:?}",
                header.dtype
            )));
        }
        if header.order != "x-fastest" {
            return Err(Error::format(format!(
                "unsupported voxel order {:?}",
                header.order
            )));
        }
        let v = LabelVolume {
            dims: header.dims,
            spacing: header.spacing_mm,
            origin: header.origin_mm,
            data,
        };
        v.validate()?;
        Ok(v)
    }
}

pub fn load_volume(
    header_path: impl AsRef<Path>,
    data_path: impl AsRef<Path>,
) -> Result<LabelVolume> {
    let header: VolumeHeader = serde_json::from_slice(&fs::read(header_path)?)?;
    let data = fs::read(data_path)?;
    LabelVolume::from_parts(&header, data)
}

pub fn save_volume(
    volume: &LabelVolume,
    header_path: impl AsRef<Path>,
    data_path: impl AsRef<Path>,
) -> Result<()> {
    volume.validate()?;
    let mut json = serde_json::to_string_pretty(&volume.header())?;
    json.push('\n');
    fs::write(header_path, json)?;
    fs::write(data_path, &volume.data)?;
    Ok(())
}

/// Voxelised ball of `radius` voxels centred in a cube of side `n`, unit spacing.
pub fn ball(n: usize, radius: f64, label: u8) -> LabelVolume {
    let c = (n as f64 - 1.0) / 2.0;
    LabelVolume::from_fn([n; 3], [1.0; 3], [0.0; 3], |i, j, k| {
        let d2 = (i as f64 - c).powi(2) + (j as f64 - c).powi(2) + (k as f64 - c).powi(2);
        if d2 <= radius * radius {
            label
        } else {
            0
        }
    })
    .expect("positive dims")
}
