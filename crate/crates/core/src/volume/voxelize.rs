use rayon::prelude::*;

use super::LabelVolume;
use crate::error::{Error, Result};
use crate::mesh::topology::boundary_loops;
use crate::mesh::TriMesh;

/// Ray offsets in y and z, as fractions of the grid spacing. They keep rays
/// off mesh edges and vertices that sit exactly on grid lines.
const RAY_JITTER: [f64; 2] = [1.123e-7, 2.357e-7];

/// Edge function of `p` against the directed edge `a → b` in the yz plane.
/// Always evaluated from the lower to the higher vertex index so both faces
/// sharing an edge see the same value.
fn edge_fn(mesh: &TriMesh, a: usize, b: usize, py: f64, pz: f64) -> f64 {
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let (u, v) = (&mesh.vertices[lo], &mesh.vertices[hi]);
    let raw = (v.y - u.y) * (pz - u.z) - (v.z - u.z) * (py - u.y);
    // Exact zeros are broken towards the positive side of the canonical edge.
    if raw == 0.0 {
        sign * f64::MIN_POSITIVE
    } else {
        sign * raw
    }
}

/// x coordinate where the +x ray at `(py, pz)` crosses face `f`, if it does.
fn crossing(mesh: &TriMesh, f: usize, py: f64, pz: f64) -> Option<f64> {
    let [a, b, c] = mesh.faces[f];
    let w0 = edge_fn(mesh, b, c, py, pz);
    let w1 = edge_fn(mesh, c, a, py, pz);
    let w2 = edge_fn(mesh, a, b, py, pz);
    let inside = (w0 > 0.0 && w1 > 0.0 && w2 > 0.0) || (w0 < 0.0 && w1 < 0.0 && w2 < 0.0);
    if !inside {
        return None;
    }
    let sum = w0 + w1 + w2;
    let v = &mesh.vertices;
    Some((w0 * v[a].x + w1 * v[b].x + w2 * v[c].x) / sum)
}

/// Labels every voxel of `grid_of`'s geometry whose centre lies inside the
/// closed mesh, by parity of +x ray crossings.
pub fn voxelize_mesh(mesh: &TriMesh, grid_of: &LabelVolume, label: u8) -> Result<LabelVolume> {
    grid_of.validate()?;
    if mesh.faces.is_empty() {
        return Err(Error::EmptyInput("mesh has no faces to voxelize"));
    }
    let loops = boundary_loops(mesh)?;
    if !loops.is_empty() {
        return Err(Error::InvalidMesh(format!(
            "voxelization needs a closed mesh; found {} boundary loops",
            loops.len()
        )));
    }
    let [nx, ny, nz] = grid_of.dims;
    let [sx, sy, sz] = grid_of.spacing;
    let [ox, oy, oz] = grid_of.origin;
    let (dy, dz) = (RAY_JITTER[0] * sy, RAY_JITTER[1] * sz);
    // Bucket faces by the rows their yz bounding box touches.
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); ny * nz];
    for f in 0..mesh.faces.len() {
        let corners = mesh.corners(f);
        let (mut ylo, mut yhi, mut zlo, mut zhi) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in &corners {
            ylo = ylo.min(p.y);
            yhi = yhi.max(p.y);
            zlo = zlo.min(p.z);
            zhi = zhi.max(p.z);
        }
        let j0 = ((ylo - oy - dy) / sy).floor().max(0.0) as usize;
        let j1 = ((yhi - oy - dy) / sy).ceil();
        let k0 = ((zlo - oz - dz) / sz).floor().max(0.0) as usize;
        let k1 = ((zhi - oz - dz) / sz).ceil();
        if j1 < 0.0 || k1 < 0.0 {
            continue;
        }
        let j1 = (j1 as usize).min(ny - 1);
        let k1 = (k1 as usize).min(nz - 1);
        for k in k0..=k1 {
            for j in j0..=j1 {
                buckets[j + ny * k].push(f);
            }
        }
    }
    let rows: Vec<Vec<u8>> = (0..ny * nz)
        .into_par_iter()
        .map(|row| {
            let (j, k) = (row % ny, row / ny);
            let py = oy + j as f64 * sy + dy;
            let pz = oz + k as f64 * sz + dz;
            let mut hits: Vec<f64> = buckets[row]
                .iter()
                .filter_map(|&f| crossing(mesh, f, py, pz))
                .collect();
            hits.sort_by(f64::total_cmp);
            let mut out = vec![0u8; nx];
            if hits.is_empty() {
                return out;
            }
            let mut next = 0;
            for (i, cell) in out.iter_mut().enumerate() {
                let x = ox + i as f64 * sx;
                while next < hits.len() && hits[next] <= x {
                    next += 1;
                }
                if (hits.len() - next) % 2 == 1 {
                    *cell = label;
                }
            }
            out
        })
        .collect();
    let mut out = LabelVolume::zeros(grid_of.dims, grid_of.spacing, grid_of.origin)?;
    for (row, data) in rows.into_iter().enumerate() {
        let start = nx * row;
        out.data[start..start + nx].copy_from_slice(&data);
    }
    Ok(out)
}
