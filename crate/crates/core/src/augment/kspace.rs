//! Acquisition artifacts simulated in k-space. Every operation here
//! returns the magnitude of the inverse transform, so outputs are real and
//! non-negative.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::fft::{self, signed_frequency};
use crate::Geometry;

/// Rigid head pose: rotations about x, y, z (degrees, applied in that
/// order) and a translation (mm), both about the grid centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation_deg: [f64; 3],
    pub translation_mm: [f64; 3],
}

impl RigidTransform {
    pub const IDENTITY: Self = Self {
        rotation_deg: [0.0; 3],
        translation_mm: [0.0; 3],
    };

    pub fn is_identity(&self) -> bool {
        self.rotation_deg == [0.0; 3] && self.translation_mm == [0.0; 3]
    }

    /// Rotation matrix `Rz * Ry * Rx`.
    pub fn rotation_matrix(&self) -> [[f64; 3]; 3] {
        let [a, b, c] = self.rotation_deg.map(f64::to_radians);
        let (sa, ca) = a.sin_cos();
        let (sb, cb) = b.sin_cos();
        let (sc, cc) = c.sin_cos();
        [
            [cc * cb, cc * sb * sa - sc * ca, cc * sb * ca + sc * sa],
            [sc * cb, sc * sb * sa + cc * ca, sc * sb * ca - cc * sa],
            [-sb, cb * sa, cb * ca],
        ]
    }
}

/// Resamples the image as seen after the object moved by `t`
/// (trilinear, edge-clamped).
pub fn rigid_resample(data: &[f64], geometry: &Geometry, t: &RigidTransform) -> Vec<f64> {
    if t.is_identity() {
        return data.to_vec();
    }
    let dims = geometry.dims();
    let spacing = geometry.spacing();
    let r = t.rotation_matrix();
    let centre = dims.map(|n| (n as f64 - 1.0) / 2.0);
    let mut out = Vec::with_capacity(data.len());
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let p = [x, y, z];
                let rel: [f64; 3] = std::array::from_fn(|a| {
                    (p[a] as f64 - centre[a]) * spacing[a] - t.translation_mm[a]
                });
                // Inverse rotation is the transpose.
                let q: [f64; 3] = std::array::from_fn(|a| {
                    let phys = r[0][a] * rel[0] + r[1][a] * rel[1] + r[2][a] * rel[2];
                    phys / spacing[a] + centre[a]
                });
                out.push(trilinear(data, dims, q));
            }
        }
    }
    out
}

fn trilinear(data: &[f64], dims: [usize; 3], q: [f64; 3]) -> f64 {
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    let mut w = [0.0; 3];
    for a in 0..3 {
        let max = (dims[a] - 1) as f64;
        let c = q[a].clamp(0.0, max);
        let f = c.floor();
        lo[a] = f as usize;
        hi[a] = (lo[a] + 1).min(dims[a] - 1);
        w[a] = c - f;
    }
    let at = |x: usize, y: usize, z: usize| data[x + dims[0] * (y + dims[1] * z)];
    let mut acc = 0.0;
    for (dz, wz) in [(lo[2], 1.0 - w[2]), (hi[2], w[2])] {
        for (dy, wy) in [(lo[1], 1.0 - w[1]), (hi[1], w[1])] {
            for (dx, wx) in [(lo[0], 1.0 - w[0]), (hi[0], w[0])] {
                let weight = wx * wy * wz;
                if weight != 0.0 {
                    acc += weight * at(dx, dy, dz);
                }
            }
        }
    }
    acc
}

/// Shifted (centred) k-space positions `[start, end)` acquired during
/// pose `t` of `count` along an axis of length `n`. Slabs are contiguous
/// and equal-sized with the remainder in the last slab.
pub fn slab_bounds(n: usize, count: usize, t: usize) -> (usize, usize) {
    let len = n / count;
    let start = t * len;
    let end = if t + 1 == count { n } else { start + len };
    (start, end)
}

/// Unshifted index of centred position `j` (inverse of fftshift).
fn unshift(j: usize, n: usize) -> usize {
    (j + n - n / 2) % n
}

fn for_each_plane(dims: [usize; 3], axis: usize, plane: usize, mut f: impl FnMut(usize)) {
    let [nx, ny, nz] = dims;
    match axis {
        0 => {
            for z in 0..nz {
                for y in 0..ny {
                    f(plane + nx * (y + ny * z));
                }
            }
        }
        1 => {
            for z in 0..nz {
                for x in 0..nx {
                    f(x + nx * (plane + ny * z));
                }
            }
        }
        _ => {
            for y in 0..ny {
                for x in 0..nx {
                    f(x + nx * (y + ny * plane));
                }
            }
        }
    }
}

/// Motion during acquisition: the k-space lines along `phase_axis` are split
/// into one slab per pose, each filled from the spectrum of the image moved
/// by that pose.
pub fn motion(
    data: &[f64],
    geometry: &Geometry,
    transforms: &[RigidTransform],
    phase_axis: usize,
) -> Vec<f64> {
    let dims = geometry.dims();
    let n = dims[phase_axis];
    let mut kspace: Option<Vec<Complex64>> = None;
    for (t, transform) in transforms.iter().enumerate() {
        let moved = rigid_resample(data, geometry, transform);
        let spectrum = fft::forward(&moved, dims);
        match kspace.as_mut() {
            None => {
                // The first pose provides the whole buffer; later slabs overwrite it.
                kspace = Some(spectrum);
            }
            Some(k) => {
                let (start, end) = slab_bounds(n, transforms.len(), t);
                for j in start..end {
                    for_each_plane(dims, phase_axis, unshift(j, n), |i| k[i] = spectrum[i]);
                }
            }
        }
    }
    fft::inverse_magnitude(kspace.expect("at least one transform"), dims)
}

/// Spike position given as a fraction of the k-space extent per axis,
/// each in `[-0.5, 0.5]`; 0 is the DC component.
pub fn spike_index(position: [f64; 3], dims: [usize; 3]) -> usize {
    let u: [usize; 3] = std::array::from_fn(|a| {
        let n = dims[a] as isize;
        let f = (position[a] * n as f64).round() as isize;
        f.clamp(-(n / 2), n / 2).rem_euclid(n) as usize
    });
    u[0] + dims[0] * (u[1] + dims[1] * u[2])
}

pub fn spike(data: &[f64], dims: [usize; 3], positions: &[[f64; 3]], intensity_factor: f64) -> Vec<f64> {
    let mut k = fft::forward(data, dims);
    let peak = k.iter().map(|c| c.norm()).fold(0.0, f64::max);
    for p in positions {
        let i = spike_index(*p, dims);
        k[i] += Complex64::new(intensity_factor * peak, 0.0);
    }
    fft::inverse_magnitude(k, dims)
}

/// Attenuates every `n_ghosts`-th k-space plane along `axis` (DC excluded),
/// which produces `n_ghosts` - periodic replicas along that axis.
pub fn ghosting(data: &[f64], dims: [usize; 3], n_ghosts: usize, axis: usize, intensity: f64) -> Vec<f64> {
    let mut k = fft::forward(data, dims);
    let n = dims[axis];
    let scale = 1.0 - intensity;
    for u in 0..n {
        let f = signed_frequency(u, n);
        if f != 0 && f % n_ghosts as isize == 0 {
            for_each_plane(dims, axis, u, |i| k[i] *= scale);
        }
    }
    fft::inverse_magnitude(k, dims)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_matrix_is_orthonormal() {
        let t = RigidTransform {
            rotation_deg: [3.0, -4.5, 5.0],
            translation_mm: [0.0; 3],
        };
        let r = t.rotation_matrix();
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| r[i][k] * r[j][k]).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn integer_translation_shifts_voxels() {
        let g = Geometry::with_spacing([6, 1, 1], [2.0, 1.0, 1.0]).unwrap();
        let data = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let t = RigidTransform {
            rotation_deg: [0.0; 3],
            translation_mm: [2.0, 0.0, 0.0],
        };
        // Object moved +1 voxel along x; edge clamped.
        assert_eq!(rigid_resample(&data, &g, &t), vec![0.0, 0.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn slabs_cover_axis() {
        assert_eq!(slab_bounds(10, 3, 0), (0, 3));
        assert_eq!(slab_bounds(10, 3, 1), (3, 6));
        assert_eq!(slab_bounds(10, 3, 2), (6, 10));
        let covered: Vec<usize> = (0..7).map(|j| unshift(j, 7)).collect();
        assert_eq!(covered, vec![4, 5, 6, 0, 1, 2, 3]);
        assert_eq!(unshift(3, 6), 0);
    }

    #[test]
    fn spike_indices() {
        let dims = [8, 8, 8];
        assert_eq!(spike_index([0.0; 3], dims), 0);
        assert_eq!(spike_index([0.25, 0.0, 0.0], dims), 2);
        assert_eq!(spike_index([-0.25, 0.0, 0.0], dims), 6);
        assert_eq!(spike_index([0.5, 0.0, 0.0], dims), 4);
        assert_eq!(spike_index([-0.5, 0.0, 0.0], dims), 4);
        assert_eq!(spike_index([0.0, 0.125, 0.0], [8, 8, 8]), 8);
    }
}
