use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{BinaryMask, Geometry, Result, Volume};

const PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// One of the 48 axis permutations with optional flips.
///
/// Output axis `a` reads input axis `perm[a]`, reversed when `flip[a]`.
/// The affine is updated so every voxel keeps its world position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OrthoTransform {
    pub perm: [usize; 3],
    pub flip: [bool; 3],
}

impl Default for OrthoTransform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl OrthoTransform {
    pub const IDENTITY: Self = Self {
        perm: [0, 1, 2],
        flip: [false; 3],
    };

    /// All 48 elements of the group.
    pub fn all() -> Vec<Self> {
        PERMUTATIONS
            .iter()
            .flat_map(|&perm| {
                (0..8u8).map(move |bits| Self {
                    perm,
                    flip: [bits & 1 != 0, bits & 2 != 0, bits & 4 != 0],
                })
            })
            .collect()
    }

    /// Uniform draw from the 48 elements.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let perm = PERMUTATIONS[rng.random_range(0..6)];
        let bits: u8 = rng.random_range(0..8);
        Self {
            perm,
            flip: [bits & 1 != 0, bits & 2 != 0, bits & 4 != 0],
        }
    }

    /// Reversal of `axis`.
    pub fn flip(axis: usize) -> Self {
        let mut t = Self::IDENTITY;
        t.flip[axis] = true;
        t
    }

    /// Quarter turn in the plane of axes `a` and `b`.
    pub fn rotate90(a: usize, b: usize) -> Self {
        assert!(a != b && a < 3 && b < 3, "rotation plane needs two distinct axes");
        let mut t = Self::IDENTITY;
        t.perm.swap(a, b);
        t.flip[a] = true;
        t
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    pub fn inverse(&self) -> Self {
        let mut out = Self::IDENTITY;
        for a in 0..3 {
            out.perm[self.perm[a]] = a;
            out.flip[self.perm[a]] = self.flip[a];
        }
        out
    }

    /// `self` followed by `then`.
    pub fn compose(&self, then: &Self) -> Self {
        let mut out = Self::IDENTITY;
        for a in 0..3 {
            let mid = then.perm[a];
            out.perm[a] = self.perm[mid];
            out.flip[a] = then.flip[a] ^ self.flip[mid];
        }
        out
    }

    pub fn apply_geometry(&self, geometry: &Geometry) -> Result<Geometry> {
        let dims_in = geometry.dims();
        let spacing_in = geometry.spacing();
        let dims = self.perm.map(|p| dims_in[p]);
        let spacing = self.perm.map(|p| spacing_in[p]);
        // input index = m * output index + b
        let mut m = [[0.0; 4]; 4];
        m[3][3] = 1.0;
        for a in 0..3 {
            let p = self.perm[a];
            if self.flip[a] {
                m[p][a] = -1.0;
                m[p][3] = (dims_in[p] - 1) as f64;
            } else {
                m[p][a] = 1.0;
            }
        }
        let a_in = geometry.affine();
        let mut affine = [[0.0; 4]; 4];
        for (r, row) in affine.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = (0..4).map(|k| a_in[r][k] * m[k][c]).sum();
            }
        }
        Geometry::new(dims, spacing, affine)
    }

    /// Input linear index for every output voxel.
    fn source_indices(&self, geometry: &Geometry) -> Vec<usize> {
        let dims_in = geometry.dims();
        let dims_out = self.perm.map(|p| dims_in[p]);
        let mut out = Vec::with_capacity(geometry.len());
        for z in 0..dims_out[2] {
            for y in 0..dims_out[1] {
                for x in 0..dims_out[0] {
                    let o = [x, y, z];
                    let mut i = [0usize; 3];
                    for ((&p, &flip), &coord) in self.perm.iter().zip(&self.flip).zip(&o) {
                        i[p] = if flip { dims_in[p] - 1 - coord } else { coord };
                    }
                    out.push(geometry.index(i[0], i[1], i[2]));
                }
            }
        }
        out
    }

    pub fn apply_volume(&self, volume: &Volume) -> Result<Volume> {
        let geometry = self.apply_geometry(volume.geometry())?;
        let data = self
            .source_indices(volume.geometry())
            .into_iter()
            .map(|i| volume.data()[i])
            .collect();
        Volume::new(geometry, data)
    }

    pub fn apply_mask(&self, mask: &BinaryMask) -> Result<BinaryMask> {
        let geometry = self.apply_geometry(mask.geometry())?;
        let data = self
            .source_indices(mask.geometry())
            .into_iter()
            .map(|i| mask.data()[i])
            .collect();
        BinaryMask::new(geometry, data)
    }
}

/// Applies one random flip/rotation to a volume and its masks alike.
pub fn orthogonal_flip_rotate<R: Rng + ?Sized>(
    volume: &Volume,
    masks: &[&BinaryMask],
    rng: &mut R,
) -> Result<(Volume, Vec<BinaryMask>, OrthoTransform)> {
    for (k, mask) in masks.iter().enumerate() {
        volume
            .geometry()
            .ensure_matches(mask.geometry(), &format!("mask {k}"))?;
    }
    let t = OrthoTransform::sample(rng);
    let out = t.apply_volume(volume)?;
    let out_masks = masks.iter().map(|m| t.apply_mask(m)).collect::<Result<_>>()?;
    Ok((out, out_masks, t))
}
