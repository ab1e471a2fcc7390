//! Volume and mask data model.
//!
//! Voxel data is stored x-fastest: `index = x + nx * (y + ny * z)`.

mod components;
pub mod morphology;
pub mod nifti;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use components::{
    connected_components, filter_small_lesions, lesion_volume_mm3, Connectivity, LabeledMask,
};
pub use nifti::{load_mask, load_volume, save_mask, save_volume, DataType};

/// Tolerance (mm) between the declared spacing and the affine column norms.
pub const SPACING_TOLERANCE_MM: f64 = 1e-4;

/// Voxel grid description shared by volumes and masks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    dims: [usize; 3],
    spacing: [f64; 3],
    affine: [[f64; 4]; 4],
}

impl Geometry {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], affine: [[f64; 4]; 4]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidGeometry(format!("dims {dims:?} must be positive")));
        }
        if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::InvalidGeometry(format!(
                "spacing {spacing:?} must be positive and finite"
            )));
        }
        if affine.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGeometry("affine has non-finite entries".into()));
        }
        if affine[3] != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::InvalidGeometry(format!(
                "affine last row {:?} must be (0, 0, 0, 1)",
                affine[3]
            )));
        }
        for axis in 0..3 {
            let norm = (0..3).map(|r| affine[r][axis].powi(2)).sum::<f64>().sqrt();
            if (norm - spacing[axis]).abs() > SPACING_TOLERANCE_MM {
                return Err(Error::InvalidGeometry(format!(
                    "affine column {axis} has norm {norm} but spacing is {}",
                    spacing[axis]
                )));
            }
        }
        Ok(Self { dims, spacing, affine })
    }

    /// Axis-aligned grid with the origin at voxel (0, 0, 0).
    pub fn with_spacing(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        let mut affine = [[0.0; 4]; 4];
        for (axis, &s) in spacing.iter().enumerate() {
            affine[axis][axis] = s;
        }
        affine[3][3] = 1.0;
        Self::new(dims, spacing, affine)
    }

    /// 1 mm isotropic axis-aligned grid.
    pub fn unit(dims: [usize; 3]) -> Result<Self> {
        Self::with_spacing(dims, [1.0; 3])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn affine(&self) -> &[[f64; 4]; 4] {
        &self.affine
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Volume of a single voxel in mm³.
    pub fn voxel_volume(&self) -> f64 {
        self.spacing[0] * self.spacing[1] * self.spacing[2]
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let x = index % self.dims[0];
        let rest = index / self.dims[0];
        [x, rest % self.dims[1], rest / self.dims[1]]
    }

    /// Same grid up to the precision a NIfTI header can carry.
    pub fn matches(&self, other: &Geometry) -> bool {
        self.dims == other.dims
            && self
                .spacing
                .iter()
                .zip(&other.spacing)
                .all(|(a, b)| (a - b).abs() <= SPACING_TOLERANCE_MM)
            && self
                .affine
                .iter()
                .flatten()
                .zip(other.affine.iter().flatten())
                .all(|(a, b)| (a - b).abs() <= SPACING_TOLERANCE_MM * (1.0 + a.abs()))
    }

    pub fn ensure_matches(&self, other: &Geometry, what: &str) -> Result<()> {
        if self.matches(other) {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!(
                "{what}: dims {:?} spacing {:?} vs dims {:?} spacing {:?}",
                self.dims, self.spacing, other.dims, other.spacing
            )))
        }
    }
}

/// Scalar 3D image.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    geometry: Geometry,
    data: Vec<f64>,
}

impl Volume {
    pub fn new(geometry: Geometry, data: Vec<f64>) -> Result<Self> {
        if data.len() != geometry.len() {
            return Err(Error::InvalidGeometry(format!(
                "data length {} does not match dims {:?}",
                data.len(),
                geometry.dims()
            )));
        }
        Ok(Self { geometry, data })
    }

    pub fn zeros(geometry: Geometry) -> Self {
        let data = vec![0.0; geometry.len()];
        Self { geometry, data }
    }

    pub fn filled(geometry: Geometry, value: f64) -> Self {
        let data = vec![value; geometry.len()];
        Self { geometry, data }
    }

    pub fn from_fn(geometry: Geometry, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let data = (0..geometry.len())
            .map(|i| {
                let [x, y, z] = geometry.coords(i);
                f(x, y, z)
            })
            .collect();
        Self { geometry, data }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn dims(&self) -> [usize; 3] {
        self.geometry.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.geometry.index(x, y, z)]
    }

    /// New volume on the same grid.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Self::new(self.geometry.clone(), data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            geometry: self.geometry.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn ensure_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::NonFiniteInput { index }),
            None => Ok(()),
        }
    }

    /// Voxelwise `value >= threshold`.
    pub fn threshold(&self, threshold: f64) -> BinaryMask {
        BinaryMask {
            geometry: self.geometry.clone(),
            data: self.data.iter().map(|&v| v >= threshold).collect(),
        }
    }
}

/// Per-voxel boolean mask.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    geometry: Geometry,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(geometry: Geometry, data: Vec<bool>) -> Result<Self> {
        if data.len() != geometry.len() {
            return Err(Error::InvalidGeometry(format!(
                "mask length {} does not match dims {:?}",
                data.len(),
                geometry.dims()
            )));
        }
        Ok(Self { geometry, data })
    }

    pub fn empty(geometry: Geometry) -> Self {
        let data = vec![false; geometry.len()];
        Self { geometry, data }
    }

    pub fn full(geometry: Geometry) -> Self {
        let data = vec![true; geometry.len()];
        Self { geometry, data }
    }

    pub fn from_fn(geometry: Geometry, mut f: impl FnMut(usize, usize, usize) -> bool) -> Self {
        let data = (0..geometry.len())
            .map(|i| {
                let [x, y, z] = geometry.coords(i);
                f(x, y, z)
            })
            .collect();
        Self { geometry, data }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn dims(&self) -> [usize; 3] {
        self.geometry.dims
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [bool] {
        &mut self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.data[self.geometry.index(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, value: bool) {
        let i = self.geometry.index(x, y, z);
        self.data[i] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    /// Indices of the true voxels in scan order.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.data.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    fn zip_with(&self, other: &BinaryMask, f: impl Fn(bool, bool) -> bool) -> Result<BinaryMask> {
        self.geometry.ensure_matches(&other.geometry, "mask operation")?;
        Ok(BinaryMask {
            geometry: self.geometry.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn union_in_place(&mut self, other: &BinaryMask) -> Result<()> {
        self.geometry.ensure_matches(&other.geometry, "mask union")?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a |= b;
        }
        Ok(())
    }

    pub fn is_disjoint(&self, other: &BinaryMask) -> Result<bool> {
        self.geometry.ensure_matches(&other.geometry, "mask disjointness")?;
        Ok(!self.data.iter().zip(&other.data).any(|(&a, &b)| a && b))
    }

    pub fn is_subset(&self, other: &BinaryMask) -> Result<bool> {
        self.geometry.ensure_matches(&other.geometry, "mask inclusion")?;
        Ok(self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b))
    }

    /// Mask as a 0/1 volume.
    pub fn to_volume(&self) -> Volume {
        Volume {
            geometry: self.geometry.clone(),
            data: self.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip() {
        let g = Geometry::unit([3, 4, 5]).unwrap();
        for i in 0..g.len() {
            let [x, y, z] = g.coords(i);
            assert_eq!(g.index(x, y, z), i);
        }
        assert_eq!(g.index(1, 0, 0), 1);
        assert_eq!(g.index(0, 1, 0), 3);
        assert_eq!(g.index(0, 0, 1), 12);
    }

    #[test]
    fn geometry_invariants() {
        assert!(Geometry::unit([0, 1, 1]).is_err());
        assert!(Geometry::with_spacing([2, 2, 2], [1.0, -1.0, 1.0]).is_err());
        let mut affine = *Geometry::unit([2, 2, 2]).unwrap().affine();
        affine[3] = [0.0, 0.0, 1.0, 1.0];
        assert!(Geometry::new([2, 2, 2], [1.0; 3], affine).is_err());

        // A rotated affine whose columns keep the spacing is fine.
        let (s, c) = (0.3f64.sin(), 0.3f64.cos());
        let rotated = [
            [2.0 * c, -s, 0.0, 10.0],
            [2.0 * s, c, 0.0, -4.0],
            [0.0, 0.0, 3.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        assert!(Geometry::new([2, 2, 2], [2.0, 1.0, 3.0], rotated).is_ok());
        assert!(Geometry::new([2, 2, 2], [1.0, 1.0, 3.0], rotated).is_err());
    }

    #[test]
    fn data_length_checked() {
        let g = Geometry::unit([2, 2, 2]).unwrap();
        assert!(Volume::new(g.clone(), vec![0.0; 7]).is_err());
        assert!(BinaryMask::new(g, vec![false; 9]).is_err());
    }

    #[test]
    fn mask_algebra() {
        let g = Geometry::unit([4, 1, 1]).unwrap();
        let a = BinaryMask::new(g.clone(), vec![true, true, false, false]).unwrap();
        let b = BinaryMask::new(g.clone(), vec![false, true, true, false]).unwrap();
        assert_eq!(a.union(&b).unwrap().count(), 3);
        assert_eq!(a.intersection(&b).unwrap().count(), 1);
        assert_eq!(a.difference(&b).unwrap().data(), &[true, false, false, false]);
        assert!(!a.is_disjoint(&b).unwrap());
        assert!(a.intersection(&b).unwrap().is_subset(&a).unwrap());

        let other = BinaryMask::empty(Geometry::unit([2, 2, 1]).unwrap());
        assert!(matches!(a.union(&other), Err(Error::GeometryMismatch(_))));
    }
}
