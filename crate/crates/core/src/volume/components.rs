use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{BinaryMask, Geometry};
use crate::{Error, Result};

/// Voxel adjacency used for connected components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    /// Face neighbours.
    Six,
    /// Face and edge neighbours.
    Eighteen,
    /// Face, edge and corner neighbours.
    #[default]
    TwentySix,
}

impl Connectivity {
    /// Neighbour offsets, excluding the origin.
    pub fn offsets(self) -> Vec<[isize; 3]> {
        let max_nonzero = match self {
            Self::Six => 1,
            Self::Eighteen => 2,
            Self::TwentySix => 3,
        };
        let mut out = Vec::with_capacity(26);
        for dz in -1..=1isize {
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let nonzero = [dx, dy, dz].iter().filter(|&&d| d != 0).count();
                    if nonzero > 0 && nonzero <= max_nonzero {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = String;

    fn try_from(value: u8) -> std::result::Result<Self, String> {
        match value {
            6 => Ok(Self::Six),
            18 => Ok(Self::Eighteen),
            26 => Ok(Self::TwentySix),
            other => Err(format!("connectivity must be 6, 18 or 26, got {other}")),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        match c {
            Connectivity::Six => 6,
            Connectivity::Eighteen => 18,
            Connectivity::TwentySix => 26,
        }
    }
}

/// Connected-component decomposition of a binary mask.
///
/// Labels run from 1 to `count`; 0 is background.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMask {
    geometry: Geometry,
    labels: Vec<u32>,
    count: u32,
    connectivity: Connectivity,
}

impl LabeledMask {
    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn count(&self) -> u32 {
        self.count
    }

    pub fn connectivity(&self) -> Connectivity {
        self.connectivity
    }

    /// Voxel count per label; entry 0 is the background.
    pub fn voxel_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.count as usize + 1];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    pub fn component(&self, label: u32) -> Result<BinaryMask> {
        self.check_label(label)?;
        BinaryMask::new(
            self.geometry.clone(),
            self.labels.iter().map(|&l| l == label).collect(),
        )
    }

    /// Union of all labels.
    pub fn to_binary(&self) -> BinaryMask {
        BinaryMask {
            geometry: self.geometry.clone(),
            data: self.labels.iter().map(|&l| l > 0).collect(),
        }
    }

    /// Union of the labels for which `keep` returns true.
    pub fn select(&self, keep: impl Fn(u32) -> bool) -> BinaryMask {
        BinaryMask {
            geometry: self.geometry.clone(),
            data: self.labels.iter().map(|&l| l > 0 && keep(l)).collect(),
        }
    }

    fn check_label(&self, label: u32) -> Result<()> {
        if label == 0 || label > self.count {
            return Err(Error::Domain(format!(
                "label {label} outside 1..={}",
                self.count
            )));
        }
        Ok(())
    }
}

/// Labels the connected components of `mask`.
///
/// Labels are assigned in order of each component's first voxel in scan
/// order, so the result is deterministic.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> LabeledMask {
    let geometry = mask.geometry().clone();
    let [nx, ny, nz] = geometry.dims();
    let offsets = connectivity.offsets();
    let mut labels = vec![0u32; geometry.len()];
    let mut count = 0u32;
    let mut queue = VecDeque::new();

    for seed in 0..labels.len() {
        if !mask.data[seed] || labels[seed] != 0 {
            continue;
        }
        count += 1;
        labels[seed] = count;
        queue.push_back(seed);
        while let Some(i) = queue.pop_front() {
            let [x, y, z] = geometry.coords(i);
            for [dx, dy, dz] in &offsets {
                let (qx, qy, qz) = (x as isize + dx, y as isize + dy, z as isize + dz);
                if qx < 0
                    || qy < 0
                    || qz < 0
                    || qx >= nx as isize
                    || qy >= ny as isize
                    || qz >= nz as isize
                {
                    continue;
                }
                let j = geometry.index(qx as usize, qy as usize, qz as usize);
                if mask.data[j] && labels[j] == 0 {
                    labels[j] = count;
                    queue.push_back(j);
                }
            }
        }
    }

    LabeledMask {
        geometry,
        labels,
        count,
        connectivity,
    }
}

/// Physical volume (mm³) of one labeled component.
pub fn lesion_volume_mm3(labeled: &LabeledMask, label: u32) -> Result<f64> {
    labeled.check_label(label)?;
    let voxels = labeled.labels.iter().filter(|&&l| l == label).count();
    Ok(voxels as f64 * labeled.geometry.voxel_volume())
}

/// Removes components smaller than `min_mm3`. Components of exactly
/// `min_mm3` are kept.
pub fn filter_small_lesions(
    mask: &BinaryMask,
    min_mm3: f64,
    connectivity: Connectivity,
) -> Result<BinaryMask> {
    if min_mm3.is_nan() || min_mm3 < 0.0 {
        return Err(Error::Parameter(format!("min_mm3 must be >= 0, got {min_mm3}")));
    }
    let labeled = connected_components(mask, connectivity);
    let voxel_volume = labeled.geometry.voxel_volume();
    let keep: Vec<bool> = labeled
        .voxel_counts()
        .iter()
        .map(|&n| n as f64 * voxel_volume >= min_mm3)
        .collect();
    Ok(labeled.select(|l| keep[l as usize]))
}
