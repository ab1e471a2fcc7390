use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::filter::gaussian_blur;
use crate::volume::morphology::{bounding_box, chessboard_distance, dilate, expand_box, FAR};
use crate::{BinaryMask, Error, Result, Volume};

/// Voxels beyond the region that an edit may touch (chessboard distance).
pub const BLEND_MARGIN: u8 = 2;

/// Width of the context ring used for intensity statistics.
pub const RING_WIDTH: u8 = 3;

/// Smoothing applied to inpainted noise, in voxels.
pub const INPAINT_SMOOTHING_SD: f64 = 0.8;

/// Brightness factor range for generated lesions.
pub const GENERATE_FACTOR: (f64, f64) = (1.2, 1.8);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditMode {
    Inpaint,
    Generate,
}

/// Replaces lesions with healthy-looking tissue or paints new ones.
///
/// `context_exclusion` marks voxels (typically other lesions) that must not
/// be used as healthy context. Implementations are deterministic in `seed`.
/// Callers restore every voxel farther than [`BLEND_MARGIN`] from the
/// region, so edits outside it have no effect.
pub trait LesionEditor: Send + Sync {
    fn edit(
        &self,
        mode: EditMode,
        volume: &Volume,
        region: &BinaryMask,
        context_exclusion: &BinaryMask,
        seed: u64,
    ) -> Result<Volume>;

    /// Short name recorded in provenance.
    fn name(&self) -> String;
}

/// Non-learned reference editor: ring statistics plus smooth blending.
#[derive(Debug, Clone, Copy, Default)]
pub struct BaselineEditor;

impl LesionEditor for BaselineEditor {
    fn edit(
        &self,
        mode: EditMode,
        volume: &Volume,
        region: &BinaryMask,
        context_exclusion: &BinaryMask,
        seed: u64,
    ) -> Result<Volume> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match mode {
            EditMode::Inpaint => baseline_inpaint(volume, region, Some(context_exclusion), &mut rng),
            EditMode::Generate => baseline_generate(volume, region, Some(context_exclusion), &mut rng),
        }
    }

    fn name(&self) -> String {
        "baseline".into()
    }
}

/// Copies `edited` into `original` only within `region` dilated by
/// [`BLEND_MARGIN`].
pub fn restrict_to_margin(original: &Volume, edited: &Volume, region: &BinaryMask) -> Result<Volume> {
    original.geometry().ensure_matches(edited.geometry(), "edited volume")?;
    let zone = dilate(region, BLEND_MARGIN);
    let data = original
        .data()
        .iter()
        .zip(edited.data())
        .zip(zone.data())
        .map(|((&o, &e), &z)| if z { e } else { o })
        .collect();
    original.with_data(data)
}

fn check_inputs(volume: &Volume, region: &BinaryMask, exclusion: Option<&BinaryMask>) -> Result<()> {
    volume.geometry().ensure_matches(region.geometry(), "edit region")?;
    if let Some(e) = exclusion {
        volume.geometry().ensure_matches(e.geometry(), "context exclusion")?;
    }
    if region.is_empty() {
        return Err(Error::Parameter("edit region is empty".into()));
    }
    volume.ensure_finite()
}

/// Mean and population SD of the ring around `region`.
fn ring_stats(volume: &Volume, region: &BinaryMask, exclusion: Option<&BinaryMask>) -> Result<(f64, f64)> {
    let ring = dilate(region, RING_WIDTH);
    let values: Vec<f64> = (0..volume.data().len())
        .filter(|&i| ring.data()[i] && !region.data()[i] && !exclusion.is_some_and(|e| e.data()[i]))
        .map(|i| volume.data()[i])
        .collect();
    if values.is_empty() {
        return Err(Error::InsufficientContext(
            "no healthy voxels in the ring around the region".into(),
        ));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

/// Blend weight by chessboard distance to the region: 1 inside, falling
/// linearly to 0 at `BLEND_MARGIN + 1`.
fn blend_weights(region: &BinaryMask) -> Vec<f64> {
    chessboard_distance(region, BLEND_MARGIN)
        .into_iter()
        .map(|d| {
            if d == FAR {
                0.0
            } else {
                1.0 - d as f64 / (BLEND_MARGIN as f64 + 1.0)
            }
        })
        .collect()
}

/// Fills `region` with ring-matched Gaussian noise, smooths it and blends
/// it into the surroundings over [`BLEND_MARGIN`] voxels.
pub fn baseline_inpaint<R: Rng + ?Sized>(
    volume: &Volume,
    region: &BinaryMask,
    context_exclusion: Option<&BinaryMask>,
    rng: &mut R,
) -> Result<Volume> {
    check_inputs(volume, region, context_exclusion)?;
    let (mean, sd) = ring_stats(volume, region, context_exclusion)?;
    let geometry = volume.geometry();

    // Smooth on a crop large enough that every blended voxel sees its full kernel.
    let bbox = bounding_box(region).expect("non-empty region");
    let radius = (4.0 * INPAINT_SMOOTHING_SD + 0.5) as usize;
    let (lo, hi) = expand_box(geometry, bbox, BLEND_MARGIN as usize + radius);
    let crop_dims: [usize; 3] = std::array::from_fn(|a| hi[a] - lo[a] + 1);
    let mut crop = Vec::with_capacity(crop_dims.iter().product());
    for z in lo[2]..=hi[2] {
        for y in lo[1]..=hi[1] {
            for x in lo[0]..=hi[0] {
                let i = geometry.index(x, y, z);
                crop.push(if region.data()[i] {
                    let n: f64 = rng.sample(StandardNormal);
                    mean + sd * n
                } else {
                    volume.data()[i]
                });
            }
        }
    }
    let smoothed = gaussian_blur(&crop, crop_dims, INPAINT_SMOOTHING_SD);

    let weights = blend_weights(region);
    let mut out = volume.data().to_vec();
    let mut k = 0;
    for z in lo[2]..=hi[2] {
        for y in lo[1]..=hi[1] {
            for x in lo[0]..=hi[0] {
                let i = geometry.index(x, y, z);
                let w = weights[i];
                if w > 0.0 {
                    out[i] = w * smoothed[k] + (1.0 - w) * out[i];
                }
                k += 1;
            }
        }
    }
    volume.with_data(out)
}

/// Raises `region` towards `ring_mean + (factor - 1) |ring_mean|` with
/// `factor` uniform in [`GENERATE_FACTOR`], fading out over
/// [`BLEND_MARGIN`] voxels.
pub fn baseline_generate<R: Rng + ?Sized>(
    volume: &Volume,
    region: &BinaryMask,
    context_exclusion: Option<&BinaryMask>,
    rng: &mut R,
) -> Result<Volume> {
    check_inputs(volume, region, context_exclusion)?;
    let (mean, _) = ring_stats(volume, region, context_exclusion)?;
    let factor = rng.random_range(GENERATE_FACTOR.0..=GENERATE_FACTOR.1);
    let target = mean + (factor - 1.0) * mean.abs();
    let weights = blend_weights(region);
    let data = volume
        .data()
        .iter()
        .zip(&weights)
        .map(|(&v, &w)| if w > 0.0 { (1.0 - w) * v + w * target } else { v })
        .collect();
    volume.with_data(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::sites::ellipsoid;
    use crate::Geometry;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(4)
    }

    fn ball(g: &Geometry, c: [usize; 3], r: f64) -> BinaryMask {
        ellipsoid(g, c, [r; 3]).unwrap()
    }

    fn outside_identical(a: &Volume, b: &Volume, region: &BinaryMask) {
        let zone = dilate(region, BLEND_MARGIN);
        for i in 0..a.data().len() {
            if !zone.data()[i] {
                assert_eq!(a.data()[i].to_bits(), b.data()[i].to_bits(), "voxel {i}");
            }
        }
    }

    #[test]
    fn constant_context_inpaints_constant() {
        let g = Geometry::unit([16, 16, 16]).unwrap();
        let v = Volume::filled(g.clone(), 3.25);
        let region = ball(&g, [8, 8, 8], 3.0);
        let out = baseline_inpaint(&v, &region, None, &mut rng()).unwrap();
        for &x in out.data() {
            assert!((x - 3.25).abs() < 1e-6);
        }
    }

    #[test]
    fn inpaint_removes_blob_locally() {
        let g = Geometry::unit([24, 24, 24]).unwrap();
        let region = ball(&g, [12, 12, 12], 3.0);
        let v = Volume::from_fn(g.clone(), |x, y, z| {
            let base = 100.0 + 0.5 * x as f64 + 0.3 * y as f64 - 0.2 * z as f64;
            if region.get(x, y, z) {
                base + 80.0
            } else {
                base
            }
        });
        let out = baseline_inpaint(&v, &region, None, &mut rng()).unwrap();
        outside_identical(&v, &out, &region);
        let (ring_mean, ring_sd) = ring_stats(&v, &region, None).unwrap();
        let vals: Vec<f64> = region.indices().map(|i| out.data()[i]).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        assert!((mean - ring_mean).abs() <= ring_sd, "{mean} vs {ring_mean} ± {ring_sd}");
        let before = region.indices().map(|i| v.data()[i]).fold(f64::MIN, f64::max);
        let after = vals.iter().copied().fold(f64::MIN, f64::max);
        assert!(after < before);
    }

    #[test]
    fn exclusion_and_insufficient_context() {
        let g = Geometry::unit([5, 5, 5]).unwrap();
        let v = Volume::filled(g.clone(), 1.0);
        let region = ball(&g, [2, 2, 2], 1.0);
        let everything = BinaryMask::full(g.clone());
        let err = baseline_inpaint(&v, &region, Some(&everything), &mut rng());
        assert!(matches!(err, Err(Error::InsufficientContext(_))));
        let err = baseline_generate(&v, &BinaryMask::empty(g), None, &mut rng());
        assert!(matches!(err, Err(Error::Parameter(_))));
    }

    #[test]
    fn generate_is_hyperintense_and_local() {
        let g = Geometry::unit([20, 20, 20]).unwrap();
        let v = Volume::from_fn(g.clone(), |x, y, z| 50.0 + ((x * 7 + y * 3 + z) % 5) as f64);
        let region = ball(&g, [10, 9, 11], 2.0);
        let out = baseline_generate(&v, &region, None, &mut rng()).unwrap();
        outside_identical(&v, &out, &region);
        let (ring_mean, _) = ring_stats(&out, &region, None).unwrap();
        let n = region.count() as f64;
        let mean = region.indices().map(|i| out.data()[i]).sum::<f64>() / n;
        assert!(mean > ring_mean);
    }

    #[test]
    fn baseline_editor_is_seed_deterministic() {
        let g = Geometry::unit([12, 12, 12]).unwrap();
        let v = Volume::from_fn(g.clone(), |x, y, z| (x + 2 * y + 3 * z) as f64);
        let region = ball(&g, [6, 6, 6], 2.0);
        let none = BinaryMask::empty(g);
        let a = BaselineEditor.edit(EditMode::Inpaint, &v, &region, &none, 7).unwrap();
        let b = BaselineEditor.edit(EditMode::Inpaint, &v, &region, &none, 7).unwrap();
        let c = BaselineEditor.edit(EditMode::Inpaint, &v, &region, &none, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn margin_restriction() {
        let g = Geometry::unit([9, 1, 1]).unwrap();
        let v = Volume::zeros(g.clone());
        let e = Volume::filled(g.clone(), 1.0);
        let mut region = BinaryMask::empty(g);
        region.set(4, 0, 0, true);
        let r = restrict_to_margin(&v, &e, &region).unwrap();
        assert_eq!(r.data(), &[0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
    }
}
