use rand::Rng;

use crate::range::Range;
use crate::volume::morphology::dilate;
use crate::{BinaryMask, Error, Geometry, Result, Volume};

/// Rejection-sampling budget per requested site.
pub const ATTEMPTS_PER_SITE: usize = 1000;

/// Regions placed by [`sample_generation_sites`].
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationSites {
    pub regions: Vec<BinaryMask>,
    /// Centre voxel of each region.
    pub centers: Vec<[usize; 3]>,
    /// Requested sites that could not be placed.
    pub shortfall: usize,
}

/// Voxels of the axis-aligned ellipsoid with semi-axes `semi_axes_mm`
/// centred on voxel `center`, or `None` when it does not fit in the grid.
pub fn ellipsoid(geometry: &Geometry, center: [usize; 3], semi_axes_mm: [f64; 3]) -> Option<BinaryMask> {
    let dims = geometry.dims();
    let spacing = geometry.spacing();
    let mut reach = [0usize; 3];
    for a in 0..3 {
        reach[a] = (semi_axes_mm[a] / spacing[a]).floor() as usize;
        if center[a] < reach[a] || center[a] + reach[a] >= dims[a] {
            return None;
        }
    }
    let mut mask = BinaryMask::empty(geometry.clone());
    for z in center[2] - reach[2]..=center[2] + reach[2] {
        for y in center[1] - reach[1]..=center[1] + reach[1] {
            for x in center[0] - reach[0]..=center[0] + reach[0] {
                let r: f64 = [x, y, z]
                    .iter()
                    .enumerate()
                    .map(|(a, &c)| ((c as f64 - center[a] as f64) * spacing[a] / semi_axes_mm[a]).powi(2))
                    .sum();
                if r <= 1.0 {
                    mask.set(x, y, z, true);
                }
            }
        }
    }
    Some(mask)
}

/// Places up to `n` ellipsoidal regions.
///
/// Centres are drawn with probability proportional to `atlas × wm_mask`
/// (a missing atlas counts as uniform, a missing white-matter mask as the
/// whole grid). Semi-axes are drawn per axis from `semi_axes_mm`. A region
/// is accepted when it fits in the grid and keeps at least one voxel of
/// clearance (26-neighbourhood) from `exclusion` and from earlier regions.
pub fn sample_generation_sites<R: Rng + ?Sized>(
    atlas: Option<&Volume>,
    wm_mask: Option<&BinaryMask>,
    exclusion: &BinaryMask,
    n: usize,
    semi_axes_mm: Range,
    rng: &mut R,
) -> Result<GenerationSites> {
    let geometry = exclusion.geometry();
    semi_axes_mm.validate_within("semi_axes_mm", f64::MIN_POSITIVE, f64::MAX)?;
    if let Some(a) = atlas {
        geometry.ensure_matches(a.geometry(), "atlas")?;
        if let Some(i) = a.data().iter().position(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Domain(format!(
                "atlas value {} at voxel {i} is not a finite non-negative weight",
                a.data()[i]
            )));
        }
    }
    if let Some(w) = wm_mask {
        geometry.ensure_matches(w.geometry(), "white-matter mask")?;
    }
    let mut out = GenerationSites {
        regions: Vec::new(),
        centers: Vec::new(),
        shortfall: 0,
    };
    if n == 0 {
        return Ok(out);
    }

    let mut cumulative = Vec::with_capacity(geometry.len());
    let mut total = 0.0;
    for i in 0..geometry.len() {
        let w = atlas.map_or(1.0, |a| a.data()[i]);
        let inside = wm_mask.is_none_or(|m| m.data()[i]);
        if inside {
            total += w;
        }
        cumulative.push(total);
    }
    if total <= 0.0 {
        return Err(Error::NoValidSite(
            "site weights (atlas within white-matter mask) are all zero".into(),
        ));
    }

    let mut blocked = dilate(exclusion, 1);
    for _ in 0..n {
        let mut placed = false;
        for _ in 0..ATTEMPTS_PER_SITE {
            let u = rng.random::<f64>() * total;
            let idx = cumulative.partition_point(|&c| c <= u).min(geometry.len() - 1);
            let center = geometry.coords(idx);
            let axes: [f64; 3] = std::array::from_fn(|_| semi_axes_mm.sample(rng));
            let Some(region) = ellipsoid(geometry, center, axes) else {
                continue;
            };
            if !region.is_disjoint(&blocked)? {
                continue;
            }
            blocked.union_in_place(&dilate(&region, 1))?;
            out.regions.push(region);
            out.centers.push(center);
            placed = true;
            break;
        }
        if !placed {
            out.shortfall += 1;
        }
    }
    if out.shortfall > 0 {
        log::warn!("placed {} of {n} generated lesions", out.regions.len());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{connected_components, filter_small_lesions, morphology::dilate};
    use crate::Connectivity;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(17)
    }

    #[test]
    fn zero_sites() {
        let g = Geometry::unit([8, 8, 8]).unwrap();
        let s = sample_generation_sites(None, None, &BinaryMask::empty(g), 0, Range::new(1.5, 4.0), &mut rng())
            .unwrap();
        assert!(s.regions.is_empty());
    }

    #[test]
    fn centers_stay_in_white_matter() {
        let g = Geometry::unit([24, 24, 24]).unwrap();
        let wm = BinaryMask::from_fn(g.clone(), |x, y, z| {
            (10..15).contains(&x) && (10..15).contains(&y) && (10..15).contains(&z)
        });
        let mut r = rng();
        for _ in 0..20 {
            let s = sample_generation_sites(None, Some(&wm), &BinaryMask::empty(g.clone()), 2, Range::new(1.0, 2.0), &mut r)
                .unwrap();
            for c in &s.centers {
                assert!(wm.get(c[0], c[1], c[2]));
            }
        }
    }

    #[test]
    fn degenerate_atlas_pins_center() {
        let g = Geometry::unit([16, 16, 16]).unwrap();
        let mut atlas = Volume::zeros(g.clone());
        atlas.data_mut()[g.index(7, 8, 9)] = 1.0;
        let mut r = rng();
        for _ in 0..10 {
            let s = sample_generation_sites(Some(&atlas), None, &BinaryMask::empty(g.clone()), 1, Range::new(1.5, 4.0), &mut r)
                .unwrap();
            assert_eq!(s.centers, vec![[7, 8, 9]]);
            assert!(s.regions[0].get(7, 8, 9));
        }
    }

    #[test]
    fn zero_atlas_in_white_matter_is_an_error() {
        let g = Geometry::unit([8, 8, 8]).unwrap();
        let atlas = Volume::from_fn(g.clone(), |x, _, _| if x < 4 { 1.0 } else { 0.0 });
        let wm = BinaryMask::from_fn(g.clone(), |x, _, _| x >= 4);
        let err = sample_generation_sites(Some(&atlas), Some(&wm), &BinaryMask::empty(g), 1, Range::new(1.0, 1.0), &mut rng());
        assert!(matches!(err, Err(Error::NoValidSite(_))));
    }

    #[test]
    fn regions_avoid_exclusion_and_each_other() {
        let g = Geometry::unit([32, 32, 32]).unwrap();
        let exclusion = BinaryMask::from_fn(g.clone(), |x, _, _| x < 12);
        let mut r = rng();
        for _ in 0..10 {
            let s = sample_generation_sites(None, None, &exclusion, 4, Range::new(1.5, 4.0), &mut r).unwrap();
            assert_eq!(s.regions.len() + s.shortfall, 4);
            for (i, a) in s.regions.iter().enumerate() {
                assert!(dilate(a, 1).is_disjoint(&exclusion).unwrap());
                for b in &s.regions[i + 1..] {
                    assert!(dilate(a, 1).is_disjoint(b).unwrap());
                }
            }
        }
    }

    #[test]
    fn exhausted_attempts_report_shortfall() {
        let g = Geometry::unit([5, 5, 5]).unwrap();
        let s = sample_generation_sites(None, None, &BinaryMask::empty(g), 3, Range::new(2.0, 2.0), &mut rng())
            .unwrap();
        assert_eq!(s.regions.len(), 1);
        assert_eq!(s.shortfall, 2);
    }

    #[test]
    fn smallest_ellipsoid_survives_size_filter() {
        let g = Geometry::unit([9, 9, 9]).unwrap();
        let e = ellipsoid(&g, [4, 4, 4], [1.5; 3]).unwrap();
        assert_eq!(e.count(), 19);
        assert_eq!(connected_components(&e, Connectivity::TwentySix).count(), 1);
        assert_eq!(filter_small_lesions(&e, 3.0, Connectivity::TwentySix).unwrap(), e);
        assert!(ellipsoid(&g, [0, 4, 4], [1.5; 3]).is_none());
    }
}
