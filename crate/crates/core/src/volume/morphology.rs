//! Small morphology helpers on binary masks.

use std::collections::VecDeque;

use super::{BinaryMask, Connectivity, Geometry};

/// Marker for voxels farther than the requested maximum distance.
pub const FAR: u8 = u8::MAX;

/// Chessboard (L∞) distance from every voxel to the mask, capped at
/// `max_distance`. Mask voxels get 0, voxels beyond the cap get [`FAR`].
pub fn chessboard_distance(mask: &BinaryMask, max_distance: u8) -> Vec<u8> {
    let geometry = mask.geometry();
    let [nx, ny, nz] = geometry.dims();
    let mut dist = vec![FAR; geometry.len()];
    let mut queue = VecDeque::new();
    for i in mask.indices() {
        dist[i] = 0;
        queue.push_back(i);
    }
    let offsets = Connectivity::TwentySix.offsets();
    while let Some(i) = queue.pop_front() {
        let d = dist[i];
        if d >= max_distance {
            continue;
        }
        let [x, y, z] = geometry.coords(i);
        for [dx, dy, dz] in &offsets {
            let (qx, qy, qz) = (x as isize + dx, y as isize + dy, z as isize + dz);
            if qx < 0 || qy < 0 || qz < 0 || qx >= nx as isize || qy >= ny as isize || qz >= nz as isize
            {
                continue;
            }
            let j = geometry.index(qx as usize, qy as usize, qz as usize);
            if dist[j] == FAR {
                dist[j] = d + 1;
                queue.push_back(j);
            }
        }
    }
    dist
}

/// Dilation by a cube of half-width `radius`.
pub fn dilate(mask: &BinaryMask, radius: u8) -> BinaryMask {
    let dist = chessboard_distance(mask, radius);
    BinaryMask::from_fn(mask.geometry().clone(), |x, y, z| {
        dist[mask.geometry().index(x, y, z)] != FAR
    })
}

/// Inclusive bounding box `(lo, hi)` of the mask, or `None` when empty.
pub fn bounding_box(mask: &BinaryMask) -> Option<([usize; 3], [usize; 3])> {
    let geometry = mask.geometry();
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    let mut any = false;
    for i in mask.indices() {
        any = true;
        let c = geometry.coords(i);
        for a in 0..3 {
            lo[a] = lo[a].min(c[a]);
            hi[a] = hi[a].max(c[a]);
        }
    }
    any.then_some((lo, hi))
}

/// Grows an inclusive box by `margin` voxels, clamped to the grid.
pub fn expand_box(
    geometry: &Geometry,
    (lo, hi): ([usize; 3], [usize; 3]),
    margin: usize,
) -> ([usize; 3], [usize; 3]) {
    let dims = geometry.dims();
    let mut out_lo = [0; 3];
    let mut out_hi = [0; 3];
    for a in 0..3 {
        out_lo[a] = lo[a].saturating_sub(margin);
        out_hi[a] = (hi[a] + margin).min(dims[a] - 1);
    }
    (out_lo, out_hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_is_chessboard() {
        let g = Geometry::unit([9, 9, 9]).unwrap();
        let mut m = BinaryMask::empty(g.clone());
        m.set(4, 4, 4, true);
        let d = chessboard_distance(&m, 3);
        assert_eq!(d[g.index(4, 4, 4)], 0);
        assert_eq!(d[g.index(5, 5, 5)], 1);
        assert_eq!(d[g.index(6, 4, 2)], 2);
        assert_eq!(d[g.index(7, 4, 4)], 3);
        assert_eq!(d[g.index(8, 4, 4)], FAR);
        assert_eq!(dilate(&m, 1).count(), 27);
        assert_eq!(dilate(&m, 2).count(), 125);
    }

    #[test]
    fn boxes() {
        let g = Geometry::unit([5, 5, 5]).unwrap();
        let mut m = BinaryMask::empty(g.clone());
        assert!(bounding_box(&m).is_none());
        m.set(1, 2, 3, true);
        m.set(3, 2, 0, true);
        let bb = bounding_box(&m).unwrap();
        assert_eq!(bb, ([1, 2, 0], [3, 2, 3]));
        assert_eq!(expand_box(&g, bb, 2), ([0, 0, 0], [4, 4, 4]));
    }
}
