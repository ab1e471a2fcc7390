use lesionforge::augment::OrthoTransform;
use lesionforge::metrics::{
    consensus, dice, lesion_metrics, wilcoxon_signed_rank, DetectionThresholds, VoxelCounts,
};
use lesionforge::{BinaryMask, Geometry, Volume};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sparse random blobs: seeds grown by a random walk.
fn blobs(geometry: &Geometry, seed: u64, n_blobs: usize, x_max: usize) -> BinaryMask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [_, ny, nz] = geometry.dims();
    let mut m = BinaryMask::empty(geometry.clone());
    for _ in 0..n_blobs {
        let mut p = [rng.random_range(0..x_max), rng.random_range(0..ny), rng.random_range(0..nz)];
        let limits = [x_max, ny, nz];
        for _ in 0..rng.random_range(1..12) {
            m.set(p[0], p[1], p[2], true);
            let axis = rng.random_range(0..3);
            if rng.random_bool(0.5) {
                p[axis] = (p[axis] + 1).min(limits[axis] - 1);
            } else {
                p[axis] = p[axis].saturating_sub(1);
            }
        }
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scores_invariant_under_flips_and_rotations(seed_a: u64, seed_b: u64, sx in 0.6f64..1.5, sz in 0.6f64..3.0) {
        let g = Geometry::with_spacing([7, 6, 5], [sx, 1.0, sz]).unwrap();
        let gt = blobs(&g, seed_a, 3, 7);
        let pred = blobs(&g, seed_b, 3, 7);
        let th = DetectionThresholds::default();
        let base = lesion_metrics(&pred, &gt, &th).unwrap();
        let counts = VoxelCounts::of(&pred, &gt).unwrap();
        for t in OrthoTransform::all() {
            let p = t.apply_mask(&pred).unwrap();
            let q = t.apply_mask(&gt).unwrap();
            let m = lesion_metrics(&p, &q, &th).unwrap();
            prop_assert_eq!(VoxelCounts::of(&p, &q).unwrap(), counts);
            prop_assert_eq!(
                (m.n_gt_lesions, m.n_pred_lesions, m.detected_gt, m.tp_pred),
                (base.n_gt_lesions, base.n_pred_lesions, base.detected_gt, base.tp_pred)
            );
            prop_assert_eq!((m.sensitivity, m.ppv, m.f1), (base.sensitivity, base.ppv, base.f1));
            prop_assert_eq!(&m.flags, &base.flags);
        }
    }

    #[test]
    fn distant_false_positive_never_raises_ppv(seed_a: u64, seed_b: u64) {
        let g = Geometry::unit([20, 8, 8]).unwrap();
        let gt = blobs(&g, seed_a, 3, 10);
        let pred = blobs(&g, seed_b, 3, 10);
        let th = DetectionThresholds::default();
        let before = lesion_metrics(&pred, &gt, &th).unwrap();
        let mut extra = pred.clone();
        for z in 2..4 {
            for y in 2..4 {
                for x in 15..17 {
                    extra.set(x, y, z, true);
                }
            }
        }
        let after = lesion_metrics(&extra, &gt, &th).unwrap();
        prop_assert!(after.ppv <= before.ppv);
        prop_assert_eq!(after.sensitivity, before.sensitivity);
        prop_assert_eq!(after.n_pred_lesions, before.n_pred_lesions + 1);
    }

    #[test]
    fn dice_symmetric_and_bounded(seed_a: u64, seed_b: u64) {
        let g = Geometry::unit([9, 9, 9]).unwrap();
        let a = blobs(&g, seed_a, 4, 9);
        let b = blobs(&g, seed_b, 4, 9);
        let d = dice(&a, &b).unwrap();
        prop_assert_eq!(d, dice(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(dice(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn consensus_is_monotone(seed: u64, n_maps in 1usize..5, t_lo in 0.0f64..1.0, dt in 0.0f64..0.5) {
        let g = Geometry::unit([6, 5, 4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let maps: Vec<Volume> = (0..n_maps)
            .map(|_| Volume::from_fn(g.clone(), |_, _, _| rng.random_range(0.0..=1.0)))
            .collect();
        let refs: Vec<&Volume> = maps.iter().collect();
        let lo = consensus(&refs, t_lo).unwrap();
        let hi = consensus(&refs, (t_lo + dt).min(1.0)).unwrap();
        prop_assert!(hi.is_subset(&lo).unwrap());
        let ones = Volume::filled(g.clone(), 1.0);
        let mut more = refs.clone();
        more.push(&ones);
        prop_assert!(lo.is_subset(&consensus(&more, t_lo).unwrap()).unwrap());
    }

    #[test]
    fn wilcoxon_is_symmetric(values in prop::collection::vec((0i32..20, 0i32..20), 1..40)) {
        let a: Vec<f64> = values.iter().map(|v| v.0 as f64).collect();
        let b: Vec<f64> = values.iter().map(|v| v.1 as f64).collect();
        if a == b {
            return Ok(());
        }
        let ab = wilcoxon_signed_rank(&a, &b).unwrap();
        let ba = wilcoxon_signed_rank(&b, &a).unwrap();
        prop_assert_eq!(ab.p_value, ba.p_value);
        prop_assert_eq!(ab.statistic, ba.statistic);
        prop_assert_eq!((ab.w_plus, ab.w_minus), (ba.w_minus, ba.w_plus));
        prop_assert!(ab.p_value > 0.0 && ab.p_value <= 1.0);
    }
}

#[test]
fn consensus_rejects_out_of_range_probabilities() {
    let g = Geometry::unit([2, 2, 2]).unwrap();
    let bad = Volume::filled(g.clone(), 1.5);
    let ok = Volume::filled(g, 0.5);
    assert!(matches!(
        consensus(&[&ok, &bad], 0.5),
        Err(lesionforge::Error::Domain(_))
    ));
    assert!(consensus(&[], 0.5).is_err());
}
