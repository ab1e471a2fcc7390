//! Synthetic longitudinal pairs with a known new-lesion mask.
//!
//! From one scan and its lesion mask, [`synthesize_pair`] builds two time
//! points:
//!
//! 1. a random flip/rotation is applied to scan, mask and priors; the scan
//!    is duplicated and each copy gets its own augmentation plan;
//! 2. every lesion component receives a [`LesionFate`] and is inpainted
//!    from the time points it is removed from;
//! 3. new ellipsoidal lesions are painted into the second time point only
//!    or into both.
//!
//! The new-lesion mask is the union of lesions removed from the first time
//! point only and of lesions generated in the second time point only.

mod editor;
mod external;
mod sites;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{apply_plan, sample_plan, AugmentationPlan, OrthoTransform, SamplingPolicy};
use crate::range::{IntRange, Range};
use crate::volume::morphology::dilate;
use crate::volume::{connected_components, save_mask, save_volume, DataType};
use crate::{BinaryMask, Connectivity, Error, LabeledMask, Result, Volume};

pub use editor::{
    baseline_generate, baseline_inpaint, restrict_to_margin, BaselineEditor, EditMode, LesionEditor,
    BLEND_MARGIN, GENERATE_FACTOR, INPAINT_SMOOTHING_SD, RING_WIDTH,
};
pub use external::{
    external_editor, serve_request, write_request, EditRequest, EditorDescriptor, ExternalEditor,
    DEFAULT_TIMEOUT_SECS, SCRATCH_ENV,
};
pub use sites::{ellipsoid, sample_generation_sites, GenerationSites, ATTEMPTS_PER_SITE};

/// What happens to one existing lesion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LesionFate {
    KeepBoth,
    /// Absent from the first time point: a new lesion.
    RemoveT1,
    /// Absent from the second time point: a disappearing lesion.
    RemoveT2,
    RemoveBoth,
}

impl LesionFate {
    pub const ALL: [LesionFate; 4] = [
        LesionFate::KeepBoth,
        LesionFate::RemoveT1,
        LesionFate::RemoveT2,
        LesionFate::RemoveBoth,
    ];

    pub fn present_in_t1(self) -> bool {
        matches!(self, Self::KeepBoth | Self::RemoveT2)
    }

    pub fn present_in_t2(self) -> bool {
        matches!(self, Self::KeepBoth | Self::RemoveT1)
    }
}

/// Time points a generated lesion is painted into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    T2Only,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FateProbabilities {
    pub keep_both: f64,
    pub remove_t1: f64,
    pub remove_t2: f64,
    pub remove_both: f64,
}

impl Default for FateProbabilities {
    fn default() -> Self {
        Self {
            keep_both: 0.25,
            remove_t1: 0.25,
            remove_t2: 0.25,
            remove_both: 0.25,
        }
    }
}

impl FateProbabilities {
    /// All mass on one fate.
    pub fn only(fate: LesionFate) -> Self {
        let mut p = Self {
            keep_both: 0.0,
            remove_t1: 0.0,
            remove_t2: 0.0,
            remove_both: 0.0,
        };
        *p.get_mut(fate) = 1.0;
        p
    }

    pub fn get(&self, fate: LesionFate) -> f64 {
        match fate {
            LesionFate::KeepBoth => self.keep_both,
            LesionFate::RemoveT1 => self.remove_t1,
            LesionFate::RemoveT2 => self.remove_t2,
            LesionFate::RemoveBoth => self.remove_both,
        }
    }

    fn get_mut(&mut self, fate: LesionFate) -> &mut f64 {
        match fate {
            LesionFate::KeepBoth => &mut self.keep_both,
            LesionFate::RemoveT1 => &mut self.remove_t1,
            LesionFate::RemoveT2 => &mut self.remove_t2,
            LesionFate::RemoveBoth => &mut self.remove_both,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let values = LesionFate::ALL.map(|f| self.get(f));
        if values.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Parameter(format!("fate probabilities must lie in [0, 1]: {values:?}")));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter(format!("fate probabilities sum to {sum}, not 1")));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> LesionFate {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for fate in LesionFate::ALL {
            acc += self.get(fate);
            if u < acc {
                return fate;
            }
        }
        // Rounding can leave `acc` just below 1; use the last fate with mass.
        *LesionFate::ALL
            .iter()
            .rev()
            .find(|f| self.get(**f) > 0.0)
            .expect("probabilities sum to 1")
    }
}

/// Parameters of pair synthesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisPolicy {
    pub fates: FateProbabilities,
    /// Number of generated lesions per pair.
    pub n_generated: IntRange,
    /// Probability that a generated lesion appears in the second time
    /// point only (otherwise in both).
    pub p_t2_only: f64,
    /// Ellipsoid semi-axis range, per axis, in mm.
    pub semi_axes_mm: Range,
    /// Apply a random flip/rotation before anything else.
    pub flip_rotate: bool,
    /// Per-copy augmentation; `None` disables it.
    pub augmentation: Option<SamplingPolicy>,
    /// Adjacency used to split the lesion mask into lesions.
    pub connectivity: Connectivity,
}

impl Default for SynthesisPolicy {
    fn default() -> Self {
        Self {
            fates: FateProbabilities::default(),
            n_generated: IntRange::new(0, 3),
            p_t2_only: 0.5,
            semi_axes_mm: Range::new(1.5, 4.0),
            flip_rotate: true,
            augmentation: Some(SamplingPolicy::default()),
            connectivity: Connectivity::TwentySix,
        }
    }
}

impl SynthesisPolicy {
    pub fn validate(&self) -> Result<()> {
        self.fates.validate()?;
        self.n_generated.validate("n_generated")?;
        if !(0.0..=1.0).contains(&self.p_t2_only) {
            return Err(Error::Parameter(format!("p_t2_only must be in [0, 1], got {}", self.p_t2_only)));
        }
        self.semi_axes_mm
            .validate_within("semi_axes_mm", f64::MIN_POSITIVE, f64::MAX)?;
        if let Some(aug) = &self.augmentation {
            aug.validate()?;
        }
        Ok(())
    }
}

/// Draws one fate per label, in label order.
pub fn assign_fates<R: Rng + ?Sized>(
    labeled: &LabeledMask,
    fates: &FateProbabilities,
    rng: &mut R,
) -> Result<BTreeMap<u32, LesionFate>> {
    fates.validate()?;
    Ok((1..=labeled.count()).map(|l| (l, fates.sample(rng))).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedRegion {
    pub mask: BinaryMask,
    pub center: [usize; 3],
    pub placement: Placement,
}

/// Output of [`synthesize_pair`].
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPair {
    pub t1: Volume,
    pub t2: Volume,
    pub new_lesion_mask: BinaryMask,
    /// Lesion components of the (transformed) input mask.
    pub lesions: LabeledMask,
    pub fate_ledger: BTreeMap<u32, LesionFate>,
    pub generated: Vec<GeneratedRegion>,
    /// Generated lesions requested but not placed.
    pub shortfall: usize,
    pub transform: OrthoTransform,
    pub plan1: AugmentationPlan,
    pub plan2: AugmentationPlan,
}

impl SyntheticPair {
    fn lesions_where(&self, fate: impl Fn(LesionFate) -> bool) -> BinaryMask {
        self.lesions.select(|l| self.fate_ledger.get(&l).is_some_and(|f| fate(*f)))
    }

    fn generated_where(&self, placement: impl Fn(Placement) -> bool) -> Result<BinaryMask> {
        let mut out = BinaryMask::empty(self.t1.geometry().clone());
        for g in self.generated.iter().filter(|g| placement(g.placement)) {
            out.union_in_place(&g.mask)?;
        }
        Ok(out)
    }

    /// Lesion support of the first time point.
    pub fn t1_lesion_mask(&self) -> Result<BinaryMask> {
        self.lesions_where(LesionFate::present_in_t1)
            .union(&self.generated_where(|p| p == Placement::Both)?)
    }

    /// Lesion support of the second time point.
    pub fn t2_lesion_mask(&self) -> Result<BinaryMask> {
        self.lesions_where(LesionFate::present_in_t2)
            .union(&self.generated_where(|_| true)?)
    }

    /// Every voxel an editor may have changed: all inpainted and generated
    /// regions dilated by [`BLEND_MARGIN`].
    pub fn edit_zone(&self) -> Result<BinaryMask> {
        let edited = self
            .lesions_where(|f| f != LesionFate::KeepBoth)
            .union(&self.generated_where(|_| true)?)?;
        Ok(dilate(&edited, BLEND_MARGIN))
    }

    /// Checks the mask algebra and geometry invariants.
    pub fn validate(&self) -> Result<()> {
        let g = self.t1.geometry();
        for (what, other) in [
            ("t2", self.t2.geometry()),
            ("new-lesion mask", self.new_lesion_mask.geometry()),
            ("lesion labels", self.lesions.geometry()),
        ] {
            if other != g {
                return Err(Error::Invariant(format!("{what} geometry differs from t1")));
            }
        }
        if self.fate_ledger.len() != self.lesions.count() as usize {
            return Err(Error::Invariant("fate ledger does not cover every lesion".into()));
        }
        let expected = self
            .lesions_where(|f| f == LesionFate::RemoveT1)
            .union(&self.generated_where(|p| p == Placement::T2Only)?)?;
        if expected != self.new_lesion_mask {
            return Err(Error::Invariant(
                "new-lesion mask differs from removed-in-t1 lesions plus t2-only generated lesions".into(),
            ));
        }
        let others = self
            .lesions_where(|f| f != LesionFate::RemoveT1)
            .union(&self.generated_where(|p| p == Placement::Both)?)?;
        if !self.new_lesion_mask.is_disjoint(&others)? {
            return Err(Error::Invariant("new-lesion mask overlaps a non-new lesion".into()));
        }
        if !self.new_lesion_mask.is_subset(&self.t2_lesion_mask()?)? {
            return Err(Error::Invariant("new-lesion mask is not part of the t2 lesions".into()));
        }
        let original = self.lesions.to_binary();
        for (k, a) in self.generated.iter().enumerate() {
            if !a.mask.is_disjoint(&original)? {
                return Err(Error::Invariant(format!("generated lesion {k} overlaps an original lesion")));
            }
            for b in &self.generated[k + 1..] {
                if !a.mask.is_disjoint(&b.mask)? {
                    return Err(Error::Invariant(format!("generated lesion {k} overlaps another")));
                }
            }
        }
        Ok(())
    }

    /// Checks that t1 and t2 agree outside [`Self::edit_zone`]. Only
    /// meaningful when both plans are empty.
    pub fn validate_locality(&self) -> Result<()> {
        let zone = self.edit_zone()?;
        let differing = self
            .t1
            .data()
            .iter()
            .zip(self.t2.data())
            .zip(zone.data())
            .position(|((a, b), &z)| !z && a.to_bits() != b.to_bits());
        match differing {
            Some(i) => Err(Error::Invariant(format!(
                "t1 and t2 differ at voxel {:?} outside the edit zone",
                self.t1.geometry().coords(i)
            ))),
            None => Ok(()),
        }
    }
}

fn edit(
    editor: &dyn LesionEditor,
    mode: EditMode,
    volume: &Volume,
    region: &BinaryMask,
    exclusion: &BinaryMask,
    seed: u64,
) -> Result<Volume> {
    let edited = editor.edit(mode, volume, region, exclusion, seed)?;
    edited.ensure_finite()?;
    restrict_to_margin(volume, &edited, region)
}

/// Builds one synthetic pair. See the module docs for the steps.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_pair<R: Rng + ?Sized>(
    patch: &Volume,
    lesion_mask: &BinaryMask,
    editor: &dyn LesionEditor,
    policy: &SynthesisPolicy,
    atlas: Option<&Volume>,
    wm_mask: Option<&BinaryMask>,
    rng: &mut R,
) -> Result<SyntheticPair> {
    policy.validate()?;
    let geometry = patch.geometry();
    geometry.ensure_matches(lesion_mask.geometry(), "lesion mask")?;
    if let Some(a) = atlas {
        geometry.ensure_matches(a.geometry(), "atlas")?;
    }
    if let Some(w) = wm_mask {
        geometry.ensure_matches(w.geometry(), "white-matter mask")?;
    }
    patch.ensure_finite()?;

    // 1. flip/rotate, duplicate, augment each copy
    let transform = if policy.flip_rotate {
        OrthoTransform::sample(rng)
    } else {
        OrthoTransform::IDENTITY
    };
    let patch = transform.apply_volume(patch)?;
    let lesion_mask = transform.apply_mask(lesion_mask)?;
    let atlas = atlas.map(|a| transform.apply_volume(a)).transpose()?;
    let wm_mask = wm_mask.map(|m| transform.apply_mask(m)).transpose()?;
    let (plan1, plan2) = match &policy.augmentation {
        Some(aug) => (sample_plan(aug, rng)?, sample_plan(aug, rng)?),
        None => (AugmentationPlan::empty(rng.random()), AugmentationPlan::empty(rng.random())),
    };
    let mut t1 = apply_plan(&patch, &plan1)?;
    let mut t2 = apply_plan(&patch, &plan2)?;

    // 2. fates and inpainting
    let lesions = connected_components(&lesion_mask, policy.connectivity);
    let fate_ledger = assign_fates(&lesions, &policy.fates, rng)?;
    for (&label, &fate) in &fate_ledger {
        let seed: u64 = rng.random();
        if fate == LesionFate::KeepBoth {
            continue;
        }
        let region = lesions.component(label)?;
        let others = lesion_mask.difference(&region)?;
        if !fate.present_in_t1() {
            t1 = edit(editor, EditMode::Inpaint, &t1, &region, &others, seed)?;
        }
        if !fate.present_in_t2() {
            t2 = edit(editor, EditMode::Inpaint, &t2, &region, &others, seed)?;
        }
    }

    // 3. generated lesions
    let n = policy.n_generated.sample(rng);
    let sites = sample_generation_sites(
        atlas.as_ref(),
        wm_mask.as_ref(),
        &lesion_mask,
        n,
        policy.semi_axes_mm,
        rng,
    )?;
    let mut occupied = lesion_mask.clone();
    for region in &sites.regions {
        occupied.union_in_place(region)?;
    }
    let mut generated = Vec::with_capacity(sites.regions.len());
    let mut new_lesion_mask = lesions.select(|l| fate_ledger[&l] == LesionFate::RemoveT1);
    for (region, center) in sites.regions.into_iter().zip(sites.centers) {
        let placement = if rng.random_bool(policy.p_t2_only) {
            Placement::T2Only
        } else {
            Placement::Both
        };
        let seed: u64 = rng.random();
        let context = occupied.difference(&region)?;
        t2 = edit(editor, EditMode::Generate, &t2, &region, &context, seed)?;
        if placement == Placement::Both {
            t1 = edit(editor, EditMode::Generate, &t1, &region, &context, seed)?;
        } else {
            new_lesion_mask.union_in_place(&region)?;
        }
        generated.push(GeneratedRegion {
            mask: region,
            center,
            placement,
        });
    }

    let pair = SyntheticPair {
        t1,
        t2,
        new_lesion_mask,
        lesions,
        fate_ledger,
        generated,
        shortfall: sites.shortfall,
        transform,
        plan1,
        plan2,
    };
    pair.validate()?;
    Ok(pair)
}

/// Summary of a generated lesion for provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedRecord {
    pub center: [usize; 3],
    pub voxels: usize,
    pub placement: Placement,
}

/// Everything needed to understand and replay a saved pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub case_id: String,
    pub pair_index: usize,
    /// Seed of the generator passed to [`synthesize_pair`].
    pub seed: u64,
    pub editor: String,
    pub policy: SynthesisPolicy,
    pub transform: OrthoTransform,
    pub fate_ledger: BTreeMap<u32, LesionFate>,
    pub generated: Vec<GeneratedRecord>,
    pub shortfall: usize,
    pub plan1: AugmentationPlan,
    pub plan2: AugmentationPlan,
}

impl Provenance {
    pub fn new(
        pair: &SyntheticPair,
        case_id: impl Into<String>,
        pair_index: usize,
        seed: u64,
        editor: impl Into<String>,
        policy: &SynthesisPolicy,
    ) -> Self {
        Self {
            case_id: case_id.into(),
            pair_index,
            seed,
            editor: editor.into(),
            policy: policy.clone(),
            transform: pair.transform,
            fate_ledger: pair.fate_ledger.clone(),
            generated: pair
                .generated
                .iter()
                .map(|g| GeneratedRecord {
                    center: g.center,
                    voxels: g.mask.count(),
                    placement: g.placement,
                })
                .collect(),
            shortfall: pair.shortfall,
            plan1: pair.plan1.clone(),
            plan2: pair.plan2.clone(),
        }
    }
}

/// File names inside a pair directory.
pub const PAIR_FILES: [&str; 4] = ["t1.nii.gz", "t2.nii.gz", "new_lesions.nii.gz", "provenance.json"];

/// Writes `t1.nii.gz`, `t2.nii.gz` (float32), `new_lesions.nii.gz` (uint8)
/// and `provenance.json` into `dir`.
pub fn save_pair(pair: &SyntheticPair, provenance: &Provenance, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    save_volume(&pair.t1, dir.join(PAIR_FILES[0]), DataType::Float32)?;
    save_volume(&pair.t2, dir.join(PAIR_FILES[1]), DataType::Float32)?;
    save_mask(&pair.new_lesion_mask, dir.join(PAIR_FILES[2]))?;
    let mut json = serde_json::to_vec_pretty(provenance)?;
    json.push(b'\n');
    fs::write(dir.join(PAIR_FILES[3]), json)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Geometry;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixture() -> (Volume, BinaryMask) {
        let g = Geometry::unit([24, 24, 24]).unwrap();
        let mut mask = BinaryMask::empty(g.clone());
        for c in [[6usize, 6, 6], [16, 16, 16], [6, 17, 12]] {
            mask.union_in_place(&ellipsoid(&g, c, [2.0; 3]).unwrap()).unwrap();
        }
        let v = Volume::from_fn(g, |x, y, z| {
            let base = 100.0 + ((x * 13 + y * 7 + z * 3) % 11) as f64;
            if mask.get(x, y, z) {
                base + 60.0
            } else {
                base
            }
        });
        (v, mask)
    }

    fn quiet_policy() -> SynthesisPolicy {
        SynthesisPolicy {
            augmentation: None,
            ..Default::default()
        }
    }

    #[test]
    fn fates_degenerate_and_empty() {
        let (_, mask) = fixture();
        let labeled = connected_components(&mask, Connectivity::TwentySix);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ledger = assign_fates(&labeled, &FateProbabilities::only(LesionFate::KeepBoth), &mut rng).unwrap();
        assert_eq!(ledger.len(), 3);
        assert!(ledger.values().all(|f| *f == LesionFate::KeepBoth));
        let empty = connected_components(&BinaryMask::empty(mask.geometry().clone()), Connectivity::TwentySix);
        assert!(assign_fates(&empty, &FateProbabilities::default(), &mut rng).unwrap().is_empty());
        let bad = FateProbabilities {
            keep_both: 0.5,
            ..FateProbabilities::default()
        };
        assert!(assign_fates(&labeled, &bad, &mut rng).is_err());
    }

    #[test]
    fn keep_all_without_generation_gives_empty_mask() {
        let (v, mask) = fixture();
        let policy = SynthesisPolicy {
            fates: FateProbabilities::only(LesionFate::KeepBoth),
            n_generated: IntRange::new(0, 0),
            ..quiet_policy()
        };
        let pair = synthesize_pair(&v, &mask, &BaselineEditor, &policy, None, None, &mut ChaCha8Rng::seed_from_u64(2))
            .unwrap();
        assert!(pair.new_lesion_mask.is_empty());
        assert_eq!(pair.t1, pair.t2);
    }

    #[test]
    fn single_lesion_removed_from_t1() {
        let g = Geometry::unit([20, 20, 20]).unwrap();
        let mask = ellipsoid(&g, [10, 10, 10], [2.5; 3]).unwrap();
        let v = Volume::from_fn(g, |x, y, z| if mask.get(x, y, z) { 200.0 } else { 100.0 + (x % 3) as f64 });
        let policy = SynthesisPolicy {
            fates: FateProbabilities::only(LesionFate::RemoveT1),
            n_generated: IntRange::new(0, 0),
            flip_rotate: false,
            ..quiet_policy()
        };
        let pair = synthesize_pair(&v, &mask, &BaselineEditor, &policy, None, None, &mut ChaCha8Rng::seed_from_u64(3))
            .unwrap();
        assert_eq!(pair.new_lesion_mask, mask);
        assert_eq!(pair.t2, v);
        let zone = dilate(&mask, BLEND_MARGIN);
        for i in 0..v.data().len() {
            if pair.t1.data()[i] != pair.t2.data()[i] {
                assert!(zone.data()[i]);
            }
        }
        assert_ne!(pair.t1, pair.t2);
    }

    #[test]
    fn random_syntheses_hold_invariants() {
        let (v, mask) = fixture();
        let policy = quiet_policy();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let pair = synthesize_pair(&v, &mask, &BaselineEditor, &policy, None, None, &mut rng).unwrap();
            pair.validate().unwrap();
            pair.validate_locality().unwrap();
        }
    }

    #[test]
    fn seeded_synthesis_is_reproducible() {
        let (v, mask) = fixture();
        let policy = SynthesisPolicy::default();
        let a = synthesize_pair(&v, &mask, &BaselineEditor, &policy, None, None, &mut ChaCha8Rng::seed_from_u64(9))
            .unwrap();
        let b = synthesize_pair(&v, &mask, &BaselineEditor, &policy, None, None, &mut ChaCha8Rng::seed_from_u64(9))
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn geometry_mismatch_rejected() {
        let (v, _) = fixture();
        let other = BinaryMask::empty(Geometry::unit([4, 4, 4]).unwrap());
        let err = synthesize_pair(&v, &other, &BaselineEditor, &quiet_policy(), None, None, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(err, Err(Error::GeometryMismatch(_))));
    }

    #[test]
    fn validator_catches_broken_mask() {
        let (v, mask) = fixture();
        let policy = SynthesisPolicy {
            fates: FateProbabilities::only(LesionFate::RemoveT2),
            ..quiet_policy()
        };
        let mut pair = synthesize_pair(&v, &mask, &BaselineEditor, &policy, None, None, &mut ChaCha8Rng::seed_from_u64(1))
            .unwrap();
        pair.new_lesion_mask.union_in_place(&pair.lesions.to_binary()).unwrap();
        assert!(matches!(pair.validate(), Err(Error::Invariant(_))));
    }

    #[test]
    fn policy_json_defaults() {
        let p: SynthesisPolicy = serde_json::from_str(r#"{"augmentation": null, "p_t2_only": 1.0}"#).unwrap();
        assert!(p.augmentation.is_none());
        assert_eq!(p.n_generated, IntRange::new(0, 3));
        assert_eq!(p.fates, FateProbabilities::default());
        let bad: SynthesisPolicy = serde_json::from_str(r#"{"p_t2_only": 1.5}"#).unwrap();
        assert!(bad.validate().is_err());
    }
}
