//! Segmentation scoring: voxel Dice, lesion-wise detection, consensus and
//! paired significance testing.
//!
//! Scores are kept at full precision; [`round3`] is for presentation only.

mod report;
mod wilcoxon;

use serde::{Deserialize, Serialize};

use crate::volume::{connected_components, filter_small_lesions};
use crate::{BinaryMask, Connectivity, Error, Result, Volume};

pub use report::{compare_methods, Comparison, DatasetReport, MethodReport, Metric, MetricMeans};
pub use wilcoxon::{exact_null_counts, wilcoxon_signed_rank, WilcoxonResult, EXACT_MAX_N};

/// Which masks the minimum-size filter is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeFilterSide {
    #[default]
    Both,
    GtOnly,
    PredOnly,
}

/// Lesion-detection rules. Ratios are inclusive at the boundary: a ground
/// truth lesion covered exactly `sens_overlap` is detected, a prediction
/// with exactly `ppv_overlap` on ground truth counts, and one with exactly
/// `ppv_outside` outside still counts. Lesions of exactly `min_lesion_mm3`
/// are kept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionThresholds {
    pub min_lesion_mm3: f64,
    pub sens_overlap: f64,
    pub ppv_overlap: f64,
    pub ppv_outside: f64,
    pub connectivity: Connectivity,
    pub size_filter: SizeFilterSide,
}

impl Default for DetectionThresholds {
    fn default() -> Self {
        Self {
            min_lesion_mm3: 3.0,
            sens_overlap: 0.10,
            ppv_overlap: 0.65,
            ppv_outside: 0.70,
            connectivity: Connectivity::TwentySix,
            size_filter: SizeFilterSide::Both,
        }
    }
}

impl DetectionThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_lesion_mm3.is_finite() && self.min_lesion_mm3 >= 0.0) {
            return Err(Error::Parameter(format!(
                "min_lesion_mm3 must be >= 0, got {}",
                self.min_lesion_mm3
            )));
        }
        for (name, v) in [
            ("sens_overlap", self.sens_overlap),
            ("ppv_overlap", self.ppv_overlap),
            ("ppv_outside", self.ppv_outside),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Parameter(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

/// Voxel confusion counts of a prediction against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct VoxelCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl VoxelCounts {
    pub fn of(pred: &BinaryMask, gt: &BinaryMask) -> Result<Self> {
        pred.geometry().ensure_matches(gt.geometry(), "prediction vs ground truth")?;
        let mut c = Self::default();
        for (&p, &g) in pred.data().iter().zip(gt.data()) {
            match (p, g) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => {}
            }
        }
        Ok(c)
    }

    /// `2 tp / (2 tp + fp + fn)`; 1 when both masks are empty.
    pub fn dice(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            1.0
        } else {
            (2 * self.tp) as f64 / denom as f64
        }
    }
}

/// Voxel Dice. Both empty gives 1, exactly one empty gives 0.
pub fn dice(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    Ok(VoxelCounts::of(pred, gt)?.dice())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LesionSide {
    Gt,
    Pred,
}

/// One row of the lesion match table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LesionMatch {
    pub side: LesionSide,
    /// Component label after size filtering.
    pub label: u32,
    pub voxels: usize,
    pub volume_mm3: f64,
    /// Voxels shared with the other mask (after its own filtering).
    pub overlap_voxels: usize,
    pub overlap_ratio: f64,
    pub outside_ratio: f64,
    /// Detected (ground truth side) or true positive (prediction side).
    pub hit: bool,
}

/// Conventions triggered while scoring, reported for transparency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringFlag {
    /// Both voxel masks empty; dice set to 1.
    EmptyMasks,
    /// No lesions on either side after filtering; lesion scores set to 1.
    NoLesions,
    /// Ground truth has no lesions but the prediction does; sensitivity set to 0.
    NoGtLesions,
    /// Prediction has no lesions but ground truth does; PPV set to 0.
    NoPredLesions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LesionMetrics {
    pub n_gt_lesions: usize,
    pub n_pred_lesions: usize,
    pub detected_gt: usize,
    pub tp_pred: usize,
    pub sensitivity: f64,
    pub ppv: f64,
    pub f1: f64,
    pub matches: Vec<LesionMatch>,
    pub flags: Vec<ScoringFlag>,
}

/// Harmonic mean of sensitivity and PPV, 0 when both are 0.
pub fn les_f1(sensitivity: f64, ppv: f64) -> f64 {
    if sensitivity + ppv == 0.0 {
        0.0
    } else {
        2.0 * sensitivity * ppv / (sensitivity + ppv)
    }
}

fn component_rows(
    side: LesionSide,
    own: &BinaryMask,
    other: &BinaryMask,
    connectivity: Connectivity,
    hit: impl Fn(usize, usize) -> bool,
) -> Vec<LesionMatch> {
    let labeled = connected_components(own, connectivity);
    let n = labeled.count() as usize;
    let mut voxels = vec![0usize; n + 1];
    let mut overlap = vec![0usize; n + 1];
    for (&l, &o) in labeled.labels().iter().zip(other.data()) {
        voxels[l as usize] += 1;
        if o {
            overlap[l as usize] += 1;
        }
    }
    let voxel_volume = own.geometry().voxel_volume();
    (1..=n)
        .map(|l| LesionMatch {
            side,
            label: l as u32,
            voxels: voxels[l],
            volume_mm3: voxels[l] as f64 * voxel_volume,
            overlap_voxels: overlap[l],
            overlap_ratio: overlap[l] as f64 / voxels[l] as f64,
            outside_ratio: (voxels[l] - overlap[l]) as f64 / voxels[l] as f64,
            hit: hit(overlap[l], voxels[l]),
        })
        .collect()
}

/// Lesion-wise sensitivity, PPV and F1.
///
/// Both masks are size-filtered (per `size_filter`) and decomposed into
/// components. A ground-truth lesion is detected when at least
/// `sens_overlap` of it is predicted. A predicted lesion is a true positive
/// when at least `ppv_overlap` of it lies on ground truth and at most
/// `ppv_outside` lies outside. Each component is tested independently; no
/// one-to-one assignment is made.
pub fn lesion_metrics(
    pred: &BinaryMask,
    gt: &BinaryMask,
    th: &DetectionThresholds,
) -> Result<LesionMetrics> {
    th.validate()?;
    pred.geometry().ensure_matches(gt.geometry(), "prediction vs ground truth")?;
    let filter = |m: &BinaryMask, apply: bool| -> Result<BinaryMask> {
        if apply {
            filter_small_lesions(m, th.min_lesion_mm3, th.connectivity)
        } else {
            Ok(m.clone())
        }
    };
    let pred_f = filter(pred, th.size_filter != SizeFilterSide::GtOnly)?;
    let gt_f = filter(gt, th.size_filter != SizeFilterSide::PredOnly)?;

    let gt_rows = component_rows(LesionSide::Gt, &gt_f, &pred_f, th.connectivity, |o, n| {
        o as f64 / n as f64 >= th.sens_overlap
    });
    let pred_rows = component_rows(LesionSide::Pred, &pred_f, &gt_f, th.connectivity, |o, n| {
        o as f64 / n as f64 >= th.ppv_overlap && (n - o) as f64 / n as f64 <= th.ppv_outside
    });

    let n_gt = gt_rows.len();
    let n_pred = pred_rows.len();
    let detected_gt = gt_rows.iter().filter(|r| r.hit).count();
    let tp_pred = pred_rows.iter().filter(|r| r.hit).count();
    let mut flags = Vec::new();
    let (sensitivity, ppv, f1) = if n_gt == 0 && n_pred == 0 {
        flags.push(ScoringFlag::NoLesions);
        (1.0, 1.0, 1.0)
    } else {
        let sensitivity = if n_gt == 0 {
            flags.push(ScoringFlag::NoGtLesions);
            0.0
        } else {
            detected_gt as f64 / n_gt as f64
        };
        let ppv = if n_pred == 0 {
            flags.push(ScoringFlag::NoPredLesions);
            0.0
        } else {
            tp_pred as f64 / n_pred as f64
        };
        (sensitivity, ppv, les_f1(sensitivity, ppv))
    };

    let mut matches = gt_rows;
    matches.extend(pred_rows);
    Ok(LesionMetrics {
        n_gt_lesions: n_gt,
        n_pred_lesions: n_pred,
        detected_gt,
        tp_pred,
        sensitivity,
        ppv,
        f1,
        matches,
        flags,
    })
}

/// Mean of Dice and lesion F1, the ranking score.
pub fn avg_score(dice: f64, les_f1: f64) -> f64 {
    (dice + les_f1) / 2.0
}

/// Three-decimal presentation rounding, half away from zero.
pub fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// All scores for one prediction against its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub dice: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub n_gt_lesions: usize,
    pub n_pred_lesions: usize,
    pub detected_gt: usize,
    pub tp_pred: usize,
    pub lesion_sensitivity: f64,
    pub lesion_ppv: f64,
    pub les_f1: f64,
    pub avg_score: f64,
    pub matches: Vec<LesionMatch>,
    pub flags: Vec<ScoringFlag>,
}

impl CaseReport {
    pub fn from_parts(counts: VoxelCounts, lesions: LesionMetrics) -> Self {
        let dice = counts.dice();
        let mut flags = Vec::new();
        if counts.tp + counts.fp + counts.fn_ == 0 {
            flags.push(ScoringFlag::EmptyMasks);
        }
        flags.extend(lesions.flags);
        Self {
            dice,
            tp: counts.tp,
            fp: counts.fp,
            fn_: counts.fn_,
            n_gt_lesions: lesions.n_gt_lesions,
            n_pred_lesions: lesions.n_pred_lesions,
            detected_gt: lesions.detected_gt,
            tp_pred: lesions.tp_pred,
            lesion_sensitivity: lesions.sensitivity,
            lesion_ppv: lesions.ppv,
            les_f1: lesions.f1,
            avg_score: avg_score(dice, lesions.f1),
            matches: lesions.matches,
            flags,
        }
    }

    pub fn metric(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Dice => self.dice,
            Metric::LesF1 => self.les_f1,
            Metric::AvgScore => self.avg_score,
            Metric::LesionSensitivity => self.lesion_sensitivity,
            Metric::LesionPpv => self.lesion_ppv,
        }
    }
}

pub fn evaluate_case(
    pred: &BinaryMask,
    gt: &BinaryMask,
    th: &DetectionThresholds,
) -> Result<CaseReport> {
    let counts = VoxelCounts::of(pred, gt)?;
    let lesions = lesion_metrics(pred, gt, th)?;
    Ok(CaseReport::from_parts(counts, lesions))
}

/// Voxelwise mean of probability maps, thresholded inclusively.
pub fn consensus(maps: &[&Volume], threshold: f64) -> Result<BinaryMask> {
    let first = maps
        .first()
        .ok_or_else(|| Error::Parameter("consensus needs at least one map".into()))?;
    if !threshold.is_finite() {
        return Err(Error::Parameter(format!("threshold must be finite, got {threshold}")));
    }
    for (k, m) in maps.iter().enumerate() {
        first.geometry().ensure_matches(m.geometry(), &format!("probability map {k}"))?;
        if let Some(i) = m.data().iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Domain(format!(
                "probability map {k} has value {} at voxel {i}, outside [0, 1]",
                m.data()[i]
            )));
        }
    }
    let n = maps.len() as f64;
    let data = (0..first.geometry().len())
        .map(|i| maps.iter().map(|m| m.data()[i]).sum::<f64>() / n >= threshold)
        .collect();
    BinaryMask::new(first.geometry().clone(), data)
}
