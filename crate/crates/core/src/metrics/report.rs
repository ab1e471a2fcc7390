use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{round3, wilcoxon_signed_rank, CaseReport, DetectionThresholds};
use crate::{Error, Result};

/// Significance level for comparison verdicts.
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

/// A per-case score that can be averaged and compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Dice,
    LesF1,
    AvgScore,
    LesionSensitivity,
    LesionPpv,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::AvgScore,
        Metric::Dice,
        Metric::LesF1,
        Metric::LesionSensitivity,
        Metric::LesionPpv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Dice => "dice",
            Metric::LesF1 => "les_f1",
            Metric::AvgScore => "avg_score",
            Metric::LesionSensitivity => "lesion_sensitivity",
            Metric::LesionPpv => "lesion_ppv",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Metric::ALL.iter().map(|m| m.name()).collect();
                Error::Parameter(format!("unknown metric {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

/// Arithmetic means over cases.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricMeans {
    pub avg_score: f64,
    pub dice: f64,
    pub les_f1: f64,
    pub lesion_sensitivity: f64,
    pub lesion_ppv: f64,
}

impl MetricMeans {
    pub fn of<'a>(cases: impl IntoIterator<Item = &'a CaseReport>) -> Option<Self> {
        let mut sum = Self::default();
        let mut n = 0usize;
        for c in cases {
            sum.avg_score += c.avg_score;
            sum.dice += c.dice;
            sum.les_f1 += c.les_f1;
            sum.lesion_sensitivity += c.lesion_sensitivity;
            sum.lesion_ppv += c.lesion_ppv;
            n += 1;
        }
        (n > 0).then(|| {
            let n = n as f64;
            Self {
                avg_score: sum.avg_score / n,
                dice: sum.dice / n,
                les_f1: sum.les_f1 / n,
                lesion_sensitivity: sum.lesion_sensitivity / n,
                lesion_ppv: sum.lesion_ppv / n,
            }
        })
    }

    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Dice => self.dice,
            Metric::LesF1 => self.les_f1,
            Metric::AvgScore => self.avg_score,
            Metric::LesionSensitivity => self.lesion_sensitivity,
            Metric::LesionPpv => self.lesion_ppv,
        }
    }
}

/// Per-case reports of one method, keyed by case id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub thresholds: DetectionThresholds,
    pub cases: BTreeMap<String, CaseReport>,
    /// `None` when there are no cases.
    pub means: Option<MetricMeans>,
}

impl MethodReport {
    pub fn new(
        method: impl Into<String>,
        thresholds: DetectionThresholds,
        cases: BTreeMap<String, CaseReport>,
    ) -> Self {
        let means = MetricMeans::of(cases.values());
        Self {
            method: method.into(),
            thresholds,
            cases,
            means,
        }
    }

    /// Plain-text table: one row per case plus the mean row, 3 decimals.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<24} {:>9} {:>7} {:>7} {:>7} {:>7}\n",
            "case", "avg_score", "dice", "les_f1", "les_sen", "les_ppv"
        );
        let row = |name: &str, m: &MetricMeans| {
            format!(
                "{:<24} {:>9.3} {:>7.3} {:>7.3} {:>7.3} {:>7.3}\n",
                name,
                round3(m.avg_score),
                round3(m.dice),
                round3(m.les_f1),
                round3(m.lesion_sensitivity),
                round3(m.lesion_ppv)
            )
        };
        for (id, c) in &self.cases {
            out += &row(id, &MetricMeans::of([c]).expect("one case"));
        }
        if let Some(means) = &self.means {
            out += &row("mean", means);
        }
        out
    }
}

/// Paired test of one metric between two methods over shared cases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub method_a: String,
    pub method_b: String,
    pub metric: Metric,
    pub n_cases: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub statistic: f64,
    pub p_value: f64,
    pub exact: bool,
    pub significant: bool,
}

impl Comparison {
    pub fn verdict(&self) -> &'static str {
        if self.significant {
            "significant"
        } else {
            "not significant"
        }
    }
}

/// Wilcoxon signed-rank comparison. Both reports must cover the same case
/// ids.
pub fn compare_methods(a: &MethodReport, b: &MethodReport, metric: Metric) -> Result<Comparison> {
    let ids_a: Vec<&String> = a.cases.keys().collect();
    let ids_b: Vec<&String> = b.cases.keys().collect();
    if ids_a != ids_b {
        let only_a: Vec<_> = ids_a.iter().filter(|id| !b.cases.contains_key(**id)).collect();
        let only_b: Vec<_> = ids_b.iter().filter(|id| !a.cases.contains_key(**id)).collect();
        return Err(Error::Parameter(format!(
            "case ids differ: only in {}: {only_a:?}; only in {}: {only_b:?}",
            a.method, b.method
        )));
    }
    let xs: Vec<f64> = a.cases.values().map(|c| c.metric(metric)).collect();
    let ys: Vec<f64> = b.cases.values().map(|c| c.metric(metric)).collect();
    let w = wilcoxon_signed_rank(&xs, &ys)?;
    let n = xs.len() as f64;
    Ok(Comparison {
        method_a: a.method.clone(),
        method_b: b.method.clone(),
        metric,
        n_cases: xs.len(),
        mean_a: xs.iter().sum::<f64>() / n,
        mean_b: ys.iter().sum::<f64>() / n,
        statistic: w.statistic,
        p_value: w.p_value,
        exact: w.exact,
        significant: w.p_value < SIGNIFICANCE_LEVEL,
    })
}

/// Several methods on one dataset with all pairwise comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub methods: Vec<MethodReport>,
    pub comparisons: Vec<Comparison>,
}

impl DatasetReport {
    pub fn new(methods: Vec<MethodReport>, metric: Metric) -> Result<Self> {
        let mut comparisons = Vec::new();
        for i in 0..methods.len() {
            for j in i + 1..methods.len() {
                comparisons.push(compare_methods(&methods[i], &methods[j], metric)?);
            }
        }
        Ok(Self {
            methods,
            comparisons,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{CaseReport, LesionMetrics, VoxelCounts};

    fn case(dice_tp: usize, f1: f64) -> CaseReport {
        let counts = VoxelCounts {
            tp: dice_tp,
            fp: 10 - dice_tp,
            fn_: 10 - dice_tp,
        };
        let lesions = LesionMetrics {
            n_gt_lesions: 1,
            n_pred_lesions: 1,
            detected_gt: 1,
            tp_pred: 1,
            sensitivity: f1,
            ppv: f1,
            f1,
            matches: vec![],
            flags: vec![],
        };
        CaseReport::from_parts(counts, lesions)
    }

    fn method(name: &str, scores: &[(usize, f64)]) -> MethodReport {
        let cases = scores
            .iter()
            .enumerate()
            .map(|(i, &(tp, f1))| (format!("case{i:02}"), case(tp, f1)))
            .collect();
        MethodReport::new(name, DetectionThresholds::default(), cases)
    }

    #[test]
    fn metric_names_roundtrip() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.name()));
        }
        assert!("hd95".parse::<Metric>().is_err());
    }

    #[test]
    fn uniformly_better_method_is_significant() {
        let a = method("a", &[(9, 0.9), (8, 0.85), (7, 0.8), (6, 0.75), (5, 0.7), (4, 0.65)]);
        let b = method("b", &[(8, 0.8), (6, 0.7), (4, 0.6), (2, 0.5), (1, 0.3), (0, 0.1)]);
        let c = compare_methods(&a, &b, Metric::AvgScore).unwrap();
        assert_eq!(c.p_value, 0.03125);
        assert!(c.significant);
        assert_eq!(c.verdict(), "significant");
        let same = compare_methods(&a, &a, Metric::Dice).unwrap();
        assert_eq!(same.p_value, 1.0);
        assert_eq!(same.verdict(), "not significant");
    }

    #[test]
    fn mismatched_ids_rejected() {
        let a = method("a", &[(9, 0.9), (8, 0.8)]);
        let b = method("b", &[(9, 0.9)]);
        assert!(compare_methods(&a, &b, Metric::Dice).is_err());
    }

    #[test]
    fn means_and_table() {
        let a = method("a", &[(10, 1.0), (5, 0.5)]);
        let m = a.means.unwrap();
        assert_eq!(m.dice, 0.75);
        assert_eq!(m.les_f1, 0.75);
        let table = a.table();
        assert!(table.lines().last().unwrap().starts_with("mean"));
        assert!(table.contains("0.750"));
        assert!(MethodReport::new("e", DetectionThresholds::default(), BTreeMap::new())
            .means
            .is_none());
        let d = DatasetReport::new(vec![a.clone(), a.clone(), a], Metric::Dice).unwrap();
        assert_eq!(d.comparisons.len(), 3);
    }
}
