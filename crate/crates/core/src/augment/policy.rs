use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{basis_len, ArtifactSpec, AugmentationPlan, NoiseScale, RigidTransform};
use crate::range::{IntRange, Range};
use crate::{Error, Result};

/// How many artifacts a plan receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanMode {
    /// Exactly one enabled artifact, chosen uniformly.
    #[default]
    OneOf,
    /// Each enabled artifact independently with its own probability.
    Independent,
}

const DEFAULT_PROBABILITY: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaussianPolicy {
    pub enabled: bool,
    pub probability: f64,
    /// Kernel standard deviation in voxels.
    pub sd: Range,
}

impl Default for GaussianPolicy {
    fn default() -> Self {
        Self {
            enabled: true,
            probability: DEFAULT_PROBABILITY,
            sd: Range::new(0.5, 1.75),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AxialMeanPolicy {
    pub enabled: bool,
    pub probability: f64,
    pub sizes: Vec<usize>,
}

impl Default for AxialMeanPolicy {
    fn default() -> Self {
        Self {
            enabled: true,
            probability: DEFAULT_PROBABILITY,
            sizes: vec![2, 3, 4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnisoDownsamplePolicy {
    pub enabled: bool,
    pub probability: f64,
    pub factor: Range,
    pub axes: Vec<usize>,
}

impl Default for AnisoDownsamplePolicy {
    fn default() -> Self {
        Self {
            enabled: true,
            probability: DEFAULT_PROBABILITY,
            factor: Range::new(1.5, 4.0),
            axes: vec![0, 1, 2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoisePolicy {
    pub enabled: bool,
    pub probability: f64,
    pub sd: Range,
    pub scale: NoiseScale,
}

impl Default for NoisePolicy {
    fn default() -> Self {
        Self {
            enabled: true,
            probability: DEFAULT_PROBABILITY,
            sd: Range::new(0.02, 0.1),
            scale: NoiseScale::RobustRange,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BiasFieldPolicy {
    pub enabled: bool,
    pub probability: f64,
    pub order: usize,
    pub coefficient: Range,
}

impl Default for BiasFieldPolicy {
    fn default() -> Self {
        Self {
            enabled: true,
            probability: DEFAULT_PROBABILITY,
            order: 3,
            coefficient: Range::new(-0.4, 0.4),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionPolicy {
    pub enabled: bool,
    pub probability: f64,
    pub n_transforms: IntRange,
    pub rotation_deg: Range,
    pub translation_mm: Range,
    pub phase_axes: Vec<usize>,
}

impl Default for MotionPolicy {
    fn default() -> Self {
        Self {
            enabled: true,
            probability: DEFAULT_PROBABILITY,
            n_transforms: IntRange::new(2, 4),
            rotation_deg: Range::new(-5.0, 5.0),
            translation_mm: Range::new(-4.0, 4.0),
            phase_axes: vec![0, 1, 2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpikePolicy {
    pub enabled: bool,
    pub probability: f64,
    pub n_spikes: IntRange,
    pub intensity_factor: Range,
    /// Minimum distance of a spike from DC, as a fraction of the k-space
    /// extent. The default is 3 voxels of a 64-voxel patch.
    pub min_radius: f64,
}

impl Default for SpikePolicy {
    fn default() -> Self {
        Self {
            enabled: true,
            probability: DEFAULT_PROBABILITY,
            n_spikes: IntRange::new(1, 1),
            intensity_factor: Range::new(0.1, 1.0),
            min_radius: 3.0 / 64.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GhostingPolicy {
    pub enabled: bool,
    pub probability: f64,
    pub n_ghosts: IntRange,
    pub intensity: Range,
    pub axes: Vec<usize>,
}

impl Default for GhostingPolicy {
    fn default() -> Self {
        Self {
            enabled: true,
            probability: DEFAULT_PROBABILITY,
            n_ghosts: IntRange::new(2, 5),
            intensity: Range::new(0.1, 0.5),
            axes: vec![0, 1, 2],
        }
    }
}

/// Which artifacts may be drawn and from which parameter ranges.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingPolicy {
    pub mode: PlanMode,
    pub blur: GaussianPolicy,
    pub edge_enhance: GaussianPolicy,
    pub axial_mean_filter: AxialMeanPolicy,
    pub aniso_downsample: AnisoDownsamplePolicy,
    pub gaussian_noise: NoisePolicy,
    pub bias_field: BiasFieldPolicy,
    pub motion: MotionPolicy,
    pub spike: SpikePolicy,
    pub ghosting: GhostingPolicy,
}

/// Artifact names in canonical plan order.
pub const ARTIFACT_NAMES: [&str; 9] = [
    "blur",
    "edge_enhance",
    "axial_mean_filter",
    "aniso_downsample",
    "gaussian_noise",
    "bias_field",
    "motion",
    "spike",
    "ghosting",
];

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Parameter(format!("{name}: probability {p} outside [0, 1]")));
    }
    Ok(())
}

fn check_axes(name: &str, axes: &[usize]) -> Result<()> {
    if axes.is_empty() || axes.iter().any(|&a| a > 2) {
        return Err(Error::Parameter(format!("{name}: axes {axes:?} must be a non-empty subset of 0..=2")));
    }
    Ok(())
}

impl SamplingPolicy {
    /// Policy with a single enabled artifact (default ranges).
    pub fn only(name: &str) -> Result<Self> {
        let mut policy = Self::default();
        policy.set_all_enabled(false);
        *policy.enabled_flag(name)? = true;
        Ok(policy)
    }

    pub fn set_all_enabled(&mut self, enabled: bool) {
        for name in ARTIFACT_NAMES {
            *self.enabled_flag(name).expect("known name") = enabled;
        }
    }

    pub fn enabled_flag(&mut self, name: &str) -> Result<&mut bool> {
        Ok(match name {
            "blur" => &mut self.blur.enabled,
            "edge_enhance" => &mut self.edge_enhance.enabled,
            "axial_mean_filter" => &mut self.axial_mean_filter.enabled,
            "aniso_downsample" => &mut self.aniso_downsample.enabled,
            "gaussian_noise" => &mut self.gaussian_noise.enabled,
            "bias_field" => &mut self.bias_field.enabled,
            "motion" => &mut self.motion.enabled,
            "spike" => &mut self.spike.enabled,
            "ghosting" => &mut self.ghosting.enabled,
            other => return Err(Error::Parameter(format!("unknown artifact {other:?}"))),
        })
    }

    /// `(name, enabled, probability)` in canonical order.
    fn entries(&self) -> [(&'static str, bool, f64); 9] {
        [
            ("blur", self.blur.enabled, self.blur.probability),
            ("edge_enhance", self.edge_enhance.enabled, self.edge_enhance.probability),
            ("axial_mean_filter", self.axial_mean_filter.enabled, self.axial_mean_filter.probability),
            ("aniso_downsample", self.aniso_downsample.enabled, self.aniso_downsample.probability),
            ("gaussian_noise", self.gaussian_noise.enabled, self.gaussian_noise.probability),
            ("bias_field", self.bias_field.enabled, self.bias_field.probability),
            ("motion", self.motion.enabled, self.motion.probability),
            ("spike", self.spike.enabled, self.spike.probability),
            ("ghosting", self.ghosting.enabled, self.ghosting.probability),
        ]
    }

    pub fn enabled_names(&self) -> Vec<&'static str> {
        self.entries().iter().filter(|e| e.1).map(|e| e.0).collect()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, _, p) in self.entries() {
            check_probability(name, p)?;
        }
        self.blur.sd.validate("blur.sd")?;
        self.edge_enhance.sd.validate("edge_enhance.sd")?;
        for (name, r) in [("blur.sd", self.blur.sd), ("edge_enhance.sd", self.edge_enhance.sd)] {
            if r.min <= 0.0 {
                return Err(Error::Parameter(format!("{name}: must be > 0")));
            }
        }
        if self.axial_mean_filter.sizes.is_empty() || self.axial_mean_filter.sizes.contains(&0) {
            return Err(Error::Parameter("axial_mean_filter.sizes must be non-empty and >= 1".into()));
        }
        self.aniso_downsample
            .factor
            .validate_within("aniso_downsample.factor", 1.0, f64::MAX)?;
        check_axes("aniso_downsample", &self.aniso_downsample.axes)?;
        self.gaussian_noise
            .sd
            .validate_within("gaussian_noise.sd", 0.0, f64::MAX)?;
        self.bias_field.coefficient.validate("bias_field.coefficient")?;
        if self.bias_field.order > 8 {
            return Err(Error::Parameter("bias_field.order must be <= 8".into()));
        }
        self.motion.n_transforms.validate("motion.n_transforms")?;
        if self.motion.n_transforms.min == 0 {
            return Err(Error::Parameter("motion.n_transforms must be >= 1".into()));
        }
        self.motion.rotation_deg.validate("motion.rotation_deg")?;
        self.motion.translation_mm.validate("motion.translation_mm")?;
        check_axes("motion", &self.motion.phase_axes)?;
        self.spike.n_spikes.validate("spike.n_spikes")?;
        self.spike
            .intensity_factor
            .validate_within("spike.intensity_factor", 0.0, f64::MAX)?;
        if !(0.0..0.5).contains(&self.spike.min_radius) {
            return Err(Error::Parameter("spike.min_radius must be in [0, 0.5)".into()));
        }
        self.ghosting.n_ghosts.validate("ghosting.n_ghosts")?;
        if self.ghosting.n_ghosts.min == 0 {
            return Err(Error::Parameter("ghosting.n_ghosts must be >= 1".into()));
        }
        self.ghosting
            .intensity
            .validate_within("ghosting.intensity", 0.0, 1.0)?;
        check_axes("ghosting", &self.ghosting.axes)?;
        Ok(())
    }

    fn sample_artifact<R: Rng + ?Sized>(&self, name: &str, rng: &mut R) -> ArtifactSpec {
        match name {
            "blur" => ArtifactSpec::Blur {
                sd: self.blur.sd.sample(rng),
            },
            "edge_enhance" => ArtifactSpec::EdgeEnhance {
                sd: self.edge_enhance.sd.sample(rng),
            },
            "axial_mean_filter" => ArtifactSpec::AxialMeanFilter {
                size: *self.axial_mean_filter.sizes.choose(rng).expect("non-empty"),
            },
            "aniso_downsample" => ArtifactSpec::AnisoDownsample {
                axis: *self.aniso_downsample.axes.choose(rng).expect("non-empty"),
                factor: self.aniso_downsample.factor.sample(rng),
            },
            "gaussian_noise" => ArtifactSpec::GaussianNoise {
                sd: self.gaussian_noise.sd.sample(rng),
                scale: self.gaussian_noise.scale,
            },
            "bias_field" => ArtifactSpec::BiasField {
                order: self.bias_field.order,
                coefficients: (0..basis_len(self.bias_field.order))
                    .map(|_| self.bias_field.coefficient.sample(rng))
                    .collect(),
            },
            "motion" => {
                let m = &self.motion;
                let count = m.n_transforms.sample(rng);
                let transforms = (0..count)
                    .map(|_| RigidTransform {
                        rotation_deg: std::array::from_fn(|_| m.rotation_deg.sample(rng)),
                        translation_mm: std::array::from_fn(|_| m.translation_mm.sample(rng)),
                    })
                    .collect();
                ArtifactSpec::Motion {
                    transforms,
                    phase_axis: *m.phase_axes.choose(rng).expect("non-empty"),
                }
            }
            "spike" => {
                let s = &self.spike;
                let count = s.n_spikes.sample(rng);
                let positions = (0..count)
                    .map(|_| loop {
                        let p: [f64; 3] = std::array::from_fn(|_| rng.random_range(-0.5..=0.5));
                        if p.iter().map(|c| c * c).sum::<f64>().sqrt() >= s.min_radius {
                            break p;
                        }
                    })
                    .collect();
                ArtifactSpec::Spike {
                    positions,
                    intensity_factor: s.intensity_factor.sample(rng),
                }
            }
            "ghosting" => ArtifactSpec::Ghosting {
                n_ghosts: self.ghosting.n_ghosts.sample(rng),
                axis: *self.ghosting.axes.choose(rng).expect("non-empty"),
                intensity: self.ghosting.intensity.sample(rng),
            },
            other => unreachable!("unknown artifact {other}"),
        }
    }
}

/// Draws a plan. The first draw from `rng` becomes the plan's own seed, so
/// the plan can be replayed without `rng`.
pub fn sample_plan<R: Rng + ?Sized>(policy: &SamplingPolicy, rng: &mut R) -> Result<AugmentationPlan> {
    policy.validate()?;
    let rng_seed: u64 = rng.random();
    let enabled = policy.enabled_names();
    let artifacts = match policy.mode {
        PlanMode::OneOf => {
            let name = *enabled.choose(rng).ok_or(Error::EmptyPolicy)?;
            vec![policy.sample_artifact(name, rng)]
        }
        PlanMode::Independent => {
            let mut out = Vec::new();
            for (name, on, p) in policy.entries() {
                if on && rng.random_bool(p) {
                    out.push(policy.sample_artifact(name, rng));
                }
            }
            out
        }
    };
    Ok(AugmentationPlan { artifacts, rng_seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn blur_only_policy() {
        let policy = SamplingPolicy::only("blur").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let plan = sample_plan(&policy, &mut rng).unwrap();
            assert_eq!(plan.artifacts.len(), 1);
            match plan.artifacts[0] {
                ArtifactSpec::Blur { sd } => assert!((0.5..=1.75).contains(&sd)),
                ref other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn empty_policy_errors_in_one_of_mode() {
        let mut policy = SamplingPolicy::default();
        policy.set_all_enabled(false);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(sample_plan(&policy, &mut rng), Err(Error::EmptyPolicy)));
        policy.mode = PlanMode::Independent;
        assert!(sample_plan(&policy, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn independent_mode_frequencies() {
        let mut policy = SamplingPolicy {
            mode: PlanMode::Independent,
            ..Default::default()
        };
        policy.set_all_enabled(false);
        policy.blur.enabled = true;
        policy.blur.probability = 0.3;
        policy.ghosting.enabled = true;
        policy.ghosting.probability = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 4000;
        let mut blur = 0;
        for _ in 0..n {
            let plan = sample_plan(&policy, &mut rng).unwrap();
            assert_eq!(plan.artifacts.last().unwrap().name(), "ghosting");
            blur += plan.artifacts.iter().filter(|a| a.name() == "blur").count();
        }
        let freq = blur as f64 / n as f64;
        assert!((freq - 0.3).abs() < 0.03, "{freq}");
    }

    #[test]
    fn one_of_mode_is_uniform_over_enabled() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let policy = SamplingPolicy::default();
        let names = policy.enabled_names();
        let mut counts = vec![0usize; names.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 10_000;
        for _ in 0..n {
            let plan = sample_plan(&policy, &mut rng).unwrap();
            assert_eq!(plan.artifacts.len(), 1);
            let k = names.iter().position(|&m| m == plan.artifacts[0].name()).unwrap();
            counts[k] += 1;
        }
        let expected = n as f64 / names.len() as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        let p = 1.0 - ChiSquared::new((names.len() - 1) as f64).unwrap().cdf(chi2);
        assert!(p > 0.01, "chi2 {chi2} p {p} counts {counts:?}");
    }

    #[test]
    fn fixed_seed_reproduces_plan() {
        let policy = SamplingPolicy::default();
        let a = sample_plan(&policy, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        let b = sample_plan(&policy, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_policies_rejected() {
        let mut p = SamplingPolicy::default();
        p.blur.sd = Range::new(0.0, 1.0);
        assert!(p.validate().is_err());
        let mut p = SamplingPolicy::default();
        p.ghosting.intensity = Range::new(0.5, 1.5);
        assert!(p.validate().is_err());
        let mut p = SamplingPolicy::default();
        p.motion.phase_axes = vec![3];
        assert!(p.validate().is_err());
        let mut p = SamplingPolicy::default();
        p.spike.probability = 1.5;
        assert!(p.validate().is_err());
        assert!(SamplingPolicy::only("sharpen").is_err());
    }

    #[test]
    fn partial_json_config_uses_defaults() {
        let p: SamplingPolicy =
            serde_json::from_str(r#"{"mode": "independent", "blur": {"enabled": false}}"#).unwrap();
        assert_eq!(p.mode, PlanMode::Independent);
        assert!(!p.blur.enabled);
        assert_eq!(p.blur.sd, Range::new(0.5, 1.75));
        assert_eq!(p.motion, MotionPolicy::default());
    }
}
