//! MRI image-quality augmentation.
//!
//! Nine artifact families are available as [`ArtifactSpec`] variants. A
//! [`SamplingPolicy`] draws concrete parameters into an [`AugmentationPlan`],
//! which can be serialized and replayed bit-exactly with [`apply_plan`].
//!
//! Spatial filters use half-sample mirror padding. The k-space artifacts
//! (motion, spike, ghosting) reconstruct the magnitude image, so their
//! output is non-negative; they reproduce non-negative inputs when their
//! parameters are neutral.

mod bias;
pub mod bspline;
pub mod kspace;
mod ortho;
mod policy;
mod spatial;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Volume};

pub use bias::{basis_exponents, basis_len};
pub use kspace::RigidTransform;
pub use ortho::{orthogonal_flip_rotate, OrthoTransform};
pub use policy::{
    sample_plan, AnisoDownsamplePolicy, ARTIFACT_NAMES, AxialMeanPolicy, BiasFieldPolicy, GaussianPolicy,
    GhostingPolicy, MotionPolicy, NoisePolicy, PlanMode, SamplingPolicy, SpikePolicy,
};
pub use spatial::{box_downsample, bspline_upsample, downsampled_len};

/// How the noise standard deviation is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseScale {
    /// Fraction of the robust intensity range (99th minus 1st percentile).
    #[default]
    RobustRange,
    /// Intensity units.
    Absolute,
}

/// One image-quality alteration with concrete parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArtifactSpec {
    /// Separable Gaussian smoothing, `sd` in voxels.
    Blur { sd: f64 },
    /// Unsharp masking: `2 v - blur_sd(v)`.
    EdgeEnhance { sd: f64 },
    /// Mean filter of `size` voxels along the axial (z) axis.
    AxialMeanFilter { size: usize },
    /// Box-average downsampling by `factor` along `axis`, then cubic
    /// B-spline upsampling back to the original grid.
    AnisoDownsample { axis: usize, factor: f64 },
    /// Additive zero-mean Gaussian noise.
    GaussianNoise {
        sd: f64,
        #[serde(default)]
        scale: NoiseScale,
    },
    /// Multiplicative field `exp(sum c_i phi_i)` over the monomials of total
    /// degree `<= order` on coordinates normalized to `[-1, 1]`.
    BiasField { order: usize, coefficients: Vec<f64> },
    /// Head motion: one rigid pose per contiguous k-space slab along
    /// `phase_axis`.
    Motion {
        transforms: Vec<RigidTransform>,
        phase_axis: usize,
    },
    /// k-space spikes; positions are fractions of the k-space extent in
    /// `[-0.5, 0.5]` per axis, magnitude `intensity_factor * max |k|`.
    Spike {
        positions: Vec<[f64; 3]>,
        intensity_factor: f64,
    },
    /// Scales every `n_ghosts`-th k-space plane along `axis` (DC excluded)
    /// by `1 - intensity`.
    Ghosting {
        n_ghosts: usize,
        axis: usize,
        intensity: f64,
    },
}

impl ArtifactSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Blur { .. } => "blur",
            Self::EdgeEnhance { .. } => "edge_enhance",
            Self::AxialMeanFilter { .. } => "axial_mean_filter",
            Self::AnisoDownsample { .. } => "aniso_downsample",
            Self::GaussianNoise { .. } => "gaussian_noise",
            Self::BiasField { .. } => "bias_field",
            Self::Motion { .. } => "motion",
            Self::Spike { .. } => "spike",
            Self::Ghosting { .. } => "ghosting",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(format!("{}: {msg}", self.name())));
        let axis_ok = |axis: usize| axis < 3;
        match self {
            Self::Blur { sd } | Self::EdgeEnhance { sd } => {
                if !(sd.is_finite() && *sd > 0.0) {
                    return bad(format!("sd must be > 0, got {sd}"));
                }
            }
            Self::AxialMeanFilter { size } => {
                if *size == 0 {
                    return bad("size must be >= 1".into());
                }
            }
            Self::AnisoDownsample { axis, factor } => {
                if !axis_ok(*axis) {
                    return bad(format!("axis {axis} out of range"));
                }
                if !(factor.is_finite() && *factor >= 1.0) {
                    return bad(format!("factor must be >= 1, got {factor}"));
                }
            }
            Self::GaussianNoise { sd, .. } => {
                if !(sd.is_finite() && *sd >= 0.0) {
                    return bad(format!("sd must be >= 0, got {sd}"));
                }
            }
            Self::BiasField { order, coefficients } => {
                if coefficients.len() != basis_len(*order) {
                    return bad(format!(
                        "order {order} needs {} coefficients, got {}",
                        basis_len(*order),
                        coefficients.len()
                    ));
                }
                if coefficients.iter().any(|c| !c.is_finite()) {
                    return bad("coefficients must be finite".into());
                }
            }
            Self::Motion {
                transforms,
                phase_axis,
            } => {
                if transforms.is_empty() {
                    return bad("at least one transform is required".into());
                }
                if !axis_ok(*phase_axis) {
                    return bad(format!("phase axis {phase_axis} out of range"));
                }
                if transforms
                    .iter()
                    .any(|t| t.rotation_deg.iter().chain(&t.translation_mm).any(|v| !v.is_finite()))
                {
                    return bad("transform parameters must be finite".into());
                }
            }
            Self::Spike {
                positions,
                intensity_factor,
            } => {
                if !(intensity_factor.is_finite() && *intensity_factor >= 0.0) {
                    return bad(format!("intensity_factor must be >= 0, got {intensity_factor}"));
                }
                if positions.iter().flatten().any(|p| p.is_nan() || p.abs() > 0.5) {
                    return bad("positions must lie in [-0.5, 0.5]".into());
                }
            }
            Self::Ghosting {
                n_ghosts,
                axis,
                intensity,
            } => {
                if *n_ghosts == 0 {
                    return bad("n_ghosts must be >= 1".into());
                }
                if !axis_ok(*axis) {
                    return bad(format!("axis {axis} out of range"));
                }
                if !(0.0..=1.0).contains(intensity) {
                    return bad(format!("intensity must be in [0, 1], got {intensity}"));
                }
            }
        }
        Ok(())
    }
}

/// Linear-interpolated percentile (`q` in `[0, 100]`).
pub fn percentile(values: &[f64], q: f64) -> f64 {
    percentile_in_place(&mut values.to_vec(), q)
}

/// Selection-based percentile; reorders `values`.
fn percentile_in_place(values: &mut [f64], q: f64) -> f64 {
    let rank = q / 100.0 * (values.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let (_, &mut lo_value, upper) = values.select_nth_unstable_by(lo, f64::total_cmp);
    if rank == lo as f64 {
        return lo_value;
    }
    let hi_value = upper.iter().copied().min_by(f64::total_cmp).unwrap_or(lo_value);
    lo_value + (rank - lo as f64) * (hi_value - lo_value)
}

/// 99th minus 1st percentile.
pub fn robust_range(values: &[f64]) -> f64 {
    let mut scratch = values.to_vec();
    let high = percentile_in_place(&mut scratch, 99.0);
    high - percentile_in_place(&mut scratch, 1.0)
}

/// Applies one artifact. Only noise consumes randomness from `rng`.
pub fn apply_artifact<R: Rng + ?Sized>(
    volume: &Volume,
    spec: &ArtifactSpec,
    rng: &mut R,
) -> Result<Volume> {
    volume.ensure_finite()?;
    spec.validate()?;
    let dims = volume.dims();
    let data = volume.data();
    let out = match spec {
        ArtifactSpec::Blur { sd } => spatial::blur(data, dims, *sd),
        ArtifactSpec::EdgeEnhance { sd } => spatial::edge_enhance(data, dims, *sd),
        ArtifactSpec::AxialMeanFilter { size } => spatial::axial_mean(data, dims, *size),
        ArtifactSpec::AnisoDownsample { axis, factor } => {
            spatial::aniso_downsample(data, dims, *axis, *factor)
        }
        ArtifactSpec::GaussianNoise { sd, scale } => {
            let sigma = match scale {
                NoiseScale::RobustRange => sd * robust_range(data),
                NoiseScale::Absolute => *sd,
            };
            data.iter()
                .map(|&v| {
                    let z: f64 = rng.sample(StandardNormal);
                    v + sigma * z
                })
                .collect()
        }
        ArtifactSpec::BiasField {
            order,
            coefficients,
        } => {
            let field = bias::field(dims, *order, coefficients);
            data.iter().zip(&field).map(|(v, f)| v * f).collect()
        }
        ArtifactSpec::Motion {
            transforms,
            phase_axis,
        } => kspace::motion(data, volume.geometry(), transforms, *phase_axis),
        ArtifactSpec::Spike {
            positions,
            intensity_factor,
        } => kspace::spike(data, dims, positions, *intensity_factor),
        ArtifactSpec::Ghosting {
            n_ghosts,
            axis,
            intensity,
        } => kspace::ghosting(data, dims, *n_ghosts, *axis, *intensity),
    };
    volume.with_data(out)
}

/// Ordered artifacts plus the seed of the generator they consume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationPlan {
    pub artifacts: Vec<ArtifactSpec>,
    pub rng_seed: u64,
}

impl AugmentationPlan {
    pub fn empty(rng_seed: u64) -> Self {
        Self {
            artifacts: Vec::new(),
            rng_seed,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.artifacts.is_empty()
    }
}

/// Generator used for a plan's stochastic artifacts.
pub fn plan_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Applies the artifacts in list order. Order matters: blur followed by
/// noise differs from noise followed by blur.
pub fn apply_plan(volume: &Volume, plan: &AugmentationPlan) -> Result<Volume> {
    let mut rng = plan_rng(plan.rng_seed);
    let mut current = volume.clone();
    for spec in &plan.artifacts {
        current = apply_artifact(&current, spec, &mut rng)?;
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Geometry;

    fn ramp(dims: [usize; 3]) -> Volume {
        Volume::from_fn(Geometry::unit(dims).unwrap(), |x, y, z| {
            (x * x + 3 * y + 5 * z) as f64 * 0.1 + 1.0
        })
    }

    /// Independent 1D mean filter with explicit half-sample mirror padding.
    fn mean_filter_1d(values: &[f64], size: usize) -> Vec<f64> {
        let n = values.len() as isize;
        let mut padded = Vec::new();
        for i in -(n)..(2 * n) {
            let j = if i < 0 {
                -i - 1
            } else if i >= n {
                2 * n - 1 - i
            } else {
                i
            };
            padded.push(values[j as usize]);
        }
        (0..n)
            .map(|i| {
                let start = i + n - size as isize / 2;
                (0..size).map(|k| padded[(start + k as isize) as usize]).sum::<f64>()
                    / size as f64
            })
            .collect()
    }

    #[test]
    fn axial_mean_matches_1d_oracle() {
        let g = Geometry::unit([1, 1, 4]).unwrap();
        let v = Volume::new(g, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let mut rng = plan_rng(0);
        for size in [2, 3, 4] {
            let out = apply_artifact(&v, &ArtifactSpec::AxialMeanFilter { size }, &mut rng).unwrap();
            let expected = mean_filter_1d(&[0.0, 1.0, 2.0, 3.0], size);
            for (a, b) in out.data().iter().zip(&expected) {
                assert!((a - b).abs() < 1e-12, "size {size}: {:?} vs {expected:?}", out.data());
            }
        }
        let out = apply_artifact(&v, &ArtifactSpec::AxialMeanFilter { size: 2 }, &mut rng).unwrap();
        assert_eq!(out.data(), &[0.0, 0.5, 1.5, 2.5]);
    }

    #[test]
    fn axial_mean_only_touches_z() {
        let v = Volume::from_fn(Geometry::unit([4, 3, 1]).unwrap(), |x, y, _| (x * 7 + y) as f64);
        let out = apply_artifact(&v, &ArtifactSpec::AxialMeanFilter { size: 3 }, &mut plan_rng(0))
            .unwrap();
        for (a, b) in out.data().iter().zip(v.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_noise_is_identity() {
        let v = ramp([5, 4, 3]);
        let spec = ArtifactSpec::GaussianNoise {
            sd: 0.0,
            scale: NoiseScale::RobustRange,
        };
        assert_eq!(apply_artifact(&v, &spec, &mut plan_rng(9)).unwrap(), v);
    }

    #[test]
    fn noise_scale_follows_robust_range() {
        let g = Geometry::unit([40, 40, 40]).unwrap();
        let v = Volume::from_fn(g, |x, _, _| x as f64 * 10.0);
        let range = robust_range(v.data());
        let spec = ArtifactSpec::GaussianNoise {
            sd: 0.05,
            scale: NoiseScale::RobustRange,
        };
        let out = apply_artifact(&v, &spec, &mut plan_rng(1)).unwrap();
        let diffs: Vec<f64> = out.data().iter().zip(v.data()).map(|(a, b)| a - b).collect();
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((sd / (0.05 * range) - 1.0).abs() < 0.03, "sd {sd} range {range}");
        assert!(mean.abs() < 0.05 * range * 0.05);

        let abs = ArtifactSpec::GaussianNoise {
            sd: 2.0,
            scale: NoiseScale::Absolute,
        };
        let out = apply_artifact(&v, &abs, &mut plan_rng(1)).unwrap();
        let var = out.data().iter().zip(v.data()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n;
        assert!((var.sqrt() - 2.0).abs() < 0.05);
    }

    #[test]
    fn zero_bias_is_identity() {
        let v = ramp([6, 5, 4]);
        for order in 0..4 {
            let spec = ArtifactSpec::BiasField {
                order,
                coefficients: vec![0.0; basis_len(order)],
            };
            assert_eq!(apply_artifact(&v, &spec, &mut plan_rng(0)).unwrap(), v);
        }
    }

    #[test]
    fn edge_enhance_is_unsharp_mask() {
        let v = ramp([6, 6, 6]);
        let mut rng = plan_rng(0);
        let blurred = apply_artifact(&v, &ArtifactSpec::Blur { sd: 1.0 }, &mut rng).unwrap();
        let sharp = apply_artifact(&v, &ArtifactSpec::EdgeEnhance { sd: 1.0 }, &mut rng).unwrap();
        for ((s, b), o) in sharp.data().iter().zip(blurred.data()).zip(v.data()) {
            assert!((s - (2.0 * o - b)).abs() < 1e-12);
        }
    }

    #[test]
    fn blur_range_and_mean() {
        let v = Volume::from_fn(Geometry::unit([9, 8, 7]).unwrap(), |x, y, z| {
            ((x * 31 + y * 17 + z * 7) % 13) as f64
        });
        for sd in [0.5, 1.0, 1.75] {
            let out = apply_artifact(&v, &ArtifactSpec::Blur { sd }, &mut plan_rng(0)).unwrap();
            let (min, max) = minmax(v.data());
            let (omin, omax) = minmax(out.data());
            assert!(omin >= min - 1e-12 && omax <= max + 1e-12);
            let mean = v.data().iter().sum::<f64>();
            let omean = out.data().iter().sum::<f64>();
            assert!(((mean - omean) / mean).abs() < 1e-6);
        }
    }

    fn minmax(d: &[f64]) -> (f64, f64) {
        d.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
    }

    #[test]
    fn parameter_errors() {
        let v = ramp([4, 4, 4]);
        let mut rng = plan_rng(0);
        let bad = [
            ArtifactSpec::Blur { sd: 0.0 },
            ArtifactSpec::EdgeEnhance { sd: -1.0 },
            ArtifactSpec::AnisoDownsample { axis: 0, factor: 0.0 },
            ArtifactSpec::AnisoDownsample { axis: 3, factor: 2.0 },
            ArtifactSpec::GaussianNoise {
                sd: -0.1,
                scale: NoiseScale::Absolute,
            },
            ArtifactSpec::BiasField {
                order: 2,
                coefficients: vec![0.0; 3],
            },
            ArtifactSpec::Motion {
                transforms: vec![],
                phase_axis: 0,
            },
            ArtifactSpec::Ghosting {
                n_ghosts: 0,
                axis: 0,
                intensity: 0.2,
            },
            ArtifactSpec::Spike {
                positions: vec![[0.7, 0.0, 0.0]],
                intensity_factor: 0.5,
            },
        ];
        for spec in &bad {
            assert!(
                matches!(apply_artifact(&v, spec, &mut rng), Err(Error::Parameter(_))),
                "{spec:?}"
            );
        }
    }

    #[test]
    fn non_finite_input_rejected() {
        let mut v = ramp([3, 3, 3]);
        v.data_mut()[4] = f64::NAN;
        let err = apply_artifact(&v, &ArtifactSpec::Blur { sd: 1.0 }, &mut plan_rng(0)).unwrap_err();
        assert!(matches!(err, Error::NonFiniteInput { index: 4 }));
    }

    #[test]
    fn spec_json_is_tagged() {
        let spec = ArtifactSpec::Ghosting {
            n_ghosts: 3,
            axis: 1,
            intensity: 0.25,
        };
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(json, r#"{"kind":"ghosting","n_ghosts":3,"axis":1,"intensity":0.25}"#);
        let noise: ArtifactSpec = serde_json::from_str(r#"{"kind":"gaussian_noise","sd":0.05}"#).unwrap();
        assert_eq!(
            noise,
            ArtifactSpec::GaussianNoise {
                sd: 0.05,
                scale: NoiseScale::RobustRange
            }
        );
    }

    #[test]
    fn percentiles() {
        let v: Vec<f64> = (0..101).map(|i| i as f64).collect();
        assert_eq!(percentile(&v, 1.0), 1.0);
        assert_eq!(percentile(&v, 99.0), 99.0);
        assert_eq!(percentile(&[0.0, 10.0], 25.0), 2.5);
    }
}
