//! Image-space artifacts: blur, edge enhancement, slice-thickness mean
//! filter and anisotropic resolution loss.

use super::bspline;
use crate::filter::{gaussian_blur, line_starts, mean_filter_axis};

pub(super) fn blur(data: &[f64], dims: [usize; 3], sd: f64) -> Vec<f64> {
    gaussian_blur(data, dims, sd)
}

/// Unsharp masking with unit amount: `2 v - blur(v)`.
pub(super) fn edge_enhance(data: &[f64], dims: [usize; 3], sd: f64) -> Vec<f64> {
    let smooth = gaussian_blur(data, dims, sd);
    data.iter().zip(&smooth).map(|(v, s)| 2.0 * v - s).collect()
}

pub(super) fn axial_mean(data: &[f64], dims: [usize; 3], size: usize) -> Vec<f64> {
    mean_filter_axis(data, dims, 2, size)
}

/// Number of samples kept when an axis of length `n` is downsampled.
pub fn downsampled_len(n: usize, factor: f64) -> usize {
    ((n as f64 / factor).round() as usize).clamp(1, n)
}

/// Area-averaging downsample of one line to `m` samples.
pub fn box_downsample(line: &[f64], m: usize) -> Vec<f64> {
    let n = line.len();
    let width = n as f64 / m as f64;
    (0..m)
        .map(|j| {
            let lo = j as f64 * width;
            let hi = lo + width;
            let mut acc = 0.0;
            let mut i = lo.floor() as usize;
            while i < n && (i as f64) < hi {
                let overlap = (hi.min(i as f64 + 1.0) - lo.max(i as f64)).max(0.0);
                acc += overlap * line[i];
                i += 1;
            }
            acc / width
        })
        .collect()
}

/// Cubic B-spline resampling of `coarse` back onto `n` samples, treating
/// both as cell-centred grids over the same extent.
pub fn bspline_upsample(coarse: &[f64], n: usize) -> Vec<f64> {
    let m = coarse.len();
    let mut coeffs = coarse.to_vec();
    bspline::prefilter(&mut coeffs);
    (0..n)
        .map(|i| {
            let u = (i as f64 + 0.5) * m as f64 / n as f64 - 0.5;
            bspline::evaluate(&coeffs, u)
        })
        .collect()
}

pub(super) fn aniso_downsample(data: &[f64], dims: [usize; 3], axis: usize, factor: f64) -> Vec<f64> {
    let n = dims[axis];
    let m = downsampled_len(n, factor);
    if m == n {
        return data.to_vec();
    }
    let stride = match axis {
        0 => 1,
        1 => dims[0],
        _ => dims[0] * dims[1],
    };
    let mut out = vec![0.0; data.len()];
    let mut line = vec![0.0; n];
    for start in line_starts(dims, axis) {
        for (i, v) in line.iter_mut().enumerate() {
            *v = data[start + i * stride];
        }
        let up = bspline_upsample(&box_downsample(&line, m), n);
        for (i, v) in up.into_iter().enumerate() {
            out[start + i * stride] = v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_downsample_integer_and_fractional() {
        let line = [1.0, 3.0, 5.0, 7.0];
        assert_eq!(box_downsample(&line, 2), vec![2.0, 6.0]);
        // Width 4/3: first cell = (1 + 3/3) / (4/3).
        let d = box_downsample(&line, 3);
        assert!((d[0] - (1.0 + 3.0 / 3.0) / (4.0 / 3.0)).abs() < 1e-12);
        let mean: f64 = d.iter().sum::<f64>() / 3.0;
        assert!((mean - 4.0).abs() < 1e-12);
    }

    #[test]
    fn downsample_keeps_constants() {
        let dims = [5, 6, 7];
        let data = vec![3.25; 210];
        for axis in 0..3 {
            let out = aniso_downsample(&data, dims, axis, 2.7);
            assert!(out.iter().all(|v| (v - 3.25).abs() < 1e-9));
        }
    }

    #[test]
    fn downsample_loses_detail_along_axis_only() {
        let dims = [8, 8, 8];
        // Alternating pattern along z only.
        let data: Vec<f64> = (0..512).map(|i| if (i / 64) % 2 == 0 { 1.0 } else { 0.0 }).collect();
        let along_x = aniso_downsample(&data, dims, 0, 2.0);
        assert!(along_x.iter().zip(&data).all(|(a, b)| (a - b).abs() < 1e-9));
        let along_z = aniso_downsample(&data, dims, 2, 2.0);
        assert!(along_z.iter().all(|v| (v - 0.5).abs() < 1e-9));
    }

    #[test]
    fn downsampled_lengths() {
        assert_eq!(downsampled_len(64, 1.5), 43);
        assert_eq!(downsampled_len(64, 4.0), 16);
        assert_eq!(downsampled_len(3, 4.0), 1);
    }
}
