//! Separable spatial filters with half-sample symmetric ("mirror") padding.
//!
//! Padding reflects about the array edge including the edge sample:
//! `... c b a | a b c ... x y z | z y x ...`. With a symmetric normalized
//! kernel this preserves the sum of the signal exactly.

/// Maps any integer position to `0..n` by half-sample symmetric reflection.
#[inline]
pub fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

/// Normalized Gaussian taps, truncated at 4 standard deviations.
pub fn gaussian_kernel(sd: f64) -> Vec<f64> {
    let radius = (4.0 * sd + 0.5) as usize;
    let mut taps: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-0.5 * d * d / (sd * sd)).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Correlates every line along `axis` with `kernel`, where tap `k` reads
/// position `i + k - origin`.
pub fn correlate_axis(
    data: &[f64],
    dims: [usize; 3],
    axis: usize,
    kernel: &[f64],
    origin: usize,
) -> Vec<f64> {
    let n = dims[axis];
    let stride = match axis {
        0 => 1,
        1 => dims[0],
        _ => dims[0] * dims[1],
    };
    let mut out = vec![0.0; data.len()];
    let mut line = vec![0.0; n];
    let mut padded = vec![0.0; n + kernel.len() - 1];
    for start in line_starts(dims, axis) {
        for (i, v) in line.iter_mut().enumerate() {
            *v = data[start + i * stride];
        }
        for (p, v) in padded.iter_mut().enumerate() {
            *v = line[reflect(p as isize - origin as isize, n)];
        }
        for i in 0..n {
            let acc: f64 = kernel.iter().zip(&padded[i..]).map(|(w, x)| w * x).sum();
            out[start + i * stride] = acc;
        }
    }
    out
}

/// Offsets of the first voxel of every line running along `axis`.
pub fn line_starts(dims: [usize; 3], axis: usize) -> Vec<usize> {
    let [nx, ny, nz] = dims;
    let mut starts = Vec::new();
    match axis {
        0 => {
            for z in 0..nz {
                for y in 0..ny {
                    starts.push(nx * (y + ny * z));
                }
            }
        }
        1 => {
            for z in 0..nz {
                for x in 0..nx {
                    starts.push(x + nx * ny * z);
                }
            }
        }
        _ => {
            for y in 0..ny {
                for x in 0..nx {
                    starts.push(x + nx * y);
                }
            }
        }
    }
    starts
}

/// Isotropic Gaussian smoothing; `sd` in voxels.
pub fn gaussian_blur(data: &[f64], dims: [usize; 3], sd: f64) -> Vec<f64> {
    let kernel = gaussian_kernel(sd);
    let origin = kernel.len() / 2;
    let mut out = data.to_vec();
    for axis in 0..3 {
        if dims[axis] > 1 {
            out = correlate_axis(&out, dims, axis, &kernel, origin);
        }
    }
    out
}

/// Moving average of `size` samples along `axis`. For even sizes the
/// window covers `[i - size/2, i + size/2 - 1]`.
pub fn mean_filter_axis(data: &[f64], dims: [usize; 3], axis: usize, size: usize) -> Vec<f64> {
    let kernel = vec![1.0 / size as f64; size];
    correlate_axis(data, dims, axis, &kernel, size / 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_pattern() {
        let idx: Vec<usize> = (-4..8).map(|i| reflect(i, 4)).collect();
        assert_eq!(idx, vec![3, 2, 1, 0, 0, 1, 2, 3, 3, 2, 1, 0]);
        assert_eq!(reflect(-1, 1), 0);
        assert_eq!(reflect(5, 1), 0);
    }

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        let k = gaussian_kernel(1.3);
        assert_eq!(k.len(), 2 * 5 + 1);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..k.len() {
            assert_eq!(k[i], k[k.len() - 1 - i]);
        }
    }

    #[test]
    fn blur_preserves_sum_even_with_wide_kernel() {
        let dims = [3, 5, 2];
        let data: Vec<f64> = (0..30).map(|i| ((i * 7) % 5) as f64).collect();
        let out = gaussian_blur(&data, dims, 1.75);
        let a: f64 = data.iter().sum();
        let b: f64 = out.iter().sum();
        assert!((a - b).abs() < 1e-10 * a);
    }
}
