//! 3D discrete Fourier transform over x-fastest volumes.

use rustfft::num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

/// In-place 3D DFT. The inverse transform is normalized by `1 / N`, so
/// `inverse(forward(x)) == x` up to rounding.
pub fn fft3d(data: &mut [Complex64], dims: [usize; 3], direction: FftDirection) {
    let [nx, ny, nz] = dims;
    assert_eq!(data.len(), nx * ny * nz, "buffer does not match dims");
    let mut planner = FftPlanner::new();

    // x lines are contiguous, so they go through in a single batched call.
    if nx > 1 {
        let plan = planner.plan_fft(nx, direction);
        plan.process(data);
    }

    if ny > 1 {
        let plan = planner.plan_fft(ny, direction);
        let mut lines = vec![Complex64::default(); nx * ny];
        for z in 0..nz {
            let plane = &mut data[z * nx * ny..(z + 1) * nx * ny];
            gather_transposed(plane, &mut lines, nx, ny);
            plan.process(&mut lines);
            scatter_transposed(&lines, plane, nx, ny);
        }
    }

    if nz > 1 {
        let plan = planner.plan_fft(nz, direction);
        let mut lines = vec![Complex64::default(); nx * nz];
        let plane = nx * ny;
        for y in 0..ny {
            for z in 0..nz {
                let src = z * plane + y * nx;
                for x in 0..nx {
                    lines[x * nz + z] = data[src + x];
                }
            }
            plan.process(&mut lines);
            for z in 0..nz {
                let dst = z * plane + y * nx;
                for x in 0..nx {
                    data[dst + x] = lines[x * nz + z];
                }
            }
        }
    }

    if direction == FftDirection::Inverse {
        let scale = 1.0 / data.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

/// plane[y * nx + x] -> lines[x * ny + y]
fn gather_transposed(plane: &[Complex64], lines: &mut [Complex64], nx: usize, ny: usize) {
    for y in 0..ny {
        for x in 0..nx {
            lines[x * ny + y] = plane[y * nx + x];
        }
    }
}

fn scatter_transposed(lines: &[Complex64], plane: &mut [Complex64], nx: usize, ny: usize) {
    for y in 0..ny {
        for x in 0..nx {
            plane[y * nx + x] = lines[x * ny + y];
        }
    }
}

pub fn forward(values: &[f64], dims: [usize; 3]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft3d(&mut buf, dims, FftDirection::Forward);
    buf
}

/// Inverse transform followed by the voxelwise magnitude.
pub fn inverse_magnitude(mut kspace: Vec<Complex64>, dims: [usize; 3]) -> Vec<f64> {
    fft3d(&mut kspace, dims, FftDirection::Inverse);
    kspace.iter().map(|c| c.norm()).collect()
}

/// Signed frequency of unshifted index `u` on an axis of length `n`.
pub fn signed_frequency(u: usize, n: usize) -> isize {
    if u <= n / 2 {
        u as isize
    } else {
        u as isize - n as isize
    }
}
