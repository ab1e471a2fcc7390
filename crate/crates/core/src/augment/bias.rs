//! Smooth multiplicative intensity inhomogeneity built from a 3D
//! polynomial basis.

/// Exponents `(i, j, k)` of every monomial `x^i y^j z^k` with
/// `i + j + k <= order`, in the order the coefficients are consumed.
pub fn basis_exponents(order: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for i in 0..=order {
        for j in 0..=order - i {
            for k in 0..=order - i - j {
                out.push([i, j, k]);
            }
        }
    }
    out
}

pub fn basis_len(order: usize) -> usize {
    (order + 1) * (order + 2) * (order + 3) / 6
}

/// Axis coordinate normalized to `[-1, 1]`.
fn normalized(i: usize, n: usize) -> f64 {
    if n == 1 {
        0.0
    } else {
        -1.0 + 2.0 * i as f64 / (n - 1) as f64
    }
}

/// The field `exp(sum_i c_i phi_i(x))` sampled on the grid.
pub fn field(dims: [usize; 3], order: usize, coefficients: &[f64]) -> Vec<f64> {
    let exps = basis_exponents(order);
    debug_assert_eq!(exps.len(), coefficients.len());
    let [nx, ny, nz] = dims;
    let powers = |n: usize| -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                let c = normalized(i, n);
                (0..=order).map(|p| c.powi(p as i32)).collect()
            })
            .collect()
    };
    let (px, py, pz) = (powers(nx), powers(ny), powers(nz));
    let mut out = Vec::with_capacity(nx * ny * nz);
    for zp in &pz {
        for yp in &py {
            for xp in &px {
                let log: f64 = exps
                    .iter()
                    .zip(coefficients)
                    .map(|(&[i, j, k], c)| c * xp[i] * yp[j] * zp[k])
                    .sum();
                out.push(log.exp());
            }
        }
    }
    out
}
