//! Cubic B-spline interpolation on 1D lines with whole-sample mirror
//! boundaries (`... c b | a b c ... x y | x w ...`).

const POLE: f64 = -0.267_949_192_431_122_7; // sqrt(3) - 2
const TOLERANCE: f64 = 1e-12;

/// Converts samples into cubic B-spline coefficients in place.
pub fn prefilter(c: &mut [f64]) {
    let n = c.len();
    if n < 2 {
        return;
    }
    let z = POLE;
    let gain = (1.0 - z) * (1.0 - 1.0 / z);
    c.iter_mut().for_each(|v| *v *= gain);

    c[0] = initial_causal(c, z);
    for k in 1..n {
        c[k] += z * c[k - 1];
    }
    c[n - 1] = (z / (z * z - 1.0)) * (z * c[n - 2] + c[n - 1]);
    for k in (0..n - 1).rev() {
        c[k] = z * (c[k + 1] - c[k]);
    }
}

fn initial_causal(c: &[f64], z: f64) -> f64 {
    let n = c.len();
    let horizon = (TOLERANCE.ln() / z.abs().ln()).ceil() as usize;
    if horizon < n {
        let mut zn = z;
        let mut sum = c[0];
        for v in &c[1..horizon] {
            sum += zn * v;
            zn *= z;
        }
        sum
    } else {
        let iz = 1.0 / z;
        let mut zn = z;
        let mut z2n = z.powi(n as i32 - 1);
        let mut sum = c[0] + z2n * c[n - 1];
        z2n = z2n * z2n * iz;
        for v in &c[1..n - 1] {
            sum += (zn + z2n) * v;
            zn *= z;
            z2n *= iz;
        }
        sum / (1.0 - zn * zn)
    }
}

#[inline]
fn mirror(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

fn cubic_weights(t: f64) -> [f64; 4] {
    // Weights for samples floor(x) - 1 .. floor(x) + 2, with t = x - floor(x).
    let s = 1.0 - t;
    [
        s * s * s / 6.0,
        (4.0 - 6.0 * t * t + 3.0 * t * t * t) / 6.0,
        (4.0 - 6.0 * s * s + 3.0 * s * s * s) / 6.0,
        t * t * t / 6.0,
    ]
}

/// Evaluates the spline with coefficients `coeffs` at real position `x`.
pub fn evaluate(coeffs: &[f64], x: f64) -> f64 {
    let n = coeffs.len();
    if n == 1 {
        return coeffs[0];
    }
    let base = x.floor();
    let w = cubic_weights(x - base);
    let base = base as isize;
    (0..4)
        .map(|k| w[k] * coeffs[mirror(base - 1 + k as isize, n)])
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_samples() {
        for n in [1usize, 2, 3, 7, 40] {
            let samples: Vec<f64> = (0..n).map(|i| ((i * 7) % 5) as f64 - 1.5).collect();
            let mut c = samples.clone();
            prefilter(&mut c);
            for (i, s) in samples.iter().enumerate() {
                assert!((evaluate(&c, i as f64) - s).abs() < 1e-9, "n={n} i={i}");
            }
        }
    }

    #[test]
    fn reproduces_constants_and_interior_lines() {
        let mut c = vec![2.5; 9];
        prefilter(&mut c);
        for k in 0..80 {
            let x = -1.0 + k as f64 * 0.125;
            assert!((evaluate(&c, x) - 2.5).abs() < 1e-9);
        }
        // Away from the mirrored ends the cubic spline reproduces linear data.
        let samples: Vec<f64> = (0..64).map(|i| 0.5 * i as f64 + 1.0).collect();
        let mut c = samples.clone();
        prefilter(&mut c);
        for k in 0..100 {
            let x = 20.0 + k as f64 * 0.2;
            assert!((evaluate(&c, x) - (0.5 * x + 1.0)).abs() < 1e-8);
        }
    }

    #[test]
    fn weights_partition_unity() {
        for k in 0..=10 {
            let w = cubic_weights(k as f64 / 10.0);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
