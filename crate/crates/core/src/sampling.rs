//! Deterministic low-discrepancy point sets.

const PRIMES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = u64::from(base);
    let mut inv = 1.0 / f64::from(base);
    let mut out = 0.0;
    while index > 0 {
        out += (index % b) as f64 * inv;
        index /= b;
        inv /= f64::from(base);
    }
    out
}

/// `i`-th point of the Halton sequence in `[0,1)^dim`, skipping the origin.
pub fn halton(i: usize, dim: usize) -> Vec<f64> {
    assert!(dim <= PRIMES.len(), "Halton sequence limited to {} dimensions", PRIMES.len());
    (0..dim).map(|d| radical_inverse(i as u64 + 1, PRIMES[d])).collect()
}

/// `count` points of the ball `B_r(center)`, radius drawn as `r·u^{1/n}`.
pub fn halton_ball(center: &[f64], r: f64, count: usize) -> Vec<Vec<f64>> {
    let n = center.len();
    (0..count)
        .map(|i| {
            let h = halton(i, n + 1);
            let dir = gaussian_direction(&h[..n]);
            let rad = r * h[n].powf(1.0 / n as f64);
            center.iter().zip(&dir).map(|(c, d)| c + rad * d).collect()
        })
        .collect()
}

/// Maps uniform samples to a unit direction via per-coordinate inverse normal transforms.
fn gaussian_direction(u: &[f64]) -> Vec<f64> {
    let g: Vec<f64> = u.iter().map(|&p| inverse_normal(p.clamp(1e-12, 1.0 - 1e-12))).collect();
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-12 {
        let mut e = vec![0.0; u.len()];
        e[0] = 1.0;
        return e;
    }
    g.iter().map(|x| x / norm).collect()
}

/// Acklam's rational approximation of the standard normal quantile.
fn inverse_normal(p: f64) -> f64 {
    const A: [f64; 6] = [-3.969683028665376e1, 2.209460984245205e2, -2.759285104469687e2, 1.383577518672690e2, -3.066479806614716e1, 2.506628277459239];
    const B: [f64; 5] = [-5.447609879822406e1, 1.615858368580409e2, -1.556989798598866e2, 6.680131188771972e1, -1.328068155288572e1];
    const C: [f64; 6] = [-7.784894002430293e-3, -3.223964580411365e-1, -2.400758277161838, -2.549732539343734, 4.374664141464968, 2.938163982698783];
    const D: [f64; 4] = [7.784695709041462e-3, 3.224671290700398e-1, 2.445134137142996, 3.754408661907416];
    let plow = 0.02425;
    if p < plow {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5]) / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p > 1.0 - plow {
        -inverse_normal(1.0 - p)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// `count` deterministic unit directions in `R^n`: evenly spaced angles in
/// the plane, a Fibonacci lattice on the sphere, Halton-based otherwise.
pub fn unit_directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    match n {
        1 => (0..count).map(|i| vec![if i % 2 == 0 { 1.0 } else { -1.0 }]).collect(),
        2 => (0..count)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let th = golden * i as f64;
                    vec![r * th.cos(), r * th.sin(), z]
                })
                .collect()
        }
        _ => (0..count).map(|i| gaussian_direction(&halton(i, n))).collect(),
    }
}
