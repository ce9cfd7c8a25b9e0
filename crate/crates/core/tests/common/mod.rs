//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

/// `bᵀλ + Σ_j (r_j - a_jᵀλ)⁺` written out directly.
pub fn hinge_objective(m: usize, a: &[f64], r: &[f64], b: &[f64], lambda: &[f64]) -> f64 {
    let mut v: f64 = b.iter().zip(lambda).map(|(b, l)| b * l).sum();
    for (j, rj) in r.iter().enumerate() {
        let s: f64 = (0..m).map(|i| a[j * m + i] * lambda[i]).sum();
        v += (rj - s).max(0.0);
    }
    v
}

/// Minimum of a convex `f` on `[0, upper]^m` by a uniform grid of `n` points
/// per axis followed by `zooms` passes onto ±3 cells around the best point.
pub fn grid_min(m: usize, upper: &[f64], n: usize, zooms: usize, f: impl Fn(&[f64]) -> f64) -> (Vec<f64>, f64) {
    assert!(n >= 2 && upper.len() == m);
    let mut lo = vec![0.0; m];
    let mut hi = upper.to_vec();
    let mut best = (vec![0.0; m], f64::INFINITY);
    let mut p = vec![0.0; m];
    for _ in 0..=zooms {
        let step: Vec<f64> = (0..m).map(|i| (hi[i] - lo[i]) / (n - 1) as f64).collect();
        let mut idx = vec![0usize; m];
        'outer: loop {
            for i in 0..m {
                p[i] = lo[i] + idx[i] as f64 * step[i];
            }
            let v = f(&p);
            if v < best.1 {
                best = (p.clone(), v);
            }
            for i in 0..m {
                idx[i] += 1;
                if idx[i] < n {
                    continue 'outer;
                }
                idx[i] = 0;
            }
            break;
        }
        for i in 0..m {
            lo[i] = (best.0[i] - 3.0 * step[i]).max(0.0);
            hi[i] = (best.0[i] + 3.0 * step[i]).min(upper[i]);
        }
    }
    best
}
