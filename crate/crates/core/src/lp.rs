//! Exact solvers for the multi-knapsack LP
//!
//! ```text
//! max Σ r_j x_j   s.t.   Σ a_j x_j ≤ b,   0 ≤ x ≤ 1
//! ```
//!
//! and its dual `min bᵀλ + Σ (r_j - a_jᵀλ)⁺` over `λ ≥ 0`. Items are stored
//! row-major: item `j` consumes `a[j*m..(j+1)*m]`.

use crate::error::{OlpError, Result};

/// Relative slack used when comparing cumulative consumption with capacity.
const CAPACITY_EPS: f64 = 1e-12;

/// Smallest and largest minimizers of `bλ + Σ (r_j - a_j λ)⁺` over `[0, upper]`
/// for a single resource.
pub fn ratio_scan(a: &[f64], r: &[f64], b: f64, upper: f64) -> (f64, f64) {
    let mut order: Vec<usize> = (0..r.len()).filter(|&j| r[j] > 0.0).collect();
    order.sort_by(|&i, &j| (r[j] / a[j]).total_cmp(&(r[i] / a[i])).then(i.cmp(&j)));
    let eps = CAPACITY_EPS * (1.0 + b.abs());

    // distinct ratios in descending order with the cumulative weight through each
    let mut groups: Vec<(f64, f64)> = Vec::new();
    let mut cum = 0.0;
    for &j in &order {
        let rho = r[j] / a[j];
        cum += a[j];
        match groups.last_mut() {
            Some(last) if last.0 == rho => last.1 = cum,
            _ => groups.push((rho, cum)),
        }
    }

    let lo = groups
        .iter()
        .find(|(_, c)| *c > b + eps)
        .map_or(0.0, |(rho, _)| *rho);
    let hi = if b <= 0.0 {
        upper
    } else {
        groups
            .iter()
            .find(|(_, c)| *c >= b - eps)
            .map_or(0.0, |(rho, _)| *rho)
    };
    (lo.clamp(0.0, upper), hi.clamp(0.0, upper).max(lo.clamp(0.0, upper)))
}

/// Fractional greedy fill by `r/a` descending (index order on ties); items with
/// `r ≤ 0` are skipped. Returns `x`.
pub fn greedy_fill_m1(a: &[f64], r: &[f64], b: f64) -> Vec<f64> {
    let mut order: Vec<usize> = (0..r.len()).filter(|&j| r[j] > 0.0).collect();
    order.sort_by(|&i, &j| (r[j] / a[j]).total_cmp(&(r[i] / a[i])).then(i.cmp(&j)));
    let mut x = vec![0.0; r.len()];
    let mut left = b.max(0.0);
    for j in order {
        if left <= 0.0 {
            break;
        }
        let take = (left / a[j]).min(1.0);
        x[j] = take;
        left = if take < 1.0 { 0.0 } else { left - a[j] };
    }
    x
}

/// Solves `B z = rhs` for a dense row-major `k × k` matrix by Gaussian
/// elimination with partial pivoting. `None` if the matrix is singular.
pub(crate) fn dense_solve(mat: &[f64], rhs: &[f64], k: usize) -> Option<Vec<f64>> {
    let mut m = mat.to_vec();
    let mut z = rhs.to_vec();
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| m[i * k + col].abs().total_cmp(&m[j * k + col].abs()))?;
        if m[piv * k + col].abs() < 1e-14 {
            return None;
        }
        if piv != col {
            for c in 0..k {
                m.swap(piv * k + c, col * k + c);
            }
            z.swap(piv, col);
        }
        let p = m[col * k + col];
        for row in col + 1..k {
            let f = m[row * k + col] / p;
            if f != 0.0 {
                for c in col..k {
                    m[row * k + c] -= f * m[col * k + c];
                }
                z[row] -= f * z[col];
            }
        }
    }
    for row in (0..k).rev() {
        let mut s = z[row];
        for c in row + 1..k {
            s -= m[row * k + c] * z[c];
        }
        z[row] = s / m[row * k + row];
    }
    Some(z)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    /// Simplex multipliers of the capacity rows; an optimal dual point.
    pub lambda: Vec<f64>,
    pub value: f64,
    pub pivots: usize,
}

/// Bounded-variable primal simplex specialised to the multi-knapsack LP.
///
/// Columns are the items (bounded by 1) followed by one slack per resource.
/// The start is a greedy feasible point with the slacks basic; pricing is
/// Dantzig's rule, switching to Bland's rule after a run of degenerate pivots.
pub fn solve_knapsack_lp(m: usize, a: &[f64], r: &[f64], b: &[f64], max_pivots: usize) -> Result<LpSolution> {
    let n_all = r.len();
    if a.len() != n_all * m {
        return Err(OlpError::DimensionMismatch {
            expected: n_all * m,
            got: a.len(),
        });
    }
    crate::error::check_dim(m, b.len())?;
    if b.iter().any(|x| *x < 0.0) {
        return Err(OlpError::Config("capacity must be non-negative".into()));
    }

    // items with r ≤ 0 are never worth taking
    let items: Vec<usize> = (0..n_all).filter(|&j| r[j] > 0.0).collect();
    let n = items.len();
    let col = |k: usize, i: usize| -> f64 {
        if k < n {
            a[items[k] * m + i]
        } else if k - n == i {
            1.0
        } else {
            0.0
        }
    };
    let cost = |k: usize| if k < n { r[items[k]] } else { 0.0 };
    let r_scale = items.iter().map(|&j| r[j]).fold(0.0, f64::max);
    let dj_eps = 1e-11 * (1.0 + r_scale);
    let piv_eps = 1e-11;

    // greedy warm start: items at their upper bound while they fit
    let mut at_upper = vec![false; n];
    let mut left = b.to_vec();
    let mut order: Vec<usize> = (0..n).collect();
    let weight = |k: usize| (0..m).map(|i| col(k, i)).sum::<f64>();
    order.sort_by(|&p, &q| (cost(q) / weight(q)).total_cmp(&(cost(p) / weight(p))).then(p.cmp(&q)));
    for k in order {
        if (0..m).all(|i| col(k, i) <= left[i]) {
            at_upper[k] = true;
            for (i, l) in left.iter_mut().enumerate() {
                *l -= col(k, i);
            }
        }
    }

    let mut basis: Vec<usize> = (n..n + m).collect();
    let mut basic_pos: Vec<Option<usize>> = vec![None; n + m];
    for (p, &k) in basis.iter().enumerate() {
        basic_pos[k] = Some(p);
    }

    let mut bmat = vec![0.0; m * m];
    let mut y;
    let mut x_b;
    let mut pivots = 0;
    let mut degenerate_run = 0;
    loop {
        // B (row i, column p) = column basis[p]
        for i in 0..m {
            for (p, &k) in basis.iter().enumerate() {
                bmat[i * m + p] = col(k, i);
            }
        }
        let mut rhs = b.to_vec();
        for k in 0..n {
            if at_upper[k] {
                for (i, v) in rhs.iter_mut().enumerate() {
                    *v -= col(k, i);
                }
            }
        }
        x_b = dense_solve(&bmat, &rhs, m).ok_or(OlpError::SolverBudgetExceeded {
            iters: pivots,
            gap: f64::NAN,
        })?;
        let mut bt = vec![0.0; m * m];
        for i in 0..m {
            for p in 0..m {
                bt[p * m + i] = bmat[i * m + p];
            }
        }
        let c_b: Vec<f64> = basis.iter().map(|&k| cost(k)).collect();
        y = dense_solve(&bt, &c_b, m).ok_or(OlpError::SolverBudgetExceeded {
            iters: pivots,
            gap: f64::NAN,
        })?;

        let bland = degenerate_run > 50;
        let mut entering: Option<(usize, f64)> = None;
        for k in 0..n + m {
            if basic_pos[k].is_some() {
                continue;
            }
            let dj = cost(k) - (0..m).map(|i| col(k, i) * y[i]).sum::<f64>();
            let improving = if k < n && at_upper[k] { dj < -dj_eps } else { dj > dj_eps };
            if !improving {
                continue;
            }
            match entering {
                None => entering = Some((k, dj)),
                Some((_, best)) if !bland && dj.abs() > best.abs() => entering = Some((k, dj)),
                _ => {}
            }
            if bland {
                break;
            }
        }
        let Some((q, dq)) = entering else { break };
        if pivots >= max_pivots {
            return Err(OlpError::SolverBudgetExceeded {
                iters: pivots,
                gap: dq.abs(),
            });
        }
        pivots += 1;

        let sgn = if dq > 0.0 { 1.0 } else { -1.0 };
        let aq: Vec<f64> = (0..m).map(|i| col(q, i)).collect();
        let w = dense_solve(&bmat, &aq, m).ok_or(OlpError::SolverBudgetExceeded {
            iters: pivots,
            gap: f64::NAN,
        })?;

        let mut theta = if q < n { 1.0 } else { f64::INFINITY };
        let mut leave: Option<(usize, bool)> = None;
        for p in 0..m {
            let rate = -sgn * w[p];
            let k = basis[p];
            let (limit, to_upper) = if rate < -piv_eps {
                (x_b[p].max(0.0) / -rate, false)
            } else if rate > piv_eps && k < n {
                ((1.0 - x_b[p]).max(0.0) / rate, true)
            } else {
                continue;
            };
            let better = match leave {
                None => limit < theta,
                Some((lp, _)) => {
                    limit < theta - 1e-15
                        || (limit <= theta + 1e-15
                            && if bland { k < basis[lp] } else { w[p].abs() > w[lp].abs() })
                }
            };
            if better {
                theta = limit;
                leave = Some((p, to_upper));
            }
        }
        if !theta.is_finite() {
            return Err(OlpError::Config("knapsack LP is unbounded".into()));
        }
        degenerate_run = if theta <= 1e-14 { degenerate_run + 1 } else { 0 };
        match leave {
            None => at_upper[q] = !at_upper[q],
            Some((p, to_upper)) => {
                let out = basis[p];
                basic_pos[out] = None;
                if out < n {
                    at_upper[out] = to_upper;
                }
                basis[p] = q;
                basic_pos[q] = Some(p);
                if q < n {
                    at_upper[q] = false;
                }
            }
        }
    }

    let mut x = vec![0.0; n_all];
    for k in 0..n {
        let v = match basic_pos[k] {
            Some(p) => x_b[p].clamp(0.0, 1.0),
            None if at_upper[k] => 1.0,
            None => 0.0,
        };
        x[items[k]] = v;
    }
    let value = x.iter().zip(r).map(|(x, r)| x * r).sum();
    let lambda = y.iter().map(|v| v.max(0.0)).collect();
    Ok(LpSolution { x, lambda, value, pivots })
}

/// `bᵀλ + Σ (r_j - a_jᵀλ)⁺`
pub fn hinge_dual_value(m: usize, a: &[f64], r: &[f64], b: &[f64], lambda: &[f64]) -> f64 {
    let mut v: f64 = b.iter().zip(lambda).map(|(b, l)| b * l).sum();
    for (j, rj) in r.iter().enumerate() {
        let s: f64 = a[j * m..(j + 1) * m].iter().zip(lambda).map(|(a, l)| a * l).sum();
        v += (rj - s).max(0.0);
    }
    v
}

/// Alternative optimal dual points of the multi-knapsack LP near `lambda`.
///
/// Re-solves with capacity `b ± μ e_i`: for small `μ` the perturbed optimum
/// is the vertex of the optimal dual face that minimizes (maximizes) `λ_i`,
/// so a non-singleton face shows up along some coordinate. Returns the unit
/// directions from `lambda` to any such point at distance `≥ resolution`
/// whose unperturbed dual value stays within `10·tol` of `value`.
#[allow(clippy::too_many_arguments)]
pub fn alternate_optima(
    m: usize,
    a: &[f64],
    r: &[f64],
    b: &[f64],
    lambda: &[f64],
    value: f64,
    tol: f64,
    resolution: f64,
) -> Vec<Vec<f64>> {
    let scale = b.iter().copied().fold(0.0, f64::max);
    let mu = 1e-7 * (1.0 + scale);
    let mut out = Vec::new();
    for i in 0..m {
        for s in [1.0, -1.0] {
            let mut bp = b.to_vec();
            bp[i] += s * mu;
            if bp[i] < 0.0 {
                continue;
            }
            let Ok(sol) = solve_knapsack_lp(m, a, r, &bp, 100 * (r.len() + m)) else {
                continue;
            };
            let diff: Vec<f64> = sol.lambda.iter().zip(lambda).map(|(x, y)| x - y).collect();
            let dist = diff.iter().map(|x| x * x).sum::<f64>().sqrt();
            if dist < resolution {
                continue;
            }
            let v = hinge_dual_value(m, a, r, b, &sol.lambda);
            let slack = 10.0 * tol * (1.0 + value.abs()) + mu * diff.iter().map(|x| x.abs()).sum::<f64>();
            if v - value <= slack {
                out.push(diff.iter().map(|x| x / dist).collect());
            }
        }
    }
    out
}
