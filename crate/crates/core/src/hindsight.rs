//! The hindsight (offline) multi-knapsack LP on a realized request sequence,
//! its dual `bᵀλ + Σ (r_j - a_jᵀλ)⁺`, and primal recovery by complementary
//! slackness.

use std::io::{BufRead, Write};

use crate::error::{check_dim, OlpError, Result};
use crate::fluid_dual::{DualSolution, SolverConfig};
use crate::lp;

/// A realized request sequence, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RequestSample {
    m: usize,
    a: Vec<f64>,
    r: Vec<f64>,
}

impl RequestSample {
    pub fn new(m: usize, a: Vec<f64>, r: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return Err(OlpError::Config("sample dimension must be positive".into()));
        }
        if r.is_empty() {
            return Err(OlpError::Config("request sample must be nonempty".into()));
        }
        if a.len() != r.len() * m {
            return Err(OlpError::DimensionMismatch {
                expected: r.len() * m,
                got: a.len(),
            });
        }
        if a.iter().any(|x| !(x.is_finite() && *x > 0.0)) || r.iter().any(|x| !x.is_finite()) {
            return Err(OlpError::Config(
                "consumption must be positive and finite, rewards finite".into(),
            ));
        }
        Ok(Self { m, a, r })
    }

    pub fn from_pairs(pairs: &[(Vec<f64>, f64)]) -> Result<Self> {
        let m = pairs.first().map_or(0, |p| p.0.len());
        let mut a = Vec::with_capacity(pairs.len() * m);
        let mut r = Vec::with_capacity(pairs.len());
        for (aj, rj) in pairs {
            check_dim(m, aj.len())?;
            a.extend_from_slice(aj);
            r.push(*rj);
        }
        Self::new(m, a, r)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn a(&self, j: usize) -> &[f64] {
        &self.a[j * self.m..(j + 1) * self.m]
    }

    pub fn r(&self, j: usize) -> f64 {
        self.r[j]
    }

    pub fn consumptions(&self) -> &[f64] {
        &self.a
    }

    pub fn rewards(&self) -> &[f64] {
        &self.r
    }

    /// Requests `from..`, or `None` if that is empty.
    pub fn suffix(&self, from: usize) -> Option<Self> {
        (from < self.len()).then(|| Self {
            m: self.m,
            a: self.a[from * self.m..].to_vec(),
            r: self.r[from..].to_vec(),
        })
    }

    /// Upper corner `r̄/A̲` of the dual box for this sample.
    pub fn dual_upper(&self) -> f64 {
        dual_upper(&self.a, &self.r)
    }

    /// CSV rows `a_1,..,a_m,r` under a header `a1,..,am,r`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.m).map(|i| format!("a{i}")).chain(["r".to_string()]).collect();
        writeln!(out, "{}", header.join(","))?;
        for j in 0..self.len() {
            let row: Vec<String> = self.a(j).iter().map(|x| x.to_string()).chain([self.r[j].to_string()]).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| OlpError::Config("empty sample CSV".into()))?
            .map_err(|e| OlpError::Config(e.to_string()))?;
        let m = header.split(',').count().saturating_sub(1);
        let (mut a, mut r) = (Vec::new(), Vec::new());
        for (k, line) in lines.enumerate() {
            let line = line.map_err(|e| OlpError::Config(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: std::result::Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| OlpError::Config(format!("sample row {}: {e}", k + 2)))?;
            check_dim(m + 1, vals.len())?;
            a.extend_from_slice(&vals[..m]);
            r.push(vals[m]);
        }
        Self::new(m, a, r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub x: Vec<f64>,
    pub value: f64,
    pub fractional_count: usize,
}

const FRACTIONAL_EPS: f64 = 1e-9;

impl Allocation {
    fn from_x(x: Vec<f64>, r: &[f64]) -> Self {
        let value = x.iter().zip(r).map(|(x, r)| x * r).sum();
        let fractional_count = x.iter().filter(|v| **v > FRACTIONAL_EPS && **v < 1.0 - FRACTIONAL_EPS).count();
        Self {
            x,
            value,
            fractional_count,
        }
    }
}

pub(crate) fn dual_upper(a: &[f64], r: &[f64]) -> f64 {
    let r_max = r.iter().copied().fold(0.0, f64::max);
    let a_min = a.iter().copied().fold(f64::INFINITY, f64::min);
    if r_max <= 0.0 || !a_min.is_finite() {
        0.0
    } else {
        r_max / a_min
    }
}

fn check_lambda(m: usize, b: &[f64], lambda: &[f64]) -> Result<()> {
    check_dim(m, b.len())?;
    check_dim(m, lambda.len())?;
    if lambda.iter().any(|l| *l < 0.0) {
        return Err(OlpError::Config("dual point must be non-negative".into()));
    }
    Ok(())
}

fn check_capacity(m: usize, b: &[f64]) -> Result<()> {
    check_dim(m, b.len())?;
    if b.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(OlpError::Config(format!("capacity must be finite and >= 0, got {b:?}")));
    }
    Ok(())
}

/// `bᵀλ + Σ_j (r_j - a_jᵀλ)⁺`
pub fn empirical_dual_objective(sample: &RequestSample, b: &[f64], lambda: &[f64]) -> Result<f64> {
    check_lambda(sample.m, b, lambda)?;
    Ok(lp::hinge_dual_value(sample.m, &sample.a, &sample.r, b, lambda))
}

/// `b - Σ_j a_j 1{r_j > a_jᵀλ}`
pub fn empirical_dual_subgradient(sample: &RequestSample, b: &[f64], lambda: &[f64]) -> Result<Vec<f64>> {
    check_lambda(sample.m, b, lambda)?;
    let m = sample.m;
    let mut g = b.to_vec();
    for j in 0..sample.len() {
        let aj = sample.a(j);
        let s: f64 = aj.iter().zip(lambda).map(|(a, l)| a * l).sum();
        if sample.r[j] > s {
            for i in 0..m {
                g[i] -= aj[i];
            }
        }
    }
    Ok(g)
}

/// Exact minimizer of the empirical dual over `[0, r̄/A̲]^m`: the smallest
/// optimum of a ratio scan for one resource, simplex multipliers otherwise.
pub(crate) fn empirical_argmin(m: usize, a: &[f64], r: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if r.is_empty() {
        return Ok(vec![0.0; m]);
    }
    let upper = dual_upper(a, r);
    if m == 1 {
        return Ok(vec![lp::ratio_scan(a, r, b[0], upper).0]);
    }
    let sol = lp::solve_knapsack_lp(m, a, r, b, pivot_budget(r.len(), m))?;
    Ok(sol.lambda.iter().map(|l| l.min(upper)).collect())
}

fn pivot_budget(n: usize, m: usize) -> usize {
    50 * (n + m) + 1000
}

pub fn solve_empirical_dual(sample: &RequestSample, b: &[f64], cfg: &SolverConfig) -> Result<DualSolution> {
    cfg.validate()?;
    check_capacity(sample.m, b)?;
    let m = sample.m;
    let upper = sample.dual_upper();
    let diameter = upper * (m as f64).sqrt();
    let resolution = (10.0 * cfg.tol).max(1e-4 * diameter);
    let lambda = empirical_argmin(m, &sample.a, &sample.r, b)?;
    let value = lp::hinge_dual_value(m, &sample.a, &sample.r, b, &lambda);
    let g = empirical_dual_subgradient(sample, b, &lambda)?;

    let flat_directions = if m == 1 {
        let (lo, hi) = lp::ratio_scan(&sample.a, &sample.r, b[0], upper);
        let at_hi = lp::hinge_dual_value(1, &sample.a, &sample.r, b, &[hi]);
        if hi - lo >= resolution && (at_hi - value).abs() <= 10.0 * cfg.tol * (1.0 + value.abs()) {
            vec![vec![1.0]]
        } else {
            Vec::new()
        }
    } else {
        lp::alternate_optima(m, &sample.a, &sample.r, b, &lambda, value, cfg.tol, resolution)
    };
    let primal = hindsight_primal_value(m, &sample.a, &sample.r, b)?;
    Ok(DualSolution {
        subgrad_norm: g.iter().map(|x| x * x).sum::<f64>().sqrt(),
        lambda,
        value,
        certificate_gap: (value - primal).max(0.0),
        iterations: 0,
        flat_directions,
        trace: Vec::new(),
    })
}

fn hindsight_primal_value(m: usize, a: &[f64], r: &[f64], b: &[f64]) -> Result<f64> {
    if m == 1 {
        let x = lp::greedy_fill_m1(a, r, b[0]);
        return Ok(x.iter().zip(r).map(|(x, r)| x * r).sum());
    }
    Ok(lp::solve_knapsack_lp(m, a, r, b, pivot_budget(r.len(), m))?.value)
}

/// `V^off(b)` on raw slices; zero on an empty sequence.
pub(crate) fn hindsight_value_slices(m: usize, a: &[f64], r: &[f64], b: &[f64]) -> Result<f64> {
    let lambda = empirical_argmin(m, a, r, b)?;
    Ok(lp::hinge_dual_value(m, a, r, b, &lambda))
}

/// Optimal value of the hindsight LP, computed as the minimum of its dual.
pub fn hindsight_value(sample: &RequestSample, b: &[f64]) -> Result<f64> {
    check_capacity(sample.m, b)?;
    hindsight_value_slices(sample.m, &sample.a, &sample.r, b)
}

/// Fractional greedy by `r/a` for a single resource.
pub fn greedy_m1(sample: &RequestSample, b: f64) -> Result<Allocation> {
    if sample.m != 1 {
        return Err(OlpError::WrongDimension(sample.m));
    }
    let x = lp::greedy_fill_m1(&sample.a, &sample.r, b);
    Ok(Allocation::from_x(x, &sample.r))
}

/// Primal allocation consistent with complementary slackness at `λ*`.
///
/// Items strictly above their price are taken, strictly below are rejected;
/// items within `1e-7(1 + r̄)` of the price are filled greedily in index order
/// against the residual capacity, with an exact LP over those items as the
/// fallback. Items that need a resource with zero capacity are rejected first.
pub fn recover_primal(sample: &RequestSample, b: &[f64], lambda: &[f64]) -> Result<Allocation> {
    check_lambda(sample.m, b, lambda)?;
    check_capacity(sample.m, b)?;
    let m = sample.m;
    let n = sample.len();
    let r_max = sample.r.iter().copied().fold(0.0, f64::max);
    let boundary_tol = 1e-7 * (1.0 + r_max);

    let mut x = vec![0.0; n];
    let mut boundary = Vec::new();
    let mut residual = b.to_vec();
    for j in 0..n {
        let aj = sample.a(j);
        if (0..m).any(|i| b[i] <= 0.0 && aj[i] > 0.0) {
            continue;
        }
        let margin = sample.r[j] - aj.iter().zip(lambda).map(|(a, l)| a * l).sum::<f64>();
        if margin > boundary_tol {
            x[j] = 1.0;
            for i in 0..m {
                residual[i] -= aj[i];
            }
        } else if margin >= -boundary_tol && sample.r[j] > 0.0 {
            boundary.push(j);
        }
    }

    let dual = lp::hinge_dual_value(m, &sample.a, &sample.r, b, lambda);
    let gap_tol = 1e-6 * (1.0 + dual.abs());
    let feasible_slack = 1e-9 * (1.0 + b.iter().copied().fold(0.0, f64::max));
    if residual.iter().any(|v| *v < -feasible_slack) {
        let alloc = Allocation::from_x(x, &sample.r);
        return Err(OlpError::RecoveryFailed {
            gap: (dual - alloc.value).abs(),
        });
    }
    for v in residual.iter_mut() {
        *v = v.max(0.0);
    }

    let mut greedy_x = x.clone();
    let mut left = residual.clone();
    for &j in &boundary {
        let aj = sample.a(j);
        let take = (0..m).map(|i| left[i] / aj[i]).fold(1.0, f64::min).max(0.0);
        greedy_x[j] = take;
        for i in 0..m {
            left[i] = (left[i] - take * aj[i]).max(0.0);
        }
    }
    let alloc = Allocation::from_x(greedy_x, &sample.r);
    if (dual - alloc.value).abs() <= gap_tol && alloc.fractional_count <= m {
        return Ok(alloc);
    }

    let sub_a: Vec<f64> = boundary.iter().flat_map(|&j| sample.a(j).iter().copied()).collect();
    let sub_r: Vec<f64> = boundary.iter().map(|&j| sample.r[j]).collect();
    let sol = lp::solve_knapsack_lp(m, &sub_a, &sub_r, &residual, pivot_budget(sub_r.len(), m))?;
    for (k, &j) in boundary.iter().enumerate() {
        x[j] = sol.x[k];
    }
    let alloc = Allocation::from_x(x, &sample.r);
    let gap = (dual - alloc.value).abs();
    if gap <= gap_tol {
        Ok(alloc)
    } else {
        Err(OlpError::RecoveryFailed { gap })
    }
}

/// Checks `V(t-1, b) = max_{x ∈ [0,1]} r_t x + V(t, b - a_t x)` on the
/// requests from `t_index` on, maximizing over a 101-point grid refined by
/// ternary search (the right-hand side is concave in `x`).
pub fn value_induction_check(sample: &RequestSample, b: &[f64], t_index: usize) -> bool {
    if t_index >= sample.len() || check_capacity(sample.m, b).is_err() {
        return false;
    }
    let m = sample.m;
    let head_a = &sample.a[t_index * m..];
    let head_r = &sample.r[t_index..];
    let Ok(lhs) = hindsight_value_slices(m, head_a, head_r, b) else {
        return false;
    };
    let at = sample.a(t_index);
    let rt = sample.r[t_index];
    let tail_a = &sample.a[(t_index + 1) * m..];
    let tail_r = &sample.r[t_index + 1..];
    let x_max = (0..m).map(|i| b[i] / at[i]).fold(1.0, f64::min).max(0.0);
    let rhs_at = |x: f64| -> f64 {
        let left: Vec<f64> = (0..m).map(|i| (b[i] - at[i] * x).max(0.0)).collect();
        rt * x + hindsight_value_slices(m, tail_a, tail_r, &left).unwrap_or(f64::NEG_INFINITY)
    };

    let mut best_x = 0.0;
    let mut best = rhs_at(0.0);
    for k in 1..=100 {
        let x = x_max * k as f64 / 100.0;
        let v = rhs_at(x);
        if v > best {
            best = v;
            best_x = x;
        }
    }
    let h = x_max / 100.0;
    let (mut lo, mut hi) = ((best_x - h).max(0.0), (best_x + h).min(x_max));
    for _ in 0..100 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if rhs_at(m1) < rhs_at(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    best = best.max(rhs_at(0.5 * (lo + hi)));
    (lhs - best).abs() <= 1e-6 * (1.0 + lhs.abs())
}
