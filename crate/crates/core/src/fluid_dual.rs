//! The fluid dual `f_d(λ) = dᵀλ + E[(r - aᵀλ)⁺]` over the box
//! `Ω = [0, r̄/A̲]^m`.
//!
//! Single-resource problems are solved exactly: the optimal set is the interval
//! `[inf{λ: c(λ) ≤ d}, inf{λ: c(λ) < d}]` where `c` is the expected
//! consumption, located by a ratio scan for finitely many request types and by
//! bisection (or a closed-form quantile) otherwise. With several resources,
//! smooth objectives use averaged projected subgradient steps followed by
//! projected gradient with backtracking, stopped by the box certificate
//! `Σ_i max(g_i λ_i, -g_i (U_i - λ_i)) ≤ tol`. Piecewise-linear objectives go
//! through the knapsack simplex of [`crate::lp`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::RequestDistribution;
use crate::error::{check_dim, OlpError, Result};
use crate::lp;
use crate::rng::rng_from_seed;

const FLAT_DIRECTIONS: usize = 32;
const GROWTH_SEED: u64 = 0x6a09_e667_f3bc_c908;
const PROBE_SEED: u64 = 0xbb67_ae85_84ca_a73b;
/// Growth gaps below this are treated as exact zeros.
const GROWTH_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Step `(f(λ) - lower bound) / ‖g‖²`, the lower bound taken from the box
    /// certificate.
    PolyakLike,
    /// Step `(R/G)/√k`.
    #[default]
    Diminishing,
}

/// Which point to return when the optimal set is not a singleton.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    SmallestOptimum,
    IterateAverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub tol: f64,
    /// Only used by grid oracles.
    pub grid_resolution: usize,
    pub step_rule: StepRule,
    pub tie_break: TieBreak,
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            tol: 1e-8,
            grid_resolution: 2000,
            step_rule: StepRule::Diminishing,
            tie_break: TieBreak::SmallestOptimum,
            record_trace: false,
        }
    }
}

impl SolverConfig {
    /// Default configuration with `tol` matched to how `dist` evaluates
    /// expectations: 1e-8 for closed forms, 1e-6 under quadrature.
    pub fn for_distribution(dist: &RequestDistribution) -> Self {
        Self {
            tol: if dist.has_closed_form() { 1e-8 } else { 1e-6 },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(OlpError::Config("solver max_iters must be at least 1".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(OlpError::Config("solver tol must be positive".into()));
        }
        Ok(())
    }

    pub fn with_tie_break(self, tie_break: TieBreak) -> Self {
        Self { tie_break, ..self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualDomain {
    pub m: usize,
    pub upper: Vec<f64>,
}

impl DualDomain {
    pub fn for_distribution(dist: &RequestDistribution) -> Self {
        Self {
            m: dist.m(),
            upper: dist.dual_upper(),
        }
    }

    pub fn contains(&self, lambda: &[f64]) -> bool {
        lambda.len() == self.m && lambda.iter().zip(&self.upper).all(|(l, u)| *l >= 0.0 && *l <= *u)
    }

    pub fn project(&self, lambda: &mut [f64]) {
        for (l, u) in lambda.iter_mut().zip(&self.upper) {
            *l = l.clamp(0.0, *u);
        }
    }

    pub fn diameter(&self) -> f64 {
        self.upper.iter().map(|u| u * u).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub value: f64,
    pub subgrad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualSolution {
    pub lambda: Vec<f64>,
    pub value: f64,
    pub subgrad_norm: f64,
    /// Upper bound on `value - min f` from the box certificate or LP duality.
    pub certificate_gap: f64,
    pub iterations: usize,
    pub flat_directions: Vec<Vec<f64>>,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

impl DualSolution {
    pub fn looks_unique(&self) -> bool {
        self.flat_directions.is_empty()
    }
}

/// Writes a solver trace as CSV `iter,value,subgrad_norm`.
pub fn write_trace_csv<W: std::io::Write>(rows: &[TraceRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "iter,value,subgrad_norm")?;
    for row in rows {
        writeln!(out, "{},{},{}", row.iter, row.value, row.subgrad_norm)?;
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn check_inputs(dist: &RequestDistribution, d: &[f64], lambda: &[f64]) -> Result<()> {
    check_dim(dist.m(), d.len())?;
    check_dim(dist.m(), lambda.len())
}

/// `dᵀλ + E[(r - aᵀλ)⁺]`
pub fn fluid_objective(dist: &RequestDistribution, d: &[f64], lambda: &[f64]) -> Result<f64> {
    check_inputs(dist, d, lambda)?;
    Ok(dot(d, lambda) + dist.hinge_expectation(lambda))
}

/// `d - E[a · 1{r > aᵀλ}]`
pub fn fluid_subgradient(dist: &RequestDistribution, d: &[f64], lambda: &[f64]) -> Result<Vec<f64>> {
    check_inputs(dist, d, lambda)?;
    let c = dist.consumption_expectation(lambda);
    Ok(d.iter().zip(c).map(|(d, c)| d - c).collect())
}

/// Box certificate: `max_{μ ∈ Ω} gᵀ(λ - μ)`, an upper bound on
/// `f(λ) - min_Ω f` for convex `f` with subgradient `g` at `λ`.
pub fn box_certificate(g: &[f64], lambda: &[f64], upper: &[f64]) -> f64 {
    g.iter()
        .zip(lambda.iter().zip(upper))
        .map(|(g, (l, u))| if *g > 0.0 { g * l } else { -g * (u - l) })
        .sum()
}

/// Weighted atoms `(p·a, p·r)` of a finitely supported law, row-major.
pub(crate) fn weighted_atoms(dist: &RequestDistribution) -> Option<(Vec<f64>, Vec<f64>)> {
    let atoms = dist.atoms()?;
    let mut a = Vec::with_capacity(atoms.len() * dist.m());
    let mut r = Vec::with_capacity(atoms.len());
    for atom in atoms {
        a.extend(atom.a.iter().map(|x| atom.p * x));
        r.push(atom.p * atom.r);
    }
    Some((a, r))
}

/// Infimum of `{λ ∈ [0, upper]: pred(λ)}` for a predicate that is monotone
/// (false then true); `upper` if the predicate never holds below it.
fn bisect_first_true(mut pred: impl FnMut(f64) -> bool, upper: f64) -> f64 {
    if pred(0.0) {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, upper);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Smallest and largest minimizers of `f_d` for a single resource.
pub fn optimal_interval_m1(dist: &RequestDistribution, d: f64) -> Result<(f64, f64)> {
    if dist.m() != 1 {
        return Err(OlpError::WrongDimension(dist.m()));
    }
    let upper = dist.dual_upper()[0];
    if let Some((a, r)) = weighted_atoms(dist) {
        return Ok(lp::ratio_scan(&a, &r, d, upper));
    }
    let consumption = |l: f64| dist.consumption_expectation(&[l])[0];
    let lo = match dist.unit_consumption_quantile(d) {
        Some(q) => q.min(upper),
        None => bisect_first_true(|l| consumption(l) <= d, upper),
    };
    let hi = if d <= 0.0 {
        upper
    } else {
        bisect_first_true(|l| consumption(l) < d, upper)
    };
    Ok((lo, hi.max(lo)))
}

/// Resolution below which two optimal points are considered the same.
fn flat_resolution(tol: f64, diameter: f64) -> f64 {
    (10.0 * tol).max(1e-4 * diameter)
}

/// Averaged projected subgradient; returns the average iterate.
fn averaged_subgradient(
    dist: &RequestDistribution,
    d: &[f64],
    start: &[f64],
    iters: usize,
    cfg: &SolverConfig,
    domain: &DualDomain,
    trace: &mut Vec<TraceRow>,
) -> Vec<f64> {
    let m = domain.m;
    let radius = domain.diameter();
    let g_bound = norm(d) + (m as f64).sqrt() * dist.bounds().a_max;
    let mut lam = start.to_vec();
    let mut avg = vec![0.0; m];
    for k in 1..=iters {
        let g: Vec<f64> = d
            .iter()
            .zip(dist.consumption_expectation(&lam))
            .map(|(d, c)| d - c)
            .collect();
        let gn = norm(&g);
        if cfg.record_trace {
            trace.push(TraceRow {
                iter: trace.len(),
                value: dot(d, &lam) + dist.hinge_expectation(&lam),
                subgrad_norm: gn,
            });
        }
        let step = match cfg.step_rule {
            StepRule::Diminishing => radius / g_bound.max(1e-12) / (k as f64).sqrt(),
            StepRule::PolyakLike => {
                let gap = box_certificate(&g, &lam, &domain.upper);
                if gn > 0.0 {
                    gap / (gn * gn)
                } else {
                    0.0
                }
            }
        };
        for (l, gi) in lam.iter_mut().zip(&g) {
            *l -= step * gi;
        }
        domain.project(&mut lam);
        for (a, l) in avg.iter_mut().zip(&lam) {
            *a += (l - *a) / k as f64;
        }
    }
    avg
}

struct SmoothResult {
    lambda: Vec<f64>,
    iterations: usize,
    gap: f64,
}

/// Averaged subgradient warm-up then projected gradient with backtracking
/// until the box certificate drops below `tol`.
fn minimize_smooth(
    dist: &RequestDistribution,
    d: &[f64],
    cfg: &SolverConfig,
    warm: Option<&[f64]>,
    trace: &mut Vec<TraceRow>,
) -> Result<SmoothResult> {
    let domain = DualDomain::for_distribution(dist);
    let m = domain.m;
    let mut lam = match warm {
        Some(w) => {
            let mut w = w.to_vec();
            domain.project(&mut w);
            w
        }
        None => vec![0.0; m],
    };
    let value = |l: &[f64]| dot(d, l) + dist.hinge_expectation(l);
    let grad = |l: &[f64]| -> Vec<f64> {
        d.iter()
            .zip(dist.consumption_expectation(l))
            .map(|(d, c)| d - c)
            .collect()
    };

    let mut iters = 0;
    let mut g = grad(&lam);
    let mut gap = box_certificate(&g, &lam, &domain.upper);
    if gap > cfg.tol && warm.is_none() {
        let warmup = (cfg.max_iters / 4).min(200);
        lam = averaged_subgradient(dist, d, &lam, warmup, cfg, &domain, trace);
        iters += warmup;
        g = grad(&lam);
        gap = box_certificate(&g, &lam, &domain.upper);
    }

    let mut f = value(&lam);
    let mut alpha = 1.0;
    while gap > cfg.tol {
        if iters >= cfg.max_iters {
            return Err(OlpError::SolverBudgetExceeded { iters, gap });
        }
        iters += 1;
        let mut accepted = false;
        for _ in 0..60 {
            let mut next: Vec<f64> = lam.iter().zip(&g).map(|(l, g)| l - alpha * g).collect();
            domain.project(&mut next);
            let step: Vec<f64> = next.iter().zip(&lam).map(|(n, l)| n - l).collect();
            let f_next = value(&next);
            let model = f + dot(&g, &step) + dot(&step, &step) / (2.0 * alpha);
            if f_next <= model + 1e-15 * (1.0 + f.abs()) {
                lam = next;
                f = f_next;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(OlpError::SolverBudgetExceeded { iters, gap });
        }
        alpha *= 2.0;
        g = grad(&lam);
        gap = box_certificate(&g, &lam, &domain.upper);
        if cfg.record_trace {
            trace.push(TraceRow {
                iter: trace.len(),
                value: f,
                subgrad_norm: norm(&g),
            });
        }
    }
    Ok(SmoothResult {
        lambda: lam,
        iterations: iters,
        gap,
    })
}

/// Minimizer of `f_d` without the flat-direction probe: the per-step solve of
/// the re-solving policy.
pub(crate) fn fluid_argmin(
    dist: &RequestDistribution,
    d: &[f64],
    cfg: &SolverConfig,
    warm: Option<&[f64]>,
) -> Result<Vec<f64>> {
    Ok(solve_core(dist, d, cfg, warm, &mut Vec::new())?.lambda)
}

struct CoreSolution {
    lambda: Vec<f64>,
    iterations: usize,
    gap: f64,
    interval: Option<(f64, f64)>,
}

fn solve_core(
    dist: &RequestDistribution,
    d: &[f64],
    cfg: &SolverConfig,
    warm: Option<&[f64]>,
    trace: &mut Vec<TraceRow>,
) -> Result<CoreSolution> {
    check_dim(dist.m(), d.len())?;
    if d.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(OlpError::Config(format!("normalized inventory must be finite and >= 0, got {d:?}")));
    }
    let domain = DualDomain::for_distribution(dist);
    if dist.m() == 1 {
        let (lo, hi) = optimal_interval_m1(dist, d[0])?;
        let mut lambda = vec![lo];
        let mut iterations = 0;
        let flat = hi - lo >= flat_resolution(cfg.tol, domain.diameter());
        if flat && cfg.tie_break == TieBreak::IterateAverage {
            let iters = cfg.max_iters.min(4000);
            let mid = vec![0.5 * domain.upper[0]];
            let avg = averaged_subgradient(dist, d, &mid, iters, cfg, &domain, trace);
            lambda = vec![avg[0].clamp(lo, hi)];
            iterations = iters;
        }
        return Ok(CoreSolution {
            lambda,
            iterations,
            gap: 0.0,
            interval: Some((lo, hi)),
        });
    }
    if let Some((a, r)) = weighted_atoms(dist) {
        let sol = lp::solve_knapsack_lp(dist.m(), &a, &r, d, cfg.max_iters.max(10 * r.len()))?;
        let mut lambda = sol.lambda;
        domain.project(&mut lambda);
        let dual = lp::hinge_dual_value(dist.m(), &a, &r, d, &lambda);
        return Ok(CoreSolution {
            lambda,
            iterations: sol.pivots,
            gap: (dual - sol.value).max(0.0),
            interval: None,
        });
    }
    let res = minimize_smooth(dist, d, cfg, warm, trace)?;
    Ok(CoreSolution {
        lambda: res.lambda,
        iterations: res.iterations,
        gap: res.gap,
        interval: None,
    })
}

/// Minimizes `f_d` over `Ω` and probes for alternative optima.
pub fn solve_fluid_dual(dist: &RequestDistribution, d: &[f64], cfg: &SolverConfig) -> Result<DualSolution> {
    cfg.validate()?;
    let mut trace = Vec::new();
    let core = solve_core(dist, d, cfg, None, &mut trace)?;
    let lambda = core.lambda;
    let value = fluid_objective(dist, d, &lambda)?;
    let g = fluid_subgradient(dist, d, &lambda)?;
    let domain = DualDomain::for_distribution(dist);
    let resolution = flat_resolution(cfg.tol, domain.diameter());

    let flat_directions = if let Some((lo, hi)) = core.interval {
        let same_value = |x: f64| (fluid_objective(dist, d, &[x]).unwrap_or(f64::INFINITY) - value).abs() <= 10.0 * cfg.tol;
        let mut dirs = Vec::new();
        if hi - lambda[0] >= resolution && same_value(hi) {
            dirs.push(vec![1.0]);
        }
        if lambda[0] - lo >= resolution && same_value(lo) {
            dirs.push(vec![-1.0]);
        }
        dirs
    } else if let Some((a, r)) = weighted_atoms(dist) {
        lp::alternate_optima(dist.m(), &a, &r, d, &lambda, value, cfg.tol, resolution)
    } else {
        // a curved minimum has a tol-sublevel set of width ~√(tol/κ), so rays
        // are judged at a macroscopic distance instead of the exact resolution
        line_probe(dist, d, &lambda, value, cfg, &domain, resolution.max(0.1 * domain.diameter()))
    };

    Ok(DualSolution {
        subgrad_norm: norm(&g),
        lambda,
        value,
        certificate_gap: core.gap,
        iterations: core.iterations,
        flat_directions,
        trace,
    })
}

/// Directions along which `f_d` stays within `10·tol` of `value` for at least
/// `resolution`, found by bisecting the sublevel set along each ray up to the
/// box boundary.
fn line_probe(
    dist: &RequestDistribution,
    d: &[f64],
    lambda: &[f64],
    value: f64,
    cfg: &SolverConfig,
    domain: &DualDomain,
    resolution: f64,
) -> Vec<Vec<f64>> {
    let m = domain.m;
    let mut rng = rng_from_seed(PROBE_SEED);
    let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(FLAT_DIRECTIONS);
    for i in 0..m {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; m];
            e[i] = s;
            dirs.push(e);
        }
    }
    while dirs.len() < FLAT_DIRECTIONS {
        let u: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let n = norm(&u);
        if n > 1e-3 {
            dirs.push(u.iter().map(|x| x / n).collect());
        }
    }
    let level = value + 10.0 * cfg.tol;
    let mut flat = Vec::new();
    for u in dirs {
        // distance to the boundary of Ω along u
        let reach = u
            .iter()
            .zip(lambda.iter().zip(&domain.upper))
            .map(|(ui, (l, up))| {
                if *ui > 0.0 {
                    (up - l) / ui
                } else if *ui < 0.0 {
                    l / -ui
                } else {
                    f64::INFINITY
                }
            })
            .fold(f64::INFINITY, f64::min);
        if reach < resolution {
            continue;
        }
        let at = |s: f64| -> f64 {
            let p: Vec<f64> = lambda.iter().zip(&u).map(|(l, ui)| (l + s * ui).clamp(0.0, f64::MAX)).collect();
            dist.hinge_expectation(&p) + dot(d, &p)
        };
        if at(resolution) <= level {
            flat.push(u);
        }
    }
    flat
}

/// `min_Ω f_d`
pub fn fluid_value(dist: &RequestDistribution, d: &[f64], cfg: &SolverConfig) -> Result<f64> {
    cfg.validate()?;
    let core = solve_core(dist, d, cfg, None, &mut Vec::new())?;
    fluid_objective(dist, d, &core.lambda)
}

/// Least-squares slope of `ys` on `xs`.
pub(crate) fn ols_slope(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    (slope, intercept, r2)
}

/// Local growth order at `λ*`: regresses
/// `log(f(λ*+εu) - f(λ*) - ε gᵀu)` on `log ε` for `ε = 2^-k`, `k = 2..16`,
/// over feasible directions `u`, and returns the median slope minus 2.
pub fn estimate_growth_exponent(dist: &RequestDistribution, d: &[f64], lambda_star: &[f64]) -> Result<f64> {
    let f0 = fluid_objective(dist, d, lambda_star)?;
    let g = fluid_subgradient(dist, d, lambda_star)?;
    let domain = DualDomain::for_distribution(dist);
    let m = dist.m();
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    if m == 1 {
        dirs.push(vec![1.0]);
        dirs.push(vec![-1.0]);
    } else {
        let mut rng = rng_from_seed(GROWTH_SEED);
        while dirs.len() < 16 {
            let u: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let n = norm(&u);
            if n > 1e-3 {
                dirs.push(u.iter().map(|x| x / n).collect());
            }
        }
    }

    let mut slopes = Vec::new();
    for u in &dirs {
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for k in 2..=16 {
            let eps = 2f64.powi(-k);
            let p: Vec<f64> = lambda_star.iter().zip(u).map(|(l, ui)| l + eps * ui).collect();
            if !domain.contains(&p) {
                continue;
            }
            let gap = fluid_objective(dist, d, &p)? - f0 - eps * dot(&g, u);
            if gap >= GROWTH_FLOOR {
                xs.push(eps.ln());
                ys.push(gap.ln());
            }
        }
        if xs.len() >= 3 {
            slopes.push(ols_slope(&xs, &ys).0);
        }
    }
    if slopes.is_empty() {
        return Err(OlpError::DegenerateFit);
    }
    slopes.sort_by(f64::total_cmp);
    let mid = slopes.len() / 2;
    let median = if slopes.len() % 2 == 1 {
        slopes[mid]
    } else {
        0.5 * (slopes[mid - 1] + slopes[mid])
    };
    Ok(median - 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Atom;
    use proptest::prelude::*;
    use rand::Rng;

    fn ms(beta: f64) -> RequestDistribution {
        RequestDistribution::multisecretary_beta(beta).unwrap()
    }

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn objective_examples() {
        assert_eq!(fluid_objective(&ms(0.0), &[0.5], &[0.0]).unwrap(), 0.5);
        let tp = RequestDistribution::two_point_consumption();
        assert!((fluid_objective(&tp, &[0.5], &[0.5]).unwrap() - 0.75).abs() < 1e-12);
        assert!((fluid_objective(&tp, &[0.5], &[1.0]).unwrap() - 0.75).abs() < 1e-12);
        assert!(matches!(
            fluid_objective(&tp, &[0.5, 0.5], &[1.0]),
            Err(OlpError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn subgradient_examples() {
        let us = RequestDistribution::unit_square_shifted();
        assert_eq!(fluid_subgradient(&us, &[1.5], &[0.0]).unwrap(), vec![0.0]);
        assert_eq!(fluid_subgradient(&ms(0.0), &[0.5], &[0.25]).unwrap(), vec![-0.25]);
        let hc = RequestDistribution::hyper_cube(2).unwrap();
        let g = fluid_subgradient(&hc, &hc.mean_consumption(), &[0.0, 0.0]).unwrap();
        assert!(g.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn solve_examples() {
        let tp = RequestDistribution::two_point_consumption();
        let sol = solve_fluid_dual(&tp, &[0.5], &cfg()).unwrap();
        assert!((sol.value - 0.75).abs() < 1e-9);
        assert!(!sol.flat_directions.is_empty());
        assert!((sol.lambda[0] - 0.5).abs() < 1e-9);

        let us = RequestDistribution::unit_square_shifted();
        let sol = solve_fluid_dual(&us, &[1.5], &cfg()).unwrap();
        assert!(sol.lambda[0].abs() <= 1e-6);

        let sol = solve_fluid_dual(&ms(0.0), &[0.5], &cfg()).unwrap();
        assert!((sol.lambda[0] - 0.5).abs() <= 1e-9);
        assert!(sol.looks_unique());

        for dist in [ms(2.0), RequestDistribution::gap_multisecretary(), us.clone()] {
            let d = dist.mean_consumption();
            assert_eq!(solve_fluid_dual(&dist, &d, &cfg()).unwrap().lambda, vec![0.0]);
        }
        let hc = RequestDistribution::hyper_cube(2).unwrap();
        let sol = solve_fluid_dual(&hc, &[1.6, 1.7], &SolverConfig::for_distribution(&hc)).unwrap();
        assert_eq!(sol.lambda, vec![0.0, 0.0]);
    }

    #[test]
    fn value_examples() {
        let tp = RequestDistribution::two_point_consumption();
        assert!((fluid_value(&tp, &[0.5], &cfg()).unwrap() - 0.75).abs() < 1e-9);
        assert!((fluid_value(&ms(0.0), &[0.5], &cfg()).unwrap() - 0.375).abs() < 1e-12);
        // d = 0: the minimum over Ω is the hinge at the box corner, i.e. zero
        for dist in [ms(0.0), RequestDistribution::gap_multisecretary(), tp] {
            let v = fluid_value(&dist, &[0.0], &cfg()).unwrap();
            assert!(v.abs() < 1e-9, "{:?}: {v}", dist.kind());
        }
    }

    #[test]
    fn gap_instance_has_flat_optimal_segment() {
        let gap = RequestDistribution::gap_multisecretary();
        let (lo, hi) = optimal_interval_m1(&gap, 0.5).unwrap();
        assert_eq!(lo, 1.0);
        assert!((hi - 2.0).abs() < 1e-12);
        let sol = solve_fluid_dual(&gap, &[0.5], &cfg()).unwrap();
        assert_eq!(sol.lambda, vec![1.0]);
        assert!(!sol.looks_unique());
        let avg = solve_fluid_dual(&gap, &[0.5], &cfg().with_tie_break(TieBreak::IterateAverage)).unwrap();
        assert!(avg.lambda[0] > 1.0 && avg.lambda[0] < 2.0, "{:?}", avg.lambda);
        assert!((avg.value - sol.value).abs() < 1e-9);
    }

    #[test]
    fn growth_examples() {
        let g = estimate_growth_exponent(&ms(0.0), &[0.5], &[0.5]).unwrap();
        assert!(g.abs() < 0.15, "{g}");
        let tp = RequestDistribution::two_point_consumption();
        assert_eq!(estimate_growth_exponent(&tp, &[0.5], &[0.75]), Err(OlpError::DegenerateFit));
        // β controls the order: gap ~ ε^(2+β)
        let g = estimate_growth_exponent(&ms(2.0), &[0.5], &[0.5]).unwrap();
        assert!((g - 2.0).abs() < 0.15, "{g}");
    }

    #[test]
    fn unit_square_is_flat_at_zero_and_cubic_at_the_segment_end() {
        let us = RequestDistribution::unit_square_shifted();
        assert_eq!(optimal_interval_m1(&us, 1.5).unwrap().0, 0.0);
        let (_, hi) = optimal_interval_m1(&us, 1.5).unwrap();
        assert!((hi - 0.5).abs() < 1e-6, "{hi}");
        assert_eq!(estimate_growth_exponent(&us, &[1.5], &[0.0]), Err(OlpError::DegenerateFit));
        let g = estimate_growth_exponent(&us, &[1.5], &[0.5]).unwrap();
        assert!((g - 1.0).abs() < 0.15, "{g}");
    }

    #[test]
    fn discrete_two_resources_solved_exactly() {
        let dist = RequestDistribution::discrete(vec![
            Atom { a: vec![1.0, 2.0], r: 2.0, p: 0.5 },
            Atom { a: vec![2.0, 1.0], r: 1.5, p: 0.5 },
        ])
        .unwrap();
        let d = [0.6, 0.9];
        let sol = solve_fluid_dual(&dist, &d, &cfg()).unwrap();
        assert!(sol.certificate_gap < 1e-9);
        // compare against a fine grid
        let up = dist.dual_upper();
        let mut best = f64::INFINITY;
        let n = 800;
        for i in 0..=n {
            for j in 0..=n {
                let l = [up[0] * i as f64 / n as f64, up[1] * j as f64 / n as f64];
                best = best.min(fluid_objective(&dist, &d, &l).unwrap());
            }
        }
        assert!(sol.value <= best + 1e-12);
        assert!(best - sol.value < 1e-2);
    }

    #[test]
    fn hyper_cube_meets_box_certificate() {
        let hc = RequestDistribution::hyper_cube(2).unwrap();
        let c = SolverConfig::for_distribution(&hc);
        for d in [[0.3, 0.3], [0.5, 0.9], [0.2, 1.4]] {
            let sol = solve_fluid_dual(&hc, &d, &c).unwrap();
            assert!(sol.certificate_gap <= c.tol);
            assert!(sol.looks_unique(), "{d:?}: {:?}", sol.flat_directions);
        }
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let hc = RequestDistribution::hyper_cube(2).unwrap();
        let c = SolverConfig {
            max_iters: 1,
            tol: 1e-14,
            ..SolverConfig::default()
        };
        assert!(matches!(
            solve_fluid_dual(&hc, &[0.3, 0.3], &c),
            Err(OlpError::SolverBudgetExceeded { .. })
        ));
        assert!(SolverConfig { tol: 0.0, ..c }.validate().is_err());
    }

    #[test]
    fn trace_csv_has_header() {
        let hc = RequestDistribution::hyper_cube(2).unwrap();
        let c = SolverConfig {
            record_trace: true,
            ..SolverConfig::for_distribution(&hc)
        };
        let sol = solve_fluid_dual(&hc, &[0.3, 0.4], &c).unwrap();
        assert!(!sol.trace.is_empty());
        let mut buf = Vec::new();
        write_trace_csv(&sol.trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iter,value,subgrad_norm\n"));
    }

    fn dists() -> Vec<RequestDistribution> {
        vec![
            ms(0.0),
            ms(2.0),
            RequestDistribution::gap_multisecretary(),
            RequestDistribution::two_point_consumption(),
            RequestDistribution::unit_square_shifted(),
            RequestDistribution::hyper_cube(2).unwrap(),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn objective_is_convex(k in 0usize..6, s in prop::collection::vec(0.0f64..1.0, 4), dd in 0.0f64..2.0) {
            let dist = &dists()[k];
            let m = dist.m();
            let up = dist.dual_upper();
            let d = vec![dd; m];
            let l1: Vec<f64> = (0..m).map(|i| s[i] * up[i]).collect();
            let l2: Vec<f64> = (0..m).map(|i| s[2 + i] * up[i]).collect();
            let mid: Vec<f64> = l1.iter().zip(&l2).map(|(a, b)| 0.5 * (a + b)).collect();
            let lhs = fluid_objective(dist, &d, &mid).unwrap();
            let rhs = 0.5 * (fluid_objective(dist, &d, &l1).unwrap() + fluid_objective(dist, &d, &l2).unwrap());
            prop_assert!(lhs <= rhs + 1e-9);
        }

        #[test]
        fn subgradient_bounds_directional_difference(k in 0usize..6, s in prop::collection::vec(0.05f64..0.95, 2), u in prop::collection::vec(-1.0f64..1.0, 2), dd in 0.0f64..2.0) {
            let dist = &dists()[k];
            let m = dist.m();
            let up = dist.dual_upper();
            let d = vec![dd; m];
            let lam: Vec<f64> = (0..m).map(|i| s[i] * up[i]).collect();
            let n = u[..m].iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assume!(n > 1e-3);
            let u: Vec<f64> = u[..m].iter().map(|x| x / n).collect();
            let h = 1e-5;
            let moved: Vec<f64> = lam.iter().zip(&u).map(|(l, u)| l + h * u).collect();
            let fd = (fluid_objective(dist, &d, &moved).unwrap() - fluid_objective(dist, &d, &lam).unwrap()) / h;
            let g = fluid_subgradient(dist, &d, &lam).unwrap();
            prop_assert!(fd >= dot(&g, &u) - 1e-3);
        }

        #[test]
        fn first_order_optimality_at_solution(k in 0usize..6, dd in 0.05f64..2.0, seed in any::<u64>()) {
            let dist = &dists()[k];
            let m = dist.m();
            let d = vec![dd; m];
            let c = SolverConfig::for_distribution(dist);
            let sol = solve_fluid_dual(dist, &d, &c).unwrap();
            let domain = DualDomain::for_distribution(dist);
            prop_assert!(domain.contains(&sol.lambda));
            prop_assert!((sol.value - fluid_objective(dist, &d, &sol.lambda).unwrap()).abs() <= 1e-12);
            let g = fluid_subgradient(dist, &d, &sol.lambda).unwrap();
            let mut rng = rng_from_seed(seed);
            for _ in 0..100 {
                let l: Vec<f64> = domain.upper.iter().map(|u| u * rng.random::<f64>()).collect();
                let dir: Vec<f64> = l.iter().zip(&sol.lambda).map(|(a, b)| a - b).collect();
                prop_assert!(dot(&g, &dir) >= -1e-5, "{}", dot(&g, &dir));
            }
        }
    }
}
