//! Monte Carlo regret sweeps, scaling fits and report output.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{DistributionSpec, RequestDistribution};
use crate::error::{OlpError, Result};
use crate::fluid_dual::{ols_slope, SolverConfig, TieBreak};
use crate::hindsight::hindsight_value_slices;
use crate::policy::{simulate, PolicyKind};
use crate::rng::{episode_seed, label_hash};

/// Default horizon grid.
pub const DEFAULT_T_GRID: [usize; 7] = [250, 500, 1000, 2000, 4000, 8000, 16000];
pub const DEFAULT_TRIALS: usize = 200;

/// How the initial inventory depends on `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InventoryRule {
    /// `b = ⌊d·T⌋` per resource.
    D(Vec<f64>),
    /// Explicit `b` for each horizon.
    Explicit(Vec<ExplicitInventory>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitInventory {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub b: Vec<f64>,
}

impl InventoryRule {
    pub fn inventory(&self, horizon: usize) -> Result<Vec<f64>> {
        match self {
            InventoryRule::D(d) => Ok(d.iter().map(|d| (d * horizon as f64).floor()).collect()),
            InventoryRule::Explicit(list) => list
                .iter()
                .find(|e| e.horizon == horizon)
                .map(|e| e.b.clone())
                .ok_or_else(|| OlpError::Config(format!("no explicit inventory for T = {horizon}"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    /// Per-trial CSV; standard output when absent.
    #[serde(default)]
    pub csv: Option<PathBuf>,
    /// Aggregate report as JSON.
    #[serde(default)]
    pub report: Option<PathBuf>,
    /// Log-log SVG of mean regret.
    #[serde(default)]
    pub plot: Option<PathBuf>,
}

fn default_policies() -> Vec<PolicyKind> {
    vec![PolicyKind::Ce]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Label hashed into the base seed when `base_seed` is absent.
    #[serde(default)]
    pub experiment_id: Option<String>,
    #[serde(default)]
    pub base_seed: Option<u64>,
    pub distribution: DistributionSpec,
    pub inventory: InventoryRule,
    pub t_grid: Vec<usize>,
    pub trials: usize,
    #[serde(default = "default_policies")]
    pub policies: Vec<PolicyKind>,
    #[serde(default)]
    pub solver: Option<SolverConfig>,
    #[serde(default)]
    pub tie_break: Option<TieBreak>,
    #[serde(default)]
    pub output: OutputPaths,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| OlpError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_grid.is_empty() {
            return Err(OlpError::Config("`t_grid` must not be empty".into()));
        }
        if self.t_grid[0] == 0 || self.t_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(OlpError::Config("`t_grid` must be strictly increasing and positive".into()));
        }
        if self.trials == 0 {
            return Err(OlpError::Config("`trials` must be at least 1".into()));
        }
        if self.policies.is_empty() {
            return Err(OlpError::Config("`policies` must not be empty".into()));
        }
        if let InventoryRule::D(d) = &self.inventory {
            if d.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(OlpError::Config(format!("inventory `d` must be finite and >= 0, got {d:?}")));
            }
        }
        if let Some(s) = &self.solver {
            s.validate()?;
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        match (&self.base_seed, &self.experiment_id) {
            (Some(s), _) => *s,
            (None, Some(id)) => label_hash(id),
            (None, None) => 0,
        }
    }

    pub fn solver_config(&self, dist: &RequestDistribution) -> SolverConfig {
        let cfg = self.solver.unwrap_or_else(|| SolverConfig::for_distribution(dist));
        match self.tie_break {
            Some(t) => cfg.with_tie_break(t),
            None => cfg,
        }
    }
}

/// Worker count: `OLP_THREADS` if set to a positive integer, else all cores.
pub fn thread_count() -> usize {
    std::env::var("OLP_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub policy: PolicyKind,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub trial: usize,
    pub regret: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretCell {
    pub policy: PolicyKind,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correction {
    None,
    Log,
    Log2,
}

impl Correction {
    fn factor(self, horizon: f64) -> f64 {
        match self {
            Correction::None => 1.0,
            Correction::Log => horizon.ln(),
            Correction::Log2 => horizon.ln().powi(2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub policy: PolicyKind,
    pub correction: Correction,
    #[serde(flatten)]
    pub fit: ScalingFit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretReport {
    pub base_seed: u64,
    pub trials: usize,
    pub t_grid: Vec<usize>,
    pub cells: Vec<RegretCell>,
    pub fits: Vec<FitRecord>,
    #[serde(skip)]
    pub rows: Vec<TrialRow>,
}

impl RegretReport {
    pub fn cells_for(&self, policy: PolicyKind) -> Vec<&RegretCell> {
        self.cells.iter().filter(|c| c.policy == policy).collect()
    }

    pub fn fit(&self, policy: PolicyKind, correction: Correction) -> Result<ScalingFit> {
        let points: Vec<(f64, f64)> = self
            .cells_for(policy)
            .iter()
            .map(|c| (c.horizon as f64, c.mean))
            .collect();
        fit_scaling(&points, correction)
    }

    pub fn write_trials_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_trials_csv(&self.rows, out)
    }

    /// CSV `policy,T,mean,se,n`.
    pub fn write_summary_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "policy,T,mean,se,n")?;
        for c in &self.cells {
            writeln!(out, "{},{},{},{},{}", c.policy, c.horizon, c.mean, c.se, c.n)?;
        }
        Ok(())
    }
}

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// OLS of `log(regret / correction(T))` on `log T` over points with positive
/// regret; needs at least four.
pub fn fit_scaling(points: &[(f64, f64)], correction: Correction) -> Result<ScalingFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|(t, v)| *t > 1.0 && *v > 0.0 && v.is_finite())
        .map(|(t, v)| (t.ln(), (v / correction.factor(*t)).ln()))
        .unzip();
    if xs.len() < 4 {
        return Err(OlpError::InsufficientData {
            needed: 4,
            have: xs.len(),
        });
    }
    let (slope, intercept, r2) = ols_slope(&xs, &ys);
    Ok(ScalingFit { slope, intercept, r2 })
}

/// Regret of every policy on one realization, in `policies` order.
pub fn trial_regrets(
    dist: &RequestDistribution,
    b: &[f64],
    horizon: usize,
    policies: &[PolicyKind],
    seed: u64,
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    let mut hindsight = None;
    let mut out = Vec::with_capacity(policies.len());
    for &p in policies {
        let sim = simulate(dist, b, horizon, p, seed, cfg, false)?;
        let h = match hindsight {
            Some(h) => h,
            None => {
                let h = hindsight_value_slices(dist.m(), &sim.a, &sim.r, b)?;
                hindsight = Some(h);
                h
            }
        };
        out.push(h - sim.reward);
    }
    Ok(out)
}

pub fn run_regret_sweep(cfg: &ExperimentConfig) -> Result<RegretReport> {
    cfg.validate()?;
    let dist = cfg.distribution.build()?;
    let solver = cfg.solver_config(&dist);
    let base = cfg.seed();
    let mut inventories = Vec::with_capacity(cfg.t_grid.len());
    for &t in &cfg.t_grid {
        let b = cfg.inventory.inventory(t)?;
        if b.len() != dist.m() {
            return Err(OlpError::Config(format!(
                "inventory has {} entries but the distribution has m = {}",
                b.len(),
                dist.m()
            )));
        }
        inventories.push(b);
    }
    let tasks: Vec<(usize, usize)> = (0..cfg.t_grid.len())
        .flat_map(|k| (0..cfg.trials).map(move |trial| (k, trial)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| OlpError::Config(format!("thread pool: {e}")))?;
    let results: Vec<Vec<f64>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(k, trial)| {
                let t = cfg.t_grid[k];
                let seed = episode_seed(base, t, trial);
                trial_regrets(&dist, &inventories[k], t, &cfg.policies, seed, &solver)
                    .map_err(|e| e.context(format!("T = {t}, trial = {trial}")))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut rows = Vec::with_capacity(tasks.len() * cfg.policies.len());
    for (pi, &policy) in cfg.policies.iter().enumerate() {
        for (&(k, trial), regrets) in tasks.iter().zip(&results) {
            let t = cfg.t_grid[k];
            rows.push(TrialRow {
                policy,
                horizon: t,
                trial,
                regret: regrets[pi],
                seed: episode_seed(base, t, trial),
            });
        }
    }
    Ok(summarize(base, cfg.trials, &cfg.t_grid, rows))
}

/// Aggregates trial rows into cells and fits, in first-seen policy order.
pub fn summarize(base_seed: u64, trials: usize, t_grid: &[usize], rows: Vec<TrialRow>) -> RegretReport {
    let mut order: Vec<PolicyKind> = Vec::new();
    let mut groups: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for row in &rows {
        let pi = match order.iter().position(|p| *p == row.policy) {
            Some(i) => i,
            None => {
                order.push(row.policy);
                order.len() - 1
            }
        };
        groups.entry((pi, row.horizon)).or_default().push(row.regret);
    }
    let cells: Vec<RegretCell> = groups
        .into_iter()
        .map(|((pi, horizon), xs)| {
            let (mean, se) = mean_se(&xs);
            RegretCell {
                policy: order[pi],
                horizon,
                mean,
                se,
                n: xs.len(),
            }
        })
        .collect();
    let mut report = RegretReport {
        base_seed,
        trials,
        t_grid: t_grid.to_vec(),
        cells,
        fits: Vec::new(),
        rows,
    };
    for &policy in &order {
        for correction in [Correction::None, Correction::Log, Correction::Log2] {
            if let Ok(fit) = report.fit(policy, correction) {
                report.fits.push(FitRecord { policy, correction, fit });
            }
        }
    }
    report
}

/// CSV `policy,T,trial,regret,seed`.
pub fn write_trials_csv<W: Write>(rows: &[TrialRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "policy,T,trial,regret,seed")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.policy, r.horizon, r.trial, r.regret, r.seed)?;
    }
    Ok(())
}

fn parse_field<T: std::str::FromStr>(s: &str, what: &str, line: usize) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| OlpError::Config(format!("line {line}: cannot parse {what} from `{s}`")))
}

/// Reads either a per-trial CSV or a summary CSV into cells.
pub fn read_report_csv<R: BufRead>(input: R) -> Result<Vec<RegretCell>> {
    let mut lines = input.lines().enumerate();
    let header = match lines.next() {
        Some((_, l)) => l.map_err(|e| OlpError::Config(e.to_string()))?,
        None => return Err(OlpError::Config("empty report".into())),
    };
    let cols: Vec<&str> = header.trim().split(',').collect();
    let summary = cols == ["policy", "T", "mean", "se", "n"];
    if !summary && cols != ["policy", "T", "trial", "regret", "seed"] {
        return Err(OlpError::Config(format!("unrecognized report header `{}`", header.trim())));
    }
    let mut cells = Vec::new();
    let mut rows = Vec::new();
    for (k, line) in lines {
        let line = line.map_err(|e| OlpError::Config(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(OlpError::Config(format!("line {}: expected 5 fields", k + 1)));
        }
        let policy: PolicyKind = f[0].trim().parse()?;
        let horizon: usize = parse_field(f[1], "T", k + 1)?;
        if summary {
            cells.push(RegretCell {
                policy,
                horizon,
                mean: parse_field(f[2], "mean", k + 1)?,
                se: parse_field(f[3], "se", k + 1)?,
                n: parse_field(f[4], "n", k + 1)?,
            });
        } else {
            rows.push(TrialRow {
                policy,
                horizon,
                trial: parse_field(f[2], "trial", k + 1)?,
                regret: parse_field(f[3], "regret", k + 1)?,
                seed: parse_field(f[4], "seed", k + 1)?,
            });
        }
    }
    if summary {
        Ok(cells)
    } else {
        Ok(summarize(0, 0, &[], rows).cells)
    }
}

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Log-log plot of mean regret against `T`, one series per policy with its
/// least-squares line.
pub fn render_svg(cells: &[RegretCell]) -> String {
    let (w, h, pad) = (640.0, 440.0, 60.0);
    let pts: Vec<(f64, f64)> = cells
        .iter()
        .filter(|c| c.mean > 0.0 && c.horizon > 1)
        .map(|c| ((c.horizon as f64).ln(), c.mean.ln()))
        .collect();
    let bounds = |f: fn(&(f64, f64)) -> f64| {
        let lo = pts.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-9 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        }
    };
    let (x0, x1) = bounds(|p| p.0);
    let (y0, y1) = bounds(|p| p.1);
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    s.push_str(&format!(
        "<line class=\"axis\" x1=\"{pad}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        h - pad,
        w - pad,
        h - pad
    ));
    s.push_str(&format!(
        "<line class=\"axis\" x1=\"{pad}\" y1=\"{pad}\" x2=\"{pad}\" y2=\"{}\" stroke=\"black\"/>\n",
        h - pad
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">log T</text>\n",
        w / 2.0,
        h - 15.0
    ));
    s.push_str(&format!(
        "<text x=\"15\" y=\"{}\" transform=\"rotate(-90 15 {})\" text-anchor=\"middle\">log mean regret</text>\n",
        h / 2.0,
        h / 2.0
    ));

    let mut policies: Vec<PolicyKind> = Vec::new();
    for c in cells {
        if !policies.contains(&c.policy) {
            policies.push(c.policy);
        }
    }
    for (k, policy) in policies.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let series: Vec<(f64, f64)> = cells
            .iter()
            .filter(|c| c.policy == *policy && c.mean > 0.0 && c.horizon > 1)
            .map(|c| (c.horizon as f64, c.mean))
            .collect();
        for &(t, v) in &series {
            s.push_str(&format!(
                "<circle class=\"point\" cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"{color}\"/>\n",
                sx(t.ln()),
                sy(v.ln())
            ));
        }
        let label_y = pad + 18.0 * k as f64;
        match fit_scaling(&series, Correction::None) {
            Ok(fit) => {
                let (a, b) = (series[0].0.ln(), series[series.len() - 1].0.ln());
                s.push_str(&format!(
                    "<line class=\"fit\" x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{color}\" stroke-dasharray=\"6 3\"/>\n",
                    sx(a),
                    sy(fit.intercept + fit.slope * a),
                    sx(b),
                    sy(fit.intercept + fit.slope * b)
                ));
                s.push_str(&format!(
                    "<text x=\"{}\" y=\"{label_y}\" fill=\"{color}\">{policy}: slope {:.3}</text>\n",
                    pad + 10.0,
                    fit.slope
                ));
            }
            Err(_) => {
                s.push_str(&format!(
                    "<text x=\"{}\" y=\"{label_y}\" fill=\"{color}\">{policy}</text>\n",
                    pad + 10.0
                ));
            }
        }
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn config(json: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(json).unwrap()
    }

    const SMALL: &str = r#"{
        "experiment_id": "unit",
        "distribution": {"kind": "MultisecretaryBeta", "params": {"beta": 0.0}},
        "inventory": {"d": [0.5]},
        "t_grid": [50, 100, 200, 400],
        "trials": 20,
        "policies": ["CE", "StaticFluid", "AcceptIfFeasible"]
    }"#;

    #[test]
    fn fit_examples() {
        let pts: Vec<(f64, f64)> = [250.0, 500.0, 1000.0, 2000.0, 4000.0]
            .iter()
            .map(|&t: &f64| (t, 3.0 * t.sqrt()))
            .collect();
        let f = fit_scaling(&pts, Correction::None).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-6);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-6);
        let pts: Vec<(f64, f64)> = [250.0, 500.0, 1000.0, 2000.0]
            .iter()
            .map(|&t: &f64| (t, t.ln().powi(2)))
            .collect();
        assert!(fit_scaling(&pts, Correction::Log2).unwrap().slope.abs() < 1e-6);
        assert!(matches!(
            fit_scaling(&pts[..3], Correction::None),
            Err(OlpError::InsufficientData { needed: 4, have: 3 })
        ));
    }

    #[test]
    fn fit_skips_nonpositive_means() {
        let pts = [(10.0, 0.0), (20.0, 1.0), (40.0, 2.0), (80.0, 4.0)];
        assert!(matches!(
            fit_scaling(&pts, Correction::None),
            Err(OlpError::InsufficientData { have: 3, .. })
        ));
    }

    #[test]
    fn trivial_sweep_has_zero_regret() {
        let cfg = config(
            r#"{"base_seed": 1, "distribution": {"kind": "MultisecretaryBeta", "params": {"beta": 0.0}},
                "inventory": {"d": [5.0]}, "t_grid": [10], "trials": 1, "policies": ["AcceptIfFeasible"]}"#,
        );
        let rep = run_regret_sweep(&cfg).unwrap();
        assert_eq!(rep.rows.len(), 1);
        assert_eq!(rep.rows[0].regret, 0.0);
    }

    #[test]
    fn config_errors_name_the_field() {
        let err = ExperimentConfig::from_json(
            r#"{"distribution": {"kind": "GapMultisecretary"}, "inventory": {"d": [0.5]}, "t_grid": [10]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("trials"), "{err}");
        let err = ExperimentConfig::from_json(
            r#"{"distribution": {"kind": "GapMultisecretary"}, "inventory": {"d": [0.5]}, "t_grid": [20, 10], "trials": 1}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("t_grid"));
        let err = ExperimentConfig::from_json(
            r#"{"distribution": {"kind": "GapMultisecretary"}, "inventory": {"d": [0.5]}, "t_grid": [10], "trials": 0}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("trials"));
    }

    #[test]
    fn explicit_inventory() {
        let cfg = config(
            r#"{"base_seed": 3, "distribution": {"kind": "GapMultisecretary"},
                "inventory": {"explicit": [{"T": 10, "b": [4.0]}, {"T": 20, "b": [9.0]}]},
                "t_grid": [10, 20], "trials": 2}"#,
        );
        assert_eq!(cfg.inventory.inventory(20).unwrap(), vec![9.0]);
        assert!(cfg.inventory.inventory(30).is_err());
        assert_eq!(run_regret_sweep(&cfg).unwrap().rows.len(), 4);
    }

    #[test]
    fn sweep_is_deterministic_and_nonnegative() {
        let cfg = config(SMALL);
        let a = run_regret_sweep(&cfg).unwrap();
        let b = run_regret_sweep(&cfg).unwrap();
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        a.write_trials_csv(&mut ca).unwrap();
        b.write_trials_csv(&mut cb).unwrap();
        assert_eq!(ca, cb);
        assert!(a.rows.iter().all(|r| r.regret >= -1e-6));
        assert_eq!(a.cells.len(), 12);
        // same realization across policies within a trial
        let seeds: Vec<u64> = a.rows.iter().filter(|r| r.policy == PolicyKind::Ce).map(|r| r.seed).collect();
        let seeds2: Vec<u64> = a.rows.iter().filter(|r| r.policy == PolicyKind::StaticFluid).map(|r| r.seed).collect();
        assert_eq!(seeds, seeds2);
    }

    #[test]
    fn standard_error_shrinks_with_trials() {
        let mut cfg = config(SMALL);
        cfg.t_grid = vec![200];
        cfg.policies = vec![PolicyKind::StaticFluid];
        cfg.trials = 25;
        let se_small = run_regret_sweep(&cfg).unwrap().cells[0].se;
        cfg.trials = 400;
        let se_big = run_regret_sweep(&cfg).unwrap().cells[0].se;
        let ratio = se_small / se_big;
        assert!((2.5..6.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn summary_roundtrip_and_plot() {
        let rep = run_regret_sweep(&config(SMALL)).unwrap();
        let mut buf = Vec::new();
        rep.write_summary_csv(&mut buf).unwrap();
        let cells = read_report_csv(buf.as_slice()).unwrap();
        assert_eq!(cells.len(), rep.cells.len());
        let mut trials = Vec::new();
        rep.write_trials_csv(&mut trials).unwrap();
        let again = read_report_csv(trials.as_slice()).unwrap();
        for (x, y) in again.iter().zip(&rep.cells) {
            assert_eq!(x.policy, y.policy);
            assert!((x.mean - y.mean).abs() < 1e-12);
        }
        let svg = render_svg(&cells);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("class=\"point\"").count(), cells.iter().filter(|c| c.mean > 0.0).count());
    }

    #[test]
    fn bad_csv_header_is_rejected() {
        assert!(read_report_csv("a,b,c\n1,2,3\n".as_bytes()).is_err());
        assert!(read_report_csv("".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn fit_recovers_power_laws(slope in -1.0f64..2.0, c in 0.1f64..10.0) {
            let pts: Vec<(f64, f64)> = DEFAULT_T_GRID.iter().map(|&t| (t as f64, c * (t as f64).powf(slope))).collect();
            let f = fit_scaling(&pts, Correction::None).unwrap();
            prop_assert!((f.slope - slope).abs() < 1e-9);
            prop_assert!((f.r2 - 1.0).abs() < 1e-9 || slope.abs() < 1e-9);
        }

        #[test]
        fn mean_se_matches_definition(xs in proptest::collection::vec(-10.0f64..10.0, 2..40)) {
            let (m, se) = mean_se(&xs);
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
            prop_assert!((m - mean).abs() < 1e-12);
            prop_assert!((se - (var / n).sqrt()).abs() < 1e-12);
        }
    }
}
