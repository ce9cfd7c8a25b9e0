//! Degeneracy diagnostics for the deterministic LP (DLP) of a discrete law
//! and the point checks that go with it for continuous laws.
//!
//! All three checks are one-sided numerical tests: a "unique" verdict means
//! no alternative optimum was found at the probe resolution.

use rand::Rng;
use serde::Serialize;

use crate::distributions::{Atom, RequestDistribution};
use crate::error::{check_dim, OlpError, Result};
use crate::fluid_dual::{solve_fluid_dual, weighted_atoms, SolverConfig};
use crate::hindsight::{recover_primal, RequestSample};
use crate::rng::rng_from_seed;

/// Membership and binding tolerance.
pub const BINDING_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DlpSolution {
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    /// `η_j = p_j (r_j - a_jᵀλ)⁺`
    pub eta: Vec<f64>,
    pub primal_value: f64,
    pub dual_value: f64,
}

impl DlpSolution {
    pub fn duality_gap(&self) -> f64 {
        (self.primal_value - self.dual_value).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegeneracyVerdict {
    pub dlp_nondegenerate: bool,
    pub strict_cs: bool,
    pub dual_unique: bool,
    pub nondeg_count: usize,
    pub details: String,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn discrete_atoms(dist: &RequestDistribution) -> Result<&[Atom]> {
    dist.atoms()
        .ok_or_else(|| OlpError::InvalidDistribution(format!("{:?} is not a discrete law", dist.kind())))
}

fn check_inventory(dist: &RequestDistribution, d: &[f64]) -> Result<()> {
    check_dim(dist.m(), d.len())?;
    if d.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(OlpError::Config(format!("inventory must be finite and >= 0, got {d:?}")));
    }
    Ok(())
}

/// Resource usage `Σ_j p_j a_j x_j`.
fn usage(atoms: &[Atom], x: &[f64], m: usize) -> Vec<f64> {
    let mut u = vec![0.0; m];
    for (atom, xj) in atoms.iter().zip(x) {
        for i in 0..m {
            u[i] += atom.p * atom.a[i] * xj;
        }
    }
    u
}

/// Solves the DLP `max Σ p_j r_j x_j  s.t.  Σ p_j a_j x_j ≤ d, x ∈ [0,1]ⁿ`.
///
/// The dual is the fluid dual of the law; `x` comes from complementary
/// slackness on the probability-weighted items.
pub fn solve_dlp(dist: &RequestDistribution, d: &[f64], cfg: &SolverConfig) -> Result<DlpSolution> {
    let atoms = discrete_atoms(dist)?;
    check_inventory(dist, d)?;
    let m = dist.m();
    let lambda = solve_fluid_dual(dist, d, cfg)?.lambda;
    let (wa, wr) = weighted_atoms(dist).expect("discrete law has atoms");
    let items = RequestSample::new(m, wa, wr)?;
    let x = recover_primal(&items, d, &lambda)?.x;
    let eta: Vec<f64> = atoms
        .iter()
        .map(|atom| atom.p * (atom.r - dot(&atom.a, &lambda)).max(0.0))
        .collect();
    let primal_value = atoms.iter().zip(&x).map(|(atom, xj)| atom.p * atom.r * xj).sum();
    let dual_value = dot(d, &lambda) + eta.iter().sum::<f64>();
    Ok(DlpSolution {
        x,
        lambda,
        eta,
        primal_value,
        dual_value,
    })
}

/// `|{j: x_j ∈ {0,1}}| + |{i: resource i binding}|` and whether it equals `n`.
pub fn dlp_nondegeneracy_check(sol: &DlpSolution, dist: &RequestDistribution, d: &[f64]) -> (bool, usize) {
    let atoms = dist.atoms().unwrap_or(&[]);
    let n = sol.x.len();
    let fixed = sol
        .x
        .iter()
        .filter(|x| x.abs() <= BINDING_TOL || (1.0 - *x).abs() <= BINDING_TOL)
        .count();
    let u = usage(atoms, &sol.x, dist.m());
    let binding = u.iter().zip(d).filter(|(u, d)| (*d - *u).abs() <= BINDING_TOL).count();
    let count = fixed + binding;
    (count == n, count)
}

/// Slack tolerance for the resource condition; laws integrated by quadrature
/// are solved to a looser certificate.
fn slack_tol(dist: &RequestDistribution) -> f64 {
    if dist.has_closed_form() {
        BINDING_TOL
    } else {
        1e-5
    }
}

/// Strict complementarity at `λ*`.
///
/// Every resource must have exactly one of `λ*_i > 0` and positive slack. For
/// a discrete law the item pairs are checked as well on the recovered DLP
/// primal: `x_j = 0` needs a strictly negative margin `r_j - a_jᵀλ*`, and
/// `x_j = 1` a strictly positive one.
pub fn strict_cs_check(dist: &RequestDistribution, d: &[f64], lambda: &[f64]) -> bool {
    if d.len() != dist.m() || lambda.len() != dist.m() {
        return false;
    }
    let (slack, items_ok) = match dist.atoms() {
        Some(atoms) => {
            let Some((wa, wr)) = weighted_atoms(dist) else {
                return false;
            };
            let Ok(items) = RequestSample::new(dist.m(), wa, wr) else {
                return false;
            };
            let Ok(alloc) = recover_primal(&items, d, lambda) else {
                return false;
            };
            let u = usage(atoms, &alloc.x, dist.m());
            let items_ok = atoms.iter().zip(&alloc.x).all(|(atom, &x)| {
                let margin = atom.r - dot(&atom.a, lambda);
                if x <= BINDING_TOL {
                    margin < -BINDING_TOL
                } else if x >= 1.0 - BINDING_TOL {
                    margin > BINDING_TOL
                } else {
                    true
                }
            });
            let slack: Vec<f64> = d.iter().zip(&u).map(|(d, u)| d - u).collect();
            (slack, items_ok)
        }
        None => {
            let c = dist.consumption_expectation(lambda);
            (d.iter().zip(&c).map(|(d, c)| d - c).collect(), true)
        }
    };
    let tol = slack_tol(dist);
    let resources_ok = lambda
        .iter()
        .zip(&slack)
        .all(|(l, s)| (*l > BINDING_TOL) != (*s > tol));
    items_ok && resources_ok
}

/// No alternative fluid-dual optimum found by the flat-direction probe.
pub fn dual_uniqueness_check(dist: &RequestDistribution, d: &[f64], cfg: &SolverConfig) -> Result<bool> {
    Ok(solve_fluid_dual(dist, d, cfg)?.looks_unique())
}

/// `d = E[a·1(r > aᵀλ°)]`: the inventory at which `λ°` is stationary while its
/// zero-priced resources bind.
pub fn make_degenerate_inventory(dist: &RequestDistribution, lambda0: &[f64]) -> Result<Vec<f64>> {
    check_dim(dist.m(), lambda0.len())?;
    if lambda0.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(OlpError::Config(format!("price vector must be finite and >= 0, got {lambda0:?}")));
    }
    if !lambda0.contains(&0.0) {
        return Err(OlpError::Config("price vector needs at least one zero coordinate".into()));
    }
    Ok(dist.consumption_expectation(lambda0))
}

/// All three verdicts at inventory `d`.
pub fn assess(dist: &RequestDistribution, d: &[f64], cfg: &SolverConfig) -> Result<DegeneracyVerdict> {
    check_inventory(dist, d)?;
    let dual = solve_fluid_dual(dist, d, cfg)?;
    let dual_unique = dual.looks_unique();
    if dist.atoms().is_some() {
        let sol = solve_dlp(dist, d, cfg)?;
        let (dlp_nondegenerate, nondeg_count) = dlp_nondegeneracy_check(&sol, dist, d);
        let strict_cs = strict_cs_check(dist, d, &sol.lambda);
        Ok(DegeneracyVerdict {
            dlp_nondegenerate,
            strict_cs,
            dual_unique,
            nondeg_count,
            details: format!(
                "n = {}, x = {:?}, lambda = {:?}, primal = {}, dual = {}",
                sol.x.len(),
                sol.x,
                sol.lambda,
                sol.primal_value,
                sol.dual_value
            ),
        })
    } else {
        // without a finite support the count is undefined; strict CS is
        // only meaningful at a unique optimum
        let strict_cs = dual_unique && strict_cs_check(dist, d, &dual.lambda);
        Ok(DegeneracyVerdict {
            dlp_nondegenerate: false,
            strict_cs,
            dual_unique,
            nondeg_count: 0,
            details: format!(
                "continuous law: DLP count not applicable; lambda = {:?}, flat directions = {}",
                dual.lambda,
                dual.flat_directions.len()
            ),
        })
    }
}

/// Support pattern of `x`: 0, 1 or fractional per item.
fn support(x: &[f64]) -> Vec<u8> {
    x.iter()
        .map(|&v| {
            if v <= BINDING_TOL {
                0
            } else if v >= 1.0 - BINDING_TOL {
                1
            } else {
                2
            }
        })
        .collect()
}

/// True when perturbing the rewards by `±1e-6` leaves the recovered primal
/// unchanged, the working test for a unique primal optimum.
pub fn primal_is_stable(dist: &RequestDistribution, d: &[f64], cfg: &SolverConfig, seed: u64) -> Result<bool> {
    let atoms = discrete_atoms(dist)?;
    let base = solve_dlp(dist, d, cfg)?;
    let pattern = support(&base.x);
    let mut rng = rng_from_seed(seed);
    for k in 0..2 * atoms.len() + 4 {
        let perturbed: Vec<Atom> = atoms
            .iter()
            .enumerate()
            .map(|(j, atom)| {
                let sign = if k < atoms.len() {
                    if j == k { 1.0 } else { 0.0 }
                } else if k < 2 * atoms.len() {
                    if j == k - atoms.len() { -1.0 } else { 0.0 }
                } else if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                };
                Atom {
                    a: atom.a.clone(),
                    r: atom.r + sign * 1e-6,
                    p: atom.p,
                }
            })
            .collect();
        let Ok(pd) = RequestDistribution::discrete(perturbed) else {
            return Ok(false);
        };
        let sol = solve_dlp(&pd, d, cfg)?;
        if support(&sol.x) != pattern || sol.x.iter().zip(&base.x).any(|(a, b)| (a - b).abs() > 1e-5) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// One corpus instance: a discrete law and an inventory.
#[derive(Debug, Clone)]
pub struct DlpInstance {
    pub dist: RequestDistribution,
    pub d: Vec<f64>,
}

/// Random two-to-five-atom DLPs on a coarse grid with `m ∈ {1, 2}` and a
/// unique primal optimum and `d > 0`. About half put `d` exactly on a sum of weighted
/// consumptions, which makes the instance degenerate.
pub fn random_dlp_corpus(count: usize, seed: u64, cfg: &SolverConfig) -> Result<Vec<DlpInstance>> {
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > 200 * count.max(1) {
            return Err(OlpError::Config(format!(
                "corpus generation gave up after {attempts} attempts"
            )));
        }
        let m = rng.random_range(1..=2usize);
        let n = rng.random_range(2..=5usize);
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(1..=4u32) as f64).collect();
        let total: f64 = weights.iter().sum();
        let atoms: Vec<Atom> = weights
            .iter()
            .map(|w| Atom {
                a: (0..m).map(|_| rng.random_range(2..=6u32) as f64 / 2.0).collect(),
                r: rng.random_range(1..=8u32) as f64 / 2.0,
                p: w / total,
            })
            .collect();
        let Ok(dist) = RequestDistribution::discrete(atoms.clone()) else {
            continue;
        };
        let full = usage(&atoms, &vec![1.0; n], m);
        let d: Vec<f64> = match rng.random_range(0..4u32) {
            // boundary: total weighted consumption of a random subset
            0 | 1 => {
                let x: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect();
                usage(&atoms, &x, m)
            }
            2 => full
                .iter()
                .map(|f| (rng.random_range(1..=99u32) as f64 / 100.0 * f * 1000.0).round() / 1000.0 + 1.3e-4)
                .collect(),
            _ => full.iter().map(|f| f + 0.25).collect(),
        };
        // at d_i = 0 the dual face is a ray that the box Ω cuts to a point
        if d.iter().any(|x| *x <= 0.0) {
            continue;
        }
        match primal_is_stable(&dist, &d, cfg, seed ^ attempts as u64) {
            Ok(true) => out.push(DlpInstance { dist, d }),
            Ok(false) => {}
            Err(e) if e.is_solver_failure() => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_atoms() -> RequestDistribution {
        RequestDistribution::discrete(vec![
            Atom { a: vec![1.0], r: 2.0, p: 0.5 },
            Atom { a: vec![1.0], r: 1.0, p: 0.5 },
        ])
        .unwrap()
    }

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn dlp_two_atoms_interior() {
        let sol = solve_dlp(&two_atoms(), &[0.75], &cfg()).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-12 && (sol.x[1] - 0.5).abs() < 1e-12, "{:?}", sol.x);
        assert!((sol.lambda[0] - 1.0).abs() < 1e-12);
        assert!((sol.primal_value - 1.25).abs() < 1e-12);
        assert!(sol.duality_gap() <= 1e-7 * (1.0 + sol.primal_value));
        assert_eq!(dlp_nondegeneracy_check(&sol, &two_atoms(), &[0.75]), (true, 2));
    }

    #[test]
    fn dlp_two_atoms_boundary_is_degenerate() {
        let sol = solve_dlp(&two_atoms(), &[0.5], &cfg()).unwrap();
        assert_eq!(sol.x, vec![1.0, 0.0]);
        assert_eq!(dlp_nondegeneracy_check(&sol, &two_atoms(), &[0.5]), (false, 3));
        let v = assess(&two_atoms(), &[0.5], &cfg()).unwrap();
        assert!(!v.dlp_nondegenerate && !v.strict_cs && !v.dual_unique, "{v:?}");
        let v = assess(&two_atoms(), &[0.75], &cfg()).unwrap();
        assert!(v.dlp_nondegenerate && v.strict_cs && v.dual_unique, "{v:?}");
    }

    #[test]
    fn dlp_trivial_inventories() {
        let sol = solve_dlp(&two_atoms(), &[2.0], &cfg()).unwrap();
        assert_eq!(sol.x, vec![1.0, 1.0]);
        assert_eq!(sol.lambda, vec![0.0]);
        assert_eq!(dlp_nondegeneracy_check(&sol, &two_atoms(), &[2.0]), (true, 2));
        let sol = solve_dlp(&two_atoms(), &[0.0], &cfg()).unwrap();
        assert_eq!(sol.x, vec![0.0, 0.0]);
        assert_eq!(sol.primal_value, 0.0);
    }

    #[test]
    fn dlp_needs_discrete_law() {
        let hc = RequestDistribution::hyper_cube(2).unwrap();
        assert!(matches!(solve_dlp(&hc, &[0.5, 0.5], &cfg()), Err(OlpError::InvalidDistribution(_))));
    }

    #[test]
    fn strict_cs_examples() {
        let us = RequestDistribution::unit_square_shifted();
        assert!(!strict_cs_check(&us, &[1.5], &[0.0]));
        let ms = RequestDistribution::multisecretary_beta(0.0).unwrap();
        assert!(strict_cs_check(&ms, &[0.5], &[0.5]));
        assert!(strict_cs_check(&ms, &[5.0], &[0.0]));
    }

    #[test]
    fn uniqueness_examples() {
        let c = cfg();
        assert!(!dual_uniqueness_check(&RequestDistribution::two_point_consumption(), &[0.5], &c).unwrap());
        assert!(!dual_uniqueness_check(&RequestDistribution::gap_multisecretary(), &[0.5], &c).unwrap());
        let ms = RequestDistribution::multisecretary_beta(0.0).unwrap();
        assert!(dual_uniqueness_check(&ms, &[0.5], &c).unwrap());
    }

    #[test]
    fn degenerate_inventory_examples() {
        let us = RequestDistribution::unit_square_shifted();
        let d = make_degenerate_inventory(&us, &[0.0]).unwrap();
        assert!((d[0] - 1.5).abs() < 1e-12);
        let ms = RequestDistribution::multisecretary_beta(0.0).unwrap();
        assert!((make_degenerate_inventory(&ms, &[0.0]).unwrap()[0] - 1.0).abs() < 1e-12);
        let hc = RequestDistribution::hyper_cube(2).unwrap();
        let d = make_degenerate_inventory(&hc, &[0.0, 1.0]).unwrap();
        assert_eq!(d.len(), 2);
        assert!(make_degenerate_inventory(&ms, &[0.3]).is_err());
    }

    #[test]
    fn continuous_verdicts() {
        let us = RequestDistribution::unit_square_shifted();
        let v = assess(&us, &[1.5], &cfg()).unwrap();
        assert!(!v.strict_cs && !v.dual_unique);
        let ms = RequestDistribution::multisecretary_beta(0.0).unwrap();
        let v = assess(&ms, &[0.5], &cfg()).unwrap();
        assert!(v.strict_cs && v.dual_unique);
        let json = serde_json::to_value(&v).unwrap();
        assert!(json.get("nondeg_count").is_some());
    }

    #[test]
    fn corpus_verdicts_agree() {
        let corpus = random_dlp_corpus(20, 3, &cfg()).unwrap();
        let mut degenerate = 0;
        for inst in &corpus {
            let v = assess(&inst.dist, &inst.d, &cfg()).unwrap();
            assert_eq!(v.dlp_nondegenerate, v.strict_cs, "{v:?} {:?} {:?}", inst.dist.atoms(), inst.d);
            assert_eq!(v.dlp_nondegenerate, v.dual_unique, "{v:?} {:?} {:?}", inst.dist.atoms(), inst.d);
            degenerate += usize::from(!v.dlp_nondegenerate);
            let sol = solve_dlp(&inst.dist, &inst.d, &cfg()).unwrap();
            assert!(sol.duality_gap() <= 1e-7 * (1.0 + sol.primal_value.abs()));
        }
        assert!(degenerate > 0 && degenerate < corpus.len(), "{degenerate}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn degenerate_inventory_fails_strict_cs(beta in 0.0f64..3.0, l in 0.0f64..0.9) {
            let ms = RequestDistribution::multisecretary_beta(beta).unwrap();
            let d = make_degenerate_inventory(&ms, &[0.0]).unwrap();
            prop_assert!(!strict_cs_check(&ms, &d, &[0.0]));
            let hc = RequestDistribution::hyper_cube(2).unwrap();
            let d = make_degenerate_inventory(&hc, &[0.0, l]).unwrap();
            prop_assert!(!strict_cs_check(&hc, &d, &[0.0, l]));
        }

        #[test]
        fn dlp_solutions_are_feasible(
            r in proptest::collection::vec(0.5f64..4.0, 2..5),
            d in 0.0f64..2.0,
        ) {
            let n = r.len();
            let atoms: Vec<Atom> = r.iter().map(|&r| Atom { a: vec![1.0], r, p: 1.0 / n as f64 }).collect();
            let Ok(dist) = RequestDistribution::discrete(atoms) else { return Ok(()); };
            let sol = solve_dlp(&dist, &[d], &cfg()).unwrap();
            let used: f64 = sol.x.iter().sum::<f64>() / n as f64;
            prop_assert!(used <= d + 1e-9);
            prop_assert!(sol.x.iter().all(|x| (-1e-12..=1.0 + 1e-12).contains(x)));
            prop_assert!(sol.duality_gap() <= 1e-7 * (1.0 + sol.primal_value.abs()));
        }
    }
}
