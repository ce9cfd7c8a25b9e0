//! Request distributions `F` over `(a, r)` pairs.
//!
//! Each family provides sampling, the conditional reward CDF `F^r_a`, and the
//! two expectations the fluid dual needs:
//!
//! ```text
//! hinge(λ)       = E[(r - aᵀλ)⁺]
//! consumption(λ) = E[a · 1{r > aᵀλ}]
//! ```
//!
//! Single-resource families use exact closed forms. `HyperCube` and
//! `GeneralizedLinear` integrate the reward analytically given `a` and take the
//! outer expectation over `a` on a 64-node-per-dimension Gauss–Legendre grid
//! (up to three dimensions) or a fixed-seed Monte Carlo point set beyond.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{OlpError, Result};
use crate::quadrature::PointSet;

const NODES_PER_DIM: usize = 64;
const MAX_TENSOR_DIM: usize = 3;
const MONTE_CARLO_POINTS: usize = 20_000;
const MONTE_CARLO_SEED: u64 = 0x0005_eed0_fa11;
const ATOM_MATCH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DistributionKind {
    MultisecretaryBeta,
    HyperCube,
    GeneralizedLinear,
    GapMultisecretary,
    TwoPointConsumption,
    UnitSquareShifted,
    Discrete,
}

/// Support box: `a_min <= a_i <= a_max`, rewards at most `r_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportBounds {
    pub a_min: f64,
    pub a_max: f64,
    pub r_max: f64,
}

/// Declared (reverse) Hölder constants of the conditional reward CDFs:
/// `c_beta (z2 - z1)^(1 + beta) <= F(z2) - F(z1) <= c_nu (z2 - z1)^nu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderParams {
    pub beta: f64,
    pub nu: f64,
    pub c_beta: f64,
    pub c_nu: f64,
}

/// Piecewise-linear link with flat extrapolation outside the knot range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinearLink {
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
}

impl PiecewiseLinearLink {
    pub fn eval(&self, x: f64) -> f64 {
        let k = &self.knots;
        let v = &self.values;
        if x <= k[0] {
            return v[0];
        }
        let last = k.len() - 1;
        if x >= k[last] {
            return v[last];
        }
        let i = k.partition_point(|&knot| knot <= x) - 1;
        let s = (x - k[i]) / (k[i + 1] - k[i]);
        v[i] + s * (v[i + 1] - v[i])
    }

    fn validate(&self) -> Result<()> {
        if self.knots.is_empty() || self.knots.len() != self.values.len() {
            return Err(OlpError::InvalidDistribution(
                "link needs matching, nonempty knots and values".into(),
            ));
        }
        if self.knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(OlpError::InvalidDistribution(
                "link knots must be strictly increasing".into(),
            ));
        }
        if self.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(OlpError::InvalidDistribution(
                "link values must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `r = link(aᵀweights) + ε`, `ε ~ U[-noise_half_width, noise_half_width]`,
/// `a` uniform on the box `[a_low, a_high]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedLinearParams {
    pub weights: Vec<f64>,
    pub link: PiecewiseLinearLink,
    pub noise_half_width: f64,
    pub a_low: Vec<f64>,
    pub a_high: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub a: Vec<f64>,
    pub r: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DistributionParams {
    /// `a ≡ 1`, reward density `(1 + β)|1 - 2x|^β` on `[0, 1]`.
    MultisecretaryBeta { beta: f64 },
    /// `(a, r)` uniform on `[1, 2]^m × [0, 1]`.
    HyperCube,
    GeneralizedLinear(GeneralizedLinearParams),
    /// `a ≡ 1`, reward uniform on `[0, 1] ∪ [2, 3]`.
    GapMultisecretary,
    /// `a ∈ {1, 4}` with equal mass, `r | a ~ U[1, 2]`.
    TwoPointConsumption,
    /// `(a, r)` uniform on `[1, 2]²`.
    UnitSquareShifted,
    Discrete { atoms: Vec<Atom> },
}

/// Law of `r` given `a` for the families with continuous rewards.
#[derive(Debug, Clone, Copy, PartialEq)]
enum RewardLaw {
    Uniform { lo: f64, hi: f64 },
    SymmetricPower { beta: f64 },
    Gap,
}

/// `sign(x) |x|^p`
fn signed_pow(x: f64, p: f64) -> f64 {
    x.signum() * x.abs().powf(p)
}

impl RewardLaw {
    fn support(&self) -> (f64, f64) {
        match *self {
            RewardLaw::Uniform { lo, hi } => (lo, hi),
            RewardLaw::SymmetricPower { .. } => (0.0, 1.0),
            RewardLaw::Gap => (0.0, 3.0),
        }
    }

    fn cdf(&self, z: f64) -> f64 {
        let (lo, hi) = self.support();
        if z <= lo {
            return 0.0;
        }
        if z >= hi {
            return 1.0;
        }
        match *self {
            RewardLaw::Uniform { lo, hi } => (z - lo) / (hi - lo),
            RewardLaw::SymmetricPower { beta } => 0.5 - 0.5 * signed_pow(1.0 - 2.0 * z, 1.0 + beta),
            RewardLaw::Gap => {
                if z <= 1.0 {
                    0.5 * z
                } else if z <= 2.0 {
                    0.5
                } else {
                    0.5 + 0.5 * (z - 2.0)
                }
            }
        }
    }

    /// `P(r > u)`
    fn survival(&self, u: f64) -> f64 {
        let (lo, hi) = self.support();
        if u < lo {
            return 1.0;
        }
        if u >= hi {
            return 0.0;
        }
        match *self {
            RewardLaw::Uniform { lo, hi } => (hi - u) / (hi - lo),
            RewardLaw::SymmetricPower { beta } => 0.5 + 0.5 * signed_pow(1.0 - 2.0 * u, 1.0 + beta),
            RewardLaw::Gap => {
                if u <= 1.0 {
                    1.0 - 0.5 * u
                } else if u <= 2.0 {
                    0.5
                } else {
                    0.5 * (3.0 - u)
                }
            }
        }
    }

    fn mean(&self) -> f64 {
        match *self {
            RewardLaw::Uniform { lo, hi } => 0.5 * (lo + hi),
            RewardLaw::SymmetricPower { .. } => 0.5,
            RewardLaw::Gap => 1.5,
        }
    }

    /// `E[(r - u)⁺]`
    fn hinge(&self, u: f64) -> f64 {
        let (lo, hi) = self.support();
        if u <= lo {
            return self.mean() - u;
        }
        if u >= hi {
            return 0.0;
        }
        match *self {
            RewardLaw::Uniform { lo, hi } => (hi - u) * (hi - u) / (2.0 * (hi - lo)),
            RewardLaw::SymmetricPower { beta } => {
                0.5 * (1.0 - u) + ((1.0 - 2.0 * u).abs().powf(2.0 + beta) - 1.0) / (4.0 * (2.0 + beta))
            }
            RewardLaw::Gap => {
                if u <= 1.0 {
                    (1.0 - u) - 0.25 * (1.0 - u * u) + 0.75
                } else if u <= 2.0 {
                    0.5 * (2.0 - u) + 0.25
                } else {
                    0.25 * (3.0 - u) * (3.0 - u)
                }
            }
        }
    }

    fn quantile(&self, q: f64) -> f64 {
        match *self {
            RewardLaw::Uniform { lo, hi } => lo + q * (hi - lo),
            RewardLaw::SymmetricPower { beta } => {
                0.5 * (1.0 - signed_pow(1.0 - 2.0 * q, 1.0 / (1.0 + beta)))
            }
            RewardLaw::Gap => {
                if q <= 0.5 {
                    2.0 * q
                } else {
                    2.0 * q + 1.0
                }
            }
        }
    }
}

const UNIT_UNIFORM: RewardLaw = RewardLaw::Uniform { lo: 1.0, hi: 2.0 };

/// `∫_0^u E[(U[1,2] - s)⁺] ds`
fn unit_square_hinge_antiderivative(u: f64) -> f64 {
    if u <= 1.0 {
        1.5 * u - 0.5 * u * u
    } else if u <= 2.0 {
        let w = 2.0 - u;
        1.0 + (1.0 - w * w * w) / 6.0
    } else {
        7.0 / 6.0
    }
}

/// `∫_0^u s P(U[1,2] > s) ds`
fn unit_square_consumption_antiderivative(u: f64) -> f64 {
    if u <= 1.0 {
        0.5 * u * u
    } else if u <= 2.0 {
        0.5 + (u * u - 1.0) - (u * u * u - 1.0) / 3.0
    } else {
        7.0 / 6.0
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// An immutable request distribution; cheap to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct RequestDistribution {
    m: usize,
    params: DistributionParams,
    bounds: SupportBounds,
    holder: Option<HolderParams>,
    /// Integration points for `E_a[...]` when `a` is continuous and multi-valued.
    a_points: Option<PointSet>,
}

impl RequestDistribution {
    pub fn multisecretary_beta(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(OlpError::InvalidDistribution(format!(
                "beta must be finite and >= 0, got {beta}"
            )));
        }
        Ok(Self {
            m: 1,
            params: DistributionParams::MultisecretaryBeta { beta },
            bounds: SupportBounds {
                a_min: 1.0,
                a_max: 1.0,
                r_max: 1.0,
            },
            holder: Some(HolderParams {
                beta,
                nu: 1.0,
                c_beta: 1.0,
                c_nu: 1.0 + beta,
            }),
            a_points: None,
        })
    }

    pub fn hyper_cube(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(OlpError::InvalidDistribution("m must be positive".into()));
        }
        Ok(Self {
            m,
            params: DistributionParams::HyperCube,
            bounds: SupportBounds {
                a_min: 1.0,
                a_max: 2.0,
                r_max: 1.0,
            },
            holder: Some(HolderParams {
                beta: 0.0,
                nu: 1.0,
                c_beta: 1.0,
                c_nu: 1.0,
            }),
            a_points: Some(a_point_set(&vec![1.0; m], &vec![2.0; m])),
        })
    }

    pub fn generalized_linear(params: GeneralizedLinearParams) -> Result<Self> {
        let m = params.weights.len();
        if m == 0 || params.a_low.len() != m || params.a_high.len() != m {
            return Err(OlpError::InvalidDistribution(
                "weights, a_low and a_high must share a positive length".into(),
            ));
        }
        if params.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(OlpError::InvalidDistribution(
                "weights must be finite and non-negative".into(),
            ));
        }
        if params
            .a_low
            .iter()
            .zip(&params.a_high)
            .any(|(lo, hi)| !(*lo > 0.0 && hi >= lo && hi.is_finite()))
        {
            return Err(OlpError::InvalidDistribution(
                "consumption box needs 0 < a_low <= a_high".into(),
            ));
        }
        if !(params.noise_half_width.is_finite() && params.noise_half_width > 0.0) {
            return Err(OlpError::InvalidDistribution(
                "noise_half_width must be positive".into(),
            ));
        }
        params.link.validate()?;
        let half = params.noise_half_width;
        let r_max = params.link.max_value() + half;
        let bounds = SupportBounds {
            a_min: params.a_low.iter().copied().fold(f64::INFINITY, f64::min),
            a_max: params.a_high.iter().copied().fold(0.0, f64::max),
            r_max,
        };
        let a_points = Some(a_point_set(&params.a_low, &params.a_high));
        Ok(Self {
            m,
            params: DistributionParams::GeneralizedLinear(params),
            bounds,
            holder: Some(HolderParams {
                beta: 0.0,
                nu: 1.0,
                c_beta: 1.0 / (2.0 * half),
                c_nu: 1.0 / (2.0 * half),
            }),
            a_points,
        })
    }

    pub fn gap_multisecretary() -> Self {
        Self {
            m: 1,
            params: DistributionParams::GapMultisecretary,
            bounds: SupportBounds {
                a_min: 1.0,
                a_max: 1.0,
                r_max: 3.0,
            },
            holder: None,
            a_points: None,
        }
    }

    pub fn two_point_consumption() -> Self {
        Self {
            m: 1,
            params: DistributionParams::TwoPointConsumption,
            bounds: SupportBounds {
                a_min: 1.0,
                a_max: 4.0,
                r_max: 2.0,
            },
            holder: Some(HolderParams {
                beta: 0.0,
                nu: 1.0,
                c_beta: 1.0,
                c_nu: 1.0,
            }),
            a_points: None,
        }
    }

    pub fn unit_square_shifted() -> Self {
        Self {
            m: 1,
            params: DistributionParams::UnitSquareShifted,
            bounds: SupportBounds {
                a_min: 1.0,
                a_max: 2.0,
                r_max: 2.0,
            },
            holder: Some(HolderParams {
                beta: 0.0,
                nu: 1.0,
                c_beta: 1.0,
                c_nu: 1.0,
            }),
            a_points: Some(a_point_set(&[1.0], &[2.0])),
        }
    }

    pub fn discrete(atoms: Vec<Atom>) -> Result<Self> {
        let Some(first) = atoms.first() else {
            return Err(OlpError::InvalidDistribution("discrete law needs at least one atom".into()));
        };
        let m = first.a.len();
        if m == 0 {
            return Err(OlpError::InvalidDistribution("atoms need a nonempty consumption vector".into()));
        }
        let mut total = 0.0;
        let mut a_min = f64::INFINITY;
        let mut a_max: f64 = 0.0;
        let mut r_max = f64::NEG_INFINITY;
        for (j, atom) in atoms.iter().enumerate() {
            if atom.a.len() != m {
                return Err(OlpError::InvalidDistribution(format!(
                    "atom {j} has dimension {}, expected {m}",
                    atom.a.len()
                )));
            }
            if !(atom.p > 0.0 && atom.p.is_finite()) {
                return Err(OlpError::InvalidDistribution(format!(
                    "atom {j} has non-positive probability {}",
                    atom.p
                )));
            }
            if atom.a.iter().any(|x| !(x.is_finite() && *x > 0.0)) || !atom.r.is_finite() {
                return Err(OlpError::InvalidDistribution(format!(
                    "atom {j} needs positive finite consumption and a finite reward"
                )));
            }
            total += atom.p;
            for &x in &atom.a {
                a_min = a_min.min(x);
                a_max = a_max.max(x);
            }
            r_max = r_max.max(atom.r);
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(OlpError::InvalidDistribution(format!(
                "atom probabilities sum to {total}, expected 1"
            )));
        }
        if r_max <= 0.0 {
            return Err(OlpError::InvalidDistribution(
                "at least one atom needs a positive reward".into(),
            ));
        }
        Ok(Self {
            m,
            params: DistributionParams::Discrete { atoms },
            bounds: SupportBounds { a_min, a_max, r_max },
            holder: None,
            a_points: None,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn kind(&self) -> DistributionKind {
        match self.params {
            DistributionParams::MultisecretaryBeta { .. } => DistributionKind::MultisecretaryBeta,
            DistributionParams::HyperCube => DistributionKind::HyperCube,
            DistributionParams::GeneralizedLinear(_) => DistributionKind::GeneralizedLinear,
            DistributionParams::GapMultisecretary => DistributionKind::GapMultisecretary,
            DistributionParams::TwoPointConsumption => DistributionKind::TwoPointConsumption,
            DistributionParams::UnitSquareShifted => DistributionKind::UnitSquareShifted,
            DistributionParams::Discrete { .. } => DistributionKind::Discrete,
        }
    }

    pub fn params(&self) -> &DistributionParams {
        &self.params
    }

    pub fn bounds(&self) -> SupportBounds {
        self.bounds
    }

    pub fn holder(&self) -> Option<HolderParams> {
        self.holder
    }

    /// Upper corner of the dual box `Ω = [0, r̄/A̲]^m`.
    pub fn dual_upper(&self) -> Vec<f64> {
        vec![self.bounds.r_max / self.bounds.a_min; self.m]
    }

    /// True when `f_d` is piecewise linear (finitely many request types).
    pub fn is_piecewise_linear(&self) -> bool {
        matches!(self.params, DistributionParams::Discrete { .. })
    }

    /// True when expectations are exact rather than quadrature approximations.
    pub fn has_closed_form(&self) -> bool {
        !matches!(
            self.params,
            DistributionParams::HyperCube | DistributionParams::GeneralizedLinear(_)
        )
    }

    pub fn atoms(&self) -> Option<&[Atom]> {
        match &self.params {
            DistributionParams::Discrete { atoms } => Some(atoms),
            _ => None,
        }
    }

    /// Draws one request; writes `a` into `a_out` and returns `r`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, a_out: &mut [f64]) -> f64 {
        debug_assert_eq!(a_out.len(), self.m);
        match &self.params {
            DistributionParams::MultisecretaryBeta { beta } => {
                a_out[0] = 1.0;
                RewardLaw::SymmetricPower { beta: *beta }.quantile(rng.random())
            }
            DistributionParams::HyperCube => {
                for a in a_out.iter_mut() {
                    *a = 1.0 + rng.random::<f64>();
                }
                rng.random()
            }
            DistributionParams::GeneralizedLinear(p) => {
                for (i, a) in a_out.iter_mut().enumerate() {
                    *a = p.a_low[i] + (p.a_high[i] - p.a_low[i]) * rng.random::<f64>();
                }
                let mean = p.link.eval(dot(a_out, &p.weights));
                mean + p.noise_half_width * (2.0 * rng.random::<f64>() - 1.0)
            }
            DistributionParams::GapMultisecretary => {
                a_out[0] = 1.0;
                RewardLaw::Gap.quantile(rng.random())
            }
            DistributionParams::TwoPointConsumption => {
                a_out[0] = if rng.random::<f64>() < 0.5 { 1.0 } else { 4.0 };
                1.0 + rng.random::<f64>()
            }
            DistributionParams::UnitSquareShifted => {
                a_out[0] = 1.0 + rng.random::<f64>();
                1.0 + rng.random::<f64>()
            }
            DistributionParams::Discrete { atoms } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut chosen = atoms.len() - 1;
                for (j, atom) in atoms.iter().enumerate() {
                    acc += atom.p;
                    if u < acc {
                        chosen = j;
                        break;
                    }
                }
                a_out.copy_from_slice(&atoms[chosen].a);
                atoms[chosen].r
            }
        }
    }

    pub fn sample_request<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, f64) {
        let mut a = vec![0.0; self.m];
        let r = self.sample_into(rng, &mut a);
        (a, r)
    }

    fn in_box(a: &[f64], lo: &[f64], hi: &[f64]) -> bool {
        a.iter()
            .zip(lo.iter().zip(hi))
            .all(|(x, (l, h))| *x >= l - ATOM_MATCH_TOL && *x <= h + ATOM_MATCH_TOL)
    }

    fn reward_law(&self, a: &[f64]) -> Result<RewardLaw> {
        if a.len() != self.m {
            return Err(OlpError::DimensionMismatch {
                expected: self.m,
                got: a.len(),
            });
        }
        let unsupported = || OlpError::UnsupportedConsumption(a.to_vec());
        let is_one = |x: f64| (x - 1.0).abs() <= ATOM_MATCH_TOL;
        match &self.params {
            DistributionParams::MultisecretaryBeta { beta } if is_one(a[0]) => {
                Ok(RewardLaw::SymmetricPower { beta: *beta })
            }
            DistributionParams::GapMultisecretary if is_one(a[0]) => Ok(RewardLaw::Gap),
            DistributionParams::TwoPointConsumption
                if is_one(a[0]) || (a[0] - 4.0).abs() <= ATOM_MATCH_TOL =>
            {
                Ok(UNIT_UNIFORM)
            }
            DistributionParams::UnitSquareShifted if Self::in_box(a, &[1.0], &[2.0]) => Ok(UNIT_UNIFORM),
            DistributionParams::HyperCube if Self::in_box(a, &vec![1.0; self.m], &vec![2.0; self.m]) => {
                Ok(RewardLaw::Uniform { lo: 0.0, hi: 1.0 })
            }
            DistributionParams::GeneralizedLinear(p) if Self::in_box(a, &p.a_low, &p.a_high) => {
                let mean = p.link.eval(dot(a, &p.weights));
                Ok(RewardLaw::Uniform {
                    lo: mean - p.noise_half_width,
                    hi: mean + p.noise_half_width,
                })
            }
            _ => Err(unsupported()),
        }
    }

    fn matching_atoms<'a>(&'a self, atoms: &'a [Atom], a: &'a [f64]) -> impl Iterator<Item = &'a Atom> + 'a {
        atoms.iter().filter(move |atom| {
            atom.a
                .iter()
                .zip(a)
                .all(|(x, y)| (x - y).abs() <= ATOM_MATCH_TOL)
        })
    }

    /// `F^r_a(z)`, right-continuous.
    pub fn conditional_reward_cdf(&self, a: &[f64], z: f64) -> Result<f64> {
        if let DistributionParams::Discrete { atoms } = &self.params {
            if a.len() != self.m {
                return Err(OlpError::DimensionMismatch {
                    expected: self.m,
                    got: a.len(),
                });
            }
            let (mut below, mut total) = (0.0, 0.0);
            for atom in self.matching_atoms(atoms, a) {
                total += atom.p;
                if atom.r <= z {
                    below += atom.p;
                }
            }
            if total == 0.0 {
                return Err(OlpError::UnsupportedConsumption(a.to_vec()));
            }
            return Ok((below / total).clamp(0.0, 1.0));
        }
        Ok(self.reward_law(a)?.cdf(z))
    }

    /// Support interval of `r` given `a`.
    pub fn reward_support(&self, a: &[f64]) -> Result<(f64, f64)> {
        if let DistributionParams::Discrete { atoms } = &self.params {
            let (lo, hi) = self
                .matching_atoms(atoms, a)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), atom| {
                    (lo.min(atom.r), hi.max(atom.r))
                });
            if lo > hi {
                return Err(OlpError::UnsupportedConsumption(a.to_vec()));
            }
            return Ok((lo, hi));
        }
        Ok(self.reward_law(a)?.support())
    }

    /// `E_a[g(a)]` over the consumption marginal, exact for finitely supported
    /// `a` and by quadrature otherwise.
    pub fn expect_over_consumption(&self, g: impl Fn(&[f64]) -> f64) -> f64 {
        match &self.params {
            DistributionParams::MultisecretaryBeta { .. } | DistributionParams::GapMultisecretary => g(&[1.0]),
            DistributionParams::TwoPointConsumption => 0.5 * g(&[1.0]) + 0.5 * g(&[4.0]),
            DistributionParams::Discrete { atoms } => atoms.iter().map(|atom| atom.p * g(&atom.a)).sum(),
            _ => self.a_points.as_ref().expect("continuous consumption law has points").expect(g),
        }
    }

    /// `E[a]`
    pub fn mean_consumption(&self) -> Vec<f64> {
        match &self.params {
            DistributionParams::MultisecretaryBeta { .. } | DistributionParams::GapMultisecretary => vec![1.0],
            DistributionParams::TwoPointConsumption => vec![2.5],
            DistributionParams::UnitSquareShifted => vec![1.5],
            DistributionParams::HyperCube => vec![1.5; self.m],
            DistributionParams::GeneralizedLinear(p) => {
                p.a_low.iter().zip(&p.a_high).map(|(l, h)| 0.5 * (l + h)).collect()
            }
            DistributionParams::Discrete { atoms } => {
                let mut out = vec![0.0; self.m];
                for atom in atoms {
                    for (o, x) in out.iter_mut().zip(&atom.a) {
                        *o += atom.p * x;
                    }
                }
                out
            }
        }
    }

    /// `E[(r - aᵀλ)⁺]`. Panics if `lambda.len() != m`.
    pub fn hinge_expectation(&self, lambda: &[f64]) -> f64 {
        assert_eq!(lambda.len(), self.m, "lambda has the wrong dimension");
        match &self.params {
            DistributionParams::MultisecretaryBeta { beta } => {
                RewardLaw::SymmetricPower { beta: *beta }.hinge(lambda[0])
            }
            DistributionParams::GapMultisecretary => RewardLaw::Gap.hinge(lambda[0]),
            DistributionParams::TwoPointConsumption => {
                0.5 * (UNIT_UNIFORM.hinge(lambda[0]) + UNIT_UNIFORM.hinge(4.0 * lambda[0]))
            }
            DistributionParams::UnitSquareShifted => {
                let l = lambda[0];
                if l <= 0.5 {
                    1.5 - 1.5 * l
                } else if l >= 2.0 {
                    0.0
                } else {
                    (unit_square_hinge_antiderivative(2.0 * l) - unit_square_hinge_antiderivative(l)) / l
                }
            }
            DistributionParams::HyperCube => {
                let law = RewardLaw::Uniform { lo: 0.0, hi: 1.0 };
                self.expect_over_consumption(|a| law.hinge(dot(a, lambda)))
            }
            DistributionParams::GeneralizedLinear(p) => self.expect_over_consumption(|a| {
                let mean = p.link.eval(dot(a, &p.weights));
                RewardLaw::Uniform {
                    lo: mean - p.noise_half_width,
                    hi: mean + p.noise_half_width,
                }
                .hinge(dot(a, lambda))
            }),
            DistributionParams::Discrete { atoms } => atoms
                .iter()
                .map(|atom| atom.p * (atom.r - dot(&atom.a, lambda)).max(0.0))
                .sum(),
        }
    }

    /// `E[a · 1{r > aᵀλ}]`. Panics if `lambda.len() != m`.
    pub fn consumption_expectation(&self, lambda: &[f64]) -> Vec<f64> {
        assert_eq!(lambda.len(), self.m, "lambda has the wrong dimension");
        match &self.params {
            DistributionParams::MultisecretaryBeta { beta } => {
                vec![RewardLaw::SymmetricPower { beta: *beta }.survival(lambda[0])]
            }
            DistributionParams::GapMultisecretary => vec![RewardLaw::Gap.survival(lambda[0])],
            DistributionParams::TwoPointConsumption => {
                let l = lambda[0];
                vec![0.5 * UNIT_UNIFORM.survival(l) + 2.0 * UNIT_UNIFORM.survival(4.0 * l)]
            }
            DistributionParams::UnitSquareShifted => {
                let l = lambda[0];
                if l <= 0.5 {
                    vec![1.5]
                } else if l >= 2.0 {
                    vec![0.0]
                } else {
                    vec![
                        (unit_square_consumption_antiderivative(2.0 * l)
                            - unit_square_consumption_antiderivative(l))
                            / (l * l),
                    ]
                }
            }
            DistributionParams::HyperCube | DistributionParams::GeneralizedLinear(_) => {
                let points = self.a_points.as_ref().expect("continuous consumption law has points");
                let mut out = vec![0.0; self.m];
                for (w, a) in points.iter() {
                    let s = self.reward_law(a).map(|law| law.survival(dot(a, lambda))).unwrap_or(0.0);
                    if s > 0.0 {
                        for (o, x) in out.iter_mut().zip(a) {
                            *o += w * s * x;
                        }
                    }
                }
                out
            }
            DistributionParams::Discrete { atoms } => {
                let mut out = vec![0.0; self.m];
                for atom in atoms {
                    if atom.r > dot(&atom.a, lambda) {
                        for (o, x) in out.iter_mut().zip(&atom.a) {
                            *o += atom.p * x;
                        }
                    }
                }
                out
            }
        }
    }

    /// Smallest `λ ∈ [0, r̄]` with `P(r > λ) <= d`, for the `a ≡ 1` families.
    pub(crate) fn unit_consumption_quantile(&self, d: f64) -> Option<f64> {
        let law = match &self.params {
            DistributionParams::MultisecretaryBeta { beta } => RewardLaw::SymmetricPower { beta: *beta },
            DistributionParams::GapMultisecretary => RewardLaw::Gap,
            _ => return None,
        };
        let (_, hi) = law.support();
        Some(if d >= 1.0 {
            0.0
        } else if d <= 0.0 {
            hi
        } else {
            match law {
                // left end of the gap when d = 1/2
                RewardLaw::Gap if d >= 0.5 => 2.0 * (1.0 - d),
                RewardLaw::Gap => 3.0 - 2.0 * d,
                _ => law.quantile(1.0 - d).clamp(0.0, hi),
            }
        })
    }
}

fn a_point_set(lo: &[f64], hi: &[f64]) -> PointSet {
    if lo.len() <= MAX_TENSOR_DIM {
        PointSet::tensor_uniform(lo, hi, NODES_PER_DIM)
    } else {
        PointSet::monte_carlo_uniform(lo, hi, MONTE_CARLO_POINTS, MONTE_CARLO_SEED)
    }
}

/// JSON block `{"kind": ..., "m": ..., "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub kind: DistributionKind,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub params: serde_json::Value,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BetaParams {
    beta: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DiscreteParams {
    atoms: Vec<Atom>,
}

fn parse_params<T: serde::de::DeserializeOwned>(kind: DistributionKind, value: &serde_json::Value) -> Result<T> {
    serde_json::from_value(value.clone())
        .map_err(|e| OlpError::Config(format!("params for {kind:?}: {e}")))
}

impl DistributionSpec {
    pub fn build(&self) -> Result<RequestDistribution> {
        let single = |name: DistributionKind| -> Result<()> {
            match self.m {
                None | Some(1) => Ok(()),
                Some(m) => Err(OlpError::Config(format!("{name:?} requires m = 1, got m = {m}"))),
            }
        };
        let dist = match self.kind {
            DistributionKind::MultisecretaryBeta => {
                single(self.kind)?;
                let p: BetaParams = parse_params(self.kind, &self.params)?;
                RequestDistribution::multisecretary_beta(p.beta)?
            }
            DistributionKind::HyperCube => {
                let m = self
                    .m
                    .ok_or_else(|| OlpError::Config("missing field `m` for HyperCube".into()))?;
                RequestDistribution::hyper_cube(m)?
            }
            DistributionKind::GeneralizedLinear => {
                let p: GeneralizedLinearParams = parse_params(self.kind, &self.params)?;
                RequestDistribution::generalized_linear(p)?
            }
            DistributionKind::GapMultisecretary => {
                single(self.kind)?;
                RequestDistribution::gap_multisecretary()
            }
            DistributionKind::TwoPointConsumption => {
                single(self.kind)?;
                RequestDistribution::two_point_consumption()
            }
            DistributionKind::UnitSquareShifted => {
                single(self.kind)?;
                RequestDistribution::unit_square_shifted()
            }
            DistributionKind::Discrete => {
                let p: DiscreteParams = parse_params(self.kind, &self.params)?;
                RequestDistribution::discrete(p.atoms)?
            }
        };
        if let Some(m) = self.m {
            if m != dist.m() {
                return Err(OlpError::Config(format!(
                    "declared m = {m} but the {:?} parameters imply m = {}",
                    self.kind,
                    dist.m()
                )));
            }
        }
        Ok(dist)
    }
}

impl RequestDistribution {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: DistributionSpec =
            serde_json::from_str(text).map_err(|e| OlpError::Config(e.to_string()))?;
        spec.build()
    }

    /// Analytic density of the multisecretary-β reward law (test support).
    pub fn multisecretary_density(beta: f64, x: f64) -> f64 {
        if (0.0..=1.0).contains(&x) {
            (1.0 + beta) * (1.0 - 2.0 * x).abs().powf(beta)
        } else {
            0.0
        }
    }
}
