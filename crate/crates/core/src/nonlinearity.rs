//! The nonlinearities `G` (inside the operator) and `f` (right-hand side),
//! and sampled checks of the structural conditions on them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `G(t)`: `Identity` or `|t|^γ t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum GKind {
    Identity,
    PowerG { gamma: f64 },
}

impl GKind {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            GKind::Identity => t,
            GKind::PowerG { gamma } => {
                if gamma == 0.0 {
                    t
                } else {
                    t.abs().powf(gamma) * t
                }
            }
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            GKind::Identity => 1.0,
            GKind::PowerG { gamma } => {
                if gamma == 0.0 {
                    1.0
                } else {
                    (gamma + 1.0) * t.abs().powf(gamma)
                }
            }
        }
    }

    /// Growth exponent γ (0 for the identity).
    pub fn gamma(&self) -> f64 {
        match *self {
            GKind::Identity => 0.0,
            GKind::PowerG { gamma } => gamma,
        }
    }

    pub fn is_linear(&self) -> bool {
        self.gamma() == 0.0
    }

    /// `G(u₀−v)/(u₀−v)`, the secant slope through the origin (`G′(0)` at 0).
    pub fn secant(&self, d: f64) -> f64 {
        if d == 0.0 {
            self.derivative(0.0)
        } else {
            self.eval(d) / d
        }
    }

    fn validate(&self) -> Result<()> {
        if let GKind::PowerG { gamma } = *self {
            if !(gamma >= 0.0 && gamma.is_finite()) {
                return Err(Error::config("nonlinearity.g.gamma must be a finite real >= 0"));
            }
        }
        Ok(())
    }
}

/// Right-hand side `f(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum FKind {
    /// `f ≡ a`.
    Constant { a: f64 },
    /// `scale·|t|^s t`.
    PowerF { s: f64, scale: f64 },
    /// `a + b|t|^p` with `t` clamped to `[clip_lo, clip_hi]` first.
    AffinePlusPower { a: f64, b: f64, p: f64, clip_lo: f64, clip_hi: f64 },
    /// Piecewise-linear interpolation through `(knots[i], values[i])`,
    /// constant beyond the end knots.
    LipschitzTable { knots: Vec<f64>, values: Vec<f64>, lipschitz: f64 },
}

impl FKind {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            FKind::Constant { a } => *a,
            FKind::PowerF { s, scale } => scale * t.abs().powf(*s) * t,
            FKind::AffinePlusPower { a, b, p, clip_lo, clip_hi } => {
                let c = t.clamp(*clip_lo, *clip_hi);
                a + b * c.abs().powf(*p)
            }
            FKind::LipschitzTable { knots, values, .. } => {
                let k = knots.partition_point(|&x| x <= t);
                if k == 0 {
                    values[0]
                } else if k == knots.len() {
                    values[k - 1]
                } else {
                    let w = (t - knots[k - 1]) / (knots[k] - knots[k - 1]);
                    values[k - 1] + w * (values[k] - values[k - 1])
                }
            }
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            FKind::Constant { .. } => 0.0,
            FKind::PowerF { s, scale } => scale * (s + 1.0) * t.abs().powf(*s),
            FKind::AffinePlusPower { b, p, clip_lo, clip_hi, .. } => {
                if t < *clip_lo || t > *clip_hi {
                    0.0
                } else if t == 0.0 {
                    if *p == 1.0 {
                        *b
                    } else {
                        0.0
                    }
                } else {
                    b * p * t.abs().powf(p - 1.0) * t.signum()
                }
            }
            FKind::LipschitzTable { knots, values, .. } => {
                let k = knots.partition_point(|&x| x <= t);
                if k == 0 || k == knots.len() {
                    0.0
                } else {
                    (values[k] - values[k - 1]) / (knots[k] - knots[k - 1])
                }
            }
        }
    }

    /// Global Lipschitz constant, infinite when `f` is not globally Lipschitz.
    pub fn lipschitz(&self) -> f64 {
        match self {
            FKind::Constant { .. } => 0.0,
            FKind::PowerF { s, scale } => {
                if *s == 0.0 {
                    scale.abs()
                } else {
                    f64::INFINITY
                }
            }
            FKind::AffinePlusPower { b, p, clip_lo, clip_hi, .. } => {
                let m = clip_lo.abs().max(clip_hi.abs());
                if *p >= 1.0 {
                    (b * p).abs() * m.powf(p - 1.0)
                } else {
                    f64::INFINITY
                }
            }
            FKind::LipschitzTable { lipschitz, .. } => *lipschitz,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            FKind::Constant { a } if !a.is_finite() => Err(Error::config("nonlinearity.f.a must be finite")),
            FKind::PowerF { s, scale } if !(*s >= 0.0) || !scale.is_finite() => {
                Err(Error::config("nonlinearity.f.s must be >= 0 and scale finite"))
            }
            FKind::AffinePlusPower { p, clip_lo, clip_hi, .. } if !(*p > 0.0) || !(clip_lo < clip_hi) => {
                Err(Error::config("nonlinearity.f needs p > 0 and clip_lo < clip_hi"))
            }
            FKind::LipschitzTable { knots, values, lipschitz } => {
                if knots.is_empty() || knots.len() != values.len() {
                    return Err(Error::config("nonlinearity.f.knots and values must be non-empty and of equal length"));
                }
                if knots.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::config("nonlinearity.f.knots must be strictly increasing"));
                }
                let steepest = knots
                    .windows(2)
                    .zip(values.windows(2))
                    .map(|(k, v)| ((v[1] - v[0]) / (k[1] - k[0])).abs())
                    .fold(0.0, f64::max);
                if steepest > *lipschitz * (1.0 + 1e-12) {
                    return Err(Error::config(format!(
                        "nonlinearity.f.lipschitz = {lipschitz} is below the table slope {steepest}"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Exponents and constants of the two-sided difference-quotient condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2PrimeConstants {
    pub gamma: f64,
    pub s: f64,
    pub c1: f64,
    pub c2: f64,
    pub eps_g2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNonlinearity", into = "RawNonlinearity")]
pub struct NonlinearitySpec {
    pub g: GKind,
    pub f: FKind,
    g2prime: Option<G2PrimeConstants>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawNonlinearity {
    g: GKind,
    f: FKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    g2prime: Option<G2PrimeConstants>,
}

impl TryFrom<RawNonlinearity> for NonlinearitySpec {
    type Error = Error;
    fn try_from(r: RawNonlinearity) -> Result<Self> {
        NonlinearitySpec::with_constants(r.g, r.f, r.g2prime)
    }
}

impl From<NonlinearitySpec> for RawNonlinearity {
    fn from(s: NonlinearitySpec) -> Self {
        RawNonlinearity { g: s.g, f: s.f, g2prime: s.g2prime }
    }
}

impl NonlinearitySpec {
    pub fn new(g: GKind, f: FKind) -> Result<Self> {
        Self::with_constants(g, f, None)
    }

    pub fn with_constants(g: GKind, f: FKind, g2prime: Option<G2PrimeConstants>) -> Result<Self> {
        g.validate()?;
        f.validate()?;
        if let Some(c) = g2prime {
            if !(c.gamma < c.s) {
                return Err(Error::config("nonlinearity.g2prime requires gamma < s"));
            }
            if !(c.c1 > 0.0 && c.c2 > 0.0 && c.eps_g2 > 0.0) {
                return Err(Error::config("nonlinearity.g2prime constants must be positive"));
            }
        }
        Ok(NonlinearitySpec { g, f, g2prime })
    }

    /// Identity `G` with `f ≡ 0`.
    pub fn linear_homogeneous() -> Self {
        NonlinearitySpec { g: GKind::Identity, f: FKind::Constant { a: 0.0 }, g2prime: None }
    }

    /// Explicit constants, or the natural ones for `PowerG`/`PowerF` pairs.
    pub fn g2prime(&self) -> Option<G2PrimeConstants> {
        if self.g2prime.is_some() {
            return self.g2prime;
        }
        match (self.g, &self.f) {
            (g, FKind::PowerF { s, scale }) if g.gamma() < *s && *scale > 0.0 => Some(G2PrimeConstants {
                gamma: g.gamma(),
                s: *s,
                c1: 1.0,
                c2: (1.0 + s) * scale,
                eps_g2: 1.0,
            }),
            _ => None,
        }
    }
}

pub fn eval_g(spec: &NonlinearitySpec, t: f64) -> f64 {
    spec.g.eval(t)
}

pub fn eval_g_prime(spec: &NonlinearitySpec, t: f64) -> f64 {
    spec.g.derivative(t)
}

/// Outcome of a sampled check on `G` or `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearityReport {
    pub holds: bool,
    pub witness: Option<Vec<f64>>,
    /// Fitted constants; meaning depends on the check.
    pub estimates: Vec<f64>,
    pub samples: usize,
}

const G1_SEED: u64 = 0x6731;
const G2P_SEED: u64 = 0x6732;

/// Oddness (to 1e-12 relative) and strict monotonicity of an arbitrary `G`.
pub fn check_g1_fn(g: &dyn Fn(f64) -> f64, sample_count: usize) -> NonlinearityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(G1_SEED);
    let mut ts = vec![1.0, 0.5, 2.0];
    ts.extend((0..sample_count.max(3) - 3).map(|_| rng.random_range(1e-6..10.0)));
    if g(0.0) != 0.0 {
        return NonlinearityReport { holds: false, witness: Some(vec![0.0]), estimates: vec![g(0.0)], samples: 1 };
    }
    let mut worst_odd: f64 = 0.0;
    for &t in &ts {
        let a = g(t);
        let b = g(-t);
        let d = (a + b).abs() / a.abs().max(1.0);
        worst_odd = worst_odd.max(d);
        if !(d <= 1e-12) {
            return NonlinearityReport { holds: false, witness: Some(vec![t]), estimates: vec![d], samples: ts.len() };
        }
    }
    let mut pts: Vec<f64> = ts.iter().flat_map(|&t| [t, -t]).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    for w in pts.windows(2) {
        if !(g(w[0]) < g(w[1])) {
            return NonlinearityReport {
                holds: false,
                witness: Some(vec![w[0], w[1]]),
                estimates: vec![worst_odd],
                samples: ts.len(),
            };
        }
    }
    NonlinearityReport { holds: true, witness: None, estimates: vec![worst_odd], samples: ts.len() }
}

pub fn check_g1(spec: &NonlinearitySpec, sample_count: usize) -> NonlinearityReport {
    let g = spec.g;
    check_g1_fn(&move |t| g.eval(t), sample_count)
}

/// Ratio `f′/G′` on `t = t_min·2^k ≤ 1`. Fails when `G′` vanishes at a sample
/// or the ratio grows towards 0 (log-log slope below −0.1 over the smallest
/// decade). `estimates = [max ratio on smallest decade, slope]`.
pub fn check_g2(spec: &NonlinearitySpec, t_min: f64) -> Result<NonlinearityReport> {
    if !(t_min > 0.0 && t_min < 1.0) {
        return Err(Error::domain("t_min must lie in (0,1)"));
    }
    let mut ts = vec![];
    let mut t = t_min;
    while t <= 1.0 {
        ts.push(t);
        t *= 2.0;
    }
    let mut ratios = vec![];
    for &t in &ts {
        let gp = spec.g.derivative(t);
        let r = spec.f.derivative(t) / gp;
        if gp == 0.0 || !r.is_finite() {
            return Ok(NonlinearityReport {
                holds: false,
                witness: Some(vec![t]),
                estimates: vec![f64::INFINITY, f64::NAN],
                samples: ts.len(),
            });
        }
        ratios.push(r);
    }
    let decade: Vec<(f64, f64)> = ts.iter().zip(&ratios).filter(|(t, _)| **t <= 10.0 * t_min).map(|(t, r)| (*t, *r)).collect();
    let running_max = decade.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let slope = if decade.len() >= 2 && decade.iter().all(|p| p.1 > 0.0) {
        let pts: Vec<(f64, f64)> = decade.iter().map(|(t, r)| (t.ln(), r.ln())).collect();
        fit_slope(&pts)
    } else {
        0.0
    };
    let holds = slope >= -0.1;
    Ok(NonlinearityReport {
        holds,
        witness: if holds { None } else { Some(vec![decade[0].0]) },
        estimates: vec![running_max, slope],
        samples: ts.len(),
    })
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Samples `0 < t₁ < t₂ < ε` and fits `C₁ = min ΔG/t₂^γ`, `C₂ = max Δf/t₂^s`.
/// `estimates = [C₁ fit, C₂ fit]`.
pub fn check_g2prime(spec: &NonlinearitySpec, sample_count: usize) -> Result<NonlinearityReport> {
    let c = spec
        .g2prime()
        .ok_or_else(|| Error::config("no (gamma, s, C1, C2, eps) constants for this nonlinearity"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(G2P_SEED);
    let mut c1_fit = f64::INFINITY;
    let mut c2_fit: f64 = 0.0;
    let mut witness = None;
    let mut used = 0;
    for _ in 0..sample_count {
        let a: f64 = rng.random_range(0.0..c.eps_g2);
        let b: f64 = rng.random_range(0.0..c.eps_g2);
        let (t1, t2) = if a < b { (a, b) } else { (b, a) };
        if t1 == t2 || t1 == 0.0 {
            continue;
        }
        used += 1;
        let dg = (spec.g.eval(t1) - spec.g.eval(t2)) / (t1 - t2) / t2.powf(c.gamma);
        let df = (spec.f.eval(t1) - spec.f.eval(t2)) / (t1 - t2) / t2.powf(c.s);
        c1_fit = c1_fit.min(dg);
        c2_fit = c2_fit.max(df);
        if witness.is_none() && (dg < c.c1 * (1.0 - 1e-12) || df > c.c2 * (1.0 + 1e-12)) {
            witness = Some(vec![t1, t2]);
        }
    }
    Ok(NonlinearityReport { holds: witness.is_none(), witness, estimates: vec![c1_fit, c2_fit], samples: used })
}

/// Intermediate point of the mean value theorem for `G = |t|^γ t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanValuePoint {
    /// `|ξ|`.
    pub xi: f64,
    /// `|ξ| / max(|t₁|, |t₂|)`.
    pub c0_ratio: f64,
}

/// `None` when `G′` is constant (γ = 0) and the property is vacuous.
pub fn check_mvt_property(spec: &NonlinearitySpec, t1: f64, t2: f64) -> Result<Option<MeanValuePoint>> {
    if t1 == t2 {
        return Err(Error::domain("t1 and t2 must differ"));
    }
    let gamma = spec.g.gamma();
    if gamma == 0.0 {
        return Ok(None);
    }
    let slope = (spec.g.eval(t2) - spec.g.eval(t1)) / (t2 - t1);
    let xi = (slope / (gamma + 1.0)).powf(1.0 / gamma);
    Ok(Some(MeanValuePoint { xi, c0_ratio: xi / t1.abs().max(t2.abs()) }))
}
