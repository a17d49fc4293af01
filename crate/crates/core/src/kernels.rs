//! The jump-kernel zoo and numeric checks of the structural kernel conditions.
//!
//! Every zoo kernel factors in polar coordinates as `K(rθ) = ρ(r)·a(θ)`; the
//! quadrature code relies on this split for the singular inner ball, the
//! exterior mass and the far tail.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pv_quadrature::QuadratureConfig;
use crate::quadrature::{integrate, sphere_integral, sphere_measure, Tolerance};

/// A symmetric jump kernel `K: R^n \ {0} -> (0, ∞)` of order `alpha`.
pub trait JumpKernel: Sync {
    fn dim(&self) -> usize;
    fn alpha(&self) -> f64;
    /// Kernel density at `y != 0`; no domain check.
    fn density(&self, y: &[f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    PowerLaw,
    Exponential,
    AnisotropicPNorm,
    MatrixTransformed,
    DiagQuadratic,
    VariableOrder,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawKernelSpec {
    kind: KernelKind,
    dim: usize,
    alpha: f64,
    #[serde(default = "one")]
    c_lower: f64,
    #[serde(default = "two")]
    p_norm: f64,
    #[serde(default)]
    lambda_diag: Vec<f64>,
    #[serde(default)]
    beta_order: Option<f64>,
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

/// A validated member of the kernel zoo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKernelSpec", into = "RawKernelSpec")]
pub struct KernelSpec {
    kind: KernelKind,
    dim: usize,
    alpha: f64,
    c_lower: f64,
    p_norm: f64,
    lambda_diag: Vec<f64>,
    beta_order: f64,
    // leading constant of ρ(r)
    norm: f64,
}

impl TryFrom<RawKernelSpec> for KernelSpec {
    type Error = Error;

    fn try_from(raw: RawKernelSpec) -> Result<Self> {
        let alpha = raw.alpha;
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::InvalidKernel("alpha must lie in (0,2)".into()));
        }
        if raw.dim == 0 {
            return Err(Error::InvalidKernel("dim must be a positive integer".into()));
        }
        if !(raw.c_lower > 0.0) {
            return Err(Error::InvalidKernel("c_lower must be positive".into()));
        }
        let beta = raw.beta_order.unwrap_or(alpha);
        let mut det = 1.0;
        match raw.kind {
            KernelKind::AnisotropicPNorm => {
                if !(raw.p_norm >= 1.0 && raw.p_norm.is_finite()) {
                    return Err(Error::InvalidKernel("p_norm must be a finite real >= 1".into()));
                }
            }
            KernelKind::MatrixTransformed | KernelKind::DiagQuadratic => {
                if raw.lambda_diag.len() != raw.dim {
                    return Err(Error::InvalidKernel(format!(
                        "lambda_diag must have {} entries",
                        raw.dim
                    )));
                }
                if raw.lambda_diag.iter().any(|&l| !(l > 0.0)) {
                    return Err(Error::InvalidKernel("lambda_diag entries must be positive".into()));
                }
                if raw.lambda_diag.windows(2).any(|w| w[0] > w[1]) {
                    return Err(Error::InvalidKernel("lambda_diag must be sorted ascending".into()));
                }
                det = raw.lambda_diag.iter().product();
            }
            KernelKind::VariableOrder => {
                if !(beta >= alpha && beta < 2.0) {
                    return Err(Error::InvalidKernel("beta_order must lie in [alpha, 2)".into()));
                }
            }
            _ => {}
        }
        let norm = match raw.kind {
            KernelKind::PowerLaw => (2.0 - alpha) * raw.c_lower,
            KernelKind::Exponential => 1.0 / statrs::function::gamma::gamma((2.0 - alpha) / 2.0),
            KernelKind::AnisotropicPNorm | KernelKind::DiagQuadratic => 2.0 - alpha,
            KernelKind::MatrixTransformed => (2.0 - alpha) / det,
            KernelKind::VariableOrder => 1.0,
        };
        Ok(KernelSpec {
            kind: raw.kind,
            dim: raw.dim,
            alpha,
            c_lower: raw.c_lower,
            p_norm: raw.p_norm,
            lambda_diag: raw.lambda_diag,
            beta_order: beta,
            norm,
        })
    }
}

impl From<KernelSpec> for RawKernelSpec {
    fn from(k: KernelSpec) -> Self {
        RawKernelSpec {
            kind: k.kind,
            dim: k.dim,
            alpha: k.alpha,
            c_lower: k.c_lower,
            p_norm: k.p_norm,
            lambda_diag: k.lambda_diag,
            beta_order: Some(k.beta_order),
        }
    }
}

impl KernelSpec {
    fn build(kind: KernelKind, dim: usize, alpha: f64) -> RawKernelSpec {
        RawKernelSpec { kind, dim, alpha, c_lower: 1.0, p_norm: 2.0, lambda_diag: vec![], beta_order: None }
    }

    /// `(2-α) c / |y|^{n+α}`.
    pub fn power_law(dim: usize, alpha: f64, c_lower: f64) -> Result<Self> {
        Self::try_from(RawKernelSpec { c_lower, ..Self::build(KernelKind::PowerLaw, dim, alpha) })
    }

    /// `e^{-|y|²} / (Γ((2-α)/2) |y|^{n+α})`.
    pub fn exponential(dim: usize, alpha: f64) -> Result<Self> {
        Self::try_from(Self::build(KernelKind::Exponential, dim, alpha))
    }

    /// `(2-α) / ‖y‖_p^{n+α}`.
    pub fn anisotropic(dim: usize, alpha: f64, p: f64) -> Result<Self> {
        Self::try_from(RawKernelSpec { p_norm: p, ..Self::build(KernelKind::AnisotropicPNorm, dim, alpha) })
    }

    /// `(2-α) / (det Λ |Λ^{-1} y|^{n+α})` with `Λ = diag(lambda)`.
    pub fn matrix_transformed(alpha: f64, lambda: Vec<f64>) -> Result<Self> {
        let dim = lambda.len();
        Self::try_from(RawKernelSpec { lambda_diag: lambda, ..Self::build(KernelKind::MatrixTransformed, dim, alpha) })
    }

    /// `(2-α) yᵀΛy / |y|^{n+2+α}` with `Λ = diag(lambda)`.
    pub fn diag_quadratic(alpha: f64, lambda: Vec<f64>) -> Result<Self> {
        let dim = lambda.len();
        Self::try_from(RawKernelSpec { lambda_diag: lambda, ..Self::build(KernelKind::DiagQuadratic, dim, alpha) })
    }

    /// `|y|^{-n-β}` inside the unit ball, `|y|^{-n-α}` outside.
    pub fn variable_order(dim: usize, alpha: f64, beta: f64) -> Result<Self> {
        Self::try_from(RawKernelSpec { beta_order: Some(beta), ..Self::build(KernelKind::VariableOrder, dim, alpha) })
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn c_lower(&self) -> f64 {
        self.c_lower
    }

    pub fn p_norm(&self) -> f64 {
        self.p_norm
    }

    pub fn lambda_diag(&self) -> &[f64] {
        &self.lambda_diag
    }

    pub fn beta_order(&self) -> f64 {
        self.beta_order
    }

    /// Same kernel family with a different order.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        let mut raw: RawKernelSpec = self.clone().into();
        raw.alpha = alpha;
        if self.kind == KernelKind::VariableOrder {
            raw.beta_order = Some(self.beta_order.max(alpha));
        }
        Self::try_from(raw)
    }

    /// True when `a(θ) ≡ 1`.
    pub fn is_radial(&self) -> bool {
        matches!(self.kind, KernelKind::PowerLaw | KernelKind::Exponential | KernelKind::VariableOrder)
    }

    /// Radial factor `ρ(r)`.
    pub fn radial(&self, r: f64) -> f64 {
        let n = self.dim as f64;
        match self.kind {
            KernelKind::Exponential => self.norm * (-r * r).exp() * r.powf(-n - self.alpha),
            KernelKind::VariableOrder => {
                if r <= 1.0 {
                    r.powf(-n - self.beta_order)
                } else {
                    r.powf(-n - self.alpha)
                }
            }
            _ => self.norm * r.powf(-n - self.alpha),
        }
    }

    /// Angular factor `a(θ)` for a unit vector `θ`.
    pub fn angular(&self, theta: &[f64]) -> f64 {
        let e = -(self.dim as f64) - self.alpha;
        match self.kind {
            KernelKind::AnisotropicPNorm => p_norm(theta, self.p_norm).powf(e),
            KernelKind::MatrixTransformed => {
                let s: f64 = theta.iter().zip(&self.lambda_diag).map(|(t, l)| (t / l) * (t / l)).sum();
                s.sqrt().powf(e)
            }
            KernelKind::DiagQuadratic => theta.iter().zip(&self.lambda_diag).map(|(t, l)| l * t * t).sum(),
            _ => 1.0,
        }
    }

    /// Radii at which `ρ` is not smooth.
    pub fn radial_breaks(&self) -> Vec<f64> {
        if self.kind == KernelKind::VariableOrder {
            vec![1.0]
        } else {
            vec![]
        }
    }

    /// `∫_R^∞ ρ(r) r^{n-1} dr`.
    pub fn radial_tail(&self, big_r: f64) -> f64 {
        let a = self.alpha;
        match self.kind {
            KernelKind::Exponential => {
                // (1/Γ(s)) ∫_R^∞ e^{-r²} r^{-1-α} dr, s = (2-α)/2, via Γ(-α/2, R²) recurrence
                let s = (2.0 - a) / 2.0;
                let x = big_r * big_r;
                if x > 700.0 {
                    return 0.0;
                }
                let q = statrs::function::gamma::gamma_ur(s, x);
                ((x.powf(-a / 2.0) * (-x).exp()) * self.norm - q) / a
            }
            KernelKind::VariableOrder => {
                let b = self.beta_order;
                if big_r >= 1.0 {
                    big_r.powf(-a) / a
                } else {
                    (big_r.powf(-b) - 1.0) / b + 1.0 / a
                }
            }
            _ => self.norm * big_r.powf(-a) / a,
        }
    }

    /// `∫_0^R ρ(r) r^{n+1} dr`.
    pub fn radial_m2(&self, big_r: f64) -> f64 {
        self.radial_moment(big_r, 0.0)
    }

    /// `∫_0^R ρ(r) r^{n+1+e} dr` for `e ≥ 0`.
    pub fn radial_moment(&self, big_r: f64, e: f64) -> f64 {
        let a = self.alpha;
        let p = 2.0 + e - a;
        match self.kind {
            KernelKind::Exponential => {
                let s = p / 2.0;
                let x = big_r * big_r;
                let full = if e == 0.0 { 1.0 } else { self.norm * statrs::function::gamma::gamma(s) };
                0.5 * full * statrs::function::gamma::gamma_lr(s, x)
            }
            KernelKind::VariableOrder => {
                let q = 2.0 + e - self.beta_order;
                if big_r <= 1.0 {
                    big_r.powf(q) / q
                } else {
                    1.0 / q + (big_r.powf(p) - 1.0) / p
                }
            }
            _ => self.norm * big_r.powf(p) / p,
        }
    }

    /// Exponent `β` with `ρ(r) r^n ~ r^{-β}` as `r → 0`.
    pub fn local_order(&self) -> f64 {
        if self.kind == KernelKind::VariableOrder {
            self.beta_order
        } else {
            self.alpha
        }
    }

    /// `∫_{S^{n-1}} a(θ) dθ`.
    pub fn angular_mass(&self) -> f64 {
        let n = self.dim;
        match self.kind {
            KernelKind::PowerLaw | KernelKind::Exponential | KernelKind::VariableOrder => sphere_measure(n),
            KernelKind::DiagQuadratic => {
                sphere_measure(n) * self.lambda_diag.iter().sum::<f64>() / n as f64
            }
            _ => sphere_integral(n, |t| (self.angular(t), 0.0), true, &[], ang_tol()).value,
        }
    }

    /// `∫_{S^{n-1}} θ_k² a(θ) dθ` for each axis `k`.
    pub fn angular_second_moments(&self) -> Vec<f64> {
        let n = self.dim;
        let nf = n as f64;
        match self.kind {
            KernelKind::PowerLaw | KernelKind::Exponential | KernelKind::VariableOrder => {
                vec![sphere_measure(n) / nf; n]
            }
            KernelKind::DiagQuadratic => {
                let tr: f64 = self.lambda_diag.iter().sum();
                self.lambda_diag
                    .iter()
                    .map(|l| sphere_measure(n) * (2.0 * l + tr) / (nf * (nf + 2.0)))
                    .collect()
            }
            _ => (0..n)
                .map(|k| sphere_integral(n, |t| (t[k] * t[k] * self.angular(t), 0.0), true, &[], ang_tol()).value)
                .collect(),
        }
    }

    /// `∫_{|z|>R} K(z) dz`.
    pub fn mass_outside_ball(&self, big_r: f64) -> f64 {
        self.radial_tail(big_r) * self.angular_mass()
    }
}

fn ang_tol() -> Tolerance {
    Tolerance::new(1e-15, 1e-12, 30)
}

pub(crate) fn p_norm(v: &[f64], p: f64) -> f64 {
    if p == 2.0 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    } else if p == 1.0 {
        v.iter().map(|x| x.abs()).sum()
    } else {
        v.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl JumpKernel for KernelSpec {
    fn dim(&self) -> usize {
        self.dim
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn density(&self, y: &[f64]) -> f64 {
        let n = self.dim as f64;
        let r = norm2(y);
        let e = -n - self.alpha;
        match self.kind {
            KernelKind::PowerLaw => self.norm * r.powf(e),
            KernelKind::Exponential => self.norm * (-r * r).exp() * r.powf(e),
            KernelKind::AnisotropicPNorm => self.norm * p_norm(y, self.p_norm).powf(e),
            KernelKind::MatrixTransformed => {
                let s: f64 = y.iter().zip(&self.lambda_diag).map(|(t, l)| (t / l) * (t / l)).sum();
                self.norm * s.sqrt().powf(e)
            }
            KernelKind::DiagQuadratic => {
                let q: f64 = y.iter().zip(&self.lambda_diag).map(|(t, l)| l * t * t).sum();
                self.norm * q * r.powf(e - 2.0)
            }
            KernelKind::VariableOrder => {
                if r <= 1.0 {
                    r.powf(-n - self.beta_order)
                } else {
                    r.powf(e)
                }
            }
        }
    }
}

/// Kernel density at `y`; `y = 0` is a domain error.
pub fn eval_kernel(spec: &KernelSpec, y: &[f64]) -> Result<f64> {
    if y.len() != spec.dim {
        return Err(Error::domain(format!("point has {} coordinates, kernel dimension is {}", y.len(), spec.dim)));
    }
    if y.iter().all(|&v| v == 0.0) {
        return Err(Error::domain("kernel is singular at y = 0"));
    }
    Ok(spec.density(y))
}

/// Counterexample fixtures that are deliberately outside the zoo.
pub mod fixtures {
    use super::{norm2, JumpKernel};

    /// `(2 + sin y₁) / |y|^{n+α}`: positive but neither even nor monotone in `|y₁|`.
    #[derive(Debug, Clone, Copy)]
    pub struct SinPerturbed {
        pub dim: usize,
        pub alpha: f64,
    }

    impl JumpKernel for SinPerturbed {
        fn dim(&self) -> usize {
            self.dim
        }
        fn alpha(&self) -> f64 {
            self.alpha
        }
        fn density(&self, y: &[f64]) -> f64 {
            (2.0 + y[0].sin()) * norm2(y).powf(-(self.dim as f64) - self.alpha)
        }
    }

    /// `|y|^{-n}`: the Lévy-Khintchine tail diverges logarithmically.
    #[derive(Debug, Clone, Copy)]
    pub struct ZeroOrder {
        pub dim: usize,
    }

    impl JumpKernel for ZeroOrder {
        fn dim(&self) -> usize {
            self.dim
        }
        fn alpha(&self) -> f64 {
            0.0
        }
        fn density(&self, y: &[f64]) -> f64 {
            norm2(y).powf(-(self.dim as f64))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    LevyKhintchine,
    K1,
    K2,
    K2prime,
    Even,
}

/// Sampled verdict on one kernel condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: Condition,
    pub holds: bool,
    /// Point (or radius) where the condition failed.
    pub witness: Option<Vec<f64>>,
    pub estimate: f64,
    /// Number of samples / refinements the verdict rests on.
    pub samples: usize,
}

const K1_SEED: u64 = 0x4b31_5eed;
const K2_SEED: u64 = 0x4b32_5eed;
const EVEN_SEED: u64 = 0x4576_5eed;

/// Large-radius floor relative to the bulk constant, below which the ratio
/// `K(y)|y|^{n+α}/(2-α)` is considered to decay.
pub const K1_DECAY_FLOOR: f64 = 1e-8;

/// Numeric Lévy-Khintchine integral `∫ |y|²/(|y|²+1) K(y) dy`.
pub fn check_levy_khintchine(kernel: &dyn JumpKernel, cfg: &QuadratureConfig) -> ConditionReport {
    let n = kernel.dim();
    let tol = Tolerance::new(1e-300, cfg.rel_tol * 1e-2, 40);
    let sphere = |r: f64| {
        if n > 3 {
            return f64::NAN;
        }
        sphere_integral(n, |t| {
            let y: Vec<f64> = t.iter().map(|v| v * r).collect();
            (kernel.density(&y), 0.0)
        }, false, &[], Tolerance::new(1e-300, 1e-10, 20))
        .value
    };
    // integrand in s = ln r
    let g = |s: f64| {
        let r = s.exp();
        r.powi(n as i32) / (1.0 + 1.0 / (r * r)) * sphere(r)
    };
    let mut samples = 0;
    // singular part: local exponent of g near 0
    let s_min = (1e-12f64).ln();
    let e = (g(s_min + std::f64::consts::LN_2).ln() - g(s_min).ln()) / std::f64::consts::LN_2;
    if !(e > 0.0) {
        return ConditionReport {
            condition: Condition::LevyKhintchine,
            holds: false,
            witness: Some(vec![1e-12]),
            estimate: f64::INFINITY,
            samples: 2,
        };
    }
    let mut total = g(s_min) / e;
    total += integrate(g, s_min, 0.0, &[], tol).value;
    samples += 1;
    let mut big_r: f64 = 1.0;
    for _ in 0..200 {
        let piece = integrate(g, big_r.ln(), (2.0 * big_r).ln(), &[], tol).value;
        total += piece;
        big_r *= 2.0;
        samples += 1;
        if piece.abs() < cfg.rel_tol * total.abs() {
            return ConditionReport {
                condition: Condition::LevyKhintchine,
                holds: true,
                witness: None,
                estimate: total,
                samples,
            };
        }
    }
    ConditionReport {
        condition: Condition::LevyKhintchine,
        holds: false,
        witness: Some(vec![big_r]),
        estimate: total,
        samples,
    }
}

fn random_direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = norm2(&v);
        if r > 1e-3 && r <= 1.0 {
            return v.iter().map(|x| x / r).collect();
        }
    }
}

/// Fit the largest `c` with `K(y) ≥ (2-α) c / |y|^{n+α}` on log-spaced
/// radii in `[1e-3, 1e3]`, and flag super-power decay at the largest radius.
pub fn check_k1(kernel: &dyn JumpKernel, sample_count: usize) -> ConditionReport {
    let n = kernel.dim();
    let alpha = kernel.alpha();
    let count = sample_count.max(10);
    let mut rng = ChaCha8Rng::seed_from_u64(K1_SEED);
    let mut pts: Vec<Vec<f64>> = (0..count)
        .map(|i| {
            let t = i as f64 / (count - 1) as f64;
            let r = 10f64.powf(-3.0 + 6.0 * t);
            random_direction(&mut rng, n).into_iter().map(|x| x * r).collect()
        })
        .collect();
    // extra directions on the largest sphere
    for _ in 0..8 {
        pts.push(random_direction(&mut rng, n).into_iter().map(|x| x * 1e3).collect());
    }
    let ratios: Vec<f64> = pts
        .par_iter()
        .map(|y| kernel.density(y) * norm2(y).powf(n as f64 + alpha) / (2.0 - alpha))
        .collect();
    let mut c_fit = f64::INFINITY;
    let mut c_bulk = f64::INFINITY;
    let mut large_min = f64::INFINITY;
    let mut large_arg = 0;
    let mut min_arg = 0;
    for (i, (&q, y)) in ratios.iter().zip(&pts).enumerate() {
        let r = norm2(y);
        if q < c_fit {
            c_fit = q;
            min_arg = i;
        }
        if r <= 1.0 {
            c_bulk = c_bulk.min(q);
        }
        if r >= 1e3 * (1.0 - 1e-12) && q < large_min {
            large_min = q;
            large_arg = i;
        }
    }
    let decays = !(large_min >= K1_DECAY_FLOOR * c_bulk);
    let holds = c_fit > 0.0 && c_fit.is_finite() && !decays;
    let witness = if holds {
        None
    } else if decays {
        Some(pts[large_arg].clone())
    } else {
        Some(pts[min_arg].clone())
    };
    ConditionReport { condition: Condition::K1, holds, witness, estimate: c_fit, samples: pts.len() }
}

/// Sampled check of strict monotonicity of `K` in `|y_axis|` at fixed other
/// coordinates, plus the sign of `∂K̄/∂(y_axis²)` by central differences.
/// `axis` is zero-based.
pub fn check_monotone_k2(kernel: &dyn JumpKernel, axis: usize, sample_count: usize) -> Result<ConditionReport> {
    let n = kernel.dim();
    if axis >= n {
        return Err(Error::domain(format!("axis {axis} out of range for dimension {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(K2_SEED ^ axis as u64);
    let cases: Vec<(Vec<f64>, f64, f64, f64, f64)> = (0..sample_count.max(1))
        .map(|_| {
            let rest: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let a: f64 = rng.random_range(1e-3..8.0);
            let b: f64 = a + rng.random_range(1e-2..1.5);
            let sa = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let sb = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            (rest, sa * a, sb * b, sa, a * a)
        })
        .collect();
    let results: Vec<(bool, f64)> = cases
        .par_iter()
        .map(|(rest, yi, ybar, sign, s)| {
            let at = |v: f64| {
                let mut y = rest.clone();
                y[axis] = v;
                kernel.density(&y)
            };
            let strict = at(*yi) > at(*ybar);
            let hs = 1e-6 * s.max(1e-2);
            let kbar = |s: f64| at(sign * s.sqrt());
            let deriv = (kbar(s + hs) - kbar((s - hs).max(0.0))) / (s + hs - (s - hs).max(0.0));
            (strict && deriv < 0.0, deriv)
        })
        .collect();
    let mut worst = f64::NEG_INFINITY;
    let mut witness = None;
    for ((ok, d), (rest, yi, ybar, _, _)) in results.iter().zip(&cases) {
        worst = worst.max(*d);
        if !ok && witness.is_none() {
            let mut w = rest.clone();
            w[axis] = *yi;
            w.push(*ybar);
            witness = Some(w);
        }
    }
    Ok(ConditionReport {
        condition: Condition::K2,
        holds: witness.is_none(),
        witness,
        estimate: worst,
        samples: cases.len(),
    })
}

/// `K(−y) = K(y)` on random points with `|y|` log-uniform in `[1e-2, 1e2]`.
pub fn check_even(kernel: &dyn JumpKernel, sample_count: usize) -> ConditionReport {
    let n = kernel.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(EVEN_SEED);
    let mut worst: f64 = 0.0;
    let mut witness = None;
    for _ in 0..sample_count.max(1) {
        let r = 10f64.powf(rng.random_range(-2.0..2.0));
        let y: Vec<f64> = random_direction(&mut rng, n).iter().map(|v| v * r).collect();
        let m: Vec<f64> = y.iter().map(|v| -v).collect();
        let (a, b) = (kernel.density(&y), kernel.density(&m));
        let rel = (a - b).abs() / a.abs().max(b.abs()).max(1e-300);
        if rel > worst {
            worst = rel;
            if rel > 1e-12 && witness.is_none() {
                witness = Some(y);
            }
        }
    }
    ConditionReport { condition: Condition::Even, holds: witness.is_none(), witness, estimate: worst, samples: sample_count.max(1) }
}

/// `K(x−y) − K(x−y^λ)` where `y^λ` reflects `y` across `{z_axis = λ}`.
pub fn reflected_kernel_difference(spec: &KernelSpec, x: &[f64], y: &[f64], lambda: f64, axis: usize) -> Result<f64> {
    if x == y {
        return Err(Error::domain("reflected kernel difference is singular at y = x"));
    }
    if axis >= spec.dim {
        return Err(Error::domain(format!("axis {axis} out of range")));
    }
    let d1: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let mut d2 = d1.clone();
    d2[axis] = x[axis] - (2.0 * lambda - y[axis]);
    if d1 == d2 {
        return Ok(0.0);
    }
    Ok(spec.density(&d1) - spec.density(&d2))
}
