//! `α → 2⁻` limits of the exponential, anisotropic and diagonal matrix
//! families, extrapolated in `t = 2 − α`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{fmt_f64, AnalyticField, Field};
use crate::kernels::{p_norm, KernelSpec};
use crate::pv_quadrature::{eval_lk, laplacian, QuadratureConfig};
use crate::quadrature::{ball_volume, sphere_integral, sphere_measure, Tolerance};

/// `1/Γ((2−α)/2)` for `α ∈ [0, 2)`.
pub fn gamma_prefactor(alpha: f64) -> Result<f64> {
    if !(0.0..2.0).contains(&alpha) {
        return Err(Error::domain("alpha must lie in [0,2)"));
    }
    Ok(1.0 / statrs::function::gamma::gamma((2.0 - alpha) / 2.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum AlphaFamily {
    /// Exponential kernel with prefactor `4n/ω_n`.
    ExponentialScaled,
    /// `(2−α)/‖y‖_p^{n+α}` with prefactor 2.
    Anisotropic { p: f64 },
    /// `(2−α)/(det Λ |Λ⁻¹y|^{n+α})` with prefactor `2n/σ_{n−1}`.
    MatrixDiag { lambda: Vec<f64> },
}

/// `ω_n` as fixed by [`calibrate_omega_n`]: the surface measure of `S^{n−1}`.
pub fn omega_n(n: usize) -> f64 {
    sphere_measure(n)
}

impl AlphaFamily {
    pub fn kernel(&self, n: usize, alpha: f64) -> Result<KernelSpec> {
        match self {
            AlphaFamily::ExponentialScaled => KernelSpec::exponential(n, alpha),
            AlphaFamily::Anisotropic { p } => KernelSpec::anisotropic(n, alpha, *p),
            AlphaFamily::MatrixDiag { lambda } => {
                if lambda.len() != n {
                    return Err(Error::config("lambda must have one entry per dimension"));
                }
                KernelSpec::matrix_transformed(alpha, lambda.clone())
            }
        }
    }

    pub fn prefactor(&self, n: usize) -> f64 {
        match self {
            AlphaFamily::ExponentialScaled => 4.0 * n as f64 / omega_n(n),
            AlphaFamily::Anisotropic { .. } => 2.0,
            AlphaFamily::MatrixDiag { .. } => 2.0 * n as f64 / sphere_measure(n),
        }
    }

    /// The limit operator applied to `u` at `x`.
    pub fn reference(&self, u: &AnalyticField, x: &[f64]) -> Result<f64> {
        let n = u.dim();
        match self {
            AlphaFamily::ExponentialScaled => Ok(-laplacian(&Field::Analytic(u.clone()), x)?),
            AlphaFamily::Anisotropic { p } => {
                Ok(-anisotropic_constant(n, *p, 1e-10)? * laplacian(&Field::Analytic(u.clone()), x)?)
            }
            AlphaFamily::MatrixDiag { lambda } => {
                let h = hessian_of(u, x)?;
                Ok(-(0..n).map(|k| lambda[k] * lambda[k] * h[k * n + k]).sum::<f64>())
            }
        }
    }
}

fn hessian_of(u: &AnalyticField, x: &[f64]) -> Result<Vec<f64>> {
    u.hessian(x).ok_or_else(|| Error::domain("field needs a Hessian"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSweepReport {
    pub family: AlphaFamily,
    pub alpha_list: Vec<f64>,
    pub values: Vec<f64>,
    pub err_estimates: Vec<f64>,
    pub eps_inner: Vec<f64>,
    pub linear_limit: f64,
    pub quadratic_limit: Option<f64>,
    pub extrapolated_limit: f64,
    /// Linear and quadratic fits differ by more than 1% (relative).
    pub fits_disagree: bool,
    pub reference: f64,
    /// Relative error, or absolute when the reference vanishes.
    pub rel_error: f64,
}

impl AlphaSweepReport {
    /// `alpha,value,err_estimate,running_limit`; the last column extrapolates
    /// through the rows so far.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "alpha,value,err_estimate,running_limit")?;
        let ts: Vec<f64> = self.alpha_list.iter().map(|a| 2.0 - a).collect();
        for i in 0..self.values.len() {
            let run = neville_at_zero(&ts[..=i], &self.values[..=i]);
            writeln!(
                w,
                "{},{},{},{}",
                fmt_f64(self.alpha_list[i]),
                fmt_f64(self.values[i]),
                fmt_f64(self.err_estimates[i]),
                fmt_f64(run)
            )?;
        }
        Ok(())
    }
}

/// Value at 0 of the interpolating polynomial through `(t_i, v_i)`.
pub fn neville_at_zero(t: &[f64], v: &[f64]) -> f64 {
    let mut p = v.to_vec();
    let n = p.len();
    for k in 1..n {
        for i in 0..n - k {
            p[i] = (t[i + k] * p[i] - t[i] * p[i + 1]) / (t[i + k] - t[i]);
        }
    }
    p[0]
}

/// Least-squares polynomial of the given degree in `t`, evaluated at 0.
pub fn poly_fit_at_zero(t: &[f64], v: &[f64], degree: usize) -> f64 {
    let m = degree + 1;
    let mut a = vec![vec![0.0; m + 1]; m];
    for (ti, vi) in t.iter().zip(v) {
        let pw: Vec<f64> = (0..m).map(|k| ti.powi(k as i32)).collect();
        for r in 0..m {
            for c in 0..m {
                a[r][c] += pw[r] * pw[c];
            }
            a[r][m] += pw[r] * vi;
        }
    }
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        for r in 0..m {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=m {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    a[0][m] / a[0][0]
}

pub const DEFAULT_ALPHAS: [f64; 3] = [1.9, 1.95, 1.99];

fn eval_with_refinement(u: &Field, spec: &KernelSpec, x: &[f64], cfg: &QuadratureConfig) -> Result<(f64, f64, f64)> {
    let mut c = *cfg;
    let mut last = None;
    for _ in 0..4 {
        match eval_lk(u, spec, x, &c) {
            Ok(e) => return Ok((e.value, e.err_estimate, c.eps_inner)),
            Err(e @ Error::NotConverged { .. }) => {
                last = Some(e);
                c.eps_inner *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap())
}

/// The family's operator at each `α`, scaled by its prefactor, and the
/// extrapolation to `α = 2`. `eps_inner` is scaled by `(2−α)^{1/2}`.
pub fn sweep_alpha(
    u: &AnalyticField,
    family: &AlphaFamily,
    x: &[f64],
    alpha_list: &[f64],
    cfg: &QuadratureConfig,
) -> Result<AlphaSweepReport> {
    sweep_alpha_scaled(u, family, family.prefactor(u.dim()), x, alpha_list, cfg)
}

fn sweep_alpha_scaled(
    u: &AnalyticField,
    family: &AlphaFamily,
    prefactor: f64,
    x: &[f64],
    alpha_list: &[f64],
    cfg: &QuadratureConfig,
) -> Result<AlphaSweepReport> {
    if alpha_list.len() < 2 {
        return Err(Error::config("alpha_list needs at least two values"));
    }
    if alpha_list.windows(2).any(|w| !(w[0] < w[1])) || alpha_list.iter().any(|a| !(*a > 0.0 && *a < 2.0)) {
        return Err(Error::config("alpha_list must be strictly increasing inside (0,2)"));
    }
    if !u.has_hessian() {
        return Err(Error::domain("field needs a Hessian"));
    }
    let n = u.dim();
    let field = Field::Analytic(u.clone());
    let rows: Vec<(f64, f64, f64)> = alpha_list
        .par_iter()
        .map(|&a| {
            let spec = family.kernel(n, a)?;
            let c = QuadratureConfig { eps_inner: cfg.eps_inner * (2.0 - a).sqrt(), ..*cfg };
            let (v, e, eps) = eval_with_refinement(&field, &spec, x, &c)?;
            Ok((prefactor * v, prefactor * e, eps))
        })
        .collect::<Result<_>>()?;
    let values: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let ts: Vec<f64> = alpha_list.iter().map(|a| 2.0 - a).collect();
    let linear_limit = poly_fit_at_zero(&ts, &values, 1);
    let quadratic_limit = (values.len() >= 3).then(|| poly_fit_at_zero(&ts, &values, 2));
    let extrapolated_limit = quadratic_limit.unwrap_or(linear_limit);
    let scale = extrapolated_limit.abs().max(1e-12);
    let fits_disagree = quadratic_limit.is_some_and(|q| (q - linear_limit).abs() > 0.01 * scale);
    let reference = family.reference(u, x)?;
    let rel_error = if reference != 0.0 {
        (extrapolated_limit - reference).abs() / reference.abs()
    } else {
        extrapolated_limit.abs()
    };
    Ok(AlphaSweepReport {
        family: family.clone(),
        alpha_list: alpha_list.to_vec(),
        values,
        err_estimates: rows.iter().map(|r| r.1).collect(),
        eps_inner: rows.iter().map(|r| r.2).collect(),
        linear_limit,
        quadratic_limit,
        extrapolated_limit,
        fits_disagree,
        reference,
        rel_error,
    })
}

/// `∫_{S^{n−1}} ‖θ‖_p^{−n−α} dθ`, which equals `(2−α)∫_{B₁}|y|²/‖y‖_p^{n+α} dy`.
fn anisotropic_angular(n: usize, p: f64, alpha: f64, tol: f64) -> Result<f64> {
    let q = sphere_integral(n, |t| (p_norm(t, p).powf(-(n as f64) - alpha), 0.0), true, &[], Tolerance::new(tol * 1e-3, tol, 30));
    if !q.converged {
        return Err(Error::NotConverged { estimate: q.value, error: q.error });
    }
    Ok(q.value)
}

/// `C_{n,p} = (1/n) lim_{α→2⁻} (2−α)∫_{B₁}|y|²/‖y‖_p^{n+α} dy`, extrapolated
/// from `α ∈ {1.9, 1.95, 1.99}`.
pub fn anisotropic_constant(n: usize, p: f64, quad_tol: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::config("p must be at least 1"));
    }
    if !(1..=3).contains(&n) {
        return Err(Error::domain("dimension must lie in 1..=3"));
    }
    let vals: Vec<f64> =
        DEFAULT_ALPHAS.iter().map(|&a| anisotropic_angular(n, p, a, quad_tol)).collect::<Result<_>>()?;
    let ts: Vec<f64> = DEFAULT_ALPHAS.iter().map(|a| 2.0 - a).collect();
    Ok(neville_at_zero(&ts, &vals) / n as f64)
}

/// Bounds on `C_{n,p}` from `c|y| ≤ ‖y‖_p ≤ c′|y|`: `[c′^{−n−2}σ/n, c^{−n−2}σ/n]`.
pub fn norm_equivalence_bracket(n: usize, p: f64) -> (f64, f64) {
    let nf = n as f64;
    let k = nf.powf(1.0 / p - 0.5);
    let (c, cp) = if p >= 2.0 { (k, 1.0) } else { (1.0, k) };
    let s = sphere_measure(n) / nf;
    (cp.powf(-nf - 2.0) * s, c.powf(-nf - 2.0) * s)
}

/// Exponential kernel contribution from `B_ε(x)` (prefactor included)
/// divided by `−Δu(x)`.
pub fn inner_ball_ratio(u: &AnalyticField, x: &[f64], eps: f64, alpha: f64, cfg: &QuadratureConfig) -> Result<(f64, f64)> {
    let n = u.dim();
    let spec = KernelSpec::exponential(n, alpha)?;
    let c = QuadratureConfig { eps_inner: eps, ..*cfg };
    let e = eval_lk(&Field::Analytic(u.clone()), &spec, x, &c)?;
    let lap = laplacian(&Field::Analytic(u.clone()), x)?;
    let pre = AlphaFamily::ExponentialScaled.prefactor(n);
    Ok((pre * e.inner_contribution / -lap, pre * e.err_estimate / lap.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaConvention {
    SphereMeasure,
    BallVolume,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaCalibration {
    pub n: usize,
    pub sphere_limit: f64,
    pub ball_limit: f64,
    pub target: f64,
    pub convention: OmegaConvention,
    pub omega: f64,
}

/// Decides the `ω_n` in `4n/ω_n` by which convention sends the sweep for
/// `e^{−|x|²}` at 0 to `2n`. Results are cached in `cache` (JSON keyed by `n`).
pub fn calibrate_omega_n(n: usize, cfg: &QuadratureConfig, cache: Option<&Path>) -> Result<OmegaCalibration> {
    if !(1..=3).contains(&n) {
        return Err(Error::domain("calibration supports n in 1..=3"));
    }
    let mut stored: BTreeMap<String, OmegaCalibration> = match cache {
        Some(p) if p.exists() => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        _ => BTreeMap::new(),
    };
    if let Some(c) = stored.get(&n.to_string()) {
        return Ok(c.clone());
    }
    let u = AnalyticField::gaussian(vec![0.0; n]);
    let x = vec![0.0; n];
    let fam = AlphaFamily::ExponentialScaled;
    let nf = n as f64;
    let base = sweep_alpha_scaled(&u, &fam, 1.0, &x, &DEFAULT_ALPHAS, cfg)?.extrapolated_limit;
    let target = 2.0 * nf;
    let sphere_limit = 4.0 * nf / sphere_measure(n) * base;
    let ball_limit = 4.0 * nf / ball_volume(n) * base;
    let es = (sphere_limit - target).abs() / target;
    let eb = (ball_limit - target).abs() / target;
    if es.min(eb) > 0.05 {
        return Err(Error::NotConverged { estimate: sphere_limit, error: es.min(eb) });
    }
    let (convention, omega) =
        if es <= eb { (OmegaConvention::SphereMeasure, sphere_measure(n)) } else { (OmegaConvention::BallVolume, ball_volume(n)) };
    let cal = OmegaCalibration { n, sphere_limit, ball_limit, target, convention, omega };
    if let Some(p) = cache {
        stored.insert(n.to_string(), cal.clone());
        std::fs::write(p, serde_json::to_string_pretty(&stored)?)?;
    }
    Ok(cal)
}
