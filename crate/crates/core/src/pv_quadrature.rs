//! Principal-value evaluation of `L_K u(x)` and `F_{G,K} u(x)`.
//!
//! Analytic fields: a micro-ball handled by the quadratic Taylor model, an
//! adaptive shell quadrature in `s = ln r` whose angular integrand pairs `y`
//! with `2x − y`, and a far tail where `u` is replaced by its exterior value.
//!
//! Grid fields: an inner cube (half-width a whole number of cells) handled by
//! the finite-difference Taylor model, piecewise tensor Gauss-Legendre over the
//! rest of the box, and the exact kernel mass of the box complement.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{AnalyticField, Field, GridField};
use crate::kernels::{JumpKernel, KernelSpec};
use crate::nonlinearity::GKind;
use crate::quadrature::{gauss_legendre, integrate, integrate_nested, sphere_integral, Quad, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    pub eps_inner: f64,
    pub r_outer: f64,
    pub rel_tol: f64,
    pub max_depth: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { eps_inner: 1e-3, r_outer: 50.0, rel_tol: 1e-6, max_depth: 24 }
    }
}

impl QuadratureConfig {
    /// Defaults for a grid of spacing `h`: `eps_inner = max(4h, 1e-3)`.
    pub fn for_grid(h: f64) -> Self {
        QuadratureConfig { eps_inner: (4.0 * h).max(1e-3), ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_inner > 0.0) {
            return Err(Error::config("quadrature.eps_inner must be positive"));
        }
        if !(self.eps_inner < self.r_outer) {
            return Err(Error::config("quadrature.eps_inner must be below quadrature.r_outer"));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol <= 0.1) {
            return Err(Error::config("quadrature.rel_tol must lie in (0, 0.1]"));
        }
        if self.max_depth > 30 || self.max_depth == 0 {
            return Err(Error::config("quadrature.max_depth must lie in 1..=30"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub value: f64,
    pub err_estimate: f64,
    pub tail_bound: f64,
    /// Part of `value` coming from the inner ball (or cube) around `x`.
    pub inner_contribution: f64,
}

/// `2·sup·∫_{|z|>R} K(z) dz`.
pub fn tail_bound(sup_bound: f64, spec: &KernelSpec, big_r: f64) -> f64 {
    2.0 * sup_bound * spec.mass_outside_ball(big_r)
}

pub fn eval_lk(u: &Field, spec: &KernelSpec, x: &[f64], cfg: &QuadratureConfig) -> Result<EvalResult> {
    eval_fgk(u, &GKind::Identity, spec, x, cfg)
}

/// `P.V.∫ G(u(x) − u(y)) K(x − y) dy`.
pub fn eval_fgk(u: &Field, g: &GKind, spec: &KernelSpec, x: &[f64], cfg: &QuadratureConfig) -> Result<EvalResult> {
    cfg.validate()?;
    let n = spec.dim();
    if u.dim() != n || x.len() != n {
        return Err(Error::domain(format!("field, point and kernel dimensions differ ({}, {}, {n})", u.dim(), x.len())));
    }
    if n > 3 {
        return Err(Error::domain("evaluation supports dimensions 1..=3"));
    }
    if !g.is_linear() && !(1.0 + g.gamma() > spec.local_order() - 1.0 + 0.05) {
        return Err(Error::config("growth exponent of G too small for an integrable inner integrand"));
    }
    match u {
        Field::Analytic(a) => eval_analytic(a, g, spec, x, cfg),
        Field::Grid(gf) => eval_grid(gf, g, spec, x, cfg),
    }
}

/// `Δu(x)`: Hessian trace, or central differences (step `h` on grids).
pub fn laplacian(u: &Field, x: &[f64]) -> Result<f64> {
    match u {
        Field::Analytic(a) => {
            let n = a.dim();
            let h = a.hessian(x).unwrap_or_else(|| fd_hessian(&|y| a.value(y), x, 1e-4));
            Ok((0..n).map(|k| h[k * n + k]).sum())
        }
        Field::Grid(g) => {
            let h = g.h();
            if g.box_clearance(x) < h * (1.0 - 1e-12) {
                return Err(Error::domain("point closer than one cell to the grid boundary"));
            }
            let hs = fd_hessian(&|y| g.value(y), x, h);
            let n = g.dim();
            Ok((0..n).map(|k| hs[k * n + k]).sum())
        }
    }
}

fn fd_hessian(f: &dyn Fn(&[f64]) -> f64, x: &[f64], e: f64) -> Vec<f64> {
    let n = x.len();
    let f0 = f(x);
    let mut h = vec![0.0; n * n];
    let at = |d: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for &(k, s) in d {
            y[k] += s * e;
        }
        f(&y)
    };
    for k in 0..n {
        h[k * n + k] = (at(&[(k, 1.0)]) - 2.0 * f0 + at(&[(k, -1.0)])) / (e * e);
        for l in 0..k {
            let v = (at(&[(k, 1.0), (l, 1.0)]) - at(&[(k, 1.0), (l, -1.0)]) - at(&[(k, -1.0), (l, 1.0)])
                + at(&[(k, -1.0), (l, -1.0)]))
                / (4.0 * e * e);
            h[k * n + l] = v;
            h[l * n + k] = v;
        }
    }
    h
}

fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], e: f64) -> Vec<f64> {
    (0..x.len())
        .map(|k| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[k] += e;
            m[k] -= e;
            (f(&p) - f(&m)) / (2.0 * e)
        })
        .collect()
}

/// Natural magnitude of `L_K u` for a unit-scale field bounded by `sup`.
fn operator_scale(spec: &KernelSpec, sup: f64) -> f64 {
    sup.max(1e-300) * (spec.radial_m2(1.0) + spec.radial_tail(1.0)) * spec.angular_mass()
}

fn not_converged(q: f64, e: f64) -> Error {
    Error::NotConverged { estimate: q, error: e }
}

/// `∫_{r<R(θ)} ½[G(−g·z − ½zᵀHz) + G(g·z − ½zᵀHz)] K(z) dz` for a star-shaped
/// region that is symmetric under `z ↦ −z`.
fn taylor_region(
    spec: &KernelSpec,
    g: &GKind,
    grad: &[f64],
    hess: &[f64],
    radius: &dyn Fn(&[f64]) -> f64,
    tol: Tolerance,
) -> Quad {
    let n = spec.dim();
    let q = 2.0 / (2.0 - spec.local_order());
    let inner = Tolerance::new(tol.abs * 0.1, tol.rel * 0.1, tol.max_depth);
    sphere_integral(
        n,
        |th| {
            let big_r = radius(th);
            let a_th = spec.angular(th);
            let gt: f64 = grad.iter().zip(th).map(|(a, b)| a * b).sum();
            let mut ht = 0.0;
            for i in 0..n {
                for j in 0..n {
                    ht += th[i] * hess[i * n + j] * th[j];
                }
            }
            let r = integrate(
                |t: f64| {
                    if t <= 0.0 {
                        return 0.0;
                    }
                    let r = big_r * t.powf(q);
                    let dr = big_r * q * t.powf(q - 1.0);
                    let a = gt * r;
                    let b = 0.5 * ht * r * r;
                    0.5 * (g.eval(-a - b) + g.eval(a - b)) * spec.radial(r) * r.powi(n as i32 - 1) * dr
                },
                0.0,
                1.0,
                &[],
                inner,
            );
            (a_th * r.value, a_th.abs() * r.error)
        },
        true,
        &[],
        tol,
    )
}

fn eval_analytic(u: &AnalyticField, g: &GKind, spec: &KernelSpec, x: &[f64], cfg: &QuadratureConfig) -> Result<EvalResult> {
    let n = spec.dim();
    let eps = cfg.eps_inner;
    let big_r = cfg.r_outer;
    let delta = (1e-4f64).min(eps / 4.0);
    let sup = u.sup_bound();
    let abs_tol = cfg.rel_tol * 1e-2 * operator_scale(spec, sup);
    let u0 = u.value(x);
    let value = u.value_fn();
    let (hess, fd) = match u.hessian(x) {
        Some(h) => (h, false),
        None => (fd_hessian(&*value, x, 1e-4), true),
    };

    // micro ball
    let micro = if g.is_linear() {
        let m2 = spec.radial_m2(delta);
        let mom = spec.angular_second_moments();
        let v: f64 = -0.5 * (0..n).map(|k| hess[k * n + k] * mom[k]).sum::<f64>() * m2;
        let rel = if fd { 1e-5 } else { 0.0 } + delta * delta;
        Quad { value: v, error: v.abs() * rel, converged: true }
    } else {
        let grad = u.gradient(x).unwrap_or_else(|| fd_gradient(&*value, x, 1e-6));
        let q = taylor_region(spec, g, &grad, &hess, &|_| delta, Tolerance::new(abs_tol * 1e-2, cfg.rel_tol * 0.1, cfg.max_depth));
        let rel = if fd { 1e-5 } else { 0.0 } + delta;
        Quad { error: q.error + q.value.abs() * rel, ..q }
    };

    // shell δ ≤ r ≤ R in s = ln r, angular integral paired over a half sphere
    let span = (big_r / delta).ln();
    let shell_integrand = |s: f64| -> (f64, f64) {
        let r = s.exp();
        let w = spec.radial(r) * r.powi(n as i32);
        if w == 0.0 {
            return (0.0, 0.0);
        }
        let inner_tol = Tolerance::new(abs_tol / (w * span), cfg.rel_tol * 0.1, cfg.max_depth);
        let mut yp = vec![0.0; n];
        let mut ym = vec![0.0; n];
        let q = sphere_integral(
            n,
            |th| {
                for k in 0..n {
                    yp[k] = x[k] + r * th[k];
                    ym[k] = x[k] - r * th[k];
                }
                let p = 0.5 * (g.eval(u0 - value(&yp)) + g.eval(u0 - value(&ym)));
                (p * spec.angular(th), 0.0)
            },
            true,
            &[],
            inner_tol,
        );
        (w * q.value, w * q.error)
    };
    let mut breaks: Vec<f64> = vec![0.0];
    breaks.extend(spec.radial_breaks().iter().map(|b| b.ln()));
    let tol = Tolerance::new(abs_tol, cfg.rel_tol, cfg.max_depth);
    let (ln_d, ln_e, ln_r) = (delta.ln(), eps.max(delta).min(big_r).ln(), big_r.ln());
    let near = integrate_nested(shell_integrand, ln_d, ln_e, &breaks, tol);
    let far = integrate_nested(shell_integrand, ln_e, ln_r, &breaks, tol);

    let mass = spec.mass_outside_ball(big_r);
    let tail_value = g.eval(u0 - u.exterior_value()) * mass;
    let tb = g.eval(2.0 * sup) * mass;

    let total = micro + near + far;
    let value = total.value + tail_value;
    let err = total.error + tb;
    if !total.converged {
        return Err(not_converged(value, err));
    }
    Ok(EvalResult { value, err_estimate: err, tail_bound: tb, inner_contribution: micro.value + near.value })
}

fn gl_rules() -> &'static [(Vec<f64>, Vec<f64>); 2] {
    static RULES: OnceLock<[(Vec<f64>, Vec<f64>); 2]> = OnceLock::new();
    RULES.get_or_init(|| [gauss_legendre(5), gauss_legendre(8)])
}

/// `max |θ_i|`, the reciprocal of the ray length to the unit cube surface.
fn cube_norm(th: &[f64]) -> f64 {
    th.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn sphere_tol() -> Tolerance {
    Tolerance::new(1e-300, 1e-12, 30)
}

/// `∫_{[-c,c]^n} z_k² K(z) dz` for each axis.
pub fn cube_second_moments(spec: &KernelSpec, c: f64) -> Vec<f64> {
    cube_moments(spec, c, 0.0)
}

/// `∫_{[-c,c]^n} |z_k|^{2+e} K(z) dz` for each axis.
pub fn cube_moments(spec: &KernelSpec, c: f64, e: f64) -> Vec<f64> {
    let n = spec.dim();
    (0..n)
        .map(|k| {
            sphere_integral(
                n,
                |th| {
                    let rc = c / cube_norm(th);
                    (th[k].abs().powf(2.0 + e) * spec.angular(th) * spec.radial_moment(rc, e), 0.0)
                },
                true,
                &[],
                sphere_tol(),
            )
            .value
        })
        .collect()
}

/// `∫_{R^n \ [-c,c]^n} K(z) dz`.
pub fn mass_outside_cube(spec: &KernelSpec, c: f64) -> f64 {
    let n = spec.dim();
    sphere_integral(n, |th| (spec.angular(th) * spec.radial_tail(c / cube_norm(th)), 0.0), true, &[], sphere_tol()).value
}

/// `∫_{R^n \ box} K(x − y) dy` for a point `x` inside the box `[lo, hi]`.
pub fn mass_outside_box(spec: &KernelSpec, x: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let n = spec.dim();
    let exit = |th: &[f64]| {
        let mut t = f64::INFINITY;
        for d in 0..n {
            if th[d] > 0.0 {
                t = t.min((hi[d] - x[d]) / th[d]);
            } else if th[d] < 0.0 {
                t = t.min((lo[d] - x[d]) / th[d]);
            }
        }
        t
    };
    let mut breaks = vec![];
    if n == 2 {
        for cx in [lo[0], hi[0]] {
            for cy in [lo[1], hi[1]] {
                breaks.push((cy - x[1]).atan2(cx - x[0]));
            }
        }
    }
    sphere_integral(n, |th| (spec.angular(th) * spec.radial_tail(exit(th)), 0.0), false, &breaks, sphere_tol()).value
}

/// Half-width, in cells, of the inner cube used on grids.
pub fn inner_cells(h: f64, cfg: &QuadratureConfig) -> usize {
    ((cfg.eps_inner / h).round() as usize).max(1)
}

struct Outer {
    value: f64,
    error: f64,
    kernel_mass: f64,
}

fn eval_grid(u: &GridField, g: &GKind, spec: &KernelSpec, x: &[f64], cfg: &QuadratureConfig) -> Result<EvalResult> {
    let n = spec.dim();
    let h = u.h();
    let m = inner_cells(h, cfg);
    let c = m as f64 * h;
    if u.box_clearance(x) < c * (1.0 - 1e-12) {
        return Err(Error::domain(format!(
            "point {x:?} is closer than the inner cube half-width {c} to the grid boundary"
        )));
    }
    let u0 = u.value(x);
    let f = |y: &[f64]| u.value(y);
    let hess = fd_hessian(&f, x, h);
    let sup = u.sup_bound();
    let abs_tol = cfg.rel_tol * 1e-2 * operator_scale(spec, sup);

    let inner = if g.is_linear() {
        let mom = cube_second_moments(spec, c);
        -0.5 * (0..n).map(|k| hess[k * n + k] * mom[k]).sum::<f64>()
    } else {
        let grad = fd_gradient(&f, x, h);
        let q = taylor_region(
            spec,
            g,
            &grad,
            &hess,
            &|th| c / cube_norm(th),
            Tolerance::new(abs_tol * 1e-2, cfg.rel_tol * 0.1, cfg.max_depth),
        );
        q.value
    };

    let outer = grid_outer(u, g, spec, x, c, u0, cfg.rel_tol * 0.1, abs_tol);
    let lo = u.lattice.box_lo();
    let hi = u.lattice.box_hi();
    let ext_mass = mass_outside_box(spec, x, &lo, &hi);
    let exterior = g.eval(u0 - u.exterior_value) * ext_mass;

    // multilinear interpolation error, and the Taylor model error in the cube
    let gmax = g.derivative(2.0 * sup).max(g.derivative(0.0));
    let d2 = u.max_second_difference();
    let interp = h * h / 8.0 * d2 * n as f64 * gmax * outer.kernel_mass;
    let value = inner + outer.value + exterior;
    let err = outer.error + interp + inner.abs() * 1e-3;
    Ok(EvalResult { value, err_estimate: err, tail_bound: 0.0, inner_contribution: inner })
}

#[allow(clippy::too_many_arguments)]
fn grid_outer(u: &GridField, g: &GKind, spec: &KernelSpec, x: &[f64], c: f64, u0: f64, rel: f64, abs_tol: f64) -> Outer {
    let n = spec.dim();
    let h = u.h();
    let lat = &u.lattice;
    // per-axis breakpoints: grid lines and cube faces
    let axes: Vec<Vec<f64>> = (0..n)
        .map(|d| {
            let mut b: Vec<f64> = (lat.lo(d)..=lat.hi(d)).map(|k| k as f64 * h).collect();
            for f in [x[d] - c, x[d] + c] {
                if f > b[0] && f < *b.last().unwrap() && !b.contains(&f) {
                    b.push(f);
                }
            }
            b.sort_by(|a, b| a.partial_cmp(b).unwrap());
            b
        })
        .collect();
    let counts: Vec<usize> = axes.iter().map(|a| a.len() - 1).collect();
    let total: usize = counts.iter().product();
    let piece_abs = abs_tol / total.max(1) as f64;
    let mut out = Outer { value: 0.0, error: 0.0, kernel_mass: 0.0 };
    let mut idx = vec![0usize; n];
    let mut plo = vec![0.0; n];
    let mut phi = vec![0.0; n];
    for _ in 0..total {
        let mut inside = true;
        for d in 0..n {
            plo[d] = axes[d][idx[d]];
            phi[d] = axes[d][idx[d] + 1];
            let mid = 0.5 * (plo[d] + phi[d]);
            if (mid - x[d]).abs() >= c {
                inside = false;
            }
        }
        if !inside {
            let (v, e, km) = piece(u, g, spec, x, u0, &plo, &phi, rel, piece_abs, 0);
            out.value += v;
            out.error += e;
            out.kernel_mass += km;
        }
        for d in (0..n).rev() {
            idx[d] += 1;
            if idx[d] < counts[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    out
}

/// Tensor Gauss-Legendre (8 vs 5 points per axis) over one box piece, split
/// adaptively. Returns (value, error, kernel mass).
#[allow(clippy::too_many_arguments)]
fn piece(
    u: &GridField,
    g: &GKind,
    spec: &KernelSpec,
    x: &[f64],
    u0: f64,
    lo: &[f64],
    hi: &[f64],
    rel: f64,
    abs_tol: f64,
    depth: usize,
) -> (f64, f64, f64) {
    let n = lo.len();
    let rules = gl_rules();
    let mut res = [0.0; 2];
    let mut mass = 0.0;
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    for (ri, (nodes, weights)) in rules.iter().enumerate() {
        let p = nodes.len();
        let mut idx = vec![0usize; n];
        let vol: f64 = (0..n).map(|d| 0.5 * (hi[d] - lo[d])).product();
        let mut acc = 0.0;
        let mut macc = 0.0;
        for _ in 0..p.pow(n as u32) {
            let mut w = vol;
            for d in 0..n {
                y[d] = 0.5 * (lo[d] + hi[d]) + 0.5 * (hi[d] - lo[d]) * nodes[idx[d]];
                z[d] = x[d] - y[d];
                w *= weights[idx[d]];
            }
            let k = spec.density(&z);
            acc += w * g.eval(u0 - u.value(&y)) * k;
            macc += w * k;
            for d in (0..n).rev() {
                idx[d] += 1;
                if idx[d] < p {
                    break;
                }
                idx[d] = 0;
            }
        }
        res[ri] = acc;
        if ri == 1 {
            mass = macc;
        }
    }
    let err = (res[1] - res[0]).abs();
    if err <= (rel * res[1].abs()).max(abs_tol) || depth >= 6 {
        return (res[1], err, mass);
    }
    let mut v = 0.0;
    let mut e = 0.0;
    let mut km = 0.0;
    let mut sl = vec![0.0; n];
    let mut sh = vec![0.0; n];
    for corner in 0..(1usize << n) {
        for d in 0..n {
            let mid = 0.5 * (lo[d] + hi[d]);
            if (corner >> d) & 1 == 0 {
                sl[d] = lo[d];
                sh[d] = mid;
            } else {
                sl[d] = mid;
                sh[d] = hi[d];
            }
        }
        let (a, b, cm) = piece(u, g, spec, x, u0, &sl, &sh, rel, abs_tol / (1 << n) as f64, depth + 1);
        v += a;
        e += b;
        km += cm;
    }
    (v, e, km)
}
