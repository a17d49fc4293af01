//! Reflections across hyperplanes `T_λ = {x_axis = λ}`, the deficit
//! `w_λ(x) = u(x^λ) − u(x)`, the λ-sweep and numeric witnesses for the
//! maximum principles.
//!
//! Axes are 0-based. `Σ_λ` is the half space `{x_axis < λ}`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{fmt_f64, AnalyticField, Field, GridField, Lattice};
use crate::kernels::{JumpKernel, KernelSpec};
use crate::nonlinearity::{fit_slope, GKind};
use crate::pv_quadrature::{eval_fgk, QuadratureConfig};
use crate::quadrature::{sphere_integral, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneReflection {
    pub axis: usize,
    pub lambda: f64,
}

impl PlaneReflection {
    pub fn new(axis: usize, lambda: f64) -> Self {
        PlaneReflection { axis, lambda }
    }

    /// Strictly on the `Σ_λ` side.
    pub fn in_sigma(&self, x: &[f64]) -> bool {
        x[self.axis] < self.lambda
    }

    fn check(&self, dim: usize) -> Result<()> {
        if self.axis >= dim {
            return Err(Error::domain(format!("axis {} out of range for dimension {dim}", self.axis)));
        }
        if !self.lambda.is_finite() {
            return Err(Error::domain("plane position must be finite"));
        }
        Ok(())
    }
}

/// `x^λ`.
pub fn reflect(x: &[f64], plane: &PlaneReflection) -> Vec<f64> {
    let mut y = x.to_vec();
    y[plane.axis] = 2.0 * plane.lambda - x[plane.axis];
    y
}

/// Twice the plane position in lattice units when it is a half-grid point.
fn half_grid_index(h: f64, lambda: f64) -> Option<i64> {
    let j = 2.0 * lambda / h;
    let r = j.round();
    if (j - r).abs() <= 1e-9 * r.abs().max(1.0) {
        Some(r as i64)
    } else {
        None
    }
}

/// `w_λ = u∘reflect − u`.
///
/// Grid input needs a half-grid `λ`; the result lives on the union of the
/// lattice and its mirror image, so `w(x^λ) = −w(x)` holds exactly at nodes.
pub fn w_lambda(u: &Field, plane: &PlaneReflection) -> Result<Field> {
    plane.check(u.dim())?;
    match u {
        Field::Analytic(a) => Ok(Field::Analytic(w_lambda_analytic(a, plane))),
        Field::Grid(g) => Ok(Field::Grid(w_lambda_grid(g, plane)?)),
    }
}

fn w_lambda_analytic(u: &AnalyticField, plane: &PlaneReflection) -> AnalyticField {
    let p = *plane;
    let n = u.dim();
    let uv = u.clone();
    let mut w = AnalyticField::new(n, 2.0 * u.sup_bound(), move |x| uv.value(&reflect(x, &p)) - uv.value(x));
    if u.gradient(&vec![0.0; n]).is_some() {
        let ug = u.clone();
        w = w.with_gradient(move |x| {
            let mut gr = ug.gradient(&reflect(x, &p)).unwrap();
            gr[p.axis] = -gr[p.axis];
            let g0 = ug.gradient(x).unwrap();
            gr.iter().zip(g0).map(|(a, b)| a - b).collect()
        });
    }
    if u.has_hessian() {
        let uh = u.clone();
        w = w.with_hessian(move |x| {
            let mut hr = uh.hessian(&reflect(x, &p)).unwrap();
            for i in 0..n {
                for j in 0..n {
                    if (i == p.axis) != (j == p.axis) {
                        hr[i * n + j] = -hr[i * n + j];
                    }
                }
            }
            let h0 = uh.hessian(x).unwrap();
            hr.iter().zip(h0).map(|(a, b)| a - b).collect()
        });
    }
    w
}

fn w_lambda_grid(u: &GridField, plane: &PlaneReflection) -> Result<GridField> {
    let h = u.h();
    let j = half_grid_index(h, plane.lambda)
        .ok_or_else(|| Error::domain("grid reflection needs λ on a half-grid point"))?;
    let a = plane.axis;
    let mut offset = u.lattice.offset.clone();
    let mut shape = u.lattice.shape.clone();
    let lo = u.lattice.lo(a).min(j - u.lattice.hi(a));
    let hi = u.lattice.hi(a).max(j - u.lattice.lo(a));
    offset[a] = lo;
    shape[a] = (hi - lo + 1) as usize;
    let lattice = Lattice { h, offset, shape };
    let data = lattice
        .nodes()
        .map(|k| {
            let mut r = k.clone();
            r[a] = j - k[a];
            u.node(&r) - u.node(&k)
        })
        .collect();
    GridField::new(lattice, data, 0.0)
}

/// Lattice on which analytic fields are scanned: `[−3, 3]^n`.
pub fn default_scan_lattice(dim: usize) -> Lattice {
    let m = if dim == 1 { 192 } else { 96 };
    Lattice::centered(dim, 3.0 / m as f64, m)
}

fn sample(u: &Field, scan: Option<&Lattice>) -> GridField {
    match u {
        Field::Grid(g) => g.clone(),
        Field::Analytic(a) => {
            let lat = scan.cloned().unwrap_or_else(|| default_scan_lattice(a.dim()));
            GridField::from_fn(lat, a.exterior_value(), |x| a.value(x))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateVerdict {
    /// `w_min ≥ 0`: nothing to certify.
    NoClaim,
    /// Operator value below `−err_estimate`.
    Confirmed,
    /// `|value| ≤ err_estimate`.
    Inconclusive,
    Violated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimumCertificate {
    pub x_min: Vec<f64>,
    pub w_min: f64,
    pub lk_w_at_min: Option<f64>,
    pub err_estimate: f64,
    pub verdict: CertificateVerdict,
    pub kernel: KernelSpec,
    /// Spacing of the lattice scanned for the minimum.
    pub scan_h: f64,
}

/// Golden-section polish of a lattice minimum, one coordinate at a time,
/// staying inside `keep`.
fn polish(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64, keep: &dyn Fn(&[f64]) -> bool) -> Vec<f64> {
    let gr = (5f64.sqrt() - 1.0) / 2.0;
    let mut best = x.to_vec();
    let mut fb = f(&best);
    let mut width = h;
    for _ in 0..4 {
        for k in 0..x.len() {
            let (mut a, mut b) = (best[k] - width, best[k] + width);
            let at = |t: f64, base: &[f64]| {
                let mut y = base.to_vec();
                y[k] = t;
                y
            };
            let base = best.clone();
            let val = |t: f64| {
                let y = at(t, &base);
                if keep(&y) {
                    f(&y)
                } else {
                    f64::INFINITY
                }
            };
            let mut c = b - gr * (b - a);
            let mut d = a + gr * (b - a);
            let (mut fc, mut fd) = (val(c), val(d));
            for _ in 0..40 {
                if fc < fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - gr * (b - a);
                    fc = val(c);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + gr * (b - a);
                    fd = val(d);
                }
            }
            let t = 0.5 * (a + b);
            let ft = val(t);
            if ft < fb {
                best = at(t, &base);
                fb = ft;
            }
        }
        width *= 0.5;
    }
    best
}

/// Lattice minimum of `w` over nodes satisfying `region`; ties go to the
/// lexicographically first node.
fn lattice_min(w: &GridField, region: &dyn Fn(&[f64]) -> bool) -> Option<(Vec<f64>, f64)> {
    let mut best: Option<(Vec<f64>, f64)> = None;
    for (k, v) in w.lattice.nodes().zip(&w.data) {
        let x = w.lattice.point(&k);
        if !region(&x) {
            continue;
        }
        if best.as_ref().map_or(true, |b| *v < b.1) {
            best = Some((x, *v));
        }
    }
    best
}

fn certify(
    w: &Field,
    g: &GKind,
    spec: &KernelSpec,
    region: &dyn Fn(&[f64]) -> bool,
    scan: Option<&Lattice>,
    cfg: &QuadratureConfig,
) -> Result<MinimumCertificate> {
    let sampled = sample(w, scan);
    let scan_h = sampled.h();
    let Some((mut x, mut wmin)) = lattice_min(&sampled, region) else {
        return Err(Error::domain("scan lattice has no node in the region"));
    };
    if let Field::Analytic(a) = w {
        x = polish(&|y| a.value(y), &x, scan_h, region);
        wmin = a.value(&x);
    }
    if wmin >= 0.0 {
        return Ok(MinimumCertificate {
            x_min: x,
            w_min: wmin,
            lk_w_at_min: None,
            err_estimate: 0.0,
            verdict: CertificateVerdict::NoClaim,
            kernel: spec.clone(),
            scan_h,
        });
    }
    let e = eval_fgk(w, g, spec, &x, cfg)?;
    let verdict = if e.value < -e.err_estimate {
        CertificateVerdict::Confirmed
    } else if e.value.abs() <= e.err_estimate {
        CertificateVerdict::Inconclusive
    } else {
        CertificateVerdict::Violated
    };
    Ok(MinimumCertificate {
        x_min: x,
        w_min: wmin,
        lk_w_at_min: Some(e.value),
        err_estimate: e.err_estimate,
        verdict,
        kernel: spec.clone(),
        scan_h,
    })
}

/// Minimum of `w_λ` over `Σ_λ` and, when negative, `L_K w_λ` there.
pub fn check_antisym_max_principle(
    u: &Field,
    spec: &KernelSpec,
    plane: &PlaneReflection,
    cfg: &QuadratureConfig,
) -> Result<MinimumCertificate> {
    check_antisym_max_principle_on(u, spec, plane, cfg, None)
}

/// As [`check_antisym_max_principle`] with an explicit scan lattice for analytic input.
pub fn check_antisym_max_principle_on(
    u: &Field,
    spec: &KernelSpec,
    plane: &PlaneReflection,
    cfg: &QuadratureConfig,
    scan: Option<&Lattice>,
) -> Result<MinimumCertificate> {
    let w = w_lambda(u, plane)?;
    let p = *plane;
    certify(&w, &GKind::Identity, spec, &|x| p.in_sigma(x), scan, cfg)
}

/// Minimum of `u` over `region` and `F_{G,K} u` there; a negative value is
/// the simple maximum principle's prediction when the exterior is nonnegative.
pub fn check_simple_max_principle(
    u: &Field,
    g: &GKind,
    spec: &KernelSpec,
    region: &dyn Fn(&[f64]) -> bool,
    scan: Option<&Lattice>,
    cfg: &QuadratureConfig,
) -> Result<MinimumCertificate> {
    certify(u, g, spec, region, scan, cfg)
}

/// `∫_{z_axis > d} K(z) dz`.
pub fn half_space_mass(spec: &KernelSpec, axis: usize, d: f64) -> f64 {
    let n = spec.dim();
    if d <= 0.0 {
        return f64::INFINITY;
    }
    sphere_integral(
        n,
        |th| {
            let t = th[axis];
            if t <= 0.0 {
                (0.0, 0.0)
            } else {
                (spec.angular(th) * spec.radial_tail(d / t), 0.0)
            }
        },
        false,
        &[],
        Tolerance::new(1e-300, 1e-11, 30),
    )
    .value
}

/// `∫_{Σ_λ} K(x0 − y^λ) dy`; depends only on the distance of `x0` to the plane.
pub fn reflected_mass(spec: &KernelSpec, x0: &[f64], plane: &PlaneReflection) -> Result<f64> {
    plane.check(spec.dim())?;
    if !plane.in_sigma(x0) {
        return Err(Error::domain("point must lie strictly inside Σ_λ"));
    }
    Ok(half_space_mass(spec, plane.axis, plane.lambda - x0[plane.axis]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NarrowRegionRow {
    pub delta: f64,
    pub integral: f64,
    /// Least-squares slope of `log integral` against `log δ` over all rows.
    pub bound_slope: f64,
}

/// `∫_{Σ_λ} K(x0 − y^λ) dy` with `x0` moved to distance `δ/2` from the plane
/// along the axis (other coordinates kept), for each `δ`.
pub fn narrow_region_bound(
    spec: &KernelSpec,
    x0: &[f64],
    plane: &PlaneReflection,
    delta_list: &[f64],
) -> Result<Vec<NarrowRegionRow>> {
    plane.check(spec.dim())?;
    if x0.len() != spec.dim() {
        return Err(Error::domain("point dimension differs from kernel"));
    }
    if delta_list.len() < 2 || delta_list.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::domain("need at least two positive widths"));
    }
    let vals: Vec<(f64, f64)> = delta_list
        .iter()
        .map(|&d| {
            let mut x = x0.to_vec();
            x[plane.axis] = plane.lambda - 0.5 * d;
            reflected_mass(spec, &x, plane).map(|v| (d, v))
        })
        .collect::<Result<_>>()?;
    let slope = fit_slope(&vals.iter().map(|(d, v)| (d.ln(), v.ln())).collect::<Vec<_>>());
    Ok(vals.into_iter().map(|(delta, integral)| NarrowRegionRow { delta, integral, bound_slope: slope }).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub radius: f64,
    pub integral: f64,
    pub reference_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub rows: Vec<DecayRow>,
    /// Constant of the reference bound, fitted at the smallest radius.
    pub constant: f64,
    /// Log-log slope of the integral against `|x0|`.
    pub slope: f64,
    pub holds: bool,
}

/// `∫_{Σ_λ} K(x0 − y^λ) dy` at `x0 = −|x0| e_axis`, against `C/|x0|^α`
/// (power-type kernels) or `C e^{−16|x0|²}/|x0|^α` (exponential kernel).
pub fn decay_at_infinity_bound(spec: &KernelSpec, plane: &PlaneReflection, radius_list: &[f64]) -> Result<DecayReport> {
    plane.check(spec.dim())?;
    if radius_list.len() < 2 {
        return Err(Error::domain("need at least two radii"));
    }
    let a = spec.alpha();
    let gaussian = spec.kind() == crate::kernels::KernelKind::Exponential;
    let shape = |r: f64| if gaussian { (-16.0 * r * r).exp() * r.powf(-a) } else { r.powf(-a) };
    let mut pts = vec![];
    for &r in radius_list {
        let mut x = vec![0.0; spec.dim()];
        x[plane.axis] = -r;
        pts.push((r, reflected_mass(spec, &x, plane)?));
    }
    let (r0, i0) = pts.iter().copied().fold((f64::INFINITY, 0.0), |m, p| if p.0 < m.0 { p } else { m });
    let constant = i0 / shape(r0);
    let rows: Vec<DecayRow> =
        pts.iter().map(|&(r, v)| DecayRow { radius: r, integral: v, reference_bound: constant * shape(r) }).collect();
    let holds = rows.iter().all(|w| w.integral >= w.reference_bound * (1.0 - 1e-9));
    let slope = fit_slope(&pts.iter().map(|(r, v)| (r.ln(), v.max(1e-300).ln())).collect::<Vec<_>>());
    Ok(DecayReport { rows, constant, slope, holds })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovingPlaneReport {
    pub axis: usize,
    pub lambda_grid: Vec<f64>,
    /// Minimum of `w_λ` over lattice nodes in `Σ_λ` (0 when there are none).
    pub min_w: Vec<f64>,
    pub argmin: Vec<Option<Vec<f64>>>,
    pub lambda_o: f64,
    /// `max |w_{λ_o}|` over lattice nodes in `Σ_{λ_o}`.
    pub max_abs_w_at_lambda_o: f64,
    /// `λ_o` from the sweep run in the opposite direction, mapped back.
    pub lambda_o_reversed: f64,
    pub symmetric_verdict: bool,
    pub tolerance: f64,
    pub h: f64,
}

impl MovingPlaneReport {
    /// `lambda,min_w,argmin_x1,..`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.argmin.iter().flatten().next().map_or(1, |v| v.len());
        let cols: Vec<String> = (1..=n).map(|k| format!("argmin_x{k}")).collect();
        writeln!(w, "lambda,min_w,{}", cols.join(","))?;
        for ((l, m), a) in self.lambda_grid.iter().zip(&self.min_w).zip(&self.argmin) {
            let coords = match a {
                Some(p) => p.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(","),
                None => vec![""; n].join(","),
            };
            writeln!(w, "{},{},{}", fmt_f64(*l), fmt_f64(*m), coords)?;
        }
        Ok(())
    }
}

struct Scan {
    lambdas: Vec<f64>,
    min_w: Vec<f64>,
    argmin: Vec<Option<Vec<f64>>>,
    lambda_o: f64,
    idx_o: usize,
}

/// Left-to-right sweep over half-grid `λ` covering the lattice along `axis`.
fn scan(u: &GridField, axis: usize, tolerance: f64) -> Scan {
    let lat = &u.lattice;
    let h = u.h();
    let (lo, hi) = (lat.lo(axis), lat.hi(axis));
    let js: Vec<i64> = (2 * lo..=2 * hi).collect();
    let nodes: Vec<Vec<i64>> = lat.nodes().collect();
    let res: Vec<(f64, Option<Vec<f64>>)> = js
        .par_iter()
        .map(|&j| {
            let mut best: Option<(f64, &Vec<i64>)> = None;
            for k in &nodes {
                if 2 * k[axis] >= j {
                    continue;
                }
                let mut r = k.clone();
                r[axis] = j - k[axis];
                let w = u.node(&r) - u.node(k);
                if best.map_or(true, |b| w < b.0) {
                    best = Some((w, k));
                }
            }
            match best {
                Some((w, k)) => (w, Some(lat.point(k))),
                None => (0.0, None),
            }
        })
        .collect();
    let lambdas: Vec<f64> = js.iter().map(|&j| j as f64 * h / 2.0).collect();
    let mut idx_o = 0;
    for (i, (m, _)) in res.iter().enumerate() {
        if *m >= -tolerance {
            idx_o = i;
        } else {
            break;
        }
    }
    let (min_w, argmin) = res.into_iter().unzip();
    Scan { lambda_o: lambdas[idx_o], lambdas, min_w, argmin, idx_o }
}

fn mirrored(u: &GridField, axis: usize) -> GridField {
    let mut lat = u.lattice.clone();
    lat.offset[axis] = -u.lattice.hi(axis);
    let data = lat
        .nodes()
        .map(|k| {
            let mut r = k.clone();
            r[axis] = -k[axis];
            u.node(&r)
        })
        .collect();
    GridField { lattice: lat, data, exterior_value: u.exterior_value }
}

/// Sweep of `T_λ` along `axis`; `λ_o` is the last half-grid `λ` such that
/// `min w_μ ≥ −tolerance` for every `μ ≤ λ`. Analytic input is sampled on
/// [`default_scan_lattice`].
pub fn sweep_lambda(u: &Field, axis: usize, tolerance: f64) -> Result<MovingPlaneReport> {
    if axis >= u.dim() {
        return Err(Error::domain(format!("axis {axis} out of range for dimension {}", u.dim())));
    }
    let g = sample(u, None);
    sweep_grid(&g, axis, tolerance)
}

pub fn sweep_grid(g: &GridField, axis: usize, tolerance: f64) -> Result<MovingPlaneReport> {
    if axis >= g.dim() {
        return Err(Error::domain(format!("axis {axis} out of range for dimension {}", g.dim())));
    }
    let s = scan(g, axis, tolerance);
    let rev = scan(&mirrored(g, axis), axis, tolerance);
    let lambda_o_reversed = -rev.lambda_o;
    let h = g.h();
    let plane = PlaneReflection::new(axis, s.lambda_o);
    let w = w_lambda_grid(g, &plane)?;
    let max_abs = w
        .lattice
        .nodes()
        .zip(&w.data)
        .filter(|(k, _)| plane.in_sigma(&w.lattice.point(k)))
        .fold(0.0f64, |m, (_, v)| m.max(v.abs()));
    let symmetric_verdict = max_abs <= tolerance && (lambda_o_reversed - s.lambda_o).abs() <= h * (1.0 + 1e-9);
    let _ = s.idx_o;
    Ok(MovingPlaneReport {
        axis,
        lambda_grid: s.lambdas,
        min_w: s.min_w,
        argmin: s.argmin,
        lambda_o: s.lambda_o,
        max_abs_w_at_lambda_o: max_abs,
        lambda_o_reversed,
        symmetric_verdict,
        tolerance,
        h,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialSymmetryReport {
    pub center: Vec<f64>,
    /// `max |u_i − u_j|` over node pairs whose radii differ by at most `h/2`.
    pub max_deviation: f64,
    /// Same maximum restricted to pairs mapped onto each other by a lattice
    /// symmetry about the center (sign flips and axis permutations).
    pub exact_radius_deviation: f64,
    /// Largest per-pair allowance for the radius mismatch: the larger of the
    /// two nodes' oscillations over their lattice neighbours.
    pub interpolation_error: f64,
    /// `max (|u_i − u_j| − allowance_ij)` over compared pairs.
    pub max_excess: f64,
    pub monotone_violations: usize,
    pub pairs_compared: usize,
}

fn neighbour_offsets(n: usize) -> Vec<Vec<i64>> {
    let mut dirs = vec![];
    for code in 0..3i64.pow(n as u32) {
        let mut d = vec![0i64; n];
        let mut t = code;
        for v in d.iter_mut() {
            *v = t % 3 - 1;
            t /= 3;
        }
        if d.iter().any(|v| *v != 0) {
            dirs.push(d);
        }
    }
    dirs
}

/// Radial symmetry and monotone decrease about `center`, measured on the
/// lattice (analytic input is sampled on [`default_scan_lattice`]).
pub fn verify_radial_symmetry(u: &Field, center: &[f64], tolerance: f64) -> Result<RadialSymmetryReport> {
    if center.len() != u.dim() {
        return Err(Error::domain("center dimension differs from field"));
    }
    let g = sample(u, None);
    let lat = &g.lattice;
    let h = g.h();
    let n = g.dim();
    let dirs = neighbour_offsets(n);
    // (radius, value, oscillation, orbit key)
    let mut pts: Vec<(f64, f64, f64, Option<Vec<i64>>)> = lat
        .nodes()
        .zip(&g.data)
        .map(|(k, v)| {
            let x = lat.point(&k);
            let r = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let osc = dirs
                .iter()
                .map(|d| {
                    let q: Vec<i64> = k.iter().zip(d).map(|(a, b)| a + b).collect();
                    (g.node(&q) - v).abs()
                })
                .fold(0.0, f64::max);
            let off: Vec<f64> = x.iter().zip(center).map(|(a, b)| (a - b).abs() / h).collect();
            let key = if off.iter().all(|o| (o - o.round()).abs() < 1e-9) {
                let mut k: Vec<i64> = off.iter().map(|o| o.round() as i64).collect();
                k.sort_unstable();
                Some(k)
            } else {
                None
            };
            (r, *v, osc, key)
        })
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    // inscribed radius: beyond it, circles leave the box
    let reach = (0..n)
        .map(|d| (center[d] - lat.lo(d) as f64 * h).min(lat.hi(d) as f64 * h - center[d]))
        .fold(f64::INFINITY, f64::min);
    let mut max_dev: f64 = 0.0;
    let mut exact_dev: f64 = 0.0;
    let mut allowance: f64 = 0.0;
    let mut excess = f64::NEG_INFINITY;
    let mut pairs = 0usize;
    let mut start = 0;
    for i in 0..pts.len() {
        if pts[i].0 > reach {
            break;
        }
        while pts[start].0 < pts[i].0 - 0.5 * h {
            start += 1;
        }
        for j in start..i {
            let dr = pts[i].0 - pts[j].0;
            let dv = (pts[i].1 - pts[j].1).abs();
            pairs += 1;
            max_dev = max_dev.max(dv);
            if dr <= 1e-9 * h && pts[i].3.is_some() && pts[i].3 == pts[j].3 {
                exact_dev = exact_dev.max(dv);
                excess = excess.max(dv);
            } else {
                let a = pts[i].2.max(pts[j].2);
                allowance = allowance.max(a);
                excess = excess.max(dv - a);
            }
        }
    }

    // rays along axes and diagonals from the node nearest the center
    let c: Vec<i64> = center.iter().map(|v| (v / h).round() as i64).collect();
    let mut violations = 0;
    for d in &dirs {
        let mut prev = c.clone();
        if !lat.contains(&prev) {
            continue;
        }
        loop {
            let next: Vec<i64> = prev.iter().zip(d).map(|(a, b)| a + b).collect();
            if !lat.contains(&next) {
                break;
            }
            if g.node(&next) > g.node(&prev) + tolerance {
                violations += 1;
            }
            prev = next;
        }
    }
    Ok(RadialSymmetryReport {
        center: center.to_vec(),
        max_deviation: max_dev,
        exact_radius_deviation: exact_dev,
        interpolation_error: allowance,
        max_excess: excess.max(0.0),
        monotone_violations: violations,
        pairs_compared: pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_examples() {
        let p = PlaneReflection::new(0, 0.0);
        assert_eq!(reflect(&[0.3, 0.1], &p), vec![-0.3, 0.1]);
        let q = PlaneReflection::new(1, 0.7);
        let x = [0.2, -1.3];
        let y = reflect(&reflect(&x, &q), &q);
        assert!((y[1] - x[1]).abs() < 1e-15 && y[0] == x[0]);
        assert_eq!(reflect(&[0.5, 0.7], &q), vec![0.5, 0.7]);
    }

    #[test]
    fn w_lambda_examples() {
        let even = Field::Analytic(AnalyticField::gaussian(vec![0.0]));
        let w = w_lambda(&even, &PlaneReflection::new(0, 0.0)).unwrap();
        assert_eq!(w.value(&[0.37]), 0.0);
        let u = Field::Analytic(AnalyticField::gaussian(vec![0.3]));
        let w = w_lambda(&u, &PlaneReflection::new(0, 0.0)).unwrap();
        let expect = (-0.16f64).exp() - (-0.04f64).exp();
        assert!((w.value(&[0.1]) - expect).abs() < 1e-15);
        assert!(expect < 0.0);
    }

    #[test]
    fn grid_w_is_exactly_antisymmetric() {
        let lat = Lattice::centered(2, 0.1, 10);
        let g = GridField::from_fn(lat, 0.0, |x| (x[0] * 1.3 + x[1] * x[1]).sin());
        let plane = PlaneReflection::new(0, 0.35);
        let Field::Grid(w) = w_lambda(&Field::Grid(g), &plane).unwrap() else { panic!() };
        let j = 7;
        for k in w.lattice.nodes() {
            let mut r = k.clone();
            r[0] = j - k[0];
            assert_eq!(w.node(&r), -w.node(&k));
        }
        assert!(w_lambda(&Field::Grid(w), &PlaneReflection::new(0, 0.333)).is_err());
    }

    #[test]
    fn analytic_w_hessian_matches_differences() {
        let u = AnalyticField::gaussian(vec![0.2, -0.4]);
        let plane = PlaneReflection::new(0, -0.1);
        let Field::Analytic(w) = w_lambda(&Field::Analytic(u), &plane).unwrap() else { panic!() };
        let x = [-0.6, 0.3];
        let h = w.hessian(&x).unwrap();
        let e = 1e-4;
        let f = |a: f64, b: f64| w.value(&[x[0] + a, x[1] + b]);
        let fxy = (f(e, e) - f(e, -e) - f(-e, e) + f(-e, -e)) / (4.0 * e * e);
        let fxx = (f(e, 0.0) - 2.0 * f(0.0, 0.0) + f(-e, 0.0)) / (e * e);
        assert!((h[1] - fxy).abs() < 1e-6 && (h[0] - fxx).abs() < 1e-6);
    }

    #[test]
    fn antisym_certificate_cases() {
        let spec = KernelSpec::power_law(1, 1.0, 1.0).unwrap();
        let cfg = QuadratureConfig::default();
        let plane = PlaneReflection::new(0, 0.0);
        // bump centred in Σ_0: w has depth ≈ −1 at −0.5
        let u = Field::Analytic(AnalyticField::gaussian(vec![0.0]).dilated(0.3).translated(vec![-0.5]));
        let c = check_antisym_max_principle(&u, &spec, &plane, &cfg).unwrap();
        assert_eq!(c.verdict, CertificateVerdict::Confirmed);
        assert!((c.x_min[0] + 0.5).abs() < 1e-3);
        assert!(c.lk_w_at_min.unwrap() < 0.0);
        let even = Field::Analytic(AnalyticField::gaussian(vec![0.0]));
        let c = check_antisym_max_principle(&even, &spec, &plane, &cfg).unwrap();
        assert_eq!(c.verdict, CertificateVerdict::NoClaim);
        assert_eq!(c.w_min, 0.0);
    }

    #[test]
    fn half_space_mass_closed_form() {
        let spec = KernelSpec::power_law(1, 1.0, 1.0).unwrap();
        assert!((half_space_mass(&spec, 0, 0.25) - spec.radial_tail(0.25)).abs() < 1e-14);
        // n = 2, α = 1: ∫_{z1>d}|z|^{-3} = ∫_{-π/2}^{π/2} cos θ / d dθ = 2/d
        let s2 = KernelSpec::power_law(2, 1.0, 1.0).unwrap();
        let norm = s2.radial(1.0);
        assert!((half_space_mass(&s2, 1, 0.5) / norm - 4.0).abs() < 1e-9);
    }

    #[test]
    fn narrow_region_power_law_scaling() {
        for a in [0.5, 1.0, 1.5] {
            let spec = KernelSpec::power_law(2, a, 1.0).unwrap();
            let deltas: Vec<f64> = (3..=8).map(|k| 2f64.powi(-k)).collect();
            let rows = narrow_region_bound(&spec, &[0.0, 0.2], &PlaneReflection::new(0, 0.1), &deltas).unwrap();
            assert!((rows[0].bound_slope + a).abs() < 1e-9);
            assert!(rows[1].integral >= 2f64.powf(a) * rows[0].integral * (1.0 - 1e-12));
        }
    }

    #[test]
    fn decay_power_law_scaling() {
        let spec = KernelSpec::power_law(1, 1.0, 1.0).unwrap();
        let rep = decay_at_infinity_bound(&spec, &PlaneReflection::new(0, 0.0), &[2.0, 4.0, 8.0]).unwrap();
        assert!((rep.slope + 1.0).abs() < 1e-9);
        assert!(rep.holds);
        assert!((rep.rows[0].integral / rep.rows[1].integral - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_examples() {
        let lat = Lattice::centered(1, 1.0 / 32.0, 48);
        let even = GridField::from_fn(lat.clone(), 0.0, |x| (1.0 - x[0] * x[0]).max(0.0));
        let r = sweep_grid(&even, 0, 1e-12).unwrap();
        assert_eq!(r.lambda_o, 0.0);
        assert!(r.symmetric_verdict);
        let inc = GridField::from_fn(lat, 2.0, |x| x[0]);
        let r = sweep_grid(&inc, 0, 1e-12).unwrap();
        assert_eq!(r.lambda_o, 1.5);
        assert!(!r.symmetric_verdict);
    }

    #[test]
    fn radial_symmetry_examples() {
        let g = Field::Analytic(AnalyticField::gaussian(vec![0.0, 0.0]));
        let r = verify_radial_symmetry(&g, &[0.0, 0.0], 1e-12).unwrap();
        assert_eq!(r.monotone_violations, 0);
        assert!(r.exact_radius_deviation < 1e-15);
        assert!(r.max_excess < 1e-15 && r.max_deviation <= r.interpolation_error);
        let shifted = Field::Analytic(AnalyticField::gaussian(vec![0.5, 0.0]));
        let off = verify_radial_symmetry(&shifted, &[0.0, 0.0], 1e-12).unwrap();
        let on = verify_radial_symmetry(&shifted, &[0.5, 0.0], 1e-12).unwrap();
        assert!(off.max_deviation > 0.5 && on.max_deviation < off.max_deviation);
        assert!(off.max_excess > 0.5 && on.max_excess < 1e-15);
        let inc = Field::Analytic(AnalyticField::new(2, 10.0, |x| x[0] * x[0] + x[1] * x[1]));
        assert!(verify_radial_symmetry(&inc, &[0.0, 0.0], 1e-12).unwrap().monotone_violations > 0);
    }
}
