//! Brute-force references shared by the integration tests.
#![allow(dead_code)]

use nonlocal_core::field::AnalyticField;
use nonlocal_core::kernels::{eval_kernel, JumpKernel, KernelSpec};

/// Non-adaptive trapezoid for `∫ G(u(x) − u(x+z)) K(z) dz` in polar
/// coordinates, with `diff(x, z) = u(x) − u(x+z)` supplied in a cancellation-free
/// form, `r = t^{q₀}/(1−t)^{q₁}` on `t ∈ (0, 1)`, uniform angles, three
/// levels `nr, 2nr, 4nr` Richardson-extrapolated. Returns the value and an
/// error bar of ten times the spread between the last levels.
pub fn brute_force(
    diff: &dyn Fn(&[f64], &[f64]) -> f64,
    g: &dyn Fn(f64) -> f64,
    spec: &KernelSpec,
    x: &[f64],
    nr: usize,
    ntheta: usize,
) -> (f64, f64) {
    let n = spec.dim();
    assert!(n == 1 || n == 2, "oracle covers n = 1, 2");
    let a: f64 = spec.alpha();
    let q0 = (4.0 / (2.0 - a)).max(4.0);
    let q1 = (4.0 / a).max(4.0);
    let dirs: Vec<(Vec<f64>, f64)> = if n == 1 {
        vec![(vec![1.0], 2.0)]
    } else {
        (0..ntheta)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / ntheta as f64;
                (vec![th.cos(), th.sin()], 2.0 * std::f64::consts::PI / ntheta as f64)
            })
            .collect()
    };
    let integrand = |t: f64| -> f64 {
        if t <= 0.0 || t >= 1.0 {
            return 0.0;
        }
        let r = t.powf(q0) * (1.0 - t).powf(-q1);
        let jac = r * (q0 / t + q1 / (1.0 - t));
        if !(r > 0.0 && r.is_finite() && jac.is_finite()) {
            return 0.0;
        }
        let mut acc = 0.0;
        for (th, w) in &dirs {
            let z: Vec<f64> = th.iter().map(|c| r * c).collect();
            let zm: Vec<f64> = z.iter().map(|v| -v).collect();
            let k = eval_kernel(spec, &z).unwrap();
            acc += w * k * 0.5 * (g(diff(x, &z)) + g(diff(x, &zm)));
        }
        let v = acc * r.powi(n as i32 - 1) * jac;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let trap = |m: usize| -> f64 {
        let h = 1.0 / m as f64;
        (1..m).map(|i| integrand(i as f64 * h)).sum::<f64>() * h
    };
    let t: Vec<f64> = [nr, 2 * nr, 4 * nr].iter().map(|&m| trap(m)).collect();
    let r1 = (4.0 * t[1] - t[0]) / 3.0;
    let r2 = (4.0 * t[2] - t[1]) / 3.0;
    let r = (16.0 * r2 - r1) / 15.0;
    let spread = (t[2] - r).abs().max((r2 - r).abs());
    (r, 10.0 * spread + 1e-12 * r.abs())
}

/// `Σ a_i e^{−|y−c_i|²/w_i²}`.
#[derive(Debug, Clone)]
pub struct GaussianSum {
    pub terms: Vec<(f64, Vec<f64>, f64)>,
}

impl GaussianSum {
    pub fn value(&self, y: &[f64]) -> f64 {
        self.terms.iter().map(|(a, c, w)| a * (-dist2(y, c) / (w * w)).exp()).sum()
    }

    /// `u(x) − u(x+z)` through `expm1`.
    pub fn diff(&self, x: &[f64], z: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(a, c, w)| {
                let d: Vec<f64> = x.iter().zip(c).map(|(p, q)| p - q).collect();
                let cross: f64 = d.iter().zip(z).map(|(p, q)| 2.0 * p * q).sum::<f64>() + dist2(z, &vec![0.0; z.len()]);
                -a * (-dist2(x, c) / (w * w)).exp() * (-cross / (w * w)).exp_m1()
            })
            .sum()
    }

    /// The same sum built from the library's Gaussian (exact derivatives).
    pub fn field(&self) -> AnalyticField {
        let n = self.terms[0].1.len();
        let term = |(a, c, w): &(f64, Vec<f64>, f64)| {
            let g = AnalyticField::gaussian(vec![0.0; n]).dilated(*w).translated(c.clone());
            AnalyticField::linear_combination(*a, &g, 0.0, &g).unwrap()
        };
        let mut acc = term(&self.terms[0]);
        for t in &self.terms[1..] {
            acc = AnalyticField::linear_combination(1.0, &acc, 1.0, &term(t)).unwrap();
        }
        acc
    }
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

pub fn brute_force_lk(u: &GaussianSum, spec: &KernelSpec, x: &[f64]) -> (f64, f64) {
    brute_force(&|x, z| u.diff(x, z), &|t| t, spec, x, 1000, 256)
}

/// Second central differences, step `e`.
pub fn fd_laplacian(u: &dyn Fn(&[f64]) -> f64, x: &[f64], e: f64) -> f64 {
    let u0 = u(x);
    (0..x.len())
        .map(|k| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[k] += e;
            m[k] -= e;
            (u(&p) - 2.0 * u0 + u(&m)) / (e * e)
        })
        .sum()
}

/// `∫_{z₁>d} |z|^{−n−α} dz` in closed form.
pub fn power_half_space(n: usize, alpha: f64, d: f64) -> f64 {
    use statrs::function::gamma::gamma;
    let nf = n as f64;
    d.powf(-alpha) / alpha * std::f64::consts::PI.powf((nf - 1.0) / 2.0) * gamma((1.0 + alpha) / 2.0)
        / gamma((nf + alpha) / 2.0)
}
