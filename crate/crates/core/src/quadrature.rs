//! One-dimensional adaptive Gauss-Kronrod quadrature, Gauss-Legendre rules and
//! integrals over the unit sphere `S^{n-1}` for `n <= 3`.

use std::f64::consts::PI;

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077600311680770,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

// 10-point Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

const MAX_SEGMENTS: usize = 8192;

/// Result of a quadrature: value, absolute error estimate and whether the
/// requested tolerance was met before hitting the depth cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

impl Quad {
    pub fn zero() -> Self {
        Quad { value: 0.0, error: 0.0, converged: true }
    }

    pub fn scale(self, s: f64) -> Self {
        Quad { value: self.value * s, error: self.error * s.abs(), converged: self.converged }
    }
}

impl std::ops::Add for Quad {
    type Output = Quad;
    fn add(self, o: Quad) -> Quad {
        Quad {
            value: self.value + o.value,
            error: self.error + o.error,
            converged: self.converged && o.converged,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_depth: usize,
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64, max_depth: usize) -> Self {
        Tolerance { abs, rel, max_depth }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    depth: usize,
}

/// Kronrod-21 rule on `[a,b]` for an integrand that also reports its own
/// (inner) absolute error. Returns (value, error incl. inner error).
fn gk21<F: FnMut(f64) -> (f64, f64)>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let hl = 0.5 * (b - a);
    let (fc, ec) = f(c);
    let mut resk = fc * WGK[10];
    let mut resg = 0.0;
    let mut inner = ec * WGK[10];
    for j in 0..10 {
        let dx = hl * XGK[j];
        let (f1, e1) = f(c - dx);
        let (f2, e2) = f(c + dx);
        resk += WGK[j] * (f1 + f2);
        inner += WGK[j] * (e1 + e2);
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let value = resk * hl;
    let err = ((resk - resg) * hl).abs() + inner * hl.abs();
    (value, err)
}

/// Globally adaptive integration of `f` over `[a,b]` split at `breaks`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, breaks: &[f64], tol: Tolerance) -> Quad {
    integrate_nested(|x| (f(x), 0.0), a, b, breaks, tol)
}

/// Like [`integrate`], for integrands that are themselves quadratures; the
/// second component is the inner absolute error and is folded into the result.
pub fn integrate_nested<F: FnMut(f64) -> (f64, f64)>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Quad {
    if a == b {
        return Quad::zero();
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut pts = vec![lo];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&p| p > lo && p < hi).collect();
    inner.sort_by(|x, y| x.partial_cmp(y).unwrap());
    inner.dedup();
    pts.extend(inner);
    pts.push(hi);

    let mut active: Vec<Segment> = Vec::new();
    let mut frozen_value = 0.0;
    let mut frozen_error = 0.0;
    let mut hit_cap = false;
    let mut frozen_count = 0usize;
    for w in pts.windows(2) {
        let (v, e) = gk21(&mut f, w[0], w[1]);
        active.push(Segment { a: w[0], b: w[1], value: v, error: e, depth: 0 });
    }
    loop {
        let total: f64 = frozen_value + active.iter().map(|s| s.value).sum::<f64>();
        let err: f64 = frozen_error + active.iter().map(|s| s.error).sum::<f64>();
        if err <= tol.target(total) {
            return Quad { value: sign * total, error: err, converged: !hit_cap };
        }
        // the frozen part alone already misses the target: give up
        if active.is_empty()
            || active.len() + frozen_count + 1 > MAX_SEGMENTS
            || frozen_error > tol.target(total)
            || err.is_nan()
        {
            return Quad { value: sign * total, error: err, converged: false };
        }
        let (idx, _) = active
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .unwrap();
        let seg = active.swap_remove(idx);
        if seg.depth >= tol.max_depth || (seg.b - seg.a) <= 4.0 * f64::EPSILON * seg.a.abs().max(seg.b.abs()) {
            hit_cap = true;
            frozen_count += 1;
            frozen_value += seg.value;
            frozen_error += seg.error;
            continue;
        }
        let m = 0.5 * (seg.a + seg.b);
        let (v1, e1) = gk21(&mut f, seg.a, m);
        let (v2, e2) = gk21(&mut f, m, seg.b);
        active.push(Segment { a: seg.a, b: m, value: v1, error: e1, depth: seg.depth + 1 });
        active.push(Segment { a: m, b: seg.b, value: v2, error: e2, depth: seg.depth + 1 });
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for k in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p2) / (k + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Tensor Gauss-Legendre on the box `[lo, hi]` (8 against 5 points per
/// axis), bisected in every direction until the two rules agree.
pub fn box_integral(f: &dyn Fn(&[f64]) -> f64, lo: &[f64], hi: &[f64], rel: f64, abs: f64, max_depth: usize) -> Quad {
    static RULES: std::sync::OnceLock<[(Vec<f64>, Vec<f64>); 2]> = std::sync::OnceLock::new();
    let rules = RULES.get_or_init(|| [gauss_legendre(5), gauss_legendre(8)]);
    let n = lo.len();
    let mut res = [0.0; 2];
    let mut y = vec![0.0; n];
    for (ri, (nodes, weights)) in rules.iter().enumerate() {
        let p = nodes.len();
        let vol: f64 = (0..n).map(|d| 0.5 * (hi[d] - lo[d])).product();
        let mut idx = vec![0usize; n];
        let mut acc = 0.0;
        for _ in 0..p.pow(n as u32) {
            let mut w = vol;
            for d in 0..n {
                y[d] = 0.5 * (lo[d] + hi[d]) + 0.5 * (hi[d] - lo[d]) * nodes[idx[d]];
                w *= weights[idx[d]];
            }
            acc += w * f(&y);
            for d in (0..n).rev() {
                idx[d] += 1;
                if idx[d] < p {
                    break;
                }
                idx[d] = 0;
            }
        }
        res[ri] = acc;
    }
    let err = (res[1] - res[0]).abs();
    if err <= (rel * res[1].abs()).max(abs) {
        return Quad { value: res[1], error: err, converged: true };
    }
    if max_depth == 0 {
        return Quad { value: res[1], error: err, converged: false };
    }
    let mut total = Quad::zero();
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
        total = total + box_integral(f, &sl, &sh, rel, abs / (1 << n) as f64, max_depth - 1);
    }
    total
}

/// Surface measure of the unit sphere `S^{n-1}` in `R^n`.
pub fn sphere_measure(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / statrs::function::gamma::gamma(n as f64 / 2.0)
}

/// Volume of the unit ball in `R^n`.
pub fn ball_volume(n: usize) -> f64 {
    sphere_measure(n) / n as f64
}

/// Integral of `f` over `S^{n-1}`, `n` in `1..=3`.
///
/// With `even = true` the integrand is assumed to satisfy `f(-θ) = f(θ)`
/// and only a half sphere is sampled. `breaks` are extra polar angles (n = 2)
/// at which the integrand has kinks.
pub fn sphere_integral<F: FnMut(&[f64]) -> (f64, f64)>(
    n: usize,
    mut f: F,
    even: bool,
    breaks: &[f64],
    tol: Tolerance,
) -> Quad {
    match n {
        1 => {
            let (a, ea) = f(&[1.0]);
            if even {
                Quad { value: 2.0 * a, error: 2.0 * ea, converged: true }
            } else {
                let (b, eb) = f(&[-1.0]);
                Quad { value: a + b, error: ea + eb, converged: true }
            }
        }
        2 => {
            let top = if even { PI } else { 2.0 * PI };
            let mut br: Vec<f64> = (1..8).map(|k| k as f64 * PI / 4.0).collect();
            for &b in breaks {
                let t = b.rem_euclid(2.0 * PI);
                br.push(if even { t.rem_euclid(PI) } else { t });
            }
            let q = integrate_nested(|t| f(&[t.cos(), t.sin()]), 0.0, top, &br, tol);
            if even {
                q.scale(2.0)
            } else {
                q
            }
        }
        3 => {
            let zlo = if even { 0.0 } else { -1.0 };
            let inner_tol = Tolerance::new(tol.abs * 0.1, tol.rel * 0.1, tol.max_depth);
            let zbreaks = [-(0.5f64.sqrt()), 0.0, 0.5f64.sqrt()];
            let phibreaks: Vec<f64> = (1..8).map(|k| k as f64 * PI / 4.0).collect();
            let q = integrate_nested(
                |z| {
                    let s = (1.0 - z * z).max(0.0).sqrt();
                    let r = integrate_nested(
                        |phi| f(&[s * phi.cos(), s * phi.sin(), z]),
                        0.0,
                        2.0 * PI,
                        &phibreaks,
                        inner_tol,
                    );
                    (r.value, r.error)
                },
                zlo,
                1.0,
                &zbreaks,
                tol,
            );
            if even {
                q.scale(2.0)
            } else {
                q
            }
        }
        _ => panic!("sphere_integral supports dimensions 1..=3, got {n}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerance {
        Tolerance::new(1e-14, 1e-12, 30)
    }

    #[test]
    fn polynomial_is_exact() {
        let q = integrate(|x| x.powi(5) - 3.0 * x * x + 1.0, -1.0, 2.0, &[], tol());
        let exact = (64.0 - 1.0) / 6.0 - (8.0 + 1.0) + 3.0;
        assert!((q.value - exact).abs() < 1e-13);
        assert!(q.converged);
    }

    #[test]
    fn endpoint_singularity() {
        let q = integrate(|x: f64| x.powf(-0.5), 0.0, 1.0, &[], Tolerance::new(1e-7, 1e-7, 60));
        assert!(q.converged);
        assert!((q.value - 2.0).abs() <= q.error, "{q:?}");
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let a = integrate(|x: f64| x.exp(), 0.0, 1.0, &[], tol());
        let b = integrate(|x: f64| x.exp(), 1.0, 0.0, &[], tol());
        assert_eq!(a.value, -b.value);
    }

    #[test]
    fn depth_cap_reports_non_convergence() {
        let q = integrate(|x: f64| if x < 0.3 { 0.0 } else { 1.0 }, 0.0, 1.0, &[], Tolerance::new(1e-15, 0.0, 3));
        assert!(!q.converged);
    }

    #[test]
    fn box_integral_smooth_and_peaked() {
        let q = box_integral(&|y| y[0] * y[0] * y[1].exp(), &[0.0, -1.0], &[2.0, 1.0], 1e-13, 0.0, 6);
        let exact = 8.0 / 3.0 * (1f64.exp() - (-1f64).exp());
        assert!((q.value - exact).abs() < 1e-12);
        let q = box_integral(&|y| 1.0 / (y[0] * y[0] + y[1] * y[1]).powf(1.5), &[1.0, 0.0], &[2.0, 1.0], 1e-12, 0.0, 8);
        let r = integrate(|x| integrate(|y| 1.0 / (x * x + y * y).powf(1.5), 0.0, 1.0, &[], tol()).value, 1.0, 2.0, &[], tol());
        assert!((q.value - r.value).abs() < 1e-11);
    }

    #[test]
    fn gauss_legendre_weights() {
        for n in [1, 2, 5, 8, 17] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
            if n >= 2 {
                assert!((m2 - 2.0 / 3.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn sphere_measures() {
        assert!((sphere_measure(1) - 2.0).abs() < 1e-14);
        assert!((sphere_measure(2) - 2.0 * PI).abs() < 1e-13);
        assert!((sphere_measure(3) - 4.0 * PI).abs() < 1e-12);
        for n in 1..=3 {
            let q = sphere_integral(n, |_| (1.0, 0.0), false, &[], tol());
            assert!((q.value - sphere_measure(n)).abs() < 1e-11);
            let h = sphere_integral(n, |_| (1.0, 0.0), true, &[], tol());
            assert!((h.value - sphere_measure(n)).abs() < 1e-11);
        }
        // second moment of a coordinate: σ/n
        let q = sphere_integral(3, |t| (t[0] * t[0], 0.0), true, &[], tol());
        assert!((q.value - 4.0 * PI / 3.0).abs() < 1e-10);
    }
}
