//! Acceptance suite: one line per criterion, nonzero exit when any fails.
//! Run with `cargo test --release -p nonlocal-core --test acceptance`.

mod common;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use common::{brute_force, brute_force_lk, dist2, fd_laplacian, power_half_space, GaussianSum};
use nonlocal_core::alpha_limit::{
    anisotropic_constant, calibrate_omega_n, inner_ball_ratio, norm_equivalence_bracket, omega_n, sweep_alpha,
    AlphaFamily, OmegaConvention, DEFAULT_ALPHAS,
};
use nonlocal_core::field::{AnalyticField, Field};
use nonlocal_core::kernels::{JumpKernel, KernelSpec};
use nonlocal_core::moving_planes::{
    check_antisym_max_principle, decay_at_infinity_bound, narrow_region_bound, reflect, sweep_lambda,
    verify_radial_symmetry, CertificateVerdict, PlaneReflection,
};
use nonlocal_core::nonlinearity::{check_g2, check_mvt_property, FKind, GKind, NonlinearitySpec};
use nonlocal_core::pv_quadrature::{eval_fgk, eval_lk, QuadratureConfig};
use nonlocal_core::solver::{solve_dirichlet, solve_dirichlet_nonlinear, DomainSpec, Solution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// pinned tolerances
const C1_REL: f64 = 0.02;
const C1_SECONDS: f64 = 60.0;
const C2_CLOSED_FORM_REL: f64 = 0.01;
const C2_REL: f64 = 0.03;
const C4_SECONDS: f64 = 300.0;
const SLOPE_REL: f64 = 0.10;
const SOLVE_TOL: f64 = 1e-8;
const RESIDUAL_MAX: f64 = 1e-6;
const IDENTITY_PATH_TOL: f64 = 1e-10;
const C10_MIN_RATIO: f64 = 0.2;
const C11_FACTOR: f64 = 3.0;
const C13_REL: f64 = 0.05;

struct Outcome {
    pass: bool,
    detail: String,
    notes: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into(), notes: vec![] }
    }
}

fn cfg() -> QuadratureConfig {
    QuadratureConfig::default()
}

fn gaussian(n: usize) -> AnalyticField {
    AnalyticField::gaussian(vec![0.0; n])
}

fn c1_exponential_limit() -> Outcome {
    let mut pass = true;
    let mut parts = vec![];
    for n in [1, 2] {
        let t = Instant::now();
        let cal = calibrate_omega_n(n, &cfg(), None).unwrap();
        let calibrated = cal.convention == OmegaConvention::SphereMeasure && (cal.omega - omega_n(n)).abs() < 1e-12;
        let u = gaussian(n);
        let r = sweep_alpha(&u, &AlphaFamily::ExponentialScaled, &vec![0.0; n], &DEFAULT_ALPHAS, &cfg()).unwrap();
        let reference = -fd_laplacian(&|y| u.value(y), &vec![0.0; n], 1e-4);
        let err = (r.extrapolated_limit - reference).abs() / reference;
        let secs = t.elapsed().as_secs_f64();
        let ok = calibrated && err <= C1_REL && secs <= C1_SECONDS && (reference - 2.0 * n as f64).abs() < 1e-6;
        pass &= ok;
        parts.push(format!("n={n} limit {:.6} vs {:.6} err {:.1e} {:.1}s", r.extrapolated_limit, reference, err, secs));
    }
    Outcome::new(pass, parts.join("; "))
}

/// `(1/2)∫_{S¹} ‖θ‖_p^{−4} dθ` by the periodic trapezoid rule.
fn c2_reference(p: f64) -> f64 {
    let m = 200_000;
    let s: f64 = (0..m)
        .map(|i| {
            let t = 2.0 * PI * (i as f64 + 0.5) / m as f64;
            (t.cos().abs().powf(p) + t.sin().abs().powf(p)).powf(-4.0 / p)
        })
        .sum();
    0.5 * s * 2.0 * PI / m as f64
}

fn c2_anisotropic_limit() -> Outcome {
    let c22 = anisotropic_constant(2, 2.0, 1e-10).unwrap();
    let closed = (c22 - PI).abs() / PI;
    let c24 = anisotropic_constant(2, 4.0, 1e-10).unwrap();
    let oracle24 = c2_reference(4.0);
    let (lo, hi) = norm_equivalence_bracket(2, 4.0);
    let inside = lo <= c24 && c24 <= hi;
    let u = gaussian(2);
    let r = sweep_alpha(&u, &AlphaFamily::Anisotropic { p: 4.0 }, &[0.0, 0.0], &DEFAULT_ALPHAS, &cfg()).unwrap();
    let reference = -oracle24 * fd_laplacian(&|y| u.value(y), &[0.0, 0.0], 1e-4);
    let err = (r.extrapolated_limit - reference).abs() / reference;
    Outcome::new(
        closed <= C2_CLOSED_FORM_REL && err <= C2_REL && inside && (c24 - oracle24).abs() < 1e-5 * oracle24,
        format!(
            "C22 {:.8} (π err {:.1e}); C24 {:.6} in [{:.4}, {:.4}]; limit {:.5} vs {:.5} err {:.1e}",
            c22, closed, c24, lo, hi, r.extrapolated_limit, reference, err
        ),
    )
}

fn c3_inner_ball() -> Outcome {
    let mut pass = true;
    let mut parts = vec![];
    for n in [1, 2] {
        for eps in [0.25, 0.5] {
            let (ratio, err) = inner_ball_ratio(&gaussian(n), &vec![0.0; n], eps, 1.99, &cfg()).unwrap();
            let lo = (-eps * eps as f64).exp();
            let ok = ratio >= lo - err && ratio <= 1.0 + err;
            pass &= ok;
            parts.push(format!("n={n} ε={eps}: {ratio:.5} in [{lo:.5}, 1]"));
        }
    }
    Outcome::new(pass, parts.join("; "))
}

fn c4_kernels() -> Vec<KernelSpec> {
    vec![
        KernelSpec::power_law(2, 0.5, 1.0).unwrap(),
        KernelSpec::power_law(2, 1.0, 1.0).unwrap(),
        KernelSpec::power_law(2, 1.5, 1.0).unwrap(),
        KernelSpec::exponential(2, 1.0).unwrap(),
        KernelSpec::anisotropic(2, 1.0, 4.0).unwrap(),
    ]
}

fn c4_antisymmetric_certificates() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let kernels = c4_kernels();
    let mut confirmed = 0;
    let mut total = 0;
    let mut worst_margin = f64::INFINITY;
    let mut oracle_gap: f64 = 0.0;
    let mut notes = vec![];
    for i in 0..20 {
        let spec = &kernels[i % kernels.len()];
        let c: Vec<f64> = (0..2).map(|_| rng.random_range(-0.5..0.5)).collect();
        let width = rng.random_range(0.3..0.8);
        let axis = rng.random_range(0..2);
        let plane = PlaneReflection::new(axis, c[axis] + rng.random_range(0.15..0.6));
        let sum = GaussianSum { terms: vec![(1.0, c.clone(), width)] };
        let u = Field::Analytic(sum.field());
        let cert = check_antisym_max_principle(&u, spec, &plane, &cfg()).unwrap();
        total += 1;
        if cert.w_min >= 0.0 {
            notes.push(format!("fixture {i}: no negative minimum"));
            continue;
        }
        let lk = cert.lk_w_at_min.unwrap();
        if cert.verdict == CertificateVerdict::Confirmed && lk < -cert.err_estimate {
            confirmed += 1;
        }
        worst_margin = worst_margin.min((-lk - cert.err_estimate) / lk.abs());
        if i < 5 {
            // w(x) − w(x+z) = [u(x^λ) − u(x^λ + Rz)] − [u(x) − u(x+z)]
            let p = plane;
            let diff = |x: &[f64], z: &[f64]| {
                let xr = reflect(x, &p);
                let mut zr = z.to_vec();
                zr[p.axis] = -zr[p.axis];
                sum.diff(&xr, &zr) - sum.diff(x, z)
            };
            let (o, oe) = brute_force(&diff, &|t| t, spec, &cert.x_min, 400, 256);
            oracle_gap = oracle_gap.max(((lk - o).abs() - oe).max(0.0) / cert.err_estimate.max(1e-300));
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let mut o = Outcome::new(
        confirmed == total && secs <= C4_SECONDS && oracle_gap <= 3.0,
        format!(
            "{confirmed}/{total} confirmed, worst relative margin {worst_margin:.3}, oracle gap {oracle_gap:.2}·err, {secs:.1}s"
        ),
    );
    o.notes = notes;
    o
}

fn slope_within(slope: f64, alpha: f64) -> bool {
    (slope + alpha).abs() <= SLOPE_REL * alpha
}

fn c5_narrow_region() -> Outcome {
    let deltas: Vec<f64> = (3..=8).map(|k| 2f64.powi(-k)).collect();
    let plane = PlaneReflection::new(0, 0.0);
    let mut pass = true;
    let mut parts = vec![];
    let mut notes = vec![];
    for a in [0.5, 1.0, 1.5] {
        let k = KernelSpec::power_law(2, a, 1.0).unwrap();
        let rows = narrow_region_bound(&k, &[0.0, 0.0], &plane, &deltas).unwrap();
        let oracle_ok = rows.iter().all(|r| {
            let exact = (2.0 - a) * power_half_space(2, a, r.delta / 2.0);
            (r.integral - exact).abs() <= 1e-8 * exact
        });
        let s = rows[0].bound_slope;
        pass &= slope_within(s, a) && oracle_ok;
        parts.push(format!("power α={a}: {s:.4}"));
    }
    for a in [0.5, 1.0, 1.5] {
        let k = KernelSpec::exponential(2, a).unwrap();
        let s = narrow_region_bound(&k, &[0.0, 0.0], &plane, &deltas).unwrap()[0].bound_slope;
        if a == 1.0 {
            pass &= slope_within(s, a);
            parts.push(format!("exponential α=1: {s:.4}"));
        } else {
            let one_sided = s <= -(1.0 - SLOPE_REL) * a;
            pass &= one_sided;
            notes.push(format!(
                "exponential α={a}: slope {s:.4}, two-sided {} (informational), one-sided bound {}",
                if slope_within(s, a) { "within" } else { "outside" },
                if one_sided { "holds" } else { "fails" }
            ));
        }
    }
    let mut o = Outcome::new(pass, parts.join("; "));
    o.notes = notes;
    o
}

fn c6_decay() -> Outcome {
    let radii = [2.0, 3.0, 4.0, 6.0, 8.0];
    let plane = PlaneReflection::new(0, 0.0);
    let mut pass = true;
    let mut parts = vec![];
    for a in [0.5, 1.0, 1.5] {
        let rep = decay_at_infinity_bound(&KernelSpec::power_law(2, a, 1.0).unwrap(), &plane, &radii).unwrap();
        pass &= slope_within(rep.slope, a) && rep.holds;
        parts.push(format!("power α={a}: {:.4}", rep.slope));
    }
    let rep = decay_at_infinity_bound(&KernelSpec::exponential(2, 1.0).unwrap(), &plane, &radii).unwrap();
    pass &= rep.holds;
    parts.push(format!("exponential above e^(-16r²)/r^α bound: {}", rep.holds));
    Outcome::new(pass, parts.join("; "))
}

fn symmetry_checks(sol: &Solution, label: &str) -> (bool, String) {
    let n = sol.field.dim();
    let field = Field::Grid(sol.field.clone());
    let tol = 5.0 * SOLVE_TOL;
    let radial = verify_radial_symmetry(&field, &vec![0.0; n], tol).unwrap();
    let mut ok = radial.max_excess <= tol && radial.monotone_violations == 0;
    let mut planes = vec![];
    for axis in 0..n {
        let r = sweep_lambda(&field, axis, tol).unwrap();
        ok &= r.lambda_o.abs() <= r.h * (1.0 + 1e-9);
        planes.push(format!("{:.3}", r.lambda_o));
    }
    ok &= sol.nodal.iter().all(|v| *v >= 0.0);
    (
        ok,
        format!(
            "{label}: residual {:.1e}, radial dev {:.2e} (allowance {:.2e}, excess {:.1e}), λ_o [{}]",
            sol.report.final_residual_sup,
            radial.max_deviation,
            radial.interpolation_error,
            radial.max_excess,
            planes.join(", ")
        ),
    )
}

fn c7_linear_ball() -> Outcome {
    let k1 = KernelSpec::power_law(1, 1.0, 1.0).unwrap();
    let k2 = KernelSpec::power_law(2, 1.0, 1.0).unwrap();
    let f = FKind::Constant { a: 1.0 };
    let mut pass = true;
    let mut parts = vec![];
    for (k, dom) in [(&k1, DomainSpec::unit_ball(1, 129).unwrap()), (&k2, DomainSpec::unit_ball(2, 65).unwrap())] {
        let sol = solve_dirichlet(k, &f, &dom, &cfg(), SOLVE_TOL).unwrap();
        let conv = sol.report.converged && sol.report.final_residual_sup <= RESIDUAL_MAX;
        let (ok, d) = symmetry_checks(&sol, &format!("n={}", dom.dim()));
        pass &= conv && ok;
        parts.push(d);
    }
    Outcome::new(pass, parts.join("; "))
}

fn c8_nonlinear_ball() -> Outcome {
    let k = KernelSpec::power_law(1, 1.0, 1.0).unwrap();
    let f = FKind::AffinePlusPower { a: 0.5, b: 1.0, p: 2.0, clip_lo: 0.0, clip_hi: 2.0 };
    let ns = NonlinearitySpec::new(GKind::PowerG { gamma: 1.0 }, f.clone()).unwrap();
    let g2 = check_g2(&ns, 1e-3).unwrap().holds;
    let increasing = (1..200).all(|i| f.derivative(i as f64 * 0.01) > 0.0);
    let dom = DomainSpec::unit_ball(1, 129).unwrap();
    let mut notes = vec![];
    let main = match solve_dirichlet_nonlinear(&ns, &k, &dom, &cfg(), SOLVE_TOL) {
        Ok(sol) => {
            let conv = sol.report.converged && sol.report.final_residual_sup <= RESIDUAL_MAX;
            let (ok, d) = symmetry_checks(&sol, &format!("G=|t|t, {} iterations", sol.report.iterations));
            Some((conv && ok && g2 && increasing, d))
        }
        Err(e) => {
            notes.push(format!("G=|t|t fixture did not converge: {e}"));
            None
        }
    };
    // Identity through the nonlinear path must reproduce the linear solve
    let lin = solve_dirichlet(&k, &FKind::Constant { a: 1.0 }, &dom, &cfg(), SOLVE_TOL).unwrap();
    let id = NonlinearitySpec::new(GKind::Identity, FKind::Constant { a: 1.0 }).unwrap();
    let via = solve_dirichlet_nonlinear(&id, &k, &dom, &cfg(), SOLVE_TOL).unwrap();
    let gap = lin.nodal.iter().zip(&via.nodal).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let fallback = gap <= IDENTITY_PATH_TOL;
    notes.push(format!("identity path vs linear solve: {gap:.1e}"));
    let mut o = match main {
        Some((ok, d)) => Outcome::new(ok, format!("{d}; (G2) {g2}, f' > 0 {increasing}")),
        None => Outcome::new(fallback, format!("fallback: identity path gap {gap:.1e}")),
    };
    o.notes = notes;
    o
}

/// `−a(1 − |x−c|²/ρ²)₊³ + b|x−c|²e^{−|x−c|²}`: strict minimum at `c`, nonnegative
/// outside `B_ρ(c)`.
fn c9_field(n: usize, rng: &mut ChaCha8Rng) -> (AnalyticField, Vec<f64>) {
    let a = rng.random_range(0.5..2.0);
    let rho = rng.random_range(0.5..1.5);
    let b = rng.random_range(0.0..1.0);
    let c: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
    let cc = c.clone();
    let u = AnalyticField::new(n, a + b, move |x| {
        let s = dist2(x, &cc);
        let bump = (1.0 - s / (rho * rho)).max(0.0);
        -a * bump * bump * bump + b * s * (-s).exp()
    });
    (u, c)
}

fn c9_kernel(n: usize, rng: &mut ChaCha8Rng) -> KernelSpec {
    let a = rng.random_range(0.3..1.7);
    match (n, rng.random_range(0..4)) {
        (_, 0) => KernelSpec::power_law(n, a, 1.0).unwrap(),
        (_, 1) => KernelSpec::exponential(n, a).unwrap(),
        (2, 2) => KernelSpec::anisotropic(2, a, 4.0).unwrap(),
        (2, 3) => KernelSpec::diag_quadratic(a, vec![1.0, 2.0]).unwrap(),
        _ => KernelSpec::power_law(n, a, 2.0).unwrap(),
    }
}

fn c9_simple_max_principle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let gs = [GKind::Identity, GKind::PowerG { gamma: 0.5 }, GKind::PowerG { gamma: 1.0 }, GKind::PowerG { gamma: 2.0 }];
    let (mut neg, mut strict, mut total) = (0, 0, 0);
    let mut worst: f64 = f64::NEG_INFINITY;
    for i in 0..20 {
        let n = 1 + i % 2;
        let (u, c) = c9_field(n, &mut rng);
        let spec = c9_kernel(n, &mut rng);
        let field = Field::Analytic(u);
        for g in &gs {
            let e = eval_fgk(&field, g, &spec, &c, &cfg()).unwrap();
            total += 1;
            neg += usize::from(e.value < 0.0);
            strict += usize::from(e.value < -e.err_estimate);
            worst = worst.max(e.value);
        }
    }
    Outcome::new(
        neg == total,
        format!("{neg}/{total} negative ({strict} beyond err_estimate), largest value {worst:.3e}"),
    )
}

/// `|ξ|` with `(γ+1)|ξ|^γ = slope`, by bisection.
fn mvt_bisect(gamma: f64, slope: f64, hi: f64) -> f64 {
    let (mut a, mut b) = (0.0, hi);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (gamma + 1.0) * m.powf(gamma) < slope {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn c10_mean_value() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut pass = true;
    let mut parts = vec![];
    for gamma in [0.5, 1.0, 2.0] {
        let g = GKind::PowerG { gamma };
        let spec = NonlinearitySpec::new(g, FKind::Constant { a: 0.0 }).unwrap();
        let mut min_ratio = f64::INFINITY;
        let mut gap: f64 = 0.0;
        let mut used = 0;
        while used < 10_000 {
            let t1 = rng.random_range(-5.0..5.0);
            let t2 = rng.random_range(-5.0..5.0);
            if t1 == t2 {
                continue;
            }
            used += 1;
            let m = check_mvt_property(&spec, t1, t2).unwrap().unwrap();
            let top = f64::max(t1.abs(), t2.abs());
            let slope = (g.eval(t2) - g.eval(t1)) / (t2 - t1);
            let xi = mvt_bisect(gamma, slope, top);
            gap = gap.max((xi - m.xi).abs() / top);
            min_ratio = min_ratio.min(m.c0_ratio);
        }
        pass &= min_ratio > C10_MIN_RATIO && gap < 1e-9;
        parts.push(format!("γ={gamma}: min ratio {min_ratio:.4}"));
    }
    Outcome::new(pass, parts.join("; "))
}

fn c11_kernel(n: usize, rng: &mut ChaCha8Rng) -> KernelSpec {
    let a = rng.random_range(0.3..1.7);
    match (n, rng.random_range(0..4)) {
        (_, 0) | (1, 2) => KernelSpec::power_law(n, a, 1.0).unwrap(),
        (_, 1) | (1, 3) => KernelSpec::exponential(n, a).unwrap(),
        (2, 2) => KernelSpec::anisotropic(2, a, if rng.random_bool(0.5) { 4.0 } else { 2.0 }).unwrap(),
        _ => KernelSpec::diag_quadratic(a, vec![1.0, 2.0]).unwrap(),
    }
}

fn c11_oracle_honesty() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let mut max_gap: f64 = 0.0;
    let mut fails = 0;
    let mut notes = vec![];
    for i in 0..20 {
        let n = 1 + i % 2;
        let spec = c11_kernel(n, &mut rng);
        let terms = (0..rng.random_range(1..=2))
            .map(|_| {
                (
                    rng.random_range(-1.0..1.5),
                    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>(),
                    rng.random_range(0.4..1.5),
                )
            })
            .collect();
        let u = GaussianSum { terms };
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let e = eval_lk(&Field::Analytic(u.field()), &spec, &x, &cfg()).unwrap();
        let (o, oe) = brute_force_lk(&u, &spec, &x);
        let gap = (e.value - o).abs();
        let ratio = (gap - oe).max(0.0) / e.err_estimate;
        worst = worst.max(ratio);
        max_gap = max_gap.max(gap);
        if gap > C11_FACTOR * e.err_estimate + oe {
            fails += 1;
            notes.push(format!("case {i} {:?} α={:.3}: value {} oracle {} err {:.2e}", spec.kind(), spec.alpha(), e.value, o, e.err_estimate));
        }
    }
    let mut out = Outcome::new(fails == 0, format!("20 cases, {fails} outside 3·err, max |value−oracle| {max_gap:.1e}, worst excess/err {worst:.3}"));
    out.notes = notes;
    out
}

fn c12_whole_space() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut pass = true;
    let mut worst: f64 = 0.0;
    let mut h = 0.0;
    for _ in 0..5 {
        let x0: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c = x0.clone();
        let u = AnalyticField::new(2, 1.0, move |x| {
            let d2 = dist2(x, &c);
            let s = (1.0 - d2 / 4.0).max(0.0);
            (-d2).exp() * s * s
        });
        let field = Field::Analytic(u);
        for axis in 0..2 {
            let r = sweep_lambda(&field, axis, 1e-10).unwrap();
            h = r.h;
            let off = (r.lambda_o - x0[axis]).abs();
            worst = worst.max(off);
            pass &= off <= r.h * (1.0 + 1e-9);
        }
    }
    Outcome::new(pass, format!("5 centers, worst |λ_o − x0| {worst:.4} (cell {h:.4})"))
}

fn c13_matrix_diag() -> Outcome {
    let u = gaussian(2);
    let lambda = [1.0, 2.0];
    let r = sweep_alpha(&u, &AlphaFamily::MatrixDiag { lambda: lambda.to_vec() }, &[0.0, 0.0], &DEFAULT_ALPHAS, &cfg())
        .unwrap();
    let e = 1e-4;
    let second = |k: usize| {
        let mut p = vec![0.0; 2];
        let mut m = vec![0.0; 2];
        p[k] = e;
        m[k] = -e;
        (u.value(&p) - 2.0 * u.value(&[0.0, 0.0]) + u.value(&m)) / (e * e)
    };
    let reference = -(lambda[0] * lambda[0] * second(0) + lambda[1] * lambda[1] * second(1));
    let err = (r.extrapolated_limit - reference).abs() / reference;
    Outcome::new(err <= C13_REL, format!("limit {:.6} vs {:.6} err {:.1e}", r.extrapolated_limit, reference, err))
}

fn main() {
    // let `cargo test -- --list` and filters pass through harmlessly
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("1 exponential alpha limit", c1_exponential_limit),
        ("2 anisotropic alpha limit", c2_anisotropic_limit),
        ("3 inner-ball bracket", c3_inner_ball),
        ("4 antisymmetric minimum certificates", c4_antisymmetric_certificates),
        ("5 narrow-region scaling", c5_narrow_region),
        ("6 decay-at-infinity scaling", c6_decay),
        ("7 linear ball solves and symmetry", c7_linear_ball),
        ("8 nonlinear ball solve and symmetry", c8_nonlinear_ball),
        ("9 simple maximum principle", c9_simple_max_principle),
        ("10 mean-value ratio", c10_mean_value),
        ("11 error-estimate honesty", c11_oracle_honesty),
        ("12 whole-space sweep", c12_whole_space),
        ("13 matrix kernel limit", c13_matrix_diag),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (name, run) in &criteria {
        let t = Instant::now();
        let o = run();
        let took: Duration = t.elapsed();
        println!("[{}] criterion {name}: {} ({:.2}s)", if o.pass { "PASS" } else { "FAIL" }, o.detail, took.as_secs_f64());
        for n in &o.notes {
            println!("       note: {n}");
        }
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
