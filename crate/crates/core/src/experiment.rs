//! Batch experiments described by TOML files: one task per file, artifacts
//! plus a `manifest.json` of SHA-256 hashes in the output directory.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::alpha_limit::{sweep_alpha, AlphaFamily, DEFAULT_ALPHAS};
use crate::error::{Error, Result};
use crate::field::{fmt_f64, AnalyticField, Field, GridField};
use crate::kernels::{
    check_even, check_k1, check_levy_khintchine, check_monotone_k2, fixtures, ConditionReport, JumpKernel, KernelKind,
    KernelSpec,
};
use crate::moving_planes::{
    check_antisym_max_principle, decay_at_infinity_bound, narrow_region_bound, sweep_lambda, verify_radial_symmetry,
    PlaneReflection,
};
use crate::nonlinearity::{check_g1, check_g2, GKind, NonlinearitySpec};
use crate::pv_quadrature::{eval_fgk, QuadratureConfig};
use crate::solver::{solve_dirichlet, solve_dirichlet_nonlinear, DomainSpec, Solution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    CheckKernel,
    EvalOperator,
    SolveBall,
    VerifySymmetry,
    SweepAlpha,
    NarrowRegion,
    DecayInfinity,
}

const TASKS: [(Task, &str); 7] = [
    (Task::CheckKernel, "check_kernel"),
    (Task::EvalOperator, "eval_operator"),
    (Task::SolveBall, "solve_ball"),
    (Task::VerifySymmetry, "verify_symmetry"),
    (Task::SweepAlpha, "sweep_alpha"),
    (Task::NarrowRegion, "narrow_region"),
    (Task::DecayInfinity, "decay_infinity"),
];

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = TASKS.iter().find(|(t, _)| t == self).unwrap().1;
        f.write_str(name)
    }
}

impl FromStr for Task {
    type Err = Error;
    /// Accepts `solve_ball` as well as `SolveBall`.
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| *c != '_' && *c != '-').collect::<String>().to_lowercase();
        TASKS
            .iter()
            .find(|(_, n)| n.replace('_', "") == key)
            .map(|(t, _)| *t)
            .ok_or_else(|| Error::config(format!("task: unknown task '{s}'")))
    }
}

/// Kernels outside the zoo, for condition checks only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFixture {
    SinPerturbed,
    ZeroOrder,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    /// `e^{−|x−c|²/w²}`.
    Gaussian {
        #[serde(default)]
        center: Option<Vec<f64>>,
        #[serde(default = "one")]
        width: f64,
    },
    /// `e^{−|x−c|²}(1 − |x−c|²/R²)₊²`.
    CutoffGaussian { center: Vec<f64>, radius: f64 },
    Constant { value: f64 },
    /// `tanh(x_axis)`.
    TanhAxis { axis: usize },
    /// Grid field file (binary or `.csv`).
    Grid { path: PathBuf },
}

impl FieldSpec {
    pub fn build(&self, dim: usize) -> Result<Field> {
        let check = |c: &[f64]| {
            if c.len() != dim {
                Err(Error::config(format!("field.center must have {dim} entries")))
            } else {
                Ok(())
            }
        };
        Ok(match self {
            FieldSpec::Gaussian { center, width } => {
                if !(*width > 0.0) {
                    return Err(Error::config("field.width must be positive"));
                }
                let c = center.clone().unwrap_or_else(|| vec![0.0; dim]);
                check(&c)?;
                Field::Analytic(AnalyticField::gaussian(vec![0.0; dim]).dilated(*width).translated(c))
            }
            FieldSpec::CutoffGaussian { center, radius } => {
                check(center)?;
                if !(*radius > 0.0) {
                    return Err(Error::config("field.radius must be positive"));
                }
                let (c, r2) = (center.clone(), radius * radius);
                Field::Analytic(AnalyticField::new(dim, 1.0, move |x| {
                    let d2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
                    let s = (1.0 - d2 / r2).max(0.0);
                    (-d2).exp() * s * s
                }))
            }
            FieldSpec::Constant { value } => Field::Analytic(AnalyticField::constant(dim, *value)),
            FieldSpec::TanhAxis { axis } => {
                if *axis >= dim {
                    return Err(Error::config("field.axis out of range"));
                }
                Field::Analytic(AnalyticField::tanh_axis(dim, *axis))
            }
            FieldSpec::Grid { path } => {
                let g = GridField::load(path)?;
                if g.dim() != dim {
                    return Err(Error::config("field.path holds a grid of the wrong dimension"));
                }
                Field::Grid(g)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub points: Vec<Vec<f64>>,
    /// Extra points drawn uniformly from `[−half_width, half_width]^n`.
    pub random_points: usize,
    pub half_width: f64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings { points: vec![], random_points: 0, half_width: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlphaSettings {
    /// Derived from the kernel kind when absent.
    pub family: Option<AlphaFamily>,
    pub alphas: Vec<f64>,
    pub point: Option<Vec<f64>>,
}

impl Default for AlphaSettings {
    fn default() -> Self {
        AlphaSettings { family: None, alphas: DEFAULT_ALPHAS.to_vec(), point: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundSettings {
    pub axis: usize,
    pub lambda: f64,
    pub deltas: Vec<f64>,
    pub radii: Vec<f64>,
    pub x0: Option<Vec<f64>>,
}

impl Default for BoundSettings {
    fn default() -> Self {
        BoundSettings {
            axis: 0,
            lambda: 0.0,
            deltas: (3..=8).map(|k| 2f64.powi(-k)).collect(),
            radii: vec![2.0, 3.0, 4.0, 6.0, 8.0],
            x0: None,
        }
    }
}

/// Pass criteria; unset entries take task defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Expectations {
    pub levy_khintchine: Option<bool>,
    pub k1: Option<bool>,
    pub k2: Option<bool>,
    pub even: Option<bool>,
    pub rel_tol: Option<f64>,
    pub slope_tol: Option<f64>,
    pub one_sided: bool,
    pub center: Option<Vec<f64>>,
    pub tolerance: Option<f64>,
    pub radial: Option<bool>,
    pub symmetric: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub task: Task,
    pub kernel: KernelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<KernelFixture>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonlinearity: Option<NonlinearitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainSpec>,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldSpec>,
    #[serde(default)]
    pub eval: EvalSettings,
    #[serde(default)]
    pub alpha: AlphaSettings,
    #[serde(default)]
    pub bounds: BoundSettings,
    #[serde(default)]
    pub expect: Expectations,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn default_output() -> PathBuf {
    PathBuf::from("output")
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    /// Presence and consistency of the sections the task needs.
    pub fn validate(&self) -> Result<()> {
        self.quadrature.validate()?;
        let n = self.kernel.dim();
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::config(format!("{what}: section required by task {}", self.task)))
            }
        };
        if let Some(d) = &self.domain {
            if d.dim() != n {
                return Err(Error::config(format!("domain.dim ({}) differs from kernel.dim ({n})", d.dim())));
            }
        }
        if !(self.solver.tol > 0.0) {
            return Err(Error::config("solver.tol must be positive"));
        }
        if self.fixture.is_some() && self.task != Task::CheckKernel {
            return Err(Error::config("fixture: only valid with task check_kernel"));
        }
        match self.task {
            Task::SolveBall => {
                need(self.domain.is_some(), "domain")?;
                need(self.nonlinearity.is_some(), "nonlinearity")?;
            }
            Task::VerifySymmetry => {
                if self.field.is_none() {
                    need(self.domain.is_some(), "domain")?;
                    need(self.nonlinearity.is_some(), "nonlinearity")?;
                }
            }
            Task::EvalOperator => {
                need(self.field.is_some(), "field")?;
                if self.eval.points.is_empty() && self.eval.random_points == 0 {
                    return Err(Error::config("eval.points: no evaluation points given"));
                }
                if self.eval.points.iter().any(|p| p.len() != n) {
                    return Err(Error::config(format!("eval.points: every point needs {n} coordinates")));
                }
            }
            Task::SweepAlpha => {
                if self.alpha.family.is_none() {
                    self.alpha_family()?;
                }
            }
            Task::NarrowRegion | Task::DecayInfinity => {
                if self.bounds.axis >= n {
                    return Err(Error::config("bounds.axis out of range"));
                }
            }
            Task::CheckKernel => {}
        }
        if n > 3 && self.task != Task::CheckKernel {
            return Err(Error::config("kernel.dim must be at most 3 for this task"));
        }
        Ok(())
    }

    fn alpha_family(&self) -> Result<AlphaFamily> {
        if let Some(f) = &self.alpha.family {
            return Ok(f.clone());
        }
        match self.kernel.kind() {
            KernelKind::Exponential => Ok(AlphaFamily::ExponentialScaled),
            KernelKind::AnisotropicPNorm => Ok(AlphaFamily::Anisotropic { p: self.kernel.p_norm() }),
            KernelKind::MatrixTransformed => Ok(AlphaFamily::MatrixDiag { lambda: self.kernel.lambda_diag().to_vec() }),
            _ => Err(Error::config("alpha.family: required for this kernel kind")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
    pub partial: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    /// Numeric non-convergence; artifacts hold the last state.
    Partial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: Option<String>,
    pub task: Task,
    pub status: RunStatus,
    pub passed: bool,
    pub detail: String,
    pub files: Vec<ManifestEntry>,
}

impl RunSummary {
    /// 0 success, 2 numeric non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self.status {
            RunStatus::Complete => 0,
            RunStatus::Partial => 2,
        }
    }
}

/// 1 for validation and I/O errors, 2 for numeric non-convergence.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::NotConverged { .. } | Error::SolveFailed { .. } => 2,
        _ => 1,
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub task: Option<Task>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

struct Artifacts {
    dir: PathBuf,
    files: Vec<(String, bool)>,
}

impl Artifacts {
    fn write(&mut self, name: &str, bytes: &[u8], partial: bool) -> Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.files.retain(|(n, _)| n != name);
        self.files.push((name.to_string(), partial));
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T, partial: bool) -> Result<()> {
        let mut s = serde_json::to_string_pretty(v)?;
        s.push('\n');
        self.write(name, s.as_bytes(), partial)
    }

    fn solution(&mut self, sol: &Solution, partial: bool) -> Result<()> {
        let mut g = vec![];
        sol.field.write_binary(&mut g)?;
        self.write("solution.grid", &g, partial)?;
        let mut r = vec![];
        sol.report.write_csv(&mut r)?;
        self.write("solve_report.csv", &r, partial)
    }

    fn manifest(&self, summary: &RunSummary, seed: u64) -> Result<Vec<ManifestEntry>> {
        let mut entries = vec![];
        for (name, partial) in &self.files {
            let bytes = fs::read(self.dir.join(name))?;
            entries.push(ManifestEntry { path: name.clone(), sha256: sha256_hex(&bytes), bytes: bytes.len() as u64, partial: *partial });
        }
        let m = serde_json::json!({
            "label": summary.label,
            "task": summary.task,
            "seed": seed,
            "status": summary.status,
            "passed": summary.passed,
            "files": entries,
        });
        fs::write(self.dir.join("manifest.json"), serde_json::to_string_pretty(&m)? + "\n")?;
        Ok(entries)
    }
}

struct Outcome {
    status: RunStatus,
    passed: bool,
    detail: String,
}

impl Outcome {
    fn done(passed: bool, detail: String) -> Self {
        Outcome { status: RunStatus::Complete, passed, detail }
    }
}

/// Run one experiment; the output directory is `opts.output_dir`, else the config's.
pub fn run(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunSummary> {
    let mut cfg = config.clone();
    if let Some(t) = opts.task {
        cfg.task = t;
    }
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let dir = opts.output_dir.clone().unwrap_or_else(|| cfg.output_dir.clone());
    fs::create_dir_all(&dir)?;
    let mut art = Artifacts { dir, files: vec![] };
    let out = match cfg.task {
        Task::CheckKernel => task_check_kernel(&cfg, &mut art),
        Task::EvalOperator => task_eval(&cfg, &mut art),
        Task::SolveBall => task_solve(&cfg, &mut art),
        Task::VerifySymmetry => task_symmetry(&cfg, &mut art),
        Task::SweepAlpha => task_alpha(&cfg, &mut art),
        Task::NarrowRegion => task_narrow(&cfg, &mut art),
        Task::DecayInfinity => task_decay(&cfg, &mut art),
    };
    let out = match out {
        Ok(o) => o,
        Err(e) if exit_code_for(&e) == 2 => Outcome { status: RunStatus::Partial, passed: false, detail: e.to_string() },
        Err(e) => return Err(e),
    };
    let mut summary =
        RunSummary { label: cfg.label.clone(), task: cfg.task, status: out.status, passed: out.passed, detail: out.detail, files: vec![] };
    summary.files = art.manifest(&summary, cfg.seed)?;
    Ok(summary)
}

fn task_check_kernel(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Outcome> {
    let spec = &cfg.kernel;
    let sin;
    let zero;
    let kernel: &dyn JumpKernel = match cfg.fixture {
        None => spec,
        Some(KernelFixture::SinPerturbed) => {
            sin = fixtures::SinPerturbed { dim: spec.dim(), alpha: spec.alpha() };
            &sin
        }
        Some(KernelFixture::ZeroOrder) => {
            zero = fixtures::ZeroOrder { dim: spec.dim() };
            &zero
        }
    };
    let samples = 256;
    let mut reports: Vec<ConditionReport> = vec![check_levy_khintchine(kernel, &cfg.quadrature), check_k1(kernel, samples)];
    let mut k2 = vec![];
    for axis in 0..kernel.dim() {
        k2.push(check_monotone_k2(kernel, axis, samples)?);
    }
    let k2_holds = k2.iter().all(|r| r.holds);
    reports.extend(k2.iter().cloned());
    let even = check_even(kernel, samples);
    reports.push(even.clone());
    let e = &cfg.expect;
    let checks = [
        ("levy_khintchine", reports[0].holds, e.levy_khintchine.unwrap_or(true)),
        ("k1", reports[1].holds, e.k1.unwrap_or(true)),
        ("k2", k2_holds, e.k2.unwrap_or(true)),
        ("even", even.holds, e.even.unwrap_or(true)),
    ];
    let mismatched: Vec<String> =
        checks.iter().filter(|c| c.1 != c.2).map(|c| format!("{} holds={} expected {}", c.0, c.1, c.2)).collect();
    let mut passed = mismatched.is_empty();
    let mut nl = serde_json::Value::Null;
    if let Some(ns) = &cfg.nonlinearity {
        let g1 = check_g1(ns, samples);
        let g2 = check_g2(ns, 1e-3)?;
        passed &= g1.holds;
        nl = serde_json::json!({ "spec": ns, "g1": g1, "g2": g2 });
    }
    let verdicts: serde_json::Map<String, serde_json::Value> =
        checks.iter().map(|c| (c.0.to_string(), serde_json::Value::Bool(c.1))).collect();
    let report = serde_json::json!({
        "kernel": spec,
        "fixture": cfg.fixture,
        "holds": verdicts,
        "conditions": reports,
        "nonlinearity": nl,
    });
    art.json("kernel_report.json", &report, false)?;
    let detail = if mismatched.is_empty() { "conditions as expected".to_string() } else { mismatched.join("; ") };
    Ok(Outcome::done(passed, detail))
}

fn eval_points(cfg: &ExperimentConfig) -> Vec<Vec<f64>> {
    let n = cfg.kernel.dim();
    let mut pts = cfg.eval.points.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let w = cfg.eval.half_width;
    for _ in 0..cfg.eval.random_points {
        pts.push((0..n).map(|_| rng.random_range(-w..=w)).collect());
    }
    pts
}

fn task_eval(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Outcome> {
    let n = cfg.kernel.dim();
    let field = cfg.field.as_ref().unwrap().build(n)?;
    let g = cfg.nonlinearity.as_ref().map_or(GKind::Identity, |s| s.g);
    let pts = eval_points(cfg);
    let rows: Vec<Result<(f64, f64, f64, f64, bool)>> = pts
        .par_iter()
        .map(|x| match eval_fgk(&field, &g, &cfg.kernel, x, &cfg.quadrature) {
            Ok(e) => Ok((e.value, e.err_estimate, e.tail_bound, e.inner_contribution, true)),
            Err(Error::NotConverged { estimate, error }) => Ok((estimate, error, f64::NAN, f64::NAN, false)),
            Err(e) => Err(e),
        })
        .collect();
    let mut csv = String::new();
    let cols: Vec<String> = (1..=n).map(|k| format!("x{k}")).collect();
    csv.push_str(&format!("{},value,err_estimate,tail_bound,inner_contribution,converged\n", cols.join(",")));
    let mut failures = 0;
    for (x, r) in pts.iter().zip(rows) {
        let (v, e, t, i, ok) = r?;
        failures += usize::from(!ok);
        let xs: Vec<String> = x.iter().map(|v| fmt_f64(*v)).collect();
        csv.push_str(&format!("{},{},{},{},{},{}\n", xs.join(","), fmt_f64(v), fmt_f64(e), fmt_f64(t), fmt_f64(i), u8::from(ok)));
    }
    art.write("eval.csv", csv.as_bytes(), failures > 0)?;
    let detail = format!("{} points, {failures} not converged", pts.len());
    Ok(Outcome { status: if failures > 0 { RunStatus::Partial } else { RunStatus::Complete }, passed: failures == 0, detail })
}

fn solve(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<std::result::Result<Solution, Outcome>> {
    let ns = cfg.nonlinearity.as_ref().unwrap();
    let dom = cfg.domain.as_ref().unwrap();
    let res = if ns.g.is_linear() {
        solve_dirichlet(&cfg.kernel, &ns.f, dom, &cfg.quadrature, cfg.solver.tol)
    } else {
        solve_dirichlet_nonlinear(ns, &cfg.kernel, dom, &cfg.quadrature, cfg.solver.tol)
    };
    match res {
        Ok(sol) => {
            art.solution(&sol, false)?;
            Ok(Ok(sol))
        }
        Err(Error::SolveFailed { iterations, residual, last }) => {
            if let Some(sol) = last {
                art.solution(&sol, true)?;
            }
            Ok(Err(Outcome {
                status: RunStatus::Partial,
                passed: false,
                detail: format!("no convergence after {iterations} iterations (residual {residual:.3e})"),
            }))
        }
        Err(e) => Err(e),
    }
}

fn task_solve(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Outcome> {
    Ok(match solve(cfg, art)? {
        Ok(sol) => Outcome::done(
            sol.report.converged,
            format!("{} iterations, residual {:.3e}", sol.report.iterations, sol.report.final_residual_sup),
        ),
        Err(o) => o,
    })
}

fn task_symmetry(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Outcome> {
    let n = cfg.kernel.dim();
    let (field, tol) = match &cfg.field {
        Some(f) => (f.build(n)?, cfg.expect.tolerance.unwrap_or(1e-10)),
        None => match solve(cfg, art)? {
            Ok(sol) => (Field::Grid(sol.field), cfg.expect.tolerance.unwrap_or(5.0 * cfg.solver.tol)),
            Err(o) => return Ok(o),
        },
    };
    let center = cfg.expect.center.clone().unwrap_or_else(|| vec![0.0; n]);
    if center.len() != n {
        return Err(Error::config(format!("expect.center must have {n} entries")));
    }
    let want_sym = cfg.expect.symmetric.unwrap_or(true);
    let mut csv = String::new();
    let cols: Vec<String> = (1..=n).map(|k| format!("argmin_x{k}")).collect();
    csv.push_str(&format!("axis,lambda,min_w,{}\n", cols.join(",")));
    let mut sweeps = vec![];
    let mut passed = true;
    let mut notes = vec![];
    for axis in 0..n {
        let r = sweep_lambda(&field, axis, tol)?;
        let mut body = vec![];
        r.write_csv(&mut body)?;
        for line in String::from_utf8_lossy(&body).lines().skip(1) {
            csv.push_str(&format!("{axis},{line}\n"));
        }
        let located = (r.lambda_o - center[axis]).abs() <= r.h * (1.0 + 1e-9);
        if !located || (want_sym && !r.symmetric_verdict) {
            passed = false;
            notes.push(format!("axis {axis}: lambda_o={} symmetric={}", r.lambda_o, r.symmetric_verdict));
        }
        sweeps.push(serde_json::json!({
            "axis": axis,
            "lambda_o": r.lambda_o,
            "lambda_o_reversed": r.lambda_o_reversed,
            "max_abs_w_at_lambda_o": r.max_abs_w_at_lambda_o,
            "symmetric_verdict": r.symmetric_verdict,
            "h": r.h,
            "tolerance": r.tolerance,
        }));
    }
    art.write("moving_plane.csv", csv.as_bytes(), false)?;
    let radial = verify_radial_symmetry(&field, &center, tol)?;
    if cfg.expect.radial.unwrap_or(true)
        && (radial.max_excess > tol || radial.monotone_violations > 0)
    {
        passed = false;
        notes.push(format!("radial excess {:.3e}, {} violations", radial.max_excess, radial.monotone_violations));
    }
    let mut certs = vec![];
    if matches!(field, Field::Analytic(_)) {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for _ in 0..3 {
            let plane = PlaneReflection::new(0, center[0] + rng.random_range(-1.0..1.0));
            let c = check_antisym_max_principle(&field, &cfg.kernel, &plane, &cfg.quadrature)?;
            if c.verdict == crate::moving_planes::CertificateVerdict::Violated {
                passed = false;
                notes.push(format!("certificate violated at lambda={}", plane.lambda));
            }
            certs.push(serde_json::json!({ "plane": plane, "certificate": c }));
        }
    }
    art.json("certificates.json", &serde_json::json!({ "sweeps": sweeps, "radial": radial, "antisymmetric": certs }), false)?;
    let detail = if notes.is_empty() { "symmetric about the expected center".to_string() } else { notes.join("; ") };
    Ok(Outcome::done(passed, detail))
}

fn task_alpha(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Outcome> {
    let n = cfg.kernel.dim();
    let family = cfg.alpha_family()?;
    let spec = cfg.field.clone().unwrap_or(FieldSpec::Gaussian { center: None, width: 1.0 });
    let Field::Analytic(u) = spec.build(n)? else {
        return Err(Error::config("field: the alpha sweep needs an analytic field"));
    };
    let x = cfg.alpha.point.clone().unwrap_or_else(|| vec![0.0; n]);
    let r = sweep_alpha(&u, &family, &x, &cfg.alpha.alphas, &cfg.quadrature)?;
    let mut b = vec![];
    r.write_csv(&mut b)?;
    art.write("alpha_sweep.csv", &b, false)?;
    let tol = cfg.expect.rel_tol.unwrap_or(0.02);
    Ok(Outcome::done(
        r.rel_error <= tol,
        format!("limit {:.6} vs reference {:.6} (error {:.2e})", r.extrapolated_limit, r.reference, r.rel_error),
    ))
}

fn slope_ok(slope: f64, alpha: f64, tol: f64, one_sided: bool) -> bool {
    if one_sided {
        slope <= -(1.0 - tol) * alpha
    } else {
        (slope + alpha).abs() <= tol * alpha
    }
}

fn task_narrow(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Outcome> {
    let n = cfg.kernel.dim();
    let b = &cfg.bounds;
    let plane = PlaneReflection::new(b.axis, b.lambda);
    let x0 = b.x0.clone().unwrap_or_else(|| vec![0.0; n]);
    let rows = narrow_region_bound(&cfg.kernel, &x0, &plane, &b.deltas)?;
    let mut csv = String::from("delta,integral,bound_slope\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{}\n", fmt_f64(r.delta), fmt_f64(r.integral), fmt_f64(r.bound_slope)));
    }
    art.write("bounds.csv", csv.as_bytes(), false)?;
    let s = rows[0].bound_slope;
    let a = cfg.kernel.alpha();
    let ok = slope_ok(s, a, cfg.expect.slope_tol.unwrap_or(0.1), cfg.expect.one_sided);
    Ok(Outcome::done(ok, format!("slope {s:.4} for alpha {a}")))
}

fn task_decay(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Outcome> {
    let b = &cfg.bounds;
    let rep = decay_at_infinity_bound(&cfg.kernel, &PlaneReflection::new(b.axis, b.lambda), &b.radii)?;
    let mut csv = String::from("radius,integral,reference_bound\n");
    for r in &rep.rows {
        csv.push_str(&format!("{},{},{}\n", fmt_f64(r.radius), fmt_f64(r.integral), fmt_f64(r.reference_bound)));
    }
    art.write("bounds.csv", csv.as_bytes(), false)?;
    let a = cfg.kernel.alpha();
    let scaling = cfg.kernel.kind() == KernelKind::Exponential
        || slope_ok(rep.slope, a, cfg.expect.slope_tol.unwrap_or(0.1), cfg.expect.one_sided);
    Ok(Outcome::done(rep.holds && scaling, format!("bound holds: {}, slope {:.4}", rep.holds, rep.slope)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub config: String,
    pub label: String,
    pub task: Option<Task>,
    pub passed: bool,
    /// Exit code the single run would have produced.
    pub code: i32,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub rows: Vec<SuiteRow>,
}

impl SuiteSummary {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    /// 0 all pass, 2 when some row did not converge, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.all_passed() {
            0
        } else if self.rows.iter().any(|r| r.code == 2) {
            2
        } else {
            1
        }
    }

    pub fn table(&self) -> String {
        let w = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(5).max(5);
        let c = self.rows.iter().map(|r| r.config.len()).max().unwrap_or(6).max(6);
        let mut s = format!("{:<w$}  {:<c$}  {:<6}  detail\n", "label", "config", "result");
        for r in &self.rows {
            s.push_str(&format!(
                "{:<w$}  {:<c$}  {:<6}  {}\n",
                r.label,
                r.config,
                if r.passed { "PASS" } else { "FAIL" },
                r.detail
            ));
        }
        s
    }
}

/// Run every `*.toml` in `config_dir` (sorted by name), each into
/// `output_root/<stem>`, at most `jobs` at a time.
pub fn verify_suite(config_dir: &Path, output_root: &Path, jobs: usize) -> Result<SuiteSummary> {
    let mut paths: Vec<PathBuf> = fs::read_dir(config_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::config(format!("no *.toml configurations in {}", config_dir.display())));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::config(format!("jobs: {e}")))?;
    let rows: Vec<SuiteRow> = pool.install(|| {
        paths
            .par_iter()
            .with_max_len(1)
            .map(|p| {
                let stem = p.file_stem().unwrap().to_string_lossy().to_string();
                let name = p.file_name().unwrap().to_string_lossy().to_string();
                match ExperimentConfig::load(p) {
                    Err(e) => SuiteRow { config: name, label: stem, task: None, passed: false, code: exit_code_for(&e), detail: e.to_string() },
                    Ok(cfg) => {
                        let label = cfg.label.clone().unwrap_or_else(|| stem.clone());
                        let opts = RunOptions { output_dir: Some(output_root.join(&stem)), ..Default::default() };
                        match run(&cfg, &opts) {
                            Ok(s) => SuiteRow { config: name, label, task: Some(s.task), passed: s.passed, code: s.exit_code(), detail: s.detail },
                            Err(e) => SuiteRow { config: name, label, task: Some(cfg.task), passed: false, code: exit_code_for(&e), detail: e.to_string() },
                        }
                    }
                }
            })
            .collect()
    });
    let summary = SuiteSummary { rows };
    fs::create_dir_all(output_root)?;
    let mut f = fs::File::create(output_root.join("summary.csv"))?;
    writeln!(f, "label,config,task,passed,exit_code,detail")?;
    for r in &summary.rows {
        let task = r.task.map(|t| t.to_string()).unwrap_or_default();
        writeln!(f, "{},{},{},{},{},\"{}\"", r.label, r.config, task, r.passed, r.code, r.detail.replace('"', "'"))?;
    }
    Ok(summary)
}
