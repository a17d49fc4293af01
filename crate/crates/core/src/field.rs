//! Functions on `R^n`: closed-form fields with optional derivatives, and
//! lattice samples with multilinear interpolation and a constant exterior.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Closed-form field. The Hessian is stored row-major (`n×n`).
#[derive(Clone)]
pub struct AnalyticField {
    dim: usize,
    value: ScalarFn,
    gradient: Option<VectorFn>,
    hessian: Option<VectorFn>,
    sup_bound: f64,
    /// Value assumed beyond the truncation radius of the quadrature.
    exterior_value: f64,
}

impl fmt::Debug for AnalyticField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticField")
            .field("dim", &self.dim)
            .field("has_gradient", &self.gradient.is_some())
            .field("has_hessian", &self.hessian.is_some())
            .field("sup_bound", &self.sup_bound)
            .field("exterior_value", &self.exterior_value)
            .finish()
    }
}

impl AnalyticField {
    pub fn new(dim: usize, sup_bound: f64, value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        AnalyticField { dim, value: Arc::new(value), gradient: None, hessian: None, sup_bound, exterior_value: 0.0 }
    }

    pub fn with_gradient(mut self, g: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(g));
        self
    }

    pub fn with_hessian(mut self, h: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.hessian = Some(Arc::new(h));
        self
    }

    pub fn with_exterior_value(mut self, v: f64) -> Self {
        self.exterior_value = v;
        self
    }

    /// `e^{-|x-c|²}`.
    pub fn gaussian(center: Vec<f64>) -> Self {
        let dim = center.len();
        let (c1, c2, c3) = (center.clone(), center.clone(), center);
        AnalyticField::new(dim, 1.0, move |x| (-dist2(x, &c1)).exp())
            .with_gradient(move |x| {
                let e = (-dist2(x, &c2)).exp();
                x.iter().zip(&c2).map(|(a, b)| -2.0 * (a - b) * e).collect()
            })
            .with_hessian(move |x| {
                let n = x.len();
                let e = (-dist2(x, &c3)).exp();
                let mut h = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        let di = x[i] - c3[i];
                        let dj = x[j] - c3[j];
                        h[i * n + j] = e * (4.0 * di * dj - if i == j { 2.0 } else { 0.0 });
                    }
                }
                h
            })
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        AnalyticField::new(dim, c.abs(), move |_| c)
            .with_gradient(move |_| vec![0.0; dim])
            .with_hessian(move |_| vec![0.0; dim * dim])
            .with_exterior_value(c)
    }

    /// `tanh(x_axis)`.
    pub fn tanh_axis(dim: usize, axis: usize) -> Self {
        AnalyticField::new(dim, 1.0, move |x| x[axis].tanh())
            .with_gradient(move |x| {
                let mut g = vec![0.0; dim];
                let t = x[axis].tanh();
                g[axis] = 1.0 - t * t;
                g
            })
            .with_hessian(move |x| {
                let mut h = vec![0.0; dim * dim];
                let t = x[axis].tanh();
                h[axis * dim + axis] = -2.0 * t * (1.0 - t * t);
                h
            })
    }

    /// `a·u + b·v`; derivatives are kept when both operands have them.
    pub fn linear_combination(a: f64, u: &AnalyticField, b: f64, v: &AnalyticField) -> Result<Self> {
        if u.dim != v.dim {
            return Err(Error::domain("fields of different dimension"));
        }
        let (uv, vv) = (u.value.clone(), v.value.clone());
        let mut out = AnalyticField::new(u.dim, a.abs() * u.sup_bound + b.abs() * v.sup_bound, move |x| {
            a * uv(x) + b * vv(x)
        })
        .with_exterior_value(a * u.exterior_value + b * v.exterior_value);
        if let (Some(gu), Some(gv)) = (u.gradient.clone(), v.gradient.clone()) {
            out.gradient = Some(Arc::new(move |x| gu(x).iter().zip(gv(x)).map(|(p, q)| a * p + b * q).collect()));
        }
        if let (Some(hu), Some(hv)) = (u.hessian.clone(), v.hessian.clone()) {
            out.hessian = Some(Arc::new(move |x| hu(x).iter().zip(hv(x)).map(|(p, q)| a * p + b * q).collect()));
        }
        Ok(out)
    }

    /// `x ↦ u(x - t)`.
    pub fn translated(&self, t: Vec<f64>) -> Self {
        let shift = move |x: &[f64], t: &[f64]| -> Vec<f64> { x.iter().zip(t).map(|(a, b)| a - b).collect() };
        let v = self.value.clone();
        let t1 = t.clone();
        let mut out = AnalyticField::new(self.dim, self.sup_bound, move |x| v(&shift(x, &t1)))
            .with_exterior_value(self.exterior_value);
        if let Some(g) = self.gradient.clone() {
            let t2 = t.clone();
            out.gradient = Some(Arc::new(move |x| g(&shift(x, &t2))));
        }
        if let Some(h) = self.hessian.clone() {
            let t3 = t;
            out.hessian = Some(Arc::new(move |x| h(&shift(x, &t3))));
        }
        out
    }

    /// `x ↦ u(x / s)`.
    pub fn dilated(&self, s: f64) -> Self {
        let v = self.value.clone();
        let mut out = AnalyticField::new(self.dim, self.sup_bound, move |x| {
            let y: Vec<f64> = x.iter().map(|a| a / s).collect();
            v(&y)
        })
        .with_exterior_value(self.exterior_value);
        if let Some(h) = self.hessian.clone() {
            out.hessian = Some(Arc::new(move |x| {
                let y: Vec<f64> = x.iter().map(|a| a / s).collect();
                h(&y).into_iter().map(|v| v / (s * s)).collect()
            }));
        }
        if let Some(g) = self.gradient.clone() {
            out.gradient = Some(Arc::new(move |x| {
                let y: Vec<f64> = x.iter().map(|a| a / s).collect();
                g(&y).into_iter().map(|v| v / s).collect()
            }));
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.gradient.as_ref().map(|g| g(x))
    }

    pub fn hessian(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.hessian.as_ref().map(|h| h(x))
    }

    pub fn has_hessian(&self) -> bool {
        self.hessian.is_some()
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    pub fn exterior_value(&self) -> f64 {
        self.exterior_value
    }

    pub(crate) fn value_fn(&self) -> ScalarFn {
        self.value.clone()
    }
}

fn dist2(x: &[f64], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Axis-aligned lattice `{k·h : offset ≤ k < offset + shape}` (per axis).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub h: f64,
    pub offset: Vec<i64>,
    pub shape: Vec<usize>,
}

impl Lattice {
    /// `2m+1` nodes per axis centred on the origin.
    pub fn centered(dim: usize, h: f64, m: usize) -> Self {
        Lattice { h, offset: vec![-(m as i64); dim], shape: vec![2 * m + 1; dim] }
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lo(&self, axis: usize) -> i64 {
        self.offset[axis]
    }

    /// Largest integer coordinate along `axis` (inclusive).
    pub fn hi(&self, axis: usize) -> i64 {
        self.offset[axis] + self.shape[axis] as i64 - 1
    }

    pub fn contains(&self, k: &[i64]) -> bool {
        k.iter().enumerate().all(|(d, &v)| v >= self.lo(d) && v <= self.hi(d))
    }

    /// Row-major flat index (last axis fastest).
    pub fn flat(&self, k: &[i64]) -> usize {
        let mut idx = 0usize;
        for (d, &v) in k.iter().enumerate() {
            idx = idx * self.shape[d] + (v - self.offset[d]) as usize;
        }
        idx
    }

    pub fn coords(&self, mut flat: usize) -> Vec<i64> {
        let n = self.dim();
        let mut k = vec![0i64; n];
        for d in (0..n).rev() {
            k[d] = (flat % self.shape[d]) as i64 + self.offset[d];
            flat /= self.shape[d];
        }
        k
    }

    pub fn point(&self, k: &[i64]) -> Vec<f64> {
        k.iter().map(|&v| v as f64 * self.h).collect()
    }

    pub fn box_lo(&self) -> Vec<f64> {
        (0..self.dim()).map(|d| self.lo(d) as f64 * self.h).collect()
    }

    pub fn box_hi(&self) -> Vec<f64> {
        (0..self.dim()).map(|d| self.hi(d) as f64 * self.h).collect()
    }

    /// All integer coordinates in lexicographic order.
    pub fn nodes(&self) -> impl Iterator<Item = Vec<i64>> + '_ {
        (0..self.len()).map(move |i| self.coords(i))
    }
}

/// Lattice samples with multilinear interpolation; `exterior_value` outside the box.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub lattice: Lattice,
    pub data: Vec<f64>,
    pub exterior_value: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct GridHeader {
    dim: usize,
    h: f64,
    offset: Vec<i64>,
    shape: Vec<usize>,
    box_lo: Vec<f64>,
    box_hi: Vec<f64>,
    exterior_value: f64,
}

impl GridField {
    pub fn new(lattice: Lattice, data: Vec<f64>, exterior_value: f64) -> Result<Self> {
        if !(lattice.h > 0.0) || lattice.dim() == 0 || lattice.offset.len() != lattice.dim() {
            return Err(Error::domain("invalid lattice"));
        }
        if data.len() != lattice.len() {
            return Err(Error::domain(format!(
                "sample array has {} values, lattice has {} nodes",
                data.len(),
                lattice.len()
            )));
        }
        Ok(GridField { lattice, data, exterior_value })
    }

    pub fn from_fn(lattice: Lattice, exterior_value: f64, f: impl Fn(&[f64]) -> f64) -> Self {
        let data = lattice.nodes().map(|k| f(&lattice.point(&k))).collect();
        GridField { lattice, data, exterior_value }
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn h(&self) -> f64 {
        self.lattice.h
    }

    /// Sample at integer coordinates; the exterior value off the lattice.
    pub fn node(&self, k: &[i64]) -> f64 {
        if self.lattice.contains(k) {
            self.data[self.lattice.flat(k)]
        } else {
            self.exterior_value
        }
    }

    pub fn sup_bound(&self) -> f64 {
        self.data.iter().fold(self.exterior_value.abs(), |m, v| m.max(v.abs()))
    }

    pub fn in_box(&self, x: &[f64]) -> bool {
        let h = self.h();
        x.iter().enumerate().all(|(d, &v)| v >= self.lattice.lo(d) as f64 * h && v <= self.lattice.hi(d) as f64 * h)
    }

    /// Distance from `x` to the complement of the box (negative outside).
    pub fn box_clearance(&self, x: &[f64]) -> f64 {
        let h = self.h();
        x.iter()
            .enumerate()
            .map(|(d, &v)| (v - self.lattice.lo(d) as f64 * h).min(self.lattice.hi(d) as f64 * h - v))
            .fold(f64::INFINITY, f64::min)
    }

    /// Multilinear interpolant.
    pub fn value(&self, x: &[f64]) -> f64 {
        if !self.in_box(x) {
            return self.exterior_value;
        }
        let n = self.dim();
        let h = self.h();
        let mut base = vec![0i64; n];
        let mut frac = vec![0.0; n];
        for d in 0..n {
            let t = x[d] / h;
            let mut f = t.floor();
            if f as i64 >= self.lattice.hi(d) {
                f = (self.lattice.hi(d) - 1) as f64;
            }
            base[d] = f as i64;
            frac[d] = t - f;
        }
        let mut acc = 0.0;
        let mut k = vec![0i64; n];
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            for d in 0..n {
                let bit = (corner >> d) & 1;
                k[d] = base[d] + bit as i64;
                w *= if bit == 1 { frac[d] } else { 1.0 - frac[d] };
            }
            if w != 0.0 {
                acc += w * self.node(&k);
            }
        }
        acc
    }

    /// Largest `|second difference| / h²` along any axis over the lattice.
    pub fn max_second_difference(&self) -> f64 {
        let n = self.dim();
        let h2 = self.h() * self.h();
        let mut m: f64 = 0.0;
        for k in self.lattice.nodes() {
            let c = self.node(&k);
            for d in 0..n {
                let mut kp = k.clone();
                kp[d] += 1;
                let mut km = k.clone();
                km[d] -= 1;
                m = m.max((self.node(&kp) - 2.0 * c + self.node(&km)).abs() / h2);
            }
        }
        m
    }

    fn header(&self) -> GridHeader {
        GridHeader {
            dim: self.dim(),
            h: self.h(),
            offset: self.lattice.offset.clone(),
            shape: self.lattice.shape.clone(),
            box_lo: self.lattice.box_lo(),
            box_hi: self.lattice.box_hi(),
            exterior_value: self.exterior_value,
        }
    }

    fn from_header(hd: GridHeader, data: Vec<f64>) -> Result<Self> {
        if hd.offset.len() != hd.dim || hd.shape.len() != hd.dim {
            return Err(Error::domain("grid header: offset/shape length differs from dim"));
        }
        let lattice = Lattice { h: hd.h, offset: hd.offset, shape: hd.shape };
        if lattice.box_lo() != hd.box_lo || lattice.box_hi() != hd.box_hi {
            return Err(Error::domain("grid header: box inconsistent with offset, shape and h"));
        }
        GridField::new(lattice, data, hd.exterior_value)
    }

    /// JSON header line, then the samples as little-endian `f64`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, &self.header())?;
        w.write_all(b"\n")?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: BufRead>(mut r: R) -> Result<Self> {
        let mut line = String::new();
        r.read_line(&mut line)?;
        let hd: GridHeader = serde_json::from_str(line.trim_end())?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() % 8 != 0 {
            return Err(Error::domain("grid body is not a whole number of f64 values"));
        }
        let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Self::from_header(hd, data)
    }

    /// `# {header}` line, a column header, then one row per node.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# {}", serde_json::to_string(&self.header())?)?;
        let cols: Vec<String> = (1..=self.dim()).map(|d| format!("x{d}")).collect();
        writeln!(w, "{},value", cols.join(","))?;
        for (i, k) in self.lattice.nodes().enumerate() {
            for x in self.lattice.point(&k) {
                write!(w, "{},", fmt_f64(x))?;
            }
            writeln!(w, "{}", fmt_f64(self.data[i]))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let first = lines.next().ok_or_else(|| Error::domain("empty grid csv"))??;
        let json = first.strip_prefix("# ").ok_or_else(|| Error::domain("grid csv must start with '# {header}'"))?;
        let hd: GridHeader = serde_json::from_str(json)?;
        lines.next();
        let mut data = Vec::new();
        for line in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let last = line.rsplit(',').next().unwrap();
            data.push(last.trim().parse::<f64>().map_err(|e| Error::domain(format!("bad sample '{last}': {e}")))?);
        }
        Self::from_header(hd, data)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        if path.extension().is_some_and(|e| e == "csv") {
            self.write_csv(f)
        } else {
            self.write_binary(f)
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        if path.extension().is_some_and(|e| e == "csv") {
            Self::read_csv(f)
        } else {
            Self::read_binary(f)
        }
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone)]
pub enum Field {
    Analytic(AnalyticField),
    Grid(GridField),
}

impl Field {
    pub fn dim(&self) -> usize {
        match self {
            Field::Analytic(a) => a.dim(),
            Field::Grid(g) => g.dim(),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Field::Analytic(a) => a.value(x),
            Field::Grid(g) => g.value(x),
        }
    }

    pub fn sup_bound(&self) -> f64 {
        match self {
            Field::Analytic(a) => a.sup_bound(),
            Field::Grid(g) => g.sup_bound(),
        }
    }

    pub fn exterior_value(&self) -> f64 {
        match self {
            Field::Analytic(a) => a.exterior_value(),
            Field::Grid(g) => g.exterior_value,
        }
    }
}

impl From<AnalyticField> for Field {
    fn from(a: AnalyticField) -> Self {
        Field::Analytic(a)
    }
}

impl From<GridField> for Field {
    fn from(g: GridField) -> Self {
        Field::Grid(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> GridField {
        let lat = Lattice { h: 0.125, offset: vec![-3, -2], shape: vec![7, 6] };
        GridField::from_fn(lat, 0.25, |x| (x[0] * 3.1).sin() + x[1] * x[1] / 3.0 + 1e-17)
    }

    #[test]
    fn lattice_indexing() {
        let lat = Lattice { h: 0.5, offset: vec![-2, 1], shape: vec![5, 3] };
        for i in 0..lat.len() {
            assert_eq!(lat.flat(&lat.coords(i)), i);
        }
        assert_eq!(lat.coords(0), vec![-2, 1]);
        assert_eq!(lat.box_hi(), vec![1.0, 1.5]);
        let c = Lattice::centered(2, 0.1, 3);
        assert_eq!(c.point(&[-3, 3]), vec![-(3.0 * 0.1), 3.0 * 0.1]);
    }

    #[test]
    fn interpolation_reproduces_nodes_and_bilinear() {
        let g = sample();
        for k in g.lattice.nodes() {
            assert_eq!(g.value(&g.lattice.point(&k)), g.node(&k));
        }
        let lat = Lattice::centered(2, 0.25, 4);
        let f = GridField::from_fn(lat, 0.0, |x| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1]);
        let p = [0.31, -0.77];
        let want = 1.0 + 2.0 * p[0] - p[1] + 0.5 * p[0] * p[1];
        assert!((f.value(&p) - want).abs() < 1e-14);
        assert_eq!(f.value(&[1.5, 0.0]), 0.0);
    }

    #[test]
    fn binary_and_csv_round_trip_bit_exact() {
        let g = sample();
        let mut buf = Vec::new();
        g.write_binary(&mut buf).unwrap();
        let back = GridField::read_binary(&buf[..]).unwrap();
        assert_eq!(g, back);
        let mut csv = Vec::new();
        g.write_csv(&mut csv).unwrap();
        let back = GridField::read_csv(&csv[..]).unwrap();
        assert_eq!(g.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), back.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(g, back);
    }

    #[test]
    fn bad_header_rejected() {
        let g = sample();
        let mut buf = Vec::new();
        g.write_binary(&mut buf).unwrap();
        buf.truncate(buf.len() - 8);
        assert!(GridField::read_binary(&buf[..]).is_err());
    }

    #[test]
    fn gaussian_derivatives() {
        let u = AnalyticField::gaussian(vec![0.2, -0.1]);
        let x = [0.4, 0.3];
        let h = u.hessian(&x).unwrap();
        let e = 1e-4;
        let fd = (u.value(&[x[0] + e, x[1]]) - 2.0 * u.value(&x) + u.value(&[x[0] - e, x[1]])) / (e * e);
        assert!((fd - h[0]).abs() < 1e-6);
        let g = u.gradient(&x).unwrap();
        let fd = (u.value(&[x[0], x[1] + e]) - u.value(&[x[0], x[1] - e])) / (2.0 * e);
        assert!((fd - g[1]).abs() < 1e-8);
    }
}
