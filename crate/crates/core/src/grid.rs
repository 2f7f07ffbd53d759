//! Periodic space grids, graded time grids, sampled fields and their spectra.
//!
//! Layout is row-major with axis 0 slowest. Node `i` on an axis sits at
//! `x = -L + i h`, `h = 2L/n`, so index `n/2` is the origin. Spectral
//! coefficients follow the plain DFT normalised by `1/n^d`:
//! `u_j = Σ_k c_k exp(2πi k·j/n)` with `k ∈ {-n/2, …, n/2-1}` and physical
//! wavevector `ξ = πk/L`.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceGrid {
    pub d: usize,
    pub n: usize,
    /// Half-width `L` of the box `[-L, L]^d`.
    pub half_width: f64,
}

impl SpaceGrid {
    pub fn new(d: usize, n: usize, half_width: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::Grid("dimension must be positive".into()));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::Grid(format!("n = {n} must be a power of two >= 4")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::Grid(format!("half-width {half_width} must be positive")));
        }
        Ok(SpaceGrid { d, n, half_width })
    }

    pub fn h(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.d as i32)
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn shape(&self) -> Vec<usize> {
        vec![self.n; self.d]
    }

    /// Multi-index of flat position `flat`.
    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for a in (0..self.d).rev() {
            out[a] = flat % self.n;
            flat /= self.n;
        }
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.h()
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        let mut idx = vec![0; self.d];
        self.unravel(flat, &mut idx);
        idx.iter().map(|&i| self.coordinate(i)).collect()
    }

    /// Signed wavenumber for FFT index `j`.
    pub fn wavenumber(&self, j: usize) -> i64 {
        if j < self.n / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    pub fn is_nyquist(&self, j: usize) -> bool {
        j == self.n / 2
    }

    /// Wavevector table for every flat spectral index.
    pub fn wavevectors(&self) -> Wavevectors {
        let len = self.len();
        let scale = std::f64::consts::PI / self.half_width;
        let mut xi = vec![0.0; len * self.d];
        let mut dxi = vec![0.0; len * self.d];
        let mut norm = vec![0.0; len];
        let mut k2 = vec![0u64; len];
        let mut idx = vec![0; self.d];
        for f in 0..len {
            self.unravel(f, &mut idx);
            let mut s = 0.0;
            let mut ks = 0u64;
            for a in 0..self.d {
                let k = self.wavenumber(idx[a]);
                let x = scale * k as f64;
                xi[f * self.d + a] = x;
                dxi[f * self.d + a] = if self.is_nyquist(idx[a]) { 0.0 } else { x };
                s += x * x;
                ks += (k * k) as u64;
            }
            norm[f] = s.sqrt();
            k2[f] = ks;
        }
        Wavevectors { d: self.d, xi, deriv_xi: dxi, norm, k2 }
    }

    /// Same lattice on the box shrunk by `λ`.
    pub fn rescaled(&self, lambda: f64) -> Result<Self> {
        SpaceGrid::new(self.d, self.n, self.half_width / lambda)
    }
}

/// Per-mode wavevector data.
#[derive(Clone, Debug)]
pub struct Wavevectors {
    pub d: usize,
    /// Full wavevectors, `d` entries per mode.
    pub xi: Vec<f64>,
    /// Wavevectors with Nyquist components zeroed, for odd (derivative) symbols.
    pub deriv_xi: Vec<f64>,
    pub norm: Vec<f64>,
    /// Integer `|k|²`, useful for grouping modes by shell.
    pub k2: Vec<u64>,
}

impl Wavevectors {
    pub fn xi(&self, f: usize) -> &[f64] {
        &self.xi[f * self.d..(f + 1) * self.d]
    }

    pub fn deriv(&self, f: usize) -> &[f64] {
        &self.deriv_xi[f * self.d..(f + 1) * self.d]
    }
}

/// Graded time nodes `t_k = T (k/N)^κ`, `k = 1..N`. The origin is not a node;
/// cell `k` is `[t_{k-1}, t_k]` with `t_0 = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub horizon: f64,
    pub steps: usize,
    /// `None` for grids built from explicit nodes.
    pub kappa: Option<f64>,
    nodes: Vec<f64>,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize, kappa: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Grid(format!("horizon {horizon} must be positive")));
        }
        if steps == 0 {
            return Err(Error::Grid("time grid needs at least one node".into()));
        }
        if !(kappa.is_finite() && kappa >= 1.0) {
            return Err(Error::Grid(format!("grading exponent {kappa} must be >= 1")));
        }
        let nodes = (1..=steps).map(|k| horizon * (k as f64 / steps as f64).powf(kappa)).collect();
        Ok(TimeGrid { horizon, steps, kappa: Some(kappa), nodes })
    }

    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        Self::new(horizon, steps, 1.0)
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Grid("time grid needs at least one node".into()));
        }
        let mut prev = 0.0;
        for &t in &nodes {
            if !(t.is_finite() && t > prev) {
                return Err(Error::Grid("time nodes must be positive and strictly increasing".into()));
            }
            prev = t;
        }
        Ok(TimeGrid { horizon: prev, steps: nodes.len(), kappa: None, nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Cell `k` (0-based) as `(t_{k-1}, t_k)`.
    pub fn cell(&self, k: usize) -> (f64, f64) {
        (if k == 0 { 0.0 } else { self.nodes[k - 1] }, self.nodes[k])
    }

    /// Nodes divided by `factor`; errors if any node collapses to zero.
    pub fn scaled_down(&self, factor: f64) -> Result<Self> {
        let nodes: Vec<f64> = self.nodes.iter().map(|t| t / factor).collect();
        if nodes.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
            return Err(Error::Grid(format!("time rescaling by {factor} sends a node to 0 or infinity")));
        }
        let mut g = TimeGrid::from_nodes(nodes)?;
        g.kappa = self.kappa;
        Ok(g)
    }

    /// Same grading with `4x`, `2x`, ... as many steps: every coarse node is a fine node.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        match self.kappa {
            Some(k) => TimeGrid::new(self.horizon, self.steps * factor, k),
            None => Err(Error::Grid("cannot refine a grid built from explicit nodes".into())),
        }
    }
}

/// Real samples of a field on a space grid; one array per component.
/// A scalar field is a one-component `VectorField`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub grid: SpaceGrid,
    pub comps: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn new(grid: SpaceGrid, comps: Vec<Vec<f64>>) -> Result<Self> {
        if comps.is_empty() {
            return Err(Error::Grid("a field needs at least one component".into()));
        }
        for c in &comps {
            if c.len() != grid.len() {
                return Err(Error::Grid(format!("component has {} samples, grid has {}", c.len(), grid.len())));
            }
            if c.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("field samples".into()));
            }
        }
        Ok(VectorField { grid, comps })
    }

    pub fn zeros(grid: &SpaceGrid, ncomp: usize) -> Self {
        VectorField { grid: grid.clone(), comps: vec![vec![0.0; grid.len()]; ncomp] }
    }

    pub fn scalar(grid: SpaceGrid, values: Vec<f64>) -> Result<Self> {
        VectorField::new(grid, vec![values])
    }

    pub fn ncomp(&self) -> usize {
        self.comps.len()
    }

    /// Pointwise Euclidean magnitude.
    pub fn magnitude(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.grid.len()];
        for c in &self.comps {
            for (mi, v) in m.iter_mut().zip(c) {
                *mi += v * v;
            }
        }
        m.iter_mut().for_each(|v| *v = v.sqrt());
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.magnitude().into_iter().fold(0.0, f64::max)
    }

    /// `(h^d Σ |u|^p)^{1/p}` over the box; `p = ∞` gives the max.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.max_abs();
        }
        let s: f64 = self.magnitude().iter().map(|m| m.powf(p)).sum();
        (s * self.grid.cell_volume()).powf(1.0 / p)
    }

    pub fn scaled(&self, c: f64) -> Self {
        VectorField {
            grid: self.grid.clone(),
            comps: self.comps.iter().map(|v| v.iter().map(|x| x * c).collect()).collect(),
        }
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &VectorField) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(VectorField {
            grid: self.grid.clone(),
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + c * y).collect())
                .collect(),
        })
    }

    fn check_compatible(&self, other: &VectorField) -> Result<()> {
        if self.grid != other.grid || self.ncomp() != other.ncomp() {
            return Err(Error::Grid("fields live on different grids or have different arity".into()));
        }
        Ok(())
    }

    /// Pointwise magnitude as a scalar field.
    pub fn magnitude_field(&self) -> VectorField {
        VectorField { grid: self.grid.clone(), comps: vec![self.magnitude()] }
    }
}

/// One spatial slice per time node. `singular_exponent = Some(b)` records that
/// the field behaves like `s^{-b} g(s, x)` with `g` slowly varying, so that
/// time quadratures can integrate the power factor exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeVectorField {
    pub tgrid: TimeGrid,
    pub slices: Vec<VectorField>,
    pub singular_exponent: Option<f64>,
}

impl SpaceTimeVectorField {
    pub fn new(tgrid: TimeGrid, slices: Vec<VectorField>) -> Result<Self> {
        if slices.len() != tgrid.len() {
            return Err(Error::Grid(format!("{} slices for {} time nodes", slices.len(), tgrid.len())));
        }
        let first = &slices[0];
        if slices.iter().any(|s| s.grid != first.grid || s.ncomp() != first.ncomp()) {
            return Err(Error::Grid("slices differ in grid or arity".into()));
        }
        Ok(SpaceTimeVectorField { tgrid, slices, singular_exponent: None })
    }

    pub fn with_singular_exponent(mut self, b: Option<f64>) -> Self {
        self.singular_exponent = b;
        self
    }

    pub fn grid(&self) -> &SpaceGrid {
        &self.slices[0].grid
    }

    pub fn ncomp(&self) -> usize {
        self.slices[0].ncomp()
    }

    pub fn map_slices(&self, f: impl Fn(&VectorField) -> VectorField) -> Self {
        SpaceTimeVectorField {
            tgrid: self.tgrid.clone(),
            slices: self.slices.iter().map(f).collect(),
            singular_exponent: self.singular_exponent,
        }
    }

    pub fn try_map_slices(&self, f: impl Fn(&VectorField) -> Result<VectorField>) -> Result<Self> {
        Ok(SpaceTimeVectorField {
            tgrid: self.tgrid.clone(),
            slices: self.slices.iter().map(f).collect::<Result<_>>()?,
            singular_exponent: self.singular_exponent,
        })
    }

    /// `self + c * other`; the singular-exponent annotation survives only if both agree.
    pub fn axpy(&self, c: f64, other: &SpaceTimeVectorField) -> Result<Self> {
        if self.tgrid != other.tgrid {
            return Err(Error::Grid("time grids differ".into()));
        }
        let slices = self.slices.iter().zip(&other.slices).map(|(a, b)| a.axpy(c, b)).collect::<Result<_>>()?;
        let singular_exponent =
            if self.singular_exponent == other.singular_exponent { self.singular_exponent } else { None };
        Ok(SpaceTimeVectorField { tgrid: self.tgrid.clone(), slices, singular_exponent })
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map_slices(|s| s.scaled(c))
    }

    pub fn zeros_like(&self) -> Self {
        self.map_slices(|s| VectorField::zeros(&s.grid, s.ncomp())).with_singular_exponent(None)
    }

    pub fn max_abs(&self) -> f64 {
        self.slices.iter().map(VectorField::max_abs).fold(0.0, f64::max)
    }
}

/// Complex spectral coefficients, one array per component.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    pub grid: SpaceGrid,
    pub comps: Vec<Vec<Complex64>>,
}

impl SpectralField {
    pub fn ncomp(&self) -> usize {
        self.comps.len()
    }

    pub fn zeros(grid: &SpaceGrid, ncomp: usize) -> Self {
        SpectralField { grid: grid.clone(), comps: vec![vec![Complex64::new(0.0, 0.0); grid.len()]; ncomp] }
    }

    /// Largest coefficient modulus (vector modulus across components).
    pub fn max_modulus(&self) -> f64 {
        (0..self.grid.len())
            .map(|f| self.comps.iter().map(|c| c[f].norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Applies a real multiplier `m(mode index)` to every component.
    pub fn map_modes(&self, m: impl Fn(usize) -> f64) -> Self {
        let factors: Vec<f64> = (0..self.grid.len()).map(m).collect();
        SpectralField {
            grid: self.grid.clone(),
            comps: self.comps.iter().map(|c| c.iter().zip(&factors).map(|(z, f)| z * f).collect()).collect(),
        }
    }

    /// The zero-mode coefficient norm (vector norm across components).
    pub fn mean_modulus(&self) -> f64 {
        self.comps.iter().map(|c| c[0].norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Separable n-dimensional complex FFT over a row-major array.
pub struct NdFft {
    shape: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl NdFft {
    pub fn new(shape: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        NdFft {
            shape: shape.to_vec(),
            forward: shape.iter().map(|&n| planner.plan_fft_forward(n)).collect(),
            inverse: shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Unnormalised transform in place.
    pub fn process(&self, data: &mut [Complex64], inverse: bool) {
        let total = self.len();
        assert_eq!(data.len(), total);
        let plans = if inverse { &self.inverse } else { &self.forward };
        let mut stride = 1;
        let mut line = Vec::new();
        for a in (0..self.shape.len()).rev() {
            let n = self.shape[a];
            let plan = &plans[a];
            if stride == 1 {
                plan.process(data);
            } else {
                let block = n * stride;
                line.resize(n * stride, Complex64::new(0.0, 0.0));
                for start in (0..total).step_by(block) {
                    // Transpose the block so each line is contiguous.
                    for i in 0..n {
                        for s in 0..stride {
                            line[s * n + i] = data[start + i * stride + s];
                        }
                    }
                    plan.process(&mut line);
                    for i in 0..n {
                        for s in 0..stride {
                            data[start + i * stride + s] = line[s * n + i];
                        }
                    }
                }
            }
            stride *= n;
        }
    }
}

/// Transforms every component; coefficients are normalised by `1/n^d`.
pub fn forward_transform(field: &VectorField) -> Result<SpectralField> {
    if field.comps.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("forward transform input".into()));
    }
    let fft = NdFft::new(&field.grid.shape());
    let scale = 1.0 / field.grid.len() as f64;
    let comps = field
        .comps
        .iter()
        .map(|c| {
            let mut buf: Vec<Complex64> = c.iter().map(|&x| Complex64::new(x, 0.0)).collect();
            fft.process(&mut buf, false);
            buf.iter_mut().for_each(|z| *z *= scale);
            buf
        })
        .collect();
    Ok(SpectralField { grid: field.grid.clone(), comps })
}

/// Inverse of [`forward_transform`]; the (round-off) imaginary part is discarded.
pub fn inverse_transform(spec: &SpectralField) -> Result<VectorField> {
    let fft = NdFft::new(&spec.grid.shape());
    let comps = spec
        .comps
        .iter()
        .map(|c| {
            let mut buf = c.clone();
            fft.process(&mut buf, true);
            buf.iter().map(|z| z.re).collect()
        })
        .collect();
    VectorField::new(spec.grid.clone(), comps)
}

/// `i ξ · û`, a one-component spectrum. Nyquist components of `ξ` are dropped.
pub fn divergence(spec: &SpectralField) -> Result<SpectralField> {
    let d = spec.grid.d;
    if spec.ncomp() != d {
        return Err(Error::Grid(format!("divergence needs {d} components, got {}", spec.ncomp())));
    }
    let wv = spec.grid.wavevectors();
    let out = (0..spec.grid.len())
        .map(|f| {
            let xi = wv.deriv(f);
            let s: Complex64 = (0..d).map(|a| spec.comps[a][f] * xi[a]).sum();
            Complex64::new(-s.im, s.re)
        })
        .collect();
    Ok(SpectralField { grid: spec.grid.clone(), comps: vec![out] })
}

/// Largest `|ξ·û|` and the reference scale `max |ξ||û|`.
pub fn divergence_defect(spec: &SpectralField) -> Result<(f64, f64)> {
    let div = divergence(spec)?;
    let wv = spec.grid.wavevectors();
    let max_div = div.comps[0].iter().map(|z| z.norm()).fold(0.0, f64::max);
    let scale = (0..spec.grid.len())
        .map(|f| {
            let xi: f64 = wv.deriv(f).iter().map(|x| x * x).sum::<f64>().sqrt();
            xi * spec.comps.iter().map(|c| c[f].norm_sqr()).sum::<f64>().sqrt()
        })
        .fold(0.0, f64::max);
    Ok((max_div, scale))
}

/// `max |ξ·û| <= tol · max |ξ||û|`.
pub fn is_divergence_free(spec: &SpectralField, tol: f64) -> Result<bool> {
    let (max_div, scale) = divergence_defect(spec)?;
    Ok(max_div <= tol * scale)
}

const SNAPSHOT_HEADER: usize = 32;

/// Flat little-endian snapshot: `d, n (u64), L (f64), ncomp (u64)`, then each
/// component row-major as `f64`.
pub fn write_snapshot(field: &VectorField, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&(field.grid.d as u64).to_le_bytes())?;
    w.write_all(&(field.grid.n as u64).to_le_bytes())?;
    w.write_all(&field.grid.half_width.to_le_bytes())?;
    w.write_all(&(field.ncomp() as u64).to_le_bytes())?;
    for c in &field.comps {
        for x in c {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<VectorField> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < SNAPSHOT_HEADER {
        return Err(Error::Grid("snapshot too short".into()));
    }
    let word = |i: usize| -> [u8; 8] { bytes[8 * i..8 * i + 8].try_into().expect("8 bytes") };
    let d = u64::from_le_bytes(word(0)) as usize;
    let n = u64::from_le_bytes(word(1)) as usize;
    let l = f64::from_le_bytes(word(2));
    let ncomp = u64::from_le_bytes(word(3)) as usize;
    let grid = SpaceGrid::new(d, n, l)?;
    let len = grid.len();
    if bytes.len() != SNAPSHOT_HEADER + 8 * len * ncomp {
        return Err(Error::Grid("snapshot payload size mismatch".into()));
    }
    let comps = (0..ncomp)
        .map(|c| (0..len).map(|i| f64::from_le_bytes(word(4 + c * len + i))).collect())
        .collect();
    VectorField::new(grid, comps)
}

/// CSV with coordinate columns `x0..` followed by component columns `c0..`.
pub fn write_csv(field: &VectorField, path: &Path) -> Result<()> {
    if field.grid.len() > 1 << 16 {
        return Err(Error::Grid("CSV export is meant for small grids (<= 65536 points)".into()));
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    let header: Vec<String> = (0..field.grid.d)
        .map(|a| format!("x{a}"))
        .chain((0..field.ncomp()).map(|c| format!("c{c}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for f in 0..field.grid.len() {
        let row: Vec<String> = field
            .grid
            .point(f)
            .into_iter()
            .chain(field.comps.iter().map(|c| c[f]))
            .map(|v| format!("{v:e}"))
            .collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid3() -> SpaceGrid {
        SpaceGrid::new(3, 8, 1.5).unwrap()
    }

    fn pseudo_random(grid: &SpaceGrid, ncomp: usize, seed: u64) -> VectorField {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        VectorField::new(grid.clone(), (0..ncomp).map(|_| (0..grid.len()).map(|_| next()).collect()).collect())
            .unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(SpaceGrid::new(3, 6, 1.0).is_err());
        assert!(SpaceGrid::new(3, 2, 1.0).is_err());
        assert!(SpaceGrid::new(3, 8, 0.0).is_err());
        assert!(TimeGrid::new(1.0, 4, 0.5).is_err());
        assert!(TimeGrid::from_nodes(vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn origin_is_a_node() {
        let g = grid3();
        assert_eq!(g.coordinate(g.n / 2), 0.0);
        let f = g.ravel(&[4, 4, 4]);
        assert_eq!(g.point(f), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn graded_nodes() {
        let t = TimeGrid::new(4.0, 4, 2.0).unwrap();
        assert_eq!(t.nodes(), &[0.25, 1.0, 2.25, 4.0]);
        assert_eq!(t.cell(0), (0.0, 0.25));
        let fine = t.refined(4).unwrap();
        for (k, &tk) in t.nodes().iter().enumerate() {
            assert_eq!(fine.nodes()[4 * k + 3], tk);
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        let g = grid3();
        let v = pseudo_random(&g, 3, 7);
        let spec = forward_transform(&v).unwrap();
        let back = inverse_transform(&spec).unwrap();
        for (a, b) in v.comps.iter().flatten().zip(back.comps.iter().flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
        let phys: f64 = v.comps.iter().flatten().map(|x| x * x).sum::<f64>() * g.cell_volume();
        let spectral: f64 =
            spec.comps.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>() * (2.0 * g.half_width).powi(3);
        assert!((phys - spectral).abs() < 1e-12 * phys);
    }

    #[test]
    fn cosine_lives_on_first_harmonic() {
        let g = SpaceGrid::new(2, 16, 2.0).unwrap();
        let vals = (0..g.len()).map(|f| (std::f64::consts::PI * g.point(f)[0] / g.half_width).cos()).collect();
        let spec = forward_transform(&VectorField::scalar(g.clone(), vals).unwrap()).unwrap();
        let mut idx = [0; 2];
        for (f, z) in spec.comps[0].iter().enumerate() {
            g.unravel(f, &mut idx);
            let k = (g.wavenumber(idx[0]), g.wavenumber(idx[1]));
            if k == (1, 0) || k == (-1, 0) {
                assert!((z.norm() - 0.5).abs() < 1e-13);
            } else {
                assert!(z.norm() < 1e-13);
            }
        }
    }

    #[test]
    fn rejects_non_finite() {
        let g = grid3();
        let mut v = VectorField::zeros(&g, 1);
        v.comps[0][3] = f64::NAN;
        assert!(matches!(forward_transform(&v), Err(Error::NonFinite(_))));
        assert!(VectorField::new(g, v.comps).is_err());
    }

    #[test]
    fn single_mode_divergence() {
        let g = SpaceGrid::new(3, 8, 2.0).unwrap();
        let mut spec = SpectralField::zeros(&g, 3);
        let f = g.ravel(&[1, 0, 0]);
        spec.comps[0][f] = Complex64::new(1.0, 0.0);
        spec.comps[1][f] = Complex64::new(1.0, 0.0);
        let div = divergence(&spec).unwrap();
        let expect = Complex64::new(0.0, std::f64::consts::PI / 2.0);
        assert!((div.comps[0][f] - expect).norm() < 1e-15);
        assert!(!is_divergence_free(&spec, 1e-10).unwrap());
    }

    #[test]
    fn snapshot_round_trip() {
        let g = SpaceGrid::new(2, 4, 1.0).unwrap();
        let v = pseudo_random(&g, 2, 3);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.bin");
        write_snapshot(&v, &p).unwrap();
        assert_eq!(read_snapshot(&p).unwrap(), v);
        let c = dir.path().join("f.csv");
        write_csv(&v, &c).unwrap();
        let text = std::fs::read_to_string(c).unwrap();
        assert_eq!(text.lines().count(), 17);
        assert!(text.starts_with("x0,x1,c0,c1"));
    }
}
