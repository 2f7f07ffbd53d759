//! Spectral operators (Leray projection, fractional Laplacian powers) and the
//! parabolic machinery behind the multiplier space: Riesz potentials, the
//! `C_α` cone test and two-sided Morrey bounds.

use std::collections::HashMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{forward_transform, inverse_transform, NdFft, SpaceGrid, SpaceTimeVectorField, SpectralField, TimeGrid, VectorField};
use crate::kernels::require_mean_free;
use crate::norms::{parabolic_morrey_norm, MorreyScan};
use crate::quadrature::{gauss_legendre, integrate};

/// `(I - ξξᵀ/|ξ|²) û` per mode; the zero mode passes through unchanged.
pub fn leray_project(spec: &SpectralField) -> Result<SpectralField> {
    let d = spec.grid.d;
    if spec.ncomp() != d {
        return Err(Error::Grid(format!("Leray projection needs {d} components, got {}", spec.ncomp())));
    }
    let wv = spec.grid.wavevectors();
    let mut out = spec.clone();
    for f in 0..spec.grid.len() {
        let xi = wv.deriv(f);
        let k2: f64 = xi.iter().map(|x| x * x).sum();
        if k2 == 0.0 {
            continue;
        }
        let dot: Complex64 = (0..d).map(|a| spec.comps[a][f] * xi[a]).sum::<Complex64>() / k2;
        for a in 0..d {
            out.comps[a][f] -= dot * xi[a];
        }
    }
    Ok(out)
}

/// Multiplier `|ξ|^s`. For `s > 0` the zero mode is removed; for `s < 0` the
/// input must be mean-free; `s = 0` is the identity.
pub fn fractional_laplacian_power(spec: &SpectralField, s: f64) -> Result<SpectralField> {
    if s == 0.0 {
        return Ok(spec.clone());
    }
    if s < 0.0 {
        require_mean_free(spec)?;
    }
    let wv = spec.grid.wavevectors();
    Ok(spec.map_modes(|f| if wv.norm[f] == 0.0 { 0.0 } else { wv.norm[f].powf(s) }))
}

/// `(-Δ)^{s/2}` applied to one spatial slice.
pub fn spatial_power_slice(field: &VectorField, s: f64) -> Result<VectorField> {
    if s == 0.0 {
        return Ok(field.clone());
    }
    inverse_transform(&fractional_laplacian_power(&forward_transform(field)?, s)?)
}

/// `(-Δ)^{s/2}` applied slice by slice; the singular-exponent tag is kept.
pub fn spatial_power(field: &SpaceTimeVectorField, s: f64) -> Result<SpaceTimeVectorField> {
    field.try_map_slices(|v| spatial_power_slice(v, s))
}

/// Order `s ∈ (0, d+α)` of a parabolic Riesz potential.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RieszConfig {
    pub s: f64,
    pub alpha: f64,
}

/// Spatial offsets (in cells, sup-norm) treated by tensor quadrature over the cell.
const NEAR_CELLS: i64 = 2;

/// `I_s(ψ)(t,x) = ∫∫ |ψ(σ,y)| / (|t-σ|^{1/α} + |x-y|)^{d+α-s} dy dσ` at every node.
///
/// The field is extended by zero outside the box and outside `[0, T]`. Each
/// sample stands for its cell `[t_{j-1}, t_j] × cube`; the kernel is
/// integrated over the time cell adaptively, with the spatial cube treated by
/// its centre, by tensor Gauss points (nearby cells) or, for the cell holding
/// the singularity, by the exact radial integral over the ball of equal volume.
pub fn parabolic_riesz_potential(field: &SpaceTimeVectorField, cfg: &RieszConfig) -> Result<SpaceTimeVectorField> {
    let grid = field.grid().clone();
    let d = grid.d;
    let (s, alpha) = (cfg.s, cfg.alpha);
    if !(s > 0.0 && s < d as f64 + alpha) {
        return Err(Error::Undefined(format!("Riesz order {s} outside (0, d+alpha)")));
    }
    let m = d as f64 + alpha - s;
    let n = grid.n;
    let pad = 2 * n;
    let pshape = vec![pad; d];
    let fft = NdFft::new(&pshape);
    let plen = fft.len();
    let tg = &field.tgrid;
    let nt = tg.len();

    let padded_index = |idx: &[usize]| idx.iter().fold(0, |acc, &i| acc * pad + i);
    let mut bidx = vec![0; d];
    let mut spectra = Vec::with_capacity(nt);
    for slice in &field.slices {
        let mag = slice.magnitude();
        let mut buf = vec![Complex64::new(0.0, 0.0); plen];
        for (f, v) in mag.iter().enumerate() {
            grid.unravel(f, &mut bidx);
            buf[padded_index(&bidx)] = Complex64::new(*v, 0.0);
        }
        fft.process(&mut buf, false);
        spectra.push(buf);
    }

    let weights = RieszWeights::new(&grid, alpha, m, field.singular_exponent);
    let mut kernel_cache: HashMap<(u64, u64, u64), Vec<Complex64>> = HashMap::new();
    let mut out_slices = Vec::with_capacity(nt);
    let mut pidx = vec![0; d];
    for k in 0..nt {
        let tk = tg.nodes()[k];
        let mut acc = vec![Complex64::new(0.0, 0.0); plen];
        for j in 0..nt {
            let (lo, hi) = tg.cell(j);
            let key = (tk.to_bits(), lo.to_bits(), hi.to_bits());
            let kernel = match kernel_cache.get(&key) {
                Some(kv) => kv,
                None => {
                    let mut buf = weights.kernel_grid(tk, lo, hi, tg.nodes()[j], pad)?;
                    fft.process(&mut buf, false);
                    // Lag pattern repeats on uniform grids; keep everything otherwise small.
                    if kernel_cache.len() > 4096 {
                        kernel_cache.clear();
                    }
                    kernel_cache.entry(key).or_insert(buf)
                }
            };
            for ((a, kv), sv) in acc.iter_mut().zip(kernel).zip(&spectra[j]) {
                *a += kv * sv;
            }
        }
        fft.process(&mut acc, true);
        let scale = 1.0 / plen as f64;
        let mut vals = vec![0.0; grid.len()];
        for (f, v) in vals.iter_mut().enumerate() {
            grid.unravel(f, &mut pidx);
            *v = acc[padded_index(&pidx)].re * scale;
        }
        out_slices.push(VectorField::scalar(grid.clone(), vals)?);
    }
    SpaceTimeVectorField::new(tg.clone(), out_slices)
}

/// Cell-integrated Riesz kernel weights.
struct RieszWeights {
    d: usize,
    h: f64,
    alpha: f64,
    m: f64,
    singular: Option<f64>,
    gauss: (Vec<f64>, Vec<f64>),
    radial_rule: (Vec<f64>, Vec<f64>),
    ball_radius: f64,
}

impl RieszWeights {
    fn new(grid: &SpaceGrid, alpha: f64, m: f64, singular: Option<f64>) -> Self {
        let d = grid.d;
        let h = grid.h();
        let unit_ball = std::f64::consts::PI.powf(d as f64 / 2.0) / statrs::function::gamma::gamma(d as f64 / 2.0 + 1.0);
        RieszWeights {
            d,
            h,
            alpha,
            m,
            singular,
            gauss: gauss_legendre(3),
            radial_rule: gauss_legendre(16),
            ball_radius: (grid.cell_volume() / unit_ball).powf(1.0 / d as f64),
        }
    }

    /// `∫_{cell} g(|t_k - σ|^{1/α}) w(σ) dσ` with the sample weight `w`.
    fn time_integral(&self, tk: f64, lo: f64, hi: f64, tj: f64, g: &dyn Fn(f64) -> f64) -> Result<f64> {
        let inv = 1.0 / self.alpha;
        let w = |sig: f64| match self.singular {
            Some(b) => (sig / tj).powf(-b),
            None => 1.0,
        };
        // Integrate in the lag τ = t_k - σ so the singular point is an exact endpoint.
        let f = |tau: f64| g(tau.abs().powf(inv)) * w(tk - tau);
        let (a, b) = (tk - hi, tk - lo);
        let pieces: Vec<(f64, f64)> = if a < 0.0 && 0.0 < b { vec![(a, 0.0), (0.0, b)] } else { vec![(a, b)] };
        let mut total = 0.0;
        for (a, b) in pieces {
            total += integrate(f, a, b, 0.0, 1e-9)?.value;
        }
        Ok(total)
    }

    /// `ω_d ∫_0^R ρ^{d-1} (a + ρ)^{-m} dρ` over the ball of cell volume.
    fn ball_integral(&self, a: f64) -> f64 {
        let (d, m, r) = (self.d, self.m, self.ball_radius);
        let omega = 2.0 * std::f64::consts::PI.powf(d as f64 / 2.0) / statrs::function::gamma::gamma(d as f64 / 2.0);
        if a >= r {
            let rule = &self.radial_rule;
            let mut s = 0.0;
            for (x, w) in rule.0.iter().zip(&rule.1) {
                let rho = 0.5 * r * (1.0 + x);
                s += w * rho.powi(d as i32 - 1) * (a + rho).powf(-m);
            }
            return omega * 0.5 * r * s;
        }
        // Binomial expansion of (u - a)^{d-1} with u = a + ρ.
        let mut s = 0.0;
        let mut binom = 1.0;
        for j in 0..d {
            let e = j as f64 - m + 1.0;
            let piece = if e.abs() < 1e-14 { ((a + r) / a).ln() } else { ((a + r).powf(e) - a.powf(e)) / e };
            s += binom * (-a).powi((d - 1 - j) as i32) * piece;
            binom = binom * (d - 1 - j) as f64 / (j + 1) as f64;
        }
        omega * s
    }

    /// Kernel weights on the padded periodic lattice for one (output node, cell) pair.
    fn kernel_grid(&self, tk: f64, lo: f64, hi: f64, tj: f64, pad: usize) -> Result<Vec<Complex64>> {
        let d = self.d;
        let h = self.h;
        let vol = h.powi(d as i32);
        let m = self.m;
        let len = pad.pow(d as u32);
        let mut out = vec![Complex64::new(0.0, 0.0); len];
        let half = pad as i64 / 2;
        // Smallest lag in the cell decides whether the near field needs care.
        let min_lag = if lo <= tk && tk <= hi { 0.0 } else { (tk - lo).abs().min((tk - hi).abs()) };
        let near_needed = min_lag.powf(1.0 / self.alpha) < (NEAR_CELLS as f64 + 1.0) * h;

        let mut by_shell: HashMap<i64, f64> = HashMap::new();
        let mut off = vec![0i64; d];
        for (f, slot) in out.iter_mut().enumerate() {
            let mut rem = f;
            for a in (0..d).rev() {
                let i = (rem % pad) as i64;
                rem /= pad;
                off[a] = if i >= half { i - pad as i64 } else { i };
            }
            let sup = off.iter().map(|o| o.abs()).max().unwrap_or(0);
            let r2: i64 = off.iter().map(|o| o * o).sum();
            let w = if r2 == 0 {
                self.time_integral(tk, lo, hi, tj, &|a| self.ball_integral(a))?
            } else if near_needed && sup <= NEAR_CELLS {
                self.cube_weight(tk, lo, hi, tj, &off)?
            } else {
                match by_shell.get(&r2) {
                    Some(v) => *v,
                    None => {
                        let rho = (r2 as f64).sqrt() * h;
                        let v = vol * self.time_integral(tk, lo, hi, tj, &|a| (a + rho).powf(-m))?;
                        by_shell.insert(r2, v);
                        v
                    }
                }
            };
            *slot = Complex64::new(w, 0.0);
        }
        Ok(out)
    }

    /// Tensor Gauss quadrature over the cube centred at lattice offset `off`.
    fn cube_weight(&self, tk: f64, lo: f64, hi: f64, tj: f64, off: &[i64]) -> Result<f64> {
        let d = self.d;
        let h = self.h;
        let m = self.m;
        let (xs, ws) = &self.gauss;
        let q = xs.len();
        let mut total = 0.0;
        for p in 0..q.pow(d as u32) {
            let mut rem = p;
            let mut r2 = 0.0;
            let mut wprod = 1.0;
            for &o in off.iter().take(d) {
                let i = rem % q;
                rem /= q;
                let y = (o as f64 + 0.5 * xs[i]) * h;
                r2 += y * y;
                wprod *= 0.5 * ws[i] * h;
            }
            let rho = r2.sqrt();
            total += wprod * self.time_integral(tk, lo, hi, tj, &|a| (a + rho).powf(-m))?;
        }
        Ok(total)
    }
}

/// Outcome of the cone test `I_{α-1}(v²) ≤ v`.
#[derive(Clone, Debug)]
pub struct CalphaReport {
    /// `max(I_{α-1}(v²) - v)`, negative when there is room to spare.
    pub max_violation: f64,
    /// `v - I_{α-1}(v²)` at every node.
    pub margin_field: SpaceTimeVectorField,
    pub member: bool,
    pub tol: f64,
}

/// Membership of a non-negative scalar field in `C_α` (constant one in the cone inequality).
pub fn calpha_margin(v: &SpaceTimeVectorField, alpha: f64, tol: f64) -> Result<CalphaReport> {
    if v.ncomp() != 1 {
        return Err(Error::Grid("cone test takes a scalar field".into()));
    }
    let min = v.slices.iter().flat_map(|s| s.comps[0].iter()).cloned().fold(f64::INFINITY, f64::min);
    if min < 0.0 {
        return Err(Error::Negative(min));
    }
    let sq = scalar_map(v, |s| s.comps[0].iter().map(|x| x * x).collect())
        .with_singular_exponent(v.singular_exponent.map(|b| 2.0 * b));
    let lhs = parabolic_riesz_potential(&sq, &RieszConfig { s: alpha - 1.0, alpha })?;
    let margin_field = v.axpy(-1.0, &lhs)?;
    let max_violation = margin_field
        .slices
        .iter()
        .flat_map(|s| s.comps[0].iter())
        .map(|x| -x)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(CalphaReport { max_violation, member: max_violation <= tol, margin_field, tol })
}

fn scalar_map(field: &SpaceTimeVectorField, f: impl Fn(&VectorField) -> Vec<f64>) -> SpaceTimeVectorField {
    SpaceTimeVectorField {
        tgrid: field.tgrid.clone(),
        slices: field.slices.iter().map(|s| VectorField { grid: s.grid.clone(), comps: vec![f(s)] }).collect(),
        singular_exponent: field.singular_exponent,
    }
}

/// Scalar space-time field `|ψ|` of a vector field.
pub fn magnitude_field(field: &SpaceTimeVectorField) -> SpaceTimeVectorField {
    scalar_map(field, VectorField::magnitude)
}

/// Pointwise product of two scalar fields on the same grids.
pub fn product_field(a: &SpaceTimeVectorField, b: &SpaceTimeVectorField) -> Result<SpaceTimeVectorField> {
    if a.tgrid != b.tgrid || a.grid() != b.grid() {
        return Err(Error::Grid("product of fields on different grids".into()));
    }
    let slices = a
        .slices
        .iter()
        .zip(&b.slices)
        .map(|(x, y)| {
            let mx = x.magnitude();
            let my = y.magnitude();
            VectorField::scalar(x.grid.clone(), mx.iter().zip(&my).map(|(p, q)| p * q).collect())
        })
        .collect::<Result<_>>()?;
    let singular_exponent = match (a.singular_exponent, b.singular_exponent) {
        (Some(p), Some(q)) => Some(p + q),
        (Some(p), None) | (None, Some(p)) => Some(p),
        (None, None) => None,
    };
    Ok(SpaceTimeVectorField { tgrid: a.tgrid.clone(), slices, singular_exponent })
}

/// Unused by the estimators but convenient for building test fields.
pub fn constant_field(grid: &SpaceGrid, tgrid: &TimeGrid, value: f64) -> Result<SpaceTimeVectorField> {
    let slice = VectorField::scalar(grid.clone(), vec![value; grid.len()])?;
    SpaceTimeVectorField::new(tgrid.clone(), vec![slice; tgrid.len()])
}

/// Which multiplier-space quantity the sandwich bounds refer to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValphaTarget {
    Valpha,
    /// Bounds for `I_{α-1}(|(-Δ)^{-1/2} f|)`.
    ValphaInverse,
}

/// Morrey surrogates on either side of a multiplier norm. These are
/// comparisons up to unspecified constants, not norm values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValphaBounds {
    /// `M^{2,(d+α)/(α-1)}_α` quantity; the multiplier norm dominates it.
    pub lower: f64,
    /// `M^{p1,(d+α)/(α-1)}_α` quantity; it dominates the multiplier norm.
    pub upper: f64,
    pub target: ValphaTarget,
    /// `lower ≤ |Q_1|^{1/2-1/p1} upper` up to 5%, the Hölder relation between the two sides.
    pub consistent: bool,
    /// For the force side: `‖ |(-Δ)^{-1/2} f| ‖_{M^{1,q/2}_α}`, finite for every force in the space.
    pub root_necessary: Option<f64>,
}

/// Measure of the unit parabolic cylinder `{|t|^{1/α} + |x| < 1}` in `ℝ × ℝ^d`.
pub fn unit_cylinder_measure(d: usize, alpha: f64) -> f64 {
    use statrs::function::gamma::{gamma, ln_gamma};
    let ball = std::f64::consts::PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0 + 1.0);
    let beta = (ln_gamma(alpha) + ln_gamma(d as f64 + 1.0) - ln_gamma(alpha + d as f64 + 1.0)).exp();
    2.0 * ball * alpha * beta
}

pub fn valpha_sandwich_bounds(
    field: &SpaceTimeVectorField,
    target: ValphaTarget,
    p1: f64,
    alpha: f64,
    scan: &MorreyScan,
) -> Result<ValphaBounds> {
    let d = field.grid().d as f64;
    if !(p1 > 2.0 && p1 <= d + alpha) {
        return Err(Error::InvalidParams(format!("sandwich bounds need 2 < p1 <= d+alpha, got {p1}")));
    }
    let q = (d + alpha) / (alpha - 1.0);
    let (g, root_necessary) = match target {
        ValphaTarget::Valpha => (magnitude_field(field), None),
        ValphaTarget::ValphaInverse => {
            let h = magnitude_field(&spatial_power(field, -1.0)?);
            let root = parabolic_morrey_norm(&h, alpha, 1.0, q / 2.0, scan)?.value;
            (parabolic_riesz_potential(&h, &RieszConfig { s: alpha - 1.0, alpha })?, Some(root))
        }
    };
    let lower = parabolic_morrey_norm(&g, alpha, 2.0, q, scan)?.value;
    let upper = parabolic_morrey_norm(&g, alpha, p1, q, scan)?.value;
    let holder = unit_cylinder_measure(field.grid().d, alpha).powf(0.5 - 1.0 / p1);
    Ok(ValphaBounds { lower, upper, target, consistent: lower <= 1.05 * holder * upper, root_necessary })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_with(grid: &SpaceGrid, k: [usize; 3], v: [f64; 3]) -> SpectralField {
        let mut s = SpectralField::zeros(grid, 3);
        let f = grid.ravel(&k);
        for a in 0..3 {
            s.comps[a][f] = Complex64::new(v[a], 0.0);
        }
        s
    }

    #[test]
    fn projection_of_oblique_mode() {
        let g = SpaceGrid::new(3, 8, 2.0).unwrap();
        let s = spec_with(&g, [1, 0, 0], [1.0, 1.0, 0.0]);
        let p = leray_project(&s).unwrap();
        let f = g.ravel(&[1, 0, 0]);
        assert!((p.comps[0][f]).norm() < 1e-15);
        assert!((p.comps[1][f] - 1.0).norm() < 1e-15);
    }

    #[test]
    fn zero_mode_passes_through() {
        let g = SpaceGrid::new(3, 8, 2.0).unwrap();
        let s = spec_with(&g, [0, 0, 0], [1.0, -2.0, 3.0]);
        assert_eq!(leray_project(&s).unwrap(), s);
    }

    #[test]
    fn negative_power_needs_mean_free() {
        let g = SpaceGrid::new(1, 8, 1.0).unwrap();
        let v = VectorField::scalar(g.clone(), vec![1.0; 8]).unwrap();
        let s = forward_transform(&v).unwrap();
        assert!(matches!(fractional_laplacian_power(&s, -0.5), Err(Error::NonzeroMean { .. })));
        let out = inverse_transform(&fractional_laplacian_power(&s, 0.5).unwrap()).unwrap();
        assert!(out.max_abs() < 1e-15);
    }

    #[test]
    fn ball_integral_closed_form_matches_quadrature() {
        let g = SpaceGrid::new(3, 8, 1.0).unwrap();
        let w = RieszWeights::new(&g, 1.5, 4.0, None);
        for a in [1e-3, 0.05, 0.2] {
            let r = w.ball_radius;
            let q = integrate(|rho| rho * rho * (a + rho).powf(-4.0), 0.0, r, 0.0, 1e-13).unwrap().value;
            let exact = 4.0 * std::f64::consts::PI * q;
            assert!((w.ball_integral(a) / exact - 1.0).abs() < 1e-9, "a = {a}");
        }
    }

    #[test]
    fn riesz_of_zero_is_zero() {
        let g = SpaceGrid::new(1, 16, 1.0).unwrap();
        let tg = TimeGrid::uniform(1.0, 4).unwrap();
        let z = constant_field(&g, &tg, 0.0).unwrap();
        let out = parabolic_riesz_potential(&z, &RieszConfig { s: 0.5, alpha: 1.5 }).unwrap();
        assert_eq!(out.max_abs(), 0.0);
    }

    #[test]
    fn riesz_order_range() {
        let g = SpaceGrid::new(1, 16, 1.0).unwrap();
        let tg = TimeGrid::uniform(1.0, 4).unwrap();
        let z = constant_field(&g, &tg, 1.0).unwrap();
        assert!(parabolic_riesz_potential(&z, &RieszConfig { s: 2.5, alpha: 1.5 }).is_err());
        assert!(parabolic_riesz_potential(&z, &RieszConfig { s: 0.0, alpha: 1.5 }).is_err());
    }

    #[test]
    fn cone_test_rejects_negative_fields() {
        let g = SpaceGrid::new(1, 16, 1.0).unwrap();
        let tg = TimeGrid::uniform(1.0, 4).unwrap();
        let v = constant_field(&g, &tg, -1.0).unwrap();
        assert!(matches!(calpha_margin(&v, 1.5, 0.0), Err(Error::Negative(_))));
        let z = constant_field(&g, &tg, 0.0).unwrap();
        assert!(calpha_margin(&z, 1.5, 0.0).unwrap().member);
    }
}
