//! Mild solutions by Picard iteration on
//! `u = p_t ∗ u₀ - ∫₀ᵗ p_{t-s} ∗ P div(u⊗u) ds + ∫₀ᵗ p_{t-s} ∗ P f ds`.

use std::collections::HashMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    divergence_defect, forward_transform, inverse_transform, SpaceGrid, SpaceTimeVectorField, SpectralField, TimeGrid,
    VectorField,
};
use crate::kernels::apply_semigroup;
use crate::norms::{linfty_alpha_norm, parabolic_morrey_norm, MorreyScan};
use crate::operators::leray_project;
use crate::quadrature::integrate;

/// Relative divergence tolerance for initial data.
pub const DIV_TOL: f64 = 1e-8;

/// Time quadrature for the Duhamel integrals. The semigroup factor is always
/// integrated exactly; the source is frozen per cell (rectangle) or
/// interpolated linearly between nodes (trapezoid). Sources carrying a
/// singular power always use the rectangle rule with the power integrated
/// exactly.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeRule {
    #[default]
    Rectangle,
    Trapezoid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormChoice {
    LinftyAlpha,
    Morrey { p1: f64, scan: MorreyScan },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub alpha: f64,
    pub tgrid: TimeGrid,
    pub max_iters: usize,
    pub stop_tol: f64,
    #[serde(default = "linfty")]
    pub norm: NormChoice,
    #[serde(default)]
    pub rule: TimeRule,
}

fn linfty() -> NormChoice {
    NormChoice::LinftyAlpha
}

impl SolveConfig {
    pub fn new(alpha: f64, tgrid: TimeGrid) -> Self {
        SolveConfig { alpha, tgrid, max_iters: 50, stop_tol: 1e-10, norm: NormChoice::LinftyAlpha, rule: TimeRule::Rectangle }
    }

    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.stop_tol > 0.0) {
            return Err(Error::Config("stop_tol must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return Err(Error::InvalidParams(format!("alpha = {} outside (0, 2]", self.alpha)));
        }
        Ok(())
    }

    fn norm_of(&self, u: &SpaceTimeVectorField) -> Result<f64> {
        match &self.norm {
            NormChoice::LinftyAlpha => Ok(linfty_alpha_norm(u, self.alpha).value),
            NormChoice::Morrey { p1, scan } => {
                let d = u.grid().d as f64;
                let q = (d + self.alpha) / (self.alpha - 1.0);
                Ok(parabolic_morrey_norm(u, self.alpha, *p1, q, scan)?.value)
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    /// Norm of each iterate, the seed first.
    pub iterate_norms: Vec<f64>,
    /// `‖u^{n+1} - u^n‖ / ‖u^n - u^{n-1}‖`.
    pub contraction_factors: Vec<f64>,
    /// Successive differences `‖u^{n+1} - u^n‖`.
    pub differences: Vec<f64>,
    /// `‖u - (U₀ + F - B(u,u))‖ / ‖u‖` (absolute when `u = 0`).
    pub residual: f64,
    pub converged: bool,
    /// Iterates grew past ten times the seed.
    pub non_contraction: bool,
    pub iterations: usize,
    /// `‖p_t ∗ u₀‖`, `‖F‖`, `‖B(u,u)‖` in the chosen norm.
    pub heat_norm: f64,
    pub force_norm: f64,
    pub bilinear_norm: f64,
    #[serde(skip)]
    pub final_field: SpaceTimeVectorField,
}

/// `p_{t_k} ∗ u₀` at every node.
pub fn heat_term(u0: &VectorField, tgrid: &TimeGrid, alpha: f64) -> Result<SpaceTimeVectorField> {
    let spec = forward_transform(u0)?;
    if spec.ncomp() == spec.grid.d {
        let (div, scale) = divergence_defect(&spec)?;
        if div > DIV_TOL * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::NotDivergenceFree { max_div: div, tol: DIV_TOL * scale });
        }
    }
    let slices = tgrid
        .nodes()
        .iter()
        .map(|&t| inverse_transform(&apply_semigroup(&spec, t, alpha)?))
        .collect::<Result<Vec<_>>>()?;
    SpaceTimeVectorField::new(tgrid.clone(), slices)
}

/// `∫₀^{t_k} p_{t_k-s} ∗ P f(s) ds`.
pub fn duhamel_force_term(f: &SpaceTimeVectorField, alpha: f64, rule: TimeRule) -> Result<SpaceTimeVectorField> {
    let sources = f.slices.iter().map(|s| leray_project(&forward_transform(s)?)).collect::<Result<Vec<_>>>()?;
    let w = DuhamelWeights::new(f.grid(), &f.tgrid, alpha, f.singular_exponent, rule)?;
    w.apply(&sources)
}

/// `∫₀^{t_k} p_{t_k-s} ∗ P div(u⊗u)(s) ds`.
pub fn duhamel_bilinear_term(u: &SpaceTimeVectorField, alpha: f64, rule: TimeRule) -> Result<SpaceTimeVectorField> {
    let w = DuhamelWeights::new(u.grid(), &u.tgrid, alpha, u.singular_exponent.map(|b| 2.0 * b), rule)?;
    let sources = u.slices.iter().map(projected_divergence_of_product).collect::<Result<Vec<_>>>()?;
    w.apply(&sources)
}

/// Spectrum of `div(u⊗u)`, contracted with the derivative wavevectors.
fn divergence_of_product(u: &VectorField) -> Result<SpectralField> {
    let d = u.grid.d;
    if u.ncomp() != d {
        return Err(Error::Grid(format!("velocity needs {d} components, got {}", u.ncomp())));
    }
    let wv = u.grid.wavevectors();
    let mut out = SpectralField::zeros(&u.grid, d);
    for a in 0..d {
        for b in a..d {
            let prod: Vec<f64> = u.comps[a].iter().zip(&u.comps[b]).map(|(x, y)| x * y).collect();
            let t = forward_transform(&VectorField::scalar(u.grid.clone(), prod)?)?;
            for f in 0..u.grid.len() {
                let xi = wv.deriv(f);
                let v = t.comps[0][f] * Complex64::new(0.0, 1.0);
                out.comps[a][f] += v * xi[b];
                if a != b {
                    out.comps[b][f] += v * xi[a];
                }
            }
        }
    }
    Ok(out)
}

fn projected_divergence_of_product(u: &VectorField) -> Result<SpectralField> {
    leray_project(&divergence_of_product(u)?)
}

/// Exact Duhamel weights per wavenumber shell `|k|²`.
struct DuhamelWeights {
    grid: SpaceGrid,
    tgrid: TimeGrid,
    nt: usize,
    /// Shell of every flat mode.
    mode_shell: Vec<usize>,
    nshell: usize,
    /// `[k][j][shell]`, zero for `j > k`.
    w: Vec<f64>,
}

impl DuhamelWeights {
    fn new(grid: &SpaceGrid, tg: &TimeGrid, alpha: f64, singular: Option<f64>, rule: TimeRule) -> Result<Self> {
        if let Some(b) = singular {
            if b >= 1.0 {
                return Err(Error::Undefined(format!("source power s^-{b} is not integrable at 0")));
            }
        }
        let wv = grid.wavevectors();
        let mut ids: HashMap<u64, usize> = HashMap::new();
        let mut lambdas = Vec::new();
        let mode_shell = (0..grid.len())
            .map(|f| {
                *ids.entry(wv.k2[f]).or_insert_with(|| {
                    lambdas.push(wv.norm[f].powf(alpha));
                    lambdas.len() - 1
                })
            })
            .collect();
        let nshell = lambdas.len();
        let nt = tg.len();
        let nodes = tg.nodes();
        let mut w = vec![0.0; nt * nt * nshell];
        for k in 0..nt {
            let t = nodes[k];
            for j in 0..=k {
                let (a, b) = tg.cell(j);
                for (s, &lam) in lambdas.iter().enumerate() {
                    let idx = |jj: usize| (k * nt + jj) * nshell + s;
                    match (singular, rule) {
                        (Some(e), _) if e != 0.0 => w[idx(j)] += singular_cell_weight(t, a, b, nodes[j], e, lam)?,
                        (_, TimeRule::Trapezoid) if j > 0 => {
                            let (left, right) = trapezoid_cell_weights(t, a, b, lam);
                            w[idx(j - 1)] += left;
                            w[idx(j)] += right;
                        }
                        _ => w[idx(j)] += rectangle_cell_weight(t, a, b, lam),
                    }
                }
            }
        }
        Ok(DuhamelWeights { grid: grid.clone(), tgrid: tg.clone(), nt, mode_shell, nshell, w })
    }

    fn apply(&self, sources: &[SpectralField]) -> Result<SpaceTimeVectorField> {
        let nc = sources[0].ncomp();
        let len = self.grid.len();
        let mut slices = Vec::with_capacity(self.nt);
        for k in 0..self.nt {
            let mut acc = SpectralField::zeros(&self.grid, nc);
            for (j, src) in sources.iter().enumerate().take(k + 1) {
                let row = &self.w[(k * self.nt + j) * self.nshell..(k * self.nt + j + 1) * self.nshell];
                for c in 0..nc {
                    let (a, s) = (&mut acc.comps[c], &src.comps[c]);
                    for f in 0..len {
                        a[f] += s[f] * row[self.mode_shell[f]];
                    }
                }
            }
            slices.push(inverse_transform(&acc)?);
        }
        SpaceTimeVectorField::new(self.tgrid.clone(), slices)
    }
}

/// `(1 - e^{-x}) / x`.
fn phi1(x: f64) -> f64 {
    if x < 1e-8 {
        1.0 - 0.5 * x
    } else {
        -(-x).exp_m1() / x
    }
}

/// `(1 - e^{-x}(1 + x)) / x²`.
fn phi2(x: f64) -> f64 {
    if x < 1e-3 {
        0.5 - x / 3.0 + x * x / 8.0 - x * x * x / 30.0
    } else {
        (-(-x).exp_m1() - x * (-x).exp()) / (x * x)
    }
}

/// `∫_a^b e^{-(t-s)λ} ds`.
fn rectangle_cell_weight(t: f64, a: f64, b: f64, lam: f64) -> f64 {
    let delta = b - a;
    (-(t - b) * lam).exp() * delta * phi1(lam * delta)
}

/// Weights of the values at `a` and `b` for the linear interpolant on `[a, b]`.
fn trapezoid_cell_weights(t: f64, a: f64, b: f64, lam: f64) -> (f64, f64) {
    let delta = b - a;
    let x = lam * delta;
    let e = (-(t - b) * lam).exp() * delta;
    let left = e * phi2(x);
    (left, e * phi1(x) - left)
}

/// `∫_a^b e^{-(t-s)λ} (s/t_j)^{-e} ds`, integrated in `u = s^{1-e}`.
fn singular_cell_weight(t: f64, a: f64, b: f64, tj: f64, e: f64, lam: f64) -> Result<f64> {
    let g = 1.0 - e;
    let (ua, ub) = (a.powf(g), b.powf(g));
    let f = |u: f64| (-(t - u.powf(1.0 / g)) * lam).exp();
    let est = integrate(f, ua, ub, 0.0, 1e-12)?;
    Ok(tj.powf(e) / g * est.value)
}

/// Picard iteration from the seed `U₀ + F`.
pub fn picard_solve(u0: &VectorField, f: Option<&SpaceTimeVectorField>, cfg: &SolveConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let heat = heat_term(u0, &cfg.tgrid, cfg.alpha)?;
    let force = match f {
        Some(f) => {
            if f.tgrid != cfg.tgrid || f.grid() != &u0.grid {
                return Err(Error::Grid("force and solver grids differ".into()));
            }
            Some(duhamel_force_term(f, cfg.alpha, cfg.rule)?)
        }
        None => None,
    };
    let linear = match &force {
        Some(fr) => heat.axpy(1.0, fr)?,
        None => heat.clone(),
    };
    let heat_norm = cfg.norm_of(&heat)?;
    let force_norm = match &force {
        Some(fr) => cfg.norm_of(fr)?,
        None => 0.0,
    };
    let seed_norm = cfg.norm_of(&linear)?;
    let mut u = linear.clone();
    let mut iterate_norms = vec![seed_norm];
    let mut differences = Vec::new();
    let mut contraction_factors = Vec::new();
    let mut converged = false;
    let mut non_contraction = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        let b = duhamel_bilinear_term(&u, cfg.alpha, cfg.rule)?;
        let next = linear.axpy(-1.0, &b)?;
        let diff = cfg.norm_of(&next.axpy(-1.0, &u)?)?;
        let norm = cfg.norm_of(&next)?;
        if let Some(&prev) = differences.last() {
            contraction_factors.push(if prev > 0.0 { diff / prev } else { 0.0 });
        }
        differences.push(diff);
        iterate_norms.push(norm);
        u = next;
        if !norm.is_finite() || norm > 10.0 * seed_norm.max(f64::MIN_POSITIVE) {
            non_contraction = true;
            break;
        }
        if diff <= cfg.stop_tol * norm || diff == 0.0 {
            converged = true;
            break;
        }
    }
    let b = duhamel_bilinear_term(&u, cfg.alpha, cfg.rule)?;
    let bilinear_norm = cfg.norm_of(&b)?;
    let defect = cfg.norm_of(&u.axpy(-1.0, &linear.axpy(-1.0, &b)?)?)?;
    let un = cfg.norm_of(&u)?;
    let residual = if un > 0.0 { defect / un } else { defect };
    Ok(SolveReport {
        iterate_norms,
        contraction_factors,
        differences,
        residual,
        converged,
        non_contraction,
        iterations,
        heat_norm,
        force_norm,
        bilinear_norm,
        final_field: u,
    })
}

/// Pressure from `(-Δ)p = div(div(u⊗u) - f)`, mean-free gauge.
pub fn recover_pressure(u: &SpaceTimeVectorField, f: Option<&SpaceTimeVectorField>) -> Result<SpaceTimeVectorField> {
    if let Some(f) = f {
        if f.tgrid != u.tgrid || f.grid() != u.grid() {
            return Err(Error::Grid("force and velocity grids differ".into()));
        }
    }
    let grid = u.grid().clone();
    let wv = grid.wavevectors();
    let mut slices = Vec::with_capacity(u.tgrid.len());
    for (k, slice) in u.slices.iter().enumerate() {
        let mut g = divergence_of_product(slice)?;
        if let Some(f) = f {
            let fs = forward_transform(&f.slices[k])?;
            for (gc, fc) in g.comps.iter_mut().zip(&fs.comps) {
                for (x, y) in gc.iter_mut().zip(fc) {
                    *x -= y;
                }
            }
        }
        let mut p = SpectralField::zeros(&grid, 1);
        for fl in 0..grid.len() {
            let xi = wv.deriv(fl);
            let k2: f64 = xi.iter().map(|x| x * x).sum();
            if k2 == 0.0 {
                continue;
            }
            let dot: Complex64 = (0..grid.d).map(|a| g.comps[a][fl] * xi[a]).sum();
            p.comps[0][fl] = Complex64::new(0.0, 1.0) * dot / k2;
        }
        slices.push(inverse_transform(&p)?);
    }
    SpaceTimeVectorField::new(u.tgrid.clone(), slices)
}

/// `∫₀ᵗ (t-s)^{-a} s^{-b} ds = t^{1-a-b} B(1-a, 1-b)`.
pub fn duhamel_time_integral(a: f64, b: f64, t: f64) -> Result<f64> {
    if !(a < 1.0 && b < 1.0) {
        return Err(Error::Undefined(format!("(t-s)^-{a} s^-{b} is not integrable on (0, t)")));
    }
    if !(t > 0.0) {
        return Err(Error::NegativeTime(t));
    }
    use statrs::function::gamma::ln_gamma;
    let ln_beta = ln_gamma(1.0 - a) + ln_gamma(1.0 - b) - ln_gamma(2.0 - a - b);
    Ok(t.powf(1.0 - a - b) * ln_beta.exp())
}

/// The same integral by adaptive quadrature, split at `t/2`. Each half is
/// substituted `s = u^{1/(1-b)}` (or `t - s = u^{1/(1-a)}`) so that the
/// endpoint power disappears and the integrand is smooth.
pub fn duhamel_time_integral_quadrature(a: f64, b: f64, t: f64) -> Result<f64> {
    if !(a < 1.0 && b < 1.0) {
        return Err(Error::Undefined(format!("(t-s)^-{a} s^-{b} is not integrable on (0, t)")));
    }
    if !(t > 0.0) {
        return Err(Error::NegativeTime(t));
    }
    let h = 0.5 * t;
    let half = |e: f64, other: f64| -> Result<f64> {
        let g = 1.0 - e;
        let f = |u: f64| (t - u.powf(1.0 / g)).powf(-other) / g;
        Ok(integrate(f, 0.0, h.powf(g), 0.0, 1e-14)?.value)
    };
    Ok(half(b, a)? + half(a, b)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_weights_sum_to_rectangle() {
        for lam in [0.0, 1e-6, 0.3, 40.0] {
            let (l, r) = trapezoid_cell_weights(2.0, 0.5, 1.0, lam);
            assert!((l + r - rectangle_cell_weight(2.0, 0.5, 1.0, lam)).abs() < 1e-15);
        }
        let (l, r) = trapezoid_cell_weights(1.0, 0.0, 1.0, 0.0);
        assert_eq!((l, r), (0.5, 0.5));
    }

    #[test]
    fn trapezoid_weights_reproduce_linear_sources() {
        // ∫_a^b e^{-(t-s)λ} s ds against the weights applied to s = a, b.
        let (t, a, b, lam) = (1.5, 0.25, 1.0, 2.0);
        let exact = integrate(|s| (-(t - s) * lam).exp() * s, a, b, 0.0, 1e-14).unwrap().value;
        let (l, r) = trapezoid_cell_weights(t, a, b, lam);
        assert!((l * a + r * b - exact).abs() < 1e-14);
    }

    #[test]
    fn singular_weight_without_semigroup() {
        // ∫_0^1 (s/1)^{-1/2} ds = 2.
        let w = singular_cell_weight(1.0, 0.0, 1.0, 1.0, 0.5, 0.0).unwrap();
        assert!((w - 2.0).abs() < 1e-12);
    }

    #[test]
    fn beta_values() {
        assert!((duhamel_time_integral(0.0, 0.0, 3.0).unwrap() - 3.0).abs() < 1e-12);
        assert!((duhamel_time_integral(0.5, 0.5, 1.0).unwrap() - std::f64::consts::PI).abs() < 1e-12);
        assert!(duhamel_time_integral(1.0, 0.2, 1.0).is_err());
    }
}
