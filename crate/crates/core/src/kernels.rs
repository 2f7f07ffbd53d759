//! The fractional heat semigroup `exp(-t|ξ|^α)`, its kernel `p_t` in physical
//! space, and kernels `K_t = σ(D) p_t` for homogeneous symbols `σ`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{inverse_transform, SpaceGrid, SpectralField, VectorField};
use crate::quadrature::integrate;

/// Multiplier `exp(-t|ξ|^α)` applied to every component.
pub fn apply_semigroup(spec: &SpectralField, t: f64, alpha: f64) -> Result<SpectralField> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(spec.clone());
    }
    let wv = spec.grid.wavevectors();
    Ok(spec.map_modes(|f| (-t * wv.norm[f].powf(alpha)).exp()))
}

/// Classical heat multiplier `exp(-t|ξ|²)`.
pub fn apply_heat(spec: &SpectralField, t: f64) -> Result<SpectralField> {
    apply_semigroup(spec, t, 2.0)
}

fn check_time(t: f64) -> Result<()> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeTime(t));
    }
    Ok(())
}

/// A symbol homogeneous on `ℝ^d \ {0}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SymbolSpec {
    /// `|ξ|^s`.
    Power { s: f64 },
    /// `ξ_j / |ξ|`.
    ComponentRatio { j: usize },
    Product { factors: Vec<SymbolSpec> },
}

impl SymbolSpec {
    pub fn degree(&self) -> f64 {
        match self {
            SymbolSpec::Power { s } => *s,
            SymbolSpec::ComponentRatio { .. } => 0.0,
            SymbolSpec::Product { factors } => factors.iter().map(SymbolSpec::degree).sum(),
        }
    }

    pub fn is_radial(&self) -> bool {
        match self {
            SymbolSpec::Power { .. } => true,
            SymbolSpec::ComponentRatio { .. } => false,
            SymbolSpec::Product { factors } => factors.iter().all(SymbolSpec::is_radial),
        }
    }

    /// `true` when the symbol is identically one.
    fn is_identity(&self) -> bool {
        match self {
            SymbolSpec::Power { s } => *s == 0.0,
            SymbolSpec::ComponentRatio { .. } => false,
            SymbolSpec::Product { factors } => factors.iter().all(SymbolSpec::is_identity),
        }
    }

    /// Odd symbols have purely imaginary kernels.
    fn is_odd(&self) -> bool {
        match self {
            SymbolSpec::Power { .. } => false,
            SymbolSpec::ComponentRatio { .. } => true,
            SymbolSpec::Product { factors } => factors.iter().filter(|f| f.is_odd()).count() % 2 == 1,
        }
    }

    /// Value at a nonzero wavevector.
    pub fn eval(&self, xi: &[f64], norm: f64) -> f64 {
        match self {
            SymbolSpec::Power { s } => norm.powf(*s),
            SymbolSpec::ComponentRatio { j } => xi[*j] / norm,
            SymbolSpec::Product { factors } => factors.iter().map(|f| f.eval(xi, norm)).product(),
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        match self {
            SymbolSpec::ComponentRatio { j } if *j >= d => {
                Err(Error::Undefined(format!("component {j} in dimension {d}")))
            }
            SymbolSpec::Product { factors } => factors.iter().try_for_each(|f| f.validate(d)),
            _ if self.degree() <= -(d as f64) => {
                Err(Error::Undefined(format!("symbol degree {} <= -d", self.degree())))
            }
            _ => Ok(()),
        }
    }
}

/// Multiplier `σ(ξ) exp(-t|ξ|^α)`. Symbols of negative degree need a mean-free
/// input; at `ξ = 0` a degree-zero symbol other than `1` is set to zero.
pub fn apply_homogeneous_symbol_kernel(
    spec: &SpectralField,
    sym: &SymbolSpec,
    t: f64,
    alpha: f64,
) -> Result<SpectralField> {
    check_time(t)?;
    sym.validate(spec.grid.d)?;
    if sym.degree() < 0.0 {
        require_mean_free(spec)?;
    }
    let wv = spec.grid.wavevectors();
    let at_zero = if sym.is_identity() { 1.0 } else { 0.0 };
    Ok(spec.map_modes(|f| {
        let k = wv.norm[f];
        if k == 0.0 {
            at_zero
        } else {
            sym.eval(wv.xi(f), k) * (-t * k.powf(alpha)).exp()
        }
    }))
}

/// Zero mode must vanish relative to the largest coefficient.
pub(crate) fn require_mean_free(spec: &SpectralField) -> Result<()> {
    let mean = spec.mean_modulus();
    let scale = spec.max_modulus();
    if mean > 1e-12 * scale.max(f64::MIN_POSITIVE) && mean > 0.0 {
        return Err(Error::NonzeroMean { mean });
    }
    Ok(())
}

/// Samples of a radial kernel with quadrature error estimates.
#[derive(Clone, Debug, Serialize)]
pub struct RadialProfile {
    pub alpha: f64,
    pub d: usize,
    pub t: f64,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
}

impl RadialProfile {
    pub fn max_error(&self) -> f64 {
        self.errors.iter().cloned().fold(0.0, f64::max)
    }
}

/// Target absolute accuracy of every profile sample.
pub const PROFILE_TOL: f64 = 1e-8;

/// `K(r)` for the radial multiplier `k^γ exp(-t k^α)` in `d ∈ {1, 3}`, by
/// oscillatory quadrature over half-period panels up to where `t k^α = 40`.
pub fn radial_kernel_value(gamma: f64, alpha: f64, d: usize, t: f64, r: f64) -> Result<(f64, f64)> {
    if t <= 0.0 {
        return Err(Error::NegativeTime(t));
    }
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::InvalidParams(format!("kernel order {alpha} outside (0, 2]")));
    }
    let kmax = (40.0 / t).powf(1.0 / alpha);
    let (weight, prefactor): (Box<dyn Fn(f64) -> f64>, f64) = match d {
        1 => {
            let g = move |k: f64| k.powf(gamma) * (k * r).cos();
            (Box::new(g), 1.0 / std::f64::consts::PI)
        }
        3 if r == 0.0 => {
            let g = move |k: f64| k.powf(gamma + 2.0);
            (Box::new(g), 1.0 / (2.0 * std::f64::consts::PI.powi(2)))
        }
        3 => {
            let g = move |k: f64| k.powf(gamma + 1.0) * (k * r).sin();
            (Box::new(g), 1.0 / (2.0 * std::f64::consts::PI.powi(2) * r))
        }
        _ => return Err(Error::Undefined(format!("radial inversion implemented for d in {{1, 3}}, got {d}"))),
    };
    let f = |k: f64| if k == 0.0 { 0.0 } else { weight(k) * (-t * k.powf(alpha)).exp() };
    // Magnitude scale of the integrand sets the absolute tolerance.
    let scale = t.powf(-(d as f64 + gamma) / alpha);
    let panel = if r > 0.0 { (std::f64::consts::PI / r).min(kmax / 8.0) } else { kmax / 8.0 };
    let npanels = (kmax / panel).ceil() as usize;
    let tol = 1e-15 * scale / npanels as f64;
    let mut total = 0.0;
    let mut err = 0.0;
    for i in 0..npanels {
        let a = i as f64 * panel;
        let b = ((i + 1) as f64 * panel).min(kmax);
        let e = integrate(f, a, b, tol, 1e-14)?;
        total += e.value;
        err += e.error;
    }
    Ok((prefactor * total, prefactor * err))
}

/// Radial profile of `p_t` on `n_r` equispaced radii in `[0, r_max]`.
///
/// Orders in `(0, 2]` are accepted so that the Gaussian (`α → 2`) and Poisson
/// (`α = 1`) limits can be checked; the model itself needs `1 < α < 2`.
pub fn kernel_radial_profile(alpha: f64, d: usize, t: f64, r_max: f64, n_r: usize) -> Result<RadialProfile> {
    if n_r < 2 || !(r_max > 0.0) {
        return Err(Error::InvalidParams("profile needs n_r >= 2 and r_max > 0".into()));
    }
    let radii: Vec<f64> = (0..n_r).map(|i| r_max * i as f64 / (n_r - 1) as f64).collect();
    let mut values = Vec::with_capacity(n_r);
    let mut errors = Vec::with_capacity(n_r);
    for &r in &radii {
        let (v, e) = radial_kernel_value(0.0, alpha, d, t, r)?;
        if e > PROFILE_TOL {
            return Err(Error::Quadrature { achieved: e, target: PROFILE_TOL });
        }
        values.push(v);
        errors.push(e);
    }
    Ok(RadialProfile { alpha, d, t, radii, values, errors })
}

/// Extremes of `p_t(r) (t^{1/α} + r)^{d+α} / t` over a profile.
#[derive(Clone, Debug, Serialize)]
pub struct BoundRatio {
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub ratios: Vec<f64>,
}

pub fn verify_kernel_bound_ratio(profile: &RadialProfile) -> Result<BoundRatio> {
    let (a, d, t) = (profile.alpha, profile.d as f64, profile.t);
    let mut ratios = Vec::with_capacity(profile.radii.len());
    for (&r, &p) in profile.radii.iter().zip(&profile.values) {
        if !(p > 0.0) {
            return Err(Error::KernelNotPositive { r, value: p });
        }
        ratios.push(p * (t.powf(1.0 / a) + r).powf(d + a) / t);
    }
    let min_ratio = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(BoundRatio { min_ratio, max_ratio, ratios })
}

/// Surface measure of the unit sphere, `d ∈ {1, 3}` (`ω₁ = 2` counts both half-lines).
fn sphere_measure(d: usize) -> f64 {
    match d {
        1 => 2.0,
        3 => 4.0 * std::f64::consts::PI,
        _ => 2.0 * std::f64::consts::PI,
    }
}

/// `‖K_t‖_{L^p(ℝ^d)}` for `K_t = σ(D) p_t`.
///
/// Radial symbols in `d ∈ {1, 3}` use radial quadrature out to
/// `R = 60 t^{1/α}` plus a power-law tail fitted at `R`; anything else is
/// evaluated on a periodic grid of half-width `20 t^{1/α}`.
pub fn ksigma_lp_norm(sym: &SymbolSpec, t: f64, alpha: f64, p: f64, d: usize) -> Result<f64> {
    if t <= 0.0 {
        return Err(Error::NegativeTime(t));
    }
    if !(p >= 1.0) {
        return Err(Error::Undefined(format!("L^{p} with p < 1")));
    }
    sym.validate(d)?;
    let gamma = sym.degree();
    let conj = if p == 1.0 { f64::INFINITY } else { p / (p - 1.0) };
    // σ ≡ 1 is smooth at the origin, so K_t = p_t decays like |x|^{-d-α}.
    if !sym.is_identity() && gamma <= -(d as f64) / conj {
        return Err(Error::Undefined(format!("degree {gamma} <= -d/p' = {}", -(d as f64) / conj)));
    }
    if sym.is_radial() && (d == 1 || d == 3) {
        radial_lp_norm(gamma, t, alpha, p, d)
    } else {
        let n = match d {
            1 => 4096,
            2 => 512,
            _ => 128,
        };
        let grid = SpaceGrid::new(d, n, 20.0 * t.powf(1.0 / alpha))?;
        let k = kernel_on_grid(sym, t, alpha, &grid)?;
        Ok(k.lp_norm(p))
    }
}

fn radial_lp_norm(gamma: f64, t: f64, alpha: f64, p: f64, d: usize) -> Result<f64> {
    let scale = t.powf(1.0 / alpha);
    let big_r = 60.0 * scale;
    let dd = d as f64;
    let kval = |r: f64| radial_kernel_value(gamma, alpha, d, t, r).map(|v| v.0);
    let mut failure = None;
    let body = integrate(
        |r| match kval(r) {
            Ok(v) => v.abs().powf(p) * r.powf(dd - 1.0),
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        0.0,
        big_r,
        0.0,
        1e-9,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    // Tail from the local power law at R.
    let (k1, k2) = (kval(big_r)?, kval(big_r / 2f64.sqrt())?);
    let decay = if k1 != 0.0 && k2 != 0.0 { (k2.abs() / k1.abs()).ln() / 2f64.sqrt().ln() } else { f64::INFINITY };
    let tail = if decay.is_finite() {
        let e = decay * p - dd;
        if e <= 0.0 {
            return Err(Error::Undefined(format!("kernel not in L^{p}: tail decay r^-{decay}")));
        }
        k1.abs().powf(p) * big_r.powf(dd) / e
    } else {
        0.0
    };
    Ok((sphere_measure(d) * (body.value + tail)).powf(1.0 / p))
}

/// `K_t` sampled on a periodic grid centred at the origin. For odd symbols
/// the kernel is imaginary and `-i K_t` is returned.
pub fn kernel_on_grid(sym: &SymbolSpec, t: f64, alpha: f64, grid: &SpaceGrid) -> Result<VectorField> {
    sym.validate(grid.d)?;
    let wv = grid.wavevectors();
    let vol = (2.0 * grid.half_width).powi(grid.d as i32);
    let mut idx = vec![0; grid.d];
    let at_zero = if sym.is_identity() { 1.0 } else { 0.0 };
    let odd = sym.is_odd();
    let coeffs: Vec<Complex64> = (0..grid.len())
        .map(|f| {
            let k = wv.norm[f];
            let m = if k == 0.0 { at_zero } else { sym.eval(wv.xi(f), k) * (-t * k.powf(alpha)).exp() };
            grid.unravel(f, &mut idx);
            // Shift the origin from the box corner to its centre.
            let parity: i64 = idx.iter().map(|&j| grid.wavenumber(j)).sum();
            let sign = if parity.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            if odd {
                Complex64::new(0.0, -sign * m / vol)
            } else {
                Complex64::new(sign * m / vol, 0.0)
            }
        })
        .collect();
    inverse_transform(&SpectralField { grid: grid.clone(), comps: vec![coeffs] })
}
