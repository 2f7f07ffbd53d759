//! Closed-form fields that can be sampled on any grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{forward_transform, inverse_transform, SpaceGrid, SpaceTimeVectorField, TimeGrid, VectorField};

/// How a field transforms under the natural scaling of the equation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingKind {
    /// `λ^{α-1} u(λ^α t, λx)`.
    Velocity,
    /// `λ^{2α-1} f(λ^α t, λx)`.
    Force,
    /// `λ^{α-1} u0(λx)`.
    Initial,
}

impl ScalingKind {
    pub fn amplitude_exponent(self, alpha: f64) -> f64 {
        match self {
            ScalingKind::Velocity | ScalingKind::Initial => alpha - 1.0,
            ScalingKind::Force => 2.0 * alpha - 1.0,
        }
    }
}

/// `amplitude · cos(ξ·x + phase)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeTerm {
    pub xi: Vec<f64>,
    pub amplitude: Vec<f64>,
    #[serde(default)]
    pub phase: f64,
}

impl ModeTerm {
    fn add_into(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        let arg: f64 = self.xi.iter().zip(x).map(|(k, y)| k * y).sum::<f64>() + self.phase;
        let c = arg.cos() * scale;
        for (o, a) in out.iter_mut().zip(&self.amplitude) {
            *o += a * c;
        }
    }

    fn xi_norm(&self) -> f64 {
        self.xi.iter().map(|k| k * k).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldDescriptor {
    Zero {
        ncomp: usize,
    },
    Constant {
        value: Vec<f64>,
    },
    /// A single Fourier mode.
    Mode(ModeTerm),
    ModeSum {
        modes: Vec<ModeTerm>,
    },
    /// `Σ exp(-t|ξ|^α) amplitude cos(ξ·x + phase)`: the fractional heat flow of a mode sum.
    HeatEvolved {
        alpha: f64,
        modes: Vec<ModeTerm>,
    },
    /// `amplitude · G(x - center)` with `G` the unit-mass Gaussian of standard deviation `width`.
    Gaussian {
        width: f64,
        center: Vec<f64>,
        amplitude: Vec<f64>,
    },
    /// `amplitude · (∂₂G, -∂₁G, 0)`: a mean-free, divergence-free bump (`d = 3`).
    CurlGaussian {
        width: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// `A (sin kx cos ky cos kz, -cos kx sin ky cos kz, 0)` (`d = 3`).
    TaylorGreen {
        amplitude: f64,
        #[serde(default = "one")]
        wavenumber: f64,
    },
    /// `t^{-exponent} · spatial(x)`.
    TimePower {
        exponent: f64,
        spatial: Box<FieldDescriptor>,
    },
    /// Indicator of `{|t - t0|^{1/α} + |x - x0| < radius}` (scalar).
    Cylinder {
        t0: f64,
        x0: Vec<f64>,
        radius: f64,
        alpha: f64,
    },
    /// `λ^{exponent} · inner(λ^α t, λx)`.
    Rescaled {
        lambda: f64,
        exponent: f64,
        alpha: f64,
        inner: Box<FieldDescriptor>,
    },
}

fn one() -> f64 {
    1.0
}

impl FieldDescriptor {
    pub fn rescaled(inner: FieldDescriptor, lambda: f64, kind: ScalingKind, alpha: f64) -> Self {
        FieldDescriptor::Rescaled { lambda, exponent: kind.amplitude_exponent(alpha), alpha, inner: Box::new(inner) }
    }

    /// Number of components on a `d`-dimensional grid.
    pub fn ncomp(&self, d: usize) -> usize {
        match self {
            FieldDescriptor::Zero { ncomp } => *ncomp,
            FieldDescriptor::Constant { value } => value.len(),
            FieldDescriptor::Mode(m) => m.amplitude.len(),
            FieldDescriptor::ModeSum { modes } | FieldDescriptor::HeatEvolved { modes, .. } => {
                modes.first().map_or(d, |m| m.amplitude.len())
            }
            FieldDescriptor::Gaussian { amplitude, .. } => amplitude.len(),
            FieldDescriptor::CurlGaussian { .. } | FieldDescriptor::TaylorGreen { .. } => 3,
            FieldDescriptor::TimePower { spatial, .. } => spatial.ncomp(d),
            FieldDescriptor::Cylinder { .. } => 1,
            FieldDescriptor::Rescaled { inner, .. } => inner.ncomp(d),
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        match self {
            FieldDescriptor::HeatEvolved { .. }
            | FieldDescriptor::TimePower { .. }
            | FieldDescriptor::Cylinder { .. } => true,
            FieldDescriptor::Rescaled { inner, .. } => inner.is_time_dependent(),
            _ => false,
        }
    }

    /// Power of `t^{-1}` the field carries near the origin, if any.
    pub fn singular_exponent(&self) -> Option<f64> {
        match self {
            FieldDescriptor::TimePower { exponent, .. } if *exponent != 0.0 => Some(*exponent),
            FieldDescriptor::Rescaled { inner, .. } => inner.singular_exponent(),
            _ => None,
        }
    }

    fn is_curl(&self) -> bool {
        match self {
            FieldDescriptor::CurlGaussian { .. } => true,
            FieldDescriptor::TimePower { spatial, .. } => spatial.is_curl(),
            FieldDescriptor::Rescaled { inner, .. } => inner.is_curl(),
            _ => false,
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        let dims = |name: &str, len: usize| {
            if len != d {
                Err(Error::Config(format!("{name} has length {len}, grid dimension is {d}")))
            } else {
                Ok(())
            }
        };
        match self {
            FieldDescriptor::Mode(m) => dims("mode wavevector", m.xi.len()),
            FieldDescriptor::ModeSum { modes } | FieldDescriptor::HeatEvolved { modes, .. } => {
                let nc = modes.first().map_or(0, |m| m.amplitude.len());
                for m in modes {
                    dims("mode wavevector", m.xi.len())?;
                    if m.amplitude.len() != nc {
                        return Err(Error::Config("mode amplitudes differ in length".into()));
                    }
                }
                Ok(())
            }
            FieldDescriptor::Gaussian { center, width, .. } => {
                if *width <= 0.0 {
                    return Err(Error::Config("gaussian width must be positive".into()));
                }
                dims("gaussian center", center.len())
            }
            FieldDescriptor::CurlGaussian { width, .. } => {
                if *width <= 0.0 {
                    return Err(Error::Config("gaussian width must be positive".into()));
                }
                dims("curl-gaussian (needs d = 3)", 3)
            }
            FieldDescriptor::TaylorGreen { .. } => dims("taylor-green (needs d = 3)", 3),
            FieldDescriptor::TimePower { spatial, .. } => spatial.validate(d),
            FieldDescriptor::Cylinder { x0, .. } => dims("cylinder center", x0.len()),
            FieldDescriptor::Rescaled { inner, lambda, .. } => {
                if !(*lambda > 0.0) {
                    return Err(Error::Config("scaling factor must be positive".into()));
                }
                inner.validate(d)
            }
            _ => Ok(()),
        }
    }

    /// Writes the value at `(t, x)` into `out`. `t = None` is only allowed for
    /// time-independent descriptors.
    pub fn eval(&self, t: Option<f64>, x: &[f64], out: &mut [f64]) -> Result<()> {
        out.iter_mut().for_each(|o| *o = 0.0);
        let need_t = || t.ok_or_else(|| Error::Config("time-dependent field sampled without a time".into()));
        match self {
            FieldDescriptor::Zero { .. } => {}
            FieldDescriptor::Constant { value } => out.copy_from_slice(value),
            FieldDescriptor::Mode(m) => m.add_into(x, 1.0, out),
            FieldDescriptor::ModeSum { modes } => modes.iter().for_each(|m| m.add_into(x, 1.0, out)),
            FieldDescriptor::HeatEvolved { alpha, modes } => {
                let t = need_t()?;
                for m in modes {
                    m.add_into(x, (-t * m.xi_norm().powf(*alpha)).exp(), out);
                }
            }
            FieldDescriptor::Gaussian { width, center, amplitude } => {
                let g = gaussian(*width, center, x);
                for (o, a) in out.iter_mut().zip(amplitude) {
                    *o = a * g;
                }
            }
            FieldDescriptor::CurlGaussian { width, amplitude } => {
                let g = gaussian(*width, &[0.0; 3], x);
                let w2 = width * width;
                out[0] = -amplitude * x[1] / w2 * g;
                out[1] = amplitude * x[0] / w2 * g;
            }
            FieldDescriptor::TaylorGreen { amplitude, wavenumber: k } => {
                let (sx, cx) = (k * x[0]).sin_cos();
                let (sy, cy) = (k * x[1]).sin_cos();
                let cz = (k * x[2]).cos();
                out[0] = amplitude * sx * cy * cz;
                out[1] = -amplitude * cx * sy * cz;
            }
            FieldDescriptor::TimePower { exponent, spatial } => {
                let t = need_t()?;
                if t <= 0.0 && *exponent > 0.0 {
                    return Err(Error::Undefined(format!("t^-{exponent} at t = {t}")));
                }
                spatial.eval(Some(t), x, out)?;
                let s = t.powf(-exponent);
                out.iter_mut().for_each(|o| *o *= s);
            }
            FieldDescriptor::Cylinder { t0, x0, radius, alpha } => {
                let t = need_t()?;
                let dist: f64 = x.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                out[0] = if (t - t0).abs().powf(1.0 / alpha) + dist < *radius { 1.0 } else { 0.0 };
            }
            FieldDescriptor::Rescaled { lambda, exponent, alpha, inner } => {
                let xs: Vec<f64> = x.iter().map(|v| v * lambda).collect();
                let ts = t.map(|t| t * lambda.powf(*alpha));
                inner.eval(ts, &xs, out)?;
                let s = lambda.powf(*exponent);
                out.iter_mut().for_each(|o| *o *= s);
            }
        }
        Ok(())
    }
}

fn gaussian(width: f64, center: &[f64], x: &[f64]) -> f64 {
    let d = x.len() as i32;
    let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
    (2.0 * std::f64::consts::PI * width * width).powf(-(d as f64) / 2.0) * (-r2 / (2.0 * width * width)).exp()
}

/// Samples a descriptor at one time (or statically when `t` is `None`).
pub fn sample_space(desc: &FieldDescriptor, grid: &SpaceGrid, t: Option<f64>) -> Result<VectorField> {
    desc.validate(grid.d)?;
    let nc = desc.ncomp(grid.d);
    let mut comps = vec![vec![0.0; grid.len()]; nc];
    let mut buf = vec![0.0; nc];
    for f in 0..grid.len() {
        desc.eval(t, &grid.point(f), &mut buf)?;
        for c in 0..nc {
            comps[c][f] = buf[c];
        }
    }
    let field = VectorField::new(grid.clone(), comps)?;
    if desc.is_curl() && nc == grid.d {
        // Point samples of a curl are solenoidal only to truncation error.
        let spec = crate::operators::leray_project(&forward_transform(&field)?)?;
        return inverse_transform(&spec);
    }
    Ok(field)
}

/// Samples a descriptor on every node of `tgrid`, carrying its singular exponent.
pub fn sample_analytic(desc: &FieldDescriptor, grid: &SpaceGrid, tgrid: &TimeGrid) -> Result<SpaceTimeVectorField> {
    if let FieldDescriptor::TimePower { exponent, spatial } = desc {
        if !spatial.is_time_dependent() {
            if tgrid.nodes()[0] <= 0.0 && *exponent > 0.0 {
                return Err(Error::Undefined(format!("t^-{exponent} at t = 0")));
            }
            let base = sample_space(spatial, grid, None)?;
            let slices = tgrid.nodes().iter().map(|t| base.scaled(t.powf(-exponent))).collect();
            return Ok(SpaceTimeVectorField::new(tgrid.clone(), slices)?.with_singular_exponent(desc.singular_exponent()));
        }
    }
    let slices = tgrid.nodes().iter().map(|&t| sample_space(desc, grid, Some(t))).collect::<Result<Vec<_>>>()?;
    Ok(SpaceTimeVectorField::new(tgrid.clone(), slices)?.with_singular_exponent(desc.singular_exponent()))
}

/// `ψ = curl(G e₃)`, the spatial profile used for the first counterexample.
pub fn force_a(rho: f64, width: f64) -> FieldDescriptor {
    FieldDescriptor::TimePower { exponent: rho, spatial: Box::new(FieldDescriptor::CurlGaussian { width, amplitude: 1.0 }) }
}

/// `|t|^{-2/5} cos(e₀·x) v₀` with `e₀ = (1,0,0)`, `v₀ = (0,1,0)`.
pub fn force_b() -> FieldDescriptor {
    FieldDescriptor::TimePower {
        exponent: 0.4,
        spatial: Box::new(FieldDescriptor::Mode(ModeTerm {
            xi: vec![1.0, 0.0, 0.0],
            amplitude: vec![0.0, 1.0, 0.0],
            phase: 0.0,
        })),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{divergence_defect, forward_transform};

    fn unit_mode() -> FieldDescriptor {
        FieldDescriptor::Mode(ModeTerm { xi: vec![1.0, 0.0, 0.0], amplitude: vec![0.0, 1.0, 0.0], phase: 0.0 })
    }

    #[test]
    fn mode_at_origin_is_its_amplitude() {
        let mut out = [0.0; 3];
        unit_mode().eval(None, &[0.0, 0.0, 0.0], &mut out).unwrap();
        assert_eq!(out, [0.0, 1.0, 0.0]);
    }

    #[test]
    fn force_a_at_unit_time_is_profile() {
        let f = force_a(4.0 / 9.0, 0.3);
        let psi = FieldDescriptor::CurlGaussian { width: 0.3, amplitude: 1.0 };
        let x = [0.1, -0.2, 0.05];
        let (mut a, mut b) = ([0.0; 3], [0.0; 3]);
        f.eval(Some(1.0), &x, &mut a).unwrap();
        psi.eval(None, &x, &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn force_b_blows_up_like_power() {
        let mut out = [0.0; 3];
        force_b().eval(Some(1.0 / 32.0), &[0.0; 3], &mut out).unwrap();
        assert!((out[1] - 4.0).abs() < 1e-14);
        assert_eq!(force_b().singular_exponent(), Some(0.4));
    }

    #[test]
    fn curl_gaussian_is_solenoidal_and_mean_free() {
        let g = SpaceGrid::new(3, 32, std::f64::consts::PI).unwrap();
        let v = sample_space(&FieldDescriptor::CurlGaussian { width: g.half_width / 8.0, amplitude: 1.0 }, &g, None)
            .unwrap();
        let spec = forward_transform(&v).unwrap();
        assert!(spec.mean_modulus() < 1e-14);
        let (div, scale) = divergence_defect(&spec).unwrap();
        assert!(div < 1e-12 * scale);
    }

    #[test]
    fn time_dependent_needs_time() {
        assert!(force_b().eval(None, &[0.0; 3], &mut [0.0; 3]).is_err());
        let g = SpaceGrid::new(2, 4, 1.0).unwrap();
        assert!(sample_space(&unit_mode(), &g, None).is_err());
    }

    #[test]
    fn descriptor_json_round_trip() {
        let d = FieldDescriptor::rescaled(force_b(), 2.0, ScalingKind::Force, 1.5);
        let s = serde_json::to_string(&d).unwrap();
        let back: FieldDescriptor = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
    }
}
