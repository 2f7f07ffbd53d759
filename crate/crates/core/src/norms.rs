//! Estimators for the critical norms: `L∞_α`, the force space, parabolic
//! Morrey and Morrey-Sobolev norms, thermic Besov norms; plus the rescaling
//! operators.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descriptor::ScalingKind;
use crate::error::{Error, Result};
use crate::grid::{forward_transform, inverse_transform, SpaceTimeVectorField, TimeGrid, VectorField};
use crate::operators::{spatial_power, spatial_power_slice};
use crate::params::Thm1Indices;

/// A norm value with enough context to judge it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub value: f64,
    pub estimator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<MorreyScan>,
    /// Sup grid used for time-type estimators.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_grid: Option<String>,
    /// Relative change under one refinement of the sup grid, when measured.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refinement_delta: Option<f64>,
    /// Where the sup was attained.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<ScanPoint>,
}

impl NormReport {
    fn plain(value: f64, estimator: &str) -> Self {
        NormReport {
            value,
            estimator: estimator.into(),
            scan: None,
            time_grid: None,
            refinement_delta: None,
            location: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub r: f64,
    pub t: f64,
    pub x: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extension {
    /// The field repeats with the box period.
    #[default]
    Periodic,
    /// The field vanishes outside the box.
    Zero,
}

/// Explicit scan center: a time and a lattice index per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanCenter {
    pub t: f64,
    pub x: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Centers {
    /// Every `space`-th lattice point per axis (the origin included), the time
    /// origin, the first four nodes and every `time`-th node.
    Strided { space: usize, time: usize },
    Explicit { points: Vec<ScanCenter> },
}

/// Radii `radius_base · 2^{j/per_octave}`, `j_min·per_octave ≤ j ≤ j_max·per_octave`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorreyScan {
    pub radius_base: f64,
    pub j_min: i32,
    pub j_max: i32,
    #[serde(default = "one")]
    pub per_octave: u32,
    pub centers: Centers,
    #[serde(default)]
    pub extension: Extension,
    /// Also run the refined scan and report the relative change.
    #[serde(default)]
    pub refine: bool,
}

fn one() -> u32 {
    1
}

impl MorreyScan {
    pub fn strided(radius_base: f64, j_min: i32, j_max: i32, space: usize, time: usize) -> Self {
        MorreyScan {
            radius_base,
            j_min,
            j_max,
            per_octave: 1,
            centers: Centers::Strided { space, time },
            extension: Extension::Periodic,
            refine: false,
        }
    }

    pub fn radii(&self) -> Vec<f64> {
        let k = self.per_octave.max(1) as i32;
        (self.j_min * k..=self.j_max * k).map(|j| self.radius_base * 2f64.powf(j as f64 / k as f64)).collect()
    }

    fn validate(&self) -> Result<()> {
        if !(self.radius_base > 0.0 && self.radius_base.is_finite()) {
            return Err(Error::Config("scan radius base must be positive".into()));
        }
        if self.j_max - self.j_min < 3 {
            return Err(Error::Config("Morrey scan must cover at least 4 dyadic levels".into()));
        }
        match &self.centers {
            Centers::Strided { space, time } if *space == 0 || *time == 0 => {
                Err(Error::Config("scan strides must be at least 1".into()))
            }
            Centers::Explicit { points } if points.is_empty() => Err(Error::Config("scan has no centers".into())),
            _ => Ok(()),
        }
    }

    /// Twice the radii per octave and half the time stride. The spatial
    /// stride is kept: halving it costs `2^d` and the cylinders already
    /// overlap at the strided centers.
    pub fn refined(&self) -> Self {
        let mut s = self.clone();
        s.per_octave = self.per_octave.max(1) * 2;
        if let Centers::Strided { space, time } = self.centers {
            s.centers = Centers::Strided { space, time: (time / 2).max(1) };
        }
        s.refine = false;
        s
    }

    /// The scan matching a field rescaled by `λ`: radii and center times shrink.
    pub fn rescaled(&self, lambda: f64, alpha: f64) -> Self {
        let mut s = self.clone();
        s.radius_base /= lambda;
        if let Centers::Explicit { points } = &mut s.centers {
            for p in points {
                p.t /= lambda.powf(alpha);
            }
        }
        s
    }
}

/// `sup_k t_k^{(α-1)/α} max_x |u(t_k, x)|`.
pub fn linfty_alpha_norm(u: &SpaceTimeVectorField, alpha: f64) -> NormReport {
    let w = (alpha - 1.0) / alpha;
    let value = u.tgrid.nodes().iter().zip(&u.slices).map(|(t, s)| t.powf(w) * s.max_abs()).fold(0.0, f64::max);
    NormReport { time_grid: Some(describe_tgrid(&u.tgrid)), ..NormReport::plain(value, "linfty_alpha") }
}

/// `sup_k t_k^ρ ‖(-Δ)^{-β/2} f(t_k)‖_{L^{p0}}`.
#[allow(non_snake_case)]
pub fn force_F_norm(f: &SpaceTimeVectorField, idx: &Thm1Indices) -> Result<NormReport> {
    if !idx.admissible() {
        return Err(Error::Inadmissible { violations: idx.violations() });
    }
    let beta = idx.beta.to_f64();
    let rho = idx.rho.to_f64();
    let p0 = idx.p0.to_f64();
    let mut value: f64 = 0.0;
    for (t, s) in f.tgrid.nodes().iter().zip(&f.slices) {
        value = value.max(t.powf(rho) * spatial_power_slice(s, -beta)?.lp_norm(p0));
    }
    Ok(NormReport { time_grid: Some(describe_tgrid(&f.tgrid)), ..NormReport::plain(value, "force_F") })
}

/// `sup_r sup_(t,x) r^{-(d+α)(1/p-1/q)} ‖ψ‖_{L^p(Q_r(t,x))}` over the scan,
/// with `Q_r(t,x) = {|t-s|^{1/α} + |x-y| < r}` and `ψ = 0` for `s < 0`.
pub fn parabolic_morrey_norm(
    field: &SpaceTimeVectorField,
    alpha: f64,
    p: f64,
    q: f64,
    scan: &MorreyScan,
) -> Result<NormReport> {
    let table = scan_table(field, alpha, p, q, scan)?;
    let (value, location) = table.overall();
    let refinement_delta = if scan.refine {
        let (fine, _) = scan_table(field, alpha, p, q, &scan.refined())?.overall();
        Some(if value > 0.0 { (fine - value) / value } else { 0.0 })
    } else {
        None
    };
    Ok(NormReport {
        value,
        estimator: "parabolic_morrey".into(),
        scan: Some(scan.clone()),
        time_grid: Some(describe_tgrid(&field.tgrid)),
        refinement_delta,
        location,
    })
}

/// Largest cylinder quantity per scan radius, as `(r, value)` pairs.
pub fn morrey_radius_profile(
    field: &SpaceTimeVectorField,
    alpha: f64,
    p: f64,
    q: f64,
    scan: &MorreyScan,
) -> Result<Vec<(f64, f64)>> {
    let table = scan_table(field, alpha, p, q, scan)?;
    Ok(table.radii.iter().zip(&table.best).map(|(r, b)| (*r, b.0)).collect())
}

/// `‖(-Δ)^{-γ/2} f‖_{M^{p,q}_α}`, the operator acting in space only.
pub fn morrey_sobolev_norm(
    f: &SpaceTimeVectorField,
    alpha: f64,
    gamma: f64,
    p: f64,
    q: f64,
    scan: &MorreyScan,
) -> Result<NormReport> {
    let smoothed = spatial_power(f, -gamma)?;
    let mut rep = parabolic_morrey_norm(&smoothed, alpha, p, q, scan)?;
    rep.estimator = "morrey_sobolev".into();
    Ok(rep)
}

struct ScanTable {
    radii: Vec<f64>,
    best: Vec<(f64, Option<ScanPoint>)>,
}

impl ScanTable {
    fn overall(&self) -> (f64, Option<ScanPoint>) {
        let mut out = (0.0, None);
        for (v, loc) in &self.best {
            if *v > out.0 || (v.is_infinite() && out.1.is_none()) {
                out = (*v, loc.clone());
            }
        }
        out
    }
}

/// `∫_{[lo,hi] ∩ [a,b]} (s/t_j)^{-e} ds`.
fn cell_weight(lo: f64, hi: f64, tj: f64, e: f64, a: f64, b: f64) -> f64 {
    let (x, y) = (lo.max(a), hi.min(b));
    if y <= x {
        return 0.0;
    }
    if e == 0.0 {
        return y - x;
    }
    if (e - 1.0).abs() < 1e-14 {
        return if x <= 0.0 { f64::INFINITY } else { tj * (y / x).ln() };
    }
    if e > 1.0 && x <= 0.0 {
        return f64::INFINITY;
    }
    let g = 1.0 - e;
    tj.powf(e) * (y.powf(g) - x.max(0.0).powf(g)) / g
}

fn scan_table(field: &SpaceTimeVectorField, alpha: f64, p: f64, q: f64, scan: &MorreyScan) -> Result<ScanTable> {
    if !(p >= 1.0 && p <= q && q.is_finite()) {
        return Err(Error::Undefined(format!("Morrey exponents need 1 <= p <= q < inf, got ({p}, {q})")));
    }
    scan.validate()?;
    let grid = field.grid();
    let (d, n, h) = (grid.d, grid.n, grid.h());
    let tg = &field.tgrid;
    let nt = tg.len();
    let radii = scan.radii();
    let r_max = radii.iter().cloned().fold(0.0, f64::max);
    let exp_w = (field.singular_exponent.unwrap_or(0.0) * p).max(0.0);

    // |ψ|^p, laid out [point][slice].
    let mut amp = vec![0.0; grid.len() * nt];
    for (j, s) in field.slices.iter().enumerate() {
        for (f, m) in s.magnitude().iter().enumerate() {
            amp[f * nt + j] = if p == 1.0 { *m } else { m.powf(p) };
        }
    }

    // Lattice offsets inside the largest cylinder, grouped by |o|².
    let mut bound = (r_max / h).floor() as i64 + 1;
    if scan.extension == Extension::Zero {
        bound = bound.min(n as i64 - 1);
    }
    let rr = r_max / h;
    let max_r2 = (rr * rr).ceil() as usize + 1;
    let mut by_r2: Vec<Vec<i32>> = vec![Vec::new(); max_r2 + 1];
    let side = (2 * bound + 1) as usize;
    let mut o = vec![0i64; d];
    for c in 0..side.pow(d as u32) {
        let mut rem = c;
        let mut r2 = 0i64;
        for a in o.iter_mut() {
            *a = (rem % side) as i64 - bound;
            rem /= side;
            r2 += *a * *a;
        }
        if (r2 as f64).sqrt() * h < r_max {
            by_r2[r2 as usize].extend(o.iter().map(|&v| v as i32));
        }
    }
    let shells: Vec<(f64, Vec<i32>)> = by_r2
        .into_iter()
        .enumerate()
        .filter(|(_, v)| !v.is_empty())
        .map(|(r2, v)| ((r2 as f64).sqrt() * h, v))
        .collect();
    let ns = shells.len();

    // Spatial centers, each with the time centers evaluated there.
    let mut tcs: Vec<f64> = Vec::new();
    let mut spatial: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    match &scan.centers {
        Centers::Strided { space, time } => {
            tcs.push(0.0);
            for (k, &t) in tg.nodes().iter().enumerate() {
                if k < 4 || (k + 1) % time == 0 {
                    tcs.push(t);
                }
            }
            let off = (n / 2) % space;
            let per_axis: Vec<usize> = (0..n).filter(|i| i % space == off).collect();
            let m = per_axis.len();
            for c in 0..m.pow(d as u32) {
                let mut rem = c;
                let idx = (0..d)
                    .map(|_| {
                        let i = per_axis[rem % m];
                        rem /= m;
                        i
                    })
                    .collect();
                spatial.push((idx, (0..tcs.len()).collect()));
            }
        }
        Centers::Explicit { points } => {
            for pt in points {
                if pt.x.len() != d || pt.x.iter().any(|&i| i >= n) {
                    return Err(Error::Config("scan center outside the grid".into()));
                }
                if !(pt.t >= 0.0) {
                    return Err(Error::NegativeTime(pt.t));
                }
                let ti = tcs.iter().position(|&t| t == pt.t).unwrap_or_else(|| {
                    tcs.push(pt.t);
                    tcs.len() - 1
                });
                match spatial.iter_mut().find(|s| s.0 == pt.x) {
                    Some(s) => s.1.push(ti),
                    None => spatial.push((pt.x.clone(), vec![ti])),
                }
            }
        }
    }

    // Time weights [center][radius][shell][cell].
    let nr = radii.len();
    let mut wt = vec![0.0; tcs.len() * nr * ns * nt];
    for (c, &tc) in tcs.iter().enumerate() {
        for (i, &r) in radii.iter().enumerate() {
            for (s, (rho, _)) in shells.iter().enumerate() {
                if *rho >= r {
                    break;
                }
                let tau = (r - rho).powf(alpha);
                let base = ((c * nr + i) * ns + s) * nt;
                for j in 0..nt {
                    let (lo, hi) = tg.cell(j);
                    wt[base + j] = cell_weight(lo, hi, tg.nodes()[j], exp_w, tc - tau, tc + tau);
                }
            }
        }
    }

    let vol = grid.cell_volume();
    let decay = (d as f64 + alpha) * (1.0 / p - 1.0 / q);
    let periodic = scan.extension == Extension::Periodic;
    let per_center: Vec<Vec<(usize, usize, f64)>> = spatial
        .par_iter()
        .map(|(x, tlist)| {
            let mut sums = vec![0.0; ns * nt];
            for (s, (_, offs)) in shells.iter().enumerate() {
                let row = &mut sums[s * nt..(s + 1) * nt];
                'offset: for off in offs.chunks(d) {
                    let mut flat = 0usize;
                    for a in 0..d {
                        let i = x[a] as i64 + off[a] as i64;
                        let i = if periodic {
                            i.rem_euclid(n as i64) as usize
                        } else if i < 0 || i >= n as i64 {
                            continue 'offset;
                        } else {
                            i as usize
                        };
                        flat = flat * n + i;
                    }
                    for (acc, v) in row.iter_mut().zip(&amp[flat * nt..(flat + 1) * nt]) {
                        *acc += v;
                    }
                }
            }
            let mut out = Vec::with_capacity(tlist.len() * nr);
            for &c in tlist {
                for (i, &r) in radii.iter().enumerate() {
                    let mut total = 0.0;
                    for (s, (rho, _)) in shells.iter().enumerate() {
                        if *rho >= r {
                            break;
                        }
                        let base = ((c * nr + i) * ns + s) * nt;
                        for j in 0..nt {
                            let w = wt[base + j];
                            if w != 0.0 {
                                total += w * sums[s * nt + j];
                            }
                        }
                    }
                    out.push((c, i, r.powf(-decay) * (vol * total).powf(1.0 / p)));
                }
            }
            out
        })
        .collect();

    let mut best: Vec<(f64, Option<ScanPoint>)> = vec![(0.0, None); nr];
    for ((x, _), vals) in spatial.iter().zip(&per_center) {
        for &(c, i, v) in vals {
            if v.is_nan() {
                return Err(Error::NonFinite("Morrey cylinder sum".into()));
            }
            if v > best[i].0 || best[i].1.is_none() {
                let xs = x.iter().map(|&k| grid.coordinate(k)).collect();
                best[i] = (v.max(best[i].0), Some(ScanPoint { r: radii[i], t: tcs[c], x: xs }));
            }
        }
    }
    Ok(ScanTable { radii, best })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Thermic {
    /// `sup_t t^{s/2} ‖h_t ∗ ψ‖_∞` with the Gaussian heat kernel.
    Heat,
    /// `sup_t t^{s/α} ‖p_t ∗ ψ‖_∞` with the fractional kernel.
    Fractional,
}

/// Log grid `t = 2^{j/per_octave}` for thermic sups.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogTimeRange {
    pub j_min: i32,
    pub j_max: i32,
    pub per_octave: u32,
}

impl Default for LogTimeRange {
    fn default() -> Self {
        LogTimeRange { j_min: -20, j_max: 10, per_octave: 8 }
    }
}

/// Thermic characterisation of `‖ψ‖_{Ḃ^{-s}_{∞,∞}}`. The sup over the log
/// grid is polished by golden-section search around the best node;
/// `refinement_delta` is the gain of that polish over the raw grid value.
pub fn besov_thermic_norm(
    psi: &VectorField,
    s: f64,
    variant: Thermic,
    alpha: f64,
    range: &LogTimeRange,
) -> Result<NormReport> {
    if !(s > 0.0) {
        return Err(Error::Undefined(format!("thermic norm needs s > 0, got {s}")));
    }
    if range.j_max <= range.j_min || range.per_octave == 0 {
        return Err(Error::Config("empty thermic time range".into()));
    }
    let spec = forward_transform(psi)?;
    let wv = psi.grid.wavevectors();
    let order = match variant {
        Thermic::Heat => 2.0,
        Thermic::Fractional => alpha,
    };
    let g = |lt: f64| -> Result<f64> {
        let t = lt.exp();
        let sm = spec.map_modes(|f| (-t * wv.norm[f].powf(order)).exp());
        Ok(t.powf(s / order) * inverse_transform(&sm)?.max_abs())
    };
    let k = range.per_octave as i32;
    let step = std::f64::consts::LN_2 / k as f64;
    let lts: Vec<f64> = (range.j_min * k..=range.j_max * k).map(|j| j as f64 * step).collect();
    let vals = lts.iter().map(|&l| g(l)).collect::<Result<Vec<_>>>()?;
    let (ib, &raw) = vals.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty");
    let mut value = raw;
    if raw > 0.0 && ib > 0 && ib + 1 < lts.len() {
        // Golden-section on the bracketing interval.
        let (mut a, mut b) = (lts[ib - 1], lts[ib + 1]);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let (mut c, mut dd) = (b - phi * (b - a), a + phi * (b - a));
        let (mut fc, mut fd) = (g(c)?, g(dd)?);
        for _ in 0..60 {
            if fc > fd {
                b = dd;
                dd = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = g(c)?;
            } else {
                a = c;
                c = dd;
                fc = fd;
                dd = a + phi * (b - a);
                fd = g(dd)?;
            }
        }
        value = value.max(fc).max(fd);
    }
    let name = match variant {
        Thermic::Heat => "besov_thermic_heat",
        Thermic::Fractional => "besov_thermic_fractional",
    };
    Ok(NormReport {
        time_grid: Some(format!("t = 2^(j/{k}), j/{k} in [{}, {}]", range.j_min, range.j_max)),
        refinement_delta: Some(if value > 0.0 { (value - raw) / value } else { 0.0 }),
        ..NormReport::plain(value, name)
    })
}

/// `λ^e ψ(λ^α t, λx)` sampled exactly: the same samples on the box shrunk by
/// `λ` at times `t_k/λ^α`, scaled by `λ^e` for the kind's exponent `e`.
pub fn rescale(field: &SpaceTimeVectorField, lambda: f64, kind: ScalingKind, alpha: f64) -> Result<SpaceTimeVectorField> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParams(format!("scaling factor {lambda} must be positive")));
    }
    let tgrid = field.tgrid.scaled_down(lambda.powf(alpha))?;
    let slices = field.slices.iter().map(|s| rescale_slice(s, lambda, kind, alpha)).collect::<Result<Vec<_>>>()?;
    Ok(SpaceTimeVectorField::new(tgrid, slices)?.with_singular_exponent(field.singular_exponent))
}

/// Spatial rescaling `λ^e ψ(λx)` of a single slice.
pub fn rescale_slice(field: &VectorField, lambda: f64, kind: ScalingKind, alpha: f64) -> Result<VectorField> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParams(format!("scaling factor {lambda} must be positive")));
    }
    let grid = field.grid.rescaled(lambda)?;
    let c = lambda.powf(kind.amplitude_exponent(alpha));
    VectorField::new(grid, field.scaled(c).comps)
}

fn describe_tgrid(tg: &TimeGrid) -> String {
    match tg.kappa {
        Some(k) => format!("graded N={} T={} kappa={}", tg.steps, tg.horizon, k),
        None => format!("explicit N={} T={}", tg.steps, tg.horizon),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_weight_is_overlap_length_without_singularity() {
        assert_eq!(cell_weight(1.0, 2.0, 2.0, 0.0, 1.5, 5.0), 0.5);
        assert_eq!(cell_weight(1.0, 2.0, 2.0, 0.0, 3.0, 5.0), 0.0);
    }

    #[test]
    fn cell_weight_integrates_power() {
        // ∫_0^1 (s/1)^{-1/2} ds = 2.
        assert!((cell_weight(0.0, 1.0, 1.0, 0.5, -1.0, 2.0) - 2.0).abs() < 1e-15);
        assert!(cell_weight(0.0, 1.0, 1.0, 1.2, -1.0, 2.0).is_infinite());
    }

    #[test]
    fn radii_levels() {
        let s = MorreyScan::strided(1.0, -2, 1, 1, 1);
        assert_eq!(s.radii(), vec![0.25, 0.5, 1.0, 2.0]);
        assert_eq!(s.refined().radii().len(), 7);
        assert!(MorreyScan::strided(1.0, 0, 2, 1, 1).validate().is_err());
    }
}
