use std::f64::consts::PI;

use fracns_core::descriptor::{force_a, sample_analytic, sample_space, FieldDescriptor, ModeTerm};
use fracns_core::grid::*;
use fracns_core::norms::{besov_thermic_norm, force_F_norm, linfty_alpha_norm, LogTimeRange, Thermic};
use fracns_core::operators::leray_project;
use fracns_core::params::{derive_thm1_indices, Exponent, ModelParams, Number};
use fracns_core::solver::*;
use proptest::prelude::*;

fn shear(amp: f64) -> FieldDescriptor {
    FieldDescriptor::Mode(ModeTerm { xi: vec![1.0, 0.0, 0.0], amplitude: vec![0.0, amp, 0.0], phase: 0.0 })
}

fn taylor_green(amp: f64, g: &SpaceGrid) -> VectorField {
    sample_space(&FieldDescriptor::TaylorGreen { amplitude: amp, wavenumber: 1.0 }, g, None).unwrap()
}

fn max_rel(a: &SpaceTimeVectorField, b: &SpaceTimeVectorField) -> f64 {
    a.axpy(-1.0, b).unwrap().max_abs() / b.max_abs()
}

/// Wavenumbers with a coefficient above `tol`.
fn support(s: &SpectralField, tol: f64) -> Vec<Vec<i64>> {
    let g = &s.grid;
    let mut idx = vec![0usize; g.d];
    let mut out = Vec::new();
    for f in 0..g.len() {
        if s.comps.iter().any(|c| c[f].norm() > tol) {
            g.unravel(f, &mut idx);
            out.push(idx.iter().map(|&j| g.wavenumber(j)).collect());
        }
    }
    out
}

#[test]
fn heat_term_examples() {
    let g = SpaceGrid::new(3, 8, PI).unwrap();
    let tg = TimeGrid::new(2.0, 10, 2.0).unwrap();
    let zero = heat_term(&VectorField::zeros(&g, 3), &tg, 1.5).unwrap();
    assert_eq!(zero.max_abs(), 0.0);

    let u0 = sample_space(&shear(1.0), &g, None).unwrap();
    let h = heat_term(&u0, &tg, 1.5).unwrap();
    for (t, s) in tg.nodes().iter().zip(&h.slices) {
        assert!((s.max_abs() - (-t).exp()).abs() < 1e-14);
    }

    let besov = besov_thermic_norm(&u0, 0.5, Thermic::Fractional, 1.5, &LogTimeRange::default()).unwrap().value;
    let l = linfty_alpha_norm(&h, 1.5).value;
    assert!(l <= besov * (1.0 + 1e-12) && l > 0.9 * besov, "{l} vs {besov}");
}

#[test]
fn heat_term_rejects_compressible_data() {
    let g = SpaceGrid::new(3, 8, PI).unwrap();
    let u0 = sample_space(
        &FieldDescriptor::Mode(ModeTerm { xi: vec![1.0, 0.0, 0.0], amplitude: vec![1.0, 0.0, 0.0], phase: 0.0 }),
        &g,
        None,
    )
    .unwrap();
    let tg = TimeGrid::uniform(1.0, 4).unwrap();
    assert!(heat_term(&u0, &tg, 1.5).is_err());
    assert!(picard_solve(&u0, None, &SolveConfig::new(1.5, tg)).is_err());
}

#[test]
fn duhamel_of_constant_mode() {
    let g = SpaceGrid::new(3, 8, PI).unwrap();
    let tg = TimeGrid::new(3.0, 12, 2.0).unwrap();
    let f = sample_analytic(&shear(1.0), &g, &tg).unwrap();
    assert_eq!(duhamel_force_term(&f.zeros_like(), 1.5, TimeRule::Rectangle).unwrap().max_abs(), 0.0);
    for rule in [TimeRule::Rectangle, TimeRule::Trapezoid] {
        let out = duhamel_force_term(&f, 1.5, rule).unwrap();
        for (t, s) in tg.nodes().iter().zip(&out.slices) {
            assert!((s.max_abs() - (1.0 - (-t).exp())).abs() < 1e-13, "{rule:?} t = {t}");
        }
    }
}

#[test]
fn duhamel_of_force_a_is_bounded_by_its_force_norm() {
    let params = ModelParams::new(Number::ratio(3, 2), 3).unwrap();
    let idx = derive_thm1_indices(params, Exponent::Finite(Number::int(3)), Number::ratio(1, 3)).unwrap();
    let g = SpaceGrid::new(3, 16, PI).unwrap();
    let ratio = |steps| {
        let tg = TimeGrid::new(2.0, steps, 2.0).unwrap();
        let f = sample_analytic(&force_a(4.0 / 9.0, PI / 8.0), &g, &tg).unwrap();
        let out = duhamel_force_term(&f, 1.5, TimeRule::Rectangle).unwrap();
        linfty_alpha_norm(&out, 1.5).value / force_F_norm(&f, &idx).unwrap().value
    };
    let (a, b) = (ratio(16), ratio(32));
    assert!(a.is_finite() && b.is_finite() && a > 0.0);
    assert!(a.max(b) / a.min(b) < 2.0, "{a} vs {b}");
}

#[test]
fn bilinear_term_examples() {
    let g = SpaceGrid::new(3, 16, PI).unwrap();
    let tg = TimeGrid::new(1.0, 4, 2.0).unwrap();
    let z = SpaceTimeVectorField::new(tg.clone(), vec![VectorField::zeros(&g, 3); 4]).unwrap();
    assert_eq!(duhamel_bilinear_term(&z, 1.5, TimeRule::Rectangle).unwrap().max_abs(), 0.0);

    // A single transverse mode is an exact steady state of the nonlinearity.
    let u = sample_analytic(&shear(1.0), &g, &tg).unwrap();
    assert!(duhamel_bilinear_term(&u, 1.5, TimeRule::Rectangle).unwrap().max_abs() < 1e-15);

    // Taylor-Green modes sit at (±1,±1,±1); the quadratic term lives on
    // sums of two of them.
    let u = SpaceTimeVectorField::new(tg.clone(), vec![taylor_green(1.0, &g); 4]).unwrap();
    let b = duhamel_bilinear_term(&u, 1.5, TimeRule::Rectangle).unwrap();
    let s = forward_transform(&b.slices[3]).unwrap();
    let sup = support(&s, 1e-12);
    assert!(!sup.is_empty());
    for k in &sup {
        assert!(k.iter().all(|v| v.abs() == 2 || *v == 0), "{k:?}");
    }
    assert!(is_divergence_free(&s, 1e-12).unwrap());
}

#[test]
fn picard_with_zero_data() {
    let g = SpaceGrid::new(3, 8, PI).unwrap();
    let tg = TimeGrid::new(1.0, 8, 2.0).unwrap();
    let rep = picard_solve(&VectorField::zeros(&g, 3), None, &SolveConfig::new(1.5, tg)).unwrap();
    assert!(rep.converged);
    assert_eq!(rep.iterations, 1);
    assert_eq!(rep.final_field.max_abs(), 0.0);
    assert_eq!(rep.residual, 0.0);
}

#[test]
fn picard_small_data_converges() {
    let g = SpaceGrid::new(3, 8, PI).unwrap();
    let u0 = taylor_green(1.0, &g);
    let mut cfg = SolveConfig::new(1.5, TimeGrid::new(1.0, 16, 2.0).unwrap());
    cfg.rule = TimeRule::Trapezoid;
    let rep = picard_solve(&u0, None, &cfg).unwrap();
    assert!(rep.converged && !rep.non_contraction);
    assert!(rep.residual < 1e-8, "{}", rep.residual);
    assert!(rep.contraction_factors.iter().all(|c| *c < 1.0));
    let n = rep.differences.len();
    assert!(n >= 3 && rep.differences[n - 3] > rep.differences[n - 2] && rep.differences[n - 2] > rep.differences[n - 1]);

    for s in &rep.final_field.slices {
        let spec = forward_transform(s).unwrap();
        let (div, scale) = divergence_defect(&spec).unwrap();
        assert!(div <= 1e-10 * scale);
        let proj = leray_project(&spec).unwrap();
        let diff = spec.comps.iter().flatten().zip(proj.comps.iter().flatten()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }

    let again = picard_solve(&u0, None, &cfg).unwrap();
    assert_eq!(again.final_field, rep.final_field);
    assert_eq!(again.contraction_factors, rep.contraction_factors);
}

#[test]
fn picard_time_convergence_order() {
    let g = SpaceGrid::new(3, 8, PI).unwrap();
    let u0 = taylor_green(1.0, &g);
    // Graded grids nest: node k of N steps is node 2k+1 of 2N.
    let order = |rule, n: usize| {
        let solve = |steps| {
            let mut cfg = SolveConfig::new(1.5, TimeGrid::new(1.0, steps, 2.0).unwrap());
            cfg.rule = rule;
            picard_solve(&u0, None, &cfg).unwrap().final_field
        };
        let fs = [solve(n), solve(2 * n), solve(4 * n)];
        let at = |u: &SpaceTimeVectorField, stride: usize| {
            let slices = u.slices.iter().skip(stride - 1).step_by(stride).cloned().collect();
            SpaceTimeVectorField::new(fs[0].tgrid.clone(), slices).unwrap()
        };
        let e1 = max_rel(&fs[0], &at(&fs[1], 2));
        let e2 = max_rel(&at(&fs[1], 2), &at(&fs[2], 4));
        (e1 / e2).log2()
    };
    // Below N = 32 the rectangle rule is still pre-asymptotic (0.82, 0.91).
    let rect = order(TimeRule::Rectangle, 32);
    assert!(rect >= 0.9, "{rect}");
    let trap = order(TimeRule::Trapezoid, 8);
    assert!(trap >= 1.8, "{trap}");
}

#[test]
fn picard_large_data_does_not_contract() {
    let g = SpaceGrid::new(3, 8, PI).unwrap();
    let cfg = SolveConfig::new(1.5, TimeGrid::new(1.0, 16, 2.0).unwrap());
    let rep = picard_solve(&taylor_green(100.0, &g), None, &cfg).unwrap();
    assert!(rep.non_contraction && !rep.converged);
}

#[test]
fn pressure_of_taylor_green() {
    let g = SpaceGrid::new(3, 16, PI).unwrap();
    let tg = TimeGrid::uniform(1.0, 2).unwrap();
    let u = SpaceTimeVectorField::new(tg.clone(), vec![taylor_green(1.0, &g); 2]).unwrap();
    let zero = recover_pressure(&u.zeros_like(), None).unwrap();
    assert_eq!(zero.max_abs(), 0.0);

    let p = recover_pressure(&u, None).unwrap();
    for f in 0..g.len() {
        let x = g.point(f);
        let want = ((2.0 * x[0]).cos() + (2.0 * x[1]).cos()) * ((2.0 * x[2]).cos() + 2.0) / 16.0;
        assert!((p.slices[0].comps[0][f] - want).abs() < 1e-13);
    }

    // A single transverse mode carries no pressure.
    let s = sample_analytic(&shear(1.0), &g, &tg).unwrap();
    assert!(recover_pressure(&s, None).unwrap().max_abs() < 1e-15);
}

#[test]
fn pressure_gradient_is_the_removed_part() {
    let g = SpaceGrid::new(3, 16, PI).unwrap();
    let tg = TimeGrid::uniform(1.0, 1).unwrap();
    let u = SpaceTimeVectorField::new(tg.clone(), vec![taylor_green(1.0, &g)]).unwrap();
    let bump = FieldDescriptor::Gaussian { width: 0.5, center: vec![0.0; 3], amplitude: vec![1.0, -0.5, 0.25] };
    let f = sample_analytic(&bump, &g, &tg).unwrap();
    let p = forward_transform(&recover_pressure(&u, Some(&f)).unwrap().slices[0]).unwrap();

    // g = div(u⊗u) - f in Fourier space.
    let uu = &u.slices[0];
    let wv = g.wavevectors();
    let fs = forward_transform(&f.slices[0]).unwrap();
    let mut gs = SpectralField::zeros(&g, 3);
    for i in 0..3 {
        for j in 0..3 {
            let prod = VectorField::scalar(g.clone(), uu.comps[i].iter().zip(&uu.comps[j]).map(|(a, b)| a * b).collect()).unwrap();
            let ps = forward_transform(&prod).unwrap();
            for m in 0..g.len() {
                gs.comps[i][m] += num_complex::Complex64::new(0.0, wv.deriv(m)[j]) * ps.comps[0][m];
            }
        }
        for m in 0..g.len() {
            gs.comps[i][m] -= fs.comps[i][m];
        }
    }
    let proj = leray_project(&gs).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for m in 0..g.len() {
            let grad = num_complex::Complex64::new(0.0, wv.deriv(m)[i]) * p.comps[0][m];
            let removed = gs.comps[i][m] - proj.comps[i][m];
            if m != 0 {
                worst = worst.max((grad + removed).norm());
            }
        }
    }
    assert!(worst < 1e-10, "{worst}");
}

#[test]
fn duhamel_time_integral_examples() {
    assert!((duhamel_time_integral(0.0, 0.0, 2.5).unwrap() - 2.5).abs() < 1e-14);
    assert!((duhamel_time_integral(0.5, 0.5, 7.0).unwrap() - PI).abs() < 1e-13);
    let b = duhamel_time_integral_quadrature(2.0 / 3.0, 2.0 / 3.0, 1.0).unwrap();
    let t = 3.0;
    let v = duhamel_time_integral(2.0 / 3.0, 2.0 / 3.0, t).unwrap();
    assert!((v - t.powf(-1.0 / 3.0) * b).abs() < 1e-8);
    assert!(duhamel_time_integral(1.0, 0.0, 1.0).is_err());
    assert!(duhamel_time_integral(0.5, 0.5, 0.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn time_integral_matches_quadrature(a in 0.0f64..0.95, b in 0.0f64..0.95, t in 0.1f64..10.0) {
        let exact = duhamel_time_integral(a, b, t).unwrap();
        let quad = duhamel_time_integral_quadrature(a, b, t).unwrap();
        prop_assert!((exact - quad).abs() < 1e-8 * exact.max(1.0), "{exact} vs {quad}");
    }

    #[test]
    fn bilinear_is_quadratic(c in -4.0f64..4.0) {
        let g = SpaceGrid::new(3, 8, PI).unwrap();
        let tg = TimeGrid::new(1.0, 4, 2.0).unwrap();
        let u = SpaceTimeVectorField::new(tg, vec![taylor_green(1.0, &g); 4]).unwrap();
        let b = duhamel_bilinear_term(&u, 1.5, TimeRule::Rectangle).unwrap();
        let bc = duhamel_bilinear_term(&u.scaled(c), 1.5, TimeRule::Rectangle).unwrap();
        let err = bc.axpy(-c * c, &b).unwrap().max_abs();
        prop_assert!(err <= 1e-12 * (c * c * b.max_abs()).max(1e-300));
    }
}
