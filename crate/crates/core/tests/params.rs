use fracns_core::params::*;
use proptest::prelude::*;

fn base() -> ModelParams {
    ModelParams::new(Number::ratio(3, 2), 3).unwrap()
}

fn p(n: i64) -> Exponent {
    Exponent::Finite(Number::int(n))
}

#[test]
fn rho_for_force_a() {
    let t = derive_thm1_indices(base(), p(3), Number::ratio(1, 3)).unwrap();
    assert_eq!(t.rho, Number::ratio(4, 9));
    assert!(t.rho.is_exact());
}

#[test]
fn p0_on_boundary_rejected() {
    let e = derive_thm1_indices(base(), p(2), Number::ratio(1, 3)).unwrap_err();
    assert!(e.to_string().contains("d/alpha < p0"), "{e}");
}

#[test]
fn infinite_p0() {
    let t = derive_thm1_indices(base(), Exponent::Infinity, Number::int(1)).unwrap();
    // 2 - (1 + 0 + 1)/(3/2)
    assert_eq!(t.rho, Number::ratio(2, 3));
}

#[test]
fn frak_indices_match_counterexamples() {
    let t = derive_thm2_indices(base(), Number::from_f64(2.9), Number::from_f64(1.4)).unwrap();
    assert_eq!(t.frak_p, Number::ratio(29, 12));
    assert_eq!(t.frak_q, Number::ratio(15, 2));
    let t = derive_thm2_indices(base(), Number::ratio(5, 2), Number::ratio(7, 5)).unwrap();
    assert_eq!(t.frak_p, Number::ratio(25, 12));
    assert_eq!(t.frak_q, Number::ratio(15, 2));
}

#[test]
fn p1_lower_boundary_rejected_with_warning() {
    let t = evaluate_thm2_indices(base(), Number::int(2), Number::from_f64(1.4));
    assert!(!t.admissible());
    assert!(t.violations()[0].contains("2 < p1"));
    assert_eq!(t.warnings.len(), 1);
}

#[test]
fn f_to_w_fails_for_force_a() {
    let t1 = derive_thm1_indices(base(), p(3), Number::ratio(1, 3)).unwrap();
    let t2 = derive_thm2_indices(base(), Number::from_f64(2.9), Number::from_f64(1.4)).unwrap();
    let v = check_embedding_f_to_w(&t1, &t2).unwrap();
    assert!(!v.holds);
    let names: Vec<_> = v.violated().iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names, ["rho * frak_p < 1", "beta = gamma"]);
    // ρ𝔭 = 29/27
    assert!((v.conditions[0].slack + 2.0 / 27.0).abs() < 1e-15);
}

#[test]
fn f_to_w_raw_cases() {
    let g = Number::ratio(1, 3);
    assert!(embedding_f_to_w_raw(Number::from_f64(0.3), Number::int(2), p(3), g, g).holds);
    let v = embedding_f_to_w_raw(Number::from_f64(0.4), Number::from_f64(2.6), p(3), g, g);
    assert!(!v.holds);
    assert_eq!(v.violated()[0].name, "rho * frak_p < 1");
}

#[test]
fn w_to_vinv_cases() {
    let t = derive_thm2_indices(base(), Number::ratio(5, 2), Number::int(1)).unwrap();
    assert_eq!(t.frak_p, Number::ratio(5, 4));
    assert_eq!(t.frak_q, Number::ratio(9, 2));
    assert!(check_embedding_w_to_vinv(&t).unwrap().holds);

    let t = derive_thm2_indices(base(), Number::ratio(5, 2), Number::ratio(7, 5)).unwrap();
    let v = check_embedding_w_to_vinv(&t).unwrap();
    assert!(!v.holds);
    assert!(v.violated().iter().any(|c| c.name == "gamma = 1"));

    let t = derive_thm2_indices(base(), Number::from_f64(2.9), Number::int(1)).unwrap();
    assert!(check_embedding_w_to_vinv(&t).unwrap().holds);
}

#[test]
fn dimension_two_flagged() {
    let p2 = ModelParams::new(Number::ratio(3, 2), 2).unwrap();
    let t = derive_thm2_indices(p2, Number::ratio(5, 2), Number::ratio(7, 5)).unwrap();
    assert!(t.warnings.iter().any(|w| w.contains("marginal")));
}

#[test]
fn verdict_json_shape() {
    let t = derive_thm1_indices(base(), p(3), Number::ratio(1, 3)).unwrap();
    let v = serde_json::to_value(&t).unwrap();
    assert_eq!(v["rho"], "4/9");
    assert_eq!(v["p0"], 3);
}

#[test]
fn frak_q_can_fall_below_p1_near_alpha_one() {
    let params = ModelParams::new(Number::ratio(25, 24), 2).unwrap();
    let t = derive_thm2_indices(params, Number::ratio(499, 24), Number::ratio(1, 2)).unwrap();
    assert!(t.frak_q.lt(t.p1));
    assert!(t.frak_p.lt(t.frak_q));
}

/// `num/den` with `lo < num/den < hi`, on a grid of 1/den.
fn rational_in(lo: f64, hi: f64, den: i64, u: f64) -> Option<Number> {
    let a = (lo * den as f64).floor() as i64 + 1;
    let b = (hi * den as f64).ceil() as i64 - 1;
    if b < a {
        return None;
    }
    let k = a + ((b - a + 1) as f64 * u).floor().min((b - a) as f64) as i64;
    let x = Number::ratio(k, den);
    (x.to_f64() > lo && x.to_f64() < hi).then_some(x)
}

fn draw_params(a_num: i64, d: u32) -> ModelParams {
    ModelParams::new(Number::ratio(24 + a_num, 24), d).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn thm1_rho_in_unit_interval(a_num in 1i64..24, d in 2u32..5, u in 0.0f64..1.0, v in 0.0f64..1.0, inf in any::<bool>()) {
        let params = draw_params(a_num, d);
        let alpha = params.alpha_f64();
        let p0 = if inf {
            Exponent::Infinity
        } else {
            let lo = d as f64 / alpha;
            match rational_in(lo, lo + 20.0, 60, u) {
                Some(x) => Exponent::Finite(x),
                None => return Ok(()),
            }
        };
        let up = alpha - p0.to_f64().recip() * d as f64;
        let Some(beta) = rational_in((up - 1.0).max(0.0), up, 360, v) else { return Ok(()) };
        let t = evaluate_thm1_indices(params, p0, beta);
        prop_assume!(t.admissible());
        prop_assert!(t.rho.to_f64() > 0.0 && t.rho.to_f64() < 1.0, "rho = {}", t.rho);
        prop_assert_eq!(t.scaling_exponent(), Number::int(0));
        prop_assert_eq!(evaluate_thm1_indices(params, p0, beta), t);
    }

    #[test]
    fn thm2_frak_indices_ordered(a_num in 1i64..24, d in 2u32..5, u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let params = draw_params(a_num, d);
        let alpha = params.alpha_f64();
        let Some(p1) = rational_in(2.0, alpha / (alpha - 1.0), 120, u) else { return Ok(()) };
        let lo = (2.0 * alpha - 1.0 - (alpha - 1.0) * p1.to_f64()).max(0.0);
        let Some(gamma) = rational_in(lo, alpha, 360, v) else { return Ok(()) };
        let t = evaluate_thm2_indices(params, p1, gamma);
        prop_assume!(t.admissible());
        prop_assert!(t.frak_p.to_f64() > 1.0);
        prop_assert!(t.frak_p.le(t.p1));
        prop_assert!(t.frak_p.lt(t.frak_q));
        // 𝔮 > (d+α)/((α-1)p1), which beats p1 < α/(α-1) once α² ≤ (d+α)(α-1).
        if alpha * alpha <= (d as f64 + alpha) * (alpha - 1.0) {
            prop_assert!(t.p1.lt(t.frak_q), "frak_q = {} vs p1 = {}", t.frak_q, t.p1);
        }
        prop_assert_eq!(t.scaling_exponent(), Number::int(0));
    }
}
