//! One-dimensional quadrature: adaptive Gauss-Kronrod (7/15) and fixed Gauss-Legendre.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of an adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Estimate {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Estimate { value: kron * h, error: ((kron - gauss) * h).abs() }
}

/// Globally adaptive Gauss-Kronrod on `[a, b]`.
///
/// Stops once the summed error estimate is below `max(abs_tol, rel_tol*|I|)`.
/// Endpoint singularities of integrable power type are handled by bisection,
/// since the Kronrod nodes never touch the endpoints.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let max_intervals = 4000;
    let first = gk15(&mut f, a, b);
    let mut pieces = vec![(a, b, first)];
    let mut total = first.value;
    let mut err = first.error;
    while err > abs_tol.max(rel_tol * total.abs()) {
        if pieces.len() >= max_intervals {
            return Err(Error::Quadrature { achieved: err, target: abs_tol.max(rel_tol * total.abs()) });
        }
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2.error.total_cmp(&y.1 .2.error))
            .expect("non-empty");
        let (lo, hi, est) = pieces.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // Interval cannot be split further in floating point.
            return Err(Error::Quadrature { achieved: err, target: abs_tol.max(rel_tol * total.abs()) });
        }
        let left = gk15(&mut f, lo, mid);
        let right = gk15(&mut f, mid, hi);
        total += left.value + right.value - est.value;
        err += left.error + right.error - est.error;
        pieces.push((lo, mid, left));
        pieces.push((mid, hi, right));
    }
    // Re-sum to shed accumulated cancellation from the running updates.
    let value = pieces.iter().map(|p| p.2.value).sum();
    let error = pieces.iter().map(|p| p.2.error).sum();
    Ok(Estimate { value, error })
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Fixed Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    rule.0.iter().zip(&rule.1).map(|(x, w)| w * f(c + h * x)).sum::<f64>() * h
}
