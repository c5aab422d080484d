//! Adaptive Gauss–Kronrod integration.

use crate::error::{CoreError, Result};

// 15-point Kronrod nodes on [-1, 1] (nonnegative half) and weights; the
// embedded 7-point Gauss rule uses the odd-indexed nodes.
const XK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WK: [f64; 8] = [
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

fn kronrod(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XK[j];
        let s = f(c - x) + f(c + x);
        k += WK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// `∫_a^b f` to absolute accuracy `tol` by recursive bisection.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut total = 0.0;
    let mut stack = vec![(a, b, tol, 0u32)];
    while let Some((lo, hi, t, depth)) = stack.pop() {
        let (v, err) = kronrod(&f, lo, hi);
        if !v.is_finite() {
            return Err(CoreError::Numerical(format!("integrand not finite on [{lo}, {hi}]")));
        }
        if err <= t || depth >= 60 || (hi - lo).abs() < 1e-15 * (1.0 + lo.abs()) {
            if err > t && err > 1e3 * tol {
                return Err(CoreError::Numerical(format!(
                    "quadrature stalled on [{lo}, {hi}] with error {err:.2e}"
                )));
            }
            total += v;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, 0.5 * t, depth + 1));
            stack.push((mid, hi, 0.5 * t, depth + 1));
        }
    }
    Ok(total)
}

/// Same integral after the smoothstep change of variables
/// `x = a + (b - a)(3s^2 - 2s^3)`, whose vanishing derivative at both ends
/// tames integrable endpoint singularities such as quantile functions at 0 or 1.
pub fn integrate_smooth(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    let w = b - a;
    integrate(
        |s| {
            // Measure the offset from the nearer end so points close to b
            // keep their resolution.
            let x = if s <= 0.5 {
                a + w * s * s * (3.0 - 2.0 * s)
            } else {
                let t = 1.0 - s;
                b - w * t * t * (1.0 + 2.0 * s)
            };
            let dx = 6.0 * w * s * (1.0 - s);
            // Points that round onto an endpoint carry vanishing weight; the
            // integrand may be infinite there.
            if dx == 0.0 || x <= a.min(b) || x >= a.max(b) {
                0.0
            } else {
                f(x) * dx
            }
        },
        0.0,
        1.0,
        tol,
    )
}
