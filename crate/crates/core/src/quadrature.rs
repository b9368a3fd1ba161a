//! Deterministic one- and two-dimensional quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integral value with an error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

// Kronrod 15-point nodes (non-negative half) and weights, with the embedded
// 7-point Gauss weights on the odd-index nodes.
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

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64)> {
    let c = 0.5 * (a + b);
    let hl = 0.5 * (b - a);
    let fc = f(c);
    if !fc.is_finite() {
        return Err(Error::Integration(format!("non-finite integrand at {c}")));
    }
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let dx = hl * XGK[j];
        let (f1, f2) = (f(c - dx), f(c + dx));
        if !(f1.is_finite() && f2.is_finite()) {
            return Err(Error::Integration(format!("non-finite integrand near {c} ± {dx}")));
        }
        rk += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            rg += WG[j / 2] * (f1 + f2);
        }
    }
    Ok((rk * hl, ((rk - rg) * hl).abs()))
}

/// Adaptive Gauss–Kronrod (7, 15) quadrature by global interval bisection.
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
    if a > b {
        return integrate(f, b, a, abs_tol, rel_tol).map(|e| Estimate {
            value: -e.value,
            error: e.error,
        });
    }
    let (v, e) = gk15(&mut f, a, b)?;
    let mut parts = vec![(a, b, v, e)];
    for _ in 0..2000 {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // interval can no longer be split in floating point
            parts.push((lo, hi, 0.0, 0.0));
            continue;
        }
        let (v1, e1) = gk15(&mut f, lo, mid)?;
        let (v2, e2) = gk15(&mut f, mid, hi)?;
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
    // sum in a fixed order so the result does not depend on the refinement history
    parts.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(Estimate {
        value: parts.iter().map(|p| p.2).sum(),
        error: parts.iter().map(|p| p.3).sum(),
    })
}

/// Iterated adaptive quadrature over the rectangle `[x0, x1] × [y0, y1]`.
pub fn integrate_2d<F: FnMut(f64, f64) -> f64>(
    mut f: F,
    (x0, x1): (f64, f64),
    (y0, y1): (f64, f64),
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Estimate> {
    let mut inner_error = 0.0;
    let mut failure = None;
    let outer = integrate(
        |x| match integrate(|y| f(x, y), y0, y1, abs_tol, rel_tol) {
            Ok(est) => {
                inner_error += est.error;
                est.value
            }
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        x0,
        x1,
        abs_tol,
        rel_tol,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let outer = outer?;
    // inner errors are weighted roughly by the outer interval length per node
    let evaluations = 15.0;
    Ok(Estimate {
        value: outer.value,
        error: outer.error + inner_error * (x1 - x0).abs() / evaluations,
    })
}

/// Fixed-order Gauss–Legendre rule on `[a, b]` (n = 20).
pub fn gauss_legendre_20<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> f64 {
    const X: [f64; 10] = [
        0.076_526_521_133_497_33,
        0.227_785_851_141_645_1,
        0.373_706_088_715_419_6,
        0.510_867_001_950_827_1,
        0.636_053_680_726_515,
        0.746_331_906_460_150_8,
        0.839_116_971_822_218_8,
        0.912_234_428_251_325_9,
        0.963_971_927_277_913_8,
        0.993_128_599_185_094_9,
    ];
    const W: [f64; 10] = [
        0.152_753_387_130_725_85,
        0.149_172_986_472_603_75,
        0.142_096_109_318_382_05,
        0.131_688_638_449_176_63,
        0.118_194_531_961_518_42,
        0.101_930_119_817_240_44,
        0.083_276_741_576_704_75,
        0.062_672_048_334_109_06,
        0.040_601_429_800_386_94,
        0.017_614_007_139_152_12,
    ];
    let c = 0.5 * (a + b);
    let hl = 0.5 * (b - a);
    let s: f64 = X
        .iter()
        .zip(W.iter())
        .map(|(x, w)| w * (f(c - hl * x) + f(c + hl * x)))
        .sum();
    s * hl
}
