//! Adaptive Dormand–Prince 5(4) integrator with continuous output.
//!
//! The solver is generic over fixed-size states `[f64; N]`. Each accepted
//! step keeps the coefficients of the fourth-order continuous extension, so a
//! solution can be evaluated (and differentiated) anywhere on its interval.
//!
//! Reference: Hairer, Nørsett & Wanner, *Solving Ordinary Differential
//! Equations I*, section II.5 and the `DOPRI5` code.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const MAX_STEPS: usize = 5_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
    pub max_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rel: 1e-10,
            abs: 1e-10,
            max_step: f64::INFINITY,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    /// Largest scaled local error estimate among accepted steps (≤ 1).
    pub max_error: f64,
}

/// One accepted step with its continuous extension.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseSegment<const N: usize> {
    pub t0: f64,
    pub h: f64,
    coeffs: [[f64; N]; 5],
}

impl<const N: usize> DenseSegment<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = &self.coeffs;
        std::array::from_fn(|i| r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i]))))
    }

    /// Time derivative of the interpolant.
    pub fn derivative(&self, t: f64) -> [f64; N] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let [_, r2, r3, r4, r5] = &self.coeffs;
        std::array::from_fn(|i| {
            let a = r4[i] + th1 * r5[i];
            let da = -r5[i];
            let b = r3[i] + th * a;
            let db = a + th * da;
            let c = r2[i] + th1 * b;
            let dc = -b + th1 * db;
            (c + th * dc) / self.h
        })
    }

    /// Adds a function that is linear across the step (`start` at `t0`,
    /// `end` at `t1`) to component `i`.
    pub fn add_linear(&mut self, i: usize, start: f64, end: f64) {
        self.coeffs[0][i] += start;
        self.coeffs[1][i] += end - start;
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Termination {
    Completed,
    /// The stop predicate became true at this time.
    Stopped(f64),
}

#[derive(Clone, Debug)]
pub struct Solution<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
    pub segments: Vec<DenseSegment<N>>,
    pub stats: StepStats,
    pub termination: Termination,
}

impl<const N: usize> Solution<N> {
    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("solution has at least one sample")
    }

    pub fn last(&self) -> [f64; N] {
        *self.states.last().expect("solution has at least one sample")
    }

    fn segment_index(&self, t: f64) -> Option<usize> {
        let (a, b) = (self.t_start(), self.t_end());
        if self.segments.is_empty() || t < a.min(b) || t > a.max(b) {
            return None;
        }
        let i = if b >= a {
            self.times.partition_point(|&s| s <= t)
        } else {
            self.times.partition_point(|&s| s >= t)
        };
        Some(i.saturating_sub(1).min(self.segments.len() - 1))
    }

    pub fn eval(&self, t: f64) -> Option<[f64; N]> {
        if self.segments.is_empty() {
            return (t == self.t_start()).then(|| self.states[0]);
        }
        if t == self.t_end() {
            return Some(self.last());
        }
        self.segment_index(t).map(|i| self.segments[i].eval(t))
    }

    pub fn derivative(&self, t: f64) -> Option<[f64; N]> {
        self.segment_index(t).map(|i| self.segments[i].derivative(t))
    }
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| y[i] + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>())
}

fn all_finite<const N: usize>(v: &[f64; N]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn scaled_norm<const N: usize>(v: &[f64; N], y: &[f64; N], tol: &Tolerances, w: &[f64; N]) -> f64 {
    let s: f64 = (0..N)
        .map(|i| {
            let sk = tol.abs * w[i] + tol.rel * y[i].abs();
            (v[i] / sk).powi(2)
        })
        .sum();
    (s / N as f64).sqrt()
}

fn initial_step<const N: usize, F>(
    f: &mut F,
    t0: f64,
    y0: &[f64; N],
    f0: &[f64; N],
    dir: f64,
    tol: &Tolerances,
    w: &[f64; N],
    span: f64,
) -> f64
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let d0 = scaled_norm(y0, y0, tol, w);
    let d1 = scaled_norm(f0, y0, tol, w);
    let mut h = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(tol.max_step).min(span);
    let y1 = axpy(y0, dir * h, &[(1.0, f0)]);
    let f1 = f(t0 + dir * h, &y1);
    let diff: [f64; N] = std::array::from_fn(|i| f1[i] - f0[i]);
    let d2 = scaled_norm(&diff, y0, tol, w) / h;
    let m = d1.max(d2);
    let h1 = if m <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / m).powf(0.2)
    };
    (100.0 * h).min(h1).min(tol.max_step).min(span)
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end` (either direction).
///
/// `stop` is checked on every accepted state; when it first returns true the
/// crossing is located by bisection on the continuous extension and the
/// solution ends there with [`Termination::Stopped`].
pub fn integrate<const N: usize, F, S>(
    f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    tol: &Tolerances,
    stop: S,
) -> Result<Solution<N>>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    S: FnMut(&[f64; N]) -> bool,
{
    integrate_weighted(f, t0, y0, t_end, tol, |_| [1.0; N], stop)
}

/// As [`integrate`], with the absolute tolerance of component `i` multiplied
/// by `weight(y)[i]` at the start of each step.
pub fn integrate_weighted<const N: usize, F, W, S>(
    f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    tol: &Tolerances,
    weight: W,
    stop: S,
) -> Result<Solution<N>>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    W: Fn(&[f64; N]) -> [f64; N],
    S: FnMut(&[f64; N]) -> bool,
{
    integrate_full(f, t0, y0, t_end, tol, weight, &[], stop)
}

/// As [`integrate`], but no step crosses a time in `breaks`; use it when `f`
/// is only piecewise smooth, e.g. built from another solution's dense output.
pub fn integrate_with_breaks<const N: usize, F, S>(
    f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    tol: &Tolerances,
    breaks: &[f64],
    stop: S,
) -> Result<Solution<N>>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    S: FnMut(&[f64; N]) -> bool,
{
    integrate_full(f, t0, y0, t_end, tol, |_| [1.0; N], breaks, stop)
}

#[allow(clippy::too_many_arguments)]
fn integrate_full<const N: usize, F, W, S>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    tol: &Tolerances,
    weight: W,
    breaks: &[f64],
    mut stop: S,
) -> Result<Solution<N>>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    W: Fn(&[f64; N]) -> [f64; N],
    S: FnMut(&[f64; N]) -> bool,
{
    if !(tol.rel > 0.0 && tol.abs > 0.0 && tol.max_step > 0.0) {
        return Err(Error::Settings(format!("bad tolerances {tol:?}")));
    }
    let mut stats = StepStats::default();
    let mut sol = Solution {
        times: vec![t0],
        states: vec![y0],
        segments: Vec::new(),
        stats,
        termination: Termination::Completed,
    };
    if t_end == t0 {
        return Ok(sol);
    }
    let dir = (t_end - t0).signum();
    let span = (t_end - t0).abs();

    let mut k1 = f(t0, &y0);
    stats.evaluations += 1;
    if !all_finite(&k1) {
        return Err(Error::Domain(format!("non-finite derivative at t = {t0}")));
    }
    let mut h = initial_step(&mut f, t0, &y0, &k1, dir, tol, &weight(&y0), span);
    stats.evaluations += 1;
    let mut t = t0;
    let mut y = y0;
    let mut fac_old: f64 = 1e-4;
    let mut last = false;
    let mut rejected_last = false;

    loop {
        if stats.accepted + stats.rejected > MAX_STEPS {
            return Err(Error::Stiff { t, h });
        }
        if h.abs() < 1e-14 * t.abs().max(1.0) {
            return Err(Error::Stiff { t, h });
        }
        if (t + dir * h - t_end) * dir >= 0.0 || (t_end - t).abs() - h < 1e-12 * span {
            h = (t_end - t).abs();
            last = true;
        }
        // nearest break strictly ahead of t
        let mut h_step = h;
        if let Some(b) = breaks
            .iter()
            .map(|&b| (b - t) * dir)
            .filter(|&d| d > 1e-12 * span && d < h)
            .min_by(f64::total_cmp)
        {
            h_step = b;
        }
        let clipped = h_step < h;
        if clipped {
            last = false;
        }
        let hs = dir * h_step;
        let k2 = f(t + C2 * hs, &axpy(&y, hs, &[(A21, &k1)]));
        let k3 = f(t + C3 * hs, &axpy(&y, hs, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(t + C4 * hs, &axpy(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(
            t + C5 * hs,
            &axpy(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            t + hs,
            &axpy(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let y1 = axpy(&y, hs, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = f(t + hs, &y1);
        stats.evaluations += 6;

        let finite = [&k2, &k3, &k4, &k5, &k6, &k7, &y1].iter().all(|v| all_finite(v));
        let err = if finite {
            let e: [f64; N] = std::array::from_fn(|i| {
                hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
            });
            let w = weight(&y);
            let s: f64 = (0..N)
                .map(|i| {
                    let sk = tol.abs * w[i] + tol.rel * y[i].abs().max(y1[i].abs());
                    (e[i] / sk).powi(2)
                })
                .sum();
            (s / N as f64).sqrt()
        } else {
            f64::INFINITY
        };

        if err <= 1.0 {
            stats.accepted += 1;
            stats.max_error = stats.max_error.max(err);
            let ydiff: [f64; N] = std::array::from_fn(|i| y1[i] - y[i]);
            let bspl: [f64; N] = std::array::from_fn(|i| hs * k1[i] - ydiff[i]);
            let coeffs = [
                y,
                ydiff,
                bspl,
                std::array::from_fn(|i| ydiff[i] - hs * k7[i] - bspl[i]),
                std::array::from_fn(|i| {
                    hs * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
                }),
            ];
            let seg = DenseSegment { t0: t, h: hs, coeffs };
            let t_new = if last { t_end } else { t + hs };

            if stop(&y1) {
                let t_hit = locate(&seg, t, t_new, &mut stop);
                let y_hit = seg.eval(t_hit);
                sol.segments.push(seg);
                sol.times.push(t_hit);
                sol.states.push(y_hit);
                sol.termination = Termination::Stopped(t_hit);
                break;
            }
            sol.segments.push(seg);
            sol.times.push(t_new);
            sol.states.push(y1);
            if last {
                break;
            }

            let fac11 = err.max(1e-16).powf(0.2 - BETA * 0.75);
            let mut fac = fac11 / fac_old.powf(BETA);
            fac = (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = (h_step / fac).min(tol.max_step);
            if rejected_last {
                h_new = h_new.min(h_step);
            }
            if clipped {
                // a short step forced by a break says nothing about the next one
                h_new = h_new.max(h);
            }
            fac_old = err.max(1e-4);
            t = t_new;
            y = y1;
            k1 = k7;
            h = h_new;
            rejected_last = false;
        } else {
            stats.rejected += 1;
            last = false;
            rejected_last = true;
            let shrink = if err.is_finite() {
                (err.powf(0.2) / SAFETY).min(1.0 / FAC_MIN)
            } else {
                10.0
            };
            h = h_step / shrink;
        }
    }
    sol.stats = stats;
    Ok(sol)
}

/// First time in `[ta, tb]` at which `stop` holds on the continuous extension.
fn locate<const N: usize, S>(seg: &DenseSegment<N>, ta: f64, tb: f64, stop: &mut S) -> f64
where
    S: FnMut(&[f64; N]) -> bool,
{
    let (mut lo, mut hi) = (ta, tb);
    for _ in 0..200 {
        if (hi - lo).abs() <= 1e-13 * (1.0 + hi.abs()) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if stop(&seg.eval(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tight() -> Tolerances {
        Tolerances {
            rel: 1e-12,
            abs: 1e-12,
            max_step: f64::INFINITY,
        }
    }

    #[test]
    fn exponential_growth() {
        let sol = integrate(|_, y: &[f64; 1]| [y[0]], 0.0, [1.0], 2.0, &tight(), |_| false).unwrap();
        assert!((sol.last()[0] - 2f64.exp()).abs() < 1e-10);
        assert_eq!(sol.t_end(), 2.0);
    }

    #[test]
    fn harmonic_oscillator_dense_output() {
        let sol = integrate(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [0.0, 1.0],
            10.0,
            &tight(),
            |_| false,
        )
        .unwrap();
        for i in 0..=1000 {
            let t = i as f64 * 0.01;
            let y = sol.eval(t).unwrap();
            assert!((y[0] - t.sin()).abs() < 1e-9, "t = {t}");
            let tc = t.min(9.999_999);
            let dy = sol.derivative(tc).unwrap();
            assert!((dy[0] - tc.cos()).abs() < 1e-7, "t = {t}");
        }
    }

    #[test]
    fn backward_in_time() {
        let sol = integrate(|_, y: &[f64; 1]| [y[0]], 1.0, [1.0], 0.0, &tight(), |_| false).unwrap();
        assert!((sol.last()[0] - (-1f64).exp()).abs() < 1e-11);
        assert!(sol.eval(0.5).is_some());
    }

    #[test]
    fn stop_predicate_locates_crossing() {
        // y = t, stop when y > 0.7
        let sol = integrate(|_, _: &[f64; 1]| [1.0], 0.0, [0.0], 2.0, &tight(), |y| y[0] > 0.7).unwrap();
        match sol.termination {
            Termination::Stopped(t) => assert!((t - 0.7).abs() < 1e-10),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn blow_up_is_caught_by_predicate() {
        // y' = y^2, y(0) = 1 blows up at t = 1
        let sol = integrate(
            |_, y: &[f64; 1]| [y[0] * y[0]],
            0.0,
            [1.0],
            2.0,
            &tight(),
            |y| y[0].abs() > 1e8,
        )
        .unwrap();
        let Termination::Stopped(t) = sol.termination else {
            panic!("no blow-up detected")
        };
        assert!((t - 1.0).abs() < 1e-6);
    }

    #[test]
    fn max_step_is_honoured() {
        let tol = Tolerances {
            max_step: 0.01,
            ..tight()
        };
        let sol = integrate(|_, _: &[f64; 1]| [0.0], 0.0, [1.0], 1.0, &tol, |_| false).unwrap();
        assert!(sol.segments.iter().all(|s| s.h.abs() <= 0.01 + 1e-15));
    }
}
