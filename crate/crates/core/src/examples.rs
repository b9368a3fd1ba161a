//! An exact Anosov magnetic system whose metric is not Anosov, plus the
//! cohomology bookkeeping and the magnetic length functional.
//!
//! The metric is a surface of revolution `ds² + r(s)² dθ²`. Its profile `u`
//! is `tanh` except on the band `C_δ = {|s| ≤ δ}`, where it is blended to the
//! line `-a s`; this makes the parallel `s = 0` a closed geodesic in
//! positive curvature. The profile `v` agrees with `u` near the band and has
//! curvature `-1 - ε` far out. The intensity `b₊` equals `1/2` on
//! `[-δ₂, δ₂]` and decays to zero before `δ₄`.

use std::io::{self, Write};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{self, FlowSettings};
use crate::fmt17;
use crate::geom::{
    self, angle_diff, ln_cosh, Chart, MagneticIntensity, MagneticSystem, Point, Profile, Rect,
    RevolutionChart, ScalarField, UnitTangent,
};
use crate::hyperbolic::{find_closed_orbit, hypercycle_start, ClosedOrbit, HyperbolicCylinder, ShootingOptions};
use crate::quadrature::{self, Estimate};
use crate::stability::{anosov_certificate_with, CertificateReport, CertificateSettings, SamplerBox};

/// Number of grid points used by every validation clause.
pub const GRID: usize = 2001;

fn smooth3(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

fn smooth3_d(x: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        return 0.0;
    }
    6.0 * x * (1.0 - x)
}

fn smooth5(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * x * (10.0 + x * (-15.0 + 6.0 * x))
}

fn smooth5_d(x: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        return 0.0;
    }
    30.0 * x * x * (1.0 - x) * (1.0 - x)
}

/// Central difference with a fixed small step; the profiles are only C¹ or
/// C² at their joints, where a larger step is dominated by the jump.
fn central(f: &dyn Fn(f64) -> f64, s: f64) -> f64 {
    let h = 1e-6;
    (f(s + h) - f(s - h)) / (2.0 * h)
}

fn artanh_clamped(x: f64) -> f64 {
    x.clamp(-1.0 + 1e-15, 1.0 - 1e-15).atanh()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileParams {
    pub delta: f64,
    pub delta1: f64,
    pub delta2: f64,
    /// Carried for the ordering constraint only.
    pub delta3: f64,
    pub epsilon: f64,
    /// Slope `a` of the core line `-a s` on the band.
    pub core_slope: f64,
    /// `false` keeps `u = tanh` everywhere.
    pub perturbed: bool,
}

impl Default for ProfileParams {
    fn default() -> Self {
        Self {
            delta: 0.05,
            delta1: 0.5,
            delta2: 1.0,
            delta3: 3.0,
            epsilon: 0.01,
            core_slope: 0.1,
            perturbed: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BumpParams {
    pub delta2: f64,
    pub delta4: f64,
    pub epsilon: f64,
    /// Plateau value on `[-δ₂, δ₂]`.
    pub height: f64,
    /// Shoulder width; the support is `[-(δ₂ + width), δ₂ + width]`.
    pub width: f64,
}

impl Default for BumpParams {
    fn default() -> Self {
        Self {
            delta2: 1.0,
            delta4: 10.0,
            epsilon: 0.01,
            height: 0.5,
            width: 9.0,
        }
    }
}

const TABLE_STEP: f64 = 1e-4;

/// `v` and `ln r` on `[δ₁, δ₂]`, sampled on a uniform grid with derivatives
/// for cubic Hermite interpolation.
#[derive(Clone, Debug)]
struct TransitionTable {
    start: f64,
    step: f64,
    v: Vec<f64>,
    dv: Vec<f64>,
    lnr: Vec<f64>,
}

fn hermite(y0: f64, d0: f64, y1: f64, d1: f64, h: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * h * d0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * h * d1
}

impl TransitionTable {
    fn locate(&self, s: f64) -> (usize, f64) {
        let x = ((s - self.start) / self.step).max(0.0);
        let i = (x.floor() as usize).min(self.v.len().saturating_sub(2));
        (i, x - i as f64)
    }

    fn v(&self, s: f64) -> f64 {
        if self.v.len() < 2 {
            return self.v[0];
        }
        let (i, t) = self.locate(s);
        hermite(self.v[i], self.dv[i], self.v[i + 1], self.dv[i + 1], self.step, t)
    }

    fn lnr(&self, s: f64) -> f64 {
        if self.v.len() < 2 {
            return self.lnr[0];
        }
        let (i, t) = self.locate(s);
        hermite(self.lnr[i], self.v[i], self.lnr[i + 1], self.v[i + 1], self.step, t)
    }
}

/// Both profiles `u` and `v` of the construction.
#[derive(Clone, Debug)]
pub struct BurnsProfile {
    pub params: ProfileParams,
    lnr_band: f64,
    table: TransitionTable,
    tail_c: f64,
    tail_s0: f64,
    v_end: f64,
    lnr_end: f64,
}

impl BurnsProfile {
    pub fn new(params: ProfileParams) -> Self {
        let mut p = Self {
            params,
            lnr_band: 0.0,
            table: TransitionTable {
                start: 0.0,
                step: TABLE_STEP,
                v: vec![0.0],
                dv: vec![0.0],
                lnr: vec![0.0],
            },
            tail_c: (1.0 + params.epsilon).max(1e-12).sqrt(),
            tail_s0: 0.0,
            v_end: 0.0,
            lnr_end: 0.0,
        };
        let band = params.delta.abs();
        p.lnr_band = quadrature::gauss_legendre_20(|s| p.u(s), 0.0, band);
        p.build_transition();
        p
    }

    fn build_transition(&mut self) {
        let d1 = self.params.delta1.abs();
        let d2 = self.params.delta2.abs().max(d1);
        let n = ((d2 - d1) / TABLE_STEP).ceil().max(1.0) as usize;
        let h = (d2 - d1) / n as f64;
        let rhs = |s: f64, y: [f64; 2]| [-self.prescribed_k_v(s) - y[0] * y[0], y[0]];
        let mut y = [self.u(d1), self.lnr_u(d1)];
        let mut table = TransitionTable {
            start: d1,
            step: h.max(f64::MIN_POSITIVE),
            v: Vec::with_capacity(n + 1),
            dv: Vec::with_capacity(n + 1),
            lnr: Vec::with_capacity(n + 1),
        };
        for i in 0..=n {
            let s = d1 + h * i as f64;
            table.v.push(y[0]);
            table.dv.push(rhs(s, y)[0]);
            table.lnr.push(y[1]);
            if i == n || h == 0.0 {
                break;
            }
            let k1 = rhs(s, y);
            let k2 = rhs(s + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
            let k3 = rhs(s + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
            let k4 = rhs(s + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
            for j in 0..2 {
                y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
        }
        self.v_end = *table.v.last().expect("non-empty table");
        self.lnr_end = *table.lnr.last().expect("non-empty table");
        self.table = table;
        let c = self.tail_c;
        self.tail_s0 = d2 - artanh_clamped(self.v_end / c) / c;
    }

    /// Curvature prescribed for `v` on the transition `δ₁ ≤ |s| ≤ δ₂`.
    fn prescribed_k_v(&self, a: f64) -> f64 {
        let p = &self.params;
        let x = if p.delta2 > p.delta1 { (a - p.delta1) / (p.delta2 - p.delta1) } else { 1.0 };
        -1.0 - p.epsilon * smooth5(x)
    }

    pub fn u(&self, s: f64) -> f64 {
        let p = &self.params;
        if !p.perturbed || s.abs() >= p.delta {
            return s.tanh();
        }
        let w = 1.0 - smooth5(s.abs() / p.delta);
        w * (-p.core_slope * s) + (1.0 - w) * s.tanh()
    }

    pub fn du(&self, s: f64) -> f64 {
        let p = &self.params;
        let sech2 = 1.0 / s.cosh().powi(2);
        if !p.perturbed || s.abs() >= p.delta {
            return sech2;
        }
        let x = s.abs() / p.delta;
        let w = 1.0 - smooth5(x);
        let dw = -smooth5_d(x) * s.signum() / p.delta;
        dw * (-p.core_slope * s - s.tanh()) - w * p.core_slope + (1.0 - w) * sech2
    }

    pub fn lnr_u(&self, s: f64) -> f64 {
        let p = &self.params;
        let a = s.abs();
        if !p.perturbed {
            return ln_cosh(a);
        }
        if a < p.delta {
            quadrature::gauss_legendre_20(|t| self.u(t), 0.0, a)
        } else {
            self.lnr_band + ln_cosh(a) - ln_cosh(p.delta)
        }
    }

    pub fn k_u(&self, s: f64) -> f64 {
        -self.du(s) - self.u(s).powi(2)
    }

    pub fn v(&self, s: f64) -> f64 {
        let p = &self.params;
        let a = s.abs();
        if a <= p.delta1 {
            return self.u(s);
        }
        let c = self.tail_c;
        let mag = if a <= p.delta2 {
            self.table.v(a)
        } else {
            c * (c * (a - self.tail_s0)).tanh()
        };
        s.signum() * mag
    }

    pub fn dv(&self, s: f64) -> f64 {
        let p = &self.params;
        let a = s.abs();
        if a <= p.delta1 {
            return self.du(s);
        }
        let v = self.v(s);
        if a <= p.delta2 {
            -self.prescribed_k_v(a) - v * v
        } else {
            self.tail_c * self.tail_c - v * v
        }
    }

    pub fn lnr_v(&self, s: f64) -> f64 {
        let p = &self.params;
        let a = s.abs();
        if a <= p.delta1 {
            return self.lnr_u(a);
        }
        if a <= p.delta2 {
            return self.table.lnr(a);
        }
        let c = self.tail_c;
        self.lnr_end + ln_cosh(c * (a - self.tail_s0)) - ln_cosh(c * (p.delta2.max(p.delta1) - self.tail_s0))
    }

    pub fn k_v(&self, s: f64) -> f64 {
        -self.dv(s) - self.v(s).powi(2)
    }
}

/// Profile `u` as a metric.
#[derive(Clone, Debug)]
pub struct UProfile(pub Arc<BurnsProfile>);

impl Profile for UProfile {
    fn u(&self, s: f64) -> f64 {
        self.0.u(s)
    }

    fn du(&self, s: f64) -> Option<f64> {
        Some(self.0.du(s))
    }

    fn log_radius(&self, s: f64) -> f64 {
        self.0.lnr_u(s)
    }
}

/// Profile `v` as a metric; this is the metric of the magnetic system.
#[derive(Clone, Debug)]
pub struct VProfile(pub Arc<BurnsProfile>);

impl Profile for VProfile {
    fn u(&self, s: f64) -> f64 {
        self.0.v(s)
    }

    fn du(&self, s: f64) -> Option<f64> {
        Some(self.0.dv(s))
    }

    fn log_radius(&self, s: f64) -> f64 {
        self.0.lnr_v(s)
    }

    fn knots(&self) -> Vec<f64> {
        let p = &self.0.params;
        [p.delta, p.delta1, p.delta2].iter().flat_map(|&d| [-d, d]).collect()
    }
}

/// The intensity `b₊(s)`: `h` on `[-δ₂, δ₂]`, then `c·tanh(Φ)` with
/// `c² = 1/4 + ε/2` and `Φ` running from `artanh(h/c)` to 0 along a cubic
/// smoothstep. Then `|b₊'| + b₊² ≤ c²` as long as `|Φ'| ≤ c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BumpIntensity {
    pub params: BumpParams,
    c: f64,
    phi0: f64,
}

impl BumpIntensity {
    pub fn new(params: BumpParams) -> Self {
        let c = (0.25 + 0.5 * params.epsilon).max(1e-12).sqrt();
        Self {
            params,
            c,
            phi0: artanh_clamped(params.height / c),
        }
    }

    /// Smallest shoulder width for which the sup-norm constraint holds.
    pub fn minimal_width(&self) -> f64 {
        1.5 * self.phi0 / self.c
    }

    pub fn b(&self, s: f64) -> f64 {
        let p = &self.params;
        let a = s.abs();
        if a <= p.delta2 {
            return p.height;
        }
        let x = (a - p.delta2) / p.width;
        if x >= 1.0 {
            return 0.0;
        }
        self.c * (self.phi0 * (1.0 - smooth3(x))).tanh()
    }

    pub fn db(&self, s: f64) -> f64 {
        let p = &self.params;
        let a = s.abs();
        let x = (a - p.delta2) / p.width;
        if a <= p.delta2 || x >= 1.0 {
            return 0.0;
        }
        let phi = self.phi0 * (1.0 - smooth3(x));
        let dphi = -self.phi0 * smooth3_d(x) / p.width * s.signum();
        self.c * dphi / phi.cosh().powi(2)
    }
}

impl ScalarField for BumpIntensity {
    fn value(&self, p: Point) -> f64 {
        self.b(p.x)
    }

    fn gradient(&self, p: Point) -> Option<[f64; 2]> {
        Some([self.db(p.x), 0.0])
    }

    fn knots(&self) -> Vec<f64> {
        let p = &self.params;
        [p.delta2, p.delta2 + p.width].iter().flat_map(|&d| [-d, d]).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clause {
    pub id: String,
    pub description: String,
    pub passed: bool,
    /// Distance of the worst grid value from the bound; negative on failure.
    pub margin: f64,
    pub worst: f64,
    pub witness: Option<Witness>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub clauses: Vec<Clause>,
}

impl ValidationReport {
    pub fn failed(&self) -> Vec<&Clause> {
        self.clauses.iter().filter(|c| !c.passed).collect()
    }

    pub fn clause(&self, id: &str) -> Option<&Clause> {
        self.clauses.iter().find(|c| c.id == id)
    }
}

fn grid(a: f64, b: f64) -> impl Iterator<Item = f64> {
    (0..GRID).map(move |i| a + (b - a) * i as f64 / (GRID - 1) as f64)
}

/// Largest value of `f` over the points; returns `(value, argmax)`.
fn sup(points: impl Iterator<Item = f64>, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut best = (f64::NEG_INFINITY, f64::NAN);
    for s in points {
        let v = f(s);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if v > best.0 {
            best = (v, s);
        }
    }
    best
}

fn both_sides(a: f64, b: f64) -> impl Iterator<Item = f64> {
    grid(a, b).chain(grid(-b, -a))
}

struct Clauses(Vec<Clause>);

impl Clauses {
    /// Records `worst ≤ bound` (or `<` when `strict`).
    fn upper(&mut self, id: &str, description: &str, (worst, s): (f64, f64), bound: f64, strict: bool, tol: f64) {
        let ok = if strict { worst < bound + tol } else { worst <= bound + tol };
        self.0.push(Clause {
            id: id.into(),
            description: description.into(),
            passed: ok,
            margin: bound - worst,
            worst,
            witness: (!ok).then_some(Witness { s, angle: None }),
        });
    }

    fn flag(&mut self, id: &str, description: &str, ok: bool, margin: f64, worst: f64, witness: Option<Witness>) {
        self.0.push(Clause {
            id: id.into(),
            description: description.into(),
            passed: ok,
            margin,
            worst,
            witness: if ok { None } else { witness },
        });
    }
}

/// Grid resolution in the direction angle for the magnetic curvature clauses.
const ANGLES: usize = 72;

fn sup_magnetic(system: &MagneticSystem, points: impl Iterator<Item = f64>) -> (f64, Witness) {
    let mut best = (f64::NEG_INFINITY, Witness { s: f64::NAN, angle: None });
    for s in points {
        for j in 0..ANGLES {
            let phi = std::f64::consts::TAU * j as f64 / ANGLES as f64;
            let k = system.magnetic_curvature_unchecked(UnitTangent::new(s, 0.0, phi));
            let k = if k.is_nan() { f64::INFINITY } else { k };
            if k > best.0 {
                best = (k, Witness { s, angle: Some(phi) });
            }
        }
    }
    best
}

/// Checks every constraint of the construction on uniform grids of
/// [`GRID`] points.
pub fn validate_burns(profile: &BurnsProfile, bump: &BumpIntensity, s_max: f64) -> ValidationReport {
    let p = &profile.params;
    let q = &bump.params;
    let mut c = Clauses(Vec::new());

    let order = [
        ("0 < δ", 0.0 < p.delta),
        ("δ < 1/4", p.delta < 0.25),
        ("1/4 < δ₁", 0.25 < p.delta1),
        ("δ₁ < δ₂", p.delta1 < p.delta2),
        ("δ₂ < δ₃", p.delta2 < p.delta3),
        ("δ₃ < δ₄", p.delta3 < q.delta4),
        ("ε > 0", p.epsilon > 0.0),
        ("profile and bump share δ₂", p.delta2 == q.delta2),
        ("profile and bump share ε", p.epsilon == q.epsilon),
    ];
    let broken: Vec<&str> = order.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    c.0.push(Clause {
        id: "P1".into(),
        description: format!("ordering 0 < δ < 1/4 < δ₁ < δ₂ < δ₃ < δ₄, ε > 0{}", if broken.is_empty() {
            String::new()
        } else {
            format!("; violated: {}", broken.join(", "))
        }),
        passed: broken.is_empty(),
        margin: (0.25 - p.delta).min(p.delta1 - 0.25).min(p.delta2 - p.delta1).min(p.epsilon),
        worst: p.delta,
        witness: None,
    });

    let band = p.delta.abs();
    c.upper(
        "P2",
        "u = tanh outside [-δ, δ]",
        sup(both_sides(band, s_max), |s| (profile.u(s) - s.tanh()).abs()),
        0.0,
        false,
        0.0,
    );
    c.upper(
        "P3",
        "|u| < tanh(1/4) on [-δ, δ]",
        sup(grid(-band, band), |s| profile.u(s).abs()),
        0.25f64.tanh(),
        true,
        0.0,
    );
    c.upper(
        "P4",
        "K(g_u) < 1/4 on [-δ, δ]",
        sup(grid(-band, band), |s| profile.k_u(s)),
        0.25,
        true,
        0.0,
    );
    let u0 = profile.u(0.0);
    c.flag("P5", "u(0) = 0", u0 == 0.0, -u0.abs(), u0, Some(Witness { s: 0.0, angle: None }));
    let du0 = profile.du(0.0);
    c.flag("P6", "u'(0) < 0", du0 < 0.0, -du0, du0, Some(Witness { s: 0.0, angle: None }));
    let d1 = p.delta1.abs();
    c.upper(
        "P7",
        "v = u on [-δ₁, δ₁]",
        sup(grid(-d1, d1), |s| (profile.v(s) - profile.u(s)).abs()),
        0.0,
        false,
        0.0,
    );
    let d2 = p.delta2.abs().max(d1);
    c.upper(
        "P8",
        "K(g_v) ≤ 1 for δ₁ ≤ |s| ≤ δ₂",
        sup(both_sides(d1, d2), |s| profile.k_v(s)),
        1.0,
        false,
        0.0,
    );
    c.upper(
        "P8a",
        "K(g_v) ≤ -1 for δ₁ ≤ |s| ≤ δ₂",
        sup(both_sides(d1, d2), |s| profile.k_v(s)),
        -1.0,
        false,
        1e-12,
    );
    let target = -1.0 - p.epsilon;
    c.upper(
        "P9",
        "K(g_v) = -1 - ε for |s| > δ₂",
        sup(both_sides(d2, s_max.max(d2)), |s| (profile.k_v(s) - target).abs()),
        0.0,
        false,
        1e-12,
    );
    let vp = VProfile(Arc::new(profile.clone()));
    c.upper(
        "P10",
        "K(g_v) agrees with finite differences of v",
        sup(grid(-s_max, s_max), |s| {
            let fd = -central(&|t| vp.u(t), s) - vp.u(s).powi(2);
            (fd - profile.k_v(s)).abs() / profile.k_v(s).abs().max(1.0)
        }),
        1e-6,
        true,
        0.0,
    );

    let support = q.delta2 + q.width;
    let outer = s_max.max(q.delta4 + 1.0);
    let (w, ws) = sup(both_sides(q.delta4, outer), |s| bump.b(s).abs());
    let ok = w == 0.0 && support <= q.delta4;
    c.flag(
        "B1",
        "supp b₊ ⊆ [-δ₄, δ₄]",
        ok,
        q.delta4 - support,
        w,
        Some(Witness {
            s: if w > 0.0 { ws } else { support },
            angle: None,
        }),
    );
    let (hi, hs) = sup(grid(-outer, outer), |s| bump.b(s));
    let (lo, ls) = sup(grid(-outer, outer), |s| -bump.b(s));
    let ok = hi <= 0.5 && lo <= 0.0;
    c.flag(
        "B2",
        "0 ≤ b₊ ≤ 1/2",
        ok,
        (0.5 - hi).min(-lo),
        hi,
        Some(Witness {
            s: if hi > 0.5 { hs } else { ls },
            angle: None,
        }),
    );
    c.upper(
        "B3",
        "b₊ = 1/2 on [-δ₂, δ₂]",
        sup(grid(-q.delta2.abs(), q.delta2.abs()), |s| (bump.b(s) - 0.5).abs()),
        0.0,
        false,
        0.0,
    );
    c.upper(
        "B4",
        "sup |db₊| + b₊² < 1/4 + ε",
        sup(grid(-outer, outer), |s| bump.db(s).abs() + bump.b(s).powi(2)),
        0.25 + q.epsilon,
        true,
        0.0,
    );
    c.upper(
        "B5",
        "db₊ agrees with finite differences of b₊",
        sup(grid(-outer, outer), |s| {
            (central(&|t| bump.b(t), s) - bump.db(s)).abs() / bump.db(s).abs().max(1.0)
        }),
        1e-6,
        true,
        0.0,
    );

    let system = match burns_system(profile, bump, (-s_max, s_max)) {
        Ok(s) => s,
        Err(e) => {
            c.flag("S0", &format!("system construction: {e}"), false, f64::NAN, f64::NAN, None);
            return finish(c);
        }
    };
    let (k_in, w_in) = sup_magnetic(&system, grid(-band, band));
    c.flag("S1", "K(g_v, b₊) ≤ 1/2 on C_δ", k_in <= 0.5, 0.5 - k_in, k_in, Some(w_in));
    let (k_out, w_out) = sup_magnetic(&system, both_sides(band, s_max));
    c.flag(
        "S2",
        "K(g_v, b₊) ≤ -3/4 outside C_δ",
        k_out <= -0.75 + 1e-12,
        -0.75 - k_out,
        k_out,
        Some(w_out),
    );
    let (ok, worst) = parallel_witness(profile);
    c.flag(
        "S3",
        "s = 0 parallel is a closed g_v-geodesic with K(0) > 0",
        ok,
        profile.k_v(0.0),
        worst,
        Some(Witness { s: 0.0, angle: None }),
    );
    // vacuous where b₊ never equals 1/2
    let (dev, ds) = sup(grid(-s_max, s_max), |s| {
        if bump.b(s) != 0.5 || bump.db(s) != 0.0 {
            return 0.0;
        }
        let k = system.magnetic_curvature_unchecked(UnitTangent::new(s, 0.0, 0.7));
        let expect = profile.k_v(s) + 0.25;
        (k - expect).abs() / expect.abs().max(1e-300)
    });
    c.flag(
        "S4",
        "K(g_v, b₊) = K(g_v) + 1/4 where b₊ = 1/2",
        dev <= 1e-9,
        1e-9 - dev,
        dev,
        Some(Witness { s: ds, angle: Some(0.7) }),
    );
    finish(c)
}

fn finish(c: Clauses) -> ValidationReport {
    ValidationReport {
        passed: c.0.iter().all(|c| c.passed),
        clauses: c.0,
    }
}

/// Integrates the parallel `s = 0` as a geodesic of `g_v` for one turn and
/// returns whether it closes up and `K(0) > 0`, with the closing error.
fn parallel_witness(profile: &BurnsProfile) -> (bool, f64) {
    let Ok(chart) = RevolutionChart::new(Arc::new(VProfile(Arc::new(profile.clone()))), (-1.0, 1.0)) else {
        return (false, f64::INFINITY);
    };
    let Ok(system) = MagneticSystem::new(Chart::Revolution(chart.clone()), MagneticIntensity::constant(0.0)) else {
        return (false, f64::INFINITY);
    };
    let period = std::f64::consts::TAU * chart.radius(0.0);
    let start = UnitTangent::new(0.0, 0.0, std::f64::consts::FRAC_PI_2);
    let Ok(tr) = flow::integrate(&system, start, &FlowSettings::with_horizon(period)) else {
        return (false, f64::INFINITY);
    };
    let end = tr.end();
    let err = end.point.x.abs()
        + angle_diff(end.point.y, std::f64::consts::TAU).abs()
        + angle_diff(end.angle, start.angle).abs();
    (err < 1e-8 && profile.k_v(0.0) > 0.0, err)
}

fn burns_system(profile: &BurnsProfile, bump: &BumpIntensity, s_range: (f64, f64)) -> Result<MagneticSystem> {
    let chart = RevolutionChart::new(Arc::new(VProfile(Arc::new(profile.clone()))), s_range)?;
    MagneticSystem::new(Chart::Revolution(chart), MagneticIntensity::new(Arc::new(*bump)))
}

/// Exactness of the doubled intensity `b₊ ⊔ b₋`, with and without the radius
/// factor of the area form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exactness {
    /// `∫ b₊ Ω` over one copy.
    pub copy_integral: Estimate,
    /// `∫ b₊ Ω + ∫ b₋ Ω` over the two copies.
    pub total: f64,
    /// `2π ∫ b₊ ds` over one copy.
    pub copy_integral_no_radius: Estimate,
    pub total_no_radius: f64,
}

/// The validated system on one copy (`b₊`) and its mirror (`b₋ = -b₊`).
#[derive(Clone, Debug)]
pub struct BurnsSystem {
    pub plus: MagneticSystem,
    pub minus: MagneticSystem,
    pub profile: Arc<BurnsProfile>,
    pub bump: BumpIntensity,
    pub validation: ValidationReport,
}

impl BurnsSystem {
    pub fn exactness(&self) -> Result<Exactness> {
        let d4 = self.bump.params.delta4.max(self.bump.params.delta2 + self.bump.params.width);
        let region = Rect::new(-d4, d4, 0.0, std::f64::consts::TAU);
        let plus = geom::area_integral(&self.plus.chart, &|p| self.plus.intensity.value(p), region)?;
        let minus = geom::area_integral(&self.minus.chart, &|p| self.minus.intensity.value(p), region)?;
        let flat = |sys: &MagneticSystem| {
            quadrature::integrate(|s| sys.intensity.value(Point::new(s, 0.0)), -d4, d4, 1e-13, 1e-13).map(|e| Estimate {
                value: std::f64::consts::TAU * e.value,
                error: std::f64::consts::TAU * e.error,
            })
        };
        let plus_nr = flat(&self.plus)?;
        let minus_nr = flat(&self.minus)?;
        Ok(Exactness {
            copy_integral: plus,
            total: plus.value + minus.value,
            copy_integral_no_radius: plus_nr,
            total_no_radius: plus_nr.value + minus_nr.value,
        })
    }
}

/// Validates the construction and returns the `b₊` system on `s_range`.
pub fn build_burns_system(profile: ProfileParams, bump: BumpParams, s_range: (f64, f64)) -> Result<BurnsSystem> {
    let prof = BurnsProfile::new(profile);
    let b = BumpIntensity::new(bump);
    let s_max = s_range.0.abs().min(s_range.1.abs());
    let validation = validate_burns(&prof, &b, s_max);
    if !validation.passed {
        return Err(Error::Validation(
            validation
                .failed()
                .iter()
                .map(|c| match c.witness {
                    Some(Witness { s, angle: Some(a) }) => format!("{} {} (s = {s}, φ = {a})", c.id, c.description),
                    Some(Witness { s, angle: None }) => format!("{} {} (s = {s})", c.id, c.description),
                    None => format!("{} {}", c.id, c.description),
                })
                .collect(),
        ));
    }
    let plus = burns_system(&prof, &b, s_range)?;
    let minus = plus.flipped();
    Ok(BurnsSystem {
        plus,
        minus,
        profile: Arc::new(prof),
        bump: b,
        validation,
    })
}

/// `c_{g,b} = (2πχ)⁻¹ ∫ b Ω_g` over `region`.
pub fn cohomology_constant(chart: &Chart, b: &dyn ScalarField, region: Rect, chi: f64) -> Result<f64> {
    if chi == 0.0 {
        return Err(Error::Domain("Euler characteristic must be non-zero".into()));
    }
    let integral = geom::area_integral(chart, &|p| b.value(p), region)?;
    cohomology_constant_from_integral(integral.value, chi)
}

/// `c_{g,b}` given `∫ b Ω_g` directly.
pub fn cohomology_constant_from_integral(integral: f64, chi: f64) -> Result<f64> {
    if chi == 0.0 {
        return Err(Error::Domain("Euler characteristic must be non-zero".into()));
    }
    Ok(integral / (std::f64::consts::TAU * chi))
}

/// `|A₁(1 + 2πχ c₂²/A₂) - A₂(1 + 2πχ c₁²/A₁)|`.
pub fn homology_relation_check(a1: f64, a2: f64, c1: f64, c2: f64, chi: f64) -> f64 {
    let k = std::f64::consts::TAU * chi;
    (a1 * (1.0 + k * c2 * c2 / a2) - a2 * (1.0 + k * c1 * c1 / a1)).abs()
}

/// A primitive `θ = P dx + Q dy` of `b Ω_g`.
#[derive(Clone, Debug)]
pub enum ExactPrimitive {
    Zero,
    /// `θ = (b / y) dx` for constant `b` on the half-plane; invariant under dilations.
    HalfPlane { b: f64 },
    /// `θ = B(s) dθ` with `B(s) = ∫₀ˢ b r`.
    Revolution { chart: RevolutionChart, intensity: Arc<dyn ScalarField> },
}

impl ExactPrimitive {
    /// `(P, Q)` at `p`.
    pub fn coefficients(&self, p: Point) -> Result<[f64; 2]> {
        match self {
            ExactPrimitive::Zero => Ok([0.0, 0.0]),
            ExactPrimitive::HalfPlane { b } => Ok([b / p.y, 0.0]),
            ExactPrimitive::Revolution { chart, intensity } => {
                // split at the knots so every piece is smooth
                let (lo, hi) = (p.x.min(0.0), p.x.max(0.0));
                let mut cuts = vec![lo];
                let mut knots = intensity.knots();
                knots.extend(chart.profile.knots());
                knots.sort_by(f64::total_cmp);
                cuts.extend(knots.into_iter().filter(|&k| k > lo && k < hi));
                cuts.push(hi);
                cuts.dedup();
                let mut big_b = 0.0;
                for w in cuts.windows(2) {
                    big_b += quadrature::integrate(
                        |s| intensity.value(Point::new(s, p.y)) * chart.radius(s),
                        w[0],
                        w[1],
                        1e-14,
                        1e-13,
                    )?
                    .value;
                }
                Ok([0.0, if p.x < 0.0 { -big_b } else { big_b }])
            }
        }
    }

    /// `∂x Q - ∂y P` by fourth-order central differences, to compare with `b` times the area density.
    pub fn fd_exterior_derivative(&self, p: Point) -> Result<f64> {
        fn d4(f: impl Fn(f64) -> Result<f64>, x: f64) -> Result<f64> {
            let h = geom::FD_STEP * x.abs().max(1.0);
            Ok((8.0 * (f(x + h)? - f(x - h)?) - (f(x + 2.0 * h)? - f(x - 2.0 * h)?)) / (12.0 * h))
        }
        let dq = d4(|x| self.coefficients(Point::new(x, p.y)).map(|c| c[1]), p.x)?;
        let dp = d4(|y| self.coefficients(Point::new(p.x, y)).map(|c| c[0]), p.y)?;
        Ok(dq - dp)
    }
}

/// How closed curves close up on the cylinder.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cylinder {
    /// Half-plane modulo the deck map.
    Hyperbolic(HyperbolicCylinder),
    /// Second coordinate is an angle of period `2π`.
    Revolution,
}

type Path = dyn Fn(f64) -> (Point, [f64; 2]) + Send + Sync;

/// A curve on `τ ∈ [0, 1]` with its velocity, closed on the cylinder.
#[derive(Clone)]
pub struct ClosedCurve {
    path: Arc<Path>,
}

impl std::fmt::Debug for ClosedCurve {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (a, _) = (self.path)(0.0);
        f.debug_struct("ClosedCurve").field("start", &a).finish()
    }
}

/// Real trigonometric polynomial `Σ a_m cos 2πmτ + b_m sin 2πmτ`, `m ≥ 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigPoly {
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl TrigPoly {
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let mut v = 0.0;
        let mut d = 0.0;
        for (m, (a, b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let w = std::f64::consts::TAU * (m + 1) as f64;
            let (s, c) = (w * t).sin_cos();
            v += a * c + b * s;
            d += w * (-a * s + b * c);
        }
        (v, d)
    }

    /// Bound on `|value|`.
    pub fn amplitude(&self) -> f64 {
        self.cos.iter().chain(&self.sin).map(|x| x.abs()).sum()
    }
}

impl ClosedCurve {
    pub fn new(path: impl Fn(f64) -> (Point, [f64; 2]) + Send + Sync + 'static) -> Self {
        Self { path: Arc::new(path) }
    }

    pub fn eval(&self, t: f64) -> (Point, [f64; 2]) {
        (self.path)(t)
    }

    /// The orbit traversed once, rescaled to `τ ∈ [0, 1]`.
    pub fn from_orbit(system: &MagneticSystem, orbit: &ClosedOrbit) -> Self {
        let tr = orbit.trajectory.clone();
        let chart = system.chart.clone();
        let period = orbit.period;
        Self::new(move |tau| {
            let st = tr.state_at(tau * period).expect("τ in [0, 1]");
            let v = chart.velocity(st.point, st.angle);
            (st.point, [period * v[0], period * v[1]])
        })
    }

    /// `τ ↦ γ(σ(τ))` for an increasing `σ` with `σ(0) = 0`, `σ(1) = 1`, given with its derivative.
    pub fn reparameterized(&self, sigma: impl Fn(f64) -> (f64, f64) + Send + Sync + 'static) -> Self {
        let inner = self.path.clone();
        Self::new(move |tau| {
            let (s, ds) = sigma(tau);
            let (p, v) = inner(s);
            (p, [v[0] * ds, v[1] * ds])
        })
    }

    /// `e^{q}(x + p y, y)`: a shear and dilation that commute with the deck
    /// map, so the result is closed in the same class.
    pub fn perturbed(&self, p: TrigPoly, q: TrigPoly) -> Self {
        let inner = self.path.clone();
        Self::new(move |tau| {
            let (pt, v) = inner(tau);
            let (pv, pd) = p.eval(tau);
            let (qv, qd) = q.eval(tau);
            let e = qv.exp();
            let x = pt.x + pv * pt.y;
            let dx = v[0] + pd * pt.y + pv * v[1];
            (Point::new(e * x, e * pt.y), [e * (qd * x + dx), e * (qd * pt.y + v[1])])
        })
    }
}

/// Class of the curve in `π₁` of the cylinder (an integer), checking closure.
pub fn winding(cyl: Cylinder, curve: &ClosedCurve) -> Result<i64> {
    let (a, _) = curve.eval(0.0);
    let (b, _) = curve.eval(1.0);
    match cyl {
        Cylinder::Hyperbolic(h) => {
            let n = ((b.x.hypot(b.y) / a.x.hypot(a.y)).ln() / h.ell).round() as i64;
            let back = h.deck(b, -n);
            if back.dist(a) > 1e-8 * a.x.hypot(a.y).max(1.0) {
                return Err(Error::Domain(format!("curve is not closed: {a:?} vs {back:?}")));
            }
            Ok(n)
        }
        Cylinder::Revolution => {
            let turns = (b.y - a.y) / std::f64::consts::TAU;
            let n = turns.round();
            if (b.x - a.x).abs() > 1e-8 || (turns - n).abs() > 1e-8 {
                return Err(Error::Domain(format!("curve is not closed: {a:?} vs {b:?}")));
            }
            Ok(n as i64)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagneticLength {
    pub length: f64,
    /// `∫_Σ b Ω` through the annulus between the reference and the curve.
    pub flux: f64,
    pub total: f64,
}

fn line_integrals(chart: &Chart, primitive: &ExactPrimitive, curve: &ClosedCurve) -> Result<(f64, f64)> {
    let mut err = None;
    let length = quadrature::integrate(
        |t| {
            let (p, v) = curve.eval(t);
            chart.norm(p, v)
        },
        0.0,
        1.0,
        1e-14,
        1e-13,
    )?;
    let form = quadrature::integrate(
        |t| {
            let (p, v) = curve.eval(t);
            match primitive.coefficients(p) {
                Ok([a, b]) => a * v[0] + b * v[1],
                Err(e) => {
                    err.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        0.0,
        1.0,
        1e-14,
        1e-13,
    );
    if let Some(e) = err {
        return Err(e);
    }
    Ok((length.value, form?.value))
}

/// `ℓ_g(γ) + ∫_Σ bΩ` where `Σ` is the annulus swept from `γ` back to the
/// reference orbit; by Stokes `∫_Σ bΩ = ∫_ref θ - ∫_γ θ`. With this
/// orientation the critical curves have geodesic curvature `+b`.
pub fn magnetic_length(
    chart: &Chart,
    cyl: Cylinder,
    primitive: &ExactPrimitive,
    curve: &ClosedCurve,
    reference: &ClosedCurve,
) -> Result<MagneticLength> {
    let n_curve = winding(cyl, curve)?;
    let n_ref = winding(cyl, reference)?;
    if n_curve != n_ref {
        return Err(Error::Homotopy {
            curve: n_curve,
            reference: n_ref,
        });
    }
    let (length, form) = line_integrals(chart, primitive, curve)?;
    let (_, form_ref) = line_integrals(chart, primitive, reference)?;
    let flux = form_ref - form;
    Ok(MagneticLength {
        length,
        flux,
        total: length + flux,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimalityRow {
    pub index: usize,
    pub amplitude: f64,
    pub length: f64,
    pub flux: f64,
    pub magnetic_length: f64,
    /// `L(γ) - L(γ_ν)`.
    pub excess: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimalitySweep {
    pub ell: f64,
    pub b: f64,
    pub seed: u64,
    pub reference_period: f64,
    pub reference_length: f64,
    pub rows: Vec<MinimalityRow>,
    pub min_excess: f64,
}

fn random_poly(rng: &mut ChaCha8Rng, modes: usize, amplitude: f64) -> TrigPoly {
    let mut p = TrigPoly {
        cos: (0..modes).map(|_| rng.random_range(-1.0..1.0)).collect(),
        sin: (0..modes).map(|_| rng.random_range(-1.0..1.0)).collect(),
    };
    let k = amplitude / p.amplitude().max(1e-300);
    p.cos.iter_mut().chain(p.sin.iter_mut()).for_each(|x| *x *= k);
    p
}

/// The `index`-th seeded perturbation `(p, q)` with amplitude at most `max_amplitude`.
pub fn perturbation(seed: u64, index: usize, max_amplitude: f64) -> (TrigPoly, TrigPoly) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let a = max_amplitude * rng.random_range(0.0..1.0f64).max(1e-3);
    let b = max_amplitude * rng.random_range(0.0..1.0f64).max(1e-3);
    (random_poly(&mut rng, 3, a), random_poly(&mut rng, 3, b))
}

/// The closed orbit of constant intensity `b` on the cylinder of translation length `ell`.
pub fn hyperbolic_reference(ell: f64, b: f64) -> Result<(HyperbolicCylinder, MagneticSystem, ClosedOrbit)> {
    let cyl = HyperbolicCylinder::new(ell)?;
    let system = cyl.system(b)?;
    let guess = hypercycle_start(b * 0.9);
    let opts = ShootingOptions {
        period_guess: Some(ell),
        ..ShootingOptions::default()
    };
    let orbit = find_closed_orbit(cyl, &system, 1, guess, &opts)?;
    Ok((cyl, system, orbit))
}

/// Magnetic length of `count` seeded perturbations of the closed orbit.
pub fn minimality_sweep(ell: f64, b: f64, count: usize, seed: u64, max_amplitude: f64) -> Result<MinimalitySweep> {
    let (cyl, system, orbit) = hyperbolic_reference(ell, b)?;
    let reference = ClosedCurve::from_orbit(&system, &orbit);
    let primitive = ExactPrimitive::HalfPlane { b };
    let cyl = Cylinder::Hyperbolic(cyl);
    let base = magnetic_length(&system.chart, cyl, &primitive, &reference, &reference)?;
    let rows: Vec<MinimalityRow> = (0..count)
        .into_par_iter()
        .map(|i| {
            let (p, q) = perturbation(seed, i, max_amplitude);
            let amplitude = p.amplitude().max(q.amplitude());
            let curve = reference.perturbed(p, q);
            let m = magnetic_length(&system.chart, cyl, &primitive, &curve, &reference)?;
            Ok(MinimalityRow {
                index: i,
                amplitude,
                length: m.length,
                flux: m.flux,
                magnetic_length: m.total,
                excess: m.total - base.total,
            })
        })
        .collect::<Result<_>>()?;
    let min_excess = rows.iter().fold(f64::INFINITY, |m, r| m.min(r.excess));
    Ok(MinimalitySweep {
        ell,
        b,
        seed,
        reference_period: orbit.period,
        reference_length: base.total,
        rows,
        min_excess,
    })
}

pub fn write_minimality_csv<W: Write>(sweep: &MinimalitySweep, mut out: W) -> io::Result<()> {
    writeln!(out, "index,amplitude,length,flux,magnetic_length,excess")?;
    for r in &sweep.rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.index,
            fmt17(r.amplitude),
            fmt17(r.length),
            fmt17(r.flux),
            fmt17(r.magnetic_length),
            fmt17(r.excess)
        )?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BurnsConfig {
    pub profile: ProfileParams,
    pub bump: BumpParams,
    pub s_range: (f64, f64),
    pub certificate: CertificateSettings,
    /// Upper bound expected for the time any sampled orbit spends in `C_δ`.
    pub band_cap: f64,
    /// Number of samples on which the `b₋` copy is checked by time reversal.
    pub reversal_samples: usize,
}

impl Default for BurnsConfig {
    fn default() -> Self {
        Self {
            profile: ProfileParams::default(),
            bump: BumpParams::default(),
            s_range: (-40.0, 40.0),
            certificate: CertificateSettings {
                sampler: SamplerBox {
                    x: (-2.0, 2.0),
                    y: (0.0, std::f64::consts::TAU),
                    angle: (0.0, std::f64::consts::TAU),
                },
                samples: 10_000,
                horizon: 6.0,
                bound: 3.0,
                u0_policy: Vec::new(),
                seed: 20_240_601,
                flow: FlowSettings::default(),
            },
            band_cap: 2.0,
            reversal_samples: 32,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReversalCheck {
    pub samples: usize,
    pub max_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BurnsExperiment {
    pub validation: ValidationReport,
    pub certificate: CertificateReport,
    pub exactness: Exactness,
    pub reversal: ReversalCheck,
    pub max_band_time: f64,
    pub band_cap: f64,
    pub band_within_cap: bool,
    /// Time each sampled orbit spends in `C_δ`, by sample index.
    #[serde(skip)]
    pub band_times: Vec<f64>,
}

impl BurnsExperiment {
    pub fn passed(&self) -> bool {
        self.validation.passed && self.certificate.pass && self.band_within_cap
    }
}

/// Follows `v` under `(g, b₊)` for time `T`, then the reversed endpoint under
/// `(g, b₋)`; returns the distance to the reversed start.
pub fn reversal_error(sys: &BurnsSystem, start: UnitTangent, horizon: f64, settings: &FlowSettings) -> Result<f64> {
    let fs = FlowSettings { horizon, ..*settings };
    let fwd = flow::integrate(&sys.plus, start, &fs)?;
    if fwd.exited() {
        return Ok(0.0);
    }
    let back = flow::integrate(&sys.minus, fwd.end().reversed(), &fs)?;
    let end = back.end();
    let target = start.reversed();
    Ok((end.point.x - target.point.x).abs()
        + angle_diff(end.point.y, target.point.y).abs()
        + angle_diff(end.angle, target.angle).abs())
}

/// Builds, validates and certifies the construction.
pub fn burns_certificate_experiment(config: &BurnsConfig) -> Result<BurnsExperiment> {
    let sys = build_burns_system(config.profile, config.bump, config.s_range)?;
    let band = config.profile.delta;
    let (certificate, samples) = anosov_certificate_with(&sys.plus, &config.certificate, |tr| {
        flow::band_occupation_time(tr, (-band, band))
    })?;
    let band_times: Vec<f64> = samples.iter().map(|s| s.observation.unwrap_or(0.0)).collect();
    let max_band_time = band_times.iter().fold(0.0, |m: f64, &t| m.max(t));
    let k = config.reversal_samples.min(samples.len());
    let errors: Vec<f64> = samples[..k]
        .par_iter()
        .map(|s| reversal_error(&sys, s.state, config.certificate.horizon, &config.certificate.flow))
        .collect::<Result<_>>()?;
    let reversal = ReversalCheck {
        samples: k,
        max_error: errors.iter().fold(0.0, |m: f64, &e| m.max(e)),
    };
    Ok(BurnsExperiment {
        exactness: sys.exactness()?,
        validation: sys.validation.clone(),
        certificate,
        reversal,
        max_band_time,
        band_cap: config.band_cap,
        band_within_cap: max_band_time.is_finite() && max_band_time < config.band_cap,
        band_times,
    })
}

pub fn write_band_csv<W: Write>(exp: &BurnsExperiment, mut out: W) -> io::Result<()> {
    writeln!(out, "index,band_time")?;
    for (i, t) in exp.band_times.iter().enumerate() {
        writeln!(out, "{i},{}", fmt17(*t))?;
    }
    Ok(())
}
