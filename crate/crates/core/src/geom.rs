//! Charts, metrics, magnetic intensities and curvature.
//!
//! Two metric families are supported, each living on a single rectangular
//! chart:
//!
//! * conformal charts `e^{2λ(x,y)} (dx² + dy²)`, e.g. the upper half-plane
//!   with `λ = -ln y`;
//! * surfaces of revolution `ds² + r(s)² dθ²` with `r(s) = exp ∫₀ˢ u`, whose
//!   Gaussian curvature is `-u' - u²`.
//!
//! Unit tangent vectors are stored as a point plus an angle `φ` measured
//! counterclockwise from the first coordinate direction of an orthonormal
//! frame (`e^{-λ}∂x, e^{-λ}∂y` or `∂s, r⁻¹∂θ`). The complex structure `i` is
//! the rotation by `+π/2` in that frame.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{self, Estimate};

/// Relative step for central finite differences.
pub const FD_STEP: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A unit tangent vector `(x, v)`; the angle parameterization makes it
/// exactly unit length for the chart's metric.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitTangent {
    pub point: Point,
    pub angle: f64,
}

impl UnitTangent {
    pub const fn new(x: f64, y: f64, angle: f64) -> Self {
        Self {
            point: Point::new(x, y),
            angle,
        }
    }

    /// `iv`: quarter turn counterclockwise, angle reported in `[0, 2π)`.
    pub fn rotate90(self) -> Self {
        Self {
            point: self.point,
            angle: (self.angle + FRAC_PI_2).rem_euclid(TAU),
        }
    }

    /// `-v` at the same point.
    pub fn reversed(self) -> Self {
        Self {
            point: self.point,
            angle: (self.angle + std::f64::consts::PI).rem_euclid(TAU),
        }
    }
}

/// Signed difference of two angles, wrapped into `(-π, π]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > std::f64::consts::PI {
        d - TAU
    } else {
        d
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub const fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x_min >= self.x_min
            && other.x_max <= self.x_max
            && other.y_min >= self.y_min
            && other.y_max <= self.y_max
    }
}

/// A scalar function on chart coordinates, optionally with its gradient.
pub trait ScalarField: Send + Sync + Debug {
    fn value(&self, p: Point) -> f64;

    /// Analytic gradient `(∂x, ∂y)`, if known.
    fn gradient(&self, _p: Point) -> Option<[f64; 2]> {
        None
    }

    /// Values of the first coordinate across which the field is not smooth.
    fn knots(&self) -> Vec<f64> {
        Vec::new()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constant(pub f64);

impl ScalarField for Constant {
    fn value(&self, _p: Point) -> f64 {
        self.0
    }

    fn gradient(&self, _p: Point) -> Option<[f64; 2]> {
        Some([0.0, 0.0])
    }
}

/// `factor · inner`; used for the sign-flipped intensity `b₋ = -b₊`.
#[derive(Clone, Debug)]
pub struct Scaled {
    pub inner: Arc<dyn ScalarField>,
    pub factor: f64,
}

impl ScalarField for Scaled {
    fn value(&self, p: Point) -> f64 {
        self.factor * self.inner.value(p)
    }

    fn gradient(&self, p: Point) -> Option<[f64; 2]> {
        self.inner
            .gradient(p)
            .map(|[gx, gy]| [self.factor * gx, self.factor * gy])
    }

    fn knots(&self) -> Vec<f64> {
        self.inner.knots()
    }
}

fn fd_step(v: f64) -> f64 {
    FD_STEP * v.abs().max(1.0)
}

/// Central-difference gradient.
pub fn fd_gradient(f: &dyn Fn(Point) -> f64, p: Point) -> [f64; 2] {
    let hx = fd_step(p.x);
    let hy = fd_step(p.y);
    [
        (f(Point::new(p.x + hx, p.y)) - f(Point::new(p.x - hx, p.y))) / (2.0 * hx),
        (f(Point::new(p.x, p.y + hy)) - f(Point::new(p.x, p.y - hy))) / (2.0 * hy),
    ]
}

/// Gradient of a field, analytic when provided, else by central differences.
pub fn field_gradient(field: &dyn ScalarField, p: Point) -> [f64; 2] {
    field
        .gradient(p)
        .unwrap_or_else(|| fd_gradient(&|q| field.value(q), p))
}

/// Log conformal factor `λ` of a metric `e^{2λ}(dx² + dy²)`.
pub trait ConformalFactor: Send + Sync + Debug {
    fn log_factor(&self, p: Point) -> f64;

    fn gradient(&self, _p: Point) -> Option<[f64; 2]> {
        None
    }

    /// Analytic Gaussian curvature, if known.
    fn curvature(&self, _p: Point) -> Option<f64> {
        None
    }
}

/// `λ = -ln y`, the hyperbolic metric `y⁻²(dx² + dy²)` of curvature −1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfPlane;

impl ConformalFactor for HalfPlane {
    fn log_factor(&self, p: Point) -> f64 {
        -p.y.ln()
    }

    fn gradient(&self, p: Point) -> Option<[f64; 2]> {
        Some([0.0, -1.0 / p.y])
    }

    fn curvature(&self, _p: Point) -> Option<f64> {
        Some(-1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Flat;

impl ConformalFactor for Flat {
    fn log_factor(&self, _p: Point) -> f64 {
        0.0
    }

    fn gradient(&self, _p: Point) -> Option<[f64; 2]> {
        Some([0.0, 0.0])
    }

    fn curvature(&self, _p: Point) -> Option<f64> {
        Some(0.0)
    }
}

/// Unit sphere in stereographic coordinates, `λ = ln 2 - ln(1 + x² + y²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sphere;

impl ConformalFactor for Sphere {
    fn log_factor(&self, p: Point) -> f64 {
        std::f64::consts::LN_2 - (1.0 + p.x * p.x + p.y * p.y).ln()
    }

    fn gradient(&self, p: Point) -> Option<[f64; 2]> {
        let d = 1.0 + p.x * p.x + p.y * p.y;
        Some([-2.0 * p.x / d, -2.0 * p.y / d])
    }

    fn curvature(&self, _p: Point) -> Option<f64> {
        Some(1.0)
    }
}

/// Profile `u(s)` of a surface of revolution `ds² + r(s)² dθ²`.
pub trait Profile: Send + Sync + Debug {
    fn u(&self, s: f64) -> f64;

    fn du(&self, _s: f64) -> Option<f64> {
        None
    }

    /// `ln r(s) = ∫₀ˢ u`.
    fn log_radius(&self, s: f64) -> f64;

    fn curvature(&self, s: f64) -> f64 {
        let du = self.du(s).unwrap_or_else(|| fd_derivative(&|t| self.u(t), s));
        -du - self.u(s).powi(2)
    }

    /// Values of `s` across which the profile is not smooth.
    fn knots(&self) -> Vec<f64> {
        Vec::new()
    }
}

pub fn fd_derivative(f: &dyn Fn(f64) -> f64, s: f64) -> f64 {
    let h = fd_step(s);
    (f(s + h) - f(s - h)) / (2.0 * h)
}

/// `u ≡ 0`: the flat cylinder of radius 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlatProfile;

impl Profile for FlatProfile {
    fn u(&self, _s: f64) -> f64 {
        0.0
    }

    fn du(&self, _s: f64) -> Option<f64> {
        Some(0.0)
    }

    fn log_radius(&self, _s: f64) -> f64 {
        0.0
    }
}

/// `u = tanh`, `r = cosh`: a hyperbolic cylinder of curvature −1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TanhProfile;

/// `ln cosh x` without overflow.
pub fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

impl Profile for TanhProfile {
    fn u(&self, s: f64) -> f64 {
        s.tanh()
    }

    fn du(&self, s: f64) -> Option<f64> {
        Some(1.0 / s.cosh().powi(2))
    }

    fn log_radius(&self, s: f64) -> f64 {
        ln_cosh(s)
    }
}

#[derive(Clone, Debug)]
pub struct ConformalChart {
    pub factor: Arc<dyn ConformalFactor>,
    pub domain: Rect,
}

impl ConformalChart {
    pub fn new(factor: Arc<dyn ConformalFactor>, domain: Rect) -> Result<Self> {
        let chart = Self { factor, domain };
        // e^{2λ} must be positive and finite on the domain; probe a grid
        for i in 0..=10 {
            for j in 0..=10 {
                let p = Point::new(
                    lerp(domain.x_min, domain.x_max, i as f64 / 10.0),
                    lerp(domain.y_min, domain.y_max, j as f64 / 10.0),
                );
                let l = chart.factor.log_factor(p);
                if !l.is_finite() {
                    return Err(Error::Domain(format!(
                        "conformal factor not positive and finite at ({}, {})",
                        p.x, p.y
                    )));
                }
            }
        }
        Ok(chart)
    }

    pub fn half_plane(domain: Rect) -> Result<Self> {
        Self::new(Arc::new(HalfPlane), domain)
    }

    pub fn lambda_gradient(&self, p: Point) -> [f64; 2] {
        self.factor
            .gradient(p)
            .unwrap_or_else(|| fd_gradient(&|q| self.factor.log_factor(q), p))
    }

    /// `-e^{-2λ} Δλ` by central differences (of the gradient when analytic).
    pub fn fd_curvature(&self, p: Point) -> f64 {
        let lap = if self.factor.gradient(p).is_some() {
            let hx = fd_step(p.x);
            let hy = fd_step(p.y);
            let g = |q| self.factor.gradient(q).expect("analytic gradient");
            let gxp: [f64; 2] = g(Point::new(p.x + hx, p.y));
            let gxm: [f64; 2] = g(Point::new(p.x - hx, p.y));
            let gyp: [f64; 2] = g(Point::new(p.x, p.y + hy));
            let gym: [f64; 2] = g(Point::new(p.x, p.y - hy));
            (gxp[0] - gxm[0]) / (2.0 * hx) + (gyp[1] - gym[1]) / (2.0 * hy)
        } else {
            // second differences need a larger step to stay above round-off
            let hx = 1e-4 * p.x.abs().max(1.0);
            let hy = 1e-4 * p.y.abs().max(1.0);
            let l = |x, y| self.factor.log_factor(Point::new(x, y));
            let c = l(p.x, p.y);
            (l(p.x + hx, p.y) - 2.0 * c + l(p.x - hx, p.y)) / (hx * hx)
                + (l(p.x, p.y + hy) - 2.0 * c + l(p.x, p.y - hy)) / (hy * hy)
        };
        -(-2.0 * self.factor.log_factor(p)).exp() * lap
    }
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

#[derive(Clone, Debug)]
pub struct RevolutionChart {
    pub profile: Arc<dyn Profile>,
    /// Valid interval for `s`; `θ` is periodic with period `2π`.
    pub s_range: (f64, f64),
}

impl RevolutionChart {
    pub fn new(profile: Arc<dyn Profile>, s_range: (f64, f64)) -> Result<Self> {
        if !(s_range.0 < s_range.1) {
            return Err(Error::Domain(format!("empty s-range {s_range:?}")));
        }
        let chart = Self { profile, s_range };
        for i in 0..=100 {
            let s = lerp(s_range.0, s_range.1, i as f64 / 100.0);
            if !chart.radius(s).is_finite() || chart.radius(s) <= 0.0 {
                return Err(Error::Domain(format!("radius not positive at s = {s}")));
            }
        }
        Ok(chart)
    }

    pub fn radius(&self, s: f64) -> f64 {
        self.profile.log_radius(s).exp()
    }

    pub fn fd_curvature(&self, s: f64) -> f64 {
        -fd_derivative(&|t| self.profile.u(t), s) - self.profile.u(s).powi(2)
    }
}

#[derive(Clone, Debug)]
pub enum Chart {
    Conformal(ConformalChart),
    Revolution(RevolutionChart),
}

impl Chart {
    pub fn contains(&self, p: Point) -> bool {
        match self {
            Chart::Conformal(c) => c.domain.contains(p),
            Chart::Revolution(c) => p.x >= c.s_range.0 && p.x <= c.s_range.1 && p.y.is_finite(),
        }
    }

    pub fn is_revolution(&self) -> bool {
        matches!(self, Chart::Revolution(_))
    }

    /// Chart bounds; the θ-interval of a revolution chart is one period.
    pub fn bounds(&self) -> Rect {
        match self {
            Chart::Conformal(c) => c.domain,
            Chart::Revolution(c) => Rect::new(c.s_range.0, c.s_range.1, 0.0, TAU),
        }
    }

    fn check(&self, p: Point) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::Domain(format!("point ({}, {}) outside chart", p.x, p.y)))
        }
    }

    pub fn gaussian_curvature(&self, p: Point) -> Result<f64> {
        self.check(p)?;
        Ok(self.curvature_unchecked(p))
    }

    pub(crate) fn curvature_unchecked(&self, p: Point) -> f64 {
        match self {
            Chart::Conformal(c) => c.factor.curvature(p).unwrap_or_else(|| c.fd_curvature(p)),
            Chart::Revolution(c) => c.profile.curvature(p.x),
        }
    }

    /// Coordinate velocity of the unit vector at angle `φ`.
    pub fn velocity(&self, p: Point, angle: f64) -> [f64; 2] {
        let (s, c) = angle.sin_cos();
        match self {
            Chart::Conformal(ch) => {
                let k = (-ch.factor.log_factor(p)).exp();
                [k * c, k * s]
            }
            Chart::Revolution(ch) => [c, s * (-ch.profile.log_radius(p.x)).exp()],
        }
    }

    /// `dφ/dt` of a unit-speed geodesic through `(p, φ)`. A unit-speed curve
    /// has geodesic curvature `dφ/dt - turning(p, φ)`.
    pub fn turning(&self, p: Point, angle: f64) -> f64 {
        let (s, c) = angle.sin_cos();
        match self {
            Chart::Conformal(ch) => {
                let [lx, ly] = ch.lambda_gradient(p);
                (-ch.factor.log_factor(p)).exp() * (-lx * s + ly * c)
            }
            Chart::Revolution(ch) => -ch.profile.u(p.x) * s,
        }
    }

    /// Metric length of the coordinate vector `w` at `p`.
    pub fn norm(&self, p: Point, w: [f64; 2]) -> f64 {
        match self {
            Chart::Conformal(ch) => ch.factor.log_factor(p).exp() * w[0].hypot(w[1]),
            Chart::Revolution(ch) => {
                let r = ch.radius(p.x);
                w[0].hypot(r * w[1])
            }
        }
    }

    /// Density of the area form `Ω_g` against `dx ∧ dy` (or `ds ∧ dθ`).
    pub fn area_density(&self, p: Point) -> f64 {
        match self {
            Chart::Conformal(ch) => (2.0 * ch.factor.log_factor(p)).exp(),
            Chart::Revolution(ch) => ch.radius(p.x),
        }
    }
}

/// Magnetic intensity `b` on a chart.
#[derive(Clone, Debug)]
pub struct MagneticIntensity {
    pub field: Arc<dyn ScalarField>,
}

impl MagneticIntensity {
    pub fn new(field: Arc<dyn ScalarField>) -> Self {
        Self { field }
    }

    pub fn constant(b: f64) -> Self {
        Self::new(Arc::new(Constant(b)))
    }

    pub fn value(&self, p: Point) -> f64 {
        self.field.value(p)
    }

    /// `db` as the covector `(∂x b, ∂y b)`.
    pub fn differential(&self, p: Point) -> [f64; 2] {
        field_gradient(self.field.as_ref(), p)
    }

    pub fn negated(&self) -> Self {
        Self::new(Arc::new(Scaled {
            inner: self.field.clone(),
            factor: -1.0,
        }))
    }
}

/// A metric (through its chart) and a magnetic intensity.
#[derive(Clone, Debug)]
pub struct MagneticSystem {
    pub chart: Chart,
    pub intensity: MagneticIntensity,
}

impl MagneticSystem {
    /// Sorted first-coordinate values across which the metric or the intensity is not smooth.
    pub fn knots(&self) -> Vec<f64> {
        let mut k = self.intensity.field.knots();
        if let Chart::Revolution(c) = &self.chart {
            k.extend(c.profile.knots());
        }
        k.sort_by(f64::total_cmp);
        k.dedup();
        k
    }

    pub fn new(chart: Chart, intensity: MagneticIntensity) -> Result<Self> {
        let b = chart.bounds();
        let (y0, y1) = (b.y_min, b.y_max);
        for i in 0..=20 {
            for j in 0..=20 {
                let p = Point::new(lerp(b.x_min, b.x_max, i as f64 / 20.0), lerp(y0, y1, j as f64 / 20.0));
                if !intensity.value(p).is_finite() {
                    return Err(Error::Domain(format!(
                        "intensity undefined at ({}, {})",
                        p.x, p.y
                    )));
                }
            }
        }
        Ok(Self { chart, intensity })
    }

    /// Constant-`b` system on the upper half-plane restricted to `domain`.
    pub fn half_plane(b: f64, domain: Rect) -> Result<Self> {
        Self::new(
            Chart::Conformal(ConformalChart::half_plane(domain)?),
            MagneticIntensity::constant(b),
        )
    }

    /// The same metric with intensity `-b`.
    pub fn flipped(&self) -> Self {
        Self {
            chart: self.chart.clone(),
            intensity: self.intensity.negated(),
        }
    }

    pub fn gaussian_curvature(&self, p: Point) -> Result<f64> {
        self.chart.gaussian_curvature(p)
    }

    /// `K^{g,b}(x, v) = K(x) - d_x b(iv) + b(x)²`.
    pub fn magnetic_curvature(&self, state: UnitTangent) -> Result<f64> {
        self.chart.check(state.point)?;
        Ok(self.magnetic_curvature_unchecked(state))
    }

    pub(crate) fn magnetic_curvature_unchecked(&self, state: UnitTangent) -> f64 {
        let p = state.point;
        let k = self.chart.curvature_unchecked(p);
        let b = self.intensity.value(p);
        let db = self.intensity.differential(p);
        let iv = self.chart.velocity(p, state.angle + FRAC_PI_2);
        k - (db[0] * iv[0] + db[1] * iv[1]) + b * b
    }
}

pub fn rotate90(state: UnitTangent) -> UnitTangent {
    state.rotate90()
}

pub fn gaussian_curvature(chart: &Chart, p: Point) -> Result<f64> {
    chart.gaussian_curvature(p)
}

pub fn magnetic_curvature(system: &MagneticSystem, state: UnitTangent) -> Result<f64> {
    system.magnetic_curvature(state)
}

/// `∫_region field · Ω_g` by adaptive quadrature.
pub fn area_integral(chart: &Chart, field: &dyn Fn(Point) -> f64, region: Rect) -> Result<Estimate> {
    let covered = match chart {
        Chart::Conformal(c) => c.domain.contains_rect(&region),
        Chart::Revolution(c) => region.x_min >= c.s_range.0 && region.x_max <= c.s_range.1,
    };
    if !covered {
        return Err(Error::Domain(format!("region {region:?} not inside chart")));
    }
    quadrature::integrate_2d(
        |x, y| {
            let p = Point::new(x, y);
            field(p) * chart.area_density(p)
        },
        (region.x_min, region.x_max),
        (region.y_min, region.y_max),
        1e-13,
        1e-13,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn half_plane() -> Chart {
        Chart::Conformal(ConformalChart::half_plane(Rect::new(-10.0, 10.0, 0.01, 100.0)).unwrap())
    }

    #[test]
    fn quarter_turns() {
        let v = UnitTangent::new(0.0, 1.0, 0.0);
        assert!((v.rotate90().angle - FRAC_PI_2).abs() < 1e-15);
        let w = UnitTangent::new(0.0, 1.0, FRAC_PI_2).rotate90().rotate90();
        assert!((w.angle - 3.0 * FRAC_PI_2).abs() < 1e-15);
        assert!(angle_diff(w.angle, -FRAC_PI_2).abs() < 1e-15);
        let u = UnitTangent::new(0.0, 1.0, 1.2).rotate90();
        assert!((u.angle - (1.2 + FRAC_PI_2)).abs() < 1e-15);
    }

    #[test]
    fn curvature_examples() {
        let tanh = Chart::Revolution(RevolutionChart::new(Arc::new(TanhProfile), (-5.0, 5.0)).unwrap());
        for s in [-3.0, -0.2, 0.0, 1.7] {
            assert!((tanh.gaussian_curvature(Point::new(s, 0.3)).unwrap() + 1.0).abs() < 1e-14);
        }
        let hp = half_plane();
        assert_eq!(hp.gaussian_curvature(Point::new(0.0, 1.0)).unwrap(), -1.0);
        let flat = Chart::Revolution(RevolutionChart::new(Arc::new(FlatProfile), (0.0, 1.0)).unwrap());
        assert_eq!(flat.gaussian_curvature(Point::new(0.5, 2.0)).unwrap(), 0.0);
    }

    #[test]
    fn half_plane_curvature_by_finite_differences() {
        // -e^{-2λ}Δλ with λ = -ln y: Δλ = 1/y², e^{-2λ} = y², so K = -1
        let Chart::Conformal(c) = half_plane() else { unreachable!() };
        let k = c.fd_curvature(Point::new(0.0, 1.0));
        assert!((k + 1.0).abs() < 1e-6, "{k}");
    }

    #[test]
    fn out_of_domain_is_an_error() {
        let hp = half_plane();
        assert!(matches!(hp.gaussian_curvature(Point::new(0.0, -1.0)), Err(Error::Domain(_))));
        let sys = MagneticSystem::half_plane(0.5, Rect::new(-1.0, 1.0, 0.5, 2.0)).unwrap();
        assert!(sys.magnetic_curvature(UnitTangent::new(5.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn magnetic_curvature_constant_intensity() {
        let domain = Rect::new(-10.0, 10.0, 0.01, 100.0);
        let s0 = MagneticSystem::half_plane(0.0, domain).unwrap();
        let s1 = MagneticSystem::half_plane(0.5, domain).unwrap();
        for (x, y, a) in [(0.0, 1.0, 0.0), (2.0, 0.3, 2.1), (-4.0, 7.0, 5.9)] {
            let st = UnitTangent::new(x, y, a);
            assert_eq!(s0.magnetic_curvature(st).unwrap(), -1.0);
            assert!((s1.magnetic_curvature(st).unwrap() + 0.75).abs() < 1e-15);
        }
    }

    #[test]
    fn area_of_cylinder_bands() {
        let flat = Chart::Revolution(RevolutionChart::new(Arc::new(FlatProfile), (-2.0, 2.0)).unwrap());
        let a = area_integral(&flat, &|_| 1.0, Rect::new(0.0, 1.0, 0.0, TAU)).unwrap();
        assert!((a.value - TAU).abs() < 1e-12);
        let tanh = Chart::Revolution(RevolutionChart::new(Arc::new(TanhProfile), (-2.0, 2.0)).unwrap());
        let a = area_integral(&tanh, &|_| 1.0, Rect::new(-1.0, 1.0, 0.0, TAU)).unwrap();
        assert!((a.value - 4.0 * PI * 1f64.sinh()).abs() < 1e-11);
        assert!(a.error < 1e-8);
    }

    #[test]
    fn area_integral_rejects_bad_input() {
        let flat = Chart::Revolution(RevolutionChart::new(Arc::new(FlatProfile), (-2.0, 2.0)).unwrap());
        assert!(matches!(
            area_integral(&flat, &|_| f64::NAN, Rect::new(0.0, 1.0, 0.0, 1.0)),
            Err(Error::Integration(_))
        ));
        assert!(matches!(
            area_integral(&flat, &|_| 1.0, Rect::new(0.0, 3.0, 0.0, 1.0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn flipped_intensity() {
        let s = MagneticSystem::half_plane(0.3, Rect::new(-1.0, 1.0, 0.5, 2.0)).unwrap();
        let f = s.flipped();
        let p = Point::new(0.1, 1.0);
        assert_eq!(f.intensity.value(p), -0.3);
        assert_eq!(f.intensity.differential(p), [-0.0, -0.0]);
    }
}
