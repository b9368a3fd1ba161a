//! Constant curvature testbed.
//!
//! The hyperbolic cylinder is the half-plane modulo `z ↦ e^ℓ z`. For
//! constant `0 < b < 1` the closed `(g, b)`-geodesic in the class of the
//! deck map is the Euclidean ray through `(b, √(1-b²))`, a hypercycle of
//! length `ℓ/√(1-b²)` per turn.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{self, FlowSettings, Trajectory};
use crate::fmt17;
use crate::geom::{angle_diff, Chart, MagneticSystem, Point, Rect, UnitTangent};

/// Chart used for all cylinder computations.
pub const HALF_PLANE_DOMAIN: Rect = Rect::new(-1e6, 1e6, 1e-8, 1e8);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicCylinder {
    pub ell: f64,
}

impl HyperbolicCylinder {
    pub fn new(ell: f64) -> Result<Self> {
        if !(ell > 0.0 && ell.is_finite()) {
            return Err(Error::Domain(format!("translation length must be positive, got {ell}")));
        }
        Ok(Self { ell })
    }

    /// `deck^n(p) = e^{nℓ} p`.
    pub fn deck(&self, p: Point, n: i64) -> Point {
        let k = (n as f64 * self.ell).exp();
        Point::new(k * p.x, k * p.y)
    }

    /// Dilations are conformal, so the frame angle is unchanged.
    pub fn deck_state(&self, st: UnitTangent, n: i64) -> UnitTangent {
        UnitTangent {
            point: self.deck(st.point, n),
            angle: st.angle,
        }
    }

    /// Constant-`b` system on the half-plane chart.
    pub fn system(&self, b: f64) -> Result<MagneticSystem> {
        MagneticSystem::half_plane(b, HALF_PLANE_DOMAIN)
    }
}

/// Length of the closed `(g, b)`-geodesic in the class of a closed geodesic of length `ℓ`.
pub fn closed_orbit_length_formula(ell: f64, b: f64) -> Result<f64> {
    if !(ell > 0.0) {
        return Err(Error::Domain(format!("length must be positive, got {ell}")));
    }
    if !(b.abs() < 1.0) {
        return Err(Error::Domain(format!("no closed orbit for |b| = {} ≥ 1", b.abs())));
    }
    Ok(ell / (1.0 - b * b).sqrt())
}

/// Unit tangent at height `y = 1` on the invariant ray of constant intensity `b`.
pub fn hypercycle_start(b: f64) -> UnitTangent {
    let w = (1.0 - b * b).sqrt();
    UnitTangent::new(b / w, 1.0, w.atan2(b))
}

/// Euclidean distance from `p` to the ray through `(dx, dy)`.
pub fn distance_to_ray(p: Point, (dx, dy): (f64, f64)) -> f64 {
    let n = dx.hypot(dy);
    let (ux, uy) = (dx / n, dy / n);
    let along = p.x * ux + p.y * uy;
    if along <= 0.0 {
        p.x.hypot(p.y)
    } else {
        (p.x * uy - p.y * ux).abs()
    }
}

/// Distances of an integrated constant-`b` orbit from the two candidate rays
/// `(b, 1 - b²)` and `(b, √(1-b²))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypercycleCheck {
    pub b: f64,
    pub period: f64,
    pub samples: usize,
    pub max_dist_linear: f64,
    pub max_dist_sqrt: f64,
    /// `"(rb, r(1-b^2))"` or `"(rb, r*sqrt(1-b^2))"`, whichever is closer.
    pub follows: String,
}

/// Integrates one period from [`hypercycle_start`] and measures the distance
/// to both candidate rays at the knots and on a uniform grid.
pub fn hypercycle_check(ell: f64, b: f64, settings: &FlowSettings) -> Result<HypercycleCheck> {
    let period = closed_orbit_length_formula(ell, b)?;
    let cyl = HyperbolicCylinder::new(ell)?;
    let tr = flow::integrate(&cyl.system(b)?, hypercycle_start(b), &FlowSettings { horizon: period, ..*settings })?;
    if tr.exited() {
        return Err(Error::Integration("hypercycle left the chart".into()));
    }
    let mut times = tr.sample_times(period / 1000.0);
    times.extend_from_slice(tr.knots());
    let lin = (b, 1.0 - b * b);
    let sq = (b, (1.0 - b * b).sqrt());
    let (mut dl, mut ds) = (0.0f64, 0.0f64);
    for &t in &times {
        let p = tr.state_at(t).expect("inside horizon").point;
        dl = dl.max(distance_to_ray(p, lin));
        ds = ds.max(distance_to_ray(p, sq));
    }
    Ok(HypercycleCheck {
        b,
        period,
        samples: times.len(),
        max_dist_linear: dl,
        max_dist_sqrt: ds,
        follows: if ds <= dl { "(rb, r*sqrt(1-b^2))" } else { "(rb, r(1-b^2))" }.into(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShootingOptions {
    /// Initial period; defaults to `|n| ℓ`.
    pub period_guess: Option<f64>,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub fd_step: f64,
    pub flow: FlowSettings,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self {
            period_guess: None,
            max_iterations: 50,
            tolerance: 1e-10,
            fd_step: 1e-7,
            flow: FlowSettings {
                rel_tol: 1e-12,
                abs_tol: 1e-12,
                max_step: 0.5,
                horizon: 1.0,
            },
        }
    }
}

#[derive(Clone, Debug)]
pub struct ClosedOrbit {
    pub start: UnitTangent,
    pub period: f64,
    pub winding: i64,
    pub trajectory: Trajectory,
    pub residual: f64,
    pub iterations: usize,
}

struct Shooter<'a> {
    cyl: HyperbolicCylinder,
    system: &'a MagneticSystem,
    n: i64,
    flow: FlowSettings,
}

impl Shooter<'_> {
    fn start(z: &[f64; 3]) -> UnitTangent {
        UnitTangent::new(z[1], 1.0, z[0])
    }

    fn run(&self, z: &[f64; 3]) -> Option<Trajectory> {
        if !(z[2] > 0.0) {
            return None;
        }
        let settings = FlowSettings {
            horizon: z[2],
            ..self.flow
        };
        let tr = flow::integrate(self.system, Self::start(z), &settings).ok()?;
        (!tr.exited()).then_some(tr)
    }

    fn residual(&self, z: &[f64; 3]) -> Option<[f64; 3]> {
        let end = self.run(z)?.end();
        let back = self.cyl.deck_state(end, -self.n);
        Some([back.point.x - z[1], back.point.y - 1.0, angle_diff(back.angle, z[0])])
    }
}

fn max_norm(v: &[f64; 3]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Gaussian elimination with partial pivoting.
fn solve3(mut a: [[f64; 3]; 3], mut r: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        r.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|k| a[i][k] * x[k]).sum();
        x[i] = (r[i] - s) / a[i][i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Shoots for the closed orbit of a constant-intensity system in the class
/// of `deck^n`, starting on the line `y = 1`.
///
/// Unknowns are the initial angle, the initial `x` and the period; the
/// residual compares the endpoint pulled back by `deck^{-n}` with the start.
pub fn find_closed_orbit(
    cyl: HyperbolicCylinder,
    system: &MagneticSystem,
    n: i64,
    guess: UnitTangent,
    opts: &ShootingOptions,
) -> Result<ClosedOrbit> {
    if n == 0 {
        return Err(Error::Domain("winding must be non-zero".into()));
    }
    if !matches!(system.chart, Chart::Conformal(_)) {
        return Err(Error::Domain("closed orbit shooting needs the half-plane chart".into()));
    }
    let sh = Shooter {
        cyl,
        system,
        n,
        flow: opts.flow,
    };
    let mut z = [guess.angle, guess.point.x, opts.period_guess.unwrap_or(n.abs() as f64 * cyl.ell)];
    let mut f = sh.residual(&z).ok_or(Error::Shooting {
        iterations: 0,
        residual: f64::INFINITY,
    })?;
    let mut norm = max_norm(&f);
    let mut iterations = 0;
    while norm >= opts.tolerance {
        if iterations == opts.max_iterations {
            return Err(Error::Shooting { iterations, residual: norm });
        }
        iterations += 1;
        let mut jac = [[0.0; 3]; 3];
        for k in 0..3 {
            let mut zk = z;
            let h = opts.fd_step * z[k].abs().max(1.0);
            zk[k] += h;
            let fk = sh.residual(&zk).ok_or(Error::Shooting { iterations, residual: norm })?;
            for i in 0..3 {
                jac[i][k] = (fk[i] - f[i]) / h;
            }
        }
        let step = solve3(jac, f.map(|v| -v)).ok_or(Error::Shooting { iterations, residual: norm })?;
        let mut lambda = 1.0;
        loop {
            let trial = std::array::from_fn(|i| z[i] + lambda * step[i]);
            if let Some(ft) = sh.residual(&trial) {
                let nt = max_norm(&ft);
                if nt < norm || nt < opts.tolerance {
                    z = trial;
                    f = ft;
                    norm = nt;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-4 {
                return Err(Error::Shooting { iterations, residual: norm });
            }
        }
    }
    let trajectory = sh.run(&z).ok_or(Error::Shooting { iterations, residual: norm })?;
    Ok(ClosedOrbit {
        start: Shooter::start(&z),
        period: z[2],
        winding: n,
        trajectory,
        residual: norm,
        iterations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlsRow {
    pub ell: f64,
    pub b: f64,
    pub period_shot: f64,
    pub period_formula: f64,
    pub abs_err: f64,
    pub converged: bool,
}

/// Continuation from `b = 0` to every requested `b` of one sign, in steps of at most 0.1.
fn rows_for_ell(ell: f64, bs: &[f64]) -> Vec<MlsRow> {
    let cyl = match HyperbolicCylinder::new(ell) {
        Ok(c) => c,
        Err(_) => return bs.iter().map(|&b| failed_row(ell, b)).collect(),
    };
    let mut rows = Vec::new();
    for sign in [1.0, -1.0] {
        let mut targets: Vec<f64> = bs
            .iter()
            .copied()
            .filter(|b| if sign > 0.0 { *b >= 0.0 } else { *b < 0.0 })
            .collect();
        targets.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
        let mut current = 0.0;
        let mut guess = UnitTangent::new(0.0, 1.0, std::f64::consts::FRAC_PI_2);
        let mut period = ell;
        for b in targets {
            let mut ok = b.abs() < 1.0;
            let mut step: f64 = 0.1;
            while ok && current != b {
                let next = if (b - current).abs() <= step { b } else { current + step * sign };
                match shoot(cyl, next, guess, period) {
                    Some(orbit) => {
                        guess = orbit.start;
                        period = orbit.period;
                        current = next;
                        step = (step * 1.5).min(0.1);
                    }
                    None => {
                        // near |b| = 1 the orbit moves fast with b
                        step *= 0.5;
                        ok = step >= 1e-3;
                    }
                }
            }
            if current == b && ok {
                // the b = 0 start is only a guess until it has been shot
                let orbit = shoot(cyl, b, guess, period);
                rows.push(match (orbit, closed_orbit_length_formula(ell, b)) {
                    (Some(o), Ok(formula)) => MlsRow {
                        ell,
                        b,
                        period_shot: o.period,
                        period_formula: formula,
                        abs_err: (o.period - formula).abs(),
                        converged: true,
                    },
                    _ => failed_row(ell, b),
                });
            } else {
                rows.push(failed_row(ell, b));
            }
        }
    }
    rows
}

fn shoot(cyl: HyperbolicCylinder, b: f64, guess: UnitTangent, period: f64) -> Option<ClosedOrbit> {
    let system = cyl.system(b).ok()?;
    let opts = ShootingOptions {
        period_guess: Some(period),
        ..ShootingOptions::default()
    };
    find_closed_orbit(cyl, &system, 1, guess, &opts).ok()
}

fn failed_row(ell: f64, b: f64) -> MlsRow {
    let formula = closed_orbit_length_formula(ell, b).unwrap_or(f64::NAN);
    MlsRow {
        ell,
        b,
        period_shot: f64::NAN,
        period_formula: formula,
        abs_err: f64::NAN,
        converged: false,
    }
}

/// Shot and predicted periods for every `(ℓ, b)` pair, sorted by `(ℓ, b)`.
/// Failed rows are flagged rather than aborting the table.
pub fn mls_scaling_table(ells: &[f64], bs: &[f64]) -> Vec<MlsRow> {
    let mut ells = ells.to_vec();
    ells.sort_by(f64::total_cmp);
    ells.dedup();
    let mut bs = bs.to_vec();
    bs.sort_by(f64::total_cmp);
    bs.dedup();
    let mut rows: Vec<MlsRow> = ells.par_iter().flat_map_iter(|&ell| rows_for_ell(ell, &bs)).collect();
    rows.sort_by(|p, q| p.ell.total_cmp(&q.ell).then(p.b.total_cmp(&q.b)));
    rows
}

pub fn write_mls_csv<W: Write>(rows: &[MlsRow], mut out: W) -> io::Result<()> {
    writeln!(out, "ell,b,period_shot,period_formula,abs_err,converged")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt17(r.ell),
            fmt17(r.b),
            fmt17(r.period_shot),
            fmt17(r.period_formula),
            fmt17(r.abs_err),
            r.converged
        )?;
    }
    Ok(())
}

/// Real 2×2 matrix, row major.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn scale(&self, k: f64) -> Self {
        Mat2(self.0.map(|r| r.map(|v| k * v)))
    }

    pub fn add(&self, o: &Mat2) -> Self {
        Mat2(std::array::from_fn(|i| std::array::from_fn(|j| self.0[i][j] + o.0[i][j])))
    }

    pub fn sub(&self, o: &Mat2) -> Self {
        self.add(&o.scale(-1.0))
    }

    pub fn mul(&self, o: &Mat2) -> Self {
        let a = &self.0;
        let b = &o.0;
        Mat2(std::array::from_fn(|i| {
            std::array::from_fn(|j| a[i][0] * b[0][j] + a[i][1] * b[1][j])
        }))
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Generator of the magnetic flow with constant intensity `b` in the matrix model.
pub fn psl_generator(b: f64) -> Mat2 {
    Mat2::new(0.5, 0.5 * b, -0.5 * b, -0.5)
}

/// `Σ_k x^k / (2k)!` and `Σ_k x^k / (2k+1)!`, i.e. `cosh √x` and `sinh √x / √x`
/// for either sign of `x`.
fn even_odd_series(x: f64) -> (f64, f64) {
    if x.abs() >= 1e-4 {
        return if x > 0.0 {
            let s = x.sqrt();
            (s.cosh(), s.sinh() / s)
        } else {
            let s = (-x).sqrt();
            (s.cos(), s.sin() / s)
        };
    }
    let (mut c, mut sc, mut term_c, mut term_s) = (0.0, 0.0, 1.0, 1.0);
    for k in 0..6 {
        c += term_c;
        sc += term_s;
        let k = k as f64;
        term_c *= x / ((2.0 * k + 1.0) * (2.0 * k + 2.0));
        term_s *= x / ((2.0 * k + 2.0) * (2.0 * k + 3.0));
    }
    (c, sc)
}

/// `exp(t m)` in closed form: split off the trace, then use the
/// Cayley–Hamilton identity `N² = -det(N) I` for the traceless part.
pub fn mat_exp(m: &Mat2, t: f64) -> Mat2 {
    let a = m.scale(t);
    let tau = 0.5 * a.trace();
    let n = a.sub(&Mat2::IDENTITY.scale(tau));
    let (c, sc) = even_odd_series(-n.det());
    Mat2::IDENTITY.scale(c).add(&n.scale(sc)).scale(tau.exp())
}

/// `c_s = (1 - s b²)^{-1} [[1, -s b], [-s b, 1]]`.
pub fn conjugacy_matrix(s: f64, b: f64) -> Result<Mat2> {
    let denom = 1.0 - s * b * b;
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::Domain(format!("s b² = 1 for s = {s}, b = {b}")));
    }
    Ok(Mat2::new(1.0, -s * b, -s * b, 1.0).scale(1.0 / denom))
}

/// `max(‖X^b c - c X^{-b}‖, ‖exp(tX^b) c - c exp(tX^{-b})‖)` in the max-entry
/// norm, with `c = c_1`.
pub fn intertwining_residual(b: f64, t: f64) -> Result<f64> {
    let c = conjugacy_matrix(1.0, b)?;
    let xp = psl_generator(b);
    let xm = psl_generator(-b);
    let lie = xp.mul(&c).sub(&c.mul(&xm)).max_abs();
    let group = mat_exp(&xp, t).mul(&c).sub(&c.mul(&mat_exp(&xm, t))).max_abs();
    Ok(lie.max(group))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PslDraw {
    pub b: f64,
    pub t: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PslSweep {
    pub seed: u64,
    pub draws: Vec<PslDraw>,
    pub max_residual: f64,
    pub c0_is_identity: bool,
    pub det_c1: Vec<[f64; 2]>,
}

/// Seeded sweep over `|b| < b_max ≤ 1`, `|t| ≤ t_max`.
pub fn psl_sweep(seed: u64, n: usize, b_max: f64, t_max: f64) -> Result<PslSweep> {
    if !(b_max > 0.0 && b_max <= 1.0) || !(t_max >= 0.0) {
        return Err(Error::Settings(format!("need 0 < b_max ≤ 1 and t_max ≥ 0, got {b_max}, {t_max}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = Vec::with_capacity(n);
    for _ in 0..n {
        let mut b = rng.random_range(-b_max..b_max);
        while b.abs() >= 1.0 {
            b = rng.random_range(-b_max..b_max);
        }
        let t = if t_max > 0.0 { rng.random_range(-t_max..=t_max) } else { 0.0 };
        draws.push(PslDraw {
            b,
            t,
            residual: intertwining_residual(b, t)?,
        });
    }
    let max_residual = draws.iter().fold(0.0, |m: f64, d| m.max(d.residual));
    let c0_is_identity = [-0.9, -0.5, 0.0, 0.3, 0.5, 0.9]
        .iter()
        .all(|&b| conjugacy_matrix(0.0, b).map(|c| c == Mat2::IDENTITY).unwrap_or(false));
    let det_c1 = [0.0, 0.3, 0.5, 0.9]
        .iter()
        .map(|&b| conjugacy_matrix(1.0, b).map(|c| [b, c.det()]))
        .collect::<Result<_>>()?;
    Ok(PslSweep {
        seed,
        draws,
        max_residual,
        c0_is_identity,
        det_c1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hypercycle_follows_sqrt_ray() {
        let c = hypercycle_check(2.0, 0.5, &FlowSettings::default()).unwrap();
        assert!(c.max_dist_sqrt < 1e-6, "{c:?}");
        assert!(c.max_dist_linear > 0.1);
        assert_eq!(c.follows, "(rb, r*sqrt(1-b^2))");
    }

    #[test]
    fn formula_values() {
        assert_eq!(closed_orbit_length_formula(2.0, 0.0).unwrap(), 2.0);
        assert!((closed_orbit_length_formula(2.0, 0.5).unwrap() - 2.309_401_076_758_503).abs() < 1e-12);
        assert!((closed_orbit_length_formula(2.0, 0.9).unwrap() - 4.588_314_677_411_235).abs() < 1e-12);
        assert!(closed_orbit_length_formula(2.0, 1.0).is_err());
        let mut prev = 0.0;
        for k in 0..100 {
            let v = closed_orbit_length_formula(1.0, k as f64 / 100.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn deck_map_is_an_isometry() {
        let cyl = HyperbolicCylinder::new(1.3).unwrap();
        let chart = cyl.system(0.0).unwrap().chart;
        for (x, y, wx, wy) in [(0.2, 1.0, 1.0, 0.3), (-3.0, 0.01, -2.0, 5.0), (10.0, 40.0, 0.1, 0.0)] {
            let p = Point::new(x, y);
            let k = cyl.ell.exp();
            let a = chart.norm(p, [wx, wy]);
            let b = chart.norm(cyl.deck(p, 1), [k * wx, k * wy]);
            assert!((a - b).abs() < 1e-12 * a);
        }
    }

    #[test]
    fn geodesic_axis_orbit() {
        let cyl = HyperbolicCylinder::new(2.0).unwrap();
        let sys = cyl.system(0.0).unwrap();
        let o = find_closed_orbit(cyl, &sys, 1, UnitTangent::new(0.05, 1.0, 1.5), &ShootingOptions::default()).unwrap();
        assert!((o.period - 2.0).abs() < 1e-9);
        assert!(o.start.point.x.abs() < 1e-9);
    }

    #[test]
    fn hypercycle_orbit_and_its_double() {
        let cyl = HyperbolicCylinder::new(2.0).unwrap();
        let sys = cyl.system(0.5).unwrap();
        let opts = ShootingOptions::default();
        let guess = UnitTangent::new(0.4, 1.0, 1.2);
        let o1 = find_closed_orbit(cyl, &sys, 1, guess, &opts).unwrap();
        assert!((o1.period - 2.309_401_076_758_503).abs() < 1e-6);
        let exact = hypercycle_start(0.5);
        assert!((o1.start.point.x - exact.point.x).abs() < 1e-8);
        assert!(angle_diff(o1.start.angle, exact.angle).abs() < 1e-8);
        let o2 = find_closed_orbit(
            cyl,
            &sys,
            2,
            o1.start,
            &ShootingOptions {
                period_guess: Some(2.0 * o1.period),
                ..opts
            },
        )
        .unwrap();
        assert!((o2.period - 2.0 * o1.period).abs() < 1e-6);
    }

    #[test]
    fn zero_winding_rejected() {
        let cyl = HyperbolicCylinder::new(1.0).unwrap();
        let sys = cyl.system(0.0).unwrap();
        assert!(find_closed_orbit(cyl, &sys, 0, hypercycle_start(0.0), &ShootingOptions::default()).is_err());
    }

    #[test]
    fn table_rows() {
        let rows = mls_scaling_table(&[2.0], &[0.9, 0.0, -0.5]);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].b, -0.5);
        for r in &rows {
            assert!(r.converged, "{r:?}");
            assert!(r.abs_err < 1e-6, "{r:?}");
        }
        assert!(rows[1].abs_err < 1e-8);
        assert!((rows[2].period_formula - 4.588_314_677_411_235).abs() < 1e-9);
    }

    #[test]
    fn generator_and_exponential() {
        let x0 = psl_generator(0.0);
        assert_eq!(x0, Mat2::new(0.5, 0.0, 0.0, -0.5));
        for b in [0.0, 0.3, -0.7, 2.0] {
            let x = psl_generator(b);
            assert_eq!(x.trace(), 0.0);
            assert!((x.det() - (b * b - 1.0) / 4.0).abs() < 1e-15);
        }
        let e = mat_exp(&x0, 1.3);
        assert!((e.0[0][0] - 0.65f64.exp()).abs() < 1e-15);
        assert!((e.0[1][1] - (-0.65f64).exp()).abs() < 1e-15);
        assert_eq!(e.0[0][1], 0.0);
        assert_eq!(mat_exp(&psl_generator(0.4), 0.0), Mat2::IDENTITY);
    }

    #[test]
    fn exponential_matches_series() {
        // elliptic, parabolic and hyperbolic generators
        for m in [psl_generator(2.0), psl_generator(1.0), psl_generator(0.3), Mat2::new(0.3, 1.0, -2.0, 0.7)] {
            let t = 0.8;
            let mut term = Mat2::IDENTITY;
            let mut sum = Mat2::IDENTITY;
            for k in 1..40 {
                term = term.mul(&m).scale(t / k as f64);
                sum = sum.add(&term);
            }
            assert!(mat_exp(&m, t).sub(&sum).max_abs() < 1e-14, "{m:?}");
        }
    }

    #[test]
    fn conjugacy_family() {
        assert_eq!(conjugacy_matrix(0.0, 0.5).unwrap(), Mat2::IDENTITY);
        let c = conjugacy_matrix(1.0, 0.5).unwrap();
        let expect = Mat2::new(1.0, -0.5, -0.5, 1.0).scale(4.0 / 3.0);
        assert!(c.sub(&expect).max_abs() < 1e-15);
        for b in [0.1, 0.5, 0.9] {
            let d = conjugacy_matrix(1.0, b).unwrap().det();
            assert!((d - 1.0 / (1.0 - b * b)).abs() < 1e-12);
        }
        assert!(conjugacy_matrix(4.0, 0.5).is_err());
    }

    #[test]
    fn intertwining_examples() {
        for t in [-3.0, 0.0, 2.5] {
            assert_eq!(intertwining_residual(0.0, t).unwrap(), 0.0);
        }
        assert!(intertwining_residual(0.5, 1.0).unwrap() < 1e-12);
        let sweep = psl_sweep(7, 100, 1.0, 5.0).unwrap();
        assert!(sweep.max_residual < 1e-11, "{}", sweep.max_residual);
        assert!(sweep.c0_is_identity);
    }
}
