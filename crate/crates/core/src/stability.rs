//! Riccati and Jacobi equations along magnetic geodesics.
//!
//! Along a `(g, b)`-geodesic the normal Jacobi equation is
//! `ÿ + K^{g,b}(γ, γ̇) y = 0`, and `u = ẏ/y` solves the Riccati equation
//! `u̇ + u² + K^{g,b} = 0`. If every solution with `u(0) ≥ 0` satisfies
//! `1/H ≤ u(T) ≤ H` the flow is Anosov; [`anosov_certificate`] checks the
//! extreme initial values on a seeded sample of orbits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{self, FlowSettings, Trajectory};
use crate::geom::{MagneticSystem, Rect, UnitTangent};
use crate::ode::{self, Solution, Termination, Tolerances};

/// `|u|` beyond which a Riccati solution is declared to have blown up.
pub const BLOW_UP: f64 = 1e8;

const SOLVER_TOL: Tolerances = Tolerances {
    rel: 1e-12,
    abs: 1e-12,
    max_step: f64::INFINITY,
};

fn curvature_along(system: &MagneticSystem, traj: &Trajectory, t: f64) -> f64 {
    match traj.state_at(t) {
        Some(st) => system.magnetic_curvature_unchecked(st),
        None => f64::NAN,
    }
}

/// Times at which `K^{g,b}` along the orbit may fail to be smooth: the
/// orbit's own step times and its crossings of the system's knots.
fn breaks(system: &MagneticSystem, traj: &Trajectory) -> Vec<f64> {
    let mut out = traj.times.clone();
    let knots = system.knots();
    if !knots.is_empty() {
        let x = |t: f64| traj.state_at(t).map_or(f64::NAN, |st| st.point.x);
        for w in traj.times.windows(2) {
            // a few interior points so that a touch-and-return is seen too
            let ts: Vec<f64> = (0..=4).map(|i| w[0] + (w[1] - w[0]) * i as f64 / 4.0).collect();
            for p in ts.windows(2) {
                for &k in &knots {
                    let (mut a, mut b) = (p[0], p[1]);
                    let fa = x(a) - k;
                    if fa * (x(b) - k) >= 0.0 {
                        continue;
                    }
                    for _ in 0..60 {
                        let m = 0.5 * (a + b);
                        if (x(m) - k) * fa > 0.0 {
                            a = m;
                        } else {
                            b = m;
                        }
                    }
                    out.push(0.5 * (a + b));
                }
            }
        }
        out.sort_by(f64::total_cmp);
    }
    out
}

fn check_range(traj: &Trajectory, t_end: f64) -> Result<()> {
    if !(0.0..=traj.duration()).contains(&t_end) {
        return Err(Error::Domain(format!(
            "time {t_end} outside trajectory range [0, {}]",
            traj.duration()
        )));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct RiccatiRun {
    pub u0: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub blow_up: Option<f64>,
    solution: Solution<1>,
}

impl RiccatiRun {
    pub fn value_at(&self, t: f64) -> Option<f64> {
        self.solution.eval(t).map(|v| v[0])
    }

    pub fn final_value(&self) -> f64 {
        *self.values.last().expect("non-empty run")
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("non-empty run")
    }
}

fn riccati_until(system: &MagneticSystem, traj: &Trajectory, u0: f64, t_end: f64, tol: &Tolerances) -> Result<RiccatiRun> {
    check_range(traj, t_end)?;
    // K along the orbit is only smooth between the orbit's own steps
    let sol = ode::integrate_with_breaks(
        |t, u: &[f64; 1]| [-u[0] * u[0] - curvature_along(system, traj, t)],
        0.0,
        [u0],
        t_end,
        tol,
        &breaks(system, traj),
        |u| u[0].abs() > BLOW_UP,
    )?;
    let blow_up = match sol.termination {
        Termination::Stopped(t) => Some(t),
        Termination::Completed => None,
    };
    Ok(RiccatiRun {
        u0,
        times: sol.times.clone(),
        values: sol.states.iter().map(|v| v[0]).collect(),
        blow_up,
        solution: sol,
    })
}

/// Solves `u̇ = -u² - K^{g,b}(γ(t), γ̇(t))` over the whole trajectory.
pub fn riccati_solve(system: &MagneticSystem, traj: &Trajectory, u0: f64) -> Result<RiccatiRun> {
    riccati_until(system, traj, u0, traj.duration(), &SOLVER_TOL)
}

#[derive(Clone, Debug)]
pub struct JacobiRun {
    pub y0: f64,
    pub ydot0: f64,
    pub times: Vec<f64>,
    /// `(y, ẏ)` at each time.
    pub values: Vec<[f64; 2]>,
    solution: Solution<2>,
}

impl JacobiRun {
    pub fn value_at(&self, t: f64) -> Option<[f64; 2]> {
        self.solution.eval(t)
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("non-empty run")
    }
}

fn jacobi_with_stop(
    system: &MagneticSystem,
    traj: &Trajectory,
    y0: f64,
    ydot0: f64,
    stop: impl FnMut(&[f64; 2]) -> bool,
) -> Result<JacobiRun> {
    let sol = ode::integrate_with_breaks(
        |t, y: &[f64; 2]| [y[1], -curvature_along(system, traj, t) * y[0]],
        0.0,
        [y0, ydot0],
        traj.duration(),
        &SOLVER_TOL,
        &breaks(system, traj),
        stop,
    )?;
    Ok(JacobiRun {
        y0,
        ydot0,
        times: sol.times.clone(),
        values: sol.states.clone(),
        solution: sol,
    })
}

/// Solves `ÿ + K^{g,b} y = 0` along the trajectory.
pub fn jacobi_solve(system: &MagneticSystem, traj: &Trajectory, y0: f64, ydot0: f64) -> Result<JacobiRun> {
    jacobi_with_stop(system, traj, y0, ydot0, |_| false)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Consistency {
    /// `sup |u - ẏ/y|` on `[0, t*]`.
    pub residual: f64,
    /// First time `|y| < 1e-6`, if any.
    pub t_star: Option<f64>,
    /// Blow-up time of the Riccati solution run over the whole trajectory.
    pub blow_up: Option<f64>,
}

/// Compares the Riccati solution with `u0 = ẏ0/y0` against `ẏ/y` from the
/// Jacobi solution, up to the first near-zero of `y`.
pub fn riccati_jacobi_consistency(system: &MagneticSystem, traj: &Trajectory, y0: f64, ydot0: f64) -> Result<Consistency> {
    if y0 == 0.0 {
        return Err(Error::Domain("y0 must be non-zero".into()));
    }
    // a sign change between accepted steps also counts as reaching zero
    let jac = jacobi_with_stop(system, traj, y0, ydot0, |y| {
        y[0].abs() < 1e-6 || y[0].signum() != y0.signum()
    })?;
    let t_star = (jac.end_time() < traj.duration()).then(|| jac.end_time());
    let full = riccati_solve(system, traj, ydot0 / y0)?;
    let t_end = t_star.unwrap_or(traj.duration()).min(full.end_time());
    let ric = riccati_until(system, traj, ydot0 / y0, t_end, &SOLVER_TOL)?;
    let mut times: Vec<f64> = (0..=2000).map(|i| t_end * i as f64 / 2000.0).collect();
    times.extend(jac.times.iter().chain(&ric.times).filter(|&&t| t <= t_end));
    let mut residual: f64 = 0.0;
    for t in times {
        let (Some([y, yd]), Some(u)) = (jac.value_at(t), ric.value_at(t)) else {
            continue;
        };
        residual = residual.max((u - yd / y).abs());
    }
    Ok(Consistency {
        residual,
        t_star,
        blow_up: full.blow_up,
    })
}

/// Uniform box of initial states: first coordinate, second coordinate, angle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerBox {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub angle: (f64, f64),
}

impl SamplerBox {
    fn sample(&self, rng: &mut ChaCha8Rng) -> UnitTangent {
        let mut draw = |(a, b): (f64, f64)| if a < b { rng.random_range(a..b) } else { a };
        let x = draw(self.x);
        let y = draw(self.y);
        let angle = draw(self.angle);
        UnitTangent::new(x, y, angle)
    }

    fn as_rect(&self) -> Rect {
        Rect::new(self.x.0, self.x.1, self.y.0, self.y.1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateSettings {
    pub sampler: SamplerBox,
    pub samples: usize,
    pub horizon: f64,
    pub bound: f64,
    /// Initial Riccati values tested on every orbit; empty means `{0, H}`.
    pub u0_policy: Vec<f64>,
    pub seed: u64,
    pub flow: FlowSettings,
}

impl CertificateSettings {
    pub fn policy(&self) -> Vec<f64> {
        if self.u0_policy.is_empty() {
            vec![0.0, self.bound]
        } else {
            self.u0_policy.clone()
        }
    }

    pub fn validate(&self, system: &MagneticSystem) -> Result<()> {
        if !(self.horizon > 0.0) || !(self.bound > 1.0) || self.samples == 0 {
            return Err(Error::Settings(format!(
                "need T > 0, H > 1, N ≥ 1; got T = {}, H = {}, N = {}",
                self.horizon, self.bound, self.samples
            )));
        }
        let bounds = system.chart.bounds();
        let r = self.sampler.as_rect();
        let inside = if system.chart.is_revolution() {
            r.x_min >= bounds.x_min && r.x_max <= bounds.x_max
        } else {
            bounds.contains_rect(&r)
        };
        if !inside || r.x_min > r.x_max || r.y_min > r.y_max || self.sampler.angle.0 > self.sampler.angle.1 {
            return Err(Error::Domain(format!("sampler box {:?} not inside chart", self.sampler)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// `u(T)` outside `[1/H, H]`.
    #[serde(rename = "uT")]
    Final(f64),
    BlowUp(f64),
    /// The orbit left the chart at this time, so the criterion could not be checked.
    ChartExit(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub index: usize,
    pub state: UnitTangent,
    pub u0: f64,
    #[serde(rename = "uT_or_blowup")]
    pub outcome: Outcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub config: CertificateSettings,
    pub seed: u64,
    pub n: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "H")]
    pub bound: f64,
    pub pass: bool,
    pub violations: Vec<Violation>,
    /// Extremes of `u(T)` over runs that reached `T`.
    pub min_u_t: f64,
    pub max_u_t: f64,
    pub blow_ups: usize,
    pub chart_exits: usize,
    pub scope: String,
}

impl CertificateReport {
    pub fn summary(&self) -> String {
        format!(
            "{}: {} orbits x {} initial values, T = {}, H = {}, u(T) in [{:.6}, {:.6}], {} violations ({} blow-ups, {} chart exits)",
            if self.pass { "PASS" } else { "FAIL" },
            self.n,
            self.config.policy().len(),
            self.horizon,
            self.bound,
            self.min_u_t,
            self.max_u_t,
            self.violations.len(),
            self.blow_ups,
            self.chart_exits
        )
    }
}

/// Per-sample result; `observation` is whatever the caller measured on the trajectory.
#[derive(Clone, Debug)]
pub struct SampleResult {
    pub index: usize,
    pub state: UnitTangent,
    pub finals: Vec<(f64, Result<f64, Outcome>)>,
    pub observation: Option<f64>,
}

/// The `index`-th initial state of a seeded sampler; independent of every other index.
pub fn sample_state(sampler: &SamplerBox, seed: u64, index: usize) -> UnitTangent {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    sampler.sample(&mut rng)
}

fn run_sample<F>(system: &MagneticSystem, s: &CertificateSettings, index: usize, observe: &F) -> Result<SampleResult>
where
    F: Fn(&Trajectory) -> f64,
{
    let state = sample_state(&s.sampler, s.seed, index);
    let fs = FlowSettings {
        horizon: s.horizon,
        ..s.flow
    };
    let traj = flow::integrate(system, state, &fs)?;
    let observation = Some(observe(&traj));
    let policy = s.policy();
    if let Some(t) = traj.exit_time {
        return Ok(SampleResult {
            index,
            state,
            finals: policy.into_iter().map(|u0| (u0, Err(Outcome::ChartExit(t)))).collect(),
            observation,
        });
    }
    let tol = Tolerances {
        rel: s.flow.rel_tol,
        abs: s.flow.abs_tol,
        max_step: f64::INFINITY,
    };
    let mut finals = Vec::with_capacity(policy.len());
    for u0 in policy {
        let run = riccati_until(system, &traj, u0, traj.duration(), &tol)?;
        finals.push((
            u0,
            match run.blow_up {
                Some(t) => Err(Outcome::BlowUp(t)),
                None => Ok(run.final_value()),
            },
        ));
    }
    Ok(SampleResult {
        index,
        state,
        finals,
        observation,
    })
}

/// Runs the certificate and also returns `observe(trajectory)` for every sample.
pub fn anosov_certificate_with<F>(
    system: &MagneticSystem,
    settings: &CertificateSettings,
    observe: F,
) -> Result<(CertificateReport, Vec<SampleResult>)>
where
    F: Fn(&Trajectory) -> f64 + Sync,
{
    settings.validate(system)?;
    let results: Vec<SampleResult> = (0..settings.samples)
        .into_par_iter()
        .map(|i| run_sample(system, settings, i, &observe))
        .collect::<Result<_>>()?;
    let h = settings.bound;
    let mut violations = Vec::new();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in &results {
        for &(u0, ref fin) in &r.finals {
            let outcome = match *fin {
                Ok(u) => {
                    lo = lo.min(u);
                    hi = hi.max(u);
                    if u >= 1.0 / h && u <= h {
                        continue;
                    }
                    Outcome::Final(u)
                }
                Err(o) => o,
            };
            violations.push(Violation {
                index: r.index,
                state: r.state,
                u0,
                outcome,
            });
        }
    }
    let blow_ups = violations.iter().filter(|v| matches!(v.outcome, Outcome::BlowUp(_))).count();
    let chart_exits = violations
        .iter()
        .filter(|v| matches!(v.outcome, Outcome::ChartExit(_)))
        .count();
    let report = CertificateReport {
        config: settings.clone(),
        seed: settings.seed,
        n: settings.samples,
        horizon: settings.horizon,
        bound: h,
        pass: violations.is_empty(),
        violations,
        min_u_t: lo,
        max_u_t: hi,
        blow_ups,
        chart_exits,
        scope: "empirical: finitely many sampled orbits over a finite horizon, extreme initial values only; not a proof"
            .into(),
    };
    Ok((report, results))
}

/// Monte-Carlo check of `1/H ≤ u(T) ≤ H` for the initial values of the policy.
pub fn anosov_certificate(system: &MagneticSystem, settings: &CertificateSettings) -> Result<CertificateReport> {
    anosov_certificate_with(system, settings, |_| 0.0).map(|(r, _)| r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Chart, ConformalChart, Flat, MagneticIntensity};
    use std::f64::consts::{FRAC_PI_2, PI, TAU};
    use std::sync::Arc;

    fn half_plane(b: f64) -> MagneticSystem {
        MagneticSystem::half_plane(b, crate::hyperbolic::HALF_PLANE_DOMAIN).unwrap()
    }

    fn flat(b: f64) -> MagneticSystem {
        let chart = ConformalChart::new(Arc::new(Flat), Rect::new(-50.0, 50.0, -50.0, 50.0)).unwrap();
        MagneticSystem::new(Chart::Conformal(chart), MagneticIntensity::constant(b)).unwrap()
    }

    fn orbit(sys: &MagneticSystem, st: UnitTangent, t: f64) -> Trajectory {
        flow::integrate(sys, st, &FlowSettings::with_horizon(t)).unwrap()
    }

    #[test]
    fn riccati_on_negative_curvature() {
        let sys = half_plane(0.0);
        let tr = orbit(&sys, UnitTangent::new(0.0, 1.0, 0.3), 5.0);
        let fixed = riccati_solve(&sys, &tr, 1.0).unwrap();
        assert!(fixed.values.iter().all(|u| (u - 1.0).abs() < 1e-12));
        let run = riccati_solve(&sys, &tr, 0.0).unwrap();
        for i in 0..=500 {
            let t = 5.0 * i as f64 / 500.0;
            assert!((run.value_at(t).unwrap() - t.tanh()).abs() < 1e-8);
        }
        assert!((run.final_value() - 0.999_909_2).abs() < 1e-7);
    }

    #[test]
    fn magnetic_fixed_point() {
        let sys = half_plane(0.5);
        let tr = orbit(&sys, UnitTangent::new(0.3, 2.0, 4.0), 6.0);
        let c = 0.75f64.sqrt();
        let run = riccati_solve(&sys, &tr, c).unwrap();
        assert!(run.values.iter().all(|u| (u - c).abs() < 1e-9));
    }

    #[test]
    fn jacobi_closed_forms() {
        let sys = half_plane(0.0);
        let tr = orbit(&sys, UnitTangent::new(0.0, 1.0, 1.0), 3.0);
        let e = jacobi_solve(&sys, &tr, 1.0, 1.0).unwrap();
        let c = jacobi_solve(&sys, &tr, 1.0, 0.0).unwrap();
        let s = jacobi_solve(&sys, &tr, 0.0, 1.0).unwrap();
        for i in 0..=300 {
            let t = 3.0 * i as f64 / 300.0;
            let [ye, _] = e.value_at(t).unwrap();
            let [yc, _] = c.value_at(t).unwrap();
            let [ys, _] = s.value_at(t).unwrap();
            assert!((ye - t.exp()).abs() < 1e-9 * t.exp());
            assert!((yc - t.cosh()).abs() < 1e-9 * t.cosh());
            assert!((yc + ys - ye).abs() < 1e-9);
        }
    }

    #[test]
    fn consistency_cases() {
        let sys = half_plane(0.0);
        let tr = orbit(&sys, UnitTangent::new(0.0, 1.0, 2.0), 5.0);
        let r = riccati_jacobi_consistency(&sys, &tr, 1.0, 1.0).unwrap();
        assert!(r.residual < 1e-8 && r.t_star.is_none());

        let sys = half_plane(0.5);
        let tr = orbit(&sys, UnitTangent::new(1.0, 1.0, 0.0), 5.0);
        let r = riccati_jacobi_consistency(&sys, &tr, 1.0, 0.75f64.sqrt()).unwrap();
        assert!(r.residual < 1e-8);

        // K^{g,b} = b² = 1 on the flat plane: y = cos t
        let sys = flat(1.0);
        let tr = orbit(&sys, UnitTangent::new(0.0, 0.0, 0.0), 3.0);
        let r = riccati_jacobi_consistency(&sys, &tr, 1.0, 0.0).unwrap();
        let t_star = r.t_star.unwrap();
        assert!((t_star - FRAC_PI_2).abs() < 1e-5);
        assert!((r.blow_up.unwrap() - FRAC_PI_2).abs() < 1e-5);
        assert!(matches!(riccati_jacobi_consistency(&sys, &tr, 0.0, 1.0), Err(Error::Domain(_))));
    }

    fn settings(t: f64, h: f64, n: usize, sampler: SamplerBox) -> CertificateSettings {
        CertificateSettings {
            sampler,
            samples: n,
            horizon: t,
            bound: h,
            u0_policy: Vec::new(),
            seed: 11,
            flow: FlowSettings::default(),
        }
    }

    const BOX: SamplerBox = SamplerBox {
        x: (-1.0, 1.0),
        y: (0.5, 2.0),
        angle: (0.0, TAU),
    };

    #[test]
    fn certificate_half_plane() {
        let r = anosov_certificate(&half_plane(0.0), &settings(5.0, 3.0, 100, BOX)).unwrap();
        assert!(r.pass, "{}", r.summary());
        let r = anosov_certificate(&half_plane(0.5), &settings(8.0, 3.0, 50, BOX)).unwrap();
        assert!(r.pass);
        assert!((r.min_u_t - 0.75f64.sqrt()).abs() < 1e-4 && (r.max_u_t - 0.75f64.sqrt()).abs() < 1e-4);
    }

    #[test]
    fn certificate_positive_curvature_fails() {
        let sampler = SamplerBox {
            x: (-1.0, 1.0),
            y: (-1.0, 1.0),
            angle: (0.0, TAU),
        };
        let r = anosov_certificate(&flat(0.5), &settings(3.0 * PI, 3.0, 20, sampler)).unwrap();
        assert!(!r.pass);
        assert_eq!(r.blow_ups, 40);
    }

    #[test]
    fn certificate_is_deterministic() {
        let s = settings(2.0, 3.0, 30, BOX);
        let a = serde_json::to_string(&anosov_certificate(&half_plane(0.2), &s).unwrap()).unwrap();
        let b = serde_json::to_string(&anosov_certificate(&half_plane(0.2), &s).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn certificate_rejects_bad_settings() {
        let mut s = settings(2.0, 1.0, 10, BOX);
        assert!(matches!(anosov_certificate(&half_plane(0.0), &s), Err(Error::Settings(_))));
        s.bound = 3.0;
        s.sampler.y = (-1.0, 1.0);
        assert!(matches!(anosov_certificate(&half_plane(0.0), &s), Err(Error::Domain(_))));
    }
}
