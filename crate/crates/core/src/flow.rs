//! Unit-speed magnetic geodesic flow in `(point, angle)` coordinates.
//!
//! A unit-speed curve has `g`-geodesic curvature `k = φ̇ - turning(x, φ)`
//! where `turning` is the rotation rate of the frame along a geodesic:
//!
//! * conformal chart: `turning = e^{-λ}(-λ_x sin φ + λ_y cos φ)`
//!   (half-plane: `-cos φ`);
//! * surface of revolution: `turning = -u(s) sin φ` (Clairaut).
//!
//! `(g, b)`-geodesics are the curves with `k = b`, so the flow is
//! `ẋ = velocity(x, φ)`, `φ̇ = b(x) + turning(x, φ)`.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt17;
use crate::geom::{Chart, MagneticSystem, Point, UnitTangent};
use crate::ode::{self, DenseSegment, Solution, StepStats, Termination, Tolerances};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub horizon: f64,
}

impl Default for FlowSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-10,
            max_step: 0.5,
            horizon: 1.0,
        }
    }
}

impl FlowSettings {
    pub fn with_horizon(horizon: f64) -> Self {
        Self {
            horizon,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let tol_ok = |t: f64| t > 0.0 && t <= 1e-2;
        if !tol_ok(self.rel_tol) || !tol_ok(self.abs_tol) {
            return Err(Error::Settings(format!(
                "tolerances must lie in (0, 1e-2], got rel {} abs {}",
                self.rel_tol, self.abs_tol
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Settings(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::Settings(format!("max_step must be positive, got {}", self.max_step)));
        }
        Ok(())
    }

    pub(crate) fn tolerances(&self) -> Tolerances {
        Tolerances {
            rel: self.rel_tol,
            abs: self.abs_tol,
            max_step: self.max_step,
        }
    }
}

/// A sampled orbit with its continuous extension.
#[derive(Clone, Debug)]
pub struct Trajectory {
    /// Accepted step times, strictly increasing, starting at 0.
    pub times: Vec<f64>,
    pub states: Vec<UnitTangent>,
    pub stats: StepStats,
    /// Time at which the orbit left the chart, if it did.
    pub exit_time: Option<f64>,
    segments: Vec<DenseSegment<3>>,
}

fn to_state(y: &[f64; 3]) -> UnitTangent {
    UnitTangent::new(y[0], y[1], y[2])
}

impl Trajectory {
    fn from_solution(sol: Solution<3>) -> Self {
        let exit_time = match sol.termination {
            Termination::Stopped(t) => Some(t),
            Termination::Completed => None,
        };
        Self {
            states: sol.states.iter().map(to_state).collect(),
            times: sol.times,
            stats: sol.stats,
            exit_time,
            segments: sol.segments,
        }
    }

    pub fn duration(&self) -> f64 {
        *self.times.last().expect("non-empty trajectory")
    }

    pub fn start(&self) -> UnitTangent {
        self.states[0]
    }

    pub fn end(&self) -> UnitTangent {
        *self.states.last().expect("non-empty trajectory")
    }

    pub fn exited(&self) -> bool {
        self.exit_time.is_some()
    }

    fn segment(&self, t: f64) -> Option<&DenseSegment<3>> {
        if self.segments.is_empty() || !(0.0..=self.duration()).contains(&t) {
            return None;
        }
        let i = self.times.partition_point(|&s| s <= t).saturating_sub(1);
        self.segments.get(i.min(self.segments.len() - 1))
    }

    /// Interpolated state at time `t ∈ [0, duration]`.
    pub fn state_at(&self, t: f64) -> Option<UnitTangent> {
        if t == self.duration() {
            return Some(self.end());
        }
        if self.segments.is_empty() {
            return (t == 0.0).then(|| self.start());
        }
        self.segment(t).map(|s| to_state(&s.eval(t)))
    }

    /// Time derivative `(ẋ, ẏ, φ̇)` of the interpolant.
    pub fn rate_at(&self, t: f64) -> Option<[f64; 3]> {
        self.segment(t).map(|s| s.derivative(t))
    }

    /// Knots of the piecewise-polynomial interpolant.
    pub fn knots(&self) -> &[f64] {
        &self.times
    }

    /// Evaluation times spaced by at most `dt`, always including both ends.
    pub fn sample_times(&self, dt: f64) -> Vec<f64> {
        let total = self.duration();
        let n = ((total / dt).ceil() as usize).max(1);
        (0..=n).map(|i| total * i as f64 / n as f64).collect()
    }

    /// Copy of the trajectory with `offsets[i]` added to the angle at sample
    /// `i`, linearly interpolated in between. Used to probe diagnostics.
    pub fn with_angle_offsets(&self, offsets: &[f64]) -> Trajectory {
        assert_eq!(offsets.len(), self.states.len(), "one offset per sample");
        let mut out = self.clone();
        for (st, d) in out.states.iter_mut().zip(offsets) {
            st.angle += d;
        }
        for (i, seg) in out.segments.iter_mut().enumerate() {
            seg.add_linear(2, offsets[i], offsets[i + 1]);
        }
        out
    }
}

/// Time derivative of the `(point, angle)` state.
pub fn magnetic_rhs(system: &MagneticSystem, state: UnitTangent) -> Result<([f64; 2], f64)> {
    if !system.chart.contains(state.point) {
        return Err(Error::Domain(format!(
            "state at ({}, {}) outside chart",
            state.point.x, state.point.y
        )));
    }
    Ok(rhs_unchecked(system, state))
}

fn rhs_unchecked(system: &MagneticSystem, state: UnitTangent) -> ([f64; 2], f64) {
    let p = state.point;
    let v = system.chart.velocity(p, state.angle);
    let w = system.intensity.value(p) + system.chart.turning(p, state.angle);
    (v, w)
}

pub(crate) fn rhs_array(system: &MagneticSystem, y: &[f64; 3]) -> [f64; 3] {
    let (v, w) = rhs_unchecked(system, to_state(y));
    [v[0], v[1], w]
}

/// Integrates the magnetic flow over `[0, settings.horizon]`.
///
/// Leaving the chart is not an error: the trajectory is truncated at the exit
/// time and [`Trajectory::exit_time`] is set.
pub fn integrate(system: &MagneticSystem, start: UnitTangent, settings: &FlowSettings) -> Result<Trajectory> {
    settings.validate()?;
    magnetic_rhs(system, start)?;
    let chart = &system.chart;
    // absolute position error in metric units, so isometric dilations of a
    // conformal chart map step sequences to step sequences
    let weight = |y: &[f64; 3]| match chart {
        Chart::Conformal(c) => {
            let w = (-c.factor.log_factor(Point::new(y[0], y[1]))).exp();
            if w.is_finite() && w > 0.0 {
                [w, w, 1.0]
            } else {
                [1.0; 3]
            }
        }
        Chart::Revolution(_) => [1.0; 3],
    };
    let sol = ode::integrate_weighted(
        |_, y: &[f64; 3]| rhs_array(system, y),
        0.0,
        [start.point.x, start.point.y, start.angle],
        settings.horizon,
        &settings.tolerances(),
        weight,
        |y| !chart.contains(Point::new(y[0], y[1])),
    )?;
    Ok(Trajectory::from_solution(sol))
}

/// `|k^g - b|` at time `t`, with `k^g` read off the interpolated angle.
pub fn curvature_defect_at(system: &MagneticSystem, traj: &Trajectory, t: f64) -> Option<f64> {
    let st = traj.state_at(t)?;
    let rate = traj.rate_at(t)?;
    let k = rate[2] - system.chart.turning(st.point, st.angle);
    Some((k - system.intensity.value(st.point)).abs())
}

/// `sup_t |k^g(t) - b(γ(t))|` over the knots and interior points of every step.
pub fn geodesic_curvature_residual(system: &MagneticSystem, traj: &Trajectory) -> f64 {
    let mut worst: f64 = 0.0;
    for w in traj.times.windows(2) {
        for frac in [0.0, 0.25, 0.5, 0.75] {
            let t = w[0] + frac * (w[1] - w[0]);
            if let Some(d) = curvature_defect_at(system, traj, t) {
                worst = worst.max(if d.is_nan() { f64::INFINITY } else { d });
            }
        }
    }
    worst
}

/// Total time the first coordinate `s(t)` spends in `[lo, hi]`.
pub fn band_occupation_time(traj: &Trajectory, (lo, hi): (f64, f64)) -> f64 {
    const SUB: usize = 16;
    let inside = |t: f64| {
        let s = traj.state_at(t).expect("time in range").point.x;
        s >= lo && s <= hi
    };
    // bisect for the time where membership flips between a and b
    let crossing = |mut a: f64, mut b: f64| {
        let start = inside(a);
        while b - a > 1e-9 {
            let m = 0.5 * (a + b);
            if inside(m) == start {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    };
    let mut total = 0.0;
    for w in traj.times.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let mut prev_t = t0;
        let mut prev_in = inside(t0);
        for j in 1..=SUB {
            let t = t0 + (t1 - t0) * j as f64 / SUB as f64;
            let now_in = inside(t);
            total += match (prev_in, now_in) {
                (true, true) => t - prev_t,
                (false, false) => 0.0,
                (true, false) => crossing(prev_t, t) - prev_t,
                (false, true) => t - crossing(prev_t, t),
            };
            prev_t = t;
            prev_in = now_in;
        }
    }
    total
}

/// Writes `t, x, y, phi, k_residual` rows (`s, theta` on revolution charts),
/// sampled every `dt` at most.
pub fn write_csv<W: Write>(system: &MagneticSystem, traj: &Trajectory, dt: f64, mut out: W) -> io::Result<()> {
    match system.chart {
        Chart::Conformal(_) => writeln!(out, "t,x,y,phi,k_residual")?,
        Chart::Revolution(_) => writeln!(out, "t,s,theta,phi,k_residual")?,
    }
    let end = traj.duration();
    for t in traj.sample_times(dt) {
        let st = traj.state_at(t).expect("sample time in range");
        // the interpolant's derivative is one-sided at the final knot
        let tk = if t == end && end > 0.0 { end * (1.0 - 1e-12) } else { t };
        let res = curvature_defect_at(system, traj, tk).unwrap_or(0.0);
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt17(t),
            fmt17(st.point.x),
            fmt17(st.point.y),
            fmt17(st.angle),
            fmt17(res)
        )?;
    }
    Ok(())
}
