//! The eight acceptance criteria, one line each.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use magflow::examples::{
    build_burns_system, burns_certificate_experiment, homology_relation_check, minimality_sweep, BumpParams,
    BurnsConfig, ProfileParams,
};
use magflow::flow::{integrate, FlowSettings};
use magflow::geom::{
    angle_diff, Chart, ConformalChart, Flat, HalfPlane, MagneticIntensity, MagneticSystem, Point, Rect,
    RevolutionChart, Sphere, TanhProfile, UnitTangent,
};
use magflow::hyperbolic::{hypercycle_check, mls_scaling_table, psl_sweep, HALF_PLANE_DOMAIN};
use magflow::stability::{jacobi_solve, riccati_jacobi_consistency, riccati_solve};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn half_plane(b: f64) -> MagneticSystem {
    MagneticSystem::half_plane(b, HALF_PLANE_DOMAIN).unwrap()
}

fn conformal(factor: Arc<dyn magflow::geom::ConformalFactor>, b: f64) -> MagneticSystem {
    let chart = ConformalChart::new(factor, Rect::new(-50.0, 50.0, -50.0, 50.0)).unwrap();
    MagneticSystem::new(Chart::Conformal(chart), MagneticIntensity::constant(b)).unwrap()
}

fn tanh_cylinder(b: f64) -> MagneticSystem {
    let chart = RevolutionChart::new(Arc::new(TanhProfile), (-30.0, 30.0)).unwrap();
    MagneticSystem::new(Chart::Revolution(chart), MagneticIntensity::constant(b)).unwrap()
}

fn burns() -> MagneticSystem {
    build_burns_system(ProfileParams::default(), BumpParams::default(), (-40.0, 40.0))
        .unwrap()
        .plus
}

fn mls() -> Outcome {
    let rows = mls_scaling_table(&[1.0, 2.0, 3.7], &[0.0, 0.3, 0.5, 0.9]);
    let worst = rows.iter().fold(0.0f64, |m, r| m.max(r.abs_err));
    let all = rows.len() == 12 && rows.iter().all(|r| r.converged && r.abs_err < 1e-6);
    outcome(all, format!("{} rows, max |period - ℓ/√(1-b²)| = {worst:.3e}", rows.len()))
}

fn hypercycle() -> Outcome {
    let c = hypercycle_check(2.0, 0.5, &FlowSettings::default()).unwrap();
    let d = c.max_dist_sqrt.min(c.max_dist_linear);
    outcome(
        d < 1e-6,
        format!(
            "follows {}: max distance {d:.3e} ({} samples); other ray {:.3e}",
            c.follows,
            c.samples,
            c.max_dist_sqrt.max(c.max_dist_linear)
        ),
    )
}

fn psl() -> Outcome {
    let s = psl_sweep(SEED, 100, 0.99, 5.0).unwrap();
    outcome(
        s.max_residual < 1e-11 && s.c0_is_identity && s.draws.len() == 100,
        format!("max residual {:.3e} over {} draws, c_0 = I: {}", s.max_residual, s.draws.len(), s.c0_is_identity),
    )
}

fn riccati() -> Outcome {
    let sys = half_plane(0.0);
    let tr = integrate(&sys, UnitTangent::new(0.0, 1.0, 0.3), &FlowSettings::with_horizon(5.0)).unwrap();
    let run = riccati_solve(&sys, &tr, 0.0).unwrap();
    let tanh_err = (0..=1000)
        .map(|i| 5.0 * i as f64 / 1000.0)
        .fold(0.0f64, |m, t| m.max((run.value_at(t).unwrap() - t.tanh()).abs()));

    let mut fixed_err = 0.0f64;
    for b in [0.0f64, 0.5] {
        let c = (1.0 - b * b).sqrt();
        let sys = half_plane(b);
        let tr = integrate(&sys, UnitTangent::new(0.3, 2.0, 4.0), &FlowSettings::with_horizon(6.0)).unwrap();
        fixed_err = fixed_err.max((riccati_solve(&sys, &tr, c).unwrap().final_value() - c).abs());
    }

    // constant-curvature fleet, data for which y stays away from zero
    let fleet: Vec<(MagneticSystem, UnitTangent, f64, f64, f64)> = vec![
        (half_plane(0.0), UnitTangent::new(0.0, 1.0, 2.0), 1.0, 1.0, 5.0),
        (half_plane(0.5), UnitTangent::new(1.0, 1.0, 0.0), 1.0, 0.75f64.sqrt(), 5.0),
        (half_plane(0.9), UnitTangent::new(0.0, 1.0, 1.0), 2.0, -0.5, 5.0),
        (conformal(Arc::new(Flat), 0.0), UnitTangent::new(0.0, 0.0, 0.4), 1.0, 0.5, 5.0),
        // K = 1/4: y = cos(t/2) stays positive before π
        (conformal(Arc::new(Flat), 0.5), UnitTangent::new(0.0, 0.0, 0.4), 1.0, 0.0, 3.0),
        // K = 1: y = cos t + sin t stays positive before 3π/4
        (conformal(Arc::new(Sphere), 0.0), UnitTangent::new(0.0, 0.0, 1.0), 1.0, 1.0, 2.0),
    ];
    let mut consistency = 0.0f64;
    for (sys, st, y0, yd0, horizon) in &fleet {
        let tr = integrate(sys, *st, &FlowSettings::with_horizon(*horizon)).unwrap();
        let r = riccati_jacobi_consistency(sys, &tr, *y0, *yd0).unwrap();
        consistency = consistency.max(if r.t_star.is_none() { r.residual } else { f64::INFINITY });
    }
    // K ≡ +1: y = cos t vanishes at π/2 and u blows up there
    let sphere = conformal(Arc::new(Sphere), 0.0);
    let tr = integrate(&sphere, UnitTangent::new(0.0, 0.0, 0.0), &FlowSettings::with_horizon(3.0)).unwrap();
    let r = riccati_jacobi_consistency(&sphere, &tr, 1.0, 0.0).unwrap();
    let zero_found = matches!((r.t_star, r.blow_up), (Some(t), Some(b)) if (t - FRAC_PI_2).abs() < 1e-5 && (b - FRAC_PI_2).abs() < 1e-5);

    outcome(
        tanh_err < 1e-8 && fixed_err < 1e-8 && consistency < 1e-7 && zero_found,
        format!(
            "|u - tanh| = {tanh_err:.3e}, fixed point error {fixed_err:.3e}, consistency {consistency:.3e} on {} orbits, blow-up at π/2: {zero_found}",
            fleet.len()
        ),
    )
}

fn burns_validation() -> Outcome {
    let sys = build_burns_system(ProfileParams::default(), BumpParams::default(), (-40.0, 40.0)).unwrap();
    let v = &sys.validation;
    let s1 = v.clause("S1").unwrap();
    let s2 = v.clause("S2").unwrap();
    let s3 = v.clause("S3").unwrap();
    let ex = sys.exactness().unwrap();
    outcome(
        v.passed && s1.passed && s2.passed && s3.passed && ex.total.abs() < 1e-8,
        format!(
            "{} clauses pass; sup K on C_δ {:.6} (margin {:.3e}), sup K outside {:.6} (margin {:.3e}); K(0) = {:.4}, closing error {:.3e}; |∫bΩ| = {:.3e}",
            v.clauses.len(),
            s1.worst,
            s1.margin,
            s2.worst,
            s2.margin,
            s3.margin,
            s3.worst,
            ex.total.abs()
        ),
    )
}

fn burns_certificate() -> Outcome {
    let cfg = BurnsConfig::default();
    let a = burns_certificate_experiment(&cfg).unwrap();
    let b = burns_certificate_experiment(&cfg).unwrap();
    let ja = serde_json::to_string(&a.certificate).unwrap();
    let jb = serde_json::to_string(&b.certificate).unwrap();
    let c = &a.certificate;
    outcome(
        c.pass && c.n == 10_000 && c.blow_ups == 0 && c.chart_exits == 0 && ja == jb,
        format!(
            "N = {}, T = {}, H = {}: u(T) in [{:.4}, {:.4}], {} violations, {} blow-ups, identical re-run: {}",
            c.n,
            c.horizon,
            c.bound,
            c.min_u_t,
            c.max_u_t,
            c.violations.len(),
            c.blow_ups,
            ja == jb
        ),
    )
}

fn minimality() -> Outcome {
    let s = minimality_sweep(2.0, 0.5, 200, SEED, 0.05).unwrap();
    outcome(
        s.rows.len() == 200 && s.min_excess >= -1e-9,
        format!(
            "{} perturbations, L(γ_ν) = {:.10}, min L - L(γ_ν) = {:.3e}",
            s.rows.len(),
            s.reference_length,
            s.min_excess
        ),
    )
}

fn structural() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let systems = [half_plane(0.5), tanh_cylinder(0.3), burns()];
    let mut semigroup = 0.0f64;
    let mut speed = 0.0f64;
    let mut comparison = f64::NEG_INFINITY;
    let mut wronskian = 0.0f64;
    for i in 0..30 {
        let sys = &systems[i % 3];
        let st = if i % 3 == 0 {
            UnitTangent::new(rng.random_range(-1.0..1.0), rng.random_range(0.5..2.0), rng.random_range(0.0..TAU))
        } else {
            UnitTangent::new(rng.random_range(-2.0..2.0), rng.random_range(0.0..TAU), rng.random_range(0.0..TAU))
        };
        let (t1, t2) = (rng.random_range(0.2..2.0), rng.random_range(0.2..2.0));
        let whole = integrate(sys, st, &FlowSettings::with_horizon(t1 + t2)).unwrap();
        let first = integrate(sys, st, &FlowSettings::with_horizon(t1)).unwrap();
        let second = integrate(sys, first.end(), &FlowSettings::with_horizon(t2)).unwrap();
        let (a, b) = (whole.end(), second.end());
        let dy = if sys.chart.is_revolution() {
            angle_diff(a.point.y, b.point.y)
        } else {
            a.point.y - b.point.y
        };
        semigroup = semigroup.max((a.point.x - b.point.x).abs() + dy.abs() + angle_diff(a.angle, b.angle).abs());

        let h = 1e-3;
        for t in whole.sample_times(0.1) {
            if t < 2.0 * h || t > whole.duration() - 2.0 * h {
                continue;
            }
            let q = |k: f64| whole.state_at(t + k * h).unwrap().point;
            let (m2, m1, p1, p2) = (q(-2.0), q(-1.0), q(1.0), q(2.0));
            let d = |a: f64, b: f64, c: f64, e: f64| (a - 8.0 * b + 8.0 * c - e) / (12.0 * h);
            let v = [d(m2.x, m1.x, p1.x, p2.x), d(m2.y, m1.y, p1.y, p2.y)];
            speed = speed.max((sys.chart.norm(whole.state_at(t).unwrap().point, v) - 1.0).abs());
        }

        let u0 = rng.random_range(0.0..2.0);
        let lo = riccati_solve(sys, &whole, u0).unwrap();
        let hi = riccati_solve(sys, &whole, u0 + rng.random_range(0.0..1.0)).unwrap();
        let end = lo.end_time().min(hi.end_time());
        for k in 0..=200 {
            let t = (end * k as f64 / 200.0).min(end);
            comparison = comparison.max(lo.value_at(t).unwrap() - hi.value_at(t).unwrap());
        }

        let p = jacobi_solve(sys, &whole, 1.0, 0.0).unwrap();
        let q = jacobi_solve(sys, &whole, 0.0, 1.0).unwrap();
        for k in 0..=200 {
            let t = (whole.duration() * k as f64 / 200.0).min(p.end_time().min(q.end_time()));
            let ([y1, d1], [y2, d2]) = (p.value_at(t).unwrap(), q.value_at(t).unwrap());
            wronskian = wronskian.max((y1 * d2 - y2 * d1 - 1.0).abs());
        }
    }

    let mut curvature = 0.0f64;
    let conformal_fleet = [
        (ConformalChart::new(Arc::new(HalfPlane), Rect::new(-3.0, 3.0, 0.2, 5.0)).unwrap(), Rect::new(-2.5, 2.5, 0.3, 4.5)),
        (ConformalChart::new(Arc::new(Flat), Rect::new(-1.0, 1.0, -1.0, 1.0)).unwrap(), Rect::new(-0.9, 0.9, -0.9, 0.9)),
        (ConformalChart::new(Arc::new(Sphere), Rect::new(-2.0, 2.0, -2.0, 2.0)).unwrap(), Rect::new(-1.8, 1.8, -1.8, 1.8)),
    ];
    for (chart, r) in &conformal_fleet {
        let c = Chart::Conformal(chart.clone());
        for i in 0..101 {
            for j in 0..101 {
                let p = Point::new(
                    r.x_min + (r.x_max - r.x_min) * i as f64 / 100.0,
                    r.y_min + (r.y_max - r.y_min) * j as f64 / 100.0,
                );
                let k = c.gaussian_curvature(p).unwrap();
                curvature = curvature.max((k - chart.fd_curvature(p)).abs() / k.abs().max(1.0));
            }
        }
    }
    for sys in &systems[1..] {
        let Chart::Revolution(chart) = &sys.chart else { unreachable!() };
        for i in 0..101 {
            let s = -2.9 + 5.8 * i as f64 / 100.0;
            let k = sys.chart.gaussian_curvature(Point::new(s, 0.0)).unwrap();
            curvature = curvature.max((k - chart.fd_curvature(s)).abs() / k.abs().max(1.0));
        }
    }

    let mut homology = 0.0f64;
    for _ in 0..100 {
        let (a, c) = (rng.random_range(0.1..100.0), rng.random_range(-2.0..2.0));
        homology = homology.max(homology_relation_check(a, a, c, -c, -2.0));
    }

    outcome(
        semigroup < 1e-7 && speed < 1e-6 && curvature < 1e-6 && comparison <= 1e-9 && wronskian < 1e-9 && homology == 0.0,
        format!(
            "semigroup {semigroup:.2e}, |speed - 1| {speed:.2e}, FD curvature {curvature:.2e}, comparison {comparison:.2e}, Wronskian {wronskian:.2e}, homology symmetry {homology:e}"
        ),
    )
}

#[test]
fn acceptance_criteria() {
    type Criterion = (&'static str, f64, fn() -> Outcome);
    let criteria: [Criterion; 8] = [
        ("MLS scaling law", 30.0, mls),
        ("hypercycle invariance", 5.0, hypercycle),
        ("PSL intertwining", 1.0, psl),
        ("Riccati analytics", 5.0, riccati),
        ("exact Anosov construction", 10.0, burns_validation),
        ("exact Anosov certificate", 300.0, burns_certificate),
        ("magnetic length minimality", 60.0, minimality),
        ("structural invariants", 60.0, structural),
    ];
    let mut failures = Vec::new();
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let secs = start.elapsed().as_secs_f64();
        let pass = o.pass && secs < *budget;
        // straight to the handle so the lines survive the test harness capture
        let mut out = std::io::stdout().lock();
        writeln!(
            out,
            "[{}] {}. {name}: {} ({secs:.2} s, budget {budget} s)",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        )
        .unwrap();
        out.flush().unwrap();
        if !pass {
            failures.push(i + 1);
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
