use horseshoe::cone::{half_angle_worst, transport, Cone};
use horseshoe::lyapunov::{exponents_on_cycle, thresholds};
use horseshoe::map::{HorseshoeMap, Jacobian, Point, RegionId};
use horseshoe::orbit::{escape_time, in_w, in_w_tilde};
use horseshoe::params::MapParams;
use horseshoe::periodic::{census, Census};
use horseshoe::report::{evaluate, RunConfig};
use horseshoe::suites::Suite;
use proptest::prelude::*;
use std::sync::OnceLock;

fn map() -> HorseshoeMap {
    HorseshoeMap::default()
}

fn census8() -> &'static Census {
    static C: OnceLock<Census> = OnceLock::new();
    C.get_or_init(|| census(&map(), 8).unwrap())
}

fn strip_of(p: &MapParams, r: RegionId) -> (f64, f64) {
    let s = match r {
        RegionId::R1 => p.r1(),
        RegionId::R3 => p.r3(),
        RegionId::R4 => p.r4(),
        _ => p.r5(),
    };
    (s.lo, s.hi)
}

fn branch() -> impl Strategy<Value = RegionId> {
    prop::sample::select(RegionId::BRANCHES.to_vec())
}

fn point_in(r: RegionId) -> impl Strategy<Value = Point> {
    let (lo, hi) = strip_of(&MapParams::default(), r);
    (0.0..=1.0f64, lo..=hi).prop_map(|(x, y)| Point::new(x, y))
}

fn rel_diff(a: &Jacobian, b: &Jacobian) -> f64 {
    let mut m = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            m = m.max((a.0[i][j] - b.0[i][j]).abs());
        }
    }
    m / a.max_abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn step_back_recovers_the_point(r in branch(), t in 0.0..1.0f64, x in 0.0..=1.0f64) {
        let m = map();
        let (lo, hi) = strip_of(m.params(), r);
        let p = Point::new(x, lo + t * (hi - lo));
        let img = m.step_with(r, p);
        prop_assume!(img.in_square());
        let pre = m.preimages(img);
        prop_assert!(pre.iter().any(|(b, q)| *b == r && q.dist(&p) < 1e-12), "{p} -> {img}: {pre:?}");
        if let Ok(q) = m.step_back(img) {
            prop_assert!(q.dist(&p) < 1e-12);
        }
    }

    #[test]
    fn vertical_lines_map_to_parabolas(x0 in 0.0..=1.0f64, p in point_in(RegionId::R4)) {
        let m = map();
        let c = m.params();
        let img = m.step_with(RegionId::R4, Point::new(x0, p.y));
        let want = c.c * (img.x - c.q).powi(2) - c.lambda * x0;
        prop_assert!((img.y - want).abs() < 1e-12);
    }

    #[test]
    fn fold_derivative_bounds(p in point_in(RegionId::R4)) {
        let m = map();
        let c = m.params();
        let j = m.jacobian_with(RegionId::R4, Point::new(0.0, p.y));
        prop_assert!(j.0[0][1].hypot(j.0[1][1]) >= c.sigma);
        let j = m.jacobian_with(RegionId::R4, p);
        prop_assert!((j.0[0][0].hypot(j.0[1][0]) - c.lambda).abs() < 1e-15);
    }

    #[test]
    fn jacobian_matches_central_differences(r in branch(), t in 0.0..1.0f64, x in 0.0..=1.0f64) {
        let m = map();
        let (lo, hi) = strip_of(m.params(), r);
        let p = Point::new(x, lo + t * (hi - lo));
        let h = 1e-6;
        let col = |dx: f64, dy: f64| {
            let a = m.step_with(r, Point::new(p.x + dx, p.y + dy));
            let b = m.step_with(r, Point::new(p.x - dx, p.y - dy));
            [(a.x - b.x) / (2.0 * h), (a.y - b.y) / (2.0 * h)]
        };
        let cx = col(h, 0.0);
        let cy = col(0.0, h);
        let fd = Jacobian([[cx[0], cy[0]], [cx[1], cy[1]]]);
        prop_assert!(rel_diff(&m.jacobian_with(r, p), &fd) < 1e-5);
    }

    #[test]
    fn transport_is_exact(
        lo in -3.0..3.0f64,
        w in 0.0..3.0f64,
        a in -5.0..5.0f64, b in -5.0..5.0f64, c in -5.0..5.0f64, d in -5.0..5.0f64,
        ts in prop::collection::vec(0.0..=1.0f64, 100),
    ) {
        let j = Jacobian([[a, b], [c, d]]);
        prop_assume!(j.det().abs() > 1e-3);
        let cone = Cone::new(lo, lo + w);
        let Ok(img) = transport(&cone, &j) else { return Ok(()) };
        let slope = |u: f64| {
            let v = j.apply(Cone::direction(u));
            v[0] / v[1]
        };
        let scale = 1.0 + img.max_abs();
        for t in ts {
            let u = slope(cone.u_lo + t * cone.width());
            prop_assert!(u >= img.u_lo - 1e-10 * scale && u <= img.u_hi + 1e-10 * scale);
        }
        let (e1, e2) = (slope(cone.u_lo), slope(cone.u_hi));
        let (s, l) = (e1.min(e2), e1.max(e2));
        prop_assert!((s - img.u_lo).abs() <= 1e-10 * scale && (l - img.u_hi).abs() <= 1e-10 * scale);
    }

    #[test]
    fn escape_time_respects_its_bound(log_eta in (1e-6f64).ln()..(1.0f64 / 16.0).ln(), t in -1.0..1.0f64) {
        let m = map();
        let eta = log_eta.exp();
        let r = (1.0 / 256.0 - eta * eta).max(0.0).sqrt() * 0.999;
        let p = Point::new(m.params().q + t * r, eta);
        prop_assume!(in_w(m.params(), p));
        let e = escape_time(m.params(), p).unwrap();
        prop_assert!(e.n as f64 >= e.bound);
        prop_assert!(eta * 4f64.powi(e.n as i32) > 1.0 / 3.0);
        prop_assert!(eta * 4f64.powi(e.n as i32 - 1) <= 1.0 / 3.0);
    }

    #[test]
    fn w_is_inside_w_tilde(x in 0.6..0.85f64, y in 0.0..0.07f64, j in 0usize..80) {
        let p = MapParams::default();
        let q = Point::new(x, y);
        if in_w(&p, q) {
            prop_assert!(in_w_tilde(&p, q, j));
        }
    }
}

#[test]
fn half_angle_fact_holds_on_the_grid() {
    assert!(half_angle_worst(1000) < 0.0);
}

#[test]
fn census_orbits_close_under_reiteration() {
    let m = map();
    for o in &census8().orbits {
        assert!(o.residual < 1e-10);
        if o.mu_u.abs() > 1e5 {
            continue;
        }
        let mut p = o.points[0];
        for r in o.regions() {
            p = m.step_with(*r, p);
        }
        assert!(p.dist(&o.points[0]) < 1e-10, "{}", o.label());
    }
}

#[test]
fn multiplier_product_matches_determinants() {
    let c = MapParams::default();
    for o in &census8().orbits {
        let b = o.regions().iter().filter(|r| **r == RegionId::R4).count() as i32;
        let a = o.period() as i32 - b;
        let want = (c.lambda * c.sigma).powi(a) * (c.alpha * c.lambda).powi(b);
        let got = (o.mu_u * o.mu_s).abs();
        assert!(
            (got - want).abs() <= 1e-8 * want,
            "{}: {got} vs {want}",
            o.label()
        );
    }
}

#[test]
fn distinct_orbits_share_no_points() {
    let mut pts: Vec<(Point, usize)> = census8()
        .orbits
        .iter()
        .enumerate()
        .flat_map(|(i, o)| o.points.iter().map(move |p| (*p, i)))
        .collect();
    pts.sort_by(|a, b| a.0.x.total_cmp(&b.0.x));
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            if pts[j].0.x - pts[i].0.x > 1e-8 {
                break;
            }
            if pts[i].1 != pts[j].1 {
                assert!(pts[i].0.dist(&pts[j].0) > 1e-8);
            }
        }
    }
}

#[test]
fn census_is_schedule_independent() {
    let m = map();
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let a = one.install(|| census(&m, 7).unwrap());
    let b = census(&m, 7).unwrap();
    assert_eq!(a.orbits.len(), b.orbits.len());
    for (x, y) in a.orbits.iter().zip(&b.orbits) {
        assert_eq!(x.label(), y.label());
        assert_eq!(x.points, y.points);
    }
}

#[test]
fn every_census_orbit_avoids_the_gap() {
    let th = thresholds(&MapParams::default());
    for o in &census8().orbits {
        let (s, u) = o.exponents();
        assert!(s <= th.gap.0 && u >= th.gap.1, "{}", o.label());
    }
}

#[test]
fn renormalization_interval_does_not_change_exponents() {
    let m = map();
    for o in census8().orbits.iter().filter(|o| o.period() <= 5) {
        let cones = horseshoe::cone::cones_on_cycle(&m, &o.points, o.regions()).unwrap();
        let n = 1000 * o.period();
        let a = exponents_on_cycle(&m, o, &cones, n, 10).unwrap();
        let b = exponents_on_cycle(&m, o, &cones, n, 50).unwrap();
        assert!((a.chi_u - b.chi_u).abs() < 1e-12, "{}", o.label());
    }
}

fn small_config(seed: u64) -> RunConfig {
    RunConfig {
        seed,
        return_samples: 500,
        w_samples: 500,
        max_period: 6,
        cycle_max_period: 5,
        exponent_max_period: 2,
        exponent_horizon: 100_000,
        ..RunConfig::default()
    }
}

#[test]
fn same_seed_same_certificate() {
    let a = evaluate(&small_config(5)).unwrap();
    let b = evaluate(&small_config(5)).unwrap();
    assert_eq!(a.0.to_json(), b.0.to_json());
    assert_eq!(a.1, b.1);
}

#[test]
fn each_suite_runs_alone() {
    let full = evaluate(&small_config(3)).unwrap().0;
    for s in Suite::ALL {
        let cfg = RunConfig {
            suites: vec![s],
            ..small_config(3)
        };
        let alone = evaluate(&cfg).unwrap().0;
        assert_eq!(alone.suite(s), full.suite(s), "{s}");
        for other in Suite::ALL.iter().filter(|o| **o != s) {
            assert_eq!(alone.suite(*other).verdict, horseshoe::Verdict::NotRun);
        }
    }
}
