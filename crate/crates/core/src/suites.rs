//! The verification suites run by `verify`.
//!
//! Each suite returns a verdict, counts, a worst margin (negative means violated) and
//! the tables it wants written as CSV. Suites share sampled data through [`Context`]
//! but never depend on which other suites were selected.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::{
    classify_image, cones_on_cycle, eta_grid, half_angle_worst, inclusion_for, min_c_for_inclusion,
    return_cone_sides, transport, Cone, LrvClass, SQRT_3,
};
use crate::lyapunov::{
    exponents_on_cycle, exponents_periodic, gap_check, nonuniformity, nonuniformity_profile,
    tangency_approach_points, thresholds, unstable_vector,
};
use crate::map::{HorseshoeMap, Point, RegionId};
use crate::orbit::{
    escape_time, excursion_cone, excursion_growth, in_w_tilde, step_growth_outside, ReturnRecord,
};
use crate::periodic::{census, certify_uniform_hyperbolicity, Census, PeriodicOrbit, RESIDUAL_TOL};
use crate::report::RunConfig;
use crate::sampling::{rng, sample_returns, w_point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Validate,
    VerifyCones,
    VerifyReturns,
    VerifyEscape,
    Periodic,
    Lyapunov,
    Nonuniformity,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Validate,
        Suite::VerifyCones,
        Suite::VerifyReturns,
        Suite::VerifyEscape,
        Suite::Periodic,
        Suite::Lyapunov,
        Suite::Nonuniformity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Validate => "validate",
            Suite::VerifyCones => "verify-cones",
            Suite::VerifyReturns => "verify-returns",
            Suite::VerifyEscape => "verify-escape",
            Suite::Periodic => "periodic",
            Suite::Lyapunov => "lyapunov",
            Suite::Nonuniformity => "nonuniformity",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown suite `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "pass")]
    Pass,
    #[serde(rename = "fail")]
    Fail,
    #[serde(rename = "not run")]
    NotRun,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::NotRun => "not run",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteOutcome {
    pub suite: Suite,
    pub verdict: Verdict,
    pub checked: usize,
    pub violations: usize,
    /// Smallest slack over all checks; negative when something failed.
    pub worst_margin: Option<f64>,
    pub metrics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl SuiteOutcome {
    pub fn not_run(suite: Suite) -> Self {
        SuiteOutcome {
            suite,
            verdict: Verdict::NotRun,
            checked: 0,
            violations: 0,
            worst_margin: None,
            metrics: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).copied()
    }
}

/// One CSV dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SuiteError {
    #[error("budget exceeded: {0}")]
    Budget(String),
}

pub type SuiteResult = Result<(SuiteOutcome, Vec<Table>), SuiteError>;

/// Shared, lazily computed inputs.
pub struct Context<'a> {
    pub map: HorseshoeMap,
    pub config: &'a RunConfig,
    census_period: usize,
    census: OnceLock<Census>,
    returns: OnceLock<Result<Vec<ReturnRecord>, SuiteError>>,
}

impl<'a> Context<'a> {
    pub fn new(config: &'a RunConfig) -> Self {
        let needs_full = config
            .suites
            .iter()
            .any(|s| matches!(s, Suite::Periodic | Suite::Lyapunov));
        let census_period = if needs_full {
            config.max_period.max(config.cycle_max_period)
        } else {
            config.cycle_max_period
        };
        Context {
            map: HorseshoeMap::unchecked(config.params),
            config,
            census_period,
            census: OnceLock::new(),
            returns: OnceLock::new(),
        }
    }

    fn census(&self) -> &Census {
        self.census
            .get_or_init(|| census(&self.map, self.census_period).expect("period is at least 1"))
    }

    /// Census orbits up to period `k`; the census is computed once at the largest needed period.
    pub fn orbits_up_to(&self, k: usize) -> impl Iterator<Item = &PeriodicOrbit> {
        self.census().orbits.iter().filter(move |o| o.period() <= k)
    }

    /// The sampled first returns shared by the return and cone suites.
    pub fn returns(&self) -> Result<&[ReturnRecord], SuiteError> {
        self.returns
            .get_or_init(|| {
                let c = self.config;
                let (mut recs, draws) = sample_returns(
                    &self.map,
                    &mut rng(c.seed),
                    c.return_samples,
                    c.max_iter,
                    c.max_draws,
                );
                if recs.len() < c.return_samples {
                    return Err(SuiteError::Budget(format!(
                        "{} of {} returns after {draws} draws",
                        recs.len(),
                        c.return_samples
                    )));
                }
                recs.sort_by(|a, b| cmp_points(a.start, b.start));
                Ok(recs)
            })
            .as_ref()
            .map(Vec::as_slice)
            .map_err(Clone::clone)
    }
}

fn cmp_points(a: Point, b: Point) -> std::cmp::Ordering {
    a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y))
}

fn f(x: f64) -> String {
    format!("{x}")
}

fn min_of(it: impl IntoIterator<Item = f64>) -> Option<f64> {
    it.into_iter()
        .fold(None, |m, x| Some(m.map_or(x, |m: f64| m.min(x))))
}

struct Tally {
    suite: Suite,
    checked: usize,
    violations: usize,
    worst: Option<f64>,
    metrics: BTreeMap<String, f64>,
    notes: Vec<String>,
}

impl Tally {
    fn new(suite: Suite) -> Self {
        Tally {
            suite,
            checked: 0,
            violations: 0,
            worst: None,
            metrics: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool) {
        self.checked += 1;
        if !ok {
            self.violations += 1;
        }
    }

    fn margin(&mut self, m: Option<f64>) {
        if let Some(m) = m {
            self.worst = Some(self.worst.map_or(m, |w| w.min(m)));
        }
    }

    fn put(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.to_string(), value);
    }

    fn finish(self) -> SuiteOutcome {
        SuiteOutcome {
            suite: self.suite,
            verdict: if self.violations == 0 {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
            checked: self.checked,
            violations: self.violations,
            worst_margin: self.worst,
            metrics: self.metrics,
            notes: self.notes,
        }
    }
}

pub fn run_suite(ctx: &Context, suite: Suite) -> SuiteResult {
    match suite {
        Suite::Validate => validate(ctx),
        Suite::VerifyCones => verify_cones(ctx),
        Suite::VerifyReturns => verify_returns(ctx),
        Suite::VerifyEscape => verify_escape(ctx),
        Suite::Periodic => periodic(ctx),
        Suite::Lyapunov => lyapunov(ctx),
        Suite::Nonuniformity => nonuniformity_suite(ctx),
    }
}

/// Parameter invariants and the two parameter-only facts behind the cone argument.
pub fn validate(ctx: &Context) -> SuiteResult {
    let p = ctx.map.params();
    let mut t = Tally::new(Suite::Validate);
    let violations = p.violations();
    t.check(violations.is_empty());
    for v in &violations {
        t.notes.push(v.to_string());
    }
    let needed = (9.0f64 / 4.0).max(39.0 / 4.0).max(p.sigma);
    t.margin(Some(p.c - needed));
    t.put("curvature_margin", p.c - needed);

    let cert = min_c_for_inclusion(p);
    t.check(cert.grid_max <= cert.sup);
    t.put("return_cone_threshold", cert.threshold);
    t.put("return_cone_exponent", cert.exponent);
    t.put("return_cone_grid_max", cert.grid_max);

    let half = half_angle_worst(1000);
    t.check(half < 0.0);
    t.margin(Some(-half));
    t.put("half_angle_worst", half);
    Ok((t.finish(), Vec::new()))
}

/// Return-time bound and contraction bound on sampled first returns.
pub fn verify_returns(ctx: &Context) -> SuiteResult {
    let recs = ctx.returns()?;
    let mut t = Tally::new(Suite::VerifyReturns);
    let mut rows = Vec::with_capacity(recs.len());
    let mut inverted = 0;
    let mut proof = 0;
    let mut unscaled = 0;
    for r in recs {
        t.check(r.return_time_pass);
        t.check(r.contraction_pass());
        t.margin(Some(r.n as f64 - r.return_time_bound));
        t.margin(Some(r.contraction.1 - r.contraction.0));
        inverted += usize::from(r.log_ratio() >= r.xi_bound_inverted);
        proof += usize::from(r.log_ratio() >= r.xi_bound);
        unscaled += usize::from(r.log_ratio() >= r.xi_bound_unscaled);
        rows.push(vec![
            f(r.start.x),
            f(r.start.y),
            f(r.xi_before),
            r.n.to_string(),
            f(r.end.x),
            f(r.end.y),
            f(r.xi_prev),
            f(r.return_time_bound),
            r.return_time_pass.to_string(),
            f(r.contraction.0),
            f(r.contraction.1),
            r.contraction_pass().to_string(),
            f(r.xi_bound_inverted),
            f(r.xi_bound),
            f(r.xi_bound_unscaled),
        ]);
    }
    t.put("returns", recs.len() as f64);
    t.put(
        "max_return_time",
        recs.iter().map(|r| r.n).max().unwrap_or(0) as f64,
    );
    t.put(
        "min_return_time_slack",
        min_of(recs.iter().map(|r| r.n as f64 - r.return_time_bound)).unwrap_or(f64::NAN),
    );
    t.put(
        "min_contraction_log_slack",
        min_of(recs.iter().map(|r| r.contraction.1 - r.contraction.0)).unwrap_or(f64::NAN),
    );
    // Logged only: the two exponent readings of the ξ-side bound are not adjudicated.
    t.put("xi_bound_inverted_exceeded", inverted as f64);
    t.put("xi_bound_exceeded", proof as f64);
    t.put("xi_bound_unscaled_exceeded", unscaled as f64);
    let table = Table {
        name: "returns.csv",
        header: vec![
            "x",
            "y",
            "xi_before",
            "n",
            "end_x",
            "end_y",
            "xi_prev",
            "return_time_bound",
            "return_time_pass",
            "contraction_log_lhs",
            "contraction_log_rhs",
            "contraction_pass",
            "xi_bound_inverted_log_rhs",
            "xi_bound_log_rhs",
            "xi_bound_unscaled_log_rhs",
        ],
        rows,
    };
    Ok((t.finish(), vec![table]))
}

/// Cone inclusion at returns, the return-cone inequality on an η-grid, and one-step
/// invariance along periodic cycles.
pub fn verify_cones(ctx: &Context) -> SuiteResult {
    let recs = ctx.returns()?;
    let map = &ctx.map;
    let p = map.params();
    let mut t = Tally::new(Suite::VerifyCones);

    let reports: Vec<_> = recs
        .par_iter()
        .map(|r| inclusion_for(map, r.clone()))
        .collect();
    let mut rows = Vec::with_capacity(reports.len());
    let mut errors = 0;
    let mut l3_checked = 0;
    let mut l3_fail = 0;
    let mut worst_incl = None;
    for (r, rep) in recs.iter().zip(&reports) {
        match rep {
            Ok(rep) => {
                t.check(rep.pass);
                t.margin(Some(rep.margin));
                worst_incl = min_of(worst_incl.into_iter().chain([rep.margin]));
                let (l3l, l3r) = rep
                    .v_to_v
                    .map_or((String::new(), String::new()), |(l, r)| (f(l), f(r)));
                if let Some(ok) = rep.v_to_v_pass() {
                    l3_checked += 1;
                    t.check(ok);
                    l3_fail += usize::from(!ok);
                }
                rows.push(vec![
                    f(r.start.x),
                    f(r.start.y),
                    format!("{:?}", rep.start_class),
                    format!("{:?}", rep.end_class),
                    r.n.to_string(),
                    f(rep.start_cone.u_hi),
                    f(rep.target_cone.u_hi),
                    f(rep.margin),
                    l3l,
                    l3r,
                    rep.pass.to_string(),
                ]);
            }
            Err(e) => {
                errors += 1;
                t.check(false);
                if errors <= 5 {
                    t.notes.push(format!("return from {}: {e}", r.start));
                }
            }
        }
    }
    t.put("inclusion_checked", reports.len() as f64);
    t.put("inclusion_worst_margin", worst_incl.unwrap_or(f64::NAN));
    t.put("inclusion_errors", errors as f64);
    t.put("v_to_v_checked", l3_checked as f64);
    t.put("v_to_v_violations", l3_fail as f64);

    let grid = eta_grid(ctx.config.eta_grid_len);
    let mut return_cone_rows = Vec::with_capacity(grid.len());
    let mut return_cone_fail = 0;
    for &eta in &grid {
        let (l, r) = return_cone_sides(p, eta);
        let ok = l < r;
        t.check(ok);
        t.margin(Some(r - l));
        return_cone_fail += usize::from(!ok);
        return_cone_rows.push(vec![f(eta), f(l), f(r), ok.to_string()]);
    }
    t.put("return_cone_violations", return_cone_fail as f64);
    if return_cone_fail > 0 {
        t.notes.push(format!(
            "return-cone inequality fails on {return_cone_fail} grid values of eta (c = {})",
            p.c
        ));
    }

    let mut inv_points = 0;
    let mut inv_fail = 0;
    let mut inv_worst: Option<f64> = None;
    let orbits: Vec<&PeriodicOrbit> = ctx.orbits_up_to(ctx.config.cycle_max_period).collect();
    let margins: Vec<Vec<f64>> = orbits
        .par_iter()
        .map(|o| {
            let k = o.period();
            let Ok(cones) = cones_on_cycle(map, &o.points, o.regions()) else {
                return vec![f64::NEG_INFINITY];
            };
            (0..k)
                .map(|i| {
                    let j = map.jacobian_with(o.regions()[i], o.points[i]);
                    transport(&cones[i], &j)
                        .map_or(f64::NEG_INFINITY, |im| im.margin_in(&cones[(i + 1) % k]))
                })
                .collect()
        })
        .collect();
    for m in margins.iter().flatten() {
        inv_points += 1;
        t.check(*m >= 0.0);
        inv_fail += usize::from(*m < 0.0);
        inv_worst = min_of(inv_worst.into_iter().chain([*m]));
    }
    t.margin(inv_worst);
    t.put("invariance_points", inv_points as f64);
    t.put("invariance_violations", inv_fail as f64);
    t.put("invariance_worst_margin", inv_worst.unwrap_or(f64::NAN));

    let tables = vec![
        Table {
            name: "inclusion.csv",
            header: vec![
                "x",
                "y",
                "start_class",
                "end_class",
                "n",
                "start_half_width",
                "target_half_width",
                "margin",
                "v_to_v_log_lhs",
                "v_to_v_log_rhs",
                "pass",
            ],
            rows,
        },
        Table {
            name: "return_cone.csv",
            header: vec!["eta", "lhs", "rhs", "pass"],
            rows: return_cone_rows,
        },
    ];
    Ok((t.finish(), tables))
}

/// Class of `orbit.points[i]` and whether its cone is wider than the standard cone.
fn cycle_class(map: &HorseshoeMap, orbit: &PeriodicOrbit, i: usize) -> LrvClass {
    let k = orbit.period();
    let before = (i + k - 1) % k;
    classify_image(
        map.params(),
        orbit.regions()[before],
        orbit.points[before],
        orbit.points[i],
    )
    .map_or(LrvClass::L, |(c, _)| c)
}

/// Escape time, vertical and total growth over W-excursions, and one-step growth
/// outside W̃ on periodic points.
pub fn verify_escape(ctx: &Context) -> SuiteResult {
    let cfg = ctx.config;
    let map = &ctx.map;
    let p = map.params();
    let mut t = Tally::new(Suite::VerifyEscape);

    let mut r = rng(cfg.seed.wrapping_add(1));
    let mut pts: Vec<Point> = (0..cfg.w_samples).map(|_| w_point(map, &mut r)).collect();
    pts.sort_by(|a, b| cmp_points(*a, *b));
    let results: Vec<_> = pts
        .par_iter()
        .map(|&q| {
            let et = escape_time(p, q);
            let ex: Vec<_> = excursion_cone(p, q.y)
                .directions(cfg.cone_directions)
                .into_iter()
                .map(|v| excursion_growth(map, q, v))
                .collect();
            (et, ex)
        })
        .collect();
    let mut rows = Vec::with_capacity(pts.len());
    let (mut e4, mut e5, mut e6, mut band, mut errs) = (0, 0, 0, 0, 0);
    let (mut w5, mut w6) = (None, None);
    for (q, (et, ex)) in pts.iter().zip(&results) {
        let et = match et {
            Ok(et) => et,
            Err(e) => {
                errs += 1;
                t.check(false);
                t.notes.push(format!("{q}: {e}"));
                continue;
            }
        };
        t.check(et.pass);
        e4 += usize::from(!et.pass);
        t.margin(Some(et.n as f64 - et.bound));
        let mut v5 = f64::INFINITY;
        let mut v6 = f64::INFINITY;
        for x in ex {
            match x {
                Ok(x) => {
                    t.check(x.vertical_pass());
                    t.check(x.growth_pass());
                    e5 += usize::from(!x.vertical_pass());
                    e6 += usize::from(!x.growth_pass());
                    band += usize::from(x.left_r1_at.is_some());
                    v5 = v5.min(x.vertical_ratio);
                    v6 = v6.min(x.growth_ratio);
                }
                Err(e) => {
                    errs += 1;
                    t.check(false);
                    if errs <= 5 {
                        t.notes.push(format!("{q}: {e}"));
                    }
                }
            }
        }
        t.margin(Some(v5 - 1.0));
        t.margin(Some(v6 - 1.0));
        w5 = min_of(w5.into_iter().chain([v5]));
        w6 = min_of(w6.into_iter().chain([v6]));
        rows.push(vec![
            f(q.x),
            f(q.y),
            et.n.to_string(),
            f(et.bound),
            f(v5),
            f(v6),
        ]);
    }
    t.put("w_points", pts.len() as f64);
    t.put("escape_violations", e4 as f64);
    t.put("vertical_growth_violations", e5 as f64);
    t.put("total_growth_violations", e6 as f64);
    t.put("min_vertical_ratio", w5.unwrap_or(f64::NAN));
    t.put("min_growth_ratio", w6.unwrap_or(f64::NAN));
    t.put("excursions_ending_above_r1", band as f64);
    t.put("excursion_errors", errs as f64);

    let sigma1 = thresholds(p).sigma1;
    t.put("sigma1", sigma1);
    let orbits: Vec<&PeriodicOrbit> = ctx.orbits_up_to(cfg.cycle_max_period).collect();
    let per_orbit: Vec<Vec<Vec<String>>> = orbits
        .par_iter()
        .map(|o| {
            let Ok(cones) = cones_on_cycle(map, &o.points, o.regions()) else {
                return Vec::new();
            };
            let mut out = Vec::new();
            for (i, &q) in o.points.iter().enumerate() {
                if in_w_tilde(p, q, cfg.j_max) {
                    continue;
                }
                let ratio = cones[i]
                    .directions(cfg.cone_directions)
                    .into_iter()
                    .filter_map(|v| step_growth_outside(map, q, v, &cones[i], cfg.j_max).ok())
                    .map(|g| g.ratio)
                    .fold(f64::INFINITY, f64::min);
                let class = cycle_class(map, o, i);
                out.push(vec![
                    o.label(),
                    i.to_string(),
                    f(q.x),
                    f(q.y),
                    format!("{class:?}"),
                    f(cones[i].u_lo),
                    f(cones[i].u_hi),
                    f(ratio),
                    (ratio > sigma1 * (1.0 - crate::orbit::STRICT_SLACK)).to_string(),
                ]);
            }
            out
        })
        .collect();
    let growth_rows: Vec<Vec<String>> = per_orbit.into_iter().flatten().collect();
    let mut g_fail = 0;
    let mut g_fail_wide_v = 0;
    let mut g_worst = None;
    for row in &growth_rows {
        let ratio: f64 = row[7].parse().unwrap_or(f64::NAN);
        let ok = row[8] == "true";
        t.check(ok);
        if !ok {
            g_fail += 1;
            let wide = row[6].parse::<f64>().is_ok_and(|w| w > SQRT_3);
            if row[4] == "V" && wide {
                g_fail_wide_v += 1;
            }
        }
        g_worst = min_of(g_worst.into_iter().chain([ratio]));
    }
    t.margin(g_worst.map(|w| w / sigma1 - 1.0));
    t.put("outside_points", growth_rows.len() as f64);
    t.put("outside_growth_violations", g_fail as f64);
    t.put("outside_growth_violations_wide_v", g_fail_wide_v as f64);
    t.put("outside_worst_ratio", g_worst.unwrap_or(f64::NAN));
    if g_fail > 0 {
        t.notes.push(format!(
            "one-step growth below sigma1 at {g_fail} points outside W-tilde; {g_fail_wide_v} of them are V-points whose cone is wider than sqrt(3)"
        ));
    }

    let tables = vec![
        Table {
            name: "excursions.csv",
            header: vec![
                "x",
                "y",
                "escape_n",
                "escape_bound",
                "min_vertical_ratio",
                "min_growth_ratio",
            ],
            rows,
        },
        Table {
            name: "growth_outside.csv",
            header: vec![
                "orbit",
                "index",
                "x",
                "y",
                "class",
                "u_lo",
                "u_hi",
                "min_ratio",
                "pass",
            ],
            rows: growth_rows,
        },
    ];
    Ok((t.finish(), tables))
}

/// Known orbits of the default family, returned as `(label, points, (|mu_s|, |mu_u|))`.
pub fn known_orbits() -> Vec<(&'static str, Vec<Point>, (f64, f64))> {
    vec![
        ("1", vec![Point::new(0.0, 0.0)], (0.25, 4.0)),
        ("5", vec![Point::new(1.0, 1.0)], (0.25, 4.0)),
        (
            "13",
            vec![Point::new(0.48, 1.6 / 15.0), Point::new(0.12, 6.4 / 15.0)],
            (0.0625, 16.0),
        ),
    ]
}

/// Census residuals, the known orbits, and the per-orbit hyperbolicity certificate.
pub fn periodic(ctx: &Context) -> SuiteResult {
    let cfg = ctx.config;
    let map = &ctx.map;
    let th = thresholds(map.params());
    let mut t = Tally::new(Suite::Periodic);
    let orbits: Vec<PeriodicOrbit> = ctx.orbits_up_to(cfg.max_period).cloned().collect();
    let c = ctx.census();

    for o in &orbits {
        t.check(o.residual < RESIDUAL_TOL);
    }
    let counts = {
        let mut v = vec![0usize; cfg.max_period];
        for o in &orbits {
            v[o.period() - 1] += 1;
        }
        v
    };
    for (k, n) in counts.iter().enumerate() {
        t.put(&format!("orbits_period_{:02}", k + 1), *n as f64);
    }
    t.put("orbits", orbits.len() as f64);
    t.put(
        "max_residual",
        orbits.iter().map(|o| o.residual).fold(0.0, f64::max),
    );
    if c.max_period == cfg.max_period {
        t.put("words_tried", c.words_tried as f64);
        for (why, n) in &c.rejected {
            t.put(&format!("rejected_{why:?}"), *n as f64);
        }
    }

    if *map.params() == crate::params::MapParams::default() {
        for (label, pts, (ms, mu)) in known_orbits() {
            let found = orbits
                .iter()
                .find(|o| o.label() == label && o.period() == pts.len());
            let ok = found.is_some_and(|o| {
                pts.iter()
                    .all(|q| o.points.iter().any(|x| x.dist(q) < 1e-10))
                    && (o.mu_s.abs() - ms).abs() < 1e-10
                    && (o.mu_u.abs() - mu).abs() < 1e-10
            });
            t.check(ok);
            if !ok {
                t.notes.push(format!("known orbit {label} not reproduced"));
            }
        }
    }

    let rep = certify_uniform_hyperbolicity(&orbits, th.sigma_tilde, th.lambda_tilde);
    for row in &rep.rows {
        t.check(row.pass);
    }
    t.put("sigma_star", th.sigma_tilde);
    t.put("lambda_star", th.lambda_tilde);
    t.put("min_unstable_rate", rep.best_sigma);
    t.put("max_stable_rate", rep.best_lambda);
    if !orbits.is_empty() {
        t.margin(Some(
            (rep.best_sigma - th.sigma_tilde).min(th.lambda_tilde - rep.best_lambda),
        ));
    }

    let rows = orbits
        .iter()
        .zip(&rep.rows)
        .map(|(o, r)| {
            vec![
                o.label(),
                o.period().to_string(),
                f(o.points[0].x),
                f(o.points[0].y),
                f(o.mu_u),
                f(o.mu_s),
                f(o.residual),
                f(r.unstable_margin),
                f(r.stable_margin),
                r.pass.to_string(),
            ]
        })
        .collect();
    let table = Table {
        name: "periodic_orbits.csv",
        header: vec![
            "label",
            "period",
            "x0",
            "y0",
            "mu_u",
            "mu_s",
            "residual",
            "unstable_margin",
            "stable_margin",
            "pass",
        ],
        rows,
    };
    Ok((t.finish(), vec![table]))
}

/// Exponent gap on the census and agreement of finite-time exponents with the exact ones.
pub fn lyapunov(ctx: &Context) -> SuiteResult {
    let cfg = ctx.config;
    let map = &ctx.map;
    let th = thresholds(map.params());
    let mut t = Tally::new(Suite::Lyapunov);
    t.check(
        th.sigma1 > 1.0 && th.sigma_tilde > 1.0 && th.lambda_tilde > 0.0 && th.lambda_tilde < 1.0,
    );
    t.put("sigma1", th.sigma1);
    t.put("sigma_tilde", th.sigma_tilde);
    t.put("rho_s", th.rho_s);
    t.put("lambda_tilde", th.lambda_tilde);
    t.put("gap_lo", th.gap.0);
    t.put("gap_hi", th.gap.1);

    let orbits: Vec<&PeriodicOrbit> = ctx.orbits_up_to(cfg.max_period).collect();
    let mut rows = Vec::with_capacity(orbits.len());
    let mut gap_fail = 0;
    for o in &orbits {
        let e = exponents_periodic(o);
        let ok = gap_check(&e, &th);
        t.check(ok);
        gap_fail += usize::from(!ok);
        rows.push(vec![
            o.label(),
            o.period().to_string(),
            f(e.chi_u),
            f(e.chi_s.unwrap_or(f64::NAN)),
            ok.to_string(),
        ]);
    }
    let min_u = min_of(orbits.iter().map(|o| o.exponents().1));
    let max_s = min_of(orbits.iter().map(|o| -o.exponents().0)).map(|x| -x);
    if let (Some(u), Some(s)) = (min_u, max_s) {
        t.margin(Some((u - th.gap.1).min(th.gap.0 - s)));
        t.put("min_chi_u", u);
        t.put("max_chi_s", s);
    }
    t.put("gap_violations", gap_fail as f64);

    let short: Vec<&PeriodicOrbit> = orbits
        .iter()
        .copied()
        .filter(|o| o.period() <= cfg.exponent_max_period)
        .collect();
    let fwd: Vec<_> = short
        .par_iter()
        .map(|o| {
            let cones = cones_on_cycle(map, &o.points, o.regions()).ok()?;
            let k = o.period();
            let n = (cfg.exponent_horizon / k).max(1) * k;
            let a = exponents_on_cycle(map, o, &cones, n, cfg.renorm).ok()?;
            let m = (cfg.renorm_check_horizon / k).max(1) * k;
            let b10 = exponents_on_cycle(map, o, &cones, m, 10).ok()?;
            let b50 = exponents_on_cycle(map, o, &cones, m, 50).ok()?;
            Some((a, (b10.chi_u - b50.chi_u).abs()))
        })
        .collect();
    let mut fwd_rows = Vec::new();
    let mut worst_err = 0.0f64;
    let mut worst_renorm = 0.0f64;
    for (o, r) in short.iter().zip(&fwd) {
        let Some((e, dr)) = r else {
            t.check(false);
            t.notes.push(format!(
                "finite-time exponents unavailable on {}",
                o.label()
            ));
            continue;
        };
        let (s, u) = o.exponents();
        let err = (e.chi_u - u)
            .abs()
            .max((e.chi_s.unwrap_or(f64::NAN) - s).abs());
        let ok = err <= cfg.exponent_tolerance;
        t.check(ok);
        t.check(*dr <= 1e-12);
        worst_err = worst_err.max(err);
        worst_renorm = worst_renorm.max(*dr);
        fwd_rows.push(vec![
            o.label(),
            o.period().to_string(),
            e.n.to_string(),
            f(e.chi_u),
            f(e.chi_s.unwrap_or(f64::NAN)),
            f(u),
            f(s),
            e.c_z.map_or(String::new(), f),
        ]);
    }
    t.put("finite_time_checked", fwd_rows.len() as f64);
    t.put("finite_time_max_error", worst_err);
    t.put("renormalization_max_difference", worst_renorm);

    let tables = vec![
        Table {
            name: "exponents.csv",
            header: vec!["label", "period", "chi_u", "chi_s", "gap_pass"],
            rows,
        },
        Table {
            name: "finite_time_exponents.csv",
            header: vec![
                "label",
                "period",
                "n",
                "chi_u",
                "chi_s",
                "chi_u_exact",
                "chi_s_exact",
                "c_z",
            ],
            rows: fwd_rows,
        },
    ];
    Ok((t.finish(), tables))
}

/// `C_x` along the unstable manifold of the origin as it approaches the tangency.
pub fn nonuniformity_suite(ctx: &Context) -> SuiteResult {
    let cfg = ctx.config;
    let map = &ctx.map;
    let mut t = Tally::new(Suite::Nonuniformity);
    let pts = tangency_approach_points(map, cfg.nonuniformity_j_max);
    let profiles =
        match nonuniformity_profile(map, &pts, cfg.nonuniformity_horizon, cfg.unstable_depth) {
            Ok(p) => p,
            Err(e) => {
                t.check(false);
                t.notes.push(e.to_string());
                return Ok((t.finish(), Vec::new()));
            }
        };
    for pr in &profiles {
        t.check(pr.c_x > 0.0);
    }
    for (j, w) in profiles.windows(2).enumerate() {
        t.check(w[1].c_x < w[0].c_x);
        t.margin(Some(w[0].c_x - w[1].c_x));
        if w[1].c_x >= w[0].c_x {
            t.notes.push(format!(
                "C_x does not decrease from j = {} to j = {}",
                j + 1,
                j + 2
            ));
        }
    }
    if let Some(last) = profiles.last() {
        t.check(last.c_x < cfg.nonuniformity_target);
        t.margin(Some(cfg.nonuniformity_target - last.c_x));
        t.put("final_c_x", last.c_x);
    }
    for (j, pr) in profiles.iter().enumerate() {
        t.put(&format!("c_x_j{}", j + 1), pr.c_x);
    }

    // The vertical at the origin is the exact unstable direction.
    if let Ok(fp) = nonuniformity(
        map,
        Point::new(0.0, 0.0),
        [0.0, 1.0],
        cfg.nonuniformity_horizon,
    ) {
        t.check(fp.c_x >= 1.0);
        t.put("fixed_point_c_x", fp.c_x);
    }
    let depth_diff = pts
        .iter()
        .map(|&q| {
            let a = unstable_vector(map, q, cfg.unstable_depth.saturating_sub(10));
            let b = unstable_vector(map, q, cfg.unstable_depth);
            (a[0] - b[0]).abs().max((a[1] - b[1]).abs())
        })
        .fold(0.0, f64::max);
    t.put("unstable_axis_depth_difference", depth_diff);

    let tc = map.tangency();
    let rows = profiles
        .iter()
        .enumerate()
        .map(|(j, pr)| {
            vec![
                (j + 1).to_string(),
                f(pr.point.x - tc.x),
                f(pr.point.x),
                f(pr.point.y),
                f(pr.v_u[0]),
                f(pr.v_u[1]),
                f(pr.c_x),
                pr.argmin.to_string(),
                pr.steps.to_string(),
            ]
        })
        .collect();
    let table = Table {
        name: "nonuniformity.csv",
        header: vec![
            "j", "distance", "x", "y", "v_u_x", "v_u_y", "c_x", "argmin", "steps",
        ],
        rows,
    };
    Ok((t.finish(), vec![table]))
}

/// Leaf direction at `orbit.points[i]`: vertical on L, tangent to the parabola otherwise.
pub fn leaf_direction(
    map: &HorseshoeMap,
    orbit: &PeriodicOrbit,
    i: usize,
) -> (LrvClass, f64, [f64; 2]) {
    let k = orbit.period();
    let before = (i + k - 1) % k;
    let q = map.params().q;
    match classify_image(
        map.params(),
        orbit.regions()[before],
        orbit.points[before],
        orbit.points[i],
    ) {
        Ok((class, a)) if orbit.regions()[before] == RegionId::R4 => {
            let sign = if orbit.points[i].x >= q { 1.0 } else { -1.0 };
            (class, a, [sign * a.cos(), a.sin()])
        }
        _ => (LrvClass::L, FRAC_PI_2, [0.0, 1.0]),
    }
}

/// The cone field on cycle points, one row per point.
pub fn cone_field_rows(map: &HorseshoeMap, orbits: &[&PeriodicOrbit]) -> Vec<Vec<String>> {
    orbits
        .par_iter()
        .map(|o| {
            let cones = cones_on_cycle(map, &o.points, o.regions())
                .unwrap_or_else(|_| vec![Cone::standard(); o.period()]);
            (0..o.period())
                .map(|i| {
                    let (class, a, d) = leaf_direction(map, o, i);
                    vec![
                        f(o.points[i].x),
                        f(o.points[i].y),
                        format!("{class:?}"),
                        f(a),
                        f(d[0]),
                        f(d[1]),
                        f(cones[i].u_lo),
                        f(cones[i].u_hi),
                    ]
                })
                .collect::<Vec<_>>()
        })
        .flatten()
        .collect()
}
