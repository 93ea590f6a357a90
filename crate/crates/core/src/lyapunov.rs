//! Rate thresholds, finite-time exponents, the exponent-gap test and the
//! non-uniformity profile.

use serde::Serialize;

use crate::cone::{cone_at, Cone, ConeError};
use crate::map::{norm, HorseshoeMap, Jacobian, MapError, Point, RegionId};
use crate::orbit::in_w;
use crate::params::MapParams;
use crate::periodic::PeriodicOrbit;

/// `‖(λ√3, σ)‖/‖(√3, 1)‖`, the growth of the edge of the standard cone under `diag(λ, σ)`.
pub fn sigma1(params: &MapParams) -> f64 {
    (3.0 * params.lambda * params.lambda + params.sigma * params.sigma).sqrt() / 2.0
}

/// Least growth of `diag(1/λ, 1/σ)` on unit vectors with `|v2|/|v1| ≤ 1/√3`.
pub fn rho_s(params: &MapParams) -> f64 {
    (3.0 / (params.lambda * params.lambda) + 1.0 / (params.sigma * params.sigma)).sqrt() / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub sigma1: f64,
    /// `min{√σ, σ₁}`: per-step unstable rate.
    pub sigma_tilde: f64,
    pub rho_s: f64,
    /// `1/min{λ^{-1/2}, ρ_s}`: per-step stable rate.
    pub lambda_tilde: f64,
    /// `(log λ̃, log σ̃)`.
    pub gap: (f64, f64),
}

pub fn thresholds(params: &MapParams) -> Thresholds {
    let s1 = sigma1(params);
    let sigma_tilde = params.sigma.sqrt().min(s1);
    let rs = rho_s(params);
    let lambda_tilde = 1.0 / (1.0 / params.lambda.sqrt()).min(rs);
    Thresholds {
        sigma1: s1,
        sigma_tilde,
        rho_s: rs,
        lambda_tilde,
        gap: (lambda_tilde.ln(), sigma_tilde.ln()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    PeriodicExact,
    ConeVector,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentEstimate {
    pub n: usize,
    pub chi_u: f64,
    /// Missing when the backward orbit could not be followed for `n` steps.
    pub chi_s: Option<f64>,
    pub method: Method,
    /// Times at which the orbit leaves R1 after a visit to W.
    pub witness_times: Vec<usize>,
    /// `min_k ‖v_{n_k}‖/(σ̃^{n_k}‖v‖)` over the witness times.
    pub c_z: Option<f64>,
}

pub fn exponents_periodic(orbit: &PeriodicOrbit) -> ExponentEstimate {
    let (chi_s, chi_u) = orbit.exponents();
    ExponentEstimate {
        n: orbit.period(),
        chi_u,
        chi_s: Some(chi_s),
        method: Method::PeriodicExact,
        witness_times: Vec::new(),
        c_z: None,
    }
}

/// Both exponents lie in the closed complement of the open gap.
pub fn gap_check(est: &ExponentEstimate, th: &Thresholds) -> bool {
    match est.chi_s {
        Some(chi_s) => chi_s <= th.gap.0 && est.chi_u >= th.gap.1,
        None => false,
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LyapunovError {
    #[error("orbit left the strips at step {step} ({point})")]
    Escaped { step: usize, point: Point },
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error("renormalization interval must be at least 1")]
    Renormalization,
}

/// Log of the norm of `v` pushed through `jacs`, renormalized every `renorm` steps.
///
/// Also returns the running log-norm after each step.
fn push_log(jacs: impl Iterator<Item = Jacobian>, v: [f64; 2], renorm: usize) -> Vec<f64> {
    let mut w = v;
    let mut acc = norm(v).ln();
    let mut logs = Vec::new();
    for (i, j) in jacs.enumerate() {
        w = j.apply(w);
        let here = norm(w);
        logs.push(acc + here.ln());
        if (i + 1) % renorm == 0 {
            acc += here.ln();
            w = [w[0] / here, w[1] / here];
        }
    }
    logs
}

fn witnesses(
    params: &MapParams,
    regions: &[RegionId],
    pts: &[Point],
    logs: &[f64],
    sigma_tilde: f64,
    v0: f64,
) -> (Vec<usize>, Option<f64>) {
    let mut times = Vec::new();
    let mut visited = false;
    for (i, (&r, p)) in regions.iter().zip(pts).enumerate() {
        if in_w(params, *p) {
            visited = true;
        } else if visited && r != RegionId::R1 {
            times.push(i);
            visited = false;
        }
    }
    let c_z = times
        .iter()
        .filter(|&&t| t > 0)
        .map(|&t| logs[t - 1] - v0 - t as f64 * sigma_tilde.ln())
        .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.min(x))))
        .map(f64::exp);
    (times, c_z)
}

/// Finite-time exponents from the cone-axis vector, following the orbit of `p` with
/// `step` forward and `step_back` backward.
pub fn exponents_forward(
    map: &HorseshoeMap,
    p: Point,
    n: usize,
    renorm: usize,
) -> Result<ExponentEstimate, LyapunovError> {
    if renorm == 0 {
        return Err(LyapunovError::Renormalization);
    }
    let cone = cone_at(map, p)?;
    let mut pts = Vec::with_capacity(n);
    let mut regions = Vec::with_capacity(n);
    let mut cur = p;
    for step in 0..n {
        let r = map.region_of(cur);
        if !r.is_branch() {
            return Err(LyapunovError::Escaped { step, point: cur });
        }
        pts.push(cur);
        regions.push(r);
        cur = map.step_with(r, cur);
    }
    let v = Cone::direction(cone.axis());
    let logs = push_log(
        regions
            .iter()
            .zip(&pts)
            .map(|(&r, &q)| map.jacobian_with(r, q)),
        v,
        renorm,
    );
    let chi_u = logs.last().copied().unwrap_or(0.0) / n.max(1) as f64;

    let mut back = Vec::with_capacity(n);
    let mut cur = p;
    let mut complete = true;
    for _ in 0..n {
        match map.step_back_branch(cur) {
            Ok((r, pre)) => {
                back.push(map.jacobian_with(r, pre));
                cur = pre;
            }
            Err(MapError::NoPreimage(_) | MapError::AmbiguousPreimage { .. }) => {
                complete = false;
                break;
            }
            Err(_) => unreachable!(),
        }
    }
    let chi_s = complete.then(|| {
        let logs = push_log(
            back.iter().map(|j| j.inverse().expect("invertible")),
            [1.0, 0.0],
            renorm,
        );
        -logs.last().copied().unwrap_or(0.0) / n.max(1) as f64
    });
    let th = thresholds(map.params());
    let (witness_times, c_z) = witnesses(map.params(), &regions, &pts, &logs, th.sigma_tilde, 0.0);
    Ok(ExponentEstimate {
        n,
        chi_u,
        chi_s,
        method: Method::ConeVector,
        witness_times,
        c_z,
    })
}

/// Finite-time exponents along a periodic cycle, read cyclically so the estimate does
/// not drift off the (unstable) orbit.
pub fn exponents_on_cycle(
    map: &HorseshoeMap,
    orbit: &PeriodicOrbit,
    cones: &[Cone],
    n: usize,
    renorm: usize,
) -> Result<ExponentEstimate, LyapunovError> {
    if renorm == 0 {
        return Err(LyapunovError::Renormalization);
    }
    let k = orbit.period();
    let regions = orbit.regions();
    let jac: Vec<Jacobian> = (0..k)
        .map(|i| map.jacobian_with(regions[i], orbit.points[i]))
        .collect();
    let v = Cone::direction(cones[0].axis());
    let logs = push_log((0..n).map(|i| jac[i % k]), v, renorm);
    let chi_u = logs.last().copied().unwrap_or(0.0) / n as f64;
    let inv: Vec<Jacobian> = jac
        .iter()
        .map(|j| j.inverse().expect("invertible"))
        .collect();
    let back = push_log((0..n).map(|i| inv[(k - 1 - i % k) % k]), [1.0, 0.0], renorm);
    let chi_s = -back.last().copied().unwrap_or(0.0) / n as f64;
    let cyc_regions: Vec<RegionId> = (0..n).map(|i| regions[i % k]).collect();
    let cyc_pts: Vec<Point> = (0..n).map(|i| orbit.points[i % k]).collect();
    let th = thresholds(map.params());
    let (witness_times, c_z) = witnesses(
        map.params(),
        &cyc_regions,
        &cyc_pts,
        &logs,
        th.sigma_tilde,
        0.0,
    );
    Ok(ExponentEstimate {
        n,
        chi_u,
        chi_s: Some(chi_s),
        method: Method::ConeVector,
        witness_times,
        c_z,
    })
}

/// Unit vector at `p` obtained by pushing the vertical forward from up to `depth`
/// backward steps.
pub fn unstable_vector(map: &HorseshoeMap, p: Point, depth: usize) -> [f64; 2] {
    let mut chain = Vec::new();
    let mut cur = p;
    for _ in 0..depth {
        match map.step_back_branch(cur) {
            Ok((r, pre)) => {
                chain.push((r, pre));
                cur = pre;
            }
            Err(_) => break,
        }
    }
    let mut v = [0.0, 1.0];
    for &(r, q) in chain.iter().rev() {
        v = map.jacobian_with(r, q).apply(v);
        let n = norm(v);
        v = [v[0] / n, v[1] / n];
    }
    if v[1] < 0.0 {
        v = [-v[0], -v[1]];
    }
    v
}

#[derive(Debug, Clone, Serialize)]
pub struct NonuniformityProfile {
    pub point: Point,
    pub v_u: [f64; 2],
    /// Requested horizon.
    pub horizon: usize,
    /// Steps actually taken before the orbit left the strips.
    pub steps: usize,
    pub c_x: f64,
    /// Step at which the minimum is attained.
    pub argmin: usize,
}

/// `C_x = min_{1 ≤ n ≤ N} ‖DΦⁿ v_u‖/σ̃ⁿ` with `‖v_u‖ = 1`.
pub fn nonuniformity(
    map: &HorseshoeMap,
    p: Point,
    v_u: [f64; 2],
    horizon: usize,
) -> Result<NonuniformityProfile, ConeError> {
    if map.is_on_tangency_orbit(p, crate::cone::TANGENCY_TOL) {
        return Err(ConeError::TangencyOrbit(p));
    }
    let ln_s = thresholds(map.params()).sigma_tilde.ln();
    let nv = norm(v_u);
    let mut v = [v_u[0] / nv, v_u[1] / nv];
    let mut log_norm = 0.0;
    let mut cur = p;
    let mut best = (f64::INFINITY, 0);
    let mut steps = 0;
    for n in 1..=horizon {
        let r = map.region_of(cur);
        if !r.is_branch() {
            break;
        }
        v = map.jacobian_with(r, cur).apply(v);
        cur = map.step_with(r, cur);
        let len = norm(v);
        log_norm += len.ln();
        v = [v[0] / len, v[1] / len];
        steps = n;
        let val = log_norm - n as f64 * ln_s;
        if val < best.0 {
            best = (val, n);
        }
    }
    Ok(NonuniformityProfile {
        point: p,
        v_u: [v_u[0] / nv, v_u[1] / nv],
        horizon,
        steps,
        c_x: best.0.exp(),
        argmin: best.1,
    })
}

/// Profiles with the unstable vector taken from `depth` backward steps.
pub fn nonuniformity_profile(
    map: &HorseshoeMap,
    points: &[Point],
    horizon: usize,
    depth: usize,
) -> Result<Vec<NonuniformityProfile>, ConeError> {
    points
        .iter()
        .map(|&p| nonuniformity(map, p, unstable_vector(map, p, depth), horizon))
        .collect()
}

/// `Φ(0, y_c + 10⁻ʲ/α) = (q + 10⁻ʲ, c·10⁻²ʲ)`, points of the unstable manifold of the
/// origin approaching the tangency.
pub fn tangency_approach_points(map: &HorseshoeMap, j_max: usize) -> Vec<Point> {
    let p = map.params();
    (1..=j_max)
        .map(|j| {
            let d = 10f64.powi(-(j as i32));
            map.step_with(RegionId::R4, Point::new(0.0, map.y_c() + d / p.alpha))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::periodic::{find_orbit, Itinerary};

    #[test]
    fn default_thresholds() {
        let th = thresholds(&MapParams::default());
        assert!((th.sigma1 - 2.011_684).abs() < 1e-6);
        assert_eq!(th.sigma_tilde, 2.0);
        assert!((th.rho_s - 3.466_356).abs() < 1e-6);
        assert_eq!(th.lambda_tilde, 0.5);
        assert!(
            (th.gap.0 + std::f64::consts::LN_2).abs() < 1e-15
                && (th.gap.1 - std::f64::consts::LN_2).abs() < 1e-15
        );
    }

    #[test]
    fn gap_examples() {
        let th = thresholds(&MapParams::default());
        let est = |chi_s: f64, chi_u: f64| ExponentEstimate {
            n: 1,
            chi_u,
            chi_s: Some(chi_s),
            method: Method::PeriodicExact,
            witness_times: vec![],
            c_z: None,
        };
        assert!(gap_check(&est(-1.3863, 1.3863), &th));
        assert!(!gap_check(&est(0.1, 1.0), &th));
        assert!(gap_check(&est(-1.0, th.gap.1), &th));
    }

    #[test]
    fn periodic_exponents() {
        let map = HorseshoeMap::default();
        let o = find_orbit(&map, &Itinerary(vec![RegionId::R1])).unwrap();
        let e = exponents_periodic(&o);
        assert!(
            (e.chi_u - 4f64.ln()).abs() < 1e-15 && (e.chi_s.unwrap() + 4f64.ln()).abs() < 1e-15
        );
        let o = find_orbit(&map, &Itinerary(vec![RegionId::R1, RegionId::R3])).unwrap();
        let e = exponents_periodic(&o);
        assert!((e.chi_u - 1.386_294).abs() < 1e-6 && (e.chi_s.unwrap() + 1.386_294).abs() < 1e-6);
    }

    #[test]
    fn forward_exponents_at_linear_points() {
        let map = HorseshoeMap::default();
        let e = exponents_forward(&map, Point::new(0.0, 0.0), 200, 10).unwrap();
        assert!((e.chi_u - 4f64.ln()).abs() < 1e-12);
        assert!((e.chi_s.unwrap() + 4f64.ln()).abs() < 1e-12);
        let e = exponents_forward(&map, Point::new(0.1, 0.0), 500, 10).unwrap();
        assert!((e.chi_u - 4f64.ln()).abs() < 1e-12);
        assert_eq!(e.chi_s, None);
        assert!(!gap_check(&e, &thresholds(map.params())));
    }

    #[test]
    fn renormalization_interval_does_not_matter() {
        let map = HorseshoeMap::default();
        let a = exponents_forward(&map, Point::new(0.0, 0.0), 1000, 10).unwrap();
        let b = exponents_forward(&map, Point::new(0.0, 0.0), 1000, 50).unwrap();
        assert!((a.chi_u - b.chi_u).abs() < 1e-12);
    }

    #[test]
    fn fixed_point_profile() {
        let map = HorseshoeMap::default();
        let prof = nonuniformity(&map, Point::new(0.0, 0.0), [0.0, 1.0], 50).unwrap();
        assert_eq!(prof.c_x, 2.0);
        assert_eq!(prof.argmin, 1);
    }

    #[test]
    fn approach_points_lie_on_the_leaf_through_the_tangency() {
        let map = HorseshoeMap::default();
        for (j, p) in tangency_approach_points(&map, 6).iter().enumerate() {
            let d = 10f64.powi(-(j as i32 + 1));
            assert!((p.x - 0.72 - d).abs() < 1e-15);
            assert!((p.y - 16.0 * d * d).abs() < 1e-15);
            let v = unstable_vector(&map, *p, 50);
            // tangent of y = c(x - q)²: slope v1/v2 = 1/(2c(x - q))
            assert!((v[0] / v[1] - 1.0 / (32.0 * d)).abs() < 1e-6 / d);
            let w = unstable_vector(&map, *p, 40);
            assert!((v[0] - w[0]).abs() < 1e-10 && (v[1] - w[1]).abs() < 1e-10);
        }
    }
}
