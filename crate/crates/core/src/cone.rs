//! Slope-interval cones, the L/R/V classification and the invariant cone field.
//!
//! A cone is an interval `[u_lo, u_hi]` of slopes `u = v1/v2`; every cone used here
//! excludes the horizontal direction, so the chart is global. The derivative acts on
//! slopes by the Möbius map `u ↦ (J11 u + J12)/(J21 u + J22)`.

use std::f64::consts::FRAC_PI_2;
use std::f64::consts::FRAC_PI_3;

use serde::Serialize;

use crate::map::{HorseshoeMap, Jacobian, MapError, Point, RegionId};
use crate::orbit::{first_return, OrbitError, ReturnRecord};
use crate::params::MapParams;

pub const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Relative widening applied to each slope bound when a cone is carried to an L-point.
pub const WIDENING: f64 = 0.01;

/// Backward and forward search depth when extending the field to L-points.
pub const EXTENSION_HORIZON: usize = 1000;

/// Distance below which a point counts as lying on the tangency orbit.
pub const TANGENCY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cone {
    pub u_lo: f64,
    pub u_hi: f64,
}

impl Cone {
    pub fn new(u_lo: f64, u_hi: f64) -> Self {
        debug_assert!(u_lo <= u_hi, "inverted cone [{u_lo}, {u_hi}]");
        Cone { u_lo, u_hi }
    }

    /// `|v1|/|v2| ≤ √3`.
    pub fn standard() -> Self {
        Cone::new(-SQRT_3, SQRT_3)
    }

    pub fn symmetric(w: f64) -> Self {
        Cone::new(-w, w)
    }

    pub fn width(&self) -> f64 {
        self.u_hi - self.u_lo
    }

    /// Slope of the middle direction.
    pub fn axis(&self) -> f64 {
        0.5 * (self.u_lo + self.u_hi)
    }

    /// Largest `|u|` in the cone.
    pub fn max_abs(&self) -> f64 {
        self.u_lo.abs().max(self.u_hi.abs())
    }

    pub fn contains_slope(&self, u: f64) -> bool {
        self.u_lo <= u && u <= self.u_hi
    }

    pub fn contains(&self, v: [f64; 2]) -> bool {
        v[1] != 0.0 && self.contains_slope(v[0] / v[1])
    }

    /// Margin of `self` inside `target`; positive iff strictly inside.
    pub fn margin_in(&self, target: &Cone) -> f64 {
        (target.u_hi - self.u_hi).min(self.u_lo - target.u_lo)
    }

    pub fn widen(&self, rel: f64) -> Cone {
        Cone::new(
            self.u_lo - rel * self.u_lo.abs(),
            self.u_hi + rel * self.u_hi.abs(),
        )
    }

    pub fn intersect(&self, other: &Cone) -> Option<Cone> {
        let lo = self.u_lo.max(other.u_lo);
        let hi = self.u_hi.min(other.u_hi);
        (lo <= hi).then(|| Cone::new(lo, hi))
    }

    /// Unit vector with slope `u`, oriented with positive second component.
    pub fn direction(u: f64) -> [f64; 2] {
        let n = u.hypot(1.0);
        [u / n, 1.0 / n]
    }

    /// `k ≥ 2` directions spread evenly from `u_lo` to `u_hi`.
    pub fn directions(&self, k: usize) -> Vec<[f64; 2]> {
        let k = k.max(2);
        (0..k)
            .map(|i| {
                let t = i as f64 / (k - 1) as f64;
                Cone::direction(self.u_lo + t * (self.u_hi - self.u_lo))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConeError {
    #[error("the derivative sends a direction of the cone to the horizontal")]
    HorizontalCapture,
    #[error("the angle is undefined at the tangency point")]
    TangencyPoint,
    #[error("the cone field is undefined on the tangency orbit (near {0})")]
    TangencyOrbit(Point),
    #[error("point {0} is not in the image of the fold")]
    NotInFoldImage(Point),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
}

/// Slope image `(J11 u + J12)/(J21 u + J22)`.
pub fn mobius(j: &Jacobian, u: f64) -> f64 {
    let [[a, b], [c, d]] = j.0;
    (a * u + b) / (c * u + d)
}

/// Exact image of a cone under a linear map.
pub fn transport(cone: &Cone, j: &Jacobian) -> Result<Cone, ConeError> {
    let [_, [c, d]] = j.0;
    let den_lo = c * cone.u_lo + d;
    let den_hi = c * cone.u_hi + d;
    if den_lo == 0.0 || den_hi == 0.0 || (den_lo > 0.0) != (den_hi > 0.0) {
        return Err(ConeError::HorizontalCapture);
    }
    let a = mobius(j, cone.u_lo);
    let b = mobius(j, cone.u_hi);
    Ok(Cone::new(a.min(b), a.max(b)))
}

/// Slopes of `domain` whose image under `j` lies in `target`.
///
/// When the preimage has two components the one containing (or nearest to) the
/// vertical is returned.
pub fn pullback_within(domain: &Cone, j: &Jacobian, target: &Cone) -> Option<Cone> {
    let inv = j.inverse()?;
    let [_, [c, d]] = j.0;
    let mut pieces = vec![*domain];
    if c != 0.0 {
        let pole = -d / c;
        if domain.u_lo < pole && pole < domain.u_hi {
            let eps = 1e-15 * pole.abs().max(1.0);
            pieces = vec![
                Cone::new(domain.u_lo, pole - eps),
                Cone::new(pole + eps, domain.u_hi),
            ];
        }
    }
    let comps: Vec<Cone> = pieces
        .iter()
        .filter_map(|piece| {
            let img = transport(piece, j).ok()?;
            let hit = img.intersect(target)?;
            let back = transport(&hit, &inv).ok()?;
            back.intersect(piece)
        })
        .collect();
    comps.into_iter().min_by(|a, b| {
        let da = if a.contains_slope(0.0) {
            0.0
        } else {
            a.u_lo.abs().min(a.u_hi.abs())
        };
        let db = if b.contains_slope(0.0) {
            0.0
        } else {
            b.u_lo.abs().min(b.u_hi.abs())
        };
        da.total_cmp(&db)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum LrvClass {
    L,
    R,
    V,
}

impl LrvClass {
    pub fn from_angle(a: f64) -> Self {
        if a >= FRAC_PI_2 {
            LrvClass::L
        } else if a > FRAC_PI_3 {
            LrvClass::R
        } else {
            LrvClass::V
        }
    }

    pub fn is_returning(self) -> bool {
        matches!(self, LrvClass::R | LrvClass::V)
    }
}

/// `η + λξ₋₁` for a fold-image point with known preimage abscissa.
pub fn fold_depth(params: &MapParams, p: Point, pre_x: f64) -> f64 {
    p.y + params.lambda * pre_x
}

/// Half-width `3/(2√(c s))` of the V-cone at depth `s = η + λξ₋₁`.
pub fn v_cone_width(params: &MapParams, s: f64) -> f64 {
    3.0 / (2.0 * (params.c * s).sqrt())
}

/// Angle between the leaf through a fold-image point and the horizontal.
pub fn fold_angle(params: &MapParams, p: Point, pre_x: f64) -> Result<f64, ConeError> {
    let s = fold_depth(params, p, pre_x);
    if s <= 0.0 {
        return Err(ConeError::TangencyPoint);
    }
    Ok((2.0 * (params.c * s).sqrt()).atan())
}

/// Class and angle of `p = Φ(pre)` where `pre` lies in `branch`.
pub fn classify_image(
    params: &MapParams,
    branch: RegionId,
    pre: Point,
    p: Point,
) -> Result<(LrvClass, f64), ConeError> {
    if branch == RegionId::R4 {
        let a = fold_angle(params, p, pre.x)?;
        Ok((LrvClass::from_angle(a), a))
    } else {
        Ok((LrvClass::L, FRAC_PI_2))
    }
}

/// Cone at a fold-image point: standard on R, `[-w, w]` on V.
pub fn returning_cone(params: &MapParams, pre: Point, p: Point) -> Result<Cone, ConeError> {
    let (class, _) = classify_image(params, RegionId::R4, pre, p)?;
    Ok(match class {
        LrvClass::V => Cone::symmetric(v_cone_width(params, fold_depth(params, p, pre.x))),
        _ => Cone::standard(),
    })
}

/// Angle `a(p)`; the preimage branch is found with `step_back`.
pub fn angle_a(map: &HorseshoeMap, p: Point) -> Result<f64, ConeError> {
    if p.dist(&map.tangency()) <= TANGENCY_TOL {
        return Err(ConeError::TangencyPoint);
    }
    let (branch, pre) = map.step_back_branch(p)?;
    Ok(classify_image(map.params(), branch, pre, p)?.1)
}

pub fn lrv_class(map: &HorseshoeMap, p: Point) -> Result<LrvClass, ConeError> {
    angle_a(map, p).map(LrvClass::from_angle)
}

/// Carries a cone one step forward and widens it.
pub fn carry(cone: &Cone, j: &Jacobian) -> Result<Cone, ConeError> {
    Ok(transport(cone, j)?.widen(WIDENING))
}

/// The cone field at `p`.
///
/// Fold-image points get their R/V cone. Other points are traced backward to the last
/// fold-image point and receive its cone carried forward with widening at every step.
/// If the backward orbit leaves the strips, the standard cone is cut down to the pullback
/// of the next fold-image cone ahead, or kept whole when the orbit never reaches one.
pub fn cone_at(map: &HorseshoeMap, p: Point) -> Result<Cone, ConeError> {
    if map.is_on_tangency_orbit(p, TANGENCY_TOL) {
        return Err(ConeError::TangencyOrbit(p));
    }
    let params = map.params();
    let mut chain: Vec<(RegionId, Point)> = Vec::new();
    let mut cur = p;
    for _ in 0..EXTENSION_HORIZON {
        match map.step_back_branch(cur) {
            Ok((RegionId::R4, pre)) => {
                let mut cone = returning_cone(params, pre, cur)?;
                for &(branch, q) in chain.iter().rev() {
                    cone = carry(&cone, &map.jacobian_with(branch, q))?;
                }
                return Ok(cone);
            }
            Ok((branch, pre)) => {
                chain.push((branch, pre));
                cur = pre;
            }
            Err(MapError::NoPreimage(_)) => return forward_cone(map, p),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(Cone::standard())
}

fn forward_cone(map: &HorseshoeMap, p: Point) -> Result<Cone, ConeError> {
    let mut cur = p;
    let mut prod = Jacobian::IDENTITY;
    for _ in 0..EXTENSION_HORIZON {
        let region = map.region_of(cur);
        if !region.is_branch() {
            break;
        }
        let next = map.step_with(region, cur);
        prod = map.jacobian_with(region, cur) * prod;
        if region == RegionId::R4 {
            if !next.in_square() {
                break;
            }
            let target = returning_cone(map.params(), cur, next)?;
            return pullback_within(&Cone::standard(), &prod, &target)
                .ok_or(ConeError::HorizontalCapture);
        }
        cur = next;
    }
    Ok(Cone::standard())
}

/// Cones along a periodic cycle whose branches are known.
///
/// `regions[i]` is the strip of `points[i]`, so `points[i + 1] = Φ(points[i])` uses that branch.
pub fn cones_on_cycle(
    map: &HorseshoeMap,
    points: &[Point],
    regions: &[RegionId],
) -> Result<Vec<Cone>, ConeError> {
    let k = points.len();
    assert_eq!(k, regions.len());
    let params = map.params();
    let Some(start) = (0..k).find(|&i| regions[(i + k - 1) % k] == RegionId::R4) else {
        return Ok(vec![Cone::standard(); k]);
    };
    let mut cones = vec![Cone::standard(); k];
    let mut prev = Cone::standard();
    for off in 0..k {
        let i = (start + off) % k;
        let before = (i + k - 1) % k;
        cones[i] = if regions[before] == RegionId::R4 {
            returning_cone(params, points[before], points[i])?
        } else {
            carry(&prev, &map.jacobian_with(regions[before], points[before]))?
        };
        prev = cones[i];
    }
    Ok(cones)
}

/// Outcome of transporting the cone at a fold-image point to its first return.
#[derive(Debug, Clone, Serialize)]
pub struct InclusionReport {
    pub record: ReturnRecord,
    pub start_class: LrvClass,
    pub end_class: LrvClass,
    pub start_cone: Cone,
    pub image_cone: Option<Cone>,
    pub target_cone: Cone,
    /// `-inf` when the image cone reaches the horizontal.
    pub margin: f64,
    pub pass: bool,
    /// `(log lhs, log rhs)` of the V-to-V return inequality, when both ends are V.
    pub v_to_v: Option<(f64, f64)>,
}

impl InclusionReport {
    pub fn v_to_v_pass(&self) -> Option<bool> {
        self.v_to_v.map(|(l, r)| l < r)
    }
}

/// Cone inclusion at the first return of `p`, which must lie in the fold image.
pub fn check_return_inclusion(
    map: &HorseshoeMap,
    p: Point,
    max_iter: usize,
) -> Result<InclusionReport, ConeError> {
    if map.is_on_tangency_orbit(p, TANGENCY_TOL) {
        return Err(ConeError::TangencyOrbit(p));
    }
    let record = first_return(map, p, max_iter)?;
    inclusion_for(map, record)
}

/// Cone inclusion for an already computed return.
pub fn inclusion_for(
    map: &HorseshoeMap,
    record: ReturnRecord,
) -> Result<InclusionReport, ConeError> {
    let params = map.params();
    let pre = Point::new(record.xi_before, 0.0);
    let (start_class, _) = classify_image(params, RegionId::R4, pre, record.start)?;
    let start_cone = returning_cone(params, pre, record.start)?;
    let end_pre = Point::new(record.xi_prev, 0.0);
    let (end_class, _) = classify_image(params, RegionId::R4, end_pre, record.end)?;
    let target_cone = returning_cone(params, end_pre, record.end)?;
    let image_cone = transport(&start_cone, &record.derivative).ok();
    let margin = image_cone.map_or(f64::NEG_INFINITY, |c| c.margin_in(&target_cone));
    let v_to_v = (start_class == LrvClass::V && end_class == LrvClass::V).then(|| {
        let n = record.n as f64;
        let lhs = n * (params.lambda.ln() - params.sigma.ln());
        let rhs = (4.0 * params.c / 9.0).ln()
            + 0.5 * fold_depth(params, record.end, record.xi_prev).ln()
            + 0.5 * fold_depth(params, record.start, record.xi_before).ln();
        (lhs, rhs)
    });
    Ok(InclusionReport {
        record,
        start_class,
        end_class,
        start_cone,
        image_cone,
        target_cone,
        margin,
        pass: margin > 0.0,
        v_to_v,
    })
}

/// `(lhs, rhs)` of `η^{1 - lnλ/lnσ} < 4cη/9`.
pub fn return_cone_sides(params: &MapParams, eta: f64) -> (f64, f64) {
    let e = 1.0 - params.lambda.ln() / params.sigma.ln();
    (eta.powf(e), 4.0 * params.c * eta / 9.0)
}

/// Log-spaced grid of `n` values from `1e-6` to `1` inclusive.
pub fn eta_grid(n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n)
        .map(|i| 10f64.powf(-6.0 + 6.0 * i as f64 / (n - 1) as f64))
        .collect()
}

/// Grid values of η where `η^{1 - lnλ/lnσ} < 4cη/9` fails.
pub fn return_cone_violations(params: &MapParams, grid: &[f64]) -> Vec<f64> {
    grid.iter()
        .copied()
        .filter(|&eta| {
            let (l, r) = return_cone_sides(params, eta);
            l >= r
        })
        .collect()
}

/// Why 9/4 is the smallest curvature for which the return-cone inequality holds on (0, 1].
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureCertificate {
    pub threshold: f64,
    /// `-lnλ/lnσ`; positive, so `η^e` increases on (0, 1].
    pub exponent: f64,
    /// `sup η^e` over (0, 1], attained at `η = 1`.
    pub sup: f64,
    /// Largest `η^e` found on the grid, for comparison with `sup`.
    pub grid_max: f64,
    pub grid_len: usize,
}

/// The inequality reads `η^e < 4c/9` after division by η, so it holds on all of
/// (0, 1] iff `c > 9/4 · sup η^e = 9/4`.
pub fn min_c_for_inclusion(params: &MapParams) -> CurvatureCertificate {
    let exponent = -params.lambda.ln() / params.sigma.ln();
    let grid = eta_grid(601);
    let grid_max = grid
        .iter()
        .map(|eta| eta.powf(exponent))
        .fold(0.0, f64::max);
    CurvatureCertificate {
        threshold: 9.0 / 4.0,
        exponent,
        sup: 1.0,
        grid_max,
        grid_len: grid.len(),
    }
}

/// Largest value of `arctan(tan a / 3) - a/2` on an `n`-point grid of (0, π/3).
pub fn half_angle_worst(n: usize) -> f64 {
    (1..=n)
        .map(|i| {
            let a = FRAC_PI_3 * i as f64 / (n + 1) as f64;
            (a.tan() / 3.0).atan() - a / 2.0
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fold_point(map: &HorseshoeMap, xi: f64, pre_x: f64) -> (Point, Point) {
        let p = map.params();
        let pre = Point::new(pre_x, map.y_c() + (xi - p.q) / p.alpha);
        (pre, map.step(pre).unwrap())
    }

    #[test]
    fn transport_examples() {
        let c = transport(&Cone::standard(), &Jacobian::diag(0.25, 4.0)).unwrap();
        assert!((c.u_hi - SQRT_3 / 16.0).abs() < 1e-16);
        assert!((c.u_lo + SQRT_3 / 16.0).abs() < 1e-16);

        let map = HorseshoeMap::default();
        let vertex = map.jacobian(Point::new(0.3, map.y_c())).unwrap();
        assert_eq!(
            transport(&Cone::new(0.0, 0.0), &vertex),
            Err(ConeError::HorizontalCapture)
        );

        let j = map.jacobian(Point::new(0.5, 0.78)).unwrap();
        let img = transport(&Cone::symmetric(0.1), &j).unwrap();
        // oracle: (J11 u + J12)/(J21 u + J22) evaluated by hand at u = ±0.1
        let f = |u: f64| 4.0 / (-0.25 * u + 20.48);
        assert!((img.u_lo - f(-0.1)).abs() < 1e-15);
        assert!((img.u_hi - f(0.1)).abs() < 1e-15);
    }

    #[test]
    fn angle_and_class_examples() {
        let map = HorseshoeMap::default();
        let (_, p) = fold_point(&map, 0.82, 0.1);
        assert!((angle_a(&map, p).unwrap() - 3.2f64.atan()).abs() < 1e-12);
        assert!((3.2f64.atan() - 1.2679).abs() < 1e-4);
        assert_eq!(lrv_class(&map, p).unwrap(), LrvClass::R);

        let (pre, p) = fold_point(&map, 0.77, 0.1);
        let a = classify_image(map.params(), RegionId::R4, pre, p)
            .unwrap()
            .1;
        assert!((a - 1.6f64.atan()).abs() < 1e-12);
        assert_eq!(LrvClass::from_angle(a), LrvClass::V);

        // image of R1 and of R3
        assert_eq!(lrv_class(&map, Point::new(0.1, 0.5)).unwrap(), LrvClass::L);
        assert_eq!(angle_a(&map, Point::new(0.1, 0.5)).unwrap(), FRAC_PI_2);
        assert_eq!(lrv_class(&map, Point::new(0.46, 0.5)).unwrap(), LrvClass::L);
        assert_eq!(
            angle_a(&map, Point::new(0.72, 0.0)),
            Err(ConeError::TangencyPoint)
        );
        assert_eq!(LrvClass::from_angle(FRAC_PI_3), LrvClass::V);
    }

    #[test]
    fn cone_examples() {
        let map = HorseshoeMap::default();
        let params = map.params();
        let (_, p) = fold_point(&map, 0.82, 0.1);
        assert_eq!(cone_at(&map, p).unwrap(), Cone::standard());
        assert_eq!(v_cone_width(params, 1.0 / params.c), 1.5);
        let (pre, p) = fold_point(&map, 0.77, 0.1);
        let cone = returning_cone(params, pre, p).unwrap();
        assert!((cone.u_hi - 1.875).abs() < 1e-12 && (cone.u_lo + 1.875).abs() < 1e-12);
        assert!(matches!(
            cone_at(&map, Point::new(0.18, 0.0)),
            Err(ConeError::TangencyOrbit(_))
        ));
    }

    #[test]
    fn l_points_carry_the_fold_cone() {
        let map = HorseshoeMap::default();
        let (pre, p) = fold_point(&map, 0.82, 0.1);
        assert!(map.step_back(p).unwrap().dist(&pre) < 1e-15);
        let img = map.step(p).unwrap();
        let expected = transport(&Cone::standard(), &map.jacobian(p).unwrap()).unwrap();
        let got = cone_at(&map, img).unwrap();
        assert!((got.u_hi - expected.u_hi * 1.01).abs() < 1e-15);
        assert!((got.u_lo - expected.u_lo * 1.01).abs() < 1e-15);
    }

    #[test]
    fn pullback_lands_in_target() {
        let j = Jacobian([[0.0, 4.0], [-0.25, 3.0]]) * Jacobian::diag(0.25, 4.0);
        let target = Cone::symmetric(2.0);
        let back = pullback_within(&Cone::standard(), &j, &target).unwrap();
        let img = transport(&back, &j).unwrap();
        assert!(img.margin_in(&target) > -1e-12);
        assert!(back.margin_in(&Cone::standard()) >= 0.0);
    }

    #[test]
    fn curvature_threshold() {
        let params = MapParams::default();
        let cert = min_c_for_inclusion(&params);
        assert_eq!(cert.threshold, 2.25);
        assert_eq!(cert.grid_max, 1.0);
        let grid = eta_grid(601);
        assert_eq!(grid[grid.len() - 1], 1.0);
        let low = MapParams { c: 2.24, ..params };
        let bad = return_cone_violations(&low, &grid);
        assert!(bad.contains(&1.0));
        assert!(bad.iter().all(|&eta| eta > 0.99));
        let high = MapParams { c: 2.26, ..params };
        assert!(return_cone_violations(&high, &grid).is_empty());
        let one = MapParams { c: 1.0, ..params };
        assert!(!return_cone_violations(&one, &grid).is_empty());
    }

    #[test]
    fn half_angle() {
        assert!(half_angle_worst(1000) < 0.0);
    }

    #[test]
    fn cycle_cones_without_fold_are_standard() {
        let map = HorseshoeMap::default();
        let pts = [Point::new(0.48, 1.6 / 15.0), Point::new(0.12, 6.4 / 15.0)];
        let cones = cones_on_cycle(&map, &pts, &[RegionId::R1, RegionId::R3]).unwrap();
        assert_eq!(cones, vec![Cone::standard(); 2]);
    }
}
