//! First returns to the fold image, the neighbourhoods W and W̃, and excursion growth.

use serde::Serialize;

use crate::cone::Cone;
use crate::lyapunov::sigma1;
use crate::map::{norm, HorseshoeMap, Jacobian, Point, RegionId};
use crate::params::MapParams;

/// Relative slack for strict inequalities.
pub const STRICT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OrbitError {
    #[error("{0} is not in the fold image")]
    NotReturnSet(Point),
    #[error("orbit left the strips after {step} steps at {point} ({region})")]
    Escaped {
        step: usize,
        point: Point,
        region: RegionId,
    },
    #[error("no return within {0} steps")]
    Budget(usize),
    #[error("{0} lies on the local stable manifold and never leaves W")]
    OnStableManifold(Point),
    #[error("{0} is not in W")]
    NotInW(Point),
    #[error("direction {v:?} is outside the cone {cone:?}")]
    ConeViolation { v: [f64; 2], cone: Cone },
    #[error("{0} lies in W̃")]
    InWTilde(Point),
}

/// One first return `P -> P_n` from the fold image to itself.
#[derive(Debug, Clone, Serialize)]
pub struct ReturnRecord {
    pub start: Point,
    /// `ξ₋₁`, abscissa of the fold preimage of `start`.
    pub xi_before: f64,
    pub n: usize,
    pub end: Point,
    /// `ξ_{n-1}`, abscissa of the last point before the return.
    pub xi_prev: f64,
    pub eta: f64,
    /// `DΦⁿ(P)`.
    pub derivative: Jacobian,
    /// `max{ln(1/η)/ln σ, ln(1/ξ_{n-1})/ln(1/λ)}`.
    pub return_time_bound: f64,
    pub return_time_pass: bool,
    /// `(log lhs, log rhs)` of `λⁿ/σⁿ < η^{1 - lnλ/lnσ}`.
    pub contraction: (f64, f64),
    /// `log rhs` with the exponent ratio inverted, `(λξ_{n-1})^{1 - lnσ/lnλ}`.
    pub xi_bound_inverted: f64,
    /// `log rhs` with `(λξ_{n-1})^{1 - lnλ/lnσ}` as used in the cone argument.
    pub xi_bound: f64,
    /// `log rhs` with `ξ_{n-1}^{1 - lnλ/lnσ}`.
    pub xi_bound_unscaled: f64,
}

impl ReturnRecord {
    pub fn contraction_pass(&self) -> bool {
        self.contraction.0 < self.contraction.1
    }

    /// `log(λⁿ/σⁿ)`.
    pub fn log_ratio(&self) -> f64 {
        self.contraction.0
    }
}

/// Follows `p` (a point of the fold image) until the next step out of R4.
pub fn first_return(
    map: &HorseshoeMap,
    p: Point,
    max_iter: usize,
) -> Result<ReturnRecord, OrbitError> {
    let params = map.params();
    let pre = map.fold_preimage(p);
    if !map.in_branch(RegionId::R4, pre) {
        return Err(OrbitError::NotReturnSet(p));
    }
    if !p.in_square() {
        return Err(OrbitError::Escaped {
            step: 0,
            point: p,
            region: RegionId::OutsideQ,
        });
    }
    let mut cur = p;
    let mut prod = Jacobian::IDENTITY;
    for step in 1..=max_iter {
        let region = map.region_of(cur);
        if !region.is_branch() {
            return Err(OrbitError::Escaped {
                step: step - 1,
                point: cur,
                region,
            });
        }
        prod = map.jacobian_with(region, cur) * prod;
        let next = map.step_with(region, cur);
        if region == RegionId::R4 {
            if !next.in_square() {
                return Err(OrbitError::Escaped {
                    step,
                    point: next,
                    region: RegionId::OutsideQ,
                });
            }
            return Ok(make_record(params, p, pre.x, step, next, cur.x, prod));
        }
        cur = next;
    }
    Err(OrbitError::Budget(max_iter))
}

fn make_record(
    params: &MapParams,
    start: Point,
    xi_before: f64,
    n: usize,
    end: Point,
    xi_prev: f64,
    derivative: Jacobian,
) -> ReturnRecord {
    let (ll, ls) = (params.lambda.ln(), params.sigma.ln());
    let eta = start.y;
    let return_time_bound = ((1.0 / eta).ln() / ls).max((1.0 / xi_prev).ln() / (-ll));
    let nf = n as f64;
    let log_ratio = nf * (ll - ls);
    let e_proof = 1.0 - ll / ls;
    let e_inverted = 1.0 - ls / ll;
    ReturnRecord {
        start,
        xi_before,
        n,
        end,
        xi_prev,
        eta,
        derivative,
        return_time_bound,
        return_time_pass: nf >= return_time_bound,
        contraction: (log_ratio, e_proof * eta.ln()),
        xi_bound_inverted: e_inverted * (params.lambda * xi_prev).ln(),
        xi_bound: e_proof * (params.lambda * xi_prev).ln(),
        xi_bound_unscaled: e_proof * xi_prev.ln(),
    }
}

pub fn in_w(params: &MapParams, p: Point) -> bool {
    let dx = p.x - params.q;
    dx * dx + p.y * p.y < params.w_radius() * params.w_radius()
}

/// Smallest `j ≤ j_max` with `p ∈ W_j`, the component of `Φʲ(W) ∩ R1` around `Φʲ(q, 0)`.
pub fn w_tilde_index(params: &MapParams, p: Point, j_max: usize) -> Option<usize> {
    if p.x < 0.0 || p.y < 0.0 || p.y > params.r1().hi {
        return None;
    }
    let (mut x, mut y) = (p.x, p.y);
    for j in 0..=j_max {
        if x > 1.0 {
            return None;
        }
        if in_w(params, Point::new(x, y)) {
            return Some(j);
        }
        x /= params.lambda;
        y /= params.sigma;
    }
    None
}

pub fn in_w_tilde(params: &MapParams, p: Point, j_max: usize) -> bool {
    w_tilde_index(params, p, j_max).is_some()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EscapeTime {
    pub n: usize,
    /// `-log(3η)/log σ`.
    pub bound: f64,
    pub pass: bool,
}

/// First `n` with `σⁿη > 1/3`, the exit time from `[0,1] × [0,1/3]`.
pub fn escape_time(params: &MapParams, p: Point) -> Result<EscapeTime, OrbitError> {
    if !in_w(params, p) {
        return Err(OrbitError::NotInW(p));
    }
    if p.y <= 0.0 {
        return Err(OrbitError::OnStableManifold(p));
    }
    let mut y = p.y;
    let mut n = 0;
    while y <= 1.0 / 3.0 {
        y *= params.sigma;
        n += 1;
    }
    let bound = -(3.0 * p.y).ln() / params.sigma.ln();
    Ok(EscapeTime {
        n,
        bound,
        pass: n as f64 >= bound,
    })
}

/// The widest cone a W-point can carry: `|v1|/|v2| ≤ 3/(2√(cη))`.
pub fn excursion_cone(params: &MapParams, eta: f64) -> Cone {
    Cone::symmetric(3.0 / (2.0 * (params.c * eta).sqrt()))
}

#[derive(Debug, Clone, Serialize)]
pub struct ExcursionRecord {
    pub start: Point,
    pub escape: EscapeTime,
    pub v: [f64; 2],
    /// `‖vⁿ‖/(σⁿ|v2|)`, at least 1.
    pub vertical_ratio: f64,
    /// `(‖vⁿ‖/‖v‖)/σ^{n/2}`, at least 1.
    pub growth_ratio: f64,
    /// First iterate of the excursion lying above R1, in the band `(1/σ, 1/3]`.
    pub left_r1_at: Option<usize>,
}

impl ExcursionRecord {
    pub fn vertical_pass(&self) -> bool {
        self.vertical_ratio >= 1.0 - STRICT_SLACK
    }

    pub fn growth_pass(&self) -> bool {
        self.growth_ratio >= 1.0 - STRICT_SLACK
    }
}

/// Pushes `v` along the excursion of `p` out of `[0,1] × [0,1/3]`.
///
/// The linear R1 branch is applied for the whole excursion, including a last iterate
/// that may sit in the band between R1 and 1/3; that iterate is reported.
pub fn excursion_growth(
    map: &HorseshoeMap,
    p: Point,
    v: [f64; 2],
) -> Result<ExcursionRecord, OrbitError> {
    let params = map.params();
    let escape = escape_time(params, p)?;
    let cone = excursion_cone(params, p.y);
    if !cone.widen(STRICT_SLACK).contains(v) {
        return Err(OrbitError::ConeViolation { v, cone });
    }
    let mut cur = p;
    let mut w = v;
    let mut left_r1_at = None;
    for step in 0..escape.n {
        if left_r1_at.is_none() && map.region_of(cur) != RegionId::R1 {
            left_r1_at = Some(step);
        }
        w = map.jacobian_with(RegionId::R1, cur).apply(w);
        cur = map.step_with(RegionId::R1, cur);
    }
    let n = escape.n as f64;
    let vn = norm(w);
    Ok(ExcursionRecord {
        start: p,
        escape,
        v,
        vertical_ratio: vn / (params.sigma.powf(n) * v[1].abs()),
        growth_ratio: vn / norm(v) / params.sigma.powf(n / 2.0),
        left_r1_at,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepGrowth {
    pub ratio: f64,
    pub sigma1: f64,
    pub pass: bool,
}

/// `‖DΦ_P v‖/‖v‖` at a point outside W̃, compared with σ₁.
pub fn step_growth_outside(
    map: &HorseshoeMap,
    p: Point,
    v: [f64; 2],
    cone: &Cone,
    j_max: usize,
) -> Result<StepGrowth, OrbitError> {
    let params = map.params();
    if in_w_tilde(params, p, j_max) {
        return Err(OrbitError::InWTilde(p));
    }
    if !cone.widen(STRICT_SLACK).contains(v) {
        return Err(OrbitError::ConeViolation { v, cone: *cone });
    }
    let region = map.region_of(p);
    if !region.is_branch() {
        return Err(OrbitError::Escaped {
            step: 0,
            point: p,
            region,
        });
    }
    let j = map.jacobian_with(region, p);
    let ratio = norm(j.apply(v)) / norm(v);
    let s1 = sigma1(params);
    Ok(StepGrowth {
        ratio,
        sigma1: s1,
        pass: ratio > s1 * (1.0 - STRICT_SLACK),
    })
}
