//! The map Φ: region classification, branch formulas, derivatives and inverse branches.

use std::fmt;
use std::ops::Mul;

use serde::{Deserialize, Serialize};

use crate::params::{MapParams, Orientation, ParamErrors};

/// Slack used when deciding whether an inverse-branch candidate lies in its strip.
pub const PREIMAGE_SLACK: f64 = 1e-12;

/// Points of the tangency orbit closer to the origin than this are not tracked;
/// both halves of the orbit accumulate on the fixed point (0, 0).
const TANGENCY_ORBIT_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn in_square(&self) -> bool {
        (0.0..=1.0).contains(&self.x) && (0.0..=1.0).contains(&self.y)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Horizontal strip containing a point of the square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RegionId {
    R1,
    R3,
    R4,
    R5,
    /// R2 and the gap bands between strips.
    Escape,
    /// Off the unit square.
    OutsideQ,
}

impl RegionId {
    /// The four strips carrying a branch of the map.
    pub const BRANCHES: [RegionId; 4] = [RegionId::R1, RegionId::R3, RegionId::R4, RegionId::R5];

    pub fn is_branch(self) -> bool {
        matches!(
            self,
            RegionId::R1 | RegionId::R3 | RegionId::R4 | RegionId::R5
        )
    }

    pub fn is_linear(self) -> bool {
        matches!(self, RegionId::R1 | RegionId::R3 | RegionId::R5)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            RegionId::R1 => "1",
            RegionId::R3 => "3",
            RegionId::R4 => "4",
            RegionId::R5 => "5",
            RegionId::Escape => "E",
            RegionId::OutsideQ => "O",
        }
    }
}

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegionId::Escape => f.write_str("Escape"),
            RegionId::OutsideQ => f.write_str("OutsideQ"),
            r => write!(f, "R{}", r.symbol()),
        }
    }
}

/// A 2x2 matrix stored row-major: `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jacobian(pub [[f64; 2]; 2]);

impl Jacobian {
    pub const IDENTITY: Jacobian = Jacobian([[1.0, 0.0], [0.0, 1.0]]);

    pub fn diag(a: f64, d: f64) -> Self {
        Jacobian([[a, 0.0], [0.0, d]])
    }

    pub fn det(&self) -> f64 {
        let [[a, b], [c, d]] = self.0;
        a * d - b * c
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        let [[a, b], [c, d]] = self.0;
        [a * v[0] + b * v[1], c * v[0] + d * v[1]]
    }

    pub fn inverse(&self) -> Option<Jacobian> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let [[a, b], [c, d]] = self.0;
        Some(Jacobian([[d / det, -b / det], [-c / det, a / det]]))
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, s: f64) -> Jacobian {
        let [[a, b], [c, d]] = self.0;
        Jacobian([[a * s, b * s], [c * s, d * s]])
    }

    /// Eigenvalues when real, ordered by increasing modulus.
    pub fn real_eigenvalues(&self) -> Option<(f64, f64)> {
        real_roots(self.trace(), self.det())
    }
}

/// Real roots of `z² - tr z + det`, ordered by increasing modulus.
pub fn real_roots(tr: f64, det: f64) -> Option<(f64, f64)> {
    let disc = tr * tr / 4.0 - det;
    if disc < 0.0 {
        return None;
    }
    // the larger root first, the smaller from the determinant to avoid cancellation
    let big = tr / 2.0 + tr.signum() * disc.sqrt();
    if big == 0.0 {
        return Some((0.0, 0.0));
    }
    Some((det / big, big))
}

impl Mul for Jacobian {
    type Output = Jacobian;

    fn mul(self, rhs: Jacobian) -> Jacobian {
        let a = self.0;
        let b = rhs.0;
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Jacobian(out)
    }
}

pub fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MapError {
    #[error("point {point} lies in {region}, where the map is not defined")]
    NotInDomain { point: Point, region: RegionId },
    #[error("point {0} has no preimage in any strip")]
    NoPreimage(Point),
    #[error("point {point} has preimages in both {first} and {second}")]
    AmbiguousPreimage {
        point: Point,
        first: RegionId,
        second: RegionId,
    },
    #[error(transparent)]
    InvalidParams(#[from] ParamErrors),
}

/// The horseshoe map for one parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorseshoeMap {
    params: MapParams,
    y_c: f64,
}

impl Default for HorseshoeMap {
    fn default() -> Self {
        HorseshoeMap::unchecked(MapParams::default())
    }
}

impl HorseshoeMap {
    pub fn new(params: MapParams) -> Result<Self, MapError> {
        Ok(Self::unchecked(params.validate()?))
    }

    /// Builds the map without checking the parameter invariants.
    pub fn unchecked(params: MapParams) -> Self {
        HorseshoeMap {
            params,
            y_c: params.y_center(),
        }
    }

    pub fn params(&self) -> &MapParams {
        &self.params
    }

    pub fn y_c(&self) -> f64 {
        self.y_c
    }

    /// The tangency point `(q, 0)`.
    pub fn tangency(&self) -> Point {
        Point::new(self.params.q, 0.0)
    }

    pub fn region_of(&self, p: Point) -> RegionId {
        if !p.in_square() {
            return RegionId::OutsideQ;
        }
        let pr = &self.params;
        if pr.r1().contains(p.y) {
            RegionId::R1
        } else if pr.r3().contains(p.y) {
            RegionId::R3
        } else if pr.r4().contains(p.y) {
            RegionId::R4
        } else if pr.r5().contains(p.y) {
            RegionId::R5
        } else {
            RegionId::Escape
        }
    }

    pub fn step(&self, p: Point) -> Result<Point, MapError> {
        let region = self.domain(p)?;
        Ok(self.step_with(region, p))
    }

    pub fn jacobian(&self, p: Point) -> Result<Jacobian, MapError> {
        let region = self.domain(p)?;
        Ok(self.jacobian_with(region, p))
    }

    fn domain(&self, p: Point) -> Result<RegionId, MapError> {
        let region = self.region_of(p);
        if region.is_branch() {
            Ok(region)
        } else {
            Err(MapError::NotInDomain { point: p, region })
        }
    }

    /// Evaluates the formula of `branch` at `p`, wherever `p` is.
    pub fn step_with(&self, branch: RegionId, p: Point) -> Point {
        let pr = &self.params;
        match branch {
            RegionId::R1 => Point::new(pr.lambda * p.x, pr.sigma * p.y),
            RegionId::R3 => Point::new(pr.lambda * p.x + pr.d3, pr.sigma * (p.y - pr.y3)),
            RegionId::R4 => {
                let s = p.y - self.y_c;
                Point::new(
                    pr.q + pr.alpha * s,
                    pr.c * pr.alpha * pr.alpha * s * s - pr.lambda * p.x,
                )
            }
            RegionId::R5 => match pr.r5_orientation {
                Orientation::Preserving => Point::new(
                    pr.lambda * p.x + 1.0 - pr.lambda,
                    pr.sigma * p.y - (pr.sigma - 1.0),
                ),
                Orientation::Reversing => Point::new(1.0 - pr.lambda * p.x, pr.sigma * (1.0 - p.y)),
            },
            RegionId::Escape | RegionId::OutsideQ => Point::new(f64::NAN, f64::NAN),
        }
    }

    /// Derivative of the formula of `branch` at `p`.
    pub fn jacobian_with(&self, branch: RegionId, p: Point) -> Jacobian {
        let pr = &self.params;
        match branch {
            RegionId::R1 | RegionId::R3 => Jacobian::diag(pr.lambda, pr.sigma),
            RegionId::R5 => match pr.r5_orientation {
                Orientation::Preserving => Jacobian::diag(pr.lambda, pr.sigma),
                Orientation::Reversing => Jacobian::diag(-pr.lambda, -pr.sigma),
            },
            RegionId::R4 => Jacobian([
                [0.0, pr.alpha],
                [
                    -pr.lambda,
                    2.0 * pr.c * pr.alpha * pr.alpha * (p.y - self.y_c),
                ],
            ]),
            RegionId::Escape | RegionId::OutsideQ => Jacobian([[f64::NAN; 2]; 2]),
        }
    }

    /// Inverse of the formula of `branch`, without any domain check.
    pub fn inverse_with(&self, branch: RegionId, p: Point) -> Point {
        let pr = &self.params;
        match branch {
            RegionId::R1 => Point::new(p.x / pr.lambda, p.y / pr.sigma),
            RegionId::R3 => Point::new((p.x - pr.d3) / pr.lambda, p.y / pr.sigma + pr.y3),
            RegionId::R4 => self.fold_preimage(p),
            RegionId::R5 => match pr.r5_orientation {
                Orientation::Preserving => Point::new(
                    (p.x - (1.0 - pr.lambda)) / pr.lambda,
                    (p.y + pr.sigma - 1.0) / pr.sigma,
                ),
                Orientation::Reversing => Point::new((1.0 - p.x) / pr.lambda, 1.0 - p.y / pr.sigma),
            },
            RegionId::Escape | RegionId::OutsideQ => Point::new(f64::NAN, f64::NAN),
        }
    }

    /// Preimage under the fold formula: `y = y_c + (x' - q)/α`, `x = (c(x' - q)² - y')/λ`.
    pub fn fold_preimage(&self, p: Point) -> Point {
        let pr = &self.params;
        let u = p.x - pr.q;
        Point::new((pr.c * u * u - p.y) / pr.lambda, self.y_c + u / pr.alpha)
    }

    /// Whether `p` lies (up to [`PREIMAGE_SLACK`]) in the strip of `branch`.
    pub fn in_branch(&self, branch: RegionId, p: Point) -> bool {
        let s = PREIMAGE_SLACK;
        let strip = match branch {
            RegionId::R1 => self.params.r1(),
            RegionId::R3 => self.params.r3(),
            RegionId::R4 => self.params.r4(),
            RegionId::R5 => self.params.r5(),
            _ => return false,
        };
        p.x >= -s && p.x <= 1.0 + s && p.y >= strip.lo - s && p.y <= strip.hi + s
    }

    /// All strips whose image contains `p`, with the corresponding preimages.
    pub fn preimages(&self, p: Point) -> Vec<(RegionId, Point)> {
        RegionId::BRANCHES
            .iter()
            .map(|&b| (b, self.inverse_with(b, p)))
            .filter(|&(b, pre)| self.in_branch(b, pre))
            .collect()
    }

    /// The unique preimage of `p`.
    pub fn step_back(&self, p: Point) -> Result<Point, MapError> {
        self.step_back_branch(p).map(|(_, pre)| pre)
    }

    /// The unique preimage of `p` and the strip it lies in.
    pub fn step_back_branch(&self, p: Point) -> Result<(RegionId, Point), MapError> {
        let found = self.preimages(p);
        match found.as_slice() {
            [] => Err(MapError::NoPreimage(p)),
            [one] => Ok(*one),
            [a, b, ..] => Err(MapError::AmbiguousPreimage {
                point: p,
                first: a.0,
                second: b.0,
            }),
        }
    }

    /// Points of the orbit of `(q, 0)`: forward `(λʲq, 0)` and backward `(0, y_c/σʲ)`.
    pub fn tangency_orbit(&self) -> Vec<Point> {
        let pr = &self.params;
        let mut pts = Vec::new();
        let mut x = pr.q;
        while x >= TANGENCY_ORBIT_FLOOR {
            pts.push(Point::new(x, 0.0));
            x *= pr.lambda;
        }
        let mut y = self.y_c;
        while y >= TANGENCY_ORBIT_FLOOR {
            pts.push(Point::new(0.0, y));
            y /= pr.sigma;
        }
        pts
    }

    pub fn is_on_tangency_orbit(&self, p: Point, tol: f64) -> bool {
        self.tangency_orbit().iter().any(|t| t.dist(&p) <= tol)
    }
}
