//! Symbolic itineraries, periodic-orbit solvers and the uniform-hyperbolicity certificate.
//!
//! Each R4 symbol is resolved into the arm of the fold it uses (below or above the
//! vertex height `y_c`). For a fixed arm pattern the orbit is the unique fixed point of a
//! contraction: abscissas are pushed forward (the map contracts them) and ordinates are
//! pulled backward through the inverse branches (which contract them). A Gauss-Seidel
//! sweep of this pair converges in a few dozen passes; a multiple-shooting Newton step
//! polishes the rare slow cases.

use std::cmp::Ordering;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::map::{real_roots, HorseshoeMap, Jacobian, Point, RegionId};
use crate::params::Orientation;

/// Residual below which an orbit is accepted.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Distance kept from strip edges that border a gap, and from the fold vertex.
pub const REGION_MARGIN: f64 = 1e-9;

const GS_MAX_SWEEPS: usize = 300;
const GS_TOL: f64 = 1e-15;
const POLISH_ABOVE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Arm {
    /// `y < y_c`: image abscissa left of `q`.
    Left,
    /// `y > y_c`: image abscissa right of `q`.
    Right,
}

/// A symbol of the arm-resolved alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Sym {
    R1,
    R3,
    R4(Arm),
    R5,
}

impl Sym {
    pub const ALL: [Sym; 5] = [
        Sym::R1,
        Sym::R3,
        Sym::R4(Arm::Left),
        Sym::R4(Arm::Right),
        Sym::R5,
    ];

    pub fn region(self) -> RegionId {
        match self {
            Sym::R1 => RegionId::R1,
            Sym::R3 => RegionId::R3,
            Sym::R4(_) => RegionId::R4,
            Sym::R5 => RegionId::R5,
        }
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sym::R1 => f.write_str("1"),
            Sym::R3 => f.write_str("3"),
            Sym::R4(Arm::Left) => f.write_str("4L"),
            Sym::R4(Arm::Right) => f.write_str("4R"),
            Sym::R5 => f.write_str("5"),
        }
    }
}

pub fn word_label(word: &[Sym]) -> String {
    word.iter().map(|s| s.to_string()).collect()
}

fn region_index(r: RegionId) -> usize {
    match r {
        RegionId::R1 => 0,
        RegionId::R3 => 1,
        RegionId::R4 => 2,
        RegionId::R5 => 3,
        _ => panic!("{r} carries no branch"),
    }
}

/// Which strip can follow which.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TransitionTable {
    pub allowed: [[bool; 4]; 4],
}

impl TransitionTable {
    /// Entry `(A, B)` holds iff the y-range of `Φ(A)` overlaps `B` with positive length.
    pub fn new(map: &HorseshoeMap) -> Self {
        let p = map.params();
        let h = (p.y4b - p.y4a) / 2.0;
        let fold_top = (p.c * p.alpha * p.alpha * h * h).max(0.0);
        let ranges = [
            (0.0, p.sigma * p.r1().hi),
            (0.0, p.sigma * (p.r3().hi - p.y3)),
            (-p.lambda, fold_top),
            match p.r5_orientation {
                Orientation::Preserving => (p.sigma * p.r5().lo - (p.sigma - 1.0), 1.0),
                Orientation::Reversing => (0.0, p.sigma * (1.0 - p.r5().lo)),
            },
        ];
        let strips = [p.r1(), p.r3(), p.r4(), p.r5()];
        let mut allowed = [[false; 4]; 4];
        for (a, &(lo, hi)) in ranges.iter().enumerate() {
            for (b, strip) in strips.iter().enumerate() {
                allowed[a][b] = strip.overlap(lo, hi) > 0.0;
            }
        }
        TransitionTable { allowed }
    }

    pub fn admissible(&self, a: RegionId, b: RegionId) -> bool {
        self.allowed[region_index(a)][region_index(b)]
    }

    pub fn sym_admissible(&self, a: Sym, b: Sym) -> bool {
        self.admissible(a.region(), b.region())
    }
}

/// A cyclic word over the strips, stored as its least rotation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Itinerary(pub Vec<RegionId>);

impl Itinerary {
    pub fn period(&self) -> usize {
        self.0.len()
    }

    pub fn is_admissible(&self, table: &TransitionTable) -> bool {
        let k = self.0.len();
        k > 0 && (0..k).all(|i| table.admissible(self.0[i], self.0[(i + 1) % k]))
    }

    pub fn fold_count(&self) -> usize {
        self.0.iter().filter(|&&r| r == RegionId::R4).count()
    }

    pub fn label(&self) -> String {
        self.0.iter().map(|r| r.symbol()).collect()
    }

    pub fn with_arms(&self, arms: &[Arm]) -> Vec<Sym> {
        let mut it = arms.iter();
        self.0
            .iter()
            .map(|&r| match r {
                RegionId::R1 => Sym::R1,
                RegionId::R3 => Sym::R3,
                RegionId::R4 => Sym::R4(*it.next().expect("one arm per fold symbol")),
                RegionId::R5 => Sym::R5,
                _ => unreachable!(),
            })
            .collect()
    }
}

impl fmt::Display for Itinerary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = self.0.iter().map(|r| r.to_string()).collect();
        write!(f, "({})", names.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PeriodicError {
    #[error("max_period must be at least 1")]
    EmptyPeriod,
    #[error("itinerary {0} is not admissible")]
    Inadmissible(String),
    #[error("itinerary {0} is admissible but has no orbit in its strips")]
    NotRealized(String),
    #[error("Newton iteration for {0} did not converge")]
    NewtonBudget(String),
}

/// Why an arm-resolved word produced no orbit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Rejection {
    /// The fold inverse needed a point above the parabola vertex.
    AboveVertex,
    NoConvergence,
    OutOfRegion,
    WrongArm,
    ComplexMultipliers,
}

/// Primitive cyclic words of length `1..=max_period` over `alphabet`, in least rotation.
///
/// Prefixes are generated as pre-necklaces (Fredricksen-Kessler-Maiorana); a prefix is a
/// Lyndon word exactly when its period equals its length.
pub fn lyndon_words<T: Copy + Ord>(
    alphabet: &[T],
    max_period: usize,
    follows: impl Fn(T, T) -> bool,
) -> Vec<Vec<T>> {
    let mut alpha = alphabet.to_vec();
    alpha.sort();
    let mut out = Vec::new();
    let mut word: Vec<usize> = Vec::with_capacity(max_period);
    fn rec<T: Copy>(
        alpha: &[T],
        max: usize,
        p: usize,
        word: &mut Vec<usize>,
        follows: &impl Fn(T, T) -> bool,
        out: &mut Vec<Vec<T>>,
    ) {
        let t = word.len();
        if t > 0 && p == t && follows(alpha[word[t - 1]], alpha[word[0]]) {
            out.push(word.iter().map(|&i| alpha[i]).collect());
        }
        if t == max {
            return;
        }
        let start = if t == 0 { 0 } else { word[t - p] };
        for j in start..alpha.len() {
            if t > 0 && !follows(alpha[word[t - 1]], alpha[j]) {
                continue;
            }
            word.push(j);
            let np = if t == 0 || j != word[t - p] { t + 1 } else { p };
            rec(alpha, max, np, word, follows, out);
            word.pop();
        }
    }
    rec(&alpha, max_period, 1, &mut word, &follows, &mut out);
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}

/// Admissible primitive itineraries up to `max_period`, sorted by period then word.
pub fn enumerate_itineraries(
    map: &HorseshoeMap,
    max_period: usize,
) -> Result<Vec<Itinerary>, PeriodicError> {
    if max_period == 0 {
        return Err(PeriodicError::EmptyPeriod);
    }
    let table = TransitionTable::new(map);
    Ok(lyndon_words(&RegionId::BRANCHES, max_period, |a, b| {
        table.admissible(a, b)
    })
    .into_iter()
    .map(Itinerary)
    .collect())
}

/// Admissible primitive arm-resolved words up to `max_period`.
pub fn enumerate_words(
    map: &HorseshoeMap,
    max_period: usize,
) -> Result<Vec<Vec<Sym>>, PeriodicError> {
    if max_period == 0 {
        return Err(PeriodicError::EmptyPeriod);
    }
    let table = TransitionTable::new(map);
    Ok(lyndon_words(&Sym::ALL, max_period, |a, b| {
        table.sym_admissible(a, b)
    }))
}

#[derive(Debug, Clone, Serialize)]
pub struct PeriodicOrbit {
    pub itinerary: Itinerary,
    /// Arm of each R4 symbol, in order of appearance.
    pub arms: Vec<Arm>,
    pub points: Vec<Point>,
    /// Unstable multiplier, `|mu_u| > 1`.
    pub mu_u: f64,
    /// Stable multiplier.
    pub mu_s: f64,
    /// `DΦᵏ` at `points[0]`.
    pub monodromy: Jacobian,
    /// `max ‖Φ(p_i) - p_{i+1}‖`.
    pub residual: f64,
}

impl PeriodicOrbit {
    pub fn period(&self) -> usize {
        self.points.len()
    }

    pub fn word(&self) -> Vec<Sym> {
        self.itinerary.with_arms(&self.arms)
    }

    pub fn label(&self) -> String {
        word_label(&self.word())
    }

    pub fn regions(&self) -> &[RegionId] {
        &self.itinerary.0
    }

    /// `(log|mu_s|/k, log|mu_u|/k)`.
    pub fn exponents(&self) -> (f64, f64) {
        let k = self.period() as f64;
        (self.mu_s.abs().ln() / k, self.mu_u.abs().ln() / k)
    }

    /// `(|mu_u|^{1/k}, |mu_s|^{1/k})`.
    pub fn rates(&self) -> (f64, f64) {
        let (s, u) = self.exponents();
        (u.exp(), s.exp())
    }
}

fn initial_guess(map: &HorseshoeMap, word: &[Sym]) -> Vec<Point> {
    let p = map.params();
    let quarter = (p.y4b - p.y4a) / 4.0;
    word.iter()
        .map(|&s| {
            let y = match s {
                Sym::R1 => p.r1().lo + p.r1().height() / 2.0,
                Sym::R3 => p.r3().lo + p.r3().height() / 2.0,
                Sym::R5 => p.r5().lo + p.r5().height() / 2.0,
                Sym::R4(Arm::Left) => map.y_c() - quarter,
                Sym::R4(Arm::Right) => map.y_c() + quarter,
            };
            Point::new(0.5, y)
        })
        .collect()
}

/// Gauss-Seidel sweeps for the orbit with the given arm-resolved word.
///
/// Returns the points, the number of sweeps, and whether the fold inverse had to be
/// clamped at the vertex in the final sweep.
pub fn gauss_seidel(map: &HorseshoeMap, word: &[Sym]) -> (Vec<Point>, usize, bool) {
    let p = map.params();
    let k = word.len();
    let mut pts = initial_guess(map, word);
    let curv = p.c * p.alpha * p.alpha;
    let mut clamped = false;
    let mut sweeps = 0;
    while sweeps < GS_MAX_SWEEPS {
        sweeps += 1;
        let mut change = 0.0f64;
        for i in 0..k {
            let j = (i + 1) % k;
            let x = map.step_with(word[i].region(), pts[i]).x;
            change = change.max((x - pts[j].x).abs());
            pts[j].x = x;
        }
        clamped = false;
        for i in (0..k).rev() {
            let j = (i + 1) % k;
            let y = match word[i] {
                Sym::R4(arm) => {
                    let mut a = (pts[j].y + p.lambda * pts[i].x) / curv;
                    if a < 0.0 {
                        clamped = true;
                        a = 0.0;
                    }
                    match arm {
                        Arm::Left => map.y_c() - a.sqrt(),
                        Arm::Right => map.y_c() + a.sqrt(),
                    }
                }
                s => map.inverse_with(s.region(), pts[j]).y,
            };
            change = change.max((y - pts[i].y).abs());
            pts[i].y = y;
        }
        if change < GS_TOL {
            break;
        }
    }
    (pts, sweeps, clamped)
}

/// `max ‖Φ_{r_i}(p_i) - p_{i+1}‖`.
pub fn cycle_residual(map: &HorseshoeMap, regions: &[RegionId], pts: &[Point]) -> f64 {
    let k = pts.len();
    (0..k)
        .map(|i| map.step_with(regions[i], pts[i]).dist(&pts[(i + 1) % k]))
        .fold(0.0, f64::max)
}

/// Ordered derivative product `DΦ(p_{k-1}) ⋯ DΦ(p_0)`.
pub fn monodromy(map: &HorseshoeMap, regions: &[RegionId], pts: &[Point]) -> Jacobian {
    regions
        .iter()
        .zip(pts)
        .fold(Jacobian::IDENTITY, |m, (&r, &q)| {
            map.jacobian_with(r, q) * m
        })
}

/// Solves `A z = b` in place by Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col] == 0.0 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[row][c] -= f * a[col][c];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Damped multiple-shooting Newton on `Φ_{r_i}(p_i) = p_{i+1}`.
pub fn polish(map: &HorseshoeMap, regions: &[RegionId], pts: &mut [Point], iters: usize) {
    let k = pts.len();
    let n = 2 * k;
    let mut res = cycle_residual(map, regions, pts);
    for _ in 0..iters {
        if res < GS_TOL {
            return;
        }
        let mut a = vec![vec![0.0; n]; n];
        let mut b = vec![0.0; n];
        for i in 0..k {
            let j = (i + 1) % k;
            let img = map.step_with(regions[i], pts[i]);
            let jac = map.jacobian_with(regions[i], pts[i]).0;
            b[2 * i] = -(img.x - pts[j].x);
            b[2 * i + 1] = -(img.y - pts[j].y);
            for r in 0..2 {
                a[2 * i + r][2 * i] += jac[r][0];
                a[2 * i + r][2 * i + 1] += jac[r][1];
                a[2 * i + r][2 * j + r] -= 1.0;
            }
        }
        let Some(dz) = solve_dense(&mut a, &mut b) else {
            return;
        };
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let trial: Vec<Point> = pts
                .iter()
                .enumerate()
                .map(|(i, q)| Point::new(q.x + t * dz[2 * i], q.y + t * dz[2 * i + 1]))
                .collect();
            let r = cycle_residual(map, regions, &trial);
            if r < res {
                pts.copy_from_slice(&trial);
                res = r;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            return;
        }
    }
}

fn edge_margins(map: &HorseshoeMap, r: RegionId) -> (f64, f64, f64, f64) {
    let p = map.params();
    let s = match r {
        RegionId::R1 => p.r1(),
        RegionId::R3 => p.r3(),
        RegionId::R4 => p.r4(),
        RegionId::R5 => p.r5(),
        _ => unreachable!(),
    };
    // edges on the square boundary border no gap and get no margin
    let lo = if s.lo == 0.0 { 0.0 } else { REGION_MARGIN };
    let hi = if s.hi == 1.0 { 0.0 } else { REGION_MARGIN };
    (s.lo, s.hi, lo, hi)
}

/// Every point strictly inside its strip (and on its fold arm).
pub fn in_prescribed_regions(
    map: &HorseshoeMap,
    word: &[Sym],
    pts: &[Point],
) -> Result<(), Rejection> {
    for (&s, q) in word.iter().zip(pts) {
        let (lo, hi, mlo, mhi) = edge_margins(map, s.region());
        if !(q.y >= lo + mlo && q.y <= hi - mhi && (0.0..=1.0).contains(&q.x)) {
            return Err(Rejection::OutOfRegion);
        }
        match s {
            Sym::R4(Arm::Left) if q.y >= map.y_c() - REGION_MARGIN => {
                return Err(Rejection::WrongArm)
            }
            Sym::R4(Arm::Right) if q.y <= map.y_c() + REGION_MARGIN => {
                return Err(Rejection::WrongArm)
            }
            _ => {}
        }
    }
    Ok(())
}

fn split_word(word: &[Sym]) -> (Itinerary, Vec<Arm>) {
    let regions = word.iter().map(|s| s.region()).collect();
    let arms = word
        .iter()
        .filter_map(|s| match s {
            Sym::R4(a) => Some(*a),
            _ => None,
        })
        .collect();
    (Itinerary(regions), arms)
}

/// Builds and checks an orbit from candidate points.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn accept(
    map: &HorseshoeMap,
    word: &[Sym],
    pts: Vec<Point>,
) -> Result<PeriodicOrbit, Rejection> {
    let (itinerary, arms) = split_word(word);
    let residual = cycle_residual(map, &itinerary.0, &pts);
    if !(residual < RESIDUAL_TOL) {
        return Err(Rejection::NoConvergence);
    }
    in_prescribed_regions(map, word, &pts)?;
    let m = monodromy(map, &itinerary.0, &pts);
    // det of the product from the factors: the entries of m are large and cancel
    let det: f64 = itinerary
        .0
        .iter()
        .zip(&pts)
        .map(|(&r, &q)| map.jacobian_with(r, q).det())
        .product();
    let (small, big) = real_roots(m.trace(), det).ok_or(Rejection::ComplexMultipliers)?;
    Ok(PeriodicOrbit {
        itinerary,
        arms,
        points: pts,
        mu_u: big,
        mu_s: small,
        monodromy: m,
        residual,
    })
}

/// The orbit realizing an arm-resolved word, if any.
pub fn solve_word(map: &HorseshoeMap, word: &[Sym]) -> Result<PeriodicOrbit, Rejection> {
    let regions: Vec<RegionId> = word.iter().map(|s| s.region()).collect();
    if regions.iter().all(|r| r.is_linear()) {
        return accept(map, word, closed_form_affine(map, &regions));
    }
    let (mut pts, _, clamped) = gauss_seidel(map, word);
    if clamped {
        return Err(Rejection::AboveVertex);
    }
    if cycle_residual(map, &regions, &pts) > POLISH_ABOVE {
        polish(map, &regions, &mut pts, 20);
    }
    accept(map, word, pts)
}

/// Exact orbit of a word without fold symbols.
///
/// Abscissas come from the forward affine composition, ordinates from the backward
/// composition, so both solves divide by `1 - (contraction)` and stay well conditioned.
pub fn closed_form_affine(map: &HorseshoeMap, regions: &[RegionId]) -> Vec<Point> {
    let k = regions.len();
    let origin = Point::new(0.0, 0.0);
    let unit = Point::new(1.0, 1.0);
    // x_{i+1} = a_i x_i + b_i
    let (mut ax, mut bx) = (1.0, 0.0);
    for &r in regions {
        let b = map.step_with(r, origin).x;
        let a = map.step_with(r, unit).x - b;
        ax *= a;
        bx = a * bx + b;
    }
    // y_i = c_i y_{i+1} + d_i
    let (mut cy, mut dy) = (1.0, 0.0);
    for &r in regions.iter().rev() {
        let d = map.inverse_with(r, origin).y;
        let c = map.inverse_with(r, unit).y - d;
        cy *= c;
        dy = c * dy + d;
    }
    let mut xs = vec![0.0; k];
    let mut ys = vec![0.0; k];
    xs[0] = bx / (1.0 - ax);
    ys[0] = dy / (1.0 - cy);
    for i in 0..k - 1 {
        xs[i + 1] = map.step_with(regions[i], Point::new(xs[i], 0.0)).x;
    }
    for i in (1..k).rev() {
        let next = ys[(i + 1) % k];
        ys[i] = map.inverse_with(regions[i], Point::new(0.0, next)).y;
    }
    xs.into_iter()
        .zip(ys)
        .map(|(x, y)| Point::new(x, y))
        .collect()
}

/// Every orbit with base itinerary `it`, one per realized arm pattern.
pub fn find_orbits(
    map: &HorseshoeMap,
    it: &Itinerary,
) -> Result<Vec<PeriodicOrbit>, PeriodicError> {
    let table = TransitionTable::new(map);
    if !it.is_admissible(&table) {
        return Err(PeriodicError::Inadmissible(it.label()));
    }
    let b = it.fold_count();
    let mut out = Vec::new();
    for mask in 0..(1usize << b) {
        let arms: Vec<Arm> = (0..b)
            .map(|i| {
                if mask >> (b - 1 - i) & 1 == 0 {
                    Arm::Left
                } else {
                    Arm::Right
                }
            })
            .collect();
        if let Ok(orbit) = solve_word(map, &it.with_arms(&arms)) {
            out.push(orbit);
        }
    }
    Ok(out)
}

/// The first realized orbit with itinerary `it` (arms tried left before right).
pub fn find_orbit(map: &HorseshoeMap, it: &Itinerary) -> Result<PeriodicOrbit, PeriodicError> {
    find_orbits(map, it)?
        .into_iter()
        .next()
        .ok_or_else(|| PeriodicError::NotRealized(it.label()))
}

/// Damped single-shooting Newton on `Φᵏ(p) - p` along a fixed word.
///
/// Halves the step up to 30 times when the residual grows and gives up after 200
/// iterations.
pub fn newton_single_shooting(
    map: &HorseshoeMap,
    regions: &[RegionId],
    seed: Point,
) -> Option<Point> {
    let eval = |p: Point| -> (Point, Jacobian) {
        let mut q = p;
        let mut m = Jacobian::IDENTITY;
        for &r in regions {
            m = map.jacobian_with(r, q) * m;
            q = map.step_with(r, q);
        }
        (Point::new(q.x - p.x, q.y - p.y), m)
    };
    let size = |f: Point| f.x.hypot(f.y);
    let mut p = seed;
    let (mut f, mut m) = eval(p);
    for _ in 0..200 {
        if !size(f).is_finite() {
            return None;
        }
        if size(f) < 1e-14 {
            return Some(p);
        }
        let a = Jacobian([[m.0[0][0] - 1.0, m.0[0][1]], [m.0[1][0], m.0[1][1] - 1.0]]);
        let inv = a.inverse()?;
        let d = inv.apply([-f.x, -f.y]);
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..=30 {
            let trial = Point::new(p.x + t * d[0], p.y + t * d[1]);
            let (ft, mt) = eval(trial);
            if size(ft) < size(f) {
                p = trial;
                f = ft;
                m = mt;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (size(f) < 1e-12).then_some(p)
}

/// Multi-start Newton from a 16 x 16 grid of seeds in the first strip (and arm).
pub fn newton_multistart(map: &HorseshoeMap, word: &[Sym]) -> Result<PeriodicOrbit, PeriodicError> {
    let regions: Vec<RegionId> = word.iter().map(|s| s.region()).collect();
    let (lo, hi, _, _) = edge_margins(map, regions[0]);
    let (lo, hi) = match word[0] {
        Sym::R4(Arm::Left) => (lo, map.y_c()),
        Sym::R4(Arm::Right) => (map.y_c(), hi),
        _ => (lo, hi),
    };
    let mut converged = false;
    for i in 0..16 {
        for j in 0..16 {
            let seed = Point::new(
                (i as f64 + 0.5) / 16.0,
                lo + (hi - lo) * (j as f64 + 0.5) / 16.0,
            );
            let Some(p0) = newton_single_shooting(map, &regions, seed) else {
                continue;
            };
            converged = true;
            let mut pts = vec![p0];
            for r in &regions[..regions.len() - 1] {
                let last = *pts.last().unwrap();
                pts.push(map.step_with(*r, last));
            }
            if let Ok(orbit) = accept(map, word, pts) {
                return Ok(orbit);
            }
        }
    }
    let label = word_label(word);
    if converged {
        Err(PeriodicError::NotRealized(label))
    } else {
        Err(PeriodicError::NewtonBudget(label))
    }
}

/// All realized orbits up to `max_period`.
#[derive(Debug, Clone, Serialize)]
pub struct Census {
    pub max_period: usize,
    pub words_tried: usize,
    pub orbits: Vec<PeriodicOrbit>,
    /// `(reason, count)` for arm-resolved words without an orbit.
    pub rejected: Vec<(Rejection, usize)>,
}

impl Census {
    pub fn count_by_period(&self) -> Vec<usize> {
        let mut counts = vec![0; self.max_period];
        for o in &self.orbits {
            counts[o.period() - 1] += 1;
        }
        counts
    }

    pub fn max_residual(&self) -> f64 {
        self.orbits.iter().map(|o| o.residual).fold(0.0, f64::max)
    }
}

/// Solves every admissible primitive arm-resolved word; output order is canonical.
pub fn census(map: &HorseshoeMap, max_period: usize) -> Result<Census, PeriodicError> {
    let words = enumerate_words(map, max_period)?;
    let results: Vec<Result<PeriodicOrbit, Rejection>> =
        words.par_iter().map(|w| solve_word(map, w)).collect();
    let mut orbits = Vec::new();
    let mut rejected = std::collections::BTreeMap::new();
    for r in results {
        match r {
            Ok(o) => orbits.push(o),
            Err(e) => *rejected.entry(e).or_insert(0usize) += 1,
        }
    }
    orbits.sort_by(compare_orbits);
    Ok(Census {
        max_period,
        words_tried: words.len(),
        orbits,
        rejected: rejected.into_iter().collect(),
    })
}

fn compare_orbits(a: &PeriodicOrbit, b: &PeriodicOrbit) -> Ordering {
    a.period()
        .cmp(&b.period())
        .then_with(|| a.itinerary.cmp(&b.itinerary))
        .then_with(|| a.arms.cmp(&b.arms))
}

#[derive(Debug, Clone, Serialize)]
pub struct UhRow {
    pub label: String,
    pub period: usize,
    pub mu_u: f64,
    pub mu_s: f64,
    /// `|mu_u| - sigma_star^k`.
    pub unstable_margin: f64,
    /// `lambda_star^k - |mu_s|`.
    pub stable_margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct UhReport {
    pub sigma_star: f64,
    pub lambda_star: f64,
    pub rows: Vec<UhRow>,
    /// `min |mu_u|^{1/k}`: the largest unstable rate certified for the whole set.
    pub best_sigma: f64,
    /// `max |mu_s|^{1/k}`: the smallest stable rate certified for the whole set.
    pub best_lambda: f64,
    pub all_pass: bool,
}

pub fn certify_uniform_hyperbolicity(
    orbits: &[PeriodicOrbit],
    sigma_star: f64,
    lambda_star: f64,
) -> UhReport {
    let rows: Vec<UhRow> = orbits
        .iter()
        .map(|o| {
            let k = o.period() as i32;
            let unstable_margin = o.mu_u.abs() - sigma_star.powi(k);
            let stable_margin = lambda_star.powi(k) - o.mu_s.abs();
            UhRow {
                label: o.label(),
                period: o.period(),
                mu_u: o.mu_u,
                mu_s: o.mu_s,
                unstable_margin,
                stable_margin,
                pass: unstable_margin >= 0.0 && stable_margin >= 0.0,
            }
        })
        .collect();
    let best_sigma = orbits
        .iter()
        .map(|o| o.rates().0)
        .fold(f64::INFINITY, f64::min);
    let best_lambda = orbits.iter().map(|o| o.rates().1).fold(0.0, f64::max);
    let all_pass = rows.iter().all(|r| r.pass);
    UhReport {
        sigma_star,
        lambda_star,
        rows,
        best_sigma,
        best_lambda,
        all_pass,
    }
}
