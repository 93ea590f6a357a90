//! Seeded samplers for fold-image points, W-points and the invariant-set approximation.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64(seed)`. Candidates are drawn
//! sequentially and evaluated in parallel batches, so outputs depend only on the seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::map::{HorseshoeMap, Point, RegionId};
use crate::orbit::{first_return, ReturnRecord};
use crate::periodic::{census, Census, PeriodicError};

pub type SampleRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

const BATCH: usize = 4096;

/// A point of R4 and its image, with the image inside the square.
///
/// Half the draws put the preimage height uniformly in R4; the other half put it at a
/// log-uniform distance in `[10⁻⁶, 1]·h/2` from the vertex height, which produces
/// returns from deep inside the tangency region.
pub fn fold_point(map: &HorseshoeMap, rng: &mut SampleRng) -> (Point, Point) {
    let p = map.params();
    let half = (p.y4b - p.y4a) / 2.0;
    let s = if rng.gen_bool(0.5) {
        rng.gen_range(-half..=half)
    } else {
        let mag = half * 10f64.powf(-6.0 * rng.gen::<f64>());
        if rng.gen_bool(0.5) {
            mag
        } else {
            -mag
        }
    };
    let top = (p.c * p.alpha * p.alpha * s * s / p.lambda).min(1.0);
    let x = top * rng.gen::<f64>();
    let pre = Point::new(x, map.y_c() + s);
    (pre, map.step_with(RegionId::R4, pre))
}

/// `count` first returns from sampled fold-image points; draws that escape or exceed
/// `max_iter` are skipped. Stops early after `max_draws` candidates.
pub fn sample_returns(
    map: &HorseshoeMap,
    rng: &mut SampleRng,
    count: usize,
    max_iter: usize,
    max_draws: usize,
) -> (Vec<ReturnRecord>, usize) {
    let mut out = Vec::with_capacity(count);
    let mut draws = 0;
    while out.len() < count && draws < max_draws {
        let batch: Vec<Point> = (0..BATCH.min(max_draws - draws))
            .map(|_| fold_point(map, rng).1)
            .collect();
        draws += batch.len();
        let found: Vec<Option<ReturnRecord>> = batch
            .par_iter()
            .map(|&p| first_return(map, p, max_iter).ok())
            .collect();
        out.extend(found.into_iter().flatten().take(count - out.len()));
    }
    (out, draws)
}

/// A point of W with height log-uniform in `[10⁻⁶, 1/c)`.
pub fn w_point(map: &HorseshoeMap, rng: &mut SampleRng) -> Point {
    let p = map.params();
    let r = p.w_radius();
    let lo = 1e-6f64.ln();
    let hi = r.ln();
    let eta = (lo + (hi - lo) * rng.gen::<f64>())
        .exp()
        .min(r * (1.0 - 1e-12));
    let half = (r * r - eta * eta).max(0.0).sqrt() * (1.0 - 1e-9);
    Point::new(p.q + half * (2.0 * rng.gen::<f64>() - 1.0), eta)
}

/// Points of every realized periodic orbit up to `max_period`, with their strips,
/// as a finite stand-in for the invariant set.
pub fn periodic_points(
    map: &HorseshoeMap,
    max_period: usize,
) -> Result<(Census, usize), PeriodicError> {
    let c = census(map, max_period)?;
    let n = c.orbits.iter().map(|o| o.period()).sum();
    Ok((c, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let map = HorseshoeMap::default();
        let a: Vec<_> = {
            let mut r = rng(7);
            (0..50).map(|_| fold_point(&map, &mut r)).collect()
        };
        let b: Vec<_> = {
            let mut r = rng(7);
            (0..50).map(|_| fold_point(&map, &mut r)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn fold_points_land_in_the_square() {
        let map = HorseshoeMap::default();
        let mut r = rng(1);
        for _ in 0..1000 {
            let (pre, p) = fold_point(&map, &mut r);
            assert_eq!(map.region_of(pre), RegionId::R4);
            assert!(p.in_square(), "{p}");
        }
    }

    #[test]
    fn w_points_are_in_w() {
        let map = HorseshoeMap::default();
        let mut r = rng(2);
        for _ in 0..1000 {
            let p = w_point(&map, &mut r);
            assert!(crate::orbit::in_w(map.params(), p));
            assert!(p.y >= 1e-6 * (1.0 - 1e-12));
        }
    }

    #[test]
    fn returns_are_reproducible() {
        let map = HorseshoeMap::default();
        let (a, da) = sample_returns(&map, &mut rng(3), 200, 1000, 1_000_000);
        let (b, db) = sample_returns(&map, &mut rng(3), 200, 1000, 1_000_000);
        assert_eq!(a.len(), 200);
        assert_eq!(da, db);
        assert!(a
            .iter()
            .zip(&b)
            .all(|(x, y)| x.start == y.start && x.n == y.n));
    }
}
