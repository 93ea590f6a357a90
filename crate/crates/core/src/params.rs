//! Map constants and their validity invariants.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Orientation of the affine branch on the top strip R5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// `(x, y) -> (λx + 1 - λ, σy - (σ - 1))`, derivative `diag(λ, σ)`.
    #[default]
    Preserving,
    /// `(x, y) -> (1 - λx, σ(1 - y))`, derivative `diag(-λ, -σ)`.
    Reversing,
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Orientation::Preserving => f.write_str("preserving"),
            Orientation::Reversing => f.write_str("reversing"),
        }
    }
}

/// All constants of the horseshoe family.
///
/// The strips are horizontal bands of the unit square:
/// R1 = `[0, 1/σ]`, R3 = `[y3, y3 + 1/σ]`, R4 = `[y4a, y4b]`,
/// R5 = `[1 - 2/(3σ), 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapParams {
    /// Contraction factor of the affine branches.
    pub lambda: f64,
    /// Expansion factor of the affine branches.
    pub sigma: f64,
    /// Curvature of the fold parabolas.
    pub c: f64,
    /// Abscissa of the tangency point `(q, 0)`.
    pub q: f64,
    /// Horizontal speed of the fold, `|∂Φ/∂y|` at the vertex.
    pub alpha: f64,
    /// Bottom of the R3 strip.
    pub y3: f64,
    /// Left edge of the R3 image strip.
    pub d3: f64,
    /// Bottom of the fold strip R4.
    pub y4a: f64,
    /// Top of the fold strip R4.
    pub y4b: f64,
    #[serde(default)]
    pub r5_orientation: Orientation,
}

impl Default for MapParams {
    fn default() -> Self {
        MapParams {
            lambda: 0.25,
            sigma: 4.0,
            c: 16.0,
            q: 0.72,
            alpha: 4.0,
            y3: 0.40,
            d3: 0.45,
            y4a: 0.70,
            y4b: 0.78,
            r5_orientation: Orientation::Preserving,
        }
    }
}

/// A closed y-interval of the square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Strip {
    pub lo: f64,
    pub hi: f64,
}

impl Strip {
    pub fn contains(&self, y: f64) -> bool {
        self.lo <= y && y <= self.hi
    }

    pub fn height(&self) -> f64 {
        self.hi - self.lo
    }

    /// Length of the overlap with another interval (zero when disjoint).
    pub fn overlap(&self, lo: f64, hi: f64) -> f64 {
        (self.hi.min(hi) - self.lo.max(lo)).max(0.0)
    }
}

/// One violated invariant of [`MapParams`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParamViolation {
    NonFinite,
    LambdaPositive,
    LambdaBelowThird,
    SigmaAboveThree,
    QInRange,
    AlphaAtLeastSigma,
    CurvatureLarge,
    StripsOrdered,
    FoldInsideSquare,
    R3ImageClearOfR5Image,
}

impl fmt::Display for ParamViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            ParamViolation::NonFinite => "all parameters finite violated",
            ParamViolation::LambdaPositive => "lambda > 0 violated",
            ParamViolation::LambdaBelowThird => "lambda < 1/3 violated",
            ParamViolation::SigmaAboveThree => "sigma > 3 violated",
            ParamViolation::QInRange => "q in (2/3, 1) violated",
            ParamViolation::AlphaAtLeastSigma => "alpha >= sigma violated",
            ParamViolation::CurvatureLarge => "c > max(9/4, 39/4, σ) violated",
            ParamViolation::StripsOrdered => {
                "strips [0,1/σ], [y3,y3+1/σ], [y4a,y4b], [1-2/(3σ),1] disjoint and increasing violated"
            }
            ParamViolation::FoldInsideSquare => "fold image q ± α(y4b-y4a)/2 inside [0,1] violated",
            ParamViolation::R3ImageClearOfR5Image => {
                "R3 image [d3, d3+λ] disjoint from R5 image [1-λ, 1] violated"
            }
        };
        f.write_str(msg)
    }
}

/// Every invariant that failed, in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid map parameters: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct ParamErrors(pub Vec<ParamViolation>);

impl MapParams {
    /// Returns the parameters unchanged when every invariant holds.
    pub fn validate(self) -> Result<MapParams, ParamErrors> {
        let violations = self.violations();
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(ParamErrors(violations))
        }
    }

    pub fn violations(&self) -> Vec<ParamViolation> {
        let mut out = Vec::new();
        let values = [
            self.lambda,
            self.sigma,
            self.c,
            self.q,
            self.alpha,
            self.y3,
            self.d3,
            self.y4a,
            self.y4b,
        ];
        if values.iter().any(|v| !v.is_finite()) {
            out.push(ParamViolation::NonFinite);
            return out;
        }
        if self.lambda <= 0.0 {
            out.push(ParamViolation::LambdaPositive);
        }
        if self.lambda >= 1.0 / 3.0 {
            out.push(ParamViolation::LambdaBelowThird);
        }
        if self.sigma <= 3.0 {
            out.push(ParamViolation::SigmaAboveThree);
        }
        if !(self.q > 2.0 / 3.0 && self.q < 1.0) {
            out.push(ParamViolation::QInRange);
        }
        if self.alpha < self.sigma {
            out.push(ParamViolation::AlphaAtLeastSigma);
        }
        if self.c <= (9.0f64 / 4.0).max(39.0 / 4.0).max(self.sigma) {
            out.push(ParamViolation::CurvatureLarge);
        }
        let bands = [self.r1(), self.r3(), self.r4(), self.r5()];
        let ordered = bands.iter().all(|b| b.lo < b.hi)
            && bands.windows(2).all(|w| w[0].hi < w[1].lo)
            && bands[0].lo >= 0.0
            && bands[3].hi <= 1.0;
        if !ordered {
            out.push(ParamViolation::StripsOrdered);
        }
        let half = self.alpha * (self.y4b - self.y4a) / 2.0;
        if self.q - half < 0.0 || self.q + half > 1.0 {
            out.push(ParamViolation::FoldInsideSquare);
        }
        if !(self.d3 + self.lambda < 1.0 - self.lambda || 1.0 < self.d3) {
            out.push(ParamViolation::R3ImageClearOfR5Image);
        }
        out
    }

    pub fn r1(&self) -> Strip {
        Strip {
            lo: 0.0,
            hi: 1.0 / self.sigma,
        }
    }

    pub fn r3(&self) -> Strip {
        Strip {
            lo: self.y3,
            hi: self.y3 + 1.0 / self.sigma,
        }
    }

    pub fn r4(&self) -> Strip {
        Strip {
            lo: self.y4a,
            hi: self.y4b,
        }
    }

    pub fn r5(&self) -> Strip {
        Strip {
            lo: 1.0 - 2.0 / (3.0 * self.sigma),
            hi: 1.0,
        }
    }

    /// Height of the fold vertex inside R4.
    pub fn y_center(&self) -> f64 {
        (self.y4a + self.y4b) / 2.0
    }

    /// Radius of the neighbourhood W of the tangency point.
    pub fn w_radius(&self) -> f64 {
        1.0 / self.c
    }

    /// Decimal rendering of every field joined by `|`.
    pub fn fingerprint(&self) -> String {
        format!(
            "{}|{}|{}|{}|{}|{}|{}|{}|{}|{}",
            self.lambda,
            self.sigma,
            self.c,
            self.q,
            self.alpha,
            self.y3,
            self.d3,
            self.y4a,
            self.y4b,
            self.r5_orientation
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let p = MapParams::default();
        assert_eq!(p.validate(), Ok(p));
    }

    #[test]
    fn lambda_too_large() {
        let p = MapParams {
            lambda: 0.4,
            ..MapParams::default()
        };
        let err = p.validate().unwrap_err();
        assert_eq!(err.0[0], ParamViolation::LambdaBelowThird);
        assert_eq!(err.0[0].to_string(), "lambda < 1/3 violated");
        // λ = 0.4 also pushes R3' = [0.45, 0.85] into R5' = [0.6, 1]
        assert_eq!(err.0[1], ParamViolation::R3ImageClearOfR5Image);
    }

    #[test]
    fn curvature_too_small() {
        let p = MapParams {
            c: 2.0,
            ..MapParams::default()
        };
        let err = p.validate().unwrap_err();
        assert_eq!(err.0, vec![ParamViolation::CurvatureLarge]);
        assert_eq!(err.0[0].to_string(), "c > max(9/4, 39/4, σ) violated");
        // 39/4 dominates 9/4 and σ = 4, so c = 9.75 is still rejected
        let p = MapParams {
            c: 9.75,
            ..MapParams::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn every_violation_is_reported() {
        let p = MapParams {
            lambda: 0.5,
            sigma: 2.0,
            q: 0.5,
            ..MapParams::default()
        };
        let err = p.validate().unwrap_err();
        assert!(err.0.contains(&ParamViolation::LambdaBelowThird));
        assert!(err.0.contains(&ParamViolation::SigmaAboveThree));
        assert!(err.0.contains(&ParamViolation::QInRange));
        assert!(err.0.len() >= 3);
    }

    #[test]
    fn strips_must_not_touch() {
        let p = MapParams {
            y4a: 0.65,
            ..MapParams::default()
        };
        assert_eq!(
            p.validate().unwrap_err().0,
            vec![ParamViolation::StripsOrdered]
        );
    }

    #[test]
    fn fold_must_fit() {
        let p = MapParams {
            alpha: 10.0,
            ..MapParams::default()
        };
        assert_eq!(
            p.validate().unwrap_err().0,
            vec![ParamViolation::FoldInsideSquare]
        );
    }

    #[test]
    fn r3_image_must_clear_r5_image() {
        let p = MapParams {
            d3: 0.6,
            ..MapParams::default()
        };
        assert_eq!(
            p.validate().unwrap_err().0,
            vec![ParamViolation::R3ImageClearOfR5Image]
        );
    }

    #[test]
    fn fingerprint_renders_all_fields() {
        assert_eq!(
            MapParams::default().fingerprint(),
            "0.25|4|16|0.72|4|0.4|0.45|0.7|0.78|preserving"
        );
    }
}
