//! Discrete probability measures on the strategy space `S = [0, 1]`.
//!
//! A [`DiscreteMeasure`] is a finitely supported probability measure:
//! strictly increasing support points in `[0, 1]` and nonnegative weights
//! summing to one. Construction sorts the support, merges points closer
//! than [`MERGE_TOL`] by summing their weights, and renormalizes any
//! nonnegative weight vector with positive total mass.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util::comp_sum;

/// Support points closer than this are merged at construction. Keeps the
/// bounded-Lipschitz LP free of zero-length chain constraints.
pub const MERGE_TOL: f64 = 1e-12;

/// Allowed deviation of the total mass from one after renormalization.
pub const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum MeasureError {
    #[error("measure must have at least one support point")]
    EmptySupport,
    #[error("points/weights length mismatch: {points} vs {weights}")]
    LengthMismatch { points: usize, weights: usize },
    #[error("support point {value} at index {index} outside [0, 1]")]
    PointOutOfRange { index: usize, value: f64 },
    #[error("non-finite entry at index {index}")]
    NonFinite { index: usize },
    #[error("negative weight {value} at index {index}")]
    NegativeWeight { index: usize, value: f64 },
    #[error("total mass {0} is not positive")]
    NonPositiveMass(f64),
    #[error("grid of size {n} requires n >= {min} for {placement:?} placement")]
    GridTooSmall {
        n: usize,
        min: usize,
        placement: GridPlacement,
    },
    #[error("invalid density: {0}")]
    InvalidDensity(String),
}

/// Where grid support points sit inside `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GridPlacement {
    /// `s_i = (i - 1) / (n - 1)`; includes both endpoints, needs `n >= 2`.
    #[default]
    Endpoints,
    /// `s_i = (i - 1/2) / n`; cell centers, any `n >= 1`.
    Midpoints,
}

/// Density on `[0, 1]` used for sampling and grid restriction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DensitySpec {
    Uniform,
    /// Piecewise-constant: `values[k]` on `[breaks[k], breaks[k+1])`.
    Piecewise { breaks: Vec<f64>, values: Vec<f64> },
}

impl DensitySpec {
    pub fn validate(&self) -> Result<(), MeasureError> {
        match self {
            DensitySpec::Uniform => Ok(()),
            DensitySpec::Piecewise { breaks, values } => {
                if breaks.len() < 2 || values.len() != breaks.len() - 1 {
                    return Err(MeasureError::InvalidDensity(format!(
                        "need breaks.len() >= 2 and values.len() == breaks.len() - 1, got {} and {}",
                        breaks.len(),
                        values.len()
                    )));
                }
                for w in breaks.windows(2) {
                    if !(w[1] > w[0]) {
                        return Err(MeasureError::InvalidDensity(
                            "breaks must be strictly increasing".into(),
                        ));
                    }
                }
                if breaks[0] < 0.0 || *breaks.last().unwrap() > 1.0 {
                    return Err(MeasureError::InvalidDensity(
                        "breaks must lie within [0, 1]".into(),
                    ));
                }
                for (i, &v) in values.iter().enumerate() {
                    if !v.is_finite() {
                        return Err(MeasureError::NonFinite { index: i });
                    }
                    if v < 0.0 {
                        return Err(MeasureError::InvalidDensity(format!(
                            "negative density value {v} at segment {i}"
                        )));
                    }
                }
                if self.total_mass() <= 0.0 {
                    return Err(MeasureError::InvalidDensity(
                        "density has zero total mass".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    fn total_mass(&self) -> f64 {
        match self {
            DensitySpec::Uniform => 1.0,
            DensitySpec::Piecewise { breaks, values } => values
                .iter()
                .zip(breaks.windows(2))
                .map(|(v, w)| v * (w[1] - w[0]))
                .sum(),
        }
    }

    /// Pointwise density value at `s` (right-continuous; the last segment is
    /// closed on the right; zero outside the break range).
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            DensitySpec::Uniform => 1.0,
            DensitySpec::Piecewise { breaks, values } => {
                let last = breaks.len() - 1;
                if s < breaks[0] || s > breaks[last] {
                    return 0.0;
                }
                if s == breaks[last] {
                    return values[last - 1];
                }
                let k = breaks.partition_point(|&b| b <= s) - 1;
                values[k]
            }
        }
    }

    /// Inverse CDF of the normalized density at quantile `u` in `[0, 1)`.
    fn inverse_cdf(&self, u: f64) -> f64 {
        match self {
            DensitySpec::Uniform => u,
            DensitySpec::Piecewise { breaks, values } => {
                let total = self.total_mass();
                let target = u * total;
                let mut acc = 0.0;
                for (k, &v) in values.iter().enumerate() {
                    let seg = v * (breaks[k + 1] - breaks[k]);
                    if target < acc + seg {
                        return breaks[k] + (target - acc) / v;
                    }
                    acc += seg;
                }
                *breaks.last().unwrap()
            }
        }
    }
}

/// Finitely supported probability measure on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure")]
pub struct DiscreteMeasure {
    points: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeasure {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawMeasure> for DiscreteMeasure {
    type Error = MeasureError;
    fn try_from(raw: RawMeasure) -> Result<Self, Self::Error> {
        DiscreteMeasure::new(raw.points, raw.weights)
    }
}

impl DiscreteMeasure {
    /// Build a measure from raw support points and nonnegative weights.
    ///
    /// Sorts by point, merges duplicates within [`MERGE_TOL`] by summing
    /// weights, and renormalizes to total mass one.
    pub fn new(points: Vec<f64>, weights: Vec<f64>) -> Result<Self, MeasureError> {
        if points.is_empty() {
            return Err(MeasureError::EmptySupport);
        }
        if points.len() != weights.len() {
            return Err(MeasureError::LengthMismatch {
                points: points.len(),
                weights: weights.len(),
            });
        }
        for (i, &p) in points.iter().enumerate() {
            if !p.is_finite() {
                return Err(MeasureError::NonFinite { index: i });
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(MeasureError::PointOutOfRange { index: i, value: p });
            }
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(MeasureError::NonFinite { index: i });
            }
            if w < 0.0 {
                return Err(MeasureError::NegativeWeight { index: i, value: w });
            }
        }

        let mut idx: Vec<usize> = (0..points.len()).collect();
        idx.sort_by(|&a, &b| points[a].total_cmp(&points[b]));

        let mut pts: Vec<f64> = Vec::with_capacity(points.len());
        let mut wts: Vec<f64> = Vec::with_capacity(points.len());
        for &i in &idx {
            if let Some(last) = pts.last() {
                if points[i] - last <= MERGE_TOL {
                    *wts.last_mut().unwrap() += weights[i];
                    continue;
                }
            }
            pts.push(points[i]);
            wts.push(weights[i]);
        }

        let mass = comp_sum(&wts);
        if !(mass > 0.0) {
            return Err(MeasureError::NonPositiveMass(mass));
        }
        for w in &mut wts {
            *w /= mass;
        }
        debug_assert!((comp_sum(&wts) - 1.0).abs() <= MASS_TOL);
        Ok(Self {
            points: pts,
            weights: wts,
        })
    }

    /// Measure concentrated on a single point.
    pub fn dirac(point: f64) -> Result<Self, MeasureError> {
        Self::new(vec![point], vec![1.0])
    }

    /// Measure with the given support and an explicit weight vector already
    /// on the simplex; support must be strictly increasing.
    pub fn from_support_weights(support: &[f64], weights: &[f64]) -> Result<Self, MeasureError> {
        Self::new(support.to_vec(), weights.to_vec())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Evenly weighted grid measure: `n` points with weight `1/n` each.
///
/// `Endpoints` places `s_i = (i - 1)/(n - 1)` (requires `n >= 2`),
/// `Midpoints` places `s_i = (i - 1/2)/n`.
pub fn make_grid_measure(
    n: usize,
    placement: GridPlacement,
) -> Result<DiscreteMeasure, MeasureError> {
    grid_points(n, placement).map(|points| DiscreteMeasure {
        weights: vec![1.0 / n as f64; n],
        points,
    })
}

/// Support points of the grid without weights.
pub fn grid_points(n: usize, placement: GridPlacement) -> Result<Vec<f64>, MeasureError> {
    let min = match placement {
        GridPlacement::Endpoints => 2,
        GridPlacement::Midpoints => 1,
    };
    if n < min {
        return Err(MeasureError::GridTooSmall { n, min, placement });
    }
    let nf = n as f64;
    Ok(match placement {
        GridPlacement::Endpoints => (0..n).map(|i| i as f64 / (nf - 1.0)).collect(),
        GridPlacement::Midpoints => (0..n).map(|i| (i as f64 + 0.5) / nf).collect(),
    })
}

/// `n` i.i.d. draws from `density` with weight `1/n` each, via inverse-CDF
/// sampling from a seeded generator. A pure function of
/// `(density, n, seed)`: identical inputs give bit-identical measures.
pub fn sample_measure(
    density: &DensitySpec,
    n: usize,
    seed: u64,
) -> Result<DiscreteMeasure, MeasureError> {
    if n == 0 {
        return Err(MeasureError::EmptySupport);
    }
    density.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<f64> = (0..n)
        .map(|_| density.inverse_cdf(unit_f64(rng.next_u64())))
        .collect();
    DiscreteMeasure::new(points, vec![1.0 / n as f64; n])
}

/// Map 64 random bits to `[0, 1)` using the top 53 bits. Fixed here so the
/// sampled stream does not depend on rand's float conversion details.
fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints_two_points() {
        let m = make_grid_measure(2, GridPlacement::Endpoints).unwrap();
        assert_eq!(m.points(), &[0.0, 1.0]);
        assert_eq!(m.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn grid_midpoints_three_points() {
        let m = make_grid_measure(3, GridPlacement::Midpoints).unwrap();
        assert_eq!(m.points(), &[0.5 / 3.0, 1.5 / 3.0, 2.5 / 3.0]);
        assert_eq!(m.weights(), &[1.0 / 3.0; 3]);
    }

    #[test]
    fn grid_rejects_degenerate_sizes() {
        assert!(make_grid_measure(0, GridPlacement::Midpoints).is_err());
        assert!(matches!(
            make_grid_measure(1, GridPlacement::Endpoints),
            Err(MeasureError::GridTooSmall { .. })
        ));
        assert!(make_grid_measure(1, GridPlacement::Midpoints).is_ok());
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_measure(&DensitySpec::Uniform, 5, 7).unwrap();
        let b = sample_measure(&DensitySpec::Uniform, 5, 7).unwrap();
        assert_eq!(a, b);
        let c = sample_measure(&DensitySpec::Uniform, 5, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sampled_weights_are_uniform() {
        for &(n, seed) in &[(3usize, 1u64), (17, 99), (100, 7)] {
            let m = sample_measure(&DensitySpec::Uniform, n, seed).unwrap();
            assert_eq!(m.len(), n);
            for &w in m.weights() {
                assert_eq!(w, 1.0 / n as f64);
            }
        }
    }

    #[test]
    fn sampling_respects_piecewise_support() {
        let d = DensitySpec::Piecewise {
            breaks: vec![0.25, 0.5],
            values: vec![4.0],
        };
        let m = sample_measure(&d, 200, 3).unwrap();
        for &p in m.points() {
            assert!((0.25..=0.5).contains(&p), "point {p} outside segment");
        }
    }

    #[test]
    fn density_rejections() {
        let neg = DensitySpec::Piecewise {
            breaks: vec![0.0, 1.0],
            values: vec![-1.0],
        };
        assert!(neg.validate().is_err());
        let zero = DensitySpec::Piecewise {
            breaks: vec![0.0, 1.0],
            values: vec![0.0],
        };
        assert!(zero.validate().is_err());
        let unsorted = DensitySpec::Piecewise {
            breaks: vec![0.5, 0.25, 1.0],
            values: vec![1.0, 1.0],
        };
        assert!(unsorted.validate().is_err());
    }

    #[test]
    fn piecewise_eval_is_right_continuous() {
        let d = DensitySpec::Piecewise {
            breaks: vec![0.0, 0.5, 1.0],
            values: vec![1.5, 0.5],
        };
        assert_eq!(d.eval(0.0), 1.5);
        assert_eq!(d.eval(0.49), 1.5);
        assert_eq!(d.eval(0.5), 0.5);
        assert_eq!(d.eval(1.0), 0.5);
    }

    #[test]
    fn construction_renormalizes() {
        let m = DiscreteMeasure::new(vec![0.1, 0.9, 0.4], vec![2.0, 1.0, 1.0]).unwrap();
        assert_eq!(m.points(), &[0.1, 0.4, 0.9]);
        assert_eq!(m.weights(), &[0.5, 0.25, 0.25]);
    }

    #[test]
    fn duplicates_merge_by_weight_sum() {
        let m = DiscreteMeasure::new(vec![0.3, 0.3 + 1e-13, 0.7], vec![0.25, 0.25, 0.5]).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn construction_rejections() {
        assert_eq!(
            DiscreteMeasure::new(vec![], vec![]),
            Err(MeasureError::EmptySupport)
        );
        assert!(DiscreteMeasure::new(vec![1.5], vec![1.0]).is_err());
        assert!(DiscreteMeasure::new(vec![0.5], vec![-1.0]).is_err());
        assert!(DiscreteMeasure::new(vec![0.5], vec![0.0]).is_err());
        assert!(DiscreteMeasure::new(vec![0.5, 0.6], vec![1.0]).is_err());
        assert!(DiscreteMeasure::new(vec![f64::NAN], vec![1.0]).is_err());
    }

    #[test]
    fn measure_json_round_trip_validates() {
        let m: DiscreteMeasure =
            serde_json::from_str(r#"{"points":[0.9,0.1],"weights":[1.0,3.0]}"#).unwrap();
        assert_eq!(m.points(), &[0.1, 0.9]);
        assert_eq!(m.weights(), &[0.75, 0.25]);
        assert!(serde_json::from_str::<DiscreteMeasure>(r#"{"points":[2.0],"weights":[1.0]}"#)
            .is_err());
    }
}
