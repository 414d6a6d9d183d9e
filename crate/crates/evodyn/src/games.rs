//! Payoff structures: kernels `f(s, s')` defining linear games
//! `F(mu)(s) = ∫ f(s, s') dmu(s')`, their discretization to payoff vectors
//! on finite supports, and a numerical probe for the boundedness and
//! Lipschitz regularity the convergence guarantees rely on.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::{grid_points, DiscreteMeasure, GridPlacement};
use crate::metric::bl_distance;
use crate::util::comp_sum;

#[derive(Debug, Error, PartialEq)]
pub enum GameError {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("support/theta length mismatch: {support} vs {theta}")]
    LengthMismatch { support: usize, theta: usize },
    #[error("theta is not on the simplex: sum = {sum}")]
    ThetaNotSimplex { sum: f64 },
    #[error("probe needs sample_count >= 2, got {0}")]
    SampleCountTooSmall(usize),
}

/// Payoff kernel of a linear game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PayoffKernel {
    /// `f(s, s') = -1` iff `s = s'`, else 0. Discontinuous on the diagonal.
    #[serde(rename = "anticoordination")]
    AnticoordinationDiscrete,
    /// `f(s, s') = -h(|s - s'|)` with the quartic bump
    /// `h(r) = (1 - (r/w)^2)^2` for `r < w`, else 0. Smooth stand-in for
    /// the discrete anticoordination penalty; `h(0) = 1`, compact support.
    #[serde(rename = "bump")]
    AnticoordinationBump { width: f64 },
    /// Finite game tabulated on its own support; off-grid arguments are
    /// evaluated at the nearest tabulated point.
    #[serde(rename = "tabulated")]
    TabulatedGrid {
        points: Vec<f64>,
        matrix: Vec<Vec<f64>>,
    },
    #[serde(rename = "zero")]
    ConstantZero,
}

pub type PayoffVector = Vec<f64>;

impl PayoffKernel {
    pub fn validate(&self) -> Result<(), GameError> {
        match self {
            PayoffKernel::AnticoordinationDiscrete | PayoffKernel::ConstantZero => Ok(()),
            PayoffKernel::AnticoordinationBump { width } => {
                if !(width.is_finite() && *width > 0.0 && *width <= 1.0) {
                    return Err(GameError::InvalidKernel(format!(
                        "bump width must lie in (0, 1], got {width}"
                    )));
                }
                Ok(())
            }
            PayoffKernel::TabulatedGrid { points, matrix } => {
                if points.is_empty() {
                    return Err(GameError::InvalidKernel("tabulated grid is empty".into()));
                }
                if matrix.len() != points.len()
                    || matrix.iter().any(|row| row.len() != points.len())
                {
                    return Err(GameError::InvalidKernel(format!(
                        "tabulated matrix must be square of size {}",
                        points.len()
                    )));
                }
                if matrix.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(GameError::InvalidKernel(
                        "tabulated matrix has non-finite entries".into(),
                    ));
                }
                if points.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(GameError::InvalidKernel(
                        "tabulated points must be strictly increasing".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Pointwise kernel evaluation `f(s, s')`.
    pub fn eval(&self, s: f64, s_prime: f64) -> f64 {
        match self {
            PayoffKernel::AnticoordinationDiscrete => {
                if s == s_prime {
                    -1.0
                } else {
                    0.0
                }
            }
            PayoffKernel::AnticoordinationBump { width } => -bump((s - s_prime).abs(), *width),
            PayoffKernel::TabulatedGrid { points, matrix } => {
                matrix[nearest_index(points, s)][nearest_index(points, s_prime)]
            }
            PayoffKernel::ConstantZero => 0.0,
        }
    }

    /// Restrict the kernel to a finite support.
    pub fn discretize(&self, support: &[f64]) -> DiscretizedKernel {
        match self {
            PayoffKernel::AnticoordinationDiscrete => DiscretizedKernel::NegIdentity,
            PayoffKernel::ConstantZero => DiscretizedKernel::Zero,
            _ => {
                let n = support.len();
                let mut m = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        m[i * n + j] = self.eval(support[i], support[j]);
                    }
                }
                DiscretizedKernel::Dense { n, entries: m }
            }
        }
    }
}

/// Quartic bump `h(r) = (1 - (r/w)^2)^2` on `[0, w)`, zero beyond.
fn bump(r: f64, width: f64) -> f64 {
    if r < width {
        let q = r / width;
        let t = 1.0 - q * q;
        t * t
    } else {
        0.0
    }
}

fn nearest_index(points: &[f64], s: f64) -> usize {
    let k = points.partition_point(|&p| p < s);
    if k == 0 {
        return 0;
    }
    if k == points.len() {
        return points.len() - 1;
    }
    if s - points[k - 1] <= points[k] - s {
        k - 1
    } else {
        k
    }
}

/// Payoff matrix of a kernel restricted to a fixed support. The diagonal
/// anticoordination case keeps its exact `-theta` action instead of a
/// dense product.
#[derive(Debug, Clone)]
pub enum DiscretizedKernel {
    NegIdentity,
    Zero,
    Dense { n: usize, entries: Vec<f64> },
}

impl DiscretizedKernel {
    pub fn apply_into(&self, theta: &[f64], out: &mut [f64]) {
        debug_assert_eq!(theta.len(), out.len());
        match self {
            DiscretizedKernel::NegIdentity => {
                for (o, &t) in out.iter_mut().zip(theta) {
                    *o = -t;
                }
            }
            DiscretizedKernel::Zero => out.fill(0.0),
            DiscretizedKernel::Dense { n, entries } => {
                debug_assert_eq!(theta.len(), *n);
                for i in 0..*n {
                    let row = &entries[i * n..(i + 1) * n];
                    out[i] = row.iter().zip(theta).map(|(a, t)| a * t).sum();
                }
            }
        }
    }

    pub fn apply(&self, theta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; theta.len()];
        self.apply_into(theta, &mut out);
        out
    }
}

pub(crate) fn check_simplex(theta: &[f64], tol: f64) -> Result<(), GameError> {
    let sum = comp_sum(theta);
    if (sum - 1.0).abs() > tol || theta.iter().any(|&t| !(t >= -tol)) {
        return Err(GameError::ThetaNotSimplex { sum });
    }
    Ok(())
}

/// Discretized payoff vector: `values_i = sum_j f(s_i, s_j) theta_j`.
pub fn payoff_vector(
    kernel: &PayoffKernel,
    support: &[f64],
    theta: &[f64],
) -> Result<PayoffVector, GameError> {
    kernel.validate()?;
    if support.len() != theta.len() {
        return Err(GameError::LengthMismatch {
            support: support.len(),
            theta: theta.len(),
        });
    }
    check_simplex(theta, 1e-9)?;
    Ok(kernel.discretize(support).apply(theta))
}

/// Heuristic regularity probe: sampled estimates of the kernel bound, the
/// Lipschitz modulus in the strategy argument, and the Lipschitz modulus of
/// the induced payoff map with respect to the bounded-Lipschitz distance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeReport {
    /// `max |f|` over sampled pairs (diagonal included).
    pub bound_estimate: f64,
    /// Max difference quotient over separations down to 1e-6.
    pub lip_s_estimate: f64,
    /// Same quotient restricted to separations >= 1e-3.
    pub lip_s_coarse: f64,
    /// Max over all sampled separations (>= 1e-6).
    pub lip_s_fine: f64,
    /// `max ||F(theta) - F(theta')||_inf / d_BL` over sampled simplex pairs
    /// on a fixed 32-point grid.
    pub lip_measure_estimate: f64,
    /// True when the difference quotient grows by >= 10x as the minimum
    /// separation shrinks from 1e-3 to 1e-6.
    pub diverging: bool,
}

/// Separations probed for the strategy-Lipschitz estimate.
const PROBE_SEPS: [f64; 4] = [1e-3, 1e-4, 1e-5, 1e-6];
const PROBE_GRID: usize = 32;
const DIVERGENCE_RATIO: f64 = 10.0;

pub fn assumption1_probe(
    kernel: &PayoffKernel,
    sample_count: usize,
    seed: u64,
) -> Result<ProbeReport, GameError> {
    kernel.validate()?;
    if sample_count < 2 {
        return Err(GameError::SampleCountTooSmall(sample_count));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unit = move || (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    let base: Vec<f64> = (0..sample_count).map(|_| unit()).collect();

    let mut bound: f64 = 0.0;
    let cross = base.len().min(64);
    for i in 0..cross {
        for j in 0..cross {
            bound = bound.max(kernel.eval(base[i], base[j]).abs());
        }
    }
    for &s in &base {
        bound = bound.max(kernel.eval(s, s).abs());
    }

    let mut lip_coarse: f64 = 0.0;
    let mut lip_fine: f64 = 0.0;
    for &s in &base {
        for &sep in &PROBE_SEPS {
            let t = if s + sep <= 1.0 { s + sep } else { s - sep };
            let u = unit();
            for target in [s, t, u] {
                let quot = (kernel.eval(s, target) - kernel.eval(t, target)).abs() / sep;
                lip_fine = lip_fine.max(quot);
                if sep >= 1e-3 {
                    lip_coarse = lip_coarse.max(quot);
                }
            }
        }
    }

    let grid = grid_points(PROBE_GRID, GridPlacement::Endpoints).expect("fixed probe grid");
    let disc = kernel.discretize(&grid);
    let mut simplex = move || {
        let mut v: Vec<f64> = (0..PROBE_GRID).map(|_| -(1.0 - unit()).ln()).collect();
        let s: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= s);
        v
    };
    let mut lip_measure: f64 = 0.0;
    for _ in 0..sample_count.min(128) {
        let (ta, tb) = (simplex(), simplex());
        let ma = DiscreteMeasure::from_support_weights(&grid, &ta).expect("probe measure");
        let mb = DiscreteMeasure::from_support_weights(&grid, &tb).expect("probe measure");
        let d = bl_distance(&ma, &mb).distance;
        if d <= 1e-15 {
            continue;
        }
        let (fa, fb) = (disc.apply(&ta), disc.apply(&tb));
        let sup = fa
            .iter()
            .zip(&fb)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        lip_measure = lip_measure.max(sup / d);
    }

    Ok(ProbeReport {
        bound_estimate: bound,
        lip_s_estimate: lip_fine,
        lip_s_coarse: lip_coarse,
        lip_s_fine: lip_fine,
        lip_measure_estimate: lip_measure,
        diverging: lip_fine > 0.0 && lip_fine >= DIVERGENCE_RATIO * lip_coarse,
    })
}
