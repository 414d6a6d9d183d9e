//! Bounded-Lipschitz (Dudley) distance between discrete measures, plus the
//! `l1` distance between simplex weight vectors.
//!
//! For measures supported on a line the dual program
//!
//! ```text
//! maximize   sum_i c_i g_i          c_i = mu({u_i}) - nu({u_i})
//! subject to |g_i| <= 1,  |g_{i+1} - g_i| <= u_{i+1} - u_i
//! ```
//!
//! needs only adjacent-pair Lipschitz constraints: the full pairwise set is
//! implied by the chain once the union support is sorted. That makes the
//! feasible set an interval-constrained chain, which we solve exactly by
//! backward dynamic programming over concave piecewise-linear value
//! functions, then recover an optimal witness by a forward pass through the
//! stored per-stage maximizer intervals. Cost is linear in the support size
//! per stage and the witness is exact up to floating-point rounding.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::{DiscreteMeasure, MERGE_TOL};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("state length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverStatus {
    Optimal,
    /// The measures were identical; the distance short-circuits to zero and
    /// the all-zero witness is reported (the optimum is non-unique there).
    Degenerate,
}

/// Outcome of a bounded-Lipschitz evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlResult {
    pub distance: f64,
    /// Optimal test function values, one per union-support point.
    pub witness: Vec<f64>,
    /// Union support the witness lives on.
    pub support: Vec<f64>,
    pub solver_status: SolverStatus,
}

/// Bounded-Lipschitz distance `sup { |∫g dmu - ∫g dnu| : |g| <= 1, Lip(g) <= 1 }`.
pub fn bl_distance(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> BlResult {
    let (support, c) = union_signed(mu, nu);
    if support.len() == 1 || c.iter().all(|&x| x == 0.0) {
        return BlResult {
            distance: 0.0,
            witness: vec![0.0; support.len()],
            support,
            solver_status: SolverStatus::Degenerate,
        };
    }
    let (distance, witness) = solve_chain_lp(&support, &c);
    BlResult {
        distance,
        witness,
        support,
        solver_status: SolverStatus::Optimal,
    }
}

/// `sum_i |x_i - y_i|`, the norm used for cross-resolution state comparison.
pub fn l1_state_distance(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch(x.len(), y.len()));
    }
    Ok(x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum())
}

/// Union support with signed weight differences, merging points within
/// [`MERGE_TOL`].
fn union_signed(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> (Vec<f64>, Vec<f64>) {
    let (pa, wa) = (mu.points(), mu.weights());
    let (pb, wb) = (nu.points(), nu.weights());
    let mut points = Vec::with_capacity(pa.len() + pb.len());
    let mut c = Vec::with_capacity(pa.len() + pb.len());
    let (mut i, mut j) = (0, 0);
    let push = |points: &mut Vec<f64>, c: &mut Vec<f64>, p: f64, w: f64| {
        if let Some(&last) = points.last() {
            if p - last <= MERGE_TOL {
                *c.last_mut().unwrap() += w;
                return;
            }
        }
        points.push(p);
        c.push(w);
    };
    while i < pa.len() || j < pb.len() {
        let take_a = j == pb.len() || (i < pa.len() && pa[i] <= pb[j]);
        if take_a {
            push(&mut points, &mut c, pa[i], wa[i]);
            i += 1;
        } else {
            push(&mut points, &mut c, pb[j], -wb[j]);
            j += 1;
        }
    }
    (points, c)
}

/// Concave piecewise-linear function on `[-1, 1]`, stored as breakpoints
/// with ascending abscissae; linear between, endpoints at -1 and 1.
#[derive(Debug, Clone)]
struct ConcavePl {
    pts: Vec<(f64, f64)>,
}

impl ConcavePl {
    fn linear(slope: f64) -> Self {
        Self {
            pts: vec![(-1.0, -slope), (1.0, slope)],
        }
    }

    fn add_linear(&mut self, slope: f64) {
        for (x, v) in &mut self.pts {
            *v += slope * *x;
        }
    }

    /// Maximum value and the interval of abscissae attaining it.
    fn max_interval(&self) -> (f64, f64, f64) {
        let vmax = self
            .pts
            .iter()
            .map(|&(_, v)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        let lo = self.pts.iter().find(|&&(_, v)| v == vmax).unwrap().0;
        let hi = self.pts.iter().rev().find(|&&(_, v)| v == vmax).unwrap().0;
        (vmax, lo, hi)
    }

    fn eval(pts: &[(f64, f64)], x: f64) -> f64 {
        debug_assert!(x >= pts[0].0 && x <= pts[pts.len() - 1].0);
        let k = pts.partition_point(|&(px, _)| px < x);
        if k == 0 {
            return pts[0].1;
        }
        let (x0, v0) = pts[k - 1];
        if k == pts.len() || x == x0 {
            return v0;
        }
        let (x1, v1) = pts[k];
        if x1 == x0 {
            return v0.max(v1);
        }
        v0 + (v1 - v0) * (x - x0) / (x1 - x0)
    }

    /// Sliding-window maximum `W(y) = max { V(g) : |g - y| <= delta, |g| <= 1 }`,
    /// restricted back to `y` in `[-1, 1]`. For concave `V` this keeps the
    /// rising part shifted left, a flat plateau around the maximizer, and
    /// the falling part shifted right.
    fn slide_max(&self, delta: f64) -> Self {
        debug_assert!(delta > 0.0);
        let (vmax, mlo, mhi) = self.max_interval();
        let mut ext: Vec<(f64, f64)> = Vec::with_capacity(self.pts.len() + 2);
        for &(x, v) in self.pts.iter().filter(|&&(x, _)| x < mlo) {
            ext.push((x - delta, v));
        }
        ext.push((mlo - delta, vmax));
        ext.push((mhi + delta, vmax));
        for &(x, v) in self.pts.iter().filter(|&&(x, _)| x > mhi) {
            ext.push((x + delta, v));
        }

        let mut pts: Vec<(f64, f64)> = Vec::with_capacity(ext.len());
        pts.push((-1.0, Self::eval(&ext, -1.0)));
        for &(x, v) in ext.iter().filter(|&&(x, _)| x > -1.0 && x < 1.0) {
            // Drop interior breakpoints collinear with the previous segment.
            if let [.., (xa, va), (xb, vb)] = pts[..] {
                if ((vb - va) * (x - xb) - (v - vb) * (xb - xa)) == 0.0 {
                    pts.pop();
                }
            }
            pts.push((x, v));
        }
        pts.push((1.0, Self::eval(&ext, 1.0)));
        Self { pts }
    }
}

/// Maximize `c . g` over the chain polytope. Returns the optimum and an
/// optimal witness.
fn solve_chain_lp(support: &[f64], c: &[f64]) -> (f64, Vec<f64>) {
    let k = support.len();
    debug_assert!(k >= 2);

    // Backward pass: value[i](g) = best objective over g_i..g_{k-1} given
    // g_i = g. Only the per-stage maximizer intervals are kept for the
    // forward witness recovery.
    let mut maximizers = vec![(0.0, 0.0); k];
    let mut value = ConcavePl::linear(c[k - 1]);
    {
        let (_, lo, hi) = value.max_interval();
        maximizers[k - 1] = (lo, hi);
    }
    for i in (0..k - 1).rev() {
        let delta = support[i + 1] - support[i];
        let mut next = value.slide_max(delta);
        next.add_linear(c[i]);
        let (_, lo, hi) = next.max_interval();
        maximizers[i] = (lo, hi);
        value = next;
    }
    let (optimum, _, _) = value.max_interval();

    // Forward pass: take the minimal-magnitude optimizer at the first
    // stage, then follow the window clamped toward each stage's maximizer.
    let mut witness = vec![0.0; k];
    witness[0] = maximizers[0].0.max(maximizers[0].1.min(0.0));
    for i in 1..k {
        let delta = support[i] - support[i - 1];
        let prev = witness[i - 1];
        let (w_lo, w_hi) = ((prev - delta).max(-1.0), (prev + delta).min(1.0));
        let (m_lo, m_hi) = maximizers[i];
        witness[i] = if w_hi < m_lo {
            w_hi
        } else if w_lo > m_hi {
            w_lo
        } else {
            prev.clamp(m_lo, m_hi)
        };
    }

    (optimum.max(0.0), witness)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::make_grid_measure;
    use crate::measures::GridPlacement::*;
    use proptest::prelude::*;

    fn dirac(p: f64) -> DiscreteMeasure {
        DiscreteMeasure::dirac(p).unwrap()
    }

    fn check_witness(r: &BlResult, mu: &DiscreteMeasure, nu: &DiscreteMeasure) {
        let (support, c) = union_signed(mu, nu);
        assert_eq!(support, r.support);
        let mut obj = 0.0;
        for i in 0..support.len() {
            assert!(r.witness[i].abs() <= 1.0 + 1e-9, "witness out of box");
            obj += c[i] * r.witness[i];
        }
        for i in 1..support.len() {
            let lip = (r.witness[i] - r.witness[i - 1]).abs();
            assert!(
                lip <= support[i] - support[i - 1] + 1e-9,
                "witness violates Lipschitz chain"
            );
        }
        assert!(
            (obj - r.distance).abs() <= 1e-9,
            "witness objective {} != distance {}",
            obj,
            r.distance
        );
    }

    #[test]
    fn identical_measures_short_circuit() {
        let m = dirac(0.3);
        let r = bl_distance(&m, &m);
        assert_eq!(r.distance, 0.0);
        assert_eq!(r.solver_status, SolverStatus::Degenerate);
        let g = make_grid_measure(17, Midpoints).unwrap();
        assert_eq!(bl_distance(&g, &g).distance, 0.0);
    }

    #[test]
    fn dirac_pairs_match_closed_form() {
        let r = bl_distance(&dirac(0.0), &dirac(1.0));
        assert!((r.distance - 1.0).abs() <= 1e-9);
        check_witness(&r, &dirac(0.0), &dirac(1.0));
        let r = bl_distance(&dirac(0.2), &dirac(0.7));
        assert!((r.distance - 0.5).abs() <= 1e-9);
    }

    #[test]
    fn two_point_uniform_vs_dirac() {
        let mu = DiscreteMeasure::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        let nu = dirac(0.0);
        let r = bl_distance(&mu, &nu);
        assert!((r.distance - 0.5).abs() <= 1e-9);
        check_witness(&r, &mu, &nu);
    }

    #[test]
    fn random_dirac_pairs_closed_form() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let (a, b) = (rng.gen::<f64>(), rng.gen::<f64>());
            let r = bl_distance(&dirac(a), &dirac(b));
            let expect = (a - b).abs().min(2.0);
            assert!(
                (r.distance - expect).abs() <= 1e-9,
                "d({a},{b}) = {} expected {expect}",
                r.distance
            );
        }
    }

    #[test]
    fn l1_examples() {
        let x = vec![0.2, 0.3, 0.5];
        assert_eq!(l1_state_distance(&x, &x).unwrap(), 0.0);
        assert_eq!(l1_state_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 2.0);
        assert_eq!(
            l1_state_distance(&x, &[0.1]),
            Err(MetricError::LengthMismatch(3, 1))
        );
    }

    #[test]
    fn l1_of_split_family_initial_state_is_epsilon() {
        // Blocks at 1/n +- eps/(2m) against the uniform vector.
        for &n in &[25usize, 50, 100, 200, 400] {
            let eps = 0.5;
            let m = (eps * n as f64 / 2.0).ceil() as usize;
            let delta = eps / (2.0 * m as f64);
            let base = 1.0 / n as f64;
            let mut x0 = vec![base; n];
            for i in 0..m {
                x0[i] = base + delta;
                x0[m + i] = base - delta;
            }
            let uniform = vec![base; n];
            let d = l1_state_distance(&x0, &uniform).unwrap();
            assert!((d - eps).abs() <= 1e-12, "n={n}: {d}");
        }
    }

    #[test]
    fn distance_bounded_by_matched_support_l1() {
        let s = vec![0.1, 0.4, 0.8];
        let mu = DiscreteMeasure::new(s.clone(), vec![0.6, 0.3, 0.1]).unwrap();
        let nu = DiscreteMeasure::new(s, vec![0.1, 0.2, 0.7]).unwrap();
        let r = bl_distance(&mu, &nu);
        let l1: f64 = mu
            .weights()
            .iter()
            .zip(nu.weights())
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(r.distance <= l1 + 1e-12);
        check_witness(&r, &mu, &nu);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn metric_axioms(
            pa in proptest::collection::vec(0.0..=1.0f64, 1..8),
            wa in proptest::collection::vec(0.01..1.0f64, 8),
            pb in proptest::collection::vec(0.0..=1.0f64, 1..8),
            wb in proptest::collection::vec(0.01..1.0f64, 8),
            pc in proptest::collection::vec(0.0..=1.0f64, 1..8),
            wc in proptest::collection::vec(0.01..1.0f64, 8),
        ) {
            let mk = |p: &[f64], w: &[f64]| {
                DiscreteMeasure::new(p.to_vec(), w[..p.len()].to_vec()).unwrap()
            };
            let (mu, nu, eta) = (mk(&pa, &wa), mk(&pb, &wb), mk(&pc, &wc));
            let dmn = bl_distance(&mu, &nu);
            let dnm = bl_distance(&nu, &mu);
            let dme = bl_distance(&mu, &eta);
            let den = bl_distance(&eta, &nu);
            prop_assert!((dmn.distance - dnm.distance).abs() <= 1e-9);
            prop_assert!(dmn.distance <= dme.distance + den.distance + 1e-9);
            prop_assert!(bl_distance(&mu, &mu).distance == 0.0);
            prop_assert!(dmn.distance <= 2.0);
            check_witness(&dmn, &mu, &nu);
        }

        #[test]
        fn shrinking_supports_never_increases_distance(
            pa in proptest::collection::vec(0.0..=1.0f64, 1..8),
            wa in proptest::collection::vec(0.01..1.0f64, 8),
            pb in proptest::collection::vec(0.0..=1.0f64, 1..8),
            wb in proptest::collection::vec(0.01..1.0f64, 8),
            alpha in 0.05..0.95f64,
        ) {
            let mk = |p: &[f64], w: &[f64]| {
                DiscreteMeasure::new(p.to_vec(), w[..p.len()].to_vec()).unwrap()
            };
            let scale = |p: &[f64]| p.iter().map(|x| alpha * x).collect::<Vec<_>>();
            let d_full = bl_distance(&mk(&pa, &wa), &mk(&pb, &wb)).distance;
            let d_shrunk = bl_distance(&mk(&scale(&pa), &wa), &mk(&scale(&pb), &wb)).distance;
            prop_assert!(d_shrunk <= d_full + 1e-9);
        }
    }
}
