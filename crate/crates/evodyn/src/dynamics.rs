//! Mean-dynamics right-hand side and simplex-constrained integration.
//!
//! The finite approximation evolves a weight vector `x` on the probability
//! simplex: component `i` gains mass at rate
//! `lambda_i * sum_j phi(j, i, x) x_j` and loses it at rate
//! `x_i * sum_j phi(i, j, x) lambda_j`, where `phi` is the revision
//! protocol evaluated at the discretized payoffs. For the replicator the
//! reference measure is the state itself and the sum collapses to the
//! classical form `x_i (rho_i - x . rho)`, which is what [`MeanDynamics`]
//! evaluates on that path; [`rhs_mean_dynamics`] keeps the literal
//! inflow-minus-outflow double sum as an independent reference route.
//!
//! Trajectories are emitted on a fixed shared grid so sup-over-time
//! statistics are comparable across resolutions and integrators. Both
//! integrators step exactly onto each emission time; no dense-output
//! interpolation is involved.

use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::games::{DiscretizedKernel, GameError, PayoffKernel};
use crate::measures::DiscreteMeasure;
use crate::protocols::{switch_rate, ProtocolError, ReferenceMode, RevisionProtocol};
use crate::util::{comp_sum, dot};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid integrator config: {0}")]
    InvalidConfig(String),
    #[error(
        "state-coupled protocol called with lambda != x (component {index} differs by {diff:e})"
    )]
    ContractViolation { index: usize, diff: f64 },
    #[error("fixed-reference protocol requires lambda0")]
    MissingLambda,
    #[error("non-finite state or velocity at t = {t}")]
    NonFinite { t: f64 },
    #[error("adaptive step size underflow at t = {t} (dt = {dt:e})")]
    StepUnderflow { t: f64, dt: f64 },
    #[error("negative component {value:e} below the clip tolerance at t = {t}")]
    MassClip { t: f64, value: f64 },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// Weight vector on the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimplexState {
    weights: Vec<f64>,
}

/// Component floor tolerated on construction.
pub const STATE_FLOOR: f64 = -1e-12;
/// Allowed total-mass deviation on construction.
pub const STATE_MASS_TOL: f64 = 1e-9;

impl SimplexState {
    pub fn new(weights: Vec<f64>) -> Result<Self, DynamicsError> {
        if weights.is_empty() {
            return Err(DynamicsError::InvalidState("empty state".into()));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(DynamicsError::InvalidState(format!(
                    "non-finite weight at index {i}"
                )));
            }
            if w < STATE_FLOOR {
                return Err(DynamicsError::InvalidState(format!(
                    "weight {w:e} at index {i} below floor"
                )));
            }
        }
        let sum = comp_sum(&weights);
        if (sum - 1.0).abs() > STATE_MASS_TOL {
            return Err(DynamicsError::InvalidState(format!(
                "weights sum to {sum}, not 1"
            )));
        }
        Ok(Self { weights })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase", deny_unknown_fields)]
pub enum IntegratorMethod {
    /// Classic fixed-step fourth-order Runge-Kutta. Each emission interval
    /// is covered by equal substeps of length at most `dt`.
    Rk4 { dt: f64 },
    /// Dormand-Prince 5(4) with standard step control.
    Rk45 {
        rel_tol: f64,
        abs_tol: f64,
        dt_max: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: IntegratorMethod,
    pub t_end: f64,
    /// Renormalize every this many accepted steps (and at every emission).
    pub renorm_every: usize,
    /// Components in `[-negative_clip, 0)` are clipped to zero at
    /// renormalization; anything below aborts the run.
    pub negative_clip: f64,
    /// Number of equal emission intervals on `[0, t_end]`.
    pub emit_intervals: usize,
}

impl IntegratorConfig {
    /// Adaptive defaults: rel 1e-8, abs 1e-10, dt_max 0.1.
    pub fn rk45_default(t_end: f64) -> Self {
        Self {
            method: IntegratorMethod::Rk45 {
                rel_tol: 1e-8,
                abs_tol: 1e-10,
                dt_max: 0.1,
            },
            t_end,
            renorm_every: 16,
            negative_clip: 1e-12,
            emit_intervals: 200,
        }
    }

    pub fn rk4(t_end: f64, dt: f64) -> Self {
        Self {
            method: IntegratorMethod::Rk4 { dt },
            t_end,
            renorm_every: 16,
            negative_clip: 1e-12,
            emit_intervals: 200,
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |msg: String| Err(DynamicsError::InvalidConfig(msg));
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        match self.method {
            IntegratorMethod::Rk4 { dt } => {
                if !(dt > 0.0 && dt.is_finite()) {
                    return bad(format!("dt must be positive, got {dt}"));
                }
            }
            IntegratorMethod::Rk45 {
                rel_tol,
                abs_tol,
                dt_max,
            } => {
                for (name, v) in [("rel_tol", rel_tol), ("abs_tol", abs_tol), ("dt_max", dt_max)] {
                    if !(v > 0.0 && v.is_finite()) {
                        return bad(format!("{name} must be positive, got {v}"));
                    }
                }
            }
        }
        if self.renorm_every == 0 {
            return bad("renorm_every must be >= 1".into());
        }
        if self.emit_intervals == 0 {
            return bad("emit_intervals must be >= 1".into());
        }
        if !(self.negative_clip > 0.0) {
            return bad("negative_clip must be positive".into());
        }
        Ok(())
    }
}

/// Time-stamped states of one integration at a fixed resolution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub support: Vec<f64>,
    pub times: Vec<f64>,
    pub states: Vec<SimplexState>,
    pub config_fingerprint: String,
    /// Largest `|sum x - 1|` observed before a renormalization.
    pub max_mass_drift: f64,
    pub steps_accepted: u64,
    pub steps_rejected: u64,
}

impl Trajectory {
    pub fn final_state(&self) -> &SimplexState {
        self.states.last().expect("trajectory has states")
    }

    pub fn measure_at(&self, idx: usize) -> DiscreteMeasure {
        DiscreteMeasure::from_support_weights(&self.support, self.states[idx].weights())
            .expect("trajectory state is a valid measure")
    }

    /// CSV with header `t,<support points>` and one row per emission time;
    /// weights carry 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        write!(out, "t")?;
        for s in &self.support {
            write!(out, ",{s}")?;
        }
        writeln!(out)?;
        for (t, state) in self.times.iter().zip(&self.states) {
            write!(out, "{t:.16e}")?;
            for w in state.weights() {
                write!(out, ",{w:.16e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Discretized mean dynamics on a fixed support: owns the payoff matrix,
/// the protocol, and the fixed reference weights when the protocol needs
/// them.
pub struct MeanDynamics {
    protocol: RevisionProtocol,
    discretized: DiscretizedKernel,
    lambda: Option<Vec<f64>>,
    n: usize,
    rho: Vec<f64>,
}

impl MeanDynamics {
    pub fn new(
        kernel: &PayoffKernel,
        protocol: RevisionProtocol,
        support: &[f64],
        lambda0: Option<&[f64]>,
    ) -> Result<Self, DynamicsError> {
        kernel.validate()?;
        let n = support.len();
        if n == 0 {
            return Err(DynamicsError::InvalidState("empty support".into()));
        }
        for w in support.windows(2) {
            if !(w[1] > w[0]) {
                return Err(DynamicsError::InvalidState(
                    "support must be strictly increasing".into(),
                ));
            }
        }
        if !(0.0..=1.0).contains(&support[0]) || !(0.0..=1.0).contains(&support[n - 1]) {
            return Err(DynamicsError::InvalidState(
                "support must lie within [0, 1]".into(),
            ));
        }
        let lambda = match protocol.reference_mode() {
            ReferenceMode::StateCoupled => None,
            ReferenceMode::Fixed => {
                let lam = lambda0.ok_or(DynamicsError::MissingLambda)?;
                if lam.len() != n {
                    return Err(DynamicsError::LengthMismatch(format!(
                        "lambda has {} entries for support of {}",
                        lam.len(),
                        n
                    )));
                }
                crate::games::check_simplex(lam, 1e-9)
                    .map_err(|_| DynamicsError::InvalidState("lambda not on the simplex".into()))?;
                Some(lam.to_vec())
            }
        };
        Ok(Self {
            protocol,
            discretized: kernel.discretize(support),
            lambda,
            n,
            rho: vec![0.0; n],
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn protocol(&self) -> RevisionProtocol {
        self.protocol
    }

    /// Velocity of the weight vector at state `x`.
    pub fn rhs_into(&mut self, x: &[f64], v: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        self.discretized.apply_into(x, &mut self.rho);
        rhs_from_rho(self.protocol, x, self.lambda.as_deref(), &self.rho, v);
    }

    pub fn rhs(&mut self, x: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.n];
        self.rhs_into(x, &mut v);
        v
    }

    /// Largest switch rate over all ordered strategy pairs at state `x`.
    pub fn max_switch_rate(&mut self, x: &[f64]) -> f64 {
        self.discretized.apply_into(x, &mut self.rho);
        let rho = &self.rho;
        match self.protocol {
            RevisionProtocol::Replicator | RevisionProtocol::SmithPairwise => {
                let max = rho.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                let min = rho.iter().fold(f64::INFINITY, |a, &b| a.min(b));
                (max - min).max(0.0)
            }
            RevisionProtocol::Bnn => {
                let mean = dot(x, rho);
                rho.iter().map(|r| (r - mean).max(0.0)).fold(0.0, f64::max)
            }
        }
    }
}

/// Protocol-specialized velocity given precomputed payoffs. Constant payoff
/// vectors short-circuit to the exact zero field (no payoff differences
/// means no switching).
fn rhs_from_rho(
    protocol: RevisionProtocol,
    x: &[f64],
    lambda: Option<&[f64]>,
    rho: &[f64],
    v: &mut [f64],
) {
    let n = x.len();
    if rho.windows(2).all(|w| w[0] == w[1]) {
        v.fill(0.0);
        return;
    }
    match protocol {
        RevisionProtocol::Replicator => {
            let mean = dot(x, rho);
            for i in 0..n {
                v[i] = x[i] * (rho[i] - mean);
            }
        }
        RevisionProtocol::Bnn => {
            let lambda = lambda.expect("fixed protocol carries lambda");
            let mean = dot(x, rho);
            let sx: f64 = x.iter().sum();
            let mut outflow = 0.0;
            for j in 0..n {
                outflow += lambda[j] * (rho[j] - mean).max(0.0);
            }
            for i in 0..n {
                v[i] = lambda[i] * (rho[i] - mean).max(0.0) * sx - x[i] * outflow;
            }
        }
        RevisionProtocol::SmithPairwise => {
            let lambda = lambda.expect("fixed protocol carries lambda");
            for i in 0..n {
                let mut inflow = 0.0;
                let mut outflow = 0.0;
                for j in 0..n {
                    inflow += (rho[i] - rho[j]).max(0.0) * x[j];
                    outflow += (rho[j] - rho[i]).max(0.0) * lambda[j];
                }
                v[i] = lambda[i] * inflow - x[i] * outflow;
            }
        }
    }
}

/// Velocity of the finite mean dynamics at state `x` with payoffs `rho`.
///
/// For state-coupled protocols the caller must pass `lambda_weights`
/// componentwise equal to `x` (within 1e-12); the evaluation then uses the
/// state-substituted closed form.
pub fn rhs(
    x: &SimplexState,
    lambda_weights: &[f64],
    protocol: RevisionProtocol,
    rho: &[f64],
) -> Result<Vec<f64>, DynamicsError> {
    let xs = x.weights();
    let n = xs.len();
    if lambda_weights.len() != n || rho.len() != n {
        return Err(DynamicsError::LengthMismatch(format!(
            "x: {n}, lambda: {}, rho: {}",
            lambda_weights.len(),
            rho.len()
        )));
    }
    let lambda = match protocol.reference_mode() {
        ReferenceMode::StateCoupled => {
            for (i, (&l, &xi)) in lambda_weights.iter().zip(xs).enumerate() {
                let diff = (l - xi).abs();
                if diff > 1e-12 {
                    return Err(DynamicsError::ContractViolation { index: i, diff });
                }
            }
            None
        }
        ReferenceMode::Fixed => Some(lambda_weights),
    };
    let mut v = vec![0.0; n];
    rhs_from_rho(protocol, xs, lambda, rho, &mut v);
    Ok(v)
}

/// Literal inflow-minus-outflow evaluation through [`switch_rate`]:
/// `v_i = lambda_i sum_j phi(j,i) x_j - x_i sum_j phi(i,j) lambda_j`.
///
/// Reference route for testing the specialized paths; quadratic in the
/// number of strategies with a full rate query per pair.
pub fn rhs_mean_dynamics(
    x: &[f64],
    lambda: &[f64],
    protocol: RevisionProtocol,
    rho: &[f64],
) -> Result<Vec<f64>, DynamicsError> {
    let n = x.len();
    if lambda.len() != n || rho.len() != n {
        return Err(DynamicsError::LengthMismatch(format!(
            "x: {n}, lambda: {}, rho: {}",
            lambda.len(),
            rho.len()
        )));
    }
    let mut v = vec![0.0; n];
    for i in 0..n {
        let mut inflow = 0.0;
        let mut outflow = 0.0;
        for j in 0..n {
            inflow += switch_rate(protocol, j, i, x, rho)? * x[j];
            outflow += switch_rate(protocol, i, j, x, rho)? * lambda[j];
        }
        v[i] = lambda[i] * inflow - x[i] * outflow;
    }
    Ok(v)
}

/// Integrate the mean dynamics from `x0` to `cfg.t_end`, emitting on the
/// shared grid. `lambda0` is required for fixed-reference protocols and
/// ignored for state-coupled ones.
pub fn integrate(
    kernel: &PayoffKernel,
    protocol: RevisionProtocol,
    support: &[f64],
    x0: &SimplexState,
    lambda0: Option<&[f64]>,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, DynamicsError> {
    let fingerprint = integration_fingerprint(kernel, protocol, support, x0, lambda0, cfg);
    let mut dynamics = MeanDynamics::new(kernel, protocol, support, lambda0)?;
    integrate_dynamics(&mut dynamics, support, x0, cfg, fingerprint)
}

/// Emission grid: `intervals + 1` equispaced times on `[0, t_end]`.
pub fn emission_times(t_end: f64, intervals: usize) -> Vec<f64> {
    (0..=intervals)
        .map(|k| {
            if k == intervals {
                t_end
            } else {
                k as f64 * t_end / intervals as f64
            }
        })
        .collect()
}

pub(crate) fn integrate_dynamics(
    dynamics: &mut MeanDynamics,
    support: &[f64],
    x0: &SimplexState,
    cfg: &IntegratorConfig,
    config_fingerprint: String,
) -> Result<Trajectory, DynamicsError> {
    cfg.validate()?;
    if x0.len() != dynamics.len() {
        return Err(DynamicsError::LengthMismatch(format!(
            "x0 has {} entries for support of {}",
            x0.len(),
            dynamics.len()
        )));
    }

    let times = emission_times(cfg.t_end, cfg.emit_intervals);
    let mut x = x0.weights().to_vec();
    let mut stepper = Stepper::new(cfg, dynamics.len());
    let mut out = Trajectory {
        support: support.to_vec(),
        times: times.clone(),
        states: Vec::with_capacity(times.len()),
        config_fingerprint,
        max_mass_drift: 0.0,
        steps_accepted: 0,
        steps_rejected: 0,
    };

    stepper.renormalize(&mut x, 0.0, cfg, &mut out.max_mass_drift)?;
    out.states.push(SimplexState { weights: x.clone() });

    for w in times.windows(2) {
        let (ta, tb) = (w[0], w[1]);
        stepper.advance(dynamics, &mut x, ta, tb, cfg, &mut out)?;
        stepper.renormalize(&mut x, tb, cfg, &mut out.max_mass_drift)?;
        out.states.push(SimplexState { weights: x.clone() });
    }
    Ok(out)
}

/// Dormand-Prince 5(4) tableau.
const DP_A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Stepper {
    k: Vec<Vec<f64>>,
    stage: Vec<f64>,
    y_new: Vec<f64>,
    dt: f64,
    accepted_since_renorm: usize,
}

impl Stepper {
    fn new(cfg: &IntegratorConfig, n: usize) -> Self {
        let dt = match cfg.method {
            IntegratorMethod::Rk4 { dt } => dt,
            IntegratorMethod::Rk45 { dt_max, .. } => {
                dt_max.min(cfg.t_end / cfg.emit_intervals as f64)
            }
        };
        Self {
            k: vec![vec![0.0; n]; 7],
            stage: vec![0.0; n],
            y_new: vec![0.0; n],
            dt,
            accepted_since_renorm: 0,
        }
    }

    fn advance(
        &mut self,
        dynamics: &mut MeanDynamics,
        x: &mut Vec<f64>,
        ta: f64,
        tb: f64,
        cfg: &IntegratorConfig,
        out: &mut Trajectory,
    ) -> Result<(), DynamicsError> {
        match cfg.method {
            IntegratorMethod::Rk4 { dt } => {
                let span = tb - ta;
                let substeps = (span / dt - 1e-12).ceil().max(1.0) as usize;
                let h = span / substeps as f64;
                for s in 0..substeps {
                    self.rk4_step(dynamics, x, h);
                    let t = ta + (s + 1) as f64 * h;
                    self.after_accept(x, t, cfg, out)?;
                }
            }
            IntegratorMethod::Rk45 {
                rel_tol,
                abs_tol,
                dt_max,
            } => {
                let mut t = ta;
                while t < tb {
                    let mut h = self.dt.min(dt_max);
                    let landing = tb - t <= h;
                    if landing {
                        h = tb - t;
                    }
                    if h < 1e-12 * cfg.t_end {
                        return Err(DynamicsError::StepUnderflow { t, dt: h });
                    }
                    let err = self.rk45_attempt(dynamics, x, h, rel_tol, abs_tol);
                    if !err.is_finite() {
                        return Err(DynamicsError::NonFinite { t });
                    }
                    let factor = (0.9 * err.powf(-0.2)).clamp(0.2, 10.0);
                    if err <= 1.0 {
                        x.copy_from_slice(&self.y_new);
                        if landing {
                            t = tb;
                        } else {
                            t += h;
                            self.dt = (h * factor).min(dt_max);
                        }
                        self.after_accept(x, t, cfg, out)?;
                    } else {
                        out.steps_rejected += 1;
                        self.dt = h * factor.min(0.9);
                    }
                }
            }
        }
        Ok(())
    }

    fn after_accept(
        &mut self,
        x: &mut [f64],
        t: f64,
        cfg: &IntegratorConfig,
        out: &mut Trajectory,
    ) -> Result<(), DynamicsError> {
        out.steps_accepted += 1;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(DynamicsError::NonFinite { t });
        }
        self.accepted_since_renorm += 1;
        if self.accepted_since_renorm >= cfg.renorm_every {
            self.renormalize(x, t, cfg, &mut out.max_mass_drift)?;
        }
        Ok(())
    }

    /// Clip tiny negatives (aborting on large ones), then rescale to unit
    /// mass. Records the pre-correction drift.
    fn renormalize(
        &mut self,
        x: &mut [f64],
        t: f64,
        cfg: &IntegratorConfig,
        max_drift: &mut f64,
    ) -> Result<(), DynamicsError> {
        self.accepted_since_renorm = 0;
        let drift = (comp_sum(x) - 1.0).abs();
        if drift > *max_drift {
            *max_drift = drift;
        }
        for v in x.iter_mut() {
            if *v < 0.0 {
                if *v < -cfg.negative_clip {
                    return Err(DynamicsError::MassClip { t, value: *v });
                }
                *v = 0.0;
            }
        }
        let sum = comp_sum(x);
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(DynamicsError::NonFinite { t });
        }
        for v in x.iter_mut() {
            *v /= sum;
        }
        Ok(())
    }

    fn rk4_step(&mut self, dynamics: &mut MeanDynamics, x: &mut [f64], h: f64) {
        let n = x.len();
        let stage = &mut self.stage;
        let (k1, rest) = self.k.split_at_mut(1);
        let (k2, rest) = rest.split_at_mut(1);
        let (k3, k4) = rest.split_at_mut(1);
        dynamics.rhs_into(x, &mut k1[0]);
        for i in 0..n {
            stage[i] = x[i] + 0.5 * h * k1[0][i];
        }
        dynamics.rhs_into(stage, &mut k2[0]);
        for i in 0..n {
            stage[i] = x[i] + 0.5 * h * k2[0][i];
        }
        dynamics.rhs_into(stage, &mut k3[0]);
        for i in 0..n {
            stage[i] = x[i] + h * k3[0][i];
        }
        dynamics.rhs_into(stage, &mut k4[0]);
        for i in 0..n {
            x[i] += h / 6.0 * (k1[0][i] + 2.0 * k2[0][i] + 2.0 * k3[0][i] + k4[0][i]);
        }
    }

    /// One trial step; fills `y_new` and returns the scaled error norm.
    fn rk45_attempt(
        &mut self,
        dynamics: &mut MeanDynamics,
        x: &[f64],
        h: f64,
        rel_tol: f64,
        abs_tol: f64,
    ) -> f64 {
        let n = x.len();
        for s in 0..7 {
            for i in 0..n {
                let mut acc = x[i];
                for (j, kj) in self.k[..s].iter().enumerate() {
                    acc += h * DP_A[s][j] * kj[i];
                }
                self.stage[i] = acc;
            }
            let (_, rest) = self.k.split_at_mut(s);
            dynamics.rhs_into(&self.stage, &mut rest[0]);
        }
        let mut err_sq = 0.0;
        for i in 0..n {
            let mut y = x[i];
            let mut e = 0.0;
            for s in 0..7 {
                y += h * DP_B[s] * self.k[s][i];
                e += h * DP_E[s] * self.k[s][i];
            }
            self.y_new[i] = y;
            let scale = abs_tol + rel_tol * x[i].abs().max(y.abs());
            err_sq += (e / scale) * (e / scale);
        }
        (err_sq / n as f64).sqrt()
    }
}

fn integration_fingerprint(
    kernel: &PayoffKernel,
    protocol: RevisionProtocol,
    support: &[f64],
    x0: &SimplexState,
    lambda0: Option<&[f64]>,
    cfg: &IntegratorConfig,
) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(kernel).expect("kernel serializes"));
    h.update(serde_json::to_vec(&protocol).expect("protocol serializes"));
    for part in [Some(support), Some(x0.weights()), lambda0] {
        match part {
            Some(values) => {
                h.update((values.len() as u64).to_le_bytes());
                for v in values {
                    h.update(v.to_bits().to_le_bytes());
                }
            }
            None => h.update(u64::MAX.to_le_bytes()),
        }
    }
    h.update(serde_json::to_vec(cfg).expect("config serializes"));
    hex::encode(h.finalize())
}
