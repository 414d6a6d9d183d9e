//! Revision protocols: the switch-rate rules driving the mean dynamics.
//!
//! All three shipped protocols are `max{0, .}` forms, so every rate is
//! nonnegative. The reference-measure coupling is a structural property of
//! the protocol, not a configuration knob: the replicator revises against
//! the current state itself, BNN and Smith against a fixed measure.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("strategy index {index} out of range for {len} strategies")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("theta/rho length mismatch: {theta} vs {rho}")]
    LengthMismatch { theta: usize, rho: usize },
}

/// How the reference measure of the mean dynamics is coupled to the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceMode {
    /// The reference measure is the evolving state itself.
    StateCoupled,
    /// The reference measure is fixed in time (typically uniform).
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RevisionProtocol {
    Replicator,
    Bnn,
    /// Impartial pairwise comparison with `phi(p) = max{0, p}`.
    #[serde(rename = "smith")]
    SmithPairwise,
}

impl RevisionProtocol {
    pub fn reference_mode(self) -> ReferenceMode {
        match self {
            RevisionProtocol::Replicator => ReferenceMode::StateCoupled,
            RevisionProtocol::Bnn | RevisionProtocol::SmithPairwise => ReferenceMode::Fixed,
        }
    }

    pub const ALL: [RevisionProtocol; 3] = [
        RevisionProtocol::Replicator,
        RevisionProtocol::Bnn,
        RevisionProtocol::SmithPairwise,
    ];
}

/// Rate of switching from strategy `i` to strategy `j` at state `theta`
/// with payoffs `rho`.
///
/// Replicator and Smith return `max{0, rho_j - rho_i}`; BNN returns the
/// positive part of the excess payoff `rho_j - theta . rho`. The excess is
/// accumulated as `sum_k theta_k (rho_j - rho_k)` so constant payoff
/// vectors give an exact zero.
pub fn switch_rate(
    protocol: RevisionProtocol,
    i: usize,
    j: usize,
    theta: &[f64],
    rho: &[f64],
) -> Result<f64, ProtocolError> {
    let n = theta.len();
    if rho.len() != n {
        return Err(ProtocolError::LengthMismatch {
            theta: n,
            rho: rho.len(),
        });
    }
    for index in [i, j] {
        if index >= n {
            return Err(ProtocolError::IndexOutOfRange { index, len: n });
        }
    }
    let rate = match protocol {
        RevisionProtocol::Replicator | RevisionProtocol::SmithPairwise => {
            (rho[j] - rho[i]).max(0.0)
        }
        RevisionProtocol::Bnn => {
            let excess: f64 = theta
                .iter()
                .zip(rho)
                .map(|(&t, &r)| t * (rho[j] - r))
                .sum();
            excess.max(0.0)
        }
    };
    Ok(rate)
}
