//! The information-constraint functional and implementability tests.
//!
//! For a joint law `Q` on `X0 x X1 x X2 x Y`,
//! `phi(Q) = I(X0; X2) - I(X1; Y | X0, X2)`. A state/action distribution is
//! implementable exactly when the composed `Q` has `phi(Q) <= 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{
    compose, conditional_mutual_information, mutual_information, JointDistribution,
    ObservationChannel, StatePrior, Var,
};

/// Feasibility tolerance in bits.
pub const DEFAULT_FEASIBILITY_TOL: f64 = 1e-9;

/// `I(X0; X2)`, the information the observer's actions carry about the state.
pub fn source_information(q: &JointDistribution) -> Result<f64> {
    mutual_information(q, &[Var::X0], &[Var::X2])
}

/// `I(X1; Y | X0, X2)`, what the monitoring channel can convey.
pub fn channel_information(q: &JointDistribution) -> Result<f64> {
    conditional_mutual_information(q, &[Var::X1], &[Var::Y], &[Var::X0, Var::X2])
}

pub fn phi(q: &JointDistribution) -> Result<f64> {
    Ok(source_information(q)? - channel_information(q)?)
}

/// `phi` through `H(X0) - H(Y, X0 | X2) + H(Y | X0, X1, X2)`.
///
/// Shares no code with [`phi`] beyond marginal entropies, so the two paths
/// cross-check each other.
pub fn phi_entropy_decomposition(q: &JointDistribution) -> Result<f64> {
    let h_x0 = q.entropy(&[Var::X0])?;
    let h_y_x0_given_x2 = q.conditional_entropy(&[Var::Y, Var::X0], &[Var::X2])?;
    let h_y_given_all = q.conditional_entropy(&[Var::Y], &[Var::X0, Var::X1, Var::X2])?;
    Ok(h_x0 - h_y_x0_given_x2 + h_y_given_all)
}

/// Constraint when the state stays constant over blocks of `stages` stages:
/// `(1/S) I(X0; X2) - I(X1; Y | X0, X2)`.
pub fn phi_s_stage(q: &JointDistribution, stages: u32) -> Result<f64> {
    if stages == 0 {
        return Err(Error::Argument("number of stages must be at least 1".into()));
    }
    Ok(source_information(q)? / f64::from(stages) - channel_information(q)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Implementability {
    pub implementable: bool,
    /// `-phi`; nonnegative when the constraint holds.
    pub slack: f64,
    pub source_information: f64,
    pub channel_information: f64,
}

/// Checks the marginal condition `sum_{x1,x2} qbar(x0,.,.) = rho(x0)` and the
/// information constraint.
pub fn is_implementable(
    qbar: &JointDistribution,
    gamma: &ObservationChannel,
    rho: &StatePrior,
    tol: f64,
) -> Result<Implementability> {
    let state = qbar.marginal(&[Var::X0])?;
    if state.len() != rho.len() {
        return Err(Error::Alphabet(format!(
            "|X0| = {} but prior has {} states",
            state.len(),
            rho.len()
        )));
    }
    for (x0, (&got, &expected)) in state.probs().iter().zip(rho.probs()).enumerate() {
        if (got - expected).abs() > tol {
            return Err(Error::MarginalMismatch { x0, got, expected });
        }
    }
    let q = compose(qbar, gamma)?;
    let source_information = source_information(&q)?;
    let channel_information = channel_information(&q)?;
    let value = source_information - channel_information;
    Ok(Implementability {
        implementable: value <= tol,
        slack: -value,
        source_information,
        channel_information,
    })
}
