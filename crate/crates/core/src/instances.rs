//! Small reference problems.

use crate::optimizer::PayoffTable;
use crate::prob::{ObservationChannel, StatePrior};

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub rho: StatePrior,
    pub gamma: ObservationChannel,
    pub payoff: PayoffTable,
}

/// Two equiprobable states, binary actions, `Y = X1`, and payoff 1 exactly
/// when both actions match the state.
pub fn binary_coordination() -> Instance {
    Instance {
        rho: StatePrior::uniform(2).expect("uniform prior"),
        gamma: ObservationChannel::identity(2).expect("identity channel"),
        payoff: PayoffTable::from_fn(2, 2, 2, |x0, x1, x2| f64::from(x0 == x1 && x1 == x2))
            .expect("finite payoff"),
    }
}
