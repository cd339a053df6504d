//! Random instance generators shared by the integration tests.

#![allow(dead_code)]

use cpc_core::prob::{AlphabetSpec, JointDistribution, ObservationChannel, StatePrior, Var};
use rand::Rng;
use rand_distr::{Distribution, Gamma};

/// Dirichlet(alpha, ..., alpha) draw of length `n`.
pub fn dirichlet<R: Rng>(rng: &mut R, n: usize, alpha: f64) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).unwrap();
    let draws: Vec<f64> = (0..n).map(|_| gamma.sample(rng).max(1e-300)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|g| g / total).collect()
}

pub fn random_prior<R: Rng>(rng: &mut R, n: usize) -> StatePrior {
    StatePrior::new(dirichlet(rng, n, 1.0)).unwrap()
}

pub fn random_channel<R: Rng>(rng: &mut R, inputs: usize, outputs: usize) -> ObservationChannel {
    ObservationChannel::new((0..inputs).map(|_| dirichlet(rng, outputs, 0.7)).collect()).unwrap()
}

/// `qbar` on `X0 x X1 x X2` with state marginal `rho`.
pub fn random_qbar<R: Rng>(rng: &mut R, rho: &StatePrior, n1: usize, n2: usize) -> JointDistribution {
    let probs = rho
        .probs()
        .iter()
        .flat_map(|&p| {
            dirichlet(rng, n1 * n2, 0.5)
                .into_iter()
                .map(move |c| p * c)
        })
        .collect();
    JointDistribution::over_actions(rho.len(), n1, n2, probs).unwrap()
}

/// Unstructured law on `X0 x X1 x X2 x Y` with sizes `[x0, x1, x2, y]`.
pub fn random_joint<R: Rng>(rng: &mut R, sizes: [usize; 4]) -> JointDistribution {
    let spec = AlphabetSpec::new(sizes[0], sizes[1], sizes[2], sizes[3]).unwrap();
    JointDistribution::over(&spec, dirichlet(rng, spec.len(), 0.5)).unwrap()
}

pub fn axes3(n0: usize, n1: usize, n2: usize) -> [(Var, usize); 3] {
    [(Var::X0, n0), (Var::X1, n1), (Var::X2, n2)]
}
