//! Two-pair interference channel with on/off power control.
//!
//! The state is the gain tuple `(g11, g12, g21, g22)`, each gain taking the
//! value `g_min` with probability `p_jk` and `g_max` otherwise. States are
//! indexed lexicographically with `g_min` before `g_max`:
//! `x0 = 8 b11 + 4 b12 + 2 b21 + b22`, where `b_jk = 1` means `g_max`.
//! Power index 0 is silence and index 1 is `P_max`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{self, PayoffTable, SolverOptions};
use crate::prob::{JointDistribution, ObservationChannel, StatePrior};

pub const NUM_STATES: usize = 16;
pub const NUM_POWERS: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Low interference: `(p11, p12, p21, p22) = (0.5, 0.9, 0.9, 0.5)`.
    Lir,
    /// High interference: `(0.5, 0.1, 0.1, 0.5)`.
    Hir,
}

impl Regime {
    pub fn probabilities(self) -> [f64; 4] {
        match self {
            Regime::Lir => [0.5, 0.9, 0.9, 0.5],
            Regime::Hir => [0.5, 0.1, 0.1, 0.5],
        }
    }
}

/// Per-receiver utility applied to the SINR.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayoffCurve {
    /// `log2(1 + a)`.
    Log,
    /// `a`.
    Linear,
}

impl PayoffCurve {
    pub fn apply(self, sinr: f64) -> f64 {
        match self {
            PayoffCurve::Log => sinr.ln_1p() / std::f64::consts::LN_2,
            PayoffCurve::Linear => sinr,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ICConfig {
    pub g_min: f64,
    pub g_max: f64,
    pub sigma2: f64,
    pub snr_db: f64,
    /// `P(g_jk = g_min)` for `(11, 12, 21, 22)`.
    pub p_min: [f64; 4],
    pub curve: PayoffCurve,
}

impl ICConfig {
    /// Gains 0.1 / 1.9 with unit noise.
    pub fn new(regime: Regime, curve: PayoffCurve, snr_db: f64) -> Self {
        Self {
            g_min: 0.1,
            g_max: 1.9,
            sigma2: 1.0,
            snr_db,
            p_min: regime.probabilities(),
            curve,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g_min < self.g_max) || !(self.g_min >= 0.0) {
            return Err(Error::Argument(format!(
                "need 0 <= g_min < g_max, got {} and {}",
                self.g_min, self.g_max
            )));
        }
        if !(self.sigma2 > 0.0) {
            return Err(Error::Argument(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::Argument("snr_db must be finite".into()));
        }
        if let Some(p) = self.p_min.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Argument(format!("gain probability {p} outside [0, 1]")));
        }
        Ok(())
    }

    pub fn p_max(&self) -> f64 {
        self.sigma2 * 10f64.powf(self.snr_db / 10.0)
    }

    /// Power level of action index `a`.
    pub fn power(&self, a: usize) -> f64 {
        if a == 0 {
            0.0
        } else {
            self.p_max()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelGainState {
    pub g11: f64,
    pub g12: f64,
    pub g21: f64,
    pub g22: f64,
}

impl ChannelGainState {
    pub fn from_index(cfg: &ICConfig, x0: usize) -> Result<Self> {
        if x0 >= NUM_STATES {
            return Err(Error::Argument(format!("state index {x0} out of range")));
        }
        let g = |bit: usize| if x0 >> bit & 1 == 1 { cfg.g_max } else { cfg.g_min };
        Ok(Self {
            g11: g(3),
            g12: g(2),
            g21: g(1),
            g22: g(0),
        })
    }

    /// Gains as `[g11, g12, g21, g22]`.
    pub fn as_array(&self) -> [f64; 4] {
        [self.g11, self.g12, self.g21, self.g22]
    }
}

/// Product of the four Bernoulli gain marginals.
pub fn build_state_prior(cfg: &ICConfig) -> Result<StatePrior> {
    cfg.validate()?;
    let probs = (0..NUM_STATES)
        .map(|x0| {
            (0..4)
                .map(|k| {
                    let is_max = x0 >> (3 - k) & 1 == 1;
                    if is_max {
                        1.0 - cfg.p_min[k]
                    } else {
                        cfg.p_min[k]
                    }
                })
                .product()
        })
        .collect();
    StatePrior::new(probs)
}

/// `SINR_j = g_jj x_j / (sigma2 + g_kj x_k)` for receiver `j` in `{1, 2}`.
pub fn sinr(cfg: &ICConfig, state: &ChannelGainState, x1: f64, x2: f64, receiver: usize) -> f64 {
    match receiver {
        1 => state.g11 * x1 / (cfg.sigma2 + state.g21 * x2),
        2 => state.g22 * x2 / (cfg.sigma2 + state.g12 * x1),
        _ => panic!("receiver must be 1 or 2, got {receiver}"),
    }
}

/// `w(x0, x1, x2) = f(SINR_1) + f(SINR_2)` over 16 x 2 x 2.
pub fn build_payoff_table(cfg: &ICConfig) -> Result<PayoffTable> {
    cfg.validate()?;
    let states = (0..NUM_STATES)
        .map(|x0| ChannelGainState::from_index(cfg, x0))
        .collect::<Result<Vec<_>>>()?;
    PayoffTable::from_fn(NUM_STATES, NUM_POWERS, NUM_POWERS, |x0, a1, a2| {
        let (p1, p2) = (cfg.power(a1), cfg.power(a2));
        let s = &states[x0];
        cfg.curve.apply(sinr(cfg, s, p1, p2, 1)) + cfg.curve.apply(sinr(cfg, s, p1, p2, 2))
    })
}

/// DM 2 observes DM 1's power level perfectly.
pub fn identity_observation_channel() -> ObservationChannel {
    ObservationChannel::identity(NUM_POWERS).expect("identity channel is valid")
}

/// Both transmitters always at full power.
pub fn fpc_distribution(cfg: &ICConfig) -> Result<JointDistribution> {
    let rho = build_state_prior(cfg)?;
    policy_distribution(&rho, |_| (1, 1))
}

/// Tx 1's best response to Tx 2 at full power; ties go to full power.
pub fn spc_action(w: &PayoffTable, x0: usize) -> usize {
    if w.get(x0, 0, 1) > w.get(x0, 1, 1) {
        0
    } else {
        1
    }
}

/// Tx 2 at full power, Tx 1 playing [`spc_action`].
pub fn spc_distribution(cfg: &ICConfig) -> Result<JointDistribution> {
    let rho = build_state_prior(cfg)?;
    let w = build_payoff_table(cfg)?;
    policy_distribution(&rho, |x0| (spc_action(&w, x0), 1))
}

fn policy_distribution<F>(rho: &StatePrior, policy: F) -> Result<JointDistribution>
where
    F: Fn(usize) -> (usize, usize),
{
    let mut probs = vec![0.0; NUM_STATES * NUM_POWERS * NUM_POWERS];
    for (x0, &p) in rho.probs().iter().enumerate() {
        let (a1, a2) = policy(x0);
        probs[(x0 * NUM_POWERS + a1) * NUM_POWERS + a2] = p;
    }
    JointDistribution::over_actions(NUM_STATES, NUM_POWERS, NUM_POWERS, probs)
}

/// Expected payoffs of the four policies at one operating point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyPayoffs {
    pub fpc: f64,
    pub spc: f64,
    pub ocpc: f64,
    pub costless: f64,
    pub converged: bool,
}

impl PolicyPayoffs {
    /// `100 (a / b - 1)`.
    pub fn gain_pct(a: f64, b: f64) -> f64 {
        100.0 * (a / b - 1.0)
    }
}

pub fn compare_policies(cfg: &ICConfig, opts: &SolverOptions) -> Result<PolicyPayoffs> {
    let rho = build_state_prior(cfg)?;
    let w = build_payoff_table(cfg)?;
    let gamma = identity_observation_channel();
    let fpc = optimizer::expected_payoff(&fpc_distribution(cfg)?, &gamma, &w)?;
    let spc = optimizer::expected_payoff(&spc_distribution(cfg)?, &gamma, &w)?;
    let costless = optimizer::costless_bound(&rho, &w)?;
    let (ocpc, converged) = match optimizer::solve(&rho, &gamma, &w, opts) {
        Ok(r) => (r.payoff, true),
        Err(Error::NotConverged { best }) => (best.payoff, false),
        Err(e) => return Err(e),
    };
    Ok(PolicyPayoffs {
        fpc,
        spc,
        ocpc,
        costless,
        converged,
    })
}

/// One row of the per-state policy table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatePolicy {
    pub state: usize,
    pub gains: [f64; 4],
    pub prob: f64,
    /// Costless-optimal `(x1, x2)` power indices, lowest index on ties.
    pub best: (usize, usize),
    pub best_payoff: f64,
    pub spc_x1: usize,
}

pub fn policy_table(cfg: &ICConfig) -> Result<Vec<StatePolicy>> {
    let rho = build_state_prior(cfg)?;
    let w = build_payoff_table(cfg)?;
    (0..NUM_STATES)
        .map(|x0| {
            let (best, best_payoff) = w.best_actions(x0);
            Ok(StatePolicy {
                state: x0,
                gains: ChannelGainState::from_index(cfg, x0)?.as_array(),
                prob: rho.probs()[x0],
                best,
                best_payoff,
                spc_x1: spc_action(&w, x0),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::{is_implementable, DEFAULT_FEASIBILITY_TOL};
    use crate::prob::Var;

    #[test]
    fn uniform_prior_when_all_half() {
        let mut cfg = ICConfig::new(Regime::Lir, PayoffCurve::Log, 10.0);
        cfg.p_min = [0.5; 4];
        let rho = build_state_prior(&cfg).unwrap();
        assert!(rho.probs().iter().all(|&p| p == 1.0 / 16.0));
    }

    #[test]
    fn lir_all_min_state_probability() {
        let cfg = ICConfig::new(Regime::Lir, PayoffCurve::Log, 10.0);
        let rho = build_state_prior(&cfg).unwrap();
        assert!((rho.probs()[0] - 0.2025).abs() < 1e-15);
        assert!((rho.probs().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn certain_gain_concentrates_prior() {
        let mut cfg = ICConfig::new(Regime::Hir, PayoffCurve::Log, 10.0);
        cfg.p_min[1] = 1.0;
        let rho = build_state_prior(&cfg).unwrap();
        for (x0, &p) in rho.probs().iter().enumerate() {
            let g12_max = x0 >> 2 & 1 == 1;
            if g12_max {
                assert_eq!(p, 0.0);
            }
        }
    }

    #[test]
    fn sinr_arithmetic() {
        let cfg = ICConfig::new(Regime::Lir, PayoffCurve::Log, 10.0);
        assert!((cfg.p_max() - 10.0).abs() < 1e-12);
        let s = ChannelGainState {
            g11: 1.9,
            g12: 0.1,
            g21: 0.1,
            g22: 1.9,
        };
        let p = cfg.p_max();
        assert!((sinr(&cfg, &s, p, p, 1) - 9.5).abs() < 1e-12);
        assert_eq!(sinr(&cfg, &s, 0.0, p, 1), 0.0);
        assert!((sinr(&cfg, &s, p, 0.0, 1) - 19.0).abs() < 1e-12);
    }

    #[test]
    fn payoff_values() {
        let cfg = ICConfig::new(Regime::Lir, PayoffCurve::Log, 10.0);
        let w = build_payoff_table(&cfg).unwrap();
        // g11 = g22 = g_max, g12 = g21 = g_min: bits 1001.
        let x0 = 0b1001;
        assert!((w.get(x0, 1, 1) - 2.0 * 10.5f64.log2()).abs() < 1e-12);
        for x0 in 0..NUM_STATES {
            assert_eq!(w.get(x0, 0, 0), 0.0);
        }
        let lin = ICConfig { curve: PayoffCurve::Linear, ..cfg };
        let wl = build_payoff_table(&lin).unwrap();
        assert!((wl.get(x0, 1, 1) - 19.0).abs() < 1e-12);
        assert_eq!(wl.get(3, 0, 0), 0.0);
    }

    #[test]
    fn payoff_symmetric_under_transmitter_swap() {
        for curve in [PayoffCurve::Log, PayoffCurve::Linear] {
            let cfg = ICConfig::new(Regime::Hir, curve, 13.0);
            let w = build_payoff_table(&cfg).unwrap();
            for x0 in 0..NUM_STATES {
                let b = |k: usize| x0 >> (3 - k) & 1;
                // (g11, g12, g21, g22) -> (g22, g21, g12, g11)
                let swapped = b(3) << 3 | b(2) << 2 | b(1) << 1 | b(0);
                for a1 in 0..2 {
                    for a2 in 0..2 {
                        assert!((w.get(x0, a1, a2) - w.get(swapped, a2, a1)).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn fpc_and_spc_are_implementable() {
        for regime in [Regime::Lir, Regime::Hir] {
            for snr in [0.0, 10.0, 30.0] {
                let cfg = ICConfig::new(regime, PayoffCurve::Log, snr);
                let rho = build_state_prior(&cfg).unwrap();
                let gamma = identity_observation_channel();
                for q in [fpc_distribution(&cfg).unwrap(), spc_distribution(&cfg).unwrap()] {
                    let r = is_implementable(&q, &gamma, &rho, DEFAULT_FEASIBILITY_TOL).unwrap();
                    assert!(r.implementable);
                    assert!(r.slack >= 0.0);
                }
                let fpc = fpc_distribution(&cfg).unwrap();
                let actions = fpc.marginal(&[Var::X1, Var::X2]).unwrap();
                assert!((actions.prob(&[1, 1]).unwrap() - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn spc_matches_brute_force_argmax() {
        let cfg = ICConfig::new(Regime::Hir, PayoffCurve::Log, 10.0);
        let w = build_payoff_table(&cfg).unwrap();
        let p = cfg.p_max();
        for x0 in 0..NUM_STATES {
            let s = ChannelGainState::from_index(&cfg, x0).unwrap();
            let value = |x1: f64| {
                (1.0 + sinr(&cfg, &s, x1, p, 1)).log2() + (1.0 + sinr(&cfg, &s, x1, p, 2)).log2()
            };
            let brute = if value(0.0) > value(p) { 0 } else { 1 };
            assert_eq!(spc_action(&w, x0), brute, "state {x0}");
        }
    }

    #[test]
    fn all_max_state_prefers_single_transmitter() {
        let cfg = ICConfig::new(Regime::Hir, PayoffCurve::Log, 30.0);
        let table = policy_table(&cfg).unwrap();
        let row = &table[15];
        assert_eq!(row.gains, [1.9; 4]);
        // Both single-transmitter pairs tie; lowest index wins.
        assert_eq!(row.best, (0, 1));
        for r in &table {
            assert_ne!(r.best, (0, 0));
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = ICConfig::new(Regime::Hir, PayoffCurve::Log, 10.0);
        cfg.g_min = 2.0;
        assert!(build_state_prior(&cfg).is_err());
        let mut cfg = ICConfig::new(Regime::Hir, PayoffCurve::Log, 10.0);
        cfg.p_min[0] = 1.2;
        assert!(build_payoff_table(&cfg).is_err());
        let mut cfg = ICConfig::new(Regime::Hir, PayoffCurve::Log, 10.0);
        cfg.sigma2 = 0.0;
        assert!(cfg.validate().is_err());
    }
}
