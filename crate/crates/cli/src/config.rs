//! Flat TOML configuration shared by all subcommands; command-line flags take
//! precedence over file values, which take precedence over defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use cpc_core::icmodel::{ICConfig, PayoffCurve, Regime};
use cpc_core::optimizer::SolverOptions;
use serde::Deserialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RegimeArg {
    Lir,
    Hir,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Lir => Regime::Lir,
            RegimeArg::Hir => Regime::Hir,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PayoffArg {
    Log,
    Linear,
}

impl From<PayoffArg> for PayoffCurve {
    fn from(p: PayoffArg) -> Self {
        match p {
            PayoffArg::Log => PayoffCurve::Log,
            PayoffArg::Linear => PayoffCurve::Linear,
        }
    }
}

/// Simulation target law.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetArg {
    Solver,
    Spc,
    Fpc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelArg {
    /// Two-user interference channel.
    Ic,
    /// Two-state coordination game observed without noise.
    Tiny,
}

/// Every recognised key. Also the set of override flags.
#[derive(Clone, Debug, Default, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    #[arg(long, value_enum)]
    pub regime: Option<RegimeArg>,
    #[arg(long, value_enum)]
    pub payoff: Option<PayoffArg>,
    /// Single operating point for `simulate` and `policies` [dB].
    #[arg(long, allow_hyphen_values = true)]
    pub snr: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub snr_start: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub snr_stop: Option<f64>,
    #[arg(long)]
    pub snr_step: Option<f64>,
    #[arg(long)]
    pub gmin: Option<f64>,
    #[arg(long)]
    pub gmax: Option<f64>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Probability that g11 takes the low value; likewise p12, p21, p22.
    #[arg(long)]
    pub p11: Option<f64>,
    #[arg(long)]
    pub p12: Option<f64>,
    #[arg(long)]
    pub p21: Option<f64>,
    #[arg(long)]
    pub p22: Option<f64>,
    #[arg(long)]
    pub tol_payoff: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub max_outer: Option<usize>,
    /// Stage count of the block-stationary relaxation.
    #[arg(long)]
    pub stages: Option<u32>,
    /// Extra constraint slack demanded of the solver target [bits].
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    #[arg(long, value_enum)]
    pub target: Option<TargetArg>,
    /// Weight of the independent product law mixed into the target.
    #[arg(long)]
    pub mix: Option<f64>,
    /// Block length.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub blocks: Option<usize>,
    /// Bits per stage; defaults to the middle of the information interval.
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($field:ident),*) => {
        Settings { $($field: $top.$field.or($base.$field)),* }
    };
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("malformed config {}", path.display()))
    }

    /// `self` with every value set in `flags` replaced.
    pub fn overlay(self, flags: Settings) -> Self {
        let base = self;
        overlay!(
            base, flags, regime, payoff, snr, snr_start, snr_stop, snr_step, gmin, gmax, sigma2,
            p11, p12, p21, p22, tol_payoff, max_iter, max_outer, stages, margin, model, target,
            mix, n, blocks, rate, epsilon, seed
        )
    }

    pub fn resolve(config: Option<&PathBuf>, flags: Settings) -> Result<Self> {
        let file = match config {
            Some(path) => Settings::load(path)?,
            None => Settings::default(),
        };
        Ok(file.overlay(flags))
    }

    pub fn ic_config(&self, snr_db: f64) -> Result<ICConfig> {
        let regime = Regime::from(self.regime.unwrap_or(RegimeArg::Hir));
        let curve = PayoffCurve::from(self.payoff.unwrap_or(PayoffArg::Log));
        let mut cfg = ICConfig::new(regime, curve, snr_db);
        cfg.g_min = self.gmin.unwrap_or(cfg.g_min);
        cfg.g_max = self.gmax.unwrap_or(cfg.g_max);
        cfg.sigma2 = self.sigma2.unwrap_or(cfg.sigma2);
        for (slot, value) in cfg.p_min.iter_mut().zip([self.p11, self.p12, self.p21, self.p22]) {
            if let Some(v) = value {
                *slot = v;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn solver_options(&self) -> Result<SolverOptions> {
        let d = SolverOptions::default();
        let opts = SolverOptions {
            tol_payoff: self.tol_payoff.unwrap_or(d.tol_payoff),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            max_outer: self.max_outer.unwrap_or(d.max_outer),
            stages: self.stages.unwrap_or(d.stages),
            margin: self.margin.unwrap_or(d.margin),
            ..d
        };
        if !(opts.tol_payoff > 0.0) {
            bail!("tol_payoff must be positive");
        }
        if opts.stages == 0 {
            bail!("stages must be at least 1");
        }
        if !(opts.margin >= 0.0) {
            bail!("margin must be nonnegative");
        }
        Ok(opts)
    }

    /// SNR points `start, start + step, ...` up to `stop` inclusive.
    pub fn snr_grid(&self) -> Result<Vec<f64>> {
        let start = self.snr_start.unwrap_or(0.0);
        let stop = self.snr_stop.unwrap_or(40.0);
        let step = self.snr_step.unwrap_or(1.0);
        if !(step > 0.0) || !start.is_finite() || !stop.is_finite() {
            bail!("SNR grid needs finite bounds and a positive step");
        }
        if stop < start {
            bail!("snr_stop {stop} is below snr_start {start}");
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|k| start + k as f64 * step).collect())
    }
}
