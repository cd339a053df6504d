use std::io::Write;

use anyhow::{anyhow, Context, Result};
use cpc_core::coding_sim::{self, CodingConfig, CodingParams, SimResult};
use cpc_core::constraint::phi;
use cpc_core::icmodel::{self, PolicyPayoffs};
use cpc_core::instances::binary_coordination;
use cpc_core::optimizer::{self, PayoffTable, SolverOptions};
use cpc_core::prob::{compose, JointDistribution, ObservationChannel, StatePrior, Var};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ModelArg, Settings, TargetArg};
use crate::Failure;

pub const SWEEP_HEADER: [&str; 10] = [
    "snr_db",
    "fpc",
    "spc",
    "ocpc",
    "costless",
    "gain_ocpc_vs_fpc_pct",
    "gain_costless_vs_fpc_pct",
    "gain_ocpc_vs_spc_pct",
    "gain_costless_vs_spc_pct",
    "converged",
];

pub fn sweep(settings: &Settings, out: &mut dyn Write) -> Result<(), Failure> {
    let grid = settings.snr_grid().map_err(Failure::Usage)?;
    let opts = settings.solver_options().map_err(Failure::Usage)?;
    let configs = grid
        .iter()
        .map(|&snr| settings.ic_config(snr))
        .collect::<Result<Vec<_>>>()
        .map_err(Failure::Usage)?;
    let rows: Vec<(f64, PolicyPayoffs)> = configs
        .par_iter()
        .map(|cfg| icmodel::compare_policies(cfg, &opts).map(|p| (cfg.snr_db, p)))
        .collect::<cpc_core::Result<_>>()
        .map_err(|e| Failure::Run(anyhow!(e)))?;

    let mut writer = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Failure::Run(anyhow!(e).context("writing CSV"));
    writer.write_record(SWEEP_HEADER).map_err(io)?;
    for (snr, p) in rows {
        let gain = PolicyPayoffs::gain_pct;
        let fields = [
            snr,
            p.fpc,
            p.spc,
            p.ocpc,
            p.costless,
            gain(p.ocpc, p.fpc),
            gain(p.costless, p.fpc),
            gain(p.ocpc, p.spc),
            gain(p.costless, p.spc),
        ];
        let mut record: Vec<String> = fields.iter().map(f64::to_string).collect();
        record.push(p.converged.to_string());
        writer.write_record(&record).map_err(io)?;
    }
    writer.flush().map_err(|e| Failure::Run(anyhow!(e)))?;
    Ok(())
}

pub fn policies(settings: &Settings, out: &mut dyn Write) -> Result<(), Failure> {
    let cfg = settings
        .ic_config(settings.snr.unwrap_or(10.0))
        .map_err(Failure::Usage)?;
    let table = icmodel::policy_table(&cfg).map_err(|e| Failure::Run(anyhow!(e)))?;
    let mut writer = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Failure::Run(anyhow!(e).context("writing CSV"));
    writer
        .write_record([
            "state", "g11", "g12", "g21", "g22", "prob", "best_x1", "best_x2", "best_payoff",
            "spc_x1",
        ])
        .map_err(io)?;
    for row in table {
        let mut record = vec![row.state.to_string()];
        record.extend(row.gains.iter().map(f64::to_string));
        record.extend([
            row.prob.to_string(),
            row.best.0.to_string(),
            row.best.1.to_string(),
            row.best_payoff.to_string(),
            row.spc_x1.to_string(),
        ]);
        writer.write_record(&record).map_err(io)?;
    }
    writer.flush().map_err(|e| Failure::Run(anyhow!(e)))?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct SimulationReport {
    pub model: ModelArg,
    pub target: TargetArg,
    pub margin: f64,
    pub mix: f64,
    pub params: CodingParams,
    pub rate: f64,
    pub codebook_size: usize,
    pub source_information: f64,
    pub channel_information: f64,
    /// `E_{Q*}[w]`.
    pub target_payoff: f64,
    /// `-Phi(Q*)` in bits.
    pub target_slack: f64,
    pub target_distribution: JointDistribution,
    pub result: SimResult,
}

/// Independent law `rho(x0) / (|X1| |X2|)` on the target's alphabets.
fn product_law(rho: &StatePrior, n1: usize, n2: usize) -> Result<JointDistribution> {
    let k = (n1 * n2) as f64;
    let axes = [(Var::X0, rho.len()), (Var::X1, n1), (Var::X2, n2)];
    Ok(JointDistribution::from_fn(&axes, |c| rho.probs()[c[0]] / k)?)
}

pub fn simulate(settings: &Settings) -> Result<SimulationReport, Failure> {
    let model = settings.model.unwrap_or(ModelArg::Tiny);
    let target = settings.target.unwrap_or(TargetArg::Solver);
    let margin = settings.margin.unwrap_or(0.1);
    let mix = settings.mix.unwrap_or(0.0);
    if !(0.0..=1.0).contains(&mix) {
        return Err(Failure::Usage(anyhow!("mix must lie in [0, 1], got {mix}")));
    }
    let opts = SolverOptions {
        margin,
        ..settings.solver_options().map_err(Failure::Usage)?
    };
    let defaults = CodingParams::default();
    let params = CodingParams {
        block_length: settings.n.unwrap_or(defaults.block_length),
        blocks: settings.blocks.unwrap_or(defaults.blocks),
        rate: settings.rate.or(defaults.rate),
        epsilon: settings.epsilon.unwrap_or(defaults.epsilon),
        seed: settings.seed.unwrap_or(defaults.seed),
    };

    let (rho, gamma, w, ic): (StatePrior, ObservationChannel, PayoffTable, _) = match model {
        ModelArg::Tiny => {
            let inst = binary_coordination();
            (inst.rho, inst.gamma, inst.payoff, None)
        }
        ModelArg::Ic => {
            let cfg = settings
                .ic_config(settings.snr.unwrap_or(10.0))
                .map_err(Failure::Usage)?;
            let run = |e: cpc_core::Error| Failure::Run(anyhow!(e));
            (
                icmodel::build_state_prior(&cfg).map_err(run)?,
                icmodel::identity_observation_channel(),
                icmodel::build_payoff_table(&cfg).map_err(run)?,
                Some(cfg),
            )
        }
    };
    let run = |e: cpc_core::Error| Failure::Run(anyhow!(e));
    let base = match (target, &ic) {
        (TargetArg::Solver, _) => optimizer::solve(&rho, &gamma, &w, &opts)
            .map_err(|e| Failure::Run(anyhow!(e).context("computing the solver target")))?
            .qbar,
        (TargetArg::Spc, Some(cfg)) => icmodel::spc_distribution(cfg).map_err(run)?,
        (TargetArg::Fpc, Some(cfg)) => icmodel::fpc_distribution(cfg).map_err(run)?,
        (_, None) => {
            return Err(Failure::Usage(anyhow!(
                "targets spc and fpc need the interference-channel model (--model ic)"
            )))
        }
    };
    let (_, n1, n2) = w.dims();
    let product = product_law(&rho, n1, n2).map_err(Failure::Run)?;
    let target_law = base.mix(&product, 1.0 - mix).map_err(run)?;

    let cfg = CodingConfig::new(params.clone(), target_law.clone(), gamma.clone(), rho, w)
        .map_err(|e| Failure::Run(anyhow!(e).context("invalid coding configuration")))?;
    let (source_information, channel_information) = cfg.information_interval();
    let target_payoff = cfg.target_payoff().map_err(run)?;
    let target_slack = -phi(&compose(&target_law, &gamma).map_err(run)?).map_err(run)?;
    let result = coding_sim::run(&cfg).map_err(run)?;
    Ok(SimulationReport {
        model,
        target,
        margin,
        mix,
        params,
        rate: cfg.rate(),
        codebook_size: cfg.codebook_size(),
        source_information,
        channel_information,
        target_payoff,
        target_slack,
        target_distribution: target_law,
        result,
    })
}

pub fn write_json(report: &SimulationReport, out: &mut dyn Write) -> Result<(), Failure> {
    serde_json::to_writer_pretty(&mut *out, report)
        .context("writing JSON")
        .and_then(|()| writeln!(out).context("writing JSON"))
        .map_err(Failure::Run)
}
