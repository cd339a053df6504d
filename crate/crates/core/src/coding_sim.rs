//! Block-Markov source/channel coding simulation of an implementable target.
//!
//! Over `B` blocks of `n` stages, DM 1 looks ahead at the next block's state
//! sequence, picks the most typical source codeword (DM 2's next actions)
//! for it, and sends the index through its own actions using a channel
//! codebook drawn conditionally on the current block's state and DM 2
//! actions. DM 2 decodes the index from what it observed through `Gamma` and
//! plays the corresponding source codeword in the next block. Block 0 uses
//! index 0, known to both.
//!
//! All randomness comes from ChaCha streams keyed by `(kind, block, index)`,
//! so both decision-makers regenerate identical codebooks from the seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constraint::{channel_information, source_information};
use crate::error::{Error, Result};
use crate::optimizer::{expected_payoff, PayoffTable};
use crate::prob::{
    action_dims, compose, total_variation, JointDistribution, ObservationChannel, StatePrior, Var,
};

/// Largest codebook, as a power of two.
pub const MAX_CODEBOOK_BITS: f64 = 20.0;

const STREAM_STATE: u64 = 0;
const STREAM_SOURCE: u64 = 1;
const STREAM_CHANNEL: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_PAYOFF_ONLY: u64 = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodingParams {
    /// Codeword length `n`.
    pub block_length: usize,
    /// Number of blocks `B`.
    pub blocks: usize,
    /// Bits per stage; `None` picks the midpoint of the information interval.
    pub rate: Option<f64>,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for CodingParams {
    fn default() -> Self {
        Self {
            block_length: 200,
            blocks: 50,
            rate: None,
            epsilon: 0.5,
            seed: 0,
        }
    }
}

/// Validated simulation setup.
#[derive(Clone, Debug)]
pub struct CodingConfig {
    params: CodingParams,
    rate: f64,
    codebook_size: usize,
    target: JointDistribution,
    composed: JointDistribution,
    gamma: ObservationChannel,
    rho: StatePrior,
    payoff: PayoffTable,
    source_info: f64,
    channel_info: f64,
}

impl CodingConfig {
    pub fn new(
        params: CodingParams,
        target: JointDistribution,
        gamma: ObservationChannel,
        rho: StatePrior,
        payoff: PayoffTable,
    ) -> Result<Self> {
        if params.block_length == 0 {
            return Err(Error::Argument("block length must be at least 1".into()));
        }
        if params.blocks < 2 {
            return Err(Error::Argument("need at least 2 blocks".into()));
        }
        if !(params.epsilon > 0.0) {
            return Err(Error::Argument("typicality epsilon must be positive".into()));
        }
        let (n0, n1, n2) = action_dims(&target)?;
        if payoff.dims() != (n0, n1, n2) || rho.len() != n0 || gamma.inputs() != n1 {
            return Err(Error::Alphabet(
                "target, prior, channel and payoff table disagree on alphabet sizes".into(),
            ));
        }
        let state = target.marginal(&[Var::X0])?;
        for (x0, (&got, &expected)) in state.probs().iter().zip(rho.probs()).enumerate() {
            if (got - expected).abs() > 1e-9 {
                return Err(Error::MarginalMismatch { x0, got, expected });
            }
        }
        let composed = compose(&target, &gamma)?;
        let source_info = source_information(&composed)?;
        let channel_info = channel_information(&composed)?;
        let nothing_to_send = source_info <= 1e-12;
        let rate = match params.rate {
            Some(r) => r,
            None if channel_info > source_info => 0.5 * (source_info + channel_info),
            None => 0.0,
        };
        let inside = source_info < rate && rate < channel_info;
        if !(inside || (nothing_to_send && rate == 0.0)) {
            return Err(Error::RateOutOfRange {
                rate,
                source_info,
                channel_info,
            });
        }
        let exponent = params.block_length as f64 * rate;
        if exponent > MAX_CODEBOOK_BITS {
            return Err(Error::CodebookTooLarge { exponent });
        }
        let codebook_size = exponent.exp2().ceil() as usize;
        Ok(Self {
            params,
            rate,
            codebook_size,
            target,
            composed,
            gamma,
            rho,
            payoff,
            source_info,
            channel_info,
        })
    }

    pub fn params(&self) -> &CodingParams {
        &self.params
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn codebook_size(&self) -> usize {
        self.codebook_size
    }

    /// `(I(X0;X2), I(X1;Y|X0,X2))` under the target.
    pub fn information_interval(&self) -> (f64, f64) {
        (self.source_info, self.channel_info)
    }

    /// Target joint law including the observation.
    pub fn target_joint(&self) -> &JointDistribution {
        &self.composed
    }

    pub fn target_payoff(&self) -> Result<f64> {
        expected_payoff(&self.target, &self.gamma, &self.payoff)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockDiagnostics {
    pub block: usize,
    /// Index DM 1 encoded for the next block; `None` on the final block.
    pub sent_index: Option<usize>,
    pub decoded_index: Option<usize>,
    pub encoder_success: bool,
    pub typical_candidates: usize,
    /// Final block: the channel codeword carries no index.
    pub payoff_only: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub empirical: JointDistribution,
    pub tv_distance: f64,
    pub encoder_failures: usize,
    pub decoder_errors: usize,
    pub average_payoff: f64,
    pub target_payoff: f64,
    pub rate: f64,
    pub codebook_size: usize,
    pub blocks: Vec<BlockDiagnostics>,
}

/// Incremental robust-typicality check against fixed reference counts.
struct TypicalityCounter<'a> {
    reference: &'a [f64],
    n: f64,
    epsilon: f64,
    /// Relative excess at which `push` gives up; at most `epsilon`.
    cap: f64,
    counts: Vec<u32>,
}

impl<'a> TypicalityCounter<'a> {
    fn new(reference: &'a [f64], n: usize, epsilon: f64) -> Self {
        Self {
            reference,
            n: n as f64,
            epsilon,
            cap: epsilon,
            counts: vec![0; reference.len()],
        }
    }

    fn reset(&mut self) {
        self.counts.fill(0);
    }

    /// Records one cell; `false` once no completion can be within `cap`.
    fn push(&mut self, cell: usize) -> bool {
        self.counts[cell] += 1;
        let expected = self.reference[cell] * self.n;
        f64::from(self.counts[cell]) - expected <= self.cap * expected
    }

    /// Largest relative deviation over all cells (infinite on a
    /// zero-probability cell that occurs).
    fn deviation(&self) -> f64 {
        self.counts
            .iter()
            .zip(self.reference)
            .map(|(&c, &p)| {
                let expected = p * self.n;
                let gap = (f64::from(c) - expected).abs();
                if expected > 0.0 {
                    gap / expected
                } else if gap > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }

    fn finish(&self) -> bool {
        self.counts.iter().zip(self.reference).all(|(&c, &p)| {
            let expected = p * self.n;
            (f64::from(c) - expected).abs() <= self.epsilon * expected
        })
    }
}

/// Robust typicality: every cell's empirical frequency is within
/// `epsilon * p` of its reference probability `p`.
///
/// `sequences[k]` holds the symbols of the reference's `k`-th axis.
pub fn typical_set_test(
    sequences: &[&[usize]],
    reference: &JointDistribution,
    epsilon: f64,
) -> Result<bool> {
    let axes = reference.axes();
    if sequences.len() != axes.len() {
        return Err(Error::Alphabet(format!(
            "{} sequences for a reference on {} axes",
            sequences.len(),
            axes.len()
        )));
    }
    let n = sequences.first().map_or(0, |s| s.len());
    if n == 0 || sequences.iter().any(|s| s.len() != n) {
        return Err(Error::Argument("sequences must be nonempty and of equal length".into()));
    }
    for (seq, (v, size)) in sequences.iter().zip(axes) {
        if let Some(s) = seq.iter().find(|&&s| s >= *size) {
            return Err(Error::Alphabet(format!("{v} symbol {s} out of range")));
        }
    }
    let mut counter = TypicalityCounter::new(reference.probs(), n, epsilon);
    for i in 0..n {
        let cell = sequences
            .iter()
            .zip(axes)
            .fold(0, |cell, (seq, (_, size))| cell * size + seq[i]);
        if !counter.push(cell) {
            return Ok(false);
        }
    }
    Ok(counter.finish())
}

fn cdf(probs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = f64::INFINITY;
    }
    out
}

fn sample(cdf: &[f64], u: f64) -> usize {
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
}

struct Sampler {
    base: ChaCha8Rng,
}

impl Sampler {
    fn stream(&self, kind: u64, block: usize, index: usize) -> ChaCha8Rng {
        debug_assert!(block < 1 << 28 && index < 1 << 32);
        let mut rng = self.base.clone();
        rng.set_stream(kind << 60 | (block as u64) << 32 | index as u64);
        rng
    }
}

/// Precomputed laws used to draw sequences.
struct Tables {
    n1: usize,
    n2: usize,
    ny: usize,
    state_cdf: Vec<f64>,
    source_cdf: Vec<f64>,
    /// `Q*(x1 | x0, x2)` per `(x0, x2)`.
    action_cdf: Vec<Vec<f64>>,
    channel_cdf: Vec<Vec<f64>>,
    /// `Q*(x0, x2)` on axes `(X0, X2)`.
    source_reference: Vec<f64>,
}

impl Tables {
    fn new(cfg: &CodingConfig) -> Result<Self> {
        let (n0, n1, n2) = action_dims(&cfg.target)?;
        let q = cfg.target.probs();
        let mut action_cdf = Vec::with_capacity(n0 * n2);
        for x0 in 0..n0 {
            for x2 in 0..n2 {
                let column: Vec<f64> = (0..n1).map(|x1| q[(x0 * n1 + x1) * n2 + x2]).collect();
                let total: f64 = column.iter().sum();
                let law = if total > 0.0 {
                    column.iter().map(|p| p / total).collect()
                } else {
                    // Pair never targeted: fall back to the state-conditional law.
                    let slice: Vec<f64> = (0..n1)
                        .map(|x1| (0..n2).map(|b| q[(x0 * n1 + x1) * n2 + b]).sum())
                        .collect();
                    let mass: f64 = slice.iter().sum();
                    if mass > 0.0 {
                        slice.iter().map(|p| p / mass).collect()
                    } else {
                        vec![1.0 / n1 as f64; n1]
                    }
                };
                action_cdf.push(cdf(&law));
            }
        }
        Ok(Self {
            n1,
            n2,
            ny: cfg.gamma.outputs(),
            state_cdf: cdf(cfg.rho.probs()),
            source_cdf: cdf(cfg.target.marginal(&[Var::X2])?.probs()),
            action_cdf,
            channel_cdf: (0..n1).map(|x1| cdf(cfg.gamma.row(x1))).collect(),
            source_reference: cfg.target.marginal(&[Var::X0, Var::X2])?.probs().to_vec(),
        })
    }
}

struct Simulator<'a> {
    cfg: &'a CodingConfig,
    tables: Tables,
    sampler: Sampler,
    n: usize,
}

impl Simulator<'_> {
    fn source_codeword(&self, m: usize) -> Vec<usize> {
        let mut rng = self.sampler.stream(STREAM_SOURCE, 0, m);
        (0..self.n)
            .map(|_| sample(&self.tables.source_cdf, rng.random()))
            .collect()
    }

    fn states(&self, block: usize) -> Vec<usize> {
        let mut rng = self.sampler.stream(STREAM_STATE, block, 0);
        (0..self.n)
            .map(|_| sample(&self.tables.state_cdf, rng.random()))
            .collect()
    }

    fn action(&self, u: f64, x0: usize, x2: usize) -> usize {
        sample(&self.tables.action_cdf[x0 * self.tables.n2 + x2], u)
    }

    fn channel_codeword(&self, kind: u64, block: usize, m: usize, x0: &[usize], x2: &[usize]) -> Vec<usize> {
        let mut rng = self.sampler.stream(kind, block, m);
        x0.iter()
            .zip(x2)
            .map(|(&a, &b)| self.action(rng.random(), a, b))
            .collect()
    }

    /// Most typical source index for `x0`: among codewords jointly typical
    /// with it, the one with the smallest largest relative cell deviation
    /// (lowest index on ties). `None` if no codeword is typical.
    fn encode(&self, x0: &[usize]) -> Option<usize> {
        let n2 = self.tables.n2;
        let mut counter =
            TypicalityCounter::new(&self.tables.source_reference, self.n, self.cfg.params.epsilon);
        let mut best: Option<(usize, f64)> = None;
        for m in 0..self.cfg.codebook_size {
            counter.reset();
            let mut rng = self.sampler.stream(STREAM_SOURCE, 0, m);
            let alive = x0
                .iter()
                .all(|&a| counter.push(a * n2 + sample(&self.tables.source_cdf, rng.random())));
            if !alive || !counter.finish() {
                continue;
            }
            let deviation = counter.deviation();
            if best.is_none_or(|(_, d)| deviation < d) {
                best = Some((m, deviation));
                counter.cap = deviation;
                if deviation == 0.0 {
                    break;
                }
            }
        }
        best.map(|(m, _)| m)
    }

    /// All indices whose channel codeword makes the four sequences typical.
    fn decode(&self, block: usize, x0: &[usize], x2: &[usize], y: &[usize]) -> Vec<usize> {
        let (n1, n2, ny) = (self.tables.n1, self.tables.n2, self.tables.ny);
        let reference = self.cfg.composed.probs();
        let mut counter = TypicalityCounter::new(reference, self.n, self.cfg.params.epsilon);
        let mut found = Vec::new();
        for m in 0..self.cfg.codebook_size {
            counter.reset();
            let mut rng = self.sampler.stream(STREAM_CHANNEL, block, m);
            let mut alive = true;
            for i in 0..self.n {
                let x1 = self.action(rng.random(), x0[i], x2[i]);
                if !counter.push(((x0[i] * n1 + x1) * n2 + x2[i]) * ny + y[i]) {
                    alive = false;
                    break;
                }
            }
            if alive && counter.finish() {
                found.push(m);
            }
        }
        found
    }

    fn run(&self) -> Result<SimResult> {
        let cfg = self.cfg;
        let blocks = cfg.params.blocks;
        let (n1, n2, ny) = (self.tables.n1, self.tables.n2, self.tables.ny);
        let mut counts = vec![0u64; cfg.composed.len()];
        let mut diagnostics = Vec::with_capacity(blocks);
        let (mut encoder_failures, mut decoder_errors) = (0, 0);

        let mut states = self.states(0);
        // Index DM 1 believes is in force, and the one DM 2 actually plays.
        let (mut dm1_index, mut dm2_index) = (0usize, 0usize);
        for b in 0..blocks {
            let x2_played = self.source_codeword(dm2_index);
            let x2_believed = if dm1_index == dm2_index {
                x2_played.clone()
            } else {
                self.source_codeword(dm1_index)
            };
            let last = b + 1 == blocks;
            let next_states = (!last).then(|| self.states(b + 1));

            let (x1, sent, encoder_success) = match &next_states {
                Some(next) => {
                    let found = self.encode(next);
                    if found.is_none() {
                        encoder_failures += 1;
                    }
                    let m = found.unwrap_or(0);
                    let word = self.channel_codeword(STREAM_CHANNEL, b, m, &states, &x2_believed);
                    (word, Some(m), found.is_some())
                }
                None => {
                    let word = self.channel_codeword(STREAM_PAYOFF_ONLY, b, 0, &states, &x2_believed);
                    (word, None, true)
                }
            };

            let mut noise = self.sampler.stream(STREAM_NOISE, b, 0);
            let y: Vec<usize> = x1
                .iter()
                .map(|&a| sample(&self.tables.channel_cdf[a], noise.random()))
                .collect();
            for i in 0..self.n {
                counts[((states[i] * n1 + x1[i]) * n2 + x2_played[i]) * ny + y[i]] += 1;
            }

            let mut decoded = None;
            let mut candidates = 0;
            if let Some(m) = sent {
                let typical = self.decode(b, &states, &x2_played, &y);
                candidates = typical.len();
                let m_hat = typical.first().copied().unwrap_or(0);
                if m_hat != m {
                    decoder_errors += 1;
                }
                decoded = Some(m_hat);
                dm1_index = m;
                dm2_index = m_hat;
            }
            diagnostics.push(BlockDiagnostics {
                block: b,
                sent_index: sent,
                decoded_index: decoded,
                encoder_success,
                typical_candidates: candidates,
                payoff_only: last,
            });
            if let Some(next) = next_states {
                states = next;
            }
        }

        let total = (self.n * blocks) as f64;
        let empirical = JointDistribution::new(
            cfg.composed.axes(),
            counts.iter().map(|&c| c as f64 / total).collect(),
        )?;
        let tv_distance = total_variation(&empirical, &cfg.composed)?;
        let spec = cfg.composed.axes();
        let ny_axis = spec[3].1;
        let average_payoff = empirical
            .probs()
            .iter()
            .enumerate()
            .map(|(l, p)| p * cfg.payoff.values()[l / ny_axis])
            .sum();
        Ok(SimResult {
            empirical,
            tv_distance,
            encoder_failures,
            decoder_errors,
            average_payoff,
            target_payoff: cfg.target_payoff()?,
            rate: cfg.rate,
            codebook_size: cfg.codebook_size,
            blocks: diagnostics,
        })
    }
}

pub fn run(cfg: &CodingConfig) -> Result<SimResult> {
    let sim = Simulator {
        cfg,
        tables: Tables::new(cfg)?,
        sampler: Sampler {
            base: ChaCha8Rng::seed_from_u64(cfg.params.seed),
        },
        n: cfg.params.block_length,
    };
    sim.run()
}
