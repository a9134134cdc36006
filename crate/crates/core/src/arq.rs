//! Chase-type hybrid-ARQ engine.
//!
//! Every round retransmits the same symbol frame over a fresh channel. The
//! receiver runs `turbo_iters` iterations of soft-MMSE equalization and
//! Max-Log-MAP decoding per round and stops at the first round whose decoded
//! information bits are correct (genie ACK).
//!
//! * `Proposed` folds every round into a [`CombinerState`] and equalizes all
//!   rounds jointly.
//! * `LlrLevel` equalizes the current round alone and adds the extrinsic LLRs
//!   stored from earlier rounds before decoding.
//!
//! The first iteration of round `k` uses the decoder extrinsics of the last
//! iteration of round `k − 1` as priors. Received samples and channel
//! responses are local to a round and dropped when it ends.

use std::fmt;
use std::str::FromStr;

use crate::channel::ChannelRealization;
use crate::combiner::{
    combine_and_demap, estimate_cci_noise_cov, llr_level_equalize, soft_symbol_stats,
    CombinerState, CovEstimate, FrequencyChannel, LlrFrame,
};
use crate::decoder::{siso_decode, Trellis};
use crate::error::{invalid, Error, Result};
use crate::numerics::{channel_frequency_response, dft_block, identity, BlockVector};
use crate::tx::{conv_encode, map_frame, Bit, CodeConfig, Interleaver, SymbolFrame};

/// Covariance used when the very first estimate of a round carries no energy.
const THETA_FALLBACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    Proposed,
    LlrLevel,
}

impl Scheme {
    pub const ALL: [Scheme; 2] = [Scheme::Proposed, Scheme::LlrLevel];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::LlrLevel => "llr_level",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Scheme::Proposed),
            "llr_level" => Ok(Scheme::LlrLevel),
            other => Err(invalid(format!("unknown scheme '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ArqConfig {
    pub max_rounds: usize,
    pub turbo_iters: usize,
    pub scheme: Scheme,
    /// Leave the turbo loop as soon as the decoded bits are correct.
    pub early_exit: bool,
}

impl Default for ArqConfig {
    fn default() -> Self {
        Self {
            max_rounds: 3,
            turbo_iters: 5,
            scheme: Scheme::Proposed,
            early_exit: false,
        }
    }
}

impl ArqConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_rounds == 0 || self.turbo_iters == 0 {
            return Err(invalid("rounds and turbo iterations must be at least 1"));
        }
        Ok(())
    }
}

/// Transmitter and receiver chain shared by all packets of a scenario.
#[derive(Clone, Debug)]
pub struct Link {
    pub code: CodeConfig,
    pub trellis: Trellis,
    pub interleaver: Interleaver,
    pub n_tx: usize,
    pub n_info: usize,
}

impl Link {
    /// Default (35,23) code with an S-random interleaver drawn from `seed`.
    pub fn new(n_info: usize, n_tx: usize, seed: u64) -> Result<Self> {
        let code = CodeConfig::default();
        let coded = code.coded_len(n_info);
        if n_tx == 0 || coded % (2 * n_tx) != 0 {
            return Err(invalid(format!(
                "{coded} code bits cannot be split over {n_tx} QPSK antennas"
            )));
        }
        Ok(Self {
            code,
            trellis: Trellis::new(&code),
            interleaver: Interleaver::s_random(coded, seed, crate::tx::DEFAULT_SPREAD),
            n_tx,
            n_info,
        })
    }

    pub fn coded_len(&self) -> usize {
        self.code.coded_len(self.n_info)
    }

    /// Channel uses per frame.
    pub fn frame_len(&self) -> usize {
        self.coded_len() / (2 * self.n_tx)
    }

    pub fn code_rate(&self) -> f64 {
        self.n_info as f64 / self.coded_len() as f64
    }

    pub fn transmit(&self, info: &[Bit]) -> Result<SymbolFrame> {
        if info.len() != self.n_info {
            return Err(invalid("information block has the wrong length"));
        }
        let code = conv_encode(info, &self.code);
        map_frame(&self.interleaver.interleave(&code)?, self.n_tx)
    }
}

/// What the receiver sees in one round.
#[derive(Clone, Debug)]
pub struct RoundObservation {
    /// Time-domain received block, `N_R × T`.
    pub samples: BlockVector,
    /// Perfectly known desired-user channel.
    pub channel: ChannelRealization,
}

/// Genie error detection: ACK iff the decoded bits match exactly.
pub fn genie_error_check(decoded: &[Bit], truth: &[Bit]) -> bool {
    decoded == truth
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PacketResult {
    pub rounds_used: usize,
    pub per_round_success: Vec<bool>,
    pub per_round_decoded_bits: Vec<Vec<Bit>>,
    /// Real additions spent combining rounds (counted from round 2 on).
    pub additions: u64,
    /// Real values kept between rounds by the scheme's combining memory.
    pub persisted_reals: usize,
    /// Real values of the per-round covariance table (proposed scheme only).
    pub theta_side_table_reals: usize,
    /// Iterations whose covariance estimate or demapper fell back to a floor.
    pub degenerate_events: usize,
}

impl PacketResult {
    pub fn success(&self) -> bool {
        self.per_round_success.last().copied().unwrap_or(false)
    }
}

/// Runs one packet through up to `cfg.max_rounds` rounds. `observe(k)` is
/// called once at the start of round `k` (1-based) to obtain that round's
/// received block.
pub fn run_packet<F>(
    link: &Link,
    info: &[Bit],
    cfg: &ArqConfig,
    mut observe: F,
) -> Result<PacketResult>
where
    F: FnMut(usize) -> Result<RoundObservation>,
{
    cfg.validate()?;
    if info.len() != link.n_info {
        return Err(invalid("information block has the wrong length"));
    }
    let n_tx = link.n_tx;
    let t = link.frame_len();
    let n_llr = link.coded_len();

    let mut state = CombinerState::new(n_tx, t);
    let mut stored_llrs = LlrFrame::zeros(n_llr);
    let mut llr_additions = 0u64;
    let mut prior = LlrFrame::zeros(n_llr);
    let mut result = PacketResult {
        rounds_used: 0,
        per_round_success: Vec::new(),
        per_round_decoded_bits: Vec::new(),
        additions: 0,
        persisted_reals: 0,
        theta_side_table_reals: 0,
        degenerate_events: 0,
    };

    for k in 1..=cfg.max_rounds {
        let obs = observe(k)?;
        if obs.samples.block_size() != obs.channel.n_rx()
            || obs.samples.num_blocks() != t
            || obs.channel.n_tx() != n_tx
        {
            return Err(invalid("observation does not match the link dimensions"));
        }
        let y_f = dft_block(&obs.samples);
        let lambda = FrequencyChannel::new(channel_frequency_response(&obs.channel.taps, t)?)?;
        drop(obs);

        let mut theta: Option<CovEstimate> = None;
        let mut decoded = Vec::new();
        let mut round_llrs = LlrFrame::zeros(n_llr);
        for _ in 0..cfg.turbo_iters {
            let soft = soft_symbol_stats(&prior, n_tx, t)?;
            theta = Some(match estimate_cci_noise_cov(&y_f, &lambda, &soft.s_bar_f) {
                Ok(est) => est,
                Err(Error::DegenerateEstimate(_)) => {
                    result.degenerate_events += 1;
                    theta
                        .take()
                        .unwrap_or_else(|| fallback_theta(lambda.n_rx()))
                }
                Err(e) => return Err(e),
            });
            let est = theta.as_ref().expect("set above");

            let eq_llrs = match cfg.scheme {
                Scheme::Proposed => {
                    state.update_state(&lambda, est, &y_f)?;
                    let out = combine_and_demap(&state, &soft)?;
                    result.degenerate_events += usize::from(out.demap.degenerate);
                    out.demap.llrs
                }
                Scheme::LlrLevel => {
                    let out = llr_level_equalize(&y_f, &lambda, est, &soft)?;
                    result.degenerate_events += usize::from(out.demap.degenerate);
                    if k > 1 {
                        llr_additions += n_llr as u64;
                        out.demap.llrs.add(&stored_llrs)?
                    } else {
                        out.demap.llrs
                    }
                }
            };

            let code_llrs = LlrFrame::from_raw(link.interleaver.deinterleave(eq_llrs.values())?);
            let dec = siso_decode(&link.trellis, &code_llrs)?;
            prior = LlrFrame::from_raw(link.interleaver.interleave(&dec.extrinsic)?);
            decoded = dec.info_bits;
            round_llrs = eq_llrs;
            if cfg.early_exit && genie_error_check(&decoded, info) {
                break;
            }
        }

        let ack = genie_error_check(&decoded, info);
        result.rounds_used = k;
        result.per_round_success.push(ack);
        result.per_round_decoded_bits.push(decoded);
        if ack {
            break;
        }
        match cfg.scheme {
            Scheme::Proposed => state.commit(),
            Scheme::LlrLevel => stored_llrs = round_llrs,
        }
    }

    match cfg.scheme {
        Scheme::Proposed => {
            result.additions = state.additions();
            result.persisted_reals = state.persisted_reals();
            result.theta_side_table_reals = state.theta_side_table_reals();
        }
        Scheme::LlrLevel => {
            result.additions = llr_additions;
            result.persisted_reals = stored_llrs.len();
        }
    }
    Ok(result)
}

fn fallback_theta(n_rx: usize) -> CovEstimate {
    CovEstimate {
        raw: identity(n_rx) * num_complex::Complex64::new(THETA_FALLBACK, 0.0),
        inverse: identity(n_rx) * num_complex::Complex64::new(1.0 / THETA_FALLBACK, 0.0),
    }
}
