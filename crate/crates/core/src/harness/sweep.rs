//! Seeded, parallel BLER sweeps.
//!
//! Every random draw of frame `f` at round `k` comes from its own ChaCha8
//! stream seeded with `stream_seed(seed, f, k, purpose)`, so results depend
//! only on the scenario and the seed, never on the number of workers or the
//! order in which frames finish. The same streams are reused for every scheme
//! and Eb/N0 point; noise is drawn at unit variance and scaled, so curves are
//! compared on identical channel, interference and noise realizations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::Scenario;
use super::records::{sort_records, BlerRecord};
use crate::arq::{run_packet, Link, PacketResult, RoundObservation, Scheme};
use crate::channel::{
    draw_cci_channel, draw_channel, noise_var_from_ebn0, random_qpsk_frame, transmit_round,
    CciProfile, CciRound, ChannelProfile,
};
use crate::error::{invalid, Result};
use crate::tx::Bit;

pub const PURPOSE_INFO: u64 = 0;
pub const PURPOSE_CHANNEL: u64 = 1;
pub const PURPOSE_CCI_CHANNEL: u64 = 2;
pub const PURPOSE_CCI_SYMBOLS: u64 = 3;
pub const PURPOSE_NOISE: u64 = 4;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the stream used for `purpose` at (`frame`, `round`).
pub fn stream_seed(seed: u64, frame: u64, round: u64, purpose: u64) -> u64 {
    [frame, round, purpose]
        .iter()
        .fold(splitmix64(seed), |h, &x| splitmix64(h ^ x))
}

fn stream(seed: u64, frame: u64, round: u64, purpose: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, frame, round, purpose))
}

/// Everything that stays fixed across the frames of a sweep.
#[derive(Clone, Debug)]
pub struct SweepContext {
    pub scenario: Scenario,
    pub link: Link,
    pub profile: ChannelProfile,
    pub cci: Option<CciProfile>,
}

impl SweepContext {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        Ok(Self {
            link: Link::new(scenario.info_bits, scenario.n_tx, scenario.seed)?,
            profile: scenario.profile(),
            cci: scenario.cci_profile(),
            scenario: scenario.clone(),
        })
    }
}

/// Runs frame `frame` of the sweep for one scheme at one noise variance.
pub fn simulate_frame(
    ctx: &SweepContext,
    scheme: Scheme,
    noise_var: f64,
    frame: u64,
) -> Result<PacketResult> {
    let s = &ctx.scenario;
    let seed = s.seed;
    let mut rng = stream(seed, frame, 0, PURPOSE_INFO);
    let info: Vec<Bit> = (0..ctx.link.n_info)
        .map(|_| rng.random_range(0..2))
        .collect();
    let symbols = ctx.link.transmit(&info)?;
    let t = ctx.link.frame_len();
    let cfg = s.arq_config(scheme);
    run_packet(&ctx.link, &info, &cfg, |k| {
        let k64 = k as u64;
        let chan = draw_channel(
            &ctx.profile,
            s.n_tx,
            s.n_rx,
            k,
            &mut stream(seed, frame, k64, PURPOSE_CHANNEL),
        );
        let cci = match &ctx.cci {
            Some(p) => Some(CciRound {
                channel: draw_cci_channel(
                    p,
                    s.n_rx,
                    k,
                    &mut stream(seed, frame, k64, PURPOSE_CCI_CHANNEL),
                )?,
                symbols: random_qpsk_frame(
                    p.n_tx,
                    t,
                    &mut stream(seed, frame, k64, PURPOSE_CCI_SYMBOLS),
                ),
            }),
            None => None,
        };
        let y = transmit_round(
            &symbols,
            &chan,
            cci.as_ref(),
            noise_var,
            &mut stream(seed, frame, k64, PURPOSE_NOISE),
        )?;
        Ok(RoundObservation {
            samples: y.samples,
            channel: chan,
        })
    })
}

/// Per-round error counts of a finished cell.
pub fn cell_records(
    scheme: Scheme,
    ebn0_db: f64,
    rounds: usize,
    results: &[PacketResult],
) -> Vec<BlerRecord> {
    (1..=rounds)
        .map(|k| BlerRecord {
            scheme,
            ebn0_db,
            round: k,
            trials: results.len() as u64,
            frame_errors: results
                .iter()
                .filter(|r| !(r.success() && r.rounds_used <= k))
                .count() as u64,
        })
        .collect()
}

/// Simulates every (scheme, Eb/N0) cell with `workers` threads. After each
/// cell `on_cell` receives all records so far, sorted, so callers can flush
/// partial results.
pub fn run_sweep<F>(scenario: &Scenario, workers: usize, mut on_cell: F) -> Result<Vec<BlerRecord>>
where
    F: FnMut(&[BlerRecord]) -> Result<()>,
{
    if scenario.ebn0_db.is_empty() {
        return Err(invalid("no Eb/N0 points"));
    }
    let ctx = SweepContext::new(scenario)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?;
    let rate = ctx.link.code_rate();
    let mut records = Vec::new();
    for &scheme in &scenario.schemes {
        for &ebn0 in &scenario.ebn0_db {
            let noise_var = noise_var_from_ebn0(ebn0, 2, rate);
            let results: Vec<PacketResult> = pool.install(|| {
                (0..scenario.frames as u64)
                    .into_par_iter()
                    .map(|f| simulate_frame(&ctx, scheme, noise_var, f))
                    .collect::<Result<_>>()
            })?;
            records.extend(cell_records(scheme, ebn0, scenario.rounds, &results));
            sort_records(&mut records);
            on_cell(&records)?;
        }
    }
    Ok(records)
}
