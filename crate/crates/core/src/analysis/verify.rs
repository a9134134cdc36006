//! Quick self-checks run by `sim verify`. Each check compares an
//! implementation against an independent evaluation.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    complexity_model, genie_sinr_curve, loglog_slope, mf_snr, rank_condition, SuppressionSetup,
};
use crate::arq::{run_packet, ArqConfig, Link, RoundObservation, Scheme};
use crate::channel::{draw_channel, transmit_round, CciProfile, ChannelProfile};
use crate::combiner::reference::{direct_combine, RoundData};
use crate::combiner::{
    mmse_combine, soft_symbol_stats, CombinerState, FrequencyChannel, LlrFrame, RoundContribution,
};
use crate::decoder::{siso_decode, Trellis};
use crate::error::Result;
use crate::numerics::{
    block_circulant, block_dft_matrix, channel_frequency_response, dft_block, hermitian_inverse,
    identity, idft_block, BlockVector, CMatrix,
};
use crate::tx::CodeConfig;

#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check {
        name,
        passed,
        detail,
    }
}

fn cmat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMatrix {
    CMatrix::from_fn(r, c, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

fn cblock(rng: &mut ChaCha8Rng, n: usize, t: usize) -> BlockVector {
    let data = (0..n * t)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    BlockVector::new(n, t, data).expect("positive dimensions")
}

/// Runs every check. Errors inside a check count as a failure.
pub fn run_all(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let checks: Vec<(&'static str, fn(&mut ChaCha8Rng) -> Result<(bool, String)>)> = vec![
        ("dft_unitarity", dft_unitarity),
        ("block_circulant_diagonalization", diagonalization),
        ("recursive_vs_direct_combiner", combiner_oracle),
        ("rank_condition", rank_condition_examples),
        ("mf_snr_parseval", mf_snr_parseval),
        ("decoder_extrinsic_identity", decoder_identity),
        ("cost_counters", cost_counters),
        ("suppression_slope", suppression_slope),
    ];
    checks
        .into_iter()
        .map(|(name, f)| match f(&mut rng) {
            Ok((ok, detail)) => check(name, ok, detail),
            Err(e) => check(name, false, format!("error: {e}")),
        })
        .collect()
}

fn dft_unitarity(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for t in [7usize, 8, 129, 258] {
        let v = cblock(rng, 2, t);
        let back = idft_block(&dft_block(&v));
        let err = back
            .data()
            .iter()
            .zip(v.data())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
            / v.norm();
        worst = worst.max(err);
    }
    Ok((worst < 1e-10, format!("max relative error {worst:.2e}")))
}

fn diagonalization(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let (nr, nt, t) = (2, 2, 8);
        let taps: Vec<CMatrix> = (0..2).map(|_| cmat(rng, nr, nt)).collect();
        let h = block_circulant(&taps, t)?;
        let d = block_dft_matrix(t, nr) * h * block_dft_matrix(t, nt).adjoint();
        let lam = channel_frequency_response(&taps, t)?;
        let mut expect = CMatrix::zeros(nr * t, nt * t);
        for (i, l) in lam.iter().enumerate() {
            expect.view_mut((i * nr, i * nt), (nr, nt)).copy_from(l);
        }
        worst = worst.max((d - expect).norm());
    }
    Ok((worst < 1e-10, format!("max residual {worst:.2e}")))
}

fn combiner_oracle(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let k = rng.random_range(1..=3);
        let nt = [1, 2, 4][rng.random_range(0..3)];
        let nr = [1, 2, 4][rng.random_range(0..3)];
        let t = [4, 8][rng.random_range(0..2)];
        let l = rng.random_range(1..=2);
        let mut rounds = Vec::new();
        for _ in 0..k {
            let taps: Vec<CMatrix> = (0..l).map(|_| cmat(rng, nr, nt)).collect();
            let m = cmat(rng, nr, nr);
            rounds.push(RoundData {
                lambda: FrequencyChannel::new(channel_frequency_response(&taps, t)?)?,
                theta: &m * m.adjoint() + identity(nr) * Complex64::new(0.1, 0.0),
                y_f: cblock(rng, nr, t),
            });
        }
        let llrs = (0..2 * nt * t)
            .map(|_| rng.random_range(-4.0..4.0))
            .collect();
        let soft = soft_symbol_stats(&LlrFrame::from_raw(llrs), nt, t)?;
        let mut state = CombinerState::new(nt, t);
        for (u, r) in rounds.iter().enumerate() {
            if u > 0 {
                state.commit();
            }
            let inv = hermitian_inverse(&r.theta)?;
            state.update(RoundContribution::new(&r.lambda, &r.theta, &inv, &r.y_f)?)?;
        }
        let a = mmse_combine(&state, &soft)?.z;
        let b = direct_combine(&rounds, &soft)?.z;
        let scale = b.data().iter().map(|x| x.norm()).fold(0.0, f64::max);
        let dev = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        worst = worst.max(dev / scale.max(1e-300));
    }
    Ok((worst < 1e-8, format!("max relative deviation {worst:.2e}")))
}

fn rank_condition_examples(_: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let ok = !rank_condition(&[2, 2], 3, 2)
        && rank_condition(&[2, 2, 2], 3, 2)
        && rank_condition(&[0, 0], 2, 2)
        && !rank_condition(&[0], 1, 2);
    Ok((ok, "strict sum-rank predicate".into()))
}

fn mf_snr_parseval(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let t = 16;
    let rounds: Vec<_> = (1..=2)
        .map(|k| draw_channel(&ChannelProfile::uniform(2), 2, 2, k, rng))
        .collect();
    let mut freq = 0.0;
    for r in &rounds {
        for lam in channel_frequency_response(&r.taps, t)? {
            freq += lam.iter().map(|v| v.norm_sqr()).sum::<f64>();
        }
    }
    let freq = freq / t as f64;
    let time = mf_snr(&rounds, 1.0)?;
    let err = (freq - time).abs() / time;
    Ok((err < 1e-10, format!("relative error {err:.2e}")))
}

fn decoder_identity(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let trellis = Trellis::new(&CodeConfig::default());
    let llr: Vec<f64> = (0..1032).map(|_| rng.random_range(-6.0..6.0)).collect();
    let out = siso_decode(&trellis, &LlrFrame::from_raw(llr.clone()))?;
    let worst = out
        .extrinsic
        .iter()
        .zip(&llr)
        .zip(&out.code_app)
        .map(|((e, a), p)| (e + a - p).abs() / p.abs().max(1.0))
        .fold(0.0, f64::max);
    Ok((worst <= 1e-12, format!("max deviation {worst:.2e}")))
}

fn cost_counters(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let link = Link::new(128, 2, 0)?;
    let t = link.frame_len();
    let model = complexity_model(t, 2, 5, 3, 2);
    let info: Vec<u8> = (0..link.n_info).map(|_| rng.random_range(0..2)).collect();
    let frame = link.transmit(&info)?;
    let mut ok = true;
    let mut detail = String::new();
    for scheme in Scheme::ALL {
        let cfg = ArqConfig {
            scheme,
            ..ArqConfig::default()
        };
        let mut r = ChaCha8Rng::seed_from_u64(7);
        let res = run_packet(&link, &info, &cfg, |k| {
            let chan = draw_channel(&ChannelProfile::uniform(2), 2, 2, k, &mut r);
            let y = transmit_round(&frame, &chan, None, 1e4, &mut r)?;
            Ok(RoundObservation {
                samples: y.samples,
                channel: chan,
            })
        })?;
        let (adds, mem) = match scheme {
            Scheme::Proposed => (model.adds_proposed, model.mem_proposed),
            Scheme::LlrLevel => (model.adds_llr, model.mem_llr),
        };
        ok &= res.rounds_used == 3 && res.additions == adds && res.persisted_reals as u64 == mem;
        detail += &format!(
            "{scheme}: adds {} / {adds}, memory {} / {mem}; ",
            res.additions, res.persisted_reals
        );
    }
    Ok((ok, detail.trim_end_matches("; ").to_string()))
}

fn suppression_slope(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let setup = SuppressionSetup {
        n_tx: 2,
        n_rx: 4,
        t: 128,
        rounds: 2,
        profile: ChannelProfile::uniform(2),
        cci: CciProfile::iid(1, 1).with_sir(0.0, 2)?,
    };
    let vars = [1e-3, 1e-4];
    let sinr = genie_sinr_curve(&setup, &vars, 5, rng.random())?;
    let slope = loglog_slope(&vars.map(|v| 1.0 / v), &sinr);
    Ok((slope >= 0.95, format!("slope {slope:.3}")))
}
