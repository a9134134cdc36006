//! Measurement instruments: interferer covariance rank, the sum-rank
//! suppression condition, matched-filter SNR, post-combining SINR and the
//! memory/addition cost model of the two combining schemes.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{
    circular_convolve, draw_cci_channel, draw_channel, random_qpsk_frame, CciProfile,
    ChannelProfile, ChannelRealization,
};
use crate::combiner::{
    mmse_combine, CombinerState, FrequencyChannel, RoundContribution, SoftStats,
};
use crate::error::{invalid, Error, Result};
use crate::numerics::{
    channel_frequency_response, dft_block, hermitian_inverse, identity, numerical_rank,
    BlockVector, CMatrix,
};

pub mod verify;

/// Reported SINR when the residual is exactly zero.
pub const SINR_CAP: f64 = 1e12;

/// Minimum number of samples per antenna accepted by [`measure_sinr`].
pub const MIN_SINR_SAMPLES: usize = 100;

/// `Θ^CCI = Σ_l' H_l' H_l'^H`.
pub fn cci_covariance(chan: &ChannelRealization) -> CMatrix {
    let n = chan.n_rx();
    chan.taps
        .iter()
        .fold(CMatrix::zeros(n, n), |acc, h| acc + h * h.adjoint())
}

/// Numerical rank of `Θ^CCI` (eigenvalues above `1e-10 λ_max`).
pub fn cci_cov_rank(chan: &ChannelRealization) -> usize {
    numerical_rank(&cci_covariance(chan))
}

/// Sum-rank condition `Σ_u ρ_u < k N_R − N_T` with `k = ranks.len()`.
pub fn rank_condition(ranks: &[usize], n_rx: usize, n_tx: usize) -> bool {
    let lhs: i64 = ranks.iter().map(|&r| r as i64).sum();
    lhs < (ranks.len() * n_rx) as i64 - n_tx as i64
}

/// Instantaneous matched-filter SNR `Σ_l Σ_u tr(H_l^(u)H H_l^(u)) / σ²`.
pub fn mf_snr(rounds: &[ChannelRealization], noise_var: f64) -> Result<f64> {
    if !(noise_var > 0.0) {
        return Err(invalid("noise variance must be positive"));
    }
    let energy: f64 = rounds
        .iter()
        .flat_map(|r| &r.taps)
        .map(|h| h.iter().map(|v| v.norm_sqr()).sum::<f64>())
        .sum();
    Ok(energy / noise_var)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SinrReport {
    /// `ĝ_t = mean_i z_{t,i} s*_{t,i}`
    pub gain: Vec<Complex64>,
    /// `mean_i |z_{t,i} − ĝ_t s_{t,i}|²`
    pub residual_var: Vec<f64>,
    /// `Σ_t |ĝ_t|² / Σ_t var_t`, capped at [`SINR_CAP`].
    pub sinr: f64,
    pub noise_var: Option<f64>,
}

/// Empirical SINR of decision statistics `z` against the true symbols.
pub fn measure_sinr(z: &BlockVector, symbols: &BlockVector) -> Result<SinrReport> {
    if z.block_size() != symbols.block_size() || z.num_blocks() != symbols.num_blocks() {
        return Err(invalid("statistics and symbols differ in shape"));
    }
    let n = z.block_size();
    let t = z.num_blocks();
    if t < MIN_SINR_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_SINR_SAMPLES,
            got: t,
        });
    }
    let mut gain = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..t {
        for (a, g) in gain.iter_mut().enumerate() {
            *g += z.block(i)[a] * symbols.block(i)[a].conj();
        }
    }
    for g in &mut gain {
        *g /= t as f64;
    }
    let mut residual_var = vec![0.0; n];
    for i in 0..t {
        for (a, v) in residual_var.iter_mut().enumerate() {
            *v += (z.block(i)[a] - gain[a] * symbols.block(i)[a]).norm_sqr();
        }
    }
    for v in &mut residual_var {
        *v /= t as f64;
    }
    let signal: f64 = gain.iter().map(|g| g.norm_sqr()).sum();
    let noise: f64 = residual_var.iter().sum();
    let sinr = if noise > 0.0 {
        (signal / noise).min(SINR_CAP)
    } else if signal > 0.0 {
        SINR_CAP
    } else {
        0.0
    };
    Ok(SinrReport {
        gain,
        residual_var,
        sinr,
        noise_var: None,
    })
}

/// Memory (real values) and real additions of both combining schemes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CostModel {
    pub adds_proposed: u64,
    pub adds_llr: u64,
    pub mem_proposed: u64,
    pub mem_llr: u64,
}

pub fn complexity_model(
    t: usize,
    n_tx: usize,
    n_it: usize,
    k: usize,
    bits_per_symbol: usize,
) -> CostModel {
    let (t, n, it, b) = (t as u64, n_tx as u64, n_it as u64, bits_per_symbol as u64);
    let extra = k.saturating_sub(1) as u64;
    CostModel {
        adds_proposed: 2 * t * n * it * extra * (n + 1),
        adds_llr: t * n * it * extra * b,
        mem_proposed: 2 * t * n * (n + 1),
        mem_llr: t * n * b,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Modulation {
    Qpsk,
    Psk8,
    Qam16,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Psk8 => 3,
            Modulation::Qam16 => 4,
        }
    }
}

/// Cost ratio proposed / LLR-level from the counts: `2(N_T + 1)/log₂|S|`.
pub fn relative_cost(n_tx: usize, m: Modulation) -> f64 {
    2.0 * (n_tx as f64 + 1.0) / m.bits_per_symbol() as f64
}

/// Tabulated ratio: `N_T`, `2N_T/3 − 1/3`, `N_T − 1/2`. These do not agree
/// with [`relative_cost`]; both are exposed so callers can see the gap.
pub fn relative_cost_tabulated(n_tx: usize, m: Modulation) -> f64 {
    let n = n_tx as f64;
    match m {
        Modulation::Qpsk => n,
        Modulation::Psk8 => 2.0 * n / 3.0 - 1.0 / 3.0,
        Modulation::Qam16 => n - 0.5,
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}

/// Genie-feedback interference-suppression experiment.
#[derive(Clone, Debug)]
pub struct SuppressionSetup {
    pub n_tx: usize,
    pub n_rx: usize,
    pub t: usize,
    pub rounds: usize,
    pub profile: ChannelProfile,
    pub cci: CciProfile,
}

/// Aggregate post-combining SINR for each noise variance, with perfect
/// feedback (`s̄ = s`, `Σ̃ = 0`) and the true `Θ_u = Θ^CCI_u + σ² I`.
///
/// All noise variances share the same channels, symbols and unit noise
/// draws, so the curve is smooth in `σ²`. The SINR of each trial is averaged
/// in the log domain.
pub fn genie_sinr_curve(
    setup: &SuppressionSetup,
    noise_vars: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let (nt, nr, t) = (setup.n_tx, setup.n_rx, setup.t);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log_sum = vec![0.0; noise_vars.len()];
    for _ in 0..trials {
        let frame = random_qpsk_frame(nt, t, &mut rng);
        let soft = SoftStats::genie(frame.symbols());
        // Per round: frequency response, noiseless received DFT, Θ^CCI and
        // unit noise DFT.
        let mut rounds = Vec::with_capacity(setup.rounds);
        for k in 1..=setup.rounds {
            let chan = draw_channel(&setup.profile, nt, nr, k, &mut rng);
            let cci = draw_cci_channel(&setup.cci, nr, k, &mut rng)?;
            let cci_syms = random_qpsk_frame(setup.cci.n_tx, t, &mut rng);
            let mut clean = circular_convolve(&chan, &frame)?;
            let w = circular_convolve(&cci, &cci_syms)?;
            for (a, b) in clean.data_mut().iter_mut().zip(w.data()) {
                *a += b;
            }
            let unit = unit_noise(nr, t, &mut rng);
            let lambda = FrequencyChannel::new(channel_frequency_response(&chan.taps, t)?)?;
            rounds.push((
                lambda,
                dft_block(&clean),
                cci_covariance(&cci),
                dft_block(&unit),
            ));
        }
        for (slot, &var) in log_sum.iter_mut().zip(noise_vars) {
            let mut state = CombinerState::new(nt, t);
            for (u, (lambda, clean_f, theta_cci, unit_f)) in rounds.iter().enumerate() {
                if u > 0 {
                    state.commit();
                }
                let mut y_f = clean_f.clone();
                let s = var.sqrt();
                for (a, b) in y_f.data_mut().iter_mut().zip(unit_f.data()) {
                    *a += b * s;
                }
                let theta = theta_cci + identity(nr) * Complex64::new(var, 0.0);
                let inv = hermitian_inverse(&theta)?;
                state.update(RoundContribution::new(lambda, &theta, &inv, &y_f)?)?;
            }
            let z = mmse_combine(&state, &soft)?.z;
            let rep = measure_sinr(&z, frame.symbols())?;
            *slot += rep.sinr.ln();
        }
    }
    Ok(log_sum.iter().map(|v| (v / trials as f64).exp()).collect())
}

fn unit_noise(n: usize, t: usize, rng: &mut ChaCha8Rng) -> BlockVector {
    use rand_distr::{Distribution, StandardNormal};
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let data = (0..n * t)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re * s, im * s)
        })
        .collect();
    BlockVector::new(n, t, data).expect("positive dimensions")
}
