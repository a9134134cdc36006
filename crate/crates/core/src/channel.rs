//! Short-term static MIMO-ISI channel and co-channel interferer.
//!
//! Channels are redrawn independently every ARQ round. The cyclic prefix is
//! not materialized: the received block is the circular convolution of the
//! symbol frame with the taps, which is what CP insertion and removal produce
//! under perfect synchronization.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::numerics::{hermitian_sqrt, BlockVector, CMatrix};
use crate::tx::{qpsk, SymbolFrame};

/// Power-delay profile of the desired link; powers sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelProfile {
    tap_powers: Vec<f64>,
}

impl ChannelProfile {
    pub fn new(tap_powers: Vec<f64>) -> Result<Self> {
        if tap_powers.is_empty() || tap_powers.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(invalid("tap powers must be non-negative and non-empty"));
        }
        let sum: f64 = tap_powers.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("tap powers sum to {sum}, expected 1")));
        }
        Ok(Self { tap_powers })
    }

    /// `L` taps of power `1/L`.
    pub fn uniform(taps: usize) -> Self {
        Self {
            tap_powers: vec![1.0 / taps as f64; taps],
        }
    }

    pub fn taps(&self) -> usize {
        self.tap_powers.len()
    }

    pub fn tap_powers(&self) -> &[f64] {
        &self.tap_powers
    }
}

/// Tap matrices `H_0..H_{L-1}` of one link at one ARQ round.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    pub taps: Vec<CMatrix>,
    pub round: usize,
}

impl ChannelRealization {
    pub fn n_rx(&self) -> usize {
        self.taps[0].nrows()
    }

    pub fn n_tx(&self) -> usize {
        self.taps[0].ncols()
    }
}

/// Interferer link description. Tap powers are absolute (they carry the
/// path loss) and are usually set through [`CciProfile::with_sir`].
#[derive(Clone, Debug, PartialEq)]
pub struct CciProfile {
    pub n_tx: usize,
    pub tap_powers: Vec<f64>,
    pub delta_tx: f64,
    pub delta_rx: f64,
    /// Rank of each scattering matrix `A_l'`; `None` means full rank.
    pub scatter_rank: Option<usize>,
}

impl CciProfile {
    /// i.i.d. interferer with `taps` equal-power paths of unit total power.
    pub fn iid(n_tx: usize, taps: usize) -> Self {
        Self {
            n_tx,
            tap_powers: vec![1.0 / taps as f64; taps],
            delta_tx: 0.0,
            delta_rx: 0.0,
            scatter_rank: None,
        }
    }

    /// Rescales the tap powers so that the interferer sits at `sir_db`
    /// relative to a desired user with `n_tx` antennas.
    pub fn with_sir(mut self, sir_db: f64, n_tx: usize) -> Result<Self> {
        let scale = sir_to_cci_scale(sir_db, n_tx, self.n_tx, &self.tap_powers)?;
        for p in &mut self.tap_powers {
            *p *= scale;
        }
        Ok(self)
    }

    pub fn total_power(&self) -> f64 {
        self.tap_powers.iter().sum()
    }
}

/// Factor applied to the interferer tap powers so that
/// `SIR = N_T / (N'_T Σ σ_u²)` holds for the requested SIR.
pub fn sir_to_cci_scale(
    sir_db: f64,
    n_tx: usize,
    n_tx_cci: usize,
    tap_powers: &[f64],
) -> Result<f64> {
    let sum: f64 = tap_powers.iter().sum();
    if !(sum > 0.0) || n_tx_cci == 0 {
        return Err(invalid("interferer tap powers must not all be zero"));
    }
    let sir = 10f64.powf(sir_db / 10.0);
    let target = n_tx as f64 / (n_tx_cci as f64 * sir);
    Ok(target / sum)
}

/// Noise variance for a given `E_b/N_0` measured per useful bit per receive
/// antenna.
///
/// Each receive antenna collects `N_T` units of signal energy per channel use
/// and `N_T · bits_per_symbol · code_rate` useful bits, where `code_rate`
/// counts the tail (512/1032 for the default frame). Hence
/// `σ² = N_T / (N_T · bits_per_symbol · code_rate · Eb/N0)`.
pub fn noise_var_from_ebn0(ebn0_db: f64, bits_per_symbol: usize, code_rate: f64) -> f64 {
    let ebn0 = 10f64.powf(ebn0_db / 10.0);
    1.0 / (bits_per_symbol as f64 * code_rate * ebn0)
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, var: f64) -> CMatrix {
    // Column-major fill order is part of the determinism contract.
    DMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng, var))
}

/// Draws `H_l` with i.i.d. `CN(0, σ_l²)` entries.
pub fn draw_channel<R: Rng + ?Sized>(
    profile: &ChannelProfile,
    n_tx: usize,
    n_rx: usize,
    round: usize,
    rng: &mut R,
) -> ChannelRealization {
    let taps = profile
        .tap_powers
        .iter()
        .map(|&p| {
            if p == 0.0 {
                CMatrix::zeros(n_rx, n_tx)
            } else {
                gaussian_matrix(rng, n_rx, n_tx, p)
            }
        })
        .collect();
    ChannelRealization { taps, round }
}

/// Single-coefficient correlation matrix: ones on the diagonal, `delta` elsewhere.
pub fn correlation_matrix(n: usize, delta: f64) -> CMatrix {
    DMatrix::from_fn(n, n, |i, j| {
        Complex64::new(if i == j { 1.0 } else { delta }, 0.0)
    })
}

/// Draws interferer taps `H_l' = R_Rx^{1/2} A_l' R_Tx^{1/2}`.
///
/// A full-rank `A_l'` has i.i.d. `CN(0, σ_u²)` entries. A rank-`r` one is
/// `σ_u X Y / √r` with i.i.d. unit Gaussian `X ∈ C^{N_R×r}`, `Y ∈ C^{r×N'_T}`,
/// which has the same expected Frobenius energy `N_R N'_T σ_u²`.
pub fn draw_cci_channel<R: Rng + ?Sized>(
    cci: &CciProfile,
    n_rx: usize,
    round: usize,
    rng: &mut R,
) -> Result<ChannelRealization> {
    let full = cci.n_tx.min(n_rx);
    let rank = cci.scatter_rank.unwrap_or(full);
    if rank == 0 || rank > full {
        return Err(invalid(format!(
            "scatter rank {rank} outside 1..={full} for {} x {n_rx} interferer",
            cci.n_tx
        )));
    }
    for d in [cci.delta_tx, cci.delta_rx] {
        if !(0.0..1.0).contains(&d) {
            return Err(invalid("correlation coefficients must lie in [0, 1)"));
        }
    }
    let r_rx =
        (cci.delta_rx != 0.0).then(|| hermitian_sqrt(&correlation_matrix(n_rx, cci.delta_rx)));
    let r_tx =
        (cci.delta_tx != 0.0).then(|| hermitian_sqrt(&correlation_matrix(cci.n_tx, cci.delta_tx)));
    let taps = cci
        .tap_powers
        .iter()
        .map(|&p| {
            let mut a = if p == 0.0 {
                CMatrix::zeros(n_rx, cci.n_tx)
            } else if rank == full {
                gaussian_matrix(rng, n_rx, cci.n_tx, p)
            } else {
                let x = gaussian_matrix(rng, n_rx, rank, 1.0);
                let y = gaussian_matrix(rng, rank, cci.n_tx, 1.0);
                (x * y) * Complex64::new((p / rank as f64).sqrt(), 0.0)
            };
            if let Some(r) = &r_rx {
                a = r * a;
            }
            if let Some(r) = &r_tx {
                a *= r;
            }
            a
        })
        .collect();
    Ok(ChannelRealization { taps, round })
}

/// i.i.d. uniform QPSK frame, used for interferer symbols.
pub fn random_qpsk_frame<R: Rng + ?Sized>(n_tx: usize, t: usize, rng: &mut R) -> SymbolFrame {
    let data = (0..n_tx * t)
        .map(|_| qpsk(rng.random_range(0..2u8), rng.random_range(0..2u8)))
        .collect();
    SymbolFrame::new(BlockVector::new(n_tx, t, data).expect("dimensions are consistent"))
}

/// `Σ_l H_l s_{(i-l) mod T}` for every channel use `i`.
pub fn circular_convolve(chan: &ChannelRealization, frame: &SymbolFrame) -> Result<BlockVector> {
    let t = frame.len();
    let n_rx = chan.n_rx();
    if chan.n_tx() != frame.n_tx() {
        return Err(invalid("channel and frame disagree on transmit antennas"));
    }
    if chan.taps.len() > t {
        return Err(invalid("more taps than channel uses"));
    }
    let s = frame.symbols();
    let mut y = BlockVector::zeros(n_rx, t);
    for i in 0..t {
        let out = y.block_mut(i);
        for (l, h) in chan.taps.iter().enumerate() {
            let src = s.block((i + t - l) % t);
            for (c, &sv) in src.iter().enumerate() {
                for (r, o) in out.iter_mut().enumerate() {
                    *o += h[(r, c)] * sv;
                }
            }
        }
    }
    Ok(y)
}

/// Interferer contribution for one round: its channel and its symbols.
#[derive(Clone, Debug)]
pub struct CciRound {
    pub channel: ChannelRealization,
    pub symbols: SymbolFrame,
}

/// Time-domain received block of one ARQ round.
#[derive(Clone, Debug)]
pub struct ReceivedBlock {
    pub samples: BlockVector,
    pub noise_var: f64,
}

/// `y_i = Σ_l H_l s_{i-l} + Σ_l' H^CCI_l' s^CCI_{i-l'} + n_i` with
/// `n_i ~ CN(0, σ² I)`.
pub fn transmit_round<R: Rng + ?Sized>(
    frame: &SymbolFrame,
    chan: &ChannelRealization,
    cci: Option<&CciRound>,
    noise_var: f64,
    rng: &mut R,
) -> Result<ReceivedBlock> {
    let mut y = circular_convolve(chan, frame)?;
    if let Some(c) = cci {
        if c.symbols.len() != frame.len() || c.channel.n_rx() != chan.n_rx() {
            return Err(invalid(
                "interferer dimensions do not match the desired link",
            ));
        }
        let w = circular_convolve(&c.channel, &c.symbols)?;
        for (a, b) in y.data_mut().iter_mut().zip(w.data()) {
            *a += b;
        }
    }
    if noise_var > 0.0 {
        for v in y.data_mut() {
            *v += complex_gaussian(rng, noise_var);
        }
    }
    Ok(ReceivedBlock {
        samples: y,
        noise_var,
    })
}
