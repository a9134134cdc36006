//! Frequency-domain soft-MMSE turbo packet combiner.
//!
//! At ARQ round `k` the combiner equalizes all rounds `1..=k` jointly without
//! keeping their received signals. Everything it needs from earlier rounds
//! is folded into two per-bin accumulators:
//!
//! ```text
//! D_i  = Σ_u Λ_i^(u)H Θ_u^{-1} Λ_i^(u)          (N_T × N_T, Hermitian PSD)
//! ỹ_f,i = Σ_u Λ_i^(u)H Θ_u^{-1} y_f,i^(u)       (N_T)
//! ```
//!
//! With `M_i = (Σ̃^{-1} + D_i)^{-1}` the matrix inversion lemma gives
//!
//! ```text
//! C_i = D_i − D_i M_i D_i
//! z_f,i = (I − D_i M_i) ỹ_f,i − (C_i − diag C̃) s̄_f,i
//! ```
//!
//! `M_i` is evaluated as `S (I + S D_i S)^{-1} S` with `S = Σ̃^{1/2}`, so
//! zero entries of `Σ̃` are allowed.

pub mod reference;

use std::f64::consts::SQRT_2;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::numerics::{dft_block, hermitian_inverse, idft_block, BlockVector, CMatrix};

/// Every LLR handed between receiver blocks is clamped to this magnitude.
pub const LLR_CLAMP: f64 = 50.0;

/// Diagonal loading of the covariance estimate, relative to `tr(Θ)/N_R`.
pub const THETA_REGULARIZATION: f64 = 1e-9;

/// Lower bound on the demapper residual variance.
pub const NU_FLOOR: f64 = 1e-12;

/// Real LLRs, one per code bit; positive favors bit 0.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct LlrFrame(Vec<f64>);

impl LlrFrame {
    /// Wraps `values`, clamping each to `±LLR_CLAMP`. NaN becomes 0.
    pub fn from_raw(mut values: Vec<f64>) -> Self {
        for v in &mut values {
            *v = if v.is_nan() {
                0.0
            } else {
                v.clamp(-LLR_CLAMP, LLR_CLAMP)
            };
        }
        Self(values)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    /// Element-wise sum, clamped.
    pub fn add(&self, other: &LlrFrame) -> Result<LlrFrame> {
        if self.len() != other.len() {
            return Err(invalid("LLR frames differ in length"));
        }
        Ok(Self::from_raw(
            self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect(),
        ))
    }
}

/// Soft symbols and their variances derived from a priori LLRs.
#[derive(Clone, Debug)]
pub struct SoftStats {
    /// `s̄` in the time domain, one block per channel use.
    pub s_bar: BlockVector,
    /// DFT of `s̄`.
    pub s_bar_f: BlockVector,
    /// `σ²_{t,i}`, laid out like `s_bar`.
    pub sigma2: Vec<f64>,
    /// Diagonal of `Σ̃`, the time average of the per-symbol variances.
    pub sigma2_avg: Vec<f64>,
}

impl SoftStats {
    pub fn n_tx(&self) -> usize {
        self.s_bar.block_size()
    }

    pub fn len(&self) -> usize {
        self.s_bar.num_blocks()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Stats for perfectly known symbols: `s̄ = s`, `σ² = 0`.
    pub fn genie(symbols: &BlockVector) -> Self {
        let n = symbols.block_size();
        Self {
            s_bar: symbols.clone(),
            s_bar_f: dft_block(symbols),
            sigma2: vec![0.0; symbols.data().len()],
            sigma2_avg: vec![0.0; n],
        }
    }
}

/// Gray-QPSK soft symbols: `s̄ = (tanh(L_I/2) + j tanh(L_Q/2))/√2`,
/// `σ² = 1 − |s̄|²`.
pub fn soft_symbol_stats(apriori: &LlrFrame, n_tx: usize, t: usize) -> Result<SoftStats> {
    if apriori.len() != 2 * n_tx * t {
        return Err(invalid(format!(
            "{} a priori LLRs for {n_tx} x {t} QPSK symbols",
            apriori.len()
        )));
    }
    let mut sigma2 = Vec::with_capacity(n_tx * t);
    let mut sigma2_avg = vec![0.0; n_tx];
    let data: Vec<Complex64> = apriori
        .values()
        .chunks(2)
        .enumerate()
        .map(|(idx, p)| {
            let s = Complex64::new((p[0] / 2.0).tanh(), (p[1] / 2.0).tanh()) / SQRT_2;
            let v = (1.0 - s.norm_sqr()).max(0.0);
            sigma2.push(v);
            sigma2_avg[idx % n_tx] += v;
            s
        })
        .collect();
    for v in &mut sigma2_avg {
        *v /= t as f64;
    }
    let s_bar = BlockVector::new(n_tx, t, data)?;
    let s_bar_f = dft_block(&s_bar);
    Ok(SoftStats {
        s_bar,
        s_bar_f,
        sigma2,
        sigma2_avg,
    })
}

/// Per-bin channel frequency response `Λ_0..Λ_{T-1}` of one round.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyChannel {
    bins: Vec<CMatrix>,
}

impl FrequencyChannel {
    pub fn new(bins: Vec<CMatrix>) -> Result<Self> {
        let Some(first) = bins.first() else {
            return Err(invalid("frequency channel needs at least one bin"));
        };
        let shape = first.shape();
        if bins.iter().any(|b| b.shape() != shape) {
            return Err(invalid("all bins must share the same dimensions"));
        }
        Ok(Self { bins })
    }

    pub fn bins(&self) -> &[CMatrix] {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn n_rx(&self) -> usize {
        self.bins[0].nrows()
    }

    pub fn n_tx(&self) -> usize {
        self.bins[0].ncols()
    }

    /// `Λ_i x_i` for every bin.
    pub fn apply(&self, x: &BlockVector) -> BlockVector {
        let mut out = BlockVector::zeros(self.n_rx(), self.len());
        for (i, lam) in self.bins.iter().enumerate() {
            let v = lam * DVector::from_column_slice(x.block(i));
            out.block_mut(i).copy_from_slice(v.as_slice());
        }
        out
    }
}

/// CCI-plus-noise covariance estimate of one round.
#[derive(Clone, Debug)]
pub struct CovEstimate {
    /// Sample covariance of the residual `y_f − Λ s̄_f`, before loading.
    pub raw: CMatrix,
    /// Inverse of the diagonally loaded estimate.
    pub inverse: CMatrix,
}

/// `Θ = (1/T) Σ_i r_i r_i^H` with `r_i = y_f,i − Λ_i s̄_f,i`.
pub fn sample_residual_covariance(
    y_f: &BlockVector,
    lambda: &FrequencyChannel,
    s_bar_f: &BlockVector,
) -> Result<CMatrix> {
    let t = lambda.len();
    let n_rx = lambda.n_rx();
    if y_f.num_blocks() != t || y_f.block_size() != n_rx {
        return Err(invalid("received block does not match the channel"));
    }
    if s_bar_f.num_blocks() != t || s_bar_f.block_size() != lambda.n_tx() {
        return Err(invalid("soft symbols do not match the channel"));
    }
    let mut theta = CMatrix::zeros(n_rx, n_rx);
    let mut r = DVector::<Complex64>::zeros(n_rx);
    for (i, lam) in lambda.bins().iter().enumerate() {
        r.copy_from_slice(y_f.block(i));
        r -= lam * DVector::from_column_slice(s_bar_f.block(i));
        theta += &r * r.adjoint();
    }
    Ok(theta / Complex64::new(t as f64, 0.0))
}

/// Estimates `Θ_k` and returns it together with the inverse of its loaded
/// version `Θ_k + ε tr(Θ_k)/N_R · I`.
pub fn estimate_cci_noise_cov(
    y_f: &BlockVector,
    lambda: &FrequencyChannel,
    s_bar_f: &BlockVector,
) -> Result<CovEstimate> {
    let n_rx = lambda.n_rx();
    if lambda.len() < n_rx {
        return Err(Error::DegenerateEstimate(format!(
            "{} bins cannot estimate a {n_rx} x {n_rx} covariance",
            lambda.len()
        )));
    }
    let raw = sample_residual_covariance(y_f, lambda, s_bar_f)?;
    let inverse = regularized_inverse(&raw)?;
    Ok(CovEstimate { raw, inverse })
}

/// Inverse of `Θ + ε tr(Θ)/N_R · I`.
pub fn regularized_inverse(theta: &CMatrix) -> Result<CMatrix> {
    let n = theta.nrows();
    let tr: f64 = (0..n).map(|i| theta[(i, i)].re).sum();
    if !(tr > 0.0) || !tr.is_finite() {
        return Err(Error::DegenerateEstimate(format!(
            "covariance trace is {tr}"
        )));
    }
    let mut loaded = theta.clone();
    let load = THETA_REGULARIZATION * tr / n as f64;
    for i in 0..n {
        loaded[(i, i)] += load;
    }
    hermitian_inverse(&loaded).map_err(|e| Error::DegenerateEstimate(e.to_string()))
}

/// Contribution of a single round to the accumulators.
#[derive(Clone, Debug)]
pub struct RoundContribution {
    /// `Λ_i^H Θ^{-1} Λ_i` per bin.
    pub d: Vec<CMatrix>,
    /// `Λ_i^H Θ^{-1} y_f,i` per bin.
    pub y_tilde: BlockVector,
    /// The covariance estimate the contribution was built from.
    pub theta: CMatrix,
}

impl RoundContribution {
    pub fn new(
        lambda: &FrequencyChannel,
        theta: &CMatrix,
        theta_inv: &CMatrix,
        y_f: &BlockVector,
    ) -> Result<Self> {
        let n_tx = lambda.n_tx();
        let n_rx = lambda.n_rx();
        if theta_inv.shape() != (n_rx, n_rx) {
            return Err(invalid(
                "covariance dimension does not match receive antennas",
            ));
        }
        if y_f.num_blocks() != lambda.len() || y_f.block_size() != n_rx {
            return Err(invalid("received block does not match the channel"));
        }
        let mut d = Vec::with_capacity(lambda.len());
        let mut y_tilde = BlockVector::zeros(n_tx, lambda.len());
        for (i, lam) in lambda.bins().iter().enumerate() {
            let g = lam.adjoint() * theta_inv;
            let v = &g * DVector::from_column_slice(y_f.block(i));
            y_tilde.block_mut(i).copy_from_slice(v.as_slice());
            d.push(g * lam);
        }
        Ok(Self {
            d,
            y_tilde,
            theta: theta.clone(),
        })
    }
}

/// Cross-round state of the proposed combiner.
///
/// Rounds `< k` live in the committed prefix; the current round's
/// contribution is held apart so that refreshing `Θ_k` on every turbo
/// iteration replaces it instead of adding it twice.
#[derive(Clone, Debug)]
pub struct CombinerState {
    n_tx: usize,
    t: usize,
    committed: usize,
    d_prefix: Vec<CMatrix>,
    y_prefix: BlockVector,
    thetas: Vec<CMatrix>,
    current: Option<RoundContribution>,
    d_total: Vec<CMatrix>,
    y_total: BlockVector,
    additions: u64,
}

impl CombinerState {
    /// Zero accumulators, no rounds.
    pub fn new(n_tx: usize, t: usize) -> Self {
        Self {
            n_tx,
            t,
            committed: 0,
            d_prefix: vec![CMatrix::zeros(n_tx, n_tx); t],
            y_prefix: BlockVector::zeros(n_tx, t),
            thetas: Vec::new(),
            current: None,
            d_total: vec![CMatrix::zeros(n_tx, n_tx); t],
            y_total: BlockVector::zeros(n_tx, t),
            additions: 0,
        }
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn len(&self) -> usize {
        self.t
    }

    pub fn is_empty(&self) -> bool {
        self.t == 0
    }

    /// Index of the round being combined (committed rounds + 1 once a
    /// contribution is staged).
    pub fn round(&self) -> usize {
        self.committed + usize::from(self.current.is_some())
    }

    pub fn committed_rounds(&self) -> usize {
        self.committed
    }

    /// `D_i` including the staged round.
    pub fn d(&self) -> &[CMatrix] {
        &self.d_total
    }

    /// `ỹ_f` including the staged round.
    pub fn y_tilde(&self) -> &BlockVector {
        &self.y_total
    }

    /// Covariance estimates of the committed rounds.
    pub fn thetas(&self) -> &[CMatrix] {
        &self.thetas
    }

    /// Real additions spent merging a new round into a non-empty prefix.
    pub fn additions(&self) -> u64 {
        self.additions
    }

    /// Real values held between rounds by the accumulators `{D_i}` and `ỹ_f`.
    pub fn persisted_reals(&self) -> usize {
        2 * self.t * self.n_tx * self.n_tx + 2 * self.t * self.n_tx
    }

    /// Real values of the covariance side table: one Hermitian `N_R × N_R`
    /// matrix per committed round.
    pub fn theta_side_table_reals(&self) -> usize {
        self.thetas.iter().map(|th| th.nrows() * th.nrows()).sum()
    }

    /// Stages the round-`k` contribution and refreshes `D_i`, `ỹ_f`.
    /// Calling it again within the same round replaces the previous staging.
    pub fn update(&mut self, contribution: RoundContribution) -> Result<()> {
        if contribution.d.len() != self.t
            || contribution.y_tilde.num_blocks() != self.t
            || contribution.y_tilde.block_size() != self.n_tx
        {
            return Err(invalid("contribution does not match combiner dimensions"));
        }
        if self.committed == 0 {
            self.d_total.clone_from(&contribution.d);
            self.y_total = contribution.y_tilde.clone();
        } else {
            for ((tot, pre), add) in self
                .d_total
                .iter_mut()
                .zip(&self.d_prefix)
                .zip(&contribution.d)
            {
                *tot = pre + add;
            }
            for ((tot, pre), add) in self
                .y_total
                .data_mut()
                .iter_mut()
                .zip(self.y_prefix.data())
                .zip(contribution.y_tilde.data())
            {
                *tot = pre + add;
            }
            // N_T² + N_T complex additions per bin.
            self.additions += (2 * self.t * self.n_tx * (self.n_tx + 1)) as u64;
        }
        self.current = Some(contribution);
        Ok(())
    }

    /// Convenience wrapper around [`RoundContribution::new`] and [`Self::update`].
    pub fn update_state(
        &mut self,
        lambda: &FrequencyChannel,
        theta: &CovEstimate,
        y_f: &BlockVector,
    ) -> Result<()> {
        let c = RoundContribution::new(lambda, &theta.raw, &theta.inverse, y_f)?;
        self.update(c)
    }

    /// Freezes the staged round into the prefix. Received samples and the
    /// channel of that round are no longer referenced afterwards.
    pub fn commit(&mut self) {
        if let Some(c) = self.current.take() {
            self.d_prefix.clone_from(&self.d_total);
            self.y_prefix = self.y_total.clone();
            self.thetas.push(c.theta);
            self.committed += 1;
        }
    }
}

/// Output of one combining pass.
#[derive(Clone, Debug)]
pub struct CombinerOutput {
    /// Time-domain decision statistics `z`, one block per channel use.
    pub z: BlockVector,
    /// Their DFT `z_f`.
    pub z_f: BlockVector,
    /// Diagonal of `C̃`, the per-antenna signal gain of `z`.
    pub gain: Vec<f64>,
}

/// Forward/backward soft-MMSE filtering over all combined rounds using only
/// `N_T × N_T` per-bin algebra.
pub fn mmse_combine(state: &CombinerState, soft: &SoftStats) -> Result<CombinerOutput> {
    let n = state.n_tx;
    let t = state.t;
    if soft.n_tx() != n || soft.len() != t {
        return Err(invalid("soft statistics do not match combiner dimensions"));
    }
    let sqrt_sigma: Vec<f64> = soft.sigma2_avg.iter().map(|v| v.max(0.0).sqrt()).collect();
    let mut c_bins = Vec::with_capacity(t);
    let mut forward = BlockVector::zeros(n, t);
    let mut c_avg = vec![0.0; n];
    for (i, d) in state.d_total.iter().enumerate() {
        // K = I + S D S, M = S K^{-1} S
        let mut k = d.clone();
        for r in 0..n {
            for c in 0..n {
                k[(r, c)] *= sqrt_sigma[r] * sqrt_sigma[c];
            }
            k[(r, r)] += 1.0;
        }
        let mut m = hermitian_inverse(&k)?;
        for r in 0..n {
            for c in 0..n {
                m[(r, c)] *= sqrt_sigma[r] * sqrt_sigma[c];
            }
        }
        let dm = d * m;
        let c_i = d - &dm * d;
        let y = DVector::from_column_slice(state.y_total.block(i));
        let f = &y - &dm * &y;
        forward.block_mut(i).copy_from_slice(f.as_slice());
        for (acc, r) in c_avg.iter_mut().zip(0..n) {
            *acc += c_i[(r, r)].re;
        }
        c_bins.push(c_i);
    }
    for v in &mut c_avg {
        *v /= t as f64;
    }
    let mut z_f = forward;
    for (i, c_i) in c_bins.iter().enumerate() {
        let s = DVector::from_column_slice(soft.s_bar_f.block(i));
        let mut back = c_i * &s;
        for r in 0..n {
            back[r] -= s[r] * c_avg[r];
        }
        for (zv, b) in z_f.block_mut(i).iter_mut().zip(back.iter()) {
            *zv -= b;
        }
    }
    Ok(CombinerOutput {
        z: idft_block(&z_f),
        z_f,
        gain: c_avg,
    })
}

/// Residual variance of the equivalent channel `z = μ s + η`:
/// `ν_t = μ_t (1 − σ̃_t² μ_t)`.
pub fn residual_variance(gain: &[f64], sigma2_avg: &[f64]) -> Vec<f64> {
    gain.iter()
        .zip(sigma2_avg)
        .map(|(&mu, &s2)| mu * (1.0 - s2 * mu))
        .collect()
}

/// Demapper output.
#[derive(Clone, Debug)]
pub struct DemapOutput {
    pub llrs: LlrFrame,
    /// Set when some `ν_t` had to be raised to [`NU_FLOOR`] or some gain was
    /// not positive.
    pub degenerate: bool,
}

/// Gaussian Gray-QPSK demapping of `z_{t,i} = μ_t s_{t,i} + η`,
/// `η ~ CN(0, ν_t)`: `L_I = 2√2 μ_t Re z / ν_t`, `L_Q = 2√2 μ_t Im z / ν_t`.
pub fn demap_extrinsic(z: &BlockVector, gain: &[f64], nu: &[f64]) -> Result<DemapOutput> {
    let n = z.block_size();
    if gain.len() != n || nu.len() != n {
        return Err(invalid("gain/variance length must equal transmit antennas"));
    }
    let mut degenerate = false;
    let scale: Vec<f64> = gain
        .iter()
        .zip(nu)
        .map(|(&mu, &v)| {
            if !(mu > 0.0) {
                degenerate = true;
                return 0.0;
            }
            let v = if v < NU_FLOOR || !v.is_finite() {
                degenerate = true;
                NU_FLOOR
            } else {
                v
            };
            2.0 * SQRT_2 * mu / v
        })
        .collect();
    let mut out = Vec::with_capacity(2 * z.data().len());
    for (idx, zv) in z.data().iter().enumerate() {
        let s = scale[idx % n];
        out.push(s * zv.re);
        out.push(s * zv.im);
    }
    Ok(DemapOutput {
        llrs: LlrFrame::from_raw(out),
        degenerate,
    })
}

/// Result of equalizing a single round in isolation.
#[derive(Clone, Debug)]
pub struct EqualizerOutput {
    pub combined: CombinerOutput,
    pub demap: DemapOutput,
}

/// MMSE turbo equalization of one round on its own (the LLR-level baseline).
/// The caller adds the accumulated LLRs of earlier rounds.
pub fn llr_level_equalize(
    y_f: &BlockVector,
    lambda: &FrequencyChannel,
    theta: &CovEstimate,
    soft: &SoftStats,
) -> Result<EqualizerOutput> {
    let mut state = CombinerState::new(lambda.n_tx(), lambda.len());
    state.update_state(lambda, theta, y_f)?;
    combine_and_demap(&state, soft)
}

/// [`mmse_combine`] followed by [`demap_extrinsic`].
pub fn combine_and_demap(state: &CombinerState, soft: &SoftStats) -> Result<EqualizerOutput> {
    let combined = mmse_combine(state, soft)?;
    let nu = residual_variance(&combined.gain, &soft.sigma2_avg);
    let demap = demap_extrinsic(&combined.z, &combined.gain, &nu)?;
    Ok(EqualizerOutput { combined, demap })
}
