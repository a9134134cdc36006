//! ST-BICM transmitter: rate-1/2 feed-forward convolutional encoder with
//! zero-tail termination, S-random interleaver and Gray QPSK mapping onto an
//! `N_T × T` symbol frame.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::numerics::BlockVector;

/// Bits are stored one per byte, 0 or 1.
pub type Bit = u8;

pub const DEFAULT_SPREAD: usize = 16;
pub const INTERLEAVER_RETRY_CAP: usize = 1000;

/// Convolutional code description. Generators are given as their numeric
/// value (write `0o35` for the octal polynomial 35); the MSB taps the current
/// input bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CodeConfig {
    pub generators: [u32; 2],
    pub constraint_length: u32,
}

impl Default for CodeConfig {
    fn default() -> Self {
        Self {
            generators: [0o35, 0o23],
            constraint_length: 5,
        }
    }
}

impl CodeConfig {
    pub fn new(generators: [u32; 2], constraint_length: u32) -> Result<Self> {
        if !(2..=16).contains(&constraint_length) {
            return Err(invalid("constraint length must be in 2..=16"));
        }
        for g in generators {
            if 32 - g.leading_zeros() != constraint_length {
                return Err(invalid(format!(
                    "generator {g:o} does not have bit width {constraint_length}"
                )));
            }
        }
        Ok(Self {
            generators,
            constraint_length,
        })
    }

    pub fn memory(&self) -> usize {
        self.constraint_length as usize - 1
    }

    pub fn num_states(&self) -> usize {
        1 << self.memory()
    }

    /// Code bits produced for `n_info` information bits, tail included.
    pub fn coded_len(&self, n_info: usize) -> usize {
        2 * (n_info + self.memory())
    }

    /// Output pair and next state when `input` enters the register in `state`.
    /// The most recent past input sits in the highest state bit.
    pub fn step(&self, state: usize, input: Bit) -> ([Bit; 2], usize) {
        let m = self.memory();
        let reg = ((input as u32) << m) | state as u32;
        let out = [
            ((reg & self.generators[0]).count_ones() & 1) as Bit,
            ((reg & self.generators[1]).count_ones() & 1) as Bit,
        ];
        (out, (reg >> 1) as usize)
    }
}

/// Encodes `info` and appends `constraint_length - 1` zero tail bits so the
/// encoder ends in the zero state. Output pairs are interleaved as
/// `(c0_0, c1_0, c0_1, c1_1, ...)`.
pub fn conv_encode(info: &[Bit], cfg: &CodeConfig) -> Vec<Bit> {
    let mut out = Vec::with_capacity(cfg.coded_len(info.len()));
    let mut state = 0;
    let tail = std::iter::repeat_n(0, cfg.memory());
    for b in info.iter().copied().chain(tail) {
        let (pair, next) = cfg.step(state, b);
        out.extend_from_slice(&pair);
        state = next;
    }
    out
}

/// A permutation used as `out[i] = in[perm[i]]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interleaver {
    perm: Vec<usize>,
    seed: u64,
    spread: usize,
}

impl Interleaver {
    pub fn identity(length: usize) -> Self {
        Self {
            perm: (0..length).collect(),
            seed: 0,
            spread: 1,
        }
    }

    /// S-random permutation: `|π(i) − π(j)| ≥ spread` whenever
    /// `0 < |i − j| < spread`. Each spread value gets
    /// [`INTERLEAVER_RETRY_CAP`] attempts before it is decremented.
    pub fn s_random(length: usize, seed: u64, spread: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = spread.max(1);
        loop {
            for _ in 0..INTERLEAVER_RETRY_CAP {
                if let Some(perm) = try_s_random(length, s, &mut rng) {
                    return Self {
                        perm,
                        seed,
                        spread: s,
                    };
                }
            }
            // spread 1 never fails, so this terminates
            s -= 1;
        }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Spread actually achieved (may be below the requested one).
    pub fn spread(&self) -> usize {
        self.spread
    }

    pub fn interleave<T: Copy>(&self, x: &[T]) -> Result<Vec<T>> {
        self.check(x.len())?;
        Ok(self.perm.iter().map(|&p| x[p]).collect())
    }

    pub fn deinterleave<T: Copy + Default>(&self, x: &[T]) -> Result<Vec<T>> {
        self.check(x.len())?;
        let mut out = vec![T::default(); x.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            out[p] = x[i];
        }
        Ok(out)
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.perm.len() {
            return Err(invalid(format!(
                "interleaver length {} does not match input length {len}",
                self.perm.len()
            )));
        }
        Ok(())
    }
}

fn try_s_random(length: usize, spread: usize, rng: &mut ChaCha8Rng) -> Option<Vec<usize>> {
    let mut pool: Vec<usize> = (0..length).collect();
    pool.shuffle(rng);
    let mut perm = Vec::with_capacity(length);
    for i in 0..length {
        let lo = i.saturating_sub(spread - 1);
        let pos = pool
            .iter()
            .position(|&c| perm[lo..i].iter().all(|&p: &usize| p.abs_diff(c) >= spread))?;
        perm.push(pool.remove(pos));
    }
    Some(perm)
}

/// Unit-energy Gray QPSK point for the bit pair `(b_I, b_Q)`.
pub fn qpsk(b_i: Bit, b_q: Bit) -> Complex64 {
    Complex64::new(
        (1.0 - 2.0 * b_i as f64) * FRAC_1_SQRT_2,
        (1.0 - 2.0 * b_q as f64) * FRAC_1_SQRT_2,
    )
}

/// The `N_T × T` transmitted symbol matrix, stored channel use by channel use
/// (block `i` holds `s_i`, one entry per transmit antenna).
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolFrame {
    symbols: BlockVector,
}

impl SymbolFrame {
    pub fn new(symbols: BlockVector) -> Self {
        Self { symbols }
    }

    pub fn n_tx(&self) -> usize {
        self.symbols.block_size()
    }

    pub fn len(&self) -> usize {
        self.symbols.num_blocks()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn symbols(&self) -> &BlockVector {
        &self.symbols
    }

    pub fn get(&self, antenna: usize, channel_use: usize) -> Complex64 {
        self.symbols.block(channel_use)[antenna]
    }
}

/// Serial-to-parallel Gray QPSK mapping. Bits `2(i·N_T + t)` and
/// `2(i·N_T + t) + 1` go to antenna `t` at channel use `i`.
pub fn map_frame(code_bits: &[Bit], n_tx: usize) -> Result<SymbolFrame> {
    if n_tx == 0 || code_bits.is_empty() || code_bits.len() % (2 * n_tx) != 0 {
        return Err(invalid(format!(
            "{} code bits cannot fill {n_tx} antennas with QPSK",
            code_bits.len()
        )));
    }
    let t = code_bits.len() / (2 * n_tx);
    let data = code_bits.chunks(2).map(|p| qpsk(p[0], p[1])).collect();
    Ok(SymbolFrame::new(BlockVector::new(n_tx, t, data)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_bits(rng: &mut ChaCha8Rng, n: usize) -> Vec<Bit> {
        (0..n).map(|_| rng.random_range(0..2u8)).collect()
    }

    #[test]
    fn zero_info_gives_zero_codeword() {
        let cfg = CodeConfig::default();
        for n in [0, 1, 17, 512] {
            let c = conv_encode(&vec![0; n], &cfg);
            assert_eq!(c.len(), 2 * (n + 4));
            assert!(c.iter().all(|&b| b == 0));
        }
    }

    #[test]
    fn single_one_impulse_response() {
        // g0 = 11101, g1 = 10011: the impulse walks through the taps MSB first.
        let c = conv_encode(&[1], &CodeConfig::default());
        assert_eq!(c, vec![1, 1, 1, 0, 1, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn frame_length_with_tail() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = conv_encode(&random_bits(&mut rng, 512), &CodeConfig::default());
        assert_eq!(c.len(), 1032);
    }

    #[test]
    fn generator_width_is_validated() {
        assert!(CodeConfig::new([0o35, 0o23], 5).is_ok());
        assert!(CodeConfig::new([0o35, 0o7], 5).is_err());
        assert!(CodeConfig::new([0o35, 0o23], 4).is_err());
    }

    #[test]
    fn identity_interleaver_is_noop() {
        let il = Interleaver::identity(5);
        let x = [1, 2, 3, 4, 5];
        assert_eq!(il.interleave(&x).unwrap(), x);
    }

    #[test]
    fn interleaver_round_trip_and_determinism() {
        let a = Interleaver::s_random(1032, 42, DEFAULT_SPREAD);
        let b = Interleaver::s_random(1032, 42, DEFAULT_SPREAD);
        assert_eq!(a, b);
        assert_ne!(a, Interleaver::s_random(1032, 43, DEFAULT_SPREAD));
        let x: Vec<u32> = (0..1032).collect();
        let y = a.interleave(&x).unwrap();
        assert_ne!(x, y);
        assert_eq!(a.deinterleave(&y).unwrap(), x);
    }

    #[test]
    fn interleaver_reaches_spread_16_at_1032() {
        let il = Interleaver::s_random(1032, 7, DEFAULT_SPREAD);
        assert_eq!(il.spread(), 16);
        let p = il.permutation();
        let mut seen = vec![false; p.len()];
        for &v in p {
            assert!(!seen[v]);
            seen[v] = true;
        }
        for i in 0..p.len() {
            for j in i + 1..(i + 16).min(p.len()) {
                assert!(p[i].abs_diff(p[j]) >= 16);
            }
        }
    }

    #[test]
    fn short_interleaver_falls_back_to_smaller_spread() {
        let il = Interleaver::s_random(8, 1, DEFAULT_SPREAD);
        assert!(il.spread() < 16 && il.spread() >= 1);
        assert_eq!(il.len(), 8);
    }

    #[test]
    fn interleaver_length_mismatch() {
        let il = Interleaver::identity(4);
        assert!(il.interleave(&[1, 2, 3]).is_err());
        assert!(il.deinterleave(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn gray_map_and_frame_shape() {
        assert_eq!(qpsk(0, 0), Complex64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2));
        assert_eq!(qpsk(1, 0), Complex64::new(-FRAC_1_SQRT_2, FRAC_1_SQRT_2));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bits = random_bits(&mut rng, 1032);
        let f2 = map_frame(&bits, 2).unwrap();
        assert_eq!((f2.n_tx(), f2.len()), (2, 258));
        let f4 = map_frame(&bits, 4).unwrap();
        assert_eq!((f4.n_tx(), f4.len()), (4, 129));
        for s in f4.symbols().data() {
            assert!((s.norm_sqr() - 1.0).abs() < 1e-15);
        }
        // antenna-major within a channel use
        assert_eq!(f2.get(1, 0), qpsk(bits[2], bits[3]));
        assert_eq!(f2.get(0, 1), qpsk(bits[4], bits[5]));
    }

    #[test]
    fn frame_divisibility_is_checked() {
        assert!(map_frame(&[0, 1, 0], 1).is_err());
        assert!(map_frame(&[0, 1, 0, 1, 1, 1], 2).is_err());
    }
}
