//! Complex linear-algebra foundation: unitary block DFT, per-bin channel
//! frequency response, Hermitian inversion and numerical rank.
//!
//! The block DFT is `U_{T,N} = U_T ⊗ I_N` with
//! `(U_T)_{m,n} = exp(-j2πmn/T)/√T`: a unitary DFT across the `T` blocks,
//! identity within each block of size `N`.

use std::cell::RefCell;
use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{invalid, Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Relative pivot threshold of the Cholesky factorization.
pub const CHOLESKY_PIVOT_REL: f64 = 1e-14;

/// Relative eigenvalue threshold used for numerical rank.
pub const RANK_THRESHOLD_REL: f64 = 1e-10;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// A vector made of `num_blocks` consecutive blocks of `block_size` entries.
///
/// Entry `n` of block `i` lives at `i * block_size + n`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockVector {
    block_size: usize,
    num_blocks: usize,
    data: Vec<Complex64>,
}

impl BlockVector {
    pub fn new(block_size: usize, num_blocks: usize, data: Vec<Complex64>) -> Result<Self> {
        if block_size == 0 || num_blocks == 0 {
            return Err(invalid("block vector dimensions must be positive"));
        }
        if data.len() != block_size * num_blocks {
            return Err(invalid(format!(
                "block vector length {} != {} x {}",
                data.len(),
                block_size,
                num_blocks
            )));
        }
        Ok(Self {
            block_size,
            num_blocks,
            data,
        })
    }

    pub fn zeros(block_size: usize, num_blocks: usize) -> Self {
        Self {
            block_size,
            num_blocks,
            data: vec![Complex64::new(0.0, 0.0); block_size * num_blocks],
        }
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn block(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.block_size..(i + 1) * self.block_size]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [Complex64] {
        &mut self.data[i * self.block_size..(i + 1) * self.block_size]
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

fn transform(v: &BlockVector, inverse: bool) -> BlockVector {
    let t = v.num_blocks;
    let n = v.block_size;
    let fft = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(t)
        } else {
            p.plan_fft_forward(t)
        }
    });
    let scale = 1.0 / (t as f64).sqrt();
    let mut out = BlockVector::zeros(n, t);
    let mut buf = vec![Complex64::new(0.0, 0.0); t];
    for k in 0..n {
        for (i, b) in buf.iter_mut().enumerate() {
            *b = v.data[i * n + k];
        }
        fft.process(&mut buf);
        for (i, b) in buf.iter().enumerate() {
            out.data[i * n + k] = b * scale;
        }
    }
    out
}

/// Applies `U_{T,N}` where `T = v.num_blocks()` and `N = v.block_size()`.
pub fn dft_block(v: &BlockVector) -> BlockVector {
    transform(v, false)
}

/// Applies `U_{T,N}^H`, the inverse of [`dft_block`].
pub fn idft_block(v: &BlockVector) -> BlockVector {
    transform(v, true)
}

/// Checked variant of [`dft_block`] for callers that carry `T` and `N` separately.
pub fn dft_block_checked(v: &BlockVector, t: usize, n: usize) -> Result<BlockVector> {
    if v.num_blocks != t || v.block_size != n {
        return Err(invalid(format!(
            "expected {t} blocks of size {n}, got {} blocks of size {}",
            v.num_blocks, v.block_size
        )));
    }
    Ok(dft_block(v))
}

/// O(T²) evaluation of the block DFT straight from the matrix definition.
/// Kept as an independent reference for the fast path.
pub fn direct_dft_block(v: &BlockVector, inverse: bool) -> BlockVector {
    let t = v.num_blocks;
    let n = v.block_size;
    let sign = if inverse { 1.0 } else { -1.0 };
    let twiddle: Vec<Complex64> = (0..t)
        .map(|m| Complex64::from_polar(1.0, sign * 2.0 * PI * m as f64 / t as f64))
        .collect();
    let scale = 1.0 / (t as f64).sqrt();
    let mut out = BlockVector::zeros(n, t);
    for m in 0..t {
        for i in 0..t {
            let w = twiddle[(m * i) % t];
            for k in 0..n {
                out.data[m * n + k] += w * v.data[i * n + k];
            }
        }
    }
    for c in out.data.iter_mut() {
        *c *= scale;
    }
    out
}

/// Per-bin channel frequency response `Λ_i = Σ_l H_l exp(-j2πil/T)`.
pub fn channel_frequency_response(taps: &[CMatrix], t: usize) -> Result<Vec<CMatrix>> {
    if taps.is_empty() {
        return Err(invalid("channel needs at least one tap"));
    }
    if taps.len() > t {
        return Err(invalid(format!(
            "{} taps exceed block length {t} (cyclic prefix too short)",
            taps.len()
        )));
    }
    let (rows, cols) = taps[0].shape();
    if taps.iter().any(|h| h.shape() != (rows, cols)) {
        return Err(invalid("all taps must share the same dimensions"));
    }
    Ok((0..t)
        .map(|i| {
            let mut lam = CMatrix::zeros(rows, cols);
            for (l, h) in taps.iter().enumerate() {
                let w = Complex64::from_polar(1.0, -2.0 * PI * ((i * l) % t) as f64 / t as f64);
                lam += h * w;
            }
            lam
        })
        .collect())
}

/// Explicit `N_R T × N_T T` block-circulant channel matrix whose first block
/// column is `[H_0; H_1; ...; H_{L-1}; 0; ...]`.
pub fn block_circulant(taps: &[CMatrix], t: usize) -> Result<CMatrix> {
    if taps.is_empty() || taps.len() > t {
        return Err(invalid("tap count must be in 1..=T"));
    }
    let (nr, nt) = taps[0].shape();
    let mut h = CMatrix::zeros(nr * t, nt * t);
    for i in 0..t {
        for (l, tap) in taps.iter().enumerate() {
            let j = (i + t - l) % t;
            h.view_mut((i * nr, j * nt), (nr, nt)).copy_from(tap);
        }
    }
    Ok(h)
}

/// Explicit `U_{T,N}` as a dense matrix.
pub fn block_dft_matrix(t: usize, n: usize) -> CMatrix {
    let scale = 1.0 / (t as f64).sqrt();
    let mut u = CMatrix::zeros(t * n, t * n);
    for m in 0..t {
        for i in 0..t {
            let w = Complex64::from_polar(scale, -2.0 * PI * ((m * i) % t) as f64 / t as f64);
            for k in 0..n {
                u[(m * n + k, i * n + k)] = w;
            }
        }
    }
    u
}

/// Lower-triangular Cholesky factor `L` with `A = L L^H`.
pub fn cholesky(a: &CMatrix) -> Result<CMatrix> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(invalid("cholesky needs a non-empty square matrix"));
    }
    let trace: f64 = (0..n).map(|i| a[(i, i)].re).sum();
    let floor = CHOLESKY_PIVOT_REL * trace.abs();
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > floor) || !d.is_finite() {
            return Err(Error::SingularMatrix { index: j, pivot: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = Complex64::new(djj, 0.0);
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Inverse of a Hermitian positive-definite matrix through its Cholesky factor.
pub fn hermitian_inverse(a: &CMatrix) -> Result<CMatrix> {
    let n = a.nrows();
    let l = cholesky(a)?;
    // L^{-1} by forward substitution, column by column.
    let mut linv = CMatrix::zeros(n, n);
    for c in 0..n {
        for i in c..n {
            let mut s = if i == c {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            for k in c..i {
                s -= l[(i, k)] * linv[(k, c)];
            }
            linv[(i, c)] = s / l[(i, i)];
        }
    }
    let mut inv = linv.adjoint() * &linv;
    // Restore exact Hermitian symmetry.
    for i in 0..n {
        inv[(i, i)].im = 0.0;
        for j in i + 1..n {
            let avg = (inv[(i, j)] + inv[(j, i)].conj()) * 0.5;
            inv[(i, j)] = avg;
            inv[(j, i)] = avg.conj();
        }
    }
    Ok(inv)
}

/// Real eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    let eig = SymmetricEigen::new(a.clone());
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(|x, y| x.total_cmp(y));
    v
}

/// Number of eigenvalues above `RANK_THRESHOLD_REL · λ_max`; zero for the zero matrix.
pub fn numerical_rank(a: &CMatrix) -> usize {
    let eig = hermitian_eigenvalues(a);
    let max = eig.iter().copied().fold(0.0_f64, f64::max);
    if max <= 0.0 {
        return 0;
    }
    eig.iter()
        .filter(|&&l| l > RANK_THRESHOLD_REL * max)
        .count()
}

/// Principal square root of a Hermitian positive semi-definite matrix.
pub fn hermitian_sqrt(a: &CMatrix) -> CMatrix {
    let eig = SymmetricEigen::new(a.clone());
    let n = a.nrows();
    let mut out = CMatrix::zeros(n, n);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        let v = eig.eigenvectors.column(k);
        out += (&v * v.adjoint()) * Complex64::new(s, 0.0);
    }
    out
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}
