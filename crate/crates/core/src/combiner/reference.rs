//! Direct evaluation of the multi-round soft-MMSE filter with explicit
//! `kN_R × kN_R` inversions. Cubic in `kN_R` and it needs every round's
//! signal, so it only serves as a cross-check of the recursive combiner.

use nalgebra::DVector;
use num_complex::Complex64;

use super::{CombinerOutput, FrequencyChannel, SoftStats};
use crate::error::{invalid, Error, Result};
use crate::numerics::{idft_block, BlockVector, CMatrix};

/// Everything the direct filter needs about one round.
#[derive(Clone, Debug)]
pub struct RoundData {
    pub lambda: FrequencyChannel,
    pub theta: CMatrix,
    pub y_f: BlockVector,
}

/// `z_f = Γ y̲_f − Ω s̄_f` with `B_i = Λ̲_i Σ̃ Λ̲_i^H + Ξ_k` inverted by LU.
pub fn direct_combine(rounds: &[RoundData], soft: &SoftStats) -> Result<CombinerOutput> {
    let first = rounds
        .first()
        .ok_or_else(|| invalid("need at least one round"))?;
    let t = first.lambda.len();
    let n_tx = first.lambda.n_tx();
    let n_rx = first.lambda.n_rx();
    let k = rounds.len();
    let kn = k * n_rx;
    let mut xi = CMatrix::zeros(kn, kn);
    for (u, r) in rounds.iter().enumerate() {
        if r.lambda.len() != t || r.lambda.n_tx() != n_tx || r.lambda.n_rx() != n_rx {
            return Err(invalid("rounds disagree on dimensions"));
        }
        xi.view_mut((u * n_rx, u * n_rx), (n_rx, n_rx))
            .copy_from(&r.theta);
    }
    let sigma = CMatrix::from_diagonal(&DVector::from_iterator(
        n_tx,
        soft.sigma2_avg.iter().map(|&v| Complex64::new(v, 0.0)),
    ));

    let mut gammas_y = Vec::with_capacity(t);
    let mut cs = Vec::with_capacity(t);
    for i in 0..t {
        let mut lam = CMatrix::zeros(kn, n_tx);
        let mut y = DVector::<Complex64>::zeros(kn);
        for (u, r) in rounds.iter().enumerate() {
            lam.view_mut((u * n_rx, 0), (n_rx, n_tx))
                .copy_from(&r.lambda.bins()[i]);
            y.rows_mut(u * n_rx, n_rx).copy_from_slice(r.y_f.block(i));
        }
        let b = &lam * &sigma * lam.adjoint() + &xi;
        let b_inv = b.try_inverse().ok_or(Error::SingularMatrix {
            index: i,
            pivot: 0.0,
        })?;
        let gamma = lam.adjoint() * b_inv;
        gammas_y.push(&gamma * y);
        cs.push(gamma * lam);
    }
    let mut c_avg = vec![0.0; n_tx];
    for c in &cs {
        for (r, acc) in c_avg.iter_mut().enumerate() {
            *acc += c[(r, r)].re / t as f64;
        }
    }
    let mut z_f = BlockVector::zeros(n_tx, t);
    for i in 0..t {
        let s = DVector::from_column_slice(soft.s_bar_f.block(i));
        let mut omega = cs[i].clone();
        for (r, &g) in c_avg.iter().enumerate() {
            omega[(r, r)] -= g;
        }
        let v = &gammas_y[i] - omega * s;
        z_f.block_mut(i).copy_from_slice(v.as_slice());
    }
    Ok(CombinerOutput {
        z: idft_block(&z_f),
        z_f,
        gain: c_avg,
    })
}
