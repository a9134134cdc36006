//! Max-Log-MAP SISO decoder for the terminated rate-1/2 convolutional code.

use crate::combiner::LlrFrame;
use crate::error::{invalid, Result};
use crate::tx::{Bit, CodeConfig};

const NEG_INF: f64 = f64::NEG_INFINITY;

/// APP magnitude reported for a bit that every surviving path agrees on
/// (tail positions of a terminated trellis).
pub const FORCED_BIT_LLR: f64 = 1e6;

/// State transitions derived from a [`CodeConfig`].
#[derive(Clone, Debug)]
pub struct Trellis {
    num_states: usize,
    memory: usize,
    /// `next[s][u]`
    next: Vec<[usize; 2]>,
    /// `out[s][u]`, code bit pair emitted on that edge.
    out: Vec<[[Bit; 2]; 2]>,
}

impl Trellis {
    pub fn new(cfg: &CodeConfig) -> Self {
        let num_states = cfg.num_states();
        let mut next = Vec::with_capacity(num_states);
        let mut out = Vec::with_capacity(num_states);
        for s in 0..num_states {
            let (o0, n0) = cfg.step(s, 0);
            let (o1, n1) = cfg.step(s, 1);
            next.push([n0, n1]);
            out.push([o0, o1]);
        }
        Self {
            num_states,
            memory: cfg.memory(),
            next,
            out,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn next_state(&self, state: usize, input: Bit) -> usize {
        self.next[state][input as usize]
    }

    pub fn output(&self, state: usize, input: Bit) -> [Bit; 2] {
        self.out[state][input as usize]
    }
}

/// Decoder output for one frame.
#[derive(Clone, Debug)]
pub struct SisoOutput {
    /// `APP − a priori` per code bit, unclamped.
    pub extrinsic: Vec<f64>,
    /// A posteriori LLR per code bit.
    pub code_app: Vec<f64>,
    /// A posteriori LLR per information bit (tail excluded).
    pub info_app: Vec<f64>,
    /// Hard decisions on `info_app`; ties go to 0.
    pub info_bits: Vec<Bit>,
}

/// Max-log forward/backward recursion over a trellis that starts and ends in
/// state 0. Input LLRs are in natural (deinterleaved) code-bit order.
pub fn siso_decode(trellis: &Trellis, apriori: &LlrFrame) -> Result<SisoOutput> {
    let llr = apriori.values();
    if llr.len() % 2 != 0 || llr.len() < 2 * trellis.memory {
        return Err(invalid(format!(
            "{} code LLRs do not form a terminated frame",
            llr.len()
        )));
    }
    let steps = llr.len() / 2;
    let n_info = steps - trellis.memory;
    let ns = trellis.num_states;

    // Half-correlation branch metric for each of the four output pairs.
    let gamma = |k: usize| -> [f64; 4] {
        let (a, b) = (0.5 * llr[2 * k], 0.5 * llr[2 * k + 1]);
        [a + b, a - b, -a + b, -a - b]
    };
    let pair = |o: [Bit; 2]| (o[0] as usize) << 1 | o[1] as usize;
    let inputs = |k: usize| if k < n_info { 2 } else { 1 };

    let mut alpha = vec![NEG_INF; (steps + 1) * ns];
    alpha[0] = 0.0;
    for k in 0..steps {
        let g = gamma(k);
        let (cur, nxt) = alpha.split_at_mut((k + 1) * ns);
        let cur = &cur[k * ns..];
        let nxt = &mut nxt[..ns];
        for s in 0..ns {
            let a = cur[s];
            if a == NEG_INF {
                continue;
            }
            for u in 0..inputs(k) {
                let m = a + g[pair(trellis.out[s][u])];
                let n = trellis.next[s][u];
                if m > nxt[n] {
                    nxt[n] = m;
                }
            }
        }
        let max = nxt.iter().copied().fold(NEG_INF, f64::max);
        for v in nxt.iter_mut() {
            *v -= max;
        }
    }

    let mut code_app = vec![0.0; 2 * steps];
    let mut info_app = vec![0.0; n_info];
    let mut beta = vec![NEG_INF; ns];
    beta[0] = 0.0;
    let mut prev = vec![NEG_INF; ns];
    for k in (0..steps).rev() {
        let g = gamma(k);
        let a = &alpha[k * ns..(k + 1) * ns];
        // Best metric with code bit 0 / 1 equal to 0 or 1, and input 0 or 1.
        let mut best_c = [[NEG_INF; 2]; 2];
        let mut best_u = [NEG_INF; 2];
        prev.fill(NEG_INF);
        for s in 0..ns {
            for u in 0..inputs(k) {
                let n = trellis.next[s][u];
                let o = trellis.out[s][u];
                let bg = g[pair(o)] + beta[n];
                if bg > prev[s] {
                    prev[s] = bg;
                }
                let total = a[s] + bg;
                for j in 0..2 {
                    let c = &mut best_c[j][o[j] as usize];
                    if total > *c {
                        *c = total;
                    }
                }
                if total > best_u[u] {
                    best_u[u] = total;
                }
            }
        }
        code_app[2 * k] = app(best_c[0]);
        code_app[2 * k + 1] = app(best_c[1]);
        if k < n_info {
            info_app[k] = app(best_u);
        }
        let max = prev.iter().copied().fold(NEG_INF, f64::max);
        for (b, p) in beta.iter_mut().zip(&prev) {
            *b = p - max;
        }
    }

    let extrinsic = code_app.iter().zip(llr).map(|(p, a)| p - a).collect();
    let info_bits = info_app.iter().map(|&l| Bit::from(l < 0.0)).collect();
    Ok(SisoOutput {
        extrinsic,
        code_app,
        info_app,
        info_bits,
    })
}

fn app(best: [f64; 2]) -> f64 {
    (best[0] - best[1]).clamp(-FORCED_BIT_LLR, FORCED_BIT_LLR)
}
