use super::enumerate::prefix_count;
use super::verdict::{Certificate, Evidence, TightnessVerdict};
use crate::asm::Asm;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::zoo::{rnn_step, RnnAsm};

const LOG_SLACK: f64 = 1e-12;

/// Log-norm test: Tight if `k · ‖ĥₜ‖₂ ≤ log t` for every supplied step
/// `t ≥ threshold`.
///
/// `hidden_norms[i]` is the largest hidden-state norm over contexts of
/// length `t = i + 1`; `k` is the largest distance between a symbol's output
/// embedding and the EOS embedding. A violation is reported as Inconclusive:
/// the test is only sufficient.
pub fn rnn_log_norm_test<T: Scalar>(k: T, hidden_norms: &[T], threshold: usize) -> Result<TightnessVerdict<T>> {
    let from = threshold.max(1);
    if hidden_norms.len() < from {
        return Err(Error::EmptyEvidence);
    }
    let slack = T::lit(LOG_SLACK);
    let violation =
        (from..=hidden_norms.len()).find(|&t| k * hidden_norms[t - 1] > T::from_usize_lossy(t).ln() + slack);
    Ok(match violation {
        None => TightnessVerdict::Tight { certificate: Certificate::LogNormBound { k, from_step: from } },
        Some(t) => TightnessVerdict::Inconclusive {
            evidence: Evidence {
                note: format!("k·‖h‖ exceeds log t at step {t}"),
                horizon: Some(hidden_norms.len()),
                partial_sum: None,
                survival: None,
            },
        },
    })
}

/// A uniform lower bound on `p̄(EOS | x)` for RNNs with a bounded
/// activation, or `None` when the activation is unbounded.
///
/// Every hidden state after the first has entries in (−1, 1), so
/// `‖h‖₂ ≤ B = max(√d, ‖h₀‖₂)` and each logit `u(y)ᵀh` lies within
/// `‖u(y)‖₂ B` of zero. Then
/// `p̄(EOS | x) ≥ exp(−‖u(EOS)‖ B) / ((|Σ| + 1) exp(max_y ‖u(y)‖ B))`.
pub fn rnn_uniform_eos_floor<T: Scalar>(m: &RnnAsm<T>) -> Option<T> {
    if !m.activation().is_bounded() {
        return None;
    }
    let norm = |v: &crate::linalg::Vector<T>| v.dot(v).sqrt();
    let b = T::from_usize_lossy(m.hidden_dim()).sqrt().max(norm(m.initial_hidden()));
    let out = m.output_embeddings();
    let eos = norm(&out[m.alphabet().eos_index()]);
    let top = out.iter().map(norm).fold(T::zero(), T::max);
    let floor = (-(eos + top) * b).exp() / T::from_usize_lossy(out.len());
    (floor > T::zero()).then_some(floor)
}

/// `‖ĥₜ‖₂` for `t = 1..=horizon`: the largest hidden-state norm over all
/// contexts in Σᵗ. Requires `|Σ|^horizon ≤ budget`.
pub fn rnn_hidden_norm_sup<T: Scalar>(m: &RnnAsm<T>, horizon: usize, budget: u128) -> Result<Vec<T>> {
    let sigma = m.alphabet().len();
    let needed = prefix_count(sigma, horizon);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let mut layer = vec![m.initial_state()];
    let mut norms = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        layer = layer.iter().flat_map(|h| m.alphabet().symbols().map(move |a| rnn_step(m, h, a))).collect();
        norms.push(layer.iter().map(|h| h.dot(h).sqrt()).fold(T::zero(), T::max));
    }
    Ok(norms)
}
