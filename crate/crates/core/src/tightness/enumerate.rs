use crate::asm::{Asm, Str};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A positive-probability prefix with its model state and next-step
/// conditional.
pub(crate) struct PrefixEntry<S, T> {
    pub prefix: Str,
    pub state: S,
    pub mass: T,
    pub dist: Vec<T>,
}

/// `base^exp`, saturating at `u128::MAX`.
pub(crate) fn prefix_count(base: usize, exp: usize) -> u128 {
    (base as u128).checked_pow(exp.min(u32::MAX as usize) as u32).unwrap_or(u128::MAX)
}

/// Visits the positive-probability prefixes of length `t − 1`, layer by
/// layer, for `t = 1..=horizon`. The visitor returns `false` to stop early.
///
/// Fails up front if `|Σ|^(horizon−1)` exceeds `budget`.
pub(crate) fn for_each_layer<T, A, F>(asm: &A, horizon: usize, budget: u128, mut visit: F) -> Result<()>
where
    T: Scalar,
    A: Asm<T>,
    F: FnMut(usize, &[PrefixEntry<A::State, T>]) -> Result<bool>,
{
    if horizon == 0 {
        return Ok(());
    }
    let needed = prefix_count(asm.alphabet().len(), horizon - 1);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let state = asm.initial_state();
    let dist = asm.next_distribution(&state)?;
    let mut layer = vec![PrefixEntry { prefix: Str::empty(), state, mass: T::one(), dist }];
    for t in 1..=horizon {
        if !visit(t, &layer)? || t == horizon {
            break;
        }
        let mut next = Vec::with_capacity(layer.len() * asm.alphabet().len());
        for e in &layer {
            for a in asm.alphabet().symbols() {
                let mass = e.mass * e.dist[a.0];
                if mass > T::zero() {
                    let state = asm.advance(&e.state, a)?;
                    let dist = asm.next_distribution(&state)?;
                    next.push(PrefixEntry { prefix: e.prefix.extended(a), state, mass, dist });
                }
            }
        }
        layer = next;
    }
    Ok(())
}
