use serde::Serialize;

use super::enumerate::for_each_layer;
use super::verdict::{Certificate, Evidence, TightnessVerdict};
use crate::asm::{Asm, Prob};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sfssm::Sfssm;

/// Threshold at which a step-conditional EOS probability counts as one.
pub const HIT_ONE_TOL: f64 = 1e-12;

/// Step-conditional EOS probabilities `p̃_eos(t)`, `t = 1..=len`: the
/// probability of EOS at step t given that it was not emitted before.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PtildeSeries<T> {
    pub values: Vec<T>,
    /// Running `Σ_{s≤t} p̃_eos(s)`.
    pub partial_sums: Vec<T>,
    /// Running `∏_{s≤t} (1 − p̃_eos(s))`, the probability of no EOS in the
    /// first t steps.
    pub survival: Vec<T>,
    /// First step with `p̃_eos(t) ≥ 1 − 1e-12`.
    pub hit_one_at: Option<usize>,
    /// Step at which no prefix mass was left; the series ends before it.
    pub exhausted_at: Option<usize>,
}

impl<T: Scalar> PtildeSeries<T> {
    pub fn from_values(values: Vec<T>, exhausted_at: Option<usize>) -> Self {
        let values: Vec<T> = values.into_iter().map(|v| v.max(T::zero()).min(T::one())).collect();
        let mut partial_sums = Vec::with_capacity(values.len());
        let mut survival = Vec::with_capacity(values.len());
        let (mut sum, mut surv) = (T::zero(), T::one());
        for &v in &values {
            sum += v;
            surv *= T::one() - v;
            partial_sums.push(sum);
            survival.push(surv);
        }
        let hit_one_at = values.iter().position(|&v| v >= T::one() - T::lit(HIT_ONE_TOL)).map(|i| i + 1);
        Self { values, partial_sums, survival, hit_one_at, exhausted_at }
    }

    /// Number of computed steps.
    pub fn horizon(&self) -> usize {
        self.values.len()
    }

    pub fn partial_sum(&self) -> Option<T> {
        self.partial_sums.last().copied()
    }

    /// Survival after the last computed step (1 for an empty series).
    pub fn final_survival(&self) -> T {
        self.survival.last().copied().unwrap_or_else(T::one)
    }
}

/// `p̃_eos(t) = Σ_ω p̄(ω) p̄(EOS | ω) / Σ_ω p̄(ω)` over ω ∈ Σ^(t−1), by
/// exhaustive enumeration of positive-probability prefixes.
///
/// Requires `|Σ|^(T−1) ≤ budget`. If the prefix mass vanishes at some step
/// the series stops there and records it in `exhausted_at`.
pub fn ptilde_eos_enumerate<T, A>(asm: &A, horizon: usize, budget: u128) -> Result<PtildeSeries<T>>
where
    T: Scalar,
    A: Asm<T>,
{
    let eos = asm.alphabet().eos_index();
    let mut values = Vec::with_capacity(horizon);
    let mut exhausted_at = None;
    for_each_layer(asm, horizon, budget, |t, layer| {
        let den: T = layer.iter().map(|e| e.mass).sum();
        if !(den > T::zero()) {
            exhausted_at = Some(t);
            return Ok(false);
        }
        let num: T = layer.iter().map(|e| e.mass * e.dist[eos]).sum();
        values.push(num / den);
        Ok(true)
    })?;
    Ok(PtildeSeries::from_values(values, exhausted_at))
}

/// `p̃_eos(t)` for a finite-state model in O(T·Q²·|Σ|) via the forward
/// state distribution: `p̃_eos(t) = αₜ₋₁ t / αₜ₋₁ 𝟙` with `αₜ = αₜ₋₁ P`.
pub fn ptilde_eos_fsa<T: Scalar>(m: &Sfssm<T>, horizon: usize) -> PtildeSeries<T> {
    let p = m.total_transition();
    let mut alpha = m.init().as_slice().to_vec();
    let mut next = vec![T::zero(); alpha.len()];
    let mut values = Vec::with_capacity(horizon);
    let mut exhausted_at = None;
    for t in 1..=horizon {
        let mass: T = alpha.iter().copied().sum();
        if !(mass > T::zero()) {
            exhausted_at = Some(t);
            break;
        }
        // rescale so long horizons do not underflow
        alpha.iter_mut().for_each(|a| *a /= mass);
        let stop: T = alpha.iter().zip(m.term().iter()).map(|(&a, &b)| a * b).sum();
        values.push(stop);
        p.vec_mul_into(&alpha, &mut next);
        std::mem::swap(&mut alpha, &mut next);
    }
    PtildeSeries::from_values(values, exhausted_at)
}

/// `CDF(T) = 1 − ∏_{t≤T} (1 − p̃_eos(t))`: the probability that generation
/// has stopped within T steps.
pub fn termination_cdf<T: Scalar>(series: &PtildeSeries<T>) -> Vec<Prob<T>> {
    series.survival.iter().map(|&s| Prob::saturating(T::one() - s)).collect()
}

/// Certificate-only reading of a computed series.
///
/// Tight when some `p̃_eos(t)` reached one or the prefix mass ran out;
/// otherwise Inconclusive, since no finite prefix of the series decides
/// whether it diverges.
pub fn assess_series<T: Scalar>(series: &PtildeSeries<T>) -> TightnessVerdict<T> {
    if let Some(step) = series.hit_one_at {
        return TightnessVerdict::Tight { certificate: Certificate::EosHitsOne { step } };
    }
    if let Some(step) = series.exhausted_at {
        return TightnessVerdict::Tight { certificate: Certificate::SupportExhausted { step } };
    }
    TightnessVerdict::Inconclusive {
        evidence: Evidence {
            note: "finitely many terms of the EOS series cannot decide divergence".into(),
            horizon: Some(series.horizon()),
            partial_sum: series.partial_sum(),
            survival: Some(series.final_survival()),
        },
    }
}

/// Truncated `∏(1 − pₙ)` and `Σ pₙ` over the first `horizon` terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualityReport<T> {
    pub horizon: usize,
    pub partial_product: T,
    pub partial_sum: T,
}

pub fn product_sum_duality_check<T: Scalar>(p_seq: &[T], horizon: usize) -> Result<DualityReport<T>> {
    if horizon > p_seq.len() {
        return Err(Error::OutOfRange(format!("horizon {horizon} exceeds {} terms", p_seq.len())));
    }
    let mut report = DualityReport { horizon, partial_product: T::one(), partial_sum: T::zero() };
    for (n, &p) in p_seq[..horizon].iter().enumerate() {
        if !(p >= T::zero() && p < T::one()) {
            return Err(Error::OutOfRange(format!("term {} = {p} not in [0, 1)", n + 1)));
        }
        report.partial_product *= T::one() - p;
        report.partial_sum += p;
    }
    Ok(report)
}
