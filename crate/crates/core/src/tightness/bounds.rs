use serde::Serialize;

use super::enumerate::for_each_layer;
use super::series::PtildeSeries;
use super::verdict::{Certificate, Evidence, TightnessVerdict};
use crate::asm::Asm;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Slack when comparing a model's EOS probability against a bound.
pub const BOUND_SLACK: f64 = 1e-12;

/// A symbolic family `f(t)`, t ≥ 1, used as a lower or upper bound on EOS
/// probabilities at step t.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum EosBoundFamily<T> {
    /// `f(t) = ε`.
    Constant { epsilon: T },
    /// `f(t) = c / (t + d)`.
    Harmonic { c: T, d: T },
    /// `f(t) = c / ((t + d) log(t + d))`.
    LogHarmonic { c: T, d: T },
    /// `f(t) = c rᵗ` with `0 < r < 1`.
    Geometric { c: T, r: T },
    /// Per-step values for `t = 1..=len`; nothing is claimed beyond.
    ExplicitTable { values: Vec<T> },
}

/// Whether `Σ_t f(t)` diverges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SeriesClass {
    Divergent,
    Convergent,
    Unknown,
}

impl<T: Scalar> EosBoundFamily<T> {
    /// `f(t)`, or `None` past the end of an explicit table.
    pub fn value(&self, t: usize) -> Option<T> {
        let tt = T::from_usize_lossy(t);
        match self {
            Self::Constant { epsilon } => Some(*epsilon),
            Self::Harmonic { c, d } => Some(*c / (tt + *d)),
            Self::LogHarmonic { c, d } => Some(*c / ((tt + *d) * (tt + *d).ln())),
            Self::Geometric { c, r } => Some(*c * r.powi(t.min(i32::MAX as usize) as i32)),
            Self::ExplicitTable { values } => t.checked_sub(1).and_then(|i| values.get(i)).copied(),
        }
    }

    pub fn classify(&self) -> SeriesClass {
        match self {
            Self::Constant { .. } | Self::Harmonic { .. } | Self::LogHarmonic { .. } => SeriesClass::Divergent,
            Self::Geometric { .. } => SeriesClass::Convergent,
            Self::ExplicitTable { .. } => SeriesClass::Unknown,
        }
    }

    /// Checks that every value lies in `[0, 1]`. The analytic families are
    /// nonincreasing on t ≥ 1, so checking t = 1 suffices.
    pub fn validate(&self) -> Result<()> {
        let bad = |why: String| Err(Error::OutOfRange(why));
        let unit = |x: T| x.is_finite() && x >= T::zero() && x <= T::one();
        match self {
            Self::Constant { epsilon } if !(*epsilon > T::zero() && *epsilon <= T::one()) => {
                bad(format!("constant bound {epsilon} not in (0, 1]"))
            }
            Self::Harmonic { c, d } if !(*c > T::zero() && T::one() + *d > T::zero()) => {
                bad(format!("harmonic bound needs c > 0 and d > -1 (c = {c}, d = {d})"))
            }
            Self::LogHarmonic { c, d } if !(*c > T::zero() && *d > T::zero()) => {
                bad(format!("log-harmonic bound needs c > 0 and d > 0 (c = {c}, d = {d})"))
            }
            Self::Geometric { c, r } if !(*c > T::zero() && *r > T::zero() && *r < T::one()) => {
                bad(format!("geometric bound needs c > 0 and 0 < r < 1 (c = {c}, r = {r})"))
            }
            Self::ExplicitTable { values } => match values.iter().position(|&v| !unit(v)) {
                Some(i) => bad(format!("table entry {} = {} not in [0, 1]", i + 1, values[i])),
                None => Ok(()),
            },
            _ => match self.value(1) {
                Some(v) if unit(v) => Ok(()),
                v => bad(format!("bound value at t = 1 is {v:?}, outside [0, 1]")),
            },
        }
    }

    /// `Σ_{t > horizon} f(t)` for the geometric family.
    pub fn geometric_tail(&self, horizon: usize) -> Option<T> {
        match self {
            Self::Geometric { r, .. } => self.value(horizon + 1).map(|v| v / (T::one() - *r)),
            _ => None,
        }
    }
}

/// Tight if `bound` is a lower bound on `p̄(EOS | x)` at step `|x| + 1`
/// whose series diverges. The caller vouches for the bound.
pub fn certify_tight_lower_bound<T: Scalar>(bound: &EosBoundFamily<T>) -> Result<TightnessVerdict<T>> {
    bound.validate()?;
    Ok(match (bound, bound.classify()) {
        (EosBoundFamily::Constant { epsilon }, _) => {
            TightnessVerdict::Tight { certificate: Certificate::UniformEosBound { epsilon: *epsilon } }
        }
        (_, SeriesClass::Divergent) => {
            TightnessVerdict::Tight { certificate: Certificate::DivergentBoundFamily { family: bound.clone() } }
        }
        (_, SeriesClass::Convergent) => TightnessVerdict::Inconclusive {
            evidence: Evidence::note("the lower-bound family has a convergent series; it cannot certify tightness"),
        },
        (_, SeriesClass::Unknown) => TightnessVerdict::Inconclusive {
            evidence: Evidence::note("a finite table of lower bounds cannot certify divergence"),
        },
    })
}

/// [`certify_tight_lower_bound`], after checking the bound against every
/// positive-probability prefix of length below `horizon`.
pub fn certify_tight_lower_bound_checked<T, A>(
    asm: &A,
    bound: &EosBoundFamily<T>,
    horizon: usize,
    budget: u128,
) -> Result<TightnessVerdict<T>>
where
    T: Scalar,
    A: Asm<T>,
{
    bound.validate()?;
    let eos = asm.alphabet().eos_index();
    let slack = T::lit(BOUND_SLACK);
    for_each_layer(asm, horizon, budget, |t, layer| {
        if let Some(f) = bound.value(t) {
            if let Some(bad) = layer.iter().find(|e| e.dist[eos] < f - slack) {
                return Err(Error::BoundViolated { t, prefix: bad.prefix.indices() });
            }
        }
        Ok(true)
    })?;
    certify_tight_lower_bound(bound)
}

/// NonTight from a computed series plus a geometric upper bound
/// `p̃_eos(t) ≤ c rᵗ` assumed for all `t > T`.
///
/// Uses `∏_{t>T}(1 − p̃(t)) ≥ 1 − Σ_{t>T} c rᵗ`; the reported leaked mass is
/// the resulting lower bound `survival(T) · (1 − tail)`. The bound is also
/// checked against the computed values.
pub fn certify_nontight_upper_bound<T: Scalar>(
    series: &PtildeSeries<T>,
    upper: &EosBoundFamily<T>,
) -> Result<TightnessVerdict<T>> {
    upper.validate()?;
    let horizon = series.horizon();
    let Some(tail) = upper.geometric_tail(horizon) else {
        return Ok(TightnessVerdict::Inconclusive {
            evidence: Evidence::note("only a geometric upper-bound family yields a tail estimate"),
        });
    };
    let slack = T::lit(BOUND_SLACK);
    for (i, &p) in series.values.iter().enumerate() {
        if p > upper.value(i + 1).unwrap_or(T::one()) + slack {
            return Err(Error::BoundViolated { t: i + 1, prefix: Vec::new() });
        }
    }
    let leaked = series.final_survival() * (T::one() - tail);
    Ok(if tail < T::one() && leaked > T::zero() {
        TightnessVerdict::NonTight { witness: None, leaked_mass: Some(leaked) }
    } else {
        TightnessVerdict::Inconclusive {
            evidence: Evidence {
                note: "the geometric tail is too heavy to bound the survival away from zero".into(),
                horizon: Some(horizon),
                partial_sum: series.partial_sum(),
                survival: Some(series.final_survival()),
            },
        }
    })
}
