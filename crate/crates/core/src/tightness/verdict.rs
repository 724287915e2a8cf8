use serde::Serialize;

use super::bounds::EosBoundFamily;

/// Outcome of a tightness analysis.
///
/// `Tight` is only produced with an analytic certificate. Numeric evidence
/// that falls short of a certificate yields `Inconclusive`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum TightnessVerdict<T> {
    Tight {
        certificate: Certificate<T>,
    },
    /// At least one of the two fields is set. `leaked_mass` is either the
    /// exact leaked mass or a certified lower bound on it, depending on the
    /// producing analysis.
    NonTight {
        witness: Option<Witness>,
        leaked_mass: Option<T>,
    },
    Inconclusive {
        evidence: Evidence<T>,
    },
}

impl<T> TightnessVerdict<T> {
    pub fn is_tight(&self) -> bool {
        matches!(self, Self::Tight { .. })
    }

    pub fn is_non_tight(&self) -> bool {
        matches!(self, Self::NonTight { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Tight { .. } => "Tight",
            Self::NonTight { .. } => "NonTight",
            Self::Inconclusive { .. } => "Inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type")]
pub enum Certificate<T> {
    /// Every accessible state of a finite-state model is co-accessible.
    CoAccessibility,
    /// p̄(EOS | x) ≥ ε > 0 for every prefix.
    UniformEosBound { epsilon: T },
    /// p̄(EOS | x) ≥ f(|x|+1) for a family f whose series diverges.
    DivergentBoundFamily { family: EosBoundFamily<T> },
    /// The step-conditional EOS probability reached one.
    EosHitsOne { step: usize },
    /// All prefix mass was consumed before `step`: generation has stopped
    /// with certainty.
    SupportExhausted { step: usize },
    /// k·‖ĥₜ‖₂ ≤ log t for every supplied step t ≥ `from_step`.
    LogNormBound { k: T, from_step: usize },
}

/// A state that is accessible but cannot reach termination.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub state: usize,
    pub name: String,
}

/// What was observed when no certificate could be issued.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evidence<T> {
    pub note: String,
    pub horizon: Option<usize>,
    pub partial_sum: Option<T>,
    pub survival: Option<T>,
}

impl<T> Evidence<T> {
    pub fn note(note: impl Into<String>) -> Self {
        Self { note: note.into(), horizon: None, partial_sum: None, survival: None }
    }
}
