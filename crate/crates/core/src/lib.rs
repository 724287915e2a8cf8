//! Tightness analysis for autoregressive sequence models.
//!
//! An autoregressive model is *tight* when the probabilities of its finite
//! strings sum to one, i.e. no mass leaks to infinite sequences. This crate
//! decides tightness exactly for stochastic finite-state models, computes
//! the per-step EOS hazard and termination CDF of any model by enumeration,
//! certifies tightness from EOS lower bounds or RNN hidden-state growth, and
//! estimates termination by sampling.
//!
//! Everything is generic over the scalar type; the `*64` and `*32` aliases
//! at the crate root fix it.

// Comparisons are written `!(x <= y)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asm;
pub mod error;
pub mod linalg;
pub mod random;
pub mod scalar;
pub mod sfssm;
pub mod tightness;
pub mod zoo;

pub use asm::{
    prefix_probability, string_probability, validate_conditional, Alphabet, Asm, FnAsm, Prob, Str, Symbol, DEFAULT_TOL,
};
pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
pub use scalar::Scalar;
pub use sfssm::{
    accessible, build_sfssm, check_spectral_radius, coaccessible, decide_tight, mle_ngram, prefix_probability_fsa,
    string_probability_fsa, termination_probability, trim, useful, Sfssm, StateSet, SubstochasticFssm,
};
pub use tightness::{Certificate, EosBoundFamily, Evidence, McEstimate, PtildeSeries, TightnessVerdict, Witness};
pub use zoo::{
    make_nontight_relu_rnn, make_parity_asm, make_tight_softplus_rnn, sfssm_as_asm, Activation, ParityAsm, RnnAsm,
    SfssmAsm,
};

pub type Prob64 = Prob<f64>;
pub type Prob32 = Prob<f32>;
pub type Vector64 = Vector<f64>;
pub type Vector32 = Vector<f32>;
pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type Sfssm64 = Sfssm<f64>;
pub type Sfssm32 = Sfssm<f32>;
pub type SubstochasticFssm64 = SubstochasticFssm<f64>;
pub type SubstochasticFssm32 = SubstochasticFssm<f32>;
pub type RnnAsm64 = RnnAsm<f64>;
pub type RnnAsm32 = RnnAsm<f32>;
pub type ParityAsm64 = ParityAsm<f64>;
pub type Verdict64 = TightnessVerdict<f64>;
pub type Verdict32 = TightnessVerdict<f32>;
pub type Series64 = PtildeSeries<f64>;
