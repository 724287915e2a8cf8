//! Concrete models: the two bigram fixtures, Elman RNNs, the even-step EOS
//! model, and an adapter exposing any [`Sfssm`] as an [`Asm`].
//!
//! Step-index convention: "step t" generates the t-th output position, so
//! its conditional is taken after a prefix of length t − 1. An RNN's state
//! for that prefix is its initial hidden vector advanced t − 1 times. Under
//! this convention the ReLU example emits EOS at step t with probability
//! 1/(e^(t−1) + 1), and the softplus example with probability 1/(t + 1).

use serde::Serialize;

use crate::asm::{Alphabet, Asm, Str, Symbol};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::scalar::Scalar;
use crate::sfssm::Sfssm;

fn bigram<T: Scalar>(b_loop: f64, b_eos: f64) -> Sfssm<T> {
    let l = T::lit;
    let alphabet = Alphabet::new(["a", "b"]).expect("static alphabet");
    let mut pa = Matrix::zeros(3, 3);
    pa[(0, 1)] = l(1.0);
    pa[(1, 1)] = l(0.7);
    let mut pb = Matrix::zeros(3, 3);
    pb[(1, 2)] = l(0.2);
    pb[(2, 2)] = l(b_loop);
    let names = ["BOS", "a", "b"].map(String::from).to_vec();
    Sfssm::new(alphabet, names, vec![pa, pb], Vector::basis(3, 0), vec![l(0.0), l(0.1), l(b_eos)].into())
        .expect("fixture is normalized")
}

/// Bigram model over {a, b} whose `b` state loops forever: termination
/// probability 1/3.
pub fn nontight_bigram<T: Scalar>() -> Sfssm<T> {
    bigram(1.0, 0.0)
}

/// The same bigram model with `b` leaking 0.1 to EOS: termination
/// probability 1.
pub fn tight_bigram<T: Scalar>() -> Sfssm<T> {
    bigram(0.9, 0.1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Softplus,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Self::Relu => z.max(T::zero()),
            // log(1 + e^z) without overflow
            Self::Softplus => z.max(T::zero()) + (-z.abs()).exp().ln_1p(),
            Self::Tanh => z.tanh(),
            Self::Sigmoid => T::one() / (T::one() + (-z).exp()),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Relu => "relu",
            Self::Softplus => "softplus",
            Self::Tanh => "tanh",
            Self::Sigmoid => "sigmoid",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "relu" => Some(Self::Relu),
            "softplus" => Some(Self::Softplus),
            "tanh" => Some(Self::Tanh),
            "sigmoid" => Some(Self::Sigmoid),
            _ => None,
        }
    }

    /// Whether the activation range is bounded.
    pub fn is_bounded(self) -> bool {
        matches!(self, Self::Tanh | Self::Sigmoid)
    }
}

/// Elman RNN with a softmax output layer:
/// `hₜ = σ(W v(xₜ) + U hₜ₋₁ + b)`, `p̄(y | x≤ₜ) ∝ exp(u(y)ᵀ hₜ)`.
///
/// Embedding tables have one row per element of Σ̄, EOS last.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RnnAsm<T> {
    alphabet: Alphabet,
    input_emb: Vec<Vector<T>>,
    output_emb: Vec<Vector<T>>,
    w: Matrix<T>,
    u: Matrix<T>,
    bias: Vector<T>,
    activation: Activation,
    h0: Vector<T>,
}

impl<T: Scalar> RnnAsm<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        alphabet: Alphabet,
        input_emb: Vec<Vector<T>>,
        output_emb: Vec<Vector<T>>,
        w: Matrix<T>,
        u: Matrix<T>,
        bias: Vector<T>,
        activation: Activation,
        h0: Vector<T>,
    ) -> Result<Self> {
        let d = h0.dim();
        let rows = alphabet.len() + 1;
        let mismatch = |what: &str| Err(Error::DimensionMismatch(what.to_string()));
        if d == 0 {
            return mismatch("hidden dimension must be positive");
        }
        if input_emb.len() != rows || output_emb.len() != rows {
            return mismatch("embedding tables need one row per symbol plus EOS");
        }
        let e = input_emb[0].dim();
        if input_emb.iter().any(|v| v.dim() != e) || w.rows() != d || w.cols() != e {
            return mismatch("input embeddings must match the columns of W");
        }
        if output_emb.iter().any(|v| v.dim() != d) {
            return mismatch("output embeddings must have the hidden dimension");
        }
        if u.rows() != d || u.cols() != d || bias.dim() != d {
            return mismatch("U must be square and b must have the hidden dimension");
        }
        Ok(Self { alphabet, input_emb, output_emb, w, u, bias, activation, h0 })
    }

    pub fn hidden_dim(&self) -> usize {
        self.h0.dim()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn initial_hidden(&self) -> &Vector<T> {
        &self.h0
    }

    pub fn input_embeddings(&self) -> &[Vector<T>] {
        &self.input_emb
    }

    pub fn output_embeddings(&self) -> &[Vector<T>] {
        &self.output_emb
    }

    pub fn input_weights(&self) -> &Matrix<T> {
        &self.w
    }

    pub fn recurrent_weights(&self) -> &Matrix<T> {
        &self.u
    }

    pub fn bias(&self) -> &Vector<T> {
        &self.bias
    }

    /// `k = max over x ∈ Σ of ‖u(x) − u(EOS)‖₂`.
    pub fn output_gap(&self) -> T {
        let eos = &self.output_emb[self.alphabet.eos_index()];
        self.output_emb[..self.alphabet.len()]
            .iter()
            .map(|ux| ux.iter().zip(eos.iter()).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>().sqrt())
            .fold(T::zero(), T::max)
    }
}

/// One recurrence step on input symbol `x`.
pub fn rnn_step<T: Scalar>(m: &RnnAsm<T>, h: &Vector<T>, x: Symbol) -> Vector<T> {
    let wv = m.w.mul_vec(&m.input_emb[x.0]);
    let uh = m.u.mul_vec(h);
    (0..m.hidden_dim()).map(|i| m.activation.apply(wv[i] + uh[i] + m.bias[i])).collect::<Vec<T>>().into()
}

/// Softmax of the logits `u(y)ᵀ h` over Σ̄, shifted by the maximum logit.
pub fn rnn_conditional<T: Scalar>(m: &RnnAsm<T>, h: &Vector<T>) -> Vec<T> {
    let logits: Vec<T> = m.output_emb.iter().map(|u| u.dot(h)).collect();
    let top = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - top).exp()).collect();
    let z: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / z).collect()
}

impl<T: Scalar> Asm<T> for RnnAsm<T> {
    type State = Vector<T>;

    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    fn initial_state(&self) -> Vector<T> {
        self.h0.clone()
    }

    fn next_distribution(&self, state: &Vector<T>) -> Result<Vec<T>> {
        Ok(rnn_conditional(self, state))
    }

    fn advance(&self, state: &Vector<T>, symbol: Symbol) -> Result<Vector<T>> {
        Ok(rnn_step(self, state, symbol))
    }
}

fn scalar_rnn<T: Scalar>(w: f64, activation: Activation) -> RnnAsm<T> {
    let l = T::lit;
    let one = |x: f64| Vector::from(vec![l(x)]);
    let m1 = |x: f64| Matrix::from_row_major(1, 1, vec![l(x)]).expect("1x1");
    RnnAsm::new(
        Alphabet::new(["a"]).expect("static alphabet"),
        vec![one(1.0), one(0.0)],
        vec![one(1.0), one(0.0)],
        m1(w),
        m1(1.0),
        one(0.0),
        activation,
        one(0.0),
    )
    .expect("fixture dimensions agree")
}

/// One-unit ReLU RNN over {a} with `h ← ReLU(h + 1)` from `h = 0`.
///
/// EOS probability at step t is 1/(e^(t−1) + 1); the EOS series converges,
/// so the model is not tight (termination probability ≈ 0.702).
pub fn make_nontight_relu_rnn<T: Scalar>() -> RnnAsm<T> {
    scalar_rnn(1.0, Activation::Relu)
}

/// One-unit softplus RNN over {a} with `h ← log(eʰ + 1)` from `h = 0`.
///
/// After t − 1 symbols `h = log t`, so EOS probability at step t is
/// 1/(t + 1): decaying, but with a divergent series, hence tight.
pub fn make_tight_softplus_rnn<T: Scalar>() -> RnnAsm<T> {
    scalar_rnn(0.0, Activation::Softplus)
}

/// Emits EOS with probability `eos_prob_even` at even steps and never at odd
/// steps; the remaining mass is spread uniformly over Σ. Only odd-length
/// strings are generated, and the model is tight.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParityAsm<T> {
    alphabet: Alphabet,
    eos_prob_even: T,
}

impl<T: Scalar> ParityAsm<T> {
    pub fn with_alphabet(alphabet: Alphabet, eos_prob_even: T) -> Result<Self> {
        if !(eos_prob_even > T::zero() && eos_prob_even < T::one()) {
            return Err(Error::OutOfRange(format!("even-step EOS probability {eos_prob_even} not in (0, 1)")));
        }
        Ok(Self { alphabet, eos_prob_even })
    }

    pub fn eos_prob_even(&self) -> T {
        self.eos_prob_even
    }

    /// EOS probability at generation step `t` (1-based).
    pub fn eos_at_step(&self, t: usize) -> T {
        if t.is_multiple_of(2) {
            self.eos_prob_even
        } else {
            T::zero()
        }
    }
}

/// Parity model over the single-symbol alphabet {a}.
pub fn make_parity_asm<T: Scalar>(p_even: T) -> Result<ParityAsm<T>> {
    ParityAsm::with_alphabet(Alphabet::new(["a"]).expect("static alphabet"), p_even)
}

impl<T: Scalar> Asm<T> for ParityAsm<T> {
    /// Prefix length.
    type State = usize;

    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    fn initial_state(&self) -> usize {
        0
    }

    fn next_distribution(&self, len: &usize) -> Result<Vec<T>> {
        let eos = self.eos_at_step(len + 1);
        let each = (T::one() - eos) / T::from_usize_lossy(self.alphabet.len());
        let mut d = vec![each; self.alphabet.len() + 1];
        d[self.alphabet.eos_index()] = eos;
        Ok(d)
    }

    fn advance(&self, len: &usize, _symbol: Symbol) -> Result<usize> {
        Ok(len + 1)
    }
}

/// An [`Sfssm`] viewed as an autoregressive model through its forward
/// state distribution α: `p̄(a | x) = α P(a) 𝟙 / α 𝟙`, `p̄(EOS | x) = α t / α 𝟙`.
#[derive(Debug, Clone)]
pub struct SfssmAsm<T> {
    model: Sfssm<T>,
    /// `P(a) 𝟙` per symbol.
    symbol_mass: Vec<Vector<T>>,
}

pub fn sfssm_as_asm<T: Scalar>(m: Sfssm<T>) -> SfssmAsm<T> {
    let symbol_mass = m.transitions().iter().map(Matrix::row_sums).collect();
    SfssmAsm { model: m, symbol_mass }
}

impl<T: Scalar> SfssmAsm<T> {
    pub fn model(&self) -> &Sfssm<T> {
        &self.model
    }

    fn distribution_from(&self, alpha: &[T]) -> Option<Vec<T>> {
        let mass: T = alpha.iter().copied().sum();
        if !(mass > T::zero()) {
            return None;
        }
        let dot = |v: &Vector<T>| alpha.iter().zip(v.iter()).map(|(&a, &b)| a * b).sum::<T>() / mass;
        let mut d: Vec<T> = self.symbol_mass.iter().map(dot).collect();
        d.push(dot(self.model.term()));
        Some(d)
    }
}

impl<T: Scalar> Asm<T> for SfssmAsm<T> {
    /// Forward state distribution, rescaled to unit mass after every step.
    type State = Vec<T>;

    fn alphabet(&self) -> &Alphabet {
        self.model.alphabet()
    }

    fn initial_state(&self) -> Vec<T> {
        self.model.init().as_slice().to_vec()
    }

    fn next_distribution(&self, alpha: &Vec<T>) -> Result<Vec<T>> {
        self.distribution_from(alpha).ok_or(Error::DeadPrefix { prefix: Vec::new() })
    }

    fn advance(&self, alpha: &Vec<T>, symbol: Symbol) -> Result<Vec<T>> {
        let mut next = vec![T::zero(); alpha.len()];
        self.model.transition(symbol).vec_mul_into(alpha, &mut next);
        let mass: T = next.iter().copied().sum();
        if mass > T::zero() {
            next.iter_mut().for_each(|x| *x /= mass);
        }
        Ok(next)
    }

    /// Evaluated from the unnormalized forward vector `sᵀ P(x₁) ⋯ P(xₙ)`.
    fn conditional(&self, prefix: &Str) -> Result<Vec<T>> {
        self.model.alphabet().check(prefix)?;
        let mut alpha = self.model.init().clone();
        for &a in prefix {
            alpha = self.model.transition(a).vec_mul(&alpha);
        }
        self.distribution_from(alpha.as_slice()).ok_or_else(|| Error::DeadPrefix { prefix: prefix.indices() })
    }
}
