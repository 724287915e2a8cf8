//! Alphabets, strings and the autoregressive sequence model abstraction.
//!
//! An [`Asm`] maps every finite prefix over Σ to a probability vector over
//! Σ̄ = Σ ∪ {EOS}. Vectors are laid out with the symbols of Σ first, in
//! alphabet order, and EOS last (index [`Alphabet::eos_index`]).
//!
//! The termination probability of a model is the total mass it assigns to
//! finite strings; a model is tight when that mass is one, i.e. when the
//! event "EOS is never emitted" has probability zero. Nothing here
//! represents the underlying probability space explicitly: all quantities
//! are computed from prefix conditionals.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default normalization tolerance for conditional vectors.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Slack allowed when clamping a probability into `[0, 1]`.
pub const PROB_SLACK: f64 = 1e-12;

/// Index of a symbol of Σ within its [`Alphabet`]. Never denotes EOS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Symbol(pub usize);

/// An ordered finite set of symbols plus a distinguished EOS marker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Alphabet {
    symbols: Vec<String>,
    eos: String,
}

impl Alphabet {
    /// Builds an alphabet whose end marker is named `EOS`.
    pub fn new<I, S>(symbols: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::with_eos(symbols, "EOS")
    }

    pub fn with_eos<I, S>(symbols: I, eos: impl Into<String>) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        let eos = eos.into();
        if symbols.is_empty() {
            return Err(Error::InvalidAlphabet("no symbols".into()));
        }
        for (i, s) in symbols.iter().enumerate() {
            if s.is_empty() || s.chars().any(char::is_whitespace) {
                return Err(Error::InvalidAlphabet(format!("bad symbol name {s:?}")));
            }
            if symbols[..i].contains(s) {
                return Err(Error::InvalidAlphabet(format!("duplicate symbol `{s}`")));
            }
            if *s == eos {
                return Err(Error::InvalidAlphabet(format!("`{s}` is the end marker")));
            }
        }
        if eos.is_empty() || eos.chars().any(char::is_whitespace) {
            return Err(Error::InvalidAlphabet(format!("bad end marker {eos:?}")));
        }
        Ok(Self { symbols, eos })
    }

    /// |Σ|, not counting EOS.
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Position of EOS in conditional vectors; equals `len()`.
    pub fn eos_index(&self) -> usize {
        self.symbols.len()
    }

    pub fn eos(&self) -> &str {
        &self.eos
    }

    pub fn names(&self) -> &[String] {
        &self.symbols
    }

    pub fn symbol(&self, name: &str) -> Option<Symbol> {
        self.symbols.iter().position(|s| s == name).map(Symbol)
    }

    pub fn name(&self, symbol: Symbol) -> &str {
        &self.symbols[symbol.0]
    }

    pub fn symbols(&self) -> impl Iterator<Item = Symbol> + '_ {
        (0..self.symbols.len()).map(Symbol)
    }

    /// Builds a string from symbol names.
    pub fn string<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Str> {
        tokens
            .iter()
            .map(|t| {
                let t = t.as_ref();
                self.symbol(t).ok_or_else(|| Error::UnknownSymbol(t.to_string()))
            })
            .collect::<Result<Vec<_>>>()
            .map(Str)
    }

    /// Parses whitespace-separated symbol names.
    pub fn parse(&self, text: &str) -> Result<Str> {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        self.string(&tokens)
    }

    pub fn render(&self, x: &Str) -> String {
        x.iter().map(|&s| self.name(s)).collect::<Vec<_>>().join(" ")
    }

    /// Fails with `UnknownSymbol` if some token is out of range.
    pub fn check(&self, x: &Str) -> Result<()> {
        match x.iter().find(|s| s.0 >= self.len()) {
            Some(s) => Err(Error::UnknownSymbol(format!("#{}", s.0))),
            None => Ok(()),
        }
    }
}

/// A finite string over Σ. EOS is never a member.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Str(Vec<Symbol>);

impl Str {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        Self(indices.into_iter().map(Symbol).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Symbol] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Symbol> {
        self.0.iter()
    }

    pub fn push(&mut self, s: Symbol) {
        self.0.push(s);
    }

    /// `self · s` as a new string.
    pub fn extended(&self, s: Symbol) -> Self {
        let mut v = self.0.clone();
        v.push(s);
        Self(v)
    }

    pub fn indices(&self) -> Vec<usize> {
        self.0.iter().map(|s| s.0).collect()
    }
}

impl From<Vec<Symbol>> for Str {
    fn from(v: Vec<Symbol>) -> Self {
        Self(v)
    }
}

impl<'a> IntoIterator for &'a Str {
    type Item = &'a Symbol;
    type IntoIter = std::slice::Iter<'a, Symbol>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// A probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct Prob<T>(T);

impl<T: Scalar> Prob<T> {
    /// Accepts values within [`PROB_SLACK`] of `[0, 1]`, clamping them in.
    pub fn new(value: T) -> Result<Self> {
        let slack = T::lit(PROB_SLACK);
        if !value.is_finite() || value < -slack || value > T::one() + slack {
            return Err(Error::OutOfRange(format!("probability {value}")));
        }
        Ok(Self(value.max(T::zero()).min(T::one())))
    }

    /// Wraps a value computed by a routine that guarantees the range up to
    /// rounding; clamps without checking.
    pub(crate) fn saturating(value: T) -> Self {
        Self(value.max(T::zero()).min(T::one()))
    }

    pub fn zero() -> Self {
        Self(T::zero())
    }

    pub fn one() -> Self {
        Self(T::one())
    }

    pub fn value(self) -> T {
        self.0
    }

    pub fn complement(self) -> Self {
        Self(T::one() - self.0)
    }
}

impl<T: Scalar> fmt::Display for Prob<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// An autoregressive sequence model.
///
/// The contract is the pure prefix function [`Asm::conditional`]. Models
/// expose it through an incremental state so that long prefixes are not
/// recomputed from scratch; the default `conditional` folds the prefix
/// through [`Asm::advance`], so both views agree by construction.
pub trait Asm<T: Scalar> {
    /// Caller-owned evaluation state summarizing a prefix.
    type State: Clone + Send;

    fn alphabet(&self) -> &Alphabet;

    /// State for the empty prefix.
    fn initial_state(&self) -> Self::State;

    /// The conditional over Σ̄ for the prefix summarized by `state`.
    fn next_distribution(&self, state: &Self::State) -> Result<Vec<T>>;

    /// State for `prefix · symbol`.
    fn advance(&self, state: &Self::State, symbol: Symbol) -> Result<Self::State>;

    fn state_after(&self, prefix: &Str) -> Result<Self::State> {
        self.alphabet().check(prefix)?;
        prefix.iter().try_fold(self.initial_state(), |st, &a| self.advance(&st, a))
    }

    /// p̄(· | prefix) over Σ̄.
    fn conditional(&self, prefix: &Str) -> Result<Vec<T>> {
        self.next_distribution(&self.state_after(prefix)?)
    }
}

impl<T: Scalar, A: Asm<T> + ?Sized> Asm<T> for &A {
    type State = A::State;

    fn alphabet(&self) -> &Alphabet {
        (**self).alphabet()
    }

    fn initial_state(&self) -> Self::State {
        (**self).initial_state()
    }

    fn next_distribution(&self, state: &Self::State) -> Result<Vec<T>> {
        (**self).next_distribution(state)
    }

    fn advance(&self, state: &Self::State, symbol: Symbol) -> Result<Self::State> {
        (**self).advance(state, symbol)
    }
}

/// An ASM given directly as a function of the prefix.
pub struct FnAsm<F> {
    alphabet: Alphabet,
    cond: F,
}

impl<F> FnAsm<F> {
    pub fn new(alphabet: Alphabet, cond: F) -> Self {
        Self { alphabet, cond }
    }
}

impl<T, F> Asm<T> for FnAsm<F>
where
    T: Scalar,
    F: Fn(&[Symbol]) -> Vec<T>,
{
    type State = Vec<Symbol>;

    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    fn initial_state(&self) -> Self::State {
        Vec::new()
    }

    fn next_distribution(&self, state: &Self::State) -> Result<Vec<T>> {
        let d = (self.cond)(state);
        if d.len() != self.alphabet.len() + 1 {
            return Err(Error::DimensionMismatch(format!(
                "conditional has {} entries, expected {}",
                d.len(),
                self.alphabet.len() + 1
            )));
        }
        Ok(d)
    }

    fn advance(&self, state: &Self::State, symbol: Symbol) -> Result<Self::State> {
        let mut next = state.clone();
        next.push(symbol);
        Ok(next)
    }
}

/// Checks that the conditional at `prefix` is nonnegative and sums to one
/// within `tol`.
pub fn validate_conditional<T: Scalar, A: Asm<T>>(asm: &A, prefix: &Str, tol: T) -> Result<()> {
    let d = asm.conditional(prefix)?;
    let offending: Vec<(usize, f64)> = d
        .iter()
        .enumerate()
        .filter(|(_, &p)| !p.is_finite() || p < T::zero())
        .map(|(i, &p)| (i, p.to_f64_lossy()))
        .collect();
    let sum: T = d.iter().copied().sum();
    if !offending.is_empty() || !((sum - T::one()).abs() <= tol) {
        return Err(Error::NotADistribution { prefix: prefix.indices(), sum: sum.to_f64_lossy(), offending });
    }
    Ok(())
}

/// p(x) = p̄(EOS | x) · ∏ₜ p̄(xₜ | x_<t).
///
/// Returns zero as soon as the running product vanishes, so prefixes past a
/// dead symbol are never evaluated.
pub fn string_probability<T: Scalar, A: Asm<T>>(asm: &A, x: &Str) -> Result<Prob<T>> {
    asm.alphabet().check(x)?;
    let eos = asm.alphabet().eos_index();
    let (state, p) = match walk_prefix(asm, x)? {
        Some(v) => v,
        None => return Ok(Prob::zero()),
    };
    let d = asm.next_distribution(&state)?;
    Ok(Prob::saturating(p * d[eos]))
}

/// p̄(x) = ∏ₜ p̄(xₜ | x_<t), the probability that generation starts with `x`.
pub fn prefix_probability<T: Scalar, A: Asm<T>>(asm: &A, x: &Str) -> Result<Prob<T>> {
    asm.alphabet().check(x)?;
    Ok(match walk_prefix(asm, x)? {
        Some((_, p)) => Prob::saturating(p),
        None => Prob::zero(),
    })
}

/// Folds `x` through the model, returning the final state and the prefix
/// probability, or `None` if the prefix probability hits zero.
fn walk_prefix<T: Scalar, A: Asm<T>>(asm: &A, x: &Str) -> Result<Option<(A::State, T)>> {
    let mut state = asm.initial_state();
    let mut p = T::one();
    for &a in x {
        let d = asm.next_distribution(&state)?;
        p *= d[a.0];
        if p == T::zero() {
            return Ok(None);
        }
        state = asm.advance(&state, a)?;
    }
    Ok(Some((state, p)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ab() -> Alphabet {
        Alphabet::new(["a", "b"]).unwrap()
    }

    /// The bigram model with an absorbing `b` state, written as a prefix function.
    fn absorbing_bigram() -> FnAsm<impl Fn(&[Symbol]) -> Vec<f64>> {
        FnAsm::new(ab(), |prefix: &[Symbol]| match prefix.last() {
            None => vec![1.0, 0.0, 0.0],
            Some(Symbol(0)) => vec![0.7, 0.2, 0.1],
            Some(_) => vec![0.0, 1.0, 0.0],
        })
    }

    #[test]
    fn alphabet_rejects_bad_input() {
        assert!(Alphabet::new(Vec::<String>::new()).is_err());
        assert!(Alphabet::new(["a", "a"]).is_err());
        assert!(Alphabet::new(["a", "EOS"]).is_err());
        assert!(Alphabet::new(["a b"]).is_err());
        let a = ab();
        assert_eq!(a.eos_index(), 2);
        assert_eq!(a.parse("a b a").unwrap().indices(), vec![0, 1, 0]);
        assert_eq!(a.parse("c"), Err(Error::UnknownSymbol("c".into())));
        assert_eq!(a.render(&a.parse("b a").unwrap()), "b a");
    }

    #[test]
    fn prob_clamps_within_slack() {
        assert_eq!(Prob::new(1.0 + 1e-13).unwrap().value(), 1.0);
        assert_eq!(Prob::new(-1e-13).unwrap().value(), 0.0);
        assert!(Prob::new(1.1).is_err());
        assert!(Prob::new(f64::NAN).is_err());
    }

    #[test]
    fn validate_uniform_ok() {
        let m = FnAsm::new(ab(), |_: &[Symbol]| vec![1.0 / 3.0; 3]);
        validate_conditional(&m, &Str::empty(), 1e-9).unwrap();
    }

    #[test]
    fn validate_rejects_short_mass() {
        let m = FnAsm::new(ab(), |_: &[Symbol]| vec![0.3, 0.3, 0.3]);
        match validate_conditional(&m, &Str::empty(), 1e-9) {
            Err(Error::NotADistribution { sum, .. }) => assert_abs_diff_eq!(sum, 0.9, epsilon = 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        let neg = FnAsm::new(ab(), |_: &[Symbol]| vec![1.2, -0.2, 0.0]);
        match validate_conditional(&neg, &Str::empty(), 1e-9) {
            Err(Error::NotADistribution { offending, .. }) => assert_eq!(offending[0].0, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validate_bigram_after_a() {
        let m = absorbing_bigram();
        let x = m.alphabet.parse("a").unwrap();
        validate_conditional(&m, &x, 1e-9).unwrap();
        assert_eq!(m.conditional(&x).unwrap(), vec![0.7, 0.2, 0.1]);
    }

    #[test]
    fn string_probabilities_on_bigram() {
        let m = absorbing_bigram();
        let a = m.alphabet.clone();
        assert_abs_diff_eq!(string_probability(&m, &a.parse("a").unwrap()).unwrap().value(), 0.1);
        assert_eq!(string_probability(&m, &a.parse("a b").unwrap()).unwrap().value(), 0.0);
        assert_eq!(string_probability(&m, &Str::empty()).unwrap().value(), 0.0);
        assert_abs_diff_eq!(
            string_probability(&m, &a.parse("a a a").unwrap()).unwrap().value(),
            0.49 * 0.1,
            epsilon = 1e-15
        );
    }

    #[test]
    fn prefix_probabilities_on_bigram() {
        let m = absorbing_bigram();
        let a = m.alphabet.clone();
        assert_eq!(prefix_probability(&m, &Str::empty()).unwrap().value(), 1.0);
        assert_abs_diff_eq!(prefix_probability(&m, &a.parse("a a").unwrap()).unwrap().value(), 0.7);
        assert_eq!(prefix_probability(&m, &a.parse("b a").unwrap()).unwrap().value(), 0.0);
    }

    #[test]
    fn decomposition_by_expansion_on_bigram() {
        let m = absorbing_bigram();
        let a = m.alphabet.clone();
        for text in ["", "a", "a a", "a b", "a a b b"] {
            let x = a.parse(text).unwrap();
            let lhs = prefix_probability(&m, &x).unwrap().value();
            let rhs = string_probability(&m, &x).unwrap().value()
                + a.symbols().map(|s| prefix_probability(&m, &x.extended(s)).unwrap().value()).sum::<f64>();
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
        }
    }

    #[test]
    fn out_of_alphabet_string_is_rejected() {
        let m = absorbing_bigram();
        let x = Str::from_indices([0, 5]);
        assert!(matches!(string_probability(&m, &x), Err(Error::UnknownSymbol(_))));
    }
}
