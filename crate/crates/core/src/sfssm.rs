//! Stochastic finite-state sequence models.
//!
//! A model has per-symbol transition matrices `P(a)`, an initial
//! distribution `s` and a termination vector `t`, with every state
//! locally normalized: `t_q + Σ_q' P_qq' = 1` where `P = Σ_a P(a)`. The
//! probability of a string is `sᵀ P(x₁) ⋯ P(xₙ) t`.
//!
//! Tightness is decided combinatorially: the model is tight exactly when
//! every accessible state is co-accessible. The exact termination
//! probability comes from the trimmed model as `s′ᵀ (I − P′)⁻¹ t′`.

use std::collections::HashMap;

use serde::Serialize;

use crate::asm::{Alphabet, Prob, Str, Symbol};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector, POWER_ITERATIONS};
use crate::scalar::Scalar;
use crate::tightness::{Certificate, TightnessVerdict, Witness};

/// Tolerance for the normalization invariants.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// [`NORMALIZATION_TOL`], widened to a few ulps for scalars too coarse to
/// resolve it.
pub fn normalization_tol<T: Scalar>() -> T {
    T::lit(NORMALIZATION_TOL).max(T::epsilon() * T::lit(64.0))
}

/// Name given to the all-padding history by [`mle_ngram`].
pub const BOS: &str = "BOS";

/// Transition, initial and termination weights shared by the stochastic and
/// the trimmed representation.
#[derive(Debug, Clone, PartialEq, Serialize)]
struct Weights<T> {
    trans: Vec<Matrix<T>>,
    init: Vector<T>,
    term: Vector<T>,
}

impl<T: Scalar> Weights<T> {
    fn num_states(&self) -> usize {
        self.init.dim()
    }

    fn total_transition(&self) -> Matrix<T> {
        let q = self.num_states();
        self.trans.iter().fold(Matrix::zeros(q, q), |acc, m| acc.add(m).expect("square transitions"))
    }

    /// `sᵀ P(x₁) ⋯ P(xₙ)`.
    fn forward(&self, x: &Str) -> Vector<T> {
        let mut alpha = self.init.clone();
        for &a in x {
            alpha = self.trans[a.0].vec_mul(&alpha);
        }
        alpha
    }

    fn string_probability(&self, x: &Str) -> Prob<T> {
        Prob::saturating(self.forward(x).dot(&self.term))
    }

    fn prefix_probability(&self, x: &Str) -> Prob<T> {
        Prob::saturating(self.forward(x).sum())
    }

    fn row_total(&self, q: usize) -> T {
        self.term[q] + self.trans.iter().map(|m| m.row(q).iter().copied().sum::<T>()).sum::<T>()
    }

    fn has_edge(&self, from: usize, to: usize) -> bool {
        self.trans.iter().any(|m| m[(from, to)] > T::zero())
    }
}

/// Set of state indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StateSet {
    members: Vec<bool>,
}

impl StateSet {
    pub fn empty(num_states: usize) -> Self {
        Self { members: vec![false; num_states] }
    }

    pub fn from_indices(num_states: usize, indices: &[usize]) -> Self {
        let mut s = Self::empty(num_states);
        indices.iter().for_each(|&i| s.insert(i));
        s
    }

    pub fn insert(&mut self, q: usize) {
        self.members[q] = true;
    }

    pub fn contains(&self, q: usize) -> bool {
        self.members.get(q).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.members.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.members.iter().any(|&b| b)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.iter().all(|q| other.contains(q))
    }

    pub fn intersection(&self, other: &Self) -> Self {
        Self { members: self.members.iter().enumerate().map(|(i, &b)| b && other.contains(i)).collect() }
    }
}

/// A validated stochastic finite-state sequence model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sfssm<T> {
    alphabet: Alphabet,
    state_names: Vec<String>,
    weights: Weights<T>,
}

/// Builds a model with states named `q0`, `q1`, ….
pub fn build_sfssm<T: Scalar>(
    alphabet: Alphabet,
    trans: Vec<Matrix<T>>,
    init: Vector<T>,
    term: Vector<T>,
) -> Result<Sfssm<T>> {
    let names = (0..init.dim()).map(|i| format!("q{i}")).collect();
    Sfssm::new(alphabet, names, trans, init, term)
}

impl<T: Scalar> Sfssm<T> {
    pub fn new(
        alphabet: Alphabet,
        state_names: Vec<String>,
        trans: Vec<Matrix<T>>,
        init: Vector<T>,
        term: Vector<T>,
    ) -> Result<Self> {
        let q = init.dim();
        if q == 0 {
            return Err(Error::DimensionMismatch("a model needs at least one state".into()));
        }
        if state_names.len() != q {
            return Err(Error::DimensionMismatch(format!("{} state names for {q} states", state_names.len())));
        }
        if term.dim() != q {
            return Err(Error::DimensionMismatch(format!("termination vector has length {}", term.dim())));
        }
        if trans.len() != alphabet.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} transition matrices for {} symbols",
                trans.len(),
                alphabet.len()
            )));
        }
        for (a, m) in trans.iter().enumerate() {
            if m.rows() != q || m.cols() != q {
                return Err(Error::DimensionMismatch(format!(
                    "P({}) is {}x{}, expected {q}x{q}",
                    alphabet.names()[a],
                    m.rows(),
                    m.cols()
                )));
            }
        }
        let bad = |x: T| !x.is_finite() || x < T::zero();
        for (a, m) in trans.iter().enumerate() {
            if let Some(k) = m.as_slice().iter().position(|&x| bad(x)) {
                return Err(Error::NegativeEntry {
                    location: format!("P({})[{}, {}]", alphabet.names()[a], k / q, k % q),
                });
            }
        }
        if let Some(i) = init.iter().position(|&x| bad(x)) {
            return Err(Error::NegativeEntry { location: format!("s[{i}]") });
        }
        if let Some(i) = term.iter().position(|&x| bad(x)) {
            return Err(Error::NegativeEntry { location: format!("t[{i}]") });
        }
        let tol = normalization_tol::<T>();
        let s = init.sum();
        if (s - T::one()).abs() > tol {
            return Err(Error::BadInit { sum: s.to_f64_lossy() });
        }
        let weights = Weights { trans, init, term };
        for state in 0..q {
            let total = weights.row_total(state);
            if (total - T::one()).abs() > tol {
                return Err(Error::BadRow { state, total: total.to_f64_lossy() });
            }
        }
        Ok(Self { alphabet, state_names, weights })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn num_states(&self) -> usize {
        self.weights.num_states()
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.state_names.iter().position(|n| n == name)
    }

    pub fn transition(&self, a: Symbol) -> &Matrix<T> {
        &self.weights.trans[a.0]
    }

    pub fn transitions(&self) -> &[Matrix<T>] {
        &self.weights.trans
    }

    pub fn init(&self) -> &Vector<T> {
        &self.weights.init
    }

    pub fn term(&self) -> &Vector<T> {
        &self.weights.term
    }

    /// `P = Σ_a P(a)`.
    pub fn total_transition(&self) -> Matrix<T> {
        self.weights.total_transition()
    }
}

/// A trimmed model: only useful states remain, so rows may lose mass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubstochasticFssm<T> {
    alphabet: Alphabet,
    state_names: Vec<String>,
    weights: Weights<T>,
    state_map: Vec<usize>,
}

impl<T: Scalar> SubstochasticFssm<T> {
    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn num_states(&self) -> usize {
        self.weights.num_states()
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    /// Original index of each retained state.
    pub fn state_map(&self) -> &[usize] {
        &self.state_map
    }

    pub fn transitions(&self) -> &[Matrix<T>] {
        &self.weights.trans
    }

    pub fn init(&self) -> &Vector<T> {
        &self.weights.init
    }

    pub fn term(&self) -> &Vector<T> {
        &self.weights.term
    }

    /// `P′ = Σ_a P′(a)`.
    pub fn total_transition(&self) -> Matrix<T> {
        self.weights.total_transition()
    }

    pub fn string_probability(&self, x: &Str) -> Result<Prob<T>> {
        self.alphabet.check(x)?;
        Ok(self.weights.string_probability(x))
    }
}

/// `sᵀ P(x₁) ⋯ P(xₙ) t`.
pub fn string_probability_fsa<T: Scalar>(m: &Sfssm<T>, x: &Str) -> Result<Prob<T>> {
    m.alphabet.check(x)?;
    Ok(m.weights.string_probability(x))
}

/// `sᵀ P(x₁) ⋯ P(xₙ) 𝟙`.
pub fn prefix_probability_fsa<T: Scalar>(m: &Sfssm<T>, x: &Str) -> Result<Prob<T>> {
    m.alphabet.check(x)?;
    Ok(m.weights.prefix_probability(x))
}

fn closure<T: Scalar>(w: &Weights<T>, seeds: impl Iterator<Item = usize>, forward: bool) -> StateSet {
    let q = w.num_states();
    let mut set = StateSet::empty(q);
    let mut stack: Vec<usize> = seeds.collect();
    stack.iter().for_each(|&s| set.insert(s));
    while let Some(u) = stack.pop() {
        for v in 0..q {
            let edge = if forward { w.has_edge(u, v) } else { w.has_edge(v, u) };
            if edge && !set.contains(v) {
                set.insert(v);
                stack.push(v);
            }
        }
    }
    set
}

/// States reachable with positive probability from a state with `s_q > 0`.
pub fn accessible<T: Scalar>(m: &Sfssm<T>) -> StateSet {
    let w = &m.weights;
    closure(w, (0..w.num_states()).filter(|&q| w.init[q] > T::zero()), true)
}

/// States that reach a state with `t_q > 0` with positive probability.
pub fn coaccessible<T: Scalar>(m: &Sfssm<T>) -> StateSet {
    let w = &m.weights;
    closure(w, (0..w.num_states()).filter(|&q| w.term[q] > T::zero()), false)
}

/// Accessible and co-accessible states.
pub fn useful<T: Scalar>(m: &Sfssm<T>) -> StateSet {
    accessible(m).intersection(&coaccessible(m))
}

/// Tight iff every accessible state is co-accessible.
///
/// A non-tight verdict names the lowest-index accessible state that cannot
/// terminate and carries the exact leaked mass `1 − s′ᵀ(I − P′)⁻¹t′`.
pub fn decide_tight<T: Scalar>(m: &Sfssm<T>) -> TightnessVerdict<T> {
    let acc = accessible(m);
    let coacc = coaccessible(m);
    let violator = acc.iter().find(|&q| !coacc.contains(q));
    match violator {
        None => TightnessVerdict::Tight { certificate: Certificate::CoAccessibility },
        Some(q) => {
            let leaked_mass = match trim(m) {
                Ok(sub) => termination_probability(&sub).ok().map(|p| p.complement().value()),
                Err(_) => Some(T::one()),
            };
            TightnessVerdict::NonTight {
                witness: Some(Witness { state: q, name: m.state_names[q].clone() }),
                leaked_mass,
            }
        }
    }
}

/// Deletes every state that is not useful. Initial weights on retained
/// states are kept as they are, without renormalization.
pub fn trim<T: Scalar>(m: &Sfssm<T>) -> Result<SubstochasticFssm<T>> {
    let keep: Vec<usize> = useful(m).iter().collect();
    if keep.is_empty() {
        return Err(Error::NoUsefulStates);
    }
    let w = &m.weights;
    let weights = Weights {
        trans: w.trans.iter().map(|p| p.principal_submatrix(&keep)).collect(),
        init: keep.iter().map(|&q| w.init[q]).collect::<Vec<T>>().into(),
        term: keep.iter().map(|&q| w.term[q]).collect::<Vec<T>>().into(),
    };
    Ok(SubstochasticFssm {
        alphabet: m.alphabet.clone(),
        state_names: keep.iter().map(|&q| m.state_names[q].clone()).collect(),
        weights,
        state_map: keep,
    })
}

/// Total probability of finite strings, `s′ᵀ (I − P′)⁻¹ t′`.
pub fn termination_probability<T: Scalar>(m: &SubstochasticFssm<T>) -> Result<Prob<T>> {
    let a = m.total_transition().identity_minus();
    let y = linalg::solve_linear(&a, &m.weights.term)?;
    let p = m.weights.init.dot(&y);
    if !p.is_finite() || p < -normalization_tol::<T>() || p > T::one() + normalization_tol::<T>() {
        return Err(Error::OutOfRange(format!("termination probability {p}")));
    }
    Ok(Prob::saturating(p))
}

/// Power-iteration estimate of ρ(P′). Below one for every trimmed model.
pub fn check_spectral_radius<T: Scalar>(m: &SubstochasticFssm<T>) -> T {
    let est = linalg::spectral_radius_estimate(&m.total_transition(), POWER_ITERATIONS)
        .expect("trimmed transition matrix is square")
        .estimate;
    debug_assert!(est < T::one(), "trimmed model with spectral radius estimate {est}");
    est
}

/// Maximum-likelihood n-gram model of `corpus`.
///
/// States are the observed histories of the last `n − 1` symbols, padded
/// with `BOS` at the start of each string. Histories never observed as a
/// context do not become states. The all-`BOS` history is state 0 and
/// carries all initial mass.
pub fn mle_ngram<T: Scalar>(alphabet: &Alphabet, corpus: &[Str], n: usize) -> Result<Sfssm<T>> {
    if n == 0 {
        return Err(Error::OutOfRange("n-gram order must be at least 1".into()));
    }
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    corpus.iter().try_for_each(|x| alphabet.check(x))?;

    type History = Vec<Option<Symbol>>;
    let start: History = vec![None; n - 1];
    let mut index: HashMap<History, usize> = HashMap::new();
    let mut histories: Vec<History> = Vec::new();
    // per state: counts indexed by symbol, EOS last
    let mut counts: Vec<Vec<u64>> = Vec::new();
    let width = alphabet.len() + 1;
    let mut state_of = |h: &History, histories: &mut Vec<History>, counts: &mut Vec<Vec<u64>>| -> usize {
        *index.entry(h.clone()).or_insert_with(|| {
            histories.push(h.clone());
            counts.push(vec![0; width]);
            histories.len() - 1
        })
    };
    state_of(&start, &mut histories, &mut counts);
    let shift = |h: &History, a: Symbol| -> History {
        if h.is_empty() {
            return Vec::new();
        }
        let mut next = h[1..].to_vec();
        next.push(Some(a));
        next
    };
    for x in corpus {
        let mut h = start.clone();
        for &a in x {
            let q = state_of(&h, &mut histories, &mut counts);
            counts[q][a.0] += 1;
            h = shift(&h, a);
        }
        let q = state_of(&h, &mut histories, &mut counts);
        counts[q][alphabet.eos_index()] += 1;
    }

    let nq = histories.len();
    let lookup: HashMap<&History, usize> = histories.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let mut trans = vec![Matrix::zeros(nq, nq); alphabet.len()];
    let mut term = Vector::zeros(nq);
    for (q, h) in histories.iter().enumerate() {
        let total: u64 = counts[q].iter().sum();
        let total = T::from_u64(total).expect("count fits the scalar type");
        for a in alphabet.symbols() {
            let c = counts[q][a.0];
            if c > 0 {
                let to = lookup[&shift(h, a)];
                trans[a.0][(q, to)] = T::from_u64(c).expect("count fits the scalar type") / total;
            }
        }
        term[q] = T::from_u64(counts[q][alphabet.eos_index()]).expect("count fits the scalar type") / total;
    }

    let mut names: Vec<String> = Vec::with_capacity(nq);
    for h in &histories {
        let base = if h.iter().all(Option::is_none) {
            BOS.to_string()
        } else {
            h.iter().map(|s| s.map_or(BOS, |s| alphabet.name(s))).collect::<Vec<_>>().join("|")
        };
        let name = if names.contains(&base) { format!("{base}#{}", names.len()) } else { base };
        names.push(name);
    }
    Sfssm::new(alphabet.clone(), names, trans, Vector::basis(nq, 0), term)
}
