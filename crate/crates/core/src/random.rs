//! Random fixtures for property tests and benchmarks.

use rand::Rng;

use crate::asm::{Alphabet, Str, Symbol};
use crate::linalg::{Matrix, Vector};
use crate::scalar::Scalar;
use crate::sfssm::{build_sfssm, Sfssm};

/// A random model with `1..=max_states` states over `1..=max_symbols`
/// symbols. About 60% of edges and 40% of termination weights are zero, so
/// both tight and non-tight models are common.
pub fn random_sfssm<T: Scalar, R: Rng + ?Sized>(rng: &mut R, max_states: usize, max_symbols: usize) -> Sfssm<T> {
    let q = rng.gen_range(1..=max_states.max(1));
    let sigma = rng.gen_range(1..=max_symbols.max(1));
    let alphabet = Alphabet::new((0..sigma).map(|i| format!("s{i}"))).expect("generated names are valid");
    let mut raw = vec![vec![vec![0.0f64; q]; q]; sigma];
    let mut term = vec![0.0f64; q];
    for i in 0..q {
        for m in raw.iter_mut() {
            for w in m[i].iter_mut() {
                if rng.gen_bool(0.4) {
                    *w = rng.gen_range(0.05..1.0);
                }
            }
        }
        if rng.gen_bool(0.6) {
            term[i] = rng.gen_range(0.05..1.0);
        }
        let total: f64 = term[i] + raw.iter().map(|m| m[i].iter().sum::<f64>()).sum::<f64>();
        if total == 0.0 {
            raw[0][i][i] = 1.0;
            continue;
        }
        term[i] /= total;
        for m in raw.iter_mut() {
            m[i].iter_mut().for_each(|w| *w /= total);
        }
    }
    let mut init: Vec<f64> = (0..q).map(|_| if rng.gen_bool(0.5) { rng.gen_range(0.05..1.0) } else { 0.0 }).collect();
    if init.iter().all(|&x| x == 0.0) {
        init[rng.gen_range(0..q)] = 1.0;
    }
    let s: f64 = init.iter().sum();
    init.iter_mut().for_each(|x| *x /= s);

    let conv = |v: &[f64]| v.iter().map(|&x| T::lit(x)).collect::<Vec<T>>();
    let trans = raw
        .iter()
        .map(|m| Matrix::from_rows(&m.iter().map(|r| conv(r)).collect::<Vec<_>>()).expect("square"))
        .collect();
    build_sfssm(alphabet, trans, Vector::from(conv(&init)), Vector::from(conv(&term)))
        .expect("normalized by construction")
}

/// A corpus of `1..=max_strings` strings of length `0..=max_len` over
/// `alphabet`.
pub fn random_corpus<R: Rng + ?Sized>(
    rng: &mut R,
    alphabet: &Alphabet,
    max_strings: usize,
    max_len: usize,
) -> Vec<Str> {
    let n = rng.gen_range(1..=max_strings.max(1));
    (0..n)
        .map(|_| {
            let len = rng.gen_range(0..=max_len);
            Str::from((0..len).map(|_| Symbol(rng.gen_range(0..alphabet.len()))).collect::<Vec<_>>())
        })
        .collect()
}
