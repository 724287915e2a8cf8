use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::asm::{Asm, Symbol};
use crate::error::Result;
use crate::scalar::Scalar;

/// Default cap on generated positions per run.
pub const DEFAULT_MAX_LEN: usize = 10_000;

/// Samples per parallel work unit. Results do not depend on it.
const CHUNK: usize = 512;

/// z-score of the reported two-sided 95% interval.
const Z95: f64 = 1.959_963_984_540_054;

/// Ancestral-sampling estimate of the termination probability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub samples: usize,
    pub max_len: usize,
    pub seed: u64,
    pub terminated: u64,
    pub truncated: u64,
    /// Lower bound on the termination probability, up to sampling error.
    pub terminated_fraction: f64,
    pub truncated_fraction: f64,
    pub mean_length_of_terminated: Option<f64>,
    /// Normal-approximation 95% half-width of `terminated_fraction`.
    pub confidence_halfwidth: f64,
    /// Length of each terminated string → count.
    pub length_histogram: BTreeMap<usize, u64>,
}

#[derive(Default)]
struct Tally {
    terminated: u64,
    truncated: u64,
    length_sum: u128,
    lengths: BTreeMap<usize, u64>,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        self.terminated += other.terminated;
        self.truncated += other.truncated;
        self.length_sum += other.length_sum;
        for (k, v) in other.lengths {
            *self.lengths.entry(k).or_default() += v;
        }
        self
    }
}

/// Samples `samples` runs of at most `max_len` positions each.
///
/// Run `i` draws from its own ChaCha stream `i` under `seed`, so the result
/// is identical however runs are spread across threads.
pub fn monte_carlo_termination<T, A>(asm: &A, samples: usize, max_len: usize, seed: u64) -> Result<McEstimate>
where
    T: Scalar,
    A: Asm<T> + Sync,
{
    monte_carlo_termination_with(asm, samples, max_len, seed, true)
}

pub fn monte_carlo_termination_with<T, A>(
    asm: &A,
    samples: usize,
    max_len: usize,
    seed: u64,
    parallel: bool,
) -> Result<McEstimate>
where
    T: Scalar,
    A: Asm<T> + Sync,
{
    let chunks: Vec<(usize, usize)> = (0..samples).step_by(CHUNK).map(|lo| (lo, (lo + CHUNK).min(samples))).collect();
    let run_chunk = |&(lo, hi): &(usize, usize)| -> Result<Tally> {
        let mut tally = Tally::default();
        for i in lo..hi {
            match sample_run(asm, max_len, seed, i as u64)? {
                Some(len) => {
                    tally.terminated += 1;
                    tally.length_sum += len as u128;
                    *tally.lengths.entry(len).or_default() += 1;
                }
                None => tally.truncated += 1,
            }
        }
        Ok(tally)
    };
    let parts: Vec<Tally> = if parallel {
        chunks.par_iter().map(run_chunk).collect::<Result<_>>()?
    } else {
        chunks.iter().map(run_chunk).collect::<Result<_>>()?
    };
    let tally = parts.into_iter().fold(Tally::default(), Tally::merge);

    let n = samples.max(1) as f64;
    let p = tally.terminated as f64 / n;
    Ok(McEstimate {
        samples,
        max_len,
        seed,
        terminated: tally.terminated,
        truncated: tally.truncated,
        terminated_fraction: p,
        truncated_fraction: tally.truncated as f64 / n,
        mean_length_of_terminated: (tally.terminated > 0).then(|| tally.length_sum as f64 / tally.terminated as f64),
        confidence_halfwidth: Z95 * (p * (1.0 - p) / n).sqrt(),
        length_histogram: tally.lengths,
    })
}

/// Length of the generated string, or `None` if no EOS within `max_len`
/// positions.
fn sample_run<T, A>(asm: &A, max_len: usize, seed: u64, stream: u64) -> Result<Option<usize>>
where
    T: Scalar,
    A: Asm<T>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let eos = asm.alphabet().eos_index();
    let mut state = asm.initial_state();
    for len in 0..max_len {
        let d = asm.next_distribution(&state)?;
        let choice = draw(&d, rng.gen::<f64>());
        if choice == eos {
            return Ok(Some(len));
        }
        state = asm.advance(&state, Symbol(choice))?;
    }
    Ok(None)
}

/// Inverse-CDF draw that never selects a zero-probability entry.
fn draw<T: Scalar>(d: &[T], u: f64) -> usize {
    let mut cum = 0.0;
    let mut last = 0;
    for (i, p) in d.iter().enumerate() {
        let p = p.to_f64_lossy();
        if p > 0.0 {
            cum += p;
            last = i;
            if u < cum {
                return i;
            }
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::Alphabet;
    use crate::linalg::Matrix;
    use crate::sfssm::build_sfssm;
    use crate::zoo::{make_tight_softplus_rnn, nontight_bigram, sfssm_as_asm};

    #[test]
    fn draw_skips_zero_entries() {
        assert_eq!(draw(&[0.0, 1.0, 0.0], 0.0), 1);
        assert_eq!(draw(&[0.0, 1.0, 0.0], 0.999_999), 1);
        assert_eq!(draw(&[0.5, 0.5 - 1e-17, 0.0], 0.999_999_999_999_999_9), 1);
        assert_eq!(draw(&[0.25, 0.25, 0.5], 0.3), 1);
    }

    #[test]
    fn sure_termination() {
        let a = Alphabet::new(["a"]).unwrap();
        let m = build_sfssm(a, vec![Matrix::zeros(1, 1)], vec![1.0].into(), vec![1.0].into()).unwrap();
        let est = monte_carlo_termination(&sfssm_as_asm(m), 1000, 10, 3).unwrap();
        assert_eq!(est.terminated_fraction, 1.0);
        assert_eq!(est.confidence_halfwidth, 0.0);
        assert_eq!(est.mean_length_of_terminated, Some(0.0));
        assert_eq!(est.length_histogram.get(&0), Some(&1000));
    }

    #[test]
    fn parallel_matches_serial() {
        let m = sfssm_as_asm(nontight_bigram::<f64>());
        let a = monte_carlo_termination_with(&m, 3000, 200, 42, true).unwrap();
        let b = monte_carlo_termination_with(&m, 3000, 200, 42, false).unwrap();
        assert_eq!(a, b);
        let c = monte_carlo_termination_with(&m, 3000, 200, 43, true).unwrap();
        assert_ne!(a.terminated, c.terminated);
    }

    #[test]
    fn bigram_estimate() {
        let m = sfssm_as_asm(nontight_bigram::<f64>());
        let est = monte_carlo_termination(&m, 20_000, 1000, 1).unwrap();
        assert!((est.terminated_fraction - 1.0 / 3.0).abs() < 0.02);
        assert_eq!(est.terminated + est.truncated, 20_000);
        // only a-strings terminate, with length ≥ 1
        assert!(!est.length_histogram.contains_key(&0));
    }

    #[test]
    fn softplus_truncation() {
        let m = make_tight_softplus_rnn::<f64>();
        let est = monte_carlo_termination(&m, 20_000, 100, 7).unwrap();
        // P(no EOS in 100 steps) = 1/101
        assert!((est.truncated_fraction - 1.0 / 101.0).abs() < 4.0 * (0.0099f64 / 20_000.0).sqrt());
    }
}
