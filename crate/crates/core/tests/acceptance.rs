//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints its PASS/FAIL line, then exits nonzero if any failed.

// `!(a <= b)` is deliberate throughout: NaN must fail.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::process::ExitCode;
use std::time::{Duration, Instant};

use lmtight_core::linalg::{neumann_partial_sum, spectral_radius_estimate, POWER_ITERATIONS};
use lmtight_core::random::{random_corpus, random_sfssm};
use lmtight_core::tightness::{
    certify_tight_lower_bound, certify_tight_lower_bound_checked, monte_carlo_termination, product_sum_duality_check,
    ptilde_eos_enumerate, ptilde_eos_fsa,
};
use lmtight_core::zoo::{nontight_bigram, tight_bigram};
use lmtight_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within_time(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    if took < limit {
        Ok(())
    } else {
        Err(format!("took {took:.2?}, limit {limit:?}"))
    }
}

fn cdf_at<T: Scalar>(series: &PtildeSeries<T>, t: usize) -> T {
    T::one() - series.survival[t - 1]
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let m = nontight_bigram::<f64>();
    let witness = match decide_tight(&m) {
        TightnessVerdict::NonTight { witness: Some(w), .. } => w.name,
        v => return Err(format!("verdict {}", v.label())),
    };
    ensure!(witness == "b", "witness {witness}");
    let z = termination_probability(&trim(&m).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?.value();
    ensure!((z - 1.0 / 3.0).abs() < 1e-9, "termination {z}");
    within_time(start, Duration::from_secs(1))?;
    Ok(format!("NonTight, witness {witness}, termination {z:.12}"))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let m = tight_bigram::<f64>();
    ensure!(decide_tight(&m).is_tight(), "verdict {}", decide_tight(&m).label());
    let z = termination_probability(&trim(&m).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?.value();
    ensure!((z - 1.0).abs() < 1e-9, "termination {z}");
    within_time(start, Duration::from_secs(1))?;
    Ok(format!("Tight, termination {z:.12}"))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    // independent oracle: EOS at step t has probability 1/(e^(t-1) + 1)
    let mut oracle = 0.0;
    let mut survive = 1.0;
    for t in 1..=50 {
        let p = 1.0 / (((t - 1) as f64).exp() + 1.0);
        oracle += survive * p;
        survive *= 1.0 - p;
    }
    ensure!((oracle - 0.702).abs() < 5e-4, "oracle series gives {oracle}");
    let series = ptilde_eos_enumerate(&make_nontight_relu_rnn::<f64>(), 50, 1).map_err(|e| e.to_string())?;
    let cdf = cdf_at(&series, 50);
    ensure!((cdf - oracle).abs() < 1e-12, "CDF(50) = {cdf}, oracle {oracle}");
    ensure!((cdf - 0.702).abs() < 5e-4, "CDF(50) = {cdf}");
    within_time(start, Duration::from_secs(1))?;
    Ok(format!("CDF(50) = {cdf:.7}, oracle {oracle:.7}"))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let m = make_tight_softplus_rnn::<f64>();
    let series = ptilde_eos_enumerate(&m, 1000, 1).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for t in [1usize, 10, 100, 1000] {
        let cdf = cdf_at(&series, t);
        let want = 1.0 - 1.0 / (t as f64 + 1.0);
        ensure!((cdf - want).abs() < 1e-9, "CDF({t}) = {cdf}, expected {want}");
        worst = worst.max((cdf - want).abs());
    }
    let harmonic = EosBoundFamily::Harmonic { c: 1.0, d: 1.0 };
    ensure!(certify_tight_lower_bound(&harmonic).map_err(|e| e.to_string())?.is_tight(), "harmonic bound not Tight");
    let checked = certify_tight_lower_bound_checked(&m, &harmonic, 200, 1).map_err(|e| e.to_string())?;
    ensure!(checked.is_tight(), "checked harmonic bound gave {}", checked.label());
    within_time(start, Duration::from_secs(1))?;
    Ok(format!("CDF matches 1 - 1/(T+1) (max error {worst:.1e}); harmonic bound certifies Tight"))
}

fn random_models() -> Vec<Sfssm64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce);
    (0..200).map(|_| random_sfssm(&mut rng, 5, 3)).collect()
}

fn strings_up_to(alphabet: &Alphabet, max_len: usize) -> Vec<Str> {
    let mut all = vec![Str::empty()];
    let mut layer = vec![Str::empty()];
    for _ in 0..max_len {
        layer = layer.iter().flat_map(|x| alphabet.symbols().map(move |a| x.extended(a))).collect();
        all.extend(layer.iter().cloned());
    }
    all
}

fn criterion_5(models: &[Sfssm64]) -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (i, m) in models.iter().enumerate() {
        let brute: f64 = strings_up_to(m.alphabet(), 6)
            .iter()
            .map(|x| string_probability_fsa(m, x).map(|p| p.value()))
            .sum::<Result<f64>>()
            .map_err(|e| e.to_string())?;
        let neumann = match trim(m) {
            Ok(sub) => {
                sub.init().dot(&neumann_partial_sum(&sub.total_transition(), sub.term(), 6).map_err(|e| e.to_string())?)
            }
            Err(Error::NoUsefulStates) => 0.0,
            Err(e) => return Err(format!("model {i}: {e}")),
        };
        ensure!((brute - neumann).abs() < 1e-9, "model {i}: brute force {brute}, Neumann {neumann}");
        worst = worst.max((brute - neumann).abs());

        let fsa = ptilde_eos_fsa(m, 6);
        let en = ptilde_eos_enumerate(&sfssm_as_asm(m.clone()), 6, u128::MAX).map_err(|e| e.to_string())?;
        ensure!(fsa.values.len() == en.values.len(), "model {i}: series lengths differ");
        for (t, (a, b)) in fsa.values.iter().zip(&en.values).enumerate() {
            ensure!((a - b).abs() < 1e-9, "model {i}, t = {}: {a} vs {b}", t + 1);
            worst = worst.max((a - b).abs());
        }
    }
    within_time(start, Duration::from_secs(30))?;
    Ok(format!("{} models, max discrepancy {worst:.1e}", models.len()))
}

fn criterion_6(models: &[Sfssm64]) -> Outcome {
    let mut tight = 0;
    let mut max_rho: f64 = 0.0;
    for (i, m) in models.iter().enumerate() {
        let verdict = decide_tight(m);
        let z = match trim(m) {
            Ok(sub) => {
                let rho = spectral_radius_estimate(&sub.total_transition(), POWER_ITERATIONS)
                    .map_err(|e| e.to_string())?
                    .estimate;
                ensure!(rho < 1.0, "model {i}: spectral radius estimate {rho}");
                max_rho = max_rho.max(rho);
                termination_probability(&sub).map_err(|e| e.to_string())?.value()
            }
            Err(Error::NoUsefulStates) => 0.0,
            Err(e) => return Err(format!("model {i}: {e}")),
        };
        ensure!(
            verdict.is_tight() == ((z - 1.0).abs() < 1e-9),
            "model {i}: verdict {} but termination {z}",
            verdict.label()
        );
        tight += verdict.is_tight() as usize;
    }
    Ok(format!("{tight} tight / {} non-tight agree; max spectral radius {max_rho:.6}", models.len() - tight))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0de);
    for i in 0..100 {
        let sigma = rng.gen_range(1..=3);
        let n = rng.gen_range(1..=3);
        let alphabet = Alphabet::new((0..sigma).map(|k| format!("w{k}"))).map_err(|e| e.to_string())?;
        let corpus = random_corpus(&mut rng, &alphabet, 20, 8);
        let m: Sfssm64 = mle_ngram(&alphabet, &corpus, n).map_err(|e| e.to_string())?;
        ensure!(decide_tight(&m).is_tight(), "corpus {i} (n = {n}) not Tight");
        let z = termination_probability(&trim(&m).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?.value();
        ensure!((z - 1.0).abs() < 1e-9, "corpus {i} (n = {n}): termination {z}");
    }
    Ok("100 corpora, all Tight with termination 1".into())
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let (samples, max_len) = (100_000, 1000);
    let bigram = monte_carlo_termination(&sfssm_as_asm(nontight_bigram::<f64>()), samples, max_len, 1)
        .map_err(|e| e.to_string())?;
    let exact = 1.0 / 3.0;
    let err_a = (bigram.terminated_fraction - exact).abs();
    ensure!(
        err_a <= 3.0 * bigram.confidence_halfwidth,
        "bigram: {} vs {exact} (halfwidth {})",
        bigram.terminated_fraction,
        bigram.confidence_halfwidth
    );
    let relu = make_nontight_relu_rnn::<f64>();
    let series = ptilde_eos_enumerate(&relu, max_len, 1).map_err(|e| e.to_string())?;
    let target = cdf_at(&series, max_len);
    let rnn = monte_carlo_termination(&relu, samples, max_len, 1).map_err(|e| e.to_string())?;
    let err_b = (rnn.terminated_fraction - target).abs();
    ensure!(
        err_b <= 3.0 * rnn.confidence_halfwidth,
        "relu rnn: {} vs {target} (halfwidth {})",
        rnn.terminated_fraction,
        rnn.confidence_halfwidth
    );
    within_time(start, Duration::from_secs(30))?;
    Ok(format!(
        "bigram {:.4} ± {:.4} (exact {exact:.4}); relu rnn {:.4} ± {:.4} (series {target:.4})",
        bigram.terminated_fraction, bigram.confidence_halfwidth, rnn.terminated_fraction, rnn.confidence_halfwidth
    ))
}

fn criterion_9() -> Outcome {
    let horizon = 10_000;
    let harmonic: Vec<f64> = (1..=horizon).map(|n| 1.0 / (n as f64 + 1.0)).collect();
    let mut previous = 0.0;
    for t in [10, 100, 1000, 10_000] {
        let r = product_sum_duality_check(&harmonic, t).map_err(|e| e.to_string())?;
        let want = 1.0 / (t as f64 + 1.0);
        ensure!((r.partial_product - want).abs() < 1e-9, "harmonic product at {t}: {}", r.partial_product);
        // the sum grows by about ln 10 per decade
        ensure!(r.partial_sum > previous + 2.0, "harmonic sum at {t} is {}, not growing", r.partial_sum);
        previous = r.partial_sum;
    }
    let geometric: Vec<f64> = (1..=60).map(|n| 0.5f64.powi(n)).collect();
    let r = product_sum_duality_check(&geometric, 60).map_err(|e| e.to_string())?;
    ensure!(r.partial_product > 0.28, "geometric product {}", r.partial_product);
    ensure!(r.partial_sum <= 1.0 + 1e-9, "geometric sum {}", r.partial_sum);
    Ok(format!(
        "harmonic sum reaches {previous:.4} at T = {horizon}; geometric product {:.7}, sum {:.12}",
        r.partial_product, r.partial_sum
    ))
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn main() -> ExitCode {
    let models = random_models();
    let criteria: Vec<Criterion<'_>> = vec![
        ("non-tight bigram: NonTight, witness b, termination 1/3", Box::new(criterion_1)),
        ("tight bigram: Tight, termination 1", Box::new(criterion_2)),
        ("ReLU RNN: CDF(50) = 0.702", Box::new(criterion_3)),
        ("softplus RNN: CDF(T) = 1 - 1/(T+1), harmonic certificate", Box::new(criterion_4)),
        ("oracle equivalence on 200 random models", Box::new(|| criterion_5(&models))),
        ("verdict consistency on 200 random models", Box::new(|| criterion_6(&models))),
        ("n-gram MLE is always tight", Box::new(criterion_7)),
        ("Monte Carlo calibration", Box::new(criterion_8)),
        ("product/sum duality", Box::new(criterion_9)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {}: PASS  {name}  [{detail}]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}  [{why}]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
