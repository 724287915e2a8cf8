use lmtight_core::linalg::{neumann_partial_sum, spectral_radius_estimate, POWER_ITERATIONS};
use lmtight_core::random::{random_corpus, random_sfssm};
use lmtight_core::tightness::{monte_carlo_termination, ptilde_eos_enumerate, ptilde_eos_fsa, termination_cdf};
use lmtight_core::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn model(seed: u64, max_states: usize, max_symbols: usize) -> Sfssm64 {
    random_sfssm(&mut ChaCha8Rng::seed_from_u64(seed), max_states, max_symbols)
}

/// Every string over `alphabet` of length at most `max_len`, shortest first.
fn strings_up_to(alphabet: &Alphabet, max_len: usize) -> Vec<Str> {
    let mut all = vec![Str::empty()];
    let mut layer = vec![Str::empty()];
    for _ in 0..max_len {
        layer = layer.iter().flat_map(|x| alphabet.symbols().map(move |a| x.extended(a))).collect();
        all.extend(layer.iter().cloned());
    }
    all
}

fn random_rnn(seed: u64) -> RnnAsm64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.gen_range(1..=3);
    let sigma = rng.gen_range(1..=3);
    let alphabet = Alphabet::new((0..sigma).map(|i| format!("s{i}"))).unwrap();
    let vec = |rng: &mut ChaCha8Rng| Vector::from((0..d).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<f64>>());
    let input = (0..=sigma).map(|_| vec(&mut rng)).collect();
    let output = (0..=sigma).map(|_| vec(&mut rng)).collect();
    let mat = |rng: &mut ChaCha8Rng| {
        Matrix::from_rows(&(0..d).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect::<Vec<_>>())
            .unwrap()
    };
    let w = mat(&mut rng);
    let u = mat(&mut rng);
    let b = vec(&mut rng);
    let h0 = vec(&mut rng);
    let act = [Activation::Relu, Activation::Softplus, Activation::Tanh, Activation::Sigmoid][rng.gen_range(0..4)];
    RnnAsm::new(alphabet, input, output, w, u, b, act, h0).unwrap()
}

fn decomposition_holds<A: Asm<f64>>(asm: &A, max_len: usize) {
    for x in strings_up_to(asm.alphabet(), max_len) {
        let lhs = prefix_probability(asm, &x).unwrap().value();
        let mut rhs = string_probability(asm, &x).unwrap().value();
        for a in asm.alphabet().symbols() {
            let xa = x.extended(a);
            let pa = prefix_probability(asm, &xa).unwrap().value();
            assert!(pa <= lhs + 1e-12);
            rhs += pa;
        }
        assert!((lhs - rhs).abs() < 1e-9, "{lhs} vs {rhs} at {:?}", x.indices());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decomposition_identity_sfssm(seed in any::<u64>()) {
        decomposition_holds(&sfssm_as_asm(model(seed, 5, 3)), 4);
    }

    #[test]
    fn decomposition_identity_rnn(seed in any::<u64>()) {
        let m = random_rnn(seed);
        decomposition_holds(&m, 4);
        for x in strings_up_to(m.alphabet(), 3) {
            validate_conditional(&m, &x, 1e-9).unwrap();
            prop_assert!(m.conditional(&x).unwrap().iter().all(|&p| p > 0.0));
        }
    }

    #[test]
    fn partial_mass_never_exceeds_one(seed in any::<u64>()) {
        let m = model(seed, 5, 3);
        let mut mass = 0.0;
        let mut len = 0;
        for x in strings_up_to(m.alphabet(), 6) {
            if x.len() > len {
                prop_assert!(mass <= 1.0 + 1e-12);
                len = x.len();
            }
            mass += string_probability_fsa(&m, &x).unwrap().value();
        }
        prop_assert!(mass <= 1.0 + 1e-12);
    }

    #[test]
    fn trim_preserves_string_probabilities(seed in any::<u64>()) {
        let m = model(seed, 6, 3);
        if let Ok(sub) = trim(&m) {
            for x in strings_up_to(m.alphabet(), 6) {
                let before = string_probability_fsa(&m, &x).unwrap().value();
                let after = sub.string_probability(&x).unwrap().value();
                prop_assert!((before - after).abs() < 1e-12);
            }
            for (i, &q) in sub.state_map().iter().enumerate() {
                prop_assert!(useful(&m).contains(q));
                let row: f64 = sub.transitions().iter().map(|p| p.row(i).iter().sum::<f64>()).sum();
                prop_assert!(sub.term()[i] + row <= 1.0 + 1e-9);
            }
        } else {
            prop_assert!(useful(&m).is_empty());
        }
    }

    #[test]
    fn verdict_matches_termination_probability(seed in any::<u64>()) {
        let m = model(seed, 6, 3);
        let verdict = decide_tight(&m);
        match trim(&m) {
            Ok(sub) => {
                let z = termination_probability(&sub).unwrap().value();
                prop_assert_eq!(verdict.is_tight(), (z - 1.0).abs() < 1e-9);
                prop_assert!(check_spectral_radius(&sub) < 1.0);
                if let TightnessVerdict::NonTight { leaked_mass, witness } = verdict {
                    prop_assert!(witness.is_some());
                    prop_assert!((leaked_mass.unwrap() - (1.0 - z)).abs() < 1e-12);
                }
            }
            Err(Error::NoUsefulStates) => prop_assert!(verdict.is_non_tight()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }

    #[test]
    fn neumann_oracle(seed in any::<u64>(), len in 0usize..=8) {
        let m = model(seed, 4, 2);
        let Ok(sub) = trim(&m) else { return Ok(()) };
        let brute: f64 = strings_up_to(m.alphabet(), len)
            .iter()
            .map(|x| string_probability_fsa(&m, x).unwrap().value())
            .sum();
        let neumann = sub.init().dot(&neumann_partial_sum(&sub.total_transition(), sub.term(), len).unwrap());
        prop_assert!((brute - neumann).abs() < 1e-9, "{} vs {}", brute, neumann);
    }

    #[test]
    fn mle_ngram_is_tight(seed in any::<u64>(), n in 1usize..=3, sigma in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let alphabet = Alphabet::new((0..sigma).map(|i| format!("w{i}"))).unwrap();
        let corpus = random_corpus(&mut rng, &alphabet, 20, 8);
        let m: Sfssm64 = mle_ngram(&alphabet, &corpus, n).unwrap();
        prop_assert!(decide_tight(&m).is_tight());
        let z = termination_probability(&trim(&m).unwrap()).unwrap().value();
        prop_assert!((z - 1.0).abs() < 1e-9);
    }

    #[test]
    fn engines_agree(seed in any::<u64>(), horizon in 1usize..=8) {
        let m = model(seed, 5, 3);
        let fsa = ptilde_eos_fsa(&m, horizon);
        let en = ptilde_eos_enumerate(&sfssm_as_asm(m), horizon, u128::MAX).unwrap();
        prop_assert_eq!(fsa.values.len(), en.values.len());
        prop_assert_eq!(fsa.exhausted_at, en.exhausted_at);
        for (a, b) in fsa.values.iter().zip(&en.values) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        let cdf = termination_cdf(&fsa);
        for (i, w) in cdf.windows(2).enumerate() {
            prop_assert!(w[0].value() <= w[1].value() + 1e-15);
            prop_assert!((fsa.survival[i + 1] - (1.0 - w[1].value())).abs() < 1e-9);
        }
    }

    #[test]
    fn cdf_converges_to_termination_probability(seed in any::<u64>()) {
        let m = model(seed, 5, 3);
        let Ok(sub) = trim(&m) else { return Ok(()) };
        let rho = spectral_radius_estimate(&sub.total_transition(), POWER_ITERATIONS).unwrap().estimate;
        prop_assume!(rho <= 0.95);
        let z = termination_probability(&sub).unwrap().value();
        let series = ptilde_eos_fsa(&m, 500);
        let cdf = termination_cdf(&series).last().map_or(1.0, |p| p.value());
        prop_assert!((cdf - z).abs() < 1e-6, "cdf {} vs {}", cdf, z);
    }

    #[test]
    fn adapter_conditionals(seed in any::<u64>()) {
        let m = model(seed, 5, 3);
        let asm = sfssm_as_asm(m.clone());
        for x in strings_up_to(m.alphabet(), 4) {
            if prefix_probability_fsa(&m, &x).unwrap().value() == 0.0 {
                let dead = matches!(asm.conditional(&x), Err(Error::DeadPrefix { .. }));
                prop_assert!(dead);
                continue;
            }
            let pure = asm.conditional(&x).unwrap();
            let incremental = asm.next_distribution(&asm.state_after(&x).unwrap()).unwrap();
            prop_assert!((pure.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for (a, b) in pure.iter().zip(&incremental) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            let s = string_probability(&asm, &x).unwrap().value();
            prop_assert!((s - string_probability_fsa(&m, &x).unwrap().value()).abs() < 1e-12);
        }
    }
}

#[test]
fn monte_carlo_within_three_halfwidths() {
    const N: usize = 4000;
    const MAX_LEN: usize = 200;
    for seed in 0..24u64 {
        let m = model(seed, 5, 3);
        // exact probability of EOS within MAX_LEN positions
        let series = ptilde_eos_fsa(&m, MAX_LEN);
        let exact = termination_cdf(&series).last().map_or(1.0, |p| p.value());
        let est = monte_carlo_termination(&sfssm_as_asm(m), N, MAX_LEN, seed).unwrap();
        // the normal half-width collapses to 0 when every run agrees; fall
        // back to the rule-of-three width 3/N
        let tol = 3.0 * est.confidence_halfwidth.max(1.0 / N as f64);
        assert!(
            (est.terminated_fraction - exact).abs() <= tol,
            "seed {seed}: {} vs {exact} (tol {tol})",
            est.terminated_fraction
        );
    }
}

#[test]
fn single_precision_decision_agrees() {
    for seed in 0..50u64 {
        let m64 = model(seed, 5, 3);
        let m32: Sfssm32 = random_sfssm(&mut ChaCha8Rng::seed_from_u64(seed), 5, 3);
        assert_eq!(decide_tight(&m64).is_tight(), decide_tight(&m32).is_tight());
    }
}
