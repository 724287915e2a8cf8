use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use lmtight_core::linalg::{spectral_radius_estimate, POWER_ITERATIONS};
use lmtight_core::tightness::{
    assess_series, certify_nontight_upper_bound, certify_tight_lower_bound, certify_tight_lower_bound_checked,
    monte_carlo_termination, ptilde_eos_enumerate, ptilde_eos_fsa, rnn_hidden_norm_sup, rnn_log_norm_test,
    rnn_uniform_eos_floor, termination_cdf,
};
use lmtight_core::{
    decide_tight, mle_ngram, prefix_probability, prefix_probability_fsa, string_probability, string_probability_fsa,
    termination_probability, trim, Alphabet, Asm, EosBoundFamily, Error as CoreError, McEstimate, RnnAsm64, Series64,
    Str, Verdict64,
};
use serde::Serialize;

use crate::error::CliError;
use crate::model_file::{builtin, digest, parse_model, write_model, Model, ModelFile, ParseError, BUILTIN_PREFIX};

/// A parsed model together with where it came from.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub source: String,
    pub file: ModelFile,
    pub digest: String,
}

/// Reads `builtin:<name>` or a model file.
pub fn load_model(source: &str) -> Result<Loaded, CliError> {
    let file = match source.strip_prefix(BUILTIN_PREFIX) {
        Some(name) => builtin(name).ok_or_else(|| {
            CliError::Usage(format!(
                "unknown builtin `{name}`; expected one of {}",
                crate::model_file::BUILTINS.join(", ")
            ))
        })?,
        None => {
            let text = read(source)?;
            parse_model(&text).map_err(|e| CliError::Parse { path: source.to_string(), source: e })?
        }
    };
    let digest = digest(&write_model(&file));
    Ok(Loaded { source: source.to_string(), file, digest })
}

fn read(path: &str) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_string(), source: e })
}

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub horizon: usize,
    pub budget: u128,
    pub bound: Option<EosBoundFamily<f64>>,
    pub upper_bound: Option<EosBoundFamily<f64>>,
    pub samples: usize,
    pub max_len: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelInfo {
    pub source: String,
    pub kind: &'static str,
    pub name: Option<String>,
    pub symbols: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesPreview {
    pub horizon: usize,
    pub ptilde_eos: Vec<f64>,
    pub cdf: Vec<f64>,
    pub hit_one_at: Option<usize>,
    pub exhausted_at: Option<usize>,
}

impl SeriesPreview {
    fn new(series: &Series64, horizon: usize) -> Self {
        Self {
            horizon,
            ptilde_eos: series.values.clone(),
            cdf: termination_cdf(series).iter().map(|p| p.value()).collect(),
            hit_one_at: series.hit_one_at,
            exhausted_at: series.exhausted_at,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub digest: String,
    pub seed: Option<u64>,
    pub horizon: usize,
    pub budget: Option<u128>,
    pub samples: Option<usize>,
    pub max_len: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub model: ModelInfo,
    pub verdict: Verdict64,
    pub termination_probability: Option<f64>,
    pub leaked_mass: Option<f64>,
    pub spectral_radius: Option<f64>,
    pub series_preview: SeriesPreview,
    pub monte_carlo: Option<McEstimate>,
    pub notes: Vec<String>,
    pub provenance: Provenance,
}

fn model_info(loaded: &Loaded) -> ModelInfo {
    ModelInfo {
        source: loaded.source.clone(),
        kind: loaded.file.model.kind(),
        name: loaded.file.name.clone(),
        symbols: loaded.file.model.alphabet().len(),
    }
}

fn with_guidance(e: CoreError) -> CliError {
    match e {
        CoreError::BudgetExceeded { needed, budget } => CliError::Budget { needed, budget },
        e => CliError::Core(e),
    }
}

pub fn analyze(loaded: &Loaded, opts: &AnalyzeOptions) -> Result<Report, CliError> {
    match &loaded.file.model {
        Model::Sfssm(m) => {
            let verdict = decide_tight(m);
            let (z, rho) = match trim(m) {
                Ok(sub) => {
                    let z = termination_probability(&sub)?.value();
                    let rho = spectral_radius_estimate(&sub.total_transition(), POWER_ITERATIONS)?.estimate;
                    (z, Some(rho))
                }
                Err(CoreError::NoUsefulStates) => (0.0, None),
                Err(e) => return Err(e.into()),
            };
            let series = ptilde_eos_fsa(m, opts.horizon);
            let mut notes = Vec::new();
            if opts.bound.is_some() || opts.upper_bound.is_some() {
                notes.push("bound families are not needed for finite-state models and were ignored".into());
            }
            Ok(Report {
                model: model_info(loaded),
                verdict,
                termination_probability: Some(z),
                leaked_mass: Some(1.0 - z),
                spectral_radius: rho,
                series_preview: SeriesPreview::new(&series, opts.horizon),
                monte_carlo: None,
                notes,
                provenance: Provenance {
                    digest: loaded.digest.clone(),
                    seed: None,
                    horizon: opts.horizon,
                    budget: None,
                    samples: None,
                    max_len: None,
                },
            })
        }
        Model::Rnn(m) => analyze_asm(loaded, m, Some(m), opts),
        Model::Parity(m) => analyze_asm(loaded, m, None, opts),
    }
}

fn analyze_asm<A: Asm<f64> + Sync>(
    loaded: &Loaded,
    asm: &A,
    rnn: Option<&RnnAsm64>,
    opts: &AnalyzeOptions,
) -> Result<Report, CliError> {
    let series = ptilde_eos_enumerate(asm, opts.horizon, opts.budget).map_err(with_guidance)?;
    let mut notes = Vec::new();
    let mut verdict = assess_series(&series);

    if let (false, Some(bound)) = (verdict.is_tight(), &opts.bound) {
        match certify_tight_lower_bound_checked(asm, bound, opts.horizon, opts.budget) {
            Ok(v) if v.is_tight() => verdict = v,
            Ok(_) => notes.push("the lower-bound family cannot certify tightness".into()),
            Err(e @ CoreError::BoundViolated { .. }) => notes.push(format!("--bound rejected: {e}")),
            Err(e) => return Err(with_guidance(e)),
        }
    }

    if let Some(epsilon) = rnn.filter(|_| !verdict.is_tight()).and_then(rnn_uniform_eos_floor) {
        verdict = certify_tight_lower_bound(&EosBoundFamily::Constant { epsilon })?;
    }

    if let (false, Some(m)) = (verdict.is_tight(), rnn) {
        match rnn_hidden_norm_sup(m, opts.horizon, opts.budget) {
            Ok(norms) => {
                let from = opts.horizon.div_ceil(2);
                match rnn_log_norm_test(m.output_gap(), &norms, from)? {
                    v if v.is_tight() => verdict = v,
                    _ => notes.push(format!(
                        "log-norm test inconclusive: k·‖h_t‖ exceeds log t for some t in {from}..={}",
                        opts.horizon
                    )),
                }
            }
            Err(CoreError::BudgetExceeded { .. }) => {
                notes.push("log-norm test skipped: hidden-state enumeration exceeds the budget".into())
            }
            Err(e) => return Err(e.into()),
        }
    }

    if let (false, Some(upper)) = (verdict.is_tight(), &opts.upper_bound) {
        match certify_nontight_upper_bound(&series, upper) {
            Ok(v) if v.is_non_tight() => verdict = v,
            Ok(_) => notes.push("the upper-bound family leaves too much tail mass to certify non-tightness".into()),
            Err(e @ CoreError::BoundViolated { .. }) => notes.push(format!("--upper-bound rejected: {e}")),
            Err(e) => return Err(e.into()),
        }
    }

    if !verdict.is_tight() && !verdict.is_non_tight() && opts.upper_bound.is_none() {
        if let Some(hint) = upper_bound_hint(&loaded.source) {
            notes.push(hint.into());
        }
    }

    let mc = monte_carlo_termination(asm, opts.samples, opts.max_len, opts.seed)?;
    Ok(Report {
        model: model_info(loaded),
        verdict,
        termination_probability: None,
        leaked_mass: None,
        spectral_radius: None,
        series_preview: SeriesPreview::new(&series, opts.horizon),
        monte_carlo: Some(mc),
        notes,
        provenance: Provenance {
            digest: loaded.digest.clone(),
            seed: Some(opts.seed),
            horizon: opts.horizon,
            budget: Some(opts.budget),
            samples: Some(opts.samples),
            max_len: Some(opts.max_len),
        },
    })
}

fn upper_bound_hint(source: &str) -> Option<&'static str> {
    (source == "builtin:relu-rnn").then_some(
        "p̃_eos(t) = 1/(e^(t-1)+1) ≤ e·e^(-t); a geometric upper bound certifies NonTight: \
         --upper-bound geometric:2.718281828459045,0.36787944117144233",
    )
}

/// Symbols of `text`: whitespace-separated names, or, when `text` has no
/// whitespace and is not itself a symbol, one symbol per character.
pub fn parse_input_string(alphabet: &Alphabet, text: &str) -> Result<Str, CoreError> {
    let text = text.trim();
    if text.contains(char::is_whitespace) || text.is_empty() || alphabet.symbol(text).is_some() {
        return alphabet.parse(text);
    }
    let chars: Vec<String> = text.chars().map(String::from).collect();
    match chars.iter().find(|c| alphabet.symbol(c).is_none()) {
        Some(_) => Err(CoreError::UnknownSymbol(text.to_string())),
        None => alphabet.string(&chars),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbReport {
    pub source: String,
    pub digest: String,
    pub string: Vec<String>,
    pub string_probability: f64,
    pub prefix_probability: f64,
}

pub fn prob(loaded: &Loaded, text: &str) -> Result<ProbReport, CliError> {
    let alphabet = loaded.file.model.alphabet();
    let x = parse_input_string(alphabet, text)?;
    let (s, p) = match &loaded.file.model {
        Model::Sfssm(m) => (string_probability_fsa(m, &x)?, prefix_probability_fsa(m, &x)?),
        Model::Rnn(m) => (string_probability(m, &x)?, prefix_probability(m, &x)?),
        Model::Parity(m) => (string_probability(m, &x)?, prefix_probability(m, &x)?),
    };
    Ok(ProbReport {
        source: loaded.source.clone(),
        digest: loaded.digest.clone(),
        string: x.iter().map(|&a| alphabet.name(a).to_string()).collect(),
        string_probability: s.value(),
        prefix_probability: p.value(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleReport {
    pub source: String,
    pub digest: String,
    #[serde(flatten)]
    pub estimate: McEstimate,
}

pub fn sample(loaded: &Loaded, samples: usize, max_len: usize, seed: u64) -> Result<SampleReport, CliError> {
    if samples == 0 || max_len == 0 {
        return Err(CliError::Usage("--samples and --max-len must be positive".into()));
    }
    let estimate = match &loaded.file.model {
        Model::Sfssm(m) => monte_carlo_termination(&lmtight_core::sfssm_as_asm(m.clone()), samples, max_len, seed)?,
        Model::Rnn(m) => monte_carlo_termination(m, samples, max_len, seed)?,
        Model::Parity(m) => monte_carlo_termination(m, samples, max_len, seed)?,
    };
    Ok(SampleReport { source: loaded.source.clone(), digest: loaded.digest.clone(), estimate })
}

#[derive(Debug, Clone, Serialize)]
pub struct NgramReport {
    pub corpus: String,
    pub out: String,
    pub n: usize,
    pub strings: usize,
    pub symbols: Vec<String>,
    pub states: usize,
    pub verdict: Verdict64,
    pub digest: String,
}

/// Reads a corpus: one string per line, whitespace-separated symbols. The
/// alphabet is the sorted set of symbols seen.
pub fn read_corpus(path: &str, eos: &str) -> Result<(Alphabet, Vec<Vec<String>>), CliError> {
    let text = read(path)?;
    let mut lines = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let mut tokens = Vec::new();
        for (column, tok) in token_columns(line) {
            if tok == eos {
                return Err(CliError::Parse {
                    path: path.to_string(),
                    source: ParseError {
                        line: i + 1,
                        column,
                        message: format!("`{eos}` is reserved for the end-of-sequence symbol"),
                    },
                });
            }
            tokens.push(tok.to_string());
        }
        lines.push(tokens);
    }
    if lines.is_empty() {
        return Err(CoreError::EmptyCorpus.into());
    }
    let symbols: BTreeSet<&String> = lines.iter().flatten().collect();
    if symbols.is_empty() {
        return Err(CliError::Usage(format!("{path}: the corpus contains no symbols")));
    }
    let alphabet = Alphabet::with_eos(symbols, eos)?;
    Ok((alphabet, lines))
}

fn token_columns(line: &str) -> impl Iterator<Item = (usize, &str)> {
    line.split_whitespace().map(move |tok| {
        let offset = tok.as_ptr() as usize - line.as_ptr() as usize;
        (line[..offset].chars().count() + 1, tok)
    })
}

pub fn estimate_ngram(corpus_path: &str, n: usize, out: &str) -> Result<NgramReport, CliError> {
    if n == 0 {
        return Err(CliError::Usage("-n must be at least 1".into()));
    }
    let (alphabet, lines) = read_corpus(corpus_path, "EOS")?;
    let corpus = lines.iter().map(|l| alphabet.string(l)).collect::<Result<Vec<_>, _>>()?;
    let model = mle_ngram(&alphabet, &corpus, n)?;
    let verdict = decide_tight(&model);
    let states = model.num_states();
    let file = ModelFile { name: Some(format!("{n}-gram")), model: Model::Sfssm(model) };
    let text = write_model(&file);
    std::fs::write(out, &text).map_err(|e| CliError::Io { path: out.to_string(), source: e })?;
    Ok(NgramReport {
        corpus: corpus_path.to_string(),
        out: out.to_string(),
        n,
        strings: corpus.len(),
        symbols: alphabet.names().to_vec(),
        states,
        verdict,
        digest: digest(&text),
    })
}

fn fmt_prob(x: f64) -> String {
    format!("{x:.9}")
}

fn describe_verdict(v: &Verdict64) -> String {
    use lmtight_core::{Certificate, TightnessVerdict};
    match v {
        TightnessVerdict::Tight { certificate } => {
            let why = match certificate {
                Certificate::CoAccessibility => "every accessible state is co-accessible".to_string(),
                Certificate::UniformEosBound { epsilon } => format!("EOS probability is at least {epsilon}"),
                Certificate::DivergentBoundFamily { family } => {
                    format!("EOS lower bound {} has a divergent series", serde_json::to_string(family).unwrap())
                }
                Certificate::EosHitsOne { step } => format!("EOS probability reaches 1 at step {step}"),
                Certificate::SupportExhausted { step } => format!("all prefix mass is spent before step {step}"),
                Certificate::LogNormBound { k, from_step } => {
                    format!("{k}·‖h_t‖ ≤ log t for every checked t ≥ {from_step}")
                }
            };
            format!("Tight ({why})")
        }
        TightnessVerdict::NonTight { witness, leaked_mass } => {
            let mut parts = Vec::new();
            if let Some(w) = witness {
                parts.push(format!("witness state {}", w.name));
            }
            if let (None, Some(l)) = (witness, leaked_mass) {
                parts.push(format!("leaked mass ≥ {}", fmt_prob(*l)));
            }
            format!("NonTight ({})", parts.join(", "))
        }
        TightnessVerdict::Inconclusive { evidence } => format!("Inconclusive ({})", evidence.note),
    }
}

const TEXT_PREVIEW_ROWS: usize = 10;

pub fn render_report(r: &Report) -> String {
    let mut out = String::new();
    let name = r.model.name.as_deref().map(|n| format!(", {n}")).unwrap_or_default();
    writeln!(out, "model: {} ({}{name})", r.model.source, r.model.kind).unwrap();
    writeln!(out, "digest: sha256:{}", r.provenance.digest).unwrap();
    writeln!(out, "verdict: {}", describe_verdict(&r.verdict)).unwrap();
    if let Some(z) = r.termination_probability {
        writeln!(out, "termination probability: {}", fmt_prob(z)).unwrap();
    }
    if let Some(l) = r.leaked_mass {
        writeln!(out, "leaked mass: {}", fmt_prob(l)).unwrap();
    }
    if let Some(rho) = r.spectral_radius {
        writeln!(out, "spectral radius of trimmed transitions: {rho:.6}").unwrap();
    }
    let s = &r.series_preview;
    if let Some(&cdf) = s.cdf.last() {
        writeln!(out, "CDF({}) = {}", s.cdf.len(), fmt_prob(cdf)).unwrap();
    }
    writeln!(out, "{:>6}  {:>12}  {:>12}", "t", "p̃_eos(t)", "CDF(t)").unwrap();
    for (i, (p, c)) in s.ptilde_eos.iter().zip(&s.cdf).take(TEXT_PREVIEW_ROWS).enumerate() {
        writeln!(out, "{:>6}  {p:>12.9}  {c:>12.9}", i + 1).unwrap();
    }
    if s.ptilde_eos.len() > TEXT_PREVIEW_ROWS {
        writeln!(out, "{:>6}  ({} steps in total; --format machine lists all)", "…", s.ptilde_eos.len()).unwrap();
    }
    if let Some(t) = s.exhausted_at {
        writeln!(out, "prefix mass exhausted at step {t}").unwrap();
    }
    if let Some(mc) = &r.monte_carlo {
        writeln!(
            out,
            "monte carlo: terminated {:.4} ± {:.4} ({} samples, max length {}, seed {})",
            mc.terminated_fraction, mc.confidence_halfwidth, mc.samples, mc.max_len, mc.seed
        )
        .unwrap();
    }
    for note in &r.notes {
        writeln!(out, "note: {note}").unwrap();
    }
    out
}

pub fn render_prob(r: &ProbReport) -> String {
    format!(
        "string: {}\nstring probability: {}\nprefix probability: {}\n",
        if r.string.is_empty() { "(empty)".to_string() } else { r.string.join(" ") },
        fmt_prob(r.string_probability),
        fmt_prob(r.prefix_probability)
    )
}

pub fn render_sample(r: &SampleReport) -> String {
    let e = &r.estimate;
    let mut out = String::new();
    writeln!(out, "model: {}", r.source).unwrap();
    writeln!(out, "samples: {} (max length {}, seed {})", e.samples, e.max_len, e.seed).unwrap();
    writeln!(out, "terminated: {:.4} ± {:.4} ({} runs)", e.terminated_fraction, e.confidence_halfwidth, e.terminated)
        .unwrap();
    writeln!(out, "truncated: {:.4} ({} runs)", e.truncated_fraction, e.truncated).unwrap();
    if let Some(mean) = e.mean_length_of_terminated {
        writeln!(out, "mean length of terminated strings: {mean:.3}").unwrap();
    }
    let mut top: Vec<(&usize, &u64)> = e.length_histogram.iter().collect();
    top.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
    if !top.is_empty() {
        let shown: Vec<String> = top.iter().take(5).map(|(len, n)| format!("{len}: {n}")).collect();
        let longest = e.length_histogram.keys().next_back().copied().unwrap_or(0);
        writeln!(out, "most common lengths: {} (longest {longest})", shown.join(", ")).unwrap();
    }
    out
}

pub fn render_ngram(r: &NgramReport) -> String {
    format!(
        "wrote {}-gram model with {} states over {{{}}} from {} strings to {}\nverdict: {}\n",
        r.n,
        r.states,
        r.symbols.join(", "),
        r.strings,
        Path::new(&r.out).display(),
        describe_verdict(&r.verdict)
    )
}
