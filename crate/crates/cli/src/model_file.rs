//! Line-oriented model files.
//!
//! A file starts with `key = value` header lines and continues with
//! bracketed sections. `#` starts a comment. Finite-state models list
//! nonzero weights only:
//!
//! ```text
//! kind = sfssm
//! alphabet = a b
//! states = BOS a b
//!
//! [init]
//! BOS 1
//!
//! [term]
//! a 0.1
//!
//! [trans a]
//! BOS a 1
//! a a 0.7
//! ```
//!
//! RNN files give `activation` in the header and the sections `[h0]`,
//! `[input]` and `[output]` (one `symbol v₁ … vₙ` row per symbol and EOS),
//! `[W]`, `[U]` (matrix rows) and `[b]`. Parity files only need
//! `eos_prob_even`. `kind = builtin` with `name = fig1a` (etc.) expands a
//! builtin example.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::{self, Write as _};

use lmtight_core::zoo::{nontight_bigram, tight_bigram};
use lmtight_core::{
    make_nontight_relu_rnn, make_tight_softplus_rnn, Activation, Alphabet, Error as CoreError, Matrix, ParityAsm64,
    RnnAsm, RnnAsm64, Sfssm, Sfssm64, Vector,
};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Even-step EOS probability used when a parity file omits it.
pub const DEFAULT_EOS_PROB_EVEN: f64 = 0.1;

pub const BUILTIN_PREFIX: &str = "builtin:";
pub const BUILTINS: [&str; 5] = ["fig1a", "fig1b", "relu-rnn", "softplus-rnn", "parity"];

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Sfssm(Sfssm64),
    Rnn(RnnAsm64),
    Parity(ParityAsm64),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Sfssm(_) => "sfssm",
            Model::Rnn(_) => "rnn",
            Model::Parity(_) => "parity",
        }
    }

    pub fn alphabet(&self) -> &Alphabet {
        use lmtight_core::Asm;
        match self {
            Model::Sfssm(m) => m.alphabet(),
            Model::Rnn(m) => m.alphabet(),
            Model::Parity(m) => m.alphabet(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub name: Option<String>,
    pub model: Model,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// A token with its 1-based position.
#[derive(Debug, Clone, Copy)]
struct Tok<'a> {
    line: usize,
    column: usize,
    text: &'a str,
}

impl Tok<'_> {
    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError { line: self.line, column: self.column, message: message.into() }
    }

    fn number(&self) -> Result<f64, ParseError> {
        match self.text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.error(format!("expected a number, found `{}`", self.text))),
        }
    }

    fn weight(&self) -> Result<f64, ParseError> {
        let v = self.number()?;
        if v < 0.0 {
            return Err(self.error(format!("weights must be nonnegative, found {v}")));
        }
        Ok(v)
    }
}

fn tokenize(line: &str, number: usize) -> Vec<Tok<'_>> {
    let content = line.split('#').next().unwrap_or("");
    let mut toks = Vec::new();
    let mut start = None;
    for (i, c) in content.char_indices().chain(std::iter::once((content.len(), ' '))) {
        match (c.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                let column = content[..s].chars().count() + 1;
                toks.push(Tok { line: number, column, text: &content[s..i] });
                start = None;
            }
            _ => {}
        }
    }
    toks
}

struct Header<'a> {
    key: Tok<'a>,
    values: Vec<Tok<'a>>,
}

struct Section<'a> {
    head: Tok<'a>,
    args: Vec<Tok<'a>>,
    rows: Vec<Vec<Tok<'a>>>,
}

struct Document<'a> {
    headers: BTreeMap<&'a str, Header<'a>>,
    sections: Vec<Section<'a>>,
    end: Tok<'a>,
}

fn split_document(text: &str) -> Result<Document<'_>, ParseError> {
    let mut headers: BTreeMap<&str, Header> = BTreeMap::new();
    let mut sections: Vec<Section> = Vec::new();
    let mut last_line = 1;
    for (i, line) in text.lines().enumerate() {
        let number = i + 1;
        last_line = number;
        let toks = tokenize(line, number);
        let Some(first) = toks.first().copied() else { continue };
        if first.text.starts_with('[') {
            let inner = line.split('#').next().unwrap_or("").trim();
            let Some(body) = inner.strip_prefix('[').and_then(|s| s.strip_suffix(']')) else {
                return Err(first.error("section header must look like `[name]`"));
            };
            let mut parts = tokenize(body, number);
            // shift columns past the opening bracket
            let offset = first.column;
            parts.iter_mut().for_each(|t| t.column += offset);
            if parts.is_empty() {
                return Err(first.error("empty section name"));
            }
            let head = parts.remove(0);
            sections.push(Section { head, args: parts, rows: Vec::new() });
        } else if let Some(section) = sections.last_mut() {
            section.rows.push(toks);
        } else {
            if toks.len() < 2 || toks[1].text != "=" {
                return Err(first.error("expected `key = value` before the first section"));
            }
            let header = Header { key: first, values: toks[2..].to_vec() };
            if headers.insert(first.text, header).is_some() {
                return Err(first.error(format!("duplicate header `{}`", first.text)));
            }
        }
    }
    let end = Tok { line: last_line, column: 1, text: "" };
    Ok(Document { headers, sections, end })
}

impl<'a> Document<'a> {
    fn header(&self, key: &str) -> Result<&Header<'a>, ParseError> {
        self.headers.get(key).ok_or_else(|| self.end.error(format!("missing header `{key} = …`")))
    }

    fn single(&self, key: &str) -> Result<Option<Tok<'a>>, ParseError> {
        match self.headers.get(key) {
            None => Ok(None),
            Some(h) if h.values.len() == 1 => Ok(Some(h.values[0])),
            Some(h) => Err(h.key.error(format!("`{key}` takes exactly one value"))),
        }
    }

    fn check_headers(&self, allowed: &[&str]) -> Result<(), ParseError> {
        match self.headers.values().find(|h| !allowed.contains(&h.key.text)) {
            Some(h) => Err(h.key.error(format!("unknown header `{}` for this kind", h.key.text))),
            None => Ok(()),
        }
    }

    fn check_sections(&self, allowed: &[&str]) -> Result<(), ParseError> {
        let mut seen = HashSet::new();
        for s in &self.sections {
            if !allowed.contains(&s.head.text) {
                return Err(s.head.error(format!("unknown section `[{}]` for this kind", s.head.text)));
            }
            let key = std::iter::once(s.head.text).chain(s.args.iter().map(|t| t.text)).collect::<Vec<_>>().join(" ");
            if !seen.insert(key.clone()) {
                return Err(s.head.error(format!("duplicate section `[{key}]`")));
            }
        }
        Ok(())
    }

    fn section(&self, name: &str) -> Option<&Section<'a>> {
        self.sections.iter().find(|s| s.head.text == name)
    }

    fn alphabet(&self) -> Result<Alphabet, ParseError> {
        let h = self.header("alphabet")?;
        let eos = self.single("eos")?;
        let names: Vec<&str> = h.values.iter().map(|t| t.text).collect();
        let built = match eos {
            Some(e) => Alphabet::with_eos(names, e.text),
            None => Alphabet::new(names),
        };
        built.map_err(|e| h.key.error(e.to_string()))
    }

    fn name(&self) -> Option<String> {
        self.headers.get("name").map(|h| h.values.iter().map(|t| t.text).collect::<Vec<_>>().join(" "))
    }
}

pub fn parse_model(text: &str) -> Result<ModelFile, ParseError> {
    let doc = split_document(text)?;
    let kind = doc.single("kind")?.ok_or_else(|| doc.end.error("missing header `kind = …`"))?;
    match kind.text {
        "sfssm" => Ok(ModelFile { name: doc.name(), model: Model::Sfssm(parse_sfssm(&doc)?) }),
        "rnn" => Ok(ModelFile { name: doc.name(), model: Model::Rnn(parse_rnn(&doc)?) }),
        "parity" => {
            doc.check_headers(&["kind", "name", "alphabet", "eos", "eos_prob_even"])?;
            doc.check_sections(&[])?;
            let alphabet = doc.alphabet()?;
            let p = match doc.single("eos_prob_even")? {
                Some(t) => (t, t.number()?),
                None => (kind, DEFAULT_EOS_PROB_EVEN),
            };
            let m = ParityAsm64::with_alphabet(alphabet, p.1).map_err(|e| p.0.error(e.to_string()))?;
            Ok(ModelFile { name: doc.name(), model: Model::Parity(m) })
        }
        "builtin" => {
            doc.check_headers(&["kind", "name"])?;
            doc.check_sections(&[])?;
            let name = doc.single("name")?.ok_or_else(|| kind.error("builtin models need `name = …`"))?;
            builtin(name.text).ok_or_else(|| {
                name.error(format!("unknown builtin `{}`; expected one of {}", name.text, BUILTINS.join(", ")))
            })
        }
        other => Err(kind.error(format!("unknown kind `{other}`; expected sfssm, rnn, parity or builtin"))),
    }
}

fn parse_sfssm(doc: &Document) -> Result<Sfssm64, ParseError> {
    doc.check_headers(&["kind", "name", "alphabet", "eos", "states"])?;
    doc.check_sections(&["init", "term", "trans"])?;
    let alphabet = doc.alphabet()?;
    let states_h = doc.header("states")?;
    let mut index = HashMap::new();
    for (i, t) in states_h.values.iter().enumerate() {
        if index.insert(t.text, i).is_some() {
            return Err(t.error(format!("duplicate state `{}`", t.text)));
        }
    }
    let q = index.len();
    if q == 0 {
        return Err(states_h.key.error("at least one state is required"));
    }
    let state = |t: &Tok| index.get(t.text).copied().ok_or_else(|| t.error(format!("unknown state `{}`", t.text)));

    let mut init = vec![0.0; q];
    let mut term = vec![0.0; q];
    let mut trans = vec![Matrix::zeros(q, q); alphabet.len()];
    for s in &doc.sections {
        let expected_args = usize::from(s.head.text == "trans");
        if s.args.len() != expected_args {
            return Err(s.head.error(match expected_args {
                1 => "expected `[trans <symbol>]`".to_string(),
                _ => format!("`[{}]` takes no arguments", s.head.text),
            }));
        }
        match s.head.text {
            "init" | "term" => {
                let target = if s.head.text == "init" { &mut init } else { &mut term };
                let mut seen = vec![false; q];
                for row in &s.rows {
                    if row.len() != 2 {
                        return Err(row[0].error("expected `state weight`"));
                    }
                    let i = state(&row[0])?;
                    if std::mem::replace(&mut seen[i], true) {
                        return Err(row[0].error(format!("state `{}` listed twice", row[0].text)));
                    }
                    target[i] = row[1].weight()?;
                }
            }
            _ => {
                let sym = s.args[0];
                let a = alphabet.symbol(sym.text).ok_or_else(|| sym.error(format!("unknown symbol `{}`", sym.text)))?;
                let m = &mut trans[a.0];
                let mut seen = vec![false; q * q];
                for row in &s.rows {
                    if row.len() != 3 {
                        return Err(row[0].error("expected `from to weight`"));
                    }
                    let (i, j) = (state(&row[0])?, state(&row[1])?);
                    if std::mem::replace(&mut seen[i * q + j], true) {
                        return Err(row[0].error(format!("edge {} → {} listed twice", row[0].text, row[1].text)));
                    }
                    m[(i, j)] = row[2].weight()?;
                }
            }
        }
    }
    let names = states_h.values.iter().map(|t| t.text.to_string()).collect();
    Sfssm::new(alphabet, names, trans, Vector::from(init), Vector::from(term)).map_err(|e| {
        let at = match &e {
            CoreError::BadRow { state, .. } => states_h.values[*state],
            CoreError::BadInit { .. } => doc.section("init").map_or(states_h.key, |s| s.head),
            _ => states_h.key,
        };
        at.error(e.to_string())
    })
}

fn parse_rnn(doc: &Document) -> Result<RnnAsm64, ParseError> {
    doc.check_headers(&["kind", "name", "alphabet", "eos", "activation", "hidden_dim"])?;
    doc.check_sections(&["h0", "input", "output", "W", "U", "b"])?;
    let alphabet = doc.alphabet()?;
    let act_tok = doc.single("activation")?.ok_or_else(|| doc.end.error("missing header `activation = …`"))?;
    let activation = Activation::parse(act_tok.text).ok_or_else(|| {
        act_tok.error(format!("unknown activation `{}`; expected relu, softplus, tanh or sigmoid", act_tok.text))
    })?;
    let section = |name: &str| doc.section(name).ok_or_else(|| doc.end.error(format!("missing section `[{name}]`")));
    let numbers = |row: &[Tok]| row.iter().map(Tok::number).collect::<Result<Vec<f64>, _>>();
    let one_row = |name: &str| -> Result<(Tok, Vec<f64>), ParseError> {
        let s = section(name)?;
        match s.rows.as_slice() {
            [row] => Ok((s.head, numbers(row)?)),
            _ => Err(s.head.error(format!("`[{name}]` needs exactly one row"))),
        }
    };
    let matrix = |name: &str| -> Result<(Tok, Matrix<f64>), ParseError> {
        let s = section(name)?;
        let rows = s.rows.iter().map(|r| numbers(r)).collect::<Result<Vec<_>, _>>()?;
        if rows.is_empty() {
            return Err(s.head.error(format!("`[{name}]` is empty")));
        }
        if let Some(r) = s.rows.iter().find(|r| r.len() != rows[0].len()) {
            return Err(r[0].error("rows have different lengths"));
        }
        Matrix::from_rows(&rows).map(|m| (s.head, m)).map_err(|e| s.head.error(e.to_string()))
    };
    let table = |name: &str| -> Result<Vec<Vector<f64>>, ParseError> {
        let s = section(name)?;
        let mut rows: Vec<Option<Vector<f64>>> = vec![None; alphabet.len() + 1];
        for row in &s.rows {
            let i = if row[0].text == alphabet.eos() {
                alphabet.eos_index()
            } else {
                alphabet.symbol(row[0].text).ok_or_else(|| row[0].error(format!("unknown symbol `{}`", row[0].text)))?.0
            };
            if rows[i].is_some() {
                return Err(row[0].error(format!("`{}` listed twice", row[0].text)));
            }
            rows[i] = Some(Vector::from(numbers(&row[1..])?));
        }
        rows.into_iter()
            .enumerate()
            .map(|(i, r)| {
                let who = if i == alphabet.len() { alphabet.eos() } else { &alphabet.names()[i] };
                r.ok_or_else(|| s.head.error(format!("missing row for `{who}`")))
            })
            .collect()
    };

    let (h0_tok, h0) = one_row("h0")?;
    if let Some(t) = doc.single("hidden_dim")? {
        if t.text.parse::<usize>().ok() != Some(h0.len()) {
            return Err(t.error(format!("hidden_dim {} does not match the {} entries of [h0]", t.text, h0.len())));
        }
    }
    let input = table("input")?;
    let output = table("output")?;
    let (_, w) = matrix("W")?;
    let (_, u) = matrix("U")?;
    let (_, b) = one_row("b")?;
    RnnAsm::new(alphabet, input, output, w, u, Vector::from(b), activation, Vector::from(h0))
        .map_err(|e| h0_tok.error(e.to_string()))
}

fn join<T: fmt::Display>(xs: impl IntoIterator<Item = T>) -> String {
    xs.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

/// Canonical text of a model. Numbers use the shortest decimal form that
/// reads back to the same value, so `parse_model(write_model(m)) == m`.
pub fn write_model(file: &ModelFile) -> String {
    let mut out = String::new();
    let model = &file.model;
    let alphabet = model.alphabet();
    writeln!(out, "kind = {}", model.kind()).unwrap();
    if let Some(name) = &file.name {
        writeln!(out, "name = {name}").unwrap();
    }
    writeln!(out, "alphabet = {}", join(alphabet.names())).unwrap();
    writeln!(out, "eos = {}", alphabet.eos()).unwrap();
    match model {
        Model::Sfssm(m) => {
            let names = m.state_names();
            writeln!(out, "states = {}", join(names)).unwrap();
            for (title, v) in [("init", m.init()), ("term", m.term())] {
                writeln!(out, "\n[{title}]").unwrap();
                for (i, &x) in v.iter().enumerate().filter(|(_, &x)| x != 0.0) {
                    writeln!(out, "{} {x}", names[i]).unwrap();
                }
            }
            for (a, p) in m.transitions().iter().enumerate() {
                writeln!(out, "\n[trans {}]", alphabet.names()[a]).unwrap();
                for i in 0..p.rows() {
                    for j in (0..p.cols()).filter(|&j| p[(i, j)] != 0.0) {
                        writeln!(out, "{} {} {}", names[i], names[j], p[(i, j)]).unwrap();
                    }
                }
            }
        }
        Model::Rnn(m) => {
            writeln!(out, "activation = {}", m.activation().name()).unwrap();
            writeln!(out, "hidden_dim = {}", m.hidden_dim()).unwrap();
            writeln!(out, "\n[h0]\n{}", join(m.initial_hidden().iter())).unwrap();
            for (title, table) in [("input", m.input_embeddings()), ("output", m.output_embeddings())] {
                writeln!(out, "\n[{title}]").unwrap();
                for (i, v) in table.iter().enumerate() {
                    let who = if i == alphabet.len() { alphabet.eos() } else { &alphabet.names()[i] };
                    writeln!(out, "{who} {}", join(v.iter())).unwrap();
                }
            }
            for (title, mat) in [("W", m.input_weights()), ("U", m.recurrent_weights())] {
                writeln!(out, "\n[{title}]").unwrap();
                for i in 0..mat.rows() {
                    writeln!(out, "{}", join(mat.row(i))).unwrap();
                }
            }
            writeln!(out, "\n[b]\n{}", join(m.bias().iter())).unwrap();
        }
        Model::Parity(m) => {
            writeln!(out, "eos_prob_even = {}", m.eos_prob_even()).unwrap();
        }
    }
    out
}

/// Hex SHA-256 of the canonical text.
pub fn digest(canonical: &str) -> String {
    Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn builtin(name: &str) -> Option<ModelFile> {
    let model = match name {
        "fig1a" => Model::Sfssm(nontight_bigram()),
        "fig1b" => Model::Sfssm(tight_bigram()),
        "relu-rnn" => Model::Rnn(make_nontight_relu_rnn()),
        "softplus-rnn" => Model::Rnn(make_tight_softplus_rnn()),
        "parity" => Model::Parity(lmtight_core::make_parity_asm(DEFAULT_EOS_PROB_EVEN).ok()?),
        _ => return None,
    };
    Some(ModelFile { name: Some(name.to_string()), model })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG1A: &str = "\
kind = sfssm   # the non-tight bigram
alphabet = a b
states = BOS a b

[init]
BOS 1

[term]
a 0.1

[trans a]
BOS a 1
a a 0.7

[trans b]
a b 0.2
b b 1
";

    #[test]
    fn parses_bigram() {
        let f = parse_model(FIG1A).unwrap();
        let Model::Sfssm(m) = &f.model else { panic!() };
        assert_eq!(m, &nontight_bigram::<f64>());
        assert_eq!(f.name, None);
    }

    #[test]
    fn builtins_round_trip() {
        for name in BUILTINS {
            let f = builtin(name).unwrap();
            let text = write_model(&f);
            assert_eq!(parse_model(&text).unwrap(), f, "{name}\n{text}");
            assert_eq!(parse_model(&format!("kind = builtin\nname = {name}\n")).unwrap(), f);
        }
    }

    #[test]
    fn diagnostics_carry_positions() {
        let e = parse_model(&FIG1A.replace("a a 0.7", "a c 0.7")).unwrap_err();
        assert_eq!((e.line, e.column), (13, 3));
        assert!(e.message.contains("unknown state `c`"));

        let e = parse_model(&FIG1A.replace("a a 0.7", "a a 0.6")).unwrap_err();
        assert_eq!((e.line, e.column), (3, 14));
        assert!(e.message.contains("state 1"), "{}", e.message);

        let e = parse_model(&FIG1A.replace("BOS a 1", "BOS a x")).unwrap_err();
        assert_eq!((e.line, e.column), (12, 7));

        let e = parse_model(&FIG1A.replace("[trans b]", "[trans z]")).unwrap_err();
        assert_eq!((e.line, e.column), (15, 8));

        let e = parse_model(&FIG1A.replace("b b 1", "b b -1")).unwrap_err();
        assert!(e.message.contains("nonnegative"));

        let e = parse_model("alphabet = a\n").unwrap_err();
        assert!(e.message.contains("kind"));

        let e = parse_model("kind = rnn\nalphabet = a\nactivation = gelu\n").unwrap_err();
        assert_eq!((e.line, e.column), (3, 14));

        let e = parse_model("kind = parity\nalphabet = a\neos_prob_even = 1\n").unwrap_err();
        assert_eq!((e.line, e.column), (3, 17));
    }

    #[test]
    fn parity_defaults() {
        let f = parse_model("kind = parity\nalphabet = a b\n").unwrap();
        let Model::Parity(m) = f.model else { panic!() };
        assert_eq!(m.eos_prob_even(), DEFAULT_EOS_PROB_EVEN);
        assert_eq!(lmtight_core::Asm::alphabet(&m).len(), 2);
    }

    #[test]
    fn digest_is_stable() {
        let text = write_model(&builtin("fig1a").unwrap());
        assert_eq!(digest(&text), digest(&write_model(&parse_model(&text).unwrap())));
        assert_eq!(digest(&text).len(), 64);
    }
}
