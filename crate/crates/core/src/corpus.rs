//! Walk corpora and their on-disk format.
//!
//! A corpus file is UTF-8 text. The first line is a header
//! `# strategy=<tag> depth=<d> seed=<s> key=value ... digest=<hex>`, every
//! further line is one walk with TAB-separated tokens. Inside tokens a TAB is
//! written as `\t`, a newline as `\n` and a backslash as `\\`.
//!
//! `digest` covers the body bytes; reading a file whose body no longer
//! matches its digest fails.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::digest;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WalkCorpus {
    pub walks: Vec<Vec<String>>,
    pub strategy: String,
    /// Ordered key-value provenance record.
    pub params: Vec<(String, String)>,
    pub seed: u64,
}

impl WalkCorpus {
    pub fn new(strategy: impl Into<String>, seed: u64) -> Self {
        WalkCorpus {
            walks: Vec::new(),
            strategy: strategy.into(),
            params: Vec::new(),
            seed,
        }
    }

    pub fn len(&self) -> usize {
        self.walks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walks.is_empty()
    }

    pub fn param(&self, key: &str) -> Option<&str> {
        self.params
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn set_param(&mut self, key: impl Into<String>, value: impl ToString) {
        let key = key.into();
        let value = value.to_string();
        match self.params.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.params.push((key, value)),
        }
    }

    /// Same provenance, new walks, with `step` appended to the transform chain.
    pub fn derive(&self, walks: Vec<Vec<String>>, step: &str) -> WalkCorpus {
        let mut out = WalkCorpus {
            walks,
            strategy: self.strategy.clone(),
            params: self.params.clone(),
            seed: self.seed,
        };
        let chain = match self.param("transforms") {
            Some(prev) if !prev.is_empty() => format!("{prev};{step}"),
            _ => step.to_string(),
        };
        out.set_param("transforms", chain);
        out
    }

    pub fn token_count(&self) -> usize {
        self.walks.iter().map(Vec::len).sum()
    }

    fn body(&self) -> Vec<u8> {
        let mut body = Vec::new();
        for walk in &self.walks {
            for (i, tok) in walk.iter().enumerate() {
                if i > 0 {
                    body.push(b'\t');
                }
                escape_into(tok, &mut body);
            }
            body.push(b'\n');
        }
        body
    }

    /// Digest of the serialized walks (header excluded).
    pub fn digest(&self) -> String {
        digest::short(&self.body())
    }

    pub fn write<W: Write>(&self, mut sink: W) -> Result<()> {
        let body = self.body();
        let mut header = format!("# strategy={}", escape_header(&self.strategy));
        if let Some(depth) = self.param("depth") {
            header.push_str(&format!(" depth={}", escape_header(depth)));
        }
        header.push_str(&format!(" seed={}", self.seed));
        for (k, v) in &self.params {
            if k != "depth" {
                header.push_str(&format!(" {}={}", escape_header(k), escape_header(v)));
            }
        }
        header.push_str(&format!(" digest={}", digest::short(&body)));
        writeln!(sink, "{header}")?;
        sink.write_all(&body)?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn read<R: Read>(source: R) -> Result<WalkCorpus> {
        let mut reader = BufReader::new(source);
        let mut header = String::new();
        reader.read_line(&mut header)?;
        let header = header.trim_end_matches(['\n', '\r']);
        let fields = header
            .strip_prefix("# ")
            .ok_or_else(|| Error::parse(1, "missing corpus header", header))?;
        let mut corpus = WalkCorpus::default();
        let mut expected_digest = None;
        for field in fields.split(' ').filter(|f| !f.is_empty()) {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| Error::parse(1, "expected key=value", field))?;
            let v = unescape_header(v).ok_or_else(|| Error::parse(1, "bad escape", field))?;
            match k {
                "strategy" => corpus.strategy = v,
                "seed" => {
                    corpus.seed = v
                        .parse()
                        .map_err(|_| Error::parse(1, "invalid seed", field))?
                }
                "digest" => expected_digest = Some(v),
                _ => {
                    let k = unescape_header(k).ok_or_else(|| Error::parse(1, "bad escape", field))?;
                    corpus.params.push((k, v));
                }
            }
        }
        let mut body = Vec::new();
        reader.read_to_end(&mut body)?;
        if let Some(expected) = expected_digest {
            let actual = digest::short(&body);
            if actual != expected {
                return Err(Error::Integrity(format!(
                    "corpus body digest {actual} does not match header digest {expected}"
                )));
            }
        }
        let text = String::from_utf8(body)
            .map_err(|_| Error::parse(2, "invalid UTF-8 in corpus body", ""))?;
        for (i, line) in text.lines().enumerate() {
            let walk = line
                .split('\t')
                .map(|t| unescape_token(t).ok_or_else(|| Error::parse(i + 2, "bad escape", t)))
                .collect::<Result<Vec<_>>>()?;
            if walk.iter().all(String::is_empty) {
                return Err(Error::parse(i + 2, "empty walk", line));
            }
            corpus.walks.push(walk);
        }
        Ok(corpus)
    }

    pub fn load(path: &Path) -> Result<WalkCorpus> {
        WalkCorpus::read(fs::File::open(path)?)
    }
}

fn escape_into(tok: &str, out: &mut Vec<u8>) {
    for b in tok.bytes() {
        match b {
            b'\t' => out.extend_from_slice(b"\\t"),
            b'\n' => out.extend_from_slice(b"\\n"),
            b'\\' => out.extend_from_slice(b"\\\\"),
            b => out.push(b),
        }
    }
}

pub fn escape_token(tok: &str) -> String {
    let mut out = Vec::with_capacity(tok.len());
    escape_into(tok, &mut out);
    String::from_utf8(out).expect("escaping preserves UTF-8")
}

pub fn unescape_token(s: &str) -> Option<String> {
    if !s.contains('\\') {
        return Some(s.to_string());
    }
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next()? {
                't' => out.push('\t'),
                'n' => out.push('\n'),
                '\\' => out.push('\\'),
                _ => return None,
            }
        } else {
            out.push(c);
        }
    }
    Some(out)
}

// header values additionally escape space as `\s` and `=` as `\e`
fn escape_header(s: &str) -> String {
    escape_token(s).replace(' ', "\\s").replace('=', "\\e")
}

fn unescape_header(s: &str) -> Option<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next()? {
                't' => out.push('\t'),
                'n' => out.push('\n'),
                's' => out.push(' '),
                'e' => out.push('='),
                '\\' => out.push('\\'),
                _ => return None,
            }
        } else {
            out.push(c);
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> WalkCorpus {
        let mut c = WalkCorpus::new("random", 42);
        c.set_param("depth", 4);
        c.set_param("note", "a b=c");
        c.walks = vec![
            vec!["A".into(), "p".into(), "B".into()],
            vec!["x\ty".into(), "line\nbreak".into(), "back\\slash".into()],
        ];
        c
    }

    #[test]
    fn header_layout() {
        let mut buf = Vec::new();
        sample().write(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        assert!(header.starts_with("# strategy=random depth=4 seed=42 note=a\\sb\\ec digest="));
        assert_eq!(text.lines().nth(1).unwrap(), "A\tp\tB");
        assert_eq!(text.lines().nth(2).unwrap(), "x\\ty\tline\\nbreak\tback\\\\slash");
    }

    #[test]
    fn round_trip() {
        let c = sample();
        let mut buf = Vec::new();
        c.write(&mut buf).unwrap();
        assert_eq!(WalkCorpus::read(buf.as_slice()).unwrap(), c);
    }

    #[test]
    fn tampered_body_is_rejected() {
        let mut buf = Vec::new();
        sample().write(&mut buf).unwrap();
        let mut text = String::from_utf8(buf).unwrap();
        text = text.replace("A\tp\tB", "A\tp\tC");
        let err = WalkCorpus::read(text.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Integrity(_)));
    }

    #[test]
    fn empty_corpus_round_trips() {
        let c = WalkCorpus::new("anonymous", 1);
        let mut buf = Vec::new();
        c.write(&mut buf).unwrap();
        assert_eq!(WalkCorpus::read(buf.as_slice()).unwrap(), c);
    }

    #[test]
    fn missing_header_is_error() {
        assert!(WalkCorpus::read("A\tB\n".as_bytes()).is_err());
    }

    #[test]
    fn derive_extends_transform_chain() {
        let c = sample();
        let d = c.derive(vec![], "anonymous");
        let e = d.derive(vec![], "halk(thresholds=0.1)");
        assert_eq!(e.param("transforms"), Some("anonymous;halk(thresholds=0.1)"));
        assert_eq!(e.param("depth"), Some("4"));
    }

    proptest! {
        #[test]
        fn token_escaping_round_trips(s in ".*") {
            prop_assert_eq!(unescape_token(&escape_token(&s)), Some(s.clone()));
            prop_assert_eq!(unescape_header(&escape_header(&s)), Some(s));
        }
    }
}
