//! RDF ingestion and the triple-expanded graph.
//!
//! Each triple `(s, p, o)` becomes three labelled vertices and two unlabelled
//! edges `s -> p -> o`. Entities and blank nodes are shared between triples;
//! predicate vertices and literal vertices are created fresh per triple, so a
//! walk can never jump from one triple's predicate into another triple's
//! object.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use serde::{Deserialize, Serialize};

use crate::digest;
use crate::{Error, Result};

/// An RDF term as it appears in an N-Triples statement.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Iri(String),
    /// Blank node, identified by its document-scoped name (without `_:`).
    Blank(String),
    /// Literal with its lexical form and the raw `@lang` / `^^<datatype>` suffix
    /// (empty when absent).
    Literal { lexical: String, suffix: String },
}

impl Term {
    pub fn iri(s: impl Into<String>) -> Self {
        Term::Iri(s.into())
    }

    pub fn blank(s: impl Into<String>) -> Self {
        Term::Blank(s.into())
    }

    pub fn literal(s: impl Into<String>) -> Self {
        Term::Literal {
            lexical: s.into(),
            suffix: String::new(),
        }
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Term::Literal { .. })
    }

    /// The value of the labelling function for a vertex created from this term.
    pub fn label(&self) -> String {
        match self {
            Term::Iri(iri) => iri.clone(),
            Term::Blank(name) => format!("_:{name}"),
            Term::Literal { lexical, suffix } => format!("{lexical}{suffix}"),
        }
    }

    fn kind(&self) -> VertexKind {
        match self {
            Term::Iri(_) => VertexKind::Entity,
            Term::Blank(_) => VertexKind::BlankNode,
            Term::Literal { .. } => VertexKind::Literal,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(iri) => write!(f, "<{iri}>"),
            Term::Blank(name) => write!(f, "_:{name}"),
            Term::Literal { lexical, suffix } => {
                f.write_str("\"")?;
                for c in lexical.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\r' => f.write_str("\\r")?,
                        '\t' => f.write_str("\\t")?,
                        c => write!(f, "{c}")?,
                    }
                }
                write!(f, "\"{suffix}")
            }
        }
    }
}

/// A subject-predicate-object statement. The subject is never a literal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Triple {
    subject: Term,
    predicate: String,
    object: Term,
}

impl Triple {
    pub fn new(subject: Term, predicate: impl Into<String>, object: Term) -> Result<Self> {
        if subject.is_literal() {
            return Err(Error::Invalid(format!(
                "literal {subject} cannot be a subject"
            )));
        }
        Ok(Triple {
            subject,
            predicate: predicate.into(),
            object,
        })
    }

    /// Shorthand for an all-IRI triple.
    pub fn iris(s: &str, p: &str, o: &str) -> Self {
        Triple {
            subject: Term::iri(s),
            predicate: p.to_string(),
            object: Term::iri(o),
        }
    }

    pub fn subject(&self) -> &Term {
        &self.subject
    }

    pub fn predicate(&self) -> &str {
        &self.predicate
    }

    pub fn object(&self) -> &Term {
        &self.object
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} <{}> {} .", self.subject, self.predicate, self.object)
    }
}

struct LineParser<'a> {
    text: &'a str,
    pos: usize,
    line: usize,
}

impl<'a> LineParser<'a> {
    fn err(&self, message: &str) -> Error {
        Error::parse(self.line, message, self.text)
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start_matches([' ', '\t']);
        self.pos = self.text.len() - trimmed.len();
    }

    fn eat(&mut self, c: char) -> bool {
        if self.rest().starts_with(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn iri(&mut self) -> Result<String> {
        if !self.eat('<') {
            return Err(self.err("expected IRI"));
        }
        let rest = self.rest();
        let end = rest.find('>').ok_or_else(|| self.err("unterminated IRI"))?;
        let raw = &rest[..end];
        if raw.chars().any(|c| c.is_whitespace() || c == '<') {
            return Err(self.err("invalid character in IRI"));
        }
        let iri = unescape(raw, false).ok_or_else(|| self.err("invalid escape in IRI"))?;
        self.pos += end + 1;
        Ok(iri)
    }

    fn blank(&mut self) -> Result<String> {
        if !self.rest().starts_with("_:") {
            return Err(self.err("expected blank node"));
        }
        self.pos += 2;
        let rest = self.rest();
        let end = rest
            .find(|c: char| c.is_whitespace())
            .unwrap_or(rest.len());
        let mut name = &rest[..end];
        // `_:b1.` is legal: a trailing dot terminates the statement
        if name.ends_with('.') && rest[end..].trim().is_empty() {
            name = &name[..name.len() - 1];
        }
        if name.is_empty() {
            return Err(self.err("empty blank node label"));
        }
        self.pos += name.len();
        Ok(name.to_string())
    }

    fn literal(&mut self) -> Result<Term> {
        self.eat('"');
        let rest = self.rest();
        let mut end = None;
        let mut escaped = false;
        for (i, c) in rest.char_indices() {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                end = Some(i);
                break;
            }
        }
        let end = end.ok_or_else(|| self.err("unterminated literal"))?;
        let lexical =
            unescape(&rest[..end], true).ok_or_else(|| self.err("invalid escape in literal"))?;
        self.pos += end + 1;
        let suffix_start = self.pos;
        if self.eat('@') {
            let rest = self.rest();
            let len = rest
                .find(|c: char| !(c.is_ascii_alphanumeric() || c == '-'))
                .unwrap_or(rest.len());
            if len == 0 {
                return Err(self.err("empty language tag"));
            }
            self.pos += len;
        } else if self.rest().starts_with("^^") {
            self.pos += 2;
            self.iri()?;
        }
        let suffix = self.text[suffix_start..self.pos].to_string();
        Ok(Term::Literal { lexical, suffix })
    }

    fn subject(&mut self) -> Result<Term> {
        match self.rest().chars().next() {
            Some('<') => self.iri().map(Term::Iri),
            Some('_') => self.blank().map(Term::Blank),
            Some('"') => Err(self.err("literal in subject position")),
            _ => Err(self.err("expected subject")),
        }
    }

    fn object(&mut self) -> Result<Term> {
        match self.rest().chars().next() {
            Some('<') => self.iri().map(Term::Iri),
            Some('_') => self.blank().map(Term::Blank),
            Some('"') => self.literal(),
            _ => Err(self.err("expected object")),
        }
    }

    fn statement(&mut self) -> Result<Triple> {
        self.skip_ws();
        let subject = self.subject()?;
        self.skip_ws();
        let predicate = self.iri()?;
        self.skip_ws();
        let object = self.object()?;
        self.skip_ws();
        if !self.eat('.') {
            return Err(self.err("expected '.' at end of statement"));
        }
        self.skip_ws();
        let rest = self.rest();
        if !(rest.is_empty() || rest.starts_with('#')) {
            return Err(self.err("trailing content after '.'"));
        }
        Ok(Triple {
            subject,
            predicate,
            object,
        })
    }
}

fn unescape(raw: &str, string_escapes: bool) -> Option<String> {
    if !raw.contains('\\') {
        return Some(raw.to_string());
    }
    let mut out = String::with_capacity(raw.len());
    let mut chars = raw.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        let e = chars.next()?;
        match e {
            'u' | 'U' => {
                let n = if e == 'u' { 4 } else { 8 };
                let hex: String = chars.by_ref().take(n).collect();
                if hex.len() != n {
                    return None;
                }
                out.push(char::from_u32(u32::from_str_radix(&hex, 16).ok()?)?);
            }
            't' if string_escapes => out.push('\t'),
            'n' if string_escapes => out.push('\n'),
            'r' if string_escapes => out.push('\r'),
            'b' if string_escapes => out.push('\u{8}'),
            'f' if string_escapes => out.push('\u{c}'),
            '"' if string_escapes => out.push('"'),
            '\'' if string_escapes => out.push('\''),
            '\\' if string_escapes => out.push('\\'),
            _ => return None,
        }
    }
    Some(out)
}

/// Parses N-Triples from a reader. Comment lines and blank lines are skipped.
pub fn parse_ntriples<R: Read>(source: R) -> Result<Vec<Triple>> {
    let mut reader = BufReader::new(source);
    let mut triples = Vec::new();
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let text = std::str::from_utf8(&buf).map_err(|_| {
            Error::parse(line_no, "invalid UTF-8", String::from_utf8_lossy(&buf))
        })?;
        let text = text.trim_end_matches(['\n', '\r']);
        let trimmed = text.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parser = LineParser {
            text,
            pos: 0,
            line: line_no,
        };
        triples.push(parser.statement()?);
    }
    Ok(triples)
}

fn open_maybe_gzip(path: &Path) -> Result<Box<dyn Read>> {
    let mut file = File::open(path)?;
    let mut magic = [0u8; 2];
    let n = file.read(&mut magic)?;
    let head = std::io::Cursor::new(magic[..n].to_vec());
    let chained = head.chain(file);
    if n == 2 && magic == [0x1f, 0x8b] {
        Ok(Box::new(MultiGzDecoder::new(chained)))
    } else {
        Ok(Box::new(chained))
    }
}

/// Reads an N-Triples file, transparently decompressing gzip input.
pub fn read_ntriples(path: &Path) -> Result<Vec<Triple>> {
    parse_ntriples(open_maybe_gzip(path)?)
}

pub fn write_ntriples<W: Write>(triples: &[Triple], mut sink: W) -> Result<()> {
    for t in triples {
        writeln!(sink, "{t}")?;
    }
    Ok(())
}

/// Reads a predicate ban list: one IRI per line, angle brackets optional.
pub fn parse_predicate_list<R: Read>(source: R) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for line in BufReader::new(source).lines() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let t = t
            .strip_prefix('<')
            .and_then(|s| s.strip_suffix('>'))
            .unwrap_or(t);
        out.push(t.to_string());
    }
    Ok(out)
}

/// Drops every triple whose predicate is banned, keeping input order.
pub fn remove_leak_triples(triples: Vec<Triple>, banned_predicates: &[String]) -> Vec<Triple> {
    if banned_predicates.is_empty() {
        return triples;
    }
    let banned: HashSet<&str> = banned_predicates.iter().map(String::as_str).collect();
    triples
        .into_iter()
        .filter(|t| !banned.contains(t.predicate.as_str()))
        .collect()
}

/// One paper of a citation network: sparse word weights plus outgoing citations.
#[derive(Debug, Clone, PartialEq)]
pub struct PaperRecord {
    pub id: String,
    pub words: Vec<(String, f64)>,
    pub cites: Vec<String>,
}

/// IRIs used when turning a citation network into triples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureNetworkVocabulary {
    pub paper_prefix: String,
    pub word_prefix: String,
    pub has_word: String,
    pub cites: String,
}

impl Default for FeatureNetworkVocabulary {
    fn default() -> Self {
        FeatureNetworkVocabulary {
            paper_prefix: "http://example.org/paper/".into(),
            word_prefix: "http://example.org/word/".into(),
            has_word: "http://example.org/hasWord".into(),
            cites: "http://example.org/cites".into(),
        }
    }
}

/// Converts papers into `(p, hasWord, w)` for every strictly positive weight
/// and `(p, cites, q)` for every citation.
pub fn ingest_feature_network(
    papers: &[PaperRecord],
    vocab: &FeatureNetworkVocabulary,
) -> Vec<Triple> {
    let paper = |id: &str| Term::Iri(format!("{}{}", vocab.paper_prefix, id));
    let mut out = Vec::new();
    for p in papers {
        for (word, weight) in &p.words {
            if *weight > 0.0 {
                out.push(Triple {
                    subject: paper(&p.id),
                    predicate: vocab.has_word.clone(),
                    object: Term::Iri(format!("{}{}", vocab.word_prefix, word)),
                });
            }
        }
        for cited in &p.cites {
            out.push(Triple {
                subject: paper(&p.id),
                predicate: vocab.cites.clone(),
                object: paper(cited),
            });
        }
    }
    out
}

/// Parses the TAB-separated citation format:
/// `paper_id TAB word:weight,word:weight TAB cited,cited`.
pub fn parse_feature_network<R: Read>(source: R) -> Result<Vec<PaperRecord>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let id = fields.next().unwrap_or("").trim();
        if id.is_empty() {
            return Err(Error::parse(line_no, "missing paper id", line.clone()));
        }
        let mut words = Vec::new();
        for pair in fields.next().unwrap_or("").split(',').filter(|s| !s.is_empty()) {
            let (w, v) = pair
                .rsplit_once(':')
                .ok_or_else(|| Error::parse(line_no, "expected word:weight", pair))?;
            let v: f64 = v
                .parse()
                .map_err(|_| Error::parse(line_no, "invalid weight", pair))?;
            if v.is_nan() || v < 0.0 {
                return Err(Error::parse(line_no, "negative weight", pair));
            }
            words.push((w.to_string(), v));
        }
        let cites = fields
            .next()
            .unwrap_or("")
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect();
        out.push(PaperRecord {
            id: id.to_string(),
            words,
            cites,
        });
    }
    Ok(out)
}

/// Dense vertex identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexId(pub u32);

impl VertexId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VertexKind {
    Entity,
    BlankNode,
    Literal,
    PredicateInstance,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vertex {
    pub label: String,
    pub kind: VertexKind,
}

/// Immutable triple-expanded graph with forward and reverse adjacency.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    vertices: Vec<Vertex>,
    out_edges: Vec<Vec<VertexId>>,
    in_edges: Vec<Vec<VertexId>>,
    label_index: HashMap<(VertexKind, String), VertexId>,
    edge_count: usize,
}

impl KnowledgeGraph {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertex(&self, v: VertexId) -> Result<&Vertex> {
        self.vertices
            .get(v.index())
            .ok_or(Error::UnknownVertex(v.index()))
    }

    pub fn vertices(&self) -> impl Iterator<Item = (VertexId, &Vertex)> {
        self.vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (VertexId(i as u32), v))
    }

    pub fn label(&self, v: VertexId) -> &str {
        &self.vertices[v.index()].label
    }

    pub fn kind(&self, v: VertexId) -> VertexKind {
        self.vertices[v.index()].kind
    }

    pub fn out_neighbours(&self, v: VertexId) -> Result<&[VertexId]> {
        self.out_edges
            .get(v.index())
            .map(Vec::as_slice)
            .ok_or(Error::UnknownVertex(v.index()))
    }

    pub fn in_neighbours(&self, v: VertexId) -> Result<&[VertexId]> {
        self.in_edges
            .get(v.index())
            .map(Vec::as_slice)
            .ok_or(Error::UnknownVertex(v.index()))
    }

    /// Unchecked out-adjacency for hot loops over known-valid ids.
    pub(crate) fn out_slice(&self, v: VertexId) -> &[VertexId] {
        &self.out_edges[v.index()]
    }

    pub(crate) fn in_slice(&self, v: VertexId) -> &[VertexId] {
        &self.in_edges[v.index()]
    }

    /// Looks up an Entity vertex by IRI.
    pub fn entity(&self, iri: &str) -> Option<VertexId> {
        self.label_index
            .get(&(VertexKind::Entity, iri.to_string()))
            .copied()
    }

    pub fn entities(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.vertices()
            .filter(|(_, v)| v.kind == VertexKind::Entity)
            .map(|(id, _)| id)
    }

    pub fn edges(&self) -> impl Iterator<Item = (VertexId, VertexId)> + '_ {
        self.out_edges.iter().enumerate().flat_map(|(u, targets)| {
            targets.iter().map(move |&t| (VertexId(u as u32), t))
        })
    }

    /// Digest over labels, kinds and edges; stable across runs.
    pub fn fingerprint(&self) -> String {
        let mut buf = Vec::new();
        for v in &self.vertices {
            buf.extend_from_slice(format!("{:?}\t{}\n", v.kind, v.label).as_bytes());
        }
        for (u, t) in self.edges() {
            buf.extend_from_slice(format!("{u}>{t}\n").as_bytes());
        }
        digest::short(&buf)
    }
}

/// Incremental construction of a [`KnowledgeGraph`].
///
/// [`GraphBuilder::add_vertex`] never deduplicates, which makes it possible to
/// build graphs that violate the RDF uniqueness assumption on purpose.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    graph: KnowledgeGraph,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_vertex(&mut self, kind: VertexKind, label: impl Into<String>) -> VertexId {
        let id = VertexId(self.graph.vertices.len() as u32);
        let label = label.into();
        if matches!(kind, VertexKind::Entity | VertexKind::BlankNode) {
            self.graph
                .label_index
                .entry((kind, label.clone()))
                .or_insert(id);
        }
        self.graph.vertices.push(Vertex { label, kind });
        self.graph.out_edges.push(Vec::new());
        self.graph.in_edges.push(Vec::new());
        id
    }

    /// Returns the existing vertex with this `(kind, label)` or creates it.
    pub fn shared_vertex(&mut self, kind: VertexKind, label: &str) -> VertexId {
        if let Some(&id) = self.graph.label_index.get(&(kind, label.to_string())) {
            return id;
        }
        self.add_vertex(kind, label)
    }

    pub fn add_edge(&mut self, from: VertexId, to: VertexId) {
        self.graph.out_edges[from.index()].push(to);
        self.graph.in_edges[to.index()].push(from);
        self.graph.edge_count += 1;
    }

    /// Expands one triple into `s -> p -> o`.
    pub fn add_triple(&mut self, t: &Triple) {
        let s = self.shared_vertex(t.subject.kind(), &t.subject.label());
        let p = self.add_vertex(VertexKind::PredicateInstance, t.predicate.clone());
        let o = match &t.object {
            lit @ Term::Literal { .. } => self.add_vertex(VertexKind::Literal, lit.label()),
            other => self.shared_vertex(other.kind(), &other.label()),
        };
        self.add_edge(s, p);
        self.add_edge(p, o);
    }

    pub fn finish(self) -> KnowledgeGraph {
        self.graph
    }
}

/// Builds the expanded graph. Exact duplicate triples are expanded once.
pub fn build_graph(triples: &[Triple]) -> KnowledgeGraph {
    let mut seen = HashSet::with_capacity(triples.len());
    let mut builder = GraphBuilder::new();
    for t in triples {
        if seen.insert(t) {
            builder.add_triple(t);
        }
    }
    builder.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Vec<Triple>> {
        parse_ntriples(s.as_bytes())
    }

    #[test]
    fn parses_iri_triple() {
        let t = parse("<http://a> <http://p> <http://b> .").unwrap();
        assert_eq!(t, vec![Triple::iris("http://a", "http://p", "http://b")]);
    }

    #[test]
    fn parses_blank_and_literal() {
        let t = parse("_:n1 <http://p> \"42\" .").unwrap();
        assert_eq!(t[0].subject(), &Term::blank("n1"));
        assert_eq!(t[0].predicate(), "http://p");
        assert_eq!(t[0].object(), &Term::literal("42"));
    }

    #[test]
    fn literal_suffixes_are_kept() {
        let t = parse(
            "<http://a> <http://p> \"hi\"@en-GB .\n<http://a> <http://p> \"5\"^^<http://x#int> .\n",
        )
        .unwrap();
        assert_eq!(t[0].object().label(), "hi@en-GB");
        assert_eq!(t[1].object().label(), "5^^<http://x#int>");
    }

    #[test]
    fn literal_escapes() {
        let t = parse(r#"<http://a> <http://p> "a \"q\"\tbé" ."#).unwrap();
        assert_eq!(t[0].object(), &Term::literal("a \"q\"\tbé"));
    }

    #[test]
    fn skips_comments_and_blank_lines() {
        let t = parse("# header\n\n<http://a> <http://p> <http://b> . # trailing\n   \n").unwrap();
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn missing_object_is_error_with_line() {
        let err = parse("<http://a> <http://p>").unwrap_err();
        match err {
            Error::Parse { line, text, .. } => {
                assert_eq!(line, 1);
                assert_eq!(text, "<http://a> <http://p>");
            }
            other => panic!("unexpected {other:?}"),
        }
        let err = parse("<http://a> <http://p> <http://b> .\n<http://a> <http://p> <http://b>\n")
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn literal_subject_is_error() {
        let err = parse("\"x\" <http://p> <http://b> .").unwrap_err();
        assert!(err.to_string().contains("literal in subject"));
        assert!(Triple::new(Term::literal("x"), "http://p", Term::iri("b")).is_err());
    }

    #[test]
    fn blank_node_with_attached_dot() {
        let t = parse("<http://a> <http://p> _:b1.").unwrap();
        assert_eq!(t[0].object(), &Term::blank("b1"));
    }

    #[test]
    fn gzip_input_is_detected() {
        use flate2::write::GzEncoder;
        let dir = std::env::temp_dir().join(format!("kgwalk-gz-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("g.nt.gz");
        let mut enc = GzEncoder::new(File::create(&path).unwrap(), flate2::Compression::fast());
        enc.write_all(b"<http://a> <http://p> <http://b> .\n").unwrap();
        enc.finish().unwrap();
        assert_eq!(read_ntriples(&path).unwrap().len(), 1);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn single_triple_expands_to_three_vertices() {
        let g = build_graph(&[Triple::iris("s", "p", "o")]);
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.edge_count(), 2);
        let s = g.entity("s").unwrap();
        let o = g.entity("o").unwrap();
        let p = g.out_neighbours(s).unwrap()[0];
        assert_eq!(g.kind(p), VertexKind::PredicateInstance);
        assert_eq!(g.out_neighbours(p).unwrap(), &[o]);
    }

    #[test]
    fn predicate_vertices_are_per_triple() {
        let g = build_graph(&[Triple::iris("s", "p", "o1"), Triple::iris("s", "p", "o2")]);
        assert_eq!(g.vertex_count(), 5);
        assert_eq!(g.edge_count(), 4);
        assert_eq!(g.out_neighbours(g.entity("s").unwrap()).unwrap().len(), 2);
    }

    #[test]
    fn empty_input_gives_empty_graph() {
        let g = build_graph(&[]);
        assert!(g.is_empty());
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn duplicate_triples_expand_once() {
        let t = Triple::iris("s", "p", "o");
        let g = build_graph(&[t.clone(), t]);
        assert_eq!(g.vertex_count(), 3);
    }

    #[test]
    fn neighbours_on_chain_and_diamond() {
        let g = build_graph(&[Triple::iris("A", "p", "B")]);
        let a = g.entity("A").unwrap();
        let b = g.entity("B").unwrap();
        let p = g.out_neighbours(a).unwrap()[0];
        assert!(g.out_neighbours(b).unwrap().is_empty());
        assert_eq!(g.in_neighbours(b).unwrap(), &[p]);
        assert!(g.in_neighbours(a).unwrap().is_empty());
        assert!(matches!(
            g.out_neighbours(VertexId(99)),
            Err(Error::UnknownVertex(99))
        ));
        assert!(g.in_neighbours(VertexId(99)).is_err());

        let g = build_graph(&[Triple::iris("x", "p", "o"), Triple::iris("y", "q", "o")]);
        assert_eq!(g.in_neighbours(g.entity("o").unwrap()).unwrap().len(), 2);
    }

    #[test]
    fn literals_are_fresh_per_occurrence() {
        let t = vec![
            Triple::new(Term::iri("a"), "p", Term::literal("x")).unwrap(),
            Triple::new(Term::iri("b"), "p", Term::literal("x")).unwrap(),
        ];
        let g = build_graph(&t);
        let lits: Vec<_> = g
            .vertices()
            .filter(|(_, v)| v.kind == VertexKind::Literal)
            .map(|(id, _)| id)
            .collect();
        assert_eq!(lits.len(), 2);
        for l in lits {
            assert_eq!(g.in_neighbours(l).unwrap().len(), 1);
            assert!(g.out_neighbours(l).unwrap().is_empty());
        }
    }

    #[test]
    fn leak_removal() {
        let t = vec![
            Triple::iris("a", "p1", "b"),
            Triple::iris("a", "p2", "b"),
            Triple::iris("a", "p3", "b"),
        ];
        let kept = remove_leak_triples(t.clone(), &["p2".to_string()]);
        assert_eq!(kept, vec![t[0].clone(), t[2].clone()]);
        assert_eq!(remove_leak_triples(t.clone(), &[]), t);
        let all: Vec<String> = ["p1", "p2", "p3"].iter().map(|s| s.to_string()).collect();
        assert!(remove_leak_triples(t, &all).is_empty());
    }

    #[test]
    fn predicate_list_accepts_brackets() {
        let list = parse_predicate_list("<http://a>\nhttp://b\n\n# c\n".as_bytes()).unwrap();
        assert_eq!(list, vec!["http://a", "http://b"]);
    }

    #[test]
    fn feature_network_ingestion() {
        let v = FeatureNetworkVocabulary::default();
        let papers = vec![PaperRecord {
            id: "p".into(),
            words: vec![("w1".into(), 0.3), ("w2".into(), 0.0)],
            cites: vec!["q".into()],
        }];
        let t = ingest_feature_network(&papers, &v);
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].predicate(), v.has_word);
        assert_eq!(t[0].object(), &Term::iri("http://example.org/word/w1"));
        assert_eq!(t[1].predicate(), v.cites);
        assert_eq!(t[1].object(), &Term::iri("http://example.org/paper/q"));

        let silent = PaperRecord {
            id: "z".into(),
            words: vec![("w".into(), 0.0)],
            cites: vec![],
        };
        assert!(ingest_feature_network(&[silent], &v).is_empty());

        let mutual = vec![
            PaperRecord {
                id: "a".into(),
                words: vec![],
                cites: vec!["b".into()],
            },
            PaperRecord {
                id: "b".into(),
                words: vec![],
                cites: vec!["a".into()],
            },
        ];
        let t = ingest_feature_network(&mutual, &v);
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].subject(), t[1].object());
        assert_eq!(t[1].subject(), t[0].object());
    }

    #[test]
    fn feature_network_parsing() {
        let src = "p1\tw1:0.5,w2:0\tp2,p3\np2\t\t\n";
        let papers = parse_feature_network(src.as_bytes()).unwrap();
        assert_eq!(papers.len(), 2);
        assert_eq!(papers[0].words, vec![("w1".into(), 0.5), ("w2".into(), 0.0)]);
        assert_eq!(papers[0].cites, vec!["p2", "p3"]);
        assert!(papers[1].words.is_empty());
        assert!(parse_feature_network("p\tw1:-1\t\n".as_bytes()).is_err());
        assert!(parse_feature_network("p\tw1\t\n".as_bytes()).is_err());
    }
}
