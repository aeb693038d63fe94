//! Skip-gram with negative sampling over walk corpora.
//!
//! Centre/context pairs come from a dynamic window drawn uniformly from
//! `1..=window` at every position. Negatives follow the unigram distribution
//! raised to 3/4. Input vectors start uniform in `[-0.5/d, 0.5/d]`, output
//! vectors at zero, and the learning rate decays linearly from
//! `initial_lr` to `min_lr` over all training tokens. Tokens are never
//! subsampled.
//!
//! With one worker training is bitwise reproducible. With more workers the
//! parameter matrices are updated without locks (Hogwild), which trades
//! reproducibility for throughput.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::corpus::{escape_token, unescape_token, WalkCorpus};
use crate::seed;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    counts: Vec<u64>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, i: usize) -> &str {
        &self.tokens[i]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn count(&self, i: usize) -> u64 {
        self.counts[i]
    }
}

/// Tokens with at least `min_count` occurrences, indexed by descending
/// frequency with lexicographic tie-breaking.
pub fn build_vocabulary(corpus: &WalkCorpus, min_count: u64) -> Result<Vocabulary> {
    let mut freq: HashMap<&str, u64> = HashMap::new();
    for tok in corpus.walks.iter().flatten() {
        *freq.entry(tok.as_str()).or_default() += 1;
    }
    if freq.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut entries: Vec<(&str, u64)> = freq
        .into_iter()
        .filter(|&(_, c)| c >= min_count.max(1))
        .collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let tokens: Vec<String> = entries.iter().map(|(t, _)| t.to_string()).collect();
    let index = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i))
        .collect();
    Ok(Vocabulary {
        tokens,
        index,
        counts: entries.iter().map(|&(_, c)| c).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub dimension: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    pub min_lr: f64,
    pub seed: u64,
    /// 1 selects the deterministic single-threaded mode.
    pub workers: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            dimension: 500,
            window: 5,
            negatives: 25,
            epochs: 10,
            initial_lr: 0.025,
            min_lr: 1e-4,
            seed: 1,
            workers: 1,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        if self.window == 0 {
            return Err(Error::Config("window must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.initial_lr.is_nan() || self.initial_lr <= 0.0 || self.min_lr < 0.0 {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        Ok(())
    }

    pub fn mode(&self) -> &'static str {
        if self.workers == 1 {
            "deterministic"
        } else {
            "hogwild"
        }
    }
}

/// Token vectors plus training metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    input: Vec<f64>,
    /// Context vectors; empty for matrices loaded from disk.
    output: Vec<f64>,
    pub meta: Vec<(String, String)>,
    /// Mean SGNS loss per epoch.
    pub epoch_losses: Vec<f64>,
}

impl EmbeddingMatrix {
    /// Builds a matrix from explicit rows (no context vectors).
    pub fn from_rows(rows: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.1.len());
        let mut tokens = Vec::with_capacity(rows.len());
        let mut index = HashMap::with_capacity(rows.len());
        let mut input = Vec::with_capacity(rows.len() * dim);
        for (tok, v) in rows {
            if v.len() != dim {
                return Err(Error::Invalid(format!(
                    "row {tok:?} has {} values, expected {dim}",
                    v.len()
                )));
            }
            if index.insert(tok.clone(), tokens.len()).is_some() {
                return Err(Error::Invalid(format!("duplicate token {tok:?}")));
            }
            tokens.push(tok);
            input.extend(v);
        }
        Ok(EmbeddingMatrix {
            tokens,
            index,
            dim,
            input,
            output: Vec::new(),
            meta: Vec::new(),
            epoch_losses: Vec::new(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn vector(&self, token: &str) -> Option<&[f64]> {
        self.index_of(token).map(|i| self.row(i))
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.input[i * self.dim..(i + 1) * self.dim]
    }

    pub fn context_row(&self, i: usize) -> Option<&[f64]> {
        self.output.get(i * self.dim..(i + 1) * self.dim)
    }

    pub fn all_finite(&self) -> bool {
        self.input.iter().chain(&self.output).all(|x| x.is_finite())
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Text format: `<rows> <dim>` header, then `token TAB v1 v2 ...` per row.
    pub fn write<W: Write>(&self, mut sink: W) -> Result<()> {
        if self.is_empty() || self.dim == 0 {
            return Err(Error::Invalid("refusing to save an empty embedding matrix".into()));
        }
        writeln!(sink, "{} {}", self.len(), self.dim)?;
        let mut line = String::new();
        for (i, tok) in self.tokens.iter().enumerate() {
            line.clear();
            line.push_str(&escape_token(tok));
            line.push('\t');
            for (j, x) in self.row(i).iter().enumerate() {
                if j > 0 {
                    line.push(' ');
                }
                line.push_str(&x.to_string());
            }
            line.push('\n');
            sink.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn read<R: Read>(source: R) -> Result<Self> {
        let mut lines = BufReader::new(source).lines();
        let header = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::parse(1, "missing header", ""))?;
        let mut parts = header.split_whitespace();
        let (rows, dim) = match (
            parts.next().and_then(|s| s.parse::<usize>().ok()),
            parts.next().and_then(|s| s.parse::<usize>().ok()),
            parts.next(),
        ) {
            (Some(r), Some(d), None) if d > 0 => (r, d),
            _ => return Err(Error::parse(1, "expected `<rows> <dimension>`", header)),
        };
        let mut out = Vec::with_capacity(rows);
        for (i, line) in lines.enumerate() {
            let line = line?;
            let line_no = i + 2;
            if line.is_empty() {
                continue;
            }
            if out.len() == rows {
                return Err(Error::parse(line_no, "more rows than declared", line));
            }
            let (tok, values) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(line_no, "expected token TAB values", &line))?;
            let tok = unescape_token(tok).ok_or_else(|| Error::parse(line_no, "bad escape", tok))?;
            let v = values
                .split(' ')
                .map(|x| x.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::parse(line_no, "invalid number", &line))?;
            if v.len() != dim {
                return Err(Error::parse(
                    line_no,
                    format!("expected {dim} values, found {}", v.len()),
                    tok,
                ));
            }
            out.push((tok, v));
        }
        if out.len() != rows {
            return Err(Error::Invalid(format!(
                "header declares {rows} rows, found {}",
                out.len()
            )));
        }
        EmbeddingMatrix::from_rows(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }

    /// Loads vectors and, when present, the `.meta` sidecar.
    pub fn load(path: &Path) -> Result<Self> {
        let mut m = EmbeddingMatrix::read(fs::File::open(path)?)?;
        let meta = meta_path(path);
        if meta.exists() {
            m.meta = read_meta(fs::File::open(meta)?)?;
        }
        Ok(m)
    }
}

/// `embeddings.txt` -> `embeddings.meta`.
pub fn meta_path(path: &Path) -> PathBuf {
    path.with_extension("meta")
}

pub fn write_meta<W: Write>(meta: &[(String, String)], mut sink: W) -> Result<()> {
    for (k, v) in meta {
        writeln!(sink, "{}={}", k, escape_token(v))?;
    }
    Ok(())
}

pub fn read_meta<R: Read>(source: R) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(i + 1, "expected key=value", &line))?;
        let v = unescape_token(v).ok_or_else(|| Error::parse(i + 1, "bad escape", &line))?;
        out.push((k.to_string(), v));
    }
    Ok(out)
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

/// Cosine of the input vectors of two tokens.
pub fn cosine_similarity(e: &EmbeddingMatrix, a: &str, b: &str) -> Result<f64> {
    let va = e.vector(a).ok_or_else(|| Error::UnknownToken(a.to_string()))?;
    let vb = e.vector(b).ok_or_else(|| Error::UnknownToken(b.to_string()))?;
    Ok(cosine(va, vb))
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4 * 4;
    for i in (0..chunks).step_by(4) {
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-log(sigmoid(x))`, stable for large |x|.
fn neg_log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// SGNS loss for one pair: `-log σ(u_o·v_c) - Σ log σ(-u_n·v_c)`.
pub fn sgns_loss(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> f64 {
    neg_log_sigmoid(dot(context, center))
        + negatives
            .iter()
            .map(|u| neg_log_sigmoid(-dot(u, center)))
            .sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgnsGradients {
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// Analytic gradients of [`sgns_loss`].
pub fn sgns_gradients(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> SgnsGradients {
    let pos = sigmoid(dot(context, center)) - 1.0;
    let mut g_center: Vec<f64> = context.iter().map(|u| pos * u).collect();
    let g_context = center.iter().map(|v| pos * v).collect();
    let mut g_neg = Vec::with_capacity(negatives.len());
    for u in negatives {
        let s = sigmoid(dot(u, center));
        axpy(s, u, &mut g_center);
        g_neg.push(center.iter().map(|v| s * v).collect());
    }
    SgnsGradients {
        center: g_center,
        context: g_context,
        negatives: g_neg,
    }
}

/// Raw views of the two parameter matrices shared by all workers.
///
/// Rows are handed out as mutable slices without synchronisation. With a
/// single worker no two slices alias in time; with several workers
/// concurrent row updates race, as in the reference word2vec trainer.
struct SharedParams {
    input: *mut f64,
    output: *mut f64,
    dim: usize,
    rows: usize,
}

unsafe impl Send for SharedParams {}
unsafe impl Sync for SharedParams {}

impl SharedParams {
    #[allow(clippy::mut_from_ref)]
    unsafe fn input_row(&self, i: usize) -> &mut [f64] {
        debug_assert!(i < self.rows);
        std::slice::from_raw_parts_mut(self.input.add(i * self.dim), self.dim)
    }

    #[allow(clippy::mut_from_ref)]
    unsafe fn output_row(&self, i: usize) -> &mut [f64] {
        debug_assert!(i < self.rows);
        std::slice::from_raw_parts_mut(self.output.add(i * self.dim), self.dim)
    }
}

/// One SGD step on a `(center, context)` pair with the given negatives.
/// `grad` is scratch space of length `dim`. Returns the pair loss.
fn train_pair(
    params: &SharedParams,
    center: usize,
    context: usize,
    negatives: &[usize],
    lr: f64,
    grad: &mut [f64],
) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut loss = 0.0;
    // SAFETY: indices are bounded by the vocabulary size; see SharedParams.
    let v = unsafe { params.input_row(center) };
    let targets = std::iter::once((context, 1.0)).chain(negatives.iter().map(|&n| (n, 0.0)));
    for (target, label) in targets {
        let u = unsafe { params.output_row(target) };
        let score = dot(u, v);
        loss += if label == 1.0 {
            neg_log_sigmoid(score)
        } else {
            neg_log_sigmoid(-score)
        };
        let g = lr * (label - sigmoid(score));
        axpy(g, u, grad);
        axpy(g, v, u);
    }
    axpy(1.0, grad, v);
    loss
}

fn negative_table(vocab: &Vocabulary) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new((0..vocab.len()).map(|i| (vocab.count(i) as f64).powf(0.75)))
        .map_err(|e| Error::Invalid(format!("negative sampling table: {e}")))
}

/// Trains SGNS embeddings for every vocabulary token.
pub fn train_skipgram(
    corpus: &WalkCorpus,
    vocab: &Vocabulary,
    cfg: &TrainingConfig,
) -> Result<EmbeddingMatrix> {
    cfg.validate()?;
    if vocab.is_empty() {
        return Err(Error::Invalid("vocabulary is empty".into()));
    }
    let dim = cfg.dimension;
    let n = vocab.len();
    let mut init_rng = seed::rng(seed::derive(cfg.seed, u64::MAX));
    let bound = 0.5 / dim as f64;
    let mut input: Vec<f64> = (0..n * dim)
        .map(|_| init_rng.gen_range(-bound..=bound))
        .collect();
    let mut output = vec![0.0; n * dim];

    let sentences: Vec<Vec<usize>> = corpus
        .walks
        .iter()
        .map(|w| w.iter().filter_map(|t| vocab.index_of(t)).collect::<Vec<_>>())
        .filter(|w: &Vec<usize>| w.len() > 1)
        .collect();
    let tokens_per_epoch: usize = sentences.iter().map(Vec::len).sum();
    let total_tokens = (tokens_per_epoch * cfg.epochs).max(1);
    let table = negative_table(vocab)?;

    let params = SharedParams {
        input: input.as_mut_ptr(),
        output: output.as_mut_ptr(),
        dim,
        rows: n,
    };
    let processed = AtomicUsize::new(0);
    let workers = cfg.workers.min(sentences.len().max(1));
    let chunk = sentences.len().div_ceil(workers).max(1);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let run_worker = |worker: usize, part: &[Vec<usize>]| -> (f64, usize) {
            let mut rng = seed::rng(seed::derive(cfg.seed, (epoch * 65_537 + worker) as u64));
            let mut grad = vec![0.0; dim];
            let mut negs = Vec::with_capacity(cfg.negatives);
            let mut loss = 0.0;
            let mut pairs = 0usize;
            for sentence in part {
                let done = processed.load(Ordering::Relaxed);
                let progress = done as f64 / total_tokens as f64;
                let lr = (cfg.initial_lr * (1.0 - progress)).max(cfg.min_lr);
                for (i, &center) in sentence.iter().enumerate() {
                    let b = rng.gen_range(1..=cfg.window);
                    let lo = i.saturating_sub(b);
                    let hi = (i + b).min(sentence.len() - 1);
                    for (j, &context) in sentence.iter().enumerate().take(hi + 1).skip(lo) {
                        if j == i {
                            continue;
                        }
                        negs.clear();
                        for _ in 0..cfg.negatives {
                            let neg = table.sample(&mut rng);
                            if neg != context {
                                negs.push(neg);
                            }
                        }
                        loss += train_pair(&params, center, context, &negs, lr, &mut grad);
                        pairs += 1;
                    }
                }
                processed.fetch_add(sentence.len(), Ordering::Relaxed);
            }
            (loss, pairs)
        };
        let (loss, pairs) = if workers == 1 {
            run_worker(0, &sentences)
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = sentences
                    .chunks(chunk)
                    .enumerate()
                    .map(|(w, part)| {
                        let run = &run_worker;
                        s.spawn(move || run(w, part))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("training worker panicked"))
                    .fold((0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
            })
        };
        epoch_losses.push(if pairs > 0 { loss / pairs as f64 } else { 0.0 });
    }

    let tokens = vocab.tokens().to_vec();
    let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    let meta = vec![
        ("dimension".to_string(), cfg.dimension.to_string()),
        ("window".to_string(), cfg.window.to_string()),
        ("negatives".to_string(), cfg.negatives.to_string()),
        ("epochs".to_string(), cfg.epochs.to_string()),
        ("initial_lr".to_string(), cfg.initial_lr.to_string()),
        ("min_lr".to_string(), cfg.min_lr.to_string()),
        ("seed".to_string(), cfg.seed.to_string()),
        ("workers".to_string(), cfg.workers.to_string()),
        ("mode".to_string(), cfg.mode().to_string()),
    ];
    Ok(EmbeddingMatrix {
        tokens,
        index,
        dim,
        input,
        output,
        meta,
        epoch_losses,
    })
}
