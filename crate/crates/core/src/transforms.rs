//! Corpus transformations: anonymous walks, walklets, HALK and n-gram relabelling.
//!
//! Each transform keeps the source corpus provenance and appends its own
//! step to the `transforms` chain in the header.

use std::collections::{HashMap, HashSet};

use crate::corpus::WalkCorpus;

pub const WILDCARD: &str = "*";

/// HALK frequency thresholds swept by default.
pub const DEFAULT_HALK_THRESHOLDS: [f64; 8] = [0.0, 0.1, 0.05, 0.01, 0.005, 0.001, 0.0005, 0.0001];

/// Replaces every hop after the root by the first index at which it occurs.
pub fn anonymize(corpus: &WalkCorpus) -> WalkCorpus {
    let walks = corpus
        .walks
        .iter()
        .map(|walk| {
            let mut first: HashMap<&str, usize> = HashMap::new();
            for (i, tok) in walk.iter().enumerate() {
                first.entry(tok.as_str()).or_insert(i);
            }
            let mut out = Vec::with_capacity(walk.len());
            out.push(walk[0].clone());
            out.extend(walk[1..].iter().map(|t| first[t.as_str()].to_string()));
            out
        })
        .collect();
    corpus.derive(walks, "anonymous")
}

/// Distinct `(root, hop)` pairs over all walks, in order of first occurrence.
pub fn walklets(corpus: &WalkCorpus) -> WalkCorpus {
    let mut seen: HashSet<(&str, &str)> = HashSet::new();
    let mut walks = Vec::new();
    for walk in &corpus.walks {
        let root = walk[0].as_str();
        for hop in &walk[1..] {
            if seen.insert((root, hop.as_str())) {
                walks.push(vec![root.to_string(), hop.clone()]);
            }
        }
    }
    corpus.derive(walks, "walklet")
}

/// Number of distinct walks that contain each token.
pub fn walk_frequencies(corpus: &WalkCorpus) -> HashMap<&str, usize> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for walk in &corpus.walks {
        let distinct: HashSet<&str> = walk.iter().map(String::as_str).collect();
        for tok in distinct {
            *counts.entry(tok).or_default() += 1;
        }
    }
    counts
}

fn halk_filter(corpus: &WalkCorpus, counts: &HashMap<&str, usize>, threshold: f64) -> Vec<Vec<String>> {
    let n = corpus.walks.len() as f64;
    corpus
        .walks
        .iter()
        .map(|walk| {
            let mut out = vec![walk[0].clone()];
            out.extend(
                walk[1..]
                    .iter()
                    .filter(|hop| counts[hop.as_str()] as f64 / n >= threshold)
                    .cloned(),
            );
            out
        })
        .collect()
}

fn format_thresholds(thresholds: &[f64]) -> String {
    thresholds
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

/// Drops non-root hops whose walk-frequency fraction is below each threshold;
/// one filtered copy of the corpus per threshold, concatenated in order.
pub fn halk(corpus: &WalkCorpus, thresholds: &[f64]) -> WalkCorpus {
    let counts = walk_frequencies(corpus);
    let mut walks = Vec::with_capacity(corpus.len() * thresholds.len());
    for &t in thresholds {
        walks.extend(halk_filter(corpus, &counts, t));
    }
    corpus.derive(walks, &format!("halk(thresholds={})", format_thresholds(thresholds)))
}

/// One corpus per threshold, for tuning the threshold instead of concatenating.
pub fn halk_per_threshold(corpus: &WalkCorpus, thresholds: &[f64]) -> Vec<WalkCorpus> {
    let counts = walk_frequencies(corpus);
    thresholds
        .iter()
        .map(|&t| {
            corpus.derive(
                halk_filter(corpus, &counts, t),
                &format!("halk(thresholds={t})"),
            )
        })
        .collect()
}

/// Calls `f` on every `k`-subset of `0..n` in lexicographic order.
fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn wildcard_variants(walks: &[Vec<String>], n_wild: usize) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = walks.to_vec();
    if n_wild == 0 {
        return out;
    }
    for walk in walks {
        let positions = walk.len().saturating_sub(1);
        for_each_combination(positions, n_wild, |comb| {
            let mut w = walk.clone();
            for &i in comb {
                w[i + 1] = WILDCARD.to_string();
            }
            out.push(w);
        });
    }
    out
}

/// Appends, after all original walks, one variant per walk and per choice of
/// `n_wild` non-root positions replaced by `*`.
pub fn inject_wildcards(corpus: &WalkCorpus, n_wild: usize) -> WalkCorpus {
    corpus.derive(
        wildcard_variants(&corpus.walks, n_wild),
        &format!("wildcards(n={n_wild})"),
    )
}

/// Injective assignment of fresh integer labels to n-gram tuples.
#[derive(Debug, Clone, Default)]
pub struct NGramMap {
    ids: HashMap<Vec<String>, usize>,
    grams: Vec<Vec<String>>,
}

impl NGramMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn label(&mut self, gram: &[String]) -> usize {
        if let Some(&id) = self.ids.get(gram) {
            return id;
        }
        let id = self.grams.len();
        self.ids.insert(gram.to_vec(), id);
        self.grams.push(gram.to_vec());
        id
    }

    pub fn get(&self, gram: &[String]) -> Option<usize> {
        self.ids.get(gram).copied()
    }

    /// The tuple behind a label.
    pub fn gram(&self, label: usize) -> Option<&[String]> {
        self.grams.get(label).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.grams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grams.is_empty()
    }

    pub fn token(label: usize) -> String {
        format!("ng{label}")
    }
}

/// Wildcard injection followed by n-gram relabelling, sharing one map across
/// the corpus. Each output walk is the first `n` tokens verbatim followed by
/// the label of every window `walk[i-n..i]` for `n <= i <= len`.
pub fn ngram_relabel_with_map(
    corpus: &WalkCorpus,
    n: usize,
    n_wild: usize,
    map: &mut NGramMap,
) -> WalkCorpus {
    assert!(n >= 1, "n-gram size must be positive");
    let extended = wildcard_variants(&corpus.walks, n_wild);
    let walks = extended
        .into_iter()
        .map(|walk| {
            let mut out: Vec<String> = walk.iter().take(n).cloned().collect();
            if walk.len() >= n {
                for i in n..=walk.len() {
                    out.push(NGramMap::token(map.label(&walk[i - n..i])));
                }
            }
            out
        })
        .collect();
    corpus.derive(walks, &format!("ngram(n={n},wildcards={n_wild})"))
}

pub fn ngram_relabel(corpus: &WalkCorpus, n: usize, n_wild: usize) -> WalkCorpus {
    ngram_relabel_with_map(corpus, n, n_wild, &mut NGramMap::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corpus(walks: &[&[&str]]) -> WalkCorpus {
        let mut c = WalkCorpus::new("random", 1);
        c.walks = walks
            .iter()
            .map(|w| w.iter().map(|s| s.to_string()).collect())
            .collect();
        c
    }

    fn toks(c: &WalkCorpus) -> Vec<Vec<&str>> {
        c.walks
            .iter()
            .map(|w| w.iter().map(String::as_str).collect())
            .collect()
    }

    #[test]
    fn anonymize_traces() {
        assert_eq!(
            toks(&anonymize(&corpus(&[&["A", "p", "B", "p", "A"]]))),
            vec![vec!["A", "1", "2", "1", "0"]]
        );
        assert_eq!(toks(&anonymize(&corpus(&[&["A"]]))), vec![vec!["A"]]);
        assert_eq!(
            toks(&anonymize(&corpus(&[&["A", "p", "B"]]))),
            vec![vec!["A", "1", "2"]]
        );
    }

    #[test]
    fn walklet_traces() {
        let w = walklets(&corpus(&[&["A", "p", "B", "q", "C"]]));
        assert_eq!(
            toks(&w),
            vec![vec!["A", "p"], vec!["A", "B"], vec!["A", "q"], vec!["A", "C"]]
        );
        assert!(walklets(&corpus(&[&["A"]])).is_empty());
        let w = walklets(&corpus(&[&["A", "p", "B"], &["A", "p", "C"]]));
        assert_eq!(toks(&w), vec![vec!["A", "p"], vec!["A", "B"], vec!["A", "C"]]);
        assert_eq!(w.param("transforms"), Some("walklet"));
    }

    #[test]
    fn halk_traces() {
        let c = corpus(&[&["A", "p", "B"], &["A", "p", "C"]]);
        assert_eq!(halk(&c, &[0.0]).walks, c.walks);
        assert_eq!(
            toks(&halk(&c, &[0.6])),
            vec![vec!["A", "p"], vec!["A", "p"]]
        );
        let both = halk(&c, &[0.0, 0.6]);
        assert_eq!(both.len(), 4);
        let per = halk_per_threshold(&c, &[0.0, 0.6]);
        assert_eq!(per[1].walks, halk(&c, &[0.6]).walks);
    }

    #[test]
    fn halk_counts_walks_not_occurrences() {
        // B occurs twice in one walk of two: fraction 1/2
        let c = corpus(&[&["A", "B", "B"], &["A", "p", "C"]]);
        let f = walk_frequencies(&c);
        assert_eq!(f["B"], 1);
        assert_eq!(toks(&halk(&c, &[0.6])), vec![vec!["A"], vec!["A"]]);
    }

    #[test]
    fn wildcard_traces() {
        let w = inject_wildcards(&corpus(&[&["A", "p", "B"]]), 1);
        assert_eq!(
            toks(&w),
            vec![vec!["A", "p", "B"], vec!["A", "*", "B"], vec!["A", "p", "*"]]
        );
        let c = corpus(&[&["A", "p", "B"]]);
        assert_eq!(inject_wildcards(&c, 0).walks, c.walks);
        let short = corpus(&[&["A", "p"]]);
        assert_eq!(inject_wildcards(&short, 2).walks, short.walks);
    }

    #[test]
    fn combinations_enumerate_all_subsets() {
        let mut seen = Vec::new();
        for_each_combination(4, 2, |c| seen.push(c.to_vec()));
        assert_eq!(seen.len(), 6);
        assert_eq!(seen[0], vec![0, 1]);
        assert_eq!(seen[5], vec![2, 3]);
        let mut count = 0;
        for_each_combination(3, 0, |c| {
            assert!(c.is_empty());
            count += 1
        });
        assert_eq!(count, 1);
    }

    #[test]
    fn ngram_bigram_trace() {
        let out = ngram_relabel(&corpus(&[&["A", "p", "B", "q", "C"]]), 2, 0);
        assert_eq!(
            toks(&out),
            vec![vec!["A", "p", "ng0", "ng1", "ng2", "ng3"]]
        );
    }

    #[test]
    fn ngram_map_is_shared_and_invertible() {
        let mut map = NGramMap::new();
        let c = corpus(&[&["A", "p", "B"], &["C", "p", "B"]]);
        let out = ngram_relabel_with_map(&c, 2, 0, &mut map);
        // (p, B) appears in both walks and gets the same label
        assert_eq!(out.walks[0][3], out.walks[1][3]);
        for label in 0..map.len() {
            let gram = map.gram(label).unwrap().to_vec();
            assert_eq!(map.get(&gram), Some(label));
        }
    }

    #[test]
    fn ngram_short_walk_verbatim() {
        let out = ngram_relabel(&corpus(&[&["A", "p"]]), 3, 0);
        assert_eq!(toks(&out), vec![vec!["A", "p"]]);
    }

    #[test]
    fn ngram_with_wildcards_grows_corpus() {
        let out = ngram_relabel(&corpus(&[&["A", "p", "B"]]), 1, 1);
        assert_eq!(out.len(), 3);
        assert_eq!(out.param("transforms"), Some("ngram(n=1,wildcards=1)"));
    }

    fn walk_strategy() -> impl Strategy<Value = Vec<Vec<String>>> {
        prop::collection::vec(
            prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e"]), 1..7)
                .prop_map(|w| w.into_iter().map(String::from).collect()),
            0..12,
        )
    }

    proptest! {
        #[test]
        fn anonymize_is_label_oblivious(walks in walk_strategy()) {
            let mut c = WalkCorpus::new("random", 0);
            c.walks = walks.clone();
            let mut renamed = c.clone();
            for w in renamed.walks.iter_mut() {
                for t in w.iter_mut() {
                    *t = format!("renamed-{t}");
                }
            }
            let a = anonymize(&c);
            let b = anonymize(&renamed);
            for (x, y) in a.walks.iter().zip(&b.walks) {
                prop_assert_eq!(&x[1..], &y[1..]);
            }
        }

        #[test]
        fn walklet_shape(walks in walk_strategy()) {
            let mut c = WalkCorpus::new("random", 0);
            c.walks = walks;
            let w = walklets(&c);
            prop_assert!(w.walks.iter().all(|p| p.len() == 2));
            let upper: usize = c.walks.iter().map(|w| w.len() - 1).sum();
            prop_assert!(w.len() <= upper);
        }

        #[test]
        fn halk_shrinks_and_keeps_roots(walks in walk_strategy(), t in 0.0f64..1.0) {
            let mut c = WalkCorpus::new("random", 0);
            c.walks = walks;
            let h = halk(&c, &[t]);
            prop_assert_eq!(h.len(), c.len());
            for (orig, filtered) in c.walks.iter().zip(&h.walks) {
                prop_assert_eq!(&orig[0], &filtered[0]);
                // order-preserving subsequence
                let mut it = orig.iter();
                prop_assert!(filtered.iter().all(|tok| it.any(|o| o == tok)));
            }
            prop_assert_eq!(halk(&c, &[0.0]).walks, c.walks.clone());
        }

        #[test]
        fn unigram_relabel_preserves_equality(walks in walk_strategy()) {
            let mut c = WalkCorpus::new("random", 0);
            c.walks = walks;
            let out = ngram_relabel(&c, 1, 0);
            for i in 0..c.len() {
                for j in 0..c.len() {
                    prop_assert_eq!(c.walks[i] == c.walks[j], out.walks[i] == out.walks[j]);
                }
            }
        }
    }
}
