use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use kgwalk::community::{louvain, CommunityPartition};
use kgwalk::embedding::{build_vocabulary, meta_path, train_skipgram, write_meta};
use kgwalk::evaluation::{
    evaluate_accuracy, render_rank_table, repeat_runs, train_classifier, LabeledSplit, ScoreTable,
};
use kgwalk::rdf::{build_graph, parse_predicate_list, read_ntriples, remove_leak_triples};
use kgwalk::transforms::{anonymize, halk, halk_per_threshold, ngram_relabel, walklets};
use kgwalk::walks::{extract_per_root, to_corpus, Extraction};
use kgwalk::wl::{check_wl_bijection_for, wl_relabel, wl_walk_corpus};
use kgwalk::{
    digest, EmbeddingMatrix, KnowledgeGraph, TrainingConfig, VertexId, VertexKind, WalkConfig,
    WalkCorpus,
};

use crate::{
    EvaluateArgs, ExtractArgs, GraphArgs, HalkMode, PipelineArgs, RankArgs, RunArgs, Strategy,
    TrainArgs, TrainCmdArgs, TransformArgs, UsageError, WalkArgs, WlCheckArgs,
};

/// Seed used for Louvain so cached partitions depend only on graph and resolution.
const LOUVAIN_SEED: u64 = 0;

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(UsageError(msg.into()))
}

fn load_graph(args: &GraphArgs) -> Result<KnowledgeGraph> {
    let mut triples = read_ntriples(&args.graph)
        .with_context(|| format!("reading graph {}", args.graph.display()))?;
    if let Some(path) = &args.leak_predicates {
        let banned = parse_predicate_list(fs::File::open(path)?)
            .with_context(|| format!("reading leak predicates {}", path.display()))?;
        triples = remove_leak_triples(triples, &banned);
    }
    let g = build_graph(&triples);
    eprintln!(
        "graph: {} triples, {} vertices, {} edges",
        triples.len(),
        g.vertex_count(),
        g.edge_count()
    );
    Ok(g)
}

fn load_split(path: &Path) -> Result<LabeledSplit> {
    let split = LabeledSplit::read(fs::File::open(path).with_context(|| format!("opening {}", path.display()))?)
        .with_context(|| format!("reading split {}", path.display()))?;
    split.validate()?;
    Ok(split)
}

/// Walk roots: split entities in file order, or every entity of the graph.
fn roots(g: &KnowledgeGraph, split: Option<&LabeledSplit>) -> Result<Vec<VertexId>> {
    let Some(split) = split else {
        return Ok(g.entities().collect());
    };
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for e in split.entities() {
        if seen.insert(e) {
            out.push(g.entity(e).ok_or_else(|| anyhow!("split entity {e:?} is not in the graph"))?);
        }
    }
    Ok(out)
}

fn workers(run: &RunArgs) -> Result<usize> {
    if run.deterministic {
        return Ok(1);
    }
    match run.workers {
        Some(0) => Err(usage("--workers must be at least 1")),
        Some(w) => Ok(w),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn install_pool(run: &RunArgs) -> Result<usize> {
    let w = workers(run)?;
    // a second call (tests, repeated stages) keeps the existing pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    Ok(w)
}

fn out_path(run: &RunArgs, explicit: &Option<PathBuf>, default_name: &str) -> Result<PathBuf> {
    let path = explicit.clone().unwrap_or_else(|| run.out_dir.join(default_name));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(path)
}

fn config_hash(pairs: &[(&str, String)]) -> String {
    let text: Vec<String> = pairs.iter().map(|(k, v)| format!("{k}={v}")).collect();
    digest::short(text.join("\n").as_bytes())
}

fn walk_settings(w: &WalkArgs) -> Vec<(&'static str, String)> {
    let mut out = vec![
        ("strategy", w.strategy.name().to_string()),
        ("depth", w.depth.to_string()),
        ("max_walks", format!("{:?}", w.max_walks)),
    ];
    match w.strategy {
        Strategy::Wl => out.push(("wl_iterations", w.wl_iterations.to_string())),
        Strategy::Community => {
            out.push(("p", w.p.to_string()));
            out.push(("hop_prob", w.hop_prob.to_string()));
            out.push(("resolution", w.resolution.to_string()));
        }
        Strategy::Halk => out.push(("thresholds", format!("{:?}", w.thresholds))),
        Strategy::Ngram => {
            out.push(("n", w.n.to_string()));
            out.push(("wildcards", w.wildcards.to_string()));
        }
        Strategy::Random | Strategy::Anonymous | Strategy::Walklet => {}
    }
    out
}

fn train_settings(t: &TrainArgs) -> Vec<(&'static str, String)> {
    vec![
        ("dim", t.dim.to_string()),
        ("window", t.window.to_string()),
        ("neg", t.neg.to_string()),
        ("epochs", t.epochs.to_string()),
        ("lr", t.lr.to_string()),
        ("min_lr", t.min_lr.to_string()),
        ("min_count", t.min_count.to_string()),
    ]
}

fn validate_walk_args(w: &WalkArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&w.p) || !(0.0..=1.0).contains(&w.hop_prob) {
        return Err(usage("--p and --hop-prob must lie in [0, 1]"));
    }
    if w.resolution.is_nan() || w.resolution <= 0.0 {
        return Err(usage("--resolution must be positive"));
    }
    if w.thresholds.is_empty() {
        return Err(usage("--thresholds needs at least one value"));
    }
    if w.n == 0 {
        return Err(usage("n-gram size must be at least 1"));
    }
    if w.max_walks == Some(0) {
        return Err(usage("--max-walks must be at least 1"));
    }
    Ok(())
}

fn partition_for(
    g: &KnowledgeGraph,
    w: &WalkArgs,
    out_dir: &Path,
) -> Result<CommunityPartition> {
    if let Some(path) = &w.partition {
        return CommunityPartition::read_tsv(g, fs::File::open(path)?, w.resolution)
            .with_context(|| format!("reading partition {}", path.display()));
    }
    let cache = out_dir.join(format!(
        "partition-{}-r{}.tsv",
        g.fingerprint(),
        w.resolution
    ));
    if cache.exists() {
        if let Ok(p) = CommunityPartition::read_tsv(g, fs::File::open(&cache)?, w.resolution) {
            eprintln!("community: reusing {}", cache.display());
            return Ok(p);
        }
    }
    let p = louvain(g, w.resolution, LOUVAIN_SEED);
    eprintln!("community: louvain found {} communities", p.len());
    fs::create_dir_all(out_dir)?;
    let mut buf = Vec::new();
    p.write_tsv(g, &mut buf)?;
    fs::write(&cache, buf).with_context(|| format!("caching partition {}", cache.display()))?;
    Ok(p)
}

/// Walks before any transform (community walks for `community`, random otherwise).
fn base_corpus(
    g: &KnowledgeGraph,
    roots: &[VertexId],
    w: &WalkArgs,
    seed: u64,
    out_dir: &Path,
) -> Result<(WalkCorpus, Vec<Vec<kgwalk::Walk>>)> {
    let cfg = WalkConfig {
        depth: w.depth,
        max_walks_per_entity: w.max_walks,
        seed,
    };
    let per_root = if w.strategy == Strategy::Community {
        let partition = partition_for(g, w, out_dir)?;
        extract_per_root(
            g,
            roots,
            &cfg,
            Extraction::Community {
                partition: &partition,
                p: w.p,
                hop_prob: w.hop_prob,
            },
        )?
    } else {
        extract_per_root(g, roots, &cfg, Extraction::Random)?
    };
    let mut corpus = to_corpus(g, &per_root, w.strategy.name(), &cfg);
    if w.strategy == Strategy::Community {
        corpus.set_param("p", w.p);
        corpus.set_param("hop_prob", w.hop_prob);
        corpus.set_param("resolution", w.resolution);
    }
    Ok((corpus, per_root))
}

/// Candidate corpora for one run; several when a parameter is tuned.
fn candidate_corpora(
    g: &KnowledgeGraph,
    roots: &[VertexId],
    w: &WalkArgs,
    seed: u64,
    out_dir: &Path,
    halk_mode: HalkMode,
    tune_ngram: bool,
) -> Result<Vec<(String, WalkCorpus)>> {
    let (base, per_root) = base_corpus(g, roots, w, seed, out_dir)?;
    let single = |c: WalkCorpus| Ok(vec![(String::new(), c)]);
    match w.strategy {
        Strategy::Random | Strategy::Community => single(base),
        Strategy::Wl => {
            let store = wl_relabel(g, w.wl_iterations);
            single(wl_walk_corpus(g, &per_root, &store, false, base))
        }
        Strategy::Anonymous => single(anonymize(&base)),
        Strategy::Walklet => single(walklets(&base)),
        Strategy::Halk => match halk_mode {
            HalkMode::Concat => single(halk(&base, &w.thresholds)),
            HalkMode::Tune => Ok(w
                .thresholds
                .iter()
                .zip(halk_per_threshold(&base, &w.thresholds))
                .map(|(t, c)| (format!("threshold={t}"), c))
                .collect()),
        },
        Strategy::Ngram if tune_ngram => {
            let mut out = Vec::new();
            for n in 1..=3 {
                for wild in 0..=1 {
                    out.push((format!("n={n},wildcards={wild}"), ngram_relabel(&base, n, wild)));
                }
            }
            Ok(out)
        }
        Strategy::Ngram => single(ngram_relabel(&base, w.n, w.wildcards)),
    }
}

pub fn extract(a: &ExtractArgs) -> Result<()> {
    let inner = || -> Result<()> {
        validate_walk_args(&a.walk)?;
        install_pool(&a.run)?;
        let g = load_graph(&a.graph)?;
        let split = a.splits.as_deref().map(load_split).transpose()?;
        let roots = roots(&g, split.as_ref())?;
        let mut settings = walk_settings(&a.walk);
        settings.push(("seed", a.run.seed.to_string()));
        settings.push(("graph", g.fingerprint()));
        let (_, mut corpus) = candidate_corpora(
            &g,
            &roots,
            &a.walk,
            a.run.seed,
            &a.run.out_dir,
            HalkMode::Concat,
            false,
        )?
        .remove(0);
        corpus.set_param("config", config_hash(&settings));
        let path = out_path(&a.run, &a.output, "corpus.tsv")?;
        corpus.save(&path)?;
        eprintln!(
            "extract: {} walks from {} roots -> {}",
            corpus.len(),
            roots.len(),
            path.display()
        );
        Ok(())
    };
    inner().context("extract")
}

pub fn transform(a: &TransformArgs) -> Result<()> {
    let inner = || -> Result<()> {
        if !a.halk && (a.thresholds.is_some() || a.per_threshold) {
            return Err(usage("--thresholds and --per-threshold only apply to --halk"));
        }
        if !a.ngram && (a.n.is_some() || a.wildcards.is_some()) {
            return Err(usage("-n and --wildcards only apply to --ngram"));
        }
        let thresholds = a
            .thresholds
            .clone()
            .unwrap_or_else(|| kgwalk::transforms::DEFAULT_HALK_THRESHOLDS.to_vec());
        let (n, wildcards) = (a.n.unwrap_or(2), a.wildcards.unwrap_or(0));
        if thresholds.is_empty() {
            return Err(usage("--thresholds needs at least one value"));
        }
        if n == 0 {
            return Err(usage("n-gram size must be at least 1"));
        }
        let corpus = WalkCorpus::load(&a.input)
            .with_context(|| format!("reading corpus {}", a.input.display()))?;
        if let Some(parent) = a.output.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        if a.per_threshold {
            for (i, c) in halk_per_threshold(&corpus, &thresholds).into_iter().enumerate() {
                let mut name = a.output.clone().into_os_string();
                name.push(format!(".t{i}"));
                c.save(Path::new(&name))?;
            }
            return Ok(());
        }
        let out = if a.anonymous {
            anonymize(&corpus)
        } else if a.walklet {
            walklets(&corpus)
        } else if a.halk {
            halk(&corpus, &thresholds)
        } else {
            ngram_relabel(&corpus, n, wildcards)
        };
        out.save(&a.output)?;
        eprintln!("transform: {} -> {} walks", corpus.len(), out.len());
        Ok(())
    };
    inner().context("transform")
}

fn training_config(t: &TrainArgs, seed: u64, workers: usize) -> TrainingConfig {
    TrainingConfig {
        dimension: t.dim,
        window: t.window,
        negatives: t.neg,
        epochs: t.epochs,
        initial_lr: t.lr,
        min_lr: t.min_lr,
        seed,
        workers,
    }
}

/// Trains and attaches provenance: corpus digest, config hash.
fn train_embeddings(
    corpus: &WalkCorpus,
    t: &TrainArgs,
    seed: u64,
    workers: usize,
) -> Result<EmbeddingMatrix> {
    if corpus.is_empty() {
        bail!(kgwalk::Error::EmptyCorpus);
    }
    let cfg = training_config(t, seed, workers);
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let vocab = build_vocabulary(corpus, t.min_count)?;
    let mut e = train_skipgram(corpus, &vocab, &cfg)?;
    let mut settings = train_settings(t);
    settings.push(("seed", seed.to_string()));
    e.meta.push(("corpus_digest".into(), corpus.digest()));
    e.meta.push((
        "corpus_config".into(),
        corpus.param("config").unwrap_or("").to_string(),
    ));
    e.meta.push(("config".into(), config_hash(&settings)));
    Ok(e)
}

/// Writes vectors plus the `.meta` sidecar; returns the embedding digest.
fn save_embeddings(e: &EmbeddingMatrix, path: &Path) -> Result<String> {
    let mut buf = Vec::new();
    e.write(&mut buf)?;
    let d = digest::short(&buf);
    fs::write(path, &buf).with_context(|| format!("writing {}", path.display()))?;
    let mut meta = e.meta.clone();
    meta.push(("embedding_digest".into(), d.clone()));
    let mut mbuf = Vec::new();
    write_meta(&meta, &mut mbuf)?;
    fs::write(meta_path(path), mbuf)?;
    Ok(d)
}

pub fn train(a: &TrainCmdArgs) -> Result<()> {
    let inner = || -> Result<()> {
        let w = install_pool(&a.run)?;
        let corpus = WalkCorpus::load(&a.corpus)
            .with_context(|| format!("reading corpus {}", a.corpus.display()))?;
        let e = train_embeddings(&corpus, &a.train, a.run.seed, w)?;
        let path = out_path(&a.run, &a.output, "embeddings.txt")?;
        let d = save_embeddings(&e, &path)?;
        eprintln!(
            "train: {} vectors of dimension {} ({}), digest {d} -> {}",
            e.len(),
            e.dimension(),
            if w == 1 { "deterministic" } else { "hogwild" },
            path.display()
        );
        Ok(())
    };
    inner().context("train")
}

/// Loads embeddings and checks them against the digests recorded at training time.
fn load_verified_embeddings(path: &Path, corpus: Option<&Path>) -> Result<EmbeddingMatrix> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let mut e = EmbeddingMatrix::read(bytes.as_slice())?;
    let mp = meta_path(path);
    if mp.exists() {
        e.meta = kgwalk::embedding::read_meta(fs::File::open(&mp)?)?;
        let actual = digest::short(&bytes);
        match e.meta_value("embedding_digest") {
            Some(expected) if expected != actual => bail!(kgwalk::Error::Integrity(format!(
                "embedding digest {actual} does not match recorded {expected}"
            ))),
            _ => {}
        }
    }
    if let Some(cp) = corpus {
        let c = WalkCorpus::load(cp).with_context(|| format!("reading corpus {}", cp.display()))?;
        match e.meta_value("corpus_digest") {
            Some(expected) if expected == c.digest() => {}
            Some(expected) => bail!(kgwalk::Error::Integrity(format!(
                "corpus digest {} does not match the one recorded at training time ({expected})",
                c.digest()
            ))),
            None => bail!(kgwalk::Error::Integrity(
                "embeddings carry no corpus digest to compare against".into()
            )),
        }
    }
    Ok(e)
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let inner = || -> Result<()> {
        install_pool(&a.run)?;
        let e = load_verified_embeddings(&a.embeddings, a.corpus.as_deref())?;
        let split = load_split(&a.splits)?;
        let report = repeat_runs(a.run.seed, 1, |seed| {
            let trained = train_classifier(&e, &split, &a.classifier.reg_grid, a.classifier.folds, seed)?;
            Ok((evaluate_accuracy(&trained.model, &e, &split)?, trained.regularization))
        })?;
        let mut report = report;
        for key in ["embedding_digest", "corpus_digest", "config", "corpus_config"] {
            if let Some(v) = e.meta_value(key) {
                report.metadata.insert(key.to_string(), v.to_string());
            }
        }
        let path = out_path(&a.run, &a.output, "report.json")?;
        fs::write(&path, report.to_json())?;
        println!("accuracy: {:.4}", report.mean);
        Ok(())
    };
    inner().context("evaluate")
}

pub fn wl_check(a: &WlCheckArgs) -> Result<()> {
    let inner = || -> Result<()> {
        let g = load_graph(&a.graph)?;
        let store = wl_relabel(&g, a.iterations);
        let mut kinds = vec![VertexKind::Entity];
        if a.include_blank {
            kinds.push(VertexKind::BlankNode);
        }
        let report = check_wl_bijection_for(&g, &store, &kinds);
        for (k, u, v) in report.violations.iter().take(20) {
            eprintln!("  iteration {k}: {:?} and {:?} share a label", g.label(*u), g.label(*v));
        }
        println!("checked: {} vertices, {} iterations", report.checked_vertices, report.iterations);
        println!("violations: {}", report.violations.len());
        if !report.is_bijective() {
            bail!("WL labelling is not injective on this graph");
        }
        Ok(())
    };
    inner().context("wl-check")
}

pub fn pipeline(a: &PipelineArgs) -> Result<()> {
    let inner = || -> Result<()> {
        validate_walk_args(&a.walk)?;
        if a.repetitions == 0 {
            return Err(usage("--repetitions must be at least 1"));
        }
        let workers = install_pool(&a.run)?;
        training_config(&a.train, a.run.seed, workers)
            .validate()
            .map_err(|e| usage(e.to_string()))?;
        let g = load_graph(&a.graph)?;
        let split = load_split(&a.splits)?;
        let roots = roots(&g, Some(&split))?;
        fs::create_dir_all(&a.run.out_dir)?;

        let mut settings = walk_settings(&a.walk);
        settings.extend(train_settings(&a.train));
        settings.push(("reg_grid", format!("{:?}", a.classifier.reg_grid)));
        settings.push(("folds", a.classifier.folds.to_string()));
        settings.push(("halk_mode", format!("{:?}", a.halk_mode)));
        settings.push(("tune_ngram", a.tune_ngram.to_string()));
        settings.push(("seed", a.run.seed.to_string()));
        settings.push(("repetitions", a.repetitions.to_string()));
        settings.push(("graph", g.fingerprint()));
        let hash = config_hash(&settings);

        let mut metadata = BTreeMap::new();
        let mut rep = 0usize;
        let mut report = repeat_runs(a.run.seed, a.repetitions, |seed| {
            let dir = a.run.out_dir.join(format!("rep{rep}"));
            fs::create_dir_all(&dir)?;
            let candidates = candidate_corpora(
                &g,
                &roots,
                &a.walk,
                seed,
                &a.run.out_dir,
                a.halk_mode,
                a.tune_ngram,
            )
            .map_err(|e| kgwalk::Error::Invalid(format!("{e:#}")))?;
            let mut best: Option<(f64, String, WalkCorpus, EmbeddingMatrix, _)> = None;
            for (label, mut corpus) in candidates {
                corpus.set_param("config", &hash);
                let e = train_embeddings(&corpus, &a.train, seed, workers)
                    .map_err(|e| kgwalk::Error::Invalid(format!("{e:#}")))?;
                let trained =
                    train_classifier(&e, &split, &a.classifier.reg_grid, a.classifier.folds, seed)?;
                let cv = trained.cv_scores.iter().map(|s| s.1).fold(f64::MIN, f64::max);
                if !label.is_empty() {
                    eprintln!("pipeline: rep {rep} candidate {label}: cv accuracy {cv:.4}");
                }
                if best.as_ref().is_none_or(|b| cv > b.0) {
                    best = Some((cv, label, corpus, e, trained));
                }
            }
            let (_, label, corpus, e, trained) = best.expect("at least one candidate");
            corpus.save(&dir.join("corpus.tsv"))?;
            let emb_digest = save_embeddings(&e, &dir.join("embeddings.txt"))
                .map_err(|e| kgwalk::Error::Invalid(format!("{e:#}")))?;
            let acc = evaluate_accuracy(&trained.model, &e, &split)?;
            eprintln!("pipeline: rep {rep} accuracy {acc:.4} (C={})", trained.regularization);
            metadata.insert(format!("rep{rep}.corpus_digest"), corpus.digest());
            metadata.insert(format!("rep{rep}.embedding_digest"), emb_digest);
            metadata.insert(format!("rep{rep}.walks"), corpus.len().to_string());
            if !label.is_empty() {
                metadata.insert(format!("rep{rep}.selected"), label);
            }
            rep += 1;
            Ok((acc, trained.regularization))
        })?;
        metadata.insert("config".into(), hash.clone());
        metadata.insert("strategy".into(), a.walk.strategy.name().into());
        metadata.insert("training_mode".into(), if workers == 1 { "deterministic" } else { "hogwild" }.into());
        report.metadata = metadata;
        let path = a.run.out_dir.join("report.json");
        fs::write(&path, report.to_json())?;
        println!(
            "accuracy: {:.4} +- {:.4} over {} runs",
            report.mean,
            report.std_dev,
            report.runs.len()
        );
        Ok(())
    };
    inner().context("pipeline")
}

pub fn rank(a: &RankArgs) -> Result<()> {
    let inner = || -> Result<()> {
        let table = ScoreTable::read(
            fs::File::open(&a.scores).with_context(|| format!("opening {}", a.scores.display()))?,
        )?;
        print!("{}", render_rank_table(&table)?);
        Ok(())
    };
    inner().context("rank")
}
