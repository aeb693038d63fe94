//! Random RDF graphs for property tests and benchmarks.

use rand::Rng;

use crate::rdf::{Term, Triple};

#[derive(Debug, Clone, Copy)]
pub struct SynthConfig {
    pub entities: usize,
    pub predicates: usize,
    pub triples: usize,
    /// Probability that an object is a literal.
    pub literal_prob: f64,
    /// Probability that a subject or object is drawn from the blank-node pool.
    pub blank_prob: f64,
    /// Number of distinct literal lexical forms (small values force shared labels).
    pub literal_values: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            entities: 20,
            predicates: 4,
            triples: 40,
            literal_prob: 0.2,
            blank_prob: 0.1,
            literal_values: 5,
        }
    }
}

/// Triples over `http://synth/e{i}` entities with unique IRIs.
pub fn random_triples<R: Rng>(rng: &mut R, cfg: &SynthConfig) -> Vec<Triple> {
    let entities = cfg.entities.max(1);
    let blanks = (entities / 4).max(1);
    let resource = |rng: &mut R| {
        if rng.gen::<f64>() < cfg.blank_prob {
            Term::blank(format!("b{}", rng.gen_range(0..blanks)))
        } else {
            Term::iri(format!("http://synth/e{}", rng.gen_range(0..entities)))
        }
    };
    (0..cfg.triples)
        .map(|_| {
            let s = resource(rng);
            let p = format!("http://synth/p{}", rng.gen_range(0..cfg.predicates.max(1)));
            let o = if rng.gen::<f64>() < cfg.literal_prob {
                Term::literal(format!("v{}", rng.gen_range(0..cfg.literal_values.max(1))))
            } else {
                resource(rng)
            };
            Triple::new(s, p, o).expect("subjects are never literals")
        })
        .collect()
}
