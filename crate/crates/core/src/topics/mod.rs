//! LDA over event context sentences (collapsed Gibbs sampling), argmax topic
//! assignment, and topic-level importance.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attribution::{aggregate, AggregateImportance, Reduction};
use crate::error::{Error, Result};
use crate::seeds;

const STOPWORDS_TXT: &str = include_str!("stopwords.txt");
pub const MIN_TOKEN_LEN: usize = 3;
pub const MIN_CORPUS_FREQ: usize = 2;
/// Full-scale topic count.
pub const DEFAULT_TOPICS: usize = 250;
pub const DEFAULT_BETA: f64 = 0.01;

pub fn stopwords() -> &'static BTreeSet<&'static str> {
    static S: OnceLock<BTreeSet<&'static str>> = OnceLock::new();
    S.get_or_init(|| STOPWORDS_TXT.lines().map(str::trim).filter(|l| !l.is_empty()).collect())
}

/// Lowercased alphabetic runs of at least three characters, minus stopwords.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphabetic())
        .filter(|t| t.chars().count() >= MIN_TOKEN_LEN)
        .map(str::to_lowercase)
        .filter(|t| !stopwords().contains(t.as_str()))
        .collect()
}

/// Documents as dense token ids. `source[d]` is the index of the input text
/// that produced document `d`; texts that are empty after filtering are dropped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub vocab: Vec<String>,
    pub counts: Vec<usize>,
    pub docs: Vec<Vec<usize>>,
    pub source: Vec<usize>,
}

impl Corpus {
    pub fn build<S: AsRef<str>>(texts: &[S], min_freq: usize) -> Result<Self> {
        let tokenized: Vec<Vec<String>> = texts.iter().map(|t| tokenize(t.as_ref())).collect();
        let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
        for t in tokenized.iter().flatten() {
            *freq.entry(t).or_default() += 1;
        }
        let vocab: Vec<String> = freq.iter().filter(|(_, &c)| c >= min_freq).map(|(w, _)| w.to_string()).collect();
        let index: BTreeMap<&str, usize> = vocab.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
        let counts = vocab.iter().map(|w| freq[w.as_str()]).collect();
        let mut docs = Vec::new();
        let mut source = Vec::new();
        for (i, toks) in tokenized.iter().enumerate() {
            let ids: Vec<usize> = toks.iter().filter_map(|t| index.get(t.as_str()).copied()).collect();
            if !ids.is_empty() {
                docs.push(ids);
                source.push(i);
            }
        }
        if docs.is_empty() {
            return Err(Error::Insufficient("no document survives tokenization and frequency filtering".into()));
        }
        Ok(Self { vocab, counts, docs, source })
    }

    pub fn n_tokens(&self) -> usize {
        self.docs.iter().map(Vec::len).sum()
    }

    pub fn word_id(&self, w: &str) -> Option<usize> {
        self.vocab.binary_search_by(|v| v.as_str().cmp(w)).ok()
    }
}

/// Collapsed Gibbs state. Exposed so callers can observe counts between sweeps.
pub struct LdaSampler<'a> {
    corpus: &'a Corpus,
    k: usize,
    alpha: f64,
    beta: f64,
    z: Vec<Vec<usize>>,
    n_dk: Vec<Vec<usize>>,
    n_kw: Vec<Vec<usize>>,
    n_k: Vec<usize>,
    rng: ChaCha8Rng,
    probs: Vec<f64>,
    seed: u64,
    sweeps: usize,
}

impl<'a> LdaSampler<'a> {
    pub fn new(corpus: &'a Corpus, k: usize, alpha: f64, beta: f64, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::Invalid("topic count must be at least 1".into()));
        }
        if !(alpha > 0.0 && beta > 0.0) {
            return Err(Error::Invalid(format!("priors must be positive, got α={alpha}, β={beta}")));
        }
        if corpus.docs.is_empty() {
            return Err(Error::Insufficient("empty corpus".into()));
        }
        let v = corpus.vocab.len();
        let mut rng = seeds::rng(seed, "lda");
        let mut n_dk = vec![vec![0; k]; corpus.docs.len()];
        let mut n_kw = vec![vec![0; v]; k];
        let mut n_k = vec![0; k];
        let z: Vec<Vec<usize>> = corpus
            .docs
            .iter()
            .enumerate()
            .map(|(d, doc)| {
                doc.iter()
                    .map(|&w| {
                        let t = rng.gen_range(0..k);
                        n_dk[d][t] += 1;
                        n_kw[t][w] += 1;
                        n_k[t] += 1;
                        t
                    })
                    .collect()
            })
            .collect();
        Ok(Self { corpus, k, alpha, beta, z, n_dk, n_kw, n_k, rng, probs: vec![0.0; k], seed, sweeps: 0 })
    }

    /// One pass over every token.
    pub fn sweep(&mut self) {
        let vb = self.corpus.vocab.len() as f64 * self.beta;
        for (d, doc) in self.corpus.docs.iter().enumerate() {
            for (i, &w) in doc.iter().enumerate() {
                let old = self.z[d][i];
                self.n_dk[d][old] -= 1;
                self.n_kw[old][w] -= 1;
                self.n_k[old] -= 1;
                let mut total = 0.0;
                for t in 0..self.k {
                    total += (self.n_dk[d][t] as f64 + self.alpha) * (self.n_kw[t][w] as f64 + self.beta) / (self.n_k[t] as f64 + vb);
                    self.probs[t] = total;
                }
                let u = self.rng.gen::<f64>() * total;
                let new = self.probs.partition_point(|&c| c <= u).min(self.k - 1);
                self.z[d][i] = new;
                self.n_dk[d][new] += 1;
                self.n_kw[new][w] += 1;
                self.n_k[new] += 1;
            }
        }
        self.sweeps += 1;
    }

    pub fn doc_topic_counts(&self) -> &[Vec<usize>] {
        &self.n_dk
    }

    pub fn assignments(&self) -> &[Vec<usize>] {
        &self.z
    }

    /// Posterior-mean φ and θ from the current counts.
    pub fn finish(self) -> TopicModel {
        let v = self.corpus.vocab.len();
        let vb = v as f64 * self.beta;
        let phi = (0..self.k)
            .map(|t| (0..v).map(|w| (self.n_kw[t][w] as f64 + self.beta) / (self.n_k[t] as f64 + vb)).collect())
            .collect();
        let ka = self.k as f64 * self.alpha;
        let theta = self
            .n_dk
            .iter()
            .zip(&self.corpus.docs)
            .map(|(row, doc)| row.iter().map(|&c| (c as f64 + self.alpha) / (doc.len() as f64 + ka)).collect())
            .collect();
        TopicModel {
            k: self.k,
            alpha: self.alpha,
            beta: self.beta,
            vocab: self.corpus.vocab.clone(),
            phi,
            theta,
            assignments: self.z,
            seed: self.seed,
            iterations: self.sweeps,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub vocab: Vec<String>,
    /// K×V topic-word distributions.
    pub phi: Vec<Vec<f64>>,
    /// D×K document-topic proportions.
    pub theta: Vec<Vec<f64>>,
    pub assignments: Vec<Vec<usize>>,
    pub seed: u64,
    pub iterations: usize,
}

/// Symmetric priors: α = 50/K unless given, β = 0.01 unless given.
pub fn lda_gibbs(corpus: &Corpus, k: usize, alpha: Option<f64>, beta: Option<f64>, iterations: usize, seed: u64) -> Result<TopicModel> {
    if iterations == 0 {
        return Err(Error::Invalid("iterations must be at least 1".into()));
    }
    let alpha = alpha.unwrap_or(50.0 / k.max(1) as f64);
    let mut s = LdaSampler::new(corpus, k, alpha, beta.unwrap_or(DEFAULT_BETA), seed)?;
    for _ in 0..iterations {
        s.sweep();
    }
    Ok(s.finish())
}

impl TopicModel {
    /// The `n` most probable words of topic `t`, ties by word.
    pub fn top_terms(&self, t: usize, n: usize) -> Vec<&str> {
        let mut idx: Vec<usize> = (0..self.vocab.len()).collect();
        idx.sort_by(|&a, &b| self.phi[t][b].total_cmp(&self.phi[t][a]).then_with(|| self.vocab[a].cmp(&self.vocab[b])));
        idx.into_iter().take(n).map(|w| self.vocab[w].as_str()).collect()
    }

    fn word_id(&self, w: &str) -> Option<usize> {
        self.vocab.binary_search_by(|v| v.as_str().cmp(w)).ok()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TopicLabel {
    Topic(usize),
    Unassigned,
}

impl fmt::Display for TopicLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopicLabel::Topic(t) => write!(f, "{t}"),
            TopicLabel::Unassigned => f.write_str("unassigned"),
        }
    }
}

impl Serialize for TopicLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// argmax over topics of Σ log φ over the context's in-vocabulary tokens;
/// ties go to the lower topic id.
pub fn assign_topic(context: &str, model: &TopicModel) -> TopicLabel {
    let ids: Vec<usize> = tokenize(context).iter().filter_map(|t| model.word_id(t)).collect();
    if ids.is_empty() {
        return TopicLabel::Unassigned;
    }
    let mut best = (0, f64::NEG_INFINITY);
    for t in 0..model.k {
        let ll: f64 = ids.iter().map(|&w| model.phi[t][w].ln()).sum();
        if ll > best.1 {
            best = (t, ll);
        }
    }
    TopicLabel::Topic(best.0)
}

/// Mean |score| per topic with polarity shares, ranked descending.
pub fn topic_importance(items: impl IntoIterator<Item = (TopicLabel, f64)>, reduction: Reduction) -> Result<Vec<AggregateImportance<TopicLabel>>> {
    aggregate(items, 1, reduction)
}

#[derive(Serialize)]
struct ReportRow<'a> {
    rank: usize,
    topic: TopicLabel,
    top_terms: &'a str,
    imp_score: f64,
    pos_pct: f64,
    neg_pct: f64,
    freq: usize,
}

/// rank, topic, top_terms, imp_score, pos_pct, neg_pct, freq
pub fn write_topic_report(path: &Path, rows: &[AggregateImportance<TopicLabel>], model: &TopicModel, n_terms: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (i, r) in rows.iter().enumerate() {
        let terms = match r.feature {
            TopicLabel::Topic(t) => model.top_terms(t, n_terms).join(" "),
            TopicLabel::Unassigned => String::new(),
        };
        w.serialize(ReportRow {
            rank: i + 1,
            topic: r.feature,
            top_terms: &terms,
            imp_score: r.abs_importance,
            pos_pct: r.pos_pct,
            neg_pct: r.neg_pct,
            freq: r.freq,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_rules() {
        assert_eq!(tokenize("The Fed raised RATES; it's a 3rd hike by the Fed."), vec!["fed", "raised", "rates", "hike", "fed"]);
    }

    #[test]
    fn corpus_filters_rare_words_and_empty_docs() {
        let c = Corpus::build(&["merger merger bank", "zebra", "bank loans loans"], 2).unwrap();
        assert_eq!(c.vocab, vec!["bank", "loans", "merger"]);
        assert_eq!(c.source, vec![0, 2]);
        assert!(Corpus::build(&["one two"], 2).is_err());
    }

    fn disjoint_corpus() -> Corpus {
        let a = ["oil", "barrel", "crude", "opec", "drilling", "refinery"];
        let b = ["vaccine", "trial", "patient", "dose", "clinical", "drug"];
        let doc = |w: &[&str]| (0..200).map(|i| w[(i * 7) % w.len()]).collect::<Vec<_>>().join(" ");
        Corpus::build(&[doc(&a), doc(&b)], 2).unwrap()
    }

    #[test]
    fn single_topic_is_smoothed_unigram() {
        let c = disjoint_corpus();
        let m = lda_gibbs(&c, 1, None, None, 3, 0).unwrap();
        let n = c.n_tokens() as f64;
        let v = c.vocab.len() as f64;
        for (w, &cnt) in c.counts.iter().enumerate() {
            assert!((m.phi[0][w] - (cnt as f64 + 0.01) / (n + v * 0.01)).abs() < 1e-12);
        }
        assert!(m.assignments.iter().flatten().all(|&t| t == 0));
    }

    #[test]
    fn counts_are_conserved_every_sweep_and_rows_normalize() {
        let c = disjoint_corpus();
        let mut s = LdaSampler::new(&c, 3, 0.5, 0.01, 9).unwrap();
        for _ in 0..20 {
            s.sweep();
            for (row, doc) in s.doc_topic_counts().iter().zip(&c.docs) {
                assert_eq!(row.iter().sum::<usize>(), doc.len());
            }
        }
        let m = s.finish();
        for row in m.phi.iter().chain(&m.theta) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn same_seed_same_assignments() {
        let c = disjoint_corpus();
        let a = lda_gibbs(&c, 2, None, None, 30, 5).unwrap();
        let b = lda_gibbs(&c, 2, None, None, 30, 5).unwrap();
        assert_eq!(a.assignments, b.assignments);
    }

    #[test]
    fn assignment_matches_exhaustive_scan() {
        let c = disjoint_corpus();
        let m = lda_gibbs(&c, 2, None, None, 300, 1).unwrap();
        let ctx = "crude oil meets vaccine dose and drug trial";
        let ids: Vec<usize> = tokenize(ctx).iter().filter_map(|t| c.word_id(t)).collect();
        let scores: Vec<f64> = (0..2).map(|t| ids.iter().map(|&w| m.phi[t][w].ln()).sum()).collect();
        let want = if scores[1] > scores[0] { 1 } else { 0 };
        assert_eq!(assign_topic(ctx, &m), TopicLabel::Topic(want));
        assert_eq!(assign_topic("the of and", &m), TopicLabel::Unassigned);
        let oil = assign_topic("oil barrel opec", &m);
        let vac = assign_topic("vaccine patient", &m);
        assert_ne!(oil, vac);
    }

    #[test]
    fn importance_examples() {
        let rows = topic_importance([(TopicLabel::Topic(1), 1.0), (TopicLabel::Topic(0), -1.0)], Reduction::Mean).unwrap();
        assert_eq!(rows[0].feature, TopicLabel::Topic(0));
        assert_eq!(rows[0].abs_importance, rows[1].abs_importance);
        let rows = topic_importance([(TopicLabel::Topic(3), 0.3), (TopicLabel::Topic(3), -0.1), (TopicLabel::Topic(3), 0.6)], Reduction::Mean).unwrap();
        assert!((rows[0].abs_importance - 1.0 / 3.0).abs() < 1e-12);
        assert!((rows[0].pos_pct - 0.9).abs() < 1e-12);
        assert!((rows[0].pos_pct + rows[0].neg_pct - 1.0).abs() < 1e-12);
    }
}
