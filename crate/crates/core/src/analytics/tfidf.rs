use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{AnalyticsError, WordTokenizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdfMode {
    /// `ln(N / df)`; terms in every document vanish.
    #[default]
    Plain,
    /// `ln((1 + N) / (1 + df)) + 1`.
    Smooth,
}

/// Sorted term table shared by a set of vectors.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    pub terms: Vec<String>,
}

impl Vocabulary {
    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.terms.binary_search_by(|t| t.as_str().cmp(term)).ok()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Sparse nonnegative weights keyed by vocabulary index. Zero weights are
/// not stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorpusVector {
    pub doc_id: String,
    pub entries: BTreeMap<usize, f64>,
}

impl CorpusVector {
    pub fn weight(&self, index: usize) -> f64 {
        self.entries.get(&index).copied().unwrap_or(0.0)
    }

    pub fn norm(&self) -> f64 {
        self.entries.values().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self, dims: usize) -> Vec<f64> {
        let mut out = vec![0.0; dims];
        for (&i, &w) in &self.entries {
            out[i] = w;
        }
        out
    }
}

/// TF-IDF vectors with raw-count tf. The vocabulary is sorted, so document
/// order never changes a weight.
pub fn tfidf_vectors(
    documents: &[(String, String)],
    tokenizer: &dyn WordTokenizer,
    mode: IdfMode,
) -> Result<(Vocabulary, Vec<CorpusVector>), AnalyticsError> {
    if documents.is_empty() {
        return Err(AnalyticsError::Empty("no documents"));
    }
    let counts: Vec<HashMap<String, usize>> = documents
        .iter()
        .map(|(_, text)| {
            let mut m = HashMap::new();
            for w in tokenizer.tokenize(text) {
                *m.entry(w).or_insert(0) += 1;
            }
            m
        })
        .collect();
    let terms: BTreeSet<&String> = counts.iter().flat_map(|m| m.keys()).collect();
    let vocab = Vocabulary {
        terms: terms.into_iter().cloned().collect(),
    };
    let mut df = vec![0usize; vocab.len()];
    for m in &counts {
        for term in m.keys() {
            df[vocab.index_of(term).expect("term in vocabulary")] += 1;
        }
    }
    let n = documents.len() as f64;
    let idf: Vec<f64> = df
        .iter()
        .map(|&d| match mode {
            IdfMode::Plain => (n / d as f64).ln(),
            IdfMode::Smooth => ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0,
        })
        .collect();
    let vectors = documents
        .iter()
        .zip(&counts)
        .map(|((id, _), m)| {
            let entries = m
                .iter()
                .map(|(term, &tf)| {
                    let i = vocab.index_of(term).expect("term in vocabulary");
                    (i, tf as f64 * idf[i])
                })
                .filter(|&(_, w)| w != 0.0)
                .collect();
            CorpusVector {
                doc_id: id.clone(),
                entries,
            }
        })
        .collect();
    Ok((vocab, vectors))
}

/// Cosine similarity; a zero vector is similar to nothing.
pub fn cosine(a: &CorpusVector, b: &CorpusVector) -> f64 {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let (small, large) = if a.entries.len() <= b.entries.len() { (a, b) } else { (b, a) };
    let dot: f64 = small
        .entries
        .iter()
        .map(|(i, w)| w * large.weight(*i))
        .sum();
    (dot / (na * nb)).clamp(0.0, 1.0)
}

/// Mean cosine similarity between responses to the same query, pairing
/// vectors by `doc_id`.
pub fn mean_pairwise_similarity(
    group_a: &[CorpusVector],
    group_b: &[CorpusVector],
) -> Result<f64, AnalyticsError> {
    let index = |g: &[CorpusVector], name: &str| -> Result<BTreeMap<String, usize>, AnalyticsError> {
        let mut m = BTreeMap::new();
        for (i, v) in g.iter().enumerate() {
            if m.insert(v.doc_id.clone(), i).is_some() {
                return Err(AnalyticsError::Pairing(format!("duplicate id {:?} in {name}", v.doc_id)));
            }
        }
        Ok(m)
    };
    let a = index(group_a, "first group")?;
    let b = index(group_b, "second group")?;
    if a.is_empty() {
        return Err(AnalyticsError::Empty("no queries to pair"));
    }
    if let Some(id) = a.keys().find(|k| !b.contains_key(*k)).or_else(|| b.keys().find(|k| !a.contains_key(*k))) {
        return Err(AnalyticsError::Pairing(format!("query {id:?} missing from one group")));
    }
    let total: f64 = a
        .iter()
        .map(|(id, &i)| cosine(&group_a[i], &group_b[b[id]]))
        .sum();
    Ok(total / a.len() as f64)
}
