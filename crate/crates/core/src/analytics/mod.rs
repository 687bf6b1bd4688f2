//! Distribution analytics over synthesized corpora.
//!
//! Lengths and ratios are measured with a pluggable word tokenizer, not with
//! any model's tokenizer, so figures are comparable in shape only.

mod pca;
mod stats;
mod svg;
mod tfidf;

use thiserror::Error;

pub use pca::{jacobi_eigen, pca_project, pca_project_dense, ProjectedPoint, ProjectionReport};
pub use stats::{
    length_stats, origin_ratio, percentile, word_frequency_table, FrequencyTable, LengthReport,
    LengthSummary, LengthUnit, OriginRatio,
};
pub use svg::scatter_svg;
pub use tfidf::{cosine, mean_pairwise_similarity, tfidf_vectors, CorpusVector, IdfMode, Vocabulary};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyticsError {
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("pairing: {0}")]
    Pairing(String),
    #[error("need at least {needed} vectors, got {got}")]
    TooFewVectors { needed: usize, got: usize },
    #[error("need at least {needed} dimensions, got {got}")]
    TooFewDimensions { needed: usize, got: usize },
}

/// Splits text into words for analytics.
pub trait WordTokenizer: Send + Sync {
    fn tokenize(&self, text: &str) -> Vec<String>;
}

/// Lowercase words split on whitespace and punctuation.
#[derive(Debug, Clone, Copy, Default)]
pub struct DefaultTokenizer;

impl WordTokenizer for DefaultTokenizer {
    fn tokenize(&self, text: &str) -> Vec<String> {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .map(str::to_lowercase)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_tokenizer_splits_punctuation() {
        assert_eq!(
            DefaultTokenizer.tokenize("Okay, let's use gcd(a,b)!"),
            vec!["okay", "let", "s", "use", "gcd", "a", "b"]
        );
    }
}
