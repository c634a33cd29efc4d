use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimilarityError {
    #[error("need at least two texts, got {0}")]
    EmptyGroup(usize),
    #[error("embedder failed: {0}")]
    Embedder(String),
}

/// Maps a group of texts to vectors. Embedding a whole group at once lets
/// vocabulary-based embedders share one vector space.
pub trait Embedder: Send + Sync {
    fn embed_all(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, SimilarityError>;
}

/// L2-normalized term frequencies over lowercased unigrams.
#[derive(Debug, Clone, Copy, Default)]
pub struct TermFrequencyEmbedder;

impl Embedder for TermFrequencyEmbedder {
    fn embed_all(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, SimilarityError> {
        let docs: Vec<Vec<String>> = texts
            .iter()
            .map(|t| super::textmetrics::lexical_words(t))
            .collect();
        let mut vocab = BTreeMap::new();
        for w in docs.iter().flatten() {
            let next = vocab.len();
            vocab.entry(w.as_str()).or_insert(next);
        }
        Ok(docs
            .iter()
            .map(|doc| {
                let mut v = vec![0.0; vocab.len()];
                for w in doc {
                    v[vocab[w.as_str()]] += 1.0;
                }
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    v.iter_mut().for_each(|x| *x /= norm);
                }
                v
            })
            .collect())
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    /// Mean over unordered pairs.
    pub mean: f64,
    pub matrix: Vec<Vec<f64>>,
}

pub fn pairwise_similarity(
    texts: &[&str],
    embedder: &dyn Embedder,
) -> Result<Similarity, SimilarityError> {
    if texts.len() < 2 {
        return Err(SimilarityError::EmptyGroup(texts.len()));
    }
    let vectors = embedder.embed_all(texts)?;
    let n = texts.len();
    let mut matrix = vec![vec![1.0; n]; n];
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let c = cosine(&vectors[i], &vectors[j]);
            matrix[i][j] = c;
            matrix[j][i] = c;
            sum += c;
        }
    }
    Ok(Similarity {
        mean: sum / (n * (n - 1) / 2) as f64,
        matrix,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_and_disjoint() {
        let e = TermFrequencyEmbedder;
        let s = pairwise_similarity(&["see you at noon", "see you at noon"], &e).unwrap();
        assert!((s.mean - 1.0).abs() < 1e-12);
        let s = pairwise_similarity(&["alpha beta", "gamma delta"], &e).unwrap();
        assert_eq!(s.mean, 0.0);
        assert_eq!(
            pairwise_similarity(&["one"], &e),
            Err(SimilarityError::EmptyGroup(1))
        );
    }

    #[test]
    fn mean_of_three_pairs() {
        let e = TermFrequencyEmbedder;
        let texts = ["a b", "a c", "d e"];
        let s = pairwise_similarity(&texts, &e).unwrap();
        let expected = (0.5 + 0.0 + 0.0) / 3.0;
        assert!((s.mean - expected).abs() < 1e-12);
        for i in 0..3 {
            assert_eq!(s.matrix[i][i], 1.0);
            for j in 0..3 {
                assert_eq!(s.matrix[i][j], s.matrix[j][i]);
            }
        }
    }
}
