use serde::Serialize;

use super::extract::FeatureExtractor;
use crate::error::{Error, Result};
use crate::sketchdata::ColorPhoto;

/// `1 − cos(a, b)`; a zero vector is at distance 1 from everything.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    1.0 - dot / (na * nb)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalResult {
    /// Per query, `(gallery index, distance)` in ascending distance.
    pub rankings: Vec<Vec<(usize, f64)>>,
    /// `(k, accuracy)` for each requested k; empty without ground truth.
    pub top_k: Vec<(usize, f64)>,
}

impl RetrievalResult {
    /// 1-based rank of `target` for query `q`.
    pub fn rank_of(&self, q: usize, target: usize) -> Option<usize> {
        self.rankings.get(q)?.iter().position(|(g, _)| *g == target).map(|p| p + 1)
    }
}

/// Rank the gallery for every query; ties keep gallery order.
/// `truth[q]` is the gallery index paired with query `q`.
pub fn rank_vectors(
    queries: &[Vec<f64>],
    gallery: &[Vec<f64>],
    truth: Option<&[usize]>,
    k_list: &[usize],
) -> Result<RetrievalResult> {
    if gallery.is_empty() {
        return Err(Error::InvalidInput("retrieval gallery is empty".into()));
    }
    if let Some(t) = truth {
        if t.len() != queries.len() || t.iter().any(|&g| g >= gallery.len()) {
            return Err(Error::InvalidInput("ground truth must name one gallery item per query".into()));
        }
    }
    let rankings: Vec<Vec<(usize, f64)>> = queries
        .iter()
        .map(|q| {
            let mut r: Vec<(usize, f64)> = gallery.iter().enumerate().map(|(i, g)| (i, cosine_distance(q, g))).collect();
            r.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            r
        })
        .collect();
    let top_k = match truth {
        Some(t) if !queries.is_empty() => k_list
            .iter()
            .map(|&k| {
                let hits = rankings
                    .iter()
                    .zip(t)
                    .filter(|(r, g)| r.iter().take(k).any(|(i, _)| i == *g))
                    .count();
                (k, hits as f64 / queries.len() as f64)
            })
            .collect(),
        _ => Vec::new(),
    };
    Ok(RetrievalResult { rankings, top_k })
}

/// Which side passes through a trained generator before embedding.
pub enum Translation<'a> {
    None,
    /// Sketch queries mapped into the photo domain.
    Queries(&'a dyn Fn(&ColorPhoto) -> Result<ColorPhoto>),
    /// Gallery photos mapped into the sketch domain.
    Gallery(&'a dyn Fn(&ColorPhoto) -> Result<ColorPhoto>),
}

pub fn retrieve(
    queries: &[ColorPhoto],
    gallery: &[ColorPhoto],
    translation: Translation<'_>,
    extractor: &dyn FeatureExtractor,
    truth: Option<&[usize]>,
    k_list: &[usize],
) -> Result<RetrievalResult> {
    if gallery.is_empty() {
        return Err(Error::InvalidInput("retrieval gallery is empty".into()));
    }
    let map = |imgs: &[ColorPhoto], f: &dyn Fn(&ColorPhoto) -> Result<ColorPhoto>| -> Result<Vec<ColorPhoto>> {
        imgs.iter().map(f).collect()
    };
    let (q, g) = match translation {
        Translation::None => (queries.to_vec(), gallery.to_vec()),
        Translation::Queries(f) => (map(queries, f)?, gallery.to_vec()),
        Translation::Gallery(f) => (queries.to_vec(), map(gallery, f)?),
    };
    rank_vectors(&extractor.extract(&q)?, &extractor.extract(&g)?, truth, k_list)
}
