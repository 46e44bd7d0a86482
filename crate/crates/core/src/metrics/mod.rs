//! Evaluation: FID, LPIPS diversity and translation-based retrieval.

pub mod extract;
pub mod fid;
pub mod lpips;
pub mod retrieval;

use std::fmt::Write as _;
use std::path::Path;

pub use extract::{FeatureExtractor, InceptionExtractor, PixelExtractor, ResNetExtractor};
pub use fid::{activation_stats, activation_stats_from_vectors, compute_fid, frechet_distance, ActivationStats};
pub use lpips::{lpips_diversity, Lpips, MeanAbsDiff, PerceptualMetric};
pub use retrieval::{cosine_distance, rank_vectors, retrieve, RetrievalResult, Translation};

use crate::error::Result;

/// One line of a metric report.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricEntry {
    pub metric: String,
    pub value: f64,
    pub n: usize,
    pub extractor: String,
}

/// Flat `key=value` text, one block per metric, blocks separated by a blank line.
pub fn format_report(entries: &[MetricEntry]) -> String {
    let mut out = String::new();
    for (i, e) in entries.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "metric={}\nvalue={}\nn={}\nextractor={}", e.metric, e.value, e.n, e.extractor);
    }
    out
}

pub fn write_report(path: impl AsRef<Path>, entries: &[MetricEntry]) -> Result<()> {
    std::fs::write(path, format_report(entries))?;
    Ok(())
}
