//! Stage two: colorizing grayscale photos, with or without a reference.

pub mod adain;
pub mod lab;
pub mod losses;
pub mod networks;
pub mod train;

pub use adain::{adain, adain_with_stats, StyleStats};
pub use lab::{rgb_to_lab, rgb_to_lab_tensor};
pub use losses::{loss_content, loss_intensity, loss_style, StyleFeatures, StyleFn};
pub use networks::{ContentNetConfig, Decoder, Encoder};
pub use train::{
    content_terms, draw_reference, ContentHyper, ContentLossReport, ContentNetworks, ContentTerms, ContentTrainer,
};
