//! Stage one: sketch ↔ grayscale translation with noise-aware training.

pub mod losses;
pub mod networks;
pub mod train;

pub use losses::{
    l1, loss_cycle, loss_discriminator, loss_generator_adv, loss_identity, loss_self_supervised, lsgan_discriminator,
    lsgan_generator, Critic, CriticFn, ImageMap,
};
pub use networks::{
    apply_attention, attention_from_logits, attention_mask, discriminator_forward, generator_forward, AttentionMap,
    AttentionModule, Discriminator, DiscriminatorConfig, Generator, GeneratorConfig, GeneratorOutput,
};
pub use train::{
    generator_terms, lr_schedule, lr_schedule_with, ImageBuffer, ShapeBatch, ShapeHyper, ShapeItem,
    ShapeLossReport, ShapeNetConfig, ShapeNetworks, ShapeTrainer,
};
