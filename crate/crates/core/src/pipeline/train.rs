use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use candle_core::{DType, Device};
use log::{info, warn};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::checkpoint::{Checkpoint, RngState, Stage};
use super::config::TrainingConfig;
use crate::content::{ContentLossReport, ContentNetworks, ContentTrainer, StyleFeatures};
use crate::error::{Error, Result};
use crate::nn::vgg::VggFeatures;
use crate::shape::{lr_schedule_with, ShapeBatch, ShapeItem, ShapeLossReport, ShapeNetworks, ShapeTrainer};
use crate::sketchdata::{build_noise_mask_pool, load_dataset, NoiseMaskPool, NoiseSampler, UnpairedDataset};

pub const LOCK_FILE: &str = "train.lock";
pub const RESOLVED_CONFIG: &str = "config.resolved.toml";
pub const SHAPE_CHECKPOINT: &str = "shape.ckpt";
pub const CONTENT_CHECKPOINT: &str = "content.ckpt";
pub const SHAPE_LOG: &str = "shape_losses.csv";
pub const CONTENT_LOG: &str = "content_losses.csv";
pub const NOISE_POOL: &str = "noise_pool.bin";

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(out: &Path) -> Result<Self> {
        std::fs::create_dir_all(out)?;
        let path = out.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Config(format!(
                "{} is locked by another training run (remove {} if stale)",
                out.display(),
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

/// Write the fully resolved configuration next to the run's outputs.
pub fn write_resolved_config(out: &Path, cfg: &TrainingConfig) -> Result<PathBuf> {
    std::fs::create_dir_all(out)?;
    let path = out.join(RESOLVED_CONFIG);
    std::fs::write(&path, cfg.to_toml_string()?)?;
    Ok(path)
}

pub fn load_training_data(cfg: &TrainingConfig) -> Result<UnpairedDataset> {
    let root = cfg
        .data
        .root
        .as_ref()
        .ok_or_else(|| Error::Config("[data] root is not set".into()))?;
    load_dataset(root, cfg.data.image_size)
}

/// Prebuilt pool when configured, else built from `data`'s sketches.
pub fn noise_pool_for(cfg: &TrainingConfig, data: &UnpairedDataset) -> Result<NoiseMaskPool> {
    match &cfg.data.noise_pool {
        Some(p) => NoiseMaskPool::load(p),
        None => build_noise_mask_pool(
            &data.sketches,
            cfg.data.noise_crop_size,
            cfg.data.noise_density_threshold,
            cfg.data.noise_pool_size,
            cfg.data.seed,
        ),
    }
}

/// Build and save the noise-mask pool for a dataset.
pub fn prepare_data(cfg: &TrainingConfig, out: &Path) -> Result<NoiseMaskPool> {
    let data = load_training_data(cfg)?;
    let pool = build_noise_mask_pool(
        &data.sketches,
        cfg.data.noise_crop_size,
        cfg.data.noise_density_threshold,
        cfg.data.noise_pool_size,
        cfg.data.seed,
    )?;
    std::fs::create_dir_all(out)?;
    pool.save(out.join(NOISE_POOL))?;
    write_resolved_config(out, cfg)?;
    info!(
        "{} sketches, {} photos, {} noise masks → {}",
        data.num_sketches(),
        data.num_photos(),
        pool.len(),
        out.join(NOISE_POOL).display()
    );
    Ok(pool)
}

fn csv_writer(path: &Path, header: &str) -> Result<File> {
    let mut f = File::create(path)?;
    writeln!(f, "{header}")?;
    Ok(f)
}

pub struct ShapeRun {
    pub reports: Vec<ShapeLossReport>,
    pub checkpoint: PathBuf,
    pub networks: ShapeNetworks,
}

/// Shape-stage training for `cfg.shape.epochs` epochs. One epoch visits the
/// sketches in a seeded shuffled order; each is paired with a uniformly
/// drawn grayscale photo (no pairing is assumed).
pub fn train_shape(cfg: &TrainingConfig, data: &UnpairedDataset, pool: &NoiseMaskPool, out: &Path) -> Result<ShapeRun> {
    cfg.validate()?;
    if data.sketches.is_empty() || data.grayscales.is_empty() {
        return Err(Error::Config("shape training needs sketches and photos".into()));
    }
    let _lock = RunLock::acquire(out)?;
    write_resolved_config(out, cfg)?;
    let s = &cfg.shape;
    let nets = ShapeNetworks::new(s.net(), s.seed, &Device::Cpu, DType::F32)?;
    let mut trainer = ShapeTrainer::new(nets, s.hyper(), s.seed.wrapping_add(1))?;
    let sampler = NoiseSampler::new(pool, &data.sketches, s.p_complex, s.p_distractive)?.with_patch_size(s.patch_size);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.data.seed);
    let mut log = csv_writer(
        &out.join(SHAPE_LOG),
        "epoch,step,lr,adv_t,adv_t_prime,cycle,identity,self_supervised,total,disc_g,disc_s",
    )?;
    let ck_path = out.join(SHAPE_CHECKPOINT);
    let config_text = cfg.to_toml_string()?;
    let mut reports = Vec::new();
    let mut order: Vec<usize> = (0..data.num_sketches()).collect();
    for epoch in 0..s.epochs {
        let lr = lr_schedule_with(epoch, s.epochs, s.base_lr, s.lr_constant_epochs);
        trainer.set_learning_rate(lr);
        order.shuffle(&mut rng);
        let steps = order.len().div_ceil(s.batch_size);
        let steps = s.max_steps_per_epoch.map_or(steps, |m| steps.min(m));
        for chunk in order.chunks(s.batch_size).take(steps) {
            let mut items = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let noise = sampler.sample(&data.sketches[i], Some(i), &mut rng)?;
                let g = rng.random_range(0..data.grayscales.len() as u32) as usize;
                items.push(ShapeItem {
                    sketch: noise.sketch,
                    clean: noise.clean,
                    tag: noise.tag,
                    gray: data.grayscales[g].clone(),
                });
            }
            let r = trainer.step(&ShapeBatch { items })?;
            writeln!(
                log,
                "{epoch},{},{lr},{},{},{},{},{},{},{},{}",
                trainer.steps_taken(),
                r.adv_t,
                r.adv_t_prime,
                r.cycle,
                r.identity,
                r.self_supervised,
                r.total,
                r.disc_g,
                r.disc_s
            )?;
            reports.push(r);
        }
        Checkpoint::capture(
            Stage::Shape,
            epoch as u64 + 1,
            trainer.steps_taken(),
            &trainer.nets.params,
            serde_json::to_value(trainer.nets.config)?,
            config_text.clone(),
            Some(RngState::capture(&rng)),
        )?
        .save(&ck_path)?;
        info!("shape epoch {}/{} lr {lr:.2e} steps {}", epoch + 1, s.epochs, trainer.steps_taken());
    }
    log.flush()?;
    Ok(ShapeRun { reports, checkpoint: ck_path, networks: trainer.nets })
}

pub struct ContentRun {
    pub reports: Vec<ContentLossReport>,
    pub checkpoint: PathBuf,
    pub networks: ContentNetworks,
}

/// The configured VGG-19 style extractor, or `None` (with a warning) when
/// no weights path is set.
pub fn style_extractor_for(cfg: &TrainingConfig) -> Result<Option<Box<dyn StyleFeatures + Send + Sync>>> {
    match &cfg.content.style_extractor_path {
        Some(p) => Ok(Some(Box::new(VggFeatures::style_extractor(p, &Device::Cpu, DType::F32)?))),
        None => {
            warn!("no style_extractor_path configured; training the no-reference path only");
            Ok(None)
        }
    }
}

/// Content-stage training on the photos' grayscale versions. `D_I` sees a
/// uniformly drawn photo as its real sample; references come from the
/// photo set with probability `p_reference`.
pub fn train_content(
    cfg: &TrainingConfig,
    data: &UnpairedDataset,
    style: Option<Box<dyn StyleFeatures + Send + Sync>>,
    out: &Path,
) -> Result<ContentRun> {
    cfg.validate()?;
    if data.photos.is_empty() {
        return Err(Error::Config("content training needs photos".into()));
    }
    let _lock = RunLock::acquire(out)?;
    write_resolved_config(out, cfg)?;
    let c = &cfg.content;
    let nets = ContentNetworks::new(c.net(), c.seed, &Device::Cpu, DType::F32)?;
    let mut trainer = ContentTrainer::new(nets, c.hyper(), style, c.seed.wrapping_add(1))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.data.seed.wrapping_add(1));
    let mut log = csv_writer(
        &out.join(CONTENT_LOG),
        "epoch,step,lr,used_reference,adv,intensity,style,content,total,disc_i",
    )?;
    let ck_path = out.join(CONTENT_CHECKPOINT);
    let config_text = cfg.to_toml_string()?;
    let n = data.num_photos();
    let mut reports = Vec::new();
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..c.epochs {
        let lr = lr_schedule_with(epoch, c.epochs, c.base_lr, c.lr_constant_epochs);
        trainer.set_learning_rate(lr);
        order.shuffle(&mut rng);
        let steps = c.max_steps_per_epoch.map_or(n, |m| n.min(m));
        for &i in order.iter().take(steps) {
            let real = &data.photos[trainer.pick(n)];
            let reference = if trainer.draw_reference() { Some(&data.photos[trainer.pick(n)]) } else { None };
            let r = trainer.step(&data.grayscales[i], real, reference)?;
            writeln!(
                log,
                "{epoch},{},{lr},{},{},{},{},{},{},{}",
                trainer.steps_taken(),
                u8::from(r.used_reference),
                r.adv,
                r.intensity,
                r.style,
                r.content,
                r.total,
                r.disc_i
            )?;
            reports.push(r);
        }
        Checkpoint::capture(
            Stage::Content,
            epoch as u64 + 1,
            trainer.steps_taken(),
            &trainer.nets.params,
            serde_json::to_value(trainer.nets.config)?,
            config_text.clone(),
            Some(RngState::capture(&rng)),
        )?
        .save(&ck_path)?;
        info!("content epoch {}/{} lr {lr:.2e} steps {}", epoch + 1, c.epochs, trainer.steps_taken());
    }
    log.flush()?;
    Ok(ContentRun { reports, checkpoint: ck_path, networks: trainer.nets })
}
