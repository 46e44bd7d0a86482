use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::warn;

use sketch2photo::metrics::{
    compute_fid, lpips_diversity, retrieve, write_report, FeatureExtractor, InceptionExtractor, Lpips, MeanAbsDiff,
    MetricEntry, PerceptualMetric, PixelExtractor, ResNetExtractor, Translation,
};
use sketch2photo::pipeline::train::{load_training_data, noise_pool_for, style_extractor_for, write_resolved_config};
use sketch2photo::pipeline::{prepare_data, serve, train_content, train_shape, Synthesizer, TrainingConfig};
use sketch2photo::sketchdata::{load_photo_dir, load_sketch_dir, ColorPhoto, SketchImage};

#[derive(Parser)]
#[command(name = "sketch2photo", version, about = "Two-stage unsupervised sketch-to-photo synthesis")]
struct Cli {
    /// TOML config; falls back to $SKETCH2PHOTO_CONFIG, then built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct Checkpoints {
    #[arg(long)]
    shape_ckpt: Option<PathBuf>,
    #[arg(long)]
    content_ckpt: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    /// Rank raw sketches against raw photos.
    None,
    /// Translate sketch queries to photos.
    Sketch2photo,
    /// Translate gallery photos to sketches.
    Photo2sketch,
}

#[derive(Subcommand)]
enum Command {
    /// Build the noise-mask pool for a dataset.
    PrepareData {
        #[arg(long)]
        data_root: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the sketch ↔ grayscale stage.
    TrainShape {
        #[arg(long)]
        data_root: Option<PathBuf>,
        #[arg(long)]
        noise_pool: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        steps_per_epoch: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the colorization stage.
    TrainContent {
        #[arg(long)]
        data_root: Option<PathBuf>,
        #[arg(long)]
        style_weights: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        steps_per_epoch: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sketch → grayscale.png and color.png.
    Synthesize {
        #[arg(long)]
        sketch: PathBuf,
        #[arg(long = "ref")]
        reference: Option<PathBuf>,
        #[command(flatten)]
        ckpt: Checkpoints,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Photo → sketch.png.
    Photo2sketch {
        #[arg(long)]
        photo: PathBuf,
        #[command(flatten)]
        ckpt: Checkpoints,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Fréchet distance between two photo directories.
    EvalFid {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        fake: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean pairwise perceptual distance of outputs under different references.
    EvalLpips {
        #[arg(long)]
        sketches: PathBuf,
        #[arg(long)]
        references: PathBuf,
        #[command(flatten)]
        ckpt: Checkpoints,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Translation-based retrieval; files with equal stems count as pairs.
    Retrieve {
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        gallery: PathBuf,
        #[arg(long, value_enum, default_value = "photo2sketch")]
        direction: Direction,
        #[command(flatten)]
        ckpt: Checkpoints,
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<usize>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// HTTP inference service.
    Serve {
        #[arg(long)]
        addr: Option<String>,
        #[arg(long)]
        gallery: Option<PathBuf>,
        #[command(flatten)]
        ckpt: Checkpoints,
    },
}

fn with_data_root(cfg: &mut TrainingConfig, root: Option<PathBuf>) {
    if root.is_some() {
        cfg.data.root = root;
    }
}

fn synthesizer(cfg: &TrainingConfig, ck: &Checkpoints, need_content: bool) -> Result<Synthesizer> {
    let shape = ck.shape_ckpt.clone().or_else(|| cfg.serve.shape_checkpoint.clone());
    let content = ck.content_ckpt.clone().or_else(|| cfg.serve.content_checkpoint.clone());
    if shape.is_none() {
        bail!("no shape checkpoint (use --shape-ckpt or [serve] shape_checkpoint)");
    }
    if need_content && content.is_none() {
        bail!("no content checkpoint (use --content-ckpt or [serve] content_checkpoint)");
    }
    Ok(Synthesizer::load(shape.as_deref(), content.as_deref())?)
}

fn read_sketch(path: &Path, size: usize) -> Result<SketchImage> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(SketchImage::from_png_bytes(&bytes)?.normalized(size))
}

fn read_photo(path: &Path, size: usize) -> Result<ColorPhoto> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(ColorPhoto::from_png_bytes(&bytes)?.normalized(size))
}

fn stub_extractor(cfg: &TrainingConfig, what: &str) -> Box<dyn FeatureExtractor> {
    warn!("no {what} weights configured; using the pixel stand-in extractor");
    Box::new(PixelExtractor { size: cfg.eval.stub_extractor_size })
}

fn report(out: Option<&Path>, name: &str, entries: &[MetricEntry]) -> Result<()> {
    for e in entries {
        println!("{} {} (n={}, extractor={})", e.metric, e.value, e.n, e.extractor);
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        write_report(dir.join(name), entries)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = TrainingConfig::resolve(cli.config.as_deref())?;
    let size = cfg.data.image_size;
    match cli.command {
        Command::PrepareData { data_root, out } => {
            with_data_root(&mut cfg, data_root);
            let pool = prepare_data(&cfg, &out)?;
            println!("{} noise masks written to {}", pool.len(), out.display());
        }
        Command::TrainShape { data_root, noise_pool, epochs, steps_per_epoch, out } => {
            with_data_root(&mut cfg, data_root);
            if noise_pool.is_some() {
                cfg.data.noise_pool = noise_pool;
            }
            if let Some(e) = epochs {
                cfg.shape.epochs = e;
            }
            if steps_per_epoch.is_some() {
                cfg.shape.max_steps_per_epoch = steps_per_epoch;
            }
            cfg.validate()?;
            let data = load_training_data(&cfg)?;
            let pool = noise_pool_for(&cfg, &data)?;
            let run = train_shape(&cfg, &data, &pool, &out)?;
            println!("{} steps, checkpoint {}", run.reports.len(), run.checkpoint.display());
        }
        Command::TrainContent { data_root, style_weights, epochs, steps_per_epoch, out } => {
            with_data_root(&mut cfg, data_root);
            if style_weights.is_some() {
                cfg.content.style_extractor_path = style_weights;
            }
            if let Some(e) = epochs {
                cfg.content.epochs = e;
            }
            if steps_per_epoch.is_some() {
                cfg.content.max_steps_per_epoch = steps_per_epoch;
            }
            cfg.validate()?;
            let data = load_training_data(&cfg)?;
            let run = train_content(&cfg, &data, style_extractor_for(&cfg)?, &out)?;
            println!("{} steps, checkpoint {}", run.reports.len(), run.checkpoint.display());
        }
        Command::Synthesize { sketch, reference, ckpt, out } => {
            let model = synthesizer(&cfg, &ckpt, true)?;
            let s = read_sketch(&sketch, size)?;
            let r = reference.as_deref().map(|p| read_photo(p, size)).transpose()?;
            let (gray, color) = model.synthesize(&s, r.as_ref())?;
            std::fs::create_dir_all(&out)?;
            gray.save_png(out.join("gray.png"))?;
            color.save_png(out.join("color.png"))?;
            write_resolved_config(&out, &cfg)?;
            println!("{} {}", out.join("gray.png").display(), out.join("color.png").display());
        }
        Command::Photo2sketch { photo, ckpt, out } => {
            let model = synthesizer(&cfg, &ckpt, false)?;
            let sketch = model.photo_to_sketch(&read_photo(&photo, size)?)?;
            std::fs::create_dir_all(&out)?;
            sketch.save_png(out.join("sketch.png"))?;
            write_resolved_config(&out, &cfg)?;
            println!("{}", out.join("sketch.png").display());
        }
        Command::EvalFid { real, fake, out } => {
            let real: Vec<ColorPhoto> = load_photo_dir(&real, size)?.into_iter().map(|(_, p)| p).collect();
            let fake: Vec<ColorPhoto> = load_photo_dir(&fake, size)?.into_iter().map(|(_, p)| p).collect();
            let extractor: Box<dyn FeatureExtractor> = match &cfg.eval.inception_path {
                Some(p) => Box::new(InceptionExtractor::load(p)?),
                None => stub_extractor(&cfg, "Inception-v3"),
            };
            let fid = compute_fid(&real, &fake, extractor.as_ref())?;
            let entry = MetricEntry { metric: "fid".into(), value: fid, n: fake.len(), extractor: extractor.id() };
            report(out.as_deref(), "fid.txt", &[entry])?;
        }
        Command::EvalLpips { sketches, references, ckpt, out } => {
            let model = synthesizer(&cfg, &ckpt, true)?;
            let metric: Box<dyn PerceptualMetric> = match (&cfg.eval.lpips_vgg_path, &cfg.eval.lpips_heads_path) {
                (Some(v), Some(h)) => Box::new(Lpips::load(v, h)?),
                _ => {
                    warn!("no LPIPS weights configured; using mean absolute difference");
                    Box::new(MeanAbsDiff)
                }
            };
            let refs: Vec<ColorPhoto> = load_photo_dir(&references, size)?
                .into_iter()
                .take(cfg.eval.references_per_input)
                .map(|(_, p)| p)
                .collect();
            let inputs = load_sketch_dir(&sketches, size)?;
            if inputs.is_empty() {
                bail!("no sketches in {}", sketches.display());
            }
            let mut total = 0.0;
            for (_, sketch, _) in &inputs {
                let outs = refs
                    .iter()
                    .map(|r| model.synthesize(sketch, Some(r)).map(|(_, c)| c))
                    .collect::<sketch2photo::Result<Vec<_>>>()?;
                total += lpips_diversity(&outs, metric.as_ref())?;
            }
            let entry = MetricEntry {
                metric: "lpips_diversity".into(),
                value: total / inputs.len() as f64,
                n: inputs.len(),
                extractor: metric.id(),
            };
            report(out.as_deref(), "lpips.txt", &[entry])?;
        }
        Command::Retrieve { queries, gallery, direction, ckpt, k, out } => {
            let q = load_sketch_dir(&queries, size)?;
            let g = load_photo_dir(&gallery, size)?;
            let stem = |n: &str| Path::new(n).file_stem().map(|s| s.to_string_lossy().into_owned());
            let truth: Option<Vec<usize>> = q
                .iter()
                .map(|(n, _, _)| g.iter().position(|(gn, _)| stem(gn) == stem(n)))
                .collect();
            let qs: Vec<ColorPhoto> = q.iter().map(|(_, s, _)| ColorPhoto::from(s)).collect();
            let gs: Vec<ColorPhoto> = g.into_iter().map(|(_, p)| p).collect();
            let k_list = k.unwrap_or_else(|| cfg.eval.top_k.clone());
            let (model, weights) = match direction {
                Direction::None => (None, &cfg.eval.resnet_photo_path),
                Direction::Sketch2photo => (Some(synthesizer(&cfg, &ckpt, true)?), &cfg.eval.resnet_photo_path),
                Direction::Photo2sketch => (Some(synthesizer(&cfg, &ckpt, false)?), &cfg.eval.resnet_sketch_path),
            };
            let extractor: Box<dyn FeatureExtractor> = match weights {
                Some(p) => Box::new(ResNetExtractor::load(p)?),
                None => stub_extractor(&cfg, "ResNet-18"),
            };
            let to_photo = |c: &ColorPhoto| -> sketch2photo::Result<ColorPhoto> {
                let m = model.as_ref().expect("model loaded for this direction");
                let s = SketchImage::from(sketch2photo::sketchdata::to_grayscale(c));
                Ok(m.synthesize(&s, None)?.1)
            };
            let to_sketch = |c: &ColorPhoto| -> sketch2photo::Result<ColorPhoto> {
                let m = model.as_ref().expect("model loaded for this direction");
                Ok(ColorPhoto::from(&m.photo_to_sketch(c)?))
            };
            let translation = match direction {
                Direction::None => Translation::None,
                Direction::Sketch2photo => Translation::Queries(&to_photo),
                Direction::Photo2sketch => Translation::Gallery(&to_sketch),
            };
            let result = retrieve(&qs, &gs, translation, extractor.as_ref(), truth.as_deref(), &k_list)?;
            if truth.is_none() {
                warn!("some queries have no same-named gallery item; accuracy not reported");
            }
            let entries: Vec<MetricEntry> = result
                .top_k
                .iter()
                .map(|(k, acc)| MetricEntry {
                    metric: format!("top{k}"),
                    value: *acc,
                    n: qs.len(),
                    extractor: extractor.id(),
                })
                .collect();
            report(out.as_deref(), "retrieval.txt", &entries)?;
            if let Some(dir) = out {
                std::fs::write(dir.join("rankings.json"), serde_json::to_string_pretty(&result)?)?;
            }
        }
        Command::Serve { addr, gallery, ckpt } => {
            if let Some(a) = addr {
                cfg.serve.addr = a;
            }
            if gallery.is_some() {
                cfg.serve.gallery_dir = gallery;
            }
            if ckpt.shape_ckpt.is_some() {
                cfg.serve.shape_checkpoint = ckpt.shape_ckpt;
            }
            if ckpt.content_ckpt.is_some() {
                cfg.serve.content_checkpoint = ckpt.content_ckpt;
            }
            cfg.validate()?;
            tokio::runtime::Runtime::new()?.block_on(serve::serve(&cfg))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
