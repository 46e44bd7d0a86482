use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::ptr;

use candle_core::{DType, Device};
use sketch2photo::content::{ContentNetConfig, ContentNetworks};
use sketch2photo::pipeline::{Checkpoint, Stage};
use sketch2photo::shape::{ShapeNetConfig, ShapeNetworks};
use sketch2photo_ffi::*;

fn checkpoints(dir: &Path) -> (CString, CString) {
    let shape = ShapeNetworks::new(
        ShapeNetConfig { base_channels: 4, residual_blocks: 1, disc_channels: 4, attention: true },
        1,
        &Device::Cpu,
        DType::F32,
    )
    .unwrap();
    let content = ContentNetworks::new(
        ContentNetConfig { base_channels: 2, residual_blocks: 1, disc_channels: 4 },
        2,
        &Device::Cpu,
        DType::F32,
    )
    .unwrap();
    let (s, c) = (dir.join("shape.ckpt"), dir.join("content.ckpt"));
    Checkpoint::capture(Stage::Shape, 0, 0, &shape.params, serde_value(&shape.config), String::new(), None)
        .unwrap()
        .save(&s)
        .unwrap();
    Checkpoint::capture(Stage::Content, 0, 0, &content.params, serde_value(&content.config), String::new(), None)
        .unwrap()
        .save(&c)
        .unwrap();
    (cpath(&s), cpath(&c))
}

fn serde_value<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap()
}

fn cpath(p: &PathBuf) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(s2p_last_error()) }.to_string_lossy().into_owned()
}

fn load(shape: &CString, content: Option<&CString>) -> *mut S2pModel {
    let mut m = ptr::null_mut();
    let st = unsafe { s2p_model_load(shape.as_ptr(), content.map_or(ptr::null(), |c| c.as_ptr()), &mut m) };
    assert_eq!(st, S2pStatus::Ok, "{}", last_error());
    m
}

#[test]
fn null_arguments_are_reported() {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { s2p_model_load(ptr::null(), ptr::null(), &mut m) }, S2pStatus::NullArgument);
    assert!(last_error().contains("shape_path"));
    assert!(m.is_null());
    let p = CString::new("x").unwrap();
    assert_eq!(unsafe { s2p_model_load(p.as_ptr(), ptr::null(), ptr::null_mut()) }, S2pStatus::NullArgument);
    let mut out = [0f32; 16];
    let st = unsafe { s2p_synthesize(ptr::null(), out.as_ptr(), 4, 4, ptr::null(), out.as_mut_ptr(), out.as_mut_ptr()) };
    assert_eq!(st, S2pStatus::NullArgument);
    assert!(unsafe { s2p_model_version(ptr::null()) }.is_null());
    unsafe { s2p_model_free(ptr::null_mut()) };
}

#[test]
fn missing_checkpoint_is_a_config_error() {
    let p = CString::new("/nonexistent/shape.ckpt").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { s2p_model_load(p.as_ptr(), ptr::null(), &mut m) }, S2pStatus::Config);
    assert!(last_error().contains("/nonexistent/shape.ckpt"));
}

#[test]
fn corrupt_checkpoint_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.ckpt");
    std::fs::write(&bad, b"definitely not a checkpoint").unwrap();
    let mut m = ptr::null_mut();
    let st = unsafe { s2p_model_load(cpath(&bad).as_ptr(), ptr::null(), &mut m) };
    assert!(matches!(st, S2pStatus::Integrity | S2pStatus::UnsupportedVersion), "{st:?}");
    assert!(m.is_null());
}

#[test]
fn synthesis_and_photo_to_sketch_fill_buffers_in_range() {
    let dir = tempfile::tempdir().unwrap();
    let (s, c) = checkpoints(dir.path());
    let m = load(&s, Some(&c));
    let version = unsafe { CStr::from_ptr(s2p_model_version(m)) }.to_str().unwrap().to_string();
    assert_eq!(version.len(), 12);

    let (w, h) = (16usize, 12usize);
    let sketch: Vec<f32> = (0..w * h).map(|i| if i % 5 == 0 { 0.0 } else { 1.0 }).collect();
    let reference: Vec<f32> = (0..3 * w * h).map(|i| (i % 7) as f32 / 6.0).collect();
    let mut gray = vec![-1f32; w * h];
    let mut color = vec![-1f32; 3 * w * h];
    let st = unsafe { s2p_synthesize(m, sketch.as_ptr(), w, h, reference.as_ptr(), gray.as_mut_ptr(), color.as_mut_ptr()) };
    assert_eq!(st, S2pStatus::Ok, "{}", last_error());
    assert!(gray.iter().chain(&color).all(|v| (0.0..=1.0).contains(v)));

    let mut again = vec![-1f32; 3 * w * h];
    let st = unsafe { s2p_synthesize(m, sketch.as_ptr(), w, h, ptr::null(), gray.as_mut_ptr(), again.as_mut_ptr()) };
    assert_eq!(st, S2pStatus::Ok, "{}", last_error());

    let mut out = vec![-1f32; w * h];
    let st = unsafe { s2p_photo_to_sketch(m, reference.as_ptr(), w, h, out.as_mut_ptr()) };
    assert_eq!(st, S2pStatus::Ok, "{}", last_error());
    assert!(out.iter().all(|v| (0.0..=1.0).contains(v)));

    let st = unsafe { s2p_synthesize(m, sketch.as_ptr(), 0, h, ptr::null(), gray.as_mut_ptr(), color.as_mut_ptr()) };
    assert_eq!(st, S2pStatus::InvalidInput);
    unsafe { s2p_model_free(m) };
}

#[test]
fn shape_only_model_cannot_colorize() {
    let dir = tempfile::tempdir().unwrap();
    let (s, _) = checkpoints(dir.path());
    let m = load(&s, None);
    let sketch = vec![1f32; 64];
    let (mut gray, mut color) = (vec![0f32; 64], vec![0f32; 192]);
    let st = unsafe { s2p_synthesize(m, sketch.as_ptr(), 8, 8, ptr::null(), gray.as_mut_ptr(), color.as_mut_ptr()) };
    assert_eq!(st, S2pStatus::Config);
    unsafe { s2p_model_free(m) };
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/sketch2photo.h")).unwrap();
    for name in [
        "s2p_model_load", "s2p_model_free", "s2p_model_version", "s2p_synthesize",
        "s2p_photo_to_sketch", "s2p_last_error", "s2p_library_version", "S2pModel", "S2pStatus",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
    let v = unsafe { CStr::from_ptr(s2p_library_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
