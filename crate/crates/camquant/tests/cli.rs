mod common;

use std::path::Path;
use std::process::{Command, Output};

use camquant_core::{score_pair, Grid, MetricConfig};
use common::{write_dataset, write_gray};

fn camquant(workdir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_camquant"))
        .arg("--workdir")
        .arg(workdir)
        .args(args)
        .env_remove("CAMQUANT_CACHE_DIR")
        .output()
        .unwrap()
}

fn score_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn blob(h: usize, w: usize, cy: f32, cx: f32) -> Grid<f32> {
    Grid::from_fn(h, w, |r, c| {
        let d = (r as f32 - cy).powi(2) + (c as f32 - cx).powi(2);
        (-d / 40.0).exp()
    })
}

#[test]
fn score_of_identical_files_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    write_gray(&dir.path().join("a.png"), &blob(24, 24, 8.0, 12.0));
    let v = score_json(&camquant(dir.path(), &["score", "a.png", "a.png"]));
    assert!((v["sim"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((v["cc"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    // epsilon smoothing leaves an offset of order epsilon per pixel
    assert!(v["kld"].as_f64().unwrap().abs() <= 2.0 * 1e-7 * (24.0 * 24.0));
}

#[test]
fn score_against_inverted_copy_is_anticorrelated() {
    let dir = tempfile::tempdir().unwrap();
    let map = blob(16, 20, 5.0, 9.0);
    write_gray(&dir.path().join("a.png"), &map);
    // 255 - v keeps the quantized levels exactly inverted
    let img = image::open(dir.path().join("a.png")).unwrap().into_luma8();
    let inv = image::GrayImage::from_fn(img.width(), img.height(), |x, y| image::Luma([255 - img.get_pixel(x, y)[0]]));
    inv.save(dir.path().join("inv.png")).unwrap();
    let v = score_json(&camquant(dir.path(), &["score", "a.png", "inv.png"]));
    assert!((v["cc"].as_f64().unwrap() + 1.0).abs() < 1e-12);
}

#[test]
fn score_matches_the_library_after_resizing() {
    let dir = tempfile::tempdir().unwrap();
    write_gray(&dir.path().join("gt.png"), &blob(32, 32, 10.0, 20.0));
    write_gray(&dir.path().join("cam.png"), &blob(16, 16, 6.0, 8.0));
    let v = score_json(&camquant(
        dir.path(),
        &["score", "gt.png", "cam.png", "--epsilon", "1e-6", "--kld-orientation", "conventional"],
    ));
    let gt = camquant::saliency::read_gray(&dir.path().join("gt.png")).unwrap();
    let cam = camquant::saliency::read_gray(&dir.path().join("cam.png")).unwrap();
    let cam = camquant_core::resize_bilinear(&cam, 32, 32);
    let config = MetricConfig {
        epsilon: 1e-6,
        orientation: camquant_core::KldOrientation::Conventional,
    };
    let expected = score_pair(&gt.to_f64(), &cam.to_f64(), &config).unwrap();
    assert_eq!(v["sim"].as_f64().unwrap(), expected.sim);
    assert_eq!(v["cc"].as_f64(), expected.cc);
    assert_eq!(v["kld"].as_f64().unwrap(), expected.kld);
}

#[test]
fn score_of_missing_file_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = camquant(dir.path(), &["score", "nope.png", "nope.png"]);
    assert!(!out.status.success());
    assert!(out.stdout.is_empty());
}

#[test]
fn overlay_without_cams_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = camquant(dir.path(), &["overlay", "--image", "i.png", "--mask", "m.png", "--out", "o.png"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no CAMs given"));
}

#[test]
fn overlay_renders_five_panels_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let (images, masks) = write_dataset(dir.path(), 1, 40, 40);
    for (i, name) in ["f32.png", "int16.png", "int8.png"].iter().enumerate() {
        write_gray(&dir.path().join(name), &blob(40, 40, 10.0 + i as f32, 20.0));
    }
    let image = images.join("img_000.png");
    let mask = masks.join("img_000.png");
    let args = |out: &'static str| {
        vec![
            "overlay".to_string(),
            "--image".into(),
            image.display().to_string(),
            "--mask".into(),
            mask.display().to_string(),
            "--cam".into(),
            "f32.png".into(),
            "--cam".into(),
            "int16.png".into(),
            "--cam".into(),
            "int8.png".into(),
            "--out".into(),
            out.into(),
        ]
    };
    for out in ["a.png", "b.png"] {
        let a = args(out);
        let o = camquant(dir.path(), &a.iter().map(String::as_str).collect::<Vec<_>>());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read(dir.path().join("a.png")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.png")).unwrap());
    let img = image::load_from_memory(&a).unwrap();
    assert_eq!((img.width(), img.height()), (200, 40));
}

#[test]
fn audit_without_masks_or_generator_fails_fast() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), 2, 40, 40);
    let out = camquant(
        dir.path(),
        &[
            "audit",
            "--models",
            "squeezenet1_0",
            "--image-dir",
            "images",
            "--mask-dir",
            "absent",
            "--weights-seed",
            "0",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("generator not configured"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn audit_config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("audit.toml"), "models = [\"vgg16\"]\nimage_dir = \"images\"\nweights_seed = 0\nworkers = 0\n").unwrap();
    let out = camquant(dir.path(), &["audit", "--config", "audit.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`workers`"));

    let out = camquant(dir.path(), &["audit", "--config", "audit.toml", "--models", "alexnet", "--workers", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`models`"));
}

#[test]
fn print_config_echoes_overrides() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("audit.toml"), "models = [\"vgg16\"]\nn = 7\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_camquant"))
        .arg("--workdir")
        .arg(dir.path())
        .args(["audit", "--config", "audit.toml", "--seed", "3", "--print-config"])
        .env("CAMQUANT_CACHE_DIR", "elsewhere")
        .output()
        .unwrap();
    assert!(out.status.success());
    let echoed = camquant::config::AuditConfig::from_toml_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!((echoed.n, echoed.seed), (7, 3));
    assert_eq!(echoed.cache_dir, Path::new("elsewhere"));
}

/// One registry model at full resolution with seeded weights.
#[test]
fn audit_then_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), 3, 240, 300);
    let args = [
        "audit",
        "--models",
        "squeezenet1_0",
        "--precisions",
        "f32,int8",
        "--n",
        "2",
        "--seed",
        "1",
        "--image-dir",
        "images",
        "--mask-dir",
        "masks",
        "--weights-seed",
        "4",
        "--overlays",
        "1",
    ];
    let first = camquant(dir.path(), &args);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let out = dir.path().join("out");
    let md = std::fs::read_to_string(out.join("report.md")).unwrap();
    let table: Vec<&str> = md.lines().filter(|l| l.starts_with("| ") && (l.contains(" ± ") || l.contains(" n/a |")))
        .collect();
    assert_eq!(table.len(), 3 * 3, "{md}");
    assert!(md.contains("| Comparison | Metric | SqueezeNet-1.0 |"), "{md}");
    let csv = std::fs::read(out.join("report.csv")).unwrap();
    let records = std::fs::read(out.join("records.json")).unwrap();
    assert_eq!(std::fs::read_dir(out.join("overlays")).unwrap().count(), 1);

    let second = camquant(dir.path(), &args);
    assert!(second.status.success());
    assert_eq!(std::fs::read(out.join("report.csv")).unwrap(), csv);
    assert_eq!(std::fs::read(out.join("records.json")).unwrap(), records);
    assert_eq!(std::fs::read_to_string(out.join("report.md")).unwrap(), md);

    let rerender = camquant(dir.path(), &["report", "--records", "out/records.json", "--output-dir", "again"]);
    assert!(rerender.status.success(), "{}", String::from_utf8_lossy(&rerender.stderr));
    assert_eq!(std::fs::read_to_string(dir.path().join("again/report.md")).unwrap(), md);
    assert_eq!(std::fs::read(dir.path().join("again/report.csv")).unwrap(), csv);
}
