mod common;

use common::*;
use lutsr::imageio::{load_image, save_image};
use lutsr_core::color::{Image, RgbImage};

fn transfer(dir: &std::path::Path, variant: &str, channels: &str, scale: &str) -> std::path::PathBuf {
    let out = dir.join(format!("{variant}_{channels}_{scale}.lutpack"));
    let o = lutsr(&[
        &"transfer",
        &"--seed",
        &"3",
        &"--variant",
        &variant,
        &"--channels",
        &channels,
        &"--scale",
        &scale,
        &"--out",
        &out,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn infer_upscales_by_model_scale() {
    let dir = tempfile::tempdir().unwrap();
    let model = transfer(dir.path(), "S", "2", "4");
    let input = dir.path().join("in.png");
    let mut rng = rng(1);
    save_image(
        &Image::Rgb(RgbImage::from_fn(48, 48, |_, _| rand::Rng::random(&mut rng))),
        &input,
    )
    .unwrap();
    let output = dir.path().join("out.png");
    let o = lutsr(&[&"infer", &"--model", &model, &"--input", &input, &"--output", &output]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let img = load_image(&output).unwrap();
    assert!(img.is_rgb());
    assert_eq!((img.width(), img.height()), (192, 192));
}

#[test]
fn compress_defaults_and_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let model = transfer(dir.path(), "M", "2", "2");
    let small = dir.path().join("small.lutpack");
    let o = lutsr(&[&"compress", &"--in", &model, &"--out", &small]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("eps 0.4"), "{}", stdout(&o));
    assert!(std::fs::metadata(&small).unwrap().len() < std::fs::metadata(&model).unwrap().len());

    let o = lutsr(&[&"inspect", &"--model", &small, &"--json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v.is_object());

    let o = lutsr(&[&"compress", &"--in", &model, &"--eps", &"0", &"--out", &small]);
    assert_eq!(code(&o), 1, "a non-positive tolerance is a usage error");
    let o = lutsr(&[&"compress", &"--in", &small, &"--eps", &"0.4", &"--out", &model]);
    assert_eq!(code(&o), 3, "recompressing a subsampled pack must be rejected");
}

#[test]
fn degrade_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let gt = dir.path().join("gt.png");
    let mut rng = rng(2);
    save_image(&Image::Gray(random_plane(&mut rng, 32, 32)), &gt).unwrap();

    let lr = dir.path().join("lr.png");
    let o = lutsr(&[
        &"degrade",
        &"--input",
        &gt,
        &"--output",
        &lr,
        &"--mode",
        &"bicubic:4",
        &"--seed",
        &"0",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let img = load_image(&lr).unwrap();
    assert_eq!((img.width(), img.height()), (8, 8));

    let noisy = dir.path().join("noisy.png");
    let o = lutsr(&[
        &"degrade",
        &"--input",
        &gt,
        &"--output",
        &noisy,
        &"--mode",
        &"gauss:10",
        &"--seed",
        &"5",
    ]);
    assert_eq!(code(&o), 0);
    let first = std::fs::read(&noisy).unwrap();
    lutsr(&[
        &"degrade",
        &"--input",
        &gt,
        &"--output",
        &noisy,
        &"--mode",
        &"gauss:10",
        &"--seed",
        &"5",
    ]);
    assert_eq!(
        first,
        std::fs::read(&noisy).unwrap(),
        "same seed must give the same noise"
    );

    let o = lutsr(&[&"eval", &"--pred", &gt, &"--gt", &gt]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("inf"));
    let o = lutsr(&[&"eval", &"--pred", &noisy, &"--gt", &gt, &"--json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let psnr = v["mean"][0].as_f64().unwrap();
    assert!(psnr > 20.0 && psnr < 40.0, "{psnr}");

    let o = lutsr(&[&"eval", &"--pred", &lr, &"--gt", &gt]);
    assert_eq!(code(&o), 3, "size mismatch is a validation error");
    let o = lutsr(&[
        &"degrade",
        &"--input",
        &gt,
        &"--output",
        &lr,
        &"--mode",
        &"bicubic:3",
        &"--seed",
        &"0",
    ]);
    assert_eq!(code(&o), 3);
}

#[test]
fn bench_reports_both_paths() {
    let dir = tempfile::tempdir().unwrap();
    let model = transfer(dir.path(), "S", "2", "2");
    let o = lutsr(&[
        &"bench", &"--model", &model, &"--size", &"24x16", &"--iters", &"1", &"--json",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["speedup"].as_f64().unwrap() > 0.0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&lutsr(&[&"--help"])), 0);
    assert_eq!(code(&lutsr(&[&"frobnicate"])), 1);
    assert_eq!(code(&lutsr(&[&"rf"])), 1);
    let missing = dir.path().join("missing.lutpack");
    assert_eq!(code(&lutsr(&[&"inspect", &"--model", &missing])), 2);
    let not_png = dir.path().join("x.png");
    std::fs::write(&not_png, b"hello").unwrap();
    let model = transfer(dir.path(), "S", "1", "1");
    let out = dir.path().join("o.png");
    assert_eq!(
        code(&lutsr(&[
            &"infer",
            &"--model",
            &model,
            &"--input",
            &not_png,
            &"--output",
            &out
        ])),
        2
    );
}
