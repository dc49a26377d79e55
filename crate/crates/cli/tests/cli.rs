use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TINY: &str = "preset = desk\nscene.height = 32\nscene.width = 32\nscene.sequences = 1\nscene.samples = 2\n\
                    train.crop = 32\nstage1.epochs = 2\nstage2.epochs = 1\n";

fn edei(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edei"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("EDEI_CACHE")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = edei(args);
    assert!(
        out.status.success(),
        "edei {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

fn files(root: &Path) -> Vec<PathBuf> {
    walk(root)
        .into_iter()
        .map(|p| p.strip_prefix(root).unwrap().to_path_buf())
        .collect()
}

fn walk(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    if let Ok(rd) = std::fs::read_dir(root) {
        for e in rd {
            let p = e.unwrap().path();
            if p.is_dir() {
                out.extend(walk(&p));
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

/// A temp dir holding a config, a two-sample dataset and a stage-2 checkpoint.
struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let f = Fixture { dir };
        std::fs::write(f.p("tiny.cfg"), TINY).unwrap();
        ok(&["synth", "--out", &s(&f.p("data")), "--config", &s(&f.p("tiny.cfg"))]);
        for stage in ["1", "2"] {
            ok(&[
                "train",
                "--data",
                &s(&f.p("data")),
                "--stage",
                stage,
                "--out",
                &s(&f.p("ckpt")),
                "--config",
                &s(&f.p("tiny.cfg")),
            ]);
        }
        f
    }

    fn p(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }
}

#[test]
fn dry_runs_write_nothing() {
    let f = Fixture::new();
    let before = files(f.dir.path());
    let fresh = f.p("fresh");
    let sample = f.p("data/scene_000/000000");
    let runs: Vec<Vec<String>> = vec![
        vec![
            "synth".into(),
            "--out".into(),
            s(&fresh),
            "--config".into(),
            s(&f.p("tiny.cfg")),
        ],
        vec![
            "train".into(),
            "--data".into(),
            s(&f.p("data")),
            "--out".into(),
            s(&fresh),
            "--config".into(),
            s(&f.p("tiny.cfg")),
        ],
        vec![
            "eval".into(),
            "--ckpt".into(),
            s(&f.p("ckpt/stage2.ckpt")),
            "--data".into(),
            s(&f.p("data")),
            "--out".into(),
            s(&fresh.join("r.jsonl")),
        ],
        vec![
            "infer".into(),
            "--ckpt".into(),
            s(&f.p("ckpt/stage2.ckpt")),
            "--sample".into(),
            s(&sample),
            "--out".into(),
            s(&fresh),
        ],
        vec![
            "stats".into(),
            "--data".into(),
            s(&f.p("data")),
            "--out".into(),
            s(&fresh.join("s.json")),
        ],
        vec![
            "viz".into(),
            "--sample".into(),
            s(&sample),
            "--pred".into(),
            s(&f.p("ckpt")),
            "--out".into(),
            s(&fresh.join("v.png")),
        ],
    ];
    // viz reads predictions, so give it a real prediction directory first
    ok(&[
        "infer",
        "--ckpt",
        &s(&f.p("ckpt/stage2.ckpt")),
        "--sample",
        &s(&sample),
        "--out",
        &s(&f.p("pred")),
    ]);
    let before_with_pred = files(f.dir.path());
    assert!(before_with_pred.len() > before.len());
    for mut args in runs {
        if args[0] == "viz" {
            args[4] = s(&f.p("pred"));
        }
        args.push("--dry-run".into());
        let a: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = ok(&a);
        assert!(String::from_utf8_lossy(&out.stdout).contains("dry run"), "{}", args[0]);
        assert!(!fresh.exists(), "{} wrote output during a dry run", args[0]);
        assert_eq!(files(f.dir.path()), before_with_pred, "{}", args[0]);
    }
}

#[test]
fn failures_map_to_exit_codes() {
    let f = Fixture::new();
    let code = |a: &[&str]| edei(a).status.code().unwrap();
    // config errors
    assert_eq!(code(&["synth", "--out", &s(&f.p("x")), "--set", "nonsense.key=1"]), 2);
    assert_eq!(
        code(&["synth", "--out", &s(&f.p("x")), "--set", "synth.blur_count=0"]),
        2
    );
    assert_eq!(code(&["synth", "--out", &s(&f.p("x")), "--set", "preset=huge"]), 2);
    assert_eq!(
        code(&[
            "train",
            "--data",
            &s(&f.p("data")),
            "--out",
            &s(&f.p("c")),
            "--stage",
            "3"
        ]),
        2
    );
    // data errors
    assert_eq!(
        code(&["stats", "--data", &s(&f.p("missing")), "--out", &s(&f.p("s.json"))]),
        3
    );
    assert_eq!(
        code(&["synth", "--out", &s(&f.p("x")), "--source", &s(&f.p("tiny.cfg"))]),
        3
    );
    // checkpoint errors
    assert_eq!(
        code(&[
            "train",
            "--data",
            &s(&f.p("data")),
            "--stage",
            "2",
            "--out",
            &s(&f.p("empty"))
        ]),
        4
    );
    std::fs::write(f.p("bad.ckpt"), b"EDEICKPT garbage").unwrap();
    let out = edei(&[
        "infer",
        "--ckpt",
        &s(&f.p("bad.ckpt")),
        "--sample",
        &s(&f.p("data/scene_000/000000")),
        "--out",
        &s(&f.p("i")),
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("field"));
    // a flipped byte fails the checksum
    let mut bytes = std::fs::read(f.p("ckpt/stage1.ckpt")).unwrap();
    bytes[40] ^= 0xff;
    std::fs::write(f.p("flipped.ckpt"), bytes).unwrap();
    assert_eq!(
        code(&[
            "eval",
            "--ckpt",
            &s(&f.p("flipped.ckpt")),
            "--data",
            &s(&f.p("data")),
            "--out",
            &s(&f.p("r.jsonl"))
        ]),
        4
    );
    // stage 2 from a checkpoint that never finished stage 1
    let mut net = edei_net::checkpoint::load::<f32>(&f.p("ckpt/stage1.ckpt")).unwrap();
    net.set_stage_done(0);
    edei_net::checkpoint::save(&net, &f.p("fresh.ckpt")).unwrap();
    let out = edei(&[
        "train",
        "--data",
        &s(&f.p("data")),
        "--stage",
        "2",
        "--out",
        &s(&f.p("o")),
        "--init",
        &s(&f.p("fresh.ckpt")),
    ]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!f.p("o/stage2.ckpt").exists());
}

#[test]
fn every_run_writes_one_manifest() {
    let f = Fixture::new();
    let manifests = |root: &Path| {
        walk(root)
            .into_iter()
            .filter(|p| p.to_string_lossy().ends_with(".manifest.json"))
            .count()
    };
    assert_eq!(manifests(&f.p("data")), 1);
    assert_eq!(manifests(&f.p("ckpt")), 2);
    let m: serde_json::Value =
        serde_json::from_slice(&std::fs::read(f.p("ckpt/train-stage1.manifest.json")).unwrap()).unwrap();
    for key in [
        "command",
        "config_hash",
        "seed",
        "dataset_hash",
        "code_version",
        "wall_clock_s",
        "outputs",
    ] {
        assert!(m.get(key).is_some(), "manifest lacks {key}");
    }
    assert_eq!(m["command"], "train-stage1");
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn infer_writes_three_images_and_marks_missing_references() {
    let f = Fixture::new();
    let ckpt = s(&f.p("ckpt/stage2.ckpt"));
    ok(&[
        "infer",
        "--ckpt",
        &ckpt,
        "--sample",
        &s(&f.p("data/scene_000/000000")),
        "--out",
        &s(&f.p("a")),
    ]);
    for name in ["fused.png", "enhanced.png", "deblurred.png"] {
        assert!(f.p("a").join(name).is_file());
    }
    let rep: serde_json::Value = serde_json::from_slice(&std::fs::read(f.p("a/report.json")).unwrap()).unwrap();
    assert!(rep["metrics"]["fused"]["psnr"].as_f64().unwrap() > 0.0);

    let unlabeled = f.p("unlabeled");
    std::fs::create_dir_all(&unlabeled).unwrap();
    for e in std::fs::read_dir(f.p("data/scene_000/000000")).unwrap() {
        let p = e.unwrap().path();
        if p.file_name().unwrap() != "gt.img" {
            std::fs::copy(&p, unlabeled.join(p.file_name().unwrap())).unwrap();
        }
    }
    ok(&[
        "infer",
        "--ckpt",
        &ckpt,
        "--sample",
        &s(&unlabeled),
        "--out",
        &s(&f.p("b")),
    ]);
    let rep: serde_json::Value = serde_json::from_slice(&std::fs::read(f.p("b/report.json")).unwrap()).unwrap();
    assert_eq!(rep["reference"], "no-reference");
    assert!(rep["metrics"].is_null());
    assert!(f.p("b/fused.png").is_file());
}

#[test]
fn grayscale_samples_do_not_fit_a_colour_checkpoint() {
    let f = Fixture::new();
    let gray = f.p("gray");
    std::fs::create_dir_all(&gray).unwrap();
    for e in std::fs::read_dir(f.p("data/scene_000/000000")).unwrap() {
        let p = e.unwrap().path();
        std::fs::copy(&p, gray.join(p.file_name().unwrap())).unwrap();
    }
    for name in ["short.img", "long.img", "gt.img"] {
        let fr = edei_core::io::img::read_png(&gray.join(name)).unwrap().luma();
        edei_core::io::img::write_png16(&gray.join(name), &fr).unwrap();
    }
    let out = edei(&[
        "infer",
        "--ckpt",
        &s(&f.p("ckpt/stage2.ckpt")),
        "--sample",
        &s(&gray),
        "--out",
        &s(&f.p("g")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!f.p("g").exists());
}

#[test]
fn viz_clips_insets_with_a_warning() {
    let f = Fixture::new();
    let sample = s(&f.p("data/scene_000/000000"));
    ok(&[
        "infer",
        "--ckpt",
        &s(&f.p("ckpt/stage2.ckpt")),
        "--sample",
        &sample,
        "--out",
        &s(&f.p("pred")),
    ]);
    let out = ok(&[
        "viz",
        "--sample",
        &sample,
        "--pred",
        &s(&f.p("pred")),
        "--out",
        &s(&f.p("fig.png")),
        "--inset",
        "4,4,12,12",
        "--inset",
        "20,20,30,30",
    ]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("clipped"));
    let fig = edei_core::io::img::read_png(&f.p("fig.png")).unwrap();
    // four 32-px panels with 4-px gaps
    assert_eq!(fig.width(), 4 * 32 + 5 * 4);
    assert!(fig.height() > 32);
}

#[test]
fn png_sources_and_the_cache_give_the_same_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("frames");
    std::fs::create_dir_all(&src).unwrap();
    let clip = edei_core::synthesis::procedural_clip(&edei_core::synthesis::SceneConfig {
        height: 24,
        width: 24,
        frames: 12,
        ..Default::default()
    })
    .unwrap();
    for (i, fr) in clip.frames().iter().enumerate() {
        edei_core::io::img::write_png16(&src.join(format!("f{i:03}.png")), fr).unwrap();
    }
    let run = |out: &Path, cache: Option<&Path>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_edei"));
        c.env("RUST_LOG", "warn");
        c.args([
            "synth",
            "--source",
            &s(&src),
            "--out",
            &s(out),
            "--set",
            "scene.samples=2",
            "--seed",
            "4",
        ]);
        match cache {
            Some(p) => c.env("EDEI_CACHE", p),
            None => c.env_remove("EDEI_CACHE"),
        };
        assert!(c.status().unwrap().success());
    };
    let cache = dir.path().join("cache");
    run(&dir.path().join("plain"), None);
    run(&dir.path().join("cold"), Some(&cache));
    assert_eq!(walk(&cache).len(), 1);
    run(&dir.path().join("warm"), Some(&cache));
    let read = |root: &Path| -> Vec<Vec<u8>> {
        walk(root)
            .into_iter()
            .filter(|p| !p.to_string_lossy().ends_with(".manifest.json"))
            .map(|p| std::fs::read(p).unwrap())
            .collect()
    };
    let plain = read(&dir.path().join("plain"));
    assert!(plain.len() > 5);
    assert_eq!(plain, read(&dir.path().join("cold")));
    assert_eq!(plain, read(&dir.path().join("warm")));
    assert!(dir.path().join("plain/frames/000001/gt.img").is_file());
}
