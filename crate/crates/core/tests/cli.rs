use std::path::Path;
use std::process::{Command, Output};

fn nircolor(workdir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nircolor"))
        .arg("--workdir")
        .arg(workdir)
        .args(args)
        .env_remove("NIRCOLOR_CONFIG")
        .output()
        .unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn count_png(dir: &Path) -> usize {
    std::fs::read_dir(dir)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .is_some_and(|x| x == "png")
        })
        .count()
}

fn synth(wd: &Path, args: &[&str]) {
    let mut all = vec!["synth-data"];
    all.extend_from_slice(args);
    ok(&nircolor(wd, &all));
}

#[test]
fn synth_data_writes_the_documented_layout() {
    let wd = tempfile::tempdir().unwrap();
    synth(
        wd.path(),
        &[
            "--seed",
            "1",
            "--n-paired",
            "8",
            "--n-gray",
            "8",
            "--size",
            "32",
            "--out",
            "D",
        ],
    );
    let d = wd.path().join("D");
    assert_eq!(
        count_png(&d.join("paired/nir")) + count_png(&d.join("paired/rgb")),
        16
    );
    assert_eq!(count_png(&d.join("gray_only/rgb")), 8);
    let img = image::open(d.join("paired/rgb/p00000.png")).unwrap();
    assert_eq!(
        (img.width(), img.height(), img.color().channel_count()),
        (32, 32, 3)
    );
    let nir = image::open(d.join("paired/nir/p00000.png")).unwrap();
    assert_eq!(nir.color().channel_count(), 1);
}

const TINY: &[&str] = &[
    "--image-size",
    "16",
    "--base-channels",
    "4",
    "--batch-size",
    "2",
    "--epochs-phase1",
    "1",
    "--epochs-phase2",
    "1",
    "--epochs-phase3",
    "1",
    "--quiet",
];

fn train(wd: &Path, out: &str, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--data", "D", "--out", out];
    args.extend_from_slice(TINY);
    args.extend_from_slice(extra);
    nircolor(wd, &args)
}

#[test]
fn train_infer_eval_inspect() {
    let wd = tempfile::tempdir().unwrap();
    let w = wd.path();
    synth(
        w,
        &[
            "--n-paired",
            "4",
            "--n-gray",
            "4",
            "--size",
            "16",
            "--out",
            "D",
        ],
    );
    ok(&train(w, "run", &[]));
    for name in [
        "phase1.ckpt",
        "phase2.ckpt",
        "phase3.ckpt",
        "train_log.jsonl",
        "config.json",
        "run_meta.json",
    ] {
        assert!(w.join("run").join(name).exists(), "{name}");
    }

    let out = nircolor(
        w,
        &[
            "infer",
            "--checkpoint",
            "run/phase3.ckpt",
            "--path",
            "N2G2C",
            "--input",
            "D/paired/nir/p00000.png",
            "--out",
            "o",
        ],
    );
    ok(&out);
    assert_eq!(count_png(&w.join("o")), 1);
    let img = image::open(w.join("o/p00000.png")).unwrap();
    assert_eq!((img.color().channel_count(), img.width()), (3, 16));

    // A directory of RGB inputs is converted to grayscale for gray paths.
    ok(&nircolor(
        w,
        &[
            "infer",
            "--checkpoint",
            "run/phase3.ckpt",
            "--path",
            "G2N",
            "--input",
            "D/gray_only/rgb",
            "--out",
            "g",
        ],
    ));
    assert_eq!(count_png(&w.join("g")), 4);
    assert_eq!(
        image::open(w.join("g/g00000.png"))
            .unwrap()
            .color()
            .channel_count(),
        1
    );

    let out = nircolor(
        w,
        &[
            "eval",
            "--checkpoint",
            "run/phase3.ckpt",
            "--data",
            "D",
            "--path",
            "N2C",
            "--out",
            "m.jsonl",
            "--preview",
            "p.png",
        ],
    );
    ok(&out);
    let report = nircolor::eval::MetricsReport::from_jsonl(
        &std::fs::read_to_string(w.join("m.jsonl")).unwrap(),
    )
    .unwrap();
    assert_eq!(report.records.len(), 4);
    assert_eq!(report.dataset, "D");
    assert!(w.join("p.png").exists());
    assert!(String::from_utf8_lossy(&out.stdout).contains("LPIPS absent"));

    let out = nircolor(w, &["inspect", "--checkpoint", "run/phase2.ckpt"]);
    ok(&out);
    let header: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(header["stage"], "phase2");
}

#[test]
fn no_blt_log_marks_the_term_excluded() {
    let wd = tempfile::tempdir().unwrap();
    let w = wd.path();
    synth(
        w,
        &[
            "--n-paired",
            "4",
            "--n-gray",
            "4",
            "--size",
            "16",
            "--out",
            "D",
        ],
    );
    std::fs::write(w.join("c.cfg"), "seed = 3\nlambda_c = 1.0\n").unwrap();
    ok(&train(
        w,
        "run",
        &["--config", "c.cfg", "--ablation", "no_blt"],
    ));
    let records = nircolor::train::read_step_log(&w.join("run/train_log.jsonl")).unwrap();
    let later: Vec<_> = records
        .iter()
        .filter(|r| r.phase != nircolor::train::Stage::Phase1)
        .collect();
    assert!(!later.is_empty());
    assert!(records.iter().all(|r| r.losses.blt_excluded));
    assert!(later.iter().all(|r| r.losses.blt > 0.0));
}

#[test]
fn same_arguments_give_identical_artifacts() {
    let wd = tempfile::tempdir().unwrap();
    let w = wd.path();
    synth(
        w,
        &[
            "--seed",
            "5",
            "--n-paired",
            "4",
            "--n-gray",
            "4",
            "--size",
            "16",
            "--out",
            "D",
        ],
    );
    ok(&train(w, "a", &["--seed", "2"]));
    ok(&train(w, "b", &["--seed", "2"]));
    for name in [
        "phase1.ckpt",
        "phase2.ckpt",
        "phase3.ckpt",
        "train_log.jsonl",
        "config.json",
    ] {
        let a = std::fs::read(w.join("a").join(name)).unwrap();
        let b = std::fs::read(w.join("b").join(name)).unwrap();
        assert!(a == b, "{name} differs");
    }
}

fn error_line(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr)
        .lines()
        .next()
        .unwrap_or_default()
        .to_string()
}

#[test]
fn failures_have_prefixed_errors_and_distinct_codes() {
    let wd = tempfile::tempdir().unwrap();
    let w = wd.path();
    let out = nircolor(w, &["inspect", "--checkpoint", "missing.ckpt"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(
        error_line(&out).starts_with("error[io]: "),
        "{}",
        error_line(&out)
    );

    std::fs::write(w.join("bad.ckpt"), b"NIRCKPT\0garbage").unwrap();
    let out = nircolor(w, &["inspect", "--checkpoint", "bad.ckpt"]);
    assert_eq!(out.status.code(), Some(7));
    assert!(error_line(&out).starts_with("error[checkpoint]: "));

    std::fs::create_dir(w.join("empty")).unwrap();
    let out = nircolor(w, &["train", "--data", "empty", "--out", "r", "--quiet"]);
    assert_eq!(out.status.code(), Some(6));
    assert!(error_line(&out).starts_with("error[dataset]: "));

    std::fs::write(w.join("c.cfg"), "epochs = 3\n").unwrap();
    let out = nircolor(
        w,
        &[
            "train", "--config", "c.cfg", "--data", "empty", "--out", "r",
        ],
    );
    assert_eq!(out.status.code(), Some(5));
    assert!(error_line(&out).starts_with("error[config]: "));
}

#[test]
fn unknown_verbs_and_flags_are_rejected() {
    let wd = tempfile::tempdir().unwrap();
    for args in [&["colorize"][..], &["synth-data", "--out", "D", "--colour"]] {
        let out = nircolor(wd.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(
            String::from_utf8_lossy(&out.stderr).contains("Usage"),
            "{args:?}"
        );
    }
    let out = nircolor(
        wd.path(),
        &[
            "infer",
            "--checkpoint",
            "c",
            "--input",
            "i",
            "--out",
            "o",
            "--path",
            "N2X",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let help = nircolor(wd.path(), &["--help"]);
    assert!(help.status.success());
    assert!(String::from_utf8_lossy(&help.stdout).contains("Exit status"));
}
