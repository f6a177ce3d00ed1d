use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mre_core::experiment::write_split;
use mre_core::synthetic::{planted_dataset, PlantedConfig};

fn mre(args: &[&str], data_root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mre"))
        .args(args)
        .env("MRE_DATA_ROOT", data_root)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn planted_root() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let ds = planted_dataset(&PlantedConfig::default());
    write_split(&dir.path().join("scnm_en.train.jsonl"), &ds.train).unwrap();
    write_split(&dir.path().join("scnm_en.test.jsonl"), &ds.test).unwrap();
    dir
}

const SMALL: &[&str] = &["--few-shot-k", "10", "--test-n", "50"];

#[test]
fn validate_reports_violations() {
    let root = planted_root();
    let good = root.path().join("scnm_en.train.jsonl");
    let o = mre(
        &[
            "validate",
            "--family",
            "SCNM",
            "--language",
            "en",
            good.to_str().unwrap(),
        ],
        root.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let bad = root.path().join("bad.jsonl");
    fs::write(
        &bad,
        "{\"id\":\"a\",\"text\":\"t\",\"text_label\":\"Sports\",\"pairs\":[]}\n",
    )
    .unwrap();
    let o = mre(
        &[
            "validate",
            "--family",
            "SCNM",
            "--language",
            "en",
            bad.to_str().unwrap(),
        ],
        root.path(),
    );
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("line 1"), "{}", stdout(&o));

    let missing = root.path().join("nope.jsonl");
    let o = mre(
        &[
            "validate",
            "--family",
            "SCNM",
            "--language",
            "en",
            missing.to_str().unwrap(),
        ],
        root.path(),
    );
    assert_eq!(code(&o), 2);

    let o = mre(
        &["validate", "--family", "SPORTS", "--language", "en", "x"],
        root.path(),
    );
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("unknown dataset family"), "{}", stderr(&o));
}

#[test]
fn build_formats_refuses_to_overwrite() {
    let root = planted_root();
    let out = root.path().join("formats");
    let args = [
        "build-formats",
        "--out",
        out.to_str().unwrap(),
        "--tags",
        "JOINT_MRE,TRAD_TEXT",
    ];
    let o = mre(&args, root.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(out.join("scnm_en_joint_mre.train").is_file());
    assert!(out.join("manifest.json").is_file());

    let o = mre(&args, root.path());
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("--force"));

    let mut forced = args.to_vec();
    forced.push("--force");
    assert_eq!(code(&mre(&forced, root.path())), 0);
}

#[test]
fn run_kv_writes_a_comparison_report() {
    let root = planted_root();
    let out = root.path().join("kv");
    let mut args = vec!["run-kv", "--out", out.to_str().unwrap()];
    args.extend_from_slice(SMALL);
    let o = mre(&args, root.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("WLI KV"));
    for f in [
        "report.json",
        "report.tsv",
        "report.md",
        "wli.kv",
        "baseline.kv",
        "config.toml",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let config = fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(config.contains("few_shot_k = 10"));
    assert!(config.contains("kv_k = 100"));

    // an external word list becomes the Origin KV row
    let kv = out.join("wli.kv");
    let out2 = root.path().join("kv2");
    let mut args = vec![
        "run-kv",
        "--out",
        out2.to_str().unwrap(),
        "--external-kv",
        kv.to_str().unwrap(),
    ];
    args.extend_from_slice(SMALL);
    let o = mre(&args, root.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("Origin KV"));
}

#[test]
fn open_domain_is_refused() {
    let root = planted_root();
    let out = root.path().join("kv");
    let o = mre(
        &[
            "run-kv",
            "--family",
            "TCONER",
            "--language",
            "zh",
            "--out",
            out.to_str().unwrap(),
        ],
        root.path(),
    );
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("open-domain schema excluded from KV experiments"));
    assert!(!out.exists());
}

#[test]
fn bad_config_is_a_config_error() {
    let root = planted_root();
    let cfg = root.path().join("c.toml");
    fs::write(&cfg, "template = \"{text}\"\n").unwrap();
    let o = mre(
        &["build-kv", "--config", cfg.to_str().unwrap(), "--out", "x.kv"],
        root.path(),
    );
    assert_eq!(code(&o), 3);
    // flags win over the file
    fs::write(&cfg, "kv_k = 0\n").unwrap();
    let kv = root.path().join("w.kv");
    let o = mre(
        &[
            "build-kv",
            "--config",
            cfg.to_str().unwrap(),
            "--kv-k",
            "5",
            "--out",
            kv.to_str().unwrap(),
        ],
        root.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(fs::read_to_string(&kv).unwrap().starts_with('['));
}

#[test]
fn evaluate_needs_every_draw_and_report_tabulates() {
    let root = planted_root();
    let formats = root.path().join("formats");
    let mut args = vec![
        "build-formats",
        "--out",
        formats.to_str().unwrap(),
        "--tags",
        "WITH_WLI_TO_TLI",
        "--role",
        "test",
        "--draws",
    ];
    args.extend_from_slice(SMALL);
    let o = mre(&args, root.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    // echo gold labels back as generations for the three draws
    let mut gens = Vec::new();
    for i in 0..3 {
        let built = fs::read_to_string(formats.join(format!("scnm_en_with_wli_to_tli.test.draw{i}"))).unwrap();
        let lines: String = built
            .lines()
            .map(|l| {
                let v: serde_json::Value = serde_json::from_str(l).unwrap();
                format!("{}\n", v["target"])
            })
            .collect();
        let p = root.path().join(format!("gen{i}.jsonl"));
        fs::write(&p, lines).unwrap();
        gens.push(p.to_str().unwrap().to_string());
    }

    let report = root.path().join("eval.json");
    let mut args = vec![
        "evaluate",
        "--tag",
        "WITH_WLI_TO_TLI",
        "--out",
        report.to_str().unwrap(),
        "--generations",
    ];
    args.push(&gens[0]);
    args.push(&gens[1]);
    let mut partial = args.clone();
    partial.extend_from_slice(SMALL);
    let o = mre(&partial, root.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("draw 2"), "{}", stderr(&o));

    args.push(&gens[2]);
    args.extend_from_slice(SMALL);
    let o = mre(&args, root.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("100.00"), "{}", stdout(&o));

    let o = mre(&["report", "--format", "tsv", report.to_str().unwrap()], root.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("with WLI"), "{}", stdout(&o));
}

#[test]
fn score_writes_one_prediction_per_record() {
    let root = planted_root();
    let out = root.path().join("pred.jsonl");
    let counts = root.path().join("model.counts");
    let mut args = vec![
        "score",
        "--out",
        out.to_str().unwrap(),
        "--save-counts",
        counts.to_str().unwrap(),
        "--draw",
        "1",
    ];
    args.extend_from_slice(SMALL);
    let o = mre(&args, root.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let first = fs::read_to_string(&out).unwrap();
    assert_eq!(first.lines().count(), 50);

    // the saved model reproduces the predictions
    let mut args = vec![
        "score",
        "--out",
        out.to_str().unwrap(),
        "--counts",
        counts.to_str().unwrap(),
        "--draw",
        "1",
        "--force",
    ];
    args.extend_from_slice(SMALL);
    assert_eq!(code(&mre(&args, root.path())), 0);
    assert_eq!(fs::read_to_string(&out).unwrap(), first);
}
