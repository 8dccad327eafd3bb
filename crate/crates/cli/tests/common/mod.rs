//! Helpers shared by the CLI and acceptance test targets.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const BIN: &str = env!("CARGO_BIN_EXE_rqi-eval");

pub fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).args(args).current_dir(dir).env_remove("RQI_EVAL_JOBS").output().expect("spawn rqi-eval")
}

pub fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run_in(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Every regular file under `dir`, relative path -> bytes.
pub fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

/// Runs the whole pipeline in `root` with `jobs` workers.
pub fn pipeline(root: &Path, jobs: &str) -> Vec<String> {
    fs::create_dir_all(root).unwrap();
    let j = ["--jobs", jobs];
    let run = |args: &[&str]| -> String {
        let mut all: Vec<&str> = j.to_vec();
        all.extend_from_slice(args);
        ok(root, &all)
    };
    let mut stdout = Vec::new();
    run(&["synth", "corpus", "--out", "corpus", "--count", "4", "--side", "96", "--seed", "3"]);
    run(&["synth", "corpus", "--out", "pristine", "--count", "26", "--side", "384", "--seed", "5"]);
    run(&["synth", "make", "--corpus", "corpus", "--out", "ds", "--seed", "1", "--families", "gaussian-blur,gaussian-noise"]);
    run(&["niqe", "fit", "--corpus", "pristine", "--out", "models/p.niqe"]);
    run(&["rqi", "train", "--dataset", "ds/manifest.csv", "--out", "models/m.rqi", "--epochs", "1", "--seed", "2"]);

    let mut manifest = String::from("content_id,model_id,image_path,reference_path\n");
    for c in ["c000", "c001", "c002", "c003"] {
        for (model, variant) in [("gt", "pristine"), ("blurry", "gaussian-blur-2"), ("noisy", "gaussian-noise-2"), ("smeared", "gaussian-blur-4")] {
            manifest.push_str(&format!("{c},{model},ds/{c}/{variant}.png,ds/{c}/pristine.png\n"));
        }
    }
    fs::write(root.join("images.csv"), manifest).unwrap();
    fs::write(root.join("gt.csv"), "content_id,gt_quality\nc000,3\nc001,1\nc002,4\nc003,2\n").unwrap();

    run(&["metrics", "--manifest", "images.csv", "--metrics", "psnr,ssim,niqe,rqi", "--niqe-model", "models/p.niqe", "--rqi-model", "models/m.rqi", "--crops", "4", "--out", "out/scores.csv"]);
    run(&["niqe", "score", "--model", "models/p.niqe", "--manifest", "images.csv", "--out", "out/niqe.csv"]);
    stdout.push(run(&["niqe", "score", "--model", "models/p.niqe", "--image", "pristine/c000.png"]));
    run(&["rqi", "batch", "--model", "models/m.rqi", "--manifest", "images.csv", "--crops", "4", "--out", "out/rqi.csv"]);
    stdout.push(run(&["rqi", "score", "--model", "models/m.rqi", "--target", "ds/c001/gaussian-blur-3.png", "--reference", "ds/c001/pristine.png"]));
    stdout.push(run(&["rqi", "eval", "--model", "models/m.rqi", "--dataset", "ds/manifest.csv", "--crops", "4", "--out", "out/eval.csv"]));
    run(&["sweep", "--scores", "out/scores.csv", "--gt", "gt.csv", "--out", "out/sweep", "--trials", "20", "--seed", "4", "--fractions", "0,0.25,0.5"]);
    let mut scales = String::from("content_id,model_id,thurstone_score\n");
    for (i, c) in ["c000", "c001", "c002", "c003"].iter().enumerate() {
        for (k, m) in ["blurry", "noisy", "smeared"].iter().enumerate() {
            scales.push_str(&format!("{c},{m},{}\n", ((i * 3 + k) % 5) as f64 * 0.3 - 0.6 + k as f64 * 0.01));
        }
    }
    fs::write(root.join("scales.csv"), scales).unwrap();
    stdout.push(run(&["consistency", "--metrics", "out/scores.csv", "--users", "scales.csv", "--out", "out/consistency.csv"]));
    fs::write(
        root.join("export.json"),
        r#"{"study_id":"s","contents":[{"content_id":"c000","items":["a","b","c"],"wins":[[0,7,9],[3,0,6],[1,4,0]]}]}"#,
    )
    .unwrap();
    run(&["study", "scales", "--export", "export.json", "--out", "out/study_scales.csv"]);
    stdout.push(run(&["demo", "--out", "out/demo", "--rqi-model", "models/m.rqi", "--contents", "6", "--trials", "20", "--seed", "9"]));
    stdout
}


/// Runs the pipeline twice (different worker counts) plus a rerun in place
/// and returns the first relative path whose bytes differ, if any.
pub fn determinism_mismatch(tmp: &Path) -> Option<String> {
    let (a, b) = (tmp.join("a"), tmp.join("b"));
    let out_a = pipeline(&a, "1");
    let out_b = pipeline(&b, "3");
    if out_a != out_b {
        return Some("stdout".into());
    }
    let (sa, sb) = (snapshot(&a), snapshot(&b));
    if sa.len() != sb.len() {
        return Some("file set".into());
    }
    for ((p, x), (q, y)) in sa.iter().zip(&sb) {
        if p != q || x != y {
            return Some(p.display().to_string());
        }
    }
    pipeline(&a, "2");
    for ((p, x), (_, y)) in snapshot(&a).iter().zip(&sa) {
        if x != y {
            return Some(format!("rerun {}", p.display()));
        }
    }
    None
}
