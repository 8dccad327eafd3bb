mod common;

use std::fs;

use common::{ok, pipeline, run_in, snapshot};

#[test]
fn unknown_flag_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [&["--definitely-not-a-flag"][..], &["sweep", "--nope"], &["rqi", "score"], &["frobnicate"]] {
        let out = run_in(tmp.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"), "{args:?}");
    }
    assert_eq!(run_in(tmp.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn domain_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), &["rqi", "score", "--model", "missing.rqi", "--target", "a.png", "--reference", "b.png"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));

    fs::write(tmp.path().join("bad.cfg"), "not_a_key = 3\n").unwrap();
    let out = run_in(tmp.path(), &["--config", "bad.cfg", "synth", "corpus", "--out", "c", "--count", "1", "--side", "32"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!tmp.path().join("c").exists());
}

const SCORES: &str = "\
content_id,model_id,metric,score
c1,gt,psnr,99
c1,m1,psnr,30
c1,m2,psnr,25
c1,m3,psnr,20
c2,gt,psnr,99
c2,m1,psnr,22
c2,m2,psnr,28
c2,m3,psnr,24
c1,gt,niqe,2.0
c1,m1,niqe,4.0
c1,m2,niqe,3.0
c1,m3,niqe,5.0
c2,gt,niqe,2.0
c2,m1,niqe,6.0
c2,m2,niqe,4.0
c2,m3,niqe,5.0
";

const SCALES: &str = "\
content_id,model_id,thurstone_score
c1,m1,0.9
c1,m2,0.1
c1,m3,-1.0
c2,m1,-0.5
c2,m2,0.8
c2,m3,-0.3
";

#[test]
fn consistency_report_has_one_row_per_metric() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("scores.csv"), SCORES).unwrap();
    fs::write(tmp.path().join("scales.csv"), SCALES).unwrap();
    let stdout = ok(tmp.path(), &["consistency", "--metrics", "scores.csv", "--users", "scales.csv"]);
    let mut rdr = csv::Reader::from_reader(stdout.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(headers.iter().collect::<Vec<_>>(), ["metric", "mean_srcc", "mean_plcc", "winning_rate", "n_contents", "n_skipped"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    let metrics: Vec<&str> = rows.iter().map(|r| &r[0]).collect();
    assert_eq!(metrics, ["niqe", "psnr"]);
    // psnr: c1 orders m1 > m2 > m3 as users do (1.0); c2 scores 22,28,24 vs users -0.5,0.8,-0.3 (1.0)
    let psnr = &rows[1];
    assert!((psnr[1].parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
    assert!((psnr[3].parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
    // niqe is lower-better: c1 negated -4,-3,-5 vs 0.9,0.1,-1.0 gives 0.5; c2 -6,-4,-5 vs -0.5,0.8,-0.3 gives 1.0
    let niqe = &rows[0];
    assert!((niqe[1].parse::<f64>().unwrap() - 0.75).abs() < 1e-12);
    assert!((niqe[3].parse::<f64>().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(&niqe[4], "2");

    ok(tmp.path(), &["consistency", "--metrics", "scores.csv", "--users", "scales.csv", "--out", "r.csv"]);
    assert_eq!(fs::read_to_string(tmp.path().join("r.csv")).unwrap(), stdout);
}

#[test]
fn config_file_values_yield_to_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("run.cfg"), "seed = 11\n").unwrap();
    ok(d, &["--config", "run.cfg", "synth", "corpus", "--out", "a", "--count", "2", "--side", "40"]);
    ok(d, &["synth", "corpus", "--out", "b", "--count", "2", "--side", "40", "--seed", "11"]);
    ok(d, &["--config", "run.cfg", "synth", "corpus", "--out", "c", "--count", "2", "--side", "40", "--seed", "12"]);
    assert_eq!(snapshot(&d.join("a")), snapshot(&d.join("b")));
    assert_ne!(snapshot(&d.join("a")), snapshot(&d.join("c")));
}

#[test]
fn every_subcommand_is_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let out_a = pipeline(&a, "1");
    let out_b = pipeline(&b, "3");
    assert_eq!(out_a, out_b);
    let (sa, sb) = (snapshot(&a), snapshot(&b));
    assert_eq!(sa.iter().map(|x| &x.0).collect::<Vec<_>>(), sb.iter().map(|x| &x.0).collect::<Vec<_>>());
    for ((p, x), (_, y)) in sa.iter().zip(&sb) {
        assert!(x == y, "{} differs between runs", p.display());
    }
    let score: f64 = out_a[1].trim().parse().expect("rqi score prints one number");
    assert!(score.is_finite());
    assert!(sa.iter().any(|(p, _)| p.ends_with("sweep_psnr.svg")));
    assert!(sa.iter().any(|(p, _)| p.ends_with("demo/report.tsv")));

    // re-running over existing outputs rewrites the same bytes
    pipeline(&a, "2");
    assert_eq!(snapshot(&a), sa);
}
