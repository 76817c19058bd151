use std::path::Path;
use std::process::{Command, Output};

use wcg_core::color::convert_gamut;
use wcg_core::image_io::quantize;
use wcg_core::{load_image, BitDepth, BuiltinGamut, Gamut, TransferFunction};

fn wcg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wcg"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn wcg")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = wcg(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (headers, rows)
}

#[test]
fn clip_of_in_gamut_image_is_a_primary_reexpression() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen-corpus", "--out", "c", "--sweep", "0", "--in-gamut", "2", "--noise", "0"]);
    ok(
        dir.path(),
        &["map", "--op", "clip", "--src", "P3", "--dst", "Rec709", "--input", "c/ingamut_000.png", "--output", "m.png"],
    );
    let p3 = Gamut::builtin(BuiltinGamut::P3);
    let r709 = Gamut::builtin(BuiltinGamut::Rec709);
    let src = load_image(&dir.path().join("c/ingamut_000.png"), Some(TransferFunction::Srgb), &p3).unwrap();
    let expected = convert_gamut(&src, &p3, &r709).unwrap();
    let written = image::open(dir.path().join("m.png")).unwrap().to_rgb16();
    let mut worst = 0i32;
    for (i, px) in written.pixels().enumerate() {
        let want = expected.pixel(i);
        for (&v, &got) in want.iter().zip(&px.0) {
            let code = quantize(v, TransferFunction::Srgb, BitDepth::Sixteen) as i32;
            worst = worst.max((code - got as i32).abs());
        }
    }
    assert!(worst <= 1, "max code difference {worst}");
}

#[test]
fn characterize_and_criteria_reports() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen-corpus", "--out", "c", "--sweep", "12", "--in-gamut", "4", "--noise", "0"]);
    ok(
        dir.path(),
        &["characterize", "--ref", "P3", "--targets", "Rec709,Toy", "--input", "c", "--output", "f.csv"],
    );
    let (headers, rows) = csv_rows(&dir.path().join("f.csv"));
    assert_eq!(&headers[..3], &["path", "d_1", "d_2"]);
    assert_eq!(rows.len(), 16);
    for row in rows.iter().filter(|r| r[0].contains("ingamut")) {
        for cell in &row[1..3] {
            assert!(cell.parse::<f64>().unwrap() <= 3e-4, "{row:?}");
        }
    }

    ok(dir.path(), &["criteria", "--input", "f.csv", "--bins", "10", "--output", "k.json"]);
    let report = json(&dir.path().join("k.json"));
    assert_eq!(report["command"], "criteria");
    let result = &report["result"];
    assert_eq!(result["bins"], 10);
    assert!(result["total"]["coverage"].is_number());
    assert!(result["total"]["uniformity"].is_number());
    let targets: Vec<&str> = result["per_target"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["target"].as_str().unwrap())
        .collect();
    assert_eq!(targets, ["Rec709", "Toy"]);
}

#[test]
fn sweep_corpus_spans_both_targets() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen-corpus", "--out", "c", "--in-gamut", "0", "--noise", "0"]);
    ok(dir.path(), &["characterize", "--input", "c", "--output", "f.csv"]);
    ok(dir.path(), &["criteria", "--input", "f.csv", "--output", "k.json"]);
    let report = json(&dir.path().join("k.json"));
    for t in report["result"]["per_target"].as_array().unwrap() {
        assert!(t["coverage"].as_f64().unwrap() > 0.5, "{t}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(wcg(dir.path(), &["no-such-command"]).status.code(), Some(2));
    assert_eq!(wcg(dir.path(), &["map", "--op", "clip", "--src", "Nope"]).status.code(), Some(2));
    assert_eq!(wcg(dir.path(), &["--help"]).status.code(), Some(0));
    let missing = wcg(dir.path(), &["criteria", "--input", "missing.csv"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("wcg: error:"));
}

#[test]
fn stats_subcommand_reads_columns() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.csv"), "a,b\n1,2\n2,4\n3,5\n4,9\n").unwrap();
    ok(
        dir.path(),
        &["stats", "--input", "s.csv", "--a", "b", "--b", "a", "--test", "welch", "--side", "greater", "--output", "t.json"],
    );
    let report = json(&dir.path().join("t.json"));
    let p = report["result"]["p_value"].as_f64().unwrap();
    assert!(p > 0.0 && p < 0.5, "{report}");
}
