//! Black-box tests of the `haze` binary: exit codes, error surfaces, and
//! output determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn haze(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_haze"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, content: &str) {
    fs::write(dir.join(name), content).unwrap();
}

#[test]
fn classify_three_post_fixture_matches_hand_classification() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "posts.csv",
        "p1,u1,2014-03-13T08:00:00+07:00,0.5,101.4,web,kabut asap makin tebal\n\
         p2,u1,2014-03-13T09:00:00+07:00,0.5,101.4,web,selamat pagi semua\n\
         p3,u2,2014-03-13T10:00:00+07:00,0.5,101.4,web,pakai masker dan dukung #saveriau\n",
    );
    let out = haze(&["classify", "--posts", "posts.csv", "--out", "o"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let got = fs::read_to_string(dir.path().join("o/classifications.csv")).unwrap();
    assert_eq!(
        got,
        "post_id,topics\n\
         p1,haze-general\n\
         p2,\n\
         p3,haze-hashtag;haze-health\n"
    );
}

#[test]
fn temporal_with_empty_posts_exits_one_with_empty_input() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "posts.csv", "");
    write(
        dir.path(),
        "hotspots.csv",
        "id,date,lat,lon,confidence,peatland\nh1,2014-03-13,0.5,101.4,high,true\n",
    );
    let out = haze(
        &[
            "temporal",
            "--posts",
            "posts.csv",
            "--hotspots",
            "hotspots.csv",
            "--out",
            "o",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("EmptyInput"), "stderr: {stderr}");
}

#[test]
fn help_exits_zero_unknown_flag_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    for sub in [
        "ingest-check",
        "classify",
        "temporal",
        "spatial",
        "mobility",
        "synth",
        "all",
    ] {
        let out = haze(&[sub, "--help"], dir.path());
        assert_eq!(out.status.code(), Some(0), "{sub} --help");
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains("--out"), "{sub} help mentions --out");
    }
    let out = haze(&["classify", "--no-such-flag"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = haze(&["not-a-command"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ingest_check_gates_on_malformed_fraction() {
    let dir = tempfile::tempdir().unwrap();
    // 1 malformed row out of 3 (33% > 1%).
    write(
        dir.path(),
        "posts.csv",
        "p1,u1,2014-03-13T08:00:00+07:00,0.5,101.4,web,a\n\
         garbage row\n\
         p2,u1,2014-03-13T09:00:00+07:00,0.5,101.4,web,b\n",
    );
    let out = haze(
        &["ingest-check", "--posts", "posts.csv", "--out", "o"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("1% budget"));

    // Strict mode fails on the row itself.
    let out = haze(
        &["ingest-check", "--posts", "posts.csv", "--out", "o", "--strict"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn synth_same_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        let out = haze(&["synth", "--seed", "99", "--out", name], dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for file in ["hotspots.csv", "posts.csv", "regions.csv", "air_quality.csv", "manifest.json"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical-seed runs");
    }
}

#[test]
fn outputs_stay_under_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = haze(&["synth", "--seed", "5", "--out", "scenario"], dir.path());
    assert!(out.status.success());
    let input_names: Vec<String> = fs::read_dir(dir.path().join("scenario"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    let snapshot: std::collections::BTreeMap<String, u64> = input_names
        .iter()
        .map(|n| {
            let p = dir.path().join("scenario").join(n);
            (n.clone(), fs::metadata(p).unwrap().len())
        })
        .collect();

    let out = haze(
        &[
            "all",
            "--posts",
            "scenario/posts.csv",
            "--hotspots",
            "scenario/hotspots.csv",
            "--regions",
            "scenario/regions.csv",
            "--out",
            "run",
            "--iterations",
            "50",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // Inputs untouched.
    for (name, len) in snapshot {
        let p = dir.path().join("scenario").join(&name);
        assert_eq!(fs::metadata(p).unwrap().len(), len, "{name} was modified");
    }
    // Top level holds only the two directories.
    let mut entries: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    entries.sort();
    assert_eq!(entries, vec!["run", "scenario"]);
}

#[test]
fn run_manifest_lists_outputs_with_hashes() {
    let dir = tempfile::tempdir().unwrap();
    assert!(haze(&["synth", "--seed", "3", "--out", "s"], dir.path())
        .status
        .success());
    let out = haze(
        &[
            "all",
            "--posts",
            "s/posts.csv",
            "--hotspots",
            "s/hotspots.csv",
            "--out",
            "run",
            "--iterations",
            "20",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run/run_manifest.json")).unwrap())
            .unwrap();
    let files = manifest["files"].as_array().unwrap();
    assert!(!files.is_empty());
    for f in files {
        let name = f["name"].as_str().unwrap();
        assert!(!name.contains('/'), "manifest paths are relative: {name}");
        let body = fs::read(dir.path().join("run").join(name)).unwrap();
        assert_eq!(f["bytes"].as_u64().unwrap(), body.len() as u64);
        assert_eq!(f["sha256"].as_str().unwrap().len(), 64);
    }
    // The manifest covers every output except itself and the resolved
    // config echo.
    let listed: std::collections::BTreeSet<&str> =
        files.iter().map(|f| f["name"].as_str().unwrap()).collect();
    for entry in fs::read_dir(dir.path().join("run")).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        if name == "run_manifest.json" || name == "resolved_config.json" {
            continue;
        }
        assert!(listed.contains(name.as_str()), "{name} missing from manifest");
    }
}
