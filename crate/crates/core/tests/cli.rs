//! End-to-end runs of the `ledsna` binary.

mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use ledsna::blackbox::{default_lexicon, query, PredictRequest, PredictResponse, Probe};
use serde_json::Value;

fn ledsna(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ledsna")).args(args).output().unwrap()
}

fn ok_json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> String {
    let path = dir.join(name);
    std::fs::write(&path, bytes).unwrap();
    path.to_str().unwrap().to_owned()
}

fn quadrants() -> Vec<u8> {
    common::ppm(8, 8, |x, y| match (x < 4, y < 4) {
        (true, true) => [200, 20, 20],
        (false, true) => [20, 200, 20],
        (true, false) => [20, 20, 200],
        (false, false) => [200, 200, 20],
    })
}

#[test]
fn overlay_with_every_segment_selected_is_the_input() {
    let dir = tempfile::tempdir().unwrap();
    let image = write(dir.path(), "quad.ppm", &quadrants());
    let overlay = dir.path().join("overlay.ppm");
    let json = dir.path().join("out.json");
    let out = ledsna(&[
        "explain-image",
        "--image",
        &image,
        "--grid",
        "2x2",
        "--k",
        "4",
        "--n-samples",
        "50",
        "--blackbox",
        "builtin:quadratic-logit:3",
        "--out",
        json.to_str().unwrap(),
        "--overlay",
        overlay.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read(&overlay).unwrap(), quadrants());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["top_k"].as_array().unwrap().len(), 4);
    for key in [
        "instance_id",
        "surrogate",
        "attributions",
        "top_k",
        "g_at_x",
        "f_at_x",
        "err",
        "r_squared",
        "n_samples",
        "seed",
        "config",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["instance_id"], "quad");
}

#[test]
fn overlay_dims_unselected_segments() {
    let dir = tempfile::tempdir().unwrap();
    let image = write(dir.path(), "quad.ppm", &quadrants());
    let overlay = dir.path().join("overlay.ppm");
    let out = ledsna(&[
        "explain-image",
        "--image",
        &image,
        "--grid",
        "2x2",
        "--k",
        "1",
        "--n-samples",
        "50",
        "--blackbox",
        "builtin:quadratic-logit:3",
        "--overlay",
        overlay.to_str().unwrap(),
    ]);
    let v = ok_json(&out);
    let top = v["top_k"][0].as_u64().unwrap() as u32;
    let original = ledsna::image::RgbImage::from_ppm(&quadrants()).unwrap();
    let dimmed = ledsna::image::RgbImage::from_ppm(&std::fs::read(&overlay).unwrap()).unwrap();
    for y in 0..8 {
        for x in 0..8 {
            let segment = u32::from(x >= 4) + 2 * u32::from(y >= 4);
            let i = y * 8 + x;
            let expected = if segment == top {
                original.pixel(i)
            } else {
                ledsna::image::Rgb(original.pixel(i).0.map(|c| (f64::from(c) * 0.3).round() as u8))
            };
            assert_eq!(dimmed.pixel(i), expected);
        }
    }
}

#[test]
fn lexicon_text_puts_the_positive_word_first() {
    let dir = tempfile::tempdir().unwrap();
    let text = write(dir.path(), "review.txt", b"the food was good\n");
    let out = ledsna(&[
        "explain-text",
        "--text",
        &text,
        "--blackbox",
        "builtin:lexicon",
        "--surrogate",
        "ridge",
        "--lambda",
        "0.01",
        "--n-samples",
        "200",
    ]);
    let v = ok_json(&out);
    assert_eq!(v["top_k"][0], 3);
    assert_eq!(v["features"][3]["tokens"][0], "good");
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let image = write(dir.path(), "quad.ppm", &quadrants());
    let text = write(dir.path(), "t.txt", b"a b c\n");
    let deps = write(dir.path(), "bad.json", br#"{"groups": [[0, 1], [1, 2]]}"#);

    let no_segmentation = ledsna(&["explain-image", "--image", &image, "--blackbox", "builtin:constant:0.5"]);
    assert_eq!(no_segmentation.status.code(), Some(2));

    let overlapping_groups = ledsna(&[
        "explain-text",
        "--text",
        &text,
        "--deps",
        &deps,
        "--blackbox",
        "builtin:lexicon",
    ]);
    assert_eq!(overlapping_groups.status.code(), Some(2));

    let bad_spec = ledsna(&["explain-text", "--text", &text, "--blackbox", "ftp:somewhere"]);
    assert_eq!(bad_spec.status.code(), Some(2));

    assert_eq!(ledsna(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(ledsna(&["--help"]).status.code(), Some(0));
}

#[test]
fn unreadable_inputs_are_usage_errors_and_pipeline_failures_exit_with_one() {
    let missing = ledsna(&[
        "explain-image",
        "--image",
        "/nonexistent/image.ppm",
        "--grid",
        "2x2",
        "--blackbox",
        "builtin:constant:0.5",
    ]);
    assert_eq!(missing.status.code(), Some(2));

    // The child rejects its own flags and exits before answering.
    let dir = tempfile::tempdir().unwrap();
    let text = write(dir.path(), "t.txt", b"a b c\n");
    let dead = format!(
        "subprocess:{} serve-builtin --blackbox builtin:quadratic-logit",
        env!("CARGO_BIN_EXE_ledsna")
    );
    let out = ledsna(&["explain-text", "--text", &text, "--blackbox", &dead, "--retries", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn compare_one_instance_gives_two_rows() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    std::fs::create_dir(&corpus).unwrap();
    write(&corpus, "quad.ppm", &quadrants());
    let csv = dir.path().join("rows.csv");
    let out = ledsna(&[
        "compare",
        "--corpus",
        corpus.to_str().unwrap(),
        "--grid",
        "2x2",
        "--blackbox",
        "builtin:quadratic-logit",
        "--n-samples",
        "100",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: Vec<String> = std::fs::read_to_string(&csv)
        .unwrap()
        .lines()
        .map(str::to_owned)
        .collect();
    assert_eq!(rows[0], "instance_id,trial,method,f_x,g_x,err,r_squared");
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("quad,0,svr,"));
    assert!(rows[2].starts_with("quad,0,ridge,"));
}

#[test]
fn compare_identical_methods_ties_at_one_half() {
    let out = ledsna(&[
        "compare",
        "--synthetic",
        "3",
        "--grid",
        "3x3",
        "--methods",
        "ridge,ridge",
        "--blackbox",
        "builtin:quadratic-logit",
        "--n-samples",
        "100",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    let summary: Vec<&str> = table.lines().filter(|l| l.contains("win rate")).collect();
    assert_eq!(summary.len(), 2, "{table}");
    for line in summary {
        assert!(line.contains("0 wins, 3 ties, 0 losses, win rate 0.5000"), "{line}");
    }
}

#[test]
fn subprocess_adapter_matches_the_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let text = write(
        dir.path(),
        "review.txt",
        b"service was terrible but the view was great\n",
    );
    let spawn = format!(
        "subprocess:{} serve-builtin --blackbox builtin:lexicon",
        env!("CARGO_BIN_EXE_ledsna")
    );
    let common = ["explain-text", "--text", &text, "--n-samples", "200", "--seed", "9"];
    let builtin = ok_json(&ledsna(&[&common[..], &["--blackbox", "builtin:lexicon"]].concat()));
    let external = ok_json(&ledsna(&[&common[..], &["--blackbox", &spawn]].concat()));
    assert_eq!(builtin["attributions"], external["attributions"]);
    assert_eq!(builtin["f_at_x"], external["f_at_x"]);
}

/// Minimal HTTP/1.1 endpoint scoring text batches with the built-in
/// lexicon. The first `fail_first` requests get a 503.
fn spawn_http(fail_first: usize) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/predict", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    std::thread::spawn(move || {
        let lexicon = default_lexicon();
        for stream in listener.incoming() {
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                if let Some((name, value)) = line.split_once(':') {
                    if name.eq_ignore_ascii_case("content-length") {
                        length = value.trim().parse().unwrap();
                    }
                }
            }
            let mut body = vec![0; length];
            reader.read_exact(&mut body).unwrap();
            let n = counter.fetch_add(1, Ordering::SeqCst);
            let (status, payload) = if n < fail_first {
                ("503 Service Unavailable", String::from("{}"))
            } else {
                let request: PredictRequest = serde_json::from_slice(&body).unwrap();
                let instances = request.to_instances().unwrap();
                let probes: Vec<Probe> = instances.iter().map(Probe::new).collect();
                let response = PredictResponse {
                    id: Some(request.id),
                    predictions: query(&lexicon, &probes).unwrap(),
                };
                ("200 OK", serde_json::to_string(&response).unwrap())
            };
            write!(
                stream,
                "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                payload.len()
            )
            .unwrap();
        }
    });
    (url, hits)
}

#[test]
fn http_adapter_retries_and_matches_the_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let text = write(dir.path(), "review.txt", b"friendly staff and excellent coffee\n");
    let (url, hits) = spawn_http(1);
    let common = [
        "explain-text",
        "--text",
        &text,
        "--n-samples",
        "150",
        "--seed",
        "4",
        "--parallelism",
        "1",
    ];
    let builtin = ok_json(&ledsna(&[&common[..], &["--blackbox", "builtin:lexicon"]].concat()));
    let remote = ok_json(&ledsna(
        &[&common[..], &["--blackbox", &url, "--retries", "2"]].concat(),
    ));
    assert_eq!(builtin["attributions"], remote["attributions"]);
    // 151 probes in batches of 64, plus the one rejected attempt.
    assert_eq!(hits.load(Ordering::SeqCst), 4);
}

#[test]
fn http_failures_past_the_retry_budget_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = write(dir.path(), "review.txt", b"friendly staff\n");
    let (url, _) = spawn_http(usize::MAX);
    let out = ledsna(&[
        "explain-text",
        "--text",
        &text,
        "--blackbox",
        &url,
        "--retries",
        "1",
        "--n-samples",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(1));
}
