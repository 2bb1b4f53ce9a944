use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cppgen_core::synth::{ScreenBuilder, Shape};
use cppgen_core::BBox;
use serde_json::Value;

fn cppgen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cppgen")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A screenshot with one phone label and one glyph, plus a replay OCR adapter command.
fn fixture_screen(dir: &Path, name: &str) -> (PathBuf, String) {
    let mut b = ScreenBuilder::new(300, 500);
    b.text(10, 20, 3, "Phone");
    b.glyph(BBox { x: 200, y: 300, w: 30, h: 30 }, Shape::Ring);
    let shot = dir.join(name);
    b.image.save(&shot).unwrap();
    let resp = dir.join(format!("{name}.ocr.json"));
    std::fs::write(&resp, b.ocr_response().to_string()).unwrap();
    (shot, format!("sh -c 'cat >/dev/null; cat \"{}\"'", resp.display()))
}

fn policy(dir: &Path) -> PathBuf {
    let p = dir.join("policy.html");
    std::fs::write(
        &p,
        "<h2>Information We Collect</h2><p>We collect your phone number.</p><h2>Contact</h2><p>Write to us.</p>",
    )
    .unwrap();
    p
}

#[test]
fn usage_help_and_version() {
    assert_eq!(code(&cppgen(&[])), 1);
    assert_eq!(code(&cppgen(&["frobnicate"])), 1);
    assert_eq!(code(&cppgen(&["--help"])), 0);
    let v = cppgen(&["--version"]);
    assert_eq!(code(&v), 0);
    let text = String::from_utf8_lossy(&v.stdout);
    assert!(text.contains("bundle schema 1") && text.contains("adapter protocol 1"), "{text}");
}

#[test]
fn detect_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ctx.json");
    let (shot, ocr) = fixture_screen(dir.path(), "a.png");

    let r = cppgen(&["detect", "--ocr-adapter", &ocr, "--out", s(&out)]);
    assert_eq!(code(&r), 1, "{}", stderr(&r));

    let bogus = dir.path().join("bogus.png");
    std::fs::write(&bogus, b"not a png").unwrap();
    let r = cppgen(&["detect", "--screenshot", s(&bogus), "--ocr-adapter", &ocr, "--out", s(&out)]);
    assert_eq!(code(&r), 1, "{}", stderr(&r));

    let failing = "sh -c 'cat >/dev/null; exit 4'";
    let r = cppgen(&["detect", "--screenshot", s(&shot), "--ocr-adapter", failing, "--out", s(&out)]);
    assert_eq!(code(&r), 2, "{}", stderr(&r));
    assert!(!out.exists());

    let r = cppgen(&["detect", "--screenshot", s(&shot), "--ocr-adapter", &ocr, "--out", s(&out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let v = read_json(&out);
    let contexts = v["screenshots"][0]["contexts"].as_array().unwrap();
    assert_eq!(contexts.len(), 1);
    assert_eq!(contexts[0]["data_type"], "Phone");
    let warnings = v["warnings"]["a.png"].as_array().unwrap();
    assert!(warnings.iter().any(|w| w.as_str().unwrap().contains("unclassified")), "{warnings:?}");
}

#[test]
fn parallel_detection_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut args: Vec<String> = vec!["detect".into()];
    let mut ocr = String::new();
    for i in 0..6 {
        let (shot, cmd) = fixture_screen(dir.path(), &format!("s{i}.png"));
        args.push("--screenshot".into());
        args.push(shot.display().to_string());
        ocr = cmd;
    }
    args.push("--ocr-adapter".into());
    args.push(ocr);
    let run = |jobs: &str, out: &Path| {
        let mut a = args.clone();
        a.extend(["--jobs".into(), jobs.into(), "--out".into(), out.display().to_string()]);
        let a: Vec<&str> = a.iter().map(String::as_str).collect();
        let r = cppgen(&a);
        assert_eq!(code(&r), 0, "{}", stderr(&r));
        std::fs::read(out).unwrap()
    };
    let (one, four) = (dir.path().join("one.json"), dir.path().join("four.json"));
    assert_eq!(run("1", &one), run("4", &four));
}

fn serve_404() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        for mut stream in listener.incoming().flatten() {
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut line = String::new();
            while reader.read_line(&mut line).unwrap_or(0) > 0 && line != "\r\n" {
                line.clear();
            }
            let _ = stream.write_all(b"HTTP/1.1 404 Not Found\r\nContent-Length: 0\r\nConnection: close\r\n\r\n");
        }
    });
    format!("http://{addr}/policy")
}

#[test]
fn extract_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("groups.json");

    let r = cppgen(&["extract", "--policy-url", &serve_404(), "--out", s(&out)]);
    assert_eq!(code(&r), 2, "{}", stderr(&r));
    assert!(stderr(&r).contains("404"));
    assert!(!out.exists());

    let r = cppgen(&["extract", "--policy", s(&dir.path().join("absent.html")), "--out", s(&out)]);
    assert_eq!(code(&r), 1);

    let r = cppgen(&["extract", "--policy", s(&policy(dir.path())), "--out", s(&out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let v = read_json(&out);
    let groups = v["groups"].as_array().unwrap();
    assert_eq!(groups.len(), 12);
    let phone = groups.iter().find(|g| g["data_type"] == "Phone").unwrap();
    assert_eq!(phone["fallback"], false);
    assert_eq!(groups.iter().filter(|g| g["fallback"] == true).count(), 11);

    let empty = dir.path().join("empty.txt");
    std::fs::write(&empty, "   \n").unwrap();
    let r = cppgen(&["extract", "--policy", s(&empty), "--out", s(&out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let v = read_json(&out);
    assert!(v["groups"].as_array().unwrap().iter().all(|g| g["fallback"] == true));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let (shot, ocr) = fixture_screen(dir.path(), "a.png");
    let pol = policy(dir.path());
    let cfg = dir.path().join("run.conf");
    std::fs::write(
        &cfg,
        "adapter.ocr = sh -c 'exit 9'\nknn.k = 3\noutput.reproducible = true\npalette.Phone = #123456\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let r = cppgen(&[
        "generate", "--config", s(&cfg), "--screenshot", s(&shot), "--ocr-adapter", &ocr, "--policy", s(&pol),
        "--app-id", "demo", "--out", s(&out),
    ]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let b = read_json(&out.join("bundle.json"));
    assert_eq!(b["meta"]["config"]["knn.k"], "3");
    assert_eq!(b["meta"]["generated_at"], "1970-01-01T00:00:00Z");
    assert!(b["meta"]["adapters"]["ocr"].as_str().unwrap().contains(".ocr.json"));

    let bad = dir.path().join("bad.conf");
    std::fs::write(&bad, "knn.k = 3\nthreshold = 0.5\n").unwrap();
    let out2 = dir.path().join("out2");
    let r = cppgen(&[
        "generate", "--config", s(&bad), "--screenshot", s(&shot), "--ocr-adapter", &ocr, "--policy", s(&pol),
        "--app-id", "demo", "--out", s(&out2),
    ]);
    assert_eq!(code(&r), 1);
    assert!(stderr(&r).contains(":2:"), "{}", stderr(&r));
    assert!(!out2.exists());

    let r = cppgen(&[
        "generate", "--screenshot", s(&shot), "--ocr-adapter", &ocr, "--policy", s(&dir.path().join("gone.html")),
        "--app-id", "demo", "--out", s(&out2),
    ]);
    assert_eq!(code(&r), 1);
    assert!(!out2.exists());
}

#[test]
fn evaluate_counts_missing_predictions_and_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let app = dir.path().join("data/app1");
    std::fs::create_dir_all(app.join("screenshots")).unwrap();
    image::GrayImage::new(100, 100).save(app.join("screenshots/x.png")).unwrap();
    std::fs::write(app.join("policy.txt"), "We collect your email.").unwrap();
    std::fs::write(
        app.join("annotations.json"),
        r#"{"contexts": [{"screenshot": "x.png", "bbox": [1, 1, 20, 10], "kind": "Text", "data_type": "Email", "evidence": "Email"}],
            "segments": {"Email": ["We collect your email."]}}"#,
    )
    .unwrap();
    let pred = dir.path().join("pred");
    std::fs::create_dir_all(&pred).unwrap();
    let out = dir.path().join("m.json");
    let r = cppgen(&["evaluate", "--dataset", s(&dir.path().join("data")), "--pred", s(&pred), "--out", s(&out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    assert!(stderr(&r).contains("no predictions"), "{}", stderr(&r));
    let m = read_json(&out);
    assert_eq!(m["tasks"]["Overall"]["totals"]["fn"], 1);
    assert_eq!(m["tasks"]["Segments"]["totals"]["fn"], 12);
    assert_eq!(m["tasks"]["Iconic"]["macro_average"], Value::Null);

    let table = dir.path().join("m.txt");
    let r = cppgen(&[
        "evaluate", "--dataset", s(&dir.path().join("data")), "--pred", s(&pred), "--format", "table", "--out",
        s(&table), "--beta", "0.7",
    ]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let t = std::fs::read_to_string(&table).unwrap();
    assert!(t.contains("Segments") && t.contains("Average"), "{t}");

    let r = cppgen(&["evaluate", "--dataset", s(&dir.path().join("data")), "--pred", s(&pred), "--beta", "2", "--out", s(&table)]);
    assert_eq!(code(&r), 1);
}
