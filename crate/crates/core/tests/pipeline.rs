use std::collections::BTreeMap;
use std::path::Path;

use cppgen_core::adapter::{AdapterRole, AdapterSpec};
use cppgen_core::dataset::{annotations_json, load_app, load_dataset, read_bundle, write_bundle, write_dataset};
use cppgen_core::detect::{DetectError, Detector, LocalizerParams};
use cppgen_core::evaluate::{eval_contexts, eval_segments, Segment, Task};
use cppgen_core::policy::SegmentGroup;
use cppgen_core::present::{
    assemble_bundle, lack_of_disclosure_report, render_html, to_canonical_json, BundleMeta, Palette, ScreenshotEntry,
};
use cppgen_core::synth::{ScreenBuilder, Shape};
use cppgen_core::taxonomy::TaxonomyError;
use cppgen_core::{BBox, ContextKind, DataType, EvalConfig, IconClassMap, KeywordResource, Taxonomy};
use serde_json::Value;

/// An adapter that stores its request in `<dir>/<name>.req` and answers with `response`.
fn replay(dir: &Path, name: &str, response: &str, role: AdapterRole) -> AdapterSpec {
    let resp = dir.join(format!("{name}.json"));
    std::fs::write(&resp, response).unwrap();
    let req = dir.join(format!("{name}.req"));
    AdapterSpec {
        program: "sh".into(),
        args: vec!["-c".into(), format!("cat > '{}'; cat '{}'", req.display(), resp.display())],
        role,
    }
}

fn screen(dir: &Path) -> (std::path::PathBuf, String) {
    let mut s = ScreenBuilder::new(400, 600);
    s.text(20, 40, 3, "Mobile number");
    s.text(20, 120, 3, "Welcome back");
    s.glyph(BBox { x: 300, y: 300, w: 36, h: 36 }, Shape::FilledCircle);
    let path = dir.join("screen.png");
    s.image.save(&path).unwrap();
    (path, s.ocr_response().to_string())
}

#[test]
fn detector_drives_all_three_adapters() {
    let dir = tempfile::tempdir().unwrap();
    let (path, ocr_resp) = screen(dir.path());
    let ocr = replay(dir.path(), "ocr", &ocr_resp, AdapterRole::Ocr);
    let text = replay(dir.path(), "text", r#"{"data_type": "Phone"}"#, AdapterRole::TextClassifier);
    let icon = replay(dir.path(), "icon", r#"{"class": "Microphone", "score": 0.75}"#, AdapterRole::IconClassifier);
    let (keywords, class_map, params) = (KeywordResource::default(), IconClassMap::default(), LocalizerParams::default());
    let detector = Detector {
        ocr: &ocr,
        text_classifier: Some(&text),
        icon_classifier: Some(&icon),
        keywords: &keywords,
        class_map: &class_map,
        model: None,
        params: &params,
    };
    let d = detector.detect("screen.png", &path).unwrap();
    let summary: Vec<(ContextKind, DataType, &str)> =
        d.contexts.iter().map(|c| (c.kind, c.data_type, c.evidence.as_str())).collect();
    assert_eq!(
        summary,
        [
            (ContextKind::Text, DataType::Phone, "mobile number"),
            (ContextKind::Text, DataType::Phone, "Welcome back"),
            (ContextKind::Icon, DataType::Voices, "Microphone"),
        ]
    );
    assert_eq!(d.contexts[2].score, 0.75);
    assert_eq!(d.contexts[2].bbox, BBox { x: 300, y: 300, w: 36, h: 36 });

    let req: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("ocr.req")).unwrap()).unwrap();
    assert_eq!(req["role"], "ocr");
    assert_eq!(req["version"], 1);
    assert_eq!(req["image_path"], path.display().to_string());
    let req: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("icon.req")).unwrap()).unwrap();
    assert_eq!(req["role"], "icon_classifier");
    assert!(req["classes"].as_array().unwrap().iter().any(|c| c == "LocationCrosshair"));
    let req: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("text.req")).unwrap()).unwrap();
    assert_eq!(req["data_types"].as_array().unwrap().len(), 12);
}

#[test]
fn keyword_fallback_and_adapter_failures() {
    let dir = tempfile::tempdir().unwrap();
    let (path, ocr_resp) = screen(dir.path());
    let ocr = replay(dir.path(), "ocr", &ocr_resp, AdapterRole::Ocr);
    let (keywords, class_map, params) = (KeywordResource::default(), IconClassMap::default(), LocalizerParams::default());
    let mut detector = Detector {
        ocr: &ocr,
        text_classifier: None,
        icon_classifier: None,
        keywords: &keywords,
        class_map: &class_map,
        model: None,
        params: &params,
    };
    let d = detector.detect("screen.png", &path).unwrap();
    assert_eq!(d.contexts.len(), 1);
    assert_eq!((d.contexts[0].data_type, d.contexts[0].evidence.as_str()), (DataType::Phone, "mobile number"));
    assert!(d.diagnostics.warnings.iter().any(|w| w.contains("unclassified")), "{:?}", d.diagnostics);

    let broken = AdapterSpec {
        program: "sh".into(),
        args: vec!["-c".into(), "cat >/dev/null; echo boom >&2; exit 3".into()],
        role: AdapterRole::Ocr,
    };
    detector.ocr = &broken;
    assert!(matches!(detector.detect("screen.png", &path), Err(DetectError::Adapter(_))));

    let garbled = replay(dir.path(), "bad", r#"{"regions": [{"bbox": [1, 2], "text": "x", "confidence": 1}]}"#, AdapterRole::Ocr);
    detector.ocr = &garbled;
    let err = detector.detect("screen.png", &path).unwrap_err().to_string();
    assert!(err.contains("bbox") || err.contains("schema") || err.contains("invalid"), "{err}");
}

#[test]
fn taxonomy_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("tax.tsv");
    std::fs::write(&p, "# hypernyms\nemail\tmail\nmail\tmessage\n").unwrap();
    let tax = Taxonomy::load(&p).unwrap();
    assert_eq!((tax.node_count(), tax.edge_count()), (3, 2));
    assert_eq!(tax.path_similarity("email", "message"), 1.0 / 3.0);
    assert_eq!(tax.path_similarity("message", "email"), 1.0 / 3.0);

    std::fs::write(&p, "email\tmail\nmail message\n").unwrap();
    assert!(matches!(Taxonomy::load(&p), Err(TaxonomyError::Malformed { line: 2, .. })));
    let builtin = Taxonomy::builtin();
    assert!(builtin.contains("email") && builtin.contains("location"));
}

const ANNOTATIONS: &str = r#"{
  "contexts": [
    {"screenshot": "a.png", "bbox": [10, 10, 50, 20], "kind": "Text", "data_type": "Email", "evidence": "Email"},
    {"screenshot": "b.png", "bbox": [40, 80, 24, 24], "kind": "Icon", "data_type": "Location", "evidence": "Location"}
  ],
  "segments": {"Email": ["We collect your email."], "Location": "FALLBACK"}
}"#;

fn make_app(root: &Path, id: &str, policy: (&str, &str)) {
    let app = root.join(id);
    std::fs::create_dir_all(app.join("screenshots")).unwrap();
    for name in ["b.png", "a.png"] {
        image::GrayImage::new(120, 160).save(app.join("screenshots").join(name)).unwrap();
    }
    std::fs::write(app.join("screenshots/notes.txt"), "ignored").unwrap();
    std::fs::write(app.join(policy.0), policy.1).unwrap();
    std::fs::write(app.join("annotations.json"), ANNOTATIONS).unwrap();
}

#[test]
fn dataset_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("src");
    make_app(&src, "zeta", ("policy.txt", "We collect your email.\n"));
    make_app(&src, "alpha", ("policy.html", "<p>We collect your email.</p>"));
    let first = load_dataset(&src).unwrap();
    assert_eq!(first.iter().map(|r| r.app_id.as_str()).collect::<Vec<_>>(), ["alpha", "zeta"]);
    assert_eq!(first[0].screenshots.iter().map(|s| s.id.as_str()).collect::<Vec<_>>(), ["a.png", "b.png"]);
    assert_eq!(first[0].contexts_for("b.png").len(), 1);

    let copy = dir.path().join("copy");
    write_dataset(&copy, &first).unwrap();
    let second = load_dataset(&copy).unwrap();
    assert_eq!(first.len(), second.len());
    for (a, b) in first.iter().zip(&second) {
        assert_eq!(a.app_id, b.app_id);
        assert_eq!(a.contexts, b.contexts);
        assert_eq!(a.segments, b.segments);
        assert_eq!(annotations_json(a), annotations_json(b));
        assert_eq!(std::fs::read(a.policy.path()).unwrap(), std::fs::read(b.policy.path()).unwrap());
        let dims = |r: &cppgen_core::dataset::AppRecord| {
            r.screenshots.iter().map(|s| (s.id.clone(), s.width, s.height)).collect::<Vec<_>>()
        };
        assert_eq!(dims(a), dims(b));
    }
    let again = load_app(&copy.join("alpha")).unwrap();
    assert_eq!(again.segments[&DataType::Location], Segment::Fallback);
}

#[test]
fn bundle_round_trip_and_views() {
    let dir = tempfile::tempdir().unwrap();
    make_app(dir.path(), "app", ("policy.html", "<p>x</p>"));
    let rec = load_app(&dir.path().join("app")).unwrap();
    let entries: Vec<ScreenshotEntry> = rec
        .screenshots
        .iter()
        .map(|s| ScreenshotEntry {
            screenshot_id: s.id.clone(),
            image_path: s.path.display().to_string(),
            contexts: rec.contexts_for(&s.id),
        })
        .collect();
    let mut email = SegmentGroup::fallback(DataType::Email);
    email.fallback = false;
    email.sentences.push(cppgen_core::policy::SentenceSpan {
        section_idx: 0,
        paragraph_idx: 0,
        char_start: 0,
        char_end: 22,
        text: "We collect your email.".into(),
    });
    let bundle = assemble_bundle("app", entries, vec![email], BundleMeta::new(true)).unwrap();
    assert_eq!(bundle.groups.len(), 12);

    let out = dir.path().join("out/bundle.json");
    write_bundle(&bundle, &out).unwrap();
    let back = read_bundle(&out).unwrap();
    assert_eq!(back, bundle);
    assert_eq!(to_canonical_json(&back).unwrap(), std::fs::read_to_string(&out).unwrap());

    let lack = lack_of_disclosure_report(&bundle);
    assert_eq!(lack.total, 1);
    assert_eq!(lack.contexts[0].data_type, DataType::Location);
    let html = render_html(&bundle, &Palette::default());
    assert!(html.contains("We collect your email."));

    // a prediction identical to the annotations scores perfectly
    let preds: BTreeMap<String, Vec<_>> =
        bundle.screenshots.iter().map(|s| (s.screenshot_id.clone(), s.contexts.clone())).collect();
    let gts: BTreeMap<String, Vec<_>> =
        rec.screenshots.iter().map(|s| (s.id.clone(), rec.contexts_for(&s.id))).collect();
    let cfg = EvalConfig::default();
    let report = eval_contexts(&preds, &gts, &cfg).unwrap();
    assert_eq!(report.tasks[&Task::Overall].totals.tp, 2);
    let seg = eval_segments(
        &BTreeMap::from([("app".to_string(), bundle.groups.clone())]),
        &BTreeMap::from([("app".to_string(), rec.segments.clone())]),
        &cfg,
    )
    .unwrap();
    let totals = seg.tasks[&Task::Segments].totals;
    assert_eq!((totals.tp, totals.fp, totals.fn_), (12, 0, 0));
}
