use std::collections::{BTreeMap, BTreeSet};
use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, Context as _};
use log::{info, warn};
use rayon::prelude::*;
use serde_json::json;

use cppgen_core::adapter::{AdapterRole, AdapterSpec};
use cppgen_core::dataset::{load_dataset, read_bundle, write_atomic, write_bundle, AppRecord};
use cppgen_core::detect::{train_knn, DetectError, Detector, Diagnostics, KnnModel};
use cppgen_core::evaluate::{context_tally, segment_tally, Task, Tally};
use cppgen_core::policy::{
    extract_segments, fetch_policy, parse_plain_text, parse_structure, ExtractHooks, HeadingRules,
    NbModel, ParseError, PolicyDocument, PolicySource, SegmentGroup,
};
use cppgen_core::present::{
    assemble_bundle, lack_of_disclosure_report, render_html, render_overlay, to_canonical_json,
    BundleMeta, ScreenshotEntry, SCHEMA_VERSION,
};
use cppgen_core::{IconClassMap, KeywordResource, Taxonomy};

use crate::config::{ConfigFile, RunConfig};
use crate::{Cli, Command, DetectArgs, ExtractArgs, Format};

/// A failed command: bad input or configuration (exit 1) or a failing
/// external dependency such as an adapter or the network (exit 2).
#[derive(Debug)]
pub enum Failure {
    Input(anyhow::Error),
    External(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::External(_) => 2,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Input(e) | Failure::External(e) => e,
        }
    }
}

type Res<T> = Result<T, Failure>;

trait Classify<T> {
    fn input(self) -> Res<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn input(self) -> Res<T> {
        self.map_err(|e| Failure::Input(e.into()))
    }
}

fn input_err(msg: String) -> Failure {
    Failure::Input(anyhow!(msg))
}

pub fn run(cli: Cli) -> Res<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(input_err("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .input()?;
    }
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p).input()?,
        None => ConfigFile::default(),
    };
    let mut cfg = RunConfig::from_file(&file).input()?;
    match cli.command {
        Command::Detect { detect, out } => {
            apply_detect_flags(&mut cfg, &detect);
            cfg.validate().input()?;
            cmd_detect(&cfg, &detect, &out)
        }
        Command::Extract { extract, out } => {
            apply_extract_flags(&mut cfg, &extract);
            cfg.validate().input()?;
            cmd_extract(&cfg, &extract, &out)
        }
        Command::Generate {
            detect,
            extract,
            app_id,
            out,
            html,
            overlays,
            reproducible,
        } => {
            apply_detect_flags(&mut cfg, &detect);
            apply_extract_flags(&mut cfg, &extract);
            cfg.reproducible |= reproducible;
            cfg.validate().input()?;
            cmd_generate(&cfg, &detect, &extract, &app_id, &out, html, overlays)
        }
        Command::Evaluate {
            dataset,
            pred,
            beta,
            segment_threshold,
            format,
            out,
        } => {
            if let Some(b) = beta {
                cfg.eval.iou_threshold = b;
            }
            if let Some(t) = segment_threshold {
                cfg.eval.segment_threshold = t;
            }
            cfg.validate().input()?;
            cmd_evaluate(&cfg, &dataset, &pred, format, &out)
        }
        Command::Lack { bundle, out } => {
            cfg.validate().input()?;
            cmd_lack(&bundle, &out)
        }
    }
}

fn apply_detect_flags(cfg: &mut RunConfig, a: &DetectArgs) {
    let over = |slot: &mut Option<String>, v: &Option<String>| {
        if v.is_some() {
            slot.clone_from(v);
        }
    };
    over(&mut cfg.ocr_adapter, &a.ocr_adapter);
    over(&mut cfg.text_adapter, &a.text_adapter);
    over(&mut cfg.icon_adapter, &a.icon_adapter);
    if a.icon_model.is_some() {
        cfg.icon_model.clone_from(&a.icon_model);
    }
}

fn apply_extract_flags(cfg: &mut RunConfig, a: &ExtractArgs) {
    for (slot, v) in [
        (&mut cfg.keywords, &a.keywords),
        (&mut cfg.taxonomy, &a.taxonomy),
        (&mut cfg.nb_model, &a.nb_model),
        (&mut cfg.heading_rules, &a.heading_rules),
    ] {
        if v.is_some() {
            slot.clone_from(v);
        }
    }
}

fn adapter(spec: &Option<String>, role: AdapterRole) -> Res<Option<AdapterSpec>> {
    spec.as_deref()
        .map(|s| AdapterSpec::parse(s, role))
        .transpose()
        .input()
}

/// Everything detection needs, loaded up front.
struct DetectSetup {
    ocr: AdapterSpec,
    text: Option<AdapterSpec>,
    icon: Option<AdapterSpec>,
    keywords: KeywordResource,
    class_map: IconClassMap,
    model: Option<KnnModel>,
}

fn load_keywords(cfg: &RunConfig) -> Res<KeywordResource> {
    match &cfg.keywords {
        Some(p) => KeywordResource::load(p)
            .with_context(|| format!("loading keywords from {}", p.display()))
            .input(),
        None => Ok(KeywordResource::default()),
    }
}

fn detect_setup(cfg: &RunConfig, shots: &[PathBuf]) -> Res<DetectSetup> {
    if shots.is_empty() {
        return Err(input_err("at least one --screenshot is required".into()));
    }
    let ocr = adapter(&cfg.ocr_adapter, AdapterRole::Ocr)?
        .ok_or_else(|| input_err("an OCR adapter is required (--ocr-adapter)".into()))?;
    let model = match &cfg.icon_model {
        Some(dir) => {
            let m = train_knn(dir, cfg.knn_k, cfg.knn_side)
                .with_context(|| format!("training icon classifier from {}", dir.display()))
                .input()?;
            info!("icon classifier: {} examples, classes {:?}", m.len(), m.classes());
            Some(m)
        }
        None => None,
    };
    Ok(DetectSetup {
        ocr,
        text: adapter(&cfg.text_adapter, AdapterRole::TextClassifier)?,
        icon: adapter(&cfg.icon_adapter, AdapterRole::IconClassifier)?,
        keywords: load_keywords(cfg)?,
        class_map: IconClassMap::default(),
        model,
    })
}

fn screenshot_id(p: &Path) -> Res<String> {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .ok_or_else(|| input_err(format!("{} is not a file path", p.display())))
}

fn detect_all(
    cfg: &RunConfig,
    setup: &DetectSetup,
    shots: &[PathBuf],
) -> Res<Vec<(ScreenshotEntry, Diagnostics)>> {
    let mut ids = BTreeSet::new();
    for p in shots {
        let id = screenshot_id(p)?;
        if !ids.insert(id.clone()) {
            return Err(input_err(format!("two screenshots share the file name {id:?}")));
        }
    }
    let detector = Detector {
        ocr: &setup.ocr,
        text_classifier: setup.text.as_ref(),
        icon_classifier: setup.icon.as_ref(),
        keywords: &setup.keywords,
        class_map: &setup.class_map,
        model: setup.model.as_ref(),
        params: &cfg.localizer,
    };
    let results: Vec<Res<(ScreenshotEntry, Diagnostics)>> = shots
        .par_iter()
        .map(|p| {
            let id = screenshot_id(p)?;
            info!("detecting contexts on {}", p.display());
            let d = detector.detect(&id, p).map_err(|e| {
                let err = anyhow::Error::new(e).context(format!("screenshot {}", p.display()));
                match err.downcast_ref::<DetectError>() {
                    Some(DetectError::Adapter(_)) => Failure::External(err),
                    _ => Failure::Input(err),
                }
            })?;
            Ok((
                ScreenshotEntry {
                    screenshot_id: id,
                    image_path: p.display().to_string(),
                    contexts: d.contexts,
                },
                d.diagnostics,
            ))
        })
        .collect();
    results.into_iter().collect()
}

fn cmd_detect(cfg: &RunConfig, args: &DetectArgs, out: &Path) -> Res<()> {
    let setup = detect_setup(cfg, &args.screenshots)?;
    let mut entries = detect_all(cfg, &setup, &args.screenshots)?;
    entries.sort_by(|a, b| a.0.screenshot_id.cmp(&b.0.screenshot_id));
    let warnings: BTreeMap<&str, &Vec<String>> = entries
        .iter()
        .filter(|(_, d)| !d.warnings.is_empty())
        .map(|(e, d)| (e.screenshot_id.as_str(), &d.warnings))
        .collect();
    let screenshots: Vec<&ScreenshotEntry> = entries.iter().map(|(e, _)| e).collect();
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "screenshots": screenshots,
        "warnings": warnings,
    });
    write_atomic(out, to_canonical_json(&doc).input()?.as_bytes()).input()?;
    let n: usize = screenshots.iter().map(|s| s.contexts.len()).sum();
    println!("{n} context(s) on {} screenshot(s) -> {}", screenshots.len(), out.display());
    Ok(())
}

fn policy_source(args: &ExtractArgs) -> Res<PolicySource> {
    match (&args.policy, &args.policy_url) {
        (Some(p), None) => Ok(PolicySource::Path(p.clone())),
        (None, Some(u)) => Ok(PolicySource::Url(u.clone())),
        _ => Err(input_err("exactly one of --policy or --policy-url is required".into())),
    }
}

fn preflight_policy(src: &PolicySource) -> Res<()> {
    if let PolicySource::Path(p) = src {
        if !p.is_file() {
            return Err(input_err(format!("policy file {} does not exist", p.display())));
        }
    }
    Ok(())
}

fn load_policy(cfg: &RunConfig, src: &PolicySource) -> Res<PolicyDocument> {
    let fetched = match fetch_policy(src, Duration::from_secs(cfg.fetch_timeout_secs)) {
        Ok(f) => f,
        Err(e) if e.is_external() => return Err(Failure::External(e.into())),
        Err(e) => return Err(Failure::Input(e.into())),
    };
    let plain = matches!(src, PolicySource::Path(p)
        if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("txt")));
    let parsed = if plain {
        parse_plain_text(&fetched.body, &fetched.final_location)
    } else {
        parse_structure(&fetched.body, &fetched.final_location)
    };
    Ok(match parsed {
        Ok(d) => d,
        Err(ParseError::EmptyText(s)) => {
            warn!("{s}: policy has no visible text; every data type falls back");
            PolicyDocument::empty(s)
        }
    })
}

fn extract_groups(cfg: &RunConfig, doc: &PolicyDocument) -> Res<Vec<SegmentGroup>> {
    let keywords = load_keywords(cfg)?;
    let taxonomy = match &cfg.taxonomy {
        Some(p) => Taxonomy::load(p)
            .with_context(|| format!("loading taxonomy from {}", p.display()))
            .input()?,
        None => Taxonomy::builtin(),
    };
    let nb = match &cfg.nb_model {
        Some(p) => Some(
            NbModel::load(p, cfg.nb_alpha)
                .with_context(|| format!("training relevance classifier from {}", p.display()))
                .input()?,
        ),
        None => None,
    };
    let mut matching = cfg.matching.clone();
    if let Some(p) = &cfg.heading_rules {
        matching.heading_rules = HeadingRules::load(p)
            .with_context(|| format!("reading heading rules {}", p.display()))
            .input()?;
    }
    Ok(extract_segments(
        doc,
        &keywords,
        &taxonomy,
        nb.as_ref(),
        &matching,
        ExtractHooks::default(),
    ))
}

fn cmd_extract(cfg: &RunConfig, args: &ExtractArgs, out: &Path) -> Res<()> {
    let src = policy_source(args)?;
    preflight_policy(&src)?;
    let doc = load_policy(cfg, &src)?;
    let groups = extract_groups(cfg, &doc)?;
    let body = json!({
        "schema_version": SCHEMA_VERSION,
        "source": src.describe(),
        "structured": doc.structured,
        "groups": groups,
    });
    write_atomic(out, to_canonical_json(&body).input()?.as_bytes()).input()?;
    let covered = groups.iter().filter(|g| !g.fallback).count();
    println!("{covered}/12 data types covered -> {}", out.display());
    Ok(())
}

fn png_bytes(img: image::RgbImage) -> Res<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    image::DynamicImage::ImageRgb8(img)
        .write_to(&mut buf, image::ImageFormat::Png)
        .input()?;
    Ok(buf.into_inner())
}

fn cmd_generate(
    cfg: &RunConfig,
    dargs: &DetectArgs,
    eargs: &ExtractArgs,
    app_id: &str,
    out: &Path,
    html: bool,
    overlays: bool,
) -> Res<()> {
    let src = policy_source(eargs)?;
    preflight_policy(&src)?;
    let setup = detect_setup(cfg, &dargs.screenshots)?;
    let detected = detect_all(cfg, &setup, &dargs.screenshots)?;
    let doc = load_policy(cfg, &src)?;
    let groups = extract_groups(cfg, &doc)?;

    let mut meta = BundleMeta::new(cfg.reproducible);
    meta.config = cfg.snapshot();
    meta.config.insert("policy".into(), src.describe());
    meta.adapters.insert("ocr".into(), setup.ocr.describe());
    if let Some(a) = &setup.text {
        meta.adapters.insert("text_classifier".into(), a.describe());
    }
    if let Some(a) = &setup.icon {
        meta.adapters.insert("icon_classifier".into(), a.describe());
    }
    let entries: Vec<ScreenshotEntry> = detected.into_iter().map(|(e, _)| e).collect();
    let bundle = assemble_bundle(app_id, entries, groups, meta).input()?;

    // render everything before writing anything
    let mut files: Vec<(PathBuf, Vec<u8>)> = Vec::new();
    if html {
        files.push((out.join("report.html"), render_html(&bundle, &cfg.palette).into_bytes()));
    }
    if overlays {
        for s in &bundle.screenshots {
            let img = image::open(&s.image_path)
                .with_context(|| format!("reading {}", s.image_path))
                .input()?
                .to_rgb8();
            let (annotated, warnings) = render_overlay(&img, &s.contexts, &cfg.palette, true);
            for w in warnings {
                warn!("{}: {w}", s.screenshot_id);
            }
            let stem = Path::new(&s.screenshot_id)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| s.screenshot_id.clone());
            files.push((out.join("overlays").join(format!("{stem}.png")), png_bytes(annotated)?));
        }
    }
    write_bundle(&bundle, &out.join("bundle.json")).input()?;
    for (path, bytes) in files {
        write_atomic(&path, &bytes).input()?;
    }
    let lack = lack_of_disclosure_report(&bundle);
    println!(
        "{}: {} context(s), {} without disclosure -> {}",
        app_id,
        bundle.contexts().count(),
        lack.total,
        out.display()
    );
    Ok(())
}

fn eval_app(cfg: &RunConfig, app: &AppRecord, pred_root: &Path) -> Res<Tally> {
    let gts: BTreeMap<String, Vec<_>> = app
        .screenshots
        .iter()
        .map(|s| (s.id.clone(), app.contexts_for(&s.id)))
        .collect();
    let gt_segments = BTreeMap::from([(app.app_id.clone(), app.segments.clone())]);
    let path = pred_root.join(&app.app_id).join("bundle.json");
    let (pred_ctx, pred_groups) = if path.is_file() {
        let b = read_bundle(&path).input()?;
        if b.app_id != app.app_id {
            warn!("{}: bundle app id is {:?}", path.display(), b.app_id);
        }
        let ctx: BTreeMap<String, Vec<_>> = b
            .screenshots
            .into_iter()
            .map(|s| (s.screenshot_id, s.contexts))
            .collect();
        (ctx, BTreeMap::from([(app.app_id.clone(), b.groups)]))
    } else {
        warn!("no predictions for app {} ({} missing); counting all ground truth as missed", app.app_id, path.display());
        (BTreeMap::new(), BTreeMap::new())
    };
    let ctx = context_tally(&pred_ctx, &gts, &cfg.eval)
        .with_context(|| format!("app {}", app.app_id))
        .input()?;
    let seg = segment_tally(&pred_groups, &gt_segments, &cfg.eval)
        .with_context(|| format!("app {}", app.app_id))
        .input()?;
    Ok(ctx.merge(seg))
}

fn cmd_evaluate(cfg: &RunConfig, dataset: &Path, pred: &Path, format: Format, out: &Path) -> Res<()> {
    if !pred.is_dir() {
        return Err(input_err(format!("prediction directory {} does not exist", pred.display())));
    }
    let apps = load_dataset(dataset).input()?;
    let tallies: Vec<Res<Tally>> = apps.par_iter().map(|a| eval_app(cfg, a, pred)).collect();
    let mut total = Tally::default();
    for t in tallies {
        total = total.merge(t?);
    }
    let report = total.report(&[Task::Textual, Task::Iconic, Task::Overall, Task::Segments]);
    let table = report.to_table();
    let body = match format {
        Format::Json => to_canonical_json(&report).input()?,
        Format::Table => table.clone(),
    };
    write_atomic(out, body.as_bytes()).input()?;
    print!("{table}");
    Ok(())
}

fn cmd_lack(bundle: &Path, out: &Path) -> Res<()> {
    let b = read_bundle(bundle).input()?;
    let report = lack_of_disclosure_report(&b);
    write_atomic(out, to_canonical_json(&report).input()?.as_bytes()).input()?;
    print!("{}", report.to_text());
    Ok(())
}
