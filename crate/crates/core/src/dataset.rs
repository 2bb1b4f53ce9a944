//! Benchmark directories: `<root>/<app_id>/{policy.html|policy.txt, screenshots/, annotations.json}`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::evaluate::Segment;
use crate::model::{BBox, Context, ContextKind, DataType};
use crate::policy::{parse_plain_text, parse_structure, ParseError, PolicyDocument};
use crate::present::{to_canonical_json, CppBundle};

pub const ANNOTATIONS_FILE: &str = "annotations.json";
pub const SCREENSHOT_DIR: &str = "screenshots";
/// Marker for a data type the policy does not cover.
pub const FALLBACK_MARKER: &str = "FALLBACK";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: no policy.html or policy.txt", dir.display())]
    MissingPolicy { dir: PathBuf },
    #[error("{}: missing {ANNOTATIONS_FILE}", dir.display())]
    MissingAnnotations { dir: PathBuf },
    #[error("{}:{line}:{column}: malformed JSON: {msg}", file.display())]
    Json {
        file: PathBuf,
        line: usize,
        column: usize,
        msg: String,
    },
    #[error("{}: {at}: {msg}", file.display())]
    Invalid {
        file: PathBuf,
        /// JSON path of the offending value, e.g. `contexts[3].bbox`.
        at: String,
        msg: String,
    },
    #[error("{}: cannot read screenshot: {msg}", path.display())]
    Image { path: PathBuf, msg: String },
}

/// Which policy file an app ships.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicyFile {
    Html(PathBuf),
    Text(PathBuf),
}

impl PolicyFile {
    pub fn path(&self) -> &Path {
        match self {
            PolicyFile::Html(p) | PolicyFile::Text(p) => p,
        }
    }

    /// Parse into a document; a policy without visible text yields an empty document.
    pub fn load(&self) -> Result<PolicyDocument, DatasetError> {
        let path = self.path();
        let raw = std::fs::read(path).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let source = path.display().to_string();
        let parsed = match self {
            PolicyFile::Html(_) => parse_structure(&raw, &source),
            PolicyFile::Text(_) => parse_plain_text(&raw, &source),
        };
        Ok(match parsed {
            Ok(d) => d,
            Err(ParseError::EmptyText(_)) => PolicyDocument::empty(source),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Screenshot {
    /// File name, used as the screenshot id.
    pub id: String,
    pub path: PathBuf,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppRecord {
    pub app_id: String,
    pub dir: PathBuf,
    pub policy: PolicyFile,
    /// Sorted by id.
    pub screenshots: Vec<Screenshot>,
    /// Ground-truth contexts in file order; `screenshot_id` is the screenshot file name.
    pub contexts: Vec<Context>,
    pub segments: BTreeMap<DataType, Segment>,
}

impl AppRecord {
    pub fn contexts_for(&self, screenshot_id: &str) -> Vec<Context> {
        self.contexts
            .iter()
            .filter(|c| c.screenshot_id == screenshot_id)
            .cloned()
            .collect()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnnotations {
    contexts: Vec<RawContext>,
    #[serde(default)]
    segments: OrderedEntries,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawContext {
    screenshot: String,
    bbox: Value,
    kind: String,
    data_type: String,
    evidence: String,
}

/// Object entries in document order, duplicates preserved.
#[derive(Default)]
struct OrderedEntries(Vec<(String, Value)>);

impl<'de> Deserialize<'de> for OrderedEntries {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = OrderedEntries;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object mapping data types to segments")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut m: A) -> Result<Self::Value, A::Error> {
                let mut v = Vec::new();
                while let Some((k, val)) = m.next_entry::<String, Value>()? {
                    v.push((k, val));
                }
                Ok(OrderedEntries(v))
            }
        }
        d.deserialize_map(V)
    }
}

#[derive(Serialize)]
struct OutContext<'a> {
    screenshot: &'a str,
    bbox: BBox,
    kind: ContextKind,
    data_type: DataType,
    evidence: &'a str,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn is_image(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
        .unwrap_or(false)
}

fn parse_bbox(v: &Value) -> Result<BBox, String> {
    let arr = v.as_array().filter(|a| a.len() == 4).ok_or("expected [x, y, w, h]")?;
    let mut n = [0u32; 4];
    for (slot, x) in n.iter_mut().zip(arr) {
        *slot = x
            .as_u64()
            .and_then(|x| u32::try_from(x).ok())
            .ok_or_else(|| format!("{x} is not a non-negative integer"))?;
    }
    BBox::new(n[0], n[1], n[2], n[3]).map_err(|e| e.to_string())
}

fn parse_segment(v: &Value) -> Result<Segment, String> {
    match v {
        Value::String(s) if s == FALLBACK_MARKER => Ok(Segment::Fallback),
        Value::Array(items) => items
            .iter()
            .map(|i| i.as_str().map(str::to_string).ok_or("sentences must be strings"))
            .collect::<Result<Vec<_>, _>>()
            .map(Segment::Sentences)
            .map_err(str::to_string),
        _ => Err(format!("expected a sentence list or \"{FALLBACK_MARKER}\"")),
    }
}

/// Load one app directory.
pub fn load_app(dir: &Path) -> Result<AppRecord, DatasetError> {
    let app_id = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let policy = if dir.join("policy.html").is_file() {
        PolicyFile::Html(dir.join("policy.html"))
    } else if dir.join("policy.txt").is_file() {
        PolicyFile::Text(dir.join("policy.txt"))
    } else {
        return Err(DatasetError::MissingPolicy { dir: dir.to_path_buf() });
    };

    let shot_dir = dir.join(SCREENSHOT_DIR);
    let mut screenshots = Vec::new();
    if shot_dir.is_dir() {
        for e in std::fs::read_dir(&shot_dir).map_err(io_err(&shot_dir))? {
            let path = e.map_err(io_err(&shot_dir))?.path();
            if !path.is_file() || !is_image(&path) {
                continue;
            }
            let (width, height) = image::image_dimensions(&path).map_err(|e| DatasetError::Image {
                path: path.clone(),
                msg: e.to_string(),
            })?;
            let id = path.file_name().unwrap().to_string_lossy().into_owned();
            screenshots.push(Screenshot { id, path, width, height });
        }
    }
    screenshots.sort_by(|a, b| a.id.cmp(&b.id));

    let file = dir.join(ANNOTATIONS_FILE);
    if !file.is_file() {
        return Err(DatasetError::MissingAnnotations { dir: dir.to_path_buf() });
    }
    let text = std::fs::read_to_string(&file).map_err(io_err(&file))?;
    let raw: RawAnnotations = serde_json::from_str(&text).map_err(|e| DatasetError::Json {
        file: file.clone(),
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    })?;
    let invalid = |at: String, msg: String| DatasetError::Invalid {
        file: file.clone(),
        at,
        msg,
    };

    let mut contexts = Vec::with_capacity(raw.contexts.len());
    for (i, c) in raw.contexts.iter().enumerate() {
        let at = |field: &str| format!("contexts[{i}].{field}");
        let shot = screenshots
            .iter()
            .find(|s| s.id == c.screenshot)
            .ok_or_else(|| {
                invalid(
                    at("screenshot"),
                    format!("no screenshot {:?} in {}", c.screenshot, shot_dir.display()),
                )
            })?;
        let bbox = parse_bbox(&c.bbox).map_err(|m| invalid(at("bbox"), m))?;
        bbox.check_bounds(shot.width, shot.height)
            .map_err(|e| invalid(at("bbox"), e.to_string()))?;
        let kind = match c.kind.as_str() {
            "Text" => ContextKind::Text,
            "Icon" => ContextKind::Icon,
            other => return Err(invalid(at("kind"), format!("unknown kind {other:?}"))),
        };
        let data_type: DataType = c
            .data_type
            .parse()
            .map_err(|e: crate::model::UnknownDataType| invalid(at("data_type"), e.to_string()))?;
        if c.evidence.trim().is_empty() {
            return Err(invalid(at("evidence"), "evidence must not be empty".into()));
        }
        contexts.push(Context {
            screenshot_id: c.screenshot.clone(),
            bbox,
            kind,
            data_type,
            evidence: c.evidence.clone(),
            score: 1.0,
        });
    }

    let mut segments = BTreeMap::new();
    for (key, v) in &raw.segments.0 {
        let at = format!("segments.{key}");
        let t: DataType = key
            .parse()
            .map_err(|e: crate::model::UnknownDataType| invalid(at.clone(), e.to_string()))?;
        let seg = parse_segment(v).map_err(|m| invalid(at.clone(), m))?;
        if segments.insert(t, seg).is_some() {
            return Err(invalid(at, format!("data type {t} appears more than once")));
        }
    }

    Ok(AppRecord {
        app_id,
        dir: dir.to_path_buf(),
        policy,
        screenshots,
        contexts,
        segments,
    })
}

/// Load every app directory under `root`, ordered by app id.
pub fn load_dataset(root: &Path) -> Result<Vec<AppRecord>, DatasetError> {
    let mut dirs = Vec::new();
    for e in std::fs::read_dir(root).map_err(io_err(root))? {
        let p = e.map_err(io_err(root))?.path();
        if p.is_dir() {
            dirs.push(p);
        }
    }
    dirs.sort();
    dirs.iter().map(|d| load_app(d)).collect()
}

/// `annotations.json` content for a record, canonical form.
pub fn annotations_json(rec: &AppRecord) -> String {
    let contexts: Vec<OutContext> = rec
        .contexts
        .iter()
        .map(|c| OutContext {
            screenshot: &c.screenshot_id,
            bbox: c.bbox,
            kind: c.kind,
            data_type: c.data_type,
            evidence: &c.evidence,
        })
        .collect();
    let segments: BTreeMap<&str, Value> = rec
        .segments
        .iter()
        .map(|(t, s)| {
            let v = match s {
                Segment::Fallback => Value::String(FALLBACK_MARKER.into()),
                Segment::Sentences(v) => Value::from(v.clone()),
            };
            (t.as_str(), v)
        })
        .collect();
    to_canonical_json(&serde_json::json!({ "contexts": contexts, "segments": segments }))
        .expect("annotations serialize")
}

/// Copy records into `root` in the loadable layout.
pub fn write_dataset(root: &Path, records: &[AppRecord]) -> Result<(), DatasetError> {
    for rec in records {
        let dir = root.join(&rec.app_id);
        let shots = dir.join(SCREENSHOT_DIR);
        std::fs::create_dir_all(&shots).map_err(io_err(&shots))?;
        let name = match rec.policy {
            PolicyFile::Html(_) => "policy.html",
            PolicyFile::Text(_) => "policy.txt",
        };
        let dst = dir.join(name);
        std::fs::copy(rec.policy.path(), &dst).map_err(io_err(&dst))?;
        for s in &rec.screenshots {
            let dst = shots.join(&s.id);
            std::fs::copy(&s.path, &dst).map_err(io_err(&dst))?;
        }
        let file = dir.join(ANNOTATIONS_FILE);
        std::fs::write(&file, annotations_json(rec)).map_err(io_err(&file))?;
    }
    Ok(())
}

/// Write text atomically: a sibling temp file renamed into place.
pub fn write_atomic(out: &Path, content: &[u8]) -> Result<(), DatasetError> {
    let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    std::io::Write::write_all(&mut tmp, content).map_err(io_err(out))?;
    tmp.persist(out).map_err(|e| DatasetError::Io {
        path: out.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

/// Canonical bundle JSON; rewriting an unchanged bundle is byte-identical.
pub fn write_bundle(bundle: &CppBundle, out: &Path) -> Result<(), DatasetError> {
    let json = to_canonical_json(bundle).expect("bundle serializes");
    write_atomic(out, json.as_bytes())
}

pub fn read_bundle(path: &Path) -> Result<CppBundle, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| DatasetError::Json {
        file: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bbox_parsing() {
        assert_eq!(parse_bbox(&serde_json::json!([1, 2, 3, 4])), Ok(BBox { x: 1, y: 2, w: 3, h: 4 }));
        assert!(parse_bbox(&serde_json::json!([1, 2, 3])).is_err());
        assert!(parse_bbox(&serde_json::json!([-1, 2, 3, 4])).is_err());
        assert!(parse_bbox(&serde_json::json!([1, 2, 0, 4])).is_err());
        assert!(parse_bbox(&serde_json::json!([1.5, 2, 3, 4])).is_err());
    }

    #[test]
    fn segment_values() {
        assert_eq!(parse_segment(&serde_json::json!("FALLBACK")), Ok(Segment::Fallback));
        assert_eq!(
            parse_segment(&serde_json::json!(["a", "b"])),
            Ok(Segment::Sentences(vec!["a".into(), "b".into()]))
        );
        assert!(parse_segment(&serde_json::json!("fallback")).is_err());
        assert!(parse_segment(&serde_json::json!([1])).is_err());
    }

    #[test]
    fn duplicate_keys_preserved() {
        let e: OrderedEntries = serde_json::from_str(r#"{"Email": [], "Email": "FALLBACK"}"#).unwrap();
        assert_eq!(e.0.len(), 2);
    }
}
