//! CPP bundles: assembly, canonical JSON, HTML report, overlays, and the
//! lack-of-disclosure report.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::font;
use crate::model::{BBox, Context, DataType};
use crate::policy::{SegmentGroup, FALLBACK_TEXT};

/// Version of the bundle, contexts, and report JSON layouts.
pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Timestamp written in reproducible mode.
pub const EPOCH_TIMESTAMP: &str = "1970-01-01T00:00:00Z";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenshotEntry {
    pub screenshot_id: String,
    pub image_path: String,
    pub contexts: Vec<Context>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub schema_version: u32,
    pub tool_version: String,
    pub generated_at: String,
    /// Role name to adapter command line.
    pub adapters: BTreeMap<String, String>,
    /// Effective configuration as key/value pairs.
    pub config: BTreeMap<String, String>,
}

impl BundleMeta {
    pub fn new(reproducible: bool) -> Self {
        BundleMeta {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            generated_at: timestamp(reproducible),
            adapters: BTreeMap::new(),
            config: BTreeMap::new(),
        }
    }
}

/// Current UTC time, or the epoch when `reproducible`.
pub fn timestamp(reproducible: bool) -> String {
    if reproducible {
        EPOCH_TIMESTAMP.to_string()
    } else {
        chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CppBundle {
    pub app_id: String,
    pub screenshots: Vec<ScreenshotEntry>,
    /// One group per data type, in canonical type order.
    pub groups: Vec<SegmentGroup>,
    pub meta: BundleMeta,
}

#[derive(Debug, Error, PartialEq)]
pub enum BundleError {
    #[error("duplicate screenshot id {0:?}")]
    DuplicateScreenshot(String),
    #[error("two segment groups for data type {0}")]
    DuplicateGroup(DataType),
    #[error("context in screenshot {screenshot:?} is labelled with screenshot id {found:?}")]
    ForeignContext { screenshot: String, found: String },
}

/// Put contexts and groups into canonical order. Data types without a
/// supplied group get a fallback group.
pub fn assemble_bundle(
    app_id: &str,
    mut screenshots: Vec<ScreenshotEntry>,
    groups: Vec<SegmentGroup>,
    meta: BundleMeta,
) -> Result<CppBundle, BundleError> {
    screenshots.sort_by(|a, b| a.screenshot_id.cmp(&b.screenshot_id));
    for pair in screenshots.windows(2) {
        if pair[0].screenshot_id == pair[1].screenshot_id {
            return Err(BundleError::DuplicateScreenshot(pair[0].screenshot_id.clone()));
        }
    }
    for s in &mut screenshots {
        if let Some(c) = s.contexts.iter().find(|c| c.screenshot_id != s.screenshot_id) {
            return Err(BundleError::ForeignContext {
                screenshot: s.screenshot_id.clone(),
                found: c.screenshot_id.clone(),
            });
        }
        s.contexts.sort_by(|a, b| a.canonical_cmp(b));
    }
    let mut slots: Vec<Option<SegmentGroup>> = vec![None; DataType::ALL.len()];
    for g in groups {
        let slot = &mut slots[g.data_type.index()];
        if slot.is_some() {
            return Err(BundleError::DuplicateGroup(g.data_type));
        }
        *slot = Some(g);
    }
    let groups = DataType::ALL
        .iter()
        .zip(slots)
        .map(|(t, g)| g.unwrap_or_else(|| SegmentGroup::fallback(*t)))
        .collect();
    Ok(CppBundle {
        app_id: app_id.to_string(),
        screenshots,
        groups,
        meta,
    })
}

impl CppBundle {
    pub fn group(&self, t: DataType) -> &SegmentGroup {
        &self.groups[t.index()]
    }

    pub fn contexts(&self) -> impl Iterator<Item = &Context> {
        self.screenshots.iter().flat_map(|s| s.contexts.iter())
    }

    /// Data types with at least one context, in canonical order.
    pub fn detected_types(&self) -> Vec<DataType> {
        let set: BTreeSet<DataType> = self.contexts().map(|c| c.data_type).collect();
        set.into_iter().collect()
    }
}

/// Pretty JSON with object keys sorted at every level, LF line endings, and a trailing newline.
pub fn to_canonical_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    // serde_json's default Map is ordered by key
    let v = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

pub fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

/// Merge overlapping or touching character ranges.
fn merge_ranges(mut r: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    r.sort_unstable();
    let mut out: Vec<(usize, usize)> = Vec::with_capacity(r.len());
    for (s, e) in r {
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

/// Escaped sentence with `<strong>` around each highlighted character range.
pub fn highlight_html(text: &str, ranges: &[(usize, usize)]) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::new();
    let mut pos = 0;
    for (s, e) in merge_ranges(ranges.to_vec()) {
        let (s, e) = (s.min(chars.len()), e.min(chars.len()));
        if s >= e {
            continue;
        }
        out.push_str(&escape_html(&chars[pos..s].iter().collect::<String>()));
        out.push_str("<strong>");
        out.push_str(&escape_html(&chars[s..e].iter().collect::<String>()));
        out.push_str("</strong>");
        pos = e;
    }
    out.push_str(&escape_html(&chars[pos..].iter().collect::<String>()));
    out
}

const STYLE: &str = "body{font-family:sans-serif;max-width:50em;margin:2em auto;color:#222}\
section{border:1px solid #ccc;border-radius:6px;padding:0.5em 1em;margin:1em 0}\
h2{margin:0.3em 0}.ctx{color:#555;font-size:0.9em}.fallback{font-style:italic;color:#a33}\
.swatch{display:inline-block;width:0.8em;height:0.8em;margin-right:0.4em}";

/// Self-contained HTML report: one section per data type that has contexts.
pub fn render_html(bundle: &CppBundle, palette: &Palette) -> String {
    let mut h = String::new();
    let title = format!("Contextual privacy policy: {}", escape_html(&bundle.app_id));
    let _ = write!(
        h,
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>{title}</title>\n<style>{STYLE}</style>\n</head>\n<body>\n<h1>{title}</h1>\n"
    );
    let types = bundle.detected_types();
    if types.is_empty() {
        h.push_str("<p class=\"empty\">No privacy-related contexts were detected.</p>\n");
    }
    for t in types {
        let [r, g, b] = palette.color(t).0;
        let _ = writeln!(
            h,
            "<section id=\"{t}\">\n<h2><span class=\"swatch\" style=\"background:#{r:02x}{g:02x}{b:02x}\"></span>{t}</h2>\n<ul class=\"ctx\">"
        );
        for c in bundle.contexts().filter(|c| c.data_type == t) {
            let kind = match c.kind {
                crate::model::ContextKind::Text => "text",
                crate::model::ContextKind::Icon => "icon",
            };
            let _ = writeln!(
                h,
                "<li>{}: {kind} &quot;{}&quot; at [{}, {}, {}, {}]</li>",
                escape_html(&c.screenshot_id),
                escape_html(&c.evidence),
                c.bbox.x,
                c.bbox.y,
                c.bbox.w,
                c.bbox.h
            );
        }
        h.push_str("</ul>\n");
        let group = bundle.group(t);
        if group.fallback {
            let _ = writeln!(h, "<p class=\"fallback\">{}</p>", escape_html(FALLBACK_TEXT));
        } else {
            for (i, s) in group.sentences.iter().enumerate() {
                let ranges: Vec<(usize, usize)> = group
                    .highlights
                    .iter()
                    .filter(|hl| hl.sentence == i)
                    .map(|hl| (hl.char_start, hl.char_end))
                    .collect();
                let _ = writeln!(h, "<p>{}</p>", highlight_html(&s.text, &ranges));
            }
        }
        h.push_str("</section>\n");
    }
    h.push_str("</body>\n</html>\n");
    h
}

/// One color per data type.
#[derive(Debug, Clone, PartialEq)]
pub struct Palette {
    colors: [Rgb<u8>; 12],
}

impl Default for Palette {
    fn default() -> Self {
        let hex = [
            0xe6194b, 0x3cb44b, 0x4363d8, 0xf58231, 0x911eb4, 0x008080, 0xf032e6, 0xd62728,
            0x9a6324, 0x800000, 0x2f4f4f, 0x000075,
        ];
        Palette {
            colors: hex.map(|v: u32| Rgb([(v >> 16) as u8, (v >> 8) as u8, v as u8])),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("invalid color {0:?}: expected #rrggbb")]
pub struct ColorError(pub String);

pub fn parse_color(s: &str) -> Result<Rgb<u8>, ColorError> {
    let hex = s.trim().strip_prefix('#').unwrap_or(s.trim());
    if hex.len() != 6 || !hex.chars().all(|c| c.is_ascii_hexdigit()) {
        return Err(ColorError(s.to_string()));
    }
    let v = u32::from_str_radix(hex, 16).map_err(|_| ColorError(s.to_string()))?;
    Ok(Rgb([(v >> 16) as u8, (v >> 8) as u8, v as u8]))
}

impl Palette {
    pub fn color(&self, t: DataType) -> Rgb<u8> {
        self.colors[t.index()]
    }

    pub fn set(&mut self, t: DataType, c: Rgb<u8>) {
        self.colors[t.index()] = c;
    }
}

pub const BORDER: u32 = 3;
const LABEL_SCALE: u32 = 2;
const LABEL_PAD: u32 = 2;

/// Where the label for `b` goes: above the box when there is room, else
/// just inside its top edge. Clipped to the image.
pub fn label_rect(b: &BBox, text: &str, width: u32, height: u32) -> Option<BBox> {
    let (tw, th) = font::text_size(text, LABEL_SCALE);
    let (lw, lh) = (tw + 2 * LABEL_PAD, th + 2 * LABEL_PAD);
    let y = if b.y >= lh { b.y - lh } else { b.y };
    BBox { x: b.x, y, w: lw, h: lh }.clip(width, height)
}

fn is_border(x: u32, y: u32, b: &BBox) -> bool {
    let t = BORDER.min(b.w).min(b.h);
    x < b.x + t || y < b.y + t || x + t >= b.x + b.w || y + t >= b.y + b.h
}

/// Draw each context as a 3 px rectangle in its data type's color, with an
/// optional data-type label. Later contexts draw over earlier ones. Returns
/// warnings for clipped boxes.
pub fn render_overlay(
    img: &RgbImage,
    contexts: &[Context],
    palette: &Palette,
    labels: bool,
) -> (RgbImage, Vec<String>) {
    let mut out = img.clone();
    let mut warnings = Vec::new();
    let (w, h) = img.dimensions();
    for c in contexts {
        let Some(b) = c.bbox.clip(w, h) else {
            warnings.push(format!("context {:?} at {:?} lies outside {w}x{h}, skipped", c.evidence, c.bbox));
            continue;
        };
        if b != c.bbox {
            warnings.push(format!("context {:?} at {:?} clipped to {:?}", c.evidence, c.bbox, b));
        }
        let color = palette.color(c.data_type);
        for y in b.y..b.y + b.h {
            for x in b.x..b.x + b.w {
                if is_border(x, y, &b) {
                    out.put_pixel(x, y, color);
                }
            }
        }
        if labels {
            let text = c.data_type.as_str();
            if let Some(l) = label_rect(&b, text, w, h) {
                for y in l.y..l.y + l.h {
                    for x in l.x..l.x + l.w {
                        out.put_pixel(x, y, color);
                    }
                }
                font::draw_text(
                    &mut out,
                    (l.x + LABEL_PAD) as i64,
                    (l.y + LABEL_PAD) as i64,
                    text,
                    LABEL_SCALE,
                    Rgb([255, 255, 255]),
                );
            }
        }
    }
    (out, warnings)
}

/// Contexts whose data type has no matching policy segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LackReport {
    pub app_id: String,
    pub total: usize,
    pub counts: BTreeMap<DataType, usize>,
    pub contexts: Vec<Context>,
}

pub fn lack_of_disclosure_report(bundle: &CppBundle) -> LackReport {
    let contexts: Vec<Context> = bundle
        .contexts()
        .filter(|c| bundle.group(c.data_type).fallback)
        .cloned()
        .collect();
    let mut counts = BTreeMap::new();
    for c in &contexts {
        *counts.entry(c.data_type).or_insert(0) += 1;
    }
    LackReport {
        app_id: bundle.app_id.clone(),
        total: contexts.len(),
        counts,
        contexts,
    }
}

impl LackReport {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{}: {} context(s) without a matching policy segment\n",
            self.app_id, self.total
        );
        for (t, n) in &self.counts {
            let _ = writeln!(s, "  {t}: {n}");
        }
        for c in &self.contexts {
            let _ = writeln!(
                s,
                "  - {} {:?} {:?} [{}, {}, {}, {}]",
                c.screenshot_id, c.kind, c.evidence, c.bbox.x, c.bbox.y, c.bbox.w, c.bbox.h
            );
        }
        s
    }
}
