//! Privacy-related context detection on GUI screenshots.

pub mod knn;
pub mod localize;
pub mod raster;

use std::path::Path;

use image::DynamicImage;
use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapter::{AdapterError, AdapterSpec};
use crate::keywords::KeywordResource;
use crate::model::{BBox, Context, ContextKind, DataType, IconClassMap};

pub use knn::{train_knn, KnnError, KnnModel, Prediction};
pub use localize::{
    check_candidate, localize_icons, localize_icons_report, Localization, LocalizerParams,
    ParamsError, Rejection,
};

/// OCR output for one region, clipped to the screenshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextRegion {
    pub bbox: BBox,
    pub text: String,
    pub confidence: f64,
}

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("cannot decode screenshot {path}: {msg}")]
    Decode { path: String, msg: String },
    #[error(transparent)]
    Adapter(#[from] AdapterError),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Knn(#[from] KnnError),
    #[error("no icon classifier: provide a trained model or an icon-classifier adapter")]
    NoIconClassifier,
    #[error("cannot stage icon crop for adapter: {0}")]
    Staging(#[from] std::io::Error),
}

/// Non-fatal observations made during detection.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub warnings: Vec<String>,
}

impl Diagnostics {
    fn warn(&mut self, msg: String) {
        warn!("{msg}");
        self.warnings.push(msg);
    }
}

pub fn open_screenshot(path: &Path) -> Result<DynamicImage, DetectError> {
    image::open(path).map_err(|e| DetectError::Decode {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

/// Run the OCR adapter and turn its regions into clipped [`TextRegion`]s.
/// Regions with blank text or lying entirely outside the image are dropped.
pub fn detect_text_regions(
    image_path: &Path,
    width: u32,
    height: u32,
    adapter: &AdapterSpec,
    diag: &mut Diagnostics,
) -> Result<Vec<TextRegion>, DetectError> {
    let raw = adapter.ocr(image_path)?;
    let mut out = Vec::with_capacity(raw.len());
    for (i, r) in raw.into_iter().enumerate() {
        let text = r.text.trim();
        if text.is_empty() {
            diag.warn(format!("ocr region {i}: empty text, dropped"));
            continue;
        }
        let [x, y, w, h] = r.bbox;
        let clipped = clip_signed(x, y, w, h, width, height);
        match clipped {
            Some(b) => {
                if (b.x as i64, b.y as i64, b.w as i64, b.h as i64) != (x, y, w, h) {
                    diag.warn(format!(
                        "ocr region {i} ({text:?}): bbox [{x},{y},{w},{h}] clipped to [{},{},{},{}]",
                        b.x, b.y, b.w, b.h
                    ));
                }
                out.push(TextRegion {
                    bbox: b,
                    text: text.to_string(),
                    confidence: r.confidence,
                });
            }
            None => diag.warn(format!(
                "ocr region {i} ({text:?}): bbox [{x},{y},{w},{h}] outside {width}x{height}, dropped"
            )),
        }
    }
    Ok(out)
}

fn clip_signed(x: i64, y: i64, w: i64, h: i64, width: u32, height: u32) -> Option<BBox> {
    let x0 = x.clamp(0, width as i64);
    let y0 = y.clamp(0, height as i64);
    let x1 = (x + w).clamp(0, width as i64);
    let y1 = (y + h).clamp(0, height as i64);
    if x1 <= x0 || y1 <= y0 {
        return None;
    }
    Some(BBox {
        x: x0 as u32,
        y: y0 as u32,
        w: (x1 - x0) as u32,
        h: (y1 - y0) as u32,
    })
}

/// Data type of a text region. An adapter answer overrides the keyword
/// path; a null answer or an adapter failure falls back to it.
pub fn classify_text(
    text: &str,
    keywords: &KeywordResource,
    adapter: Option<&AdapterSpec>,
    diag: &mut Diagnostics,
) -> Option<(DataType, String)> {
    if let Some(a) = adapter {
        match a.classify_text(text) {
            Ok(Some(t)) => {
                let evidence = keywords
                    .occurrences(text, crate::keywords::MatchMode::Tokens)
                    .into_iter()
                    .find(|o| o.data_type == t)
                    .map(|o| keywords.phrases(t)[o.phrase].text.clone())
                    .unwrap_or_else(|| text.to_string());
                return Some((t, evidence));
            }
            Ok(None) => {}
            Err(e) => diag.warn(format!("text classifier failed, using keywords: {e}")),
        }
    }
    keywords.classify(text)
}

/// Icon class, its data type, and score. `None` when the class is unmapped
/// or the classifier abstains.
pub fn classify_icon(
    crop: &DynamicImage,
    model: Option<&KnnModel>,
    class_map: &IconClassMap,
    adapter: Option<&AdapterSpec>,
) -> Result<Option<(String, DataType, f64)>, DetectError> {
    let (class, score) = if let Some(a) = adapter {
        let dir = tempfile::tempdir()?;
        let path = dir.path().join("crop.png");
        crop.save(&path).map_err(|e| DetectError::Staging(std::io::Error::other(e)))?;
        let classes: Vec<&str> = class_map.classes().collect();
        match a.classify_icon(&path, &classes)? {
            Some(cs) => cs,
            None => return Ok(None),
        }
    } else if let Some(m) = model {
        let p = m.predict(crop)?;
        (p.class, p.score)
    } else {
        return Err(DetectError::NoIconClassifier);
    };
    Ok(class_map.data_type(&class).map(|t| (class, t, score)))
}

/// Everything detection needs besides the screenshot itself.
#[derive(Clone, Copy)]
pub struct Detector<'a> {
    pub ocr: &'a AdapterSpec,
    pub text_classifier: Option<&'a AdapterSpec>,
    pub icon_classifier: Option<&'a AdapterSpec>,
    pub keywords: &'a KeywordResource,
    pub class_map: &'a IconClassMap,
    pub model: Option<&'a KnnModel>,
    pub params: &'a LocalizerParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub contexts: Vec<Context>,
    pub text_regions: Vec<TextRegion>,
    pub diagnostics: Diagnostics,
}

impl Detector<'_> {
    /// Text contexts first, then icon contexts, each in `(y, x)` order.
    pub fn detect(&self, screenshot_id: &str, image_path: &Path) -> Result<Detection, DetectError> {
        self.params.validate()?;
        let img = open_screenshot(image_path)?;
        let (w, h) = (img.width(), img.height());
        let mut diag = Diagnostics::default();
        let regions = detect_text_regions(image_path, w, h, self.ocr, &mut diag)?;

        let mut texts = Vec::new();
        for r in &regions {
            if let Some((t, evidence)) =
                classify_text(&r.text, self.keywords, self.text_classifier, &mut diag)
            {
                texts.push(Context {
                    screenshot_id: screenshot_id.to_string(),
                    bbox: r.bbox,
                    kind: ContextKind::Text,
                    data_type: t,
                    evidence,
                    score: r.confidence,
                });
            }
        }

        let gray = img.to_luma8();
        let boxes = localize_icons(&gray, &regions, self.params);
        let mut icons = Vec::new();
        if !boxes.is_empty() && self.model.is_none() && self.icon_classifier.is_none() {
            diag.warn(format!(
                "{} icon candidate(s) left unclassified: no icon model or adapter",
                boxes.len()
            ));
        } else {
            for b in boxes {
                let crop = img.crop_imm(b.x, b.y, b.w, b.h);
                if let Some((class, t, score)) =
                    classify_icon(&crop, self.model, self.class_map, self.icon_classifier)?
                {
                    icons.push(Context {
                        screenshot_id: screenshot_id.to_string(),
                        bbox: b,
                        kind: ContextKind::Icon,
                        data_type: t,
                        evidence: class,
                        score,
                    });
                }
            }
        }
        texts.sort_by(|a, b| a.canonical_cmp(b));
        icons.sort_by(|a, b| a.canonical_cmp(b));
        texts.extend(icons);
        Ok(Detection {
            contexts: texts,
            text_regions: regions,
            diagnostics: diag,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clipping() {
        assert_eq!(clip_signed(-5, 10, 20, 20, 100, 100), Some(BBox { x: 0, y: 10, w: 15, h: 20 }));
        assert_eq!(clip_signed(90, 90, 50, 50, 100, 100), Some(BBox { x: 90, y: 90, w: 10, h: 10 }));
        assert_eq!(clip_signed(120, 0, 5, 5, 100, 100), None);
        assert_eq!(clip_signed(0, 0, 0, 5, 100, 100), None);
    }

    #[test]
    fn builtin_text_examples() {
        let kw = KeywordResource::default();
        let mut d = Diagnostics::default();
        assert_eq!(
            classify_text("Share your location", &kw, None, &mut d),
            Some((DataType::Location, "location".into()))
        );
        assert_eq!(
            classify_text("use your birthday", &kw, None, &mut d),
            Some((DataType::Birthday, "birthday".into()))
        );
        assert_eq!(classify_text("Settings", &kw, None, &mut d), None);
        assert_eq!(classify_text("dynamic wallpaper", &kw, None, &mut d), None);
    }

    #[test]
    fn unmapped_icon_class_yields_none() {
        let mut m = KnnModel::new(1, 4).unwrap();
        let img = DynamicImage::new_luma8(8, 8);
        m.add_image(&img, "Settings").unwrap();
        let map = IconClassMap::default();
        assert_eq!(classify_icon(&img, Some(&m), &map, None).unwrap(), None);
        m.add_image(&DynamicImage::ImageLuma8(image::GrayImage::from_pixel(8, 8, image::Luma([255]))), "Email")
            .unwrap();
        let white = DynamicImage::ImageLuma8(image::GrayImage::from_pixel(8, 8, image::Luma([250])));
        let (c, t, s) = classify_icon(&white, Some(&m), &map, None).unwrap().unwrap();
        assert_eq!((c.as_str(), t, s), ("Email", DataType::Email, 1.0));
        assert!(matches!(classify_icon(&img, None, &map, None), Err(DetectError::NoIconClassifier)));
    }
}
