//! Rule-based icon localization.

use image::GrayImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::raster::{adaptive_threshold, component_boxes};
use super::TextRegion;
use crate::model::BBox;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizerParams {
    /// Rule (a): drop boxes larger than this share of the screenshot.
    pub max_area_ratio: f64,
    /// Rule (b): drop boxes smaller than this share of the screenshot.
    pub min_area_ratio: f64,
    /// Rule (c): drop boxes with `min(w,h)/max(w,h)` below this.
    pub min_squareness: f64,
    /// Rule (d): drop boxes whose overlap with any OCR region exceeds this share of the box.
    pub ocr_overlap_ratio: f64,
    pub binarize_block: u32,
    pub binarize_offset: i32,
}

impl Default for LocalizerParams {
    fn default() -> Self {
        LocalizerParams {
            max_area_ratio: 0.10,
            min_area_ratio: 0.0001,
            min_squareness: 0.6,
            ocr_overlap_ratio: 0.5,
            binarize_block: 31,
            binarize_offset: 10,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("invalid localizer parameters: {0}")]
pub struct ParamsError(pub String);

impl LocalizerParams {
    pub fn validate(&self) -> Result<(), ParamsError> {
        let bad = |m: &str| Err(ParamsError(m.to_string()));
        if !(0.0 < self.min_area_ratio
            && self.min_area_ratio < self.max_area_ratio
            && self.max_area_ratio < 1.0)
        {
            return bad("need 0 < min_area_ratio < max_area_ratio < 1");
        }
        if !(self.min_squareness > 0.0 && self.min_squareness <= 1.0) {
            return bad("min_squareness must be in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.ocr_overlap_ratio) {
            return bad("ocr_overlap_ratio must be in [0, 1]");
        }
        if self.binarize_block < 3 || self.binarize_block.is_multiple_of(2) {
            return bad("binarize_block must be odd and >= 3");
        }
        Ok(())
    }
}

/// Which rule removed a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rejection {
    TooLarge,
    TooSmall,
    Elongated,
    OverlapsText,
}

/// Apply rules (a) to (d) in order to one candidate box.
pub fn check_candidate(
    b: &BBox,
    width: u32,
    height: u32,
    ocr: &[TextRegion],
    p: &LocalizerParams,
) -> Result<(), Rejection> {
    let screen = width as f64 * height as f64;
    let area = b.area() as f64;
    if area / screen > p.max_area_ratio {
        return Err(Rejection::TooLarge);
    }
    if area / screen < p.min_area_ratio {
        return Err(Rejection::TooSmall);
    }
    let squareness = b.w.min(b.h) as f64 / b.w.max(b.h) as f64;
    if squareness < p.min_squareness {
        return Err(Rejection::Elongated);
    }
    if ocr
        .iter()
        .any(|r| b.intersection_area(&r.bbox) as f64 > p.ocr_overlap_ratio * area)
    {
        return Err(Rejection::OverlapsText);
    }
    Ok(())
}

/// Raw component boxes before any rule.
pub fn candidate_boxes(gray: &GrayImage, p: &LocalizerParams) -> Vec<BBox> {
    let mask = adaptive_threshold(gray, p.binarize_block, p.binarize_offset);
    component_boxes(&mask, gray.width(), gray.height())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Localization {
    /// Surviving boxes sorted by `(y, x)`.
    pub icons: Vec<BBox>,
    pub rejected: Vec<(BBox, Rejection)>,
}

pub fn localize_icons_report(gray: &GrayImage, ocr: &[TextRegion], p: &LocalizerParams) -> Localization {
    let (w, h) = gray.dimensions();
    let mut out = Localization::default();
    for b in candidate_boxes(gray, p) {
        match check_candidate(&b, w, h, ocr, p) {
            Ok(()) => out.icons.push(b),
            Err(r) => out.rejected.push((b, r)),
        }
    }
    out.icons.sort_by_key(|b| (b.y, b.x, b.w, b.h));
    out
}

pub fn localize_icons(gray: &GrayImage, ocr: &[TextRegion], p: &LocalizerParams) -> Vec<BBox> {
    localize_icons_report(gray, ocr, p).icons
}
