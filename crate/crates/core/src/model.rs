//! Shared domain types: boxes, data types, contexts, and box matching.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Axis-aligned pixel rectangle with a top-left origin.
///
/// Serialized as the 4-array `[x, y, w, h]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BBoxError {
    #[error("box [{0}, {1}, {2}, {3}] has zero width or height")]
    Degenerate(u32, u32, u32, u32),
    #[error("box [{x}, {y}, {w}, {h}] exceeds image bounds {width}x{height}")]
    OutOfBounds {
        x: u32,
        y: u32,
        w: u32,
        h: u32,
        width: u32,
        height: u32,
    },
}

impl BBox {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Result<Self, BBoxError> {
        if w == 0 || h == 0 {
            return Err(BBoxError::Degenerate(x, y, w, h));
        }
        Ok(BBox { x, y, w, h })
    }

    pub fn right(&self) -> u64 {
        self.x as u64 + self.w as u64
    }

    pub fn bottom(&self) -> u64 {
        self.y as u64 + self.h as u64
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn intersection_area(&self, other: &BBox) -> u64 {
        let ix0 = self.x.max(other.x) as u64;
        let iy0 = self.y.max(other.y) as u64;
        let ix1 = self.right().min(other.right());
        let iy1 = self.bottom().min(other.bottom());
        if ix1 <= ix0 || iy1 <= iy0 {
            0
        } else {
            (ix1 - ix0) * (iy1 - iy0)
        }
    }

    pub fn fits_within(&self, width: u32, height: u32) -> bool {
        self.right() <= width as u64 && self.bottom() <= height as u64
    }

    pub fn check_bounds(&self, width: u32, height: u32) -> Result<(), BBoxError> {
        if self.fits_within(width, height) {
            Ok(())
        } else {
            Err(BBoxError::OutOfBounds {
                x: self.x,
                y: self.y,
                w: self.w,
                h: self.h,
                width,
                height,
            })
        }
    }

    /// Clip to `width x height`. `None` when nothing of the box remains.
    pub fn clip(&self, width: u32, height: u32) -> Option<BBox> {
        let x1 = self.right().min(width as u64);
        let y1 = self.bottom().min(height as u64);
        if x1 <= self.x as u64 || y1 <= self.y as u64 {
            return None;
        }
        Some(BBox {
            x: self.x,
            y: self.y,
            w: (x1 - self.x as u64) as u32,
            h: (y1 - self.y as u64) as u32,
        })
    }

    /// Reading-order key: top edge first, then left edge.
    pub fn reading_key(&self) -> (u32, u32) {
        (self.y, self.x)
    }
}

impl Serialize for BBox {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.x, self.y, self.w, self.h].serialize(s)
    }
}

impl<'de> Deserialize<'de> for BBox {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [x, y, w, h] = <[u32; 4]>::deserialize(d)?;
        BBox::new(x, y, w, h).map_err(serde::de::Error::custom)
    }
}

/// Exact intersection-over-union as a reduced-free fraction `(intersection, union)`.
pub fn iou_ratio(a: &BBox, b: &BBox) -> (u64, u64) {
    let inter = a.intersection_area(b);
    (inter, a.area() + b.area() - inter)
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let (num, den) = iou_ratio(a, b);
    num as f64 / den as f64
}

/// The twelve personal-data categories, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DataType {
    Name,
    Birthday,
    Address,
    Phone,
    Email,
    Profile,
    Contacts,
    Location,
    Photos,
    Voices,
    FinancialInfo,
    SocialMedia,
}

impl DataType {
    pub const ALL: [DataType; 12] = [
        DataType::Name,
        DataType::Birthday,
        DataType::Address,
        DataType::Phone,
        DataType::Email,
        DataType::Profile,
        DataType::Contacts,
        DataType::Location,
        DataType::Photos,
        DataType::Voices,
        DataType::FinancialInfo,
        DataType::SocialMedia,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DataType::Name => "Name",
            DataType::Birthday => "Birthday",
            DataType::Address => "Address",
            DataType::Phone => "Phone",
            DataType::Email => "Email",
            DataType::Profile => "Profile",
            DataType::Contacts => "Contacts",
            DataType::Location => "Location",
            DataType::Photos => "Photos",
            DataType::Voices => "Voices",
            DataType::FinancialInfo => "FinancialInfo",
            DataType::SocialMedia => "SocialMedia",
        }
    }

    /// Position in the canonical order.
    pub fn index(self) -> usize {
        self as usize
    }

    /// True for the first six ("basic personally identifiable information").
    pub fn is_basic_pii(self) -> bool {
        self.index() < 6
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown data type {0:?}")]
pub struct UnknownDataType(pub String);

impl FromStr for DataType {
    type Err = UnknownDataType;

    /// Strict: exact, case-sensitive names only.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DataType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| UnknownDataType(s.to_string()))
    }
}

impl Serialize for DataType {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for DataType {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ContextKind {
    Text,
    Icon,
}

/// Mapping from icon-class names to data types. Classes outside the map carry no data type.
#[derive(Debug, Clone, PartialEq)]
pub struct IconClassMap {
    entries: Vec<(String, DataType)>,
}

impl Default for IconClassMap {
    fn default() -> Self {
        use DataType::*;
        let entries = [
            ("Call", Phone),
            ("Email", Email),
            ("Avatar", Profile),
            ("Group", Contacts),
            ("Follow", Contacts),
            ("Location", Location),
            ("LocationCrosshair", Location),
            ("Photo", Photos),
            ("Wallpaper", Photos),
            ("Videocam", Photos),
            ("Microphone", Voices),
            ("Cart", FinancialInfo),
            ("Facebook", SocialMedia),
            ("Twitter", SocialMedia),
        ];
        IconClassMap {
            entries: entries
                .into_iter()
                .map(|(c, t)| (c.to_string(), t))
                .collect(),
        }
    }
}

impl IconClassMap {
    pub fn data_type(&self, class: &str) -> Option<DataType> {
        self.entries
            .iter()
            .find(|(c, _)| c == class)
            .map(|(_, t)| *t)
    }

    pub fn classes(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(c, _)| c.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A privacy-related region on a screenshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Context {
    pub screenshot_id: String,
    pub bbox: BBox,
    pub kind: ContextKind,
    pub data_type: DataType,
    pub evidence: String,
    pub score: f64,
}

impl Context {
    /// Canonical ordering within a screenshot: kind, then reading order.
    pub fn canonical_cmp(&self, other: &Context) -> Ordering {
        self.kind
            .cmp(&other.kind)
            .then(self.bbox.reading_key().cmp(&other.bbox.reading_key()))
            .then(self.data_type.cmp(&other.data_type))
            .then(self.evidence.cmp(&other.evidence))
    }
}

/// Matching thresholds for evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub iou_threshold: f64,
    pub segment_threshold: f64,
    /// When a retrieved segment falls below the threshold, count it as a
    /// false positive in addition to the false negative.
    pub mismatch_counts_fp: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            iou_threshold: 0.5,
            segment_threshold: 0.8,
            mismatch_counts_fp: true,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("{name} must lie in (0, 1], got {value}")]
pub struct ThresholdError {
    pub name: &'static str,
    pub value: f64,
}

pub(crate) fn check_unit_threshold(name: &'static str, value: f64) -> Result<(), ThresholdError> {
    if value > 0.0 && value <= 1.0 {
        Ok(())
    } else {
        Err(ThresholdError { name, value })
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), ThresholdError> {
        check_unit_threshold("iou_threshold", self.iou_threshold)?;
        check_unit_threshold("segment_threshold", self.segment_threshold)
    }
}

/// Greedy one-to-one matching of predictions to ground truth.
///
/// Candidate pairs must reach the IoU threshold and agree on kind and data
/// type. Pairs are taken in descending IoU order, ties broken by lower
/// prediction index and then lower ground-truth index. Returns
/// `(pred_idx, gt_idx)` pairs in the order they were accepted.
pub fn match_boxes(preds: &[Context], gts: &[Context], cfg: &EvalConfig) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize, u64, u64)> = Vec::new();
    for (pi, p) in preds.iter().enumerate() {
        for (gi, g) in gts.iter().enumerate() {
            if p.kind != g.kind || p.data_type != g.data_type {
                continue;
            }
            let (num, den) = iou_ratio(&p.bbox, &g.bbox);
            if (num as f64) >= cfg.iou_threshold * den as f64 {
                pairs.push((pi, gi, num, den));
            }
        }
    }
    // a/b > c/d  <=>  a*d > c*b
    pairs.sort_by(|a, b| {
        let lhs = a.2 as u128 * b.3 as u128;
        let rhs = b.2 as u128 * a.3 as u128;
        rhs.cmp(&lhs).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1))
    });

    let mut pred_used = vec![false; preds.len()];
    let mut gt_used = vec![false; gts.len()];
    let mut out = Vec::new();
    for (pi, gi, _, _) in pairs {
        if !pred_used[pi] && !gt_used[gi] {
            pred_used[pi] = true;
            gt_used[gi] = true;
            out.push((pi, gi));
        }
    }
    out
}
