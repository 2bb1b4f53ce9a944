//! Contextual privacy policy generation for mobile apps.
//!
//! The pipeline detects privacy-related contexts (text and icons) on GUI
//! screenshots, extracts the matching privacy-policy sentences per data
//! type, assembles them into a bundle, and evaluates bundles against
//! annotated benchmark directories.

pub mod adapter;
pub mod dataset;
pub mod detect;
pub mod evaluate;
pub mod font;
pub mod keywords;
pub mod model;
pub mod policy;
pub mod present;
pub mod synth;
pub mod taxonomy;
pub mod text;

pub use keywords::KeywordResource;
pub use model::{iou, match_boxes, BBox, Context, ContextKind, DataType, EvalConfig, IconClassMap};
pub use taxonomy::Taxonomy;
