//! `key = value` configuration files merged under command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context as _, Result};
use cppgen_core::detect::LocalizerParams;
use cppgen_core::policy::MatchConfig;
use cppgen_core::present::{parse_color, Palette};
use cppgen_core::{DataType, EvalConfig};

/// Keys accepted in a config file. `palette.<DataType>` keys are accepted too.
pub const KEYS: &[&str] = &[
    "adapter.ocr",
    "adapter.text_classifier",
    "adapter.icon_classifier",
    "resource.keywords",
    "resource.taxonomy",
    "resource.nb_model",
    "resource.heading_rules",
    "resource.icon_model",
    "localizer.max_area_ratio",
    "localizer.min_area_ratio",
    "localizer.min_squareness",
    "localizer.ocr_overlap_ratio",
    "localizer.binarize_block",
    "localizer.binarize_offset",
    "knn.k",
    "knn.side",
    "match.phrase_sim_threshold",
    "match.use_relevance_stage",
    "nb.alpha",
    "eval.iou_threshold",
    "eval.segment_threshold",
    "eval.mismatch_counts_fp",
    "fetch.timeout_secs",
    "output.reproducible",
];

/// Raw key/value pairs from a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(src: &str, origin: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, line) in src.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{origin}:{}: expected `key = value`", i + 1))?;
            let (k, v) = (k.trim(), v.trim());
            let known = KEYS.contains(&k)
                || k.strip_prefix("palette.").is_some_and(|t| t.parse::<DataType>().is_ok());
            if !known {
                bail!("{origin}:{}: unknown key {k:?}", i + 1);
            }
            if values.insert(k.to_string(), v.to_string()).is_some() {
                bail!("{origin}:{}: key {k:?} set twice", i + 1);
            }
        }
        Ok(ConfigFile { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        Self::parse(&src, &path.display().to_string())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| anyhow!("config key {key}: cannot parse {v:?}: {e}")),
        }
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.values.get(key).map(PathBuf::from)
    }
}

/// Effective settings after defaults, file, and flags.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub localizer: LocalizerParams,
    pub knn_k: usize,
    pub knn_side: u32,
    pub matching: MatchConfig,
    pub nb_alpha: f64,
    pub eval: EvalConfig,
    pub fetch_timeout_secs: u64,
    pub reproducible: bool,
    pub palette: Palette,
    pub ocr_adapter: Option<String>,
    pub text_adapter: Option<String>,
    pub icon_adapter: Option<String>,
    pub keywords: Option<PathBuf>,
    pub taxonomy: Option<PathBuf>,
    pub nb_model: Option<PathBuf>,
    pub heading_rules: Option<PathBuf>,
    pub icon_model: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            localizer: LocalizerParams::default(),
            knn_k: 5,
            knn_side: 32,
            matching: MatchConfig::default(),
            nb_alpha: 1.0,
            eval: EvalConfig::default(),
            fetch_timeout_secs: 30,
            reproducible: false,
            palette: Palette::default(),
            ocr_adapter: None,
            text_adapter: None,
            icon_adapter: None,
            keywords: None,
            taxonomy: None,
            nb_model: None,
            heading_rules: None,
            icon_model: None,
        }
    }
}

fn set<T: FromStr>(file: &ConfigFile, key: &str, slot: &mut T) -> Result<()>
where
    T::Err: std::fmt::Display,
{
    if let Some(v) = file.get(key)? {
        *slot = v;
    }
    Ok(())
}

impl RunConfig {
    /// Defaults overlaid with `file`.
    pub fn from_file(file: &ConfigFile) -> Result<Self> {
        let mut c = RunConfig::default();
        let l = &mut c.localizer;
        set(file, "localizer.max_area_ratio", &mut l.max_area_ratio)?;
        set(file, "localizer.min_area_ratio", &mut l.min_area_ratio)?;
        set(file, "localizer.min_squareness", &mut l.min_squareness)?;
        set(file, "localizer.ocr_overlap_ratio", &mut l.ocr_overlap_ratio)?;
        set(file, "localizer.binarize_block", &mut l.binarize_block)?;
        set(file, "localizer.binarize_offset", &mut l.binarize_offset)?;
        set(file, "knn.k", &mut c.knn_k)?;
        set(file, "knn.side", &mut c.knn_side)?;
        set(file, "match.phrase_sim_threshold", &mut c.matching.phrase_sim_threshold)?;
        set(file, "match.use_relevance_stage", &mut c.matching.use_relevance_stage)?;
        set(file, "nb.alpha", &mut c.nb_alpha)?;
        set(file, "eval.iou_threshold", &mut c.eval.iou_threshold)?;
        set(file, "eval.segment_threshold", &mut c.eval.segment_threshold)?;
        set(file, "eval.mismatch_counts_fp", &mut c.eval.mismatch_counts_fp)?;
        set(file, "fetch.timeout_secs", &mut c.fetch_timeout_secs)?;
        set(file, "output.reproducible", &mut c.reproducible)?;
        c.ocr_adapter = file.values.get("adapter.ocr").cloned();
        c.text_adapter = file.values.get("adapter.text_classifier").cloned();
        c.icon_adapter = file.values.get("adapter.icon_classifier").cloned();
        c.keywords = file.path("resource.keywords");
        c.taxonomy = file.path("resource.taxonomy");
        c.nb_model = file.path("resource.nb_model");
        c.heading_rules = file.path("resource.heading_rules");
        c.icon_model = file.path("resource.icon_model");
        for (k, v) in &file.values {
            if let Some(t) = k.strip_prefix("palette.") {
                let t: DataType = t.parse().expect("checked while parsing");
                c.palette.set(t, parse_color(v).map_err(|e| anyhow!("config key {k}: {e}"))?);
            }
        }
        Ok(c)
    }

    /// Check ranges and that named resource files exist.
    pub fn validate(&self) -> Result<()> {
        self.localizer.validate()?;
        self.matching.validate()?;
        self.eval.validate()?;
        if self.knn_k == 0 || self.knn_side == 0 {
            bail!("knn.k and knn.side must be at least 1");
        }
        if self.nb_alpha.is_nan() || self.nb_alpha <= 0.0 {
            bail!("nb.alpha must be positive");
        }
        if self.fetch_timeout_secs == 0 {
            bail!("fetch.timeout_secs must be at least 1");
        }
        for (name, p) in [
            ("keywords", &self.keywords),
            ("taxonomy", &self.taxonomy),
            ("nb model", &self.nb_model),
            ("heading rules", &self.heading_rules),
        ] {
            if let Some(p) = p {
                if !p.is_file() {
                    bail!("{name} file {} does not exist", p.display());
                }
            }
        }
        if let Some(p) = &self.icon_model {
            if !p.is_dir() {
                bail!("icon model directory {} does not exist", p.display());
            }
        }
        Ok(())
    }

    /// Effective settings as sorted key/value pairs for bundle metadata.
    pub fn snapshot(&self) -> BTreeMap<String, String> {
        let l = &self.localizer;
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("localizer.max_area_ratio", l.max_area_ratio.to_string());
        put("localizer.min_area_ratio", l.min_area_ratio.to_string());
        put("localizer.min_squareness", l.min_squareness.to_string());
        put("localizer.ocr_overlap_ratio", l.ocr_overlap_ratio.to_string());
        put("localizer.binarize_block", l.binarize_block.to_string());
        put("localizer.binarize_offset", l.binarize_offset.to_string());
        put("knn.k", self.knn_k.to_string());
        put("knn.side", self.knn_side.to_string());
        put("match.phrase_sim_threshold", self.matching.phrase_sim_threshold.to_string());
        put("match.use_relevance_stage", self.matching.use_relevance_stage.to_string());
        put("nb.alpha", self.nb_alpha.to_string());
        put("eval.iou_threshold", self.eval.iou_threshold.to_string());
        put("eval.segment_threshold", self.eval.segment_threshold.to_string());
        put("eval.mismatch_counts_fp", self.eval.mismatch_counts_fp.to_string());
        let res = |p: &Option<PathBuf>| p.as_ref().map_or("builtin".to_string(), |p| p.display().to_string());
        put("resource.keywords", res(&self.keywords));
        put("resource.taxonomy", res(&self.taxonomy));
        put("resource.heading_rules", res(&self.heading_rules));
        if let Some(p) = &self.nb_model {
            put("resource.nb_model", p.display().to_string());
        }
        if let Some(p) = &self.icon_model {
            put("resource.icon_model", p.display().to_string());
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_apply() {
        let f = ConfigFile::parse(
            "# comment\nlocalizer.min_area_ratio = 0.0002\nknn.k=3\npalette.Email = #000000\n",
            "t",
        )
        .unwrap();
        let c = RunConfig::from_file(&f).unwrap();
        assert_eq!(c.localizer.min_area_ratio, 0.0002);
        assert_eq!(c.knn_k, 3);
        assert_eq!(c.palette.color(DataType::Email), image::Rgb([0, 0, 0]));
        assert!(c.validate().is_ok());
    }

    #[test]
    fn rejects_unknown_duplicate_and_bad_values() {
        assert!(ConfigFile::parse("nope = 1", "t").unwrap_err().to_string().contains("t:1"));
        assert!(ConfigFile::parse("knn.k = 1\nknn.k = 2", "t").is_err());
        assert!(ConfigFile::parse("palette.Emial = #000000", "t").is_err());
        assert!(ConfigFile::parse("just text", "t").is_err());
        let f = ConfigFile::parse("knn.k = many", "t").unwrap();
        assert!(RunConfig::from_file(&f).is_err());
        let f = ConfigFile::parse("eval.iou_threshold = 1.5", "t").unwrap();
        assert!(RunConfig::from_file(&f).unwrap().validate().is_err());
    }
}
