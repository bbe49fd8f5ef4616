use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::scale::{derive_scale, Scale};
use crate::error::{Error, Result};

/// One SR image with its provenance and subjective label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    /// Path relative to the manifest's directory.
    pub sr_path: PathBuf,
    pub lr_width: u32,
    pub hr_width: u32,
    pub scale: Scale,
    pub label: f64,
    pub content_id: String,
    pub method_id: String,
}

impl SampleRecord {
    pub fn new(
        sr_path: impl Into<PathBuf>,
        hr_width: u32,
        lr_width: u32,
        label: f64,
        content_id: impl Into<String>,
        method_id: impl Into<String>,
    ) -> Result<Self> {
        let rec = SampleRecord {
            sr_path: sr_path.into(),
            lr_width,
            hr_width,
            scale: derive_scale(hr_width, lr_width)?,
            label,
            content_id: content_id.into(),
            method_id: method_id.into(),
        };
        Ok(rec)
    }

    fn validate(&self, range: LabelRange) -> Result<()> {
        let scale = derive_scale(self.hr_width, self.lr_width)?;
        if scale != self.scale {
            return Err(Error::InvalidRecord(format!(
                "{}: declared scale {} but {}/{} = {}",
                self.sr_path.display(),
                self.scale,
                self.hr_width,
                self.lr_width,
                scale
            )));
        }
        if !range.contains(self.label) {
            return Err(Error::InvalidRecord(format!(
                "{}: label {} outside [{}, {}]",
                self.sr_path.display(),
                self.label,
                range.lo,
                range.hi
            )));
        }
        if self.content_id.is_empty() || self.method_id.is_empty() {
            return Err(Error::InvalidRecord(format!(
                "{}: content_id and method_id must be non-empty",
                self.sr_path.display()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelRange {
    pub lo: f64,
    pub hi: f64,
}

impl LabelRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidConfig(format!("label range [{lo}, {hi}] is empty")));
        }
        Ok(LabelRange { lo, hi })
    }

    pub fn contains(&self, x: f64) -> bool {
        x.is_finite() && x >= self.lo && x <= self.hi
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelPolarity {
    HigherIsBetter,
    HigherIsWorse,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ManifestHeader {
    name: String,
    label_range: LabelRange,
    label_polarity: LabelPolarity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<serde_json::Value>,
}

/// A dataset: header metadata plus one record per SR image.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub name: String,
    pub label_range: LabelRange,
    pub label_polarity: LabelPolarity,
    pub records: Vec<SampleRecord>,
    /// Free-form provenance stored in the header line.
    pub provenance: Option<serde_json::Value>,
    /// Directory that record paths are relative to.
    pub root: PathBuf,
}

impl DatasetManifest {
    pub fn new(
        name: impl Into<String>,
        label_range: LabelRange,
        label_polarity: LabelPolarity,
        records: Vec<SampleRecord>,
    ) -> Result<Self> {
        let m = DatasetManifest {
            name: name.into(),
            label_range,
            label_polarity,
            records,
            provenance: None,
            root: PathBuf::new(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        LabelRange::new(self.label_range.lo, self.label_range.hi)?;
        self.records.iter().try_for_each(|r| r.validate(self.label_range))
    }

    pub fn resolve(&self, record: &SampleRecord) -> PathBuf {
        self.root.join(&record.sr_path)
    }

    pub fn content_ids(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.content_id.as_str()).collect()
    }

    pub fn method_ids(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.method_id.as_str()).collect()
    }

    pub fn scales(&self) -> BTreeSet<Scale> {
        self.records.iter().map(|r| r.scale).collect()
    }

    /// Label mapped to `[0, 1]` with "higher is better" orientation.
    pub fn normalized_label(&self, record: &SampleRecord) -> f64 {
        let LabelRange { lo, hi } = self.label_range;
        let t = (record.label - lo) / (hi - lo);
        match self.label_polarity {
            LabelPolarity::HigherIsBetter => t,
            LabelPolarity::HigherIsWorse => 1.0 - t,
        }
    }

    /// Serializes to line-delimited JSON: a header object, then one record per line.
    pub fn to_jsonl(&self) -> String {
        let header = ManifestHeader {
            name: self.name.clone(),
            label_range: self.label_range,
            label_polarity: self.label_polarity,
            provenance: self.provenance.clone(),
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str, root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        Self::parse_lines(text.lines().map(|l| Ok(l.to_owned())), root)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_jsonl().as_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let lines = BufReader::new(f).lines().map(|l| l.map_err(|e| Error::io(path, e)));
        Self::parse_lines(lines, root).map_err(|e| match e {
            Error::Format { msg, .. } => Error::format(path, msg),
            other => other,
        })
    }

    fn parse_lines(lines: impl Iterator<Item = Result<String>>, root: PathBuf) -> Result<Self> {
        let mut header: Option<ManifestHeader> = None;
        let mut records = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |e: serde_json::Error| Error::format(&root, format!("line {}: {e}", lineno + 1));
            if header.is_none() {
                header = Some(serde_json::from_str(&line).map_err(bad)?);
            } else {
                records.push(serde_json::from_str::<SampleRecord>(&line).map_err(bad)?);
            }
        }
        let header = header.ok_or_else(|| Error::format(&root, "missing manifest header line"))?;
        let m = DatasetManifest {
            name: header.name,
            label_range: header.label_range,
            label_polarity: header.label_polarity,
            records,
            provenance: header.provenance,
            root,
        };
        m.validate()?;
        Ok(m)
    }
}
