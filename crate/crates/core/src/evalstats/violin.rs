use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ag::{alexander_govern, chi2_sf, significance_decision, AgResult, GroupedScores};
use crate::datakit::{DatasetManifest, LabelPolarity, Scale};
use crate::error::{Error, Result};

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub scale: Scale,
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

impl GroupSummary {
    fn of(scale: Scale, values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        GroupSummary {
            scale,
            n: v.len(),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            median: quantile(&v, 0.5),
            q1: quantile(&v, 0.25),
            q3: quantile(&v, 0.75),
            min: v[0],
            max: v[v.len() - 1],
        }
    }
}

/// Raw labels per scale plus summaries, for violin plots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolinData {
    pub dataset: String,
    pub label_polarity: LabelPolarity,
    pub summaries: Vec<GroupSummary>,
    pub values: BTreeMap<Scale, Vec<f64>>,
}

impl ViolinData {
    pub fn groups(&self) -> GroupedScores {
        GroupedScores { groups: self.values.clone() }
    }

    /// Columns: `scale,n,mean,median,q1,q3,min,max`.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("scale,n,mean,median,q1,q3,min,max\n");
        for s in &self.summaries {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                s.scale, s.n, s.mean, s.median, s.q1, s.q3, s.min, s.max
            ));
        }
        out
    }

    /// Columns: `scale,label`, one row per record.
    pub fn values_csv(&self) -> String {
        let mut out = String::from("scale,label\n");
        for (scale, vals) in &self.values {
            for v in vals {
                out.push_str(&format!("{scale},{v}\n"));
            }
        }
        out
    }
}

fn group_by_scale<'a>(records: impl Iterator<Item = &'a crate::datakit::SampleRecord>) -> GroupedScores {
    let mut g = GroupedScores::default();
    for r in records {
        g.push(r.scale, r.label);
    }
    g
}

pub fn violin_data(manifest: &DatasetManifest) -> Result<ViolinData> {
    if manifest.records.is_empty() {
        return Err(Error::InvalidInput("manifest has no records".into()));
    }
    let groups = group_by_scale(manifest.records.iter());
    Ok(ViolinData {
        dataset: manifest.name.clone(),
        label_polarity: manifest.label_polarity,
        summaries: groups.groups.iter().map(|(s, v)| GroupSummary::of(*s, v)).collect(),
        values: groups.groups,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatsMode {
    /// One test per SR method, results averaged.
    #[default]
    PerMethodAvg,
    /// One test over all records.
    Pooled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method_id: String,
    #[serde(flatten)]
    pub result: AgResult,
}

/// Outcome of testing whether scale groups differ in mean label.
///
/// In per-method mode `statistic` is the mean of per-method statistics and
/// `p_value` the mean of per-method p-values; `p_value_of_mean_statistic`
/// is the chi-square tail at the mean statistic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleEffectReport {
    pub dataset: String,
    pub mode: StatsMode,
    pub statistic: f64,
    pub p_value: f64,
    pub df: usize,
    pub alpha: f64,
    pub significant: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value_of_mean_statistic: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub per_method: Vec<MethodResult>,
}

pub fn scale_effect(manifest: &DatasetManifest, mode: StatsMode, alpha: f64) -> Result<ScaleEffectReport> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidConfig(format!("alpha {alpha} outside [0, 1]")));
    }
    let base = |statistic: f64, p_value: f64, df: usize| ScaleEffectReport {
        dataset: manifest.name.clone(),
        mode,
        statistic,
        p_value,
        df,
        alpha,
        significant: significance_decision(p_value, alpha),
        p_value_of_mean_statistic: None,
        per_method: Vec::new(),
    };
    match mode {
        StatsMode::Pooled => {
            let r = alexander_govern(&group_by_scale(manifest.records.iter()))?;
            Ok(base(r.statistic, r.p_value, r.df))
        }
        StatsMode::PerMethodAvg => {
            let per_method = manifest
                .method_ids()
                .into_iter()
                .map(|m| {
                    let g = group_by_scale(manifest.records.iter().filter(|r| r.method_id == m));
                    Ok(MethodResult { method_id: m.to_owned(), result: alexander_govern(&g)? })
                })
                .collect::<Result<Vec<_>>>()?;
            if per_method.is_empty() {
                return Err(Error::InsufficientData("manifest has no records".into()));
            }
            let k = per_method.len() as f64;
            let stat = per_method.iter().map(|m| m.result.statistic).sum::<f64>() / k;
            let p = per_method.iter().map(|m| m.result.p_value).sum::<f64>() / k;
            let df = per_method[0].result.df;
            let mut rep = base(stat, p, df);
            if per_method.iter().all(|m| m.result.df == df) {
                rep.p_value_of_mean_statistic = Some(chi2_sf(stat, df));
            }
            rep.per_method = per_method;
            Ok(rep)
        }
    }
}
