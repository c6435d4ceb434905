use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::Serialize;

use crate::error::Result;

use super::records::{read_records, ResultRecord};

/// Mean and sample sd of one (condition, meta-learner, metric) group.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub mode: String,
    pub condition_id: String,
    #[serde(rename = "V")]
    pub views: Option<usize>,
    pub m_v: Option<usize>,
    pub n: Option<usize>,
    pub rho_w: Option<f64>,
    pub rho_b: Option<f64>,
    pub meta_learner: String,
    pub metric: String,
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    /// Group of one record; `sd` is reported as 0.
    pub single_record: bool,
}

/// Groups records with a value by condition, meta-learner and metric.
/// Groups are ordered by their key fields as written.
pub fn summarize_records(records: &[ResultRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, String, String, String), (&ResultRecord, Vec<f64>)> = BTreeMap::new();
    for r in records {
        let Some(v) = r.value else { continue };
        let key = (r.mode.clone(), r.condition_id.clone(), r.meta_learner.clone(), r.metric.clone());
        groups.entry(key).or_insert_with(|| (r, Vec::new())).1.push(v);
    }
    groups
        .into_values()
        .map(|(r, vals)| {
            let count = vals.len();
            let mean = vals.iter().sum::<f64>() / count as f64;
            let sd = if count > 1 {
                (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                mode: r.mode.clone(),
                condition_id: r.condition_id.clone(),
                views: r.views,
                m_v: r.m_v,
                n: r.n,
                rho_w: r.rho_w,
                rho_b: r.rho_b,
                meta_learner: r.meta_learner.clone(),
                metric: r.metric.clone(),
                count,
                mean,
                sd,
                single_record: count == 1,
            }
        })
        .collect()
}

/// Reads a result CSV and writes the grouped summary CSV.
pub fn summarize<R: Read, W: Write>(input: R, output: W) -> Result<Vec<SummaryRow>> {
    let rows = summarize_records(&read_records(input)?);
    let mut w = csv::Writer::from_writer(output);
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(rows)
}
