use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column order of the result CSV.
pub const RESULT_HEADER: [&str; 15] = [
    "mode",
    "condition_id",
    "V",
    "m_v",
    "n",
    "rho_w",
    "rho_b",
    "replication",
    "meta_learner",
    "metric",
    "value",
    "n_selected",
    "seed",
    "runtime_s",
    "error",
];

/// One metric value for one (condition, replication, meta-learner).
/// Undefined values and fields that do not apply are written empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub mode: String,
    pub condition_id: String,
    #[serde(rename = "V")]
    pub views: Option<usize>,
    pub m_v: Option<usize>,
    pub n: Option<usize>,
    pub rho_w: Option<f64>,
    pub rho_b: Option<f64>,
    pub replication: usize,
    pub meta_learner: String,
    pub metric: String,
    pub value: Option<f64>,
    pub n_selected: Option<usize>,
    pub seed: u64,
    pub runtime_s: f64,
    pub error: String,
}

impl ResultRecord {
    fn sort_key(&self) -> (&str, &str, usize, &str, &str) {
        (&self.mode, &self.condition_id, self.replication, &self.meta_learner, &self.metric)
    }
}

/// Canonical record order: mode, condition, replication, meta-learner,
/// metric.
pub fn sort_records(records: &mut [ResultRecord]) {
    records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

pub fn write_records<W: Write>(records: &[ResultRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(RESULT_HEADER)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<ResultRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != RESULT_HEADER {
        return Err(Error::SchemaMismatch(format!(
            "expected header `{}`, found `{}`",
            RESULT_HEADER.join(","),
            header.join(",")
        )));
    }
    rdr.deserialize()
        .map(|r| r.map_err(|e| Error::SchemaMismatch(e.to_string())))
        .collect()
}
