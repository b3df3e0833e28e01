//! Comma-separated feature table: `subject,label,<feature names…>`, one row
//! per subject. Floats are written in shortest round-trip form, so a table
//! read back reproduces the values bit for bit.

use super::{RadiomicsError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub subject: String,
    pub label: u8,
    pub values: Vec<f64>,
}

pub fn write_feature_table(names: &[String], rows: &[FeatureRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| RadiomicsError::MalformedTable(e.to_string());
    let header: Vec<&str> = ["subject", "label"].into_iter().chain(names.iter().map(String::as_str)).collect();
    w.write_record(&header).map_err(err)?;
    for r in rows {
        if r.values.len() != names.len() {
            return Err(RadiomicsError::MalformedTable(format!(
                "subject {} has {} values for {} columns",
                r.subject,
                r.values.len(),
                names.len()
            )));
        }
        let mut rec = vec![r.subject.clone(), r.label.to_string()];
        rec.extend(r.values.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| RadiomicsError::MalformedTable(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| RadiomicsError::MalformedTable(e.to_string()))
}

/// Returns the feature names and rows.
pub fn parse_feature_table(text: &str) -> Result<(Vec<String>, Vec<FeatureRow>)> {
    let bad = |m: String| RadiomicsError::MalformedTable(m);
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.len() < 2 || &header[0] != "subject" || &header[1] != "label" {
        return Err(bad("header must start with subject,label".into()));
    }
    let names: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != header.len() {
            return Err(bad(format!("row {} has {} fields, expected {}", i + 1, rec.len(), header.len())));
        }
        let label: u8 = rec[1].parse().map_err(|_| bad(format!("row {}: bad label {:?}", i + 1, &rec[1])))?;
        if label > 1 {
            return Err(bad(format!("row {}: label must be 0 or 1", i + 1)));
        }
        let values = rec
            .iter()
            .skip(2)
            .map(|s| s.parse::<f64>().map_err(|_| bad(format!("row {}: bad number {s:?}", i + 1))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(FeatureRow { subject: rec[0].to_string(), label, values });
    }
    Ok((names, rows))
}
