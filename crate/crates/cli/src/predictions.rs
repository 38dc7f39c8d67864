//! Prediction and submission CSV files: `tweet_id` then one column per label.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use tweetsent_core::model::PredictionMatrix;
use tweetsent_core::{LabelVector, LABEL_NAMES, NUM_LABELS};

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTable {
    pub ids: Vec<String>,
    pub matrix: PredictionMatrix,
}

fn header() -> Vec<&'static str> {
    std::iter::once("tweet_id").chain(LABEL_NAMES).collect()
}

fn write_rows<R: AsRef<[String]>>(path: &Path, rows: impl Iterator<Item = R>) -> Result<()> {
    tweetsent_core::io::write_atomic_with(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(header())?;
        for row in rows {
            out.write_record(row.as_ref())?;
        }
        out.flush()
    })?;
    Ok(())
}

/// Probabilities with six decimals.
pub fn write_predictions(path: &Path, ids: &[String], matrix: &PredictionMatrix) -> Result<()> {
    let rows = ids.iter().zip(matrix.rows()).map(|(id, row)| {
        std::iter::once(id.clone())
            .chain(row.iter().map(|v| format!("{v:.6}")))
            .collect::<Vec<_>>()
    });
    write_rows(path, rows)
}

pub fn write_submission(path: &Path, ids: &[String], labels: &[LabelVector]) -> Result<()> {
    let rows = ids.iter().zip(labels).map(|(id, l)| {
        std::iter::once(id.clone())
            .chain(l.values().iter().map(u8::to_string))
            .collect::<Vec<_>>()
    });
    write_rows(path, rows)
}

pub fn read_predictions(path: &Path) -> Result<PredictionTable> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let found: Vec<String> = reader
        .headers()
        .with_context(|| format!("{}: line 1: unreadable header", path.display()))?
        .iter()
        .map(str::to_string)
        .collect();
    if found != header() {
        bail!("{}: line 1: expected header {:?}, found {:?}", path.display(), header().join(","), found.join(","));
    }
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            anyhow!("{}: line {line}: {e}", path.display())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != NUM_LABELS + 1 {
            bail!("{}: line {line}: expected {} fields, found {}", path.display(), NUM_LABELS + 1, record.len());
        }
        let mut row = [0f32; NUM_LABELS];
        for (j, (slot, field)) in row.iter_mut().zip(record.iter().skip(1)).enumerate() {
            *slot = field
                .trim()
                .parse::<f32>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| anyhow!("{}: line {line}: column {}: not a number: {field:?}", path.display(), LABEL_NAMES[j]))?;
        }
        ids.push(record[0].to_string());
        rows.push(row);
    }
    Ok(PredictionTable {
        ids,
        matrix: PredictionMatrix::new(rows)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let matrix = PredictionMatrix::new(vec![[0.25; NUM_LABELS], [0.1234567; NUM_LABELS]]).unwrap();
        let ids = vec!["a".to_string(), "b".to_string()];
        write_predictions(&path, &ids, &matrix).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("tweet_id,TextOnlyInformative,"));
        assert!(text.contains("b,0.123457,"));
        let back = read_predictions(&path).unwrap();
        assert_eq!(back.ids, ids);
        assert_eq!(back.matrix.row(1)[0], 0.123457);

        std::fs::write(&path, format!("{text}c,0.1,oops\n")).unwrap();
        let err = read_predictions(&path).unwrap_err().to_string();
        assert!(err.contains("line 4"), "{err}");

        write_predictions(&path, &[], &PredictionMatrix::default()).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 1);
        assert!(read_predictions(&path).unwrap().ids.is_empty());
    }
}
