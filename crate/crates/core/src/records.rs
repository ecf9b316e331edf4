//! Line formats exchanged with external scorers and trainers.
//!
//! * scores: one `{"id": ..., "scores": [...]}` object per sample, with one
//!   score per answer in the dataset's answer order;
//! * metrics: one `{"step": ..., "train_loss": ..., "valid_loss": ...}`
//!   object per reported step.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generate::QaSample;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub id: String,
    pub scores: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub step: u64,
    pub train_loss: f64,
    pub valid_loss: Option<f64>,
}

fn read_lines<R, T>(reader: R) -> Result<Vec<(usize, T)>>
where
    R: BufRead,
    T: for<'de> Deserialize<'de>,
{
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::parse(line_no, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| Error::parse(line_no, e.to_string()))?;
        out.push((line_no, record));
    }
    Ok(out)
}

fn write_lines<W: Write, T: Serialize>(records: &[T], mut out: W) -> std::io::Result<()> {
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Reads score lines. Ids must be unique and scores finite.
pub fn read_scores<R: BufRead>(reader: R) -> Result<Vec<ScoreRecord>> {
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for (line, record) in read_lines::<_, ScoreRecord>(reader)? {
        if let Some(first) = seen.insert(record.id.clone(), line) {
            return Err(Error::parse(line, format!("id {:?} already on line {first}", record.id)));
        }
        if record.scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::parse(line, "non-finite score"));
        }
        out.push(record);
    }
    Ok(out)
}

pub fn write_scores<W: Write>(records: &[ScoreRecord], out: W) -> std::io::Result<()> {
    write_lines(records, out)
}

pub fn read_metrics<R: BufRead>(reader: R) -> Result<Vec<MetricsRecord>> {
    Ok(read_lines(reader)?.into_iter().map(|(_, r)| r).collect())
}

pub fn write_metrics<W: Write>(records: &[MetricsRecord], out: W) -> std::io::Result<()> {
    write_lines(records, out)
}

/// Orders external scores to match `samples`. Every sample needs exactly
/// one record with one score per answer, and no record may be left over.
pub fn align_scores(samples: &[QaSample], records: Vec<ScoreRecord>) -> Result<Vec<Vec<f64>>> {
    let mut by_id: HashMap<String, Vec<f64>> = records.into_iter().map(|r| (r.id, r.scores)).collect();
    let mut aligned = Vec::with_capacity(samples.len());
    for sample in samples {
        let scores = by_id
            .remove(&sample.id)
            .ok_or_else(|| Error::ScoreMismatch(format!("no scores for sample {:?}", sample.id)))?;
        if scores.len() != sample.answers.len() {
            return Err(Error::ScoreMismatch(format!(
                "sample {:?} has {} answers but {} scores",
                sample.id,
                sample.answers.len(),
                scores.len()
            )));
        }
        aligned.push(scores);
    }
    if let Some(extra) = by_id.keys().min() {
        return Err(Error::ScoreMismatch(format!(
            "{} score lines match no sample (first: {extra:?})",
            by_id.len()
        )));
    }
    Ok(aligned)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::SampleKind;

    fn sample(id: &str, answers: usize) -> QaSample {
        QaSample {
            id: id.into(),
            question: "q".into(),
            answers: (0..answers).map(|i| format!("a{i}")).collect(),
            correct_index: 0,
            kind: SampleKind::Benchmark,
            provenance: vec![],
        }
    }

    #[test]
    fn score_lines_round_trip() {
        let records = vec![
            ScoreRecord { id: "a".into(), scores: vec![1.5, 2.0, 0.25] },
            ScoreRecord { id: "b".into(), scores: vec![] },
        ];
        let mut buf = Vec::new();
        write_scores(&records, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "{\"id\":\"a\",\"scores\":[1.5,2.0,0.25]}\n{\"id\":\"b\",\"scores\":[]}\n"
        );
        assert_eq!(read_scores(buf.as_slice()).unwrap(), records);
    }

    #[test]
    fn extra_fields_are_ignored() {
        let line = "{\"id\":\"a\",\"scores\":[1,2],\"predicted\":0,\"label\":1}\n";
        assert_eq!(read_scores(line.as_bytes()).unwrap()[0].scores, vec![1.0, 2.0]);
    }

    #[test]
    fn bad_score_lines() {
        let dup = "{\"id\":\"a\",\"scores\":[1]}\n{\"id\":\"a\",\"scores\":[2]}\n";
        assert!(matches!(read_scores(dup.as_bytes()), Err(Error::Parse { line: 2, .. })));
        let junk = "{\"id\":\"a\"}\n";
        assert!(matches!(read_scores(junk.as_bytes()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn alignment() {
        let samples = vec![sample("x", 2), sample("y", 3)];
        let records = vec![
            ScoreRecord { id: "y".into(), scores: vec![3.0, 2.0, 1.0] },
            ScoreRecord { id: "x".into(), scores: vec![0.5, 0.7] },
        ];
        assert_eq!(
            align_scores(&samples, records.clone()).unwrap(),
            vec![vec![0.5, 0.7], vec![3.0, 2.0, 1.0]]
        );
        assert!(matches!(align_scores(&samples, records[..1].to_vec()), Err(Error::ScoreMismatch(_))));
        let mut extra = records.clone();
        extra.push(ScoreRecord { id: "z".into(), scores: vec![1.0] });
        assert!(matches!(align_scores(&samples, extra), Err(Error::ScoreMismatch(_))));
        let mut short = records;
        short[0].scores.pop();
        assert!(matches!(align_scores(&samples, short), Err(Error::ScoreMismatch(_))));
    }

    #[test]
    fn metrics_round_trip() {
        let records = vec![
            MetricsRecord { step: 0, train_loss: 1.1, valid_loss: Some(1.2) },
            MetricsRecord { step: 10, train_loss: 0.9, valid_loss: None },
        ];
        let mut buf = Vec::new();
        write_metrics(&records, &mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("{\"step\":0,\"train_loss\":1.1,\"valid_loss\":1.2}\n"));
        assert_eq!(read_metrics(buf.as_slice()).unwrap(), records);
    }
}
