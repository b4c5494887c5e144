//! Scoring the classifier against a labeled insult corpus.
//!
//! Evaluation deliberately bypasses target resolution: labeled corpora mark
//! whether a comment is insulting, not whom it insults, so the prediction
//! is simply "does any abusive span exist". The plural rule and pronoun
//! logic still run in production classification; they are just not what a
//! label of 1 certifies.

use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::abuse_engine::{find_abuse_spans, tokenize};
use crate::lexicon::CompiledLexicon;

/// Column layout of the labeled CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalFormat {
    /// Header `label,text`.
    Plain,
    /// The Kaggle insult-detection layout: `Insult,Date,Comment`.
    Kaggle,
}

impl EvalFormat {
    fn label_column(self) -> &'static str {
        match self {
            EvalFormat::Plain => "label",
            EvalFormat::Kaggle => "Insult",
        }
    }
    fn text_column(self) -> &'static str {
        match self {
            EvalFormat::Plain => "text",
            EvalFormat::Kaggle => "Comment",
        }
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: missing column {column}")]
    MissingColumn { path: String, column: &'static str },
    #[error("{path} row {row}: label must be 0 or 1, got {value:?}")]
    BadLabel {
        path: String,
        row: u64,
        value: String,
    },
}

/// Confusion matrix and derived scores. Ratios with a zero denominator are
/// reported as 0 rather than NaN.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl EvalReport {
    pub fn from_counts(tp: u64, fp: u64, tn: u64, fn_: u64) -> EvalReport {
        let ratio = |num: u64, den: u64| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let accuracy = ratio(tp + tn, tp + fp + tn + fn_);
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        EvalReport {
            tp,
            fp,
            tn,
            fn_,
            accuracy,
            precision,
            recall,
            f1,
        }
    }

    pub fn rows(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// The classifier's yes/no verdict used for evaluation.
pub fn predicts_abuse(text: &str, lex: &CompiledLexicon) -> bool {
    let tokens = tokenize(text, lex);
    !find_abuse_spans(&tokens, lex).is_empty()
}

/// Score the classifier against a labeled CSV.
pub fn evaluate(
    path: &Path,
    lex: &CompiledLexicon,
    format: EvalFormat,
) -> Result<EvalReport, EvalError> {
    let file = std::fs::File::open(path).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|source| EvalError::Csv {
            path: path.display().to_string(),
            source,
        })?
        .clone();
    let col = |name: &'static str| -> Result<usize, EvalError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or(EvalError::MissingColumn {
                path: path.display().to_string(),
                column: name,
            })
    };
    let label_col = col(format.label_column())?;
    let text_col = col(format.text_column())?;

    let (mut tp, mut fp, mut tn, mut fn_) = (0u64, 0u64, 0u64, 0u64);
    for (i, record) in reader.records().enumerate() {
        let row = i as u64 + 2;
        let record = record.map_err(|source| EvalError::Csv {
            path: path.display().to_string(),
            source,
        })?;
        let label = match record.get(label_col).map(str::trim) {
            Some("0") => false,
            Some("1") => true,
            other => {
                return Err(EvalError::BadLabel {
                    path: path.display().to_string(),
                    row,
                    value: other.unwrap_or("").to_string(),
                });
            }
        };
        let text = record.get(text_col).unwrap_or("");
        let predicted = predicts_abuse(text, lex);
        match (predicted, label) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(EvalReport::from_counts(tp, fp, tn, fn_))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::{Category, LexiconEntry};
    use std::collections::BTreeMap;
    use std::io::Write;

    fn lex() -> CompiledLexicon {
        let entries = vec![
            LexiconEntry {
                surface: "idiot".into(),
                category: Category::Slur,
                subtype: None,
                plural_forms: vec!["idiots".into()],
            },
            LexiconEntry {
                surface: "stupid".into(),
                category: Category::Offensive,
                subtype: None,
                plural_forms: vec![],
            },
            LexiconEntry {
                surface: "useless".into(),
                category: Category::Offensive,
                subtype: None,
                plural_forms: vec![],
            },
        ];
        CompiledLexicon::compile(entries, BTreeMap::new())
    }

    #[test]
    fn derived_scores_match_hand_computation() {
        let r = EvalReport::from_counts(72, 28, 100, 104);
        assert_eq!(r.rows(), 304);
        assert!((r.precision - 0.72).abs() < 1e-12);
        assert!((r.recall - 72.0 / 176.0).abs() < 1e-12);
        let expected_f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
        assert!((r.f1 - expected_f1).abs() < 1e-12);
        assert!((r.accuracy - 172.0 / 304.0).abs() < 1e-12);
    }

    #[test]
    fn zero_denominators_score_zero_not_nan() {
        let r = EvalReport::from_counts(0, 0, 5, 3);
        assert_eq!(r.precision, 0.0);
        assert_eq!(r.recall, 0.0);
        assert_eq!(r.f1, 0.0);
        let r = EvalReport::from_counts(0, 0, 0, 0);
        assert_eq!(r.accuracy, 0.0);
    }

    #[test]
    fn prediction_ignores_targeting() {
        let lex = lex();
        // Plural slur with no referent: not counted in production, but it
        // is still an abusive span, so evaluation predicts 1.
        assert!(predicts_abuse("idiots everywhere", &lex));
        assert!(predicts_abuse("stupid useless rubbish", &lex));
        assert!(!predicts_abuse("stupid", &lex));
        assert!(!predicts_abuse("a perfectly fine remark", &lex));
    }

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn evaluate_builds_the_confusion_matrix() {
        let f = write_temp(
            "label,text\n\
             1,you idiot\n\
             1,what a stupid useless plan\n\
             1,you are a disgrace\n\
             0,lovely morning\n\
             0,total idiot behaviour\n\
             0,stupid\n",
        );
        let r = evaluate(f.path(), &lex(), EvalFormat::Plain).unwrap();
        assert_eq!((r.tp, r.fp, r.tn, r.fn_), (2, 1, 2, 1));
        assert_eq!(r.rows(), 6);
    }

    #[test]
    fn evaluate_is_row_order_invariant() {
        let rows = [
            "1,you idiot",
            "0,fine day",
            "1,missed insult",
            "0,total idiot move",
        ];
        let forward = write_temp(&format!("label,text\n{}\n", rows.join("\n")));
        let mut reversed_rows = rows;
        reversed_rows.reverse();
        let reversed = write_temp(&format!("label,text\n{}\n", reversed_rows.join("\n")));
        let a = evaluate(forward.path(), &lex(), EvalFormat::Plain).unwrap();
        let b = evaluate(reversed.path(), &lex(), EvalFormat::Plain).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn kaggle_layout_reads_insult_and_comment_columns() {
        let f = write_temp(
            "Insult,Date,Comment\n\
             1,20120618192155Z,\"you idiot\"\n\
             0,20120618192156Z,\"have a nice day\"\n",
        );
        let r = evaluate(f.path(), &lex(), EvalFormat::Kaggle).unwrap();
        assert_eq!((r.tp, r.fp, r.tn, r.fn_), (1, 0, 1, 0));
    }

    #[test]
    fn bad_labels_and_missing_columns_are_reported_with_position() {
        let f = write_temp("label,text\n1,ok\nmaybe,hmm\n");
        match evaluate(f.path(), &lex(), EvalFormat::Plain).unwrap_err() {
            EvalError::BadLabel { row, value, .. } => {
                assert_eq!(row, 3);
                assert_eq!(value, "maybe");
            }
            other => panic!("wrong error: {other}"),
        }
        let f = write_temp("label\n1\n");
        assert!(matches!(
            evaluate(f.path(), &lex(), EvalFormat::Plain).unwrap_err(),
            EvalError::MissingColumn { column: "text", .. }
        ));
    }
}
