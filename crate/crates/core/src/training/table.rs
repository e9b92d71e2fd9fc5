//! Plain-text result tables with the columns
//! `model | embeddings | fine-tuned | dim | accuracy`.
//!
//! Empty cells are written as `-`; accuracy always has four decimals.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelKind;

use super::config::TrainConfig;

pub const COLUMNS: [&str; 5] = ["model", "embeddings", "fine-tuned", "dim", "accuracy"];
const EMPTY: &str = "-";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsRow {
    pub model: String,
    pub embeddings: Option<String>,
    pub fine_tuned: Option<bool>,
    pub dim: Option<usize>,
    pub accuracy: f64,
}

impl ResultsRow {
    /// Describes a configuration the way the table names it, e.g.
    /// `BiLSTM 128 | glove.6B.100d | yes | 100`.
    pub fn describe(config: &TrainConfig, pretrained_used: bool, accuracy: f64) -> Self {
        let model = match config.model_kind {
            ModelKind::BowSvm => "BoW + SVM".to_string(),
            ModelKind::Cnn => "CNN".to_string(),
            ModelKind::Lstm => format!("LSTM {}", config.hidden),
            ModelKind::BiLstm => format!("BiLSTM {}", config.hidden),
        };
        if config.model_kind == ModelKind::BowSvm {
            return ResultsRow {
                model,
                embeddings: None,
                fine_tuned: None,
                dim: None,
                accuracy,
            };
        }
        let embeddings = config.embeddings_label.clone().unwrap_or_else(|| {
            match (&config.glove_path, pretrained_used) {
                (Some(p), true) => p
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "pretrained".into()),
                (None, true) => "pretrained".into(),
                (_, false) => "random".into(),
            }
        });
        ResultsRow {
            model,
            embeddings: Some(embeddings),
            fine_tuned: Some(config.embedding_mode.trainable()),
            dim: Some(config.embed_dim),
            accuracy,
        }
    }

    fn cells(&self) -> Result<[String; 5]> {
        let text = |s: &str, what: &str| -> Result<String> {
            let t = s.trim();
            if t.is_empty() || t == EMPTY || t.contains(['|', '\n', '\r']) {
                return Err(Error::Data(format!("{what} {s:?} cannot be written as a table cell")));
            }
            Ok(t.to_string())
        };
        if !(0.0..=1.0).contains(&self.accuracy) {
            return Err(Error::Data(format!("accuracy {} outside [0, 1]", self.accuracy)));
        }
        Ok([
            text(&self.model, "model")?,
            match &self.embeddings {
                Some(e) => text(e, "embeddings")?,
                None => EMPTY.into(),
            },
            match self.fine_tuned {
                Some(true) => "yes".into(),
                Some(false) => "no".into(),
                None => EMPTY.into(),
            },
            self.dim.map_or_else(|| EMPTY.into(), |d| d.to_string()),
            format!("{:.4}", self.accuracy),
        ])
    }
}

/// Renders rows as an aligned pipe table with a header and rule line.
pub fn emit_table(rows: &[ResultsRow]) -> Result<String> {
    let cells: Vec<[String; 5]> = rows.iter().map(ResultsRow::cells).collect::<Result<_>>()?;
    let mut widths = COLUMNS.map(|c| c.chars().count());
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, row: &[&str]| {
        out.push('|');
        for (c, w) in row.iter().zip(widths) {
            let _ = write!(out, " {c:<w$} |");
        }
        out.push('\n');
    };
    line(&mut out, &COLUMNS);
    out.push('|');
    for w in widths {
        out.push_str(&"-".repeat(w + 2));
        out.push('|');
    }
    out.push('\n');
    for row in &cells {
        let refs: Vec<&str> = row.iter().map(String::as_str).collect();
        line(&mut out, &refs);
    }
    Ok(out)
}

fn split_row(line: &str, lineno: usize) -> Result<Vec<&str>> {
    let inner = line
        .trim()
        .strip_prefix('|')
        .and_then(|l| l.strip_suffix('|'))
        .ok_or_else(|| Error::parse(lineno, "table rows start and end with '|'"))?;
    let cells: Vec<&str> = inner.split('|').map(str::trim).collect();
    if cells.len() != COLUMNS.len() {
        return Err(Error::parse(
            lineno,
            format!("expected {} cells, found {}", COLUMNS.len(), cells.len()),
        ));
    }
    Ok(cells)
}

/// Parses the output of [`emit_table`]. Blank lines are ignored.
pub fn parse_table(text: &str) -> Result<Vec<ResultsRow>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let (n, header) = lines.next().ok_or_else(|| Error::parse(1, "missing header"))?;
    if split_row(header, n)? != COLUMNS {
        return Err(Error::parse(n, format!("header must be {}", COLUMNS.join(" | "))));
    }
    let (n, rule) = lines.next().ok_or_else(|| Error::parse(n + 1, "missing rule line"))?;
    let rule_cells = split_row(rule, n)?;
    if rule_cells.iter().any(|c| c.is_empty() || !c.chars().all(|ch| ch == '-')) {
        return Err(Error::parse(n, "rule line must contain only dashes"));
    }
    let mut rows = Vec::new();
    for (n, line) in lines {
        let c = split_row(line, n)?;
        let opt = |s: &str| (s != EMPTY).then(|| s.to_string());
        if c[0].is_empty() || c[0] == EMPTY {
            return Err(Error::parse(n, "model cell is empty"));
        }
        let fine_tuned = match c[2] {
            "yes" => Some(true),
            "no" => Some(false),
            EMPTY => None,
            other => return Err(Error::parse(n, format!("fine-tuned must be yes, no or -, got {other:?}"))),
        };
        let dim = match c[3] {
            EMPTY => None,
            s => Some(
                s.parse::<usize>()
                    .map_err(|_| Error::parse(n, format!("dim {s:?} is not an integer")))?,
            ),
        };
        let accuracy: f64 = c[4]
            .parse()
            .map_err(|_| Error::parse(n, format!("accuracy {:?} is not a number", c[4])))?;
        if !(0.0..=1.0).contains(&accuracy) {
            return Err(Error::parse(n, format!("accuracy {accuracy} outside [0, 1]")));
        }
        if c[1].is_empty() {
            return Err(Error::parse(n, "embeddings cell is empty; use -"));
        }
        rows.push(ResultsRow {
            model: c[0].to_string(),
            embeddings: opt(c[1]),
            fine_tuned,
            dim,
            accuracy,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::EmbeddingMode;

    fn rows() -> Vec<ResultsRow> {
        vec![
            ResultsRow::describe(
                &TrainConfig {
                    model_kind: ModelKind::BowSvm,
                    ..Default::default()
                },
                false,
                0.5832,
            ),
            ResultsRow::describe(
                &TrainConfig {
                    model_kind: ModelKind::BiLstm,
                    hidden: 256,
                    embed_dim: 300,
                    embedding_mode: EmbeddingMode::FineTune,
                    embeddings_label: Some("GloVe (W + G5)".into()),
                    ..Default::default()
                },
                true,
                0.6711,
            ),
        ]
    }

    #[test]
    fn emit_then_parse() {
        let text = emit_table(&rows()).unwrap();
        let parsed = parse_table(&text).unwrap();
        assert_eq!(parsed, rows());
        assert_eq!(emit_table(&parsed).unwrap(), text);
        let first = text.lines().next().unwrap();
        assert!(first.starts_with("| model "));
    }

    #[test]
    fn rows_are_aligned() {
        let text = emit_table(&rows()).unwrap();
        let widths: Vec<usize> = text.lines().map(|l| l.chars().count()).collect();
        assert!(widths.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn describe_names() {
        let r = &rows();
        assert_eq!(r[0].model, "BoW + SVM");
        assert_eq!(r[0].dim, None);
        assert_eq!(r[1].model, "BiLSTM 256");
        assert_eq!(r[1].fine_tuned, Some(true));
        let random = ResultsRow::describe(&TrainConfig::default(), false, 0.5);
        assert_eq!(random.embeddings.as_deref(), Some("random"));
    }

    #[test]
    fn rejects_malformed_tables() {
        assert!(parse_table("").is_err());
        assert!(parse_table("| a | b |\n").is_err());
        let good = emit_table(&rows()).unwrap();
        assert!(parse_table(&good.replace("yes", "maybe")).is_err());
        assert!(parse_table(&good.replace("0.6711", "1.5")).is_err());
        let bad = ResultsRow {
            model: "a|b".into(),
            ..rows()[0].clone()
        };
        assert!(emit_table(&[bad]).is_err());
    }
}
