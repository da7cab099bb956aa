use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{LossCurve, OverfitLabel, TrainingHistory};

/// Formats a double with 17 significant digits in the style of C's `%.17g`.
/// Parsing the result recovers the exact bit pattern.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let sign = if negative { "-" } else { "" };

    if !(-5..17).contains(&exp) {
        let trimmed = digits.trim_end_matches('0');
        let (head, tail) = trimmed.split_at(1);
        let frac = if tail.is_empty() { String::new() } else { format!(".{tail}") };
        let esign = if exp < 0 { '-' } else { '+' };
        return format!("{sign}{head}{frac}e{esign}{:02}", exp.abs());
    }

    let mut out = String::from(sign);
    if exp < 0 {
        out.push_str("0.");
        out.extend(std::iter::repeat_n('0', (-exp - 1) as usize));
        out.push_str(digits.trim_end_matches('0'));
    } else {
        let split = exp as usize + 1;
        let (int, frac) = digits.split_at(split);
        out.push_str(int);
        let frac = frac.trim_end_matches('0');
        if !frac.is_empty() {
            out.push('.');
            out.push_str(frac);
        }
    }
    out
}

const BASE_HEADER: [&str; 3] = ["epoch", "train_loss", "val_loss"];

/// Reads a history CSV with header `epoch,train_loss,val_loss[,val_acc]`.
/// Rows may appear in any epoch order. The history id is the file stem.
pub fn read_history_csv(path: impl AsRef<Path>) -> Result<TrainingHistory> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_history_csv(file, id)
}

pub fn parse_history_csv(reader: impl std::io::Read, id: impl Into<String>) -> Result<TrainingHistory> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
    let fields: Vec<&str> = header.iter().collect();
    let with_acc = match fields.as_slice() {
        [a, b, c] if [*a, *b, *c] == BASE_HEADER => false,
        [a, b, c, "val_acc"] if [*a, *b, *c] == BASE_HEADER => true,
        _ => {
            return Err(Error::ParseError {
                line: 1,
                message: format!(
                    "expected header 'epoch,train_loss,val_loss[,val_acc]', got '{}'",
                    fields.join(",")
                ),
            })
        }
    };
    let width = if with_acc { 4 } else { 3 };

    let mut rows: Vec<(usize, f64, f64, Option<f64>, u64)> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(e, 0))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != width {
            return Err(Error::ParseError {
                line,
                message: format!("expected {width} fields, got {}", record.len()),
            });
        }
        let epoch: usize = record[0].parse().map_err(|_| Error::ParseError {
            line,
            message: format!("invalid epoch '{}'", &record[0]),
        })?;
        let float = |i: usize| -> Result<f64> {
            let v: f64 = record[i].parse().map_err(|_| Error::ParseError {
                line,
                message: format!("invalid number '{}'", &record[i]),
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::InvalidValue { line })
            }
        };
        let train = float(1)?;
        let val = float(2)?;
        let acc = if with_acc {
            let a = float(3)?;
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::InvalidValue { line });
            }
            Some(a)
        } else {
            None
        };
        rows.push((epoch, train, val, acc, line));
    }

    rows.sort_by_key(|r| r.0);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::DuplicateEpoch {
            epoch: w[1].0,
            line: w[0].4.max(w[1].4),
        });
    }

    let epochs: Vec<usize> = rows.iter().map(|r| r.0).collect();
    let train = LossCurve::new(epochs.clone(), rows.iter().map(|r| r.1).collect())?;
    let val = LossCurve::new(epochs.clone(), rows.iter().map(|r| r.2).collect())?;
    let acc = if with_acc {
        Some(LossCurve::new(
            epochs,
            rows.iter().map(|r| r.3.unwrap_or_default()).collect(),
        )?)
    } else {
        None
    };
    TrainingHistory::new(id, train, val, acc)
}

fn csv_error(err: csv::Error, fallback_line: u64) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(fallback_line);
    Error::ParseError {
        line,
        message: err.to_string(),
    }
}

pub fn write_history_csv(history: &TrainingHistory, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    render_history_csv(history, &mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn render_history_csv(history: &TrainingHistory, out: &mut impl Write) -> std::io::Result<()> {
    let acc = history.val_accuracy.as_ref();
    if acc.is_some() {
        writeln!(out, "epoch,train_loss,val_loss,val_acc")?;
    } else {
        writeln!(out, "epoch,train_loss,val_loss")?;
    }
    let train = history.train_loss.values();
    let val = history.val_loss.values();
    for (i, epoch) in history.epochs().iter().enumerate() {
        write!(
            out,
            "{epoch},{},{}",
            format_float(train[i]),
            format_float(val[i])
        )?;
        if let Some(acc) = acc {
            write!(out, ",{}", format_float(acc.values()[i]))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Reads a labels CSV with header `history_id,label`.
pub fn read_labels_csv(path: impl AsRef<Path>) -> Result<Vec<(String, OverfitLabel)>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = rdr.headers().map_err(|e| csv_error(e, 1))?;
    if header.iter().collect::<Vec<_>>() != ["history_id", "label"] {
        return Err(Error::ParseError {
            line: 1,
            message: "expected header 'history_id,label'".into(),
        });
    }
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(e, 0))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let label = record[1].parse().map_err(|_| Error::ParseError {
            line,
            message: format!("unknown label '{}'", &record[1]),
        })?;
        labels.push((record[0].to_string(), label));
    }
    Ok(labels)
}

pub fn write_labels_csv(labels: &[(String, OverfitLabel)], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut wtr = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let io = |e: csv::Error| Error::io(path, e.into());
    wtr.write_record(["history_id", "label"]).map_err(io)?;
    for (id, label) in labels {
        wtr.write_record([id.as_str(), label.as_str()]).map_err(io)?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub history_path: PathBuf,
    #[serde(default)]
    pub label: Option<OverfitLabel>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

/// A JSON list of history files with optional labels. Relative paths resolve
/// against the manifest's own directory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    base_dir: PathBuf,
}

impl Manifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Self {
        Manifest {
            entries,
            base_dir: PathBuf::new(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let entries: Vec<ManifestEntry> = serde_json::from_str(&text)?;
        Ok(Manifest {
            entries,
            base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&self.entries)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.history_path.is_absolute() {
            entry.history_path.clone()
        } else {
            self.base_dir.join(&entry.history_path)
        }
    }

    /// Loads every listed history, attaching entry metadata.
    pub fn load_histories(&self) -> Result<Vec<(TrainingHistory, Option<OverfitLabel>)>> {
        self.entries
            .iter()
            .map(|entry| {
                let mut history = read_history_csv(self.resolve(entry))?;
                history
                    .meta
                    .extend(entry.meta.iter().map(|(k, v)| (k.clone(), v.clone())));
                Ok((history, entry.label))
            })
            .collect()
    }

    /// Histories labelled overfit or non-overfit; uncertain and unlabelled
    /// entries are skipped.
    pub fn load_labelled(&self) -> Result<Vec<(TrainingHistory, OverfitLabel)>> {
        Ok(self
            .load_histories()?
            .into_iter()
            .filter_map(|(h, label)| match label {
                Some(l @ (OverfitLabel::Overfit | OverfitLabel::NonOverfit)) => Some((h, l)),
                _ => None,
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn format_float_matches_printf_g17() {
        assert_eq!(format_float(1.0), "1");
        assert_eq!(format_float(0.1), "0.10000000000000001");
        assert_eq!(format_float(-2.5), "-2.5");
        assert_eq!(format_float(1e20), "1e+20");
        assert_eq!(format_float(1.5e-7), "1.4999999999999999e-07");
        assert_eq!(format_float(0.0001), "0.0001");
        assert_eq!(format_float(123456.0), "123456");
        assert_eq!(format_float(0.0), "0");
    }

    #[test]
    fn minimal_history_file() {
        let text = "epoch,train_loss,val_loss\n0,1.0,1.2\n1,0.5,0.9\n";
        let h = parse_history_csv(text.as_bytes(), "h").unwrap();
        assert_eq!(h.len(), 2);
        assert_eq!(h.train_loss.values(), &[1.0, 0.5]);
        assert_eq!(h.val_loss.values(), &[1.2, 0.9]);
        assert!(h.val_accuracy.is_none());
    }

    #[test]
    fn rows_are_sorted_by_epoch() {
        let text = "epoch,train_loss,val_loss,val_acc\n1,0.5,0.9,0.7\n0,1.0,1.2,0.5\n";
        let h = parse_history_csv(text.as_bytes(), "h").unwrap();
        assert_eq!(h.epochs(), &[0, 1]);
        assert_eq!(h.val_accuracy.unwrap().values(), &[0.5, 0.7]);
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = "epoch,train_loss,val_loss\n0,1.0,1.2\n1,abc,0.9\n";
        match parse_history_csv(text.as_bytes(), "h") {
            Err(Error::ParseError { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_and_non_finite_rows() {
        let dup = "epoch,train_loss,val_loss\n0,1.0,1.2\n0,0.5,0.9\n";
        assert!(matches!(
            parse_history_csv(dup.as_bytes(), "h"),
            Err(Error::DuplicateEpoch { epoch: 0, .. })
        ));
        let nan = "epoch,train_loss,val_loss\n0,1.0,1.2\n1,NaN,0.9\n";
        assert!(matches!(
            parse_history_csv(nan.as_bytes(), "h"),
            Err(Error::InvalidValue { line: 3 })
        ));
        let bad_header = "epoch,loss\n0,1.0\n";
        assert!(matches!(
            parse_history_csv(bad_header.as_bytes(), "h"),
            Err(Error::ParseError { line: 1, .. })
        ));
    }

    #[test]
    fn file_round_trip_and_labels() {
        let dir = tempfile::tempdir().unwrap();
        let h = TrainingHistory::new(
            "run",
            LossCurve::from_values(vec![1.0, 0.1, 1.0 / 3.0]).unwrap(),
            LossCurve::from_values(vec![1.2, 0.2, 2.0 / 3.0]).unwrap(),
            Some(LossCurve::from_values(vec![0.1, 0.5, 0.9]).unwrap()),
        )
        .unwrap();
        let path = dir.path().join("run.csv");
        write_history_csv(&h, &path).unwrap();
        let back = read_history_csv(&path).unwrap();
        assert_eq!(back, h);

        let labels = vec![
            ("a".to_string(), OverfitLabel::Overfit),
            ("b".to_string(), OverfitLabel::Uncertain),
        ];
        let lpath = dir.path().join("labels.csv");
        write_labels_csv(&labels, &lpath).unwrap();
        assert_eq!(read_labels_csv(&lpath).unwrap(), labels);
        assert_eq!(
            std::fs::read_to_string(&lpath).unwrap(),
            "history_id,label\na,overfit\nb,uncertain\n"
        );
    }

    #[test]
    fn manifest_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let h = TrainingHistory::new(
            "x",
            LossCurve::from_values(vec![1.0, 0.5]).unwrap(),
            LossCurve::from_values(vec![1.1, 0.6]).unwrap(),
            None,
        )
        .unwrap();
        write_history_csv(&h, dir.path().join("x.csv")).unwrap();
        let manifest = Manifest::new(vec![ManifestEntry {
            history_path: "x.csv".into(),
            label: Some(OverfitLabel::NonOverfit),
            meta: BTreeMap::new(),
        }]);
        let mpath = dir.path().join("manifest.json");
        manifest.save(&mpath).unwrap();
        let loaded = Manifest::load(&mpath).unwrap();
        let labelled = loaded.load_labelled().unwrap();
        assert_eq!(labelled.len(), 1);
        assert_eq!(labelled[0].0.id, "x");
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(
            values in prop::collection::vec(
                prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 2..20)
        ) {
            let n = values.len();
            let h = TrainingHistory::new(
                "p",
                LossCurve::from_values(values.clone()).unwrap(),
                LossCurve::from_values(values.iter().rev().cloned().collect()).unwrap(),
                None,
            ).unwrap();
            let mut buf = Vec::new();
            render_history_csv(&h, &mut buf).unwrap();
            let back = parse_history_csv(buf.as_slice(), "p").unwrap();
            for i in 0..n {
                prop_assert_eq!(back.train_loss.values()[i].to_bits(), values[i].to_bits());
            }
        }
    }
}
