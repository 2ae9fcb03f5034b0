//! LIBSVM / SVMlight text format, densified.
//!
//! ```text
//! +1 1:0.5 3:-2   # comment
//! -1 2:1
//! ```
//!
//! Indices are 1-based and strictly increasing within a line; absent
//! features are zero. Binary label sets are mapped onto {-1, +1}: the
//! smaller raw label becomes -1 and the larger +1, which keeps `{-1, +1}`
//! as is and maps `{0, 1}` to `{-1, +1}`.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

use super::Dataset;

struct Row {
    label: f64,
    features: Vec<(usize, f64)>,
}

fn parse_line(line: &str, line_no: usize) -> Result<Option<Row>> {
    let content = match line.find('#') {
        Some(pos) => &line[..pos],
        None => line,
    };
    let mut tokens = content.split_whitespace();
    let Some(label_tok) = tokens.next() else {
        return Ok(None);
    };
    let err = |msg: String| Error::Parse { line: line_no, msg };
    let label = parse_real(label_tok).ok_or_else(|| err(format!("bad label {label_tok:?}")))?;

    let mut features = Vec::new();
    let mut last = 0usize;
    for tok in tokens {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| err(format!("expected <index>:<value>, got {tok:?}")))?;
        let idx: usize = idx
            .parse()
            .map_err(|_| err(format!("bad feature index {idx:?}")))?;
        if idx < 1 {
            return Err(err("feature indices are 1-based".into()));
        }
        if idx <= last {
            return Err(err(format!("feature index {idx} does not increase (previous {last})")));
        }
        let val = parse_real(val).ok_or_else(|| err(format!("bad feature value {val:?}")))?;
        last = idx;
        features.push((idx, val));
    }
    Ok(Some(Row { label, features }))
}

fn parse_real(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses a LIBSVM stream into a dense dataset with `d = max(max index, d_hint)`.
pub fn parse_libsvm<R: BufRead>(reader: R, name: &str, d_hint: Option<usize>) -> Result<Dataset> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        if let Some(row) = parse_line(&line?, i + 1)? {
            rows.push(row);
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mut distinct: Vec<f64> = rows.iter().map(|r| r.label).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup_by(|a, b| a == b);
    let map_label = match distinct.as_slice() {
        [only] => {
            let v = if *only > 0.0 { 1.0 } else { -1.0 };
            Box::new(move |_: f64| v) as Box<dyn Fn(f64) -> f64>
        }
        [lo, _hi] => {
            let lo = *lo;
            Box::new(move |y: f64| if y == lo { -1.0 } else { 1.0 })
        }
        more => return Err(Error::TooManyLabels(more.len())),
    };

    let max_idx = rows
        .iter()
        .filter_map(|r| r.features.last().map(|f| f.0))
        .max()
        .unwrap_or(0);
    let d = max_idx.max(d_hint.unwrap_or(0));
    if d == 0 {
        return Err(Error::Precondition("dataset has no features".into()));
    }

    let mut features = vec![0.0; rows.len() * d];
    let mut labels = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        for &(idx, val) in &row.features {
            features[i * d + idx - 1] = val;
        }
        labels.push(map_label(row.label));
    }
    Dataset::new(name, d, features, labels)
}

/// Writes `ds` in LIBSVM format, omitting zero features. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_libsvm<W: Write>(ds: &Dataset, mut out: W) -> Result<()> {
    for (x, y) in ds.rows() {
        write!(out, "{}", if y > 0.0 { "+1" } else { "-1" })?;
        for (k, &v) in x.iter().enumerate() {
            if v != 0.0 {
                write!(out, " {}:{:?}", k + 1, v)?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Dataset> {
        parse_libsvm(text.as_bytes(), "t", None)
    }

    #[test]
    fn single_line_densified() {
        let ds = parse("+1 1:0.5 3:-2\n").unwrap();
        assert_eq!((ds.n(), ds.d()), (1, 3));
        assert_eq!(ds.row(0), &[0.5, 0.0, -2.0]);
        assert_eq!(ds.labels(), &[1.0]);
    }

    #[test]
    fn zero_one_labels_map_to_signs() {
        let ds = parse("0 1:1\n1 1:2\n").unwrap();
        assert_eq!(ds.labels(), &[-1.0, 1.0]);
    }

    #[test]
    fn other_binary_labels_ordered() {
        let ds = parse("4 1:1\n2 1:2\n4 1:3\n").unwrap();
        assert_eq!(ds.labels(), &[1.0, -1.0, 1.0]);
    }

    #[test]
    fn comments_and_blank_lines() {
        let ds = parse("# header\n\n-1 2:1 # trailing\n+1 1:3\n").unwrap();
        assert_eq!(ds.n(), 2);
        assert_eq!(ds.row(0), &[0.0, 1.0]);
    }

    #[test]
    fn d_hint_pads() {
        let ds = parse_libsvm("+1 1:1\n".as_bytes(), "t", Some(4)).unwrap();
        assert_eq!(ds.row(0), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn malformed_lines_report_line_number() {
        for (text, line) in [
            ("+1 1:1\n-1 2:x\n", 2),
            ("+1 0:1\n", 1),
            ("+1 2:1 2:3\n", 1),
            ("+1 3:1 2:3\n", 1),
            ("+1 1:1\nabc 1:1\n", 2),
            ("+1 1:1\n-1 5\n", 2),
            ("+1 1:nan\n", 1),
        ] {
            match parse(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?} -> {other:?}"),
            }
        }
    }

    #[test]
    fn multiclass_rejected() {
        assert!(matches!(parse("1 1:1\n2 1:1\n3 1:1\n"), Err(Error::TooManyLabels(3))));
    }

    #[test]
    fn write_then_parse() {
        let ds = parse("+1 1:0.1 3:-2.5e-7\n-1 2:3\n").unwrap();
        let mut buf = Vec::new();
        write_libsvm(&ds, &mut buf).unwrap();
        let back = parse_libsvm(buf.as_slice(), "t", Some(ds.d())).unwrap();
        assert_eq!(back, ds);
    }
}
