use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// One observed (user, item, shop) event.
///
/// `label` is a binary purchase indicator or a 1–5 rating depending on the
/// dataset. `genre_l3` is only needed by genre-aware negative sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionRecord {
    pub user_id: u64,
    pub item_id: u64,
    pub shop_id: u64,
    pub label: f64,
    pub timestamp: Option<i64>,
    pub genre_l3: Option<u64>,
}

impl InteractionRecord {
    pub fn new(user_id: u64, item_id: u64, shop_id: u64, label: f64) -> Self {
        Self {
            user_id,
            item_id,
            shop_id,
            label,
            timestamp: None,
            genre_l3: None,
        }
    }
}

/// Delimited-text layout of an interaction file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FormatSpec {
    pub delimiter: u8,
}

impl Default for FormatSpec {
    fn default() -> Self {
        Self { delimiter: b',' }
    }
}

pub const REQUIRED_COLUMNS: [&str; 4] = ["user_id", "item_id", "shop_id", "label"];

/// Reads an interaction file with a header row.
///
/// Required columns are `user_id,item_id,shop_id,label`; `timestamp` and
/// `genre_l3` are optional and may be left empty per row. Rows are validated
/// and the first offending line is reported.
pub fn load_interactions(path: &Path, format: FormatSpec) -> Result<Vec<InteractionRecord>> {
    let file = std::fs::File::open(path)?;
    read_interactions(file, path, format)
}

pub fn read_interactions<R: Read>(reader: R, path: &Path, format: FormatSpec) -> Result<Vec<InteractionRecord>> {
    let load_err = |line: u64, message: String| Error::Load {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(format.delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| load_err(1, e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let mut idx = [0usize; 4];
    for (slot, name) in idx.iter_mut().zip(REQUIRED_COLUMNS) {
        *slot = col(name).ok_or_else(|| load_err(1, format!("missing column `{name}`")))?;
    }
    let ts_col = col("timestamp");
    let genre_col = col("genre_l3");

    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            load_err(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| row.get(i).unwrap_or("");
        let id = |i: usize, name: &str| -> Result<u64> {
            field(i)
                .parse::<u64>()
                .map_err(|_| load_err(line, format!("unparsable {name} `{}`", field(i))))
        };
        let user_id = id(idx[0], "user_id")?;
        let item_id = id(idx[1], "item_id")?;
        let shop_id = id(idx[2], "shop_id")?;
        let label: f64 = field(idx[3])
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| load_err(line, format!("unparsable label `{}`", field(idx[3]))))?;
        let timestamp = match ts_col.map(field) {
            None | Some("") => None,
            Some(s) => Some(s.parse::<i64>().map_err(|_| load_err(line, format!("unparsable timestamp `{s}`")))?),
        };
        let genre_l3 = match genre_col.map(field) {
            None | Some("") => None,
            Some(s) => Some(s.parse::<u64>().map_err(|_| load_err(line, format!("unparsable genre_l3 `{s}`")))?),
        };
        if !seen.insert((user_id, item_id, shop_id, timestamp)) {
            return Err(load_err(line, format!("duplicate interaction ({user_id}, {item_id}, {shop_id}, {timestamp:?})")));
        }
        out.push(InteractionRecord {
            user_id,
            item_id,
            shop_id,
            label,
            timestamp,
            genre_l3,
        });
    }
    Ok(out)
}

/// Writes records with the full six-column header.
pub fn write_interactions<W: Write>(writer: W, records: &[InteractionRecord], format: FormatSpec) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(format.delimiter).from_writer(writer);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["user_id", "item_id", "shop_id", "label", "timestamp", "genre_l3"])
        .map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.user_id.to_string(),
            r.item_id.to_string(),
            r.shop_id.to_string(),
            r.label.to_string(),
            r.timestamp.map(|t| t.to_string()).unwrap_or_default(),
            r.genre_l3.map(|g| g.to_string()).unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Vec<InteractionRecord>> {
        read_interactions(text.as_bytes(), Path::new("mem.csv"), FormatSpec::default())
    }

    #[test]
    fn three_rows() {
        let r = parse("user_id,item_id,shop_id,label\n1,2,3,1\n4,5,3,0\n6,7,8,1\n").unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r[1], InteractionRecord::new(4, 5, 3, 0.0));
    }

    #[test]
    fn bad_label_names_line_two() {
        let err = parse("user_id,item_id,shop_id,label\n1,2,3,abc\n").unwrap_err();
        match err {
            Error::Load { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("label"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn missing_column_is_reported() {
        let err = parse("user_id,item_id,label\n1,2,1\n").unwrap_err();
        assert!(err.to_string().contains("shop_id"), "{err}");
    }

    #[test]
    fn duplicates_are_rejected() {
        let err = parse("user_id,item_id,shop_id,label,timestamp\n1,2,3,1,5\n1,2,3,0,5\n").unwrap_err();
        assert!(matches!(err, Error::Load { line: 3, .. }), "{err}");
        // same pair at a different time is fine
        assert_eq!(parse("user_id,item_id,shop_id,label,timestamp\n1,2,3,1,5\n1,2,3,0,6\n").unwrap().len(), 2);
    }

    #[test]
    fn optional_columns_and_custom_delimiter() {
        let text = "user_id\titem_id\tshop_id\tlabel\ttimestamp\tgenre_l3\n1\t2\t3\t4.5\t\t7\n";
        let r = read_interactions(text.as_bytes(), Path::new("t.tsv"), FormatSpec { delimiter: b'\t' }).unwrap();
        assert_eq!(r[0].label, 4.5);
        assert_eq!(r[0].timestamp, None);
        assert_eq!(r[0].genre_l3, Some(7));
    }

    #[test]
    fn movielens_shaped_export_keeps_every_line() {
        // user, movie, rating, genre-as-shop
        let mut text = String::from("user_id,item_id,shop_id,label,timestamp\n");
        let mut lines = 0;
        for u in 1..=20u64 {
            for m in 1..=7u64 {
                text.push_str(&format!("{u},{m},{},{},{}\n", m % 18, 1 + (u * m) % 5, 978300760 + u * 10 + m));
                lines += 1;
            }
        }
        assert_eq!(parse(&text).unwrap().len(), lines);
    }

    #[test]
    fn write_then_read_preserves_records() {
        let recs = vec![
            InteractionRecord {
                timestamp: Some(-3),
                genre_l3: Some(2),
                ..InteractionRecord::new(1, 2, 3, 1.0)
            },
            InteractionRecord::new(9, 8, 7, 3.5),
        ];
        let mut buf = Vec::new();
        write_interactions(&mut buf, &recs, FormatSpec::default()).unwrap();
        assert_eq!(parse(std::str::from_utf8(&buf).unwrap()).unwrap(), recs);
    }
}
