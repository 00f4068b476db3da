//! Per-user and per-item raw features.
//!
//! File layout: a header row `id,<col>,...` then one row per entity. Columns
//! named `name:vocab` are categorical indices into a vocabulary of that
//! size; any other column is a dense real feature. A table is either all
//! dense or all categorical.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;

use super::records::InteractionRecord;
use crate::error::{Error, Result};
use crate::models::{FeatureEncoder, FeatureInput};
use crate::numcore::Example;

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureLayout {
    Dense { dim: usize },
    Categorical { fields: Vec<(String, usize)> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub layout: FeatureLayout,
    pub rows: BTreeMap<u64, FeatureInput>,
}

impl FeatureTable {
    /// Dense table; every row must have the same length.
    pub fn dense(rows: BTreeMap<u64, FeatureInput>) -> Result<Self> {
        let dim = match rows.values().next() {
            Some(FeatureInput::Dense(v)) => v.len(),
            Some(FeatureInput::Categorical(_)) => return Err(Error::Config("dense table given categorical rows".into())),
            None => 0,
        };
        for (id, row) in &rows {
            match row {
                FeatureInput::Dense(v) if v.len() == dim => {}
                FeatureInput::Dense(v) => return Err(Error::shape(format!("features of {id}"), dim, v.len())),
                FeatureInput::Categorical(_) => return Err(Error::Config("dense table given categorical rows".into())),
            }
        }
        Ok(Self {
            layout: FeatureLayout::Dense { dim },
            rows,
        })
    }

    pub fn categorical(fields: Vec<(String, usize)>, rows: BTreeMap<u64, FeatureInput>) -> Result<Self> {
        for (id, row) in &rows {
            let FeatureInput::Categorical(idx) = row else {
                return Err(Error::Config("categorical table given dense rows".into()));
            };
            if idx.len() != fields.len() {
                return Err(Error::shape(format!("features of {id}"), fields.len(), idx.len()));
            }
            for (&k, (name, vocab)) in idx.iter().zip(&fields) {
                if k >= *vocab {
                    return Err(Error::OutOfVocabulary {
                        field: name.clone(),
                        index: k,
                        vocab: *vocab,
                    });
                }
            }
        }
        Ok(Self {
            layout: FeatureLayout::Categorical { fields },
            rows,
        })
    }

    /// Encoder matching this table: pass-through for dense features,
    /// freshly initialised embeddings of width `embedding_dim` otherwise.
    pub fn encoder<R: Rng + ?Sized>(&self, embedding_dim: usize, rng: &mut R) -> FeatureEncoder {
        match &self.layout {
            FeatureLayout::Dense { dim } => FeatureEncoder::pretrained(*dim),
            FeatureLayout::Categorical { fields } => FeatureEncoder::categorical(fields, embedding_dim, rng),
        }
    }

    pub fn get(&self, id: u64, kind: &'static str) -> Result<&FeatureInput> {
        self.rows.get(&id).ok_or_else(|| Error::Unknown { kind, id: id.to_string() })
    }
}

/// User and item features of one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStore {
    pub users: FeatureTable,
    pub items: FeatureTable,
}

impl FeatureStore {
    pub fn user(&self, id: u64) -> Result<&FeatureInput> {
        self.users.get(id, "user")
    }

    pub fn item(&self, id: u64) -> Result<&FeatureInput> {
        self.items.get(id, "item")
    }

    pub fn example(&self, r: &InteractionRecord) -> Result<Example<'_>> {
        Ok(Example {
            user: self.user(r.user_id)?,
            item: self.item(r.item_id)?,
            label: r.label,
        })
    }

    pub fn examples<'a, I>(&self, records: I) -> Result<Vec<Example<'_>>>
    where
        I: IntoIterator<Item = &'a InteractionRecord>,
    {
        records.into_iter().map(|r| self.example(r)).collect()
    }
}

fn parse_vocab(col: &str) -> Option<(String, usize)> {
    let (name, vocab) = col.rsplit_once(':')?;
    Some((name.to_string(), vocab.parse().ok()?))
}

pub fn read_features<R: Read>(reader: R, path: &Path) -> Result<FeatureTable> {
    let load_err = |line: u64, message: String| Error::Load {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| load_err(1, e.to_string()))?.clone();
    if headers.get(0) != Some("id") {
        return Err(load_err(1, "first column must be `id`".into()));
    }
    let cols: Vec<&str> = headers.iter().skip(1).collect();
    let vocab: Vec<Option<(String, usize)>> = cols.iter().map(|c| parse_vocab(c)).collect();
    let categorical = vocab.iter().any(Option::is_some);
    if categorical && vocab.iter().any(Option::is_none) {
        return Err(load_err(1, "mixing dense and categorical columns".into()));
    }
    let mut rows = BTreeMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| load_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line());
        let id: u64 = row[0].parse().map_err(|_| load_err(line, format!("unparsable id `{}`", &row[0])))?;
        let values = row.iter().skip(1);
        let input = if categorical {
            FeatureInput::Categorical(
                values
                    .map(|v| v.parse::<usize>().map_err(|_| load_err(line, format!("unparsable index `{v}`"))))
                    .collect::<Result<_>>()?,
            )
        } else {
            FeatureInput::Dense(
                values
                    .map(|v| {
                        v.parse::<f64>()
                            .ok()
                            .filter(|x| x.is_finite())
                            .ok_or_else(|| load_err(line, format!("unparsable value `{v}`")))
                    })
                    .collect::<Result<_>>()?,
            )
        };
        if rows.insert(id, input).is_some() {
            return Err(load_err(line, format!("duplicate id {id}")));
        }
    }
    if categorical {
        FeatureTable::categorical(vocab.into_iter().flatten().collect(), rows)
    } else {
        FeatureTable::dense(rows).map(|mut t| {
            t.layout = FeatureLayout::Dense { dim: cols.len() };
            t
        })
    }
}

pub fn load_features(path: &Path) -> Result<FeatureTable> {
    read_features(std::fs::File::open(path)?, path)
}

pub fn write_features<W: Write>(mut w: W, table: &FeatureTable) -> Result<()> {
    write!(w, "id")?;
    match &table.layout {
        FeatureLayout::Dense { dim } => {
            for k in 0..*dim {
                write!(w, ",f{k}")?;
            }
        }
        FeatureLayout::Categorical { fields } => {
            for (name, vocab) in fields {
                write!(w, ",{name}:{vocab}")?;
            }
        }
    }
    writeln!(w)?;
    for (id, row) in &table.rows {
        write!(w, "{id}")?;
        match row {
            FeatureInput::Dense(v) => {
                for x in v {
                    write!(w, ",{x:?}")?;
                }
            }
            FeatureInput::Categorical(v) => {
                for x in v {
                    write!(w, ",{x}")?;
                }
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<FeatureTable> {
        read_features(text.as_bytes(), Path::new("f.csv"))
    }

    #[test]
    fn dense_round_trip() {
        let t = parse("id,f0,f1\n3,0.5,-1\n1,0.1,2e-3\n").unwrap();
        assert_eq!(t.layout, FeatureLayout::Dense { dim: 2 });
        let mut buf = Vec::new();
        write_features(&mut buf, &t).unwrap();
        assert_eq!(parse(std::str::from_utf8(&buf).unwrap()).unwrap(), t);
    }

    #[test]
    fn categorical_columns_carry_vocab() {
        let t = parse("id,gender:2,age:7\n1,0,6\n2,1,0\n").unwrap();
        assert_eq!(t.layout, FeatureLayout::Categorical { fields: vec![("gender".into(), 2), ("age".into(), 7)] });
        assert_eq!(t.rows[&1], FeatureInput::Categorical(vec![0, 6]));
        let mut rng = crate::rng::seeded(0);
        assert_eq!(t.encoder(4, &mut rng).output_dim(), 8);
    }

    #[test]
    fn out_of_vocabulary_rejected() {
        assert!(matches!(parse("id,gender:2\n1,2\n"), Err(Error::OutOfVocabulary { index: 2, .. })));
    }

    #[test]
    fn mixed_columns_rejected() {
        assert!(parse("id,gender:2,f0\n1,0,0.5\n").is_err());
    }

    #[test]
    fn unknown_ids_are_named() {
        let users = parse("id,f0\n1,0.5\n").unwrap();
        let store = FeatureStore { users: users.clone(), items: users };
        let err = store.example(&InteractionRecord::new(1, 9, 0, 1.0)).unwrap_err();
        assert_eq!(err.to_string(), "unknown item `9`");
    }
}
