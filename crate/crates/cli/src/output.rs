//! Output files: atomic writes and run manifests.

use std::path::{Path, PathBuf};

use meshop::{Error, Result};

use crate::config::RunConfig;

/// Writes `contents` to a temporary sibling of `path`, then renames it over
/// `path`. Readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("output path {} has no file name", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = dir.join(tmp_name);
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })?;
    Ok(())
}

/// Run manifest: the command, the resolved configuration and the outputs.
///
/// Serialized as TOML with `command` first and the configuration under
/// `[config]`, followed by command-specific sections.
pub struct Manifest {
    table: toml::Table,
}

impl Manifest {
    pub fn new(command: &str, cfg: &RunConfig) -> Self {
        let mut table = toml::Table::new();
        table.insert("command".into(), command.into());
        let config = toml::Table::try_from(cfg).expect("run config serializes");
        table.insert("config".into(), config.into());
        Self { table }
    }

    pub fn set(&mut self, key: &str, value: impl Into<toml::Value>) {
        self.table.insert(key.into(), value.into());
    }

    /// Records an output file relative to `base` with its row count.
    pub fn output(&mut self, base: &Path, path: &Path, rows: usize) {
        let outputs = self
            .table
            .entry("outputs")
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .expect("outputs is a table");
        let rel = path.strip_prefix(base).unwrap_or(path).to_string_lossy().into_owned();
        let mut entry = toml::Table::new();
        entry.insert("rows".into(), (rows as i64).into());
        outputs.insert(rel, entry.into());
    }

    pub fn render(&self) -> String {
        toml::to_string(&self.table).expect("manifest serializes")
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.toml");
        write_atomic(&path, self.render().as_bytes())?;
        Ok(path)
    }
}

/// A slice of floats as a TOML array.
pub fn float_array(values: &[f64]) -> toml::Value {
    toml::Value::Array(values.iter().map(|&v| v.into()).collect())
}

/// Data rows of a delimited text file with a header row.
pub fn data_rows(text: &str) -> usize {
    text.lines().count().saturating_sub(1)
}
