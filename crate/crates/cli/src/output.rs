//! Writers that stamp every artifact with the toolkit version and run configuration.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use phasecorr::Result;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::{Format, RunConfig, TOOLKIT};

pub const OUTPUT_SCHEMA: u32 = 1;

pub struct Output<'a> {
    run: &'a RunConfig,
}

impl<'a> Output<'a> {
    pub fn new(run: &'a RunConfig) -> Result<Self> {
        std::fs::create_dir_all(&run.out)?;
        Ok(Output { run })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.run.out.join(name)
    }

    fn header(&self) -> Result<Map<String, Value>> {
        let mut doc = Map::new();
        doc.insert("schema_version".into(), OUTPUT_SCHEMA.into());
        doc.insert("toolkit".into(), TOOLKIT.into());
        doc.insert("run".into(), serde_json::to_value(self.run)?);
        Ok(doc)
    }

    /// Writes `payload`'s fields after the standard header into `name`.
    pub fn json<T: Serialize>(&self, name: &str, payload: &T) -> Result<PathBuf> {
        let mut doc = self.header()?;
        match serde_json::to_value(payload)? {
            Value::Object(fields) => doc.extend(fields),
            other => {
                doc.insert("data".into(), other);
            }
        }
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(&Value::Object(doc))?;
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }

    /// Adds the standard header fields to an existing JSON file.
    pub fn stamp_json(&self, path: &Path) -> Result<()> {
        let existing: Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let mut doc = match existing {
            Value::Object(fields) => fields,
            _ => Map::new(),
        };
        for (k, v) in self.header()? {
            if k != "schema_version" || !doc.contains_key(&k) {
                doc.insert(k, v);
            }
        }
        let mut text = serde_json::to_string_pretty(&Value::Object(doc))?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    /// CSV whose first line is a `#` comment carrying the run configuration.
    pub fn csv<F>(&self, name: &str, body: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut dyn Write) -> Result<()>,
    {
        let path = self.path(name);
        let mut w = BufWriter::new(File::create(&path)?);
        writeln!(w, "# {TOOLKIT} run={}", serde_json::to_string(self.run)?)?;
        body(&mut w)?;
        w.flush()?;
        Ok(path)
    }

    /// A table in the configured format: CSV through `csv_body` or a JSON
    /// document holding `rows`.
    pub fn table<T, F>(&self, stem: &str, rows: &T, csv_body: F) -> Result<PathBuf>
    where
        T: Serialize,
        F: FnOnce(&mut dyn Write) -> Result<()>,
    {
        let name = format!("{stem}.{}", self.run.format.extension());
        match self.run.format {
            Format::Csv => self.csv(&name, csv_body),
            Format::Json => self.json(&name, &serde_json::json!({ "rows": rows })),
        }
    }
}
