use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Fixed-precision number formatting shared by every table.
pub fn num(x: f64) -> String {
    format!("{x:.12e}")
}

/// Tab-separated table with a header row.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Self {
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn to_tsv(&self) -> String {
        let mut out = self.headers.join("\t");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join("\t"));
            out.push('\n');
        }
        out
    }
}

/// Named tables plus a JSON mirror, written as `<name>.tsv` and `<stem>.json`.
pub struct Report<T: Serialize> {
    pub stem: &'static str,
    pub tables: Vec<(&'static str, Table)>,
    pub document: T,
}

impl<T: Serialize> Report<T> {
    fn targets(&self, dir: &Path) -> Vec<PathBuf> {
        let mut files: Vec<PathBuf> = self
            .tables
            .iter()
            .map(|(name, _)| dir.join(format!("{name}.tsv")))
            .collect();
        files.push(dir.join(format!("{}.json", self.stem)));
        files
    }

    /// Prints every table to stdout and, with `out`, writes the files.
    pub fn emit(&self, out: Option<&Path>, overwrite: bool) -> Result<(), CliError> {
        let json = serde_json::to_string_pretty(&self.document)
            .map_err(|e| CliError::Io(e.to_string()))?
            + "\n";
        if let Some(dir) = out {
            if !overwrite {
                if let Some(existing) = self.targets(dir).into_iter().find(|p| p.exists()) {
                    return Err(CliError::Input(format!(
                        "{} exists (use --overwrite)",
                        existing.display()
                    )));
                }
            }
            fs::create_dir_all(dir).map_err(CliError::io)?;
            for (name, table) in &self.tables {
                fs::write(dir.join(format!("{name}.tsv")), table.to_tsv()).map_err(CliError::io)?;
            }
            fs::write(dir.join(format!("{}.json", self.stem)), &json).map_err(CliError::io)?;
        }
        for (i, (name, table)) in self.tables.iter().enumerate() {
            if i > 0 {
                println!();
            }
            println!("# {name}");
            print!("{}", table.to_tsv());
        }
        Ok(())
    }
}
