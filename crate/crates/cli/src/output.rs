//! Output directory helpers.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(CliError::io(root))?;
        Ok(OutDir { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn exists(&self, name: &str) -> bool {
        self.path(name).is_file()
    }

    /// Pretty JSON with a trailing newline. Written to a temporary file
    /// first so a crash never leaves a truncated document behind.
    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    pub fn write_text(&self, name: &str, text: &str) -> CliResult<()> {
        let path = self.path(name);
        let tmp = self.path(&format!(".{name}.tmp"));
        let mut f = fs::File::create(&tmp).map_err(CliError::io(&tmp))?;
        f.write_all(text.as_bytes()).map_err(CliError::io(&tmp))?;
        drop(f);
        fs::rename(&tmp, &path).map_err(CliError::io(&path))
    }

    pub fn read_json(&self, name: &str) -> CliResult<Value> {
        let path = self.path(name);
        let text = fs::read_to_string(&path).map_err(CliError::io(&path))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn csv_writer(&self, name: &str) -> CliResult<csv::Writer<fs::File>> {
        let path = self.path(name);
        let f = fs::File::create(&path).map_err(CliError::io(&path))?;
        Ok(csv::Writer::from_writer(f))
    }
}
