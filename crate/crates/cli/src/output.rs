use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

/// Shortest decimal string that parses back to the same `f64`.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

/// `X_{i}_{s}_{a}` in agent-major order.
pub fn profile_columns(n: usize, z: usize, m: usize) -> Vec<String> {
    let mut cols = Vec::with_capacity(n * z * m);
    for i in 0..n {
        for s in 0..z {
            for a in 0..m {
                cols.push(format!("X_{i}_{s}_{a}"));
            }
        }
    }
    cols
}

/// CSV output preceded by a `#` config line.
pub struct Table {
    writer: csv::Writer<Box<dyn Write>>,
    path: PathBuf,
}

impl Table {
    /// Writes to `path`, or to stdout when `path` is `None`.
    pub fn create(path: Option<&Path>, header: &str, columns: &[String]) -> Result<Self> {
        let shown = path.map_or_else(|| PathBuf::from("<stdout>"), Path::to_path_buf);
        let io_err = |source| CliError::Output { path: shown.clone(), source };
        let mut sink: Box<dyn Write> = match path {
            Some(p) => Box::new(BufWriter::new(File::create(p).map_err(io_err)?)),
            None => Box::new(BufWriter::new(io::stdout())),
        };
        writeln!(sink, "{header}").map_err(io_err)?;
        let mut table = Table {
            writer: csv::Writer::from_writer(sink),
            path: shown,
        };
        table.row(columns)?;
        Ok(table)
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        self.writer.write_record(fields).map_err(|e| self.fail(e.into()))
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush().map_err(|e| CliError::Output {
            path: self.path.clone(),
            source: e,
        })
    }

    fn fail(&self, source: io::Error) -> CliError {
        CliError::Output {
            path: self.path.clone(),
            source,
        }
    }
}

/// `dir/name.csv` becomes `dir/name.<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}
