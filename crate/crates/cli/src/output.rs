//! CSV and JSON emission with provenance columns.
//!
//! Every CSV table carries the config hash and seed in its two leading
//! columns; floats print through Rust's shortest-roundtrip formatter, so
//! outputs are byte-stable across runs and worker counts. Quoting follows
//! RFC 4180 (fields containing commas, quotes, or newlines are quoted and
//! inner quotes doubled), though the emitted tables are numeric in practice.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub struct CsvWriter {
    out: BufWriter<File>,
    provenance: (String, String),
}

pub fn quote_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') || s.contains('\r') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl CsvWriter {
    pub fn create(
        path: &Path,
        config_hash: u64,
        seed: u64,
        columns: &[&str],
    ) -> std::io::Result<CsvWriter> {
        let file = File::create(path)?;
        let mut w = CsvWriter {
            out: BufWriter::new(file),
            provenance: (format!("{config_hash:016x}"), format!("{seed}")),
        };
        let mut header: Vec<String> = vec!["config_hash".into(), "seed".into()];
        header.extend(columns.iter().map(|c| quote_field(c)));
        writeln!(w.out, "{}", header.join(","))?;
        Ok(w)
    }

    pub fn row(&mut self, fields: &[String]) -> std::io::Result<()> {
        let mut cols = vec![self.provenance.0.clone(), self.provenance.1.clone()];
        cols.extend(fields.iter().map(|f| quote_field(f)));
        writeln!(self.out, "{}", cols.join(","))
    }

    pub fn finish(mut self) -> std::io::Result<()> {
        self.out.flush()
    }
}

/// Shorthand for building a row of display-formatted fields.
#[macro_export]
macro_rules! csv_row {
    ($($v:expr),* $(,)?) => {
        vec![$(format!("{}", $v)),*]
    };
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()
}

pub fn stage_json_path(out_dir: &Path, stage: &str) -> PathBuf {
    out_dir.join(format!("{stage}.json"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quoting() {
        assert_eq!(quote_field("plain"), "plain");
        assert_eq!(quote_field("a,b"), "\"a,b\"");
        assert_eq!(quote_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }
}
