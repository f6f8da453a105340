//! CSV output: one `#` provenance line, a header row, then data rows.
//! Floats are written in Rust's shortest round-trip form.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::CliError;

pub struct Csv {
    text: String,
}

impl Csv {
    /// `extra` holds additional `key=value` pairs for the provenance line.
    pub fn new(command: &str, digest: &str, seed: Option<u64>, extra: &[(&str, String)], header: &[&str]) -> Self {
        let mut text = format!("# hhlab {} command={command} config-sha256={digest}", env!("CARGO_PKG_VERSION"));
        match seed {
            Some(s) => write!(text, " seed={s}").unwrap(),
            None => text.push_str(" seed=none"),
        }
        for (k, v) in extra {
            write!(text, " {k}={v}").unwrap();
        }
        text.push('\n');
        text.push_str(&header.join(","));
        text.push('\n');
        Self { text }
    }

    pub fn row(&mut self, fields: &[f64]) {
        let cells: Vec<String> = fields.iter().map(|x| format!("{x:?}")).collect();
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    /// A row of preformatted cells; see [`num`] and [`count`].
    pub fn cells(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    /// A row led by a text label.
    pub fn labeled_row(&mut self, label: &str, fields: &[f64]) {
        self.text.push_str(label);
        for x in fields {
            write!(self.text, ",{x:?}").unwrap();
        }
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    /// Writes to `path`, or to standard output when `path` is `None`.
    pub fn emit(&self, path: Option<&Path>) -> Result<(), CliError> {
        match path {
            Some(p) => std::fs::write(p, &self.text)
                .map_err(|e| CliError::Config(format!("cannot write {}: {e}", p.display()))),
            None => {
                let mut out = std::io::stdout().lock();
                match out.write_all(self.text.as_bytes()).and_then(|_| out.flush()) {
                    Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                        Err(CliError::Numerical(format!("stdout: {e}")))
                    }
                    _ => Ok(()),
                }
            }
        }
    }
}

pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn count(n: usize) -> String {
    n.to_string()
}
