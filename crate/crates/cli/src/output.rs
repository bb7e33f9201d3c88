//! Deterministic CSV tables and run manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;
use crate::Failure;

/// Scientific notation with 17 significant digits, so values round-trip exactly.
pub fn num(x: f64) -> String {
    if x == 0.0 {
        // keeps -0 and 0 identical
        return format!("{:.16e}", 0.0);
    }
    format!("{x:.16e}")
}

pub fn opt(x: Option<f64>) -> String {
    x.filter(|v| v.is_finite()).map(num).unwrap_or_default()
}

pub struct Table {
    pub name: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn write(&self, path: &Path) -> Result<(), Failure> {
        let io = |e: csv::Error| Failure::Io(format!("{}: {e}", path.display()));
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path).map_err(io)?;
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row).map_err(io)?;
        }
        w.flush().map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
    }
}

pub fn join_flags(flags: &[String]) -> String {
    flags.join(";")
}

/// Everything a subcommand produced, written in one place.
pub struct Artifacts {
    pub command: String,
    pub tables: Vec<Table>,
    pub plots: Vec<(String, String)>,
    pub summary: Value,
    /// Flags that make a run fail under `--strict`.
    pub fatal: Vec<String>,
}

impl Artifacts {
    pub fn new(command: &str) -> Self {
        Artifacts {
            command: command.to_string(),
            tables: Vec::new(),
            plots: Vec::new(),
            summary: Value::Null,
            fatal: Vec::new(),
        }
    }

    pub fn note_flags<'a>(&mut self, what: impl Fn() -> String, flags: impl IntoIterator<Item = &'a String>) {
        for f in flags {
            if is_fatal(f) {
                self.fatal.push(format!("{}: {f}", what()));
            }
        }
    }
}

pub fn is_fatal(flag: &str) -> bool {
    flag == "ambiguous" || flag == ratchet_core::experiments::FLAG_FAILED
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    rng: &'static str,
    config: &'a RunConfig,
    cell: ratchet_core::CellSpec,
    outputs: Vec<String>,
    fatal_flags: usize,
    summary: &'a Value,
}

/// Writes tables, plots and the manifest; returns the written paths.
pub fn write_all(config: &RunConfig, art: &Artifacts) -> Result<Vec<PathBuf>, Failure> {
    let dir = &config.output.dir;
    fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    let mut written = Vec::new();
    let mut names = Vec::new();
    for t in &art.tables {
        let name = format!("{}.csv", t.name);
        let path = dir.join(&name);
        t.write(&path)?;
        names.push(name);
        written.push(path);
    }
    for (stem, svg) in &art.plots {
        let name = format!("{stem}.svg");
        let path = dir.join(&name);
        fs::write(&path, svg).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        names.push(name);
        written.push(path);
    }
    let manifest = Manifest {
        tool: "ratchet",
        version: env!("CARGO_PKG_VERSION"),
        command: &art.command,
        seed: config.seed,
        rng: ratchet_core::experiments::RNG_ALGORITHM,
        config,
        cell: config.cell_spec(),
        outputs: names,
        fatal_flags: art.fatal.len(),
        summary: &art.summary,
    };
    let path = dir.join(format!("{}.manifest.json", art.command));
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::Io(e.to_string()))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [1.0 / 3.0, 1e-300, 6.02214076e23, -2.5e-7, f64::MIN_POSITIVE] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
        }
        assert_eq!(num(-0.0), num(0.0));
    }

    #[test]
    fn missing_values_are_empty() {
        assert_eq!(opt(None), "");
        assert_eq!(opt(Some(f64::NAN)), "");
    }
}
