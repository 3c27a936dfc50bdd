//! Result CSV files with a `#`-prefixed metadata header.
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! reproduces every value exactly. Nothing time- or host-dependent is
//! written, which keeps files from identical runs byte-identical.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::seeds;

/// Statement of how expectations are estimated, echoed into every file.
pub const EXPECTATION_CONVENTION: &str =
    "data distribution = uniform over labeled vertices; test loss = exact mean over held-out vertices; \
     E_A = mean over trials with per-trial init and order seeds";

/// A row type with a fixed column order matching its field order.
pub trait CsvRecord: Serialize + DeserializeOwned {
    const COLUMNS: &'static [&'static str];
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Metadata {
    entries: Vec<(String, String)>,
}

impl Metadata {
    /// Standard header: master seed, generator, seed rule, config echo and
    /// the expectation convention.
    pub fn standard<C: Serialize>(master_seed: u64, config: &C) -> Result<Self> {
        let config = serde_json::to_string(config).map_err(|e| Error::Schema(e.to_string()))?;
        let mut m = Self::default();
        m.push("master_seed", master_seed.to_string());
        m.push("generator", seeds::GENERATOR_NAME);
        m.push("seed_rule", seeds::SEED_RULE);
        m.push("config", config);
        m.push("expectation", EXPECTATION_CONVENTION);
        Ok(m)
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Into<String>) {
        let value: String = value.into();
        debug_assert!(!value.contains('\n'));
        self.entries.push((key.into(), value));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    fn render(&self, out: &mut String) {
        for (k, v) in &self.entries {
            out.push_str("# ");
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
    }

    fn parse(text: &str) -> Self {
        let mut m = Self::default();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            let body = line.trim_start_matches('#').trim_start();
            if let Some((k, v)) = body.split_once('=') {
                m.push(k.trim(), v);
            }
        }
        m
    }
}

/// Renders records (header row always present) after the metadata block.
pub fn render_csv<R: CsvRecord>(meta: &Metadata, records: &[R]) -> Result<String> {
    let mut out = String::new();
    meta.render(&mut out);
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(R::COLUMNS)?;
    for r in records {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    out.push_str(std::str::from_utf8(&bytes).expect("csv output is utf-8"));
    Ok(out)
}

pub fn export_csv<R: CsvRecord>(path: impl AsRef<Path>, meta: &Metadata, records: &[R]) -> Result<()> {
    fs::write(path, render_csv(meta, records)?)?;
    Ok(())
}

pub fn parse_csv<R: CsvRecord>(text: &str) -> Result<(Metadata, Vec<R>)> {
    let meta = Metadata::parse(text);
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = r.headers()?.clone();
    if headers.iter().ne(R::COLUMNS.iter().copied()) {
        return Err(Error::Schema(format!(
            "unexpected CSV columns `{}`, expected `{}`",
            headers.iter().collect::<Vec<_>>().join(","),
            R::COLUMNS.join(",")
        )));
    }
    let records = r.deserialize().collect::<std::result::Result<Vec<R>, _>>()?;
    Ok((meta, records))
}

pub fn import_csv<R: CsvRecord>(path: impl AsRef<Path>) -> Result<(Metadata, Vec<R>)> {
    parse_csv(&fs::read_to_string(path)?)
}

/// Reads only the metadata block of a results file.
pub fn read_metadata(path: impl AsRef<Path>) -> Result<Metadata> {
    Ok(Metadata::parse(&fs::read_to_string(path)?))
}

/// gnuplot commands plotting the given results files. `gap_files` hold gap
/// records; `trace_files` hold epoch traces.
pub fn plot_script(gap_files: &[(&str, &str)], trace_files: &[(&str, &str)]) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\nset datafile commentschars '#'\nset key autotitle columnhead\n");
    s.push_str("set terminal pngcairo size 900,600\n");
    for (file, title) in gap_files {
        let stem = file.trim_end_matches(".csv");
        s.push_str(&format!(
            "set output '{stem}.png'\nset title '{title}'\nset xlabel 'n'\nset ylabel 'gap'\n\
             plot '{file}' using 1:6:7 with yerrorlines title 'gap', '' using 1:11 with lines title 'bound'\n"
        ));
    }
    for (file, title) in trace_files {
        let stem = file.trim_end_matches(".csv");
        s.push_str(&format!(
            "set output '{stem}.png'\nset title '{title}'\nset xlabel 'epoch'\nset ylabel 'loss'\n\
             plot '{file}' using 1:2 with lines title 'train', '' using 1:3 with lines title 'test'\n"
        ));
    }
    s
}
