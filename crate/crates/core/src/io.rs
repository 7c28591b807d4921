//! Tab-separated output files and their readers.
//!
//! Rows are sorted by key and probabilities carry six decimals, so identical runs
//! produce identical bytes. Fields escape backslash, tab, newline and carriage return.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::granularity::Reattribution;
use crate::model::{DataItem, ExtractorKey, SourceKey, Value};
use crate::single::{IterationStat, PairAccuracy, PairSource};

pub const SOURCES_FILE: &str = "sources.tsv";
pub const VALUES_FILE: &str = "values.tsv";
pub const EXTRACTIONS_FILE: &str = "extractions.tsv";
pub const EXTRACTORS_FILE: &str = "extractors.tsv";
pub const PAIR_SOURCES_FILE: &str = "pair_sources.tsv";
pub const ITERATIONS_FILE: &str = "iterations.log";
pub const REATTRIBUTION_FILE: &str = "reattribution.tsv";

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => out.push(other),
            None => out.push('\\'),
        }
    }
    out
}

pub fn prob(p: f64) -> String {
    format!("{p:.6}")
}

fn opt_prob(p: Option<f64>) -> String {
    p.map_or_else(|| "NA".to_string(), prob)
}

fn opt(s: &Option<String>) -> String {
    s.as_deref().map(escape).unwrap_or_default()
}

fn opt_bucket(b: Option<u32>) -> String {
    b.map(|b| b.to_string()).unwrap_or_default()
}

fn source_cols(w: &SourceKey) -> String {
    format!(
        "{}\t{}\t{}\t{}",
        escape(&w.website),
        opt(&w.predicate),
        opt(&w.webpage),
        opt_bucket(w.bucket)
    )
}

fn extractor_cols(e: &ExtractorKey) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{}",
        escape(&e.extractor),
        opt(&e.pattern),
        opt(&e.predicate),
        opt(&e.website),
        opt_bucket(e.bucket)
    )
}

fn triple_cols(d: &DataItem, v: &Value) -> String {
    format!("{}\t{}\t{}", escape(&d.subject), escape(&d.predicate), escape(v.as_str()))
}

const SOURCE_HEADER: &str = "website\tspredicate\twebpage\tbucket";
const EXTRACTOR_HEADER: &str = "extractor\tpattern\tepredicate\tewebsite\tebucket";
const TRIPLE_HEADER: &str = "subject\tpredicate\tobject";

#[derive(Debug, Clone, PartialEq)]
pub struct SourceRow {
    pub source: SourceKey,
    /// `None` for sources left out of fusion.
    pub accuracy: Option<f64>,
    pub supported_triples: usize,
    pub triples: usize,
}

pub fn sources_tsv(rows: &[SourceRow]) -> String {
    let mut rows: Vec<&SourceRow> = rows.iter().collect();
    rows.sort_by(|a, b| a.source.cmp(&b.source));
    let mut s = format!("{SOURCE_HEADER}\taccuracy\tsupported_triples\ttriples\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}",
            source_cols(&r.source),
            opt_prob(r.accuracy),
            r.supported_triples,
            r.triples
        );
    }
    s
}

/// Truth probability per candidate; `NA` where none was produced.
pub fn values_tsv(values: &BTreeMap<(DataItem, Value), Option<f64>>) -> String {
    let mut s = format!("{TRIPLE_HEADER}\tprobability\n");
    for ((d, v), p) in values {
        let _ = writeln!(s, "{}\t{}", triple_cols(d, v), opt_prob(*p));
    }
    s
}

/// Correctness probability per `(source, item, value)`.
pub fn extractions_tsv(triples: &BTreeMap<(SourceKey, DataItem, Value), f64>) -> String {
    let mut s = format!("{SOURCE_HEADER}\t{TRIPLE_HEADER}\tprobability\n");
    for ((w, d, v), p) in triples {
        let _ = writeln!(s, "{}\t{}\t{}", source_cols(w), triple_cols(d, v), prob(*p));
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractorRow {
    pub extractor: ExtractorKey,
    pub precision: f64,
    pub recall: f64,
    pub q: f64,
    pub extractions: usize,
}

pub fn extractors_tsv(rows: &[ExtractorRow]) -> String {
    let mut rows: Vec<&ExtractorRow> = rows.iter().collect();
    rows.sort_by(|a, b| a.extractor.cmp(&b.extractor));
    let mut s = format!("{EXTRACTOR_HEADER}\tprecision\trecall\tq\textractions\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}",
            extractor_cols(&r.extractor),
            prob(r.precision),
            prob(r.recall),
            prob(r.q),
            r.extractions
        );
    }
    s
}

pub fn pair_sources_tsv(pairs: &BTreeMap<PairSource, PairAccuracy>) -> String {
    let mut s = format!("{SOURCE_HEADER}\t{EXTRACTOR_HEADER}\taccuracy\tclaims\tstuck\n");
    for (k, a) in pairs {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}",
            source_cols(&k.source),
            extractor_cols(&k.extractor),
            prob(a.accuracy),
            a.claims,
            a.stuck
        );
    }
    s
}

pub fn iterations_log(model: &str, iterations: &[IterationStat], converged: bool) -> String {
    let mut s = String::new();
    for it in iterations {
        let _ = writeln!(s, "model={model}\titeration={}\tmax_delta={:.9}", it.iteration, it.max_delta);
    }
    let _ = writeln!(s, "model={model}\tconverged={converged}");
    s
}

/// One row per original `(key, item)`: sources first, then extractors.
pub fn reattribution_tsv(r: &Reattribution) -> String {
    let mut s = String::from("kind\tfrom\titem\tto\n");
    for ((from, (d, v)), to) in &r.sources {
        let _ = writeln!(
            s,
            "source\t{}\t{}\t{}",
            escape(&from.to_string()),
            escape(&format!("{d}={v}")),
            escape(&to.to_string())
        );
    }
    for ((from, (w, d, v)), to) in &r.extractors {
        let _ = writeln!(
            s,
            "extractor\t{}\t{}\t{}",
            escape(&from.to_string()),
            escape(&format!("{w}:{d}={v}")),
            escape(&to.to_string())
        );
    }
    s
}

struct TsvReader<'a> {
    path: &'a Path,
}

impl TsvReader<'_> {
    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line,
            msg: msg.into(),
        }
    }

    /// Data rows (header skipped) with their 1-based line numbers.
    fn rows<R: BufRead>(&self, reader: R, width: usize) -> Result<Vec<(usize, Vec<String>)>> {
        let mut out = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(self.path, e))?;
            if n == 0 || line.is_empty() {
                continue;
            }
            let fields: Vec<String> = line.split('\t').map(unescape).collect();
            if fields.len() != width {
                return Err(self.err(n + 1, format!("expected {width} fields, found {}", fields.len())));
            }
            out.push((n + 1, fields));
        }
        Ok(out)
    }

    fn source(&self, line: usize, f: &[String]) -> Result<SourceKey> {
        let non_empty = |s: &String| (!s.is_empty()).then(|| s.clone());
        let mut key = SourceKey::new(&f[0], non_empty(&f[1]), non_empty(&f[2]))
            .map_err(|e| self.err(line, e.to_string()))?;
        if !f[3].is_empty() {
            key.bucket = Some(f[3].parse().map_err(|_| self.err(line, "bad bucket"))?);
        }
        Ok(key)
    }

    fn triple(&self, line: usize, f: &[String]) -> Result<(DataItem, Value)> {
        let d = DataItem::new(&f[0], &f[1]).map_err(|e| self.err(line, e.to_string()))?;
        let v = Value::new(&f[2]).map_err(|e| self.err(line, e.to_string()))?;
        Ok((d, v))
    }

    fn prob(&self, line: usize, s: &str) -> Result<Option<f64>> {
        if s == "NA" {
            return Ok(None);
        }
        s.parse::<f64>()
            .map(Some)
            .map_err(|_| self.err(line, format!("bad probability {s:?}")))
    }
}

pub fn read_sources<R: BufRead>(reader: R, path: &Path) -> Result<BTreeMap<SourceKey, Option<f64>>> {
    let r = TsvReader { path };
    let mut out = BTreeMap::new();
    for (n, f) in r.rows(reader, 7)? {
        out.insert(r.source(n, &f[..4])?, r.prob(n, &f[4])?);
    }
    Ok(out)
}

pub fn read_values<R: BufRead>(reader: R, path: &Path) -> Result<BTreeMap<(DataItem, Value), Option<f64>>> {
    let r = TsvReader { path };
    let mut out = BTreeMap::new();
    for (n, f) in r.rows(reader, 4)? {
        out.insert(r.triple(n, &f[..3])?, r.prob(n, &f[3])?);
    }
    Ok(out)
}

pub fn read_extractions<R: BufRead>(
    reader: R,
    path: &Path,
) -> Result<BTreeMap<(SourceKey, DataItem, Value), f64>> {
    let r = TsvReader { path };
    let mut out = BTreeMap::new();
    for (n, f) in r.rows(reader, 8)? {
        let w = r.source(n, &f[..4])?;
        let (d, v) = r.triple(n, &f[4..7])?;
        let p = r.prob(n, &f[7])?.ok_or_else(|| r.err(n, "missing probability"))?;
        out.insert((w, d, v), p);
    }
    Ok(out)
}

/// Files written together: either all land in the directory or none do.
#[derive(Debug)]
pub struct OutputSet {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl OutputSet {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        OutputSet {
            dir: dir.into(),
            files: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    /// Writes every file. On failure, files already written by this call are removed.
    pub fn commit(self) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let mut written = Vec::new();
        for (name, contents) in &self.files {
            let path = self.dir.join(name);
            if let Err(e) = fs::write(&path, contents) {
                for p in &written {
                    let _ = fs::remove_file(p);
                }
                let _ = fs::remove_file(&path);
                return Err(Error::io(path, e));
            }
            written.push(path);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escape_round_trip() {
        for s in ["plain", "tab\there", "new\nline", "back\\slash", "\\t literal", "end\\"] {
            assert_eq!(unescape(&escape(s)), s);
            assert!(!escape(s).contains('\t'));
        }
    }

    #[test]
    fn values_round_trip() {
        let mut m = BTreeMap::new();
        m.insert((DataItem::new("a b", "p").unwrap(), Value::new("x\ty").unwrap()), Some(0.25));
        m.insert((DataItem::new("a", "p").unwrap(), Value::new("z").unwrap()), None);
        let text = values_tsv(&m);
        assert!(text.contains("0.250000"));
        assert!(text.contains("\tNA\n"));
        assert_eq!(read_values(text.as_bytes(), Path::new("v")).unwrap(), m);
    }

    #[test]
    fn sources_round_trip() {
        let mut w = SourceKey::new("site.com", Some("p".into()), None).unwrap();
        w.bucket = Some(3);
        let rows = vec![
            SourceRow {
                source: w.clone(),
                accuracy: Some(0.5),
                supported_triples: 2,
                triples: 3,
            },
            SourceRow {
                source: SourceKey::website("a.org"),
                accuracy: None,
                supported_triples: 0,
                triples: 1,
            },
        ];
        let text = sources_tsv(&rows);
        assert!(text.lines().nth(1).unwrap().starts_with("a.org"));
        let back = read_sources(text.as_bytes(), Path::new("s")).unwrap();
        assert_eq!(back[&w], Some(0.5));
        assert_eq!(back[&SourceKey::website("a.org")], None);
    }

    #[test]
    fn extractions_round_trip() {
        let mut m = BTreeMap::new();
        m.insert(
            (
                SourceKey::website("w"),
                DataItem::new("s", "p").unwrap(),
                Value::new("o").unwrap(),
            ),
            0.123456,
        );
        let back = read_extractions(extractions_tsv(&m).as_bytes(), Path::new("e")).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn bad_width_is_parse_error() {
        let err = read_values("h\na\tb\n".as_bytes(), Path::new("v")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn output_set_writes_all() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputSet::new(dir.path().join("o"));
        out.add("a.tsv", "1\n".into());
        out.add("b.tsv", "2\n".into());
        assert_eq!(out.commit().unwrap().len(), 2);
        assert_eq!(fs::read_to_string(dir.path().join("o/b.tsv")).unwrap(), "2\n");
    }

    #[test]
    fn output_set_cleans_up_on_failure() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputSet::new(dir.path());
        out.add("a.tsv", "1\n".into());
        out.add("missing/b.tsv", "2\n".into());
        assert!(out.commit().is_err());
        assert!(!dir.path().join("a.tsv").exists());
    }
}
