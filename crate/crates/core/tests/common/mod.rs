#![allow(dead_code)]

use std::collections::BTreeMap;

use kbtrust::multilayer::QualityParams;
use kbtrust::{DataItem, ExtractionRecord, ExtractorKey, ObservationStore, SourceKey, Value};

pub fn page(site: &str, predicate: &str, page: &str) -> SourceKey {
    SourceKey::new(site, Some(predicate.into()), Some(page.into())).unwrap()
}

pub fn record(e: &str, w: &SourceKey, s: &str, p: &str, o: &str, conf: f64) -> ExtractionRecord {
    ExtractionRecord::new(
        ExtractorKey::named(e),
        w.clone(),
        DataItem::new(s, p).unwrap(),
        Value::new(o).unwrap(),
        conf,
    )
    .unwrap()
}

/// Obama's nationality as extracted by E1..E5 from eight pages of one website.
pub fn motivating_records() -> Vec<ExtractionRecord> {
    let rows: [(&str, [&str; 5]); 8] = [
        ("W1", ["USA", "USA", "USA", "USA", "Kenya"]),
        ("W2", ["USA", "USA", "USA", "N.Amer.", ""]),
        ("W3", ["USA", "", "USA", "N.Amer.", ""]),
        ("W4", ["USA", "", "USA", "Kenya", ""]),
        ("W5", ["Kenya", "Kenya", "Kenya", "Kenya", "Kenya"]),
        ("W6", ["Kenya", "", "Kenya", "USA", ""]),
        ("W7", ["", "", "Kenya", "", "Kenya"]),
        ("W8", ["", "", "", "", "Kenya"]),
    ];
    let mut out = Vec::new();
    for (w, extracted) in rows {
        let src = page("web.example", "nationality", w);
        for (i, v) in extracted.iter().enumerate() {
            if !v.is_empty() {
                out.push(record(&format!("E{}", i + 1), &src, "Obama", "nationality", v, 1.0));
            }
        }
    }
    out
}

pub fn motivating_store() -> ObservationStore {
    motivating_records().into_iter().collect()
}

/// Extractor qualities of the motivating example, with Q taken as tabulated.
pub fn motivating_quality() -> QualityParams {
    let rows = [
        ("E1", 0.99, 0.99, 0.01),
        ("E2", 0.99, 0.5, 0.01),
        ("E3", 0.85, 0.99, 0.06),
        ("E4", 0.33, 0.33, 0.22),
        ("E5", 0.25, 0.17, 0.17),
    ];
    let mut q = QualityParams::default();
    for (e, p, r, qq) in rows {
        let k = ExtractorKey::named(e);
        q.p.insert(k.clone(), p);
        q.r.insert(k.clone(), r);
        q.q.insert(k, qq);
    }
    q
}

pub fn src_site(w: &str) -> SourceKey {
    SourceKey::website(w)
}

pub fn keyed<K: Ord + Clone>(pairs: &[(K, f64)]) -> BTreeMap<K, f64> {
    pairs.iter().cloned().collect()
}
