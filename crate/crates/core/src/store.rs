//! Sparse observation store.
//!
//! Records are deduplicated on `(extractor, source, item, value)` keeping the largest
//! confidence, then interned into dense ids. All ids are assigned in sorted key
//! order, so iterating any index visits keys in canonical order; every inference
//! stage relies on that for reproducible floating-point reductions.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DataItem, ExtractionRecord, ExtractorKey, SourceKey, Value};

macro_rules! id_type {
    ($name:ident) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }
    };
}

id_type!(SourceId);
id_type!(ExtractorId);
id_type!(ItemId);
id_type!(ValueId);
id_type!(TripleId);
id_type!(ScopeId);

/// The `(website, predicate)` region an extractor was observed working on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ScopeKey {
    pub website: String,
    pub predicate: String,
}

/// A distinct `(source, item, value)` triple with all extractions of it.
#[derive(Debug, Clone, PartialEq)]
pub struct Triple {
    pub source: SourceId,
    pub item: ItemId,
    pub value: ValueId,
    pub scope: ScopeId,
    start: u32,
    end: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extraction {
    pub extractor: ExtractorId,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationStore {
    sources: Vec<SourceKey>,
    extractors: Vec<ExtractorKey>,
    items: Vec<DataItem>,
    values: Vec<Value>,
    scopes: Vec<ScopeKey>,
    triples: Vec<Triple>,
    extractions: Vec<Extraction>,
    item_triples: Vec<Vec<TripleId>>,
    source_triples: Vec<Vec<TripleId>>,
    extractor_extractions: Vec<Vec<(TripleId, f64)>>,
    scope_extractors: Vec<Vec<ExtractorId>>,
    scope_triples: Vec<Vec<TripleId>>,
    extractor_scopes: Vec<Vec<ScopeId>>,
}

type RecordKey = (SourceKey, DataItem, Value, ExtractorKey);

/// Accumulates records before the store is frozen.
#[derive(Debug, Clone, Default)]
pub struct StoreBuilder {
    records: BTreeMap<RecordKey, f64>,
}

impl StoreBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a record; duplicates keep the larger confidence.
    pub fn insert(&mut self, record: ExtractionRecord) {
        let ExtractionRecord {
            extractor,
            source,
            item,
            value,
            confidence,
        } = record;
        let slot = self
            .records
            .entry((source, item, value, extractor))
            .or_insert(confidence);
        if confidence > *slot {
            *slot = confidence;
        }
    }

    pub fn extend<I: IntoIterator<Item = ExtractionRecord>>(&mut self, records: I) {
        for r in records {
            self.insert(r);
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn build(self) -> ObservationStore {
        // Zero confidence is the same as no extraction.
        let records: Vec<(RecordKey, f64)> =
            self.records.into_iter().filter(|(_, c)| *c > 0.0).collect();

        let mut source_set = BTreeSet::new();
        let mut extractor_set = BTreeSet::new();
        let mut item_set = BTreeSet::new();
        let mut value_set = BTreeSet::new();
        let mut scope_set = BTreeSet::new();
        for ((w, d, v, e), _) in &records {
            source_set.insert(w);
            extractor_set.insert(e);
            item_set.insert(d);
            value_set.insert(v);
            scope_set.insert(ScopeKey {
                website: w.website.clone(),
                predicate: d.predicate.clone(),
            });
        }
        let sources: Vec<SourceKey> = source_set.into_iter().cloned().collect();
        let extractors: Vec<ExtractorKey> = extractor_set.into_iter().cloned().collect();
        let items: Vec<DataItem> = item_set.into_iter().cloned().collect();
        let values: Vec<Value> = value_set.into_iter().cloned().collect();
        let scopes: Vec<ScopeKey> = scope_set.into_iter().collect();

        let find = |slice_len: usize, cmp: &dyn Fn(usize) -> std::cmp::Ordering| -> u32 {
            let (mut lo, mut hi) = (0usize, slice_len);
            while lo < hi {
                let mid = (lo + hi) / 2;
                match cmp(mid) {
                    std::cmp::Ordering::Less => lo = mid + 1,
                    std::cmp::Ordering::Greater => hi = mid,
                    std::cmp::Ordering::Equal => return mid as u32,
                }
            }
            unreachable!("interned key missing")
        };

        let mut triples: Vec<Triple> = Vec::new();
        let mut extractions: Vec<Extraction> = Vec::with_capacity(records.len());
        let mut current: Option<(SourceId, ItemId, ValueId)> = None;
        for ((w, d, v, e), conf) in &records {
            let sid = SourceId(find(sources.len(), &|i| sources[i].cmp(w)));
            let iid = ItemId(find(items.len(), &|i| items[i].cmp(d)));
            let vid = ValueId(find(values.len(), &|i| values[i].cmp(v)));
            let eid = ExtractorId(find(extractors.len(), &|i| extractors[i].cmp(e)));
            if current != Some((sid, iid, vid)) {
                let scope = ScopeId(find(scopes.len(), &|i| {
                    (scopes[i].website.as_str(), scopes[i].predicate.as_str())
                        .cmp(&(w.website.as_str(), d.predicate.as_str()))
                }));
                let at = extractions.len() as u32;
                triples.push(Triple {
                    source: sid,
                    item: iid,
                    value: vid,
                    scope,
                    start: at,
                    end: at,
                });
                current = Some((sid, iid, vid));
            }
            extractions.push(Extraction {
                extractor: eid,
                confidence: *conf,
            });
            triples.last_mut().unwrap().end = extractions.len() as u32;
        }

        let mut item_triples = vec![Vec::new(); items.len()];
        let mut source_triples = vec![Vec::new(); sources.len()];
        let mut extractor_extractions = vec![Vec::new(); extractors.len()];
        let mut scope_triples = vec![Vec::new(); scopes.len()];
        let mut scope_extractor_sets = vec![BTreeSet::new(); scopes.len()];
        let mut extractor_scope_sets = vec![BTreeSet::new(); extractors.len()];
        for (t, triple) in triples.iter().enumerate() {
            let tid = TripleId(t as u32);
            item_triples[triple.item.index()].push(tid);
            source_triples[triple.source.index()].push(tid);
            scope_triples[triple.scope.index()].push(tid);
            for x in &extractions[triple.start as usize..triple.end as usize] {
                extractor_extractions[x.extractor.index()].push((tid, x.confidence));
                scope_extractor_sets[triple.scope.index()].insert(x.extractor);
                extractor_scope_sets[x.extractor.index()].insert(triple.scope);
            }
        }
        // Per item: group by value, then source.
        for list in &mut item_triples {
            list.sort_by_key(|t| {
                let tr = &triples[t.index()];
                (tr.value, tr.source)
            });
        }

        ObservationStore {
            sources,
            extractors,
            items,
            values,
            scopes,
            triples,
            extractions,
            item_triples,
            source_triples,
            extractor_extractions,
            scope_extractors: scope_extractor_sets
                .into_iter()
                .map(|s| s.into_iter().collect())
                .collect(),
            scope_triples,
            extractor_scopes: extractor_scope_sets
                .into_iter()
                .map(|s| s.into_iter().collect())
                .collect(),
        }
    }
}

impl FromIterator<ExtractionRecord> for ObservationStore {
    fn from_iter<I: IntoIterator<Item = ExtractionRecord>>(iter: I) -> Self {
        let mut b = StoreBuilder::new();
        b.extend(iter);
        b.build()
    }
}

impl ObservationStore {
    pub fn empty() -> Self {
        StoreBuilder::new().build()
    }

    /// Number of stored extraction records.
    pub fn len(&self) -> usize {
        self.extractions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.extractions.is_empty()
    }

    pub fn num_sources(&self) -> usize {
        self.sources.len()
    }
    pub fn num_extractors(&self) -> usize {
        self.extractors.len()
    }
    pub fn num_items(&self) -> usize {
        self.items.len()
    }
    pub fn num_triples(&self) -> usize {
        self.triples.len()
    }
    pub fn num_scopes(&self) -> usize {
        self.scopes.len()
    }

    pub fn source(&self, id: SourceId) -> &SourceKey {
        &self.sources[id.index()]
    }
    pub fn extractor(&self, id: ExtractorId) -> &ExtractorKey {
        &self.extractors[id.index()]
    }
    pub fn item(&self, id: ItemId) -> &DataItem {
        &self.items[id.index()]
    }
    pub fn value(&self, id: ValueId) -> &Value {
        &self.values[id.index()]
    }
    pub fn scope(&self, id: ScopeId) -> &ScopeKey {
        &self.scopes[id.index()]
    }
    pub fn triple(&self, id: TripleId) -> &Triple {
        &self.triples[id.index()]
    }

    pub fn sources(&self) -> &[SourceKey] {
        &self.sources
    }
    pub fn extractors(&self) -> &[ExtractorKey] {
        &self.extractors
    }
    pub fn items(&self) -> &[DataItem] {
        &self.items
    }

    pub fn source_id(&self, key: &SourceKey) -> Option<SourceId> {
        self.sources
            .binary_search(key)
            .ok()
            .map(|i| SourceId(i as u32))
    }
    pub fn extractor_id(&self, key: &ExtractorKey) -> Option<ExtractorId> {
        self.extractors
            .binary_search(key)
            .ok()
            .map(|i| ExtractorId(i as u32))
    }
    pub fn item_id(&self, key: &DataItem) -> Option<ItemId> {
        self.items.binary_search(key).ok().map(|i| ItemId(i as u32))
    }
    pub fn value_id(&self, key: &Value) -> Option<ValueId> {
        self.values.binary_search(key).ok().map(|i| ValueId(i as u32))
    }

    /// Looks up the `(w, d, v)` triple.
    pub fn triple_id(&self, w: &SourceKey, d: &DataItem, v: &Value) -> Option<TripleId> {
        let key = (self.source_id(w)?, self.item_id(d)?, self.value_id(v)?);
        self.triples
            .binary_search_by(|t| (t.source, t.item, t.value).cmp(&key))
            .ok()
            .map(|i| TripleId(i as u32))
    }

    pub fn triple_ids(&self) -> impl Iterator<Item = TripleId> + '_ {
        (0..self.triples.len() as u32).map(TripleId)
    }

    /// Extractions of a triple, ordered by extractor id.
    pub fn extractions(&self, id: TripleId) -> &[Extraction] {
        let t = &self.triples[id.index()];
        &self.extractions[t.start as usize..t.end as usize]
    }

    /// Triples about an item, ordered by (value, source).
    pub fn item_triples(&self, id: ItemId) -> &[TripleId] {
        &self.item_triples[id.index()]
    }
    pub fn source_triples(&self, id: SourceId) -> &[TripleId] {
        &self.source_triples[id.index()]
    }
    /// `(triple, confidence)` for every extraction made by an extractor.
    pub fn extractor_extractions(&self, id: ExtractorId) -> &[(TripleId, f64)] {
        &self.extractor_extractions[id.index()]
    }
    /// Extractors observed on a `(website, predicate)` scope; these cast absence votes.
    pub fn scope_extractors(&self, id: ScopeId) -> &[ExtractorId] {
        &self.scope_extractors[id.index()]
    }
    pub fn scope_triples(&self, id: ScopeId) -> &[TripleId] {
        &self.scope_triples[id.index()]
    }
    pub fn extractor_scopes(&self, id: ExtractorId) -> &[ScopeId] {
        &self.extractor_scopes[id.index()]
    }

    /// Extractors observed anywhere on `website` for `predicate`.
    pub fn extractor_scope(&self, website: &str, predicate: &str) -> Vec<&ExtractorKey> {
        let Ok(i) = self.scopes.binary_search_by(|s| {
            (s.website.as_str(), s.predicate.as_str()).cmp(&(website, predicate))
        }) else {
            return Vec::new();
        };
        self.scope_extractors[i]
            .iter()
            .map(|e| &self.extractors[e.index()])
            .collect()
    }

    /// Distinct candidate values observed for an item, in value order.
    pub fn item_values(&self, id: ItemId) -> Vec<ValueId> {
        let mut out: Vec<ValueId> = Vec::new();
        for t in &self.item_triples[id.index()] {
            let v = self.triples[t.index()].value;
            if out.last() != Some(&v) {
                out.push(v);
            }
        }
        out
    }

    /// All records in canonical `(source, item, value, extractor)` order.
    pub fn records(&self) -> impl Iterator<Item = ExtractionRecord> + '_ {
        self.triple_ids().flat_map(move |t| {
            let tr = &self.triples[t.index()];
            self.extractions(t).iter().map(move |x| ExtractionRecord {
                extractor: self.extractors[x.extractor.index()].clone(),
                source: self.sources[tr.source.index()].clone(),
                item: self.items[tr.item.index()].clone(),
                value: self.values[tr.value.index()].clone(),
                confidence: x.confidence,
            })
        })
    }

    /// Records about one data item (index by `d`).
    pub fn records_for_item(&self, d: &DataItem) -> Vec<ExtractionRecord> {
        let Some(id) = self.item_id(d) else {
            return Vec::new();
        };
        self.item_triples[id.index()]
            .iter()
            .flat_map(|&t| self.triple_records(t))
            .collect()
    }

    /// Records for one `(w, d, v)` triple.
    pub fn triple_records(&self, t: TripleId) -> Vec<ExtractionRecord> {
        let tr = &self.triples[t.index()];
        self.extractions(t)
            .iter()
            .map(|x| ExtractionRecord {
                extractor: self.extractors[x.extractor.index()].clone(),
                source: self.sources[tr.source.index()].clone(),
                item: self.items[tr.item.index()].clone(),
                value: self.values[tr.value.index()].clone(),
                confidence: x.confidence,
            })
            .collect()
    }

    /// Records by one extractor (index by `e`).
    pub fn records_for_extractor(&self, e: &ExtractorKey) -> Vec<ExtractionRecord> {
        let Some(id) = self.extractor_id(e) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for &(t, _) in &self.extractor_extractions[id.index()] {
            out.extend(
                self.triple_records(t)
                    .into_iter()
                    .filter(|r| &r.extractor == e),
            );
        }
        out
    }

    /// Records from one source (index by `w`).
    pub fn records_for_source(&self, w: &SourceKey) -> Vec<ExtractionRecord> {
        let Some(id) = self.source_id(w) else {
            return Vec::new();
        };
        self.source_triples[id.index()]
            .iter()
            .flat_map(|&t| self.triple_records(t))
            .collect()
    }
}

/// On-disk record layout: one JSON object per line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawRecord {
    pub extractor: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epredicate: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ewebsite: Option<String>,
    pub website: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spredicate: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub webpage: Option<String>,
    pub subject: String,
    pub predicate: String,
    pub object: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

impl RawRecord {
    pub fn into_record(self) -> Result<ExtractionRecord> {
        let extractor = ExtractorKey::new(self.extractor, self.pattern, self.epredicate, self.ewebsite)?;
        let source = SourceKey::new(self.website, self.spredicate, self.webpage)?;
        let item = DataItem::new(self.subject, self.predicate)?;
        let value = Value::from_json(&self.object)?;
        // Extractors that report no confidence are taken at face value.
        let confidence = self.confidence.unwrap_or(1.0);
        ExtractionRecord::new(extractor, source, item, value, confidence)
    }

    pub fn from_record(r: &ExtractionRecord) -> Self {
        RawRecord {
            extractor: r.extractor.extractor.clone(),
            pattern: r.extractor.pattern.clone(),
            epredicate: r.extractor.predicate.clone(),
            ewebsite: r.extractor.website.clone(),
            website: r.source.website.clone(),
            spredicate: r.source.predicate.clone(),
            webpage: r.source.webpage.clone(),
            subject: r.item.subject.clone(),
            predicate: r.item.predicate.clone(),
            object: serde_json::Value::String(r.value.as_str().to_string()),
            confidence: Some(r.confidence),
        }
    }
}

pub fn parse_record(line: &str) -> Result<ExtractionRecord> {
    let raw: RawRecord = serde_json::from_str(line)
        .map_err(|e| Error::InvalidRecord(e.to_string()))?;
    raw.into_record()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    /// 1-based input line.
    pub line: usize,
    pub message: String,
}

#[derive(Debug)]
pub struct IngestOutcome {
    pub store: ObservationStore,
    pub accepted: usize,
    pub rejected: Vec<Rejection>,
}

/// Reads newline-delimited JSON records. Malformed lines are rejected individually
/// and ingest continues.
pub fn ingest_records<R: BufRead>(reader: R) -> std::io::Result<IngestOutcome> {
    let mut builder = StoreBuilder::new();
    let mut rejected = Vec::new();
    let mut accepted = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_record(&line) {
            Ok(r) => {
                builder.insert(r);
                accepted += 1;
            }
            Err(e) => rejected.push(Rejection {
                line: i + 1,
                message: e.to_string(),
            }),
        }
    }
    Ok(IngestOutcome {
        store: builder.build(),
        accepted,
        rejected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(e: &str, w: &str, s: &str, v: &str, c: f64) -> ExtractionRecord {
        ExtractionRecord::new(
            ExtractorKey::named(e),
            SourceKey::website(w),
            DataItem::new(s, "p").unwrap(),
            Value::new(v).unwrap(),
            c,
        )
        .unwrap()
    }

    #[test]
    fn duplicates_merge_by_max_confidence() {
        let store: ObservationStore = vec![
            rec("e1", "w1", "s", "a", 0.4),
            rec("e1", "w1", "s", "a", 0.9),
            rec("e2", "w1", "s", "b", 1.0),
        ]
        .into_iter()
        .collect();
        assert_eq!(store.len(), 2);
        let recs: Vec<_> = store.records().collect();
        assert_eq!(recs[0].confidence, 0.9);
    }

    #[test]
    fn zero_confidence_is_absence() {
        let store: ObservationStore = vec![rec("e1", "w1", "s", "a", 0.0)].into_iter().collect();
        assert!(store.is_empty());
    }

    #[test]
    fn missing_confidence_defaults_to_one() {
        let line = r#"{"extractor":"E1","website":"w.com","subject":"Obama","predicate":"nationality","object":"USA"}"#;
        let r = parse_record(line).unwrap();
        assert_eq!(r.confidence, 1.0);
    }

    #[test]
    fn out_of_range_confidence_rejected() {
        let line = r#"{"extractor":"E1","website":"w.com","subject":"s","predicate":"p","object":"o","confidence":1.3}"#;
        assert!(matches!(parse_record(line), Err(Error::ConfidenceRange(_))));
    }

    #[test]
    fn ingest_reports_bad_lines_and_continues() {
        let input = concat!(
            r#"{"extractor":"E1","website":"w","subject":"s","predicate":"p","object":"o","confidence":0.4}"#,
            "\n",
            "not json\n",
            "\n",
            r#"{"extractor":"E1","website":"w","subject":"s","predicate":"p","object":"o","confidence":0.9}"#,
            "\n",
            r#"{"extractor":"E2","website":"w","subject":"s","predicate":"p","object":"x","confidence":7}"#,
            "\n",
        );
        let out = ingest_records(input.as_bytes()).unwrap();
        assert_eq!(out.accepted, 2);
        assert_eq!(
            out.rejected.iter().map(|r| r.line).collect::<Vec<_>>(),
            vec![2, 5]
        );
        assert_eq!(out.store.len(), 1);
        assert_eq!(out.store.records().next().unwrap().confidence, 0.9);
    }

    #[test]
    fn empty_input_is_empty_store() {
        let out = ingest_records("".as_bytes()).unwrap();
        assert!(out.store.is_empty());
        assert!(out.rejected.is_empty());
    }

    #[test]
    fn indexes_are_consistent() {
        let store: ObservationStore = vec![
            rec("e1", "w1", "s", "a", 1.0),
            rec("e2", "w1", "s", "a", 0.5),
            rec("e1", "w2", "s", "b", 1.0),
            rec("e2", "w2", "t", "b", 1.0),
        ]
        .into_iter()
        .collect();
        assert_eq!(store.num_triples(), 3);
        let d = DataItem::new("s", "p").unwrap();
        assert_eq!(store.records_for_item(&d).len(), 3);
        assert_eq!(store.records_for_source(&SourceKey::website("w2")).len(), 2);
        assert_eq!(store.records_for_extractor(&ExtractorKey::named("e1")).len(), 2);
        let scope = store.extractor_scope("w1", "p");
        assert_eq!(scope.len(), 2);
        let t = store
            .triple_id(&SourceKey::website("w1"), &d, &Value::new("a").unwrap())
            .unwrap();
        assert_eq!(store.extractions(t).len(), 2);
    }

    #[test]
    fn raw_record_round_trips() {
        let r = rec("e1", "w1", "s", "a", 0.25);
        let line = serde_json::to_string(&RawRecord::from_record(&r)).unwrap();
        assert_eq!(parse_record(&line).unwrap(), r);
    }
}
