//! Seeded generator for controlled fusion experiments with full ground truth.
//!
//! All sources speak about one shared set of data items. Each source states the true
//! value of every item with probability `accuracy`, otherwise a uniformly drawn false
//! value. Each extractor covers each source with probability `delta`, extracts each
//! provided triple of a covered source with probability `recall`, and corrupts each
//! of subject, predicate and object independently with probability
//! `1 - p_component`, so its precision is about `p_component^3`.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DataItem, ExtractionRecord, ExtractorKey, SourceKey, Value};
use crate::store::ObservationStore;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_sources: usize,
    pub n_extractors: usize,
    pub triples_per_source: usize,
    pub accuracy: f64,
    pub delta: f64,
    pub recall: f64,
    pub p_component: f64,
    /// False values per item; also the size of each corruption pool.
    pub domain_size: usize,
    /// Distinct predicates the shared items are spread over.
    pub n_predicates: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_sources: 10,
            n_extractors: 5,
            triples_per_source: 100,
            accuracy: 0.7,
            delta: 0.5,
            recall: 0.5,
            p_component: 0.8,
            domain_size: 10,
            n_predicates: 5,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("accuracy", self.accuracy),
            ("delta", self.delta),
            ("recall", self.recall),
            ("p_component", self.p_component),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        if self.domain_size < 2 {
            return Err(Error::Config("domain_size must be at least 2".into()));
        }
        if self.n_predicates == 0 {
            return Err(Error::Config("n_predicates must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub true_values: BTreeMap<DataItem, Value>,
    pub provisions: BTreeSet<(SourceKey, DataItem, Value)>,
    /// Realized fraction of true provisions per source.
    pub true_a: BTreeMap<SourceKey, f64>,
    pub nominal_a: f64,
    /// Realized fraction of correct extractions per extractor.
    pub true_p: BTreeMap<ExtractorKey, f64>,
    /// Realized fraction of provided triples extracted, over covered sources.
    pub true_r: BTreeMap<ExtractorKey, f64>,
    pub coverage: BTreeSet<(ExtractorKey, SourceKey)>,
}

impl GroundTruth {
    /// 1 if `v` is the true value of `d`, 0 otherwise. The generated world is complete,
    /// so claims about items no source speaks about (corrupted extractions) are false.
    pub fn value_label(&self, d: &DataItem, v: &Value) -> f64 {
        (self.true_values.get(d) == Some(v)) as u8 as f64
    }

    /// Truth for every candidate in `candidates`.
    pub fn value_truth<'a>(
        &self,
        candidates: impl IntoIterator<Item = &'a (DataItem, Value)>,
    ) -> BTreeMap<(DataItem, Value), f64> {
        candidates
            .into_iter()
            .map(|(d, v)| ((d.clone(), v.clone()), self.value_label(d, v)))
            .collect()
    }

    pub fn provision_label(&self, w: &SourceKey, d: &DataItem, v: &Value) -> f64 {
        self.provisions.contains(&(w.clone(), d.clone(), v.clone())) as u8 as f64
    }
}

fn item(i: usize, n_predicates: usize) -> DataItem {
    DataItem {
        subject: format!("s{i:04}"),
        predicate: format!("p{}", i % n_predicates),
    }
}

fn value(i: usize, k: usize) -> Value {
    Value::new(format!("o{i:04}_{k:03}")).expect("non-empty")
}

/// Generates records and ground truth. Identical configs give identical output.
pub fn generate(cfg: &SynthConfig) -> (Vec<ExtractionRecord>, GroundTruth) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.domain_size;
    let n_items = cfg.triples_per_source;

    // Truth: one of the n + 1 domain values, the rest form the false pool.
    let truth_index: Vec<usize> = (0..n_items).map(|_| rng.gen_range(0..=n)).collect();
    let false_pool = |i: usize| -> Vec<usize> { (0..=n).filter(|k| *k != truth_index[i]).collect() };

    let mut truth = GroundTruth {
        nominal_a: cfg.accuracy,
        ..Default::default()
    };
    for (i, &t) in truth_index.iter().enumerate() {
        truth.true_values.insert(item(i, cfg.n_predicates), value(i, t));
    }

    let sources: Vec<SourceKey> = (0..cfg.n_sources)
        .map(|w| SourceKey::website(format!("source{w:03}.com")))
        .collect();
    let extractors: Vec<ExtractorKey> = (0..cfg.n_extractors)
        .map(|e| ExtractorKey::named(format!("extractor{e:02}")))
        .collect();

    // Per source: provided value index for each item.
    let mut provided: Vec<Vec<usize>> = Vec::with_capacity(cfg.n_sources);
    for w in &sources {
        let mut row = Vec::with_capacity(n_items);
        let mut correct = 0usize;
        for i in 0..n_items {
            let k = if rng.gen_bool(cfg.accuracy) {
                correct += 1;
                truth_index[i]
            } else {
                let pool = false_pool(i);
                pool[rng.gen_range(0..pool.len())]
            };
            truth
                .provisions
                .insert((w.clone(), item(i, cfg.n_predicates), value(i, k)));
            row.push(k);
        }
        truth.true_a.insert(
            w.clone(),
            if n_items == 0 { 0.0 } else { correct as f64 / n_items as f64 },
        );
        provided.push(row);
    }

    let mut records = Vec::new();
    for e in &extractors {
        let mut extracted: BTreeSet<(usize, DataItem, Value)> = BTreeSet::new();
        let mut covered_provided = 0usize;
        let mut covered_hits: BTreeSet<(usize, usize)> = BTreeSet::new();
        for (w, src) in sources.iter().enumerate() {
            if !rng.gen_bool(cfg.delta) {
                continue;
            }
            truth.coverage.insert((e.clone(), src.clone()));
            covered_provided += n_items;
            for i in 0..n_items {
                if !rng.gen_bool(cfg.recall) {
                    continue;
                }
                let k = provided[w][i];
                let mut d = item(i, cfg.n_predicates);
                let mut v = value(i, k);
                if !rng.gen_bool(cfg.p_component) {
                    d.subject = format!("xs{:03}", rng.gen_range(0..n));
                }
                if !rng.gen_bool(cfg.p_component) {
                    d.predicate = format!("xp{:03}", rng.gen_range(0..n));
                }
                if !rng.gen_bool(cfg.p_component) {
                    // a false value other than the one the page states
                    let pool: Vec<usize> =
                        (0..=n).filter(|x| *x != k && *x != truth_index[i]).collect();
                    v = value(i, pool[rng.gen_range(0..pool.len())]);
                }
                if d == item(i, cfg.n_predicates) && v == value(i, k) {
                    covered_hits.insert((w, i));
                }
                extracted.insert((w, d, v));
            }
        }
        let correct = extracted
            .iter()
            .filter(|(w, d, v)| truth.provisions.contains(&(sources[*w].clone(), d.clone(), v.clone())))
            .count();
        if !extracted.is_empty() {
            truth
                .true_p
                .insert(e.clone(), correct as f64 / extracted.len() as f64);
        }
        if covered_provided > 0 {
            truth
                .true_r
                .insert(e.clone(), covered_hits.len() as f64 / covered_provided as f64);
        }
        for (w, d, v) in extracted {
            records.push(ExtractionRecord {
                extractor: e.clone(),
                source: sources[w].clone(),
                item: d,
                value: v,
                confidence: 1.0,
            });
        }
    }
    (records, truth)
}

/// Convenience wrapper returning the built store.
pub fn generate_store(cfg: &SynthConfig) -> (ObservationStore, GroundTruth) {
    let (records, truth) = generate(cfg);
    (records.into_iter().collect(), truth)
}

/// JSON sidecar layout for [`GroundTruth`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruthFile {
    pub nominal_accuracy: f64,
    pub values: Vec<TruthValue>,
    pub provisions: Vec<TruthProvision>,
    pub sources: Vec<TruthSource>,
    pub extractors: Vec<TruthExtractor>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthValue {
    pub subject: String,
    pub predicate: String,
    pub value: Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthProvision {
    pub source: SourceKey,
    pub subject: String,
    pub predicate: String,
    pub value: Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthSource {
    pub source: SourceKey,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthExtractor {
    pub extractor: ExtractorKey,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub covers: Vec<SourceKey>,
}

impl From<&GroundTruth> for GroundTruthFile {
    fn from(t: &GroundTruth) -> Self {
        let mut extractors: BTreeMap<&ExtractorKey, TruthExtractor> = BTreeMap::new();
        let entry = |e: &ExtractorKey| -> TruthExtractor {
            TruthExtractor {
                extractor: e.clone(),
                precision: t.true_p.get(e).copied(),
                recall: t.true_r.get(e).copied(),
                covers: Vec::new(),
            }
        };
        for e in t.true_p.keys().chain(t.true_r.keys()) {
            extractors.insert(e, entry(e));
        }
        for (e, w) in &t.coverage {
            extractors
                .entry(e)
                .or_insert_with(|| entry(e))
                .covers
                .push(w.clone());
        }
        GroundTruthFile {
            nominal_accuracy: t.nominal_a,
            values: t
                .true_values
                .iter()
                .map(|(d, v)| TruthValue {
                    subject: d.subject.clone(),
                    predicate: d.predicate.clone(),
                    value: v.clone(),
                })
                .collect(),
            provisions: t
                .provisions
                .iter()
                .map(|(w, d, v)| TruthProvision {
                    source: w.clone(),
                    subject: d.subject.clone(),
                    predicate: d.predicate.clone(),
                    value: v.clone(),
                })
                .collect(),
            sources: t
                .true_a
                .iter()
                .map(|(w, a)| TruthSource {
                    source: w.clone(),
                    accuracy: *a,
                })
                .collect(),
            extractors: extractors.into_values().collect(),
        }
    }
}

impl From<GroundTruthFile> for GroundTruth {
    fn from(f: GroundTruthFile) -> Self {
        let mut t = GroundTruth {
            nominal_a: f.nominal_accuracy,
            ..Default::default()
        };
        for v in f.values {
            t.true_values.insert(
                DataItem {
                    subject: v.subject,
                    predicate: v.predicate,
                },
                v.value,
            );
        }
        for p in f.provisions {
            t.provisions.insert((
                p.source,
                DataItem {
                    subject: p.subject,
                    predicate: p.predicate,
                },
                p.value,
            ));
        }
        for s in f.sources {
            t.true_a.insert(s.source, s.accuracy);
        }
        for e in f.extractors {
            if let Some(p) = e.precision {
                t.true_p.insert(e.extractor.clone(), p);
            }
            if let Some(r) = e.recall {
                t.true_r.insert(e.extractor.clone(), r);
            }
            for w in e.covers {
                t.coverage.insert((e.extractor.clone(), w));
            }
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_has_ten_by_hundred_provisions() {
        let (_, truth) = generate(&SynthConfig::default());
        assert_eq!(truth.provisions.len(), 1000);
        assert_eq!(truth.true_a.len(), 10);
        assert_eq!(truth.true_values.len(), 100);
    }

    #[test]
    fn same_seed_same_output() {
        let cfg = SynthConfig {
            seed: 42,
            ..Default::default()
        };
        assert_eq!(generate(&cfg), generate(&cfg));
        let other = SynthConfig { seed: 43, ..cfg.clone() };
        assert_ne!(generate(&cfg).0, generate(&other).0);
    }

    #[test]
    fn extractions_only_from_covered_sources() {
        let (records, truth) = generate(&SynthConfig {
            seed: 5,
            ..Default::default()
        });
        for r in &records {
            assert!(truth.coverage.contains(&(r.extractor.clone(), r.source.clone())));
        }
    }

    #[test]
    fn realized_accuracy_near_nominal() {
        for seed in 0..5 {
            let (_, truth) = generate(&SynthConfig {
                seed,
                ..Default::default()
            });
            for a in truth.true_a.values() {
                // 4 binomial standard deviations for 100 draws at 0.7
                assert!((a - 0.7).abs() < 4.0 * (0.7f64 * 0.3 / 100.0).sqrt());
            }
        }
    }

    #[test]
    fn sidecar_round_trips() {
        let (_, truth) = generate(&SynthConfig::default());
        let file = GroundTruthFile::from(&truth);
        let json = serde_json::to_string(&file).unwrap();
        let back: GroundTruth = serde_json::from_str::<GroundTruthFile>(&json).unwrap().into();
        assert_eq!(back.true_values, truth.true_values);
        assert_eq!(back.provisions, truth.provisions);
        assert_eq!(back.coverage, truth.coverage);
        assert_eq!(back.true_a, truth.true_a);
        assert_eq!(back.true_p, truth.true_p);
        assert_eq!(back.true_r, truth.true_r);
        assert_eq!(back, truth);
    }
}
