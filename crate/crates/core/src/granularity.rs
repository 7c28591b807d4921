//! Dynamic source and extractor granularity.
//!
//! Sources live in a `<website, predicate, webpage>` hierarchy and extractors in an
//! `<extractor, pattern, predicate, website>` hierarchy. Nodes that hold too few
//! triples are pooled into their parent; nodes that hold too many are split
//! uniformly into sub-sources tagged with a bucket index.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;


use crate::math::stable_hash;
use crate::model::{DataItem, ExtractionRecord, ExtractorKey, SourceKey, Value};
use crate::store::{ObservationStore, StoreBuilder};

/// A key that can be coarsened one feature at a time.
pub trait HierarchyKey: Clone + Ord + Display {
    /// Drops the most specific feature; `None` at the top of the hierarchy.
    fn parent(&self) -> Option<Self>;
    /// Number of set features (bucket tags count as one more level).
    fn depth(&self) -> usize;
    fn with_bucket(&self, bucket: u32) -> Self;
}

impl HierarchyKey for SourceKey {
    fn parent(&self) -> Option<Self> {
        let mut k = self.clone();
        if k.bucket.take().is_some() {
            return Some(k);
        }
        if k.webpage.take().is_some() || k.predicate.take().is_some() {
            return Some(k);
        }
        None
    }

    fn depth(&self) -> usize {
        1 + self.predicate.is_some() as usize
            + self.webpage.is_some() as usize
            + self.bucket.is_some() as usize
    }

    fn with_bucket(&self, bucket: u32) -> Self {
        SourceKey {
            bucket: Some(bucket),
            ..self.clone()
        }
    }
}

impl HierarchyKey for ExtractorKey {
    fn parent(&self) -> Option<Self> {
        let mut k = self.clone();
        if k.bucket.take().is_some()
            || k.website.take().is_some()
            || k.predicate.take().is_some()
            || k.pattern.take().is_some()
        {
            return Some(k);
        }
        None
    }

    fn depth(&self) -> usize {
        1 + self.pattern.is_some() as usize
            + self.predicate.is_some() as usize
            + self.website.is_some() as usize
            + self.bucket.is_some() as usize
    }

    fn with_bucket(&self, bucket: u32) -> Self {
        ExtractorKey {
            bucket: Some(bucket),
            ..self.clone()
        }
    }
}

pub fn get_parent<K: HierarchyKey>(key: &K) -> Option<K> {
    key.parent()
}

/// Anything attributed to a node that can be hashed reproducibly for splitting.
pub trait SplitItem: Ord + Clone {
    fn stable_hash(&self, seed: u64) -> u64;
}

impl SplitItem for (DataItem, Value) {
    fn stable_hash(&self, seed: u64) -> u64 {
        stable_hash(
            seed,
            &[
                self.0.subject.as_bytes(),
                self.0.predicate.as_bytes(),
                self.1.as_str().as_bytes(),
            ],
        )
    }
}

impl SplitItem for (SourceKey, DataItem, Value) {
    fn stable_hash(&self, seed: u64) -> u64 {
        let w = self.0.to_string();
        stable_hash(
            seed,
            &[
                w.as_bytes(),
                self.1.subject.as_bytes(),
                self.1.predicate.as_bytes(),
                self.2.as_str().as_bytes(),
            ],
        )
    }
}

impl SplitItem for u64 {
    fn stable_hash(&self, seed: u64) -> u64 {
        stable_hash(seed, &[&self.to_le_bytes()])
    }
}

/// A source or extractor at some granularity, with the distinct triples
/// attributed to it and the original keys each triple came from.
#[derive(Debug, Clone, PartialEq)]
pub struct GranularityNode<K, T> {
    pub key: K,
    members: BTreeMap<T, BTreeSet<K>>,
    /// Keys pooled or split into this node.
    pub children: BTreeSet<K>,
}

impl<K: HierarchyKey, T: SplitItem> GranularityNode<K, T> {
    /// A finest-granularity node owning `items`.
    pub fn leaf(key: K, items: impl IntoIterator<Item = T>) -> Self {
        let members = items
            .into_iter()
            .map(|t| (t, BTreeSet::from([key.clone()])))
            .collect();
        GranularityNode {
            key,
            members,
            children: BTreeSet::new(),
        }
    }

    fn empty(key: K) -> Self {
        GranularityNode {
            key,
            members: BTreeMap::new(),
            children: BTreeSet::new(),
        }
    }

    /// Count of distinct triples attributed to the node.
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn items(&self) -> impl Iterator<Item = &T> {
        self.members.keys()
    }

    fn absorb(&mut self, other: GranularityNode<K, T>) {
        self.children.insert(other.key);
        for (t, origins) in other.members {
            self.members.entry(t).or_default().extend(origins);
        }
    }
}

/// Splits an oversized node into `ceil(|W| / max)` sub-sources of near-equal size.
///
/// Triples are ordered by a seeded hash and dealt round-robin, so bucket sizes differ
/// by at most one and the partition is reproducible from the seed alone.
pub fn split<K: HierarchyKey, T: SplitItem>(
    node: GranularityNode<K, T>,
    max: usize,
    seed: u64,
) -> Vec<GranularityNode<K, T>> {
    let size = node.size();
    if size <= max || max == 0 {
        return vec![node];
    }
    let buckets = size.div_ceil(max);
    let mut order: Vec<(u64, T, BTreeSet<K>)> = node
        .members
        .into_iter()
        .map(|(t, o)| (t.stable_hash(seed), t, o))
        .collect();
    order.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
    let mut out: Vec<GranularityNode<K, T>> = (0..buckets as u32)
        .map(|b| {
            let mut n = GranularityNode::empty(node.key.with_bucket(b));
            n.children.insert(node.key.clone());
            n
        })
        .collect();
    for (i, (_, t, origins)) in order.into_iter().enumerate() {
        out[i % buckets].members.insert(t, origins);
    }
    out
}

/// Final nodes plus, for every original `(key, triple)`, the key it now belongs to.
#[derive(Debug, Clone)]
pub struct SplitMergeOutcome<K, T> {
    pub nodes: Vec<GranularityNode<K, T>>,
    pub reattribution: BTreeMap<(K, T), K>,
}

/// Brings every node's size into `[min, max]` by pooling small nodes into their parents
/// and splitting large ones. Small nodes already at the top of the hierarchy are kept.
///
/// Nodes are processed deepest level first, so every child of a parent is pooled before
/// the parent is examined.
pub fn split_and_merge<K: HierarchyKey, T: SplitItem>(
    nodes: impl IntoIterator<Item = GranularityNode<K, T>>,
    min: usize,
    max: usize,
    seed: u64,
) -> SplitMergeOutcome<K, T> {
    let mut work: BTreeMap<K, GranularityNode<K, T>> = BTreeMap::new();
    for n in nodes {
        match work.get_mut(&n.key) {
            Some(existing) => {
                for (t, o) in n.members {
                    existing.members.entry(t).or_default().extend(o);
                }
            }
            None => {
                work.insert(n.key.clone(), n);
            }
        }
    }

    let mut done: Vec<GranularityNode<K, T>> = Vec::new();
    while let Some(depth) = work.keys().map(HierarchyKey::depth).max() {
        let level: Vec<K> = work.keys().filter(|k| k.depth() == depth).cloned().collect();
        for key in level {
            let node = work.remove(&key).expect("key listed from map");
            if node.size() > max {
                done.extend(split(node, max, seed));
            } else if node.size() < min {
                match node.key.parent() {
                    None => done.push(node),
                    Some(parent) => work
                        .entry(parent.clone())
                        .or_insert_with(|| GranularityNode::empty(parent))
                        .absorb(node),
                }
            } else {
                done.push(node);
            }
        }
    }
    done.sort_by(|a, b| a.key.cmp(&b.key));

    let mut reattribution = BTreeMap::new();
    for node in &done {
        for (t, origins) in &node.members {
            for o in origins {
                reattribution.insert((o.clone(), t.clone()), node.key.clone());
            }
        }
    }
    SplitMergeOutcome {
        nodes: done,
        reattribution,
    }
}

/// Source and extractor reattribution maps produced by [`regranulate`].
#[derive(Debug, Clone, Default)]
pub struct Reattribution {
    pub sources: BTreeMap<(SourceKey, (DataItem, Value)), SourceKey>,
    pub extractors: BTreeMap<(ExtractorKey, (SourceKey, DataItem, Value)), ExtractorKey>,
}

impl Reattribution {
    pub fn final_sources(&self) -> BTreeSet<&SourceKey> {
        self.sources.values().collect()
    }

    pub fn final_extractors(&self) -> BTreeSet<&ExtractorKey> {
        self.extractors.values().collect()
    }
}

/// Applies split-and-merge to both sources and extractors of a store.
///
/// Records are rewritten to their final keys and pooled (duplicates keep the larger
/// confidence) before extractor scopes are recomputed by the new store.
pub fn regranulate(
    store: &ObservationStore,
    min: usize,
    max: usize,
    seed: u64,
) -> (ObservationStore, Reattribution) {
    let mut source_items: BTreeMap<SourceKey, BTreeSet<(DataItem, Value)>> = BTreeMap::new();
    let mut extractor_items: BTreeMap<ExtractorKey, BTreeSet<(SourceKey, DataItem, Value)>> =
        BTreeMap::new();
    for r in store.records() {
        source_items
            .entry(r.source.clone())
            .or_default()
            .insert((r.item.clone(), r.value.clone()));
        extractor_items
            .entry(r.extractor.clone())
            .or_default()
            .insert((r.source.clone(), r.item.clone(), r.value.clone()));
    }
    let sources = split_and_merge(
        source_items
            .into_iter()
            .map(|(k, items)| GranularityNode::leaf(k, items)),
        min,
        max,
        seed,
    );
    let extractors = split_and_merge(
        extractor_items
            .into_iter()
            .map(|(k, items)| GranularityNode::leaf(k, items)),
        min,
        max,
        seed,
    );
    let reattribution = Reattribution {
        sources: sources.reattribution.into_iter().collect(),
        extractors: extractors.reattribution.into_iter().collect(),
    };

    let mut builder = StoreBuilder::new();
    for r in store.records() {
        let dv = (r.item.clone(), r.value.clone());
        let w = reattribution.sources[&(r.source.clone(), dv)].clone();
        let e = reattribution.extractors
            [&(r.extractor.clone(), (r.source.clone(), r.item.clone(), r.value.clone()))]
            .clone();
        builder.insert(ExtractionRecord {
            extractor: e,
            source: w,
            ..r
        });
    }
    (builder.build(), reattribution)
}
