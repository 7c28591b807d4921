//! Single-layer baseline: every `(source, extractor)` pair is one data source
//! with a single accuracy parameter, fused with the Accu observation model.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::FusionConfig;
use crate::math::{clamp, softmax_with_zeros};
use crate::model::{DataItem, ExtractorKey, SourceKey, Value, ValueDistribution};
use crate::store::{ExtractorId, ItemId, ObservationStore, SourceId, ValueId};

/// A `(source, extractor)` combination treated as one provenance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairSource {
    pub source: SourceKey,
    pub extractor: ExtractorKey,
}

impl std::fmt::Display for PairSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} @ {}", self.extractor, self.source)
    }
}

/// Accu posterior over a data item's domain.
///
/// `claims` lists `(value, accuracy)` for every claim made about the item; a
/// provenance claiming two values contributes two claims. Under a uniform prior
/// over `n + 1` values, each claim of `v` adds `ln(n A / (1 - A))` to the score of
/// `v`, and values nobody claims score zero.
pub fn accu_value_posterior<V: Ord + Clone>(
    claims: &[(V, f64)],
    n: usize,
    eps: f64,
) -> ValueDistribution<V> {
    let mut scores: BTreeMap<&V, f64> = BTreeMap::new();
    for (v, a) in claims {
        let a = clamp(*a, eps);
        *scores.entry(v).or_insert(0.0) += (n as f64 * a / (1.0 - a)).ln();
    }
    finish(scores, n)
}

fn finish<V: Clone>(scores: BTreeMap<&V, f64>, n: usize) -> ValueDistribution<V> {
    let unobserved = (n + 1).saturating_sub(scores.len());
    let raw: Vec<f64> = scores.values().copied().collect();
    let (probs, residual_each) = softmax_with_zeros(&raw, unobserved);
    ValueDistribution {
        candidates: scores.keys().map(|v| (*v).clone()).zip(probs).collect(),
        unobserved,
        residual_each,
    }
}

/// PopAccu posterior: like Accu, but the false-provision mass Accu spreads evenly over
/// the observed false candidates is redistributed in proportion to how often each
/// candidate is claimed.
///
/// With `v*` the hypothesised truth and `k'` observed false candidates, a claim of
/// false value `v` has likelihood `(1 - A) * (k'/n) * c_v / C`, where `c_v` is the
/// claim count of `v` and `C` the total claims on false candidates. A single observed
/// false candidate gets exactly Accu's `(1 - A) / n`.
pub fn popaccu_value_posterior<V: Ord + Clone>(
    claims: &[(V, f64)],
    n: usize,
    eps: f64,
) -> ValueDistribution<V> {
    let mut counts: BTreeMap<&V, usize> = BTreeMap::new();
    for (v, _) in claims {
        *counts.entry(v).or_insert(0) += 1;
    }
    let k = counts.len();
    let total: usize = claims.len();
    let nf = n as f64;

    // Log-likelihood of the claims when `truth` is the true value (None = unobserved).
    let loglik = |truth: Option<&V>| -> f64 {
        let (false_k, false_claims) = match truth {
            Some(t) => (k - 1, total - counts[t]),
            None => (k, total),
        };
        claims
            .iter()
            .map(|(v, a)| {
                let a = clamp(*a, eps);
                if Some(v) == truth {
                    a.ln()
                } else {
                    let share = false_k as f64 / nf * counts[v] as f64 / false_claims as f64;
                    ((1.0 - a) * share).ln()
                }
            })
            .sum()
    };
    let base = loglik(None);
    let scores: BTreeMap<&V, f64> = counts.keys().map(|v| (*v, loglik(Some(v)) - base)).collect();
    finish(scores, n)
}

/// Mean posterior of the facts a provenance claims. `None` when it claims nothing.
pub fn accu_source_accuracy(claim_posteriors: &[f64]) -> Option<f64> {
    if claim_posteriors.is_empty() {
        return None;
    }
    Some(claim_posteriors.iter().sum::<f64>() / claim_posteriors.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ValueModel {
    #[default]
    Accu,
    PopAccu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAccuracy {
    pub accuracy: f64,
    pub claims: usize,
    /// The estimate never moved away from its initial value: the provenance has no
    /// overlap with others and is left out of fusion.
    pub stuck: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationStat {
    pub iteration: usize,
    pub max_delta: f64,
}

#[derive(Debug, Clone)]
pub struct SingleLayerResult {
    /// Per item (store item id order); `None` if every claim came from a stuck provenance.
    pub posteriors: Vec<Option<ValueDistribution<ValueId>>>,
    pub accuracies: BTreeMap<PairSource, PairAccuracy>,
    pub iterations: Vec<IterationStat>,
    pub converged: bool,
}

impl SingleLayerResult {
    /// `p(V_d = v)` for every covered candidate `(d, v)`.
    pub fn candidate_probabilities(
        &self,
        store: &ObservationStore,
    ) -> BTreeMap<(DataItem, Value), f64> {
        let mut out = BTreeMap::new();
        for (i, dist) in self.posteriors.iter().enumerate() {
            let Some(dist) = dist else { continue };
            let d = store.item(ItemId(i as u32));
            for (v, p) in &dist.candidates {
                out.insert((d.clone(), store.value(*v).clone()), *p);
            }
        }
        out
    }

    /// Every candidate `(d, v)` observed in the store, covered or not.
    pub fn all_candidates(store: &ObservationStore) -> Vec<(DataItem, Value)> {
        (0..store.num_items() as u32)
            .flat_map(|i| {
                let id = ItemId(i);
                store
                    .item_values(id)
                    .into_iter()
                    .map(move |v| (store.item(id).clone(), store.value(v).clone()))
            })
            .collect()
    }

    /// Accuracy of each web source, taken as the mean truth probability of every
    /// value extracted from it by any extractor.
    pub fn web_source_accuracy(&self, store: &ObservationStore) -> BTreeMap<SourceKey, f64> {
        let mut out = BTreeMap::new();
        for s in 0..store.num_sources() as u32 {
            let sid = SourceId(s);
            let mut sum = 0.0;
            let mut count = 0usize;
            for &t in store.source_triples(sid) {
                let tr = store.triple(t);
                let Some(dist) = &self.posteriors[tr.item.index()] else {
                    continue;
                };
                let p = dist.prob(&tr.value);
                for _ in store.extractions(t) {
                    sum += p;
                    count += 1;
                }
            }
            if count > 0 {
                out.insert(store.source(sid).clone(), sum / count as f64);
            }
        }
        out
    }
}

struct PairIndex {
    pairs: Vec<(SourceId, ExtractorId)>,
    /// Per item: `(pair index, value)` claims in canonical order.
    item_claims: Vec<Vec<(usize, ValueId)>>,
    /// Per pair: `(item, value)` claims.
    pair_claims: Vec<Vec<(ItemId, ValueId)>>,
}

fn index_pairs(store: &ObservationStore) -> PairIndex {
    let mut pair_ids: BTreeMap<(SourceId, ExtractorId), usize> = BTreeMap::new();
    for t in store.triple_ids() {
        let s = store.triple(t).source;
        for x in store.extractions(t) {
            pair_ids.insert((s, x.extractor), 0);
        }
    }
    // Order pairs by their keys, not ids, so output order matches key order.
    let mut pairs: Vec<(SourceId, ExtractorId)> = pair_ids.keys().copied().collect();
    pairs.sort_by(|a, b| {
        (store.source(a.0), store.extractor(a.1)).cmp(&(store.source(b.0), store.extractor(b.1)))
    });
    for (i, p) in pairs.iter().enumerate() {
        pair_ids.insert(*p, i);
    }
    let mut item_claims = vec![Vec::new(); store.num_items()];
    let mut pair_claims = vec![Vec::new(); pairs.len()];
    for i in 0..store.num_items() as u32 {
        let item = ItemId(i);
        for &t in store.item_triples(item) {
            let tr = store.triple(t);
            for x in store.extractions(t) {
                let p = pair_ids[&(tr.source, x.extractor)];
                item_claims[item.index()].push((p, tr.value));
                pair_claims[p].push((item, tr.value));
            }
        }
    }
    PairIndex {
        pairs,
        item_claims,
        pair_claims,
    }
}

fn e_step(
    index: &PairIndex,
    accuracy: &[f64],
    active: &[bool],
    config: &FusionConfig,
    model: ValueModel,
) -> Vec<Option<ValueDistribution<ValueId>>> {
    index
        .item_claims
        .par_iter()
        .map(|claims| {
            let claims: Vec<(ValueId, f64)> = claims
                .iter()
                .filter(|(p, _)| active[*p])
                .map(|&(p, v)| (v, accuracy[p]))
                .collect();
            if claims.is_empty() {
                return None;
            }
            Some(match model {
                ValueModel::Accu => accu_value_posterior(&claims, config.n_single, config.clamp_eps),
                ValueModel::PopAccu => {
                    popaccu_value_posterior(&claims, config.n_single, config.clamp_eps)
                }
            })
        })
        .collect()
}

/// Alternates value posteriors and provenance accuracies, starting from
/// `config.default_a` (or `initial` where given), for at most `config.t_max`
/// iterations.
pub fn single_layer_em(
    store: &ObservationStore,
    config: &FusionConfig,
    initial: Option<&BTreeMap<PairSource, f64>>,
    model: ValueModel,
) -> SingleLayerResult {
    let index = index_pairs(store);
    let key = |p: usize| PairSource {
        source: store.source(index.pairs[p].0).clone(),
        extractor: store.extractor(index.pairs[p].1).clone(),
    };
    let start: Vec<f64> = (0..index.pairs.len())
        .map(|p| {
            initial
                .and_then(|m| m.get(&key(p)).copied())
                .unwrap_or(config.default_a)
        })
        .collect();
    let mut accuracy = start.clone();
    let mut moved = vec![false; index.pairs.len()];
    let all_active = vec![true; index.pairs.len()];
    let mut iterations = Vec::new();
    let mut converged = false;
    let mut posteriors = Vec::new();

    for iteration in 1..=config.t_max {
        if store.is_empty() {
            break;
        }
        posteriors = e_step(&index, &accuracy, &all_active, config, model);
        let updated: Vec<f64> = index
            .pair_claims
            .par_iter()
            .enumerate()
            .map(|(p, claims)| {
                let probs: Vec<f64> = claims
                    .iter()
                    .map(|(d, v)| {
                        posteriors[d.index()]
                            .as_ref()
                            .map(|dist| dist.prob(v))
                            .unwrap_or(0.0)
                    })
                    .collect();
                accu_source_accuracy(&probs).unwrap_or(accuracy[p])
            })
            .collect();
        let mut max_delta: f64 = 0.0;
        for p in 0..accuracy.len() {
            max_delta = max_delta.max((updated[p] - accuracy[p]).abs());
            if (updated[p] - start[p]).abs() > STUCK_TOL {
                moved[p] = true;
            }
        }
        accuracy = updated;
        iterations.push(IterationStat {
            iteration,
            max_delta,
        });
        log::debug!("single-layer iteration {iteration}: max |dA| = {max_delta:e}");
        if max_delta < config.convergence_tol {
            converged = true;
            break;
        }
    }

    // Provenances that never left their starting accuracy are dropped from fusion.
    if moved.iter().any(|m| !m) && !store.is_empty() {
        posteriors = e_step(&index, &accuracy, &moved, config, model);
    }

    let accuracies = (0..index.pairs.len())
        .map(|p| {
            (
                key(p),
                PairAccuracy {
                    accuracy: accuracy[p],
                    claims: index.pair_claims[p].len(),
                    stuck: !moved[p],
                },
            )
        })
        .collect();
    SingleLayerResult {
        posteriors,
        accuracies,
        iterations,
        converged,
    }
}

/// Smallest change that counts as leaving the initial value.
pub(crate) const STUCK_TOL: f64 = 1e-9;
