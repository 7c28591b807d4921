//! Two-layer knowledge fusion.
//!
//! The first latent layer decides, for every `(source, item, value)` triple, whether
//! the source really provides it (extraction correctness `C`). The second decides
//! the true value `V` of every data item from the sources believed to provide each
//! candidate. Source accuracies `A` and extractor precision/recall `(P, R)` are
//! re-estimated from both layers after every pass, and the false-extraction rate
//! `Q` is derived from `P` and `R` rather than estimated directly.
//!
//! Each iteration runs four barrier-separated stages: correctness per triple, value
//! per item, accuracy per source, quality per extractor. Within a stage every
//! entity is reduced sequentially in canonical order, so parallel and serial runs
//! produce bitwise-identical results.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::FusionConfig;
use crate::math::{clamp, logit, sigmoid, softmax_with_zeros};
use crate::model::{DataItem, ExtractorKey, SourceKey, Value, ValueDistribution};
use crate::single::{IterationStat, STUCK_TOL};
use crate::store::{ExtractorId, ItemId, ObservationStore, SourceId, TripleId, ValueId};

/// False-extraction rate implied by precision, recall and the provision prior `gamma`.
pub fn derive_q(precision: f64, recall: f64, gamma: f64, eps: f64) -> f64 {
    let p = clamp(precision, eps);
    let r = clamp(recall, eps);
    clamp(gamma / (1.0 - gamma) * (1.0 - p) / p * r, eps)
}

/// Precision implied by a false-extraction rate and recall; inverse of [`derive_q`].
pub fn derive_p(q: f64, recall: f64, gamma: f64, eps: f64) -> f64 {
    let q = clamp(q, eps);
    let r = clamp(recall, eps);
    clamp(1.0 / (1.0 + q * (1.0 - gamma) / (gamma * r)), eps)
}

/// Log-odds contribution of one extractor to a triple's correctness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Votes {
    /// Added when the extractor extracts the triple: `ln R - ln Q`.
    pub presence: f64,
    /// Added when it does not: `ln(1 - R) - ln(1 - Q)`.
    pub absence: f64,
}

impl Votes {
    pub fn new(recall: f64, q: f64, eps: f64) -> Self {
        let r = clamp(recall, eps);
        let q = clamp(q, eps);
        Votes {
            presence: r.ln() - q.ln(),
            absence: (1.0 - r).ln() - (1.0 - q).ln(),
        }
    }

    /// Soft vote for an extraction seen with probability `confidence`.
    #[inline]
    pub fn weighted(&self, confidence: f64) -> f64 {
        confidence * self.presence + (1.0 - confidence) * self.absence
    }
}

/// Keyed presence/absence votes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VoteWeights {
    pub pre: BTreeMap<ExtractorKey, f64>,
    pub abs: BTreeMap<ExtractorKey, f64>,
}

impl VoteWeights {
    pub fn get(&self, e: &ExtractorKey) -> Option<Votes> {
        Some(Votes {
            presence: *self.pre.get(e)?,
            absence: *self.abs.get(e)?,
        })
    }
}

/// Source accuracies and extractor qualities.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QualityParams {
    pub a: BTreeMap<SourceKey, f64>,
    pub p: BTreeMap<ExtractorKey, f64>,
    pub r: BTreeMap<ExtractorKey, f64>,
    pub q: BTreeMap<ExtractorKey, f64>,
}

pub fn compute_votes(quality: &QualityParams, eps: f64) -> VoteWeights {
    let mut out = VoteWeights::default();
    for (e, &r) in &quality.r {
        let Some(&q) = quality.q.get(e) else { continue };
        let v = Votes::new(r, q, eps);
        out.pre.insert(e.clone(), v.presence);
        out.abs.insert(e.clone(), v.absence);
    }
    out
}

/// Sum of votes over the extractors in scope; `evidence` yields each scoped
/// extractor's votes with the probability it extracted the triple (0 if it did not).
pub fn vote_count(evidence: impl IntoIterator<Item = (Votes, f64)>) -> f64 {
    evidence.into_iter().map(|(v, c)| v.weighted(c)).sum()
}

/// `sigma(vote_count + ln(alpha / (1 - alpha)))`.
pub fn correctness_posterior(vote_count: f64, alpha: f64, eps: f64) -> f64 {
    sigmoid(vote_count + logit(clamp(alpha, eps)))
}

fn effective_confidence(confidence: f64, threshold: Option<f64>) -> f64 {
    match threshold {
        Some(phi) => {
            if confidence >= phi {
                1.0
            } else {
                0.0
            }
        }
        None => confidence,
    }
}

/// Walks the scope of a triple, pairing each scoped extractor with the confidence of
/// its extraction (0 when it did not extract the triple).
fn scoped_evidence<'a>(
    store: &'a ObservationStore,
    t: TripleId,
    threshold: Option<f64>,
) -> impl Iterator<Item = (ExtractorId, f64)> + 'a {
    let extractions = store.extractions(t);
    let scope = store.scope_extractors(store.triple(t).scope);
    let mut j = 0;
    scope.iter().map(move |&e| {
        // both lists are sorted by extractor id
        while j < extractions.len() && extractions[j].extractor < e {
            j += 1;
        }
        let conf = match extractions.get(j) {
            Some(x) if x.extractor == e => x.confidence,
            _ => 0.0,
        };
        (e, effective_confidence(conf, threshold))
    })
}

/// Probability that the source of triple `t` really provides it.
///
/// Extractors in the triple's `(website, predicate)` scope that are missing from
/// `votes` contribute nothing.
pub fn extraction_posterior(
    store: &ObservationStore,
    t: TripleId,
    votes: &VoteWeights,
    alpha: f64,
    config: &FusionConfig,
) -> f64 {
    let vcc = vote_count(
        scoped_evidence(store, t, config.confidence_threshold)
            .filter_map(|(e, c)| votes.get(store.extractor(e)).map(|v| (v, c))),
    );
    correctness_posterior(vcc, alpha, config.clamp_eps)
}

fn dense_extraction_posterior(
    store: &ObservationStore,
    t: TripleId,
    votes: &[Votes],
    alpha: f64,
    config: &FusionConfig,
) -> f64 {
    let vcc = vote_count(
        scoped_evidence(store, t, config.confidence_threshold).map(|(e, c)| (votes[e.index()], c)),
    );
    correctness_posterior(vcc, alpha, config.clamp_eps)
}

/// Value posterior for one item from correctness-weighted provisions.
///
/// `provisions` lists `(value, p(C = 1), A_w)` for each source triple about the item.
/// Each adds `p(C = 1) * ln(n A_w / (1 - A_w))` to its value's score; the `n + 1 - k`
/// values with no provision score zero.
pub fn value_posterior<V: Ord + Clone>(
    provisions: &[(V, f64, f64)],
    n: usize,
    eps: f64,
) -> ValueDistribution<V> {
    let mut scores: BTreeMap<&V, f64> = BTreeMap::new();
    for (v, c, a) in provisions {
        let a = clamp(*a, eps);
        *scores.entry(v).or_insert(0.0) += c * (n as f64 * a / (1.0 - a)).ln();
    }
    let unobserved = (n + 1).saturating_sub(scores.len());
    let raw: Vec<f64> = scores.values().copied().collect();
    let (probs, residual_each) = softmax_with_zeros(&raw, unobserved);
    ValueDistribution {
        candidates: scores.keys().map(|v| (*v).clone()).zip(probs).collect(),
        unobserved,
        residual_each,
    }
}

/// Correctness prior for the next iteration: a source provides a triple if the value
/// is true and the source is accurate, or the value is false and the source is not.
pub fn update_alpha(p_value: f64, accuracy: f64, eps: f64) -> f64 {
    clamp(p_value * accuracy + (1.0 - p_value) * (1.0 - accuracy), eps)
}

/// Correctness-weighted mean truth probability of a source's triples.
///
/// Takes `(p(C = 1), p(V_d = v))` pairs; triples with zero correctness are ignored.
/// `None` when the total weight is zero.
pub fn estimate_source_accuracy(triples: &[(f64, f64)]) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for &(c, pv) in triples {
        if c > 0.0 {
            num += c * pv;
            den += c;
        }
    }
    (den > 0.0).then(|| num / den)
}

/// Precision and recall of an extractor.
///
/// `extractions` holds `(confidence, p(C = 1))` for each of its extractions with
/// positive confidence; `scope_total` is the sum of `p(C = 1)` over every triple in
/// the extractor's scope. `None` when it has no evidence.
pub fn estimate_extractor_quality(extractions: &[(f64, f64)], scope_total: f64) -> Option<(f64, f64)> {
    let mut hit = 0.0;
    let mut mass = 0.0;
    for &(conf, c) in extractions {
        if conf > 0.0 {
            hit += conf * c;
            mass += conf;
        }
    }
    if mass <= 0.0 {
        return None;
    }
    let precision = hit / mass;
    let recall = if scope_total > 0.0 { (hit / scope_total).min(1.0) } else { 0.0 };
    Some((precision, recall))
}

/// Dense parameter vectors indexed by store ids.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityState {
    pub a: Vec<f64>,
    pub p: Vec<f64>,
    pub r: Vec<f64>,
    pub q: Vec<f64>,
}

impl QualityState {
    fn initial(store: &ObservationStore, config: &FusionConfig, seed: Option<&QualityParams>) -> Self {
        let eps = config.clamp_eps;
        let a = store
            .sources()
            .iter()
            .map(|w| clamp(seed.and_then(|s| s.a.get(w).copied()).unwrap_or(config.default_a), eps))
            .collect();
        let mut p = Vec::with_capacity(store.num_extractors());
        let mut r = Vec::with_capacity(store.num_extractors());
        let mut q = Vec::with_capacity(store.num_extractors());
        for e in store.extractors() {
            let recall = clamp(
                seed.and_then(|s| s.r.get(e).copied()).unwrap_or(config.default_r),
                eps,
            );
            match seed.and_then(|s| s.p.get(e).copied()) {
                Some(prec) => {
                    let prec = clamp(prec, eps);
                    q.push(derive_q(prec, recall, config.gamma, eps));
                    p.push(prec);
                }
                None => {
                    let fq = clamp(config.default_q, eps);
                    p.push(derive_p(fq, recall, config.gamma, eps));
                    q.push(fq);
                }
            }
            r.push(recall);
        }
        QualityState { a, p, r, q }
    }

    pub fn to_params(&self, store: &ObservationStore) -> QualityParams {
        let mut out = QualityParams::default();
        for (i, w) in store.sources().iter().enumerate() {
            out.a.insert(w.clone(), self.a[i]);
        }
        for (i, e) in store.extractors().iter().enumerate() {
            out.p.insert(e.clone(), self.p[i]);
            out.r.insert(e.clone(), self.r[i]);
            out.q.insert(e.clone(), self.q[i]);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct MultiLayerResult {
    /// `p(C_wdv = 1)` per triple id.
    pub correctness: Vec<f64>,
    /// Correctness prior used in the last iteration, per triple id.
    pub alpha: Vec<f64>,
    /// Value posterior per item id.
    pub values: Vec<ValueDistribution<ValueId>>,
    pub quality: QualityState,
    /// Sources whose accuracy never left its initial value.
    pub source_stuck: Vec<bool>,
    pub extractor_stuck: Vec<bool>,
    pub iterations: Vec<IterationStat>,
    pub converged: bool,
}

impl MultiLayerResult {
    /// Whether any non-stuck source provides the candidate `(item, value)`.
    fn covered(&self, store: &ObservationStore, item: ItemId, value: ValueId) -> bool {
        store.item_triples(item).iter().any(|&t| {
            let tr = store.triple(t);
            tr.value == value && !self.source_stuck[tr.source.index()]
        })
    }

    /// `p(V_d = v)` for every covered candidate.
    pub fn candidate_probabilities(&self, store: &ObservationStore) -> BTreeMap<(DataItem, Value), f64> {
        let mut out = BTreeMap::new();
        for (i, dist) in self.values.iter().enumerate() {
            let item = ItemId(i as u32);
            for (v, p) in &dist.candidates {
                if self.covered(store, item, *v) {
                    out.insert((store.item(item).clone(), store.value(*v).clone()), *p);
                }
            }
        }
        out
    }

    /// `p(C_wdv = 1)` keyed by triple, for non-stuck sources.
    pub fn triple_probabilities(
        &self,
        store: &ObservationStore,
    ) -> BTreeMap<(SourceKey, DataItem, Value), f64> {
        store
            .triple_ids()
            .filter(|t| !self.source_stuck[store.triple(*t).source.index()])
            .map(|t| {
                let tr = store.triple(t);
                (
                    (
                        store.source(tr.source).clone(),
                        store.item(tr.item).clone(),
                        store.value(tr.value).clone(),
                    ),
                    self.correctness[t.index()],
                )
            })
            .collect()
    }

    /// Knowledge-Based Trust of every non-stuck source.
    pub fn source_accuracy(&self, store: &ObservationStore) -> BTreeMap<SourceKey, f64> {
        store
            .sources()
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.source_stuck[*i])
            .map(|(i, w)| (w.clone(), self.quality.a[i]))
            .collect()
    }

    /// Number of triples a source is believed to provide (`p(C = 1) > 0.5`).
    pub fn supported_triples(&self, store: &ObservationStore, w: SourceId) -> usize {
        store
            .source_triples(w)
            .iter()
            .filter(|t| self.correctness[t.index()] > 0.5)
            .count()
    }

    pub fn value_distribution(&self, store: &ObservationStore, d: &DataItem) -> Option<ValueDistribution<Value>> {
        let id = store.item_id(d)?;
        Some(self.values[id.index()].clone().map(|v| store.value(v).clone()))
    }
}

/// Runs the two-layer EM-style inference.
///
/// Quality starts from `initial` where given and from the configured defaults
/// elsewhere. Stops after `config.t_max` iterations or once no parameter moves by
/// `config.convergence_tol` or more.
pub fn multilayer_em(
    store: &ObservationStore,
    config: &FusionConfig,
    initial: Option<&QualityParams>,
) -> MultiLayerResult {
    let eps = config.clamp_eps;
    let mut quality = QualityState::initial(store, config, initial);
    let start = quality.clone();
    let mut alpha = vec![clamp(config.alpha0, eps); store.num_triples()];
    let mut correctness = vec![0.0; store.num_triples()];
    let mut values: Vec<ValueDistribution<ValueId>> = Vec::new();
    let mut source_moved = vec![false; store.num_sources()];
    let mut extractor_moved = vec![false; store.num_extractors()];
    let mut iterations = Vec::new();
    let mut converged = false;

    for iteration in 1..=config.t_max {
        if store.is_empty() {
            break;
        }
        let state = IterationState::run(store, config, &quality, &alpha);
        correctness = state.correctness;
        values = state.values;

        let mut max_delta: f64 = 0.0;
        for (i, &a) in state.quality.a.iter().enumerate() {
            max_delta = max_delta.max((a - quality.a[i]).abs());
            source_moved[i] |= (a - start.a[i]).abs() > STUCK_TOL;
        }
        for i in 0..store.num_extractors() {
            let (p, r) = (state.quality.p[i], state.quality.r[i]);
            max_delta = max_delta
                .max((p - quality.p[i]).abs())
                .max((r - quality.r[i]).abs());
            extractor_moved[i] |=
                (p - start.p[i]).abs() > STUCK_TOL || (r - start.r[i]).abs() > STUCK_TOL;
        }
        quality = state.quality;
        iterations.push(IterationStat {
            iteration,
            max_delta,
        });
        log::debug!("multi-layer iteration {iteration}: max |d theta| = {max_delta:e}");

        if !config.freeze_alpha && iteration + 1 >= config.prior_update_start_iter {
            alpha = store
                .triple_ids()
                .collect::<Vec<_>>()
                .par_iter()
                .map(|&t| {
                    let tr = store.triple(t);
                    let pv = values[tr.item.index()].prob(&tr.value);
                    update_alpha(pv, quality.a[tr.source.index()], eps)
                })
                .collect();
        }
        if max_delta < config.convergence_tol {
            converged = true;
            break;
        }
    }

    MultiLayerResult {
        correctness,
        alpha,
        values,
        quality,
        source_stuck: source_moved.iter().map(|m| !m).collect(),
        extractor_stuck: extractor_moved.iter().map(|m| !m).collect(),
        iterations,
        converged,
    }
}

/// Outputs of one full pass: both latent layers and the re-estimated parameters.
pub struct IterationState {
    pub correctness: Vec<f64>,
    pub values: Vec<ValueDistribution<ValueId>>,
    pub quality: QualityState,
}

impl IterationState {
    /// One pass of the four stages under the given parameters and priors.
    pub fn run(
        store: &ObservationStore,
        config: &FusionConfig,
        quality: &QualityState,
        alpha: &[f64],
    ) -> Self {
        let eps = config.clamp_eps;
        let votes: Vec<Votes> = quality
            .r
            .iter()
            .zip(&quality.q)
            .map(|(&r, &q)| Votes::new(r, q, eps))
            .collect();
        let triple_ids: Vec<TripleId> = store.triple_ids().collect();

        // Stage 1: extraction correctness.
        let correctness: Vec<f64> = triple_ids
            .par_iter()
            .map(|&t| dense_extraction_posterior(store, t, &votes, alpha[t.index()], config))
            .collect();
        let weight: Vec<f64> = if config.hard_correctness {
            correctness.iter().map(|&c| if c > 0.5 { 1.0 } else { 0.0 }).collect()
        } else {
            correctness.clone()
        };

        // Stage 2: value truth.
        let values: Vec<ValueDistribution<ValueId>> = (0..store.num_items() as u32)
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&i| {
                let provisions: Vec<(ValueId, f64, f64)> = store
                    .item_triples(ItemId(i))
                    .iter()
                    .map(|&t| {
                        let tr = store.triple(t);
                        (tr.value, weight[t.index()], quality.a[tr.source.index()])
                    })
                    .collect();
                value_posterior(&provisions, config.n_multi, eps)
            })
            .collect();

        // Stage 3: source accuracy.
        let a: Vec<f64> = (0..store.num_sources() as u32)
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&w| {
                let pairs: Vec<(f64, f64)> = store
                    .source_triples(SourceId(w))
                    .iter()
                    .map(|&t| {
                        let tr = store.triple(t);
                        (weight[t.index()], values[tr.item.index()].prob(&tr.value))
                    })
                    .collect();
                match estimate_source_accuracy(&pairs) {
                    Some(acc) => clamp(acc, eps),
                    None => quality.a[w as usize],
                }
            })
            .collect();

        // Stage 4: extractor quality.
        let scope_total: Vec<f64> = (0..store.num_scopes() as u32)
            .map(|s| {
                store
                    .scope_triples(crate::store::ScopeId(s))
                    .iter()
                    .map(|t| correctness[t.index()])
                    .sum()
            })
            .collect();
        let pr: Vec<(f64, f64)> = (0..store.num_extractors() as u32)
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&e| {
                let e = ExtractorId(e);
                let obs: Vec<(f64, f64)> = store
                    .extractor_extractions(e)
                    .iter()
                    .map(|&(t, conf)| {
                        (
                            effective_confidence(conf, config.confidence_threshold),
                            correctness[t.index()],
                        )
                    })
                    .collect();
                let total: f64 = store
                    .extractor_scopes(e)
                    .iter()
                    .map(|s| scope_total[s.index()])
                    .sum();
                match estimate_extractor_quality(&obs, total) {
                    Some((p, r)) => (clamp(p, eps), clamp(r, eps)),
                    None => (quality.p[e.index()], quality.r[e.index()]),
                }
            })
            .collect();
        let p: Vec<f64> = pr.iter().map(|x| x.0).collect();
        let r: Vec<f64> = pr.iter().map(|x| x.1).collect();
        let q = p
            .iter()
            .zip(&r)
            .map(|(&p, &r)| derive_q(p, r, config.gamma, eps))
            .collect();

        IterationState {
            correctness,
            values,
            quality: QualityState { a, p, r, q },
        }
    }
}
