//! Command-line commands: argument types, config loading and orchestration.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::FusionConfig;
use crate::error::{Error, Result};
use crate::granularity::regranulate;
use crate::io::{self as tsv, ExtractorRow, OutputSet, SourceRow};
use crate::labels::{self, GoldLabel, KbSnapshot, Label, LabelProvenance, TypeRules};
use crate::metrics::{self, EvalReport};
use crate::model::{DataItem, SourceKey, Value};
use crate::multilayer::{multilayer_em, QualityParams};
use crate::single::{single_layer_em, PairSource, SingleLayerResult, ValueModel};
use crate::store::{ingest_records, ObservationStore, RawRecord, SourceId};
use crate::synth::{self, GroundTruth, GroundTruthFile, SynthConfig};

pub const RECORDS_FILE: &str = "records.jsonl";
pub const TRUTH_FILE: &str = "truth.json";
pub const LABELS_FILE: &str = "labels.tsv";
pub const REPORT_FILE: &str = "report.txt";
pub const CALIBRATION_FILE: &str = "calibration.csv";
pub const PR_FILE: &str = "pr.csv";

#[derive(Debug, Parser)]
#[command(name = "kbtrust", version, about = "Knowledge fusion and source trustworthiness estimation")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "KBTRUST_WORKERS")]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate value truth, extraction correctness and source trust.
    Fuse(FuseArgs),
    /// Generate a synthetic corpus with ground truth.
    Synth(SynthArgs),
    /// Label candidate triples against a reference KB.
    Label(LabelArgs),
    /// Score fusion output against ground truth or labels.
    Eval(EvalArgs),
    /// Split and merge sources and extractors, writing the reattribution map.
    Granularity(GranularityArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Single,
    Popaccu,
    Multi,
    #[value(name = "multi-sm")]
    MultiSm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Init {
    #[default]
    Default,
    Gold,
}

/// Settings shared by the commands that run inference.
#[derive(Debug, Clone, Default, Args)]
pub struct TuningArgs {
    /// `key=value` config file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Iteration cap.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Number of false values per data item.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub alpha0: Option<f64>,
    /// Binarize extraction confidences at this threshold.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long = "min-size")]
    pub min_size: Option<usize>,
    #[arg(long = "max-size")]
    pub max_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Extra `key=value` settings.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl TuningArgs {
    pub fn resolve(&self) -> Result<FusionConfig> {
        let mut cfg = FusionConfig::default();
        if let Some(path) = &self.config {
            apply_config_file(&mut cfg, path)?;
        }
        if let Some(v) = self.iters {
            cfg.t_max = v;
        }
        if let Some(v) = self.n {
            cfg.n_single = v;
            cfg.n_multi = v;
        }
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = self.alpha0 {
            cfg.alpha0 = v;
        }
        if let Some(v) = self.threshold {
            cfg.confidence_threshold = Some(v);
        }
        if let Some(v) = self.min_size {
            cfg.m_min = v;
        }
        if let Some(v) = self.max_size {
            cfg.m_max = v;
        }
        if let Some(v) = self.seed {
            cfg.rng_seed = v;
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Reads `key=value` lines; blank lines and `#` comments are ignored.
pub fn apply_config_file(cfg: &mut FusionConfig, path: &Path) -> Result<()> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            msg: "expected key=value".into(),
        })?;
        cfg.set(k, v).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            msg: e.to_string(),
        })?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// Newline-delimited JSON extraction records.
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "multi")]
    pub model: Model,
    #[arg(long, value_enum, default_value = "default")]
    pub init: Init,
    /// Label file used by `--init gold`.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long = "out-dir", default_value = "out")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub tuning: TuningArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long = "out-dir", default_value = "synth")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub sources: usize,
    #[arg(long, default_value_t = 5)]
    pub extractors: usize,
    /// Triples per source (also the number of data items).
    #[arg(long, default_value_t = 100)]
    pub triples: usize,
    #[arg(long, default_value_t = 0.7)]
    pub accuracy: f64,
    /// Probability an extractor covers a given source.
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.5)]
    pub recall: f64,
    /// Probability each of subject, predicate and object is extracted correctly.
    #[arg(long = "p-component", default_value_t = 0.8)]
    pub p_component: f64,
    /// False values per data item.
    #[arg(long, default_value_t = 10)]
    pub n: usize,
}

impl SynthArgs {
    pub fn to_config(&self) -> SynthConfig {
        SynthConfig {
            n_sources: self.sources,
            n_extractors: self.extractors,
            triples_per_source: self.triples,
            accuracy: self.accuracy,
            delta: self.delta,
            recall: self.recall,
            p_component: self.p_component,
            domain_size: self.n,
            seed: self.seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    /// Newline-delimited JSON extraction records.
    pub input: PathBuf,
    /// Reference KB as `subject<TAB>predicate<TAB>object` lines.
    #[arg(long)]
    pub kb: PathBuf,
    /// JSON type rules.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    #[arg(long = "out-dir", default_value = "labels")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory written by `fuse`.
    pub predictions: PathBuf,
    /// Ground-truth sidecar written by `synth`.
    #[arg(long, conflicts_with = "labels", required_unless_present = "labels")]
    pub truth: Option<PathBuf>,
    /// Label file written by `label`.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Report directory (defaults to the predictions directory).
    #[arg(long = "out-dir")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GranularityArgs {
    pub input: PathBuf,
    #[arg(long = "out-dir", default_value = "granularity")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub tuning: TuningArgs,
}

/// Runs a parsed command line inside a pool of the requested size.
pub fn run(cli: Cli) -> Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(Error::Usage("--workers must be positive".into()));
        }
        pool = pool.num_threads(w);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Usage(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Fuse(a) => fuse(&a),
        Command::Synth(a) => synth_cmd(&a),
        Command::Label(a) => label(&a),
        Command::Eval(a) => eval(&a),
        Command::Granularity(a) => granularity(&a),
    })
}

pub fn load_store(path: &Path) -> Result<ObservationStore> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let outcome = ingest_records(BufReader::new(file)).map_err(|e| Error::io(path, e))?;
    for r in &outcome.rejected {
        log::warn!("{}:{}: skipped record: {}", path.display(), r.line, r.message);
    }
    if outcome.accepted == 0 && !outcome.rejected.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: outcome.rejected[0].line,
            msg: format!("no valid records ({} rejected)", outcome.rejected.len()),
        });
    }
    log::info!(
        "{}: {} records, {} sources, {} extractors, {} items",
        path.display(),
        outcome.accepted,
        outcome.store.num_sources(),
        outcome.store.num_extractors(),
        outcome.store.num_items()
    );
    Ok(outcome.store)
}

fn load_labels(path: &Path) -> Result<BTreeMap<(DataItem, Value), GoldLabel>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    labels::read_labels(BufReader::new(file), path)
}

fn load_truth(path: &Path) -> Result<GroundTruth> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str::<GroundTruthFile>(&text)?.into())
}

/// Fraction true among labelled keys, per group.
fn gold_fraction<K: Ord>(pairs: impl IntoIterator<Item = (K, f64)>) -> BTreeMap<K, f64> {
    let mut acc: BTreeMap<K, (f64, usize)> = BTreeMap::new();
    for (k, t) in pairs {
        let e = acc.entry(k).or_default();
        e.0 += t;
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

/// Initial accuracies and precisions from labelled triples; unlabelled entities keep defaults.
pub fn gold_quality(store: &ObservationStore, truth: &BTreeMap<(DataItem, Value), f64>) -> QualityParams {
    let label = |t: crate::store::TripleId| {
        let tr = store.triple(t);
        truth
            .get(&(store.item(tr.item).clone(), store.value(tr.value).clone()))
            .copied()
    };
    let a = gold_fraction(store.triple_ids().filter_map(|t| {
        label(t).map(|l| (store.source(store.triple(t).source).clone(), l))
    }));
    let p = gold_fraction(store.triple_ids().flat_map(|t| {
        let l = label(t);
        store
            .extractions(t)
            .iter()
            .filter_map(move |x| l.map(|l| (store.extractor(x.extractor).clone(), l)))
    }));
    QualityParams {
        a,
        p,
        ..Default::default()
    }
}

pub fn gold_pair_accuracy(
    store: &ObservationStore,
    truth: &BTreeMap<(DataItem, Value), f64>,
) -> BTreeMap<PairSource, f64> {
    gold_fraction(store.triple_ids().flat_map(|t| {
        let tr = store.triple(t);
        let l = truth
            .get(&(store.item(tr.item).clone(), store.value(tr.value).clone()))
            .copied();
        store.extractions(t).iter().filter_map(move |x| {
            l.map(|l| {
                (
                    PairSource {
                        source: store.source(tr.source).clone(),
                        extractor: store.extractor(x.extractor).clone(),
                    },
                    l,
                )
            })
        })
    }))
}

fn values_with_na(store: &ObservationStore, covered: &BTreeMap<(DataItem, Value), f64>) -> BTreeMap<(DataItem, Value), Option<f64>> {
    SingleLayerResult::all_candidates(store)
        .into_iter()
        .map(|k| {
            let p = covered.get(&k).copied();
            (k, p)
        })
        .collect()
}

/// Every output file of `fuse`, keyed by file name.
pub fn fuse_outputs(
    store: &ObservationStore,
    model: Model,
    config: &FusionConfig,
    gold: Option<&BTreeMap<(DataItem, Value), f64>>,
) -> Vec<(&'static str, String)> {
    let mut files = Vec::new();
    match model {
        Model::Single | Model::Popaccu => {
            let value_model = if model == Model::Single { ValueModel::Accu } else { ValueModel::PopAccu };
            let init = gold.map(|g| gold_pair_accuracy(store, g));
            let result = single_layer_em(store, config, init.as_ref(), value_model);
            let covered = result.candidate_probabilities(store);
            let web = result.web_source_accuracy(store);
            let rows: Vec<SourceRow> = (0..store.num_sources() as u32)
                .map(|s| {
                    let w = store.source(SourceId(s));
                    let triples = store.source_triples(SourceId(s));
                    let supported = triples
                        .iter()
                        .filter(|t| {
                            let tr = store.triple(**t);
                            result.posteriors[tr.item.index()]
                                .as_ref()
                                .is_some_and(|d| d.prob(&tr.value) > 0.5)
                        })
                        .count();
                    SourceRow {
                        source: w.clone(),
                        accuracy: web.get(w).copied(),
                        supported_triples: supported,
                        triples: triples.len(),
                    }
                })
                .collect();
            files.push((tsv::SOURCES_FILE, tsv::sources_tsv(&rows)));
            files.push((tsv::VALUES_FILE, tsv::values_tsv(&values_with_na(store, &covered))));
            files.push((tsv::PAIR_SOURCES_FILE, tsv::pair_sources_tsv(&result.accuracies)));
            let name = if model == Model::Single { "single" } else { "popaccu" };
            files.push((
                tsv::ITERATIONS_FILE,
                tsv::iterations_log(name, &result.iterations, result.converged),
            ));
        }
        Model::Multi | Model::MultiSm => {
            let init = gold.map(|g| gold_quality(store, g));
            let result = multilayer_em(store, config, init.as_ref());
            let covered = result.candidate_probabilities(store);
            let rows: Vec<SourceRow> = (0..store.num_sources() as u32)
                .map(|s| {
                    let id = SourceId(s);
                    SourceRow {
                        source: store.source(id).clone(),
                        accuracy: (!result.source_stuck[s as usize]).then(|| result.quality.a[s as usize]),
                        supported_triples: result.supported_triples(store, id),
                        triples: store.source_triples(id).len(),
                    }
                })
                .collect();
            let extractors: Vec<ExtractorRow> = store
                .extractors()
                .iter()
                .enumerate()
                .map(|(i, e)| ExtractorRow {
                    extractor: e.clone(),
                    precision: result.quality.p[i],
                    recall: result.quality.r[i],
                    q: result.quality.q[i],
                    extractions: store.extractor_extractions(crate::store::ExtractorId(i as u32)).len(),
                })
                .collect();
            files.push((tsv::SOURCES_FILE, tsv::sources_tsv(&rows)));
            files.push((tsv::VALUES_FILE, tsv::values_tsv(&values_with_na(store, &covered))));
            files.push((tsv::EXTRACTIONS_FILE, tsv::extractions_tsv(&result.triple_probabilities(store))));
            files.push((tsv::EXTRACTORS_FILE, tsv::extractors_tsv(&extractors)));
            let name = if model == Model::Multi { "multi" } else { "multi-sm" };
            files.push((
                tsv::ITERATIONS_FILE,
                tsv::iterations_log(name, &result.iterations, result.converged),
            ));
        }
    }
    files
}

fn fuse(args: &FuseArgs) -> Result<()> {
    let config = args.tuning.resolve()?;
    let gold = match (args.init, &args.labels) {
        (Init::Gold, Some(path)) => Some(labels::truth_map(&load_labels(path)?)),
        (Init::Gold, None) => return Err(Error::Usage("--init gold requires --labels".into())),
        (Init::Default, _) => None,
    };
    let store = load_store(&args.input)?;
    let mut out = OutputSet::new(&args.out_dir);
    let store = if args.model == Model::MultiSm {
        let (regranulated, reattribution) = regranulate(&store, config.m_min, config.m_max, config.rng_seed);
        log::info!(
            "split and merge: {} -> {} sources, {} -> {} extractors",
            store.num_sources(),
            regranulated.num_sources(),
            store.num_extractors(),
            regranulated.num_extractors()
        );
        out.add(tsv::REATTRIBUTION_FILE, tsv::reattribution_tsv(&reattribution));
        regranulated
    } else {
        store
    };
    for (name, contents) in fuse_outputs(&store, args.model, &config, gold.as_ref()) {
        out.add(name, contents);
    }
    out.commit()?;
    Ok(())
}

fn synth_cmd(args: &SynthArgs) -> Result<()> {
    let cfg = args.to_config();
    cfg.validate()?;
    let (records, truth) = synth::generate(&cfg);
    let mut jsonl = String::new();
    for r in &records {
        jsonl.push_str(&serde_json::to_string(&RawRecord::from_record(r))?);
        jsonl.push('\n');
    }
    let mut out = OutputSet::new(&args.out_dir);
    out.add(RECORDS_FILE, jsonl);
    out.add(TRUTH_FILE, serde_json::to_string_pretty(&GroundTruthFile::from(&truth))? + "\n");
    out.commit()?;
    Ok(())
}

fn label(args: &LabelArgs) -> Result<()> {
    let store = load_store(&args.input)?;
    let kb_file = File::open(&args.kb).map_err(|e| Error::io(&args.kb, e))?;
    let kb = KbSnapshot::read_tsv(BufReader::new(kb_file), &args.kb)?;
    let rules = match &args.rules {
        Some(p) => TypeRules::from_json(&fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?,
        None => TypeRules::default(),
    };
    let candidates = SingleLayerResult::all_candidates(&store);
    let iter = || candidates.iter().map(|(d, v)| (d, v));
    let merged = labels::merge_labels(labels::label_lcwa(iter(), &kb), labels::label_typecheck(iter(), &rules));
    let mut out = OutputSet::new(&args.out_dir);
    out.add(LABELS_FILE, labels::write_labels(merged.values()));
    out.commit()?;
    Ok(())
}

fn read_optional<T>(path: &Path, read: impl FnOnce(BufReader<File>, &Path) -> Result<T>) -> Result<Option<T>> {
    match File::open(path) {
        Ok(f) => read(BufReader::new(f), path).map(Some),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::io(path, e)),
    }
}

/// Metrics for a `fuse` output directory.
pub fn evaluate_dir(dir: &Path, truth: Option<&GroundTruth>, gold: Option<&BTreeMap<(DataItem, Value), GoldLabel>>) -> Result<EvalReport> {
    let values_path = dir.join(tsv::VALUES_FILE);
    let values = read_optional(&values_path, tsv::read_values)?
        .ok_or_else(|| Error::Usage(format!("{} not found", values_path.display())))?;
    let extractions = read_optional(&dir.join(tsv::EXTRACTIONS_FILE), tsv::read_extractions)?;
    let sources = read_optional(&dir.join(tsv::SOURCES_FILE), tsv::read_sources)?;

    let predicted: BTreeMap<(DataItem, Value), f64> =
        values.iter().filter_map(|(k, p)| p.map(|p| (k.clone(), p))).collect();
    let value_truth: BTreeMap<(DataItem, Value), f64> = match (truth, gold) {
        (Some(t), _) => t.value_truth(values.keys()),
        (None, Some(g)) => labels::truth_map(g),
        (None, None) => return Err(Error::Usage("eval needs --truth or --labels".into())),
    };
    let mut report = EvalReport::for_values(&predicted, &value_truth, values.len());

    if let Some(ext) = &extractions {
        let triple_truth: BTreeMap<(SourceKey, DataItem, Value), f64> = match (truth, gold) {
            (Some(t), _) => ext.keys().map(|(w, d, v)| ((w.clone(), d.clone(), v.clone()), t.provision_label(w, d, v))).collect(),
            // Type-check failures are extraction mistakes whichever source they came from.
            (None, Some(g)) => ext
                .keys()
                .filter(|(_, d, v)| {
                    g.get(&(d.clone(), v.clone()))
                        .is_some_and(|l| l.label == Label::False && l.provenance == LabelProvenance::Typecheck)
                })
                .map(|k| (k.clone(), 0.0))
                .collect(),
            (None, None) => BTreeMap::new(),
        };
        report.sqc = metrics::square_loss(ext, &triple_truth);
    }
    if let (Some(src), Some(t)) = (&sources, truth) {
        let predicted: BTreeMap<SourceKey, f64> =
            src.iter().filter_map(|(k, a)| a.map(|a| (k.clone(), a))).collect();
        report.sqa = metrics::square_loss(&predicted, &t.true_a);
    }
    Ok(report)
}

fn eval(args: &EvalArgs) -> Result<()> {
    let truth = args.truth.as_deref().map(load_truth).transpose()?;
    let gold = args.labels.as_deref().map(load_labels).transpose()?;
    let report = evaluate_dir(&args.predictions, truth.as_ref(), gold.as_ref())?;
    let mut out = OutputSet::new(args.out_dir.as_ref().unwrap_or(&args.predictions));
    out.add(REPORT_FILE, report.to_text());
    out.add(CALIBRATION_FILE, report.calibration_csv());
    out.add(PR_FILE, report.pr_csv());
    out.commit()?;
    print!("{}", report.to_text());
    Ok(())
}

fn granularity(args: &GranularityArgs) -> Result<()> {
    let config = args.tuning.resolve()?;
    let store = load_store(&args.input)?;
    let (regranulated, reattribution) = regranulate(&store, config.m_min, config.m_max, config.rng_seed);
    let mut summary = String::from("kind\tkey\ttriples\n");
    for (i, w) in regranulated.sources().iter().enumerate() {
        summary.push_str(&format!(
            "source\t{}\t{}\n",
            tsv::escape(&w.to_string()),
            regranulated.source_triples(SourceId(i as u32)).len()
        ));
    }
    for (i, e) in regranulated.extractors().iter().enumerate() {
        summary.push_str(&format!(
            "extractor\t{}\t{}\n",
            tsv::escape(&e.to_string()),
            regranulated
                .extractor_extractions(crate::store::ExtractorId(i as u32))
                .len()
        ));
    }
    let mut out = OutputSet::new(&args.out_dir);
    out.add(tsv::REATTRIBUTION_FILE, tsv::reattribution_tsv(&reattribution));
    out.add("final.tsv", summary);
    out.commit()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.conf");
        fs::write(&path, "# comment\ngamma=0.3\nt_max = 7\nthreshold=0.5\n").unwrap();
        let args = TuningArgs {
            config: Some(path),
            iters: Some(3),
            ..Default::default()
        };
        let cfg = args.resolve().unwrap();
        assert_eq!(cfg.gamma, 0.3);
        assert_eq!(cfg.t_max, 3);
        assert_eq!(cfg.confidence_threshold, Some(0.5));
    }

    #[test]
    fn bad_config_line_reports_location() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.conf");
        fs::write(&path, "gamma=0.3\nnonsense\n").unwrap();
        let err = TuningArgs {
            config: Some(path),
            ..Default::default()
        }
        .resolve()
        .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn gold_fraction_per_group() {
        let f = gold_fraction([("a", 1.0), ("a", 0.0), ("b", 1.0)]);
        assert_eq!(f["a"], 0.5);
        assert_eq!(f["b"], 1.0);
    }
}
