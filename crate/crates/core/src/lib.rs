//! Knowledge fusion over noisy web extractions.
//!
//! Given `(extractor, source, subject, predicate, object, confidence)` observations,
//! this crate jointly estimates whether each source really provides each extracted
//! triple, which value of each data item is true, how precise and complete each
//! extractor is, and how accurate each web source is (its Knowledge-Based Trust).
//!
//! The main entry points are:
//!
//! * [`store::ObservationStore`] built with [`store::ingest_records`] or
//!   [`store::StoreBuilder`],
//! * [`multilayer::multilayer_em`] for the two-layer model,
//! * [`single::single_layer_em`] for the (source, extractor)-pair baseline,
//! * [`granularity::split_and_merge`] for source and extractor granularity control,
//! * [`synth::generate`] for controlled synthetic experiments,
//! * [`metrics`] for square losses, calibration deviation, AUC-PR and coverage.

pub mod config;
pub mod error;
pub mod granularity;
pub mod io;
pub mod labels;
pub mod math;
pub mod metrics;
pub mod model;
pub mod multilayer;
pub mod pipeline;
pub mod single;
pub mod store;
pub mod synth;

pub use config::FusionConfig;
pub use error::{Error, Result};
pub use model::{DataItem, ExtractionRecord, ExtractorKey, SourceKey, Value};
pub use store::ObservationStore;
