//! Domain keys and the extraction record.

use std::fmt;
use std::sync::OnceLock;

use chrono::NaiveDate;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A `(subject, predicate)` pair: one attribute of one entity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DataItem {
    pub subject: String,
    pub predicate: String,
}

impl DataItem {
    pub fn new(subject: impl Into<String>, predicate: impl Into<String>) -> Result<Self> {
        let item = DataItem {
            subject: subject.into(),
            predicate: predicate.into(),
        };
        if item.subject.is_empty() || item.predicate.is_empty() {
            return Err(Error::InvalidRecord(
                "data item subject and predicate must be non-empty".into(),
            ));
        }
        Ok(item)
    }
}

impl fmt::Display for DataItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.subject, self.predicate)
    }
}

/// The object of a triple, serialized canonically.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Value(String);

impl Value {
    /// Wraps a string after canonicalising numbers and dates.
    pub fn new(raw: impl AsRef<str>) -> Result<Self> {
        let raw = raw.as_ref();
        if raw.is_empty() {
            return Err(Error::InvalidRecord("value must be non-empty".into()));
        }
        Ok(Value(canonical_value(raw)))
    }

    /// Canonical value from a JSON scalar: strings, numbers and booleans are accepted.
    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        match v {
            serde_json::Value::String(s) => Value::new(s),
            serde_json::Value::Number(n) => {
                if let Some(i) = n.as_i64() {
                    Ok(Value(i.to_string()))
                } else if let Some(u) = n.as_u64() {
                    Ok(Value(u.to_string()))
                } else {
                    let f = n.as_f64().ok_or_else(|| {
                        Error::InvalidRecord(format!("unrepresentable number {n}"))
                    })?;
                    Ok(Value(render_number(f)))
                }
            }
            serde_json::Value::Bool(b) => Ok(Value(b.to_string())),
            other => Err(Error::InvalidRecord(format!(
                "object must be a string or number, got {other}"
            ))),
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn render_number(f: f64) -> String {
    if f == 0.0 {
        // folds -0
        return "0".to_string();
    }
    // `Display` for f64 is the shortest round-trip form: no trailing zeros.
    format!("{f}")
}

fn canonical_value(raw: &str) -> String {
    static NUMERIC: OnceLock<Regex> = OnceLock::new();
    let numeric = NUMERIC.get_or_init(|| {
        Regex::new(r"^[+-]?(0|[1-9][0-9]*)(\.[0-9]+)?([eE][+-]?[0-9]+)?$").unwrap()
    });
    if numeric.is_match(raw) {
        if let Ok(f) = raw.parse::<f64>() {
            if f.is_finite() {
                return render_number(f);
            }
        }
    }
    for fmt in ["%Y-%m-%d", "%Y/%m/%d", "%B %d, %Y", "%d %B %Y"] {
        if let Ok(date) = NaiveDate::parse_from_str(raw, fmt) {
            return date.format("%Y-%m-%d").to_string();
        }
    }
    raw.to_string()
}

/// A web source at one level of the `<website, predicate, webpage>` hierarchy.
///
/// `bucket` is set on sub-sources produced by splitting an oversized source.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SourceKey {
    pub website: String,
    pub predicate: Option<String>,
    pub webpage: Option<String>,
    pub bucket: Option<u32>,
}

impl SourceKey {
    pub fn website(website: impl Into<String>) -> Self {
        SourceKey {
            website: website.into(),
            predicate: None,
            webpage: None,
            bucket: None,
        }
    }

    pub fn new(
        website: impl Into<String>,
        predicate: Option<String>,
        webpage: Option<String>,
    ) -> Result<Self> {
        let key = SourceKey {
            website: website.into(),
            predicate,
            webpage,
            bucket: None,
        };
        key.validate()?;
        Ok(key)
    }

    pub fn validate(&self) -> Result<()> {
        if self.website.is_empty() {
            return Err(Error::InvalidRecord("source website must be non-empty".into()));
        }
        if self.webpage.is_some() && self.predicate.is_none() {
            return Err(Error::InvalidRecord(
                "source webpage given without source predicate".into(),
            ));
        }
        if matches!(self.predicate.as_deref(), Some("")) || matches!(self.webpage.as_deref(), Some(""))
        {
            return Err(Error::InvalidRecord("empty source feature".into()));
        }
        Ok(())
    }
}

impl fmt::Display for SourceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.website)?;
        for part in [&self.predicate, &self.webpage].into_iter().flatten() {
            write!(f, "|{part}")?;
        }
        if let Some(b) = self.bucket {
            write!(f, "#{b}")?;
        }
        Ok(())
    }
}

/// An extractor at one level of the `<extractor, pattern, predicate, website>` hierarchy.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ExtractorKey {
    pub extractor: String,
    pub pattern: Option<String>,
    pub predicate: Option<String>,
    pub website: Option<String>,
    pub bucket: Option<u32>,
}

impl ExtractorKey {
    pub fn named(extractor: impl Into<String>) -> Self {
        ExtractorKey {
            extractor: extractor.into(),
            pattern: None,
            predicate: None,
            website: None,
            bucket: None,
        }
    }

    pub fn new(
        extractor: impl Into<String>,
        pattern: Option<String>,
        predicate: Option<String>,
        website: Option<String>,
    ) -> Result<Self> {
        let key = ExtractorKey {
            extractor: extractor.into(),
            pattern,
            predicate,
            website,
            bucket: None,
        };
        key.validate()?;
        Ok(key)
    }

    pub fn validate(&self) -> Result<()> {
        if self.extractor.is_empty() {
            return Err(Error::InvalidRecord("extractor name must be non-empty".into()));
        }
        let features = [&self.pattern, &self.predicate, &self.website];
        let mut seen_gap = false;
        for feat in features {
            match feat.as_deref() {
                None => seen_gap = true,
                Some("") => return Err(Error::InvalidRecord("empty extractor feature".into())),
                Some(_) if seen_gap => {
                    return Err(Error::InvalidRecord(
                        "extractor features must be set from most general to most specific"
                            .into(),
                    ))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }
}

impl fmt::Display for ExtractorKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.extractor)?;
        for part in [&self.pattern, &self.predicate, &self.website]
            .into_iter()
            .flatten()
        {
            write!(f, "|{part}")?;
        }
        if let Some(b) = self.bucket {
            write!(f, "#{b}")?;
        }
        Ok(())
    }
}

/// One observation: extractor `e` extracted value `v` for item `d` from source `w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionRecord {
    pub extractor: ExtractorKey,
    pub source: SourceKey,
    pub item: DataItem,
    pub value: Value,
    pub confidence: f64,
}

impl ExtractionRecord {
    pub fn new(
        extractor: ExtractorKey,
        source: SourceKey,
        item: DataItem,
        value: Value,
        confidence: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::ConfidenceRange(confidence));
        }
        extractor.validate()?;
        source.validate()?;
        Ok(ExtractionRecord {
            extractor,
            source,
            item,
            value,
            confidence,
        })
    }
}

/// Posterior over the `n + 1` values of a data item's domain.
///
/// Observed candidates carry explicit probabilities; each of the `unobserved`
/// remaining domain values carries `residual_each`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueDistribution<V> {
    pub candidates: Vec<(V, f64)>,
    pub unobserved: usize,
    pub residual_each: f64,
}

impl<V: PartialEq> ValueDistribution<V> {
    /// Uniform distribution over a domain of `domain` values with no observations.
    pub fn uniform(domain: usize) -> Self {
        ValueDistribution {
            candidates: Vec::new(),
            unobserved: domain,
            residual_each: 1.0 / domain as f64,
        }
    }

    pub fn prob(&self, v: &V) -> f64 {
        self.candidates
            .iter()
            .find(|(c, _)| c == v)
            .map(|(_, p)| *p)
            .unwrap_or(self.residual_each)
    }

    pub fn total(&self) -> f64 {
        self.candidates.iter().map(|(_, p)| p).sum::<f64>()
            + self.unobserved as f64 * self.residual_each
    }

    /// Most probable observed candidate.
    pub fn map_value(&self) -> Option<&V> {
        self.candidates
            .iter()
            .fold(None::<&(V, f64)>, |best, c| match best {
                Some(b) if b.1 >= c.1 => Some(b),
                _ => Some(c),
            })
            .map(|(v, _)| v)
    }

    pub fn map<W>(self, mut f: impl FnMut(V) -> W) -> ValueDistribution<W> {
        ValueDistribution {
            candidates: self.candidates.into_iter().map(|(v, p)| (f(v), p)).collect(),
            unobserved: self.unobserved,
            residual_each: self.residual_each,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_are_rendered_without_trailing_zeros() {
        assert_eq!(Value::new("1.50").unwrap().as_str(), "1.5");
        assert_eq!(Value::new("2.0").unwrap().as_str(), "2");
        assert_eq!(Value::new("-0.0").unwrap().as_str(), "0");
        assert_eq!(
            Value::from_json(&serde_json::json!(3.250)).unwrap().as_str(),
            "3.25"
        );
        assert_eq!(Value::from_json(&serde_json::json!(42)).unwrap().as_str(), "42");
        // leading zeros are identifiers, not numbers
        assert_eq!(Value::new("007").unwrap().as_str(), "007");
    }

    #[test]
    fn dates_become_iso() {
        assert_eq!(Value::new("1961/08/04").unwrap().as_str(), "1961-08-04");
        assert_eq!(Value::new("August 4, 1961").unwrap().as_str(), "1961-08-04");
        assert_eq!(Value::new("1961-08-04").unwrap().as_str(), "1961-08-04");
    }

    #[test]
    fn empty_fields_are_rejected() {
        assert!(Value::new("").is_err());
        assert!(DataItem::new("", "p").is_err());
        assert!(SourceKey::new("", None, None).is_err());
    }

    #[test]
    fn specificity_must_be_prefix_ordered() {
        assert!(SourceKey::new("a.com", None, Some("a.com/x".into())).is_err());
        assert!(SourceKey::new("a.com", Some("p".into()), Some("a.com/x".into())).is_ok());
        assert!(ExtractorKey::new("e", None, Some("p".into()), None).is_err());
        assert!(ExtractorKey::new("e", Some("pat".into()), Some("p".into()), None).is_ok());
    }

    #[test]
    fn key_display() {
        let mut k = SourceKey::new("wiki.com", Some("dob".into()), Some("wiki.com/p1".into())).unwrap();
        assert_eq!(k.to_string(), "wiki.com|dob|wiki.com/p1");
        k.bucket = Some(3);
        assert_eq!(k.to_string(), "wiki.com|dob|wiki.com/p1#3");
        assert_eq!(ExtractorKey::named("E1").to_string(), "E1");
    }

    #[test]
    fn record_confidence_range() {
        let r = ExtractionRecord::new(
            ExtractorKey::named("e"),
            SourceKey::website("w"),
            DataItem::new("s", "p").unwrap(),
            Value::new("o").unwrap(),
            1.3,
        );
        assert!(matches!(r, Err(Error::ConfidenceRange(_))));
    }
}
