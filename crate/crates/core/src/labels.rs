//! Gold-standard labelling: local-closed-world labelling against a reference KB and
//! declarative per-predicate type checks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DataItem, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    True,
    False,
    Unknown,
}

impl Label {
    /// Numeric truth for metrics; `None` for unknown.
    pub fn as_truth(self) -> Option<f64> {
        match self {
            Label::True => Some(1.0),
            Label::False => Some(0.0),
            Label::Unknown => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelProvenance {
    Kb,
    Lcwa,
    Typecheck,
    Manual,
}

macro_rules! text_enum {
    ($ty:ident { $($variant:ident => $text:literal),* $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $text),* })
            }
        }
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s.to_ascii_lowercase().as_str() {
                    $($text => Ok($ty::$variant),)*
                    other => Err(format!("unknown {}: {other:?}", stringify!($ty))),
                }
            }
        }
    };
}

text_enum!(Label { True => "true", False => "false", Unknown => "unknown" });
text_enum!(LabelProvenance { Kb => "kb", Lcwa => "lcwa", Typecheck => "typecheck", Manual => "manual" });

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GoldLabel {
    pub item: DataItem,
    pub value: Value,
    pub label: Label,
    pub provenance: LabelProvenance,
}

/// Reference triples with an `(s, p) -> {o}` index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KbSnapshot {
    index_sp: BTreeMap<DataItem, BTreeSet<Value>>,
}

impl KbSnapshot {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, item: DataItem, value: Value) {
        self.index_sp.entry(item).or_default().insert(value);
    }

    pub fn contains(&self, item: &DataItem, value: &Value) -> bool {
        self.index_sp.get(item).is_some_and(|vs| vs.contains(value))
    }

    pub fn objects(&self, item: &DataItem) -> Option<&BTreeSet<Value>> {
        self.index_sp.get(item)
    }

    pub fn len(&self) -> usize {
        self.index_sp.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.index_sp.is_empty()
    }

    pub fn triples(&self) -> impl Iterator<Item = (&DataItem, &Value)> {
        self.index_sp.iter().flat_map(|(d, vs)| vs.iter().map(move |v| (d, v)))
    }

    /// Reads `subject<TAB>predicate<TAB>object` lines; blank lines and `#` comments are skipped.
    pub fn read_tsv<R: BufRead>(reader: R, path: &Path) -> Result<Self> {
        let mut kb = KbSnapshot::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |msg: String| Error::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                msg,
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(parse_err(format!("expected 3 fields, found {}", fields.len())));
            }
            let item = DataItem::new(fields[0], fields[1]).map_err(|e| parse_err(e.to_string()))?;
            let value = Value::new(fields[2]).map_err(|e| parse_err(e.to_string()))?;
            kb.insert(item, value);
        }
        Ok(kb)
    }
}

impl FromIterator<(DataItem, Value)> for KbSnapshot {
    fn from_iter<I: IntoIterator<Item = (DataItem, Value)>>(iter: I) -> Self {
        let mut kb = KbSnapshot::new();
        for (d, v) in iter {
            kb.insert(d, v);
        }
        kb
    }
}

/// True if in the KB, false if the KB knows the item with other objects, unknown otherwise.
pub fn label_lcwa<'a>(
    triples: impl IntoIterator<Item = (&'a DataItem, &'a Value)>,
    kb: &KbSnapshot,
) -> Vec<GoldLabel> {
    triples
        .into_iter()
        .map(|(d, v)| {
            let (label, provenance) = match kb.objects(d) {
                Some(objs) if objs.contains(v) => (Label::True, LabelProvenance::Kb),
                Some(_) => (Label::False, LabelProvenance::Lcwa),
                None => (Label::Unknown, LabelProvenance::Lcwa),
            };
            GoldLabel {
                item: d.clone(),
                value: v.clone(),
                label,
                provenance,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Position {
    Subject,
    Object,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum TypeCheck {
    ReflexivityForbidden,
    TypeConstraint {
        position: Position,
        #[serde(rename = "type")]
        type_tag: String,
    },
    NumericRange {
        lo: f64,
        hi: f64,
        #[serde(default)]
        units: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeRule {
    pub predicate: String,
    pub checks: Vec<TypeCheck>,
}

/// Rules plus the entity type tags the type constraints consult.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TypeRules {
    pub rules: Vec<TypeRule>,
    #[serde(default)]
    pub entity_types: BTreeMap<String, BTreeSet<String>>,
}

impl TypeRules {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Whether `(d, v)` breaks any rule for its predicate.
    ///
    /// Type constraints only fire for entities with known tags. Numeric ranges on a
    /// non-numeric object are skipped with a warning.
    pub fn violates(&self, d: &DataItem, v: &Value) -> bool {
        self.rules
            .iter()
            .filter(|r| r.predicate == d.predicate)
            .flat_map(|r| &r.checks)
            .any(|check| match check {
                TypeCheck::ReflexivityForbidden => d.subject == v.as_str(),
                TypeCheck::TypeConstraint { position, type_tag } => {
                    let entity = match position {
                        Position::Subject => d.subject.as_str(),
                        Position::Object => v.as_str(),
                    };
                    self.entity_types
                        .get(entity)
                        .is_some_and(|tags| !tags.contains(type_tag))
                }
                TypeCheck::NumericRange { lo, hi, .. } => match v.as_str().parse::<f64>() {
                    Ok(x) => !(x >= *lo && x <= *hi),
                    Err(_) => {
                        log::warn!("numeric range on {}: non-numeric object {:?}, rule skipped", d, v.as_str());
                        false
                    }
                },
            })
    }
}

/// False labels for rule violations; nothing is emitted for passing triples.
pub fn label_typecheck<'a>(
    triples: impl IntoIterator<Item = (&'a DataItem, &'a Value)>,
    rules: &TypeRules,
) -> Vec<GoldLabel> {
    triples
        .into_iter()
        .filter(|(d, v)| rules.violates(d, v))
        .map(|(d, v)| GoldLabel {
            item: d.clone(),
            value: v.clone(),
            label: Label::False,
            provenance: LabelProvenance::Typecheck,
        })
        .collect()
}

/// LCWA labels with type-check failures overriding them. One label per triple.
pub fn merge_labels(lcwa: Vec<GoldLabel>, typecheck: Vec<GoldLabel>) -> BTreeMap<(DataItem, Value), GoldLabel> {
    let mut out = BTreeMap::new();
    for l in lcwa.into_iter().chain(typecheck) {
        out.insert((l.item.clone(), l.value.clone()), l);
    }
    out
}

/// Metric truth from labels; unknown labels are dropped.
pub fn truth_map(labels: &BTreeMap<(DataItem, Value), GoldLabel>) -> BTreeMap<(DataItem, Value), f64> {
    labels
        .iter()
        .filter_map(|(k, l)| l.label.as_truth().map(|t| (k.clone(), t)))
        .collect()
}

/// Header of the label TSV.
pub const LABEL_HEADER: &str = "subject\tpredicate\tobject\tlabel\tprovenance";

pub fn write_labels<'a>(labels: impl IntoIterator<Item = &'a GoldLabel>) -> String {
    let mut s = String::from(LABEL_HEADER);
    s.push('\n');
    for l in labels {
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            crate::io::escape(&l.item.subject),
            crate::io::escape(&l.item.predicate),
            crate::io::escape(l.value.as_str()),
            l.label,
            l.provenance
        ));
    }
    s
}

/// Reads the label TSV. A missing provenance column means `manual`.
pub fn read_labels<R: BufRead>(reader: R, path: &Path) -> Result<BTreeMap<(DataItem, Value), GoldLabel>> {
    let mut out = BTreeMap::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() || line.starts_with('#') || (n == 0 && line.starts_with("subject\t")) {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            msg,
        };
        let fields: Vec<String> = line.split('\t').map(crate::io::unescape).collect();
        if !(4..=5).contains(&fields.len()) {
            return Err(parse_err(format!("expected 4 or 5 fields, found {}", fields.len())));
        }
        let item = DataItem::new(&fields[0], &fields[1]).map_err(|e| parse_err(e.to_string()))?;
        let value = Value::new(&fields[2]).map_err(|e| parse_err(e.to_string()))?;
        let label: Label = fields[3].parse().map_err(parse_err)?;
        let provenance = match fields.get(4) {
            Some(p) => p.parse().map_err(parse_err)?,
            None => LabelProvenance::Manual,
        };
        out.insert(
            (item.clone(), value.clone()),
            GoldLabel {
                item,
                value,
                label,
                provenance,
            },
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str, p: &str) -> DataItem {
        DataItem::new(s, p).unwrap()
    }
    fn v(o: &str) -> Value {
        Value::new(o).unwrap()
    }

    #[test]
    fn lcwa_partitions() {
        let kb: KbSnapshot = [(d("Obama", "nationality"), v("USA"))].into_iter().collect();
        let triples = [
            (d("Obama", "nationality"), v("USA")),
            (d("Obama", "nationality"), v("Kenya")),
            (d("Obama", "birthplace"), v("Honolulu")),
        ];
        let labels = label_lcwa(triples.iter().map(|(a, b)| (a, b)), &kb);
        let got: Vec<Label> = labels.iter().map(|l| l.label).collect();
        assert_eq!(got, [Label::True, Label::False, Label::Unknown]);
    }

    fn rules() -> TypeRules {
        TypeRules::from_json(
            r#"{"rules": [
                {"predicate": "spouse", "checks": [{"check": "reflexivity_forbidden"},
                    {"check": "type_constraint", "position": "object", "type": "person"}]},
                {"predicate": "weight", "checks": [{"check": "numeric_range", "lo": 0, "hi": 1000, "units": "lb"}]}
             ],
             "entity_types": {"Ann": ["person"], "Paris": ["city"]}}"#,
        )
        .unwrap()
    }

    #[test]
    fn typecheck_rules() {
        let r = rules();
        assert!(r.violates(&d("X", "spouse"), &v("X")));
        assert!(r.violates(&d("Bob", "weight"), &v("1500")));
        assert!(!r.violates(&d("Bob", "weight"), &v("180")));
        assert!(r.violates(&d("Bob", "spouse"), &v("Paris")));
        assert!(!r.violates(&d("Bob", "spouse"), &v("Ann")));
        // unknown entity type: cannot judge
        assert!(!r.violates(&d("Bob", "spouse"), &v("Zed")));
        // non-numeric: skipped
        assert!(!r.violates(&d("Bob", "weight"), &v("heavy")));
        assert!(!r.violates(&d("Bob", "height"), &v("1500")));
    }

    #[test]
    fn typecheck_overrides_lcwa() {
        let kb: KbSnapshot = [(d("X", "spouse"), v("X"))].into_iter().collect();
        let triples = [(d("X", "spouse"), v("X"))];
        let it = || triples.iter().map(|(a, b)| (a, b));
        let merged = merge_labels(label_lcwa(it(), &kb), label_typecheck(it(), &rules()));
        let l = &merged[&(d("X", "spouse"), v("X"))];
        assert_eq!((l.label, l.provenance), (Label::False, LabelProvenance::Typecheck));
    }

    #[test]
    fn label_file_round_trip() {
        let kb: KbSnapshot = [(d("a", "p"), v("1"))].into_iter().collect();
        let triples = [(d("a", "p"), v("1")), (d("a", "p"), v("2")), (d("b", "p"), v("x y"))];
        let labels = label_lcwa(triples.iter().map(|(a, b)| (a, b)), &kb);
        let text = write_labels(&labels);
        let back = read_labels(text.as_bytes(), Path::new("mem")).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(truth_map(&back).len(), 2);
    }

    #[test]
    fn kb_tsv() {
        let kb = KbSnapshot::read_tsv("# kb\na\tp\t1.50\n\nb\tq\tz\n".as_bytes(), Path::new("kb")).unwrap();
        assert_eq!(kb.len(), 2);
        assert!(kb.contains(&d("a", "p"), &v("1.5")));
        assert!(KbSnapshot::read_tsv("a\tp\n".as_bytes(), Path::new("kb")).is_err());
    }
}
