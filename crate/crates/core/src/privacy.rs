//! Aggregation into category counts, per-study pseudonymous identifiers,
//! schema-checked digests and the on-disk digest store.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use hmac::{Hmac, Mac};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::Sha256;
use thiserror::Error;

use crate::chronology::StudyClock;
use crate::exposure::{Category, CategoryLabel, DomainLists, Exposures, Shares, UNTRACKED};
use crate::trace::Trace;

pub const DAY_MS: i64 = 86_400_000;
/// Default aggregation window: 7 days.
pub const DEFAULT_WINDOW_MS: i64 = 7 * DAY_MS;
/// Raw digests are kept for at most two years.
pub const RETENTION_MS: i64 = 730 * DAY_MS;

#[derive(Debug, Error)]
pub enum PrivacyError {
    #[error("{0} must not be empty")]
    EmptyInput(&'static str),
    #[error("field {0:?} is not declared in the study schema")]
    UndeclaredField(String),
    #[error("field {field:?} does not hold a {expected}")]
    TypeMismatch { field: String, expected: ValueType },
    #[error("duplicate schema field {0:?}")]
    DuplicateField(String),
    #[error("window end {end} is not after start {start}")]
    BadWindow { start: i64, end: i64 },
    #[error("{0:?} cannot be used as a store path component")]
    BadPathComponent(String),
    #[error("digest store unreadable at {path}: {source}")]
    StoreUnreadable {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed digest {path}: {source}")]
    MalformedDigest {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

fn unreadable(path: &Path) -> impl FnOnce(io::Error) -> PrivacyError + '_ {
    move |source| PrivacyError::StoreUnreadable {
        path: path.to_path_buf(),
        source,
    }
}

/// Half-open `[start, end)` in study-clock milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Window {
    pub start: i64,
    pub end: i64,
}

impl Window {
    pub fn new(start: i64, end: i64) -> Result<Self, PrivacyError> {
        if end <= start {
            return Err(PrivacyError::BadWindow { start, end });
        }
        Ok(Self { start, end })
    }

    /// The aligned window of length `len_ms` containing `t`.
    pub fn containing(t: i64, len_ms: i64) -> Self {
        let start = t.div_euclid(len_ms) * len_ms;
        Self { start, end: start + len_ms }
    }

    pub fn contains(&self, t: i64) -> bool {
        self.start <= t && t < self.end
    }
}

/// Counts of each category assigned by `category_of`.
pub fn aggregate<T, F>(items: &[T], category_of: F) -> BTreeMap<String, u64>
where
    F: Fn(&T) -> String,
{
    let mut counts = BTreeMap::new();
    for item in items {
        *counts.entry(category_of(item)).or_insert(0) += 1;
    }
    counts
}

/// A categorized observation at a study timestamp.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub at: i64,
    pub category: String,
}

/// Splits observations into aligned windows and counts categories in each.
pub fn aggregate_windows(observations: &[Observation], window_ms: i64) -> BTreeMap<Window, BTreeMap<String, u64>> {
    let mut by_window: BTreeMap<Window, Vec<&Observation>> = BTreeMap::new();
    for o in observations {
        by_window.entry(Window::containing(o.at, window_ms)).or_default().push(o);
    }
    by_window
        .into_iter()
        .map(|(w, items)| (w, aggregate(&items, |o| o.category.clone())))
        .collect()
}

type HmacSha256 = Hmac<Sha256>;

/// Per-study participant identifier: HMAC-SHA256 keyed by the participant's
/// secret over the study id, as 64 hex digits.
pub fn pseudo_id(study_id: &str, participant_secret: &str) -> Result<String, PrivacyError> {
    if study_id.is_empty() {
        return Err(PrivacyError::EmptyInput("studyId"));
    }
    if participant_secret.is_empty() {
        return Err(PrivacyError::EmptyInput("participantSecret"));
    }
    let mut mac = HmacSha256::new_from_slice(participant_secret.as_bytes()).expect("HMAC accepts any key length");
    mac.update(b"webmeter/pseudo-id/v1\0");
    mac.update(study_id.as_bytes());
    Ok(hex::encode(mac.finalize().into_bytes()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValueType {
    /// Non-negative integer.
    Count,
    /// Text label.
    Category,
    /// Non-negative integer bucket start in milliseconds.
    TimestampBucket,
}

impl std::fmt::Display for ValueType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ValueType::Count => "count",
            ValueType::Category => "category",
            ValueType::TimestampBucket => "timestamp-bucket",
        })
    }
}

impl ValueType {
    pub fn accepts(self, value: &Value) -> bool {
        match self {
            ValueType::Count | ValueType::TimestampBucket => value.is_u64(),
            ValueType::Category => value.is_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskLabel {
    Low,
    Medium,
    High,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SchemaField {
    pub name: String,
    pub value_type: ValueType,
    pub risk_label: RiskLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct StudySchema {
    pub study_id: String,
    pub fields: Vec<SchemaField>,
}

impl StudySchema {
    pub fn new(study_id: impl Into<String>, fields: Vec<SchemaField>) -> Result<Self, PrivacyError> {
        let schema = Self {
            study_id: study_id.into(),
            fields,
        };
        schema.check()?;
        Ok(schema)
    }

    fn check(&self) -> Result<(), PrivacyError> {
        if self.study_id.is_empty() {
            return Err(PrivacyError::EmptyInput("studyId"));
        }
        let mut seen = HashSet::new();
        for f in &self.fields {
            if !seen.insert(f.name.as_str()) {
                return Err(PrivacyError::DuplicateField(f.name.clone()));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, SchemaParseError> {
        let schema: StudySchema = serde_json::from_str(text)?;
        schema.check()?;
        Ok(schema)
    }

    pub fn field(&self, name: &str) -> Option<&SchemaField> {
        self.fields.iter().find(|f| f.name == name)
    }

    /// Count fields for every exposure, visit and share category produced by
    /// [`exposure_observations`].
    pub fn exposure_study(study_id: impl Into<String>) -> Self {
        let count = |name: String, risk_label| SchemaField {
            name,
            value_type: ValueType::Count,
            risk_label,
        };
        let mut labels: Vec<String> = Category::ALL.iter().map(|c| c.label().to_string()).collect();
        labels.push(UNTRACKED.to_string());
        let mut fields = Vec::new();
        for src in &labels {
            for exp in Category::ALL {
                fields.push(count(format!("exposures.{src}.{exp}"), RiskLabel::Medium));
            }
        }
        fields.push(count("exposures.untracked".into(), RiskLabel::Low));
        for label in &labels {
            fields.push(count(format!("visits.{label}"), RiskLabel::Medium));
        }
        for label in &labels {
            fields.push(count(format!("shares.{label}"), RiskLabel::High));
        }
        Self::new(study_id, fields).expect("generated names are unique")
    }
}

#[derive(Debug, Error)]
pub enum SchemaParseError {
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(#[from] PrivacyError),
}

/// Observations of one session for the exposure study: one per exposure,
/// untracked exposure, visit and link share. All are attributed to the
/// session's start on the study clock.
pub fn exposure_observations(
    trace: &Trace,
    exposures: &Exposures,
    shares: &Shares,
    visit_urls: &[String],
    lists: &DomainLists,
) -> Vec<Observation> {
    let at = StudyClock::from_trace(trace).base_system_ms();
    let mut out = Vec::new();
    let mut push = |category: String| out.push(Observation { at, category });
    for r in &exposures.records {
        push(format!("exposures.{}.{}", r.source_category, r.exposed_category));
    }
    for _ in 0..exposures.untracked {
        push("exposures.untracked".into());
    }
    for url in visit_urls {
        let label = lists
            .lookup_url(url)
            .map_or(CategoryLabel::Untracked, |(_, c)| CategoryLabel::Tracked(c));
        push(format!("visits.{label}"));
    }
    for s in &shares.records {
        push(format!("shares.{}", s.shared_category));
    }
    for _ in 0..shares.untracked {
        push(format!("shares.{UNTRACKED}"));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Digest {
    pub study_id: String,
    pub pseudo_id: String,
    pub window_start: i64,
    pub window_end: i64,
    pub payload: BTreeMap<String, Value>,
    /// Names the study key the digest is sealed under.
    pub key_id: String,
}

/// Packages aggregates for one participant and window. Every aggregate must
/// be a declared schema field holding a value of the declared type.
pub fn build_digest(
    aggregates: &BTreeMap<String, Value>,
    schema: &StudySchema,
    pseudo_id: &str,
    window: Window,
    key_id: &str,
) -> Result<Digest, PrivacyError> {
    Window::new(window.start, window.end)?;
    for (name, value) in aggregates {
        let field = schema
            .field(name)
            .ok_or_else(|| PrivacyError::UndeclaredField(name.clone()))?;
        if !field.value_type.accepts(value) {
            return Err(PrivacyError::TypeMismatch {
                field: name.clone(),
                expected: field.value_type,
            });
        }
    }
    Ok(Digest {
        study_id: schema.study_id.clone(),
        pseudo_id: pseudo_id.to_string(),
        window_start: window.start,
        window_end: window.end,
        payload: aggregates.clone(),
        key_id: key_id.to_string(),
    })
}

pub fn counts_payload(counts: &BTreeMap<String, u64>) -> BTreeMap<String, Value> {
    counts.iter().map(|(k, v)| (k.clone(), Value::from(*v))).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DigestViolation {
    WrongStudy { expected: String, found: String },
    UndeclaredField(String),
    WrongType { field: String, expected: ValueType },
    EmptyWindow,
}

impl std::fmt::Display for DigestViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DigestViolation::WrongStudy { expected, found } => {
                write!(f, "digest for study {found:?}, schema is {expected:?}")
            }
            DigestViolation::UndeclaredField(name) => write!(f, "undeclared field {name:?}"),
            DigestViolation::WrongType { field, expected } => write!(f, "field {field:?} is not a {expected}"),
            DigestViolation::EmptyWindow => write!(f, "window end not after start"),
        }
    }
}

/// Checks a digest against its study schema. Empty means it conforms.
pub fn validate_digest(digest: &Digest, schema: &StudySchema) -> Vec<DigestViolation> {
    let mut out = Vec::new();
    if digest.study_id != schema.study_id {
        out.push(DigestViolation::WrongStudy {
            expected: schema.study_id.clone(),
            found: digest.study_id.clone(),
        });
    }
    if digest.window_end <= digest.window_start {
        out.push(DigestViolation::EmptyWindow);
    }
    for (name, value) in &digest.payload {
        match schema.field(name) {
            None => out.push(DigestViolation::UndeclaredField(name.clone())),
            Some(field) if !field.value_type.accepts(value) => out.push(DigestViolation::WrongType {
                field: name.clone(),
                expected: field.value_type,
            }),
            Some(_) => {}
        }
    }
    out
}

/// Seals serialized digests under a study key. The store only needs the key
/// id; the cipher itself is supplied by the deployment.
pub trait DigestCipher {
    fn key_id(&self) -> &str;
    fn seal(&self, plaintext: &[u8]) -> Vec<u8>;
    fn open(&self, sealed: &[u8]) -> Option<Vec<u8>>;
}

/// Identity cipher for local analysis and tests.
#[derive(Debug, Clone)]
pub struct PlaintextCipher {
    pub key_id: String,
}

impl DigestCipher for PlaintextCipher {
    fn key_id(&self) -> &str {
        &self.key_id
    }

    fn seal(&self, plaintext: &[u8]) -> Vec<u8> {
        plaintext.to_vec()
    }

    fn open(&self, sealed: &[u8]) -> Option<Vec<u8>> {
        Some(sealed.to_vec())
    }
}

/// Digest directory laid out as `{studyId}/{pseudoId}/{windowStart}.json`.
///
/// Writers need exclusive access to the directory; concurrent readers are
/// fine between writes.
#[derive(Debug, Clone)]
pub struct DigestStore {
    root: PathBuf,
}

fn check_component(s: &str) -> Result<&str, PrivacyError> {
    let ok = !s.is_empty()
        && s != "."
        && s != ".."
        && s.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.'));
    if ok {
        Ok(s)
    } else {
        Err(PrivacyError::BadPathComponent(s.to_string()))
    }
}

impl DigestStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_of(&self, digest: &Digest) -> Result<PathBuf, PrivacyError> {
        Ok(self
            .root
            .join(check_component(&digest.study_id)?)
            .join(check_component(&digest.pseudo_id)?)
            .join(format!("{}.json", digest.window_start)))
    }

    pub fn write(&self, digest: &Digest) -> Result<PathBuf, PrivacyError> {
        let path = self.path_of(digest)?;
        let dir = path.parent().expect("digest path has a parent");
        fs::create_dir_all(dir).map_err(unreadable(dir))?;
        let mut text = serde_json::to_string_pretty(digest).expect("digest serializes");
        text.push('\n');
        fs::write(&path, text).map_err(unreadable(&path))?;
        Ok(path)
    }

    /// Every digest file in the store, sorted by path.
    pub fn files(&self) -> Result<Vec<PathBuf>, PrivacyError> {
        let mut out = Vec::new();
        if !self.root.exists() {
            return Ok(out);
        }
        for study in read_dir_sorted(&self.root)? {
            if !study.is_dir() {
                continue;
            }
            for participant in read_dir_sorted(&study)? {
                if !participant.is_dir() {
                    continue;
                }
                out.extend(
                    read_dir_sorted(&participant)?
                        .into_iter()
                        .filter(|p| p.extension().is_some_and(|e| e == "json")),
                );
            }
        }
        Ok(out)
    }

    pub fn read(&self, path: &Path) -> Result<Digest, PrivacyError> {
        let text = fs::read_to_string(path).map_err(unreadable(path))?;
        serde_json::from_str(&text).map_err(|source| PrivacyError::MalformedDigest {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn digests(&self) -> Result<Vec<Digest>, PrivacyError> {
        self.files()?.iter().map(|p| self.read(p)).collect()
    }

    /// Removes every digest of `pseudo_id` in every study. Returns the
    /// number of digests removed.
    pub fn delete_participant(&self, pseudo_id: &str) -> Result<usize, PrivacyError> {
        let pseudo_id = check_component(pseudo_id)?;
        if !self.root.exists() {
            return Ok(0);
        }
        let mut removed = 0;
        for study in read_dir_sorted(&self.root)? {
            let dir = study.join(pseudo_id);
            if !dir.is_dir() {
                continue;
            }
            removed += read_dir_sorted(&dir)?
                .iter()
                .filter(|p| p.extension().is_some_and(|e| e == "json"))
                .count();
            fs::remove_dir_all(&dir).map_err(unreadable(&dir))?;
        }
        Ok(removed)
    }

    /// Removes digests whose window ended more than the retention period
    /// before `now_ms`. Returns the number removed.
    pub fn retention_sweep(&self, now_ms: i64) -> Result<usize, PrivacyError> {
        let cutoff = now_ms - RETENTION_MS;
        let mut removed = 0;
        for path in self.files()? {
            if self.read(&path)?.window_end < cutoff {
                fs::remove_file(&path).map_err(unreadable(&path))?;
                removed += 1;
                if let Some(dir) = path.parent() {
                    if fs::read_dir(dir).map_err(unreadable(dir))?.next().is_none() {
                        fs::remove_dir(dir).map_err(unreadable(dir))?;
                    }
                }
            }
        }
        Ok(removed)
    }
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<PathBuf>, PrivacyError> {
    let mut entries = fs::read_dir(dir)
        .map_err(unreadable(dir))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(unreadable(dir))?;
    entries.sort();
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn schema() -> StudySchema {
        StudySchema::new(
            "study-a",
            vec![
                SchemaField {
                    name: "visits.news".into(),
                    value_type: ValueType::Count,
                    risk_label: RiskLabel::Medium,
                },
                SchemaField {
                    name: "topCategory".into(),
                    value_type: ValueType::Category,
                    risk_label: RiskLabel::High,
                },
            ],
        )
        .unwrap()
    }

    fn window() -> Window {
        Window::new(0, DEFAULT_WINDOW_MS).unwrap()
    }

    #[test]
    fn aggregate_examples() {
        let none: [u8; 0] = [];
        assert!(aggregate(&none, |_| "c".into()).is_empty());
        let ten = [0u8; 10];
        assert_eq!(aggregate(&ten, |_| "c".into()), BTreeMap::from([("c".to_string(), 10)]));
    }

    #[test]
    fn pseudo_ids_are_deterministic_and_study_specific() {
        let a = pseudo_id("study-a", "secret").unwrap();
        assert_eq!(a, pseudo_id("study-a", "secret").unwrap());
        assert_ne!(a, pseudo_id("study-b", "secret").unwrap());
        assert_eq!(a.len(), 64);
        assert!(a.bytes().all(|b| b.is_ascii_hexdigit()));
        assert!(matches!(pseudo_id("", "s"), Err(PrivacyError::EmptyInput(_))));
        assert!(matches!(pseudo_id("s", ""), Err(PrivacyError::EmptyInput(_))));
    }

    #[test]
    fn digest_building() {
        let d = build_digest(&BTreeMap::new(), &schema(), "abc", window(), "k1").unwrap();
        assert!(d.payload.is_empty());
        assert!(validate_digest(&d, &schema()).is_empty());

        let undeclared = BTreeMap::from([("visits.misinfo".to_string(), json!(3))]);
        assert!(matches!(
            build_digest(&undeclared, &schema(), "abc", window(), "k1"),
            Err(PrivacyError::UndeclaredField(f)) if f == "visits.misinfo"
        ));
        let mistyped = BTreeMap::from([("visits.news".to_string(), json!("lots"))]);
        assert!(matches!(
            build_digest(&mistyped, &schema(), "abc", window(), "k1"),
            Err(PrivacyError::TypeMismatch { .. })
        ));
    }

    #[test]
    fn validation_flags_category_text_in_count_field() {
        let mut d = build_digest(&BTreeMap::new(), &schema(), "abc", window(), "k1").unwrap();
        d.payload.insert("visits.news".into(), json!("news"));
        assert_eq!(
            validate_digest(&d, &schema()),
            vec![DigestViolation::WrongType {
                field: "visits.news".into(),
                expected: ValueType::Count
            }]
        );
    }

    #[test]
    fn schema_json_rejects_duplicates_and_missing_risk() {
        let dup = r#"{"studyId":"s","fields":[
            {"name":"a","valueType":"count","riskLabel":"low"},
            {"name":"a","valueType":"count","riskLabel":"low"}]}"#;
        assert!(matches!(StudySchema::from_json(dup), Err(SchemaParseError::Invalid(_))));
        let no_risk = r#"{"studyId":"s","fields":[{"name":"a","valueType":"count"}]}"#;
        assert!(matches!(StudySchema::from_json(no_risk), Err(SchemaParseError::Json(_))));
        let ok = serde_json::to_string(&schema()).unwrap();
        assert_eq!(StudySchema::from_json(&ok).unwrap(), schema());
    }

    #[test]
    fn windows_align() {
        let w = Window::containing(DEFAULT_WINDOW_MS + 5, DEFAULT_WINDOW_MS);
        assert_eq!(w, Window { start: DEFAULT_WINDOW_MS, end: 2 * DEFAULT_WINDOW_MS });
        assert!(w.contains(DEFAULT_WINDOW_MS + 5));
        assert!(Window::new(5, 5).is_err());
    }

    #[test]
    fn store_delete_and_sweep() {
        let dir = tempfile::tempdir().unwrap();
        let store = DigestStore::new(dir.path());
        assert_eq!(store.delete_participant("nobody").unwrap(), 0);
        let now = 1_000 * DAY_MS;
        for (pseudo, start) in [("p1", now - 800 * DAY_MS), ("p1", now - 10 * DAY_MS), ("p2", now - 7 * DAY_MS)] {
            let w = Window::new(start, start + DEFAULT_WINDOW_MS).unwrap();
            store.write(&build_digest(&BTreeMap::new(), &schema(), pseudo, w, "k").unwrap()).unwrap();
        }
        assert_eq!(store.files().unwrap().len(), 3);
        assert_eq!(store.retention_sweep(now - 500 * DAY_MS).unwrap(), 0);
        assert_eq!(store.retention_sweep(now).unwrap(), 1);
        assert_eq!(store.delete_participant("p1").unwrap(), 1);
        assert_eq!(store.delete_participant("p1").unwrap(), 0);
        assert_eq!(store.digests().unwrap().len(), 1);
        assert!(matches!(store.delete_participant("../x"), Err(PrivacyError::BadPathComponent(_))));
    }

    #[test]
    fn unreadable_store_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("not-a-dir");
        fs::write(&file, "x").unwrap();
        let store = DigestStore::new(&file);
        assert!(matches!(store.files(), Err(PrivacyError::StoreUnreadable { .. })));
    }

    #[test]
    fn plaintext_cipher_round_trips() {
        let c = PlaintextCipher { key_id: "k1".into() };
        assert_eq!(c.open(&c.seal(b"abc")).unwrap(), b"abc");
        assert_eq!(c.key_id(), "k1");
    }
}
