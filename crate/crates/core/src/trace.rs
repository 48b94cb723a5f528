//! Event vocabulary, the per-session trace container and its line-delimited
//! JSON file format.
//!
//! A trace file is UTF-8. Line 1 is a header record
//! `{"formatVersion":1,"participantId":...,"ageGroup":...}`; every following
//! line is one event `{"t":..,"kind":..,<kind fields>}`. Unknown fields are
//! rejected on both kinds of record.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::replay::{BrowserState, StateError};

pub const FORMAT_VERSION: u32 = 1;

/// Milliseconds since session start.
pub type Millis = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TabId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WindowId(pub u32);

impl fmt::Display for TabId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tab {}", self.0)
    }
}

impl fmt::Display for WindowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "window {}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Disposition {
    SameTab,
    NewTab,
    NewWindow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Platform {
    Facebook,
    Twitter,
    Reddit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShareAction {
    Post,
    Reshare,
    Favorite,
    Comment,
    Vote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Audience {
    Public,
    Restricted,
    Unknown,
}

/// The six age buckets used for stratified reporting, plus `unknown`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AgeGroup {
    #[serde(rename = "19-24")]
    From19To24,
    #[serde(rename = "25-34")]
    From25To34,
    #[serde(rename = "35-44")]
    From35To44,
    #[serde(rename = "45-54")]
    From45To54,
    #[serde(rename = "55-65")]
    From55To65,
    #[serde(rename = "65+")]
    Over65,
    #[serde(rename = "unknown")]
    Unknown,
}

impl AgeGroup {
    pub const BUCKETS: [AgeGroup; 6] = [
        AgeGroup::From19To24,
        AgeGroup::From25To34,
        AgeGroup::From35To44,
        AgeGroup::From45To54,
        AgeGroup::From55To65,
        AgeGroup::Over65,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AgeGroup::From19To24 => "19-24",
            AgeGroup::From25To34 => "25-34",
            AgeGroup::From35To44 => "35-44",
            AgeGroup::From45To54 => "45-54",
            AgeGroup::From55To65 => "55-65",
            AgeGroup::Over65 => "65+",
            AgeGroup::Unknown => "unknown",
        }
    }
}

impl fmt::Display for AgeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for AgeGroup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AgeGroup::BUCKETS
            .iter()
            .chain(std::iter::once(&AgeGroup::Unknown))
            .find(|g| g.label() == s)
            .copied()
            .ok_or_else(|| format!("unknown age group {s:?}"))
    }
}

/// One browser event. Field names on the wire are the camelCase forms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all_fields = "camelCase", deny_unknown_fields)]
pub enum EventKind {
    BrowserStartup {
        system_clock_ms: i64,
    },
    SystemClockChange {
        delta_ms: i64,
    },
    AddressBarEntry {
        tab_id: TabId,
        url: String,
    },
    PageLoad {
        tab_id: TabId,
        window_id: WindowId,
        url: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        http_referrer: Option<String>,
    },
    HistoryStateUpdate {
        tab_id: TabId,
        new_url: String,
    },
    LinkClick {
        source_tab_id: TabId,
        target_url: String,
        disposition: Disposition,
    },
    TabOpened {
        tab_id: TabId,
        window_id: WindowId,
    },
    TabActivated {
        window_id: WindowId,
        tab_id: TabId,
    },
    TabClosed {
        tab_id: TabId,
    },
    /// `None` means no browser window has focus.
    WindowFocusChanged {
        window_id: Option<WindowId>,
    },
    WindowClosed {
        window_id: WindowId,
    },
    InputActivity {},
    ScrollPosition {
        tab_id: TabId,
        depth_percent: u8,
    },
    LinkVisible {
        tab_id: TabId,
        url: String,
        area_px: u64,
    },
    LinkHidden {
        tab_id: TabId,
        url: String,
    },
    SocialShare {
        platform: Platform,
        action: ShareAction,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        url: Option<String>,
        audience: Audience,
        reshare: bool,
    },
    BrowserShutdown {},
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::BrowserStartup { .. } => "BrowserStartup",
            EventKind::SystemClockChange { .. } => "SystemClockChange",
            EventKind::AddressBarEntry { .. } => "AddressBarEntry",
            EventKind::PageLoad { .. } => "PageLoad",
            EventKind::HistoryStateUpdate { .. } => "HistoryStateUpdate",
            EventKind::LinkClick { .. } => "LinkClick",
            EventKind::TabOpened { .. } => "TabOpened",
            EventKind::TabActivated { .. } => "TabActivated",
            EventKind::TabClosed { .. } => "TabClosed",
            EventKind::WindowFocusChanged { .. } => "WindowFocusChanged",
            EventKind::WindowClosed { .. } => "WindowClosed",
            EventKind::InputActivity {} => "InputActivity",
            EventKind::ScrollPosition { .. } => "ScrollPosition",
            EventKind::LinkVisible { .. } => "LinkVisible",
            EventKind::LinkHidden { .. } => "LinkHidden",
            EventKind::SocialShare { .. } => "SocialShare",
            EventKind::BrowserShutdown {} => "BrowserShutdown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub t: Millis,
    pub kind: EventKind,
}

impl TraceEvent {
    pub fn new(t: Millis, kind: EventKind) -> Self {
        Self { t, kind }
    }
}

/// One participant session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub participant_id: String,
    pub age_group: AgeGroup,
    /// Free-form provenance note carried in the header (e.g. the generator
    /// algorithm and seed of a synthetic trace).
    pub comment: Option<String>,
    pub events: Vec<TraceEvent>,
}

impl Trace {
    /// Timestamp of the last event, i.e. session length for valid traces.
    pub fn end(&self) -> Millis {
        self.events.last().map_or(0, |e| e.t)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct Header {
    format_version: u32,
    participant_id: String,
    age_group: AgeGroup,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    comment: Option<String>,
}

#[derive(Serialize)]
struct EventRecordOut<'a> {
    t: Millis,
    #[serde(flatten)]
    kind: &'a EventKind,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceError {
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("line {line}: timestamp decreases")]
    OutOfOrderTimestamp { line: usize },
    #[error("line {line}: reference to {id} which is not open")]
    DanglingReference { line: usize, id: String },
}

/// Parses a serialized trace. Checks record syntax, timestamp order and
/// tab/window references; structural session rules are left to
/// [`validate_trace`].
pub fn parse_trace(input: &str) -> Result<Trace, TraceError> {
    let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header_line) = lines.next().ok_or_else(|| TraceError::MalformedRecord {
        line: 1,
        reason: "missing header".into(),
    })?;
    let header: Header =
        serde_json::from_str(header_line).map_err(|e| TraceError::MalformedRecord {
            line: 1,
            reason: e.to_string(),
        })?;
    if header.format_version != FORMAT_VERSION {
        return Err(TraceError::MalformedRecord {
            line: 1,
            reason: format!("unsupported formatVersion {}", header.format_version),
        });
    }

    let mut events = Vec::new();
    let mut state = BrowserState::default();
    let mut last_t = 0;
    for (line, text) in lines {
        if text.trim().is_empty() {
            continue;
        }
        let event = parse_event(text).map_err(|reason| TraceError::MalformedRecord { line, reason })?;
        if event.t < last_t {
            return Err(TraceError::OutOfOrderTimestamp { line });
        }
        last_t = event.t;
        match state.apply(&event.kind) {
            Err(StateError::Dangling(id)) => return Err(TraceError::DanglingReference { line, id }),
            Err(_) | Ok(_) => {}
        }
        events.push(event);
    }

    Ok(Trace {
        participant_id: header.participant_id,
        age_group: header.age_group,
        comment: header.comment,
        events,
    })
}

pub fn parse_trace_bytes(bytes: &[u8]) -> Result<Trace, TraceError> {
    let text = std::str::from_utf8(bytes).map_err(|e| TraceError::MalformedRecord {
        line: 1 + bytes[..e.valid_up_to()].iter().filter(|b| **b == b'\n').count(),
        reason: "invalid UTF-8".into(),
    })?;
    parse_trace(text)
}

fn parse_event(text: &str) -> Result<TraceEvent, String> {
    let mut object: serde_json::Map<String, serde_json::Value> =
        serde_json::from_str(text).map_err(|e| e.to_string())?;
    let t = object
        .remove("t")
        .ok_or_else(|| "missing field `t`".to_string())?
        .as_u64()
        .ok_or_else(|| "`t` must be a non-negative integer".to_string())?;
    let kind = EventKind::deserialize(serde_json::Value::Object(object)).map_err(|e| e.to_string())?;
    Ok(TraceEvent { t, kind })
}

/// Serializes a trace into its line-delimited form (trailing newline
/// included).
pub fn serialize_trace(trace: &Trace) -> String {
    let header = Header {
        format_version: FORMAT_VERSION,
        participant_id: trace.participant_id.clone(),
        age_group: trace.age_group,
        comment: trace.comment.clone(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for event in &trace.events {
        let record = EventRecordOut {
            t: event.t,
            kind: &event.kind,
        };
        out.push_str(&serde_json::to_string(&record).expect("event serializes"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rule {
    OutOfOrderTimestamp,
    DanglingReference { id: String },
    DuplicateTab { id: String },
    TabNotInWindow { tab: TabId, window: WindowId },
    MissingStartup,
    StartupNotFirst,
    UnterminatedSession,
    EventAfterShutdown,
    DepthOutOfRange { depth: u8 },
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::OutOfOrderTimestamp => write!(f, "OutOfOrderTimestamp"),
            Rule::DanglingReference { id } => write!(f, "DanglingReference({id})"),
            Rule::DuplicateTab { id } => write!(f, "DuplicateTab({id})"),
            Rule::TabNotInWindow { tab, window } => write!(f, "TabNotInWindow({tab}, {window})"),
            Rule::MissingStartup => write!(f, "MissingStartup"),
            Rule::StartupNotFirst => write!(f, "StartupNotFirst"),
            Rule::UnterminatedSession => write!(f, "UnterminatedSession"),
            Rule::EventAfterShutdown => write!(f, "EventAfterShutdown"),
            Rule::DepthOutOfRange { depth } => write!(f, "DepthOutOfRange({depth})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Index into `Trace::events`; for session-level rules this is the index
    /// of the event where the rule is detected (or `events.len()`).
    pub index: usize,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "event {}: {}", self.index, self.rule)
    }
}

/// Checks every event invariant. Returns an empty list iff the trace is
/// accepted by all downstream measurements.
pub fn validate_trace(trace: &Trace) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut push = |index, rule| violations.push(Violation { index, rule });

    match trace.events.first() {
        None => push(0, Rule::MissingStartup),
        Some(e) if !matches!(e.kind, EventKind::BrowserStartup { .. }) => {
            push(0, Rule::MissingStartup)
        }
        _ => {}
    }

    let mut state = BrowserState::default();
    let mut last_t = 0;
    let mut shutdown_at = None;
    for (index, event) in trace.events.iter().enumerate() {
        if event.t < last_t {
            push(index, Rule::OutOfOrderTimestamp);
        }
        last_t = last_t.max(event.t);
        if let Some(shutdown) = shutdown_at {
            if shutdown + 1 == index {
                push(index, Rule::EventAfterShutdown);
            }
        }
        match &event.kind {
            EventKind::BrowserStartup { .. } if index != 0 => push(index, Rule::StartupNotFirst),
            EventKind::BrowserShutdown {} => shutdown_at = shutdown_at.or(Some(index)),
            EventKind::ScrollPosition { depth_percent, .. } if *depth_percent > 100 => push(
                index,
                Rule::DepthOutOfRange {
                    depth: *depth_percent,
                },
            ),
            _ => {}
        }
        match state.apply(&event.kind) {
            Ok(()) => {}
            Err(StateError::Dangling(id)) => push(index, Rule::DanglingReference { id }),
            Err(StateError::DuplicateTab(id)) => push(index, Rule::DuplicateTab { id }),
            Err(StateError::TabNotInWindow { tab, window }) => {
                push(index, Rule::TabNotInWindow { tab, window })
            }
        }
    }

    if !matches!(
        trace.events.last().map(|e| &e.kind),
        Some(EventKind::BrowserShutdown {})
    ) && shutdown_at.is_none()
    {
        push(trace.events.len(), Rule::UnterminatedSession);
    }
    violations
}
